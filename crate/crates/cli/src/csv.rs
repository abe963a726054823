//! Field and table CSV files: `{:.16e}` floats, LF line endings, rows in
//! lexicographic `(t, a, x)` order.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use agecontrol_core::{Field, Grid, Rank};

use crate::error::{CliError, CliResult};

pub fn float(v: f64) -> String {
    format!("{v:.16e}")
}

/// Renders a header and rows of preformatted cells.
pub fn render_table(header: &[&str], rows: impl IntoIterator<Item = Vec<String>>) -> String {
    let mut out = header.join(",");
    out.push('\n');
    for row in rows {
        out.push_str(&row.join(","));
        out.push('\n');
    }
    out
}

pub fn write_text(path: &Path, text: &str) -> CliResult<()> {
    fs::write(path, text).map_err(|e| CliError::io(path, e))
}

pub fn header_for(rank: Rank) -> &'static str {
    match rank {
        Rank::Trajectory => "t,a,x,value",
        Rank::Slice => "a,x,value",
        Rank::Profile => "x,value",
    }
}

pub fn render_field(field: &Field) -> String {
    let g = field.grid();
    let v = field.values();
    let (nx, na) = (g.nx(), g.na());
    let xs: Vec<String> = (0..nx).map(|i| float(g.x(i))).collect();
    let mut out = String::with_capacity(v.len() * 96);
    out.push_str(header_for(field.rank()));
    out.push('\n');
    match field.rank() {
        Rank::Profile => {
            for i in 0..nx {
                let _ = writeln!(out, "{},{}", xs[i], float(v[i]));
            }
        }
        Rank::Slice => {
            for j in 0..na {
                let a = float(g.a(j));
                for i in 0..nx {
                    let _ = writeln!(out, "{a},{},{}", xs[i], float(v[j * nx + i]));
                }
            }
        }
        Rank::Trajectory => {
            for n in 0..g.levels() {
                let t = float(g.t(n));
                for j in 0..na {
                    let a = float(g.a(j));
                    let base = (n * na + j) * nx;
                    for i in 0..nx {
                        let _ = writeln!(out, "{t},{a},{},{}", xs[i], float(v[base + i]));
                    }
                }
            }
        }
    }
    out
}

pub fn export_field_csv(field: &Field, path: &Path) -> CliResult<()> {
    write_text(path, &render_field(field))
}

/// Reads a field written by [`export_field_csv`] on `grid`; the rank comes
/// from the header and every coordinate must match the grid exactly.
pub fn import_field_csv(path: &Path, grid: &Grid) -> CliResult<Field> {
    let text = fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
    parse_field(&text, grid).map_err(|detail| CliError::Csv { path: path.to_path_buf(), detail })
}

pub fn parse_field(text: &str, grid: &Grid) -> Result<Field, String> {
    let mut lines = text.split('\n');
    let header = lines.next().ok_or("empty file")?;
    let rank = [Rank::Trajectory, Rank::Slice, Rank::Profile]
        .into_iter()
        .find(|r| header_for(*r) == header)
        .ok_or_else(|| format!("unknown header {header:?}"))?;
    let len = rank.len(grid);
    let (nx, na) = (grid.nx(), grid.na());
    let mut values = Vec::with_capacity(len);
    for (k, line) in lines.enumerate() {
        if line.is_empty() {
            continue;
        }
        if k >= len {
            return Err(format!("more than {len} rows"));
        }
        let cells: Vec<&str> = line.split(',').collect();
        let (i, j, n) = (k % nx, (k / nx) % na, k / (nx * na));
        let expected: Vec<f64> = match rank {
            Rank::Profile => vec![grid.x(i)],
            Rank::Slice => vec![grid.a(k / nx), grid.x(i)],
            Rank::Trajectory => vec![grid.t(n), grid.a(j), grid.x(i)],
        };
        if cells.len() != expected.len() + 1 {
            return Err(format!("row {}: expected {} columns", k + 1, expected.len() + 1));
        }
        for (c, e) in cells.iter().zip(&expected) {
            let got: f64 = c.parse().map_err(|_| format!("row {}: bad number {c:?}", k + 1))?;
            if got != *e {
                return Err(format!("row {}: coordinate {got} does not match grid value {e}", k + 1));
            }
        }
        let last = cells[expected.len()];
        values.push(last.parse::<f64>().map_err(|_| format!("row {}: bad number {last:?}", k + 1))?);
    }
    if values.len() != len {
        return Err(format!("expected {len} rows, found {}", values.len()));
    }
    Field::from_values(grid, rank, values).map_err(|e| e.to_string())
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn three_line_table() {
        let t = render_table(&["t", "a", "x", "value"], [0.5, -0.5].iter().enumerate().map(|(i, v)| {
            vec![float(0.0), float(0.5), float(0.25 + 0.5 * i as f64), float(*v)]
        }));
        assert_eq!(t.lines().count(), 3);
        assert!(t.ends_with('\n') && !t.contains('\r'));
        assert!(t.contains("-5.0000000000000000e-1"));
    }

    #[test]
    fn headers_by_rank() {
        let g = Grid::aligned(1.0, 1.0, 4, 5, 0.3).unwrap();
        for (rank, h) in [(Rank::Profile, "x,value"), (Rank::Slice, "a,x,value"), (Rank::Trajectory, "t,a,x,value")] {
            let text = render_field(&Field::zeros(&g, rank));
            assert_eq!(text.lines().next().unwrap(), h);
            assert_eq!(text.lines().count(), 1 + rank.len(&g));
        }
    }

    #[test]
    fn rejects_wrong_grid() {
        let g = Grid::aligned(1.0, 1.0, 4, 5, 0.3).unwrap();
        let h = Grid::aligned(1.0, 1.0, 4, 7, 0.3).unwrap();
        let text = render_field(&Field::zeros(&g, Rank::Slice));
        assert!(parse_field(&text, &h).is_err());
        assert!(parse_field("x,y\n", &g).is_err());
    }

    proptest! {
        #[test]
        fn round_trip_is_bit_exact(vals in proptest::collection::vec(proptest::num::f64::NORMAL | proptest::num::f64::SUBNORMAL | proptest::num::f64::ZERO, 5 * 4 * 5)) {
            let g = Grid::new(1.0, 1.0, 4, 4, 5, 0.3).unwrap();
            let f = Field::from_values(&g, Rank::Trajectory, vals).unwrap();
            let back = parse_field(&render_field(&f), &g).unwrap();
            prop_assert!(f.values().iter().zip(back.values()).all(|(a, b)| a.to_bits() == b.to_bits()));
        }
    }
}
