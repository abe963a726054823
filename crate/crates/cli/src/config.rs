//! Experiment configuration: TOML with nested blocks, unknown keys rejected,
//! `"auto"` accepted where a value can be derived.

use std::fmt;
use std::path::Path;

use agecontrol_core::{
    ControlRegion, DiffusionCoefficient, Fertility, Grid, Mortality, RateSpec, TimeScheme, WeightOptions, WeightSet,
};
use serde::de::{self, Deserializer};
use serde::{Deserialize, Serialize, Serializer};

use crate::error::{CliError, CliResult};

/// A value or the literal string `"auto"`.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub enum Auto<T> {
    #[default]
    Auto,
    Value(T),
}

impl<T> Auto<T> {
    pub fn value(self) -> Option<T> {
        match self {
            Auto::Auto => None,
            Auto::Value(v) => Some(v),
        }
    }
}

impl<T: Serialize> Serialize for Auto<T> {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        match self {
            Auto::Auto => s.serialize_str("auto"),
            Auto::Value(v) => v.serialize(s),
        }
    }
}

impl<'de, T: Deserialize<'de>> Deserialize<'de> for Auto<T> {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        #[derive(Deserialize)]
        #[serde(untagged)]
        enum Raw<T> {
            Text(String),
            Value(T),
        }
        match Raw::deserialize(d)? {
            Raw::Text(s) if s == "auto" => Ok(Auto::Auto),
            Raw::Text(s) => Err(de::Error::custom(format!("expected a number or \"auto\", got {s:?}"))),
            Raw::Value(v) => Ok(Auto::Value(v)),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum CommandName {
    Simulate,
    Adjoint,
    Certify,
    Control,
    Sweep,
}

impl fmt::Display for CommandName {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            CommandName::Simulate => "simulate",
            CommandName::Adjoint => "adjoint",
            CommandName::Certify => "certify",
            CommandName::Control => "control",
            CommandName::Sweep => "sweep",
        };
        f.write_str(s)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "kebab-case")]
pub enum SchemeName {
    #[default]
    TrBdf2,
    BackwardEuler,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    #[serde(default = "default_seed")]
    pub seed: u64,
    /// Command executed by `run`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub command: Option<CommandName>,
    #[serde(default)]
    pub scheme: SchemeName,
    pub grid: GridBlock,
    #[serde(default)]
    pub coefficient: CoefficientBlock,
    #[serde(default)]
    pub rates: RatesBlock,
    #[serde(default)]
    pub region: RegionBlock,
    #[serde(default)]
    pub weights: WeightsBlock,
    #[serde(default)]
    pub simulate: SimulateBlock,
    #[serde(default)]
    pub adjoint: AdjointBlock,
    #[serde(default)]
    pub certify: CertifyBlock,
    #[serde(default)]
    pub control: ControlBlock,
    #[serde(default)]
    pub sweep: SweepBlock,
}

fn default_seed() -> u64 {
    42
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridBlock {
    #[serde(rename = "T")]
    pub t_final: f64,
    #[serde(rename = "A")]
    pub a_max: f64,
    pub nt: usize,
    #[serde(default)]
    pub na: Auto<usize>,
    pub nx: usize,
    pub x0: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum CoefficientPreset {
    #[default]
    PowerLaw,
    Constant,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct CoefficientBlock {
    pub preset: CoefficientPreset,
    pub alpha: f64,
    pub value: f64,
}

impl Default for CoefficientBlock {
    fn default() -> Self {
        CoefficientBlock { preset: CoefficientPreset::PowerLaw, alpha: 0.5, value: 1.0 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum MortalityPreset {
    #[default]
    Constant,
    Gaussian,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum FertilityPreset {
    #[default]
    Zero,
    Ramp,
    Bump,
    Step,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RatesBlock {
    pub mortality: MortalityPreset,
    /// Constant value, or the height of the Gaussian bump.
    pub mortality_value: f64,
    pub mortality_center: f64,
    pub mortality_width: f64,
    pub fertility: FertilityPreset,
    /// Slope, height or step value of the fertility preset.
    pub fertility_value: f64,
    pub abar: f64,
}

impl Default for RatesBlock {
    fn default() -> Self {
        RatesBlock {
            mortality: MortalityPreset::Constant,
            mortality_value: 0.0,
            mortality_center: 0.5,
            mortality_width: 0.1,
            fertility: FertilityPreset::Zero,
            fertility_value: 1.0,
            abar: 0.25,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum RegionKind {
    #[default]
    Single,
    Pair,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RegionBlock {
    pub kind: RegionKind,
    pub intervals: Vec<[f64; 2]>,
}

impl Default for RegionBlock {
    fn default() -> Self {
        RegionBlock { kind: RegionKind::Single, intervals: vec![[0.2, 0.45]] }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
#[serde(deny_unknown_fields, default)]
pub struct WeightsBlock {
    /// `auto` means 1.
    pub s: Auto<f64>,
    pub c1: Auto<f64>,
    pub c2: Auto<f64>,
    pub kappa: Auto<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum DatumKind {
    /// Seeded random smooth data.
    #[default]
    Sample,
    Zero,
    /// `sin(πa/A) sin(πx)`.
    Smooth,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SimulateBlock {
    pub initial: DatumKind,
    pub control: DatumKind,
    pub sample_id: u64,
}

impl Default for SimulateBlock {
    fn default() -> Self {
        SimulateBlock { initial: DatumKind::Sample, control: DatumKind::Zero, sample_id: 0 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct AdjointBlock {
    pub terminal: DatumKind,
    pub source: DatumKind,
    pub sample_id: u64,
    pub nonlocal: bool,
}

impl Default for AdjointBlock {
    fn default() -> Self {
        AdjointBlock { terminal: DatumKind::Sample, source: DatumKind::Zero, sample_id: 0, nonlocal: true }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum InequalityName {
    #[default]
    Carleman,
    Caccioppoli,
    Observability,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum FormName {
    #[default]
    Sharp,
    AgeStrip,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct CertifyBlock {
    pub inequality: InequalityName,
    pub samples: usize,
    /// Carleman parameters; `auto` uses the weights block `s`.
    pub s: Auto<Vec<f64>>,
    pub delta: f64,
    pub form: FormName,
    pub inner: [f64; 2],
    pub outer: [f64; 2],
}

impl Default for CertifyBlock {
    fn default() -> Self {
        CertifyBlock {
            inequality: InequalityName::Carleman,
            samples: 20,
            s: Auto::Auto,
            delta: 1.5,
            form: FormName::Sharp,
            inner: [0.55, 0.6],
            outer: [0.5, 0.7],
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ControlBlock {
    pub delta: f64,
    pub epsilon: f64,
    pub max_iters: usize,
    pub tol: f64,
    pub initial: DatumKind,
    pub sample_id: u64,
}

impl Default for ControlBlock {
    fn default() -> Self {
        ControlBlock { delta: 1.5, epsilon: 1e-6, max_iters: 200, tol: 1e-8, initial: DatumKind::Smooth, sample_id: 0 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
#[serde(deny_unknown_fields, default)]
pub struct SweepBlock {
    pub command: Option<CommandName>,
    pub alpha: Vec<f64>,
    pub delta: Vec<f64>,
    pub epsilon: Vec<f64>,
    pub s: Vec<f64>,
    pub seed: Vec<u64>,
    pub nt: Vec<usize>,
}

pub fn parse_config(text: &str) -> CliResult<ExperimentConfig> {
    toml::from_str(text).map_err(|e| CliError::config(e.to_string()))
}

pub fn load_config(path: &Path) -> CliResult<ExperimentConfig> {
    let text = std::fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
    parse_config(&text)
}

/// Core objects built from a validated configuration.
#[derive(Debug, Clone)]
pub struct Resolved {
    pub grid: Grid,
    pub coeff: DiffusionCoefficient,
    pub rates: RateSpec,
    pub region: ControlRegion,
    pub scheme: TimeScheme,
    /// Present when the coefficient is degenerate.
    pub weights: Option<WeightSet>,
}

fn positive(name: &str, v: f64) -> CliResult<()> {
    if v > 0.0 && v.is_finite() {
        Ok(())
    } else {
        Err(CliError::config(format!("{name} must be positive, got {v}")))
    }
}

impl ExperimentConfig {
    /// Builds the core objects and writes derived values back, so that
    /// serializing `self` afterwards gives the fully resolved config.
    pub fn resolve(&mut self) -> CliResult<Resolved> {
        let g = &mut self.grid;
        let grid = match g.na {
            Auto::Auto => Grid::aligned(g.t_final, g.a_max, g.nt, g.nx, g.x0)?,
            Auto::Value(na) => Grid::new(g.t_final, g.a_max, g.nt, na, g.nx, g.x0)?,
        };
        g.na = Auto::Value(grid.na());
        g.nx = grid.nx();

        let c = &self.coefficient;
        let coeff = match c.preset {
            CoefficientPreset::PowerLaw => DiffusionCoefficient::power_law(c.alpha, grid.x0())?,
            CoefficientPreset::Constant => DiffusionCoefficient::constant(c.value, grid.x0())?,
        };

        let r = &self.rates;
        let mortality = match r.mortality {
            MortalityPreset::Constant => Mortality::Constant(r.mortality_value),
            MortalityPreset::Gaussian => Mortality::GaussianBump {
                height: r.mortality_value,
                center: r.mortality_center,
                width: r.mortality_width,
            },
        };
        let fertility = match r.fertility {
            FertilityPreset::Zero => Fertility::Zero,
            FertilityPreset::Ramp => Fertility::Ramp { slope: r.fertility_value },
            FertilityPreset::Bump => Fertility::Bump { height: r.fertility_value },
            FertilityPreset::Step => Fertility::Step { value: r.fertility_value },
        };
        let rates = RateSpec::from_presets(mortality, fertility, r.abar, grid.a_max())?;
        let report = agecontrol_core::check_rates(&rates, &grid);
        if !report.all_ok() {
            return Err(CliError::config(format!("rates violate their invariants: {report:?}")));
        }

        let iv = &self.region.intervals;
        let region = match (self.region.kind, iv.as_slice()) {
            (RegionKind::Single, [a]) => ControlRegion::single(a[0], a[1], grid.x0())?,
            (RegionKind::Pair, [a, b]) => ControlRegion::pair((a[0], a[1]), (b[0], b[1]), grid.x0())?,
            (kind, _) => {
                return Err(CliError::config(format!("region kind {kind:?} takes {} intervals, got {}",
                    if kind == RegionKind::Single { 1 } else { 2 }, iv.len())))
            }
        };

        let scheme = match self.scheme {
            SchemeName::TrBdf2 => TimeScheme::TrBdf2,
            SchemeName::BackwardEuler => TimeScheme::BackwardEuler,
        };

        let w = &mut self.weights;
        let s = w.s.value().unwrap_or(1.0);
        positive("weights.s", s)?;
        w.s = Auto::Value(s);
        let weights = if coeff.classification().is_degenerate() {
            let opts = WeightOptions { c1: w.c1.value(), c2: w.c2.value(), kappa: w.kappa.value() };
            let ws = WeightSet::new(&coeff, grid.t_final(), grid.a_max(), s, opts)?;
            w.c1 = Auto::Value(ws.c1);
            w.c2 = Auto::Value(ws.c2);
            w.kappa = Auto::Value(ws.kappa);
            Some(ws)
        } else {
            None
        };

        let cb = &mut self.certify;
        if cb.samples == 0 {
            return Err(CliError::config("certify.samples must be at least 1"));
        }
        let s_list = cb.s.clone().value_or(vec![s]);
        if s_list.is_empty() {
            return Err(CliError::config("certify.s must list at least one value"));
        }
        for v in &s_list {
            positive("certify.s", *v)?;
        }
        cb.s = Auto::Value(s_list);
        positive("control.epsilon", self.control.epsilon)?;
        if self.control.max_iters == 0 {
            return Err(CliError::config("control.max_iters must be at least 1"));
        }
        if !(self.control.tol > 0.0 && self.control.tol < 1.0) {
            return Err(CliError::config(format!("control.tol must lie in (0, 1), got {}", self.control.tol)));
        }
        Ok(Resolved { grid, coeff, rates, region, scheme, weights })
    }

    pub fn to_toml(&self) -> CliResult<String> {
        toml::to_string(self).map_err(|e| CliError::config(e.to_string()))
    }
}

impl<T: Clone> Auto<T> {
    pub fn value_or(self, default: T) -> T {
        match self {
            Auto::Auto => default,
            Auto::Value(v) => v,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const MINIMAL: &str = "[grid]\nT = 1.0\nA = 2.0\nnt = 8\nnx = 20\nx0 = 0.3\n";

    #[test]
    fn minimal_config_resolves_with_defaults() {
        let mut c = parse_config(MINIMAL).unwrap();
        let r = c.resolve().unwrap();
        assert_eq!(r.grid.na(), 16);
        assert_eq!(c.grid.na, Auto::Value(16));
        // x0 = 0.3 sits on an edge of 20 cells
        assert_eq!(c.grid.nx, 21);
        assert!(matches!(c.weights.c2, Auto::Value(v) if v > 0.0));
        let echo = c.to_toml().unwrap();
        let mut again = parse_config(&echo).unwrap();
        assert_eq!(again, c);
        again.resolve().unwrap();
        assert_eq!(again, c);
    }

    #[test]
    fn unknown_keys_are_rejected() {
        let text = format!("{MINIMAL}typo = 1\n");
        assert!(matches!(parse_config(&text), Err(CliError::Config(_))));
        let text = format!("{MINIMAL}[certify]\nsampels = 3\n");
        assert!(parse_config(&text).is_err());
    }

    #[test]
    fn auto_parsing() {
        let text = MINIMAL.replace("nt = 8\n", "nt = 8\nna = \"auto\"\n");
        assert_eq!(parse_config(&text).unwrap().grid.na, Auto::Auto);
        let text = MINIMAL.replace("nt = 8\n", "nt = 8\nna = \"often\"\n");
        assert!(parse_config(&text).is_err());
        let text = format!("{MINIMAL}[weights]\ns = 2.5\n");
        assert_eq!(parse_config(&text).unwrap().weights.s, Auto::Value(2.5));
    }

    #[test]
    fn validation_failures() {
        let mut c = parse_config(&format!("{MINIMAL}[certify]\nsamples = 0\n")).unwrap();
        assert_eq!(c.resolve().unwrap_err().exit_code(), 2);
        let mut c = parse_config(&MINIMAL.replace("A = 2.0", "A = 1.7")).unwrap();
        assert_eq!(c.resolve().unwrap_err().exit_code(), 2);
        let mut c = parse_config(&format!("{MINIMAL}[region]\nkind = \"pair\"\n")).unwrap();
        assert_eq!(c.resolve().unwrap_err().exit_code(), 2);
    }
}
