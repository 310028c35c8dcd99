//! JSON scenario configuration, presets, and the built-in scenario set.
//!
//! Mode keys in coefficient maps are wavenumbers `j` (Neumann `0..J_max`,
//! Dirichlet `1..=J_max`, explicit `0..J_max` as positions).

use std::collections::BTreeMap;
use std::f64::consts::PI;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::basis::{BasisKind, EigenBasis, SpectralField};
use crate::error::{Error, Result};
use crate::objective::{PenaltySpec, Scenario};
use crate::optimize::OptimizerConfig;
use crate::state::{StateEval, TimeSignal};

/// Extra modes carried by presets beyond the perturbed one.
pub const PRESET_EXTRA_MODES: usize = 8;
pub const DEFAULT_SNAPSHOT_POINTS: usize = 512;

fn default_domain_length() -> f64 {
    PI
}

fn default_horizon() -> f64 {
    1.0
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BasisConfig {
    pub kind: BasisKind,
    #[serde(default = "default_domain_length")]
    pub domain_length: f64,
    #[serde(rename = "J_max", default, skip_serializing_if = "Option::is_none")]
    pub j_max: Option<usize>,
    /// Only for `explicit`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub eigenvalues: Option<Vec<f64>>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PresetParams {
    pub epsilon: f64,
    pub j0: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", deny_unknown_fields)]
pub enum InitialSpec {
    Modes(BTreeMap<usize, f64>),
    /// Neumann, `y0 = 1 + ε e_{j0}`, `y_Q ≡ 1`.
    Example1(PresetParams),
    /// Dirichlet, `y0 = ε e_{j0}`, `y_Q = ε e_{j0}`.
    Example2(PresetParams),
}

impl InitialSpec {
    fn preset(&self) -> Option<(BasisKind, PresetParams)> {
        match self {
            InitialSpec::Modes(_) => None,
            InitialSpec::Example1(p) => Some((BasisKind::Neumann1D, *p)),
            InitialSpec::Example2(p) => Some((BasisKind::Dirichlet1D, *p)),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", deny_unknown_fields)]
pub enum SignalSpec {
    #[default]
    Zero,
    Constant(BTreeMap<usize, f64>),
    Sampled {
        times: Vec<f64>,
        modes: BTreeMap<usize, Vec<f64>>,
    },
}

impl SignalSpec {
    fn is_zero(&self) -> bool {
        matches!(self, SignalSpec::Zero)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum PenaltyConfig {
    Reciprocal {
        #[serde(rename = "L")]
        upper: f64,
    },
    ExpOverS {},
}

impl Default for PenaltyConfig {
    fn default() -> Self {
        PenaltyConfig::ExpOverS {}
    }
}

impl PenaltyConfig {
    pub fn to_spec(&self) -> Result<PenaltySpec> {
        match *self {
            PenaltyConfig::Reciprocal { upper } => PenaltySpec::reciprocal(upper).map_err(|_| {
                Error::config(
                    "penalty.L",
                    format!("must be positive and finite, got {upper}"),
                )
            }),
            PenaltyConfig::ExpOverS {} => Ok(PenaltySpec::ExpOverS),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SnapshotRequest {
    pub s: f64,
    pub t: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub points: Option<usize>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", deny_unknown_fields)]
pub enum OutputRequest {
    Summary,
    CostCurve,
    Trace,
    Snapshot(SnapshotRequest),
}

fn default_outputs() -> Vec<OutputRequest> {
    vec![
        OutputRequest::Summary,
        OutputRequest::CostCurve,
        OutputRequest::Trace,
    ]
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioConfig {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub name: Option<String>,
    /// Optional with a preset, which fixes the kind.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub basis: Option<BasisConfig>,
    #[serde(rename = "T", default = "default_horizon")]
    pub horizon: f64,
    pub y0: InitialSpec,
    #[serde(default, skip_serializing_if = "SignalSpec::is_zero")]
    pub f: SignalSpec,
    /// Required without a preset; presets fix it.
    #[serde(rename = "yQ", default, skip_serializing_if = "Option::is_none")]
    pub target: Option<SignalSpec>,
    #[serde(default)]
    pub penalty: PenaltyConfig,
    #[serde(default)]
    pub optimizer: OptimizerConfig,
    #[serde(default = "default_outputs")]
    pub outputs: Vec<OutputRequest>,
}

/// A config turned into solver inputs.
#[derive(Debug, Clone)]
pub struct Problem {
    pub scenario: Scenario,
    pub penalty: PenaltySpec,
    pub optimizer: OptimizerConfig,
}

/// Reads one config, or an array of configs, from a JSON file.
pub fn load_configs(path: &Path) -> Result<Vec<ScenarioConfig>> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let parse_err = |source| Error::Parse {
        path: path.to_path_buf(),
        source,
    };
    let value: serde_json::Value = serde_json::from_str(&text).map_err(parse_err)?;
    let raw: Vec<ScenarioConfig> = if value.is_array() {
        serde_json::from_str(&text).map_err(parse_err)?
    } else {
        vec![serde_json::from_str(&text).map_err(parse_err)?]
    };
    raw.into_iter().map(ScenarioConfig::expand).collect()
}

/// Reads a single config.
pub fn load_config(path: &Path) -> Result<ScenarioConfig> {
    let mut all = load_configs(path)?;
    if all.len() != 1 {
        return Err(Error::config(
            "<root>",
            format!("expected one scenario, found {}", all.len()),
        ));
    }
    Ok(all.remove(0))
}

fn check_keys<'a>(
    field: &str,
    keys: impl IntoIterator<Item = &'a usize>,
    basis: &EigenBasis,
) -> Result<()> {
    for &j in keys {
        if basis.position_of(j).is_none() {
            let range = match basis.kind() {
                BasisKind::Dirichlet1D => format!("1..={}", basis.j_max()),
                _ => format!("0..{}", basis.j_max()),
            };
            return Err(Error::config(
                field,
                format!("mode {j} outside the basis ({range})"),
            ));
        }
    }
    Ok(())
}

fn coefficients(field: &str, map: &BTreeMap<usize, f64>, basis: &EigenBasis) -> Result<Vec<f64>> {
    check_keys(field, map.keys(), basis)?;
    let mut out = vec![0.0; basis.j_max()];
    for (&j, &c) in map {
        if !c.is_finite() {
            return Err(Error::config(
                field,
                format!("coefficient of mode {j} is not finite"),
            ));
        }
        out[basis.position_of(j).unwrap()] = c;
    }
    Ok(out)
}

fn signal(field: &str, spec: &SignalSpec, basis: &EigenBasis) -> Result<TimeSignal> {
    Ok(match spec {
        SignalSpec::Zero => TimeSignal::Zero,
        SignalSpec::Constant(map) => TimeSignal::Constant(coefficients(field, map, basis)?),
        SignalSpec::Sampled { times, modes } => {
            check_keys(field, modes.keys(), basis)?;
            let mut values = vec![vec![0.0; times.len()]; basis.j_max()];
            for (&j, row) in modes {
                if row.len() != times.len() {
                    return Err(Error::config(
                        field,
                        format!(
                            "mode {j} has {} values for {} times",
                            row.len(),
                            times.len()
                        ),
                    ));
                }
                values[basis.position_of(j).unwrap()] = row.clone();
            }
            TimeSignal::Sampled {
                times: times.clone(),
                values,
            }
        }
    })
}

impl ScenarioConfig {
    /// Example-1 or Example-2 preset with the given penalty, `T = 1`.
    pub fn preset(example: u8, epsilon: f64, j0: usize, penalty: PenaltyConfig) -> Result<Self> {
        let params = PresetParams { epsilon, j0 };
        let y0 = match example {
            1 => InitialSpec::Example1(params),
            2 => InitialSpec::Example2(params),
            _ => {
                return Err(Error::invalid(
                    "example",
                    format!("must be 1 or 2, got {example}"),
                ))
            }
        };
        let penalty_tag = match penalty {
            PenaltyConfig::ExpOverS {} => "exp".to_string(),
            PenaltyConfig::Reciprocal { upper } => format!("rec{upper}"),
        };
        ScenarioConfig {
            name: Some(format!("ex{example}_eps{epsilon}_j{j0}_{penalty_tag}")),
            basis: None,
            horizon: 1.0,
            y0,
            f: SignalSpec::Zero,
            target: None,
            penalty,
            optimizer: OptimizerConfig::default(),
            outputs: default_outputs(),
        }
        .expand()
    }

    /// Fills preset defaults and validates. Idempotent.
    pub fn expand(mut self) -> Result<Self> {
        if let Some((kind, p)) = self.y0.preset() {
            if !(p.epsilon.is_finite()) {
                return Err(Error::config("y0.epsilon", "must be finite"));
            }
            if p.j0 == 0 {
                return Err(Error::config("y0.j0", "must be at least 1"));
            }
            if self.target.is_some() {
                return Err(Error::config(
                    "yQ",
                    "is fixed by the preset and must be omitted",
                ));
            }
            let basis = self.basis.get_or_insert(BasisConfig {
                kind,
                domain_length: PI,
                j_max: None,
                eigenvalues: None,
            });
            if basis.kind != kind {
                return Err(Error::config(
                    "basis.kind",
                    format!("preset requires {kind}, got {}", basis.kind),
                ));
            }
            basis.j_max.get_or_insert(p.j0 + PRESET_EXTRA_MODES);
        }
        let basis = self
            .basis
            .as_mut()
            .ok_or_else(|| Error::config("basis", "required unless y0 is a preset"))?;
        match (basis.kind, &basis.eigenvalues) {
            (BasisKind::Explicit, Some(ev)) => {
                if basis.j_max.is_some_and(|n| n != ev.len()) {
                    return Err(Error::config(
                        "basis.J_max",
                        "must equal the number of eigenvalues",
                    ));
                }
                basis.j_max = Some(ev.len());
            }
            (BasisKind::Explicit, None) => {
                return Err(Error::config(
                    "basis.eigenvalues",
                    "required for explicit bases",
                ))
            }
            (_, Some(_)) => {
                return Err(Error::config(
                    "basis.eigenvalues",
                    "only allowed for explicit bases",
                ))
            }
            (_, None) => {
                if basis.j_max.is_none() {
                    return Err(Error::config("basis.J_max", "required"));
                }
            }
        }
        if self.y0.preset().is_none() && self.target.is_none() {
            return Err(Error::config("yQ", "required unless y0 is a preset"));
        }
        if !(self.horizon.is_finite() && self.horizon > 0.0) {
            return Err(Error::config(
                "T",
                format!("must be positive, got {}", self.horizon),
            ));
        }
        self.optimizer
            .validate()
            .map_err(|e| Error::config("optimizer", e.to_string()))?;
        for out in &self.outputs {
            if let OutputRequest::Snapshot(r) = out {
                if !(r.t >= 0.0 && r.t <= self.horizon) {
                    return Err(Error::config(
                        "outputs.snapshot.t",
                        format!("must lie in [0, {}]", self.horizon),
                    ));
                }
                if r.points.is_some_and(|n| n < 2) {
                    return Err(Error::config("outputs.snapshot.points", "need at least 2"));
                }
            }
        }
        self.build()?;
        Ok(self)
    }

    /// Overrides `J_max`, keeping preset perturbations inside the basis.
    pub fn with_j_max(mut self, j_max: usize) -> Result<Self> {
        let basis = self
            .basis
            .as_mut()
            .ok_or_else(|| Error::config("basis", "missing"))?;
        if basis.kind == BasisKind::Explicit {
            return Err(Error::config(
                "basis.J_max",
                "fixed by the eigenvalue list for explicit bases",
            ));
        }
        basis.j_max = Some(j_max);
        self.expand()
    }

    pub fn with_grid_points(mut self, grid_points: usize) -> Result<Self> {
        self.optimizer.grid_points = grid_points;
        self.expand()
    }

    pub fn label(&self, fallback: usize) -> String {
        self.name
            .clone()
            .unwrap_or_else(|| format!("scenario_{fallback:03}"))
    }

    pub fn basis(&self) -> Result<EigenBasis> {
        let b = self
            .basis
            .as_ref()
            .ok_or_else(|| Error::config("basis", "missing"))?;
        let built = match b.kind {
            BasisKind::Explicit => EigenBasis::explicit(b.eigenvalues.clone().unwrap_or_default()),
            kind => EigenBasis::build(kind, b.domain_length, b.j_max.unwrap_or(0)),
        };
        built.map_err(|e| Error::config("basis", e.to_string()))
    }

    pub fn build(&self) -> Result<Problem> {
        let basis = self.basis()?;
        let n = basis.j_max();
        let (y0, target) = match &self.y0 {
            InitialSpec::Modes(map) => {
                let target = self
                    .target
                    .as_ref()
                    .ok_or_else(|| Error::config("yQ", "missing"))?;
                (
                    coefficients("y0", map, &basis)?,
                    signal("yQ", target, &basis)?,
                )
            }
            InitialSpec::Example1(p) => {
                let pos = basis.position_of(p.j0).ok_or_else(|| {
                    Error::config("y0.j0", format!("mode {} outside the basis", p.j0))
                })?;
                // ⟨1, e_0⟩ = √ℓ.
                let one = basis.domain_length().sqrt();
                let mut y0 = vec![0.0; n];
                y0[0] = one;
                y0[pos] = p.epsilon;
                let mut target = vec![0.0; n];
                target[0] = one;
                (y0, TimeSignal::Constant(target))
            }
            InitialSpec::Example2(p) => {
                let pos = basis.position_of(p.j0).ok_or_else(|| {
                    Error::config("y0.j0", format!("mode {} outside the basis", p.j0))
                })?;
                let mut y0 = vec![0.0; n];
                y0[pos] = p.epsilon;
                (y0.clone(), TimeSignal::Constant(y0))
            }
        };
        let forcing = signal("f", &self.f, &basis)?;
        let y0 = SpectralField::new(y0).map_err(|e| Error::config("y0", e.to_string()))?;
        let state = StateEval::new(basis, y0, forcing, self.horizon)
            .map_err(|e| Error::config("f", e.to_string()))?;
        let scenario =
            Scenario::new(state, target).map_err(|e| Error::config("yQ", e.to_string()))?;
        Ok(Problem {
            scenario,
            penalty: self.penalty.to_spec()?,
            optimizer: self.optimizer,
        })
    }

    pub fn snapshot_requests(&self) -> Vec<SnapshotRequest> {
        self.outputs
            .iter()
            .filter_map(|o| match o {
                OutputRequest::Snapshot(r) => Some(*r),
                _ => None,
            })
            .collect()
    }

    pub fn wants(&self, out: OutputRequest) -> bool {
        self.outputs.contains(&out)
    }
}

pub const BUILTIN_EPSILONS: [f64; 2] = [0.1, 0.5];
pub const BUILTIN_J0: [usize; 3] = [1, 2, 5];
pub const BUILTIN_RECIPROCAL_L: f64 = 4.0;

/// Examples 1 and 2 over `ε ∈ {0.1, 0.5}`, `j0 ∈ {1, 2, 5}`, `T = 1`, with
/// `e^s/s` and `1/(s(4 − s))`.
pub fn builtin_scenarios() -> Vec<ScenarioConfig> {
    let penalties = [
        PenaltyConfig::ExpOverS {},
        PenaltyConfig::Reciprocal {
            upper: BUILTIN_RECIPROCAL_L,
        },
    ];
    let mut out = Vec::new();
    for example in [1, 2] {
        for eps in BUILTIN_EPSILONS {
            for j0 in BUILTIN_J0 {
                for penalty in penalties {
                    out.push(
                        ScenarioConfig::preset(example, eps, j0, penalty)
                            .expect("built-in presets are valid"),
                    );
                }
            }
        }
    }
    out
}
