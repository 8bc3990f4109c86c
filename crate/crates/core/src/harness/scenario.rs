use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::error::{Error, Result};
use crate::geometry::DomainSpec;
use crate::grid::GridSpec;
use crate::nonlinearity::{validate_nonlinearity, Nonlinearity};
use crate::solver::{validate_schedule, ProblemKind, SolverOptions, Stepping};

pub const SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NonlinearityConfig {
    pub label: String,
    #[serde(default = "empty_object")]
    pub params: Value,
}

fn empty_object() -> Value {
    Value::Object(Default::default())
}

/// Uniform grid over the boundary's bounding box widened by `margin`, or
/// over `[lo, hi]` when given (required for unbounded boundaries).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridConfig {
    pub h: f64,
    #[serde(default)]
    pub margin: f64,
    #[serde(default)]
    pub lo: Option<Vec<f64>>,
    #[serde(default)]
    pub hi: Option<Vec<f64>>,
}

impl GridConfig {
    pub fn build(&self, domain: &DomainSpec) -> Result<GridSpec> {
        let dim = domain.dim();
        let (lo, hi) = match (&self.lo, &self.hi) {
            (Some(lo), Some(hi)) => (lo.clone(), hi.clone()),
            (None, None) => {
                let (a, b) = domain.boundary_bounds().ok_or_else(|| {
                    Error::Config("grid: domain boundary is unbounded, give grid.lo and grid.hi".into())
                })?;
                (a[..dim].to_vec(), b[..dim].to_vec())
            }
            _ => return Err(Error::Config("grid: give both lo and hi or neither".into())),
        };
        if lo.len() != dim || hi.len() != dim {
            return Err(Error::Config(format!("grid: lo and hi need {dim} coordinates")));
        }
        GridSpec::covering(&lo, &hi, self.h, self.margin)
    }
}

/// Defaults for every pass/fail threshold; echoed into each report.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Tolerances {
    /// Final-rung sup of `|-4t Phi(u) - d^2| / d^2`.
    pub varadhan_rel: f64,
    /// Extrapolated heat-content constant against the prediction.
    pub heat_content_rel: f64,
    /// Stationarity: `max |u - a(t)| <= rel a(t) + abs`.
    pub stationary_rel: f64,
    pub stationary_abs: f64,
    /// First-moment balance for radially symmetric data.
    pub balance_zero: f64,
    /// Difference-field mean balance for symmetric and asymmetric pairs.
    pub pair_zero: f64,
    pub pair_nonzero: f64,
    /// Half-line oracle: window-normalized max error.
    pub oracle_rel: f64,
}

impl Default for Tolerances {
    fn default() -> Self {
        Self {
            varadhan_rel: 0.15,
            heat_content_rel: 0.10,
            stationary_rel: 0.02,
            stationary_abs: 1e-4,
            balance_zero: 1e-10,
            pair_zero: 1e-8,
            pair_nonzero: 1e-6,
            oracle_rel: 1e-3,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case", deny_unknown_fields)]
pub enum ProbeSet {
    /// `count` points in `levels` layers at distances evenly spread over
    /// `[d_min, d_max]`, placed along inward normals of boundary samples.
    Band {
        d_min: f64,
        d_max: f64,
        count: usize,
        #[serde(default = "default_levels")]
        levels: usize,
    },
    Points { points: Vec<Vec<f64>> },
}

fn default_levels() -> usize {
    8
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum HeatContentMode {
    #[default]
    Limit,
    Divergence,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PairSpec {
    pub p: Vec<f64>,
    pub q: Vec<f64>,
    pub r: f64,
    pub t: f64,
    /// Whether `p` and `q` are related by a symmetry of the domain.
    pub symmetric: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum Experiment {
    /// Window-normalized error against the self-similar half-line solution.
    Oracle { t: f64, x_min: f64, x_max: f64 },
    Varadhan {
        ladder: Vec<f64>,
        probes: ProbeSet,
        /// Skip the final-rung relative error check.
        #[serde(default)]
        monotone_only: bool,
    },
    HeatContent {
        x0: Vec<f64>,
        radius: f64,
        ladder: Vec<f64>,
        #[serde(default)]
        mode: HeatContentMode,
    },
    Barriers {
        epsilon: f64,
        rho0: f64,
        /// `R` in `rho1 = max(2R, rho0)`.
        radius: f64,
        envelope_times: Vec<f64>,
        #[serde(default)]
        subsuper_ladder: Option<Vec<f64>>,
    },
    Balance {
        x0: Vec<f64>,
        radii: Vec<f64>,
        times: Vec<f64>,
        /// Require the first-moment balance to vanish.
        #[serde(default)]
        expect_radial: bool,
        #[serde(default)]
        pairs: Vec<PairSpec>,
    },
    Detect {
        /// The body `D` whose boundary holds the candidate surface.
        inner: DomainSpec,
        times: Vec<f64>,
        /// `sphere`, `two_concentric_spheres` or `non_sphere`.
        #[serde(default)]
        expect: Option<String>,
    },
}

impl Experiment {
    pub fn kind(&self) -> &'static str {
        match self {
            Experiment::Oracle { .. } => "oracle",
            Experiment::Varadhan { .. } => "varadhan",
            Experiment::HeatContent { .. } => "heat_content",
            Experiment::Barriers { .. } => "barriers",
            Experiment::Balance { .. } => "balance",
            Experiment::Detect { .. } => "detect",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Scenario {
    pub name: String,
    pub domain: DomainSpec,
    pub problem: ProblemKind,
    pub nonlinearity: NonlinearityConfig,
    pub grid: GridConfig,
    pub schedule: Vec<f64>,
    #[serde(default)]
    pub stepping: Option<Stepping>,
    #[serde(default)]
    pub solver: SolverOptions,
    pub experiments: Vec<Experiment>,
    #[serde(default)]
    pub tolerances: Tolerances,
    #[serde(default)]
    pub output_dir: Option<PathBuf>,
}

impl Scenario {
    pub fn nonlinearity(&self) -> Result<Nonlinearity> {
        Nonlinearity::from_config(&self.nonlinearity.label, &self.nonlinearity.params)
    }

    pub fn build_grid(&self) -> Result<GridSpec> {
        self.grid.build(&self.domain)
    }

    pub fn stepping(&self) -> Stepping {
        self.stepping.clone().unwrap_or_else(|| Stepping::for_spacing(self.grid.h))
    }

    pub fn validate(&self) -> Result<()> {
        if self.name.trim().is_empty() {
            return Err(Error::Config("name must be nonempty".into()));
        }
        validate_schedule(&self.schedule)?;
        let n = self.nonlinearity()?;
        let rep = validate_nonlinearity(&n, 1000)?;
        if !rep.pass {
            return Err(Error::Nonlinearity(format!(
                "`{}` violates the structural bounds at {} sample(s)",
                rep.label,
                rep.violations.len()
            )));
        }
        self.build_grid()?;
        if self.experiments.is_empty() {
            return Err(Error::Config("experiments must list at least one experiment".into()));
        }
        let scheduled = |t: f64| self.schedule.iter().any(|s| (s - t).abs() <= 1e-12 * s);
        let check_times = |what: &str, i: usize, ts: &[f64]| -> Result<()> {
            if ts.is_empty() {
                return Err(Error::Config(format!("experiments[{i}].{what} must be nonempty")));
            }
            match ts.iter().find(|&&t| !scheduled(t)) {
                Some(t) => Err(Error::Config(format!("experiments[{i}].{what}: t = {t} is not in the schedule"))),
                None => Ok(()),
            }
        };
        let dim = self.domain.dim();
        let check_point = |what: &str, i: usize, p: &[f64]| -> Result<()> {
            if p.len() == dim {
                Ok(())
            } else {
                Err(Error::Config(format!("experiments[{i}].{what} needs {dim} coordinates")))
            }
        };
        for (i, e) in self.experiments.iter().enumerate() {
            match e {
                Experiment::Oracle { t, x_min, x_max } => {
                    check_times("t", i, &[*t])?;
                    if !(x_max > x_min) {
                        return Err(Error::Config(format!("experiments[{i}]: x_max must exceed x_min")));
                    }
                }
                Experiment::Varadhan { ladder, probes, .. } => {
                    check_times("ladder", i, ladder)?;
                    match probes {
                        ProbeSet::Band { d_min, d_max, count, levels } => {
                            if !(*d_min > 0.0 && d_max >= d_min && *count > 0 && *levels > 0 && count % levels == 0) {
                                return Err(Error::Config(format!(
                                    "experiments[{i}].probes: need 0 < d_min <= d_max and count a positive multiple of levels"
                                )));
                            }
                        }
                        ProbeSet::Points { points } => {
                            for p in points {
                                check_point("probes.points", i, p)?;
                            }
                        }
                    }
                }
                Experiment::HeatContent { x0, ladder, radius, .. } => {
                    check_times("ladder", i, ladder)?;
                    check_point("x0", i, x0)?;
                    if !(*radius > 0.0) {
                        return Err(Error::Config(format!("experiments[{i}].radius must be > 0")));
                    }
                }
                Experiment::Barriers { envelope_times, subsuper_ladder, rho0, radius, .. } => {
                    check_times("envelope_times", i, envelope_times)?;
                    if let Some(l) = subsuper_ladder {
                        if l.is_empty() {
                            return Err(Error::Config(format!("experiments[{i}].subsuper_ladder must be nonempty")));
                        }
                    }
                    if !(*rho0 > 0.0 && *radius > 0.0) {
                        return Err(Error::Config(format!("experiments[{i}]: rho0 and radius must be > 0")));
                    }
                }
                Experiment::Balance { x0, radii, times, pairs, .. } => {
                    check_times("times", i, times)?;
                    check_point("x0", i, x0)?;
                    if radii.is_empty() {
                        return Err(Error::Config(format!("experiments[{i}].radii must be nonempty")));
                    }
                    for p in pairs {
                        check_point("pairs.p", i, &p.p)?;
                        check_point("pairs.q", i, &p.q)?;
                        check_times("pairs.t", i, &[p.t])?;
                    }
                }
                Experiment::Detect { inner, times, expect } => {
                    check_times("times", i, times)?;
                    if inner.dim() != dim {
                        return Err(Error::Config(format!("experiments[{i}].inner has the wrong dimension")));
                    }
                    if let Some(x) = expect {
                        if !["sphere", "two_concentric_spheres", "non_sphere"].contains(&x.as_str()) {
                            return Err(Error::Config(format!("experiments[{i}].expect: unknown outcome `{x}`")));
                        }
                    }
                }
            }
        }
        Ok(())
    }
}

pub fn parse_scenario(text: &str) -> Result<Scenario> {
    let s: Scenario = serde_json::from_str(text).map_err(|e| Error::Config(format!("scenario: {e}")))?;
    s.validate()?;
    Ok(s)
}

pub fn load_scenario(path: &Path) -> Result<Scenario> {
    let text = fs::read_to_string(path)?;
    parse_scenario(&text)
}
