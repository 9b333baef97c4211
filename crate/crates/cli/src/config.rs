//! Run configuration read from TOML.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use harnack_lab::solutions::{FlowSolution, SolutionParams};
use serde::{Deserialize, Serialize};

use crate::error::CliError;

/// Every suite, in report order.
pub const ALL_SUITES: [&str; 12] = [
    "flow",
    "soliton",
    "harnack-defs",
    "harnack-ineq",
    "spacetime-conn",
    "spacetime-curv",
    "deg-flow",
    "bianchi",
    "harnack-curvature",
    "approx-conn",
    "approx-curv",
    "limits",
];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum Format {
    Json,
    Text,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputConfig {
    pub dir: Option<PathBuf>,
    #[serde(default = "default_format")]
    pub format: Format,
}

impl Default for OutputConfig {
    fn default() -> Self {
        OutputConfig {
            dir: None,
            format: Format::Json,
        }
    }
}

/// Powers of two used by the `limits` suite.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SweepConfig {
    /// `ε = δ = 2^k` for `k` in this inclusive range.
    pub joint: [i32; 2],
    /// `ε = 2^k` at `δ = 1` for `k` in this inclusive range.
    pub epsilon: [i32; 2],
    /// Then `δ = 2^{-j}` for `j` in `1..=delta_pow` at the largest `ε`.
    pub delta_pow: i32,
    /// `δ = 2^k`, `ε = 4^k` for `k` in this inclusive range (diagnostic).
    pub quadratic: [i32; 2],
    /// Number of trailing rows used for halving-rate checks.
    pub window: usize,
    /// Number of sample points swept; the CSV holds the first.
    pub points: usize,
}

impl Default for SweepConfig {
    fn default() -> Self {
        SweepConfig {
            joint: [1, 10],
            epsilon: [1, 20],
            delta_pow: 10,
            quadratic: [1, 10],
            window: 5,
            points: 1,
        }
    }
}

/// Parameters of the fixed-`(ε, δ)` suites.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ApproxConfig {
    pub epsilons: Vec<f64>,
    pub delta: f64,
    /// `ε` at which the `1/ε` decay of the curvature correction is measured;
    /// it must dominate `R(t+δ)` for the rate to show.
    pub rate_epsilon: f64,
}

impl Default for ApproxConfig {
    fn default() -> Self {
        ApproxConfig {
            epsilons: vec![10.0, 100.0],
            delta: 1.0,
            rate_epsilon: 1024.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub solution: String,
    #[serde(default)]
    pub params: SolutionParams,
    #[serde(default)]
    pub tau: f64,
    #[serde(default = "default_order")]
    pub order: usize,
    #[serde(default)]
    pub seed: u64,
    #[serde(default = "default_points")]
    pub points: usize,
    /// Random draws per point in `harnack-ineq`.
    #[serde(default = "default_draws")]
    pub draws: usize,
    /// Empty means every suite that applies to the solution.
    #[serde(default)]
    pub suites: Vec<String>,
    /// When false, `elapsed_ms` is written as 0.
    #[serde(default = "default_true")]
    pub timing: bool,
    /// Per check id, e.g. `"flow.ricci_flow" = 1e-8`.
    #[serde(default)]
    pub tolerances: BTreeMap<String, f64>,
    #[serde(default)]
    pub sweep: SweepConfig,
    #[serde(default)]
    pub approx: ApproxConfig,
    #[serde(default)]
    pub output: OutputConfig,
}

fn default_order() -> usize {
    harnack_lab::jets::DEFAULT_ORDER
}

fn default_points() -> usize {
    32
}

fn default_draws() -> usize {
    32
}

fn default_true() -> bool {
    true
}

fn default_format() -> Format {
    Format::Json
}

impl RunConfig {
    /// A configuration with defaults for everything but the solution.
    pub fn new(solution: &str, params: SolutionParams) -> Self {
        RunConfig {
            solution: solution.into(),
            params,
            tau: 0.0,
            order: default_order(),
            seed: 0,
            points: default_points(),
            draws: default_draws(),
            suites: Vec::new(),
            timing: true,
            tolerances: BTreeMap::new(),
            sweep: SweepConfig::default(),
            approx: ApproxConfig::default(),
            output: OutputConfig::default(),
        }
    }

    pub fn from_toml(text: &str) -> Result<Self, CliError> {
        toml::from_str(text).map_err(|e| CliError::Parse(e.to_string()))
    }

    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::Io(format!("{}: {e}", path.display())))?;
        Self::from_toml(&text)
    }

    pub fn solution(&self) -> Result<FlowSolution, CliError> {
        FlowSolution::make(&self.solution, &self.params)
            .map_err(|e| CliError::config("solution", e.to_string()))
    }

    /// Checks every key and resolves the suite list against the solution.
    pub fn validate(&self) -> Result<(FlowSolution, Vec<&'static str>), CliError> {
        let s = self.solution()?;
        if !(4..=6).contains(&self.order) {
            return Err(CliError::config(
                "order",
                format!("{} outside 4..=6", self.order),
            ));
        }
        if self.points == 0 {
            return Err(CliError::config("points", "must be at least 1"));
        }
        if self.draws == 0 {
            return Err(CliError::config("draws", "must be at least 1"));
        }
        if !(self.tau >= 0.0 && self.tau < 0.5 * s.domain.t_max) {
            return Err(CliError::config(
                "tau",
                format!("{} outside [0, {})", self.tau, 0.5 * s.domain.t_max),
            ));
        }
        for (id, tol) in &self.tolerances {
            if crate::anchors::table().get(id).is_none() {
                return Err(CliError::config(
                    "tolerances",
                    format!("unknown check id '{id}'"),
                ));
            }
            if !(*tol >= 0.0) {
                return Err(CliError::config(
                    "tolerances",
                    format!("'{id}' = {tol} is negative"),
                ));
            }
        }
        if self.approx.epsilons.is_empty() || self.approx.epsilons.iter().any(|e| !(*e > 0.0)) {
            return Err(CliError::config("approx.epsilons", "need positive values"));
        }
        if !(self.approx.rate_epsilon > 0.0) {
            return Err(CliError::config("approx.rate_epsilon", "must be positive"));
        }
        if !(self.approx.delta > 0.0) {
            return Err(CliError::config("approx.delta", "must be positive"));
        }
        let sw = &self.sweep;
        for (key, [lo, hi]) in [
            ("sweep.joint", sw.joint),
            ("sweep.epsilon", sw.epsilon),
            ("sweep.quadratic", sw.quadratic),
        ] {
            if lo > hi || hi > 24 {
                return Err(CliError::config(
                    key,
                    format!("[{lo}, {hi}] is not a range up to 24"),
                ));
            }
        }
        if sw.delta_pow < 0 {
            return Err(CliError::config("sweep.delta_pow", "must be non-negative"));
        }
        if sw.window < 2 || sw.points == 0 {
            return Err(CliError::config(
                "sweep",
                "window must be >= 2 and points >= 1",
            ));
        }

        let requested: Vec<&'static str> = if self.suites.is_empty() {
            ALL_SUITES
                .iter()
                .copied()
                .filter(|name| applicability(&s, name).is_ok())
                .collect()
        } else {
            let mut out = Vec::new();
            for name in &self.suites {
                let known = ALL_SUITES
                    .iter()
                    .copied()
                    .find(|k| k == name)
                    .ok_or_else(|| CliError::config("suites", format!("unknown suite '{name}'")))?;
                applicability(&s, known).map_err(|why| CliError::config("suites", why))?;
                if !out.contains(&known) {
                    out.push(known);
                }
            }
            // report order follows ALL_SUITES
            out.sort_by_key(|n| ALL_SUITES.iter().position(|k| k == n));
            out
        };
        Ok((s, requested))
    }

    pub fn tolerance(&self, id: &str, default: f64) -> f64 {
        self.tolerances.get(id).copied().unwrap_or(default)
    }
}

/// Why a suite cannot run on a solution, naming the `solution` key.
fn applicability(s: &FlowSolution, suite: &str) -> Result<(), String> {
    let plain = !s.mode.is_modified();
    let reason = match suite {
        "soliton" if !s.has_soliton_potential() => "needs a solution with a soliton potential",
        "harnack-ineq" | "harnack-curvature" | "limits" if !plain => {
            "is stated for plain Ricci flows (f ≡ 0)"
        }
        "approx-conn" | "approx-curv" if !plain => "uses g̃_{ε,δ}, defined for plain Ricci flows",
        _ => return Ok(()),
    };
    Err(format!("'{suite}' {reason}; solution = '{}'", s.name))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn key_of(e: CliError) -> String {
        match e {
            CliError::Config { key, .. } => key,
            other => panic!("expected a config error, got {other:?}"),
        }
    }

    #[test]
    fn defaults_resolve_applicable_suites() {
        let cfg = RunConfig::from_toml("solution = \"cigar_static\"").unwrap();
        let (_, suites) = cfg.validate().unwrap();
        assert!(suites.contains(&"soliton") && suites.contains(&"bianchi"));
        for skipped in ["harnack-ineq", "harnack-curvature", "approx-conn", "limits"] {
            assert!(!suites.contains(&skipped), "{skipped}");
        }
        let flat = RunConfig::new("flat", SolutionParams::flat(2, None));
        assert_eq!(flat.validate().unwrap().1, ALL_SUITES.to_vec());
    }

    #[test]
    fn explicit_suites_follow_report_order() {
        let mut cfg = RunConfig::new("flat", SolutionParams::flat(2, None));
        cfg.suites = vec!["limits".into(), "flow".into(), "flow".into()];
        assert_eq!(cfg.validate().unwrap().1, vec!["flow", "limits"]);
    }

    #[test]
    fn invalid_values_name_their_key() {
        let base = || RunConfig::new("shrinking_sphere", SolutionParams::sphere(2, 1.0));
        let mut c = base();
        c.order = 3;
        assert_eq!(key_of(c.validate().unwrap_err()), "order");
        let mut c = base();
        c.tau = 0.3;
        assert_eq!(key_of(c.validate().unwrap_err()), "tau");
        let mut c = base();
        c.suites = vec!["nope".into()];
        assert_eq!(key_of(c.validate().unwrap_err()), "suites");
        let mut c = base();
        c.tolerances.insert("flow.ricci_flow".into(), -1.0);
        assert_eq!(key_of(c.validate().unwrap_err()), "tolerances");
        let mut c = base();
        c.approx.rate_epsilon = f64::NAN;
        assert_eq!(key_of(c.validate().unwrap_err()), "approx.rate_epsilon");
        let mut c = base();
        c.sweep.joint = [5, 2];
        assert_eq!(key_of(c.validate().unwrap_err()), "sweep.joint");
        let mut c = RunConfig::new("cigar_static", SolutionParams::default());
        c.suites = vec!["limits".into()];
        assert_eq!(key_of(c.validate().unwrap_err()), "suites");
    }

    #[test]
    fn unknown_keys_are_parse_errors() {
        assert!(matches!(
            RunConfig::from_toml("solution = \"flat\"\n[sweep]\nwindw = 3\n"),
            Err(CliError::Parse(_))
        ));
    }

    #[test]
    fn config_round_trips_through_toml() {
        let mut cfg = RunConfig::new("shrinking_sphere", SolutionParams::sphere(3, 2.0));
        cfg.tolerances.insert("flow.ricci_flow".into(), 1e-8);
        cfg.suites = vec!["flow".into()];
        let text = toml::to_string(&cfg).unwrap();
        assert_eq!(RunConfig::from_toml(&text).unwrap(), cfg);
    }
}
