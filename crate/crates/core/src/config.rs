//! Run configuration read from a TOML file, with documented defaults and
//! field-level validation.

use crate::error::{HexError, Result};
use crate::hypotheses::{GoldenProfile, ProfileShape};
use crate::lattice::{Boundary, TruncationBox};
use crate::mourre::EnergyInterval;
use crate::operators::{MetricField, PotentialField};
use serde::{Deserialize, Serialize};
use std::path::{Path, PathBuf};

/// Version tag written into every JSON summary.
pub const SCHEMA_VERSION: u32 = 1;

/// Environment variable that overrides the configured output directory.
pub const OUTPUT_DIR_ENV: &str = "OUTPUT_DIR";

/// Truncation box of the spectrum and Mourre runs.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BoxConfig {
    /// Cells per side.
    #[serde(default = "default_n")]
    pub n: usize,
    /// `"periodic"` or `"dirichlet"`.
    #[serde(default = "default_bc")]
    pub bc: Boundary,
}

fn default_n() -> usize {
    16
}

fn default_bc() -> Boundary {
    Boundary::Periodic
}

impl Default for BoxConfig {
    fn default() -> Self {
        Self { n: default_n(), bc: default_bc() }
    }
}

/// Perturbation profiles. With `enabled = false` the free Laplacian is used.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProfileConfig {
    #[serde(default)]
    pub enabled: bool,
    /// Metric profile `eta`; default power law `0.3 Lambda^{-1.6}`.
    #[serde(default = "default_profile")]
    pub eta: ProfileShape,
    /// Potential profile `V`; default power law `0.3 Lambda^{-1.6}`.
    #[serde(default = "default_profile")]
    pub v: ProfileShape,
    /// `epsilon(s, t) = eps_factor (eta(s) + eta(t)) / 2`; default 0.5.
    #[serde(default = "default_eps_factor")]
    pub eps_factor: f64,
}

fn default_profile() -> ProfileShape {
    ProfileShape::golden(0.3, 0.5)
}

fn default_eps_factor() -> f64 {
    0.5
}

impl Default for ProfileConfig {
    fn default() -> Self {
        Self {
            enabled: false,
            eta: default_profile(),
            v: default_profile(),
            eps_factor: default_eps_factor(),
        }
    }
}

impl ProfileConfig {
    /// The configured profile triple.
    pub fn golden(&self) -> GoldenProfile {
        GoldenProfile {
            eta: self.eta,
            v: self.v,
            eps_factor: self.eps_factor,
        }
    }

    /// Metric field, trivial when disabled.
    pub fn metric(&self) -> MetricField {
        if self.enabled {
            self.golden().metric()
        } else {
            MetricField::trivial()
        }
    }

    /// Potential, zero when disabled.
    pub fn potential(&self) -> PotentialField {
        if self.enabled {
            self.golden().potential()
        } else {
            PotentialField::zero()
        }
    }
}

/// Mourre run parameters.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MourreConfig {
    /// Energy intervals `[a, b]`; default `[[0.5, 0.9]]`.
    #[serde(default = "default_intervals")]
    pub intervals: Vec<[f64; 2]>,
    /// Smallest admissible distance to the thresholds; default 0.05.
    #[serde(default = "default_margin")]
    pub threshold_margin: f64,
    /// Perturbation scalings for the strength sweep; default `[1, 0.5, 0.25, 0]`.
    #[serde(default = "default_thetas")]
    pub thetas: Vec<f64>,
    /// Required ratio `c_matrix / c_symbol`; default 0.5.
    #[serde(default = "default_factor")]
    pub factor: f64,
}

fn default_intervals() -> Vec<[f64; 2]> {
    vec![[0.5, 0.9]]
}

fn default_margin() -> f64 {
    0.05
}

fn default_thetas() -> Vec<f64> {
    vec![1.0, 0.5, 0.25, 0.0]
}

fn default_factor() -> f64 {
    crate::mourre::FINITE_SIZE_FACTOR
}

impl Default for MourreConfig {
    fn default() -> Self {
        Self {
            intervals: default_intervals(),
            threshold_margin: default_margin(),
            thetas: default_thetas(),
            factor: default_factor(),
        }
    }
}

/// Weighted-resolvent sweep parameters (always on a Dirichlet box).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LapConfig {
    /// Box side; default 48.
    #[serde(default = "default_lap_n")]
    pub n: usize,
    /// Regular energies expected to level off; default `[0.5, 0.6, 0.7]`.
    #[serde(default = "default_regular")]
    pub regular: Vec<f64>,
    /// Near-threshold energies expected to keep growing; default `1/3 -+ 0.01`.
    #[serde(default = "default_critical")]
    pub critical: Vec<f64>,
    /// First `rho`; default 0.8.
    #[serde(default = "default_rho_start")]
    pub rho_start: f64,
    /// Last `rho`; default `max(1e-3, 4/N)`.
    #[serde(default)]
    pub rho_floor: Option<f64>,
    /// Distance kept from localized eigenvalues of the perturbed box; default 0.02.
    #[serde(default = "default_eig_margin")]
    pub eigen_margin: f64,
}

fn default_lap_n() -> usize {
    48
}

fn default_regular() -> Vec<f64> {
    vec![0.5, 0.6, 0.7]
}

fn default_critical() -> Vec<f64> {
    vec![1.0 / 3.0 - 0.01, 1.0 / 3.0 + 0.01]
}

fn default_rho_start() -> f64 {
    crate::lap::RHO_START
}

fn default_eig_margin() -> f64 {
    0.02
}

impl Default for LapConfig {
    fn default() -> Self {
        Self {
            n: default_lap_n(),
            regular: default_regular(),
            critical: default_critical(),
            rho_start: default_rho_start(),
            rho_floor: None,
            eigen_margin: default_eig_margin(),
        }
    }
}

impl LapConfig {
    /// Configured floor or the finite-size default.
    pub fn floor(&self) -> f64 {
        self.rho_floor.unwrap_or_else(|| crate::lap::rho_floor(self.n))
    }
}

/// Time-evolution parameters (Dirichlet box).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DynamicsConfig {
    /// Box side; default 96.
    #[serde(default = "default_dyn_n")]
    pub n: usize,
    /// Spectral window of the propagation integral; default `[0.5, 0.9]`.
    #[serde(default = "default_window")]
    pub interval: [f64; 2],
    /// Horizon of the propagation integral; default 200.
    #[serde(default = "default_horizon")]
    pub horizon: f64,
    /// Time step; default 0.5.
    #[serde(default = "default_dt")]
    pub dt: f64,
    /// Horizon of the unitarity check; default 100.
    #[serde(default = "default_unitarity_t")]
    pub unitarity_t: f64,
    /// Horizon of the pointwise trace; default 80.
    #[serde(default = "default_trace_t")]
    pub trace_t: f64,
    /// Late window of the pointwise trace as fractions of its horizon; default `[0.75, 1.0]`.
    #[serde(default = "default_late")]
    pub late_window: [f64; 2],
    /// Threshold on the late-window maximum relative to the initial value; default 0.2.
    #[serde(default = "default_decay")]
    pub decay_threshold: f64,
}

fn default_dyn_n() -> usize {
    96
}

fn default_window() -> [f64; 2] {
    [0.5, 0.9]
}

fn default_horizon() -> f64 {
    200.0
}

fn default_dt() -> f64 {
    0.5
}

fn default_unitarity_t() -> f64 {
    100.0
}

fn default_trace_t() -> f64 {
    80.0
}

fn default_late() -> [f64; 2] {
    [0.75, 1.0]
}

fn default_decay() -> f64 {
    0.2
}

impl Default for DynamicsConfig {
    fn default() -> Self {
        Self {
            n: default_dyn_n(),
            interval: default_window(),
            horizon: default_horizon(),
            dt: default_dt(),
            unitarity_t: default_unitarity_t(),
            trace_t: default_trace_t(),
            late_window: default_late(),
            decay_threshold: default_decay(),
        }
    }
}

/// Hypothesis-checker parameters.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct HypothesesConfig {
    /// Window radius; default 64 (at least 8).
    #[serde(default = "default_radius")]
    pub radius: i64,
    /// Long-range exponent; default 0.5.
    #[serde(default = "default_gamma")]
    pub gamma: f64,
}

fn default_radius() -> i64 {
    64
}

fn default_gamma() -> f64 {
    0.5
}

impl Default for HypothesesConfig {
    fn default() -> Self {
        Self {
            radius: default_radius(),
            gamma: default_gamma(),
        }
    }
}

/// Complete run configuration.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    /// Seed for every randomized probe; default 0.
    #[serde(default)]
    pub seed: u64,
    /// Output directory; default `out`.
    #[serde(default)]
    pub output_dir: Option<PathBuf>,
    /// Grid size of the momentum-space checks; default 512.
    #[serde(default)]
    pub grid: Option<usize>,
    #[serde(default, rename = "box")]
    pub bbox: BoxConfig,
    /// Spectral weight exponent of the resolvent and propagation probes; default 0.6.
    #[serde(default)]
    pub s: Option<f64>,
    #[serde(default)]
    pub profiles: ProfileConfig,
    #[serde(default)]
    pub mourre: MourreConfig,
    #[serde(default)]
    pub lap: LapConfig,
    #[serde(default)]
    pub dynamics: DynamicsConfig,
    #[serde(default)]
    pub hypotheses: HypothesesConfig,
}

fn bad(field: &str, message: impl Into<String>) -> HexError {
    HexError::Config {
        field: field.to_string(),
        message: message.into(),
    }
}

impl RunConfig {
    /// Parses and validates TOML text.
    pub fn from_toml(text: &str) -> Result<Self> {
        let cfg: RunConfig = toml::from_str(text).map_err(|e| bad("<file>", e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    /// Reads and validates a file.
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| bad("--config", format!("{}: {e}", path.display())))?;
        Self::from_toml(&text)
    }

    /// Momentum grid size.
    pub fn m(&self) -> usize {
        self.grid.unwrap_or(512)
    }

    /// Weight exponent.
    pub fn weight_s(&self) -> f64 {
        self.s.unwrap_or(0.6)
    }

    /// The configured box.
    pub fn truncation_box(&self) -> TruncationBox {
        TruncationBox::centered(self.bbox.n, self.bbox.bc)
    }

    /// Validated energy intervals.
    pub fn intervals(&self) -> Result<Vec<EnergyInterval>> {
        self.mourre
            .intervals
            .iter()
            .map(|[a, b]| {
                EnergyInterval::new(*a, *b, self.mourre.threshold_margin)
                    .map_err(|e| bad("mourre.intervals", e.to_string()))
            })
            .collect()
    }

    /// Output directory: explicit argument, then `OUTPUT_DIR`, then the file, then `out`.
    pub fn resolve_output(&self, cli: Option<&Path>) -> PathBuf {
        if let Some(p) = cli {
            return p.to_path_buf();
        }
        if let Ok(p) = std::env::var(OUTPUT_DIR_ENV) {
            if !p.is_empty() {
                return PathBuf::from(p);
            }
        }
        self.output_dir.clone().unwrap_or_else(|| PathBuf::from("out"))
    }

    /// Checks every field against the preconditions of the modules it feeds.
    pub fn validate(&self) -> Result<()> {
        if self.bbox.n < 2 {
            return Err(bad("box.n", "must be at least 2"));
        }
        if self.m() < 64 {
            return Err(bad("grid", "must be at least 64"));
        }
        let s = self.weight_s();
        if !(s > 0.5) {
            return Err(bad("s", "must exceed 1/2"));
        }
        for (name, p) in [("profiles.eta", &self.profiles.eta), ("profiles.v", &self.profiles.v)] {
            if !p.a.is_finite() || !p.delta.is_finite() || p.delta < 0.0 {
                return Err(bad(name, "amplitude must be finite and delta non-negative"));
            }
        }
        if !self.profiles.eps_factor.is_finite() {
            return Err(bad("profiles.eps_factor", "must be finite"));
        }
        self.intervals()?;
        if self.mourre.thetas.iter().any(|t| !(0.0..=1.0).contains(t)) {
            return Err(bad("mourre.thetas", "values must lie in [0, 1]"));
        }
        if !(self.mourre.factor > 0.0 && self.mourre.factor <= 1.0) {
            return Err(bad("mourre.factor", "must lie in (0, 1]"));
        }
        if self.lap.n < 4 {
            return Err(bad("lap.n", "must be at least 4"));
        }
        if self.lap.regular.iter().chain(&self.lap.critical).any(|l| !l.is_finite()) {
            return Err(bad("lap.regular", "energies must be finite"));
        }
        if !(self.lap.floor() > 0.0 && self.lap.floor() < self.lap.rho_start) {
            return Err(bad("lap.rho_floor", "need 0 < rho_floor < rho_start"));
        }
        let d = &self.dynamics;
        if d.n < 4 {
            return Err(bad("dynamics.n", "must be at least 4"));
        }
        if !(d.interval[0] < d.interval[1]) {
            return Err(bad("dynamics.interval", "need a < b"));
        }
        if !(d.dt > 0.0 && d.horizon >= d.dt) {
            return Err(bad("dynamics.dt", "need 0 < dt <= horizon"));
        }
        if !(d.unitarity_t >= 0.0 && d.trace_t > 0.0) {
            return Err(bad("dynamics.trace_t", "horizons must be positive"));
        }
        if !(0.0 <= d.late_window[0] && d.late_window[0] < d.late_window[1] && d.late_window[1] <= 1.0) {
            return Err(bad("dynamics.late_window", "need 0 <= lo < hi <= 1"));
        }
        if self.hypotheses.radius < 8 {
            return Err(bad("hypotheses.radius", "must be at least 8"));
        }
        if !(self.hypotheses.gamma > 0.0) {
            return Err(bad("hypotheses.gamma", "must be positive"));
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_file_gives_defaults() {
        let c = RunConfig::from_toml("").unwrap();
        assert_eq!(c, RunConfig::default());
        assert_eq!(c.m(), 512);
        assert_eq!(c.lap.floor(), 4.0 / 48.0);
    }

    #[test]
    fn field_level_errors() {
        let e = RunConfig::from_toml("[box]\nn = 1\n").unwrap_err();
        assert_eq!(e, bad("box.n", "must be at least 2"));
        let e = RunConfig::from_toml("s = 0.4\n").unwrap_err();
        assert!(matches!(e, HexError::Config { ref field, .. } if field == "s"));
        let e = RunConfig::from_toml("[mourre]\nintervals = [[0.9, 0.5]]\n").unwrap_err();
        assert!(matches!(e, HexError::Config { ref field, .. } if field == "mourre.intervals"));
        assert!(RunConfig::from_toml("bogus = 1\n").is_err());
    }

    #[test]
    fn full_file_round_trip() {
        let text = r#"
seed = 3
grid = 256
s = 0.7
[box]
n = 8
bc = "dirichlet"
[profiles]
enabled = true
eta = { kind = "compact_bump", a = 0.2, delta = 5.0, gamma = 0.5 }
[lap]
n = 16
regular = [0.6]
"#;
        let c = RunConfig::from_toml(text).unwrap();
        assert_eq!(c.bbox.bc, Boundary::Dirichlet);
        assert_eq!(c.lap.regular, vec![0.6]);
        let again = RunConfig::from_toml(&toml::to_string(&c).unwrap()).unwrap();
        assert_eq!(again, c);
    }
}
