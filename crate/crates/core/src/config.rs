//! Single reproducible configuration for the whole pipeline. Every constant
//! any stage depends on lives here, grouped by module; commands embed the
//! resolved copy next to their outputs and print its hash.

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::dynamics::ControlBounds;
use crate::error::{Error, Result};
use crate::ilqgames::SolveOptions;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DynamicsConfig {
    pub dt: f64,
    pub v_max: f64,
    pub omega_max: f64,
    pub agent_radius: f64,
}

impl Default for DynamicsConfig {
    fn default() -> Self {
        DynamicsConfig { dt: 0.1, v_max: 2.0, omega_max: 2.0, agent_radius: 0.3 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CostConfig {
    pub w_ref: f64,
    pub w_vel: f64,
    pub w_omega: f64,
    pub w_prox: f64,
    pub d_safe: f64,
}

impl Default for CostConfig {
    fn default() -> Self {
        CostConfig { w_ref: 1.0, w_vel: 0.5, w_omega: 0.1, w_prox: 20.0, d_safe: 0.9 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrialConfigDefaults {
    pub agents: usize,
    pub circle_radius: f64,
    pub horizon: usize,
    pub v_pref_min: f64,
    pub v_pref_max: f64,
    /// Half side length of the square jitter box around the antipodal goal.
    pub goal_jitter: f64,
    /// Minimum pairwise start separation, in units of the agent radius.
    pub min_separation_radii: f64,
}

impl Default for TrialConfigDefaults {
    fn default() -> Self {
        TrialConfigDefaults {
            agents: 5,
            circle_radius: 2.5,
            horizon: 100,
            v_pref_min: 0.6,
            v_pref_max: 1.2,
            goal_jitter: 0.5,
            min_separation_radii: 3.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SolverConfig {
    pub max_iters: usize,
    pub tol: f64,
    pub line_search_halvings: usize,
    pub init_turn_bias: f64,
}

impl Default for SolverConfig {
    fn default() -> Self {
        SolverConfig { max_iters: 100, tol: 1e-3, line_search_halvings: 12, init_turn_bias: 0.05 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PolicyConfig {
    pub latent_dim: usize,
    pub hidden_dim: usize,
    /// Planning window H, in steps.
    pub horizon: usize,
    pub sigma_rec: f64,
    pub logvar_min: f64,
    pub logvar_max: f64,
    pub epochs: usize,
    pub batch_size: usize,
    pub learning_rate: f64,
    pub window_stride: usize,
    /// Candidate count K per agent.
    pub candidates: usize,
}

impl Default for PolicyConfig {
    fn default() -> Self {
        PolicyConfig {
            latent_dim: 4,
            hidden_dim: 64,
            horizon: 10,
            sigma_rec: 0.1,
            logvar_min: -6.0,
            logvar_max: 2.0,
            epochs: 40,
            batch_size: 128,
            learning_rate: 1e-3,
            window_stride: 1,
            candidates: 16,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GameConfig {
    pub mlp_hidden: usize,
    pub damping: f64,
    pub max_iters: usize,
    pub tol: f64,
    /// Fixed iteration budget when differentiating through the solve.
    pub unroll: usize,
    pub temperature: f64,
}

impl Default for GameConfig {
    fn default() -> Self {
        GameConfig { mlp_hidden: 32, damping: 0.5, max_iters: 50, tol: 1e-8, unroll: 20, temperature: 1.0 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct InverseConfig {
    pub learning_rate: f64,
    pub epochs: usize,
    pub minibatch: usize,
    pub kde_bandwidth: f64,
    pub window_stride: usize,
}

impl Default for InverseConfig {
    fn default() -> Self {
        InverseConfig { learning_rate: 3e-3, epochs: 5, minibatch: 8, kde_bandwidth: 0.1, window_stride: 10 }
    }
}

/// How the non-interactive robot picks among sampled candidates at runtime.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CandidateSelection {
    /// Highest latent prior density (the most typical sample).
    MaxPrior,
    /// Uniform prior: first candidate by the documented tie-break.
    First,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EvalConfig {
    pub trials: usize,
    /// Replanning horizon for the iLQGames agents; 0 means the full
    /// remaining trial.
    pub replan_horizon: usize,
    pub selection: CandidateSelection,
}

impl Default for EvalConfig {
    fn default() -> Self {
        EvalConfig { trials: 100, replan_horizon: 0, selection: CandidateSelection::MaxPrior }
    }
}

/// The resolved benchmark configuration.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
#[serde(default, deny_unknown_fields)]
pub struct BenchConfig {
    pub seed: u64,
    pub dynamics: DynamicsConfig,
    pub costs: CostConfig,
    pub trial: TrialConfigDefaults,
    pub solver: SolverConfig,
    pub policy: PolicyConfig,
    pub game: GameConfig,
    pub inverse: InverseConfig,
    pub eval: EvalConfig,
}

impl BenchConfig {
    pub fn from_toml_str(s: &str) -> Result<Self> {
        let cfg: BenchConfig =
            toml::from_str(s).map_err(|e| Error::Format { detail: e.to_string() })?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &std::path::Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        Self::from_toml_str(&text)
    }

    pub fn to_toml_string(&self) -> String {
        toml::to_string_pretty(self).expect("config serializes")
    }

    /// Hex SHA-256 of the canonical serialized config.
    pub fn hash(&self) -> String {
        let mut hasher = Sha256::new();
        hasher.update(self.to_toml_string().as_bytes());
        let digest = hasher.finalize();
        digest.iter().map(|b| format!("{b:02x}")).collect()
    }

    pub fn bounds(&self) -> ControlBounds<f64> {
        ControlBounds { v_max: self.dynamics.v_max, omega_max: self.dynamics.omega_max }
    }

    pub fn solve_options(&self) -> SolveOptions<f64> {
        SolveOptions {
            max_iters: self.solver.max_iters,
            tol: self.solver.tol,
            max_line_search_halvings: self.solver.line_search_halvings,
            init_turn_bias: self.solver.init_turn_bias,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let check = |ok: bool, arg: &'static str, detail: String| -> Result<()> {
            if ok {
                Ok(())
            } else {
                Err(Error::InvalidArgument { arg, detail })
            }
        };
        check(self.dynamics.dt > 0.0, "dynamics.dt", format!("{}", self.dynamics.dt))?;
        check(self.dynamics.v_max > 0.0 && self.dynamics.omega_max > 0.0, "dynamics", "control bounds must be positive".into())?;
        check(self.dynamics.agent_radius > 0.0, "dynamics.agent_radius", format!("{}", self.dynamics.agent_radius))?;
        check(
            self.costs.d_safe >= 2.0 * self.dynamics.agent_radius,
            "costs.d_safe",
            format!("{} < 2r = {}", self.costs.d_safe, 2.0 * self.dynamics.agent_radius),
        )?;
        check(
            self.costs.w_ref >= 0.0 && self.costs.w_vel >= 0.0 && self.costs.w_omega >= 0.0 && self.costs.w_prox >= 0.0,
            "costs",
            "weights must be nonnegative".into(),
        )?;
        check(self.trial.agents >= 2, "trial.agents", format!("{}", self.trial.agents))?;
        check(
            self.trial.v_pref_min > 0.0
                && self.trial.v_pref_min <= self.trial.v_pref_max
                && self.trial.v_pref_max <= self.dynamics.v_max,
            "trial.v_pref",
            format!("[{}, {}]", self.trial.v_pref_min, self.trial.v_pref_max),
        )?;
        check(self.trial.horizon >= 1, "trial.horizon", format!("{}", self.trial.horizon))?;
        check(self.policy.horizon >= 1, "policy.horizon", format!("{}", self.policy.horizon))?;
        check(
            self.policy.horizon <= self.trial.horizon,
            "policy.horizon",
            format!("planning window {} exceeds trial horizon {}", self.policy.horizon, self.trial.horizon),
        )?;
        check(self.policy.candidates >= 2, "policy.candidates", format!("{}", self.policy.candidates))?;
        check(self.policy.window_stride >= 1, "policy.window_stride", format!("{}", self.policy.window_stride))?;
        check(self.policy.sigma_rec > 0.0, "policy.sigma_rec", format!("{}", self.policy.sigma_rec))?;
        check(
            self.policy.logvar_min < self.policy.logvar_max,
            "policy.logvar",
            format!("[{}, {}]", self.policy.logvar_min, self.policy.logvar_max),
        )?;
        check(
            self.game.damping > 0.0 && self.game.damping <= 1.0,
            "game.damping",
            format!("{}", self.game.damping),
        )?;
        check(self.game.unroll >= 1, "game.unroll", format!("{}", self.game.unroll))?;
        check(self.game.temperature > 0.0, "game.temperature", format!("{}", self.game.temperature))?;
        check(self.inverse.kde_bandwidth > 0.0, "inverse.kde_bandwidth", format!("{}", self.inverse.kde_bandwidth))?;
        check(self.inverse.minibatch >= 1, "inverse.minibatch", format!("{}", self.inverse.minibatch))?;
        check(self.inverse.window_stride >= 1, "inverse.window_stride", format!("{}", self.inverse.window_stride))?;
        check(self.eval.trials >= 1, "eval.trials", format!("{}", self.eval.trials))?;
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn default_config_validates_and_round_trips() {
        let cfg = BenchConfig::default();
        cfg.validate().unwrap();
        let text = cfg.to_toml_string();
        let back = BenchConfig::from_toml_str(&text).unwrap();
        assert_eq!(cfg, back);
        assert_eq!(cfg.hash(), back.hash());
    }

    #[test]
    fn unknown_keys_rejected() {
        let err = BenchConfig::from_toml_str("nonsense_key = 1\n");
        assert!(matches!(err, Err(Error::Format { .. })));
        let err = BenchConfig::from_toml_str("[dynamics]\nbogus = 2.0\n");
        assert!(matches!(err, Err(Error::Format { .. })));
    }

    #[test]
    fn partial_config_fills_defaults() {
        let cfg = BenchConfig::from_toml_str("seed = 7\n[trial]\nagents = 3\n").unwrap();
        assert_eq!(cfg.seed, 7);
        assert_eq!(cfg.trial.agents, 3);
        assert_eq!(cfg.policy.hidden_dim, 64);
    }

    #[test]
    fn invalid_values_rejected() {
        let err = BenchConfig::from_toml_str("[dynamics]\ndt = -0.1\n");
        assert!(matches!(err, Err(Error::InvalidArgument { .. })));
        let err = BenchConfig::from_toml_str("[costs]\nd_safe = 0.1\n");
        assert!(matches!(err, Err(Error::InvalidArgument { .. })));
    }

    #[test]
    fn hash_tracks_content() {
        let a = BenchConfig::default();
        let mut b = BenchConfig::default();
        b.seed = 1;
        assert_ne!(a.hash(), b.hash());
        assert_eq!(a.hash().len(), 64);
    }
}
