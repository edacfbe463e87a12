//! Expert simulator: iterative linear-quadratic game solver producing
//! feedback-Nash trajectories for M unicycle agents.
//!
//! Each agent tracks a straight-line reference from its trial start toward
//! its goal at a preferred speed, pays for control effort, and pays a hinge
//! penalty when closer than `d_safe` to another agent.

mod solver;

pub use solver::{
    quadraticize, solve_ilqgames, solve_lq_game, terminal_quadraticize, unilateral_refine,
    verify_open_loop_nash, FeedbackPolicy, IlqSolution, LqGameStage, LqStages, SolveOptions,
};

use serde::{Deserialize, Serialize};

use crate::dynamics::{AgentState, Control, Trajectory};
use crate::error::{Error, Result};
use crate::scalar::Scalar;

/// Individual runtime cost of one agent: navigation goal, preferred
/// longitudinal velocity, and a straight-line reference from the trial's
/// initial position toward the goal at that speed (clamped at the goal).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RuntimeCostParams<S> {
    pub start: (S, S),
    pub goal: (S, S),
    pub v_pref: S,
    pub w_ref: S,
    pub w_vel: S,
    pub w_omega: S,
    pub w_prox: S,
    pub d_safe: S,
}

impl<S: Scalar> RuntimeCostParams<S> {
    /// Reference position at absolute step `t`.
    pub fn reference_at(&self, t: usize, dt: S) -> (S, S) {
        let dx = self.goal.0 - self.start.0;
        let dy = self.goal.1 - self.start.1;
        let len = (dx * dx + dy * dy).sqrt();
        if len <= S::c(1e-12) {
            return self.goal;
        }
        let travelled = (self.v_pref * S::from_usize(t).expect("small t") * dt).min(len);
        let f = travelled / len;
        (self.start.0 + dx * f, self.start.1 + dy * f)
    }

    pub fn validate(&self, v_max: S, agent_radius: S) -> Result<()> {
        let nonneg = [
            ("w_ref", self.w_ref),
            ("w_vel", self.w_vel),
            ("w_omega", self.w_omega),
            ("w_prox", self.w_prox),
        ];
        for (name, w) in nonneg {
            if w < S::zero() || !w.is_finite() {
                return Err(Error::InvalidArgument {
                    arg: "weights",
                    detail: format!("{name} must be finite and nonnegative, got {w}"),
                });
            }
        }
        if self.d_safe < agent_radius + agent_radius {
            return Err(Error::InvalidArgument {
                arg: "d_safe",
                detail: format!("d_safe {} below diameter {}", self.d_safe, agent_radius + agent_radius),
            });
        }
        if self.v_pref.abs() > v_max {
            return Err(Error::InvalidArgument {
                arg: "v_pref",
                detail: format!("v_pref {} outside control bound {}", self.v_pref, v_max),
            });
        }
        Ok(())
    }
}

/// State-dependent part of the stage cost: reference tracking plus the
/// proximity hinge against every other agent.
pub fn state_cost<S: Scalar>(
    params: &RuntimeCostParams<S>,
    joint_states: &[AgentState<S>],
    agent: usize,
    t: usize,
    dt: S,
) -> S {
    let me = &joint_states[agent];
    let (rx, ry) = params.reference_at(t, dt);
    let (ex, ey) = (me.x - rx, me.y - ry);
    let mut cost = params.w_ref * (ex * ex + ey * ey);
    for (k, other) in joint_states.iter().enumerate() {
        if k == agent {
            continue;
        }
        let d = me.distance_to(other);
        let gap = params.d_safe - d;
        if gap > S::zero() {
            cost = cost + params.w_prox * gap * gap;
        }
    }
    cost
}

/// Control-dependent part of the stage cost.
pub fn control_cost<S: Scalar>(params: &RuntimeCostParams<S>, u: &Control<S>) -> S {
    let dv = u.v - params.v_pref;
    params.w_vel * dv * dv + params.w_omega * u.omega * u.omega
}

/// Full stage cost of one agent at absolute step `t`.
pub fn stage_cost<S: Scalar>(
    params: &RuntimeCostParams<S>,
    joint_states: &[AgentState<S>],
    agent: usize,
    u: &Control<S>,
    t: usize,
    dt: S,
) -> S {
    state_cost(params, joint_states, agent, t, dt) + control_cost(params, u)
}

/// Solver objective for one agent over aligned trajectories: running stage
/// costs plus the terminal state cost.
pub fn total_cost<S: Scalar>(
    params: &RuntimeCostParams<S>,
    trajectories: &[Trajectory<S>],
    agent: usize,
    t_offset: usize,
) -> S {
    let horizon = trajectories[agent].horizon();
    let m = trajectories.len();
    let mut cost = S::zero();
    let mut joint = vec![trajectories[0].states[0]; m];
    let dt = trajectories[agent].dt;
    for t in 0..=horizon {
        for (j, traj) in trajectories.iter().enumerate() {
            joint[j] = traj.states[t];
        }
        cost = cost + state_cost(params, &joint, agent, t_offset + t, dt);
        if t < horizon {
            cost = cost + control_cost(params, &trajectories[agent].controls[t]);
        }
    }
    cost
}

#[cfg(test)]
mod tests {
    use super::*;

    fn params() -> RuntimeCostParams<f64> {
        RuntimeCostParams {
            start: (0.0, 0.0),
            goal: (4.0, 0.0),
            v_pref: 1.0,
            w_ref: 1.0,
            w_vel: 0.5,
            w_omega: 0.1,
            w_prox: 20.0,
            d_safe: 0.9,
        }
    }

    #[test]
    fn zero_cost_on_reference_at_preferred_speed() {
        let p = params();
        let t = 7;
        let dt = 0.1;
        let (rx, ry) = p.reference_at(t, dt);
        let joint = vec![
            AgentState::new(rx, ry, 0.0),
            AgentState::new(rx + 5.0, ry + 5.0, 0.0),
        ];
        let c = stage_cost(&p, &joint, 0, &Control::new(1.0, 0.0), t, dt);
        assert_eq!(c, 0.0);
    }

    #[test]
    fn coincident_agents_pay_full_hinge() {
        let mut p = params();
        p.w_ref = 0.0;
        p.w_vel = 0.0;
        p.w_omega = 0.0;
        p.w_prox = 1.0;
        p.d_safe = 1.0;
        let joint = vec![AgentState::new(1.0, 1.0, 0.0), AgentState::new(1.0, 1.0, 2.0)];
        let c = stage_cost(&p, &joint, 0, &Control::zero(), 0, 0.1);
        assert_eq!(c, 1.0);
    }

    #[test]
    fn lateral_offset_costs_w_ref() {
        let mut p = params();
        p.w_vel = 0.0;
        p.w_omega = 0.0;
        let t = 3;
        let (rx, ry) = p.reference_at(t, 0.1);
        let joint = vec![AgentState::new(rx, ry + 1.0, 0.0), AgentState::new(10.0, 10.0, 0.0)];
        let c = stage_cost(&p, &joint, 0, &Control::new(1.0, 0.0), t, 0.1);
        assert!((c - 1.0).abs() < 1e-12);
    }

    #[test]
    fn reference_clamps_at_goal() {
        let p = params();
        let (rx, ry) = p.reference_at(1000, 0.1);
        assert_eq!((rx, ry), p.goal);
        let mid = p.reference_at(20, 0.1);
        assert!((mid.0 - 2.0).abs() < 1e-12 && mid.1.abs() < 1e-12);
    }

    #[test]
    fn validation_rejects_bad_params() {
        let mut p = params();
        p.w_prox = -1.0;
        assert!(p.validate(2.0, 0.3).is_err());
        let mut p = params();
        p.d_safe = 0.5;
        assert!(p.validate(2.0, 0.3).is_err());
        let mut p = params();
        p.v_pref = 3.0;
        assert!(p.validate(2.0, 0.3).is_err());
        assert!(params().validate(2.0, 0.3).is_ok());
    }
}
