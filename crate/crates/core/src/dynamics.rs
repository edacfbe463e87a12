//! Unicycle (Dubins-car) agent model: stepping, rollout, and linearization
//! shared by the simulator and candidate generation.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scalar::Scalar;
use crate::tensor::Tensor;

/// Planar pose of one agent. Heading is wrapped to `(-pi, pi]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AgentState<S> {
    pub x: S,
    pub y: S,
    pub heading: S,
}

impl<S: Scalar> AgentState<S> {
    pub fn new(x: S, y: S, heading: S) -> Self {
        AgentState { x, y, heading: wrap_angle(heading) }
    }

    pub fn position(&self) -> (S, S) {
        (self.x, self.y)
    }

    pub fn distance_to(&self, other: &AgentState<S>) -> S {
        let dx = self.x - other.x;
        let dy = self.y - other.y;
        (dx * dx + dy * dy).sqrt()
    }
}

/// Longitudinal velocity and turn rate.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Control<S> {
    pub v: S,
    pub omega: S,
}

impl<S: Scalar> Control<S> {
    pub fn new(v: S, omega: S) -> Self {
        Control { v, omega }
    }

    pub fn zero() -> Self {
        Control { v: S::zero(), omega: S::zero() }
    }

    pub fn within(&self, bounds: &ControlBounds<S>) -> bool {
        self.v.abs() <= bounds.v_max && self.omega.abs() <= bounds.omega_max
    }

    pub fn clamped(&self, bounds: &ControlBounds<S>) -> Self {
        Control {
            v: self.v.max(-bounds.v_max).min(bounds.v_max),
            omega: self.omega.max(-bounds.omega_max).min(bounds.omega_max),
        }
    }
}

/// Symmetric box bounds on the control channels.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ControlBounds<S> {
    pub v_max: S,
    pub omega_max: S,
}

impl<S: Scalar> Default for ControlBounds<S> {
    fn default() -> Self {
        ControlBounds { v_max: S::c(2.0), omega_max: S::c(2.0) }
    }
}

/// Wrap an angle to `(-pi, pi]`.
pub fn wrap_angle<S: Scalar>(theta: S) -> S {
    let two_pi = S::PI() + S::PI();
    let mut r = theta % two_pi;
    if r > S::PI() {
        r = r - two_pi;
    } else if r <= -S::PI() {
        r = r + two_pi;
    }
    r
}

/// One forward-Euler step of the unicycle. Out-of-bound controls are
/// rejected; clamping is the caller's responsibility.
pub fn step<S: Scalar>(
    s: &AgentState<S>,
    u: &Control<S>,
    dt: S,
    bounds: &ControlBounds<S>,
) -> Result<AgentState<S>> {
    if dt <= S::zero() {
        return Err(Error::InvalidArgument { arg: "dt", detail: format!("dt must be positive, got {dt}") });
    }
    if !u.within(bounds) {
        return Err(Error::InvalidArgument {
            arg: "u",
            detail: format!(
                "control ({}, {}) outside bounds (v_max {}, omega_max {})",
                u.v, u.omega, bounds.v_max, bounds.omega_max
            ),
        });
    }
    Ok(AgentState {
        x: s.x + u.v * s.heading.cos() * dt,
        y: s.y + u.v * s.heading.sin() * dt,
        heading: wrap_angle(s.heading + u.omega * dt),
    })
}

/// State and control history of one agent; `states` has one more entry than
/// `controls` and satisfies the stepping invariant exactly.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Trajectory<S> {
    pub states: Vec<AgentState<S>>,
    pub controls: Vec<Control<S>>,
    pub dt: S,
}

impl<S: Scalar> Trajectory<S> {
    pub fn horizon(&self) -> usize {
        self.controls.len()
    }

    pub fn final_state(&self) -> &AgentState<S> {
        self.states.last().expect("trajectory holds at least the initial state")
    }

    /// Re-step the stored controls and check the stored states match exactly.
    pub fn validate(&self, bounds: &ControlBounds<S>) -> Result<()> {
        if self.states.len() != self.controls.len() + 1 {
            return Err(Error::InvalidArgument {
                arg: "trajectory",
                detail: format!("{} states vs {} controls", self.states.len(), self.controls.len()),
            });
        }
        for (t, u) in self.controls.iter().enumerate() {
            let expect = step(&self.states[t], u, self.dt, bounds)?;
            if expect != self.states[t + 1] {
                return Err(Error::InvalidArgument {
                    arg: "trajectory",
                    detail: format!("stored state at step {} does not re-step exactly", t + 1),
                });
            }
        }
        Ok(())
    }
}

/// Roll controls forward from `s0`. An empty control sequence yields a
/// single-state trajectory.
pub fn rollout<S: Scalar>(
    s0: &AgentState<S>,
    controls: &[Control<S>],
    dt: S,
    bounds: &ControlBounds<S>,
) -> Result<Trajectory<S>> {
    let mut states = Vec::with_capacity(controls.len() + 1);
    states.push(*s0);
    for u in controls {
        let next = step(states.last().expect("non-empty"), u, dt, bounds)?;
        states.push(next);
    }
    Ok(Trajectory { states, controls: controls.to_vec(), dt })
}

/// Analytic Jacobians of [`step`]: `A = d(step)/d(state)` (3x3) and
/// `B = d(step)/d(control)` (3x2) for the Euler unicycle.
pub fn linearize<S: Scalar>(s: &AgentState<S>, u: &Control<S>, dt: S) -> (Tensor<S>, Tensor<S>) {
    let (sin_t, cos_t) = (s.heading.sin(), s.heading.cos());
    let a = Tensor::from_vec(
        vec![3, 3],
        vec![
            S::one(), S::zero(), -u.v * sin_t * dt,
            S::zero(), S::one(), u.v * cos_t * dt,
            S::zero(), S::zero(), S::one(),
        ],
    )
    .expect("finite jacobian");
    let b = Tensor::from_vec(
        vec![3, 2],
        vec![
            cos_t * dt, S::zero(),
            sin_t * dt, S::zero(),
            S::zero(), dt,
        ],
    )
    .expect("finite jacobian");
    (a, b)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::rng_from_seed;
    use rand::Rng;

    fn bounds() -> ControlBounds<f64> {
        ControlBounds::default()
    }

    #[test]
    fn straight_motion() {
        let s = AgentState::new(0.0, 0.0, 0.0);
        let n = step(&s, &Control::new(1.0, 0.0), 0.1, &bounds()).unwrap();
        assert_eq!((n.x, n.y, n.heading), (0.1, 0.0, 0.0));
    }

    #[test]
    fn zero_control_is_identity() {
        let s = AgentState::new(1.3, -0.4, 0.7);
        let n = step(&s, &Control::zero(), 0.1, &bounds()).unwrap();
        assert_eq!(n, s);
    }

    #[test]
    fn single_euler_step_arithmetic() {
        let s = AgentState::new(0.0, 0.0, 0.0);
        let wide = ControlBounds { v_max: 2.0, omega_max: 4.0 };
        let n = step(&s, &Control::new(1.0, std::f64::consts::PI), 0.1, &wide).unwrap();
        assert!((n.x - 0.1).abs() < 1e-12);
        assert_eq!(n.y, 0.0);
        assert!((n.heading - 0.3141593).abs() < 1e-6);
    }

    #[test]
    fn out_of_bounds_control_rejected() {
        let s = AgentState::new(0.0, 0.0, 0.0);
        assert!(step(&s, &Control::new(2.5, 0.0), 0.1, &bounds()).is_err());
        assert!(step(&s, &Control::new(0.0, -2.5), 0.1, &bounds()).is_err());
    }

    #[test]
    fn rollout_zero_controls() {
        let s = AgentState::new(0.5, 0.5, 1.0);
        let traj = rollout(&s, &vec![Control::zero(); 10], 0.1, &bounds()).unwrap();
        assert_eq!(traj.states.len(), 11);
        assert!(traj.states.iter().all(|st| *st == s));
    }

    #[test]
    fn rollout_empty_controls_single_state() {
        let s = AgentState::new(0.0, 0.0, 0.0);
        let traj = rollout(&s, &[], 0.1, &bounds()).unwrap();
        assert_eq!(traj.states.len(), 1);
        assert_eq!(traj.horizon(), 0);
    }

    #[test]
    fn constant_velocity_accumulates() {
        let s = AgentState::new(0.0, 0.0, 0.0);
        let traj = rollout(&s, &vec![Control::new(1.0, 0.0); 10], 0.1, &bounds()).unwrap();
        assert!((traj.final_state().x - 1.0).abs() < 1e-12);
    }

    #[test]
    fn arc_approximates_circle_as_dt_shrinks() {
        let omega = 1.0;
        let dt = 1e-4;
        let t_final = 1.0;
        let steps = (t_final / dt) as usize;
        let s = AgentState::new(0.0, 0.0, 0.0);
        let traj = rollout(&s, &vec![Control::new(1.0, omega); steps], dt, &bounds()).unwrap();
        // analytic unit-radius arc from origin with initial heading 0
        let xf = (omega * t_final).sin() / omega;
        let yf = (1.0 - (omega * t_final).cos()) / omega;
        let end = traj.final_state();
        let err = ((end.x - xf).powi(2) + (end.y - yf).powi(2)).sqrt();
        assert!(err <= 1e-3, "position error {err}");
    }

    #[test]
    fn linearize_matches_finite_differences() {
        let mut rng = rng_from_seed(17);
        let b = bounds();
        let dt = 0.1;
        let h = 1e-6;
        for _ in 0..100 {
            let s = AgentState::new(
                rng.gen_range(-3.0..3.0),
                rng.gen_range(-3.0..3.0),
                rng.gen_range(-3.0..3.0),
            );
            let u = Control::new(rng.gen_range(-1.5..1.5), rng.gen_range(-1.5..1.5));
            let (a, bm) = linearize(&s, &u, dt);
            let f = |s: &AgentState<f64>, u: &Control<f64>| {
                let n = step(s, u, dt, &b).unwrap();
                // unwrapped heading for differentiation
                [n.x, n.y, s.heading + u.omega * dt]
            };
            for col in 0..3 {
                let mut sp = s;
                let mut sm = s;
                match col {
                    0 => {
                        sp.x += h;
                        sm.x -= h;
                    }
                    1 => {
                        sp.y += h;
                        sm.y -= h;
                    }
                    _ => {
                        sp.heading += h;
                        sm.heading -= h;
                    }
                }
                let fp = f(&sp, &u);
                let fm = f(&sm, &u);
                for row in 0..3 {
                    let fd = (fp[row] - fm[row]) / (2.0 * h);
                    assert!((a.at(row, col) - fd).abs() < 1e-6, "A[{row},{col}]");
                }
            }
            for col in 0..2 {
                let mut up = u;
                let mut um = u;
                if col == 0 {
                    up.v += h;
                    um.v -= h;
                } else {
                    up.omega += h;
                    um.omega -= h;
                }
                let fp = f(&s, &up);
                let fm = f(&s, &um);
                for row in 0..3 {
                    let fd = (fp[row] - fm[row]) / (2.0 * h);
                    assert!((bm.at(row, col) - fd).abs() < 1e-6, "B[{row},{col}]");
                }
            }
        }
    }

    #[test]
    fn linearize_special_cases() {
        let (a, b) = linearize(&AgentState::new(0.0, 0.0, 0.0), &Control::new(1.0, 0.0), 0.1);
        assert_eq!(a.data(), &[1.0, 0.0, 0.0, 0.0, 1.0, 0.1, 0.0, 0.0, 1.0]);
        assert_eq!(b.at(2, 1), 0.1);
        let (a0, _) = linearize(&AgentState::new(1.0, 2.0, 0.3), &Control::new(0.0, 0.5), 0.1);
        assert_eq!(a0.data(), Tensor::<f64>::eye(3).data());
    }

    #[test]
    fn rollout_restep_is_bit_exact() {
        let mut rng = rng_from_seed(23);
        let controls: Vec<Control<f64>> = (0..40)
            .map(|_| Control::new(rng.gen_range(-1.9..1.9), rng.gen_range(-1.9..1.9)))
            .collect();
        let s0 = AgentState::new(0.3, -0.8, 2.1);
        let traj = rollout(&s0, &controls, 0.1, &bounds()).unwrap();
        traj.validate(&bounds()).unwrap();
    }

    #[test]
    fn heading_wrap_round_trip() {
        let dt = 0.1;
        let omega = std::f64::consts::PI / 5.0; // 100 steps close the circle
        let steps = 100;
        let mut s = AgentState::new(0.0, 0.0, 0.5);
        for _ in 0..steps {
            s = step(&s, &Control::new(0.0, omega), dt, &bounds()).unwrap();
        }
        assert!((s.heading - 0.5).abs() < 1e-9, "heading {}", s.heading);
    }

    #[test]
    fn wrap_angle_range() {
        assert!((wrap_angle(3.0 * std::f64::consts::PI) - std::f64::consts::PI).abs() < 1e-12);
        let w = wrap_angle(-std::f64::consts::PI);
        assert!((w - std::f64::consts::PI).abs() < 1e-12);
        assert_eq!(wrap_angle(0.25f32), 0.25f32);
    }
}
