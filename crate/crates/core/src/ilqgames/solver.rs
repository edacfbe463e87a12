//! Linear-quadratic game stages, the coupled Riccati recursion, and the
//! outer iterative loop with line search.

use crate::dynamics::{self, wrap_angle, AgentState, Control, ControlBounds, Trajectory};
use crate::error::{Error, Result};
use crate::scalar::Scalar;
use crate::tensor::linalg::{clamp_sym_2x2, lu_solve};
use crate::tensor::Tensor;

use super::{control_cost, state_cost, total_cost, RuntimeCostParams};

/// One timestep of the linear-quadratic approximation, in deviation
/// coordinates around the current iterate. `q` is kept positive
/// semidefinite by clamping the indefinite proximity blocks.
#[derive(Debug, Clone)]
pub struct LqGameStage<S> {
    /// Joint state transition, `[n,n]` (block diagonal over agents).
    pub a: Tensor<S>,
    /// Per-agent control injection, `[n, nu_j]`.
    pub b: Vec<Tensor<S>>,
    /// Per-agent state cost Hessian, `[n,n]`, symmetric PSD.
    pub q: Vec<Tensor<S>>,
    /// Per-agent state cost gradient, `[n]`.
    pub l: Vec<Tensor<S>>,
    /// Per-agent control cost Hessian, `[nu_j,nu_j]`, positive definite.
    pub r: Vec<Tensor<S>>,
    /// Per-agent control cost gradient, `[nu_j]`.
    pub rl: Vec<Tensor<S>>,
}

/// Running stages plus the terminal quadratic state cost.
#[derive(Debug, Clone)]
pub struct LqStages<S> {
    pub steps: Vec<LqGameStage<S>>,
    pub terminal_q: Vec<Tensor<S>>,
    pub terminal_l: Vec<Tensor<S>>,
}

/// Time-varying affine feedback `u_j(t) = -P_j(t) dx - a_j(t)` in deviation
/// coordinates; gains are `[nu_j, n]` against the stacked joint state.
#[derive(Debug, Clone)]
pub struct FeedbackPolicy<S> {
    pub gains: Vec<Vec<Tensor<S>>>,
    pub feedforward: Vec<Vec<Tensor<S>>>,
}

/// Knobs for the iterative solver.
#[derive(Debug, Clone, Copy)]
pub struct SolveOptions<S> {
    pub max_iters: usize,
    pub tol: S,
    pub max_line_search_halvings: usize,
    /// Turn rate of the cold-start control sequence. Exactly symmetric
    /// head-on configurations sit on a saddle of the coupled iteration; a
    /// common small bias selects the same-handed passing side for every
    /// agent, like a traffic convention. Warm starts ignore it.
    pub init_turn_bias: S,
}

impl<S: Scalar> Default for SolveOptions<S> {
    fn default() -> Self {
        SolveOptions {
            max_iters: 100,
            tol: S::c(1e-3),
            max_line_search_halvings: 12,
            init_turn_bias: S::c(1e-2),
        }
    }
}

/// Converged (or best-iterate) solution of the iterative LQ game.
#[derive(Debug, Clone)]
pub struct IlqSolution<S> {
    pub trajectories: Vec<Trajectory<S>>,
    pub policy: FeedbackPolicy<S>,
    pub converged: bool,
    pub iterations: usize,
    /// Agent-sum of objectives at the returned iterate.
    pub cost_sum: S,
    /// Agent-sum after every accepted iterate, starting with the initial rollout.
    pub cost_history: Vec<S>,
    /// Max-norm state-trajectory change at the last accepted iterate.
    pub state_change: S,
}

const HESSIAN_FLOOR: f64 = 1e-6;

fn prox_pair_quadratics<S: Scalar>(
    params: &RuntimeCostParams<S>,
    me: (S, S),
    other: (S, S),
) -> Option<((S, S), (S, S, S))> {
    let (ex, ey) = (me.0 - other.0, me.1 - other.1);
    let d = (ex * ex + ey * ey).sqrt();
    let gap = params.d_safe - d;
    if gap <= S::zero() {
        return None;
    }
    let two = S::c(2.0);
    let cp = -two * params.w_prox * gap; // d(cost)/d(distance)
    let cpp = two * params.w_prox;
    let (ux, uy, h) = if d < S::c(1e-9) {
        // coincident agents: hinge direction is undefined, keep the radial
        // curvature along a fixed axis
        (S::one(), S::zero(), (cpp, S::zero(), cpp))
    } else {
        let ux = ex / d;
        let uy = ey / d;
        let tang = cp / d;
        let hxx = cpp * ux * ux + tang * (S::one() - ux * ux);
        let hxy = (cpp - tang) * ux * uy;
        let hyy = cpp * uy * uy + tang * (S::one() - uy * uy);
        (ux, uy, (hxx, hxy, hyy))
    };
    let grad = (cp * ux, cp * uy);
    let clamped = clamp_sym_2x2(h.0, h.1, h.2, S::c(HESSIAN_FLOOR));
    Some((grad, clamped))
}

fn state_quadratics_joint<S: Scalar>(
    params: &RuntimeCostParams<S>,
    states: &[AgentState<S>],
    agent: usize,
    t: usize,
    dt: S,
) -> (Tensor<S>, Tensor<S>) {
    let m = states.len();
    let n = 3 * m;
    let mut q = Tensor::zeros(vec![n, n]);
    let mut l = vec![S::zero(); n];
    let me = &states[agent];
    let (rx, ry) = params.reference_at(t, dt);
    let two = S::c(2.0);
    let jx = 3 * agent;
    l[jx] = l[jx] + two * params.w_ref * (me.x - rx);
    l[jx + 1] = l[jx + 1] + two * params.w_ref * (me.y - ry);
    q.set(jx, jx, q.at(jx, jx) + two * params.w_ref);
    q.set(jx + 1, jx + 1, q.at(jx + 1, jx + 1) + two * params.w_ref);

    for (k, other) in states.iter().enumerate() {
        if k == agent {
            continue;
        }
        let Some(((gx, gy), (hxx, hxy, hyy))) =
            prox_pair_quadratics(params, (me.x, me.y), (other.x, other.y))
        else {
            continue;
        };
        let kx = 3 * k;
        l[jx] = l[jx] + gx;
        l[jx + 1] = l[jx + 1] + gy;
        l[kx] = l[kx] - gx;
        l[kx + 1] = l[kx + 1] - gy;
        for (r, c, v) in [
            (jx, jx, hxx), (jx, jx + 1, hxy), (jx + 1, jx, hxy), (jx + 1, jx + 1, hyy),
            (kx, kx, hxx), (kx, kx + 1, hxy), (kx + 1, kx, hxy), (kx + 1, kx + 1, hyy),
        ] {
            q.set(r, c, q.at(r, c) + v);
        }
        for (r, c, v) in [
            (jx, kx, hxx), (jx, kx + 1, hxy), (jx + 1, kx, hxy), (jx + 1, kx + 1, hyy),
            (kx, jx, hxx), (kx, jx + 1, hxy), (kx + 1, jx, hxy), (kx + 1, jx + 1, hyy),
        ] {
            q.set(r, c, q.at(r, c) - v);
        }
    }
    let l = Tensor::from_vec(vec![n], l).expect("finite gradient");
    (q, l)
}

fn control_quadratics<S: Scalar>(
    params: &RuntimeCostParams<S>,
    u: &Control<S>,
) -> (Tensor<S>, Tensor<S>) {
    let two = S::c(2.0);
    let floor = S::c(HESSIAN_FLOOR);
    let rvv = (two * params.w_vel).max(floor);
    let rww = (two * params.w_omega).max(floor);
    let r = Tensor::from_vec(vec![2, 2], vec![rvv, S::zero(), S::zero(), rww]).expect("finite");
    let rl = Tensor::from_vec(
        vec![2],
        vec![two * params.w_vel * (u.v - params.v_pref), two * params.w_omega * u.omega],
    )
    .expect("finite");
    (r, rl)
}

/// Second-order expansion of every agent's stage cost and the linearized
/// joint dynamics around the current iterate at absolute step `t`.
pub fn quadraticize<S: Scalar>(
    all_params: &[RuntimeCostParams<S>],
    states: &[AgentState<S>],
    controls: &[Control<S>],
    t: usize,
    dt: S,
) -> Result<LqGameStage<S>> {
    let m = states.len();
    let n = 3 * m;
    let mut a = Tensor::zeros(vec![n, n]);
    let mut b = Vec::with_capacity(m);
    for j in 0..m {
        let (aj, bj) = dynamics::linearize(&states[j], &controls[j], dt);
        for r in 0..3 {
            for c in 0..3 {
                a.set(3 * j + r, 3 * j + c, aj.at(r, c));
            }
        }
        let mut bfull = Tensor::zeros(vec![n, 2]);
        for r in 0..3 {
            for c in 0..2 {
                bfull.set(3 * j + r, c, bj.at(r, c));
            }
        }
        b.push(bfull);
    }

    let mut q = Vec::with_capacity(m);
    let mut l = Vec::with_capacity(m);
    let mut r = Vec::with_capacity(m);
    let mut rl = Vec::with_capacity(m);
    for j in 0..m {
        let (qj, lj) = state_quadratics_joint(&all_params[j], states, j, t, dt);
        check_stage_finite(&qj, t)?;
        check_stage_finite(&lj, t)?;
        let (rj, rlj) = control_quadratics(&all_params[j], &controls[j]);
        check_stage_finite(&rlj, t)?;
        q.push(qj);
        l.push(lj);
        r.push(rj);
        rl.push(rlj);
    }
    Ok(LqGameStage { a, b, q, l, r, rl })
}

/// Terminal expansion: state cost only.
pub fn terminal_quadraticize<S: Scalar>(
    all_params: &[RuntimeCostParams<S>],
    states: &[AgentState<S>],
    t: usize,
    dt: S,
) -> Result<(Vec<Tensor<S>>, Vec<Tensor<S>>)> {
    let m = states.len();
    let mut q = Vec::with_capacity(m);
    let mut l = Vec::with_capacity(m);
    for j in 0..m {
        let (qj, lj) = state_quadratics_joint(&all_params[j], states, j, t, dt);
        check_stage_finite(&qj, t)?;
        check_stage_finite(&lj, t)?;
        q.push(qj);
        l.push(lj);
    }
    Ok((q, l))
}

fn check_stage_finite<S: Scalar>(t_: &Tensor<S>, step: usize) -> Result<()> {
    for v in t_.data() {
        if !v.is_finite() {
            return Err(Error::NonFinite {
                op: "quadraticize",
                detail: format!("non-finite expansion at timestep {step}"),
            });
        }
    }
    Ok(())
}

/// Backward coupled Riccati recursion. At every stage the first-order
/// best-response conditions of all agents are stacked into one linear
/// system and solved for the gains and feedforwards simultaneously.
pub fn solve_lq_game<S: Scalar>(stages: &LqStages<S>) -> Result<FeedbackPolicy<S>> {
    let horizon = stages.steps.len();
    if horizon == 0 {
        return Err(Error::InvalidArgument { arg: "stages", detail: "empty stage list".into() });
    }
    let m = stages.terminal_q.len();
    let n = stages.terminal_q[0].shape()[0];
    let nu: Vec<usize> = stages.steps[0].b.iter().map(|b| b.shape()[1]).collect();
    let nu_total: usize = nu.iter().sum();
    let offsets: Vec<usize> = nu
        .iter()
        .scan(0usize, |acc, &w| {
            let o = *acc;
            *acc += w;
            Some(o)
        })
        .collect();

    let mut z: Vec<Tensor<S>> = stages.terminal_q.clone();
    let mut zeta: Vec<Tensor<S>> = stages.terminal_l.clone();
    let mut gains = vec![Vec::new(); horizon];
    let mut feedforward = vec![Vec::new(); horizon];

    for t in (0..horizon).rev() {
        let stage = &stages.steps[t];
        // rows of the stacked system per agent: R_j du_j + r_j + B_j^T (Z_j (A dx + sum_k B_k du_k) + zeta_j) = 0
        let btz: Vec<Tensor<S>> = (0..m)
            .map(|j| stage.b[j].transpose().and_then(|bt| bt.matmul(&z[j])))
            .collect::<Result<_>>()?;
        let mut s_mat = Tensor::zeros(vec![nu_total, nu_total]);
        let mut rhs = Tensor::zeros(vec![nu_total, n + 1]);
        for j in 0..m {
            let yj = btz[j].matmul(&stage.a)?;
            let ff = stage.b[j].transpose()?.matvec(&zeta[j])?.add(&stage.rl[j])?;
            for r in 0..nu[j] {
                for c in 0..n {
                    rhs.set(offsets[j] + r, c, yj.at(r, c));
                }
                rhs.set(offsets[j] + r, n, ff.data()[r]);
            }
            for k in 0..m {
                let block = btz[j].matmul(&stage.b[k])?;
                for r in 0..nu[j] {
                    for c in 0..nu[k] {
                        let mut v = block.at(r, c);
                        if j == k {
                            v = v + stage.r[j].at(r, c);
                        }
                        s_mat.set(offsets[j] + r, offsets[k] + c, v);
                    }
                }
            }
        }
        let sol = lu_solve(&s_mat, &rhs).map_err(|e| match e {
            Error::SingularSystem { detail } => Error::SingularSystem {
                detail: format!("joint best-response system at stage {t}: {detail}"),
            },
            other => other,
        })?;

        let mut p_j: Vec<Tensor<S>> = Vec::with_capacity(m);
        let mut alpha_j: Vec<Tensor<S>> = Vec::with_capacity(m);
        for j in 0..m {
            let mut p = Tensor::zeros(vec![nu[j], n]);
            let mut al = vec![S::zero(); nu[j]];
            for r in 0..nu[j] {
                for c in 0..n {
                    p.set(r, c, sol.at(offsets[j] + r, c));
                }
                al[r] = sol.at(offsets[j] + r, n);
            }
            p_j.push(p);
            alpha_j.push(Tensor::from_vec(vec![nu[j]], al)?);
        }

        // closed loop: dx' = F dx + beta
        let mut f = stage.a.clone();
        let mut beta = Tensor::zeros(vec![n]);
        for k in 0..m {
            let bp = stage.b[k].matmul(&p_j[k])?;
            f = f.sub(&bp)?;
            let ba = stage.b[k].matvec(&alpha_j[k])?;
            beta = beta.sub(&ba)?;
        }

        // open-loop costate sweep: lambda_j(t) = Q_j dx + l_j + A^T lambda_j(t+1),
        // with lambda_j = Z_j dx + zeta_j and dx' = F dx + beta. Z_j is not
        // symmetric in general. For one agent this reduces exactly to the LQR
        // Riccati update in its Joseph-alternative form.
        let at = stage.a.transpose()?;
        for j in 0..m {
            let znew = stage.q[j].add(&at.matmul(&z[j].matmul(&f)?)?)?;
            let zb = z[j].matvec(&beta)?.add(&zeta[j])?;
            zeta[j] = stage.l[j].add(&at.matvec(&zb)?)?;
            z[j] = znew;
        }
        gains[t] = p_j;
        feedforward[t] = alpha_j;
    }
    Ok(FeedbackPolicy { gains, feedforward })
}

fn joint_delta<S: Scalar>(new: &[AgentState<S>], old: &[AgentState<S>]) -> Tensor<S> {
    let mut d = Vec::with_capacity(3 * new.len());
    for (n, o) in new.iter().zip(old) {
        d.push(n.x - o.x);
        d.push(n.y - o.y);
        d.push(wrap_angle(n.heading - o.heading));
    }
    Tensor::from_vec(vec![d.len()], d).expect("finite states")
}

fn joint_at<S: Scalar>(trajs: &[Trajectory<S>], t: usize) -> Vec<AgentState<S>> {
    trajs.iter().map(|tr| tr.states[t]).collect()
}

fn sum_costs<S: Scalar>(
    params: &[RuntimeCostParams<S>],
    trajs: &[Trajectory<S>],
    t_offset: usize,
) -> S {
    (0..trajs.len()).map(|j| total_cost(&params[j], trajs, j, t_offset)).sum()
}

fn max_state_change<S: Scalar>(new: &[Trajectory<S>], old: &[Trajectory<S>]) -> S {
    let mut change = S::zero();
    for (tn, to) in new.iter().zip(old) {
        for (sn, so) in tn.states.iter().zip(&to.states) {
            change = change
                .max((sn.x - so.x).abs())
                .max((sn.y - so.y).abs())
                .max(wrap_angle(sn.heading - so.heading).abs());
        }
    }
    change
}

fn regularized<S: Scalar>(stages: &LqStages<S>, mu: S) -> LqStages<S> {
    if mu == S::zero() {
        return stages.clone();
    }
    let mut out = stages.clone();
    for stage in &mut out.steps {
        for q in &mut stage.q {
            let n = q.shape()[0];
            for i in 0..n {
                q.set(i, i, q.at(i, i) + mu);
            }
        }
        for r in &mut stage.r {
            let n = r.shape()[0];
            for i in 0..n {
                r.set(i, i, r.at(i, i) + mu);
            }
        }
    }
    out
}

fn build_stages<S: Scalar>(
    params: &[RuntimeCostParams<S>],
    trajs: &[Trajectory<S>],
    t_offset: usize,
    dt: S,
) -> Result<LqStages<S>> {
    let horizon = trajs[0].horizon();
    let mut steps = Vec::with_capacity(horizon);
    for t in 0..horizon {
        let states = joint_at(trajs, t);
        let controls: Vec<Control<S>> = trajs.iter().map(|tr| tr.controls[t]).collect();
        steps.push(quadraticize(params, &states, &controls, t_offset + t, dt)?);
    }
    let terminal_states = joint_at(trajs, horizon);
    let (terminal_q, terminal_l) =
        terminal_quadraticize(params, &terminal_states, t_offset + horizon, dt)?;
    Ok(LqStages { steps, terminal_q, terminal_l })
}

fn feedback_rollout<S: Scalar>(
    x0: &[AgentState<S>],
    prev: &[Trajectory<S>],
    policy: &FeedbackPolicy<S>,
    step_size: S,
    dt: S,
    bounds: &ControlBounds<S>,
) -> Result<Vec<Trajectory<S>>> {
    let m = x0.len();
    let horizon = prev[0].horizon();
    let mut states: Vec<Vec<AgentState<S>>> = vec![Vec::with_capacity(horizon + 1); m];
    let mut controls: Vec<Vec<Control<S>>> = vec![Vec::with_capacity(horizon); m];
    let mut current: Vec<AgentState<S>> = x0.to_vec();
    for (j, s) in current.iter().enumerate() {
        states[j].push(*s);
    }
    for t in 0..horizon {
        let ref_states = joint_at(prev, t);
        let dx = joint_delta(&current, &ref_states);
        for j in 0..m {
            let correction = policy.gains[t][j].matvec(&dx)?;
            let u_prev = prev[j].controls[t];
            let alpha = &policy.feedforward[t][j];
            let u = Control::new(
                u_prev.v - step_size * alpha.data()[0] - correction.data()[0],
                u_prev.omega - step_size * alpha.data()[1] - correction.data()[1],
            )
            .clamped(bounds);
            let next = dynamics::step(&current[j], &u, dt, bounds)?;
            controls[j].push(u);
            states[j].push(next);
            current[j] = next;
        }
    }
    Ok((0..m)
        .map(|j| Trajectory { states: states[j].clone(), controls: controls[j].clone(), dt })
        .collect())
}

/// Iterative LQ game solve from `x0` over `horizon` steps. Stage costs use
/// absolute time `t_offset + t` so receding-horizon calls keep tracking the
/// trial-anchored references. Deterministic given inputs; non-convergence
/// returns the best iterate flagged, not an error.
#[allow(clippy::too_many_arguments)]
pub fn solve_ilqgames<S: Scalar>(
    x0: &[AgentState<S>],
    params: &[RuntimeCostParams<S>],
    horizon: usize,
    dt: S,
    bounds: &ControlBounds<S>,
    t_offset: usize,
    warm_start: Option<&[Vec<Control<S>>]>,
    opts: &SolveOptions<S>,
) -> Result<IlqSolution<S>> {
    if horizon == 0 || opts.max_iters == 0 {
        return Err(Error::InvalidArgument {
            arg: "horizon",
            detail: "horizon and max_iters must be at least 1".into(),
        });
    }
    if x0.len() != params.len() || x0.is_empty() {
        return Err(Error::InvalidArgument {
            arg: "x0",
            detail: format!("{} states vs {} cost params", x0.len(), params.len()),
        });
    }
    let m = x0.len();
    let mut trajs: Vec<Trajectory<S>> = (0..m)
        .map(|j| {
            let controls: Vec<Control<S>> = match warm_start {
                Some(ws) => {
                    let mut c: Vec<Control<S>> =
                        ws[j].iter().take(horizon).map(|u| u.clamped(bounds)).collect();
                    c.resize(horizon, c.last().copied().unwrap_or_else(Control::zero));
                    c
                }
                None => {
                    // drive at the preferred speed with a slight common-handed
                    // curve so near-symmetric encounters carry a lateral offset
                    // into the proximity region
                    vec![
                        Control::new(params[j].v_pref, opts.init_turn_bias).clamped(bounds);
                        horizon
                    ]
                }
            };
            dynamics::rollout(&x0[j], &controls, dt, bounds)
        })
        .collect::<Result<_>>()?;

    let mut cost_sum = sum_costs(params, &trajs, t_offset);
    let mut cost_history = vec![cost_sum];
    let mut converged = false;
    let mut iterations = 0;
    let mut state_change = S::infinity();

    for iter in 1..=opts.max_iters {
        iterations = iter;
        let stages = build_stages(params, &trajs, t_offset, dt)?;

        // line search over step sizes; when the quadratic model misleads it,
        // escalate a trust-region regularizer and re-solve
        let mut accepted = None;
        let mut mu = S::zero();
        loop {
            let policy = solve_lq_game(&regularized(&stages, mu))?;
            let mut step_size = S::one();
            for _ in 0..=opts.max_line_search_halvings {
                let candidate = feedback_rollout(x0, &trajs, &policy, step_size, dt, bounds)?;
                let candidate_cost = sum_costs(params, &candidate, t_offset);
                let slack = S::c(1e-12) * (S::one() + cost_sum.abs());
                if candidate_cost <= cost_sum + slack {
                    accepted = Some((candidate, candidate_cost));
                    break;
                }
                step_size = step_size * S::c(0.5);
            }
            if accepted.is_some() {
                break;
            }
            mu = if mu == S::zero() { S::c(1e-3) } else { mu * S::c(10.0) };
            if mu > S::c(1e3) {
                break;
            }
        }
        let Some((new_trajs, new_cost)) = accepted else {
            break; // no improving step: keep the best iterate, flag below
        };
        state_change = max_state_change(&new_trajs, &trajs);
        trajs = new_trajs;
        cost_sum = new_cost;
        cost_history.push(cost_sum);
        if state_change < opts.tol {
            converged = true;
            break;
        }
    }

    // feedback policy consistent with the returned trajectories
    let stages = build_stages(params, &trajs, t_offset, dt)?;
    let policy = solve_lq_game(&stages)?;
    Ok(IlqSolution { trajectories: trajs, policy, converged, iterations, cost_sum, cost_history, state_change })
}

fn single_agent_stages<S: Scalar>(
    params: &RuntimeCostParams<S>,
    traj: &Trajectory<S>,
    obstacles: &[Vec<(S, S)>],
    t_offset: usize,
    dt: S,
) -> Result<LqStages<S>> {
    let horizon = traj.horizon();
    let mut steps = Vec::with_capacity(horizon);
    for t in 0..horizon {
        let s = &traj.states[t];
        let u = &traj.controls[t];
        let (a, b) = dynamics::linearize(s, u, dt);
        let (q, l) = single_state_quadratics(params, s, &obstacles[t], t_offset + t, dt);
        check_stage_finite(&q, t)?;
        check_stage_finite(&l, t)?;
        let (r, rl) = control_quadratics(params, u);
        steps.push(LqGameStage { a, b: vec![b], q: vec![q], l: vec![l], r: vec![r], rl: vec![rl] });
    }
    let s = traj.final_state();
    let (tq, tl) = single_state_quadratics(params, s, &obstacles[horizon], t_offset + horizon, dt);
    Ok(LqStages { steps, terminal_q: vec![tq], terminal_l: vec![tl] })
}

fn single_state_quadratics<S: Scalar>(
    params: &RuntimeCostParams<S>,
    s: &AgentState<S>,
    obstacles_t: &[(S, S)],
    t: usize,
    dt: S,
) -> (Tensor<S>, Tensor<S>) {
    let mut q = Tensor::zeros(vec![3, 3]);
    let mut l = vec![S::zero(); 3];
    let (rx, ry) = params.reference_at(t, dt);
    let two = S::c(2.0);
    l[0] = two * params.w_ref * (s.x - rx);
    l[1] = two * params.w_ref * (s.y - ry);
    q.set(0, 0, two * params.w_ref);
    q.set(1, 1, two * params.w_ref);
    for ob in obstacles_t {
        if let Some(((gx, gy), (hxx, hxy, hyy))) = prox_pair_quadratics(params, (s.x, s.y), *ob) {
            l[0] = l[0] + gx;
            l[1] = l[1] + gy;
            q.set(0, 0, q.at(0, 0) + hxx);
            q.set(0, 1, q.at(0, 1) + hxy);
            q.set(1, 0, q.at(1, 0) + hxy);
            q.set(1, 1, q.at(1, 1) + hyy);
        }
    }
    (q, Tensor::from_vec(vec![3], l).expect("finite gradient"))
}

fn single_cost<S: Scalar>(
    params: &RuntimeCostParams<S>,
    traj: &Trajectory<S>,
    obstacles: &[Vec<(S, S)>],
    t_offset: usize,
) -> S {
    let dt = traj.dt;
    let mut cost = S::zero();
    for (t, s) in traj.states.iter().enumerate() {
        let at = t_offset + t;
        let (rx, ry) = params.reference_at(at, dt);
        let (ex, ey) = (s.x - rx, s.y - ry);
        cost = cost + params.w_ref * (ex * ex + ey * ey);
        for ob in &obstacles[t] {
            let dx = s.x - ob.0;
            let dy = s.y - ob.1;
            let gap = params.d_safe - (dx * dx + dy * dy).sqrt();
            if gap > S::zero() {
                cost = cost + params.w_prox * gap * gap;
            }
        }
        if t < traj.horizon() {
            cost = cost + control_cost(params, &traj.controls[t]);
        }
    }
    cost
}

/// Unilateral iLQR refinement of one agent's trajectory holding the other
/// agents fixed as moving obstacles. Returns the refined trajectory with the
/// objective before and after; the line search only accepts improvements, so
/// `after <= before`.
pub fn unilateral_refine<S: Scalar>(
    traj: &Trajectory<S>,
    params: &RuntimeCostParams<S>,
    obstacles: &[Vec<(S, S)>],
    bounds: &ControlBounds<S>,
    t_offset: usize,
    opts: &SolveOptions<S>,
) -> Result<(Trajectory<S>, S, S)> {
    let dt = traj.dt;
    let x0 = traj.states[0];
    let mut current = traj.clone();
    let cost_before = single_cost(params, &current, obstacles, t_offset);
    let mut cost = cost_before;

    for _ in 0..opts.max_iters {
        let stages = single_agent_stages(params, &current, obstacles, t_offset, dt)?;
        let mut accepted = None;
        let mut mu = S::zero();
        loop {
            let policy = solve_lq_game(&regularized(&stages, mu))?;
            let mut step_size = S::one();
            for _ in 0..=opts.max_line_search_halvings {
                let cand_vec = feedback_rollout(
                    &[x0],
                    std::slice::from_ref(&current),
                    &policy,
                    step_size,
                    dt,
                    bounds,
                )?;
                let cand = cand_vec.into_iter().next().expect("one agent");
                let cand_cost = single_cost(params, &cand, obstacles, t_offset);
                if cand_cost < cost {
                    accepted = Some((cand, cand_cost));
                    break;
                }
                step_size = step_size * S::c(0.5);
            }
            if accepted.is_some() {
                break;
            }
            mu = if mu == S::zero() { S::c(1e-3) } else { mu * S::c(10.0) };
            if mu > S::c(1e3) {
                break;
            }
        }
        let Some((new_traj, new_cost)) = accepted else { break };
        let change = max_state_change(
            std::slice::from_ref(&new_traj),
            std::slice::from_ref(&current),
        );
        current = new_traj;
        cost = new_cost;
        if change < opts.tol {
            break;
        }
    }
    Ok((current, cost_before, cost))
}

/// Largest relative unilateral improvement any agent can find by iLQR
/// refinement against the others held fixed. Small values certify a local
/// open-loop Nash point.
pub fn verify_open_loop_nash<S: Scalar>(
    trajectories: &[Trajectory<S>],
    params: &[RuntimeCostParams<S>],
    bounds: &ControlBounds<S>,
    t_offset: usize,
    opts: &SolveOptions<S>,
) -> Result<S> {
    let m = trajectories.len();
    let len = trajectories[0].states.len();
    let mut worst = S::zero();
    for j in 0..m {
        let obstacles: Vec<Vec<(S, S)>> = (0..len)
            .map(|t| {
                trajectories
                    .iter()
                    .enumerate()
                    .filter(|(k, _)| *k != j)
                    .map(|(_, tr)| (tr.states[t].x, tr.states[t].y))
                    .collect()
            })
            .collect();
        let (_, before, after) =
            unilateral_refine(&trajectories[j], &params[j], &obstacles, bounds, t_offset, opts)?;
        let denom = before.abs().max(S::c(1e-9));
        worst = worst.max((before - after) / denom);
    }
    Ok(worst)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::rng_from_seed;
    use rand::Rng;

    fn inv_small(m: &Tensor<f64>) -> Tensor<f64> {
        match m.shape()[0] {
            1 => Tensor::from_vec(vec![1, 1], vec![1.0 / m.at(0, 0)]).unwrap(),
            2 => {
                let det = m.at(0, 0) * m.at(1, 1) - m.at(0, 1) * m.at(1, 0);
                Tensor::from_vec(
                    vec![2, 2],
                    vec![
                        m.at(1, 1) / det,
                        -m.at(0, 1) / det,
                        -m.at(1, 0) / det,
                        m.at(0, 0) / det,
                    ],
                )
                .unwrap()
            }
            _ => panic!("oracle only inverts 1x1/2x2"),
        }
    }

    // Textbook affine LQR backward pass (independent algebraic route:
    // Q-expansion with explicit small inverses rather than a stacked solve).
    fn lqr_oracle(stages: &LqStages<f64>) -> (Vec<Tensor<f64>>, Vec<Tensor<f64>>) {
        let horizon = stages.steps.len();
        let mut p_mat = stages.terminal_q[0].clone();
        let mut p_vec = stages.terminal_l[0].clone();
        let mut gains = vec![Tensor::zeros(vec![1, 1]); horizon];
        let mut ffs = vec![Tensor::zeros(vec![1]); horizon];
        for t in (0..horizon).rev() {
            let st = &stages.steps[t];
            let (a, b, q, l, r, rl) = (&st.a, &st.b[0], &st.q[0], &st.l[0], &st.r[0], &st.rl[0]);
            let bt = b.transpose().unwrap();
            let q_uu = r.add(&bt.matmul(&p_mat.matmul(b).unwrap()).unwrap()).unwrap();
            let q_ux = bt.matmul(&p_mat.matmul(a).unwrap()).unwrap();
            let q_u = rl.add(&bt.matvec(&p_vec).unwrap()).unwrap();
            let q_xx = q.add(&a.transpose().unwrap().matmul(&p_mat.matmul(a).unwrap()).unwrap()).unwrap();
            let q_x = l.add(&a.transpose().unwrap().matvec(&p_vec).unwrap()).unwrap();
            let inv = inv_small(&q_uu);
            let k = inv.matmul(&q_ux).unwrap();
            let d = inv.matvec(&q_u).unwrap();
            p_mat = q_xx.sub(&q_ux.transpose().unwrap().matmul(&k).unwrap()).unwrap();
            p_mat = p_mat.add(&p_mat.transpose().unwrap()).unwrap().scale(0.5).unwrap();
            p_vec = q_x.sub(&q_ux.transpose().unwrap().matvec(&d).unwrap()).unwrap();
            gains[t] = k;
            ffs[t] = d;
        }
        (gains, ffs)
    }

    fn random_psd(n: usize, rng: &mut impl Rng) -> Tensor<f64> {
        let mut m = Tensor::zeros(vec![n, n]);
        for i in 0..n {
            for j in 0..n {
                m.set(i, j, rng.gen_range(-1.0..1.0));
            }
        }
        m.transpose().unwrap().matmul(&m).unwrap()
    }

    fn random_single_agent_stages(seed: u64, n: usize, nu: usize, horizon: usize) -> LqStages<f64> {
        let mut rng = rng_from_seed(seed);
        let mut steps = Vec::new();
        for _ in 0..horizon {
            let mut a = Tensor::zeros(vec![n, n]);
            let mut b = Tensor::zeros(vec![n, nu]);
            for i in 0..n {
                for j in 0..n {
                    a.set(i, j, rng.gen_range(-0.8..0.8));
                }
                for j in 0..nu {
                    b.set(i, j, rng.gen_range(-0.8..0.8));
                }
            }
            let q = random_psd(n, &mut rng);
            let l = Tensor::vector((0..n).map(|_| rng.gen_range(-1.0..1.0)).collect()).unwrap();
            let r = random_psd(nu, &mut rng).add(&Tensor::eye(nu)).unwrap();
            let rl = Tensor::vector((0..nu).map(|_| rng.gen_range(-1.0..1.0)).collect()).unwrap();
            steps.push(LqGameStage { a, b: vec![b], q: vec![q], l: vec![l], r: vec![r], rl: vec![rl] });
        }
        let terminal_q = vec![random_psd(n, &mut rng)];
        let terminal_l =
            vec![Tensor::vector((0..n).map(|_| rng.gen_range(-1.0..1.0)).collect()).unwrap()];
        LqStages { steps, terminal_q, terminal_l }
    }

    #[test]
    fn single_agent_lq_matches_textbook_lqr() {
        for seed in 0..10u64 {
            let stages = random_single_agent_stages(100 + seed, 3, 2, 12);
            let policy = solve_lq_game(&stages).unwrap();
            let (k_oracle, d_oracle) = lqr_oracle(&stages);
            for t in 0..stages.steps.len() {
                let dk = policy.gains[t][0].linf_distance(&k_oracle[t]).unwrap();
                let dd = policy.feedforward[t][0].linf_distance(&d_oracle[t]).unwrap();
                assert!(dk < 1e-8, "seed {seed} t {t}: gain mismatch {dk}");
                assert!(dd < 1e-8, "seed {seed} t {t}: feedforward mismatch {dd}");
            }
        }
    }

    #[test]
    fn one_step_scalar_gain_closed_form() {
        let (a, b, qt, r) = (2.0f64, 0.5, 3.0, 0.25);
        let stage = LqGameStage {
            a: Tensor::from_vec(vec![1, 1], vec![a]).unwrap(),
            b: vec![Tensor::from_vec(vec![1, 1], vec![b]).unwrap()],
            q: vec![Tensor::zeros(vec![1, 1])],
            l: vec![Tensor::zeros(vec![1])],
            r: vec![Tensor::from_vec(vec![1, 1], vec![r]).unwrap()],
            rl: vec![Tensor::zeros(vec![1])],
        };
        let stages = LqStages {
            steps: vec![stage],
            terminal_q: vec![Tensor::from_vec(vec![1, 1], vec![qt]).unwrap()],
            terminal_l: vec![Tensor::zeros(vec![1])],
        };
        let policy = solve_lq_game(&stages).unwrap();
        let expect = (b * qt * a) / (b * qt * b + r);
        assert!((policy.gains[0][0].at(0, 0) - expect).abs() < 1e-12);
    }

    fn embed_block(joint: &mut Tensor<f64>, block: &Tensor<f64>, row: usize, col: usize) {
        for i in 0..block.shape()[0] {
            for j in 0..block.shape()[1] {
                joint.set(row + i, col + j, block.at(i, j));
            }
        }
    }

    #[test]
    fn zero_coupling_reduces_to_per_agent_lqr() {
        // two independent 3-dim subsystems solved as one joint game
        let sub_a = random_single_agent_stages(7, 3, 2, 8);
        let sub_b = random_single_agent_stages(8, 3, 2, 8);
        let horizon = 8;
        let mut steps = Vec::new();
        for t in 0..horizon {
            let mut a = Tensor::zeros(vec![6, 6]);
            embed_block(&mut a, &sub_a.steps[t].a, 0, 0);
            embed_block(&mut a, &sub_b.steps[t].a, 3, 3);
            let mut b1 = Tensor::zeros(vec![6, 2]);
            embed_block(&mut b1, &sub_a.steps[t].b[0], 0, 0);
            let mut b2 = Tensor::zeros(vec![6, 2]);
            embed_block(&mut b2, &sub_b.steps[t].b[0], 3, 0);
            let mut q1 = Tensor::zeros(vec![6, 6]);
            embed_block(&mut q1, &sub_a.steps[t].q[0], 0, 0);
            let mut q2 = Tensor::zeros(vec![6, 6]);
            embed_block(&mut q2, &sub_b.steps[t].q[0], 3, 3);
            let mut l1 = vec![0.0; 6];
            l1[..3].copy_from_slice(sub_a.steps[t].l[0].data());
            let mut l2 = vec![0.0; 6];
            l2[3..].copy_from_slice(sub_b.steps[t].l[0].data());
            steps.push(LqGameStage {
                a,
                b: vec![b1, b2],
                q: vec![q1, q2],
                l: vec![
                    Tensor::vector(l1).unwrap(),
                    Tensor::vector(l2).unwrap(),
                ],
                r: vec![sub_a.steps[t].r[0].clone(), sub_b.steps[t].r[0].clone()],
                rl: vec![sub_a.steps[t].rl[0].clone(), sub_b.steps[t].rl[0].clone()],
            });
        }
        let mut tq1 = Tensor::zeros(vec![6, 6]);
        embed_block(&mut tq1, &sub_a.terminal_q[0], 0, 0);
        let mut tq2 = Tensor::zeros(vec![6, 6]);
        embed_block(&mut tq2, &sub_b.terminal_q[0], 3, 3);
        let mut tl1 = vec![0.0; 6];
        tl1[..3].copy_from_slice(sub_a.terminal_l[0].data());
        let mut tl2 = vec![0.0; 6];
        tl2[3..].copy_from_slice(sub_b.terminal_l[0].data());
        let joint = LqStages {
            steps,
            terminal_q: vec![tq1, tq2],
            terminal_l: vec![Tensor::vector(tl1).unwrap(), Tensor::vector(tl2).unwrap()],
        };

        let policy = solve_lq_game(&joint).unwrap();
        let (k1, d1) = lqr_oracle(&sub_a);
        let (k2, d2) = lqr_oracle(&sub_b);
        for t in 0..horizon {
            for r in 0..2 {
                for c in 0..3 {
                    assert!((policy.gains[t][0].at(r, c) - k1[t].at(r, c)).abs() < 1e-9);
                    assert!((policy.gains[t][1].at(r, c + 3) - k2[t].at(r, c)).abs() < 1e-9);
                    // cross-agent blocks vanish without coupling
                    assert!(policy.gains[t][0].at(r, c + 3).abs() < 1e-9);
                    assert!(policy.gains[t][1].at(r, c).abs() < 1e-9);
                }
                assert!((policy.feedforward[t][0].data()[r] - d1[t].data()[r]).abs() < 1e-9);
                assert!((policy.feedforward[t][1].data()[r] - d2[t].data()[r]).abs() < 1e-9);
            }
        }
    }

    fn bench_params(start: (f64, f64), goal: (f64, f64)) -> RuntimeCostParams<f64> {
        RuntimeCostParams {
            start,
            goal,
            v_pref: 1.0,
            w_ref: 1.0,
            w_vel: 0.5,
            w_omega: 0.1,
            w_prox: 20.0,
            d_safe: 0.9,
        }
    }

    #[test]
    fn quadraticize_gradient_matches_finite_differences() {
        let mut rng = rng_from_seed(55);
        let dt = 0.1;
        for _ in 0..20 {
            let states: Vec<AgentState<f64>> = (0..3)
                .map(|_| {
                    AgentState::new(
                        rng.gen_range(-1.0..1.0),
                        rng.gen_range(-1.0..1.0),
                        rng.gen_range(-3.0..3.0),
                    )
                })
                .collect();
            let controls: Vec<Control<f64>> =
                (0..3).map(|_| Control::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0))).collect();
            let params: Vec<RuntimeCostParams<f64>> = (0..3)
                .map(|i| bench_params((i as f64, -1.0), (rng.gen_range(-2.0..2.0), rng.gen_range(-2.0..2.0))))
                .collect();
            let t = 4;
            let stage = quadraticize(&params, &states, &controls, t, dt).unwrap();
            let h = 1e-6;
            for j in 0..3 {
                for coord in 0..9 {
                    let perturb = |sign: f64| {
                        let mut s = states.clone();
                        let agent = coord / 3;
                        match coord % 3 {
                            0 => s[agent].x += sign * h,
                            1 => s[agent].y += sign * h,
                            _ => s[agent].heading += sign * h,
                        }
                        state_cost(&params[j], &s, j, t, dt)
                    };
                    let fd = (perturb(1.0) - perturb(-1.0)) / (2.0 * h);
                    let got = stage.l[j].data()[coord];
                    assert!(
                        (got - fd).abs() < 1e-5,
                        "agent {j} state coord {coord}: {got} vs {fd}"
                    );
                }
                for coord in 0..2 {
                    let perturb = |sign: f64| {
                        let mut u = controls[j];
                        if coord == 0 {
                            u.v += sign * h;
                        } else {
                            u.omega += sign * h;
                        }
                        control_cost(&params[j], &u)
                    };
                    let fd = (perturb(1.0) - perturb(-1.0)) / (2.0 * h);
                    assert!((stage.rl[j].data()[coord] - fd).abs() < 1e-5);
                }
            }
        }
    }

    #[test]
    fn velocity_channel_hessian_is_exact() {
        let params = vec![bench_params((0.0, 0.0), (4.0, 0.0))];
        let states = vec![AgentState::new(0.0, 0.0, 0.0)];
        let controls = vec![Control::new(0.3, 0.1)];
        let stage = quadraticize(&params, &states, &controls, 0, 0.1).unwrap();
        assert_eq!(stage.r[0].at(0, 0), 2.0 * 0.5);
        assert_eq!(stage.r[0].at(1, 1), 2.0 * 0.1);
    }

    #[test]
    fn inactive_hinge_contributes_nothing() {
        let mut params = vec![
            bench_params((0.0, 0.0), (4.0, 0.0)),
            bench_params((5.0, 5.0), (9.0, 5.0)),
        ];
        let states = vec![AgentState::new(0.1, 0.0, 0.0), AgentState::new(5.0, 5.0, 0.0)];
        let controls = vec![Control::new(1.0, 0.0); 2];
        let with_prox = quadraticize(&params, &states, &controls, 0, 0.1).unwrap();
        params[0].w_prox = 0.0;
        params[1].w_prox = 0.0;
        let without = quadraticize(&params, &states, &controls, 0, 0.1).unwrap();
        for j in 0..2 {
            assert_eq!(with_prox.q[j].data(), without.q[j].data());
            assert_eq!(with_prox.l[j].data(), without.l[j].data());
        }
    }

    #[test]
    fn single_agent_tracks_reachable_reference() {
        let params = vec![bench_params((0.0, 0.0), (6.0, 0.0))];
        let x0 = vec![AgentState::new(0.0, 0.0, 0.0)];
        let bounds = ControlBounds::default();
        let sol = solve_ilqgames(
            &x0,
            &params,
            50,
            0.1,
            &bounds,
            0,
            None,
            &SolveOptions::default(),
        )
        .unwrap();
        assert!(sol.converged, "did not converge in {} iterations", sol.iterations);
        assert!(sol.cost_sum <= 1e-3, "cost {}", sol.cost_sum);
        let end = sol.trajectories[0].final_state();
        assert!((end.x - 5.0).abs() < 0.05 && end.y.abs() < 0.05);
    }

    fn head_on_setup() -> (Vec<AgentState<f64>>, Vec<RuntimeCostParams<f64>>) {
        let x0 = vec![
            AgentState::new(3.0, 0.0, std::f64::consts::PI),
            AgentState::new(-3.0, 0.0, 0.0),
        ];
        let params = vec![
            bench_params((3.0, 0.0), (-3.0, 0.0)),
            bench_params((-3.0, 0.0), (3.0, 0.0)),
        ];
        (x0, params)
    }

    fn min_pairwise_distance(trajs: &[Trajectory<f64>]) -> f64 {
        let mut best = f64::INFINITY;
        for t in 0..trajs[0].states.len() {
            for a in 0..trajs.len() {
                for b in (a + 1)..trajs.len() {
                    best = best.min(trajs[a].states[t].distance_to(&trajs[b].states[t]));
                }
            }
        }
        best
    }

    #[test]
    fn head_on_swap_avoids_and_is_locally_nash() {
        let (x0, params) = head_on_setup();
        let bounds = ControlBounds::default();
        let opts = SolveOptions::default();
        let sol = solve_ilqgames(&x0, &params, 80, 0.1, &bounds, 0, None, &opts).unwrap();
        assert!(sol.converged, "not converged after {} iterations", sol.iterations);
        assert!(sol.iterations <= 100);
        let dmin = min_pairwise_distance(&sol.trajectories);
        assert!(dmin >= 0.6, "min distance {dmin}");

        // line search never increases the agent-sum between accepted iterates
        for w in sol.cost_history.windows(2) {
            assert!(w[1] <= w[0] * (1.0 + 1e-9) + 1e-9, "cost increased: {} -> {}", w[0], w[1]);
        }

        // symmetric problem, equivariant solver: agent 2 is agent 1 reflected
        // through the origin
        for t in 0..sol.trajectories[0].states.len() {
            let s1 = &sol.trajectories[0].states[t];
            let s2 = &sol.trajectories[1].states[t];
            assert!((s1.x + s2.x).abs() < 1e-6, "t {t}: x {} vs {}", s1.x, s2.x);
            assert!((s1.y + s2.y).abs() < 1e-6);
            let dh = wrap_angle(s1.heading - s2.heading - std::f64::consts::PI).abs();
            assert!(dh < 1e-6, "t {t}: heading asymmetry {dh}");
        }

        let improvement =
            verify_open_loop_nash(&sol.trajectories, &params, &bounds, 0, &opts).unwrap();
        assert!(improvement <= 1e-2, "unilateral improvement {improvement}");

        // negative control: a deliberately perturbed trajectory is exploitable
        let mut perturbed = sol.trajectories.clone();
        let mut controls = perturbed[0].controls.clone();
        for u in controls.iter_mut().take(30) {
            u.omega = (u.omega + 1.2).clamp(-2.0, 2.0);
        }
        perturbed[0] = dynamics::rollout(&perturbed[0].states[0], &controls, 0.1, &bounds).unwrap();
        let exploit =
            verify_open_loop_nash(&perturbed, &params, &bounds, 0, &opts).unwrap();
        assert!(exploit > 1e-1, "perturbed improvement only {exploit}");
    }

    #[test]
    fn single_agent_is_trivially_nash() {
        let params = vec![bench_params((0.0, 0.0), (6.0, 0.0))];
        let x0 = vec![AgentState::new(0.0, 0.0, 0.0)];
        let bounds = ControlBounds::default();
        let opts = SolveOptions::default();
        let sol = solve_ilqgames(&x0, &params, 50, 0.1, &bounds, 0, None, &opts).unwrap();
        let improvement =
            verify_open_loop_nash(&sol.trajectories, &params, &bounds, 0, &opts).unwrap();
        assert!(improvement <= 1e-6, "improvement {improvement}");
    }

    #[test]
    fn solver_is_deterministic() {
        let (x0, params) = head_on_setup();
        let bounds = ControlBounds::default();
        let opts = SolveOptions::default();
        let a = solve_ilqgames(&x0, &params, 40, 0.1, &bounds, 0, None, &opts).unwrap();
        let b = solve_ilqgames(&x0, &params, 40, 0.1, &bounds, 0, None, &opts).unwrap();
        assert_eq!(a.trajectories, b.trajectories);
        assert_eq!(a.cost_sum, b.cost_sum);
    }

    #[test]
    fn warm_start_with_tail_converges_immediately() {
        // the tail of a converged open-loop solution is a solution of the
        // tail problem: re-solving from step 1 with the shifted controls
        // should accept no meaningful change
        let (x0, params) = head_on_setup();
        let bounds = ControlBounds::default();
        let opts = SolveOptions::default();
        let sol = solve_ilqgames(&x0, &params, 60, 0.1, &bounds, 0, None, &opts).unwrap();
        assert!(sol.converged);
        let x1: Vec<AgentState<f64>> =
            sol.trajectories.iter().map(|tr| tr.states[1]).collect();
        let warm: Vec<Vec<Control<f64>>> =
            sol.trajectories.iter().map(|tr| tr.controls[1..].to_vec()).collect();
        let resolved =
            solve_ilqgames(&x1, &params, 59, 0.1, &bounds, 1, Some(&warm), &opts).unwrap();
        assert!(resolved.converged);
        for (j, tr) in resolved.trajectories.iter().enumerate() {
            for (t, s) in tr.states.iter().enumerate() {
                let orig = &sol.trajectories[j].states[t + 1];
                assert!(
                    (s.x - orig.x).abs() < 2e-3 && (s.y - orig.y).abs() < 2e-3,
                    "agent {j} step {t} drifted"
                );
            }
        }
    }
}
