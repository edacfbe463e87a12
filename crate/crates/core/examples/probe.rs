// temporary probe
use invgames_core::dynamics::{AgentState, ControlBounds};
use invgames_core::ilqgames::{
    solve_ilqgames, total_cost, unilateral_refine, RuntimeCostParams, SolveOptions,
};

fn main() {
    let x0 = vec![
        AgentState::new(3.0, 0.0, std::f64::consts::PI),
        AgentState::new(-3.0, 0.0, 0.0),
    ];
    let p = |start: (f64, f64), goal: (f64, f64)| RuntimeCostParams {
        start, goal, v_pref: 1.0, w_ref: 1.0, w_vel: 0.5, w_omega: 0.1, w_prox: 20.0, d_safe: 0.9,
    };
    let params = vec![p((3.0, 0.0), (-3.0, 0.0)), p((-3.0, 0.0), (3.0, 0.0))];
    let bounds = ControlBounds::default();
    for tol in [1e-3, 1e-5, 1e-7] {
        let mut opts = SolveOptions::default();
        opts.max_iters = 400;
        opts.tol = tol;
        let sol = solve_ilqgames(&x0, &params, 80, 0.1, &bounds, 0, None, &opts).unwrap();
        let c0 = total_cost(&params[0], &sol.trajectories, 0, 0);
        let c1 = total_cost(&params[1], &sol.trajectories, 1, 0);
        // unilateral check per agent
        let len = sol.trajectories[0].states.len();
        let mut rels = vec![];
        for j in 0..2 {
            let obstacles: Vec<Vec<(f64, f64)>> = (0..len)
                .map(|t| {
                    sol.trajectories.iter().enumerate().filter(|(k, _)| *k != j)
                        .map(|(_, tr)| (tr.states[t].x, tr.states[t].y)).collect()
                })
                .collect();
            let (_, before, after) =
                unilateral_refine(&sol.trajectories[j], &params[j], &obstacles, &bounds, 0, &opts).unwrap();
            rels.push((before - after) / before.abs().max(1e-9));
        }
        println!(
            "tol={tol:.0e} conv={} iters={} cost0={c0:.4} cost1={c1:.4} rel_improve={:?}",
            sol.converged, sol.iterations, rels
        );
    }
}
