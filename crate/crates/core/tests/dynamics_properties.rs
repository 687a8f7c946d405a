use cstr_biofilm::dynamics::{
    classify_limit, integrate, orbit_bound_monitor, IntegrateOptions, LimitClass, ReactorState, Trajectory,
};
use cstr_biofilm::kinetics::{KineticsSet, ModelParams};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn run(ic: [f64; 3], s_star: f64, t_end: f64, opts: &IntegrateOptions) -> Trajectory {
    integrate(
        ReactorState::new(0.0, ic[0], ic[1], ic[2]),
        t_end,
        &KineticsSet::reference(),
        &ModelParams::reference(s_star),
        opts,
    )
    .unwrap()
}

fn check_monitors(traj: &Trajectory, s_star: f64) {
    assert!(traj.nonnegative(), "pre-clamp minimum {}", traj.monitor.min_component_pre_clamp);
    assert!(traj.monitor.min_component_pre_clamp >= -1e-9);
    let bound = traj.initial().s.max(s_star) + 1e-9;
    assert!(traj.steps.iter().all(|s| s.s <= bound), "max S {}", traj.monitor.max_s);
    assert!(traj.monitor.s_bound_violations.is_empty());
    let b = orbit_bound_monitor(traj, &KineticsSet::reference(), &ModelParams::reference(s_star)).unwrap();
    assert!(b.holds, "{b:?}");
}

#[test]
fn random_initial_states_respect_invariants() {
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    let opts = IntegrateOptions::default();
    for _ in 0..20 {
        let ic = [rng.gen_range(0.0..2.0), rng.gen_range(0.0..2.0), rng.gen_range(0.0..2.0)];
        for s_star in [0.5, 5.0] {
            check_monitors(&run(ic, s_star, 30.0, &opts), s_star);
        }
    }
}

#[test]
fn washout_approach_stays_below_inflow() {
    let traj = run([0.5, 0.3, 0.3], 0.5, 50.0, &IntegrateOptions::default());
    assert!(traj.steps.iter().all(|s| s.s <= 0.5 + 1e-9));
    assert!(traj.samples.iter().all(|s| s.state.s <= 0.5 + 1e-9));
    assert_eq!(classify_limit(&traj, 0.5, 10.0, 1e-3), LimitClass::Washout);
    check_monitors(&traj, 0.5);
}

#[test]
fn tighter_tolerance_barely_moves_endpoint() {
    let coarse = run([0.1, 5.0, 0.1], 5.0, 100.0, &IntegrateOptions::default());
    let fine = run([0.1, 5.0, 0.1], 5.0, 100.0, &IntegrateOptions { rtol: 1e-9, atol: 1e-11, ..Default::default() });
    let d = coarse.last().distance_to(fine.last().components());
    assert!(d <= 1e-7, "{d:e}");
}

#[test]
fn zero_span_keeps_initial_state() {
    let traj = run([0.3, 1.2, 0.7], 5.0, 0.0, &IntegrateOptions::default());
    assert_eq!(traj.samples.len(), 1);
    assert_eq!(traj.samples[0].state.components(), [0.3, 1.2, 0.7]);
}

#[test]
fn samples_agree_with_steps_at_the_end() {
    let traj = run([1.0, 3.0, 1.0], 5.0, 7.25, &IntegrateOptions::default());
    let last = traj.samples.last().unwrap();
    assert_eq!(last.state.t, 7.25);
    assert_eq!(last.state.components(), traj.last().components());
    // samples every 0.1 plus the final time
    assert_eq!(traj.samples.len(), 74);
}
