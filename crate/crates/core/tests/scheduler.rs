mod common;

use proptest::prelude::*;

use common::*;
use netsched::objective::{penalty_value, Objective, PenaltyConfig, ProblemSpec};
use netsched::scheduler::{
    choose_aux, choose_mode, GradientPath, SchedulerOptions, Simulation, SimulationSnapshot,
};
use netsched::stochastic::{ArrivalModel, StateModel};

fn markov_simulation(seed: u64, options: SchedulerOptions) -> Simulation {
    let mut r = rng(seed);
    let shape = InstanceShape {
        max_states: 3,
        ..Default::default()
    };
    let inst = loop {
        let inst = random_instance(&mut r, &shape);
        if inst.net.num_states() >= 2 {
            break inst;
        }
    };
    let s = inst.net.num_states();
    let transition: Vec<Vec<f64>> = (0..s)
        .map(|i| (0..s).map(|j| if i == j { 0.6 } else { 0.4 / (s - 1) as f64 }).collect())
        .collect();
    Simulation::new(
        inst.objective,
        ArrivalModel::IidBernoulliBatch {
            rates: inst.y.a.clone(),
            a_max: 2,
        },
        StateModel::MarkovChain { transition },
        seed,
        options,
    )
    .unwrap()
}

fn checked() -> SchedulerOptions {
    SchedulerOptions {
        check_every: Some(1),
        ..Default::default()
    }
}

#[test]
fn slot_metrics_match_direct_evaluation() {
    for seed in 0..5 {
        let mut sim = markov_simulation(seed, checked());
        let obj: Objective = sim.objective().clone();
        for _ in 0..2000 {
            let rec = sim.run_slot().unwrap();
            let emp = sim.empirical();
            let (x, z, y) = (emp.x(), emp.z().unwrap(), emp.y().unwrap());
            let f = obj.eval_cost(&x, &y).unwrap();
            let h = obj.eval_constraints(&x, &y).unwrap();
            let p = obj.eval_penalty(&x, &z, &y).unwrap();
            let scale = |v: f64| v.abs().max(1.0);
            assert!((rec.metrics.f - f).abs() <= 1e-12 * scale(f));
            assert!(max_abs_diff(&rec.metrics.h, &h) <= 1e-12);
            assert!((rec.metrics.p - p).abs() <= 1e-9 * scale(p));
            let g = f + obj.penalty_config().beta * p;
            assert!((rec.metrics.g - g).abs() <= 1e-9 * scale(g));
        }
    }
}

#[test]
fn empirical_iterates_stay_in_their_sets() {
    let mut sim = markov_simulation(21, checked());
    let pen = *sim.objective().penalty_config();
    for _ in 0..3000 {
        let rec = sim.run_slot().unwrap();
        let emp = sim.empirical();
        assert!(emp.x().is_on_simplex());
        for zi in emp.z().unwrap() {
            assert!(zi >= pen.epsilon - 1e-12 && zi <= pen.z_max + 1e-12);
        }
        assert!(rec.u.iter().all(|&u| u == pen.epsilon || u == pen.z_max));
        assert!(rec.queue.iter().all(|&q| q >= 0));
        for (e, n) in rec.effective_departures.iter().zip(&rec.nominal_departures) {
            assert!(*e >= 0 && e <= n);
        }
    }
}

#[test]
fn recursive_running_means_match_ratios() {
    let mut sim = markov_simulation(31, checked());
    for _ in 0..5000 {
        sim.run_slot().unwrap();
    }
    let emp = sim.empirical();
    let x = emp.x();
    for (a, b) in x.blocks().iter().zip(emp.x_recursive()) {
        assert!(max_abs_diff(a, b) <= 1e-9);
    }
    assert!(max_abs_diff(&emp.z().unwrap(), emp.z_recursive()) <= 1e-9);
}

#[test]
fn both_gradient_paths_agree_every_slot() {
    for path in [GradientPath::Queue, GradientPath::Analytic] {
        let options = SchedulerOptions {
            gradient: path,
            check_every: Some(1),
        };
        for seed in 40..43 {
            let mut sim = markov_simulation(seed, options);
            for _ in 0..2000 {
                sim.run_slot().unwrap();
            }
        }
    }
}

#[test]
fn runs_are_deterministic() {
    let mut a = markov_simulation(51, SchedulerOptions::default());
    let mut b = markov_simulation(51, SchedulerOptions::default());
    for _ in 0..2000 {
        assert_eq!(a.run_slot().unwrap(), b.run_slot().unwrap());
    }
}

#[test]
fn snapshot_round_trip_resumes_identically() {
    let mut a = markov_simulation(61, SchedulerOptions::default());
    for _ in 0..777 {
        a.run_slot().unwrap();
    }
    let text = a.snapshot().to_toml_string().unwrap();
    let snap = SimulationSnapshot::from_toml_str(&text).unwrap();
    let mut b = markov_simulation(61, SchedulerOptions::default());
    b.restore(snap).unwrap();
    for _ in 0..1500 {
        assert_eq!(a.run_slot().unwrap(), b.run_slot().unwrap());
    }
}

#[test]
fn snapshot_of_another_network_is_rejected() {
    let mut a = markov_simulation(71, SchedulerOptions::default());
    a.run_slot().unwrap();
    let net = two_link_network();
    let spec = ProblemSpec::min_power(PenaltyConfig::with_z_max(4.0));
    let mut b = Simulation::new(
        Objective::new(&net, &spec).unwrap(),
        ArrivalModel::DeterministicRate { rates: vec![0.2, 0.2] },
        StateModel::single(),
        71,
        SchedulerOptions::default(),
    )
    .unwrap();
    let mut snap = a.snapshot();
    assert!(b.restore(snap.clone()).is_err());
    snap.schema_version += 1;
    assert!(a.restore(snap).is_err());
}

#[test]
fn penalty_of_last_slot_is_consistent_with_residual() {
    let mut sim = markov_simulation(81, SchedulerOptions::default());
    let mut rec = sim.run_slot().unwrap();
    for _ in 0..999 {
        rec = sim.run_slot().unwrap();
    }
    let z = sim.empirical().z().unwrap();
    let r: Vec<f64> = rec.metrics.h.iter().zip(&z).map(|(h, z)| h + z).collect();
    let alpha = sim.objective().penalty_config().alpha;
    assert!((penalty_value(&r, alpha) - rec.metrics.p).abs() <= 1e-12);
}

proptest! {
    #[test]
    fn mode_choice_is_scale_invariant(
        g in prop::collection::vec(-5i32..5, 1..12),
        c in 1e-3f64..1e3,
    ) {
        let g: Vec<f64> = g.into_iter().map(f64::from).collect();
        let scaled: Vec<f64> = g.iter().map(|v| v * c).collect();
        prop_assert_eq!(choose_mode(&g), choose_mode(&scaled));
    }

    #[test]
    fn chosen_mode_attains_the_minimum(g in prop::collection::vec(-1.0f64..1.0, 1..20)) {
        let k = choose_mode(&g);
        prop_assert!(g.iter().all(|&v| g[k] <= v));
        prop_assert!(g[..k].iter().all(|&v| v > g[k]));
    }

    #[test]
    fn slack_corner_minimises_inner_product(g in prop::collection::vec(-1.0f64..1.0, 1..10)) {
        let u = choose_aux(&g, 0.1, 3.0);
        for (gi, ui) in g.iter().zip(&u) {
            let other = if *ui == 0.1 { 3.0 } else { 0.1 };
            prop_assert!(gi * ui <= gi * other);
        }
    }
}
