//! Statistical and structural checks of the simulator. Every test runs on a
//! fixed seed, so outcomes are reproducible; thresholds leave a wide margin
//! over the sampling error at the chosen sizes.

use std::collections::BTreeMap;

use proptest::prelude::*;

use autocat_core::analytic::{poisson_pmf, MixtureStationary};
use autocat_core::model::{apply_volume_scaling, propensities, PrimedParameters};
use autocat_core::rng::{derive_seed, stream};
use autocat_core::simulate::{
    default_initial_state, dit_statistics, empirical_conditional, ensemble_sample, lumped_projection, simulate_trajectory,
    ssa_step, SimOptions, DEFAULT_DIT_FLOOR,
};
use autocat_core::stats::{normalize, tv_distance, two_sample_chi_square};
use autocat_core::verify::{moment_zscore_report, truncated_stationary_solve};
use autocat_core::{create_network, Error, ReactionNetwork, State, Topology};

fn fig1() -> ReactionNetwork {
    create_network(2, Topology::FullSymmetric, 0.05, 0.2, 0.01).unwrap()
}

fn small() -> ReactionNetwork {
    create_network(2, Topology::FullSymmetric, 0.3, vec![0.4, 0.6], 0.5).unwrap()
}

#[test]
fn first_step_from_the_origin() {
    let net = fig1();
    let mut rng = stream(11);
    let n = 40_000;
    let (mut waits, mut first) = (0.0, 0usize);
    for _ in 0..n {
        let (w, y) = ssa_step(&net, &State::zeros(2), &mut rng).unwrap();
        waits += w;
        match y.counts() {
            [1, 0] => first += 1,
            [0, 1] => {}
            other => panic!("unexpected successor {other:?}"),
        }
    }
    // mean 2.5, sd 2.5; binomial(1/2)
    let mean = waits / n as f64;
    assert!((mean - 2.5).abs() < 4.0 * 2.5 / (n as f64).sqrt(), "mean wait {mean}");
    let p = first as f64 / n as f64;
    assert!((p - 0.5).abs() < 4.0 * 0.5 / (n as f64).sqrt(), "p {p}");
}

#[test]
fn single_molecule_cannot_react_autocatalytically() {
    let net = fig1();
    let mut rng = stream(3);
    for _ in 0..1000 {
        let (_, y) = ssa_step(&net, &State::new(vec![1, 0]), &mut rng).unwrap();
        assert!(matches!(y.counts(), [2, 0] | [1, 1] | [0, 0]), "{:?}", y);
    }
}

#[test]
fn steps_and_trajectories_are_deterministic_in_the_seed() {
    let net = fig1();
    let x = State::new(vec![7, 3]);
    let a = ssa_step(&net, &x, &mut stream(5)).unwrap();
    let b = ssa_step(&net, &x, &mut stream(5)).unwrap();
    assert_eq!(a, b);
    let t1 = simulate_trajectory(&net, &State::new(vec![20, 20]), 500.0, 9, SimOptions::default()).unwrap();
    let t2 = simulate_trajectory(&net, &State::new(vec![20, 20]), 500.0, 9, SimOptions::default()).unwrap();
    assert_eq!(t1, t2);
    let t3 = simulate_trajectory(&net, &State::new(vec![20, 20]), 500.0, 10, SimOptions::default()).unwrap();
    assert_ne!(t1, t3);
}

#[test]
fn vanishing_horizon_gives_no_events() {
    let x0 = State::new(vec![20, 20]);
    let t = simulate_trajectory(&fig1(), &x0, 1e-12, 1, SimOptions::default()).unwrap();
    assert_eq!(t.n_events(), 0);
    assert_eq!(t.final_state(), x0.counts());
}

#[test]
fn event_cap_is_enforced() {
    let err = simulate_trajectory(&fig1(), &State::new(vec![20, 20]), 5000.0, 1, SimOptions { event_cap: 100 }).unwrap_err();
    assert!(matches!(err, Error::EventCapExceeded { cap: 100, .. }));
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    /// Replay: each event is a legal jump with positive propensity at its predecessor.
    #[test]
    fn trajectories_replay(seed in any::<u64>(), x0 in proptest::collection::vec(0u64..30, 3), cycle in any::<bool>()) {
        let topo = if cycle { Topology::TkCycle } else { Topology::FullSymmetric };
        let net = create_network(3, topo, 0.05, vec![0.2, 0.5, 0.3], 0.1).unwrap();
        let traj = simulate_trajectory(&net, &State::new(x0.clone()), 30.0, seed, SimOptions::default()).unwrap();
        let mut prev = State::new(x0);
        let mut last_t = 0.0;
        let lumped = lumped_projection(&traj);
        let mut lumped_jumps = 0;
        for (t, s) in traj.events() {
            prop_assert!(t > last_t && t <= traj.end_time);
            let ok = propensities(&net, &prev).iter().any(|tr| tr.kind.apply(&prev).unwrap().counts() == s);
            prop_assert!(ok, "illegal jump {:?} -> {:?}", prev, s);
            if s.iter().sum::<u64>() != prev.total() {
                lumped_jumps += 1;
            }
            prev = State::new(s.to_vec());
            last_t = t;
        }
        prop_assert_eq!(lumped.jumps.len(), lumped_jumps);
        let mut n = lumped.initial as i64;
        for &(_, m) in &lumped.jumps {
            prop_assert_eq!((m as i64 - n).abs(), 1);
            n = m as i64;
        }
    }
}

#[test]
fn ensembles_are_reproducible_and_schedule_independent() {
    let net = small();
    let x0 = default_initial_state(&net);
    let run = |threads: usize| {
        rayon::ThreadPoolBuilder::new()
            .num_threads(threads)
            .build()
            .unwrap()
            .install(|| ensemble_sample(&net, &x0, 10.0, 300, 77, SimOptions::default()).unwrap())
    };
    let a = run(1);
    let b = run(4);
    assert_eq!(a, b);
    assert_eq!(a.end_states.len(), 300);
    assert_eq!(a.seeds[5], derive_seed(77, 5));

    // a singleton ensemble is one trajectory on the derived seed
    let one = ensemble_sample(&net, &x0, 10.0, 1, 77, SimOptions::default()).unwrap();
    let traj = simulate_trajectory(&net, &x0, 10.0, derive_seed(77, 0), SimOptions::default()).unwrap();
    assert_eq!(one.end_states[0].counts(), traj.final_state());
}

#[test]
fn disjoint_master_seeds_are_statistically_indistinguishable() {
    let net = small();
    let x0 = default_initial_state(&net);
    let hist = |seed| {
        let ens = ensemble_sample(&net, &x0, 20.0, 20_000, seed, SimOptions::default()).unwrap();
        autocat_core::stats::histogram(ens.end_states.iter().map(|s| s.counts().to_vec()))
    };
    let (stat, dof, p) = two_sample_chi_square(&hist(1), &hist(2));
    assert!(p > 1e-3, "chi2 = {stat} on {dof} dof, p = {p}");
}

#[test]
fn empirical_conditional_partitions_the_ensemble() {
    let net = small();
    let ens = ensemble_sample(&net, &default_initial_state(&net), 20.0, 2000, 4, SimOptions::default()).unwrap();
    let retained: usize = ens.totals_histogram().keys().map(|&n| empirical_conditional(&ens, n).unwrap().retained).sum();
    assert_eq!(retained, 2000);
    let missing = ens.totals_histogram().keys().max().unwrap() + 1;
    assert_eq!(empirical_conditional(&ens, missing).unwrap_err(), Error::EmptySlice(missing));

    // identical end states give a point mass
    let mut frozen = ens.clone();
    frozen.end_states.iter_mut().for_each(|s| *s = State::new(vec![2, 3]));
    let c = empirical_conditional(&frozen, 5).unwrap();
    assert_eq!(c.pmf.len(), 1);
    assert_eq!(c.pmf[&vec![2, 3]], 1.0);
}

#[test]
fn ensemble_end_states_follow_the_stationary_law() {
    let net = small();
    let ms = MixtureStationary::for_network(&net).unwrap();
    let ens = ensemble_sample(&net, &default_initial_state(&net), 30.0, 40_000, 8, SimOptions::default()).unwrap();
    let emp = normalize(&autocat_core::stats::histogram(ens.end_states.iter().map(|s| s.counts().to_vec())));
    let exact = truncated_stationary_solve(&net, 30).unwrap().to_map();
    let tv = tv_distance(&emp, &exact);
    assert!(tv < 0.03, "tv {tv}");
    let closed: BTreeMap<Vec<u64>, f64> = exact.keys().map(|a| (a.clone(), ms.ln_pmf(a).unwrap().exp())).collect();
    assert!(tv_distance(&closed, &exact) < 1e-9);
}

/// Time averages along one path agree with the ensemble of end states.
#[test]
fn time_average_matches_ensemble() {
    let net = small();
    let x0 = default_initial_state(&net);
    let traj = simulate_trajectory(&net, &x0, 40_000.0, 21, SimOptions::default()).unwrap();
    let mut occ: BTreeMap<Vec<u64>, f64> = BTreeMap::new();
    for (s, e, x) in traj.segments() {
        *occ.entry(x.to_vec()).or_insert(0.0) += e - s;
    }
    let total: f64 = occ.values().sum();
    occ.values_mut().for_each(|v| *v /= total);
    let ens = ensemble_sample(&net, &x0, 30.0, 20_000, 22, SimOptions::default()).unwrap();
    let emp = normalize(&autocat_core::stats::histogram(ens.end_states.iter().map(|s| s.counts().to_vec())));
    let tv = tv_distance(&occ, &emp);
    assert!(tv <= 0.03, "tv {tv}");
}

#[test]
fn birth_death_occupancy_is_poisson() {
    let net = create_network(1, Topology::FullSymmetric, 0.0, 2.0, 1.0).unwrap();
    let traj = simulate_trajectory(&net, &State::new(vec![2]), 100_000.0, 5, SimOptions::default()).unwrap();
    let occ = lumped_projection(&traj).occupancy(10.0);
    let poisson: BTreeMap<u64, f64> = (0..40).map(|n| (n, poisson_pmf(2.0, n))).collect();
    let tv = tv_distance(&occ, &poisson);
    assert!(tv < 0.02, "tv {tv}");
}

#[test]
fn switching_in_the_corner_regime() {
    let stats = dit_statistics(
        &simulate_trajectory(&fig1(), &State::new(vec![20, 20]), 5000.0, 1, SimOptions::default()).unwrap(),
        0.9,
        DEFAULT_DIT_FLOOR,
    )
    .unwrap();
    assert!(stats.n_switches >= 1, "{stats:?}");
    assert!(stats.dominant_fraction() > 0.5, "{}", stats.dominant_fraction());
    let dwell: f64 = stats.dominant_species_dwell.iter().sum::<f64>() + stats.none_dwell;
    assert!(dwell <= stats.end_time * (1.0 + 1e-12));
    assert_eq!(stats.n_switches, stats.dominant_sequence().len() - 1);
}

#[test]
fn no_switching_in_the_deterministic_regime() {
    let net = apply_volume_scaling(&PrimedParameters::tk_preset(0.01), 2000.0, 2, Topology::FullSymmetric).unwrap();
    let x0 = default_initial_state(&net);
    let quiet = (0..100u64)
        .filter(|&seed| {
            let t = simulate_trajectory(&net, &x0, 50.0, seed, SimOptions::default()).unwrap();
            dit_statistics(&t, 0.9, DEFAULT_DIT_FLOOR).unwrap().n_switches == 0
        })
        .count();
    assert!(quiet >= 99, "{quiet}/100 without switches");
}

#[test]
fn frozen_corner_has_one_pattern() {
    let t = simulate_trajectory(&fig1(), &State::new(vec![30, 0]), 1e-9, 0, SimOptions::default()).unwrap();
    let stats = dit_statistics(&t, 0.9, DEFAULT_DIT_FLOOR).unwrap();
    assert_eq!(stats.pattern_sequence, vec![(Some(0), 0.0)]);
    assert_eq!(stats.n_switches, 0);
    assert!(dit_statistics(&t, 1.0, 5).is_err());
}

#[test]
fn moment_check_detects_a_wrong_outflow() {
    let volume = 20.0;
    let good = apply_volume_scaling(&PrimedParameters::tk_preset(0.01), volume, 2, Topology::FullSymmetric).unwrap();
    let ms = MixtureStationary::for_network(&good).unwrap();
    let x0 = default_initial_state(&good);

    let ens = ensemble_sample(&good, &x0, 500.0, 4000, 31, SimOptions::default()).unwrap();
    let rep = moment_zscore_report(&ens, &ms, volume).unwrap();
    assert!(rep.passed, "{}", rep.to_json());

    let primed = PrimedParameters { delta: 0.02.into(), ..PrimedParameters::tk_preset(0.01) };
    let wrong = apply_volume_scaling(&primed, volume, 2, Topology::FullSymmetric).unwrap();
    let ens = ensemble_sample(&wrong, &x0, 500.0, 4000, 31, SimOptions::default()).unwrap();
    let rep = moment_zscore_report(&ens, &ms, volume).unwrap();
    assert!(!rep.passed && rep.max_rel_residual > 3.0);

    let tiny = ensemble_sample(&good, &x0, 1.0, 10, 1, SimOptions::default()).unwrap();
    assert!(matches!(moment_zscore_report(&tiny, &ms, volume), Err(Error::UndersizedEnsemble { got: 10, .. })));
}
