use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use ssrkit::decompose::{decompose, project_measurements, recompose_state};
use ssrkit::generate::{self, Family};
use ssrkit::linalg::{self, rank};
use ssrkit::observability::{
    check_gm1_equivalence, eig_report_with, sparse_observability_report, subsystem_observers,
};
use ssrkit::reductions::{cs_brute_force, cs_to_ssr};
use ssrkit::search::{binomial, complement};
use ssrkit::simulate::{measure, random_attack};
use ssrkit::solvers::{brute_force_ssr, SolveOptions};
use ssrkit::{LtiSystem, Mat, SearchConfig, Tolerances, Vector};

fn tol() -> Tolerances {
    Tolerances::default()
}

fn cfg() -> SearchConfig {
    SearchConfig::default()
}

fn system(seed: u64) -> LtiSystem {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    generate::random_system(&Family::default(), &mut rng).unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn projections_split_and_rebuild_states(seed in any::<u64>()) {
        let sys = system(seed);
        let b = decompose(&sys, &tol(), &cfg()).unwrap();
        let n = sys.n();
        let sum = b.direct_sum.projectors.iter().fold(Mat::zeros(n, n), |acc, p| acc + p);
        prop_assert!((sum - Mat::identity(n, n)).amax() < 1e-9);

        let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 1);
        let x = generate::random_state(n, &mut rng);
        let parts: Vec<Option<Vector>> = (0..b.len()).map(|j| Some(b.direct_sum.coordinates(j, &x))).collect();
        let back = recompose_state(&parts, &b.direct_sum).unwrap();
        prop_assert!((back - &x).amax() < 1e-9);
    }

    #[test]
    fn sensor_kernels_split_along_eigenspaces(seed in any::<u64>()) {
        let sys = system(seed);
        let b = decompose(&sys, &tol(), &cfg()).unwrap();
        for (o, split) in b.observability.iter().zip(&b.sensors) {
            let scale = linalg::spectral_norm(&o.o);
            let nullity = sys.n() - linalg::rank_scaled(&o.o, 1e-10, scale);
            let by_block: usize = split
                .blocks
                .iter()
                .map(|blk| blk.restricted.ncols() - linalg::rank_scaled(&blk.restricted, 1e-10, scale))
                .sum();
            prop_assert_eq!(nullity, by_block);
        }
    }

    #[test]
    fn measurements_split_exactly(seed in any::<u64>()) {
        let sys = system(seed);
        let b = decompose(&sys, &tol(), &cfg()).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 2);
        let x = generate::random_state(sys.n(), &mut rng);
        let meas = ssrkit::MeasurementBundle::exact(&b.observability, &x);
        let proj = project_measurements(&b, &meas).unwrap();
        for (i, split) in b.sensors.iter().enumerate() {
            prop_assert!(proj.residual_norm(i + 1) < 1e-9);
            for (j, blk) in split.blocks.iter().enumerate() {
                let expect = &blk.restricted * b.direct_sum.coordinates(j, &x);
                prop_assert!((&proj.parts[i][j] - expect).amax() < 1e-8);
            }
        }
    }

    #[test]
    fn eigenvalue_index_bounds_sparse_index(seed in any::<u64>()) {
        let sys = system(seed);
        let b = decompose(&sys, &tol(), &cfg()).unwrap();
        let eig = eig_report_with(&sys, &b.eigen, &tol());
        let sparse = sparse_observability_report(&sys, &tol(), &cfg());
        prop_assert!(sparse.exhaustive);
        prop_assert!(sparse.index >= eig.index);
        // eigenvalue observability is decided per subsystem
        for j in 0..b.len() {
            prop_assert_eq!(&subsystem_observers(&b, j, &tol()), &eig.observers[j]);
        }
    }

    #[test]
    fn sparse_index_is_monotone_in_sensors(seed in any::<u64>()) {
        let sys = system(seed);
        let full = sparse_observability_report(&sys, &tol(), &cfg());
        let fewer = sys.without_sensors(&[sys.num_sensors()]);
        if let Ok(fewer) = fewer {
            let r = sparse_observability_report(&fewer, &tol(), &cfg());
            prop_assert!(r.index <= full.index);
            prop_assert!(r.index >= full.index - 1);
        }
    }
}

#[test]
fn gamma_one_systems_have_equal_indices() {
    let mut rng = ChaCha8Rng::seed_from_u64(17);
    for _ in 0..40 {
        let n = rng.gen_range(1..=4);
        let roots = generate::spread_values(n, 1.5, 0.3, &mut rng);
        let sys = generate::companion_system(&roots, rng.gen_range(3..=7), 0.3, &mut rng).unwrap();
        let r = check_gm1_equivalence(&sys, &tol(), &cfg()).unwrap();
        assert!(r.all_gamma_one && r.equal, "{r:?}");
    }
}

/// Every consistent explanation the brute-force search returns is minimal:
/// no smaller set of sensors can be discarded.
#[test]
fn brute_force_is_sound_and_minimal() {
    let mut rng = ChaCha8Rng::seed_from_u64(23);
    let opts = SolveOptions::default();
    let mut checked = 0;
    while checked < 40 {
        let sys = generate::random_system(&Family::default(), &mut rng).unwrap();
        let b = decompose(&sys, &tol(), &cfg()).unwrap();
        let x0 = generate::random_state(sys.n(), &mut rng);
        let k = rng.gen_range(0..=2.min(sys.num_sensors()));
        let attack = random_attack(&b.observability, k, 4.0, rng.gen()).unwrap();
        let meas = measure(&b.observability, &x0, &attack, 0.0, 0).unwrap();
        let Ok(sol) = brute_force_ssr(&b, &meas, 2, &opts) else { continue };
        let threshold = tol().residual_threshold(meas.scale());
        for (o, y) in b.observability.iter().zip(&meas.y) {
            if !sol.attack_set.contains(&o.sensor_id) {
                assert!((&o.o * &sol.x - y).norm() <= threshold);
            }
        }
        assert!(sol.attack_set.len() <= attack.attacked.len());
        // independent check of minimality by least squares on every smaller removal set
        let n_s = sys.num_sensors();
        for size in 0..sol.attack_set.len() {
            for rank_ix in 0..binomial(n_s, size) {
                let removed = ssrkit::search::unrank(n_s, size, rank_ix);
                let kept = complement(&removed, n_s);
                let stack = linalg::vstack(kept.iter().map(|&i| &b.observability[i].o), sys.n());
                let y = linalg::vcat(kept.iter().map(|&i| &meas.y[i]));
                let x = linalg::lstsq(&stack, &y, 1e-10);
                let fits = kept
                    .iter()
                    .all(|&i| (&b.observability[i].o * &x - &meas.y[i]).norm() <= threshold);
                assert!(!fits, "smaller explanation {removed:?} exists");
            }
        }
        checked += 1;
    }
}

#[test]
fn compressed_sensing_back_translation() {
    let mut rng = ChaCha8Rng::seed_from_u64(29);
    for _ in 0..60 {
        let cs = generate::random_cs(3, 7, &mut rng);
        let red = cs_to_ssr(&cs, &tol()).unwrap();
        let b = decompose(&red.system, &tol(), &cfg()).unwrap();
        let sol = brute_force_ssr(&b, &red.measurements, cs.n(), &SolveOptions::default()).unwrap();
        let e = red.error_vector(&sol.x);
        assert!((&cs.f * &e - &cs.b).amax() < 1e-8);
        let support: Vec<usize> = (0..e.len()).filter(|&i| e[i].abs() > 1e-8).map(|i| i + 1).collect();
        assert!(support.iter().all(|i| sol.attack_set.contains(i)));
        let oracle = cs_brute_force(&cs, cs.n(), &tol(), &cfg()).unwrap();
        assert_eq!(oracle.support.len(), sol.attack_set.len());
        // the kernel basis spans ker F
        assert_eq!(rank(&red.kernel, 1e-10), cs.n() - cs.f.nrows());
        assert!((&cs.f * &red.kernel).amax() < 1e-10);
    }
}
