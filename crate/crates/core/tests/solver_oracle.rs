use graffmatch_core::clique::density;
use graffmatch_core::{brute_force_densest, solve_densest, AffinityMatrix, SolverParams};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Symmetric matrix whose off-diagonal entries are zero with probability
/// `gate`, otherwise uniform in (0, 1].
fn random_gated(rng: &mut ChaCha8Rng, n: usize, gate: f64) -> AffinityMatrix {
    let mut upper = vec![0.0; n * n];
    for i in 0..n {
        for j in i + 1..n {
            if !rng.random_bool(gate) {
                upper[i * n + j] = 1.0 - rng.random::<f64>();
            }
        }
    }
    AffinityMatrix::from_upper(n, |i, j| upper[i * n + j]).unwrap()
}

fn planted(rng: &mut ChaCha8Rng, n: usize, block: &[usize]) -> AffinityMatrix {
    let mut upper = vec![0.0; n * n];
    for i in 0..n {
        for j in i + 1..n {
            upper[i * n + j] = if block.contains(&i) && block.contains(&j) {
                1.0
            } else if rng.random_bool(0.5) {
                0.0
            } else {
                rng.random_range(0.0..0.3)
            };
        }
    }
    AffinityMatrix::from_upper(n, |i, j| upper[i * n + j]).unwrap()
}

#[test]
fn random_gated_matrices_near_optimal() {
    let params = SolverParams::default();
    let mut good = 0;
    let trials = 200;
    for seed in 0..trials {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let n = rng.random_range(5..=15);
        let gate = rng.random_range(0.2..0.8);
        let m = random_gated(&mut rng, n, gate);
        let exact = brute_force_densest(&m).unwrap();
        let approx = solve_densest(&m, &params).unwrap();
        assert!(approx.objective <= exact.objective + 1e-9);
        if approx.objective >= 0.95 * exact.objective {
            good += 1;
        }
    }
    assert!(good * 100 >= 95 * trials, "{good}/{trials}");
}

#[test]
fn planted_cliques_recovered_exactly() {
    let params = SolverParams::default();
    for seed in 0..100u64 {
        let mut rng = ChaCha8Rng::seed_from_u64(1000 + seed);
        let n = rng.random_range(15..=40);
        let k = rng.random_range(5..=8);
        let mut block: Vec<usize> = rand::seq::index::sample(&mut rng, n, k).into_vec();
        block.sort_unstable();
        let m = planted(&mut rng, n, &block);
        let s = solve_densest(&m, &params).unwrap();
        assert_eq!(s.indices, block, "seed {seed}");
    }
}

#[test]
fn selection_is_always_feasible() {
    let params = SolverParams::default();
    for seed in 0..100u64 {
        let mut rng = ChaCha8Rng::seed_from_u64(5000 + seed);
        let n = rng.random_range(1..60);
        let m = random_gated(&mut rng, n, 0.7);
        let s = solve_densest(&m, &params).unwrap();
        assert!(!s.indices.is_empty());
        for &a in &s.indices {
            for &b in &s.indices {
                assert!(a == b || m.get(a, b) > 0.0);
            }
        }
        assert!((density(&m, &s.indices) - s.objective).abs() < 1e-12);
    }
}

#[test]
fn isolated_vertex_does_not_change_selection() {
    let params = SolverParams::default();
    for seed in 0..50u64 {
        let mut rng = ChaCha8Rng::seed_from_u64(9000 + seed);
        let n = rng.random_range(4..30);
        let m = random_gated(&mut rng, n, 0.5);
        let grown = AffinityMatrix::from_upper(n + 1, |i, j| if j == n { 0.0 } else { m.get(i, j) }).unwrap();
        let a = solve_densest(&m, &params).unwrap();
        let b = solve_densest(&grown, &params).unwrap();
        if a.objective > 1.0 {
            assert_eq!(a.indices, b.indices, "seed {seed}");
        }
    }
}

fn tie_free_instance() -> impl Strategy<Value = (u64, usize)> {
    (any::<u64>(), 3usize..=12)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn brute_force_set_is_scale_invariant((seed, n) in tie_free_instance(), gamma in 0.05f64..=1.0) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let m = random_gated(&mut rng, n, 0.4);
        let exact = brute_force_densest(&m).unwrap();
        prop_assume!(exact.objective > 1.0);
        let scaled = AffinityMatrix::from_upper(n, |i, j| gamma * m.get(i, j)).unwrap();
        prop_assert_eq!(brute_force_densest(&scaled).unwrap().indices, exact.indices);
    }

    #[test]
    fn solver_is_permutation_equivariant((seed, n) in tie_free_instance()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let m = random_gated(&mut rng, n, 0.4);
        let perm: Vec<usize> = rand::seq::index::sample(&mut rng, n, n).into_vec();
        let pm = m.permuted(&perm).unwrap();
        let a = solve_densest(&m, &SolverParams::default()).unwrap();
        let b = solve_densest(&pm, &SolverParams::default()).unwrap();
        prop_assert!((a.objective - b.objective).abs() < 1e-9);
        let bf = brute_force_densest(&m).unwrap();
        let bfp = brute_force_densest(&pm).unwrap();
        prop_assert!((bf.objective - bfp.objective).abs() < 1e-9);
        // Row i of the permuted matrix is row perm[i] of the original.
        let mut mapped: Vec<usize> = bfp.indices.iter().map(|&i| perm[i]).collect();
        mapped.sort_unstable();
        prop_assert_eq!(mapped, bf.indices);
    }

    #[test]
    fn brute_force_dominates_every_feasible_subset((seed, n) in tie_free_instance()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let m = random_gated(&mut rng, n, 0.5);
        let best = brute_force_densest(&m).unwrap().objective;
        for mask in 1u32..(1 << n) {
            let set: Vec<usize> = (0..n).filter(|&i| mask & (1 << i) != 0).collect();
            let feasible = set.iter().all(|&a| set.iter().all(|&b| a == b || m.get(a, b) > 0.0));
            if feasible {
                prop_assert!(density(&m, &set) <= best + 1e-12);
            }
        }
    }
}
