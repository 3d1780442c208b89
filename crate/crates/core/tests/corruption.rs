use proptest::prelude::*;
use semiadv_core::adversary::{perturb, AdversaryContext, Strategy};
use semiadv_core::matrix::{
    frobenius_norm, full_eigendecomposition, operator_norm, DEFAULT_OPNORM_MAX_ITER,
};
use semiadv_core::model::{
    apply_noise, clip_to_p, make_partition, psd_zero_error, zero_error_matrix,
};
use semiadv_core::rng::{rng_from_seed, substream};
use semiadv_core::{ClusterPartition, PartitionMode, Phase};

fn partition(n: usize, k: usize, seed: u64) -> ClusterPartition {
    make_partition(n, k, PartitionMode::Equal, &mut rng_from_seed(seed)).unwrap()
}

fn strategy(index: usize, n: usize, count: usize) -> Strategy {
    match index {
        0 => Strategy::Null,
        1 => Strategy::PreRandomFlip { pair_count: count },
        2 => Strategy::PostRandomFlip { pair_count: count },
        3 => Strategy::PreRowRandomizer {
            m_vertices: count.min(n),
        },
        4 => Strategy::PostInfoEraser {
            m_vertices: count.min(n),
        },
        _ => Strategy::PostSpectralPoison,
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(120))]

    #[test]
    fn ledger_accounts_for_every_change(
        half in 3usize..=12,
        index in 0usize..6,
        count in 0usize..6,
        eps in 0.05f64..0.2,
        seed in any::<u64>(),
    ) {
        let n = 2 * half;
        let p = partition(n, 2, seed);
        let m = zero_error_matrix(&p);
        let s = strategy(index, n, count);
        let noisy = apply_noise(&m, eps, &mut substream(seed, &[1])).unwrap();
        let post = s.phase() != Some(Phase::Pre);
        let input = if post { &noisy } else { &m };
        let ctx = AdversaryContext {
            ground_truth: &p,
            original: &m,
            noisy: post.then_some(&noisy),
            epsilon: eps,
        };
        let (out, ledger) = perturb(&s, input, n * n, &ctx, &mut substream(seed, &[2])).unwrap();

        prop_assert_eq!(ledger.entries_used, out.hamming_distance(input));
        prop_assert_eq!(ledger.entries_used, ledger.edits.len());
        prop_assert!(out.is_sign_matrix());
        for i in 0..n {
            prop_assert_eq!(out.get(i, i), input.get(i, i));
            for j in 0..n {
                prop_assert_eq!(out.get(i, j), out.get(j, i));
            }
        }
        let diff = out.sub(input);
        let fro = frobenius_norm(&diff);
        // Every changed entry moves by 2.
        prop_assert!((fro * fro - 4.0 * ledger.entries_used as f64).abs() < 1e-9);
        if ledger.entries_used > 0 {
            let op = operator_norm(&diff, 1e-9, DEFAULT_OPNORM_MAX_ITER).unwrap();
            prop_assert!(op <= fro + 1e-9);
            prop_assert!(op <= 2.0 * (ledger.entry_budget as f64).sqrt() + 1e-9);
        }
        prop_assert_eq!(&ledger.apply(input), &out);
        prop_assert_eq!(&ledger.revert(&out), input);
        for e in &ledger.edits {
            prop_assert_eq!(e.old, input.get(e.i, e.j));
            prop_assert_eq!(e.new, out.get(e.i, e.j));
        }
    }

    #[test]
    fn budget_is_enforced(half in 3usize..=10, count in 1usize..20, seed in any::<u64>()) {
        let n = 2 * half;
        let p = partition(n, 2, seed);
        let m = zero_error_matrix(&p);
        let ctx = AdversaryContext { ground_truth: &p, original: &m, noisy: None, epsilon: 0.3 };
        let s = Strategy::PreRandomFlip { pair_count: count.min(n * (n - 1) / 2) };
        let needed = 2 * count.min(n * (n - 1) / 2);
        let r = perturb(&s, &m, needed - 1, &ctx, &mut rng_from_seed(seed));
        let is_budget_error = matches!(r, Err(semiadv_core::Error::BudgetExceeded { .. }));
        prop_assert!(is_budget_error);
        prop_assert!(perturb(&s, &m, needed, &ctx, &mut rng_from_seed(seed)).is_ok());
    }

    #[test]
    fn poisoned_set_is_an_exact_eigenvector(half in 10usize..=40, eps in 0.05f64..0.2, seed in any::<u64>()) {
        let n = 2 * half;
        prop_assume!(4.0 * eps * n as f64 <= n as f64 - 2.0);
        let p = partition(n, 2, seed);
        let m = zero_error_matrix(&p);
        let noisy = apply_noise(&m, eps, &mut substream(seed, &[1])).unwrap();
        let ctx = AdversaryContext { ground_truth: &p, original: &m, noisy: Some(&noisy), epsilon: eps };
        let (out, ledger) =
            perturb(&Strategy::PostSpectralPoison, &noisy, n * n, &ctx, &mut substream(seed, &[2])).unwrap();
        let info = ledger.poison().unwrap();
        let size = info.set.len();
        prop_assert_eq!(size, 2 * (2.0 * eps * n as f64).ceil() as usize);
        prop_assert!(info.minor_edits <= size * (size - 1));
        let mv = out.mat_vec(&info.vector);
        for (a, b) in mv.iter().zip(&info.vector) {
            prop_assert!((a - size as f64 * b).abs() <= 1e-12);
        }
    }

    #[test]
    fn clipped_zero_error_is_the_psd_matrix(n in 2usize..=24, k in 2usize..=4, seed in any::<u64>()) {
        prop_assume!(2 * k <= n);
        let mode = PartitionMode::NearEqual { slack: 1 };
        let p = make_partition(n, k, mode, &mut rng_from_seed(seed)).unwrap();
        let psd = psd_zero_error(&p);
        prop_assert_eq!(&clip_to_p(&zero_error_matrix(&p), k), &psd);
        let min = full_eigendecomposition(&psd, 1e-9).unwrap().values().last().copied().unwrap();
        prop_assert!(min >= -1e-8);
    }
}

#[test]
fn noise_is_a_pure_function_of_the_seed() {
    let p = partition(40, 4, 3);
    let m = zero_error_matrix(&p);
    let a = apply_noise(&m, 0.1, &mut rng_from_seed(77)).unwrap();
    let b = apply_noise(&m, 0.1, &mut rng_from_seed(77)).unwrap();
    let c = apply_noise(&m, 0.1, &mut rng_from_seed(78)).unwrap();
    assert_eq!(a, b);
    assert_ne!(a, c);
    assert_eq!(a.hamming_distance(&m) / 2, recount_flips());
}

/// One draw per pair `i < j` in row-major order, flip below the threshold.
fn recount_flips() -> usize {
    let mut rng = rng_from_seed(77);
    let thr = semiadv_core::rng::probability_threshold(0.5 - 0.1);
    let mut count = 0;
    for i in 0..40 {
        for _ in (i + 1)..40 {
            count += usize::from(semiadv_core::rng::bernoulli(&mut rng, thr));
        }
    }
    count
}

#[test]
fn wrong_phase_is_rejected() {
    let p = partition(10, 2, 0);
    let m = zero_error_matrix(&p);
    let ctx = AdversaryContext {
        ground_truth: &p,
        original: &m,
        noisy: None,
        epsilon: 0.2,
    };
    let r = perturb(
        &Strategy::PostRandomFlip { pair_count: 1 },
        &m,
        100,
        &ctx,
        &mut rng_from_seed(0),
    );
    assert_eq!(r.unwrap_err().code(), "wrong_phase");
}
