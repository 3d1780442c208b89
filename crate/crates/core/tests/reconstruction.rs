use proptest::prelude::*;
use rand::seq::SliceRandom;
use rand::Rng;
use semiadv_core::matrix::full_eigendecomposition;
use semiadv_core::metrics::{misclassified_count, overlap_matrix};
use semiadv_core::model::{apply_noise, make_partition, psd_zero_error, zero_error_matrix};
use semiadv_core::recursive::{
    default_f0, get_threshold, sdp_reconstruct, SdpReconstructOptions, SdpVariant,
};
use semiadv_core::rng::{rng_from_seed, substream};
use semiadv_core::sdp::{solve_sdp_bilinear, solve_sdp_norm, SdpOptions};
use semiadv_core::spectral::{spectral_cluster, SpectralConfig};
use semiadv_core::{ClusterPartition, PartitionMode, RealMatrix};

fn random_partition(n: usize, k: usize, rng: &mut impl Rng) -> ClusterPartition {
    let mut labels: Vec<usize> = (0..n)
        .map(|i| if i < k { i } else { rng.gen_range(0..k) })
        .collect();
    labels.shuffle(rng);
    ClusterPartition::new(k, labels).unwrap()
}

fn permute_matrix(m: &RealMatrix, perm: &[usize]) -> RealMatrix {
    // Item `i` of the result is item `perm[i]` of the input.
    RealMatrix::from_upper_fn(m.n(), |i, j| m.get(perm[i], perm[j]))
}

#[test]
fn sdp_solutions_are_feasible() {
    for seed in 0..8 {
        let mut rng = rng_from_seed(seed);
        let n = rng.gen_range(3..=15);
        let q = RealMatrix::from_upper_fn(n, |_, _| rng.gen::<f64>() * 2.0 - 1.0);
        let sol = solve_sdp_norm(&q, &SdpOptions::default().with_seed(seed)).unwrap();
        for i in 0..n {
            assert!((sol.x.get(i, i) - 1.0).abs() <= 1e-6);
        }
        assert!((sol.x.trace() - n as f64).abs() <= 1e-4);
        let spec = full_eigendecomposition(&sol.x, 1e-8).unwrap();
        assert!(spec.values().last().unwrap() >= &(-1e-6 * n as f64));
        assert!((sol.x.frobenius_inner(&q) - sol.value).abs() <= 1e-6 * sol.value.abs().max(1.0));
    }
}

#[test]
fn sdp_value_dominates_the_planted_witness() {
    let (n, k, eps) = (12, 3, 0.3);
    let p =
        psd_zero_error(&make_partition(n, k, PartitionMode::Equal, &mut rng_from_seed(1)).unwrap());
    let q = p.scale(2.0 * eps);
    let value = solve_sdp_norm(&q, &SdpOptions::default()).unwrap().value;
    let witness = 2.0 * eps * (n * n) as f64 / (k - 1) as f64;
    assert!(value >= 0.99 * witness, "{value} < {witness}");
}

#[test]
fn symmetric_restriction_is_optimal_for_psd_objectives() {
    for seed in 0..10 {
        let mut rng = rng_from_seed(100 + seed);
        let n = rng.gen_range(2..=8);
        let rank = rng.gen_range(1..=n);
        let mut q = RealMatrix::zeros(n);
        for _ in 0..rank {
            let v: Vec<f64> = (0..n).map(|_| rng.gen::<f64>() * 2.0 - 1.0).collect();
            q = q.add(&RealMatrix::outer(&v, 1.0));
        }
        let opts = SdpOptions::default().with_seed(seed);
        let sym = solve_sdp_norm(&q, &opts).unwrap().value;
        let free = solve_sdp_bilinear(&q, &opts).unwrap();
        assert!(
            (sym - free).abs() <= 0.01 * free.abs(),
            "n={n}: {sym} vs {free}"
        );
    }
}

#[test]
fn threshold_is_uniform_between_order_statistics() {
    let u: Vec<f64> = (1..=10).map(f64::from).collect();
    let mut rng = rng_from_seed(2024);
    let draws = 5000;
    let mut t: Vec<f64> = (0..draws)
        .map(|_| get_threshold(&u, 1e-4, &mut rng).unwrap())
        .collect();
    t.sort_by(f64::total_cmp);
    assert!(t[0] >= 1.0 && t[draws - 1] <= 9.0);
    let ks = t
        .iter()
        .enumerate()
        .map(|(i, &x)| {
            let cdf = (x - 1.0) / 8.0;
            (cdf - i as f64 / draws as f64)
                .abs()
                .max(((i + 1) as f64 / draws as f64 - cdf).abs())
        })
        .fold(0.0, f64::max);
    let critical = 1.628 / (draws as f64).sqrt();
    assert!(ks < critical, "KS statistic {ks} >= {critical}");
}

#[test]
fn recursion_frames_keep_their_invariants() {
    let (n, k, eps) = (24usize, 4usize, 0.45);
    for seed in 0..4 {
        let truth = make_partition(n, k, PartitionMode::Equal, &mut substream(seed, &[0])).unwrap();
        let noisy =
            apply_noise(&zero_error_matrix(&truth), eps, &mut substream(seed, &[1])).unwrap();
        let f0 = default_f0(n, 0);
        let out = sdp_reconstruct(
            &noisy,
            k,
            eps,
            f0,
            SdpVariant::Eps,
            &SdpReconstructOptions::default(),
            &mut substream(seed, &[2]),
        )
        .unwrap();
        assert_eq!(out.partition.k(), k);
        assert!(out.partition.sizes().iter().all(|&s| s == n / k));
        assert!(out.trace.len() < k);
        assert_eq!(out.trace[0].f, f0);
        for e in &out.trace {
            assert!(e.depth < k - 1);
            assert_eq!(e.set_size, e.k_prime * (n / k));
            assert!((e.gamma - (k - 1) as f64 / (e.k_prime - 1) as f64).abs() < 1e-12);
            let expected_f = k as f64 * e.f
                + 4.0 * k as f64 * e.delta.cbrt() * eps * (e.set_size * e.set_size) as f64;
            assert!((e.child_f - expected_f).abs() <= 1e-9 * expected_f);
            let expected_delta = 4.0 * k as f64 * (e.f / (eps * (n * n) as f64)).sqrt();
            assert!((e.delta - expected_delta).abs() <= 1e-12 * expected_delta);
        }
    }
}

#[test]
fn spectral_count_is_invariant_under_item_relabelling() {
    // Pivots are drawn by position, so only a clear signal makes the count
    // independent of which items get picked.
    let (n, k, eps) = (90, 3, 0.45);
    for seed in 0..5 {
        let truth = make_partition(n, k, PartitionMode::Equal, &mut substream(seed, &[0])).unwrap();
        let noisy =
            apply_noise(&zero_error_matrix(&truth), eps, &mut substream(seed, &[1])).unwrap();
        let mut perm: Vec<usize> = (0..n).collect();
        perm.shuffle(&mut substream(seed, &[3]));
        let permuted_truth =
            ClusterPartition::new(k, perm.iter().map(|&p| truth.label(p)).collect()).unwrap();
        let cfg = SpectralConfig::default();
        let a = spectral_cluster(&noisy, &cfg, &mut substream(seed, &[2])).unwrap();
        let b = spectral_cluster(
            &permute_matrix(&noisy, &perm),
            &cfg,
            &mut substream(seed, &[2]),
        )
        .unwrap();
        let ca = misclassified_count(&a.partition, &truth)
            .unwrap()
            .misclassified;
        let cb = misclassified_count(&b.partition, &permuted_truth)
            .unwrap()
            .misclassified;
        assert_eq!(ca, cb, "seed {seed}");
        assert_eq!(a.detected_k, b.detected_k);
    }
}

#[test]
fn spectral_output_is_a_partition_and_deterministic() {
    let truth = make_partition(60, 3, PartitionMode::Equal, &mut rng_from_seed(5)).unwrap();
    let noisy = apply_noise(&zero_error_matrix(&truth), 0.3, &mut rng_from_seed(6)).unwrap();
    let cfg = SpectralConfig::default();
    let a = spectral_cluster(&noisy, &cfg, &mut rng_from_seed(7)).unwrap();
    let b = spectral_cluster(&noisy, &cfg, &mut rng_from_seed(7)).unwrap();
    assert_eq!(a, b);
    assert_eq!(a.partition.n(), 60);
    assert!(a.partition.sizes().iter().all(|&s| s > 0));
    assert_eq!(a.partition.sizes().iter().sum::<usize>(), 60);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]

    #[test]
    fn metric_properties(n in 1usize..=30, kt in 1usize..=5, kp in 1usize..=5, seed in any::<u64>()) {
        prop_assume!(kt <= n && kp <= n);
        let mut rng = rng_from_seed(seed);
        let truth = random_partition(n, kt, &mut rng);
        let pred = random_partition(n, kp, &mut rng);
        let r = misclassified_count(&pred, &truth).unwrap();
        prop_assert_eq!(r.correctly_classified + r.misclassified, n);
        let overlap = overlap_matrix(&pred, &truth).unwrap();
        let matched: usize = r.bijection.iter().enumerate().filter_map(|(a, b)| b.map(|b| overlap[a][b])).sum();
        prop_assert_eq!(matched, r.correctly_classified);
        let largest = overlap.iter().flatten().copied().max().unwrap();
        prop_assert!(r.misclassified <= n - largest);

        let mut perm: Vec<usize> = (0..n).collect();
        perm.shuffle(&mut rng);
        let r2 = misclassified_count(&pred.permute_items(&perm).unwrap(), &truth.permute_items(&perm).unwrap()).unwrap();
        prop_assert_eq!(r2.misclassified, r.misclassified);

        let same_k = random_partition(n, kt, &mut rng);
        prop_assert_eq!(
            misclassified_count(&same_k, &truth).unwrap().misclassified,
            misclassified_count(&truth, &same_k).unwrap().misclassified
        );
    }
}
