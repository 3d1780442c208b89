//! Fixed instances shared by the benchmarks.

use semiadv_core::matrix::RealMatrix;
use semiadv_core::model::{
    apply_noise, make_partition, zero_error_matrix, ClusterPartition, PartitionMode,
};
use semiadv_core::rng::rng_from_seed;

/// Equal-size planted instance with noise, seeded.
pub fn noisy_instance(
    n: usize,
    k: usize,
    epsilon: f64,
    seed: u64,
) -> (ClusterPartition, RealMatrix) {
    let mut rng = rng_from_seed(seed);
    let p = make_partition(n, k, PartitionMode::Equal, &mut rng).expect("valid sizes");
    let m = apply_noise(&zero_error_matrix(&p), epsilon, &mut rng).expect("sign matrix");
    (p, m)
}
