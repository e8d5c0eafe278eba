// SPDX-License-Identifier: MIT OR Apache-2.0

use ballcpd::ballstat::{segment_scan, Segment};
use ballcpd::metric::{pairwise_distance_matrix, Metric, Observation};
use rand::{Rng, SeedableRng};
use std::time::Instant;

fn main() {
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(1);
    for n in [60usize, 120, 160, 240] {
        let obs: Vec<_> = (0..n)
            .map(|_| Observation::Coords((0..3).map(|_| rng.random_range(-1.0..1.0)).collect()))
            .collect();
        let d = pairwise_distance_matrix(&obs, Metric::Euclidean).unwrap();
        let reps = 50;
        let t = Instant::now();
        for _ in 0..reps {
            std::hint::black_box(segment_scan(&d, Segment::new(0, n).unwrap(), 10, 1).unwrap());
        }
        println!(
            "n={n}: {:.3} ms/scan",
            t.elapsed().as_secs_f64() * 1e3 / reps as f64
        );
    }
}
