//! Fixtures shared by the benchmarks.

use hfhr::integrators::NoiseStreams;
use hfhr::metrics::SampleCloud;
use hfhr::Mat;

/// `n × d` cloud of standard normal points from a fixed stream.
pub fn normal_cloud(n: usize, d: usize, seed: u64) -> SampleCloud {
    let mut streams = NoiseStreams::new(seed, 0);
    let mut data = vec![0.0; n * d];
    streams.fill_position(&mut data);
    SampleCloud::new(Mat::from_vec(n, d, data).expect("shape")).expect("finite")
}

/// Symmetric positive definite `d × d` matrix `I + GGᵀ/d`.
pub fn spd_matrix(d: usize, seed: u64) -> Mat {
    let g = normal_cloud(d, d, seed);
    let mut m = Mat::identity(d);
    for i in 0..d {
        for j in 0..d {
            let s: f64 = g.point(i).iter().zip(g.point(j)).map(|(a, b)| a * b).sum();
            m[(i, j)] += s / d as f64;
        }
    }
    m
}
