//! The decreasing weight sequence of the Poisson representation.

use crate::rng::StreamRng;
use crate::scalar::SampleScalar;

/// Lazily extensible stream `Z_1 > Z_2 > …` with `Z_i = c / Γ_i`, where
/// `Γ_i` are partial sums of iid unit exponentials and `c` is the total
/// intensity mass (1 for Brown–Resnick, the location-box volume for moving
/// maxima).
///
/// These are the points of a Poisson process on `(0, ∞)` with intensity
/// `c · z^{-2} dz`, enumerated in decreasing order.
pub struct FrechetPoints<'a, F> {
    gamma: F,
    intensity: F,
    emitted: usize,
    count_limit: usize,
    rng: &'a mut StreamRng,
}

impl<'a, F: SampleScalar> FrechetPoints<'a, F> {
    /// Unit-intensity stream (`Z_i = 1/Γ_i`) capped at `count_limit` atoms.
    pub fn new(rng: &'a mut StreamRng, count_limit: usize) -> Self {
        Self::with_intensity(rng, F::one(), count_limit)
    }

    /// Stream with total intensity mass `intensity` (`Z_i = intensity/Γ_i`).
    pub fn with_intensity(rng: &'a mut StreamRng, intensity: F, count_limit: usize) -> Self {
        FrechetPoints {
            gamma: F::zero(),
            intensity,
            emitted: 0,
            count_limit,
            rng,
        }
    }

    /// Number of weights produced so far.
    pub fn emitted(&self) -> usize {
        self.emitted
    }
}

impl<F: SampleScalar> Iterator for FrechetPoints<'_, F> {
    type Item = F;

    fn next(&mut self) -> Option<F> {
        if self.emitted >= self.count_limit {
            return None;
        }
        // Exp(1) draws are almost surely positive; reject a degenerate 0 so
        // the partial sums are strictly increasing.
        let mut e = F::sample_exp1(self.rng);
        while !(e > F::zero()) {
            e = F::sample_exp1(self.rng);
        }
        self.gamma += e;
        self.emitted += 1;
        Some(self.intensity / self.gamma)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::{stream_rng, StreamDomain};
    use crate::stats::ks_statistic;

    #[test]
    fn weights_are_strictly_decreasing_and_respect_the_limit() {
        let mut rng = stream_rng(11, StreamDomain::Simulation, 0);
        let points: Vec<f64> = FrechetPoints::new(&mut rng, 500).collect();
        assert_eq!(points.len(), 500);
        for pair in points.windows(2) {
            assert!(pair[0] > pair[1]);
        }
    }

    #[test]
    fn first_weight_is_unit_frechet() {
        // Z_1 = 1/E_1 has CDF exp(-1/y); KS over 10^5 draws below 0.01.
        let n = 100_000;
        let mut draws = Vec::with_capacity(n);
        for i in 0..n {
            let mut rng = stream_rng(3, StreamDomain::Simulation, i as u64);
            let z: f64 = FrechetPoints::new(&mut rng, 1).next().unwrap();
            draws.push(z);
        }
        let d = ks_statistic(&draws, |y: f64| (-1.0 / y).exp()).unwrap();
        assert!(d < 0.01, "KS distance {d}");
    }

    #[test]
    fn intensity_scales_the_weights() {
        let mut a = stream_rng(5, StreamDomain::Simulation, 1);
        let za: Vec<f64> = FrechetPoints::new(&mut a, 10).collect();
        let mut b = stream_rng(5, StreamDomain::Simulation, 1);
        let zb: Vec<f64> = FrechetPoints::with_intensity(&mut b, 4.0, 10).collect();
        for (x, y) in za.iter().zip(&zb) {
            assert!((y / x - 4.0).abs() < 1e-12);
        }
    }
}
