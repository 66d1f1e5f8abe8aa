use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use super::NoisePmf;
use crate::error::{Error, Result};

/// Draws continuous noise from a grid pmf: pick a cell by its mass, then a
/// uniform point inside it. Cells are `[x_i − ν/2, x_i + ν/2)` clipped to
/// `[−r + a, r + a]`.
#[derive(Debug, Clone)]
pub struct NoiseSampler {
    cdf: Vec<f64>,
    lower: Vec<f64>,
    upper: Vec<f64>,
    rng: ChaCha8Rng,
}

impl NoiseSampler {
    pub fn new(noise: &NoisePmf, seed: u64) -> Self {
        let grid = noise.grid;
        let half = 0.5 * grid.step();
        let lo_edge = -grid.half_width + grid.bias;
        let hi_edge = grid.half_width + grid.bias;
        let mut cdf = Vec::with_capacity(noise.len());
        let mut acc = 0.0;
        for &p in &noise.pmf {
            acc += p;
            cdf.push(acc);
        }
        let (lower, upper) = (0..grid.len())
            .map(|i| {
                let x = grid.point(i);
                ((x - half).max(lo_edge), (x + half).min(hi_edge))
            })
            .unzip();
        NoiseSampler {
            cdf,
            lower,
            upper,
            rng: ChaCha8Rng::seed_from_u64(seed),
        }
    }

    fn cell(&mut self) -> usize {
        let total = *self.cdf.last().expect("grid has at least two points");
        let u: f64 = self.rng.random::<f64>() * total;
        let idx = self.cdf.partition_point(|&c| c <= u);
        // rounding at the top end can step past the last cell
        let mut idx = idx.min(self.cdf.len() - 1);
        // never land on a zero-mass cell
        while idx > 0 && self.cdf[idx] == self.cdf[idx - 1] {
            idx -= 1;
        }
        idx
    }

    pub fn sample(&mut self) -> f64 {
        let i = self.cell();
        let u: f64 = self.rng.random();
        self.lower[i] + u * (self.upper[i] - self.lower[i])
    }

    /// A point on the unit sphere in `dim` dimensions scaled by `|sample()|`.
    pub fn sample_radial(&mut self, dim: usize) -> Result<Vec<f64>> {
        if dim < 1 {
            return Err(Error::invalid("dimension must be at least 1"));
        }
        let mut direction: Vec<f64> = loop {
            let v: Vec<f64> = (0..dim).map(|_| self.rng.sample(StandardNormal)).collect();
            let norm = v.iter().map(|y| y * y).sum::<f64>().sqrt();
            if norm > 0.0 {
                break v.into_iter().map(|y| y / norm).collect();
            }
        };
        let radius = self.sample().abs();
        direction.iter_mut().for_each(|y| *y *= radius);
        Ok(direction)
    }
}

pub fn sample_noise(noise: &NoisePmf, seed: u64, count: usize) -> Vec<f64> {
    let mut sampler = NoiseSampler::new(noise, seed);
    (0..count).map(|_| sampler.sample()).collect()
}

pub fn sample_radial(noise: &NoisePmf, dim: usize, seed: u64) -> Result<Vec<f64>> {
    NoiseSampler::new(noise, seed).sample_radial(dim)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::noise::{truncated_gaussian_pmf, GridSpec};

    #[test]
    fn single_cell_samples_stay_in_cell() {
        let g = GridSpec::new(5.0, 5, 0.0).unwrap();
        let mut pmf = vec![0.0; 10];
        pmf[4] = 1.0; // x = 0
        let noise = NoisePmf::new(g, pmf).unwrap();
        for x in sample_noise(&noise, 7, 10_000) {
            assert!((-0.5..0.5).contains(&x), "{x}");
        }
    }

    #[test]
    fn two_cell_frequencies_within_three_standard_errors() {
        let g = GridSpec::new(1.0, 2, 0.0).unwrap(); // {-0.5, 0, 0.5, 1}
        let noise = NoisePmf::new(g, vec![0.0, 0.5, 0.0, 0.5]).unwrap();
        let n = 1_000_000;
        let samples = sample_noise(&noise, 11, n);
        let near_zero = samples.iter().filter(|x| (-0.25..0.25).contains(*x)).count();
        let near_one = samples.iter().filter(|x| (0.75..1.0).contains(*x)).count();
        assert_eq!(near_zero + near_one, n);
        let se = (0.25 / n as f64).sqrt();
        assert!((near_zero as f64 / n as f64 - 0.5).abs() < 3.0 * se);
    }

    #[test]
    fn symmetric_noise_mean_is_the_mirror_center() {
        let g = GridSpec::new(50.0, 3000, 1e-5).unwrap();
        let sigma = 10.0;
        let noise = truncated_gaussian_pmf(&g, sigma).unwrap();
        let samples = sample_noise(&noise, 3, 1_000_000);
        let mean = samples.iter().sum::<f64>() / samples.len() as f64;
        assert!((mean - g.mirror_center()).abs() < 4.0 * sigma / 1000.0);
    }

    #[test]
    fn sampling_is_deterministic() {
        let g = GridSpec::new(5.0, 50, 0.0).unwrap();
        let noise = truncated_gaussian_pmf(&g, 1.0).unwrap();
        assert_eq!(sample_noise(&noise, 5, 100), sample_noise(&noise, 5, 100));
        assert_ne!(sample_noise(&noise, 5, 100), sample_noise(&noise, 6, 100));
    }

    #[test]
    fn radial_norm_is_the_radius() {
        let g = GridSpec::new(5.0, 50, 0.0).unwrap();
        let noise = truncated_gaussian_pmf(&g, 2.0).unwrap();
        let mut a = NoiseSampler::new(&noise, 9);
        let mut b = NoiseSampler::new(&noise, 9);
        for _ in 0..1000 {
            let v = a.sample_radial(4).unwrap();
            // replay the same stream: 4 normals then the radius draw
            for _ in 0..4 {
                let _: f64 = b.rng.sample(StandardNormal);
            }
            let r = b.sample().abs();
            let norm = v.iter().map(|y| y * y).sum::<f64>().sqrt();
            assert!((norm - r).abs() < 1e-12);
        }
    }

    #[test]
    fn radial_one_dimensional_signs_are_balanced() {
        let g = GridSpec::new(5.0, 50, 0.0).unwrap();
        let noise = truncated_gaussian_pmf(&g, 2.0).unwrap();
        let mut s = NoiseSampler::new(&noise, 1);
        let n = 100_000;
        let positive = (0..n).filter(|_| s.sample_radial(1).unwrap()[0] > 0.0).count();
        let se = (0.25 / n as f64).sqrt();
        assert!((positive as f64 / n as f64 - 0.5).abs() < 4.0 * se);
    }

    #[test]
    fn radial_three_dimensional_mean_is_near_zero() {
        let g = GridSpec::new(5.0, 50, 0.0).unwrap();
        let noise = truncated_gaussian_pmf(&g, 1.0).unwrap();
        let mut s = NoiseSampler::new(&noise, 21);
        let n = 100_000;
        let mut mean = [0.0; 3];
        for _ in 0..n {
            let v = s.sample_radial(3).unwrap();
            for (m, y) in mean.iter_mut().zip(v) {
                *m += y / n as f64;
            }
        }
        let norm = mean.iter().map(|m| m * m).sum::<f64>().sqrt();
        assert!(norm < 0.02, "{norm}");
    }

    #[test]
    fn radial_rejects_zero_dimension() {
        let g = GridSpec::new(5.0, 5, 0.0).unwrap();
        let noise = truncated_gaussian_pmf(&g, 1.0).unwrap();
        assert!(sample_radial(&noise, 0, 1).is_err());
    }
}
