use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use super::Tensor;
use crate::{Error, Result};

/// Gaussian initialisation parameters.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct InitSpec {
    pub sigma_theta: f64,
    pub sigma_b: f64,
    pub seed: u64,
}

impl InitSpec {
    pub fn validate(&self) -> Result<()> {
        if !(self.sigma_theta >= 0.0 && self.sigma_b >= 0.0) {
            return Err(Error::InvalidParameter(format!(
                "init std-devs must be nonnegative, got {} and {}",
                self.sigma_theta, self.sigma_b
            )));
        }
        Ok(())
    }
}

/// I.i.d. N(0, sigma_theta²) tensor, reproducible from the seed.
pub fn init_gaussian(rows: usize, cols: usize, spec: &InitSpec) -> Result<Tensor> {
    spec.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let data = gaussian_vec(&mut rng, rows * cols, spec.sigma_theta);
    Tensor::from_vec(rows, cols, data)
}

pub(crate) fn gaussian_vec(rng: &mut ChaCha8Rng, n: usize, sigma: f64) -> Vec<f64> {
    (0..n)
        .map(|_| {
            let z: f64 = StandardNormal.sample(rng);
            sigma * z
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn zero_sigma_gives_zeros() {
        let t = init_gaussian(4, 5, &InitSpec { sigma_theta: 0.0, sigma_b: 0.0, seed: 3 }).unwrap();
        assert!(t.data().iter().all(|&x| x == 0.0));
    }

    #[test]
    fn moments_and_determinism() {
        let spec = InitSpec { sigma_theta: 1.0, sigma_b: 0.0, seed: 11 };
        let t = init_gaussian(1000, 1000, &spec).unwrap();
        let n = t.data().len() as f64;
        let mean = t.data().iter().sum::<f64>() / n;
        let var = t.data().iter().map(|x| (x - mean).powi(2)).sum::<f64>() / n;
        assert!(mean.abs() < 0.01);
        assert!((var - 1.0).abs() < 0.01);
        assert_eq!(t, init_gaussian(1000, 1000, &spec).unwrap());
    }

    #[test]
    fn negative_sigma_rejected() {
        assert!(init_gaussian(1, 1, &InitSpec { sigma_theta: -1.0, sigma_b: 0.0, seed: 0 }).is_err());
    }
}
