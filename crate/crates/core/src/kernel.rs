//! Multi-exponential triggering kernel `g(s) = Σ_j α_j β_j exp(-β_j s)`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Sum of `M` exponentials. `α_j` is the expected number of direct offspring
/// contributed by component `j`, `β_j` its decay rate per second.
///
/// `Σ α_j ≥ 1` is allowed here; only simulation requires a stable kernel.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExponentialKernel {
    alphas: Vec<f64>,
    betas: Vec<f64>,
}

impl ExponentialKernel {
    pub fn new(alphas: Vec<f64>, betas: Vec<f64>) -> Result<Self> {
        if alphas.len() != betas.len() {
            return Err(Error::InvalidInput(format!(
                "kernel has {} alphas but {} betas",
                alphas.len(),
                betas.len()
            )));
        }
        if let Some(a) = alphas.iter().find(|a| !(a.is_finite() && **a >= 0.0)) {
            return Err(Error::InvalidInput(format!("alpha must be finite and >= 0, got {a}")));
        }
        if let Some(b) = betas.iter().find(|b| !(b.is_finite() && **b > 0.0)) {
            return Err(Error::InvalidInput(format!("beta must be finite and > 0, got {b}")));
        }
        Ok(Self { alphas, betas })
    }

    /// Kernel with no components: a pure (possibly inhomogeneous) Poisson process.
    pub fn none() -> Self {
        Self {
            alphas: Vec::new(),
            betas: Vec::new(),
        }
    }

    pub fn single(alpha: f64, beta: f64) -> Result<Self> {
        Self::new(vec![alpha], vec![beta])
    }

    pub fn alphas(&self) -> &[f64] {
        &self.alphas
    }

    pub fn betas(&self) -> &[f64] {
        &self.betas
    }

    /// Number of exponential components `M`.
    pub fn order(&self) -> usize {
        self.alphas.len()
    }

    pub fn components(&self) -> impl Iterator<Item = (f64, f64)> + '_ {
        self.alphas.iter().copied().zip(self.betas.iter().copied())
    }

    /// `g(s)` for a lag `s ≥ 0`.
    pub fn eval(&self, s: f64) -> Result<f64> {
        check_lag(s)?;
        Ok(self.eval_unchecked(s))
    }

    pub(crate) fn eval_unchecked(&self, s: f64) -> f64 {
        self.components().map(|(a, b)| a * b * (-b * s).exp()).sum()
    }

    /// `∫_0^s g(u) du = Σ_j α_j (1 - exp(-β_j s))`.
    pub fn integral(&self, s: f64) -> Result<f64> {
        check_lag(s)?;
        Ok(self.integral_unchecked(s))
    }

    pub(crate) fn integral_unchecked(&self, s: f64) -> f64 {
        self.components().map(|(a, b)| -a * (-b * s).exp_m1()).sum()
    }

    /// `Σ_j α_j`, the expected number of events directly triggered by one event.
    pub fn branching_ratio(&self) -> f64 {
        self.alphas.iter().sum()
    }

    pub fn is_stable(&self) -> bool {
        self.branching_ratio() < 1.0
    }

    /// Kernel for time measured in units `factor` times larger.
    pub fn rescaled(&self, factor: f64) -> Result<Self> {
        Self::new(self.alphas.clone(), self.betas.iter().map(|b| b * factor).collect())
    }
}

fn check_lag(s: f64) -> Result<()> {
    if s >= 0.0 {
        Ok(())
    } else {
        Err(Error::Domain(format!("kernel lag must be >= 0, got {s}")))
    }
}

/// Free function form of [`ExponentialKernel::eval`].
pub fn kernel_eval(kernel: &ExponentialKernel, s: f64) -> Result<f64> {
    kernel.eval(s)
}

/// Free function form of [`ExponentialKernel::integral`].
pub fn kernel_integral(kernel: &ExponentialKernel, s: f64) -> Result<f64> {
    kernel.integral(s)
}

/// Free function form of [`ExponentialKernel::branching_ratio`].
pub fn branching_ratio(kernel: &ExponentialKernel) -> f64 {
    kernel.branching_ratio()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::testutil::adaptive_simpson;
    use approx::assert_relative_eq;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn eval_examples() {
        let k = ExponentialKernel::single(0.5, 2.0).unwrap();
        assert_eq!(k.eval(0.0).unwrap(), 1.0);

        let zero = ExponentialKernel::new(vec![0.0, 0.0], vec![1.0, 5.0]).unwrap();
        for s in [0.0, 0.3, 7.0] {
            assert_eq!(zero.eval(s).unwrap(), 0.0);
        }

        let k = ExponentialKernel::new(vec![0.3, 0.2], vec![1.0, 10.0]).unwrap();
        let expected = 0.3 * (-0.5f64).exp() + 2.0 * (-5.0f64).exp();
        assert_relative_eq!(k.eval(0.5).unwrap(), expected, max_relative = 1e-15);
    }

    #[test]
    fn negative_lag_is_a_domain_error() {
        let k = ExponentialKernel::single(0.5, 2.0).unwrap();
        assert!(matches!(k.eval(-1e-9), Err(Error::Domain(_))));
        assert!(matches!(k.integral(-1.0), Err(Error::Domain(_))));
    }

    #[test]
    fn integral_examples() {
        let k = ExponentialKernel::new(vec![0.3, 0.2], vec![1.0, 10.0]).unwrap();
        assert_eq!(k.integral(0.0).unwrap(), 0.0);
        let expected = 0.3 * (1.0 - (-1.0f64).exp()) + 0.2 * (1.0 - (-10.0f64).exp());
        assert_relative_eq!(k.integral(1.0).unwrap(), expected, max_relative = 1e-15);
        let quad = adaptive_simpson(|s| k.eval(s).unwrap(), 0.0, 1.0, 1e-13);
        assert_relative_eq!(k.integral(1.0).unwrap(), quad, max_relative = 1e-10);

        let single = ExponentialKernel::single(0.5, 2.0).unwrap();
        assert_relative_eq!(single.integral(1e3).unwrap(), 0.5, max_relative = 1e-15);
    }

    #[test]
    fn branching_ratio_examples() {
        assert_eq!(ExponentialKernel::single(0.41, 1.0).unwrap().branching_ratio(), 0.41);
        assert_eq!(ExponentialKernel::none().branching_ratio(), 0.0);
        let k = ExponentialKernel::new(vec![0.2, 0.3, 0.1], vec![1.0, 2.0, 3.0]).unwrap();
        assert_relative_eq!(k.branching_ratio(), 0.6, max_relative = 1e-15);
    }

    #[test]
    fn rejects_malformed_kernels() {
        assert!(ExponentialKernel::new(vec![0.1], vec![]).is_err());
        assert!(ExponentialKernel::new(vec![-0.1], vec![1.0]).is_err());
        assert!(ExponentialKernel::new(vec![0.1], vec![0.0]).is_err());
        // supercritical kernels are valid during fitting
        assert!(ExponentialKernel::single(1.5, 1.0).is_ok());
    }

    fn random_kernel(rng: &mut ChaCha8Rng) -> ExponentialKernel {
        let m = rng.random_range(1..=4);
        let alphas = (0..m).map(|_| rng.random_range(0.0..0.5)).collect();
        let betas = (0..m).map(|_| 10f64.powf(rng.random_range(-1.0..1.5))).collect();
        ExponentialKernel::new(alphas, betas).unwrap()
    }

    #[test]
    fn integral_matches_quadrature_on_random_kernels() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for _ in 0..100 {
            let k = random_kernel(&mut rng);
            let s = rng.random_range(0.01..20.0);
            let quad = adaptive_simpson(|u| k.eval_unchecked(u), 0.0, s, 1e-14);
            let exact = k.integral(s).unwrap();
            assert_relative_eq!(exact, quad, max_relative = 1e-8);
        }
    }

    #[test]
    fn integral_limit_is_branching_ratio() {
        let mut rng = ChaCha8Rng::seed_from_u64(12);
        for _ in 0..100 {
            let k = random_kernel(&mut rng);
            let min_beta = k.betas().iter().cloned().fold(f64::INFINITY, f64::min);
            let s = 50.0 / min_beta;
            assert!((k.integral(s).unwrap() - k.branching_ratio()).abs() <= 1e-6);
            // monotone in s
            assert!(k.integral(s / 2.0).unwrap() <= k.integral(s).unwrap());
        }
    }
}
