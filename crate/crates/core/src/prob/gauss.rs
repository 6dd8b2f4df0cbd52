use nalgebra::{Cholesky, DMatrix, DVector, Dyn};

use crate::error::{Error, Result};
use crate::prob::rng::Rng;
use crate::prob::Scalar;

/// Mean and covariance of one category's emission distribution.
#[derive(Debug, Clone, PartialEq)]
pub struct GaussParams<T: Scalar> {
    pub mean: DVector<T>,
    pub cov: DMatrix<T>,
}

fn symmetry_tol<T: Scalar>() -> T {
    let eps = T::default_epsilon() * T::cast(1e4);
    if eps > T::cast(1e-9) {
        eps
    } else {
        T::cast(1e-9)
    }
}

impl<T: Scalar> GaussParams<T> {
    /// Validates shape, symmetry and positive definiteness.
    pub fn new(mean: DVector<T>, cov: DMatrix<T>) -> Result<Self> {
        let g = GaussParams { mean, cov };
        g.validate()?;
        Ok(g)
    }

    pub fn dim(&self) -> usize {
        self.mean.len()
    }

    pub fn validate(&self) -> Result<()> {
        let d = self.mean.len();
        if self.cov.nrows() != d || self.cov.ncols() != d {
            return Err(Error::invalid(format!(
                "covariance is {}x{}, mean has length {d}",
                self.cov.nrows(),
                self.cov.ncols()
            )));
        }
        let tol = symmetry_tol::<T>();
        for i in 0..d {
            for j in 0..i {
                if (self.cov[(i, j)] - self.cov[(j, i)]).abs() > tol {
                    return Err(Error::invalid("covariance is not symmetric"));
                }
            }
        }
        if self.cov.clone().cholesky().is_none() {
            return Err(Error::numerical("covariance is not positive definite"));
        }
        Ok(())
    }
}

/// Cholesky factorization with one `1e-8 I` jitter retry.
pub(crate) fn cholesky_with_repair<T: Scalar>(m: &DMatrix<T>) -> Result<Cholesky<T, Dyn>> {
    if let Some(c) = m.clone().cholesky() {
        return Ok(c);
    }
    let d = m.nrows();
    let jittered = m + DMatrix::<T>::identity(d, d) * T::cast(1e-8);
    jittered
        .cholesky()
        .ok_or_else(|| Error::numerical("matrix not positive definite after jitter"))
}

/// A Gaussian with its Cholesky factor and normalizer precomputed, for
/// evaluating many log-densities against one parameter set.
#[derive(Debug, Clone)]
pub struct MvNormal<T: Scalar> {
    mean: DVector<T>,
    chol_l: DMatrix<T>,
    log_norm: T,
}

impl<T: Scalar> MvNormal<T> {
    pub fn new(g: &GaussParams<T>) -> Result<Self> {
        let d = g.dim();
        if g.cov.nrows() != d || g.cov.ncols() != d {
            return Err(Error::invalid("covariance shape does not match mean"));
        }
        let chol = g
            .cov
            .clone()
            .cholesky()
            .ok_or_else(|| Error::numerical("singular covariance"))?;
        let l = chol.l();
        let log_det = (0..d).map(|i| l[(i, i)].ln()).fold(T::zero(), |a, b| a + b) * T::cast(2.0);
        let log_norm =
            -(T::cast(0.5) * (T::cast(d as f64) * T::two_pi().ln() + log_det));
        Ok(MvNormal {
            mean: g.mean.clone(),
            chol_l: l,
            log_norm,
        })
    }

    pub fn dim(&self) -> usize {
        self.mean.len()
    }

    pub fn mean(&self) -> &DVector<T> {
        &self.mean
    }

    /// Log-density at `x`. Panics if `x` has the wrong length.
    pub fn logpdf(&self, x: &[T]) -> T {
        let d = self.mean.len();
        assert_eq!(x.len(), d, "observation dimension");
        // forward substitution L y = x - mean
        let mut y = vec![T::zero(); d];
        let mut maha = T::zero();
        for i in 0..d {
            let mut s = x[i] - self.mean[i];
            for (j, yj) in y.iter().enumerate().take(i) {
                s -= self.chol_l[(i, j)] * *yj;
            }
            let yi = s / self.chol_l[(i, i)];
            y[i] = yi;
            maha += yi * yi;
        }
        self.log_norm - T::cast(0.5) * maha
    }

    /// One draw: `mean + L z` with `z` standard normal.
    pub fn sample(&self, rng: &mut Rng) -> DVector<T> {
        let d = self.mean.len();
        let z = DVector::<T>::from_iterator(d, (0..d).map(|_| T::cast(rng.standard_normal())));
        &self.mean + &self.chol_l * z
    }
}

/// Exact multivariate normal log-density.
pub fn gaussian_logpdf<T: Scalar>(x: &[T], g: &GaussParams<T>) -> Result<T> {
    if x.len() != g.dim() {
        return Err(Error::invalid(format!(
            "observation has length {}, distribution has dimension {}",
            x.len(),
            g.dim()
        )));
    }
    Ok(MvNormal::new(g)?.logpdf(x))
}

/// One draw from the multivariate normal.
pub fn sample_gaussian<T: Scalar>(g: &GaussParams<T>, rng: &mut Rng) -> Result<DVector<T>> {
    Ok(MvNormal::new(g)?.sample(rng))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn iso(mean: Vec<f64>, var: f64) -> GaussParams<f64> {
        let d = mean.len();
        GaussParams::new(DVector::from_vec(mean), DMatrix::identity(d, d) * var).unwrap()
    }

    #[test]
    fn standard_normal_at_zero() {
        let lp = gaussian_logpdf(&[0.0], &iso(vec![0.0], 1.0)).unwrap();
        assert!((lp - (-0.5 * (2.0 * std::f64::consts::PI).ln())).abs() < 1e-12);
        assert!((lp - -0.91894).abs() < 1e-5);
    }

    #[test]
    fn bivariate_identity_at_mean() {
        let lp = gaussian_logpdf(&[1.0, -2.0], &iso(vec![1.0, -2.0], 1.0)).unwrap();
        assert!((lp + (2.0 * std::f64::consts::PI).ln()).abs() < 1e-12);
    }

    #[test]
    fn one_d_density_integrates_to_one() {
        let g = GaussParams::new(DVector::from_vec(vec![0.3]), DMatrix::from_element(1, 1, 0.49)).unwrap();
        let (lo, hi, n) = (-10.0, 10.0, 20_000);
        let h = (hi - lo) / n as f64;
        let total: f64 = (0..=n)
            .map(|i| {
                let x = lo + i as f64 * h;
                let w = if i == 0 || i == n { 0.5 } else { 1.0 };
                w * gaussian_logpdf(&[x], &g).unwrap().exp()
            })
            .sum::<f64>()
            * h;
        assert!((total - 1.0).abs() < 1e-3, "{total}");
    }

    #[test]
    fn singular_covariance_errors() {
        let g = GaussParams {
            mean: DVector::from_vec(vec![0.0, 0.0]),
            cov: DMatrix::zeros(2, 2),
        };
        assert!(matches!(gaussian_logpdf(&[0.0, 0.0], &g), Err(Error::Numerical(_))));
        let mut rng = Rng::new(0);
        assert!(matches!(sample_gaussian(&g, &mut rng), Err(Error::Numerical(_))));
    }

    #[test]
    fn near_degenerate_draws_hug_mean() {
        let g = iso(vec![1.0, 2.0, 3.0], 1e-12);
        let mut rng = Rng::new(5);
        for _ in 0..100 {
            let x = sample_gaussian(&g, &mut rng).unwrap();
            assert!((x - &g.mean).amax() < 1e-4);
        }
    }

    #[test]
    fn sample_covariance_converges() {
        let cov = DMatrix::from_row_slice(2, 2, &[1.0, 0.6, 0.6, 2.0]);
        let g = GaussParams::new(DVector::from_vec(vec![0.5, -1.0]), cov.clone()).unwrap();
        let mvn = MvNormal::new(&g).unwrap();
        let mut rng = Rng::new(6);
        let n = 100_000;
        let draws: Vec<DVector<f64>> = (0..n).map(|_| mvn.sample(&mut rng)).collect();
        let mean = draws.iter().fold(DVector::zeros(2), |a, x| a + x) / n as f64;
        let mut s = DMatrix::zeros(2, 2);
        for x in &draws {
            let c = x - &mean;
            s += &c * c.transpose();
        }
        s /= (n - 1) as f64;
        assert!((s - cov).amax() < 0.05);
    }

    #[test]
    fn seeded_draws_repeat() {
        let g = iso(vec![0.0; 3], 1.0);
        let a = sample_gaussian(&g, &mut Rng::new(9)).unwrap();
        let b = sample_gaussian(&g, &mut Rng::new(9)).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn single_precision_matches_double() {
        let g32 = GaussParams::<f32>::new(DVector::from_vec(vec![0.0f32]), DMatrix::identity(1, 1)).unwrap();
        let lp = gaussian_logpdf(&[0.0f32], &g32).unwrap();
        assert!((lp as f64 + 0.918_938_5_f64).abs() < 1e-5);
        let mv = crate::MvNormal32::new(&g32).unwrap();
        assert!((mv.logpdf(&[0.0f32]) - lp).abs() < 1e-6);
    }
}
