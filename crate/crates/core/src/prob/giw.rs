use nalgebra::{DMatrix, DVector};
use rand_distr::{ChiSquared, Distribution};
use statrs::function::gamma::ln_gamma;

use crate::error::{Error, Result};
use crate::prob::gauss::{cholesky_with_repair, GaussParams};
use crate::prob::rng::Rng;
use crate::prob::Scalar;

/// Normal-Inverse-Wishart hyperparameters `[m0, kappa0, V0, nu0]`.
#[derive(Debug, Clone, PartialEq)]
pub struct GiwHyper<T: Scalar> {
    pub m0: DVector<T>,
    pub kappa0: T,
    pub v0: DMatrix<T>,
    pub nu0: T,
}

impl<T: Scalar> GiwHyper<T> {
    /// Prior with `nu0 >= dim + 2` and symmetric positive definite `v0`.
    pub fn new(m0: DVector<T>, kappa0: T, v0: DMatrix<T>, nu0: T) -> Result<Self> {
        let h = GiwHyper { m0, kappa0, v0, nu0 };
        let d = h.dim();
        if h.v0.nrows() != d || h.v0.ncols() != d {
            return Err(Error::invalid("V0 shape does not match m0"));
        }
        if !(h.kappa0 > T::zero()) {
            return Err(Error::invalid("kappa0 must be positive"));
        }
        if h.nu0 < T::cast(d as f64 + 2.0) {
            return Err(Error::invalid(format!("nu0 = {} < dim + 2", h.nu0)));
        }
        if h.v0.clone().cholesky().is_none() {
            return Err(Error::invalid("V0 is not positive definite"));
        }
        Ok(h)
    }

    /// `m0 = 0`, `V0 = scale * I`, `nu0 = dim + 2`.
    pub fn isotropic(dim: usize, kappa0: T, scale: T) -> Result<Self> {
        GiwHyper::new(
            DVector::zeros(dim),
            kappa0,
            DMatrix::identity(dim, dim) * scale,
            T::cast(dim as f64 + 2.0),
        )
    }

    pub fn dim(&self) -> usize {
        self.m0.len()
    }
}

/// Conjugate Normal-Inverse-Wishart update from a set of observations.
pub fn giw_posterior<T: Scalar, X: AsRef<[T]>>(data: &[X], prior: &GiwHyper<T>) -> Result<GiwHyper<T>> {
    let d = prior.dim();
    if let Some(x) = data.iter().find(|x| x.as_ref().len() != d) {
        return Err(Error::invalid(format!(
            "observation of length {} against prior of dimension {d}",
            x.as_ref().len()
        )));
    }
    let n = data.len();
    if n == 0 {
        return Ok(prior.clone());
    }
    let nf = T::cast(n as f64);
    let mut mean = DVector::<T>::zeros(d);
    for x in data {
        for (m, v) in mean.iter_mut().zip(x.as_ref()) {
            *m += *v;
        }
    }
    mean /= nf;
    let mut scatter = DMatrix::<T>::zeros(d, d);
    for x in data {
        let c = DVector::from_iterator(d, x.as_ref().iter().zip(mean.iter()).map(|(v, m)| *v - *m));
        scatter.ger(T::one(), &c, &c, T::one());
    }
    let kappa_n = prior.kappa0 + nf;
    let nu_n = prior.nu0 + nf;
    let m_n = (&prior.m0 * prior.kappa0 + &mean * nf) / kappa_n;
    let diff = &mean - &prior.m0;
    let mut v_n = &prior.v0 + scatter;
    v_n.ger(prior.kappa0 * nf / kappa_n, &diff, &diff, T::one());
    v_n = (&v_n + v_n.transpose()) * T::cast(0.5);
    Ok(GiwHyper {
        m0: m_n,
        kappa0: kappa_n,
        v0: v_n,
        nu0: nu_n,
    })
}

/// Draws `(mean, cov)`: `cov ~ IW(V, nu)` by the Bartlett decomposition,
/// then `mean ~ N(m, cov / kappa)`.
pub fn sample_gauss_params<T: Scalar>(post: &GiwHyper<T>, rng: &mut Rng) -> Result<GaussParams<T>> {
    let d = post.dim();
    if post.nu0.as_f64() <= d as f64 + 1.0 {
        return Err(Error::invalid(format!(
            "nu = {} gives an inverse-Wishart without a finite mean (dim {d})",
            post.nu0
        )));
    }
    if !(post.kappa0 > T::zero()) {
        return Err(Error::invalid("kappa must be positive"));
    }
    // V = C C^T. With A the Bartlett factor of W(I, nu), cov = (C A^-T)(C A^-T)^T.
    let c = cholesky_with_repair(&post.v0)?.l();
    let nu = post.nu0.as_f64();
    let mut a = DMatrix::<T>::zeros(d, d);
    for i in 0..d {
        let chi: f64 = ChiSquared::new(nu - i as f64)
            .map_err(|e| Error::invalid(e.to_string()))?
            .sample(rng);
        a[(i, i)] = T::cast(chi.sqrt());
        for j in 0..i {
            a[(i, j)] = T::cast(rng.standard_normal());
        }
    }
    // solve A^T X = C^T for X = A^-T C^T, so that B = C A^-T = X^T
    let x = a
        .transpose()
        .solve_upper_triangular(&c.transpose())
        .ok_or_else(|| Error::numerical("singular Bartlett factor"))?;
    let b = x.transpose();
    let mut cov = &b * b.transpose();
    cov = (&cov + cov.transpose()) * T::cast(0.5);
    let chol = cholesky_with_repair(&cov)?;
    let cov = chol.l() * chol.l().transpose();
    let z = DVector::<T>::from_iterator(d, (0..d).map(|_| T::cast(rng.standard_normal())));
    let mean = &post.m0 + chol.l() * z / post.kappa0.sqrt();
    Ok(GaussParams { mean, cov })
}

fn ln_multivariate_gamma(d: usize, a: f64) -> f64 {
    let df = d as f64;
    df * (df - 1.0) / 4.0 * std::f64::consts::PI.ln()
        + (0..d).map(|j| ln_gamma(a - j as f64 / 2.0)).sum::<f64>()
}

/// Log-density of `(mean, cov)` under the Normal-Inverse-Wishart prior.
pub fn giw_log_density<T: Scalar>(g: &GaussParams<T>, h: &GiwHyper<T>) -> Result<f64> {
    let d = h.dim();
    if g.dim() != d {
        return Err(Error::invalid("parameter dimension does not match prior"));
    }
    let to64 = |m: &DMatrix<T>| m.map(|v| v.as_f64());
    let cov = to64(&g.cov);
    let psi = to64(&h.v0);
    let nu = h.nu0.as_f64();
    let kappa = h.kappa0.as_f64();
    let df = d as f64;
    let cov_chol = cov
        .clone()
        .cholesky()
        .ok_or_else(|| Error::numerical("covariance not positive definite"))?;
    let psi_chol = psi
        .clone()
        .cholesky()
        .ok_or_else(|| Error::numerical("scale not positive definite"))?;
    let logdet = |l: DMatrix<f64>| 2.0 * (0..d).map(|i| l[(i, i)].ln()).sum::<f64>();
    let ld_cov = logdet(cov_chol.l());
    let ld_psi = logdet(psi_chol.l());
    let cov_inv = cov_chol.inverse();
    let trace = (&psi * &cov_inv).trace();
    let ln_iw = 0.5 * nu * ld_psi
        - 0.5 * nu * df * std::f64::consts::LN_2
        - ln_multivariate_gamma(d, nu / 2.0)
        - 0.5 * (nu + df + 1.0) * ld_cov
        - 0.5 * trace;
    let diff = g.mean.map(|v| v.as_f64()) - h.m0.map(|v| v.as_f64());
    let maha = kappa * (diff.transpose() * &cov_inv * &diff)[(0, 0)];
    let ln_n = -0.5 * (df * (2.0 * std::f64::consts::PI).ln() + ld_cov - df * kappa.ln() + maha);
    Ok(ln_iw + ln_n)
}
