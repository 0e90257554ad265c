//! Random variate generators used by the Gibbs samplers.
//!
//! Parameterizations:
//! - inverse gamma: shape/scale, density proportional to `x^(-shape-1) exp(-scale/x)`;
//! - Wishart: `(scale, df)` with `E[X] = df * scale`.

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{ChiSquared, Distribution, Gamma, StandardNormal};

use crate::error::{Error, Result};

/// Independent stream `stream` of the generator seeded by `seed`.
pub fn seeded_rng(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

pub fn standard_normal<R: Rng + ?Sized>(rng: &mut R) -> f64 {
    StandardNormal.sample(rng)
}

/// NaN when the parameters are not positive and finite, so a corrupted
/// chain state surfaces as a divergence rather than a panic.
pub fn inverse_gamma<R: Rng + ?Sized>(shape: f64, scale: f64, rng: &mut R) -> f64 {
    match Gamma::new(shape, 1.0 / scale) {
        Ok(g) if scale.is_finite() && scale > 0.0 => 1.0 / g.sample(rng),
        _ => f64::NAN,
    }
}

/// Draw from `N(P^-1 b, P^-1)` given the precision `P` and the linear term `b`.
pub fn normal_from_precision<R: Rng + ?Sized>(
    precision: &DMatrix<f64>,
    linear: &DVector<f64>,
    rng: &mut R,
) -> Result<DVector<f64>> {
    let chol = precision
        .clone()
        .cholesky()
        .ok_or_else(|| Error::Numerical("precision matrix is not positive definite".into()))?;
    let mean = chol.solve(linear);
    let z = DVector::from_fn(linear.len(), |_, _| standard_normal(rng));
    // L' u = z gives u ~ N(0, (L L')^-1)
    let u = chol
        .l()
        .transpose()
        .solve_upper_triangular(&z)
        .ok_or_else(|| Error::Numerical("triangular solve failed".into()))?;
    Ok(mean + u)
}

/// Wishart draw by the Bartlett decomposition.
pub fn wishart<R: Rng + ?Sized>(scale: &DMatrix<f64>, df: f64, rng: &mut R) -> Result<DMatrix<f64>> {
    let p = scale.nrows();
    if df <= (p as f64) - 1.0 {
        return Err(Error::InvalidParameter(format!(
            "Wishart degrees of freedom {df} must exceed dimension - 1 = {}",
            p - 1
        )));
    }
    let l = scale
        .clone()
        .cholesky()
        .ok_or_else(|| Error::Numerical("Wishart scale is not positive definite".into()))?
        .l();
    let mut a = DMatrix::zeros(p, p);
    for i in 0..p {
        let chi: f64 = ChiSquared::new(df - i as f64)
            .expect("positive degrees of freedom")
            .sample(rng);
        a[(i, i)] = chi.sqrt();
        for j in 0..i {
            a[(i, j)] = standard_normal(rng);
        }
    }
    let la = l * a;
    Ok(&la * la.transpose())
}

/// Symmetric inverse of a positive definite matrix.
pub fn spd_inverse(m: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    let inv = m
        .clone()
        .cholesky()
        .ok_or_else(|| Error::Numerical("matrix is not positive definite".into()))?
        .inverse();
    Ok(symmetrize(inv))
}

pub fn symmetrize(m: DMatrix<f64>) -> DMatrix<f64> {
    (&m + m.transpose()) * 0.5
}
