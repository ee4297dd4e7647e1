use nalgebra::{DMatrix, DVector};

use super::family::working_pair;
use super::{Dataset, Family, GlmFit};
use crate::error::{Error, Result};
use crate::linalg::spd_factor;

/// Centered pseudo-data: a least-squares problem in (`z0`, `u_mat0`) whose
/// solution reproduces the GLM coefficient estimates.
#[derive(Debug, Clone, PartialEq)]
pub struct LinearizedData {
    /// Centered pseudo-response ẑ₀.
    pub z0: DVector<f64>,
    /// Centered pseudo-design Û₀.
    pub u_mat0: DMatrix<f64>,
    /// Intercept weight vector û₀ (square-root working weights).
    pub u0: DVector<f64>,
    /// Variance unit a(φ̂) of the pseudo-noise.
    pub noise_scale: f64,
}

impl LinearizedData {
    pub fn n(&self) -> usize {
        self.z0.len()
    }

    pub fn p(&self) -> usize {
        self.u_mat0.ncols()
    }
}

/// Builds the centered pseudo-data at an arbitrary coefficient value
/// (t₀, t) and precision φ. With the true parameters this gives the idealized
/// counterpart of [`linearize`].
pub fn linearize_at(
    data: &Dataset,
    family: Family,
    beta0: f64,
    beta: &DVector<f64>,
    phi: f64,
) -> Result<LinearizedData> {
    let n = data.n();
    let eta = &data.x * beta;
    let mut u0 = DVector::zeros(n);
    let mut z = DVector::zeros(n);
    let mut u_mat = data.x.clone();
    for i in 0..n {
        let e = beta0 + eta[i];
        let (w, zi) = working_pair(family, e, phi, data.y[i])?;
        if !(w * w >= f64::EPSILON) || !zi.is_finite() {
            return Err(Error::SaturatedFit { index: i });
        }
        u0[i] = w;
        z[i] = zi;
        u_mat.row_mut(i).scale_mut(w);
    }
    let norm2 = u0.norm_squared();
    let z0 = &z - &u0 * (u0.dot(&z) / norm2);
    let proj = u0.tr_mul(&u_mat) / norm2;
    let u_mat0 = &u_mat - &u0 * proj;
    Ok(LinearizedData {
        z0,
        u_mat0,
        u0,
        noise_scale: family.dispersion(phi),
    })
}

/// Centered pseudo-data at the fitted coefficients.
pub fn linearize(data: &Dataset, family: Family, fit: &GlmFit) -> Result<LinearizedData> {
    if fit.family != family || fit.eta.len() != data.n() || fit.beta.len() != data.p() {
        return Err(Error::InvalidArgument(
            "fit does not belong to this dataset/family".into(),
        ));
    }
    linearize_at(data, family, fit.beta0, &fit.beta, fit.phi)
}

/// Contrast vector c with cᵀẑ₀ equal to coefficient `j` (0-based position in
/// `model`) of the least-squares fit of ẑ₀ on the columns `model` of Û₀.
pub fn contrast(u_mat0: &DMatrix<f64>, model: &[usize], j: usize) -> Result<DVector<f64>> {
    if j >= model.len() {
        return Err(Error::InvalidArgument(format!(
            "position {j} outside model of size {}",
            model.len()
        )));
    }
    if let Some(&bad) = model.iter().find(|&&k| k >= u_mat0.ncols()) {
        return Err(Error::InvalidArgument(format!(
            "covariate index {bad} out of range"
        )));
    }
    let um = u_mat0.select_columns(model.iter());
    let chol = spd_factor(um.tr_mul(&um))
        .ok_or_else(|| Error::RankDeficient(format!("selected columns {model:?} are collinear")))?;
    let mut e = DVector::zeros(model.len());
    e[j] = 1.0;
    Ok(um * chol.solve(&e))
}

/// ĝ = cᵀ(ẑ₀ − Û₀β)/‖c‖, approximately N(0, a(φ)) at the true β.
pub fn pivot_statistic(
    lin: &LinearizedData,
    model: &[usize],
    j: usize,
    beta_true: &DVector<f64>,
) -> Result<f64> {
    let c = contrast(&lin.u_mat0, model, j)?;
    let resid = &lin.z0 - &lin.u_mat0 * beta_true;
    Ok(c.dot(&resid) / c.norm())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::glm::{fit_mle, FitOptions};

    fn small_logistic() -> Dataset {
        let n = 40;
        let x = DMatrix::from_fn(n, 2, |i, j| (((i * 31 + j * 17) % 23) as f64 - 11.0) / 6.0);
        let y = DVector::from_fn(n, |i, _| if (i * 7 + 3) % 5 < 2 { 1.0 } else { 0.0 });
        Dataset::new(x, y).unwrap()
    }

    #[test]
    fn centering_and_noise_scale() {
        let data = small_logistic();
        let fit = fit_mle(&data, Family::Logistic, &FitOptions::default()).unwrap();
        let lin = linearize(&data, Family::Logistic, &fit).unwrap();
        assert_eq!(lin.noise_scale, 1.0);
        assert!(lin.u0.dot(&lin.z0).abs() < 1e-10);
        let cross = lin.u0.tr_mul(&lin.u_mat0);
        assert!(cross.amax() < 1e-10);
    }

    #[test]
    fn single_column_contrast() {
        let u = DMatrix::from_column_slice(3, 1, &[1.0, 2.0, -2.0]);
        let c = contrast(&u, &[0], 0).unwrap();
        for (ci, ui) in c.iter().zip(u.column(0).iter()) {
            assert!((ci - ui / 9.0).abs() < 1e-15);
        }
    }

    #[test]
    fn collinear_columns_are_rejected() {
        let u = DMatrix::from_column_slice(3, 2, &[1.0, 2.0, 3.0, 2.0, 4.0, 6.0]);
        assert!(matches!(
            contrast(&u, &[0, 1], 0),
            Err(Error::RankDeficient(_))
        ));
        assert!(contrast(&u, &[0], 1).is_err());
    }

    #[test]
    fn pivot_vanishes_for_zero_response() {
        let lin = LinearizedData {
            z0: DVector::zeros(3),
            u_mat0: DMatrix::from_column_slice(3, 1, &[1.0, -1.0, 0.5]),
            u0: DVector::from_element(3, 1.0),
            noise_scale: 1.0,
        };
        let v = pivot_statistic(&lin, &[0], 0, &DVector::zeros(1)).unwrap();
        assert_eq!(v, 0.0);
    }
}
