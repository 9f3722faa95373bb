//! Latent codes and the two interpolation functions.
//!
//! Semantic codes are blended linearly, stochastic codes (DDIM-inverted
//! `x_T` tensors) spherically. Throughout this crate `gamma` weights the
//! *first* subject: `gamma = 1` reproduces subject A and `gamma = 0`
//! subject B, for both code kinds.

mod encoder;
mod preprocess;

pub use encoder::{encode_semantic, Encoder, LearnedEncoder, PoolPyramidEncoder, SemanticEncoder};
pub use preprocess::{
    bilinear_resize, center_crop_square, preprocess, preprocess_xi, Preprocessed,
};

use crate::error::{Error, Result};
use crate::image::ImageBuffer;

/// Below this `sin θ` the spherical path degenerates and [`slerp`] falls back
/// to linear interpolation.
pub const SLERP_DEGENERATE_SIN: f64 = 1e-7;

/// Output of a semantic encoder.
#[derive(Debug, Clone, PartialEq)]
pub struct SemanticCode(Vec<f64>);

impl SemanticCode {
    pub fn new(values: Vec<f64>) -> Self {
        Self(values)
    }

    pub fn values(&self) -> &[f64] {
        &self.0
    }

    pub fn dim(&self) -> usize {
        self.0.len()
    }

    pub fn into_values(self) -> Vec<f64> {
        self.0
    }
}

/// The `x_T` tensor produced by deterministic inversion.
#[derive(Debug, Clone, PartialEq)]
pub struct StochasticCode(pub ImageBuffer);

#[derive(Debug, Clone, PartialEq)]
pub struct LatentPair {
    pub semantic: SemanticCode,
    pub stochastic: StochasticCode,
}

fn check_gamma(gamma: f64) -> Result<()> {
    if !(0.0..=1.0).contains(&gamma) {
        return Err(Error::invalid("gamma", format!("{gamma} not in [0, 1]")));
    }
    Ok(())
}

fn check_lengths(u: &[f64], v: &[f64]) -> Result<()> {
    if u.len() != v.len() {
        return Err(Error::shape(format!(
            "cannot interpolate vectors of length {} and {}",
            u.len(),
            v.len()
        )));
    }
    Ok(())
}

/// `γ·u + (1 − γ)·v`.
pub fn lerp(u: &[f64], v: &[f64], gamma: f64) -> Result<Vec<f64>> {
    check_gamma(gamma)?;
    check_lengths(u, v)?;
    Ok(u.iter()
        .zip(v)
        .map(|(a, b)| gamma * a + (1.0 - gamma) * b)
        .collect())
}

fn norm(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

/// Spherical interpolation `sin((1−γ)θ)/sin θ · u + sin(γθ)/sin θ · v`,
/// θ the angle between `u` and `v`. Note the orientation: `γ = 0` gives `u`.
///
/// Near-parallel or antiparallel inputs (`sin θ < 1e-7`) use
/// `(1 − γ)·u + γ·v`, keeping the same orientation.
pub fn slerp(u: &[f64], v: &[f64], gamma: f64) -> Result<Vec<f64>> {
    check_gamma(gamma)?;
    check_lengths(u, v)?;
    let (nu, nv) = (norm(u), norm(v));
    if nu == 0.0 || nv == 0.0 {
        return Err(Error::invalid("slerp", "zero-norm input vector"));
    }
    let dot: f64 = u.iter().zip(v).map(|(a, b)| a * b).sum();
    let theta = (dot / (nu * nv)).clamp(-1.0, 1.0).acos();
    let sin_theta = theta.sin();
    if sin_theta < SLERP_DEGENERATE_SIN {
        return lerp(v, u, gamma);
    }
    let wu = ((1.0 - gamma) * theta).sin() / sin_theta;
    let wv = (gamma * theta).sin() / sin_theta;
    Ok(u.iter().zip(v).map(|(a, b)| wu * a + wv * b).collect())
}

/// Blends two latent pairs with `gamma` weighting `a`: the semantic parts
/// by [`lerp`], the stochastic parts flattened and [`slerp`]ed.
pub fn interpolate_pair(a: &LatentPair, b: &LatentPair, gamma: f64) -> Result<LatentPair> {
    check_gamma(gamma)?;
    if a.semantic.dim() != b.semantic.dim() {
        return Err(Error::shape(format!(
            "semantic dimensions differ: {} vs {}",
            a.semantic.dim(),
            b.semantic.dim()
        )));
    }
    let (sa, sb) = (&a.stochastic.0, &b.stochastic.0);
    sa.ensure_same_shape(sb, "stochastic codes")?;
    let semantic = lerp(a.semantic.values(), b.semantic.values(), gamma)?;
    let stochastic = slerp(sb.data(), sa.data(), gamma)?;
    Ok(LatentPair {
        semantic: SemanticCode::new(semantic),
        stochastic: StochasticCode(sa.with_data(stochastic)?),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn pair(sem: &[f64], sto: &[f64]) -> LatentPair {
        LatentPair {
            semantic: SemanticCode::new(sem.to_vec()),
            stochastic: StochasticCode(ImageBuffer::new(1, sto.len(), 1, sto.to_vec()).unwrap()),
        }
    }

    #[test]
    fn lerp_cases() {
        let (u, v) = ([0.3, -1.7, 2.0], [5.0, 0.1, -0.4]);
        assert_eq!(lerp(&u, &v, 1.0).unwrap(), u.to_vec());
        assert_eq!(lerp(&[2.0, 0.0], &[0.0, 2.0], 0.5).unwrap(), vec![1.0, 1.0]);
        assert!(lerp(&[1.0], &[1.0, 2.0], 0.5).is_err());
        assert!(lerp(&u, &v, 1.5).is_err());
        assert!(lerp(&u, &v, -0.1).is_err());
    }

    #[test]
    #[allow(clippy::approx_constant)]
    fn slerp_cases() {
        let (u, v) = ([0.3, -1.7, 2.0], [5.0, 0.1, -0.4]);
        assert_eq!(slerp(&u, &v, 0.0).unwrap(), u.to_vec());
        let mid = slerp(&[1.0, 0.0], &[0.0, 1.0], 0.5).unwrap();
        for m in mid {
            assert!((m - std::f64::consts::FRAC_1_SQRT_2).abs() < 1e-15);
            assert!((m - 0.7071068).abs() < 1e-7);
        }
        assert_eq!(slerp(&u, &u, 0.37).unwrap().len(), 3);
        for (a, b) in slerp(&u, &u, 0.37).unwrap().iter().zip(u) {
            assert!((a - b).abs() < 1e-15);
        }
        assert!(slerp(&[0.0, 0.0], &[1.0, 0.0], 0.5).is_err());
        assert!(slerp(&u, &v, 2.0).is_err());
    }

    #[test]
    fn slerp_antiparallel_falls_back_to_lerp() {
        let got = slerp(&[1.0, 0.0], &[-1.0, 0.0], 0.25).unwrap();
        assert_eq!(got, vec![0.5, 0.0]);
    }

    #[test]
    #[allow(clippy::approx_constant)]
    fn interpolate_pair_cases() {
        let a = pair(&[0.2, 0.9], &[1.0, -2.0, 0.5]);
        let same = interpolate_pair(&a, &a, 0.5).unwrap();
        assert!(same.stochastic.0.max_abs_diff(&a.stochastic.0) < 1e-15);
        assert_eq!(same.semantic, a.semantic);

        let a = pair(&[2.0, 0.0], &[1.0, 0.0]);
        let b = pair(&[0.0, 2.0], &[0.0, 1.0]);
        let mid = interpolate_pair(&a, &b, 0.5).unwrap();
        assert_eq!(mid.semantic.values(), &[1.0, 1.0]);
        for v in mid.stochastic.0.data() {
            assert!((v - 0.7071068).abs() < 1e-7);
        }

        // gamma weights the first pair for both components.
        let one = interpolate_pair(&a, &b, 1.0).unwrap();
        assert_eq!(one, a);
        let zero = interpolate_pair(&a, &b, 0.0).unwrap();
        assert_eq!(zero, b);

        let c = pair(&[1.0, 2.0, 3.0], &[1.0, 0.0]);
        assert!(matches!(
            interpolate_pair(&a, &c, 0.5),
            Err(Error::Shape(_))
        ));
    }
}
