//! Geometry of the complex-circle x Euclidean product manifold.
//!
//! Weights live on `{w : |w_l| = 1}`, whose tangent space at `w` is
//! `{xi : Re(xi_l conj(w_l)) = 0}`; positions live in flat `R^L`. Tangent
//! vectors carry both parts and pair through
//! `<a, b> = Re(a_w^H b_w) + a_p^T b_p`.

#[allow(unused_imports)]
use num_traits::Float;
use alloc::vec::Vec;

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::objective::BeamformerPoint;

/// Direction in the product tangent space.
#[derive(Debug, Clone, PartialEq)]
pub struct TangentVector {
    pub w: Vec<Complex64>,
    pub p: Vec<f64>,
}

impl TangentVector {
    pub fn zeros(len: usize) -> Self {
        Self {
            w: alloc::vec![Complex64::new(0.0, 0.0); len],
            p: alloc::vec![0.0; len],
        }
    }

    /// `Re(a_w^H b_w) + a_p^T b_p`; lengths are assumed equal.
    pub fn dot(&self, other: &Self) -> f64 {
        let w: f64 = self.w.iter().zip(&other.w).map(|(a, b)| (a.conj() * b).re).sum();
        let p: f64 = self.p.iter().zip(&other.p).map(|(a, b)| a * b).sum();
        w + p
    }

    pub fn norm(&self) -> f64 {
        self.dot(self).sqrt()
    }

    pub fn scaled(&self, s: f64) -> Self {
        Self {
            w: self.w.iter().map(|z| z * s).collect(),
            p: self.p.iter().map(|x| x * s).collect(),
        }
    }

    /// `self + s * other`.
    pub fn add_scaled(&self, s: f64, other: &Self) -> Self {
        Self {
            w: self.w.iter().zip(&other.w).map(|(a, b)| a + b * s).collect(),
            p: self.p.iter().zip(&other.p).map(|(a, b)| a + b * s).collect(),
        }
    }
}

/// Checked inner product.
pub fn inner_product(a: &TangentVector, b: &TangentVector) -> Result<f64> {
    for (what, x, y) in [("tangent w-part", a.w.len(), b.w.len()), ("tangent p-part", a.p.len(), b.p.len())] {
        if x != y {
            return Err(Error::LengthMismatch {
                what,
                expected: x,
                got: y,
            });
        }
    }
    Ok(a.dot(b))
}

/// Removes the radial component: `v - Re(v ⊙ conj(w)) ⊙ w`.
pub fn project_to_tangent(w: &[Complex64], v: &[Complex64]) -> Vec<Complex64> {
    w.iter()
        .zip(v)
        .map(|(wl, vl)| vl - wl * (vl * wl.conj()).re)
        .collect()
}

/// Projects the weight part of a Euclidean gradient; the position part is
/// already a tangent vector.
pub fn riemannian_gradient(point: &BeamformerPoint, euclid_w: &[Complex64], euclid_p: &[f64]) -> TangentVector {
    TangentVector {
        w: project_to_tangent(&point.weights, euclid_w),
        p: euclid_p.to_vec(),
    }
}

/// Elementwise modulus normalization of the weights; positions pass through
/// untouched, feasible or not.
pub fn retract(w_hat: &[Complex64], p_hat: &[f64]) -> Result<BeamformerPoint> {
    if w_hat.len() != p_hat.len() {
        return Err(Error::LengthMismatch {
            what: "retraction",
            expected: p_hat.len(),
            got: w_hat.len(),
        });
    }
    let mut weights = Vec::with_capacity(w_hat.len());
    for (i, z) in w_hat.iter().enumerate() {
        let r = z.norm();
        if r == 0.0 || !r.is_finite() {
            return Err(Error::ZeroModulus(i));
        }
        weights.push(z / r);
    }
    Ok(BeamformerPoint {
        weights,
        positions: p_hat.to_vec(),
    })
}

/// Carries a tangent vector to the tangent space at `w_new` by
/// re-projection. The position part is copied bit for bit.
pub fn transport(w_new: &[Complex64], d: &TangentVector) -> TangentVector {
    TangentVector {
        w: project_to_tangent(w_new, &d.w),
        p: d.p.clone(),
    }
}

/// `max_l |Re(xi_l conj(w_l))|`, zero for a valid tangent vector.
pub fn tangent_residual(w: &[Complex64], xi: &[Complex64]) -> f64 {
    w.iter()
        .zip(xi)
        .map(|(wl, x)| (x * wl.conj()).re.abs())
        .fold(0.0, f64::max)
}

/// Constraint set of the weight vector. The proposed scheme uses
/// [`ConstantModulus`]; the fully digital baselines swap in a power sphere
/// while keeping the rest of the solver.
pub trait WeightSpace {
    fn project(&self, w: &[Complex64], v: &[Complex64]) -> Vec<Complex64>;
    fn retract(&self, w_hat: &[Complex64]) -> Result<Vec<Complex64>>;
    /// Distance of `w` from the constraint set.
    fn constraint_error(&self, w: &[Complex64]) -> f64;
    /// Size of the normal component of `xi` at `w`.
    fn tangent_residual(&self, w: &[Complex64], xi: &[Complex64]) -> f64;
}

/// The complex circle `|w_l| = 1`.
#[derive(Debug, Clone, Copy, Default)]
pub struct ConstantModulus;

impl WeightSpace for ConstantModulus {
    fn project(&self, w: &[Complex64], v: &[Complex64]) -> Vec<Complex64> {
        project_to_tangent(w, v)
    }

    fn retract(&self, w_hat: &[Complex64]) -> Result<Vec<Complex64>> {
        w_hat
            .iter()
            .enumerate()
            .map(|(i, z)| {
                let r = z.norm();
                if r == 0.0 || !r.is_finite() {
                    Err(Error::ZeroModulus(i))
                } else {
                    Ok(z / r)
                }
            })
            .collect()
    }

    fn constraint_error(&self, w: &[Complex64]) -> f64 {
        w.iter().map(|z| (z.norm() - 1.0).abs()).fold(0.0, f64::max)
    }

    fn tangent_residual(&self, w: &[Complex64], xi: &[Complex64]) -> f64 {
        tangent_residual(w, xi)
    }
}
