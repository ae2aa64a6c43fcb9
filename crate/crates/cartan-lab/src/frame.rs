//! Vector-field calculus in the adapted frame (δ_i, ∂̇^i).
//!
//! A [`JetField`] is a vector field near the working point, written on the
//! adapted frame with jet-valued component functions. Brackets expand the
//! frame brackets
//!
//! ```text
//! [δ_i, δ_j]  = R_kij ∂̇^k,   [δ_i, ∂̇^j] = -(∂̇^j N_ik) ∂̇^k,   [∂̇^i, ∂̇^j] = 0
//! ```
//!
//! together with the Leibniz terms from the component functions, so the
//! Nijenhuis tensor and the six-term Levi-Civita formula evaluate exactly
//! (to the jet order) without any symbolic work.

use crate::cartan::CartanTensors;
use crate::jet::JetScalar;
use crate::lift::{FrameVector, LiftJets};
use crate::linalg::sum;
use crate::scalar::Scalar;

/// Frame index: `0..n` are the horizontal δ_i, `n..2n` the vertical ∂̇^i.
pub fn is_horizontal(a: usize, n: usize) -> bool {
    a < n
}

/// A vector field `a^i δ_i + b_i ∂̇^i` with jet component functions.
#[derive(Clone)]
pub struct JetField {
    pub h: Vec<JetScalar>,
    pub v: Vec<JetScalar>,
}

impl JetField {
    pub fn zero(t: &CartanTensors) -> JetField {
        let z = t.k2.constant(0.0);
        JetField {
            h: vec![z.clone(); t.dim()],
            v: vec![z; t.dim()],
        }
    }

    /// The frame basis field for index `a` (constant components).
    pub fn basis(t: &CartanTensors, a: usize) -> JetField {
        let n = t.dim();
        let mut field = JetField::zero(t);
        if a < n {
            field.h[a] = t.k2.constant(1.0);
        } else {
            field.v[a - n] = t.k2.constant(1.0);
        }
        field
    }

    /// A field with constant components given by a frame vector.
    pub fn constant(t: &CartanTensors, fv: &FrameVector) -> JetField {
        JetField {
            h: fv.h.iter().map(|&c| t.k2.constant(c)).collect(),
            v: fv.v.iter().map(|&c| t.k2.constant(c)).collect(),
        }
    }

    /// Component function for a flat frame index in `0..2n`.
    pub fn component(&self, c: usize) -> &JetScalar {
        let n = self.h.len();
        if c < n {
            &self.h[c]
        } else {
            &self.v[c - n]
        }
    }

    pub fn values(&self) -> FrameVector {
        FrameVector {
            h: self.h.iter().map(|c| c.value()).collect(),
            v: self.v.iter().map(|c| c.value()).collect(),
        }
    }

    pub fn add(&self, other: &JetField) -> JetField {
        JetField {
            h: self.h.iter().zip(&other.h).map(|(a, b)| a + b).collect(),
            v: self.v.iter().zip(&other.v).map(|(a, b)| a + b).collect(),
        }
    }

    pub fn sub(&self, other: &JetField) -> JetField {
        JetField {
            h: self.h.iter().zip(&other.h).map(|(a, b)| a - b).collect(),
            v: self.v.iter().zip(&other.v).map(|(a, b)| a - b).collect(),
        }
    }

    pub fn scale(&self, f: &JetScalar) -> JetField {
        JetField {
            h: self.h.iter().map(|c| f * c).collect(),
            v: self.v.iter().map(|c| f * c).collect(),
        }
    }

    /// Apply this field to a scalar function: `W(f) = a^i δ_i f + b_i ∂̇^i f`.
    pub fn apply_to(&self, t: &CartanTensors, f: &JetScalar) -> JetScalar {
        let n = t.dim();
        let horizontal = sum(n, |i| &self.h[i] * &t.horizontal(f, i));
        let vertical = sum(n, |i| &self.v[i] * &t.vertical(f, i));
        horizontal + vertical
    }
}

/// Frame derivative along a basis direction: δ_a for a < n, ∂̇^{a-n} above.
pub fn frame_derivative(t: &CartanTensors, a: usize, f: &JetScalar) -> JetScalar {
    let n = t.dim();
    if a < n {
        t.horizontal(f, a)
    } else {
        t.vertical(f, a - n)
    }
}

/// Vertical components of the bracket of two basis fields (all three frame
/// brackets are purely vertical).
pub fn basis_bracket_vertical(t: &CartanTensors, a: usize, b: usize) -> Vec<JetScalar> {
    let n = t.dim();
    match (a < n, b < n) {
        (true, true) => (0..n).map(|k| t.r_curv[k][a][b].clone()).collect(),
        (true, false) => {
            let j = b - n;
            (0..n).map(|k| -&t.nonlinear_dp[j][a][k]).collect()
        }
        (false, true) => {
            let i = a - n;
            (0..n).map(|k| t.nonlinear_dp[i][b][k].clone()).collect()
        }
        (false, false) => vec![t.k2.constant(0.0); n],
    }
}

/// Lie bracket of two jet fields.
pub fn bracket(t: &CartanTensors, w1: &JetField, w2: &JetField) -> JetField {
    let n = t.dim();
    let h: Vec<JetScalar> = (0..n)
        .map(|j| &w1.apply_to(t, &w2.h[j]) - &w2.apply_to(t, &w1.h[j]))
        .collect();
    let v: Vec<JetScalar> = (0..n)
        .map(|k| {
            let leibniz = &w1.apply_to(t, &w2.v[k]) - &w2.apply_to(t, &w1.v[k]);
            let horizontal_pair = sum(n, |i| {
                &w1.h[i] * &sum(n, |j| &w2.h[j] * &t.r_curv[k][i][j])
            });
            // [δ_i, ∂̇^j] terms from both orderings
            let mixed = sum(n, |i| {
                let first = &w1.h[i] * &sum(n, |j| &w2.v[j] * &t.nonlinear_dp[j][i][k]);
                let second = &w2.h[i] * &sum(n, |j| &w1.v[j] * &t.nonlinear_dp[j][i][k]);
                &second - &first
            });
            &(&leibniz + &horizontal_pair) + &mixed
        })
        .collect();
    JetField { h, v }
}

/// The lifted metric evaluated on two jet fields.
pub fn metric_pair(t: &CartanTensors, lift: &LiftJets, w1: &JetField, w2: &JetField) -> JetScalar {
    let n = t.dim();
    let horizontal = sum(n, |i| {
        &w1.h[i] * &sum(n, |j| &lift.gl[i][j] * &w2.h[j])
    });
    let vertical = sum(n, |i| {
        &w1.v[i] * &sum(n, |j| &lift.gu[i][j] * &w2.v[j])
    });
    horizontal + vertical
}

/// The almost complex structure on a jet field:
/// `J(δ_i) = G_ik ∂̇^k`, `J(∂̇^i) = -G^ik δ_k`.
pub fn apply_j(t: &CartanTensors, lift: &LiftJets, w: &JetField) -> JetField {
    let n = t.dim();
    JetField {
        h: (0..n)
            .map(|k| -&sum(n, |i| &w.v[i] * &lift.gu[i][k]))
            .collect(),
        v: (0..n)
            .map(|k| sum(n, |i| &w.h[i] * &lift.gl[i][k]))
            .collect(),
    }
}

/// Nijenhuis tensor `N_J(X, Y) = [JX, JY] - J[JX, Y] - J[X, JY] - [X, Y]`.
pub fn nijenhuis_field(
    t: &CartanTensors,
    lift: &LiftJets,
    x: &JetField,
    y: &JetField,
) -> JetField {
    let jx = apply_j(t, lift, x);
    let jy = apply_j(t, lift, y);
    let first = bracket(t, &jx, &jy);
    let second = apply_j(t, lift, &bracket(t, &jx, y));
    let third = apply_j(t, lift, &bracket(t, x, &jy));
    let fourth = bracket(t, x, y);
    first.sub(&second).sub(&third).sub(&fourth)
}
