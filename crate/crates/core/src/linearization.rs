//! Linearization at the point-vortex state, its inverse, and a columnwise finite-difference
//! Jacobian of the full residual.

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::functionals::{omega_star, xbar_star, Assembler, ResidualPair};
use crate::special::{c_alpha, MultiplierTable, Normalization};
use crate::types::{CosineSeries, Mode, PairGeometry, SineSeries, SolveState};

/// Tangent vector (β₁, β₂, h₁, h₂): β₁ perturbs Ω or U, β₂ perturbs x̄ or γ₂.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrivialTangent {
    pub beta1: f64,
    pub beta2: f64,
    pub h1: CosineSeries,
    pub h2: CosineSeries,
}

impl TrivialTangent {
    pub fn zeros(n: usize) -> Self {
        Self { beta1: 0.0, beta2: 0.0, h1: CosineSeries::zeros(n), h2: CosineSeries::zeros(n) }
    }

    /// Same ordering as [`SolveState::to_vector`].
    pub fn to_vector(&self) -> Vec<f64> {
        let mut v = vec![self.beta1, self.beta2];
        v.extend_from_slice(&self.h1.coeffs[1..]);
        v.extend_from_slice(&self.h2.coeffs[1..]);
        v
    }

    pub fn from_vector(n: usize, v: &[f64]) -> Self {
        let s = SolveState::from_vector(Mode::Corotating, n, v);
        Self { beta1: s.scalar1, beta2: s.scalar2, h1: s.p1, h2: s.p2 }
    }
}

/// Mode-1 coefficients of the scalar columns and the self-term strengths of the j ≥ 2 blocks.
struct TrivialBlocks {
    /// d r_i / d β_c on sin(x), indexed [i][c].
    scalar: [[f64; 2]; 2],
    /// Strength s_i with mode-j image s_i j σ_j sin(jx).
    strength: [f64; 2],
}

fn trivial_blocks(geometry: &PairGeometry, mode: Mode) -> Result<TrivialBlocks> {
    Ok(match mode {
        Mode::Corotating => {
            let om = omega_star(geometry)?;
            let xb = xbar_star(geometry)?;
            TrivialBlocks {
                scalar: [[-xb, -om], [xb - geometry.d, om]],
                strength: [-geometry.gamma1, -geometry.gamma2],
            }
        }
        Mode::Traveling => {
            let a = geometry.alpha;
            let c = a * c_alpha(a)? / (2.0 * geometry.d.powf(1.0 + a));
            // At the trivial state γ₂ = γ₁.
            TrivialBlocks { scalar: [[-1.0, c], [-1.0, 0.0]], strength: [geometry.gamma1, geometry.gamma1] }
        }
    })
}

/// Image of a tangent under the linearization at the trivial state (ε = 0, p = 0).
pub fn trivial_apply(t: &TrivialTangent, geometry: &PairGeometry, mode: Mode) -> Result<ResidualPair> {
    let n = t.h1.order();
    if t.h2.order() != n {
        return Err(Error::Invalid("tangent directions must share an order".into()));
    }
    let blocks = trivial_blocks(geometry, mode)?;
    let table = MultiplierTable::new(geometry.alpha, n, Normalization::Calibrated)?;
    let image = |i: usize, h: &CosineSeries| -> SineSeries {
        let mut c: Vec<f64> = (1..=n)
            .map(|j| blocks.strength[i] * j as f64 * table.get(j) * h.coeffs[j - 1])
            .collect();
        c[0] += blocks.scalar[i][0] * t.beta1 + blocks.scalar[i][1] * t.beta2;
        SineSeries { coeffs: c }
    };
    Ok(ResidualPair { r1: image(0, &t.h1), r2: image(1, &t.h2), parity_leak: 0.0 })
}

/// Solves trivial_apply(t) = k; mode-1 content of h₁, h₂ is set to zero.
pub fn trivial_inverse(k: &ResidualPair, geometry: &PairGeometry, mode: Mode) -> Result<TrivialTangent> {
    let n = k.r1.order();
    if k.r2.order() != n || n == 0 {
        return Err(Error::Invalid("residual components must share a positive order".into()));
    }
    if mode == Mode::Corotating && geometry.gamma1 + geometry.gamma2 == 0.0 {
        return Err(Error::SingularBlock("gamma1 + gamma2 = 0".into()));
    }
    let blocks = trivial_blocks(geometry, mode)?;
    let [[a, b], [c, d]] = blocks.scalar;
    let det = a * d - b * c;
    if det == 0.0 || !det.is_finite() {
        return Err(Error::SingularBlock(format!("mode-1 determinant {det}")));
    }
    let (k1, k2) = (k.r1.coeffs[0], k.r2.coeffs[0]);
    let beta1 = (d * k1 - b * k2) / det;
    let beta2 = (a * k2 - c * k1) / det;
    let table = MultiplierTable::new(geometry.alpha, n, Normalization::Calibrated)?;
    let mut h = [CosineSeries::zeros(n), CosineSeries::zeros(n)];
    for (i, r) in [&k.r1, &k.r2].into_iter().enumerate() {
        for j in 2..=n {
            let den = blocks.strength[i] * j as f64 * table.get(j);
            if den == 0.0 {
                return Err(Error::SingularBlock(format!("patch {} mode {j}", i + 1)));
            }
            h[i].coeffs[j - 1] = r.coeffs[j - 1] / den;
        }
    }
    let [h1, h2] = h;
    Ok(TrivialTangent { beta1, beta2, h1, h2 })
}

/// Dense matrix of [`trivial_apply`] in the unknown ordering of [`SolveState::to_vector`].
pub fn trivial_matrix(geometry: &PairGeometry, mode: Mode, n: usize) -> Result<DMatrix<f64>> {
    let mut out = DMatrix::zeros(2 * n, 2 * n);
    for c in 0..2 * n {
        let mut e = vec![0.0; 2 * n];
        e[c] = 1.0;
        let col = trivial_apply(&TrivialTangent::from_vector(n, &e), geometry, mode)?.to_vector();
        out.column_mut(c).copy_from_slice(&col);
    }
    Ok(out)
}

/// Central-difference Jacobian, one unknown at a time, with step `h`·max(1, |v|).
pub fn fd_jacobian(asm: &Assembler, geometry: &PairGeometry, state: &SolveState, h: f64) -> Result<DMatrix<f64>> {
    let n = state.order();
    let v = state.to_vector();
    let mut out = DMatrix::zeros(2 * n, 2 * n);
    for c in 0..2 * n {
        let step = h * v[c].abs().max(1.0);
        let probe = |sign: f64| -> Result<Vec<f64>> {
            let mut w = v.clone();
            w[c] += sign * step;
            Ok(asm.residual(geometry, &SolveState::from_vector(state.mode, n, &w))?.to_vector())
        };
        let (rp, rm) = (probe(1.0)?, probe(-1.0)?);
        for (r, (p, m)) in rp.iter().zip(&rm).enumerate() {
            out[(r, c)] = (p - m) / (2.0 * step);
        }
    }
    if out.iter().any(|x| !x.is_finite()) {
        return Err(Error::NonFinite("probing Jacobian columns".into()));
    }
    Ok(out)
}
