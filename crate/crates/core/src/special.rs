//! Gamma function, the kernel constant C_α and the spectral multipliers σ_j.

use serde::{Deserialize, Serialize};
use std::f64::consts::PI;

use crate::error::{Error, Result};

const LANCZOS_G: f64 = 7.0;
const LANCZOS: [f64; 9] = [
    0.999_999_999_999_809_93,
    676.520_368_121_885_1,
    -1_259.139_216_722_402_8,
    771.323_428_777_653_13,
    -176.615_029_162_140_59,
    12.507_343_278_686_905,
    -0.138_571_095_265_720_12,
    9.984_369_578_019_571_6e-6,
    1.505_632_735_149_311_6e-7,
];

fn check_pole(x: f64) -> Result<()> {
    if !x.is_finite() {
        return Err(Error::Domain(format!("gamma of non-finite argument {x}")));
    }
    if x <= 0.0 && x == x.floor() {
        return Err(Error::Pole(x));
    }
    Ok(())
}

/// Lanczos sum and shifted argument for x ≥ 1/2.
fn lanczos(x: f64) -> (f64, f64) {
    let z = x - 1.0;
    let mut sum = LANCZOS[0];
    for (i, c) in LANCZOS.iter().enumerate().skip(1) {
        sum += c / (z + i as f64);
    }
    (sum, z + LANCZOS_G + 0.5)
}

/// Euler gamma function Γ(x) for real x away from the poles.
pub fn gamma_fn(x: f64) -> Result<f64> {
    check_pole(x)?;
    if x < 0.5 {
        return Ok(PI / ((PI * x).sin() * gamma_fn(1.0 - x)?));
    }
    if x > 171.7 {
        return Ok(f64::INFINITY);
    }
    let (sum, t) = lanczos(x);
    // t^{z+1/2} split in two halves to delay overflow.
    let half = t.powf(0.5 * (x - 0.5));
    Ok((2.0 * PI).sqrt() * half * (half * (-t).exp()) * sum)
}

/// ln|Γ(x)| together with the sign of Γ(x).
pub fn ln_gamma(x: f64) -> Result<(f64, f64)> {
    check_pole(x)?;
    if x < 0.5 {
        let s = (PI * x).sin();
        let (lg, sg) = ln_gamma(1.0 - x)?;
        return Ok(((PI / s.abs()).ln() - lg, s.signum() * sg));
    }
    let (sum, t) = lanczos(x);
    Ok((0.5 * (2.0 * PI).ln() + (x - 0.5) * t.ln() - t + sum.ln(), 1.0))
}

fn check_alpha(alpha: f64) -> Result<()> {
    if !(alpha > 0.0 && alpha < 2.0) {
        return Err(Error::Domain(format!("alpha = {alpha} outside (0, 2)")));
    }
    Ok(())
}

/// C_α = Γ(α/2) / (2^{1−α} Γ(1 − α/2)).
pub fn c_alpha(alpha: f64) -> Result<f64> {
    check_alpha(alpha)?;
    Ok(gamma_fn(alpha / 2.0)? / (2f64.powf(1.0 - alpha) * gamma_fn(1.0 - alpha / 2.0)?))
}

/// Fourier moments of the periodic kernel relative to the mean,
/// ν_k = ∫− (cos(ku) − 1) |2 sin(u/2)|^{−α} du for k = 0..=kmax.
///
/// Finite for every α ∈ (0, 2), including α = 1 where each moment alone diverges.
pub fn kernel_moment_differences(alpha: f64, kmax: usize) -> Result<Vec<f64>> {
    check_alpha(alpha)?;
    let a = alpha / 2.0;
    let mut out = Vec::with_capacity(kmax + 1);
    out.push(0.0);
    if alpha == 1.0 {
        let mut h = 0.0;
        for i in 0..kmax {
            h += 1.0 / (i as f64 + 0.5);
            out.push(-h / PI);
        }
        return Ok(out);
    }
    let pref = gamma_fn(2.0 - alpha)? / gamma_fn(1.0 - a)?.powi(2);
    let mut s = 0.0;
    for i in 0..kmax {
        s += ((alpha - 1.0) / (i as f64 + 1.0 - a)).ln_1p();
        out.push(pref * s.exp_m1() / (1.0 - alpha));
    }
    Ok(out)
}

/// Normalization of the multiplier σ_j.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Normalization {
    /// Eigenvalue of the linearized self-interaction operator (default).
    #[default]
    Calibrated,
    /// Printed form: Σ_{i≤j} 8/(2i−1) at α = 1; 2^α Γ(1−α)/(Γ(α/2)Γ(1−α/2))(…) otherwise.
    Raw,
    /// Printed restatement: (2/π) Σ_{i≤j} 1/(2i−1) at α = 1; with the extra 2π otherwise.
    TwoOverPi,
}

/// Spectral multiplier σ_j.
///
/// With [`Normalization::Calibrated`] the linearized self term of a patch of strength γ maps
/// cos(jx) to −γ j σ_j sin(jx); σ_1 = 0 because mode 1 is a translation.
pub fn sigma_j(alpha: f64, j: usize, normalization: Normalization) -> Result<f64> {
    if j == 0 {
        return Err(Error::Domain("sigma_j requires j >= 1".into()));
    }
    let nu = kernel_moment_differences(alpha, j)?;
    Ok(match normalization {
        Normalization::Calibrated => c_alpha(alpha)? * (nu[1] - nu[j]),
        Normalization::Raw if alpha == 1.0 => harmonic_odd(j) * 8.0,
        Normalization::Raw => -2f64.powf(alpha) * nu[j],
        Normalization::TwoOverPi if alpha == 1.0 => harmonic_odd(j) * 2.0 / PI,
        Normalization::TwoOverPi => -2.0 * PI * 2f64.powf(alpha) * nu[j],
    })
}

fn harmonic_odd(j: usize) -> f64 {
    (1..=j).map(|i| 1.0 / (2 * i - 1) as f64).sum()
}

/// Calibrated σ_j from log-gamma differences with sign tracking (α ≠ 1):
/// 2^{α−1} Γ(1−α)/Γ(1−α/2)² (Γ(1+α/2)/Γ(2−α/2) − Γ(j+α/2)/Γ(j+1−α/2)).
pub fn sigma_j_log_gamma(alpha: f64, j: usize) -> Result<f64> {
    check_alpha(alpha)?;
    if alpha == 1.0 || j == 0 {
        return Err(Error::Domain("log-gamma route needs alpha != 1 and j >= 1".into()));
    }
    let a = alpha / 2.0;
    let (l_num, s_num) = ln_gamma(1.0 - alpha)?;
    let (l_den, _) = ln_gamma(1.0 - a)?;
    let pref = s_num * ((alpha - 1.0) * 2f64.ln() + l_num - 2.0 * l_den).exp();
    let ratio = |k: f64| -> Result<f64> { Ok((ln_gamma(k + a)?.0 - ln_gamma(k + 1.0 - a)?.0).exp()) };
    Ok(pref * (ratio(1.0)? - ratio(j as f64)?))
}

/// Calibrated σ_j from direct gamma ratios (α ≠ 1); overflows for j ≳ 170.
pub fn sigma_j_direct(alpha: f64, j: usize) -> Result<f64> {
    check_alpha(alpha)?;
    if alpha == 1.0 || j == 0 {
        return Err(Error::Domain("direct route needs alpha != 1 and j >= 1".into()));
    }
    let a = alpha / 2.0;
    let g = gamma_fn;
    let pref = 2f64.powf(alpha - 1.0) * g(1.0 - alpha)? / g(1.0 - a)?.powi(2);
    let jf = j as f64;
    Ok(pref * (g(1.0 + a)? / g(2.0 - a)? - g(jf + a)? / g(jf + 1.0 - a)?))
}

/// σ_1..σ_N for one α.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MultiplierTable {
    pub alpha: f64,
    /// σ_1..σ_N.
    pub sigma: Vec<f64>,
    pub normalization: Normalization,
}

impl MultiplierTable {
    pub fn new(alpha: f64, n: usize, normalization: Normalization) -> Result<Self> {
        let sigma = match normalization {
            Normalization::Calibrated => {
                let nu = kernel_moment_differences(alpha, n)?;
                let c = c_alpha(alpha)?;
                (1..=n).map(|j| c * (nu[1] - nu[j])).collect()
            }
            _ => (1..=n).map(|j| sigma_j(alpha, j, normalization)).collect::<Result<_>>()?,
        };
        Ok(Self { alpha, sigma, normalization })
    }

    /// σ_j for 1 ≤ j ≤ N.
    pub fn get(&self, j: usize) -> f64 {
        self.sigma[j - 1]
    }
}
