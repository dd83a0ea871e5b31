//! ℓp norms, dual norms, gradients of norm powers, Bregman divergences, and
//! the separable mirror-map / duality-map inversions used by every solver.
//!
//! Throughout, the primal exponent is restricted to `p ≥ 2` (except
//! [`dual_exponent`], which accepts any `p ≥ 1`); `p = 1` appears only as a
//! dual exponent. At coordinates `z_i = 0` with `p > 2`, the signed power
//! `|z_i|^{p-2} z_i` is defined as 0 (continuous extension).

use crate::error::{Error, Result};
use nalgebra::DVector;

/// Exponent pair (p, p*) with 1/p + 1/p* = 1.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GeometryParams {
    pub p: f64,
    pub dual_p: f64,
}

impl GeometryParams {
    pub fn new(p: f64) -> Result<Self> {
        Ok(Self {
            p,
            dual_p: dual_exponent(p)?,
        })
    }
}

/// Convex potential h whose Bregman divergence drives the mirror machinery.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum PotentialSpec {
    /// h(z) = ‖z‖_p^p
    LpPowP { p: f64 },
    /// h(z) = ‖z‖_p^r
    LpPowR { p: f64, r: f64 },
    /// h(z) = ‖z‖_2^2
    Sq,
}

impl PotentialSpec {
    pub fn value(&self, z: &DVector<f64>) -> Result<f64> {
        match *self {
            PotentialSpec::LpPowP { p } => Ok(lp_norm(z, p)?.powf(p)),
            PotentialSpec::LpPowR { p, r } => Ok(lp_norm(z, p)?.powf(r)),
            PotentialSpec::Sq => Ok(z.norm_squared()),
        }
    }

    pub fn grad(&self, z: &DVector<f64>) -> Result<DVector<f64>> {
        match *self {
            PotentialSpec::LpPowP { p } => grad_norm_power(z, p, p),
            PotentialSpec::LpPowR { p, r } => grad_norm_power(z, p, r),
            PotentialSpec::Sq => Ok(z * 2.0),
        }
    }
}

/// Dual exponent p* = p/(p−1); `+∞` for p = 1.
pub fn dual_exponent(p: f64) -> Result<f64> {
    if !p.is_finite() || p < 1.0 {
        return Err(Error::Domain(format!("dual exponent needs p >= 1, got {p}")));
    }
    if p == 1.0 {
        Ok(f64::INFINITY)
    } else {
        Ok(p / (p - 1.0))
    }
}

/// ℓp norm (Σ|z_i|^p)^{1/p}; for p = +∞, max_i |z_i|.
pub fn lp_norm(z: &DVector<f64>, p: f64) -> Result<f64> {
    if z.iter().any(|v| !v.is_finite()) {
        return Err(Error::Input("non-finite coordinate in lp_norm".into()));
    }
    if p.is_infinite() && p > 0.0 {
        return Ok(z.iter().fold(0.0f64, |m, v| m.max(v.abs())));
    }
    if !(p >= 1.0) {
        return Err(Error::Domain(format!("lp_norm needs p >= 1, got {p}")));
    }
    if p == 1.0 {
        return Ok(z.iter().map(|v| v.abs()).sum());
    }
    if p == 2.0 {
        return Ok(z.norm());
    }
    // Scale by the max coordinate to avoid overflow/underflow of |z_i|^p.
    let m = z.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    if m == 0.0 {
        return Ok(0.0);
    }
    let s: f64 = z.iter().map(|v| (v.abs() / m).powf(p)).sum();
    Ok(m * s.powf(1.0 / p))
}

/// Norm of `z` in the exponent dual to p (‖z‖_{p*}).
pub fn dual_norm(z: &DVector<f64>, p: f64) -> Result<f64> {
    lp_norm(z, dual_exponent(p)?)
}

/// Component-wise signed power: sign(v)·|v|^e, with 0 ↦ 0.
pub(crate) fn signed_pow(v: f64, e: f64) -> f64 {
    if v == 0.0 {
        0.0
    } else {
        v.signum() * v.abs().powf(e)
    }
}

/// The vector z^{[p−1]} with components |z_i|^{p−2} z_i.
pub(crate) fn signed_pow_vec(z: &DVector<f64>, e: f64) -> DVector<f64> {
    z.map(|v| signed_pow(v, e))
}

/// Gradient of ‖z‖_p^r:  r‖z‖_p^{r−p} z^{[p−1]}.
///
/// At z = 0 the continuous extension 0 is returned for r > 1; r ≤ 1 is a
/// genuine singularity.
pub fn grad_norm_power(z: &DVector<f64>, p: f64, r: f64) -> Result<DVector<f64>> {
    if !(p >= 2.0) {
        return Err(Error::Domain(format!("grad_norm_power needs p >= 2, got {p}")));
    }
    if !(r >= 1.0) {
        return Err(Error::Domain(format!("grad_norm_power needs r >= 1, got {r}")));
    }
    let n = lp_norm(z, p)?;
    if n == 0.0 {
        return if r > 1.0 {
            Ok(DVector::zeros(z.len()))
        } else {
            Err(Error::Singularity(
                "gradient of ‖z‖_p^r at z = 0 with r <= 1".into(),
            ))
        };
    }
    Ok(signed_pow_vec(z, p - 1.0) * (r * n.powf(r - p)))
}

/// Bregman divergence ω_h(a, b) = h(a) − h(b) − ⟨∇h(b), a − b⟩.
pub fn bregman(h: &PotentialSpec, a: &DVector<f64>, b: &DVector<f64>) -> Result<f64> {
    if a.len() != b.len() {
        return Err(Error::Input(format!(
            "bregman dimension mismatch: {} vs {}",
            a.len(),
            b.len()
        )));
    }
    let gb = h.grad(b)?;
    Ok(h.value(a)? - h.value(b)? - gb.dot(&(a - b)))
}

/// ∇(‖z‖_p^p) component-wise: p|z_i|^{p−1} sign(z_i).
pub fn mirror_map(z: &DVector<f64>, p: f64) -> DVector<f64> {
    signed_pow_vec(z, p - 1.0) * p
}

/// Inverse of [`mirror_map`]: component-wise sign(g_i)(|g_i|/p)^{1/(p−1)}.
pub fn inverse_mirror_map(g: &DVector<f64>, p: f64) -> DVector<f64> {
    g.map(|v| signed_pow(v / p, 1.0 / (p - 1.0)))
}

/// The unique u with ∇(c‖u‖_p^{s+1}) = g.
///
/// Magnitude first: ‖u‖_p = (‖g‖_{p*}/((s+1)c))^{1/s}; then the direction by
/// component-wise inversion of u^{[p−1]}.
pub fn duality_map_inverse(g: &DVector<f64>, p: f64, s: u32, c: f64) -> Result<DVector<f64>> {
    if c <= 0.0 {
        return Err(Error::Domain(format!("duality_map_inverse needs c > 0, got {c}")));
    }
    if s < 1 {
        return Err(Error::Domain("duality_map_inverse needs s >= 1".into()));
    }
    if !(p >= 2.0) {
        return Err(Error::Domain(format!("duality_map_inverse needs p >= 2, got {p}")));
    }
    let gn = dual_norm(g, p)?;
    if gn == 0.0 {
        return Ok(DVector::zeros(g.len()));
    }
    let s = s as f64;
    let un = (gn / ((s + 1.0) * c)).powf(1.0 / s);
    // ∇(c‖u‖^{s+1}) = c(s+1)‖u‖^{s+1−p} u^{[p−1]} = g  ⇒  u^{[p−1]} = g / (c(s+1)‖u‖^{s+1−p})
    let scale = c * (s + 1.0) * un.powf(s + 1.0 - p);
    Ok(g.map(|v| signed_pow(v / scale, 1.0 / (p - 1.0))))
}
