//! Per-iteration implicit equations behind the half steps: the Euclidean
//! regularized-Taylor root, its ℓp power-regularized variant, the Bregman
//! regularized root, and the closed-form mirror-descent full step.

use crate::error::{Error, Result};
use crate::geometry::{
    bregman, dual_norm, duality_map_inverse, grad_norm_power, inverse_mirror_map, mirror_map,
    PotentialSpec,
};
use crate::oracle::{jacobian, taylor, Operator};
use nalgebra::{DMatrix, DVector};

/// Inner-solver controls shared by the implicit half-step equations.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SubproblemSettings {
    /// Residual dual-norm target. `None` uses 1e−10 · max(1, ‖F(z_k)‖_{p*}).
    pub tolerance: Option<f64>,
    pub max_inner_iterations: usize,
    /// Newton backtracking factor in (0, 1].
    pub damping: f64,
}

impl Default for SubproblemSettings {
    fn default() -> Self {
        Self {
            tolerance: None,
            max_inner_iterations: 100,
            damping: 0.5,
        }
    }
}

impl SubproblemSettings {
    pub fn validate(&self) -> Result<()> {
        if let Some(t) = self.tolerance {
            if !(t > 0.0) {
                return Err(Error::Input(format!(
                    "subproblem tolerance must be positive, got {t}"
                )));
            }
        }
        if self.max_inner_iterations < 1 {
            return Err(Error::Input("max_inner_iterations must be >= 1".into()));
        }
        if !(self.damping > 0.0 && self.damping <= 1.0) {
            return Err(Error::Input(format!(
                "damping must lie in (0, 1], got {}",
                self.damping
            )));
        }
        Ok(())
    }

    /// Residual target given ‖F(z_k)‖_{p*}.
    pub fn effective_tolerance(&self, fz_dual_norm: f64) -> f64 {
        self.tolerance
            .unwrap_or(1e-10 * fz_dual_norm.max(1.0))
    }
}

pub(crate) fn factorial(s: u32) -> f64 {
    (2..=s).map(|i| i as f64).product::<f64>().max(1.0)
}

// ---------------------------------------------------------------------------
// Generic damped Newton on a residual map, with coefficient continuation
// ---------------------------------------------------------------------------

struct NewtonOutcome {
    z: DVector<f64>,
    residual: f64,
    converged: bool,
}

/// Central-difference Jacobian of a residual map (the residual mixes oracle
/// derivatives with regularizer terms, so differentiate it numerically).
fn residual_jacobian<R>(residual: &R, z: &DVector<f64>) -> Result<DMatrix<f64>>
where
    R: Fn(&DVector<f64>) -> Result<DVector<f64>>,
{
    let d = z.len();
    let h = 1e-7 * z.amax().max(1.0);
    let mut j = DMatrix::zeros(d, d);
    for col in 0..d {
        let mut zp = z.clone();
        let mut zm = z.clone();
        zp[col] += h;
        zm[col] -= h;
        let diff = (residual(&zp)? - residual(&zm)?) / (2.0 * h);
        j.set_column(col, &diff);
    }
    Ok(j)
}

/// Damped Newton on R(z) = 0, measuring the residual in the ℓ_{p*} norm.
/// Backtracks by `damping` until the residual decreases; stalls return the
/// best iterate with `converged = false`.
fn damped_newton<R>(
    residual: &R,
    z_init: &DVector<f64>,
    p: f64,
    tol: f64,
    settings: &SubproblemSettings,
) -> Result<NewtonOutcome>
where
    R: Fn(&DVector<f64>) -> Result<DVector<f64>>,
{
    let mut z = z_init.clone();
    let mut r = residual(&z)?;
    let mut rn = dual_norm(&r, p)?;
    let mut best = NewtonOutcome {
        z: z.clone(),
        residual: rn,
        converged: rn <= tol,
    };
    if best.converged {
        return Ok(best);
    }
    for _ in 0..settings.max_inner_iterations {
        let j = residual_jacobian(residual, &z)?;
        let step = match j.clone().lu().solve(&(-&r)) {
            Some(s) if s.iter().all(|v| v.is_finite()) => s,
            _ => {
                // Singular residual Jacobian: retry with a tiny Tikhonov shift.
                let d = z.len();
                let shifted = j + DMatrix::<f64>::identity(d, d) * 1e-12;
                match shifted.lu().solve(&(-&r)) {
                    Some(s) if s.iter().all(|v| v.is_finite()) => s,
                    _ => return Ok(best),
                }
            }
        };
        // Backtracking line search on the residual dual norm.
        let mut t = 1.0;
        let mut accepted = None;
        while t >= 1e-12 {
            let z_try = &z + &step * t;
            let r_try = residual(&z_try)?;
            let rn_try = dual_norm(&r_try, p)?;
            if rn_try < rn {
                accepted = Some((z_try, r_try, rn_try));
                break;
            }
            t *= settings.damping;
        }
        match accepted {
            Some((z_new, r_new, rn_new)) => {
                z = z_new;
                r = r_new;
                rn = rn_new;
                if rn < best.residual {
                    best = NewtonOutcome {
                        z: z.clone(),
                        residual: rn,
                        converged: rn <= tol,
                    };
                }
                if rn <= tol {
                    return Ok(NewtonOutcome {
                        z,
                        residual: rn,
                        converged: true,
                    });
                }
            }
            None => return Ok(best), // stalled
        }
    }
    Ok(best)
}

/// Newton with a homotopy fallback: if the direct solve from `z_init`
/// stalls, re-solve with the regularization coefficient inflated by 2^24
/// (which pins the root near z_k) and walk the factor back down to 1,
/// warm-starting each stage. Mid stages use a loose tolerance; the final
/// stage must meet `tol`.
fn newton_with_continuation<R>(
    residual: &R,
    z_init: &DVector<f64>,
    p: f64,
    tol: f64,
    settings: &SubproblemSettings,
) -> Result<DVector<f64>>
where
    R: Fn(f64, &DVector<f64>) -> Result<DVector<f64>>,
{
    let direct = damped_newton(&|z: &DVector<f64>| residual(1.0, z), z_init, p, tol, settings)?;
    if direct.converged {
        return Ok(direct.z);
    }
    let mut z = z_init.clone();
    let mut best_residual = direct.residual;
    for stage in (0..=24i32).rev() {
        let mu = 2.0f64.powi(stage);
        let stage_tol = if stage == 0 { tol } else { tol.max(1e-6) };
        let out = damped_newton(
            &|z: &DVector<f64>| residual(mu, z),
            &z,
            p,
            stage_tol,
            settings,
        )?;
        z = out.z;
        if stage == 0 {
            if out.converged {
                return Ok(z);
            }
            best_residual = best_residual.min(out.residual);
            return Err(Error::Subproblem {
                iteration: None,
                best_residual,
                message: "half-step root solve did not reach tolerance".into(),
            });
        }
    }
    unreachable!("continuation loop always terminates at stage 0")
}

// ---------------------------------------------------------------------------
// Scalar-radius reduction (order 2, Euclidean-style regularizers)
// ---------------------------------------------------------------------------

/// Solve F(z_k) + ∇F(z_k)·u + c‖u‖₂·u = 0 by reducing to the scalar
/// equation ‖(J + c·r·I)^{−1}F‖₂ = r and bisecting on r. Returns `None`
/// when the reduction is unusable (invalid bracket, persistent singularity,
/// or final residual above `tol`), signalling the caller to fall back to
/// Newton on the full residual.
fn scalar_radius_step(
    op: &dyn Operator,
    z_k: &DVector<f64>,
    c: f64,
    tol: f64,
) -> Result<Option<DVector<f64>>> {
    let f = op.eval(z_k);
    let fnorm = f.norm();
    let j = jacobian(op, z_k)?;
    let d = z_k.len();
    let eye = DMatrix::<f64>::identity(d, d);

    // c·r² ≤ ‖J‖·r + ‖F‖ bounds the root radius.
    let jf = j.norm();
    let r_max = (jf + (jf * jf + 4.0 * c * fnorm).sqrt()) / (2.0 * c) + 1.0;

    let u_at = |r: f64| -> Option<DVector<f64>> {
        let solve = |cr: f64| {
            (j.clone() + &eye * cr)
                .lu()
                .solve(&(-&f))
                .filter(|u| u.iter().all(|v| v.is_finite()))
        };
        // Singular shift is a measure-zero event: perturb once, else give up.
        solve(c * r).or_else(|| solve(c * r + 1e-12))
    };
    let gap = |r: f64| u_at(r).map(|u| u.norm() - r);

    // The bracket [0, r_max] must change sign; the limit at 0⁺ is ‖J^{−1}F‖ > 0.
    match gap(r_max) {
        Some(g) if g < 0.0 => {}
        _ => return Ok(None),
    }
    let (mut lo, mut hi) = (0.0f64, r_max);
    for _ in 0..200 {
        if hi - lo <= 1e-12 * hi.max(1.0) {
            break;
        }
        let mid = 0.5 * (lo + hi);
        match gap(mid) {
            Some(g) if g > 0.0 => lo = mid,
            Some(_) => hi = mid,
            None => return Ok(None),
        }
    }
    let r = 0.5 * (lo + hi);
    let u = match u_at(r) {
        Some(u) => u,
        None => return Ok(None),
    };
    // Accept only if the full vector residual meets the target.
    let resid = (&f + &j * &u + &u * (c * u.norm())).norm();
    if resid <= tol {
        Ok(Some(z_k + u))
    } else {
        Ok(None)
    }
}

// ---------------------------------------------------------------------------
// Half-step roots
// ---------------------------------------------------------------------------

/// Euclidean regularized-Taylor root: find z with
/// T_{s−1}(z; z_k) + (2^ν L/s!)‖z−z_k‖₂^{s−1}(z−z_k) = 0.
///
/// s = 1 is the closed form z_k − F(z_k)/(2^ν L); s = 2 reduces to a scalar
/// radius equation; higher orders run damped Newton (with coefficient
/// continuation) from the s = 1 point.
pub fn solve_phi_root(
    op: &dyn Operator,
    z_k: &DVector<f64>,
    s: u32,
    nu: f64,
    l: f64,
    settings: &SubproblemSettings,
) -> Result<DVector<f64>> {
    settings.validate()?;
    if s < 1 {
        return Err(Error::Input("half-step order s must be >= 1".into()));
    }
    if !(l > 0.0) {
        return Err(Error::Input(format!("smoothness constant must be positive, got {l}")));
    }
    let f = op.eval(z_k);
    if f.amax() == 0.0 {
        return Ok(z_k.clone());
    }
    let coeff = 2.0f64.powf(nu) * l / factorial(s);
    if s == 1 {
        return Ok(z_k - f / coeff);
    }
    let tol = settings.effective_tolerance(f.norm());
    if s == 2 {
        if let Some(z) = scalar_radius_step(op, z_k, coeff, tol)? {
            return Ok(z);
        }
    }
    let model = taylor(op, z_k, s - 1)?;
    let sm1 = (s - 1) as i32;
    let residual = |mu: f64, z: &DVector<f64>| -> Result<DVector<f64>> {
        let u = z - z_k;
        Ok(model.evaluate(z)? + &u * (mu * coeff * u.norm().powi(sm1)))
    };
    let init = z_k - &f / coeff; // s = 1 point as warm start
    newton_with_continuation(&residual, &init, 2.0, tol, settings)
}

/// ℓp power-regularized Taylor root: find z with
/// T_{s−1}(z; z_k) + ∇_u[(2^ν L/s!)‖u‖_p^{s+1}] = 0, u = z − z_k.
///
/// Requires s + 1 ≥ p ≥ 2. s = 1 inverts the regularizer gradient in
/// closed form; s = 2, p = 2 reuses the scalar-radius reduction; the rest
/// runs damped Newton from the s = 1 point.
pub fn solve_lp_taylor_step(
    op: &dyn Operator,
    z_k: &DVector<f64>,
    s: u32,
    p: f64,
    nu: f64,
    l: f64,
    settings: &SubproblemSettings,
) -> Result<DVector<f64>> {
    settings.validate()?;
    if s < 1 {
        return Err(Error::Input("half-step order s must be >= 1".into()));
    }
    if !(l > 0.0) {
        return Err(Error::Input(format!("smoothness constant must be positive, got {l}")));
    }
    if !(p >= 2.0) {
        return Err(Error::Input(format!(
            "power regularizer needs p >= 2, got {p}"
        )));
    }
    let f = op.eval(z_k);
    if f.amax() == 0.0 {
        return Ok(z_k.clone());
    }
    let coeff = 2.0f64.powf(nu) * l / factorial(s);
    let closed_s1 = |c: f64| -> Result<DVector<f64>> {
        Ok(z_k + duality_map_inverse(&(-&f), p, 1, c)?)
    };
    if s == 1 {
        return closed_s1(coeff);
    }
    let tol = settings.effective_tolerance(dual_norm(&f, p)?);
    if s == 2 && p == 2.0 {
        // ∇‖u‖³ = 3‖u‖u, so the scalar reduction applies with c → 3c.
        if let Some(z) = scalar_radius_step(op, z_k, 3.0 * coeff, tol)? {
            return Ok(z);
        }
    }
    let model = taylor(op, z_k, s - 1)?;
    let power = (s + 1) as f64;
    let residual = |mu: f64, z: &DVector<f64>| -> Result<DVector<f64>> {
        let u = z - z_k;
        Ok(model.evaluate(z)? + grad_norm_power(&u, p, power)? * (mu * coeff))
    };
    let init = closed_s1(coeff)?;
    newton_with_continuation(&residual, &init, p, tol, settings)
}

/// Bregman regularized-Taylor root: find z with
/// T_{s−1}(z; z_k) + (2^ν L/s!)·ω_h(z, z_k)^{(s−1)/2}(∇h(z) − ∇h(z_k)) = 0,
/// h = ‖·‖_p^p.
///
/// s = 1 inverts the mirror map in closed form for any p ≥ 2; s = 2, p = 2
/// reuses the scalar-radius reduction (the regularizer is 2c‖u‖u there);
/// the rest runs damped Newton from the s = 1 point.
pub fn solve_psi_root(
    op: &dyn Operator,
    z_k: &DVector<f64>,
    s: u32,
    p: f64,
    nu: f64,
    l: f64,
    settings: &SubproblemSettings,
) -> Result<DVector<f64>> {
    settings.validate()?;
    if s < 1 {
        return Err(Error::Input("half-step order s must be >= 1".into()));
    }
    if !(l > 0.0) {
        return Err(Error::Input(format!("smoothness constant must be positive, got {l}")));
    }
    if p < 2.0 {
        return Err(Error::Input(format!("Bregman regularizer needs p >= 2, got {p}")));
    }
    let f = op.eval(z_k);
    if f.amax() == 0.0 {
        return Ok(z_k.clone());
    }
    let coeff = 2.0f64.powf(nu) * l / factorial(s);
    let closed_s1 = || inverse_mirror_map(&(mirror_map(z_k, p) - &f / coeff), p);
    if s == 1 {
        return Ok(closed_s1());
    }
    let tol = settings.effective_tolerance(dual_norm(&f, p)?);
    if s == 2 && p == 2.0 {
        // ω^{1/2}(∇h(z) − ∇h(z_k)) = ‖u‖·2u, so the reduction applies with c → 2c.
        if let Some(z) = scalar_radius_step(op, z_k, 2.0 * coeff, tol)? {
            return Ok(z);
        }
    }
    let potential = PotentialSpec::LpPowP { p };
    let model = taylor(op, z_k, s - 1)?;
    let grad_k = mirror_map(z_k, p);
    let expo = (s - 1) as f64 / 2.0;
    let residual = |mu: f64, z: &DVector<f64>| -> Result<DVector<f64>> {
        let omega = bregman(&potential, z, z_k)?;
        let dgrad = mirror_map(z, p) - &grad_k;
        Ok(model.evaluate(z)? + dgrad * (mu * coeff * omega.max(0.0).powf(expo)))
    };
    let init = closed_s1();
    newton_with_continuation(&residual, &init, p, tol, settings)
}

/// Mirror-descent full step: solve ∇h(z') = ∇h(z_k) − lambda_scaled·g with
/// h = ‖·‖_p^p, where lambda_scaled = s!·λ_k/L. Exact (component-wise
/// inversion); p = 2 short-circuits to z_k − (lambda_scaled/2)·g.
pub fn mirror_step(
    z_k: &DVector<f64>,
    g: &DVector<f64>,
    lambda_scaled: f64,
    p: f64,
) -> Result<DVector<f64>> {
    if !(lambda_scaled > 0.0) {
        return Err(Error::Input(format!(
            "mirror step length must be positive, got {lambda_scaled}"
        )));
    }
    if p == 2.0 {
        return Ok(z_k - g * (lambda_scaled / 2.0));
    }
    Ok(inverse_mirror_map(
        &(mirror_map(z_k, p) - g * lambda_scaled),
        p,
    ))
}
