//! Continuous-time rescaled dynamics: integration and rate measurement.
//!
//! The dynamics evolve an auxiliary state `u` by `u̇ = −F(z)/‖F(z)‖^{1−1/s}`
//! with `v = z_0 + u`, while `z` is pinned to `v` through the algebraic
//! constraint `z − v + F(z)/‖F(z)‖^{1−1/s} = 0` (an index-1
//! differential-algebraic system).  Only Euclidean geometry is implemented.
//!
//! [`integrate_re_ds`] advances `u` with the classical 4-stage explicit
//! integrator, solving the algebraic constraint by damped Newton at every
//! stage.  [`min_norm_rate`] fits the decay exponent of the running minimum
//! of `‖F(z(t))‖₂`.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::oracle::{jacobian, Operator};

/// Configuration for one trajectory integration.
#[derive(Debug, Clone)]
pub struct ContinuousConfig {
    /// Order parameter of the rescaling exponent `1 − 1/s`.
    pub s: u32,
    /// Integration horizon.
    pub t_end: f64,
    /// Step size of the explicit integrator.
    pub dt: f64,
    /// Bound the algebraic residual must satisfy at every sample.
    pub algebraic_tolerance: f64,
    /// Stop once `‖F(z)‖₂` falls below this value; also guards the Newton
    /// solve near stationary points, where the rescaling for `s > 1` loses
    /// differentiability.
    pub norm_floor: f64,
}

impl ContinuousConfig {
    /// Configuration with default tolerances for order `s` up to `t_end`.
    pub fn new(s: u32, t_end: f64, dt: f64) -> Self {
        ContinuousConfig {
            s,
            t_end,
            dt,
            algebraic_tolerance: 1e-10,
            norm_floor: 1e-9,
        }
    }

    /// Check all field constraints.
    pub fn validate(&self) -> Result<()> {
        if self.s < 1 {
            return Err(Error::Config("order s must satisfy s >= 1".into()));
        }
        if !(self.t_end > 0.0) || !self.t_end.is_finite() {
            return Err(Error::Config(format!(
                "t_end must be finite and > 0, got {}",
                self.t_end
            )));
        }
        if !(self.dt > 0.0) || !self.dt.is_finite() {
            return Err(Error::Config(format!(
                "dt must be finite and > 0, got {}",
                self.dt
            )));
        }
        if self.dt >= self.t_end {
            return Err(Error::Config(format!(
                "dt must be smaller than t_end, got dt = {} and t_end = {}",
                self.dt, self.t_end
            )));
        }
        if !(self.algebraic_tolerance > 0.0) {
            return Err(Error::Config(format!(
                "algebraic_tolerance must be > 0, got {}",
                self.algebraic_tolerance
            )));
        }
        if !(self.norm_floor > 0.0) {
            return Err(Error::Config(format!(
                "norm_floor must be > 0, got {}",
                self.norm_floor
            )));
        }
        Ok(())
    }
}

/// State of the dynamics at one accepted integration step.
#[derive(Debug, Clone)]
pub struct TrajectorySample {
    /// Time of the sample.
    pub t: f64,
    /// Integrated auxiliary state.
    pub u: DVector<f64>,
    /// `z_0 + u`, the point the constraint is anchored to.
    pub v: DVector<f64>,
    /// Solution of the algebraic constraint at `v`.
    pub z: DVector<f64>,
    /// `‖F(z)‖₂`.
    pub norm_f: f64,
}

/// Integrated trajectory with its running-minimum norm curve.
#[derive(Debug, Clone)]
pub struct Trajectory {
    /// One sample per accepted step, starting at `t = 0`.
    pub samples: Vec<TrajectorySample>,
    /// `(t, min_{r ≤ t} ‖F(z(r))‖₂)` aligned with `samples`.
    pub running_min_norm: Vec<(f64, f64)>,
}

/// Outcome of one algebraic-constraint solve.
enum StageOutcome {
    Solved { z: DVector<f64>, norm_f: f64 },
    /// The solve ran into the region below the norm floor where the
    /// rescaled field is no longer smooth.
    Floor,
}

/// `F(z)/‖F(z)‖^{1−1/s}` and the norm it used.
fn rescaled_field(f: &DVector<f64>, expo: f64) -> (DVector<f64>, f64) {
    let n = f.norm();
    if expo == 0.0 {
        (f.clone(), n)
    } else {
        (f * n.powf(-expo), n)
    }
}

/// Solve `z − v + F(z)/‖F(z)‖^{expo} = 0` by damped Newton from `z_init`.
fn solve_stage(
    op: &dyn Operator,
    v: &DVector<f64>,
    expo: f64,
    z_init: &DVector<f64>,
    tolerance: f64,
    norm_floor: f64,
) -> Result<StageOutcome> {
    let d = v.len();
    let residual = |z: &DVector<f64>| -> (DVector<f64>, f64) {
        let f = op.eval(z);
        let n = f.norm();
        let (g, _) = rescaled_field(&f, expo);
        (z - v + g, n)
    };
    let mut z = z_init.clone();
    let (mut res, mut norm_f) = residual(&z);
    let mut res_norm = res.norm();
    for _ in 0..60 {
        if norm_f < norm_floor {
            return Ok(StageOutcome::Floor);
        }
        if res_norm <= tolerance {
            return Ok(StageOutcome::Solved { z, norm_f });
        }
        let f = op.eval(&z);
        let jac = jacobian(op, &z)?;
        let n = f.norm();
        // ∇[z − v + F·‖F‖^{−e}] = I + ‖F‖^{−e}·J − e·‖F‖^{−e−2}·F·(Fᵀ J).
        let mut jg = DMatrix::<f64>::identity(d, d);
        if expo == 0.0 {
            jg += &jac;
        } else {
            jg += &jac * n.powf(-expo);
            let ftj = (f.transpose() * &jac).transpose();
            jg -= (&f * ftj.transpose()) * (expo * n.powf(-expo - 2.0));
        }
        let step = match jg.lu().solve(&res) {
            Some(s) => s,
            None => {
                return Err(Error::Subproblem {
                    iteration: None,
                    best_residual: res_norm,
                    message: "algebraic-stage Newton matrix is singular".into(),
                })
            }
        };
        let mut t = 1.0;
        let mut advanced = false;
        while t >= 1e-12 {
            let cand = &z - &step * t;
            let (cand_res, cand_norm_f) = residual(&cand);
            let cand_res_norm = cand_res.norm();
            if cand_res_norm < res_norm {
                z = cand;
                res = cand_res;
                res_norm = cand_res_norm;
                norm_f = cand_norm_f;
                advanced = true;
                break;
            }
            t *= 0.5;
        }
        if !advanced {
            break;
        }
    }
    if norm_f < norm_floor {
        return Ok(StageOutcome::Floor);
    }
    if res_norm <= tolerance {
        return Ok(StageOutcome::Solved { z, norm_f });
    }
    Err(Error::Subproblem {
        iteration: None,
        best_residual: res_norm,
        message: "algebraic-stage Newton did not reach the requested tolerance".into(),
    })
}

/// Integrate the rescaled dynamics from `z0` and record every accepted step.
///
/// Stops at `t_end` or as soon as `‖F(z)‖₂` falls below `norm_floor`.  The
/// algebraic constraint is solved at every integrator stage, warm-started
/// from the previous stage's solution.
pub fn integrate_re_ds(
    op: &dyn Operator,
    z0: &DVector<f64>,
    config: &ContinuousConfig,
) -> Result<Trajectory> {
    config.validate()?;
    if z0.len() != op.dim() {
        return Err(Error::Input(format!(
            "operator is {}-dimensional but z0 has {} entries",
            op.dim(),
            z0.len()
        )));
    }
    let f0 = op.eval(z0);
    if f0.norm() < config.norm_floor {
        return Err(Error::Precondition(format!(
            "start point is already stationary: ‖F(z0)‖ = {} is below the norm floor {}",
            f0.norm(),
            config.norm_floor
        )));
    }
    let expo = 1.0 - 1.0 / config.s as f64;
    let stage_tol = 0.5 * config.algebraic_tolerance;

    let mut samples = Vec::new();
    let mut running = Vec::new();
    let mut min_norm = f64::INFINITY;
    let mut push = |t: f64,
                    u: &DVector<f64>,
                    v: &DVector<f64>,
                    z: &DVector<f64>,
                    norm_f: f64,
                    samples: &mut Vec<TrajectorySample>,
                    running: &mut Vec<(f64, f64)>| {
        min_norm = min_norm.min(norm_f);
        samples.push(TrajectorySample {
            t,
            u: u.clone(),
            v: v.clone(),
            z: z.clone(),
            norm_f,
        });
        running.push((t, min_norm));
    };

    let mut t = 0.0;
    let mut u = DVector::<f64>::zeros(z0.len());
    let v0 = z0 + &u;
    let (mut z_warm, norm0) = match solve_stage(op, &v0, expo, z0, stage_tol, config.norm_floor)
        .map_err(|e| integration_error(e, 0.0))?
    {
        StageOutcome::Solved { z, norm_f } => (z, norm_f),
        StageOutcome::Floor => {
            return Err(Error::Precondition(
                "constraint solution at t = 0 is already below the norm floor".into(),
            ))
        }
    };
    push(0.0, &u, &v0, &z_warm, norm0, &mut samples, &mut running);
    if norm0 < config.norm_floor {
        return Ok(Trajectory {
            samples,
            running_min_norm: running,
        });
    }

    'steps: while t < config.t_end {
        let dt = config.dt.min(config.t_end - t);
        if dt <= config.dt * 1e-12 {
            break;
        }
        // Classical 4-stage step on u; each stage solves the constraint.
        let mut stage_z = z_warm.clone();
        let eval_slope = |u_stage: &DVector<f64>,
                              stage_z: &mut DVector<f64>|
         -> Result<Option<DVector<f64>>> {
            let v = z0 + u_stage;
            match solve_stage(op, &v, expo, stage_z, stage_tol, config.norm_floor)
                .map_err(|e| integration_error(e, t))?
            {
                StageOutcome::Solved { z, norm_f: _ } => {
                    let f = op.eval(&z);
                    let (g, _) = rescaled_field(&f, expo);
                    *stage_z = z;
                    Ok(Some(-g))
                }
                StageOutcome::Floor => Ok(None),
            }
        };
        let k1 = match eval_slope(&u, &mut stage_z)? {
            Some(k) => k,
            None => break 'steps,
        };
        let k2 = match eval_slope(&(&u + &k1 * (dt / 2.0)), &mut stage_z)? {
            Some(k) => k,
            None => break 'steps,
        };
        let k3 = match eval_slope(&(&u + &k2 * (dt / 2.0)), &mut stage_z)? {
            Some(k) => k,
            None => break 'steps,
        };
        let k4 = match eval_slope(&(&u + &k3 * dt), &mut stage_z)? {
            Some(k) => k,
            None => break 'steps,
        };
        u += (k1 + k2 * 2.0 + k3 * 2.0 + k4) * (dt / 6.0);
        t = if config.t_end - (t + dt) < config.dt * 1e-9 {
            config.t_end
        } else {
            t + dt
        };
        let v = z0 + &u;
        let (z_new, norm_f) = match solve_stage(op, &v, expo, &stage_z, stage_tol, config.norm_floor)
            .map_err(|e| integration_error(e, t))?
        {
            StageOutcome::Solved { z, norm_f } => (z, norm_f),
            StageOutcome::Floor => break 'steps,
        };
        z_warm = z_new;
        push(t, &u, &v, &z_warm, norm_f, &mut samples, &mut running);
        if norm_f < config.norm_floor {
            break;
        }
    }
    Ok(Trajectory {
        samples,
        running_min_norm: running,
    })
}

fn integration_error(err: Error, last_good_t: f64) -> Error {
    match err {
        Error::Subproblem {
            best_residual,
            message,
            ..
        } => Error::Integration {
            last_good_t,
            message: format!("{message} (best residual {best_residual:.3e})"),
        },
        other => other,
    }
}

/// Least-squares decay exponent of the running-minimum norm.
///
/// Fits `log(min-norm)` against `log(t)` over the window `[t_end/10, t_end]`,
/// where `t_end` is the last sample time.  Requires at least 10 samples past
/// `t = 1`.
pub fn min_norm_rate(traj: &Trajectory) -> Result<f64> {
    let past_one = traj.running_min_norm.iter().filter(|(t, _)| *t > 1.0).count();
    if past_one < 10 {
        return Err(Error::Input(format!(
            "rate fit needs at least 10 samples past t = 1, got {past_one}"
        )));
    }
    let t_end = traj
        .running_min_norm
        .last()
        .map(|(t, _)| *t)
        .unwrap_or(0.0);
    let window: Vec<(f64, f64)> = traj
        .running_min_norm
        .iter()
        .filter(|(t, m)| *t >= t_end / 10.0 && *t > 0.0 && *m > 0.0)
        .map(|(t, m)| (t.ln(), m.ln()))
        .collect();
    if window.len() < 2 {
        return Err(Error::Input(
            "rate window contains fewer than 2 usable samples".into(),
        ));
    }
    let n = window.len() as f64;
    let sx: f64 = window.iter().map(|p| p.0).sum();
    let sy: f64 = window.iter().map(|p| p.1).sum();
    let sxx: f64 = window.iter().map(|p| p.0 * p.0).sum();
    let sxy: f64 = window.iter().map(|p| p.0 * p.1).sum();
    let denom = n * sxx - sx * sx;
    if denom.abs() < 1e-300 {
        return Err(Error::Input(
            "rate window has no time spread to fit against".into(),
        ));
    }
    Ok((n * sxy - sx * sy) / denom)
}
