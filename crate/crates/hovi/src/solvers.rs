//! Iterative solvers for variational-inequality stationarity in ℓp geometry.
//!
//! All solvers share the same extragradient skeleton: from the current point
//! `z_k`, compute a regularized-Taylor half step `z_{k+1/2}`, then take a
//! mirror (or explicit) full step driven by the operator value at the half
//! step.  They differ in the regularizer used for the half step, the step
//! size `λ_k`, and the output rule.
//!
//! Every run returns a [`Trace`] holding one [`IterationRecord`] per
//! completed iteration plus the selected output point, so callers can audit
//! step sizes, residual norms, and displacement histories after the fact.

use nalgebra::DVector;
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::error::{Error, Result};
use crate::geometry::{dual_norm, lp_norm, bregman, PotentialSpec};
use crate::oracle::{estimate_lipschitz, Operator, Region};
use crate::subproblems::{
    factorial, mirror_step, solve_lp_taylor_step, solve_phi_root, solve_psi_root,
    SubproblemSettings,
};

/// Solver family selector.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Algorithm {
    /// Higher-order extragradient in Euclidean geometry (`p = 2`), any order `s ≥ 1`.
    HoegPlusL2,
    /// Higher-order extragradient in ℓp geometry, `s + 1 ≥ p ≥ 2`.
    LpHoegPlus,
    /// Higher-order mirror method for monotone problems in ℓp geometry,
    /// outputs a step-size-weighted average.
    LpHomvi,
    /// Anchored first-order extragradient baseline (`s = 1`, `p = 2`).
    Eag,
}

impl Algorithm {
    /// Short stable identifier used in config files and output headers.
    pub fn name(self) -> &'static str {
        match self {
            Algorithm::HoegPlusL2 => "hoeg_plus_l2",
            Algorithm::LpHoegPlus => "lp_hoeg_plus",
            Algorithm::LpHomvi => "lp_homvi",
            Algorithm::Eag => "eag",
        }
    }

    /// Parse the identifier produced by [`Algorithm::name`].
    pub fn parse(name: &str) -> Result<Self> {
        match name {
            "hoeg_plus_l2" => Ok(Algorithm::HoegPlusL2),
            "lp_hoeg_plus" => Ok(Algorithm::LpHoegPlus),
            "lp_homvi" => Ok(Algorithm::LpHomvi),
            "eag" => Ok(Algorithm::Eag),
            other => Err(Error::Config(format!(
                "unknown algorithm '{other}'; expected one of hoeg_plus_l2, lp_hoeg_plus, lp_homvi, eag"
            ))),
        }
    }
}

/// Which closed-form step-size schedule the ℓp extragradient solver uses.
///
/// Both choices satisfy the same convergence guarantee; `Box` is the default
/// schedule and `Proof` is the more conservative variant that appears in the
/// correctness argument.  They coincide only in special cases.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum LambdaVariant {
    /// Default schedule.
    #[default]
    Box,
    /// Conservative schedule from the correctness argument.
    Proof,
}

/// Why the iteration loop ended.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum StopReason {
    /// All `K` iterations ran.
    BudgetExhausted,
    /// `‖F(z_{k+1/2})‖_{p*} ≤ target_eps` was reached early.
    TargetReached,
    /// The operator vanished at an iterate (exact stationary point found).
    OperatorZero,
}

impl StopReason {
    /// Short stable identifier used in JSON summaries.
    pub fn name(self) -> &'static str {
        match self {
            StopReason::BudgetExhausted => "budget_exhausted",
            StopReason::TargetReached => "target_reached",
            StopReason::OperatorZero => "operator_zero",
        }
    }
}

/// How the output point of a run is selected from the iterate history.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum OutputRule {
    /// The half-step iterate with the smallest dual-norm residual.
    BestHalfstepNorm,
    /// The `λ`-weighted average of the half-step iterates.
    LambdaWeightedAverage,
}

impl OutputRule {
    /// Short stable identifier used in JSON summaries.
    pub fn name(self) -> &'static str {
        match self {
            OutputRule::BestHalfstepNorm => "best_halfstep_norm",
            OutputRule::LambdaWeightedAverage => "lambda_weighted_average",
        }
    }
}

/// One completed iteration of any solver.
#[derive(Debug, Clone)]
pub struct IterationRecord {
    /// Iteration index, starting at 0.
    pub k: usize,
    /// Iterate at the start of the iteration.
    pub z: DVector<f64>,
    /// Half-step (extrapolation) point.
    pub z_half: DVector<f64>,
    /// Iterate after the full step (becomes `z` of the next record).
    pub z_full: DVector<f64>,
    /// Step size `λ_k` used in the full step.
    pub lambda: f64,
    /// `‖F(z_half)‖_{p*}`.
    pub norm_f_half: f64,
    /// `‖F(z_full)‖_{p*}`.
    pub norm_f_full: f64,
    /// `‖z_half − z‖_p`.
    pub displacement: f64,
    /// Running `λ`-weighted average of half-step iterates (averaging solvers only).
    pub weighted_average: Option<DVector<f64>>,
}

/// Run-level metadata recorded alongside the iterate history.
#[derive(Debug, Clone)]
pub struct TraceMeta {
    /// Which solver produced the trace.
    pub algorithm: Algorithm,
    /// Taylor order used for the half step.
    pub s: u32,
    /// Norm exponent of the geometry.
    pub p: f64,
    /// Regularization exponent `ν` (absent for the anchored baseline).
    pub nu: Option<f64>,
    /// Smoothness constant actually used (resolved from config or estimated).
    pub l: f64,
    /// Explicit step size of the anchored baseline, if applicable.
    pub alpha: Option<f64>,
    /// True if any iterate left the operator's declared domain box.
    pub left_domain_box: bool,
}

/// Full record of a solver run.
#[derive(Debug, Clone)]
pub struct Trace {
    /// One record per completed iteration, in order.
    pub records: Vec<IterationRecord>,
    /// Output point selected by `output_rule`.
    pub output: DVector<f64>,
    /// How `output` was selected.
    pub output_rule: OutputRule,
    /// Why the loop ended.
    pub stop_reason: StopReason,
    /// Run-level metadata.
    pub meta: TraceMeta,
}

impl Trace {
    /// Smallest recorded `‖F(z_half)‖_{p*}`, if any iterations ran.
    pub fn best_half_norm(&self) -> Option<f64> {
        self.records
            .iter()
            .map(|r| r.norm_f_half)
            .fold(None, |acc, v| Some(acc.map_or(v, |a: f64| a.min(v))))
    }

    /// `‖F‖_{p*}` at the last full-step iterate, if any iterations ran.
    pub fn final_full_norm(&self) -> Option<f64> {
        self.records.last().map(|r| r.norm_f_full)
    }

    /// Running minimum of `‖F(z_half)‖_{p*}` over iterations.
    pub fn running_min_half_norm(&self) -> Vec<f64> {
        let mut best = f64::INFINITY;
        self.records
            .iter()
            .map(|r| {
                best = best.min(r.norm_f_half);
                best
            })
            .collect()
    }
}

/// Configuration shared by all solvers.
#[derive(Debug, Clone)]
pub struct SolverConfig {
    /// Which solver to run.
    pub algorithm: Algorithm,
    /// Taylor order of the half-step model, `s ≥ 1`.
    pub s: u32,
    /// Norm exponent of the ambient geometry.
    pub p: f64,
    /// Smoothness constant; when `None` it is estimated by sampling.
    pub l: Option<f64>,
    /// Regularization exponent; when `None` the algorithm default is used.
    pub nu: Option<f64>,
    /// Iteration budget `K ≥ 1`.
    pub k: usize,
    /// Early-stop threshold on `‖F(z_half)‖_{p*}` (0 disables early stopping).
    pub target_eps: f64,
    /// Settings forwarded to the half-step subproblem solver.
    pub subproblem: SubproblemSettings,
    /// Seed for any sampling the run performs (e.g. smoothness estimation).
    pub seed: u64,
    /// Step-size schedule of the ℓp extragradient solver.
    pub lambda_variant: LambdaVariant,
    /// Multiplier applied to an estimated smoothness constant.
    pub l_safety: f64,
}

impl SolverConfig {
    /// Baseline configuration for `algorithm` at order `s` in ℓp geometry.
    pub fn new(algorithm: Algorithm, s: u32, p: f64) -> Self {
        SolverConfig {
            algorithm,
            s,
            p,
            l: None,
            nu: None,
            k: 1000,
            target_eps: 0.0,
            subproblem: SubproblemSettings::default(),
            seed: 0,
            lambda_variant: LambdaVariant::default(),
            l_safety: 1.5,
        }
    }

    /// Check all cross-field constraints.
    pub fn validate(&self) -> Result<()> {
        if self.s < 1 {
            return Err(Error::Config("order s must satisfy s >= 1".into()));
        }
        if !self.p.is_finite() || self.p < 2.0 {
            return Err(Error::Config(format!(
                "norm exponent p must be a finite value >= 2, got {}",
                self.p
            )));
        }
        match self.algorithm {
            Algorithm::HoegPlusL2 => {
                if self.p != 2.0 {
                    return Err(Error::Config(format!(
                        "hoeg_plus_l2 works in Euclidean geometry and requires p = 2, got p = {}",
                        self.p
                    )));
                }
            }
            Algorithm::LpHoegPlus | Algorithm::LpHomvi => {
                if self.p > (self.s + 1) as f64 {
                    return Err(Error::Config(format!(
                        "{} requires s + 1 >= p >= 2, got s = {}, p = {}",
                        self.algorithm.name(),
                        self.s,
                        self.p
                    )));
                }
            }
            Algorithm::Eag => {
                if self.s != 1 {
                    return Err(Error::Config(format!(
                        "eag is a first-order method and requires s = 1, got s = {}",
                        self.s
                    )));
                }
                if self.p != 2.0 {
                    return Err(Error::Config(format!(
                        "eag works in Euclidean geometry and requires p = 2, got p = {}",
                        self.p
                    )));
                }
            }
        }
        if let Some(l) = self.l {
            if !(l > 0.0) || !l.is_finite() {
                return Err(Error::Config(format!(
                    "smoothness constant L must be finite and > 0, got {l}"
                )));
            }
        }
        if let Some(nu) = self.nu {
            if !nu.is_finite() {
                return Err(Error::Config(format!(
                    "regularization exponent nu must be finite, got {nu}"
                )));
            }
        }
        if self.k < 1 {
            return Err(Error::Config("iteration budget K must be >= 1".into()));
        }
        if !(self.target_eps >= 0.0) {
            return Err(Error::Config(format!(
                "target_eps must be >= 0, got {}",
                self.target_eps
            )));
        }
        if !(self.l_safety >= 1.0) || !self.l_safety.is_finite() {
            return Err(Error::Config(format!(
                "l_safety must be finite and >= 1, got {}",
                self.l_safety
            )));
        }
        self.subproblem.validate()?;
        Ok(())
    }

    /// Resolve the smoothness constant: configured value if present, else a
    /// sampled estimate over a cube around `z0` scaled by `l_safety`.
    pub fn resolve_l(&self, op: &dyn Operator, z0: &DVector<f64>) -> Result<f64> {
        if let Some(l) = self.l {
            return Ok(l);
        }
        let half = 2.0 * z0.amax() + 2.0;
        let region = Region::cube_around(z0, half)?;
        let est = estimate_lipschitz(op, self.s, self.p, &region, 2000, self.seed)?;
        if !(est > 0.0) || !est.is_finite() {
            return Err(Error::Config(format!(
                "smoothness estimation over a cube around the start point returned {est}; \
                 provide an explicit L in the config"
            )));
        }
        Ok(est * self.l_safety)
    }

    fn resolved_nu(&self) -> Result<f64> {
        match self.nu {
            Some(nu) => Ok(nu),
            None => nu_default(self.algorithm, self.s, self.p),
        }
    }
}

/// Default regularization exponent `ν` for `algorithm` at order `s` in
/// ℓp geometry.
///
/// The anchored baseline has no regularization exponent, so requesting a
/// default for it is a configuration error.
pub fn nu_default(algorithm: Algorithm, s: u32, p: f64) -> Result<f64> {
    if s < 1 {
        return Err(Error::Config("order s must satisfy s >= 1".into()));
    }
    let sf = s as f64;
    match algorithm {
        Algorithm::HoegPlusL2 => {
            if s == 1 {
                Ok(0.656)
            } else {
                Ok((sf + 0.5 + 1.0 / (5.0 * sf) - 1.0 / (4.0 * sf.powi(3))).log2())
            }
        }
        Algorithm::LpHoegPlus => {
            // Independent of p.
            let inner = sf * (sf + 2.0) * 2f64.powf(1.0 - 1.0 / sf)
                / (sf + 1.0).powf(1.0 + 1.0 / sf);
            Ok(sf / (sf + 1.0) * inner.log2())
        }
        Algorithm::LpHomvi => {
            if !p.is_finite() || p < 2.0 {
                return Err(Error::Config(format!(
                    "norm exponent p must be a finite value >= 2, got {p}"
                )));
            }
            Ok((sf + 1.0) * (p + 1.0) / p - p.log2() + (p - 1.0) / p * sf.log2())
        }
        Algorithm::Eag => Err(Error::Config(
            "eag has no regularization exponent; nu_default is undefined for it".into(),
        )),
    }
}

/// Evaluate the ℓp extragradient step size for a given half-step displacement.
fn lp_lambda(variant: LambdaVariant, s: u32, p: f64, nu: f64, displacement: f64) -> f64 {
    let sf = s as f64;
    match variant {
        LambdaVariant::Box => {
            let base = (1.0 / 2f64.powf(p + 1.0)).powf(sf / (sf + 1.0));
            let shape = ((sf + 2.0) / p).powf((p - sf - 1.0) / (sf + 1.0));
            base * shape * displacement.powf(p - sf - 1.0)
        }
        LambdaVariant::Proof => {
            let m_p = 2f64.powf(-(p + 1.0));
            let base = m_p.powf((sf + 1.0) / sf);
            let nu_factor = 2f64.powf(-nu * (p - 1.0) / sf);
            let shape = (((sf + 1.0) * 2f64.powf(nu) + 1.0) / p).powf((p - (sf + 1.0)) / sf);
            base * nu_factor * shape * displacement.powf(p - (sf + 1.0))
        }
    }
}

struct LoopState {
    records: Vec<IterationRecord>,
    best: Option<(f64, DVector<f64>)>,
    stop: StopReason,
    left_box: bool,
}

impl LoopState {
    fn new(capacity: usize) -> Self {
        LoopState {
            records: Vec::with_capacity(capacity.min(1 << 20)),
            best: None,
            stop: StopReason::BudgetExhausted,
            left_box: false,
        }
    }

    fn observe_point(&mut self, op: &dyn Operator, z: &DVector<f64>) {
        if self.left_box {
            return;
        }
        if let Some((lo, hi)) = &op.metadata().domain_box {
            let inside = z
                .iter()
                .zip(lo.iter().zip(hi.iter()))
                .all(|(zi, (l, h))| *zi >= *l && *zi <= *h);
            if !inside {
                self.left_box = true;
            }
        }
    }

    fn update_best(&mut self, norm: f64, z_half: &DVector<f64>) {
        match &self.best {
            Some((b, _)) if *b <= norm => {}
            _ => self.best = Some((norm, z_half.clone())),
        }
    }
}

fn finish_best_halfstep(
    state: LoopState,
    z0: &DVector<f64>,
    meta: TraceMeta,
) -> Trace {
    let output = state
        .best
        .map(|(_, z)| z)
        .unwrap_or_else(|| z0.clone());
    Trace {
        records: state.records,
        output,
        output_rule: OutputRule::BestHalfstepNorm,
        stop_reason: StopReason::OperatorZero,
        meta,
    }
    // stop_reason is overwritten by the caller; see `seal`.
}

fn seal(mut trace: Trace, stop: StopReason) -> Trace {
    trace.stop_reason = stop;
    trace
}

fn check_algorithm(config: &SolverConfig, expected: Algorithm) -> Result<()> {
    if config.algorithm != expected {
        return Err(Error::Config(format!(
            "config selects algorithm '{}' but was passed to the {} runner",
            config.algorithm.name(),
            expected.name()
        )));
    }
    Ok(())
}

/// Higher-order extragradient in Euclidean geometry.
///
/// Half step: root of the regularized Taylor model `Φ^ν`. Full step: Euclidean
/// mirror step with `λ_k = 2^{−ν} ‖z_half − z_k‖^{1−s}`. Output: half-step
/// iterate with the smallest residual norm.
pub fn run_hoeg_plus_l2(
    op: &dyn Operator,
    z0: &DVector<f64>,
    config: &SolverConfig,
) -> Result<Trace> {
    check_algorithm(config, Algorithm::HoegPlusL2)?;
    config.validate()?;
    let nu = config.resolved_nu()?;
    let l = config.resolve_l(op, z0)?;
    let s = config.s;
    let p = 2.0;
    let sfact = factorial(s);

    let mut state = LoopState::new(config.k);
    state.observe_point(op, z0);
    let mut z = z0.clone();
    for k_iter in 0..config.k {
        let fz = op.eval(&z);
        if fz.amax() == 0.0 {
            state.stop = StopReason::OperatorZero;
            break;
        }
        let z_half = solve_phi_root(op, &z, s, nu, l, &config.subproblem)
            .map_err(|e| e.at_iteration(k_iter))?;
        let displacement = lp_norm(&(&z_half - &z), p)?;
        if displacement == 0.0 {
            state.stop = StopReason::OperatorZero;
            break;
        }
        let lambda = 2f64.powf(-nu) * displacement.powf(1.0 - s as f64);
        let f_half = op.eval(&z_half);
        let norm_f_half = dual_norm(&f_half, p)?;
        let z_full = mirror_step(&z, &f_half, sfact * lambda / l, p)?;
        let norm_f_full = dual_norm(&op.eval(&z_full), p)?;
        state.observe_point(op, &z_half);
        state.observe_point(op, &z_full);
        state.update_best(norm_f_half, &z_half);
        state.records.push(IterationRecord {
            k: k_iter,
            z: z.clone(),
            z_half,
            z_full: z_full.clone(),
            lambda,
            norm_f_half,
            norm_f_full,
            displacement,
            weighted_average: None,
        });
        z = z_full;
        if config.target_eps > 0.0 && norm_f_half <= config.target_eps {
            state.stop = StopReason::TargetReached;
            break;
        }
    }
    let stop = state.stop;
    let meta = TraceMeta {
        algorithm: Algorithm::HoegPlusL2,
        s,
        p,
        nu: Some(nu),
        l,
        alpha: None,
        left_domain_box: state.left_box,
    };
    Ok(seal(finish_best_halfstep(state, z0, meta), stop))
}

/// Higher-order extragradient in ℓp geometry.
///
/// Half step: root of the ℓp-regularized Taylor model. Full step: ℓp mirror
/// step with a closed-form `λ_k` schedule (see [`LambdaVariant`]). Output:
/// half-step iterate with the smallest dual-norm residual.
pub fn run_lp_hoeg_plus(
    op: &dyn Operator,
    z0: &DVector<f64>,
    config: &SolverConfig,
) -> Result<Trace> {
    check_algorithm(config, Algorithm::LpHoegPlus)?;
    config.validate()?;
    let nu = config.resolved_nu()?;
    let l = config.resolve_l(op, z0)?;
    let s = config.s;
    let p = config.p;
    let sfact = factorial(s);

    let mut state = LoopState::new(config.k);
    state.observe_point(op, z0);
    let mut z = z0.clone();
    for k_iter in 0..config.k {
        let fz = op.eval(&z);
        if fz.amax() == 0.0 {
            state.stop = StopReason::OperatorZero;
            break;
        }
        let z_half = solve_lp_taylor_step(op, &z, s, p, nu, l, &config.subproblem)
            .map_err(|e| e.at_iteration(k_iter))?;
        let displacement = lp_norm(&(&z_half - &z), p)?;
        if displacement == 0.0 {
            state.stop = StopReason::OperatorZero;
            break;
        }
        let lambda = lp_lambda(config.lambda_variant, s, p, nu, displacement);
        let f_half = op.eval(&z_half);
        let norm_f_half = dual_norm(&f_half, p)?;
        let z_full = mirror_step(&z, &f_half, sfact * lambda / l, p)?;
        let norm_f_full = dual_norm(&op.eval(&z_full), p)?;
        state.observe_point(op, &z_half);
        state.observe_point(op, &z_full);
        state.update_best(norm_f_half, &z_half);
        state.records.push(IterationRecord {
            k: k_iter,
            z: z.clone(),
            z_half,
            z_full: z_full.clone(),
            lambda,
            norm_f_half,
            norm_f_full,
            displacement,
            weighted_average: None,
        });
        z = z_full;
        if config.target_eps > 0.0 && norm_f_half <= config.target_eps {
            state.stop = StopReason::TargetReached;
            break;
        }
    }
    let stop = state.stop;
    let meta = TraceMeta {
        algorithm: Algorithm::LpHoegPlus,
        s,
        p,
        nu: Some(nu),
        l,
        alpha: None,
        left_domain_box: state.left_box,
    };
    Ok(seal(finish_best_halfstep(state, z0, meta), stop))
}

/// Higher-order mirror method for monotone problems in ℓp geometry.
///
/// Half step: root of the Bregman-regularized Taylor model `Ψ^ν`. Full step:
/// ℓp mirror step with `λ_k = 2^{−ν} ω_h(z_half, z_k)^{−(s+1−p)/p}`. Output:
/// `λ`-weighted average of the half-step iterates.
pub fn run_lp_homvi(
    op: &dyn Operator,
    z0: &DVector<f64>,
    config: &SolverConfig,
) -> Result<Trace> {
    check_algorithm(config, Algorithm::LpHomvi)?;
    config.validate()?;
    let nu = config.resolved_nu()?;
    let l = config.resolve_l(op, z0)?;
    let s = config.s;
    let p = config.p;
    let sfact = factorial(s);
    let potential = PotentialSpec::LpPowP { p };
    let omega_exponent = -((s + 1) as f64 - p) / p;

    let mut state = LoopState::new(config.k);
    state.observe_point(op, z0);
    let mut z = z0.clone();
    let mut weight_sum = 0.0;
    let mut weighted = DVector::<f64>::zeros(z0.len());
    for k_iter in 0..config.k {
        let fz = op.eval(&z);
        if fz.amax() == 0.0 {
            state.stop = StopReason::OperatorZero;
            break;
        }
        let z_half = solve_psi_root(op, &z, s, p, nu, l, &config.subproblem)
            .map_err(|e| e.at_iteration(k_iter))?;
        let omega = bregman(&potential, &z_half, &z)?.max(0.0);
        if omega == 0.0 && (s + 1) as f64 > p {
            state.stop = StopReason::OperatorZero;
            break;
        }
        let lambda = if omega_exponent == 0.0 {
            2f64.powf(-nu)
        } else {
            2f64.powf(-nu) * omega.powf(omega_exponent)
        };
        let f_half = op.eval(&z_half);
        let norm_f_half = dual_norm(&f_half, p)?;
        let z_full = mirror_step(&z, &f_half, sfact * lambda / l, p)?;
        let norm_f_full = dual_norm(&op.eval(&z_full), p)?;
        weight_sum += lambda;
        weighted += lambda * &z_half;
        let average = &weighted / weight_sum;
        let displacement = lp_norm(&(&z_half - &z), p)?;
        state.observe_point(op, &z_half);
        state.observe_point(op, &z_full);
        state.update_best(norm_f_half, &z_half);
        state.records.push(IterationRecord {
            k: k_iter,
            z: z.clone(),
            z_half,
            z_full: z_full.clone(),
            lambda,
            norm_f_half,
            norm_f_full,
            displacement,
            weighted_average: Some(average),
        });
        z = z_full;
        if config.target_eps > 0.0 && norm_f_half <= config.target_eps {
            state.stop = StopReason::TargetReached;
            break;
        }
    }
    let output = state
        .records
        .last()
        .and_then(|r| r.weighted_average.clone())
        .unwrap_or_else(|| z0.clone());
    Ok(Trace {
        output,
        output_rule: OutputRule::LambdaWeightedAverage,
        stop_reason: state.stop,
        meta: TraceMeta {
            algorithm: Algorithm::LpHomvi,
            s,
            p,
            nu: Some(nu),
            l,
            alpha: None,
            left_domain_box: state.left_box,
        },
        records: state.records,
    })
}

/// Anchored first-order extragradient baseline in Euclidean geometry.
///
/// Both steps move from `z_k + (z_0 − z_k)/(k+1)` by `−α F(·)` with fixed
/// `α = 1/(8L)`; the half step uses `F(z_k)`, the full step `F(z_half)`.
/// Output: half-step iterate with the smallest residual norm.
pub fn run_eag(op: &dyn Operator, z0: &DVector<f64>, config: &SolverConfig) -> Result<Trace> {
    check_algorithm(config, Algorithm::Eag)?;
    config.validate()?;
    let l = config.resolve_l(op, z0)?;
    let alpha = 1.0 / (8.0 * l);
    let p = 2.0;

    let mut state = LoopState::new(config.k);
    state.observe_point(op, z0);
    let mut z = z0.clone();
    for k_iter in 0..config.k {
        let fz = op.eval(&z);
        if fz.amax() == 0.0 {
            state.stop = StopReason::OperatorZero;
            break;
        }
        let anchor = &z + (z0 - &z) / (k_iter as f64 + 1.0);
        let z_half = &anchor - alpha * &fz;
        let f_half = op.eval(&z_half);
        let norm_f_half = dual_norm(&f_half, p)?;
        let z_full = &anchor - alpha * &f_half;
        let norm_f_full = dual_norm(&op.eval(&z_full), p)?;
        let displacement = lp_norm(&(&z_half - &z), p)?;
        state.observe_point(op, &z_half);
        state.observe_point(op, &z_full);
        state.update_best(norm_f_half, &z_half);
        state.records.push(IterationRecord {
            k: k_iter,
            z: z.clone(),
            z_half,
            z_full: z_full.clone(),
            lambda: alpha,
            norm_f_half,
            norm_f_full,
            displacement,
            weighted_average: None,
        });
        z = z_full;
        if config.target_eps > 0.0 && norm_f_half <= config.target_eps {
            state.stop = StopReason::TargetReached;
            break;
        }
    }
    let stop = state.stop;
    let meta = TraceMeta {
        algorithm: Algorithm::Eag,
        s: 1,
        p,
        nu: None,
        l,
        alpha: Some(alpha),
        left_domain_box: state.left_box,
    };
    Ok(seal(finish_best_halfstep(state, z0, meta), stop))
}

/// Dispatch to the runner selected by `config.algorithm`.
pub fn run(op: &dyn Operator, z0: &DVector<f64>, config: &SolverConfig) -> Result<Trace> {
    match config.algorithm {
        Algorithm::HoegPlusL2 => run_hoeg_plus_l2(op, z0, config),
        Algorithm::LpHoegPlus => run_lp_hoeg_plus(op, z0, config),
        Algorithm::LpHomvi => run_lp_homvi(op, z0, config),
        Algorithm::Eag => run_eag(op, z0, config),
    }
}

/// Monte-Carlo restricted merit value of a candidate output point.
///
/// Samples `samples` points `z` uniformly from the Euclidean ball of radius
/// `radius` around `center` and returns the largest `⟨F(z), z_out − z⟩`.
/// Non-positive values certify (up to sampling resolution) that `z_out` is a
/// good solution against that ball.
pub fn restricted_gap(
    op: &dyn Operator,
    z_out: &DVector<f64>,
    center: &DVector<f64>,
    radius: f64,
    samples: usize,
    seed: u64,
) -> Result<f64> {
    if z_out.len() != op.dim() || center.len() != op.dim() {
        return Err(Error::Input(format!(
            "dimension mismatch: operator is {}-dimensional, z_out has {} and center {} entries",
            op.dim(),
            z_out.len(),
            center.len()
        )));
    }
    if !(radius > 0.0) || !radius.is_finite() {
        return Err(Error::Input(format!(
            "ball radius must be finite and > 0, got {radius}"
        )));
    }
    if samples == 0 {
        return Err(Error::Input("sample count must be >= 1".into()));
    }
    let d = op.dim();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut worst = f64::NEG_INFINITY;
    for _ in 0..samples {
        let mut dir = DVector::<f64>::zeros(d);
        loop {
            for v in dir.iter_mut() {
                *v = rng.sample(StandardNormal);
            }
            let n = dir.norm();
            if n > 0.0 {
                dir /= n;
                break;
            }
        }
        let u: f64 = rng.gen_range(0.0..1.0);
        let r = radius * u.powf(1.0 / d as f64);
        let z = center + dir * r;
        let gap = op.eval(&z).dot(&(z_out - &z));
        if gap > worst {
            worst = gap;
        }
    }
    Ok(worst)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::problems::make_problem;
    use approx::assert_relative_eq;
    use nalgebra::dvector;

    fn identity_op() -> crate::problems::LinearOperator {
        crate::problems::LinearOperator::identity(2)
    }

    fn bits(v: &DVector<f64>) -> Vec<u64> {
        v.iter().map(|x| x.to_bits()).collect()
    }

    #[test]
    fn nu_default_matches_documented_values() {
        // First-order Euclidean value is pinned exactly.
        assert_eq!(nu_default(Algorithm::HoegPlusL2, 1, 2.0).unwrap(), 0.656);
        // Second-order Euclidean value: log2(2 + 0.5 + 1/10 - 1/32).
        let nu2 = nu_default(Algorithm::HoegPlusL2, 2, 2.0).unwrap();
        assert_relative_eq!(nu2, 2.56875f64.log2(), max_relative = 1e-15);
        assert!((nu2 - 1.36118).abs() < 2e-4);
        // ℓp extragradient value is independent of p and negative at s = 1:
        // (1/2)·log2(3·2^0/2^2) = (1/2)·log2(0.75).
        let nu_lp1 = nu_default(Algorithm::LpHoegPlus, 1, 2.0).unwrap();
        assert_relative_eq!(nu_lp1, 0.5 * 0.75f64.log2(), max_relative = 1e-15);
        assert!(nu_lp1 < 0.0);
        assert_eq!(
            nu_default(Algorithm::LpHoegPlus, 1, 2.0).unwrap(),
            nu_default(Algorithm::LpHoegPlus, 1, 2.0).unwrap()
        );
        // Averaging method at s = 1, p = 2: 2·3/2 − 1 + (1/2)·log2(1) = 2.
        assert_relative_eq!(
            nu_default(Algorithm::LpHomvi, 1, 2.0).unwrap(),
            2.0,
            max_relative = 1e-15
        );
        // The anchored baseline has no ν.
        assert!(matches!(
            nu_default(Algorithm::Eag, 1, 2.0),
            Err(Error::Config(_))
        ));
    }

    #[test]
    fn hoeg_identity_contracts_and_reaches_tiny_norm() {
        // F(z) = z, s = 1, L = 1: both half and full step are exact scalar
        // contractions, so the residual sequence is strictly decreasing and
        // hits 1e-6 once the accumulated contraction factor does.
        let op = identity_op();
        let mut config = SolverConfig::new(Algorithm::HoegPlusL2, 1, 2.0);
        config.l = Some(1.0);
        config.k = 120;
        let z0 = dvector![1.0, 0.0];
        let trace = run_hoeg_plus_l2(&op, &z0, &config).unwrap();
        for w in trace.records.windows(2) {
            assert!(w[1].norm_f_half < w[0].norm_f_half);
            assert!(w[1].norm_f_full < w[0].norm_f_full);
        }
        // Per-iteration contraction of the full step: 1 − 2^{-ν}/2 · (1 − 2^{-ν}).
        let nu = 0.656f64;
        let half_factor = 1.0 - 2f64.powf(-nu);
        let full_factor = 1.0 - 2f64.powf(-nu) / 2.0 * half_factor;
        let r0 = &trace.records[0];
        assert_relative_eq!(r0.z_half[0], half_factor, max_relative = 1e-12);
        assert_relative_eq!(r0.z_full[0], full_factor, max_relative = 1e-12);
        let best = trace.best_half_norm().unwrap();
        assert!(best < 1e-6, "best half-step norm {best} not below 1e-6");
        // The documented contraction reaches 1e-6 within ~110 iterations.
        let hit = trace
            .records
            .iter()
            .position(|r| r.norm_f_half < 1e-6)
            .unwrap();
        assert!(hit <= 115, "first sub-1e-6 iteration was {hit}");
        assert_eq!(trace.stop_reason, StopReason::BudgetExhausted);
    }

    #[test]
    fn hoeg_stationary_start_stops_immediately() {
        let op = identity_op();
        let mut config = SolverConfig::new(Algorithm::HoegPlusL2, 1, 2.0);
        config.l = Some(1.0);
        config.k = 50;
        let z0 = dvector![0.0, 0.0];
        let trace = run_hoeg_plus_l2(&op, &z0, &config).unwrap();
        assert!(trace.records.is_empty());
        assert_eq!(trace.stop_reason, StopReason::OperatorZero);
        assert_eq!(trace.output, z0);
    }

    #[test]
    fn hoeg_target_eps_stops_early() {
        let op = identity_op();
        let mut config = SolverConfig::new(Algorithm::HoegPlusL2, 1, 2.0);
        config.l = Some(1.0);
        config.k = 500;
        config.target_eps = 1e-3;
        let z0 = dvector![1.0, 0.0];
        let trace = run_hoeg_plus_l2(&op, &z0, &config).unwrap();
        assert_eq!(trace.stop_reason, StopReason::TargetReached);
        assert!(trace.records.len() < 500);
        assert!(trace.best_half_norm().unwrap() <= 1e-3);
    }

    #[test]
    fn hoeg_output_attains_min_half_norm() {
        let problem = make_problem("modified_forsaken").unwrap();
        let mut config = SolverConfig::new(Algorithm::HoegPlusL2, 1, 2.0);
        config.l = problem.oracle.metadata().declared_l(1, 2.0);
        config.k = 200;
        let z0 = dvector![0.5, 0.5];
        let trace = run_hoeg_plus_l2(problem.oracle.as_ref(), &z0, &config).unwrap();
        let best = trace.best_half_norm().unwrap();
        let out_norm = dual_norm(&problem.oracle.eval(&trace.output), 2.0).unwrap();
        assert_relative_eq!(out_norm, best, max_relative = 1e-15);
    }

    #[test]
    fn hoeg_halfstep_bound_and_lambda_recompute() {
        // ‖F(z_half)‖ ≤ (2^ν + 1)·L/s! · ‖z_half − z_k‖^s with slack 1e-6,
        // and λ_k must be recomputable from the recorded displacement.
        // The s = 2 run stops at 1e-13: past that point the iterates sit at
        // the f64 noise floor where the bound's right side falls below the
        // rounding error of evaluating F itself.
        for (s, l) in [(1u32, 60.0), (2u32, 140.0)] {
            let problem = make_problem("modified_forsaken").unwrap();
            let mut config = SolverConfig::new(Algorithm::HoegPlusL2, s, 2.0);
            config.l = Some(l);
            config.k = 300;
            config.target_eps = if s == 1 { 1e-12 } else { 1e-13 };
            let nu = nu_default(Algorithm::HoegPlusL2, s, 2.0).unwrap();
            let z0 = dvector![0.5, 0.5];
            let trace = run_hoeg_plus_l2(problem.oracle.as_ref(), &z0, &config).unwrap();
            assert!(!trace.records.is_empty());
            let coeff = (2f64.powf(nu) + 1.0) * l / factorial(s);
            for r in &trace.records {
                let bound = coeff * r.displacement.powi(s as i32);
                assert!(
                    r.norm_f_half <= bound * (1.0 + 1e-6),
                    "s={s} k={}: half norm {} exceeds bound {}",
                    r.k,
                    r.norm_f_half,
                    bound
                );
                let lambda = 2f64.powf(-nu) * r.displacement.powf(1.0 - s as f64);
                assert_relative_eq!(lambda, r.lambda, max_relative = 1e-12);
                assert!(r.lambda > 0.0);
            }
        }
    }

    #[test]
    fn hoeg_monotone_linear_half_norms_nonincreasing() {
        // Symmetric positive-definite linear operator: the half-step residual
        // sequence is non-increasing for the first-order Euclidean method.
        let m = crate::problems::linear_monotone_matrix(4, 1.0, 0.0);
        let op = crate::problems::LinearOperator::new(m, "spd").unwrap();
        let mut config = SolverConfig::new(Algorithm::HoegPlusL2, 1, 2.0);
        config.l = Some(1.0);
        config.k = 100;
        let z0 = dvector![1.0, -2.0, 0.5, 3.0];
        let trace = run_hoeg_plus_l2(&op, &z0, &config).unwrap();
        for w in trace.records.windows(2) {
            assert!(w[1].norm_f_half <= w[0].norm_f_half * (1.0 + 1e-12));
        }
    }

    #[test]
    fn hoeg_estimated_l_converges_on_shifted_coupling() {
        let problem = make_problem("modified_forsaken").unwrap();
        let mut config = SolverConfig::new(Algorithm::HoegPlusL2, 1, 2.0);
        config.k = 5000;
        config.seed = 0;
        config.target_eps = 1e-12;
        let z0 = dvector![0.5, 0.5];
        let trace = run_hoeg_plus_l2(problem.oracle.as_ref(), &z0, &config).unwrap();
        // The cube around z0 reaches |x| = 3.5 where the coupling curvature is
        // large, so the estimate exceeds the constant declared for the
        // documentation box — yet the run still reaches 1e-3.
        assert!(trace.meta.l > 60.0);
        let best = trace.best_half_norm().unwrap();
        assert!(best <= 1e-3, "best norm {best} with estimated L {}", trace.meta.l);
    }

    #[test]
    fn lp_second_order_converges_on_shifted_coupling() {
        let problem = make_problem("modified_forsaken").unwrap();
        let mut config = SolverConfig::new(Algorithm::LpHoegPlus, 2, 2.0);
        config.l = Some(140.0);
        config.k = 2000;
        config.target_eps = 1e-13;
        let z0 = dvector![0.5, 0.5];
        let trace = run_lp_hoeg_plus(problem.oracle.as_ref(), &z0, &config).unwrap();
        let best = trace.best_half_norm().unwrap();
        assert!(best <= 1e-3, "best norm {best}");
        assert_eq!(trace.stop_reason, StopReason::TargetReached);
    }

    #[test]
    fn lp_matches_hoeg_on_identity_up_to_schedule() {
        // Same skeleton at p = 2, s = 1; only ν and the λ schedule differ.
        let op = identity_op();
        let z0 = dvector![1.0, 0.0];

        let mut hoeg = SolverConfig::new(Algorithm::HoegPlusL2, 1, 2.0);
        hoeg.l = Some(1.0);
        hoeg.k = 400;
        let t_hoeg = run_hoeg_plus_l2(&op, &z0, &hoeg).unwrap();

        let mut lp = SolverConfig::new(Algorithm::LpHoegPlus, 1, 2.0);
        lp.l = Some(1.0);
        lp.k = 400;
        let t_lp = run_lp_hoeg_plus(&op, &z0, &lp).unwrap();

        // Both contract geometrically on the identity operator.
        assert!(t_hoeg.best_half_norm().unwrap() < 1e-10);
        assert!(t_lp.best_half_norm().unwrap() < 1e-10);

        // Half step of the ℓp method at s = 1, p = 2 solves
        // F(z_k) + 2^ν·L·2·(z − z_k) = 0, i.e. contraction 1 − 2^{−(ν+1)}.
        let nu_lp = nu_default(Algorithm::LpHoegPlus, 1, 2.0).unwrap();
        let expect_half = 1.0 - 2f64.powf(-(nu_lp + 1.0));
        assert_relative_eq!(t_lp.records[0].z_half[0], expect_half, max_relative = 1e-12);
        // λ schedule at s = 1, p = 2 is the constant (1/8)^{1/2}.
        for r in &t_lp.records {
            assert_relative_eq!(r.lambda, 0.125f64.sqrt(), max_relative = 1e-15);
        }
    }

    #[test]
    fn lp_rejects_p_larger_than_s_plus_one_and_l_zero() {
        let op = identity_op();
        let z0 = dvector![1.0, 0.0];
        let mut config = SolverConfig::new(Algorithm::LpHoegPlus, 1, 3.0);
        config.l = Some(1.0);
        let err = run_lp_hoeg_plus(&op, &z0, &config).unwrap_err();
        match err {
            Error::Config(msg) => assert!(msg.contains("s + 1 >= p >= 2"), "message: {msg}"),
            other => panic!("expected Config error, got {other:?}"),
        }
        let mut config = SolverConfig::new(Algorithm::LpHoegPlus, 2, 2.0);
        config.l = Some(0.0);
        assert!(matches!(
            run_lp_hoeg_plus(&op, &z0, &config).unwrap_err(),
            Error::Config(_)
        ));
    }

    #[test]
    fn lp_halfstep_identity_and_bound() {
        // On the ℓp half step the regularizer gradient exactly balances the
        // Taylor model: ‖T_{s−1}(z_half)‖_{p*} = (s+1)·2^ν·L/s!·‖Δ‖_p^s, and
        // the true residual obeys the bound with (s+1)·2^ν + 1.
        for (s, p, l) in [(2u32, 2.0, 140.0), (2u32, 3.0, 200.0), (3u32, 3.0, 365.0)] {
            let problem = make_problem("modified_forsaken").unwrap();
            let op = problem.oracle.as_ref();
            let mut config = SolverConfig::new(Algorithm::LpHoegPlus, s, p);
            config.l = Some(l);
            config.k = 60;
            let nu = nu_default(Algorithm::LpHoegPlus, s, p).unwrap();
            let z0 = dvector![0.5, 0.5];
            let trace = run_lp_hoeg_plus(op, &z0, &config).unwrap();
            assert!(!trace.records.is_empty());
            let coeff = ((s as f64 + 1.0) * 2f64.powf(nu) + 1.0) * l / factorial(s);
            for r in trace.records.iter().take(25) {
                let bound = coeff * r.displacement.powi(s as i32);
                assert!(
                    r.norm_f_half <= bound * (1.0 + 1e-6),
                    "(s={s}, p={p}) k={}: {} > {}",
                    r.k,
                    r.norm_f_half,
                    bound
                );
                // Model identity at the root.
                let model = crate::oracle::taylor(op, &r.z, s - 1)
                    .unwrap()
                    .evaluate(&r.z_half)
                    .unwrap();
                let model_norm = dual_norm(&model, p).unwrap();
                let ident = (s as f64 + 1.0) * 2f64.powf(nu) * l / factorial(s)
                    * r.displacement.powi(s as i32);
                assert_relative_eq!(model_norm, ident, max_relative = 1e-6);
                // λ recompute from displacement.
                let lambda = lp_lambda(LambdaVariant::Box, s, p, nu, r.displacement);
                assert_relative_eq!(lambda, r.lambda, max_relative = 1e-12);
            }
        }
    }

    #[test]
    fn lp_proof_schedule_runs_and_differs() {
        let op = identity_op();
        let z0 = dvector![1.0, 0.0];
        let mut config = SolverConfig::new(Algorithm::LpHoegPlus, 1, 2.0);
        config.l = Some(1.0);
        config.k = 3000;
        config.lambda_variant = LambdaVariant::Proof;
        let trace = run_lp_hoeg_plus(&op, &z0, &config).unwrap();
        assert!(trace.best_half_norm().unwrap() < 1e-4);
        // At s = 1, p = 2 the conservative schedule is the constant
        // (2^{-(p+1)})^2 · 2^{-ν} = 2^{-6-ν}.
        let nu = nu_default(Algorithm::LpHoegPlus, 1, 2.0).unwrap();
        let expected = 2f64.powf(-6.0) * 2f64.powf(-nu);
        for r in &trace.records {
            assert_relative_eq!(r.lambda, expected, max_relative = 1e-12);
        }
        assert!((expected - 0.125f64.sqrt()).abs() > 1e-3);
    }

    #[test]
    fn homvi_identity_average_converges() {
        let op = identity_op();
        let z0 = dvector![1.0, 0.0];
        let mut config = SolverConfig::new(Algorithm::LpHomvi, 1, 2.0);
        config.l = Some(1.0);
        config.k = 500;
        let trace = run_lp_homvi(&op, &z0, &config).unwrap();
        assert_eq!(trace.output_rule, OutputRule::LambdaWeightedAverage);
        // λ is constant 2^{-2} at s = 1, p = 2.
        for r in &trace.records {
            assert_relative_eq!(r.lambda, 0.25, max_relative = 1e-15);
        }
        // Half step contracts by 1 − 1/(2^{ν+1}) = 7/8 each iteration.
        assert_relative_eq!(trace.records[0].z_half[0], 0.875, max_relative = 1e-12);
        // The weighted average of a geometrically decaying sequence decays
        // like 1/K.
        let out_norm = trace.output.norm();
        assert!(out_norm < 0.02, "average norm {out_norm}");
        // Restricted merit value over the unit ball decreases with budget.
        let gap_50 = restricted_gap(
            &op,
            &trace.records[49].weighted_average.clone().unwrap(),
            &DVector::zeros(2),
            1.0,
            2000,
            5,
        )
        .unwrap();
        let gap_500 = restricted_gap(&op, &trace.output, &DVector::zeros(2), 1.0, 2000, 5).unwrap();
        assert!(gap_500 < gap_50 / 5.0, "gap_500={gap_500} gap_50={gap_50}");
    }

    #[test]
    fn homvi_zero_operator_stops_at_start() {
        let m = nalgebra::DMatrix::<f64>::zeros(2, 2);
        let op = crate::problems::LinearOperator::new(m, "zero").unwrap();
        let z0 = dvector![0.3, -0.7];
        let mut config = SolverConfig::new(Algorithm::LpHomvi, 1, 2.0);
        config.l = Some(1.0);
        config.k = 10;
        let trace = run_lp_homvi(&op, &z0, &config).unwrap();
        assert!(trace.records.is_empty());
        assert_eq!(trace.stop_reason, StopReason::OperatorZero);
        assert_eq!(trace.output, z0);
    }

    #[test]
    fn homvi_weighted_average_recomputes() {
        let problem = make_problem("bilinear").unwrap();
        let z0 = dvector![1.0, 0.5];
        let mut config = SolverConfig::new(Algorithm::LpHomvi, 2, 3.0);
        config.l = Some(2.0);
        config.k = 40;
        let trace = run_lp_homvi(problem.oracle.as_ref(), &z0, &config).unwrap();
        let mut wsum = 0.0;
        let mut acc = DVector::<f64>::zeros(2);
        for r in &trace.records {
            assert!(r.lambda > 0.0);
            wsum += r.lambda;
            acc += r.lambda * &r.z_half;
            let avg = &acc / wsum;
            let recorded = r.weighted_average.as_ref().unwrap();
            assert_relative_eq!((&avg - recorded).norm(), 0.0, epsilon = 1e-12);
            // λ recompute from the Bregman divergence of the recorded pair.
            let omega = bregman(&PotentialSpec::LpPowP { p: 3.0 }, &r.z_half, &r.z)
                .unwrap()
                .max(0.0);
            let nu = trace.meta.nu.unwrap();
            let lambda = 2f64.powf(-nu) * omega.powf(-(3.0f64 - 3.0) / 3.0);
            assert_relative_eq!(lambda, r.lambda, max_relative = 1e-12);
        }
        assert_eq!(trace.output, *trace.records.last().unwrap().weighted_average.as_ref().unwrap());
    }

    #[test]
    fn eag_identity_decays_by_factor_ten() {
        let op = identity_op();
        let z0 = dvector![1.0, 0.0];
        let mut config = SolverConfig::new(Algorithm::Eag, 1, 2.0);
        config.l = Some(1.0);
        config.k = 200;
        let trace = run_eag(&op, &z0, &config).unwrap();
        assert_eq!(trace.records.len(), 200);
        let final_norm = trace.final_full_norm().unwrap();
        assert!(
            final_norm < 1.0 / 10.0,
            "‖F(z_K)‖ = {final_norm} not below ‖F(z_0)‖/10"
        );
        assert_eq!(trace.meta.alpha, Some(0.125));
        for r in &trace.records {
            assert_eq!(r.lambda, 0.125);
        }
    }

    #[test]
    fn eag_stationary_start_stops() {
        let op = identity_op();
        let z0 = dvector![0.0, 0.0];
        let mut config = SolverConfig::new(Algorithm::Eag, 1, 2.0);
        config.l = Some(1.0);
        let trace = run_eag(&op, &z0, &config).unwrap();
        assert!(trace.records.is_empty());
        assert_eq!(trace.stop_reason, StopReason::OperatorZero);
    }

    #[test]
    fn eag_rejects_higher_order_config() {
        let mut config = SolverConfig::new(Algorithm::Eag, 2, 2.0);
        config.l = Some(1.0);
        assert!(matches!(config.validate(), Err(Error::Config(_))));
    }

    #[test]
    fn runs_are_deterministic() {
        let problem = make_problem("modified_forsaken").unwrap();
        let z0 = dvector![0.5, 0.5];
        for algorithm in [
            Algorithm::HoegPlusL2,
            Algorithm::LpHoegPlus,
            Algorithm::LpHomvi,
            Algorithm::Eag,
        ] {
            let s = if algorithm == Algorithm::Eag { 1 } else { 2 };
            let mut config = SolverConfig::new(algorithm, s, 2.0);
            config.l = Some(140.0);
            config.k = 30;
            let a = run(problem.oracle.as_ref(), &z0, &config).unwrap();
            let b = run(problem.oracle.as_ref(), &z0, &config).unwrap();
            assert_eq!(a.records.len(), b.records.len());
            for (ra, rb) in a.records.iter().zip(&b.records) {
                assert_eq!(bits(&ra.z), bits(&rb.z), "{algorithm:?}");
                assert_eq!(bits(&ra.z_half), bits(&rb.z_half));
                assert_eq!(bits(&ra.z_full), bits(&rb.z_full));
                assert_eq!(ra.lambda.to_bits(), rb.lambda.to_bits());
                assert_eq!(ra.norm_f_half.to_bits(), rb.norm_f_half.to_bits());
            }
            assert_eq!(bits(&a.output), bits(&b.output));
        }
    }

    #[test]
    fn runner_rejects_mismatched_algorithm() {
        let op = identity_op();
        let z0 = dvector![1.0, 0.0];
        let mut config = SolverConfig::new(Algorithm::LpHomvi, 1, 2.0);
        config.l = Some(1.0);
        assert!(matches!(
            run_hoeg_plus_l2(&op, &z0, &config).unwrap_err(),
            Error::Config(_)
        ));
    }

    #[test]
    fn domain_box_departure_is_flagged() {
        let problem = make_problem("forsaken").unwrap();
        let mut config = SolverConfig::new(Algorithm::HoegPlusL2, 1, 2.0);
        config.l = Some(13.0);
        config.k = 3;
        // Start outside the documented box: flag must be set.
        let outside = dvector![2.0, 2.0];
        let trace = run_hoeg_plus_l2(problem.oracle.as_ref(), &outside, &config).unwrap();
        assert!(trace.meta.left_domain_box);
        // A short run from a stationary point stays inside.
        let inside = dvector![
            crate::problems::SHIFTED_COUPLING_STATIONARY[0],
            crate::problems::SHIFTED_COUPLING_STATIONARY[1]
        ];
        let trace = run_hoeg_plus_l2(problem.oracle.as_ref(), &inside, &config).unwrap();
        assert!(!trace.meta.left_domain_box);
    }

    #[test]
    fn restricted_gap_examples() {
        // At an exact solution of a monotone problem the gap is ≤ 0 up to
        // sampling noise (here exactly ≤ 1e-12: F(z*) = 0 and monotonicity).
        let op = identity_op();
        let z_star = DVector::<f64>::zeros(2);
        let gap = restricted_gap(&op, &z_star, &z_star, 1.0, 5000, 1).unwrap();
        assert!(gap <= 1e-12, "gap at solution: {gap}");
        // F(z) = z, z_out = (1, 0), unit ball: max ⟨z, z_out − z⟩ ≈ 1/4
        // attained near z = z_out/2.
        let z_out = dvector![1.0, 0.0];
        let gap = restricted_gap(&op, &z_out, &DVector::zeros(2), 1.0, 20000, 2).unwrap();
        assert!((gap - 0.25).abs() < 0.01, "gap {gap} should be near 0.25");
        // Bilinear coupling, output far from the solution: positive gap.
        let problem = make_problem("bilinear").unwrap();
        let far = dvector![2.0, 2.0];
        let gap = restricted_gap(problem.oracle.as_ref(), &far, &DVector::zeros(2), 1.0, 5000, 3)
            .unwrap();
        assert!(gap > 0.0);
    }

    #[test]
    fn restricted_gap_rejects_bad_input() {
        let op = identity_op();
        let z = dvector![0.0, 0.0];
        assert!(restricted_gap(&op, &z, &z, 0.0, 10, 0).is_err());
        assert!(restricted_gap(&op, &z, &z, 1.0, 0, 0).is_err());
        let z3 = dvector![0.0, 0.0, 0.0];
        assert!(restricted_gap(&op, &z3, &z, 1.0, 10, 0).is_err());
    }
}
