//! Numerical verification of operator conditions, theoretical ρ-range
//! calculators, and convergence-rate fitting.
//!
//! The verifiers estimate how far an operator is from monotonicity,
//! comonotonicity, or the weak Minty condition by deterministic sampling,
//! and always report the worst witness so a failure can be reproduced
//! without resampling.  [`theorem_rho_bound`] evaluates the closed-form
//! admissible-ρ ranges and constants of the convergence theorems, and
//! [`rate_fit`] extracts empirical decay exponents from iterate histories.

use nalgebra::DVector;
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::error::{Error, Result};
use crate::geometry::dual_norm;
use crate::oracle::{Operator, Region};
use crate::solvers::{nu_default, Algorithm};
use crate::subproblems::factorial;

/// Which operator condition a report describes.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Condition {
    /// `⟨F(z_a) − F(z_b), z_a − z_b⟩ ≥ 0` for all pairs.
    Monotone,
    /// `⟨F(z_a) − F(z_b), z_a − z_b⟩ ≥ ρ‖F(z_a) − F(z_b)‖²`.
    Comonotone,
    /// `⟨F(z), z − z*⟩ ≥ −(ρ/2)‖F(z)‖_{p*}^q` against a stationary `z*`.
    WeakMvi,
}

impl Condition {
    /// Short stable identifier used in JSON reports.
    pub fn name(self) -> &'static str {
        match self {
            Condition::Monotone => "monotone",
            Condition::Comonotone => "comonotone",
            Condition::WeakMvi => "weak_mvi",
        }
    }
}

/// The sample attaining the reported extreme value.
#[derive(Debug, Clone)]
pub enum Witness {
    /// Pair witness for monotone / comonotone checks.
    Pair {
        /// First point of the pair.
        z_a: DVector<f64>,
        /// Second point of the pair.
        z_b: DVector<f64>,
    },
    /// Point witness for the weak Minty check.
    Point {
        /// The sampled point.
        z: DVector<f64>,
    },
}

/// Outcome of a sampling verifier.
#[derive(Debug, Clone)]
pub struct ConditionReport {
    /// Which condition was probed.
    pub condition: Condition,
    /// Monotone: the minimal pair inner product. Comonotone: the estimated
    /// ρ (minimal normalized inner product). Weak Minty: the estimated ρ
    /// (maximal deficit, clipped below at 0).
    pub estimated_rho: f64,
    /// Sample attaining the extreme value, when any sample was usable.
    pub worst_witness: Option<Witness>,
    /// Number of samples actually evaluated (degenerate ones skipped).
    pub samples: usize,
    /// Deficit exponent `q` (weak Minty only).
    pub exponent_q: Option<f64>,
    /// Pass/fail verdict against a theorem bound, when one was applied.
    pub verdict_against_bound: Option<bool>,
}

impl ConditionReport {
    /// Attach a pass/fail verdict comparing the estimate against an
    /// admissible-ρ upper bound: pass means the estimate is inside the range
    /// the theorem covers.
    pub fn with_verdict_against(mut self, rho_max: f64) -> Self {
        self.verdict_against_bound = Some(self.estimated_rho < rho_max);
        self
    }
}

/// Closed-form constants of the convergence theorems at `(s, p, L)`.
///
/// The Euclidean quantities (`rho_max_balanced`, `c1`, `c2`) always use the
/// Euclidean default exponent ν(s); the ℓp quantities (`rho_max_lp`, `c_sp`,
/// `c_sprho`) always use the ℓp default exponent.  `c1` and `c_sprho` are the
/// ρ-independent values (ρ = 0); the `*_at_rho` methods apply the ρ penalty.
#[derive(Debug, Clone)]
pub struct TheoremBounds {
    /// Order the bounds are evaluated at.
    pub s: u32,
    /// Norm exponent the bounds are evaluated at.
    pub p: f64,
    /// Smoothness constant the bounds are evaluated at.
    pub l: f64,
    /// Regularization exponent of the requesting algorithm.
    pub nu: f64,
    /// Admissible-ρ upper bound of the Euclidean theorem.
    pub rho_max_balanced: f64,
    /// Admissible-ρ upper bound of the ℓp theorem (independent of p).
    pub rho_max_lp: f64,
    /// Admissible-ρ upper bound of the first-order anchored reference.
    pub rho_max_first_order: f64,
    /// Euclidean rate constant at ρ = 0.
    pub c1: f64,
    /// Euclidean rate scale constant.
    pub c2: f64,
    /// ℓp rate constant.
    pub c_sp: f64,
    /// ℓp admissibility constant at ρ = 0.
    pub c_sprho: f64,
    /// Geometry constant `2^{−(p+1)}`.
    pub m_p: f64,
    /// Geometry constant `2^{−(s−1)}`.
    pub m_s: f64,
}

impl TheoremBounds {
    /// Euclidean rate constant with the ρ penalty applied.
    pub fn c1_at_rho(&self, rho: f64) -> f64 {
        let s = self.s as f64;
        let nu2 = nu_l2(self.s);
        let sfact = factorial(self.s);
        1.0 - 2f64.powf(-(2.0 * nu2 + 2.0))
            - rho / 2f64.powf(nu2) * ((2f64.powf(nu2) + 1.0) * self.l / sfact).powf((s + 1.0) / s)
    }

    /// ℓp admissibility constant with the ρ penalty applied.
    pub fn c_sprho_at_rho(&self, rho: f64) -> f64 {
        let s = self.s as f64;
        let sfact = factorial(self.s);
        let base = (s * (s + 1.0) - (4.0 * s).powf((s - 1.0) / s) / (s + 1.0).powf(1.0 + 2.0 / s))
            * (sfact / ((s + 1.0).powi(2) * self.l)).powf((s + 1.0) / s);
        base - sfact * rho / (2.0 * self.l)
    }
}

fn nu_l2(s: u32) -> f64 {
    nu_default(Algorithm::HoegPlusL2, s, 2.0).expect("Euclidean nu is defined for all s >= 1")
}

fn nu_lp(s: u32) -> f64 {
    nu_default(Algorithm::LpHoegPlus, s, 2.0).expect("lp nu is defined for all s >= 1")
}

/// Evaluate the theorems' closed-form ρ ranges and constants.
///
/// `algorithm` selects the validation rule for `(s, p)` and which default
/// exponent is reported in `nu`; the anchored baseline has no exponent and
/// is rejected (its reference range is available as `rho_max_first_order`
/// on any result).
pub fn theorem_rho_bound(s: u32, p: f64, l: f64, algorithm: Algorithm) -> Result<TheoremBounds> {
    if s < 1 {
        return Err(Error::Config("order s must satisfy s >= 1".into()));
    }
    if !(l > 0.0) || !l.is_finite() {
        return Err(Error::Config(format!(
            "smoothness constant L must be finite and > 0, got {l}"
        )));
    }
    match algorithm {
        Algorithm::HoegPlusL2 => {
            if p != 2.0 {
                return Err(Error::Config(format!(
                    "hoeg_plus_l2 requires p = 2, got p = {p}"
                )));
            }
        }
        Algorithm::LpHoegPlus | Algorithm::LpHomvi => {
            if !p.is_finite() || p < 2.0 || p > (s + 1) as f64 {
                return Err(Error::Config(format!(
                    "{} requires s + 1 >= p >= 2, got s = {s}, p = {p}",
                    algorithm.name()
                )));
            }
        }
        Algorithm::Eag => {
            return Err(Error::Config(
                "eag has no regularization exponent; request bounds through one of the \
                 higher-order algorithms (its reference range is rho_max_first_order)"
                    .into(),
            ));
        }
    }
    let nu = nu_default(algorithm, s, p)?;
    let sf = s as f64;
    let sfact = factorial(s);

    let nu2 = nu_l2(s);
    let rho_max_balanced = (2f64.powf(nu2) - 2f64.powf(-(nu2 + 2.0)))
        * (sfact / ((2f64.powf(nu2) + 1.0) * l)).powf((sf + 1.0) / sf);
    let c1 = 1.0 - 2f64.powf(-(2.0 * nu2 + 2.0));
    let c2 = (sfact / ((2f64.powf(nu2) + 1.0) * l)).powf(2.0 / sf);

    let nup = nu_lp(s);
    let rho_max_lp = 2.0
        * (2f64.powf(nup) - sf / (2f64.powf((nup - sf + 1.0) / sf) * (sf + 1.0).powf(1.0 + 1.0 / sf)))
        * (sfact / (((sf + 1.0) * 2f64.powf(nup) + 1.0).powf(sf + 1.0) * l)).powf(1.0 / sf);
    let c_sp = 2f64.powf(-((p + 1.0) * (sf + 1.0) + nup * (p - 1.0)) / sf)
        * (sfact / (p * l)).powf((p - (sf + 1.0)) / sf);

    let mut bounds = TheoremBounds {
        s,
        p,
        l,
        nu,
        rho_max_balanced,
        rho_max_lp,
        rho_max_first_order: 1.0 / (4.0 * l),
        c1,
        c2,
        c_sp,
        c_sprho: 0.0,
        m_p: 2f64.powf(-(p + 1.0)),
        m_s: 2f64.powf(-(sf - 1.0)),
    };
    bounds.c_sprho = bounds.c_sprho_at_rho(0.0);
    Ok(bounds)
}

/// Root of `x^{d+1} = x + 1`, the basis of the d-dimensional
/// low-discrepancy lattice.
fn plastic_root(d: usize) -> f64 {
    let n = (d + 1) as f64;
    let mut x = 1.5f64;
    for _ in 0..64 {
        let fx = x.powf(n) - x - 1.0;
        let dfx = n * x.powf(n - 1.0) - 1.0;
        let next = x - fx / dfx;
        if (next - x).abs() < 1e-15 {
            return next;
        }
        x = next;
    }
    x
}

/// Deterministic low-discrepancy point set over a region: a shifted rank-1
/// lattice with golden-ratio-generalized increments.
fn lattice_points(region: &Region, count: usize, rng: &mut ChaCha8Rng) -> Vec<DVector<f64>> {
    let d = region.dim();
    let phi = plastic_root(d);
    let alpha: Vec<f64> = (0..d).map(|i| phi.powi(-(i as i32 + 1))).collect();
    let shift: Vec<f64> = (0..d).map(|_| rng.gen_range(0.0..1.0)).collect();
    (0..count)
        .map(|n| {
            DVector::from_iterator(
                d,
                (0..d).map(|i| {
                    let x = (shift[i] + (n as f64 + 1.0) * alpha[i]).fract();
                    region.lo[i] + x * (region.hi[i] - region.lo[i])
                }),
            )
        })
        .collect()
}

/// Log-spaced shell of points around `center`, clipped to the region.
fn shell_points(
    region: &Region,
    center: &DVector<f64>,
    radii: usize,
    directions: usize,
    rng: &mut ChaCha8Rng,
) -> Vec<DVector<f64>> {
    let d = region.dim();
    let r_hi = (0..d)
        .map(|i| (region.hi[i] - region.lo[i]) / 2.0)
        .fold(0.0f64, f64::max)
        / 2.0;
    let r_lo = 1e-4f64.min(r_hi / 2.0);
    let mut dirs = Vec::with_capacity(directions);
    for _ in 0..directions {
        loop {
            let v = DVector::from_iterator(d, (0..d).map(|_| rng.sample::<f64, _>(StandardNormal)));
            let n = v.norm();
            if n > 0.0 {
                dirs.push(v / n);
                break;
            }
        }
    }
    let mut pts = Vec::with_capacity(radii * directions);
    for j in 0..radii {
        let f = j as f64 / (radii.max(2) - 1) as f64;
        let r = r_lo * (r_hi / r_lo).powf(f);
        for dir in &dirs {
            let z = center + dir * r;
            if region.contains(&z) {
                pts.push(z);
            }
        }
    }
    pts
}

/// Estimate the weak Minty deficit coefficient ρ against a stationary point.
///
/// Samples a low-discrepancy lattice over `region` plus a dense log-spaced
/// shell around `z_star` (violations concentrate near stationary points),
/// and returns `max(0, max_z −2⟨F(z), z − z*⟩ / ‖F(z)‖_{p*}^q)`.  Samples
/// with `‖F(z)‖_{p*} < 1e−12` are skipped.
pub fn verify_weak_mvi(
    op: &dyn Operator,
    z_star: &DVector<f64>,
    q_exponent: f64,
    p: f64,
    region: &Region,
    samples: usize,
    seed: u64,
) -> Result<ConditionReport> {
    if z_star.len() != op.dim() || region.dim() != op.dim() {
        return Err(Error::Input(
            "operator, z_star, and region dimensions must agree".into(),
        ));
    }
    if !(q_exponent > 0.0) || !q_exponent.is_finite() {
        return Err(Error::Input(format!(
            "exponent q must be finite and > 0, got {q_exponent}"
        )));
    }
    if samples == 0 {
        return Err(Error::Input("sample count must be >= 1".into()));
    }
    let f_star = op.eval(z_star);
    let star_norm = dual_norm(&f_star, p)?;
    if star_norm > 1e-6 {
        return Err(Error::Precondition(format!(
            "z_star is not stationary: ‖F(z_star)‖ = {star_norm:.3e} exceeds 1e-6"
        )));
    }

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let shell_dirs = 64usize.min((samples / 128).max(1));
    let shell_radii = 32usize;
    let lattice_count = samples.saturating_sub(shell_dirs * shell_radii).max(1);
    let mut points = lattice_points(region, lattice_count, &mut rng);
    points.extend(shell_points(region, z_star, shell_radii, shell_dirs, &mut rng));

    let mut evaluated = 0usize;
    let mut best: Option<(f64, DVector<f64>)> = None;
    for z in points {
        let f = op.eval(&z);
        let nf = dual_norm(&f, p)?;
        if nf < 1e-12 {
            continue;
        }
        evaluated += 1;
        let stat = -2.0 * f.dot(&(&z - z_star)) / nf.powf(q_exponent);
        match &best {
            Some((b, _)) if *b >= stat => {}
            _ => best = Some((stat, z)),
        }
    }
    let (raw, witness) = match best {
        Some((v, z)) => (v, Some(Witness::Point { z })),
        None => (0.0, None),
    };
    Ok(ConditionReport {
        condition: Condition::WeakMvi,
        estimated_rho: raw.max(0.0),
        worst_witness: witness,
        samples: evaluated,
        exponent_q: Some(q_exponent),
        verdict_against_bound: None,
    })
}

/// Check monotonicity on sampled pairs: reports the minimal pair inner
/// product `⟨F(z_a) − F(z_b), z_a − z_b⟩` and a verdict (pass when the
/// minimum is ≥ −1e−12).
pub fn verify_monotone(
    op: &dyn Operator,
    region: &Region,
    samples: usize,
    seed: u64,
) -> Result<ConditionReport> {
    if region.dim() != op.dim() {
        return Err(Error::Input(
            "operator and region dimensions must agree".into(),
        ));
    }
    if samples < 2 {
        return Err(Error::Input("need at least 2 samples".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut worst: Option<(f64, DVector<f64>, DVector<f64>)> = None;
    for _ in 0..samples {
        let z_a = region.sample(&mut rng);
        let z_b = region.sample(&mut rng);
        let inner = (op.eval(&z_a) - op.eval(&z_b)).dot(&(&z_a - &z_b));
        match &worst {
            Some((w, _, _)) if *w <= inner => {}
            _ => worst = Some((inner, z_a, z_b)),
        }
    }
    let (min_inner, z_a, z_b) = worst.expect("samples >= 2");
    Ok(ConditionReport {
        condition: Condition::Monotone,
        estimated_rho: min_inner,
        worst_witness: Some(Witness::Pair { z_a, z_b }),
        samples,
        exponent_q: None,
        verdict_against_bound: Some(min_inner >= -1e-12),
    })
}

/// Estimate the comonotonicity coefficient on sampled pairs:
/// `ρ̂ = min ⟨F(z_a) − F(z_b), z_a − z_b⟩ / ‖F(z_a) − F(z_b)‖₂²`, skipping
/// pairs whose operator values differ by less than 1e−12.
pub fn verify_comonotone(
    op: &dyn Operator,
    region: &Region,
    samples: usize,
    seed: u64,
) -> Result<ConditionReport> {
    if region.dim() != op.dim() {
        return Err(Error::Input(
            "operator and region dimensions must agree".into(),
        ));
    }
    if samples < 2 {
        return Err(Error::Input("need at least 2 samples".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut evaluated = 0usize;
    let mut worst: Option<(f64, DVector<f64>, DVector<f64>)> = None;
    for _ in 0..samples {
        let z_a = region.sample(&mut rng);
        let z_b = region.sample(&mut rng);
        let df = op.eval(&z_a) - op.eval(&z_b);
        let denom = df.norm_squared();
        if denom.sqrt() < 1e-12 {
            continue;
        }
        evaluated += 1;
        let ratio = df.dot(&(&z_a - &z_b)) / denom;
        match &worst {
            Some((w, _, _)) if *w <= ratio => {}
            _ => worst = Some((ratio, z_a, z_b)),
        }
    }
    let (rho, witness) = match worst {
        Some((v, z_a, z_b)) => (v, Some(Witness::Pair { z_a, z_b })),
        None => (0.0, None),
    };
    Ok(ConditionReport {
        condition: Condition::Comonotone,
        estimated_rho: rho,
        worst_witness: witness,
        samples: evaluated,
        exponent_q: None,
        verdict_against_bound: None,
    })
}

/// Least-squares decay exponent of a positive series.
///
/// Takes `(k, value)` points, forms the running minimum of the values in
/// index order, and fits `log(running-min)` against `log(k + 1)` over the
/// last 80% of the points.  Requires at least 10 points, all positive.
pub fn rate_fit(series: &[(usize, f64)]) -> Result<f64> {
    if series.len() < 10 {
        return Err(Error::Input(format!(
            "rate fit needs at least 10 points, got {}",
            series.len()
        )));
    }
    if let Some((k, v)) = series.iter().find(|(_, v)| !(*v > 0.0)) {
        return Err(Error::Input(format!(
            "rate fit needs positive values; point k = {k} has value {v}"
        )));
    }
    let mut running = Vec::with_capacity(series.len());
    let mut min = f64::INFINITY;
    for (k, v) in series {
        min = min.min(*v);
        running.push(((*k as f64 + 1.0).ln(), min.ln()));
    }
    let start = series.len() / 5;
    let window = &running[start..];
    let n = window.len() as f64;
    let sx: f64 = window.iter().map(|p| p.0).sum();
    let sy: f64 = window.iter().map(|p| p.1).sum();
    let sxx: f64 = window.iter().map(|p| p.0 * p.0).sum();
    let sxy: f64 = window.iter().map(|p| p.0 * p.1).sum();
    let denom = n * sxx - sx * sx;
    if denom.abs() < 1e-300 {
        return Err(Error::Input(
            "rate window has no index spread to fit against".into(),
        ));
    }
    Ok((n * sxy - sx * sy) / denom)
}
