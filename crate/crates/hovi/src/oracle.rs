//! Operator abstraction: evaluation F(z), higher-order directional
//! derivatives, Taylor models T_{s−1}(z′; z), and finite-difference fallbacks.

use crate::error::{Error, Result};
use crate::geometry::{dual_norm, lp_norm};
use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// A declared smoothness constant for one (s, p) pair, valid on the
/// operator's reference box.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DeclaredL {
    pub s: u32,
    pub p: f64,
    pub value: f64,
}

/// Immutable operator metadata: identification, declared smoothness
/// constants, known stationary points, and documentation-only boxes.
#[derive(Debug, Clone, Default)]
pub struct OperatorMetadata {
    pub name: String,
    /// Smoothness constants valid on `reference_box`.
    pub declared_l: Vec<DeclaredL>,
    /// Points with ‖F(z*)‖ ≤ 1e−9.
    pub known_stationary_points: Vec<DVector<f64>>,
    /// Box on which `declared_l` entries hold.
    pub reference_box: Option<(DVector<f64>, DVector<f64>)>,
    /// Original problem-statement bounds; documentation only, never enforced.
    pub domain_box: Option<(DVector<f64>, DVector<f64>)>,
}

impl OperatorMetadata {
    /// Look up a declared L for an exact (s, p) pair.
    pub fn declared_l(&self, s: u32, p: f64) -> Option<f64> {
        self.declared_l
            .iter()
            .find(|e| e.s == s && e.p == p)
            .map(|e| e.value)
    }
}

/// An operator F: ℝ^d → ℝ^d with directional-derivative access.
///
/// `dir_derivative(z, w, k)` returns ∇^k F(z)[w]^k (all k slots contracted
/// with the same direction); k = 0 is `eval`. Orders up to
/// `max_analytic_order` are analytic; some operators additionally serve
/// higher orders through internal finite differences, advertised by
/// `derivative_capability`.
pub trait Operator: Send + Sync {
    fn dim(&self) -> usize;

    fn eval(&self, z: &DVector<f64>) -> DVector<f64>;

    /// Highest derivative order available in closed form.
    fn max_analytic_order(&self) -> u32;

    /// Highest derivative order available at all (analytic or internal
    /// finite-difference fallback). Defaults to the analytic order.
    fn derivative_capability(&self) -> u32 {
        self.max_analytic_order()
    }

    /// k-th directional derivative ∇^k F(z)[w]^k.
    fn dir_derivative(&self, z: &DVector<f64>, w: &DVector<f64>, k: u32) -> Result<DVector<f64>>;

    fn metadata(&self) -> &OperatorMetadata;
}

/// Dense Jacobian ∇F(z) assembled column-by-column from first directional
/// derivatives.
pub fn jacobian(op: &dyn Operator, z: &DVector<f64>) -> Result<DMatrix<f64>> {
    let d = op.dim();
    let mut j = DMatrix::zeros(d, d);
    for col in 0..d {
        let mut e = DVector::zeros(d);
        e[col] = 1.0;
        let de = op.dir_derivative(z, &e, 1)?;
        j.set_column(col, &de);
    }
    Ok(j)
}

/// Truncated Taylor expansion T_order(z′; z) = Σ_{i≤order} ∇^i F(z)[z′−z]^i / i!.
pub struct TaylorModel<'a> {
    op: &'a dyn Operator,
    pub center: DVector<f64>,
    pub order: u32,
}

/// Build a Taylor model of the given order centered at `z`.
///
/// Errors with a capability error when the order exceeds what the operator
/// can provide (analytically or through its internal fallback).
pub fn taylor<'a>(op: &'a dyn Operator, z: &DVector<f64>, order: u32) -> Result<TaylorModel<'a>> {
    if order > op.derivative_capability() {
        return Err(Error::Capability(format!(
            "taylor order {order} exceeds operator capability {}",
            op.derivative_capability()
        )));
    }
    Ok(TaylorModel {
        op,
        center: z.clone(),
        order,
    })
}

impl TaylorModel<'_> {
    pub fn evaluate(&self, zp: &DVector<f64>) -> Result<DVector<f64>> {
        let u = zp - &self.center;
        let mut out = self.op.eval(&self.center);
        let mut factorial = 1.0f64;
        for i in 1..=self.order {
            factorial *= i as f64;
            let di = self.op.dir_derivative(&self.center, &u, i)?;
            out += di / factorial;
        }
        Ok(out)
    }
}

/// k-fold nested central difference of F along h, Richardson-extrapolated.
///
/// The direction is normalized and the result rescaled by ‖h‖^k (derivative
/// homogeneity). Three step sizes (ε, ε/2, ε/4) with two Richardson levels
/// kill the O(ε²) and O(ε⁴) truncation terms, so the stencil is exact for
/// polynomial operators and O(ε⁶) otherwise; the base step ε = 0.1·max(1,
/// ‖z‖_∞) keeps the k-fold cancellation far above roundoff.
pub fn fd_dir_derivative(
    op: &dyn Operator,
    z: &DVector<f64>,
    h: &DVector<f64>,
    k: u32,
) -> Result<DVector<f64>> {
    if k > 3 {
        return Err(Error::Capability(format!(
            "finite-difference directional derivatives support k <= 3, got {k}"
        )));
    }
    if k == 0 {
        return Ok(op.eval(z));
    }
    let hn = h.norm();
    if hn == 0.0 {
        return Ok(DVector::zeros(op.dim()));
    }
    let u = h / hn;
    let base = 0.1 * z.amax().max(1.0);

    let nested = |eps: f64| -> DVector<f64> {
        // Central-difference contraction of order k along u at step eps:
        // Σ_{j=0..k} (-1)^j C(k,j) F(z + (k/2 - j)·eps·u) / eps^k.
        let kk = k as i64;
        let mut acc = DVector::zeros(op.dim());
        let mut binom = 1.0f64;
        for j in 0..=kk {
            let t = (kk as f64 / 2.0 - j as f64) * eps;
            let sign = if j % 2 == 0 { 1.0 } else { -1.0 };
            acc += op.eval(&(z + &u * t)) * (sign * binom);
            binom *= (kk - j) as f64 / (j + 1) as f64;
        }
        acc / eps.powi(k as i32)
    };

    let d1 = nested(base);
    let d2 = nested(base / 2.0);
    let d3 = nested(base / 4.0);
    let r1 = (&d2 * 4.0 - &d1) / 3.0;
    let r2 = (&d3 * 4.0 - &d2) / 3.0;
    let out = (&r2 * 16.0 - &r1) / 15.0;
    Ok(out * hn.powi(k as i32))
}

/// Axis-aligned sampling box.
#[derive(Debug, Clone, PartialEq)]
pub struct Region {
    pub lo: DVector<f64>,
    pub hi: DVector<f64>,
}

impl Region {
    pub fn new(lo: DVector<f64>, hi: DVector<f64>) -> Result<Self> {
        if lo.len() != hi.len() {
            return Err(Error::Input("region bounds have mismatched dimensions".into()));
        }
        if lo.iter().zip(hi.iter()).any(|(l, h)| !(h > l)) {
            return Err(Error::Input(
                "degenerate region: every coordinate needs hi > lo".into(),
            ));
        }
        Ok(Self { lo, hi })
    }

    /// Cube [center − half, center + half]^d.
    pub fn cube_around(center: &DVector<f64>, half: f64) -> Result<Self> {
        Self::new(center.map(|v| v - half), center.map(|v| v + half))
    }

    pub fn dim(&self) -> usize {
        self.lo.len()
    }

    pub(crate) fn sample(&self, rng: &mut impl Rng) -> DVector<f64> {
        DVector::from_fn(self.dim(), |i, _| rng.gen_range(self.lo[i]..self.hi[i]))
    }

    pub(crate) fn contains(&self, z: &DVector<f64>) -> bool {
        z.iter()
            .zip(self.lo.iter().zip(self.hi.iter()))
            .all(|(v, (l, h))| *v >= *l && *v <= *h)
    }
}

/// Sampled estimate of the s-th-order smoothness constant:
/// max over pairs of s!·‖F(z_b) − T_{s−1}(z_b; z_a)‖_{p*} / ‖z_b − z_a‖_p^s.
///
/// Deterministic given the seed; a lower bound on the true L_{s,p}.
pub fn estimate_lipschitz(
    op: &dyn Operator,
    s: u32,
    p: f64,
    region: &Region,
    samples: usize,
    seed: u64,
) -> Result<f64> {
    if samples < 2 {
        return Err(Error::Input("estimate_lipschitz needs samples >= 2".into()));
    }
    if s < 1 {
        return Err(Error::Domain("estimate_lipschitz needs s >= 1".into()));
    }
    if region.dim() != op.dim() {
        return Err(Error::Input(format!(
            "region dimension {} does not match operator dimension {}",
            region.dim(),
            op.dim()
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut factorial = 1.0f64;
    for i in 2..=s {
        factorial *= i as f64;
    }
    let mut best = 0.0f64;
    for _ in 0..samples {
        let za = region.sample(&mut rng);
        let zb = region.sample(&mut rng);
        let dn = lp_norm(&(&zb - &za), p)?;
        if dn == 0.0 {
            continue;
        }
        let model = taylor(op, &za, s - 1)?;
        let rem = op.eval(&zb) - model.evaluate(&zb)?;
        let ratio = factorial * dual_norm(&rem, p)? / dn.powi(s as i32);
        if ratio > best {
            best = ratio;
        }
    }
    Ok(best)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::problems::{make_problem, LinearOperator};
    use approx::{assert_abs_diff_eq, assert_relative_eq};

    fn dv(v: &[f64]) -> DVector<f64> {
        DVector::from_column_slice(v)
    }

    #[test]
    fn taylor_linear_exactness_and_order_zero() {
        let m = DMatrix::from_row_slice(2, 2, &[1.0, 2.0, -0.5, 3.0]);
        let op = LinearOperator::new(m.clone(), "m").unwrap();
        let z = dv(&[0.3, -0.8]);
        let zp = dv(&[1.7, 2.2]);
        let t1 = taylor(&op, &z, 1).unwrap();
        assert_relative_eq!(
            (t1.evaluate(&zp).unwrap() - &m * &zp).norm(),
            0.0,
            epsilon = 1e-14
        );
        let t0 = taylor(&op, &z, 0).unwrap();
        assert_relative_eq!(
            (t0.evaluate(&zp).unwrap() - &m * &z).norm(),
            0.0,
            epsilon = 1e-14
        );
    }

    #[test]
    fn taylor_matches_nested_finite_difference_oracle() {
        // Second-order model of the shifted-coupling saddle operator at
        // (0.5, 0.5) evaluated at (0.6, 0.4): close to F(z') and within
        // 1e−10 of the finite-difference Taylor assembly.
        let entry = make_problem("forsaken").unwrap();
        let op = entry.oracle.as_ref();
        let z = dv(&[0.5, 0.5]);
        let zp = dv(&[0.6, 0.4]);
        let t2 = taylor(op, &z, 2).unwrap();
        let analytic = t2.evaluate(&zp).unwrap();
        let direct = op.eval(&zp);
        assert!((analytic.clone() - &direct).amax() < 5e-3);

        let u = &zp - &z;
        let fd = op.eval(&z)
            + fd_dir_derivative(op, &z, &u, 1).unwrap()
            + fd_dir_derivative(op, &z, &u, 2).unwrap() / 2.0;
        assert!((analytic - fd).amax() < 1e-10);
    }

    #[test]
    fn fd_dir_derivative_examples() {
        // Identity operator: k = 1 returns h itself.
        let op = LinearOperator::identity(3);
        let z = dv(&[0.1, -0.4, 2.0]);
        let h = dv(&[0.7, 0.2, -1.0]);
        let d1 = fd_dir_derivative(&op, &z, &h, 1).unwrap();
        assert!((d1 - &h).amax() < 1e-11);
        // Linear operator has zero curvature.
        let m = DMatrix::from_row_slice(2, 2, &[1.0, 2.0, -0.5, 3.0]);
        let op = LinearOperator::new(m, "m").unwrap();
        let d2 = fd_dir_derivative(&op, &dv(&[0.3, 0.4]), &dv(&[1.0, -1.0]), 2).unwrap();
        assert!(d2.amax() < 1e-9);
        // k > 3 is a capability error.
        assert!(matches!(
            fd_dir_derivative(&op, &dv(&[0.0, 0.0]), &dv(&[1.0, 0.0]), 4),
            Err(Error::Capability(_))
        ));
    }

    #[test]
    fn fd_matches_analytic_jacobian_product() {
        let entry = make_problem("forsaken").unwrap();
        let op = entry.oracle.as_ref();
        let z = dv(&[1.0, 1.0]);
        let h = dv(&[1.0, 0.0]);
        let fd = fd_dir_derivative(op, &z, &h, 1).unwrap();
        let an = op.dir_derivative(&z, &h, 1).unwrap();
        assert!((fd - an).amax() < 1e-5);
    }

    #[test]
    fn dir_derivative_homogeneity() {
        let entry = make_problem("modified_forsaken").unwrap();
        let op = entry.oracle.as_ref();
        let z = dv(&[0.7, -0.3]);
        let w = dv(&[0.4, 1.1]);
        for k in 0..=3u32 {
            let base = op.dir_derivative(&z, &w, k).unwrap();
            let scaled = op.dir_derivative(&z, &(&w * 2.5), k).unwrap();
            let expect = base * 2.5f64.powi(k as i32);
            assert_relative_eq!((scaled - expect).norm(), 0.0, epsilon = 1e-9);
        }
    }

    #[test]
    fn estimate_lipschitz_identity_and_linear() {
        let op = LinearOperator::identity(2);
        let region = Region::new(dv(&[-1.0, -1.0]), dv(&[1.0, 1.0])).unwrap();
        // Identity operator: the s = 1 ratio is exactly 1 on every pair.
        let l1 = estimate_lipschitz(&op, 1, 2.0, &region, 100, 7).unwrap();
        assert_relative_eq!(l1, 1.0, max_relative = 1e-12);
        // Any linear operator is second-order smooth with L = 0.
        let l2 = estimate_lipschitz(&op, 2, 2.0, &region, 100, 7).unwrap();
        assert_abs_diff_eq!(l2, 0.0, epsilon = 1e-12);
    }

    #[test]
    fn estimate_lipschitz_forsaken_band() {
        // Sampled estimate on the original box lands in [3, 12]; the dense
        // grid supremum of ‖∇F‖₂ on the same box is 12.4026 (independent
        // oracle), so the sampled value is a sound lower bound.
        let entry = make_problem("forsaken").unwrap();
        let region = Region::new(dv(&[-1.5, -1.5]), dv(&[1.5, 1.5])).unwrap();
        let l = estimate_lipschitz(entry.oracle.as_ref(), 1, 2.0, &region, 10_000, 7).unwrap();
        assert!((3.0..=12.0).contains(&l), "estimate {l} outside [3,12]");
    }

    #[test]
    fn estimate_lipschitz_rejects_degenerate_region() {
        assert!(matches!(
            Region::new(dv(&[0.0, 0.0]), dv(&[1.0, 0.0])),
            Err(Error::Input(_))
        ));
    }

    #[test]
    fn estimate_lipschitz_deterministic() {
        let entry = make_problem("modified_forsaken").unwrap();
        let region = Region::new(dv(&[-2.0, -2.0]), dv(&[2.0, 2.0])).unwrap();
        let a = estimate_lipschitz(entry.oracle.as_ref(), 2, 2.0, &region, 500, 3).unwrap();
        let b = estimate_lipschitz(entry.oracle.as_ref(), 2, 2.0, &region, 500, 3).unwrap();
        assert_eq!(a.to_bits(), b.to_bits());
    }

    /// A2-style remainder bound: declared constants dominate sampled ratios.
    #[test]
    fn taylor_remainder_within_declared_l() {
        for name in [
            "forsaken",
            "modified_forsaken",
            "x2y",
            "bilinear",
            "linear_monotone",
            "skew_quadratic",
        ] {
            let entry = make_problem(name).unwrap();
            let meta = entry.oracle.metadata().clone();
            let (lo, hi) = meta.reference_box.clone().expect("reference box");
            let region = Region::new(lo, hi).unwrap();
            for decl in &meta.declared_l {
                let est = estimate_lipschitz(
                    entry.oracle.as_ref(),
                    decl.s,
                    decl.p,
                    &region,
                    10_000,
                    13,
                )
                .unwrap();
                assert!(
                    est <= decl.value * (1.0 + 1e-9),
                    "{name}: declared L({},{}) = {} exceeded by estimate {est}",
                    decl.s,
                    decl.p,
                    decl.value
                );
            }
        }
    }
}
