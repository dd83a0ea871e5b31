//! Bundled problem instances: polynomial min-max games with exact
//! derivatives of every order, a linear monotone baseline, the min-max →
//! operator adapter, and the preconditioned "competitive" transform F_α.

use crate::error::{Error, Result};
use crate::oracle::{jacobian, DeclaredL, Operator, OperatorMetadata};
use nalgebra::{DMatrix, DVector};
use std::sync::Arc;

/// A two-block smooth function f(x, y) to be minimized over x and maximized
/// over y, exposed through its gradient field g(z) = (∇_x f, ∇_y f).
///
/// Implementations must provide exact directional derivatives of g up to
/// `max_order`, plus the mixed block ∇_{xy}f (the ∇_{yx}f block is its
/// transpose, so mixed-partial symmetry holds by construction).
pub trait MinMaxFunction: Send + Sync {
    fn dx(&self) -> usize;
    fn dy(&self) -> usize;

    /// g(z) = (∇_x f, ∇_y f), both blocks un-negated.
    fn grad_field(&self, z: &DVector<f64>) -> DVector<f64>;

    /// k-th directional derivative ∇^k g(z)[w]^k for 1 ≤ k ≤ max_order.
    fn grad_field_derivative(
        &self,
        z: &DVector<f64>,
        w: &DVector<f64>,
        k: u32,
    ) -> Result<DVector<f64>>;

    /// Highest derivative order served analytically.
    fn max_order(&self) -> u32;

    /// Mixed block ∇_{xy} f(z), shape dx × dy.
    fn mixed_xy(&self, z: &DVector<f64>) -> DMatrix<f64>;

    /// Directional derivative of the mixed block along w.
    fn mixed_xy_derivative(&self, z: &DVector<f64>, w: &DVector<f64>) -> DMatrix<f64>;

    fn name(&self) -> &str;

    /// Original problem-statement bounds (documentation only).
    fn domain_box(&self) -> Option<(DVector<f64>, DVector<f64>)> {
        None
    }
}

fn dv(v: &[f64]) -> DVector<f64> {
    DVector::from_column_slice(v)
}

fn square_box(half: f64) -> (DVector<f64>, DVector<f64>) {
    (dv(&[-half, -half]), dv(&[half, half]))
}

/// Negate the y block of a stacked (x, y) vector in place: turns gradient
/// data (∇_x f, ∇_y f) into operator data (∇_x f, −∇_y f) at every
/// derivative order.
fn negate_y_block(mut g: DVector<f64>, dx: usize) -> DVector<f64> {
    for i in dx..g.len() {
        g[i] = -g[i];
    }
    g
}

// ---------------------------------------------------------------------------
// Min-max → operator adapter
// ---------------------------------------------------------------------------

/// Operator F(z) = (∇_x f, −∇_y f) assembled from a [`MinMaxFunction`].
pub struct MinMaxOperator {
    f: Arc<dyn MinMaxFunction>,
    meta: OperatorMetadata,
}

/// Wrap a min-max function as the operator F = (∇_x f, −∇_y f). The sign
/// flip on the y block is applied uniformly at every derivative order.
pub fn minmax_to_operator(f: Arc<dyn MinMaxFunction>) -> MinMaxOperator {
    let meta = OperatorMetadata {
        name: f.name().to_string(),
        domain_box: f.domain_box(),
        ..Default::default()
    };
    MinMaxOperator { f, meta }
}

impl MinMaxOperator {
    fn with_catalog(
        mut self,
        declared_l: Vec<DeclaredL>,
        stationary: Vec<DVector<f64>>,
        reference_box: (DVector<f64>, DVector<f64>),
    ) -> Self {
        self.meta.declared_l = declared_l;
        self.meta.known_stationary_points = stationary;
        self.meta.reference_box = Some(reference_box);
        self
    }
}

impl Operator for MinMaxOperator {
    fn dim(&self) -> usize {
        self.f.dx() + self.f.dy()
    }

    fn eval(&self, z: &DVector<f64>) -> DVector<f64> {
        negate_y_block(self.f.grad_field(z), self.f.dx())
    }

    fn max_analytic_order(&self) -> u32 {
        self.f.max_order()
    }

    fn dir_derivative(&self, z: &DVector<f64>, w: &DVector<f64>, k: u32) -> Result<DVector<f64>> {
        if k == 0 {
            return Ok(self.eval(z));
        }
        if k > self.f.max_order() {
            return Err(Error::Capability(format!(
                "operator {} serves derivative orders up to {}, got {k}",
                self.meta.name,
                self.f.max_order()
            )));
        }
        Ok(negate_y_block(
            self.f.grad_field_derivative(z, w, k)?,
            self.f.dx(),
        ))
    }

    fn metadata(&self) -> &OperatorMetadata {
        &self.meta
    }
}

// ---------------------------------------------------------------------------
// Competitive transform F_α = A(z)^{−1} F(z)
// ---------------------------------------------------------------------------

/// Preconditioned operator F_α(z) = A(z)^{−1}F(z) with
/// A = [[I, α∇_{xy}f], [−α(∇_{xy}f)ᵀ, I]].
///
/// A is I plus a skew-symmetric part, hence nonsingular everywhere. First
/// derivatives are analytic (differentiating through the solve); orders 2
/// and 3 fall back to internal finite differences of the composed map.
pub struct CompetitiveOperator {
    f: Arc<dyn MinMaxFunction>,
    alpha: f64,
    meta: OperatorMetadata,
}

/// Build F_α from a min-max function. Requires alpha ≥ 0; alpha = 0
/// reproduces the plain adapter bit-for-bit.
pub fn competitive_transform(
    f: Arc<dyn MinMaxFunction>,
    alpha: f64,
) -> Result<CompetitiveOperator> {
    if !alpha.is_finite() || alpha < 0.0 {
        return Err(Error::Input(format!(
            "competitive transform needs alpha >= 0, got {alpha}"
        )));
    }
    let meta = OperatorMetadata {
        name: format!("{}_alpha_{alpha}", f.name()),
        domain_box: f.domain_box(),
        ..Default::default()
    };
    Ok(CompetitiveOperator { f, alpha, meta })
}

impl CompetitiveOperator {
    fn base_eval(&self, z: &DVector<f64>) -> DVector<f64> {
        negate_y_block(self.f.grad_field(z), self.f.dx())
    }

    /// A(z): identity plus the α-scaled skew coupling blocks.
    fn assemble(&self, z: &DVector<f64>) -> DMatrix<f64> {
        let (dx, dy) = (self.f.dx(), self.f.dy());
        let mut a = DMatrix::identity(dx + dy, dx + dy);
        let m = self.f.mixed_xy(z) * self.alpha;
        for i in 0..dx {
            for j in 0..dy {
                a[(i, dx + j)] = m[(i, j)];
                a[(dx + j, i)] = -m[(i, j)];
            }
        }
        a
    }

    fn solve(&self, z: &DVector<f64>, rhs: DVector<f64>) -> DVector<f64> {
        self.assemble(z)
            .lu()
            .solve(&rhs)
            .expect("I + skew preconditioner is nonsingular")
    }
}

impl Operator for CompetitiveOperator {
    fn dim(&self) -> usize {
        self.f.dx() + self.f.dy()
    }

    fn eval(&self, z: &DVector<f64>) -> DVector<f64> {
        let f = self.base_eval(z);
        if self.alpha == 0.0 {
            return f;
        }
        self.solve(z, f)
    }

    fn max_analytic_order(&self) -> u32 {
        1
    }

    fn derivative_capability(&self) -> u32 {
        3
    }

    fn dir_derivative(&self, z: &DVector<f64>, w: &DVector<f64>, k: u32) -> Result<DVector<f64>> {
        match k {
            0 => Ok(self.eval(z)),
            1 => {
                // Differentiate A(z)·F_α(z) = F(z):
                // ∂_w F_α = A^{−1}(∂_w F − (∂_w A)·F_α).
                let (dx, dy) = (self.f.dx(), self.f.dy());
                let df = negate_y_block(self.f.grad_field_derivative(z, w, 1)?, dx);
                if self.alpha == 0.0 {
                    return Ok(df);
                }
                let f_alpha = self.eval(z);
                let dm = self.f.mixed_xy_derivative(z, w) * self.alpha;
                let mut rhs = df;
                for i in 0..dx {
                    for j in 0..dy {
                        rhs[i] -= dm[(i, j)] * f_alpha[dx + j];
                        rhs[dx + j] += dm[(i, j)] * f_alpha[i];
                    }
                }
                Ok(self.solve(z, rhs))
            }
            2 | 3 => crate::oracle::fd_dir_derivative(self, z, w, k),
            _ => Err(Error::Capability(format!(
                "preconditioned operator serves derivative orders up to 3, got {k}"
            ))),
        }
    }

    fn metadata(&self) -> &OperatorMetadata {
        &self.meta
    }
}

// ---------------------------------------------------------------------------
// Linear operator baseline
// ---------------------------------------------------------------------------

/// F(z) = M z with exact derivatives (zero beyond first order).
pub struct LinearOperator {
    m: DMatrix<f64>,
    meta: OperatorMetadata,
}

impl LinearOperator {
    pub fn new(m: DMatrix<f64>, name: &str) -> Result<Self> {
        if !m.is_square() {
            return Err(Error::Input("linear operator matrix must be square".into()));
        }
        let meta = OperatorMetadata {
            name: name.to_string(),
            ..Default::default()
        };
        Ok(Self { m, meta })
    }

    pub fn identity(dim: usize) -> Self {
        Self::new(DMatrix::identity(dim, dim), "identity").expect("square")
    }

    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.m
    }
}

/// M = sym·I + skew·K with K the block-diagonal 2×2 rotation generator
/// [[0, 1], [−1, 0]] (odd trailing coordinate left uncoupled). sym > 0
/// makes M positive definite plus skew part, hence strongly monotone.
pub fn linear_monotone_matrix(dim: usize, sym: f64, skew: f64) -> DMatrix<f64> {
    let mut m = DMatrix::identity(dim, dim) * sym;
    let mut i = 0;
    while i + 1 < dim {
        m[(i, i + 1)] += skew;
        m[(i + 1, i)] -= skew;
        i += 2;
    }
    m
}

impl Operator for LinearOperator {
    fn dim(&self) -> usize {
        self.m.nrows()
    }

    fn eval(&self, z: &DVector<f64>) -> DVector<f64> {
        &self.m * z
    }

    fn max_analytic_order(&self) -> u32 {
        6
    }

    fn dir_derivative(&self, z: &DVector<f64>, w: &DVector<f64>, k: u32) -> Result<DVector<f64>> {
        match k {
            0 => Ok(self.eval(z)),
            1 => Ok(&self.m * w),
            2..=6 => Ok(DVector::zeros(self.dim())),
            _ => Err(Error::Capability(format!(
                "operator {} serves derivative orders up to 6, got {k}",
                self.meta.name
            ))),
        }
    }

    fn metadata(&self) -> &OperatorMetadata {
        &self.meta
    }
}

// ---------------------------------------------------------------------------
// Concrete min-max functions
// ---------------------------------------------------------------------------

/// k-th derivative of h(t) = t²/4 − t⁴/2 + t⁶/6 (identically zero past 6).
fn h_deriv(t: f64, k: u32) -> f64 {
    match k {
        0 => t * t / 4.0 - t.powi(4) / 2.0 + t.powi(6) / 6.0,
        1 => t / 2.0 - 2.0 * t.powi(3) + t.powi(5),
        2 => 0.5 - 6.0 * t * t + 5.0 * t.powi(4),
        3 => -12.0 * t + 20.0 * t.powi(3),
        4 => -12.0 + 60.0 * t * t,
        5 => 120.0 * t,
        6 => 120.0,
        _ => 0.0,
    }
}

/// f(x, y) = x(y − β) + h(x) − h(y) on ℝ², h(t) = t²/4 − t⁴/2 + t⁶/6.
/// A scalar non-monotone game whose stationary structure depends on the
/// coupling shift β.
struct ShiftedCouplingSaddle {
    beta: f64,
    name: &'static str,
    box_half: f64,
}

impl MinMaxFunction for ShiftedCouplingSaddle {
    fn dx(&self) -> usize {
        1
    }

    fn dy(&self) -> usize {
        1
    }

    fn grad_field(&self, z: &DVector<f64>) -> DVector<f64> {
        let (x, y) = (z[0], z[1]);
        dv(&[y - self.beta + h_deriv(x, 1), x - h_deriv(y, 1)])
    }

    fn grad_field_derivative(
        &self,
        z: &DVector<f64>,
        w: &DVector<f64>,
        k: u32,
    ) -> Result<DVector<f64>> {
        let (x, y) = (z[0], z[1]);
        let (wx, wy) = (w[0], w[1]);
        Ok(match k {
            1 => dv(&[h_deriv(x, 2) * wx + wy, wx - h_deriv(y, 2) * wy]),
            _ => dv(&[
                h_deriv(x, k + 1) * wx.powi(k as i32),
                -h_deriv(y, k + 1) * wy.powi(k as i32),
            ]),
        })
    }

    fn max_order(&self) -> u32 {
        6
    }

    fn mixed_xy(&self, _z: &DVector<f64>) -> DMatrix<f64> {
        DMatrix::from_element(1, 1, 1.0)
    }

    fn mixed_xy_derivative(&self, _z: &DVector<f64>, _w: &DVector<f64>) -> DMatrix<f64> {
        DMatrix::zeros(1, 1)
    }

    fn name(&self) -> &str {
        self.name
    }

    fn domain_box(&self) -> Option<(DVector<f64>, DVector<f64>)> {
        Some(square_box(self.box_half))
    }
}

/// f(x, y) = x²y: a single global saddle structure with stationary set
/// {x = 0}.
struct QuadraticCouplingSaddle;

impl MinMaxFunction for QuadraticCouplingSaddle {
    fn dx(&self) -> usize {
        1
    }

    fn dy(&self) -> usize {
        1
    }

    fn grad_field(&self, z: &DVector<f64>) -> DVector<f64> {
        let (x, y) = (z[0], z[1]);
        dv(&[2.0 * x * y, x * x])
    }

    fn grad_field_derivative(
        &self,
        z: &DVector<f64>,
        w: &DVector<f64>,
        k: u32,
    ) -> Result<DVector<f64>> {
        let (x, y) = (z[0], z[1]);
        let (wx, wy) = (w[0], w[1]);
        Ok(match k {
            1 => dv(&[2.0 * y * wx + 2.0 * x * wy, 2.0 * x * wx]),
            2 => dv(&[4.0 * wx * wy, 2.0 * wx * wx]),
            _ => dv(&[0.0, 0.0]),
        })
    }

    fn max_order(&self) -> u32 {
        6
    }

    fn mixed_xy(&self, z: &DVector<f64>) -> DMatrix<f64> {
        DMatrix::from_element(1, 1, 2.0 * z[0])
    }

    fn mixed_xy_derivative(&self, _z: &DVector<f64>, w: &DVector<f64>) -> DMatrix<f64> {
        DMatrix::from_element(1, 1, 2.0 * w[0])
    }

    fn name(&self) -> &str {
        "x2y"
    }
}

/// f(x, y) = xy: the canonical rotation field F = (y, −x).
struct BilinearSaddle;

impl MinMaxFunction for BilinearSaddle {
    fn dx(&self) -> usize {
        1
    }

    fn dy(&self) -> usize {
        1
    }

    fn grad_field(&self, z: &DVector<f64>) -> DVector<f64> {
        dv(&[z[1], z[0]])
    }

    fn grad_field_derivative(
        &self,
        _z: &DVector<f64>,
        w: &DVector<f64>,
        k: u32,
    ) -> Result<DVector<f64>> {
        Ok(match k {
            1 => dv(&[w[1], w[0]]),
            _ => dv(&[0.0, 0.0]),
        })
    }

    fn max_order(&self) -> u32 {
        6
    }

    fn mixed_xy(&self, _z: &DVector<f64>) -> DMatrix<f64> {
        DMatrix::from_element(1, 1, 1.0)
    }

    fn mixed_xy_derivative(&self, _z: &DVector<f64>, _w: &DVector<f64>) -> DMatrix<f64> {
        DMatrix::zeros(1, 1)
    }

    fn name(&self) -> &str {
        "bilinear"
    }
}

/// f(x, y) = xy + x³/3 + y³/3: quadratic operator with two isolated
/// stationary points, (0, 0) and (−1, −1).
struct CubicSkewSaddle;

impl MinMaxFunction for CubicSkewSaddle {
    fn dx(&self) -> usize {
        1
    }

    fn dy(&self) -> usize {
        1
    }

    fn grad_field(&self, z: &DVector<f64>) -> DVector<f64> {
        let (x, y) = (z[0], z[1]);
        dv(&[y + x * x, x + y * y])
    }

    fn grad_field_derivative(
        &self,
        z: &DVector<f64>,
        w: &DVector<f64>,
        k: u32,
    ) -> Result<DVector<f64>> {
        let (x, y) = (z[0], z[1]);
        let (wx, wy) = (w[0], w[1]);
        Ok(match k {
            1 => dv(&[2.0 * x * wx + wy, wx + 2.0 * y * wy]),
            2 => dv(&[2.0 * wx * wx, 2.0 * wy * wy]),
            _ => dv(&[0.0, 0.0]),
        })
    }

    fn max_order(&self) -> u32 {
        6
    }

    fn mixed_xy(&self, _z: &DVector<f64>) -> DMatrix<f64> {
        DMatrix::from_element(1, 1, 1.0)
    }

    fn mixed_xy_derivative(&self, _z: &DVector<f64>, _w: &DVector<f64>) -> DMatrix<f64> {
        DMatrix::zeros(1, 1)
    }

    fn name(&self) -> &str {
        "skew_quadratic"
    }
}

// ---------------------------------------------------------------------------
// Catalog
// ---------------------------------------------------------------------------

/// A bundled, ready-to-run problem instance.
pub struct ProblemCatalogEntry {
    pub name: String,
    pub oracle: Box<dyn Operator>,
    /// Points with ‖F(z*)‖ ≤ 1e−9 (copied from the oracle metadata).
    pub known_stationary_points: Vec<DVector<f64>>,
    /// Smoothness constants valid on the oracle's reference box.
    pub declared_l: Vec<DeclaredL>,
}

/// Stationary point of the β = 0.45 shifted-coupling game, refined by
/// Newton from the documented 4-decimal seed (0.0780, 0.4119) to
/// ‖F‖ ≈ 1.4e−16.
pub const SHIFTED_COUPLING_STATIONARY: [f64; 2] = [0.07802666873846006, 0.4119338513658199];

/// Stationary point of the β = 1.5 variant, refined by Newton from the
/// documented seed (0, 1.5) to ‖F‖ ≈ 1.6e−15.
pub const SHIFTED_COUPLING_WIDE_STATIONARY: [f64; 2] = [1.3114748057843681, 1.4759327579926418];

/// Build a min-max function by catalog name. `linear_monotone` is not a
/// min-max instance and is rejected here.
pub fn make_minmax_function(name: &str) -> Result<Arc<dyn MinMaxFunction>> {
    Ok(match name {
        "forsaken" => Arc::new(ShiftedCouplingSaddle {
            beta: 0.45,
            name: "forsaken",
            box_half: 1.5,
        }),
        "modified_forsaken" => Arc::new(ShiftedCouplingSaddle {
            beta: 1.5,
            name: "modified_forsaken",
            box_half: 2.0,
        }),
        "x2y" => Arc::new(QuadraticCouplingSaddle),
        "bilinear" => Arc::new(BilinearSaddle),
        "skew_quadratic" => Arc::new(CubicSkewSaddle),
        other => {
            return Err(Error::Catalog(format!(
                "no min-max function named '{other}'"
            )))
        }
    })
}

fn decl(table: &[(u32, f64, f64)]) -> Vec<DeclaredL> {
    table
        .iter()
        .map(|&(s, p, value)| DeclaredL { s, p, value })
        .collect()
}

/// Instantiate a bundled problem by name. Valid names: forsaken,
/// modified_forsaken, x2y, bilinear, linear_monotone, skew_quadratic.
pub fn make_problem(name: &str) -> Result<ProblemCatalogEntry> {
    let oracle: Box<dyn Operator> = match name {
        "forsaken" => Box::new(minmax_to_operator(make_minmax_function(name)?).with_catalog(
            decl(&[(1, 2.0, 13.0), (2, 2.0, 50.0), (2, 3.0, 72.0)]),
            vec![dv(&SHIFTED_COUPLING_STATIONARY)],
            square_box(1.5),
        )),
        "modified_forsaken" => Box::new(minmax_to_operator(make_minmax_function(name)?)
            .with_catalog(
                decl(&[
                    (1, 2.0, 60.0),
                    (2, 2.0, 140.0),
                    (2, 3.0, 200.0),
                    (3, 3.0, 365.0),
                ]),
                vec![dv(&SHIFTED_COUPLING_WIDE_STATIONARY)],
                square_box(2.0),
            )),
        "x2y" => Box::new(minmax_to_operator(make_minmax_function(name)?).with_catalog(
            decl(&[(1, 2.0, 7.0), (2, 2.0, 5.0)]),
            vec![dv(&[0.0, 0.0])],
            square_box(1.5),
        )),
        "bilinear" => Box::new(minmax_to_operator(make_minmax_function(name)?).with_catalog(
            decl(&[(1, 2.0, 1.0)]),
            vec![dv(&[0.0, 0.0])],
            square_box(2.0),
        )),
        "skew_quadratic" => Box::new(minmax_to_operator(make_minmax_function(name)?)
            .with_catalog(
                decl(&[(1, 2.0, 6.0), (2, 2.0, 2.5)]),
                vec![dv(&[0.0, 0.0]), dv(&[-1.0, -1.0])],
                square_box(2.0),
            )),
        "linear_monotone" => {
            let mut op = LinearOperator::new(linear_monotone_matrix(2, 1.0, 0.0), name)?;
            op.meta.declared_l = decl(&[(1, 2.0, 1.0)]);
            op.meta.known_stationary_points = vec![dv(&[0.0, 0.0])];
            op.meta.reference_box = Some(square_box(2.0));
            Box::new(op)
        }
        other => return Err(Error::Catalog(format!("no bundled problem named '{other}'"))),
    };
    let meta = oracle.metadata();
    Ok(ProblemCatalogEntry {
        name: name.to_string(),
        known_stationary_points: meta.known_stationary_points.clone(),
        declared_l: meta.declared_l.clone(),
        oracle,
    })
}

/// Instantiate the preconditioned variant F_α of a bundled min-max problem,
/// carrying over the base entry's stationary points (they coincide).
pub fn make_competitive(name: &str, alpha: f64) -> Result<ProblemCatalogEntry> {
    let base = make_problem(name)?;
    let f = make_minmax_function(name)?;
    let mut op = competitive_transform(f, alpha)?;
    op.meta.known_stationary_points = base.known_stationary_points.clone();
    op.meta.reference_box = base.oracle.metadata().reference_box.clone();
    let entry_name = op.meta.name.clone();
    Ok(ProblemCatalogEntry {
        name: entry_name,
        known_stationary_points: base.known_stationary_points,
        declared_l: Vec::new(),
        oracle: Box::new(op),
    })
}

/// Step-capped Newton refinement of a stationary point: full Newton steps
/// clipped to length 1, no merit-function safeguard (a residual line search
/// stalls on local minima of ‖F‖ near singular-Jacobian curves; the capped
/// pure iteration walks through them).
pub fn refine_stationary_point(
    op: &dyn Operator,
    seed_point: &DVector<f64>,
    tolerance: f64,
    max_iterations: usize,
) -> Result<DVector<f64>> {
    if !(tolerance > 0.0) {
        return Err(Error::Input("refinement tolerance must be positive".into()));
    }
    let mut z = seed_point.clone();
    let mut residual = f64::INFINITY;
    for _ in 0..max_iterations {
        let f = op.eval(&z);
        residual = f.norm();
        if residual <= tolerance {
            return Ok(z);
        }
        let j = jacobian(op, &z)?;
        let newton = j.clone().lu().solve(&(-&f));
        let step = match newton {
            Some(s) if s.iter().all(|v| v.is_finite()) => s,
            _ => {
                // Singular Jacobian: fall back to a short descent step on
                // ‖F‖² to slide off the singular set.
                let g = j.transpose() * &f;
                let gn = g.norm();
                if gn == 0.0 {
                    return Err(Error::Singularity(
                        "refinement stalled: singular Jacobian with zero normal gradient".into(),
                    ));
                }
                -g * (0.1 / gn)
            }
        };
        let sn = step.norm();
        z += if sn > 1.0 { step / sn } else { step };
    }
    let f = op.eval(&z);
    if f.norm() <= tolerance {
        Ok(z)
    } else {
        Err(Error::Subproblem {
            iteration: None,
            best_residual: residual.min(f.norm()),
            message: "stationary-point refinement did not reach tolerance".into(),
        })
    }
}
