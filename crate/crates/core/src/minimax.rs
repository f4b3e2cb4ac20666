//! Minimax problem abstraction and the twist operator `J = diag(I_x, -I_y)`.
//!
//! Iterates are stored as a single vector `z = (x, y)` with the minimizing
//! block first. Every sign flip between the blocks goes through
//! [`TwistShape`].

use std::cell::Cell;

use thiserror::Error;

use crate::linalg::{finite_diff_gradient_scaled, finite_diff_jacobian_scaled, Matrix, Vector};
use crate::scalar::Scalar;

/// Iterate `z = (x, y)`.
pub type Point<T> = Vector<T>;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ProblemError {
    #[error("length mismatch: expected {expected}, got {got}")]
    LengthMismatch { expected: usize, got: usize },
    #[error("coordinate {index} = {value:e} is outside the problem domain")]
    DomainViolation { index: usize, value: f64 },
    #[error("invalid problem definition: {0}")]
    Invalid(String),
}

/// Block sizes of the minimizing (`x`) and maximizing (`y`) players.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct TwistShape {
    n_x: usize,
    n_y: usize,
}

impl TwistShape {
    pub fn new(n_x: usize, n_y: usize) -> Result<Self, ProblemError> {
        if n_x + n_y == 0 {
            return Err(ProblemError::Invalid(
                "shape must have at least one variable".into(),
            ));
        }
        Ok(Self { n_x, n_y })
    }

    pub fn n_x(&self) -> usize {
        self.n_x
    }

    pub fn n_y(&self) -> usize {
        self.n_y
    }

    pub fn dim(&self) -> usize {
        self.n_x + self.n_y
    }

    /// `J_ii`: `+1` on the x block, `-1` on the y block.
    pub fn sign<T: Scalar>(&self, i: usize) -> T {
        if i < self.n_x {
            T::one()
        } else {
            -T::one()
        }
    }

    pub fn is_max_index(&self, i: usize) -> bool {
        i >= self.n_x
    }

    pub fn check_len(&self, len: usize) -> Result<(), ProblemError> {
        if len == self.dim() {
            Ok(())
        } else {
            Err(ProblemError::LengthMismatch {
                expected: self.dim(),
                got: len,
            })
        }
    }

    /// Splits `z` into its `x` and `y` blocks.
    pub fn split<'a, T: Scalar>(&self, z: &'a Vector<T>) -> (&'a [T], &'a [T]) {
        z.as_slice().split_at(self.n_x)
    }
}

/// `J v`: negates the y block.
pub fn twist_apply<T: Scalar>(shape: TwistShape, v: &Vector<T>) -> Result<Vector<T>, ProblemError> {
    shape.check_len(v.len())?;
    Ok(twist(shape, v))
}

pub(crate) fn twist<T: Scalar>(shape: TwistShape, v: &Vector<T>) -> Vector<T> {
    let mut out = v.clone();
    for e in &mut out.as_mut_slice()[shape.n_x..] {
        *e = -*e;
    }
    out
}

pub fn twist_matrix<T: Scalar>(shape: TwistShape) -> Matrix<T> {
    Matrix::from_diag(&Vector::from_fn(shape.dim(), |i| shape.sign(i)))
}

/// A saddle-point problem `min_x max_y L(x, y)`.
///
/// Evaluation may fail outside the problem's domain (barrier problems);
/// the solver treats such failures as rejected trial steps.
pub trait MinimaxProblem<T: Scalar> {
    fn shape(&self) -> TwistShape;

    fn name(&self) -> &str;

    fn value(&self, z: &Point<T>) -> Result<T, ProblemError>;

    /// `G = (∇_x L, ∇_y L)`.
    fn gradient(&self, z: &Point<T>) -> Result<Vector<T>, ProblemError>;

    /// Analytic Hessian, when the problem provides one.
    fn hessian(&self, _z: &Point<T>) -> Option<Result<Matrix<T>, ProblemError>> {
        None
    }

    fn has_hessian(&self) -> bool {
        false
    }
}

impl<T: Scalar, P: MinimaxProblem<T> + ?Sized> MinimaxProblem<T> for &P {
    fn shape(&self) -> TwistShape {
        (**self).shape()
    }
    fn name(&self) -> &str {
        (**self).name()
    }
    fn value(&self, z: &Point<T>) -> Result<T, ProblemError> {
        (**self).value(z)
    }
    fn gradient(&self, z: &Point<T>) -> Result<Vector<T>, ProblemError> {
        (**self).gradient(z)
    }
    fn hessian(&self, z: &Point<T>) -> Option<Result<Matrix<T>, ProblemError>> {
        (**self).hessian(z)
    }
    fn has_hessian(&self) -> bool {
        (**self).has_hessian()
    }
}

impl<T: Scalar, P: MinimaxProblem<T> + ?Sized> MinimaxProblem<T> for Box<P> {
    fn shape(&self) -> TwistShape {
        (**self).shape()
    }
    fn name(&self) -> &str {
        (**self).name()
    }
    fn value(&self, z: &Point<T>) -> Result<T, ProblemError> {
        (**self).value(z)
    }
    fn gradient(&self, z: &Point<T>) -> Result<Vector<T>, ProblemError> {
        (**self).gradient(z)
    }
    fn hessian(&self, z: &Point<T>) -> Option<Result<Matrix<T>, ProblemError>> {
        (**self).hessian(z)
    }
    fn has_hessian(&self) -> bool {
        (**self).has_hessian()
    }
}

/// Number of problem evaluations made during one solve.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct EvalCounters {
    pub value_calls: u64,
    pub gradient_calls: u64,
    pub hessian_calls: u64,
}

/// Wraps a problem and counts evaluations. Owned by a single solve.
pub struct Counted<P> {
    inner: P,
    values: Cell<u64>,
    gradients: Cell<u64>,
    hessians: Cell<u64>,
}

impl<P> Counted<P> {
    pub fn new(inner: P) -> Self {
        Self {
            inner,
            values: Cell::new(0),
            gradients: Cell::new(0),
            hessians: Cell::new(0),
        }
    }

    pub fn counters(&self) -> EvalCounters {
        EvalCounters {
            value_calls: self.values.get(),
            gradient_calls: self.gradients.get(),
            hessian_calls: self.hessians.get(),
        }
    }

    pub fn inner(&self) -> &P {
        &self.inner
    }
}

impl<T: Scalar, P: MinimaxProblem<T>> MinimaxProblem<T> for Counted<P> {
    fn shape(&self) -> TwistShape {
        self.inner.shape()
    }
    fn name(&self) -> &str {
        self.inner.name()
    }
    fn value(&self, z: &Point<T>) -> Result<T, ProblemError> {
        self.values.set(self.values.get() + 1);
        self.inner.value(z)
    }
    fn gradient(&self, z: &Point<T>) -> Result<Vector<T>, ProblemError> {
        self.gradients.set(self.gradients.get() + 1);
        self.inner.gradient(z)
    }
    fn hessian(&self, z: &Point<T>) -> Option<Result<Matrix<T>, ProblemError>> {
        let h = self.inner.hessian(z);
        if h.is_some() {
            self.hessians.set(self.hessians.get() + 1);
        }
        h
    }
    fn has_hessian(&self) -> bool {
        self.inner.has_hessian()
    }
}

type ValueFn<'a, T> = Box<dyn Fn(&Vector<T>) -> T + 'a>;
type GradientFn<'a, T> = Box<dyn Fn(&Vector<T>) -> Vector<T> + 'a>;
type HessianFn<'a, T> = Box<dyn Fn(&Vector<T>) -> Matrix<T> + 'a>;

/// A problem assembled from closures. Handy for tests and one-off objectives.
pub struct FnProblem<'a, T> {
    name: String,
    shape: TwistShape,
    value: ValueFn<'a, T>,
    gradient: GradientFn<'a, T>,
    hessian: Option<HessianFn<'a, T>>,
}

impl<'a, T: Scalar> FnProblem<'a, T> {
    pub fn new(
        name: impl Into<String>,
        shape: TwistShape,
        value: impl Fn(&Vector<T>) -> T + 'a,
        gradient: impl Fn(&Vector<T>) -> Vector<T> + 'a,
    ) -> Self {
        Self {
            name: name.into(),
            shape,
            value: Box::new(value),
            gradient: Box::new(gradient),
            hessian: None,
        }
    }

    pub fn with_hessian(mut self, hessian: impl Fn(&Vector<T>) -> Matrix<T> + 'a) -> Self {
        self.hessian = Some(Box::new(hessian));
        self
    }
}

impl<T: Scalar> MinimaxProblem<T> for FnProblem<'_, T> {
    fn shape(&self) -> TwistShape {
        self.shape
    }
    fn name(&self) -> &str {
        &self.name
    }
    fn value(&self, z: &Point<T>) -> Result<T, ProblemError> {
        self.shape.check_len(z.len())?;
        Ok((self.value)(z))
    }
    fn gradient(&self, z: &Point<T>) -> Result<Vector<T>, ProblemError> {
        self.shape.check_len(z.len())?;
        Ok((self.gradient)(z))
    }
    fn hessian(&self, z: &Point<T>) -> Option<Result<Matrix<T>, ProblemError>> {
        let h = self.hessian.as_ref()?;
        Some(self.shape.check_len(z.len()).map(|_| h(z)))
    }
    fn has_hessian(&self) -> bool {
        self.hessian.is_some()
    }
}

/// Mixed relative error `|a - b| / max(1, |a|, |b|)`.
pub(crate) fn mixed_rel_err<T: Scalar>(a: T, b: T) -> T {
    (a - b).abs() / T::one().max(a.abs()).max(b.abs())
}

/// Largest componentwise error between the analytic derivatives and
/// central differences at `z`, using steps `h * (1 + |z_i|)`.
///
/// Errors are relative with a unit floor, so components near zero are
/// compared absolutely. When a Hessian is available, its rows are checked
/// against differences of the analytic gradient as well.
pub fn gradient_check<T: Scalar, P: MinimaxProblem<T> + ?Sized>(
    problem: &P,
    z: &Point<T>,
    h: T,
) -> Result<T, ProblemError> {
    problem.shape().check_len(z.len())?;
    let analytic = problem.gradient(z)?;
    let mut failure = None;
    let numeric = finite_diff_gradient_scaled(
        |p| {
            problem.value(p).unwrap_or_else(|e| {
                failure.get_or_insert(e);
                T::nan()
            })
        },
        z,
        h,
    );
    if let Some(e) = failure {
        return Err(e);
    }
    let mut worst = analytic
        .iter()
        .zip(numeric.iter())
        .fold(T::zero(), |m, (&a, &b)| m.max(mixed_rel_err(a, b)));

    if let Some(hess) = problem.hessian(z) {
        let hess = hess?;
        let mut failure = None;
        let numeric = finite_diff_jacobian_scaled(
            |p| {
                problem.gradient(p).unwrap_or_else(|e| {
                    failure.get_or_insert(e);
                    Vector::from_elem(z.len(), T::nan())
                })
            },
            z,
            h,
        );
        if let Some(e) = failure {
            return Err(e);
        }
        worst = hess
            .as_slice()
            .iter()
            .zip(numeric.as_slice())
            .fold(worst, |m, (&a, &b)| m.max(mixed_rel_err(a, b)));
    }
    if worst.is_nan() {
        return Ok(T::infinity());
    }
    Ok(worst)
}
