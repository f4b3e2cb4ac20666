//! Nonnegativity constraints on selected coordinates.
//!
//! Two mechanisms are provided:
//!
//! * [`SquaredTransform`] substitutes `Z_i = z_i²` on masked coordinates,
//!   turning the constrained problem into an unconstrained one. Because the
//!   transformed gradient vanishes whenever `z_i = 0`, a
//!   [`detachment_correction`] lets such coordinates leave zero when the
//!   original gradient asks for it.
//! * [`BarrierProblem`] adds `(1/t)[Σ log y_j − Σ log x_i]` over masked
//!   coordinates and is solved along an increasing schedule of `t`.

use crate::linalg::{Matrix, Vector};
use crate::minimax::{MinimaxProblem, Point, ProblemError, TwistShape};
use crate::scalar::Scalar;
use crate::solver::{
    acceptance_check, solve, solve_with_restarts, SolveResult, SolverConfig, SolverError,
};

/// Coordinates (in original `Z` space) required to be nonnegative.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ConstraintMask {
    indices: Vec<usize>,
    flags: Vec<bool>,
}

impl ConstraintMask {
    pub fn new(indices: impl IntoIterator<Item = usize>, dim: usize) -> Result<Self, ProblemError> {
        let mut flags = vec![false; dim];
        let mut out = Vec::new();
        for i in indices {
            if i >= dim {
                return Err(ProblemError::Invalid(format!(
                    "mask index {i} out of range 0..{dim}"
                )));
            }
            if flags[i] {
                return Err(ProblemError::Invalid(format!("duplicate mask index {i}")));
            }
            flags[i] = true;
            out.push(i);
        }
        out.sort_unstable();
        Ok(Self {
            indices: out,
            flags,
        })
    }

    pub fn empty(dim: usize) -> Self {
        Self {
            indices: Vec::new(),
            flags: vec![false; dim],
        }
    }

    pub fn all(dim: usize) -> Self {
        Self {
            indices: (0..dim).collect(),
            flags: vec![true; dim],
        }
    }

    pub fn dim(&self) -> usize {
        self.flags.len()
    }

    pub fn indices(&self) -> &[usize] {
        &self.indices
    }

    pub fn contains(&self, i: usize) -> bool {
        self.flags.get(i).copied().unwrap_or(false)
    }
}

/// `Z_i = z_i²` on masked coordinates, identity elsewhere.
pub fn recover_original<T: Scalar>(z: &Point<T>, mask: &ConstraintMask) -> Point<T> {
    Vector::from_fn(
        z.len(),
        |i| if mask.contains(i) { z[i] * z[i] } else { z[i] },
    )
}

/// A problem in `z` coordinates whose value is `L(Z(z))`.
#[derive(Debug, Clone)]
pub struct SquaredTransform<P> {
    base: P,
    mask: ConstraintMask,
    name: String,
}

pub fn wrap_squared<T: Scalar, P: MinimaxProblem<T>>(
    base: P,
    mask: ConstraintMask,
) -> Result<SquaredTransform<P>, ProblemError> {
    base.shape().check_len(mask.dim())?;
    let name = format!("squared({})", base.name());
    Ok(SquaredTransform { base, mask, name })
}

impl<P> SquaredTransform<P> {
    pub fn base(&self) -> &P {
        &self.base
    }

    pub fn mask(&self) -> &ConstraintMask {
        &self.mask
    }

    /// `∂Z_i/∂z_i`.
    fn slope<T: Scalar>(&self, z: &Point<T>, i: usize) -> T {
        if self.mask.contains(i) {
            z[i] + z[i]
        } else {
            T::one()
        }
    }
}

impl<T: Scalar, P: MinimaxProblem<T>> MinimaxProblem<T> for SquaredTransform<P> {
    fn shape(&self) -> TwistShape {
        self.base.shape()
    }

    fn name(&self) -> &str {
        &self.name
    }

    fn value(&self, z: &Point<T>) -> Result<T, ProblemError> {
        self.shape().check_len(z.len())?;
        self.base.value(&recover_original(z, &self.mask))
    }

    fn gradient(&self, z: &Point<T>) -> Result<Vector<T>, ProblemError> {
        self.shape().check_len(z.len())?;
        let gz = self.base.gradient(&recover_original(z, &self.mask))?;
        Ok(Vector::from_fn(z.len(), |i| self.slope(z, i) * gz[i]))
    }

    fn hessian(&self, z: &Point<T>) -> Option<Result<Matrix<T>, ProblemError>> {
        if let Err(e) = self.shape().check_len(z.len()) {
            return Some(Err(e));
        }
        let big_z = recover_original(z, &self.mask);
        let hz = match self.base.hessian(&big_z)? {
            Ok(h) => h,
            Err(e) => return Some(Err(e)),
        };
        let gz = match self.base.gradient(&big_z) {
            Ok(g) => g,
            Err(e) => return Some(Err(e)),
        };
        let n = z.len();
        let s: Vec<T> = (0..n).map(|i| self.slope(z, i)).collect();
        let mut h = Matrix::from_fn(n, n, |i, j| s[i] * s[j] * hz[(i, j)]);
        let two = T::one() + T::one();
        for &i in self.mask.indices() {
            h[(i, i)] = h[(i, i)] + two * gz[i];
        }
        Some(Ok(h))
    }

    fn has_hessian(&self) -> bool {
        self.base.has_hessian()
    }
}

/// Settings for the zero-detachment correction.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DetachConfig<T> {
    /// Masked coordinates with `|z_i| ≤ eps` are candidates.
    pub eps: T,
    /// Initial detachment rate η₀, halved until the acceptance check passes.
    pub eta0_init: T,
    /// Send the controller's μ back to `mu0` after a coordinate detaches.
    pub reset_mu: bool,
}

impl<T: Scalar> Default for DetachConfig<T> {
    fn default() -> Self {
        Self {
            eps: T::lit(1e-6),
            eta0_init: T::lit(1e-2),
            reset_mu: true,
        }
    }
}

/// Lets masked coordinates stuck at zero move off it.
///
/// For masked `i` with `|z_i| ≤ eps`, `R_i = max(−J_ii ∂L/∂Z_i, 0)` is taken
/// from the original gradient and `z_i ← √(z_i² + η₀ R_i)`, with η₀ halved
/// from `eta0_init` until the move passes [`acceptance_check`]. Returns `z`
/// unchanged if no coordinate qualifies or η₀ drops below `1e-12`.
pub fn detachment_correction<T: Scalar, P: MinimaxProblem<T>>(
    wrapped: &SquaredTransform<P>,
    z: &Point<T>,
    eps: T,
    eta0_init: T,
) -> Result<Point<T>, SolverError> {
    let shape = wrapped.shape();
    shape.check_len(z.len())?;
    let gz = wrapped.base.gradient(&recover_original(z, &wrapped.mask))?;
    let pushes: Vec<(usize, T)> = wrapped
        .mask
        .indices()
        .iter()
        .filter(|&&i| z[i].abs() <= eps)
        .map(|&i| (i, (-shape.sign::<T>(i) * gz[i]).max(T::zero())))
        .filter(|&(_, r)| r > T::zero())
        .collect();
    if pushes.is_empty() {
        return Ok(z.clone());
    }
    let floor = T::lit(1e-12);
    let mut eta0 = eta0_init;
    while eta0 >= floor {
        let mut moved = z.clone();
        for &(i, r) in &pushes {
            moved[i] = (z[i] * z[i] + eta0 * r).sqrt();
        }
        match acceptance_check(wrapped, z, &moved) {
            Ok(c) if c.ok => return Ok(moved),
            Ok(_) | Err(SolverError::Problem(ProblemError::DomainViolation { .. })) => {}
            Err(e) => return Err(e),
        }
        eta0 = eta0 / (T::one() + T::one());
    }
    Ok(z.clone())
}

/// Solves a squared-variable problem, applying the detachment correction
/// after every accepted step when `detach` is set.
pub fn solve_squared<T: Scalar, P: MinimaxProblem<T>>(
    wrapped: &SquaredTransform<P>,
    z0: &Point<T>,
    config: &SolverConfig<T>,
    detach: Option<DetachConfig<T>>,
) -> Result<SolveResult<T>, SolverError> {
    match detach {
        None => solve(wrapped, z0, config),
        Some(d) => solve_with_restarts(wrapped, z0, config, |z| {
            let moved = detachment_correction(wrapped, &z, d.eps, d.eta0_init)?;
            let detached = d.reset_mu && moved != z;
            Ok((moved, detached))
        }),
    }
}

/// `L + (1/t)[Σ_{masked y} log y_j − Σ_{masked x} log x_i]`.
#[derive(Debug, Clone)]
pub struct BarrierProblem<P, T> {
    base: P,
    t: T,
    mask: ConstraintMask,
    name: String,
}

pub fn wrap_barrier<T: Scalar, P: MinimaxProblem<T>>(
    base: P,
    t: T,
    mask: ConstraintMask,
) -> Result<BarrierProblem<P, T>, ProblemError> {
    if !(t > T::zero()) || !t.is_finite() {
        return Err(ProblemError::Invalid(format!(
            "barrier strength t must be positive, got {t}"
        )));
    }
    base.shape().check_len(mask.dim())?;
    let name = format!("barrier({}, t={})", base.name(), t);
    Ok(BarrierProblem {
        base,
        t,
        mask,
        name,
    })
}

impl<P: MinimaxProblem<T>, T: Scalar> BarrierProblem<P, T> {
    pub fn t(&self) -> T {
        self.t
    }

    pub fn base(&self) -> &P {
        &self.base
    }

    fn check_domain(&self, z: &Point<T>) -> Result<(), ProblemError> {
        self.base.shape().check_len(z.len())?;
        for &i in self.mask.indices() {
            if !(z[i] > T::zero()) {
                return Err(ProblemError::DomainViolation {
                    index: i,
                    value: z[i].as_f64(),
                });
            }
        }
        Ok(())
    }
}

impl<T: Scalar, P: MinimaxProblem<T>> MinimaxProblem<T> for BarrierProblem<P, T> {
    fn shape(&self) -> TwistShape {
        self.base.shape()
    }

    fn name(&self) -> &str {
        &self.name
    }

    fn value(&self, z: &Point<T>) -> Result<T, ProblemError> {
        self.check_domain(z)?;
        let shape = self.shape();
        // +log on the max block, −log on the min block: −J_ii log z_i
        let barrier: T = self
            .mask
            .indices()
            .iter()
            .map(|&i| -shape.sign::<T>(i) * z[i].ln())
            .sum();
        Ok(self.base.value(z)? + barrier / self.t)
    }

    fn gradient(&self, z: &Point<T>) -> Result<Vector<T>, ProblemError> {
        self.check_domain(z)?;
        let shape = self.shape();
        let mut g = self.base.gradient(z)?;
        for &i in self.mask.indices() {
            g[i] = g[i] - shape.sign::<T>(i) / (self.t * z[i]);
        }
        Ok(g)
    }

    fn hessian(&self, z: &Point<T>) -> Option<Result<Matrix<T>, ProblemError>> {
        let h = self.base.hessian(z)?;
        Some(self.check_domain(z).and(h).map(|mut h| {
            let shape = self.shape();
            for &i in self.mask.indices() {
                h[(i, i)] = h[(i, i)] + shape.sign::<T>(i) / (self.t * z[i] * z[i]);
            }
            h
        }))
    }

    fn has_hessian(&self) -> bool {
        self.base.has_hessian()
    }
}

/// Geometric barrier schedule `t0, t0·growth, …` with `stages` entries.
pub fn geometric_schedule<T: Scalar>(t0: T, growth: T, stages: usize) -> Vec<T> {
    std::iter::successors(Some(t0), |&t| Some(t * growth))
        .take(stages)
        .collect()
}

/// Solves the barrier problem along `t_schedule`, warm-starting each stage
/// from the previous terminal point.
pub fn barrier_continuation<T: Scalar, P: MinimaxProblem<T>>(
    base: &P,
    mask: &ConstraintMask,
    z0: &Point<T>,
    t_schedule: &[T],
    config: &SolverConfig<T>,
) -> Result<Vec<SolveResult<T>>, SolverError> {
    if t_schedule.is_empty() {
        return Err(SolverError::InvalidConfig("empty barrier schedule".into()));
    }
    if t_schedule.windows(2).any(|w| !(w[1] > w[0])) {
        return Err(SolverError::InvalidConfig(
            "barrier schedule must be strictly increasing".into(),
        ));
    }
    let mut z = z0.clone();
    let mut results = Vec::with_capacity(t_schedule.len());
    for &t in t_schedule {
        let problem = wrap_barrier(base, t, mask.clone())?;
        problem.check_domain(&z)?;
        let res = solve(&problem, &z, config)?;
        z = res.z_final.clone();
        results.push(res);
    }
    Ok(results)
}
