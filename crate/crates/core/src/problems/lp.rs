//! Linear programs `min cᵗX s.t. AX ≥ b, X ≥ 0` as minimax problems.
//!
//! The Lagrangian `cᵗX − Yᵗ(AX − b)` is exposed both in original
//! coordinates ([`LpLagrangian`], for barriers and generic wrappers) and in
//! squared variables `X = x², Y = y²` ([`LpSquared`]) with hand-derived
//! derivatives.

use rand::{Rng, SeedableRng};
use rand_pcg::Pcg32;

use crate::constraints::{solve_squared, wrap_squared, ConstraintMask, DetachConfig};
use crate::linalg::{Matrix, Vector};
use crate::minimax::{MinimaxProblem, Point, ProblemError, TwistShape};
use crate::scalar::Scalar;
use crate::solver::{SolveResult, SolverConfig, SolverError};

/// `A` is `n_y × n_x`, `b` has `n_y` entries and `c` has `n_x`.
#[derive(Debug, Clone, PartialEq)]
pub struct LpInstance<T> {
    pub a: Matrix<T>,
    pub b: Vector<T>,
    pub c: Vector<T>,
    /// Seed used by [`LpInstance::random`], if any.
    pub seed: Option<u64>,
}

impl<T: Scalar> LpInstance<T> {
    pub fn new(a: Matrix<T>, b: Vector<T>, c: Vector<T>) -> Result<Self, ProblemError> {
        if a.rows() != b.len() || a.cols() != c.len() {
            return Err(ProblemError::Invalid(format!(
                "A is {}x{}, b has {} entries, c has {}",
                a.rows(),
                a.cols(),
                b.len(),
                c.len()
            )));
        }
        if a.rows() + a.cols() == 0 {
            return Err(ProblemError::Invalid("empty LP".into()));
        }
        Ok(Self {
            a,
            b,
            c,
            seed: None,
        })
    }

    /// Entries of `A`, `b`, `c` drawn independently from U[0, 1] by a
    /// seeded PCG-32 generator, in that order (`A` row-major).
    pub fn random(n_x: usize, n_y: usize, seed: u64) -> Self {
        let mut rng = Pcg32::seed_from_u64(seed);
        let mut draw =
            |k: usize| -> Vec<T> { (0..k).map(|_| T::lit(rng.random::<f64>())).collect() };
        let a = Matrix::from_raw(n_y, n_x, draw(n_x * n_y));
        let b = Vector::from_raw(draw(n_y));
        let c = Vector::from_raw(draw(n_x));
        Self {
            a,
            b,
            c,
            seed: Some(seed),
        }
    }

    pub fn n_x(&self) -> usize {
        self.c.len()
    }

    pub fn n_y(&self) -> usize {
        self.b.len()
    }

    pub fn shape(&self) -> TwistShape {
        TwistShape::new(self.n_x(), self.n_y()).expect("non-empty LP")
    }

    /// Constant start `x_i = √(0.8/n_x)`, `y_j = √(0.4/n_y)` in squared variables.
    pub fn default_start(&self) -> Point<T> {
        let (nx, ny) = (self.n_x(), self.n_y());
        let x0 = T::lit((0.8 / nx as f64).sqrt());
        let y0 = T::lit((0.4 / ny.max(1) as f64).sqrt());
        Vector::from_fn(nx + ny, |i| if i < nx { x0 } else { y0 })
    }
}

fn lagrangian_value<T: Scalar>(inst: &LpInstance<T>, big_x: &Vector<T>, big_y: &Vector<T>) -> T {
    let slack = inst.a.matvec(big_x).sub(&inst.b);
    inst.c.dot(big_x) - big_y.dot(&slack)
}

/// `cᵗX − Yᵗ(AX − b)` in original coordinates `Z = (X, Y)`.
#[derive(Debug, Clone)]
pub struct LpLagrangian<T> {
    inst: LpInstance<T>,
}

pub fn make_lp_lagrangian<T: Scalar>(inst: LpInstance<T>) -> LpLagrangian<T> {
    LpLagrangian { inst }
}

impl<T: Scalar> LpLagrangian<T> {
    pub fn instance(&self) -> &LpInstance<T> {
        &self.inst
    }
}

impl<T: Scalar> MinimaxProblem<T> for LpLagrangian<T> {
    fn shape(&self) -> TwistShape {
        self.inst.shape()
    }
    fn name(&self) -> &str {
        "lp_lagrangian"
    }
    fn value(&self, z: &Point<T>) -> Result<T, ProblemError> {
        self.shape().check_len(z.len())?;
        let nx = self.inst.n_x();
        Ok(lagrangian_value(
            &self.inst,
            &z.segment(0, nx),
            &z.segment(nx, self.inst.n_y()),
        ))
    }
    fn gradient(&self, z: &Point<T>) -> Result<Vector<T>, ProblemError> {
        self.shape().check_len(z.len())?;
        let (nx, ny) = (self.inst.n_x(), self.inst.n_y());
        let (big_x, big_y) = (z.segment(0, nx), z.segment(nx, ny));
        let gx = self.inst.c.sub(&self.inst.a.matvec_t(&big_y));
        let gy = self.inst.b.sub(&self.inst.a.matvec(&big_x));
        Ok(Vector::concat(&gx, &gy))
    }
    fn hessian(&self, z: &Point<T>) -> Option<Result<Matrix<T>, ProblemError>> {
        Some(self.shape().check_len(z.len()).map(|_| {
            let nx = self.inst.n_x();
            let n = z.len();
            let a = &self.inst.a;
            Matrix::from_fn(n, n, |i, j| match (i < nx, j < nx) {
                (true, false) => -a[(j - nx, i)],
                (false, true) => -a[(i - nx, j)],
                _ => T::zero(),
            })
        }))
    }
    fn has_hessian(&self) -> bool {
        true
    }
}

/// The LP Lagrangian in squared variables with closed-form derivatives:
///
/// ```text
/// L_x  = 2 (c − AᵗY) .* x          L_y  = 2 (b − AX) .* y
/// L_xx = 2 diag(c − AᵗY)           L_yy = 2 diag(b − AX)
/// L_xy = −4 diag(x) Aᵗ diag(y)
/// ```
#[derive(Debug, Clone)]
pub struct LpSquared<T> {
    inst: LpInstance<T>,
}

pub fn make_lp<T: Scalar>(inst: LpInstance<T>) -> LpSquared<T> {
    LpSquared { inst }
}

impl<T: Scalar> LpSquared<T> {
    pub fn instance(&self) -> &LpInstance<T> {
        &self.inst
    }

    fn split(&self, z: &Point<T>) -> (Vector<T>, Vector<T>) {
        let nx = self.inst.n_x();
        (z.segment(0, nx), z.segment(nx, self.inst.n_y()))
    }

    /// Reduced costs `c − AᵗY` and slacks `AX − b` at `z`.
    fn residuals(&self, x: &Vector<T>, y: &Vector<T>) -> (Vector<T>, Vector<T>) {
        let big_x = x.hadamard(x);
        let big_y = y.hadamard(y);
        let reduced = self.inst.c.sub(&self.inst.a.matvec_t(&big_y));
        let slack = self.inst.a.matvec(&big_x).sub(&self.inst.b);
        (reduced, slack)
    }
}

impl<T: Scalar> MinimaxProblem<T> for LpSquared<T> {
    fn shape(&self) -> TwistShape {
        self.inst.shape()
    }
    fn name(&self) -> &str {
        "lp"
    }
    fn value(&self, z: &Point<T>) -> Result<T, ProblemError> {
        self.shape().check_len(z.len())?;
        let (x, y) = self.split(z);
        Ok(lagrangian_value(
            &self.inst,
            &x.hadamard(&x),
            &y.hadamard(&y),
        ))
    }
    fn gradient(&self, z: &Point<T>) -> Result<Vector<T>, ProblemError> {
        self.shape().check_len(z.len())?;
        let (x, y) = self.split(z);
        let (reduced, slack) = self.residuals(&x, &y);
        let two = T::lit(2.0);
        let gx = reduced.hadamard(&x).scale(two);
        let gy = slack.hadamard(&y).scale(-two);
        Ok(Vector::concat(&gx, &gy))
    }
    fn hessian(&self, z: &Point<T>) -> Option<Result<Matrix<T>, ProblemError>> {
        if let Err(e) = self.shape().check_len(z.len()) {
            return Some(Err(e));
        }
        let (x, y) = self.split(z);
        let (reduced, slack) = self.residuals(&x, &y);
        let nx = x.len();
        let n = z.len();
        let (two, four) = (T::lit(2.0), T::lit(4.0));
        let a = &self.inst.a;
        let mut h = Matrix::zeros(n, n);
        for i in 0..nx {
            h[(i, i)] = two * reduced[i];
        }
        for j in 0..y.len() {
            h[(nx + j, nx + j)] = -two * slack[j];
            for i in 0..nx {
                let v = -four * x[i] * a[(j, i)] * y[j];
                h[(i, nx + j)] = v;
                h[(nx + j, i)] = v;
            }
        }
        Some(Ok(h))
    }
    fn has_hessian(&self) -> bool {
        true
    }
}

/// Worst violation among primal and dual feasibility, complementary
/// slackness and the duality gap `|cᵗX − bᵗY|`. Zero exactly at an optimal
/// primal-dual pair.
pub fn lp_kkt_residual<T: Scalar>(inst: &LpInstance<T>, big_x: &Vector<T>, big_y: &Vector<T>) -> T {
    let slack = inst.a.matvec(big_x).sub(&inst.b);
    let reduced = inst.c.sub(&inst.a.matvec_t(big_y));
    let neg = |v: &Vector<T>| v.iter().fold(T::zero(), |m, &e| m.max((-e).max(T::zero())));
    let comp = |u: &Vector<T>, w: &Vector<T>| u.hadamard(w).norm_inf();
    let gap = (inst.c.dot(big_x) - inst.b.dot(big_y)).abs();
    [
        neg(&slack),
        neg(big_x),
        neg(&reduced),
        neg(big_y),
        comp(big_y, &slack),
        comp(big_x, &reduced),
        gap,
    ]
    .into_iter()
    .fold(T::zero(), T::max)
}

/// Detachment settings for LPs. Every squared coordinate below one whose
/// original gradient points the wrong way gets pushed off zero, and μ
/// restarts after each push.
pub fn lp_detach_config<T: Scalar>() -> DetachConfig<T> {
    DetachConfig {
        eps: T::one(),
        eta0_init: T::lit(1e-2),
        reset_mu: true,
    }
}

#[derive(Debug, Clone)]
pub struct LpSolution<T> {
    /// `X = x²`.
    pub x: Vector<T>,
    /// `Y = y²`.
    pub y: Vector<T>,
    pub kkt_residual: T,
    pub result: SolveResult<T>,
}

/// Solves the squared-variable Lagrangian from `z0` (in squared-root
/// coordinates) with detachment after every accepted step.
pub fn solve_lp<T: Scalar>(
    inst: &LpInstance<T>,
    z0: &Point<T>,
    config: &SolverConfig<T>,
    detach: DetachConfig<T>,
) -> Result<LpSolution<T>, SolverError> {
    let (nx, ny) = (inst.n_x(), inst.n_y());
    let wrapped = wrap_squared(
        make_lp_lagrangian(inst.clone()),
        ConstraintMask::all(nx + ny),
    )?;
    let result = solve_squared(&wrapped, z0, config, Some(detach))?;
    let z = &result.z_final;
    let x = z.segment(0, nx).map(|v| v * v);
    let y = z.segment(nx, ny).map(|v| v * v);
    Ok(LpSolution {
        kkt_residual: lp_kkt_residual(inst, &x, &y),
        x,
        y,
        result,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn tiny() -> LpInstance<f64> {
        LpInstance::new(
            Matrix::from_rows(&[&[1.0]]),
            Vector::from([1.0]),
            Vector::from([1.0]),
        )
        .unwrap()
    }

    #[test]
    fn kkt_tiny_examples() {
        let inst = tiny();
        assert_eq!(
            lp_kkt_residual(&inst, &Vector::from([1.0]), &Vector::from([1.0])),
            0.0
        );
        assert!(lp_kkt_residual(&inst, &Vector::from([2.0]), &Vector::from([1.0])) >= 1.0);
    }

    #[test]
    fn kkt_hand_solved_instances() {
        // min x1 + 2 x2  s.t. x1 + x2 ≥ 1  →  X = (1, 0), Y = 1
        let inst = LpInstance::new(
            Matrix::from_rows(&[&[1.0, 1.0]]),
            Vector::from([1.0]),
            Vector::from([1.0, 2.0]),
        )
        .unwrap();
        assert_eq!(
            lp_kkt_residual(&inst, &Vector::from([1.0, 0.0]), &Vector::from([1.0])),
            0.0
        );
        // min 3x s.t. x ≥ 2, 2x ≥ 1  →  X = 2, Y = (3, 0)
        let inst = LpInstance::new(
            Matrix::from_rows(&[&[1.0], &[2.0]]),
            Vector::from([2.0, 1.0]),
            Vector::from([3.0]),
        )
        .unwrap();
        assert_eq!(
            lp_kkt_residual(&inst, &Vector::from([2.0]), &Vector::from([3.0, 0.0])),
            0.0
        );
        // min x1 + x2 s.t. x1 ≥ 1, x2 ≥ 2  →  X = (1, 2), Y = (1, 1)
        let inst = LpInstance::new(
            Matrix::from_rows(&[&[1.0, 0.0], &[0.0, 1.0]]),
            Vector::from([1.0, 2.0]),
            Vector::from([1.0, 1.0]),
        )
        .unwrap();
        assert_eq!(
            lp_kkt_residual(&inst, &Vector::from([1.0, 2.0]), &Vector::from([1.0, 1.0])),
            0.0
        );
        assert!(lp_kkt_residual(&inst, &Vector::from([1.0, 1.5]), &Vector::from([1.0, 1.0])) > 0.4);
    }

    #[test]
    fn random_is_reproducible_and_unit_interval() {
        let a = LpInstance::<f64>::random(7, 5, 42);
        let b = LpInstance::<f64>::random(7, 5, 42);
        assert_eq!(a, b);
        assert_ne!(a, LpInstance::random(7, 5, 43));
        let all = a.a.as_slice().iter().chain(a.b.iter()).chain(a.c.iter());
        assert!(all.into_iter().all(|&v| (0.0..1.0).contains(&v)));
        assert_eq!((a.a.rows(), a.a.cols()), (5, 7));
    }

    #[test]
    fn mismatched_dimensions_rejected() {
        let r = LpInstance::new(
            Matrix::from_rows(&[&[1.0, 2.0]]),
            Vector::from([1.0]),
            Vector::from([1.0]),
        );
        assert!(r.is_err());
    }
}
