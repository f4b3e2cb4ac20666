//! Hessian-free stepping.
//!
//! `B` estimates the inverse mollified Hessian `(J + ηH)⁻¹` and is corrected
//! once per step by a clamped rank-one update. [`SecantScheme::Retrospective`]
//! enforces `B G_prev = J G_now`, which holds when the previous step was the
//! exact implicit step. [`SecantScheme::StepSecant`] enforces `B s = Δz` with
//! `s = J Δz + η ΔG`, valid for any step, and carries `B` to a new η through
//! `B' = B ((1 − r) J B + r I)⁻¹`, `r = η'/η`, exact for constant `H`.
//! Optional refinements keep estimates of `H` and `H⁻¹`
//! and pull the three matrices toward mutual consistency by single gradient
//! steps on `½‖(J + ηH)B − I‖²` and `½‖H⁻¹H − I‖²`.

use thiserror::Error;

use crate::linalg::{LinalgError, LuFactors, Matrix, Vector};
use crate::minimax::{twist, twist_matrix, MinimaxProblem, Point, TwistShape};
use crate::scalar::{floor_tol, Scalar};
use crate::solver::SolverError;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum QnError {
    #[error("secant vector ΔG vanishes (‖ΔG‖ = {0:e})")]
    ZeroSecant(f64),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default)]
pub enum SecantScheme {
    /// `B G_prev = J G_now`, with `B` reused unchanged at every η.
    Retrospective,
    /// `B (J Δz + η ΔG) = Δz`, with `B` rescaled whenever η changes.
    #[default]
    StepSecant,
}

/// Quasi-Newton state owned by a single solve.
#[derive(Debug, Clone, PartialEq)]
pub struct QNState<T> {
    pub shape: TwistShape,
    pub scheme: SecantScheme,
    /// Estimate of `(J + ηH)⁻¹`.
    pub b: Matrix<T>,
    /// η at which `b` is meant to hold; `None` before the first step.
    pub eta_b: Option<T>,
    /// Rescaled `B` of the last proposal, kept until it is committed.
    pending: Option<(T, Matrix<T>)>,
    pub g_prev: Option<Vector<T>>,
    pub z_prev: Option<Point<T>>,
    pub h_est: Option<Matrix<T>>,
    pub hinv_est: Option<Matrix<T>>,
    /// η of the last committed step.
    pub eta_prev: Option<T>,
    /// Committed steps so far.
    pub steps: usize,
}

/// `B = J`, the exact inverse mollified Hessian at η = 0, with the
/// retrospective secant.
pub fn qn_init<T: Scalar>(shape: TwistShape) -> QNState<T> {
    qn_init_with(shape, SecantScheme::Retrospective)
}

pub fn qn_init_with<T: Scalar>(shape: TwistShape, scheme: SecantScheme) -> QNState<T> {
    QNState {
        shape,
        scheme,
        b: twist_matrix(shape),
        eta_b: None,
        pending: None,
        g_prev: None,
        z_prev: None,
        h_est: None,
        hinv_est: None,
        eta_prev: None,
        steps: 0,
    }
}

/// Adds `coef * r rᵗ / ‖r‖²` with `coef = sign(c) min(|c|, ‖m‖_F)` and
/// `c = ‖r‖² / (sᵗ r)`. Unclamped, the result sends `s` to `m s + r`.
/// Leaves `m` alone when `r` is negligible.
fn clamped_rank_one<T: Scalar>(m: &Matrix<T>, s: &Vector<T>, r: &Vector<T>) -> Matrix<T> {
    let fro = m.frobenius_norm();
    let rr = r.dot(r);
    if r.norm() < floor_tol::<T>(1e-14, 8.0) * (T::one() + fro) {
        return m.clone();
    }
    let coef = rr / s.dot(r);
    let clamped = if coef.is_nan() {
        fro
    } else {
        coef.signum() * coef.abs().min(fro)
    };
    let mut out = m.clone();
    let scale = clamped / rr;
    let n = r.len();
    let data = out.as_mut_slice();
    for i in 0..n {
        let ri = r[i] * scale;
        for j in 0..n {
            data[i * n + j] = data[i * n + j] + ri * r[j];
        }
    }
    out
}

/// Clamped rank-one correction of `B` toward `B G_prev = J G_now`.
pub fn qn_update_rank1<T: Scalar>(
    b: &Matrix<T>,
    g_prev: &Vector<T>,
    g_now: &Vector<T>,
    shape: TwistShape,
) -> Matrix<T> {
    let r = twist(shape, g_now).sub(&b.matvec(g_prev));
    clamped_rank_one(b, g_prev, &r)
}

/// Clamped rank-one correction of `H` toward `H Δz = ΔG`.
pub fn hessian_update_rank1<T: Scalar>(h: &Matrix<T>, dz: &Vector<T>, dg: &Vector<T>) -> Matrix<T> {
    let r = dg.sub(&h.matvec(dz));
    clamped_rank_one(h, dz, &r)
}

/// `H⁻¹ + (Δz − H⁻¹ΔG) ΔGᵗ / (ΔGᵗ ΔG)`, which satisfies `H⁻¹' ΔG = Δz`.
pub fn hinv_update_rank1<T: Scalar>(
    hinv: &Matrix<T>,
    dz: &Vector<T>,
    dg: &Vector<T>,
) -> Result<Matrix<T>, QnError> {
    let gg = dg.dot(dg);
    if dg.norm() < floor_tol::<T>(1e-14, 8.0) {
        return Err(QnError::ZeroSecant(gg.sqrt().as_f64()));
    }
    let r = dz.sub(&hinv.matvec(dg));
    Ok(hinv.add(&Matrix::outer(&r, dg).scale(T::one() / gg)))
}

/// Objective and gradients of `F(B, H) = ½‖(J + ηH)B − I‖²_F`.
#[derive(Debug, Clone, PartialEq)]
pub struct ConsistencyGradient<T> {
    pub value: T,
    /// `∂F/∂B = (J + ηH)ᵗ A`
    pub grad_b: Matrix<T>,
    /// `∂F/∂H = η A Bᵗ`
    pub grad_h: Matrix<T>,
}

pub fn consistency_objective<T: Scalar>(
    b: &Matrix<T>,
    h: &Matrix<T>,
    shape: TwistShape,
    eta: T,
) -> ConsistencyGradient<T> {
    let n = shape.dim();
    let moll = twist_matrix::<T>(shape).axpy(eta, h);
    let a = moll.matmul(b).sub(&Matrix::identity(n));
    let value = a.frobenius_sq() / (T::one() + T::one());
    ConsistencyGradient {
        value,
        grad_b: moll.transpose().matmul(&a),
        grad_h: a.matmul(&b.transpose()).scale(eta),
    }
}

/// Objective and gradients of `F₂(H, H⁻¹) = ½‖H⁻¹H − I‖²_F`.
#[derive(Debug, Clone, PartialEq)]
pub struct InverseGradient<T> {
    pub value: T,
    /// `∂F₂/∂H = (H⁻¹)ᵗ A₂`
    pub grad_h: Matrix<T>,
    /// `∂F₂/∂H⁻¹ = A₂ Hᵗ`
    pub grad_hinv: Matrix<T>,
}

pub fn hinv_consistency_objective<T: Scalar>(
    h: &Matrix<T>,
    hinv: &Matrix<T>,
) -> InverseGradient<T> {
    let a = hinv.matmul(h).sub(&Matrix::identity(h.rows()));
    InverseGradient {
        value: a.frobenius_sq() / (T::one() + T::one()),
        grad_h: hinv.transpose().matmul(&a),
        grad_hinv: a.matmul(&h.transpose()),
    }
}

/// Result of one consistency descent step on a pair of matrices.
#[derive(Debug, Clone, PartialEq)]
pub struct PairStep<T> {
    pub first: Matrix<T>,
    pub second: Matrix<T>,
    pub f_before: T,
    pub f_after: T,
    /// Step size `ν = 2F / ‖∇F‖²` (zero when the objective already vanishes).
    pub nu: T,
    /// False when the step would not have decreased the objective.
    pub applied: bool,
}

fn skipped<T: Scalar>(first: &Matrix<T>, second: &Matrix<T>, f: T, nu: T) -> PairStep<T> {
    PairStep {
        first: first.clone(),
        second: second.clone(),
        f_before: f,
        f_after: f,
        nu,
        applied: false,
    }
}

/// One gradient step on `½‖(J + ηH)B − I‖²` with `ν = 2F / ‖∇F‖²`.
/// Returns `(B', H')` as `(first, second)`; skipped if `F` would not drop.
pub fn consistency_descent_step<T: Scalar>(
    b: &Matrix<T>,
    h: &Matrix<T>,
    shape: TwistShape,
    eta: T,
) -> PairStep<T> {
    let cg = consistency_objective(b, h, shape, eta);
    let grad_sq = cg.grad_b.frobenius_sq() + cg.grad_h.frobenius_sq();
    if cg.value == T::zero() || grad_sq == T::zero() {
        return skipped(b, h, cg.value, T::zero());
    }
    let nu = (cg.value + cg.value) / grad_sq;
    let b_new = b.axpy(-nu, &cg.grad_b);
    let h_new = h.axpy(-nu, &cg.grad_h);
    let f_after = consistency_objective(&b_new, &h_new, shape, eta).value;
    if !(f_after < cg.value) {
        return skipped(b, h, cg.value, nu);
    }
    PairStep {
        first: b_new,
        second: h_new,
        f_before: cg.value,
        f_after,
        nu,
        applied: true,
    }
}

/// One gradient step on `½‖H⁻¹H − I‖²`. Returns `(H', H⁻¹')`.
pub fn hinv_consistency_step<T: Scalar>(h: &Matrix<T>, hinv: &Matrix<T>) -> PairStep<T> {
    let ig = hinv_consistency_objective(h, hinv);
    let grad_sq = ig.grad_h.frobenius_sq() + ig.grad_hinv.frobenius_sq();
    if ig.value == T::zero() || grad_sq == T::zero() {
        return skipped(h, hinv, ig.value, T::zero());
    }
    let nu = (ig.value + ig.value) / grad_sq;
    let h_new = h.axpy(-nu, &ig.grad_h);
    let hinv_new = hinv.axpy(-nu, &ig.grad_hinv);
    let f_after = hinv_consistency_objective(&h_new, &hinv_new).value;
    if !(f_after < ig.value) {
        return skipped(h, hinv, ig.value, nu);
    }
    PairStep {
        first: h_new,
        second: hinv_new,
        f_before: ig.value,
        f_after,
        nu,
        applied: true,
    }
}

impl<T: Scalar> QNState<T> {
    /// Retrospective secant correction using the gradient at the current
    /// point, plus the optional refinements every `refine_every` steps.
    pub(crate) fn absorb(&mut self, z: &Point<T>, g: &Vector<T>, refine_every: usize) {
        let (Some(g_prev), Some(z_prev)) = (self.g_prev.as_ref(), self.z_prev.as_ref()) else {
            return;
        };
        let dz = z.sub(z_prev);
        let dg = g.sub(g_prev);
        self.b = match self.scheme {
            SecantScheme::Retrospective => qn_update_rank1(&self.b, g_prev, g, self.shape),
            SecantScheme::StepSecant => {
                let eta = self.eta_b.unwrap_or(T::zero());
                let s = twist(self.shape, &dz).axpy(eta, &dg);
                let r = dz.sub(&self.b.matvec(&s));
                clamped_rank_one(&self.b, &s, &r)
            }
        };
        if refine_every == 0 {
            return;
        }
        let n = self.shape.dim();
        let h = self.h_est.get_or_insert_with(|| Matrix::identity(n));
        *h = hessian_update_rank1(h, &dz, &dg);
        let hinv = self.hinv_est.get_or_insert_with(|| Matrix::identity(n));
        if let Ok(updated) = hinv_update_rank1(hinv, &dz, &dg) {
            *hinv = updated;
        }
        if self.steps.is_multiple_of(refine_every) {
            let eta = self.eta_prev.unwrap_or(T::zero());
            let h = self.h_est.take().expect("initialized above");
            let step = consistency_descent_step(&self.b, &h, self.shape, eta);
            self.b = step.first;
            let hinv = self.hinv_est.take().expect("initialized above");
            let inv_step = hinv_consistency_step(&step.second, &hinv);
            self.h_est = Some(inv_step.first);
            self.hinv_est = Some(inv_step.second);
        }
    }

    /// `B` carried from `eta_b` to `eta`.
    pub fn rescaled(&self, eta: T) -> Result<Matrix<T>, LinalgError> {
        let Some(eta_b) = self.eta_b.filter(|e| *e > T::zero()) else {
            return Ok(self.b.clone());
        };
        if eta == eta_b {
            return Ok(self.b.clone());
        }
        let r = eta / eta_b;
        let n = self.shape.dim();
        let jb = twist_matrix::<T>(self.shape).matmul(&self.b);
        let m = jb.scale(T::one() - r).axpy(r, &Matrix::identity(n));
        Ok(self.b.matmul(&LuFactors::new(&m)?.inverse()))
    }

    /// `z − η B G`.
    pub(crate) fn propose(
        &mut self,
        z: &Point<T>,
        g: &Vector<T>,
        eta: T,
    ) -> Result<Point<T>, LinalgError> {
        match self.scheme {
            SecantScheme::Retrospective => Ok(z.axpy(-eta, &self.b.matvec(g))),
            SecantScheme::StepSecant => {
                let b = self.rescaled(eta)?;
                let zn = z.axpy(-eta, &b.matvec(g));
                self.pending = Some((eta, b));
                Ok(zn)
            }
        }
    }

    pub(crate) fn commit(&mut self, z: &Point<T>, g: &Vector<T>, eta: T) {
        if let Some((pe, b)) = self.pending.take() {
            if pe == eta {
                self.b = b;
            }
        }
        if self.scheme == SecantScheme::StepSecant {
            self.eta_b = Some(eta);
        }
        self.z_prev = Some(z.clone());
        self.g_prev = Some(g.clone());
        self.eta_prev = Some(eta);
        self.steps += 1;
    }

    /// Stall recovery: forget the learned `B`.
    pub(crate) fn reset_b(&mut self) {
        self.b = twist_matrix(self.shape);
        self.pending = None;
    }
}

/// One uncontrolled quasi-Newton step at fixed η: correct `B` with the
/// gradient at `z`, then move to `z − η B G(z)`.
pub fn qn_step<T: Scalar, P: MinimaxProblem<T> + ?Sized>(
    problem: &P,
    state: QNState<T>,
    z: &Point<T>,
    eta: T,
) -> Result<(Point<T>, QNState<T>), SolverError> {
    problem.shape().check_len(z.len())?;
    let mut state = state;
    let g = problem.gradient(z)?;
    state.absorb(z, &g, 0);
    let z_next = state
        .propose(z, &g, eta)
        .map_err(SolverError::SingularSystem)?;
    state.commit(z, &g, eta);
    Ok((z_next, state))
}
