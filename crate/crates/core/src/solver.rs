//! Explicit and implicit twisted gradient steps, the sandwich acceptance
//! check, the surrogate-μ learning-rate controller and the outer loop.
//!
//! The implicit step is
//!
//! ```text
//! z⁺ = z − η (J + ηH)⁻¹ G(z)
//! ```
//!
//! which tends to twisted gradient descent as η → 0 and to a Newton step as
//! η → ∞. The controller proposes `η = μ / ‖G‖`, grows μ geometrically up to
//! a cap and halves it whenever a trial step breaks
//! `L(x⁺, y) ≤ L(x⁺, y⁺) ≤ L(x, y⁺)`.

use thiserror::Error;

use crate::linalg::{lu_solve, LinalgError, Vector};
use crate::minimax::{
    twist, twist_matrix, Counted, EvalCounters, MinimaxProblem, Point, ProblemError,
};
use crate::quasi_newton::{qn_init_with, QNState, SecantScheme};
use crate::scalar::{floor_tol, Scalar};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum SolverError {
    #[error(transparent)]
    Problem(#[from] ProblemError),
    #[error("singular system J + ηH: {0}")]
    SingularSystem(LinalgError),
    #[error("problem `{0}` has no Hessian; use the explicit or quasi-Newton method")]
    MissingHessian(String),
    #[error("invalid solver configuration: {0}")]
    InvalidConfig(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Method {
    Explicit,
    Implicit,
    QuasiNewton,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SolverConfig<T> {
    pub mu0: T,
    /// Per-step growth factor of μ; must exceed 1.
    pub alpha: T,
    pub mu_max: T,
    /// μ below this ends the solve with [`Status::MuUnderflow`].
    pub mu_min: T,
    pub grad_tol: T,
    pub max_steps: usize,
    /// Rejections allowed within one outer step.
    pub max_halvings: usize,
    /// `‖z‖` beyond this ends the solve with [`Status::Diverged`].
    pub divergence_norm: T,
    pub method: Method,
    /// Bypasses the controller: every step uses this η and is taken whether
    /// or not it passes the acceptance check.
    pub fixed_eta: Option<T>,
    /// Quasi-Newton only: run the Hessian / inverse-Hessian refinements
    /// every this many steps. Zero disables them.
    pub qn_refine_every: usize,
    pub qn_scheme: SecantScheme,
}

impl<T: Scalar> Default for SolverConfig<T> {
    fn default() -> Self {
        Self {
            mu0: T::one(),
            alpha: T::lit(5.1),
            mu_max: T::lit(1e7),
            mu_min: T::lit(1e-12),
            grad_tol: T::lit(1e-8),
            max_steps: 10_000,
            max_halvings: 60,
            divergence_norm: T::lit(1e12),
            method: Method::Implicit,
            fixed_eta: None,
            qn_refine_every: 0,
            qn_scheme: SecantScheme::StepSecant,
        }
    }
}

impl<T: Scalar> SolverConfig<T> {
    pub fn validate(&self) -> Result<(), SolverError> {
        let bad = |msg: &str| Err(SolverError::InvalidConfig(msg.to_string()));
        if !(self.alpha > T::one()) {
            return bad("alpha must exceed 1");
        }
        if !(self.mu_min > T::zero() && self.mu_min < self.mu0 && self.mu0 <= self.mu_max) {
            return bad("require 0 < mu_min < mu0 <= mu_max");
        }
        if !(self.grad_tol > T::zero()) {
            return bad("grad_tol must be positive");
        }
        if !(self.divergence_norm > T::zero()) {
            return bad("divergence_norm must be positive");
        }
        if let Some(eta) = self.fixed_eta {
            if !(eta > T::zero() && eta.is_finite()) {
                return bad("fixed_eta must be positive and finite");
            }
        }
        Ok(())
    }

    pub fn with_method(mut self, method: Method) -> Self {
        self.method = method;
        self
    }

    pub fn with_fixed_eta(mut self, eta: T) -> Self {
        self.fixed_eta = Some(eta);
        self
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Status {
    Converged,
    MaxSteps,
    MuUnderflow,
    Diverged,
}

impl Status {
    pub fn as_str(&self) -> &'static str {
        match self {
            Status::Converged => "Converged",
            Status::MaxSteps => "MaxSteps",
            Status::MuUnderflow => "MuUnderflow",
            Status::Diverged => "Diverged",
        }
    }
}

/// Diagnostics for one outer step.
#[derive(Debug, Clone, PartialEq)]
pub struct StepRecord<T> {
    pub step: usize,
    pub mu: T,
    pub eta: T,
    /// `‖G‖` at the start of the step.
    pub grad_norm: T,
    /// `L(x⁺, y)`
    pub l_lower: T,
    /// `L(x⁺, y⁺)`
    pub l_mid: T,
    /// `L(x, y⁺)`
    pub l_upper: T,
    pub halvings: usize,
    pub accepted: bool,
}

#[derive(Debug, Clone)]
pub struct SolveResult<T> {
    pub z_final: Point<T>,
    pub status: Status,
    pub trace: Vec<StepRecord<T>>,
    pub counters: EvalCounters,
    pub final_grad_norm: T,
    pub final_value: T,
}

impl<T: Scalar> SolveResult<T> {
    pub fn steps(&self) -> usize {
        self.trace.len()
    }

    /// Total number of rejected trial steps.
    pub fn total_halvings(&self) -> usize {
        self.trace.iter().map(|r| r.halvings).sum()
    }
}

/// `z − η J G(z)`.
pub fn explicit_step<T: Scalar, P: MinimaxProblem<T> + ?Sized>(
    problem: &P,
    z: &Point<T>,
    eta: T,
) -> Result<Point<T>, SolverError> {
    let g = problem.gradient(z)?;
    Ok(explicit_from_gradient(problem.shape(), z, &g, eta))
}

fn explicit_from_gradient<T: Scalar>(
    shape: crate::minimax::TwistShape,
    z: &Point<T>,
    g: &Vector<T>,
    eta: T,
) -> Point<T> {
    z.axpy(-eta, &twist(shape, g))
}

/// `(J + ηH)⁻¹ G`.
fn mollified_solve<T: Scalar, P: MinimaxProblem<T> + ?Sized>(
    problem: &P,
    z: &Point<T>,
    g: &Vector<T>,
    eta: T,
) -> Result<Vector<T>, SolverError> {
    let h = problem
        .hessian(z)
        .ok_or_else(|| SolverError::MissingHessian(problem.name().to_string()))??;
    let m = twist_matrix::<T>(problem.shape()).axpy(eta, &h);
    lu_solve(&m, g).map_err(SolverError::SingularSystem)
}

/// `z − η (J + ηH(z))⁻¹ G(z)`.
pub fn implicit_step<T: Scalar, P: MinimaxProblem<T> + ?Sized>(
    problem: &P,
    z: &Point<T>,
    eta: T,
) -> Result<Point<T>, SolverError> {
    problem.shape().check_len(z.len())?;
    let g = problem.gradient(z)?;
    let d = mollified_solve(problem, z, &g, eta)?;
    Ok(z.axpy(-eta, &d))
}

/// The three Lagrangian values bracketing a step and whether they are ordered.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CheckOutcome<T> {
    pub l_lower: T,
    pub l_mid: T,
    pub l_upper: T,
    pub ok: bool,
}

/// Tests `L(x⁺, y) ≤ L(x⁺, y⁺) ≤ L(x, y⁺)` up to `1e-12 (1 + |L(x⁺, y⁺)|)`.
pub fn acceptance_check<T: Scalar, P: MinimaxProblem<T> + ?Sized>(
    problem: &P,
    z: &Point<T>,
    z_next: &Point<T>,
) -> Result<CheckOutcome<T>, SolverError> {
    let shape = problem.shape();
    shape.check_len(z.len())?;
    shape.check_len(z_next.len())?;
    let n_x = shape.n_x();
    let mut lower = z_next.clone();
    lower.as_mut_slice()[n_x..].copy_from_slice(&z.as_slice()[n_x..]);
    let mut upper = z.clone();
    upper.as_mut_slice()[n_x..].copy_from_slice(&z_next.as_slice()[n_x..]);

    let l_lower = problem.value(&lower)?;
    let l_mid = problem.value(z_next)?;
    let l_upper = problem.value(&upper)?;
    let tol = floor_tol::<T>(1e-12, 16.0) * (T::one() + l_mid.abs());
    let ok = l_lower <= l_mid + tol && l_mid <= l_upper + tol;
    Ok(CheckOutcome {
        l_lower,
        l_mid,
        l_upper,
        ok,
    })
}

/// Gradient at `z⁺` predicted by the linearization: `J (J + ηH)⁻¹ G`.
pub fn predicted_gradient<T: Scalar, P: MinimaxProblem<T> + ?Sized>(
    problem: &P,
    z: &Point<T>,
    eta: T,
) -> Result<Vector<T>, SolverError> {
    problem.shape().check_len(z.len())?;
    let g = problem.gradient(z)?;
    let d = mollified_solve(problem, z, &g, eta)?;
    Ok(twist(problem.shape(), &d))
}

/// `Gᵗ H J G = ∇ₓLᵗ Lₓₓ ∇ₓL − ∇ᵧLᵗ Lᵧᵧ ∇ᵧL`. Positive values guarantee a
/// decrease of `‖G‖` under the linearized implicit step.
pub fn ghg_indicator<T: Scalar, P: MinimaxProblem<T> + ?Sized>(
    problem: &P,
    z: &Point<T>,
) -> Result<T, SolverError> {
    problem.shape().check_len(z.len())?;
    let g = problem.gradient(z)?;
    let h = problem
        .hessian(z)
        .ok_or_else(|| SolverError::MissingHessian(problem.name().to_string()))??;
    let jg = twist(problem.shape(), &g);
    Ok(g.dot(&h.matvec(&jg)))
}

/// Iterate and surrogate carried between controller steps.
#[derive(Debug, Clone)]
pub struct ControllerState<T> {
    pub z: Point<T>,
    pub mu: T,
    pub step: usize,
    /// Present when the method is quasi-Newton.
    pub qn: Option<QNState<T>>,
}

impl<T: Scalar> ControllerState<T> {
    pub fn new<P: MinimaxProblem<T> + ?Sized>(
        problem: &P,
        z: Point<T>,
        config: &SolverConfig<T>,
    ) -> Self {
        let qn = (config.method == Method::QuasiNewton)
            .then(|| qn_init_with(problem.shape(), config.qn_scheme));
        Self {
            z,
            mu: config.mu0,
            step: 0,
            qn,
        }
    }
}

#[derive(Debug, Clone)]
pub enum ControllerOutcome<T> {
    Accepted {
        state: ControllerState<T>,
        record: StepRecord<T>,
    },
    /// μ fell below `mu_min` or the halving budget ran out; the state is
    /// returned unchanged.
    MuUnderflow {
        state: ControllerState<T>,
        record: StepRecord<T>,
    },
}

impl<T> ControllerOutcome<T> {
    pub fn record(&self) -> &StepRecord<T> {
        match self {
            ControllerOutcome::Accepted { record, .. }
            | ControllerOutcome::MuUnderflow { record, .. } => record,
        }
    }
}

fn propose<T: Scalar, P: MinimaxProblem<T> + ?Sized>(
    problem: &P,
    method: Method,
    qn: Option<&mut QNState<T>>,
    z: &Point<T>,
    g: &Vector<T>,
    eta: T,
) -> Result<Point<T>, SolverError> {
    match method {
        Method::Explicit => Ok(explicit_from_gradient(problem.shape(), z, g, eta)),
        Method::Implicit => {
            let d = mollified_solve(problem, z, g, eta)?;
            Ok(z.axpy(-eta, &d))
        }
        Method::QuasiNewton => {
            let qn = qn.expect("quasi-Newton state present");
            qn.propose(z, g, eta).map_err(SolverError::SingularSystem)
        }
    }
}

fn is_recoverable(err: &SolverError) -> bool {
    matches!(
        err,
        SolverError::SingularSystem(_) | SolverError::Problem(ProblemError::DomainViolation { .. })
    )
}

/// One outer step of the learning-rate controller, starting from a gradient
/// already evaluated at `state.z`.
fn controller_step_with_gradient<T: Scalar, P: MinimaxProblem<T> + ?Sized>(
    problem: &P,
    mut state: ControllerState<T>,
    g: &Vector<T>,
    config: &SolverConfig<T>,
) -> Result<ControllerOutcome<T>, SolverError> {
    let grad_norm = g.norm();
    if let Some(qn) = state.qn.as_mut() {
        qn.absorb(&state.z, g, config.qn_refine_every);
    }

    let mut mu = (config.alpha * state.mu).min(config.mu_max);
    let mut halvings = 0;
    let nan = T::nan();
    let mut record = StepRecord {
        step: state.step,
        mu,
        eta: nan,
        grad_norm,
        l_lower: nan,
        l_mid: nan,
        l_upper: nan,
        halvings: 0,
        accepted: false,
    };

    loop {
        let eta = config.fixed_eta.unwrap_or(mu / grad_norm);
        record.mu = mu;
        record.eta = eta;
        record.halvings = halvings;
        let trial =
            propose(problem, config.method, state.qn.as_mut(), &state.z, g, eta).and_then(|zn| {
                if !zn.is_finite() {
                    // overflowed trial: report it as a rejection
                    return Ok((zn, None));
                }
                acceptance_check(problem, &state.z, &zn).map(|c| (zn, Some(c)))
            });
        match trial {
            Ok((zn, check)) => {
                if let Some(c) = check {
                    record.l_lower = c.l_lower;
                    record.l_mid = c.l_mid;
                    record.l_upper = c.l_upper;
                }
                let ok = check.is_some_and(|c| c.ok);
                if ok || (config.fixed_eta.is_some() && zn.is_finite()) {
                    record.accepted = ok;
                    if let Some(qn) = state.qn.as_mut() {
                        qn.commit(&state.z, g, eta);
                        if halvings > config.max_halvings / 2 {
                            qn.reset_b();
                        }
                    }
                    state.z = zn;
                    if config.fixed_eta.is_none() {
                        state.mu = mu;
                    }
                    state.step += 1;
                    return Ok(ControllerOutcome::Accepted { state, record });
                }
            }
            Err(e) if is_recoverable(&e) => {}
            Err(e) => return Err(e),
        }
        if config.fixed_eta.is_some() {
            // nothing to shrink
            return Ok(ControllerOutcome::MuUnderflow { state, record });
        }
        mu = mu / (T::one() + T::one());
        halvings += 1;
        if halvings > config.max_halvings || mu < config.mu_min {
            record.halvings = halvings;
            record.mu = mu;
            if let Some(qn) = state.qn.as_mut() {
                qn.reset_b();
            }
            return Ok(ControllerOutcome::MuUnderflow { state, record });
        }
    }
}

/// One outer step: propose `μ' = min(α μ, μ_max)`, take the step with
/// `η = μ' / ‖G‖` and halve μ' until the acceptance check passes.
pub fn controller_step<T: Scalar, P: MinimaxProblem<T> + ?Sized>(
    problem: &P,
    state: ControllerState<T>,
    config: &SolverConfig<T>,
) -> Result<ControllerOutcome<T>, SolverError> {
    problem.shape().check_len(state.z.len())?;
    let g = problem.gradient(&state.z)?;
    controller_step_with_gradient(problem, state, &g, config)
}

/// Runs the controller from `z0` until convergence, divergence, μ underflow
/// or the step limit.
pub fn solve<T: Scalar, P: MinimaxProblem<T> + ?Sized>(
    problem: &P,
    z0: &Point<T>,
    config: &SolverConfig<T>,
) -> Result<SolveResult<T>, SolverError> {
    solve_with_hook(problem, z0, config, Ok)
}

/// Like [`solve`], with a correction applied to every accepted iterate.
///
/// The hook receives the freshly accepted point and returns the point to
/// continue from.
pub fn solve_with_hook<T, P, F>(
    problem: &P,
    z0: &Point<T>,
    config: &SolverConfig<T>,
    mut hook: F,
) -> Result<SolveResult<T>, SolverError>
where
    T: Scalar,
    P: MinimaxProblem<T> + ?Sized,
    F: FnMut(Point<T>) -> Result<Point<T>, SolverError>,
{
    solve_with_restarts(problem, z0, config, |z| Ok((hook(z)?, false)))
}

/// Like [`solve_with_hook`]; a hook returning `true` also sends μ back to
/// `mu0`.
pub(crate) fn solve_with_restarts<T, P, F>(
    problem: &P,
    z0: &Point<T>,
    config: &SolverConfig<T>,
    mut hook: F,
) -> Result<SolveResult<T>, SolverError>
where
    T: Scalar,
    P: MinimaxProblem<T> + ?Sized,
    F: FnMut(Point<T>) -> Result<(Point<T>, bool), SolverError>,
{
    config.validate()?;
    problem.shape().check_len(z0.len())?;
    if config.method == Method::Implicit && !problem.has_hessian() {
        return Err(SolverError::MissingHessian(problem.name().to_string()));
    }
    let counted = Counted::new(problem);
    let mut state = ControllerState::new(&counted, z0.clone(), config);
    let mut trace = Vec::new();

    let status = loop {
        if !state.z.is_finite() || state.z.norm() > config.divergence_norm {
            break Status::Diverged;
        }
        let g = counted.gradient(&state.z)?;
        let gn = g.norm();
        if !gn.is_finite() {
            break Status::Diverged;
        }
        if gn <= config.grad_tol {
            break Status::Converged;
        }
        if trace.len() >= config.max_steps {
            break Status::MaxSteps;
        }
        match controller_step_with_gradient(&counted, state, &g, config)? {
            ControllerOutcome::Accepted {
                state: next,
                record,
            } => {
                trace.push(record);
                state = next;
                let z = std::mem::replace(&mut state.z, Vector::zeros(0));
                let (z, restart) = hook(z)?;
                state.z = z;
                if restart {
                    state.mu = config.mu0;
                }
            }
            ControllerOutcome::MuUnderflow {
                state: same,
                record,
            } => {
                trace.push(record);
                state = same;
                break Status::MuUnderflow;
            }
        }
    };

    let (final_grad_norm, final_value) = if state.z.is_finite() {
        (
            counted
                .gradient(&state.z)
                .map(|g| g.norm())
                .unwrap_or(T::nan()),
            counted.value(&state.z).unwrap_or(T::nan()),
        )
    } else {
        (T::nan(), T::nan())
    };
    Ok(SolveResult {
        z_final: state.z,
        status,
        trace,
        counters: counted.counters(),
        final_grad_norm,
        final_value,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::problems::{make_bilinear_xy, make_quad_bowl, make_quad_saddle};
    use approx::assert_abs_diff_eq;

    fn v(a: f64, b: f64) -> Vector<f64> {
        Vector::from([a, b])
    }

    #[test]
    fn explicit_bilinear_example() {
        let z = explicit_step(&make_bilinear_xy(), &v(1.0, 0.0), 0.1).unwrap();
        assert_abs_diff_eq!(z[0], 1.0, epsilon = 1e-15);
        assert_abs_diff_eq!(z[1], 0.1, epsilon = 1e-15);
    }

    #[test]
    fn implicit_closed_form_examples() {
        let z = implicit_step(&make_bilinear_xy(), &v(1.0, 0.0), 1.0).unwrap();
        assert_abs_diff_eq!(z[0], 0.5, epsilon = 1e-15);
        assert_abs_diff_eq!(z[1], 0.5, epsilon = 1e-15);
        let z = implicit_step(&make_quad_saddle(), &v(2.0, 2.0), 1.0).unwrap();
        assert_abs_diff_eq!(z[0], 1.0, epsilon = 1e-15);
        assert_abs_diff_eq!(z[1], 1.0, epsilon = 1e-15);
        let z = implicit_step(&make_quad_bowl(), &v(1.0, 1.0), 3.0).unwrap();
        assert_abs_diff_eq!(z[0], 0.25, epsilon = 1e-15);
        assert_abs_diff_eq!(z[1], -0.5, epsilon = 1e-15);
    }

    #[test]
    fn implicit_step_reports_singular_system() {
        // quad_bowl: J + ηH = diag(1 + η, η − 1) is singular at η = 1
        let err = implicit_step(&make_quad_bowl(), &v(1.0, 1.0), 1.0).unwrap_err();
        assert!(matches!(err, SolverError::SingularSystem(_)));
    }

    #[test]
    fn acceptance_check_examples() {
        let c = acceptance_check(&make_quad_bowl(), &v(1.0, 1.0), &v(0.25, -0.5)).unwrap();
        assert!(!c.ok);
        assert_abs_diff_eq!(c.l_lower, 0.53125, epsilon = 1e-15);
        assert_abs_diff_eq!(c.l_mid, 0.15625, epsilon = 1e-15);

        let s = crate::minimax::TwistShape::new(1, 1).unwrap();
        let flat = crate::minimax::FnProblem::new(
            "flat",
            s,
            |_: &Vector<f64>| 2.0,
            |_: &Vector<f64>| Vector::zeros(2),
        );
        let c = acceptance_check(&flat, &v(0.0, 0.0), &v(3.0, -7.0)).unwrap();
        assert!(c.ok);
        assert_eq!((c.l_lower, c.l_mid, c.l_upper), (2.0, 2.0, 2.0));

        let p = make_quad_saddle();
        for &eta in &[1e-3, 0.5, 1.0, 7.0, 1e6] {
            let z = v(0.3, -1.7);
            let zn = implicit_step(&p, &z, eta).unwrap();
            assert!(acceptance_check(&p, &z, &zn).unwrap().ok, "eta {eta}");
        }
    }

    #[test]
    fn controller_growth_and_cap() {
        let p = make_quad_saddle();
        let cfg = SolverConfig::<f64>::default();
        let mut st = ControllerState::new(&p, v(1.0, 1.0), &cfg);
        st.mu = 2.0;
        match controller_step(&p, st, &cfg).unwrap() {
            ControllerOutcome::Accepted { state, record } => {
                assert_abs_diff_eq!(state.mu, 10.2, epsilon = 1e-12);
                assert_eq!(record.halvings, 0);
                assert!(record.accepted);
            }
            other => panic!("unexpected {other:?}"),
        }
        let mut st = ControllerState::new(&p, v(1.0, 1.0), &cfg);
        st.mu = 1e7;
        let out = controller_step(&p, st, &cfg).unwrap();
        assert_eq!(out.record().mu, 1e7);
    }

    #[test]
    fn controller_halves_on_quad_bowl() {
        let p = make_quad_bowl();
        let cfg = SolverConfig {
            alpha: 2.0,
            ..SolverConfig::default()
        };
        let mut st = ControllerState::new(&p, v(0.0, 1.0), &cfg);
        st.mu = 4.0; // proposal 8
        match controller_step(&p, st, &cfg).unwrap() {
            ControllerOutcome::Accepted { state, record } => {
                assert_eq!(record.halvings, 2);
                assert_eq!(record.eta, 2.0);
                assert_eq!(record.l_mid - record.l_lower, 0.0);
                assert_eq!(state.z[1], -1.0);
                assert_eq!(state.mu, 2.0);
            }
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn config_validation() {
        let mut c = SolverConfig::<f64>::default();
        assert!(c.validate().is_ok());
        c.alpha = 1.0;
        assert!(c.validate().is_err());
        let c = SolverConfig::<f64> {
            mu_min: 2.0,
            ..SolverConfig::default()
        };
        assert!(c.validate().is_err());
        let c = SolverConfig::<f64> {
            fixed_eta: Some(-1.0),
            ..SolverConfig::default()
        };
        assert!(c.validate().is_err());
    }

    #[test]
    fn implicit_requires_hessian() {
        let s = crate::minimax::TwistShape::new(1, 1).unwrap();
        let p = crate::minimax::FnProblem::new(
            "nohess",
            s,
            |z: &Vector<f64>| z[0] * z[1],
            |z: &Vector<f64>| Vector::from([z[1], z[0]]),
        );
        let err = solve(&p, &v(1.0, 1.0), &SolverConfig::default()).unwrap_err();
        assert!(matches!(err, SolverError::MissingHessian(_)));
    }

    #[test]
    fn ghg_examples() {
        let z = v(0.7, -1.3);
        assert_abs_diff_eq!(
            ghg_indicator(&make_quad_saddle(), &z).unwrap(),
            0.49 + 1.69,
            epsilon = 1e-14
        );
        assert_abs_diff_eq!(
            ghg_indicator(&make_bilinear_xy(), &z).unwrap(),
            0.0,
            epsilon = 1e-15
        );
        assert_abs_diff_eq!(
            ghg_indicator(&make_quad_bowl(), &z).unwrap(),
            0.49 - 1.69,
            epsilon = 1e-14
        );
    }

    #[test]
    fn predicted_gradient_bilinear() {
        let p = make_bilinear_xy();
        let pred = predicted_gradient(&p, &v(1.0, 0.0), 1.0).unwrap();
        assert_abs_diff_eq!(pred[0], 0.5, epsilon = 1e-15);
        assert_abs_diff_eq!(pred[1], 0.5, epsilon = 1e-15);
        let actual = p.gradient(&v(0.5, 0.5)).unwrap();
        assert_eq!(pred, actual);
    }
}
