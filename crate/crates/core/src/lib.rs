//! Saddle-point solvers for `min_x max_y L(x, y)`.
//!
//! The main entry point is [`solve`], which runs implicit twisted gradient
//! descent (or an explicit or quasi-Newton variant) under an adaptive
//! learning-rate controller. Problems implement [`MinimaxProblem`];
//! nonnegativity constraints are handled by [`wrap_squared`] or
//! [`wrap_barrier`].
//!
//! ```
//! use saddle_core::{make_quad_saddle, solve, SolverConfig, Status, Vector};
//!
//! let result = solve(&make_quad_saddle::<f64>(), &Vector::from([1.0, -2.0]), &SolverConfig::default()).unwrap();
//! assert_eq!(result.status, Status::Converged);
//! ```

// `!(a > b)` is used on purpose so NaN fails validation
#![allow(clippy::neg_cmp_op_on_partial_ord, clippy::needless_range_loop)]

pub mod constraints;
pub mod linalg;
pub mod minimax;
pub mod problems;
pub mod quasi_newton;
mod scalar;
pub mod solver;

pub use constraints::{
    barrier_continuation, detachment_correction, geometric_schedule, recover_original,
    solve_squared, wrap_barrier, wrap_squared, BarrierProblem, ConstraintMask, DetachConfig,
    SquaredTransform,
};
pub use linalg::{lu_solve, power_norm_estimate, LinalgError, LuFactors, Matrix, Vector};
pub use minimax::{
    gradient_check, twist_apply, twist_matrix, Counted, EvalCounters, FnProblem, MinimaxProblem,
    Point, ProblemError, TwistShape,
};
pub use problems::*;
pub use quasi_newton::{
    consistency_descent_step, consistency_objective, hessian_update_rank1,
    hinv_consistency_objective, hinv_consistency_step, hinv_update_rank1, qn_init, qn_init_with,
    qn_step, qn_update_rank1, ConsistencyGradient, InverseGradient, PairStep, QNState, QnError,
    SecantScheme,
};
pub use scalar::Scalar;
pub use solver::{
    acceptance_check, controller_step, explicit_step, ghg_indicator, implicit_step,
    predicted_gradient, solve, solve_with_hook, CheckOutcome, ControllerOutcome, ControllerState,
    Method, SolveResult, SolverConfig, SolverError, Status, StepRecord,
};

pub type VectorF64 = Vector<f64>;
pub type MatrixF64 = Matrix<f64>;
pub type SolverConfigF64 = SolverConfig<f64>;
pub type SolveResultF64 = SolveResult<f64>;
pub type VectorF32 = Vector<f32>;
pub type MatrixF32 = Matrix<f32>;
pub type SolverConfigF32 = SolverConfig<f32>;
pub type SolveResultF32 = SolveResult<f32>;
