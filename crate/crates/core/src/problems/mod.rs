//! Built-in problems.

mod lp;
mod ot;
mod prototypes;
mod zero_sum;

pub use lp::{
    lp_detach_config, lp_kkt_residual, make_lp, make_lp_lagrangian, solve_lp, LpInstance,
    LpLagrangian, LpSolution, LpSquared,
};
pub use ot::{
    circle_samples, gaussian_samples, make_ot_local, ot_outer_loop, BumpLayout, ComposedMap,
    OtLocalProblem, OtLoopConfig, OtLoopResult, OtStage,
};
pub use prototypes::{
    make_bilinear_xy, make_gauss_bump_saddle, make_quad_bowl, make_quad_saddle, BilinearXY,
    GaussBumpSaddle, QuadBowl, QuadSaddle,
};
pub use zero_sum::{make_zero_sum, ZeroSumLagrangian, ZeroSumSolution};
