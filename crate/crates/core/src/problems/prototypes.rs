//! Closed-form two-variable test problems.

use std::marker::PhantomData;

use crate::linalg::{Matrix, Vector};
use crate::minimax::{MinimaxProblem, Point, ProblemError, TwistShape};
use crate::scalar::Scalar;

macro_rules! scalar_problem {
    ($(#[$doc:meta])* $ty:ident, $label:literal) => {
        $(#[$doc])*
        #[derive(Debug, Clone, Copy, Default)]
        pub struct $ty<T>(PhantomData<T>);

        impl<T: Scalar> MinimaxProblem<T> for $ty<T> {
            fn shape(&self) -> TwistShape {
                TwistShape::new(1, 1).expect("non-empty shape")
            }
            fn name(&self) -> &str {
                $label
            }
            fn value(&self, z: &Point<T>) -> Result<T, ProblemError> {
                self.shape().check_len(z.len())?;
                Ok(Self::l(z[0], z[1]))
            }
            fn gradient(&self, z: &Point<T>) -> Result<Vector<T>, ProblemError> {
                self.shape().check_len(z.len())?;
                let (gx, gy) = Self::g(z[0], z[1]);
                Ok(Vector::from_raw(vec![gx, gy]))
            }
            fn hessian(&self, z: &Point<T>) -> Option<Result<Matrix<T>, ProblemError>> {
                Some(self.shape().check_len(z.len()).map(|_| {
                    let [a, b, c] = Self::h(z[0], z[1]);
                    Matrix::from_raw(2, 2, vec![a, b, b, c])
                }))
            }
            fn has_hessian(&self) -> bool {
                true
            }
        }
    };
}

scalar_problem!(
    /// `L = xy`: saddle at the origin, not convex-concave.
    BilinearXY,
    "bilinear_xy"
);
scalar_problem!(
    /// `L = (x² − y²)/2`.
    QuadSaddle,
    "quad_saddle"
);
scalar_problem!(
    /// `L = (x² + y²)/2`: stationary at the origin but no minimax point.
    QuadBowl,
    "quad_bowl"
);
scalar_problem!(
    /// `L = (x − ½)(y − ½) + ⅓ exp(−(x − ½)² − (y − ¾)²)`. The bump pulls
    /// the saddle of the bilinear part to about `(0.2960, 0.3858)`, its only
    /// stationary point.
    GaussBumpSaddle,
    "gauss_bump_saddle"
);

impl<T: Scalar> BilinearXY<T> {
    fn l(x: T, y: T) -> T {
        x * y
    }
    fn g(x: T, y: T) -> (T, T) {
        (y, x)
    }
    fn h(_: T, _: T) -> [T; 3] {
        [T::zero(), T::one(), T::zero()]
    }
}

impl<T: Scalar> QuadSaddle<T> {
    fn l(x: T, y: T) -> T {
        (x * x - y * y) / T::lit(2.0)
    }
    fn g(x: T, y: T) -> (T, T) {
        (x, -y)
    }
    fn h(_: T, _: T) -> [T; 3] {
        [T::one(), T::zero(), -T::one()]
    }
}

impl<T: Scalar> QuadBowl<T> {
    fn l(x: T, y: T) -> T {
        (x * x + y * y) / T::lit(2.0)
    }
    fn g(x: T, y: T) -> (T, T) {
        (x, y)
    }
    fn h(_: T, _: T) -> [T; 3] {
        [T::one(), T::zero(), T::one()]
    }
}

impl<T: Scalar> GaussBumpSaddle<T> {
    fn parts(x: T, y: T) -> (T, T, T) {
        let a = x - T::lit(0.5);
        let c = y - T::lit(0.75);
        let bump = (-(a * a) - c * c).exp() / T::lit(3.0);
        (a, c, bump)
    }
    fn l(x: T, y: T) -> T {
        let (a, _, bump) = Self::parts(x, y);
        a * (y - T::lit(0.5)) + bump
    }
    fn g(x: T, y: T) -> (T, T) {
        let (a, c, bump) = Self::parts(x, y);
        let two = T::lit(2.0);
        (y - T::lit(0.5) - two * a * bump, a - two * c * bump)
    }
    fn h(x: T, y: T) -> [T; 3] {
        let (a, c, bump) = Self::parts(x, y);
        let (two, four) = (T::lit(2.0), T::lit(4.0));
        [
            bump * (four * a * a - two),
            T::one() + four * a * c * bump,
            bump * (four * c * c - two),
        ]
    }
}

pub fn make_bilinear_xy<T: Scalar>() -> BilinearXY<T> {
    BilinearXY(PhantomData)
}

pub fn make_quad_saddle<T: Scalar>() -> QuadSaddle<T> {
    QuadSaddle(PhantomData)
}

pub fn make_quad_bowl<T: Scalar>() -> QuadBowl<T> {
    QuadBowl(PhantomData)
}

pub fn make_gauss_bump_saddle<T: Scalar>() -> GaussBumpSaddle<T> {
    GaussBumpSaddle(PhantomData)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::minimax::gradient_check;
    use approx::assert_abs_diff_eq;

    #[test]
    fn bilinear_derivatives() {
        let p = make_bilinear_xy::<f64>();
        let z = Vector::from([1.0, 2.0]);
        assert_eq!(p.gradient(&z).unwrap().as_slice(), &[2.0, 1.0]);
        assert_eq!(
            p.hessian(&z).unwrap().unwrap().as_slice(),
            &[0.0, 1.0, 1.0, 0.0]
        );
        assert!(gradient_check(&p, &z, 1e-5).unwrap() < 1e-7);
    }

    #[test]
    fn quad_saddle_hessian_is_twist() {
        let p = make_quad_saddle::<f64>();
        let h = p.hessian(&Vector::from([0.3, 9.0])).unwrap().unwrap();
        assert_eq!(h, crate::minimax::twist_matrix(p.shape()));
    }

    #[test]
    fn quad_bowl_origin_is_stationary() {
        let p = make_quad_bowl::<f64>();
        assert_eq!(p.gradient(&Vector::zeros(2)).unwrap().norm(), 0.0);
    }

    #[test]
    fn gauss_bump_value_at_center() {
        let p = make_gauss_bump_saddle::<f64>();
        let v = p.value(&Vector::from([0.5, 0.5])).unwrap();
        assert_abs_diff_eq!(v, (-0.0625f64).exp() / 3.0, epsilon = 1e-15);
        assert_abs_diff_eq!(v, 0.31314, epsilon = 1e-5);
    }

    fn newton_stationary_point(mut z: Vector<f64>) -> Vector<f64> {
        let p = make_gauss_bump_saddle::<f64>();
        for _ in 0..50 {
            let g = p.gradient(&z).unwrap();
            let h = p.hessian(&z).unwrap().unwrap();
            z = z.sub(&crate::linalg::lu_solve(&h, &g).unwrap());
        }
        z
    }

    #[test]
    fn gauss_bump_stationary_point() {
        // multi-start root finding of the gradient gives (0.29601, 0.385758)
        for start in [[0.5, 0.5], [0.25, 0.25], [0.3, 0.4]] {
            let z = newton_stationary_point(Vector::from(start));
            assert_abs_diff_eq!(z[0], 0.29601, epsilon = 1e-5);
            assert_abs_diff_eq!(z[1], 0.385758, epsilon = 1e-5);
        }
    }

    #[test]
    #[ignore = "the only stationary point is about (0.2960, 0.3858), 0.234 from (0.5, 0.5)"]
    fn gauss_bump_zero_near_center() {
        let z = newton_stationary_point(Vector::from([0.5, 0.5]));
        let d = ((z[0] - 0.5).powi(2) + (z[1] - 0.5).powi(2)).sqrt();
        assert!(d < 0.1, "nearest gradient zero at {z:?}, distance {d}");
    }

    #[test]
    fn single_precision_evaluation() {
        let p = make_gauss_bump_saddle::<f32>();
        let g = p.gradient(&Vector::from([0.25f32, 0.25])).unwrap();
        let g64 = make_gauss_bump_saddle::<f64>()
            .gradient(&Vector::from([0.25, 0.25]))
            .unwrap();
        assert!((g[0] as f64 - g64[0]).abs() < 1e-6);
        assert!((g[1] as f64 - g64[1]).abs() < 1e-6);
    }
}
