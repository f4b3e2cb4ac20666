//! Two-player zero-sum matrix games as constrained minimax problems.
//!
//! Variables are ordered `(x, μ, y, λ)`: the minimizing block holds the
//! column player's mixed strategy `x` and the multiplier `μ` of `Σy = 1`,
//! the maximizing block holds the row player's strategy `y` and the
//! multiplier `λ` of `Σx = 1`.

use crate::constraints::{wrap_squared, ConstraintMask, SquaredTransform};
use crate::linalg::{Matrix, Vector};
use crate::minimax::{MinimaxProblem, Point, ProblemError, TwistShape};
use crate::scalar::Scalar;

/// `L = yᵗAx − λ(Σx − 1) − μ(Σy − 1)` in original coordinates.
#[derive(Debug, Clone)]
pub struct ZeroSumLagrangian<T> {
    payoff: Matrix<T>,
}

/// Strategies and multipliers read back from a point of [`make_zero_sum`].
#[derive(Debug, Clone, PartialEq)]
pub struct ZeroSumSolution<T> {
    pub x: Vector<T>,
    pub y: Vector<T>,
    pub lambda: T,
    pub mu: T,
}

impl<T: Scalar> ZeroSumLagrangian<T> {
    /// `payoff` is `m × n`: rows index the maximizer's pure strategies.
    pub fn new(payoff: Matrix<T>) -> Result<Self, ProblemError> {
        if payoff.rows() == 0 || payoff.cols() == 0 {
            return Err(ProblemError::Invalid("empty payoff matrix".into()));
        }
        if !payoff.is_finite() {
            return Err(ProblemError::Invalid(
                "payoff has non-finite entries".into(),
            ));
        }
        Ok(Self { payoff })
    }

    pub fn payoff(&self) -> &Matrix<T> {
        &self.payoff
    }

    fn n(&self) -> usize {
        self.payoff.cols()
    }

    fn m(&self) -> usize {
        self.payoff.rows()
    }

    /// Indices of `x` and `y` within the variable vector.
    pub fn strategy_mask(&self) -> ConstraintMask {
        let (n, m) = (self.n(), self.m());
        ConstraintMask::new((0..n).chain(n + 1..n + 1 + m), n + m + 2).expect("indices in range")
    }

    /// Splits original coordinates into `(x, μ, y, λ)`.
    fn unpack(&self, z: &Point<T>) -> (Vector<T>, T, Vector<T>, T) {
        let (n, m) = (self.n(), self.m());
        (z.segment(0, n), z[n], z.segment(n + 1, m), z[n + m + 1])
    }

    /// Reads strategies and multipliers from squared coordinates.
    pub fn recover(&self, z: &Point<T>) -> ZeroSumSolution<T> {
        let (x, mu, y, lambda) = self.unpack(z);
        ZeroSumSolution {
            x: x.hadamard(&x),
            y: y.hadamard(&y),
            lambda,
            mu,
        }
    }

    /// Squared-coordinate point whose strategies are uniform and multipliers zero.
    pub fn uniform_start(&self) -> Point<T> {
        let (n, m) = (self.n(), self.m());
        let xs = T::lit((1.0 / n as f64).sqrt());
        let ys = T::lit((1.0 / m as f64).sqrt());
        Vector::from_fn(n + m + 2, |i| match i {
            i if i < n => xs,
            i if i == n || i == n + m + 1 => T::zero(),
            _ => ys,
        })
    }
}

impl<T: Scalar> MinimaxProblem<T> for ZeroSumLagrangian<T> {
    fn shape(&self) -> TwistShape {
        TwistShape::new(self.n() + 1, self.m() + 1).expect("non-empty game")
    }

    fn name(&self) -> &str {
        "zero_sum"
    }

    fn value(&self, z: &Point<T>) -> Result<T, ProblemError> {
        self.shape().check_len(z.len())?;
        let (x, mu, y, lambda) = self.unpack(z);
        let one = T::one();
        let sx: T = x.iter().copied().sum();
        let sy: T = y.iter().copied().sum();
        Ok(y.dot(&self.payoff.matvec(&x)) - lambda * (sx - one) - mu * (sy - one))
    }

    fn gradient(&self, z: &Point<T>) -> Result<Vector<T>, ProblemError> {
        self.shape().check_len(z.len())?;
        let (x, mu, y, lambda) = self.unpack(z);
        let one = T::one();
        let ax = self.payoff.matvec(&x);
        let aty = self.payoff.matvec_t(&y);
        let sx: T = x.iter().copied().sum();
        let sy: T = y.iter().copied().sum();
        let mut g = Vec::with_capacity(z.len());
        g.extend(aty.iter().map(|&v| v - lambda));
        g.push(one - sy);
        g.extend(ax.iter().map(|&v| v - mu));
        g.push(one - sx);
        Ok(Vector::from_raw(g))
    }

    fn hessian(&self, z: &Point<T>) -> Option<Result<Matrix<T>, ProblemError>> {
        if let Err(e) = self.shape().check_len(z.len()) {
            return Some(Err(e));
        }
        let (n, m) = (self.n(), self.m());
        let (mu_i, lam_i) = (n, n + m + 1);
        let mut h = Matrix::zeros(z.len(), z.len());
        for i in 0..n {
            for j in 0..m {
                h[(i, n + 1 + j)] = self.payoff[(j, i)];
                h[(n + 1 + j, i)] = self.payoff[(j, i)];
            }
            h[(i, lam_i)] = -T::one();
            h[(lam_i, i)] = -T::one();
        }
        for j in 0..m {
            h[(n + 1 + j, mu_i)] = -T::one();
            h[(mu_i, n + 1 + j)] = -T::one();
        }
        Some(Ok(h))
    }

    fn has_hessian(&self) -> bool {
        true
    }
}

/// The game in squared strategy variables; multipliers stay free.
pub fn make_zero_sum<T: Scalar>(
    payoff: Matrix<T>,
) -> Result<SquaredTransform<ZeroSumLagrangian<T>>, ProblemError> {
    let base = ZeroSumLagrangian::new(payoff)?;
    let mask = base.strategy_mask();
    wrap_squared(base, mask)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::minimax::gradient_check;

    #[test]
    fn layout_and_shape() {
        let game =
            make_zero_sum(Matrix::from_rows(&[&[0.0, 1.0], &[1.0, 0.0], &[2.0, 2.0]])).unwrap();
        assert_eq!((game.shape().n_x(), game.shape().n_y()), (3, 4));
        assert_eq!(game.mask().indices(), &[0, 1, 3, 4, 5]);
    }

    #[test]
    fn equilibrium_of_symmetric_game_is_stationary() {
        let game = make_zero_sum(Matrix::from_rows(&[&[0.0, 1.0], &[1.0, 0.0]])).unwrap();
        let s = 0.5f64.sqrt();
        let z = Vector::from([s, s, 0.5, s, s, 0.5]);
        assert!(game.gradient(&z).unwrap().norm() < 1e-15);
        assert!((game.value(&z).unwrap() - 0.5).abs() < 1e-15);
    }

    #[test]
    fn gradient_and_hessian_match_differences() {
        let game =
            make_zero_sum(Matrix::from_rows(&[&[0.3, -1.0, 2.0], &[1.5, 0.2, -0.7]])).unwrap();
        let z = Vector::from([0.4, -0.3, 0.8, 0.1, 0.9, 0.5, -0.2]);
        assert!(gradient_check(&game, &z, 1e-6).unwrap() < 1e-7);
        assert!(gradient_check(game.base(), &z, 1e-6).unwrap() < 1e-7);
    }

    #[test]
    fn rejects_bad_payoffs() {
        assert!(make_zero_sum(Matrix::<f64>::zeros(0, 2)).is_err());
        assert!(make_zero_sum(Matrix::from_fn(1, 1, |_, _| f64::NAN)).is_err());
    }
}
