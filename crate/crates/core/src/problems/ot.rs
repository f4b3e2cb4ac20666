//! Local optimal-transport games between a transport map and a lens.
//!
//! Both players are expansions in one set of Gaussian bumps
//! `ψ_k(p) = exp(−‖p − c_k‖² / 2σ²)`. The map is the gradient of the
//! potential `½‖x‖² + Σ α_k ψ_k`, i.e. `u_α(x) = x + Σ α_k ∇ψ_k(x)`, and the
//! lens is `g_β = Σ β_k ψ_k`. The game value is
//!
//! ```text
//! L(α, β) = Σ_i w^x_i g_β(u_α(x_i)) − Σ_j w^y_j exp(g_β(y_j))
//! ```
//!
//! whose maximum over `g` is `KL(u_α# p ‖ q) − 1`.

use rand::SeedableRng;
use rand_distr::{Distribution, Normal, Uniform};
use rand_pcg::Pcg32;

use crate::linalg::{Matrix, Vector};
use crate::minimax::{MinimaxProblem, Point, ProblemError, TwistShape};
use crate::scalar::Scalar;
use crate::solver::{solve, SolverConfig, SolverError, Status};

/// Bump centers (one per row) and a shared width.
#[derive(Debug, Clone, PartialEq)]
pub struct BumpLayout<T> {
    centers: Matrix<T>,
    sigma: T,
}

impl<T: Scalar> BumpLayout<T> {
    pub fn new(centers: Matrix<T>, sigma: T) -> Result<Self, ProblemError> {
        if centers.rows() == 0 || centers.cols() == 0 {
            return Err(ProblemError::Invalid(
                "layout needs at least one bump".into(),
            ));
        }
        if !(sigma > T::zero()) || !sigma.is_finite() {
            return Err(ProblemError::Invalid(format!(
                "bump width must be positive, got {sigma}"
            )));
        }
        Ok(Self { centers, sigma })
    }

    /// `per_axis^d` centers on a regular grid spanning the bounding box of
    /// all given point sets, with `σ` half the widest grid spacing.
    pub fn grid(point_sets: &[&Matrix<T>], per_axis: usize) -> Result<Self, ProblemError> {
        let d = point_sets.first().map_or(0, |m| m.cols());
        if per_axis == 0 || d == 0 || point_sets.iter().any(|m| m.cols() != d) {
            return Err(ProblemError::Invalid(
                "grid needs points of one positive dimension".into(),
            ));
        }
        let mut lo = vec![T::infinity(); d];
        let mut hi = vec![T::neg_infinity(); d];
        for m in point_sets {
            for i in 0..m.rows() {
                for (a, &v) in m.row(i).iter().enumerate() {
                    lo[a] = lo[a].min(v);
                    hi[a] = hi[a].max(v);
                }
            }
        }
        if lo.iter().any(|v| !v.is_finite()) {
            return Err(ProblemError::Invalid(
                "grid needs at least one finite point".into(),
            ));
        }
        let gaps = per_axis.saturating_sub(1).max(1);
        let spacing: Vec<T> = lo
            .iter()
            .zip(&hi)
            .map(|(&l, &h)| (h - l) / T::lit(gaps as f64))
            .collect();
        let widest = spacing.iter().copied().fold(T::zero(), T::max);
        let sigma = if widest > T::zero() {
            widest / T::lit(2.0)
        } else {
            T::lit(0.5)
        };
        let count = per_axis.pow(d as u32);
        let centers = Matrix::from_fn(count, d, |k, a| {
            let step = (k / per_axis.pow(a as u32)) % per_axis;
            if per_axis == 1 {
                (lo[a] + hi[a]) / T::lit(2.0)
            } else {
                lo[a] + spacing[a] * T::lit(step as f64)
            }
        });
        Self::new(centers, sigma)
    }

    pub fn len(&self) -> usize {
        self.centers.rows()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn dim(&self) -> usize {
        self.centers.cols()
    }

    pub fn centers(&self) -> &Matrix<T> {
        &self.centers
    }

    pub fn sigma(&self) -> T {
        self.sigma
    }

    /// Bump values at `p` and offsets `p − c_k` (row-major, `len × dim`).
    fn eval(&self, p: &[T]) -> (Vec<T>, Vec<T>) {
        let (k_n, d) = (self.len(), self.dim());
        let two_s2 = T::lit(2.0) * self.sigma * self.sigma;
        let mut psi = Vec::with_capacity(k_n);
        let mut diff = Vec::with_capacity(k_n * d);
        for k in 0..k_n {
            let c = self.centers.row(k);
            let mut r2 = T::zero();
            for a in 0..d {
                let e = p[a] - c[a];
                diff.push(e);
                r2 = r2 + e * e;
            }
            psi.push((-r2 / two_s2).exp());
        }
        (psi, diff)
    }

    /// `x + Σ α_k ∇ψ_k(x)`.
    pub fn displace(&self, alpha: &[T], x: &[T]) -> Vec<T> {
        let d = self.dim();
        let (psi, diff) = self.eval(x);
        let inv_s2 = (self.sigma * self.sigma).recip();
        let mut p = x.to_vec();
        for (k, &a) in alpha.iter().enumerate() {
            let s = a * psi[k] * inv_s2;
            for ax in 0..d {
                p[ax] = p[ax] - s * diff[k * d + ax];
            }
        }
        p
    }
}

/// One local transport game on fixed samples.
#[derive(Debug, Clone)]
pub struct OtLocalProblem<T> {
    source: Matrix<T>,
    target: Matrix<T>,
    /// `None` means uniform weights.
    weights: Option<(Vector<T>, Vector<T>)>,
    layout: BumpLayout<T>,
    analytic_hessian: bool,
}

/// Uniform weights, analytic Hessian enabled. Samples are rows.
pub fn make_ot_local<T: Scalar>(
    source: Matrix<T>,
    target: Matrix<T>,
    layout: BumpLayout<T>,
) -> Result<OtLocalProblem<T>, ProblemError> {
    let (n, m) = (source.rows(), target.rows());
    if n == 0 || m == 0 {
        return Err(ProblemError::Invalid(
            "both sample sets must be non-empty".into(),
        ));
    }
    if source.cols() != layout.dim() || target.cols() != layout.dim() {
        return Err(ProblemError::Invalid(format!(
            "sample dimensions {} and {} do not match layout dimension {}",
            source.cols(),
            target.cols(),
            layout.dim()
        )));
    }
    if !source.is_finite() || !target.is_finite() {
        return Err(ProblemError::Invalid("samples must be finite".into()));
    }
    Ok(OtLocalProblem {
        source,
        target,
        weights: None,
        layout,
        analytic_hessian: true,
    })
}

fn check_weights<T: Scalar>(w: &Vector<T>, len: usize, side: &str) -> Result<(), ProblemError> {
    if w.len() != len {
        return Err(ProblemError::Invalid(format!(
            "{side} weights: expected {len}, got {}",
            w.len()
        )));
    }
    if w.iter().any(|&v| !(v > T::zero()) || !v.is_finite()) {
        return Err(ProblemError::Invalid(format!(
            "{side} weights must be positive"
        )));
    }
    let total: T = w.iter().copied().sum();
    if (total - T::one()).abs() > T::lit(1e-6).max(T::epsilon() * T::lit(64.0)) {
        return Err(ProblemError::Invalid(format!(
            "{side} weights sum to {total}, not 1"
        )));
    }
    Ok(())
}

impl<T: Scalar> OtLocalProblem<T> {
    pub fn with_weights(mut self, wx: Vector<T>, wy: Vector<T>) -> Result<Self, ProblemError> {
        check_weights(&wx, self.source.rows(), "source")?;
        check_weights(&wy, self.target.rows(), "target")?;
        self.weights = Some((wx, wy));
        Ok(self)
    }

    /// Drops the analytic Hessian so solvers must use gradients only.
    pub fn without_hessian(mut self) -> Self {
        self.analytic_hessian = false;
        self
    }

    pub fn layout(&self) -> &BumpLayout<T> {
        &self.layout
    }

    pub fn source(&self) -> &Matrix<T> {
        &self.source
    }

    pub fn target(&self) -> &Matrix<T> {
        &self.target
    }

    /// Source samples moved by `u_α`, with `α` the first block of `z`.
    pub fn push_forward(&self, z: &Point<T>) -> Result<Matrix<T>, ProblemError> {
        self.shape().check_len(z.len())?;
        let alpha = &z.as_slice()[..self.layout.len()];
        Ok(push_rows(&self.layout, alpha, &self.source))
    }

    /// Weighted sum over source (`target == false`) or target samples.
    /// Uniform weights divide by the count so that equal terms average exactly.
    fn weighted_sum(&self, target: bool, mut term: impl FnMut(usize) -> T) -> T {
        let rows = if target {
            self.target.rows()
        } else {
            self.source.rows()
        };
        match &self.weights {
            None => (0..rows).map(&mut term).sum::<T>() / T::lit(rows as f64),
            Some((wx, wy)) => {
                let w = if target { wy } else { wx };
                (0..rows).map(|i| w[i] * term(i)).sum()
            }
        }
    }

    fn weight(&self, target: bool, i: usize) -> T {
        match &self.weights {
            None => T::lit(
                1.0 / if target {
                    self.target.rows()
                } else {
                    self.source.rows()
                } as f64,
            ),
            Some((wx, wy)) => {
                if target {
                    wy[i]
                } else {
                    wx[i]
                }
            }
        }
    }

    fn beta<'a>(&self, z: &'a Point<T>) -> &'a [T] {
        &z.as_slice()[self.layout.len()..]
    }
}

fn push_rows<T: Scalar>(layout: &BumpLayout<T>, alpha: &[T], points: &Matrix<T>) -> Matrix<T> {
    let d = points.cols();
    let mut data = Vec::with_capacity(points.rows() * d);
    for i in 0..points.rows() {
        data.extend(layout.displace(alpha, points.row(i)));
    }
    Matrix::from_raw(points.rows(), d, data)
}

fn dot<T: Scalar>(a: &[T], b: &[T]) -> T {
    a.iter().zip(b).map(|(&u, &v)| u * v).sum()
}

/// Per-source-sample quantities shared by value, gradient and Hessian.
struct SourceTerms<T> {
    /// `∇ψ_k(x_i)`, `K × d`.
    dpsi_x: Vec<T>,
    /// `ψ_l(p_i)` at the displaced point.
    psi_p: Vec<T>,
    /// `∇ψ_l(p_i)`, `K × d`.
    dpsi_p: Vec<T>,
    /// Offsets `p_i − c_l`, `K × d`.
    diff_p: Vec<T>,
}

impl<T: Scalar> OtLocalProblem<T> {
    fn source_terms(&self, alpha: &[T], i: usize) -> SourceTerms<T> {
        let lay = &self.layout;
        let inv_s2 = (lay.sigma * lay.sigma).recip();
        let x = self.source.row(i);
        let grad = |psi: &[T], diff: &[T]| -> Vec<T> {
            let d = lay.dim();
            (0..psi.len() * d)
                .map(|j| -psi[j / d] * diff[j] * inv_s2)
                .collect()
        };
        let (psi_x, diff_x) = lay.eval(x);
        let dpsi_x = grad(&psi_x, &diff_x);
        let p = lay.displace(alpha, x);
        let (psi_p, diff_p) = lay.eval(&p);
        let dpsi_p = grad(&psi_p, &diff_p);
        SourceTerms {
            dpsi_x,
            psi_p,
            dpsi_p,
            diff_p,
        }
    }

    fn lens_gradient(&self, beta: &[T], t: &SourceTerms<T>) -> Vec<T> {
        let d = self.layout.dim();
        let mut g = vec![T::zero(); d];
        for (l, &b) in beta.iter().enumerate() {
            for a in 0..d {
                g[a] = g[a] + b * t.dpsi_p[l * d + a];
            }
        }
        g
    }
}

impl<T: Scalar> MinimaxProblem<T> for OtLocalProblem<T> {
    fn shape(&self) -> TwistShape {
        let k = self.layout.len();
        TwistShape::new(k, k).expect("at least one bump")
    }

    fn name(&self) -> &str {
        "ot_local"
    }

    fn value(&self, z: &Point<T>) -> Result<T, ProblemError> {
        self.shape().check_len(z.len())?;
        let beta = self.beta(z);
        let pushed = self.push_forward(z)?;
        let lens = |p: &[T]| dot(beta, &self.layout.eval(p).0);
        let gain = self.weighted_sum(false, |i| lens(pushed.row(i)));
        let cost = self.weighted_sum(true, |j| lens(self.target.row(j)).exp());
        Ok(gain - cost)
    }

    fn gradient(&self, z: &Point<T>) -> Result<Vector<T>, ProblemError> {
        self.shape().check_len(z.len())?;
        let (k_n, d) = (self.layout.len(), self.layout.dim());
        let alpha = &z.as_slice()[..k_n];
        let beta = self.beta(z);
        let mut g = vec![T::zero(); 2 * k_n];
        for i in 0..self.source.rows() {
            let t = self.source_terms(alpha, i);
            let grad_g = self.lens_gradient(beta, &t);
            let w = self.weight(false, i);
            for k in 0..k_n {
                g[k] = g[k] + w * dot(&grad_g, &t.dpsi_x[k * d..(k + 1) * d]);
                g[k_n + k] = g[k_n + k] + w * t.psi_p[k];
            }
        }
        for j in 0..self.target.rows() {
            let (psi, _) = self.layout.eval(self.target.row(j));
            let s = self.weight(true, j) * dot(beta, &psi).exp();
            for l in 0..k_n {
                g[k_n + l] = g[k_n + l] - s * psi[l];
            }
        }
        Ok(Vector::from_raw(g))
    }

    fn hessian(&self, z: &Point<T>) -> Option<Result<Matrix<T>, ProblemError>> {
        if !self.analytic_hessian {
            return None;
        }
        if let Err(e) = self.shape().check_len(z.len()) {
            return Some(Err(e));
        }
        let (k_n, d) = (self.layout.len(), self.layout.dim());
        let alpha = &z.as_slice()[..k_n];
        let beta = self.beta(z);
        let s2 = self.layout.sigma * self.layout.sigma;
        let (inv_s2, inv_s4) = (s2.recip(), (s2 * s2).recip());
        let mut h = Matrix::zeros(2 * k_n, 2 * k_n);
        let mut hess_g = vec![T::zero(); d * d];
        for i in 0..self.source.rows() {
            let t = self.source_terms(alpha, i);
            let w = self.weight(false, i);
            hess_g.iter_mut().for_each(|v| *v = T::zero());
            for l in 0..k_n {
                let s = beta[l] * t.psi_p[l];
                let e = &t.diff_p[l * d..(l + 1) * d];
                for a in 0..d {
                    for b in 0..d {
                        let delta = if a == b { inv_s2 } else { T::zero() };
                        hess_g[a * d + b] = hess_g[a * d + b] + s * (e[a] * e[b] * inv_s4 - delta);
                    }
                }
            }
            // ∇²g ∇ψ_m(x_i) for every m, then pair with ∇ψ_k(x_i).
            let mut hv = vec![T::zero(); k_n * d];
            for m in 0..k_n {
                let v = &t.dpsi_x[m * d..(m + 1) * d];
                for a in 0..d {
                    hv[m * d + a] = dot(&hess_g[a * d..(a + 1) * d], v);
                }
            }
            for k in 0..k_n {
                let u = &t.dpsi_x[k * d..(k + 1) * d];
                for m in k..k_n {
                    let v = w * dot(u, &hv[m * d..(m + 1) * d]);
                    h[(k, m)] = h[(k, m)] + v;
                    if m != k {
                        h[(m, k)] = h[(m, k)] + v;
                    }
                }
                for l in 0..k_n {
                    let v = w * dot(u, &t.dpsi_p[l * d..(l + 1) * d]);
                    h[(k, k_n + l)] = h[(k, k_n + l)] + v;
                    h[(k_n + l, k)] = h[(k_n + l, k)] + v;
                }
            }
        }
        for j in 0..self.target.rows() {
            let (psi, _) = self.layout.eval(self.target.row(j));
            let s = self.weight(true, j) * dot(beta, &psi).exp();
            for l in 0..k_n {
                for m in 0..k_n {
                    h[(k_n + l, k_n + m)] = h[(k_n + l, k_n + m)] - s * psi[l] * psi[m];
                }
            }
        }
        Some(Ok(h))
    }

    fn has_hessian(&self) -> bool {
        self.analytic_hessian
    }
}

/// A composition of elementary bump maps, applied first to last.
#[derive(Debug, Clone, Default)]
pub struct ComposedMap<T> {
    pub stages: Vec<(BumpLayout<T>, Vec<T>)>,
}

impl<T: Scalar> ComposedMap<T> {
    pub fn apply_point(&self, x: &[T]) -> Vec<T> {
        self.stages
            .iter()
            .fold(x.to_vec(), |p, (lay, alpha)| lay.displace(alpha, &p))
    }

    /// Applies the map to every row.
    pub fn apply(&self, points: &Matrix<T>) -> Matrix<T> {
        self.stages
            .iter()
            .fold(points.clone(), |p, (lay, alpha)| push_rows(lay, alpha, &p))
    }
}

#[derive(Debug, Clone)]
pub struct OtLoopConfig<T> {
    pub stages: usize,
    /// Grid resolution of each stage's bump layout.
    pub bumps_per_axis: usize,
    pub solver: SolverConfig<T>,
}

impl<T: Scalar> Default for OtLoopConfig<T> {
    fn default() -> Self {
        Self {
            stages: 10,
            bumps_per_axis: 4,
            solver: SolverConfig::default(),
        }
    }
}

/// Terminal data of one local game.
#[derive(Debug, Clone)]
pub struct OtStage<T> {
    pub status: Status,
    pub steps: usize,
    pub objective: T,
    pub grad_norm: T,
}

#[derive(Debug, Clone)]
pub struct OtLoopResult<T> {
    pub map: ComposedMap<T>,
    pub stages: Vec<OtStage<T>>,
    /// Source samples after the full composed map.
    pub pushed: Matrix<T>,
}

impl<T: Scalar> OtLoopResult<T> {
    pub fn final_objective(&self) -> Option<T> {
        self.stages.last().map(|s| s.objective)
    }
}

/// Solves a sequence of local games, each on the samples pushed forward by
/// the maps found so far, starting every stage from `α = β = 0`.
pub fn ot_outer_loop<T: Scalar>(
    source: &Matrix<T>,
    target: &Matrix<T>,
    config: &OtLoopConfig<T>,
) -> Result<OtLoopResult<T>, SolverError> {
    if config.stages == 0 {
        return Err(SolverError::InvalidConfig(
            "at least one stage required".into(),
        ));
    }
    let mut map = ComposedMap {
        stages: Vec::with_capacity(config.stages),
    };
    let mut stages = Vec::with_capacity(config.stages);
    let mut current = source.clone();
    for _ in 0..config.stages {
        let layout = BumpLayout::grid(&[&current, target], config.bumps_per_axis)?;
        let problem = make_ot_local(current.clone(), target.clone(), layout.clone())?;
        let z0 = Vector::zeros(2 * layout.len());
        let result = solve(&problem, &z0, &config.solver)?;
        let alpha = result.z_final.as_slice()[..layout.len()].to_vec();
        current = problem.push_forward(&result.z_final)?;
        stages.push(OtStage {
            status: result.status,
            steps: result.steps(),
            objective: result.final_value,
            grad_norm: result.final_grad_norm,
        });
        map.stages.push((layout, alpha));
    }
    Ok(OtLoopResult {
        map,
        stages,
        pushed: current,
    })
}

/// `n` draws from an isotropic Gaussian in `R^d`.
pub fn gaussian_samples<T: Scalar>(
    n: usize,
    d: usize,
    mean: f64,
    std: f64,
    seed: u64,
) -> Matrix<T> {
    let mut rng = Pcg32::seed_from_u64(seed);
    let normal = Normal::new(mean, std.abs()).expect("finite deviation");
    Matrix::from_fn(n, d, |_, _| T::lit(normal.sample(&mut rng)))
}

/// `m` points on the circle of the given radius about the origin, at
/// uniformly random angles.
pub fn circle_samples<T: Scalar>(m: usize, radius: f64, seed: u64) -> Matrix<T> {
    let mut rng = Pcg32::seed_from_u64(seed);
    let angle = Uniform::new(0.0, std::f64::consts::TAU).expect("non-empty range");
    let mut data = Vec::with_capacity(2 * m);
    for _ in 0..m {
        let t: f64 = angle.sample(&mut rng);
        data.push(T::lit(radius * t.cos()));
        data.push(T::lit(radius * t.sin()));
    }
    Matrix::from_raw(m, 2, data)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::minimax::gradient_check;

    fn instance() -> OtLocalProblem<f64> {
        let src = gaussian_samples(12, 2, 0.0, 1.0, 3);
        let tgt = circle_samples(9, 1.5, 4);
        let layout = BumpLayout::grid(&[&src, &tgt], 3).unwrap();
        make_ot_local(src, tgt, layout).unwrap()
    }

    #[test]
    fn grid_layout_spans_bounding_box() {
        let pts = Matrix::from_rows(&[&[0.0, -1.0], &[2.0, 3.0]]);
        let lay = BumpLayout::grid(&[&pts], 3).unwrap();
        assert_eq!(lay.len(), 9);
        assert_eq!(lay.sigma(), 1.0);
        assert_eq!(lay.centers().row(0), &[0.0, -1.0]);
        assert_eq!(lay.centers().row(8), &[2.0, 3.0]);
        assert_eq!(lay.centers().row(1), &[1.0, -1.0]);
    }

    #[test]
    fn matched_samples_value_is_minus_one() {
        let pts = gaussian_samples::<f64>(15, 2, 0.0, 1.0, 9);
        let lay = BumpLayout::grid(&[&pts], 3).unwrap();
        let p = make_ot_local(pts.clone(), pts, lay).unwrap();
        let z = Vector::zeros(18);
        assert_eq!(p.value(&z).unwrap(), -1.0);
        assert!(p.gradient(&z).unwrap().norm_inf() < 1e-15);
    }

    #[test]
    fn derivatives_match_differences() {
        let p = instance();
        let z = Vector::from_fn(18, |i| 0.1 * ((i as f64) * 1.7).sin());
        assert!(gradient_check(&p, &z, 1e-6).unwrap() < 1e-6);
    }

    #[test]
    fn hessian_can_be_disabled() {
        let p = instance().without_hessian();
        assert!(!p.has_hessian());
        assert!(p.hessian(&Vector::zeros(18)).is_none());
    }

    #[test]
    fn weights_validated() {
        let p = instance();
        assert!(p
            .clone()
            .with_weights(Vector::from_elem(12, 0.5), Vector::from_elem(9, 1.0 / 9.0))
            .is_err());
        let mut wx = vec![1.0 / 24.0; 12];
        wx[0] += 0.5;
        assert!(p
            .with_weights(Vector::from_raw(wx), Vector::from_elem(9, 1.0 / 9.0))
            .is_ok());
    }

    #[test]
    fn composed_map_matches_pushforward() {
        let p = instance();
        let z = Vector::from_fn(18, |i| if i < 9 { 0.05 * i as f64 } else { 0.0 });
        let map = ComposedMap {
            stages: vec![(p.layout().clone(), z.as_slice()[..9].to_vec())],
        };
        assert_eq!(map.apply(p.source()), p.push_forward(&z).unwrap());
    }
}
