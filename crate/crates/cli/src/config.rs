//! JSON run configuration and problem construction.

use std::path::{Path, PathBuf};

use serde::Deserialize;
use thiserror::Error;

use saddle_core::{
    circle_samples, gaussian_samples, make_bilinear_xy, make_gauss_bump_saddle, make_lp,
    make_lp_lagrangian, make_ot_local, make_quad_bowl, make_quad_saddle, make_zero_sum, BumpLayout,
    ConstraintMask, DetachConfig, LpInstance, Matrix, Method, MinimaxProblem, Point, ProblemError,
    SecantScheme, SolverConfig, TwistShape, Vector, ZeroSumLagrangian,
};

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("cannot read {path}: {source}")]
    Io {
        path: PathBuf,
        source: std::io::Error,
    },
    #[error("malformed config: {0}")]
    Parse(#[from] serde_json::Error),
    #[error("{0}")]
    Invalid(String),
    #[error(transparent)]
    Problem(#[from] ProblemError),
}

fn invalid<T>(msg: impl Into<String>) -> Result<T, ConfigError> {
    Err(ConfigError::Invalid(msg.into()))
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub problem: ProblemSpec,
    #[serde(default)]
    pub constraint: ConstraintSpec,
    #[serde(default)]
    pub solver: SolverSpec,
    #[serde(default)]
    pub init: Option<InitSpec>,
    #[serde(default)]
    pub output: OutputSpec,
}

/// Problem name plus whichever parameters that problem reads.
#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProblemSpec {
    pub name: String,
    #[serde(default)]
    pub seed: Option<u64>,
    // lp
    #[serde(default)]
    pub n_x: Option<usize>,
    #[serde(default)]
    pub n_y: Option<usize>,
    // zero_sum
    #[serde(default)]
    pub payoff: Option<Vec<Vec<f64>>>,
    // ot
    #[serde(default)]
    pub n: Option<usize>,
    #[serde(default)]
    pub m: Option<usize>,
    #[serde(default)]
    pub bumps_per_axis: Option<usize>,
    #[serde(default)]
    pub radius: Option<f64>,
    #[serde(default)]
    pub matched: bool,
    /// Added to the first analytic gradient entry. Only useful for testing
    /// `check-grad`.
    #[serde(default)]
    pub gradient_bias: f64,
}

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(tag = "mode", rename_all = "lowercase", deny_unknown_fields)]
pub enum ConstraintSpec {
    #[default]
    None,
    Squared {
        #[serde(default)]
        mask: Option<Vec<usize>>,
        #[serde(default)]
        detach: Option<DetachSpec>,
    },
    Barrier {
        t_schedule: Vec<f64>,
        #[serde(default)]
        mask: Option<Vec<usize>>,
    },
}

/// Detachment settings; missing fields take the problem's defaults.
#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DetachSpec {
    #[serde(default = "yes")]
    pub enabled: bool,
    pub eps: Option<f64>,
    pub eta0: Option<f64>,
    pub reset_mu: Option<bool>,
}

fn yes() -> bool {
    true
}

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SolverSpec {
    pub method: Option<String>,
    pub mu0: Option<f64>,
    pub alpha: Option<f64>,
    pub mu_max: Option<f64>,
    pub mu_min: Option<f64>,
    pub grad_tol: Option<f64>,
    pub max_steps: Option<usize>,
    pub max_halvings: Option<usize>,
    pub divergence_norm: Option<f64>,
    pub fixed_eta: Option<f64>,
    pub qn_refine_every: Option<usize>,
    pub qn_scheme: Option<String>,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(rename_all = "lowercase", deny_unknown_fields)]
pub enum InitSpec {
    /// Start point in the coordinates the solver runs in.
    Point(Vec<f64>),
    Fill(f64),
}

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputSpec {
    pub trace: Option<PathBuf>,
    pub solution: Option<PathBuf>,
}

/// Command-line values that take precedence over the config file.
#[derive(Debug, Clone, Default)]
pub struct Overrides {
    pub problem: Option<String>,
    pub method: Option<String>,
    pub fixed_eta: Option<f64>,
    pub mu0: Option<f64>,
    pub alpha: Option<f64>,
    pub mu_max: Option<f64>,
    pub tol: Option<f64>,
    pub max_steps: Option<usize>,
    pub seed: Option<u64>,
    pub out: Option<PathBuf>,
}

impl RunConfig {
    pub fn load(path: &Path) -> Result<Self, ConfigError> {
        let text = std::fs::read_to_string(path).map_err(|source| ConfigError::Io {
            path: path.to_path_buf(),
            source,
        })?;
        Self::parse(&text)
    }

    pub fn parse(text: &str) -> Result<Self, ConfigError> {
        Ok(serde_json::from_str(text)?)
    }

    /// A config holding only a problem name, for flag-only invocations.
    pub fn named(name: &str) -> Self {
        RunConfig {
            problem: ProblemSpec {
                name: name.to_string(),
                ..Default::default()
            },
            constraint: ConstraintSpec::None,
            solver: SolverSpec::default(),
            init: None,
            output: OutputSpec::default(),
        }
    }

    pub fn apply(&mut self, o: &Overrides) {
        if let Some(name) = &o.problem {
            self.problem.name = name.clone();
        }
        let s = &mut self.solver;
        if o.method.is_some() {
            s.method = o.method.clone();
        }
        if o.fixed_eta.is_some() {
            s.fixed_eta = o.fixed_eta;
        }
        if o.mu0.is_some() {
            s.mu0 = o.mu0;
        }
        if o.alpha.is_some() {
            s.alpha = o.alpha;
        }
        if o.mu_max.is_some() {
            s.mu_max = o.mu_max;
        }
        if o.tol.is_some() {
            s.grad_tol = o.tol;
        }
        if o.max_steps.is_some() {
            s.max_steps = o.max_steps;
        }
        if o.seed.is_some() {
            self.problem.seed = o.seed;
        }
        if let Some(out) = &o.out {
            self.output.trace = Some(out.clone());
        }
    }

    pub fn trace_path(&self) -> PathBuf {
        self.output
            .trace
            .clone()
            .unwrap_or_else(|| PathBuf::from("trace.csv"))
    }

    pub fn solution_path(&self) -> PathBuf {
        self.output
            .solution
            .clone()
            .unwrap_or_else(|| self.trace_path().with_extension("solution.json"))
    }
}

pub fn parse_method(name: &str) -> Result<Method, ConfigError> {
    match name {
        "explicit" => Ok(Method::Explicit),
        "implicit" => Ok(Method::Implicit),
        "qn" => Ok(Method::QuasiNewton),
        other => invalid(format!(
            "unknown method `{other}` (expected explicit, implicit or qn)"
        )),
    }
}

impl SolverSpec {
    pub fn build(&self) -> Result<SolverConfig<f64>, ConfigError> {
        let mut c = SolverConfig::<f64>::default();
        if let Some(m) = &self.method {
            c.method = parse_method(m)?;
        }
        c.mu0 = self.mu0.unwrap_or(c.mu0);
        c.alpha = self.alpha.unwrap_or(c.alpha);
        c.mu_max = self.mu_max.unwrap_or(c.mu_max);
        c.mu_min = self.mu_min.unwrap_or(c.mu_min);
        c.grad_tol = self.grad_tol.unwrap_or(c.grad_tol);
        c.max_steps = self.max_steps.unwrap_or(c.max_steps);
        c.max_halvings = self.max_halvings.unwrap_or(c.max_halvings);
        c.divergence_norm = self.divergence_norm.unwrap_or(c.divergence_norm);
        c.fixed_eta = self.fixed_eta;
        c.qn_refine_every = self.qn_refine_every.unwrap_or(c.qn_refine_every);
        c.qn_scheme = match self.qn_scheme.as_deref() {
            None | Some("step_secant") => SecantScheme::StepSecant,
            Some("retrospective") => SecantScheme::Retrospective,
            Some(other) => {
                return invalid(format!(
                    "unknown qn_scheme `{other}` (expected step_secant or retrospective)"
                ))
            }
        };
        c.validate()
            .map_err(|e| ConfigError::Invalid(e.to_string()))?;
        Ok(c)
    }
}

/// Adds a constant to the first gradient entry of the inner problem.
struct Biased {
    inner: Box<dyn MinimaxProblem<f64>>,
    bias: f64,
}

impl MinimaxProblem<f64> for Biased {
    fn shape(&self) -> TwistShape {
        self.inner.shape()
    }
    fn name(&self) -> &str {
        self.inner.name()
    }
    fn value(&self, z: &Point<f64>) -> Result<f64, ProblemError> {
        self.inner.value(z)
    }
    fn gradient(&self, z: &Point<f64>) -> Result<Vector<f64>, ProblemError> {
        let mut g = self.inner.gradient(z)?;
        g.as_mut_slice()[0] += self.bias;
        Ok(g)
    }
    fn hessian(&self, z: &Point<f64>) -> Option<Result<Matrix<f64>, ProblemError>> {
        self.inner.hessian(z)
    }
    fn has_hessian(&self) -> bool {
        self.inner.has_hessian()
    }
}

pub type DynProblem = Box<dyn MinimaxProblem<f64>>;

/// A configured problem in the forms the constraint modes need.
pub struct Built {
    /// What `constraint: none` solves. For `lp` and `zero_sum` this is
    /// already the squared-variable form.
    pub plain: DynProblem,
    /// Original-coordinate problem that `squared` and `barrier` wrap.
    pub base: DynProblem,
    /// Coordinates of `base` that are nonnegative by default.
    pub mask: ConstraintMask,
    /// Whether `plain` works in square-root coordinates on `mask`.
    pub plain_is_squared: bool,
    /// Default start in the original coordinates of `base`.
    pub start: Point<f64>,
    pub lp: Option<LpInstance<f64>>,
}

fn need<T: Copy>(v: Option<T>, what: &str, problem: &str) -> Result<T, ConfigError> {
    match v {
        Some(v) => Ok(v),
        None => invalid(format!("problem `{problem}` requires `{what}`")),
    }
}

fn positive(v: usize, what: &str) -> Result<usize, ConfigError> {
    if v == 0 {
        invalid(format!("`{what}` must be positive"))
    } else {
        Ok(v)
    }
}

pub const PROBLEMS: &[&str] = &[
    "bilinear_xy",
    "quad_saddle",
    "quad_bowl",
    "gauss_bump_saddle",
    "lp",
    "zero_sum",
    "ot",
];

fn squares(z: &Point<f64>, mask: &ConstraintMask) -> Point<f64> {
    let mut out = z.clone();
    for &i in mask.indices() {
        out.as_mut_slice()[i] = z[i] * z[i];
    }
    out
}

pub fn roots(z: &Point<f64>, mask: &ConstraintMask) -> Point<f64> {
    let mut out = z.clone();
    for &i in mask.indices() {
        out.as_mut_slice()[i] = z[i].max(0.0).sqrt();
    }
    out
}

impl ProblemSpec {
    pub fn build(&self) -> Result<Built, ConfigError> {
        let name = self.name.as_str();
        let seed = self.seed.unwrap_or(0);
        let mut built = match name {
            "bilinear_xy" | "quad_saddle" | "quad_bowl" | "gauss_bump_saddle" => {
                let make = || -> DynProblem {
                    match name {
                        "bilinear_xy" => Box::new(make_bilinear_xy::<f64>()),
                        "quad_saddle" => Box::new(make_quad_saddle::<f64>()),
                        "quad_bowl" => Box::new(make_quad_bowl::<f64>()),
                        _ => Box::new(make_gauss_bump_saddle::<f64>()),
                    }
                };
                let plain = make();
                let dim = plain.shape().dim();
                let start = if name == "gauss_bump_saddle" {
                    Vector::from([0.25, 0.25])
                } else {
                    Vector::from([1.0, 1.0])
                };
                Built {
                    plain,
                    base: make(),
                    mask: ConstraintMask::all(dim),
                    plain_is_squared: false,
                    start,
                    lp: None,
                }
            }
            "lp" => {
                let nx = positive(need(self.n_x, "n_x", name)?, "n_x")?;
                let ny = positive(need(self.n_y, "n_y", name)?, "n_y")?;
                let inst = LpInstance::<f64>::random(nx, ny, seed);
                let mask = ConstraintMask::all(nx + ny);
                Built {
                    plain: Box::new(make_lp(inst.clone())),
                    base: Box::new(make_lp_lagrangian(inst.clone())),
                    start: squares(&inst.default_start(), &mask),
                    mask,
                    plain_is_squared: true,
                    lp: Some(inst),
                }
            }
            "zero_sum" => {
                let rows = match &self.payoff {
                    Some(r) if !r.is_empty() => r,
                    _ => return invalid("problem `zero_sum` requires a non-empty `payoff`"),
                };
                let cols = rows[0].len();
                if rows.iter().any(|r| r.len() != cols) {
                    return invalid("`payoff` rows must have equal length");
                }
                let data = rows.iter().flatten().copied().collect();
                let payoff = Matrix::new(rows.len(), cols, data)
                    .map_err(|e| ConfigError::Invalid(e.to_string()))?;
                let base = ZeroSumLagrangian::new(payoff.clone())?;
                let mask = base.strategy_mask();
                let start = squares(&base.uniform_start(), &mask);
                Built {
                    plain: Box::new(make_zero_sum(payoff)?),
                    base: Box::new(base),
                    mask,
                    plain_is_squared: true,
                    start,
                    lp: None,
                }
            }
            "ot" => {
                let n = positive(self.n.unwrap_or(60), "n")?;
                let source = gaussian_samples::<f64>(n, 2, 0.0, 1.0, seed);
                let target = if self.matched {
                    source.clone()
                } else {
                    let m = positive(self.m.unwrap_or(60), "m")?;
                    circle_samples::<f64>(m, self.radius.unwrap_or(2.0), seed.wrapping_add(1))
                };
                let per_axis = positive(self.bumps_per_axis.unwrap_or(4), "bumps_per_axis")?;
                let layout = BumpLayout::grid(&[&source, &target], per_axis)?;
                let dim = 2 * layout.len();
                let make = || make_ot_local(source.clone(), target.clone(), layout.clone());
                Built {
                    plain: Box::new(make()?),
                    base: Box::new(make()?),
                    mask: ConstraintMask::empty(dim),
                    plain_is_squared: false,
                    start: Vector::zeros(dim),
                    lp: None,
                }
            }
            "" => return invalid("problem name is empty"),
            other => {
                return invalid(format!(
                    "unknown problem `{other}` (known: {})",
                    PROBLEMS.join(", ")
                ))
            }
        };
        if self.gradient_bias != 0.0 {
            built.plain = Box::new(Biased {
                inner: built.plain,
                bias: self.gradient_bias,
            });
            built.base = Box::new(Biased {
                inner: built.base,
                bias: self.gradient_bias,
            });
        }
        Ok(built)
    }
}

pub fn mask_from(
    indices: &Option<Vec<usize>>,
    default: &ConstraintMask,
) -> Result<ConstraintMask, ConfigError> {
    match indices {
        None => Ok(default.clone()),
        Some(ix) => Ok(ConstraintMask::new(ix.iter().copied(), default.dim())?),
    }
}

impl DetachSpec {
    pub fn build(
        spec: &Option<DetachSpec>,
        default: DetachConfig<f64>,
    ) -> Result<Option<DetachConfig<f64>>, ConfigError> {
        let Some(spec) = spec else {
            return Ok(Some(default));
        };
        if !spec.enabled {
            return Ok(None);
        }
        let d = DetachConfig {
            eps: spec.eps.unwrap_or(default.eps),
            eta0_init: spec.eta0.unwrap_or(default.eta0_init),
            reset_mu: spec.reset_mu.unwrap_or(default.reset_mu),
        };
        if !(d.eps > 0.0 && d.eta0_init > 0.0) {
            return invalid("detach `eps` and `eta0` must be positive");
        }
        Ok(Some(d))
    }
}

impl InitSpec {
    pub fn point(&self, dim: usize) -> Result<Point<f64>, ConfigError> {
        match self {
            InitSpec::Point(v) if v.len() == dim => {
                Vector::new(v.clone()).map_err(|e| ConfigError::Invalid(e.to_string()))
            }
            InitSpec::Point(v) => invalid(format!(
                "init point has {} entries, problem needs {dim}",
                v.len()
            )),
            InitSpec::Fill(x) => Ok(Vector::from_elem(dim, *x)),
        }
    }
}
