//! Synthetic linear and logistic regression benchmarks.
//!
//! Features are i.i.d. standard normal, `θ*_j = 5·exp(−j/2)`, linear targets
//! carry Gaussian noise and logistic targets are Bernoulli draws of
//! `sigmoid(x·θ*)`. Losses are half squared error and Bernoulli log loss.

use std::fmt;
use std::io::{BufRead, Write};
use std::str::FromStr;

use rand::Rng;

use crate::error::{Error, Result};
use crate::oracle::{GradientOracle, GradientSample, Objective};
use crate::rng::{standard_normal, RngStream, StreamRng};
use crate::scalar::Scalar;
use crate::vector::{check_dim, dot_slices, ParamVector};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Family {
    Linear,
    Logistic,
}

impl fmt::Display for Family {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Family::Linear => "linear",
            Family::Logistic => "logistic",
        })
    }
}

impl FromStr for Family {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "linear" => Ok(Family::Linear),
            "logistic" => Ok(Family::Logistic),
            other => Err(Error::invalid(format!("unknown problem family '{other}'"))),
        }
    }
}

/// Description of a synthetic regression task.
#[derive(Clone, Debug, PartialEq)]
pub struct ProblemSpec<T> {
    pub family: Family,
    pub n: usize,
    pub d: usize,
    pub theta_star: ParamVector<T>,
    /// Standard deviation of the additive target noise; unused for logistic.
    pub noise_sd: T,
    pub data_seed: RngStream,
}

impl<T: Scalar> ProblemSpec<T> {
    pub fn validate(&self) -> Result<()> {
        if self.n == 0 || self.d == 0 {
            return Err(Error::invalid("n and d must be positive"));
        }
        check_dim(self.d, self.theta_star.dim())?;
        if !self.noise_sd.is_finite() || self.noise_sd < T::zero() {
            return Err(Error::invalid("noise sd must be finite and nonnegative"));
        }
        Ok(())
    }
}

/// `θ*_j = 5·exp(−j/2)` for `j = 1..=d`.
pub fn default_theta_star<T: Scalar>(d: usize) -> ParamVector<T> {
    ParamVector::from_fn(d, |i| T::lit(5.0 * (-((i + 1) as f64) / 2.0).exp())).expect("finite")
}

/// The default benchmark: `n = 1000`, `d = 20`, unit noise.
pub fn make_default_spec<T: Scalar>(family: Family) -> ProblemSpec<T> {
    let d = 20;
    ProblemSpec {
        family,
        n: 1000,
        d,
        theta_star: default_theta_star(d),
        noise_sd: T::one(),
        data_seed: RngStream::new(0, 0),
    }
}

/// `θ_s` with `θ_{s,j} = 5·exp(−(d−j)/2)`: the entries of the default truth in
/// reverse order.
pub fn reversed_start<T: Scalar>(spec: &ProblemSpec<T>) -> ParamVector<T> {
    let d = spec.d;
    ParamVector::from_fn(d, |i| T::lit(5.0 * (-((d - (i + 1)) as f64) / 2.0).exp()))
        .expect("finite")
}

/// `base + ε` with `ε ~ N(0, sd²·I)` drawn from `stream`.
pub fn perturb<T: Scalar>(base: &ParamVector<T>, sd: f64, stream: &RngStream) -> ParamVector<T> {
    let mut rng = stream.rng();
    let coords = base
        .iter()
        .map(|&b| b + T::lit(sd * standard_normal(&mut rng)))
        .collect();
    ParamVector::new(coords).expect("finite perturbation")
}

/// Feature matrix (row-major) and targets.
#[derive(Clone, Debug, PartialEq)]
pub struct Dataset<T> {
    n: usize,
    d: usize,
    features: Vec<T>,
    targets: Vec<T>,
}

impl<T: Scalar> Dataset<T> {
    pub fn new(n: usize, d: usize, features: Vec<T>, targets: Vec<T>) -> Result<Self> {
        if n == 0 || d == 0 {
            return Err(Error::invalid("dataset must be non-empty"));
        }
        check_dim(n * d, features.len())?;
        check_dim(n, targets.len())?;
        if features.iter().chain(&targets).any(|x| !x.is_finite()) {
            return Err(Error::invalid("dataset contains non-finite entries"));
        }
        Ok(Self {
            n,
            d,
            features,
            targets,
        })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn d(&self) -> usize {
        self.d
    }

    pub fn row(&self, i: usize) -> &[T] {
        &self.features[i * self.d..(i + 1) * self.d]
    }

    pub fn targets(&self) -> &[T] {
        &self.targets
    }

    /// Writes `x1,..,xd,y` rows under a header line.
    pub fn write_csv<W: Write>(&self, mut out: W) -> Result<()> {
        let header: Vec<String> = (1..=self.d)
            .map(|j| format!("x{j}"))
            .chain(["y".to_string()])
            .collect();
        writeln!(out, "{}", header.join(","))?;
        for i in 0..self.n {
            let mut line = String::new();
            for x in self.row(i) {
                line.push_str(&format!("{x},"));
            }
            line.push_str(&format!("{}", self.targets[i]));
            writeln!(out, "{line}")?;
        }
        Ok(())
    }

    pub fn read_csv<R: BufRead>(input: R) -> Result<Self> {
        let mut lines = input.lines();
        let header = lines
            .next()
            .ok_or_else(|| Error::Io("empty csv".into()))??;
        let cols = header.split(',').count();
        if cols < 2 || header.split(',').next_back() != Some("y") {
            return Err(Error::Io(format!("unexpected header '{header}'")));
        }
        let d = cols - 1;
        let (mut features, mut targets) = (Vec::new(), Vec::new());
        for (lineno, line) in lines.enumerate() {
            let line = line?;
            if line.trim().is_empty() {
                continue;
            }
            let fields: Vec<&str> = line.split(',').collect();
            if fields.len() != cols {
                return Err(Error::Io(format!(
                    "line {}: expected {cols} fields",
                    lineno + 2
                )));
            }
            for (j, f) in fields.iter().enumerate() {
                let x: f64 = f
                    .trim()
                    .parse()
                    .map_err(|_| Error::Io(format!("line {}: bad number '{f}'", lineno + 2)))?;
                if j < d {
                    features.push(T::lit(x));
                } else {
                    targets.push(T::lit(x));
                }
            }
        }
        Dataset::new(targets.len(), d, features, targets)
    }
}

/// Draws the dataset described by `spec`. All features are drawn first, row
/// by row, then one noise or uniform variate per target, from the single
/// generator of `spec.data_seed`.
pub fn generate<T: Scalar>(spec: &ProblemSpec<T>) -> Result<Dataset<T>> {
    spec.validate()?;
    let mut rng = spec.data_seed.rng();
    let features: Vec<T> = (0..spec.n * spec.d)
        .map(|_| T::lit(standard_normal(&mut rng)))
        .collect();
    let star = spec.theta_star.as_slice();
    let targets = (0..spec.n)
        .map(|i| {
            let z = dot_slices(&features[i * spec.d..(i + 1) * spec.d], star);
            match spec.family {
                Family::Linear => z + spec.noise_sd * T::lit(standard_normal(&mut rng)),
                Family::Logistic => {
                    let u: f64 = rng.random();
                    if u < sigmoid(z.as_f64()) {
                        T::one()
                    } else {
                        T::zero()
                    }
                }
            }
        })
        .collect();
    Dataset::new(spec.n, spec.d, features, targets)
}

/// A dataset paired with its loss family: the stochastic gradient oracle.
///
/// Stochastic gradients pick one datum uniformly with replacement.
#[derive(Clone, Debug)]
pub struct Problem<T> {
    dataset: Dataset<T>,
    family: Family,
}

impl<T: Scalar> Problem<T> {
    pub fn new(dataset: Dataset<T>, family: Family) -> Result<Self> {
        if family == Family::Logistic
            && dataset
                .targets
                .iter()
                .any(|&y| y != T::zero() && y != T::one())
        {
            return Err(Error::invalid("logistic targets must be 0 or 1"));
        }
        Ok(Self { dataset, family })
    }

    pub fn from_spec(spec: &ProblemSpec<T>) -> Result<Self> {
        Self::new(generate(spec)?, spec.family)
    }

    pub fn dataset(&self) -> &Dataset<T> {
        &self.dataset
    }

    pub fn family(&self) -> Family {
        self.family
    }

    /// `∂loss/∂(x·θ)` for datum `i`: the residual for linear, `σ(z) − y` for logistic.
    #[inline]
    fn link_residual(&self, i: usize, theta: &[T]) -> T {
        let z = dot_slices(self.dataset.row(i), theta);
        let y = self.dataset.targets[i];
        match self.family {
            Family::Linear => z - y,
            Family::Logistic => sigmoid_t(z) - y,
        }
    }

    pub fn datum_loss(&self, i: usize, theta: &ParamVector<T>) -> Result<T> {
        check_dim(self.dataset.d, theta.dim())?;
        let z = dot_slices(self.dataset.row(i), theta.as_slice());
        let y = self.dataset.targets[i];
        Ok(match self.family {
            Family::Linear => T::lit(0.5) * (z - y) * (z - y),
            Family::Logistic => softplus(z) - y * z,
        })
    }

    /// Gradient of the loss of datum `i`, written into `out`.
    pub fn datum_gradient_into(
        &self,
        i: usize,
        theta: &ParamVector<T>,
        out: &mut ParamVector<T>,
    ) -> Result<()> {
        check_dim(self.dataset.d, theta.dim())?;
        check_dim(self.dataset.d, out.dim())?;
        let r = self.link_residual(i, theta.as_slice());
        let row = self.dataset.row(i);
        let dst = out.as_mut_slice();
        for (o, &x) in dst.iter_mut().zip(row) {
            *o = r * x;
        }
        if !r.is_finite() || dst.iter().any(|x| !x.is_finite()) {
            dst.iter_mut().for_each(|x| *x = T::zero());
            return Err(Error::NonFinite {
                iteration: i as u64,
            });
        }
        Ok(())
    }

    pub fn datum_gradient(&self, i: usize, theta: &ParamVector<T>) -> Result<ParamVector<T>> {
        let mut g = ParamVector::zeros(self.dataset.d);
        self.datum_gradient_into(i, theta, &mut g)?;
        Ok(g)
    }

    /// Mean per-datum loss. Logistic loss uses the stable softplus form.
    pub fn full_loss(&self, theta: &ParamVector<T>) -> Result<T> {
        check_dim(self.dataset.d, theta.dim())?;
        let mut acc = T::zero();
        for i in 0..self.dataset.n {
            acc += self.datum_loss(i, theta)?;
        }
        let loss = acc / T::lit(self.dataset.n as f64);
        if loss.is_finite() {
            Ok(loss)
        } else {
            Err(Error::NonFinite { iteration: 0 })
        }
    }

    /// `Xᵀ r / n` with `r` the vector of link residuals.
    pub fn full_gradient(&self, theta: &ParamVector<T>) -> Result<ParamVector<T>> {
        check_dim(self.dataset.d, theta.dim())?;
        let d = self.dataset.d;
        let residuals: Vec<T> = (0..self.dataset.n)
            .map(|i| self.link_residual(i, theta.as_slice()))
            .collect();
        let n = T::lit(self.dataset.n as f64);
        let grad = (0..d)
            .map(|j| {
                let mut acc = T::zero();
                for (i, &r) in residuals.iter().enumerate() {
                    acc += self.dataset.features[i * d + j] * r;
                }
                acc / n
            })
            .collect();
        ParamVector::new(grad).map_err(|_| Error::NonFinite { iteration: 0 })
    }

    /// Gradient oracle that always returns the exact full gradient.
    pub fn noiseless(&self) -> FullGradientOracle<'_, T> {
        FullGradientOracle { problem: self }
    }
}

impl<T: Scalar> GradientOracle<T> for Problem<T> {
    fn dim(&self) -> usize {
        self.dataset.d
    }

    fn draw(
        &self,
        theta: &ParamVector<T>,
        rng: &mut StreamRng,
        out: &mut GradientSample<T>,
    ) -> Result<()> {
        // u64 range keeps the draw identical on 32- and 64-bit targets
        let i = rng.random_range(0..self.dataset.n as u64) as usize;
        self.datum_gradient_into(i, theta, &mut out.gradient)?;
        out.loss = None;
        Ok(())
    }
}

impl<T: Scalar> Objective<T> for Problem<T> {
    fn epoch_len(&self) -> usize {
        self.dataset.n
    }

    fn full_loss(&self, theta: &ParamVector<T>) -> Result<T> {
        Problem::full_loss(self, theta)
    }
}

/// Deterministic oracle returning `∇F(θ)`; consumes no randomness.
#[derive(Clone, Copy, Debug)]
pub struct FullGradientOracle<'a, T> {
    problem: &'a Problem<T>,
}

impl<T: Scalar> GradientOracle<T> for FullGradientOracle<'_, T> {
    fn dim(&self) -> usize {
        self.problem.dataset.d
    }

    fn draw(
        &self,
        theta: &ParamVector<T>,
        _rng: &mut StreamRng,
        out: &mut GradientSample<T>,
    ) -> Result<()> {
        out.gradient = self.problem.full_gradient(theta)?;
        out.loss = None;
        Ok(())
    }
}

impl<T: Scalar> Objective<T> for FullGradientOracle<'_, T> {
    fn epoch_len(&self) -> usize {
        self.problem.dataset.n
    }

    fn full_loss(&self, theta: &ParamVector<T>) -> Result<T> {
        self.problem.full_loss(theta)
    }
}

/// Where an experiment starts before the `N(0, 0.01·I)` perturbation.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum StartPoint {
    /// Around the model truth `θ*`.
    NearOptimum,
    /// Around the reversed truth `θ_s`.
    Reversed,
}

impl fmt::Display for StartPoint {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            StartPoint::NearOptimum => "near-opt",
            StartPoint::Reversed => "reversed",
        })
    }
}

impl FromStr for StartPoint {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "near-opt" => Ok(StartPoint::NearOptimum),
            "reversed" => Ok(StartPoint::Reversed),
            other => Err(Error::invalid(format!("unknown start '{other}'"))),
        }
    }
}

/// Standard deviation of the start perturbation (variance 0.01).
pub const START_NOISE_SD: f64 = 0.1;

/// A generated problem together with the spec it came from.
#[derive(Clone, Debug)]
pub struct Benchmark<T> {
    pub spec: ProblemSpec<T>,
    pub problem: Problem<T>,
}

impl<T: Scalar> Benchmark<T> {
    pub fn new(spec: ProblemSpec<T>) -> Result<Self> {
        let problem = Problem::from_spec(&spec)?;
        Ok(Self { spec, problem })
    }

    /// `base(start) + N(0, 0.01·I)` with the noise drawn from `stream`.
    pub fn start(&self, start: StartPoint, stream: &RngStream) -> ParamVector<T> {
        let base = match start {
            StartPoint::NearOptimum => self.spec.theta_star.clone(),
            StartPoint::Reversed => reversed_start(&self.spec),
        };
        perturb(&base, START_NOISE_SD, stream)
    }
}

pub(crate) fn sigmoid(z: f64) -> f64 {
    if z >= 0.0 {
        1.0 / (1.0 + (-z).exp())
    } else {
        let e = z.exp();
        e / (1.0 + e)
    }
}

fn sigmoid_t<T: Scalar>(z: T) -> T {
    if z >= T::zero() {
        T::one() / (T::one() + (-z).exp())
    } else {
        let e = z.exp();
        e / (T::one() + e)
    }
}

/// `ln(1 + e^z)` without overflow.
fn softplus<T: Scalar>(z: T) -> T {
    z.max(T::zero()) + (-z.abs()).exp().ln_1p()
}
