//! Offline regression oracle: constrained empirical risk minimization of the
//! surrogate loss by projected gradient descent, the `comp` rate formula,
//! and excess surrogate risk against a best-in-class comparator.

use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::distributions::{InstanceSpec, QueryRegion};
use crate::error::{Error, Result};
use crate::funcclass::{dot, norm, ClassKind, ClassSpec, FiniteClass, Input, Params};
use crate::rng;
use crate::surrogate::{SurrogateKind, SurrogateSpec};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StepRule {
    Fixed,
    Backtracking,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct OracleConfig {
    pub max_iters: usize,
    pub step_rule: StepRule,
    pub step_size: f64,
    pub grad_tol: f64,
    pub seed: u64,
}

impl Default for OracleConfig {
    fn default() -> Self {
        OracleConfig {
            max_iters: 5000,
            step_rule: StepRule::Backtracking,
            step_size: 1.0,
            grad_tol: 1e-9,
            seed: 0,
        }
    }
}

impl OracleConfig {
    pub fn validate(&self) -> Result<()> {
        if self.max_iters == 0 {
            return Err(Error::config("max_iters", "must be at least 1"));
        }
        if !(self.grad_tol > 0.0 && self.grad_tol.is_finite()) {
            return Err(Error::config("grad_tol", "must be positive"));
        }
        if !(self.step_size > 0.0 && self.step_size.is_finite()) {
            return Err(Error::config("step_size", "must be positive"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CompKind {
    PdimLog,
    CustomConstant,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CompFormula {
    pub kind: CompKind,
    #[serde(default = "one")]
    pub pdim: f64,
    #[serde(default = "one")]
    pub c0: f64,
}

fn one() -> f64 {
    1.0
}

impl CompFormula {
    pub fn pdim_log(pdim: f64, c0: f64) -> Self {
        CompFormula {
            kind: CompKind::PdimLog,
            pdim,
            c0,
        }
    }

    pub fn constant(c0: f64) -> Self {
        CompFormula {
            kind: CompKind::CustomConstant,
            pdim: 1.0,
            c0,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.c0 > 0.0 && self.c0.is_finite()) {
            return Err(Error::config("c0", "must be positive"));
        }
        if !(self.pdim > 0.0 && self.pdim.is_finite()) {
            return Err(Error::config("pdim", "must be positive"));
        }
        Ok(())
    }
}

/// `comp(F, delta, n, K)`. `K` is accepted for interface completeness; the
/// shipped formulas do not depend on it.
pub fn comp_value(f: &CompFormula, n: f64, delta: f64, k: usize) -> Result<f64> {
    if !(delta > 0.0 && delta < 1.0) {
        return Err(Error::invalid(format!("delta must lie in (0, 1), got {delta}")));
    }
    if !(n >= 1.0) || k < 2 {
        return Err(Error::invalid("comp needs n >= 1 and K >= 2"));
    }
    Ok(match f.kind {
        CompKind::PdimLog => f.c0 * f.pdim * n.max(2.0).ln() * (1.0 / delta).ln(),
        CompKind::CustomConstant => f.c0,
    })
}

/// A weighted example with a (possibly soft) target distribution. Hard labels
/// are one-hot targets; exact conditional expectations use `eta(x)`.
#[derive(Debug, Clone, PartialEq)]
pub struct SoftExample {
    pub x: Input,
    pub target: Vec<f64>,
    pub weight: f64,
}

impl SoftExample {
    pub fn hard(x: Input, y: usize, k: usize) -> Self {
        let mut target = vec![0.0; k];
        target[y] = 1.0;
        SoftExample {
            x,
            target,
            weight: 1.0,
        }
    }
}

/// What the oracle minimizes over.
#[derive(Debug, Clone, PartialEq)]
pub enum Design {
    Examples(Vec<SoftExample>),
    /// Population moments for the binary squared objective
    /// `w^T sigma w / 4 - b.w - 1/4` with `sigma = E[x x^T]`,
    /// `b = E[(eta_1(x) - 1/2) x]`.
    Moments { sigma: DMatrix<f64>, b: DVector<f64> },
}

#[derive(Debug, Clone, PartialEq)]
pub struct FitResult {
    pub params: Params,
    pub converged: bool,
    pub iterations: usize,
    pub objective: f64,
    /// Objective after every accepted iterate, starting from the initial point.
    pub objective_trace: Vec<f64>,
}

/// Fit on hard-labelled data.
pub fn fit(
    cls: &ClassSpec,
    spec: &SurrogateSpec,
    sample: &[(Input, usize)],
    cfg: &OracleConfig,
) -> Result<FitResult> {
    if sample.is_empty() {
        return Err(Error::invalid("oracle needs a non-empty sample"));
    }
    let mut ex = Vec::with_capacity(sample.len());
    for (x, y) in sample {
        if *y >= cls.k {
            return Err(Error::invalid(format!("label {y} out of range")));
        }
        ex.push(SoftExample::hard(x.clone(), *y, cls.k));
    }
    fit_design(cls, spec, &Design::Examples(ex), cfg, None)
}

/// Fit on an arbitrary design, optionally warm-started.
pub fn fit_design(
    cls: &ClassSpec,
    spec: &SurrogateSpec,
    design: &Design,
    cfg: &OracleConfig,
    init: Option<&Params>,
) -> Result<FitResult> {
    cls.validate()?;
    cfg.validate().map_err(|e| Error::invalid(e.to_string()))?;
    check_pairing(cls, spec)?;
    let start = match init {
        Some(p) if p.theta.len() == cls.param_dim() => cls.project_raw(&p.theta),
        _ => vec![0.0; cls.param_dim()],
    };
    let objective = Objective::new(cls, spec, design)?;
    Ok(projected_descent(cls, &objective, start, cfg))
}

pub(crate) fn check_pairing(cls: &ClassSpec, spec: &SurrogateSpec) -> Result<()> {
    if spec.kind == SurrogateKind::Squared && cls.kind != ClassKind::BinaryBallLinear {
        return Err(Error::invalid(
            "the squared surrogate needs simplex-valued scores; use binary_ball_linear",
        ));
    }
    Ok(())
}

enum Objective<'a> {
    Quadratic {
        sigma: DMatrix<f64>,
        b: DVector<f64>,
    },
    Sample {
        cls: &'a ClassSpec,
        spec: &'a SurrogateSpec,
        ex: &'a [SoftExample],
        total_weight: f64,
    },
}

impl<'a> Objective<'a> {
    fn new(cls: &'a ClassSpec, spec: &'a SurrogateSpec, design: &'a Design) -> Result<Self> {
        let binary_sq =
            spec.kind == SurrogateKind::Squared && cls.kind == ClassKind::BinaryBallLinear;
        match design {
            Design::Moments { sigma, b } => {
                if !binary_sq {
                    return Err(Error::invalid(
                        "moment designs are only defined for the binary squared objective",
                    ));
                }
                if sigma.nrows() != cls.d || sigma.ncols() != cls.d || b.len() != cls.d {
                    return Err(Error::invalid("moment design has the wrong dimension"));
                }
                Ok(Objective::Quadratic {
                    sigma: sigma.clone(),
                    b: b.clone(),
                })
            }
            Design::Examples(ex) => {
                validate_examples(cls, ex)?;
                let total_weight: f64 = ex.iter().map(|e| e.weight).sum();
                if binary_sq {
                    let (sigma, b) = binary_moments(cls.d, ex, total_weight);
                    Ok(Objective::Quadratic { sigma, b })
                } else {
                    Ok(Objective::Sample {
                        cls,
                        spec,
                        ex,
                        total_weight,
                    })
                }
            }
        }
    }

    fn value(&self, theta: &[f64]) -> f64 {
        match self {
            Objective::Quadratic { sigma, b } => {
                let w = DVector::from_column_slice(theta);
                0.25 * (w.transpose() * sigma * &w)[(0, 0)] - b.dot(&w) - 0.25
            }
            Objective::Sample {
                cls,
                spec,
                ex,
                total_weight,
            } => {
                ex.iter()
                    .map(|e| e.weight * spec.expected_loss_raw(&cls.eval_raw(theta, &e.x), &e.target))
                    .sum::<f64>()
                    / total_weight
            }
        }
    }

    fn gradient(&self, theta: &[f64]) -> Vec<f64> {
        match self {
            Objective::Quadratic { sigma, b } => {
                let w = DVector::from_column_slice(theta);
                let g = sigma * &w * 0.5 - b;
                g.as_slice().to_vec()
            }
            Objective::Sample {
                cls,
                spec,
                ex,
                total_weight,
            } => {
                let mut g = vec![0.0; theta.len()];
                for e in ex.iter() {
                    let v = cls.eval_raw(theta, &e.x);
                    let mut r = spec.gradient_raw(&v);
                    for (ri, ti) in r.iter_mut().zip(&e.target) {
                        *ri -= ti;
                    }
                    cls.jac_transpose_add(&e.x, &r, e.weight / total_weight, &mut g);
                }
                g
            }
        }
    }
}

fn validate_examples(cls: &ClassSpec, ex: &[SoftExample]) -> Result<()> {
    if ex.is_empty() {
        return Err(Error::invalid("oracle needs a non-empty sample"));
    }
    for e in ex {
        if e.x.len() != cls.d || e.target.len() != cls.k {
            return Err(Error::invalid("example shape does not match the class"));
        }
        if !(e.weight >= 0.0 && e.weight.is_finite()) {
            return Err(Error::invalid("example weights must be finite and nonnegative"));
        }
    }
    if ex.iter().map(|e| e.weight).sum::<f64>() <= 0.0 {
        return Err(Error::invalid("example weights sum to zero"));
    }
    Ok(())
}

/// Normalized `(sigma, b)` of the binary squared objective for a weighted sample.
pub(crate) fn binary_moments(d: usize, ex: &[SoftExample], total_weight: f64) -> (DMatrix<f64>, DVector<f64>) {
    let mut sigma = DMatrix::zeros(d, d);
    let mut b = DVector::zeros(d);
    for e in ex {
        let w = e.weight / total_weight;
        let t = e.target[0] - 0.5;
        for i in 0..d {
            b[i] += w * t * e.x[i];
            for j in i..d {
                sigma[(i, j)] += w * e.x[i] * e.x[j];
            }
        }
    }
    for i in 0..d {
        for j in 0..i {
            sigma[(i, j)] = sigma[(j, i)];
        }
    }
    (sigma, b)
}

fn projected_descent(
    cls: &ClassSpec,
    obj: &Objective<'_>,
    start: Vec<f64>,
    cfg: &OracleConfig,
) -> FitResult {
    let mut theta = start;
    let mut f = obj.value(&theta);
    let mut g = obj.gradient(&theta);
    let mut step = cfg.step_size;
    let mut trace = vec![f];
    let mut best = (f, theta.clone());
    let mut converged = false;
    let mut iters = 0;
    while iters < cfg.max_iters {
        iters += 1;
        let (cand, f_cand, used_step) = match cfg.step_rule {
            StepRule::Fixed => {
                let cand = cls.project_raw(&sub_scaled(&theta, &g, step));
                let fc = obj.value(&cand);
                (cand, fc, step)
            }
            StepRule::Backtracking => {
                let mut t = step;
                loop {
                    let cand = cls.project_raw(&sub_scaled(&theta, &g, t));
                    let delta: Vec<f64> = cand.iter().zip(&theta).map(|(a, b)| a - b).collect();
                    let fc = obj.value(&cand);
                    let model = f + dot(&g, &delta) + dot(&delta, &delta) / (2.0 * t);
                    if (fc <= model && fc <= f) || t < 1e-18 {
                        break (cand, fc, t);
                    }
                    t *= 0.5;
                }
            }
        };
        let delta: Vec<f64> = cand.iter().zip(&theta).map(|(a, b)| a - b).collect();
        let mapping = norm(&delta) / used_step;
        if cfg.step_rule == StepRule::Backtracking && f_cand > f {
            // line search stalled without progress
            converged = mapping < cfg.grad_tol;
            break;
        }
        theta = cand;
        f = f_cand;
        trace.push(f);
        if f < best.0 {
            best = (f, theta.clone());
        }
        if mapping < cfg.grad_tol {
            converged = true;
            break;
        }
        g = obj.gradient(&theta);
        if cfg.step_rule == StepRule::Backtracking {
            step = (used_step * 2.0).min(1e8);
        }
    }
    let (objective, theta) = if cfg.step_rule == StepRule::Fixed {
        best
    } else {
        (f, theta)
    };
    if !converged {
        log::debug!("oracle stopped after {iters} iterations without meeting grad_tol");
    }
    FitResult {
        params: Params::new(theta),
        converged,
        iterations: iters,
        objective,
        objective_trace: trace,
    }
}

fn sub_scaled(a: &[f64], g: &[f64], t: f64) -> Vec<f64> {
    a.iter().zip(g).map(|(x, y)| x - t * y).collect()
}

/// Weighted mean surrogate risk of `theta` on a design.
pub fn empirical_risk(cls: &ClassSpec, spec: &SurrogateSpec, theta: &[f64], design: &Design) -> Result<f64> {
    check_pairing(cls, spec)?;
    Ok(Objective::new(cls, spec, design)?.value(theta))
}

/// A concrete scoring function: a member of a linear class or of a
/// tabulated class.
#[derive(Debug, Clone, PartialEq)]
pub enum Predictor {
    Linear { cls: ClassSpec, params: Params },
    Finite { class: FiniteClass, member: usize },
}

impl Predictor {
    pub fn linear(cls: &ClassSpec, params: Params) -> Self {
        Predictor::Linear {
            cls: cls.clone(),
            params,
        }
    }

    pub fn scores(&self, x: &[f64]) -> Result<Vec<f64>> {
        match self {
            Predictor::Linear { cls, params } => Ok(cls.evaluate(params, x)?.into_vec()),
            Predictor::Finite { class, member } => class.scores(*member, x),
        }
    }

    pub fn classify(&self, spec: &SurrogateSpec, x: &[f64]) -> Result<usize> {
        let s = crate::surrogate::ScoreVector::new(self.scores(x)?)?;
        spec.classify(&s)
    }
}

/// The benchmark class `F` against which excess risks are measured.
#[derive(Debug, Clone, PartialEq)]
pub enum Benchmark {
    Linear(ClassSpec),
    Finite(FiniteClass),
}

impl Benchmark {
    /// Best-in-class member for the design.
    pub fn best_in_class(
        &self,
        spec: &SurrogateSpec,
        design: &Design,
        cfg: &OracleConfig,
    ) -> Result<(Predictor, bool)> {
        match self {
            Benchmark::Linear(cls) => {
                let r = fit_design(cls, spec, design, cfg, None)?;
                Ok((Predictor::linear(cls, r.params), r.converged))
            }
            Benchmark::Finite(class) => {
                let ex = match design {
                    Design::Examples(ex) => ex,
                    Design::Moments { .. } => {
                        return Err(Error::invalid("finite classes need an example design"))
                    }
                };
                let mut best: Option<(f64, usize)> = None;
                for m in 0..class.members.len() {
                    let mut risk = 0.0;
                    for e in ex {
                        risk += e.weight * spec.expected_loss_raw(&class.scores(m, &e.x)?, &e.target);
                    }
                    if best.is_none_or(|(r, _)| risk < r) {
                        best = Some((risk, m));
                    }
                }
                let (_, member) = best.expect("finite class has members");
                Ok((
                    Predictor::Finite {
                        class: class.clone(),
                        member,
                    },
                    true,
                ))
            }
        }
    }
}

/// A Monte-Carlo or exact estimate with its standard error (0 when exact).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Estimate {
    pub value: f64,
    pub stderr: f64,
}

impl Estimate {
    pub fn exact(value: f64) -> Self {
        Estimate { value, stderr: 0.0 }
    }

    /// Sample mean with its standard error.
    pub fn from_samples(values: &[f64]) -> Self {
        let n = values.len() as f64;
        let mean = values.iter().sum::<f64>() / n;
        if values.len() < 2 {
            return Estimate {
                value: mean,
                stderr: 0.0,
            };
        }
        let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0);
        Estimate {
            value: mean,
            stderr: (var / n).sqrt(),
        }
    }
}

/// Excess surrogate risk `E_Q[l(f)] - E_Q[l(f*_Q)]` over `D_Q`.
///
/// Finite-support instances and population-moment designs are evaluated by
/// exact summation. Otherwise the comparator is fitted on `mc` fresh draws
/// from `D_Q` and both functions are scored on an independent set of `mc`
/// draws, using `eta(x)` in place of sampled labels.
#[allow(clippy::too_many_arguments)]
pub fn excess_surrogate_risk(
    bench: &Benchmark,
    spec: &SurrogateSpec,
    f: &Predictor,
    inst: &InstanceSpec,
    region: &QueryRegion,
    mc: usize,
    cfg: &OracleConfig,
    seed: u64,
) -> Result<Estimate> {
    if mc == 0 {
        return Err(Error::invalid("mc_samples must be at least 1"));
    }
    let comparator_design = inst.region_design(spec, region, mc, seed)?;
    let (fstar, _) = bench.best_in_class(spec, &comparator_design, cfg)?;
    if let (Design::Moments { .. }, Predictor::Linear { cls, params }, Predictor::Linear { params: ps, .. }) =
        (&comparator_design, f, &fstar)
    {
        let obj = Objective::new(cls, spec, &comparator_design)?;
        return Ok(Estimate::exact(obj.value(&params.theta) - obj.value(&ps.theta)));
    }
    let eval: Vec<SoftExample> = match inst.support() {
        Some(_) => match comparator_design {
            Design::Examples(ex) => ex,
            Design::Moments { .. } => unreachable!("finite supports yield example designs"),
        },
        None => inst.region_soft_sample(region, mc, rng::substream(seed, rng::STREAM_EVAL, 0))?,
    };
    let diffs: Result<Vec<(f64, f64)>> = eval
        .par_iter()
        .map(|e| {
            let a = spec.expected_loss_raw(&f.scores(&e.x)?, &e.target);
            let b = spec.expected_loss_raw(&fstar.scores(&e.x)?, &e.target);
            Ok((e.weight, a - b))
        })
        .collect();
    let diffs = diffs?;
    if inst.support().is_some() {
        let total: f64 = diffs.iter().map(|(w, _)| w).sum();
        Ok(Estimate::exact(
            diffs.iter().map(|(w, v)| w * v).sum::<f64>() / total,
        ))
    } else {
        let v: Vec<f64> = diffs.into_iter().map(|(_, v)| v).collect();
        Ok(Estimate::from_samples(&v))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn grid_min_1d(sample: &[(Input, usize)]) -> (f64, f64) {
        let cls = ClassSpec::binary(1);
        let ex: Vec<SoftExample> = sample.iter().map(|(x, y)| SoftExample::hard(x.clone(), *y, 2)).collect();
        let design = Design::Examples(ex);
        let mut best = (f64::INFINITY, 0.0);
        for i in 0..=10_000 {
            let w = -1.0 + 2.0 * i as f64 / 10_000.0;
            // direct loss evaluation, independent of the quadratic reduction
            let risk: f64 = match &design {
                Design::Examples(ex) => ex
                    .iter()
                    .map(|e| {
                        let v = cls.eval_raw(&[w], &e.x);
                        0.5 * (v[0] * v[0] + v[1] * v[1]) - v[0] * e.target[0] - v[1] * e.target[1]
                    })
                    .sum::<f64>()
                    / ex.len() as f64,
                _ => unreachable!(),
            };
            if risk < best.0 {
                best = (risk, w);
            }
        }
        best
    }

    #[test]
    fn fit_examples_against_grid() {
        let cls = ClassSpec::binary(1);
        let spec = SurrogateSpec::squared();
        let cfg = OracleConfig::default();
        let s1: Vec<(Input, usize)> = (0..100).map(|_| (vec![1.0], 0)).collect();
        let r = fit(&cls, &spec, &s1, &cfg).unwrap();
        let (_, wg) = grid_min_1d(&s1);
        assert!((r.params.theta[0] - 1.0).abs() < 1e-3);
        assert!((r.params.theta[0] - wg).abs() < 1e-3);
        assert!(r.converged);

        let mut s2: Vec<(Input, usize)> = (0..50).map(|_| (vec![1.0], 0)).collect();
        s2.extend((0..50).map(|_| (vec![1.0], 1)));
        let r = fit(&cls, &spec, &s2, &cfg).unwrap();
        let (_, wg) = grid_min_1d(&s2);
        assert!(r.params.theta[0].abs() < 1e-3 && wg.abs() < 1e-3);
        let f1 = cls.evaluate(&r.params, &[1.0]).unwrap().as_slice()[0];
        assert!((f1 - 0.5).abs() < 1e-3);
        assert!(fit(&cls, &spec, &[], &cfg).is_err());
    }

    #[test]
    fn comp_examples() {
        let e = std::f64::consts::E;
        let f = CompFormula::pdim_log(4.0, 1.0);
        assert!((comp_value(&f, e, 1.0 / e, 2).unwrap() - 4.0).abs() < 1e-12);
        assert!((comp_value(&f, e * e, 1.0 / e, 2).unwrap() - 8.0).abs() < 1e-12);
        assert_eq!(comp_value(&CompFormula::constant(7.0), 123.0, 0.1, 3).unwrap(), 7.0);
        assert!(comp_value(&f, 10.0, 1.5, 2).is_err());
        assert!(comp_value(&f, 10.0, 0.0, 2).is_err());
    }

    #[test]
    fn quadratic_and_sample_routes_agree() {
        // the binary squared objective is also available through the generic path
        let cls = ClassSpec::binary(2);
        let spec = SurrogateSpec::squared();
        let ex = vec![
            SoftExample { x: vec![0.6, 0.1], target: vec![0.9, 0.1], weight: 1.0 },
            SoftExample { x: vec![-0.2, 0.7], target: vec![0.3, 0.7], weight: 2.0 },
            SoftExample { x: vec![0.0, -0.5], target: vec![0.5, 0.5], weight: 0.5 },
        ];
        let design = Design::Examples(ex.clone());
        let quad = Objective::new(&cls, &spec, &design).unwrap();
        let generic = Objective::Sample { cls: &cls, spec: &spec, ex: &ex, total_weight: 3.5 };
        for theta in [[0.0, 0.0], [0.3, -0.4], [0.7, 0.7]] {
            assert!((quad.value(&theta) - generic.value(&theta)).abs() < 1e-12);
            let (a, b) = (quad.gradient(&theta), generic.gradient(&theta));
            assert!((a[0] - b[0]).abs() < 1e-12 && (a[1] - b[1]).abs() < 1e-12);
        }
    }

    #[test]
    fn logistic_multiclass_fit_converges() {
        let cls = ClassSpec::multiclass(2, 3, 2.0);
        let spec = SurrogateSpec::logistic_for_score_bound(2.0, 3).unwrap();
        let sample: Vec<(Input, usize)> = (0..60)
            .map(|i| {
                let a = i as f64 * 0.37;
                (vec![0.8 * a.cos(), 0.8 * a.sin()], i % 3)
            })
            .collect();
        let r = fit(&cls, &spec, &sample, &OracleConfig::default()).unwrap();
        assert!(r.converged);
        assert!(cls.is_feasible(&r.params));
    }

    #[test]
    fn squared_pairing_is_checked() {
        let cls = ClassSpec::multiclass(2, 3, 1.0);
        let s = vec![(vec![0.1, 0.2], 0)];
        assert!(fit(&cls, &SurrogateSpec::squared(), &s, &OracleConfig::default()).is_err());
    }

    fn arb_problem() -> impl Strategy<Value = (usize, Vec<(Vec<f64>, usize)>)> {
        (1usize..=2).prop_flat_map(|d| {
            (
                Just(d),
                proptest::collection::vec(
                    (proptest::collection::vec(-0.7f64..0.7, d), 0usize..2),
                    1..50,
                ),
            )
        })
    }

    fn grid_min(d: usize, sample: &[(Vec<f64>, usize)]) -> f64 {
        let cls = ClassSpec::binary(d);
        let n = if d == 1 { 10_000 } else { 100 };
        let mut best = f64::INFINITY;
        let pts: Vec<Vec<f64>> = if d == 1 {
            (0..=n).map(|i| vec![-1.0 + 2.0 * i as f64 / n as f64]).collect()
        } else {
            let mut v = Vec::new();
            for i in 0..=n {
                for j in 0..=n {
                    let w = vec![-1.0 + 2.0 * i as f64 / n as f64, -1.0 + 2.0 * j as f64 / n as f64];
                    if norm(&w) <= 1.0 {
                        v.push(w);
                    }
                }
            }
            v
        };
        for w in pts {
            let risk: f64 = sample
                .iter()
                .map(|(x, y)| {
                    let f = cls.eval_raw(&w, x);
                    let e = if *y == 0 { [1.0, 0.0] } else { [0.0, 1.0] };
                    0.5 * ((f[0] - e[0]).powi(2) + (f[1] - e[1]).powi(2)) - 0.5
                })
                .sum::<f64>()
                / sample.len() as f64;
            best = best.min(risk);
        }
        best
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(50))]

        #[test]
        fn oracle_matches_grid_search((d, sample) in arb_problem()) {
            let cls = ClassSpec::binary(d);
            let spec = SurrogateSpec::squared();
            let r = fit(&cls, &spec, &sample, &OracleConfig::default()).unwrap();
            let g = grid_min(d, &sample);
            prop_assert!(r.objective <= g + 1e-4, "fit {} grid {}", r.objective, g);
            prop_assert!(cls.is_feasible(&r.params));
        }

        #[test]
        fn backtracking_is_monotone(
            xs in proptest::collection::vec((proptest::collection::vec(-1.0f64..1.0, 2), 0usize..3), 3..30),
        ) {
            let cls = ClassSpec::multiclass(2, 3, 3.0);
            let spec = SurrogateSpec::logistic_for_score_bound(3.0, 3).unwrap();
            let sample: Vec<(Input, usize)> = xs.into_iter().map(|(x, y)| (x.iter().map(|v| v * 0.5).collect(), y)).collect();
            let cfg = OracleConfig { max_iters: 300, ..OracleConfig::default() };
            let r = fit(&cls, &spec, &sample, &cfg).unwrap();
            for w in r.objective_trace.windows(2) {
                prop_assert!(w[1] <= w[0] + 1e-15);
            }
        }
    }
}
