//! Active learning in epochs.
//!
//! Epoch `m` covers rounds `tau_{m-1} + 1 ..= tau_m` with `tau_m = 2^m - 1`.
//! A point is queried iff every earlier version space disagrees at it
//! (`q_{m-1}(x) = 1`). At the end of the epoch the oracle is fitted on the
//! queried sample, and the version space
//! `F_m = {f : sum_t |f(x_t) - f_hat_m(x_t)|^2 <= B}` over the queried points
//! becomes the next filter. Prediction uses the earliest epoch whose version
//! space is in consensus at `x`.

use std::time::Instant;

use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::distributions::InstanceSpec;
use crate::error::{Error, Result};
use crate::funcclass::{ClassSpec, Input, Params};
use crate::oracle::{comp_value, fit_design, CompFormula, Design, Estimate, OracleConfig, SoftExample};
use crate::rng::{self, StreamRng};
use crate::surrogate::{ScoreVector, SurrogateSpec};
use crate::version_space::{DisagreeConfig, VersionSpace};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LearnerConfig {
    pub n: usize,
    #[serde(default = "default_delta")]
    pub delta: f64,
    #[serde(default = "default_b_constant")]
    pub b_constant: f64,
    /// `None` uses `pdim_log` with `pdim` the number of free parameters.
    #[serde(default)]
    pub comp: Option<CompFormula>,
    #[serde(default)]
    pub oracle_cfg: OracleConfig,
    #[serde(default)]
    pub disagree_cfg: DisagreeConfig,
    #[serde(default)]
    pub seed: u64,
}

fn default_delta() -> f64 {
    0.05
}

fn default_b_constant() -> f64 {
    1.0
}

impl LearnerConfig {
    pub fn new(n: usize) -> Self {
        LearnerConfig {
            n,
            delta: default_delta(),
            b_constant: default_b_constant(),
            comp: None,
            oracle_cfg: OracleConfig::default(),
            disagree_cfg: DisagreeConfig::default(),
            seed: 0,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.n < 3 {
            return Err(Error::config("n", "must be at least 3 (one full epoch)"));
        }
        if !(self.delta > 0.0 && self.delta < 1.0) {
            return Err(Error::config("delta", format!("must lie in (0, 1), got {}", self.delta)));
        }
        if !(self.b_constant > 0.0 && self.b_constant.is_finite()) {
            return Err(Error::config("b_constant", "must be positive"));
        }
        if let Some(c) = &self.comp {
            c.validate()?;
        }
        self.oracle_cfg.validate()?;
        self.disagree_cfg.validate()
    }

    pub fn comp_formula(&self, cls: &ClassSpec) -> CompFormula {
        self.comp
            .clone()
            .unwrap_or_else(|| CompFormula::pdim_log(cls.param_dim() as f64, 1.0))
    }

    /// `B = C ln^3(n) comp(F, delta, n, K)`.
    pub fn radius_b(&self, cls: &ClassSpec) -> Result<f64> {
        let n = self.n as f64;
        Ok(self.b_constant * n.ln().powi(3) * comp_value(&self.comp_formula(cls), n, self.delta, cls.k)?)
    }
}

/// Number of epochs `M = floor(log2(n + 1))`, so that `tau_M <= n`.
pub fn epoch_count(n: usize) -> usize {
    let mut m = 0;
    while tau(m + 1) <= n {
        m += 1;
    }
    m
}

/// `tau_m = 2^m - 1`.
pub fn tau(m: usize) -> usize {
    (1usize << m) - 1
}

/// Inclusive 1-based round range of epoch `m`.
pub fn epoch_range(m: usize) -> (usize, usize) {
    (tau(m - 1) + 1, tau(m))
}

#[derive(Debug, Clone, PartialEq)]
pub struct EpochRecord {
    pub index: usize,
    pub fitted: Params,
    pub vspace: VersionSpace,
    pub queried_count: usize,
    pub epoch_range: (usize, usize),
    /// `false` when the epoch queried nothing and its model was carried over.
    pub fresh: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpochTrace {
    pub index: usize,
    pub start: usize,
    pub end: usize,
    pub queried: usize,
    pub radius_b: f64,
    pub converged: bool,
    pub iterations: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunTrace {
    pub epochs: Vec<EpochTrace>,
    pub total_queries: usize,
    pub wall_ms: u64,
    pub seed: u64,
}

impl RunTrace {
    /// Everything except the wall clock.
    pub fn same_run(&self, other: &RunTrace) -> bool {
        self.epochs == other.epochs && self.total_queries == other.total_queries && self.seed == other.seed
    }
}

/// A failed run together with the trace recorded up to the failure.
#[derive(Debug, Clone, PartialEq)]
pub struct RunFailure {
    pub error: Error,
    pub partial: RunTrace,
}

impl std::fmt::Display for RunFailure {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(
            f,
            "{} (after {} epochs, {} queries)",
            self.error,
            self.partial.epochs.len(),
            self.partial.total_queries
        )
    }
}

impl std::error::Error for RunFailure {}

impl From<RunFailure> for Error {
    fn from(f: RunFailure) -> Self {
        f.error
    }
}

/// The improper output of the learner.
#[derive(Debug, Clone, PartialEq)]
pub struct StitchedClassifier {
    pub epochs: Vec<EpochRecord>,
    pub spec: SurrogateSpec,
    pub cls: ClassSpec,
}

impl StitchedClassifier {
    pub fn new(epochs: Vec<EpochRecord>, spec: SurrogateSpec, cls: ClassSpec) -> Result<Self> {
        if epochs.is_empty() {
            return Err(Error::invalid("a stitched classifier needs at least one epoch"));
        }
        if epochs.windows(2).any(|w| w[0].index >= w[1].index) {
            return Err(Error::invalid("epochs must be ordered by index"));
        }
        Ok(StitchedClassifier { epochs, spec, cls })
    }

    pub fn final_params(&self) -> &Params {
        &self.epochs.last().expect("non-empty").fitted
    }

    /// Label and the 1-based epoch that produced it (`None` for the fallback
    /// to the last epoch).
    pub fn predict_with_source(&self, x: &[f64], cfg: &DisagreeConfig) -> (usize, Option<usize>) {
        for e in &self.epochs {
            if !e.vspace.disagrees_at(x, &self.spec, cfg) {
                return (self.label_of(&e.fitted, x), Some(e.index));
            }
        }
        (self.label_of(self.final_params(), x), None)
    }

    fn label_of(&self, p: &Params, x: &[f64]) -> usize {
        let v = ScoreVector::from_vec_unchecked(self.cls.eval_raw(&p.theta, x));
        self.spec.classify(&v).unwrap_or_else(|_| crate::surrogate::argmax(v.as_slice()))
    }

    /// `q_m(x)`: every one of the first `m` epochs disagrees at `x`.
    pub fn query_indicator(&self, m: usize, x: &[f64], cfg: &DisagreeConfig) -> bool {
        self.epochs
            .iter()
            .take(m)
            .all(|e| e.vspace.disagrees_at(x, &self.spec, cfg))
    }
}

/// Earliest-consensus prediction.
pub fn predict(sc: &StitchedClassifier, x: &[f64], cfg: &DisagreeConfig) -> usize {
    sc.predict_with_source(x, cfg).0
}

/// Monte-Carlo estimate of `P[q_m(x) = 1]` under the marginal.
pub fn query_mass(
    sc: &StitchedClassifier,
    m: usize,
    mc: usize,
    inst: &InstanceSpec,
    cfg: &DisagreeConfig,
    seed: u64,
) -> Result<Estimate> {
    if m > sc.epochs.len() {
        return Err(Error::invalid(format!("epoch {m} exceeds {}", sc.epochs.len())));
    }
    if m == 0 {
        return Ok(Estimate::exact(1.0));
    }
    if let Some(atoms) = inst.support() {
        // collected first so the summation order does not depend on threads
        let hit: Vec<bool> = atoms.par_iter().map(|(x, _)| sc.query_indicator(m, x, cfg)).collect();
        let mass = atoms.iter().zip(hit).filter(|(_, h)| *h).map(|((_, w), _)| w).sum();
        return Ok(Estimate::exact(mass));
    }
    if mc == 0 {
        return Err(Error::invalid("mc must be at least 1"));
    }
    let xs = inst.sample_x(mc, &mut rng::stream(seed, rng::STREAM_EVAL));
    let hits: Vec<f64> = xs
        .par_iter()
        .map(|x| sc.query_indicator(m, x, cfg) as u8 as f64)
        .collect();
    Ok(Estimate::from_samples(&hits))
}

/// Per-round override of the query condition: `Some(q)` replaces
/// `q_{m-1}(x)` for epoch `m`.
pub type QueryHook<'a> = dyn Fn(usize, &[f64]) -> Option<bool> + Sync + 'a;

/// Label oracle sampling `y ~ eta(x)` from the run's label stream.
pub fn simulated_labels(inst: &InstanceSpec, seed: u64) -> impl FnMut(&[f64]) -> Result<usize> + '_ {
    let mut r: StreamRng = rng::stream(seed, rng::STREAM_LABELS);
    move |x: &[f64]| {
        let eta = inst.eta(x)?;
        let u: f64 = r.random();
        let mut acc = 0.0;
        for (k, p) in eta.as_slice().iter().enumerate() {
            acc += p;
            if u < acc {
                return Ok(k);
            }
        }
        Ok(eta.len() - 1)
    }
}

/// Seed shared by the marginal and label streams of a run.
pub fn run_seed(inst: &InstanceSpec, cfg: &LearnerConfig) -> u64 {
    rng::splitmix64(inst.seed) ^ cfg.seed
}

pub fn run(
    inst: &InstanceSpec,
    cls: &ClassSpec,
    spec: &SurrogateSpec,
    cfg: &LearnerConfig,
    label_oracle: &mut dyn FnMut(&[f64]) -> Result<usize>,
) -> std::result::Result<(StitchedClassifier, RunTrace), RunFailure> {
    run_with_hook(inst, cls, spec, cfg, label_oracle, None)
}

pub fn run_with_hook(
    inst: &InstanceSpec,
    cls: &ClassSpec,
    spec: &SurrogateSpec,
    cfg: &LearnerConfig,
    label_oracle: &mut dyn FnMut(&[f64]) -> Result<usize>,
    hook: Option<&QueryHook<'_>>,
) -> std::result::Result<(StitchedClassifier, RunTrace), RunFailure> {
    let started = Instant::now();
    let seed = run_seed(inst, cfg);
    let mut trace = RunTrace {
        epochs: Vec::new(),
        total_queries: 0,
        wall_ms: 0,
        seed,
    };
    let fail = |error: Error, trace: &RunTrace| RunFailure {
        error,
        partial: trace.clone(),
    };
    let setup = || -> Result<f64> {
        cfg.validate()?;
        inst.validate()?;
        cls.validate()?;
        spec.validate()?;
        crate::oracle::check_pairing(cls, spec)?;
        if cls.d != inst.d || cls.k != inst.k {
            return Err(Error::invalid("class and instance dimensions differ"));
        }
        cfg.radius_b(cls)
    };
    let b = setup().map_err(|e| fail(e, &trace))?;
    let dcfg = &cfg.disagree_cfg;
    let mut marginal = rng::stream(seed, rng::STREAM_MARGINAL);
    let mut epochs: Vec<EpochRecord> = Vec::new();

    for m in 1..=epoch_count(cfg.n) {
        let (start, end) = epoch_range(m);
        let xs: Vec<Input> = (start..=end).map(|_| inst.draw_x(&mut marginal)).collect();
        let query: Vec<bool> = xs
            .par_iter()
            .map(|x| match hook.and_then(|h| h(m, x)) {
                Some(q) => q,
                None => epochs.iter().all(|e| e.vspace.disagrees_at(x, spec, dcfg)),
            })
            .collect();
        let mut sample = Vec::new();
        for (x, q) in xs.into_iter().zip(query) {
            if !q {
                continue;
            }
            let y = label_oracle(&x).map_err(|e| fail(Error::Oracle(e.to_string()), &trace))?;
            trace.total_queries += 1;
            if y >= cls.k {
                return Err(fail(Error::Oracle(format!("label {y} out of range")), &trace));
            }
            sample.push(SoftExample::hard(x, y, cls.k));
        }
        let k_m = sample.len();
        let record = if sample.is_empty() {
            let (fitted, vspace) = match epochs.last() {
                Some(prev) => (prev.fitted.clone(), prev.vspace.clone()),
                None => {
                    let center = cls.zeros();
                    let vs = VersionSpace::new(cls, center.clone(), Vec::new(), b).map_err(|e| fail(e, &trace))?;
                    (center, vs)
                }
            };
            trace.epochs.push(EpochTrace {
                index: m,
                start,
                end,
                queried: 0,
                radius_b: vspace.radius_b,
                converged: true,
                iterations: 0,
            });
            EpochRecord {
                index: m,
                fitted,
                vspace,
                queried_count: 0,
                epoch_range: (start, end),
                fresh: false,
            }
        } else {
            let anchors: Vec<Input> = sample.iter().map(|e| e.x.clone()).collect();
            let warm = epochs.last().map(|e| &e.fitted);
            let fit = fit_design(cls, spec, &Design::Examples(sample), &cfg.oracle_cfg, warm)
                .map_err(|e| fail(e, &trace))?;
            if !fit.converged {
                log::info!("epoch {m}: oracle stopped after {} iterations", fit.iterations);
            }
            let vspace =
                VersionSpace::new(cls, fit.params.clone(), anchors, b).map_err(|e| fail(e, &trace))?;
            trace.epochs.push(EpochTrace {
                index: m,
                start,
                end,
                queried: k_m,
                radius_b: b,
                converged: fit.converged,
                iterations: fit.iterations,
            });
            EpochRecord {
                index: m,
                fitted: fit.params,
                vspace,
                queried_count: k_m,
                epoch_range: (start, end),
                fresh: true,
            }
        };
        log::debug!("epoch {m}: rounds {start}..={end}, queried {k_m}");
        epochs.push(record);
    }
    trace.wall_ms = started.elapsed().as_millis() as u64;
    let sc = StitchedClassifier::new(epochs, *spec, cls.clone()).map_err(|e| fail(e, &trace))?;
    Ok((sc, trace))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn epoch_schedule_for_seven_rounds() {
        assert_eq!(epoch_count(7), 3);
        let ranges: Vec<_> = (1..=3).map(epoch_range).collect();
        assert_eq!(ranges, vec![(1, 1), (2, 3), (4, 7)]);
    }

    #[test]
    fn epoch_count_never_overruns_budget() {
        for n in 3..5000 {
            let m = epoch_count(n);
            assert!(tau(m) <= n && tau(m + 1) > n, "n={n}");
        }
    }

    #[test]
    fn rejects_short_budgets_and_bad_delta() {
        assert!(matches!(LearnerConfig::new(2).validate(), Err(Error::Config { field, .. }) if field == "n"));
        let mut c = LearnerConfig::new(7);
        c.delta = 1.5;
        assert!(matches!(c.validate(), Err(Error::Config { field, .. }) if field == "delta"));
    }

    #[test]
    fn radius_follows_log_cubed_comp() {
        let cls = ClassSpec::binary(2);
        let mut c = LearnerConfig::new(100);
        c.comp = Some(CompFormula::constant(2.0));
        c.b_constant = 0.5;
        let want = 0.5 * 100f64.ln().powi(3) * 2.0;
        assert!((c.radius_b(&cls).unwrap() - want).abs() < 1e-9);
    }

    #[test]
    fn label_count_matches_oracle_calls() {
        let inst = InstanceSpec::example1(2);
        let cls = inst.default_class();
        let spec = SurrogateSpec::squared();
        let mut cfg = LearnerConfig::new(31);
        cfg.b_constant = 1e-3;
        let mut calls = 0usize;
        let mut sim = simulated_labels(&inst, 3);
        let mut oracle = |x: &[f64]| {
            calls += 1;
            sim(x)
        };
        let (sc, trace) = run(&inst, &cls, &spec, &cfg, &mut oracle).unwrap();
        assert_eq!(trace.total_queries, calls);
        assert_eq!(trace.total_queries, trace.epochs.iter().map(|e| e.queried).sum::<usize>());
        assert_eq!(sc.epochs.len(), 5);
        for e in &sc.epochs {
            assert!(e.vspace.contains(&e.fitted));
        }
    }

    #[test]
    fn empty_first_epoch_falls_back() {
        let inst = InstanceSpec::massart(1, 2, 0.5);
        let cls = inst.default_class();
        let spec = SurrogateSpec::squared();
        let cfg = LearnerConfig::new(15);
        let hook = |m: usize, _: &[f64]| if m == 1 { Some(false) } else { None };
        let mut sim = simulated_labels(&inst, 1);
        let (sc, trace) = run_with_hook(&inst, &cls, &spec, &cfg, &mut sim, Some(&hook)).unwrap();
        assert_eq!(trace.epochs[0].queried, 0);
        assert!(!sc.epochs[0].fresh);
        assert_eq!(sc.epochs[0].fitted, cls.zeros());
        assert_eq!(sc.epochs.len(), 4);
    }

    #[test]
    fn oracle_failure_keeps_partial_trace() {
        let inst = InstanceSpec::example1(2);
        let cls = inst.default_class();
        let spec = SurrogateSpec::squared();
        let cfg = LearnerConfig::new(15);
        let mut calls = 0;
        let mut oracle = |_: &[f64]| {
            calls += 1;
            if calls > 2 {
                Err(Error::Io("socket closed".into()))
            } else {
                Ok(0)
            }
        };
        let err = run(&inst, &cls, &spec, &cfg, &mut oracle).unwrap_err();
        assert!(matches!(err.error, Error::Oracle(_)));
        assert_eq!(err.partial.total_queries, 2);
    }
}
