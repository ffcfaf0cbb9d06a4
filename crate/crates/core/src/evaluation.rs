//! Risk estimators, passive baselines, excess-risk transfer checks,
//! disagreement-coefficient estimation and rate fitting.
//!
//! Every estimator sums exactly over the support when the instance has one,
//! and otherwise averages over draws from a dedicated evaluation stream.

use nalgebra::DMatrix;
use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::distributions::{InstanceSpec, QueryRegion};
use crate::error::{Error, Result};
use crate::funcclass::{norm, ClassKind, ClassSpec, Input, Params};
use crate::learner::simulated_labels;
use crate::oracle::{
    excess_surrogate_risk, fit_design, Benchmark, Design, Estimate, OracleConfig, Predictor, SoftExample,
};
use crate::projection::FeasibleSet;
use crate::rng;
use crate::surrogate::{gap, margin, ProbVector, SurrogateSpec};

/// Largest support summed exactly.
pub const EXACT_SUPPORT_LIMIT: usize = 10_000;
/// Points in the geometric grid used for `sup_{a in (gamma, 1]} a / psi(a)^2`.
pub const SUP_GRID_POINTS: usize = 1_000;
/// Constant in front of the surrogate term of the multiclass transfer bound.
pub const TRANSFER_CONSTANT: f64 = 4.0;

pub type Classifier<'a> = dyn Fn(&[f64]) -> usize + Sync + 'a;
pub type Psi<'a> = dyn Fn(f64) -> f64 + Sync + 'a;

/// Evaluation points with weights summing to one, and whether they are the
/// exact support.
fn eval_points(inst: &InstanceSpec, mc: usize, seed: u64) -> Result<(Vec<(Input, f64)>, bool)> {
    if let Some(atoms) = inst.support().filter(|a| a.len() <= EXACT_SUPPORT_LIMIT) {
        return Ok((atoms, true));
    }
    if mc == 0 {
        return Err(Error::invalid("mc must be at least 1"));
    }
    let w = 1.0 / mc as f64;
    let xs = inst.sample_x(mc, &mut rng::stream(seed, rng::STREAM_EVAL));
    Ok((xs.into_iter().map(|x| (x, w)).collect(), false))
}

fn estimate(values: &[f64], weights: &[f64], exact: bool) -> Estimate {
    if exact {
        Estimate::exact(values.iter().zip(weights).map(|(v, w)| v * w).sum())
    } else {
        Estimate::from_samples(values)
    }
}

/// `E_x[1{h(x) != bayes(x)} gap(eta(x), h(x))]`.
pub fn excess_class_risk(h: &Classifier<'_>, inst: &InstanceSpec, mc: usize, seed: u64) -> Result<Estimate> {
    let (pts, exact) = eval_points(inst, mc, seed)?;
    let vals: Result<Vec<f64>> = pts
        .par_iter()
        .map(|(x, _)| {
            let eta = ProbVector::new(inst.eta_raw(x))?;
            let c = h(x);
            if c >= inst.k {
                return Err(Error::invalid(format!("classifier returned label {c}")));
            }
            Ok(if c == eta.argmax() { 0.0 } else { gap(&eta, c)? })
        })
        .collect();
    let w: Vec<f64> = pts.iter().map(|p| p.1).collect();
    Ok(estimate(&vals?, &w, exact))
}

/// `E[1{h(x) != y}] - E[1{bayes(x) != y}]` with sampled labels.
pub fn excess_class_risk_direct(h: &Classifier<'_>, inst: &InstanceSpec, mc: usize, seed: u64) -> Result<Estimate> {
    if mc == 0 {
        return Err(Error::invalid("mc must be at least 1"));
    }
    let mut r = rng::stream(seed, rng::STREAM_EVAL);
    let mut labels = simulated_labels(inst, seed);
    let mut vals = Vec::with_capacity(mc);
    for _ in 0..mc {
        let x = inst.draw_x(&mut r);
        let y = labels(&x)?;
        let bayes = inst.bayes_classify(&x)?;
        vals.push((h(&x) != y) as u8 as f64 - (bayes != y) as u8 as f64);
    }
    Ok(Estimate::from_samples(&vals))
}

/// `P[margin(eta(x)) <= gamma]` for every `gamma` in the grid, on one set of
/// evaluation points.
pub fn low_margin_mass(inst: &InstanceSpec, gammas: &[f64], mc: usize, seed: u64) -> Result<Vec<Estimate>> {
    let (pts, exact) = eval_points(inst, mc, seed)?;
    let margins: Result<Vec<f64>> = pts.iter().map(|(x, _)| Ok(margin(&ProbVector::new(inst.eta_raw(x))?))).collect();
    let margins = margins?;
    let w: Vec<f64> = pts.iter().map(|p| p.1).collect();
    Ok(gammas
        .iter()
        .map(|g| {
            let v: Vec<f64> = margins.iter().map(|m| (*m <= *g) as u8 as f64).collect();
            estimate(&v, &w, exact)
        })
        .collect())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RiskReport {
    pub excess_class_risk: Estimate,
    pub excess_surrogate_risk: Estimate,
    pub n_used: usize,
    pub n_queries: usize,
}

impl RiskReport {
    /// Both risks are at least `-3` standard errors.
    pub fn is_consistent(&self) -> bool {
        [self.excess_class_risk, self.excess_surrogate_risk]
            .iter()
            .all(|e| e.value >= -3.0 * e.stderr - 1e-12)
    }
}

/// Shared settings of the evaluation estimators.
#[derive(Debug, Clone, PartialEq)]
pub struct EvalSettings {
    pub mc: usize,
    pub oracle_cfg: OracleConfig,
    pub seed: u64,
}

/// Excess classification risk of `h` and excess surrogate risk of `f`
/// against the benchmark on the full marginal.
pub fn risk_report(
    inst: &InstanceSpec,
    bench: &Benchmark,
    spec: &SurrogateSpec,
    f: &Predictor,
    h: &Classifier<'_>,
    ev: &EvalSettings,
) -> Result<(Estimate, Estimate)> {
    let class = excess_class_risk(h, inst, ev.mc, ev.seed)?;
    let sur = excess_surrogate_risk(bench, spec, f, inst, &QueryRegion::full(), ev.mc, &ev.oracle_cfg, ev.seed)?;
    Ok((class, sur))
}

/// Passive learning: the benchmark's empirical risk minimizer on
/// `n_labels` i.i.d. labelled draws.
pub fn passive_baseline(
    inst: &InstanceSpec,
    bench: &Benchmark,
    spec: &SurrogateSpec,
    n_labels: usize,
    ev: &EvalSettings,
    data_seed: u64,
) -> Result<(Predictor, RiskReport)> {
    if n_labels == 0 {
        return Err(Error::invalid("n_labels must be at least 1"));
    }
    let k = match bench {
        Benchmark::Linear(c) => c.k,
        Benchmark::Finite(_) => inst.k,
    };
    let xs = inst.sample_x(n_labels, &mut rng::stream(data_seed, rng::STREAM_MARGINAL));
    let mut labels = simulated_labels(inst, data_seed);
    let mut ex = Vec::with_capacity(n_labels);
    for x in xs {
        let y = labels(&x)?;
        ex.push(SoftExample::hard(x, y, k));
    }
    let (pred, _) = bench.best_in_class(spec, &Design::Examples(ex), &ev.oracle_cfg)?;
    let h = |x: &[f64]| pred.classify(spec, x).unwrap_or(0);
    let (class, sur) = risk_report(inst, bench, spec, &pred, &h, ev)?;
    Ok((
        pred,
        RiskReport {
            excess_class_risk: class,
            excess_surrogate_risk: sur,
            n_used: n_labels,
            n_queries: n_labels,
        },
    ))
}

/// `sup_{a in (gamma, 1]} a / psi(a)^2` on a geometric grid plus endpoints.
pub fn sup_ratio(psi: &Psi<'_>, gamma: f64) -> f64 {
    let lo = gamma.max(1e-12);
    if lo >= 1.0 {
        return f64::NEG_INFINITY;
    }
    let ratio = |a: f64| {
        let p = psi(a);
        if p <= 0.0 {
            f64::INFINITY
        } else {
            a / (p * p)
        }
    };
    let step = (1.0 / lo).ln() / (SUP_GRID_POINTS - 1) as f64;
    let mut best = ratio(1.0).max(ratio(lo * (1.0 + 1e-12)));
    for i in 0..SUP_GRID_POINTS {
        best = best.max(ratio((lo.ln() + step * i as f64).exp().clamp(lo, 1.0)));
    }
    best
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BoundRow {
    pub gamma: f64,
    pub rhs: f64,
    pub rhs_stderr: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PassiveBoundReport {
    pub lhs: Estimate,
    pub surrogate: Estimate,
    pub rows: Vec<BoundRow>,
    pub best_gamma: f64,
    pub best_rhs: f64,
    pub holds: bool,
}

/// Checks
/// `E_class(f) <= inf_gamma { 4 L/beta E_l(f, F) sup_{a>gamma} a/psi(a)^2 + gamma P[margin(eta) <= gamma] }`
/// with a `3` standard error allowance.
#[allow(clippy::too_many_arguments)]
pub fn check_passive_bound(
    f: &Predictor,
    inst: &InstanceSpec,
    bench: &Benchmark,
    spec: &SurrogateSpec,
    psi: &Psi<'_>,
    gamma_grid: &[f64],
    ev: &EvalSettings,
) -> Result<PassiveBoundReport> {
    if gamma_grid.is_empty() {
        return Err(Error::invalid("gamma grid is empty"));
    }
    let h = |x: &[f64]| f.classify(spec, x).unwrap_or(0);
    let (lhs, sur) = risk_report(inst, bench, spec, f, &h, ev)?;
    let noise = low_margin_mass(inst, gamma_grid, ev.mc, ev.seed)?;
    let lead = TRANSFER_CONSTANT * spec.l_phi / spec.beta_phi;
    let mut rows = Vec::with_capacity(gamma_grid.len());
    for (g, nm) in gamma_grid.iter().zip(&noise) {
        let s = sup_ratio(psi, *g);
        // a non-positive surrogate estimate times an infinite sup is vacuous
        let sur_term = if s.is_infinite() { f64::INFINITY } else { lead * sur.value.max(0.0) * s.max(0.0) };
        let se = ((lead * s.max(0.0) * sur.stderr).powi(2) + (g * nm.stderr).powi(2)).sqrt();
        rows.push(BoundRow {
            gamma: *g,
            rhs: sur_term + g * nm.value,
            rhs_stderr: if se.is_finite() { se } else { 0.0 },
        });
    }
    let best = rows
        .iter()
        .min_by(|a, b| a.rhs.total_cmp(&b.rhs))
        .cloned()
        .expect("non-empty grid");
    let allowance = 3.0 * (lhs.stderr.powi(2) + best.rhs_stderr.powi(2)).sqrt();
    Ok(PassiveBoundReport {
        holds: lhs.value <= best.rhs + allowance + 1e-12,
        lhs,
        surrogate: sur,
        best_gamma: best.gamma,
        best_rhs: best.rhs,
        rows,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DistanceCheck {
    /// `E|f(x) - f*(x)|^2`.
    pub distance: Estimate,
    /// `E_l(f, F)`.
    pub surrogate: Estimate,
    /// Paired estimate of `E|f - f*|^2 - (2/beta) E_l(f, F)`.
    pub slack: Estimate,
    pub holds: bool,
}

/// Strong-convexity transfer `E|f(x) - f*(x)|^2 <= (2/beta) E_l(f, F)` on the
/// full marginal. The comparator is fitted on the same design on which both
/// sides are evaluated (exact atoms, closed-form moments, or `mc` draws with
/// exact conditional targets).
pub fn check_distance_bound(
    params: &Params,
    inst: &InstanceSpec,
    cls: &ClassSpec,
    spec: &SurrogateSpec,
    ev: &EvalSettings,
) -> Result<DistanceCheck> {
    let design = inst.region_design(spec, &QueryRegion::full(), ev.mc, ev.seed)?;
    let fstar = fit_design(cls, spec, &design, &ev.oracle_cfg, None)?.params;
    let k = 2.0 / spec.beta_phi;
    match &design {
        Design::Moments { sigma, .. } => {
            let delta = nalgebra::DVector::from_iterator(
                params.theta.len(),
                params.theta.iter().zip(&fstar.theta).map(|(a, b)| a - b),
            );
            let form = cls.distance_form(sigma);
            let dist = (delta.transpose() * form * &delta)[(0, 0)];
            let sur = crate::oracle::empirical_risk(cls, spec, &params.theta, &design)?
                - crate::oracle::empirical_risk(cls, spec, &fstar.theta, &design)?;
            let slack = dist - k * sur;
            Ok(DistanceCheck {
                distance: Estimate::exact(dist),
                surrogate: Estimate::exact(sur),
                slack: Estimate::exact(slack),
                holds: slack <= 1e-9,
            })
        }
        Design::Examples(ex) => {
            let exact = inst.support().is_some();
            let total: f64 = ex.iter().map(|e| e.weight).sum();
            let mut dist = Vec::with_capacity(ex.len());
            let mut sur = Vec::with_capacity(ex.len());
            let mut w = Vec::with_capacity(ex.len());
            for e in ex {
                let a = cls.eval_raw(&params.theta, &e.x);
                let b = cls.eval_raw(&fstar.theta, &e.x);
                let diff: Vec<f64> = a.iter().zip(&b).map(|(u, v)| u - v).collect();
                dist.push(norm(&diff).powi(2));
                sur.push(spec.expected_loss_raw(&a, &e.target) - spec.expected_loss_raw(&b, &e.target));
                w.push(e.weight / total);
            }
            let slack_v: Vec<f64> = dist.iter().zip(&sur).map(|(d, s)| d - k * s).collect();
            let slack = estimate(&slack_v, &w, exact);
            Ok(DistanceCheck {
                distance: estimate(&dist, &w, exact),
                surrogate: estimate(&sur, &w, exact),
                holds: slack.value <= 3.0 * slack.stderr + 1e-9,
                slack,
            })
        }
    }
}

/// Norm used for `|f - f*|_{D_X}` in the disagreement coefficient.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ThetaNorm {
    /// `E|f(x) - f*(x)|^2 <= epsilon`.
    #[default]
    AsWritten,
    /// `sqrt(E|f(x) - f*(x)|^2) <= epsilon`.
    Rooted,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ThetaEstimate {
    pub gamma: f64,
    pub epsilon: f64,
    pub value: f64,
    pub event_prob: Estimate,
    /// A ridge was added to the second-moment matrix.
    pub regularized: bool,
}

/// Second-moment matrix `E[x x^T]` of the marginal.
pub fn second_moment(inst: &InstanceSpec, mc: usize, seed: u64) -> Result<(DMatrix<f64>, bool)> {
    let (pts, _) = eval_points(inst, mc, seed)?;
    let d = inst.d;
    let mut m = DMatrix::zeros(d, d);
    for (x, w) in &pts {
        for i in 0..d {
            for j in 0..d {
                m[(i, j)] += w * x[i] * x[j];
            }
        }
    }
    let min_eig = m.clone().symmetric_eigenvalues().min();
    if min_eig < 0.0 {
        for i in 0..d {
            m[(i, i)] += 1e-9 - min_eig;
        }
        return Ok((m, true));
    }
    Ok((m, false))
}

/// Largest `|f(x) - f*(x)|_2` found over `{f in F : |f - f*|_{D_X} <= eps}`.
fn max_deviation(geom: &FeasibleSet, cls: &ClassSpec, center: &[f64], x: &[f64], dirs: &[Vec<f64>]) -> f64 {
    let mut best: f64 = 0.0;
    for u in dirs {
        let g = cls.jac_transpose(x, u);
        let base = crate::funcclass::dot(&g, center);
        let lm = geom.linear_max(&g);
        best = best.max(lm.lower - base);
    }
    best
}

fn deviation_directions(cls: &ClassSpec, restarts: usize, seed: u64) -> Vec<Vec<f64>> {
    let k = cls.k;
    if cls.kind == ClassKind::BinaryBallLinear {
        let s = std::f64::consts::FRAC_1_SQRT_2;
        return vec![vec![s, -s], vec![-s, s]];
    }
    let mut dirs = Vec::new();
    for a in 0..k {
        let mut e = vec![0.0; k];
        e[a] = 1.0;
        dirs.push(e.clone());
        dirs.push(e.iter().map(|v| -v).collect());
        for b in 0..k {
            if a != b {
                let mut u = vec![0.0; k];
                u[a] = std::f64::consts::FRAC_1_SQRT_2;
                u[b] = -std::f64::consts::FRAC_1_SQRT_2;
                dirs.push(u);
            }
        }
    }
    let mut r = rng::substream(seed, rng::STREAM_SEARCH, 0);
    for _ in 0..restarts {
        let v: Vec<f64> = (0..k).map(|_| r.random_range(-1.0..1.0)).collect();
        let n = norm(&v);
        if n > 1e-12 {
            dirs.push(v.into_iter().map(|c| c / n).collect());
        }
    }
    dirs
}

/// `(gamma^2 / eps^2) P[exists f in F : |f(x) - f*(x)| > gamma, |f - f*|_{D_X} <= eps] v 1`.
#[allow(clippy::too_many_arguments)]
pub fn estimate_theta(
    cls: &ClassSpec,
    f_star: &Params,
    inst: &InstanceSpec,
    gamma: f64,
    epsilon: f64,
    mc: usize,
    restarts: usize,
    norm_kind: ThetaNorm,
    seed: u64,
) -> Result<ThetaEstimate> {
    if !(gamma > 0.0 && epsilon > 0.0) {
        return Err(Error::invalid("gamma and epsilon must be positive"));
    }
    if !cls.is_feasible(f_star) {
        return Err(Error::invalid("f* must be feasible"));
    }
    let (m2, regularized) = second_moment(inst, mc, rng::splitmix64(seed))?;
    if regularized {
        log::info!("second-moment estimate was not PSD; added a ridge");
    }
    let b = match norm_kind {
        ThetaNorm::AsWritten => epsilon,
        ThetaNorm::Rooted => epsilon * epsilon,
    };
    let geom = FeasibleSet::new(cls, &f_star.theta, &m2, b);
    let dirs = deviation_directions(cls, restarts, seed);
    let (pts, exact) = eval_points(inst, mc, seed)?;
    let hits: Vec<f64> = pts
        .par_iter()
        .map(|(x, _)| (max_deviation(&geom, cls, &f_star.theta, x, &dirs) > gamma) as u8 as f64)
        .collect();
    let w: Vec<f64> = pts.iter().map(|p| p.1).collect();
    let prob = estimate(&hits, &w, exact);
    Ok(ThetaEstimate {
        gamma,
        epsilon,
        value: (gamma * gamma / (epsilon * epsilon) * prob.value).max(1.0),
        event_prob: prob,
        regularized,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RateFit {
    /// Slope of `log n` against `log(1/excess_risk)`.
    pub slope_n: f64,
    /// Slope of `log N` against `log(1/excess_risk)`.
    pub slope_queries: f64,
    pub r2_n: f64,
    pub r2_queries: f64,
    pub points: usize,
}

fn least_squares(x: &[f64], y: &[f64]) -> (f64, f64) {
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let sxx: f64 = x.iter().map(|v| (v - mx).powi(2)).sum();
    let sxy: f64 = x.iter().zip(y).map(|(a, b)| (a - mx) * (b - my)).sum();
    let slope = if sxx > 0.0 { sxy / sxx } else { 0.0 };
    let ss_tot: f64 = y.iter().map(|v| (v - my).powi(2)).sum();
    let ss_res: f64 = x
        .iter()
        .zip(y)
        .map(|(a, b)| (b - my - slope * (a - mx)).powi(2))
        .sum();
    let r2 = if ss_tot > 0.0 { 1.0 - ss_res / ss_tot } else if ss_res == 0.0 { 1.0 } else { 0.0 };
    (slope, r2)
}

/// Log-log least squares of `n` and `N` against `1 / excess_risk`.
/// Points with non-positive risk are dropped.
pub fn rate_fit(sweep: &[(f64, f64, f64)]) -> Result<RateFit> {
    let kept: Vec<&(f64, f64, f64)> = sweep
        .iter()
        .filter(|(n, q, r)| *r > 0.0 && *n > 0.0 && *q > 0.0 && r.is_finite())
        .collect();
    if kept.len() < 4 {
        return Err(Error::InsufficientData(format!(
            "rate fit needs at least 4 usable points, got {}",
            kept.len()
        )));
    }
    let x: Vec<f64> = kept.iter().map(|p| (1.0 / p.2).ln()).collect();
    let yn: Vec<f64> = kept.iter().map(|p| p.0.ln()).collect();
    let yq: Vec<f64> = kept.iter().map(|p| p.1.ln()).collect();
    let (slope_n, r2_n) = least_squares(&x, &yn);
    let (slope_queries, r2_queries) = least_squares(&x, &yq);
    Ok(RateFit {
        slope_n,
        slope_queries,
        r2_n,
        r2_queries,
        points: kept.len(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn ev(mc: usize) -> EvalSettings {
        EvalSettings {
            mc,
            oracle_cfg: OracleConfig::default(),
            seed: 5,
        }
    }

    #[test]
    fn bayes_has_zero_excess_risk_on_finite_support() {
        let inst = InstanceSpec::example1(3);
        let h = |x: &[f64]| inst.bayes_classify(x).unwrap();
        assert_eq!(excess_class_risk(&h, &inst, 1, 0).unwrap(), Estimate::exact(0.0));
    }

    #[test]
    fn example2_constant_second_class_costs_two_gamma() {
        let inst = InstanceSpec::example2(0.1, 0.01);
        let r = excess_class_risk(&|_: &[f64]| 1, &inst, 1, 0).unwrap();
        assert!((r.value - 0.2).abs() < 1e-12 && r.stderr == 0.0);
    }

    #[test]
    fn flipping_one_example1_atom_costs_a_quarter() {
        let inst = InstanceSpec::example1(2);
        let h = |x: &[f64]| {
            let b = inst.bayes_classify(x).unwrap();
            if x[0] == 1.0 {
                1 - b
            } else {
                b
            }
        };
        let r = excess_class_risk(&h, &inst, 1, 0).unwrap();
        assert!((r.value - 0.25).abs() < 1e-12);
    }

    #[test]
    fn sup_ratio_of_identity_is_one_over_gamma() {
        let s = sup_ratio(&|a| a, 0.2);
        assert!((s - 5.0).abs() < 1e-6, "{s}");
        assert!(sup_ratio(&|_| 0.0, 0.2).is_infinite());
    }

    #[test]
    fn rate_fit_recovers_power_law() {
        let sweep: Vec<(f64, f64, f64)> = [16.0, 64.0, 256.0, 1024.0, 4096.0]
            .iter()
            .map(|n| (*n, 40.0, 1.0 / n))
            .collect();
        let r = rate_fit(&sweep).unwrap();
        assert!((r.slope_n - 1.0).abs() < 1e-6);
        assert!(r.slope_queries.abs() < 1e-12);
        assert!(matches!(rate_fit(&sweep[..3]), Err(Error::InsufficientData(_))));
    }

    #[test]
    fn theta_with_inactive_constraint_is_clamped_at_one() {
        let inst = InstanceSpec::massart(2, 2, 0.2);
        let cls = inst.default_class();
        let t = estimate_theta(&cls, &cls.zeros(), &inst, 0.1, 100.0, 500, 2, ThetaNorm::AsWritten, 1).unwrap();
        assert_eq!(t.value, 1.0);
        // gamma beyond the score range: the event is impossible
        let t = estimate_theta(&cls, &cls.zeros(), &inst, 3.0, 0.5, 500, 2, ThetaNorm::AsWritten, 1).unwrap();
        assert_eq!(t.event_prob.value, 0.0);
        assert_eq!(t.value, 1.0);
    }

    #[test]
    fn passive_baseline_on_realizable_massart_is_accurate() {
        let inst = InstanceSpec::massart(1, 2, 0.5);
        let cls = inst.default_class();
        let bench = inst.benchmark(&cls);
        let (_, rep) = passive_baseline(&inst, &bench, &SurrogateSpec::squared(), 4096, &ev(20_000), 9).unwrap();
        assert!(rep.excess_class_risk.value <= 0.02, "{rep:?}");
        assert!(rep.is_consistent());
    }

    #[test]
    fn bound_holds_trivially_at_the_comparator() {
        let inst = InstanceSpec::example1(4);
        let cls = inst.default_class();
        let spec = SurrogateSpec::squared();
        let fstar = Predictor::linear(&cls, Params::new(vec![0.5; 4]));
        let bench = inst.benchmark(&cls);
        let rep = check_passive_bound(&fstar, &inst, &bench, &spec, &|a| a / 2.0, &[0.1, 0.5], &ev(1)).unwrap();
        assert!(rep.lhs.value.abs() < 1e-12);
        assert!(rep.holds);
    }
}
