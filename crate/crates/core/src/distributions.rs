//! Synthetic instances with exact conditional class probabilities `eta(x)`.
//!
//! Families:
//!
//! * `example1`: `X = {+-e_i}`, uniform, `eta_1(x) = (1 + 1.x)/2`.
//! * `example2`: `X = {0}`, `eta(0) = (1/2 + gamma, 1/2 - gamma)`, scored by a
//!   two-member tabulated class.
//! * `massart_linear`: binary: `x` uniform in the unit ball conditioned on
//!   `|x_1| >= gamma`, `eta_1 = (1 + x_1)/2` (realizable, margin `|x_1|`).
//!   `K >= 3`: `x` uniform in the ball, `eta = gamma e_c + (1 - gamma)/K` with
//!   `c = argmax_{k<K} x_k` (margin exactly `gamma`).
//! * `tsybakov_linear`: `s ~ U[-1, 1]`, `x = s e_1 + sqrt(1 - s^2) rho u`,
//!   `eta_1 = 1/2 + sign(s) min(1, (|s|/c)^(1/beta)) / 2`, so that
//!   `P[margin < t] = min(1, c t^beta)` exactly.
//! * `linf_approx_realizable`: `|s|` uniform on `[s_lo, 1]` with
//!   `s_lo = 2(gamma - eps)`, `eta_1 = 1/2 + s/2 + p(s)` with a tilted
//!   perturbation `|p| <= eps` orthogonal to `s`, so the best-in-class
//!   regressor is exactly `w = e_1` while `|eta - 1/2| >= gamma`.

use std::fmt;
use std::sync::Arc;

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::funcclass::{norm, ClassSpec, FiniteClass, Input};
use crate::oracle::{Benchmark, Design, OracleConfig, SoftExample};
use crate::rng::{self, StreamRng};
use crate::surrogate::{argmax, gap, ProbVector, ScoreVector, SurrogateKind, SurrogateSpec};

/// Proposal budget before a query region is declared to have no mass.
pub const REGION_PROPOSALS: usize = 1_000_000;

/// Slack used when comparing assumption sides.
pub const ASSUMPTION_TOL: f64 = 1e-6;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum InstanceKind {
    Example1,
    Example2,
    MassartLinear,
    TsybakovLinear,
    LinfApproxRealizable,
}

fn two() -> usize {
    2
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InstanceSpec {
    pub kind: InstanceKind,
    pub d: usize,
    #[serde(default = "two")]
    pub k: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub gamma: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub beta: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub epsilon: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub c: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub delta_prime: Option<f64>,
    #[serde(default)]
    pub seed: u64,
}

impl InstanceSpec {
    fn base(kind: InstanceKind, d: usize, k: usize) -> Self {
        InstanceSpec {
            kind,
            d,
            k,
            gamma: None,
            beta: None,
            epsilon: None,
            c: None,
            delta_prime: None,
            seed: 0,
        }
    }

    pub fn example1(d: usize) -> Self {
        Self::base(InstanceKind::Example1, d, 2)
    }

    pub fn example2(gamma: f64, delta_prime: f64) -> Self {
        InstanceSpec {
            gamma: Some(gamma),
            delta_prime: Some(delta_prime),
            ..Self::base(InstanceKind::Example2, 1, 2)
        }
    }

    pub fn massart(d: usize, k: usize, gamma: f64) -> Self {
        InstanceSpec {
            gamma: Some(gamma),
            ..Self::base(InstanceKind::MassartLinear, d, k)
        }
    }

    pub fn tsybakov(d: usize, beta: f64, c: f64) -> Self {
        InstanceSpec {
            beta: Some(beta),
            c: Some(c),
            ..Self::base(InstanceKind::TsybakovLinear, d, 2)
        }
    }

    pub fn linf(d: usize, gamma: f64, epsilon: f64) -> Self {
        InstanceSpec {
            gamma: Some(gamma),
            epsilon: Some(epsilon),
            ..Self::base(InstanceKind::LinfApproxRealizable, d, 2)
        }
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self
    }

    fn req(&self, field: &str, v: Option<f64>) -> Result<f64> {
        match v {
            Some(x) if x.is_finite() => Ok(x),
            Some(_) => Err(Error::config(field, "must be finite")),
            None => Err(Error::config(field, format!("required for {:?}", self.kind))),
        }
    }

    fn gamma(&self) -> f64 {
        self.gamma.unwrap_or(0.0)
    }

    pub fn validate(&self) -> Result<()> {
        if self.d == 0 {
            return Err(Error::config("d", "must be positive"));
        }
        let binary_only = |s: &Self| {
            if s.k != 2 {
                Err(Error::config("k", format!("{:?} is binary", s.kind)))
            } else {
                Ok(())
            }
        };
        match self.kind {
            InstanceKind::Example1 => binary_only(self)?,
            InstanceKind::Example2 => {
                binary_only(self)?;
                if self.d != 1 {
                    return Err(Error::config("d", "example2 lives on X = {0} with d = 1"));
                }
                let g = self.req("gamma", self.gamma)?;
                if !(g > 0.0 && g < 0.25) {
                    return Err(Error::config("gamma", "must lie in (0, 1/4)"));
                }
                let dp = self.req("delta_prime", self.delta_prime)?;
                if !(dp > 0.0 && dp < 0.5) {
                    return Err(Error::config("delta_prime", "must lie in (0, 1/2)"));
                }
            }
            InstanceKind::MassartLinear => {
                let g = self.req("gamma", self.gamma)?;
                if self.k < 2 {
                    return Err(Error::config("k", "must be at least 2"));
                }
                if self.k == 2 {
                    if !(g > 0.0 && g < 1.0) {
                        return Err(Error::config("gamma", "must lie in (0, 1)"));
                    }
                } else {
                    if !(g > 0.0 && g <= 1.0) {
                        return Err(Error::config("gamma", "must lie in (0, 1]"));
                    }
                    if self.d < self.k {
                        return Err(Error::config("d", "multiclass massart needs d >= K"));
                    }
                }
            }
            InstanceKind::TsybakovLinear => {
                binary_only(self)?;
                let b = self.req("beta", self.beta)?;
                if b <= 0.0 {
                    return Err(Error::config("beta", "must be positive"));
                }
                let c = self.req("c", self.c)?;
                if c <= 0.0 {
                    return Err(Error::config("c", "must be positive"));
                }
            }
            InstanceKind::LinfApproxRealizable => {
                binary_only(self)?;
                let g = self.req("gamma", self.gamma)?;
                let e = self.req("epsilon", self.epsilon)?;
                if !(e > 0.0 && e < g && g <= 0.5) {
                    return Err(Error::config("epsilon", "need 0 < epsilon < gamma <= 1/2"));
                }
                let s_lo = 2.0 * (g - e);
                if s_lo >= 1.0 {
                    return Err(Error::config("gamma", "need 2 (gamma - epsilon) < 1"));
                }
                let kappa = linf_kappa(e, s_lo);
                let lo = e / (1.0 - s_lo);
                let hi = (2.0 * e / (1.0 - s_lo)).min(0.5);
                if !(kappa >= lo - 1e-12 && kappa <= hi + 1e-12) {
                    return Err(Error::config(
                        "epsilon",
                        format!("no valid tilt for these parameters (kappa {kappa} not in [{lo}, {hi}])"),
                    ));
                }
            }
        }
        Ok(())
    }

    /// The benchmark class used with this instance by default.
    pub fn default_class(&self) -> ClassSpec {
        if self.k == 2 {
            ClassSpec::binary(self.d)
        } else {
            ClassSpec::multiclass(self.d, self.k, (self.k as f64).sqrt() * 4.0)
        }
    }

    /// `example2` is scored by its tabulated two-member class; every other
    /// family by the given linear class.
    pub fn benchmark(&self, cls: &ClassSpec) -> Benchmark {
        match self.kind {
            InstanceKind::Example2 => Benchmark::Finite(self.example2_class()),
            _ => Benchmark::Linear(cls.clone()),
        }
    }

    /// Members `[f, f*]` with `f(0) = 1/2 - delta'` and `f*(0) = 1/2 + 2 gamma`.
    pub fn example2_class(&self) -> FiniteClass {
        let g = self.gamma();
        let dp = self.delta_prime.unwrap_or(0.01);
        FiniteClass {
            atoms: vec![vec![0.0; self.d]],
            members: vec![
                vec![vec![0.5 - dp, 0.5 + dp]],
                vec![vec![0.5 + 2.0 * g, 0.5 - 2.0 * g]],
            ],
        }
    }

    /// Atoms and their masses for finite-support families.
    pub fn support(&self) -> Option<Vec<(Input, f64)>> {
        match self.kind {
            InstanceKind::Example1 => {
                let m = 1.0 / (2 * self.d) as f64;
                let mut out = Vec::with_capacity(2 * self.d);
                for i in 0..self.d {
                    for sign in [1.0, -1.0] {
                        let mut x = vec![0.0; self.d];
                        x[i] = sign;
                        out.push((x, m));
                    }
                }
                Some(out)
            }
            InstanceKind::Example2 => Some(vec![(vec![0.0; self.d], 1.0)]),
            _ => None,
        }
    }

    /// One draw from the marginal.
    pub fn draw_x<R: Rng + ?Sized>(&self, rng: &mut R) -> Input {
        match self.kind {
            InstanceKind::Example1 => {
                let i = rng.random_range(0..self.d);
                let mut x = vec![0.0; self.d];
                x[i] = if rng.random::<bool>() { 1.0 } else { -1.0 };
                x
            }
            InstanceKind::Example2 => vec![0.0; self.d],
            InstanceKind::MassartLinear => {
                if self.k == 2 {
                    loop {
                        let x = uniform_ball(self.d, rng);
                        if x[0].abs() >= self.gamma() {
                            return x;
                        }
                    }
                } else {
                    uniform_ball(self.d, rng)
                }
            }
            InstanceKind::TsybakovLinear => {
                let s: f64 = rng.random_range(-1.0..=1.0);
                slab_point(self.d, s, rng)
            }
            InstanceKind::LinfApproxRealizable => {
                let s_lo = self.linf_s_lo();
                let mag: f64 = rng.random_range(s_lo..=1.0);
                let s = if rng.random::<bool>() { mag } else { -mag };
                slab_point(self.d, s, rng)
            }
        }
    }

    pub fn sample_x(&self, count: usize, rng: &mut StreamRng) -> Vec<Input> {
        (0..count).map(|_| self.draw_x(rng)).collect()
    }

    fn linf_s_lo(&self) -> f64 {
        2.0 * (self.gamma() - self.epsilon.unwrap_or(0.0))
    }

    /// Tilt `kappa` of the perturbation for `linf_approx_realizable`.
    pub fn linf_tilt(&self) -> f64 {
        linf_kappa(self.epsilon.unwrap_or(0.0), self.linf_s_lo())
    }

    fn check_domain(&self, x: &[f64]) -> Result<()> {
        if x.len() != self.d || x.iter().any(|v| !v.is_finite()) {
            return Err(Error::invalid(format!(
                "input must be a finite vector of dimension {}",
                self.d
            )));
        }
        if let Some(atoms) = self.support() {
            if !atoms.iter().any(|(a, _)| a.as_slice() == x) {
                return Err(Error::invalid(format!("{x:?} is not in the support")));
            }
        } else if norm(x) > 1.0 + 1e-9 {
            return Err(Error::invalid("input lies outside the unit ball"));
        }
        Ok(())
    }

    pub fn eta(&self, x: &[f64]) -> Result<ProbVector> {
        self.check_domain(x)?;
        ProbVector::new(self.eta_raw(x))
    }

    /// `eta(x)` without the domain check.
    pub(crate) fn eta_raw(&self, x: &[f64]) -> Vec<f64> {
        let binary = |p: f64| {
            let p = p.clamp(0.0, 1.0);
            vec![p, 1.0 - p]
        };
        match self.kind {
            InstanceKind::Example1 => binary(0.5 * (1.0 + x.iter().sum::<f64>())),
            InstanceKind::Example2 => binary(0.5 + self.gamma()),
            InstanceKind::MassartLinear => {
                if self.k == 2 {
                    binary(0.5 * (1.0 + x[0]))
                } else {
                    let g = self.gamma();
                    let c = argmax(&x[..self.k]);
                    let mut p = vec![(1.0 - g) / self.k as f64; self.k];
                    p[c] += g;
                    p
                }
            }
            InstanceKind::TsybakovLinear => {
                let s = x[0];
                let c = self.c.unwrap_or(1.0);
                let beta = self.beta.unwrap_or(1.0);
                let m = (s.abs() / c).powf(1.0 / beta).min(1.0);
                binary(0.5 + 0.5 * sign(s) * m)
            }
            InstanceKind::LinfApproxRealizable => {
                let s = x[0];
                let eps = self.epsilon.unwrap_or(0.0);
                let p = eps - self.linf_tilt() * (s.abs() - self.linf_s_lo());
                binary(0.5 + 0.5 * s + sign(s) * p)
            }
        }
    }

    pub fn bayes_classify(&self, x: &[f64]) -> Result<usize> {
        Ok(self.eta(x)?.argmax())
    }

    /// Population moments of the binary squared objective over the whole
    /// marginal, where they are known in closed form.
    pub fn population_moments(&self) -> Option<(DMatrix<f64>, DVector<f64>)> {
        if self.kind != InstanceKind::LinfApproxRealizable {
            return None;
        }
        let d = self.d;
        let s_lo = self.linf_s_lo();
        // |s| uniform on [s_lo, 1]
        let es2 = (1.0 - s_lo.powi(3)) / (3.0 * (1.0 - s_lo));
        let mut sigma = DMatrix::zeros(d, d);
        sigma[(0, 0)] = es2;
        if d > 1 {
            // E[rho^2] = (d-1)/(d+1) and E[u u^T] = I/(d-1)
            let perp = (1.0 - es2) / (d as f64 + 1.0);
            for i in 1..d {
                sigma[(i, i)] = perp;
            }
        }
        let mut b = DVector::zeros(d);
        // E[(s/2 + p(s)) s] = E[s^2]/2 since the tilt is orthogonal to s
        b[0] = 0.5 * es2;
        Some((sigma, b))
    }

    /// Draws from `D_Q` by rejection from the marginal.
    pub fn sample_region(
        &self,
        region: &QueryRegion<'_>,
        count: usize,
        rng: &mut StreamRng,
    ) -> Result<Vec<Input>> {
        let mut out = Vec::with_capacity(count);
        let mut proposals = 0usize;
        let budget = REGION_PROPOSALS.saturating_add(count.saturating_mul(10_000));
        while out.len() < count {
            let x = self.draw_x(rng);
            proposals += 1;
            if region.contains(&x) {
                out.push(x);
            } else if out.is_empty() && proposals >= REGION_PROPOSALS {
                return Err(Error::DegenerateRegion(format!(
                    "region {} accepted none of {proposals} proposals",
                    region.label()
                )));
            }
            if proposals >= budget && out.len() < count {
                return Err(Error::DegenerateRegion(format!(
                    "region {} accepted only {} of {proposals} proposals",
                    region.label(),
                    out.len()
                )));
            }
        }
        Ok(out)
    }

    /// Region draws paired with their exact conditional targets.
    pub fn region_soft_sample(
        &self,
        region: &QueryRegion<'_>,
        count: usize,
        mut rng: StreamRng,
    ) -> Result<Vec<SoftExample>> {
        Ok(self
            .sample_region(region, count, &mut rng)?
            .into_iter()
            .map(|x| SoftExample {
                target: self.eta_raw(&x),
                x,
                weight: 1.0,
            })
            .collect())
    }

    /// Design whose minimizer is `f*_Q`: exact atoms for finite supports,
    /// closed-form moments where available, otherwise `samples` draws from
    /// `D_Q` with exact conditional targets.
    pub fn region_design(
        &self,
        spec: &SurrogateSpec,
        region: &QueryRegion<'_>,
        samples: usize,
        seed: u64,
    ) -> Result<Design> {
        if let Some(atoms) = self.support() {
            let ex: Vec<SoftExample> = atoms
                .into_iter()
                .filter(|(x, _)| region.contains(x))
                .map(|(x, m)| SoftExample {
                    target: self.eta_raw(&x),
                    x,
                    weight: m,
                })
                .collect();
            if ex.is_empty() {
                return Err(Error::DegenerateRegion(format!(
                    "region {} contains no support atom",
                    region.label()
                )));
            }
            return Ok(Design::Examples(ex));
        }
        if region.is_full() && spec.kind == SurrogateKind::Squared {
            if let Some((sigma, b)) = self.population_moments() {
                return Ok(Design::Moments { sigma, b });
            }
        }
        Ok(Design::Examples(self.region_soft_sample(
            region,
            samples,
            rng::substream(seed, rng::STREAM_COMPARATOR, 0),
        )?))
    }
}

fn sign(s: f64) -> f64 {
    if s == 0.0 {
        0.0
    } else {
        s.signum()
    }
}

fn linf_kappa(eps: f64, s_lo: f64) -> f64 {
    // orthogonality of the tilt to s over s ~ U[s_lo, 1]:
    // eps * int s ds = kappa * int (s - s_lo) s ds
    let int_s = (1.0 - s_lo * s_lo) / 2.0;
    let int_ss = (1.0 - s_lo.powi(3)) / 3.0 - s_lo * int_s;
    eps * int_s / int_ss
}

fn uniform_ball<R: Rng + ?Sized>(d: usize, rng: &mut R) -> Vec<f64> {
    let dir = unit_direction(d, rng);
    let r = rng.random::<f64>().powf(1.0 / d as f64);
    dir.into_iter().map(|v| v * r).collect()
}

fn unit_direction<R: Rng + ?Sized>(d: usize, rng: &mut R) -> Vec<f64> {
    loop {
        let v: Vec<f64> = (0..d).map(|_| rng.sample::<f64, _>(StandardNormal)).collect();
        let n = norm(&v);
        if n > 1e-12 {
            return v.into_iter().map(|x| x / n).collect();
        }
    }
}

/// `s e_1 + sqrt(1 - s^2) rho u` with `u` uniform on the orthogonal sphere
/// and `rho = U^(1/(d-1))`.
fn slab_point<R: Rng + ?Sized>(d: usize, s: f64, rng: &mut R) -> Vec<f64> {
    let mut x = vec![0.0; d];
    x[0] = s;
    if d > 1 {
        let u = unit_direction(d - 1, rng);
        let rho = rng.random::<f64>().powf(1.0 / (d - 1) as f64);
        let scale = (1.0 - s * s).max(0.0).sqrt() * rho;
        for i in 1..d {
            x[i] = scale * u[i - 1];
        }
    }
    x
}

type Pred<'a> = dyn Fn(&[f64]) -> bool + Send + Sync + 'a;

/// A subset `Q` of the input space given by a membership predicate. Draws
/// from `D_Q` are obtained by rejection from the marginal.
#[derive(Clone)]
pub struct QueryRegion<'a> {
    label: String,
    pred: Option<Arc<Pred<'a>>>,
}

impl fmt::Debug for QueryRegion<'_> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("QueryRegion").field("label", &self.label).finish()
    }
}

impl<'a> QueryRegion<'a> {
    pub fn full() -> Self {
        QueryRegion {
            label: "X".to_string(),
            pred: None,
        }
    }

    pub fn new(label: impl Into<String>, pred: impl Fn(&[f64]) -> bool + Send + Sync + 'a) -> Self {
        QueryRegion {
            label: label.into(),
            pred: Some(Arc::new(pred)),
        }
    }

    pub fn contains(&self, x: &[f64]) -> bool {
        self.pred.as_ref().is_none_or(|p| p(x))
    }

    pub fn is_full(&self) -> bool {
        self.pred.is_none()
    }

    pub fn label(&self) -> &str {
        &self.label
    }
}

/// The regions `{+-e_i : i in S}` for every non-empty `S` of `[d]`.
pub fn example1_symmetric_regions(d: usize) -> Vec<(Vec<usize>, QueryRegion<'static>)> {
    assert!(d < 20, "enumerating 2^d subsets");
    (1u32..(1 << d))
        .map(|mask| {
            let s: Vec<usize> = (0..d).filter(|i| mask & (1 << i) != 0).collect();
            let label = format!("S={s:?}");
            let r = QueryRegion::new(label, move |x: &[f64]| {
                x.iter()
                    .enumerate()
                    .any(|(i, v)| *v != 0.0 && mask & (1 << i) != 0)
            });
            (s, r)
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RegionCheck {
    pub region: String,
    pub checked_points: usize,
    pub violations: usize,
    /// Largest value of `psi(gap(eta, k)) - gap(phi(f*_Q), k)` seen.
    pub worst_deficit: f64,
    pub skipped: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AssumptionReport {
    pub regions: Vec<RegionCheck>,
}

impl AssumptionReport {
    pub fn total_violations(&self) -> usize {
        self.regions.iter().map(|r| r.violations).sum()
    }
}

/// Checks `gap(phi(f*_Q(x)), k) >= psi(gap(eta(x), k)) - tol` for every class
/// `k` at points of each region. Finite supports are checked at every atom in
/// the region; otherwise at `samples` draws from `D_Q`.
#[allow(clippy::too_many_arguments)]
pub fn verify_assumption(
    inst: &InstanceSpec,
    bench: &Benchmark,
    spec: &SurrogateSpec,
    psi: &(dyn Fn(f64) -> f64 + Sync),
    regions: &[QueryRegion<'_>],
    samples: usize,
    cfg: &OracleConfig,
    seed: u64,
) -> Result<AssumptionReport> {
    inst.validate()?;
    let mut out = Vec::with_capacity(regions.len());
    for (ri, region) in regions.iter().enumerate() {
        let design = match inst.region_design(spec, region, samples.max(1), rng::splitmix64(seed ^ ri as u64)) {
            Ok(d) => d,
            Err(Error::DegenerateRegion(msg)) => {
                out.push(RegionCheck {
                    region: region.label().to_string(),
                    checked_points: 0,
                    violations: 0,
                    worst_deficit: f64::NEG_INFINITY,
                    skipped: Some(msg),
                });
                continue;
            }
            Err(e) => return Err(e),
        };
        let (fstar, _) = bench.best_in_class(spec, &design, cfg)?;
        let points: Vec<Input> = match inst.support() {
            Some(atoms) => atoms
                .into_iter()
                .map(|(x, _)| x)
                .filter(|x| region.contains(x))
                .collect(),
            None => {
                let mut r = rng::substream(seed, rng::STREAM_EVAL, ri as u64);
                inst.sample_region(region, samples, &mut r)?
            }
        };
        let mut violations = 0;
        let mut worst = f64::NEG_INFINITY;
        for x in &points {
            let eta = ProbVector::new(inst.eta_raw(x))?;
            let phi = spec.link(&ScoreVector::new(fstar.scores(x)?)?)?;
            let mut bad = false;
            for k in 0..inst.k {
                let deficit = psi(gap(&eta, k)?) - gap(&phi, k)?;
                worst = worst.max(deficit);
                bad |= deficit > ASSUMPTION_TOL;
            }
            violations += bad as usize;
        }
        out.push(RegionCheck {
            region: region.label().to_string(),
            checked_points: points.len(),
            violations,
            worst_deficit: worst,
            skipped: None,
        });
    }
    Ok(AssumptionReport { regions: out })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::surrogate::margin;

    #[test]
    fn example1_marginal_is_uniform() {
        let inst = InstanceSpec::example1(4);
        let mut r = rng::stream(11, rng::STREAM_MARGINAL);
        let xs = inst.sample_x(100_000, &mut r);
        for (atom, _) in inst.support().unwrap() {
            let f = xs.iter().filter(|x| **x == atom).count() as f64 / 1e5;
            assert!((f - 0.125).abs() < 0.01, "{atom:?} {f}");
        }
    }

    #[test]
    fn example2_marginal_and_eta() {
        let inst = InstanceSpec::example2(0.1, 0.01);
        let mut r = rng::stream(1, rng::STREAM_MARGINAL);
        assert!(inst.sample_x(10, &mut r).iter().all(|x| x == &vec![0.0]));
        let e = inst.eta(&[0.0]).unwrap();
        assert!((e.as_slice()[0] - 0.6).abs() < 1e-15);
        assert!((e.as_slice()[1] - 0.4).abs() < 1e-15);
    }

    #[test]
    fn example1_eta_and_bayes() {
        let inst = InstanceSpec::example1(3);
        assert_eq!(inst.eta(&[1.0, 0.0, 0.0]).unwrap().as_slice(), &[1.0, 0.0]);
        assert_eq!(inst.eta(&[-1.0, 0.0, 0.0]).unwrap().as_slice(), &[0.0, 1.0]);
        assert_eq!(inst.bayes_classify(&[0.0, 1.0, 0.0]).unwrap(), 0);
        assert_eq!(inst.bayes_classify(&[0.0, -1.0, 0.0]).unwrap(), 1);
        assert!(inst.eta(&[0.5, 0.0, 0.0]).is_err());
    }

    #[test]
    fn tsybakov_margin_cdf_dominated() {
        for (beta, c) in [(1.0, 1.0), (0.5, 1.6), (2.0, 1.6)] {
            let inst = InstanceSpec::tsybakov(3, beta, c);
            let mut r = rng::stream(5, rng::STREAM_MARGINAL);
            let n = 100_000;
            let margins: Vec<f64> = inst
                .sample_x(n, &mut r)
                .iter()
                .map(|x| margin(&inst.eta(x).unwrap()))
                .collect();
            for i in 1..=100 {
                let t = i as f64 / 100.0;
                let p = margins.iter().filter(|m| **m < t).count() as f64 / n as f64;
                let bound = (c * t.powf(beta)).min(1.0);
                let se = (bound * (1.0 - bound) / n as f64).sqrt();
                assert!(p <= bound + 3.0 * se + 1e-12, "beta {beta} t {t}: {p} > {bound}");
            }
        }
    }

    #[test]
    fn massart_margin_bounded_below() {
        for inst in [InstanceSpec::massart(4, 2, 0.3), InstanceSpec::massart(4, 3, 0.3)] {
            let mut r = rng::stream(3, rng::STREAM_MARGINAL);
            let mut min_margin = f64::INFINITY;
            for _ in 0..1_000_000 {
                let x = inst.draw_x(&mut r);
                min_margin = min_margin.min(margin(&ProbVector::new(inst.eta_raw(&x)).unwrap()));
            }
            assert!(min_margin >= 0.3 - 1e-12, "{min_margin}");
        }
    }

    #[test]
    fn linf_construction_properties() {
        let inst = InstanceSpec::linf(3, 0.3, 0.1);
        inst.validate().unwrap();
        assert!((inst.linf_tilt() - 0.042 / 0.144).abs() < 1e-12);
        let mut r = rng::stream(9, rng::STREAM_MARGINAL);
        for _ in 0..20_000 {
            let x = inst.draw_x(&mut r);
            let eta1 = inst.eta_raw(&x)[0];
            let g1 = 0.5 * (1.0 + x[0]);
            assert!((eta1 - g1).abs() <= 0.1 + 1e-12);
            assert!((eta1 - 0.5).abs() >= 0.3 - 1e-12);
            assert!(norm(&x) <= 1.0 + 1e-12);
        }
    }

    #[test]
    fn linf_moments_match_sampling() {
        let inst = InstanceSpec::linf(3, 0.3, 0.1);
        let (sigma, b) = inst.population_moments().unwrap();
        let mut r = rng::stream(21, rng::STREAM_MARGINAL);
        let n = 200_000;
        let mut s = DMatrix::<f64>::zeros(3, 3);
        let mut bb = DVector::<f64>::zeros(3);
        for _ in 0..n {
            let x = inst.draw_x(&mut r);
            let t = inst.eta_raw(&x)[0] - 0.5;
            for i in 0..3 {
                bb[i] += t * x[i] / n as f64;
                for j in 0..3 {
                    s[(i, j)] += x[i] * x[j] / n as f64;
                }
            }
        }
        assert!((s - sigma).abs().max() < 5e-3);
        assert!((bb - b).abs().max() < 5e-3);
    }

    #[test]
    fn validation_names_fields() {
        let bad = InstanceSpec::linf(2, 0.3, 0.4);
        assert!(matches!(bad.validate(), Err(Error::Config { field, .. }) if field == "epsilon"));
        let mut m = InstanceSpec::massart(2, 3, 0.3);
        assert!(matches!(m.validate(), Err(Error::Config { field, .. }) if field == "d"));
        m.gamma = None;
        assert!(matches!(m.validate(), Err(Error::Config { field, .. }) if field == "gamma"));
    }

    #[test]
    fn degenerate_region_reported() {
        let inst = InstanceSpec::tsybakov(2, 1.0, 1.0);
        let q = QueryRegion::new("empty", |_x: &[f64]| false);
        let mut r = rng::stream(0, 1);
        assert!(matches!(inst.sample_region(&q, 1, &mut r), Err(Error::DegenerateRegion(_))));
    }

    #[test]
    fn symmetric_region_enumeration() {
        let regions = example1_symmetric_regions(3);
        assert_eq!(regions.len(), 7);
        let (s, q) = &regions[3];
        assert_eq!(s, &vec![2]);
        assert!(q.contains(&[0.0, 0.0, -1.0]));
        assert!(!q.contains(&[1.0, 0.0, 0.0]));
    }
}
