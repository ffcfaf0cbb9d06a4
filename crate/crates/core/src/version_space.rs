//! Implicit version spaces
//! `F_m = {f in F : sum_t |f(x_t) - f_hat_m(x_t)|^2 <= B}` and the test
//! "do two members of `F_m` label `x` differently".
//!
//! Pairwise disagreement reduces to disagreement with the center: the center
//! is itself a member, so some pair disagrees at `x` iff some member's label
//! differs from the center's label `c*`. For every `c != c*` the search
//! maximizes `v[c] - v[c*]` over `F_m`. Both links are monotone in that
//! difference, so the sign of the linear maximum decides the question; the
//! linear program is solved with a Lagrangian certificate and, when the
//! certificate is inconclusive, by projected ascent from the center and
//! seeded random starts.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::funcclass::{gram_matrix, ClassSpec, Input, Params};
use crate::projection::FeasibleSet;
use crate::rng;
use crate::surrogate::{argmax, softmax, SurrogateKind, SurrogateSpec};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct DisagreeConfig {
    pub restarts: usize,
    pub max_iters: usize,
    pub tol: f64,
    pub conservative_on_uncertain: bool,
}

impl Default for DisagreeConfig {
    fn default() -> Self {
        DisagreeConfig {
            restarts: 4,
            max_iters: 200,
            tol: 1e-7,
            conservative_on_uncertain: true,
        }
    }
}

impl DisagreeConfig {
    pub fn validate(&self) -> Result<()> {
        if self.restarts == 0 {
            return Err(Error::config("restarts", "must be at least 1"));
        }
        if self.max_iters == 0 {
            return Err(Error::config("max_iters", "must be at least 1"));
        }
        if !(self.tol > 0.0 && self.tol.is_finite()) {
            return Err(Error::config("tol", "must be positive"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone)]
pub struct VersionSpace {
    pub cls: ClassSpec,
    pub center: Params,
    pub anchor_points: Vec<Input>,
    pub radius_b: f64,
    geom: FeasibleSet,
}

impl PartialEq for VersionSpace {
    fn eq(&self, other: &Self) -> bool {
        self.cls == other.cls
            && self.center == other.center
            && self.anchor_points == other.anchor_points
            && self.radius_b == other.radius_b
    }
}

/// Result of the search for one alternative class.
#[derive(Debug, Clone, PartialEq)]
pub struct ClassSearch {
    pub class: usize,
    /// Best value of `v[c] - v[c*]` found at a feasible member.
    pub best: f64,
    /// Certified upper bound on `v[c] - v[c*]` over the version space.
    pub upper: f64,
    pub witness: Vec<f64>,
}

impl VersionSpace {
    pub fn new(cls: &ClassSpec, center: Params, anchor_points: Vec<Input>, radius_b: f64) -> Result<Self> {
        cls.validate()?;
        if !cls.is_feasible(&center) {
            return Err(Error::invalid("version-space center must be feasible"));
        }
        if !(radius_b >= 0.0) || radius_b.is_nan() {
            return Err(Error::invalid("radius B must be nonnegative"));
        }
        for x in &anchor_points {
            if x.len() != cls.d {
                return Err(Error::invalid("anchor dimension mismatch"));
            }
        }
        let gram = gram_matrix(cls.d, &anchor_points);
        let geom = FeasibleSet::new(cls, &center.theta, &gram, radius_b);
        Ok(VersionSpace {
            cls: cls.clone(),
            center,
            anchor_points,
            radius_b,
            geom,
        })
    }

    pub fn geometry(&self) -> &FeasibleSet {
        &self.geom
    }

    /// Membership: empirical distance to the center over the anchors is
    /// within `B` (up to `1e-9`).
    pub fn contains(&self, p: &Params) -> bool {
        match self.cls.param_distance_sq(p, &self.center, &self.anchor_points) {
            Ok(d) => d <= self.radius_b + 1e-9,
            Err(_) => false,
        }
    }

    /// Label of the center at `x` (lowest index on ties).
    pub fn center_label(&self, spec: &SurrogateSpec, x: &[f64]) -> usize {
        let v = self.cls.eval_raw(&self.center.theta, x);
        match spec.kind {
            SurrogateKind::Squared => argmax(&v),
            SurrogateKind::Logistic => argmax(&softmax(&v)),
        }
    }

    /// Linear data of `v[c] - v[c*]` at `x`: gradient in parameters and offset.
    fn score_difference(&self, x: &[f64], c: usize, cstar: usize) -> (Vec<f64>, f64) {
        let mut e = vec![0.0; self.cls.k];
        e[c] += 1.0;
        e[cstar] -= 1.0;
        let g = self.cls.jac_transpose(x, &e);
        let zero = vec![0.0; self.cls.param_dim()];
        let a = self.cls.eval_raw(&zero, x);
        (g, a[c] - a[cstar])
    }

    fn search_class(&self, x: &[f64], c: usize, cstar: usize, cfg: &DisagreeConfig, full: bool) -> ClassSearch {
        let (g, off) = self.score_difference(x, c, cstar);
        let at_center = off + crate::funcclass::dot(&g, &self.center.theta);
        let cheap = off + self.geom.linear_upper_bound(&g);
        if !full && cheap < -cfg.tol {
            return ClassSearch {
                class: c,
                best: at_center,
                upper: cheap,
                witness: self.center.theta.clone(),
            };
        }
        let lm = self.geom.linear_max(&g);
        let mut out = ClassSearch {
            class: c,
            best: off + lm.lower,
            upper: (off + lm.upper).min(cheap),
            witness: lm.witness,
        };
        if at_center > out.best {
            out.best = at_center;
            out.witness = self.center.theta.clone();
        }
        let decided = out.best >= -cfg.tol || out.upper < -cfg.tol;
        if !decided || full {
            self.ascent_restarts(x, &g, off, cfg, &mut out);
        }
        out
    }

    fn ascent_restarts(&self, x: &[f64], g: &[f64], off: f64, cfg: &DisagreeConfig, out: &mut ClassSearch) {
        let obj = |t: &[f64]| (off + crate::funcclass::dot(g, t), g.to_vec());
        let mut starts = vec![self.center.theta.clone()];
        let seed = rng::hash_point(x);
        for r in 0..cfg.restarts {
            let mut rr = rng::substream(seed, rng::STREAM_SEARCH, r as u64);
            starts.push(random_point(self.cls.param_dim(), self.cls.radius, &mut rr));
        }
        for s in starts {
            let a = self.geom.ascend(&obj, &s, cfg.max_iters);
            if a.value > out.best {
                out.best = a.value;
                out.witness = a.theta;
            }
        }
    }

    /// Per-class search results at `x`, relative to the center's label.
    pub fn search(&self, x: &[f64], spec: &SurrogateSpec, cfg: &DisagreeConfig) -> (usize, Vec<ClassSearch>) {
        let cstar = self.center_label(spec, x);
        let res = (0..self.cls.k)
            .filter(|c| *c != cstar)
            .map(|c| self.search_class(x, c, cstar, cfg, false))
            .collect();
        (cstar, res)
    }

    /// `true` iff some member of the version space labels `x` differently
    /// from the center. Ties count as disagreement.
    pub fn disagrees_at(&self, x: &[f64], spec: &SurrogateSpec, cfg: &DisagreeConfig) -> bool {
        let cstar = self.center_label(spec, x);
        for c in 0..self.cls.k {
            if c == cstar {
                continue;
            }
            let r = self.search_class(x, c, cstar, cfg, false);
            if r.best >= -cfg.tol {
                return true;
            }
            if r.upper >= -cfg.tol {
                if cfg.conservative_on_uncertain {
                    return true;
                }
                log::debug!("uncertain disagreement search at {x:?}");
            }
        }
        false
    }

    /// Best value found of `max_{c != c*} phi(f(x))[c] - phi(f(x))[c*]`.
    pub fn certify_margin_bound(&self, x: &[f64], spec: &SurrogateSpec, cfg: &DisagreeConfig) -> f64 {
        let cstar = self.center_label(spec, x);
        let mut best = f64::NEG_INFINITY;
        for c in 0..self.cls.k {
            if c == cstar {
                continue;
            }
            let r = self.search_class(x, c, cstar, cfg, false);
            let value = match spec.kind {
                SurrogateKind::Squared => r.best,
                SurrogateKind::Logistic => self.refine_link_gap(x, c, cstar, &r.witness, cfg),
            };
            best = best.max(value);
        }
        best
    }

    /// Ascent on the softmax difference from the linear witness and the center.
    fn refine_link_gap(&self, x: &[f64], c: usize, cstar: usize, witness: &[f64], cfg: &DisagreeConfig) -> f64 {
        let cls = &self.cls;
        let obj = |t: &[f64]| {
            let p = softmax(&cls.eval_raw(t, x));
            let val = p[c] - p[cstar];
            // d(p_c - p_c*)/dv_j = p_c (1[j=c] - p_j) - p_c* (1[j=c*] - p_j)
            let dv: Vec<f64> = (0..p.len())
                .map(|j| {
                    p[c] * ((j == c) as u8 as f64 - p[j]) - p[cstar] * ((j == cstar) as u8 as f64 - p[j])
                })
                .collect();
            (val, cls.jac_transpose(x, &dv))
        };
        let mut best = f64::NEG_INFINITY;
        for s in [witness.to_vec(), self.center.theta.clone()] {
            best = best.max(self.geom.ascend(&obj, &s, cfg.max_iters).value);
        }
        best
    }
}

/// A point drawn uniformly from the ball of the given radius.
pub fn random_point(dim: usize, radius: f64, r: &mut rng::StreamRng) -> Vec<f64> {
    use rand::Rng;
    use rand_distr::StandardNormal;
    let v: Vec<f64> = (0..dim).map(|_| r.sample::<f64, _>(StandardNormal)).collect();
    let n = crate::funcclass::norm(&v).max(1e-300);
    let rad = radius * r.random::<f64>().powf(1.0 / dim as f64);
    v.into_iter().map(|x| x * rad / n).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn vs1(center: f64, anchors: &[f64], b: f64) -> VersionSpace {
        let cls = ClassSpec::binary(1);
        VersionSpace::new(&cls, Params::new(vec![center]), anchors.iter().map(|a| vec![*a]).collect(), b).unwrap()
    }

    #[test]
    fn contains_examples() {
        let v = vs1(0.0, &[1.0], 0.5);
        assert!(v.contains(&Params::new(vec![0.0])));
        assert!(v.contains(&Params::new(vec![1.0])));
        let z = vs1(0.0, &[1.0], 0.0);
        assert!(!z.contains(&Params::new(vec![0.3])));
    }

    #[test]
    fn disagreement_examples() {
        let sq = SurrogateSpec::squared();
        let cfg = DisagreeConfig::default();
        // F_m = {center}
        let cls = ClassSpec::binary(2);
        let v = VersionSpace::new(&cls, Params::new(vec![0.3, -0.2]), vec![vec![1.0, 0.0], vec![0.0, 1.0]], 0.0).unwrap();
        assert!(!v.disagrees_at(&[0.5, 0.1], &sq, &cfg));
        // small ball around w = 1 keeps f(1) >= 0.9
        let v = vs1(1.0, &[1.0], 0.01);
        assert!(!v.disagrees_at(&[1.0], &sq, &cfg));
        // whole class reachable
        let c = std::f64::consts::FRAC_1_SQRT_2;
        let anchors = vec![vec![1.0, 0.0], vec![-1.0, 0.0], vec![0.0, 1.0], vec![0.0, -1.0]];
        let v = VersionSpace::new(&cls, Params::new(vec![c, c]), anchors.clone(), 2.0).unwrap();
        for x in &anchors {
            assert!(v.disagrees_at(x, &sq, &cfg));
        }
    }

    #[test]
    fn margin_bound_examples() {
        let sq = SurrogateSpec::squared();
        let cfg = DisagreeConfig::default();
        let cls = ClassSpec::binary(2);
        let v = VersionSpace::new(&cls, Params::new(vec![0.4, 0.1]), vec![vec![1.0, 0.0], vec![0.0, 1.0]], 0.0).unwrap();
        let x = [0.5, 0.5];
        let f1: f64 = 0.5 + 0.5 * (0.4 * 0.5 + 0.1 * 0.5);
        let margin: f64 = (f1 - (1.0 - f1)).abs();
        assert!((v.certify_margin_bound(&x, &sq, &cfg) + margin).abs() < 1e-9);
        // x = 0: every member predicts (1/2, 1/2)
        assert_eq!(v.certify_margin_bound(&[0.0, 0.0], &sq, &cfg), 0.0);
        assert!(v.disagrees_at(&[0.0, 0.0], &sq, &cfg));
        // unconstrained: f(x)[1] - f(x)[0] = -w.x reaches |x| over the ball
        let wide = VersionSpace::new(&cls, Params::new(vec![0.4, 0.1]), vec![], 1.0).unwrap();
        let x = [0.6, 0.0];
        assert!((wide.certify_margin_bound(&x, &sq, &cfg) - 0.6).abs() < 1e-9);
    }

    #[test]
    fn logistic_refinement_agrees_in_sign() {
        let cls = ClassSpec::multiclass(2, 3, 2.0);
        let spec = SurrogateSpec::logistic_for_score_bound(2.0, 3).unwrap();
        let cfg = DisagreeConfig::default();
        let center = Params::new(vec![1.0, 0.0, 0.0, 1.0, -0.5, -0.5]);
        let anchors = vec![vec![0.9, 0.1], vec![0.1, 0.8], vec![-0.5, -0.5]];
        for b in [1e-3, 0.05, 0.5, 3.0] {
            let v = VersionSpace::new(&cls, center.clone(), anchors.clone(), b).unwrap();
            for x in [[0.5, 0.45], [0.9, 0.0], [0.3, 0.3]] {
                let m = v.certify_margin_bound(&x, &spec, &cfg);
                let d = v.disagrees_at(&x, &spec, &cfg);
                assert_eq!(d, m >= -cfg.tol, "b {b} x {x:?} m {m}");
            }
        }
    }
}
