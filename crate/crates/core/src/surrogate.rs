//! Surrogate losses `l(v, y) = Phi(v) - v[y]`, their gradient links and the
//! margin/gap functionals used to turn scores into decisions.
//!
//! Two potentials are shipped:
//!
//! * squared: `Phi(v) = 0.5 * |v|^2`, link = identity. Scores must already be
//!   probability vectors when passed through the link.
//! * logistic: `Phi(v) = log(sum_j exp(v[j]))`, link = softmax.
//!
//! Class indices are 0-based throughout the crate. Argmax ties always
//! resolve to the lowest index.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Tolerance used when checking that a squared-link input lies on the simplex.
pub const SIMPLEX_TOL: f64 = 1e-6;

/// Raw scores `v in R^K`.
#[derive(Debug, Clone, PartialEq)]
pub struct ScoreVector(Vec<f64>);

impl ScoreVector {
    pub fn new(values: Vec<f64>) -> Result<Self> {
        if values.len() < 2 {
            return Err(Error::invalid(format!(
                "score vector needs K >= 2 entries, got {}",
                values.len()
            )));
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::invalid("score vector has non-finite entries"));
        }
        Ok(ScoreVector(values))
    }

    pub(crate) fn from_vec_unchecked(values: Vec<f64>) -> Self {
        ScoreVector(values)
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn into_vec(self) -> Vec<f64> {
        self.0
    }
}

/// A point of the probability simplex.
#[derive(Debug, Clone, PartialEq)]
pub struct ProbVector(Vec<f64>);

impl ProbVector {
    pub fn new(values: Vec<f64>) -> Result<Self> {
        if values.len() < 2 {
            return Err(Error::invalid("probability vector needs K >= 2 entries"));
        }
        if values
            .iter()
            .any(|p| !p.is_finite() || *p < -1e-12 || *p > 1.0 + 1e-12)
        {
            return Err(Error::invalid(format!(
                "probability entries must lie in [0, 1]: {values:?}"
            )));
        }
        let total: f64 = values.iter().sum();
        if (total - 1.0).abs() > 1e-9 {
            return Err(Error::invalid(format!(
                "probability entries sum to {total}, expected 1"
            )));
        }
        Ok(ProbVector(values.into_iter().map(|p| p.clamp(0.0, 1.0)).collect()))
    }

    /// Two-class vector `(p, 1 - p)`.
    pub fn binary(p: f64) -> Result<Self> {
        ProbVector::new(vec![p, 1.0 - p])
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn argmax(&self) -> usize {
        argmax(&self.0)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SurrogateKind {
    Squared,
    Logistic,
}

/// A strongly convex potential together with its curvature constants.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SurrogateSpec {
    pub kind: SurrogateKind,
    /// Strong-convexity constant over the realizable score set.
    pub beta_phi: f64,
    /// Smoothness constant over the realizable score set.
    pub l_phi: f64,
}

impl SurrogateSpec {
    pub fn squared() -> Self {
        SurrogateSpec {
            kind: SurrogateKind::Squared,
            beta_phi: 1.0,
            l_phi: 1.0,
        }
    }

    pub fn logistic(beta_phi: f64, l_phi: f64) -> Result<Self> {
        let spec = SurrogateSpec {
            kind: SurrogateKind::Logistic,
            beta_phi,
            l_phi,
        };
        spec.validate()?;
        Ok(spec)
    }

    /// Logistic potential with constants derived from a bound `|v[j]| <= score_bound`
    /// on every realizable score. On zero-sum directions the softmax Hessian
    /// is bounded below by the smallest attainable probability, which is at
    /// least `exp(-2 * score_bound) / K`; its largest eigenvalue never exceeds 1.
    pub fn logistic_for_score_bound(score_bound: f64, classes: usize) -> Result<Self> {
        if !(score_bound.is_finite() && score_bound >= 0.0) || classes < 2 {
            return Err(Error::invalid(
                "logistic constants need a finite score bound and K >= 2",
            ));
        }
        SurrogateSpec::logistic((-2.0 * score_bound).exp() / classes as f64, 1.0)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.beta_phi > 0.0 && self.l_phi > 0.0) {
            return Err(Error::invalid("beta_phi and l_phi must be positive"));
        }
        if self.beta_phi > self.l_phi {
            return Err(Error::invalid("beta_phi must not exceed l_phi"));
        }
        if self.kind == SurrogateKind::Squared && (self.beta_phi != 1.0 || self.l_phi != 1.0) {
            return Err(Error::invalid(
                "squared potential has beta_phi = l_phi = 1",
            ));
        }
        Ok(())
    }

    /// `Phi(v)`.
    pub fn potential(&self, v: &ScoreVector) -> Result<f64> {
        check_finite(v.as_slice())?;
        Ok(self.potential_raw(v.as_slice()))
    }

    pub(crate) fn potential_raw(&self, v: &[f64]) -> f64 {
        match self.kind {
            SurrogateKind::Squared => 0.5 * v.iter().map(|x| x * x).sum::<f64>(),
            SurrogateKind::Logistic => log_sum_exp(v),
        }
    }

    /// `l(v, y) = Phi(v) - v[y]`.
    pub fn loss(&self, v: &ScoreVector, y: usize) -> Result<f64> {
        if y >= v.len() {
            return Err(Error::invalid(format!(
                "class index {y} out of range for K = {}",
                v.len()
            )));
        }
        Ok(self.potential(v)? - v.as_slice()[y])
    }

    /// Expected loss when `y ~ target`: `Phi(v) - <v, target>`.
    pub(crate) fn expected_loss_raw(&self, v: &[f64], target: &[f64]) -> f64 {
        self.potential_raw(v) - v.iter().zip(target).map(|(a, b)| a * b).sum::<f64>()
    }

    /// `grad Phi(v)` without any domain check. Used by the optimizers.
    pub(crate) fn gradient_raw(&self, v: &[f64]) -> Vec<f64> {
        match self.kind {
            SurrogateKind::Squared => v.to_vec(),
            SurrogateKind::Logistic => softmax(v),
        }
    }

    /// The link `phi(v) = grad Phi(v)`.
    pub fn link(&self, v: &ScoreVector) -> Result<ProbVector> {
        check_finite(v.as_slice())?;
        match self.kind {
            SurrogateKind::Squared => {
                let s = v.as_slice();
                let total: f64 = s.iter().sum();
                if s.iter().any(|p| *p < -SIMPLEX_TOL || *p > 1.0 + SIMPLEX_TOL)
                    || (total - 1.0).abs() > SIMPLEX_TOL
                {
                    return Err(Error::Domain(format!(
                        "squared link expects simplex-valued scores, got {s:?}"
                    )));
                }
                let clamped: Vec<f64> = s.iter().map(|p| p.clamp(0.0, 1.0)).collect();
                let total: f64 = clamped.iter().sum();
                Ok(ProbVector(clamped.into_iter().map(|p| p / total).collect()))
            }
            SurrogateKind::Logistic => Ok(ProbVector(softmax(v.as_slice()))),
        }
    }

    /// `c_f = argmax phi(v)`, lowest index on ties.
    pub fn classify(&self, v: &ScoreVector) -> Result<usize> {
        Ok(self.link(v)?.argmax())
    }
}

fn check_finite(v: &[f64]) -> Result<()> {
    if v.iter().all(|x| x.is_finite()) {
        Ok(())
    } else {
        Err(Error::invalid("non-finite score"))
    }
}

/// Index of the largest entry; the lowest index wins ties.
pub fn argmax(values: &[f64]) -> usize {
    let mut best = 0;
    for (i, v) in values.iter().enumerate().skip(1) {
        if *v > values[best] {
            best = i;
        }
    }
    best
}

pub fn log_sum_exp(v: &[f64]) -> f64 {
    let m = v.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    m + v.iter().map(|x| (x - m).exp()).sum::<f64>().ln()
}

pub fn softmax(v: &[f64]) -> Vec<f64> {
    let m = v.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let e: Vec<f64> = v.iter().map(|x| (x - m).exp()).collect();
    let z: f64 = e.iter().sum();
    e.into_iter().map(|x| x / z).collect()
}

/// Top entry minus the runner-up.
pub fn margin(p: &ProbVector) -> f64 {
    let s = p.as_slice();
    let top = argmax(s);
    let second = s
        .iter()
        .enumerate()
        .filter(|(i, _)| *i != top)
        .map(|(_, v)| *v)
        .fold(f64::NEG_INFINITY, f64::max);
    (s[top] - second).max(0.0)
}

/// `max_c' p[c'] - p[c]`.
pub fn gap(p: &ProbVector, c: usize) -> Result<f64> {
    let s = p.as_slice();
    if c >= s.len() {
        return Err(Error::invalid(format!(
            "class index {c} out of range for K = {}",
            s.len()
        )));
    }
    Ok(s[argmax(s)] - s[c])
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn sv(v: &[f64]) -> ScoreVector {
        ScoreVector::new(v.to_vec()).unwrap()
    }

    fn pv(v: &[f64]) -> ProbVector {
        ProbVector::new(v.to_vec()).unwrap()
    }

    #[test]
    fn potential_examples() {
        let sq = SurrogateSpec::squared();
        let lg = SurrogateSpec::logistic(0.1, 1.0).unwrap();
        assert_eq!(sq.potential(&sv(&[0.0, 0.0])).unwrap(), 0.0);
        assert_eq!(sq.potential(&sv(&[1.0, 1.0])).unwrap(), 1.0);
        assert!((lg.potential(&sv(&[0.0, 0.0])).unwrap() - 2f64.ln()).abs() < 1e-15);
        // max-shift keeps large scores finite
        assert!(lg.potential(&sv(&[700.0, -700.0])).unwrap().is_finite());
        assert!(ScoreVector::new(vec![f64::NAN, 0.0]).is_err());
    }

    #[test]
    fn loss_examples() {
        let sq = SurrogateSpec::squared();
        let lg = SurrogateSpec::logistic(0.1, 1.0).unwrap();
        assert_eq!(sq.loss(&sv(&[0.0, 0.0]), 0).unwrap(), 0.0);
        assert!((lg.loss(&sv(&[0.0, 0.0]), 0).unwrap() - 2f64.ln()).abs() < 1e-15);
        let v = sv(&[0.75, 0.25]);
        assert!((sq.loss(&v, 0).unwrap() + 0.4375).abs() < 1e-15);
        // same value through 0.5 * |v - e_y|^2 - 0.5
        let alt = 0.5 * ((0.75f64 - 1.0).powi(2) + 0.25f64.powi(2)) - 0.5;
        assert!((alt + 0.4375).abs() < 1e-15);
        assert!(matches!(sq.loss(&v, 2), Err(Error::InvalidArgument(_))));
    }

    #[test]
    fn link_examples() {
        let sq = SurrogateSpec::squared();
        let lg = SurrogateSpec::logistic(0.1, 1.0).unwrap();
        assert_eq!(lg.link(&sv(&[0.0, 0.0])).unwrap().as_slice(), &[0.5, 0.5]);
        let p = lg.link(&sv(&[3f64.ln(), 0.0])).unwrap();
        assert!((p.as_slice()[0] - 0.75).abs() < 1e-15);
        assert!((p.as_slice()[1] - 0.25).abs() < 1e-15);
        assert_eq!(sq.link(&sv(&[0.3, 0.7])).unwrap().as_slice(), &[0.3, 0.7]);
        assert!(matches!(sq.link(&sv(&[0.6, 0.6])), Err(Error::Domain(_))));
        assert!(matches!(sq.link(&sv(&[1.2, -0.2])), Err(Error::Domain(_))));
    }

    #[test]
    fn margin_and_gap_examples() {
        assert!((margin(&pv(&[0.7, 0.2, 0.1])) - 0.5).abs() < 1e-15);
        assert_eq!(margin(&pv(&[0.5, 0.5])), 0.0);
        assert_eq!(margin(&pv(&[1.0, 0.0, 0.0])), 1.0);
        let p = pv(&[0.5, 0.3, 0.2]);
        assert!((gap(&p, 2).unwrap() - 0.3).abs() < 1e-15);
        assert_eq!(gap(&p, 0).unwrap(), 0.0);
        assert!((gap(&pv(&[0.25, 0.25, 0.5]), 0).unwrap() - 0.25).abs() < 1e-15);
        assert!(gap(&p, 3).is_err());
    }

    #[test]
    fn classify_examples() {
        let sq = SurrogateSpec::squared();
        let lg = SurrogateSpec::logistic(0.1, 1.0).unwrap();
        assert_eq!(lg.classify(&sv(&[2.0, 1.0, 0.0])).unwrap(), 0);
        assert_eq!(sq.classify(&sv(&[0.2, 0.8])).unwrap(), 1);
        assert_eq!(lg.classify(&sv(&[0.0, 0.0])).unwrap(), 0);
    }

    #[test]
    fn spec_validation() {
        assert!(SurrogateSpec::logistic(2.0, 1.0).is_err());
        assert!(SurrogateSpec::logistic(0.0, 1.0).is_err());
        let bad = SurrogateSpec {
            kind: SurrogateKind::Squared,
            beta_phi: 0.5,
            l_phi: 1.0,
        };
        assert!(bad.validate().is_err());
        let s = SurrogateSpec::logistic_for_score_bound(1.0, 3).unwrap();
        assert!((s.beta_phi - (-2f64).exp() / 3.0).abs() < 1e-15);
    }

    fn simplex_point(a: f64) -> Vec<f64> {
        vec![a, 1.0 - a]
    }

    fn bregman(spec: &SurrogateSpec, v: &[f64], w: &[f64]) -> f64 {
        let g = spec.gradient_raw(w);
        spec.potential_raw(v)
            - spec.potential_raw(w)
            - g.iter().zip(v.iter().zip(w)).map(|(gi, (a, b))| gi * (a - b)).sum::<f64>()
    }

    proptest! {
        #[test]
        fn squared_bregman_is_half_distance(a in 0.0f64..1.0, b in 0.0f64..1.0) {
            let spec = SurrogateSpec::squared();
            let v = simplex_point(a);
            let w = simplex_point(b);
            let d2: f64 = v.iter().zip(&w).map(|(x, y)| (x - y).powi(2)).sum();
            prop_assert!((bregman(&spec, &v, &w) - 0.5 * d2).abs() < 1e-9);
        }

        // Zero-sum score differences: the softmax Hessian is degenerate along
        // the all-ones direction, so curvature bounds only hold on its complement.
        #[test]
        fn logistic_bregman_within_configured_constants(
            raw_v in proptest::collection::vec(-1.0f64..1.0, 3),
            raw_w in proptest::collection::vec(-1.0f64..1.0, 3),
        ) {
            let center = |x: &[f64]| {
                let m = x.iter().sum::<f64>() / x.len() as f64;
                x.iter().map(|e| e - m).collect::<Vec<f64>>()
            };
            let mut v = center(&raw_v);
            let mut w = center(&raw_w);
            // keep every coordinate inside [-1, 1]
            for s in [&mut v, &mut w] {
                let m = s.iter().fold(0.0f64, |a, e| a.max(e.abs()));
                if m > 1.0 { s.iter_mut().for_each(|e| *e /= m); }
            }
            let spec = SurrogateSpec::logistic_for_score_bound(1.0, 3).unwrap();
            let d2: f64 = v.iter().zip(&w).map(|(x, y)| (x - y).powi(2)).sum();
            let b = bregman(&spec, &v, &w);
            prop_assert!(b >= 0.5 * spec.beta_phi * d2 - 1e-12);
            prop_assert!(b <= 0.5 * spec.l_phi * d2 + 1e-12);
        }

        #[test]
        fn gradient_matches_central_differences(v in proptest::collection::vec(-3.0f64..3.0, 2..5)) {
            for spec in [SurrogateSpec::squared(), SurrogateSpec::logistic(0.01, 1.0).unwrap()] {
                let g = spec.gradient_raw(&v);
                for j in 0..v.len() {
                    let h = 1e-5;
                    let mut up = v.clone();
                    let mut dn = v.clone();
                    up[j] += h;
                    dn[j] -= h;
                    let fd = (spec.potential_raw(&up) - spec.potential_raw(&dn)) / (2.0 * h);
                    prop_assert!((fd - g[j]).abs() < 1e-6);
                }
            }
        }

        #[test]
        fn squared_loss_is_affine_in_distance(a in 0.0f64..1.0, y in 0usize..2) {
            let spec = SurrogateSpec::squared();
            let v = simplex_point(a);
            let mut e = [0.0, 0.0];
            e[y] = 1.0;
            let d2: f64 = v.iter().zip(&e).map(|(x, t)| (x - t).powi(2)).sum();
            let l = spec.loss(&ScoreVector::new(v).unwrap(), y).unwrap();
            prop_assert!((l - (0.5 * d2 - 0.5)).abs() < 1e-12);
        }

        #[test]
        fn logistic_classify_shift_invariant(
            v in proptest::collection::vec(-5.0f64..5.0, 2..6),
            shift in -50.0f64..50.0,
        ) {
            let spec = SurrogateSpec::logistic(0.01, 1.0).unwrap();
            let shifted: Vec<f64> = v.iter().map(|x| x + shift).collect();
            let a = spec.classify(&ScoreVector::new(v).unwrap()).unwrap();
            let b = spec.classify(&ScoreVector::new(shifted).unwrap()).unwrap();
            prop_assert_eq!(a, b);
        }
    }
}
