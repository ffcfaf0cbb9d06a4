//! Affine-in-parameters score classes `f_theta(x) = a(x) + J_x theta` over a
//! Euclidean norm ball.
//!
//! * `binary_ball_linear`: `f(x) = ((1 + w.x)/2, (1 - w.x)/2)`, `|w| <= 1`.
//! * `multiclass_linear`: `f(x) = W x` with `W` stored row-major (K x d),
//!   `|W|_F <= radius`.
//!
//! A small tabulated class over a finite input set is also provided for
//! non-convex counterexamples.

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::surrogate::ScoreVector;

pub type Input = Vec<f64>;

/// Slack allowed when checking norm-ball feasibility.
pub const FEAS_TOL: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ClassKind {
    BinaryBallLinear,
    MulticlassLinear,
}

fn default_x_bound() -> f64 {
    1.0
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClassSpec {
    pub kind: ClassKind,
    pub d: usize,
    pub k: usize,
    pub radius: f64,
    /// Bound on `|x|` for admissible inputs.
    #[serde(default = "default_x_bound")]
    pub x_bound: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Params {
    pub theta: Vec<f64>,
}

impl Params {
    pub fn new(theta: Vec<f64>) -> Self {
        Params { theta }
    }

    pub fn norm(&self) -> f64 {
        norm(&self.theta)
    }
}

pub(crate) fn norm(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

impl ClassSpec {
    pub fn binary(d: usize) -> Self {
        ClassSpec {
            kind: ClassKind::BinaryBallLinear,
            d,
            k: 2,
            radius: 1.0,
            x_bound: 1.0,
        }
    }

    pub fn multiclass(d: usize, k: usize, radius: f64) -> Self {
        ClassSpec {
            kind: ClassKind::MulticlassLinear,
            d,
            k,
            radius,
            x_bound: 1.0,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.d == 0 {
            return Err(Error::invalid("class dimension d must be positive"));
        }
        if !(self.x_bound.is_finite() && self.x_bound > 0.0) {
            return Err(Error::invalid("x_bound must be positive and finite"));
        }
        match self.kind {
            ClassKind::BinaryBallLinear => {
                if self.k != 2 || self.radius != 1.0 {
                    return Err(Error::invalid(
                        "binary_ball_linear requires K = 2 and radius = 1",
                    ));
                }
            }
            ClassKind::MulticlassLinear => {
                if self.k < 2 {
                    return Err(Error::invalid("multiclass_linear requires K >= 2"));
                }
                if !(self.radius.is_finite() && self.radius > 0.0) {
                    return Err(Error::invalid("multiclass_linear radius must be finite and positive"));
                }
            }
        }
        Ok(())
    }

    /// Number of free parameters.
    pub fn param_dim(&self) -> usize {
        match self.kind {
            ClassKind::BinaryBallLinear => self.d,
            ClassKind::MulticlassLinear => self.k * self.d,
        }
    }

    /// Bound on `|f(x)[j]|` over the class and admissible inputs.
    pub fn score_bound(&self) -> f64 {
        match self.kind {
            ClassKind::BinaryBallLinear => 1.0,
            ClassKind::MulticlassLinear => self.radius * self.x_bound,
        }
    }

    pub fn zeros(&self) -> Params {
        Params::new(vec![0.0; self.param_dim()])
    }

    fn check_params(&self, p: &Params) -> Result<()> {
        if p.theta.len() != self.param_dim() {
            return Err(Error::invalid(format!(
                "expected {} parameters, got {}",
                self.param_dim(),
                p.theta.len()
            )));
        }
        if p.theta.iter().any(|v| !v.is_finite()) {
            return Err(Error::invalid("non-finite parameters"));
        }
        Ok(())
    }

    fn check_input(&self, x: &[f64]) -> Result<()> {
        if x.len() != self.d {
            return Err(Error::invalid(format!(
                "expected input of dimension {}, got {}",
                self.d,
                x.len()
            )));
        }
        if x.iter().any(|v| !v.is_finite()) {
            return Err(Error::invalid("non-finite input"));
        }
        Ok(())
    }

    /// Rejects inputs outside the admissible ball as well as malformed ones.
    pub fn validate_input(&self, x: &[f64]) -> Result<()> {
        self.check_input(x)?;
        if norm(x) > self.x_bound + FEAS_TOL {
            return Err(Error::invalid(format!(
                "input norm {} exceeds x_bound {}",
                norm(x),
                self.x_bound
            )));
        }
        Ok(())
    }

    pub fn is_feasible(&self, p: &Params) -> bool {
        p.theta.len() == self.param_dim() && p.norm() <= self.radius + FEAS_TOL
    }

    pub fn evaluate(&self, p: &Params, x: &[f64]) -> Result<ScoreVector> {
        self.check_params(p)?;
        self.check_input(x)?;
        Ok(ScoreVector::from_vec_unchecked(self.eval_raw(&p.theta, x)))
    }

    /// Scores without shape checks.
    pub(crate) fn eval_raw(&self, theta: &[f64], x: &[f64]) -> Vec<f64> {
        match self.kind {
            ClassKind::BinaryBallLinear => {
                let s = dot(theta, x);
                let h = 0.5 * s;
                vec![0.5 + h, 0.5 - h]
            }
            ClassKind::MulticlassLinear => theta
                .chunks_exact(self.d)
                .map(|row| dot(row, x))
                .collect(),
        }
    }

    /// `J_x u`: the change in scores induced by a parameter direction `u`.
    #[cfg(test)]
    fn jac_apply(&self, x: &[f64], u: &[f64]) -> Vec<f64> {
        match self.kind {
            ClassKind::BinaryBallLinear => {
                let s = 0.5 * dot(u, x);
                vec![s, -s]
            }
            ClassKind::MulticlassLinear => u.chunks_exact(self.d).map(|row| dot(row, x)).collect(),
        }
    }

    /// `J_x^T g`: pulls a score-space vector back to parameter space.
    pub(crate) fn jac_transpose(&self, x: &[f64], g: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; self.param_dim()];
        self.jac_transpose_add(x, g, 1.0, &mut out);
        out
    }

    pub(crate) fn jac_transpose_add(&self, x: &[f64], g: &[f64], scale: f64, out: &mut [f64]) {
        match self.kind {
            ClassKind::BinaryBallLinear => {
                let c = scale * 0.5 * (g[0] - g[1]);
                for (o, xi) in out.iter_mut().zip(x) {
                    *o += c * xi;
                }
            }
            ClassKind::MulticlassLinear => {
                for (row, gk) in out.chunks_exact_mut(self.d).zip(g) {
                    let c = scale * gk;
                    for (o, xi) in row.iter_mut().zip(x) {
                        *o += c * xi;
                    }
                }
            }
        }
    }

    /// Euclidean projection onto the parameter ball (radial scaling).
    pub fn project(&self, p: &Params) -> Params {
        Params::new(self.project_raw(&p.theta))
    }

    pub(crate) fn project_raw(&self, theta: &[f64]) -> Vec<f64> {
        let n = norm(theta);
        if n <= self.radius {
            theta.to_vec()
        } else {
            theta.iter().map(|t| t * self.radius / n).collect()
        }
    }

    /// `sum_x |f_p(x) - f_q(x)|^2`.
    pub fn param_distance_sq(&self, p: &Params, q: &Params, points: &[Input]) -> Result<f64> {
        self.check_params(p)?;
        self.check_params(q)?;
        let mut total = 0.0;
        for x in points {
            self.check_input(x)?;
            let a = self.eval_raw(&p.theta, x);
            let b = self.eval_raw(&q.theta, x);
            total += a.iter().zip(&b).map(|(u, v)| (u - v).powi(2)).sum::<f64>();
        }
        Ok(total)
    }

    /// Parameter-space quadratic form `M` with
    /// `sum_x |f_p(x) - f_q(x)|^2 = (p - q)^T M (p - q)`, given the feature
    /// Gram matrix `A = sum_x x x^T`.
    pub(crate) fn distance_form(&self, gram: &DMatrix<f64>) -> DMatrix<f64> {
        match self.kind {
            ClassKind::BinaryBallLinear => gram * 0.5,
            ClassKind::MulticlassLinear => {
                let d = self.d;
                let mut m = DMatrix::zeros(self.param_dim(), self.param_dim());
                for k in 0..self.k {
                    m.view_mut((k * d, k * d), (d, d)).copy_from(gram);
                }
                m
            }
        }
    }

    /// Scale applied to each eigenvalue of the Gram matrix in the distance
    /// form (binary: 1/2; multiclass: 1, repeated K times).
    pub(crate) fn distance_scale(&self) -> f64 {
        match self.kind {
            ClassKind::BinaryBallLinear => 0.5,
            ClassKind::MulticlassLinear => 1.0,
        }
    }
}

/// Feature Gram matrix `sum_x w_x x x^T`.
pub fn gram_matrix(d: usize, points: &[Input]) -> DMatrix<f64> {
    let mut a = DMatrix::zeros(d, d);
    for x in points {
        for i in 0..d {
            for j in 0..d {
                a[(i, j)] += x[i] * x[j];
            }
        }
    }
    a
}

/// A finite, tabulated class on a finite input set. Used to exhibit
/// failures of the excess-risk transfer for non-convex classes.
#[derive(Debug, Clone, PartialEq)]
pub struct FiniteClass {
    pub atoms: Vec<Input>,
    /// `members[m][j]` is member `m`'s score vector at `atoms[j]`.
    pub members: Vec<Vec<Vec<f64>>>,
}

impl FiniteClass {
    pub fn new(atoms: Vec<Input>, members: Vec<Vec<Vec<f64>>>) -> Result<Self> {
        if atoms.is_empty() || members.is_empty() {
            return Err(Error::invalid("finite class needs atoms and members"));
        }
        if members.iter().any(|m| m.len() != atoms.len()) {
            return Err(Error::invalid("each member must score every atom"));
        }
        Ok(FiniteClass { atoms, members })
    }

    pub fn scores(&self, member: usize, x: &[f64]) -> Result<Vec<f64>> {
        let j = self
            .atoms
            .iter()
            .position(|a| a.as_slice() == x)
            .ok_or_else(|| Error::invalid("input is not an atom of the finite class"))?;
        self.members
            .get(member)
            .map(|m| m[j].clone())
            .ok_or_else(|| Error::invalid(format!("no member {member}")))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn evaluate_examples() {
        let b = ClassSpec::binary(3);
        let s = b.evaluate(&b.zeros(), &[0.3, -0.2, 0.1]).unwrap();
        assert_eq!(s.as_slice(), &[0.5, 0.5]);
        let s = b.evaluate(&Params::new(vec![1.0, 0.0, 0.0]), &[1.0, 0.0, 0.0]).unwrap();
        assert_eq!(s.as_slice(), &[1.0, 0.0]);
        let m = ClassSpec::multiclass(3, 3, 2.0);
        let eye = vec![1.0, 0.0, 0.0, 0.0, 1.0, 0.0, 0.0, 0.0, 1.0];
        let s = m.evaluate(&Params::new(eye), &[1.0, 0.0, 0.0]).unwrap();
        assert_eq!(s.as_slice(), &[1.0, 0.0, 0.0]);
        assert!(b.evaluate(&b.zeros(), &[1.0]).is_err());
    }

    #[test]
    fn project_examples() {
        let b = ClassSpec::binary(2);
        let p = b.project(&Params::new(vec![2.0, 0.0]));
        assert_eq!(p.theta, vec![1.0, 0.0]);
        let q = Params::new(vec![0.3, 0.4]);
        assert_eq!(b.project(&q), q);
        let m = ClassSpec::multiclass(2, 2, 1.0);
        let w = Params::new(vec![2.0, 2.0, 2.0, 2.0]);
        assert_eq!(m.project(&w).theta, vec![0.5; 4]);
    }

    #[test]
    fn distance_examples() {
        let b = ClassSpec::binary(1);
        let p = Params::new(vec![1.0]);
        let q = Params::new(vec![0.0]);
        assert_eq!(b.param_distance_sq(&p, &p, &[vec![1.0]]).unwrap(), 0.0);
        assert_eq!(b.param_distance_sq(&p, &q, &[vec![1.0]]).unwrap(), 0.5);
        assert_eq!(b.param_distance_sq(&p, &q, &[]).unwrap(), 0.0);
    }

    #[test]
    fn validation() {
        assert!(ClassSpec::binary(2).validate().is_ok());
        let mut b = ClassSpec::binary(2);
        b.k = 3;
        assert!(b.validate().is_err());
        assert!(ClassSpec::multiclass(2, 3, f64::INFINITY).validate().is_err());
        assert!(ClassSpec::binary(2).validate_input(&[1.0, 1.0]).is_err());
    }

    #[test]
    fn finite_class_lookup() {
        let fc = FiniteClass::new(vec![vec![0.0]], vec![vec![vec![0.49, 0.51]], vec![vec![0.7, 0.3]]])
            .unwrap();
        assert_eq!(fc.scores(1, &[0.0]).unwrap(), vec![0.7, 0.3]);
        assert!(fc.scores(0, &[1.0]).is_err());
    }

    fn arb_class() -> impl Strategy<Value = ClassSpec> {
        prop_oneof![
            (1usize..4).prop_map(ClassSpec::binary),
            (1usize..4, 2usize..4, 0.5f64..3.0).prop_map(|(d, k, r)| ClassSpec::multiclass(d, k, r)),
        ]
    }

    fn arb_case() -> impl Strategy<Value = (ClassSpec, Vec<f64>, Vec<f64>, Vec<f64>)> {
        arb_class().prop_flat_map(|c| {
            let p = c.param_dim();
            let d = c.d;
            (
                Just(c),
                proptest::collection::vec(-2.0f64..2.0, p),
                proptest::collection::vec(-2.0f64..2.0, p),
                proptest::collection::vec(-1.0f64..1.0, d),
            )
        })
    }

    proptest! {
        #[test]
        fn affine_in_parameters((c, a, b, x) in arb_case(), lam in 0.0f64..1.0) {
            let p = c.project_raw(&a);
            let q = c.project_raw(&b);
            let mix: Vec<f64> = p.iter().zip(&q).map(|(u, v)| lam * u + (1.0 - lam) * v).collect();
            prop_assert!(norm(&mix) <= c.radius + FEAS_TOL);
            let fm = c.eval_raw(&mix, &x);
            let fp = c.eval_raw(&p, &x);
            let fq = c.eval_raw(&q, &x);
            for j in 0..fm.len() {
                prop_assert!((fm[j] - (lam * fp[j] + (1.0 - lam) * fq[j])).abs() < 1e-12);
            }
        }

        #[test]
        fn projection_lipschitz_and_idempotent((c, a, b, _x) in arb_case()) {
            let pa = c.project_raw(&a);
            let pb = c.project_raw(&b);
            let d_in: f64 = a.iter().zip(&b).map(|(u, v)| (u - v).powi(2)).sum::<f64>().sqrt();
            let d_out: f64 = pa.iter().zip(&pb).map(|(u, v)| (u - v).powi(2)).sum::<f64>().sqrt();
            prop_assert!(d_out <= d_in + 1e-12);
            let twice = c.project_raw(&pa);
            for (u, v) in twice.iter().zip(&pa) {
                prop_assert!((u - v).abs() < 1e-15);
            }
        }

        #[test]
        fn binary_antisymmetry(w in proptest::collection::vec(-1.0f64..1.0, 3), x in proptest::collection::vec(-1.0f64..1.0, 3)) {
            let c = ClassSpec::binary(3);
            let w = c.project_raw(&w);
            let neg: Vec<f64> = x.iter().map(|v| -v).collect();
            let s = c.eval_raw(&w, &x)[0] + c.eval_raw(&w, &neg)[0];
            // equal up to one rounding of each coordinate
            prop_assert!((s - 1.0).abs() <= f64::EPSILON);
        }

        #[test]
        fn distance_form_matches_direct((c, a, b, x) in arb_case(), y in proptest::collection::vec(-1.0f64..1.0, 1..4)) {
            let pts = vec![x.clone(), y.iter().cycle().take(c.d).cloned().collect::<Vec<f64>>()];
            let m = c.distance_form(&gram_matrix(c.d, &pts));
            let diff = nalgebra::DVector::from_iterator(a.len(), a.iter().zip(&b).map(|(u, v)| u - v));
            let quad = (diff.transpose() * &m * &diff)[(0, 0)];
            let direct = c.param_distance_sq(&Params::new(a.clone()), &Params::new(b.clone()), &pts).unwrap();
            prop_assert!((quad - direct).abs() < 1e-9 * (1.0 + direct));
        }

        #[test]
        fn jacobian_transpose_is_adjoint((c, a, _b, x) in arb_case(), g in proptest::collection::vec(-1.0f64..1.0, 3)) {
            let gk: Vec<f64> = g.iter().cycle().take(c.k).cloned().collect();
            let lhs = dot(&c.jac_apply(&x, &a), &gk);
            let rhs = dot(&a, &c.jac_transpose(&x, &gk));
            prop_assert!((lhs - rhs).abs() < 1e-12);
        }
    }
}
