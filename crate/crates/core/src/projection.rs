//! Geometry of `{theta : |theta| <= R} ∩ {theta : (theta - c)^T M (theta - c) <= B}`
//! for the parameter-space forms produced by the linear classes.
//!
//! `M` is block diagonal with identical blocks `s * A` (`A` a feature Gram
//! matrix), so a single eigendecomposition of `A` diagonalizes the whole
//! problem. Everything below works in those eigen-coordinates; the ball is
//! rotation invariant.

use nalgebra::{DMatrix, SymmetricEigen};

use crate::funcclass::{dot, norm, ClassSpec};

/// Inner iterations of the alternating projection.
pub const DYKSTRA_ITERS: usize = 100;
/// Early exit when successive Dykstra iterates move less than this.
pub const DYKSTRA_TOL: f64 = 1e-10;

const NULL_REL: f64 = 1e-12;
const FEAS_SLACK: f64 = 1e-9;

fn dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).powi(2)).sum::<f64>().sqrt()
}

#[derive(Debug, Clone)]
pub struct FeasibleSet {
    blocks: usize,
    d: usize,
    /// Eigenvectors of `A`, one per column.
    basis: DMatrix<f64>,
    /// Diagonal of `M` in eigen-coordinates.
    mu: Vec<f64>,
    null: Vec<bool>,
    center: Vec<f64>,
    center_e: Vec<f64>,
    radius: f64,
    b: f64,
}

/// Outcome of maximizing a linear function over the set.
#[derive(Debug, Clone, PartialEq)]
pub struct LinearMax {
    /// Value at a feasible witness.
    pub lower: f64,
    /// Certified upper bound on the maximum.
    pub upper: f64,
    pub witness: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Ascent {
    pub value: f64,
    pub theta: Vec<f64>,
    pub converged: bool,
}

impl FeasibleSet {
    /// `gram` is `sum_x x x^T` (or a second-moment matrix); `b` the radius.
    pub fn new(cls: &ClassSpec, center: &[f64], gram: &DMatrix<f64>, b: f64) -> Self {
        let d = cls.d;
        let blocks = cls.param_dim() / d;
        let scale = cls.distance_scale();
        let eig = SymmetricEigen::new(gram.clone());
        let a: Vec<f64> = eig.eigenvalues.iter().map(|v| v.max(0.0) * scale).collect();
        let top = a.iter().cloned().fold(0.0, f64::max);
        let mut mu = Vec::with_capacity(blocks * d);
        for _ in 0..blocks {
            mu.extend_from_slice(&a);
        }
        let null = mu.iter().map(|m| *m <= NULL_REL * top || *m == 0.0).collect();
        let mut fs = FeasibleSet {
            blocks,
            d,
            basis: eig.eigenvectors,
            mu,
            null,
            center: center.to_vec(),
            center_e: Vec::new(),
            radius: cls.radius,
            b: b.max(0.0),
        };
        fs.center_e = fs.to_eigen(center);
        fs
    }

    pub fn radius_b(&self) -> f64 {
        self.b
    }

    pub fn center(&self) -> &[f64] {
        &self.center
    }

    fn to_eigen(&self, theta: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; theta.len()];
        for k in 0..self.blocks {
            let src = &theta[k * self.d..(k + 1) * self.d];
            for i in 0..self.d {
                out[k * self.d + i] = (0..self.d).map(|j| self.basis[(j, i)] * src[j]).sum();
            }
        }
        out
    }

    fn from_eigen(&self, e: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; e.len()];
        for k in 0..self.blocks {
            let src = &e[k * self.d..(k + 1) * self.d];
            for j in 0..self.d {
                out[k * self.d + j] = (0..self.d).map(|i| self.basis[(j, i)] * src[i]).sum();
            }
        }
        out
    }

    fn q_e(&self, e: &[f64]) -> f64 {
        e.iter()
            .zip(&self.center_e)
            .zip(&self.mu)
            .map(|((t, c), m)| m * (t - c).powi(2))
            .sum()
    }

    /// `(theta - c)^T M (theta - c)`.
    pub fn quad(&self, theta: &[f64]) -> f64 {
        self.q_e(&self.to_eigen(theta))
    }

    pub fn contains(&self, theta: &[f64]) -> bool {
        norm(theta) <= self.radius + FEAS_SLACK && self.quad(theta) <= self.b + FEAS_SLACK
    }

    fn project_ball_e(&self, e: &[f64]) -> Vec<f64> {
        let n = norm(e);
        if n <= self.radius {
            e.to_vec()
        } else {
            e.iter().map(|v| v * self.radius / n).collect()
        }
    }

    /// Exact projection onto the ellipsoid: `c + (I + lambda M)^{-1} (z - c)`
    /// with `lambda` found by bisection on the monotone constraint residual.
    fn project_ellipsoid_e(&self, z: &[f64]) -> Vec<f64> {
        let q = self.q_e(z);
        if q <= self.b {
            return z.to_vec();
        }
        let at = |lam: f64| -> Vec<f64> {
            z.iter()
                .zip(&self.center_e)
                .zip(&self.mu)
                .zip(&self.null)
                .map(|(((zi, ci), m), nul)| {
                    if *nul {
                        *zi
                    } else if lam.is_infinite() {
                        *ci
                    } else {
                        ci + (zi - ci) / (1.0 + lam * m)
                    }
                })
                .collect()
        };
        if self.b <= 0.0 {
            return at(f64::INFINITY);
        }
        let mut lo = 0.0;
        let mut hi = 1.0;
        while self.q_e(&at(hi)) > self.b {
            lo = hi;
            hi *= 4.0;
            if hi > 1e300 {
                return at(f64::INFINITY);
            }
        }
        for _ in 0..200 {
            let mid = if lo > 0.0 { (lo * hi).sqrt() } else { 0.5 * hi };
            if self.q_e(&at(mid)) > self.b {
                lo = mid;
            } else {
                hi = mid;
            }
            if hi - lo <= 1e-15 * hi {
                break;
            }
        }
        at(hi)
    }

    /// Pulls a candidate back along the segment to the center until both
    /// constraints hold.
    fn restore_e(&self, e: &[f64]) -> Vec<f64> {
        let delta: Vec<f64> = e.iter().zip(&self.center_e).map(|(a, c)| a - c).collect();
        let mut t: f64 = 1.0;
        let nrm = norm(e);
        if nrm > self.radius {
            let a = dot(&delta, &delta);
            let cd = dot(&self.center_e, &delta);
            let cc = dot(&self.center_e, &self.center_e);
            let disc = (cd * cd - a * (cc - self.radius * self.radius)).max(0.0);
            let tb = if a > 0.0 { (-cd + disc.sqrt()) / a } else { 0.0 };
            t = t.min(tb.max(0.0));
        }
        let qd: f64 = delta.iter().zip(&self.mu).map(|(v, m)| m * v * v).sum();
        if qd > self.b {
            t = t.min((self.b / qd).sqrt());
        }
        if t < 1.0 {
            t *= 1.0 - 1e-12;
        }
        self.center_e
            .iter()
            .zip(&delta)
            .map(|(c, v)| c + t * v)
            .collect()
    }

    fn project_e(&self, z: &[f64]) -> Vec<f64> {
        let mut x = z.to_vec();
        let mut p = vec![0.0; z.len()];
        let mut q = vec![0.0; z.len()];
        for _ in 0..DYKSTRA_ITERS {
            let xp: Vec<f64> = x.iter().zip(&p).map(|(a, b)| a + b).collect();
            let y = self.project_ball_e(&xp);
            for i in 0..p.len() {
                p[i] = xp[i] - y[i];
            }
            let yq: Vec<f64> = y.iter().zip(&q).map(|(a, b)| a + b).collect();
            let next = self.project_ellipsoid_e(&yq);
            for i in 0..q.len() {
                q[i] = yq[i] - next[i];
            }
            let moved = norm(&next.iter().zip(&x).map(|(a, b)| a - b).collect::<Vec<f64>>());
            x = next;
            if moved < DYKSTRA_TOL {
                break;
            }
        }
        let x = self.restore_e(&x);
        match self.kkt_project_e(z) {
            Some(k) if dist(&k, z) < dist(&x, z) => k,
            _ => x,
        }
    }

    /// Exact projection when both constraints are active:
    /// `x_i = (z_i + mu m_i c_i) / (1 + lambda + mu m_i)`, with `lambda`
    /// solving the ball constraint for each `mu` and `mu` found by bisection on
    /// the ellipsoid residual, which is monotone along the concave dual.
    fn kkt_project_e(&self, z: &[f64]) -> Option<Vec<f64>> {
        if self.b <= 0.0 {
            return None;
        }
        let at = |lam: f64, mu: f64| -> Vec<f64> {
            (0..z.len())
                .map(|i| {
                    let m = if self.null[i] { 0.0 } else { self.mu[i] };
                    (z[i] + mu * m * self.center_e[i]) / (1.0 + lam + mu * m)
                })
                .collect()
        };
        let inner = |mu: f64| -> Vec<f64> {
            if norm(&at(0.0, mu)) <= self.radius {
                return at(0.0, mu);
            }
            let (mut lo, mut hi) = (0.0, 1.0);
            while norm(&at(hi, mu)) > self.radius {
                lo = hi;
                hi *= 4.0;
                if hi > 1e300 {
                    return at(hi, mu);
                }
            }
            for _ in 0..200 {
                let mid = if lo > 0.0 { (lo * hi).sqrt() } else { 0.5 * hi };
                if norm(&at(mid, mu)) > self.radius {
                    lo = mid;
                } else {
                    hi = mid;
                }
                if hi - lo <= 1e-15 * hi {
                    break;
                }
            }
            at(hi, mu)
        };
        if self.q_e(&inner(0.0)) <= self.b {
            let x = inner(0.0);
            return self.contains_e(&x).then_some(x);
        }
        let (mut lo, mut hi) = (0.0, 1.0);
        while self.q_e(&inner(hi)) > self.b {
            lo = hi;
            hi *= 4.0;
            if hi > 1e300 {
                return None;
            }
        }
        for _ in 0..200 {
            let mid = if lo > 0.0 { (lo * hi).sqrt() } else { 0.5 * hi };
            if self.q_e(&inner(mid)) > self.b {
                lo = mid;
            } else {
                hi = mid;
            }
            if hi - lo <= 1e-15 * hi {
                break;
            }
        }
        let x = inner(hi);
        self.contains_e(&x).then_some(x)
    }

    fn contains_e(&self, e: &[f64]) -> bool {
        norm(e) <= self.radius + FEAS_SLACK && self.q_e(e) <= self.b + FEAS_SLACK
    }

    /// Dykstra projection onto the intersection, followed by feasibility
    /// restoration so the result is always feasible, and replaced by the
    /// exact two-multiplier solution when that is closer.
    pub fn project(&self, theta: &[f64]) -> Vec<f64> {
        self.from_eigen(&self.project_e(&self.to_eigen(theta)))
    }

    /// Maximizes `g . theta` over the set. Returns a feasible witness and a
    /// Lagrangian upper bound on the optimum.
    pub fn linear_max(&self, g: &[f64]) -> LinearMax {
        let ge = self.to_eigen(g);
        let (lower, upper, we) = self.linear_max_e(&ge);
        LinearMax {
            lower,
            upper,
            witness: self.from_eigen(&we),
        }
    }

    /// Cheap upper bound `min(R|g|, g.c + sqrt(B g^T M^+ g))`.
    pub fn linear_upper_bound(&self, g: &[f64]) -> f64 {
        let ge = self.to_eigen(g);
        let ball = self.radius * norm(&ge);
        ball.min(self.ellipsoid_bound_e(&ge))
    }

    fn ellipsoid_bound_e(&self, ge: &[f64]) -> f64 {
        let gn = norm(ge);
        let mut s = 0.0;
        for j in 0..ge.len() {
            if self.null[j] {
                if ge[j].abs() > 1e-14 * gn {
                    return f64::INFINITY;
                }
            } else {
                s += ge[j] * ge[j] / self.mu[j];
            }
        }
        dot(ge, &self.center_e) + (self.b * s).sqrt()
    }

    fn linear_max_e(&self, g: &[f64]) -> (f64, f64, Vec<f64>) {
        let gn = norm(g);
        if gn == 0.0 {
            return (0.0, 0.0, self.center_e.clone());
        }
        // ball alone
        let ball: Vec<f64> = g.iter().map(|v| self.radius * v / gn).collect();
        if self.q_e(&ball) <= self.b {
            let v = self.radius * gn;
            return (v, v, ball);
        }
        let gnull: Vec<bool> = (0..g.len())
            .map(|j| self.null[j] && g[j].abs() > 1e-14 * gn)
            .collect();
        let has_null_dir = gnull.iter().any(|v| *v);
        if self.b <= 0.0 {
            return self.subspace_max_e(g);
        }
        // ellipsoid alone
        if !has_null_dir {
            let s: f64 = (0..g.len())
                .filter(|j| !self.null[*j])
                .map(|j| g[j] * g[j] / self.mu[j])
                .sum();
            let scale = (self.b / s).sqrt();
            let th: Vec<f64> = (0..g.len())
                .map(|j| {
                    if self.null[j] {
                        self.center_e[j]
                    } else {
                        self.center_e[j] + scale * g[j] / self.mu[j]
                    }
                })
                .collect();
            if norm(&th) <= self.radius {
                let v = dot(g, &self.center_e) + (self.b * s).sqrt();
                return (v, v, th);
            }
        }
        self.dual_max_e(g, has_null_dir)
    }

    /// `B = 0`: the set is `(c + null(M)) ∩ ball`.
    fn subspace_max_e(&self, g: &[f64]) -> (f64, f64, Vec<f64>) {
        let mut th = self.center_e.clone();
        let mut fixed = 0.0;
        let mut gnorm = 0.0;
        for j in 0..g.len() {
            if self.null[j] {
                gnorm += g[j] * g[j];
            } else {
                fixed += self.center_e[j] * self.center_e[j];
            }
        }
        let gnorm = gnorm.sqrt();
        if gnorm > 0.0 {
            let r = (self.radius * self.radius - fixed).max(0.0).sqrt();
            for j in 0..g.len() {
                if self.null[j] {
                    th[j] = r * g[j] / gnorm;
                }
            }
        }
        let v = dot(g, &th);
        (v, v, th)
    }

    fn dual_theta(&self, g: &[f64], alpha: f64, beta: f64) -> Vec<f64> {
        (0..g.len())
            .map(|j| {
                let den = alpha + beta * self.mu[j];
                if den <= 0.0 {
                    0.0
                } else {
                    (0.5 * g[j] + beta * self.mu[j] * self.center_e[j]) / den
                }
            })
            .collect()
    }

    fn dual_value(&self, g: &[f64], alpha: f64, beta: f64) -> f64 {
        let th = self.dual_theta(g, alpha, beta);
        let mut v = alpha * self.radius * self.radius + beta * self.b;
        for j in 0..g.len() {
            v += g[j] * th[j] - alpha * th[j] * th[j]
                - beta * self.mu[j] * (th[j] - self.center_e[j]).powi(2);
        }
        v
    }

    fn inner_alpha(&self, g: &[f64], beta: f64, has_null_dir: bool) -> f64 {
        if !has_null_dir && beta > 0.0 && norm(&self.dual_theta(g, 0.0, beta)) <= self.radius {
            return 0.0;
        }
        let mut lo = 0.0;
        let mut hi = 1e-8;
        while norm(&self.dual_theta(g, hi, beta)) > self.radius {
            lo = hi;
            hi *= 4.0;
        }
        for _ in 0..200 {
            let mid = if lo > 0.0 { (lo * hi).sqrt() } else { 0.5 * hi };
            if norm(&self.dual_theta(g, mid, beta)) > self.radius {
                lo = mid;
            } else {
                hi = mid;
            }
            if hi - lo <= 1e-15 * hi {
                break;
            }
        }
        hi
    }

    fn dual_max_e(&self, g: &[f64], has_null_dir: bool) -> (f64, f64, Vec<f64>) {
        let resid = |beta: f64| {
            let a = self.inner_alpha(g, beta, has_null_dir);
            (self.q_e(&self.dual_theta(g, a, beta)) - self.b, a)
        };
        let mut lo = 0.0;
        let mut hi = 1e-8;
        while resid(hi).0 > 0.0 {
            lo = hi;
            hi *= 4.0;
            if hi > 1e300 {
                break;
            }
        }
        for _ in 0..200 {
            let mid = if lo > 0.0 { (lo * hi).sqrt() } else { 0.5 * hi };
            if resid(mid).0 > 0.0 {
                lo = mid;
            } else {
                hi = mid;
            }
            if hi - lo <= 1e-15 * hi {
                break;
            }
        }
        let mut best_upper = f64::INFINITY;
        let mut best_lower = f64::NEG_INFINITY;
        let mut witness = self.center_e.clone();
        for beta in [lo, hi] {
            if beta <= 0.0 && has_null_dir {
                continue;
            }
            let alpha = self.inner_alpha(g, beta, has_null_dir);
            if alpha > 0.0 || !has_null_dir {
                best_upper = best_upper.min(self.dual_value(g, alpha, beta));
            }
            let th = self.restore_e(&self.dual_theta(g, alpha, beta));
            let v = dot(g, &th);
            if v > best_lower {
                best_lower = v;
                witness = th;
            }
        }
        let centre_val = dot(g, &self.center_e);
        if centre_val > best_lower {
            best_lower = centre_val;
            witness = self.center_e.clone();
        }
        (best_lower, best_upper.max(best_lower), witness)
    }

    /// Projected gradient ascent on a smooth objective given in original
    /// coordinates. The step grows after accepted moves and shrinks on
    /// rejected ones.
    pub fn ascend(
        &self,
        objective: &dyn Fn(&[f64]) -> (f64, Vec<f64>),
        start: &[f64],
        max_iters: usize,
    ) -> Ascent {
        let mut theta = self.project(start);
        let (mut val, mut grad) = objective(&theta);
        let mut step = 1.0;
        let mut converged = false;
        for _ in 0..max_iters {
            let trial: Vec<f64> = theta.iter().zip(&grad).map(|(t, g)| t + step * g).collect();
            let cand = self.project(&trial);
            let moved = norm(&cand.iter().zip(&theta).map(|(a, b)| a - b).collect::<Vec<f64>>());
            if moved < 1e-12 {
                converged = true;
                break;
            }
            let (cv, cg) = objective(&cand);
            if cv >= val {
                let gain = cv - val;
                theta = cand;
                val = cv;
                grad = cg;
                step = (step * 2.0).min(1e6);
                if gain <= 1e-14 * (1.0 + val.abs()) && moved < 1e-9 {
                    converged = true;
                    break;
                }
            } else {
                step *= 0.5;
                if step < 1e-14 {
                    converged = true;
                    break;
                }
            }
        }
        Ascent {
            value: val,
            theta,
            converged,
        }
    }
}
