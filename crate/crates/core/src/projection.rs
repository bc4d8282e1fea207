//! Euclidean projection of a beamformer onto the QoS region.
//!
//! Each user's SINR constraint is invariant under rotating `w_i` by a unit
//! phase, so the raw region `{W : |w_i^H h_ii| >= sqrt(gamma_i) ||(I_i, sigma)||}`
//! is a union of convex cones. Fixing one phase anchor `phi_i` per user picks
//! the convex member
//!
//! ```text
//! Re(e^{-j phi_i} w_i^H h_ii) >= sqrt(gamma_i) * sqrt(sum_{j != i} |w_j^H h_ji|^2 + sigma2)
//! ```
//!
//! which is a second-order cone in the real coordinates. [`project`] anchors
//! at the phase of the input point's own direct gains and solves the
//! projection onto that cone with a path-following log barrier:
//!
//! ```text
//! minimize  t ||y - x||^2 - sum_i log(u_i^2 - gamma_i (I_i + sigma2)),   u_i > 0
//! ```
//!
//! The Newton system is block-diagonal (one `2K x 2K` block per user) plus a
//! rank-`2N` correction and is solved with the Woodbury identity.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{cholesky, cholesky_solve, Lu};
use crate::numeric::{dist, dot, inner_unchecked, Rng};
use crate::problem::{soc_residuals, Beamformer, ChannelSet};

/// Feasibility tolerance used when reporting results outside the solver.
pub const REPORT_TOL: f64 = 1e-6;

/// Power margin of the zero-forcing point used as the barrier start.
pub const START_POWER_MARGIN: f64 = 2.0;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ProjectorConfig {
    pub feas_tol: f64,
    pub newton_tol: f64,
    /// Barrier weight growth per stage.
    pub barrier_mu: f64,
    /// Newton iterations allowed per barrier stage.
    pub max_newton: usize,
    pub max_stages: usize,
}

impl Default for ProjectorConfig {
    fn default() -> Self {
        Self {
            feas_tol: 1e-8,
            newton_tol: 1e-10,
            barrier_mu: 10.0,
            max_newton: 50,
            max_stages: 30,
        }
    }
}

impl ProjectorConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.feas_tol > 0.0) {
            return Err(Error::invalid("feas_tol", "must be positive"));
        }
        if !(self.newton_tol > 0.0) {
            return Err(Error::invalid("newton_tol", "must be positive"));
        }
        if !(self.barrier_mu > 1.0) {
            return Err(Error::invalid("barrier_mu", "must exceed 1"));
        }
        if self.max_newton == 0 || self.max_stages == 0 {
            return Err(Error::invalid("max_newton", "iteration budgets must be positive"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ProjectionResult {
    pub y: Beamformer,
    /// `||x - y||_F`.
    pub distance: f64,
    /// Newton iterations spent (0 when the input was already feasible).
    pub iterations: usize,
    pub converged: bool,
    /// Barrier weight at the returned point; zero when `x` was returned as is.
    weight: f64,
    anchors: Vec<f64>,
}

/// True iff every phase-aligned SOC margin is at least `-tol`.
pub fn is_feasible(w: &Beamformer, ch: &ChannelSet, tol: f64) -> bool {
    soc_residuals(w, ch).margins.iter().all(|&m| m >= -tol)
}

/// Zero-forcing beamformer: `w_i` nulls every cross channel `h(i, j)`, `j != i`,
/// and is scaled so that user `i` sees SINR `power_margin * gamma_i`, with a
/// real positive direct gain.
pub fn zf_init(ch: &ChannelSet, power_margin: f64) -> Result<Beamformer> {
    let (k, n) = (ch.n_antennas(), ch.n_users());
    if k < n {
        return Err(Error::Undetermined {
            antennas: k,
            users: n,
        });
    }
    if !(power_margin > 1.0) {
        return Err(Error::invalid("power_margin", "must exceed 1"));
    }
    let mut w = Beamformer::zeros(k, n);
    for i in 0..n {
        let dir = null_direction(ch, i).ok_or(Error::RankDeficient { sender: i })?;
        let gain = inner_unchecked(&dir, ch.h(i, i).as_slice()).re;
        let scale = (power_margin * ch.gamma()[i] * ch.sigma2()).sqrt() / gain;
        for (o, d) in w.block_mut(i).iter_mut().zip(&dir) {
            *o = scale * d;
        }
    }
    Ok(w)
}

/// Component of `h(i, i)` orthogonal to every `h(i, j)`, `j != i`, via
/// modified Gram-Schmidt over complex vectors.
fn null_direction(ch: &ChannelSet, sender: usize) -> Option<Vec<f64>> {
    let n = ch.n_users();
    let mut basis: Vec<Vec<Complex64>> = Vec::with_capacity(n);
    let order = (0..n).filter(|&j| j != sender).chain(std::iter::once(sender));
    let mut last = Vec::new();
    for j in order {
        let col = ch.h(sender, j).to_complex();
        let col_norm = col.iter().map(Complex64::norm_sqr).sum::<f64>().sqrt();
        let mut v = col;
        for q in &basis {
            let c: Complex64 = q.iter().zip(&v).map(|(a, b)| a.conj() * b).sum();
            for (vi, qi) in v.iter_mut().zip(q) {
                *vi -= c * qi;
            }
        }
        let v_norm = v.iter().map(Complex64::norm_sqr).sum::<f64>().sqrt();
        if !(v_norm > 1e-10 * col_norm) {
            return None;
        }
        last = v.clone();
        basis.push(v.into_iter().map(|c| c / v_norm).collect());
    }
    Some(last.iter().flat_map(|c| [c.re, c.im]).collect())
}

/// Phase of each user's direct gain `w_i^H h_ii`; zero where the gain vanishes.
pub fn phase_anchors(w: &Beamformer, ch: &ChannelSet) -> Vec<f64> {
    (0..ch.n_users())
        .map(|i| {
            let s = inner_unchecked(w.block(i), ch.h(i, i).as_slice());
            let scale = (dot(w.block(i), w.block(i)) * ch.h(i, i).norm_sqr()).sqrt();
            if s.norm() > 1e-12 * scale {
                s.arg()
            } else {
                0.0
            }
        })
        .collect()
}

/// Zero-forcing point rotated so user `i`'s direct gain has phase `anchors[i]`.
/// Strictly inside the anchored cone.
pub fn anchored_start(ch: &ChannelSet, anchors: &[f64], power_margin: f64) -> Result<Beamformer> {
    let zf = zf_init(ch, power_margin)?;
    let rotated = zf
        .vectors()
        .into_iter()
        .zip(anchors)
        .map(|(mut v, &phi)| {
            v.scale(Complex64::from_polar(1.0, -phi));
            v
        })
        .collect();
    Beamformer::from_vectors(rotated)
}

/// Margins of the anchored cone: `Re(e^{-j phi_i} w_i^H h_ii) - sqrt(gamma_i) ||(I_i, sigma)||`.
pub fn anchored_margins(w: &Beamformer, ch: &ChannelSet, anchors: &[f64]) -> Vec<f64> {
    let n = ch.n_users();
    (0..n)
        .map(|i| {
            let direct = inner_unchecked(w.block(i), ch.h(i, i).as_slice())
                * Complex64::from_polar(1.0, -anchors[i]);
            let interf: f64 = (0..n)
                .filter(|&j| j != i)
                .map(|j| inner_unchecked(w.block(j), ch.h(j, i).as_slice()).norm_sqr())
                .sum();
            direct.re - (ch.gamma()[i] * (interf + ch.sigma2())).sqrt()
        })
        .collect()
}

/// Projects `x` onto the QoS region. Feasible inputs are returned unchanged.
pub fn project(x: &Beamformer, ch: &ChannelSet, cfg: &ProjectorConfig) -> Result<ProjectionResult> {
    x.check_shape(ch)?;
    if is_feasible(x, ch, cfg.feas_tol) {
        return Ok(ProjectionResult {
            y: x.clone(),
            distance: 0.0,
            iterations: 0,
            converged: true,
            weight: 0.0,
            anchors: Vec::new(),
        });
    }
    let anchors = phase_anchors(x, ch);
    project_anchored(x, ch, &anchors, None, cfg)
}

/// Projects `x` onto the cone fixed by `anchors`, starting the barrier from
/// `start` (which must be strictly inside) or from the rotated zero-forcing point.
pub fn project_anchored(
    x: &Beamformer,
    ch: &ChannelSet,
    anchors: &[f64],
    start: Option<&Beamformer>,
    cfg: &ProjectorConfig,
) -> Result<ProjectionResult> {
    x.check_shape(ch)?;
    crate::error::check_len(ch.n_users(), anchors.len())?;
    if anchored_margins(x, ch, anchors).iter().all(|&m| m >= -cfg.feas_tol) {
        return Ok(ProjectionResult {
            y: x.clone(),
            distance: 0.0,
            iterations: 0,
            converged: true,
            weight: 0.0,
            anchors: anchors.to_vec(),
        });
    }
    let y0 = match start {
        Some(s) => {
            s.check_shape(ch)?;
            s.clone()
        }
        None => anchored_start(ch, anchors, START_POWER_MARGIN).map_err(|e| match e {
            Error::Undetermined { .. } => e,
            _ => Error::InfeasibleRegion,
        })?,
    };
    let barrier = ConeBarrier::new(ch, anchors);
    if barrier.eval(y0.flatten()).is_none() {
        return Err(Error::InfeasibleRegion);
    }
    let (y, iterations, converged, weight) = barrier.solve(x.flatten(), y0.into_flat(), cfg);
    let y = Beamformer::from_flat(ch.n_antennas(), ch.n_users(), y)?;
    Ok(ProjectionResult {
        distance: dist(x.flatten(), y.flatten()),
        y,
        iterations,
        converged,
        weight,
        anchors: anchors.to_vec(),
    })
}

/// `J^T v` for the Jacobian `J = dy/dx` of the projection that produced
/// `result`. The barrier optimality condition `2t (y - x) = sum_i grad q_i / q_i`
/// gives `H dy = 2t dx` with `H` the Newton matrix at `y`, and `H` is
/// symmetric, so the product is one Newton solve. Returns `v` unchanged when
/// the input was already feasible.
pub fn projection_vjp(ch: &ChannelSet, result: &ProjectionResult, v: &[f64]) -> Result<Vec<f64>> {
    let y = result.y.flatten();
    crate::error::check_len(y.len(), v.len())?;
    if result.weight == 0.0 {
        return Ok(v.to_vec());
    }
    let barrier = ConeBarrier::new(ch, &result.anchors);
    let state = barrier.eval(y).ok_or(Error::InfeasibleRegion)?;
    let t = result.weight;
    let system = NewtonSystem::build(&barrier, &state, t, y.len());
    let rhs: Vec<f64> = v.iter().map(|a| 2.0 * t * a).collect();
    Ok(system.solve(&rhs))
}

/// `<y - x, z - y>`; non-negative for every feasible `z` when `y` is the projection of `x`.
pub fn orthogonality_residual(x: &Beamformer, y: &Beamformer, z: &Beamformer) -> f64 {
    x.flatten()
        .iter()
        .zip(y.flatten())
        .zip(z.flatten())
        .map(|((xv, yv), zv)| (yv - xv) * (zv - yv))
        .sum()
}

/// Draws `count` points of the anchored cone: random perturbations of `center`
/// at log-uniform scales, pulled back towards the strictly interior point
/// `interior` by bisection whenever they leave the cone.
pub fn sample_feasible_points(
    center: &Beamformer,
    interior: &Beamformer,
    ch: &ChannelSet,
    anchors: &[f64],
    rng: &mut Rng,
    count: usize,
) -> Vec<Beamformer> {
    let inside = |w: &Beamformer| anchored_margins(w, ch, anchors).iter().all(|&m| m >= 0.0);
    let size = center.flatten().len();
    let radius = crate::numeric::norm(center.flatten()).max(1.0);
    (0..count)
        .map(|s| {
            let base = if s % 4 == 3 { interior } else { center };
            let scale = radius * 10f64.powf(rng.uniform(-4.0, 0.5)) / (size as f64).sqrt();
            let flat: Vec<f64> = base
                .flatten()
                .iter()
                .map(|v| v + scale * rng.standard_normal())
                .collect();
            let candidate = Beamformer::from_flat(ch.n_antennas(), ch.n_users(), flat)
                .expect("shape preserved");
            if inside(&candidate) {
                return candidate;
            }
            let (mut lo, mut hi) = (0.0, 1.0);
            let blend = |lambda: f64| {
                let flat = interior
                    .flatten()
                    .iter()
                    .zip(candidate.flatten())
                    .map(|(a, b)| a + lambda * (b - a))
                    .collect();
                Beamformer::from_flat(ch.n_antennas(), ch.n_users(), flat).expect("shape")
            };
            for _ in 0..60 {
                let mid = 0.5 * (lo + hi);
                if inside(&blend(mid)) {
                    lo = mid;
                } else {
                    hi = mid;
                }
            }
            blend(lo)
        })
        .collect()
}

/// Per-user constraint data in real coordinates.
struct UserCone {
    /// Rotated direct channel: `u_i = <direct, y_i>`.
    direct: Vec<f64>,
    /// For every interfering sender `j`: (j, h(j,i), rot(h(j,i))).
    cross: Vec<(usize, Vec<f64>, Vec<f64>)>,
    gamma: f64,
}

/// Quantities of one barrier evaluation.
struct ConeState {
    u: Vec<f64>,
    /// `(<h_ji, y_j>, <rot h_ji, y_j>)` aligned with `UserCone::cross`.
    cross: Vec<Vec<(f64, f64)>>,
    q: Vec<f64>,
}

struct ConeBarrier {
    users: Vec<UserCone>,
    block: usize,
    sigma2: f64,
}

fn rot(c: &[f64]) -> Vec<f64> {
    c.chunks_exact(2).flat_map(|p| [p[1], -p[0]]).collect()
}

impl ConeBarrier {
    fn new(ch: &ChannelSet, anchors: &[f64]) -> Self {
        let n = ch.n_users();
        let users = (0..n)
            .map(|i| {
                let h = ch.h(i, i).as_slice();
                let (s, c) = anchors[i].sin_cos();
                let direct = h.iter().zip(rot(h)).map(|(p, r)| c * p + s * r).collect();
                let cross = (0..n)
                    .filter(|&j| j != i)
                    .map(|j| {
                        let hj = ch.h(j, i).as_slice();
                        (j, hj.to_vec(), rot(hj))
                    })
                    .collect();
                UserCone {
                    direct,
                    cross,
                    gamma: ch.gamma()[i],
                }
            })
            .collect();
        Self {
            users,
            block: 2 * ch.n_antennas(),
            sigma2: ch.sigma2(),
        }
    }

    fn blk<'a>(&self, y: &'a [f64], j: usize) -> &'a [f64] {
        &y[j * self.block..(j + 1) * self.block]
    }

    /// Evaluates the cone slacks; `None` outside the barrier domain.
    fn eval(&self, y: &[f64]) -> Option<ConeState> {
        let mut state = ConeState {
            u: Vec::with_capacity(self.users.len()),
            cross: Vec::with_capacity(self.users.len()),
            q: Vec::with_capacity(self.users.len()),
        };
        for (i, user) in self.users.iter().enumerate() {
            let u = dot(&user.direct, self.blk(y, i));
            let cross: Vec<(f64, f64)> = user
                .cross
                .iter()
                .map(|(j, p, r)| (dot(p, self.blk(y, *j)), dot(r, self.blk(y, *j))))
                .collect();
            let interf: f64 = cross.iter().map(|(a, b)| a * a + b * b).sum();
            let q = u * u - user.gamma * (interf + self.sigma2);
            if !(u > 0.0 && q > 0.0) {
                return None;
            }
            state.u.push(u);
            state.cross.push(cross);
            state.q.push(q);
        }
        Some(state)
    }

    /// Gradient of `q_i` with respect to `y`.
    fn q_grad(&self, i: usize, state: &ConeState, n_var: usize) -> Vec<f64> {
        let user = &self.users[i];
        let mut g = vec![0.0; n_var];
        let b = self.block;
        for (o, d) in g[i * b..(i + 1) * b].iter_mut().zip(&user.direct) {
            *o = 2.0 * state.u[i] * d;
        }
        for ((j, p, r), (cp, cr)) in user.cross.iter().zip(&state.cross[i]) {
            let coef_p = -2.0 * user.gamma * cp;
            let coef_r = -2.0 * user.gamma * cr;
            for ((o, pv), rv) in g[j * b..(j + 1) * b].iter_mut().zip(p).zip(r) {
                *o += coef_p * pv + coef_r * rv;
            }
        }
        g
    }

    /// Returns the point, Newton iterations, convergence flag and final weight.
    fn solve(&self, x: &[f64], mut y: Vec<f64>, cfg: &ProjectorConfig) -> (Vec<f64>, usize, bool, f64) {
        let n_var = x.len();
        let degree = 2.0 * self.users.len() as f64;
        let mut t = degree / dist(x, &y).powi(2).max(1e-12);
        let mut iterations = 0;
        for _ in 0..cfg.max_stages {
            let centered = self.center(x, &mut y, t, cfg, &mut iterations, n_var);
            if centered && degree / t <= cfg.feas_tol {
                return (y, iterations, true, t);
            }
            t *= cfg.barrier_mu;
        }
        (y, iterations, false, t / cfg.barrier_mu)
    }

    /// Newton centering at weight `t`; returns whether the decrement criterion was met.
    fn center(
        &self,
        x: &[f64],
        y: &mut Vec<f64>,
        t: f64,
        cfg: &ProjectorConfig,
        iterations: &mut usize,
        n_var: usize,
    ) -> bool {
        for _ in 0..cfg.max_newton {
            let state = self.eval(y).expect("iterate stays in the barrier domain");
            let system = NewtonSystem::build(self, &state, t, n_var);
            let mut grad: Vec<f64> = y.iter().zip(x).map(|(a, b)| 2.0 * t * (a - b)).collect();
            for (gq, q) in system.grad_q.iter().zip(&state.q) {
                for (g, v) in grad.iter_mut().zip(gq) {
                    *g -= v / q;
                }
            }
            let rhs: Vec<f64> = grad.iter().map(|g| -g).collect();
            let step = system.solve(&rhs);
            let slope = dot(&grad, &step);
            let decrement = -slope;
            if !(decrement.is_finite()) || decrement < 0.0 {
                return false;
            }
            if decrement / 2.0 <= cfg.newton_tol {
                return true;
            }
            *iterations += 1;

            // Backtrack into the domain, then Armijo on the exact change of F.
            let mut s = 1.0;
            let mut accepted = false;
            for _ in 0..80 {
                let trial: Vec<f64> = y.iter().zip(&step).map(|(a, d)| a + s * d).collect();
                if let Some(next) = self.eval(&trial) {
                    let quad: f64 = y
                        .iter()
                        .zip(x)
                        .zip(&step)
                        .map(|((a, b), d)| 2.0 * s * (a - b) * d + s * s * d * d)
                        .sum();
                    let logs: f64 = next.q.iter().zip(&state.q).map(|(a, b)| (a / b).ln()).sum();
                    let change = t * quad - logs;
                    if change <= 1e-4 * s * slope {
                        *y = trial;
                        accepted = true;
                        break;
                    }
                }
                s *= 0.5;
            }
            if !accepted {
                // No representable progress left at this weight.
                return true;
            }
        }
        false
    }
}

/// Newton matrix `H = D + U C U^T` with `D` block-diagonal.
struct NewtonSystem {
    block: usize,
    n_blocks: usize,
    /// Cholesky factors of the diagonal blocks.
    d_factors: Vec<Vec<f64>>,
    /// Explicit diagonal blocks, kept for the residual in iterative refinement.
    d_blocks: Vec<Vec<f64>>,
    /// Low-rank columns: `[direct_0 .. direct_{N-1}, grad_q_0 .. grad_q_{N-1}]`.
    cols: Vec<Vec<f64>>,
    coefs: Vec<f64>,
    grad_q: Vec<Vec<f64>>,
}

impl NewtonSystem {
    fn build(barrier: &ConeBarrier, state: &ConeState, t: f64, n_var: usize) -> Self {
        let b = barrier.block;
        let n = barrier.users.len();
        let mut d_blocks = vec![vec![0.0; b * b]; n];
        for blk in &mut d_blocks {
            for r in 0..b {
                blk[r * b + r] = 2.0 * t;
            }
        }
        for (i, user) in barrier.users.iter().enumerate() {
            let coef = 2.0 * user.gamma / state.q[i];
            for (j, p, r) in &user.cross {
                let blk = &mut d_blocks[*j];
                for a in 0..b {
                    let (pa, ra) = (coef * p[a], coef * r[a]);
                    for c in a..b {
                        blk[a * b + c] += pa * p[c] + ra * r[c];
                    }
                }
            }
        }
        for blk in &mut d_blocks {
            for a in 0..b {
                for c in 0..a {
                    blk[a * b + c] = blk[c * b + a];
                }
            }
        }
        let d_factors = d_blocks
            .iter()
            .map(|blk| {
                let mut f = blk.clone();
                let ok = cholesky(&mut f, b);
                debug_assert!(ok, "diagonal blocks are positive definite");
                f
            })
            .collect();

        let grad_q: Vec<Vec<f64>> = (0..n).map(|i| barrier.q_grad(i, state, n_var)).collect();
        let mut cols = Vec::with_capacity(2 * n);
        let mut coefs = Vec::with_capacity(2 * n);
        for (i, user) in barrier.users.iter().enumerate() {
            let mut c = vec![0.0; n_var];
            c[i * b..(i + 1) * b].copy_from_slice(&user.direct);
            cols.push(c);
            coefs.push(-2.0 / state.q[i]);
        }
        for (i, g) in grad_q.iter().enumerate() {
            cols.push(g.clone());
            coefs.push(1.0 / (state.q[i] * state.q[i]));
        }
        Self {
            block: b,
            n_blocks: n,
            d_factors,
            d_blocks,
            cols,
            coefs,
            grad_q,
        }
    }

    fn d_solve(&self, v: &mut [f64]) {
        let b = self.block;
        for (j, f) in self.d_factors.iter().enumerate() {
            let part = &mut v[j * b..(j + 1) * b];
            if part.iter().any(|&x| x != 0.0) {
                cholesky_solve(f, b, part);
            }
        }
    }

    fn apply(&self, v: &[f64]) -> Vec<f64> {
        let b = self.block;
        let mut out = vec![0.0; v.len()];
        for j in 0..self.n_blocks {
            let blk = &self.d_blocks[j];
            for r in 0..b {
                out[j * b + r] = (0..b).map(|c| blk[r * b + c] * v[j * b + c]).sum();
            }
        }
        for (col, coef) in self.cols.iter().zip(&self.coefs) {
            let s = coef * dot(col, v);
            for (o, c) in out.iter_mut().zip(col) {
                *o += s * c;
            }
        }
        out
    }

    fn dense(&self) -> Vec<f64> {
        let n_var = self.block * self.n_blocks;
        let b = self.block;
        let mut h = vec![0.0; n_var * n_var];
        for j in 0..self.n_blocks {
            for r in 0..b {
                for c in 0..b {
                    h[(j * b + r) * n_var + j * b + c] = self.d_blocks[j][r * b + c];
                }
            }
        }
        for (col, coef) in self.cols.iter().zip(&self.coefs) {
            for r in 0..n_var {
                if col[r] == 0.0 {
                    continue;
                }
                let s = coef * col[r];
                for c in 0..n_var {
                    h[r * n_var + c] += s * col[c];
                }
            }
        }
        h
    }

    fn woodbury(&self, rhs: &[f64]) -> Option<Vec<f64>> {
        let m = self.cols.len();
        let z: Vec<Vec<f64>> = self
            .cols
            .iter()
            .map(|c| {
                let mut v = c.clone();
                self.d_solve(&mut v);
                v
            })
            .collect();
        let mut cap = vec![0.0; m * m];
        for a in 0..m {
            for c in 0..m {
                cap[a * m + c] = dot(&self.cols[a], &z[c]);
            }
            cap[a * m + a] += 1.0 / self.coefs[a];
        }
        let lu = Lu::factor(cap, m)?;
        let solve = |r: &[f64]| -> Vec<f64> {
            let mut v = r.to_vec();
            self.d_solve(&mut v);
            let s: Vec<f64> = self.cols.iter().map(|c| dot(c, &v)).collect();
            let coef = lu.solve(&s);
            for (zc, k) in z.iter().zip(&coef) {
                for (o, zv) in v.iter_mut().zip(zc) {
                    *o -= k * zv;
                }
            }
            v
        };
        let mut x = solve(rhs);
        // One step of iterative refinement.
        let applied = self.apply(&x);
        let resid: Vec<f64> = rhs.iter().zip(&applied).map(|(r, a)| r - a).collect();
        for (o, d) in x.iter_mut().zip(solve(&resid)) {
            *o += d;
        }
        x.iter().all(|v| v.is_finite()).then_some(x)
    }

    fn solve(&self, rhs: &[f64]) -> Vec<f64> {
        if let Some(x) = self.woodbury(rhs) {
            if dot(&x, rhs) > 0.0 {
                return x;
            }
        }
        self.solve_dense(rhs)
    }

    fn solve_dense(&self, rhs: &[f64]) -> Vec<f64> {
        let n_var = rhs.len();
        let mut h = self.dense();
        let mut shift = 0.0;
        loop {
            let mut f = h.clone();
            if cholesky(&mut f, n_var) {
                let mut x = rhs.to_vec();
                cholesky_solve(&f, n_var, &mut x);
                return x;
            }
            let bump = if shift == 0.0 { 1e-12 } else { shift * 10.0 };
            for r in 0..n_var {
                h[r * n_var + r] += bump - shift;
            }
            shift = bump;
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numeric::{norm, ComplexVec};
    use crate::problem::sinr_legit;
    use crate::problem::test_support::*;

    fn cfg() -> ProjectorConfig {
        ProjectorConfig::default()
    }

    #[test]
    fn zero_beamformer_is_infeasible() {
        let mut rng = Rng::new(1);
        let ch = random_channels(&mut rng, 4, 2, 10.0);
        assert!(!is_feasible(&Beamformer::zeros(4, 2), &ch, 1e-6));
    }

    #[test]
    fn boundary_point_is_feasible_with_zero_tol() {
        let one = ComplexVec::from_interleaved(vec![1.0, 0.0]).unwrap();
        let ch = ChannelSet::new(1, 1, vec![one.clone()], vec![one], 1.0, vec![4.0]).unwrap();
        let w = Beamformer::from_flat(1, 1, vec![2.0, 0.0]).unwrap();
        assert_eq!(soc_residuals(&w, &ch).margins[0], 0.0);
        assert!(is_feasible(&w, &ch, 0.0));
    }

    #[test]
    fn zf_single_user_is_matched_filter() {
        let mut rng = Rng::new(2);
        let ch = random_channels(&mut rng, 3, 1, 10.0);
        let w = zf_init(&ch, 2.0).unwrap();
        let sinr = sinr_legit(&w, &ch, 0).unwrap();
        assert!((sinr - 20.0).abs() < 1e-9);
        // parallel to h
        let s = inner_unchecked(w.block(0), ch.h(0, 0).as_slice());
        assert!((s.norm() - norm(w.block(0)) * ch.h(0, 0).norm_sqr().sqrt()).abs() < 1e-9);
    }

    #[test]
    fn zf_nulls_cross_channels() {
        let mut rng = Rng::new(3);
        for _ in 0..20 {
            let ch = random_channels(&mut rng, 4, 2, 10.0);
            let w = zf_init(&ch, 2.0).unwrap();
            for i in 0..2 {
                for j in (0..2).filter(|&j| j != i) {
                    let c = inner_unchecked(w.block(i), ch.h(i, j).as_slice()).norm();
                    let bound = 1e-9 * norm(w.block(i)) * ch.h(i, j).norm_sqr().sqrt();
                    assert!(c <= bound);
                }
                assert!((sinr_legit(&w, &ch, i).unwrap() - 20.0).abs() < 1e-8);
            }
        }
    }

    #[test]
    fn zf_is_strictly_feasible_at_default_size() {
        let mut rng = Rng::new(4);
        let ch = random_channels(&mut rng, 16, 8, 10.0);
        let w = zf_init(&ch, 2.0).unwrap();
        assert!(is_feasible(&w, &ch, 0.0));
        assert!(soc_residuals(&w, &ch).margins.iter().all(|&m| m > 0.0));
    }

    #[test]
    fn zf_errors() {
        let mut rng = Rng::new(5);
        let ch = random_channels(&mut rng, 2, 3, 10.0);
        assert!(matches!(zf_init(&ch, 2.0), Err(Error::Undetermined { .. })));

        let ch = random_channels(&mut rng, 2, 2, 10.0);
        let h: Vec<ComplexVec> = (0..4)
            .map(|idx| if idx == 1 { ch.h(0, 0).clone() } else { ch.h(idx / 2, idx % 2).clone() })
            .collect();
        let degenerate = ChannelSet::new(2, 2, h, (0..4).map(|i| ch.g(i / 2, i % 2).clone()).collect(), 1.0, vec![10.0; 2]).unwrap();
        assert!(matches!(zf_init(&degenerate, 2.0), Err(Error::RankDeficient { sender: 0 })));
    }

    #[test]
    fn feasible_input_is_returned_unchanged() {
        let mut rng = Rng::new(6);
        let ch = random_channels(&mut rng, 4, 2, 10.0);
        let w = zf_init(&ch, 3.0).unwrap();
        let res = project(&w, &ch, &cfg()).unwrap();
        assert_eq!(res.y, w);
        assert_eq!(res.distance, 0.0);
        assert_eq!(res.iterations, 0);
    }

    #[test]
    fn zero_projects_onto_boundary() {
        let mut rng = Rng::new(7);
        for _ in 0..10 {
            let ch = random_channels(&mut rng, 4, 2, 10.0);
            let res = project(&Beamformer::zeros(4, 2), &ch, &cfg()).unwrap();
            assert!(res.converged);
            let margins = soc_residuals(&res.y, &ch).margins;
            assert!(margins.iter().all(|&m| m >= 0.0));
            assert!(margins.iter().any(|&m| m <= 1e-8), "{margins:?}");
            assert!(res.distance > 0.0);
        }
    }

    #[test]
    fn woodbury_matches_dense_solve() {
        let mut rng = Rng::new(8);
        let ch = random_channels(&mut rng, 3, 3, 5.0);
        let anchors = vec![0.3, -1.0, 2.0];
        let barrier = ConeBarrier::new(&ch, &anchors);
        let y = anchored_start(&ch, &anchors, 2.0).unwrap();
        let state = barrier.eval(y.flatten()).unwrap();
        let system = NewtonSystem::build(&barrier, &state, 3.7, 18);
        let rhs: Vec<f64> = (0..18).map(|_| rng.standard_normal()).collect();
        let a = system.woodbury(&rhs).unwrap();
        let b = system.solve_dense(&rhs);
        assert!(dist(&a, &b) <= 1e-9 * norm(&b));
    }

    #[test]
    fn projection_is_idempotent_and_variational() {
        let mut rng = Rng::new(9);
        for _ in 0..10 {
            let ch = random_channels(&mut rng, 4, 2, 10.0);
            let x = random_beamformer(&mut rng, 4, 2, 0.5);
            if is_feasible(&x, &ch, 1e-8) {
                continue;
            }
            let res = project(&x, &ch, &cfg()).unwrap();
            let again = project(&res.y, &ch, &cfg()).unwrap();
            assert!(again.distance <= 1e-7);

            let anchors = phase_anchors(&x, &ch);
            let interior = anchored_start(&ch, &anchors, 2.0).unwrap();
            for z in sample_feasible_points(&res.y, &interior, &ch, &anchors, &mut rng, 200) {
                assert!(orthogonality_residual(&x, &res.y, &z) >= -1e-6);
                assert!(dist(x.flatten(), z.flatten()) >= res.distance - 1e-6);
            }
        }
    }

    #[test]
    fn orthogonality_trivial_cases() {
        let mut rng = Rng::new(10);
        let x = random_beamformer(&mut rng, 3, 2, 1.0);
        let z = random_beamformer(&mut rng, 3, 2, 1.0);
        assert_eq!(orthogonality_residual(&x, &x, &z), 0.0);
        assert_eq!(orthogonality_residual(&x, &z, &z), 0.0);
    }

    #[test]
    fn bad_start_is_rejected() {
        let mut rng = Rng::new(11);
        let ch = random_channels(&mut rng, 4, 2, 10.0);
        let x = Beamformer::zeros(4, 2);
        let start = Beamformer::zeros(4, 2);
        let out = project_anchored(&x, &ch, &[0.0, 0.0], Some(&start), &cfg());
        assert!(matches!(out, Err(Error::InfeasibleRegion)));
    }

    #[test]
    fn vjp_matches_central_differences() {
        let mut rng = Rng::new(12);
        let tight = ProjectorConfig {
            feas_tol: 1e-12,
            newton_tol: 1e-14,
            ..cfg()
        };
        for _ in 0..5 {
            let ch = random_channels(&mut rng, 4, 2, 10.0);
            let x = random_beamformer(&mut rng, 4, 2, 0.5);
            let res = project(&x, &ch, &cfg()).unwrap();
            assert!(res.distance > 0.0);
            let v: Vec<f64> = (0..16).map(|_| rng.standard_normal()).collect();
            let vjp = projection_vjp(&ch, &res, &v).unwrap();
            // With the anchors pinned the map is smooth; differentiate v . y(x)
            // using a tighter projection as the reference.
            let along_v = |flat: &[f64]| {
                let xp = Beamformer::from_flat(4, 2, flat.to_vec()).unwrap();
                let y = project_anchored(&xp, &ch, &res.anchors, None, &tight).unwrap().y;
                dot(&v, y.flatten())
            };
            let fd = crate::numeric::finite_diff_grad(along_v, x.flatten(), 1e-5);
            let err = dist(&vjp, &fd) / norm(&fd).max(1e-12);
            assert!(err <= 1e-4, "relative error {err}");
        }
    }

    #[test]
    fn vjp_annihilates_the_normal_direction() {
        let mut rng = Rng::new(13);
        for _ in 0..10 {
            let ch = random_channels(&mut rng, 4, 2, 10.0);
            let x = random_beamformer(&mut rng, 4, 2, 0.5);
            let res = project(&x, &ch, &cfg()).unwrap();
            let normal: Vec<f64> = x.flatten().iter().zip(res.y.flatten()).map(|(a, b)| a - b).collect();
            let back = projection_vjp(&ch, &res, &normal).unwrap();
            assert!(norm(&back) <= 1e-5 * norm(&normal), "{} vs {}", norm(&back), norm(&normal));
        }
    }

    #[test]
    fn vjp_is_identity_for_feasible_inputs() {
        let mut rng = Rng::new(14);
        let ch = random_channels(&mut rng, 4, 2, 10.0);
        let x = zf_init(&ch, 3.0).unwrap();
        let res = project(&x, &ch, &cfg()).unwrap();
        let v: Vec<f64> = (0..16).map(|_| rng.standard_normal()).collect();
        assert_eq!(projection_vjp(&ch, &res, &v).unwrap(), v);
        assert!(projection_vjp(&ch, &res, &v[..3]).is_err());
    }
}
