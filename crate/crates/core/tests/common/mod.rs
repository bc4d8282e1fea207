//! Shared fixtures and independent oracles for the integration tests.
#![allow(dead_code)]

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use proj_l2o::numeric::{cgauss_sample, Rng};
use proj_l2o::problem::{Beamformer, ChannelSet};

pub fn random_channels(rng: &mut Rng, k: usize, n: usize, gamma: f64) -> ChannelSet {
    let h = (0..n * n).map(|_| cgauss_sample(rng, k)).collect();
    let g = (0..n * n).map(|_| cgauss_sample(rng, k)).collect();
    ChannelSet::new(k, n, h, g, 1.0, vec![gamma; n]).unwrap()
}

pub fn random_beamformer(rng: &mut Rng, k: usize, n: usize, scale: f64) -> Beamformer {
    let flat = (0..2 * k * n).map(|_| scale * rng.standard_normal()).collect();
    Beamformer::from_flat(k, n, flat).unwrap()
}

pub fn rel_diff(a: f64, b: f64) -> f64 {
    (a - b).abs() / b.abs().max(1e-12)
}

fn gain(w: &[f64], h: &[f64]) -> Complex64 {
    w.chunks(2)
        .zip(h.chunks(2))
        .map(|(a, b)| Complex64::new(a[0], a[1]).conj() * Complex64::new(b[0], b[1]))
        .sum()
}

/// Linear maps of one user's cone, written out directly from the complex
/// formulas: `u = a . y` and `v = B y + c` with `c = (0, .., 0, sigma)`.
struct OracleCone {
    a: DVector<f64>,
    b: DMatrix<f64>,
    c: DVector<f64>,
    sqrt_gamma: f64,
}

fn oracle_cones(ch: &ChannelSet, anchors: &[f64]) -> Vec<OracleCone> {
    let (k, n) = (ch.n_antennas(), ch.n_users());
    let dim = 2 * k * n;
    (0..n)
        .map(|i| {
            let mut a = DVector::zeros(dim);
            let h = ch.h(i, i).as_slice();
            let (s, c) = anchors[i].sin_cos();
            for m in 0..k {
                let (hr, hi) = (h[2 * m], h[2 * m + 1]);
                // Re(e^{-j phi} conj(y) h) in terms of (yr, yi)
                a[2 * k * i + 2 * m] = c * hr + s * hi;
                a[2 * k * i + 2 * m + 1] = c * hi - s * hr;
            }
            let rows = 2 * (n - 1) + 1;
            let mut b = DMatrix::zeros(rows, dim);
            let mut row = 0;
            for j in (0..n).filter(|&j| j != i) {
                let hj = ch.h(j, i).as_slice();
                for m in 0..k {
                    let (hr, hi) = (hj[2 * m], hj[2 * m + 1]);
                    b[(row, 2 * k * j + 2 * m)] = hr;
                    b[(row, 2 * k * j + 2 * m + 1)] = hi;
                    b[(row + 1, 2 * k * j + 2 * m)] = hi;
                    b[(row + 1, 2 * k * j + 2 * m + 1)] = -hr;
                }
                row += 2;
            }
            let mut cvec = DVector::zeros(rows);
            cvec[rows - 1] = ch.sigma2().sqrt();
            OracleCone {
                a,
                b,
                c: cvec,
                sqrt_gamma: ch.gamma()[i].sqrt(),
            }
        })
        .collect()
}

/// Phase of each direct gain of `x`, zero where it vanishes.
pub fn oracle_anchors(x: &Beamformer, ch: &ChannelSet) -> Vec<f64> {
    (0..ch.n_users())
        .map(|i| {
            let s = gain(x.block(i), ch.h(i, i).as_slice());
            if s.norm() > 1e-12 {
                s.arg()
            } else {
                0.0
            }
        })
        .collect()
}

/// Projection onto the anchored QoS cone by quadratic penalty continuation
/// (weights 1 .. 1e8) with semismooth Newton steps, run to gradient norm
/// 1e-10 or until no further progress is representable.
pub fn penalty_projection(x: &Beamformer, ch: &ChannelSet, anchors: &[f64]) -> Beamformer {
    let cones = oracle_cones(ch, anchors);
    let xv = DVector::from_column_slice(x.flatten());
    let dim = xv.len();
    let value_grad_hess = |y: &DVector<f64>, rho: f64| {
        let d = y - &xv;
        let mut val = d.norm_squared();
        let mut grad = 2.0 * d;
        let mut hess = DMatrix::identity(dim, dim) * 2.0;
        for cone in &cones {
            let v = &cone.b * y + &cone.c;
            let vn = v.norm();
            let m = cone.a.dot(y) - cone.sqrt_gamma * vn;
            if m < 0.0 {
                let dm = &cone.a - (cone.b.transpose() * &v) * (cone.sqrt_gamma / vn);
                let inner = DMatrix::identity(v.len(), v.len()) / vn - (&v * v.transpose()) / vn.powi(3);
                let d2m = -(cone.b.transpose() * inner * &cone.b) * cone.sqrt_gamma;
                val += rho * m * m;
                grad += &dm * (2.0 * rho * m);
                hess += (&dm * dm.transpose() + d2m * m) * (2.0 * rho);
            }
        }
        (val, grad, hess)
    };
    let mut y = xv.clone();
    let mut rho = 1.0;
    while rho <= 1e8 {
        for _ in 0..200 {
            let (val, grad, hess) = value_grad_hess(&y, rho);
            if grad.norm() <= 1e-10 {
                break;
            }
            let step = hess.cholesky().expect("penalty Hessian is positive definite").solve(&(-&grad));
            let slope = grad.dot(&step);
            let mut s = 1.0;
            let mut moved = false;
            while s > 1e-16 {
                let trial = &y + &step * s;
                if value_grad_hess(&trial, rho).0 <= val + 1e-4 * s * slope {
                    moved = trial != y;
                    y = trial;
                    break;
                }
                s *= 0.5;
            }
            if !moved {
                break;
            }
        }
        rho *= 10.0;
    }
    Beamformer::from_flat(ch.n_antennas(), ch.n_users(), y.as_slice().to_vec()).unwrap()
}
