//! Complex-as-real vector algebra, seeded sampling and finite differences.
//!
//! Every complex vector crossing a module boundary is a flat `f64` buffer
//! with interleaved `(re, im)` pairs. Complex arithmetic only happens inside
//! function bodies.

use num_complex::Complex64;
use rand::{Rng as _, RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::error::{check_len, Error, Result};

/// Complex vector stored as interleaved real pairs `(re0, im0, re1, im1, ...)`.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct ComplexVec {
    re_im: Vec<f64>,
}

impl ComplexVec {
    pub fn zeros(dim: usize) -> Self {
        Self {
            re_im: vec![0.0; 2 * dim],
        }
    }

    /// Wraps an interleaved buffer. Fails on odd length.
    pub fn from_interleaved(re_im: Vec<f64>) -> Result<Self> {
        if re_im.len() % 2 != 0 {
            return Err(Error::format(
                "complex vector",
                format!("odd interleaved length {}", re_im.len()),
            ));
        }
        Ok(Self { re_im })
    }

    pub fn from_complex(values: &[Complex64]) -> Self {
        let mut re_im = Vec::with_capacity(2 * values.len());
        for c in values {
            re_im.push(c.re);
            re_im.push(c.im);
        }
        Self { re_im }
    }

    /// Number of complex entries.
    pub fn dim(&self) -> usize {
        self.re_im.len() / 2
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.re_im
    }

    pub fn as_mut_slice(&mut self) -> &mut [f64] {
        &mut self.re_im
    }

    pub fn into_inner(self) -> Vec<f64> {
        self.re_im
    }

    pub fn get(&self, m: usize) -> Complex64 {
        Complex64::new(self.re_im[2 * m], self.re_im[2 * m + 1])
    }

    pub fn set(&mut self, m: usize, value: Complex64) {
        self.re_im[2 * m] = value.re;
        self.re_im[2 * m + 1] = value.im;
    }

    pub fn to_complex(&self) -> Vec<Complex64> {
        (0..self.dim()).map(|m| self.get(m)).collect()
    }

    pub fn norm_sqr(&self) -> f64 {
        dot(&self.re_im, &self.re_im)
    }

    pub fn scale(&mut self, factor: Complex64) {
        for m in 0..self.dim() {
            let v = self.get(m) * factor;
            self.set(m, v);
        }
    }
}

/// Deterministic, counter-based pseudo-random generator.
///
/// Independent streams for the same seed are obtained with [`Rng::with_stream`];
/// [`Rng::fork`] derives a child generator from the parent's output.
#[derive(Debug, Clone)]
pub struct Rng {
    inner: ChaCha8Rng,
}

impl Rng {
    pub fn new(seed: u64) -> Self {
        Self::with_stream(seed, 0)
    }

    pub fn with_stream(seed: u64, stream: u64) -> Self {
        let mut inner = ChaCha8Rng::seed_from_u64(seed);
        inner.set_stream(stream);
        Self { inner }
    }

    pub fn fork(&mut self) -> Self {
        Self::new(self.inner.next_u64())
    }

    pub fn next_u64(&mut self) -> u64 {
        self.inner.next_u64()
    }

    pub fn standard_normal(&mut self) -> f64 {
        self.inner.sample(StandardNormal)
    }

    /// Uniform draw from `[lo, hi)`.
    pub fn uniform(&mut self, lo: f64, hi: f64) -> f64 {
        lo + (hi - lo) * self.inner.random::<f64>()
    }

    /// Uniform index in `0..n`.
    pub fn index(&mut self, n: usize) -> usize {
        self.inner.random_range(0..n)
    }

    /// Fisher-Yates shuffle.
    pub fn shuffle<T>(&mut self, items: &mut [T]) {
        for i in (1..items.len()).rev() {
            let j = self.index(i + 1);
            items.swap(i, j);
        }
    }
}

/// Draws a `CN(0, I)` vector: each real and imaginary part is `N(0, 1/2)`.
pub fn cgauss_sample(rng: &mut Rng, dim: usize) -> ComplexVec {
    let std = std::f64::consts::FRAC_1_SQRT_2;
    let re_im = (0..2 * dim).map(|_| std * rng.standard_normal()).collect();
    ComplexVec { re_im }
}

/// `a^H b = sum conj(a_k) b_k`.
pub fn hermitian_inner(a: &ComplexVec, b: &ComplexVec) -> Result<Complex64> {
    check_len(a.re_im.len(), b.re_im.len())?;
    Ok(inner_unchecked(&a.re_im, &b.re_im))
}

/// `a^H b` on raw interleaved slices of equal length.
pub(crate) fn inner_unchecked(a: &[f64], b: &[f64]) -> Complex64 {
    debug_assert_eq!(a.len(), b.len());
    let mut re = 0.0;
    let mut im = 0.0;
    for (x, y) in a.chunks_exact(2).zip(b.chunks_exact(2)) {
        // conj(xr + j xi) * (yr + j yi)
        re += x[0] * y[0] + x[1] * y[1];
        im += x[0] * y[1] - x[1] * y[0];
    }
    Complex64::new(re, im)
}

/// Elementwise `y_m / (x_m + eps)` in the flattened real coordinates.
pub fn hadamard_div(y: &[f64], x: &[f64], eps: f64) -> Result<Vec<f64>> {
    check_len(y.len(), x.len())?;
    if !(eps > 0.0) {
        return Err(Error::invalid("eps", "must be positive"));
    }
    Ok(y.iter().zip(x).map(|(yi, xi)| yi / (xi + eps)).collect())
}

/// Central-difference gradient of `f` at `x` with step `h`.
pub fn finite_diff_grad<F>(f: F, x: &[f64], h: f64) -> Vec<f64>
where
    F: Fn(&[f64]) -> f64,
{
    let mut probe = x.to_vec();
    (0..x.len())
        .map(|m| {
            let orig = probe[m];
            probe[m] = orig + h;
            let up = f(&probe);
            probe[m] = orig - h;
            let down = f(&probe);
            probe[m] = orig;
            (up - down) / (2.0 * h)
        })
        .collect()
}

pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

pub(crate) fn norm(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

pub(crate) fn dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter()
        .zip(b)
        .map(|(x, y)| (x - y) * (x - y))
        .sum::<f64>()
        .sqrt()
}
