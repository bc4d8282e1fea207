//! The two beamforming programs: eavesdropper-SINR minimization and green
//! (power plus sparsity) minimization, both under per-user SINR constraints.
//!
//! Real coordinates: a beamformer flattens to `N` consecutive blocks of `2K`
//! reals, block `i` holding `w_i` interleaved. For a channel `c` the gain
//! `w^H c` has real part `<w, c>` and imaginary part `<w, rot(c)>`, where
//! `rot` maps each pair `(re, im)` to `(im, -re)`.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{check_len, Error, Result};
use crate::numeric::{inner_unchecked, ComplexVec};

/// Channel coefficients of one problem instance.
///
/// `h(i, j)` is the channel from sender `i` to legitimate user `j`,
/// `g(j, k)` the channel from sender `j` to eavesdropper `k`.
#[derive(Debug, Clone, PartialEq)]
pub struct ChannelSet {
    n_users: usize,
    n_antennas: usize,
    h: Vec<ComplexVec>,
    g: Vec<ComplexVec>,
    sigma2: f64,
    gamma: Vec<f64>,
}

impl ChannelSet {
    /// `h` and `g` are row-major `N x N` grids of length-`K` vectors.
    pub fn new(
        n_antennas: usize,
        n_users: usize,
        h: Vec<ComplexVec>,
        g: Vec<ComplexVec>,
        sigma2: f64,
        gamma: Vec<f64>,
    ) -> Result<Self> {
        if n_antennas == 0 || n_users == 0 {
            return Err(Error::invalid("dimensions", "K and N must be at least 1"));
        }
        check_len(n_users * n_users, h.len())?;
        check_len(n_users * n_users, g.len())?;
        check_len(n_users, gamma.len())?;
        for c in h.iter().chain(&g) {
            check_len(n_antennas, c.dim())?;
        }
        if !(sigma2 > 0.0) || !sigma2.is_finite() {
            return Err(Error::invalid("sigma2", "noise power must be positive"));
        }
        if gamma.iter().any(|&v| !(v > 0.0) || !v.is_finite()) {
            return Err(Error::invalid("gamma", "SINR thresholds must be positive"));
        }
        Ok(Self {
            n_users,
            n_antennas,
            h,
            g,
            sigma2,
            gamma,
        })
    }

    pub fn n_users(&self) -> usize {
        self.n_users
    }

    pub fn n_antennas(&self) -> usize {
        self.n_antennas
    }

    pub fn h(&self, sender: usize, user: usize) -> &ComplexVec {
        &self.h[sender * self.n_users + user]
    }

    pub fn g(&self, sender: usize, eve: usize) -> &ComplexVec {
        &self.g[sender * self.n_users + eve]
    }

    pub fn sigma2(&self) -> f64 {
        self.sigma2
    }

    pub fn gamma(&self) -> &[f64] {
        &self.gamma
    }

    /// Length of [`ChannelSet::features`] for `K` antennas and `N` users.
    pub fn feature_dim(n_antennas: usize, n_users: usize) -> usize {
        4 * n_antennas * n_users * n_users + 1 + n_users
    }

    /// Network input: all `h`, then all `g` (interleaved re/im), `sigma2`, `gamma`.
    pub fn features(&self) -> Vec<f64> {
        let mut out = Vec::with_capacity(Self::feature_dim(self.n_antennas, self.n_users));
        for c in self.h.iter().chain(&self.g) {
            out.extend_from_slice(c.as_slice());
        }
        out.push(self.sigma2);
        out.extend_from_slice(&self.gamma);
        out
    }

    /// Length of a flattened beamformer for this instance.
    pub fn var_dim(&self) -> usize {
        2 * self.n_antennas * self.n_users
    }
}

/// Beamforming vectors `w_0 .. w_{N-1}`, each of length `K`, stored flat.
#[derive(Debug, Clone, PartialEq)]
pub struct Beamformer {
    n_antennas: usize,
    n_users: usize,
    flat: Vec<f64>,
}

impl Beamformer {
    pub fn zeros(n_antennas: usize, n_users: usize) -> Self {
        Self {
            n_antennas,
            n_users,
            flat: vec![0.0; 2 * n_antennas * n_users],
        }
    }

    pub fn from_flat(n_antennas: usize, n_users: usize, flat: Vec<f64>) -> Result<Self> {
        check_len(2 * n_antennas * n_users, flat.len())?;
        Ok(Self {
            n_antennas,
            n_users,
            flat,
        })
    }

    pub fn from_vectors(w: Vec<ComplexVec>) -> Result<Self> {
        let n_users = w.len();
        let n_antennas = w.first().map_or(0, ComplexVec::dim);
        let mut flat = Vec::with_capacity(2 * n_antennas * n_users);
        for v in &w {
            check_len(n_antennas, v.dim())?;
            flat.extend_from_slice(v.as_slice());
        }
        Ok(Self {
            n_antennas,
            n_users,
            flat,
        })
    }

    pub fn n_users(&self) -> usize {
        self.n_users
    }

    pub fn n_antennas(&self) -> usize {
        self.n_antennas
    }

    pub fn flatten(&self) -> &[f64] {
        &self.flat
    }

    pub fn flat_mut(&mut self) -> &mut [f64] {
        &mut self.flat
    }

    pub fn into_flat(self) -> Vec<f64> {
        self.flat
    }

    /// Interleaved view of `w_i`.
    pub fn block(&self, i: usize) -> &[f64] {
        let len = 2 * self.n_antennas;
        &self.flat[i * len..(i + 1) * len]
    }

    pub fn block_mut(&mut self, i: usize) -> &mut [f64] {
        let len = 2 * self.n_antennas;
        &mut self.flat[i * len..(i + 1) * len]
    }

    pub fn vector(&self, i: usize) -> ComplexVec {
        ComplexVec::from_interleaved(self.block(i).to_vec()).expect("even block length")
    }

    pub fn vectors(&self) -> Vec<ComplexVec> {
        (0..self.n_users).map(|i| self.vector(i)).collect()
    }

    /// Total transmit power `sum_i ||w_i||^2`.
    pub fn power(&self) -> f64 {
        self.flat.iter().map(|v| v * v).sum()
    }

    pub(crate) fn check_shape(&self, ch: &ChannelSet) -> Result<()> {
        check_len(ch.n_antennas, self.n_antennas)?;
        check_len(ch.n_users, self.n_users)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ProblemVariant {
    EveSinrMin,
    GreenPower,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ProblemSpec {
    pub variant: ProblemVariant,
    /// Weight of the smoothed L0.5 penalty; ignored for `EveSinrMin`.
    pub sparsity_weight: f64,
    pub smooth_delta: f64,
}

impl Default for ProblemSpec {
    fn default() -> Self {
        Self {
            variant: ProblemVariant::EveSinrMin,
            sparsity_weight: 0.0,
            smooth_delta: 1e-8,
        }
    }
}

impl ProblemSpec {
    pub fn eve_sinr() -> Self {
        Self::default()
    }

    pub fn green_power(sparsity_weight: f64) -> Self {
        Self {
            variant: ProblemVariant::GreenPower,
            sparsity_weight,
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.sparsity_weight >= 0.0) || !self.sparsity_weight.is_finite() {
            return Err(Error::invalid("sparsity_weight", "must be finite and >= 0"));
        }
        if !(self.smooth_delta >= 0.0) || !self.smooth_delta.is_finite() {
            return Err(Error::invalid("smooth_delta", "must be finite and >= 0"));
        }
        Ok(())
    }
}

/// Per-user second-order-cone slack; `margins[i] >= 0` iff user `i` meets its SINR target.
#[derive(Debug, Clone, PartialEq)]
pub struct SocResidual {
    pub margins: Vec<f64>,
}

impl SocResidual {
    pub fn min_margin(&self) -> f64 {
        self.margins.iter().copied().fold(f64::INFINITY, f64::min)
    }
}

/// Gains `w_j^H h(j, i)` laid out `[j * N + i]`.
pub(crate) fn legit_gains(w: &Beamformer, ch: &ChannelSet) -> Vec<Complex64> {
    let n = ch.n_users;
    let mut out = Vec::with_capacity(n * n);
    for j in 0..n {
        for i in 0..n {
            out.push(inner_unchecked(w.block(j), ch.h(j, i).as_slice()));
        }
    }
    out
}

fn eve_gains(w: &Beamformer, ch: &ChannelSet) -> Vec<Complex64> {
    let n = ch.n_users;
    let mut out = Vec::with_capacity(n * n);
    for j in 0..n {
        for k in 0..n {
            out.push(inner_unchecked(w.block(j), ch.g(j, k).as_slice()));
        }
    }
    out
}

/// `sum_{j != target} |gain(j, target)|^2`.
fn interference(gains: &[Complex64], n: usize, target: usize) -> f64 {
    (0..n)
        .filter(|&j| j != target)
        .map(|j| gains[j * n + target].norm_sqr())
        .sum()
}

/// Adds `coef * d|w^H c|^2 / dw` to `out`, given the current gain `w^H c`.
pub(crate) fn add_gain_sqr_grad(out: &mut [f64], gain: Complex64, chan: &[f64], coef: f64) {
    let (re, im) = (2.0 * coef * gain.re, 2.0 * coef * gain.im);
    for (o, c) in out.chunks_exact_mut(2).zip(chan.chunks_exact(2)) {
        o[0] += re * c[0] + im * c[1];
        o[1] += re * c[1] - im * c[0];
    }
}

fn check_index(index: usize, ch: &ChannelSet) -> Result<()> {
    if index < ch.n_users {
        Ok(())
    } else {
        Err(Error::IndexOutOfRange {
            index,
            len: ch.n_users,
        })
    }
}

/// SINR of legitimate user `i`.
pub fn sinr_legit(w: &Beamformer, ch: &ChannelSet, i: usize) -> Result<f64> {
    w.check_shape(ch)?;
    check_index(i, ch)?;
    let gains = legit_gains(w, ch);
    let n = ch.n_users;
    Ok(gains[i * n + i].norm_sqr() / (interference(&gains, n, i) + ch.sigma2))
}

/// SINR of eavesdropper `k`, which listens to sender `k`.
pub fn sinr_eve(w: &Beamformer, ch: &ChannelSet, k: usize) -> Result<f64> {
    w.check_shape(ch)?;
    check_index(k, ch)?;
    let gains = eve_gains(w, ch);
    let n = ch.n_users;
    Ok(gains[k * n + k].norm_sqr() / (interference(&gains, n, k) + ch.sigma2))
}

pub fn objective(w: &Beamformer, ch: &ChannelSet, spec: &ProblemSpec) -> f64 {
    match spec.variant {
        ProblemVariant::EveSinrMin => {
            let gains = eve_gains(w, ch);
            let n = ch.n_users;
            (0..n)
                .map(|k| gains[k * n + k].norm_sqr() / (interference(&gains, n, k) + ch.sigma2))
                .sum()
        }
        ProblemVariant::GreenPower => {
            let mut total = w.power();
            if spec.sparsity_weight > 0.0 {
                let quasi: f64 = w
                    .flatten()
                    .chunks_exact(2)
                    .map(|c| (c[0] * c[0] + c[1] * c[1] + spec.smooth_delta).powf(0.25))
                    .sum();
                total += spec.sparsity_weight * quasi;
            }
            total
        }
    }
}

/// Gradient of [`objective`] with respect to the flattened real coordinates.
pub fn grad_objective(w: &Beamformer, ch: &ChannelSet, spec: &ProblemSpec) -> Vec<f64> {
    let mut grad = vec![0.0; w.flatten().len()];
    match spec.variant {
        ProblemVariant::EveSinrMin => {
            let n = ch.n_users;
            let k2 = 2 * ch.n_antennas;
            let gains = eve_gains(w, ch);
            for k in 0..n {
                let num = gains[k * n + k].norm_sqr();
                let den = interference(&gains, n, k) + ch.sigma2;
                add_gain_sqr_grad(
                    &mut grad[k * k2..(k + 1) * k2],
                    gains[k * n + k],
                    ch.g(k, k).as_slice(),
                    1.0 / den,
                );
                let coef = -num / (den * den);
                for j in (0..n).filter(|&j| j != k) {
                    add_gain_sqr_grad(
                        &mut grad[j * k2..(j + 1) * k2],
                        gains[j * n + k],
                        ch.g(j, k).as_slice(),
                        coef,
                    );
                }
            }
        }
        ProblemVariant::GreenPower => {
            let alpha = spec.sparsity_weight;
            for (gc, wc) in grad.chunks_exact_mut(2).zip(w.flatten().chunks_exact(2)) {
                let mut scale = 2.0;
                if alpha > 0.0 {
                    let mag2 = wc[0] * wc[0] + wc[1] * wc[1] + spec.smooth_delta;
                    scale += 0.5 * alpha * mag2.powf(-0.75);
                }
                gc[0] = scale * wc[0];
                gc[1] = scale * wc[1];
            }
        }
    }
    grad
}

/// Phase-aligned SOC margins `|w_i^H h_ii| - sqrt(gamma_i) * sqrt(I_i + sigma2)`.
pub fn soc_residuals(w: &Beamformer, ch: &ChannelSet) -> SocResidual {
    let n = ch.n_users;
    let gains = legit_gains(w, ch);
    let margins = (0..n)
        .map(|i| {
            gains[i * n + i].norm()
                - ch.gamma[i].sqrt() * (interference(&gains, n, i) + ch.sigma2).sqrt()
        })
        .collect();
    SocResidual { margins }
}

/// SOC margins together with their gradients; the gradient of `|w_i^H h_ii|`
/// is taken as zero where the direct gain vanishes.
pub(crate) fn soc_margins_with_grad(w: &Beamformer, ch: &ChannelSet) -> Vec<(f64, Vec<f64>)> {
    let n = ch.n_users;
    let k2 = 2 * ch.n_antennas;
    let gains = legit_gains(w, ch);
    (0..n)
        .map(|i| {
            let mut grad = vec![0.0; w.flatten().len()];
            let direct = gains[i * n + i];
            let mag = direct.norm();
            if mag > 0.0 {
                // d|s| = d|s|^2 / (2|s|)
                add_gain_sqr_grad(
                    &mut grad[i * k2..(i + 1) * k2],
                    direct,
                    ch.h(i, i).as_slice(),
                    0.5 / mag,
                );
            }
            let root = (interference(&gains, n, i) + ch.sigma2).sqrt();
            let coef = -ch.gamma[i].sqrt() * 0.5 / root;
            for j in (0..n).filter(|&j| j != i) {
                add_gain_sqr_grad(
                    &mut grad[j * k2..(j + 1) * k2],
                    gains[j * n + i],
                    ch.h(j, i).as_slice(),
                    coef,
                );
            }
            (mag - ch.gamma[i].sqrt() * root, grad)
        })
        .collect()
}


#[cfg(test)]
mod tests {
    use super::test_support::*;
    use super::*;
    use crate::numeric::{finite_diff_grad, Rng};
    use proptest::prelude::*;

    fn single(k_entry: Complex64) -> ComplexVec {
        ComplexVec::from_complex(&[k_entry, Complex64::new(0.0, 0.0)])
    }

    fn one_user(w: Complex64, h: Complex64, g: Complex64) -> (Beamformer, ChannelSet) {
        let ch = ChannelSet::new(2, 1, vec![single(h)], vec![single(g)], 1.0, vec![1.0]).unwrap();
        (Beamformer::from_vectors(vec![single(w)]).unwrap(), ch)
    }

    // Straight transcription of the SINR formulas over complex numbers.
    fn reference_sinr(w: &Beamformer, chans: &dyn Fn(usize, usize) -> Vec<Complex64>, n: usize, sigma2: f64, t: usize) -> f64 {
        let ws: Vec<Vec<Complex64>> = w.vectors().iter().map(|v| v.to_complex()).collect();
        let gain = |j: usize| -> f64 {
            ws[j]
                .iter()
                .zip(chans(j, t))
                .map(|(a, b)| a.conj() * b)
                .sum::<Complex64>()
                .norm_sqr()
        };
        let interf: f64 = (0..n).filter(|&j| j != t).map(gain).sum();
        gain(t) / (interf + sigma2)
    }

    fn rel_err(a: &[f64], b: &[f64]) -> f64 {
        let diff: f64 = a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum::<f64>().sqrt();
        let scale: f64 = b.iter().map(|y| y * y).sum::<f64>().sqrt();
        diff / scale.max(1e-12)
    }

    #[test]
    fn sinr_single_user_matched() {
        let one = Complex64::new(1.0, 0.0);
        let (w, ch) = one_user(one, one, one);
        assert_eq!(sinr_legit(&w, &ch, 0).unwrap(), 1.0);
        assert_eq!(sinr_eve(&w, &ch, 0).unwrap(), 1.0);
    }

    #[test]
    fn sinr_zero_beamformer() {
        let mut rng = Rng::new(1);
        let ch = random_channels(&mut rng, 4, 2, 10.0);
        let w = Beamformer::zeros(4, 2);
        for i in 0..2 {
            assert_eq!(sinr_legit(&w, &ch, i).unwrap(), 0.0);
            assert_eq!(sinr_eve(&w, &ch, i).unwrap(), 0.0);
        }
    }

    #[test]
    fn sinr_index_out_of_range() {
        let mut rng = Rng::new(1);
        let ch = random_channels(&mut rng, 4, 2, 10.0);
        let w = Beamformer::zeros(4, 2);
        assert!(matches!(sinr_legit(&w, &ch, 2), Err(Error::IndexOutOfRange { .. })));
        assert!(matches!(sinr_eve(&w, &ch, 5), Err(Error::IndexOutOfRange { .. })));
    }

    #[test]
    fn sinr_matches_reference_formula() {
        let mut rng = Rng::new(2);
        for _ in 0..20 {
            let ch = random_channels(&mut rng, 4, 2, 10.0);
            let w = random_beamformer(&mut rng, 4, 2, 1.0);
            let h = |j: usize, i: usize| ch.h(j, i).to_complex();
            let g = |j: usize, k: usize| ch.g(j, k).to_complex();
            let mut eve_total = 0.0;
            for t in 0..2 {
                let legit = reference_sinr(&w, &h, 2, 1.0, t);
                let eve = reference_sinr(&w, &g, 2, 1.0, t);
                eve_total += eve;
                assert!((sinr_legit(&w, &ch, t).unwrap() - legit).abs() <= 1e-12 * legit.max(1.0));
                assert!((sinr_eve(&w, &ch, t).unwrap() - eve).abs() <= 1e-12 * eve.max(1.0));
            }
            let obj = objective(&w, &ch, &ProblemSpec::eve_sinr());
            assert!((obj - eve_total).abs() <= 1e-12 * eve_total.max(1.0));
        }
    }

    #[test]
    fn green_objective_cases() {
        let spec = ProblemSpec {
            variant: ProblemVariant::GreenPower,
            sparsity_weight: 0.7,
            smooth_delta: 0.0,
        };
        let mut rng = Rng::new(3);
        let ch = random_channels(&mut rng, 3, 2, 10.0);
        assert_eq!(objective(&Beamformer::zeros(3, 2), &ch, &spec), 0.0);

        let w = Beamformer::from_flat(1, 1, vec![2.0, 0.0]).unwrap();
        let ch1 = random_channels(&mut rng, 1, 1, 10.0);
        assert_eq!(objective(&w, &ch1, &ProblemSpec::green_power(0.0)), 4.0);
    }

    #[test]
    fn green_gradient_without_sparsity_is_twice_w() {
        let mut rng = Rng::new(4);
        let ch = random_channels(&mut rng, 4, 3, 10.0);
        let w = random_beamformer(&mut rng, 4, 3, 1.0);
        let grad = grad_objective(&w, &ch, &ProblemSpec::green_power(0.0));
        for (g, x) in grad.iter().zip(w.flatten()) {
            assert_eq!(*g, 2.0 * x);
        }
    }

    #[test]
    fn eve_gradient_at_zero_is_finite() {
        let mut rng = Rng::new(5);
        let ch = random_channels(&mut rng, 4, 2, 10.0);
        let grad = grad_objective(&Beamformer::zeros(4, 2), &ch, &ProblemSpec::eve_sinr());
        assert!(grad.iter().all(|v| v.is_finite()));
    }

    #[test]
    fn gradients_match_finite_differences() {
        let mut rng = Rng::new(6);
        let specs = [ProblemSpec::eve_sinr(), ProblemSpec::green_power(0.5)];
        for trial in 0..100 {
            let ch = random_channels(&mut rng, 4, 2, 10.0);
            let w = random_beamformer(&mut rng, 4, 2, 1.0);
            let spec = specs[trial % 2];
            let analytic = grad_objective(&w, &ch, &spec);
            let numeric = finite_diff_grad(
                |x| objective(&Beamformer::from_flat(4, 2, x.to_vec()).unwrap(), &ch, &spec),
                w.flatten(),
                1e-6,
            );
            let err = rel_err(&analytic, &numeric);
            assert!(err <= 1e-4, "trial {trial}: rel err {err}");
        }
    }

    #[test]
    fn margin_gradients_match_finite_differences() {
        let mut rng = Rng::new(7);
        for _ in 0..20 {
            let ch = random_channels(&mut rng, 3, 3, 5.0);
            let w = random_beamformer(&mut rng, 3, 3, 1.0);
            for (i, (_, grad)) in soc_margins_with_grad(&w, &ch).into_iter().enumerate() {
                let numeric = finite_diff_grad(
                    |x| soc_residuals(&Beamformer::from_flat(3, 3, x.to_vec()).unwrap(), &ch).margins[i],
                    w.flatten(),
                    1e-6,
                );
                assert!(rel_err(&grad, &numeric) <= 1e-5);
            }
        }
    }

    #[test]
    fn zero_beamformer_margins() {
        let mut rng = Rng::new(8);
        let ch = random_channels(&mut rng, 4, 3, 7.0);
        let res = soc_residuals(&Beamformer::zeros(4, 3), &ch);
        for m in res.margins {
            assert!((m + 7.0f64.sqrt()).abs() < 1e-15);
        }
    }

    #[test]
    fn margin_vanishes_at_sinr_equality() {
        let mut rng = Rng::new(9);
        for _ in 0..50 {
            let ch = random_channels(&mut rng, 4, 2, 2.0);
            let w = random_beamformer(&mut rng, 4, 2, 1.0);
            // Scale user 0 alone: its SINR is increasing in that scale.
            let sinr_at = |c: f64| {
                let mut v = w.clone();
                v.block_mut(0).iter_mut().for_each(|x| *x *= c);
                sinr_legit(&v, &ch, 0).unwrap()
            };
            let (mut lo, mut hi) = (0.0, 1.0);
            while sinr_at(hi) < 2.0 {
                hi *= 2.0;
            }
            for _ in 0..200 {
                let mid = 0.5 * (lo + hi);
                if sinr_at(mid) < 2.0 {
                    lo = mid;
                } else {
                    hi = mid;
                }
            }
            let mut v = w.clone();
            v.block_mut(0).iter_mut().for_each(|x| *x *= hi);
            assert!(soc_residuals(&v, &ch).margins[0].abs() <= 1e-9);
        }
    }

    #[test]
    fn margin_sign_agrees_with_sinr() {
        let mut rng = Rng::new(10);
        let ch = random_channels(&mut rng, 4, 2, 10.0);
        for _ in 0..1000 {
            let scale = rng.uniform(0.1, 5.0);
            let w = random_beamformer(&mut rng, 4, 2, scale);
            let res = soc_residuals(&w, &ch);
            for i in 0..2 {
                let sinr = sinr_legit(&w, &ch, i).unwrap();
                assert_eq!(res.margins[i] >= 0.0, sinr >= 10.0);
            }
        }
    }

    #[test]
    fn sparsity_weight_is_monotone() {
        let mut rng = Rng::new(11);
        let ch = random_channels(&mut rng, 4, 2, 10.0);
        let w = random_beamformer(&mut rng, 4, 2, 1.0);
        let mut last = f64::NEG_INFINITY;
        for alpha in [0.0, 0.01, 0.1, 1.0, 10.0] {
            let v = objective(&w, &ch, &ProblemSpec::green_power(alpha));
            assert!(v >= last);
            last = v;
        }
    }

    #[test]
    fn channel_set_rejects_bad_input() {
        let mut rng = Rng::new(12);
        let ch = random_channels(&mut rng, 2, 2, 1.0);
        let h: Vec<_> = (0..4).map(|i| ch.h(i / 2, i % 2).clone()).collect();
        assert!(ChannelSet::new(2, 2, h.clone(), h.clone(), 0.0, vec![1.0; 2]).is_err());
        assert!(ChannelSet::new(2, 2, h.clone(), h.clone(), 1.0, vec![1.0, -1.0]).is_err());
        assert!(ChannelSet::new(3, 2, h.clone(), h.clone(), 1.0, vec![1.0; 2]).is_err());
        assert!(ChannelSet::new(2, 2, h.clone(), h, 1.0, vec![1.0; 2]).is_ok());
    }

    #[test]
    fn feature_layout() {
        let mut rng = Rng::new(13);
        let ch = random_channels(&mut rng, 3, 2, 4.0);
        let f = ch.features();
        assert_eq!(f.len(), ChannelSet::feature_dim(3, 2));
        assert_eq!(&f[..6], ch.h(0, 0).as_slice());
        assert_eq!(&f[24..30], ch.g(0, 0).as_slice());
        assert_eq!(&f[f.len() - 3..], &[1.0, 4.0, 4.0]);
    }

    proptest! {
        #[test]
        fn sinr_invariant_under_common_phase(seed in any::<u64>(), theta in 0.0f64..6.3) {
            let mut rng = Rng::new(seed);
            let ch = random_channels(&mut rng, 3, 3, 10.0);
            let w = random_beamformer(&mut rng, 3, 3, 1.0);
            let rotated = Beamformer::from_vectors(w.vectors().into_iter().map(|mut v| {
                v.scale(Complex64::from_polar(1.0, theta));
                v
            }).collect()).unwrap();
            for i in 0..3 {
                let a = sinr_legit(&w, &ch, i).unwrap();
                let b = sinr_legit(&rotated, &ch, i).unwrap();
                prop_assert!((a - b).abs() <= 1e-10 * a.max(1.0));
                let a = sinr_eve(&w, &ch, i).unwrap();
                let b = sinr_eve(&rotated, &ch, i).unwrap();
                prop_assert!((a - b).abs() <= 1e-10 * a.max(1.0));
            }
        }
    }
}
