use crate::error::{check_len, Error, Result};
use crate::numeric::Rng;

/// Dense rectifier network with an identity output layer.
///
/// All parameters live in one flat buffer; layer `l` stores its `out x in`
/// weight matrix row-major followed by its `out` biases.
#[derive(Debug, Clone, PartialEq)]
pub struct MlpParams {
    dims: Vec<usize>,
    offsets: Vec<usize>,
    data: Vec<f64>,
}

fn layout(dims: &[usize]) -> (Vec<usize>, usize) {
    let mut offsets = Vec::with_capacity(dims.len());
    let mut total = 0;
    for pair in dims.windows(2) {
        offsets.push(total);
        total += pair[1] * pair[0] + pair[1];
    }
    (offsets, total)
}

impl MlpParams {
    /// All-zero network with layer widths `dims = [input, hidden.., output]`.
    pub fn zeros(dims: &[usize]) -> Result<Self> {
        if dims.len() < 2 || dims.iter().any(|&d| d == 0) {
            return Err(Error::invalid("dims", "need at least two positive widths"));
        }
        let (offsets, total) = layout(dims);
        Ok(Self {
            dims: dims.to_vec(),
            offsets,
            data: vec![0.0; total],
        })
    }

    /// Uniform `+-sqrt(6 / (in + out))` weights, zero biases.
    pub fn xavier(dims: &[usize], rng: &mut Rng) -> Result<Self> {
        let mut params = Self::zeros(dims)?;
        for l in 0..params.n_layers() {
            let (out, inp) = (dims[l + 1], dims[l]);
            let bound = (6.0 / (inp + out) as f64).sqrt();
            for w in params.weights_mut(l) {
                *w = rng.uniform(-bound, bound);
            }
        }
        Ok(params)
    }

    pub fn from_parts(dims: &[usize], data: Vec<f64>) -> Result<Self> {
        let mut params = Self::zeros(dims)?;
        check_len(params.data.len(), data.len())?;
        params.data = data;
        Ok(params)
    }

    pub fn dims(&self) -> &[usize] {
        &self.dims
    }

    pub fn n_layers(&self) -> usize {
        self.dims.len() - 1
    }

    pub fn input_dim(&self) -> usize {
        self.dims[0]
    }

    pub fn output_dim(&self) -> usize {
        *self.dims.last().expect("at least two widths")
    }

    /// Total number of scalar parameters.
    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    pub fn as_mut_slice(&mut self) -> &mut [f64] {
        &mut self.data
    }

    fn weight_range(&self, l: usize) -> std::ops::Range<usize> {
        let start = self.offsets[l];
        start..start + self.dims[l + 1] * self.dims[l]
    }

    fn bias_range(&self, l: usize) -> std::ops::Range<usize> {
        let start = self.weight_range(l).end;
        start..start + self.dims[l + 1]
    }

    pub fn weights(&self, l: usize) -> &[f64] {
        &self.data[self.weight_range(l)]
    }

    pub fn weights_mut(&mut self, l: usize) -> &mut [f64] {
        let r = self.weight_range(l);
        &mut self.data[r]
    }

    pub fn bias(&self, l: usize) -> &[f64] {
        &self.data[self.bias_range(l)]
    }

    pub fn bias_mut(&mut self, l: usize) -> &mut [f64] {
        let r = self.bias_range(l);
        &mut self.data[r]
    }

    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|v| v.is_finite())
    }
}

/// Activations recorded by [`forward`] for the reverse pass.
#[derive(Debug, Clone)]
pub struct Tape {
    /// Input of every layer (the network input first).
    inputs: Vec<Vec<f64>>,
    /// Pre-activation of every hidden layer.
    pre: Vec<Vec<f64>>,
}

pub fn forward(params: &MlpParams, phi: &[f64]) -> Result<(Vec<f64>, Tape)> {
    check_len(params.input_dim(), phi.len())?;
    let layers = params.n_layers();
    let mut inputs = Vec::with_capacity(layers);
    let mut pre = Vec::with_capacity(layers - 1);
    let mut current = phi.to_vec();
    for l in 0..layers {
        let (out, inp) = (params.dims[l + 1], params.dims[l]);
        let w = params.weights(l);
        let mut z = params.bias(l).to_vec();
        for (r, zr) in z.iter_mut().enumerate() {
            let row = &w[r * inp..(r + 1) * inp];
            *zr += row.iter().zip(&current).map(|(a, b)| a * b).sum::<f64>();
        }
        debug_assert_eq!(z.len(), out);
        inputs.push(current);
        if l + 1 < layers {
            current = z.iter().map(|&v| v.max(0.0)).collect();
            pre.push(z);
        } else {
            current = z;
        }
    }
    Ok((current, Tape { inputs, pre }))
}

/// Gradient of `upstream . forward(theta)` with respect to the parameters,
/// laid out like [`MlpParams::as_slice`].
pub fn backward(params: &MlpParams, tape: &Tape, upstream: &[f64]) -> Result<Vec<f64>> {
    let mut grads = vec![0.0; params.len()];
    backward_accumulate(params, tape, upstream, 1.0, &mut grads)?;
    Ok(grads)
}

/// Adds `scale *` the [`backward`] gradient into `acc`.
pub fn backward_accumulate(
    params: &MlpParams,
    tape: &Tape,
    upstream: &[f64],
    scale: f64,
    acc: &mut [f64],
) -> Result<()> {
    check_len(params.output_dim(), upstream.len())?;
    check_len(params.len(), acc.len())?;
    let layers = params.n_layers();
    let stale = tape.inputs.len() != layers
        || tape.pre.len() + 1 != layers
        || tape.inputs.iter().zip(&params.dims).any(|(a, &d)| a.len() != d);
    if stale {
        return Err(Error::format("activation tape", "does not match the network shape"));
    }
    let mut delta: Vec<f64> = upstream.iter().map(|u| scale * u).collect();
    for l in (0..layers).rev() {
        let inp = params.dims[l];
        let input = &tape.inputs[l];
        let wr = params.weight_range(l);
        let br = params.bias_range(l);
        for (r, &d) in delta.iter().enumerate() {
            if d == 0.0 {
                continue;
            }
            for (g, a) in acc[wr.start + r * inp..wr.start + (r + 1) * inp].iter_mut().zip(input) {
                *g += d * a;
            }
            acc[br.start + r] += d;
        }
        if l == 0 {
            break;
        }
        let w = params.weights(l);
        let mut prev = vec![0.0; inp];
        for (r, &d) in delta.iter().enumerate() {
            if d == 0.0 {
                continue;
            }
            for (p, wv) in prev.iter_mut().zip(&w[r * inp..(r + 1) * inp]) {
                *p += wv * d;
            }
        }
        // rectifier derivative, zero at the kink
        for (p, z) in prev.iter_mut().zip(&tape.pre[l - 1]) {
            if *z <= 0.0 {
                *p = 0.0;
            }
        }
        delta = prev;
    }
    Ok(())
}

/// Clamps every entry to `[-beta, beta]`.
pub fn clip(grads: &mut [f64], beta: f64) {
    for g in grads {
        *g = g.clamp(-beta, beta);
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use super::Rng;
    use crate::numeric::finite_diff_grad;
    use proptest::prelude::*;

    #[test]
    fn zero_network_outputs_zero() {
        let params = MlpParams::zeros(&[5, 4, 4, 4, 3]).unwrap();
        let (x, _) = forward(&params, &[1.0, -2.0, 3.0, 0.5, 9.0]).unwrap();
        assert_eq!(x, vec![0.0; 3]);
    }

    #[test]
    fn single_path_network_is_affine() {
        // 2 -> 1 -> 1: x = 3 * relu(2 * phi_0 + 1) - 4
        let mut params = MlpParams::zeros(&[2, 1, 1]).unwrap();
        params.weights_mut(0).copy_from_slice(&[2.0, 0.0]);
        params.bias_mut(0)[0] = 1.0;
        params.weights_mut(1)[0] = 3.0;
        params.bias_mut(1)[0] = -4.0;
        assert_eq!(forward(&params, &[1.0, 0.0]).unwrap().0, vec![5.0]);
        assert_eq!(forward(&params, &[-1.0, 0.0]).unwrap().0, vec![-4.0]);
    }

    #[test]
    fn forward_is_deterministic_and_checks_dims() {
        let mut rng = Rng::new(1);
        let params = MlpParams::xavier(&[6, 8, 8, 8, 4], &mut rng).unwrap();
        let phi: Vec<f64> = (0..6).map(|_| rng.standard_normal()).collect();
        let a = forward(&params, &phi).unwrap().0;
        let b = forward(&params, &phi).unwrap().0;
        assert_eq!(
            a.iter().map(|v| v.to_bits()).collect::<Vec<_>>(),
            b.iter().map(|v| v.to_bits()).collect::<Vec<_>>()
        );
        assert!(matches!(forward(&params, &phi[..5]), Err(Error::DimensionMismatch { .. })));
    }

    #[test]
    fn zero_upstream_gives_zero_gradient() {
        let mut rng = Rng::new(2);
        let params = MlpParams::xavier(&[3, 5, 2], &mut rng).unwrap();
        let (_, tape) = forward(&params, &[0.1, 0.2, 0.3]).unwrap();
        assert!(backward(&params, &tape, &[0.0, 0.0]).unwrap().iter().all(|&g| g == 0.0));
    }

    #[test]
    fn single_layer_gradient_closed_form() {
        let mut rng = Rng::new(3);
        let params = MlpParams::xavier(&[3, 2], &mut rng).unwrap();
        let phi = [0.5, -1.0, 2.0];
        let u = [3.0, -0.25];
        let (_, tape) = forward(&params, &phi).unwrap();
        let g = backward(&params, &tape, &u).unwrap();
        for r in 0..2 {
            for c in 0..3 {
                assert_eq!(g[r * 3 + c], u[r] * phi[c]);
            }
            assert_eq!(g[6 + r], u[r]);
        }
    }

    #[test]
    fn stale_tape_is_rejected() {
        let mut rng = Rng::new(4);
        let a = MlpParams::xavier(&[3, 4, 2], &mut rng).unwrap();
        let b = MlpParams::xavier(&[3, 5, 2], &mut rng).unwrap();
        let (_, tape) = forward(&a, &[1.0, 2.0, 3.0]).unwrap();
        assert!(backward(&b, &tape, &[1.0, 1.0]).is_err());
        assert!(backward(&a, &tape, &[1.0]).is_err());
    }

    #[test]
    fn backward_matches_finite_differences() {
        let mut rng = Rng::new(5);
        for _ in 0..20 {
            let dims = [4, 6, 5, 6, 3];
            let params = MlpParams::xavier(&dims, &mut rng).unwrap();
            let phi: Vec<f64> = (0..4).map(|_| rng.standard_normal()).collect();
            let up: Vec<f64> = (0..3).map(|_| rng.standard_normal()).collect();
            let (_, tape) = forward(&params, &phi).unwrap();
            let analytic = backward(&params, &tape, &up).unwrap();
            let numeric = finite_diff_grad(
                |theta| {
                    let p = MlpParams::from_parts(&dims, theta.to_vec()).unwrap();
                    let x = forward(&p, &phi).unwrap().0;
                    x.iter().zip(&up).map(|(a, b)| a * b).sum()
                },
                params.as_slice(),
                1e-6,
            );
            let diff: f64 = analytic.iter().zip(&numeric).map(|(a, b)| (a - b).powi(2)).sum::<f64>().sqrt();
            let scale: f64 = numeric.iter().map(|b| b * b).sum::<f64>().sqrt();
            assert!(diff <= 1e-4 * scale, "rel err {}", diff / scale);
        }
    }

    #[test]
    fn clip_cases() {
        let mut g = vec![0.5, -0.2, 1e6, -3.0];
        clip(&mut g, 2.0);
        assert_eq!(g, vec![0.5, -0.2, 2.0, -2.0]);
        let mut h = vec![1e6];
        clip(&mut h, 1.0);
        assert_eq!(h, vec![1.0]);
    }

    #[test]
    fn superposition_within_activation_pattern() {
        let mut rng = Rng::new(6);
        let params = MlpParams::xavier(&[5, 16, 16, 16, 4], &mut rng).unwrap();
        for _ in 0..20 {
            let phi: Vec<f64> = (0..5).map(|_| rng.standard_normal()).collect();
            let d1: Vec<f64> = (0..5).map(|_| 1e-7 * rng.standard_normal()).collect();
            let d2: Vec<f64> = (0..5).map(|_| 1e-7 * rng.standard_normal()).collect();
            let add = |a: &[f64], b: &[f64]| a.iter().zip(b).map(|(x, y)| x + y).collect::<Vec<_>>();
            let f = |p: &[f64]| forward(&params, p).unwrap().0;
            let both = f(&add(&add(&phi, &d1), &d2));
            let (a, b, base) = (f(&add(&phi, &d1)), f(&add(&phi, &d2)), f(&phi));
            for m in 0..4 {
                assert!((both[m] - a[m] - b[m] + base[m]).abs() <= 1e-9);
            }
        }
    }

    proptest! {
        #[test]
        fn clip_is_idempotent(values in prop::collection::vec(-1e6f64..1e6, 0..50), beta in 1e-3f64..10.0) {
            let mut once = values.clone();
            clip(&mut once, beta);
            let mut twice = once.clone();
            clip(&mut twice, beta);
            prop_assert_eq!(once, twice);
        }
    }
}
