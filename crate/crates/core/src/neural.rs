//! A small fully-connected network with tanh hidden layers and a linear
//! output layer, plus hand-written reverse-mode derivatives.
//!
//! # Parameter layout
//!
//! A [`ParamVector`] is the concatenation, layer by layer from input to
//! output, of that layer's weight matrix in row-major `[fan_out][fan_in]`
//! order followed by its `fan_out` biases.
//!
//! # Serialized form
//!
//! All integers are `u32` and all floats `f64`, little-endian:
//!
//! ```text
//! count            number of layer widths D (= hidden layers + 2)
//! width[0..D]      input_dim, hidden_dims..., output_dim
//! param[0..P]      the ParamVector in the layout above
//! ```
//!
//! # Initialization
//!
//! Hidden-layer weights are drawn from Glorot-uniform
//! U(−√(6/(fan_in+fan_out)), +√(6/(fan_in+fan_out))) using ChaCha8, a
//! counter-based generator; each layer reads its own ChaCha stream (stream id
//! = layer index) of the seeded key, so layers can be regenerated
//! independently. Floats are formed from the top 53 bits of each `u64`
//! output. Hidden biases, and every weight and bias of the output layer,
//! start at zero so that an untrained network outputs exactly zero.

use rand_chacha::ChaCha8Rng;
use rand_core::{RngCore, SeedableRng};

use crate::error::{Error, Result};

/// Number of state and time features fed to the network: t/T, S/N, L/N,
/// I/N, R/N.
pub const STATE_FEATURES: usize = 5;
/// Raw outputs: β signal, γ signal, correction-flow signal.
pub const RATE_OUTPUTS: usize = 3;

/// Layer widths. Hidden activations are always tanh.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct MlpSpec {
    pub input_dim: usize,
    pub hidden_dims: Vec<usize>,
    pub output_dim: usize,
}

impl MlpSpec {
    pub fn new(input_dim: usize, hidden_dims: Vec<usize>, output_dim: usize) -> Result<Self> {
        let spec = Self { input_dim, hidden_dims, output_dim };
        spec.validate()?;
        Ok(spec)
    }

    /// Rate network for `covariates` exogenous inputs with two hidden layers
    /// of width 32.
    pub fn rate_network(covariates: usize) -> Self {
        Self { input_dim: STATE_FEATURES + covariates, hidden_dims: vec![32, 32], output_dim: RATE_OUTPUTS }
    }

    pub fn validate(&self) -> Result<()> {
        if self.dims().contains(&0) {
            return Err(Error::Contract(format!("all layer widths must be >= 1, got {:?}", self.dims())));
        }
        Ok(())
    }

    /// input, hidden..., output
    pub fn dims(&self) -> Vec<usize> {
        let mut dims = Vec::with_capacity(self.hidden_dims.len() + 2);
        dims.push(self.input_dim);
        dims.extend(&self.hidden_dims);
        dims.push(self.output_dim);
        dims
    }

    /// (fan_in, fan_out) per affine layer.
    pub fn layers(&self) -> Vec<(usize, usize)> {
        self.dims().windows(2).map(|w| (w[0], w[1])).collect()
    }

    pub fn param_count(&self) -> usize {
        self.layers().iter().map(|(i, o)| i * o + o).sum()
    }

    /// Offset of each layer's weight block in the flat vector.
    fn offsets(&self) -> Vec<usize> {
        let mut acc = 0;
        self.layers()
            .iter()
            .map(|(i, o)| {
                let start = acc;
                acc += i * o + o;
                start
            })
            .collect()
    }
}

/// Flat network parameters.
#[derive(Debug, Clone, PartialEq)]
pub struct ParamVector(Vec<f64>);

impl ParamVector {
    pub fn zeros(spec: &MlpSpec) -> Self {
        Self(vec![0.0; spec.param_count()])
    }

    pub fn from_vec(spec: &MlpSpec, values: Vec<f64>) -> Result<Self> {
        if values.len() != spec.param_count() {
            return Err(Error::Contract(format!(
                "parameter vector has {} entries, network needs {}",
                values.len(),
                spec.param_count()
            )));
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::Contract("parameter vector contains non-finite entries".into()));
        }
        Ok(Self(values))
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn as_mut_slice(&mut self) -> &mut [f64] {
        &mut self.0
    }

    pub fn into_vec(self) -> Vec<f64> {
        self.0
    }

    /// ‖θ‖²
    pub fn norm_squared(&self) -> f64 {
        self.0.iter().map(|v| v * v).sum()
    }

    pub fn to_bytes(&self, spec: &MlpSpec) -> Vec<u8> {
        let dims = spec.dims();
        let mut out = Vec::with_capacity(4 * (dims.len() + 1) + 8 * self.0.len());
        out.extend_from_slice(&(dims.len() as u32).to_le_bytes());
        for d in dims {
            out.extend_from_slice(&(d as u32).to_le_bytes());
        }
        for v in &self.0 {
            out.extend_from_slice(&v.to_le_bytes());
        }
        out
    }

    /// Inverse of [`ParamVector::to_bytes`]. Trailing bytes are rejected.
    pub fn from_bytes(bytes: &[u8]) -> Result<(MlpSpec, Self)> {
        let mut cursor = bytes;
        let mut take = |n: usize| -> Result<&[u8]> {
            if cursor.len() < n {
                return Err(Error::Format("truncated network data".into()));
            }
            let (head, rest) = cursor.split_at(n);
            cursor = rest;
            Ok(head)
        };
        let read_u32 = |b: &[u8]| u32::from_le_bytes(b.try_into().expect("4 bytes")) as usize;
        let count = read_u32(take(4)?);
        if count < 2 {
            return Err(Error::Format(format!("need at least 2 layer widths, found {count}")));
        }
        let mut dims = Vec::with_capacity(count);
        for _ in 0..count {
            dims.push(read_u32(take(4)?));
        }
        let spec = MlpSpec::new(dims[0], dims[1..count - 1].to_vec(), dims[count - 1])
            .map_err(|e| Error::Format(e.to_string()))?;
        let mut values = Vec::with_capacity(spec.param_count());
        for _ in 0..spec.param_count() {
            values.push(f64::from_le_bytes(take(8)?.try_into().expect("8 bytes")));
        }
        if !cursor.is_empty() {
            return Err(Error::Format(format!("{} trailing bytes after network data", cursor.len())));
        }
        let params = Self::from_vec(&spec, values).map_err(|e| Error::Format(e.to_string()))?;
        Ok((spec, params))
    }
}

/// Uniform double in [0, 1) from the top 53 bits.
fn unit_f64(rng: &mut ChaCha8Rng) -> f64 {
    (rng.next_u64() >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
}

/// Deterministic initialization; see the module docs for the scheme.
pub fn init_params(spec: &MlpSpec, seed: u64) -> ParamVector {
    let mut values = vec![0.0; spec.param_count()];
    let layers = spec.layers();
    let offsets = spec.offsets();
    for (index, (&(fan_in, fan_out), &offset)) in layers.iter().zip(&offsets).enumerate() {
        if index + 1 == layers.len() {
            break;
        }
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream(index as u64);
        let bound = (6.0 / (fan_in + fan_out) as f64).sqrt();
        for w in &mut values[offset..offset + fan_in * fan_out] {
            *w = bound * (2.0 * unit_f64(&mut rng) - 1.0);
        }
    }
    ParamVector(values)
}

/// Adds independent uniform noise in `[-amplitude, amplitude]` to every
/// parameter, drawn from a ChaCha8 stream seeded with `seed`. Used to move
/// a freshly initialized network away from the zero-output start.
pub fn jitter(params: &mut ParamVector, amplitude: f64, seed: u64) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    for w in &mut params.0 {
        *w += amplitude * (2.0 * unit_f64(&mut rng) - 1.0);
    }
}

/// Pre-activation and activation values recorded during a forward pass.
pub(crate) struct Trace {
    // activations[0] is the input; activations[l + 1] the output of layer l.
    activations: Vec<Vec<f64>>,
}

impl Trace {
    pub(crate) fn output(&self) -> &[f64] {
        self.activations.last().expect("trace has an output layer")
    }
}

fn check_input(spec: &MlpSpec, params: &ParamVector, input: &[f64]) -> Result<()> {
    if params.len() != spec.param_count() {
        return Err(Error::Contract(format!(
            "parameter vector has {} entries, network needs {}",
            params.len(),
            spec.param_count()
        )));
    }
    if input.len() != spec.input_dim {
        return Err(Error::Contract(format!(
            "input has {} features, network expects {}",
            input.len(),
            spec.input_dim
        )));
    }
    if input.iter().any(|v| !v.is_finite()) {
        return Err(Error::Contract("non-finite network input".into()));
    }
    Ok(())
}

pub(crate) fn forward_trace(spec: &MlpSpec, params: &ParamVector, input: &[f64]) -> Result<Trace> {
    check_input(spec, params, input)?;
    let theta = params.as_slice();
    let layers = spec.layers();
    let mut activations = Vec::with_capacity(layers.len() + 1);
    activations.push(input.to_vec());
    let mut offset = 0;
    for (index, &(fan_in, fan_out)) in layers.iter().enumerate() {
        let x = &activations[index];
        let weights = &theta[offset..offset + fan_in * fan_out];
        let biases = &theta[offset + fan_in * fan_out..offset + fan_in * fan_out + fan_out];
        let last = index + 1 == layers.len();
        let y: Vec<f64> = weights
            .chunks_exact(fan_in)
            .zip(biases)
            .map(|(row, b)| {
                let z = row.iter().zip(x).map(|(w, xi)| w * xi).sum::<f64>() + b;
                if last {
                    z
                } else {
                    z.tanh()
                }
            })
            .collect();
        activations.push(y);
        offset += fan_in * fan_out + fan_out;
    }
    Ok(Trace { activations })
}

/// Back-propagates `cotangent` through a recorded pass. Adds
/// `cotangentᵀ·∂out/∂θ` into `grad_params` and returns `cotangentᵀ·∂out/∂x`.
pub(crate) fn backward_accumulate(
    spec: &MlpSpec,
    params: &ParamVector,
    trace: &Trace,
    cotangent: &[f64],
    grad_params: &mut [f64],
) -> Vec<f64> {
    let theta = params.as_slice();
    let layers = spec.layers();
    let offsets = spec.offsets();
    let mut delta = cotangent.to_vec();
    for index in (0..layers.len()).rev() {
        let (fan_in, fan_out) = layers[index];
        let offset = offsets[index];
        let x = &trace.activations[index];
        // Through the tanh of this layer (the output layer is linear).
        if index + 1 != layers.len() {
            let y = &trace.activations[index + 1];
            for (dj, yj) in delta.iter_mut().zip(y) {
                *dj *= 1.0 - yj * yj;
            }
        }
        let weights = &theta[offset..offset + fan_in * fan_out];
        let (grad_w, grad_b) = grad_params[offset..offset + fan_in * fan_out + fan_out].split_at_mut(fan_in * fan_out);
        let mut upstream = vec![0.0; fan_in];
        for (o, &dz) in delta.iter().enumerate() {
            grad_b[o] += dz;
            if dz == 0.0 {
                continue;
            }
            let row = &weights[o * fan_in..(o + 1) * fan_in];
            let grow = &mut grad_w[o * fan_in..(o + 1) * fan_in];
            for i in 0..fan_in {
                grow[i] += dz * x[i];
                upstream[i] += dz * row[i];
            }
        }
        delta = upstream;
    }
    delta
}

/// Network output for one feature vector.
pub fn forward(spec: &MlpSpec, params: &ParamVector, input: &[f64]) -> Result<Vec<f64>> {
    Ok(forward_trace(spec, params, input)?.output().to_vec())
}

/// Vector-Jacobian product: gradients of `cotangentᵀ·forward(input)` with
/// respect to the input and to the parameters.
pub fn vjp(
    spec: &MlpSpec,
    params: &ParamVector,
    input: &[f64],
    cotangent: &[f64],
) -> Result<(Vec<f64>, ParamVector)> {
    if cotangent.len() != spec.output_dim {
        return Err(Error::Contract(format!(
            "cotangent has {} entries, network has {} outputs",
            cotangent.len(),
            spec.output_dim
        )));
    }
    let trace = forward_trace(spec, params, input)?;
    let mut grad = vec![0.0; spec.param_count()];
    let grad_input = backward_accumulate(spec, params, &trace, cotangent, &mut grad);
    Ok((grad_input, ParamVector(grad)))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn small_spec() -> MlpSpec {
        MlpSpec::new(3, vec![4, 5], 2).unwrap()
    }

    /// Every parameter drawn uniformly, so all paths are exercised.
    fn dense_params(spec: &MlpSpec, seed: u64) -> ParamVector {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        ParamVector((0..spec.param_count()).map(|_| unit_f64(&mut rng) - 0.5).collect())
    }

    /// Straightforward matrix-vector reimplementation used as an oracle.
    fn naive_forward(spec: &MlpSpec, theta: &[f64], input: &[f64]) -> Vec<f64> {
        let mut x = input.to_vec();
        let mut offset = 0;
        let layers = spec.layers();
        for (l, (fi, fo)) in layers.iter().enumerate() {
            let mut y = vec![0.0; *fo];
            for o in 0..*fo {
                let mut z = 0.0;
                for i in 0..*fi {
                    z += theta[offset + o * fi + i] * x[i];
                }
                z += theta[offset + fi * fo + o];
                y[o] = if l + 1 < layers.len() { z.tanh() } else { z };
            }
            offset += fi * fo + fo;
            x = y;
        }
        x
    }

    #[test]
    fn layout_and_counts() {
        let spec = MlpSpec::rate_network(0);
        assert_eq!(spec.dims(), vec![5, 32, 32, 3]);
        assert_eq!(spec.param_count(), 5 * 32 + 32 + 32 * 32 + 32 + 32 * 3 + 3);
        assert!(MlpSpec::new(0, vec![3], 1).is_err());
    }

    #[test]
    fn init_is_deterministic_and_zero_at_output() {
        let spec = MlpSpec::rate_network(0);
        let a = init_params(&spec, 7);
        let b = init_params(&spec, 7);
        assert_eq!(a.to_bytes(&spec), b.to_bytes(&spec));
        assert_ne!(a, init_params(&spec, 8));
        let out = forward(&spec, &a, &[0.3, 0.2, 0.1, 0.05, 0.65]).unwrap();
        assert_eq!(out, vec![0.0; 3]);
    }

    #[test]
    fn init_byte_fixture() {
        // Frozen output of ChaCha8 (seed_from_u64(42), stream 0) through the
        // Glorot bound for a 2→2→1 network.
        let spec = MlpSpec::new(2, vec![2], 1).unwrap();
        let p = init_params(&spec, 42);
        let bits: Vec<u64> = p.as_slice()[..4].iter().map(|v| v.to_bits()).collect();
        assert_eq!(bits, INIT_FIXTURE_BITS);
        assert!(p.as_slice()[4..].iter().all(|&v| v == 0.0));
    }

    const INIT_FIXTURE_BITS: [u64; 4] = [4601697986646463718, 4607646041829975828, 13818936891791500571, 4599291541021843287];

    #[test]
    fn init_hidden_weights_have_zero_mean() {
        let spec = MlpSpec::new(200, vec![500], 1).unwrap();
        let p = init_params(&spec, 3);
        let hidden = &p.as_slice()[..200 * 500];
        let mean = hidden.iter().sum::<f64>() / hidden.len() as f64;
        assert!(mean.abs() < 0.01, "{mean}");
        let bound = (6.0f64 / 700.0).sqrt();
        assert!(hidden.iter().all(|w| w.abs() <= bound));
    }

    #[test]
    fn affine_identity() {
        let spec = MlpSpec::new(1, vec![], 1).unwrap();
        let p = ParamVector::from_vec(&spec, vec![2.5, -0.75]).unwrap();
        assert_eq!(forward(&spec, &p, &[4.0]).unwrap(), vec![2.5 * 4.0 - 0.75]);
        let (gx, gp) = vjp(&spec, &p, &[4.0], &[3.0]).unwrap();
        assert_eq!(gx, vec![3.0 * 2.5]);
        assert_eq!(gp.as_slice(), &[3.0 * 4.0, 3.0]);
    }

    #[test]
    fn matches_naive_oracle() {
        let spec = small_spec();
        for seed in 0..20 {
            let p = dense_params(&spec, seed);
            let x = [0.3, -1.2, 0.7 + seed as f64 * 0.01];
            let got = forward(&spec, &p, &x).unwrap();
            let want = naive_forward(&spec, p.as_slice(), &x);
            for (g, w) in got.iter().zip(&want) {
                assert!((g - w).abs() <= 1e-14 * w.abs().max(1e-300), "{g} vs {w}");
            }
        }
    }

    #[test]
    fn zero_cotangent_gives_zero_gradients() {
        let spec = small_spec();
        let p = dense_params(&spec, 1);
        let (gx, gp) = vjp(&spec, &p, &[0.1, 0.2, 0.3], &[0.0, 0.0]).unwrap();
        assert!(gx.iter().all(|&v| v == 0.0));
        assert!(gp.as_slice().iter().all(|&v| v == 0.0));
    }

    #[test]
    fn vjp_matches_finite_differences() {
        let spec = small_spec();
        let p = dense_params(&spec, 11);
        let x = [0.4, -0.3, 0.9];
        let c = [0.7, -1.3];
        let objective = |theta: &[f64], input: &[f64]| -> f64 {
            naive_forward(&spec, theta, input).iter().zip(&c).map(|(o, ci)| o * ci).sum()
        };
        let (gx, gp) = vjp(&spec, &p, &x, &c).unwrap();
        let h = 1e-6;
        let rel = |a: f64, b: f64| (a - b).abs() / a.abs().max(b.abs()).max(1e-6);
        for i in 0..x.len() {
            let (mut up, mut dn) = (x, x);
            up[i] += h;
            dn[i] -= h;
            let fd = (objective(p.as_slice(), &up) - objective(p.as_slice(), &dn)) / (2.0 * h);
            assert!(rel(gx[i], fd) < 1e-6, "input {i}: {} vs {fd}", gx[i]);
        }
        for j in 0..p.len() {
            let mut up = p.as_slice().to_vec();
            let mut dn = up.clone();
            up[j] += h;
            dn[j] -= h;
            let fd = (objective(&up, &x) - objective(&dn, &x)) / (2.0 * h);
            assert!(rel(gp.as_slice()[j], fd) < 1e-6, "param {j}: {} vs {fd}", gp.as_slice()[j]);
        }
    }

    #[test]
    fn vjp_is_linear_in_cotangent() {
        let spec = small_spec();
        let p = dense_params(&spec, 5);
        let x = [0.2, 0.1, -0.4];
        let (ga, pa) = vjp(&spec, &p, &x, &[1.0, 0.5]).unwrap();
        let (gb, pb) = vjp(&spec, &p, &x, &[-0.3, 2.0]).unwrap();
        let (gs, ps) = vjp(&spec, &p, &x, &[0.7, 2.5]).unwrap();
        for i in 0..3 {
            assert!((ga[i] + gb[i] - gs[i]).abs() < 1e-14);
        }
        for j in 0..p.len() {
            assert!((pa.as_slice()[j] + pb.as_slice()[j] - ps.as_slice()[j]).abs() < 1e-14);
        }
    }

    #[test]
    fn input_gradient_bounded_by_weight_norms() {
        let spec = small_spec();
        let p = dense_params(&spec, 9);
        // Product of layer Frobenius norms bounds the Jacobian (tanh' <= 1).
        let mut bound = 1.0;
        let mut offset = 0;
        for (fi, fo) in spec.layers() {
            let w = &p.as_slice()[offset..offset + fi * fo];
            bound *= w.iter().map(|v| v * v).sum::<f64>().sqrt();
            offset += fi * fo + fo;
        }
        for k in 0..50 {
            let x = [k as f64 * 0.1 - 2.5, 0.3, -0.2];
            for out in 0..2 {
                let mut c = [0.0, 0.0];
                c[out] = 1.0;
                let (gx, _) = vjp(&spec, &p, &x, &c).unwrap();
                let norm = gx.iter().map(|v| v * v).sum::<f64>().sqrt();
                assert!(norm <= bound + 1e-12);
            }
        }
    }

    #[test]
    fn contract_errors() {
        let spec = small_spec();
        let p = ParamVector::zeros(&spec);
        assert!(forward(&spec, &p, &[1.0, 2.0]).is_err());
        assert!(forward(&spec, &p, &[1.0, f64::NAN, 0.0]).is_err());
        assert!(vjp(&spec, &p, &[1.0, 2.0, 3.0], &[1.0]).is_err());
        assert!(ParamVector::from_vec(&spec, vec![0.0; 3]).is_err());
    }

    #[test]
    fn jitter_is_seeded_and_bounded() {
        let spec = small_spec();
        let mut a = ParamVector::zeros(&spec);
        let mut b = ParamVector::zeros(&spec);
        jitter(&mut a, 0.2, 9);
        jitter(&mut b, 0.2, 9);
        assert_eq!(a, b);
        assert!(a.as_slice().iter().all(|w| w.abs() <= 0.2));
        assert!(a.as_slice().iter().any(|&w| w != 0.0));
    }

    #[test]
    fn byte_layout() {
        let spec = MlpSpec::new(1, vec![], 1).unwrap();
        let p = ParamVector::from_vec(&spec, vec![1.0, -2.0]).unwrap();
        let bytes = p.to_bytes(&spec);
        let mut expected = Vec::new();
        for v in [2u32, 1, 1] {
            expected.extend_from_slice(&v.to_le_bytes());
        }
        expected.extend_from_slice(&1.0f64.to_le_bytes());
        expected.extend_from_slice(&(-2.0f64).to_le_bytes());
        assert_eq!(bytes, expected);
        assert!(ParamVector::from_bytes(&bytes[..bytes.len() - 1]).is_err());
        let mut long = bytes.clone();
        long.push(0);
        assert!(ParamVector::from_bytes(&long).is_err());
    }

    proptest::proptest! {
        #[test]
        fn bytes_round_trip(seed in 0u64..1000, hidden in proptest::collection::vec(1usize..6, 0..3)) {
            let spec = MlpSpec::new(4, hidden, 2).unwrap();
            let p = dense_params(&spec, seed);
            let (spec2, p2) = ParamVector::from_bytes(&p.to_bytes(&spec)).unwrap();
            proptest::prop_assert_eq!(spec2, spec);
            proptest::prop_assert_eq!(p2, p);
        }
    }
}
