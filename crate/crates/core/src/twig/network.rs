//! The three-block simulator network with hand-written backpropagation.
//!
//! A structure branch and a hyperparameter branch run independently; their
//! outputs are concatenated into an integration block whose single output
//! passes through a sigmoid. Hidden layers use leaky ReLU.

use rand::Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::kge::loss::sigmoid;
use crate::twig::encode::{EncodedInput, HYPER_DIM, STRUCT_DIM};

const LEAKY_SLOPE: f64 = 0.01;

/// Layer widths of each block, input width first.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Architecture {
    pub structure: Vec<usize>,
    pub hyper: Vec<usize>,
    pub integration: Vec<usize>,
}

impl Default for Architecture {
    fn default() -> Self {
        Architecture {
            structure: vec![STRUCT_DIM, 16, 8],
            hyper: vec![HYPER_DIM, 8, 6],
            integration: vec![14, 8, 1],
        }
    }
}

impl Architecture {
    pub fn validate(&self) -> Result<(), String> {
        let ends = |v: &[usize]| (v.first().copied(), v.last().copied());
        if ends(&self.structure).0 != Some(STRUCT_DIM) || self.structure.len() < 2 {
            return Err(format!("structure block must start at {STRUCT_DIM} inputs"));
        }
        if ends(&self.hyper).0 != Some(HYPER_DIM) || self.hyper.len() < 2 {
            return Err(format!("hyperparameter block must start at {HYPER_DIM} inputs"));
        }
        let joined = self.structure[self.structure.len() - 1] + self.hyper[self.hyper.len() - 1];
        if ends(&self.integration) != (Some(joined), Some(1)) || self.integration.len() < 2 {
            return Err(format!("integration block must map {joined} inputs to 1 output"));
        }
        if self
            .structure
            .iter()
            .chain(&self.hyper)
            .chain(&self.integration)
            .any(|&w| w == 0)
        {
            return Err("layer widths must be positive".into());
        }
        Ok(())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
struct Layer {
    inputs: usize,
    outputs: usize,
    /// Weights `outputs x inputs` row-major, then `outputs` biases.
    offset: usize,
}

impl Layer {
    fn size(&self) -> usize {
        self.outputs * (self.inputs + 1)
    }
}

fn block_layers(widths: &[usize], offset: &mut usize) -> Vec<Layer> {
    widths
        .windows(2)
        .map(|w| {
            let layer = Layer {
                inputs: w[0],
                outputs: w[1],
                offset: *offset,
            };
            *offset += layer.size();
            layer
        })
        .collect()
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(from = "NetRepr", into = "NetRepr")]
pub struct TwigNet {
    arch: Architecture,
    params: Vec<f64>,
    structure: Vec<Layer>,
    hyper: Vec<Layer>,
    integration: Vec<Layer>,
}

#[derive(Serialize, Deserialize)]
struct NetRepr {
    architecture: Architecture,
    params: Vec<f64>,
}

impl From<NetRepr> for TwigNet {
    fn from(r: NetRepr) -> Self {
        let mut net = TwigNet::zeros(r.architecture);
        net.params = r.params;
        net
    }
}

impl From<TwigNet> for NetRepr {
    fn from(n: TwigNet) -> Self {
        NetRepr {
            architecture: n.arch,
            params: n.params,
        }
    }
}

/// Activations of one forward pass, kept for backpropagation.
#[derive(Clone, Debug, Default)]
pub struct Trace {
    structure: Vec<Vec<f64>>,
    hyper: Vec<Vec<f64>>,
    integration: Vec<Vec<f64>>,
    output: f64,
}

impl Trace {
    pub fn output(&self) -> f64 {
        self.output
    }
}

impl TwigNet {
    pub fn zeros(arch: Architecture) -> Self {
        let mut offset = 0;
        let structure = block_layers(&arch.structure, &mut offset);
        let hyper = block_layers(&arch.hyper, &mut offset);
        let integration = block_layers(&arch.integration, &mut offset);
        TwigNet {
            arch,
            params: vec![0.0; offset],
            structure,
            hyper,
            integration,
        }
    }

    /// He-normal weights, zero biases.
    pub fn random<R: Rng + ?Sized>(arch: Architecture, rng: &mut R) -> Self {
        let mut net = Self::zeros(arch);
        let layers: Vec<Layer> = net.layers().copied().collect();
        for layer in layers {
            let normal = Normal::new(0.0, (2.0 / layer.inputs as f64).sqrt()).expect("valid std");
            let n = layer.inputs * layer.outputs;
            for w in &mut net.params[layer.offset..layer.offset + n] {
                *w = normal.sample(rng);
            }
        }
        net
    }

    fn layers(&self) -> impl Iterator<Item = &Layer> {
        self.structure.iter().chain(&self.hyper).chain(&self.integration)
    }

    pub fn architecture(&self) -> &Architecture {
        &self.arch
    }

    pub fn params(&self) -> &[f64] {
        &self.params
    }

    pub fn params_mut(&mut self) -> &mut [f64] {
        &mut self.params
    }

    pub fn forward(&self, input: &EncodedInput) -> f64 {
        let mut trace = Trace::default();
        self.forward_traced(input, &mut trace);
        trace.output
    }

    pub fn forward_traced(&self, input: &EncodedInput, trace: &mut Trace) -> f64 {
        run_block(
            &self.params,
            &self.structure,
            &input.structure,
            false,
            &mut trace.structure,
        );
        run_block(&self.params, &self.hyper, &input.hyper, false, &mut trace.hyper);
        let mut joined = trace.structure.last().cloned().unwrap_or_default();
        joined.extend_from_slice(trace.hyper.last().map_or(&[][..], Vec::as_slice));
        run_block(&self.params, &self.integration, &joined, true, &mut trace.integration);
        trace.output = trace.integration.last().map_or(0.5, |v| v[0]);
        trace.output
    }

    /// Adds `d_output * d output / d params` into `grad`.
    pub fn backward(&self, trace: &Trace, d_output: f64, grad: &mut [f64]) {
        let d_joined = back_block(
            &self.params,
            &self.integration,
            &trace.integration,
            true,
            &[d_output],
            grad,
        );
        let split = self.arch.structure[self.arch.structure.len() - 1];
        back_block(
            &self.params,
            &self.structure,
            &trace.structure,
            false,
            &d_joined[..split],
            grad,
        );
        back_block(&self.params, &self.hyper, &trace.hyper, false, &d_joined[split..], grad);
    }
}

/// `acts[0]` is the block input; `acts[i+1]` is the output of layer `i`.
fn run_block(params: &[f64], layers: &[Layer], input: &[f64], sigmoid_last: bool, acts: &mut Vec<Vec<f64>>) {
    acts.clear();
    acts.push(input.to_vec());
    for (li, layer) in layers.iter().enumerate() {
        let x = &acts[li];
        let w = &params[layer.offset..layer.offset + layer.inputs * layer.outputs];
        let b = &params[layer.offset + layer.inputs * layer.outputs..layer.offset + layer.size()];
        let last = li + 1 == layers.len();
        let y: Vec<f64> = (0..layer.outputs)
            .map(|o| {
                let row = &w[o * layer.inputs..(o + 1) * layer.inputs];
                let z = b[o] + row.iter().zip(x).map(|(a, b)| a * b).sum::<f64>();
                if last && sigmoid_last {
                    sigmoid(z)
                } else if z > 0.0 {
                    z
                } else {
                    LEAKY_SLOPE * z
                }
            })
            .collect();
        acts.push(y);
    }
}

/// Returns the gradient with respect to the block input.
fn back_block(
    params: &[f64],
    layers: &[Layer],
    acts: &[Vec<f64>],
    sigmoid_last: bool,
    d_out: &[f64],
    grad: &mut [f64],
) -> Vec<f64> {
    let mut delta = d_out.to_vec();
    for (li, layer) in layers.iter().enumerate().rev() {
        let y = &acts[li + 1];
        let x = &acts[li];
        let last = li + 1 == layers.len();
        // through the activation; leaky ReLU's sign is recoverable from its output
        for (d, &yo) in delta.iter_mut().zip(y) {
            *d *= if last && sigmoid_last {
                yo * (1.0 - yo)
            } else if yo > 0.0 {
                1.0
            } else {
                LEAKY_SLOPE
            };
        }
        let nw = layer.inputs * layer.outputs;
        let mut d_in = vec![0.0; layer.inputs];
        for (o, &d) in delta.iter().enumerate() {
            grad[layer.offset + nw + o] += d;
            let row = layer.offset + o * layer.inputs;
            for i in 0..layer.inputs {
                grad[row + i] += d * x[i];
                d_in[i] += d * params[row + i];
            }
        }
        delta = d_in;
    }
    delta
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn random_input<R: Rng>(rng: &mut R) -> EncodedInput {
        let mut input = EncodedInput {
            hyper: [0.0; HYPER_DIM],
            structure: [0.0; STRUCT_DIM],
        };
        for v in input.hyper.iter_mut().chain(input.structure.iter_mut()) {
            *v = rng.random_range(-3.0..3.0);
        }
        input
    }

    #[test]
    fn default_layout() {
        let net = TwigNet::zeros(Architecture::default());
        assert!(Architecture::default().validate().is_ok());
        let expected = 16 * 24 + 8 * 17 + 8 * 13 + 6 * 9 + 8 * 15 + 9;
        assert_eq!(net.params().len(), expected);
    }

    #[test]
    fn zero_network_outputs_one_half() {
        let net = TwigNet::zeros(Architecture::default());
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        for _ in 0..10 {
            assert_eq!(net.forward(&random_input(&mut rng)), 0.5);
        }
    }

    #[test]
    fn output_is_inside_unit_interval() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let net = TwigNet::random(Architecture::default(), &mut rng);
        for _ in 0..10_000 {
            let y = net.forward(&random_input(&mut rng));
            assert!(y > 0.0 && y < 1.0);
        }
    }

    #[test]
    fn backward_matches_finite_differences() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let mut net = TwigNet::random(Architecture::default(), &mut rng);
        let input = random_input(&mut rng);
        let mut trace = Trace::default();
        net.forward_traced(&input, &mut trace);
        let mut grad = vec![0.0; net.params().len()];
        net.backward(&trace, 1.0, &mut grad);
        let h = 1e-6;
        for (i, &analytic) in grad.iter().enumerate() {
            let orig = net.params()[i];
            net.params_mut()[i] = orig + h;
            let up = net.forward(&input);
            net.params_mut()[i] = orig - h;
            let down = net.forward(&input);
            net.params_mut()[i] = orig;
            let fd = (up - down) / (2.0 * h);
            let err = (fd - analytic).abs() / fd.abs().max(analytic.abs()).max(1e-6);
            assert!(err < 1e-4, "param {i}: analytic {analytic} vs fd {fd}");
        }
    }

    #[test]
    fn serde_round_trip() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let net = TwigNet::random(Architecture::default(), &mut rng);
        let json = serde_json::to_string(&net).unwrap();
        let back: TwigNet = serde_json::from_str(&json).unwrap();
        assert_eq!(back, net);
    }
}
