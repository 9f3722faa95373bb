//! Minimal dense layers with hand-written backward passes.

use rand::Rng;

#[derive(Debug, Clone, PartialEq)]
pub(crate) struct Dense {
    pub inputs: usize,
    pub outputs: usize,
    /// `outputs × inputs`, row-major.
    pub weight: Vec<f64>,
    pub bias: Vec<f64>,
}

impl Dense {
    /// Uniform(−1/√fan_in, 1/√fan_in) initialization for weights and biases.
    pub fn init<R: Rng>(inputs: usize, outputs: usize, rng: &mut R) -> Self {
        let bound = 1.0 / (inputs as f64).sqrt();
        let weight = (0..inputs * outputs)
            .map(|_| rng.random_range(-bound..bound))
            .collect();
        let bias = (0..outputs)
            .map(|_| rng.random_range(-bound..bound))
            .collect();
        Self {
            inputs,
            outputs,
            weight,
            bias,
        }
    }

    pub fn from_parts(
        inputs: usize,
        outputs: usize,
        weight: Vec<f64>,
        bias: Vec<f64>,
    ) -> Option<Self> {
        (weight.len() == inputs * outputs && bias.len() == outputs).then_some(Self {
            inputs,
            outputs,
            weight,
            bias,
        })
    }

    pub fn param_count(&self) -> usize {
        self.weight.len() + self.bias.len()
    }

    pub fn forward(&self, x: &[f64]) -> Vec<f64> {
        debug_assert_eq!(x.len(), self.inputs);
        self.weight
            .chunks_exact(self.inputs)
            .zip(&self.bias)
            .map(|(row, b)| b + row.iter().zip(x).map(|(w, v)| w * v).sum::<f64>())
            .collect()
    }

    /// Accumulates parameter gradients into `grad` (weights then biases)
    /// and returns the gradient with respect to the input.
    pub fn backward(&self, x: &[f64], d_out: &[f64], grad: &mut [f64]) -> Vec<f64> {
        let (gw, gb) = grad.split_at_mut(self.weight.len());
        let mut d_in = vec![0.0; self.inputs];
        for (o, &g) in d_out.iter().enumerate() {
            if g == 0.0 {
                continue;
            }
            gb[o] += g;
            let row = &self.weight[o * self.inputs..(o + 1) * self.inputs];
            let grow = &mut gw[o * self.inputs..(o + 1) * self.inputs];
            for i in 0..self.inputs {
                grow[i] += g * x[i];
                d_in[i] += g * row[i];
            }
        }
        d_in
    }

    pub fn write_params(&self, out: &mut Vec<f64>) {
        out.extend_from_slice(&self.weight);
        out.extend_from_slice(&self.bias);
    }

    /// Reads parameters in [`Dense::write_params`] order; returns the rest.
    pub fn read_params<'a>(&mut self, src: &'a [f64]) -> &'a [f64] {
        let (w, rest) = src.split_at(self.weight.len());
        let (b, rest) = rest.split_at(self.bias.len());
        self.weight.copy_from_slice(w);
        self.bias.copy_from_slice(b);
        rest
    }
}

#[inline]
pub(crate) fn sigmoid(x: f64) -> f64 {
    1.0 / (1.0 + (-x).exp())
}

#[inline]
pub(crate) fn silu(x: f64) -> f64 {
    x * sigmoid(x)
}

#[inline]
pub(crate) fn silu_grad(x: f64) -> f64 {
    let s = sigmoid(x);
    s * (1.0 + x * (1.0 - s))
}
