//! Untrained hourglass autoencoder mapping a hologram to a complex object.
//!
//! Default layout for a 1 x H x W input (k = 3, leaky-ReLU slope 0.1):
//!
//! | stage     | op                                | channels  | spatial |
//! |-----------|-----------------------------------|-----------|---------|
//! | encoder 1 | conv k x k, stride 2              | 1 -> 16   | H/2     |
//! | encoder 2 | conv k x k, stride 2              | 16 -> 32  | H/4     |
//! | encoder 3 | conv k x k, stride 2              | 32 -> 64  | H/8     |
//! | encoder 4 | conv k x k, stride 2              | 64 -> 128 | H/16    |
//! | decoder 1 | nearest x2, conv k x k            | 128 -> 64 | H/8     |
//! | decoder 2 | nearest x2, conv k x k            | 64 -> 32  | H/4     |
//! | decoder 3 | nearest x2, conv k x k            | 32 -> 16  | H/2     |
//! | decoder 4 | nearest x2, conv k x k            | 16 -> 16  | H       |
//! | head      | conv 1 x 1, no activation         | 16 -> 2   | H       |
//!
//! That is 196 386 parameters. The two output channels are the real and
//! imaginary parts of the object-plane field.
//!
//! Strided stages round odd sizes up (`ceil(n / 2)`), and each decoder stage
//! crops its upsampled input back to the size of the mirrored encoder level,
//! so any grid at least `2^depth` pixels wide is accepted.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Uniform};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::tensor::{Conv2dOptions, Real, Tape, Tensor, Var};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AutoencoderSpec {
    pub height: usize,
    pub width: usize,
    pub input_channels: usize,
    /// Output widths of the encoder stages; the decoder mirrors them.
    pub encoder_channels: Vec<usize>,
    pub kernel_size: usize,
    pub leaky_slope: f64,
    pub output_channels: usize,
}

impl AutoencoderSpec {
    pub fn desk(height: usize, width: usize) -> Self {
        AutoencoderSpec {
            height,
            width,
            input_channels: 1,
            encoder_channels: vec![16, 32, 64, 128],
            kernel_size: 3,
            leaky_slope: 0.1,
            output_channels: 2,
        }
    }

    pub fn depth(&self) -> usize {
        self.encoder_channels.len()
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::InvalidArgument(format!("autoencoder spec: {msg}")));
        if self.encoder_channels.is_empty() {
            return bad("needs at least one encoder stage".into());
        }
        if self.encoder_channels.contains(&0) || self.input_channels == 0 {
            return bad("channel widths must be positive".into());
        }
        if self.output_channels != 2 {
            return bad(format!("output must have 2 (real, imag) channels, got {}", self.output_channels));
        }
        if self.kernel_size == 0 || self.kernel_size.is_multiple_of(2) {
            return bad(format!("kernel size must be odd, got {}", self.kernel_size));
        }
        let factor = 1usize << self.depth();
        if self.height < factor || self.width < factor {
            return bad(format!(
                "{}x{} input is too small for {} downsampling stages",
                self.height,
                self.width,
                self.depth()
            ));
        }
        if !(self.leaky_slope >= 0.0 && self.leaky_slope < 1.0) {
            return bad(format!("leaky slope must lie in [0, 1), got {}", self.leaky_slope));
        }
        Ok(())
    }

    fn layers(&self) -> Vec<Layer> {
        let k = self.kernel_size;
        let mut layers = Vec::new();
        let mut c_in = self.input_channels;
        for &c_out in &self.encoder_channels {
            layers.push(Layer { c_in, c_out, kernel: k, stride: 2, upsample: false, activation: true });
            c_in = c_out;
        }
        for i in (0..self.depth()).rev() {
            let c_out = self.encoder_channels[i.saturating_sub(1)];
            layers.push(Layer { c_in, c_out, kernel: k, stride: 1, upsample: true, activation: true });
            c_in = c_out;
        }
        layers.push(Layer { c_in, c_out: self.output_channels, kernel: 1, stride: 1, upsample: false, activation: false });
        layers
    }

    /// Spatial size after each encoder stage, starting with the input size.
    pub fn level_sizes(&self) -> Vec<(usize, usize)> {
        let mut sizes = vec![(self.height, self.width)];
        for _ in 0..self.depth() {
            let (h, w) = sizes[sizes.len() - 1];
            sizes.push((h.div_ceil(2), w.div_ceil(2)));
        }
        sizes
    }

    pub fn parameter_count(&self) -> usize {
        self.layers().iter().map(|l| l.c_out * l.c_in * l.kernel * l.kernel + l.c_out).sum()
    }
}

#[derive(Clone, Copy, Debug)]
struct Layer {
    c_in: usize,
    c_out: usize,
    kernel: usize,
    stride: usize,
    upsample: bool,
    activation: bool,
}

impl Layer {
    fn fan_in(&self) -> usize {
        self.c_in * self.kernel * self.kernel
    }
}

/// Parameters `Θ` of the autoencoder, stored as `[weight, bias]` per layer.
#[derive(Clone, Debug)]
pub struct Autoencoder<T: Real> {
    spec: AutoencoderSpec,
    layers: Vec<Layer>,
    params: Vec<Tensor<T>>,
    seed: u64,
}

/// Output of a recorded forward pass.
pub struct ForwardPass {
    /// `[2, H, W]` (real, imag) object estimate.
    pub output: Var,
    /// Tape handles of the parameters, in [`Autoencoder::params`] order.
    pub params: Vec<Var>,
}

impl<T: Real> Autoencoder<T> {
    /// Kaiming-uniform fan-in initialization (`bound = 1/sqrt(fan_in)` for
    /// both weights and biases), deterministic in `seed`.
    pub fn build(spec: AutoencoderSpec, seed: u64) -> Result<Self> {
        spec.validate()?;
        let layers = spec.layers();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut params = Vec::with_capacity(2 * layers.len());
        for layer in &layers {
            let bound = 1.0 / (layer.fan_in() as f64).sqrt();
            let dist = Uniform::new_inclusive(-bound, bound).expect("finite bound");
            let mut sample = |n: usize| -> Vec<T> { (0..n).map(|_| T::lit(dist.sample(&mut rng))).collect() };
            let w = sample(layer.c_out * layer.fan_in());
            let b = sample(layer.c_out);
            params.push(Tensor::new(vec![layer.c_out, layer.c_in, layer.kernel, layer.kernel], w)?);
            params.push(Tensor::new(vec![layer.c_out], b)?);
        }
        Ok(Autoencoder { spec, layers, params, seed })
    }

    pub fn spec(&self) -> &AutoencoderSpec {
        &self.spec
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn params(&self) -> &[Tensor<T>] {
        &self.params
    }

    pub fn params_mut(&mut self) -> &mut [Tensor<T>] {
        &mut self.params
    }

    pub fn parameter_count(&self) -> usize {
        self.params.iter().map(Tensor::numel).sum()
    }

    pub fn input_shape(&self) -> [usize; 3] {
        [self.spec.input_channels, self.spec.height, self.spec.width]
    }

    /// Record `G(input; Θ)` on `tape`, loading the parameters as variables.
    pub fn forward(&self, tape: &mut Tape<T>, input: Var) -> Result<ForwardPass> {
        let params: Vec<Var> = self.params.iter().map(|p| tape.variable(p.clone())).collect();
        let output = self.forward_with(tape, input, &params)?;
        Ok(ForwardPass { output, params })
    }

    /// Forward pass against parameter handles already on the tape.
    pub fn forward_with(&self, tape: &mut Tape<T>, input: Var, params: &[Var]) -> Result<Var> {
        let expected = self.input_shape();
        if tape.shape(input) != expected {
            return Err(Error::ShapeMismatch { op: "autoencoder input", lhs: tape.shape(input).to_vec(), rhs: expected.to_vec() });
        }
        if !tape.value(input).all_finite() {
            return Err(Error::NonFinite("autoencoder input".into()));
        }
        if params.len() != self.params.len() {
            return Err(Error::InvalidArgument(format!("expected {} parameter handles, got {}", self.params.len(), params.len())));
        }
        let slope = T::lit(self.spec.leaky_slope);
        let mut decoder_targets = self.spec.level_sizes();
        decoder_targets.pop();
        let mut x = input;
        for (layer, wb) in self.layers.iter().zip(params.chunks(2)) {
            if layer.upsample {
                x = tape.upsample_nearest(x, 2)?;
                let (h, w) = decoder_targets.pop().expect("one target per decoder stage");
                if tape.shape(x)[1..] != [h, w] {
                    x = tape.crop(x, h, w)?;
                }
            }
            let options = Conv2dOptions { stride: layer.stride, padding: layer.kernel / 2 };
            x = tape.conv2d(x, wb[0], Some(wb[1]), options)?;
            if layer.activation {
                x = tape.leaky_relu(x, slope);
            }
        }
        Ok(x)
    }

    /// Untracked forward evaluation.
    pub fn evaluate(&self, input: &Tensor<T>) -> Result<Tensor<T>> {
        let mut tape = Tape::new();
        let x = tape.constant(input.clone());
        let params: Vec<Var> = self.params.iter().map(|p| tape.constant(p.clone())).collect();
        let out = self.forward_with(&mut tape, x, &params)?;
        Ok(tape.value(out).clone())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn default_parameter_count_matches_table() {
        assert_eq!(AutoencoderSpec::desk(128, 128).parameter_count(), 196_386);
    }

    #[test]
    fn rejects_tiny_grid() {
        let spec = AutoencoderSpec::desk(8, 128);
        assert!(Autoencoder::<f32>::build(spec, 0).is_err());
    }

    #[test]
    fn odd_grid_keeps_its_shape() {
        let spec = AutoencoderSpec { encoder_channels: vec![2, 3, 4], ..AutoencoderSpec::desk(20, 13) };
        assert_eq!(spec.level_sizes(), vec![(20, 13), (10, 7), (5, 4), (3, 2)]);
        let net = Autoencoder::<f64>::build(spec, 4).unwrap();
        let out = net.evaluate(&Tensor::full(vec![1, 20, 13], 0.5)).unwrap();
        assert_eq!(out.shape(), &[2, 20, 13]);
    }

    #[test]
    fn rejects_wrong_output_channels() {
        let spec = AutoencoderSpec { output_channels: 3, ..AutoencoderSpec::desk(16, 16) };
        assert!(spec.validate().is_err());
    }

    #[test]
    fn rejects_non_finite_input() {
        let spec = AutoencoderSpec { encoder_channels: vec![2], ..AutoencoderSpec::desk(4, 4) };
        let net = Autoencoder::<f64>::build(spec, 1).unwrap();
        let mut data = vec![0.5; 16];
        data[3] = f64::NAN;
        let input = Tensor::new(vec![1, 4, 4], data).unwrap();
        assert!(matches!(net.evaluate(&input), Err(Error::NonFinite(_))));
    }
}
