use alloc::format;
use alloc::string::{String, ToString};
use alloc::vec::Vec;

use rand::Rng;

use super::CandidateSet;
use crate::autodiff::{self as ad, he_uniform, Tape, Tensor, Var};
use crate::error::{Error, Result};
use crate::flow::FlowField;

/// Flow channels enter the network divided by this and leave multiplied by it.
pub const FLOW_SCALE: f64 = 4.0;
/// Spatial sizes are padded up to a multiple of this (three stride-2 levels).
pub const PAD_MULTIPLE: usize = 8;
const SLOPE: f64 = 0.1;

/// Optional input groups; the two candidate flows are always present.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(default, deny_unknown_fields))]
pub struct FusionInputConfig {
    pub include_image: bool,
    pub include_brightness_errors: bool,
    pub include_magnitude: bool,
}

impl Default for FusionInputConfig {
    fn default() -> Self {
        Self {
            include_image: true,
            include_brightness_errors: true,
            include_magnitude: false,
        }
    }
}

impl FusionInputConfig {
    /// Number of packed channels for frames with `frame_channels` channels.
    pub fn channels(&self, frame_channels: usize) -> usize {
        4 + if self.include_brightness_errors { 2 } else { 0 }
            + if self.include_image { frame_channels } else { 0 }
            + if self.include_magnitude { 2 } else { 0 }
    }

    /// Channel indices that carry displacements (scaled by [`FLOW_SCALE`]).
    fn flow_channels(&self, frame_channels: usize) -> impl Iterator<Item = usize> {
        let total = self.channels(frame_channels);
        let mag = self.include_magnitude;
        (0..4).chain(if mag { total - 2..total } else { 0..0 })
    }
}

/// Stacks `[current u,v | warped u,v | E_w | E_w^ | I_t channels | |current|, |warped|]`
/// into a `[1, C, H, W]` tensor, omitting disabled groups.
pub fn pack_input(set: &CandidateSet, cfg: &FusionInputConfig) -> Tensor {
    let (w, h) = set.dims();
    let plane = w * h;
    let ch = set.frame.channels();
    let mut data = Vec::with_capacity(cfg.channels(ch) * plane);
    data.extend_from_slice(set.current.u());
    data.extend_from_slice(set.current.v());
    data.extend_from_slice(set.warped.u());
    data.extend_from_slice(set.warped.v());
    if cfg.include_brightness_errors {
        data.extend_from_slice(set.err_current.data());
        data.extend_from_slice(set.err_warped.data());
    }
    if cfg.include_image {
        for c in 0..ch {
            data.extend(set.frame.data().iter().skip(c).step_by(ch));
        }
    }
    if cfg.include_magnitude {
        for f in [&set.current, &set.warped] {
            data.extend(f.u().iter().zip(f.v()).map(|(a, b)| libm::hypot(*a, *b)));
        }
    }
    Tensor::from_vec(&[1, cfg.channels(ch), h, w], data).expect("sized above")
}

#[derive(Debug, Clone, Copy)]
struct Layer {
    name: &'static str,
    inputs: usize,
    outputs: usize,
    kernel: usize,
}

fn layers(c_in: usize) -> [Layer; 7] {
    let l = |name, inputs, outputs, kernel| Layer {
        name,
        inputs,
        outputs,
        kernel,
    };
    [
        l("enc1", c_in, 16, 3),
        l("enc2", 16, 32, 3),
        l("enc3", 32, 64, 3),
        l("dec2", 64 + 32, 32, 3),
        l("dec1", 32 + 16, 16, 3),
        l("dec0", 16 + c_in, 16, 3),
        l("head", 16, 2, 1),
    ]
}

/// Encoder-decoder fusion network.
///
/// Three stride-2 encoder convolutions (16/32/64 channels), a decoder that
/// upsamples and concatenates the matching encoder features (the last skip
/// being the input itself), and a 1x1 head producing `(u, v)`. The head
/// starts at zero, so an untrained network outputs the zero flow.
#[derive(Debug, Clone, PartialEq)]
pub struct FusionNet {
    input: FusionInputConfig,
    frame_channels: usize,
    names: Vec<String>,
    params: Vec<Tensor>,
}

impl FusionNet {
    pub fn new<R: Rng + ?Sized>(input: FusionInputConfig, frame_channels: usize, rng: &mut R) -> Self {
        let c_in = input.channels(frame_channels);
        let mut names = Vec::new();
        let mut params = Vec::new();
        for l in layers(c_in) {
            let shape = [l.outputs, l.inputs, l.kernel, l.kernel];
            let w = if l.name == "head" {
                Tensor::zeros(&shape)
            } else {
                he_uniform(&shape, l.inputs * l.kernel * l.kernel, SLOPE, rng)
            };
            names.push(format!("{}.weight", l.name));
            params.push(w);
            names.push(format!("{}.bias", l.name));
            params.push(Tensor::zeros(&[l.outputs]));
        }
        Self {
            input,
            frame_channels,
            names,
            params,
        }
    }

    /// Rebuilds a network from named tensors, checking names and shapes.
    pub fn from_params(input: FusionInputConfig, frame_channels: usize, named: Vec<(String, Tensor)>) -> Result<Self> {
        let template = Self::new(
            input,
            frame_channels,
            &mut <rand_chacha::ChaCha8Rng as rand::SeedableRng>::seed_from_u64(0),
        );
        if named.len() != template.params.len() {
            return Err(Error::InvalidParameter(format!(
                "expected {} parameter tensors, found {}",
                template.params.len(),
                named.len()
            )));
        }
        let mut params = Vec::with_capacity(named.len());
        for ((name, t), (want, shape)) in named.into_iter().zip(template.names.iter().zip(&template.params)) {
            if &name != want || t.shape() != shape.shape() {
                return Err(Error::InvalidParameter(format!(
                    "parameter `{name}` {:?} does not match `{want}` {:?}",
                    t.shape(),
                    shape.shape()
                )));
            }
            if !t.is_finite() {
                return Err(Error::InvalidParameter(format!("parameter `{name}` is not finite")));
            }
            params.push(t);
        }
        Ok(Self { params, ..template })
    }

    pub fn input_config(&self) -> &FusionInputConfig {
        &self.input
    }

    pub fn frame_channels(&self) -> usize {
        self.frame_channels
    }

    pub fn in_channels(&self) -> usize {
        self.input.channels(self.frame_channels)
    }

    pub fn names(&self) -> &[String] {
        &self.names
    }

    pub fn params(&self) -> &[Tensor] {
        &self.params
    }

    pub fn params_mut(&mut self) -> &mut [Tensor] {
        &mut self.params
    }

    pub fn named_params(&self) -> impl Iterator<Item = (&str, &Tensor)> {
        self.names.iter().map(|s| s.as_str()).zip(&self.params)
    }

    /// Indices of weight tensors (the ones subject to weight decay).
    pub fn weight_indices(&self) -> impl Iterator<Item = usize> + '_ {
        self.names
            .iter()
            .enumerate()
            .filter(|(_, n)| n.ends_with(".weight"))
            .map(|(i, _)| i)
    }

    pub fn num_parameters(&self) -> usize {
        self.params.iter().map(|t| t.len()).sum()
    }

    /// Divides the displacement channels of a packed input by [`FLOW_SCALE`].
    pub fn normalize(&self, input: &mut Tensor) -> Result<()> {
        let [n, c, h, w] = input.dims4("fusion input")?;
        if c != self.in_channels() {
            return Err(Error::ChannelMismatch {
                expected: self.in_channels(),
                found: c,
            });
        }
        let plane = h * w;
        let flows: Vec<usize> = self.input.flow_channels(self.frame_channels).collect();
        let data = input.data_mut();
        for b in 0..n {
            for &k in &flows {
                for v in &mut data[(b * c + k) * plane..][..plane] {
                    *v /= FLOW_SCALE;
                }
            }
        }
        Ok(())
    }

    /// Records the network on `tape` for a normalized input whose sides are
    /// multiples of [`PAD_MULTIPLE`]. `params` are the tape handles of
    /// [`Self::params`], in order.
    pub fn graph(tape: &mut Tape, x: Var, params: &[Var]) -> Result<Var> {
        if params.len() != 14 {
            return Err(Error::InvalidParameter(format!(
                "expected 14 parameter handles, got {}",
                params.len()
            )));
        }
        let conv = |tape: &mut Tape, x: Var, i: usize, stride: usize, act: bool| -> Result<Var> {
            let pad = if i == 6 { 0 } else { 1 };
            let y = ad::conv2d(tape, x, params[2 * i], params[2 * i + 1], stride, pad)?;
            Ok(if act { ad::leaky_relu(tape, y, SLOPE) } else { y })
        };
        let e1 = conv(tape, x, 0, 2, true)?;
        let e2 = conv(tape, e1, 1, 2, true)?;
        let e3 = conv(tape, e2, 2, 2, true)?;
        let up = ad::upsample2x(tape, e3)?;
        let cat = ad::concat_channels(tape, &[up, e2])?;
        let d2 = conv(tape, cat, 3, 1, true)?;
        let up = ad::upsample2x(tape, d2)?;
        let cat = ad::concat_channels(tape, &[up, e1])?;
        let d1 = conv(tape, cat, 4, 1, true)?;
        let up = ad::upsample2x(tape, d1)?;
        let cat = ad::concat_channels(tape, &[up, x])?;
        let d0 = conv(tape, cat, 5, 1, true)?;
        let out = conv(tape, d0, 6, 1, false)?;
        Ok(ad::scale(tape, out, FLOW_SCALE))
    }

    /// Registers the parameters on `tape` and records the network on the
    /// normalized, already padded input `x`. Returns the output and the
    /// parameter handles.
    pub fn record(&self, tape: &mut Tape, x: Var) -> Result<(Var, Vec<Var>)> {
        let [_, c, h, w] = tape.value(x).dims4("fusion input")?;
        if c != self.in_channels() {
            return Err(Error::ChannelMismatch {
                expected: self.in_channels(),
                found: c,
            });
        }
        if h % PAD_MULTIPLE != 0 || w % PAD_MULTIPLE != 0 {
            return Err(Error::Shape {
                op: "fusion net",
                detail: format!("{w}x{h} is not a multiple of {PAD_MULTIPLE}"),
            });
        }
        let vars: Vec<Var> = self.params.iter().map(|p| tape.leaf(p.clone())).collect();
        let out = Self::graph(tape, x, &vars)?;
        Ok((out, vars))
    }

    /// Inference on a raw packed `[n, C, H, W]` input of any size at least 8x8:
    /// normalizes, replicate-pads to a multiple of [`PAD_MULTIPLE`], runs the
    /// network and crops back. Returns `[n, 2, H, W]`.
    pub fn forward(&self, input: &Tensor) -> Result<Tensor> {
        let [_, _, h, w] = input.dims4("fusion input")?;
        if h < PAD_MULTIPLE || w < PAD_MULTIPLE {
            return Err(Error::Shape {
                op: "fusion net",
                detail: format!("input {w}x{h} is smaller than {PAD_MULTIPLE}x{PAD_MULTIPLE}"),
            });
        }
        let mut x = input.clone();
        self.normalize(&mut x)?;
        let padded = pad_replicate(&x, PAD_MULTIPLE)?;
        let mut tape = Tape::new();
        let xv = tape.leaf(padded);
        let (out, _) = self.record(&mut tape, xv)?;
        let out = ad::crop(&mut tape, out, 0, 0, h, w)?;
        Ok(tape.value(out).clone())
    }
}

/// Pads bottom and right by edge replication up to the next multiple.
pub(crate) fn pad_replicate(x: &Tensor, multiple: usize) -> Result<Tensor> {
    let [n, c, h, w] = x.dims4("pad")?;
    let (ph, pw) = (h.div_ceil(multiple) * multiple, w.div_ceil(multiple) * multiple);
    if (ph, pw) == (h, w) {
        return Ok(x.clone());
    }
    let mut data = Vec::with_capacity(n * c * ph * pw);
    for p in 0..n * c {
        let plane = &x.data()[p * h * w..][..h * w];
        for y in 0..ph {
            let row = &plane[y.min(h - 1) * w..][..w];
            data.extend_from_slice(row);
            data.extend(core::iter::repeat(row[w - 1]).take(pw - w));
        }
    }
    Tensor::from_vec(&[n, c, ph, pw], data)
}

/// Runs the learned fusion on one candidate set.
pub fn fuse(net: &FusionNet, set: &CandidateSet, cfg: &FusionInputConfig) -> Result<FlowField> {
    let want = cfg.channels(set.frame.channels());
    if want != net.in_channels() {
        return Err(Error::InvalidParameter(format!(
            "fusion input configuration yields {want} channels but the network expects {}",
            net.in_channels()
        )));
    }
    let out = net.forward(&pack_input(set, cfg))?;
    let (w, h) = set.dims();
    let (u, v) = out.data().split_at(w * h);
    FlowField::from_components(w, h, u.to_vec(), v.to_vec())
}

impl core::fmt::Display for FusionInputConfig {
    fn fmt(&self, f: &mut core::fmt::Formatter<'_>) -> core::fmt::Result {
        let mut parts = alloc::vec!["flows".to_string()];
        if self.include_brightness_errors {
            parts.push("errors".into());
        }
        if self.include_image {
            parts.push("image".into());
        }
        if self.include_magnitude {
            parts.push("magnitude".into());
        }
        f.write_str(&parts.join("+"))
    }
}
