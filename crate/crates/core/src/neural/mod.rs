//! Small U-Net style reconstructor `C(s | θ)` with hand-written reverse mode.
//!
//! Complex frames are packed as `2T` real channels (real, imaginary per
//! frame). Encoder levels run conv-ReLU-conv-ReLU then 2×2 average pooling,
//! decoder levels upsample (nearest), concatenate the skip and run
//! conv-ReLU-conv, and a final 1×1 convolution maps back to `2T` channels.
//! The temporal mean of the input is added to every output frame.

mod adam;
mod layers;

pub use adam::{adam_step, AdamConfig, AdamState};
pub use layers::Act;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::numerics::{CTensor, DynamicImage, C64};
use layers::{
    avg_pool, avg_pool_backward, conv_backward, conv_forward, relu_backward, relu_in_place,
    upsample, upsample_backward,
};

/// Version written next to serialized parameters.
pub const PARAMS_FORMAT_VERSION: u32 = 1;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Activation {
    Relu,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ResidualMode {
    AddAverageInput,
    None,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NetConfig {
    pub depth_levels: usize,
    pub base_channels: usize,
    pub in_channels: usize,
    pub out_channels: usize,
    pub activation: Activation,
    pub residual_mode: ResidualMode,
}

impl NetConfig {
    /// Default desk-scale network for `t` frames.
    pub fn for_frames(t: usize) -> Self {
        Self::new(t, 2, 16)
    }

    pub fn new(t: usize, depth_levels: usize, base_channels: usize) -> Self {
        Self {
            depth_levels,
            base_channels,
            in_channels: 2 * t,
            out_channels: 2 * t,
            activation: Activation::Relu,
            residual_mode: ResidualMode::AddAverageInput,
        }
    }

    pub fn frames(&self) -> usize {
        self.in_channels / 2
    }

    pub fn validate(&self) -> Result<()> {
        if self.depth_levels == 0 || self.base_channels == 0 {
            return Err(Error::Architecture(
                "depth and base width must be positive".into(),
            ));
        }
        if self.in_channels == 0
            || !self.in_channels.is_multiple_of(2)
            || self.out_channels != self.in_channels
        {
            return Err(Error::Architecture(format!(
                "channels must be equal and even, got {} -> {}",
                self.in_channels, self.out_channels
            )));
        }
        Ok(())
    }

    fn width(&self, level: usize) -> usize {
        self.base_channels << level
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum LayerKind {
    Conv,
    Down,
    Up,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct LayerSpec {
    pub kind: LayerKind,
    pub in_ch: usize,
    pub out_ch: usize,
    pub kernel: usize,
    /// Start of this layer's weights in the flat parameter vector.
    pub offset: usize,
}

impl LayerSpec {
    pub fn weight_len(&self) -> usize {
        match self.kind {
            LayerKind::Conv => self.out_ch * self.in_ch * self.kernel * self.kernel,
            _ => 0,
        }
    }

    pub fn param_len(&self) -> usize {
        match self.kind {
            LayerKind::Conv => self.weight_len() + self.out_ch,
            _ => 0,
        }
    }
}

/// Network weights with a flat, contiguous view for optimizers and
/// gradient checks.
#[derive(Clone, Debug, PartialEq)]
pub struct NetworkParams {
    config: NetConfig,
    layers: Vec<LayerSpec>,
    flat: Vec<f64>,
}

fn layer_plan(cfg: &NetConfig) -> Vec<LayerSpec> {
    let mut layers = Vec::new();
    let mut offset = 0;
    let mut push = |kind, in_ch, out_ch, kernel| {
        let l = LayerSpec {
            kind,
            in_ch,
            out_ch,
            kernel,
            offset,
        };
        offset += l.param_len();
        layers.push(l);
    };
    let d = cfg.depth_levels;
    let mut ch = cfg.in_channels;
    for l in 0..d {
        push(LayerKind::Conv, ch, cfg.width(l), 3);
        push(LayerKind::Conv, cfg.width(l), cfg.width(l), 3);
        push(LayerKind::Down, cfg.width(l), cfg.width(l), 0);
        ch = cfg.width(l);
    }
    push(LayerKind::Conv, ch, cfg.width(d), 3);
    push(LayerKind::Conv, cfg.width(d), cfg.width(d), 3);
    for l in (0..d).rev() {
        push(LayerKind::Up, cfg.width(l + 1), cfg.width(l + 1), 0);
        push(
            LayerKind::Conv,
            cfg.width(l + 1) + cfg.width(l),
            cfg.width(l),
            3,
        );
        push(LayerKind::Conv, cfg.width(l), cfg.width(l), 3);
    }
    push(LayerKind::Conv, cfg.width(0), cfg.out_channels, 1);
    layers
}

impl NetworkParams {
    /// He-uniform weights, zero biases.
    pub fn init(config: &NetConfig, seed: u64) -> Result<Self> {
        config.validate()?;
        let layers = layer_plan(config);
        let total = layers.iter().map(LayerSpec::param_len).sum();
        let mut flat = vec![0.0; total];
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        for l in layers.iter().filter(|l| l.kind == LayerKind::Conv) {
            let bound = (6.0 / (l.in_ch * l.kernel * l.kernel) as f64).sqrt();
            for v in &mut flat[l.offset..l.offset + l.weight_len()] {
                *v = rng.gen_range(-bound..bound);
            }
        }
        Ok(Self {
            config: config.clone(),
            layers,
            flat,
        })
    }

    pub fn zeros(config: &NetConfig) -> Result<Self> {
        let mut p = Self::init(config, 0)?;
        p.flat.iter_mut().for_each(|v| *v = 0.0);
        Ok(p)
    }

    pub fn from_flat(config: &NetConfig, flat: Vec<f64>) -> Result<Self> {
        config.validate()?;
        let layers = layer_plan(config);
        let total: usize = layers.iter().map(LayerSpec::param_len).sum();
        if flat.len() != total {
            return Err(Error::Architecture(format!(
                "architecture needs {total} parameters, got {}",
                flat.len()
            )));
        }
        if flat.iter().any(|v| !v.is_finite()) {
            return Err(Error::Architecture("non-finite parameter".into()));
        }
        Ok(Self {
            config: config.clone(),
            layers,
            flat,
        })
    }

    pub fn config(&self) -> &NetConfig {
        &self.config
    }

    pub fn layers(&self) -> &[LayerSpec] {
        &self.layers
    }

    pub fn flat(&self) -> &[f64] {
        &self.flat
    }

    pub fn flat_mut(&mut self) -> &mut [f64] {
        &mut self.flat
    }

    pub fn len(&self) -> usize {
        self.flat.len()
    }

    pub fn is_empty(&self) -> bool {
        self.flat.is_empty()
    }

    fn conv_params(&self, l: &LayerSpec) -> (&[f64], &[f64]) {
        let w = &self.flat[l.offset..l.offset + l.weight_len()];
        let b = &self.flat[l.offset + l.weight_len()..l.offset + l.param_len()];
        (w, b)
    }
}

/// Intermediate values kept by [`net_forward`] for [`net_backward`].
#[derive(Clone, Debug)]
pub struct NetCache {
    frames: usize,
    h: usize,
    w: usize,
    param_len: usize,
    /// Input of each convolution, in forward order.
    conv_in: Vec<Act>,
    /// Output of each convolution before any activation.
    conv_pre: Vec<Act>,
}

fn pack(s: &DynamicImage) -> Result<Act> {
    let (t, h, w) = s.dims3()?;
    let n = h * w;
    let mut a = Act::zeros(2 * t, h, w);
    for f in 0..t {
        for (i, z) in s.frame(f).iter().enumerate() {
            a.data[2 * f * n + i] = z.re;
            a.data[(2 * f + 1) * n + i] = z.im;
        }
    }
    Ok(a)
}

fn unpack(a: &Act) -> DynamicImage {
    let (t, n) = (a.c / 2, a.h * a.w);
    let mut data = Vec::with_capacity(t * n);
    for f in 0..t {
        for i in 0..n {
            data.push(C64::new(a.data[2 * f * n + i], a.data[(2 * f + 1) * n + i]));
        }
    }
    CTensor::from_vec(&[t, a.h, a.w], data).expect("finite activations")
}

fn check_input(s: &DynamicImage, cfg: &NetConfig) -> Result<(usize, usize, usize)> {
    let (t, h, w) = s.dims3()?;
    if 2 * t != cfg.in_channels {
        return Err(Error::Architecture(format!(
            "network expects {} frames, input has {t}",
            cfg.frames()
        )));
    }
    let div = 1usize << cfg.depth_levels;
    if h % div != 0 || w % div != 0 {
        return Err(Error::Dimension(format!(
            "{h}x{w} is not divisible by {div} ({} pooling levels)",
            cfg.depth_levels
        )));
    }
    Ok((t, h, w))
}

/// Runs the network on `s_u` and returns the output series with the cache
/// needed for [`net_backward`].
pub fn net_forward(s_u: &DynamicImage, params: &NetworkParams) -> Result<(DynamicImage, NetCache)> {
    let cfg = &params.config;
    let (t, h, w) = check_input(s_u, cfg)?;
    let mut cache = NetCache {
        frames: t,
        h,
        w,
        param_len: params.len(),
        conv_in: Vec::new(),
        conv_pre: Vec::new(),
    };
    let mut convs = params.layers.iter().filter(|l| l.kind == LayerKind::Conv);
    let mut conv = |x: Act, relu: bool, cache: &mut NetCache| {
        let l = convs.next().expect("layer plan");
        let (wt, b) = params.conv_params(l);
        let pre = conv_forward(&x, wt, b, l.out_ch, l.kernel);
        cache.conv_in.push(x);
        let mut out = pre.clone();
        if relu {
            relu_in_place(&mut out);
        }
        cache.conv_pre.push(pre);
        out
    };

    let d = cfg.depth_levels;
    let mut x = pack(s_u)?;
    let mut skips = Vec::with_capacity(d);
    for _ in 0..d {
        x = conv(x, true, &mut cache);
        x = conv(x, true, &mut cache);
        skips.push(x.clone());
        x = avg_pool(&x);
    }
    x = conv(x, true, &mut cache);
    x = conv(x, true, &mut cache);
    for l in (0..d).rev() {
        x = Act::concat(&upsample(&x), &skips[l]);
        x = conv(x, true, &mut cache);
        x = conv(x, false, &mut cache);
    }
    x = conv(x, false, &mut cache);

    let mut out = unpack(&x);
    if cfg.residual_mode == ResidualMode::AddAverageInput {
        let mean = s_u.temporal_mean()?;
        out = out.add(&CTensor::broadcast_frames(&mean, t));
    }
    Ok((out, cache))
}

/// Reverse pass: gradient of `Re⟨grad_out, C(s|θ)⟩` with respect to θ (flat)
/// and to the input series (complex-packed).
pub fn net_backward(
    grad_out: &DynamicImage,
    cache: &NetCache,
    params: &NetworkParams,
) -> Result<(Vec<f64>, DynamicImage)> {
    if cache.param_len != params.len() {
        return Err(Error::Architecture(format!(
            "cache was built for {} parameters, got {}",
            cache.param_len,
            params.len()
        )));
    }
    let expected = [cache.frames, cache.h, cache.w];
    if grad_out.shape() != expected {
        return Err(Error::ShapeMismatch {
            expected: expected.to_vec(),
            got: grad_out.shape().to_vec(),
        });
    }
    let cfg = &params.config;
    let d = cfg.depth_levels;
    let conv_layers: Vec<&LayerSpec> = params
        .layers
        .iter()
        .filter(|l| l.kind == LayerKind::Conv)
        .collect();
    let mut grad = vec![0.0; params.len()];
    let mut idx = conv_layers.len();

    let mut back = |g: Act, relu: bool, grad: &mut Vec<f64>| -> Act {
        idx -= 1;
        let l = conv_layers[idx];
        let mut g = g;
        if relu {
            relu_backward(&cache.conv_pre[idx], &mut g);
        }
        let (wt, _) = params.conv_params(l);
        let (gw, gb) = grad[l.offset..l.offset + l.param_len()].split_at_mut(l.weight_len());
        conv_backward(&cache.conv_in[idx], wt, &g, l.kernel, gw, gb)
    };

    let mut g = pack(grad_out)?;
    g = back(g, false, &mut grad);
    let mut skip_grads = vec![None; d];
    for (l, slot) in skip_grads.iter_mut().enumerate() {
        g = back(g, false, &mut grad);
        g = back(g, true, &mut grad);
        let (g_up, g_skip) = g.split(cfg.width(l + 1));
        *slot = Some(g_skip);
        g = upsample_backward(&g_up);
    }
    g = back(g, true, &mut grad);
    g = back(g, true, &mut grad);
    for l in (0..d).rev() {
        g = avg_pool_backward(&g);
        let s = skip_grads[l].take().expect("skip gradient");
        g.data.iter_mut().zip(&s.data).for_each(|(a, b)| *a += b);
        g = back(g, true, &mut grad);
        g = back(g, true, &mut grad);
    }

    let mut grad_in = unpack(&g);
    if cfg.residual_mode == ResidualMode::AddAverageInput {
        let mean = grad_out.temporal_mean()?;
        grad_in = grad_in.add(&CTensor::broadcast_frames(&mean, cache.frames));
    }
    Ok((grad, grad_in))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn random_series(t: usize, h: usize, w: usize, seed: u64) -> DynamicImage {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let data = (0..t * h * w)
            .map(|_| C64::new(rng.gen_range(0.0..1.0), rng.gen_range(-0.5..0.5)))
            .collect();
        CTensor::from_vec(&[t, h, w], data).unwrap()
    }

    fn conv_param_count(i: usize, o: usize, k: usize) -> usize {
        o * i * k * k + o
    }

    #[test]
    fn default_parameter_count_is_pinned() {
        let cfg = NetConfig::for_frames(8);
        let p = NetworkParams::init(&cfg, 0).unwrap();
        // 16 -> 16 -> 16 | 16 -> 32 -> 32 | 32 -> 64 -> 64 | 96 -> 32 -> 32 | 48 -> 16 -> 16 | 16 -> 16 (1x1)
        let by_hand = conv_param_count(16, 16, 3)
            + conv_param_count(16, 16, 3)
            + conv_param_count(16, 32, 3)
            + conv_param_count(32, 32, 3)
            + conv_param_count(32, 64, 3)
            + conv_param_count(64, 64, 3)
            + conv_param_count(96, 32, 3)
            + conv_param_count(32, 32, 3)
            + conv_param_count(48, 16, 3)
            + conv_param_count(16, 16, 3)
            + conv_param_count(16, 16, 1);
        assert_eq!(by_hand, 120_400);
        assert_eq!(p.len(), 120_400);
    }

    #[test]
    fn zero_network_returns_temporal_average() {
        let cfg = NetConfig::new(4, 2, 4);
        let p = NetworkParams::zeros(&cfg).unwrap();
        let s = random_series(4, 16, 16, 1);
        let (out, _) = net_forward(&s, &p).unwrap();
        let mean = CTensor::broadcast_frames(&s.temporal_mean().unwrap(), 4);
        assert!(out.sub(&mean).max_abs() < 1e-15);
    }

    #[test]
    fn forward_is_deterministic_and_shape_preserving() {
        let cfg = NetConfig::for_frames(8);
        let p = NetworkParams::init(&cfg, 3).unwrap();
        assert_eq!(p, NetworkParams::init(&cfg, 3).unwrap());
        let s = random_series(8, 32, 32, 2);
        let (a, _) = net_forward(&s, &p).unwrap();
        let (b, _) = net_forward(&s, &p).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.shape(), s.shape());
    }

    #[test]
    fn rejects_bad_shapes() {
        let p = NetworkParams::init(&NetConfig::new(2, 2, 2), 0).unwrap();
        assert!(matches!(
            net_forward(&random_series(2, 8, 6, 0), &p),
            Err(Error::Dimension(_))
        ));
        assert!(matches!(
            net_forward(&random_series(3, 8, 8, 0), &p),
            Err(Error::Architecture(_))
        ));
        assert!(NetworkParams::from_flat(p.config(), vec![0.0; 3]).is_err());
    }

    #[test]
    fn zero_cotangent_gives_zero_gradients() {
        let cfg = NetConfig::new(2, 2, 2);
        let p = NetworkParams::init(&cfg, 1).unwrap();
        let s = random_series(2, 8, 8, 1);
        let (_, cache) = net_forward(&s, &p).unwrap();
        let (gt, gi) = net_backward(&CTensor::zeros(&[2, 8, 8]), &cache, &p).unwrap();
        assert!(gt.iter().all(|&v| v == 0.0));
        assert_eq!(gi.max_abs(), 0.0);
    }

    #[test]
    fn residual_path_gradient_is_frame_average() {
        let cfg = NetConfig::new(4, 2, 2);
        let p = NetworkParams::zeros(&cfg).unwrap();
        let s = random_series(4, 8, 8, 5);
        let (_, cache) = net_forward(&s, &p).unwrap();
        let g = random_series(4, 8, 8, 6);
        let (_, gi) = net_backward(&g, &cache, &p).unwrap();
        for f in 0..4 {
            for i in 0..64 {
                let expect: C64 = (0..4).map(|k| g.frame(k)[i]).sum::<C64>() / 4.0;
                assert!((gi.frame(f)[i] - expect).norm() < 1e-15);
            }
        }
    }

    #[test]
    fn every_parameter_gradient_matches_central_differences() {
        let cfg = NetConfig::new(2, 2, 2);
        let mut p = NetworkParams::init(&cfg, 11).unwrap();
        // Nonzero biases so that no unit sits exactly at a ReLU kink.
        let mut rng = ChaCha8Rng::seed_from_u64(12);
        for l in p
            .layers
            .clone()
            .iter()
            .filter(|l| l.kind == LayerKind::Conv)
        {
            for v in &mut p.flat[l.offset + l.weight_len()..l.offset + l.param_len()] {
                *v = rng.gen_range(-0.1..0.1);
            }
        }
        let s = random_series(2, 8, 8, 13);
        let probe = random_series(2, 8, 8, 14);
        let loss = |p: &NetworkParams| net_forward(&s, p).unwrap().0.real_dot(&probe);
        let (_, cache) = net_forward(&s, &p).unwrap();
        let (grad, _) = net_backward(&probe, &cache, &p).unwrap();
        let scale = grad.iter().fold(0.0f64, |a, &b| a.max(b.abs()));
        let h = 1e-6;
        let mut worst = 0.0f64;
        for (i, &an) in grad.iter().enumerate() {
            let mut pp = p.clone();
            pp.flat[i] += h;
            let mut pm = p.clone();
            pm.flat[i] -= h;
            let fd = (loss(&pp) - loss(&pm)) / (2.0 * h);
            // Floor at 1% of the largest gradient: central-difference roundoff is absolute.
            let rel = (fd - an).abs() / fd.abs().max(an.abs()).max(1e-2 * scale);
            worst = worst.max(rel);
        }
        assert!(worst < 1e-5, "worst relative error {worst}");
    }

    #[test]
    fn input_gradient_matches_directional_difference() {
        let cfg = NetConfig::new(4, 2, 4);
        let p = NetworkParams::init(&cfg, 21).unwrap();
        let s = random_series(4, 16, 16, 22);
        let v = random_series(4, 16, 16, 23);
        let probe = random_series(4, 16, 16, 24);
        let (_, cache) = net_forward(&s, &p).unwrap();
        let (_, gi) = net_backward(&probe, &cache, &p).unwrap();
        let h = 1e-6;
        let f = |x: &DynamicImage| net_forward(x, &p).unwrap().0.real_dot(&probe);
        let mut sp = s.clone();
        sp.axpy(C64::new(h, 0.0), &v);
        let mut sm = s.clone();
        sm.axpy(C64::new(-h, 0.0), &v);
        let fd = (f(&sp) - f(&sm)) / (2.0 * h);
        let an = gi.real_dot(&v);
        assert!((fd - an).abs() / an.abs() < 1e-6, "{fd} vs {an}");
    }

    #[test]
    fn forward_is_locally_linear_in_input() {
        let cfg = NetConfig::new(2, 2, 4);
        let p = NetworkParams::init(&cfg, 31).unwrap();
        let s = random_series(2, 8, 8, 32);
        let d = random_series(2, 8, 8, 33).scaled(1e-6);
        let (y0, _) = net_forward(&s, &p).unwrap();
        let (y1, _) = net_forward(&s.add(&d), &p).unwrap();
        let (y2, _) = net_forward(&s.add(&d.scaled(2.0)), &p).unwrap();
        let d1 = y1.sub(&y0);
        let d2 = y2.sub(&y0);
        assert!(d2.sub(&d1.scaled(2.0)).norm() <= 1e-6 * d1.norm());
    }
}
