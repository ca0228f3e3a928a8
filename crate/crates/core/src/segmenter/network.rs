//! The reference encoder-decoder and its exact gradients.
//!
//! ```text
//! x(1) -conv3 8-relu-> e1 -pool-> -conv3 16-relu-> e2 -pool-> -conv3 16-> b
//! b -up-> [.., e2](32) -conv3 8-relu-> d1 -up-> [.., e1](16) -conv3 8-relu-> d2
//! d2 -conv1 2-> logits -softmax-> p
//! ```

use serde::{Deserialize, Serialize};

use super::layers::*;
use crate::error::{Error, Result};
use crate::grid::{Image2D, MaskGrid};
use crate::rng::SimRng;

/// Smoothing constant of the soft dice loss.
pub const DICE_SMOOTH: f64 = 1.0;

/// One convolution's kernel `[out][in][k][k]` and bias `[out]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Conv<T> {
    pub out_ch: usize,
    pub in_ch: usize,
    pub kernel: usize,
    pub weight: Vec<T>,
    pub bias: Vec<T>,
}

impl<T: Copy + Default> Conv<T> {
    fn zeros(out_ch: usize, in_ch: usize, kernel: usize) -> Self {
        Conv {
            out_ch,
            in_ch,
            kernel,
            weight: vec![T::default(); out_ch * in_ch * kernel * kernel],
            bias: vec![T::default(); out_ch],
        }
    }

    fn map<U>(&self, f: impl Fn(T) -> U) -> Conv<U> {
        Conv {
            out_ch: self.out_ch,
            in_ch: self.in_ch,
            kernel: self.kernel,
            weight: self.weight.iter().map(|&v| f(v)).collect(),
            bias: self.bias.iter().map(|&v| f(v)).collect(),
        }
    }
}

/// Layer names in storage order.
pub const LAYER_NAMES: [&str; 6] = ["enc1", "enc2", "bottleneck", "dec1", "dec2", "head"];

/// (out, in, kernel) of each layer.
pub const TOPOLOGY: [(usize, usize, usize); 6] = [(8, 1, 3), (16, 8, 3), (16, 16, 3), (8, 32, 3), (8, 16, 3), (2, 8, 1)];

/// Parameters (or gradients) of the fixed topology.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Network<T> {
    pub layers: Vec<Conv<T>>,
}

/// Trainable single-precision weights.
pub type SegmenterParams = Network<f32>;
/// Gradients and other double-precision parameter-shaped values.
pub type Gradients = Network<f64>;

impl<T: Copy + Default> Network<T> {
    pub fn zeros() -> Self {
        Network {
            layers: TOPOLOGY.iter().map(|&(o, i, k)| Conv::zeros(o, i, k)).collect(),
        }
    }

    pub fn parameter_count() -> usize {
        TOPOLOGY.iter().map(|&(o, i, k)| o * i * k * k + o).sum()
    }

    /// All values in storage order (per layer: weight then bias).
    pub fn flatten(&self) -> Vec<T> {
        let mut out = Vec::with_capacity(Self::parameter_count());
        for l in &self.layers {
            out.extend_from_slice(&l.weight);
            out.extend_from_slice(&l.bias);
        }
        out
    }

    /// Inverse of [`flatten`](Self::flatten).
    pub fn unflatten(values: &[T]) -> Self {
        assert_eq!(values.len(), Self::parameter_count());
        let mut net = Self::zeros();
        let mut i = 0;
        for l in &mut net.layers {
            let nw = l.weight.len();
            l.weight.copy_from_slice(&values[i..i + nw]);
            i += nw;
            let nb = l.bias.len();
            l.bias.copy_from_slice(&values[i..i + nb]);
            i += nb;
        }
        net
    }

    pub fn map<U: Copy + Default>(&self, f: impl Fn(T) -> U + Copy) -> Network<U> {
        Network {
            layers: self.layers.iter().map(|l| l.map(f)).collect(),
        }
    }
}

impl Network<f32> {
    /// He-style uniform init: `U(-sqrt(6/fan_in), sqrt(6/fan_in))`, zero bias.
    pub fn he_uniform(rng: &mut SimRng) -> Self {
        let mut net = Self::zeros();
        for l in &mut net.layers {
            let bound = (6.0 / (l.in_ch * l.kernel * l.kernel) as f64).sqrt();
            for w in &mut l.weight {
                *w = rng.uniform(-bound, bound) as f32;
            }
        }
        net
    }

    pub fn to_f64(&self) -> Network<f64> {
        self.map(|v| v as f64)
    }

    pub fn is_finite(&self) -> bool {
        self.layers
            .iter()
            .all(|l| l.weight.iter().chain(&l.bias).all(|v| v.is_finite()))
    }
}

impl Network<f64> {
    pub fn to_f32(&self) -> Network<f32> {
        self.map(|v| v as f32)
    }

    pub fn add_assign(&mut self, other: &Network<f64>) {
        for (a, b) in self.layers.iter_mut().zip(&other.layers) {
            a.weight.iter_mut().zip(&b.weight).for_each(|(x, y)| *x += y);
            a.bias.iter_mut().zip(&b.bias).for_each(|(x, y)| *x += y);
        }
    }

    pub fn scale(&mut self, s: f64) {
        for l in &mut self.layers {
            l.weight.iter_mut().chain(l.bias.iter_mut()).for_each(|v| *v *= s);
        }
    }
}

/// Per-pixel class probabilities.
#[derive(Debug, Clone, PartialEq)]
pub struct Probabilities {
    pub height: usize,
    pub width: usize,
    pub background: Vec<f64>,
    pub foreground: Vec<f64>,
}

struct Trace {
    input: FeatureMap,
    e1: FeatureMap,
    p1: FeatureMap,
    arg1: Vec<usize>,
    e2: FeatureMap,
    p2: FeatureMap,
    arg2: Vec<usize>,
    cat1: FeatureMap,
    d1: FeatureMap,
    cat2: FeatureMap,
    d2: FeatureMap,
    probs: Probabilities,
}

fn check_input(image: &Image2D) -> Result<()> {
    let (h, w) = image.shape();
    if h % 4 != 0 || w % 4 != 0 {
        return Err(Error::shape(format!(
            "{h}x{w} input: both sides must be divisible by 4"
        )));
    }
    Ok(())
}

fn run(net: &Network<f64>, image: &Image2D) -> Trace {
    let (h, w) = image.shape();
    let input = FeatureMap {
        channels: 1,
        height: h,
        width: w,
        data: image.to_f64(),
    };
    let l = &net.layers;
    let mut e1 = conv_forward(&input, &l[0].weight, &l[0].bias, 8, 3);
    relu_forward(&mut e1);
    let (p1, arg1) = maxpool_forward(&e1);
    let mut e2 = conv_forward(&p1, &l[1].weight, &l[1].bias, 16, 3);
    relu_forward(&mut e2);
    let (p2, arg2) = maxpool_forward(&e2);
    let b = conv_forward(&p2, &l[2].weight, &l[2].bias, 16, 3);
    let cat1 = concat(&upsample_forward(&b), &e2);
    let mut d1 = conv_forward(&cat1, &l[3].weight, &l[3].bias, 8, 3);
    relu_forward(&mut d1);
    let cat2 = concat(&upsample_forward(&d1), &e1);
    let mut d2 = conv_forward(&cat2, &l[4].weight, &l[4].bias, 8, 3);
    relu_forward(&mut d2);
    let logits = conv_forward(&d2, &l[5].weight, &l[5].bias, 2, 1);
    let n = h * w;
    let mut background = Vec::with_capacity(n);
    let mut foreground = Vec::with_capacity(n);
    for i in 0..n {
        let z = logits.data[n + i] - logits.data[i];
        // numerically stable two-class softmax
        let fg = if z >= 0.0 {
            1.0 / (1.0 + (-z).exp())
        } else {
            let e = z.exp();
            e / (1.0 + e)
        };
        foreground.push(fg);
        background.push(1.0 - fg);
    }
    Trace {
        input,
        e1,
        p1,
        arg1,
        e2,
        p2,
        arg2,
        cat1,
        d1,
        cat2,
        d2,
        probs: Probabilities {
            height: h,
            width: w,
            background,
            foreground,
        },
    }
}

/// Class probabilities for one slice.
pub fn forward(params: &SegmenterParams, image: &Image2D) -> Result<Probabilities> {
    forward_f64(&params.to_f64(), image)
}

pub fn forward_f64(params: &Network<f64>, image: &Image2D) -> Result<Probabilities> {
    check_input(image)?;
    Ok(run(params, image).probs)
}

/// `1 - (2 sum(p g) + s) / (sum(p^2) + sum(g^2) + s)` with `s = 1`.
pub fn soft_dice_loss(foreground: &[f64], target: &MaskGrid) -> f64 {
    soft_dice_loss_smoothed(foreground, target, DICE_SMOOTH)
}

pub fn soft_dice_loss_smoothed(foreground: &[f64], target: &MaskGrid, smooth: f64) -> f64 {
    assert_eq!(foreground.len(), target.data().len(), "probability/target size mismatch");
    let (mut inter, mut pp, mut gg) = (0.0, 0.0, 0.0);
    for (&p, &g) in foreground.iter().zip(target.data()) {
        let g = g as f64;
        inter += p * g;
        pp += p * p;
        gg += g * g;
    }
    1.0 - (2.0 * inter + smooth) / (pp + gg + smooth)
}

/// Soft dice loss of the network output for one slice.
pub fn loss_f64(params: &Network<f64>, image: &Image2D, target: &MaskGrid) -> Result<f64> {
    Ok(soft_dice_loss(&forward_f64(params, image)?.foreground, target))
}

/// Loss and exact gradient of `soft_dice_loss(forward(image), target)`.
pub fn backward(params: &SegmenterParams, image: &Image2D, target: &MaskGrid) -> Result<(f64, Gradients)> {
    backward_f64(&params.to_f64(), image, target)
}

pub fn backward_f64(net: &Network<f64>, image: &Image2D, target: &MaskGrid) -> Result<(f64, Gradients)> {
    check_input(image)?;
    if image.shape() != target.shape() {
        return Err(Error::shape(format!("image {:?} vs target {:?}", image.shape(), target.shape())));
    }
    let t = run(net, image);
    let (h, w) = image.shape();
    let n = h * w;
    let p = &t.probs.foreground;

    let (mut inter, mut pp, mut gg) = (0.0, 0.0, 0.0);
    for (&pi, &gi) in p.iter().zip(target.data()) {
        let gi = gi as f64;
        inter += pi * gi;
        pp += pi * pi;
        gg += gi * gi;
    }
    let num = 2.0 * inter + DICE_SMOOTH;
    let den = pp + gg + DICE_SMOOTH;
    let loss = 1.0 - num / den;

    // dL/dp_i = -(2 g_i D - 2 p_i N) / D^2 ; dp/dz = p(1-p), z = l1 - l0
    let mut d_logits = FeatureMap::zeros(2, h, w);
    for i in 0..n {
        let gi = target.data()[i] as f64;
        let dp = -(2.0 * gi * den - 2.0 * p[i] * num) / (den * den);
        let dz = dp * p[i] * (1.0 - p[i]);
        d_logits.data[i] = -dz;
        d_logits.data[n + i] = dz;
    }

    let l = &net.layers;
    let mut g = Gradients::zeros();
    let (g0, rest) = g.layers.split_at_mut(1);
    let (g1, rest) = rest.split_at_mut(1);
    let (g2, rest) = rest.split_at_mut(1);
    let (g3, rest) = rest.split_at_mut(1);
    let (g4, g5) = rest.split_at_mut(1);
    let (g0, g1, g2, g3, g4, g5) = (&mut g0[0], &mut g1[0], &mut g2[0], &mut g3[0], &mut g4[0], &mut g5[0]);

    let mut d_d2 = conv_backward(&t.d2, &l[5].weight, &d_logits, 1, &mut g5.weight, &mut g5.bias, true).unwrap();
    relu_backward(&t.d2, &mut d_d2);
    let d_cat2 = conv_backward(&t.cat2, &l[4].weight, &d_d2, 3, &mut g4.weight, &mut g4.bias, true).unwrap();
    let (d_up2, d_e1_skip) = split_channels(&d_cat2, 8);
    let mut d_d1 = upsample_backward(&d_up2);
    relu_backward(&t.d1, &mut d_d1);
    let d_cat1 = conv_backward(&t.cat1, &l[3].weight, &d_d1, 3, &mut g3.weight, &mut g3.bias, true).unwrap();
    let (d_up1, d_e2_skip) = split_channels(&d_cat1, 16);
    let d_b = upsample_backward(&d_up1);
    let d_p2 = conv_backward(&t.p2, &l[2].weight, &d_b, 3, &mut g2.weight, &mut g2.bias, true).unwrap();
    let mut d_e2 = maxpool_backward(&d_p2, &t.arg2, (16, h / 2, w / 2));
    d_e2.data.iter_mut().zip(&d_e2_skip.data).for_each(|(a, b)| *a += b);
    relu_backward(&t.e2, &mut d_e2);
    let d_p1 = conv_backward(&t.p1, &l[1].weight, &d_e2, 3, &mut g1.weight, &mut g1.bias, true).unwrap();
    let mut d_e1 = maxpool_backward(&d_p1, &t.arg1, (8, h, w));
    d_e1.data.iter_mut().zip(&d_e1_skip.data).for_each(|(a, b)| *a += b);
    relu_backward(&t.e1, &mut d_e1);
    conv_backward(&t.input, &l[0].weight, &d_e1, 3, &mut g0.weight, &mut g0.bias, false);

    Ok((loss, g))
}

/// Loss together with the piecewise-linear regime the input falls in:
/// the sign of every ReLU unit and the winner of every pooling window.
/// Two parameter vectors with equal patterns lie in the same smooth piece.
pub fn loss_and_pattern(net: &Network<f64>, image: &Image2D, target: &MaskGrid) -> Result<(f64, Vec<u32>)> {
    check_input(image)?;
    let t = run(net, image);
    let loss = soft_dice_loss(&t.probs.foreground, target);
    let mut pattern = Vec::new();
    for fm in [&t.e1, &t.e2, &t.d1, &t.d2] {
        pattern.extend(fm.data.iter().map(|&v| (v > 0.0) as u32));
    }
    pattern.extend(t.arg1.iter().chain(&t.arg2).map(|&i| i as u32));
    Ok((loss, pattern))
}

/// Argmax over the two classes; ties go to background.
pub fn predict_mask(params: &SegmenterParams, image: &Image2D) -> Result<MaskGrid> {
    Ok(probabilities_to_mask(&forward(params, image)?))
}

pub fn probabilities_to_mask(probs: &Probabilities) -> MaskGrid {
    let data = probs
        .foreground
        .iter()
        .zip(&probs.background)
        .map(|(f, b)| (f > b) as u8)
        .collect();
    MaskGrid::new(probs.height, probs.width, data).expect("probability grid is non-empty")
}

#[cfg(test)]
mod tests {
    use super::*;

    fn random_image(n: usize, seed: u64) -> Image2D {
        let mut rng = SimRng::new(seed);
        Image2D::from_fn(n, n, |_, _| rng.uniform(-1.5, 1.5) as f32)
    }

    #[test]
    fn parameter_count_matches_topology() {
        assert_eq!(SegmenterParams::parameter_count(), 80 + 1168 + 2320 + 2312 + 1160 + 18);
        let net = SegmenterParams::he_uniform(&mut SimRng::new(1));
        assert_eq!(net.flatten().len(), 7058);
        assert_eq!(SegmenterParams::unflatten(&net.flatten()), net);
    }

    #[test]
    fn probabilities_sum_to_one() {
        let net = SegmenterParams::he_uniform(&mut SimRng::new(2));
        let p = forward(&net, &random_image(16, 3)).unwrap();
        assert_eq!(p.foreground.len(), 256);
        for (a, b) in p.foreground.iter().zip(&p.background) {
            assert!((a + b - 1.0).abs() < 1e-6);
        }
    }

    #[test]
    fn zero_weights_give_half() {
        let net = SegmenterParams::zeros();
        let img = random_image(8, 1);
        let p = forward(&net, &img).unwrap();
        assert!(p.foreground.iter().all(|&v| v == 0.5));
        assert_eq!(predict_mask(&net, &img).unwrap().count(), 0);
    }

    #[test]
    fn output_shape_and_divisibility() {
        let net = SegmenterParams::he_uniform(&mut SimRng::new(3));
        let p = forward(&net, &random_image(64, 4)).unwrap();
        assert_eq!((p.height, p.width, p.foreground.len()), (64, 64, 4096));
        let odd = Image2D::zeros(10, 12);
        assert!(matches!(forward(&net, &odd), Err(Error::Shape(_))));
    }

    #[test]
    fn dice_loss_worked_examples() {
        let t = MaskGrid::new(2, 2, vec![1, 0, 1, 0]).unwrap();
        assert!(soft_dice_loss(&[1.0, 0.0, 1.0, 0.0], &t).abs() < 1e-9);
        let empty = MaskGrid::zeros(2, 2);
        assert!(soft_dice_loss(&[0.0; 4], &empty).abs() < 1e-12);
        // 1 - (2*1 + 1) / (1 + 2 + 1)
        assert!((soft_dice_loss(&[0.5; 4], &t) - 0.25).abs() < 1e-12);
    }

    #[test]
    fn gradients_are_deterministic() {
        let net = SegmenterParams::he_uniform(&mut SimRng::new(5));
        let img = random_image(8, 6);
        let t = MaskGrid::from_fn(8, 8, |r, c| r > 2 && c < 5);
        let a = backward(&net, &img, &t).unwrap();
        let b = backward(&net, &img, &t).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn predict_follows_confident_region() {
        let probs = Probabilities {
            height: 2,
            width: 2,
            foreground: vec![1.0, 0.0, 0.5, 1.0],
            background: vec![0.0, 1.0, 0.5, 0.0],
        };
        assert_eq!(probabilities_to_mask(&probs).data(), &[1, 0, 0, 1]);
    }
}
