//! Dense feature-map kernels with hand-written backward passes.
//!
//! Feature maps are channel-major `[c][h][w]` in f64.

#[derive(Debug, Clone, PartialEq)]
pub struct FeatureMap {
    pub channels: usize,
    pub height: usize,
    pub width: usize,
    pub data: Vec<f64>,
}

impl FeatureMap {
    pub fn zeros(channels: usize, height: usize, width: usize) -> Self {
        FeatureMap {
            channels,
            height,
            width,
            data: vec![0.0; channels * height * width],
        }
    }

    pub fn plane(&self, c: usize) -> &[f64] {
        let n = self.height * self.width;
        &self.data[c * n..(c + 1) * n]
    }

    fn plane_mut(&mut self, c: usize) -> &mut [f64] {
        let n = self.height * self.width;
        &mut self.data[c * n..(c + 1) * n]
    }
}

/// Square-kernel convolution with 'same' zero padding.
/// `weight` is `[out][in][k][k]`.
pub fn conv_forward(input: &FeatureMap, weight: &[f64], bias: &[f64], out_ch: usize, k: usize) -> FeatureMap {
    let (h, w, in_ch) = (input.height, input.width, input.channels);
    debug_assert_eq!(weight.len(), out_ch * in_ch * k * k);
    let pad = (k / 2) as isize;
    let mut out = FeatureMap::zeros(out_ch, h, w);
    for co in 0..out_ch {
        let dst = out.plane_mut(co);
        dst.iter_mut().for_each(|v| *v = bias[co]);
        for ci in 0..in_ch {
            let src = input.plane(ci);
            for ky in 0..k {
                let dy = ky as isize - pad;
                for kx in 0..k {
                    let dx = kx as isize - pad;
                    let wv = weight[((co * in_ch + ci) * k + ky) * k + kx];
                    let x0 = (-dx).max(0) as usize;
                    let x1 = (w as isize - dx).min(w as isize) as usize;
                    for y in 0..h {
                        let sy = y as isize + dy;
                        if sy < 0 || sy >= h as isize {
                            continue;
                        }
                        let srow = &src[sy as usize * w..(sy as usize + 1) * w];
                        let drow = &mut dst[y * w..(y + 1) * w];
                        let sx0 = (x0 as isize + dx) as usize;
                        for (d, s) in drow[x0..x1].iter_mut().zip(&srow[sx0..sx0 + (x1 - x0)]) {
                            *d += wv * s;
                        }
                    }
                }
            }
        }
    }
    out
}

/// Gradients of a convolution: returns (d_input, and accumulates into
/// `d_weight`/`d_bias`).
pub fn conv_backward(
    input: &FeatureMap,
    weight: &[f64],
    d_out: &FeatureMap,
    k: usize,
    d_weight: &mut [f64],
    d_bias: &mut [f64],
    want_input_grad: bool,
) -> Option<FeatureMap> {
    let (h, w, in_ch) = (input.height, input.width, input.channels);
    let out_ch = d_out.channels;
    let pad = (k / 2) as isize;
    let mut d_in = want_input_grad.then(|| FeatureMap::zeros(in_ch, h, w));
    for co in 0..out_ch {
        let g = d_out.plane(co);
        d_bias[co] += g.iter().sum::<f64>();
        for ci in 0..in_ch {
            let src = input.plane(ci);
            for ky in 0..k {
                let dy = ky as isize - pad;
                for kx in 0..k {
                    let dx = kx as isize - pad;
                    let widx = ((co * in_ch + ci) * k + ky) * k + kx;
                    let wv = weight[widx];
                    let x0 = (-dx).max(0) as usize;
                    let x1 = (w as isize - dx).min(w as isize) as usize;
                    let sx0 = (x0 as isize + dx) as usize;
                    let len = x1 - x0;
                    let mut acc = 0.0;
                    for y in 0..h {
                        let sy = y as isize + dy;
                        if sy < 0 || sy >= h as isize {
                            continue;
                        }
                        let sy = sy as usize;
                        let grow = &g[y * w + x0..y * w + x1];
                        let srow = &src[sy * w + sx0..sy * w + sx0 + len];
                        acc += grow.iter().zip(srow).map(|(a, b)| a * b).sum::<f64>();
                        if let Some(d_in) = d_in.as_mut() {
                            let drow = &mut d_in.plane_mut(ci)[sy * w + sx0..sy * w + sx0 + len];
                            for (d, gv) in drow.iter_mut().zip(grow) {
                                *d += wv * gv;
                            }
                        }
                    }
                    d_weight[widx] += acc;
                }
            }
        }
    }
    d_in
}

pub fn relu_forward(x: &mut FeatureMap) {
    x.data.iter_mut().for_each(|v| *v = v.max(0.0));
}

/// Zeroes gradient entries where the (post-ReLU) activation is not positive.
pub fn relu_backward(activated: &FeatureMap, grad: &mut FeatureMap) {
    for (g, &a) in grad.data.iter_mut().zip(&activated.data) {
        if a <= 0.0 {
            *g = 0.0;
        }
    }
}

/// 2x2 max pooling; also returns the flat argmax index of each window.
pub fn maxpool_forward(input: &FeatureMap) -> (FeatureMap, Vec<usize>) {
    let (h, w) = (input.height / 2, input.width / 2);
    let mut out = FeatureMap::zeros(input.channels, h, w);
    let mut arg = vec![0usize; input.channels * h * w];
    let iw = input.width;
    let plane = input.height * input.width;
    for c in 0..input.channels {
        for y in 0..h {
            for x in 0..w {
                let base = c * plane + 2 * y * iw + 2 * x;
                let cands = [base, base + 1, base + iw, base + iw + 1];
                let mut best = cands[0];
                for &i in &cands[1..] {
                    if input.data[i] > input.data[best] {
                        best = i;
                    }
                }
                let o = (c * h + y) * w + x;
                out.data[o] = input.data[best];
                arg[o] = best;
            }
        }
    }
    (out, arg)
}

pub fn maxpool_backward(d_out: &FeatureMap, argmax: &[usize], in_shape: (usize, usize, usize)) -> FeatureMap {
    let mut d_in = FeatureMap::zeros(in_shape.0, in_shape.1, in_shape.2);
    for (g, &i) in d_out.data.iter().zip(argmax) {
        d_in.data[i] += g;
    }
    d_in
}

/// Nearest-neighbour x2 upsampling.
pub fn upsample_forward(input: &FeatureMap) -> FeatureMap {
    let (h, w) = (input.height * 2, input.width * 2);
    let mut out = FeatureMap::zeros(input.channels, h, w);
    for c in 0..input.channels {
        for y in 0..h {
            for x in 0..w {
                out.data[(c * h + y) * w + x] = input.data[(c * input.height + y / 2) * input.width + x / 2];
            }
        }
    }
    out
}

pub fn upsample_backward(d_out: &FeatureMap) -> FeatureMap {
    let (h, w) = (d_out.height / 2, d_out.width / 2);
    let mut d_in = FeatureMap::zeros(d_out.channels, h, w);
    for c in 0..d_out.channels {
        for y in 0..d_out.height {
            for x in 0..d_out.width {
                d_in.data[(c * h + y / 2) * w + x / 2] += d_out.data[(c * d_out.height + y) * d_out.width + x];
            }
        }
    }
    d_in
}

/// Channel concatenation `[a; b]`.
pub fn concat(a: &FeatureMap, b: &FeatureMap) -> FeatureMap {
    debug_assert_eq!((a.height, a.width), (b.height, b.width));
    let mut data = Vec::with_capacity(a.data.len() + b.data.len());
    data.extend_from_slice(&a.data);
    data.extend_from_slice(&b.data);
    FeatureMap {
        channels: a.channels + b.channels,
        height: a.height,
        width: a.width,
        data,
    }
}

/// Inverse of [`concat`] for gradients.
pub fn split_channels(x: &FeatureMap, first: usize) -> (FeatureMap, FeatureMap) {
    let n = x.height * x.width;
    let a = FeatureMap {
        channels: first,
        height: x.height,
        width: x.width,
        data: x.data[..first * n].to_vec(),
    };
    let b = FeatureMap {
        channels: x.channels - first,
        height: x.height,
        width: x.width,
        data: x.data[first * n..].to_vec(),
    };
    (a, b)
}
