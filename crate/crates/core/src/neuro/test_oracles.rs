//! Independent nested-loop reference implementations used by the test
//! suites to cross-check the operator implementations. Deliberately written
//! as direct scalar translations of the defining formulas, with no shared
//! code paths with `ops`.

use crate::neuro::tensor::FeatureMap;
use crate::neuro::weights::Tensor;

pub fn conv2d_reference(
    x: &FeatureMap,
    kernel: &Tensor,
    bias: &[f32],
    stride: usize,
    padding: usize,
) -> FeatureMap {
    let (oc, ic, kh, kw) = (
        kernel.shape[0],
        kernel.shape[1],
        kernel.shape[2],
        kernel.shape[3],
    );
    assert_eq!(ic, x.channels);
    let oh = (x.height + 2 * padding - kh) / stride + 1;
    let ow = (x.width + 2 * padding - kw) / stride + 1;
    let mut out = FeatureMap::zeros(oc, oh, ow);
    for o in 0..oc {
        for oy in 0..oh {
            for ox in 0..ow {
                let mut s = bias[o] as f64;
                for c in 0..ic {
                    for ky in 0..kh {
                        for kx in 0..kw {
                            let iy = oy as isize * stride as isize + ky as isize - padding as isize;
                            let ix = ox as isize * stride as isize + kx as isize - padding as isize;
                            if iy >= 0
                                && iy < x.height as isize
                                && ix >= 0
                                && ix < x.width as isize
                            {
                                let xv = x.get(c, iy as usize, ix as usize) as f64;
                                let wv =
                                    kernel.data[((o * ic + c) * kh + ky) * kw + kx] as f64;
                                s += xv * wv;
                            }
                        }
                    }
                }
                out.set(o, oy, ox, s as f32);
            }
        }
    }
    out
}

pub fn batchnorm_reference(
    x: &FeatureMap,
    mean: &[f32],
    var: &[f32],
    gamma: &[f32],
    beta: &[f32],
) -> Vec<f32> {
    let mut out = Vec::with_capacity(x.len());
    for c in 0..x.channels {
        for y in 0..x.height {
            for xx in 0..x.width {
                let v = x.get(c, y, xx) as f64;
                let z = (v - mean[c] as f64) / (var[c] as f64 + 1e-5).sqrt() * gamma[c] as f64
                    + beta[c] as f64;
                out.push(z as f32);
            }
        }
    }
    out
}

fn gelu_ref(x: f64) -> f64 {
    0.5 * x * (1.0 + ((2.0 / std::f64::consts::PI).sqrt() * (x + 0.044715 * x.powi(3))).tanh())
}

pub fn se_reference(
    x: &FeatureMap,
    fc1_w: &Tensor,
    fc1_b: &[f32],
    fc2_w: &Tensor,
    fc2_b: &[f32],
) -> Vec<f32> {
    let c = x.channels;
    let hidden_dim = fc1_w.shape[0];
    let mut squeezed = vec![0.0f64; c];
    for (ch, s) in squeezed.iter_mut().enumerate() {
        let mut acc = 0.0f64;
        for y in 0..x.height {
            for xx in 0..x.width {
                acc += x.get(ch, y, xx) as f64;
            }
        }
        *s = acc / (x.height * x.width) as f64;
    }
    let mut hidden = vec![0.0f64; hidden_dim];
    for (h, hv) in hidden.iter_mut().enumerate() {
        let mut acc = fc1_b[h] as f64;
        for (i, s) in squeezed.iter().enumerate() {
            acc += fc1_w.data[h * c + i] as f64 * *s;
        }
        *hv = gelu_ref(acc);
    }
    let mut gates = vec![0.0f64; c];
    for (ch, g) in gates.iter_mut().enumerate() {
        let mut acc = fc2_b[ch] as f64;
        for (h, hv) in hidden.iter().enumerate() {
            acc += fc2_w.data[ch * hidden_dim + h] as f64 * *hv;
        }
        *g = 1.0 / (1.0 + (-acc).exp());
    }
    let mut out = Vec::with_capacity(x.len());
    for ch in 0..c {
        for y in 0..x.height {
            for xx in 0..x.width {
                out.push((x.get(ch, y, xx) as f64 * gates[ch]) as f32);
            }
        }
    }
    out
}

pub fn bilinear_reference(x: &FeatureMap) -> Vec<f32> {
    let oh = x.height * 2;
    let ow = x.width * 2;
    let mut out = Vec::with_capacity(x.channels * oh * ow);
    for c in 0..x.channels {
        for oy in 0..oh {
            for ox in 0..ow {
                let sy = ((oy as f64 + 0.5) / 2.0 - 0.5).max(0.0).min((x.height - 1) as f64);
                let sx = ((ox as f64 + 0.5) / 2.0 - 0.5).max(0.0).min((x.width - 1) as f64);
                let y0 = sy.floor() as usize;
                let x0 = sx.floor() as usize;
                let y1 = (y0 + 1).min(x.height - 1);
                let x1 = (x0 + 1).min(x.width - 1);
                let dy = sy - y0 as f64;
                let dx = sx - x0 as f64;
                let v = x.get(c, y0, x0) as f64 * (1.0 - dy) * (1.0 - dx)
                    + x.get(c, y0, x1) as f64 * (1.0 - dy) * dx
                    + x.get(c, y1, x0) as f64 * dy * (1.0 - dx)
                    + x.get(c, y1, x1) as f64 * dy * dx;
                out.push(v as f32);
            }
        }
    }
    out
}

pub fn max_pool_reference(x: &FeatureMap) -> Vec<f32> {
    let mut out = Vec::with_capacity(x.len() / 4);
    for c in 0..x.channels {
        for oy in 0..x.height / 2 {
            for ox in 0..x.width / 2 {
                let mut m = f32::NEG_INFINITY;
                for dy in 0..2 {
                    for dx in 0..2 {
                        m = m.max(x.get(c, oy * 2 + dy, ox * 2 + dx));
                    }
                }
                out.push(m);
            }
        }
    }
    out
}

pub fn fc_per_pixel_reference(x: &FeatureMap, w: &Tensor, bias: &[f32]) -> Vec<f32> {
    let (oc, ic) = (w.shape[0], w.shape[1]);
    let mut out = Vec::with_capacity(oc * x.height * x.width);
    for o in 0..oc {
        for y in 0..x.height {
            for xx in 0..x.width {
                let mut acc = bias[o] as f64;
                for c in 0..ic {
                    acc += w.data[o * ic + c] as f64 * x.get(c, y, xx) as f64;
                }
                out.push(acc as f32);
            }
        }
    }
    out
}
