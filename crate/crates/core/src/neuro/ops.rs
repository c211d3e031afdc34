//! Forward-only tensor operators: convolution, GELU, inference batch norm,
//! squeeze-and-excitation, bilinear upsampling, max pooling, and per-pixel
//! fully connected maps.
//!
//! Storage is f32; convolution and pooling sums accumulate in f64.

use rayon::prelude::*;

use crate::error::Error;
use crate::neuro::tensor::FeatureMap;
use crate::neuro::weights::Tensor;
use crate::Result;

pub const BN_EPS: f64 = 1e-5;

/// Cross-correlation with bias. `padding` is symmetric zero padding.
///
/// Kernel tensor shape is `[out_ch, in_ch, kh, kw]`. Spatial output dims are
/// `(h + 2p - kh)/stride + 1`; the stride-2 2×2 path requires even inputs.
pub fn conv2d(
    x: &FeatureMap,
    kernel: &Tensor,
    bias: &[f32],
    stride: usize,
    padding: usize,
) -> Result<FeatureMap> {
    if kernel.shape.len() != 4 {
        return Err(Error::dim(format!("conv kernel rank {} != 4", kernel.shape.len())));
    }
    let (oc, ic, kh, kw) = (
        kernel.shape[0],
        kernel.shape[1],
        kernel.shape[2],
        kernel.shape[3],
    );
    if ic != x.channels {
        return Err(Error::dim(format!(
            "conv: kernel expects {} input channels, tensor has {}",
            ic, x.channels
        )));
    }
    if bias.len() != oc {
        return Err(Error::dim(format!("conv: bias length {} != {}", bias.len(), oc)));
    }
    if stride == 2 && (x.height % 2 != 0 || x.width % 2 != 0) {
        return Err(Error::dim(format!(
            "conv stride 2 requires even spatial dims, got {}x{}",
            x.height, x.width
        )));
    }
    if x.height + 2 * padding < kh || x.width + 2 * padding < kw {
        return Err(Error::dim("conv: kernel larger than padded input".to_string()));
    }
    let oh = (x.height + 2 * padding - kh) / stride + 1;
    let ow = (x.width + 2 * padding - kw) / stride + 1;

    let mut out = FeatureMap::zeros(oc, oh, ow);
    let plane = oh * ow;
    let kw_per_oc = ic * kh * kw;
    out.data
        .par_chunks_mut(plane)
        .enumerate()
        .for_each(|(o, out_plane)| {
            let kbase = o * kw_per_oc;
            for oy in 0..oh {
                for ox in 0..ow {
                    let mut acc = 0.0f64;
                    for c in 0..ic {
                        let xplane = x.channel(c);
                        for ky in 0..kh {
                            let iy = (oy * stride + ky) as isize - padding as isize;
                            if iy < 0 || iy >= x.height as isize {
                                continue;
                            }
                            let row = &xplane[iy as usize * x.width..(iy as usize + 1) * x.width];
                            let krow = kbase + (c * kh + ky) * kw;
                            for kx in 0..kw {
                                let ix = (ox * stride + kx) as isize - padding as isize;
                                if ix < 0 || ix >= x.width as isize {
                                    continue;
                                }
                                acc += row[ix as usize] as f64 * kernel.data[krow + kx] as f64;
                            }
                        }
                    }
                    out_plane[oy * ow + ox] = (acc + bias[o] as f64) as f32;
                }
            }
        });
    Ok(out)
}

/// Tanh-approximation GELU: 0.5·x·(1 + tanh(√(2/π)·(x + 0.044715·x³))).
#[inline]
pub fn gelu_scalar(x: f64) -> f64 {
    const SQRT_2_OVER_PI: f64 = 0.7978845608028654;
    0.5 * x * (1.0 + (SQRT_2_OVER_PI * (x + 0.044715 * x * x * x)).tanh())
}

pub fn gelu(x: &FeatureMap) -> FeatureMap {
    let data = x.data.iter().map(|&v| gelu_scalar(v as f64) as f32).collect();
    FeatureMap {
        channels: x.channels,
        height: x.height,
        width: x.width,
        data,
    }
}

/// Per-channel inference batch norm statistics.
#[derive(Debug, Clone)]
pub struct BnStats<'a> {
    pub mean: &'a [f32],
    pub var: &'a [f32],
    pub gamma: &'a [f32],
    pub beta: &'a [f32],
}

/// (x − μ)/√(σ² + ε)·γ + β per channel, ε = 1e−5.
pub fn batchnorm_infer(x: &FeatureMap, stats: &BnStats) -> Result<FeatureMap> {
    let c = x.channels;
    if stats.mean.len() != c || stats.var.len() != c || stats.gamma.len() != c || stats.beta.len() != c
    {
        return Err(Error::dim(format!("batchnorm: stats length != {c} channels")));
    }
    let mut out = x.clone();
    let plane = x.height * x.width;
    for ch in 0..c {
        let scale = stats.gamma[ch] as f64 / ((stats.var[ch] as f64 + BN_EPS).sqrt());
        let shift = stats.beta[ch] as f64 - stats.mean[ch] as f64 * scale;
        for v in &mut out.data[ch * plane..(ch + 1) * plane] {
            *v = (*v as f64 * scale + shift) as f32;
        }
    }
    Ok(out)
}

#[inline]
fn sigmoid(x: f64) -> f64 {
    1.0 / (1.0 + (-x).exp())
}

/// Dense layer y = Wx + b on f32 slices with f64 accumulation.
/// Weight shape `[out, in]`, row-major.
pub fn fc_apply(w: &Tensor, bias: &[f32], input: &[f32]) -> Result<Vec<f32>> {
    if w.shape.len() != 2 {
        return Err(Error::dim(format!("fc weight rank {} != 2", w.shape.len())));
    }
    let (out_dim, in_dim) = (w.shape[0], w.shape[1]);
    if input.len() != in_dim || bias.len() != out_dim {
        return Err(Error::dim(format!(
            "fc: weight {}x{}, input {}, bias {}",
            out_dim,
            in_dim,
            input.len(),
            bias.len()
        )));
    }
    let mut out = Vec::with_capacity(out_dim);
    for o in 0..out_dim {
        let row = &w.data[o * in_dim..(o + 1) * in_dim];
        let mut acc = bias[o] as f64;
        for (wi, xi) in row.iter().zip(input.iter()) {
            acc += *wi as f64 * *xi as f64;
        }
        out.push(acc as f32);
    }
    Ok(out)
}

/// Global average pool per channel.
pub fn global_avg_pool(x: &FeatureMap) -> Vec<f32> {
    let plane = (x.height * x.width) as f64;
    (0..x.channels)
        .map(|c| (x.channel(c).iter().map(|&v| v as f64).sum::<f64>() / plane) as f32)
        .collect()
}

/// Squeeze-and-excitation: GAP → FC (C→C/r) → GELU → FC (C/r→C) → sigmoid →
/// channel-wise multiply.
pub fn se_block(
    x: &FeatureMap,
    fc1_w: &Tensor,
    fc1_b: &[f32],
    fc2_w: &Tensor,
    fc2_b: &[f32],
) -> Result<FeatureMap> {
    let squeezed = global_avg_pool(x);
    let hidden = fc_apply(fc1_w, fc1_b, &squeezed)?;
    let hidden: Vec<f32> = hidden.iter().map(|&v| gelu_scalar(v as f64) as f32).collect();
    let excite = fc_apply(fc2_w, fc2_b, &hidden)?;
    if excite.len() != x.channels {
        return Err(Error::dim(format!(
            "se: excitation length {} != {} channels",
            excite.len(),
            x.channels
        )));
    }
    let mut out = x.clone();
    let plane = x.height * x.width;
    for c in 0..x.channels {
        let gate = sigmoid(excite[c] as f64) as f32;
        for v in &mut out.data[c * plane..(c + 1) * plane] {
            *v *= gate;
        }
    }
    Ok(out)
}

/// 2× bilinear upsampling with half-pixel (align_corners = false) sampling.
pub fn bilinear_upsample(x: &FeatureMap) -> FeatureMap {
    let oh = x.height * 2;
    let ow = x.width * 2;
    let mut out = FeatureMap::zeros(x.channels, oh, ow);
    for c in 0..x.channels {
        let src = x.channel(c);
        for oy in 0..oh {
            let sy = (oy as f64 + 0.5) / 2.0 - 0.5;
            let y0 = sy.floor().clamp(0.0, (x.height - 1) as f64) as usize;
            let y1 = (y0 + 1).min(x.height - 1);
            let wy = (sy - y0 as f64).clamp(0.0, 1.0);
            for ox in 0..ow {
                let sx = (ox as f64 + 0.5) / 2.0 - 0.5;
                let x0 = sx.floor().clamp(0.0, (x.width - 1) as f64) as usize;
                let x1 = (x0 + 1).min(x.width - 1);
                let wx = (sx - x0 as f64).clamp(0.0, 1.0);
                let v00 = src[y0 * x.width + x0] as f64;
                let v01 = src[y0 * x.width + x1] as f64;
                let v10 = src[y1 * x.width + x0] as f64;
                let v11 = src[y1 * x.width + x1] as f64;
                let top = v00 * (1.0 - wx) + v01 * wx;
                let bot = v10 * (1.0 - wx) + v11 * wx;
                out.set(c, oy, ox, (top * (1.0 - wy) + bot * wy) as f32);
            }
        }
    }
    out
}

/// 2×2 stride-2 max pooling. Requires even spatial dims.
pub fn max_pool2(x: &FeatureMap) -> Result<FeatureMap> {
    if x.height % 2 != 0 || x.width % 2 != 0 {
        return Err(Error::dim(format!(
            "max_pool2 requires even dims, got {}x{}",
            x.height, x.width
        )));
    }
    let oh = x.height / 2;
    let ow = x.width / 2;
    let mut out = FeatureMap::zeros(x.channels, oh, ow);
    for c in 0..x.channels {
        let src = x.channel(c);
        for oy in 0..oh {
            for ox in 0..ow {
                let y = oy * 2;
                let xx = ox * 2;
                let m = src[y * x.width + xx]
                    .max(src[y * x.width + xx + 1])
                    .max(src[(y + 1) * x.width + xx])
                    .max(src[(y + 1) * x.width + xx + 1]);
                out.set(c, oy, ox, m);
            }
        }
    }
    Ok(out)
}

/// Per-spatial-location affine map (equivalent to a 1×1 convolution).
/// Weight shape `[out_ch, in_ch]`.
pub fn fc_per_pixel(x: &FeatureMap, w: &Tensor, bias: &[f32]) -> Result<FeatureMap> {
    if w.shape.len() != 2 {
        return Err(Error::dim(format!("fc_per_pixel weight rank {} != 2", w.shape.len())));
    }
    let (oc, ic) = (w.shape[0], w.shape[1]);
    if ic != x.channels || bias.len() != oc {
        return Err(Error::dim(format!(
            "fc_per_pixel: weight {}x{}, tensor channels {}, bias {}",
            oc,
            ic,
            x.channels,
            bias.len()
        )));
    }
    let plane = x.height * x.width;
    let mut out = FeatureMap::zeros(oc, x.height, x.width);
    out.data
        .par_chunks_mut(plane)
        .enumerate()
        .for_each(|(o, out_plane)| {
            let row = &w.data[o * ic..(o + 1) * ic];
            for p in 0..plane {
                let mut acc = bias[o] as f64;
                for c in 0..ic {
                    acc += row[c] as f64 * x.data[c * plane + p] as f64;
                }
                out_plane[p] = acc as f32;
            }
        });
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::neuro::test_oracles as oracle;
    use crate::rng::{derive_rng_labeled};
    use rand::Rng;

    fn random_map(c: usize, h: usize, w: usize, label: &str) -> FeatureMap {
        let mut rng = derive_rng_labeled(2024, label);
        let data = (0..c * h * w).map(|_| rng.gen_range(-1.0f32..1.0)).collect();
        FeatureMap::from_vec(c, h, w, data).unwrap()
    }

    fn random_tensor(shape: &[usize], label: &str) -> Tensor {
        let mut rng = derive_rng_labeled(4048, label);
        let n: usize = shape.iter().product();
        Tensor {
            shape: shape.to_vec(),
            data: (0..n).map(|_| rng.gen_range(-0.5f32..0.5)).collect(),
        }
    }

    #[test]
    fn conv_identity_1x1() {
        let x = random_map(3, 4, 5, "conv-id");
        let mut k = Tensor {
            shape: vec![3, 3, 1, 1],
            data: vec![0.0; 9],
        };
        for i in 0..3 {
            k.data[i * 3 + i] = 1.0;
        }
        let y = conv2d(&x, &k, &[0.0; 3], 1, 0).unwrap();
        assert_eq!(y, x);
    }

    #[test]
    fn conv_zero_kernel_gives_bias() {
        let x = random_map(2, 3, 3, "conv-zero");
        let k = Tensor {
            shape: vec![2, 2, 3, 3],
            data: vec![0.0; 36],
        };
        let y = conv2d(&x, &k, &[1.5, -0.5], 1, 1).unwrap();
        assert!(y.channel(0).iter().all(|&v| v == 1.5));
        assert!(y.channel(1).iter().all(|&v| v == -0.5));
    }

    #[test]
    fn conv_matches_nested_loop_reference() {
        for trial in 0..20 {
            let x = random_map(3, 5, 6, &format!("conv-ref-x{trial}"));
            let k = random_tensor(&[4, 3, 3, 3], &format!("conv-ref-k{trial}"));
            let b: Vec<f32> = (0..4).map(|i| i as f32 * 0.1).collect();
            let y = conv2d(&x, &k, &b, 1, 1).unwrap();
            let r = oracle::conv2d_reference(&x, &k, &b, 1, 1);
            assert_eq!(y.channels, r.channels);
            for (a, e) in y.data.iter().zip(r.data.iter()) {
                assert!((a - e).abs() < 1e-5, "{a} vs {e}");
            }
        }
    }

    #[test]
    fn conv_stride2_rejects_odd_dims() {
        let x = random_map(1, 5, 4, "conv-odd");
        let k = random_tensor(&[1, 1, 2, 2], "conv-odd-k");
        assert!(conv2d(&x, &k, &[0.0], 2, 0).is_err());
    }

    #[test]
    fn gelu_values() {
        assert_eq!(gelu_scalar(0.0), 0.0);
        // large x -> x
        let x = 20.0;
        assert!((gelu_scalar(x) - x).abs() / x < 1e-6);
        // negative tail stays tiny
        assert!(gelu_scalar(-5.0).abs() < 1e-4);
        // odd-ish shape sanity against direct formula
        let v: f64 = 0.73;
        let expect = 0.5 * v * (1.0 + (0.7978845608028654 * (v + 0.044715 * v * v * v)).tanh());
        assert!((gelu_scalar(v) - expect).abs() < 1e-15);
    }

    #[test]
    fn batchnorm_identity_and_reference() {
        let x = random_map(3, 4, 4, "bn");
        let mean = vec![0.0f32; 3];
        let var = vec![1.0f32; 3];
        let gamma = vec![1.0f32; 3];
        let beta = vec![0.0f32; 3];
        let y = batchnorm_infer(&x, &BnStats { mean: &mean, var: &var, gamma: &gamma, beta: &beta }).unwrap();
        // epsilon = 1e-5 perturbs the unit-variance identity by ~5e-6 * x
        for (a, e) in y.data.iter().zip(x.data.iter()) {
            assert!((a - e).abs() < 1e-5);
        }
        // gamma = 0 -> constant beta
        let gamma0 = vec![0.0f32; 3];
        let beta2 = vec![0.25f32; 3];
        let y = batchnorm_infer(&x, &BnStats { mean: &mean, var: &var, gamma: &gamma0, beta: &beta2 }).unwrap();
        assert!(y.data.iter().all(|&v| v == 0.25));
        // random stats vs scalar formula
        let mean = vec![0.3f32, -0.2, 1.0];
        let var = vec![0.5f32, 2.0, 0.1];
        let gamma = vec![1.2f32, 0.8, -0.4];
        let beta = vec![0.1f32, 0.0, -0.7];
        let y = batchnorm_infer(&x, &BnStats { mean: &mean, var: &var, gamma: &gamma, beta: &beta }).unwrap();
        let r = oracle::batchnorm_reference(&x, &mean, &var, &gamma, &beta);
        for (a, e) in y.data.iter().zip(r.iter()) {
            assert!((a - e).abs() < 1e-5);
        }
    }

    #[test]
    fn se_zero_weights_halve_input() {
        let x = random_map(32, 3, 3, "se");
        let fc1 = Tensor { shape: vec![2, 32], data: vec![0.0; 64] };
        let fc2 = Tensor { shape: vec![32, 2], data: vec![0.0; 64] };
        let y = se_block(&x, &fc1, &[0.0; 2], &fc2, &[0.0; 32]).unwrap();
        for (a, e) in y.data.iter().zip(x.data.iter()) {
            assert!((a - e * 0.5).abs() < 1e-6);
        }
    }

    #[test]
    fn se_matches_reference() {
        for trial in 0..10 {
            let x = random_map(16, 4, 4, &format!("se-ref-{trial}"));
            let fc1 = random_tensor(&[4, 16], &format!("se-fc1-{trial}"));
            let fc2 = random_tensor(&[16, 4], &format!("se-fc2-{trial}"));
            let b1: Vec<f32> = vec![0.05; 4];
            let b2: Vec<f32> = vec![-0.05; 16];
            let y = se_block(&x, &fc1, &b1, &fc2, &b2).unwrap();
            let r = oracle::se_reference(&x, &fc1, &b1, &fc2, &b2);
            for (a, e) in y.data.iter().zip(r.iter()) {
                assert!((a - e).abs() < 1e-5);
            }
        }
    }

    #[test]
    fn upsample_constant_and_small() {
        let x = FeatureMap::from_vec(1, 1, 1, vec![0.7]).unwrap();
        let y = bilinear_upsample(&x);
        assert_eq!(y.height, 2);
        assert!(y.data.iter().all(|&v| (v - 0.7).abs() < 1e-7));

        let x = FeatureMap::from_vec(1, 2, 2, vec![3.0; 4]).unwrap();
        let y = bilinear_upsample(&x);
        assert!(y.data.iter().all(|&v| (v - 3.0).abs() < 1e-6));
    }

    #[test]
    fn upsample_matches_reference() {
        for trial in 0..10 {
            let x = random_map(2, 3, 5, &format!("up-{trial}"));
            let y = bilinear_upsample(&x);
            let r = oracle::bilinear_reference(&x);
            for (a, e) in y.data.iter().zip(r.iter()) {
                assert!((a - e).abs() < 1e-5);
            }
        }
    }

    #[test]
    fn upsample_preserves_linear_ramp_at_centers() {
        // values linear in x: sample centers of the fine grid interpolate exactly
        let w = 8;
        let data: Vec<f32> = (0..w).map(|i| i as f32).collect();
        let x = FeatureMap::from_vec(1, 1, w, data).unwrap();
        let y = bilinear_upsample(&x);
        // interior fine samples: src coordinate (ox+0.5)/2-0.5
        for ox in 1..(2 * w - 1) {
            let s = (ox as f64 + 0.5) / 2.0 - 0.5;
            if s >= 0.0 && s <= (w - 1) as f64 {
                assert!((y.get(0, 0, ox) as f64 - s).abs() < 1e-6, "ox={ox}");
            }
        }
    }

    #[test]
    fn max_pool_reference_and_edges() {
        let x = FeatureMap::from_vec(1, 2, 2, vec![1.0, 2.0, 3.0, 4.0]).unwrap();
        let y = max_pool2(&x).unwrap();
        assert_eq!(y.data, vec![4.0]);

        for trial in 0..10 {
            let x = random_map(3, 6, 4, &format!("mp-{trial}"));
            let y = max_pool2(&x).unwrap();
            let r = oracle::max_pool_reference(&x);
            assert_eq!(y.data, r);
        }
        assert!(max_pool2(&random_map(1, 3, 4, "mp-odd")).is_err());
    }

    #[test]
    fn fc_per_pixel_identity_and_reference() {
        let x = random_map(4, 3, 3, "fcpp");
        let mut w = Tensor { shape: vec![4, 4], data: vec![0.0; 16] };
        for i in 0..4 {
            w.data[i * 4 + i] = 1.0;
        }
        let y = fc_per_pixel(&x, &w, &[0.0; 4]).unwrap();
        for (a, e) in y.data.iter().zip(x.data.iter()) {
            assert!((a - e).abs() < 1e-6);
        }

        for trial in 0..10 {
            let x = random_map(8, 2, 3, &format!("fcpp-{trial}"));
            let w = random_tensor(&[5, 8], &format!("fcpp-w-{trial}"));
            let b: Vec<f32> = (0..5).map(|i| 0.1 * i as f32).collect();
            let y = fc_per_pixel(&x, &w, &b).unwrap();
            let r = oracle::fc_per_pixel_reference(&x, &w, &b);
            for (a, e) in y.data.iter().zip(r.iter()) {
                assert!((a - e).abs() < 1e-5);
            }
        }
    }
}
