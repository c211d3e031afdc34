//! MIMO channel-aware encoding/decoding stacks.
//!
//! Each block runs a convolutional trunk (1×1 → GELU → BN → 3×3 → GELU → BN)
//! and gates it with a joint attention weight computed from the globally
//! pooled output of the first conv and per-sub-channel SNR embeddings. A
//! shortcut branch adds the block input back, so feature dimensions never
//! change and N_m blocks stack. The decoder has the same structure with its
//! own weights.

use crate::channel::{EquivalentSnrVector, SNR_DB_FLOOR};
use crate::error::Error;
use crate::neuro::ops::{batchnorm_infer, conv2d, fc_apply, fc_per_pixel, gelu, gelu_scalar, global_avg_pool, BnStats};
use crate::neuro::tensor::{FeatureMap, PYRAMID_CHANNELS};
use crate::neuro::weights::{ArchConfig, WeightBundle, SNR_MLP_HIDDEN};
use crate::Result;

const C: usize = PYRAMID_CHANNELS;

/// Stack configuration for the MCE/MCD modules.
#[derive(Debug, Clone, Copy)]
pub struct MceConfig {
    pub depth: usize,
    pub n_antennas: usize,
}

impl MceConfig {
    pub fn from_arch(arch: &ArchConfig) -> Self {
        MceConfig { depth: arch.mce_depth, n_antennas: arch.n_antennas }
    }

    pub fn snr_embed_dim(&self) -> usize {
        C / self.n_antennas
    }
}

fn bn_stats<'a>(bundle: &'a WeightBundle, prefix: &str) -> Result<BnStats<'a>> {
    Ok(BnStats {
        mean: bundle.slice(&format!("{prefix}.mean"), &[C])?,
        var: bundle.slice(&format!("{prefix}.var"), &[C])?,
        gamma: bundle.slice(&format!("{prefix}.gamma"), &[C])?,
        beta: bundle.slice(&format!("{prefix}.beta"), &[C])?,
    })
}

fn sigmoid(x: f64) -> f64 {
    1.0 / (1.0 + (-x).exp())
}

/// SNR embeddings: each sub-channel SNR (dB, floored at the sentinel and
/// scaled by 1/20) runs through a scalar→32→256/N MLP; the embeddings are
/// concatenated into a 256-d wireless channel feature.
fn embed_snrs(
    bundle: &WeightBundle,
    prefix: &str,
    snrs: &EquivalentSnrVector,
    cfg: &MceConfig,
) -> Result<Vec<f32>> {
    if snrs.values_db.len() != cfg.n_antennas {
        return Err(Error::dim(format!(
            "snr vector length {} != n_antennas {}",
            snrs.values_db.len(),
            cfg.n_antennas
        )));
    }
    let embed = cfg.snr_embed_dim();
    let fc1_w = bundle.get(&format!("{prefix}.snr_mlp.fc1.weight"), &[SNR_MLP_HIDDEN, 1])?;
    let fc1_b = bundle.slice(&format!("{prefix}.snr_mlp.fc1.bias"), &[SNR_MLP_HIDDEN])?;
    let fc2_w = bundle.get(&format!("{prefix}.snr_mlp.fc2.weight"), &[embed, SNR_MLP_HIDDEN])?;
    let fc2_b = bundle.slice(&format!("{prefix}.snr_mlp.fc2.bias"), &[embed])?;
    let mut out = Vec::with_capacity(C);
    for &db in &snrs.values_db {
        let x = (db.max(SNR_DB_FLOOR) / 20.0) as f32;
        let h = fc_apply(fc1_w, fc1_b, &[x])?;
        let h: Vec<f32> = h.iter().map(|&v| gelu_scalar(v as f64) as f32).collect();
        out.extend(fc_apply(fc2_w, fc2_b, &h)?);
    }
    Ok(out)
}

fn block_forward(
    bundle: &WeightBundle,
    prefix: &str,
    x: &FeatureMap,
    snrs: &EquivalentSnrVector,
    cfg: &MceConfig,
) -> Result<FeatureMap> {
    // trunk
    let first = conv2d(
        x,
        bundle.get(&format!("{prefix}.conv1.weight"), &[C, C, 1, 1])?,
        bundle.slice(&format!("{prefix}.conv1.bias"), &[C])?,
        1,
        0,
    )?;
    let t = gelu(&first);
    let t = batchnorm_infer(&t, &bn_stats(bundle, &format!("{prefix}.bn1"))?)?;
    let t = conv2d(
        &t,
        bundle.get(&format!("{prefix}.conv3.weight"), &[C, C, 3, 3])?,
        bundle.slice(&format!("{prefix}.conv3.bias"), &[C])?,
        1,
        1,
    )?;
    let t = gelu(&t);
    let trunk = batchnorm_infer(&t, &bn_stats(bundle, &format!("{prefix}.bn2"))?)?;

    // joint attention: pooled image feature ++ embedded channel feature
    let image_feat = global_avg_pool(&first);
    let channel_feat = embed_snrs(bundle, prefix, snrs, cfg)?;
    let mut joint = image_feat;
    joint.extend(channel_feat);
    let a = fc_apply(
        bundle.get(&format!("{prefix}.att.fc1.weight"), &[C, 2 * C])?,
        bundle.slice(&format!("{prefix}.att.fc1.bias"), &[C])?,
        &joint,
    )?;
    let a: Vec<f32> = a.iter().map(|&v| gelu_scalar(v as f64) as f32).collect();
    let a = fc_apply(
        bundle.get(&format!("{prefix}.att.fc2.weight"), &[C, C])?,
        bundle.slice(&format!("{prefix}.att.fc2.bias"), &[C])?,
        &a,
    )?;
    let gates: Vec<f32> = a.iter().map(|&v| sigmoid(v as f64) as f32).collect();

    // shortcut: out = x + gate ⊙ trunk
    let mut out = x.clone();
    let plane = x.height * x.width;
    for c in 0..C {
        let g = gates[c];
        let t = &trunk.data[c * plane..(c + 1) * plane];
        for (o, tv) in out.data[c * plane..(c + 1) * plane].iter_mut().zip(t) {
            *o += g * tv;
        }
    }
    Ok(out)
}

fn stack_forward(
    side: &str,
    p: &FeatureMap,
    snrs: &EquivalentSnrVector,
    bundle: &WeightBundle,
    cfg: &MceConfig,
) -> Result<FeatureMap> {
    if p.channels != C {
        return Err(Error::dim(format!("{side} input has {} channels, expected {C}", p.channels)));
    }
    if C % cfg.n_antennas != 0 {
        return Err(Error::config(format!(
            "256 not divisible by n_antennas = {}",
            cfg.n_antennas
        )));
    }
    let mut x = p.clone();
    for b in 0..cfg.depth {
        x = block_forward(bundle, &format!("{side}.block{b}"), &x, snrs, cfg)?;
    }
    Ok(x)
}

/// Channel-aware encoder stack (transmitter side).
pub fn mce_forward(
    p: &FeatureMap,
    snrs: &EquivalentSnrVector,
    bundle: &WeightBundle,
    cfg: &MceConfig,
) -> Result<FeatureMap> {
    stack_forward("mce", p, snrs, bundle, cfg)
}

/// Channel-aware decoder stack (receiver side, same structure, own weights).
pub fn mcd_forward(
    p: &FeatureMap,
    snrs: &EquivalentSnrVector,
    bundle: &WeightBundle,
    cfg: &MceConfig,
) -> Result<FeatureMap> {
    stack_forward("mcd", p, snrs, bundle, cfg)
}

/// Attention gates of a single block, exposed for range/smoothness tests.
pub fn attention_gates(
    bundle: &WeightBundle,
    prefix: &str,
    p: &FeatureMap,
    snrs: &EquivalentSnrVector,
    cfg: &MceConfig,
) -> Result<Vec<f32>> {
    let first = conv2d(
        p,
        bundle.get(&format!("{prefix}.conv1.weight"), &[C, C, 1, 1])?,
        bundle.slice(&format!("{prefix}.conv1.bias"), &[C])?,
        1,
        0,
    )?;
    let image_feat = global_avg_pool(&first);
    let channel_feat = embed_snrs(bundle, prefix, snrs, cfg)?;
    let mut joint = image_feat;
    joint.extend(channel_feat);
    let a = fc_apply(
        bundle.get(&format!("{prefix}.att.fc1.weight"), &[C, 2 * C])?,
        bundle.slice(&format!("{prefix}.att.fc1.bias"), &[C])?,
        &joint,
    )?;
    let a: Vec<f32> = a.iter().map(|&v| gelu_scalar(v as f64) as f32).collect();
    let a = fc_apply(
        bundle.get(&format!("{prefix}.att.fc2.weight"), &[C, C])?,
        bundle.slice(&format!("{prefix}.att.fc2.bias"), &[C])?,
        &a,
    )?;
    Ok(a.iter().map(|&v| sigmoid(v as f64) as f32).collect())
}

/// Compress to C channels with a per-pixel FC (1×1-conv-equivalent).
pub fn fc_compress(p_m: &FeatureMap, bundle: &WeightBundle, c_out: usize) -> Result<FeatureMap> {
    fc_per_pixel(
        p_m,
        bundle.get("fc.compress.weight", &[c_out, C])?,
        bundle.slice("fc.compress.bias", &[c_out])?,
    )
}

/// Decompress back to 256 channels.
pub fn fc_decompress(p_c: &FeatureMap, bundle: &WeightBundle) -> Result<FeatureMap> {
    fc_per_pixel(
        p_c,
        bundle.get("fc.decompress.weight", &[C, p_c.channels])?,
        bundle.slice("fc.decompress.bias", &[C])?,
    )
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::neuro::synth::{synth_map, SynthDistribution};
    use crate::neuro::weights::{init_weights, zero_weights, ArchConfig};

    fn arch(depth: usize) -> ArchConfig {
        ArchConfig { n_antennas: 4, mce_depth: depth, compressed_channels: 48 }
    }

    fn snrs(n: usize) -> EquivalentSnrVector {
        EquivalentSnrVector {
            values_db: (0..n).map(|i| 12.0 - 3.0 * i as f64).collect(),
        }
    }

    #[test]
    fn shape_preserved_for_all_depths() {
        let x = synth_map(256, 8, 4, 11, SynthDistribution::StandardNormal);
        for depth in 1..=6 {
            let a = arch(depth);
            let bundle = init_weights(3, &a).unwrap();
            let cfg = MceConfig::from_arch(&a);
            let y = mce_forward(&x, &snrs(4), &bundle, &cfg).unwrap();
            assert_eq!((y.channels, y.height, y.width), (256, 8, 4));
            assert!(y.all_finite());
            let z = mcd_forward(&x, &snrs(4), &bundle, &cfg).unwrap();
            assert_eq!((z.channels, z.height, z.width), (256, 8, 4));
        }
    }

    #[test]
    fn zero_trunk_is_residual_identity() {
        let x = synth_map(256, 4, 4, 5, SynthDistribution::StandardNormal);
        let a = arch(3);
        let bundle = zero_weights(&a).unwrap();
        let cfg = MceConfig::from_arch(&a);
        let y = mce_forward(&x, &snrs(4), &bundle, &cfg).unwrap();
        assert_eq!(y, x);
    }

    #[test]
    fn gates_in_unit_interval() {
        let x = synth_map(256, 4, 4, 5, SynthDistribution::StandardNormal);
        let a = arch(1);
        let bundle = init_weights(17, &a).unwrap();
        let cfg = MceConfig::from_arch(&a);
        let g = attention_gates(&bundle, "mce.block0", &x, &snrs(4), &cfg).unwrap();
        assert_eq!(g.len(), 256);
        assert!(g.iter().all(|&v| (0.0..=1.0).contains(&v)));
    }

    #[test]
    fn output_is_smooth_in_snr() {
        let x = synth_map(256, 4, 4, 5, SynthDistribution::StandardNormal);
        let a = arch(2);
        let bundle = init_weights(23, &a).unwrap();
        let cfg = MceConfig::from_arch(&a);
        let base = snrs(4);
        let mut bumped = base.clone();
        bumped.values_db[1] += 1e-6;
        let y0 = mce_forward(&x, &base, &bundle, &cfg).unwrap();
        let y1 = mce_forward(&x, &bumped, &bundle, &cfg).unwrap();
        let max_delta = y0
            .data
            .iter()
            .zip(y1.data.iter())
            .map(|(a, b)| (a - b).abs())
            .fold(0.0f32, f32::max);
        assert!(max_delta <=  1e-3, "max delta {max_delta}");
    }

    #[test]
    fn snr_vector_length_checked() {
        let x = synth_map(256, 4, 4, 5, SynthDistribution::StandardNormal);
        let a = arch(1);
        let bundle = init_weights(3, &a).unwrap();
        let cfg = MceConfig::from_arch(&a);
        assert!(mce_forward(&x, &snrs(2), &bundle, &cfg).is_err());
    }

    #[test]
    fn fc_layers_shapes_and_identity() {
        let a = arch(1);
        let x = synth_map(256, 4, 4, 5, SynthDistribution::StandardNormal);
        let bundle = init_weights(3, &a).unwrap();
        let c = fc_compress(&x, &bundle, 48).unwrap();
        assert_eq!((c.channels, c.height, c.width), (48, 4, 4));
        let d = fc_decompress(&c, &bundle).unwrap();
        assert_eq!(d.channels, 256);
    }
}
