//! Hierarchical feature fusion (transmitter) and split (receiver).
//!
//! HFF collapses the P2…P5 levels into one 256 × H/16 × W/16 map through
//! three fuse stages; P6 is skipped since it is a pooled copy of P5. HFS
//! mirrors the graph: each split block emits 512 channels whose first half
//! carries on to the next stage and whose second half becomes a pyramid
//! level, with resolutions restored by max pooling / bilinear upsampling.

use crate::error::Error;
use crate::neuro::ops::{
    batchnorm_infer, bilinear_upsample, conv2d, gelu, max_pool2, se_block, BnStats,
};
use crate::neuro::tensor::{FeatureMap, FeaturePyramid, PYRAMID_CHANNELS};
use crate::neuro::weights::{WeightBundle, SE_REDUCTION};
use crate::Result;

const C: usize = PYRAMID_CHANNELS;

fn bn_stats<'a>(bundle: &'a WeightBundle, prefix: &str, ch: usize) -> Result<BnStats<'a>> {
    Ok(BnStats {
        mean: bundle.slice(&format!("{prefix}.mean"), &[ch])?,
        var: bundle.slice(&format!("{prefix}.var"), &[ch])?,
        gamma: bundle.slice(&format!("{prefix}.gamma"), &[ch])?,
        beta: bundle.slice(&format!("{prefix}.beta"), &[ch])?,
    })
}

fn se(bundle: &WeightBundle, prefix: &str, ch: usize, x: &FeatureMap) -> Result<FeatureMap> {
    let mid = ch / SE_REDUCTION;
    se_block(
        x,
        bundle.get(&format!("{prefix}.se.fc1.weight"), &[mid, ch])?,
        bundle.slice(&format!("{prefix}.se.fc1.bias"), &[mid])?,
        bundle.get(&format!("{prefix}.se.fc2.weight"), &[ch, mid])?,
        bundle.slice(&format!("{prefix}.se.fc2.bias"), &[ch])?,
    )
}

/// 3×3 conv → GELU → BN → SE → 1×1 conv (512 → 256).
fn fusion_block(bundle: &WeightBundle, prefix: &str, x: &FeatureMap) -> Result<FeatureMap> {
    let y = conv2d(
        x,
        bundle.get(&format!("{prefix}.conv3.weight"), &[2 * C, 2 * C, 3, 3])?,
        bundle.slice(&format!("{prefix}.conv3.bias"), &[2 * C])?,
        1,
        1,
    )?;
    let y = gelu(&y);
    let y = batchnorm_infer(&y, &bn_stats(bundle, &format!("{prefix}.bn"), 2 * C)?)?;
    let y = se(bundle, prefix, 2 * C, &y)?;
    conv2d(
        &y,
        bundle.get(&format!("{prefix}.conv1.weight"), &[C, 2 * C, 1, 1])?,
        bundle.slice(&format!("{prefix}.conv1.bias"), &[C])?,
        1,
        0,
    )
}

/// Mirror of the fusion block: 1×1 conv (256 → 512) → SE → BN → GELU → 3×3 conv.
fn split_block(bundle: &WeightBundle, prefix: &str, x: &FeatureMap) -> Result<FeatureMap> {
    let y = conv2d(
        x,
        bundle.get(&format!("{prefix}.conv1.weight"), &[2 * C, C, 1, 1])?,
        bundle.slice(&format!("{prefix}.conv1.bias"), &[2 * C])?,
        1,
        0,
    )?;
    let y = se(bundle, prefix, 2 * C, &y)?;
    let y = batchnorm_infer(&y, &bn_stats(bundle, &format!("{prefix}.bn"), 2 * C)?)?;
    let y = gelu(&y);
    conv2d(
        &y,
        bundle.get(&format!("{prefix}.conv3.weight"), &[2 * C, 2 * C, 3, 3])?,
        bundle.slice(&format!("{prefix}.conv3.bias"), &[2 * C])?,
        1,
        1,
    )
}

fn downsample(bundle: &WeightBundle, prefix: &str, x: &FeatureMap) -> Result<FeatureMap> {
    conv2d(
        x,
        bundle.get(&format!("{prefix}.weight"), &[C, C, 2, 2])?,
        bundle.slice(&format!("{prefix}.bias"), &[C])?,
        2,
        0,
    )
}

/// Input data volume of the HFF stage relative to its output: 21.25 for any
/// valid pyramid (256·(HW/16 + HW/64 + HW/256 + HW/1024) vs 256·HW/256).
pub fn volume_reduction_ratio() -> f64 {
    (16.0 + 4.0 + 1.0 + 0.25) / 1.0
}

/// Fuse P2…P5 into a single 256 × H/16 × W/16 map.
///
/// Concatenation order per stage is [carried path ; original level], so the
/// carried path always occupies the first half of the 512 channels.
pub fn hff_forward(pyr: &FeaturePyramid, bundle: &WeightBundle) -> Result<FeatureMap> {
    pyr.validate()?;
    // stage 1 @ H/8
    let d2 = downsample(bundle, "hff.down1", &pyr.p2)?;
    let carry = fusion_block(bundle, "hff.fuse1", &d2.concat_channels(&pyr.p3)?)?;
    // stage 2 @ H/16
    let d = downsample(bundle, "hff.down2", &carry)?;
    let carry = fusion_block(bundle, "hff.fuse2", &d.concat_channels(&pyr.p4)?)?;
    // stage 3 @ H/16, P5 upsampled to match
    let up5 = bilinear_upsample(&pyr.p5);
    fusion_block(bundle, "hff.fuse3", &carry.concat_channels(&up5)?)
}

/// Split a received 256 × H/16 × W/16 map back into a five-level pyramid.
pub fn hfs_forward(p_prime: &FeatureMap, bundle: &WeightBundle) -> Result<FeaturePyramid> {
    if p_prime.channels != C {
        return Err(Error::dim(format!(
            "hfs input has {} channels, expected {C}",
            p_prime.channels
        )));
    }
    if p_prime.height % 4 != 0 || p_prime.width % 4 != 0 {
        return Err(Error::dim(format!(
            "hfs input {}x{} must be divisible by 4 (H/16 of a 64-divisible image)",
            p_prime.height, p_prime.width
        )));
    }

    // mirror of stage 3 @ H/16
    let s3 = split_block(bundle, "hfs.split3", p_prime)?;
    let (carry2, half5) = s3.split_channels(C)?;
    let p5 = max_pool2(&half5)?;

    // mirror of stage 2 @ H/16; carried half upsampled to H/8
    let s2 = split_block(bundle, "hfs.split2", &carry2)?;
    let (carry1, p4) = s2.split_channels(C)?;
    let carry1 = bilinear_upsample(&carry1);

    // mirror of stage 1 @ H/8; carried half upsampled to H/4 becomes P2
    let s1 = split_block(bundle, "hfs.split1", &carry1)?;
    let (half2, p3) = s1.split_channels(C)?;
    let p2 = bilinear_upsample(&half2);

    let p6 = max_pool2(&p5)?;
    let pyr = FeaturePyramid { p2, p3, p4, p5, p6 };
    pyr.validate()?;
    Ok(pyr)
}
