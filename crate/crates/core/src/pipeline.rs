//! End-to-end pyramid transport: HFF → MCE stack → FC compress → digital
//! baseband over one channel realization → FC decompress → MCD stack → HFS.

use crate::baseband::{transport_frame, FrameReport, LinkConfig};
use crate::channel::{draw_channel, equivalent_snrs, ChannelRealization};
use crate::metrics::{pyramid_mse, DistortionReport};
use crate::neuro::mce::{fc_compress, fc_decompress, mcd_forward, mce_forward, MceConfig};
use crate::neuro::tensor::FeaturePyramid;
use crate::neuro::weights::WeightBundle;
use crate::neuro::{hff_forward, hfs_forward};
use crate::rng::{derive_rng, Role};
use crate::Result;

pub struct TransmitOutcome {
    pub reconstructed: FeaturePyramid,
    pub distortion: DistortionReport,
    pub frame: FrameReport,
    pub channel: ChannelRealization,
}

/// Transport one pyramid end to end. The channel realization is drawn from
/// the (seed, frame, Channel) substream and held for the whole frame.
pub fn transmit_pyramid(
    pyr: &FeaturePyramid,
    bundle: &WeightBundle,
    link: &LinkConfig,
    mce_cfg: &MceConfig,
    snr_db: f64,
    seed: u64,
    frame: u64,
) -> Result<TransmitOutcome> {
    link.validate()?;
    pyr.validate()?;
    if pyr.image_height() != link.image_height || pyr.image_width() != link.image_width {
        return Err(crate::error::Error::dim(format!(
            "pyramid is for a {}x{} image, config says {}x{}",
            pyr.image_height(),
            pyr.image_width(),
            link.image_height,
            link.image_width
        )));
    }

    let mut ch_rng = derive_rng(seed, frame, Role::Channel);
    let ch = draw_channel(link.n_antennas, snr_db, &mut ch_rng);
    let snrs = equivalent_snrs(&ch);

    let fused = hff_forward(pyr, bundle)?;
    let encoded = mce_forward(&fused, &snrs, bundle, mce_cfg)?;
    let compressed = fc_compress(&encoded, bundle, link.feature_channels)?;

    let (received, frame_report) = transport_frame(&compressed, &ch, link, seed, frame)?;

    let decompressed = fc_decompress(&received, bundle)?;
    let decoded = mcd_forward(&decompressed, &snrs, bundle, mce_cfg)?;
    let reconstructed = hfs_forward(&decoded, bundle)?;

    let per_level_mse = pyramid_mse(pyr, &reconstructed)?;
    let distortion = DistortionReport {
        per_level_mse,
        total_mse: per_level_mse.iter().sum(),
        w_stats: frame_report.w_stats,
        per_stream_ber: frame_report.per_stream_ber.clone(),
        cr: frame_report.cr,
    };
    Ok(TransmitOutcome {
        reconstructed,
        distortion,
        frame: frame_report,
        channel: ch,
    })
}
