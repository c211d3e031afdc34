//! Monte Carlo BER estimation, feature-distortion metrics, and sweeps.
//!
//! BER cells repeatedly draw fresh block-fading realizations (1024 QPSK
//! columns per draw), push uniform random frames through precode → transmit
//! → combine → demodulate, and accumulate per-stream errors. Reports carry
//! both the binomial 95% half-width and the fading-ensemble standard error
//! (per-frame BER variance across channel draws), which is the meaningful
//! uncertainty under block fading.

use nalgebra::Complex;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::baseband::WStats;
use crate::channel::{combine, draw_channel, precode, transmit, ComplexMatrix};
use crate::neuro::tensor::FeaturePyramid;
use crate::rng::{derive_rng, derive_rng_labeled, Role};
use crate::Result;

/// QPSK columns sent per channel draw (the block-fading "one image" analog).
pub const COLUMNS_PER_FRAME: usize = 1024;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BerReport {
    pub n_antennas: usize,
    pub snr_db: f64,
    pub per_stream_ber: Vec<f64>,
    pub avg_ber: f64,
    pub bits_per_stream: u64,
    /// Channel draws (frames).
    pub trials: u64,
    /// 1.96·√(p(1−p)/bits), binomial normal approximation per stream.
    pub ci95_halfwidth: Vec<f64>,
    /// √(Var_frames(per-frame BER)/frames): standard error over the fading
    /// ensemble, the dominant uncertainty under block fading.
    pub ensemble_se: Vec<f64>,
}

/// Closed-form average BER of Gray-mapped QPSK over a unit-power Rayleigh
/// channel: 0.5·(1 − √((γ̄/2)/(1 + γ̄/2))) with γ̄ = 10^(SNR/10).
pub fn rayleigh_qpsk_ber(snr_db: f64) -> f64 {
    let gamma_b = 10f64.powf(snr_db / 10.0) / 2.0;
    0.5 * (1.0 - (gamma_b / (1.0 + gamma_b)).sqrt())
}

/// Monte Carlo per-stream BER at one (N, SNR) cell.
///
/// Runs whole frames until every stream has at least `bits_target` bits.
pub fn estimate_ber(n: usize, snr_db: f64, bits_target: u64, master_seed: u64) -> BerReport {
    assert!(bits_target >= 1, "bits_target must be positive");
    let bits_per_frame = (2 * COLUMNS_PER_FRAME) as u64;
    let frames = bits_target.div_ceil(bits_per_frame);
    let k = COLUMNS_PER_FRAME;

    let mut errors = vec![0u64; n];
    let mut frame_ber_sum = vec![0f64; n];
    let mut frame_ber_sq = vec![0f64; n];
    let scale = 1.0 / (2.0 * n as f64).sqrt();

    let mut bits = vec![0u8; n * k * 2];
    for frame in 0..frames {
        let mut ch_rng = derive_rng(master_seed, frame, Role::Channel);
        let mut data_rng = derive_rng(master_seed, frame, Role::Data);
        let mut noise_rng = derive_rng(master_seed, frame, Role::Noise);

        let ch = draw_channel(n, snr_db, &mut ch_rng);
        rand::RngCore::fill_bytes(&mut data_rng, &mut bits);
        for b in bits.iter_mut() {
            *b &= 1;
        }
        let xp = ComplexMatrix::from_fn(n, k, |i, j| {
            let bi = bits[(i * k + j) * 2] as f64;
            let bq = bits[(i * k + j) * 2 + 1] as f64;
            Complex::new((1.0 - 2.0 * bi) * scale, (1.0 - 2.0 * bq) * scale)
        });
        let x = precode(&xp, &ch).expect("dims fixed");
        let y = transmit(&x, &ch, &mut noise_rng).expect("dims fixed");
        let ypr = combine(&y, &ch).expect("dims fixed");

        for i in 0..n {
            let mut frame_errors = 0u64;
            for j in 0..k {
                let z = ypr[(i, j)];
                let bi = u8::from(z.re < 0.0);
                let bq = u8::from(z.im < 0.0);
                frame_errors += u64::from(bi != bits[(i * k + j) * 2]);
                frame_errors += u64::from(bq != bits[(i * k + j) * 2 + 1]);
            }
            errors[i] += frame_errors;
            let fber = frame_errors as f64 / bits_per_frame as f64;
            frame_ber_sum[i] += fber;
            frame_ber_sq[i] += fber * fber;
        }
    }

    let bits_per_stream = frames * bits_per_frame;
    let per_stream_ber: Vec<f64> = errors
        .iter()
        .map(|&e| e as f64 / bits_per_stream as f64)
        .collect();
    let avg_ber = per_stream_ber.iter().sum::<f64>() / n as f64;
    let ci95_halfwidth = per_stream_ber
        .iter()
        .map(|&p| 1.96 * (p * (1.0 - p) / bits_per_stream as f64).sqrt())
        .collect();
    let ensemble_se = (0..n)
        .map(|i| {
            let f = frames as f64;
            let mean = frame_ber_sum[i] / f;
            let var = (frame_ber_sq[i] / f - mean * mean).max(0.0);
            (var / f).sqrt()
        })
        .collect();
    BerReport {
        n_antennas: n,
        snr_db,
        per_stream_ber,
        avg_ber,
        bits_per_stream,
        trials: frames,
        ci95_halfwidth,
        ensemble_se,
    }
}

/// One cell of a BER sweep grid.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SweepCell {
    pub n: usize,
    pub snr_db: f64,
}

/// Cartesian {n} × {snr} sweep with deterministic per-cell seeding; cell
/// order (and therefore output order) is fixed by the input lists and does
/// not depend on the worker count.
pub fn sweep_ber(
    n_list: &[usize],
    snr_list: &[f64],
    bits_target: u64,
    master_seed: u64,
) -> Vec<BerReport> {
    let cells: Vec<SweepCell> = n_list
        .iter()
        .flat_map(|&n| snr_list.iter().map(move |&snr_db| SweepCell { n, snr_db }))
        .collect();
    cells
        .par_iter()
        .enumerate()
        .map(|(idx, cell)| {
            let seed = cell_seed(master_seed, idx);
            estimate_ber(cell.n, cell.snr_db, bits_target, seed)
        })
        .collect()
}

/// Per-cell master seed derived from (sweep seed, cell index).
pub fn cell_seed(master_seed: u64, cell_index: usize) -> u64 {
    use rand::RngCore;
    derive_rng_labeled(master_seed, &format!("sweep.cell.{cell_index}")).next_u64()
}

/// CSV with fixed columns and formatting (6 significant digits, scientific).
pub fn ber_csv(reports: &[BerReport]) -> String {
    let mut out = String::from("n,snr_db,stream,ber,ci95,bits\n");
    for r in reports {
        for (i, &ber) in r.per_stream_ber.iter().enumerate() {
            out.push_str(&format!(
                "{},{},{},{:.5e},{:.5e},{}\n",
                r.n_antennas,
                r.snr_db,
                i + 1,
                ber,
                r.ci95_halfwidth[i],
                r.bits_per_stream
            ));
        }
    }
    out
}

/// End-to-end feature distortion for one transported pyramid.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DistortionReport {
    /// MSE per pyramid level, P2…P6.
    pub per_level_mse: [f64; 5],
    pub total_mse: f64,
    pub w_stats: WStats,
    pub per_stream_ber: Vec<f64>,
    pub cr: f64,
}

/// Per-level mean squared difference; total is the sum over P2…P6.
pub fn pyramid_mse(tx: &FeaturePyramid, rx: &FeaturePyramid) -> Result<[f64; 5]> {
    let mut per_level = [0.0f64; 5];
    for (i, (a, b)) in tx.levels().iter().zip(rx.levels().iter()).enumerate() {
        if a.channels != b.channels || a.height != b.height || a.width != b.width {
            return Err(crate::error::Error::dim(format!(
                "pyramid level {} shape mismatch",
                i + 2
            )));
        }
        let sum: f64 = a
            .data
            .iter()
            .zip(b.data.iter())
            .map(|(&x, &y)| {
                let d = x as f64 - y as f64;
                d * d
            })
            .sum();
        per_level[i] = sum / a.len() as f64;
    }
    Ok(per_level)
}
