//! Digital feature transport.
//!
//! Maps a compressed C×h×w feature to N data streams, applies tanh, m-bit
//! midrise quantization on [−1, 1], MSB-first bit packing (natural or Gray
//! index coding), Gray-quadrant QPSK modulation with per-column power 1,
//! and the receive chain back to a dequantized feature map. The end-to-end
//! `transport_frame` runs the whole chain over one channel realization and
//! reports per-stream bit errors and the equivalent noise statistics.

use nalgebra::Complex;
use serde::{Deserialize, Serialize};

use crate::channel::{
    combine, equivalent_snrs, precode, transmit, ChannelRealization, ComplexMatrix, C64,
};
use crate::error::Error;
use crate::neuro::tensor::FeatureMap;
use crate::rng::{derive_rng, Role};
use crate::Result;

/// How quantization indices map to bits.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BitCoding {
    #[default]
    Natural,
    Gray,
}

/// Link parameters shared by the baseband chain.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LinkConfig {
    pub n_antennas: usize,
    /// Quantizer resolution m (bits per feature value).
    pub quant_bits: u32,
    /// Compressed feature channel count C.
    pub feature_channels: usize,
    pub image_height: usize,
    pub image_width: usize,
    /// Singular values below this are treated as degenerate sub-channels.
    pub eps_singular: f64,
    #[serde(default)]
    pub bit_coding: BitCoding,
}

impl LinkConfig {
    pub fn validate(&self) -> Result<()> {
        if self.n_antennas == 0 {
            return Err(Error::config("n_antennas must be >= 1"));
        }
        if self.quant_bits == 0 || self.quant_bits > 16 {
            return Err(Error::config("quant_bits must be in 1..=16"));
        }
        if self.image_height == 0
            || self.image_width == 0
            || self.image_height % 64 != 0
            || self.image_width % 64 != 0
        {
            return Err(Error::config(format!(
                "image dims {}x{} must be divisible by 64",
                self.image_height, self.image_width
            )));
        }
        if self.feature_channels == 0 || self.feature_channels % self.n_antennas != 0 {
            return Err(Error::config(format!(
                "feature_channels {} must be divisible by n_antennas {}",
                self.feature_channels, self.n_antennas
            )));
        }
        if !(self.eps_singular > 0.0) {
            return Err(Error::config("eps_singular must be positive"));
        }
        Ok(())
    }

    /// Values per stream: L = C·H·W/(256·N).
    pub fn stream_len(&self) -> usize {
        self.feature_channels * self.image_height * self.image_width / (256 * self.n_antennas)
    }

    /// Spatial dims of the compressed feature (stride 16).
    pub fn feature_dims(&self) -> (usize, usize) {
        (self.image_height / 16, self.image_width / 16)
    }
}

/// N equal-length bit sequences plus the shared padding length.
#[derive(Debug, Clone, PartialEq)]
pub struct BitStreams {
    pub streams: Vec<Vec<u8>>,
    pub padding_bits: usize,
}

impl BitStreams {
    pub fn stream_len(&self) -> usize {
        self.streams.first().map_or(0, |s| s.len())
    }
}

/// N×L stream-mapped values (row-major, stream-major).
#[derive(Debug, Clone, PartialEq)]
pub struct StreamTensor {
    pub n: usize,
    pub len: usize,
    pub values: Vec<f64>,
}

impl StreamTensor {
    pub fn stream(&self, i: usize) -> &[f64] {
        &self.values[i * self.len..(i + 1) * self.len]
    }
}

/// Split the C channels into N sequential groups and flatten each group
/// channel-major then row-major; stream i holds channels [i·C/N, (i+1)·C/N).
pub fn map_to_streams(p_c: &FeatureMap, cfg: &LinkConfig) -> Result<StreamTensor> {
    cfg.validate()?;
    let (fh, fw) = cfg.feature_dims();
    if p_c.channels != cfg.feature_channels || p_c.height != fh || p_c.width != fw {
        return Err(Error::dim(format!(
            "feature {}x{}x{}, config expects {}x{}x{}",
            p_c.channels, p_c.height, p_c.width, cfg.feature_channels, fh, fw
        )));
    }
    let l = cfg.stream_len();
    // channel-major storage means each stream is a contiguous slice
    let values = p_c.data.iter().map(|&v| v as f64).collect();
    Ok(StreamTensor { n: cfg.n_antennas, len: l, values })
}

/// Exact inverse of `map_to_streams`.
pub fn unmap_from_streams(s: &StreamTensor, cfg: &LinkConfig) -> Result<FeatureMap> {
    let (fh, fw) = cfg.feature_dims();
    if s.n != cfg.n_antennas || s.len != cfg.stream_len() {
        return Err(Error::dim(format!(
            "stream tensor {}x{}, config expects {}x{}",
            s.n,
            s.len,
            cfg.n_antennas,
            cfg.stream_len()
        )));
    }
    let data = s.values.iter().map(|&v| v as f32).collect();
    FeatureMap::from_vec(cfg.feature_channels, fh, fw, data)
}

/// Elementwise tanh.
pub fn activate(s: &StreamTensor) -> StreamTensor {
    StreamTensor {
        n: s.n,
        len: s.len,
        values: s.values.iter().map(|v| v.tanh()).collect(),
    }
}

/// Uniform midrise quantizer on [−1, 1]: Δ = 2/2^m,
/// index = clamp(⌊(x+1)/Δ⌋, 0, 2^m−1).
pub fn quantize(x: f64, m: u32) -> Result<u32> {
    if !x.is_finite() {
        return Err(Error::NonFinite(format!("quantize({x})")));
    }
    let levels = 1u32 << m;
    let delta = 2.0 / levels as f64;
    let idx = ((x + 1.0) / delta).floor();
    Ok(idx.clamp(0.0, (levels - 1) as f64) as u32)
}

/// Cell-midpoint reconstruction: −1 + (index + 0.5)·Δ.
pub fn dequantize(index: u32, m: u32) -> f64 {
    let levels = 1u64 << m;
    let delta = 2.0 / levels as f64;
    -1.0 + (index as f64 + 0.5) * delta
}

/// Quantizer step Δ = 2^(1−m).
pub fn quant_step(m: u32) -> f64 {
    2.0 / (1u64 << m) as f64
}

#[inline]
fn gray_encode(n: u32) -> u32 {
    n ^ (n >> 1)
}

#[inline]
fn gray_decode(mut g: u32) -> u32 {
    let mut n = g;
    while g > 0 {
        g >>= 1;
        n ^= g;
    }
    n
}

/// Emit m bits per index, MSB-first, under the selected index coding. If
/// m·L is odd a single trailing zero bit pads each stream to even length.
pub fn pack_bits(indices: &[Vec<u32>], m: u32, coding: BitCoding) -> Result<BitStreams> {
    let l = indices.first().map_or(0, |s| s.len());
    if indices.iter().any(|s| s.len() != l) {
        return Err(Error::dim("pack_bits: unequal stream lengths".to_string()));
    }
    let padding_bits = (m as usize * l) % 2;
    let mut streams = Vec::with_capacity(indices.len());
    for idxs in indices {
        let mut bits = Vec::with_capacity(m as usize * l + padding_bits);
        for &idx in idxs {
            let code = match coding {
                BitCoding::Natural => idx,
                BitCoding::Gray => gray_encode(idx),
            };
            for b in (0..m).rev() {
                bits.push(((code >> b) & 1) as u8);
            }
        }
        bits.extend(std::iter::repeat(0u8).take(padding_bits));
        streams.push(bits);
    }
    Ok(BitStreams { streams, padding_bits })
}

/// Inverse of `pack_bits`; `count` is the index count per stream, used to
/// strip the recorded padding.
pub fn unpack_bits(bs: &BitStreams, m: u32, coding: BitCoding, count: usize) -> Result<Vec<Vec<u32>>> {
    let need = m as usize * count + bs.padding_bits;
    let mut out = Vec::with_capacity(bs.streams.len());
    for bits in &bs.streams {
        if bits.len() != need {
            return Err(Error::dim(format!(
                "unpack_bits: stream length {} != {need}",
                bits.len()
            )));
        }
        let mut idxs = Vec::with_capacity(count);
        for chunk in bits[..m as usize * count].chunks_exact(m as usize) {
            let mut code = 0u32;
            for &b in chunk {
                code = (code << 1) | b as u32;
            }
            idxs.push(match coding {
                BitCoding::Natural => code,
                BitCoding::Gray => gray_decode(code),
            });
        }
        out.push(idxs);
    }
    Ok(out)
}

/// Gray-quadrant QPSK: bit pair (b_I, b_Q) → ((1−2b_I) + j(1−2b_Q))/√2,
/// scaled by 1/√N so every column of X′ has unit energy.
pub fn qpsk_modulate(bits: &BitStreams) -> Result<ComplexMatrix> {
    let n = bits.streams.len();
    let len = bits.stream_len();
    if n == 0 {
        return Err(Error::dim("qpsk_modulate: no streams".to_string()));
    }
    if len % 2 != 0 || bits.streams.iter().any(|s| s.len() != len) {
        return Err(Error::dim("qpsk_modulate: streams must share an even length".to_string()));
    }
    let k = len / 2;
    let scale = 1.0 / (2.0 * n as f64).sqrt();
    let mut x = ComplexMatrix::zeros(n, k);
    for (i, s) in bits.streams.iter().enumerate() {
        for j in 0..k {
            let bi = s[2 * j] as f64;
            let bq = s[2 * j + 1] as f64;
            x[(i, j)] = Complex::new((1.0 - 2.0 * bi) * scale, (1.0 - 2.0 * bq) * scale);
        }
    }
    Ok(x)
}

/// Hard-decision demodulation on the combined (post-Uᴴ) symbols: b_I =
/// (Re < 0), b_Q = (Im < 0); exact zeros decide bit 0. Positive 1/λ scaling
/// cannot change quadrants, so degenerate rows (λ < eps) use the same rule
/// on what is then pure noise.
pub fn qpsk_demodulate(yp: &ComplexMatrix, ch: &ChannelRealization, _eps: f64) -> BitStreams {
    let n = yp.nrows();
    let k = yp.ncols();
    debug_assert_eq!(n, ch.n_antennas);
    let mut streams = Vec::with_capacity(n);
    for i in 0..n {
        let mut bits = Vec::with_capacity(2 * k);
        for j in 0..k {
            let z: C64 = yp[(i, j)];
            bits.push(u8::from(z.re < 0.0));
            bits.push(u8::from(z.im < 0.0));
        }
        streams.push(bits);
    }
    BitStreams { streams, padding_bits: 0 }
}

/// CR = m·C/6144 as an exact reduced rational.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Ratio {
    pub num: u64,
    pub den: u64,
}

impl Ratio {
    pub fn new(num: u64, den: u64) -> Self {
        let g = gcd(num.max(1), den);
        Ratio { num: num / g, den: den / g }
    }

    pub fn as_f64(&self) -> f64 {
        self.num as f64 / self.den as f64
    }
}

fn gcd(a: u64, b: u64) -> u64 {
    if b == 0 { a } else { gcd(b, a % b) }
}

pub fn compression_ratio(cfg: &LinkConfig) -> Ratio {
    Ratio::new(cfg.quant_bits as u64 * cfg.feature_channels as u64, 6144)
}

/// Statistics of the equivalent noise W (receive minus transmit, in the
/// tanh domain).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct WStats {
    pub max_abs: f64,
    pub mean: f64,
    pub variance: f64,
}

/// Per-frame transport report.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FrameReport {
    pub per_stream_ber: Vec<f64>,
    pub bit_errors: Vec<u64>,
    /// Payload bits per stream (padding excluded).
    pub bits_sent: u64,
    pub padding_bits: usize,
    pub degenerate_streams: Vec<bool>,
    pub equivalent_snrs_db: Vec<f64>,
    pub cr: f64,
    pub w_stats: WStats,
}

fn w_stats(tx: &[f64], rx: &[f64]) -> WStats {
    let mut max_abs = 0.0f64;
    let mut sum = 0.0f64;
    let mut sq = 0.0f64;
    for (&a, &b) in tx.iter().zip(rx.iter()) {
        let w = b - a;
        max_abs = max_abs.max(w.abs());
        sum += w;
        sq += w * w;
    }
    let n = tx.len() as f64;
    let mean = sum / n;
    WStats { max_abs, mean, variance: sq / n - mean * mean }
}

/// Full digital transport of one compressed feature over one channel
/// realization: map → tanh → quantize → pack → QPSK → precode → transmit →
/// combine → demodulate → unpack → dequantize → unmap.
///
/// The returned feature map lives in the tanh domain (the receiver does not
/// invert the activation). Noise is drawn from the (master_seed, frame,
/// Noise) substream.
pub fn transport_frame(
    p_c: &FeatureMap,
    ch: &ChannelRealization,
    cfg: &LinkConfig,
    master_seed: u64,
    frame: u64,
) -> Result<(FeatureMap, FrameReport)> {
    cfg.validate()?;
    if ch.n_antennas != cfg.n_antennas {
        return Err(Error::dim(format!(
            "channel has {} antennas, config {}",
            ch.n_antennas, cfg.n_antennas
        )));
    }
    let m = cfg.quant_bits;
    let l = cfg.stream_len();

    let streams = map_to_streams(p_c, cfg)?;
    let activated = activate(&streams);
    let mut indices = Vec::with_capacity(cfg.n_antennas);
    for i in 0..cfg.n_antennas {
        let idxs: Result<Vec<u32>> = activated.stream(i).iter().map(|&v| quantize(v, m)).collect();
        indices.push(idxs?);
    }
    let tx_bits = pack_bits(&indices, m, cfg.bit_coding)?;

    let xp = qpsk_modulate(&tx_bits)?;
    let x = precode(&xp, ch)?;
    let mut noise_rng = derive_rng(master_seed, frame, Role::Noise);
    let y = transmit(&x, ch, &mut noise_rng)?;
    let ypr = combine(&y, ch)?;
    let rx_bits_raw = qpsk_demodulate(&ypr, ch, cfg.eps_singular);
    let rx_bits = BitStreams {
        streams: rx_bits_raw.streams,
        padding_bits: tx_bits.padding_bits,
    };

    let payload = m as usize * l;
    let mut bit_errors = vec![0u64; cfg.n_antennas];
    for i in 0..cfg.n_antennas {
        bit_errors[i] = tx_bits.streams[i][..payload]
            .iter()
            .zip(rx_bits.streams[i][..payload].iter())
            .filter(|(a, b)| a != b)
            .count() as u64;
    }

    let rx_indices = unpack_bits(&rx_bits, m, cfg.bit_coding, l)?;
    let mut rx_values = Vec::with_capacity(cfg.n_antennas * l);
    for idxs in &rx_indices {
        rx_values.extend(idxs.iter().map(|&i| dequantize(i, m)));
    }
    let rx_streams = StreamTensor { n: cfg.n_antennas, len: l, values: rx_values };
    let received = unmap_from_streams(&rx_streams, cfg)?;

    let degenerate: Vec<bool> = ch.sigma.iter().map(|&s| s < cfg.eps_singular).collect();
    let report = FrameReport {
        per_stream_ber: bit_errors.iter().map(|&e| e as f64 / payload as f64).collect(),
        bit_errors,
        bits_sent: payload as u64,
        padding_bits: tx_bits.padding_bits,
        degenerate_streams: degenerate,
        equivalent_snrs_db: equivalent_snrs(ch).values_db,
        cr: compression_ratio(cfg).as_f64(),
        w_stats: w_stats(&activated.values, &rx_streams.values),
    };
    Ok((received, report))
}
