//! Closed-loop MIMO channel model.
//!
//! Rayleigh block fading with statistical power normalization (entry variance
//! 1/N so E[‖HXᵢ‖²] = ‖Xᵢ‖²), full complex SVD H = UΣVᴴ, SVD
//! precoding/combining, diagonal equalization, and per-sub-channel equivalent
//! SNR. All operations are pure given their inputs and RNG stream.

use nalgebra::{Complex, DMatrix};
use rand::Rng;
use rand_distr::StandardNormal;

use crate::error::Error;
use crate::Result;

pub type C64 = Complex<f64>;
pub type ComplexMatrix = DMatrix<C64>;

/// Sub-channels with singular value below this gain report the sentinel
/// equivalent SNR instead of −∞.
pub const SNR_DB_FLOOR: f64 = -300.0;

/// Default threshold below which a sub-channel is treated as degenerate.
pub const DEFAULT_EPS_SINGULAR: f64 = 1e-12;

/// One block-fading channel draw together with its SVD and noise level.
///
/// Held constant for an entire frame. `noise_var` is the total complex
/// variance per receive antenna (σ²/2 per I/Q dimension), fixed by the link
/// SNR through σ_n² = 10^(−snr_db/10)/N for unit per-column symbol energy.
#[derive(Debug, Clone)]
pub struct ChannelRealization {
    pub n_antennas: usize,
    pub h: ComplexMatrix,
    pub u: ComplexMatrix,
    /// Singular values λ₁ ≥ … ≥ λ_N ≥ 0.
    pub sigma: Vec<f64>,
    pub v: ComplexMatrix,
    pub noise_var: f64,
    pub snr_db: f64,
}

/// Equivalent per-sub-channel SNRs in dB, non-increasing.
#[derive(Debug, Clone, PartialEq)]
pub struct EquivalentSnrVector {
    pub values_db: Vec<f64>,
}

/// Equalized symbols plus per-row degeneracy flags. Rows whose singular
/// value fell below the equalization threshold are zeroed, not divided.
#[derive(Debug, Clone)]
pub struct EqualizedFrame {
    pub symbols: ComplexMatrix,
    pub degenerate: Vec<bool>,
}

fn complex_gaussian(rng: &mut impl Rng, std_per_dim: f64) -> C64 {
    let re: f64 = rng.sample(StandardNormal);
    let im: f64 = rng.sample(StandardNormal);
    C64::new(re * std_per_dim, im * std_per_dim)
}

/// Noise variance implied by the link SNR for unit symbol energy:
/// σ_n² = 10^(−snr_db/10)/N.
pub fn noise_var_for_snr(n: usize, snr_db: f64) -> f64 {
    10f64.powf(-snr_db / 10.0) / n as f64
}

/// Draw one Rayleigh block-fading realization with its SVD.
///
/// Entries are i.i.d. circularly-symmetric complex Gaussian with variance
/// 1/N per complex entry, which realizes E[‖HXᵢ‖²] = ‖Xᵢ‖² in expectation
/// over the ensemble.
pub fn draw_channel(n: usize, snr_db: f64, rng: &mut impl Rng) -> ChannelRealization {
    assert!(n >= 1, "antenna count must be >= 1");
    assert!(snr_db.is_finite(), "snr_db must be finite");
    let std_per_dim = (1.0 / (2.0 * n as f64)).sqrt();
    let h = ComplexMatrix::from_fn(n, n, |_, _| complex_gaussian(rng, std_per_dim));
    let svd = h.clone().svd(true, true);
    let u = svd.u.expect("svd with u requested");
    let v_t = svd.v_t.expect("svd with v_t requested");
    let sigma: Vec<f64> = svd.singular_values.iter().copied().collect();
    ChannelRealization {
        n_antennas: n,
        h,
        u,
        sigma,
        v: v_t.adjoint(),
        noise_var: noise_var_for_snr(n, snr_db),
        snr_db,
    }
}

/// Equivalent SNR of sub-channel i: 10·log10(λᵢ²·E_s/(N·σ_n²)) with E_s = 1.
/// Zero singular values map to the −300 dB sentinel.
pub fn equivalent_snrs(ch: &ChannelRealization) -> EquivalentSnrVector {
    let n = ch.n_antennas as f64;
    let values_db = ch
        .sigma
        .iter()
        .map(|&lambda| {
            let lin = lambda * lambda / (n * ch.noise_var);
            if lin > 0.0 {
                (10.0 * lin.log10()).max(SNR_DB_FLOOR)
            } else {
                SNR_DB_FLOOR
            }
        })
        .collect();
    EquivalentSnrVector { values_db }
}

/// X = V·X′. Unitary, so per-column energy is preserved.
pub fn precode(xp: &ComplexMatrix, ch: &ChannelRealization) -> Result<ComplexMatrix> {
    if xp.nrows() != ch.n_antennas {
        return Err(Error::dim(format!(
            "precode: expected {} rows, got {}",
            ch.n_antennas,
            xp.nrows()
        )));
    }
    Ok(&ch.v * xp)
}

/// Y = H·X + N with i.i.d. circularly-symmetric complex Gaussian noise of
/// total variance σ_n² per entry.
pub fn transmit(x: &ComplexMatrix, ch: &ChannelRealization, rng: &mut impl Rng) -> Result<ComplexMatrix> {
    if x.nrows() != ch.n_antennas {
        return Err(Error::dim(format!(
            "transmit: expected {} rows, got {}",
            ch.n_antennas,
            x.nrows()
        )));
    }
    let mut y = &ch.h * x;
    let std_per_dim = (ch.noise_var / 2.0).sqrt();
    if std_per_dim > 0.0 {
        for e in y.iter_mut() {
            *e += complex_gaussian(rng, std_per_dim);
        }
    }
    Ok(y)
}

/// Y′ = Uᴴ·Y. N′ = UᴴN keeps the noise distribution (U unitary).
pub fn combine(y: &ComplexMatrix, ch: &ChannelRealization) -> Result<ComplexMatrix> {
    if y.nrows() != ch.n_antennas {
        return Err(Error::dim(format!(
            "combine: expected {} rows, got {}",
            ch.n_antennas,
            y.nrows()
        )));
    }
    Ok(ch.u.adjoint() * y)
}

/// Diagonal equalization: row i scaled by 1/λᵢ when λᵢ ≥ eps; rows below
/// eps are zeroed and flagged degenerate.
pub fn equalize(yp: &ComplexMatrix, ch: &ChannelRealization, eps: f64) -> Result<EqualizedFrame> {
    if yp.nrows() != ch.n_antennas {
        return Err(Error::dim(format!(
            "equalize: expected {} rows, got {}",
            ch.n_antennas,
            yp.nrows()
        )));
    }
    assert!(eps > 0.0, "eps must be positive");
    let mut symbols = yp.clone();
    let mut degenerate = vec![false; ch.n_antennas];
    for (i, &lambda) in ch.sigma.iter().enumerate() {
        if lambda >= eps {
            let inv = C64::new(1.0 / lambda, 0.0);
            for j in 0..symbols.ncols() {
                symbols[(i, j)] *= inv;
            }
        } else {
            degenerate[i] = true;
            for j in 0..symbols.ncols() {
                symbols[(i, j)] = C64::new(0.0, 0.0);
            }
        }
    }
    Ok(EqualizedFrame { symbols, degenerate })
}
