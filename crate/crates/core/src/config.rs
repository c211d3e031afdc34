//! Run configuration for the CLI: a single JSON document with defaults
//! matching the reference model settings; unknown keys are rejected and CLI
//! flags override file values.

use std::path::PathBuf;

use serde::{Deserialize, Serialize};

use crate::baseband::{BitCoding, LinkConfig};
use crate::error::Error;
use crate::neuro::weights::ArchConfig;
use crate::Result;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RunConfig {
    pub seed: u64,
    /// Antennas for single-run commands.
    pub n_antennas: usize,
    pub quant_bits: u32,
    pub feature_channels: usize,
    pub image_height: usize,
    pub image_width: usize,
    pub eps_singular: f64,
    pub bit_coding: BitCoding,
    /// Stacked MCE/MCD blocks (N_m).
    pub mce_depth: usize,
    /// SNR for single-run commands (dB).
    pub snr_db: f64,
    /// Sweep grids.
    pub snr_list: Vec<f64>,
    pub n_list: Vec<usize>,
    pub m_list: Vec<u32>,
    pub c_list: Vec<usize>,
    /// Minimum bits per stream per BER cell.
    pub bits_target: u64,
    pub weights_path: Option<PathBuf>,
    pub pyramid_path: Option<PathBuf>,
    pub output_dir: Option<PathBuf>,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            seed: 1,
            n_antennas: 2,
            quant_bits: 4,
            feature_channels: 48,
            // desk-scale default; larger sizes are supported
            image_height: 256,
            image_width: 128,
            eps_singular: 1e-12,
            bit_coding: BitCoding::Natural,
            mce_depth: 6,
            snr_db: 10.0,
            snr_list: vec![-5.0, 0.0, 5.0, 10.0, 15.0],
            n_list: vec![1, 2, 4],
            m_list: vec![2, 4, 8],
            c_list: vec![24, 48, 96],
            bits_target: 10_000_000,
            weights_path: None,
            pyramid_path: None,
            output_dir: None,
        }
    }
}

impl RunConfig {
    pub fn load(path: &std::path::Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        let cfg: RunConfig = serde_json::from_str(&text)
            .map_err(|e| Error::config(format!("{}: {e}", path.display())))?;
        cfg.validate()?;
        Ok(cfg)
    }

    /// Validate every field and every grid value before any work starts.
    pub fn validate(&self) -> Result<()> {
        self.link_config().validate()?;
        self.arch_config().validate()?;
        if !self.snr_db.is_finite() {
            return Err(Error::config("snr_db must be finite"));
        }
        if self.n_list.is_empty() && self.snr_list.is_empty() {
            // an empty grid is allowed (empty sweep), but individual values
            // must still be valid below
        }
        for &n in &self.n_list {
            if n == 0 {
                return Err(Error::config("n_list values must be >= 1"));
            }
        }
        for &snr in &self.snr_list {
            if !snr.is_finite() {
                return Err(Error::config("snr_list values must be finite"));
            }
        }
        for &m in &self.m_list {
            if m == 0 || m > 16 {
                return Err(Error::config("m_list values must be in 1..=16"));
            }
        }
        for &c in &self.c_list {
            if c == 0 {
                return Err(Error::config("c_list values must be >= 1"));
            }
        }
        if self.bits_target < 10_000 {
            return Err(Error::config("bits_target must be >= 10^4"));
        }
        Ok(())
    }

    pub fn link_config(&self) -> LinkConfig {
        LinkConfig {
            n_antennas: self.n_antennas,
            quant_bits: self.quant_bits,
            feature_channels: self.feature_channels,
            image_height: self.image_height,
            image_width: self.image_width,
            eps_singular: self.eps_singular,
            bit_coding: self.bit_coding,
        }
    }

    pub fn arch_config(&self) -> ArchConfig {
        ArchConfig {
            n_antennas: self.n_antennas,
            mce_depth: self.mce_depth,
            compressed_channels: self.feature_channels,
        }
    }
}
