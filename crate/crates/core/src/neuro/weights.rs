//! Named-tensor weight bundle and its manifest+blob container format.
//!
//! A container file is `[u32 LE manifest length][manifest JSON][f32 LE blob]`.
//! The manifest carries a magic string, a format version, tensor names,
//! shapes, blob byte offsets, and a SHA-256 checksum of the blob. The same
//! container is reused for feature-pyramid files (level names `p2`…`p6`).

use std::collections::BTreeMap;
use std::io::{Read, Write};
use std::path::Path;

use rand::Rng;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::Error;
use crate::neuro::tensor::{FeatureMap, FeaturePyramid, TensorEntry, PYRAMID_CHANNELS};
use crate::rng::derive_rng_labeled;
use crate::Result;

pub const WEIGHTS_MAGIC: &str = "mimolink-weights";
pub const PYRAMID_MAGIC: &str = "mimolink-pyramid";
pub const CONTAINER_VERSION: u32 = 1;

/// A named dense tensor, f32 row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct Tensor {
    pub shape: Vec<usize>,
    pub data: Vec<f32>,
}

impl Tensor {
    pub fn zeros(shape: Vec<usize>) -> Self {
        let n = shape.iter().product();
        Tensor { shape, data: vec![0.0; n] }
    }

    pub fn filled(shape: Vec<usize>, v: f32) -> Self {
        let n = shape.iter().product();
        Tensor { shape, data: vec![v; n] }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
struct Manifest {
    magic: String,
    version: u32,
    dtype: String,
    tensors: Vec<TensorEntry>,
    /// SHA-256 of the raw blob, hex.
    checksum: String,
}

/// Immutable container of named tensors.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct WeightBundle {
    tensors: BTreeMap<String, Tensor>,
}

impl WeightBundle {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn insert(&mut self, name: impl Into<String>, t: Tensor) {
        self.tensors.insert(name.into(), t);
    }

    pub fn names(&self) -> impl Iterator<Item = &str> {
        self.tensors.keys().map(|s| s.as_str())
    }

    pub fn len(&self) -> usize {
        self.tensors.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tensors.is_empty()
    }

    /// Fetch a tensor, checking its exact shape.
    pub fn get(&self, name: &str, shape: &[usize]) -> Result<&Tensor> {
        let t = self
            .tensors
            .get(name)
            .ok_or_else(|| Error::WeightBundle(format!("missing tensor '{name}'")))?;
        if t.shape != shape {
            return Err(Error::WeightBundle(format!(
                "tensor '{name}' has shape {:?}, expected {:?}",
                t.shape, shape
            )));
        }
        Ok(t)
    }

    /// Flat data of a tensor with shape checking.
    pub fn slice(&self, name: &str, shape: &[usize]) -> Result<&[f32]> {
        Ok(&self.get(name, shape)?.data)
    }

    /// SHA-256 over the serialized (sorted-name) content. Stable across
    /// platforms for identical values.
    pub fn checksum(&self) -> String {
        let mut hasher = Sha256::new();
        for (name, t) in &self.tensors {
            hasher.update(name.as_bytes());
            hasher.update([0u8]);
            for d in &t.shape {
                hasher.update((*d as u64).to_le_bytes());
            }
            for v in &t.data {
                hasher.update(v.to_le_bytes());
            }
        }
        hex::encode(hasher.finalize())
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let entries: Vec<(&str, &[usize], &[f32])> = self
            .tensors
            .iter()
            .map(|(n, t)| (n.as_str(), t.shape.as_slice(), t.data.as_slice()))
            .collect();
        write_container(path, WEIGHTS_MAGIC, &entries)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let tensors = read_container(path, WEIGHTS_MAGIC)?;
        Ok(WeightBundle { tensors })
    }
}

pub fn write_container(path: &Path, magic: &str, entries: &[(&str, &[usize], &[f32])]) -> Result<()> {
    let mut blob: Vec<u8> = Vec::new();
    let mut manifest_entries = Vec::with_capacity(entries.len());
    for (name, shape, data) in entries {
        let expected: usize = shape.iter().product();
        if data.len() != expected {
            return Err(Error::Container(format!(
                "tensor '{name}': {} values, shape {:?}",
                data.len(),
                shape
            )));
        }
        manifest_entries.push(TensorEntry {
            name: name.to_string(),
            shape: shape.to_vec(),
            offset: blob.len() as u64,
        });
        for v in *data {
            blob.extend_from_slice(&v.to_le_bytes());
        }
    }
    let manifest = Manifest {
        magic: magic.to_string(),
        version: CONTAINER_VERSION,
        dtype: "f32le".to_string(),
        tensors: manifest_entries,
        checksum: hex::encode(Sha256::digest(&blob)),
    };
    let manifest_bytes = serde_json::to_vec(&manifest)?;
    let mut f = std::fs::File::create(path)?;
    f.write_all(&(manifest_bytes.len() as u32).to_le_bytes())?;
    f.write_all(&manifest_bytes)?;
    f.write_all(&blob)?;
    Ok(())
}

pub fn read_container(path: &Path, magic: &str) -> Result<BTreeMap<String, Tensor>> {
    let mut f = std::fs::File::open(path)?;
    let mut len_bytes = [0u8; 4];
    f.read_exact(&mut len_bytes)?;
    let mlen = u32::from_le_bytes(len_bytes) as usize;
    let mut manifest_bytes = vec![0u8; mlen];
    f.read_exact(&mut manifest_bytes)?;
    let manifest: Manifest = serde_json::from_slice(&manifest_bytes)?;
    if manifest.magic != magic {
        return Err(Error::Container(format!(
            "magic '{}', expected '{}'",
            manifest.magic, magic
        )));
    }
    if manifest.version != CONTAINER_VERSION {
        return Err(Error::Container(format!(
            "unsupported container version {}",
            manifest.version
        )));
    }
    if manifest.dtype != "f32le" {
        return Err(Error::Container(format!("unsupported dtype '{}'", manifest.dtype)));
    }
    let mut blob = Vec::new();
    f.read_to_end(&mut blob)?;
    let checksum = hex::encode(Sha256::digest(&blob));
    if checksum != manifest.checksum {
        return Err(Error::Container("blob checksum mismatch".to_string()));
    }
    let mut tensors = BTreeMap::new();
    for e in &manifest.tensors {
        let count: usize = e.shape.iter().product();
        let start = e.offset as usize;
        let end = start + count * 4;
        if end > blob.len() {
            return Err(Error::Container(format!("tensor '{}' exceeds blob", e.name)));
        }
        let data = blob[start..end]
            .chunks_exact(4)
            .map(|b| f32::from_le_bytes([b[0], b[1], b[2], b[3]]))
            .collect();
        tensors.insert(e.name.clone(), Tensor { shape: e.shape.clone(), data });
    }
    Ok(tensors)
}

/// Save/load a feature pyramid with the same container scheme.
pub fn save_pyramid(path: &Path, pyr: &FeaturePyramid) -> Result<()> {
    pyr.validate()?;
    let levels = pyr.levels();
    let shapes: Vec<Vec<usize>> = levels
        .iter()
        .map(|l| vec![l.channels, l.height, l.width])
        .collect();
    let entries: Vec<(&str, &[usize], &[f32])> = levels
        .iter()
        .zip(shapes.iter())
        .zip(["p2", "p3", "p4", "p5", "p6"])
        .map(|((l, s), n)| (n, s.as_slice(), l.data.as_slice()))
        .collect();
    write_container(path, PYRAMID_MAGIC, &entries)
}

pub fn load_pyramid(path: &Path) -> Result<FeaturePyramid> {
    let tensors = read_container(path, PYRAMID_MAGIC)?;
    let level = |name: &str| -> Result<FeatureMap> {
        let t = tensors
            .get(name)
            .ok_or_else(|| Error::Container(format!("missing level '{name}'")))?;
        if t.shape.len() != 3 {
            return Err(Error::Container(format!("level '{name}' rank {}", t.shape.len())));
        }
        FeatureMap::from_vec(t.shape[0], t.shape[1], t.shape[2], t.data.clone())
    };
    let pyr = FeaturePyramid {
        p2: level("p2")?,
        p3: level("p3")?,
        p4: level("p4")?,
        p5: level("p5")?,
        p6: level("p6")?,
    };
    pyr.validate()?;
    Ok(pyr)
}

/// Architecture hyper-parameters that determine the weight manifest.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ArchConfig {
    pub n_antennas: usize,
    /// Number of stacked MCE/MCD blocks (N_m).
    pub mce_depth: usize,
    /// Channel count of the compressed feature (C).
    pub compressed_channels: usize,
}

impl ArchConfig {
    pub fn validate(&self) -> Result<()> {
        if self.n_antennas == 0 || self.mce_depth == 0 || self.compressed_channels == 0 {
            return Err(Error::config("arch dims must be >= 1"));
        }
        if PYRAMID_CHANNELS % self.n_antennas != 0 {
            return Err(Error::config(format!(
                "256 must be divisible by n_antennas = {}",
                self.n_antennas
            )));
        }
        Ok(())
    }

    /// SNR embedding width per sub-channel: 256/N.
    pub fn snr_embed_dim(&self) -> usize {
        PYRAMID_CHANNELS / self.n_antennas
    }
}

pub const SE_REDUCTION: usize = 16;
pub const SNR_MLP_HIDDEN: usize = 32;

fn se_names(prefix: &str, channels: usize, out: &mut Vec<(String, Vec<usize>)>) {
    let mid = channels / SE_REDUCTION;
    out.push((format!("{prefix}.se.fc1.weight"), vec![mid, channels]));
    out.push((format!("{prefix}.se.fc1.bias"), vec![mid]));
    out.push((format!("{prefix}.se.fc2.weight"), vec![channels, mid]));
    out.push((format!("{prefix}.se.fc2.bias"), vec![channels]));
}

fn bn_names(prefix: &str, channels: usize, out: &mut Vec<(String, Vec<usize>)>) {
    for stat in ["mean", "var", "gamma", "beta"] {
        out.push((format!("{prefix}.{stat}"), vec![channels]));
    }
}

/// Every tensor name and shape required by the configured architecture.
pub fn weight_manifest(arch: &ArchConfig) -> Vec<(String, Vec<usize>)> {
    let c = PYRAMID_CHANNELS;
    let mut names = Vec::new();

    // HFF: two stride-2 downsample convs and three fusion blocks.
    for stage in 1..=2 {
        names.push((format!("hff.down{stage}.weight"), vec![c, c, 2, 2]));
        names.push((format!("hff.down{stage}.bias"), vec![c]));
    }
    for stage in 1..=3 {
        let p = format!("hff.fuse{stage}");
        names.push((format!("{p}.conv3.weight"), vec![2 * c, 2 * c, 3, 3]));
        names.push((format!("{p}.conv3.bias"), vec![2 * c]));
        bn_names(&format!("{p}.bn"), 2 * c, &mut names);
        se_names(&p, 2 * c, &mut names);
        names.push((format!("{p}.conv1.weight"), vec![c, 2 * c, 1, 1]));
        names.push((format!("{p}.conv1.bias"), vec![c]));
    }

    // HFS: three split blocks, mirrored layer order (1×1 up, SE, BN, 3×3).
    for stage in 1..=3 {
        let p = format!("hfs.split{stage}");
        names.push((format!("{p}.conv1.weight"), vec![2 * c, c, 1, 1]));
        names.push((format!("{p}.conv1.bias"), vec![2 * c]));
        se_names(&p, 2 * c, &mut names);
        bn_names(&format!("{p}.bn"), 2 * c, &mut names);
        names.push((format!("{p}.conv3.weight"), vec![2 * c, 2 * c, 3, 3]));
        names.push((format!("{p}.conv3.bias"), vec![2 * c]));
    }

    // MCE / MCD stacks.
    let embed = arch.snr_embed_dim();
    for side in ["mce", "mcd"] {
        for b in 0..arch.mce_depth {
            let p = format!("{side}.block{b}");
            names.push((format!("{p}.conv1.weight"), vec![c, c, 1, 1]));
            names.push((format!("{p}.conv1.bias"), vec![c]));
            bn_names(&format!("{p}.bn1"), c, &mut names);
            names.push((format!("{p}.conv3.weight"), vec![c, c, 3, 3]));
            names.push((format!("{p}.conv3.bias"), vec![c]));
            bn_names(&format!("{p}.bn2"), c, &mut names);
            names.push((format!("{p}.snr_mlp.fc1.weight"), vec![SNR_MLP_HIDDEN, 1]));
            names.push((format!("{p}.snr_mlp.fc1.bias"), vec![SNR_MLP_HIDDEN]));
            names.push((format!("{p}.snr_mlp.fc2.weight"), vec![embed, SNR_MLP_HIDDEN]));
            names.push((format!("{p}.snr_mlp.fc2.bias"), vec![embed]));
            names.push((format!("{p}.att.fc1.weight"), vec![c, 2 * c]));
            names.push((format!("{p}.att.fc1.bias"), vec![c]));
            names.push((format!("{p}.att.fc2.weight"), vec![c, c]));
            names.push((format!("{p}.att.fc2.bias"), vec![c]));
        }
    }

    // Channel-adjusting FC layers.
    let cc = arch.compressed_channels;
    names.push(("fc.compress.weight".to_string(), vec![cc, c]));
    names.push(("fc.compress.bias".to_string(), vec![cc]));
    names.push(("fc.decompress.weight".to_string(), vec![c, cc]));
    names.push(("fc.decompress.bias".to_string(), vec![c]));

    names
}

fn fan_in(name: &str, shape: &[usize]) -> Option<usize> {
    if name.ends_with(".weight") {
        match shape.len() {
            4 => Some(shape[1] * shape[2] * shape[3]),
            2 => Some(shape[1]),
            _ => None,
        }
    } else {
        None
    }
}

/// Deterministic fan-in-scaled uniform initialization.
///
/// Conv/FC weights ~ U(−b, b) with b = √(6/fan_in); biases zero; BN stats
/// μ = 0, σ² = 1, γ = 1, β = 0. Each tensor is drawn from an RNG keyed by
/// `(seed, tensor name)`, so the bundle does not depend on iteration order.
pub fn init_weights(seed: u64, arch: &ArchConfig) -> Result<WeightBundle> {
    arch.validate()?;
    let mut bundle = WeightBundle::new();
    for (name, shape) in weight_manifest(arch) {
        let t = if let Some(fin) = fan_in(&name, &shape) {
            let bound = (6.0 / fin as f64).sqrt();
            let mut rng = derive_rng_labeled(seed, &name);
            let n: usize = shape.iter().product();
            let data = (0..n)
                .map(|_| (rng.gen_range(-bound..bound)) as f32)
                .collect();
            Tensor { shape, data }
        } else if name.ends_with(".var") || name.ends_with(".gamma") {
            Tensor::filled(shape, 1.0)
        } else {
            // biases, BN mean/beta
            Tensor::zeros(shape)
        };
        bundle.insert(name, t);
    }
    Ok(bundle)
}

/// Zero every learnable weight but keep BN identity stats. Used by tests
/// exercising residual/zero-propagation identities.
pub fn zero_weights(arch: &ArchConfig) -> Result<WeightBundle> {
    arch.validate()?;
    let mut bundle = WeightBundle::new();
    for (name, shape) in weight_manifest(arch) {
        let t = if name.ends_with(".var") || name.ends_with(".gamma") {
            Tensor::filled(shape, 1.0)
        } else {
            Tensor::zeros(shape)
        };
        bundle.insert(name, t);
    }
    Ok(bundle)
}
