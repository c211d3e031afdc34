//! Feature-map tensors and the five-level feature pyramid.

use serde::{Deserialize, Serialize};

use crate::error::Error;
use crate::Result;

/// A C×H×W real tensor, channel-major (c, then row, then column), f32 storage.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureMap {
    pub channels: usize,
    pub height: usize,
    pub width: usize,
    pub data: Vec<f32>,
}

impl FeatureMap {
    pub fn zeros(channels: usize, height: usize, width: usize) -> Self {
        FeatureMap {
            channels,
            height,
            width,
            data: vec![0.0; channels * height * width],
        }
    }

    pub fn from_vec(channels: usize, height: usize, width: usize, data: Vec<f32>) -> Result<Self> {
        if data.len() != channels * height * width {
            return Err(Error::dim(format!(
                "feature map data length {} != {}x{}x{}",
                data.len(),
                channels,
                height,
                width
            )));
        }
        Ok(FeatureMap { channels, height, width, data })
    }

    #[inline]
    pub fn idx(&self, c: usize, y: usize, x: usize) -> usize {
        (c * self.height + y) * self.width + x
    }

    #[inline]
    pub fn get(&self, c: usize, y: usize, x: usize) -> f32 {
        self.data[self.idx(c, y, x)]
    }

    #[inline]
    pub fn set(&mut self, c: usize, y: usize, x: usize, v: f32) {
        let i = self.idx(c, y, x);
        self.data[i] = v;
    }

    /// One channel plane as a contiguous slice.
    pub fn channel(&self, c: usize) -> &[f32] {
        let plane = self.height * self.width;
        &self.data[c * plane..(c + 1) * plane]
    }

    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    pub fn all_finite(&self) -> bool {
        self.data.iter().all(|v| v.is_finite())
    }

    /// Stack `self` and `other` along the channel dimension.
    pub fn concat_channels(&self, other: &FeatureMap) -> Result<FeatureMap> {
        if self.height != other.height || self.width != other.width {
            return Err(Error::dim(format!(
                "concat: spatial dims {}x{} vs {}x{}",
                self.height, self.width, other.height, other.width
            )));
        }
        let mut data = Vec::with_capacity(self.data.len() + other.data.len());
        data.extend_from_slice(&self.data);
        data.extend_from_slice(&other.data);
        Ok(FeatureMap {
            channels: self.channels + other.channels,
            height: self.height,
            width: self.width,
            data,
        })
    }

    /// Split into (first `n`, remaining) channel groups.
    pub fn split_channels(&self, n: usize) -> Result<(FeatureMap, FeatureMap)> {
        if n == 0 || n >= self.channels {
            return Err(Error::dim(format!(
                "split at {} of {} channels",
                n, self.channels
            )));
        }
        let plane = self.height * self.width;
        let first = FeatureMap {
            channels: n,
            height: self.height,
            width: self.width,
            data: self.data[..n * plane].to_vec(),
        };
        let second = FeatureMap {
            channels: self.channels - n,
            height: self.height,
            width: self.width,
            data: self.data[n * plane..].to_vec(),
        };
        Ok((first, second))
    }
}

/// Pyramid levels P2…P6: 256 channels each, spatial strides 4 to 64.
#[derive(Debug, Clone, PartialEq)]
pub struct FeaturePyramid {
    pub p2: FeatureMap,
    pub p3: FeatureMap,
    pub p4: FeatureMap,
    pub p5: FeatureMap,
    pub p6: FeatureMap,
}

pub const PYRAMID_CHANNELS: usize = 256;
pub const PYRAMID_LEVELS: [&str; 5] = ["p2", "p3", "p4", "p5", "p6"];

impl FeaturePyramid {
    pub fn levels(&self) -> [&FeatureMap; 5] {
        [&self.p2, &self.p3, &self.p4, &self.p5, &self.p6]
    }

    /// Image height implied by the pyramid (P2 is at stride 4).
    pub fn image_height(&self) -> usize {
        self.p2.height * 4
    }

    pub fn image_width(&self) -> usize {
        self.p2.width * 4
    }

    /// Check the shape contract: 256 channels per level, dims halving from
    /// H/4 down to H/64, H and W divisible by 64.
    pub fn validate(&self) -> Result<()> {
        let h = self.image_height();
        let w = self.image_width();
        if h % 64 != 0 || w % 64 != 0 {
            return Err(Error::dim(format!(
                "image dims {h}x{w} must be divisible by 64"
            )));
        }
        for (i, lvl) in self.levels().iter().enumerate() {
            let stride = 1usize << (i + 2);
            if lvl.channels != PYRAMID_CHANNELS {
                return Err(Error::dim(format!(
                    "{} has {} channels, expected {}",
                    PYRAMID_LEVELS[i], lvl.channels, PYRAMID_CHANNELS
                )));
            }
            if lvl.height != h / stride || lvl.width != w / stride {
                return Err(Error::dim(format!(
                    "{} is {}x{}, expected {}x{}",
                    PYRAMID_LEVELS[i],
                    lvl.height,
                    lvl.width,
                    h / stride,
                    w / stride
                )));
            }
        }
        Ok(())
    }
}

/// Manifest entry for the manifest+blob container format.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct TensorEntry {
    pub name: String,
    pub shape: Vec<usize>,
    /// Byte offset into the blob.
    pub offset: u64,
}
