use std::fmt;
use std::path::Path;

use crate::config::KeyValues;
use crate::error::{Error, Result};
use crate::{FINGERPRINT_LEN, NUM_ACTIVITIES, NUM_LOCATIONS, NUM_SUBCARRIERS};

pub const STEM_WIDTH: usize = 128;
pub const STAGE_WIDTHS: [usize; 4] = [128, 256, 512, 512];
pub const STAGE_STRIDES: [usize; 4] = [1, 2, 2, 2];
pub const HEAD_WIDTH: usize = 512;
/// Head average-pool window and stride.
pub const HEAD_POOL: usize = 4;

/// Architecture of a `ResNet1D-[n1,n2,n3,n4]` network.
#[derive(Debug, Clone, PartialEq)]
pub struct NetworkSpec {
    pub block_counts: [usize; 4],
    /// Scales every channel width; 1.0 is the full-size network.
    pub width_multiplier: f64,
    /// Adds a second head convolution to the activity branch.
    pub plus_variant: bool,
    pub num_activities: usize,
    pub num_locations: usize,
    pub input_channels: usize,
    pub input_len: usize,
    /// Parameter initialization seed.
    pub seed: u64,
}

impl Default for NetworkSpec {
    fn default() -> Self {
        Self {
            block_counts: [1, 1, 1, 1],
            width_multiplier: 1.0,
            plus_variant: false,
            num_activities: NUM_ACTIVITIES,
            num_locations: NUM_LOCATIONS,
            input_channels: NUM_SUBCARRIERS,
            input_len: FINGERPRINT_LEN,
            seed: 0,
        }
    }
}

impl NetworkSpec {
    pub fn with_blocks(block_counts: [usize; 4]) -> Self {
        Self {
            block_counts,
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        let w = self.width_multiplier;
        if !(w.is_finite() && w > 0.0 && w <= 1.0) {
            return Err(Error::Config(format!("width_multiplier {w} must lie in (0, 1]")));
        }
        if self.block_counts.contains(&0) {
            return Err(Error::Config(format!(
                "block counts {:?} must all be at least 1",
                self.block_counts
            )));
        }
        if self.num_activities == 0 || self.num_locations == 0 || self.input_channels == 0 {
            return Err(Error::Config("class and channel counts must be positive".into()));
        }
        Ok(())
    }

    /// `base` scaled by the width multiplier, rounded up.
    pub fn scaled(&self, base: usize) -> usize {
        ((base as f64 * self.width_multiplier).ceil() as usize).max(1)
    }

    pub fn stem_width(&self) -> usize {
        self.scaled(STEM_WIDTH)
    }

    pub fn stage_width(&self, stage: usize) -> usize {
        self.scaled(STAGE_WIDTHS[stage])
    }

    pub fn head_width(&self) -> usize {
        self.scaled(HEAD_WIDTH)
    }

    /// Parses the `key=value` network spec format.
    pub fn parse(text: &str) -> Result<Self> {
        let kv = KeyValues::parse(text)?;
        let mut spec = Self::default();
        if let Some(v) = kv.get("block_counts") {
            let counts: Vec<usize> = v
                .split(|c: char| c == ',' || c.is_whitespace())
                .filter(|s| !s.is_empty())
                .map(|s| s.parse().map_err(|_| Error::Config(format!("bad block count '{s}'"))))
                .collect::<Result<_>>()?;
            spec.block_counts = counts
                .try_into()
                .map_err(|c: Vec<usize>| Error::Config(format!("need 4 block counts, got {}", c.len())))?;
        }
        if let Some(v) = kv.parsed::<f64>("width_multiplier")? {
            spec.width_multiplier = v;
        }
        if let Some(v) = kv.parsed::<bool>("plus_variant")? {
            spec.plus_variant = v;
        }
        if let Some(v) = kv.parsed::<u64>("seed")? {
            spec.seed = v;
        }
        kv.reject_unknown(&["block_counts", "width_multiplier", "plus_variant", "seed"])?;
        spec.validate()?;
        Ok(spec)
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::parse(&std::fs::read_to_string(path)?)
    }

    pub fn to_text(&self) -> String {
        let c = self.block_counts;
        format!(
            "block_counts={},{},{},{}\nwidth_multiplier={}\nplus_variant={}\nseed={}\n",
            c[0], c[1], c[2], c[3], self.width_multiplier, self.plus_variant, self.seed
        )
    }
}

impl fmt::Display for NetworkSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let c = self.block_counts;
        write!(f, "ResNet1D-[{},{},{},{}]", c[0], c[1], c[2], c[3])?;
        if self.plus_variant {
            f.write_str("+")?;
        }
        if self.width_multiplier != 1.0 {
            write!(f, " x{}", self.width_multiplier)?;
        }
        Ok(())
    }
}
