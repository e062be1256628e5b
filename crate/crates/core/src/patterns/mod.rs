//! The four CLDP components and the riu2 mapping they share.
//!
//! * `S`: sign of the local differences at radius `R`,
//! * `M`: magnitude of the local differences against their image-wide mean,
//! * `D`: XOR of the sign bits at radii `R` and `R - 1` in the same direction,
//! * `C`: center intensity against the image mean.
//!
//! `S`, `M` and `D` are circular `P`-bit codes reduced to `P + 2` riu2 bins;
//! `C` is a single bit.

mod encode;
mod maps;
mod riu2;

use std::fmt;

use serde::{Deserialize, Serialize};

pub use encode::{encode_center, encode_derivative, encode_magnitude, encode_sign};
pub use maps::{extract_maps, Extractor, PatternMaps};
pub use riu2::{
    code_space_stats, riu2, rotation_class_count, transitions, CodeSpaceStats, MapperStrategy, PatternCode, Riu2Code,
    Riu2Mapper,
};

/// One of the pattern components a histogram can be built from.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Component {
    S,
    M,
    D,
    C,
}

impl Component {
    pub const ALL: [Component; 4] = [Component::S, Component::M, Component::D, Component::C];

    /// Number of histogram bins the component occupies for `P` neighbors.
    pub fn bins(self, neighbors: usize) -> usize {
        match self {
            Component::C => 2,
            _ => neighbors + 2,
        }
    }

    pub fn symbol(self) -> char {
        match self {
            Component::S => 'S',
            Component::M => 'M',
            Component::D => 'D',
            Component::C => 'C',
        }
    }

    pub fn from_symbol(c: char) -> Option<Component> {
        match c {
            'S' => Some(Component::S),
            'M' => Some(Component::M),
            'D' => Some(Component::D),
            'C' => Some(Component::C),
            _ => None,
        }
    }
}

impl fmt::Display for Component {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.symbol())
    }
}
