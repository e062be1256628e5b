use crate::error::{Error, Result};

/// Widest code [`Riu2Mapper::new`] maps by table.
pub const DEFAULT_TABLE_BITS: usize = 16;
/// Widest code a table can be requested for (16 MiB).
pub const MAX_TABLE_BITS: usize = 24;

/// Raw circular `P`-bit code; bit `p` belongs to neighbor `p`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct PatternCode {
    bits: u32,
    width: u8,
}

impl PatternCode {
    pub fn new(bits: u32, width: usize) -> Self {
        assert!((1..=32).contains(&width), "code width {width} out of range");
        assert!(width == 32 || bits >> width == 0, "code {bits:#b} wider than {width} bits");
        Self {
            bits,
            width: width as u8,
        }
    }

    pub fn bits(self) -> u32 {
        self.bits
    }

    pub fn width(self) -> usize {
        usize::from(self.width)
    }

    /// Circular rotation towards higher bit indices.
    pub fn rotate(self, by: usize) -> Self {
        Self {
            bits: rotate_left(self.bits, by % self.width(), self.width()),
            width: self.width,
        }
    }

    pub fn xor(self, other: PatternCode) -> Self {
        assert_eq!(self.width, other.width, "XOR of codes with different widths");
        Self {
            bits: self.bits ^ other.bits,
            width: self.width,
        }
    }
}

/// Rotation-invariant uniform bin of a code: in `0..=P+1`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Riu2Code {
    bin: u8,
    width: u8,
}

impl Riu2Code {
    pub fn bin(self) -> usize {
        usize::from(self.bin)
    }

    pub fn width(self) -> usize {
        usize::from(self.width)
    }

    pub fn is_uniform(self) -> bool {
        self.bin <= self.width
    }
}

#[inline]
fn mask(width: usize) -> u32 {
    if width == 32 {
        u32::MAX
    } else {
        (1u32 << width) - 1
    }
}

#[inline]
fn rotate_left(bits: u32, by: usize, width: usize) -> u32 {
    if by == 0 {
        bits
    } else {
        ((bits << by) | (bits >> (width - by))) & mask(width)
    }
}

#[inline]
fn transitions_raw(bits: u32, width: usize) -> u32 {
    (bits ^ rotate_left(bits, 1, width)).count_ones()
}

#[inline]
fn riu2_raw(bits: u32, width: usize) -> u8 {
    if transitions_raw(bits, width) <= 2 {
        bits.count_ones() as u8
    } else {
        width as u8 + 1
    }
}

/// Circular 0/1 transitions, counting the pair (P-1, 0).
pub fn transitions(code: PatternCode) -> u32 {
    transitions_raw(code.bits, code.width())
}

/// Popcount for uniform codes (at most two transitions), `P + 1` otherwise.
pub fn riu2(code: PatternCode) -> Riu2Code {
    Riu2Code {
        bin: riu2_raw(code.bits, code.width()),
        width: code.width,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MapperStrategy {
    LookupTable,
    Direct,
}

/// Maps `P`-bit codes to riu2 bins, by default through a table for `P <= 16`
/// and directly otherwise.
#[derive(Debug, Clone)]
pub struct Riu2Mapper {
    width: usize,
    table: Option<Vec<u8>>,
}

impl Riu2Mapper {
    pub fn new(width: usize) -> Result<Self> {
        let strategy = if width <= DEFAULT_TABLE_BITS {
            MapperStrategy::LookupTable
        } else {
            MapperStrategy::Direct
        };
        Self::with_strategy(width, strategy)
    }

    pub fn with_strategy(width: usize, strategy: MapperStrategy) -> Result<Self> {
        if !(1..=32).contains(&width) {
            return Err(Error::Parameter(format!("code width must be in 1..=32, got {width}")));
        }
        let table = match strategy {
            MapperStrategy::Direct => None,
            MapperStrategy::LookupTable if width > MAX_TABLE_BITS => {
                return Err(Error::Parameter(format!(
                    "lookup table limited to P <= {MAX_TABLE_BITS}, got {width}"
                )))
            }
            MapperStrategy::LookupTable => Some((0..1u32 << width).map(|c| riu2_raw(c, width)).collect()),
        };
        Ok(Self { width, table })
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn strategy(&self) -> MapperStrategy {
        if self.table.is_some() {
            MapperStrategy::LookupTable
        } else {
            MapperStrategy::Direct
        }
    }

    /// Bin of raw code bits; `bits` must fit in `P` bits.
    #[inline]
    pub fn bin(&self, bits: u32) -> u8 {
        match &self.table {
            Some(t) => t[bits as usize],
            None => riu2_raw(bits, self.width),
        }
    }

    pub fn map(&self, code: PatternCode) -> Riu2Code {
        assert_eq!(code.width(), self.width, "code width does not match mapper");
        Riu2Code {
            bin: self.bin(code.bits),
            width: code.width,
        }
    }
}

/// Number of distinct codes under circular rotation (binary necklaces).
pub fn rotation_class_count(width: usize) -> u64 {
    // Burnside: average number of codes fixed by each rotation.
    let fixed: u64 = (0..width).map(|k| 1u64 << gcd(k, width)).sum();
    fixed / width as u64
}

fn gcd(a: usize, b: usize) -> usize {
    if b == 0 {
        a
    } else {
        gcd(b, a % b)
    }
}

/// Summary of the `P`-bit code space and its riu2 reduction.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CodeSpaceStats {
    pub width: usize,
    pub total: u64,
    pub rotation_classes: u64,
    pub riu2_bins: usize,
    pub uniform: u64,
    pub non_uniform: u64,
    /// Number of codes landing in each riu2 bin.
    pub populations: Vec<u64>,
}

/// Enumerates all `2^P` codes (`4 <= P <= 24`).
pub fn code_space_stats(width: usize) -> Result<CodeSpaceStats> {
    if !(4..=24).contains(&width) {
        return Err(Error::Parameter(format!("P must be in 4..=24, got {width}")));
    }
    let mapper = Riu2Mapper::new(width)?;
    let mut populations = vec![0u64; width + 2];
    for code in 0..1u32 << width {
        populations[usize::from(mapper.bin(code))] += 1;
    }
    let non_uniform = populations[width + 1];
    let total = 1u64 << width;
    Ok(CodeSpaceStats {
        width,
        total,
        rotation_classes: rotation_class_count(width),
        riu2_bins: width + 2,
        uniform: total - non_uniform,
        non_uniform,
        populations,
    })
}
