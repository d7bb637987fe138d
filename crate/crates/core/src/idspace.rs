//! Address arithmetic over fixed-width identifiers.
//!
//! Bits are numbered from 0 at the most significant end. A node's color at
//! level `i` is governed by bit `i`: 0 is white, 1 is black. (Prose that
//! counts bits from 1 calls this the `(i+1)`-th bit.)

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::IdError;

/// Widest supported identifier.
pub const MAX_WIDTH: u8 = 64;

/// Default identifier width used by generators and the CLI.
pub const DEFAULT_WIDTH: u8 = 16;

/// An `n`-bit node identifier.
///
/// Ordering compares the numeric value first, so sorting a set of
/// same-width identifiers sorts them numerically.
#[derive(Copy, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct NodeId {
    value: u64,
    width: u8,
}

#[derive(Copy, Clone, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Color {
    White,
    Black,
}

impl Color {
    pub fn opposite(self) -> Color {
        match self {
            Color::White => Color::Black,
            Color::Black => Color::White,
        }
    }
}

fn mask(width: u8) -> u64 {
    if width >= 64 {
        u64::MAX
    } else {
        (1u64 << width) - 1
    }
}

impl NodeId {
    pub fn new(value: u64, width: u8) -> Result<Self, IdError> {
        if width == 0 || width > MAX_WIDTH {
            return Err(IdError::BadWidth(width));
        }
        if value & !mask(width) != 0 {
            return Err(IdError::ValueTooWide { value, width });
        }
        Ok(NodeId { value, width })
    }

    pub fn value(self) -> u64 {
        self.value
    }

    pub fn width(self) -> u8 {
        self.width
    }

    /// Bit `idx` counted from the most significant end. Panics when out of
    /// range; see [`address_bit`] for the checked form.
    #[inline]
    pub fn bit(self, idx: u32) -> u8 {
        debug_assert!(idx < self.width as u32);
        ((self.value >> (self.width as u32 - 1 - idx)) & 1) as u8
    }

    #[inline]
    pub fn color(self, level: u32) -> Color {
        if self.bit(level) == 0 {
            Color::White
        } else {
            Color::Black
        }
    }

    /// Common prefix length without the width check.
    #[inline]
    pub fn prefix_len(self, other: NodeId) -> u32 {
        debug_assert_eq!(self.width, other.width);
        let diff = self.value ^ other.value;
        if diff == 0 {
            self.width as u32
        } else {
            diff.leading_zeros() - (64 - self.width as u32)
        }
    }

    #[inline]
    pub fn xor(self, other: NodeId) -> u64 {
        self.value ^ other.value
    }

    /// The top `depth` bits as an integer.
    pub fn prefix_bits(self, depth: u32) -> u64 {
        if depth == 0 {
            0
        } else {
            self.value >> (self.width as u32 - depth)
        }
    }

    pub fn to_binary(self) -> String {
        format!("{:0width$b}", self.value, width = self.width as usize)
    }

    /// Hexadecimal rendering with an explicit width field, e.g. `16:0x00ab`.
    pub fn to_hex(self) -> String {
        let digits = (self.width as usize).div_ceil(4);
        format!("{}:0x{:0digits$x}", self.width, self.value, digits = digits)
    }

    pub fn parse_binary(s: &str) -> Result<Self, IdError> {
        if s.is_empty() || s.len() > MAX_WIDTH as usize || !s.bytes().all(|b| b == b'0' || b == b'1') {
            return Err(IdError::Parse(s.to_string()));
        }
        let value = u64::from_str_radix(s, 2).map_err(|_| IdError::Parse(s.to_string()))?;
        NodeId::new(value, s.len() as u8)
    }

    pub fn parse_hex(s: &str) -> Result<Self, IdError> {
        let (w, rest) = s.split_once(':').ok_or_else(|| IdError::Parse(s.to_string()))?;
        let width: u8 = w.parse().map_err(|_| IdError::Parse(s.to_string()))?;
        let digits = rest.strip_prefix("0x").unwrap_or(rest);
        let value = u64::from_str_radix(digits, 16).map_err(|_| IdError::Parse(s.to_string()))?;
        NodeId::new(value, width)
    }
}

impl fmt::Display for NodeId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.to_binary())
    }
}

impl fmt::Debug for NodeId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "NodeId({})", self.to_binary())
    }
}

impl FromStr for NodeId {
    type Err = IdError;

    /// Accepts either a binary string (`01100`) or the hex form (`16:0x00ab`).
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        if s.contains(':') {
            NodeId::parse_hex(s)
        } else {
            NodeId::parse_binary(s)
        }
    }
}

fn check_width(a: NodeId, b: NodeId) -> Result<(), IdError> {
    if a.width != b.width {
        Err(IdError::WidthMismatch(a.width, b.width))
    } else {
        Ok(())
    }
}

/// Length of the longest common prefix of `a` and `b`; equals the width iff
/// `a == b`.
pub fn common_prefix_len(a: NodeId, b: NodeId) -> Result<u32, IdError> {
    check_width(a, b)?;
    Ok(a.prefix_len(b))
}

pub fn xor_distance(a: NodeId, b: NodeId) -> Result<u64, IdError> {
    check_width(a, b)?;
    Ok(a.xor(b))
}

pub fn address_bit(a: NodeId, idx: u32) -> Result<u8, IdError> {
    if idx >= a.width as u32 {
        return Err(IdError::BitOutOfRange { idx, width: a.width });
    }
    Ok(a.bit(idx))
}

pub fn color_at(a: NodeId, level: u32) -> Result<Color, IdError> {
    address_bit(a, level).map(|b| if b == 0 { Color::White } else { Color::Black })
}

/// Identifies one level network: the nodes whose address starts with
/// `depth` given bits. Depth 0 is the physical network.
#[derive(Copy, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct LevelRef {
    depth: u8,
    prefix: u64,
}

impl LevelRef {
    pub const ROOT: LevelRef = LevelRef { depth: 0, prefix: 0 };

    pub fn new(prefix: u64, depth: u8) -> Result<Self, IdError> {
        if depth > MAX_WIDTH {
            return Err(IdError::BadWidth(depth));
        }
        if depth < 64 && prefix >> depth != 0 {
            return Err(IdError::ValueTooWide { value: prefix, width: depth });
        }
        Ok(LevelRef { depth, prefix })
    }

    /// The level network of depth `depth` that contains `id`.
    pub fn of(id: NodeId, depth: u32) -> Self {
        debug_assert!(depth <= id.width as u32);
        LevelRef { depth: depth as u8, prefix: id.prefix_bits(depth) }
    }

    pub fn depth(self) -> u32 {
        self.depth as u32
    }

    pub fn prefix(self) -> u64 {
        self.prefix
    }

    pub fn contains(self, id: NodeId) -> bool {
        self.depth as u32 <= id.width as u32 && id.prefix_bits(self.depth as u32) == self.prefix
    }

    pub fn child(self, bit: u8) -> LevelRef {
        LevelRef { depth: self.depth + 1, prefix: (self.prefix << 1) | (bit as u64 & 1) }
    }

    pub fn parent(self) -> Option<LevelRef> {
        if self.depth == 0 {
            None
        } else {
            Some(LevelRef { depth: self.depth - 1, prefix: self.prefix >> 1 })
        }
    }

    /// True when `self` is `other` or one of its ancestors.
    pub fn is_ancestor_of(self, other: LevelRef) -> bool {
        self.depth <= other.depth
            && (self.depth == 0 || other.prefix >> (other.depth - self.depth) == self.prefix)
    }

    pub fn to_binary(self) -> String {
        if self.depth == 0 {
            String::new()
        } else {
            format!("{:0width$b}", self.prefix, width = self.depth as usize)
        }
    }

    pub fn parse(s: &str) -> Result<Self, IdError> {
        if s.is_empty() {
            return Ok(LevelRef::ROOT);
        }
        if s.len() > MAX_WIDTH as usize || !s.bytes().all(|b| b == b'0' || b == b'1') {
            return Err(IdError::Parse(s.to_string()));
        }
        let prefix = u64::from_str_radix(s, 2).map_err(|_| IdError::Parse(s.to_string()))?;
        LevelRef::new(prefix, s.len() as u8)
    }
}

impl fmt::Display for LevelRef {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.depth == 0 {
            f.write_str("<root>")
        } else {
            f.write_str(&self.to_binary())
        }
    }
}

impl fmt::Debug for LevelRef {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "LevelRef({})", self)
    }
}
