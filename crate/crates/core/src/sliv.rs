//! Start symbol and Length Indicator Value codec, plus the mapping-type
//! validity rules for msg2 PDSCH (type A) and msg3 PUSCH (type B).
//!
//! The slot length is fixed at 14 symbols; the indicator formula hard-codes it.
//! Decoding goes through a precomputed table over all 105 valid (S, L) pairs
//! rather than inverting the formula.

use std::sync::OnceLock;

use thiserror::Error;

use crate::frame_timing::SYMBOLS_PER_SLOT;

#[derive(Debug, Error, PartialEq, Eq)]
pub enum SlivError {
    #[error("invalid symbol range: start={start} length={length} (need 0<=S<=13, 1<=L<=14, S+L<=14)")]
    InvalidSymbolRange { start: u8, length: u8 },
    #[error("no valid (start, length) pair encodes to indicator value {0}")]
    UnknownSliv(u16),
}

/// A validated time-domain allocation: start symbol, consecutive length, and
/// the encoded indicator value.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Sliv {
    start: u8,
    length: u8,
    encoded: u16,
}

impl Sliv {
    pub fn start(self) -> u8 {
        self.start
    }

    pub fn length(self) -> u8 {
        self.length
    }

    pub fn encoded(self) -> u16 {
        self.encoded
    }

    /// Last symbol occupied by the allocation (inclusive).
    pub fn end_symbol(self) -> u8 {
        self.start + self.length - 1
    }

    pub fn symbols(self) -> impl Iterator<Item = u8> {
        self.start..self.start + self.length
    }
}

fn indicator_value(start: u8, length: u8) -> u16 {
    let s = u16::from(start);
    let l = u16::from(length);
    let n = u16::from(SYMBOLS_PER_SLOT);
    if l - 1 <= 7 {
        n * (l - 1) + s
    } else {
        n * (n - l + 1) + (n - 1 - s)
    }
}

pub fn encode_sliv(start: u8, length: u8) -> Result<Sliv, SlivError> {
    if start > 13 || length == 0 || length > SYMBOLS_PER_SLOT || start + length > SYMBOLS_PER_SLOT
    {
        return Err(SlivError::InvalidSymbolRange { start, length });
    }
    Ok(Sliv { start, length, encoded: indicator_value(start, length) })
}

/// Table over every valid pair; every indicator value in 0..=104 is hit by
/// exactly one pair, so the table has no holes inside its range.
fn decode_table() -> &'static [Option<(u8, u8)>; 105] {
    static TABLE: OnceLock<[Option<(u8, u8)>; 105]> = OnceLock::new();
    TABLE.get_or_init(|| {
        let mut table = [None; 105];
        for start in 0..SYMBOLS_PER_SLOT {
            for length in 1..=(SYMBOLS_PER_SLOT - start) {
                let value = indicator_value(start, length) as usize;
                assert!(table[value].is_none(), "indicator collision at {value}");
                table[value] = Some((start, length));
            }
        }
        table
    })
}

pub fn decode_sliv(encoded: u16) -> Result<(u8, u8), SlivError> {
    decode_table()
        .get(encoded as usize)
        .copied()
        .flatten()
        .ok_or(SlivError::UnknownSliv(encoded))
}

/// Time-domain mapping rules for the two message types this simulator cares
/// about. PDSCH type A restricts the start symbol to 0..=3; PUSCH type B
/// additionally requires at least two symbols for msg3.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum MappingType {
    PdschTypeA,
    PuschTypeB,
}

impl MappingType {
    pub fn label(self) -> &'static str {
        match self {
            MappingType::PdschTypeA => "PDSCH type A",
            MappingType::PuschTypeB => "PUSCH type B",
        }
    }
}

/// A broken mapping rule; violations are values, not faults.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MappingViolation {
    /// Type A start symbol must be in 0..=3.
    StartBeyondTypeA { start: u8 },
    /// msg3 must occupy at least 2 symbols.
    LengthBelowMinimum { length: u8, min: u8 },
}

impl std::fmt::Display for MappingViolation {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            MappingViolation::StartBeyondTypeA { start } => {
                write!(f, "start symbol {start} exceeds the type-A limit of 3")
            }
            MappingViolation::LengthBelowMinimum { length, min } => {
                write!(f, "length {length} is below the minimum of {min}")
            }
        }
    }
}

pub fn validate_mapping(sliv: Sliv, mapping: MappingType) -> Result<(), MappingViolation> {
    match mapping {
        MappingType::PdschTypeA => {
            if sliv.start() > 3 {
                return Err(MappingViolation::StartBeyondTypeA { start: sliv.start() });
            }
        }
        MappingType::PuschTypeB => {
            if sliv.length() < 2 {
                return Err(MappingViolation::LengthBelowMinimum { length: sliv.length(), min: 2 });
            }
        }
    }
    Ok(())
}

/// Every allocation passing the mapping's rules, in (S, L) lexicographic
/// order. Drives the sweep grids.
pub fn enumerate_valid(mapping: MappingType) -> Vec<Sliv> {
    let mut out = Vec::new();
    for start in 0..SYMBOLS_PER_SLOT {
        for length in 1..=(SYMBOLS_PER_SLOT - start) {
            let sliv = encode_sliv(start, length).expect("pair is in range by construction");
            if validate_mapping(sliv, mapping).is_ok() {
                out.push(sliv);
            }
        }
    }
    out
}
