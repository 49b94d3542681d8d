//! TDD frame/slot/symbol arithmetic: pattern expansion, slot classification,
//! numerology-derived durations, and the msg3 slot computation `n + k2 + delta`.
//!
//! Slots are indexed frame-relative (`0..slots_per_frame`) with explicit frame
//! carry. Durations are kept in integer microseconds so that periodicities such
//! as "ms5" and "ms2.5" stay exact.

use std::fmt;

use thiserror::Error;

/// OFDM symbols per slot (normal cyclic prefix). Extended CP (12 symbols) is
/// rejected at configuration time.
pub const SYMBOLS_PER_SLOT: u8 = 14;

#[derive(Debug, Error, PartialEq, Eq)]
pub enum FrameTimingError {
    #[error("unsupported numerology mu={0}; supported range is 0..=3")]
    UnsupportedNumerology(u8),
    #[error("slot pattern must not be empty")]
    EmptyPattern,
    #[error("pattern covers {pattern_us} us but periodicity is {periodicity_us} us")]
    PatternPeriodMismatch { pattern_us: u64, periodicity_us: u64 },
    #[error("special slot symbols overflow: dl={dl} + ul={ul} exceeds {max}")]
    SpecialSymbolOverflow { dl: u8, ul: u8, max: u8 },
    #[error("malformed slot pattern: {0}")]
    MalformedPattern(String),
    #[error("unknown slot kind '{0}'; expected one of D, S, U")]
    UnknownSlotKind(char),
    #[error(
        "pattern of {pattern_slots} slots does not tile the {slots_per_frame}-slot frame evenly"
    )]
    PatternDoesNotTile { pattern_slots: usize, slots_per_frame: u16 },
}

/// Subcarrier-spacing numerology. `mu` is the exponent: SCS = 15 * 2^mu kHz,
/// 2^mu slots per 1 ms subframe.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct Numerology {
    mu: u8,
}

impl Numerology {
    pub fn new(mu: u8) -> Result<Self, FrameTimingError> {
        if mu > 3 {
            return Err(FrameTimingError::UnsupportedNumerology(mu));
        }
        Ok(Self { mu })
    }

    pub fn mu(self) -> u8 {
        self.mu
    }

    pub fn scs_khz(self) -> u32 {
        15 << self.mu
    }

    pub fn slots_per_subframe(self) -> u16 {
        1 << self.mu
    }

    pub fn slots_per_frame(self) -> u16 {
        10 << self.mu
    }

    /// Slot duration in microseconds; exact for mu in 0..=3 (1000 / 2^mu).
    pub fn slot_duration_us(self) -> u64 {
        1000 >> self.mu
    }
}

/// Extra slot delay for a RAR-granted PUSCH, by numerology.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Delta(u8);

impl Delta {
    pub fn slots(self) -> u8 {
        self.0
    }
}

/// Delta lookup: 2/3/4/6 slots for mu = 0/1/2/3.
pub fn delta_for(mu: u8) -> Result<Delta, FrameTimingError> {
    match mu {
        0 => Ok(Delta(2)),
        1 => Ok(Delta(3)),
        2 => Ok(Delta(4)),
        3 => Ok(Delta(6)),
        other => Err(FrameTimingError::UnsupportedNumerology(other)),
    }
}

/// Slot classification within the TDD pattern.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum SlotKind {
    FullDownlink,
    Special,
    FullUplink,
}

impl SlotKind {
    pub fn from_char(c: char) -> Result<Self, FrameTimingError> {
        match c {
            'D' | 'd' => Ok(SlotKind::FullDownlink),
            'S' | 's' => Ok(SlotKind::Special),
            'U' | 'u' => Ok(SlotKind::FullUplink),
            other => Err(FrameTimingError::UnknownSlotKind(other)),
        }
    }

    pub fn as_char(self) -> char {
        match self {
            SlotKind::FullDownlink => 'D',
            SlotKind::Special => 'S',
            SlotKind::FullUplink => 'U',
        }
    }
}

/// Frame-relative slot position. `frame` counts 10 ms radio frames.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct SlotIndex {
    pub frame: u32,
    pub slot: u16,
}

impl SlotIndex {
    pub fn new(frame: u32, slot: u16) -> Self {
        Self { frame, slot }
    }

    /// Absolute slot count since frame 0 slot 0.
    pub fn absolute(self, numerology: Numerology) -> u64 {
        u64::from(self.frame) * u64::from(numerology.slots_per_frame()) + u64::from(self.slot)
    }

    pub fn from_absolute(abs: u64, numerology: Numerology) -> Self {
        let spf = u64::from(numerology.slots_per_frame());
        Self {
            frame: (abs / spf) as u32,
            slot: (abs % spf) as u16,
        }
    }
}

impl fmt::Display for SlotIndex {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}.{}", self.frame, self.slot)
    }
}

/// One TDD UL/DL common configuration: the slot pattern over one periodicity,
/// the numerology, and the special slot's DL/UL symbol split. Guard symbols
/// are always derived as `14 - dl - ul`, never stored.
#[derive(Debug, Clone, PartialEq)]
pub struct TddConfig {
    pattern: Vec<SlotKind>,
    periodicity_us: u64,
    numerology: Numerology,
    special_dl_symbols: u8,
    special_ul_symbols: u8,
}

impl TddConfig {
    pub fn new(
        pattern: Vec<SlotKind>,
        periodicity_us: u64,
        numerology: Numerology,
        special_dl_symbols: u8,
        special_ul_symbols: u8,
    ) -> Result<Self, FrameTimingError> {
        if pattern.is_empty() {
            return Err(FrameTimingError::EmptyPattern);
        }
        let pattern_us = pattern.len() as u64 * numerology.slot_duration_us();
        if pattern_us != periodicity_us {
            return Err(FrameTimingError::PatternPeriodMismatch { pattern_us, periodicity_us });
        }
        if special_dl_symbols + special_ul_symbols > SYMBOLS_PER_SLOT {
            return Err(FrameTimingError::SpecialSymbolOverflow {
                dl: special_dl_symbols,
                ul: special_ul_symbols,
                max: SYMBOLS_PER_SLOT,
            });
        }
        Self::check_shape(&pattern)?;
        Ok(Self {
            pattern,
            periodicity_us,
            numerology,
            special_dl_symbols,
            special_ul_symbols,
        })
    }

    /// The pattern must be D* S? U*: at most one special slot, every full-DL
    /// slot before it, every full-UL slot after it.
    fn check_shape(pattern: &[SlotKind]) -> Result<(), FrameTimingError> {
        let special_count = pattern.iter().filter(|k| **k == SlotKind::Special).count();
        if special_count > 1 {
            return Err(FrameTimingError::MalformedPattern(format!(
                "{special_count} special slots in one period; at most one is allowed"
            )));
        }
        let mut seen_special = false;
        let mut seen_uplink = false;
        for kind in pattern {
            match kind {
                SlotKind::FullDownlink => {
                    if seen_special || seen_uplink {
                        return Err(FrameTimingError::MalformedPattern(
                            "downlink slot after the special/uplink portion".into(),
                        ));
                    }
                }
                SlotKind::Special => {
                    if seen_uplink {
                        return Err(FrameTimingError::MalformedPattern(
                            "special slot after an uplink slot".into(),
                        ));
                    }
                    seen_special = true;
                }
                SlotKind::FullUplink => seen_uplink = true,
            }
        }
        Ok(())
    }

    pub fn pattern(&self) -> &[SlotKind] {
        &self.pattern
    }

    pub fn pattern_string(&self) -> String {
        self.pattern.iter().map(|k| k.as_char()).collect()
    }

    pub fn period_slots(&self) -> usize {
        self.pattern.len()
    }

    pub fn periodicity_us(&self) -> u64 {
        self.periodicity_us
    }

    pub fn numerology(&self) -> Numerology {
        self.numerology
    }

    pub fn special_dl_symbols(&self) -> u8 {
        self.special_dl_symbols
    }

    pub fn special_ul_symbols(&self) -> u8 {
        self.special_ul_symbols
    }

    pub fn guard_symbols(&self) -> u8 {
        SYMBOLS_PER_SLOT - self.special_dl_symbols - self.special_ul_symbols
    }

    /// Position of `slot` within the repeating pattern, taking the absolute
    /// slot count so the phase is continuous across frame boundaries.
    pub fn slot_in_period(&self, slot: SlotIndex) -> usize {
        (slot.absolute(self.numerology) % self.pattern.len() as u64) as usize
    }

    /// Index of the last full-downlink slot within the period, if any.
    pub fn last_full_dl_in_period(&self) -> Option<usize> {
        self.pattern.iter().rposition(|k| *k == SlotKind::FullDownlink)
    }

    /// Index of the special slot within the period, if any.
    pub fn special_in_period(&self) -> Option<usize> {
        self.pattern.iter().position(|k| *k == SlotKind::Special)
    }
}

/// Tile the pattern over `frame_count` radio frames.
pub fn expand_pattern(
    config: &TddConfig,
    frame_count: u32,
) -> Result<Vec<SlotKind>, FrameTimingError> {
    assert!(frame_count >= 1, "frame_count must be positive");
    let spf = config.numerology().slots_per_frame();
    let plen = config.period_slots();
    if usize::from(spf) % plen != 0 {
        return Err(FrameTimingError::PatternDoesNotTile {
            pattern_slots: plen,
            slots_per_frame: spf,
        });
    }
    let total = usize::from(spf) * frame_count as usize;
    Ok((0..total).map(|i| config.pattern()[i % plen]).collect())
}

/// Constant-time view over the tiled pattern.
pub fn slot_kind(config: &TddConfig, slot: SlotIndex) -> SlotKind {
    config.pattern()[config.slot_in_period(slot)]
}

/// Slot where msg3 is transmitted: `n + k2 + delta(mu)` with frame carry.
pub fn msg3_slot(msg2_end_slot: SlotIndex, k2: u32, numerology: Numerology) -> SlotIndex {
    let delta = delta_for(numerology.mu()).expect("numerology is validated at construction");
    let abs = msg2_end_slot.absolute(numerology) + u64::from(k2) + u64::from(delta.slots());
    SlotIndex::from_absolute(abs, numerology)
}

/// Outcome of placing a msg3 grant on the TDD pattern.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Msg3LandingClass {
    /// Grant lands on a full-uplink slot.
    Ok,
    /// Grant lands on a full-downlink slot; the UE cannot transmit there.
    DownlinkCollision,
    /// Grant lands on the special slot; reported as a distinct diagnostic
    /// because gNB behavior for this case is not pinned down.
    SpecialSlotLanding,
}

pub fn classify_msg3_slot(config: &TddConfig, slot: SlotIndex) -> Msg3LandingClass {
    match slot_kind(config, slot) {
        SlotKind::FullUplink => Msg3LandingClass::Ok,
        SlotKind::FullDownlink => Msg3LandingClass::DownlinkCollision,
        SlotKind::Special => Msg3LandingClass::SpecialSlotLanding,
    }
}

/// Parse a pattern string such as "DDDDDDDSUU".
pub fn parse_pattern(s: &str) -> Result<Vec<SlotKind>, FrameTimingError> {
    s.chars().map(SlotKind::from_char).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn mu1() -> Numerology {
        Numerology::new(1).unwrap()
    }

    /// Table I configuration: DDDDDDDSUU, ms5, 30 kHz, DL 6 / UL 4.
    fn default_config() -> TddConfig {
        TddConfig::new(parse_pattern("DDDDDDDSUU").unwrap(), 5_000, mu1(), 6, 4).unwrap()
    }

    #[test]
    fn numerology_derivations() {
        for mu in 0..=3u8 {
            let n = Numerology::new(mu).unwrap();
            assert_eq!(n.scs_khz(), 15 * (1 << mu));
            assert_eq!(n.slots_per_subframe(), 1 << mu);
            // slot duration times slots per subframe recovers 1 ms exactly
            assert_eq!(n.slot_duration_us() * u64::from(n.slots_per_subframe()), 1000);
        }
        assert_eq!(Numerology::new(4), Err(FrameTimingError::UnsupportedNumerology(4)));
    }

    #[test]
    fn delta_table() {
        assert_eq!(delta_for(0).unwrap().slots(), 2);
        assert_eq!(delta_for(1).unwrap().slots(), 3);
        assert_eq!(delta_for(2).unwrap().slots(), 4);
        assert_eq!(delta_for(3).unwrap().slots(), 6);
        assert!(delta_for(4).is_err());
    }

    #[test]
    fn expand_default_pattern_one_frame() {
        let cfg = default_config();
        let slots = expand_pattern(&cfg, 1).unwrap();
        assert_eq!(slots.len(), 20);
        for (i, kind) in slots.iter().enumerate() {
            let expected = match i % 10 {
                7 => SlotKind::Special,
                8 | 9 => SlotKind::FullUplink,
                _ => SlotKind::FullDownlink,
            };
            assert_eq!(*kind, expected, "slot {i}");
        }
        assert_eq!(slots[7], SlotKind::Special);
        assert_eq!(slots[17], SlotKind::Special);
        assert_eq!(slots[18], SlotKind::FullUplink);
        assert_eq!(slots[19], SlotKind::FullUplink);
    }

    #[test]
    fn expand_degenerate_all_dl() {
        let cfg = TddConfig::new(vec![SlotKind::FullDownlink], 500, mu1(), 6, 4).unwrap();
        let slots = expand_pattern(&cfg, 1).unwrap();
        assert_eq!(slots.len(), 20);
        assert!(slots.iter().all(|k| *k == SlotKind::FullDownlink));
    }

    #[test]
    fn expand_dddsu_two_frames() {
        // Brute-force oracle: tile the 5-slot pattern over 40 slots and read
        // off where the special slots land.
        let cfg = TddConfig::new(parse_pattern("DDDSU").unwrap(), 2_500, mu1(), 6, 4).unwrap();
        let slots = expand_pattern(&cfg, 2).unwrap();
        assert_eq!(slots.len(), 40);
        let pattern = parse_pattern("DDDSU").unwrap();
        let special_positions: Vec<usize> = (0..40)
            .filter(|i| pattern[i % 5] == SlotKind::Special)
            .collect();
        assert_eq!(special_positions, vec![3, 8, 13, 18, 23, 28, 33, 38]);
        for (i, kind) in slots.iter().enumerate() {
            assert_eq!(*kind, pattern[i % 5], "slot {i}");
        }
    }

    #[test]
    fn expand_rejects_non_tiling_pattern() {
        let cfg = TddConfig::new(parse_pattern("DSU").unwrap(), 1_500, mu1(), 6, 4).unwrap();
        assert_eq!(
            expand_pattern(&cfg, 1),
            Err(FrameTimingError::PatternDoesNotTile { pattern_slots: 3, slots_per_frame: 20 })
        );
    }

    #[test]
    fn slot_kind_matches_expansion() {
        let cfg = default_config();
        let slots = expand_pattern(&cfg, 3).unwrap();
        for frame in 0..3u32 {
            for s in 0..20u16 {
                let idx = SlotIndex::new(frame, s);
                assert_eq!(
                    slot_kind(&cfg, idx),
                    slots[idx.absolute(mu1()) as usize],
                    "frame {frame} slot {s}"
                );
            }
        }
        assert_eq!(slot_kind(&cfg, SlotIndex::new(0, 6)), SlotKind::FullDownlink);
        assert_eq!(slot_kind(&cfg, SlotIndex::new(0, 19)), SlotKind::FullUplink);
        assert_eq!(slot_kind(&cfg, SlotIndex::new(0, 17)), SlotKind::Special);
    }

    #[test]
    fn msg3_slot_arithmetic() {
        let n = mu1();
        assert_eq!(msg3_slot(SlotIndex::new(0, 6), 9, n), SlotIndex::new(0, 18));
        assert_eq!(msg3_slot(SlotIndex::new(0, 6), 7, n), SlotIndex::new(0, 16));
        assert_eq!(msg3_slot(SlotIndex::new(0, 7), 7, n), SlotIndex::new(0, 17));
        // frame carry
        assert_eq!(msg3_slot(SlotIndex::new(0, 19), 9, n), SlotIndex::new(1, 11));
        // delta alone moves the slot by delta(mu)
        for mu in 0..=3u8 {
            let n = Numerology::new(mu).unwrap();
            let base = SlotIndex::new(2, 1);
            let moved = msg3_slot(base, 0, n);
            assert_eq!(
                moved.absolute(n) - base.absolute(n),
                u64::from(delta_for(mu).unwrap().slots())
            );
        }
    }

    #[test]
    fn classify_landing() {
        let cfg = default_config();
        assert_eq!(classify_msg3_slot(&cfg, SlotIndex::new(0, 18)), Msg3LandingClass::Ok);
        assert_eq!(
            classify_msg3_slot(&cfg, SlotIndex::new(0, 16)),
            Msg3LandingClass::DownlinkCollision
        );
        assert_eq!(
            classify_msg3_slot(&cfg, SlotIndex::new(0, 17)),
            Msg3LandingClass::SpecialSlotLanding
        );
    }

    #[test]
    fn default_config_slot_census() {
        let cfg = default_config();
        let slots = expand_pattern(&cfg, 1).unwrap();
        let count = |k: SlotKind| slots.iter().filter(|s| **s == k).count();
        assert_eq!(count(SlotKind::FullDownlink), 14);
        assert_eq!(count(SlotKind::Special), 2);
        assert_eq!(count(SlotKind::FullUplink), 4);
    }

    #[test]
    fn config_validation_errors() {
        assert_eq!(
            TddConfig::new(vec![], 0, mu1(), 6, 4),
            Err(FrameTimingError::EmptyPattern)
        );
        assert_eq!(
            TddConfig::new(parse_pattern("DSU").unwrap(), 5_000, mu1(), 6, 4),
            Err(FrameTimingError::PatternPeriodMismatch { pattern_us: 1_500, periodicity_us: 5_000 })
        );
        assert_eq!(
            TddConfig::new(parse_pattern("DSU").unwrap(), 1_500, mu1(), 10, 5),
            Err(FrameTimingError::SpecialSymbolOverflow { dl: 10, ul: 5, max: 14 })
        );
        assert!(matches!(
            TddConfig::new(parse_pattern("DSSU").unwrap(), 2_000, mu1(), 6, 4),
            Err(FrameTimingError::MalformedPattern(_))
        ));
        assert!(matches!(
            TddConfig::new(parse_pattern("DUSD").unwrap(), 2_000, mu1(), 6, 4),
            Err(FrameTimingError::MalformedPattern(_))
        ));
        assert!(matches!(
            TddConfig::new(parse_pattern("DDXU").unwrap_or_default(), 2_000, mu1(), 6, 4),
            Err(FrameTimingError::EmptyPattern)
        ));
        assert_eq!(parse_pattern("DDXU"), Err(FrameTimingError::UnknownSlotKind('X')));
    }

    proptest! {
        /// Tiling: slot_kind repeats with the pattern period, for any valid
        /// D* S? U* pattern that tiles the frame.
        #[test]
        fn tiling_periodicity(dl in 0usize..6, has_s in proptest::bool::ANY, ul in 0usize..6, mu in 0u8..=3) {
            let mut pattern = vec![SlotKind::FullDownlink; dl];
            if has_s {
                pattern.push(SlotKind::Special);
            }
            pattern.extend(std::iter::repeat_n(SlotKind::FullUplink, ul));
            prop_assume!(!pattern.is_empty());
            let n = Numerology::new(mu).unwrap();
            prop_assume!(usize::from(n.slots_per_frame()) % pattern.len() == 0);
            let periodicity = pattern.len() as u64 * n.slot_duration_us();
            let cfg = TddConfig::new(pattern.clone(), periodicity, n, 6, 4).unwrap();
            let period = pattern.len() as u64;
            for abs in 0..3 * u64::from(n.slots_per_frame()) {
                let a = slot_kind(&cfg, SlotIndex::from_absolute(abs, n));
                let b = slot_kind(&cfg, SlotIndex::from_absolute(abs + period, n));
                prop_assert_eq!(a, b);
            }
            // expansion length invariant
            let expanded = expand_pattern(&cfg, 2).unwrap();
            prop_assert_eq!(expanded.len(), 2 * usize::from(n.slots_per_frame()));
        }

        /// msg3_slot is monotone in k2.
        #[test]
        fn msg3_monotone_in_k2(frame in 0u32..50, slot in 0u16..20, k2 in 0u32..30, mu in 0u8..=3) {
            let n = Numerology::new(mu).unwrap();
            let slot = slot % n.slots_per_frame();
            let base = SlotIndex::new(frame, slot);
            let a = msg3_slot(base, k2, n).absolute(n);
            let b = msg3_slot(base, k2 + 1, n).absolute(n);
            prop_assert_eq!(b, a + 1);
        }
    }
}
