//! Amplifier switching model for the GPIO-controlled PA/LNA frontend.
//!
//! Two policies are modeled. Slot-granular switching is the observed stack
//! behavior: the control signal is high for every symbol of every full-DL
//! slot and low everywhere else, so the special slot is treated as an uplink
//! slot and its DL symbols are never amplified. Symbol-granular switching is
//! the naive fix: within the special slot the PA covers the DL symbols, the
//! guard symbols pass nothing, and the LNA covers the UL symbols.
//!
//! Switching is instantaneous at symbol boundaries by default; an optional
//! settling-symbol count turns the first symbols after each direction change
//! into guard symbols for sensitivity studies.

use std::fmt;

use crate::frame_timing::{SlotKind, TddConfig, SYMBOLS_PER_SLOT};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum SwitchingKind {
    SlotGranular,
    SymbolGranular,
}

impl SwitchingKind {
    pub fn label(self) -> &'static str {
        match self {
            SwitchingKind::SlotGranular => "slot-granular",
            SwitchingKind::SymbolGranular => "symbol-granular",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct SwitchingPolicy {
    pub kind: SwitchingKind,
    /// Symbols lost to amplifier settling after each TX/RX direction change.
    pub settling_symbols: u8,
}

impl SwitchingPolicy {
    pub fn slot_granular() -> Self {
        Self { kind: SwitchingKind::SlotGranular, settling_symbols: 0 }
    }

    pub fn symbol_granular() -> Self {
        Self { kind: SwitchingKind::SymbolGranular, settling_symbols: 0 }
    }
}

/// Amplifier state for one (slot, symbol) position.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum AmpState {
    TxAmplified,
    RxAmplified,
    /// Neither amplifier is active; anything scheduled here is dropped.
    Guard,
}

impl AmpState {
    pub fn as_char(self) -> char {
        match self {
            AmpState::TxAmplified => 'T',
            AmpState::RxAmplified => 'R',
            AmpState::Guard => 'G',
        }
    }

    fn mirrored(self) -> Self {
        match self {
            AmpState::TxAmplified => AmpState::RxAmplified,
            AmpState::RxAmplified => AmpState::TxAmplified,
            AmpState::Guard => AmpState::Guard,
        }
    }
}

/// Per-symbol amplifier state over one TDD period.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FrontendTimeline {
    states: Vec<[AmpState; SYMBOLS_PER_SLOT as usize]>,
}

impl FrontendTimeline {
    pub fn period_slots(&self) -> usize {
        self.states.len()
    }

    /// Amplifier state at a position inside the period. Positions outside the
    /// period are a caller bug.
    pub fn amp_state(&self, slot_in_period: usize, symbol: u8) -> AmpState {
        assert!(symbol < SYMBOLS_PER_SLOT, "symbol {symbol} out of range");
        self.states[slot_in_period][usize::from(symbol)]
    }

    pub fn is_transmittable(&self, slot_in_period: usize, symbol: u8) -> bool {
        self.amp_state(slot_in_period, symbol) == AmpState::TxAmplified
    }

    pub fn is_receivable(&self, slot_in_period: usize, symbol: u8) -> bool {
        self.amp_state(slot_in_period, symbol) == AmpState::RxAmplified
    }

    /// The peer-side timeline: the UE transmits where the gNB receives and
    /// vice versa; guard symbols stay guard. Both ends derive their switching
    /// from the same TDD configuration, so mirroring is the consistent model
    /// and sender-side amplification checks suffice for delivery.
    pub fn mirrored(&self) -> Self {
        Self {
            states: self
                .states
                .iter()
                .map(|slot| {
                    let mut out = *slot;
                    for s in out.iter_mut() {
                        *s = s.mirrored();
                    }
                    out
                })
                .collect(),
        }
    }

    /// One line per slot, 14 characters from {T, R, G}. Used by the CLI
    /// timeline dump and the golden-file tests.
    pub fn dump(&self) -> String {
        let mut out = String::with_capacity(self.states.len() * 15);
        for slot in &self.states {
            for state in slot {
                out.push(state.as_char());
            }
            out.push('\n');
        }
        out
    }
}

impl fmt::Display for FrontendTimeline {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.dump())
    }
}

/// Derive the gNB-side amplifier timeline from the TDD configuration and the
/// switching policy.
pub fn build_timeline(config: &TddConfig, policy: SwitchingPolicy) -> FrontendTimeline {
    let dl = config.special_dl_symbols();
    let guard = config.guard_symbols();
    let states = config
        .pattern()
        .iter()
        .map(|kind| {
            let mut slot = [AmpState::RxAmplified; SYMBOLS_PER_SLOT as usize];
            match (kind, policy.kind) {
                (SlotKind::FullDownlink, _) => slot.fill(AmpState::TxAmplified),
                (SlotKind::FullUplink, _) => {}
                // The stack drives the control line per slot, so the special
                // slot sits entirely on the receive side.
                (SlotKind::Special, SwitchingKind::SlotGranular) => {}
                (SlotKind::Special, SwitchingKind::SymbolGranular) => {
                    for (i, s) in slot.iter_mut().enumerate() {
                        let i = i as u8;
                        *s = if i < dl {
                            AmpState::TxAmplified
                        } else if i < dl + guard {
                            AmpState::Guard
                        } else {
                            AmpState::RxAmplified
                        };
                    }
                }
            }
            slot
        })
        .collect();
    let mut timeline = FrontendTimeline { states };
    if policy.settling_symbols > 0 {
        apply_settling(&mut timeline, policy.settling_symbols);
    }
    timeline
}

/// Blank out the first `settling` symbols after every TX<->RX transition,
/// treating the period as cyclic (the pattern tiles).
fn apply_settling(timeline: &mut FrontendTimeline, settling: u8) {
    let flat: Vec<AmpState> = timeline.states.iter().flatten().copied().collect();
    let n = flat.len();
    let mut guarded = flat.clone();
    for i in 0..n {
        let prev = flat[(i + n - 1) % n];
        if flat[i] != prev && flat[i] != AmpState::Guard && prev != AmpState::Guard {
            for k in 0..usize::from(settling).min(n) {
                let j = (i + k) % n;
                if flat[j] == flat[i] {
                    guarded[j] = AmpState::Guard;
                } else {
                    break;
                }
            }
        }
    }
    for (i, state) in guarded.into_iter().enumerate() {
        timeline.states[i / usize::from(SYMBOLS_PER_SLOT)][i % usize::from(SYMBOLS_PER_SLOT)] =
            state;
    }
}
