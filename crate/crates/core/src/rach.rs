//! gNB scheduler and UE state machines for 4-step contention-based random
//! access: preamble selection, msg2 DCI+RAR placement under two scheduling
//! policies, RAR window monitoring, msg3 timing with frame-spaced
//! retransmissions, and msg4 contention resolution.
//!
//! RA-RNTI scrambling and the contention-resolution identity are abstracted
//! to exact tag matching: msg2 is matched by preamble, msg4 by UE tag.
//! Failed attempts restart at the next msg1 occasion with a fresh preamble
//! and no extra backoff.

use std::collections::HashMap;

use rand::Rng;
use thiserror::Error;

use crate::frame_timing::{
    classify_msg3_slot, msg3_slot, Msg3LandingClass, SlotIndex, SlotKind, TddConfig,
    SYMBOLS_PER_SLOT,
};
use crate::sliv::{validate_mapping, MappingType, MappingViolation, Sliv};

#[derive(Debug, Error, PartialEq, Eq)]
pub enum RachError {
    #[error("preamble pool must hold exactly 64 preambles, got {0}")]
    BadPreamblePool(u8),
    #[error("cbra preamble count {cbra} exceeds pool size {total}")]
    CbraExceedsPool { cbra: u8, total: u8 },
    #[error("cbra preamble count must be at least 1")]
    NoCbraPreambles,
    #[error("msg3 retransmission window must span at least 1 frame")]
    EmptyRetxWindow,
    #[error("msg1 slot {slot} is outside the {slots_per_frame}-slot frame")]
    Msg1SlotOutOfRange { slot: u16, slots_per_frame: u16 },
    #[error("msg2 allocation violates {0}: {1}")]
    Msg2Mapping(&'static str, MappingViolation),
    #[error("msg3 allocation violates {0}: {1}")]
    Msg3Mapping(&'static str, MappingViolation),
    #[error("attempt limit must be at least 1")]
    NoAttempts,
    #[error("no eligible msg2 slot within {window} slots of the preamble")]
    WindowExceeded { window: u16 },
    #[error("special slot has {dl} DL symbols; at least 2 are needed for DCI plus RAR")]
    SpecialSlotTooSmall { dl: u8 },
    #[error("event {event} is impossible for {actor} in its current phase")]
    IllegalTransition { actor: &'static str, event: &'static str },
}

/// gNB msg2 placement policy. `SpecialSlot` is the stock behavior (DCI and
/// RAR in the period's special slot); `LastFullDownlinkSlot` is the full-slot
/// fix.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum SchedulerPolicy {
    SpecialSlot,
    LastFullDownlinkSlot,
}

impl SchedulerPolicy {
    pub fn label(self) -> &'static str {
        match self {
            SchedulerPolicy::SpecialSlot => "special-slot",
            SchedulerPolicy::LastFullDownlinkSlot => "last-full-dl",
        }
    }
}

/// Random access configuration shared by gNB and UEs (the UE learns k2 and the
/// allocation lists from system information, so both sides derive identical
/// grants).
#[derive(Debug, Clone, PartialEq)]
pub struct RachConfig {
    pub total_preambles: u8,
    pub cbra_preambles: u8,
    pub ra_response_window_slots: u16,
    pub msg3_retx_window_frames: u8,
    pub k0: u16,
    pub k2: u16,
    pub msg2_sliv: Sliv,
    pub msg3_sliv: Sliv,
    pub msg1_slot: u16,
    pub scheduler_policy: SchedulerPolicy,
    /// RA cycles a UE may start before the trial is declared failed.
    pub max_attempts: u8,
}

impl RachConfig {
    pub fn validate(&self, tdd: &TddConfig) -> Result<(), Vec<RachError>> {
        let mut errors = Vec::new();
        if self.total_preambles != 64 {
            errors.push(RachError::BadPreamblePool(self.total_preambles));
        }
        if self.cbra_preambles > self.total_preambles {
            errors.push(RachError::CbraExceedsPool {
                cbra: self.cbra_preambles,
                total: self.total_preambles,
            });
        }
        if self.cbra_preambles == 0 {
            errors.push(RachError::NoCbraPreambles);
        }
        if self.msg3_retx_window_frames == 0 {
            errors.push(RachError::EmptyRetxWindow);
        }
        let spf = tdd.numerology().slots_per_frame();
        if self.msg1_slot >= spf {
            errors.push(RachError::Msg1SlotOutOfRange { slot: self.msg1_slot, slots_per_frame: spf });
        }
        if let Err(v) = validate_mapping(self.msg2_sliv, MappingType::PdschTypeA) {
            errors.push(RachError::Msg2Mapping(MappingType::PdschTypeA.label(), v));
        }
        if let Err(v) = validate_mapping(self.msg3_sliv, MappingType::PuschTypeB) {
            errors.push(RachError::Msg3Mapping(MappingType::PuschTypeB.label(), v));
        }
        if self.max_attempts == 0 {
            errors.push(RachError::NoAttempts);
        }
        if errors.is_empty() {
            Ok(())
        } else {
            Err(errors)
        }
    }
}

/// Opaque UE identity carried by msg3 and echoed in msg4.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct UeTag(pub u32);

impl std::fmt::Display for UeTag {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "ue{}", self.0)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum RaMessageKind {
    Msg1Preamble,
    Msg2Dci,
    Msg2Rar,
    Msg3,
    Msg4,
}

impl RaMessageKind {
    pub fn label(self) -> &'static str {
        match self {
            RaMessageKind::Msg1Preamble => "msg1",
            RaMessageKind::Msg2Dci => "msg2-dci",
            RaMessageKind::Msg2Rar => "msg2-rar",
            RaMessageKind::Msg3 => "msg3",
            RaMessageKind::Msg4 => "msg4",
        }
    }

    /// Uplink messages travel UE -> gNB.
    pub fn is_uplink(self) -> bool {
        matches!(self, RaMessageKind::Msg1Preamble | RaMessageKind::Msg3)
    }

    /// Control-plane transmissions (preamble, DCI) are modeled as robust:
    /// they fail only when the frontend does not amplify them, never on the
    /// fading draw. The length sweep calibration applies to the data-bearing
    /// RAR, msg3 and msg4 payloads.
    pub fn is_control(self) -> bool {
        matches!(self, RaMessageKind::Msg1Preamble | RaMessageKind::Msg2Dci)
    }
}

/// One over-the-air transmission. `symbols` respects the mapping type of the
/// kind; DCI always occupies exactly symbol 0 of its slot.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RaMessage {
    pub kind: RaMessageKind,
    pub tx_slot: SlotIndex,
    pub start_symbol: u8,
    pub length: u8,
    pub preamble: u8,
    pub ue_tag: Option<UeTag>,
}

impl RaMessage {
    pub fn symbols(&self) -> impl Iterator<Item = u8> {
        self.start_symbol..self.start_symbol + self.length
    }
}

/// Why an RA attempt (or the whole trial) failed.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum FailureReason {
    /// ra-ResponseWindow expired without a matching msg2.
    RarReceptionFailed,
    /// msg3 retransmission window closed without contention resolution.
    ContentionResolutionTimeout,
    /// msg4 resolved the contention in favor of another UE.
    ContentionLost,
    /// The simulation horizon ended mid-procedure.
    HorizonExceeded,
}

impl FailureReason {
    pub fn label(self) -> &'static str {
        match self {
            FailureReason::RarReceptionFailed => "rar-reception-failed",
            FailureReason::ContentionResolutionTimeout => "contention-resolution-timeout",
            FailureReason::ContentionLost => "contention-lost",
            FailureReason::HorizonExceeded => "horizon-exceeded",
        }
    }
}

/// Uniform draw over the contention-based preamble pool. The remaining
/// (contention-free and reserved) preambles exist in the pool accounting but
/// are never selected.
pub fn select_preamble<R: Rng + ?Sized>(rng: &mut R, config: &RachConfig) -> u8 {
    rng.random_range(0..config.cbra_preambles)
}

/// First slot strictly after `after` (within `window` slots) where the policy
/// places msg2 DCI. The special-slot policy falls back to the last full-DL
/// slot when the pattern has no special slot.
pub fn msg2_target_slot(
    policy: SchedulerPolicy,
    tdd: &TddConfig,
    after: SlotIndex,
    window: u16,
) -> Option<SlotIndex> {
    let numerology = tdd.numerology();
    let target_in_period = match policy {
        SchedulerPolicy::SpecialSlot => {
            tdd.special_in_period().or_else(|| tdd.last_full_dl_in_period())?
        }
        SchedulerPolicy::LastFullDownlinkSlot => tdd.last_full_dl_in_period()?,
    };
    let after_abs = after.absolute(numerology);
    let period = tdd.period_slots() as u64;
    (after_abs + 1..=after_abs + u64::from(window))
        .find(|abs| abs % period == target_in_period as u64)
        .map(|abs| SlotIndex::from_absolute(abs, numerology))
}

/// The msg2 pair the gNB emits in response to a preamble.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Msg2Schedule {
    pub dci: RaMessage,
    pub rar: RaMessage,
}

/// Place msg2 for a preamble received at `msg1_rx_slot`. Under the
/// special-slot policy the RAR is forced onto the special slot's remaining DL
/// symbols (start 1, length `special_dl_symbols - 1`); under the full-slot
/// policy the configured msg2 allocation applies.
pub fn schedule_msg2(
    config: &RachConfig,
    tdd: &TddConfig,
    msg1_rx_slot: SlotIndex,
    preamble: u8,
) -> Result<Msg2Schedule, RachError> {
    let numerology = tdd.numerology();
    let window = config.ra_response_window_slots;
    let dci_slot = msg2_target_slot(config.scheduler_policy, tdd, msg1_rx_slot, window)
        .ok_or(RachError::WindowExceeded { window })?;
    let rar_slot =
        SlotIndex::from_absolute(dci_slot.absolute(numerology) + u64::from(config.k0), numerology);
    // half-open window: the UE stops monitoring when the deadline slot starts
    if rar_slot.absolute(numerology) >= msg1_rx_slot.absolute(numerology) + u64::from(window) {
        return Err(RachError::WindowExceeded { window });
    }
    let landed_on_special = crate::frame_timing::slot_kind(tdd, dci_slot) == SlotKind::Special;
    let (rar_start, rar_length) = if landed_on_special {
        let dl = tdd.special_dl_symbols();
        if dl < 2 {
            return Err(RachError::SpecialSlotTooSmall { dl });
        }
        (1, dl - 1)
    } else {
        (config.msg2_sliv.start(), config.msg2_sliv.length())
    };
    Ok(Msg2Schedule {
        dci: RaMessage {
            kind: RaMessageKind::Msg2Dci,
            tx_slot: dci_slot,
            start_symbol: 0,
            length: 1,
            preamble,
            ue_tag: None,
        },
        rar: RaMessage {
            kind: RaMessageKind::Msg2Rar,
            tx_slot: rar_slot,
            start_symbol: rar_start,
            length: rar_length,
            preamble,
            ue_tag: None,
        },
    })
}

/// The msg3 uplink grant implied by a RAR ending in `msg2_end_slot`. The grant
/// is always emitted; landing diagnostics ride along so callers can surface
/// the failure instead of masking it.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Msg3Grant {
    pub slot: SlotIndex,
    pub sliv: Sliv,
    pub landing: Msg3LandingClass,
}

pub fn schedule_msg3_grant(
    config: &RachConfig,
    tdd: &TddConfig,
    msg2_end_slot: SlotIndex,
) -> Msg3Grant {
    let slot = msg3_slot(msg2_end_slot, u32::from(config.k2), tdd.numerology());
    Msg3Grant { slot, sliv: config.msg3_sliv, landing: classify_msg3_slot(tdd, slot) }
}

/// UE phase per the 4-step procedure, with failure/restart edges on timeouts.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum UePhase {
    Idle,
    AwaitingRar {
        preamble: u8,
        deadline: SlotIndex,
    },
    AwaitingMsg3Tx {
        preamble: u8,
        grant_slot: SlotIndex,
        retx_deadline: SlotIndex,
    },
    AwaitingMsg4 {
        preamble: u8,
        grant_slot: SlotIndex,
        next_retx: SlotIndex,
        retx_deadline: SlotIndex,
    },
    Connected,
    Failed(FailureReason),
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum UeEvent {
    /// A msg1 occasion where the harness has already drawn a fresh preamble.
    StartAttempt { slot: SlotIndex, preamble: u8 },
    /// A downlink message the channel delivered to this UE.
    Observed(RaMessage),
    /// Slot boundary used for deadline and retransmission checks.
    Tick(SlotIndex),
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum UeAction {
    Transmit(RaMessage),
    /// Ask the harness for a tick at the given slot.
    WakeAt(SlotIndex),
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Ue {
    pub tag: UeTag,
    pub phase: UePhase,
    /// RA cycles started so far.
    pub attempt_count: u8,
}

impl Ue {
    pub fn new(tag: UeTag) -> Self {
        Self { tag, phase: UePhase::Idle, attempt_count: 0 }
    }

    /// True while the UE can (re)start the procedure at the next occasion.
    pub fn can_start_attempt(&self, config: &RachConfig) -> bool {
        matches!(self.phase, UePhase::Idle | UePhase::Failed(_))
            && self.attempt_count < config.max_attempts
    }

    /// Terminal means the trial outcome for this UE is settled.
    pub fn is_terminal(&self, config: &RachConfig) -> bool {
        match self.phase {
            UePhase::Connected => true,
            UePhase::Failed(_) => self.attempt_count >= config.max_attempts,
            _ => false,
        }
    }

    pub fn step(
        &mut self,
        event: UeEvent,
        config: &RachConfig,
        tdd: &TddConfig,
    ) -> Result<Vec<UeAction>, RachError> {
        let numerology = tdd.numerology();
        match event {
            UeEvent::StartAttempt { slot, preamble } => {
                if !self.can_start_attempt(config) {
                    return Err(RachError::IllegalTransition {
                        actor: "ue",
                        event: "start-attempt",
                    });
                }
                self.attempt_count += 1;
                let deadline = SlotIndex::from_absolute(
                    slot.absolute(numerology) + u64::from(config.ra_response_window_slots),
                    numerology,
                );
                self.phase = UePhase::AwaitingRar { preamble, deadline };
                Ok(vec![
                    UeAction::Transmit(RaMessage {
                        kind: RaMessageKind::Msg1Preamble,
                        tx_slot: slot,
                        start_symbol: 0,
                        length: SYMBOLS_PER_SLOT,
                        preamble,
                        ue_tag: None,
                    }),
                    UeAction::WakeAt(deadline),
                ])
            }
            UeEvent::Observed(msg) => self.observe(msg, config, tdd),
            UeEvent::Tick(slot) => Ok(self.tick(slot, config)),
        }
    }

    fn observe(
        &mut self,
        msg: RaMessage,
        config: &RachConfig,
        tdd: &TddConfig,
    ) -> Result<Vec<UeAction>, RachError> {
        if msg.kind.is_uplink() {
            // UEs never receive uplink messages; routing one here is a
            // simulator bug.
            return Err(RachError::IllegalTransition { actor: "ue", event: msg.kind.label() });
        }
        let numerology = tdd.numerology();
        match (self.phase, msg.kind) {
            (UePhase::AwaitingRar { preamble, deadline }, RaMessageKind::Msg2Rar)
                if msg.preamble == preamble
                    && msg.tx_slot.absolute(numerology) < deadline.absolute(numerology) =>
            {
                // The grant is derived from the RAR end slot plus the
                // broadcast k2, so UE and gNB agree on it.
                let grant = schedule_msg3_grant(config, tdd, msg.tx_slot);
                let retx_deadline = SlotIndex::from_absolute(
                    grant.slot.absolute(numerology)
                        + u64::from(config.msg3_retx_window_frames)
                            * u64::from(numerology.slots_per_frame()),
                    numerology,
                );
                self.phase = UePhase::AwaitingMsg3Tx {
                    preamble,
                    grant_slot: grant.slot,
                    retx_deadline,
                };
                Ok(vec![UeAction::WakeAt(grant.slot)])
            }
            (UePhase::AwaitingMsg4 { preamble, .. }, RaMessageKind::Msg4)
                if msg.preamble == preamble =>
            {
                if msg.ue_tag == Some(self.tag) {
                    self.phase = UePhase::Connected;
                } else {
                    // Contention resolved for someone else; restart at the
                    // next occasion with a fresh preamble.
                    self.phase = UePhase::Failed(FailureReason::ContentionLost);
                }
                Ok(vec![])
            }
            // DCI observations, foreign preambles, and late arrivals are
            // legal but carry no transition.
            _ => Ok(vec![]),
        }
    }

    fn tick(&mut self, slot: SlotIndex, config: &RachConfig) -> Vec<UeAction> {
        match self.phase {
            UePhase::AwaitingRar { deadline, .. } if slot >= deadline => {
                self.phase = UePhase::Failed(FailureReason::RarReceptionFailed);
                vec![]
            }
            UePhase::AwaitingMsg3Tx { preamble, grant_slot, retx_deadline }
                if slot >= grant_slot =>
            {
                let next_retx = SlotIndex::new(grant_slot.frame + 1, grant_slot.slot);
                self.phase =
                    UePhase::AwaitingMsg4 { preamble, grant_slot, next_retx, retx_deadline };
                vec![
                    UeAction::Transmit(self.msg3(config, preamble, grant_slot)),
                    UeAction::WakeAt(next_retx.min(retx_deadline)),
                ]
            }
            UePhase::AwaitingMsg4 { preamble, grant_slot, next_retx, retx_deadline } => {
                if slot >= retx_deadline {
                    self.phase = UePhase::Failed(FailureReason::ContentionResolutionTimeout);
                    vec![]
                } else if slot >= next_retx {
                    // retransmit one frame later at the same slot position
                    let bumped = SlotIndex::new(next_retx.frame + 1, next_retx.slot);
                    self.phase = UePhase::AwaitingMsg4 {
                        preamble,
                        grant_slot,
                        next_retx: bumped,
                        retx_deadline,
                    };
                    vec![
                        UeAction::Transmit(self.msg3(config, preamble, next_retx)),
                        UeAction::WakeAt(bumped.min(retx_deadline)),
                    ]
                } else {
                    vec![]
                }
            }
            _ => vec![],
        }
    }

    fn msg3(&self, config: &RachConfig, preamble: u8, slot: SlotIndex) -> RaMessage {
        RaMessage {
            kind: RaMessageKind::Msg3,
            tx_slot: slot,
            start_symbol: config.msg3_sliv.start(),
            length: config.msg3_sliv.length(),
            preamble,
            ue_tag: Some(self.tag),
        }
    }
}

/// A msg2 already sent for a preamble, with the msg3 window it opened.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
struct PendingGrant {
    grant_slot: SlotIndex,
    window_end: SlotIndex,
    winner: Option<UeTag>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum GnbEvent {
    Observed(RaMessage),
    Tick(SlotIndex),
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum GnbAction {
    Transmit(RaMessage),
    WakeAt(SlotIndex),
}

#[derive(Debug, Clone, Default)]
pub struct Gnb {
    pending: HashMap<u8, PendingGrant>,
    /// UE tags whose contention the gNB has resolved.
    pub resolved: Vec<UeTag>,
}

impl Gnb {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn step(
        &mut self,
        event: GnbEvent,
        config: &RachConfig,
        tdd: &TddConfig,
    ) -> Result<Vec<GnbAction>, RachError> {
        match event {
            GnbEvent::Observed(msg) => self.observe(msg, config, tdd),
            GnbEvent::Tick(slot) => {
                let numerology = tdd.numerology();
                let now = slot.absolute(numerology);
                self.pending.retain(|_, g| g.window_end.absolute(numerology) > now);
                Ok(vec![])
            }
        }
    }

    fn observe(
        &mut self,
        msg: RaMessage,
        config: &RachConfig,
        tdd: &TddConfig,
    ) -> Result<Vec<GnbAction>, RachError> {
        if !msg.kind.is_uplink() {
            return Err(RachError::IllegalTransition { actor: "gnb", event: msg.kind.label() });
        }
        let numerology = tdd.numerology();
        match msg.kind {
            RaMessageKind::Msg1Preamble => {
                // At most one msg2 per preamble per window; duplicates (the
                // same UE retrying, or a collision partner) share the RAR.
                if self.pending.contains_key(&msg.preamble) {
                    return Ok(vec![]);
                }
                let schedule = schedule_msg2(config, tdd, msg.tx_slot, msg.preamble)?;
                let grant = schedule_msg3_grant(config, tdd, schedule.rar.tx_slot);
                let window_end = SlotIndex::from_absolute(
                    grant.slot.absolute(numerology)
                        + u64::from(config.msg3_retx_window_frames)
                            * u64::from(numerology.slots_per_frame()),
                    numerology,
                );
                self.pending.insert(
                    msg.preamble,
                    PendingGrant { grant_slot: grant.slot, window_end, winner: None },
                );
                Ok(vec![
                    GnbAction::Transmit(schedule.dci),
                    GnbAction::Transmit(schedule.rar),
                    GnbAction::WakeAt(window_end),
                ])
            }
            RaMessageKind::Msg3 => {
                let Some(grant) = self.pending.get_mut(&msg.preamble) else {
                    return Ok(vec![]);
                };
                let now = msg.tx_slot.absolute(numerology);
                if now < grant.grant_slot.absolute(numerology)
                    || now >= grant.window_end.absolute(numerology)
                {
                    return Ok(vec![]);
                }
                if grant.winner.is_some() {
                    // A msg3 was already decoded for this grant; later copies
                    // are ignored.
                    return Ok(vec![]);
                }
                let Some(tag) = msg.ue_tag else {
                    return Err(RachError::IllegalTransition { actor: "gnb", event: "msg3-no-tag" });
                };
                grant.winner = Some(tag);
                self.resolved.push(tag);
                let msg4_slot = msg2_target_slot(
                    config.scheduler_policy,
                    tdd,
                    msg.tx_slot,
                    config.ra_response_window_slots,
                )
                .ok_or(RachError::WindowExceeded { window: config.ra_response_window_slots })?;
                let (start, length) =
                    if crate::frame_timing::slot_kind(tdd, msg4_slot) == SlotKind::Special {
                        let dl = tdd.special_dl_symbols();
                        if dl < 2 {
                            return Err(RachError::SpecialSlotTooSmall { dl });
                        }
                        (1, dl - 1)
                    } else {
                        (config.msg2_sliv.start(), config.msg2_sliv.length())
                    };
                Ok(vec![GnbAction::Transmit(RaMessage {
                    kind: RaMessageKind::Msg4,
                    tx_slot: msg4_slot,
                    start_symbol: start,
                    length,
                    preamble: msg.preamble,
                    ue_tag: Some(tag),
                })])
            }
            _ => unreachable!("uplink kinds are msg1 and msg3"),
        }
    }
}
