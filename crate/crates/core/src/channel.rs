//! Parametric stochastic link model deciding, per transmitted RA message,
//! whether the receiver decodes it.
//!
//! This is a phenomenological model, not a 3GPP channel: per-symbol fading is
//! log-normal (normal in dB), the fades of an L-symbol message combine
//! coherently (sum normalized by sqrt(L), keeping the message-level spread at
//! the per-symbol sigma), integration/coding gain enters as a calibratable
//! `redundancy_gain_db` per doubling of the length, and near-receiver
//! overload is a penalty that shrinks with length and distance. With the
//! saturation term off, the decode probability is non-decreasing in length
//! and non-increasing in distance and obstruction.
//!
//! Control transmissions (the preamble and the DCI) are robust: they fail
//! only when the frontend does not amplify them. The length calibration
//! applies to the data-bearing RAR, msg3, and msg4 payloads. The start
//! symbol deliberately does not enter the model: observed reliability
//! effects track the allocation length, so anyone extending the calibration
//! to start-symbol sensitivity starts here.

use rand::Rng;
use rand_distr::{Distribution, StandardNormal};
use thiserror::Error;

use crate::frontend::{AmpState, FrontendTimeline};
use crate::rach::RaMessage;

#[derive(Debug, Error, PartialEq)]
pub enum ChannelError {
    #[error("site '{0}' referenced by a calibration target is not defined")]
    UnknownSite(String),
    #[error("calibration needs at least one target")]
    NoTargets,
    #[error("calibration diverged: worst residual {worst:.3} exceeds bound {bound:.3}")]
    CalibrationDiverged { worst: f64, bound: f64 },
    #[error("invalid site profile: {0}")]
    InvalidSite(String),
    #[error("invalid channel parameters: {0}")]
    InvalidParams(String),
}

/// Standard normal CDF.
pub fn normal_cdf(x: f64) -> f64 {
    0.5 * (1.0 + libm::erf(x / std::f64::consts::SQRT_2))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Direction {
    Downlink,
    Uplink,
}

/// One UE deployment location relative to the gNB.
#[derive(Debug, Clone, PartialEq)]
pub struct SiteProfile {
    pub name: String,
    pub distance_m: f64,
    pub los: bool,
    pub obstruction_db: f64,
    /// Near-gNB receiver-overload proxy; 0 disables saturation for the site.
    pub saturation_factor: f64,
}

impl SiteProfile {
    pub fn new(
        name: impl Into<String>,
        distance_m: f64,
        los: bool,
        obstruction_db: f64,
        saturation_factor: f64,
    ) -> Result<Self, ChannelError> {
        let site = Self { name: name.into(), distance_m, los, obstruction_db, saturation_factor };
        site.validate()?;
        Ok(site)
    }

    pub fn validate(&self) -> Result<(), ChannelError> {
        if self.distance_m.is_nan() || self.distance_m <= 0.0 {
            return Err(ChannelError::InvalidSite(format!(
                "{}: distance must be positive, got {}",
                self.name, self.distance_m
            )));
        }
        if self.los && self.obstruction_db != 0.0 {
            return Err(ChannelError::InvalidSite(format!(
                "{}: line-of-sight sites must have zero obstruction, got {} dB",
                self.name, self.obstruction_db
            )));
        }
        if self.obstruction_db < 0.0 || self.saturation_factor < 0.0 {
            return Err(ChannelError::InvalidSite(format!(
                "{}: obstruction and saturation factor must be non-negative",
                self.name
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ChannelParams {
    /// Mean per-symbol SNR at the reference distance.
    pub base_snr_db: f64,
    pub reference_distance_m: f64,
    pub pathloss_exponent: f64,
    /// Per-symbol log-normal fading spread.
    pub fading_sigma_db: f64,
    pub decode_threshold_db: f64,
    /// Gain per doubling of the allocation length.
    pub redundancy_gain_db: f64,
    /// Receiver-overload penalty scale; shaped by length knee and distance.
    pub saturation_penalty_db: f64,
    /// Saturation is active only below this distance.
    pub near_field_radius_m: f64,
    /// Length at which the overload penalty has decayed to half.
    pub saturation_length_knee: f64,
    /// Logistic width of the penalty roll-off in symbols.
    pub saturation_length_width: f64,
    /// Optional slow-fading spread drawn once per trial; 0 disables it.
    pub shadowing_sigma_db: f64,
}

impl ChannelParams {
    /// A channel that always decodes whatever the frontend amplifies.
    pub fn perfect() -> Self {
        Self {
            base_snr_db: 200.0,
            reference_distance_m: 1.0,
            pathloss_exponent: 2.0,
            fading_sigma_db: 0.0,
            decode_threshold_db: 0.0,
            redundancy_gain_db: 0.0,
            saturation_penalty_db: 0.0,
            near_field_radius_m: 0.0,
            saturation_length_knee: 8.0,
            saturation_length_width: 0.6,
            shadowing_sigma_db: 0.0,
        }
    }

    pub fn validate(&self) -> Result<(), ChannelError> {
        let fields = [
            ("base_snr_db", self.base_snr_db),
            ("reference_distance_m", self.reference_distance_m),
            ("pathloss_exponent", self.pathloss_exponent),
            ("fading_sigma_db", self.fading_sigma_db),
            ("decode_threshold_db", self.decode_threshold_db),
            ("redundancy_gain_db", self.redundancy_gain_db),
            ("saturation_penalty_db", self.saturation_penalty_db),
            ("near_field_radius_m", self.near_field_radius_m),
            ("saturation_length_knee", self.saturation_length_knee),
            ("saturation_length_width", self.saturation_length_width),
            ("shadowing_sigma_db", self.shadowing_sigma_db),
        ];
        for (name, v) in fields {
            if !v.is_finite() {
                return Err(ChannelError::InvalidParams(format!("{name} must be finite")));
            }
        }
        if self.reference_distance_m <= 0.0 {
            return Err(ChannelError::InvalidParams("reference distance must be positive".into()));
        }
        for (name, v) in [
            ("fading_sigma_db", self.fading_sigma_db),
            ("redundancy_gain_db", self.redundancy_gain_db),
            ("saturation_penalty_db", self.saturation_penalty_db),
            ("shadowing_sigma_db", self.shadowing_sigma_db),
            ("saturation_length_width", self.saturation_length_width),
        ] {
            if v < 0.0 {
                return Err(ChannelError::InvalidParams(format!("{name} must be non-negative")));
            }
        }
        Ok(())
    }

    /// Mean per-symbol SNR at a site: base minus pathloss minus obstruction.
    pub fn mean_snr_db(&self, site: &SiteProfile) -> f64 {
        self.base_snr_db
            - 10.0 * self.pathloss_exponent * (site.distance_m / self.reference_distance_m).log10()
            - site.obstruction_db
    }

    /// Receiver-overload penalty in dB. Only the gNB receive chain saturates,
    /// so the term applies to uplink messages, and only inside the near-field
    /// radius. It decays logistically with length and linearly with distance.
    pub fn saturation_db(&self, site: &SiteProfile, length: u8, direction: Direction) -> f64 {
        if direction != Direction::Uplink
            || site.saturation_factor == 0.0
            || site.distance_m >= self.near_field_radius_m
        {
            return 0.0;
        }
        let distance_shrink = 1.0 - site.distance_m / self.near_field_radius_m;
        let width = self.saturation_length_width.max(1e-9);
        let length_shrink =
            1.0 / (1.0 + ((f64::from(length) - self.saturation_length_knee) / width).exp());
        site.saturation_factor * self.saturation_penalty_db * distance_shrink * length_shrink
    }

    /// Decode margin in dB before fading (mean SNR + redundancy - saturation
    /// - threshold).
    fn margin_db(&self, site: &SiteProfile, length: u8, direction: Direction) -> f64 {
        self.mean_snr_db(site) + self.redundancy_gain_db * f64::from(length).log2()
            - self.saturation_db(site, length, direction)
            - self.decode_threshold_db
    }
}

/// Closed-form probability that an L-symbol data message decodes, with the
/// per-trial shadowing offset at zero.
pub fn decode_probability(
    params: &ChannelParams,
    site: &SiteProfile,
    length: u8,
    direction: Direction,
) -> f64 {
    assert!(length >= 1, "length must be at least 1");
    let margin = params.margin_db(site, length, direction);
    if params.fading_sigma_db == 0.0 {
        if margin >= 0.0 {
            1.0
        } else {
            0.0
        }
    } else {
        normal_cdf(margin / params.fading_sigma_db)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum DecodeReason {
    Decoded,
    BelowThreshold,
    /// The sender's power amplifier was not active for every scheduled symbol.
    NotAmplified,
    /// At least one scheduled symbol fell into a guard period.
    GuardDropped,
}

impl DecodeReason {
    pub fn label(self) -> &'static str {
        match self {
            DecodeReason::Decoded => "decoded",
            DecodeReason::BelowThreshold => "below-threshold",
            DecodeReason::NotAmplified => "not-amplified",
            DecodeReason::GuardDropped => "guard-dropped",
        }
    }
}

/// Per-message delivery record.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DecodeVerdict {
    pub delivered: bool,
    pub effective_snr_db: Option<f64>,
    pub reason: DecodeReason,
}

/// Evaluate one transmission. Frontend gating comes first and is
/// channel-independent: if any scheduled symbol is not amplified at the
/// sender, the message is dead regardless of the stochastic parameters.
/// `slot_in_period` locates `message.tx_slot` within the sender timeline.
pub fn sample_decode<R: Rng + ?Sized>(
    rng: &mut R,
    params: &ChannelParams,
    site: &SiteProfile,
    message: &RaMessage,
    sender_timeline: &FrontendTimeline,
    slot_in_period: usize,
    trial_shadow_db: f64,
) -> DecodeVerdict {
    let mut saw_rx = false;
    let mut saw_guard = false;
    for symbol in message.symbols() {
        match sender_timeline.amp_state(slot_in_period, symbol) {
            AmpState::TxAmplified => {}
            AmpState::RxAmplified => saw_rx = true,
            AmpState::Guard => saw_guard = true,
        }
    }
    if saw_rx {
        return DecodeVerdict {
            delivered: false,
            effective_snr_db: None,
            reason: DecodeReason::NotAmplified,
        };
    }
    if saw_guard {
        return DecodeVerdict {
            delivered: false,
            effective_snr_db: None,
            reason: DecodeReason::GuardDropped,
        };
    }
    if message.kind.is_control() {
        return DecodeVerdict {
            delivered: true,
            effective_snr_db: None,
            reason: DecodeReason::Decoded,
        };
    }
    let direction =
        if message.kind.is_uplink() { Direction::Uplink } else { Direction::Downlink };
    let length = message.length;
    // Coherent combination of the per-symbol fades: sum over L draws divided
    // by sqrt(L), which keeps the message-level spread at fading_sigma_db.
    let fade = if params.fading_sigma_db == 0.0 {
        0.0
    } else {
        let sum: f64 =
            (0..length).map(|_| <StandardNormal as Distribution<f64>>::sample(&StandardNormal, rng)).sum();
        params.fading_sigma_db * sum / f64::from(length).sqrt()
    };
    let effective = params.margin_db(site, length, direction)
        + params.decode_threshold_db
        + trial_shadow_db
        + fade;
    let delivered = effective >= params.decode_threshold_db;
    DecodeVerdict {
        delivered,
        effective_snr_db: Some(effective),
        reason: if delivered { DecodeReason::Decoded } else { DecodeReason::BelowThreshold },
    }
}

/// Message class a calibration target refers to; fixes the link direction.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TargetMessage {
    Msg2,
    Msg3,
}

impl TargetMessage {
    pub fn direction(self) -> Direction {
        match self {
            TargetMessage::Msg2 => Direction::Downlink,
            TargetMessage::Msg3 => Direction::Uplink,
        }
    }

    pub fn label(self) -> &'static str {
        match self {
            TargetMessage::Msg2 => "msg2",
            TargetMessage::Msg3 => "msg3",
        }
    }
}

/// One calibration constraint: a per-transmission decode probability for a
/// message class and length at a named site.
#[derive(Debug, Clone, PartialEq)]
pub struct CalibrationTarget {
    pub site: String,
    pub message: TargetMessage,
    pub length: u8,
    pub probability: f64,
}

/// Parse the calibration target file: one target per line,
/// `site, msg_kind, length, probability`, with `#` comments.
pub fn parse_targets(text: &str) -> Result<Vec<CalibrationTarget>, String> {
    let mut targets = Vec::new();
    for (lineno, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split(',').map(str::trim).collect();
        if fields.len() != 4 {
            return Err(format!("line {}: expected 4 comma-separated fields", lineno + 1));
        }
        let message = match fields[1] {
            "msg2" => TargetMessage::Msg2,
            "msg3" => TargetMessage::Msg3,
            other => return Err(format!("line {}: unknown message kind '{other}'", lineno + 1)),
        };
        let length: u8 = fields[2]
            .parse()
            .map_err(|_| format!("line {}: bad length '{}'", lineno + 1, fields[2]))?;
        if length == 0 || length > 14 {
            return Err(format!("line {}: length must be 1..=14", lineno + 1));
        }
        let probability: f64 = fields[3]
            .parse()
            .map_err(|_| format!("line {}: bad probability '{}'", lineno + 1, fields[3]))?;
        if !(0.0..=1.0).contains(&probability) {
            return Err(format!("line {}: probability must be in [0, 1]", lineno + 1));
        }
        targets.push(CalibrationTarget {
            site: fields[0].to_string(),
            message,
            length,
            probability,
        });
    }
    Ok(targets)
}

#[derive(Debug, Clone)]
pub struct CalibrationOptions {
    /// Worst per-target absolute residual tolerated before declaring
    /// divergence.
    pub max_abs_residual: f64,
    /// Coordinate-descent passes.
    pub sweeps: usize,
}

impl Default for CalibrationOptions {
    fn default() -> Self {
        Self { max_abs_residual: 0.2, sweeps: 40 }
    }
}

#[derive(Debug, Clone)]
pub struct CalibrationOutcome {
    pub params: ChannelParams,
    /// Signed residual (model minus target) per target, in target order.
    pub residuals: Vec<f64>,
    pub worst_abs_residual: f64,
    pub sum_squared_error: f64,
}

/// Fit (threshold, fading sigma, redundancy gain, saturation penalty) to the
/// targets by coordinate descent, holding the propagation geometry (base SNR,
/// pathloss exponent, radii) at the values in `init`.
pub fn calibrate(
    targets: &[CalibrationTarget],
    sites: &[SiteProfile],
    init: &ChannelParams,
    opts: &CalibrationOptions,
) -> Result<CalibrationOutcome, ChannelError> {
    if targets.is_empty() {
        return Err(ChannelError::NoTargets);
    }
    let resolved: Vec<(&SiteProfile, &CalibrationTarget)> = targets
        .iter()
        .map(|t| {
            sites
                .iter()
                .find(|s| s.name == t.site)
                .map(|s| (s, t))
                .ok_or_else(|| ChannelError::UnknownSite(t.site.clone()))
        })
        .collect::<Result<_, _>>()?;

    let objective = |params: &ChannelParams| -> f64 {
        resolved
            .iter()
            .map(|(site, t)| {
                let p = decode_probability(params, site, t.length, t.message.direction());
                (p - t.probability).powi(2)
            })
            .sum()
    };

    // (bounds, accessor) per optimized coordinate
    type Coord = (f64, f64, fn(&mut ChannelParams) -> &mut f64);
    let coords: [Coord; 4] = [
        (-40.0, 60.0, |p| &mut p.decode_threshold_db),
        (0.25, 12.0, |p| &mut p.fading_sigma_db),
        (0.0, 8.0, |p| &mut p.redundancy_gain_db),
        (0.0, 120.0, |p| &mut p.saturation_penalty_db),
    ];

    let mut params = init.clone();
    let mut best = objective(&params);
    for _ in 0..opts.sweeps {
        let before = best;
        for (lo, hi, get) in coords {
            // coarse grid then golden-section refinement around the best cell
            let n = 48;
            let mut best_x = *get(&mut params);
            let mut best_f = best;
            for i in 0..=n {
                let x = lo + (hi - lo) * i as f64 / n as f64;
                *get(&mut params) = x;
                let f = objective(&params);
                if f < best_f {
                    best_f = f;
                    best_x = x;
                }
            }
            let cell = (hi - lo) / n as f64;
            let (mut a, mut b) = ((best_x - cell).max(lo), (best_x + cell).min(hi));
            for _ in 0..60 {
                let m1 = a + (b - a) / 3.0;
                let m2 = b - (b - a) / 3.0;
                *get(&mut params) = m1;
                let f1 = objective(&params);
                *get(&mut params) = m2;
                let f2 = objective(&params);
                if f1 < f2 {
                    b = m2;
                    if f1 < best_f {
                        best_f = f1;
                        best_x = m1;
                    }
                } else {
                    a = m1;
                    if f2 < best_f {
                        best_f = f2;
                        best_x = m2;
                    }
                }
            }
            *get(&mut params) = best_x;
            best = best_f;
        }
        if before - best < 1e-12 {
            break;
        }
    }

    let residuals: Vec<f64> = resolved
        .iter()
        .map(|(site, t)| {
            decode_probability(&params, site, t.length, t.message.direction()) - t.probability
        })
        .collect();
    let worst = residuals.iter().fold(0.0f64, |acc, r| acc.max(r.abs()));
    if worst > opts.max_abs_residual {
        return Err(ChannelError::CalibrationDiverged { worst, bound: opts.max_abs_residual });
    }
    Ok(CalibrationOutcome {
        params,
        worst_abs_residual: worst,
        sum_squared_error: residuals.iter().map(|r| r * r).sum(),
        residuals,
    })
}
