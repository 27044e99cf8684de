//! Command taxonomy, servo sweep, repeat-N delivery and the top-level
//! attack loop.

mod command;
mod link;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::feedback::{self, Channel, FeedbackOutcome, FeedbackParams, IdSet, RestoreAction, SentCommand};

pub use command::CommandKind;
pub use link::{
    beam_factor, delivery_probability, logistic, DeviceProfile, LinkBudget, Transmitter, AVERAGE_PROFILE,
    IPHONE_14_PRO_PROFILE,
};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct AttackConfig {
    pub angle_start_deg: f64,
    pub angle_end_deg: f64,
    pub angle_step_deg: f64,
    /// Consecutive plays of each Mute and Attack command.
    pub repeats_per_command: u32,
    /// Wait after each feedback command (s).
    pub window_s: f64,
    /// Nominal victim distance (m) used when no environment is supplied.
    pub distance_m: f64,
    /// Nominal background noise (dB SPL) used when no environment is supplied.
    pub noise_db: f64,
    /// Name of the victim's delivery profile.
    pub device_profile: String,
    pub delta_db_threshold: f64,
    pub ramp_window: usize,
    pub strong_floor_dbm: f64,
}

impl Default for AttackConfig {
    fn default() -> Self {
        let fb = FeedbackParams::default();
        Self {
            angle_start_deg: 0.0,
            angle_end_deg: 180.0,
            angle_step_deg: 12.0,
            repeats_per_command: 5,
            window_s: fb.window_s,
            distance_m: 8.5,
            noise_db: 55.0,
            device_profile: AVERAGE_PROFILE.into(),
            delta_db_threshold: fb.delta_db_threshold,
            ramp_window: fb.ramp_window,
            strong_floor_dbm: fb.strong_floor_dbm,
        }
    }
}

impl AttackConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.angle_step_deg > 0.0) {
            return Err(Error::param("angle_step_deg", "must be positive"));
        }
        if !(self.angle_start_deg <= self.angle_end_deg) {
            return Err(Error::param("angle_end_deg", "must not be below angle_start_deg"));
        }
        if self.repeats_per_command < 1 {
            return Err(Error::param("repeats_per_command", "must be at least 1"));
        }
        if !(self.distance_m > 0.0) {
            return Err(Error::param("distance_m", "must be positive"));
        }
        if !self.noise_db.is_finite() {
            return Err(Error::param("noise_db", "must be finite"));
        }
        DeviceProfile::builtin(&self.device_profile)?;
        self.feedback_params().validate()
    }

    pub fn feedback_params(&self) -> FeedbackParams {
        FeedbackParams {
            window_s: self.window_s,
            delta_db_threshold: self.delta_db_threshold,
            ramp_window: self.ramp_window,
            strong_floor_dbm: self.strong_floor_dbm,
        }
    }
}

/// Servo angles `start, start+step, …` up to `end` (included when on grid).
pub fn angle_sweep(config: &AttackConfig) -> Result<Vec<f64>> {
    let (start, end, step) = (config.angle_start_deg, config.angle_end_deg, config.angle_step_deg);
    if !(step > 0.0) {
        return Err(Error::param("angle_step_deg", "must be positive"));
    }
    if !(start <= end) || !start.is_finite() || !end.is_finite() {
        return Err(Error::param("angle_end_deg", "must not be below angle_start_deg"));
    }
    let n = ((end - start) / step + 1e-9).floor() as usize;
    Ok((0..=n).map(|i| start + i as f64 * step).collect())
}

/// Probability that at least one of `n` independent plays lands.
pub fn repeated_success_probability(p_single: f64, n: u32) -> Result<f64> {
    if !(0.0..=1.0).contains(&p_single) {
        return Err(Error::param("p_single", format!("{p_single} is not a probability")));
    }
    if n < 1 {
        return Err(Error::param("n", "must be at least 1"));
    }
    Ok(1.0 - (1.0 - p_single).powi(n as i32))
}

/// A world the attacker can aim at, transmit into and scan.
pub trait AttackEnvironment: Channel {
    /// Current time (s).
    fn now(&self) -> f64;

    /// Rotates the transmitter to `angle_deg`.
    fn aim(&mut self, angle_deg: f64) -> Result<()>;
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AngleOutcome {
    pub angle_deg: f64,
    pub success: bool,
    pub aborted: bool,
    pub target_ids: IdSet,
    pub dif1: IdSet,
    pub dif2: IdSet,
    pub filtered_ids: IdSet,
    pub started_t: f64,
    pub finished_t: f64,
}

impl AngleOutcome {
    fn new(angle_deg: f64, started_t: f64, finished_t: f64, o: &FeedbackOutcome) -> Self {
        Self {
            angle_deg,
            success: o.success,
            aborted: o.aborted,
            target_ids: o.target_ids.clone(),
            dif1: o.dif1.clone(),
            dif2: o.dif2.clone(),
            filtered_ids: o.filtered_ids.clone(),
            started_t,
            finished_t,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LoggedCommand {
    pub t: f64,
    pub angle_deg: f64,
    pub command: CommandKind,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AttackReport {
    pub seed: u64,
    pub success: bool,
    pub aborted: bool,
    pub success_angle_deg: Option<f64>,
    pub target_ids: IdSet,
    pub angles: Vec<AngleOutcome>,
    pub commands: Vec<LoggedCommand>,
    pub restore: Vec<RestoreAction>,
    pub started_t: f64,
    pub finished_t: f64,
}

impl AttackReport {
    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }
}

/// Sweeps the servo; at each angle plays Mute and Attack `repeats` times,
/// then runs a feedback round. Stops at the first confirmed angle after
/// restoring the victim. `seed` is recorded in the report; randomness lives
/// in the environment.
pub fn run_attack<E: AttackEnvironment + ?Sized>(
    config: &AttackConfig,
    env: &mut E,
    seed: u64,
) -> Result<AttackReport> {
    config.validate()?;
    let params = config.feedback_params();
    let mut report = AttackReport {
        seed,
        success: false,
        aborted: false,
        success_angle_deg: None,
        target_ids: IdSet::new(),
        angles: Vec::new(),
        commands: Vec::new(),
        restore: Vec::new(),
        started_t: env.now(),
        finished_t: env.now(),
    };
    for angle in angle_sweep(config)? {
        env.aim(angle)?;
        let t0 = env.now();
        for command in [CommandKind::Mute, CommandKind::Attack] {
            for _ in 0..config.repeats_per_command {
                env.send(t0, command)?;
                report.commands.push(LoggedCommand {
                    t: t0,
                    angle_deg: angle,
                    command,
                });
            }
        }
        let outcome = feedback::feedback_round(env, &params)?;
        report.commands.extend(
            outcome
                .commands
                .iter()
                .map(|&SentCommand { t, command }| LoggedCommand {
                    t,
                    angle_deg: angle,
                    command,
                }),
        );
        report.angles.push(AngleOutcome::new(angle, t0, env.now(), &outcome));
        if outcome.aborted {
            report.aborted = true;
            break;
        }
        if outcome.success {
            report.success = true;
            report.success_angle_deg = Some(angle);
            report.target_ids = outcome.target_ids.clone();
            let l1 = outcome.l1.as_ref().expect("successful round has L1");
            report.restore = feedback::restore(env, &outcome, l1)?;
            for a in &report.restore {
                if let RestoreAction::Sent { t, command } = *a {
                    report.commands.push(LoggedCommand {
                        t,
                        angle_deg: angle,
                        command,
                    });
                }
            }
            break;
        }
    }
    report.finished_t = env.now();
    Ok(report)
}
