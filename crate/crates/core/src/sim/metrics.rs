use serde::{Deserialize, Serialize};

use super::scenarios::FeedbackScenario;
use super::{simulate_stream, EnvironmentScript, Event, EventKind, Role, SimEnv};
use crate::attack::{run_attack, AttackConfig, AttackEnvironment, CommandKind};
use crate::error::{Error, Result};
use crate::feedback::{feedback_round, FeedbackOutcome};

/// Wilson score interval for `successes` out of `trials` at normal quantile `z`.
pub fn wilson_interval(successes: u64, trials: u64, z: f64) -> (f64, f64) {
    if trials == 0 {
        return (0.0, 1.0);
    }
    let n = trials as f64;
    let p = successes as f64 / n;
    let z2 = z * z;
    let denom = 1.0 + z2 / n;
    let center = (p + z2 / (2.0 * n)) / denom;
    let half = z * (p * (1.0 - p) / n + z2 / (4.0 * n * n)).sqrt() / denom;
    let lo = if successes == 0 { 0.0 } else { (center - half).max(0.0) };
    let hi = if successes >= trials {
        1.0
    } else {
        (center + half).min(1.0)
    };
    (lo, hi)
}

const Z95: f64 = 1.959_963_984_540_054;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SuccessRate {
    pub successes: u64,
    pub trials: u64,
    pub rate: f64,
    pub wilson_lo: f64,
    pub wilson_hi: f64,
}

impl SuccessRate {
    pub fn new(successes: u64, trials: u64) -> Self {
        let (wilson_lo, wilson_hi) = wilson_interval(successes, trials, Z95);
        Self {
            successes,
            trials,
            rate: if trials == 0 {
                0.0
            } else {
                successes as f64 / trials as f64
            },
            wilson_lo,
            wilson_hi,
        }
    }
}

/// Fraction of `trials` seeded runs (streams `0..trials`) whose attack
/// confirmed a target.
pub fn success_rate(env: &EnvironmentScript, config: &AttackConfig, trials: u64) -> Result<SuccessRate> {
    let mut ok = 0;
    for stream in 0..trials {
        ok += simulate_stream(env, config, stream)?.report.success as u64;
    }
    Ok(SuccessRate::new(ok, trials))
}

/// Fraction of runs in which every victim was muted, attacked, confirmed
/// and reset.
pub fn full_chain_success(
    env: &EnvironmentScript,
    config: &AttackConfig,
    rounds: u64,
    first_stream: u64,
) -> Result<SuccessRate> {
    let victims: Vec<String> = env.victims().map(|v| v.id.clone()).collect();
    if victims.is_empty() {
        return Err(Error::param("devices", "full-chain estimate needs a victim"));
    }
    let mut ok = 0;
    for stream in first_stream..first_stream + rounds {
        let run = simulate_stream(env, config, stream)?;
        ok += victims.iter().all(|v| run.chain_complete(v)) as u64;
    }
    Ok(SuccessRate::new(ok, rounds))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RsaRow {
    pub distance_m: f64,
    #[serde(flatten)]
    pub rate: SuccessRate,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RsaEstimate {
    /// Largest tested distance with success rate ≥ 0.5.
    pub rsa_m: Option<f64>,
    pub rows: Vec<RsaRow>,
}

impl RsaEstimate {
    /// CSV `distance_m,successes,trials,rate,wilson_lo,wilson_hi`.
    pub fn to_csv(&self) -> Result<String> {
        let mut w = csv::Writer::from_writer(Vec::new());
        w.write_record(["distance_m", "successes", "trials", "rate", "wilson_lo", "wilson_hi"])?;
        for r in &self.rows {
            w.write_record(&[
                r.distance_m.to_string(),
                r.rate.successes.to_string(),
                r.rate.trials.to_string(),
                format!("{:.6}", r.rate.rate),
                format!("{:.6}", r.rate.wilson_lo),
                format!("{:.6}", r.rate.wilson_hi),
            ])?;
        }
        let bytes = w.into_inner().map_err(|e| Error::io("<csv>", e.into_error()))?;
        Ok(String::from_utf8(bytes).expect("csv output is utf-8"))
    }
}

/// Single-play success against the template's only victim at each distance,
/// with the transmitter aimed at the victim's bearing. Trial `i` uses
/// generator stream `i` at every distance (common random numbers).
pub fn estimate_rsa(
    template: &EnvironmentScript,
    config: &AttackConfig,
    distances: &[f64],
    trials: u64,
) -> Result<RsaEstimate> {
    template.validate()?;
    if trials < 30 {
        return Err(Error::param("trials", "need at least 30 trials per distance"));
    }
    if distances.is_empty() || distances.iter().any(|d| !(*d > 0.0)) {
        return Err(Error::param("distances", "need at least one positive distance"));
    }
    if distances.windows(2).any(|w| w[1] <= w[0]) {
        return Err(Error::param("distances", "must be strictly ascending"));
    }
    let victims: Vec<usize> = template
        .devices
        .iter()
        .enumerate()
        .filter(|(_, d)| d.role == Role::Victim)
        .map(|(i, _)| i)
        .collect();
    let [vi] = victims[..] else {
        return Err(Error::param(
            "devices",
            format!("template must hold exactly one victim, found {}", victims.len()),
        ));
    };
    let bearing = template.devices[vi].bearing_deg();
    let single = AttackConfig {
        angle_start_deg: bearing,
        angle_end_deg: bearing,
        repeats_per_command: 1,
        ..config.clone()
    };
    let id = template.devices[vi].id.clone();

    let mut rows = Vec::with_capacity(distances.len());
    for &d in distances {
        let mut env = template.clone();
        env.devices[vi] = env.devices[vi].at_distance(d);
        let mut ok = 0;
        for stream in 0..trials {
            let mut world = SimEnv::new(env.clone(), stream)?;
            run_attack(&single, &mut world, env.rng_seed)?;
            ok += attacked(world.events(), &id) as u64;
        }
        rows.push(RsaRow {
            distance_m: d,
            rate: SuccessRate::new(ok, trials),
        });
    }
    let rsa_m = rows.iter().rev().find(|r| r.rate.rate >= 0.5).map(|r| r.distance_m);
    Ok(RsaEstimate { rsa_m, rows })
}

fn attacked(events: &[Event], bssid: &str) -> bool {
    events
        .iter()
        .any(|e| matches!(&e.kind, EventKind::Execute { bssid: b, command: CommandKind::Attack } if b == bssid))
}

/// One feedback round in a scenario world, with its ground truth.
#[derive(Debug, Clone, PartialEq)]
pub struct FeedbackRun {
    pub outcome: FeedbackOutcome,
    pub events: Vec<Event>,
    /// Victims whose hotspot went on, off and on again during the round.
    pub responders: Vec<String>,
}

impl FeedbackRun {
    pub fn truth(&self) -> bool {
        !self.responders.is_empty()
    }

    pub fn true_positive(&self) -> bool {
        self.outcome.success && self.responders.iter().any(|r| self.outcome.target_ids.contains(r))
    }
}

/// Aims at 0° and runs a single feedback round on stream `stream`.
pub fn run_feedback_scenario(scenario: &FeedbackScenario, stream: u64) -> Result<FeedbackRun> {
    let mut world = SimEnv::new(scenario.env.clone(), stream)?;
    world.aim(0.0)?;
    let outcome = feedback_round(&mut world, &scenario.params)?;
    let events = world.into_events();
    let responders = scenario
        .env
        .victims()
        .filter(|v| toggled_on_off_on(&events, &v.id, v.hotspot_on))
        .map(|v| v.id.clone())
        .collect();
    Ok(FeedbackRun {
        outcome,
        events,
        responders,
    })
}

fn toggled_on_off_on(events: &[Event], bssid: &str, initially_on: bool) -> bool {
    let mut want = [true, false, true].into_iter().peekable();
    let mut state = initially_on;
    for e in events {
        if let EventKind::Hotspot { bssid: b, on } = &e.kind {
            if b == bssid && *on != state {
                state = *on;
                if want.peek() == Some(on) {
                    want.next();
                }
            }
        }
    }
    want.peek().is_none()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PrecisionRecall {
    pub true_positives: u64,
    pub false_positives: u64,
    pub false_negatives: u64,
    pub true_negatives: u64,
    /// `None` when nothing was flagged positive.
    pub precision: Option<f64>,
    /// `None` when no scenario had a responding victim.
    pub recall: Option<f64>,
}

impl PrecisionRecall {
    fn from_counts(tp: u64, fp: u64, fn_: u64, tn: u64) -> Self {
        let ratio = |a: u64, b: u64| (a + b > 0).then(|| a as f64 / (a + b) as f64);
        Self {
            true_positives: tp,
            false_positives: fp,
            false_negatives: fn_,
            true_negatives: tn,
            precision: ratio(tp, fp),
            recall: ratio(tp, fn_),
        }
    }
}

/// Scores feedback rounds against the simulator's record of which victims
/// really toggled. Scenario `i` runs on stream `i`.
pub fn feedback_precision_recall(corpus: &[FeedbackScenario]) -> Result<PrecisionRecall> {
    if corpus.is_empty() {
        return Err(Error::param("corpus", "empty scenario corpus"));
    }
    let (mut tp, mut fp, mut fn_, mut tn) = (0, 0, 0, 0);
    for (i, sc) in corpus.iter().enumerate() {
        let run = run_feedback_scenario(sc, i as u64)?;
        match (run.outcome.success, run.truth()) {
            (true, _) if run.true_positive() => tp += 1,
            (true, _) => fp += 1,
            (false, true) => fn_ += 1,
            (false, false) => tn += 1,
        }
    }
    Ok(PrecisionRecall::from_counts(tp, fp, fn_, tn))
}
