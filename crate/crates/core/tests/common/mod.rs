//! Independent oracles shared by the integration tests.

#![allow(dead_code)]

use std::collections::{BTreeMap, BTreeSet};

use ultrainject::feedback::{FeedbackParams, ScanSnapshot};

/// What a feedback round should conclude from a scan stream.
#[derive(Debug, Clone, PartialEq)]
pub struct Expected {
    pub aborted: bool,
    pub success: bool,
    pub feedback_commands: usize,
    pub dif1: BTreeSet<String>,
    pub dif2: BTreeSet<String>,
    pub targets: BTreeSet<String>,
}

fn ids(s: &ScanSnapshot) -> BTreeSet<String> {
    s.records.iter().map(|r| r.bssid.clone()).collect()
}

/// Index of the first snapshot after `from` taken at least `window` after it.
fn after(stream: &[ScanSnapshot], from: usize, window: f64) -> Option<usize> {
    let t0 = stream[from].t;
    (from + 1..stream.len()).find(|&i| stream[i].t - t0 >= window - 1e-9)
}

/// Per-scan RSSI of every id seen in `stream`, `None` where absent.
fn tracks(stream: &[ScanSnapshot]) -> BTreeMap<String, Vec<Option<f64>>> {
    let mut out: BTreeMap<String, Vec<Option<f64>>> = BTreeMap::new();
    for s in stream {
        for r in &s.records {
            out.entry(r.bssid.clone()).or_insert_with(|| vec![None; stream.len()]);
        }
    }
    for (i, s) in stream.iter().enumerate() {
        for r in &s.records {
            out.get_mut(&r.bssid).unwrap()[i] = Some(r.rssi_dbm);
        }
    }
    out
}

/// Whether a track shows a hotspot being switched rather than drifting in
/// or out of range.
fn is_abrupt(track: &[Option<f64>], p: &FeedbackParams) -> bool {
    let weak_before = |i: usize| {
        let lo = i.saturating_sub(p.ramp_window);
        track[lo..i].iter().flatten().any(|&v| v < p.strong_floor_dbm)
    };
    track.windows(2).enumerate().any(|(k, w)| {
        let i = k + 1;
        match (w[0], w[1]) {
            (Some(a), Some(b)) => (a - b).abs() >= p.delta_db_threshold,
            (None, Some(b)) => b >= p.strong_floor_dbm && !weak_before(i),
            (Some(a), None) => a >= p.strong_floor_dbm && !weak_before(i),
            (None, None) => false,
        }
    })
}

/// Replays the round's rules over the snapshots it consumed. The target set
/// is found by trying every subset of observed ids and keeping the one
/// that satisfies the on/off/on and abruptness conditions for every id.
pub fn reference_round(stream: &[ScanSnapshot], p: &FeedbackParams) -> Expected {
    let mut e = Expected {
        aborted: true,
        success: false,
        feedback_commands: 0,
        dif1: BTreeSet::new(),
        dif2: BTreeSet::new(),
        targets: BTreeSet::new(),
    };
    if stream.is_empty() {
        return e;
    }
    e.feedback_commands = 1;
    let Some(i2) = after(stream, 0, p.window_s) else {
        return e;
    };
    e.feedback_commands = 2;
    let Some(i3) = after(stream, i2, p.window_s) else {
        return e;
    };
    let (l2, l3) = (ids(&stream[i2]), ids(&stream[i3]));
    e.dif1 = l2.difference(&l3).cloned().collect();
    if l2 == l3 {
        e.aborted = false;
        return e;
    }
    e.feedback_commands = 3;
    let Some(i4) = after(stream, i3, p.window_s) else {
        return e;
    };
    e.aborted = false;
    let l4 = ids(&stream[i4]);
    e.dif2 = l4.difference(&l3).cloned().collect();

    let history = &stream[..=i4];
    let tracks = tracks(history);
    let all: Vec<&String> = tracks.keys().collect();
    assert!(all.len() <= 16, "exhaustive search over {} ids", all.len());
    let qualifies = |id: &String| l2.contains(id) && !l3.contains(id) && l4.contains(id) && is_abrupt(&tracks[id], p);
    let mut consistent = Vec::new();
    for mask in 0u32..(1 << all.len()) {
        let subset: BTreeSet<String> = all
            .iter()
            .enumerate()
            .filter(|(i, _)| mask & (1 << i) != 0)
            .map(|(_, id)| (*id).clone())
            .collect();
        if all.iter().all(|id| subset.contains(*id) == qualifies(id)) {
            consistent.push(subset);
        }
    }
    assert_eq!(consistent.len(), 1, "rules must pin down exactly one target set");
    e.targets = consistent.pop().unwrap();
    e.success = !e.targets.is_empty();
    e
}

/// `J1(x)` from its power series, for moderate `x`.
pub fn j1_series(x: f64) -> f64 {
    let half = x / 2.0;
    let mut term = half;
    let mut sum = term;
    for k in 1..200 {
        let kf = k as f64;
        term *= -(half * half) / (kf * (kf + 1.0));
        sum += term;
        if term.abs() < 1e-18 * sum.abs().max(1e-300) {
            break;
        }
    }
    sum
}

/// `|2·J1(x)/x|` with the limit 1 at 0.
pub fn piston_oracle(x: f64) -> f64 {
    if x.abs() < 1e-12 {
        1.0
    } else {
        (2.0 * j1_series(x) / x).abs()
    }
}
