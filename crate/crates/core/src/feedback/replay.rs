use std::collections::VecDeque;
use std::io::BufRead;
use std::path::Path;

use serde::Deserialize;

use super::{CommandSink, HotspotRecord, ScanSnapshot, ScanSource, SentCommand};
use crate::attack::CommandKind;
use crate::error::{Error, Result};

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct LogLine {
    t: f64,
    ssid: String,
    bssid: String,
    rssi: f64,
}

/// Parses a JSON-lines scan log. Consecutive lines sharing `t` form one
/// snapshot; blank lines are skipped.
pub fn parse_scan_log(reader: impl BufRead) -> Result<Vec<ScanSnapshot>> {
    let mut snaps: Vec<ScanSnapshot> = Vec::new();
    for (i, line) in reader.lines().enumerate() {
        let lineno = i + 1;
        let line = line.map_err(|e| Error::Parse {
            line: lineno,
            message: e.to_string(),
        })?;
        if line.trim().is_empty() {
            continue;
        }
        let rec: LogLine = serde_json::from_str(&line).map_err(|e| Error::Parse {
            line: lineno,
            message: e.to_string(),
        })?;
        let rec = HotspotRecord {
            ssid: rec.ssid,
            bssid: rec.bssid,
            rssi_dbm: rec.rssi,
            t: rec.t,
        };
        rec.validate().map_err(|e| Error::Parse {
            line: lineno,
            message: e.to_string(),
        })?;
        match snaps.last_mut() {
            Some(s) if s.t == rec.t => {
                if s.rssi(&rec.bssid).is_some() {
                    return Err(Error::Parse {
                        line: lineno,
                        message: format!("{} listed twice at t={}", rec.bssid, rec.t),
                    });
                }
                s.records.push(rec);
            }
            Some(s) if rec.t < s.t => {
                return Err(Error::Parse {
                    line: lineno,
                    message: format!("t={} goes back in time (previous t={})", rec.t, s.t),
                });
            }
            _ => snaps.push(ScanSnapshot {
                t: rec.t,
                records: vec![rec],
            }),
        }
    }
    Ok(snaps)
}

pub fn read_scan_log(path: impl AsRef<Path>) -> Result<Vec<ScanSnapshot>> {
    let path = path.as_ref();
    let file = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
    parse_scan_log(std::io::BufReader::new(file))
}

/// Plays back recorded snapshots in order.
#[derive(Debug, Clone, Default)]
pub struct ReplaySource {
    snaps: VecDeque<ScanSnapshot>,
}

impl ReplaySource {
    pub fn new(snaps: Vec<ScanSnapshot>) -> Self {
        Self { snaps: snaps.into() }
    }

    pub fn remaining(&self) -> usize {
        self.snaps.len()
    }
}

impl ScanSource for ReplaySource {
    fn next_snapshot(&mut self) -> Result<Option<ScanSnapshot>> {
        Ok(self.snaps.pop_front())
    }
}

/// Sink that only records what it was asked to send.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct RecordingSink {
    pub sent: Vec<SentCommand>,
    pub cleared_at: Vec<f64>,
}

impl CommandSink for RecordingSink {
    fn send(&mut self, t: f64, command: CommandKind) -> Result<()> {
        self.sent.push(SentCommand { t, command });
        Ok(())
    }

    fn clear_records(&mut self, t: f64) -> Result<()> {
        self.cleared_at.push(t);
        Ok(())
    }
}
