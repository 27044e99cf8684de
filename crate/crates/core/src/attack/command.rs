use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// The inaudible instructions the transmitter can play.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CommandKind {
    /// Drop the victim's media volume so replies are not heard.
    Mute,
    /// The payload command itself.
    Attack,
    /// Turn the victim's hotspot on.
    Feedback1,
    /// Turn the victim's hotspot off.
    Feedback2,
    /// Restore the victim's volume.
    Reset,
}

impl CommandKind {
    pub const ALL: [CommandKind; 5] = [
        CommandKind::Mute,
        CommandKind::Attack,
        CommandKind::Feedback1,
        CommandKind::Feedback2,
        CommandKind::Reset,
    ];

    /// Symbolic payload; the simulator interprets these instead of audio.
    pub fn default_payload(self) -> &'static str {
        match self {
            CommandKind::Mute => "set volume 6%",
            CommandKind::Attack => "attack",
            CommandKind::Feedback1 => "turn on hotspot",
            CommandKind::Feedback2 => "turn off hotspot",
            CommandKind::Reset => "set volume 1",
        }
    }

    pub fn is_feedback(self) -> bool {
        matches!(self, CommandKind::Feedback1 | CommandKind::Feedback2)
    }
}

impl fmt::Display for CommandKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            CommandKind::Mute => "mute",
            CommandKind::Attack => "attack",
            CommandKind::Feedback1 => "feedback1",
            CommandKind::Feedback2 => "feedback2",
            CommandKind::Reset => "reset",
        })
    }
}

impl FromStr for CommandKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        CommandKind::ALL
            .into_iter()
            .find(|k| k.to_string() == s)
            .ok_or_else(|| Error::param("command", format!("unknown command `{s}`")))
    }
}
