use std::fmt;
use std::path::Path;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use super::ThresholdCurve;
use crate::error::{Error, Result};
use crate::signals::BandLevel;

/// Emission direction relative to the array boresight.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Direction {
    Front,
    Side,
    Back,
}

impl Direction {
    pub const ALL: [Direction; 3] = [Direction::Front, Direction::Side, Direction::Back];
}

impl fmt::Display for Direction {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Direction::Front => "front",
            Direction::Side => "side",
            Direction::Back => "back",
        })
    }
}

impl FromStr for Direction {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "front" => Ok(Direction::Front),
            "side" => Ok(Direction::Side),
            "back" => Ok(Direction::Back),
            other => Err(Error::param(
                "direction",
                format!("unknown direction `{other}` (front|side|back)"),
            )),
        }
    }
}

/// Geometry of the modeled metamaterial housing, in millimetres and degrees.
/// Carried for reporting only; the acoustic model does not derive from it.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MetamaterialGeometry {
    pub hole_diameter_mm: f64,
    pub spiral_width_mm: f64,
    pub spiral_pitch_mm: f64,
    pub opening_height_mm: f64,
    pub opening_angle_deg: f64,
    pub wall_thickness_mm: f64,
    pub sponge_thickness_mm: f64,
    pub wall_length_mm: f64,
    pub shield_length_mm: f64,
    pub array_range_mm: f64,
    pub total_length_mm: f64,
}

impl Default for MetamaterialGeometry {
    fn default() -> Self {
        Self {
            hole_diameter_mm: 22.5,
            spiral_width_mm: 100.0,
            spiral_pitch_mm: 34.542,
            opening_height_mm: 3.0,
            opening_angle_deg: 68.7,
            wall_thickness_mm: 2.0,
            sponge_thickness_mm: 40.0,
            wall_length_mm: 17.5,
            shield_length_mm: 109.5,
            array_range_mm: 18.0,
            total_length_mm: 127.5,
        }
    }
}

/// Parametric model of the leak-shielding housing: per-direction audible
/// attenuation curves plus a boresight gain inside the carrier band.
///
/// Attenuation curves are in dB (positive attenuates) and apply only within
/// their knot span; outside it, and outside the carrier band, gain is 0 dB.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct InsertionLossProfile {
    pub front: ThresholdCurve,
    pub side: ThresholdCurve,
    pub back: ThresholdCurve,
    pub passband_gain_db: f64,
    pub carrier_band_hz: (f64, f64),
    #[serde(default)]
    pub geometry: MetamaterialGeometry,
}

/// Third-octave nominal centers carrying the shipped attenuation knots.
const KNOT_HZ: [f64; 17] = [
    100.0, 125.0, 160.0, 200.0, 250.0, 315.0, 400.0, 500.0, 630.0, 800.0, 1000.0, 1250.0, 1600.0, 2000.0, 2500.0,
    3150.0, 4000.0,
];

/// Shipped front attenuation (dB). Synthetic model data: each knot clears
/// `60 dB − leakage threshold` by at least 6 dB. Side adds 3 dB, back 6 dB.
const FRONT_ATTENUATION_DB: [f64; 17] = [
    49.0, 52.0, 56.0, 58.0, 61.0, 62.0, 64.0, 65.0, 66.0, 67.0, 68.0, 69.0, 70.0, 72.0, 74.0, 76.0, 75.0,
];
const SIDE_EXTRA_DB: f64 = 3.0;
const BACK_EXTRA_DB: f64 = 6.0;

/// Boresight gain of the housing within the carrier band.
pub const ENHANCEMENT_GAIN_DB: f64 = 11.0;

impl Default for InsertionLossProfile {
    fn default() -> Self {
        let curve = |extra: f64| {
            ThresholdCurve::new(
                KNOT_HZ
                    .iter()
                    .zip(FRONT_ATTENUATION_DB)
                    .map(|(&f, a)| (f, a + extra))
                    .collect(),
            )
            .expect("shipped knots are sorted")
        };
        Self {
            front: curve(0.0),
            side: curve(SIDE_EXTRA_DB),
            back: curve(BACK_EXTRA_DB),
            passband_gain_db: ENHANCEMENT_GAIN_DB,
            carrier_band_hz: (36_000.0, 44_500.0),
            geometry: MetamaterialGeometry::default(),
        }
    }
}

impl InsertionLossProfile {
    /// No attenuation and no gain anywhere.
    pub fn transparent() -> Self {
        let zero = ThresholdCurve::new(vec![(100.0, 0.0), (4000.0, 0.0)]).expect("static");
        Self {
            front: zero.clone(),
            side: zero.clone(),
            back: zero,
            passband_gain_db: 0.0,
            ..Self::default()
        }
    }

    /// Loads one `freq_hz,value_db` CSV per direction.
    pub fn from_csv_files(
        front: impl AsRef<Path>,
        side: impl AsRef<Path>,
        back: impl AsRef<Path>,
        passband_gain_db: f64,
        carrier_band_hz: (f64, f64),
    ) -> Result<Self> {
        let p = Self {
            front: ThresholdCurve::from_csv_path(front)?,
            side: ThresholdCurve::from_csv_path(side)?,
            back: ThresholdCurve::from_csv_path(back)?,
            passband_gain_db,
            carrier_band_hz,
            geometry: MetamaterialGeometry::default(),
        };
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<()> {
        for d in Direction::ALL {
            if let Some(&(f, a)) = self.curve(d).points().iter().find(|p| p.1 < 0.0) {
                return Err(Error::param(
                    "attenuation",
                    format!("{d} attenuation {a} dB at {f} Hz is negative"),
                ));
            }
        }
        let (lo, hi) = self.carrier_band_hz;
        if !(lo > 0.0 && hi > lo) {
            return Err(Error::param("carrier_band_hz", format!("({lo}, {hi}) is not a band")));
        }
        if !self.passband_gain_db.is_finite() {
            return Err(Error::param("passband_gain_db", "must be finite"));
        }
        Ok(())
    }

    pub fn curve(&self, direction: Direction) -> &ThresholdCurve {
        match direction {
            Direction::Front => &self.front,
            Direction::Side => &self.side,
            Direction::Back => &self.back,
        }
    }

    /// Attenuation in dB at `f`; zero outside the curve's knot span.
    pub fn attenuation_db(&self, direction: Direction, f: f64) -> f64 {
        let curve = self.curve(direction);
        let (lo, hi) = curve.span();
        if f < lo || f > hi {
            0.0
        } else {
            curve.eval(f)
        }
    }

    pub fn in_carrier_band(&self, f: f64) -> bool {
        f >= self.carrier_band_hz.0 && f <= self.carrier_band_hz.1
    }

    /// Net gain (dB) applied to content at `f` leaving in `direction`.
    pub fn gain_db(&self, direction: Direction, f: f64) -> f64 {
        let boost = if direction == Direction::Front && self.in_carrier_band(f) {
            self.passband_gain_db
        } else {
            0.0
        };
        boost - self.attenuation_db(direction, f)
    }

    /// Copy with every attenuation value multiplied by `factor`.
    pub fn scaled(&self, factor: f64) -> Self {
        Self {
            front: self.front.map_values(|a| a * factor),
            side: self.side.map_values(|a| a * factor),
            back: self.back.map_values(|a| a * factor),
            ..self.clone()
        }
    }
}

/// Applies the profile's gain at each band center.
pub fn apply_insertion_loss(
    band_levels: &[BandLevel],
    profile: &InsertionLossProfile,
    direction: Direction,
) -> Vec<BandLevel> {
    band_levels
        .iter()
        .map(|bl| BandLevel {
            band: bl.band,
            level_db: bl.level_db + profile.gain_db(direction, bl.band.center_hz),
        })
        .collect()
}
