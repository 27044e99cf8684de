//! Psychoacoustic thresholds, the metamaterial insertion-loss model, leakage
//! auditing and free-field propagation.

mod curve;
mod profile;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::signals::{band_spectrum, third_octave_bands, Waveform};

pub use curve::ThresholdCurve;
pub use profile::{apply_insertion_loss, Direction, InsertionLossProfile, MetamaterialGeometry, ENHANCEMENT_GAIN_DB};

/// Offset between the hearing threshold and the leakage ceiling.
pub const LEAKAGE_MARGIN_DB: f64 = 5.0;
/// Frequency range on which thresholds are defined.
pub const THRESHOLD_DOMAIN_HZ: (f64, f64) = (100.0, 20_000.0);
/// Default air absorption near 40 kHz (20 °C, 50 % RH).
pub const DEFAULT_AIR_ABSORPTION_DB_PER_M: f64 = 1.3;

/// Absolute threshold of hearing.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase", tag = "kind", content = "points")]
pub enum HearingModel {
    /// Terhardt's closed-form approximation of the threshold in quiet.
    #[default]
    Terhardt,
    /// Tabulated curve (e.g. loaded from CSV).
    Tabulated(ThresholdCurve),
}

impl HearingModel {
    pub fn threshold_db(&self, f: f64) -> Result<f64> {
        check_domain(f)?;
        Ok(match self {
            HearingModel::Terhardt => terhardt(f),
            HearingModel::Tabulated(c) => c.eval(f),
        })
    }

    pub fn leakage_threshold_db(&self, f: f64) -> Result<f64> {
        Ok(self.threshold_db(f)? - LEAKAGE_MARGIN_DB)
    }
}

fn check_domain(f: f64) -> Result<()> {
    let (lo, hi) = THRESHOLD_DOMAIN_HZ;
    if !(f >= lo && f <= hi) {
        return Err(Error::param("frequency", format!("{f} Hz is outside [{lo}, {hi}] Hz")));
    }
    Ok(())
}

fn terhardt(f: f64) -> f64 {
    let k = f / 1000.0;
    3.64 * k.powf(-0.8) - 6.5 * (-0.6 * (k - 3.3).powi(2)).exp() + 1e-3 * k.powi(4)
}

/// Default hearing threshold (dB SPL) at `f` Hz.
pub fn hearing_threshold(f: f64) -> Result<f64> {
    HearingModel::Terhardt.threshold_db(f)
}

/// Ceiling for emitted audible energy: the hearing threshold minus 5 dB.
pub fn leakage_threshold(f: f64) -> Result<f64> {
    HearingModel::Terhardt.leakage_threshold_db(f)
}

/// Spherical spreading plus linear air absorption from `r0` to `r`.
pub fn propagate_spl(spl0_db: f64, r0_m: f64, r_m: f64, alpha_db_per_m: f64) -> Result<f64> {
    if !(r0_m > 0.0) {
        return Err(Error::param("r0_m", "reference distance must be positive"));
    }
    if !(r_m >= r0_m) {
        return Err(Error::param(
            "r_m",
            format!("distance {r_m} m is below the reference distance {r0_m} m"),
        ));
    }
    if !(alpha_db_per_m >= 0.0) {
        return Err(Error::param("alpha_db_per_m", "must be non-negative"));
    }
    Ok(spl0_db - 20.0 * (r_m / r0_m).log10() - alpha_db_per_m * (r_m - r0_m))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LeakageBand {
    pub center_hz: f64,
    pub lo_hz: f64,
    pub hi_hz: f64,
    /// Level after the housing, dB SPL.
    pub level_db: f64,
    pub threshold_db: f64,
    /// `threshold − level`; negative means audible leakage.
    pub margin_db: f64,
    pub pass: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DirectionLeakage {
    pub direction: Direction,
    pub pass: bool,
    pub worst_margin_db: f64,
    pub bands: Vec<LeakageBand>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LeakageReport {
    pub source_spl_ref_db: f64,
    pub pass: bool,
    pub failing_bands: usize,
    pub directions: Vec<DirectionLeakage>,
    pub geometry: MetamaterialGeometry,
}

/// Third-octave audit (100–4000 Hz) of the audible content of `waveform`
/// after the housing. `source_spl_ref_db` is the SPL of a full-scale sine.
pub fn leakage_report(
    waveform: &Waveform,
    profile: &InsertionLossProfile,
    source_spl_ref_db: f64,
    directions: &[Direction],
) -> Result<LeakageReport> {
    leakage_report_with(
        waveform,
        profile,
        &HearingModel::Terhardt,
        source_spl_ref_db,
        directions,
    )
}

pub fn leakage_report_with(
    waveform: &Waveform,
    profile: &InsertionLossProfile,
    hearing: &HearingModel,
    source_spl_ref_db: f64,
    directions: &[Direction],
) -> Result<LeakageReport> {
    if directions.is_empty() {
        return Err(Error::param("directions", "no direction requested"));
    }
    if !source_spl_ref_db.is_finite() {
        return Err(Error::param("source_spl_ref_db", "must be finite"));
    }
    profile.validate()?;
    let bands: Vec<_> = third_octave_bands(100.0, 4000.0)
        .into_iter()
        .filter(|b| b.hi_hz <= waveform.nyquist_hz())
        .collect();
    let source = band_spectrum(waveform, &bands, source_spl_ref_db)?;

    let mut dirs: Vec<Direction> = directions.to_vec();
    dirs.sort();
    dirs.dedup();
    let mut out = Vec::with_capacity(dirs.len());
    for d in dirs {
        let shielded = apply_insertion_loss(&source, profile, d);
        let bands = shielded
            .iter()
            .map(|bl| {
                let threshold_db = hearing.leakage_threshold_db(bl.band.center_hz)?;
                let margin_db = threshold_db - bl.level_db;
                Ok(LeakageBand {
                    center_hz: bl.band.center_hz,
                    lo_hz: bl.band.lo_hz,
                    hi_hz: bl.band.hi_hz,
                    level_db: bl.level_db,
                    threshold_db,
                    margin_db,
                    pass: margin_db >= 0.0,
                })
            })
            .collect::<Result<Vec<_>>>()?;
        let worst = bands.iter().map(|b| b.margin_db).fold(f64::INFINITY, f64::min);
        out.push(DirectionLeakage {
            direction: d,
            pass: bands.iter().all(|b| b.pass),
            worst_margin_db: worst,
            bands,
        });
    }
    let failing_bands = out.iter().map(|d| d.bands.iter().filter(|b| !b.pass).count()).sum();
    Ok(LeakageReport {
        source_spl_ref_db,
        pass: failing_bands == 0,
        failing_bands,
        directions: out,
        geometry: profile.geometry.clone(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use std::f64::consts::PI;

    #[test]
    fn terhardt_reference_values() {
        assert!((hearing_threshold(1000.0).unwrap() - 3.369).abs() < 1e-3);
        assert!((hearing_threshold(100.0).unwrap() - 22.953).abs() < 1e-3);
        assert!((leakage_threshold(1000.0).unwrap() + 1.631).abs() < 1e-3);
    }

    #[test]
    fn threshold_domain_enforced() {
        assert!(hearing_threshold(99.0).is_err());
        assert!(hearing_threshold(20_001.0).is_err());
        assert!(leakage_threshold(f64::NAN).is_err());
        assert!(hearing_threshold(20_000.0).is_ok());
    }

    #[test]
    fn tabulated_model_uses_curve() {
        let c = ThresholdCurve::new(vec![(100.0, 30.0), (10_000.0, 10.0)]).unwrap();
        let m = HearingModel::Tabulated(c);
        assert_eq!(m.threshold_db(100.0).unwrap(), 30.0);
        assert_eq!(m.leakage_threshold_db(1000.0).unwrap(), 15.0);
    }

    #[test]
    fn propagation_values() {
        assert_eq!(propagate_spl(142.0, 0.1, 0.1, 1.3).unwrap(), 142.0);
        let v = propagate_spl(142.0, 0.1, 8.85, 1.3).unwrap();
        assert!((v - 91.68).abs() < 0.01, "{v}");
        assert!(propagate_spl(142.0, 0.1, 0.05, 1.3).is_err());
        assert!(propagate_spl(142.0, 0.0, 1.0, 1.3).is_err());
        assert!(propagate_spl(142.0, 0.1, 1.0, -1.0).is_err());
    }

    #[test]
    fn carrier_only_passes_leakage() {
        let w = Waveform::from_fn(192_000, 19_200, |t| (2.0 * PI * 40_200.0 * t).cos()).unwrap();
        let r = leakage_report(&w, &InsertionLossProfile::default(), 140.0, &Direction::ALL).unwrap();
        assert!(r.pass);
        assert_eq!(r.directions.len(), 3);
    }

    #[test]
    fn weakened_profile_fails_with_negative_margin() {
        // 60 dB SPL tone at 1 kHz: full scale = 60 dB.
        let w = Waveform::from_fn(48_000, 48_000, |t| (2.0 * PI * 1000.0 * t).sin()).unwrap();
        let ok = leakage_report(&w, &InsertionLossProfile::default(), 60.0, &[Direction::Front]).unwrap();
        assert!(ok.pass);
        let weak = InsertionLossProfile::default().scaled(0.5);
        let bad = leakage_report(&w, &weak, 60.0, &[Direction::Front]).unwrap();
        assert!(!bad.pass);
        let band = bad.directions[0].bands.iter().find(|b| !b.pass).unwrap();
        assert!(band.margin_db < 0.0);
        assert!((band.center_hz - 1000.0).abs() < 1e-6);
        // 60 − 34 dB lands 27.6 dB over a −1.63 dB ceiling.
        assert!((band.margin_db - (leakage_threshold(1000.0).unwrap() - 26.0)).abs() < 0.1);
    }

    #[test]
    fn empty_direction_set_rejected() {
        let w = Waveform::new(48_000, vec![0.0; 480]).unwrap();
        assert!(leakage_report(&w, &InsertionLossProfile::default(), 60.0, &[]).is_err());
    }

    proptest! {
        #[test]
        fn leakage_is_hearing_minus_five(f in 100.0f64..=20_000.0) {
            prop_assert_eq!(leakage_threshold(f).unwrap(), hearing_threshold(f).unwrap() - 5.0);
        }

        #[test]
        fn propagation_monotone(r in 0.2f64..50.0, dr in 0.01f64..5.0, a in 0.0f64..3.0, da in 0.01f64..1.0) {
            let near = propagate_spl(142.0, 0.1, r, a).unwrap();
            let far = propagate_spl(142.0, 0.1, r + dr, a).unwrap();
            prop_assert!(far < near);
            let lossier = propagate_spl(142.0, 0.1, r, a + da).unwrap();
            prop_assert!(lossier < near);
        }
    }
}
