use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::acoustics::{propagate_spl, DEFAULT_AIR_ABSORPTION_DB_PER_M};
use crate::error::{Error, Result};

pub const AVERAGE_PROFILE: &str = "average";
pub const IPHONE_14_PRO_PROFILE: &str = "iphone14pro";

/// Acoustic output of the transmitter.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct Transmitter {
    /// Carrier level at `reference_m` (dB SPL).
    pub source_spl_db: f64,
    pub reference_m: f64,
    pub air_absorption_db_per_m: f64,
}

impl Default for Transmitter {
    fn default() -> Self {
        Self {
            source_spl_db: 142.0,
            reference_m: 0.018,
            air_absorption_db_per_m: DEFAULT_AIR_ABSORPTION_DB_PER_M,
        }
    }
}

impl Transmitter {
    /// Received level at `distance_m`; distances inside the reference
    /// sphere get the source level.
    pub fn received_spl_db(&self, distance_m: f64) -> Result<f64> {
        if !(distance_m > 0.0) {
            return Err(Error::param("distance_m", "must be positive"));
        }
        propagate_spl(
            self.source_spl_db,
            self.reference_m,
            distance_m.max(self.reference_m),
            self.air_absorption_db_per_m,
        )
    }
}

/// How readily a device's speech recognizer accepts an injected command as
/// a function of received carrier level.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DeviceProfile {
    pub name: String,
    /// Ceiling on single-play success.
    pub base_success: f64,
    /// Received level at which success is half the ceiling (dB SPL).
    pub midpoint_spl_db: f64,
    /// Logistic scale (dB per unit logit).
    pub slope_db: f64,
}

pub fn logistic(x: f64) -> f64 {
    1.0 / (1.0 + (-x).exp())
}

fn logit(p: f64) -> f64 {
    (p / (1.0 - p)).ln()
}

impl DeviceProfile {
    pub fn validate(&self) -> Result<()> {
        if !(self.base_success > 0.0 && self.base_success <= 1.0) {
            return Err(Error::param("base_success", "must be in (0, 1]"));
        }
        if !self.midpoint_spl_db.is_finite() {
            return Err(Error::param("midpoint_spl_db", "must be finite"));
        }
        if !(self.slope_db > 0.0) {
            return Err(Error::param("slope_db", "must be positive"));
        }
        Ok(())
    }

    /// Profile with `p(half_m) = 0.5` and `p(ref_m) = ref_p` on boresight in
    /// quiet, for the given transmitter.
    pub fn calibrate(name: &str, tx: &Transmitter, half_m: f64, ref_m: f64, ref_p: f64) -> Result<Self> {
        if !(ref_p > 0.5 && ref_p < 1.0 && ref_m < half_m) {
            return Err(Error::param("calibration", "need ref_m < half_m and 0.5 < ref_p < 1"));
        }
        let mid = tx.received_spl_db(half_m)?;
        let slope_db = (tx.received_spl_db(ref_m)? - mid) / logit(ref_p);
        Ok(Self {
            name: name.into(),
            base_success: 1.0,
            midpoint_spl_db: mid,
            slope_db,
        })
    }

    /// Profile sharing `slope_db` with `like`, hitting `p(at_m) = p`.
    pub fn calibrate_point(name: &str, like: &DeviceProfile, tx: &Transmitter, at_m: f64, p: f64) -> Result<Self> {
        if !(p > 0.0 && p < 1.0) {
            return Err(Error::param("calibration", "target probability must be in (0, 1)"));
        }
        Ok(Self {
            name: name.into(),
            base_success: 1.0,
            midpoint_spl_db: tx.received_spl_db(at_m)? - like.slope_db * logit(p),
            slope_db: like.slope_db,
        })
    }

    /// Shipped profiles, calibrated against the default transmitter.
    /// `average`: half success at 9.1 m and 76 % at 8.85 m.
    /// `iphone14pro`: same slope, 90 % at 9.2 m.
    pub fn builtin(name: &str) -> Result<Self> {
        let tx = Transmitter::default();
        let avg = Self::calibrate(AVERAGE_PROFILE, &tx, 9.1, 8.85, 0.76)?;
        match name {
            AVERAGE_PROFILE => Ok(avg),
            IPHONE_14_PRO_PROFILE => Self::calibrate_point(IPHONE_14_PRO_PROFILE, &avg, &tx, 9.2, 0.9),
            other => Err(Error::param(
                "device_profile",
                format!("unknown profile `{other}` ({AVERAGE_PROFILE}|{IPHONE_14_PRO_PROFILE})"),
            )),
        }
    }

    /// The distance at which this profile's success is half its ceiling.
    pub fn rsa_m(&self, tx: &Transmitter) -> Result<f64> {
        let (mut lo, mut hi) = (tx.reference_m, 1000.0);
        if tx.received_spl_db(lo)? < self.midpoint_spl_db {
            return Ok(0.0);
        }
        for _ in 0..200 {
            let mid = 0.5 * (lo + hi);
            if tx.received_spl_db(mid)? >= self.midpoint_spl_db {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        Ok(lo)
    }
}

/// Raised-cosine main lobe, zero beyond `half_width_deg`.
pub fn beam_factor(offset_deg: f64, half_width_deg: f64) -> f64 {
    let o = offset_deg.abs();
    if o >= half_width_deg {
        0.0
    } else {
        0.5 * (1.0 + (PI * o / half_width_deg).cos())
    }
}

/// Transmitter, beam and noise model combined into a delivery probability.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct LinkBudget {
    pub transmitter: Transmitter,
    pub beam_half_width_deg: f64,
    /// Noise level below which recognition is unaffected (dB SPL).
    pub noise_knee_db: f64,
    /// Margin lost per dB of noise above the knee.
    pub noise_penalty_db_per_db: f64,
}

impl Default for LinkBudget {
    fn default() -> Self {
        Self {
            transmitter: Transmitter::default(),
            beam_half_width_deg: 6.0,
            noise_knee_db: 60.0,
            noise_penalty_db_per_db: 0.3,
        }
    }
}

impl LinkBudget {
    pub fn noise_penalty_db(&self, noise_db: f64) -> f64 {
        (noise_db - self.noise_knee_db).max(0.0) * self.noise_penalty_db_per_db
    }

    /// Single-play success probability. `extra_loss_db` covers motion,
    /// occlusion and wind.
    pub fn probability(
        &self,
        distance_m: f64,
        angle_offset_deg: f64,
        noise_db: f64,
        extra_loss_db: f64,
        profile: &DeviceProfile,
    ) -> Result<f64> {
        let beam = beam_factor(angle_offset_deg, self.beam_half_width_deg);
        let margin = self.transmitter.received_spl_db(distance_m)?
            - profile.midpoint_spl_db
            - self.noise_penalty_db(noise_db)
            - extra_loss_db.max(0.0);
        Ok((profile.base_success * logistic(margin / profile.slope_db) * beam).clamp(0.0, 1.0))
    }
}

/// [`LinkBudget::probability`] with the default budget and no extra loss.
pub fn delivery_probability(
    distance_m: f64,
    angle_offset_deg: f64,
    noise_db: f64,
    profile: &DeviceProfile,
) -> Result<f64> {
    LinkBudget::default().probability(distance_m, angle_offset_deg, noise_db, 0.0, profile)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn avg() -> DeviceProfile {
        DeviceProfile::builtin(AVERAGE_PROFILE).unwrap()
    }

    #[test]
    fn calibration_points() {
        let p = avg();
        assert!((delivery_probability(9.1, 0.0, 55.0, &p).unwrap() - 0.5).abs() < 1e-9);
        assert!((delivery_probability(8.85, 0.0, 55.0, &p).unwrap() - 0.76).abs() < 1e-9);
        assert!((p.rsa_m(&Transmitter::default()).unwrap() - 9.1).abs() < 1e-9);
        let ip = DeviceProfile::builtin(IPHONE_14_PRO_PROFILE).unwrap();
        assert!((delivery_probability(9.2, 0.0, 55.0, &ip).unwrap() - 0.9).abs() < 1e-9);
    }

    #[test]
    fn off_beam_is_silent() {
        assert!(delivery_probability(2.0, 30.0, 40.0, &avg()).unwrap() <= 0.01);
        assert_eq!(beam_factor(0.0, 6.0), 1.0);
        assert!((beam_factor(3.0, 6.0) - 0.5).abs() < 1e-12);
    }

    #[test]
    fn shipped_device_file_matches_builtin() {
        let path = concat!(env!("CARGO_MANIFEST_DIR"), "/data/devices.json");
        let shipped: Vec<DeviceProfile> = serde_json::from_str(&std::fs::read_to_string(path).unwrap()).unwrap();
        for d in shipped {
            let b = DeviceProfile::builtin(&d.name).unwrap();
            assert!((d.midpoint_spl_db - b.midpoint_spl_db).abs() < 1e-6, "{}", d.name);
            assert!((d.slope_db - b.slope_db).abs() < 1e-6, "{}", d.name);
            assert_eq!(d.base_success, b.base_success);
        }
    }

    #[test]
    fn bad_inputs() {
        assert!(delivery_probability(0.0, 0.0, 55.0, &avg()).is_err());
        assert!(DeviceProfile::builtin("nope").is_err());
        let mut p = avg();
        p.slope_db = 0.0;
        assert!(p.validate().is_err());
    }

    proptest! {
        #[test]
        fn monotone_in_each_argument(
            d in 0.05f64..20.0, dd in 0.0f64..5.0,
            a in -10.0f64..10.0, da in 0.0f64..10.0,
            n in 30.0f64..90.0, dn in 0.0f64..20.0,
        ) {
            let p = avg();
            let base = delivery_probability(d, a, n, &p).unwrap();
            prop_assert!((0.0..=1.0).contains(&base));
            prop_assert!(delivery_probability(d + dd, a, n, &p).unwrap() <= base);
            let wider = a.abs() + da;
            prop_assert!(delivery_probability(d, wider, n, &p).unwrap() <= base);
            prop_assert!(delivery_probability(d, a, n + dn, &p).unwrap() <= base);
        }
    }
}
