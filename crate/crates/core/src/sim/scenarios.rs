//! Shipped scenario families: the field-trial analogues and the feedback
//! scenario corpora.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{DeliveryModel, DeviceScript, EnvironmentScript, Motion, TrackPoint};
use crate::feedback::FeedbackParams;

/// Attack across a gap between buildings, victim at 8.5 m, 24° off the
/// sweep origin.
pub fn building_to_building(wind_mps: Option<f64>) -> EnvironmentScript {
    let mut env = EnvironmentScript::new(vec![DeviceScript::victim("victim", 8.5, 24.0)]);
    env.wind_mps = wind_mps;
    env
}

/// Pedestrian victim on boresight, handheld or pocketed.
pub fn walking_target(speed_mps: f64, in_pocket: bool) -> EnvironmentScript {
    let mut v = DeviceScript::victim("victim", 5.0, 0.0);
    v.motion = Some(Motion { speed_mps, in_pocket });
    EnvironmentScript::new(vec![v])
}

/// Static victim on boresight; the distance is replaced by the RSA grid.
pub fn rsa_template(noise_db: f64, profile: &str) -> EnvironmentScript {
    let mut v = DeviceScript::victim("victim", 1.0, 0.0);
    v.device_profile = profile.into();
    let mut env = EnvironmentScript::new(vec![v]);
    env.noise_db = noise_db;
    env
}

/// 0.25 m to 12 m in 0.25 m steps.
pub fn rsa_distance_grid() -> Vec<f64> {
    (1..=48).map(|i| i as f64 * 0.25).collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeedbackScenario {
    pub name: String,
    pub env: EnvironmentScript,
    pub params: FeedbackParams,
}

/// Window used by the corpora: rounds finish within 12 one-second scans.
pub const CORPUS_WINDOW_S: f64 = 3.0;
pub const CORPUS_DURATION_S: f64 = 12.0;

fn track(points: &[(f64, Option<f64>)]) -> Vec<TrackPoint> {
    points.iter().map(|&(t, rssi_dbm)| TrackPoint { t, rssi_dbm }).collect()
}

/// Scripted distractor shapes, named by behaviour.
pub fn distractor_kinds() -> Vec<(&'static str, Vec<TrackPoint>)> {
    vec![
        ("static", track(&[(0.0, Some(-55.0))])),
        (
            "ramp_up",
            track(&[
                (2.0, Some(-88.0)),
                (3.0, Some(-80.0)),
                (4.0, Some(-72.0)),
                (5.0, Some(-66.0)),
            ]),
        ),
        ("one_shot", track(&[(2.0, Some(-50.0)), (6.0, None)])),
        (
            "weak_flicker",
            track(&[
                (2.0, Some(-88.0)),
                (3.0, Some(-82.0)),
                (4.0, Some(-78.0)),
                (5.0, Some(-84.0)),
                (6.0, None),
                (8.0, Some(-88.0)),
                (9.0, Some(-84.0)),
                (10.0, Some(-80.0)),
            ]),
        ),
        (
            "ramp_up_down",
            track(&[
                (1.0, Some(-88.0)),
                (2.0, Some(-80.0)),
                (3.0, Some(-72.0)),
                (5.0, Some(-80.0)),
                (6.0, Some(-88.0)),
                (7.0, None),
            ]),
        ),
        (
            "fade_out",
            track(&[
                (0.0, Some(-70.0)),
                (2.0, Some(-78.0)),
                (3.0, Some(-84.0)),
                (4.0, Some(-90.0)),
                (5.0, None),
            ]),
        ),
        ("late_arrival", track(&[(9.0, Some(-50.0))])),
    ]
}

fn corpus_env(devices: Vec<DeviceScript>, delivery: DeliveryModel, seed: u64) -> EnvironmentScript {
    let mut env = EnvironmentScript::new(devices);
    env.duration_s = CORPUS_DURATION_S;
    env.delivery = delivery;
    env.rng_seed = seed;
    env
}

fn corpus_params() -> FeedbackParams {
    FeedbackParams {
        window_s: CORPUS_WINDOW_S,
        ..FeedbackParams::default()
    }
}

/// Every combination of an optional victim (three latencies, two ranges)
/// with up to three scripted distractors; deliveries always land.
pub fn deterministic_feedback_corpus() -> Vec<FeedbackScenario> {
    let kinds = distractor_kinds();
    let mut victims: Vec<Option<(f64, f64)>> = vec![None];
    for latency in [0.0, 1.0, 2.0] {
        for distance in [2.0, 6.0] {
            victims.push(Some((latency, distance)));
        }
    }
    let mut out = Vec::new();
    for mask in 0u32..(1 << kinds.len()) {
        if mask.count_ones() > 3 {
            continue;
        }
        for v in &victims {
            let mut devices = Vec::new();
            let mut name = String::new();
            if let Some((latency, distance)) = *v {
                let mut d = DeviceScript::victim("victim", distance, 0.0);
                d.response_latency_s = latency;
                devices.push(d);
                name.push_str(&format!("victim@{distance}m+{latency}s"));
            } else {
                name.push_str("no-victim");
            }
            for (i, (kind, tr)) in kinds.iter().enumerate() {
                if mask & (1 << i) != 0 {
                    devices.push(DeviceScript::distractor(kind, tr.clone()));
                    name.push('+');
                    name.push_str(kind);
                }
            }
            out.push(FeedbackScenario {
                name,
                env: corpus_env(devices, DeliveryModel::Fixed { p: 1.0 }, 0),
                params: corpus_params(),
            });
        }
    }
    out
}

/// Randomized corpus: victims at random range and latency that miss 10 % of
/// plays, plus random distractors: scripted shapes, jittery static APs
/// and weak hotspots switching on and off at random.
pub fn noisy_feedback_corpus(n: usize, seed: u64) -> Vec<FeedbackScenario> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let kinds = distractor_kinds();
    (0..n)
        .map(|i| {
            let mut devices = Vec::new();
            if rng.random_bool(0.7) {
                let mut v = DeviceScript::victim("victim", rng.random_range(1.0..9.0), 0.0);
                v.response_latency_s = rng.random_range(0.0..CORPUS_WINDOW_S);
                devices.push(v);
            }
            for j in 0..rng.random_range(0..=4) {
                let id = format!("ap{j}");
                let tr = match rng.random_range(0..3) {
                    0 => kinds[rng.random_range(0..kinds.len())].1.clone(),
                    1 => jittery_static(&mut rng),
                    _ => random_toggler(&mut rng),
                };
                devices.push(DeviceScript::distractor(&id, tr));
            }
            FeedbackScenario {
                name: format!("noisy-{i}"),
                env: corpus_env(devices, DeliveryModel::Fixed { p: 0.9 }, seed),
                params: corpus_params(),
            }
        })
        .collect()
}

fn jittery_static(rng: &mut ChaCha8Rng) -> Vec<TrackPoint> {
    let base = rng.random_range(-85.0..-45.0);
    (0..=CORPUS_DURATION_S as usize)
        .map(|t| TrackPoint {
            t: t as f64,
            rssi_dbm: Some(base + rng.random_range(-3.0..3.0)),
        })
        .collect()
}

fn random_toggler(rng: &mut ChaCha8Rng) -> Vec<TrackPoint> {
    let level = rng.random_range(-95.0..-76.0);
    let mut t = 0.0;
    let mut on = rng.random_bool(0.5);
    let mut out = vec![TrackPoint {
        t,
        rssi_dbm: on.then_some(level),
    }];
    while t < CORPUS_DURATION_S {
        t += rng.random_range(1..=6) as f64;
        on = !on;
        out.push(TrackPoint {
            t,
            rssi_dbm: on.then_some(level),
        });
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn corpora_are_valid_and_small() {
        let det = deterministic_feedback_corpus();
        assert!(det.len() >= 100);
        for sc in det.iter().chain(&noisy_feedback_corpus(50, 3)) {
            sc.env.validate().unwrap();
            assert!(sc.env.devices.len() <= 6);
            assert!(sc.env.duration_s / sc.env.scan_period_s <= 12.0);
        }
    }

    #[test]
    fn noisy_corpus_is_reproducible() {
        assert_eq!(noisy_feedback_corpus(20, 9), noisy_feedback_corpus(20, 9));
        assert_ne!(noisy_feedback_corpus(20, 9), noisy_feedback_corpus(20, 10));
    }
}
