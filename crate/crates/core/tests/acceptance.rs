//! Acceptance gate: one line per criterion, then a single pass/fail.

mod common;

use std::f64::consts::PI;
use std::process::Command;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use ultrainject::acoustics::{leakage_report, Direction, InsertionLossProfile};
use ultrainject::attack::{repeated_success_probability, AttackConfig, AVERAGE_PROFILE};
use ultrainject::field::{
    load_sweep_table_path, piston_directivity, piston_first_null, rank_layouts, shipped_layouts, shipped_sweep_table,
    sweep_parameters, ObstructionMask, ARRAY_RANGE_M,
};
use ultrainject::signals::{
    correlation, mic_nonlinear, modulate, recover_baseband, NonlinearCoeffs, Waveform, DEFAULT_CARRIER_HZ,
    DEFAULT_SAMPLE_RATE_HZ,
};
use ultrainject::sim::scenarios::{
    deterministic_feedback_corpus, noisy_feedback_corpus, rsa_distance_grid, rsa_template,
};
use ultrainject::sim::{
    estimate_rsa, feedback_precision_recall, full_chain_success, run_feedback_scenario, DeliveryModel, DeviceScript,
    EnvironmentScript,
};

type Outcome = Result<String, String>;
type Criterion = (&'static str, fn() -> Outcome);

fn ensure(cond: bool, msg: impl Into<String>) -> Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(msg.into())
    }
}

/// Sum of a few sines below 4 kHz scaled to peak 0.5.
fn random_baseband(rng: &mut ChaCha8Rng, n: usize) -> Waveform {
    let fs = DEFAULT_SAMPLE_RATE_HZ as f64;
    let parts: Vec<(f64, f64, f64)> = (0..rng.random_range(2..6))
        .map(|_| {
            (
                rng.random_range(100.0..3500.0),
                rng.random_range(0.2..1.0),
                rng.random_range(0.0..2.0 * PI),
            )
        })
        .collect();
    let raw: Vec<f64> = (0..n)
        .map(|i| {
            parts
                .iter()
                .map(|(f, a, ph)| a * (2.0 * PI * f * i as f64 / fs + ph).sin())
                .sum()
        })
        .collect();
    let peak = raw.iter().fold(0.0f64, |m, x| m.max(x.abs()));
    Waveform::new(DEFAULT_SAMPLE_RATE_HZ, raw.iter().map(|x| 0.5 * x / peak).collect()).unwrap()
}

fn c1_round_trip() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    let coeffs = NonlinearCoeffs::default();
    let mut worst = f64::INFINITY;
    for _ in 0..20 {
        let v = random_baseband(&mut rng, 19_200);
        let pass = modulate(&v, DEFAULT_CARRIER_HZ, 1.0).map_err(|e| e.to_string())?;
        let rec = recover_baseband(&pass, coeffs, 4000.0).map_err(|e| e.to_string())?;
        let orig = &v.samples()[rec.start_index..rec.start_index + rec.waveform.len()];
        worst = worst.min(correlation(rec.waveform.samples(), orig));
    }
    ensure(worst >= 0.99, format!("worst correlation {worst:.5}"))?;

    let mut max_err = 0.0f64;
    let fs = DEFAULT_SAMPLE_RATE_HZ as f64;
    for &level in &[-0.5, -0.2, 0.0, 0.3, 0.5] {
        let v = Waveform::new(DEFAULT_SAMPLE_RATE_HZ, vec![level; 4096]).unwrap();
        let out = mic_nonlinear(&modulate(&v, DEFAULT_CARRIER_HZ, 1.0).unwrap(), coeffs);
        for (i, &y) in out.samples().iter().enumerate() {
            let c = (2.0 * PI * DEFAULT_CARRIER_HZ * i as f64 / fs).cos();
            let env = 1.0 + level;
            // Square-law expansion: DC, carrier and second harmonic terms.
            let c2 = (2.0 * PI * 2.0 * DEFAULT_CARRIER_HZ * i as f64 / fs).cos();
            let expect = coeffs.a1 * env * c + coeffs.a2 * env * env * 0.5 * (1.0 + c2);
            max_err = max_err.max((y - expect).abs());
        }
        // After the low-pass only the DC term a2·(1+V)²/2 survives, and it
        // is removed as the offset.
        let v = Waveform::new(DEFAULT_SAMPLE_RATE_HZ, vec![level; 19_200]).unwrap();
        let rec = recover_baseband(&modulate(&v, DEFAULT_CARRIER_HZ, 1.0).unwrap(), coeffs, 4000.0).unwrap();
        let dc = coeffs.a2 * (1.0 + level).powi(2) / 2.0;
        max_err = max_err.max((rec.dc_offset - dc).abs());
        max_err = rec.waveform.samples().iter().fold(max_err, |m, y| m.max(y.abs()));
    }
    ensure(max_err <= 1e-9, format!("analytic oracle error {max_err:e}"))?;
    Ok(format!("worst correlation {worst:.5}, constant-V error {max_err:.1e}"))
}

fn c2_carrier_silence() -> Outcome {
    let zero = Waveform::new(DEFAULT_SAMPLE_RATE_HZ, vec![0.0; 19_200]).unwrap();
    let pass = modulate(&zero, DEFAULT_CARRIER_HZ, 1.0).unwrap();
    let rec = recover_baseband(&pass, NonlinearCoeffs::default(), 4000.0).unwrap();
    let db = 10.0 * rec.waveform.mean_square().max(1e-300).log10();
    ensure(db <= -80.0, format!("{db:.1} dB FS"))?;
    Ok(format!("{db:.1} dB re full scale"))
}

fn c3_leakage() -> Outcome {
    let profile = InsertionLossProfile::default();
    let fs = 48_000;
    let centers = [
        100.0, 125.0, 160.0, 200.0, 250.0, 315.0, 400.0, 500.0, 630.0, 800.0, 1000.0, 1250.0, 1600.0, 2000.0, 2500.0,
        3150.0, 4000.0,
    ];
    let mut failures_halved = 0;
    for f in centers {
        // A unit sine read at a 60 dB reference plays at 60 dB.
        let w = Waveform::from_fn(fs, fs as usize, |t| (2.0 * PI * f * t).sin()).unwrap();
        let rep = leakage_report(&w, &profile, 60.0, &Direction::ALL).map_err(|e| e.to_string())?;
        ensure(
            rep.pass && rep.directions.len() == 3,
            format!("{f} Hz tone leaks: {} failing bands", rep.failing_bands),
        )?;
        failures_halved += leakage_report(&w, &profile.scaled(0.5), 60.0, &Direction::ALL)
            .unwrap()
            .failing_bands;
    }
    ensure(failures_halved >= 1, "halved attenuation still passes everywhere")?;
    Ok(format!(
        "17 tones pass in 3 directions; halved profile reports {failures_halved} failing bands"
    ))
}

fn c4_enhancement() -> Outcome {
    let p = InsertionLossProfile::default();
    let g = p.gain_db(Direction::Front, DEFAULT_CARRIER_HZ);
    ensure(g == 11.0, format!("front carrier gain {g}"))?;
    ensure(
        p.gain_db(Direction::Side, DEFAULT_CARRIER_HZ) == 0.0,
        "side direction is boosted",
    )?;
    Ok(format!("front gain at {DEFAULT_CARRIER_HZ} Hz = {g} dB"))
}

fn c5_piston() -> Outcome {
    let mut max_err = 0.0f64;
    for i in 0..40 {
        for j in 0..25 {
            let ka = 0.25 + 11.5 * i as f64 / 39.0;
            let theta = (PI / 2.0) * j as f64 / 24.0;
            let err = (piston_directivity(ka, theta) - common::piston_oracle(ka * theta.sin())).abs();
            max_err = max_err.max(err);
        }
    }
    ensure(max_err <= 1e-9, format!("max error {max_err:e}"))?;
    let null = piston_first_null();
    ensure((null - 3.8317).abs() <= 1e-4, format!("first null {null}"))?;
    Ok(format!("1000-point max error {max_err:.1e}, first null {null:.5}"))
}

fn c6_sweep() -> Outcome {
    let shipped = sweep_parameters(&shipped_sweep_table()).map_err(|e| e.to_string())?;
    let file = concat!(env!("CARGO_MANIFEST_DIR"), "/data/enhancement_table.csv");
    let loaded = sweep_parameters(&load_sweep_table_path(file).map_err(|e| e.to_string())?).unwrap();
    for r in [&shipped, &loaded] {
        ensure(
            (r.n_speakers, r.range_mm, r.carrier_hz, r.max_spl_db) == (12, 18.0, 40_200.0, 142.0),
            format!("{r:?}"),
        )?;
    }
    ensure(
        sweep_parameters(&shipped_sweep_table()).unwrap() == shipped,
        "not deterministic",
    )?;
    Ok("12 speakers, 18 mm, 40200 Hz, 142 dB".into())
}

fn c7_layout() -> Outcome {
    let ranked = rank_layouts(
        &shipped_layouts(),
        DEFAULT_CARRIER_HZ,
        ARRAY_RANGE_M,
        &ObstructionMask::default(),
    )
    .map_err(|e| e.to_string())?;
    let order: Vec<&str> = ranked.iter().map(|r| r.layout.name.as_str()).collect();
    ensure(ranked.len() == 6 && order[0] == "2x6", format!("order {order:?}"))?;
    Ok(format!("order {}", order.join(" > ")))
}

fn c8_feedback() -> Outcome {
    let corpus = deterministic_feedback_corpus();
    ensure(corpus.len() >= 100, "corpus too small")?;
    let mut agree = 0;
    for (i, sc) in corpus.iter().enumerate() {
        let run = run_feedback_scenario(sc, i as u64).map_err(|e| e.to_string())?;
        let o = &run.outcome;
        let e = common::reference_round(&o.history, &sc.params);
        let feedback_sent = o.commands.iter().filter(|c| c.command.is_feedback()).count();
        if e.aborted == o.aborted
            && e.success == o.success
            && e.targets == o.target_ids
            && e.dif1 == o.dif1
            && e.dif2 == o.dif2
            && e.feedback_commands == feedback_sent
        {
            agree += 1;
        } else {
            return Err(format!("scenario {} disagrees: {e:?} vs {:?}", sc.name, o.target_ids));
        }
    }
    let det = feedback_precision_recall(&corpus).map_err(|e| e.to_string())?;
    ensure(
        det.precision == Some(1.0) && det.recall == Some(1.0),
        format!("deterministic {det:?}"),
    )?;
    let noisy = feedback_precision_recall(&noisy_feedback_corpus(300, 7)).map_err(|e| e.to_string())?;
    let (p, r) = (noisy.precision.unwrap_or(0.0), noisy.recall.unwrap_or(0.0));
    ensure(p >= 0.95 && r >= 0.95, format!("noisy precision {p:.3} recall {r:.3}"))?;
    Ok(format!(
        "{agree}/{} scenarios agree; deterministic P=R=1; noisy P={p:.3} R={r:.3}",
        corpus.len()
    ))
}

fn c9_repeats() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(99);
    let draws = 1_000_000u32;
    for p in [0.1, 0.5, 0.76] {
        for n in [1u32, 5] {
            let q = repeated_success_probability(p, n).map_err(|e| e.to_string())?;
            let hits = (0..draws).filter(|_| (0..n).any(|_| rng.random::<f64>() < p)).count() as f64;
            let est = hits / draws as f64;
            let sigma = (q * (1.0 - q) / draws as f64).sqrt();
            ensure(
                (est - q).abs() <= 3.0 * sigma,
                format!("p={p} n={n}: analytic {q} vs MC {est}"),
            )?;
        }
    }
    let v = repeated_success_probability(0.76, 5).unwrap();
    ensure((v - 0.999204).abs() <= 1e-6, format!("(0.76, 5) = {v}"))?;
    Ok(format!("6 cases within 3 sigma; (0.76, 5) = {v:.6}"))
}

fn c10_calibration() -> Outcome {
    let cfg = AttackConfig::default();
    let grid = rsa_distance_grid();
    let step = grid[1] - grid[0];
    let mut found = Vec::new();
    for noise in [55.0, 70.0, 75.0] {
        let est = estimate_rsa(&rsa_template(noise, AVERAGE_PROFILE), &cfg, &grid, 200).map_err(|e| e.to_string())?;
        let d = est.rsa_m.ok_or(format!("no RSA at {noise} dB"))?;
        if noise == 55.0 {
            ensure((d - 8.85).abs() <= step + 1e-9, format!("RSA {d} m at 55 dB"))?;
        } else {
            ensure((7.0..=8.0).contains(&d), format!("RSA {d} m at {noise} dB"))?;
        }
        found.push(format!("{d} m @ {noise} dB"));
    }

    let mut env = EnvironmentScript::new(vec![DeviceScript::victim("victim", 3.0, 0.0)]);
    env.delivery = DeliveryModel::PerStage { p: 0.98 };
    let batches = 40;
    let mut total = 0.0;
    for b in 0..batches {
        total += full_chain_success(&env, &cfg, 50, b * 50)
            .map_err(|e| e.to_string())?
            .rate;
    }
    let mean = total / batches as f64;
    ensure((mean - 0.94).abs() <= 0.03, format!("full chain {mean:.4}"))?;
    Ok(format!(
        "RSA {}; full chain {:.1} % over {batches}x50 rounds",
        found.join(", "),
        100.0 * mean
    ))
}

fn c11_determinism() -> Outcome {
    let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
    let bin = env!("CARGO_BIN_EXE_ultrainject");
    let mut reports = Vec::new();
    for k in 0..2 {
        let path = dir.path().join(format!("report{k}.json"));
        let status = Command::new(bin)
            .args(["attack-sim", "--seed", "41", "--report"])
            .arg(&path)
            .status()
            .map_err(|e| e.to_string())?;
        ensure(status.success(), format!("attack-sim exited with {status}"))?;
        reports.push(std::fs::read(&path).map_err(|e| e.to_string())?);
    }
    ensure(!reports[0].is_empty() && reports[0] == reports[1], "reports differ")?;
    Ok(format!("two runs, {} identical bytes", reports[0].len()))
}

fn main() {
    let criteria: [Criterion; 11] = [
        ("demodulation round-trip", c1_round_trip),
        ("carrier-only silence", c2_carrier_silence),
        ("leakage criterion", c3_leakage),
        ("enhancement gain", c4_enhancement),
        ("piston directivity", c5_piston),
        ("parameter sweep", c6_sweep),
        ("layout regression", c7_layout),
        ("feedback oracle equivalence", c8_feedback),
        ("repeat aggregation", c9_repeats),
        ("calibration regressions", c10_calibration),
        ("determinism", c11_determinism),
    ];
    let mut failed = Vec::new();
    for (i, (name, check)) in criteria.iter().enumerate() {
        match check() {
            Ok(detail) => println!("criterion {:>2} PASS  {name}: {detail}", i + 1),
            Err(why) => {
                println!("criterion {:>2} FAIL  {name}: {why}", i + 1);
                failed.push(i + 1);
            }
        }
    }
    if !failed.is_empty() {
        eprintln!("failed criteria: {failed:?}");
        std::process::exit(1);
    }
}
