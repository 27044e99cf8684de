//! Command-line front end. [`dispatch`] returns the process exit status:
//! 0 on success, 1 on invalid input or configuration, 2 on runtime failure.

mod config;

use std::ffi::OsString;
use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{CommandFactory, FromArgMatches, Parser, Subcommand, ValueEnum};
use serde::Serialize;

pub use config::{
    load_config, load_config_with_env, unit_of, AcousticsConfig, FieldConfig, RunConfig, SignalsConfig, SimConfig,
    ENV_PREFIX,
};

use crate::acoustics::{leakage_report, Direction, InsertionLossProfile, ENHANCEMENT_GAIN_DB};
use crate::error::{Error, Result};
use crate::feedback::{feedback_round, read_scan_log, Link, RecordingSink, ReplaySource};
use crate::field::{
    array_field_with, load_sweep_table_path, rank_layouts_with, shipped_layouts, shipped_sweep_table, sweep_parameters,
    ArrayLayout, FieldOptions, LayoutFile,
};
use crate::signals::wav::{read_wav, write_wav, SampleFormat};
use crate::signals::{correlation, modulate, recover_baseband, Waveform};
use crate::sim::scenarios::rsa_template;
use crate::sim::{estimate_rsa, simulate, write_event_log, DeviceScript, EnvironmentScript};

#[derive(Debug, Parser)]
#[command(
    name = "ultrainject",
    version,
    about = "Ultrasonic voice-command injection simulator"
)]
struct Cli {
    /// JSON run configuration; missing keys take their defaults.
    #[arg(long, global = true, value_name = "FILE")]
    config: Option<PathBuf>,
    /// Overrides `seed`.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Overrides `output_dir`; relative output paths resolve against it.
    #[arg(long, global = true, value_name = "DIR")]
    output_dir: Option<PathBuf>,
    /// Raise verbosity (repeatable).
    #[arg(short, long, global = true, action = clap::ArgAction::Count)]
    verbose: u8,
    #[command(subcommand)]
    command: Cmd,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum Format {
    Float32,
    Pcm16,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum Dir {
    Front,
    Side,
    Back,
}

impl From<Dir> for Direction {
    fn from(d: Dir) -> Self {
        match d {
            Dir::Front => Direction::Front,
            Dir::Side => Direction::Side,
            Dir::Back => Direction::Back,
        }
    }
}

#[derive(Debug, Subcommand)]
enum Cmd {
    /// AM-modulate a baseband WAV (or a synthesized tone) onto the carrier.
    Modulate {
        #[arg(long, value_name = "WAV", required_unless_present = "tone_hz")]
        input: Option<PathBuf>,
        #[arg(long, value_name = "WAV")]
        output: PathBuf,
        /// Synthesize a sine baseband instead of reading one.
        #[arg(long, conflicts_with = "input")]
        tone_hz: Option<f64>,
        #[arg(long, default_value_t = 0.5)]
        tone_amplitude: f64,
        #[arg(long, default_value_t = 1.0)]
        tone_duration_s: f64,
        #[arg(long)]
        carrier_hz: Option<f64>,
        #[arg(long)]
        depth: Option<f64>,
        /// pcm16 output is scaled by 1/(1+depth) to stay within full scale.
        #[arg(long, value_enum, default_value = "float32")]
        format: Format,
    },
    /// Demodulate a passband WAV through the microphone model.
    Demod {
        #[arg(long, value_name = "WAV")]
        input: PathBuf,
        #[arg(long, value_name = "WAV")]
        output: PathBuf,
        /// Original baseband; adds its correlation with the recovered audio.
        #[arg(long, value_name = "WAV")]
        reference: Option<PathBuf>,
        /// JSON report path (stdout when omitted).
        #[arg(long, value_name = "FILE")]
        report: Option<PathBuf>,
    },
    /// Audit audible leakage of a WAV through the housing.
    Leakage {
        #[arg(long, value_name = "WAV")]
        input: PathBuf,
        /// Directory holding front.csv, side.csv and back.csv (built-in profile when omitted).
        #[arg(long, value_name = "DIR")]
        profile_dir: Option<PathBuf>,
        #[arg(long = "direction", value_enum)]
        directions: Vec<Dir>,
        #[arg(long, value_name = "FILE")]
        report: Option<PathBuf>,
    },
    /// Sample an array's complex field on a square grid and write CSV.
    Field {
        /// Shipped layout name or a layout JSON file.
        #[arg(long, default_value = "2x6")]
        layout: String,
        #[arg(long, value_name = "CSV")]
        output: PathBuf,
        /// Half-width of the grid (mm).
        #[arg(long, default_value_t = 20.0)]
        extent_mm: f64,
        /// Points per side.
        #[arg(long, default_value_t = 41)]
        points: usize,
        /// Plane height (mm); defaults to `field.range_m`.
        #[arg(long)]
        z_mm: Option<f64>,
        #[arg(long)]
        no_mask: bool,
    },
    /// Rank layouts by wavefront planarity over the opening.
    LayoutRank {
        /// Layout JSON files (the shipped six when omitted).
        #[arg(long = "layout", value_name = "FILE")]
        layouts: Vec<PathBuf>,
        #[arg(long)]
        no_mask: bool,
        #[arg(long, value_name = "FILE")]
        report: Option<PathBuf>,
    },
    /// Pick the best row of a parameter-sweep table.
    Sweep {
        /// CSV with n_speakers,range_mm,carrier_hz,max_spl_db (shipped table when omitted).
        #[arg(long, value_name = "CSV")]
        table: Option<PathBuf>,
    },
    /// Run the full attack loop in a simulated environment.
    AttackSim {
        /// Environment script; a single victim at `attack.distance_m` when omitted.
        #[arg(long, value_name = "FILE")]
        env: Option<PathBuf>,
        #[arg(long, value_name = "FILE")]
        report: Option<PathBuf>,
        /// JSON-lines event log.
        #[arg(long, value_name = "FILE")]
        events: Option<PathBuf>,
    },
    /// Run one feedback round against a recorded scan log.
    ScanReplay {
        #[arg(long, value_name = "JSONL")]
        log: PathBuf,
        #[arg(long, value_name = "FILE")]
        report: Option<PathBuf>,
    },
    /// Estimate the reliable attack distance over `sim` distances.
    Rsa {
        /// Environment template with exactly one victim.
        #[arg(long, value_name = "FILE")]
        env: Option<PathBuf>,
        #[arg(long)]
        noise_db: Option<f64>,
        #[arg(long, value_name = "FILE")]
        output: Option<PathBuf>,
    },
}

fn groups_for(name: &str) -> &'static [&'static str] {
    match name {
        "modulate" | "demod" => &["signals"],
        "leakage" => &["signals", "acoustics"],
        "field" | "layout-rank" | "sweep" => &["field"],
        "attack-sim" | "rsa" => &["attack", "sim"],
        "scan-replay" => &["attack"],
        _ => &[],
    }
}

fn keys_help(groups: &[&str]) -> String {
    let mut s = format!("Config keys (JSON, or env {ENV_PREFIX}<GROUP>__<KEY>):\n");
    for (key, default) in RunConfig::documented_keys() {
        let group = key.split('.').next().unwrap_or("");
        if key.contains('.') && !groups.contains(&group) {
            continue;
        }
        let unit = unit_of(&key);
        let unit = if unit.is_empty() {
            String::new()
        } else {
            format!(" [{unit}]")
        };
        s.push_str(&format!("  {key}{unit} = {default}\n"));
    }
    s
}

fn command() -> clap::Command {
    let all: Vec<&str> = ["signals", "acoustics", "field", "attack", "sim"].to_vec();
    Cli::command().after_long_help(keys_help(&all)).mut_subcommands(|sc| {
        let text = keys_help(groups_for(sc.get_name()));
        sc.after_help(text)
    })
}

/// Parses `argv` (program name first), runs the subcommand and returns the
/// exit status.
pub fn dispatch<I, T>(argv: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let argv: Vec<OsString> = argv.into_iter().map(Into::into).collect();
    let mut cmd = command();
    if argv.len() <= 1 {
        eprintln!("{}", cmd.render_usage());
        eprintln!("Run with --help for the list of subcommands.");
        return 1;
    }
    let matches = match cmd.try_get_matches_from_mut(argv) {
        Ok(m) => m,
        Err(e) => {
            let _ = e.print();
            return match e.kind() {
                clap::error::ErrorKind::DisplayHelp | clap::error::ErrorKind::DisplayVersion => 0,
                _ => 1,
            };
        }
    };
    let cli = match Cli::from_arg_matches(&matches) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return 1;
        }
    };
    match run(cli) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            if e.is_validation() {
                1
            } else {
                2
            }
        }
    }
}

struct Ctx {
    cfg: RunConfig,
}

impl Ctx {
    fn out(&self, p: &Path) -> Result<PathBuf> {
        let path = match &self.cfg.output_dir {
            Some(dir) if p.is_relative() => dir.join(p),
            _ => p.to_path_buf(),
        };
        if let Some(parent) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
            std::fs::create_dir_all(parent).map_err(|e| Error::io(parent, e))?;
        }
        Ok(path)
    }

    fn info(&self, msg: impl AsRef<str>) {
        if self.cfg.verbosity > 0 {
            eprintln!("{}", msg.as_ref());
        }
    }

    /// Writes `text` to `path`, or to stdout when no path was given.
    fn emit(&self, path: Option<&Path>, text: &str) -> Result<()> {
        match path {
            Some(p) => {
                let p = self.out(p)?;
                std::fs::write(&p, text).map_err(|e| Error::io(&p, e))?;
                self.info(format!("wrote {}", p.display()));
                Ok(())
            }
            None => {
                let mut out = std::io::stdout().lock();
                out.write_all(text.as_bytes()).map_err(|e| Error::io("<stdout>", e))
            }
        }
    }
}

fn to_json<T: Serialize>(v: &T) -> Result<String> {
    let mut s = serde_json::to_string_pretty(v)?;
    s.push('\n');
    Ok(s)
}

fn run(cli: Cli) -> Result<()> {
    let mut cfg = load_config(cli.config.as_deref())?;
    if let Some(seed) = cli.seed {
        cfg.seed = seed;
    }
    if cli.output_dir.is_some() {
        cfg.output_dir = cli.output_dir;
    }
    cfg.verbosity = cfg.verbosity.max(cli.verbose);
    let ctx = Ctx { cfg };
    match cli.command {
        Cmd::Modulate {
            input,
            output,
            tone_hz,
            tone_amplitude,
            tone_duration_s,
            carrier_hz,
            depth,
            format,
        } => {
            let s = &ctx.cfg.signals;
            let baseband = match (input, tone_hz) {
                (Some(path), _) => read_wav(path)?,
                (None, Some(f)) => {
                    if !(tone_duration_s > 0.0) {
                        return Err(Error::param("tone_duration_s", "must be positive"));
                    }
                    let fs = s.sample_rate_hz;
                    let n = (tone_duration_s * fs as f64).round() as usize;
                    Waveform::from_fn(fs, n, |t| tone_amplitude * (2.0 * std::f64::consts::PI * f * t).sin())?
                }
                (None, None) => return Err(Error::param("input", "give --input or --tone-hz")),
            };
            let depth = depth.unwrap_or(s.depth);
            let mut passband = modulate(&baseband, carrier_hz.unwrap_or(s.carrier_hz), depth)?;
            let format = match format {
                Format::Float32 => SampleFormat::Float32,
                Format::Pcm16 => {
                    let g = 1.0 / (1.0 + depth);
                    let scaled = passband.samples().iter().map(|x| x * g).collect();
                    passband = Waveform::new(passband.sample_rate_hz(), scaled)?;
                    SampleFormat::Pcm16
                }
            };
            let out = ctx.out(&output)?;
            write_wav(&out, &passband, format)?;
            ctx.info(format!("wrote {} ({} samples)", out.display(), passband.len()));
            Ok(())
        }
        Cmd::Demod {
            input,
            output,
            reference,
            report,
        } => {
            let s = &ctx.cfg.signals;
            let passband = read_wav(&input)?;
            let rec = recover_baseband(&passband, s.mic, s.cutoff_hz)?;
            let corr = match reference {
                Some(path) => {
                    let r = read_wav(&path)?;
                    let end = rec.start_index + rec.waveform.len();
                    if r.len() < end {
                        return Err(Error::param(
                            "reference",
                            format!("{} samples, need at least {end}", r.len()),
                        ));
                    }
                    Some(correlation(rec.waveform.samples(), &r.samples()[rec.start_index..end]))
                }
                None => None,
            };
            let out = ctx.out(&output)?;
            write_wav(&out, &rec.waveform, SampleFormat::Float32)?;
            #[derive(Serialize)]
            struct DemodReport {
                input: PathBuf,
                output: PathBuf,
                sample_rate_hz: u32,
                samples: usize,
                start_index: usize,
                dc_offset: f64,
                degenerate: bool,
                correlation: Option<f64>,
            }
            let rep = DemodReport {
                input,
                output: out,
                sample_rate_hz: rec.waveform.sample_rate_hz(),
                samples: rec.waveform.len(),
                start_index: rec.start_index,
                dc_offset: rec.dc_offset,
                degenerate: rec.degenerate,
                correlation: corr,
            };
            ctx.emit(report.as_deref(), &to_json(&rep)?)
        }
        Cmd::Leakage {
            input,
            profile_dir,
            directions,
            report,
        } => {
            let w = read_wav(input)?;
            let profile = match profile_dir {
                Some(d) => InsertionLossProfile::from_csv_files(
                    d.join("front.csv"),
                    d.join("side.csv"),
                    d.join("back.csv"),
                    ENHANCEMENT_GAIN_DB,
                    InsertionLossProfile::default().carrier_band_hz,
                )?,
                None => InsertionLossProfile::default(),
            };
            let dirs: Vec<Direction> = if directions.is_empty() {
                Direction::ALL.to_vec()
            } else {
                directions.into_iter().map(Into::into).collect()
            };
            let rep = leakage_report(&w, &profile, ctx.cfg.acoustics.source_spl_ref_db, &dirs)?;
            ctx.info(format!(
                "leakage {} ({} failing bands)",
                if rep.pass { "pass" } else { "FAIL" },
                rep.failing_bands
            ));
            ctx.emit(report.as_deref(), &to_json(&rep)?)
        }
        Cmd::Field {
            layout,
            output,
            extent_mm,
            points,
            z_mm,
            no_mask,
        } => {
            let f = &ctx.cfg.field;
            let layout = resolve_layout(&layout)?;
            if points < 2 {
                return Err(Error::param("points", "need at least 2 per side"));
            }
            if !(extent_mm > 0.0) {
                return Err(Error::param("extent_mm", "must be positive"));
            }
            let z = z_mm.map_or(f.range_m, |z| z * 1e-3);
            let h = extent_mm * 1e-3;
            let step = 2.0 * h / (points - 1) as f64;
            let grid: Vec<[f64; 3]> = (0..points)
                .flat_map(|j| (0..points).map(move |i| [-h + i as f64 * step, -h + j as f64 * step, z]))
                .collect();
            let opts = FieldOptions {
                element_model: f.element_model,
                ..FieldOptions::default()
            };
            let mask = (!no_mask).then_some(&f.mask);
            let field = array_field_with(&layout, f.frequency_hz, &grid, mask, opts)?;
            let out = ctx.out(&output)?;
            field.write_csv_path(&out)?;
            ctx.info(format!("wrote {} ({} points)", out.display(), grid.len()));
            Ok(())
        }
        Cmd::LayoutRank {
            layouts,
            no_mask,
            report,
        } => {
            let f = &ctx.cfg.field;
            let layouts = if layouts.is_empty() {
                shipped_layouts()
            } else {
                layouts.iter().map(LayoutFile::load).collect::<Result<Vec<_>>>()?
            };
            let ranked = rank_layouts_with(&layouts, f.frequency_hz, f.range_m, &f.mask, !no_mask)?;
            #[derive(Serialize)]
            struct Row<'a> {
                rank: usize,
                name: &'a str,
                planarity_rad: f64,
                on_axis_spl_db: f64,
            }
            let rows: Vec<Row> = ranked
                .iter()
                .enumerate()
                .map(|(i, r)| Row {
                    rank: i + 1,
                    name: &r.layout.name,
                    planarity_rad: r.planarity_rad,
                    on_axis_spl_db: r.on_axis_spl_db,
                })
                .collect();
            match report {
                Some(p) => ctx.emit(Some(&p), &to_json(&rows)?),
                None => {
                    let mut text = String::from("rank  layout      planarity_rad  on_axis_db\n");
                    for r in &rows {
                        text.push_str(&format!(
                            "{:<5} {:<11} {:>13.4} {:>11.2}\n",
                            r.rank, r.name, r.planarity_rad, r.on_axis_spl_db
                        ));
                    }
                    ctx.emit(None, &text)
                }
            }
        }
        Cmd::Sweep { table } => {
            let rows = match table {
                Some(p) => load_sweep_table_path(p)?,
                None => shipped_sweep_table(),
            };
            let best = sweep_parameters(&rows)?;
            ctx.emit(
                None,
                &format!(
                    "{} speakers, {} mm, {} Hz, {} dB\n",
                    best.n_speakers, best.range_mm, best.carrier_hz, best.max_spl_db
                ),
            )
        }
        Cmd::AttackSim { env, report, events } => {
            let a = &ctx.cfg.attack;
            let mut script = match &env {
                Some(p) => EnvironmentScript::from_json(&read_text(p)?)?,
                None => {
                    let mut v = DeviceScript::victim("victim", a.distance_m, 0.0);
                    v.device_profile = a.device_profile.clone();
                    let mut s = EnvironmentScript::new(vec![v]);
                    s.noise_db = a.noise_db;
                    s
                }
            };
            if cli.seed.is_some() || env.is_none() {
                script.rng_seed = ctx.cfg.seed;
            }
            let run = simulate(&script, a)?;
            ctx.info(format!(
                "attack {} after {} angle(s)",
                if run.report.success { "succeeded" } else { "failed" },
                run.report.angles.len()
            ));
            if let Some(p) = events {
                let mut buf = Vec::new();
                write_event_log(&run.events, &mut buf)?;
                let p = ctx.out(&p)?;
                std::fs::write(&p, buf).map_err(|e| Error::io(&p, e))?;
            }
            let mut text = run.report.to_json()?;
            text.push('\n');
            ctx.emit(report.as_deref(), &text)
        }
        Cmd::ScanReplay { log, report } => {
            let snaps = read_scan_log(&log)?;
            let mut source = ReplaySource::new(snaps);
            let mut sink = RecordingSink::default();
            let params = ctx.cfg.attack.feedback_params();
            let outcome = feedback_round(
                &mut Link {
                    source: &mut source,
                    sink: &mut sink,
                },
                &params,
            )?;
            ctx.info(format!("targets: {:?}", outcome.target_ids));
            let mut text = outcome.to_json()?;
            text.push('\n');
            ctx.emit(report.as_deref(), &text)
        }
        Cmd::Rsa { env, noise_db, output } => {
            let a = &ctx.cfg.attack;
            let mut template = match &env {
                Some(p) => EnvironmentScript::from_json(&read_text(p)?)?,
                None => rsa_template(a.noise_db, &a.device_profile),
            };
            if let Some(n) = noise_db {
                template.noise_db = n;
            }
            if cli.seed.is_some() || env.is_none() {
                template.rng_seed = ctx.cfg.seed;
            }
            let est = estimate_rsa(&template, a, &ctx.cfg.sim.distance_grid(), ctx.cfg.sim.trials)?;
            match est.rsa_m {
                Some(d) => ctx.info(format!("reliable distance {d} m")),
                None => ctx.info("no distance reached half success"),
            }
            ctx.emit(output.as_deref(), &est.to_csv()?)
        }
    }
}

fn read_text(path: &Path) -> Result<String> {
    std::fs::read_to_string(path).map_err(|e| Error::io(path, e))
}

fn resolve_layout(name_or_path: &str) -> Result<ArrayLayout> {
    if let Some(l) = shipped_layouts().into_iter().find(|l| l.name == name_or_path) {
        return Ok(l);
    }
    let path = Path::new(name_or_path);
    if path.exists() {
        return LayoutFile::load(path);
    }
    let names: Vec<String> = shipped_layouts().into_iter().map(|l| l.name).collect();
    Err(Error::param(
        "layout",
        format!("`{name_or_path}` is neither a file nor one of {}", names.join(", ")),
    ))
}
