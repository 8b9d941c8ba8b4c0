//! `graffmatch` command line.
//!
//! Exit codes: 0 success (for `match`: a transform was estimated and passed
//! the fit checks), 2 `match` could not verify the pair, 1 bad input or I/O.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use graffmatch_core::graff::{shifted_graff_distance, shifted_principal_angles};
use graffmatch_core::{residual, ConsistencyParams, Rho, RigidTransform, SolverParams, TrimParams};
use serde::Serialize;

use crate::bench::{run_campaign, write_outputs, BenchConfig};
use crate::io::{read_scan, write_scan, LoadedScan};
use crate::pipeline::{match_scans, DistanceFunctionId, MatchParams};
use crate::sim::{campaign_pair, NoiseConfig, PairConfig, SceneConfig, Tier};

pub const EXIT_OK: u8 = 0;
pub const EXIT_INPUT: u8 = 1;
pub const EXIT_UNVERIFIED: u8 = 2;

/// Decimal places of every number in `match` documents and `distance` output.
pub const DECIMALS: usize = 12;

#[derive(Debug, Parser)]
#[command(name = "graffmatch", version, about = "Line/plane landmark matching on the affine Grassmannian")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Match two scans and estimate the transform from scan A to scan B.
    Match {
        scan_a: PathBuf,
        scan_b: PathBuf,
        #[arg(long, default_value_t = 40.0)]
        rho: f64,
        #[arg(long, default_value_t = 0.2)]
        epsilon: f64,
        #[arg(long, default_value_t = 0.02)]
        sigma: f64,
        #[arg(long, default_value = "graff_shifted")]
        distance_fn: DistanceFunctionId,
        /// Register from the whole selection, without residual trimming.
        #[arg(long)]
        no_trim: bool,
        /// Write the result document here instead of stdout.
        #[arg(long)]
        output: Option<PathBuf>,
    },
    /// Shifted affine Grassmannian distance between two objects of a scan.
    Distance {
        scan: PathBuf,
        index_a: usize,
        index_b: usize,
        #[arg(long, default_value_t = 40.0)]
        rho: f64,
    },
    /// Run a benchmark campaign described by a TOML file.
    Bench {
        config: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[arg(long, default_value_t = 1)]
        workers: usize,
        /// Also record wall-clock durations (makes outputs run-dependent).
        #[arg(long)]
        timing: bool,
    },
    /// Write a synthetic loop pair (a.json, b.json, truth.json).
    Simulate {
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// easy, medium or hard.
        #[arg(long, default_value = "easy")]
        tier: String,
        /// Zero noise and clutter.
        #[arg(long)]
        clean: bool,
        #[arg(long)]
        out: PathBuf,
    },
}

struct Failure(String);

impl<E: std::fmt::Display> From<E> for Failure {
    fn from(e: E) -> Self {
        Failure(e.to_string())
    }
}

pub fn round(x: f64) -> f64 {
    format!("{x:.DECIMALS$}").parse().expect("formatted floats parse")
}

#[derive(Debug, Serialize)]
struct TransformDoc {
    /// Row-major 3×3.
    rotation: [f64; 9],
    quaternion_wxyz: [f64; 4],
    translation: [f64; 3],
}

impl TransformDoc {
    fn new(t: &RigidTransform) -> Self {
        let r = t.rotation_matrix();
        let mut rotation = [0.0; 9];
        for i in 0..3 {
            for j in 0..3 {
                rotation[3 * i + j] = round(r[(i, j)]);
            }
        }
        Self {
            rotation,
            quaternion_wxyz: t.quaternion_wxyz().map(round),
            translation: [0, 1, 2].map(|i| round(t.translation()[i])),
        }
    }
}

#[derive(Debug, Serialize)]
struct MatchDoc {
    status: &'static str,
    #[serde(skip_serializing_if = "Option::is_none")]
    reason: Option<String>,
    distance_fn: DistanceFunctionId,
    candidates: usize,
    objective: f64,
    /// Index pairs `[a, b]` used for the transform.
    correspondences: Vec<[usize; 2]>,
    /// Selected by the solver but dropped by residual trimming.
    trimmed: Vec<[usize; 2]>,
    /// `[offset_m, angle_deg]` of each entry of `correspondences` under the
    /// estimated transform; empty when none was estimated.
    residuals: Vec<[f64; 2]>,
    #[serde(flatten)]
    transform: Option<TransformDoc>,
}

fn load(path: &Path) -> Result<LoadedScan, Failure> {
    let loaded = read_scan(path)?;
    for w in &loaded.warnings {
        eprintln!("warning: {w}");
    }
    Ok(loaded)
}

fn emit(text: &str, output: Option<&Path>) -> Result<(), Failure> {
    match output {
        Some(p) => fs::write(p, text).map_err(|e| Failure(format!("{}: {e}", p.display()))),
        None => {
            std::io::stdout().write_all(text.as_bytes())?;
            Ok(())
        }
    }
}

fn consistency(rho: f64, epsilon: f64, sigma: f64) -> Result<ConsistencyParams, Failure> {
    let c = ConsistencyParams {
        epsilon,
        sigma,
        rho: Rho::new(rho)?,
        max_candidates: None,
    };
    c.kernel()?;
    Ok(c)
}

#[allow(clippy::too_many_arguments)]
fn cmd_match(
    scan_a: &Path,
    scan_b: &Path,
    rho: f64,
    epsilon: f64,
    sigma: f64,
    distance_fn: DistanceFunctionId,
    trim: bool,
    output: Option<&Path>,
) -> Result<u8, Failure> {
    let params = MatchParams {
        consistency: consistency(rho, epsilon, sigma)?,
        distance_fn,
        solver: SolverParams::default(),
        trim: trim.then(TrimParams::default),
    };
    let a = load(scan_a)?;
    let b = load(scan_b)?;
    let outcome = match_scans(&a.scan, &b.scan, &params)?;
    let pairs = |keep: bool| {
        outcome
            .correspondences
            .iter()
            .zip(&outcome.kept)
            .filter(|(_, &k)| k == keep)
            .map(|(&(i, j), _)| [i, j])
            .collect::<Vec<_>>()
    };
    let (status, reason, transform, code) = match &outcome.transform {
        Ok(t) => ("verified", None, Some(TransformDoc::new(t)), EXIT_OK),
        Err(e) => ("failed", Some(e.to_string()), None, EXIT_UNVERIFIED),
    };
    let correspondences = pairs(true);
    let residuals = match &outcome.transform {
        Ok(t) => correspondences
            .iter()
            .map(|&[i, j]| {
                let r = residual(&a.scan.landmarks()[i].element, &b.scan.landmarks()[j].element, t)?;
                Ok([round(r.offset_m), round(r.angle_deg)])
            })
            .collect::<Result<_, graffmatch_core::Error>>()?,
        Err(_) => Vec::new(),
    };
    let doc = MatchDoc {
        status,
        reason,
        distance_fn,
        candidates: outcome.candidates.len(),
        objective: round(outcome.objective()),
        correspondences,
        trimmed: pairs(false),
        residuals,
        transform,
    };
    let mut text = serde_json::to_string_pretty(&doc)?;
    text.push('\n');
    emit(&text, output)?;
    Ok(code)
}

fn cmd_distance(scan: &Path, i: usize, j: usize, rho: f64) -> Result<u8, Failure> {
    let rho = Rho::new(rho)?;
    let loaded = load(scan)?;
    let landmarks = loaded.scan.landmarks();
    let get = |k: usize| {
        landmarks.get(k).map(|l| &l.element).ok_or_else(|| {
            Failure(format!(
                "index {k} is out of range ({} objects in {})",
                landmarks.len(),
                scan.display()
            ))
        })
    };
    let (a, b) = (get(i)?, get(j)?);
    let d = shifted_graff_distance(a, b, rho);
    let angles = shifted_principal_angles(a, b, rho);
    let list: Vec<String> = angles.angles().iter().map(|t| format!("{t:.DECIMALS$}")).collect();
    emit(&format!("distance {d:.DECIMALS$}\nangles {}\n", list.join(" ")), None)?;
    Ok(EXIT_OK)
}

fn cmd_bench(config: &Path, out: &Path, workers: usize, timing: bool) -> Result<u8, Failure> {
    let text = fs::read_to_string(config).map_err(|e| Failure(format!("{}: {e}", config.display())))?;
    let cfg = BenchConfig::from_toml(&text).map_err(|e| Failure(format!("{}: {e}", config.display())))?;
    let results = run_campaign(&cfg, workers).map_err(Failure)?;
    let summary = write_outputs(out, &cfg, &results, timing).map_err(Failure)?;
    for r in &summary.rows {
        eprintln!(
            "{:<8} {:<22} recall@100%P {:.3}  accepted {}/{}",
            r.tier, r.distance_fn, r.recall_at_100p, r.accepted, r.trials
        );
    }
    Ok(EXIT_OK)
}

#[derive(Serialize)]
struct TruthDoc {
    #[serde(flatten)]
    transform: TransformDoc,
    correspondences: Vec<[usize; 2]>,
}

fn cmd_simulate(seed: u64, tier: &str, clean: bool, out: &Path) -> Result<u8, Failure> {
    let tier: Tier = Tier::standard()
        .into_iter()
        .find(|t| t.name == tier)
        .ok_or_else(|| Failure(format!("unknown tier {tier:?} (expected easy, medium or hard)")))?;
    let base = if clean {
        PairConfig {
            clutter: 0,
            noise: NoiseConfig {
                angle_deg: 0.0,
                offset_m: 0.0,
            },
            ..PairConfig::default()
        }
    } else {
        PairConfig::default()
    };
    let pair = campaign_pair(&SceneConfig::default(), &base, &tier, seed);
    fs::create_dir_all(out).map_err(|e| Failure(format!("{}: {e}", out.display())))?;
    write_scan(&pair.scan_a, &out.join("a.json"))?;
    write_scan(&pair.scan_b, &out.join("b.json"))?;
    let truth = TruthDoc {
        transform: TransformDoc::new(&pair.truth),
        correspondences: pair.correspondences.iter().map(|&(i, j)| [i, j]).collect(),
    };
    let mut text = serde_json::to_string_pretty(&truth)?;
    text.push('\n');
    let path = out.join("truth.json");
    fs::write(&path, text).map_err(|e| Failure(format!("{}: {e}", path.display())))?;
    Ok(EXIT_OK)
}

pub fn run(cli: Cli) -> ExitCode {
    let result = match &cli.command {
        Command::Match {
            scan_a,
            scan_b,
            rho,
            epsilon,
            sigma,
            distance_fn,
            no_trim,
            output,
        } => cmd_match(scan_a, scan_b, *rho, *epsilon, *sigma, *distance_fn, !no_trim, output.as_deref()),
        Command::Distance {
            scan,
            index_a,
            index_b,
            rho,
        } => cmd_distance(scan, *index_a, *index_b, *rho),
        Command::Bench {
            config,
            out,
            workers,
            timing,
        } => cmd_bench(config, out, *workers, *timing),
        Command::Simulate {
            seed,
            tier,
            clean,
            out,
        } => cmd_simulate(*seed, tier, *clean, out),
    };
    match result {
        Ok(code) => ExitCode::from(code),
        Err(Failure(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(EXIT_INPUT)
        }
    }
}
