//! Benchmark campaigns: every (tier, trial) pair is matched with each
//! configured distance function; results go to `results.csv` and
//! `summary.json` (plus `timing.json` when timing is requested).
//!
//! Output is a pure function of the configuration. Wall-clock durations are
//! the one exception, so they are only written on request.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use graffmatch_core::registration::Thresholds;
use graffmatch_core::{ConsistencyParams, Rho, SolverParams, TrimParams};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::pipeline::{DistanceFunctionId, MatchParams};
use crate::sim::{
    campaign_pair, compute_metrics, run_trial, PairConfig, SceneConfig, Tier, TrialResult,
};

pub const CSV_HEADER: &str = "seed,tier,trial,distance_fn,m,matches,inliers_found,objective,\
precision,recall,rot_err_deg,trans_err_m,accept,duration_s";

/// Written in place of alignment errors when no transform was estimated.
pub const FAILED: &str = "failed";

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ParamsConfig {
    pub rho: f64,
    pub epsilon: f64,
    pub sigma: f64,
    /// Residual trimming and the leave-out influence check before the final
    /// fit.
    pub trim: bool,
    pub max_candidates: Option<usize>,
}

impl Default for ParamsConfig {
    fn default() -> Self {
        let c = ConsistencyParams::default();
        Self {
            rho: c.rho.get(),
            epsilon: c.epsilon,
            sigma: c.sigma,
            trim: true,
            max_candidates: None,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ThresholdConfig {
    pub rotation_deg: f64,
    pub translation_m: f64,
}

impl Default for ThresholdConfig {
    fn default() -> Self {
        let t = Thresholds::default();
        Self {
            rotation_deg: t.rotation_deg,
            translation_m: t.translation_m,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct BenchConfig {
    pub seed: u64,
    pub trials_per_tier: usize,
    pub distance_fns: Vec<DistanceFunctionId>,
    pub scene: SceneConfig,
    /// Baseline and overlap are taken from each tier.
    pub pair: PairConfig,
    pub params: ParamsConfig,
    pub thresholds: ThresholdConfig,
    pub tiers: Vec<Tier>,
}

impl Default for BenchConfig {
    fn default() -> Self {
        Self {
            seed: 0,
            trials_per_tier: 100,
            distance_fns: vec![DistanceFunctionId::GraffShifted],
            scene: SceneConfig::default(),
            pair: PairConfig::default(),
            params: ParamsConfig::default(),
            thresholds: ThresholdConfig::default(),
            tiers: Tier::standard(),
        }
    }
}

impl BenchConfig {
    pub fn from_toml(text: &str) -> Result<Self, String> {
        let cfg: BenchConfig = toml::from_str(text).map_err(|e| e.to_string())?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<(), String> {
        self.scene.validate()?;
        self.pair.validate()?;
        self.match_params(DistanceFunctionId::GraffShifted)?;
        if self.distance_fns.is_empty() {
            return Err("distance_fns must not be empty".into());
        }
        if self.tiers.is_empty() {
            return Err("at least one tier is required".into());
        }
        for (i, t) in self.tiers.iter().enumerate() {
            let name_ok = !t.name.is_empty()
                && t.name.chars().all(|c| c.is_ascii_alphanumeric() || c == '_' || c == '-');
            if !name_ok {
                return Err(format!("tiers[{i}].name must be non-empty [A-Za-z0-9_-]"));
            }
            if self.tiers[..i].iter().any(|o| o.name == t.name) {
                return Err(format!("tiers[{i}].name {:?} is repeated", t.name));
            }
            PairConfig {
                baseline: t.baseline,
                overlap: t.overlap,
                ..self.pair.clone()
            }
            .validate()
            .map_err(|e| format!("tiers[{i}]: {e}"))?;
        }
        let th = &self.thresholds;
        if !(th.rotation_deg > 0.0 && th.translation_m > 0.0) {
            return Err("thresholds must be positive".into());
        }
        Ok(())
    }

    pub fn match_params(&self, distance_fn: DistanceFunctionId) -> Result<MatchParams, String> {
        let p = &self.params;
        let consistency = ConsistencyParams {
            epsilon: p.epsilon,
            sigma: p.sigma,
            rho: Rho::new(p.rho).map_err(|e| format!("params.rho: {e}"))?,
            max_candidates: p.max_candidates,
        };
        consistency.kernel().map_err(|e| format!("params: {e}"))?;
        Ok(MatchParams {
            consistency,
            distance_fn,
            solver: SolverParams::default(),
            trim: p.trim.then(TrimParams::default),
        })
    }

    fn thresholds(&self) -> Thresholds {
        Thresholds {
            rotation_deg: self.thresholds.rotation_deg,
            translation_m: self.thresholds.translation_m,
        }
    }
}

/// Runs every trial of the campaign on `workers` threads. Results are ordered
/// by tier, trial and distance function, whatever the worker count.
pub fn run_campaign(cfg: &BenchConfig, workers: usize) -> Result<Vec<TrialResult>, String> {
    cfg.validate()?;
    if workers == 0 {
        return Err("workers must be at least 1".into());
    }
    let params: Vec<MatchParams> = cfg
        .distance_fns
        .iter()
        .map(|&d| cfg.match_params(d))
        .collect::<Result<_, _>>()?;
    let thresholds = cfg.thresholds();
    let jobs: Vec<(usize, usize)> = (0..cfg.tiers.len())
        .flat_map(|t| (0..cfg.trials_per_tier).map(move |k| (t, k)))
        .collect();
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(workers)
        .build()
        .map_err(|e| e.to_string())?;
    let per_job: Vec<Result<Vec<TrialResult>, String>> = pool.install(|| {
        jobs.par_iter()
            .map(|&(t, k)| {
                let tier = &cfg.tiers[t];
                let seed = crate::sim::trial_seed(cfg.seed, t, k);
                let pair = campaign_pair(&cfg.scene, &cfg.pair, tier, seed);
                params
                    .iter()
                    .map(|p| {
                        let mut r = run_trial(&pair, p, &thresholds).map_err(|e| e.to_string())?;
                        r.seed = seed;
                        r.tier = tier.name.clone();
                        r.trial = k;
                        Ok(r)
                    })
                    .collect()
            })
            .collect()
    });
    let mut out = Vec::with_capacity(jobs.len() * params.len());
    for r in per_job {
        out.extend(r?);
    }
    Ok(out)
}

fn fixed(x: f64) -> String {
    format!("{x:.6}")
}

/// CSV with a header row; errors and durations use six decimals.
pub fn results_csv(results: &[TrialResult], timing: bool) -> String {
    let mut s = String::from(CSV_HEADER);
    s.push('\n');
    for r in results {
        let (rot, trans) = match &r.error {
            Some(e) => (fixed(e.rotation_deg), fixed(e.translation_m)),
            None => (FAILED.to_string(), FAILED.to_string()),
        };
        let duration = if timing { fixed(r.duration_s) } else { String::new() };
        let _ = writeln!(
            s,
            "{},{},{},{},{},{},{},{},{},{},{},{},{},{}",
            r.seed,
            r.tier,
            r.trial,
            r.distance_fn,
            r.m,
            r.matches,
            r.inliers_found,
            fixed(r.objective),
            fixed(r.precision),
            fixed(r.recall),
            rot,
            trans,
            r.accept,
            duration
        );
    }
    s
}

/// Rounds to six decimals so that the JSON text has a fixed precision.
fn round6(x: f64) -> f64 {
    (x * 1e6).round() / 1e6
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct SummaryRow {
    /// Tier name, or `"all"` for the whole campaign.
    pub tier: String,
    pub distance_fn: DistanceFunctionId,
    pub trials: usize,
    pub claimed: usize,
    pub accepted: usize,
    pub recall_at_100p: f64,
    pub mean_precision: f64,
    pub mean_recall: f64,
    pub median_rot_err_deg: Option<f64>,
    pub median_trans_err_m: Option<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct TimingRow {
    pub tier: String,
    pub distance_fn: DistanceFunctionId,
    pub mean_s: f64,
    pub std_s: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct BenchSummary {
    pub seed: u64,
    pub trials_per_tier: usize,
    pub rows: Vec<SummaryRow>,
}

fn groups<'a>(
    cfg: &'a BenchConfig,
    results: &'a [TrialResult],
) -> impl Iterator<Item = (String, DistanceFunctionId, Vec<TrialResult>)> + 'a {
    let names = cfg.tiers.iter().map(|t| Some(t.name.as_str())).chain([None]);
    names.flat_map(move |tier| {
        cfg.distance_fns.iter().map(move |&d| {
            let rows: Vec<TrialResult> = results
                .iter()
                .filter(|r| r.distance_fn == d && tier.is_none_or(|t| r.tier == t))
                .cloned()
                .collect();
            (tier.unwrap_or("all").to_string(), d, rows)
        })
    })
}

pub fn summarize(cfg: &BenchConfig, results: &[TrialResult]) -> Result<BenchSummary, String> {
    let mut rows = Vec::new();
    for (tier, distance_fn, group) in groups(cfg, results) {
        let s = compute_metrics(&group).map_err(|e| format!("{tier}/{distance_fn}: {e}"))?;
        rows.push(SummaryRow {
            tier,
            distance_fn,
            trials: s.trials,
            claimed: s.claimed,
            accepted: s.accepted,
            recall_at_100p: round6(s.recall_at_100p),
            mean_precision: round6(s.mean_precision),
            mean_recall: round6(s.mean_recall),
            median_rot_err_deg: s.median_rot_err_deg.map(round6),
            median_trans_err_m: s.median_trans_err_m.map(round6),
        });
    }
    Ok(BenchSummary {
        seed: cfg.seed,
        trials_per_tier: cfg.trials_per_tier,
        rows,
    })
}

pub fn timing(cfg: &BenchConfig, results: &[TrialResult]) -> Result<Vec<TimingRow>, String> {
    groups(cfg, results)
        .map(|(tier, distance_fn, group)| {
            let s = compute_metrics(&group).map_err(|e| format!("{tier}/{distance_fn}: {e}"))?;
            Ok(TimingRow {
                tier,
                distance_fn,
                mean_s: round6(s.duration_mean_s),
                std_s: round6(s.duration_std_s),
            })
        })
        .collect()
}

fn to_json<T: Serialize>(value: &T) -> String {
    let mut s = serde_json::to_string_pretty(value).expect("summaries serialize");
    s.push('\n');
    s
}

/// Writes `results.csv` and `summary.json` (and `timing.json` if `timing`)
/// into `dir`, creating it if needed.
pub fn write_outputs(
    dir: &Path,
    cfg: &BenchConfig,
    results: &[TrialResult],
    timing_enabled: bool,
) -> Result<BenchSummary, String> {
    let summary = summarize(cfg, results)?;
    let io = |e: std::io::Error, what: &Path| format!("{}: {e}", what.display());
    fs::create_dir_all(dir).map_err(|e| io(e, dir))?;
    let mut files = vec![
        ("results.csv", results_csv(results, timing_enabled)),
        ("summary.json", to_json(&summary)),
    ];
    if timing_enabled {
        files.push(("timing.json", to_json(&timing(cfg, results)?)));
    }
    for (name, text) in files {
        let path = dir.join(name);
        fs::write(&path, text).map_err(|e| io(e, &path))?;
    }
    Ok(summary)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn small() -> BenchConfig {
        BenchConfig {
            trials_per_tier: 3,
            distance_fns: vec![DistanceFunctionId::GraffShifted, DistanceFunctionId::GrOnly],
            ..BenchConfig::default()
        }
    }

    #[test]
    fn empty_config_uses_defaults() {
        assert_eq!(BenchConfig::from_toml("").unwrap(), BenchConfig::default());
    }

    #[test]
    fn config_parses_tables() {
        let cfg = BenchConfig::from_toml(
            r#"
            seed = 7
            trials_per_tier = 5
            distance_fns = ["graff_shifted", "euclidean_centroid"]
            [scene]
            lines = 4
            [pair.noise]
            angle_deg = 1.0
            [params]
            rho = 20.0
            [[tiers]]
            name = "far"
            baseline = 30.0
            overlap = 0.4
            "#,
        )
        .unwrap();
        assert_eq!(cfg.seed, 7);
        assert_eq!(cfg.scene.lines, 4);
        assert_eq!(cfg.scene.planes, SceneConfig::default().planes);
        assert_eq!(cfg.pair.noise.angle_deg, 1.0);
        assert_eq!(cfg.params.rho, 20.0);
        assert_eq!(cfg.tiers.len(), 1);
        assert_eq!(cfg.distance_fns[1], DistanceFunctionId::EuclideanCentroid);
    }

    #[test]
    fn config_errors() {
        for bad in [
            "unknown = 1",
            "distance_fns = []",
            "distance_fns = [\"nope\"]",
            "[params]\nsigma = -1.0",
            "[params]\nrho = 0.0",
            "[[tiers]]\nname = \"a,b\"\nbaseline = 0.0\noverlap = 0.5",
            "[[tiers]]\nname = \"a\"\nbaseline = 0.0\noverlap = 1.5",
        ] {
            assert!(BenchConfig::from_toml(bad).is_err(), "{bad}");
        }
    }

    #[test]
    fn campaign_layout() {
        let cfg = small();
        let results = run_campaign(&cfg, 2).unwrap();
        assert_eq!(results.len(), 3 * 3 * 2);
        assert_eq!(results[0].tier, "easy");
        assert_eq!(results[1].distance_fn, DistanceFunctionId::GrOnly);
        assert_eq!(results[1].seed, results[0].seed);
        let csv = results_csv(&results, false);
        assert_eq!(csv.lines().count(), 1 + results.len());
        assert!(csv.lines().skip(1).all(|l| l.ends_with(',') && l.split(',').count() == 14));
        let summary = summarize(&cfg, &results).unwrap();
        // 3 tiers + the pooled row, per distance function.
        assert_eq!(summary.rows.len(), 4 * 2);
        assert_eq!(summary.rows.last().unwrap().trials, 9);
    }
}
