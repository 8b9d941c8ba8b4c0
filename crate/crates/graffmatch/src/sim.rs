//! Synthetic landmark scenes, loop-closure pairs and benchmark metrics.
//!
//! A scene is a set of pole-like lines, wall-like planes and a few elevated
//! horizontal surfaces scattered around the origin, plus the ground plane,
//! which both scans always observe. A loop pair observes the scene from two sensor poses: scan `a`
//! from the origin, scan `b` from a pose displaced by the tier baseline and
//! rotated (mostly in yaw). Each observation resamples where on the object its
//! centroid lies, perturbs direction and position, and adds clutter.

use std::time::Instant;

use graffmatch_core::registration::Thresholds;
use graffmatch_core::{alignment_error, AlignmentError, GraffElement, Kind, Landmark, RigidTransform, Scan};
use nalgebra::{Rotation3, Vector2, Vector3};
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::pipeline::{match_scans, DistanceFunctionId, MatchParams};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SceneConfig {
    pub lines: usize,
    pub planes: usize,
    /// Objects are kept within this horizontal radius of the origin (m).
    pub extent: f64,
    /// Target mean pairwise distance between objects (m).
    pub mean_distance: f64,
    /// Target spread of pairwise distances (m); reported, not enforced.
    pub std_distance: f64,
    /// Size of an object; per-scan centroids move within half of it (m).
    pub object_extent: f64,
    /// Fraction of objects with urban orientation (vertical poles,
    /// axis-aligned walls, horizontal surfaces); the rest are oriented
    /// uniformly at random.
    pub structured_fraction: f64,
    /// Make the first plane the ground (`z = 0`), which every scan observes.
    pub ground: bool,
    /// Among the other structured planes, the share that is an elevated
    /// horizontal surface (platform, roof) rather than a wall.
    pub horizontal_fraction: f64,
    pub seed: u64,
}

impl Default for SceneConfig {
    fn default() -> Self {
        Self {
            lines: 7,
            planes: 23,
            extent: 80.0,
            mean_distance: 27.0,
            std_distance: 16.0,
            object_extent: 5.0,
            structured_fraction: 0.8,
            ground: true,
            horizontal_fraction: 0.1,
            seed: 0,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct NoiseConfig {
    /// Per-axis standard deviation of the rotation perturbing a direction
    /// or normal (degrees).
    pub angle_deg: f64,
    /// Per-axis standard deviation of the position offset (m).
    pub offset_m: f64,
}

impl Default for NoiseConfig {
    fn default() -> Self {
        Self {
            angle_deg: 0.5,
            offset_m: 0.05,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PairConfig {
    /// Distance between the two sensor positions (m).
    pub baseline: f64,
    /// Relative yaw is uniform in `±yaw_range_deg`.
    pub yaw_range_deg: f64,
    /// Relative roll and pitch are uniform in `±tilt_range_deg`.
    pub tilt_range_deg: f64,
    /// Fraction of scene objects that scan `b` also observes.
    pub overlap: f64,
    /// Spurious objects added to each scan.
    pub clutter: usize,
    pub noise: NoiseConfig,
}

impl Default for PairConfig {
    fn default() -> Self {
        Self {
            baseline: 0.0,
            yaw_range_deg: 180.0,
            tilt_range_deg: 5.0,
            overlap: 0.9,
            clutter: 5,
            noise: NoiseConfig::default(),
        }
    }
}

impl PairConfig {
    pub fn validate(&self) -> Result<(), String> {
        if !(0.0..=1.0).contains(&self.overlap) {
            return Err(format!("overlap {} is outside [0, 1]", self.overlap));
        }
        let nonneg = [
            ("baseline", self.baseline),
            ("yaw_range_deg", self.yaw_range_deg),
            ("tilt_range_deg", self.tilt_range_deg),
            ("noise.angle_deg", self.noise.angle_deg),
            ("noise.offset_m", self.noise.offset_m),
        ];
        for (name, v) in nonneg {
            if !(v.is_finite() && v >= 0.0) {
                return Err(format!("{name} must be finite and non-negative"));
            }
        }
        Ok(())
    }
}

impl SceneConfig {
    pub fn validate(&self) -> Result<(), String> {
        let positive = [
            ("extent", self.extent),
            ("mean_distance", self.mean_distance),
            ("object_extent", self.object_extent),
        ];
        for (name, v) in positive {
            if !(v.is_finite() && v > 0.0) {
                return Err(format!("{name} must be positive"));
            }
        }
        if !(0.0..=1.0).contains(&self.structured_fraction) {
            return Err("structured_fraction must be in [0, 1]".into());
        }
        if !(0.0..=1.0).contains(&self.horizontal_fraction) {
            return Err("horizontal_fraction must be in [0, 1]".into());
        }
        if self.std_distance < 0.0 {
            return Err("std_distance must be non-negative".into());
        }
        Ok(())
    }
}

/// Ground-truth object in world coordinates.
#[derive(Clone, Debug, PartialEq)]
pub struct SceneObject {
    pub kind: Kind,
    /// Line direction or plane normal.
    pub axis: Vector3<f64>,
    /// Center of the object.
    pub center: Vector3<f64>,
    /// Seen by every scan regardless of overlap (the ground).
    pub persistent: bool,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Scene {
    pub objects: Vec<SceneObject>,
    pub object_extent: f64,
}

impl Scene {
    /// Mean and standard deviation of distances between object centers.
    pub fn pairwise_distance_stats(&self) -> (f64, f64) {
        let mut d = Vec::new();
        for (i, a) in self.objects.iter().enumerate() {
            for b in &self.objects[i + 1..] {
                d.push((a.center - b.center).norm());
            }
        }
        mean_std(&d)
    }
}

fn mean_std(x: &[f64]) -> (f64, f64) {
    if x.is_empty() {
        return (0.0, 0.0);
    }
    let n = x.len() as f64;
    let mean = x.iter().sum::<f64>() / n;
    let var = x.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / n;
    (mean, var.sqrt())
}

fn random_unit(rng: &mut ChaCha8Rng) -> Vector3<f64> {
    let z: f64 = rng.random_range(-1.0..=1.0);
    let phi = rng.random_range(0.0..std::f64::consts::TAU);
    let r = (1.0 - z * z).max(0.0).sqrt();
    Vector3::new(r * phi.cos(), r * phi.sin(), z)
}

/// Uniform direction inside a cone of half-angle `max` around +z.
fn cone(rng: &mut ChaCha8Rng, max: f64) -> Vector3<f64> {
    let z = rng.random_range(max.cos()..=1.0);
    let phi = rng.random_range(0.0..std::f64::consts::TAU);
    let r = (1.0 - z * z).max(0.0).sqrt();
    Vector3::new(r * phi.cos(), r * phi.sin(), z)
}

struct Generator<'a> {
    cfg: &'a SceneConfig,
    /// Dominant wall orientation of the scene.
    manhattan_yaw: f64,
    spread: Normal<f64>,
    jitter: Normal<f64>,
}

impl<'a> Generator<'a> {
    fn new(cfg: &'a SceneConfig, rng: &mut ChaCha8Rng) -> Self {
        // Horizontal positions ~ N(0, s²I₂): pairwise distances are then
        // Rayleigh with mean s·√π.
        let s = cfg.mean_distance / std::f64::consts::PI.sqrt();
        Self {
            cfg,
            manhattan_yaw: rng.random_range(0.0..std::f64::consts::FRAC_PI_2),
            spread: Normal::new(0.0, s).expect("positive spread"),
            jitter: Normal::new(0.0, 2f64.to_radians()).expect("positive jitter"),
        }
    }

    fn position(&self, rng: &mut ChaCha8Rng) -> Vector2<f64> {
        loop {
            let p = Vector2::new(self.spread.sample(rng), self.spread.sample(rng));
            if p.norm() <= self.cfg.extent {
                return p;
            }
        }
    }

    fn object(&self, kind: Kind, rng: &mut ChaCha8Rng) -> SceneObject {
        let structured = rng.random_bool(self.cfg.structured_fraction);
        let xy = self.position(rng);
        match kind {
            Kind::Line => {
                let axis = if structured {
                    cone(rng, 10f64.to_radians())
                } else {
                    random_unit(rng)
                };
                let z = rng.random_range(0.0..3.0);
                SceneObject {
                    kind,
                    axis,
                    center: Vector3::new(xy.x, xy.y, z),
                    persistent: false,
                }
            }
            Kind::Plane if structured && rng.random_bool(self.cfg.horizontal_fraction) => {
                let tilt = Vector3::new(self.jitter.sample(rng), self.jitter.sample(rng), 0.0);
                SceneObject {
                    kind,
                    axis: Rotation3::new(tilt) * Vector3::z(),
                    center: Vector3::new(xy.x, xy.y, rng.random_range(2.0..8.0)),
                    persistent: false,
                }
            }
            Kind::Plane => {
                let axis = if structured {
                    let k = rng.random_range(0..4) as f64;
                    let yaw = self.manhattan_yaw + k * std::f64::consts::FRAC_PI_2 + self.jitter.sample(rng);
                    let tilt: f64 = self.jitter.sample(rng);
                    Vector3::new(yaw.cos() * tilt.cos(), yaw.sin() * tilt.cos(), tilt.sin())
                } else {
                    random_unit(rng)
                };
                let z = rng.random_range(0.0..5.0);
                SceneObject {
                    kind,
                    axis,
                    center: Vector3::new(xy.x, xy.y, z),
                    persistent: false,
                }
            }
        }
    }

    fn clutter(&self, rng: &mut ChaCha8Rng) -> SceneObject {
        let total = self.cfg.lines + self.cfg.planes;
        let line_share = if total == 0 {
            0.5
        } else {
            self.cfg.lines as f64 / total as f64
        };
        let kind = if rng.random_bool(line_share) {
            Kind::Line
        } else {
            Kind::Plane
        };
        self.object(kind, rng)
    }
}

/// Generates a scene from `cfg.seed`.
pub fn generate_scene(cfg: &SceneConfig) -> Scene {
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    generate_scene_with(cfg, &mut rng)
}

fn generate_scene_with(cfg: &SceneConfig, rng: &mut ChaCha8Rng) -> Scene {
    let g = Generator::new(cfg, rng);
    let mut objects = Vec::with_capacity(cfg.lines + cfg.planes);
    for _ in 0..cfg.lines {
        objects.push(g.object(Kind::Line, rng));
    }
    for k in 0..cfg.planes {
        if k == 0 && cfg.ground {
            let xy = g.position(rng);
            objects.push(SceneObject {
                kind: Kind::Plane,
                axis: Vector3::z(),
                center: Vector3::new(xy.x, xy.y, 0.0),
                persistent: true,
            });
        } else {
            objects.push(g.object(Kind::Plane, rng));
        }
    }
    Scene {
        objects,
        object_extent: cfg.object_extent,
    }
}

struct Observer {
    angle: Normal<f64>,
    offset: Normal<f64>,
    half_extent: f64,
}

impl Observer {
    fn new(noise: &NoiseConfig, object_extent: f64) -> Self {
        // A zero standard deviation is a valid (degenerate) normal.
        Self {
            angle: Normal::new(0.0, noise.angle_deg.to_radians()).expect("finite noise"),
            offset: Normal::new(0.0, noise.offset_m).expect("finite noise"),
            half_extent: 0.5 * object_extent,
        }
    }

    fn vec3(&self, d: &Normal<f64>, rng: &mut ChaCha8Rng) -> Vector3<f64> {
        Vector3::new(d.sample(rng), d.sample(rng), d.sample(rng))
    }

    /// Observes `obj` (already in the sensor frame) with a freshly sampled
    /// centroid and noise.
    fn observe(&self, obj: &SceneObject, rng: &mut ChaCha8Rng) -> Landmark {
        let along = match obj.kind {
            Kind::Line => obj.axis * rng.random_range(-self.half_extent..=self.half_extent),
            Kind::Plane => {
                // Uniform point on a disk of the object's size within the plane.
                let (u, w) = in_plane_basis(&obj.axis);
                let r = self.half_extent * rng.random::<f64>().sqrt();
                let phi = rng.random_range(0.0..std::f64::consts::TAU);
                r * (phi.cos() * u + phi.sin() * w)
            }
        };
        let centroid = obj.center + along + self.vec3(&self.offset, rng);
        let axis = Rotation3::new(self.vec3(&self.angle, rng)) * obj.axis;
        let element = match obj.kind {
            Kind::Line => GraffElement::line(axis, centroid),
            Kind::Plane => GraffElement::plane(axis, axis.dot(&centroid)).map(|e| e.with_anchor(centroid)),
        }
        .expect("simulated axes are unit vectors");
        Landmark::new(element).with_centroid(centroid)
    }
}

fn in_plane_basis(n: &Vector3<f64>) -> (Vector3<f64>, Vector3<f64>) {
    let helper = if n.x.abs() < 0.9 { Vector3::x() } else { Vector3::y() };
    let u = n.cross(&helper).normalize();
    let w = n.cross(&u);
    (u, w)
}

fn transformed(obj: &SceneObject, t: &RigidTransform) -> SceneObject {
    SceneObject {
        kind: obj.kind,
        axis: t.transform_vector(&obj.axis),
        center: t.transform_point(&obj.center),
        persistent: obj.persistent,
    }
}

/// Two overlapping observations of a scene with known relative pose.
#[derive(Clone, Debug)]
pub struct LoopPair {
    pub scan_a: Scan,
    pub scan_b: Scan,
    /// Maps scan-a coordinates to scan-b coordinates.
    pub truth: RigidTransform,
    /// True correspondences `(index in a, index in b)`, sorted.
    pub correspondences: Vec<(usize, usize)>,
    /// Fewer than three shared objects: cannot be verified.
    pub degenerate: bool,
}

/// Relative pose of the second sensor, as a map from frame `a` to frame `b`.
fn relative_pose(pcfg: &PairConfig, rng: &mut ChaCha8Rng) -> RigidTransform {
    let sym = |rng: &mut ChaCha8Rng, deg: f64| {
        if deg > 0.0 {
            rng.random_range(-deg..=deg).to_radians()
        } else {
            0.0
        }
    };
    let yaw = sym(rng, pcfg.yaw_range_deg);
    let roll = sym(rng, pcfg.tilt_range_deg);
    let pitch = sym(rng, pcfg.tilt_range_deg);
    let heading = rng.random_range(0.0..std::f64::consts::TAU);
    let position = pcfg.baseline * Vector3::new(heading.cos(), heading.sin(), 0.0);
    let pose = RigidTransform::new(Rotation3::from_euler_angles(roll, pitch, yaw), position);
    pose.inverse()
}

/// Builds a loop pair from `scene`; all randomness comes from `seed`.
pub fn make_loop_pair(scene: &Scene, pcfg: &PairConfig, seed: u64) -> LoopPair {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    make_loop_pair_with(scene, pcfg, &SceneConfig::default(), &mut rng)
}

fn make_loop_pair_with(
    scene: &Scene,
    pcfg: &PairConfig,
    scfg: &SceneConfig,
    rng: &mut ChaCha8Rng,
) -> LoopPair {
    let truth = relative_pose(pcfg, rng);
    let observer = Observer::new(&pcfg.noise, scene.object_extent);
    let clutter_source = Generator::new(scfg, rng);

    let n = scene.objects.len();
    let mut scan_a = Scan::new("a");
    for obj in &scene.objects {
        scan_a.push(observer.observe(obj, rng));
    }
    for _ in 0..pcfg.clutter {
        let c = clutter_source.clutter(rng);
        scan_a.push(observer.observe(&c, rng));
    }

    let keep = ((pcfg.overlap * n as f64).round() as usize).min(n);
    let (persistent, optional): (Vec<usize>, Vec<usize>) = (0..n).partition(|&i| scene.objects[i].persistent);
    let drawn = keep.saturating_sub(persistent.len()).min(optional.len());
    let mut retained: Vec<usize> = rand::seq::index::sample(rng, optional.len(), drawn)
        .into_iter()
        .map(|k| optional[k])
        .chain(persistent)
        .collect();
    retained.sort_unstable();
    // (scene index or None for clutter, landmark)
    let mut observed_b: Vec<(Option<usize>, Landmark)> = retained
        .iter()
        .map(|&i| (Some(i), observer.observe(&transformed(&scene.objects[i], &truth), rng)))
        .collect();
    for _ in 0..pcfg.clutter {
        let c = clutter_source.clutter(rng);
        observed_b.push((None, observer.observe(&transformed(&c, &truth), rng)));
    }
    observed_b.shuffle(rng);

    let mut scan_b = Scan::new("b");
    let mut correspondences = Vec::new();
    for (j, (source, landmark)) in observed_b.into_iter().enumerate() {
        if let Some(i) = source {
            correspondences.push((i, j));
        }
        scan_b.push(landmark);
    }
    correspondences.sort_unstable();
    LoopPair {
        degenerate: correspondences.len() < 3,
        scan_a,
        scan_b,
        truth,
        correspondences,
    }
}

/// One difficulty level of a campaign.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Tier {
    pub name: String,
    pub baseline: f64,
    pub overlap: f64,
}

impl Tier {
    pub fn standard() -> Vec<Tier> {
        [("easy", 0.0, 0.9), ("medium", 8.0, 0.7), ("hard", 16.0, 0.5)]
            .into_iter()
            .map(|(name, baseline, overlap)| Tier {
                name: name.into(),
                baseline,
                overlap,
            })
            .collect()
    }
}

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Seed of trial `trial` in tier `tier` of a campaign seeded with `seed`.
pub fn trial_seed(seed: u64, tier: usize, trial: usize) -> u64 {
    splitmix64(splitmix64(splitmix64(seed) ^ tier as u64) ^ trial as u64)
}

/// Scene and loop pair of one campaign trial. The same pair is used for every
/// distance function so that comparisons are paired.
pub fn campaign_pair(scene: &SceneConfig, base: &PairConfig, tier: &Tier, seed: u64) -> LoopPair {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let generated = generate_scene_with(scene, &mut rng);
    let pcfg = PairConfig {
        baseline: tier.baseline,
        overlap: tier.overlap,
        ..base.clone()
    };
    make_loop_pair_with(&generated, &pcfg, scene, &mut rng)
}

#[derive(Clone, Debug, PartialEq)]
pub struct TrialResult {
    pub seed: u64,
    pub tier: String,
    pub trial: usize,
    pub distance_fn: DistanceFunctionId,
    /// Number of candidate correspondences.
    pub m: usize,
    /// Correspondences selected by the solver.
    pub matches: usize,
    /// Selected correspondences that are true.
    pub inliers_found: usize,
    pub objective: f64,
    pub precision: f64,
    pub recall: f64,
    /// `None` when no transform could be estimated.
    pub error: Option<AlignmentError>,
    pub accept: bool,
    pub duration_s: f64,
}

impl TrialResult {
    /// A transform was produced, i.e. the pipeline claims a loop closure.
    pub fn claimed(&self) -> bool {
        self.error.is_some()
    }
}

/// Runs the full pipeline on `pair` and scores it against ground truth.
pub fn run_trial(
    pair: &LoopPair,
    params: &MatchParams,
    thresholds: &Thresholds,
) -> Result<TrialResult, graffmatch_core::Error> {
    let start = Instant::now();
    let outcome = match_scans(&pair.scan_a, &pair.scan_b, params)?;
    let duration_s = start.elapsed().as_secs_f64();

    let inliers_found = outcome
        .correspondences
        .iter()
        .filter(|c| pair.correspondences.binary_search(c).is_ok())
        .count();
    let ratio = |num: usize, den: usize| if den == 0 { 0.0 } else { num as f64 / den as f64 };
    let error = outcome
        .transform
        .as_ref()
        .ok()
        .map(|t| alignment_error(t, &pair.truth));
    Ok(TrialResult {
        seed: 0,
        tier: String::new(),
        trial: 0,
        distance_fn: params.distance_fn,
        m: outcome.candidates.len(),
        matches: outcome.correspondences.len(),
        inliers_found,
        objective: outcome.objective(),
        precision: ratio(inliers_found, outcome.correspondences.len()),
        recall: ratio(inliers_found, pair.correspondences.len()),
        accept: error.is_some_and(|e| e.verify(thresholds)),
        error,
        duration_s,
    })
}

/// Largest fraction of trials that can be accepted, ranking claims by solver
/// objective, before the first wrong claim. Trials with equal objective
/// are admitted or rejected together.
pub fn recall_at_full_precision(results: &[TrialResult]) -> f64 {
    if results.is_empty() {
        return 0.0;
    }
    let mut claimed: Vec<&TrialResult> = results.iter().filter(|r| r.claimed()).collect();
    claimed.sort_by(|a, b| b.objective.total_cmp(&a.objective));
    let mut true_positives = 0;
    let mut i = 0;
    while i < claimed.len() {
        let mut j = i;
        while j < claimed.len() && claimed[j].objective == claimed[i].objective {
            j += 1;
        }
        let group = &claimed[i..j];
        if group.iter().any(|r| !r.accept) {
            break;
        }
        true_positives += group.len();
        i = j;
    }
    true_positives as f64 / results.len() as f64
}

fn median(mut x: Vec<f64>) -> Option<f64> {
    if x.is_empty() {
        return None;
    }
    x.sort_by(f64::total_cmp);
    let n = x.len();
    Some(if n % 2 == 1 {
        x[n / 2]
    } else {
        0.5 * (x[n / 2 - 1] + x[n / 2])
    })
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Summary {
    pub trials: usize,
    pub claimed: usize,
    pub accepted: usize,
    pub recall_at_100p: f64,
    pub mean_precision: f64,
    pub mean_recall: f64,
    /// Over accepted trials.
    pub median_rot_err_deg: Option<f64>,
    pub median_trans_err_m: Option<f64>,
    pub duration_mean_s: f64,
    pub duration_std_s: f64,
}

pub fn compute_metrics(results: &[TrialResult]) -> Result<Summary, String> {
    if results.is_empty() {
        return Err("no trial results to summarize".into());
    }
    let n = results.len() as f64;
    let accepted: Vec<&AlignmentError> = results
        .iter()
        .filter(|r| r.accept)
        .filter_map(|r| r.error.as_ref())
        .collect();
    let durations: Vec<f64> = results.iter().map(|r| r.duration_s).collect();
    let (duration_mean_s, duration_std_s) = mean_std(&durations);
    Ok(Summary {
        trials: results.len(),
        claimed: results.iter().filter(|r| r.claimed()).count(),
        accepted: accepted.len(),
        recall_at_100p: recall_at_full_precision(results),
        mean_precision: results.iter().map(|r| r.precision).sum::<f64>() / n,
        mean_recall: results.iter().map(|r| r.recall).sum::<f64>() / n,
        median_rot_err_deg: median(accepted.iter().map(|e| e.rotation_deg).collect()),
        median_trans_err_m: median(accepted.iter().map(|e| e.translation_m).collect()),
        duration_mean_s,
        duration_std_s,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn result(objective: f64, claimed: bool, accept: bool) -> TrialResult {
        TrialResult {
            seed: 0,
            tier: "t".into(),
            trial: 0,
            distance_fn: DistanceFunctionId::GraffShifted,
            m: 10,
            matches: 5,
            inliers_found: 5,
            objective,
            precision: 1.0,
            recall: 1.0,
            error: claimed.then_some(AlignmentError {
                rotation_deg: if accept { 0.1 } else { 30.0 },
                translation_m: 0.1,
            }),
            accept,
            duration_s: 0.0,
        }
    }

    /// Exhaustive threshold sweep: the reference definition.
    fn sweep(results: &[TrialResult]) -> f64 {
        let mut best: f64 = 0.0;
        let mut thresholds: Vec<f64> = results.iter().map(|r| r.objective).collect();
        thresholds.push(f64::INFINITY);
        for tau in thresholds {
            let claimed: Vec<_> = results.iter().filter(|r| r.claimed() && r.objective >= tau).collect();
            if claimed.iter().all(|r| r.accept) {
                best = best.max(claimed.len() as f64 / results.len() as f64);
            }
        }
        best
    }

    #[test]
    fn recall_examples() {
        let all_good: Vec<_> = (0..4).map(|i| result(i as f64, true, true)).collect();
        assert_eq!(recall_at_full_precision(&all_good), 1.0);
        let mut top_wrong = all_good.clone();
        top_wrong.push(result(10.0, true, false));
        assert_eq!(recall_at_full_precision(&top_wrong), 0.0);
        let mixed = vec![
            result(9.0, true, true),
            result(8.0, true, true),
            result(7.0, true, false),
            result(6.0, true, true),
            result(5.0, false, false),
        ];
        assert_eq!(recall_at_full_precision(&mixed), 0.4);
        // A wrong claim tied with a correct one blocks both.
        let tied = vec![result(9.0, true, true), result(8.0, true, true), result(8.0, true, false)];
        assert!((recall_at_full_precision(&tied) - 1.0 / 3.0).abs() < 1e-15);
    }

    #[test]
    fn recall_matches_threshold_sweep() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for _ in 0..500 {
            let n = rng.random_range(1..30);
            let results: Vec<_> = (0..n)
                .map(|_| {
                    let claimed = rng.random_bool(0.8);
                    result(
                        rng.random_range(0..8) as f64,
                        claimed,
                        claimed && rng.random_bool(0.8),
                    )
                })
                .collect();
            assert_eq!(recall_at_full_precision(&results), sweep(&results));
        }
    }

    #[test]
    fn scenes_are_deterministic_and_calibrated() {
        let cfg = SceneConfig {
            seed: 42,
            ..Default::default()
        };
        assert_eq!(generate_scene(&cfg), generate_scene(&cfg));
        let mut all = Vec::new();
        for seed in 0..50 {
            let scene = generate_scene(&SceneConfig { seed, ..cfg.clone() });
            assert_eq!(scene.objects.len(), 30);
            for (i, a) in scene.objects.iter().enumerate() {
                for b in &scene.objects[i + 1..] {
                    all.push((a.center - b.center).norm());
                }
            }
        }
        let (mean, _) = mean_std(&all);
        assert!((21.6..=32.4).contains(&mean), "mean pairwise distance {mean}");
    }

    #[test]
    fn noise_free_pair_is_recovered_exactly() {
        let scene = generate_scene(&SceneConfig {
            seed: 5,
            ..Default::default()
        });
        let pcfg = PairConfig {
            baseline: 10.0,
            overlap: 1.0,
            clutter: 0,
            noise: NoiseConfig {
                angle_deg: 0.0,
                offset_m: 0.0,
            },
            ..Default::default()
        };
        for seed in 0..5 {
            let pair = make_loop_pair(&scene, &pcfg, seed);
            assert_eq!(pair.correspondences.len(), 30);
            let r = run_trial(&pair, &MatchParams::default(), &Thresholds::default()).unwrap();
            let e = r.error.unwrap();
            assert!(r.accept);
            assert_eq!(r.precision, 1.0);
            assert_eq!(r.recall, 1.0);
            assert!(e.rotation_deg.to_radians() < 1e-8 && e.translation_m < 1e-8, "{e:?}");
        }
    }

    #[test]
    fn truth_maps_shared_objects() {
        let scene = generate_scene(&SceneConfig::default());
        let pcfg = PairConfig {
            baseline: 16.0,
            overlap: 0.5,
            noise: NoiseConfig {
                angle_deg: 0.0,
                offset_m: 0.0,
            },
            ..Default::default()
        };
        let pair = make_loop_pair(&scene, &pcfg, 9);
        assert_eq!(pair.correspondences.len(), 15);
        assert_eq!(pair.scan_b.len(), 20);
        assert!((pair.truth.translation().norm() - 16.0).abs() < 1e-9);
        for &(i, j) in &pair.correspondences {
            let a = pair.scan_a.landmarks()[i].element.transformed(&pair.truth);
            let b = &pair.scan_b.landmarks()[j].element;
            assert!((a.axis().cross(&b.axis())).norm() < 1e-9);
        }
    }
}
