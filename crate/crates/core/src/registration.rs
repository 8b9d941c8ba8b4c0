//! Closed-form rigid registration from matched lines and planes.
//!
//! Rotation: weighted Kabsch on line directions and plane normals. Both are
//! only defined up to sign, so a seed pair of non-parallel axes is tried under
//! all four sign hypotheses and the remaining signs follow from the seed
//! rotation; the hypothesis with the smallest total residual wins.
//!
//! Translation: linear least squares. A plane pair gives one equation along
//! the target normal, a line pair gives two equations orthogonal to the target
//! direction.

use alloc::vec;
use alloc::vec::Vec;

use nalgebra::{Matrix3, Rotation3, SymmetricEigen, Vector3};

use crate::error::{Error, Result};
use crate::graff::{GraffElement, Kind, LinePD, PlaneHesse};
use crate::transform::{rotation_angle, RigidTransform};

pub const MIN_MATCHES: usize = 3;

/// Axes closer to parallel than this cannot fix a rotation.
const PARALLEL_TOL: f64 = 1e-6;
/// Smallest admissible eigenvalue ratio of the translation normal equations.
const CONDITION_TOL: f64 = 1e-10;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct LineMatch {
    pub source: LinePD,
    pub target: LinePD,
    pub weight: f64,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct PlaneMatch {
    pub source: PlaneHesse,
    pub target: PlaneHesse,
    pub weight: f64,
}

/// Correspondences `source ↦ target`; the estimated transform maps source
/// coordinates into the target frame.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct MatchSet {
    pub lines: Vec<LineMatch>,
    pub planes: Vec<PlaneMatch>,
}

impl MatchSet {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn push_line(&mut self, source: LinePD, target: LinePD, weight: f64) {
        self.lines.push(LineMatch {
            source,
            target,
            weight,
        });
    }

    pub fn push_plane(&mut self, source: PlaneHesse, target: PlaneHesse, weight: f64) {
        self.planes.push(PlaneMatch {
            source,
            target,
            weight,
        });
    }

    pub fn push(&mut self, source: &GraffElement, target: &GraffElement, weight: f64) -> Result<()> {
        if !(weight.is_finite() && weight > 0.0) {
            return Err(Error::InvalidParameter("match weight must be positive"));
        }
        match (source.kind(), target.kind()) {
            (Kind::Line, Kind::Line) => self.push_line(source.to_pd()?, target.to_pd()?, weight),
            (Kind::Plane, Kind::Plane) => {
                self.push_plane(source.to_hesse()?, target.to_hesse()?, weight)
            }
            _ => return Err(Error::InvalidInput("matched objects must be of the same kind")),
        }
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.lines.len() + self.planes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// `(weight, source axis, target axis)` for every match.
    fn axes(&self) -> Vec<(f64, Vector3<f64>, Vector3<f64>)> {
        let lines = self
            .lines
            .iter()
            .map(|m| (m.weight, *m.source.direction(), *m.target.direction()));
        let planes = self
            .planes
            .iter()
            .map(|m| (m.weight, *m.source.normal(), *m.target.normal()));
        lines.chain(planes).collect()
    }
}

/// Rotation maximizing `Σ wᵢ tᵢᵀ R vᵢ`.
fn kabsch<'a>(pairs: impl Iterator<Item = (f64, &'a Vector3<f64>, Vector3<f64>)>) -> Matrix3<f64> {
    let mut h = Matrix3::zeros();
    for (w, v, t) in pairs {
        h += w * t * v.transpose();
    }
    let svd = h.svd(true, true);
    let (u, v_t) = match (svd.u, svd.v_t) {
        (Some(u), Some(v_t)) => (u, v_t),
        _ => return Matrix3::identity(),
    };
    let det = (u * v_t).determinant();
    let d = Matrix3::from_diagonal(&Vector3::new(1.0, 1.0, if det < 0.0 { -1.0 } else { 1.0 }));
    u * d * v_t
}

fn sign(x: f64) -> f64 {
    if x < 0.0 {
        -1.0
    } else {
        1.0
    }
}

struct Hypothesis {
    transform: RigidTransform,
    residual: f64,
    flips: usize,
}

impl Hypothesis {
    /// Lower residual wins. Residuals equal to within `tie` (e.g. three planes,
    /// which several sign choices fit exactly) go to the hypothesis that keeps
    /// more axes in their stored orientation.
    fn beats(&self, other: &Hypothesis, tie: f64) -> bool {
        if (self.residual - other.residual).abs() <= tie {
            self.flips < other.flips
        } else {
            self.residual < other.residual
        }
    }
}

fn solve_translation(matches: &MatchSet, r: &Matrix3<f64>, signs: &[f64]) -> Result<(Vector3<f64>, f64)> {
    let mut a = Matrix3::zeros();
    let mut rhs = Vector3::zeros();
    let plane_signs = &signs[matches.lines.len()..];
    // Normal-equation blocks, kept so the residual can be evaluated afterwards.
    let mut line_rows = Vec::with_capacity(matches.lines.len());
    for m in &matches.lines {
        let dir = m.target.direction();
        let proj = Matrix3::identity() - dir * dir.transpose();
        let offset = m.target.point() - r * m.source.point();
        a += m.weight * proj;
        rhs += m.weight * (proj * offset);
        line_rows.push((m.weight, proj, offset));
    }
    let mut plane_rows = Vec::with_capacity(matches.planes.len());
    for (m, &s) in matches.planes.iter().zip(plane_signs) {
        let n = s * m.target.normal();
        let b = s * m.target.offset() - m.source.offset();
        a += m.weight * n * n.transpose();
        rhs += m.weight * b * n;
        plane_rows.push((m.weight, n, b));
    }

    let eig = SymmetricEigen::new(a);
    let max = eig.eigenvalues.max();
    let min = eig.eigenvalues.min();
    if !(max > 0.0) || min / max < CONDITION_TOL {
        return Err(Error::DegenerateConfiguration("matches do not constrain the translation"));
    }
    let mut inv = Matrix3::zeros();
    for k in 0..3 {
        let q = eig.eigenvectors.column(k);
        inv += (q * q.transpose()) / eig.eigenvalues[k];
    }
    let t = inv * rhs;
    let residual = line_rows
        .iter()
        .map(|(w, p, o)| w * (p * (t - o)).norm_squared())
        .chain(plane_rows.iter().map(|(w, n, b)| {
            let e = n.dot(&t) - b;
            w * e * e
        }))
        .sum();
    Ok((t, residual))
}

/// Estimates `T` with `target ≈ T(source)` from at least three matches.
pub fn estimate_transform(matches: &MatchSet) -> Result<RigidTransform> {
    if matches.len() < MIN_MATCHES {
        return Err(Error::TooFewMatches {
            found: matches.len(),
            required: MIN_MATCHES,
        });
    }
    if matches
        .lines
        .iter()
        .map(|m| m.weight)
        .chain(matches.planes.iter().map(|m| m.weight))
        .any(|w| !(w.is_finite() && w > 0.0))
    {
        return Err(Error::InvalidParameter("match weight must be positive"));
    }
    let axes = matches.axes();

    // Least parallel pair of source axes seeds the sign search.
    let mut seed = (0, 0);
    let mut best = 0.0;
    for i in 0..axes.len() {
        for j in i + 1..axes.len() {
            let c = axes[i].1.cross(&axes[j].1).norm();
            if c > best {
                best = c;
                seed = (i, j);
            }
        }
    }
    if best < PARALLEL_TOL {
        return Err(Error::DegenerateConfiguration("all matched axes are parallel"));
    }

    let total_weight: f64 = axes.iter().map(|a| a.0).sum();
    let tie = 1e-12 * total_weight;
    let (i, j) = seed;
    let mut winner: Option<Hypothesis> = None;
    let mut last_err = None;
    for (si, sj) in [(1.0, 1.0), (1.0, -1.0), (-1.0, 1.0), (-1.0, -1.0)] {
        let (vi, vj) = (axes[i].1, axes[j].1);
        let (ti, tj) = (si * axes[i].2, sj * axes[j].2);
        let vk = vi.cross(&vj);
        let tk = ti.cross(&tj);
        let seed_pairs = [(1.0, &vi, ti), (1.0, &vj, tj), (1.0, &vk, tk)];
        let r_seed = kabsch(seed_pairs.iter().copied());

        let signs: Vec<f64> = axes.iter().map(|(_, v, t)| sign(t.dot(&(r_seed * v)))).collect();
        let r = kabsch(axes.iter().zip(&signs).map(|((w, v, t), s)| (*w, v, *s * t)));
        let rot_residual: f64 = axes
            .iter()
            .zip(&signs)
            .map(|((w, v, t), s)| w * (*s * t - r * v).norm_squared())
            .sum();
        match solve_translation(matches, &r, &signs) {
            Ok((t, trans_residual)) => {
                let candidate = Hypothesis {
                    transform: RigidTransform::new(Rotation3::from_matrix_unchecked(r), t),
                    residual: rot_residual + trans_residual,
                    flips: signs.iter().filter(|&&s| s < 0.0).count(),
                };
                if winner.as_ref().is_none_or(|h| candidate.beats(h, tie)) {
                    winner = Some(candidate);
                }
            }
            Err(e) => last_err = Some(e),
        }
    }
    match (winner, last_err) {
        (Some(h), _) => Ok(h.transform),
        (None, Some(e)) => Err(e),
        (None, None) => Err(Error::DegenerateConfiguration("no admissible sign hypothesis")),
    }
}

/// Outlier trimming for [`estimate_transform_trimmed`].
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct TrimParams {
    /// Residuals are compared against this many robust standard deviations.
    pub scale_factor: f64,
    /// Offset residuals below this are never trimmed (m).
    pub min_offset_m: f64,
    /// Axis residuals below this are never trimmed (deg).
    pub min_angle_deg: f64,
    /// A fit that moves further than this when any one (or, with
    /// `leave_out = 2`, any two) kept matches are dropped is rejected as degenerate (m); `None` skips the
    /// check.
    pub max_influence_m: Option<f64>,
    /// Rotational counterpart of `max_influence_m` (deg).
    pub max_influence_deg: f64,
    /// Largest group of matches the influence check drops at once: 1 or 2.
    pub leave_out: usize,
}

impl Default for TrimParams {
    fn default() -> Self {
        Self {
            scale_factor: 3.0,
            min_offset_m: 0.5,
            min_angle_deg: 3.0,
            max_influence_m: Some(0.5),
            max_influence_deg: 2.0,
            leave_out: 2,
        }
    }
}

/// Result of a trimmed fit; the masks follow `MatchSet::lines`/`planes`.
#[derive(Clone, Debug, PartialEq)]
pub struct TrimmedFit {
    pub transform: RigidTransform,
    pub kept_lines: Vec<bool>,
    pub kept_planes: Vec<bool>,
}

impl TrimmedFit {
    pub fn trimmed(&self) -> usize {
        self.kept_lines.iter().chain(&self.kept_planes).filter(|k| !**k).count()
    }
}

/// Misfit of a matched pair under a transform: how far the mapped source
/// lies from the target, and the angle between their axes (sign-free).
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Residual {
    /// Line: distance of the mapped source point from the target line.
    /// Plane: distance of the mapped foot point from the target plane (m).
    pub offset_m: f64,
    pub angle_deg: f64,
}

fn axis_angle_deg(v: Vector3<f64>, w: &Vector3<f64>) -> f64 {
    libm::acos(v.dot(w).abs().min(1.0)).to_degrees()
}

fn line_residual(source: &LinePD, target: &LinePD, t: &RigidTransform) -> Residual {
    let d = target.direction();
    let gap = t.transform_point(source.point()) - target.point();
    Residual {
        offset_m: (gap - d * d.dot(&gap)).norm(),
        angle_deg: axis_angle_deg(t.transform_vector(source.direction()), d),
    }
}

fn plane_residual(source: &PlaneHesse, target: &PlaneHesse, t: &RigidTransform) -> Residual {
    let n = target.normal();
    let foot = source.normal() * source.offset();
    Residual {
        offset_m: (n.dot(&t.transform_point(&foot)) - target.offset()).abs(),
        angle_deg: axis_angle_deg(t.transform_vector(source.normal()), n),
    }
}

/// Residual of `target ≈ t(source)` for two elements of the same kind.
pub fn residual(source: &GraffElement, target: &GraffElement, t: &RigidTransform) -> Result<Residual> {
    match (source.kind(), target.kind()) {
        (Kind::Line, Kind::Line) => Ok(line_residual(&source.to_pd()?, &target.to_pd()?, t)),
        (Kind::Plane, Kind::Plane) => Ok(plane_residual(&source.to_hesse()?, &target.to_hesse()?, t)),
        _ => Err(Error::InvalidInput("matched objects must be of the same kind")),
    }
}

/// Residuals of every match under `t`, lines first.
fn residuals(matches: &MatchSet, t: &RigidTransform) -> Vec<(f64, f64)> {
    let lines = matches.lines.iter().map(|m| line_residual(&m.source, &m.target, t));
    let planes = matches.planes.iter().map(|m| plane_residual(&m.source, &m.target, t));
    lines.chain(planes).map(|r| (r.offset_m, r.angle_deg)).collect()
}

fn median(mut v: Vec<f64>) -> f64 {
    v.sort_by(f64::total_cmp);
    let n = v.len();
    if n % 2 == 1 {
        v[n / 2]
    } else {
        0.5 * (v[n / 2 - 1] + v[n / 2])
    }
}

/// [`estimate_transform`] followed by repeated removal of the worst match
/// while its residual exceeds the robust threshold. Trimming stops at
/// [`MIN_MATCHES`] or when a removal would leave a degenerate set. The final
/// fit must survive leaving out any one or two of its matches (see
/// [`TrimParams::max_influence_m`]): outliers that alone pin a direction
/// have no residual to give them away.
pub fn estimate_transform_trimmed(matches: &MatchSet, params: &TrimParams) -> Result<TrimmedFit> {
    if !(params.scale_factor > 0.0
        && params.min_offset_m >= 0.0
        && params.min_angle_deg >= 0.0
        && params.max_influence_deg >= 0.0
        && (1..=2).contains(&params.leave_out)
        && params.max_influence_m.is_none_or(|m| m >= 0.0))
    {
        return Err(Error::InvalidParameter("invalid trim parameters"));
    }
    let mut current = matches.clone();
    let mut index: Vec<usize> = (0..matches.len()).collect();
    let mut transform = estimate_transform(&current)?;
    while current.len() > MIN_MATCHES {
        let res = residuals(&current, &transform);
        // 1.4826 turns a median absolute residual into a Gaussian sigma.
        let off_tol = (params.scale_factor * 1.4826 * median(res.iter().map(|r| r.0).collect()))
            .max(params.min_offset_m);
        let ang_tol = (params.scale_factor * 1.4826 * median(res.iter().map(|r| r.1).collect()))
            .max(params.min_angle_deg);
        let (worst, score) = res
            .iter()
            .map(|(o, a)| (o / off_tol).max(a / ang_tol))
            .enumerate()
            .fold((0, 0.0), |best, (i, s)| if s > best.1 { (i, s) } else { best });
        if score <= 1.0 {
            break;
        }
        let mut next = current.clone();
        if worst < next.lines.len() {
            next.lines.remove(worst);
        } else {
            next.planes.remove(worst - current.lines.len());
        }
        match estimate_transform(&next) {
            Ok(t) => {
                transform = t;
                current = next;
                index.remove(worst);
            }
            Err(_) => break,
        }
    }
    if let Some(limit) = params.max_influence_m {
        let stable = |dropped: &[usize]| {
            let mut without = MatchSet::new();
            let n_lines = current.lines.len();
            for (k, m) in current.lines.iter().enumerate() {
                if !dropped.contains(&k) {
                    without.lines.push(*m);
                }
            }
            for (k, m) in current.planes.iter().enumerate() {
                if !dropped.contains(&(n_lines + k)) {
                    without.planes.push(*m);
                }
            }
            estimate_transform(&without).is_ok_and(|t| {
                let e = alignment_error(&t, &transform);
                e.translation_m <= limit && e.rotation_deg <= params.max_influence_deg
            })
        };
        let n = current.len();
        for i in 0..n {
            if !stable(&[i]) {
                return Err(Error::DegenerateConfiguration("estimate hinges on a single match"));
            }
            if params.leave_out >= 2 {
                for j in i + 1..n {
                    if !stable(&[i, j]) {
                        return Err(Error::DegenerateConfiguration("estimate hinges on two matches"));
                    }
                }
            }
        }
    }
    let mut kept = vec![false; matches.len()];
    for i in index {
        kept[i] = true;
    }
    let kept_planes = kept.split_off(matches.lines.len());
    Ok(TrimmedFit {
        transform,
        kept_lines: kept,
        kept_planes,
    })
}

/// Rotation and translation discrepancy between two transforms.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct AlignmentError {
    pub rotation_deg: f64,
    pub translation_m: f64,
}

pub fn alignment_error(estimate: &RigidTransform, truth: &RigidTransform) -> AlignmentError {
    let delta = estimate.rotation_matrix().transpose() * truth.rotation_matrix();
    AlignmentError {
        rotation_deg: rotation_angle(&delta).to_degrees(),
        translation_m: (estimate.translation() - truth.translation()).norm(),
    }
}

/// Acceptance thresholds for a registration result.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Thresholds {
    pub rotation_deg: f64,
    pub translation_m: f64,
}

impl Default for Thresholds {
    fn default() -> Self {
        Self {
            rotation_deg: 5.0,
            translation_m: 1.0,
        }
    }
}

impl AlignmentError {
    /// Strictly below both thresholds.
    pub fn verify(&self, thresholds: &Thresholds) -> bool {
        self.rotation_deg < thresholds.rotation_deg && self.translation_m < thresholds.translation_m
    }
}
