//! Scan-to-scan matching: candidates → consistency graph → densest subset →
//! closed-form registration.

use std::fmt;
use std::str::FromStr;

use graffmatch_core::consistency::build_affinity_with;
use graffmatch_core::consistency::metric::{
    AxisDot, CentroidDistance, GrassmannCentroid, Kernel, LinearGrassmann, PairwiseMetric,
    ShiftedGraff,
};
use graffmatch_core::{
    estimate_transform, estimate_transform_trimmed, solve_densest, AffinityMatrix, Candidate,
    ConsistencyParams, Error, Kind, MatchSet, RigidTransform, Scan, Selection, SolverParams,
    TrimParams,
};
use serde::{Deserialize, Serialize};

/// Pairwise distance used to build the consistency graph.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DistanceFunctionId {
    /// Shifted affine Grassmannian distance.
    GraffShifted,
    /// Principal angles between direction subspaces; positions ignored.
    GrOnly,
    /// Distance between object centroids.
    EuclideanCentroid,
    /// Direction-subspace angle and centroid distance, product kernel.
    GrTimesEuclidean,
    /// `|aᵀa'|` of line directions / plane normals.
    NormalDotDirection,
}

impl DistanceFunctionId {
    pub const ALL: [DistanceFunctionId; 5] = [
        DistanceFunctionId::GraffShifted,
        DistanceFunctionId::GrOnly,
        DistanceFunctionId::EuclideanCentroid,
        DistanceFunctionId::GrTimesEuclidean,
        DistanceFunctionId::NormalDotDirection,
    ];

    pub fn name(self) -> &'static str {
        match self {
            DistanceFunctionId::GraffShifted => "graff_shifted",
            DistanceFunctionId::GrOnly => "gr_only",
            DistanceFunctionId::EuclideanCentroid => "euclidean_centroid",
            DistanceFunctionId::GrTimesEuclidean => "gr_times_euclidean",
            DistanceFunctionId::NormalDotDirection => "normal_dot_direction",
        }
    }
}

impl fmt::Display for DistanceFunctionId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.pad(self.name())
    }
}

impl FromStr for DistanceFunctionId {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Self::ALL
            .into_iter()
            .find(|d| d.name() == s)
            .ok_or_else(|| {
                let names: Vec<_> = Self::ALL.iter().map(|d| d.name()).collect();
                format!("unknown distance function {s:?} (expected one of {})", names.join(", "))
            })
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct MatchParams {
    pub consistency: ConsistencyParams,
    pub distance_fn: DistanceFunctionId,
    pub solver: SolverParams,
    /// Residual-based removal of selected matches before the final fit;
    /// `None` registers from the whole selection.
    pub trim: Option<TrimParams>,
}

impl Default for MatchParams {
    fn default() -> Self {
        Self {
            consistency: ConsistencyParams::default(),
            distance_fn: DistanceFunctionId::GraffShifted,
            solver: SolverParams::default(),
            trim: Some(TrimParams::default()),
        }
    }
}

/// Everything produced by one matching attempt.
#[derive(Clone, Debug)]
pub struct MatchOutcome {
    pub candidates: Vec<Candidate>,
    pub affinity: AffinityMatrix,
    pub selection: Selection,
    /// Selected correspondences as `(index in scan a, index in scan b)`.
    pub correspondences: Vec<(usize, usize)>,
    /// Parallel to `correspondences`: whether the match survived trimming
    /// and took part in the final fit.
    pub kept: Vec<bool>,
    /// Transform taking scan-a coordinates to scan-b coordinates, or why it
    /// could not be estimated.
    pub transform: Result<RigidTransform, Error>,
}

impl MatchOutcome {
    pub fn objective(&self) -> f64 {
        self.selection.objective
    }
}

fn affinity(
    a: &Scan,
    b: &Scan,
    params: &MatchParams,
) -> Result<(AffinityMatrix, Vec<Candidate>), Error> {
    fn with<M: PairwiseMetric>(
        a: &Scan,
        b: &Scan,
        m: M,
        cap: Option<usize>,
    ) -> Result<(AffinityMatrix, Vec<Candidate>), Error> {
        build_affinity_with(a, b, &m, cap)
    }
    let c = &params.consistency;
    let kernel = c.kernel()?;
    // Centroid kernels work in meters: the angular gate and width scaled by ρ.
    let range = Kernel::new(c.rho.get() * c.epsilon, c.rho.get() * c.sigma)?;
    let cap = c.max_candidates;
    match params.distance_fn {
        DistanceFunctionId::GraffShifted => with(a, b, ShiftedGraff { rho: c.rho, kernel }, cap),
        DistanceFunctionId::GrOnly => with(a, b, LinearGrassmann { kernel }, cap),
        DistanceFunctionId::EuclideanCentroid => with(a, b, CentroidDistance { kernel: range }, cap),
        DistanceFunctionId::GrTimesEuclidean => with(
            a,
            b,
            GrassmannCentroid {
                angle: kernel,
                range,
            },
            cap,
        ),
        DistanceFunctionId::NormalDotDirection => with(a, b, AxisDot { kernel }, cap),
    }
}

/// Matches scan `a` against scan `b`. Input errors (bad parameters, missing
/// centroids for centroid-based distances) are returned as `Err`; failure to
/// register is reported inside the outcome.
pub fn match_scans(a: &Scan, b: &Scan, params: &MatchParams) -> Result<MatchOutcome, Error> {
    let (affinity, candidates) = affinity(a, b, params)?;
    let selection = solve_densest(&affinity, &params.solver)?;
    let correspondences: Vec<(usize, usize)> = selection
        .indices
        .iter()
        .map(|&i| (candidates[i].a, candidates[i].b))
        .collect();
    let mut matches = MatchSet::new();
    for &(i, j) in &correspondences {
        matches.push(&a.landmarks()[i].element, &b.landmarks()[j].element, 1.0)?;
    }
    let mut kept = vec![true; correspondences.len()];
    let transform = match params.trim {
        None => estimate_transform(&matches),
        Some(trim) => estimate_transform_trimmed(&matches, &trim).map(|fit| {
            let (mut line, mut plane) = (0, 0);
            for (k, &(i, _)) in correspondences.iter().enumerate() {
                kept[k] = match a.landmarks()[i].element.kind() {
                    Kind::Line => {
                        line += 1;
                        fit.kept_lines[line - 1]
                    }
                    Kind::Plane => {
                        plane += 1;
                        fit.kept_planes[plane - 1]
                    }
                };
            }
            fit.transform
        }),
    };
    Ok(MatchOutcome {
        candidates,
        affinity,
        selection,
        correspondences,
        kept,
        transform,
    })
}
