//! Candidate correspondences and the weighted consistency graph.
//!
//! Every same-dimension object pair across two scans is a candidate. Two
//! candidates are consistent when the distance between their objects inside
//! scan `i` agrees with the distance between their objects inside scan `j`.

pub mod metric;

use alloc::string::String;
use alloc::vec::Vec;

use nalgebra::Vector3;

use crate::error::{Error, Result};
use crate::graff::{GraffElement, Kind, Rho};
use crate::transform::RigidTransform;

pub use metric::{Kernel, PairwiseMetric, ShiftedGraff};

/// One extracted object: its affine subspace plus an optional segmentation
/// centroid (used only by centroid-based distance functions).
#[derive(Clone, Debug)]
pub struct Landmark {
    pub element: GraffElement,
    pub centroid: Option<Vector3<f64>>,
}

impl Landmark {
    pub fn new(element: GraffElement) -> Self {
        Self {
            element,
            centroid: None,
        }
    }

    pub fn with_centroid(mut self, centroid: Vector3<f64>) -> Self {
        self.centroid = Some(centroid);
        self
    }

    pub fn kind(&self) -> Kind {
        self.element.kind()
    }

    pub fn transformed(&self, t: &RigidTransform) -> Self {
        Self {
            element: self.element.transformed(t),
            centroid: self.centroid.map(|c| t.transform_point(&c)),
        }
    }
}

/// The objects extracted from one sensor frame. Indices are stable.
#[derive(Clone, Debug, Default)]
pub struct Scan {
    id: String,
    landmarks: Vec<Landmark>,
}

impl Scan {
    pub fn new(id: impl Into<String>) -> Self {
        Self {
            id: id.into(),
            landmarks: Vec::new(),
        }
    }

    pub fn from_landmarks(id: impl Into<String>, landmarks: Vec<Landmark>) -> Self {
        Self {
            id: id.into(),
            landmarks,
        }
    }

    /// Appends an object and returns its index.
    pub fn push(&mut self, landmark: Landmark) -> usize {
        self.landmarks.push(landmark);
        self.landmarks.len() - 1
    }

    pub fn id(&self) -> &str {
        &self.id
    }

    pub fn landmarks(&self) -> &[Landmark] {
        &self.landmarks
    }

    pub fn get(&self, index: usize) -> Option<&Landmark> {
        self.landmarks.get(index)
    }

    pub fn len(&self) -> usize {
        self.landmarks.len()
    }

    pub fn is_empty(&self) -> bool {
        self.landmarks.is_empty()
    }

    pub fn count(&self, kind: Kind) -> usize {
        self.landmarks.iter().filter(|l| l.kind() == kind).count()
    }

    pub fn transformed(&self, t: &RigidTransform) -> Self {
        Self {
            id: self.id.clone(),
            landmarks: self.landmarks.iter().map(|l| l.transformed(t)).collect(),
        }
    }
}

/// A putative match: object `a` of scan `i` with object `b` of scan `j`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Candidate {
    pub a: usize,
    pub b: usize,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ConsistencyParams {
    /// Gate on the consistency score (radians).
    pub epsilon: f64,
    /// Kernel width (radians).
    pub sigma: f64,
    /// Displacement scale (meters).
    pub rho: Rho,
    /// Keep only the first `n` candidates in lexicographic order.
    pub max_candidates: Option<usize>,
}

impl Default for ConsistencyParams {
    fn default() -> Self {
        Self {
            epsilon: 0.2,
            sigma: 0.02,
            rho: Rho::default(),
            max_candidates: None,
        }
    }
}

impl ConsistencyParams {
    pub fn kernel(&self) -> Result<Kernel> {
        Kernel::new(self.epsilon, self.sigma)
    }

    pub fn metric(&self) -> Result<ShiftedGraff> {
        Ok(ShiftedGraff {
            rho: self.rho,
            kernel: self.kernel()?,
        })
    }
}

/// All line–line and plane–plane pairs, ordered by `(a, b)`.
pub fn generate_candidates(scan_i: &Scan, scan_j: &Scan) -> Vec<Candidate> {
    let mut out = Vec::new();
    for (a, la) in scan_i.landmarks.iter().enumerate() {
        for (b, lb) in scan_j.landmarks.iter().enumerate() {
            if la.kind() == lb.kind() {
                out.push(Candidate { a, b });
            }
        }
    }
    out
}

fn landmark(scan: &Scan, index: usize) -> Result<&Landmark> {
    scan.get(index)
        .ok_or(Error::InvalidInput("candidate index out of range"))
}

/// `c = |d(sᵢ[u₁.a], sᵢ[u₂.a]) − d(sⱼ[u₁.b], sⱼ[u₂.b])|` with the shifted
/// affine Grassmannian distance.
pub fn consistency_score(
    u1: Candidate,
    u2: Candidate,
    scan_i: &Scan,
    scan_j: &Scan,
    params: &ConsistencyParams,
) -> Result<f64> {
    let metric = params.metric()?;
    let di = metric.distance(landmark(scan_i, u1.a)?, landmark(scan_i, u2.a)?)?;
    let dj = metric.distance(landmark(scan_j, u1.b)?, landmark(scan_j, u2.b)?)?;
    Ok((di - dj).abs())
}

/// Edge weight for a consistency score.
pub fn weight(c: f64, params: &ConsistencyParams) -> f64 {
    Kernel {
        epsilon: params.epsilon,
        sigma: params.sigma,
    }
    .weight(c)
}

/// Symmetric `m×m` weighted adjacency with a unit diagonal, entries in `[0, 1]`.
#[derive(Clone, Debug, PartialEq)]
pub struct AffinityMatrix {
    size: usize,
    data: Vec<f64>,
}

const SYMMETRY_TOL: f64 = 1e-12;

impl AffinityMatrix {
    /// Builds a matrix from `f(i, j)` evaluated on the upper triangle
    /// (`i < j`) and mirrored; the diagonal is set to one.
    pub fn from_upper(size: usize, mut f: impl FnMut(usize, usize) -> f64) -> Result<Self> {
        let mut data = alloc::vec![0.0; size * size];
        for i in 0..size {
            data[i * size + i] = 1.0;
            for j in i + 1..size {
                let w = f(i, j);
                if !(0.0..=1.0).contains(&w) {
                    return Err(Error::InvalidInput("affinity entries must lie in [0, 1]"));
                }
                data[i * size + j] = w;
                data[j * size + i] = w;
            }
        }
        Ok(Self { size, data })
    }

    /// Validates a dense row-major matrix.
    pub fn from_dense(size: usize, data: Vec<f64>) -> Result<Self> {
        if data.len() != size * size {
            return Err(Error::InvalidInput("affinity data has the wrong length"));
        }
        for i in 0..size {
            if (data[i * size + i] - 1.0).abs() > SYMMETRY_TOL {
                return Err(Error::InvalidInput("affinity diagonal must be one"));
            }
            for j in 0..size {
                let w = data[i * size + j];
                if !(0.0..=1.0).contains(&w) {
                    return Err(Error::InvalidInput("affinity entries must lie in [0, 1]"));
                }
                if (w - data[j * size + i]).abs() > SYMMETRY_TOL {
                    return Err(Error::InvalidInput("affinity matrix must be symmetric"));
                }
            }
        }
        Ok(Self { size, data })
    }

    pub fn size(&self) -> usize {
        self.size
    }

    pub fn is_empty(&self) -> bool {
        self.size == 0
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.data[i * self.size + j]
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.size..(i + 1) * self.size]
    }

    /// Symmetric permutation: entry `(i, j)` of the result is
    /// `self[(perm[i], perm[j])]`.
    pub fn permuted(&self, perm: &[usize]) -> Result<Self> {
        if perm.len() != self.size {
            return Err(Error::InvalidInput("permutation has the wrong length"));
        }
        AffinityMatrix::from_upper(self.size, |i, j| self.get(perm[i], perm[j]))
    }

    /// Number of nonzero off-diagonal entries in the upper triangle.
    pub fn edge_count(&self) -> usize {
        (0..self.size)
            .map(|i| self.row(i)[i + 1..].iter().filter(|w| **w > 0.0).count())
            .sum()
    }
}

/// Ordered internal distances of one scan, computed once.
struct DistanceTable<D> {
    n: usize,
    values: Vec<Option<D>>,
}

impl<D: Copy> DistanceTable<D> {
    fn build<M: PairwiseMetric<Distance = D>>(scan: &Scan, used: &[bool], metric: &M) -> Result<Self> {
        let n = scan.len();
        let mut values = alloc::vec![None; n * n];
        for x in (0..n).filter(|&x| used[x]) {
            for y in (0..n).filter(|&y| used[y] && y != x) {
                values[x * n + y] = Some(metric.distance(&scan.landmarks[x], &scan.landmarks[y])?);
            }
        }
        Ok(Self { n, values })
    }

    fn get(&self, x: usize, y: usize) -> D {
        self.values[x * self.n + y].expect("distance requested for an unused object")
    }
}

/// Consistency graph with the shifted affine Grassmannian distance.
pub fn build_affinity(
    scan_i: &Scan,
    scan_j: &Scan,
    params: &ConsistencyParams,
) -> Result<(AffinityMatrix, Vec<Candidate>)> {
    build_affinity_with(scan_i, scan_j, &params.metric()?, params.max_candidates)
}

/// Consistency graph for an arbitrary pairwise metric.
///
/// Entry `(p, q)`, `p < q`, is `metric.weight(d_i(a_p, a_q), d_j(b_p, b_q))`
/// and is mirrored to `(q, p)`. Two candidates that reuse an object of either
/// scan are never consistent (matches are one-to-one).
pub fn build_affinity_with<M: PairwiseMetric>(
    scan_i: &Scan,
    scan_j: &Scan,
    metric: &M,
    max_candidates: Option<usize>,
) -> Result<(AffinityMatrix, Vec<Candidate>)> {
    let mut candidates = generate_candidates(scan_i, scan_j);
    if let Some(cap) = max_candidates {
        candidates.truncate(cap);
    }
    let mut used_i = alloc::vec![false; scan_i.len()];
    let mut used_j = alloc::vec![false; scan_j.len()];
    for c in &candidates {
        used_i[c.a] = true;
        used_j[c.b] = true;
    }
    let table_i = DistanceTable::build(scan_i, &used_i, metric)?;
    let table_j = DistanceTable::build(scan_j, &used_j, metric)?;

    let matrix = AffinityMatrix::from_upper(candidates.len(), |p, q| {
        let (u1, u2) = (candidates[p], candidates[q]);
        if u1.a == u2.a || u1.b == u2.b {
            return 0.0;
        }
        metric.weight(table_i.get(u1.a, u2.a), table_j.get(u1.b, u2.b))
    })?;
    Ok((matrix, candidates))
}
