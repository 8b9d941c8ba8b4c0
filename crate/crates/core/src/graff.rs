//! Lines and planes as elements of the affine Grassmannian Graff(k, 3).
//!
//! An element is stored as an orthonormal basis `A` of its direction space
//! together with the orthogonal displacement `b₀` (the point of the subspace
//! closest to the origin, `Aᵀb₀ = 0`). Distances come from embedding
//! Graff(k, 3) into Gr(k + 1, 4) and measuring principal angles there.
//!
//! Each element additionally carries an *anchor*: a representative point on
//! the subspace that moves with the element under rigid motions. `b₀` is not
//! equivariant under translation (it is tied to the frame origin), so the
//! translation-invariant distance [`shifted_graff_distance`] shifts both
//! elements by the anchor of the first one instead. Two elements with the
//! same span and `b₀` are considered equal regardless of their anchors.

use alloc::vec::Vec;
use core::f64::consts::FRAC_1_SQRT_2;

use nalgebra::{DMatrix, Vector3, SVD};

use crate::error::{Error, Result};
use crate::transform::RigidTransform;

/// Maximum deviation of `AᵀA` from the identity accepted at construction.
pub const ORTHONORMAL_TOL: f64 = 1e-8;

/// Positive scale applied to affine displacements before embedding (meters).
#[derive(Clone, Copy, Debug, PartialEq, PartialOrd)]
pub struct Rho(f64);

impl Rho {
    pub fn new(value: f64) -> Result<Self> {
        if value.is_finite() && value > 0.0 {
            Ok(Rho(value))
        } else {
            Err(Error::InvalidParameter("rho must be positive and finite"))
        }
    }

    pub fn get(self) -> f64 {
        self.0
    }
}

impl Default for Rho {
    fn default() -> Self {
        Rho(40.0)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Kind {
    Line,
    Plane,
}

impl Kind {
    /// Dimension `k` of the direction subspace.
    pub fn dim(self) -> usize {
        match self {
            Kind::Line => 1,
            Kind::Plane => 2,
        }
    }
}

/// A k-dimensional affine subspace of R³ (k = 1 or 2).
#[derive(Clone, Debug)]
pub struct GraffElement {
    kind: Kind,
    basis: [Vector3<f64>; 2],
    displacement: Vector3<f64>,
    anchor: Vector3<f64>,
}

fn orthonormalize(basis: &[Vector3<f64>]) -> Result<[Vector3<f64>; 2]> {
    if basis.is_empty() || basis.len() > 2 {
        return Err(Error::InvalidInput("basis must have one or two columns"));
    }
    if basis.iter().any(|v| !v.iter().all(|x| x.is_finite())) {
        return Err(Error::InvalidInput("basis contains non-finite values"));
    }
    for (i, a) in basis.iter().enumerate() {
        for (j, b) in basis.iter().enumerate() {
            let target = if i == j { 1.0 } else { 0.0 };
            if (a.dot(b) - target).abs() > ORTHONORMAL_TOL {
                return Err(Error::InvalidInput("basis is not orthonormal"));
            }
        }
    }
    // Polish to machine precision (modified Gram-Schmidt, two passes).
    let first = basis[0].normalize();
    let second = match basis.get(1) {
        Some(v) => {
            let mut w = *v - first * first.dot(v);
            w -= first * first.dot(&w);
            w.normalize()
        }
        None => Vector3::zeros(),
    };
    Ok([first, second])
}

fn unit(v: &Vector3<f64>, what: &'static str) -> Result<Vector3<f64>> {
    let n = v.norm();
    if !n.is_finite() || n <= f64::EPSILON {
        return Err(Error::InvalidInput(what));
    }
    Ok(v / n)
}

/// `b₀ = (I − AAᵀ) b` for an orthonormal `A` with one or two columns.
pub fn orthogonal_displacement(basis: &[Vector3<f64>], b: &Vector3<f64>) -> Result<Vector3<f64>> {
    let cols = orthonormalize(basis)?;
    Ok(project_out(&cols[..basis.len()], b))
}

fn project_out(cols: &[Vector3<f64>], b: &Vector3<f64>) -> Vector3<f64> {
    let mut r = *b;
    for a in cols {
        r -= a * a.dot(&r);
    }
    r
}

/// Any unit vector orthogonal to `n`.
fn orthogonal_unit(n: &Vector3<f64>) -> Vector3<f64> {
    let (ax, ay, az) = (n.x.abs(), n.y.abs(), n.z.abs());
    let helper = if ax <= ay && ax <= az {
        Vector3::x()
    } else if ay <= az {
        Vector3::y()
    } else {
        Vector3::z()
    };
    (helper - n * n.dot(&helper)).normalize()
}

impl GraffElement {
    /// Builds an element from an orthonormal basis (one column for a line, two
    /// for a plane) and any point on the subspace. The point becomes the anchor.
    pub fn new(basis: &[Vector3<f64>], point: Vector3<f64>) -> Result<Self> {
        let cols = orthonormalize(basis)?;
        if !point.iter().all(|x| x.is_finite()) {
            return Err(Error::InvalidInput("point contains non-finite values"));
        }
        let kind = if basis.len() == 1 { Kind::Line } else { Kind::Plane };
        let displacement = project_out(&cols[..kind.dim()], &point);
        Ok(Self {
            kind,
            basis: cols,
            displacement,
            anchor: point,
        })
    }

    pub fn line(direction: Vector3<f64>, point: Vector3<f64>) -> Result<Self> {
        Ok(Self::from_pd(&LinePD::new(direction, point)?))
    }

    pub fn plane(normal: Vector3<f64>, offset: f64) -> Result<Self> {
        Ok(Self::from_hesse(&PlaneHesse::new(normal, offset)?))
    }

    pub fn from_pd(line: &LinePD) -> Self {
        let a = line.direction;
        let displacement = project_out(&[a], &line.point);
        Self {
            kind: Kind::Line,
            basis: [a, Vector3::zeros()],
            displacement,
            anchor: line.point,
        }
    }

    /// Plane from Hesse form. The basis is one orthonormal completion of the
    /// normal; the anchor is the closest point to the origin.
    pub fn from_hesse(plane: &PlaneHesse) -> Self {
        let n = plane.normal;
        let u = orthogonal_unit(&n);
        let v = n.cross(&u);
        let displacement = n * plane.offset;
        Self {
            kind: Kind::Plane,
            basis: [u, v],
            displacement,
            anchor: displacement,
        }
    }

    /// Replaces the anchor by the projection of `point` onto the subspace.
    pub fn with_anchor(mut self, point: Vector3<f64>) -> Self {
        let mut p = self.displacement;
        for a in self.basis() {
            p += a * a.dot(&point);
        }
        self.anchor = p;
        self
    }

    pub fn kind(&self) -> Kind {
        self.kind
    }

    pub fn dim(&self) -> usize {
        self.kind.dim()
    }

    pub fn basis(&self) -> &[Vector3<f64>] {
        &self.basis[..self.kind.dim()]
    }

    /// Orthogonal displacement `b₀`.
    pub fn displacement(&self) -> &Vector3<f64> {
        &self.displacement
    }

    pub fn anchor(&self) -> &Vector3<f64> {
        &self.anchor
    }

    /// Unit direction of a line or unit normal of a plane.
    pub fn axis(&self) -> Vector3<f64> {
        match self.kind {
            Kind::Line => self.basis[0],
            Kind::Plane => self.basis[0].cross(&self.basis[1]).normalize(),
        }
    }

    pub fn to_pd(&self) -> Result<LinePD> {
        match self.kind {
            Kind::Line => Ok(LinePD {
                direction: self.basis[0],
                point: self.displacement,
            }),
            Kind::Plane => Err(Error::InvalidInput("a plane has no point-direction form")),
        }
    }

    pub fn to_hesse(&self) -> Result<PlaneHesse> {
        match self.kind {
            Kind::Plane => {
                let n = self.axis();
                PlaneHesse::new(n, n.dot(&self.displacement))
            }
            Kind::Line => Err(Error::InvalidInput("a line has no Hesse normal form")),
        }
    }

    pub fn transformed(&self, t: &RigidTransform) -> Self {
        let basis = [
            t.transform_vector(&self.basis[0]),
            t.transform_vector(&self.basis[1]),
        ];
        let anchor = t.transform_point(&self.anchor);
        let displacement = project_out(&basis[..self.kind.dim()], &anchor);
        Self {
            kind: self.kind,
            basis,
            displacement,
            anchor,
        }
    }

    /// Same element moved by `offset`.
    pub fn translated(&self, offset: &Vector3<f64>) -> Self {
        let anchor = self.anchor + offset;
        Self {
            kind: self.kind,
            basis: self.basis,
            displacement: project_out(self.basis(), &anchor),
            anchor,
        }
    }

    /// Same span and displacement, up to `tol` (anchors are ignored).
    pub fn approx_eq(&self, other: &Self, tol: f64) -> bool {
        if self.kind != other.kind {
            return false;
        }
        let projector = |e: &Self| {
            e.basis()
                .iter()
                .fold(nalgebra::Matrix3::zeros(), |acc, a| acc + a * a.transpose())
        };
        (projector(self) - projector(other)).norm() <= tol
            && (self.displacement - other.displacement).norm() <= tol
    }

    /// Orthonormal Stiefel coordinates of the embedded subspace in Gr(k+1, 4),
    /// with the displacement scaled by `1/ρ`.
    pub fn stiefel(&self, rho: Rho) -> StiefelCoords {
        let k = self.kind.dim();
        let b = self.displacement / rho.get();
        let eta = libm::sqrt(1.0 + b.norm_squared());
        let mut y = DMatrix::zeros(4, k + 1);
        for (c, a) in self.basis().iter().enumerate() {
            y.fixed_view_mut::<3, 1>(0, c).copy_from(a);
        }
        y.fixed_view_mut::<3, 1>(0, k).copy_from(&(b / eta));
        y[(3, k)] = 1.0 / eta;
        StiefelCoords { y }
    }
}

/// Orthonormal `(n+1)×(k+1)` representative of an embedded affine subspace.
#[derive(Clone, Debug, PartialEq)]
pub struct StiefelCoords {
    y: DMatrix<f64>,
}

impl StiefelCoords {
    /// Wraps a 4×(k+1) matrix, checking that its columns are orthonormal.
    pub fn from_matrix(y: DMatrix<f64>) -> Result<Self> {
        if y.nrows() != 4 || y.ncols() == 0 || y.ncols() > 3 {
            return Err(Error::InvalidInput("Stiefel matrix must be 4×(k+1) with k in 1..=2"));
        }
        let gram = y.transpose() * &y;
        let defect = (gram - DMatrix::identity(y.ncols(), y.ncols())).amax();
        if !defect.is_finite() || defect > ORTHONORMAL_TOL {
            return Err(Error::InvalidInput("Stiefel matrix columns are not orthonormal"));
        }
        Ok(Self { y })
    }

    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.y
    }

    pub fn ncols(&self) -> usize {
        self.y.ncols()
    }
}

/// Principal angles in ascending order, each in `[0, π/2]`.
#[derive(Clone, Debug, PartialEq)]
pub struct PrincipalAngles(Vec<f64>);

impl PrincipalAngles {
    pub fn angles(&self) -> &[f64] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    /// Geodesic distance: the Euclidean norm of the angle vector.
    pub fn norm(&self) -> f64 {
        libm::sqrt(self.0.iter().map(|t| t * t).sum())
    }
}

/// Principal angles between the column spans of two orthonormal matrices with
/// the same number of rows.
///
/// Cosines come from the singular values of `Y₁ᵀY₂`; sines from the singular
/// values of the residual of the smaller basis after projection onto the
/// larger one. Each angle is taken from whichever is better conditioned, with
/// both clamped to `[0, 1]` first.
fn angles_between(y1: &DMatrix<f64>, y2: &DMatrix<f64>) -> PrincipalAngles {
    assert_eq!(y1.nrows(), y2.nrows(), "ambient dimensions differ");
    let (small, large) = if y1.ncols() <= y2.ncols() {
        (y1, y2)
    } else {
        (y2, y1)
    };
    let overlap = small.transpose() * large;
    let residual = small - large * (large.transpose() * small);

    let mut cos: Vec<f64> = SVD::new(overlap, false, false)
        .singular_values
        .iter()
        .map(|s| s.clamp(0.0, 1.0))
        .collect();
    let mut sin: Vec<f64> = SVD::new(residual, false, false)
        .singular_values
        .iter()
        .map(|s| s.clamp(0.0, 1.0))
        .collect();
    cos.sort_by(|a, b| b.total_cmp(a));
    sin.sort_by(|a, b| a.total_cmp(b));

    let angles = cos
        .iter()
        .zip(&sin)
        .map(|(&c, &s)| {
            if c > FRAC_1_SQRT_2 {
                libm::asin(s)
            } else {
                libm::acos(c)
            }
        })
        .collect();
    PrincipalAngles(angles)
}

/// Principal angles between two embedded affine subspaces; there are
/// `min(k₁, k₂) + 1` of them.
pub fn principal_angles(y1: &StiefelCoords, y2: &StiefelCoords) -> PrincipalAngles {
    angles_between(&y1.y, &y2.y)
}

/// Affine Grassmannian distance `d_Gr(j(Y₁), j(Y₂))` in radians.
///
/// A metric for fixed `ρ`, but it depends on the position of the frame origin.
pub fn graff_distance(e1: &GraffElement, e2: &GraffElement, rho: Rho) -> f64 {
    principal_angles(&e1.stiefel(rho), &e2.stiefel(rho)).norm()
}

/// Principal angles of the pair after shifting both elements by `-anchor(e1)`.
pub fn shifted_principal_angles(e1: &GraffElement, e2: &GraffElement, rho: Rho) -> PrincipalAngles {
    let shift = -e1.anchor;
    let a = e1.translated(&shift);
    let b = e2.translated(&shift);
    principal_angles(&a.stiefel(rho), &b.stiefel(rho))
}

/// Affine Grassmannian distance after moving both elements so that the first
/// one passes through the origin at its anchor.
///
/// Invariant to any rigid motion applied to both elements.
pub fn shifted_graff_distance(e1: &GraffElement, e2: &GraffElement, rho: Rho) -> f64 {
    shifted_principal_angles(e1, e2, rho).norm()
}

/// Grassmannian distance between the direction subspaces only (positions are
/// ignored), using `min(k₁, k₂)` principal angles.
pub fn grassmann_distance(e1: &GraffElement, e2: &GraffElement) -> f64 {
    let to_matrix = |e: &GraffElement| {
        let mut m = DMatrix::zeros(3, e.dim());
        for (c, a) in e.basis().iter().enumerate() {
            m.fixed_view_mut::<3, 1>(0, c).copy_from(a);
        }
        m
    };
    angles_between(&to_matrix(e1), &to_matrix(e2)).norm()
}

/// A line in point-direction form. `±direction` describe the same line.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct LinePD {
    direction: Vector3<f64>,
    point: Vector3<f64>,
}

impl LinePD {
    pub fn new(direction: Vector3<f64>, point: Vector3<f64>) -> Result<Self> {
        let direction = unit(&direction, "line direction must be nonzero and finite")?;
        if !point.iter().all(|x| x.is_finite()) {
            return Err(Error::InvalidInput("line point contains non-finite values"));
        }
        Ok(Self { direction, point })
    }

    pub fn direction(&self) -> &Vector3<f64> {
        &self.direction
    }

    pub fn point(&self) -> &Vector3<f64> {
        &self.point
    }

    /// Same line with the point replaced by the orthogonal displacement.
    pub fn canonical(&self) -> Self {
        Self {
            direction: self.direction,
            point: project_out(&[self.direction], &self.point),
        }
    }

    /// `a' = Ra`, `p' = Rp + t`, returned in canonical form.
    pub fn transformed(&self, t: &RigidTransform) -> Self {
        Self {
            direction: t.transform_vector(&self.direction),
            point: t.transform_point(&self.point),
        }
        .canonical()
    }

    /// Whether both describe the same infinite line (direction sign ignored).
    pub fn same_line(&self, other: &Self, tol: f64) -> bool {
        let parallel = self.direction.cross(&other.direction).norm() <= tol;
        parallel && (self.canonical().point - other.canonical().point).norm() <= tol
    }
}

/// A plane `{x : nᵀx = d}` stored with `d ≥ 0`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct PlaneHesse {
    normal: Vector3<f64>,
    offset: f64,
}

/// Offsets smaller than this are treated as planes through the origin when
/// choosing the canonical normal sign.
const ZERO_OFFSET_TOL: f64 = 1e-12;

impl PlaneHesse {
    /// Normalizes `(n, d)` and flips it so that `d ≥ 0`. For planes through the
    /// origin the first significant normal component is made positive.
    pub fn new(normal: Vector3<f64>, offset: f64) -> Result<Self> {
        let len = normal.norm();
        if !len.is_finite() || len <= f64::EPSILON || !offset.is_finite() {
            return Err(Error::InvalidInput("plane normal must be nonzero and finite"));
        }
        let (mut n, mut d) = (normal / len, offset / len);
        let flip = if d.abs() <= ZERO_OFFSET_TOL {
            d = 0.0;
            n.iter()
                .find(|c| c.abs() > ZERO_OFFSET_TOL)
                .is_some_and(|c| *c < 0.0)
        } else {
            d < 0.0
        };
        if flip {
            n = -n;
            d = -d;
        }
        Ok(Self {
            normal: n,
            offset: d,
        })
    }

    pub fn normal(&self) -> &Vector3<f64> {
        &self.normal
    }

    pub fn offset(&self) -> f64 {
        self.offset
    }

    pub fn signed_distance(&self, x: &Vector3<f64>) -> f64 {
        self.normal.dot(x) - self.offset
    }

    /// `n' = Rn`, `d' = d + n'ᵀt`, re-canonicalized.
    pub fn transformed(&self, t: &RigidTransform) -> Self {
        let n = t.transform_vector(&self.normal);
        let d = self.offset + n.dot(t.translation());
        // n is a rotated unit vector, so `new` cannot fail.
        Self::new(n, d).unwrap_or(Self {
            normal: n,
            offset: d,
        })
    }
}
