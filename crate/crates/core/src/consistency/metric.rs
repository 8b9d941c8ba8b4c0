//! Internal distance functions and the kernels that turn a pair of internal
//! distances (one per scan) into an edge weight.

use nalgebra::Vector3;

use super::Landmark;
use crate::error::{Error, Result};
use crate::graff::{grassmann_distance, shifted_graff_distance, Rho};

/// Gated Gaussian kernel `f(c) = exp(−c²/2σ²)` for `c < ε`, zero otherwise.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Kernel {
    pub epsilon: f64,
    pub sigma: f64,
}

impl Kernel {
    pub fn new(epsilon: f64, sigma: f64) -> Result<Self> {
        let ok = |x: f64| x.is_finite() && x > 0.0;
        if !ok(epsilon) || !ok(sigma) {
            return Err(Error::InvalidParameter("epsilon and sigma must be positive"));
        }
        Ok(Self { epsilon, sigma })
    }

    pub fn weight(&self, c: f64) -> f64 {
        if c < self.epsilon {
            libm::exp(-c * c / (2.0 * self.sigma * self.sigma))
        } else {
            0.0
        }
    }
}

/// A distance between two objects of the same scan plus the rule scoring how
/// well two such distances (one from each scan) agree.
pub trait PairwiseMetric {
    type Distance: Copy;

    fn distance(&self, from: &Landmark, to: &Landmark) -> Result<Self::Distance>;

    /// Edge weight in `[0, 1]`; zero means the pair is inconsistent.
    fn weight(&self, in_i: Self::Distance, in_j: Self::Distance) -> f64;
}

/// Shifted affine Grassmannian distance with the gated Gaussian kernel.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ShiftedGraff {
    pub rho: Rho,
    pub kernel: Kernel,
}

impl PairwiseMetric for ShiftedGraff {
    type Distance = f64;

    fn distance(&self, from: &Landmark, to: &Landmark) -> Result<f64> {
        Ok(shifted_graff_distance(&from.element, &to.element, self.rho))
    }

    fn weight(&self, in_i: f64, in_j: f64) -> f64 {
        self.kernel.weight((in_i - in_j).abs())
    }
}

/// Grassmannian distance of the direction subspaces; positions are ignored.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct LinearGrassmann {
    pub kernel: Kernel,
}

impl PairwiseMetric for LinearGrassmann {
    type Distance = f64;

    fn distance(&self, from: &Landmark, to: &Landmark) -> Result<f64> {
        Ok(grassmann_distance(&from.element, &to.element))
    }

    fn weight(&self, in_i: f64, in_j: f64) -> f64 {
        self.kernel.weight((in_i - in_j).abs())
    }
}

/// Absolute inner product of line directions / plane normals.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct AxisDot {
    pub kernel: Kernel,
}

impl PairwiseMetric for AxisDot {
    type Distance = f64;

    fn distance(&self, from: &Landmark, to: &Landmark) -> Result<f64> {
        Ok(from.element.axis().dot(&to.element.axis()).abs())
    }

    fn weight(&self, in_i: f64, in_j: f64) -> f64 {
        self.kernel.weight((in_i - in_j).abs())
    }
}

fn centroid(l: &Landmark) -> Result<Vector3<f64>> {
    l.centroid
        .ok_or(Error::MissingMetadata("distance function requires object centroids"))
}

/// Euclidean distance between object centroids.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct CentroidDistance {
    pub kernel: Kernel,
}

impl PairwiseMetric for CentroidDistance {
    type Distance = f64;

    fn distance(&self, from: &Landmark, to: &Landmark) -> Result<f64> {
        Ok((centroid(from)? - centroid(to)?).norm())
    }

    fn weight(&self, in_i: f64, in_j: f64) -> f64 {
        self.kernel.weight((in_i - in_j).abs())
    }
}

/// Direction-subspace angle and centroid range scored with a product of two
/// kernels, `exp(−c_θ²/σ_θ²) · exp(−c_r²/σ_r²)`, each gated separately.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct GrassmannCentroid {
    pub angle: Kernel,
    pub range: Kernel,
}

impl PairwiseMetric for GrassmannCentroid {
    type Distance = (f64, f64);

    fn distance(&self, from: &Landmark, to: &Landmark) -> Result<(f64, f64)> {
        let angle = grassmann_distance(&from.element, &to.element);
        let range = (centroid(from)? - centroid(to)?).norm();
        Ok((angle, range))
    }

    fn weight(&self, in_i: (f64, f64), in_j: (f64, f64)) -> f64 {
        let c_angle = (in_i.0 - in_j.0).abs();
        let c_range = (in_i.1 - in_j.1).abs();
        if c_angle >= self.angle.epsilon || c_range >= self.range.epsilon {
            return 0.0;
        }
        let sa = self.angle.sigma;
        let sr = self.range.sigma;
        libm::exp(-c_angle * c_angle / (sa * sa)) * libm::exp(-c_range * c_range / (sr * sr))
    }
}
