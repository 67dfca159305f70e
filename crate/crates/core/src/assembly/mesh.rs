use serde::Serialize;

use crate::error::{Error, Result};

/// Radial interval discretized by a mesh.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub enum Domain {
    /// `[inner, outer]`, never touching the origin.
    Annulus { inner: f64, outer: f64 },
    /// `[0, radius]`.
    Disk { radius: f64 },
}

impl Domain {
    pub fn bounds(&self) -> (f64, f64) {
        match *self {
            Domain::Annulus { inner, outer } => (inner, outer),
            Domain::Disk { radius } => (0.0, radius),
        }
    }

    pub fn contains_origin(&self) -> bool {
        matches!(self, Domain::Disk { .. })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum ElementKind {
    /// C¹ cubic Hermite; value and slope at each node.
    HermiteCubic,
    /// Continuous piecewise linear; value at each node.
    Linear,
}

impl ElementKind {
    pub fn dofs_per_node(self) -> usize {
        match self {
            ElementKind::HermiteCubic => 2,
            ElementKind::Linear => 1,
        }
    }
}

pub const DEFAULT_QUADRATURE_POINTS: usize = 6;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RadialMesh {
    domain: Domain,
    nodes: Vec<f64>,
    element: ElementKind,
    quad_points: usize,
}

/// Uniform mesh with `n_elements` cells. Annuli get Hermite elements, disks
/// linear ones.
pub fn build_radial_mesh(domain: Domain, n_elements: usize) -> Result<RadialMesh> {
    if n_elements == 0 {
        return Err(Error::Mesh("n_elements must be at least 1".into()));
    }
    let (a, b) = domain.bounds();
    if !(a.is_finite() && b.is_finite() && a >= 0.0 && b > a) {
        return Err(Error::Mesh(format!("invalid interval [{a}, {b}]")));
    }
    if let Domain::Annulus { inner, .. } = domain {
        if inner <= 0.0 {
            return Err(Error::Mesh("annulus must not contain r = 0".into()));
        }
    }
    let h = (b - a) / n_elements as f64;
    let mut nodes: Vec<f64> = (0..=n_elements).map(|i| a + h * i as f64).collect();
    // endpoints exactly on the domain bounds
    nodes[0] = a;
    nodes[n_elements] = b;
    let element = match domain {
        Domain::Annulus { .. } => ElementKind::HermiteCubic,
        Domain::Disk { .. } => ElementKind::Linear,
    };
    Ok(RadialMesh { domain, nodes, element, quad_points: DEFAULT_QUADRATURE_POINTS })
}

impl RadialMesh {
    /// Replaces the per-element Gauss–Legendre point count.
    pub fn with_quadrature(mut self, points: usize) -> Result<Self> {
        if points < 4 {
            return Err(Error::Mesh(format!("need at least 4 quadrature points per element, got {points}")));
        }
        self.quad_points = points;
        Ok(self)
    }

    pub fn domain(&self) -> Domain {
        self.domain
    }

    pub fn nodes(&self) -> &[f64] {
        &self.nodes
    }

    pub fn element(&self) -> ElementKind {
        self.element
    }

    pub fn quad_points(&self) -> usize {
        self.quad_points
    }

    pub fn n_elements(&self) -> usize {
        self.nodes.len() - 1
    }

    pub fn n_nodes(&self) -> usize {
        self.nodes.len()
    }

    pub fn element_bounds(&self, e: usize) -> (f64, f64) {
        (self.nodes[e], self.nodes[e + 1])
    }

    /// Largest element width.
    pub fn h(&self) -> f64 {
        self.nodes.windows(2).map(|w| w[1] - w[0]).fold(0.0, f64::max)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn uniform_partitions() {
        let m = build_radial_mesh(Domain::Disk { radius: 1.0 }, 2).unwrap();
        assert_eq!(m.nodes(), &[0.0, 0.5, 1.0]);
        assert_eq!(m.element(), ElementKind::Linear);

        let m = build_radial_mesh(Domain::Annulus { inner: 1.0, outer: 2.0 }, 4).unwrap();
        assert_eq!(m.nodes(), &[1.0, 1.25, 1.5, 1.75, 2.0]);
        assert_eq!(m.element(), ElementKind::HermiteCubic);
        assert!(m.nodes().iter().all(|&r| r > 0.0));
    }

    #[test]
    fn rejects_empty_and_degenerate() {
        assert!(build_radial_mesh(Domain::Disk { radius: 1.0 }, 0).is_err());
        assert!(build_radial_mesh(Domain::Annulus { inner: 0.0, outer: 1.0 }, 3).is_err());
        assert!(build_radial_mesh(Domain::Annulus { inner: 2.0, outer: 1.0 }, 3).is_err());
        let m = build_radial_mesh(Domain::Disk { radius: 1.0 }, 3).unwrap();
        assert!(m.clone().with_quadrature(3).is_err());
        assert_eq!(m.with_quadrature(8).unwrap().quad_points(), 8);
    }

    #[test]
    fn nodes_strictly_increasing_for_odd_counts() {
        let m = build_radial_mesh(Domain::Annulus { inner: 0.3, outer: 1.7 }, 37).unwrap();
        assert!(m.nodes().windows(2).all(|w| w[0] < w[1]));
        assert_eq!(*m.nodes().last().unwrap(), 1.7);
    }
}
