use nalgebra::DVector;

use super::mesh::{ElementKind, RadialMesh};
use crate::error::{Error, Result};

/// Values and first two radial derivatives of a shape function.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct ShapeJet {
    pub value: f64,
    pub d1: f64,
    pub d2: f64,
}

/// Finite-element basis on a radial mesh.
///
/// Hermite nodes carry DOFs `2i` (value) and `2i + 1` (slope); linear nodes
/// carry DOF `i`. With `drop_origin` the value DOF at `r = 0` is removed and
/// the remaining DOFs shift down by one.
#[derive(Debug, Clone, PartialEq)]
pub struct RadialBasis {
    mesh: RadialMesh,
    drop_origin: bool,
}

impl RadialBasis {
    /// All nodal DOFs.
    pub fn full(mesh: RadialMesh) -> Self {
        RadialBasis { mesh, drop_origin: false }
    }

    /// Basis admissible for angular mode `m`: on a disk, modes `m >= 1` need
    /// `f(0) = 0`.
    pub fn for_mode(mesh: RadialMesh, m: u32) -> Result<Self> {
        let drop_origin = m >= 1 && mesh.domain().contains_origin();
        if drop_origin && mesh.element() != ElementKind::Linear {
            return Err(Error::Assembly("origin constraint only implemented for linear disk elements".into()));
        }
        Ok(RadialBasis { mesh, drop_origin })
    }

    pub fn mesh(&self) -> &RadialMesh {
        &self.mesh
    }

    pub fn drops_origin(&self) -> bool {
        self.drop_origin
    }

    fn raw_dofs(&self) -> usize {
        self.mesh.n_nodes() * self.mesh.element().dofs_per_node()
    }

    pub fn n_dofs(&self) -> usize {
        self.raw_dofs() - usize::from(self.drop_origin)
    }

    fn map_raw(&self, raw: usize) -> Option<usize> {
        if self.drop_origin {
            raw.checked_sub(1)
        } else {
            Some(raw)
        }
    }

    /// DOF index of the nodal value at node `i`.
    pub fn value_dof(&self, node: usize) -> Option<usize> {
        self.map_raw(node * self.mesh.element().dofs_per_node())
    }

    /// DOF index of the nodal slope at node `i` (Hermite only).
    pub fn slope_dof(&self, node: usize) -> Option<usize> {
        match self.mesh.element() {
            ElementKind::HermiteCubic => self.map_raw(2 * node + 1),
            ElementKind::Linear => None,
        }
    }

    /// Global DOFs of element `e`, in local shape-function order.
    pub fn element_dofs(&self, e: usize) -> Vec<Option<usize>> {
        match self.mesh.element() {
            ElementKind::HermiteCubic => (2 * e..2 * e + 4).map(|raw| self.map_raw(raw)).collect(),
            ElementKind::Linear => vec![self.map_raw(e), self.map_raw(e + 1)],
        }
    }

    /// Local shape functions of element `e` at radius `r`.
    pub fn shape_jets(&self, e: usize, r: f64) -> Vec<ShapeJet> {
        let (a, b) = self.mesh.element_bounds(e);
        let h = b - a;
        let t = (r - a) / h;
        match self.mesh.element() {
            ElementKind::HermiteCubic => hermite_jets(t, h).to_vec(),
            ElementKind::Linear => {
                vec![ShapeJet { value: 1.0 - t, d1: -1.0 / h, d2: 0.0 }, ShapeJet { value: t, d1: 1.0 / h, d2: 0.0 }]
            }
        }
    }

    /// Element containing `r` (closed on the right for the last element).
    pub fn locate(&self, r: f64) -> Option<usize> {
        let nodes = self.mesh.nodes();
        let (a, b) = (nodes[0], nodes[nodes.len() - 1]);
        if !(a..=b).contains(&r) {
            return None;
        }
        let idx = nodes.partition_point(|&x| x <= r);
        Some(idx.saturating_sub(1).min(self.mesh.n_elements() - 1))
    }

    /// Value and derivatives of the discrete function `coeffs` at `r`.
    pub fn evaluate(&self, coeffs: &DVector<f64>, r: f64) -> Option<ShapeJet> {
        let e = self.locate(r)?;
        let mut out = ShapeJet::default();
        for (dof, jet) in self.element_dofs(e).into_iter().zip(self.shape_jets(e, r)) {
            if let Some(d) = dof {
                out.value += coeffs[d] * jet.value;
                out.d1 += coeffs[d] * jet.d1;
                out.d2 += coeffs[d] * jet.d2;
            }
        }
        Some(out)
    }

    /// Nodal interpolant of `f` (with slope `df` for Hermite elements).
    pub fn interpolate(&self, f: impl Fn(f64) -> f64, df: impl Fn(f64) -> f64) -> DVector<f64> {
        let mut c = DVector::zeros(self.n_dofs());
        for (i, &r) in self.mesh.nodes().iter().enumerate() {
            if let Some(d) = self.value_dof(i) {
                c[d] = f(r);
            }
            if let Some(d) = self.slope_dof(i) {
                c[d] = df(r);
            }
        }
        c
    }
}

fn hermite_jets(t: f64, h: f64) -> [ShapeJet; 4] {
    let t2 = t * t;
    let t3 = t2 * t;
    let (ih, ih2) = (1.0 / h, 1.0 / (h * h));
    [
        ShapeJet { value: 1.0 - 3.0 * t2 + 2.0 * t3, d1: (-6.0 * t + 6.0 * t2) * ih, d2: (-6.0 + 12.0 * t) * ih2 },
        ShapeJet { value: h * (t - 2.0 * t2 + t3), d1: 1.0 - 4.0 * t + 3.0 * t2, d2: (-4.0 + 6.0 * t) * ih },
        ShapeJet { value: 3.0 * t2 - 2.0 * t3, d1: (6.0 * t - 6.0 * t2) * ih, d2: (6.0 - 12.0 * t) * ih2 },
        ShapeJet { value: h * (-t2 + t3), d1: -2.0 * t + 3.0 * t2, d2: (-2.0 + 6.0 * t) * ih },
    ]
}
