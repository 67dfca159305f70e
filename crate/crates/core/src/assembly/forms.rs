//! Per-mode radial reductions of the bilinear forms.
//!
//! For `u = f(r) cos(mθ)` every form reduces to a radial integral with weight
//! `r dr`; the angular factor (`2π` for `m = 0`, `π` otherwise) is dropped.

use nalgebra::DMatrix;

use super::basis::{RadialBasis, ShapeJet};
use super::mesh::ElementKind;
use super::quadrature::GaussLegendre;
use crate::error::{Error, Result};

fn assemble(basis: &RadialBasis, integrand: impl Fn(f64, &ShapeJet, &ShapeJet) -> f64) -> DMatrix<f64> {
    let mesh = basis.mesh();
    let n = basis.n_dofs();
    let rule = GaussLegendre::new(mesh.quad_points());
    let mut global = DMatrix::zeros(n, n);
    for e in 0..mesh.n_elements() {
        let (a, b) = mesh.element_bounds(e);
        let dofs = basis.element_dofs(e);
        let k = dofs.len();
        let mut local = vec![0.0; k * k];
        for (r, w) in rule.on_interval(a, b) {
            let jets = basis.shape_jets(e, r);
            for i in 0..k {
                for j in i..k {
                    local[i * k + j] += w * integrand(r, &jets[i], &jets[j]);
                }
            }
        }
        for i in 0..k {
            let Some(gi) = dofs[i] else { continue };
            for j in i..k {
                let Some(gj) = dofs[j] else { continue };
                let v = local[i * k + j];
                global[(gi, gj)] += v;
                if gi != gj {
                    global[(gj, gi)] += v;
                }
            }
        }
    }
    global
}

/// `∫ f g r dr`.
pub fn assemble_mass(basis: &RadialBasis) -> DMatrix<f64> {
    assemble(basis, |r, a, b| a.value * b.value * r)
}

/// `∫ (f′g′ + m² f g / r²) r dr`.
pub fn assemble_grad_form(basis: &RadialBasis, m: u32) -> Result<DMatrix<f64>> {
    if m >= 1 && basis.mesh().domain().contains_origin() && !basis.drops_origin() {
        return Err(Error::Assembly(format!("mode {m} on a disk requires a basis without the origin value DOF")));
    }
    let m2 = f64::from(m * m);
    Ok(assemble(basis, move |r, a, b| (a.d1 * b.d1 + m2 * a.value * b.value / (r * r)) * r))
}

/// Angular-reduced Laplacian `f″ + f′/r − m² f / r²`.
pub fn polar_laplacian(m: u32, r: f64, f: &ShapeJet) -> f64 {
    f.d2 + polar_hoop(m, r, f)
}

/// Angular-reduced `H_θθ` component `f′/r − m² f / r²`.
pub fn polar_hoop(m: u32, r: f64, f: &ShapeJet) -> f64 {
    f.d1 / r - f64::from(m * m) * f.value / (r * r)
}

/// Angular-reduced mixed component, `m (f′/r − f/r²)`.
pub fn polar_twist(m: u32, r: f64, f: &ShapeJet) -> f64 {
    f64::from(m) * (f.d1 / r - f.value / (r * r))
}

/// `∫ [μ Δf Δg + (1−μ)(f″g″ + S f S g + 2 T f T g)] r dr`, the per-mode
/// reduction of `μ⟨Δu, Δv⟩ + (1−μ)⟨∇²u, ∇²v⟩`.
pub fn assemble_plate_form(basis: &RadialBasis, m: u32, mu: f64) -> Result<DMatrix<f64>> {
    let mesh = basis.mesh();
    if mesh.domain().contains_origin() || mesh.nodes()[0] <= 0.0 {
        return Err(Error::Assembly("plate form needs a mesh away from r = 0".into()));
    }
    if mesh.element() != ElementKind::HermiteCubic {
        return Err(Error::Assembly("plate form needs C¹ (Hermite) elements".into()));
    }
    Ok(assemble(basis, move |r, a, b| {
        let lap = polar_laplacian(m, r, a) * polar_laplacian(m, r, b);
        let hess =
            a.d2 * b.d2 + polar_hoop(m, r, a) * polar_hoop(m, r, b) + 2.0 * polar_twist(m, r, a) * polar_twist(m, r, b);
        (mu * lap + (1.0 - mu) * hess) * r
    }))
}
