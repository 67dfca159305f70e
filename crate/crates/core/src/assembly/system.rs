use nalgebra::{Cholesky, DMatrix, DVector, DVectorView};
use serde::{Deserialize, Serialize};

use super::basis::RadialBasis;
use super::forms::{assemble_grad_form, assemble_mass, assemble_plate_form};
use super::mesh::{build_radial_mesh, Domain, DEFAULT_QUADRATURE_POINTS};
use super::sparse::CsrMatrix;
use crate::error::{Error, Result};
use crate::model::{AnnulusGeometry, PhysicalParams};

/// Element counts and quadrature order shared by all modes.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Discretization {
    /// Hermite elements on the annulus.
    pub n1: usize,
    /// Linear elements on the disk.
    pub n2: usize,
    /// Gauss–Legendre points per element.
    pub quad_points: usize,
}

impl Discretization {
    pub fn new(n1: usize, n2: usize) -> Self {
        Discretization { n1, n2, quad_points: DEFAULT_QUADRATURE_POINTS }
    }
}

/// Forms restricted to the trace-coupled space, all `n × n`.
#[derive(Debug, Clone)]
pub struct ConstrainedForms {
    pub plate: DMatrix<f64>,
    pub grad1: DMatrix<f64>,
    pub mass1: DMatrix<f64>,
    pub grad2: DMatrix<f64>,
    pub mass2: DMatrix<f64>,
}

#[derive(Debug, Clone)]
pub(crate) struct SparseForms {
    pub plate: CsrMatrix,
    pub grad1: CsrMatrix,
    pub mass1: CsrMatrix,
    pub grad2: CsrMatrix,
    pub mass2: CsrMatrix,
}

/// Cholesky factors `K = L_K L_Kᵀ`, `M_v = L_v L_vᵀ` and the whitened
/// generator `G = L⁻¹ B L⁻ᵀ = [[0, Cᵀ], [−C, −D̃]]` with `C = L_v⁻¹ L_K`.
///
/// In whitened coordinates `y = Lᵀ U` the energy is `½|y|²`.
#[derive(Debug, Clone)]
pub struct Whitening {
    lk: DMatrix<f64>,
    lv: DMatrix<f64>,
    generator: DMatrix<f64>,
    damping: DMatrix<f64>,
}

impl Whitening {
    pub fn generator(&self) -> &DMatrix<f64> {
        &self.generator
    }

    /// `D̃ = L_v⁻¹ D L_v⁻ᵀ`.
    pub fn damping(&self) -> &DMatrix<f64> {
        &self.damping
    }
}

/// Assembled system of a single angular mode.
#[derive(Debug, Clone)]
pub struct ModeSystem {
    mode: u32,
    params: PhysicalParams,
    geom: AnnulusGeometry,
    annulus: RadialBasis,
    disk: RadialBasis,
    annulus_map: Vec<Option<usize>>,
    disk_map: Vec<Option<usize>>,
    n: usize,
    forms: ConstrainedForms,
    stiffness: DMatrix<f64>,
    kinetic: DMatrix<f64>,
    damping: DMatrix<f64>,
    pub(crate) sparse: SparseForms,
    whitening: Whitening,
}

/// Coefficients of `(u, v)` on the constrained space: `u` block first.
#[derive(Debug, Clone, PartialEq)]
pub struct StateVector {
    mode: u32,
    data: DVector<f64>,
}

impl StateVector {
    pub fn new(mode: u32, data: DVector<f64>) -> Self {
        assert!(data.len().is_multiple_of(2), "state length must be even");
        StateVector { mode, data }
    }

    pub fn zeros(mode: u32, n: usize) -> Self {
        StateVector { mode, data: DVector::zeros(2 * n) }
    }

    pub fn from_blocks(mode: u32, u: &DVector<f64>, v: &DVector<f64>) -> Self {
        assert_eq!(u.len(), v.len());
        let n = u.len();
        let mut data = DVector::zeros(2 * n);
        data.rows_mut(0, n).copy_from(u);
        data.rows_mut(n, n).copy_from(v);
        StateVector { mode, data }
    }

    pub fn mode(&self) -> u32 {
        self.mode
    }

    pub fn block_len(&self) -> usize {
        self.data.len() / 2
    }

    pub fn u(&self) -> DVectorView<'_, f64> {
        self.data.rows(0, self.block_len())
    }

    pub fn v(&self) -> DVectorView<'_, f64> {
        self.data.rows(self.block_len(), self.block_len())
    }

    pub fn as_vector(&self) -> &DVector<f64> {
        &self.data
    }

    pub fn into_vector(self) -> DVector<f64> {
        self.data
    }
}

/// Scatter a raw (unconstrained) form into the constrained space.
fn embed(raw: &DMatrix<f64>, map: &[Option<usize>], n: usize) -> DMatrix<f64> {
    let mut out = DMatrix::zeros(n, n);
    for (i, gi) in map.iter().enumerate() {
        let Some(gi) = *gi else { continue };
        for (j, gj) in map.iter().enumerate() {
            let Some(gj) = *gj else { continue };
            out[(gi, gj)] += raw[(i, j)];
        }
    }
    out
}

pub fn assemble_mode_system(
    params: &PhysicalParams,
    geom: &AnnulusGeometry,
    disc: &Discretization,
    m: u32,
) -> Result<ModeSystem> {
    let ann_mesh = build_radial_mesh(Domain::Annulus { inner: geom.r_interface(), outer: geom.r_outer() }, disc.n1)?
        .with_quadrature(disc.quad_points)?;
    let disk_mesh =
        build_radial_mesh(Domain::Disk { radius: geom.r_interface() }, disc.n2)?.with_quadrature(disc.quad_points)?;
    let annulus = RadialBasis::full(ann_mesh);
    let disk = RadialBasis::for_mode(disk_mesh, m)?;

    // Annulus owns the shared interface value (raw DOF 0); clamping at
    // r_outer drops the last node's value and slope.
    let n_ann_raw = annulus.n_dofs();
    let clamped = [annulus.value_dof(disc.n1), annulus.slope_dof(disc.n1)];
    let mut annulus_map = Vec::with_capacity(n_ann_raw);
    let mut next = 0;
    for d in 0..n_ann_raw {
        if clamped.contains(&Some(d)) {
            annulus_map.push(None);
        } else {
            annulus_map.push(Some(next));
            next += 1;
        }
    }
    let shared = annulus_map[annulus.value_dof(0).expect("annulus keeps interface value")];
    let disk_interface = disk.value_dof(disc.n2).expect("disk keeps interface value");
    let mut disk_map = Vec::with_capacity(disk.n_dofs());
    for d in 0..disk.n_dofs() {
        if d == disk_interface {
            disk_map.push(shared);
        } else {
            disk_map.push(Some(next));
            next += 1;
        }
    }
    let n = next;

    let plate_raw = assemble_plate_form(&annulus, m, params.mu())?;
    let grad1_raw = assemble_grad_form(&annulus, m)?;
    let mass1_raw = assemble_mass(&annulus);
    let grad2_raw = assemble_grad_form(&disk, m)?;
    let mass2_raw = assemble_mass(&disk);

    let forms = ConstrainedForms {
        plate: embed(&plate_raw, &annulus_map, n),
        grad1: embed(&grad1_raw, &annulus_map, n),
        mass1: embed(&mass1_raw, &annulus_map, n),
        grad2: embed(&grad2_raw, &disk_map, n),
        mass2: embed(&mass2_raw, &disk_map, n),
    };
    let stiffness = &forms.plate + &forms.grad2;
    let kinetic = &forms.mass1 + &forms.mass2;
    let damping = &forms.grad1 * params.rho() + &forms.mass2 * params.beta();

    let sparse = SparseForms {
        plate: CsrMatrix::from_dense(&forms.plate),
        grad1: CsrMatrix::from_dense(&forms.grad1),
        mass1: CsrMatrix::from_dense(&forms.mass1),
        grad2: CsrMatrix::from_dense(&forms.grad2),
        mass2: CsrMatrix::from_dense(&forms.mass2),
    };
    let whitening = whiten(&stiffness, &kinetic, &damping)?;

    Ok(ModeSystem {
        mode: m,
        params: *params,
        geom: *geom,
        annulus,
        disk,
        annulus_map,
        disk_map,
        n,
        forms,
        stiffness,
        kinetic,
        damping,
        sparse,
        whitening,
    })
}

fn whiten(k: &DMatrix<f64>, mv: &DMatrix<f64>, d: &DMatrix<f64>) -> Result<Whitening> {
    let lk = Cholesky::new(k.clone())
        .ok_or_else(|| Error::Singular("stiffness K is not positive definite".into()))?
        .unpack();
    let lv =
        Cholesky::new(mv.clone()).ok_or_else(|| Error::Singular("mass M_v is not positive definite".into()))?.unpack();
    let n = k.nrows();
    let c = lv.solve_lower_triangular(&lk).expect("nonsingular Cholesky factor");
    let x = lv.solve_lower_triangular(d).expect("nonsingular Cholesky factor");
    let dt = lv.solve_lower_triangular(&x.transpose()).expect("nonsingular Cholesky factor");
    let damping = (&dt + dt.transpose()) * 0.5;
    let mut g = DMatrix::zeros(2 * n, 2 * n);
    g.view_mut((0, n), (n, n)).copy_from(&c.transpose());
    g.view_mut((n, 0), (n, n)).copy_from(&(-&c));
    g.view_mut((n, n), (n, n)).copy_from(&(-&damping));
    Ok(Whitening { lk, lv, generator: g, damping })
}

impl ModeSystem {
    pub fn mode(&self) -> u32 {
        self.mode
    }

    pub fn params(&self) -> &PhysicalParams {
        &self.params
    }

    pub fn geometry(&self) -> &AnnulusGeometry {
        &self.geom
    }

    /// Size of the `u` block (= size of the `v` block).
    pub fn block_dim(&self) -> usize {
        self.n
    }

    pub fn state_dim(&self) -> usize {
        2 * self.n
    }

    pub fn forms(&self) -> &ConstrainedForms {
        &self.forms
    }

    /// `K = plate ⊕ grad2` on the constrained space.
    pub fn stiffness(&self) -> &DMatrix<f64> {
        &self.stiffness
    }

    /// `M_v = mass1 ⊕ mass2` on the constrained space.
    pub fn kinetic_mass(&self) -> &DMatrix<f64> {
        &self.kinetic
    }

    /// `D = ρ grad1 ⊕ β mass2`.
    pub fn damping(&self) -> &DMatrix<f64> {
        &self.damping
    }

    pub fn whitening(&self) -> &Whitening {
        &self.whitening
    }

    pub fn annulus_basis(&self) -> &RadialBasis {
        &self.annulus
    }

    pub fn disk_basis(&self) -> &RadialBasis {
        &self.disk
    }

    /// Constrained index of the shared interface value DOF.
    pub fn interface_dof(&self) -> usize {
        self.annulus_map[0].expect("interface DOF is never constrained")
    }

    /// `M = diag(K, M_v)`.
    pub fn pencil_m(&self) -> DMatrix<f64> {
        let n = self.n;
        let mut m = DMatrix::zeros(2 * n, 2 * n);
        m.view_mut((0, 0), (n, n)).copy_from(&self.stiffness);
        m.view_mut((n, n), (n, n)).copy_from(&self.kinetic);
        m
    }

    /// `B = [[0, K], [−K, −D]]`.
    pub fn pencil_b(&self) -> DMatrix<f64> {
        let n = self.n;
        let mut b = DMatrix::zeros(2 * n, 2 * n);
        b.view_mut((0, n), (n, n)).copy_from(&self.stiffness);
        b.view_mut((n, 0), (n, n)).copy_from(&(-&self.stiffness));
        b.view_mut((n, n), (n, n)).copy_from(&(-&self.damping));
        b
    }

    pub fn check_state(&self, state: &StateVector) -> Result<()> {
        if state.as_vector().len() != self.state_dim() {
            return Err(Error::Dimension { expected: self.state_dim(), got: state.as_vector().len() });
        }
        Ok(())
    }

    /// `y = Lᵀ U`.
    pub fn to_whitened(&self, state: &StateVector) -> DVector<f64> {
        let n = self.n;
        let mut y = DVector::zeros(2 * n);
        y.rows_mut(0, n).copy_from(&(self.whitening.lk.tr_mul(&state.u())));
        y.rows_mut(n, n).copy_from(&(self.whitening.lv.tr_mul(&state.v())));
        y
    }

    /// `U = L⁻ᵀ y`.
    pub fn from_whitened(&self, y: &DVector<f64>) -> StateVector {
        let n = self.n;
        let u = self
            .whitening
            .lk
            .tr_solve_lower_triangular(&y.rows(0, n).into_owned())
            .expect("nonsingular Cholesky factor");
        let v = self
            .whitening
            .lv
            .tr_solve_lower_triangular(&y.rows(n, n).into_owned())
            .expect("nonsingular Cholesky factor");
        StateVector::from_blocks(self.mode, &u, &v)
    }

    /// Raw Hermite coefficients on the annulus (clamped DOFs zero).
    pub fn annulus_coefficients(&self, block: &DVectorView<'_, f64>) -> DVector<f64> {
        DVector::from_iterator(self.annulus_map.len(), self.annulus_map.iter().map(|g| g.map_or(0.0, |g| block[g])))
    }

    /// Disk basis coefficients; the interface value comes from the shared DOF.
    pub fn disk_coefficients(&self, block: &DVectorView<'_, f64>) -> DVector<f64> {
        DVector::from_iterator(self.disk_map.len(), self.disk_map.iter().map(|g| g.map_or(0.0, |g| block[g])))
    }

    /// Constrained block from annulus and disk profiles. The interface value
    /// is taken from the annulus profile.
    pub fn block_from_profiles(
        &self,
        annulus: (impl Fn(f64) -> f64, impl Fn(f64) -> f64),
        disk: impl Fn(f64) -> f64,
    ) -> DVector<f64> {
        let a = self.annulus.interpolate(&annulus.0, &annulus.1);
        let d = self.disk.interpolate(&disk, |_| 0.0);
        let mut out = DVector::zeros(self.n);
        for (i, g) in self.disk_map.iter().enumerate() {
            if let Some(g) = g {
                out[*g] = d[i];
            }
        }
        for (i, g) in self.annulus_map.iter().enumerate() {
            if let Some(g) = g {
                out[*g] = a[i];
            }
        }
        out
    }
}
