//! Linear elasticity on simplex meshes: coefficient fields, stiffness
//! assembly, patch traction loads, and the sparse solve.
//!
//! Displacements are piecewise linear per vertex, coefficients piecewise
//! constant per element. Gradients of piecewise-linear fields are constant on
//! each element, so the one-point centroid rule integrates every stiffness
//! and load term exactly; there is no quadrature error anywhere in this
//! module. The bilinear form is
//!
//! ```text
//! a(u, v) = integral of 2 mu sym_grad(u) : sym_grad(v) + lambda div(u) div(v)
//! ```
//!
//! with sym_grad(u) = (grad u + grad u^T) / 2. One box face is clamped to
//! zero displacement; clamped rows and columns are eliminated so the reduced
//! stiffness matrix is symmetric positive definite and factors by sparse
//! Cholesky.

use nalgebra::{DMatrix, DVector};
use nalgebra_sparse::factorization::CscCholesky;
use nalgebra_sparse::{CooMatrix, CscMatrix};

use crate::error::{CoreError, Result};
use crate::geometry::BoxRegion;
use crate::mesh::{element_region_fractions, BoundaryFacet, Mesh};

/// Subdivision depth used for coefficient blending of partially covered
/// elements when no explicit depth is configured.
pub const DEFAULT_FRACTION_DEPTH: usize = 3;

/// Iteration cap multiplier for the conjugate-gradient fallback.
const CG_ITER_FACTOR: usize = 40;

/// Relative residual tolerance of [`StiffnessSystem::solve`].
pub const SOLVE_RTOL: f64 = 1e-10;

/// Piecewise-constant Lame coefficient pair per element.
#[derive(Debug, Clone)]
pub struct MaterialField {
    mesh_signature: u64,
    lambda: Vec<f64>,
    mu: Vec<f64>,
}

impl MaterialField {
    /// Build from per-element vectors. Both coefficients must stay strictly
    /// positive: each entry at least 1e-12 of the field's maximum.
    pub fn from_parts(mesh: &Mesh, lambda: Vec<f64>, mu: Vec<f64>) -> Result<Self> {
        if lambda.len() != mesh.element_count() || mu.len() != mesh.element_count() {
            return Err(CoreError::invalid(format!(
                "coefficient vectors have lengths {} and {}, mesh has {} elements",
                lambda.len(),
                mu.len(),
                mesh.element_count()
            )));
        }
        for (name, field) in [("lambda", &lambda), ("mu", &mu)] {
            let max = field.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
            if !(max > 0.0) {
                return Err(CoreError::invalid(format!("{name} field has no positive values")));
            }
            let floor = 1e-12 * max;
            if let Some((e, &v)) = field.iter().enumerate().find(|(_, &v)| !(v >= floor)) {
                return Err(CoreError::invalid(format!(
                    "{name}[{e}] = {v:.6e} under the positivity floor {floor:.6e}"
                )));
            }
        }
        Ok(Self { mesh_signature: mesh.signature(), lambda, mu })
    }

    pub fn lambda(&self, e: usize) -> f64 {
        self.lambda[e]
    }

    pub fn mu(&self, e: usize) -> f64 {
        self.mu[e]
    }

    pub fn lambda_slice(&self) -> &[f64] {
        &self.lambda
    }

    pub fn mu_slice(&self) -> &[f64] {
        &self.mu
    }

    pub fn compatible_with(&self, mesh: &Mesh) -> bool {
        self.mesh_signature == mesh.signature()
    }

    fn check_mesh(&self, mesh: &Mesh) -> Result<()> {
        if !self.compatible_with(mesh) {
            return Err(CoreError::invalid(
                "material field belongs to a different mesh",
            ));
        }
        Ok(())
    }
}

/// Axis-aligned box with its own coefficient pair.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct Inclusion {
    pub region: BoxRegion,
    pub lambda: f64,
    pub mu: f64,
}

/// Constant background coefficients on the whole mesh.
pub fn material_background(mesh: &Mesh, lambda0: f64, mu0: f64) -> Result<MaterialField> {
    if !(lambda0 > 0.0) || !(mu0 > 0.0) {
        return Err(CoreError::invalid(format!(
            "background coefficients must be positive, got lambda {lambda0}, mu {mu0}"
        )));
    }
    let n = mesh.element_count();
    MaterialField::from_parts(mesh, vec![lambda0; n], vec![mu0; n])
}

/// Background coefficients with box inclusions. Elements partially covered
/// by an inclusion get volume-fraction-blended coefficients, which keeps the
/// field monotone in the inclusion parameters. Overlapping inclusions must
/// carry identical coefficients; conflicting overlaps are rejected.
pub fn material_with_inclusions(
    mesh: &Mesh,
    lambda0: f64,
    mu0: f64,
    inclusions: &[Inclusion],
    depth: usize,
) -> Result<MaterialField> {
    if !(lambda0 > 0.0) || !(mu0 > 0.0) {
        return Err(CoreError::invalid(format!(
            "background coefficients must be positive, got lambda {lambda0}, mu {mu0}"
        )));
    }
    let dim = mesh.dimension();
    let tol = 1e-9 * mesh.domain().max_extent();
    for (k, inc) in inclusions.iter().enumerate() {
        if !(inc.lambda > 0.0) || !(inc.mu > 0.0) {
            return Err(CoreError::invalid(format!(
                "inclusion {k} has non-positive coefficients lambda {}, mu {}",
                inc.lambda, inc.mu
            )));
        }
        if !mesh.domain().contains_box(&inc.region, tol) {
            return Err(CoreError::invalid(format!(
                "inclusion {k} box [{:?}, {:?}] leaves the domain",
                inc.region.min, inc.region.max
            )));
        }
    }
    for i in 0..inclusions.len() {
        for j in i + 1..inclusions.len() {
            let same = inclusions[i].lambda == inclusions[j].lambda
                && inclusions[i].mu == inclusions[j].mu;
            if !same && inclusions[i].region.overlaps_interior(&inclusions[j].region, dim, tol) {
                return Err(CoreError::invalid(format!(
                    "inclusions {i} and {j} overlap but carry different coefficients"
                )));
            }
        }
    }

    // Group inclusions by coefficient pair; overlaps within a group are
    // harmless because the union fraction counts shared volume once.
    let mut groups: Vec<((f64, f64), Vec<BoxRegion>)> = Vec::new();
    for inc in inclusions {
        let key = (inc.lambda, inc.mu);
        match groups.iter_mut().find(|(k, _)| *k == key) {
            Some((_, boxes)) => boxes.push(inc.region),
            None => groups.push((key, vec![inc.region])),
        }
    }

    let n = mesh.element_count();
    let mut lambda = vec![lambda0; n];
    let mut mu = vec![mu0; n];
    for ((l1, m1), boxes) in &groups {
        let fr = element_region_fractions(mesh, boxes, depth);
        for e in 0..n {
            lambda[e] += fr[e] * (l1 - lambda0);
            mu[e] += fr[e] * (m1 - mu0);
        }
    }
    MaterialField::from_parts(mesh, lambda, mu)
}

/// Constant traction on one patch, zero on the rest of the boundary.
#[derive(Debug, Clone, PartialEq)]
pub struct BoundaryLoad {
    /// 1-based patch id in the mesh's layout.
    pub patch_id: u32,
    /// Traction vector (constant over the patch).
    pub traction: [f64; 3],
}

impl BoundaryLoad {
    /// The default load: the outward unit normal of the patch's face.
    pub fn normal(mesh: &Mesh, patch_id: u32) -> Result<Self> {
        let layout = mesh
            .layout()
            .ok_or_else(|| CoreError::config("mesh carries no patch layout"))?;
        Ok(Self { patch_id, traction: layout.patch_normal(patch_id)? })
    }
}

/// Per-vertex displacement vectors; identically zero on clamped vertices.
#[derive(Debug, Clone)]
pub struct DisplacementField {
    mesh_signature: u64,
    dimension: usize,
    /// Vertex-major layout: entry `dimension * v + c`.
    values: Vec<f64>,
}

impl DisplacementField {
    pub fn zero(mesh: &Mesh) -> Self {
        Self {
            mesh_signature: mesh.signature(),
            dimension: mesh.dimension(),
            values: vec![0.0; mesh.dimension() * mesh.vertex_count()],
        }
    }

    /// Wrap explicit nodal values, vertex-major with `dimension` components
    /// per vertex.
    pub fn from_values(mesh: &Mesh, values: Vec<f64>) -> Result<Self> {
        if values.len() != mesh.dimension() * mesh.vertex_count() {
            return Err(CoreError::invalid(format!(
                "field has {} values, mesh needs {}",
                values.len(),
                mesh.dimension() * mesh.vertex_count()
            )));
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(CoreError::invalid("field values must be finite"));
        }
        Ok(Self { mesh_signature: mesh.signature(), dimension: mesh.dimension(), values })
    }

    pub fn vertex_value(&self, v: usize) -> [f64; 3] {
        let mut out = [0.0; 3];
        for c in 0..self.dimension {
            out[c] = self.values[self.dimension * v + c];
        }
        out
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.values
    }

    pub fn compatible_with(&self, mesh: &Mesh) -> bool {
        self.mesh_signature == mesh.signature()
    }

    pub fn max_abs(&self) -> f64 {
        self.values.iter().fold(0.0, |m, v| m.max(v.abs()))
    }
}

/// Shape function gradients of one element; row `k` is the gradient of the
/// hat function of local vertex `k`. Constant over the element.
pub(crate) fn element_gradients(mesh: &Mesh, e: usize) -> [[f64; 3]; 4] {
    let dim = mesh.dimension();
    let p = mesh.element_vertices(e);
    let mut grads = [[0.0; 3]; 4];
    match dim {
        2 => {
            let j = [
                [p[1][0] - p[0][0], p[2][0] - p[0][0]],
                [p[1][1] - p[0][1], p[2][1] - p[0][1]],
            ];
            let det = j[0][0] * j[1][1] - j[0][1] * j[1][0];
            // Rows of the Jacobian inverse are the gradients of the two
            // non-anchor hat functions.
            let inv = [
                [j[1][1] / det, -j[0][1] / det],
                [-j[1][0] / det, j[0][0] / det],
            ];
            grads[1] = [inv[0][0], inv[0][1], 0.0];
            grads[2] = [inv[1][0], inv[1][1], 0.0];
            grads[0] = [-(grads[1][0] + grads[2][0]), -(grads[1][1] + grads[2][1]), 0.0];
        }
        _ => {
            let c = |k: usize| [p[k][0] - p[0][0], p[k][1] - p[0][1], p[k][2] - p[0][2]];
            let (e1, e2, e3) = (c(1), c(2), c(3));
            let j = [
                [e1[0], e2[0], e3[0]],
                [e1[1], e2[1], e3[1]],
                [e1[2], e2[2], e3[2]],
            ];
            let det = j[0][0] * (j[1][1] * j[2][2] - j[1][2] * j[2][1])
                - j[0][1] * (j[1][0] * j[2][2] - j[1][2] * j[2][0])
                + j[0][2] * (j[1][0] * j[2][1] - j[1][1] * j[2][0]);
            let cof = |r0: usize, r1: usize, c0: usize, c1: usize| {
                j[r0][c0] * j[r1][c1] - j[r0][c1] * j[r1][c0]
            };
            // inv[r][c] = cofactor(c, r) / det
            let inv = [
                [cof(1, 2, 1, 2) / det, -cof(0, 2, 1, 2) / det, cof(0, 1, 1, 2) / det],
                [-cof(1, 2, 0, 2) / det, cof(0, 2, 0, 2) / det, -cof(0, 1, 0, 2) / det],
                [cof(1, 2, 0, 1) / det, -cof(0, 2, 0, 1) / det, cof(0, 1, 0, 1) / det],
            ];
            for k in 0..3 {
                grads[k + 1] = inv[k];
            }
            for a in 0..3 {
                grads[0][a] = -(grads[1][a] + grads[2][a] + grads[3][a]);
            }
        }
    }
    grads
}

/// Element stiffness entry for hat functions i, j and components c, d with
/// weights `a` (divergence term) and `b` (shear term):
/// `vol * (b * (delta_cd g_i.g_j + g_i[d] g_j[c]) + a * g_i[c] g_j[d])`.
#[inline]
fn stiffness_entry(
    grads: &[[f64; 3]; 4],
    vol: f64,
    a: f64,
    b: f64,
    i: usize,
    c: usize,
    j: usize,
    d: usize,
) -> f64 {
    let gi = &grads[i];
    let gj = &grads[j];
    let dot = gi[0] * gj[0] + gi[1] * gj[1] + gi[2] * gj[2];
    let shear = if c == d { dot + gi[d] * gj[c] } else { gi[d] * gj[c] };
    vol * (b * shear + a * gi[c] * gj[d])
}

/// Stiffness matrix over all displacement unknowns, no boundary elimination
/// and no positivity requirement on the weights. Used as a linear operator,
/// never factorized.
#[derive(Debug, Clone)]
pub struct WeightedOperator {
    mesh_signature: u64,
    matrix: CscMatrix<f64>,
}

impl WeightedOperator {
    pub fn dof_count(&self) -> usize {
        self.matrix.ncols()
    }

    pub fn compatible_with(&self, mesh: &Mesh) -> bool {
        self.mesh_signature == mesh.signature()
    }

    /// y = K x over the full unknown vector.
    pub fn apply(&self, x: &[f64]) -> Result<Vec<f64>> {
        if x.len() != self.matrix.ncols() {
            return Err(CoreError::invalid(format!(
                "vector length {} does not match operator size {}",
                x.len(),
                self.matrix.ncols()
            )));
        }
        let mut y = vec![0.0; x.len()];
        for (i, j, v) in self.matrix.triplet_iter() {
            y[i] += v * x[j];
        }
        Ok(y)
    }
}

/// Assemble the stiffness operator for arbitrary per-element weights
/// `a` (divergence term) and `b` (shear term), over all unknowns.
pub fn assemble_weighted(mesh: &Mesh, a: &[f64], b: &[f64]) -> Result<WeightedOperator> {
    if a.len() != mesh.element_count() || b.len() != mesh.element_count() {
        return Err(CoreError::invalid(format!(
            "weight vectors have lengths {} and {}, mesh has {} elements",
            a.len(),
            b.len(),
            mesh.element_count()
        )));
    }
    let dim = mesh.dimension();
    let n = dim * mesh.vertex_count();
    let mut coo = CooMatrix::new(n, n);
    for e in 0..mesh.element_count() {
        if a[e] == 0.0 && b[e] == 0.0 {
            continue;
        }
        let grads = element_gradients(mesh, e);
        let vol = mesh.element_volume(e);
        let verts = mesh.element(e);
        for li in 0..=dim {
            for c in 0..dim {
                let gi = dim * verts[li] + c;
                for lj in 0..=dim {
                    for d in 0..dim {
                        let gj = dim * verts[lj] + d;
                        if gj < gi {
                            continue;
                        }
                        let v = stiffness_entry(&grads, vol, a[e], b[e], li, c, lj, d);
                        coo.push(gi, gj, v);
                        if gj > gi {
                            coo.push(gj, gi, v);
                        }
                    }
                }
            }
        }
    }
    Ok(WeightedOperator { mesh_signature: mesh.signature(), matrix: CscMatrix::from(&coo) })
}

/// Reduced stiffness system: clamped rows and columns eliminated, sparse
/// Cholesky factorization held for repeated solves.
pub struct StiffnessSystem {
    mesh_signature: u64,
    dimension: usize,
    vertex_count: usize,
    /// Free index -> full dof index.
    dof_of_free: Vec<usize>,
    matrix: CscMatrix<f64>,
    factorization: CscCholesky<f64>,
}

/// Assemble and factor the reduced stiffness system for a material field.
/// The mesh must be tagged so the clamped vertex set is defined.
pub fn assemble(mesh: &Mesh, material: &MaterialField) -> Result<StiffnessSystem> {
    material.check_mesh(mesh)?;
    let dim = mesh.dimension();
    let clamped = mesh.dirichlet_vertices()?;
    if clamped.is_empty() {
        return Err(CoreError::config(
            "no clamped vertices; the stiffness system would be singular",
        ));
    }
    let mut is_clamped = vec![false; mesh.vertex_count()];
    for &v in &clamped {
        is_clamped[v] = true;
    }

    let n_full = dim * mesh.vertex_count();
    let mut free_of_dof = vec![usize::MAX; n_full];
    let mut dof_of_free = Vec::with_capacity(n_full);
    for v in 0..mesh.vertex_count() {
        if is_clamped[v] {
            continue;
        }
        for c in 0..dim {
            let dof = dim * v + c;
            free_of_dof[dof] = dof_of_free.len();
            dof_of_free.push(dof);
        }
    }
    let n_free = dof_of_free.len();

    let mut coo = CooMatrix::new(n_free, n_free);
    for e in 0..mesh.element_count() {
        let grads = element_gradients(mesh, e);
        let vol = mesh.element_volume(e);
        let verts = mesh.element(e);
        let a = material.lambda(e);
        let b = material.mu(e);
        for li in 0..=dim {
            for c in 0..dim {
                let fi = free_of_dof[dim * verts[li] + c];
                if fi == usize::MAX {
                    continue;
                }
                for lj in 0..=dim {
                    for d in 0..dim {
                        let fj = free_of_dof[dim * verts[lj] + d];
                        if fj == usize::MAX || fj < fi {
                            continue;
                        }
                        let v = stiffness_entry(&grads, vol, a, b, li, c, lj, d);
                        coo.push(fi, fj, v);
                        if fj > fi {
                            coo.push(fj, fi, v);
                        }
                    }
                }
            }
        }
    }
    let matrix = CscMatrix::from(&coo);
    let factorization = CscCholesky::factor(&matrix).map_err(|err| {
        CoreError::config(format!("stiffness factorization failed: {err:?}"))
    })?;
    Ok(StiffnessSystem {
        mesh_signature: mesh.signature(),
        dimension: dim,
        vertex_count: mesh.vertex_count(),
        dof_of_free,
        matrix,
        factorization,
    })
}

impl StiffnessSystem {
    pub fn free_dof_count(&self) -> usize {
        self.dof_of_free.len()
    }

    pub fn compatible_with(&self, mesh: &Mesh) -> bool {
        self.mesh_signature == mesh.signature()
    }

    fn full_len(&self) -> usize {
        self.dimension * self.vertex_count
    }

    fn check_rhs(&self, rhs: &[f64]) -> Result<()> {
        if rhs.len() != self.full_len() {
            return Err(CoreError::invalid(format!(
                "right-hand side length {} does not match {} unknowns",
                rhs.len(),
                self.full_len()
            )));
        }
        Ok(())
    }

    fn restrict(&self, full: &[f64]) -> DVector<f64> {
        DVector::from_iterator(self.dof_of_free.len(), self.dof_of_free.iter().map(|&d| full[d]))
    }

    fn prolong(&self, free: &DVector<f64>) -> Vec<f64> {
        let mut out = vec![0.0; self.full_len()];
        for (k, &dof) in self.dof_of_free.iter().enumerate() {
            out[dof] = free[k];
        }
        out
    }

    fn apply_reduced(&self, x: &DVector<f64>) -> DVector<f64> {
        let mut y = DVector::zeros(x.len());
        for (i, j, v) in self.matrix.triplet_iter() {
            y[i] += v * x[j];
        }
        y
    }

    /// Residual-checked solve for one full-length right-hand side.
    pub fn solve(&self, rhs: &[f64]) -> Result<DisplacementField> {
        Ok(self.solve_many(std::slice::from_ref(&rhs.to_vec()))?.pop().unwrap())
    }

    /// Solve many right-hand sides against the shared factorization.
    pub fn solve_many(&self, rhss: &[Vec<f64>]) -> Result<Vec<DisplacementField>> {
        for rhs in rhss {
            self.check_rhs(rhs)?;
        }
        if rhss.is_empty() {
            return Ok(Vec::new());
        }
        let n_free = self.dof_of_free.len();
        let mut b = DMatrix::zeros(n_free, rhss.len());
        for (k, rhs) in rhss.iter().enumerate() {
            b.set_column(k, &self.restrict(rhs));
        }
        let x = self.factorization.solve(&b);

        let mut out = Vec::with_capacity(rhss.len());
        for k in 0..rhss.len() {
            let bk = b.column(k).into_owned();
            let mut xk = x.column(k).into_owned();
            let bnorm = bk.norm();
            let rnorm = (self.apply_reduced(&xk) - &bk).norm();
            if rnorm > SOLVE_RTOL * bnorm {
                // Direct solve fell short; polish with conjugate gradients.
                xk = self.cg_polish(&bk, xk, bnorm)?;
            }
            out.push(DisplacementField {
                mesh_signature: self.mesh_signature,
                dimension: self.dimension,
                values: self.prolong(&xk),
            });
        }
        Ok(out)
    }

    /// Jacobi-preconditioned conjugate gradients, warm-started from `x0`.
    fn cg_polish(&self, b: &DVector<f64>, x0: DVector<f64>, bnorm: f64) -> Result<DVector<f64>> {
        let n = b.len();
        let mut diag_inv = DVector::zeros(n);
        for (i, j, v) in self.matrix.triplet_iter() {
            if i == j {
                diag_inv[i] = 1.0 / v;
            }
        }
        let mut x = x0;
        let mut r = b - self.apply_reduced(&x);
        let mut z = r.component_mul(&diag_inv);
        let mut p = z.clone();
        let mut rz = r.dot(&z);
        let target = SOLVE_RTOL * bnorm;
        let cap = CG_ITER_FACTOR * n;
        for _ in 0..cap {
            if r.norm() <= target {
                return Ok(x);
            }
            let ap = self.apply_reduced(&p);
            let alpha = rz / p.dot(&ap);
            x += alpha * &p;
            r -= alpha * &ap;
            z = r.component_mul(&diag_inv);
            let rz_next = r.dot(&z);
            let beta = rz_next / rz;
            rz = rz_next;
            p = &z + beta * &p;
        }
        let achieved = r.norm() / bnorm.max(f64::MIN_POSITIVE);
        if r.norm() <= target {
            return Ok(x);
        }
        Err(CoreError::Solver {
            message: "conjugate gradients did not reach the residual tolerance".into(),
            residual: Some(achieved),
        })
    }
}

/// Exact integral of the traction against each hat function over the patch.
///
/// The integration is geometric: each boundary facet on the patch's face is
/// clipped against the patch rectangle, and the affine integrand is
/// integrated as area times centroid value. The result is exact for any mesh
/// resolution, whether or not facet edges line up with patch edges.
pub fn load_vector(mesh: &Mesh, load: &BoundaryLoad) -> Result<Vec<f64>> {
    let layout = mesh
        .layout()
        .ok_or_else(|| CoreError::config("mesh carries no patch layout; call tag_boundary first"))?;
    let dim = mesh.dimension();
    let (face, rect) = layout.patch_rect(load.patch_id)?;
    let tangents = face.tangent_axes(dim);

    let mut rhs = vec![0.0; dim * mesh.vertex_count()];
    for facet in mesh.boundary_facets().iter().filter(|f| f.face == face) {
        match dim {
            2 => accumulate_segment(mesh, facet, tangents[0], rect[0], &load.traction, &mut rhs),
            _ => accumulate_triangle(
                mesh,
                facet,
                [tangents[0], tangents[1]],
                &rect,
                &load.traction,
                &mut rhs,
            ),
        }
    }
    Ok(rhs)
}

fn accumulate_segment(
    mesh: &Mesh,
    facet: &BoundaryFacet,
    axis: usize,
    interval: [f64; 2],
    traction: &[f64; 3],
    rhs: &mut [f64],
) {
    let verts = mesh.facet_vertices(facet);
    let q0 = mesh.vertex(verts[0])[axis];
    let q1 = mesh.vertex(verts[1])[axis];
    let lo = q0.min(q1).max(interval[0]);
    let hi = q0.max(q1).min(interval[1]);
    if hi <= lo {
        return;
    }
    let mid = 0.5 * (lo + hi);
    let len = hi - lo;
    let phi = [(mid - q1) / (q0 - q1), (mid - q0) / (q1 - q0)];
    for (k, &v) in verts.iter().enumerate() {
        for c in 0..2 {
            rhs[2 * v + c] += traction[c] * len * phi[k];
        }
    }
}

fn accumulate_triangle(
    mesh: &Mesh,
    facet: &BoundaryFacet,
    tangents: [usize; 2],
    rect: &[[f64; 2]; 2],
    traction: &[f64; 3],
    rhs: &mut [f64],
) {
    let verts = mesh.facet_vertices(facet);
    let q: Vec<[f64; 2]> = verts
        .iter()
        .map(|&v| {
            let p = mesh.vertex(v);
            [p[tangents[0]], p[tangents[1]]]
        })
        .collect();

    let clipped = clip_to_rect(&q, rect);
    if clipped.len() < 3 {
        return;
    }
    let (area2, centroid) = polygon_area2_centroid(&clipped);
    let area = 0.5 * area2.abs();
    if area == 0.0 {
        return;
    }

    // Barycentric coordinates of the centroid in the facet triangle.
    let signed = |a: [f64; 2], b: [f64; 2], c: [f64; 2]| {
        (b[0] - a[0]) * (c[1] - a[1]) - (b[1] - a[1]) * (c[0] - a[0])
    };
    let total = signed(q[0], q[1], q[2]);
    let phi = [
        signed(centroid, q[1], q[2]) / total,
        signed(q[0], centroid, q[2]) / total,
        signed(q[0], q[1], centroid) / total,
    ];
    for (k, &v) in verts.iter().enumerate() {
        for c in 0..3 {
            rhs[3 * v + c] += traction[c] * area * phi[k];
        }
    }
}

/// Sutherland-Hodgman clip of a convex polygon against an axis rectangle.
fn clip_to_rect(poly: &[[f64; 2]], rect: &[[f64; 2]; 2]) -> Vec<[f64; 2]> {
    let mut cur: Vec<[f64; 2]> = poly.to_vec();
    // (axis, bound, keep_side): keep points with coord >= lo or <= hi.
    let planes = [
        (0, rect[0][0], 1.0),
        (0, rect[0][1], -1.0),
        (1, rect[1][0], 1.0),
        (1, rect[1][1], -1.0),
    ];
    for (axis, bound, side) in planes {
        if cur.is_empty() {
            break;
        }
        let inside = |p: &[f64; 2]| side * (p[axis] - bound) >= 0.0;
        let mut next = Vec::with_capacity(cur.len() + 1);
        for k in 0..cur.len() {
            let a = cur[k];
            let b = cur[(k + 1) % cur.len()];
            let ain = inside(&a);
            let bin = inside(&b);
            if ain {
                next.push(a);
            }
            if ain != bin {
                let t = (bound - a[axis]) / (b[axis] - a[axis]);
                let mut p = [a[0] + t * (b[0] - a[0]), a[1] + t * (b[1] - a[1])];
                p[axis] = bound;
                next.push(p);
            }
        }
        cur = next;
    }
    cur
}

/// Twice the signed area and the centroid of a simple polygon.
fn polygon_area2_centroid(poly: &[[f64; 2]]) -> (f64, [f64; 2]) {
    let mut area2 = 0.0;
    let mut cx = 0.0;
    let mut cy = 0.0;
    for k in 0..poly.len() {
        let a = poly[k];
        let b = poly[(k + 1) % poly.len()];
        let w = a[0] * b[1] - b[0] * a[1];
        area2 += w;
        cx += (a[0] + b[0]) * w;
        cy += (a[1] + b[1]) * w;
    }
    let c = if area2 != 0.0 { [cx / (3.0 * area2), cy / (3.0 * area2)] } else { [0.0, 0.0] };
    (area2, c)
}

/// Per-element symmetric gradient (six components, `xx yy zz yz xz xy`) and
/// divergence of a displacement field. In 2-D the out-of-plane entries are
/// zero.
pub fn element_strain(mesh: &Mesh, u: &DisplacementField, e: usize) -> ([f64; 6], f64) {
    let dim = mesh.dimension();
    let grads = element_gradients(mesh, e);
    let verts = mesh.element(e);
    // grad[a][b] = d u_a / d x_b
    let mut grad = [[0.0; 3]; 3];
    for (k, &v) in verts.iter().enumerate() {
        let uv = u.vertex_value(v);
        for a in 0..dim {
            for b in 0..3 {
                grad[a][b] += uv[a] * grads[k][b];
            }
        }
    }
    let s = [
        grad[0][0],
        grad[1][1],
        grad[2][2],
        0.5 * (grad[1][2] + grad[2][1]),
        0.5 * (grad[0][2] + grad[2][0]),
        0.5 * (grad[0][1] + grad[1][0]),
    ];
    (s, grad[0][0] + grad[1][1] + grad[2][2])
}

/// Frobenius contraction of two symmetric strains in six-component storage.
#[inline]
pub fn strain_contract(s: &[f64; 6], t: &[f64; 6]) -> f64 {
    s[0] * t[0] + s[1] * t[1] + s[2] * t[2] + 2.0 * (s[3] * t[3] + s[4] * t[4] + s[5] * t[5])
}

/// The energy bilinear form with arbitrary per-element weights:
/// sum over elements of `vol_e (2 b_e strain(u):strain(v) + a_e div(u) div(v))`.
pub fn strain_energy_product(
    mesh: &Mesh,
    a: &[f64],
    b: &[f64],
    u: &DisplacementField,
    v: &DisplacementField,
) -> Result<f64> {
    if a.len() != mesh.element_count() || b.len() != mesh.element_count() {
        return Err(CoreError::invalid(format!(
            "weight vectors have lengths {} and {}, mesh has {} elements",
            a.len(),
            b.len(),
            mesh.element_count()
        )));
    }
    if !u.compatible_with(mesh) || !v.compatible_with(mesh) {
        return Err(CoreError::invalid("displacement fields belong to a different mesh"));
    }
    let mut total = 0.0;
    for e in 0..mesh.element_count() {
        if a[e] == 0.0 && b[e] == 0.0 {
            continue;
        }
        let (su, du) = element_strain(mesh, u, e);
        let (sv, dv) = element_strain(mesh, v, e);
        total += mesh.element_volume(e) * (2.0 * b[e] * strain_contract(&su, &sv) + a[e] * du * dv);
    }
    Ok(total)
}
