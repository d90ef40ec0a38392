//! Lagrange P1/P2 spaces on one subdomain, assembly of the mass, stiffness
//! and interface forms, and the error norms used by the diagnostics.
//!
//! The multiplier space is the common trace space of the fluid and solid
//! spaces on the interface: a multiplier is a vector indexed like
//! [`FeSpace::interface_dofs`].

use std::collections::HashMap;

use crate::error::{Error, Result};
use crate::mesh::{BoundaryTag, Point, Subdomain, TwoDomainMesh};
use crate::quadrature::{GaussLegendre, QuadratureRule};
use crate::sparse::{SparseMatrix, TripletBuilder};

/// Points per interface segment for all 1D integrals.
const INTERFACE_GAUSS_POINTS: usize = 5;

#[derive(Debug, Clone)]
struct Cell {
    verts: [Point; 3],
    dofs: [usize; 6],
    /// Gradients of the barycentric coordinates.
    grad_bary: [[f64; 2]; 3],
    area: f64,
}

#[derive(Debug, Clone)]
struct InterfaceCell {
    x0: f64,
    x1: f64,
    /// Space dofs at (left, right, midpoint); the midpoint only for P2.
    dofs: [usize; 3],
    /// Positions of the same dofs in the trace numbering.
    trace: [usize; 3],
}

/// Scalar Lagrange finite-element space on one subdomain.
#[derive(Debug, Clone)]
pub struct FeSpace {
    pub side: Subdomain,
    pub order: usize,
    pub dof_coords: Vec<Point>,
    pub dirichlet_mask: Vec<bool>,
    /// Dofs on the interface, ordered by increasing x.
    pub interface_dofs: Vec<usize>,
    pub split_y: f64,
    cells: Vec<Cell>,
    interface_cells: Vec<InterfaceCell>,
}

impl FeSpace {
    pub fn new(mesh: &TwoDomainMesh, side: Subdomain, order: usize) -> Result<Self> {
        if order != 1 && order != 2 {
            return Err(Error::config(format!(
                "finite-element order must be 1 or 2, got {order}"
            )));
        }
        let tris = mesh.triangles(side);

        let mut used: Vec<usize> = tris.iter().flatten().copied().collect();
        used.sort_unstable();
        used.dedup();
        let mut vertex_dof = HashMap::with_capacity(used.len());
        let mut dof_coords = Vec::with_capacity(used.len());
        for &v in &used {
            vertex_dof.insert(v, dof_coords.len());
            dof_coords.push(mesh.vertices[v]);
        }

        let mut edge_dof: HashMap<(usize, usize), usize> = HashMap::new();
        let mut cells = Vec::with_capacity(tris.len());
        for t in tris {
            let verts = t.map(|v| mesh.vertices[v]);
            let mut dofs = [usize::MAX; 6];
            for k in 0..3 {
                dofs[k] = vertex_dof[&t[k]];
            }
            if order == 2 {
                for (k, (a, b)) in [(0, 1), (1, 2), (2, 0)].into_iter().enumerate() {
                    let key = (t[a].min(t[b]), t[a].max(t[b]));
                    let next = dof_coords.len();
                    let d = *edge_dof.entry(key).or_insert(next);
                    if d == next {
                        dof_coords.push(midpoint(verts[a], verts[b]));
                    }
                    dofs[3 + k] = d;
                }
            }
            let (grad_bary, area) = barycentric_gradients(&verts);
            cells.push(Cell {
                verts,
                dofs,
                grad_bary,
                area,
            });
        }

        let mut dirichlet_mask = vec![false; dof_coords.len()];
        for e in &mesh.boundary_edges {
            if !e.tag.is_dirichlet_for(side) {
                continue;
            }
            let [a, b] = e.nodes;
            for v in [a, b] {
                if let Some(&d) = vertex_dof.get(&v) {
                    dirichlet_mask[d] = true;
                }
            }
            if order == 2 {
                if let Some(&d) = edge_dof.get(&(a.min(b), a.max(b))) {
                    dirichlet_mask[d] = true;
                }
            }
        }

        let mut interface_cells = Vec::new();
        let mut interface_dofs = Vec::new();
        for (k, e) in mesh.interface_edges().iter().enumerate() {
            let left = vertex_dof[&e.a];
            let right = vertex_dof[&e.b];
            let (mid, trace) = if order == 2 {
                let mid = edge_dof[&(e.a.min(e.b), e.a.max(e.b))];
                (mid, [2 * k, 2 * k + 2, 2 * k + 1])
            } else {
                (usize::MAX, [k, k + 1, usize::MAX])
            };
            if k == 0 {
                interface_dofs.push(left);
            }
            if order == 2 {
                interface_dofs.push(mid);
            }
            interface_dofs.push(right);
            interface_cells.push(InterfaceCell {
                x0: mesh.vertices[e.a][0],
                x1: mesh.vertices[e.b][0],
                dofs: [left, right, mid],
                trace,
            });
        }
        debug_assert!(mesh
            .edges_with_tag(BoundaryTag::Interface)
            .all(|e| vertex_dof.contains_key(&e.nodes[0])));

        Ok(Self {
            side,
            order,
            dof_coords,
            dirichlet_mask,
            interface_dofs,
            split_y: mesh.split_y,
            cells,
            interface_cells,
        })
    }

    pub fn ndofs(&self) -> usize {
        self.dof_coords.len()
    }

    /// Number of trace (multiplier) unknowns.
    pub fn ninterface(&self) -> usize {
        self.interface_dofs.len()
    }

    pub fn ncells(&self) -> usize {
        self.cells.len()
    }

    fn local_dofs(&self) -> usize {
        if self.order == 1 {
            3
        } else {
            6
        }
    }

    fn volume_rule(&self) -> QuadratureRule {
        QuadratureRule::triangle(if self.order == 1 { 4 } else { 6 })
    }

    pub fn interpolate(&self, f: impl Fn(Point) -> f64) -> Vec<f64> {
        self.dof_coords.iter().map(|&p| f(p)).collect()
    }

    /// Nodal interpolant on the interface, indexed like `interface_dofs`.
    pub fn interpolate_trace(&self, g: impl Fn(f64) -> f64) -> Vec<f64> {
        self.interface_dofs
            .iter()
            .map(|&d| g(self.dof_coords[d][0]))
            .collect()
    }

    pub fn trace(&self, coeffs: &[f64]) -> Vec<f64> {
        self.interface_dofs.iter().map(|&d| coeffs[d]).collect()
    }

    /// Zero vector with `trace` written into the interface dofs.
    pub fn lift(&self, trace: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; self.ndofs()];
        for (&d, &v) in self.interface_dofs.iter().zip(trace) {
            out[d] = v;
        }
        out
    }

    pub fn interface_x(&self) -> Vec<f64> {
        self.interface_dofs
            .iter()
            .map(|&d| self.dof_coords[d][0])
            .collect()
    }

    fn eval_basis(&self, bary: &[f64; 3], out: &mut [f64; 6]) {
        let [l0, l1, l2] = *bary;
        if self.order == 1 {
            out[..3].copy_from_slice(bary);
        } else {
            out[0] = l0 * (2.0 * l0 - 1.0);
            out[1] = l1 * (2.0 * l1 - 1.0);
            out[2] = l2 * (2.0 * l2 - 1.0);
            out[3] = 4.0 * l0 * l1;
            out[4] = 4.0 * l1 * l2;
            out[5] = 4.0 * l2 * l0;
        }
    }

    fn eval_grads(&self, cell: &Cell, bary: &[f64; 3], out: &mut [[f64; 2]; 6]) {
        let g = &cell.grad_bary;
        if self.order == 1 {
            out[..3].copy_from_slice(g);
        } else {
            for i in 0..3 {
                let s = 4.0 * bary[i] - 1.0;
                out[i] = [s * g[i][0], s * g[i][1]];
            }
            for (k, (a, b)) in [(0, 1), (1, 2), (2, 0)].into_iter().enumerate() {
                out[3 + k] = [
                    4.0 * (bary[b] * g[a][0] + bary[a] * g[b][0]),
                    4.0 * (bary[b] * g[a][1] + bary[a] * g[b][1]),
                ];
            }
        }
    }

    /// Constant elementwise Hessians `[xx, xy, yy]` of the basis functions.
    fn eval_hessians(&self, cell: &Cell, out: &mut [[f64; 3]; 6]) {
        let g = &cell.grad_bary;
        if self.order == 1 {
            out[..3].fill([0.0; 3]);
            return;
        }
        let outer = |a: &[f64; 2], b: &[f64; 2]| {
            [
                a[0] * b[0] + b[0] * a[0],
                a[0] * b[1] + b[0] * a[1],
                a[1] * b[1] + b[1] * a[1],
            ]
        };
        for i in 0..3 {
            let o = outer(&g[i], &g[i]);
            out[i] = [2.0 * o[0], 2.0 * o[1], 2.0 * o[2]];
        }
        for (k, (a, b)) in [(0, 1), (1, 2), (2, 0)].into_iter().enumerate() {
            let o = outer(&g[a], &g[b]);
            out[3 + k] = [4.0 * o[0], 4.0 * o[1], 4.0 * o[2]];
        }
    }

    /// Evaluates the finite-element function and its gradient at physical
    /// point `p` inside cell `c` (used by tests and probes).
    pub fn eval_in_cell(&self, c: usize, coeffs: &[f64], p: Point) -> (f64, [f64; 2]) {
        let cell = &self.cells[c];
        let bary = to_barycentric(cell, p);
        let mut phi = [0.0; 6];
        let mut grad = [[0.0; 2]; 6];
        self.eval_basis(&bary, &mut phi);
        self.eval_grads(cell, &bary, &mut grad);
        let mut v = 0.0;
        let mut gv = [0.0; 2];
        for k in 0..self.local_dofs() {
            let ck = coeffs[cell.dofs[k]];
            v += ck * phi[k];
            gv[0] += ck * grad[k][0];
            gv[1] += ck * grad[k][1];
        }
        (v, gv)
    }

    /// Index of a cell containing `p`.
    pub fn locate(&self, p: Point) -> Option<usize> {
        self.cells.iter().position(|c| {
            let b = to_barycentric(c, p);
            b.iter().all(|&l| l >= -1e-12)
        })
    }
}

fn midpoint(a: Point, b: Point) -> Point {
    [0.5 * (a[0] + b[0]), 0.5 * (a[1] + b[1])]
}

fn barycentric_gradients(v: &[Point; 3]) -> ([[f64; 2]; 3], f64) {
    let det = (v[1][0] - v[0][0]) * (v[2][1] - v[0][1]) - (v[2][0] - v[0][0]) * (v[1][1] - v[0][1]);
    let g = [
        [(v[1][1] - v[2][1]) / det, (v[2][0] - v[1][0]) / det],
        [(v[2][1] - v[0][1]) / det, (v[0][0] - v[2][0]) / det],
        [(v[0][1] - v[1][1]) / det, (v[1][0] - v[0][0]) / det],
    ];
    (g, 0.5 * det.abs())
}

fn to_barycentric(cell: &Cell, p: Point) -> [f64; 3] {
    let v0 = cell.verts[0];
    let g = &cell.grad_bary;
    let d = [p[0] - v0[0], p[1] - v0[1]];
    let l1 = g[1][0] * d[0] + g[1][1] * d[1];
    let l2 = g[2][0] * d[0] + g[2][1] * d[1];
    [1.0 - l1 - l2, l1, l2]
}

fn physical(cell: &Cell, bary: &[f64; 3]) -> Point {
    let v = &cell.verts;
    [
        bary[0] * v[0][0] + bary[1] * v[1][0] + bary[2] * v[2][0],
        bary[0] * v[0][1] + bary[1] * v[1][1] + bary[2] * v[2][1],
    ]
}

/// Mass matrix `(phi_j, phi_i)` over the subdomain.
pub fn assemble_mass(space: &FeSpace) -> SparseMatrix {
    let rule = space.volume_rule();
    let nl = space.local_dofs();
    let mut b = TripletBuilder::with_capacity(space.ndofs(), space.ndofs(), space.ncells() * nl * nl);
    let mut phi = [0.0; 6];
    for cell in &space.cells {
        let mut local = [[0.0; 6]; 6];
        for (bary, w) in rule.points.iter().zip(&rule.weights) {
            space.eval_basis(bary, &mut phi);
            let wa = w * cell.area;
            for i in 0..nl {
                for j in 0..nl {
                    local[i][j] += wa * phi[i] * phi[j];
                }
            }
        }
        push_local(&mut b, &cell.dofs, &local, nl);
    }
    b.build()
}

/// Stiffness matrix `viscosity * (grad phi_j, grad phi_i)`.
pub fn assemble_stiffness(space: &FeSpace, viscosity: f64) -> SparseMatrix {
    let rule = space.volume_rule();
    let nl = space.local_dofs();
    let mut b = TripletBuilder::with_capacity(space.ndofs(), space.ndofs(), space.ncells() * nl * nl);
    let mut grad = [[0.0; 2]; 6];
    for cell in &space.cells {
        let mut local = [[0.0; 6]; 6];
        for (bary, w) in rule.points.iter().zip(&rule.weights) {
            space.eval_grads(cell, bary, &mut grad);
            let wa = viscosity * w * cell.area;
            for i in 0..nl {
                for j in 0..nl {
                    local[i][j] += wa * (grad[i][0] * grad[j][0] + grad[i][1] * grad[j][1]);
                }
            }
        }
        push_local(&mut b, &cell.dofs, &local, nl);
    }
    b.build()
}

fn push_local(b: &mut TripletBuilder, dofs: &[usize; 6], local: &[[f64; 6]; 6], nl: usize) {
    for i in 0..nl {
        for j in 0..nl {
            b.push(dofs[i], dofs[j], local[i][j]);
        }
    }
}

/// 1D Lagrange basis on an interface segment at parameter `s`, in the
/// (left, right, midpoint) order.
fn interface_basis(order: usize, s: f64) -> [f64; 3] {
    if order == 1 {
        [1.0 - s, s, 0.0]
    } else {
        [(1.0 - s) * (1.0 - 2.0 * s), s * (2.0 * s - 1.0), 4.0 * s * (1.0 - s)]
    }
}

fn check_matching(a: &FeSpace, b: &FeSpace) -> Result<()> {
    if a.order != b.order {
        return Err(Error::config(format!(
            "interface spaces have different orders ({} vs {})",
            a.order, b.order
        )));
    }
    if a.interface_cells.len() != b.interface_cells.len()
        || a
            .interface_cells
            .iter()
            .zip(&b.interface_cells)
            .any(|(p, q)| p.x0 != q.x0 || p.x1 != q.x1)
    {
        return Err(Error::config("interface meshes do not match"));
    }
    Ok(())
}

/// `∫_Σ phi_j psi_i ds`: rows over `space_row` dofs, columns over
/// `space_col` dofs.
pub fn assemble_interface_mass(space_row: &FeSpace, space_col: &FeSpace) -> Result<SparseMatrix> {
    check_matching(space_row, space_col)?;
    let nl = space_row.order + 1;
    let gl = GaussLegendre::new(INTERFACE_GAUSS_POINTS);
    let mut b = TripletBuilder::new(space_row.ndofs(), space_col.ndofs());
    for (rc, cc) in space_row.interface_cells.iter().zip(&space_col.interface_cells) {
        let len = rc.x1 - rc.x0;
        let local = interface_local_mass(space_row.order, len, &gl);
        for i in 0..nl {
            for j in 0..nl {
                b.push(rc.dofs[i], cc.dofs[j], local[i][j]);
            }
        }
    }
    Ok(b.build())
}

fn interface_local_mass(order: usize, len: f64, gl: &GaussLegendre) -> [[f64; 3]; 3] {
    let mut local = [[0.0; 3]; 3];
    for (s, w) in gl.points.iter().zip(&gl.weights) {
        let phi = interface_basis(order, *s);
        for i in 0..3 {
            for j in 0..3 {
                local[i][j] += w * len * phi[i] * phi[j];
            }
        }
    }
    local
}

/// Interface mass on the trace space (`m x m`), the Gram matrix of the
/// multiplier basis.
pub fn assemble_trace_mass(space: &FeSpace) -> SparseMatrix {
    let m = space.ninterface();
    let nl = space.order + 1;
    let gl = GaussLegendre::new(INTERFACE_GAUSS_POINTS);
    let mut b = TripletBuilder::new(m, m);
    for c in &space.interface_cells {
        let local = interface_local_mass(space.order, c.x1 - c.x0, &gl);
        for i in 0..nl {
            for j in 0..nl {
                b.push(c.trace[i], c.trace[j], local[i][j]);
            }
        }
    }
    b.build()
}

/// Pairing `<mu_j, phi_i>_Σ` of trace functions with space functions
/// (`ndofs x m`).
pub fn assemble_trace_pairing(space: &FeSpace) -> SparseMatrix {
    let nl = space.order + 1;
    let gl = GaussLegendre::new(INTERFACE_GAUSS_POINTS);
    let mut b = TripletBuilder::new(space.ndofs(), space.ninterface());
    for c in &space.interface_cells {
        let local = interface_local_mass(space.order, c.x1 - c.x0, &gl);
        for i in 0..nl {
            for j in 0..nl {
                b.push(c.dofs[i], c.trace[j], local[i][j]);
            }
        }
    }
    b.build()
}

/// Load vector `(f(t, ·), phi_i)`.
pub fn assemble_load(space: &FeSpace, f: impl Fn(f64, Point) -> f64, t: f64) -> Vec<f64> {
    assemble_density_load(space, |p| f(t, p))
}

/// Load vector `(g, phi_i)` for a purely spatial density.
pub fn assemble_density_load(space: &FeSpace, g: impl Fn(Point) -> f64) -> Vec<f64> {
    let rule = space.volume_rule();
    let nl = space.local_dofs();
    let mut out = vec![0.0; space.ndofs()];
    let mut phi = [0.0; 6];
    for cell in &space.cells {
        for (bary, w) in rule.points.iter().zip(&rule.weights) {
            let x = physical(cell, bary);
            let gv = g(x) * w * cell.area;
            if gv == 0.0 {
                continue;
            }
            space.eval_basis(bary, &mut phi);
            for i in 0..nl {
                out[cell.dofs[i]] += gv * phi[i];
            }
        }
    }
    out
}

/// Interface load `<g, phi_i>_Σ` over the space dofs; `g` takes `x1`.
pub fn assemble_interface_load(space: &FeSpace, g: impl Fn(f64) -> f64) -> Vec<f64> {
    let mut out = vec![0.0; space.ndofs()];
    for_each_interface_qp(space, |c, x, wl, phi| {
        let gv = g(x) * wl;
        for i in 0..space.order + 1 {
            out[c.dofs[i]] += gv * phi[i];
        }
    });
    out
}

/// Interface load against the trace basis (`m` entries).
pub fn assemble_trace_load(space: &FeSpace, g: impl Fn(f64) -> f64) -> Vec<f64> {
    let mut out = vec![0.0; space.ninterface()];
    for_each_interface_qp(space, |c, x, wl, phi| {
        let gv = g(x) * wl;
        for i in 0..space.order + 1 {
            out[c.trace[i]] += gv * phi[i];
        }
    });
    out
}

fn for_each_interface_qp(space: &FeSpace, mut f: impl FnMut(&InterfaceCell, f64, f64, &[f64; 3])) {
    let gl = GaussLegendre::new(INTERFACE_GAUSS_POINTS);
    for c in &space.interface_cells {
        let len = c.x1 - c.x0;
        for (s, w) in gl.points.iter().zip(&gl.weights) {
            let phi = interface_basis(space.order, *s);
            f(c, c.x0 + s * len, w * len, &phi);
        }
    }
}

/// `‖exact − Σ c_i phi_i‖` in L² over the subdomain.
pub fn l2_diff(space: &FeSpace, coeffs: &[f64], exact: impl Fn(Point) -> f64) -> f64 {
    let rule = QuadratureRule::triangle(6);
    let nl = space.local_dofs();
    let mut phi = [0.0; 6];
    let mut sum = 0.0;
    for cell in &space.cells {
        let mut local = 0.0;
        for (bary, w) in rule.points.iter().zip(&rule.weights) {
            space.eval_basis(bary, &mut phi);
            let uh: f64 = (0..nl).map(|k| coeffs[cell.dofs[k]] * phi[k]).sum();
            let e = exact(physical(cell, bary)) - uh;
            local += w * e * e;
        }
        sum += local * cell.area;
    }
    sum.max(0.0).sqrt()
}

/// L² error at time `t`.
pub fn l2_error(space: &FeSpace, coeffs: &[f64], exact: impl Fn(f64, Point) -> f64, t: f64) -> f64 {
    l2_diff(space, coeffs, |p| exact(t, p))
}

/// `‖∇exact − ∇(Σ c_i phi_i)‖` in L².
pub fn h1_semi_diff(space: &FeSpace, coeffs: &[f64], exact_grad: impl Fn(Point) -> [f64; 2]) -> f64 {
    let rule = QuadratureRule::triangle(6);
    let nl = space.local_dofs();
    let mut grad = [[0.0; 2]; 6];
    let mut sum = 0.0;
    for cell in &space.cells {
        let mut local = 0.0;
        for (bary, w) in rule.points.iter().zip(&rule.weights) {
            space.eval_grads(cell, bary, &mut grad);
            let mut gh = [0.0; 2];
            for k in 0..nl {
                let c = coeffs[cell.dofs[k]];
                gh[0] += c * grad[k][0];
                gh[1] += c * grad[k][1];
            }
            let ge = exact_grad(physical(cell, bary));
            local += w * ((ge[0] - gh[0]).powi(2) + (ge[1] - gh[1]).powi(2));
        }
        sum += local * cell.area;
    }
    sum.max(0.0).sqrt()
}

pub fn h1_semi_error(
    space: &FeSpace,
    coeffs: &[f64],
    exact_gradient: impl Fn(f64, Point) -> [f64; 2],
    t: f64,
) -> f64 {
    h1_semi_diff(space, coeffs, |p| exact_gradient(t, p))
}

/// Broken H² seminorm of `exact − Σ c_i phi_i`; Hessians as `[xx, xy, yy]`.
///
/// P1 functions have vanishing elementwise Hessians, so for P1 this is the
/// norm of the exact Hessian alone.
pub fn broken_h2_diff(space: &FeSpace, coeffs: &[f64], exact_hessian: impl Fn(Point) -> [f64; 3]) -> f64 {
    let rule = QuadratureRule::triangle(6);
    let nl = space.local_dofs();
    let mut hess = [[0.0; 3]; 6];
    let mut sum = 0.0;
    for cell in &space.cells {
        space.eval_hessians(cell, &mut hess);
        let mut hh = [0.0; 3];
        for k in 0..nl {
            let c = coeffs[cell.dofs[k]];
            for r in 0..3 {
                hh[r] += c * hess[k][r];
            }
        }
        let mut local = 0.0;
        for (bary, w) in rule.points.iter().zip(&rule.weights) {
            let he = exact_hessian(physical(cell, bary));
            let d = [he[0] - hh[0], he[1] - hh[1], he[2] - hh[2]];
            local += w * (d[0] * d[0] + 2.0 * d[1] * d[1] + d[2] * d[2]);
        }
        sum += local * cell.area;
    }
    sum.max(0.0).sqrt()
}

pub fn broken_h2_seminorm_diff(
    space: &FeSpace,
    coeffs: &[f64],
    exact_hessian: impl Fn(f64, Point) -> [f64; 3],
    t: f64,
) -> f64 {
    broken_h2_diff(space, coeffs, |p| exact_hessian(t, p))
}

/// `‖exact − Σ c_j mu_j‖_{L²(Σ)}` for trace coefficients.
pub fn sigma_l2_diff(space: &FeSpace, trace_coeffs: &[f64], exact: impl Fn(f64) -> f64) -> f64 {
    let mut sum = 0.0;
    for_each_interface_qp(space, |c, x, wl, phi| {
        let vh: f64 = (0..space.order + 1).map(|i| trace_coeffs[c.trace[i]] * phi[i]).sum();
        let e = exact(x) - vh;
        sum += wl * e * e;
    });
    sum.max(0.0).sqrt()
}

/// `‖Σ c_j mu_j‖_{L²(Σ)}`.
pub fn sigma_l2_norm(space: &FeSpace, trace_coeffs: &[f64]) -> f64 {
    sigma_l2_diff(space, trace_coeffs, |_| 0.0)
}
