//! Structured triangulations of the two rectangular subdomains.
//!
//! The unit square is cut at `y = split_y` into a lower fluid part
//! `[0,1] x [0,split_y]` and an upper solid part `[0,1] x [split_y,1]`.
//! Every grid square is split along the same diagonal, so the two
//! triangulations share their vertices on the interface.

use std::fmt::Write as _;

use crate::error::{Error, Result};

pub type Point = [f64; 2];

/// Which side of the interface a piece of the mesh belongs to.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Subdomain {
    Fluid,
    Solid,
}

impl Subdomain {
    pub fn name(self) -> &'static str {
        match self {
            Subdomain::Fluid => "fluid",
            Subdomain::Solid => "solid",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum BoundaryTag {
    DirichletFluid,
    NeumannFluid,
    DirichletSolid,
    NeumannSolid,
    Interface,
}

impl BoundaryTag {
    pub fn name(self) -> &'static str {
        match self {
            BoundaryTag::DirichletFluid => "dirichlet_f",
            BoundaryTag::NeumannFluid => "neumann_f",
            BoundaryTag::DirichletSolid => "dirichlet_s",
            BoundaryTag::NeumannSolid => "neumann_s",
            BoundaryTag::Interface => "interface",
        }
    }

    pub fn is_dirichlet_for(self, side: Subdomain) -> bool {
        matches!(
            (self, side),
            (BoundaryTag::DirichletFluid, Subdomain::Fluid)
                | (BoundaryTag::DirichletSolid, Subdomain::Solid)
        )
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BoundaryEdge {
    pub nodes: [usize; 2],
    pub tag: BoundaryTag,
}

/// Interface segment between two consecutive interface vertices.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct InterfaceEdge {
    pub a: usize,
    pub b: usize,
    pub length: f64,
}

/// Conforming triangulation of the fluid and solid rectangles.
#[derive(Debug, Clone)]
pub struct TwoDomainMesh {
    pub vertices: Vec<Point>,
    pub triangles_f: Vec<[usize; 3]>,
    pub triangles_s: Vec<[usize; 3]>,
    pub boundary_edges: Vec<BoundaryEdge>,
    /// Vertex indices on the interface, ordered by increasing x.
    pub interface_nodes: Vec<usize>,
    pub split_y: f64,
    pub nx: usize,
    /// Number of grid rows below the interface.
    pub rows_f: usize,
}

/// Builds the uniform criss triangulation with `h = 1/nx`.
///
/// `split_y * nx` must be an integer so the interface falls on a grid line.
/// How each grid square is cut into two triangles.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Diagonal {
    /// Every square cut along its lower-left to upper-right diagonal.
    #[default]
    Uniform,
    /// Cuts reflected across `x₁ = 1/2`, giving a mesh symmetric under
    /// `x₁ ↦ 1 − x₁` (needs even `nx`).
    Mirrored,
}

pub fn build_two_domain_mesh(nx: usize, split_y: f64) -> Result<TwoDomainMesh> {
    build_two_domain_mesh_with(nx, split_y, Diagonal::Uniform)
}

pub fn build_two_domain_mesh_with(nx: usize, split_y: f64, diagonal: Diagonal) -> Result<TwoDomainMesh> {
    if diagonal == Diagonal::Mirrored && nx % 2 != 0 {
        return Err(Error::config(format!("a mirrored mesh needs even nx, got {nx}")));
    }
    if nx < 2 {
        return Err(Error::config(format!("nx must be at least 2, got {nx}")));
    }
    if !(split_y > 0.0 && split_y < 1.0) {
        return Err(Error::config(format!(
            "split_y must lie in (0,1), got {split_y}"
        )));
    }
    let rows = split_y * nx as f64;
    let rows_f = rows.round();
    if (rows - rows_f).abs() > 1e-9 * nx as f64 || rows_f < 1.0 || rows_f >= nx as f64 {
        return Err(Error::config(format!(
            "split_y * nx = {rows} is not an interior grid line"
        )));
    }
    let rows_f = rows_f as usize;
    let n1 = nx + 1;
    let vid = |i: usize, j: usize| j * n1 + i;

    let mut vertices = Vec::with_capacity(n1 * n1);
    for j in 0..=nx {
        for i in 0..=nx {
            vertices.push([i as f64 / nx as f64, j as f64 / nx as f64]);
        }
    }

    let mut triangles_f = Vec::with_capacity(2 * nx * rows_f);
    let mut triangles_s = Vec::with_capacity(2 * nx * (nx - rows_f));
    for j in 0..nx {
        let target = if j < rows_f {
            &mut triangles_f
        } else {
            &mut triangles_s
        };
        for i in 0..nx {
            let v00 = vid(i, j);
            let v10 = vid(i + 1, j);
            let v11 = vid(i + 1, j + 1);
            let v01 = vid(i, j + 1);
            if diagonal == Diagonal::Mirrored && 2 * i >= nx {
                target.push([v00, v10, v01]);
                target.push([v10, v11, v01]);
            } else {
                target.push([v00, v10, v11]);
                target.push([v00, v11, v01]);
            }
        }
    }

    let mut boundary_edges = Vec::with_capacity(4 * nx + nx);
    for i in 0..nx {
        boundary_edges.push(BoundaryEdge {
            nodes: [vid(i, 0), vid(i + 1, 0)],
            tag: BoundaryTag::DirichletFluid,
        });
    }
    for i in 0..nx {
        boundary_edges.push(BoundaryEdge {
            nodes: [vid(i, nx), vid(i + 1, nx)],
            tag: BoundaryTag::DirichletSolid,
        });
    }
    for j in 0..nx {
        let tag = if j < rows_f {
            BoundaryTag::NeumannFluid
        } else {
            BoundaryTag::NeumannSolid
        };
        boundary_edges.push(BoundaryEdge {
            nodes: [vid(0, j), vid(0, j + 1)],
            tag,
        });
        boundary_edges.push(BoundaryEdge {
            nodes: [vid(nx, j), vid(nx, j + 1)],
            tag,
        });
    }
    for i in 0..nx {
        boundary_edges.push(BoundaryEdge {
            nodes: [vid(i, rows_f), vid(i + 1, rows_f)],
            tag: BoundaryTag::Interface,
        });
    }

    let interface_nodes = (0..=nx).map(|i| vid(i, rows_f)).collect();

    Ok(TwoDomainMesh {
        vertices,
        triangles_f,
        triangles_s,
        boundary_edges,
        interface_nodes,
        split_y,
        nx,
        rows_f,
    })
}

impl TwoDomainMesh {
    pub fn h(&self) -> f64 {
        1.0 / self.nx as f64
    }

    pub fn triangles(&self, side: Subdomain) -> &[[usize; 3]] {
        match side {
            Subdomain::Fluid => &self.triangles_f,
            Subdomain::Solid => &self.triangles_s,
        }
    }

    /// Twice the signed area of a triangle.
    pub fn signed_area2(&self, tri: &[usize; 3]) -> f64 {
        let [a, b, c] = tri.map(|v| self.vertices[v]);
        (b[0] - a[0]) * (c[1] - a[1]) - (c[0] - a[0]) * (b[1] - a[1])
    }

    pub fn area(&self, side: Subdomain) -> f64 {
        self.triangles(side)
            .iter()
            .map(|t| 0.5 * self.signed_area2(t))
            .sum()
    }

    /// Interface segments ordered by increasing x.
    pub fn interface_edges(&self) -> Vec<InterfaceEdge> {
        self.interface_nodes
            .windows(2)
            .map(|w| {
                let (pa, pb) = (self.vertices[w[0]], self.vertices[w[1]]);
                InterfaceEdge {
                    a: w[0],
                    b: w[1],
                    length: ((pb[0] - pa[0]).powi(2) + (pb[1] - pa[1]).powi(2)).sqrt(),
                }
            })
            .collect()
    }

    pub fn edges_with_tag(&self, tag: BoundaryTag) -> impl Iterator<Item = &BoundaryEdge> {
        self.boundary_edges.iter().filter(move |e| e.tag == tag)
    }

    /// Plain-text dump: vertices, then triangles per side, then tagged edges.
    pub fn dump(&self) -> String {
        let mut out = String::new();
        let _ = writeln!(out, "vertices {}", self.vertices.len());
        for (i, v) in self.vertices.iter().enumerate() {
            let _ = writeln!(out, "v {i} {} {}", v[0], v[1]);
        }
        for side in [Subdomain::Fluid, Subdomain::Solid] {
            let tris = self.triangles(side);
            let _ = writeln!(out, "triangles {} {}", side.name(), tris.len());
            for t in tris {
                let _ = writeln!(out, "t {} {} {}", t[0], t[1], t[2]);
            }
        }
        let _ = writeln!(out, "edges {}", self.boundary_edges.len());
        for e in &self.boundary_edges {
            let _ = writeln!(out, "e {} {} {}", e.nodes[0], e.nodes[1], e.tag.name());
        }
        out
    }
}
