//! Time-stepping drivers: the loosely coupled Robin-Robin splitting, the
//! improved variant whose levels 1-3 are solved as one coupled block, and a
//! monolithic backward-Euler reference.
//!
//! All three share one assembled operator set per run ([`Operators`]) and
//! factor every distinct system matrix once.

pub mod residual;

use std::fmt;
use std::str::FromStr;

use crate::error::{Error, Result};
use crate::fem::{self, FeSpace};
use crate::manufactured::{exact_first_step_data, FirstStepData, ManufacturedCase};
use crate::mesh::{build_two_domain_mesh, Subdomain, TwoDomainMesh};
use crate::sparse::{
    assemble_block_system, factorize, BlockContribution, BlockLayout, Factorization, SparseMatrix,
};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Variant {
    Original,
    Improved,
    Monolithic,
}

impl Variant {
    pub const ALL: [Variant; 3] = [Variant::Original, Variant::Improved, Variant::Monolithic];

    pub fn name(self) -> &'static str {
        match self {
            Variant::Original => "original",
            Variant::Improved => "improved",
            Variant::Monolithic => "monolithic",
        }
    }
}

impl fmt::Display for Variant {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Variant {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "original" => Ok(Variant::Original),
            "improved" => Ok(Variant::Improved),
            "monolithic" => Ok(Variant::Monolithic),
            other => Err(Error::config(format!(
                "unknown variant '{other}' (expected original, improved or monolithic)"
            ))),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SchemeConfig {
    pub nu_f: f64,
    pub nu_s: f64,
    pub alpha: f64,
    pub dt: f64,
    pub final_time: f64,
    pub fe_order: usize,
    pub variant: Variant,
    /// Mesh resolution, `h = 1/nx`.
    pub nx: usize,
}

impl SchemeConfig {
    /// Level-`k` configuration with `Δt = h = 2^-(k+1)`.
    pub fn for_level(
        case: &ManufacturedCase,
        variant: Variant,
        level: u32,
        alpha: f64,
        final_time: f64,
        fe_order: usize,
    ) -> Self {
        let nx = 1usize << (level + 1);
        Self {
            nu_f: case.nu_f,
            nu_s: case.nu_s,
            alpha,
            dt: 1.0 / nx as f64,
            final_time,
            fe_order,
            variant,
            nx,
        }
    }

    /// Number of steps `N = T/Δt`, checked to be a whole number.
    pub fn n_steps(&self) -> Result<usize> {
        if !(self.dt > 0.0) || !(self.final_time > 0.0) {
            return Err(Error::config("time step and final time must be positive"));
        }
        let ratio = self.final_time / self.dt;
        let n = ratio.round();
        if (ratio - n).abs() > 1e-9 * ratio.max(1.0) || n < 1.0 {
            return Err(Error::config(format!(
                "final time {} is not a whole number of steps of {}",
                self.final_time, self.dt
            )));
        }
        Ok(n as usize)
    }

    pub fn validate(&self) -> Result<usize> {
        let n = self.n_steps()?;
        if !(self.alpha > 0.0) {
            return Err(Error::config(format!("alpha must be positive, got {}", self.alpha)));
        }
        if !(self.nu_f > 0.0 && self.nu_s > 0.0) {
            return Err(Error::config("viscosities must be positive"));
        }
        if self.fe_order != 1 && self.fe_order != 2 {
            return Err(Error::config(format!(
                "finite-element order must be 1 or 2, got {}",
                self.fe_order
            )));
        }
        if self.variant == Variant::Improved && n < 4 {
            return Err(Error::config(format!(
                "the improved scheme needs at least 4 steps, got {n}"
            )));
        }
        Ok(n)
    }

    pub fn time(&self, n: usize) -> f64 {
        n as f64 * self.dt
    }
}

/// Coefficient vectors at one time level.
#[derive(Debug, Clone, PartialEq)]
pub struct DiscreteState {
    pub n: usize,
    pub u: Vec<f64>,
    pub w: Vec<f64>,
    /// Multiplier on the interface trace dofs.
    pub lambda: Vec<f64>,
}

impl DiscreteState {
    pub fn zeros(n: usize, spaces: &Spaces) -> Self {
        Self {
            n,
            u: vec![0.0; spaces.fluid.ndofs()],
            w: vec![0.0; spaces.solid.ndofs()],
            lambda: vec![0.0; spaces.ninterface()],
        }
    }
}

/// Mesh plus the fluid and solid spaces built on it.
#[derive(Debug, Clone)]
pub struct Spaces {
    pub mesh: TwoDomainMesh,
    pub fluid: FeSpace,
    pub solid: FeSpace,
}

impl Spaces {
    pub fn new(mesh: TwoDomainMesh, order: usize) -> Result<Self> {
        let fluid = FeSpace::new(&mesh, Subdomain::Fluid, order)?;
        let solid = FeSpace::new(&mesh, Subdomain::Solid, order)?;
        Ok(Self { mesh, fluid, solid })
    }

    pub fn for_config(config: &SchemeConfig, split_y: f64) -> Result<Self> {
        Self::new(build_two_domain_mesh(config.nx, split_y)?, config.fe_order)
    }

    pub fn ninterface(&self) -> usize {
        self.fluid.ninterface()
    }
}

/// Assembled bilinear forms shared by every variant.
#[derive(Debug, Clone)]
pub struct Operators {
    pub mass_f: SparseMatrix,
    pub mass_s: SparseMatrix,
    pub stiff_f: SparseMatrix,
    pub stiff_s: SparseMatrix,
    pub iface_ff: SparseMatrix,
    pub iface_ss: SparseMatrix,
    /// Rows fluid, columns solid.
    pub iface_fs: SparseMatrix,
    /// Rows solid, columns fluid.
    pub iface_sf: SparseMatrix,
    /// `<mu_j, v_i>` with fluid rows and trace columns.
    pub pair_f: SparseMatrix,
    pub pair_s: SparseMatrix,
    pub trace_mass: SparseMatrix,
}

impl Operators {
    pub fn assemble(spaces: &Spaces, nu_f: f64, nu_s: f64) -> Result<Self> {
        let (f, s) = (&spaces.fluid, &spaces.solid);
        Ok(Self {
            mass_f: fem::assemble_mass(f),
            mass_s: fem::assemble_mass(s),
            stiff_f: fem::assemble_stiffness(f, nu_f),
            stiff_s: fem::assemble_stiffness(s, nu_s),
            iface_ff: fem::assemble_interface_mass(f, f)?,
            iface_ss: fem::assemble_interface_mass(s, s)?,
            iface_fs: fem::assemble_interface_mass(f, s)?,
            iface_sf: fem::assemble_interface_mass(s, f)?,
            pair_f: fem::assemble_trace_pairing(f),
            pair_s: fem::assemble_trace_pairing(s),
            trace_mass: fem::assemble_trace_mass(f),
        })
    }
}

fn zero_masked(v: &mut [f64], mask: &[bool]) {
    for (x, &m) in v.iter_mut().zip(mask) {
        if m {
            *x = 0.0;
        }
    }
}

/// Factored Robin matrices of the splitting scheme.
#[derive(Debug)]
pub struct SplittingSolvers {
    solid: Factorization,
    fluid: Factorization,
}

impl SplittingSolvers {
    pub fn new(spaces: &Spaces, ops: &Operators, config: &SchemeConfig) -> Result<Self> {
        let (dt, alpha) = (config.dt, config.alpha);
        let solid = SparseMatrix::linear_combination(&[
            (1.0, &ops.mass_s),
            (dt, &ops.stiff_s),
            (alpha * dt, &ops.iface_ss),
        ])?
        .constrain(&spaces.solid.dirichlet_mask);
        let fluid = SparseMatrix::linear_combination(&[
            (1.0, &ops.mass_f),
            (dt, &ops.stiff_f),
            (alpha * dt, &ops.iface_ff),
        ])?
        .constrain(&spaces.fluid.dirichlet_mask);
        let tag = |e: Error| match e {
            Error::SingularSystem { pivot } => Error::SingularScheme {
                variant: "original",
                pivot,
            },
            other => other,
        };
        Ok(Self {
            solid: factorize(&solid).map_err(tag)?,
            fluid: factorize(&fluid).map_err(tag)?,
        })
    }
}

/// Factored monolithic backward-Euler matrix on the glued space.
#[derive(Debug)]
pub struct MonolithicSolver {
    factor: Factorization,
    trace_factor: Factorization,
    /// Global index of every solid dof (interface dofs map onto fluid ones).
    solid_to_global: Vec<usize>,
    mass: SparseMatrix,
    mask: Vec<bool>,
    ndofs: usize,
}

impl MonolithicSolver {
    pub fn new(spaces: &Spaces, ops: &Operators, config: &SchemeConfig) -> Result<Self> {
        let (f, s) = (&spaces.fluid, &spaces.solid);
        let nf = f.ndofs();
        let mut solid_to_global = vec![usize::MAX; s.ndofs()];
        for (&ds, &df) in s.interface_dofs.iter().zip(&f.interface_dofs) {
            solid_to_global[ds] = df;
        }
        let mut next = nf;
        for g in solid_to_global.iter_mut() {
            if *g == usize::MAX {
                *g = next;
                next += 1;
            }
        }
        let ndofs = next;
        let glue = |mf: &SparseMatrix, ms: &SparseMatrix| {
            let mut b = crate::sparse::TripletBuilder::with_capacity(ndofs, ndofs, mf.nnz() + ms.nnz());
            for (i, j, v) in mf.triplets() {
                b.push(i, j, v);
            }
            for (i, j, v) in ms.triplets() {
                b.push(solid_to_global[i], solid_to_global[j], v);
            }
            b.build()
        };
        let mass = glue(&ops.mass_f, &ops.mass_s);
        let stiff = glue(&ops.stiff_f, &ops.stiff_s);
        let mut mask = vec![false; ndofs];
        mask[..nf].copy_from_slice(&f.dirichlet_mask);
        for (i, &d) in s.dirichlet_mask.iter().enumerate() {
            if d {
                mask[solid_to_global[i]] = true;
            }
        }
        let system = SparseMatrix::linear_combination(&[(1.0, &mass), (config.dt, &stiff)])?
            .constrain(&mask);
        let tag = |e: Error| match e {
            Error::SingularSystem { pivot } => Error::SingularScheme {
                variant: "monolithic",
                pivot,
            },
            other => other,
        };
        Ok(Self {
            factor: factorize(&system).map_err(tag)?,
            trace_factor: factorize(&ops.trace_mass).map_err(tag)?,
            solid_to_global,
            mass,
            mask,
            ndofs,
        })
    }

    pub fn ndofs(&self) -> usize {
        self.ndofs
    }
}

/// Everything needed to advance one run: spaces, operators and factors.
pub struct SchemeContext {
    pub case: ManufacturedCase,
    pub config: SchemeConfig,
    pub spaces: Spaces,
    pub ops: Operators,
    pub n_steps: usize,
    splitting: Option<SplittingSolvers>,
    monolithic: Option<MonolithicSolver>,
}

impl SchemeContext {
    pub fn new(case: &ManufacturedCase, config: &SchemeConfig) -> Result<Self> {
        let n_steps = config.validate()?;
        let spaces = Spaces::for_config(config, case.split_y)?;
        Self::with_spaces(case, config, spaces, n_steps)
    }

    /// Uses caller-provided spaces (e.g. a mirrored mesh).
    pub fn with_spaces(
        case: &ManufacturedCase,
        config: &SchemeConfig,
        spaces: Spaces,
        n_steps: usize,
    ) -> Result<Self> {
        let ops = Operators::assemble(&spaces, config.nu_f, config.nu_s)?;
        let (splitting, monolithic) = match config.variant {
            Variant::Original | Variant::Improved => {
                (Some(SplittingSolvers::new(&spaces, &ops, config)?), None)
            }
            Variant::Monolithic => (None, Some(MonolithicSolver::new(&spaces, &ops, config)?)),
        };
        Ok(Self {
            case: case.clone(),
            config: config.clone(),
            spaces,
            ops,
            n_steps,
            splitting,
            monolithic,
        })
    }

    fn splitting(&mut self) -> Result<&SplittingSolvers> {
        if self.splitting.is_none() {
            self.splitting = Some(SplittingSolvers::new(&self.spaces, &self.ops, &self.config)?);
        }
        Ok(self.splitting.as_ref().expect("initialized above"))
    }

    fn monolithic(&mut self) -> Result<&MonolithicSolver> {
        if self.monolithic.is_none() {
            self.monolithic = Some(MonolithicSolver::new(&self.spaces, &self.ops, &self.config)?);
        }
        Ok(self.monolithic.as_ref().expect("initialized above"))
    }

    fn fluid_load(&self, t: f64) -> Vec<f64> {
        fem::assemble_load(&self.spaces.fluid, |t, p| self.case.f_f(t, p), t)
    }

    fn solid_load(&self, t: f64) -> Vec<f64> {
        fem::assemble_load(&self.spaces.solid, |t, p| self.case.f_s(t, p), t)
    }
}

/// Level-0 state: nodal interpolants of the initial data and of the exact
/// multiplier at `t = 0`.
pub fn initialize(ctx: &SchemeContext) -> DiscreteState {
    let case = &ctx.case;
    DiscreteState {
        n: 0,
        u: ctx.spaces.fluid.interpolate(|p| case.u_exact(0.0, p)),
        w: ctx.spaces.solid.interpolate(|p| case.w_exact(0.0, p)),
        lambda: ctx.spaces.fluid.interpolate_trace(|x| case.l_exact(0.0, x)),
    }
}

/// One step of the Robin-Robin splitting: solid Robin solve, fluid Robin
/// solve with the multiplier eliminated, then the explicit multiplier update.
pub fn step_original(ctx: &mut SchemeContext, state: &DiscreteState) -> Result<DiscreteState> {
    let t_next = ctx.config.time(state.n + 1);
    let fs = ctx.solid_load(t_next);
    let ff = ctx.fluid_load(t_next);
    step_original_with_loads(ctx, state, &fs, &ff)
}

/// [`step_original`] with explicit forcing loads at `t_{n+1}`.
pub fn step_original_with_loads(
    ctx: &mut SchemeContext,
    state: &DiscreteState,
    solid_load: &[f64],
    fluid_load: &[f64],
) -> Result<DiscreteState> {
    let (dt, alpha) = (ctx.config.dt, ctx.config.alpha);
    ctx.splitting()?;
    let solvers = ctx.splitting.as_ref().expect("factored");
    let ops = &ctx.ops;
    let spaces = &ctx.spaces;

    let mut rhs_s = ops.mass_s.mul_vec(&state.w);
    ops.iface_sf.mul_vec_add(alpha * dt, &state.u, &mut rhs_s);
    ops.pair_s.mul_vec_add(-dt, &state.lambda, &mut rhs_s);
    for (r, l) in rhs_s.iter_mut().zip(solid_load) {
        *r += dt * l;
    }
    zero_masked(&mut rhs_s, &spaces.solid.dirichlet_mask);
    let w = solvers.solid.solve(&rhs_s)?;

    let mut rhs_f = ops.mass_f.mul_vec(&state.u);
    ops.pair_f.mul_vec_add(dt, &state.lambda, &mut rhs_f);
    ops.iface_fs.mul_vec_add(alpha * dt, &w, &mut rhs_f);
    for (r, l) in rhs_f.iter_mut().zip(fluid_load) {
        *r += dt * l;
    }
    zero_masked(&mut rhs_f, &spaces.fluid.dirichlet_mask);
    let u = solvers.fluid.solve(&rhs_f)?;

    let ut = spaces.fluid.trace(&u);
    let wt = spaces.solid.trace(&w);
    let lambda = state
        .lambda
        .iter()
        .zip(ut.iter().zip(&wt))
        .map(|(l, (a, b))| l - alpha * (a - b))
        .collect();

    Ok(DiscreteState {
        n: state.n + 1,
        u,
        w,
        lambda,
    })
}

/// Block indices of the coupled first-step system.
pub mod block {
    pub const W1: usize = 0;
    pub const W2: usize = 1;
    pub const W3: usize = 2;
    pub const U1: usize = 3;
    pub const U2: usize = 4;
    pub const U3: usize = 5;
    pub const L1: usize = 6;
    pub const L2: usize = 7;
    pub const L3: usize = 8;
}

pub fn first_block_layout(spaces: &Spaces) -> BlockLayout {
    let mut layout = BlockLayout::new();
    for name in ["w1", "w2", "w3"] {
        layout.push(name, spaces.solid.ndofs());
    }
    for name in ["u1", "u2", "u3"] {
        layout.push(name, spaces.fluid.ndofs());
    }
    for name in ["lambda1", "lambda2", "lambda3"] {
        layout.push(name, spaces.ninterface());
    }
    layout
}

/// Right-hand sides of the nine first-block equations, in block order
/// (modified first step for each field, then the standard step at n = 1, 2).
pub fn first_block_rhs(ctx: &SchemeContext, data: &FirstStepData) -> Vec<Vec<f64>> {
    let (dt, alpha) = (ctx.config.dt, ctx.config.alpha);
    let (f, s) = (&ctx.spaces.fluid, &ctx.spaces.solid);
    let t = |n: usize| ctx.config.time(n);

    let mut r_w1 = fem::assemble_density_load(s, |p| {
        data.solid_time_difference(p) + data.forcing_solid(1, p)
    });
    let iface = fem::assemble_interface_load(s, |x| alpha * dt * data.big_g1(2, x) - dt * data.big_g2(2, x));
    r_w1.iter_mut().zip(&iface).for_each(|(a, b)| *a += b);

    let mut r_u1 = fem::assemble_density_load(f, |p| {
        data.fluid_time_difference(p) + data.forcing_fluid(1, p)
    });
    let iface = fem::assemble_interface_load(f, |x| alpha * dt * data.big_g1(3, x) + dt * data.big_g2(3, x));
    r_u1.iter_mut().zip(&iface).for_each(|(a, b)| *a += b);

    let r_l1 = fem::assemble_trace_load(f, |x| -alpha * dt * data.big_g1(3, x) + dt * data.big_g2(2, x));

    let r_w2 = ctx.solid_load(t(2));
    let r_w3 = ctx.solid_load(t(3));
    let r_u2 = ctx.fluid_load(t(2));
    let r_u3 = ctx.fluid_load(t(3));
    let m = ctx.spaces.ninterface();
    vec![
        r_w1,
        r_w2,
        r_w3,
        r_u1,
        r_u2,
        r_u3,
        r_l1,
        vec![0.0; m],
        vec![0.0; m],
    ]
}

/// Assembles the nine-field system coupling levels 1, 2 and 3.
pub fn assemble_first_block(ctx: &SchemeContext) -> Result<crate::sparse::BlockSystem> {
    use block::*;
    let (dt, a) = (ctx.config.dt, ctx.config.alpha);
    let o = &ctx.ops;
    let layout = first_block_layout(&ctx.spaces);
    let pair_ft = o.pair_f.transpose();
    let pair_st = o.pair_s.transpose();
    let inv = 1.0 / dt;
    let c = BlockContribution::new;
    let contributions = vec![
        // modified solid equation
        c(W1, W2, &o.mass_s, inv),
        c(W1, W1, &o.mass_s, -inv),
        c(W1, W1, &o.stiff_s, 1.0),
        c(W1, W1, &o.iface_ss, a),
        c(W1, U2, &o.iface_sf, a),
        c(W1, U1, &o.iface_sf, -2.0 * a),
        c(W1, L1, &o.pair_s, 2.0),
        c(W1, L2, &o.pair_s, -1.0),
        // standard solid equations at n = 1, 2
        c(W2, W2, &o.mass_s, inv),
        c(W2, W2, &o.stiff_s, 1.0),
        c(W2, W2, &o.iface_ss, a),
        c(W2, W1, &o.mass_s, -inv),
        c(W2, U1, &o.iface_sf, -a),
        c(W2, L1, &o.pair_s, 1.0),
        c(W3, W3, &o.mass_s, inv),
        c(W3, W3, &o.stiff_s, 1.0),
        c(W3, W3, &o.iface_ss, a),
        c(W3, W2, &o.mass_s, -inv),
        c(W3, U2, &o.iface_sf, -a),
        c(W3, L2, &o.pair_s, 1.0),
        // modified fluid equation
        c(U1, U2, &o.mass_f, inv),
        c(U1, U1, &o.mass_f, -inv),
        c(U1, U1, &o.stiff_f, 1.0),
        c(U1, U3, &o.iface_ff, a),
        c(U1, U2, &o.iface_ff, -2.0 * a),
        c(U1, U1, &o.iface_ff, a),
        c(U1, L3, &o.pair_f, 1.0),
        c(U1, L2, &o.pair_f, -2.0),
        // standard fluid equations at n = 1, 2
        c(U2, U2, &o.mass_f, inv),
        c(U2, U2, &o.stiff_f, 1.0),
        c(U2, U1, &o.mass_f, -inv),
        c(U2, L2, &o.pair_f, -1.0),
        c(U3, U3, &o.mass_f, inv),
        c(U3, U3, &o.stiff_f, 1.0),
        c(U3, U2, &o.mass_f, -inv),
        c(U3, L3, &o.pair_f, -1.0),
        // modified multiplier equation
        c(L1, U3, &pair_ft, -a),
        c(L1, U2, &pair_ft, 2.0 * a),
        c(L1, W1, &pair_st, -a),
        c(L1, L2, &o.trace_mass, 1.0),
        c(L1, L1, &o.trace_mass, -1.0),
        // standard multiplier updates at n = 1, 2
        c(L2, U2, &pair_ft, a),
        c(L2, W2, &pair_st, -a),
        c(L2, L2, &o.trace_mass, 1.0),
        c(L2, L1, &o.trace_mass, -1.0),
        c(L3, U3, &pair_ft, a),
        c(L3, W3, &pair_st, -a),
        c(L3, L3, &o.trace_mass, 1.0),
        c(L3, L2, &o.trace_mass, -1.0),
    ];
    let mut system = assemble_block_system(&layout, &contributions)?;

    let mut mask = vec![false; layout.dim()];
    for (blk, side_mask) in [
        (W1, &ctx.spaces.solid.dirichlet_mask),
        (W2, &ctx.spaces.solid.dirichlet_mask),
        (W3, &ctx.spaces.solid.dirichlet_mask),
        (U1, &ctx.spaces.fluid.dirichlet_mask),
        (U2, &ctx.spaces.fluid.dirichlet_mask),
        (U3, &ctx.spaces.fluid.dirichlet_mask),
    ] {
        let b = layout.block(blk);
        mask[b.offset..b.offset + b.size].copy_from_slice(side_mask);
    }
    system.matrix = system.matrix.constrain(&mask);

    let data = exact_first_step_data(&ctx.case, dt)?;
    let rhs = first_block_rhs(ctx, &data);
    for (blk, part) in rhs.iter().enumerate() {
        layout.slice_mut(blk, &mut system.rhs).copy_from_slice(part);
    }
    for (r, &m) in system.rhs.iter_mut().zip(&mask) {
        if m {
            *r = 0.0;
        }
    }
    Ok(system)
}

/// Solves the coupled first block of the improved scheme for levels 1-3.
pub fn solve_first_block_improved(ctx: &SchemeContext) -> Result<[DiscreteState; 3]> {
    use block::*;
    let system = assemble_first_block(ctx)?;
    let fact = factorize(&system.matrix).map_err(|e| match e {
        Error::SingularSystem { pivot } => Error::SingularScheme {
            variant: "improved first block",
            pivot,
        },
        other => other,
    })?;
    let x = fact.solve(&system.rhs)?;
    let l = &system.layout;
    let state = |n, wb, ub, lb| DiscreteState {
        n,
        w: l.slice(wb, &x).to_vec(),
        u: l.slice(ub, &x).to_vec(),
        lambda: l.slice(lb, &x).to_vec(),
    };
    Ok([state(1, W1, U1, L1), state(2, W2, U2, L2), state(3, W3, U3, L3)])
}

/// One monolithic backward-Euler step on the glued space; the multiplier is
/// recovered from the fluid residual on interface test functions.
pub fn step_monolithic(ctx: &mut SchemeContext, state: &DiscreteState) -> Result<DiscreteState> {
    let dt = ctx.config.dt;
    let t_next = ctx.config.time(state.n + 1);
    let ff = ctx.fluid_load(t_next);
    let fs = ctx.solid_load(t_next);
    ctx.monolithic()?;
    let solver = ctx.monolithic.as_ref().expect("factored");
    let spaces = &ctx.spaces;
    let nf = spaces.fluid.ndofs();

    let mut glued = vec![0.0; solver.ndofs];
    glued[..nf].copy_from_slice(&state.u);
    for (i, &g) in solver.solid_to_global.iter().enumerate() {
        if g >= nf {
            glued[g] = state.w[i];
        }
    }
    let mut rhs = solver.mass.mul_vec(&glued);
    for (i, v) in ff.iter().enumerate() {
        rhs[i] += dt * v;
    }
    for (i, v) in fs.iter().enumerate() {
        rhs[solver.solid_to_global[i]] += dt * v;
    }
    zero_masked(&mut rhs, &solver.mask);
    let x = solver.factor.solve(&rhs)?;

    let u = x[..nf].to_vec();
    let w: Vec<f64> = solver.solid_to_global.iter().map(|&g| x[g]).collect();

    // M_f (u - u_n)/dt + K_f u - F_f, tested with interface functions
    let du: Vec<f64> = u.iter().zip(&state.u).map(|(a, b)| (a - b) / dt).collect();
    let mut r = ctx.ops.mass_f.mul_vec(&du);
    ctx.ops.stiff_f.mul_vec_add(1.0, &u, &mut r);
    for (a, b) in r.iter_mut().zip(&ff) {
        *a -= b;
    }
    let lambda = solver.trace_factor.solve(&spaces.fluid.trace(&r))?;

    Ok(DiscreteState {
        n: state.n + 1,
        u,
        w,
        lambda,
    })
}

/// Which states a [`Trajectory`] keeps.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Retention {
    All,
    LastThree,
}

/// States of one run, either all of them or a sliding window of three.
#[derive(Debug, Clone)]
pub struct Trajectory {
    pub dt: f64,
    pub n_steps: usize,
    pub variant: Variant,
    retention: Retention,
    states: Vec<DiscreteState>,
}

impl Trajectory {
    pub fn new(dt: f64, n_steps: usize, variant: Variant, retention: Retention) -> Self {
        Self {
            dt,
            n_steps,
            variant,
            retention,
            states: Vec::new(),
        }
    }

    pub fn push(&mut self, state: DiscreteState) {
        if let Some(last) = self.states.last() {
            debug_assert_eq!(last.n + 1, state.n, "levels must be contiguous");
        }
        self.states.push(state);
        if self.retention == Retention::LastThree && self.states.len() > 3 {
            self.states.remove(0);
        }
    }

    pub fn states(&self) -> &[DiscreteState] {
        &self.states
    }

    pub fn last(&self) -> Option<&DiscreteState> {
        self.states.last()
    }

    /// State at level `n` if retained.
    pub fn level(&self, n: usize) -> Option<&DiscreteState> {
        let first = self.states.first()?.n;
        n.checked_sub(first).and_then(|k| self.states.get(k))
    }

    pub fn final_time(&self) -> f64 {
        self.n_steps as f64 * self.dt
    }
}

/// Runs a scheme to the final time, retaining the last three levels.
pub fn run(case: &ManufacturedCase, config: &SchemeConfig) -> Result<Trajectory> {
    run_with(case, config, Retention::LastThree, &mut |_, _| Ok(()))
}

/// Runs a scheme, handing every produced level (0..=N) to `observer`.
pub fn run_with(
    case: &ManufacturedCase,
    config: &SchemeConfig,
    retention: Retention,
    observer: &mut dyn FnMut(&SchemeContext, &DiscreteState) -> Result<()>,
) -> Result<Trajectory> {
    let mut ctx = SchemeContext::new(case, config)?;
    run_in_context(&mut ctx, retention, observer)
}

pub fn run_in_context(
    ctx: &mut SchemeContext,
    retention: Retention,
    observer: &mut dyn FnMut(&SchemeContext, &DiscreteState) -> Result<()>,
) -> Result<Trajectory> {
    let n_steps = ctx.n_steps;
    let mut traj = Trajectory::new(ctx.config.dt, n_steps, ctx.config.variant, retention);
    let s0 = initialize(ctx);
    observer(ctx, &s0)?;
    let mut current = s0.clone();
    traj.push(s0);
    if ctx.config.variant == Variant::Improved {
        for s in solve_first_block_improved(ctx)? {
            observer(ctx, &s)?;
            current = s.clone();
            traj.push(s);
        }
    }
    while current.n < n_steps {
        let next = match ctx.config.variant {
            Variant::Original | Variant::Improved => step_original(ctx, &current)?,
            Variant::Monolithic => step_monolithic(ctx, &current)?,
        };
        observer(ctx, &next)?;
        traj.push(next.clone());
        current = next;
    }
    Ok(traj)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::manufactured::case_example1;

    fn config(variant: Variant, level: u32, final_time: f64) -> SchemeConfig {
        SchemeConfig::for_level(&case_example1(), variant, level, 4.0, final_time, 1)
    }

    #[test]
    fn config_validation() {
        let c = config(Variant::Improved, 2, 0.25);
        assert_eq!(c.nx, 8);
        assert!(c.validate().unwrap_err().is_config(), "two steps are too few");
        assert_eq!(config(Variant::Original, 2, 0.25).validate().unwrap(), 2);
        let c = config(Variant::Improved, 2, 0.5);
        assert_eq!(c.validate().unwrap(), 4);
        let c = config(Variant::Original, 2, 0.3);
        assert!(c.validate().unwrap_err().is_config());
    }

    #[test]
    fn variant_parsing() {
        for v in Variant::ALL {
            assert_eq!(v.name().parse::<Variant>().unwrap(), v);
        }
        assert!("implicit".parse::<Variant>().is_err());
    }

    fn residual_limit() -> f64 {
        1e-9
    }

    #[test]
    fn zero_data_stays_zero() {
        let case = crate::manufactured::case_zero();
        for variant in Variant::ALL {
            let cfg = SchemeConfig::for_level(&case, variant, 2, 4.0, 0.5, 1);
            let traj = run(&case, &cfg).unwrap();
            let last = traj.last().unwrap();
            assert_eq!(last.n, 4);
            assert!(last.u.iter().chain(&last.w).chain(&last.lambda).all(|v| *v == 0.0));
        }
    }

    #[test]
    fn every_step_satisfies_its_equations() {
        for case in [
            crate::manufactured::case_example1(),
            crate::manufactured::case_example2(),
            crate::manufactured::case_example3(),
        ] {
            for variant in Variant::ALL {
                for order in [1, 2] {
                    let cfg = SchemeConfig::for_level(&case, variant, 2, 4.0, 0.5, order);
                    let mut ctx = SchemeContext::new(&case, &cfg).unwrap();
                    let traj = run_in_context(&mut ctx, Retention::All, &mut |_, _| Ok(())).unwrap();
                    let st = traj.states();
                    let first = if variant == Variant::Improved {
                        let block = [st[1].clone(), st[2].clone(), st[3].clone()];
                        let r = residual::first_block(&ctx, &block).unwrap();
                        assert!(r.iter().all(|&x| x < residual_limit()), "{} {variant}: {r:?}", case.name);
                        3
                    } else {
                        0
                    };
                    for w in st[first..].windows(2) {
                        let worst = match variant {
                            Variant::Monolithic => residual::monolithic_step(&ctx, &w[0], &w[1])
                                .unwrap()
                                .into_iter()
                                .fold(0.0, f64::max),
                            _ => residual::original_step(&ctx, &w[0], &w[1])
                                .unwrap()
                                .into_iter()
                                .fold(0.0, f64::max),
                        };
                        assert!(worst < residual_limit(), "{} {variant} step {}: {worst}", case.name, w[1].n);
                    }
                }
            }
        }
    }

    #[test]
    fn residual_detects_a_perturbation() {
        let case = case_example1();
        let cfg = config(Variant::Original, 2, 0.5);
        let mut ctx = SchemeContext::new(&case, &cfg).unwrap();
        let s0 = initialize(&ctx);
        let mut s1 = step_original(&mut ctx, &s0).unwrap();
        let i = s1.u.len() / 2;
        s1.u[i] += 1e-3;
        let r = residual::original_step(&ctx, &s0, &s1).unwrap();
        assert!(r[1] > 1e-6, "{r:?}");
    }

    #[test]
    fn improved_differs_from_original_only_through_the_first_block() {
        let case = crate::manufactured::case_example3();
        let orig = run(&case, &SchemeConfig::for_level(&case, Variant::Original, 3, 4.0, 0.25, 2)).unwrap();
        let imp = run(&case, &SchemeConfig::for_level(&case, Variant::Improved, 3, 4.0, 0.25, 2)).unwrap();
        let (a, b) = (orig.last().unwrap(), imp.last().unwrap());
        let gap = a.u.iter().zip(&b.u).fold(0.0f64, |m, (x, y)| m.max((x - y).abs()));
        assert!(gap > 1e-8, "{gap}");
    }

    fn random_state(spaces: &Spaces, rng: &mut impl rand::Rng) -> DiscreteState {
        let mut s = DiscreteState::zeros(0, spaces);
        for (v, &m) in s.u.iter_mut().zip(&spaces.fluid.dirichlet_mask) {
            *v = if m { 0.0 } else { rng.gen_range(-1.0..1.0) };
        }
        for (v, &m) in s.w.iter_mut().zip(&spaces.solid.dirichlet_mask) {
            *v = if m { 0.0 } else { rng.gen_range(-1.0..1.0) };
        }
        for v in s.lambda.iter_mut() {
            *v = rng.gen_range(-1.0..1.0);
        }
        s
    }

    #[test]
    fn homogeneous_steps_satisfy_the_energy_identity() {
        use crate::diagnostics::{zs_functionals, LevelPair};
        use rand::SeedableRng;
        let case = crate::manufactured::case_zero();
        let mut rng = rand::rngs::StdRng::seed_from_u64(7);
        for order in [1, 2] {
            let cfg = SchemeConfig::for_level(&case, Variant::Original, 2, 4.0, 0.5, order);
            let mut ctx = SchemeContext::new(&case, &cfg).unwrap();
            let zero_s = vec![0.0; ctx.spaces.solid.ndofs()];
            let zero_f = vec![0.0; ctx.spaces.fluid.ndofs()];
            let mut state = random_state(&ctx.spaces, &mut rng);
            for _ in 0..5 {
                let next = step_original_with_loads(&mut ctx, &state, &zero_s, &zero_f).unwrap();
                let pair = |a: &DiscreteState, b: &DiscreteState| {
                    zs_functionals(
                        LevelPair {
                            solid: (&a.w, &b.w),
                            fluid: (&a.u, &b.u),
                            trace: (&a.lambda, &b.lambda),
                        },
                        cfg.alpha,
                        cfg.dt,
                        &ctx.spaces,
                        &ctx.ops,
                    )
                };
                let (z0, _) = pair(&state, &state);
                let (z1, s1) = pair(&state, &next);
                assert!((z1 + s1 - z0).abs() <= 1e-10 * z0, "{z1} + {s1} vs {z0}");
                state = next;
            }
        }
    }

    #[test]
    fn homogeneous_original_scheme_is_stable() {
        use rand::SeedableRng;
        let case = crate::manufactured::case_zero();
        let mut rng = rand::rngs::StdRng::seed_from_u64(11);
        let cfg = SchemeConfig::for_level(&case, Variant::Original, 2, 4.0, 1.0, 1);
        let mut ctx = SchemeContext::new(&case, &cfg).unwrap();
        let zs = vec![0.0; ctx.spaces.solid.ndofs()];
        let zf = vec![0.0; ctx.spaces.fluid.ndofs()];
        let mut state = random_state(&ctx.spaces, &mut rng);
        state.lambda.iter_mut().for_each(|l| *l = 0.0);
        let energy = |s: &DiscreteState, ops: &Operators| ops.mass_f.bilinear(&s.u, &s.u) + ops.mass_s.bilinear(&s.w, &s.w);
        let mut prev = energy(&state, &ctx.ops);
        for _ in 0..ctx.n_steps {
            state = step_original_with_loads(&mut ctx, &state, &zs, &zf).unwrap();
            let e = energy(&state, &ctx.ops);
            assert!(e <= prev * (1.0 + 1e-12), "{e} > {prev}");
            prev = e;
        }
    }

    /// Index of the dof at the mirror image `(1 − x₁, x₂)` of each dof.
    fn mirror_map(space: &FeSpace) -> Vec<usize> {
        let key = |p: [f64; 2]| ((p[0] * 1024.0).round() as i64, (p[1] * 1024.0).round() as i64);
        let index: std::collections::HashMap<_, _> =
            space.dof_coords.iter().enumerate().map(|(i, &p)| (key(p), i)).collect();
        space
            .dof_coords
            .iter()
            .map(|&p| index[&key([1.0 - p[0], p[1]])])
            .collect()
    }

    #[test]
    fn solutions_are_antisymmetric_on_a_mirrored_mesh() {
        use crate::mesh::{build_two_domain_mesh_with, Diagonal};
        for case in [
            crate::manufactured::case_example1(),
            crate::manufactured::case_example2(),
            crate::manufactured::case_example3(),
        ] {
            for variant in Variant::ALL {
                let cfg = SchemeConfig::for_level(&case, variant, 2, 4.0, 0.5, 2);
                let mesh = build_two_domain_mesh_with(cfg.nx, case.split_y, Diagonal::Mirrored).unwrap();
                let spaces = Spaces::new(mesh, 2).unwrap();
                let n = cfg.validate().unwrap();
                let mut ctx = SchemeContext::with_spaces(&case, &cfg, spaces, n).unwrap();
                let traj = run_in_context(&mut ctx, Retention::LastThree, &mut |_, _| Ok(())).unwrap();
                let last = traj.last().unwrap();
                for (space, v) in [(&ctx.spaces.fluid, &last.u), (&ctx.spaces.solid, &last.w)] {
                    let map = mirror_map(space);
                    let scale = v.iter().fold(0.0f64, |m, x| m.max(x.abs()));
                    for (i, &j) in map.iter().enumerate() {
                        assert!((v[i] + v[j]).abs() < 1e-10 * scale, "{} {variant}", case.name);
                    }
                }
            }
        }
    }

    #[test]
    fn singular_configuration_names_the_variant() {
        let e = Error::SingularScheme {
            variant: "improved first block",
            pivot: 3,
        };
        assert!(e.to_string().contains("improved"));
    }
}
