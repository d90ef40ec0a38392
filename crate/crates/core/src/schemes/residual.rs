//! Weak-form residuals of accepted states, re-assembled from scratch and
//! written equation by equation rather than through the solve path.
//!
//! Each residual is reported relative to the largest term in its equation,
//! over non-Dirichlet test functions.

use super::{first_block_rhs, DiscreteState, Operators, SchemeContext};
use crate::error::Result;
use crate::fem;
use crate::manufactured::exact_first_step_data;
use crate::sparse::SparseMatrix;

/// Accumulates `Σ terms` and the largest individual term.
struct Equation {
    sum: Vec<f64>,
    scale: f64,
}

impl Equation {
    fn new(n: usize) -> Self {
        Self {
            sum: vec![0.0; n],
            scale: 0.0,
        }
    }

    fn apply(self, c: f64, a: &SparseMatrix, x: &[f64]) -> Self {
        let mut term = vec![0.0; self.sum.len()];
        a.mul_vec_add(c, x, &mut term);
        self.add(&term)
    }

    fn add(mut self, term: &[f64]) -> Self {
        for (s, t) in self.sum.iter_mut().zip(term) {
            *s += t;
            self.scale = self.scale.max(t.abs());
        }
        self
    }

    fn sub(self, term: &[f64]) -> Self {
        let neg: Vec<f64> = term.iter().map(|t| -t).collect();
        self.add(&neg)
    }

    /// Relative residual over unmasked rows.
    fn relative(&self, mask: Option<&[bool]>) -> f64 {
        let r = self
            .sum
            .iter()
            .enumerate()
            .filter(|(i, _)| mask.is_none_or(|m| !m[*i]))
            .fold(0.0f64, |acc, (_, v)| acc.max(v.abs()));
        if self.scale == 0.0 {
            r
        } else {
            r / self.scale
        }
    }
}

fn diff(a: &[f64], b: &[f64], scale: f64) -> Vec<f64> {
    a.iter().zip(b).map(|(x, y)| scale * (x - y)).collect()
}

fn fresh_operators(ctx: &SchemeContext) -> Result<Operators> {
    Operators::assemble(&ctx.spaces, ctx.config.nu_f, ctx.config.nu_s)
}

/// Largest Dirichlet-dof value among the states, which must be zero.
fn boundary_violation(ctx: &SchemeContext, states: &[&DiscreteState]) -> f64 {
    let (f, s) = (&ctx.spaces.fluid, &ctx.spaces.solid);
    let mut worst = 0.0f64;
    for st in states {
        for (v, &m) in st.u.iter().zip(&f.dirichlet_mask) {
            if m {
                worst = worst.max(v.abs());
            }
        }
        for (v, &m) in st.w.iter().zip(&s.dirichlet_mask) {
            if m {
                worst = worst.max(v.abs());
            }
        }
    }
    worst
}

/// Residuals of the solid, fluid and multiplier equations of one
/// splitting step `prev → next`, plus the boundary-value violation.
pub fn original_step(ctx: &SchemeContext, prev: &DiscreteState, next: &DiscreteState) -> Result<[f64; 4]> {
    let o = fresh_operators(ctx)?;
    let (dt, a) = (ctx.config.dt, ctx.config.alpha);
    let t = ctx.config.time(next.n);
    let (f, s) = (&ctx.spaces.fluid, &ctx.spaces.solid);
    let ff = fem::assemble_load(f, |t, p| ctx.case.f_f(t, p), t);
    let fs = fem::assemble_load(s, |t, p| ctx.case.f_s(t, p), t);

    // (∂w, z) + ν(∇w, ∇z) + α<w − u_prev, z> + <λ_prev, z> = (f, z)
    let solid = Equation::new(s.ndofs())
        .apply(1.0, &o.mass_s, &diff(&next.w, &prev.w, 1.0 / dt))
        .apply(1.0, &o.stiff_s, &next.w)
        .apply(a, &o.iface_ss, &next.w)
        .apply(-a, &o.iface_sf, &prev.u)
        .apply(1.0, &o.pair_s, &prev.lambda)
        .sub(&fs);
    // (∂u, v) + ν(∇u, ∇v) − <λ_next, v> = (f, v)
    let fluid = Equation::new(f.ndofs())
        .apply(1.0, &o.mass_f, &diff(&next.u, &prev.u, 1.0 / dt))
        .apply(1.0, &o.stiff_f, &next.u)
        .apply(-1.0, &o.pair_f, &next.lambda)
        .sub(&ff);
    // <λ_next − λ_prev + α(u_next − w_next), μ> = 0
    let mult = Equation::new(ctx.spaces.ninterface())
        .apply(1.0, &o.trace_mass, &diff(&next.lambda, &prev.lambda, 1.0))
        .apply(a, &o.pair_f.transpose(), &next.u)
        .apply(-a, &o.pair_s.transpose(), &next.w);
    Ok([
        solid.relative(Some(&s.dirichlet_mask)),
        fluid.relative(Some(&f.dirichlet_mask)),
        mult.relative(None),
        boundary_violation(ctx, &[next]),
    ])
}

/// Residuals of the nine coupled first-block equations, in the order
/// `w¹, w², w³, u¹, u², u³, λ¹, λ², λ³` of their test-function rows.
pub fn first_block(ctx: &SchemeContext, states: &[DiscreteState; 3]) -> Result<[f64; 9]> {
    let o = fresh_operators(ctx)?;
    let (dt, a) = (ctx.config.dt, ctx.config.alpha);
    let (f, s) = (&ctx.spaces.fluid, &ctx.spaces.solid);
    let data = exact_first_step_data(&ctx.case, dt)?;
    let rhs = first_block_rhs(ctx, &data);
    let [s1, s2, s3] = states;
    let (bft, bst) = (o.pair_f.transpose(), o.pair_s.transpose());
    let m = ctx.spaces.ninterface();
    let second = |x3: &[f64], x2: &[f64], x1: &[f64]| -> Vec<f64> {
        x3.iter().zip(x2).zip(x1).map(|((a, b), c)| a - 2.0 * b + c).collect()
    };
    let lin = |p: f64, x: &[f64], q: f64, y: &[f64]| -> Vec<f64> {
        x.iter().zip(y).map(|(a, b)| p * a + q * b).collect()
    };

    // (∂w², z) + ν(∇w¹, ∇z) + α<w¹ + u² − 2u¹, z> + <2λ¹ − λ², z>
    let eq_w1 = Equation::new(s.ndofs())
        .apply(1.0, &o.mass_s, &diff(&s2.w, &s1.w, 1.0 / dt))
        .apply(1.0, &o.stiff_s, &s1.w)
        .apply(a, &o.iface_ss, &s1.w)
        .apply(a, &o.iface_sf, &lin(1.0, &s2.u, -2.0, &s1.u))
        .apply(1.0, &o.pair_s, &lin(2.0, &s1.lambda, -1.0, &s2.lambda))
        .sub(&rhs[0]);
    // (∂u², v) + ν(∇u¹, ∇v) + <α(u³ − 2u² + u¹) + λ³ − 2λ², v>
    let eq_u1 = Equation::new(f.ndofs())
        .apply(1.0, &o.mass_f, &diff(&s2.u, &s1.u, 1.0 / dt))
        .apply(1.0, &o.stiff_f, &s1.u)
        .apply(a, &o.iface_ff, &second(&s3.u, &s2.u, &s1.u))
        .apply(1.0, &o.pair_f, &lin(1.0, &s3.lambda, -2.0, &s2.lambda))
        .sub(&rhs[3]);
    // <λ² − λ¹ − α(u³ − 2u²) − α w¹, μ>
    let eq_l1 = Equation::new(m)
        .apply(1.0, &o.trace_mass, &diff(&s2.lambda, &s1.lambda, 1.0))
        .apply(-a, &bft, &lin(1.0, &s3.u, -2.0, &s2.u))
        .apply(-a, &bst, &s1.w)
        .sub(&rhs[6]);

    let mut out = [0.0; 9];
    out[0] = eq_w1.relative(Some(&s.dirichlet_mask));
    out[3] = eq_u1.relative(Some(&f.dirichlet_mask));
    out[6] = eq_l1.relative(None);

    // standard steps 1 → 2 and 2 → 3
    for (i, (prev, next)) in [(s1, s2), (s2, s3)].into_iter().enumerate() {
        let solid = Equation::new(s.ndofs())
            .apply(1.0, &o.mass_s, &diff(&next.w, &prev.w, 1.0 / dt))
            .apply(1.0, &o.stiff_s, &next.w)
            .apply(a, &o.iface_ss, &next.w)
            .apply(-a, &o.iface_sf, &prev.u)
            .apply(1.0, &o.pair_s, &prev.lambda)
            .sub(&rhs[1 + i]);
        let fluid = Equation::new(f.ndofs())
            .apply(1.0, &o.mass_f, &diff(&next.u, &prev.u, 1.0 / dt))
            .apply(1.0, &o.stiff_f, &next.u)
            .apply(-1.0, &o.pair_f, &next.lambda)
            .sub(&rhs[4 + i]);
        let mult = Equation::new(m)
            .apply(1.0, &o.trace_mass, &diff(&next.lambda, &prev.lambda, 1.0))
            .apply(a, &bft, &next.u)
            .apply(-a, &bst, &next.w)
            .sub(&rhs[7 + i]);
        out[1 + i] = solid.relative(Some(&s.dirichlet_mask));
        out[4 + i] = fluid.relative(Some(&f.dirichlet_mask));
        out[7 + i] = mult.relative(None);
    }
    let bc = boundary_violation(ctx, &[s1, s2, s3]);
    for r in out.iter_mut() {
        *r = r.max(bc);
    }
    Ok(out)
}

/// Residuals of one monolithic step: fluid equation, solid equation with
/// the recovered multiplier, and trace continuity.
pub fn monolithic_step(ctx: &SchemeContext, prev: &DiscreteState, next: &DiscreteState) -> Result<[f64; 3]> {
    let o = fresh_operators(ctx)?;
    let dt = ctx.config.dt;
    let t = ctx.config.time(next.n);
    let (f, s) = (&ctx.spaces.fluid, &ctx.spaces.solid);
    let ff = fem::assemble_load(f, |t, p| ctx.case.f_f(t, p), t);
    let fs = fem::assemble_load(s, |t, p| ctx.case.f_s(t, p), t);
    let fluid = Equation::new(f.ndofs())
        .apply(1.0, &o.mass_f, &diff(&next.u, &prev.u, 1.0 / dt))
        .apply(1.0, &o.stiff_f, &next.u)
        .apply(-1.0, &o.pair_f, &next.lambda)
        .sub(&ff);
    let solid = Equation::new(s.ndofs())
        .apply(1.0, &o.mass_s, &diff(&next.w, &prev.w, 1.0 / dt))
        .apply(1.0, &o.stiff_s, &next.w)
        .apply(1.0, &o.pair_s, &next.lambda)
        .sub(&fs);
    let (ut, wt) = (f.trace(&next.u), s.trace(&next.w));
    let jump = ut
        .iter()
        .zip(&wt)
        .fold(0.0f64, |acc, (a, b)| acc.max((a - b).abs()));
    let size = ut.iter().fold(0.0f64, |acc, v| acc.max(v.abs())).max(1.0);
    Ok([
        fluid.relative(Some(&f.dirichlet_mask)),
        solid.relative(Some(&s.dirichlet_mask)),
        (jump / size).max(boundary_violation(ctx, &[next])),
    ])
}
