//! Error quantities, energy functionals and observed convergence orders.
//!
//! Every error field is `exact − discrete`, with the exact solution sampled
//! at quadrature points rather than interpolated.

use std::io::Write;
use std::path::Path;

use crate::error::{Error, Result};
use crate::fem::{self, FeSpace};
use crate::manufactured::{ExactField, ManufacturedCase};
use crate::mesh::Point;
use crate::schemes::{DiscreteState, Operators, Spaces, Trajectory};

/// Final-time and summed error quantities of one run.
#[derive(Debug, Clone, PartialEq)]
pub struct ErrorReport {
    pub level: Option<u32>,
    pub dt: f64,
    pub h: f64,
    pub n_steps: usize,
    pub e_u: f64,
    pub e_du: f64,
    pub e_dw: f64,
    pub e_gdu: f64,
    pub e_gdus: f64,
    pub e_gdws: f64,
    pub e_dls: f64,
    pub e_gdu2s: f64,
    /// For P1 only the exact Hessian contributes, since discrete Hessians vanish.
    pub e_ggdus: f64,
}

impl ErrorReport {
    pub const FINAL_COLUMNS: [&'static str; 4] = ["e_u", "e_du", "e_dw", "e_gdu"];
    pub const SUM_COLUMNS: [&'static str; 5] = ["e_gdus", "e_gdws", "e_dls", "e_gdu2s", "e_ggdus"];

    pub fn get(&self, name: &str) -> Option<f64> {
        Some(match name {
            "e_u" => self.e_u,
            "e_du" => self.e_du,
            "e_dw" => self.e_dw,
            "e_gdu" => self.e_gdu,
            "e_gdus" => self.e_gdus,
            "e_gdws" => self.e_gdws,
            "e_dls" => self.e_dls,
            "e_gdu2s" => self.e_gdu2s,
            "e_ggdus" => self.e_ggdus,
            _ => return None,
        })
    }
}

/// Linear combination `Σ c_k x_k` of coefficient vectors.
fn combine(terms: &[(f64, &[f64])]) -> Vec<f64> {
    let mut out = vec![0.0; terms[0].1.len()];
    for (c, x) in terms {
        for (o, v) in out.iter_mut().zip(x.iter()) {
            *o += c * v;
        }
    }
    out
}

/// `‖Σ c_k (exact(t_k) − x_k)‖` in L², H¹-seminorm and broken H².
struct ErrorCombination<'a> {
    space: &'a FeSpace,
    field: &'a ExactField,
    terms: Vec<(f64, f64, &'a [f64])>,
}

impl<'a> ErrorCombination<'a> {
    fn new(space: &'a FeSpace, field: &'a ExactField, terms: Vec<(f64, f64, &'a [f64])>) -> Self {
        Self { space, field, terms }
    }

    fn coeffs(&self) -> Vec<f64> {
        combine(&self.terms.iter().map(|&(c, _, x)| (c, x)).collect::<Vec<_>>())
    }

    fn l2(&self) -> f64 {
        let v = &self.field.value;
        fem::l2_diff(self.space, &self.coeffs(), |p: Point| {
            self.terms.iter().map(|&(c, t, _)| c * v(t, p)).sum()
        })
    }

    fn h1(&self) -> f64 {
        let g = &self.field.gradient;
        fem::h1_semi_diff(self.space, &self.coeffs(), |p: Point| {
            self.terms.iter().fold([0.0; 2], |acc, &(c, t, _)| {
                let d = g(t, p);
                [acc[0] + c * d[0], acc[1] + c * d[1]]
            })
        })
    }

    fn h2(&self) -> f64 {
        let h = &self.field.hessian;
        fem::broken_h2_diff(self.space, &self.coeffs(), |p: Point| {
            self.terms.iter().fold([0.0; 3], |acc, &(c, t, _)| {
                let d = h(t, p);
                [acc[0] + c * d[0], acc[1] + c * d[1], acc[2] + c * d[2]]
            })
        })
    }
}

fn multiplier_diff(spaces: &Spaces, case: &ManufacturedCase, dt: f64, a: &DiscreteState, b: &DiscreteState) -> f64 {
    let (ta, tb) = (a.n as f64 * dt, b.n as f64 * dt);
    let d = combine(&[(1.0, &a.lambda), (-1.0, &b.lambda)]);
    fem::sigma_l2_diff(&spaces.fluid, &d, |x| case.l_exact(ta, x) - case.l_exact(tb, x))
}

/// Final-time quantities from the last two levels of a trajectory.
pub fn final_time_errors(
    traj: &Trajectory,
    case: &ManufacturedCase,
    spaces: &Spaces,
) -> Result<(f64, f64, f64, f64)> {
    let n = traj.n_steps;
    let (last, prev) = match (traj.level(n), n.checked_sub(1).and_then(|m| traj.level(m))) {
        (Some(l), Some(p)) => (l, p),
        _ => {
            return Err(Error::TrajectoryTooShort {
                needed: 2,
                available: traj.states().len(),
            })
        }
    };
    let dt = traj.dt;
    let (t1, t0) = (n as f64 * dt, (n - 1) as f64 * dt);
    let (f, s) = (&spaces.fluid, &spaces.solid);
    let e_u = ErrorCombination::new(f, &case.fluid, vec![(1.0, t1, &last.u)]).l2();
    let du = ErrorCombination::new(f, &case.fluid, vec![(1.0, t1, &last.u), (-1.0, t0, &prev.u)]);
    let dw = ErrorCombination::new(s, &case.solid, vec![(1.0, t1, &last.w), (-1.0, t0, &prev.w)]);
    Ok((e_u, du.l2(), dw.l2(), du.h1()))
}

/// Streaming accumulator for the Δt-weighted sums; feed it every level in
/// order, starting at level 0.
#[derive(Debug, Clone)]
pub struct SummedErrors {
    dt: f64,
    window: Vec<DiscreteState>,
    gdus: f64,
    gdws: f64,
    dls: f64,
    gdu2s: f64,
    ggdus: f64,
    seen: usize,
}

impl SummedErrors {
    pub fn new(dt: f64) -> Self {
        Self {
            dt,
            window: Vec::with_capacity(3),
            gdus: 0.0,
            gdws: 0.0,
            dls: 0.0,
            gdu2s: 0.0,
            ggdus: 0.0,
            seen: 0,
        }
    }

    pub fn observe(&mut self, spaces: &Spaces, case: &ManufacturedCase, state: &DiscreteState) -> Result<()> {
        if let Some(last) = self.window.last() {
            if state.n != last.n + 1 {
                return Err(Error::config(format!(
                    "levels must arrive in order: got {} after {}",
                    state.n, last.n
                )));
            }
        } else if state.n != 0 {
            return Err(Error::config("the first observed level must be 0"));
        }
        self.window.push(state.clone());
        if self.window.len() > 3 {
            self.window.remove(0);
        }
        self.seen += 1;

        let dt = self.dt;
        let k = self.window.len();
        let cur = &self.window[k - 1];
        // first differences between levels n+1 and n, n >= 1
        if cur.n >= 2 {
            let prev = &self.window[k - 2];
            let (t1, t0) = (cur.n as f64 * dt, prev.n as f64 * dt);
            let (f, s) = (&spaces.fluid, &spaces.solid);
            let du = ErrorCombination::new(f, &case.fluid, vec![(1.0, t1, &cur.u), (-1.0, t0, &prev.u)]);
            let dw = ErrorCombination::new(s, &case.solid, vec![(1.0, t1, &cur.w), (-1.0, t0, &prev.w)]);
            self.gdus += dt * du.h1().powi(2);
            self.gdws += dt * dw.h1().powi(2);
            self.ggdus += dt * du.h2().powi(2);
            self.dls += dt * multiplier_diff(spaces, case, dt, cur, prev).powi(2);
        }
        // second differences around level n, n >= 2
        if cur.n >= 3 {
            let (mid, old) = (&self.window[k - 2], &self.window[k - 3]);
            let t = |s: &DiscreteState| s.n as f64 * dt;
            let d2 = ErrorCombination::new(
                &spaces.fluid,
                &case.fluid,
                vec![(1.0, t(cur), &cur.u), (-2.0, t(mid), &mid.u), (1.0, t(old), &old.u)],
            );
            self.gdu2s += dt * d2.h1().powi(2);
        }
        Ok(())
    }

    pub fn levels_seen(&self) -> usize {
        self.seen
    }

    /// `(e_gdus, e_gdws, e_dls, e_gdu2s, e_ggdus)`.
    pub fn finish(&self) -> (f64, f64, f64, f64, f64) {
        (
            self.gdus.sqrt(),
            self.gdws.sqrt(),
            self.dls.sqrt(),
            self.gdu2s.sqrt(),
            self.ggdus.sqrt(),
        )
    }
}

/// Batch version of [`SummedErrors`] over a fully retained trajectory.
pub fn summed_errors(traj: &Trajectory, case: &ManufacturedCase, spaces: &Spaces) -> Result<(f64, f64, f64, f64, f64)> {
    let states = traj.states();
    if states.first().map(|s| s.n) != Some(0) || states.len() != traj.n_steps + 1 {
        return Err(Error::TrajectoryTooShort {
            needed: traj.n_steps + 1,
            available: states.len(),
        });
    }
    let mut acc = SummedErrors::new(traj.dt);
    for s in states {
        acc.observe(spaces, case, s)?;
    }
    Ok(acc.finish())
}

/// One level's fields at two consecutive time levels, with roles named.
#[derive(Debug, Clone, Copy)]
pub struct LevelPair<'a> {
    /// ψ on the solid subdomain.
    pub solid: (&'a [f64], &'a [f64]),
    /// φ on the fluid subdomain.
    pub fluid: (&'a [f64], &'a [f64]),
    /// θ on the interface trace space.
    pub trace: (&'a [f64], &'a [f64]),
}

/// `(Z^{n+1}, S^{n+1})` for fields given at levels `n` and `n + 1`.
pub fn zs_functionals(
    fields: LevelPair<'_>,
    alpha: f64,
    dt: f64,
    spaces: &Spaces,
    ops: &Operators,
) -> (f64, f64) {
    let (s0, s1) = fields.solid;
    let (f0, f1) = fields.fluid;
    let (l0, l1) = fields.trace;
    let z = 0.5 * ops.mass_f.bilinear(f1, f1)
        + 0.5 * ops.mass_s.bilinear(s1, s1)
        + 0.5 * dt * alpha * ops.iface_ff.bilinear(f1, f1)
        + 0.5 * dt / alpha * ops.trace_mass.bilinear(l1, l1);

    let ds = combine(&[(1.0, s1), (-1.0, s0)]);
    let df = combine(&[(1.0, f1), (-1.0, f0)]);
    let mut coupled = spaces.fluid.trace(&df);
    for ((c, a), b) in coupled.iter_mut().zip(l1).zip(l0) {
        *c += (a - b) / alpha;
    }
    // stiffness matrices already carry the viscosities
    let s = dt * (ops.stiff_f.bilinear(f1, f1) + ops.stiff_s.bilinear(s1, s1))
        + 0.5 * (ops.mass_s.bilinear(&ds, &ds) + ops.mass_f.bilinear(&df, &df))
        + 0.5 * alpha * dt * ops.trace_mass.bilinear(&coupled, &coupled);
    (z, s)
}

/// `log₂(prev / cur)`; `None` when either value is not positive and finite.
pub fn observed_order(prev: f64, cur: f64) -> Option<f64> {
    if prev > 0.0 && cur > 0.0 && prev.is_finite() && cur.is_finite() {
        Some((prev / cur).log2())
    } else {
        None
    }
}

/// Orders between consecutive levels; the first entry is always `None`.
pub fn convergence_orders(values: &[f64]) -> Vec<Option<f64>> {
    let mut out = Vec::with_capacity(values.len());
    for (i, &v) in values.iter().enumerate() {
        out.push(if i == 0 { None } else { observed_order(values[i - 1], v) });
    }
    out
}

/// Errors per level with orders, for a chosen set of columns.
#[derive(Debug, Clone)]
pub struct ConvergenceTable {
    pub columns: Vec<String>,
    pub reports: Vec<ErrorReport>,
}

impl ConvergenceTable {
    pub fn new(columns: &[&str], reports: Vec<ErrorReport>) -> Self {
        Self {
            columns: columns.iter().map(|c| c.to_string()).collect(),
            reports,
        }
    }

    pub fn values(&self, column: &str) -> Vec<f64> {
        self.reports.iter().map(|r| r.get(column).unwrap_or(f64::NAN)).collect()
    }

    pub fn orders(&self, column: &str) -> Vec<Option<f64>> {
        convergence_orders(&self.values(column))
    }

    /// Order of `column` at the last level.
    pub fn last_order(&self, column: &str) -> Option<f64> {
        self.orders(column).last().copied().flatten()
    }

    /// Human-readable table in the `5.26e-04  2.09` style.
    pub fn render(&self) -> String {
        let mut out = String::from("k");
        for c in &self.columns {
            out.push_str(&format!("  {c:>10}  {:>5}", "order"));
        }
        out.push('\n');
        let orders: Vec<_> = self.columns.iter().map(|c| self.orders(c)).collect();
        for (i, r) in self.reports.iter().enumerate() {
            let level = r.level.map_or("-".to_string(), |l| l.to_string());
            out.push_str(&level);
            for (c, ord) in self.columns.iter().zip(&orders) {
                let v = r.get(c).unwrap_or(f64::NAN);
                let o = ord[i].map_or("-".to_string(), |o| format!("{o:.2}"));
                out.push_str(&format!("  {v:>10.2e}  {o:>5}"));
            }
            out.push('\n');
        }
        out
    }

    /// CSV with full-precision values and orders (empty cells when undefined).
    pub fn write_csv(&self, writer: impl Write) -> Result<()> {
        let mut w = csv::Writer::from_writer(writer);
        let mut header = vec!["k".to_string(), "dt".to_string(), "h".to_string()];
        for c in &self.columns {
            header.push(c.clone());
            header.push(format!("{c}_order"));
        }
        w.write_record(&header)?;
        let orders: Vec<_> = self.columns.iter().map(|c| self.orders(c)).collect();
        for (i, r) in self.reports.iter().enumerate() {
            let mut row = vec![
                r.level.map_or(String::new(), |l| l.to_string()),
                format!("{:e}", r.dt),
                format!("{:e}", r.h),
            ];
            for (c, ord) in self.columns.iter().zip(&orders) {
                row.push(format!("{:e}", r.get(c).unwrap_or(f64::NAN)));
                row.push(ord[i].map_or(String::new(), |o| format!("{o}")));
            }
            w.write_record(&row)?;
        }
        w.flush()?;
        Ok(())
    }

    pub fn save_csv(&self, path: &Path) -> Result<()> {
        let file = std::fs::File::create(path)?;
        self.write_csv(file)
    }
}
