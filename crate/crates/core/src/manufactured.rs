//! Manufactured exact solutions for the interface problem.
//!
//! All three built-in cases share the profile `cos(πx₁) sin(πx₂)` on both
//! subdomains, scaled by a time amplitude, with `ν_f = ν_s = 1` and the
//! interface at `x₂ = 0.75`. The multiplier is the fluid flux
//! `ν_f ∂u/∂x₂` on the interface (outward fluid normal `+e₂`).

use std::f64::consts::PI;
use std::sync::Arc;

use crate::error::{Error, Result};
use crate::mesh::Point;

pub type ScalarField = Arc<dyn Fn(f64, Point) -> f64 + Send + Sync>;
pub type VectorField = Arc<dyn Fn(f64, Point) -> [f64; 2] + Send + Sync>;
/// Hessian as `[xx, xy, yy]`.
pub type HessianField = Arc<dyn Fn(f64, Point) -> [f64; 3] + Send + Sync>;

/// Exact solution on one subdomain with its derivatives and forcing.
#[derive(Clone)]
pub struct ExactField {
    pub value: ScalarField,
    pub gradient: VectorField,
    pub hessian: HessianField,
    pub time_derivative: ScalarField,
    pub forcing: ScalarField,
}

#[derive(Clone)]
pub struct ManufacturedCase {
    pub name: String,
    pub nu_f: f64,
    pub nu_s: f64,
    pub split_y: f64,
    pub fluid: ExactField,
    pub solid: ExactField,
}

impl std::fmt::Debug for ManufacturedCase {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("ManufacturedCase")
            .field("name", &self.name)
            .field("nu_f", &self.nu_f)
            .field("nu_s", &self.nu_s)
            .field("split_y", &self.split_y)
            .finish_non_exhaustive()
    }
}

impl ManufacturedCase {
    pub fn u_exact(&self, t: f64, p: Point) -> f64 {
        (self.fluid.value)(t, p)
    }

    pub fn w_exact(&self, t: f64, p: Point) -> f64 {
        (self.solid.value)(t, p)
    }

    pub fn f_f(&self, t: f64, p: Point) -> f64 {
        (self.fluid.forcing)(t, p)
    }

    pub fn f_s(&self, t: f64, p: Point) -> f64 {
        (self.solid.forcing)(t, p)
    }

    /// Exact multiplier `ν_f ∂u/∂x₂` at `(x₁, split_y)`.
    pub fn l_exact(&self, t: f64, x1: f64) -> f64 {
        self.nu_f * (self.fluid.gradient)(t, [x1, self.split_y])[1]
    }

    pub fn has_forcing(&self) -> bool {
        !self.name.starts_with("example1") && self.name != "zero"
    }
}

/// `amp(t) cos(πx₁) sin(πx₂)` with the given forcing amplitude
/// `(∂_t − ν Δ)` already worked out by hand.
fn separable(
    amp: impl Fn(f64) -> f64 + Send + Sync + 'static,
    damp: impl Fn(f64) -> f64 + Send + Sync + 'static,
    forcing_amp: impl Fn(f64) -> f64 + Send + Sync + 'static,
) -> ExactField {
    let amp = Arc::new(amp);
    let damp = Arc::new(damp);
    let forcing_amp = Arc::new(forcing_amp);
    let a = amp.clone();
    let value: ScalarField =
        Arc::new(move |t, p| a(t) * (PI * p[0]).cos() * (PI * p[1]).sin());
    let a = amp.clone();
    let gradient: VectorField = Arc::new(move |t, p| {
        let s = a(t) * PI;
        [
            -s * (PI * p[0]).sin() * (PI * p[1]).sin(),
            s * (PI * p[0]).cos() * (PI * p[1]).cos(),
        ]
    });
    let a = amp;
    let hessian: HessianField = Arc::new(move |t, p| {
        let s = a(t) * PI * PI;
        let (cx, sx) = ((PI * p[0]).cos(), (PI * p[0]).sin());
        let (cy, sy) = ((PI * p[1]).cos(), (PI * p[1]).sin());
        [-s * cx * sy, -s * sx * cy, -s * cx * sy]
    });
    let time_derivative: ScalarField =
        Arc::new(move |t, p| damp(t) * (PI * p[0]).cos() * (PI * p[1]).sin());
    let forcing: ScalarField =
        Arc::new(move |t, p| forcing_amp(t) * (PI * p[0]).cos() * (PI * p[1]).sin());
    ExactField {
        value,
        gradient,
        hessian,
        time_derivative,
        forcing,
    }
}

fn with_field(name: &str, field: ExactField) -> ManufacturedCase {
    ManufacturedCase {
        name: name.to_string(),
        nu_f: 1.0,
        nu_s: 1.0,
        split_y: 0.75,
        fluid: field.clone(),
        solid: field,
    }
}

/// `u = w = e^{-2π²t} cos(πx₁) sin(πx₂)`, no forcing.
pub fn case_example1() -> ManufacturedCase {
    let k = 2.0 * PI * PI;
    with_field(
        "example1",
        separable(move |t| (-k * t).exp(), move |t| -k * (-k * t).exp(), |_| 0.0),
    )
}

/// `u = w = (t³ + 1) cos(πx₁) sin(πx₂)`.
pub fn case_example2() -> ManufacturedCase {
    with_field(
        "example2",
        separable(
            |t| t * t * t + 1.0,
            |t| 3.0 * t * t,
            |t| 3.0 * t * t + 2.0 * PI * PI * (t * t * t + 1.0),
        ),
    )
}

/// `u = w = e^t cos(πx₁) sin(πx₂)`.
pub fn case_example3() -> ManufacturedCase {
    with_field(
        "example3",
        separable(f64::exp, f64::exp, |t| (1.0 + 2.0 * PI * PI) * t.exp()),
    )
}

/// Identically zero solution and data.
pub fn case_zero() -> ManufacturedCase {
    with_field("zero", separable(|_| 0.0, |_| 0.0, |_| 0.0))
}

pub fn case_by_name(name: &str) -> Result<ManufacturedCase> {
    match name {
        "example1" => Ok(case_example1()),
        "example2" => Ok(case_example2()),
        "example3" => Ok(case_example3()),
        "zero" => Ok(case_zero()),
        other => Err(Error::config(format!(
            "unknown case '{other}' (expected example1, example2 or example3)"
        ))),
    }
}

/// Finite-element order used for each built-in case.
pub fn default_order(name: &str) -> usize {
    if name == "example1" {
        1
    } else {
        2
    }
}

/// Exact-solution data entering the right-hand side of the coupled first
/// block of the improved scheme.
#[derive(Clone, Debug)]
pub struct FirstStepData {
    pub case: ManufacturedCase,
    pub dt: f64,
}

/// Builds the first-block data for step size `dt`.
pub fn exact_first_step_data(case: &ManufacturedCase, dt: f64) -> Result<FirstStepData> {
    if !(dt > 0.0) {
        return Err(Error::config(format!("time step must be positive, got {dt}")));
    }
    Ok(FirstStepData {
        case: case.clone(),
        dt,
    })
}

impl FirstStepData {
    fn t(&self, n: usize) -> f64 {
        n as f64 * self.dt
    }

    fn on_sigma(&self, x1: f64) -> Point {
        [x1, self.case.split_y]
    }

    /// `∂_Δt w² − ∂_Δt w¹ = (w² − 2w¹ + w⁰)/Δt` on the solid.
    pub fn solid_time_difference(&self, p: Point) -> f64 {
        let w = |n| self.case.w_exact(self.t(n), p);
        (w(2) - 2.0 * w(1) + w(0)) / self.dt
    }

    /// `∂_Δt u² − ∂_Δt u¹` on the fluid.
    pub fn fluid_time_difference(&self, p: Point) -> f64 {
        let u = |n| self.case.u_exact(self.t(n), p);
        (u(2) - 2.0 * u(1) + u(0)) / self.dt
    }

    /// `g₁ⁿ = uⁿ − uⁿ⁻¹` on the interface.
    pub fn g1(&self, n: usize, x1: f64) -> f64 {
        let p = self.on_sigma(x1);
        self.case.u_exact(self.t(n), p) - self.case.u_exact(self.t(n - 1), p)
    }

    /// `g₂ⁿ = lⁿ − lⁿ⁻¹`.
    pub fn g2(&self, n: usize, x1: f64) -> f64 {
        self.case.l_exact(self.t(n), x1) - self.case.l_exact(self.t(n - 1), x1)
    }

    /// `G₁ⁿ = (g₁ⁿ − g₁ⁿ⁻¹)/Δt`, needs `n ≥ 2`.
    pub fn big_g1(&self, n: usize, x1: f64) -> f64 {
        let p = self.on_sigma(x1);
        let u = |k| self.case.u_exact(self.t(k), p);
        (u(n) - 2.0 * u(n - 1) + u(n - 2)) / self.dt
    }

    /// `G₂ⁿ = (g₂ⁿ − g₂ⁿ⁻¹)/Δt`, needs `n ≥ 2`.
    pub fn big_g2(&self, n: usize, x1: f64) -> f64 {
        let l = |k| self.case.l_exact(self.t(k), x1);
        (l(n) - 2.0 * l(n - 1) + l(n - 2)) / self.dt
    }

    pub fn forcing_fluid(&self, n: usize, p: Point) -> f64 {
        self.case.f_f(self.t(n), p)
    }

    pub fn forcing_solid(&self, n: usize, p: Point) -> f64 {
        self.case.f_s(self.t(n), p)
    }
}

#[cfg(test)]
mod tests {
    use rand::{Rng, SeedableRng};

    use super::*;

    fn cases() -> Vec<ManufacturedCase> {
        vec![case_example1(), case_example2(), case_example3()]
    }

    fn samples(n: usize, seed: u64, y0: f64, y1: f64) -> Vec<(f64, Point)> {
        let mut rng = rand::rngs::StdRng::seed_from_u64(seed);
        (0..n)
            .map(|_| {
                (
                    rng.gen_range(0.0..1.0),
                    [rng.gen_range(0.0..1.0), rng.gen_range(y0..y1)],
                )
            })
            .collect()
    }

    #[test]
    fn pde_consistency() {
        for case in cases() {
            for (side, field, nu, y0, y1) in [
                ("fluid", &case.fluid, case.nu_f, 0.0, case.split_y),
                ("solid", &case.solid, case.nu_s, case.split_y, 1.0),
            ] {
                for (t, p) in samples(20, 1, y0, y1) {
                    let h = (field.hessian)(t, p);
                    let r = (field.time_derivative)(t, p) - nu * (h[0] + h[2]) - (field.forcing)(t, p);
                    assert!(r.abs() < 1e-10, "{} {side}: residual {r}", case.name);
                }
            }
        }
    }

    #[test]
    fn derivatives_match_finite_differences() {
        let e = 1e-5;
        for case in cases() {
            let u = &case.fluid;
            for (t, p) in samples(20, 2, 0.1, 0.9) {
                let v = |t: f64, q: Point| (u.value)(t, q);
                let dt = (v(t + e, p) - v(t - e, p)) / (2.0 * e);
                assert!((dt - (u.time_derivative)(t, p)).abs() < 1e-6 * (1.0 + dt.abs()));
                let g = (u.gradient)(t, p);
                let gx = (v(t, [p[0] + e, p[1]]) - v(t, [p[0] - e, p[1]])) / (2.0 * e);
                let gy = (v(t, [p[0], p[1] + e]) - v(t, [p[0], p[1] - e])) / (2.0 * e);
                assert!((gx - g[0]).abs() < 1e-6 && (gy - g[1]).abs() < 1e-6);
                let hxx = (v(t, [p[0] + e, p[1]]) - 2.0 * v(t, p) + v(t, [p[0] - e, p[1]])) / (e * e);
                assert!((hxx - (u.hessian)(t, p)[0]).abs() < 1e-3);
            }
        }
    }

    #[test]
    fn interface_conditions() {
        for case in cases() {
            for (t, p) in samples(20, 3, 0.0, 1.0) {
                let x = [p[0], case.split_y];
                assert!((case.u_exact(t, x) - case.w_exact(t, x)).abs() < 1e-14);
                // n_f = +e2, n_s = -e2
                let flux = -case.nu_s * (case.solid.gradient)(t, x)[1]
                    + case.nu_f * (case.fluid.gradient)(t, x)[1];
                assert!(flux.abs() < 1e-12);
                let l = case.l_exact(t, p[0]);
                assert_eq!(l, case.nu_f * (case.fluid.gradient)(t, x)[1]);
            }
        }
    }

    #[test]
    fn antisymmetry_about_mid_line() {
        for case in cases() {
            for (t, p) in samples(20, 4, 0.0, 1.0) {
                let a = case.u_exact(t, p);
                let b = case.u_exact(t, [1.0 - p[0], p[1]]);
                assert!((a + b).abs() < 1e-14);
            }
        }
    }

    #[test]
    fn named_values() {
        let c1 = case_example1();
        assert_eq!(c1.f_f(0.3, [0.2, 0.4]), 0.0);
        let l = c1.l_exact(0.0, 0.0);
        assert!((l + PI * 2f64.sqrt() / 2.0).abs() < 1e-14);
        assert!((l + 2.221441).abs() < 1e-6);
        let c2 = case_example2();
        let p = [0.3, 0.6];
        assert_eq!(c2.u_exact(0.0, p), (PI * 0.3).cos() * (PI * 0.6).sin());
        assert!(case_by_name("example4").is_err());
        assert_eq!(case_by_name("example3").unwrap().name, "example3");
    }

    #[test]
    fn first_step_data_oracles() {
        let dt = 0.01;
        let d3 = exact_first_step_data(&case_example3(), dt).unwrap();
        for x1 in [0.0, 0.3, 0.85] {
            let exact = ((2.0 * dt).exp() - 2.0 * dt.exp() + 1.0) / dt
                * (PI * x1).cos()
                * (0.75 * PI).sin();
            assert!((d3.big_g1(2, x1) - exact).abs() < 1e-13);
        }
        let d1 = exact_first_step_data(&case_example1(), dt).unwrap();
        let k = 2.0 * PI * PI;
        let exact = -(PI * 2f64.sqrt() / 2.0) * ((-2.0 * k * dt).exp() - (-k * dt).exp());
        assert!((d1.g2(2, 0.0) - exact).abs() < 1e-13);

        let z = exact_first_step_data(&case_zero(), dt).unwrap();
        for n in [2, 3] {
            assert_eq!(z.big_g1(n, 0.4), 0.0);
            assert_eq!(z.big_g2(n, 0.4), 0.0);
        }
        assert_eq!(z.solid_time_difference([0.5, 0.9]), 0.0);
        assert!(exact_first_step_data(&case_zero(), 0.0).is_err());
    }
}
