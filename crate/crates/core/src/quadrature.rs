//! Quadrature rules on the reference triangle and on intervals.

/// Symmetric triangle rule in barycentric coordinates.
///
/// Weights are normalized to sum to one, so the integral over a physical
/// triangle is `area * sum(w_q * f(x_q))`.
#[derive(Debug, Clone)]
pub struct QuadratureRule {
    pub points: Vec<[f64; 3]>,
    pub weights: Vec<f64>,
    pub degree: usize,
}

impl QuadratureRule {
    /// Smallest available rule exact for polynomials of `degree`.
    pub fn triangle(degree: usize) -> Self {
        match degree {
            0 | 1 => Self::centroid(),
            2 => Self::degree2(),
            3 | 4 => Self::dunavant4(),
            5 | 6 => Self::dunavant6(),
            _ => panic!("no triangle rule of degree {degree}"),
        }
    }

    fn centroid() -> Self {
        let c = 1.0 / 3.0;
        Self {
            points: vec![[c, c, c]],
            weights: vec![1.0],
            degree: 1,
        }
    }

    fn degree2() -> Self {
        let (a, b) = (2.0 / 3.0, 1.0 / 6.0);
        Self {
            points: vec![[a, b, b], [b, a, b], [b, b, a]],
            weights: vec![1.0 / 3.0; 3],
            degree: 2,
        }
    }

    fn dunavant4() -> Self {
        let mut rule = Self {
            points: Vec::new(),
            weights: Vec::new(),
            degree: 4,
        };
        rule.push_orbit3(0.445948490915965, 0.223381589678011);
        rule.push_orbit3(0.091576213509771, 0.109951743655322);
        rule
    }

    fn dunavant6() -> Self {
        let mut rule = Self {
            points: Vec::new(),
            weights: Vec::new(),
            degree: 6,
        };
        rule.push_orbit3(0.249286745170910, 0.116786275726379);
        rule.push_orbit3(0.063089014491502, 0.050844906370207);
        rule.push_orbit6(
            0.053145049844817,
            0.310352451033784,
            0.082851075618374,
        );
        rule
    }

    // (a, a, 1-2a) and its rotations
    fn push_orbit3(&mut self, a: f64, w: f64) {
        let b = 1.0 - 2.0 * a;
        for p in [[a, a, b], [a, b, a], [b, a, a]] {
            self.points.push(p);
            self.weights.push(w);
        }
    }

    // all permutations of (a, b, 1-a-b)
    fn push_orbit6(&mut self, a: f64, b: f64, w: f64) {
        let c = 1.0 - a - b;
        for p in [
            [a, b, c],
            [a, c, b],
            [b, a, c],
            [b, c, a],
            [c, a, b],
            [c, b, a],
        ] {
            self.points.push(p);
            self.weights.push(w);
        }
    }

    pub fn len(&self) -> usize {
        self.weights.len()
    }

    pub fn is_empty(&self) -> bool {
        self.weights.is_empty()
    }
}

/// Gauss-Legendre rule on [0, 1] with `n` points.
#[derive(Debug, Clone)]
pub struct GaussLegendre {
    pub points: Vec<f64>,
    pub weights: Vec<f64>,
}

impl GaussLegendre {
    pub fn new(n: usize) -> Self {
        assert!(n >= 1);
        let mut points = vec![0.0; n];
        let mut weights = vec![0.0; n];
        for i in 0..n {
            // Newton iteration on P_n starting from the Chebyshev guess
            let mut x = (std::f64::consts::PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
            let mut dp = 1.0;
            for _ in 0..100 {
                let (p, d) = legendre(n, x);
                dp = d;
                let dx = p / d;
                x -= dx;
                if dx.abs() < 1e-16 {
                    break;
                }
            }
            let (_, d) = legendre(n, x);
            dp = if d != 0.0 { d } else { dp };
            // map from [-1, 1] to [0, 1]
            points[i] = 0.5 * (1.0 - x);
            weights[i] = 1.0 / ((1.0 - x * x) * dp * dp);
        }
        Self { points, weights }
    }

    pub fn degree(&self) -> usize {
        2 * self.points.len() - 1
    }
}

fn legendre(n: usize, x: f64) -> (f64, f64) {
    let (mut p0, mut p1) = (1.0, x);
    for k in 2..=n {
        let k = k as f64;
        let p2 = ((2.0 * k - 1.0) * x * p1 - (k - 1.0) * p0) / k;
        p0 = p1;
        p1 = p2;
    }
    if n == 0 {
        return (1.0, 0.0);
    }
    let d = n as f64 * (x * p1 - p0) / (x * x - 1.0);
    (p1, d)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn factorial(n: u32) -> f64 {
        (1..=n).map(|k| k as f64).product()
    }

    // integral of x^a y^b over the reference triangle, divided by its area 1/2
    fn monomial_mean(a: u32, b: u32) -> f64 {
        2.0 * factorial(a) * factorial(b) / factorial(a + b + 2)
    }

    #[test]
    fn triangle_rules_are_exact_to_their_degree() {
        for degree in [1, 2, 4, 6] {
            let rule = QuadratureRule::triangle(degree);
            assert_eq!(rule.degree, degree);
            let wsum: f64 = rule.weights.iter().sum();
            assert!((wsum - 1.0).abs() < 1e-13, "degree {degree}: {wsum}");
            for total in 0..=degree as u32 {
                for a in 0..=total {
                    let b = total - a;
                    let q: f64 = rule
                        .points
                        .iter()
                        .zip(&rule.weights)
                        .map(|(p, w)| w * p[1].powi(a as i32) * p[2].powi(b as i32))
                        .sum();
                    let exact = monomial_mean(a, b);
                    assert!(
                        (q - exact).abs() < 1e-13,
                        "degree {degree} monomial x^{a} y^{b}: {q} vs {exact}"
                    );
                }
            }
        }
    }

    #[test]
    fn gauss_legendre_exactness() {
        for n in 1..=6 {
            let g = GaussLegendre::new(n);
            for p in 0..=g.degree() as i32 {
                let q: f64 = g
                    .points
                    .iter()
                    .zip(&g.weights)
                    .map(|(x, w)| w * x.powi(p))
                    .sum();
                assert!((q - 1.0 / (p as f64 + 1.0)).abs() < 1e-14, "n={n} p={p}");
            }
        }
    }
}
