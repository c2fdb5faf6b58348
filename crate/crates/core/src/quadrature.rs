//! Collapsed-coordinate (conical product) Gauss rules on the reference
//! tetrahedron and triangle.
//!
//! A rule of exactness degree `d` uses `m = d / 2 + 1` points per collapsed
//! direction: Gauss–Jacobi with weight `(1-u)^2` and `(1-v)` in the collapsed
//! directions and Gauss–Legendre in the last. Nodes come from Newton iteration
//! with root suppression on the Jacobi three-term recurrence.

use crate::error::{Error, Result};

/// Reference cell a rule lives on.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Cell {
    /// `{x, y, z >= 0, x + y + z <= 1}`, volume 1/6.
    Tetrahedron,
    /// `{x, y >= 0, x + y <= 1}`, area 1/2. Points carry `z = 0`.
    Triangle,
}

impl Cell {
    pub fn measure(self) -> f64 {
        match self {
            Cell::Tetrahedron => 1.0 / 6.0,
            Cell::Triangle => 0.5,
        }
    }

    pub fn max_degree(self) -> usize {
        MAX_DEGREE
    }

    fn name(self) -> &'static str {
        match self {
            Cell::Tetrahedron => "tetrahedron",
            Cell::Triangle => "triangle",
        }
    }
}

pub const MAX_DEGREE: usize = 30;

#[derive(Clone, Debug)]
pub struct QuadratureRule {
    pub cell: Cell,
    pub degree: usize,
    /// Cartesian coordinates on the reference cell.
    pub points: Vec<[f64; 3]>,
    pub weights: Vec<f64>,
}

impl QuadratureRule {
    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = (&[f64; 3], f64)> {
        self.points.iter().zip(self.weights.iter().copied())
    }

    pub fn integrate<F: FnMut([f64; 3]) -> f64>(&self, mut f: F) -> f64 {
        self.iter().map(|(p, w)| w * f(*p)).sum()
    }
}

/// Rule on `cell` exact for polynomials of total degree `degree`.
pub fn quadrature(cell: Cell, degree: usize) -> Result<QuadratureRule> {
    if degree > MAX_DEGREE {
        return Err(Error::UnsupportedDegree {
            cell: cell.name(),
            degree,
            max: MAX_DEGREE,
        });
    }
    let m = degree / 2 + 1;
    let (gl_x, gl_w) = gauss_jacobi(m, 0.0);
    let (j1_x, j1_w) = gauss_jacobi(m, 1.0);
    let mut points = Vec::new();
    let mut weights = Vec::new();
    match cell {
        Cell::Triangle => {
            for (&a, &wa) in j1_x.iter().zip(&j1_w) {
                let u = 0.5 * (1.0 + a);
                for (&b, &wb) in gl_x.iter().zip(&gl_w) {
                    let v = 0.5 * (1.0 + b);
                    points.push([u, v * (1.0 - u), 0.0]);
                    weights.push(wa / 4.0 * wb / 2.0);
                }
            }
        }
        Cell::Tetrahedron => {
            let (j2_x, j2_w) = gauss_jacobi(m, 2.0);
            for (&a, &wa) in j2_x.iter().zip(&j2_w) {
                let u = 0.5 * (1.0 + a);
                for (&b, &wb) in j1_x.iter().zip(&j1_w) {
                    let v = 0.5 * (1.0 + b);
                    for (&c, &wc) in gl_x.iter().zip(&gl_w) {
                        let w = 0.5 * (1.0 + c);
                        points.push([u, v * (1.0 - u), w * (1.0 - u) * (1.0 - v)]);
                        weights.push(wa / 8.0 * wb / 4.0 * wc / 2.0);
                    }
                }
            }
        }
    }
    Ok(QuadratureRule {
        cell,
        degree,
        points,
        weights,
    })
}

/// Jacobi polynomial `P_n^{(alpha, 0)}(x)` and its derivative.
fn jacobi(n: usize, alpha: f64, x: f64) -> (f64, f64) {
    let eval = |n: usize, a: f64, b: f64| -> f64 {
        if n == 0 {
            return 1.0;
        }
        let mut p0 = 1.0;
        let mut p1 = 0.5 * ((a + b + 2.0) * x + (a - b));
        for k in 2..=n {
            let k = k as f64;
            let s = 2.0 * k + a + b;
            let c1 = 2.0 * k * (k + a + b) * (s - 2.0);
            let c2 = (s - 1.0) * (s * (s - 2.0) * x + a * a - b * b);
            let c3 = 2.0 * (k + a - 1.0) * (k + b - 1.0) * s;
            let p2 = (c2 * p1 - c3 * p0) / c1;
            p0 = p1;
            p1 = p2;
        }
        p1
    };
    let p = eval(n, alpha, 0.0);
    let dp = if n == 0 {
        0.0
    } else {
        0.5 * (n as f64 + alpha + 1.0) * eval(n - 1, alpha + 1.0, 1.0)
    };
    (p, dp)
}

/// Nodes and weights on `[-1, 1]` for the weight `(1 - x)^alpha`.
fn gauss_jacobi(n: usize, alpha: f64) -> (Vec<f64>, Vec<f64>) {
    let mut nodes: Vec<f64> = Vec::with_capacity(n);
    for i in 0..n {
        let mut x = -((2 * i + 1) as f64 * std::f64::consts::PI / (2 * n) as f64).cos();
        if i > 0 {
            x = 0.5 * (x + nodes[i - 1]);
        }
        for _ in 0..100 {
            let (p, dp) = jacobi(n, alpha, x);
            let suppress: f64 = nodes.iter().map(|&r| 1.0 / (x - r)).sum();
            let dx = p / (dp - p * suppress);
            x -= dx;
            if dx.abs() < 1e-16 {
                break;
            }
        }
        nodes.push(x);
    }
    nodes.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let weights = nodes
        .iter()
        .map(|&x| {
            let (_, dp) = jacobi(n, alpha, x);
            2f64.powf(alpha + 1.0) / ((1.0 - x * x) * dp * dp)
        })
        .collect();
    (nodes, weights)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::poly::{rational_to_f64, tet_monomial_integral, triangle_monomial_integral};

    #[test]
    fn gauss_legendre_small_cases() {
        let (x, w) = gauss_jacobi(2, 0.0);
        let r = 1.0 / 3f64.sqrt();
        assert!((x[0] + r).abs() < 1e-15 && (x[1] - r).abs() < 1e-15);
        assert!((w[0] - 1.0).abs() < 1e-14 && (w[1] - 1.0).abs() < 1e-14);
    }

    #[test]
    fn tet_degree_one_is_centroid() {
        let q = quadrature(Cell::Tetrahedron, 1).unwrap();
        assert_eq!(q.len(), 1);
        for c in q.points[0] {
            assert!((c - 0.25).abs() < 1e-15);
        }
        assert!((q.weights[0] - 1.0 / 6.0).abs() < 1e-16);
    }

    #[test]
    fn tet_degree_six_integrates_x2y2z2() {
        let q = quadrature(Cell::Tetrahedron, 6).unwrap();
        // 2! 2! 2! / 9!
        let exact = 8.0 / 362880.0;
        let got = q.integrate(|p| (p[0] * p[1] * p[2]).powi(2));
        assert!((got - exact).abs() < 1e-18, "{got} vs {exact}");
    }

    #[test]
    fn triangle_degree_six_integrates_all_monomials() {
        let q = quadrature(Cell::Triangle, 6).unwrap();
        let mut count = 0;
        for i in 0..=6u8 {
            for j in 0..=(6 - i) {
                let exact = rational_to_f64(&triangle_monomial_integral(i, j));
                let got = q.integrate(|p| p[0].powi(i as i32) * p[1].powi(j as i32));
                assert!((got - exact).abs() < 1e-14);
                count += 1;
            }
        }
        assert_eq!(count, 28);
    }

    #[test]
    fn every_supported_tet_rule_is_exact() {
        for degree in [1usize, 2, 4, 6, 8, 10, 14] {
            let q = quadrature(Cell::Tetrahedron, degree).unwrap();
            for i in 0..=degree as u8 {
                for j in 0..=(degree as u8 - i) {
                    for k in 0..=(degree as u8 - i - j) {
                        let exact = rational_to_f64(&tet_monomial_integral([i, j, k]));
                        let got = q.integrate(|p| p[0].powi(i as i32) * p[1].powi(j as i32) * p[2].powi(k as i32));
                        assert!(
                            (got - exact).abs() < 1e-14,
                            "degree {degree} monomial {i},{j},{k}: {got} vs {exact}"
                        );
                    }
                }
            }
        }
    }

    #[test]
    fn unsupported_degree_is_rejected() {
        let err = quadrature(Cell::Tetrahedron, 31).unwrap_err();
        assert!(matches!(err, Error::UnsupportedDegree { degree: 31, .. }));
    }
}
