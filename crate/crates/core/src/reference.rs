//! Reference tetrahedron, polynomial bases on it, and the P4 nonconforming
//! bubble.
//!
//! The reference tetrahedron has vertices `x̂0 = (0,0,0)`, `x̂1 = (1,0,0)`,
//! `x̂2 = (0,1,0)`, `x̂3 = (0,0,1)`, with barycentric coordinates
//! `λ0 = 1 - x - y - z`, `λ1 = x`, `λ2 = y`, `λ3 = z`.

use std::sync::OnceLock;

use num_traits::{One, Zero};

use crate::poly::{rat, rational_to_f64, Polynomial3, Rational, RealPoly};
use crate::quadrature::{quadrature, Cell};

/// Vertex pairs of the six local edges.
pub const LOCAL_EDGES: [[usize; 2]; 6] = [[0, 1], [0, 2], [0, 3], [1, 2], [1, 3], [2, 3]];

/// Local vertex triples of the four faces; face `i` is opposite vertex `i`.
pub const LOCAL_FACES: [[usize; 3]; 4] = [[1, 2, 3], [0, 2, 3], [0, 1, 3], [0, 1, 2]];

pub const REFERENCE_VERTICES: [[f64; 3]; 4] = [[0.0, 0.0, 0.0], [1.0, 0.0, 0.0], [0.0, 1.0, 0.0], [0.0, 0.0, 1.0]];

pub const REFERENCE_VOLUME: f64 = 1.0 / 6.0;

/// Barycentric coordinate `λ_i` as an exact polynomial.
pub fn barycentric(i: usize) -> Polynomial3 {
    match i {
        0 => Polynomial3::linear(Rational::one(), [rat(-1, 1), rat(-1, 1), rat(-1, 1)]),
        1..=3 => Polynomial3::var(i - 1),
        _ => panic!("barycentric index {i} out of range"),
    }
}

pub fn barycentric_coords(p: [f64; 3]) -> [f64; 4] {
    [1.0 - p[0] - p[1] - p[2], p[0], p[1], p[2]]
}

// Coefficients (numerator, denominator, exponent of x^i y^j z^k).
const COMPONENT_1: &[(i128, i128, [u8; 3])] = &[
    (263, 12, [4, 0, 0]),
    (38, 1, [3, 1, 0]),
    (265, 3, [3, 0, 1]),
    (29, 1, [2, 2, 0]),
    (96, 1, [2, 1, 1]),
    (209, 2, [2, 0, 2]),
    (-16, 1, [1, 3, 0]),
    (42, 1, [1, 2, 1]),
    (42, 1, [1, 1, 2]),
    (103, 3, [1, 0, 3]),
    (7, 6, [0, 4, 0]),
    (-1, 1, [0, 2, 2]),
    (-335, 12, [0, 0, 4]),
    (-253, 6, [3, 0, 0]),
    (-87, 2, [2, 1, 0]),
    (-119, 1, [2, 0, 1]),
    (21, 2, [1, 2, 0]),
    (-56, 1, [1, 1, 1]),
    (-65, 1, [1, 0, 2]),
    (112, 3, [0, 0, 3]),
    (703, 28, [2, 0, 0]),
    (7, 2, [1, 1, 0]),
    (251, 7, [1, 0, 1]),
    (-41, 28, [0, 2, 0]),
    (2, 7, [0, 1, 1]),
    (-169, 14, [0, 0, 2]),
    (-181, 42, [1, 0, 0]),
    (13, 21, [0, 1, 0]),
    (73, 840, [0, 0, 0]),
];
const COMPONENT_2: &[(i128, i128, [u8; 3])] = &[
    (-233, 3, [3, 1, 0]),
    (67, 9, [3, 0, 1]),
    (-233, 2, [2, 2, 0]),
    (-235, 1, [2, 1, 1]),
    (163, 6, [2, 0, 2]),
    (-203, 3, [1, 3, 0]),
    (-225, 1, [1, 2, 1]),
    (-209, 1, [1, 1, 2]),
    (301, 9, [1, 0, 3]),
    (-64, 3, [0, 3, 1]),
    (-21, 1, [0, 2, 2]),
    (-16, 3, [0, 1, 3]),
    (113, 18, [3, 0, 0]),
    (1105, 8, [2, 1, 0]),
    (155, 24, [2, 0, 1]),
    (1025, 8, [1, 2, 0]),
    (1077, 4, [1, 1, 1]),
    (-469, 24, [1, 0, 2]),
    (79, 8, [0, 3, 0]),
    (417, 8, [0, 2, 1]),
    (289, 8, [0, 1, 2]),
    (-199, 72, [0, 0, 3]),
    (-625, 56, [2, 0, 0]),
    (-505, 7, [1, 1, 0]),
    (-94, 7, [1, 0, 1]),
    (-447, 28, [0, 2, 0]),
    (-251, 7, [0, 1, 1]),
    (317, 56, [1, 0, 0]),
    (625, 84, [0, 1, 0]),
    (101, 42, [0, 0, 1]),
    (-383, 630, [0, 0, 0]),
];
const COMPONENT_3: &[(i128, i128, [u8; 3])] = &[
    (-10, 1, [3, 1, 0]),
    (-10, 1, [3, 0, 1]),
    (1, 1, [2, 2, 0]),
    (119, 1, [2, 1, 1]),
    (-15, 1, [2, 0, 2]),
    (16, 1, [1, 3, 0]),
    (145, 1, [1, 2, 1]),
    (129, 1, [1, 1, 2]),
    (16, 1, [0, 3, 1]),
    (11, 1, [0, 2, 2]),
    (-29, 4, [0, 0, 4]),
    (-93, 8, [2, 1, 0]),
    (-61, 8, [2, 0, 1]),
    (-301, 8, [1, 2, 0]),
    (-693, 4, [1, 1, 1]),
    (-141, 8, [1, 0, 2]),
    (-13, 4, [0, 3, 0]),
    (-321, 8, [0, 2, 1]),
    (-193, 8, [0, 1, 2]),
    (77, 8, [0, 0, 3]),
    (181, 56, [2, 0, 0]),
    (363, 14, [1, 1, 0]),
    (307, 14, [1, 0, 1]),
    (389, 56, [0, 2, 0]),
    (199, 7, [0, 1, 1]),
    (-563, 168, [1, 0, 0]),
    (-33, 8, [0, 1, 0]),
    (-263, 84, [0, 0, 1]),
    (103, 210, [0, 0, 0]),
];

fn table_to_poly(table: &[(i128, i128, [u8; 3])]) -> Polynomial3 {
    Polynomial3::from_terms(table.iter().map(|&(n, d, e)| (e, rat(n, d))))
}

/// Vector-valued P4 bubble on the reference tetrahedron with vanishing P2
/// moments on all four faces and divergence `4 x (x - y - z)`.
#[derive(Clone, Debug)]
pub struct ReferenceBubble {
    components: [Polynomial3; 3],
    real: [RealPoly; 3],
    /// `grad[a][m] = ∂_m b_a`
    grad: [[RealPoly; 3]; 3],
}

impl ReferenceBubble {
    pub fn standard() -> Self {
        Self::from_components([
            table_to_poly(COMPONENT_1),
            table_to_poly(COMPONENT_2),
            table_to_poly(COMPONENT_3),
        ])
    }

    pub fn from_components(components: [Polynomial3; 3]) -> Self {
        let real = [
            components[0].to_real(),
            components[1].to_real(),
            components[2].to_real(),
        ];
        let grad = std::array::from_fn(|a| std::array::from_fn(|m| components[a].derivative(m).to_real()));
        Self { components, real, grad }
    }

    pub fn components(&self) -> &[Polynomial3; 3] {
        &self.components
    }

    pub fn eval(&self, p: [f64; 3]) -> [f64; 3] {
        [self.real[0].eval(p), self.real[1].eval(p), self.real[2].eval(p)]
    }

    /// Jacobian `J[a][m] = ∂_m b_a` at `p`.
    pub fn grad(&self, p: [f64; 3]) -> [[f64; 3]; 3] {
        std::array::from_fn(|a| std::array::from_fn(|m| self.grad[a][m].eval(p)))
    }

    pub fn divergence(&self) -> Polynomial3 {
        let mut d = Polynomial3::zero();
        for (m, c) in self.components.iter().enumerate() {
            d = &d + &c.derivative(m);
        }
        d
    }

    /// The target divergence `4 x̂1 (x̂1 - x̂2 - x̂3)`.
    pub fn target_divergence() -> Polynomial3 {
        let x = Polynomial3::var(0);
        let rest = &(&x - &Polynomial3::var(1)) - &Polynomial3::var(2);
        (&x * &rest).scale(rat(4, 1))
    }

    /// All 72 face moments `∫_F b_j m dF` computed exactly, ordered
    /// face-major, then component, then test monomial.
    pub fn face_moments_exact(&self) -> Vec<Rational> {
        let mut out = Vec::with_capacity(72);
        for face in 0..4 {
            let param = face_parametrization(face);
            for c in &self.components {
                let trace = c.compose(&param);
                for m in face_test_monomials() {
                    out.push((&trace * &m).integrate_ref_triangle());
                }
            }
        }
        out
    }
}

/// Face-local P2 test monomials `{1, s, t, s², st, t²}` as polynomials in
/// the first two variables.
pub fn face_test_monomials() -> [Polynomial3; 6] {
    let one = Rational::one();
    [
        Polynomial3::monomial([0, 0, 0], one),
        Polynomial3::monomial([1, 0, 0], one),
        Polynomial3::monomial([0, 1, 0], one),
        Polynomial3::monomial([2, 0, 0], one),
        Polynomial3::monomial([1, 1, 0], one),
        Polynomial3::monomial([0, 2, 0], one),
    ]
}

/// Affine parametrization `(s, t) -> A + s (B - A) + t (C - A)` of reference
/// face `face`. Exact moments are taken in the face-local parameter measure.
fn face_parametrization(face: usize) -> [Polynomial3; 3] {
    let [a, b, c] = LOCAL_FACES[face];
    let va = REFERENCE_VERTICES[a];
    let vb = REFERENCE_VERTICES[b];
    let vc = REFERENCE_VERTICES[c];
    let to_r = |v: f64| Rational::from_integer(v as i128);
    std::array::from_fn(|axis| {
        Polynomial3::linear(
            to_r(va[axis]),
            [to_r(vb[axis] - va[axis]), to_r(vc[axis] - va[axis]), Rational::zero()],
        )
    })
}

/// Largest absolute value among the 72 face P2 moments, evaluated with a
/// degree-6 triangle rule in face-local coordinates.
pub fn verify_face_moments(bubble: &ReferenceBubble) -> f64 {
    let rule = quadrature(Cell::Triangle, 6).expect("degree 6 triangle rule");
    let mut max: f64 = 0.0;
    for face in LOCAL_FACES {
        let va = REFERENCE_VERTICES[face[0]];
        let vb = REFERENCE_VERTICES[face[1]];
        let vc = REFERENCE_VERTICES[face[2]];
        let e1 = sub(vb, va);
        let e2 = sub(vc, va);
        let jac = norm(cross(e1, e2));
        let mut moments = [[0.0f64; 6]; 3];
        for (q, w) in rule.iter() {
            let (s, t) = (q[0], q[1]);
            let x = std::array::from_fn(|k| va[k] + s * e1[k] + t * e2[k]);
            let b = bubble.eval(x);
            let tests = [1.0, s, t, s * s, s * t, t * t];
            for j in 0..3 {
                for (k, m) in tests.iter().enumerate() {
                    moments[j][k] += w * jac * b[j] * m;
                }
            }
        }
        for row in moments {
            for v in row {
                max = max.max(v.abs());
            }
        }
    }
    max
}

/// Cubic Lagrange basis on the reference tetrahedron.
///
/// Local node order: vertices 0..4, then two nodes per edge in
/// [`LOCAL_EDGES`] order (the one nearer the first endpoint first), then one
/// node per face in [`LOCAL_FACES`] order.
#[derive(Clone, Debug)]
pub struct LagrangeP3 {
    /// Barycentric multi-indices (summing to 3) of the nodes.
    pub multi_indices: Vec<[u8; 4]>,
    pub basis: Vec<Polynomial3>,
    real: Vec<RealPoly>,
    grad: Vec<[RealPoly; 3]>,
}

pub const P3_DIM: usize = 20;

impl LagrangeP3 {
    pub fn new() -> Self {
        let mut multi_indices = Vec::with_capacity(P3_DIM);
        for v in 0..4 {
            let mut a = [0u8; 4];
            a[v] = 3;
            multi_indices.push(a);
        }
        for [a, b] in LOCAL_EDGES {
            let mut near_a = [0u8; 4];
            near_a[a] = 2;
            near_a[b] = 1;
            let mut near_b = [0u8; 4];
            near_b[a] = 1;
            near_b[b] = 2;
            multi_indices.push(near_a);
            multi_indices.push(near_b);
        }
        for f in LOCAL_FACES {
            let mut idx = [0u8; 4];
            for v in f {
                idx[v] = 1;
            }
            multi_indices.push(idx);
        }
        let lambdas: Vec<Polynomial3> = (0..4).map(barycentric).collect();
        let basis: Vec<Polynomial3> = multi_indices
            .iter()
            .map(|alpha| {
                let mut p = Polynomial3::constant(Rational::one());
                for (i, &ai) in alpha.iter().enumerate() {
                    for k in 0..ai as i128 {
                        // (3 λ_i - k) / (k + 1)
                        let factor = &lambdas[i].scale(rat(3, k + 1)) - &Polynomial3::constant(rat(k, k + 1));
                        p = &p * &factor;
                    }
                }
                p
            })
            .collect();
        let real = basis.iter().map(Polynomial3::to_real).collect();
        let grad = basis
            .iter()
            .map(|p| std::array::from_fn(|m| p.derivative(m).to_real()))
            .collect();
        Self {
            multi_indices,
            basis,
            real,
            grad,
        }
    }

    /// Reference coordinates of node `i`.
    pub fn node(&self, i: usize) -> [f64; 3] {
        let a = self.multi_indices[i];
        [a[1] as f64 / 3.0, a[2] as f64 / 3.0, a[3] as f64 / 3.0]
    }

    pub fn eval(&self, p: [f64; 3]) -> [f64; P3_DIM] {
        std::array::from_fn(|i| self.real[i].eval(p))
    }

    /// `out[i][m] = ∂_m l_i(p)`
    pub fn grad(&self, p: [f64; 3]) -> [[f64; 3]; P3_DIM] {
        std::array::from_fn(|i| std::array::from_fn(|m| self.grad[i][m].eval(p)))
    }
}

impl Default for LagrangeP3 {
    fn default() -> Self {
        Self::new()
    }
}

pub fn eval_p3_basis(p: [f64; 3]) -> [f64; P3_DIM] {
    tables().p3.eval(p)
}

pub fn grad_p3_basis(p: [f64; 3]) -> [[f64; 3]; P3_DIM] {
    tables().p3.grad(p)
}

pub const P2_DIM: usize = 10;

/// Monomial basis of P2 in reference coordinates:
/// `1, x, y, z, x², xy, xz, y², yz, z²`.
pub const P2_EXPONENTS: [[u8; 3]; P2_DIM] = [
    [0, 0, 0],
    [1, 0, 0],
    [0, 1, 0],
    [0, 0, 1],
    [2, 0, 0],
    [1, 1, 0],
    [1, 0, 1],
    [0, 2, 0],
    [0, 1, 1],
    [0, 0, 2],
];

#[derive(Clone, Debug)]
pub struct ModalP2 {
    pub basis: Vec<Polynomial3>,
}

impl ModalP2 {
    pub fn new() -> Self {
        Self {
            basis: P2_EXPONENTS
                .iter()
                .map(|&e| Polynomial3::monomial(e, Rational::one()))
                .collect(),
        }
    }

    pub fn eval(p: [f64; 3]) -> [f64; P2_DIM] {
        let [x, y, z] = p;
        [1.0, x, y, z, x * x, x * y, x * z, y * y, y * z, z * z]
    }

    /// Coefficients of an arbitrary polynomial of degree <= 2 in this basis.
    pub fn coefficients(p: &Polynomial3) -> Option<[Rational; P2_DIM]> {
        if p.degree().unwrap_or(0) > 2 {
            return None;
        }
        Some(std::array::from_fn(|i| p.coeff(P2_EXPONENTS[i])))
    }
}

impl Default for ModalP2 {
    fn default() -> Self {
        Self::new()
    }
}

/// Shared reference-element data, built once per process.
pub struct ReferenceTables {
    pub bubble: ReferenceBubble,
    pub p3: LagrangeP3,
    pub p2: ModalP2,
}

pub fn tables() -> &'static ReferenceTables {
    static TABLES: OnceLock<ReferenceTables> = OnceLock::new();
    TABLES.get_or_init(|| ReferenceTables {
        bubble: ReferenceBubble::standard(),
        p3: LagrangeP3::new(),
        p2: ModalP2::new(),
    })
}

pub fn eval_bubble(p: [f64; 3]) -> [f64; 3] {
    tables().bubble.eval(p)
}

pub fn grad_bubble(p: [f64; 3]) -> [[f64; 3]; 3] {
    tables().bubble.grad(p)
}

pub(crate) fn sub(a: [f64; 3], b: [f64; 3]) -> [f64; 3] {
    [a[0] - b[0], a[1] - b[1], a[2] - b[2]]
}

pub(crate) fn cross(a: [f64; 3], b: [f64; 3]) -> [f64; 3] {
    [
        a[1] * b[2] - a[2] * b[1],
        a[2] * b[0] - a[0] * b[2],
        a[0] * b[1] - a[1] * b[0],
    ]
}

pub(crate) fn norm(a: [f64; 3]) -> f64 {
    (a[0] * a[0] + a[1] * a[1] + a[2] * a[2]).sqrt()
}

pub fn rational_point(p: [Rational; 3]) -> [f64; 3] {
    p.map(|c| rational_to_f64(&c))
}
