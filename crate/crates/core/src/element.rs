//! The nine Piola-mapped bubbles of a physical tetrahedron.
//!
//! A tetrahedron with local vertices `0..4` is renumbered in nine ways; for
//! each numbering `p`, the affine map `F_p` sends reference vertex `x̂_j` to
//! local vertex `p[j]`, and the bubble is `b_p(x) = J_p ĥb(F_p⁻¹ x)` (no
//! determinant factor). Because `J_p` is constant,
//! `div b_p = (div̂ ĥb) ∘ F_p⁻¹ = 4 λ_{p1} (λ_{p1} - λ_{p2} - λ_{p3})`.

use std::sync::OnceLock;

use crate::error::{Error, Result};
use crate::mesh::Point;
use crate::poly::{Polynomial3, Rational, RealPoly};
use crate::reference::{barycentric, tables, ModalP2, ReferenceBubble, P2_DIM, P2_EXPONENTS};

/// The nine vertex numberings as labels of the sketch tetrahedron `T_1672`.
pub const ORDERING_LABELS: [[u8; 4]; 9] = [
    [1, 6, 7, 2],
    [1, 7, 2, 6],
    [1, 2, 6, 7],
    [6, 7, 1, 2],
    [6, 1, 2, 7],
    [6, 2, 7, 1],
    [7, 1, 6, 2],
    [7, 2, 1, 6],
    [2, 1, 7, 6],
];

/// Labels `(1, 6, 7, 2)` occupy local slots `(0, 1, 2, 3)`.
pub const LABELS: [u8; 4] = [1, 6, 7, 2];

/// Unit-cube positions of the labels `(1, 6, 7, 2)`: the unique assignment
/// under which the nine mapped divergences take their tabulated form (see
/// [`numbering_oracle`]).
pub const CUBE_LABEL_POSITIONS: [Point; 4] = [[0.0, 0.0, 0.0], [1.0, 0.0, 1.0], [1.0, 1.0, 1.0], [1.0, 0.0, 0.0]];

pub const NUM_BUBBLES: usize = 9;

fn slot_of(label: u8) -> usize {
    LABELS
        .iter()
        .position(|&l| l == label)
        .expect("label of the sketch tetrahedron")
}

/// The nine numberings as permutations of local vertex slots.
pub fn orderings() -> [[usize; 4]; NUM_BUBBLES] {
    ORDERING_LABELS.map(|o| o.map(slot_of))
}

/// Tabulated divergences of the nine bubbles on `T_1672` placed in the unit
/// cube by [`CUBE_LABEL_POSITIONS`].
pub const TABULATED_DIVERGENCES: [fn([f64; 3]) -> f64; NUM_BUBBLES] = [
    |[x, y, z]| 4.0 * (y - z) * (2.0 * y + x - 2.0 * z),
    |[x, y, _]| -4.0 * y * (x - 2.0 * y),
    |[x, _, z]| 4.0 * (x - z) * (x - 2.0 * z),
    |[_, y, z]| 4.0 * y * (y + z - 1.0),
    |[x, y, z]| 4.0 * (2.0 * x + y - z - 1.0) * (x - 1.0),
    |[x, y, z]| 4.0 * (2.0 * x - y - z - 1.0) * (x - z),
    |[x, y, _]| 4.0 * (x - 1.0) * (2.0 * x - y - 1.0),
    |[x, y, z]| 4.0 * (2.0 * x + y - 2.0 * z - 1.0) * (x - z),
    |[x, _, z]| 4.0 * (x - 1.0) * (x + z - 1.0),
];

pub type Mat3 = [[f64; 3]; 3];

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct AffineMap {
    /// `jac[d][m] = ∂x_d / ∂x̂_m`
    pub jac: Mat3,
    pub inv: Mat3,
    pub det: f64,
    pub origin: Point,
}

impl AffineMap {
    /// Map sending the reference vertices `x̂0..x̂3` to `v[0]..v[3]`.
    pub fn from_vertices(v: [Point; 4]) -> Result<Self> {
        let mut jac = [[0.0; 3]; 3];
        for d in 0..3 {
            for m in 0..3 {
                jac[d][m] = v[m + 1][d] - v[0][d];
            }
        }
        let det = det3(&jac);
        let scale: f64 = jac.iter().flatten().map(|c| c.abs()).fold(0.0, f64::max);
        if !(det.abs() > 1e-14 * scale.powi(3)) {
            return Err(Error::SingularMap(det));
        }
        Ok(Self {
            jac,
            inv: inv3(&jac, det),
            det,
            origin: v[0],
        })
    }

    pub fn identity() -> Self {
        let eye = [[1.0, 0.0, 0.0], [0.0, 1.0, 0.0], [0.0, 0.0, 1.0]];
        Self {
            jac: eye,
            inv: eye,
            det: 1.0,
            origin: [0.0; 3],
        }
    }

    pub fn apply(&self, xh: [f64; 3]) -> Point {
        let mut x = self.origin;
        for d in 0..3 {
            for m in 0..3 {
                x[d] += self.jac[d][m] * xh[m];
            }
        }
        x
    }

    pub fn apply_inverse(&self, x: Point) -> [f64; 3] {
        let r = [x[0] - self.origin[0], x[1] - self.origin[1], x[2] - self.origin[2]];
        mat_vec(&self.inv, r)
    }
}

pub fn det3(m: &Mat3) -> f64 {
    m[0][0] * (m[1][1] * m[2][2] - m[1][2] * m[2][1]) - m[0][1] * (m[1][0] * m[2][2] - m[1][2] * m[2][0])
        + m[0][2] * (m[1][0] * m[2][1] - m[1][1] * m[2][0])
}

fn inv3(m: &Mat3, det: f64) -> Mat3 {
    let c = |r0: usize, c0: usize, r1: usize, c1: usize| m[r0][c0] * m[r1][c1] - m[r0][c1] * m[r1][c0];
    [
        [c(1, 1, 2, 2) / det, -c(0, 1, 2, 2) / det, c(0, 1, 1, 2) / det],
        [-c(1, 0, 2, 2) / det, c(0, 0, 2, 2) / det, -c(0, 0, 1, 2) / det],
        [c(1, 0, 2, 1) / det, -c(0, 0, 2, 1) / det, c(0, 0, 1, 1) / det],
    ]
}

pub fn mat_vec(m: &Mat3, v: [f64; 3]) -> [f64; 3] {
    std::array::from_fn(|i| m[i][0] * v[0] + m[i][1] * v[1] + m[i][2] * v[2])
}

pub fn mat_mul(a: &Mat3, b: &Mat3) -> Mat3 {
    std::array::from_fn(|i| std::array::from_fn(|j| (0..3).map(|k| a[i][k] * b[k][j]).sum()))
}

/// Mapped bubble `J ĥb(F⁻¹ x)`.
pub fn piola_bubble(map: &AffineMap, x: Point) -> [f64; 3] {
    let xh = map.apply_inverse(x);
    mat_vec(&map.jac, tables().bubble.eval(xh))
}

/// Physical Jacobian `∂_d (b)_n = (J ∇̂ĥb J⁻¹)_{nd}` of the mapped bubble.
pub fn bubble_gradients(map: &AffineMap, x: Point) -> Mat3 {
    let xh = map.apply_inverse(x);
    let g = tables().bubble.grad(xh);
    mat_mul(&mat_mul(&map.jac, &g), &map.inv)
}

/// Polynomial of degree <= 2 in physical coordinates, coefficients in the
/// [`P2_EXPONENTS`] monomial order.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Quadratic(pub [f64; P2_DIM]);

impl Quadratic {
    pub fn eval(&self, x: Point) -> f64 {
        let m = ModalP2::eval(x);
        self.0.iter().zip(m).map(|(c, v)| c * v).sum()
    }

    /// Product of two affine functions `(c + g·x)`.
    fn affine_product(a: (f64, [f64; 3]), b: (f64, [f64; 3])) -> Self {
        let mut out = [0.0; P2_DIM];
        for (k, e) in P2_EXPONENTS.iter().enumerate() {
            let deg: u8 = e.iter().sum();
            out[k] = match deg {
                0 => a.0 * b.0,
                1 => {
                    let d = e.iter().position(|&x| x == 1).unwrap();
                    a.0 * b.1[d] + b.0 * a.1[d]
                }
                _ => {
                    if let Some(d) = e.iter().position(|&x| x == 2) {
                        a.1[d] * b.1[d]
                    } else {
                        let mut idx = e.iter().enumerate().filter(|(_, &x)| x == 1).map(|(i, _)| i);
                        let (d0, d1) = (idx.next().unwrap(), idx.next().unwrap());
                        a.1[d0] * b.1[d1] + a.1[d1] * b.1[d0]
                    }
                }
            };
        }
        Quadratic(out)
    }
}

/// Divergence `4 x̂1 (x̂1 - x̂2 - x̂3) ∘ F⁻¹` as a physical quadratic.
pub fn mapped_divergence(map: &AffineMap) -> Quadratic {
    // x̂_m = inv[m]·x - inv[m]·origin
    let coord = |m: usize| {
        let g = map.inv[m];
        let c = -(g[0] * map.origin[0] + g[1] * map.origin[1] + g[2] * map.origin[2]);
        (c, g)
    };
    let (c1, g1) = coord(0);
    let (c2, g2) = coord(1);
    let (c3, g3) = coord(2);
    let diff = (c1 - c2 - c3, std::array::from_fn(|d| g1[d] - g2[d] - g3[d]));
    let mut q = Quadratic::affine_product((c1, g1), diff);
    for c in q.0.iter_mut() {
        *c *= 4.0;
    }
    q
}

/// Maps and divergences of the nine bubbles of one physical tetrahedron.
#[derive(Clone, Debug)]
pub struct ElementBubbleSet {
    pub maps: [AffineMap; NUM_BUBBLES],
    pub divergences: [Quadratic; NUM_BUBBLES],
}

impl ElementBubbleSet {
    pub fn new(vertices: [Point; 4]) -> Result<Self> {
        let ords = orderings();
        let mut maps = [AffineMap::identity(); NUM_BUBBLES];
        for (k, p) in ords.iter().enumerate() {
            maps[k] = AffineMap::from_vertices(p.map(|s| vertices[s]))?;
        }
        let divergences = maps.map(|m| mapped_divergence(&m));
        Ok(Self { maps, divergences })
    }

    pub fn eval(&self, k: usize, x: Point) -> [f64; 3] {
        piola_bubble(&self.maps[k], x)
    }

    pub fn grad(&self, k: usize, x: Point) -> Mat3 {
        bubble_gradients(&self.maps[k], x)
    }
}

/// The nine physical bubble divergences of a tetrahedron.
pub fn bubble_divergences(vertices: [Point; 4]) -> Result<[Quadratic; NUM_BUBBLES]> {
    Ok(ElementBubbleSet::new(vertices)?.divergences)
}

/// A bubble expressed on the reference tetrahedron in the element's own
/// (slot-order) coordinates: the physical bubble is `J_T b̂(F_T⁻¹ x)`.
#[derive(Clone, Debug)]
pub struct LocalBubble {
    pub components: [Polynomial3; 3],
    pub divergence: Polynomial3,
    real: [RealPoly; 3],
    grad: [[RealPoly; 3]; 3],
}

impl LocalBubble {
    pub fn eval(&self, p: [f64; 3]) -> [f64; 3] {
        std::array::from_fn(|a| self.real[a].eval(p))
    }

    /// `out[a][m] = ∂_m b̂_a`
    pub fn grad(&self, p: [f64; 3]) -> Mat3 {
        std::array::from_fn(|a| std::array::from_fn(|m| self.grad[a][m].eval(p)))
    }
}

/// Reference vertex `i` as an integer vector (`x̂0` is the origin).
fn ref_vertex(i: usize) -> [i128; 3] {
    let mut v = [0; 3];
    if i > 0 {
        v[i - 1] = 1;
    }
    v
}

/// `b̂_p(ξ) = S_p ĥb(σ_p⁻¹ ξ)` where `σ_p` is the reference self-map sending
/// `x̂_j` to `x̂_{p[j]}` and `S_p` its (integer) Jacobian. Exact rationals.
pub fn local_bubble(bubble: &ReferenceBubble, p: [usize; 4]) -> LocalBubble {
    let base = ref_vertex(p[0]);
    // S[a][j] = (x̂_{p[j+1]} - x̂_{p[0]})_a
    let s: [[i128; 3]; 3] = std::array::from_fn(|a| std::array::from_fn(|j| ref_vertex(p[j + 1])[a] - base[a]));
    // σ_p⁻¹(ξ) has coordinates λ_{p[1]}(ξ), λ_{p[2]}(ξ), λ_{p[3]}(ξ)
    let subs = [barycentric(p[1]), barycentric(p[2]), barycentric(p[3])];
    let pulled: Vec<Polynomial3> = bubble.components().iter().map(|c| c.compose(&subs)).collect();
    let components: [Polynomial3; 3] = std::array::from_fn(|a| {
        let mut acc = Polynomial3::zero();
        for j in 0..3 {
            if s[a][j] != 0 {
                acc = &acc + &pulled[j].scale(Rational::from_integer(s[a][j]));
            }
        }
        acc
    });
    let mut divergence = Polynomial3::zero();
    for (m, c) in components.iter().enumerate() {
        divergence = &divergence + &c.derivative(m);
    }
    let real = std::array::from_fn(|a| components[a].to_real());
    let grad = std::array::from_fn(|a| std::array::from_fn(|m| components[a].derivative(m).to_real()));
    LocalBubble {
        components,
        divergence,
        real,
        grad,
    }
}

/// The nine local bubbles of the standard reference bubble, built once.
pub fn local_bubbles() -> &'static [LocalBubble; NUM_BUBBLES] {
    static CELL: OnceLock<[LocalBubble; NUM_BUBBLES]> = OnceLock::new();
    CELL.get_or_init(|| {
        let b = &tables().bubble;
        orderings().map(|p| local_bubble(b, p))
    })
}

/// Expected divergence of local bubble `k` as an exact reference polynomial.
pub fn local_divergence_target(k: usize) -> Polynomial3 {
    let p = orderings()[k];
    let (l1, l2, l3) = (barycentric(p[1]), barycentric(p[2]), barycentric(p[3]));
    let rest = &(&l1 - &l2) - &l3;
    (&l1 * &rest).scale(Rational::from_integer(4))
}

/// One candidate placement accepted by the numbering oracle.
#[derive(Clone, Debug, PartialEq)]
pub struct NumberingMatch {
    /// Positions of labels `(1, 6, 7, 2)`.
    pub positions: [Point; 4],
    /// Cyclic shift `r`: reference vertex `x̂_j` goes to ordering position
    /// `(j + r) mod 4`. `r = 0` is the standard convention.
    pub shift: usize,
}

/// Brute-force search over all placements of the labels `(1, 6, 7, 2)` on
/// distinct unit-cube corners and all cyclic reference-vertex conventions,
/// keeping those for which `4 x̂1 (x̂1 - x̂2 - x̂3) ∘ F_i⁻¹` reproduces every
/// entry of [`TABULATED_DIVERGENCES`] at `samples` to `tol`.
pub fn numbering_oracle(samples: &[Point], tol: f64) -> Vec<NumberingMatch> {
    let corners: Vec<Point> = (0..8)
        .map(|c| [(c & 1) as f64, ((c >> 1) & 1) as f64, ((c >> 2) & 1) as f64])
        .collect();
    let mut out = Vec::new();
    for a in 0..8 {
        for b in 0..8 {
            for c in 0..8 {
                for d in 0..8 {
                    let ids = [a, b, c, d];
                    if (0..4).any(|i| (i + 1..4).any(|j| ids[i] == ids[j])) {
                        continue;
                    }
                    let positions = ids.map(|i| corners[i]);
                    for shift in 0..4 {
                        if placement_matches(&positions, shift, samples, tol) {
                            out.push(NumberingMatch { positions, shift });
                        }
                    }
                }
            }
        }
    }
    out
}

fn placement_matches(positions: &[Point; 4], shift: usize, samples: &[Point], tol: f64) -> bool {
    for (labels, formula) in ORDERING_LABELS.iter().zip(TABULATED_DIVERGENCES) {
        let verts: [Point; 4] = std::array::from_fn(|j| positions[slot_of(labels[(j + shift) % 4])]);
        let Ok(map) = AffineMap::from_vertices(verts) else {
            return false;
        };
        for &x in samples {
            let xh = map.apply_inverse(x);
            let div = 4.0 * xh[0] * (xh[0] - xh[1] - xh[2]);
            if (div - formula(x)).abs() > tol {
                return false;
            }
        }
    }
    true
}

/// Exact check that each local bubble's divergence equals its target.
pub fn local_divergences_exact() -> bool {
    local_bubbles()
        .iter()
        .enumerate()
        .all(|(k, b)| (&b.divergence - &local_divergence_target(k)).is_zero())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::quadrature::{quadrature, Cell};
    use crate::reference::{eval_bubble, grad_bubble, LOCAL_FACES};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_tet(rng: &mut ChaCha8Rng) -> [Point; 4] {
        loop {
            let v: [Point; 4] = std::array::from_fn(|_| std::array::from_fn(|_| rng.gen::<f64>()));
            let vol = crate::mesh::signed_volume(v);
            if vol > 0.02 {
                return v;
            }
        }
    }

    fn random_point_in(rng: &mut ChaCha8Rng, v: &[Point; 4]) -> Point {
        let mut l: [f64; 4] = std::array::from_fn(|_| rng.gen::<f64>() + 0.05);
        let s: f64 = l.iter().sum();
        l.iter_mut().for_each(|x| *x /= s);
        std::array::from_fn(|d| (0..4).map(|i| l[i] * v[i][d]).sum())
    }

    #[test]
    fn orderings_are_distinct_permutations() {
        let o = orderings();
        assert_eq!(o[0], [0, 1, 2, 3]);
        for i in 0..9 {
            let mut s = o[i];
            s.sort();
            assert_eq!(s, [0, 1, 2, 3]);
            for j in 0..i {
                assert_ne!(o[i], o[j]);
            }
        }
    }

    #[test]
    fn jacobian_determinants_match_volume() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let v = random_tet(&mut rng);
        let vol = crate::mesh::signed_volume(v);
        let set = ElementBubbleSet::new(v).unwrap();
        for m in &set.maps {
            assert!((m.det.abs() - 6.0 * vol).abs() < 1e-13);
        }
    }

    #[test]
    fn identity_map_reproduces_reference_bubble() {
        let id = AffineMap::identity();
        let p = [0.1, 0.2, 0.3];
        assert_eq!(piola_bubble(&id, p), eval_bubble(p));
        let g = bubble_gradients(&id, p);
        let gr = grad_bubble(p);
        for a in 0..3 {
            for m in 0..3 {
                assert!((g[a][m] - gr[a][m]).abs() < 1e-13);
            }
        }
    }

    #[test]
    fn singular_map_is_rejected() {
        let flat = [[0.0, 0.0, 0.0], [1.0, 0.0, 0.0], [0.0, 1.0, 0.0], [1.0, 1.0, 0.0]];
        assert!(matches!(AffineMap::from_vertices(flat), Err(Error::SingularMap(_))));
    }

    #[test]
    fn mapped_divergence_matches_chain_rule() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let v = random_tet(&mut rng);
        let set = ElementBubbleSet::new(v).unwrap();
        let h = 1e-5;
        for _ in 0..20 {
            let x = random_point_in(&mut rng, &v);
            for k in 0..NUM_BUBBLES {
                let mut fd = 0.0;
                for d in 0..3 {
                    let mut xp = x;
                    let mut xm = x;
                    xp[d] += h;
                    xm[d] -= h;
                    fd += (set.eval(k, xp)[d] - set.eval(k, xm)[d]) / (2.0 * h);
                }
                let exact = set.divergences[k].eval(x);
                assert!((fd - exact).abs() < 1e-6 * exact.abs().max(1.0), "k={k} {fd} {exact}");
            }
        }
    }

    #[test]
    fn tabulated_divergences_on_sketch_tet() {
        let set = ElementBubbleSet::new(CUBE_LABEL_POSITIONS).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        for _ in 0..20 {
            let x = random_point_in(&mut rng, &CUBE_LABEL_POSITIONS);
            for k in 0..NUM_BUBBLES {
                let got = set.divergences[k].eval(x);
                let want = TABULATED_DIVERGENCES[k](x);
                assert!((got - want).abs() < 1e-12, "i={} {got} {want}", k + 1);
            }
            let g = set.grad(0, x);
            let tr = g[0][0] + g[1][1] + g[2][2];
            assert!((tr - 4.0 * (x[1] - x[2]) * (2.0 * x[1] + x[0] - 2.0 * x[2])).abs() < 1e-10);
        }
        // i = 4: 4y(y + z - 1) = -4y + 4y² + 4yz
        let q4 = set.divergences[3].0;
        let want4 = [0.0, 0.0, -4.0, 0.0, 0.0, 0.0, 0.0, 4.0, 4.0, 0.0];
        // i = 9: 4(x - 1)(x + z - 1) = 4 - 8x - 4z + 4x² + 4xz
        let q9 = set.divergences[8].0;
        let want9 = [4.0, -8.0, 0.0, -4.0, 4.0, 0.0, 4.0, 0.0, 0.0, 0.0];
        for j in 0..P2_DIM {
            assert!((q4[j] - want4[j]).abs() < 1e-13);
            assert!((q9[j] - want9[j]).abs() < 1e-13);
        }
    }

    #[test]
    fn frozen_numbering_is_the_unique_oracle_match() {
        let mut rng = ChaCha8Rng::seed_from_u64(20);
        let samples: Vec<Point> = (0..20).map(|_| std::array::from_fn(|_| rng.gen::<f64>())).collect();
        let hits = numbering_oracle(&samples, 1e-11);
        assert_eq!(hits.len(), 1);
        assert_eq!(hits[0].positions, CUBE_LABEL_POSITIONS);
        assert_eq!(hits[0].shift, 0);
    }

    #[test]
    fn divergence_gram_matrix_has_full_rank() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let v = random_tet(&mut rng);
        let divs = bubble_divergences(v).unwrap();
        let map = AffineMap::from_vertices(v).unwrap();
        let rule = quadrature(Cell::Tetrahedron, 4).unwrap();
        let gram = nalgebra::DMatrix::from_fn(9, 9, |i, j| {
            rule.integrate(|p| {
                let x = map.apply(p);
                divs[i].eval(x) * divs[j].eval(x)
            }) * map.det.abs()
        });
        let eig = nalgebra::SymmetricEigen::new(gram.clone());
        let min = eig.eigenvalues.min();
        let max = eig.eigenvalues.max();
        assert!(min > 1e-8 * max, "min {min} max {max}");
        assert_eq!(gram.rank(1e-10 * max), 9);
    }

    #[test]
    fn mean_divergence_vanishes() {
        let mut rng = ChaCha8Rng::seed_from_u64(12);
        let rule = quadrature(Cell::Tetrahedron, 2).unwrap();
        for _ in 0..5 {
            let v = random_tet(&mut rng);
            let map = AffineMap::from_vertices(v).unwrap();
            for q in bubble_divergences(v).unwrap() {
                let mean = rule.integrate(|p| q.eval(map.apply(p))) * map.det.abs();
                assert!(mean.abs() < 1e-12);
            }
        }
    }

    #[test]
    fn gradients_match_finite_differences() {
        let mut rng = ChaCha8Rng::seed_from_u64(21);
        let h = 1e-5;
        for _ in 0..3 {
            let v = random_tet(&mut rng);
            let set = ElementBubbleSet::new(v).unwrap();
            for _ in 0..20 {
                let x = random_point_in(&mut rng, &v);
                for k in [0, 4, 8] {
                    let g = set.grad(k, x);
                    let scale = g.iter().flatten().fold(1.0f64, |a, b| a.max(b.abs()));
                    for d in 0..3 {
                        let mut xp = x;
                        let mut xm = x;
                        xp[d] += h;
                        xm[d] -= h;
                        let (fp, fm) = (set.eval(k, xp), set.eval(k, xm));
                        for n in 0..3 {
                            let fd = (fp[n] - fm[n]) / (2.0 * h);
                            assert!((fd - g[n][d]).abs() < 1e-6 * scale);
                        }
                    }
                    let tr = g[0][0] + g[1][1] + g[2][2];
                    assert!((tr - set.divergences[k].eval(x)).abs() < 1e-9 * scale);
                }
            }
        }
    }

    #[test]
    fn mapped_bubbles_have_vanishing_face_moments() {
        let mut rng = ChaCha8Rng::seed_from_u64(33);
        let rule = quadrature(Cell::Triangle, 6).unwrap();
        for _ in 0..3 {
            let v = random_tet(&mut rng);
            let set = ElementBubbleSet::new(v).unwrap();
            let mut worst: f64 = 0.0;
            for k in 0..NUM_BUBBLES {
                for f in LOCAL_FACES {
                    let (a, b, c) = (v[f[0]], v[f[1]], v[f[2]]);
                    let mut mom = [[0.0f64; 6]; 3];
                    for (q, w) in rule.iter() {
                        let (s, t) = (q[0], q[1]);
                        let x = std::array::from_fn(|d| a[d] + s * (b[d] - a[d]) + t * (c[d] - a[d]));
                        let val = set.eval(k, x);
                        for (m, test) in [1.0, s, t, s * s, s * t, t * t].iter().enumerate() {
                            for n in 0..3 {
                                mom[n][m] += w * val[n] * test;
                            }
                        }
                    }
                    worst = mom.iter().flatten().fold(worst, |acc, x| acc.max(x.abs()));
                }
            }
            assert!(worst < 1e-11, "worst moment {worst}");
        }
    }

    #[test]
    fn local_bubbles_agree_with_piola_maps() {
        assert!(local_divergences_exact());
        let mut rng = ChaCha8Rng::seed_from_u64(44);
        let v = random_tet(&mut rng);
        let canonical = AffineMap::from_vertices(v).unwrap();
        let set = ElementBubbleSet::new(v).unwrap();
        for _ in 0..10 {
            let x = random_point_in(&mut rng, &v);
            let xi = canonical.apply_inverse(x);
            for (k, lb) in local_bubbles().iter().enumerate() {
                let via_local = mat_vec(&canonical.jac, lb.eval(xi));
                let direct = set.eval(k, x);
                for n in 0..3 {
                    assert!((via_local[n] - direct[n]).abs() < 1e-11);
                }
            }
        }
    }
}
