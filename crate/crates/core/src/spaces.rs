//! Global numbering of the enriched velocity space and the discontinuous
//! P2 pressure space.
//!
//! Scalar conforming nodes are numbered vertices first, then two nodes per
//! edge, then one node per face. Velocity DOF `3 * node + c` carries
//! component `c`; the nine bubbles of tet `t` follow all conforming DOFs at
//! `3 * N_c + 9 * t + k`. Pressure DOF `10 * t + a` is the coefficient of the
//! `a`-th [`P2_EXPONENTS`](crate::reference::P2_EXPONENTS) monomial in the
//! reference coordinates of tet `t`.

use crate::element::{AffineMap, NUM_BUBBLES};
use crate::error::Result;
use crate::mesh::{Point, TetMesh};
use crate::poly::{rational_to_f64, tet_monomial_integral};
use crate::reference::{tables, LOCAL_EDGES, P2_DIM, P2_EXPONENTS, P3_DIM};

/// Local velocity DOFs per tet: 60 conforming then 9 bubbles.
pub const LOCAL_VELOCITY_DOFS: usize = 3 * P3_DIM + NUM_BUBBLES;

#[derive(Clone, Debug)]
pub struct VelocityDofMap {
    pub num_vertices: usize,
    pub num_edges: usize,
    pub num_faces: usize,
    pub num_tets: usize,
    /// Global scalar node of each local P3 node.
    pub tet_nodes: Vec<[usize; P3_DIM]>,
    /// Sorted velocity DOFs of conforming nodes on the boundary.
    pub boundary: Vec<usize>,
    /// `true` for scalar nodes on the boundary.
    pub boundary_node: Vec<bool>,
}

impl VelocityDofMap {
    pub fn num_scalar_nodes(&self) -> usize {
        self.num_vertices + 2 * self.num_edges + self.num_faces
    }

    pub fn num_conforming(&self) -> usize {
        3 * self.num_scalar_nodes()
    }

    pub fn num_dofs(&self) -> usize {
        self.num_conforming() + NUM_BUBBLES * self.num_tets
    }

    pub fn bubble_dof(&self, t: usize, k: usize) -> usize {
        self.num_conforming() + NUM_BUBBLES * t + k
    }

    pub fn is_bubble(&self, dof: usize) -> bool {
        dof >= self.num_conforming()
    }

    /// Global DOFs of tet `t` in local order.
    pub fn local_dofs(&self, t: usize) -> [usize; LOCAL_VELOCITY_DOFS] {
        let nodes = &self.tet_nodes[t];
        let base = self.num_conforming() + NUM_BUBBLES * t;
        std::array::from_fn(|i| {
            if i < 3 * P3_DIM {
                3 * nodes[i / 3] + i % 3
            } else {
                base + (i - 3 * P3_DIM)
            }
        })
    }

    /// Physical position of scalar node `node`.
    pub fn node_point(&self, mesh: &TetMesh, node: usize) -> Point {
        for (t, nodes) in self.tet_nodes.iter().enumerate() {
            if let Some(i) = nodes.iter().position(|&n| n == node) {
                return self.local_node_point(mesh, t, i);
            }
        }
        panic!("node {node} not referenced by any tet");
    }

    pub fn local_node_point(&self, mesh: &TetMesh, t: usize, i: usize) -> Point {
        let v = mesh.tet_points(t);
        let a = tables().p3.multi_indices[i];
        std::array::from_fn(|d| (0..4).map(|j| a[j] as f64 * v[j][d]).sum::<f64>() / 3.0)
    }
}

pub fn build_velocity_dofs(mesh: &TetMesh) -> VelocityDofMap {
    let nv = mesh.num_vertices();
    let ne = mesh.num_edges();
    let nf = mesh.num_faces();
    let mut tet_nodes = Vec::with_capacity(mesh.num_tets());
    for (t, tet) in mesh.tets.iter().enumerate() {
        let mut nodes = [0usize; P3_DIM];
        nodes[..4].copy_from_slice(tet);
        for (e, [a, b]) in LOCAL_EDGES.iter().enumerate() {
            let g = mesh.tet_edges[t][e];
            let (near_a, near_b) = if tet[*a] < tet[*b] { (0, 1) } else { (1, 0) };
            nodes[4 + 2 * e] = nv + 2 * g + near_a;
            nodes[4 + 2 * e + 1] = nv + 2 * g + near_b;
        }
        for i in 0..4 {
            nodes[16 + i] = nv + 2 * ne + mesh.tet_faces[t][i];
        }
        tet_nodes.push(nodes);
    }
    let mut boundary_node = vec![false; nv + 2 * ne + nf];
    boundary_node[..nv].copy_from_slice(&mesh.boundary_vertex[..nv]);
    for (g, e) in mesh.edges.iter().enumerate() {
        boundary_node[nv + 2 * g] = e.is_boundary;
        boundary_node[nv + 2 * g + 1] = e.is_boundary;
    }
    for (g, f) in mesh.faces.iter().enumerate() {
        boundary_node[nv + 2 * ne + g] = f.is_boundary;
    }
    let boundary = boundary_node
        .iter()
        .enumerate()
        .filter(|(_, &b)| b)
        .flat_map(|(n, _)| (0..3).map(move |c| 3 * n + c))
        .collect();
    VelocityDofMap {
        num_vertices: nv,
        num_edges: ne,
        num_faces: nf,
        num_tets: mesh.num_tets(),
        tet_nodes,
        boundary,
        boundary_node,
    }
}

/// Constrained velocity DOFs: all components of boundary conforming nodes.
pub fn boundary_dofs(dofs: &VelocityDofMap) -> &[usize] {
    &dofs.boundary
}

#[derive(Clone, Debug)]
pub struct PressureDofMap {
    pub num_tets: usize,
    /// `mean[i]` such that `Σ mean[i] p[i] = ∫ p / |Ω|`.
    pub mean: Vec<f64>,
    pub domain_volume: f64,
    pub maps: Vec<AffineMap>,
}

impl PressureDofMap {
    pub fn num_dofs(&self) -> usize {
        P2_DIM * self.num_tets
    }

    pub fn mean_value(&self, p: &[f64]) -> f64 {
        self.mean.iter().zip(p).map(|(m, x)| m * x).sum()
    }

    /// Subtract the mean of `p` (a constant per tet is the first monomial).
    pub fn project_mean_zero(&self, p: &mut [f64]) {
        let m = self.mean_value(p);
        for t in 0..self.num_tets {
            p[P2_DIM * t] -= m;
        }
    }

    /// Discrete coefficients of the constant pressure `c`.
    pub fn constant(&self, c: f64) -> Vec<f64> {
        let mut p = vec![0.0; self.num_dofs()];
        for t in 0..self.num_tets {
            p[P2_DIM * t] = c;
        }
        p
    }

    pub fn eval(&self, p: &[f64], t: usize, x: Point) -> f64 {
        let xi = self.maps[t].apply_inverse(x);
        let m = crate::reference::ModalP2::eval(xi);
        (0..P2_DIM).map(|a| p[P2_DIM * t + a] * m[a]).sum()
    }
}

pub fn build_pressure_dofs(mesh: &TetMesh) -> Result<PressureDofMap> {
    let moments: [f64; P2_DIM] = std::array::from_fn(|a| rational_to_f64(&tet_monomial_integral(P2_EXPONENTS[a])));
    let mut maps = Vec::with_capacity(mesh.num_tets());
    let mut mean = Vec::with_capacity(P2_DIM * mesh.num_tets());
    let mut volume = 0.0;
    for t in 0..mesh.num_tets() {
        let map = AffineMap::from_vertices(mesh.tet_points(t))?;
        let det = map.det.abs();
        volume += det / 6.0;
        mean.extend(moments.iter().map(|m| m * det));
        maps.push(map);
    }
    for m in mean.iter_mut() {
        *m /= volume;
    }
    Ok(PressureDofMap {
        num_tets: mesh.num_tets(),
        mean,
        domain_volume: volume,
        maps,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mesh::build_cube_mesh;
    use crate::reference::eval_p3_basis;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn single_tet() -> TetMesh {
        TetMesh::new(
            vec![[0.0, 0.0, 0.0], [1.0, 0.0, 0.0], [0.0, 1.0, 0.0], [0.0, 0.0, 1.0]],
            vec![[0, 1, 2, 3]],
        )
        .unwrap()
    }

    #[test]
    fn unit_cube_counts() {
        let m = build_cube_mesh(1).unwrap();
        let d = build_velocity_dofs(&m);
        assert_eq!(d.num_scalar_nodes(), 91);
        assert_eq!(d.num_dofs(), 381);
        let p = build_pressure_dofs(&m).unwrap();
        assert_eq!(p.num_dofs(), 120);
    }

    #[test]
    fn single_tet_counts_and_boundary() {
        let m = single_tet();
        let d = build_velocity_dofs(&m);
        assert_eq!(d.num_scalar_nodes(), 20);
        assert_eq!(d.num_dofs(), 69);
        assert_eq!(boundary_dofs(&d).len(), 60);
        assert!(boundary_dofs(&d).iter().all(|&i| !d.is_bubble(i)));
    }

    #[test]
    fn dof_count_formula_on_levels() {
        for n in 1..=3 {
            let m = build_cube_mesh(n).unwrap();
            let d = build_velocity_dofs(&m);
            let expect = 3 * (m.num_vertices() + m.num_faces() + 2 * m.num_edges()) + 9 * m.num_tets();
            assert_eq!(d.num_dofs(), expect);
            let mut seen = vec![false; d.num_dofs()];
            for t in 0..m.num_tets() {
                for g in d.local_dofs(t) {
                    seen[g] = true;
                }
            }
            assert!(seen.iter().all(|&s| s));
        }
    }

    #[test]
    fn boundary_nodes_match_geometric_predicate() {
        let m = build_cube_mesh(1).unwrap();
        let d = build_velocity_dofs(&m);
        let on_boundary = |p: Point| p.iter().any(|&c| c.abs() < 1e-12 || (c - 1.0).abs() < 1e-12);
        let mut count = 0;
        for node in 0..d.num_scalar_nodes() {
            let p = d.node_point(&m, node);
            assert_eq!(d.boundary_node[node], on_boundary(p), "node {node} at {p:?}");
            count += on_boundary(p) as usize;
        }
        assert_eq!(d.boundary.len(), 3 * count);
        for v in 0..8 {
            assert!(d.boundary_node[v]);
        }
        assert!(!d.boundary_node[8]);
    }

    #[test]
    fn shared_nodes_have_consistent_positions() {
        let m = build_cube_mesh(2).unwrap();
        let d = build_velocity_dofs(&m);
        let mut pos: Vec<Option<Point>> = vec![None; d.num_scalar_nodes()];
        for t in 0..m.num_tets() {
            for i in 0..P3_DIM {
                let p = d.local_node_point(&m, t, i);
                let g = d.tet_nodes[t][i];
                match pos[g] {
                    None => pos[g] = Some(p),
                    Some(q) => {
                        for c in 0..3 {
                            assert!((p[c] - q[c]).abs() < 1e-14);
                        }
                    }
                }
            }
        }
    }

    #[test]
    fn conforming_field_is_continuous_across_faces() {
        let m = build_cube_mesh(2).unwrap();
        let d = build_velocity_dofs(&m);
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let coeffs: Vec<f64> = (0..d.num_scalar_nodes()).map(|_| rng.gen::<f64>() - 0.5).collect();
        let eval = |t: usize, x: Point| {
            let map = AffineMap::from_vertices(m.tet_points(t)).unwrap();
            let phi = eval_p3_basis(map.apply_inverse(x));
            (0..P3_DIM).map(|i| coeffs[d.tet_nodes[t][i]] * phi[i]).sum::<f64>()
        };
        for f in m.faces.iter().filter(|f| !f.is_boundary) {
            let [a, b, c] = f.vertices.map(|v| m.vertices[v]);
            for _ in 0..10 {
                let (s, r): (f64, f64) = (rng.gen(), rng.gen());
                let (s, r) = if s + r > 1.0 { (1.0 - s, 1.0 - r) } else { (s, r) };
                let x = std::array::from_fn(|k| a[k] + s * (b[k] - a[k]) + r * (c[k] - a[k]));
                let (u0, u1) = (eval(f.tets[0], x), eval(f.tets[1], x));
                assert!((u0 - u1).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn mean_functional() {
        let m = build_cube_mesh(2).unwrap();
        let p = build_pressure_dofs(&m).unwrap();
        assert!((p.mean_value(&p.constant(1.0)) - 1.0).abs() < 1e-13);
        // p = x: on each tet x = origin_x + J[0]·ξ
        let mut x = vec![0.0; p.num_dofs()];
        for t in 0..m.num_tets() {
            let map = &p.maps[t];
            x[10 * t] = map.origin[0];
            for k in 0..3 {
                x[10 * t + 1 + k] = map.jac[0][k];
            }
        }
        assert!((p.mean_value(&x) - 0.5).abs() < 1e-13);
        p.project_mean_zero(&mut x);
        assert!(p.mean_value(&x).abs() < 1e-14);
    }
}
