//! Assembly of the saddle-point system
//! `A u - Bᵀ p = f`, `B u = 0`
//! with `A` the broken vector Laplacian, `B` the divergence against P2
//! pressures and `M` the pressure mass matrix.
//!
//! Element matrices are contractions of exact reference tensors with the
//! affine map of each tet. With `G = J⁻¹ J⁻ᵀ` and `C = Jᵀ J`:
//! - conforming rows: `|det J| Σ G_{mm'} ∫ ∂_m φ_i ∂_m' φ_j`
//! - bubble `k` against `φ_j e_n`: `|det J| Σ J_{na} G_{mm'} ∫ ∂_m b̂_{k,a} ∂_m' φ_j`
//! - bubble pairs: `|det J| Σ C_{ab} G_{mm'} ∫ ∂_m b̂_{k,a} ∂_m' b̂_{l,b}`

use std::sync::OnceLock;

use rayon::prelude::*;

use crate::element::{local_bubbles, AffineMap, Mat3, NUM_BUBBLES};
use crate::error::{Error, Result};
use crate::mesh::{Point, TetMesh};
use crate::poly::{integrate_product_ref_tet, rational_to_f64, Polynomial3};
use crate::quadrature::{quadrature, Cell};
use crate::reference::{tables, P2_DIM, P3_DIM};
use crate::spaces::{PressureDofMap, VelocityDofMap, LOCAL_VELOCITY_DOFS};
use crate::sparse::CsrMatrix;

const NLOC: usize = LOCAL_VELOCITY_DOFS;

const NC: usize = 3 * P3_DIM;
pub const LOAD_DEGREE: usize = 14;

/// Exact reference integrals shared by every element.
pub struct ReferenceTensors {
    /// `[m][m'][i][j] = ∫ ∂_m φ_i ∂_m' φ_j`
    pub stiff: Vec<f64>,
    /// `[k][a][m][j][m'] = ∫ ∂_m b̂_{k,a} ∂_m' φ_j`
    pub cross: Vec<f64>,
    /// `[k][a][m][l][b][m'] = ∫ ∂_m b̂_{k,a} ∂_m' b̂_{l,b}`
    pub bubble: Vec<f64>,
    /// `[q][j][m] = ∫ ξ^q ∂_m φ_j`
    pub div: Vec<f64>,
    /// `[q][k] = ∫ ξ^q div b̂_k`
    pub div_bubble: Vec<f64>,
    /// `[q][r] = ∫ ξ^q ξ^r`
    pub mass: Vec<f64>,
}

pub fn reference_tensors() -> &'static ReferenceTensors {
    static CELL: OnceLock<ReferenceTensors> = OnceLock::new();
    CELL.get_or_init(build_reference_tensors)
}

fn build_reference_tensors() -> ReferenceTensors {
    let t = tables();
    let dphi: Vec<[Polynomial3; 3]> =
        t.p3.basis
            .iter()
            .map(|p| std::array::from_fn(|m| p.derivative(m)))
            .collect();
    let bubbles = local_bubbles();
    let db: Vec<[[Polynomial3; 3]; 3]> = bubbles
        .iter()
        .map(|b| std::array::from_fn(|a| std::array::from_fn(|m| b.components[a].derivative(m))))
        .collect();
    let int = |p: &Polynomial3, q: &Polynomial3| rational_to_f64(&integrate_product_ref_tet(p, q));

    let mut stiff = vec![0.0; 9 * P3_DIM * P3_DIM];
    for m in 0..3 {
        for mp in 0..3 {
            for i in 0..P3_DIM {
                for j in 0..P3_DIM {
                    stiff[((m * 3 + mp) * P3_DIM + i) * P3_DIM + j] = int(&dphi[i][m], &dphi[j][mp]);
                }
            }
        }
    }
    let mut cross = vec![0.0; NUM_BUBBLES * 9 * P3_DIM * 3];
    for k in 0..NUM_BUBBLES {
        for a in 0..3 {
            for m in 0..3 {
                for j in 0..P3_DIM {
                    for mp in 0..3 {
                        cross[(((k * 3 + a) * 3 + m) * P3_DIM + j) * 3 + mp] = int(&db[k][a][m], &dphi[j][mp]);
                    }
                }
            }
        }
    }
    let nb = NUM_BUBBLES * 9;
    let mut bubble = vec![0.0; nb * nb];
    for k in 0..NUM_BUBBLES {
        for a in 0..3 {
            for m in 0..3 {
                let r = (k * 3 + a) * 3 + m;
                for l in 0..NUM_BUBBLES {
                    for b in 0..3 {
                        for mp in 0..3 {
                            let c = (l * 3 + b) * 3 + mp;
                            if c < r {
                                bubble[r * nb + c] = bubble[c * nb + r];
                            } else {
                                bubble[r * nb + c] = int(&db[k][a][m], &db[l][b][mp]);
                            }
                        }
                    }
                }
            }
        }
    }
    let q = &t.p2.basis;
    let mut div = vec![0.0; P2_DIM * P3_DIM * 3];
    for a in 0..P2_DIM {
        for j in 0..P3_DIM {
            for m in 0..3 {
                div[(a * P3_DIM + j) * 3 + m] = int(&q[a], &dphi[j][m]);
            }
        }
    }
    let mut div_bubble = vec![0.0; P2_DIM * NUM_BUBBLES];
    for a in 0..P2_DIM {
        for (k, b) in bubbles.iter().enumerate() {
            div_bubble[a * NUM_BUBBLES + k] = int(&q[a], &b.divergence);
        }
    }
    let mut mass = vec![0.0; P2_DIM * P2_DIM];
    for a in 0..P2_DIM {
        for b in 0..P2_DIM {
            mass[a * P2_DIM + b] = int(&q[a], &q[b]);
        }
    }
    ReferenceTensors {
        stiff,
        cross,
        bubble,
        div,
        div_bubble,
        mass,
    }
}

pub fn element_map(mesh: &TetMesh, t: usize) -> Result<AffineMap> {
    AffineMap::from_vertices(mesh.tet_points(t)).map_err(|e| match e {
        Error::SingularMap(det) => Error::DegenerateTet { tet: t, det },
        other => other,
    })
}

fn metric(map: &AffineMap) -> (Mat3, Mat3) {
    let inv = &map.inv;
    let jac = &map.jac;
    let g = std::array::from_fn(|m| std::array::from_fn(|mp| (0..3).map(|d| inv[m][d] * inv[mp][d]).sum()));
    let c = std::array::from_fn(|a| std::array::from_fn(|b| (0..3).map(|n| jac[n][a] * jac[n][b]).sum()));
    (g, c)
}

/// Dense 69×69 local stiffness block, row-major.
pub fn local_stiffness(map: &AffineMap) -> Vec<f64> {
    let r = reference_tensors();
    let (g, c) = metric(map);
    let det = map.det.abs();
    let mut out = vec![0.0; NLOC * NLOC];
    let mut k = [0.0; P3_DIM * P3_DIM];
    for m in 0..3 {
        for mp in 0..3 {
            let w = g[m][mp];
            let base = (m * 3 + mp) * P3_DIM * P3_DIM;
            for (kk, s) in k.iter_mut().zip(&r.stiff[base..base + P3_DIM * P3_DIM]) {
                *kk += w * s;
            }
        }
    }
    for i in 0..P3_DIM {
        for j in 0..P3_DIM {
            let v = det * k[i * P3_DIM + j];
            for n in 0..3 {
                out[(3 * i + n) * NLOC + 3 * j + n] = v;
            }
        }
    }
    for kb in 0..NUM_BUBBLES {
        let row = NC + kb;
        for j in 0..P3_DIM {
            // t[a] = Σ G_{mm'} cross[k][a][m][j][m']
            let mut t = [0.0; 3];
            for (a, ta) in t.iter_mut().enumerate() {
                for m in 0..3 {
                    for mp in 0..3 {
                        *ta += g[m][mp] * r.cross[(((kb * 3 + a) * 3 + m) * P3_DIM + j) * 3 + mp];
                    }
                }
            }
            for n in 0..3 {
                let v = det * (0..3).map(|a| map.jac[n][a] * t[a]).sum::<f64>();
                out[row * NLOC + 3 * j + n] = v;
                out[(3 * j + n) * NLOC + row] = v;
            }
        }
    }
    let nb = NUM_BUBBLES * 9;
    for kb in 0..NUM_BUBBLES {
        for l in kb..NUM_BUBBLES {
            let mut s = 0.0;
            for a in 0..3 {
                for m in 0..3 {
                    let ri = (kb * 3 + a) * 3 + m;
                    for b in 0..3 {
                        let cab = c[a][b];
                        for mp in 0..3 {
                            s += cab * g[m][mp] * r.bubble[ri * nb + (l * 3 + b) * 3 + mp];
                        }
                    }
                }
            }
            out[(NC + kb) * NLOC + NC + l] = det * s;
            out[(NC + l) * NLOC + NC + kb] = det * s;
        }
    }
    out
}

/// Dense 10×69 local divergence block `∫ q_a div v`, row-major.
pub fn local_divergence(map: &AffineMap) -> Vec<f64> {
    let r = reference_tensors();
    let det = map.det.abs();
    let mut out = vec![0.0; P2_DIM * NLOC];
    for a in 0..P2_DIM {
        for j in 0..P3_DIM {
            for n in 0..3 {
                let v: f64 = (0..3).map(|m| map.inv[m][n] * r.div[(a * P3_DIM + j) * 3 + m]).sum();
                out[a * NLOC + 3 * j + n] = det * v;
            }
        }
        for k in 0..NUM_BUBBLES {
            out[a * NLOC + NC + k] = det * r.div_bubble[a * NUM_BUBBLES + k];
        }
    }
    out
}

/// Dense 10×10 local pressure mass block.
pub fn local_mass(map: &AffineMap) -> Vec<f64> {
    let det = map.det.abs();
    reference_tensors().mass.iter().map(|m| det * m).collect()
}

/// Local load vector `∫ f · v` for the 69 local velocity basis functions.
pub fn local_load<F: Fn(Point) -> [f64; 3]>(map: &AffineMap, f: &F, degree: usize) -> Result<Vec<f64>> {
    let rule = quadrature(Cell::Tetrahedron, degree)?;
    let t = tables();
    let bubbles = local_bubbles();
    let det = map.det.abs();
    let mut out = vec![0.0; NLOC];
    for (xi, w) in rule.iter() {
        let fx = f(map.apply(*xi));
        let phi = t.p3.eval(*xi);
        let wd = w * det;
        for j in 0..P3_DIM {
            for n in 0..3 {
                out[3 * j + n] += wd * fx[n] * phi[j];
            }
        }
        // f · (J b̂) = (Jᵀ f) · b̂
        let jtf: [f64; 3] = std::array::from_fn(|a| (0..3).map(|n| map.jac[n][a] * fx[n]).sum());
        for (k, b) in bubbles.iter().enumerate() {
            let bv = b.eval(*xi);
            out[NC + k] += wd * (jtf[0] * bv[0] + jtf[1] * bv[1] + jtf[2] * bv[2]);
        }
    }
    Ok(out)
}

fn element_maps(mesh: &TetMesh) -> Result<Vec<AffineMap>> {
    (0..mesh.num_tets()).map(|t| element_map(mesh, t)).collect()
}

const CHUNK: usize = 512;

pub fn assemble_stiffness(mesh: &TetMesh, dofs: &VelocityDofMap) -> Result<CsrMatrix> {
    let maps = element_maps(mesh)?;
    let local: Vec<[usize; NLOC]> = (0..mesh.num_tets()).map(|t| dofs.local_dofs(t)).collect();
    let n = dofs.num_dofs();
    let mut a = CsrMatrix::from_element_pattern(n, n, local.iter().map(|l| (&l[..], &l[..])));
    for start in (0..maps.len()).step_by(CHUNK) {
        let end = (start + CHUNK).min(maps.len());
        let blocks: Vec<Vec<f64>> = maps[start..end].par_iter().map(local_stiffness).collect();
        for (t, block) in (start..end).zip(&blocks) {
            a.add_block(&local[t], &local[t], block);
        }
    }
    Ok(a)
}

fn pressure_rows(t: usize) -> [usize; P2_DIM] {
    std::array::from_fn(|a| P2_DIM * t + a)
}

pub fn assemble_divergence(mesh: &TetMesh, dofs: &VelocityDofMap, pressure: &PressureDofMap) -> Result<CsrMatrix> {
    let maps = element_maps(mesh)?;
    let local: Vec<[usize; NLOC]> = (0..mesh.num_tets()).map(|t| dofs.local_dofs(t)).collect();
    let rows: Vec<[usize; P2_DIM]> = (0..mesh.num_tets()).map(pressure_rows).collect();
    let mut b = CsrMatrix::from_element_pattern(
        pressure.num_dofs(),
        dofs.num_dofs(),
        rows.iter().zip(&local).map(|(r, c)| (&r[..], &c[..])),
    );
    for (t, map) in maps.iter().enumerate() {
        b.add_block(&rows[t], &local[t], &local_divergence(map));
    }
    Ok(b)
}

pub fn assemble_pressure_mass(mesh: &TetMesh, pressure: &PressureDofMap) -> Result<CsrMatrix> {
    let maps = element_maps(mesh)?;
    let rows: Vec<[usize; P2_DIM]> = (0..mesh.num_tets()).map(pressure_rows).collect();
    let n = pressure.num_dofs();
    let mut m = CsrMatrix::from_element_pattern(n, n, rows.iter().map(|r| (&r[..], &r[..])));
    for (t, map) in maps.iter().enumerate() {
        m.add_block(&rows[t], &rows[t], &local_mass(map));
    }
    Ok(m)
}

pub fn assemble_load<F>(mesh: &TetMesh, dofs: &VelocityDofMap, f: &F, degree: usize) -> Result<Vec<f64>>
where
    F: Fn(Point) -> [f64; 3] + Sync,
{
    let maps = element_maps(mesh)?;
    let blocks: Vec<Vec<f64>> = maps
        .par_iter()
        .map(|m| local_load(m, f, degree))
        .collect::<Result<_>>()?;
    let mut out = vec![0.0; dofs.num_dofs()];
    for (t, block) in blocks.iter().enumerate() {
        for (g, v) in dofs.local_dofs(t).iter().zip(block) {
            out[*g] += v;
        }
    }
    Ok(out)
}

/// Unconstrained saddle-point system.
#[derive(Clone, Debug)]
pub struct SaddleSystem {
    pub a: CsrMatrix,
    pub b: CsrMatrix,
    pub m: CsrMatrix,
    pub f: Vec<f64>,
    pub velocity: VelocityDofMap,
    pub pressure: PressureDofMap,
}

impl SaddleSystem {
    pub fn assemble<F>(mesh: &TetMesh, f: &F) -> Result<Self>
    where
        F: Fn(Point) -> [f64; 3] + Sync,
    {
        let velocity = crate::spaces::build_velocity_dofs(mesh);
        let pressure = crate::spaces::build_pressure_dofs(mesh)?;
        Ok(Self {
            a: assemble_stiffness(mesh, &velocity)?,
            b: assemble_divergence(mesh, &velocity, &pressure)?,
            m: assemble_pressure_mass(mesh, &pressure)?,
            f: assemble_load(mesh, &velocity, f, LOAD_DEGREE)?,
            velocity,
            pressure,
        })
    }
}

/// System with the boundary velocity DOFs eliminated.
#[derive(Clone, Debug)]
pub struct ConstrainedSystem {
    pub a: CsrMatrix,
    pub b: CsrMatrix,
    pub m: CsrMatrix,
    pub f: Vec<f64>,
    /// Global velocity DOF of each free DOF.
    pub free: Vec<usize>,
    pub num_velocity: usize,
    pub velocity: VelocityDofMap,
    pub pressure: PressureDofMap,
}

impl ConstrainedSystem {
    pub fn num_free(&self) -> usize {
        self.free.len()
    }

    pub fn num_pressure(&self) -> usize {
        self.pressure.num_dofs()
    }

    /// Full velocity vector with zeros at constrained DOFs.
    pub fn expand(&self, u_free: &[f64]) -> Vec<f64> {
        let mut u = vec![0.0; self.num_velocity];
        for (i, &g) in self.free.iter().enumerate() {
            u[g] = u_free[i];
        }
        u
    }

    pub fn restrict(&self, u: &[f64]) -> Vec<f64> {
        self.free.iter().map(|&g| u[g]).collect()
    }
}

/// Symmetric row/column elimination of `boundary` (homogeneous data).
pub fn apply_dirichlet(system: SaddleSystem, boundary: &[usize]) -> ConstrainedSystem {
    let n = system.a.nrows;
    let mut fixed = vec![false; n];
    for &i in boundary {
        fixed[i] = true;
    }
    let mut map = vec![None; n];
    let mut free = Vec::with_capacity(n - boundary.len());
    for i in 0..n {
        if !fixed[i] {
            map[i] = Some(free.len());
            free.push(i);
        }
    }
    let nf = free.len();
    let np = system.b.nrows;
    let all_p: Vec<Option<usize>> = (0..np).map(Some).collect();
    let a = system.a.restrict(&map, &map, nf, nf);
    let b = system.b.restrict(&all_p, &map, np, nf);
    let f = free.iter().map(|&g| system.f[g]).collect();
    ConstrainedSystem {
        a,
        b,
        m: system.m,
        f,
        free,
        num_velocity: n,
        velocity: system.velocity,
        pressure: system.pressure,
    }
}

/// Assemble and constrain in one step.
pub fn assemble_constrained<F>(mesh: &TetMesh, f: &F) -> Result<ConstrainedSystem>
where
    F: Fn(Point) -> [f64; 3] + Sync,
{
    let s = SaddleSystem::assemble(mesh, f)?;
    let boundary = s.velocity.boundary.clone();
    Ok(apply_dirichlet(s, &boundary))
}
