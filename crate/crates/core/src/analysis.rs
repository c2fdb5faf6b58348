//! Error norms against the manufactured solution, the pointwise divergence
//! check and convergence reports.

use std::fmt::Write as _;
use std::io::Write;
use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;

use crate::assembly::{assemble_constrained, element_map, LOAD_DEGREE};
use crate::element::{local_bubbles, AffineMap, Mat3};
use crate::error::Result;
use crate::mesh::{level_mesh, Point, TetMesh};
use crate::quadrature::{quadrature, Cell};
use crate::reference::{tables, ModalP2, P2_DIM, P3_DIM};
use crate::solver::{solve_stokes, Solution, SolverConfig};
use crate::spaces::{PressureDofMap, VelocityDofMap, LOCAL_VELOCITY_DOFS};

/// `u = (-g_z, g_z, g_x - g_y)` with `g = 2⁹ G(x) G(y) G(z)`,
/// `G(t) = t²(1-t)²`, and `p = 100 sin(2πx)`.
#[derive(Clone, Copy, Debug, Default)]
pub struct ExactSolution;

/// `d`-th derivative of `G(t) = t²(1-t)²`.
fn gd(t: f64, d: u8) -> f64 {
    match d {
        0 => t * t * (1.0 - t) * (1.0 - t),
        1 => 2.0 * t * (1.0 - t) * (1.0 - 2.0 * t),
        2 => 2.0 * (1.0 - 6.0 * t + 6.0 * t * t),
        3 => 24.0 * t - 12.0,
        4 => 24.0,
        _ => 0.0,
    }
}

/// `(coefficient, derivative orders)` of the terms of each component.
const U_TERMS: [&[(f64, [u8; 3])]; 3] = [
    &[(-512.0, [0, 0, 1])],
    &[(512.0, [0, 0, 1])],
    &[(512.0, [1, 0, 0]), (-512.0, [0, 1, 0])],
];

fn term(x: Point, d: [u8; 3]) -> f64 {
    gd(x[0], d[0]) * gd(x[1], d[1]) * gd(x[2], d[2])
}

impl ExactSolution {
    pub fn velocity(&self, x: Point) -> [f64; 3] {
        std::array::from_fn(|c| U_TERMS[c].iter().map(|(k, d)| k * term(x, *d)).sum())
    }

    /// `out[n][d] = ∂_d u_n`
    pub fn velocity_gradient(&self, x: Point) -> Mat3 {
        std::array::from_fn(|c| {
            std::array::from_fn(|axis| {
                U_TERMS[c]
                    .iter()
                    .map(|(k, d)| {
                        let mut e = *d;
                        e[axis] += 1;
                        k * term(x, e)
                    })
                    .sum()
            })
        })
    }

    pub fn velocity_laplacian(&self, x: Point) -> [f64; 3] {
        std::array::from_fn(|c| {
            U_TERMS[c]
                .iter()
                .map(|(k, d)| {
                    (0..3)
                        .map(|axis| {
                            let mut e = *d;
                            e[axis] += 2;
                            k * term(x, e)
                        })
                        .sum::<f64>()
                })
                .sum()
        })
    }

    pub fn divergence(&self, x: Point) -> f64 {
        let g = self.velocity_gradient(x);
        g[0][0] + g[1][1] + g[2][2]
    }

    pub fn pressure(&self, x: Point) -> f64 {
        100.0 * (2.0 * std::f64::consts::PI * x[0]).sin()
    }

    pub fn pressure_gradient(&self, x: Point) -> [f64; 3] {
        let tau = 2.0 * std::f64::consts::PI;
        [100.0 * tau * (tau * x[0]).cos(), 0.0, 0.0]
    }

    /// `f = -Δu + ∇p`
    pub fn forcing(&self, x: Point) -> [f64; 3] {
        let lap = self.velocity_laplacian(x);
        let gp = self.pressure_gradient(x);
        std::array::from_fn(|c| -lap[c] + gp[c])
    }
}

/// Discrete velocity restricted to one tet.
pub struct LocalVelocity {
    map: AffineMap,
    coeffs: [f64; LOCAL_VELOCITY_DOFS],
}

impl LocalVelocity {
    pub fn new(mesh: &TetMesh, dofs: &VelocityDofMap, u: &[f64], t: usize) -> Result<Self> {
        let map = element_map(mesh, t)?;
        let local = dofs.local_dofs(t);
        Ok(Self {
            map,
            coeffs: std::array::from_fn(|i| u[local[i]]),
        })
    }

    pub fn map(&self) -> &AffineMap {
        &self.map
    }

    /// Value at reference point `xi`.
    pub fn value(&self, xi: [f64; 3]) -> [f64; 3] {
        let phi = tables().p3.eval(xi);
        let mut out = [0.0; 3];
        for j in 0..P3_DIM {
            for n in 0..3 {
                out[n] += self.coeffs[3 * j + n] * phi[j];
            }
        }
        let mut bsum = [0.0; 3];
        for (k, b) in local_bubbles().iter().enumerate() {
            let c = self.coeffs[3 * P3_DIM + k];
            if c != 0.0 {
                let v = b.eval(xi);
                for a in 0..3 {
                    bsum[a] += c * v[a];
                }
            }
        }
        for n in 0..3 {
            out[n] += (0..3).map(|a| self.map.jac[n][a] * bsum[a]).sum::<f64>();
        }
        out
    }

    /// Physical gradient `out[n][d] = ∂_d u_n` at reference point `xi`.
    pub fn gradient(&self, xi: [f64; 3]) -> Mat3 {
        let g = tables().p3.grad(xi);
        // reference gradient of the pulled-back field, then J ... J⁻¹
        let mut conf = [[0.0; 3]; 3];
        for j in 0..P3_DIM {
            for n in 0..3 {
                for m in 0..3 {
                    conf[n][m] += self.coeffs[3 * j + n] * g[j][m];
                }
            }
        }
        let mut bub = [[0.0; 3]; 3];
        for (k, b) in local_bubbles().iter().enumerate() {
            let c = self.coeffs[3 * P3_DIM + k];
            if c != 0.0 {
                let gb = b.grad(xi);
                for a in 0..3 {
                    for m in 0..3 {
                        bub[a][m] += c * gb[a][m];
                    }
                }
            }
        }
        let inv = &self.map.inv;
        let jac = &self.map.jac;
        std::array::from_fn(|n| {
            std::array::from_fn(|d| {
                (0..3)
                    .map(|m| {
                        let jb: f64 = (0..3).map(|a| jac[n][a] * bub[a][m]).sum();
                        (conf[n][m] + jb) * inv[m][d]
                    })
                    .sum()
            })
        })
    }

    pub fn divergence(&self, xi: [f64; 3]) -> f64 {
        let g = self.gradient(xi);
        g[0][0] + g[1][1] + g[2][2]
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct ErrorNorms {
    pub l2_velocity: f64,
    /// Broken `‖∇(u - u_h)‖₀`.
    pub h1_velocity: f64,
    pub l2_pressure: f64,
}

/// `‖u - u_h‖₀`, `‖∇(u - u_h)‖₀` and `‖p - p_h - c‖₀` where `c` is the
/// mean difference of `p_h` and `p`.
pub fn error_norms(
    mesh: &TetMesh,
    dofs: &VelocityDofMap,
    pressure: &PressureDofMap,
    solution: &Solution,
    exact: &ExactSolution,
) -> Result<ErrorNorms> {
    error_norms_with_degree(
        mesh,
        dofs,
        pressure,
        &solution.velocity,
        &solution.pressure,
        exact,
        LOAD_DEGREE,
    )
}

pub fn error_norms_with_degree(
    mesh: &TetMesh,
    dofs: &VelocityDofMap,
    pressure: &PressureDofMap,
    u: &[f64],
    p: &[f64],
    exact: &ExactSolution,
    degree: usize,
) -> Result<ErrorNorms> {
    let rule = quadrature(Cell::Tetrahedron, degree)?;
    let exact_mean: f64 = (0..mesh.num_tets())
        .map(|t| {
            let map = &pressure.maps[t];
            rule.integrate(|xi| exact.pressure(map.apply(xi))) * map.det.abs()
        })
        .sum::<f64>()
        / pressure.domain_volume;
    let shift = pressure.mean_value(p) - exact_mean;
    let parts: Vec<[f64; 3]> = (0..mesh.num_tets())
        .into_par_iter()
        .map(|t| -> Result<[f64; 3]> {
            let lv = LocalVelocity::new(mesh, dofs, u, t)?;
            let map = *lv.map();
            let det = map.det.abs();
            let mut acc = [0.0; 3];
            for (xi, w) in rule.iter() {
                let x = map.apply(*xi);
                let ue = exact.velocity(x);
                let uh = lv.value(*xi);
                let ge = exact.velocity_gradient(x);
                let gh = lv.gradient(*xi);
                let m = ModalP2::eval(*xi);
                let ph: f64 = (0..P2_DIM).map(|a| p[P2_DIM * t + a] * m[a]).sum::<f64>() - shift;
                let wd = w * det;
                acc[0] += wd * (0..3).map(|n| (ue[n] - uh[n]).powi(2)).sum::<f64>();
                acc[1] += wd
                    * (0..3)
                        .flat_map(|n| (0..3).map(move |d| (n, d)))
                        .map(|(n, d)| (ge[n][d] - gh[n][d]).powi(2))
                        .sum::<f64>();
                acc[2] += wd * (exact.pressure(x) - ph).powi(2);
            }
            Ok(acc)
        })
        .collect::<Result<_>>()?;
    let sum = parts
        .iter()
        .fold([0.0; 3], |a, b| [a[0] + b[0], a[1] + b[1], a[2] + b[2]]);
    Ok(ErrorNorms {
        l2_velocity: sum[0].sqrt(),
        h1_velocity: sum[1].sqrt(),
        l2_pressure: sum[2].sqrt(),
    })
}

/// Broken norm `‖u_h‖_{1,h} = (‖u_h‖₀² + ‖∇u_h‖₀²)^{1/2}`.
pub fn broken_h1_norm(mesh: &TetMesh, dofs: &VelocityDofMap, u: &[f64]) -> Result<f64> {
    let rule = quadrature(Cell::Tetrahedron, 8)?;
    let mut s = 0.0;
    for t in 0..mesh.num_tets() {
        let lv = LocalVelocity::new(mesh, dofs, u, t)?;
        let det = lv.map().det.abs();
        for (xi, w) in rule.iter() {
            let v = lv.value(*xi);
            let g = lv.gradient(*xi);
            s += w * det * (v.iter().map(|x| x * x).sum::<f64>() + g.iter().flatten().map(|x| x * x).sum::<f64>());
        }
    }
    Ok(s.sqrt())
}

/// Maximum of `|div u_h|` over `per_tet` random points in every tet.
pub fn divergence_check(mesh: &TetMesh, dofs: &VelocityDofMap, u: &[f64], per_tet: usize, seed: u64) -> Result<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut worst: f64 = 0.0;
    for t in 0..mesh.num_tets() {
        let lv = LocalVelocity::new(mesh, dofs, u, t)?;
        for _ in 0..per_tet {
            let xi = random_reference_point(&mut rng);
            worst = worst.max(lv.divergence(xi).abs());
        }
    }
    Ok(worst)
}

/// Uniform point in the reference tetrahedron.
pub fn random_reference_point<R: Rng>(rng: &mut R) -> [f64; 3] {
    let mut s: [f64; 3] = std::array::from_fn(|_| rng.gen());
    s.sort_by(|a, b| a.partial_cmp(b).unwrap());
    [s[0], s[1] - s[0], s[2] - s[1]]
}

#[derive(Clone, Debug, Serialize)]
pub struct LevelResult {
    pub level: usize,
    pub cells_per_axis: usize,
    pub tets: usize,
    pub velocity_dofs: usize,
    pub free_velocity_dofs: usize,
    pub pressure_dofs: usize,
    pub l2_velocity: f64,
    pub l2_velocity_rate: f64,
    pub h1_velocity: f64,
    pub h1_velocity_rate: f64,
    pub l2_pressure: f64,
    pub l2_pressure_rate: f64,
    pub uzawa_iterations: usize,
    pub seconds: f64,
    pub status: String,
}

#[derive(Clone, Debug, Default, Serialize)]
pub struct ConvergenceReport {
    pub rows: Vec<LevelResult>,
}

/// Run one level: mesh, assemble, solve and measure.
pub fn run_level(level: usize, config: &SolverConfig) -> Result<(LevelResult, Solution)> {
    run_on_mesh(level, &level_mesh(level)?, config)
}

/// Assemble, solve and measure on an arbitrary mesh of the unit cube.
pub fn run_on_mesh(level: usize, mesh: &TetMesh, config: &SolverConfig) -> Result<(LevelResult, Solution)> {
    let start = Instant::now();
    let exact = ExactSolution;
    let system = assemble_constrained(mesh, &|x| exact.forcing(x))?;
    log::info!(
        "level {level}: {} tets, {} free velocity DOFs, {} pressure DOFs",
        mesh.num_tets(),
        system.num_free(),
        system.num_pressure()
    );
    let sol = solve_stokes(&system, config)?;
    let e = error_norms(mesh, &system.velocity, &system.pressure, &sol, &exact)?;
    let row = LevelResult {
        level,
        cells_per_axis: 1 << (level - 1),
        tets: mesh.num_tets(),
        velocity_dofs: system.velocity.num_dofs(),
        free_velocity_dofs: system.num_free(),
        pressure_dofs: system.num_pressure(),
        l2_velocity: e.l2_velocity,
        l2_velocity_rate: 0.0,
        h1_velocity: e.h1_velocity,
        h1_velocity_rate: 0.0,
        l2_pressure: e.l2_pressure,
        l2_pressure_rate: 0.0,
        uzawa_iterations: sol.uzawa_iterations,
        seconds: start.elapsed().as_secs_f64(),
        status: "ok".into(),
    };
    Ok((row, sol))
}

pub fn rate(coarse: f64, fine: f64) -> f64 {
    (coarse / fine).log2()
}

/// Levels `1..=levels`. A failing level is recorded with its error and does
/// not stop later levels.
pub fn convergence_study(levels: usize, config: &SolverConfig) -> ConvergenceReport {
    let mut report = ConvergenceReport::default();
    for level in 1..=levels {
        let row = match run_level(level, config) {
            Ok((row, _)) => row,
            Err(e) => {
                log::error!("level {level} failed: {e}");
                LevelResult {
                    level,
                    cells_per_axis: 1 << (level - 1),
                    tets: 12 << (3 * (level - 1)),
                    velocity_dofs: 0,
                    free_velocity_dofs: 0,
                    pressure_dofs: 0,
                    l2_velocity: f64::NAN,
                    l2_velocity_rate: f64::NAN,
                    h1_velocity: f64::NAN,
                    h1_velocity_rate: f64::NAN,
                    l2_pressure: f64::NAN,
                    l2_pressure_rate: f64::NAN,
                    uzawa_iterations: 0,
                    seconds: 0.0,
                    status: format!("failed: {e}"),
                }
            }
        };
        report.push(row);
    }
    report
}

impl ConvergenceReport {
    /// Append a row, filling its rates from the previous one.
    pub fn push(&mut self, mut row: LevelResult) {
        if let Some(prev) = self.rows.last() {
            row.l2_velocity_rate = rate(prev.l2_velocity, row.l2_velocity);
            row.h1_velocity_rate = rate(prev.h1_velocity, row.h1_velocity);
            row.l2_pressure_rate = rate(prev.l2_pressure, row.l2_pressure);
        }
        self.rows.push(row);
    }

    pub fn all_ok(&self) -> bool {
        self.rows.iter().all(|r| r.status == "ok")
    }

    pub fn write_csv<W: Write>(&self, w: W) -> Result<()> {
        let mut wr = csv::Writer::from_writer(w);
        for r in &self.rows {
            wr.serialize(r)?;
        }
        wr.flush()?;
        Ok(())
    }

    pub fn to_markdown(&self) -> String {
        let header = [
            "grid",
            "‖u-u_h‖₀",
            "rate",
            "‖∇(u-u_h)‖₀",
            "rate",
            "‖p-p_h‖₀",
            "rate",
            "#Uz",
            "tets",
            "velocity DOFs",
            "pressure DOFs",
            "time (s)",
        ];
        let body: Vec<[String; 12]> = self
            .rows
            .iter()
            .map(|r| {
                [
                    r.level.to_string(),
                    sci(r.l2_velocity),
                    format!("{:.1}", r.l2_velocity_rate),
                    sci(r.h1_velocity),
                    format!("{:.1}", r.h1_velocity_rate),
                    sci(r.l2_pressure),
                    format!("{:.1}", r.l2_pressure_rate),
                    r.uzawa_iterations.to_string(),
                    r.tets.to_string(),
                    r.velocity_dofs.to_string(),
                    r.pressure_dofs.to_string(),
                    format!("{:.1}", r.seconds),
                ]
            })
            .collect();
        let width: Vec<usize> = (0..12)
            .map(|c| {
                body.iter()
                    .map(|r| r[c].chars().count())
                    .chain([header[c].chars().count()])
                    .max()
                    .unwrap()
            })
            .collect();
        let line = |cells: Vec<&str>| {
            let mut s = String::from("|");
            for (c, cell) in cells.iter().enumerate() {
                let pad = width[c] - cell.chars().count();
                let _ = write!(s, " {}{} |", " ".repeat(pad), cell);
            }
            s.push('\n');
            s
        };
        let mut out = line(header.to_vec());
        out.push('|');
        for w in &width {
            out.push_str(&format!("{}:|", "-".repeat(w + 1)));
        }
        out.push('\n');
        for r in &body {
            out.push_str(&line(r.iter().map(String::as_str).collect()));
        }
        out
    }
}

/// Scientific notation with a mantissa in `[0.1, 1)`, e.g. `0.231E+00`.
pub fn sci(v: f64) -> String {
    if !v.is_finite() {
        return format!("{v}");
    }
    if v == 0.0 {
        return "0.000E+00".into();
    }
    let sign = if v < 0.0 { "-" } else { "" };
    let a = v.abs();
    let mut e = a.log10().floor() as i32 + 1;
    let mut m = (a / 10f64.powi(e) * 1000.0).round() / 1000.0;
    if m >= 1.0 {
        m /= 10.0;
        e += 1;
    } else if m < 0.1 {
        m *= 10.0;
        e -= 1;
    }
    format!("{sign}{m:.3}E{}{:02}", if e < 0 { '-' } else { '+' }, e.abs())
}
