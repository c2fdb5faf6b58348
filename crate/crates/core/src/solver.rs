//! Uzawa-type solution of the constrained saddle system: preconditioned
//! conjugate gradients on the pressure Schur complement `S = B A⁻¹ Bᵀ` with
//! the pressure mass matrix as preconditioner, and a Lanczos estimate of the
//! discrete inf-sup constant.

use faer::linalg::solvers::Solve;
use faer::sparse::linalg::solvers::{Llt, SymbolicLlt};
use faer::sparse::{SparseColMat, SymbolicSparseColMat};
use faer::{Mat, Side};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::assembly::ConstrainedSystem;
use crate::error::{Error, Result};
use crate::reference::P2_DIM;
use crate::sparse::{axpy, dot, CsrMatrix};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Preconditioner {
    Diagonal,
    None,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum InnerMethod {
    /// Sparse Cholesky factorization, computed once per system.
    Cholesky,
    /// Conjugate gradients to the inner tolerance.
    Cg(Preconditioner),
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SolverConfig {
    /// Relative Schur residual at which the outer iteration stops.
    pub outer_tol: f64,
    /// Relative residual of each inner CG solve.
    pub inner_tol: f64,
    pub max_outer: usize,
    pub max_inner: usize,
    pub inner: InnerMethod,
}

impl Default for SolverConfig {
    fn default() -> Self {
        Self {
            outer_tol: 1e-10,
            inner_tol: 1e-12,
            max_outer: 1000,
            max_inner: 50_000,
            inner: InnerMethod::Cholesky,
        }
    }
}

impl SolverConfig {
    pub fn validate(&self) -> Result<()> {
        for (name, v) in [("outer tolerance", self.outer_tol), ("inner tolerance", self.inner_tol)] {
            if !(v > 0.0 && v < 1.0) {
                return Err(Error::InvalidConfig(format!("{name} must lie in (0, 1), got {v}")));
            }
        }
        if self.inner_tol > self.outer_tol / 10.0 {
            return Err(Error::InvalidConfig(format!(
                "inner tolerance {} exceeds outer tolerance / 10 = {}",
                self.inner_tol,
                self.outer_tol / 10.0
            )));
        }
        if self.max_outer == 0 || self.max_inner == 0 {
            return Err(Error::InvalidConfig("iteration limits must be positive".into()));
        }
        Ok(())
    }
}

#[derive(Clone, Debug)]
pub struct Solution {
    /// Full velocity vector (constrained DOFs are zero).
    pub velocity: Vec<f64>,
    /// Mean-zero pressure coefficients.
    pub pressure: Vec<f64>,
    pub uzawa_iterations: usize,
    /// `‖r_k‖_{M⁻¹}`, starting with the initial residual.
    pub residual_history: Vec<f64>,
    pub inner_iterations: usize,
}

/// Solver for `A x = b` on the free velocity DOFs.
pub enum InnerSolver<'a> {
    Cholesky(Box<Llt<usize, f64>>),
    Cg {
        a: &'a CsrMatrix,
        inv_diag: Option<Vec<f64>>,
        tol: f64,
        max_iter: usize,
    },
}

impl<'a> InnerSolver<'a> {
    pub fn new(a: &'a CsrMatrix, config: &SolverConfig) -> Result<Self> {
        match config.inner {
            InnerMethod::Cholesky => Ok(Self::Cholesky(Box::new(cholesky(a)?))),
            InnerMethod::Cg(p) => {
                let inv_diag = match p {
                    Preconditioner::Diagonal => {
                        let d = a.diagonal();
                        if let Some(i) = d.iter().position(|&x| !(x > 0.0)) {
                            return Err(Error::NotPositiveDefinite(format!("diagonal entry {i} is {}", d[i])));
                        }
                        Some(d.iter().map(|x| 1.0 / x).collect())
                    }
                    Preconditioner::None => None,
                };
                Ok(Self::Cg {
                    a,
                    inv_diag,
                    tol: config.inner_tol,
                    max_iter: config.max_inner,
                })
            }
        }
    }

    /// Returns the solution and the number of iterations used.
    pub fn solve(&self, rhs: &[f64]) -> Result<(Vec<f64>, usize)> {
        match self {
            Self::Cholesky(llt) => {
                let b = Mat::from_fn(rhs.len(), 1, |i, _| rhs[i]);
                let x = llt.solve(&b);
                Ok(((0..rhs.len()).map(|i| x[(i, 0)]).collect(), 1))
            }
            Self::Cg {
                a,
                inv_diag,
                tol,
                max_iter,
            } => pcg(a, inv_diag.as_deref(), rhs, *tol, *max_iter),
        }
    }
}

/// Sparse Cholesky of a symmetric CSR matrix (upper triangle of each row
/// read as the lower triangle of a column).
pub fn cholesky(a: &CsrMatrix) -> Result<Llt<usize, f64>> {
    let n = a.nrows;
    let mut col_ptr = Vec::with_capacity(n + 1);
    let mut row_idx = Vec::new();
    let mut values = Vec::new();
    col_ptr.push(0);
    for i in 0..n {
        for (j, v) in a.row(i) {
            if j >= i {
                row_idx.push(j);
                values.push(v);
            }
        }
        col_ptr.push(row_idx.len());
    }
    let symbolic = SymbolicSparseColMat::new_checked(n, n, col_ptr, None, row_idx);
    let lower = SparseColMat::new(symbolic, values);
    let sym = SymbolicLlt::try_new(lower.symbolic(), Side::Lower)
        .map_err(|e| Error::NotPositiveDefinite(format!("symbolic factorization failed: {e:?}")))?;
    Llt::try_new_with_symbolic(sym, lower.as_ref(), Side::Lower)
        .map_err(|e| Error::NotPositiveDefinite(format!("Cholesky factorization failed: {e:?}")))
}

/// Preconditioned CG for a symmetric positive definite `a`.
pub fn pcg(a: &CsrMatrix, inv_diag: Option<&[f64]>, b: &[f64], tol: f64, max_iter: usize) -> Result<(Vec<f64>, usize)> {
    let n = b.len();
    let mut x = vec![0.0; n];
    let bnorm = dot(b, b).sqrt();
    if bnorm == 0.0 {
        return Ok((x, 0));
    }
    let precond = |r: &[f64]| -> Vec<f64> {
        match inv_diag {
            Some(d) => r.iter().zip(d).map(|(a, b)| a * b).collect(),
            None => r.to_vec(),
        }
    };
    let mut r = b.to_vec();
    let mut z = precond(&r);
    let mut p = z.clone();
    let mut rz = dot(&r, &z);
    let mut ap = vec![0.0; n];
    for it in 1..=max_iter {
        a.mul_vec(&p, &mut ap);
        let pap = dot(&p, &ap);
        if !(pap > 0.0) {
            return Err(Error::NotPositiveDefinite(format!(
                "non-positive curvature {pap:e} at inner iteration {it}"
            )));
        }
        let alpha = rz / pap;
        axpy(alpha, &p, &mut x);
        axpy(-alpha, &ap, &mut r);
        if dot(&r, &r).sqrt() <= tol * bnorm {
            return Ok((x, it));
        }
        z = precond(&r);
        let rz_new = dot(&r, &z);
        let beta = rz_new / rz;
        rz = rz_new;
        for (pi, zi) in p.iter_mut().zip(&z) {
            *pi = zi + beta * *pi;
        }
    }
    Err(Error::InnerNotConverged {
        iterations: max_iter,
        residual: dot(&r, &r).sqrt() / bnorm,
    })
}

/// Inverse of the block-diagonal pressure mass matrix.
pub struct MassInverse {
    blocks: Vec<[f64; P2_DIM * P2_DIM]>,
}

impl MassInverse {
    pub fn new(m: &CsrMatrix) -> Result<Self> {
        let nt = m.nrows / P2_DIM;
        let mut blocks = Vec::with_capacity(nt);
        for t in 0..nt {
            let blk = Mat::from_fn(P2_DIM, P2_DIM, |i, j| m.get(P2_DIM * t + i, P2_DIM * t + j));
            let llt = blk
                .llt(Side::Lower)
                .map_err(|_| Error::NotPositiveDefinite(format!("pressure mass block {t}")))?;
            let inv = llt.solve(Mat::<f64>::identity(P2_DIM, P2_DIM));
            blocks.push(std::array::from_fn(|k| inv[(k / P2_DIM, k % P2_DIM)]));
        }
        Ok(Self { blocks })
    }

    pub fn apply(&self, r: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; r.len()];
        for (t, blk) in self.blocks.iter().enumerate() {
            let o = P2_DIM * t;
            for i in 0..P2_DIM {
                out[o + i] = (0..P2_DIM).map(|j| blk[i * P2_DIM + j] * r[o + j]).sum();
            }
        }
        out
    }
}

/// Solve the constrained system. Sign convention: `A u - Bᵀ p = f`,
/// `B u = 0`, so `S p = -B A⁻¹ f`.
pub fn solve_stokes(system: &ConstrainedSystem, config: &SolverConfig) -> Result<Solution> {
    config.validate()?;
    let inner = InnerSolver::new(&system.a, config)?;
    solve_with(system, &inner, config)
}

pub fn solve_with(system: &ConstrainedSystem, inner: &InnerSolver<'_>, config: &SolverConfig) -> Result<Solution> {
    let np = system.num_pressure();
    let minv = MassInverse::new(&system.m)?;
    let pmap = &system.pressure;
    let (mut u, mut inner_its) = inner.solve(&system.f)?;
    let mut p = vec![0.0; np];
    let mut r: Vec<f64> = system.b.apply(&u).iter().map(|x| -x).collect();
    let mut z = minv.apply(&r);
    pmap.project_mean_zero(&mut z);
    let mut rz = dot(&r, &z);
    let r0 = rz.max(0.0).sqrt();
    let mut history = vec![r0];
    let finish = |u: Vec<f64>, mut p: Vec<f64>, its: usize, history: Vec<f64>, inner_its: usize| {
        pmap.project_mean_zero(&mut p);
        Solution {
            velocity: system.expand(&u),
            pressure: p,
            uzawa_iterations: its,
            residual_history: history,
            inner_iterations: inner_its,
        }
    };
    if r0 == 0.0 {
        return Ok(finish(u, p, 0, history, inner_its));
    }
    let mut d = z.clone();
    let mut btd = vec![0.0; system.num_free()];
    let mut sd = vec![0.0; np];
    for it in 1..=config.max_outer {
        system.b.mul_vec_transpose(&d, &mut btd);
        let (w, k) = inner.solve(&btd)?;
        inner_its += k;
        system.b.mul_vec(&w, &mut sd);
        let dsd = dot(&d, &sd);
        if !(dsd > 0.0) {
            return Err(Error::NotPositiveDefinite(format!(
                "Schur complement curvature {dsd:e} at outer iteration {it}"
            )));
        }
        let alpha = rz / dsd;
        axpy(alpha, &d, &mut p);
        axpy(alpha, &w, &mut u);
        axpy(-alpha, &sd, &mut r);
        z = minv.apply(&r);
        pmap.project_mean_zero(&mut z);
        let rz_new = dot(&r, &z);
        let res = rz_new.max(0.0).sqrt();
        history.push(res);
        if res <= config.outer_tol * r0 {
            return Ok(finish(u, p, it, history, inner_its));
        }
        let beta = rz_new / rz;
        rz = rz_new;
        for (di, zi) in d.iter_mut().zip(&z) {
            *di = zi + beta * *di;
        }
    }
    Err(Error::OuterNotConverged {
        iterations: config.max_outer,
        residual: history.last().copied().unwrap_or(f64::NAN) / r0,
    })
}

#[derive(Clone, Debug)]
pub struct InfSupEstimate {
    /// `sqrt` of the smallest eigenvalue of `S q = λ M q` on mean-zero `q`.
    pub beta: f64,
    pub lambda_min: f64,
    pub lambda_max: f64,
    pub steps: usize,
    /// Rayleigh quotient of the constant pressure, `1ᵀS1 / 1ᵀM1`.
    pub constant_quotient: f64,
}

/// Smallest generalized eigenvalue of `S q = λ M q` on mean-zero pressures
/// by Lanczos in the `M` inner product with full reorthogonalization.
pub fn infsup_constant(system: &ConstrainedSystem, config: &SolverConfig, seed: u64) -> Result<InfSupEstimate> {
    config.validate()?;
    let inner = InnerSolver::new(&system.a, config)?;
    let minv = MassInverse::new(&system.m)?;
    let pmap = &system.pressure;
    let np = system.num_pressure();
    let m = &system.m;
    let apply_s = |q: &[f64]| -> Result<Vec<f64>> {
        let (w, _) = inner.solve(&system.b.apply_transpose(q))?;
        Ok(system.b.apply(&w))
    };
    let m_dot = |a: &[f64], b: &[f64]| dot(a, &m.apply(b));

    let one = pmap.constant(1.0);
    let constant_quotient = dot(&one, &apply_s(&one)?) / m_dot(&one, &one);

    let unit = pmap.constant(1.0 / m_dot(&one, &one).sqrt());
    let dim = np - 1;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut v: Vec<f64> = (0..np).map(|_| rng.gen::<f64>() - 0.5).collect();
    pmap.project_mean_zero(&mut v);
    let nv = m_dot(&v, &v).sqrt();
    v.iter_mut().for_each(|x| *x /= nv);
    let mut basis: Vec<Vec<f64>> = vec![v];
    let mut alphas: Vec<f64> = Vec::new();
    let mut betas: Vec<f64> = Vec::new();
    let max_steps = dim.min(600);
    let tol = 1e-10;
    let mut last = f64::INFINITY;
    let mut result = None;
    for j in 0..max_steps {
        let vj = &basis[j];
        let mut w = minv.apply(&apply_s(vj)?);
        pmap.project_mean_zero(&mut w);
        let alpha = m_dot(&w, vj);
        alphas.push(alpha);
        for _ in 0..2 {
            let mw = m.apply(&w);
            axpy(-dot(&unit, &mw), &unit, &mut w);
            for q in &basis {
                let c = dot(q, &mw);
                axpy(-c, q, &mut w);
            }
        }
        let beta = m_dot(&w, &w).sqrt();
        let (theta, vecs) = tridiagonal_eigen(&alphas, &betas)?;
        let k = alphas.len();
        let lmin = theta[0];
        let resid = beta * vecs[(k - 1, 0)].abs();
        let converged = resid <= tol * theta[k - 1] && (lmin - last).abs() <= tol * lmin.abs();
        last = lmin;
        if converged || beta <= 1e-14 * theta[k - 1] || j + 1 == max_steps {
            if !converged && beta > 1e-14 * theta[k - 1] && k < dim {
                return Err(Error::EigenNotConverged(k));
            }
            result = Some((lmin, theta[k - 1], k));
            break;
        }
        betas.push(beta);
        w.iter_mut().for_each(|x| *x /= beta);
        basis.push(w);
    }
    let (lambda_min, lambda_max, steps) = result.ok_or(Error::EigenNotConverged(max_steps))?;
    if !(lambda_min > 0.0) {
        return Err(Error::NotPositiveDefinite(format!(
            "smallest Schur eigenvalue {lambda_min:e}"
        )));
    }
    Ok(InfSupEstimate {
        beta: lambda_min.sqrt(),
        lambda_min,
        lambda_max,
        steps,
        constant_quotient,
    })
}

fn tridiagonal_eigen(alphas: &[f64], betas: &[f64]) -> Result<(Vec<f64>, Mat<f64>)> {
    let k = alphas.len();
    let t = Mat::from_fn(k, k, |i, j| {
        if i == j {
            alphas[i]
        } else if i == j + 1 {
            betas[j]
        } else if j == i + 1 {
            betas[i]
        } else {
            0.0
        }
    });
    let evd = t
        .self_adjoint_eigen(Side::Lower)
        .map_err(|_| Error::EigenNotConverged(k))?;
    let s = evd.S();
    let vals = (0..k).map(|i| s[i]).collect();
    let u = evd.U();
    Ok((vals, Mat::from_fn(k, k, |i, j| u[(i, j)])))
}
