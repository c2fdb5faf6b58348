//! Self-checks of the bubble, the numbering and the quadrature rules.

use num_traits::Zero;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::element::{bubble_divergences, local_divergences_exact, numbering_oracle, AffineMap, CUBE_LABEL_POSITIONS};
use crate::error::Result;
use crate::mesh::{signed_volume, Point};
use crate::poly::{rational_to_f64, tet_monomial_integral, Rational};
use crate::quadrature::{quadrature, Cell};
use crate::reference::{verify_face_moments, ReferenceBubble};

#[derive(Clone, Debug, PartialEq)]
pub struct Check {
    pub name: &'static str,
    pub passed: bool,
    pub detail: String,
}

impl Check {
    fn new(name: &'static str, passed: bool, detail: String) -> Self {
        Self { name, passed, detail }
    }
}

pub fn bubble_checks(bubble: &ReferenceBubble) -> Vec<Check> {
    let exact = bubble.face_moments_exact();
    let worst_exact = exact.iter().map(|m| rational_to_f64(m).abs()).fold(0.0, f64::max);
    let numeric = verify_face_moments(bubble);
    let defect = &bubble.divergence() - &ReferenceBubble::target_divergence();
    let mean: Rational = bubble.divergence().integrate_ref_tet();
    vec![
        Check::new(
            "face moments",
            exact.len() == 72 && worst_exact == 0.0 && numeric <= 1e-12,
            format!(
                "{} moments, exact max {worst_exact:e}, quadrature max {numeric:e}",
                exact.len()
            ),
        ),
        Check::new(
            "divergence identity",
            defect.is_zero(),
            format!("{} nonzero coefficients in div b - 4x(x-y-z)", defect.num_terms()),
        ),
        Check::new("zero mean divergence", mean.is_zero(), format!("integral {mean}")),
    ]
}

pub fn numbering_check(seed: u64) -> Check {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let samples: Vec<Point> = (0..20).map(|_| std::array::from_fn(|_| rng.gen())).collect();
    let hits = numbering_oracle(&samples, 1e-11);
    let ok = hits.len() == 1 && hits[0].positions == CUBE_LABEL_POSITIONS && hits[0].shift == 0;
    Check::new(
        "numbering oracle",
        ok,
        format!("{} matching assignment(s) of labels (1,6,7,2)", hits.len()),
    )
}

pub fn local_bubble_check() -> Check {
    let ok = local_divergences_exact();
    Check::new("mapped divergences", ok, "nine local bubbles checked exactly".into())
}

/// Every monomial up to `degree` integrated by the rule of that degree.
pub fn quadrature_check(max_degree: usize) -> Result<Check> {
    let mut worst: f64 = 0.0;
    for degree in 1..=max_degree {
        let q = quadrature(Cell::Tetrahedron, degree)?;
        for i in 0..=degree as u8 {
            for j in 0..=(degree as u8 - i) {
                for k in 0..=(degree as u8 - i - j) {
                    let exact = rational_to_f64(&tet_monomial_integral([i, j, k]));
                    let got = q.integrate(|p| p[0].powi(i as i32) * p[1].powi(j as i32) * p[2].powi(k as i32));
                    worst = worst.max(((got - exact) / exact).abs());
                }
            }
        }
    }
    Ok(Check::new(
        "quadrature exactness",
        worst <= 1e-11,
        format!("degrees 1..={max_degree}, worst relative error {worst:e}"),
    ))
}

/// Rank and condition number of the Gram matrix of the nine divergences on
/// a random tetrahedron.
pub fn gram_check(seed: u64) -> Result<(Check, f64)> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let v = loop {
        let v: [Point; 4] = std::array::from_fn(|_| std::array::from_fn(|_| rng.gen()));
        if signed_volume(v).abs() > 0.02 {
            break v;
        }
    };
    let divs = bubble_divergences(v)?;
    let map = AffineMap::from_vertices(v)?;
    let rule = quadrature(Cell::Tetrahedron, 4)?;
    let gram = faer::Mat::from_fn(9, 9, |i, j| {
        rule.integrate(|p| {
            let x = map.apply(p);
            divs[i].eval(x) * divs[j].eval(x)
        }) * map.det.abs()
    });
    let eig = gram
        .self_adjoint_eigenvalues(faer::Side::Lower)
        .map_err(|_| crate::Error::EigenNotConverged(9))?;
    let (min, max) = (eig[0], eig[8]);
    let cond = max / min;
    let rank = eig.iter().filter(|&&e| e > 1e-12 * max).count();
    Ok((
        Check::new(
            "divergence Gram rank",
            rank == 9,
            format!("rank {rank}, condition number {cond:.3e}"),
        ),
        cond,
    ))
}

/// The full suite for `bubble`.
pub fn run_suite(bubble: &ReferenceBubble, quadrature_degree: usize, seed: u64) -> Result<Vec<Check>> {
    let mut checks = bubble_checks(bubble);
    checks.push(numbering_check(seed));
    checks.push(local_bubble_check());
    checks.push(quadrature_check(quadrature_degree)?);
    checks.push(gram_check(seed)?.0);
    Ok(checks)
}
