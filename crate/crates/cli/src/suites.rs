//! Named verification suites: each returns measured values against pinned bounds.

use std::fmt;
use std::sync::Arc;

use nalgebra::{DVector, Matrix3, Vector3};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use polyred_core::diagnostics::{broken_heavy_top_model, chart_function, convergence_study_with, invariance_check, ChartSample, INVARIANCE_STEP, SO3_SPLIT_PERM};
use polyred_core::dynamics_ode::{integrate, s1_hamiltonian_spec, AffineParams, HeavyTopParams};
use polyred_core::homogeneous::{AffineAction, Configuration, SphereAction, SpherePoint, TranslationAction};
use polyred_core::lie_core::{exp_so3, z_derivative_check, MatrixAlgebra, StructureConstants};
use polyred_core::reduced_bracket::{
    bracket_equivalence_check, local_bracket_sc, reduced_bracket, rel_err, sphere_local_coords, BracketContext, ChartModel, ConfigFn,
    HamiltonianSpec, LinearForm, ReducedPoint, UnreducedPoint,
};
use polyred_core::strand_pde::{centered_diff, manufactured_fields, reference_rotation, strand_residuals, StrandParams};
use polyred_core::Result;

use crate::config::SuiteName;

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Bound {
    AtMost { value: f64 },
    Above { value: f64 },
    AtLeast { value: f64 },
    Within { target: f64, tol: f64 },
}

impl Bound {
    pub fn holds(&self, x: f64) -> bool {
        match *self {
            Bound::AtMost { value } => x <= value,
            Bound::Above { value } => x > value,
            Bound::AtLeast { value } => x >= value,
            Bound::Within { target, tol } => (x - target).abs() <= tol,
        }
    }
}

impl fmt::Display for Bound {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Bound::AtMost { value } => write!(f, "<= {value:.1e}"),
            Bound::Above { value } => write!(f, "> {value:.1e}"),
            Bound::AtLeast { value } => write!(f, ">= {value}"),
            Bound::Within { target, tol } => write!(f, "{target} +/- {tol}"),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CheckRow {
    pub suite: &'static str,
    pub name: String,
    pub measured: f64,
    pub bound: Bound,
    pub pass: bool,
}

impl CheckRow {
    pub fn new(suite: &'static str, name: impl Into<String>, measured: f64, bound: Bound) -> Self {
        Self { suite, name: name.into(), measured, pass: bound.holds(measured), bound }
    }
}

pub fn run_suite(suite: SuiteName, seed: u64, samples: usize) -> Result<Vec<CheckRow>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    match suite {
        SuiteName::Algebra => algebra(&mut rng, samples),
        SuiteName::ZDerivative => z_derivative(),
        SuiteName::BracketEquivalence => bracket_equivalence(&mut rng, samples),
        SuiteName::Invariance => invariance(&mut rng, samples),
        SuiteName::Convergence => convergence(),
    }
}

/// Formats rows as an aligned pass/fail table.
pub fn table(rows: &[CheckRow]) -> String {
    let w = rows.iter().map(|r| r.suite.len() + r.name.len() + 1).max().unwrap_or(0);
    rows.iter()
        .map(|r| {
            let label = format!("{}/{}", r.suite, r.name);
            format!("{} {label:<w$}  {:>12.4e}  {}\n", if r.pass { "PASS" } else { "FAIL" }, r.measured, r.bound)
        })
        .collect()
}

fn rdv(rng: &mut ChaCha8Rng, n: usize) -> DVector<f64> {
    DVector::from_fn(n, |_, _| rng.gen_range(-1.0..1.0))
}

fn shipped_algebras() -> [MatrixAlgebra; 4] {
    [MatrixAlgebra::so3(), MatrixAlgebra::so3_split(), MatrixAlgebra::abelian_plane(), MatrixAlgebra::affine_so3()]
}

fn algebra(rng: &mut ChaCha8Rng, samples: usize) -> Result<Vec<CheckRow>> {
    let s = SuiteName::Algebra.name();
    let mut rows = Vec::new();
    for alg in shipped_algebras() {
        let c = alg.constants();
        let d = c.dim_g();
        let (mut jac, mut pair): (f64, f64) = (0.0, 0.0);
        for _ in 0..samples {
            let (x, y, z) = (rdv(rng, d), rdv(rng, d), rdv(rng, d));
            let j = c.bracket(&x, &c.bracket(&y, &z)?)? + c.bracket(&y, &c.bracket(&z, &x)?)? + c.bracket(&z, &c.bracket(&x, &y)?)?;
            jac = jac.max(j.amax());
            let mu = rdv(rng, d);
            pair = pair.max((c.coad(&x, &mu)?.dot(&y) - mu.dot(&c.bracket(&x, &y)?)).abs());
        }
        rows.push(CheckRow::new(s, format!("{}_jacobi", alg.name()), jac, Bound::AtMost { value: 1e-12 }));
        rows.push(CheckRow::new(s, format!("{}_coad_pairing", alg.name()), pair, Bound::AtMost { value: 1e-12 }));
    }
    let (mut orth, mut det): (f64, f64) = (0.0, 0.0);
    for _ in 0..samples {
        let v = Vector3::new(rng.gen_range(-4.0..4.0), rng.gen_range(-4.0..4.0), rng.gen_range(-4.0..4.0));
        let r = exp_so3(&v);
        orth = orth.max((r.matrix().transpose() * r.matrix() - Matrix3::identity()).amax());
        det = det.max((r.matrix().determinant() - 1.0).abs());
    }
    rows.push(CheckRow::new(s, "exp_so3_orthogonality", orth, Bound::AtMost { value: 1e-12 }));
    rows.push(CheckRow::new(s, "exp_so3_determinant", det, Bound::AtMost { value: 1e-12 }));
    Ok(rows)
}

/// Finite-difference step for the `Z` derivative check.
pub const Z_STEP: f64 = 1e-4;

fn z_derivative() -> Result<Vec<CheckRow>> {
    shipped_algebras()
        .iter()
        .map(|alg| Ok(CheckRow::new(SuiteName::ZDerivative.name(), alg.name(), z_derivative_check(alg, Z_STEP)?, Bound::AtMost { value: 1e-6 })))
        .collect()
}

/// Heavy top with a tilted `χ`, so that the potential varies along every direction.
pub fn heavy_top_params() -> HeavyTopParams {
    HeavyTopParams::new(Matrix3::from_diagonal(&Vector3::new(1.0, 2.0, 3.0)), 1.0, Vector3::new(0.3, -0.4, 0.866)).expect("valid params")
}

/// Two-direction strand Hamiltonian on `(so(3)*)² × S²`, with `μ^0 = μ^t`, `μ^1 = μ^s`.
pub fn strand_hamiltonian() -> HamiltonianSpec {
    HamiltonianSpec::new(|p| {
        let (mt, ms) = (&p.mu[0], &p.mu[1]);
        let g = p.s_bar.coords();
        0.5 * (mt[0] * mt[0] + mt[1] * mt[1] / 2.0 + mt[2] * mt[2] / 3.0) - 0.5 * (ms[0] * ms[0] / 2.0 + ms[1] * ms[1] + ms[2] * ms[2] / 1.5)
            + 0.5 * g[2]
    })
}

pub fn plane_hamiltonian() -> HamiltonianSpec {
    s1_hamiltonian_spec()
}

fn sphere_ctx() -> BracketContext {
    BracketContext::new(StructureConstants::so3(), Arc::new(SphereAction)).expect("so3 acts on the sphere")
}

fn unreduced_sampler<'a>(
    model: &'a ChartModel,
    rng: &'a mut ChaCha8Rng,
    n: usize,
    omega: ConfigFn,
) -> impl FnMut() -> Result<(UnreducedPoint, LinearForm)> + 'a {
    move || {
        let d = model.algebra.dim();
        let group = model.random_element(rng, 1.5)?;
        let pi = (0..n).map(|_| rdv(rng, d)).collect();
        Ok((UnreducedPoint { group, pi }, LinearForm { xi: rdv(rng, d), omega: Some(omega.clone()) }))
    }
}

fn random_sphere_point(rng: &mut ChaCha8Rng, n: usize) -> Result<ReducedPoint> {
    let g = Vector3::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0));
    let g = if g.norm() < 1e-3 { Vector3::z() } else { g.normalize() };
    ReducedPoint::new((0..n).map(|_| rdv(rng, 3)).collect(), Configuration::Sphere(SpherePoint::new(g)?))
}

fn bracket_equivalence(rng: &mut ChaCha8Rng, samples: usize) -> Result<Vec<CheckRow>> {
    let s = SuiteName::BracketEquivalence.name();
    let bound = Bound::AtMost { value: 1e-5 };
    let mut rows = Vec::new();

    let top = ChartModel::heavy_top();
    let omega: ConfigFn = Arc::new(|c| c.coords()[0] * c.coords()[2]);
    let r = bracket_equivalence_check(&top, &sphere_ctx(), &heavy_top_params().hamiltonian_spec(), samples, unreduced_sampler(&top, rng, 1, omega))?;
    rows.push(CheckRow::new(s, "heavy_top", r.max_rel_err, bound));

    let omega: ConfigFn = Arc::new(|c| c.coords()[1].sin());
    let r = bracket_equivalence_check(&top, &sphere_ctx(), &strand_hamiltonian(), samples, unreduced_sampler(&top, rng, 2, omega))?;
    rows.push(CheckRow::new(s, "strand", r.max_rel_err, bound));

    let affine = ChartModel::affine();
    let ctx = BracketContext::new(StructureConstants::affine_so3(), Arc::new(AffineAction))?;
    let omega: ConfigFn = Arc::new(|c| 0.3 * c.coords()[0]);
    let r = bracket_equivalence_check(&affine, &ctx, &AffineParams::reference().hamiltonian_spec(), samples, unreduced_sampler(&affine, rng, 1, omega))?;
    rows.push(CheckRow::new(s, "affine", r.max_rel_err, bound));

    let plane = ChartModel::plane();
    let ctx = BracketContext::new(StructureConstants::abelian(2, 1)?, Arc::new(TranslationAction::second_axis()))?;
    let omega: ConfigFn = Arc::new(|c| 2.0 * c.coords()[0]);
    let r = bracket_equivalence_check(&plane, &ctx, &plane_hamiltonian(), samples, unreduced_sampler(&plane, rng, 1, omega))?;
    rows.push(CheckRow::new(s, "s1_abelian", r.max_rel_err, Bound::AtMost { value: 1e-10 }));

    let ctx = sphere_ctx();
    let h = heavy_top_params().hamiltonian_spec();
    let split = StructureConstants::so3_split();
    let mut worst: f64 = 0.0;
    for _ in 0..samples {
        let p = random_sphere_point(rng, 1)?;
        let q = Vector3::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0));
        let c0: f64 = rng.gen_range(-1.0..1.0);
        let f = LinearForm::momentum(rdv(rng, 3)).with_omega(move |c| {
            let g = c.coords();
            c0 * Vector3::new(g[0], g[1], g[2]).dot(&q).powi(2)
        });
        let intrinsic = reduced_bracket(&ctx, &f, &h, &p)?.total();
        let local = local_bracket_sc(&split, &sphere_local_coords(&f, &h, &p)?)?;
        worst = worst.max(rel_err(local, intrinsic));
    }
    rows.push(CheckRow::new(s, "local_vs_intrinsic", worst, Bound::AtMost { value: 1e-8 }));
    Ok(rows)
}

fn invariance(rng: &mut ChaCha8Rng, samples: usize) -> Result<Vec<CheckRow>> {
    let s = SuiteName::Invariance.name();
    let bound = Bound::AtMost { value: 1e-6 };
    let mut rows = Vec::new();
    let mut run = |name: &str,
                   model: fn() -> ChartModel,
                   c: StructureConstants,
                   perm: Vec<usize>,
                   h: fn() -> HamiltonianSpec,
                   n: usize,
                   bound: Bound,
                   rng: &mut ChaCha8Rng|
     -> Result<()> {
        let d = c.dim_g();
        let r = invariance_check(&c, samples, INVARIANCE_STEP, || {
            let m = model();
            let g0 = m.random_element(rng, 2.0)?;
            let pi = (0..n).map(|_| rdv(rng, d)).collect();
            Ok(ChartSample { e: chart_function(m, perm.clone(), h(), g0)?, pi })
        })?;
        rows.push(CheckRow::new(s, name, r.max_residual, bound));
        Ok(())
    };
    let top = || heavy_top_params().hamiltonian_spec();
    let split = || StructureConstants::so3_split();
    run("heavy_top", ChartModel::heavy_top, split(), SO3_SPLIT_PERM.to_vec(), top, 1, bound, rng)?;
    run("strand", ChartModel::heavy_top, split(), SO3_SPLIT_PERM.to_vec(), strand_hamiltonian, 2, bound, rng)?;
    run("affine", ChartModel::affine, StructureConstants::affine_so3(), (0..6).collect(), || AffineParams::reference().hamiltonian_spec(), 1, bound, rng)?;
    run("s1_example", ChartModel::plane, StructureConstants::abelian(2, 1)?, vec![0, 1], plane_hamiltonian, 1, bound, rng)?;
    run("broken_control", broken_heavy_top_model, split(), SO3_SPLIT_PERM.to_vec(), top, 1, Bound::Above { value: 1e-2 }, rng)?;
    Ok(rows)
}

/// Strand grids of the convergence study; `dt` stays proportional to `Δs`.
pub const STRAND_LEVELS: [usize; 3] = [64, 128, 256];

/// Observed order of the manufactured constraint residual on `STRAND_LEVELS`.
pub fn strand_residual_order() -> Result<polyred_core::diagnostics::ConvergenceResult> {
    let steps: Vec<f64> = STRAND_LEVELS.iter().map(|&n| 1.0 / n as f64).collect();
    convergence_study_with(&steps, |ds| {
        let prm = StrandParams::reference((1.0 / ds).round() as usize, 0.5)?;
        let r = |s, t| reference_rotation(s, t, 1.0);
        let f0 = manufactured_fields(r, &prm, 0.2)?;
        let f1 = manufactured_fields(r, &prm, 0.2 + prm.dt())?;
        Ok(strand_residuals(&f0, &f1, &prm)?.max_constraint())
    })
}

fn convergence() -> Result<Vec<CheckRow>> {
    let s = SuiteName::Convergence.name();
    let mut rows = Vec::new();

    let prm = HeavyTopParams::new(Matrix3::from_diagonal(&Vector3::new(1.0, 2.0, 3.0)), 0.0, Vector3::z())?;
    let x0 = DVector::from_vec(vec![0.3, 1.0, -0.4, 0.0, 0.0, 1.0]);
    let reference = integrate(&x0, 1e-3, 2000, |x| prm.rhs(x))?.last().clone();
    let r = convergence_study_with(&[0.04, 0.02, 0.01], |dt| {
        let steps = (2.0 / dt).round() as usize;
        Ok((integrate(&x0, dt, steps, |x| prm.rhs(x))?.last() - &reference).amax())
    })?;
    rows.push(CheckRow::new(s, "rk4_free_rigid_body", r.slope, Bound::Within { target: 4.0, tol: 0.2 }));

    let tp = 2.0 * std::f64::consts::PI;
    let r = convergence_study_with(&[1.0 / 32.0, 1.0 / 64.0, 1.0 / 128.0], |ds| {
        let n = (1.0 / ds).round() as usize;
        let f: Vec<f64> = (0..n).map(|k| (tp * k as f64 * ds).sin()).collect();
        let d = centered_diff(&f, ds)?;
        Ok((0..n).map(|k| (d[k] - tp * (tp * k as f64 * ds).cos()).abs()).fold(0.0, f64::max))
    })?;
    rows.push(CheckRow::new(s, "centered_diff_sine", r.slope, Bound::Within { target: 2.0, tol: 0.1 }));

    let r = strand_residual_order()?;
    rows.push(CheckRow::new(s, "strand_manufactured_residual", r.slope, Bound::AtLeast { value: 1.9 }));
    Ok(rows)
}
