//! Scenario execution. Each runner returns CSV rows, a diagnostics record
//! and the bound checks it evaluated; nothing here touches the filesystem.

use std::sync::Arc;

use nalgebra::{DMatrix, DVector, Matrix3, Vector3};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use polyred_core::diagnostics::{
    chart_function, conservation_monitor, invariance_check, ChartSample, ConservationLog, Functional, InvarianceReport, INVARIANCE_STEP,
    SO3_SPLIT_PERM,
};
use polyred_core::dynamics_ode::{
    general_reduced_residual, integrate, s1_periodic_solve, s1_rhs, AffineParams, HeavyTopParams, OdeState, PotentialFn, Trajectory,
};
use polyred_core::homogeneous::{AffineAction, SphereAction};
use polyred_core::lie_core::{MatrixAlgebra, So3, StructureConstants};
use polyred_core::reconstruction::{holonomy_loop, reconstruct_ode, reconstruct_strand, HolonomyResult, LoopPath, ReconstructionReport};
use polyred_core::reduced_bracket::{frame_for, BracketContext, ChartModel};
use polyred_core::strand_pde::{
    evolve, manufactured_fields, reference_rotation, strand_residuals, StrandFields, StrandParams, StrandResiduals, CSV_HEADER,
    REFERENCE_CFL_FRACTION,
};
use polyred_core::Result;

use crate::config::{PotentialKind, ScenarioConfig, ScenarioKind};
use crate::suites::{run_suite, Bound, CheckRow};

/// One CSV cell.
#[derive(Debug, Clone, PartialEq)]
pub enum Cell {
    Num(f64),
    Text(String),
}

impl Cell {
    /// Numbers carry 17 significant digits.
    pub fn render(&self) -> String {
        match self {
            Cell::Num(x) => format!("{x:.16e}"),
            Cell::Text(s) => s.clone(),
        }
    }
}

#[derive(Debug, Clone)]
pub struct ScenarioOutput {
    pub header: Vec<String>,
    pub rows: Vec<Vec<Cell>>,
    pub diagnostics: serde_json::Value,
    pub checks: Vec<CheckRow>,
    /// Reconstruction verdict, when the scenario has one.
    pub verdict: Option<String>,
}

impl ScenarioOutput {
    pub fn passed(&self) -> bool {
        self.checks.iter().all(|c| c.pass)
    }
}

pub fn run_scenario(cfg: &ScenarioConfig) -> Result<ScenarioOutput> {
    match cfg.scenario {
        ScenarioKind::HeavyTop => heavy_top(cfg),
        ScenarioKind::Strand => strand(cfg),
        ScenarioKind::S1Example => s1_example(cfg),
        ScenarioKind::Affine => affine(cfg),
        ScenarioKind::Checks => checks(cfg),
    }
}

fn v3(a: &[f64; 3]) -> Vector3<f64> {
    Vector3::new(a[0], a[1], a[2])
}

fn seg(x: &DVector<f64>, i: usize) -> Vector3<f64> {
    Vector3::new(x[i], x[i + 1], x[i + 2])
}

fn dv(v: &Vector3<f64>) -> DVector<f64> {
    DVector::from_column_slice(v.as_slice())
}

fn header(names: &[&str]) -> Vec<String> {
    names.iter().map(|s| s.to_string()).collect()
}

fn to_json<T: Serialize>(v: &T) -> serde_json::Value {
    serde_json::to_value(v).expect("diagnostics serialise")
}

/// Fourth-order central difference of the samples at index `k`, for
/// `2 ≤ k < len − 2`.
pub fn sample_derivative(states: &[DVector<f64>], k: usize, dt: f64) -> DVector<f64> {
    (&states[k - 2] - &states[k + 2] + (&states[k + 1] - &states[k - 1]) * 8.0) / (12.0 * dt)
}

fn times(tr: &Trajectory) -> Vec<f64> {
    (0..tr.states.len()).map(|k| tr.time(k)).collect()
}

fn drift_checks(suite: &'static str, log: &ConservationLog, names: &[&str], tol: f64) -> Vec<CheckRow> {
    names.iter().map(|n| CheckRow::new(suite, format!("drift_{n}"), log.drift(n).unwrap_or(f64::NAN), Bound::AtMost { value: tol })).collect()
}

#[derive(Debug, Serialize)]
struct HeavyTopDiagnostics {
    steps: usize,
    dt: f64,
    conservation: ConservationLog,
    max_reduced_residual: f64,
    invariance: InvarianceReport,
    max_reconstruction_mismatch: f64,
    verdict: String,
}

/// Largest `general_reduced_residual` along a trajectory, with time
/// derivatives taken from the samples.
fn trajectory_residual(tr: &Trajectory, ctx: &BracketContext, h: &polyred_core::reduced_bracket::HamiltonianSpec, template: &OdeState, split: usize) -> Result<f64> {
    let mut worst: f64 = 0.0;
    for k in 2..tr.states.len().saturating_sub(2) {
        let d = sample_derivative(&tr.states, k, tr.dt);
        let p = template.with_vector(&tr.states[k])?.reduced_point()?;
        let d_mu = DVector::from_iterator(split, d.iter().take(split).copied());
        let d_s = DVector::from_iterator(d.len() - split, d.iter().skip(split).copied());
        let (lp, par) = general_reduced_residual(ctx, h, &p, &[d_mu], &[d_s])?;
        worst = worst.max(lp.amax()).max(par[0].amax());
    }
    Ok(worst)
}

pub fn heavy_top_params(cfg: &ScenarioConfig) -> Result<HeavyTopParams> {
    let p = cfg.heavy_top.as_ref().expect("validated");
    HeavyTopParams::new(Matrix3::from_diagonal(&v3(&p.inertia)), p.mg, v3(&p.chi))
}

fn heavy_top(cfg: &ScenarioConfig) -> Result<ScenarioOutput> {
    let suite = "heavy_top";
    let p = cfg.heavy_top.as_ref().expect("validated");
    let prm = heavy_top_params(cfg)?;
    let dt = cfg.numerics.dt.expect("validated");
    let steps = cfg.steps();
    let x0 = OdeState::HeavyTop { mu: v3(&p.mu0), gamma: v3(&p.gamma0).normalize() };
    let tr = integrate(&x0.to_vector(), dt, steps, |x| prm.rhs(x))?;

    let energy = |x: &DVector<f64>| prm.energy(&seg(x, 0), &seg(x, 3));
    let log = conservation_monitor(
        &times(&tr),
        &tr.states,
        &[
            Functional::new("h", energy),
            Functional::new("mu_dot_gamma", |x| seg(x, 0).dot(&seg(x, 3))),
            Functional::new("gamma_sq", |x| seg(x, 3).norm_squared()),
        ],
    )?;

    let ctx = BracketContext::new(StructureConstants::so3(), Arc::new(SphereAction))?;
    let h = prm.hamiltonian_spec();
    let max_reduced_residual = trajectory_residual(&tr, &ctx, &h, &x0, 3)?;

    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let invariance = invariance_check(&StructureConstants::so3_split(), p.invariance_samples, INVARIANCE_STEP, || {
        let m = ChartModel::heavy_top();
        let g0 = m.random_element(&mut rng, 2.0)?;
        let pi = vec![DVector::from_fn(3, |_, _| rng.gen_range(-1.0..1.0))];
        Ok(ChartSample { e: chart_function(m, SO3_SPLIT_PERM.to_vec(), prm.hamiltonian_spec(), g0)?, pi })
    })?;

    let rotations = reconstruct_heavy_top(&prm, &tr)?;
    let max_reconstruction_mismatch = rotations
        .iter()
        .zip(&tr.states)
        .map(|(r, x)| (r * DVector::from_vec(vec![0.0, 0.0, 1.0]) - dv(&seg(x, 3))).norm())
        .fold(0.0, f64::max);
    let tol = cfg.tolerance("reconstruction");
    let verdict = if max_reconstruction_mismatch <= tol {
        format!("reconstructed: max |R e3 - Gamma| = {max_reconstruction_mismatch:.3e}")
    } else {
        format!("mismatch: max |R e3 - Gamma| = {max_reconstruction_mismatch:.3e} exceeds {tol:.1e}")
    };

    let mut checks = drift_checks(suite, &log, &["h", "mu_dot_gamma", "gamma_sq"], cfg.tolerance("drift"));
    checks.push(CheckRow::new(suite, "reduced_residual", max_reduced_residual, Bound::AtMost { value: cfg.tolerance("residual") }));
    checks.push(CheckRow::new(suite, "invariance", invariance.max_residual, Bound::AtMost { value: 1e-6 }));
    checks.push(CheckRow::new(suite, "reconstruction", max_reconstruction_mismatch, Bound::AtMost { value: tol }));

    let rows = (0..tr.states.len())
        .step_by(cfg.output.stride)
        .map(|k| {
            let x = &tr.states[k];
            let mut row = vec![Cell::Num(tr.time(k))];
            row.extend(x.iter().map(|v| Cell::Num(*v)));
            row.push(Cell::Num(log.series[0].values[k]));
            row.push(Cell::Num(log.series[1].values[k]));
            row.push(Cell::Num(log.series[2].values[k]));
            row
        })
        .collect();
    let diagnostics = HeavyTopDiagnostics { steps, dt, conservation: log, max_reduced_residual, invariance, max_reconstruction_mismatch, verdict: verdict.clone() };
    Ok(ScenarioOutput {
        header: header(&["t", "mu1", "mu2", "mu3", "gamma1", "gamma2", "gamma3", "h", "mu_dot_gamma", "gamma_sq"]),
        rows,
        diagnostics: to_json(&diagnostics),
        checks,
        verdict: Some(verdict),
    })
}

/// Rotations `R(t_k)` along a heavy-top trajectory, starting from the frame
/// that takes `e3` to `Γ(0)`.
pub fn reconstruct_heavy_top(prm: &HeavyTopParams, tr: &Trajectory) -> Result<Vec<DMatrix<f64>>> {
    let ii = prm.inertia_inv();
    let a: Vec<DVector<f64>> = tr.states.iter().map(|x| dv(&(ii * seg(x, 0)))).collect();
    let da = tr.states.iter().map(|x| Ok(dv(&(ii * seg(&prm.rhs(x)?, 0))))).collect::<Result<Vec<_>>>()?;
    let r0 = frame_for(&seg(&tr.states[0], 3));
    let r0 = DMatrix::from_column_slice(3, 3, r0.matrix().as_slice());
    reconstruct_ode(&MatrixAlgebra::so3(), &r0, &a, &da, tr.dt)
}

#[derive(Debug, Serialize)]
struct StrandDiagnostics {
    grid_n: usize,
    dt: f64,
    cfl_limit: f64,
    steps: usize,
    initial_residuals: StrandResiduals,
    final_residuals: StrandResiduals,
    max_curvature: f64,
    max_parallel_s: f64,
    initial_parallel_s: f64,
    propagation_constant: f64,
    max_gamma_drift: f64,
    energy_drift: f64,
    reconstruction: ReconstructionReport,
    verdict: String,
}

pub fn strand_params(cfg: &ScenarioConfig) -> Result<StrandParams> {
    let p = cfg.strand.as_ref().expect("validated");
    let n = cfg.numerics.grid_n.expect("validated");
    let (i, j) = (Matrix3::from_diagonal(&v3(&p.inertia_i)), Matrix3::from_diagonal(&v3(&p.inertia_j)));
    let dt = match cfg.numerics.dt {
        Some(dt) => dt,
        None => {
            let probe = StrandParams::new(i, j, p.mg, v3(&p.chi), p.length, n, 1e-12)?;
            probe.cfl_limit() * cfg.numerics.cfl_fraction.unwrap_or(REFERENCE_CFL_FRACTION)
        }
    };
    StrandParams::new(i, j, p.mg, v3(&p.chi), p.length, n, dt)
}

fn total_energy(f: &StrandFields, prm: &StrandParams) -> f64 {
    (0..f.len()).map(|k| prm.energy_density(&f.mu_s[k], &f.mu_t[k], &f.gamma[k])).sum::<f64>() * prm.ds()
}

fn strand(cfg: &ScenarioConfig) -> Result<ScenarioOutput> {
    let suite = "strand";
    let prm = strand_params(cfg)?;
    let l = prm.length();
    let t_final = cfg.numerics.t_final.expect("validated");
    let steps = ((t_final / prm.dt()).round() as usize).max(1);
    let rot = move |s, t| reference_rotation(s, t, l);
    let f0 = manufactured_fields(rot, &prm, 0.0)?;
    let levels = evolve(&f0, &prm, steps)?;

    let mut max_curvature: f64 = 0.0;
    let mut max_parallel_s: f64 = 0.0;
    let mut first = None;
    let mut last = None;
    for w in levels.windows(2) {
        let r = strand_residuals(&w[0], &w[1], &prm)?;
        max_curvature = max_curvature.max(r.max_curvature());
        max_parallel_s = max_parallel_s.max(r.max_parallel_s());
        if first.is_none() {
            first = Some(r.clone());
        }
        last = Some(r);
    }
    let (initial_residuals, final_residuals) = (first.expect("steps ≥ 1"), last.expect("steps ≥ 1"));
    let initial_parallel_s = initial_residuals.max_parallel_s();
    let c = cfg.tolerance("propagation");
    let max_gamma_drift = levels.iter().map(|f| f.gamma_drift()).fold(0.0, f64::max);
    let e0 = total_energy(&levels[0], &prm);
    let energy_drift = levels.iter().map(|f| (total_energy(f, &prm) - e0).abs()).fold(0.0, f64::max) / e0.abs().max(1.0);

    let corner = So3::from_matrix(rot(0.0, 0.0))?;
    let rec = reconstruct_strand(&levels, &prm, &corner, cfg.tolerance("reconstruction"))?;
    let verdict = if rec.report.refused {
        format!(
            "refused: curvature {:.3e}, path discrepancy {:.3e} above {:.1e}",
            rec.report.curvature_max, rec.report.path_discrepancy, rec.report.threshold
        )
    } else {
        format!("reconstructed: curvature {:.3e}, path discrepancy {:.3e}", rec.report.curvature_max, rec.report.path_discrepancy)
    };

    let checks = vec![
        CheckRow::new(suite, "curvature", max_curvature, Bound::AtMost { value: cfg.tolerance("curvature") }),
        CheckRow::new(suite, "parallel_s_propagation", max_parallel_s, Bound::AtMost { value: c * initial_parallel_s }),
        CheckRow::new(suite, "reconstruction_accepted", if rec.report.refused { 1.0 } else { 0.0 }, Bound::AtMost { value: 0.0 }),
    ];

    let mut rows = Vec::new();
    for (j, f) in levels.iter().enumerate().step_by(cfg.output.stride) {
        let t = j as f64 * prm.dt();
        for r in f.rows(prm.ds()) {
            let mut row = vec![Cell::Num(t)];
            row.extend(r.iter().map(|v| Cell::Num(*v)));
            rows.push(row);
        }
    }
    let mut head = vec!["t"];
    head.extend(CSV_HEADER);
    let diagnostics = StrandDiagnostics {
        grid_n: prm.grid_n(),
        dt: prm.dt(),
        cfl_limit: prm.cfl_limit(),
        steps,
        initial_residuals,
        final_residuals,
        max_curvature,
        max_parallel_s,
        initial_parallel_s,
        propagation_constant: c,
        max_gamma_drift,
        energy_drift,
        reconstruction: rec.report.clone(),
        verdict: verdict.clone(),
    };
    Ok(ScenarioOutput { header: header(&head), rows, diagnostics: to_json(&diagnostics), checks, verdict: Some(verdict) })
}

#[derive(Debug, Serialize)]
struct S1Diagnostics {
    monodromy: [[f64; 2]; 2],
    eigenvalues: [f64; 2],
    eigenvalue_rel_err: f64,
    unique: bool,
    family: [f64; 3],
    holonomy: HolonomyResult,
    verdict: String,
}

/// Holonomy of `A = (μ0, 0)` around the base circle.
pub fn s1_holonomy(mu0: f64, samples: usize, tol: f64) -> Result<HolonomyResult> {
    let h = 2.0 * std::f64::consts::PI / samples as f64;
    let a = vec![DVector::from_vec(vec![mu0, 0.0]); samples + 1];
    holonomy_loop(&MatrixAlgebra::abelian_plane(), &a, h, &LoopPath::circle(), tol)
}

pub fn s1_verdict(hol: &HolonomyResult) -> String {
    let v = hol.algebra_value.as_ref().map(|v| v[0]).unwrap_or(hol.distance_to_identity);
    if hol.is_trivial {
        format!("reconstructed: holonomy {v:.4}")
    } else {
        format!("obstructed: holonomy {v:.4}")
    }
}

fn s1_example(cfg: &ScenarioConfig) -> Result<ScenarioOutput> {
    let suite = "s1_example";
    let p = cfg.s1_example.as_ref().expect("validated");
    let fam = s1_periodic_solve()?;
    let tp = 2.0 * std::f64::consts::PI;
    let exact = [(-tp).exp(), tp.exp()];
    let eigenvalue_rel_err = (0..2).map(|i| ((fam.eigenvalues[i] - exact[i]) / exact[i]).abs()).fold(0.0, f64::max);
    let member = fam.member(p.mu0);

    let dt = cfg.numerics.dt.expect("validated");
    let tr = integrate(&member.to_vector(), dt, cfg.steps(), s1_rhs)?;
    let periodic_err = tr.states.iter().map(|x| (x - member.to_vector()).amax()).fold(0.0, f64::max);
    let hol = s1_holonomy(p.mu0, p.loop_samples, cfg.tolerance("holonomy"))?;
    let verdict = s1_verdict(&hol);

    let checks = vec![
        CheckRow::new(suite, "monodromy_eigenvalues", eigenvalue_rel_err, Bound::AtMost { value: cfg.tolerance("monodromy") }),
        CheckRow::new(suite, "family_mu_y_y", fam.mu_y.abs().max(fam.y.abs()), Bound::AtMost { value: 0.0 }),
        CheckRow::new(suite, "family_is_stationary", periodic_err, Bound::AtMost { value: 0.0 }),
        CheckRow::new(suite, "holonomy_minus_two_pi_mu0", (hol.algebra_value.as_ref().map(|v| v[0]).unwrap_or(f64::NAN) - tp * p.mu0).abs(), Bound::AtMost { value: 1e-12 * p.mu0.abs().max(1.0) }),
    ];
    let rows = (0..tr.states.len())
        .step_by(cfg.output.stride)
        .map(|k| {
            let x = &tr.states[k];
            let h = 0.5 * (x[0] * x[0] + x[1] * x[1] - x[2] * x[2]);
            vec![Cell::Num(tr.time(k)), Cell::Num(x[0]), Cell::Num(x[1]), Cell::Num(x[2]), Cell::Num(h)]
        })
        .collect();
    let m = fam.monodromy;
    let diagnostics = S1Diagnostics {
        monodromy: [[m[(0, 0)], m[(0, 1)]], [m[(1, 0)], m[(1, 1)]]],
        eigenvalues: [fam.eigenvalues[0], fam.eigenvalues[1]],
        eigenvalue_rel_err,
        unique: fam.unique,
        family: [p.mu0, fam.mu_y, fam.y],
        holonomy: hol,
        verdict: verdict.clone(),
    };
    Ok(ScenarioOutput { header: header(&["theta", "mu_x", "mu_y", "y", "h"]), rows, diagnostics: to_json(&diagnostics), checks, verdict: Some(verdict) })
}

#[derive(Debug, Serialize)]
struct AffineDiagnostics {
    steps: usize,
    dt: f64,
    potential: PotentialKind,
    conservation: ConservationLog,
    max_mu_bar_residual: f64,
    max_reduced_residual: f64,
}

pub fn affine_params(cfg: &ScenarioConfig) -> Result<AffineParams> {
    let p = cfg.affine.as_ref().expect("validated");
    let (i, m) = (Matrix3::from_diagonal(&v3(&p.inertia)), Matrix3::from_diagonal(&v3(&p.mass_inv)));
    match p.potential {
        PotentialKind::Gravity => AffineParams::with_gravity(i, m, p.g.expect("validated")),
        PotentialKind::Harmonic => {
            let k = v3(&p.stiffness.expect("validated"));
            let v: PotentialFn = Arc::new(move |s: &Vector3<f64>| (0.5 * s.dot(&k.component_mul(s)), k.component_mul(s)));
            AffineParams::new(i, m, v)
        }
    }
}

/// Largest `|dμ̄/dt − a × μ̄|` along a packed affine trajectory.
pub fn mu_bar_residual(prm: &AffineParams, tr: &Trajectory) -> f64 {
    let bars: Vec<DVector<f64>> = tr.states.iter().map(|x| dv(&AffineParams::mu_bar(&seg(x, 0), &seg(x, 3), &seg(x, 6)))).collect();
    (2..bars.len().saturating_sub(2))
        .map(|k| {
            let d = sample_derivative(&bars, k, tr.dt);
            let a = prm.inertia_inv() * seg(&tr.states[k], 0);
            (seg(&d, 0) - a.cross(&seg(&bars[k], 0))).amax()
        })
        .fold(0.0, f64::max)
}

fn affine(cfg: &ScenarioConfig) -> Result<ScenarioOutput> {
    let suite = "affine";
    let p = cfg.affine.as_ref().expect("validated");
    let prm = affine_params(cfg)?;
    let dt = cfg.numerics.dt.expect("validated");
    let steps = cfg.steps();
    let x0 = OdeState::Affine { mu: v3(&p.mu0), omega: v3(&p.omega0), s_bar: v3(&p.s0) };
    let tr = integrate(&x0.to_vector(), dt, steps, |x| prm.rhs(x))?;
    let log = conservation_monitor(
        &times(&tr),
        &tr.states,
        &[
            Functional::new("h", |x| prm.energy(&seg(x, 0), &seg(x, 3), &seg(x, 6))),
            Functional::new("mu_bar_norm", |x| AffineParams::mu_bar(&seg(x, 0), &seg(x, 3), &seg(x, 6)).norm()),
        ],
    )?;
    let max_mu_bar_residual = mu_bar_residual(&prm, &tr);
    let ctx = BracketContext::new(StructureConstants::affine_so3(), Arc::new(AffineAction))?;
    let max_reduced_residual = trajectory_residual(&tr, &ctx, &prm.hamiltonian_spec(), &x0, 6)?;

    let checks = vec![
        CheckRow::new(suite, "drift_mu_bar_norm", log.drift("mu_bar_norm").unwrap_or(f64::NAN), Bound::AtMost { value: cfg.tolerance("drift") }),
        CheckRow::new(suite, "drift_h", log.drift("h").unwrap_or(f64::NAN), Bound::AtMost { value: cfg.tolerance("energy") }),
        CheckRow::new(suite, "mu_bar_residual", max_mu_bar_residual, Bound::AtMost { value: cfg.tolerance("residual") }),
        CheckRow::new(suite, "reduced_residual", max_reduced_residual, Bound::AtMost { value: cfg.tolerance("residual") }),
    ];
    let rows = (0..tr.states.len())
        .step_by(cfg.output.stride)
        .map(|k| {
            let mut row = vec![Cell::Num(tr.time(k))];
            row.extend(tr.states[k].iter().map(|v| Cell::Num(*v)));
            row.push(Cell::Num(log.series[0].values[k]));
            row.push(Cell::Num(log.series[1].values[k]));
            row
        })
        .collect();
    let diagnostics = AffineDiagnostics { steps, dt, potential: p.potential, conservation: log, max_mu_bar_residual, max_reduced_residual };
    Ok(ScenarioOutput {
        header: header(&["t", "mu1", "mu2", "mu3", "omega1", "omega2", "omega3", "s1", "s2", "s3", "h", "mu_bar_norm"]),
        rows,
        diagnostics: to_json(&diagnostics),
        checks,
        verdict: None,
    })
}

fn checks(cfg: &ScenarioConfig) -> Result<ScenarioOutput> {
    let p = cfg.checks.as_ref().expect("validated");
    let mut all = Vec::new();
    for suite in &p.suites {
        all.extend(run_suite(*suite, cfg.seed, p.samples)?);
    }
    let rows = all
        .iter()
        .map(|r| vec![Cell::Text(r.suite.to_string()), Cell::Text(r.name.clone()), Cell::Num(r.measured), Cell::Text(r.bound.to_string()), Cell::Text(r.pass.to_string())])
        .collect();
    Ok(ScenarioOutput {
        header: header(&["suite", "check", "measured", "bound", "pass"]),
        rows,
        diagnostics: serde_json::json!({ "suites": p.suites, "samples": p.samples, "checks": &all }),
        checks: all,
        verdict: None,
    })
}
