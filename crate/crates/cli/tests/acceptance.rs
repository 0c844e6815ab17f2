//! Acceptance gate: one line per criterion, tolerances pinned below.

use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, ExitCode};
use std::time::{Duration, Instant};

use nalgebra::{DVector, Vector3};
use polyred_cli::config::{ScenarioConfig, SuiteName};
use polyred_cli::scenarios::{heavy_top_params, reconstruct_heavy_top, run_scenario, s1_holonomy, s1_verdict};
use polyred_cli::suites::{run_suite, strand_residual_order, CheckRow};
use polyred_core::dynamics_ode::{integrate, s1_periodic_solve};
use polyred_core::lie_core::{MatrixAlgebra, So3};
use polyred_core::reconstruction::{reconstruct_strand, HOLONOMY_TOL, RECONSTRUCTION_THRESHOLD};
use polyred_core::reduced_bracket::{psi_project, ChartModel, UnreducedPoint, ORACLE_STEP};
use polyred_core::strand_pde::{manufactured_fields, reference_rotation, StrandFields, StrandParams, REFERENCE_CFL_FRACTION};

const SEED: u64 = 20_241_014;
const SAMPLES: usize = 100;

const ALGEBRA_TOL: f64 = 1e-12;
const Z_TOL: f64 = 1e-6;
const BRACKET_TOL: f64 = 1e-5;
const BRACKET_ABELIAN_TOL: f64 = 1e-10;
const LOCAL_TOL: f64 = 1e-8;
const HEAVY_DRIFT_TOL: f64 = 1e-6;
const HEAVY_RESIDUAL_TOL: f64 = 1e-6;
const HEAVY_RECON_TOL: f64 = 1e-5;
const K_TRANSLATE_TOL: f64 = 1e-10;
const STRAND_ORDER_MIN: f64 = 1.9;
const PROPAGATION_C: f64 = 10.0;
const STRAND_CURVATURE_TOL: f64 = 1e-4;
const ROUND_TRIP_TOL: f64 = 1e-4;
const MONODROMY_TOL: f64 = 1e-8;
const OBSTRUCTION_MU0: f64 = 1e-8;
const MU_BAR_DRIFT_TOL: f64 = 1e-8;
const MU_BAR_RESIDUAL_TOL: f64 = 1e-6;
const INVARIANT_TOL: f64 = 1e-6;
const BROKEN_MIN: f64 = 1e-2;

struct Outcome {
    pass: bool,
    detail: String,
}

fn outcome(pass: bool, detail: impl Into<String>) -> Outcome {
    Outcome { pass, detail: detail.into() }
}

fn configs() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs")
}

fn config(name: &str) -> ScenarioConfig {
    polyred_cli::load_config(&configs().join(name)).unwrap_or_else(|e| panic!("{e}"))
}

fn worst(rows: &[CheckRow], pred: impl Fn(&CheckRow) -> bool) -> f64 {
    rows.iter().filter(|r| pred(r)).map(|r| r.measured).fold(0.0, f64::max)
}

fn row<'a>(rows: &'a [CheckRow], name: &str) -> &'a CheckRow {
    rows.iter().find(|r| r.name == name).unwrap_or_else(|| panic!("missing check {name}"))
}

fn c1() -> Outcome {
    let rows = run_suite(SuiteName::Algebra, SEED, SAMPLES).unwrap();
    let jac = worst(&rows, |r| r.name.ends_with("_jacobi"));
    let pair = worst(&rows, |r| r.name.ends_with("_coad_pairing"));
    let exp = worst(&rows, |r| r.name.starts_with("exp_so3"));
    outcome(jac <= ALGEBRA_TOL && pair <= ALGEBRA_TOL && exp <= ALGEBRA_TOL, format!("jacobi {jac:.1e}, coad pairing {pair:.1e}, exp_so3 {exp:.1e} (<= {ALGEBRA_TOL:.0e})"))
}

fn c2() -> Outcome {
    let rows = run_suite(SuiteName::ZDerivative, SEED, SAMPLES).unwrap();
    let (so3, aff) = (row(&rows, "so3").measured, row(&rows, "affine_so3").measured);
    outcome(so3 <= Z_TOL && aff <= Z_TOL, format!("so3 {so3:.1e}, so3 x| R3 {aff:.1e} (<= {Z_TOL:.0e})"))
}

fn c3() -> Outcome {
    let rows = run_suite(SuiteName::BracketEquivalence, SEED, SAMPLES).unwrap();
    let nonab = ["heavy_top", "strand", "affine"].map(|n| row(&rows, n).measured);
    let ab = row(&rows, "s1_abelian").measured;
    let pass = ORACLE_STEP == 1e-4 && nonab.iter().all(|e| *e <= BRACKET_TOL) && ab <= BRACKET_ABELIAN_TOL;
    outcome(
        pass,
        format!(
            "heavy top {:.1e}, strand {:.1e}, affine {:.1e} (<= {BRACKET_TOL:.0e}); abelian {ab:.1e} (<= {BRACKET_ABELIAN_TOL:.0e}); step {ORACLE_STEP:.0e}",
            nonab[0], nonab[1], nonab[2]
        ),
    )
}

fn c4() -> Outcome {
    let rows = run_suite(SuiteName::BracketEquivalence, SEED + 1, SAMPLES).unwrap();
    let e = row(&rows, "local_vs_intrinsic").measured;
    outcome(e <= LOCAL_TOL, format!("max rel err {e:.1e} over {SAMPLES} points (<= {LOCAL_TOL:.0e})"))
}

fn c5() -> Outcome {
    let cfg = config("heavy_top.toml");
    let p = cfg.heavy_top.as_ref().unwrap();
    let chi = Vector3::from(p.chi);
    let pinned = cfg.numerics.dt == Some(1e-3) && cfg.numerics.t_final == Some(10.0) && p.inertia == [1.0, 2.0, 3.0] && (p.mg * chi.norm() - 1.0).abs() < 1e-15;
    let out = run_scenario(&cfg).unwrap();
    let drifts = ["drift_h", "drift_mu_dot_gamma", "drift_gamma_sq"].map(|n| row(&out.checks, n).measured);
    let res = row(&out.checks, "reduced_residual").measured;
    let pass = pinned && drifts.iter().all(|d| *d <= HEAVY_DRIFT_TOL) && res <= HEAVY_RESIDUAL_TOL;
    outcome(
        pass,
        format!(
            "drift h {:.1e}, <mu,Gamma> {:.1e}, |Gamma|^2 {:.1e} (<= {HEAVY_DRIFT_TOL:.0e}); reduced residual {res:.1e} (<= {HEAVY_RESIDUAL_TOL:.0e})",
            drifts[0], drifts[1], drifts[2]
        ),
    )
}

fn c6() -> Outcome {
    let cfg = config("heavy_top.toml");
    let prm = heavy_top_params(&cfg).unwrap();
    let p = cfg.heavy_top.as_ref().unwrap();
    let x0 = DVector::from_iterator(6, p.mu0.iter().copied().chain(Vector3::from(p.gamma0).normalize().iter().copied()));
    let tr = integrate(&x0, cfg.numerics.dt.unwrap(), cfg.steps(), |x| prm.rhs(x)).unwrap();
    let rots = reconstruct_heavy_top(&prm, &tr).unwrap();
    let e3 = DVector::from_vec(vec![0.0, 0.0, 1.0]);
    let mismatch = rots.iter().zip(&tr.states).map(|(r, x)| (r * &e3 - x.rows(3, 3)).norm()).fold(0.0, f64::max);

    // (R k, Ad_kᵀ π) with π = Rᵀμ projects to the same (μ, Γ)
    let model = ChartModel::heavy_top();
    let alg = MatrixAlgebra::so3();
    let mut k_err: f64 = 0.0;
    for idx in (0..tr.states.len()).step_by(500) {
        let (r, x) = (&rots[idx], &tr.states[idx]);
        let pi = r.transpose() * x.rows(0, 3);
        let base = psi_project(&model, &UnreducedPoint { group: r.clone(), pi: vec![pi.clone()] }).unwrap();
        for theta in [0.4, -1.3, 2.9] {
            let k = alg.exp(&DVector::from_vec(vec![0.0, 0.0, theta])).unwrap();
            let moved = UnreducedPoint { group: r * &k, pi: vec![alg.adjoint_matrix(&k).unwrap().transpose() * &pi] };
            let q = psi_project(&model, &moved).unwrap();
            k_err = k_err.max((&q.mu[0] - &base.mu[0]).amax()).max((q.s_bar.coords() - base.s_bar.coords()).amax());
        }
    }
    outcome(
        mismatch <= HEAVY_RECON_TOL && k_err <= K_TRANSLATE_TOL,
        format!("max |R e3 - Gamma| {mismatch:.1e} (<= {HEAVY_RECON_TOL:.0e}); K-translated projection {k_err:.1e} (<= {K_TRANSLATE_TOL:.0e})"),
    )
}

fn c7() -> Outcome {
    let order = strand_residual_order().unwrap();
    let cfg = config("strand.toml");
    let pinned = cfg.numerics.grid_n == Some(128) && cfg.numerics.t_final == Some(1.0) && cfg.tolerance("propagation") == PROPAGATION_C;
    let out = run_scenario(&cfg).unwrap();
    let d = &out.diagnostics;
    let eps = d["initial_parallel_s"].as_f64().unwrap();
    let prop = d["max_parallel_s"].as_f64().unwrap();
    let curv = d["max_curvature"].as_f64().unwrap();
    let pass = pinned && order.slope >= STRAND_ORDER_MIN && prop <= PROPAGATION_C * eps && curv <= STRAND_CURVATURE_TOL;
    outcome(
        pass,
        format!(
            "order {:.3} (>= {STRAND_ORDER_MIN}); max parallel_s {prop:.2e} (<= {PROPAGATION_C} x {eps:.2e}); curvature at n = 128 {curv:.2e} (<= {STRAND_CURVATURE_TOL:.0e})",
            order.slope
        ),
    )
}

fn c8() -> Outcome {
    let prm = StrandParams::reference(128, REFERENCE_CFL_FRACTION).unwrap();
    let steps = 40;
    let levels: Vec<StrandFields> =
        (0..=steps).map(|j| manufactured_fields(|s, t| reference_rotation(s, t, 1.0), &prm, j as f64 * prm.dt()).unwrap()).collect();
    let corner = So3::from_matrix(reference_rotation(0.0, 0.0, 1.0)).unwrap();
    let rec = reconstruct_strand(&levels, &prm, &corner, RECONSTRUCTION_THRESHOLD).unwrap();
    let refused_clean = rec.report.refused;
    let mut err: f64 = f64::INFINITY;
    if let Some(rots) = rec.rotations {
        err = 0.0;
        for (j, r_row) in rots.iter().enumerate() {
            for (k, r) in r_row.iter().enumerate() {
                err = err.max((r.matrix() - reference_rotation(prm.s(k), j as f64 * prm.dt(), 1.0)).amax());
            }
        }
    }

    let mut bent = levels.clone();
    for (j, f) in bent.iter_mut().enumerate().skip(1) {
        for k in 0..prm.grid_n() {
            let bump = 0.2 * (j as f64 / steps as f64) * (2.0 * std::f64::consts::PI * prm.s(k)).sin();
            f.mu_t[k] += prm.inertia_i() * Vector3::x() * bump;
        }
    }
    let control = reconstruct_strand(&bent, &prm, &corner, RECONSTRUCTION_THRESHOLD).unwrap().report;
    outcome(
        !refused_clean && err <= ROUND_TRIP_TOL && control.refused && control.path_discrepancy > RECONSTRUCTION_THRESHOLD,
        format!(
            "round trip {err:.1e} (<= {ROUND_TRIP_TOL:.0e}); control refused = {}, discrepancy {:.1e} (> {RECONSTRUCTION_THRESHOLD:.0e})",
            control.refused, control.path_discrepancy
        ),
    )
}

fn c9() -> Outcome {
    let fam = s1_periodic_solve().unwrap();
    let tp = 2.0 * std::f64::consts::PI;
    let exact = [(-tp).exp(), tp.exp()];
    let ev_err = (0..2).map(|i| ((fam.eigenvalues[i] - exact[i]) / exact[i]).abs()).fold(0.0, f64::max);
    let family_exact = fam.mu_y == 0.0 && fam.y == 0.0;
    let mut hol_ok = true;
    let mut notes = Vec::new();
    for mu0 in [0.0, 1e-9, 2e-8, 1.0, -0.3] {
        let hol = s1_holonomy(mu0, 400, HOLONOMY_TOL).unwrap();
        let v = hol.algebra_value.as_ref().unwrap()[0];
        let refused = !hol.is_trivial;
        hol_ok &= (v - tp * mu0).abs() <= 1e-12 * mu0.abs().max(1.0) && refused == (mu0.abs() > OBSTRUCTION_MU0);
        if mu0 == 1.0 {
            notes.push(s1_verdict(&hol));
        }
    }
    outcome(
        family_exact && ev_err <= MONODROMY_TOL && hol_ok,
        format!("family (mu0, 0, 0) exact = {family_exact}; eigenvalue rel err {ev_err:.1e} (<= {MONODROMY_TOL:.0e}); mu0 = 1: {}", notes.join("")),
    )
}

fn c10() -> Outcome {
    let mut pass = true;
    let mut parts = Vec::new();
    for name in ["affine.toml", "affine_harmonic.toml"] {
        let cfg = config(name);
        let out = run_scenario(&cfg).unwrap();
        let drift = row(&out.checks, "drift_mu_bar_norm").measured;
        let res = row(&out.checks, "mu_bar_residual").measured;
        pass &= drift <= MU_BAR_DRIFT_TOL && res <= MU_BAR_RESIDUAL_TOL;
        parts.push(format!("{:?}: drift {drift:.1e}, residual {res:.1e}", cfg.affine.unwrap().potential));
    }
    outcome(pass, format!("{} (<= {MU_BAR_DRIFT_TOL:.0e}, {MU_BAR_RESIDUAL_TOL:.0e})", parts.join("; ")))
}

fn c11() -> Outcome {
    let rows = run_suite(SuiteName::Invariance, SEED, SAMPLES).unwrap();
    let inv = worst(&rows, |r| r.name != "broken_control");
    let broken = row(&rows, "broken_control").measured;
    outcome(inv <= INVARIANT_TOL && broken > BROKEN_MIN, format!("invariant max {inv:.1e} (<= {INVARIANT_TOL:.0e}); broken control {broken:.2e} (> {BROKEN_MIN:.0e})"))
}

fn c12() -> Outcome {
    let tmp = std::env::temp_dir().join(format!("polyred-acceptance-{}", std::process::id()));
    let mut names: Vec<PathBuf> = fs::read_dir(configs()).unwrap().map(|e| e.unwrap().path()).filter(|p| p.extension().is_some_and(|e| e == "toml")).collect();
    names.sort();
    let mut pass = true;
    let mut mismatched = Vec::new();
    for cfg in &names {
        let stem = cfg.file_stem().unwrap().to_string_lossy().into_owned();
        let mut csvs = Vec::new();
        for run in ["a", "b"] {
            let dir = tmp.join(&stem).join(run);
            let status = Command::new(env!("CARGO_BIN_EXE_polyred")).arg("run").arg(cfg).env(polyred_cli::OUTPUT_DIR_ENV, &dir).output().unwrap();
            pass &= status.status.success();
            let csv = fs::read_dir(&dir).unwrap().map(|e| e.unwrap().path()).find(|p| p.extension().is_some_and(|e| e == "csv")).unwrap();
            csvs.push(fs::read(csv).unwrap());
        }
        if csvs[0] != csvs[1] {
            pass = false;
            mismatched.push(stem);
        }
    }
    let _ = fs::remove_dir_all(&tmp);
    outcome(pass, format!("{} reference configs, byte-identical CSV; mismatched: {:?}", names.len(), mismatched))
}

fn main() -> ExitCode {
    type Criterion = (&'static str, fn() -> Outcome, Duration);
    let s = Duration::from_secs;
    let criteria: [Criterion; 12] = [
        ("algebra kernel", c1, s(1)),
        ("Z-derivative identity", c2, s(1)),
        ("bracket reduction", c3, s(10)),
        ("local vs intrinsic bracket", c4, s(5)),
        ("heavy top conservation", c5, s(10)),
        ("heavy top reconstruction", c6, s(10)),
        ("strand convergence and constraints", c7, s(120)),
        ("strand reconstruction round trip", c8, s(60)),
        ("S1 example", c9, s(1)),
        ("affine theory", c10, s(10)),
        ("invariance checker", c11, s(5)),
        ("CLI determinism", c12, s(60)),
    ];
    let mut failed = 0;
    for (i, (name, f, limit)) in criteria.iter().enumerate() {
        let start = Instant::now();
        let o = f();
        let elapsed = start.elapsed();
        let pass = o.pass && elapsed < *limit;
        if !pass {
            failed += 1;
        }
        println!(
            "[{}] {:>2} {name}: {} [{:.2} s, limit {} s]",
            if pass { "PASS" } else { "FAIL" },
            i + 1,
            o.detail,
            elapsed.as_secs_f64(),
            limit.as_secs()
        );
    }
    println!("acceptance: {} of {} criteria passed", criteria.len() - failed, criteria.len());
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
