//! Curvature, parallel transport and holonomy of connections in a
//! trivialisation, and reconstruction of unreduced solutions.
//!
//! A section `R` is parallel for coefficients `A_i` when `∂_i R = hat(A_i)·R`.
//! Integrability of the two directions `(s, t)` is the vanishing of
//!
//! ```text
//! F = ∂_s A_t − ∂_t A_s − [A_s, A_t].
//! ```

use nalgebra::{DMatrix, DVector, Vector3};
use serde::Serialize;

use crate::error::{check_dim, Error, Result};
use crate::lie_core::{exp_so3, vee_skew, AlgebraVector, MatrixAlgebra, So3, StructureConstants};
use crate::strand_pde::{centered_diff, StrandFields, StrandParams};

/// Default tolerance for holonomy triviality.
pub const HOLONOMY_TOL: f64 = 1e-8;

/// Default gate for strand reconstruction (curvature and path discrepancy).
pub const RECONSTRUCTION_THRESHOLD: f64 = 1e-3;

/// Connection coefficients sampled on a grid.
#[derive(Debug, Clone, PartialEq)]
pub enum ConnectionField {
    /// One base direction: `a[k]` at `x_k = k·h`.
    Line { a: Vec<AlgebraVector>, h: f64 },
    /// Two base directions on a periodic-in-`s` grid: `a_s[j][k]`, `a_t[j][k]`
    /// at time level `j` and spatial point `k`.
    Plane { a_s: Vec<Vec<AlgebraVector>>, a_t: Vec<Vec<AlgebraVector>>, ds: f64, dt: f64 },
}

/// Curvature at half time levels `j + ½`.
#[derive(Debug, Clone, PartialEq)]
pub struct CurvatureField {
    pub values: Vec<Vec<AlgebraVector>>,
    /// Set for one-dimensional bases, where curvature vanishes identically.
    pub trivially_flat: bool,
}

impl CurvatureField {
    pub fn max_norm(&self) -> f64 {
        self.values.iter().flatten().map(|f| f.norm()).fold(0.0, f64::max)
    }
}

pub fn curvature(c: &StructureConstants, a: &ConnectionField) -> Result<CurvatureField> {
    let (a_s, a_t, ds, dt) = match a {
        ConnectionField::Line { .. } => return Ok(CurvatureField { values: Vec::new(), trivially_flat: true }),
        ConnectionField::Plane { a_s, a_t, ds, dt } => (a_s, a_t, *ds, *dt),
    };
    check_dim(a_s.len(), a_t.len())?;
    if a_s.len() < 2 {
        return Err(Error::InvalidInput("curvature needs two time levels".into()));
    }
    let mut values = Vec::with_capacity(a_s.len() - 1);
    for j in 0..a_s.len() - 1 {
        let n = a_s[j].len();
        for row in [&a_s[j], &a_s[j + 1], &a_t[j], &a_t[j + 1]] {
            check_dim(n, row.len())?;
        }
        let avg = |r: &[AlgebraVector], r2: &[AlgebraVector]| -> Vec<AlgebraVector> {
            r.iter().zip(r2).map(|(x, y)| (x + y) * 0.5).collect()
        };
        let s_mid = avg(&a_s[j], &a_s[j + 1]);
        let t_mid = avg(&a_t[j], &a_t[j + 1]);
        let ds_at = centered_diff(&t_mid, ds)?;
        let mut row = Vec::with_capacity(n);
        for k in 0..n {
            let dt_as = (&a_s[j + 1][k] - &a_s[j][k]) / dt;
            row.push(&ds_at[k] - dt_as - c.bracket(&s_mid[k], &t_mid[k])?);
        }
        values.push(row);
    }
    Ok(CurvatureField { values, trivially_flat: false })
}

fn check_step(a: &AlgebraVector, h: f64) -> Result<()> {
    let r = a.norm() * h.abs();
    if !r.is_finite() {
        return Err(Error::NonFinite("connection coefficient".into()));
    }
    if r > 1.0 {
        return Err(Error::StepTooLarge(r));
    }
    Ok(())
}

/// Transport `R0` along grid samples `a[0..=m]` spaced by `h`, using the
/// midpoint value on each step. Returns `R` at every sample.
pub fn parallel_transport(alg: &MatrixAlgebra, r0: &DMatrix<f64>, a: &[AlgebraVector], h: f64) -> Result<Vec<DMatrix<f64>>> {
    let mut out = Vec::with_capacity(a.len());
    out.push(r0.clone());
    for w in a.windows(2) {
        let mid = (&w[0] + &w[1]) * 0.5;
        check_step(&mid, h)?;
        let next = alg.exp(&(mid * h))? * out.last().expect("non-empty");
        out.push(next);
    }
    Ok(out)
}

/// Fourth-order Magnus transport of `R0` for `dR/dx = hat(A(x))·R` on
/// `[x0, x0 + steps·h]`, sampling `A` at the two Gauss points of each step.
pub fn transport_magnus(
    alg: &MatrixAlgebra,
    r0: &DMatrix<f64>,
    a: impl Fn(f64) -> Result<AlgebraVector>,
    x0: f64,
    h: f64,
    steps: usize,
) -> Result<Vec<DMatrix<f64>>> {
    let c = alg.constants();
    let g = 3f64.sqrt() / 6.0;
    let mut out = Vec::with_capacity(steps + 1);
    out.push(r0.clone());
    for k in 0..steps {
        let x = x0 + k as f64 * h;
        let a1 = a(x + (0.5 - g) * h)?;
        let a2 = a(x + (0.5 + g) * h)?;
        check_step(&a1, h)?;
        check_step(&a2, h)?;
        let omega = (&a1 + &a2) * (h / 2.0) + c.bracket(&a2, &a1)? * (3f64.sqrt() * h * h / 12.0);
        let next = alg.exp(&omega)? * out.last().expect("non-empty");
        out.push(next);
    }
    Ok(out)
}

/// Cubic Hermite interpolant through samples `y[k]` with slopes `dy[k]` at
/// spacing `h`, evaluated at `x ∈ [0, (m−1)h]`.
pub fn hermite(y: &[AlgebraVector], dy: &[AlgebraVector], h: f64, x: f64) -> Result<AlgebraVector> {
    check_dim(y.len(), dy.len())?;
    if y.len() < 2 {
        return Err(Error::InvalidInput("hermite needs two samples".into()));
    }
    let k = ((x / h).floor() as isize).clamp(0, y.len() as isize - 2) as usize;
    let u = x / h - k as f64;
    let (h00, h10) = (2.0 * u.powi(3) - 3.0 * u * u + 1.0, u.powi(3) - 2.0 * u * u + u);
    let (h01, h11) = (-2.0 * u.powi(3) + 3.0 * u * u, u.powi(3) - u * u);
    Ok(&y[k] * h00 + &dy[k] * (h10 * h) + &y[k + 1] * h01 + &dy[k + 1] * (h11 * h))
}

/// Base-coordinate description of a path, used to verify that it is closed.
#[derive(Debug, Clone, PartialEq)]
pub struct LoopPath {
    pub start: DVector<f64>,
    pub end: DVector<f64>,
    /// Period of each coordinate; zero for non-periodic coordinates.
    pub periods: DVector<f64>,
}

impl LoopPath {
    /// The loop `θ: 0 → 2π` on S¹.
    pub fn circle() -> Self {
        let tp = 2.0 * std::f64::consts::PI;
        Self { start: DVector::zeros(1), end: DVector::from_element(1, tp), periods: DVector::from_element(1, tp) }
    }

    pub fn is_closed(&self) -> bool {
        self.start.len() == self.end.len()
            && self.start.len() == self.periods.len()
            && (0..self.start.len()).all(|i| {
                let d = self.end[i] - self.start[i];
                let p = self.periods[i];
                if p == 0.0 {
                    d.abs() < 1e-12
                } else {
                    let r = d / p;
                    (r - r.round()).abs() < 1e-12
                }
            })
    }

    pub fn describe(&self) -> String {
        format!("from {:?} to {:?} (periods {:?})", self.start.as_slice(), self.end.as_slice(), self.periods.as_slice())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct HolonomyResult {
    pub element: Vec<Vec<f64>>,
    /// Line integral `∮A`, for abelian algebras only.
    pub algebra_value: Option<Vec<f64>>,
    pub loop_description: String,
    pub distance_to_identity: f64,
    pub tolerance: f64,
    pub is_trivial: bool,
}

/// Holonomy of the samples `a[0..=m]` (spacing `h`) around `path`.
pub fn holonomy_loop(alg: &MatrixAlgebra, a: &[AlgebraVector], h: f64, path: &LoopPath, tol: f64) -> Result<HolonomyResult> {
    if !path.is_closed() {
        return Err(Error::InvalidInput(format!("open path {}", path.describe())));
    }
    let id = DMatrix::identity(alg.matrix_size(), alg.matrix_size());
    let r = parallel_transport(alg, &id, a, h)?;
    let element = r.last().expect("non-empty").clone();
    let d = alg.dim();
    let abelian = (0..d).all(|i| (0..d).all(|j| (0..d).all(|k| alg.constants().get(i, j, k) == 0.0)));
    let (algebra_value, distance) = if abelian {
        let mut v = DVector::zeros(alg.dim());
        for w in a.windows(2) {
            v += (&w[0] + &w[1]) * (h / 2.0);
        }
        let d = v.amax();
        (Some(v.as_slice().to_vec()), d)
    } else {
        (None, (&element - &id).amax())
    };
    Ok(HolonomyResult {
        element: (0..element.nrows()).map(|i| element.row(i).iter().copied().collect()).collect(),
        algebra_value,
        loop_description: path.describe(),
        distance_to_identity: distance,
        tolerance: tol,
        is_trivial: distance <= tol,
    })
}

/// Rotations `R(t_k)` transported along `A(t) = 𝕀⁻¹μ(t)`, with `A` taken
/// from the cubic Hermite interpolant of samples `a[k]` and slopes `da[k]`.
pub fn reconstruct_ode(alg: &MatrixAlgebra, r0: &DMatrix<f64>, a: &[AlgebraVector], da: &[AlgebraVector], dt: f64) -> Result<Vec<DMatrix<f64>>> {
    if a.is_empty() {
        return Err(Error::InvalidInput("empty trajectory".into()));
    }
    transport_magnus(alg, r0, |t| hermite(a, da, dt, t), 0.0, dt, a.len() - 1)
}

/// Outcome of a strand reconstruction, emitted as JSON.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ReconstructionReport {
    pub curvature_max: f64,
    /// `max ‖R_{s first} − R_{t first}‖` over the grid.
    pub path_discrepancy: f64,
    /// `‖R_n − R_0‖` after one turn around the periodic `s` loop at `t = 0`.
    pub s_loop_holonomy: f64,
    pub gamma_mismatch: f64,
    pub mu_s_mismatch: f64,
    pub threshold: f64,
    pub loops_tested: String,
    pub refused: bool,
}

#[derive(Debug, Clone)]
pub struct StrandReconstruction {
    pub report: ReconstructionReport,
    /// `R[j][k]` at time level `j` and grid point `k`; absent when refused.
    pub rotations: Option<Vec<Vec<So3>>>,
}

impl StrandReconstruction {
    pub fn into_result(self) -> Result<Vec<Vec<So3>>> {
        match self.rotations {
            Some(r) => Ok(r),
            None => Err(Error::Obstructed(format!(
                "curvature {:.3e}, path discrepancy {:.3e}, threshold {:.1e}",
                self.report.curvature_max, self.report.path_discrepancy, self.report.threshold
            ))),
        }
    }
}

fn step(a0: &Vector3<f64>, a1: &Vector3<f64>, h: f64, r: &So3) -> Result<So3> {
    let mid = (a0 + a1) * 0.5;
    let x = mid.norm() * h.abs();
    if x > 1.0 {
        return Err(Error::StepTooLarge(x));
    }
    Ok(exp_so3(&(mid * h)).compose(r))
}

/// Fourth-order Magnus step from grid point `k` to `k + 1` of a periodic row,
/// with the Gauss-point values taken from the cubic through `k − 1..=k + 2`.
fn step_periodic(row: &[Vector3<f64>], k: usize, h: f64, r: &So3) -> Result<So3> {
    let n = row.len();
    let at = |i: isize| row[(k as isize + i).rem_euclid(n as isize) as usize];
    let cubic = |x: f64| {
        at(-1) * (-x * (x - 1.0) * (x - 2.0) / 6.0)
            + at(0) * ((x + 1.0) * (x - 1.0) * (x - 2.0) / 2.0)
            + at(1) * (-(x + 1.0) * x * (x - 2.0) / 2.0)
            + at(2) * ((x + 1.0) * x * (x - 1.0) / 6.0)
    };
    let g = 3f64.sqrt() / 6.0;
    let (a1, a2) = (cubic(0.5 - g), cubic(0.5 + g));
    let x = a1.norm().max(a2.norm()) * h.abs();
    if x > 1.0 {
        return Err(Error::StepTooLarge(x));
    }
    let omega = (a1 + a2) * (h / 2.0) + a2.cross(&a1) * (3f64.sqrt() * h * h / 12.0);
    Ok(exp_so3(&omega).compose(r))
}

/// Reconstructs `R(s, t)` from strand fields at consecutive time levels
/// spaced by `dt`, with `A_s = −𝕁⁻¹μ^s` and `A_t = 𝕀⁻¹μ^t`.
///
/// The primary path runs along `s` at `t = 0` and then up each column; the
/// control path runs up `s = 0` and then along each row. Reconstruction is
/// refused when the curvature or the discrepancy between the two exceeds
/// `threshold`.
pub fn reconstruct_strand(levels: &[StrandFields], prm: &StrandParams, r_corner: &So3, threshold: f64) -> Result<StrandReconstruction> {
    let nt = levels.len();
    if nt < 2 {
        return Err(Error::InvalidInput("need at least two time levels".into()));
    }
    let n = prm.grid_n();
    for f in levels {
        f.check(n)?;
    }
    let (ds, dt) = (prm.ds(), prm.dt());
    let a_s: Vec<Vec<Vector3<f64>>> = levels.iter().map(|f| f.mu_s.iter().map(|m| -(prm.j_inv() * m)).collect()).collect();
    let a_t: Vec<Vec<Vector3<f64>>> = levels.iter().map(|f| f.mu_t.iter().map(|m| prm.i_inv() * m).collect()).collect();

    let to_dv = |rows: &Vec<Vec<Vector3<f64>>>| -> Vec<Vec<DVector<f64>>> {
        rows.iter().map(|r| r.iter().map(|v| DVector::from_column_slice(v.as_slice())).collect()).collect()
    };
    let field = ConnectionField::Plane { a_s: to_dv(&a_s), a_t: to_dv(&a_t), ds, dt };
    let curvature_max = curvature(&StructureConstants::so3(), &field)?.max_norm();

    // s first, then t
    let mut primary = vec![vec![So3::identity(); n]; nt];
    primary[0][0] = *r_corner;
    for k in 1..n {
        primary[0][k] = step_periodic(&a_s[0], k - 1, ds, &primary[0][k - 1])?;
    }
    let wrap = step_periodic(&a_s[0], n - 1, ds, &primary[0][n - 1])?;
    let s_loop_holonomy = (wrap.matrix() - primary[0][0].matrix()).amax();
    for j in 1..nt {
        for k in 0..n {
            primary[j][k] = step(&a_t[j - 1][k], &a_t[j][k], dt, &primary[j - 1][k])?;
        }
    }
    // t first, then s
    let mut path_discrepancy: f64 = 0.0;
    let mut col = *r_corner;
    for j in 0..nt {
        if j > 0 {
            col = step(&a_t[j - 1][0], &a_t[j][0], dt, &col)?;
        }
        let mut r = col;
        path_discrepancy = path_discrepancy.max((r.matrix() - primary[j][0].matrix()).amax());
        for k in 1..n {
            r = step_periodic(&a_s[j], k - 1, ds, &r)?;
            path_discrepancy = path_discrepancy.max((r.matrix() - primary[j][k].matrix()).amax());
        }
    }

    // projection checks: Γ = R e3 and μ^s = −𝕁 vee(∂_s R R⁻¹) at interior points
    let mut gamma_mismatch: f64 = 0.0;
    let mut mu_s_mismatch: f64 = 0.0;
    for (j, f) in levels.iter().enumerate() {
        for k in 0..n {
            gamma_mismatch = gamma_mismatch.max((primary[j][k].act(&Vector3::z()) - f.gamma[k]).amax());
            if k > 0 && k + 1 < n {
                let d = (primary[j][k + 1].matrix() - primary[j][k - 1].matrix()) / (2.0 * ds);
                let omega = -(prm.inertia_j() * vee_skew(&(d * primary[j][k].matrix().transpose())));
                mu_s_mismatch = mu_s_mismatch.max((omega - f.mu_s[k]).amax());
            }
        }
    }

    let refused = !(curvature_max <= threshold && path_discrepancy <= threshold);
    let report = ReconstructionReport {
        curvature_max,
        path_discrepancy,
        s_loop_holonomy,
        gamma_mismatch,
        mu_s_mismatch,
        threshold,
        loops_tested: format!("{} grid plaquettes; periodic s-loop at t = 0", (nt - 1) * n),
        refused,
    };
    Ok(StrandReconstruction { report, rotations: if refused { None } else { Some(primary) } })
}
