//! SO(3)-strand with broken symmetry on a periodic `s`-grid.
//!
//! With `Ω = 𝕁⁻¹μ^s`, `ω = 𝕀⁻¹μ^t` and connection coefficients
//! `A_s = −Ω`, `A_t = ω`, the reduced equations are
//!
//! ```text
//! ∂_t μ^t + ∂_s μ^s + Ω × μ^s − ω × μ^t + mg Γ × χ = 0
//! ∂_s Γ + Ω × Γ = 0,      ∂_t Γ − ω × Γ = 0
//! ```
//!
//! and the reconstructible mode closes them with zero curvature,
//! `∂_t μ^s = 𝕁(−∂_s ω + ω × Ω)`.

use std::ops::{Mul, Sub};

use nalgebra::{DVector, Matrix3, SymmetricEigen, Vector3};
use serde::Serialize;

use crate::dynamics_ode::rk4_step;
use crate::error::{check_dim, Error, Result};
use crate::lie_core::{vee_skew, StructureConstants};
use crate::reconstruction::{curvature, ConnectionField};

/// Fraction of the linearised stability limit allowed for `dt`.
pub const CFL_SAFETY: f64 = 0.5;

/// Fraction of the stability limit used by reference runs. The two-level
/// residual stencil has an `O(dt²)` truncation term, so reference runs sit
/// well inside the limit.
pub const REFERENCE_CFL_FRACTION: f64 = 0.25;

/// Smallest accepted grid.
pub const MIN_GRID: usize = 16;

/// Step for differentiating closed-form rotations.
const MANUFACTURE_STEP: f64 = 1e-6;

/// Second-order centred difference with periodic wraparound.
pub fn centered_diff<T>(f: &[T], ds: f64) -> Result<Vec<T>>
where
    T: Clone,
    for<'a> &'a T: Sub<&'a T, Output = T>,
    T: Mul<f64, Output = T>,
{
    let n = f.len();
    if n < 3 {
        return Err(Error::InvalidInput(format!("centred difference needs 3 points, got {n}")));
    }
    let inv = 1.0 / (2.0 * ds);
    Ok((0..n).map(|k| (&f[(k + 1) % n] - &f[(k + n - 1) % n]) * inv).collect())
}

fn spd_inverse(m: &Matrix3<f64>, what: &str) -> Result<Matrix3<f64>> {
    if (m - m.transpose()).amax() > 1e-10 || m.cholesky().is_none() {
        return Err(Error::InvalidInput(format!("{what} must be symmetric positive definite")));
    }
    m.try_inverse().ok_or_else(|| Error::InvalidInput(format!("{what} is singular")))
}

fn max_eig(m: &Matrix3<f64>) -> f64 {
    SymmetricEigen::new(*m).eigenvalues.max()
}

#[derive(Debug, Clone, PartialEq)]
pub struct StrandParams {
    inertia_i: Matrix3<f64>,
    inertia_j: Matrix3<f64>,
    i_inv: Matrix3<f64>,
    j_inv: Matrix3<f64>,
    pub mg: f64,
    pub chi: Vector3<f64>,
    length: f64,
    grid_n: usize,
    dt: f64,
}

impl StrandParams {
    pub fn new(
        inertia_i: Matrix3<f64>,
        inertia_j: Matrix3<f64>,
        mg: f64,
        chi: Vector3<f64>,
        length: f64,
        grid_n: usize,
        dt: f64,
    ) -> Result<Self> {
        let i_inv = spd_inverse(&inertia_i, "temporal inertia")?;
        let j_inv = spd_inverse(&inertia_j, "spatial inertia")?;
        if grid_n < MIN_GRID {
            return Err(Error::InvalidInput(format!("grid_n = {grid_n} is below {MIN_GRID}")));
        }
        if !(length > 0.0) || !(dt > 0.0) || !mg.is_finite() {
            return Err(Error::InvalidInput("length and dt must be positive".into()));
        }
        let prm = Self { inertia_i, inertia_j, i_inv, j_inv, mg, chi, length, grid_n, dt };
        let limit = prm.cfl_limit();
        if dt > limit {
            return Err(Error::Cfl { dt, limit });
        }
        Ok(prm)
    }

    /// `𝕀 = diag(1, 2, 3)`, `𝕁 = diag(2, 1, 1.5)`, `mg = 0.5`, `χ = e3`,
    /// `L = 1`, with `dt` at `fraction` of the stability limit.
    pub fn reference(grid_n: usize, fraction: f64) -> Result<Self> {
        let i = Matrix3::from_diagonal(&Vector3::new(1.0, 2.0, 3.0));
        let j = Matrix3::from_diagonal(&Vector3::new(2.0, 1.0, 1.5));
        let probe = Self::new(i, j, 0.5, Vector3::z(), 1.0, grid_n.max(MIN_GRID), 1e-12)?;
        Self::new(i, j, 0.5, Vector3::z(), 1.0, grid_n, probe.cfl_limit() * fraction)
    }

    /// Upper bound on the characteristic speeds of the linearised system,
    /// `sqrt(λmax(𝕁)·λmax(𝕀⁻¹))`.
    pub fn wave_speed(&self) -> f64 {
        (max_eig(&self.inertia_j) * max_eig(&self.i_inv)).sqrt()
    }

    pub fn cfl_limit(&self) -> f64 {
        CFL_SAFETY * self.ds() / self.wave_speed()
    }

    pub fn with_dt(&self, dt: f64) -> Result<Self> {
        Self::new(self.inertia_i, self.inertia_j, self.mg, self.chi, self.length, self.grid_n, dt)
    }

    pub fn inertia_i(&self) -> &Matrix3<f64> {
        &self.inertia_i
    }

    pub fn inertia_j(&self) -> &Matrix3<f64> {
        &self.inertia_j
    }

    pub fn i_inv(&self) -> &Matrix3<f64> {
        &self.i_inv
    }

    pub fn j_inv(&self) -> &Matrix3<f64> {
        &self.j_inv
    }

    pub fn length(&self) -> f64 {
        self.length
    }

    pub fn grid_n(&self) -> usize {
        self.grid_n
    }

    pub fn ds(&self) -> f64 {
        self.length / self.grid_n as f64
    }

    pub fn dt(&self) -> f64 {
        self.dt
    }

    pub fn s(&self, k: usize) -> f64 {
        k as f64 * self.ds()
    }

    /// Pointwise `h = ½ μ^t·𝕀⁻¹μ^t − ½ μ^s·𝕁⁻¹μ^s + mg⟨Γ, χ⟩`.
    pub fn energy_density(&self, mu_s: &Vector3<f64>, mu_t: &Vector3<f64>, gamma: &Vector3<f64>) -> f64 {
        0.5 * mu_t.dot(&(self.i_inv * mu_t)) - 0.5 * mu_s.dot(&(self.j_inv * mu_s)) + self.mg * gamma.dot(&self.chi)
    }
}

/// Column names of field snapshots.
pub const CSV_HEADER: [&str; 10] = ["s", "mu_s1", "mu_s2", "mu_s3", "mu_t1", "mu_t2", "mu_t3", "gamma1", "gamma2", "gamma3"];

/// Grid fields `μ^s`, `μ^t`, `Γ`. `Γ` is stored unprojected so that its
/// norm drift can be monitored.
#[derive(Debug, Clone, PartialEq)]
pub struct StrandFields {
    pub mu_s: Vec<Vector3<f64>>,
    pub mu_t: Vec<Vector3<f64>>,
    pub gamma: Vec<Vector3<f64>>,
}

impl StrandFields {
    pub fn len(&self) -> usize {
        self.gamma.len()
    }

    pub fn is_empty(&self) -> bool {
        self.gamma.is_empty()
    }

    pub fn check(&self, n: usize) -> Result<()> {
        check_dim(n, self.mu_s.len())?;
        check_dim(n, self.mu_t.len())?;
        check_dim(n, self.gamma.len())
    }

    pub fn to_vector(&self) -> DVector<f64> {
        let n = self.len();
        let mut v = DVector::zeros(9 * n);
        for k in 0..n {
            for c in 0..3 {
                v[9 * k + c] = self.mu_s[k][c];
                v[9 * k + 3 + c] = self.mu_t[k][c];
                v[9 * k + 6 + c] = self.gamma[k][c];
            }
        }
        v
    }

    pub fn from_vector(v: &DVector<f64>) -> Result<Self> {
        if v.len() % 9 != 0 {
            return Err(Error::DimensionMismatch { expected: 9 * (v.len() / 9), got: v.len() });
        }
        let n = v.len() / 9;
        let at = |k: usize, off: usize| Vector3::new(v[9 * k + off], v[9 * k + off + 1], v[9 * k + off + 2]);
        Ok(Self {
            mu_s: (0..n).map(|k| at(k, 0)).collect(),
            mu_t: (0..n).map(|k| at(k, 3)).collect(),
            gamma: (0..n).map(|k| at(k, 6)).collect(),
        })
    }

    /// `max_k |‖Γ_k‖ − 1|`.
    pub fn gamma_drift(&self) -> f64 {
        self.gamma.iter().map(|g| (g.norm() - 1.0).abs()).fold(0.0, f64::max)
    }

    /// Snapshot rows matching [`CSV_HEADER`].
    pub fn rows(&self, ds: f64) -> Vec<[f64; 10]> {
        (0..self.len())
            .map(|k| {
                let (a, b, g) = (self.mu_s[k], self.mu_t[k], self.gamma[k]);
                [k as f64 * ds, a.x, a.y, a.z, b.x, b.y, b.z, g.x, g.y, g.z]
            })
            .collect()
    }
}

/// Time derivatives of `(μ^s, μ^t, Γ)` in the reconstructible mode.
pub fn strand_rhs_reconstructible(f: &StrandFields, prm: &StrandParams) -> Result<StrandFields> {
    f.check(prm.grid_n())?;
    let ds = prm.ds();
    let big_omega: Vec<Vector3<f64>> = f.mu_s.iter().map(|m| prm.j_inv() * m).collect();
    let omega: Vec<Vector3<f64>> = f.mu_t.iter().map(|m| prm.i_inv() * m).collect();
    let d_mu_s = centered_diff(&f.mu_s, ds)?;
    let d_omega = centered_diff(&omega, ds)?;
    let n = f.len();
    let mut out = StrandFields { mu_s: Vec::with_capacity(n), mu_t: Vec::with_capacity(n), gamma: Vec::with_capacity(n) };
    for k in 0..n {
        let (bo, w, g) = (big_omega[k], omega[k], f.gamma[k]);
        out.mu_t.push(-d_mu_s[k] - bo.cross(&f.mu_s[k]) + w.cross(&f.mu_t[k]) - prm.mg * g.cross(&prm.chi));
        out.gamma.push(w.cross(&g));
        out.mu_s.push(prm.inertia_j() * (-d_omega[k] + w.cross(&bo)));
    }
    Ok(out)
}

/// One RK4 step of the reconstructible mode.
pub fn strand_step(f: &StrandFields, prm: &StrandParams) -> Result<StrandFields> {
    let x = rk4_step(&f.to_vector(), prm.dt(), |v| Ok(strand_rhs_reconstructible(&StrandFields::from_vector(v)?, prm)?.to_vector()))?;
    StrandFields::from_vector(&x)
}

/// All time levels `0..=steps`.
pub fn evolve(f0: &StrandFields, prm: &StrandParams, steps: usize) -> Result<Vec<StrandFields>> {
    let limit = prm.cfl_limit();
    if prm.dt() > limit {
        return Err(Error::Cfl { dt: prm.dt(), limit });
    }
    let mut levels = Vec::with_capacity(steps + 1);
    levels.push(f0.clone());
    for _ in 0..steps {
        let next = strand_step(levels.last().expect("non-empty"), prm)?;
        levels.push(next);
    }
    Ok(levels)
}

/// Pointwise residual norms between two time levels, evaluated at `t + dt/2`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct StrandResiduals {
    pub lie_poisson: Vec<f64>,
    pub parallel_s: Vec<f64>,
    pub parallel_t: Vec<f64>,
    pub curvature: Vec<f64>,
}

fn vmax(v: &[f64]) -> f64 {
    v.iter().copied().fold(0.0, f64::max)
}

impl StrandResiduals {
    pub fn max_lie_poisson(&self) -> f64 {
        vmax(&self.lie_poisson)
    }

    pub fn max_parallel_s(&self) -> f64 {
        vmax(&self.parallel_s)
    }

    pub fn max_parallel_t(&self) -> f64 {
        vmax(&self.parallel_t)
    }

    pub fn max_curvature(&self) -> f64 {
        vmax(&self.curvature)
    }

    /// Largest constraint residual (both parallel conditions and curvature).
    pub fn max_constraint(&self) -> f64 {
        self.max_parallel_s().max(self.max_parallel_t()).max(self.max_curvature())
    }
}

pub fn strand_residuals(f0: &StrandFields, f1: &StrandFields, prm: &StrandParams) -> Result<StrandResiduals> {
    let n = prm.grid_n();
    f0.check(n)?;
    f1.check(n)?;
    let (ds, dt) = (prm.ds(), prm.dt());
    let mid = |a: &[Vector3<f64>], b: &[Vector3<f64>]| -> Vec<Vector3<f64>> { a.iter().zip(b).map(|(x, y)| (x + y) * 0.5).collect() };
    let (ms, mt, g) = (mid(&f0.mu_s, &f1.mu_s), mid(&f0.mu_t, &f1.mu_t), mid(&f0.gamma, &f1.gamma));
    let d_ms = centered_diff(&ms, ds)?;
    let d_g = centered_diff(&g, ds)?;
    let mut res = StrandResiduals { lie_poisson: vec![], parallel_s: vec![], parallel_t: vec![], curvature: vec![] };
    for k in 0..n {
        let bo = prm.j_inv() * ms[k];
        let w = prm.i_inv() * mt[k];
        let dt_mt = (f1.mu_t[k] - f0.mu_t[k]) / dt;
        let dt_g = (f1.gamma[k] - f0.gamma[k]) / dt;
        res.lie_poisson.push((dt_mt + d_ms[k] + bo.cross(&ms[k]) - w.cross(&mt[k]) + prm.mg * g[k].cross(&prm.chi)).norm());
        res.parallel_s.push((d_g[k] + bo.cross(&g[k])).norm());
        res.parallel_t.push((dt_g - w.cross(&g[k])).norm());
    }
    let coeffs = |f: &StrandFields, s_dir: bool| -> Vec<DVector<f64>> {
        (0..n)
            .map(|k| {
                let v = if s_dir { -(prm.j_inv() * f.mu_s[k]) } else { prm.i_inv() * f.mu_t[k] };
                DVector::from_column_slice(v.as_slice())
            })
            .collect()
    };
    let field = ConnectionField::Plane {
        a_s: vec![coeffs(f0, true), coeffs(f1, true)],
        a_t: vec![coeffs(f0, false), coeffs(f1, false)],
        ds,
        dt,
    };
    let curv = curvature(&StructureConstants::so3(), &field)?;
    res.curvature = curv.values[0].iter().map(|v| v.norm()).collect();
    Ok(res)
}

/// Fields projected from a closed-form rotation map `R(s, t)`, periodic in `s`:
/// `Ω = −vee(∂_s R R⁻¹)`, `ω = vee(∂_t R R⁻¹)`, `μ^s = 𝕁Ω`, `μ^t = 𝕀ω`,
/// `Γ = R e3`. Derivatives are central differences of `R`.
pub fn manufactured_fields(r: impl Fn(f64, f64) -> Matrix3<f64>, prm: &StrandParams, t: f64) -> Result<StrandFields> {
    let l = prm.length();
    if (r(0.0, t) - r(l, t)).amax() > 1e-9 {
        return Err(Error::InvalidInput("rotation map is not periodic in s".into()));
    }
    let h = MANUFACTURE_STEP;
    let n = prm.grid_n();
    let mut f = StrandFields { mu_s: Vec::with_capacity(n), mu_t: Vec::with_capacity(n), gamma: Vec::with_capacity(n) };
    for k in 0..n {
        let s = prm.s(k);
        let rt = r(s, t).transpose();
        let a_s = vee_skew(&((r(s + h, t) - r(s - h, t)) / (2.0 * h) * rt));
        let a_t = vee_skew(&((r(s, t + h) - r(s, t - h)) / (2.0 * h) * rt));
        f.mu_s.push(-(prm.inertia_j() * a_s));
        f.mu_t.push(prm.inertia_i() * a_t);
        f.gamma.push(r(s, t) * Vector3::z());
    }
    Ok(f)
}

/// Smooth flat reference map `R(s, t) = exp(t·w) · exp(a(s, t))` with
/// `a = 0.3 sin(2πs/L + t) e1 + 0.2 cos(2πs/L) e2`, `w = (0.2, −0.1, 0.8)`.
pub fn reference_rotation(s: f64, t: f64, length: f64) -> Matrix3<f64> {
    use crate::lie_core::exp_so3;
    let k = 2.0 * std::f64::consts::PI / length;
    let a = Vector3::new(0.3 * (k * s + t).sin(), 0.2 * (k * s).cos(), 0.0);
    *exp_so3(&(Vector3::new(0.2, -0.1, 0.8) * t)).compose(&exp_so3(&a)).matrix()
}
