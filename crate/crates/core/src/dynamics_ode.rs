//! Reduced equations of motion over a one-dimensional base, written as
//! explicit ODEs, together with a classical RK4 integrator.
//!
//! With `a = δh/δμ` and `c = δh/δs̄`, every scenario follows
//!
//! ```text
//! dμ/dt = −ad*_a μ − P⁺(c),    ds̄/dt = P(a).
//! ```

use std::fmt;
use std::sync::Arc;

use nalgebra::{DMatrix, DVector, Matrix2, Matrix3, Vector2, Vector3};

use crate::error::{check_dim, Error, Result};
use crate::homogeneous::{AffineConfig, Configuration, SpherePoint};
use crate::reduced_bracket::{fiber_derivative, vertical_derivative, BracketContext, HamiltonianSpec, ReducedPoint};

fn spd_check(m: &Matrix3<f64>, what: &str) -> Result<Matrix3<f64>> {
    if (m - m.transpose()).amax() > 1e-10 {
        return Err(Error::InvalidInput(format!("{what} is not symmetric")));
    }
    if m.cholesky().is_none() {
        return Err(Error::InvalidInput(format!("{what} is not positive definite")));
    }
    m.try_inverse().ok_or_else(|| Error::InvalidInput(format!("{what} is singular")))
}

fn dv(v: &Vector3<f64>) -> DVector<f64> {
    DVector::from_column_slice(v.as_slice())
}

fn v3(x: &DVector<f64>, at: usize) -> Vector3<f64> {
    Vector3::new(x[at], x[at + 1], x[at + 2])
}

/// Heavy top: `h = ½ μ·𝕀⁻¹μ + mg⟨Γ, χ⟩`.
#[derive(Debug, Clone, PartialEq)]
pub struct HeavyTopParams {
    inertia: Matrix3<f64>,
    inertia_inv: Matrix3<f64>,
    pub mg: f64,
    pub chi: Vector3<f64>,
}

impl HeavyTopParams {
    pub fn new(inertia: Matrix3<f64>, mg: f64, chi: Vector3<f64>) -> Result<Self> {
        let inertia_inv = spd_check(&inertia, "inertia")?;
        if !(mg >= 0.0) || chi.iter().any(|x| !x.is_finite()) {
            return Err(Error::InvalidInput("mg must be non-negative and χ finite".into()));
        }
        Ok(Self { inertia, inertia_inv, mg, chi })
    }

    /// `𝕀 = diag(1, 2, 3)`, `χ = e3`, `mg = 1`.
    pub fn reference() -> Self {
        Self::new(Matrix3::from_diagonal(&Vector3::new(1.0, 2.0, 3.0)), 1.0, Vector3::z()).expect("reference params")
    }

    pub fn inertia(&self) -> &Matrix3<f64> {
        &self.inertia
    }

    pub fn inertia_inv(&self) -> &Matrix3<f64> {
        &self.inertia_inv
    }

    pub fn energy(&self, mu: &Vector3<f64>, gamma: &Vector3<f64>) -> f64 {
        0.5 * mu.dot(&(self.inertia_inv * mu)) + self.mg * gamma.dot(&self.chi)
    }

    /// The reduced Hamiltonian with analytic derivatives.
    pub fn hamiltonian_spec(&self) -> HamiltonianSpec {
        let (p1, p2, p3) = (self.clone(), self.clone(), self.clone());
        HamiltonianSpec::new(move |p| p1.energy(&v3(&p.mu[0], 0), &v3(&p.s_bar.coords(), 0)))
            .with_d_mu(move |p| vec![dv(&(p2.inertia_inv * v3(&p.mu[0], 0)))])
            .with_d_s(move |_| dv(&(p3.chi * p3.mg)))
    }

    /// Right-hand side on the packed state `[μ, Γ]`.
    pub fn rhs(&self, x: &DVector<f64>) -> Result<DVector<f64>> {
        check_dim(6, x.len())?;
        let (mu, gamma) = (v3(x, 0), v3(x, 3));
        let a = self.inertia_inv * mu;
        let dmu = a.cross(&mu) - self.mg * gamma.cross(&self.chi);
        let dg = a.cross(&gamma);
        Ok(DVector::from_iterator(6, dmu.iter().chain(dg.iter()).copied()))
    }
}

pub type PotentialFn = Arc<dyn Fn(&Vector3<f64>) -> (f64, Vector3<f64>) + Send + Sync>;

/// Affine theory: `h = ½ μ·𝕀⁻¹μ + ½ ω·M⁻¹ω + V(s̄)`.
#[derive(Clone)]
pub struct AffineParams {
    inertia_inv: Matrix3<f64>,
    mass_inv: Matrix3<f64>,
    /// Value and gradient of `V`.
    pub potential: PotentialFn,
}

impl fmt::Debug for AffineParams {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("AffineParams").field("inertia_inv", &self.inertia_inv).field("mass_inv", &self.mass_inv).finish()
    }
}

impl AffineParams {
    pub fn new(inertia: Matrix3<f64>, mass_inv: Matrix3<f64>, potential: PotentialFn) -> Result<Self> {
        let inertia_inv = spd_check(&inertia, "inertia")?;
        spd_check(&mass_inv, "inverse mass")?;
        Ok(Self { inertia_inv, mass_inv, potential })
    }

    /// `V(s̄) = g⟨s̄, e3⟩`.
    pub fn with_gravity(inertia: Matrix3<f64>, mass_inv: Matrix3<f64>, g: f64) -> Result<Self> {
        Self::new(inertia, mass_inv, Arc::new(move |s: &Vector3<f64>| (g * s.z, Vector3::new(0.0, 0.0, g))))
    }

    pub fn reference() -> Self {
        Self::with_gravity(Matrix3::from_diagonal(&Vector3::new(1.0, 2.0, 3.0)), Matrix3::identity(), 1.0).expect("reference params")
    }

    pub fn inertia_inv(&self) -> &Matrix3<f64> {
        &self.inertia_inv
    }

    pub fn mass_inv(&self) -> &Matrix3<f64> {
        &self.mass_inv
    }

    pub fn energy(&self, mu: &Vector3<f64>, omega: &Vector3<f64>, s: &Vector3<f64>) -> f64 {
        0.5 * mu.dot(&(self.inertia_inv * mu)) + 0.5 * omega.dot(&(self.mass_inv * omega)) + (self.potential)(s).0
    }

    /// The reduced Hamiltonian on `(so(3)⋉ℝ³)* × ℝ³` with analytic derivatives.
    pub fn hamiltonian_spec(&self) -> HamiltonianSpec {
        let (p1, p2, p3) = (self.clone(), self.clone(), self.clone());
        HamiltonianSpec::new(move |p| p1.energy(&v3(&p.mu[0], 0), &v3(&p.mu[0], 3), &v3(&p.s_bar.coords(), 0)))
            .with_d_mu(move |p| {
                let a = p2.inertia_inv * v3(&p.mu[0], 0);
                let b = p2.mass_inv * v3(&p.mu[0], 3);
                vec![DVector::from_iterator(6, a.iter().chain(b.iter()).copied())]
            })
            .with_d_s(move |p| dv(&(p3.potential)(&v3(&p.s_bar.coords(), 0)).1))
    }

    /// Right-hand side on the packed state `[μ, ω, s̄]`.
    pub fn rhs(&self, x: &DVector<f64>) -> Result<DVector<f64>> {
        check_dim(9, x.len())?;
        let (mu, omega, s) = (v3(x, 0), v3(x, 3), v3(x, 6));
        let a = self.inertia_inv * mu;
        let b = self.mass_inv * omega;
        let c = (self.potential)(&s).1;
        let dmu = a.cross(&mu) + b.cross(&omega) - s.cross(&c);
        let domega = a.cross(&omega) - c;
        let ds = a.cross(&s) + b;
        Ok(DVector::from_iterator(9, dmu.iter().chain(domega.iter()).chain(ds.iter()).copied()))
    }

    /// `μ̄ = μ − s̄ × ω`, transported by `dμ̄/dt = a × μ̄`.
    pub fn mu_bar(mu: &Vector3<f64>, omega: &Vector3<f64>, s: &Vector3<f64>) -> Vector3<f64> {
        mu - s.cross(omega)
    }
}

/// `h = ½(μx² + μy² − y²)` on `(ℝ²)* × ℝ`.
pub fn s1_hamiltonian_spec() -> HamiltonianSpec {
    HamiltonianSpec::new(|p| {
        let y = p.s_bar.coords()[0];
        0.5 * (p.mu[0][0].powi(2) + p.mu[0][1].powi(2) - y * y)
    })
    .with_d_mu(|p| vec![p.mu[0].clone()])
    .with_d_s(|p| DVector::from_element(1, -p.s_bar.coords()[0]))
}

/// `(μx', μy', y') = (0, y, μy)`.
pub fn s1_rhs(x: &DVector<f64>) -> Result<DVector<f64>> {
    check_dim(3, x.len())?;
    Ok(DVector::from_vec(vec![0.0, x[2], x[1]]))
}

/// Scenario-tagged state.
#[derive(Debug, Clone, PartialEq)]
pub enum OdeState {
    HeavyTop { mu: Vector3<f64>, gamma: Vector3<f64> },
    Affine { mu: Vector3<f64>, omega: Vector3<f64>, s_bar: Vector3<f64> },
    S1 { mu_x: f64, mu_y: f64, y: f64 },
}

impl OdeState {
    pub fn to_vector(&self) -> DVector<f64> {
        match self {
            OdeState::HeavyTop { mu, gamma } => DVector::from_iterator(6, mu.iter().chain(gamma.iter()).copied()),
            OdeState::Affine { mu, omega, s_bar } => DVector::from_iterator(9, mu.iter().chain(omega.iter()).chain(s_bar.iter()).copied()),
            OdeState::S1 { mu_x, mu_y, y } => DVector::from_vec(vec![*mu_x, *mu_y, *y]),
        }
    }

    /// Rebuilds a state of the same kind from packed components.
    pub fn with_vector(&self, x: &DVector<f64>) -> Result<OdeState> {
        Ok(match self {
            OdeState::HeavyTop { .. } => {
                check_dim(6, x.len())?;
                OdeState::HeavyTop { mu: v3(x, 0), gamma: v3(x, 3) }
            }
            OdeState::Affine { .. } => {
                check_dim(9, x.len())?;
                OdeState::Affine { mu: v3(x, 0), omega: v3(x, 3), s_bar: v3(x, 6) }
            }
            OdeState::S1 { .. } => {
                check_dim(3, x.len())?;
                OdeState::S1 { mu_x: x[0], mu_y: x[1], y: x[2] }
            }
        })
    }

    /// The reduced point `(μ, s̄)`.
    pub fn reduced_point(&self) -> Result<ReducedPoint> {
        match self {
            OdeState::HeavyTop { mu, gamma } => ReducedPoint::new(vec![dv(mu)], Configuration::Sphere(SpherePoint::from_drifted(*gamma))),
            OdeState::Affine { mu, omega, s_bar } => ReducedPoint::new(
                vec![DVector::from_iterator(6, mu.iter().chain(omega.iter()).copied())],
                Configuration::Affine(AffineConfig::new(*s_bar)?),
            ),
            OdeState::S1 { mu_x, mu_y, y } => {
                ReducedPoint::new(vec![DVector::from_vec(vec![*mu_x, *mu_y])], Configuration::Euclidean(DVector::from_element(1, *y)))
            }
        }
    }
}

/// Residuals of the reduced equations at a point, given the base derivatives
/// `∂_i μ^i` and `∂_i s̄` (trivial connection):
///
/// * Lie–Poisson: `Σ_i ∂_i μ^i + Σ_i ad*_{a_i} μ^i + P⁺(c)`,
/// * parallel, per direction: `∂_i s̄ − P(a_i)`.
pub fn general_reduced_residual(
    ctx: &BracketContext,
    h: &HamiltonianSpec,
    p: &ReducedPoint,
    d_mu: &[DVector<f64>],
    d_s: &[DVector<f64>],
) -> Result<(DVector<f64>, Vec<DVector<f64>>)> {
    check_dim(p.n(), d_mu.len())?;
    check_dim(p.n(), d_s.len())?;
    let a = fiber_derivative(h, p)?;
    let c = vertical_derivative(h, p)?;
    let mut lp = ctx.action.dual(&p.s_bar, &c)?;
    for i in 0..p.n() {
        check_dim(lp.len(), d_mu[i].len())?;
        lp += &d_mu[i] + ctx.constants.coad(&a[i], &p.mu[i])?;
    }
    let parallel = (0..p.n())
        .map(|i| {
            let gen = ctx.action.generator(&p.s_bar, &a[i])?;
            check_dim(gen.len(), d_s[i].len())?;
            Ok(&d_s[i] - gen)
        })
        .collect::<Result<_>>()?;
    Ok((lp, parallel))
}

/// One classical RK4 step of `ẋ = f(x)`.
pub fn rk4_step(x: &DVector<f64>, dt: f64, f: impl Fn(&DVector<f64>) -> Result<DVector<f64>>) -> Result<DVector<f64>> {
    if !(dt > 0.0) || !dt.is_finite() {
        return Err(Error::InvalidInput(format!("time step {dt} must be positive")));
    }
    let check = |k: DVector<f64>, stage: usize| -> Result<DVector<f64>> {
        if k.iter().all(|v| v.is_finite()) {
            Ok(k)
        } else {
            Err(Error::NonFinite(format!("RK4 stage {stage}")))
        }
    };
    let k1 = check(f(x)?, 1)?;
    let k2 = check(f(&(x + &k1 * (dt / 2.0)))?, 2)?;
    let k3 = check(f(&(x + &k2 * (dt / 2.0)))?, 3)?;
    let k4 = check(f(&(x + &k3 * dt))?, 4)?;
    Ok(x + (k1 + k2 * 2.0 + k3 * 2.0 + k4) * (dt / 6.0))
}

/// Samples `x(t_k)`, `t_k = k·dt`, `k = 0..=steps`.
#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    pub dt: f64,
    pub states: Vec<DVector<f64>>,
}

impl Trajectory {
    pub fn time(&self, k: usize) -> f64 {
        k as f64 * self.dt
    }

    pub fn last(&self) -> &DVector<f64> {
        self.states.last().expect("trajectory holds the initial state")
    }
}

pub fn integrate(
    x0: &DVector<f64>,
    dt: f64,
    steps: usize,
    f: impl Fn(&DVector<f64>) -> Result<DVector<f64>>,
) -> Result<Trajectory> {
    let mut states = Vec::with_capacity(steps + 1);
    states.push(x0.clone());
    for _ in 0..steps {
        let next = rk4_step(states.last().expect("non-empty"), dt, &f)?;
        states.push(next);
    }
    Ok(Trajectory { dt, states })
}

/// Periodic solutions of the S¹ example over `θ ∈ [0, 2π]`.
#[derive(Debug, Clone, PartialEq)]
pub struct PeriodicFamily {
    /// Monodromy of the `(μy, y)` subsystem.
    pub monodromy: Matrix2<f64>,
    pub eigenvalues: Vector2<f64>,
    /// No monodromy eigenvalue equals one, so `(μy, y) = 0` is the only fixed point.
    pub unique: bool,
    /// `μx` is a free constant; `μy = y = 0`.
    pub mu_y: f64,
    pub y: f64,
}

impl PeriodicFamily {
    /// The periodic solution with `μx = μ0`.
    pub fn member(&self, mu0: f64) -> OdeState {
        OdeState::S1 { mu_x: mu0, mu_y: self.mu_y, y: self.y }
    }
}

/// Monodromy by integrating unit initial data with RK4 over `steps` steps.
pub fn s1_monodromy(steps: usize) -> Result<Matrix2<f64>> {
    let dt = 2.0 * std::f64::consts::PI / steps as f64;
    let mut m = Matrix2::zeros();
    for col in 0..2 {
        let mut x0 = DVector::zeros(3);
        x0[col + 1] = 1.0;
        let end = integrate(&x0, dt, steps, s1_rhs)?;
        m[(0, col)] = end.last()[1];
        m[(1, col)] = end.last()[2];
    }
    Ok(m)
}

pub fn s1_periodic_solve() -> Result<PeriodicFamily> {
    let monodromy = s1_monodromy(4000)?;
    let eig = nalgebra::SymmetricEigen::new(monodromy);
    let mut ev = eig.eigenvalues;
    if ev[0] > ev[1] {
        ev.swap_rows(0, 1);
    }
    let unique = ev.iter().all(|l| (l - 1.0).abs() > 1e-6);
    // (M − I) x = 0 has only the trivial solution when unique
    let fixed = if unique {
        let lu = (monodromy - Matrix2::identity()).lu();
        lu.solve(&Vector2::zeros()).unwrap_or_else(Vector2::zeros)
    } else {
        return Err(Error::InvalidInput("monodromy has eigenvalue one".into()));
    };
    Ok(PeriodicFamily { monodromy, eigenvalues: ev, unique, mu_y: fixed[0], y: fixed[1] })
}

/// Closed-form monodromy `exp(2π [[0,1],[1,0]])`.
pub fn s1_monodromy_exact() -> Matrix2<f64> {
    let t = 2.0 * std::f64::consts::PI;
    Matrix2::new(t.cosh(), t.sinh(), t.sinh(), t.cosh())
}

/// Linear rhs helper used in tests and examples.
pub fn linear_rhs(a: DMatrix<f64>) -> impl Fn(&DVector<f64>) -> Result<DVector<f64>> {
    move |x| {
        check_dim(a.ncols(), x.len())?;
        Ok(&a * x)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::homogeneous::{AffineAction, SphereAction, TranslationAction};
    use crate::lie_core::{expm, StructureConstants};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn rv3(rng: &mut ChaCha8Rng) -> Vector3<f64> {
        Vector3::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0))
    }

    #[test]
    fn heavy_top_equilibrium() {
        let prm = HeavyTopParams::new(Matrix3::from_diagonal(&Vector3::new(1.0, 2.0, 3.0)), 1.0, Vector3::new(0.0, 0.6, 0.8)).unwrap();
        let st = OdeState::HeavyTop { mu: Vector3::zeros(), gamma: Vector3::new(0.0, 0.6, 0.8) };
        assert!(prm.rhs(&st.to_vector()).unwrap().amax() < 1e-15);
    }

    #[test]
    fn params_validation() {
        assert!(HeavyTopParams::new(Matrix3::new(1.0, 0.5, 0.0, 0.0, 1.0, 0.0, 0.0, 0.0, 1.0), 1.0, Vector3::z()).is_err());
        assert!(HeavyTopParams::new(-Matrix3::identity(), 1.0, Vector3::z()).is_err());
        assert!(HeavyTopParams::new(Matrix3::identity(), -1.0, Vector3::z()).is_err());
    }

    #[test]
    fn free_rigid_body_conserves_momentum_norm() {
        let prm = HeavyTopParams::new(Matrix3::from_diagonal(&Vector3::new(1.0, 2.0, 3.0)), 0.0, Vector3::z()).unwrap();
        let x0 = OdeState::HeavyTop { mu: Vector3::new(0.3, 1.0, -0.4), gamma: Vector3::z() }.to_vector();
        let tr = integrate(&x0, 1e-3, 10_000, |x| prm.rhs(x)).unwrap();
        let n0 = v3(&x0, 0).norm_squared();
        assert!((v3(tr.last(), 0).norm_squared() - n0).abs() < 1e-8);
    }

    #[test]
    fn heavy_top_rhs_matches_general_residual() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let prm = HeavyTopParams::new(Matrix3::new(2.0, 0.1, 0.0, 0.1, 1.5, 0.2, 0.0, 0.2, 1.0), 1.3, Vector3::new(0.2, 0.1, 0.9)).unwrap();
        let ctx = BracketContext::new(StructureConstants::so3(), Arc::new(SphereAction)).unwrap();
        let h = prm.hamiltonian_spec();
        for _ in 0..100 {
            let st = OdeState::HeavyTop { mu: rv3(&mut rng), gamma: rv3(&mut rng).normalize() };
            let d = prm.rhs(&st.to_vector()).unwrap();
            let (lp, par) = general_reduced_residual(&ctx, &h, &st.reduced_point().unwrap(), &[dv(&v3(&d, 0))], &[dv(&v3(&d, 3))]).unwrap();
            assert!(lp.amax() < 1e-12 && par[0].amax() < 1e-12);
        }
    }

    #[test]
    fn residual_sanity() {
        let ctx = BracketContext::new(StructureConstants::abelian(2, 1).unwrap(), Arc::new(TranslationAction::second_axis())).unwrap();
        let h = HamiltonianSpec::new(|p| 0.5 * p.mu[0].norm_squared());
        let p = ReducedPoint::new(vec![DVector::from_vec(vec![1.0, 0.0])], Configuration::Euclidean(DVector::zeros(1))).unwrap();
        let (lp, par) = general_reduced_residual(&ctx, &h, &p, &[DVector::zeros(2)], &[DVector::zeros(1)]).unwrap();
        assert!(lp.amax() < 1e-10 && par[0].amax() < 1e-10);

        let sctx = BracketContext::new(StructureConstants::so3(), Arc::new(SphereAction)).unwrap();
        let hp = HeavyTopParams::reference().hamiltonian_spec();
        let st = OdeState::HeavyTop { mu: Vector3::new(0.4, 0.1, -0.3), gamma: Vector3::new(0.6, 0.0, 0.8) }.reduced_point().unwrap();
        let (lp, par) = general_reduced_residual(&sctx, &hp, &st, &[DVector::zeros(3)], &[DVector::zeros(3)]).unwrap();
        assert!(lp.norm() + par[0].norm() > 1e-3);
    }

    #[test]
    fn heavy_top_trajectory_satisfies_residual_and_conservation() {
        let prm = HeavyTopParams::reference();
        let ctx = BracketContext::new(StructureConstants::so3(), Arc::new(SphereAction)).unwrap();
        let h = prm.hamiltonian_spec();
        let g0 = Vector3::new(0.3, 0.0, 1.0).normalize();
        let x0 = OdeState::HeavyTop { mu: Vector3::new(0.5, 0.8, -0.2), gamma: g0 }.to_vector();
        let tr = integrate(&x0, 1e-3, 10_000, |x| prm.rhs(x)).unwrap();
        let e0 = prm.energy(&v3(&x0, 0), &g0);
        let c0 = v3(&x0, 0).dot(&g0);
        let (mut de, mut dc, mut dn) = (0.0f64, 0.0f64, 0.0f64);
        for x in &tr.states {
            de = de.max(((prm.energy(&v3(x, 0), &v3(x, 3)) - e0) / e0).abs());
            dc = dc.max((v3(x, 0).dot(&v3(x, 3)) - c0).abs());
            dn = dn.max((v3(x, 3).norm_squared() - 1.0).abs());
        }
        assert!(de < 1e-6 && dc < 1e-6 && dn < 1e-6, "{de} {dc} {dn}");
        // residual with centred differences of the trajectory
        for k in (1..tr.states.len() - 1).step_by(997) {
            let d = (&tr.states[k + 1] - &tr.states[k - 1]) / (2.0 * tr.dt);
            let p = OdeState::HeavyTop { mu: v3(&tr.states[k], 0), gamma: v3(&tr.states[k], 3) }.reduced_point().unwrap();
            let (lp, par) = general_reduced_residual(&ctx, &h, &p, &[dv(&v3(&d, 0))], &[dv(&v3(&d, 3))]).unwrap();
            assert!(lp.amax() < 1e-5 && par[0].amax() < 1e-5);
        }
    }

    #[test]
    fn affine_rhs_matches_general_residual_and_decouples() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let prm = AffineParams::reference();
        let ctx = BracketContext::new(StructureConstants::affine_so3(), Arc::new(AffineAction)).unwrap();
        let h = prm.hamiltonian_spec();
        for _ in 0..100 {
            let st = OdeState::Affine { mu: rv3(&mut rng), omega: rv3(&mut rng), s_bar: rv3(&mut rng) };
            let d = prm.rhs(&st.to_vector()).unwrap();
            let dmu = DVector::from_iterator(6, d.iter().take(6).copied());
            let (lp, par) = general_reduced_residual(&ctx, &h, &st.reduced_point().unwrap(), &[dmu], &[dv(&v3(&d, 6))]).unwrap();
            assert!(lp.amax() < 1e-12 && par[0].amax() < 1e-12);
        }
        let free = AffineParams::with_gravity(Matrix3::from_diagonal(&Vector3::new(1.0, 2.0, 3.0)), Matrix3::identity(), 0.0).unwrap();
        let rb = HeavyTopParams::new(Matrix3::from_diagonal(&Vector3::new(1.0, 2.0, 3.0)), 0.0, Vector3::z()).unwrap();
        let mu = Vector3::new(0.2, -0.7, 0.4);
        let d = free.rhs(&OdeState::Affine { mu, omega: Vector3::zeros(), s_bar: Vector3::zeros() }.to_vector()).unwrap();
        let d_rb = rb.rhs(&OdeState::HeavyTop { mu, gamma: Vector3::z() }.to_vector()).unwrap();
        assert_eq!(v3(&d, 0), v3(&d_rb, 0));
        assert_eq!(v3(&d, 3), Vector3::zeros());
    }

    #[test]
    fn affine_term_isolation_without_rotation() {
        let prm = AffineParams::reference();
        let (omega, s) = (Vector3::new(0.3, 0.5, -1.0), Vector3::new(1.0, 2.0, 3.0));
        let d = prm.rhs(&OdeState::Affine { mu: Vector3::zeros(), omega, s_bar: s }.to_vector()).unwrap();
        assert_eq!(v3(&d, 3), -Vector3::new(0.0, 0.0, 1.0));
        assert_eq!(v3(&d, 6), omega);
    }

    #[test]
    fn affine_conserves_mu_bar_and_energy() {
        let prm = AffineParams::reference();
        let (mu, omega, s) = (Vector3::new(0.5, 0.8, -0.2), Vector3::new(0.1, -0.3, 0.2), Vector3::new(0.4, 0.0, -0.5));
        let x0 = OdeState::Affine { mu, omega, s_bar: s }.to_vector();
        let tr = integrate(&x0, 1e-3, 10_000, |x| prm.rhs(x)).unwrap();
        let nb0 = AffineParams::mu_bar(&mu, &omega, &s).norm();
        let e0 = prm.energy(&mu, &omega, &s);
        for x in &tr.states {
            assert!((AffineParams::mu_bar(&v3(x, 0), &v3(x, 3), &v3(x, 6)).norm() - nb0).abs() < 1e-8);
            assert!(((prm.energy(&v3(x, 0), &v3(x, 3), &v3(x, 6)) - e0) / e0).abs() < 1e-6);
        }
    }

    #[test]
    fn s1_examples() {
        assert_eq!(s1_rhs(&DVector::from_vec(vec![0.7, 0.0, 0.0])).unwrap(), DVector::zeros(3));
        assert_eq!(s1_rhs(&DVector::from_vec(vec![0.0, 1.0, 0.0])).unwrap(), DVector::from_vec(vec![0.0, 0.0, 1.0]));
        let ctx = BracketContext::new(StructureConstants::abelian(2, 1).unwrap(), Arc::new(TranslationAction::second_axis())).unwrap();
        let st = OdeState::S1 { mu_x: 0.3, mu_y: -0.4, y: 1.2 };
        let d = s1_rhs(&st.to_vector()).unwrap();
        let (lp, par) = general_reduced_residual(
            &ctx,
            &s1_hamiltonian_spec(),
            &st.reduced_point().unwrap(),
            &[DVector::from_vec(vec![d[0], d[1]])],
            &[DVector::from_element(1, d[2])],
        )
        .unwrap();
        assert!(lp.amax() < 1e-15 && par[0].amax() < 1e-15);
    }

    #[test]
    fn s1_periodic_family() {
        let fam = s1_periodic_solve().unwrap();
        let tp = 2.0 * std::f64::consts::PI;
        assert!(fam.unique);
        assert!(((fam.eigenvalues[0] - (-tp).exp()) / (-tp).exp()).abs() < 1e-6);
        assert!(((fam.eigenvalues[1] - tp.exp()) / tp.exp()).abs() < 1e-6);
        assert!(((fam.monodromy - s1_monodromy_exact()).amax() / tp.exp()) < 1e-8);
        assert_eq!((fam.mu_y, fam.y), (0.0, 0.0));
        assert_eq!(fam.member(2.5), OdeState::S1 { mu_x: 2.5, mu_y: 0.0, y: 0.0 });

        let dt = tp / 4000.0;
        let x0 = DVector::from_vec(vec![1.0, 0.01, -0.02]);
        let end = integrate(&x0, dt, 4000, s1_rhs).unwrap();
        assert!((end.last() - &x0).norm() > 0.1);
        let p0 = DVector::from_vec(vec![1.0, 0.0, 0.0]);
        assert_eq!(integrate(&p0, dt, 4000, s1_rhs).unwrap().last(), &p0);
    }

    #[test]
    fn rk4_examples() {
        let a = DMatrix::from_row_slice(2, 2, &[0.0, 1.0, -2.0, -0.1]);
        let x0 = DVector::from_vec(vec![1.0, 0.5]);
        let mut errs = Vec::new();
        for dt in [0.1, 0.05] {
            let one = rk4_step(&x0, dt, linear_rhs(a.clone())).unwrap();
            errs.push((one - expm(&(&a * dt)) * &x0).norm());
        }
        assert!((errs[0] / errs[1]).log2() > 4.7);
        let z = rk4_step(&x0, 0.3, |x| Ok(DVector::zeros(x.len()))).unwrap();
        assert_eq!(z, x0);
        assert!(rk4_step(&x0, 0.0, linear_rhs(a.clone())).is_err());
        assert!(matches!(rk4_step(&x0, 0.1, |_| Ok(DVector::from_element(2, f64::NAN))), Err(Error::NonFinite(_))));
    }

    #[test]
    fn rk4_energy_error_is_fourth_order() {
        let prm = HeavyTopParams::reference();
        let x0 = OdeState::HeavyTop { mu: Vector3::new(0.5, 0.8, -0.2), gamma: Vector3::new(0.3, 0.0, 1.0).normalize() }.to_vector();
        let e0 = prm.energy(&v3(&x0, 0), &v3(&x0, 3));
        let errs: Vec<f64> = [1e-2, 5e-3, 2.5e-3]
            .iter()
            .map(|&dt| {
                let tr = integrate(&x0, dt, (2.0 / dt).round() as usize, |x| prm.rhs(x)).unwrap();
                (prm.energy(&v3(tr.last(), 0), &v3(tr.last(), 3)) - e0).abs()
            })
            .collect();
        for w in errs.windows(2) {
            let order = (w[0] / w[1]).log2();
            assert!(order > 3.5 && order < 5.5, "{errs:?}");
        }
    }
}
