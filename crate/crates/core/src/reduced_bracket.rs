//! Reduced covariant bracket on `J¹P*/K`-type phase spaces of trivial bundles.
//!
//! A reduced point is a family of momenta `μ^i ∈ 𝔤*` (one per base direction)
//! together with a configuration `s̄ ∈ P/K`. Observables are linear forms
//! `f^i = ⟨μ^i, ξ⟩ + ω(s̄)` with constant `ξ`. The bracket is
//!
//! ```text
//! {f, h} = Σ_i [ σ⟨μ^i, [ξ, a_i]⟩ + ⟨dω, P(a_i)⟩ ] − ⟨c, P(ξ)⟩
//! ```
//!
//! with `a_i = δh/δμ^i`, `c = δh/δs̄` and `σ = LP_SIGN`. The configuration
//! pairing `⟨c, P(ξ)⟩` enters once, not once per direction.

use std::fmt;
use std::sync::Arc;

use nalgebra::{DMatrix, DVector, Vector3};
use rand::Rng;

use crate::error::{check_dim, Error, Result};
use crate::homogeneous::{AffineConfig, ConfigAction, Configuration, SpherePoint};
use crate::lie_core::{exp_so3, AlgebraVector, CoalgebraVector, MatrixAlgebra, So3, StructureConstants};

/// Sign in front of the Lie–Poisson term. Fixed by agreement with the
/// unreduced canonical bracket in right-trivialised momenta.
pub const LP_SIGN: f64 = 1.0;

/// Default central-difference step for functional derivatives.
pub const DEFAULT_FD_STEP: f64 = 1e-5;

/// Step used by the unreduced finite-difference oracle.
pub const ORACLE_STEP: f64 = 1e-4;

/// Largest chart coordinate accepted by [`local_bracket_sc`].
pub const CHART_RADIUS: f64 = std::f64::consts::FRAC_PI_2;

pub type ScalarFn = Arc<dyn Fn(&ReducedPoint) -> f64 + Send + Sync>;
pub type MomentumGradFn = Arc<dyn Fn(&ReducedPoint) -> Vec<AlgebraVector> + Send + Sync>;
pub type ConfigGradFn = Arc<dyn Fn(&ReducedPoint) -> DVector<f64> + Send + Sync>;
pub type ConfigFn = Arc<dyn Fn(&Configuration) -> f64 + Send + Sync>;

/// `(μ^1..μ^n, s̄)`.
#[derive(Debug, Clone, PartialEq)]
pub struct ReducedPoint {
    pub mu: Vec<CoalgebraVector>,
    pub s_bar: Configuration,
}

impl ReducedPoint {
    pub fn new(mu: Vec<CoalgebraVector>, s_bar: Configuration) -> Result<Self> {
        let first = mu.first().ok_or_else(|| Error::InvalidInput("no momentum directions".into()))?;
        let d = first.len();
        for m in &mu {
            check_dim(d, m.len())?;
            if m.iter().any(|x| !x.is_finite()) {
                return Err(Error::NonFinite("momentum".into()));
            }
        }
        Ok(Self { mu, s_bar })
    }

    /// Base dimension `n`.
    pub fn n(&self) -> usize {
        self.mu.len()
    }

    pub fn algebra_dim(&self) -> usize {
        self.mu[0].len()
    }
}

/// A reduced Hamiltonian density with optional analytic derivatives.
#[derive(Clone)]
pub struct HamiltonianSpec {
    pub eval: ScalarFn,
    pub d_mu: Option<MomentumGradFn>,
    pub d_s: Option<ConfigGradFn>,
    pub fd_step: f64,
}

impl fmt::Debug for HamiltonianSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("HamiltonianSpec")
            .field("d_mu", &self.d_mu.is_some())
            .field("d_s", &self.d_s.is_some())
            .field("fd_step", &self.fd_step)
            .finish()
    }
}

impl HamiltonianSpec {
    pub fn new(eval: impl Fn(&ReducedPoint) -> f64 + Send + Sync + 'static) -> Self {
        Self { eval: Arc::new(eval), d_mu: None, d_s: None, fd_step: DEFAULT_FD_STEP }
    }

    pub fn with_d_mu(mut self, d: impl Fn(&ReducedPoint) -> Vec<AlgebraVector> + Send + Sync + 'static) -> Self {
        self.d_mu = Some(Arc::new(d));
        self
    }

    pub fn with_d_s(mut self, d: impl Fn(&ReducedPoint) -> DVector<f64> + Send + Sync + 'static) -> Self {
        self.d_s = Some(Arc::new(d));
        self
    }

    pub fn with_fd_step(mut self, step: f64) -> Self {
        self.fd_step = step;
        self
    }

    /// Copy with the analytic derivatives removed.
    pub fn fd_only(&self) -> Self {
        Self { eval: self.eval.clone(), d_mu: None, d_s: None, fd_step: self.fd_step }
    }

    pub fn value(&self, p: &ReducedPoint) -> Result<f64> {
        let v = (self.eval)(p);
        if v.is_finite() {
            Ok(v)
        } else {
            Err(Error::NonFinite("Hamiltonian".into()))
        }
    }

    /// Largest relative mismatch between the analytic derivatives and
    /// central differences at `p`; zero when none are supplied.
    pub fn self_test(&self, p: &ReducedPoint) -> Result<f64> {
        let fd = self.fd_only();
        let mut worst: f64 = 0.0;
        if self.d_mu.is_some() {
            let (a, b) = (fiber_derivative(self, p)?, fiber_derivative(&fd, p)?);
            for (x, y) in a.iter().zip(&b) {
                worst = worst.max(rel_err_vec(x, y));
            }
        }
        if self.d_s.is_some() {
            worst = worst.max(rel_err_vec(&vertical_derivative(self, p)?, &vertical_derivative(&fd, p)?));
        }
        Ok(worst)
    }
}

/// `|a − b| / max(|a|, |b|, 1)`.
pub fn rel_err(a: f64, b: f64) -> f64 {
    (a - b).abs() / a.abs().max(b.abs()).max(1.0)
}

fn rel_err_vec(a: &DVector<f64>, b: &DVector<f64>) -> f64 {
    (a - b).amax() / a.amax().max(b.amax()).max(1.0)
}

/// An observable `f^i = ⟨μ^i, ξ⟩ + ω(s̄)`.
#[derive(Clone)]
pub struct LinearForm {
    pub xi: AlgebraVector,
    pub omega: Option<ConfigFn>,
}

impl fmt::Debug for LinearForm {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("LinearForm").field("xi", &self.xi).field("omega", &self.omega.is_some()).finish()
    }
}

impl LinearForm {
    pub fn momentum(xi: AlgebraVector) -> Self {
        Self { xi, omega: None }
    }

    pub fn with_omega(mut self, omega: impl Fn(&Configuration) -> f64 + Send + Sync + 'static) -> Self {
        self.omega = Some(Arc::new(omega));
        self
    }

    /// Value in direction `i`.
    pub fn eval(&self, p: &ReducedPoint, i: usize) -> f64 {
        p.mu[i].dot(&self.xi) + self.omega.as_ref().map_or(0.0, |w| w(&p.s_bar))
    }
}

/// Algebra plus its action on the reduced configuration space.
#[derive(Clone)]
pub struct BracketContext {
    pub constants: StructureConstants,
    pub action: Arc<dyn ConfigAction>,
}

impl fmt::Debug for BracketContext {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("BracketContext").field("dim_g", &self.constants.dim_g()).field("action", &self.action.name()).finish()
    }
}

impl BracketContext {
    pub fn new(constants: StructureConstants, action: Arc<dyn ConfigAction>) -> Result<Self> {
        check_dim(constants.dim_g(), action.algebra_dim())?;
        Ok(Self { constants, action })
    }
}

/// `δh/δμ^i` for every direction.
pub fn fiber_derivative(h: &HamiltonianSpec, p: &ReducedPoint) -> Result<Vec<AlgebraVector>> {
    if let Some(d) = &h.d_mu {
        let out = d(p);
        check_dim(p.n(), out.len())?;
        for v in &out {
            check_dim(p.algebra_dim(), v.len())?;
        }
        return Ok(out);
    }
    let step = h.fd_step;
    let mut out = Vec::with_capacity(p.n());
    let mut q = p.clone();
    for i in 0..p.n() {
        let mut g = DVector::zeros(p.algebra_dim());
        for k in 0..p.algebra_dim() {
            let orig = q.mu[i][k];
            q.mu[i][k] = orig + step;
            let fp = h.value(&q)?;
            q.mu[i][k] = orig - step;
            let fm = h.value(&q)?;
            q.mu[i][k] = orig;
            g[k] = (fp - fm) / (2.0 * step);
        }
        out.push(g);
    }
    Ok(out)
}

/// Gradient of a function on `P/K` in ambient coordinates. On S² the result
/// is tangential; elsewhere it is the plain gradient.
pub fn config_gradient(f: impl Fn(&Configuration) -> Result<f64>, s: &Configuration, step: f64) -> Result<DVector<f64>> {
    match s {
        Configuration::Sphere(p) => {
            // derivatives along exp(ε e_k)·Γ give w = Γ × c; then c_tan = w × Γ
            let mut w = Vector3::zeros();
            for k in 0..3 {
                let e = Vector3::ith(k, step);
                let fp = f(&Configuration::Sphere(SpherePoint::from_drifted(exp_so3(&e).act(p.gamma()))))?;
                let fm = f(&Configuration::Sphere(SpherePoint::from_drifted(exp_so3(&-e).act(p.gamma()))))?;
                w[k] = (fp - fm) / (2.0 * step);
            }
            let g = p.gamma() / p.gamma().norm_squared();
            Ok(DVector::from_column_slice(w.cross(&g).as_slice()))
        }
        _ => {
            let x = s.coords();
            let mut out = DVector::zeros(x.len());
            for k in 0..x.len() {
                let mut xp = x.clone();
                xp[k] += step;
                let mut xm = x.clone();
                xm[k] -= step;
                out[k] = (f(&s.with_coords(&xp))? - f(&s.with_coords(&xm))?) / (2.0 * step);
            }
            Ok(out)
        }
    }
}

/// `δh/δs̄` as an ambient covector (tangential on S²).
pub fn vertical_derivative(h: &HamiltonianSpec, p: &ReducedPoint) -> Result<DVector<f64>> {
    if let Some(d) = &h.d_s {
        let c = d(p);
        check_dim(p.s_bar.coords().len(), c.len())?;
        return Ok(match &p.s_bar {
            Configuration::Sphere(sp) => {
                let t = sp.tangential(&Vector3::new(c[0], c[1], c[2]));
                DVector::from_column_slice(t.as_slice())
            }
            _ => c,
        });
    }
    let mu = p.mu.clone();
    config_gradient(
        |s| h.value(&ReducedPoint { mu: mu.clone(), s_bar: s.clone() }),
        &p.s_bar,
        h.fd_step,
    )
}

/// `σ⟨μ^i, [ξ, δh/δμ^i]⟩` per direction.
pub fn lp_bracket(ctx: &BracketContext, f: &LinearForm, h: &HamiltonianSpec, p: &ReducedPoint) -> Result<Vec<f64>> {
    check_dim(ctx.constants.dim_g(), f.xi.len())?;
    check_dim(ctx.constants.dim_g(), p.algebra_dim())?;
    let a = fiber_derivative(h, p)?;
    p.mu.iter()
        .zip(&a)
        .map(|(mu, ai)| Ok(LP_SIGN * mu.dot(&ctx.constants.bracket(&f.xi, ai)?)))
        .collect()
}

/// The two configuration pairings of the bracket.
#[derive(Debug, Clone, PartialEq)]
pub struct EBracket {
    /// `⟨dω, P(δh/δμ^i)⟩` per direction.
    pub momentum: Vec<f64>,
    /// `⟨δh/δs̄, P(ξ)⟩`, entering with a minus sign.
    pub configuration: f64,
}

impl EBracket {
    pub fn total(&self) -> f64 {
        self.momentum.iter().sum::<f64>() - self.configuration
    }
}

pub fn e_bracket(ctx: &BracketContext, f: &LinearForm, h: &HamiltonianSpec, p: &ReducedPoint) -> Result<EBracket> {
    // resolve the action first so a missing registration is reported even for trivial forms
    let p_xi = ctx.action.generator(&p.s_bar, &f.xi)?;
    let a = fiber_derivative(h, p)?;
    let momentum = match &f.omega {
        None => vec![0.0; p.n()],
        Some(w) => {
            let dw = config_gradient(|s| Ok(w(s)), &p.s_bar, h.fd_step)?;
            a.iter().map(|ai| Ok(dw.dot(&ctx.action.generator(&p.s_bar, ai)?))).collect::<Result<_>>()?
        }
    };
    let c = vertical_derivative(h, p)?;
    Ok(EBracket { momentum, configuration: c.dot(&p_xi) })
}

/// Both parts of `{f, h}`.
#[derive(Debug, Clone, PartialEq)]
pub struct ReducedBracket {
    pub lp: Vec<f64>,
    pub e: EBracket,
}

impl ReducedBracket {
    pub fn total(&self) -> f64 {
        self.lp.iter().sum::<f64>() + self.e.total()
    }
}

pub fn reduced_bracket(ctx: &BracketContext, f: &LinearForm, h: &HamiltonianSpec, p: &ReducedPoint) -> Result<ReducedBracket> {
    Ok(ReducedBracket { lp: lp_bracket(ctx, f, h, p)?, e: e_bracket(ctx, f, h, p)? })
}

/// Coordinates of a reduced point in a local trivialisation, in a basis whose
/// first `dim_k` vectors span 𝔨 and whose remaining vectors index `y^A`.
#[derive(Debug, Clone, PartialEq)]
pub struct LocalCoords {
    pub y: DVector<f64>,
    pub mu: Vec<DVector<f64>>,
    pub xi: DVector<f64>,
    pub dh_dmu: Vec<DVector<f64>>,
    pub dh_dy: DVector<f64>,
    pub domega_dy: DVector<f64>,
}

/// The bracket in local coordinates, summed group by group over the index
/// types (𝔨 or 𝔪) of `c^M_{JL} μ_M ξ^J a^L`, plus the two `y`-derivative terms.
pub fn local_bracket_sc(c: &StructureConstants, x: &LocalCoords) -> Result<f64> {
    let (d, dk) = (c.dim_g(), c.dim_k());
    let dm = d - dk;
    if x.y.amax() >= CHART_RADIUS || x.y.iter().any(|v| !v.is_finite()) {
        return Err(Error::ChartOutOfRange(format!("|y| = {:.3e}", x.y.amax())));
    }
    check_dim(dm, x.y.len())?;
    check_dim(d, x.xi.len())?;
    check_dim(x.mu.len(), x.dh_dmu.len())?;
    check_dim(dm, x.dh_dy.len())?;
    check_dim(dm, x.domega_dy.len())?;
    let k_range = 0..dk;
    let m_range = dk..d;
    let ranges = [k_range, m_range];
    let mut total = 0.0;
    for (mu, a) in x.mu.iter().zip(&x.dh_dmu) {
        check_dim(d, mu.len())?;
        check_dim(d, a.len())?;
        for rj in &ranges {
            for rl in &ranges {
                for rm in &ranges {
                    let mut group = 0.0;
                    for jj in rj.clone() {
                        for ll in rl.clone() {
                            for mm in rm.clone() {
                                group += c.get(mm, jj, ll) * mu[mm] * x.xi[jj] * a[ll];
                            }
                        }
                    }
                    total += LP_SIGN * group;
                }
            }
        }
        for aa in 0..dm {
            total += x.domega_dy[aa] * a[dk + aa];
        }
    }
    for aa in 0..dm {
        total -= x.xi[dk + aa] * x.dh_dy[aa];
    }
    Ok(total)
}

/// Rotation taking `e3` to `gamma` about `e3 × gamma`.
pub fn frame_for(gamma: &Vector3<f64>) -> So3 {
    let g = gamma.normalize();
    let axis = Vector3::z().cross(&g);
    let s = axis.norm();
    let angle = s.atan2(g.z);
    if s < 1e-12 {
        if g.z > 0.0 {
            So3::identity()
        } else {
            exp_so3(&(Vector3::x() * std::f64::consts::PI))
        }
    } else {
        exp_so3(&(axis / s * angle))
    }
}

/// Split-basis order used for S² charts: 𝔨 = span(e3) first, then e1, e2.
const SPLIT: [usize; 3] = [2, 0, 1];

/// Local coordinates of a point of `so(3)* × S²` in the chart
/// `y ↦ R0·exp(y¹e1 + y²e2)·e3` with `R0·e3 = Γ` and momenta in the frame `R0`.
pub fn sphere_local_coords(f: &LinearForm, h: &HamiltonianSpec, p: &ReducedPoint) -> Result<LocalCoords> {
    let gamma = match &p.s_bar {
        Configuration::Sphere(g) => *g.gamma(),
        other => return Err(Error::MissingAction(other.kind())),
    };
    let r0 = frame_for(&gamma);
    let rt = r0.inverse();
    let to_chart = |v: &DVector<f64>| -> Result<DVector<f64>> {
        check_dim(3, v.len())?;
        let w = rt.act(&Vector3::new(v[0], v[1], v[2]));
        Ok(DVector::from_iterator(3, SPLIT.iter().map(|&k| w[k])))
    };
    let a = fiber_derivative(h, p)?;
    let point_at = |y: &Vector3<f64>| -> Configuration {
        let q = r0.compose(&exp_so3(y));
        Configuration::Sphere(SpherePoint::from_drifted(q.act(&Vector3::z())))
    };
    let step = h.fd_step;
    let mut dh_dy = DVector::zeros(2);
    let mut domega_dy = DVector::zeros(2);
    for (slot, axis) in [0usize, 1].into_iter().enumerate() {
        let e = Vector3::ith(axis, step);
        let plus = ReducedPoint { mu: p.mu.clone(), s_bar: point_at(&e) };
        let minus = ReducedPoint { mu: p.mu.clone(), s_bar: point_at(&-e) };
        dh_dy[slot] = (h.value(&plus)? - h.value(&minus)?) / (2.0 * step);
        if let Some(w) = &f.omega {
            domega_dy[slot] = (w(&plus.s_bar) - w(&minus.s_bar)) / (2.0 * step);
        }
    }
    Ok(LocalCoords {
        y: DVector::zeros(2),
        mu: p.mu.iter().map(&to_chart).collect::<Result<_>>()?,
        xi: to_chart(&f.xi)?,
        dh_dmu: a.iter().map(&to_chart).collect::<Result<_>>()?,
        dh_dy,
        domega_dy,
    })
}

/// Maps a group element to its class in `P/K`.
pub type SectionFn = fn(&DMatrix<f64>) -> Result<Configuration>;

/// A matrix group with the projection `G → G/K` used by [`psi_project`].
#[derive(Debug, Clone)]
pub struct ChartModel {
    pub algebra: MatrixAlgebra,
    pub section: SectionFn,
}

fn sphere_section(g: &DMatrix<f64>) -> Result<Configuration> {
    let m = nalgebra::Matrix3::from_fn(|i, j| g[(i, j)]);
    let r = So3::from_matrix(m)?;
    Ok(Configuration::Sphere(SpherePoint::new(r.act(&Vector3::z()))?))
}

fn affine_section(g: &DMatrix<f64>) -> Result<Configuration> {
    let m = nalgebra::Matrix4::from_fn(|i, j| g[(i, j)]);
    let e = crate::lie_core::AffineElement::from_matrix(&m)?;
    Ok(Configuration::Affine(AffineConfig::new(e.v)?))
}

fn plane_section(g: &DMatrix<f64>) -> Result<Configuration> {
    check_dim(3, g.nrows())?;
    let id = DMatrix::<f64>::identity(3, 3);
    let mut off = g - &id;
    off[(0, 2)] = 0.0;
    off[(1, 2)] = 0.0;
    if off.amax() > 1e-12 {
        return Err(Error::InvalidGroupElement("not a plane translation".into()));
    }
    Ok(Configuration::Euclidean(DVector::from_element(1, g[(1, 2)])))
}

impl ChartModel {
    /// SO(3) with `Γ = R e3`.
    pub fn heavy_top() -> Self {
        Self { algebra: MatrixAlgebra::so3(), section: sphere_section }
    }

    /// SO(3)⋉ℝ³ with `s̄` the translation part.
    pub fn affine() -> Self {
        Self { algebra: MatrixAlgebra::affine_so3(), section: affine_section }
    }

    /// ℝ² with `s̄ = y`.
    pub fn plane() -> Self {
        Self { algebra: MatrixAlgebra::abelian_plane(), section: plane_section }
    }

    /// Random group element `exp(z)` with `|z_k| ≤ scale`.
    pub fn random_element(&self, rng: &mut impl Rng, scale: f64) -> Result<DMatrix<f64>> {
        let z = DVector::from_fn(self.algebra.dim(), |_, _| rng.gen_range(-scale..scale));
        self.algebra.exp(&z)
    }
}

/// A point of the unreduced phase space: `g` and momenta `π^i`.
#[derive(Debug, Clone, PartialEq)]
pub struct UnreducedPoint {
    pub group: DMatrix<f64>,
    pub pi: Vec<CoalgebraVector>,
}

/// `Ad_g^{-T}`, the coadjoint transport of momenta by `g`.
fn coadjoint_transport(alg: &MatrixAlgebra, g: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    let inv = g.clone().try_inverse().ok_or_else(|| Error::InvalidGroupElement("singular".into()))?;
    Ok(alg.adjoint_matrix(&inv)?.transpose())
}

/// `Ψ(g, π) = (Ad_g^{-T} π^i, [g]_K)`.
pub fn psi_project(model: &ChartModel, u: &UnreducedPoint) -> Result<ReducedPoint> {
    let s_bar = (model.section)(&u.group)?;
    let t = coadjoint_transport(&model.algebra, &u.group)?;
    let mu = u.pi.iter().map(|p| {
        check_dim(model.algebra.dim(), p.len())?;
        Ok(&t * p)
    });
    ReducedPoint::new(mu.collect::<Result<_>>()?, s_bar)
}

/// Outcome of [`bracket_equivalence_check`].
#[derive(Debug, Clone, PartialEq)]
pub struct EquivalenceReport {
    pub max_rel_err: f64,
    pub samples: usize,
    pub skipped: usize,
    pub lp_sign: f64,
}

/// Unreduced bracket `{F, H}` at `u` by central differences in the canonical
/// chart `(z, π) ↦ (g·exp(z), π)` centred at `u`, for `H = h∘Ψ`, `F = f∘Ψ`.
pub fn unreduced_bracket_fd(
    model: &ChartModel,
    f: &LinearForm,
    h: &HamiltonianSpec,
    u: &UnreducedPoint,
    step: f64,
) -> Result<f64> {
    let alg = &model.algebra;
    let d = alg.dim();
    let t0 = coadjoint_transport(alg, &u.group)?;
    let chart = |z: &DVector<f64>, pi: &[DVector<f64>]| -> Result<ReducedPoint> {
        let g = &u.group * alg.exp(z)?;
        let w = alg.constants().right_dexp(z)?;
        let wt_inv = w.transpose().try_inverse().ok_or_else(|| Error::ChartOutOfRange("dexp singular".into()))?;
        let m = &t0 * wt_inv;
        ReducedPoint::new(pi.iter().map(|p| &m * p).collect(), (model.section)(&g)?)
    };
    let z0 = DVector::zeros(d);
    let big_h = |z: &DVector<f64>, pi: &[DVector<f64>]| h.value(&chart(z, pi)?);
    let big_f = |z: &DVector<f64>, pi: &[DVector<f64>], i: usize| -> Result<f64> { Ok(f.eval(&chart(z, pi)?, i)) };
    let n = u.pi.len();
    let mut total = 0.0;
    for a in 0..d {
        let mut zp = z0.clone();
        zp[a] = step;
        let mut zm = z0.clone();
        zm[a] = -step;
        let dh_dz = (big_h(&zp, &u.pi)? - big_h(&zm, &u.pi)?) / (2.0 * step);
        for i in 0..n {
            let df_dz = (big_f(&zp, &u.pi, i)? - big_f(&zm, &u.pi, i)?) / (2.0 * step);
            let mut pp = u.pi.clone();
            pp[i][a] += step;
            let mut pm = u.pi.clone();
            pm[i][a] -= step;
            let dh_dpi = (big_h(&z0, &pp)? - big_h(&z0, &pm)?) / (2.0 * step);
            total += df_dz * dh_dpi;
            if i == 0 {
                let df_dpi = (big_f(&z0, &pp, 0)? - big_f(&z0, &pm, 0)?) / (2.0 * step);
                total -= df_dpi * dh_dz;
            }
        }
    }
    Ok(total)
}

/// Compares the reduced bracket with the unreduced oracle at random points.
/// `sampler` draws `(u, f)`; samples whose chart evaluation fails are skipped.
pub fn bracket_equivalence_check(
    model: &ChartModel,
    ctx: &BracketContext,
    h: &HamiltonianSpec,
    samples: usize,
    mut sampler: impl FnMut() -> Result<(UnreducedPoint, LinearForm)>,
) -> Result<EquivalenceReport> {
    let mut report = EquivalenceReport { max_rel_err: 0.0, samples: 0, skipped: 0, lp_sign: LP_SIGN };
    for _ in 0..samples {
        let (u, f) = sampler()?;
        let p = psi_project(model, &u)?;
        let oracle = match unreduced_bracket_fd(model, &f, h, &u, ORACLE_STEP) {
            Ok(v) => v,
            Err(Error::ChartOutOfRange(_)) | Err(Error::InvalidGroupElement(_)) => {
                report.skipped += 1;
                continue;
            }
            Err(e) => return Err(e),
        };
        let reduced = reduced_bracket(ctx, &f, h, &p)?.total();
        report.max_rel_err = report.max_rel_err.max(rel_err(reduced, oracle));
        report.samples += 1;
    }
    Ok(report)
}
