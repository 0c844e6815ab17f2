//! Infinitesimal actions on the reduced configuration space `P/K` and their
//! duals.
//!
//! `P_s̄(η)` is the generator of the left 𝔤-action on `P/K` at `s̄` and
//! `P⁺_s̄` its adjoint: `⟨P⁺_s̄(Υ), η⟩ = ⟨Υ, P_s̄(η)⟩`. Cotangent vectors are
//! stored in ambient coordinates; on S² the radial component is irrelevant
//! and is projected out.

use nalgebra::{DMatrix, DVector, Vector3};

use crate::error::{check_dim, Error, Result};
use crate::lie_core::{exp_so3, AffineAlgebraVector, AlgebraVector, CoalgebraVector};

/// Allowed deviation of `‖Γ‖` from one.
pub const SPHERE_TOL: f64 = 1e-9;

/// A point `Γ ∈ S² = SO(3)/SO(2)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SpherePoint(Vector3<f64>);

impl SpherePoint {
    pub fn new(gamma: Vector3<f64>) -> Result<Self> {
        let n = gamma.norm();
        if !n.is_finite() || (n - 1.0).abs() > SPHERE_TOL {
            return Err(Error::InvalidInput(format!("sphere point has norm {n}")));
        }
        Ok(Self(gamma))
    }

    /// Accepts an integrated point whose norm has drifted; the drift is a
    /// diagnostic and is not corrected.
    pub fn from_drifted(gamma: Vector3<f64>) -> Self {
        Self(gamma)
    }

    pub fn e3() -> Self {
        Self(Vector3::z())
    }

    pub fn gamma(&self) -> &Vector3<f64> {
        &self.0
    }

    /// Removes the radial component of an ambient covector.
    pub fn tangential(&self, v: &Vector3<f64>) -> Vector3<f64> {
        let g = self.0 / self.0.norm();
        v - g * g.dot(v)
    }
}

/// Section value `s̄` of the associated vector bundle `E = ℝ³`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AffineConfig {
    pub s_bar: Vector3<f64>,
}

impl AffineConfig {
    pub fn new(s_bar: Vector3<f64>) -> Result<Self> {
        if s_bar.iter().any(|x| !x.is_finite()) {
            return Err(Error::NonFinite("affine configuration".into()));
        }
        Ok(Self { s_bar })
    }
}

/// Reduced configuration `s̄ ∈ P/K`.
#[derive(Debug, Clone, PartialEq)]
pub enum Configuration {
    Sphere(SpherePoint),
    Affine(AffineConfig),
    /// Flat fibre `ℝᵐ` on which the algebra acts by translations.
    Euclidean(DVector<f64>),
}

impl Configuration {
    pub fn kind(&self) -> &'static str {
        match self {
            Configuration::Sphere(_) => "sphere",
            Configuration::Affine(_) => "affine",
            Configuration::Euclidean(_) => "euclidean",
        }
    }

    /// Ambient coordinates.
    pub fn coords(&self) -> DVector<f64> {
        match self {
            Configuration::Sphere(p) => DVector::from_column_slice(p.gamma().as_slice()),
            Configuration::Affine(a) => DVector::from_column_slice(a.s_bar.as_slice()),
            Configuration::Euclidean(v) => v.clone(),
        }
    }

    /// Same kind of configuration with new ambient coordinates (no validation).
    pub fn with_coords(&self, c: &DVector<f64>) -> Configuration {
        match self {
            Configuration::Sphere(_) => Configuration::Sphere(SpherePoint::from_drifted(Vector3::new(c[0], c[1], c[2]))),
            Configuration::Affine(_) => Configuration::Affine(AffineConfig { s_bar: Vector3::new(c[0], c[1], c[2]) }),
            Configuration::Euclidean(_) => Configuration::Euclidean(c.clone()),
        }
    }
}

/// Infinitesimal generator on S²: `η × Γ`.
pub fn sphere_action(eta: &Vector3<f64>, p: &SpherePoint) -> Vector3<f64> {
    eta.cross(p.gamma())
}

/// `P⁺_Γ(Υ) = Γ × Υ` after removing the normal component of `Υ`.
pub fn sphere_p_plus(p: &SpherePoint, upsilon: &Vector3<f64>) -> Vector3<f64> {
    p.gamma().cross(&p.tangential(upsilon))
}

/// `P_s̄(η, ξ) = η × s̄ + ξ`.
pub fn affine_p(s: &AffineConfig, a: &AffineAlgebraVector) -> Vector3<f64> {
    a.b.cross(&s.s_bar) + a.v
}

/// `P⁺_s̄(ω) = (s̄ × ω, ω)`; the first slot realises `ω ⊗ s̄` in so(3)*.
pub fn affine_p_plus(s: &AffineConfig, omega: &Vector3<f64>) -> (Vector3<f64>, Vector3<f64>) {
    (s.s_bar.cross(omega), *omega)
}

/// A left action of an algebra on a reduced configuration space.
pub trait ConfigAction: Send + Sync {
    fn name(&self) -> &'static str;

    fn algebra_dim(&self) -> usize;

    /// `P_s̄(η)` in ambient coordinates.
    fn generator(&self, s: &Configuration, eta: &AlgebraVector) -> Result<DVector<f64>>;

    /// `P⁺_s̄(Υ)` for an ambient covector `Υ`.
    fn dual(&self, s: &Configuration, upsilon: &DVector<f64>) -> Result<CoalgebraVector>;

    /// `exp(ε η)·s̄`.
    fn flow(&self, s: &Configuration, eta: &AlgebraVector, eps: f64) -> Result<Configuration>;
}

fn as_vec3(v: &DVector<f64>) -> Result<Vector3<f64>> {
    check_dim(3, v.len())?;
    Ok(Vector3::new(v[0], v[1], v[2]))
}

fn dv(v: &Vector3<f64>) -> DVector<f64> {
    DVector::from_column_slice(v.as_slice())
}

/// so(3) (standard basis) acting on S².
#[derive(Debug, Clone, Copy, Default)]
pub struct SphereAction;

impl SphereAction {
    fn point(s: &Configuration) -> Result<&SpherePoint> {
        match s {
            Configuration::Sphere(p) => Ok(p),
            other => Err(Error::MissingAction(other.kind())),
        }
    }
}

impl ConfigAction for SphereAction {
    fn name(&self) -> &'static str {
        "so3 on S2"
    }

    fn algebra_dim(&self) -> usize {
        3
    }

    fn generator(&self, s: &Configuration, eta: &AlgebraVector) -> Result<DVector<f64>> {
        Ok(dv(&sphere_action(&as_vec3(eta)?, Self::point(s)?)))
    }

    fn dual(&self, s: &Configuration, upsilon: &DVector<f64>) -> Result<CoalgebraVector> {
        Ok(dv(&sphere_p_plus(Self::point(s)?, &as_vec3(upsilon)?)))
    }

    fn flow(&self, s: &Configuration, eta: &AlgebraVector, eps: f64) -> Result<Configuration> {
        let p = Self::point(s)?;
        let r = exp_so3(&(as_vec3(eta)? * eps));
        Ok(Configuration::Sphere(SpherePoint::from_drifted(r.act(p.gamma()))))
    }
}

/// so(3)⋉ℝ³ acting on ℝ³ by `(R, v)·u = R u + v`.
#[derive(Debug, Clone, Copy, Default)]
pub struct AffineAction;

impl AffineAction {
    fn point(s: &Configuration) -> Result<&AffineConfig> {
        match s {
            Configuration::Affine(a) => Ok(a),
            other => Err(Error::MissingAction(other.kind())),
        }
    }
}

impl ConfigAction for AffineAction {
    fn name(&self) -> &'static str {
        "affine so3 on R3"
    }

    fn algebra_dim(&self) -> usize {
        6
    }

    fn generator(&self, s: &Configuration, eta: &AlgebraVector) -> Result<DVector<f64>> {
        Ok(dv(&affine_p(Self::point(s)?, &AffineAlgebraVector::from_coeffs(eta)?)))
    }

    fn dual(&self, s: &Configuration, upsilon: &DVector<f64>) -> Result<CoalgebraVector> {
        let (b, v) = affine_p_plus(Self::point(s)?, &as_vec3(upsilon)?);
        Ok(AffineAlgebraVector::new(b, v).to_coeffs())
    }

    fn flow(&self, s: &Configuration, eta: &AlgebraVector, eps: f64) -> Result<Configuration> {
        let p = Self::point(s)?;
        let a = AffineAlgebraVector::from_coeffs(eta)?;
        // exp(ε(B, v))·u solved in closed form through the 4×4 representation
        let alg = crate::lie_core::MatrixAlgebra::affine_so3();
        let g = alg.exp(&(a.to_coeffs() * eps))?;
        let u = nalgebra::DVector::from_vec(vec![p.s_bar.x, p.s_bar.y, p.s_bar.z, 1.0]);
        let moved = g * u;
        Ok(Configuration::Affine(AffineConfig { s_bar: Vector3::new(moved[0], moved[1], moved[2]) }))
    }
}

/// An abelian algebra acting on `ℝᵐ` by translations `s̄ ↦ s̄ + S η`.
#[derive(Debug, Clone)]
pub struct TranslationAction {
    selector: DMatrix<f64>,
}

impl TranslationAction {
    pub fn new(selector: DMatrix<f64>) -> Self {
        Self { selector }
    }

    /// ℝ² acting on the `y` coordinate only, as in the S¹ example.
    pub fn second_axis() -> Self {
        Self::new(DMatrix::from_row_slice(1, 2, &[0.0, 1.0]))
    }

    fn point(&self, s: &Configuration) -> Result<DVector<f64>> {
        match s {
            Configuration::Euclidean(v) => {
                check_dim(self.selector.nrows(), v.len())?;
                Ok(v.clone())
            }
            other => Err(Error::MissingAction(other.kind())),
        }
    }
}

impl ConfigAction for TranslationAction {
    fn name(&self) -> &'static str {
        "translations"
    }

    fn algebra_dim(&self) -> usize {
        self.selector.ncols()
    }

    fn generator(&self, s: &Configuration, eta: &AlgebraVector) -> Result<DVector<f64>> {
        self.point(s)?;
        check_dim(self.selector.ncols(), eta.len())?;
        Ok(&self.selector * eta)
    }

    fn dual(&self, s: &Configuration, upsilon: &DVector<f64>) -> Result<CoalgebraVector> {
        self.point(s)?;
        check_dim(self.selector.nrows(), upsilon.len())?;
        Ok(self.selector.transpose() * upsilon)
    }

    fn flow(&self, s: &Configuration, eta: &AlgebraVector, eps: f64) -> Result<Configuration> {
        let p = self.point(s)?;
        Ok(Configuration::Euclidean(p + &self.selector * eta * eps))
    }
}
