//! K-invariance checker, conservation monitors and convergence studies.

use nalgebra::{DMatrix, DVector, Vector3};
use serde::Serialize;

use crate::error::{check_dim, Error, Result};
use crate::homogeneous::{Configuration, SpherePoint};
use crate::lie_core::StructureConstants;
use crate::reduced_bracket::{ChartModel, HamiltonianSpec, ReducedPoint};

/// Central-difference step used by [`invariance_check`].
pub const INVARIANCE_STEP: f64 = 1e-5;

/// A function on unreduced chart coordinates `(z, π^i)`, with `z` and each
/// `π^i` in a basis whose first `dim_k` vectors span 𝔨.
pub type ChartFunction = Box<dyn Fn(&DVector<f64>, &[DVector<f64>]) -> Result<f64>>;

/// One sample of the invariance check: the function (chart centred at some
/// group element) and the momenta at which to test it.
pub struct ChartSample {
    pub e: ChartFunction,
    pub pi: Vec<DVector<f64>>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct InvarianceReport {
    pub max_residual: f64,
    pub sample_count: usize,
    /// Largest residual for each 𝔨-generator `α`.
    pub per_generator: Vec<f64>,
}

/// Evaluates
///
/// ```text
/// ∂E/∂k^α − ½ π^i_γ c^γ_{βα} ∂E/∂π^i_β − ½ π^i_γ c^γ_{Bα} ∂E/∂π^i_B − ½ π^i_C c^C_{Bα} ∂E/∂π^i_B
/// ```
///
/// at `z = 0` by central differences, for each sample drawn.
pub fn invariance_check(
    c: &StructureConstants,
    samples: usize,
    step: f64,
    mut sampler: impl FnMut() -> Result<ChartSample>,
) -> Result<InvarianceReport> {
    let (d, dk) = (c.dim_g(), c.dim_k());
    let mut per_generator = vec![0.0; dk];
    for _ in 0..samples {
        let ChartSample { e, pi } = sampler()?;
        for p in &pi {
            check_dim(d, p.len())?;
        }
        let z0 = DVector::zeros(d);
        let mut de_dpi = Vec::with_capacity(pi.len());
        for i in 0..pi.len() {
            let mut g = DVector::zeros(d);
            for a in 0..d {
                let (mut pp, mut pm) = (pi.clone(), pi.clone());
                pp[i][a] += step;
                pm[i][a] -= step;
                g[a] = (e(&z0, &pp)? - e(&z0, &pm)?) / (2.0 * step);
            }
            de_dpi.push(g);
        }
        for (alpha, worst) in per_generator.iter_mut().enumerate() {
            let (mut zp, mut zm) = (z0.clone(), z0.clone());
            zp[alpha] = step;
            zm[alpha] = -step;
            let mut r = (e(&zp, &pi)? - e(&zm, &pi)?) / (2.0 * step);
            for (p, g) in pi.iter().zip(&de_dpi) {
                // (J, M) ∈ {(β, γ), (B, γ), (B, C)}
                for j in 0..d {
                    let m_range = if j < dk { 0..dk } else { 0..d };
                    for m in m_range {
                        r -= 0.5 * p[m] * c.get(m, j, alpha) * g[j];
                    }
                }
            }
            if !r.is_finite() {
                return Err(Error::NonFinite("invariance residual".into()));
            }
            *worst = f64::max(*worst, r.abs());
        }
    }
    Ok(InvarianceReport {
        max_residual: per_generator.iter().copied().fold(0.0, f64::max),
        sample_count: samples,
        per_generator,
    })
}

/// `E(z, π) = h(Ψ(g0·exp z, π))` in the canonical chart centred at `g0`.
/// `perm[a]` is the model-basis index of split-basis vector `a`.
pub fn chart_function(model: ChartModel, perm: Vec<usize>, h: HamiltonianSpec, g0: DMatrix<f64>) -> Result<ChartFunction> {
    let d = model.algebra.dim();
    check_dim(d, perm.len())?;
    let inv = g0.clone().try_inverse().ok_or_else(|| Error::InvalidGroupElement("singular".into()))?;
    let t0 = model.algebra.adjoint_matrix(&inv)?.transpose();
    Ok(Box::new(move |z_split, pi_split| {
        let mut z = DVector::zeros(d);
        for (a, &m) in perm.iter().enumerate() {
            z[m] = z_split[a];
        }
        let w = model.algebra.constants().right_dexp(&z)?;
        let wt_inv = w.transpose().try_inverse().ok_or_else(|| Error::ChartOutOfRange("dexp singular".into()))?;
        let m_all = &t0 * wt_inv;
        let mu = pi_split
            .iter()
            .map(|p| {
                let mut pm = DVector::zeros(d);
                for (a, &m) in perm.iter().enumerate() {
                    pm[m] = p[a];
                }
                &m_all * pm
            })
            .collect();
        let s_bar = (model.section)(&(&g0 * model.algebra.exp(&z)?))?;
        h.value(&ReducedPoint::new(mu, s_bar)?)
    }))
}

/// Split order for SO(3) with 𝔨 = span(e3): (e3, e1, e2).
pub const SO3_SPLIT_PERM: [usize; 3] = [2, 0, 1];

fn e1_section(g: &DMatrix<f64>) -> Result<Configuration> {
    check_dim(3, g.nrows())?;
    Ok(Configuration::Sphere(SpherePoint::new(Vector3::new(g[(0, 0)], g[(1, 0)], g[(2, 0)]))?))
}

/// SO(3) with the potential read through `R·e1`, which is not invariant under
/// rotations about `e3`. Used as the negative control of the invariance check.
pub fn broken_heavy_top_model() -> ChartModel {
    ChartModel { algebra: crate::lie_core::MatrixAlgebra::so3(), section: e1_section }
}

/// A named scalar functional of a packed state.
pub struct Functional<'a> {
    pub name: &'a str,
    pub f: Box<dyn Fn(&DVector<f64>) -> f64 + 'a>,
}

impl<'a> Functional<'a> {
    pub fn new(name: &'a str, f: impl Fn(&DVector<f64>) -> f64 + 'a) -> Self {
        Self { name, f: Box::new(f) }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FunctionalSeries {
    pub name: String,
    pub initial: f64,
    pub values: Vec<f64>,
    /// `max |f(t) − f(0)| / max(1, |f(0)|)`.
    pub drift: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ConservationLog {
    pub times: Vec<f64>,
    pub series: Vec<FunctionalSeries>,
}

impl ConservationLog {
    pub fn drift(&self, name: &str) -> Option<f64> {
        self.series.iter().find(|s| s.name == name).map(|s| s.drift)
    }
}

pub fn conservation_monitor(times: &[f64], states: &[DVector<f64>], functionals: &[Functional]) -> Result<ConservationLog> {
    check_dim(times.len(), states.len())?;
    if times.windows(2).any(|w| !(w[1] > w[0])) {
        return Err(Error::InvalidInput("time stamps must increase".into()));
    }
    let series = functionals
        .iter()
        .map(|fun| {
            let values: Vec<f64> = states.iter().map(|x| (fun.f)(x)).collect();
            let initial = values.first().copied().unwrap_or(0.0);
            let scale = initial.abs().max(1.0);
            let drift = values.iter().map(|v| (v - initial).abs() / scale).fold(0.0, f64::max);
            FunctionalSeries { name: fun.name.to_string(), initial, values, drift }
        })
        .collect();
    Ok(ConservationLog { times: times.to_vec(), series })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum ConvergenceStatus {
    Ok,
    /// Errors do not decrease monotonically with `h`.
    Inconclusive,
    /// Some error is exactly zero, so no slope exists.
    Degenerate,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ConvergenceResult {
    pub steps: Vec<f64>,
    pub errors: Vec<f64>,
    /// Least-squares slope of `log(error)` against `log(h)`.
    pub slope: f64,
    /// Root-mean-square residual of the fit in log space.
    pub fit_residual: f64,
    pub status: ConvergenceStatus,
}

pub fn convergence_study(steps: &[f64], errors: &[f64]) -> Result<ConvergenceResult> {
    check_dim(steps.len(), errors.len())?;
    if steps.len() < 3 {
        return Err(Error::InvalidInput("a convergence study needs at least three levels".into()));
    }
    if steps.iter().any(|h| !(*h > 0.0)) {
        return Err(Error::InvalidInput("step sizes must be positive".into()));
    }
    let base = ConvergenceResult { steps: steps.to_vec(), errors: errors.to_vec(), slope: f64::NAN, fit_residual: f64::NAN, status: ConvergenceStatus::Degenerate };
    if errors.iter().any(|e| !(*e > 0.0)) {
        return Ok(base);
    }
    let xs: Vec<f64> = steps.iter().map(|h| h.ln()).collect();
    let ys: Vec<f64> = errors.iter().map(|e| e.ln()).collect();
    let n = xs.len() as f64;
    let (mx, my) = (xs.iter().sum::<f64>() / n, ys.iter().sum::<f64>() / n);
    let sxx: f64 = xs.iter().map(|x| (x - mx).powi(2)).sum();
    let sxy: f64 = xs.iter().zip(&ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let slope = sxy / sxx;
    let fit_residual = (xs.iter().zip(&ys).map(|(x, y)| (y - my - slope * (x - mx)).powi(2)).sum::<f64>() / n).sqrt();
    let mut order: Vec<usize> = (0..steps.len()).collect();
    order.sort_by(|&a, &b| steps[a].total_cmp(&steps[b]));
    let monotone = order.windows(2).all(|w| errors[w[0]] < errors[w[1]]);
    let status = if monotone { ConvergenceStatus::Ok } else { ConvergenceStatus::Inconclusive };
    Ok(ConvergenceResult { slope, fit_residual, status, ..base })
}

/// Runs `runner` at each step size and fits the observed order.
pub fn convergence_study_with(steps: &[f64], mut runner: impl FnMut(f64) -> Result<f64>) -> Result<ConvergenceResult> {
    let errors = steps.iter().map(|&h| runner(h)).collect::<Result<Vec<_>>>()?;
    convergence_study(steps, &errors)
}
