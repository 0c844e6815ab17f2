//! Lie algebra and group kernel.
//!
//! Algebras are described by structure constants `c[I][J][K]` (coefficient of
//! `B_I` in `[B_J, B_K]`) with the subalgebra 𝔨 spanned by the leading
//! `dim_k` basis vectors. The matrix-group side ([`MatrixAlgebra`]) carries a
//! faithful matrix representation so that exponentials, adjoint matrices and
//! the normal-coordinate `Z` functions can be computed independently of the
//! structure-constant tables.

use nalgebra::{DMatrix, DVector, Matrix3, Matrix4, Vector3};

use crate::error::{check_dim, Error, Result};

/// Coefficients of a Lie algebra element in a fixed ordered basis.
pub type AlgebraVector = DVector<f64>;
/// Coefficients of a dual element in the dual basis.
pub type CoalgebraVector = DVector<f64>;

/// Tolerance used when validating rotation matrices.
pub const ROTATION_TOL: f64 = 1e-10;

/// Below this angle `exp_so3` switches to its Taylor branch.
pub const SMALL_ANGLE: f64 = 1e-8;

#[derive(Debug, Clone, PartialEq)]
pub struct StructureConstants {
    dim_g: usize,
    dim_k: usize,
    c: Vec<f64>,
}

impl StructureConstants {
    /// Builds a table from a closure `(i, j, k) -> c[i][j][k]` and validates
    /// antisymmetry, the Jacobi identity and closure of the leading `dim_k`
    /// generators.
    pub fn from_fn(dim_g: usize, dim_k: usize, f: impl Fn(usize, usize, usize) -> f64) -> Result<Self> {
        if dim_g == 0 || dim_k > dim_g {
            return Err(Error::InvalidInput(format!(
                "need 0 <= dim_k <= dim_g and dim_g > 0, got dim_g={dim_g} dim_k={dim_k}"
            )));
        }
        let mut c = vec![0.0; dim_g * dim_g * dim_g];
        for i in 0..dim_g {
            for j in 0..dim_g {
                for k in 0..dim_g {
                    c[(i * dim_g + j) * dim_g + k] = f(i, j, k);
                }
            }
        }
        let table = Self { dim_g, dim_k, c };
        if table.antisymmetry_residual() > 1e-14 {
            return Err(Error::InvalidInput("structure constants are not antisymmetric".into()));
        }
        if table.jacobi_residual() > 1e-12 {
            return Err(Error::InvalidInput("structure constants violate the Jacobi identity".into()));
        }
        if table.closure_residual() > 1e-14 {
            return Err(Error::InvalidInput("leading generators do not close into a subalgebra".into()));
        }
        Ok(table)
    }

    /// so(3) in the standard basis, `K` trivial. `[e_i, e_j] = ε_ijk e_k`.
    pub fn so3() -> Self {
        Self::from_fn(3, 0, |i, j, k| levi_civita(i, j, k)).expect("so(3) table is valid")
    }

    /// so(3) with `𝔨 = so(2)` about `e3` placed first: basis `(e3, e1, e2)`.
    /// The reordering is cyclic, so the table is still Levi-Civita.
    pub fn so3_split() -> Self {
        Self::from_fn(3, 1, |i, j, k| levi_civita(i, j, k)).expect("split so(3) table is valid")
    }

    /// The abelian algebra ℝⁿ with its first `dim_k` directions as 𝔨.
    pub fn abelian(n: usize, dim_k: usize) -> Result<Self> {
        Self::from_fn(n, dim_k, |_, _, _| 0.0)
    }

    /// so(3)⋉ℝ³ with basis `(so(3) e1..e3, ℝ³ e1..e3)`; `𝔨 = so(3)`.
    pub fn affine_so3() -> Self {
        Self::from_fn(6, 3, |i, j, k| {
            // [(B,v),(B',v')] = (B×B', B×v' − B'×v)
            match (i < 3, j < 3, k < 3) {
                (true, true, true) => levi_civita(i, j, k),
                (false, true, false) => levi_civita(i - 3, j, k - 3),
                (false, false, true) => -levi_civita(i - 3, k, j - 3),
                _ => 0.0,
            }
        })
        .expect("affine table is valid")
    }

    pub fn dim_g(&self) -> usize {
        self.dim_g
    }

    pub fn dim_k(&self) -> usize {
        self.dim_k
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize, k: usize) -> f64 {
        self.c[(i * self.dim_g + j) * self.dim_g + k]
    }

    pub fn antisymmetry_residual(&self) -> f64 {
        let n = self.dim_g;
        let mut r: f64 = 0.0;
        for i in 0..n {
            for j in 0..n {
                for k in 0..n {
                    r = r.max((self.get(i, j, k) + self.get(i, k, j)).abs());
                }
            }
        }
        r
    }

    /// max over (I,J,K,L) of `|Σ_M c[I][M][J] c[M][K][L] + cyclic(J,K,L)|`.
    pub fn jacobi_residual(&self) -> f64 {
        let n = self.dim_g;
        let mut r: f64 = 0.0;
        for i in 0..n {
            for j in 0..n {
                for k in 0..n {
                    for l in 0..n {
                        let mut s = 0.0;
                        for m in 0..n {
                            s += self.get(i, m, j) * self.get(m, k, l)
                                + self.get(i, m, k) * self.get(m, l, j)
                                + self.get(i, m, l) * self.get(m, j, k);
                        }
                        r = r.max(s.abs());
                    }
                }
            }
        }
        r
    }

    /// Largest component of `[𝔨, 𝔨]` outside 𝔨.
    pub fn closure_residual(&self) -> f64 {
        let mut r: f64 = 0.0;
        for i in self.dim_k..self.dim_g {
            for j in 0..self.dim_k {
                for k in 0..self.dim_k {
                    r = r.max(self.get(i, j, k).abs());
                }
            }
        }
        r
    }

    /// `[x, y]_I = Σ c[I][J][K] x_J y_K`.
    pub fn bracket(&self, x: &AlgebraVector, y: &AlgebraVector) -> Result<AlgebraVector> {
        check_dim(self.dim_g, x.len())?;
        check_dim(self.dim_g, y.len())?;
        Ok(self.ad_matrix(x)? * y)
    }

    /// Matrix of `ad_x` acting on column vectors.
    pub fn ad_matrix(&self, x: &AlgebraVector) -> Result<DMatrix<f64>> {
        check_dim(self.dim_g, x.len())?;
        let n = self.dim_g;
        Ok(DMatrix::from_fn(n, n, |i, k| (0..n).map(|j| self.get(i, j, k) * x[j]).sum()))
    }

    /// Coadjoint operator defined by `⟨coad(ξ, μ), η⟩ = ⟨μ, [ξ, η]⟩`.
    pub fn coad(&self, xi: &AlgebraVector, mu: &CoalgebraVector) -> Result<CoalgebraVector> {
        check_dim(self.dim_g, mu.len())?;
        Ok(self.ad_matrix(xi)?.transpose() * mu)
    }

    /// Right-trivialised derivative of the exponential,
    /// `(∂_J exp(z)) exp(−z) = Σ_I Z[I][J](z) B_I`, summed as `Σ ad_z^n/(n+1)!`.
    pub fn right_dexp(&self, z: &AlgebraVector) -> Result<DMatrix<f64>> {
        let ad = self.ad_matrix(z)?;
        let n = self.dim_g;
        let mut term = DMatrix::<f64>::identity(n, n);
        let mut sum = term.clone();
        for k in 1..40 {
            term = &term * &ad / (k as f64 + 1.0);
            sum += &term;
            if term.amax() < 1e-18 {
                break;
            }
        }
        Ok(sum)
    }
}

/// ε_ijk for indices in 0..3.
pub fn levi_civita(i: usize, j: usize, k: usize) -> f64 {
    match (i, j, k) {
        (0, 1, 2) | (1, 2, 0) | (2, 0, 1) => 1.0,
        (0, 2, 1) | (2, 1, 0) | (1, 0, 2) => -1.0,
        _ => 0.0,
    }
}

/// `hat(v)·w = v × w`.
pub fn hat(v: &Vector3<f64>) -> Matrix3<f64> {
    Matrix3::new(0.0, -v.z, v.y, v.z, 0.0, -v.x, -v.y, v.x, 0.0)
}

/// Inverse of [`hat`]. Rejects matrices whose symmetric part exceeds 1e-10.
pub fn vee(m: &Matrix3<f64>) -> Result<Vector3<f64>> {
    let sym = (m + m.transpose()) * 0.5;
    if sym.norm() > 1e-10 {
        return Err(Error::InvalidInput(format!("vee of non-skew matrix (|sym| = {:.3e})", sym.norm())));
    }
    Ok(Vector3::new(m[(2, 1)] - m[(1, 2)], m[(0, 2)] - m[(2, 0)], m[(1, 0)] - m[(0, 1)]) * 0.5)
}

/// Skew part of `m` read through [`vee`], without the symmetry check.
pub fn vee_skew(m: &Matrix3<f64>) -> Vector3<f64> {
    Vector3::new(m[(2, 1)] - m[(1, 2)], m[(0, 2)] - m[(2, 0)], m[(1, 0)] - m[(0, 1)]) * 0.5
}

/// A rotation matrix.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct So3(Matrix3<f64>);

impl So3 {
    pub fn identity() -> Self {
        So3(Matrix3::identity())
    }

    pub fn from_matrix(m: Matrix3<f64>) -> Result<Self> {
        let orth = (m.transpose() * m - Matrix3::identity()).norm();
        let det = m.determinant();
        if !orth.is_finite() || orth > ROTATION_TOL || (det - 1.0).abs() > ROTATION_TOL {
            return Err(Error::InvalidGroupElement(format!(
                "|RᵀR − I| = {orth:.3e}, det = {det:.12}"
            )));
        }
        Ok(So3(m))
    }

    pub fn matrix(&self) -> &Matrix3<f64> {
        &self.0
    }

    pub fn inverse(&self) -> Self {
        So3(self.0.transpose())
    }

    pub fn compose(&self, other: &So3) -> Self {
        So3(self.0 * other.0)
    }

    pub fn act(&self, v: &Vector3<f64>) -> Vector3<f64> {
        self.0 * v
    }

    /// Re-orthonormalises by polar projection. Used only after long products.
    pub fn renormalized(&self) -> Self {
        let svd = self.0.svd(true, true);
        let (u, vt) = (svd.u.unwrap(), svd.v_t.unwrap());
        let mut r = u * vt;
        if r.determinant() < 0.0 {
            r = -r;
        }
        So3(r)
    }

    /// Geodesic angle to the identity.
    pub fn angle(&self) -> f64 {
        ((self.0.trace() - 1.0) * 0.5).clamp(-1.0, 1.0).acos()
    }
}

/// Rodrigues formula `exp(hat(v))`.
pub fn exp_so3(v: &Vector3<f64>) -> So3 {
    let theta2 = v.norm_squared();
    let theta = theta2.sqrt();
    let k = hat(v);
    let (a, b) = if theta < SMALL_ANGLE {
        (1.0 - theta2 / 6.0, 0.5 - theta2 / 24.0)
    } else {
        (theta.sin() / theta, (1.0 - theta.cos()) / theta2)
    };
    So3(Matrix3::identity() + k * a + k * k * b)
}

/// `Ad_R ξ = R ξ` for so(3) ≅ ℝ³.
pub fn adjoint(g: &So3, xi: &Vector3<f64>) -> Vector3<f64> {
    g.0 * xi
}

/// Element `(R, v)` of SO(3)⋉ℝ³ with `(R,v)(R',v') = (RR', Rv' + v)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AffineElement {
    pub rot: So3,
    pub v: Vector3<f64>,
}

impl AffineElement {
    pub fn identity() -> Self {
        Self { rot: So3::identity(), v: Vector3::zeros() }
    }

    pub fn compose(&self, other: &AffineElement) -> Self {
        Self { rot: self.rot.compose(&other.rot), v: self.rot.act(&other.v) + self.v }
    }

    pub fn inverse(&self) -> Self {
        let rinv = self.rot.inverse();
        Self { rot: rinv, v: -rinv.act(&self.v) }
    }

    pub fn act(&self, u: &Vector3<f64>) -> Vector3<f64> {
        self.rot.act(u) + self.v
    }

    pub fn to_matrix(&self) -> Matrix4<f64> {
        let mut m = Matrix4::identity();
        m.fixed_view_mut::<3, 3>(0, 0).copy_from(self.rot.matrix());
        m.fixed_view_mut::<3, 1>(0, 3).copy_from(&self.v);
        m
    }

    pub fn from_matrix(m: &Matrix4<f64>) -> Result<Self> {
        let bottom = Vector3::new(m[(3, 0)], m[(3, 1)], m[(3, 2)]).norm() + (m[(3, 3)] - 1.0).abs();
        if bottom > ROTATION_TOL {
            return Err(Error::InvalidGroupElement("bottom row of affine matrix is not (0,0,0,1)".into()));
        }
        let rot = So3::from_matrix(m.fixed_view::<3, 3>(0, 0).into_owned())?;
        Ok(Self { rot, v: m.fixed_view::<3, 1>(0, 3).into_owned() })
    }
}

/// Element `(B, v)` of so(3)⋉ℝ³.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AffineAlgebraVector {
    pub b: Vector3<f64>,
    pub v: Vector3<f64>,
}

impl AffineAlgebraVector {
    pub fn new(b: Vector3<f64>, v: Vector3<f64>) -> Self {
        Self { b, v }
    }

    pub fn to_coeffs(&self) -> AlgebraVector {
        DVector::from_iterator(6, self.b.iter().chain(self.v.iter()).copied())
    }

    pub fn from_coeffs(c: &AlgebraVector) -> Result<Self> {
        check_dim(6, c.len())?;
        Ok(Self { b: Vector3::new(c[0], c[1], c[2]), v: Vector3::new(c[3], c[4], c[5]) })
    }
}

/// `[(B,v),(B',v')] = ([B,B'], Bv' − B'v)`.
pub fn affine_bracket(a: &AffineAlgebraVector, a2: &AffineAlgebraVector) -> AffineAlgebraVector {
    AffineAlgebraVector { b: a.b.cross(&a2.b), v: a.b.cross(&a2.v) - a2.b.cross(&a.v) }
}

/// Generic matrix exponential by scaling and squaring of a Taylor series.
pub fn expm(x: &DMatrix<f64>) -> DMatrix<f64> {
    let n = x.nrows();
    let norm = x.abs().row_sum().max();
    let squarings = if norm > 0.5 { (norm / 0.5).log2().ceil() as i32 } else { 0 };
    let scaled = x / 2f64.powi(squarings);
    let mut term = DMatrix::<f64>::identity(n, n);
    let mut sum = term.clone();
    for k in 1..=24 {
        term = &term * &scaled / k as f64;
        sum += &term;
    }
    for _ in 0..squarings {
        sum = &sum * &sum;
    }
    sum
}

/// A Lie algebra together with a faithful matrix representation.
#[derive(Debug, Clone)]
pub struct MatrixAlgebra {
    constants: StructureConstants,
    generators: Vec<DMatrix<f64>>,
    gram_inv: DMatrix<f64>,
    name: &'static str,
}

impl MatrixAlgebra {
    /// Pairs a structure-constant table with generator matrices and checks
    /// that commutators of the generators reproduce the table.
    pub fn new(name: &'static str, constants: StructureConstants, generators: Vec<DMatrix<f64>>) -> Result<Self> {
        check_dim(constants.dim_g(), generators.len())?;
        let n = generators.len();
        let gram = DMatrix::from_fn(n, n, |i, j| generators[i].dot(&generators[j]));
        let gram_inv = gram
            .try_inverse()
            .ok_or_else(|| Error::InvalidInput("generators are linearly dependent".into()))?;
        let alg = Self { constants, generators, gram_inv, name };
        let derived = alg.derived_constants()?;
        let mut err: f64 = 0.0;
        for i in 0..n {
            for j in 0..n {
                for k in 0..n {
                    err = err.max((derived.get(i, j, k) - alg.constants.get(i, j, k)).abs());
                }
            }
        }
        if err > 1e-12 {
            return Err(Error::InvalidInput(format!(
                "generators do not realise the structure constants (err {err:.3e})"
            )));
        }
        Ok(alg)
    }

    pub fn name(&self) -> &'static str {
        self.name
    }

    pub fn constants(&self) -> &StructureConstants {
        &self.constants
    }

    pub fn dim(&self) -> usize {
        self.constants.dim_g()
    }

    pub fn matrix_size(&self) -> usize {
        self.generators[0].nrows()
    }

    pub fn generators(&self) -> &[DMatrix<f64>] {
        &self.generators
    }

    pub fn to_matrix(&self, x: &AlgebraVector) -> Result<DMatrix<f64>> {
        check_dim(self.dim(), x.len())?;
        let m = self.matrix_size();
        let mut out = DMatrix::zeros(m, m);
        for (g, &xi) in self.generators.iter().zip(x.iter()) {
            out += g * xi;
        }
        Ok(out)
    }

    /// Coefficients of the orthogonal projection of `m` onto the span of the
    /// generators (Frobenius inner product).
    pub fn from_matrix(&self, m: &DMatrix<f64>) -> AlgebraVector {
        let rhs = DVector::from_iterator(self.dim(), self.generators.iter().map(|g| g.dot(m)));
        &self.gram_inv * rhs
    }

    /// Structure constants recomputed from matrix commutators.
    pub fn derived_constants(&self) -> Result<StructureConstants> {
        let n = self.generators.len();
        let mut table = vec![0.0; n * n * n];
        for j in 0..n {
            for k in 0..n {
                let comm = &self.generators[j] * &self.generators[k] - &self.generators[k] * &self.generators[j];
                let coeffs = self.from_matrix(&comm);
                for i in 0..n {
                    table[(i * n + j) * n + k] = coeffs[i];
                }
            }
        }
        StructureConstants::from_fn(n, self.constants.dim_k(), |i, j, k| table[(i * n + j) * n + k])
    }

    pub fn exp(&self, x: &AlgebraVector) -> Result<DMatrix<f64>> {
        Ok(expm(&self.to_matrix(x)?))
    }

    /// Matrix of `Ad_g` in the basis; column `J` holds `g B_J g⁻¹`.
    pub fn adjoint_matrix(&self, g: &DMatrix<f64>) -> Result<DMatrix<f64>> {
        let ginv = g
            .clone()
            .try_inverse()
            .ok_or_else(|| Error::InvalidGroupElement("singular group matrix".into()))?;
        let n = self.dim();
        let mut out = DMatrix::zeros(n, n);
        for (j, b) in self.generators.iter().enumerate() {
            out.set_column(j, &self.from_matrix(&(g * b * &ginv)));
        }
        Ok(out)
    }

    /// so(3) in the standard basis via `hat`.
    pub fn so3() -> Self {
        Self::new("so3", StructureConstants::so3(), so3_generators([0, 1, 2])).expect("so3 rep")
    }

    /// so(3) with basis `(e3, e1, e2)` and `𝔨 = so(2)` about `e3`.
    pub fn so3_split() -> Self {
        Self::new("so3_split", StructureConstants::so3_split(), so3_generators([2, 0, 1])).expect("so3 rep")
    }

    /// ℝ² realised by 3×3 translation matrices; `𝔨` is the first axis.
    pub fn abelian_plane() -> Self {
        let mut gx = DMatrix::zeros(3, 3);
        gx[(0, 2)] = 1.0;
        let mut gy = DMatrix::zeros(3, 3);
        gy[(1, 2)] = 1.0;
        Self::new("r2", StructureConstants::abelian(2, 1).expect("abelian"), vec![gx, gy]).expect("r2 rep")
    }

    /// so(3)⋉ℝ³ realised by 4×4 matrices `[[hat(B), v], [0, 0]]`.
    pub fn affine_so3() -> Self {
        let mut gens = Vec::with_capacity(6);
        for i in 0..3 {
            let mut m = DMatrix::zeros(4, 4);
            let e = Vector3::ith(i, 1.0);
            m.view_mut((0, 0), (3, 3)).copy_from(&hat(&e));
            gens.push(m);
        }
        for i in 0..3 {
            let mut m = DMatrix::zeros(4, 4);
            m[(i, 3)] = 1.0;
            gens.push(m);
        }
        Self::new("affine_so3", StructureConstants::affine_so3(), gens).expect("affine rep")
    }
}

fn so3_generators(order: [usize; 3]) -> Vec<DMatrix<f64>> {
    order
        .iter()
        .map(|&i| {
            let h = hat(&Vector3::ith(i, 1.0));
            DMatrix::from_column_slice(3, 3, h.as_slice())
        })
        .collect()
}

/// Step sizes above this are refused by [`z_derivative_check`].
pub const MAX_Z_STEP: f64 = 1e-1;

/// Finite-difference check of `∂Z^I_J/∂y^K = −½ c^I_{JK}` at the identity.
///
/// `Z(y)` is obtained by central differencing the matrix exponential along
/// each coordinate direction and right-translating back to the identity; the
/// outer derivative in `y^K` is again central. Returns the largest residual.
pub fn z_derivative_check(alg: &MatrixAlgebra, step: f64) -> Result<f64> {
    if !(step > 0.0) || step > MAX_Z_STEP {
        return Err(Error::ChartOutOfRange(format!("FD step {step:e} outside (0, {MAX_Z_STEP}]")));
    }
    let n = alg.dim();
    let z_at = |y: &AlgebraVector| -> Result<DMatrix<f64>> {
        let g_inv = alg.exp(&(-y))?;
        let mut z = DMatrix::zeros(n, n);
        for j in 0..n {
            let mut yp = y.clone();
            let mut ym = y.clone();
            yp[j] += step;
            ym[j] -= step;
            let d = (alg.exp(&yp)? - alg.exp(&ym)?) / (2.0 * step);
            z.set_column(j, &alg.from_matrix(&(d * &g_inv)));
        }
        Ok(z)
    };
    let c = alg.constants();
    let mut worst: f64 = 0.0;
    for k in 0..n {
        let mut yp = DVector::zeros(n);
        let mut ym = DVector::zeros(n);
        yp[k] = step;
        ym[k] = -step;
        let dz = (z_at(&yp)? - z_at(&ym)?) / (2.0 * step);
        for i in 0..n {
            for j in 0..n {
                worst = worst.max((dz[(i, j)] + 0.5 * c.get(i, j, k)).abs());
            }
        }
    }
    Ok(worst)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn rvec(rng: &mut ChaCha8Rng, n: usize) -> DVector<f64> {
        DVector::from_fn(n, |_, _| rng.gen_range(-1.0..1.0))
    }

    fn rv3(rng: &mut ChaCha8Rng, scale: f64) -> Vector3<f64> {
        Vector3::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)) * scale
    }

    #[test]
    fn so3_basis_bracket() {
        let c = StructureConstants::so3();
        let e1 = DVector::from_vec(vec![1.0, 0.0, 0.0]);
        let e2 = DVector::from_vec(vec![0.0, 1.0, 0.0]);
        assert_eq!(c.bracket(&e1, &e2).unwrap(), DVector::from_vec(vec![0.0, 0.0, 1.0]));
    }

    #[test]
    fn bracket_is_cross_product_and_self_bracket_vanishes() {
        let c = StructureConstants::so3();
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        for _ in 0..50 {
            let x = rv3(&mut rng, 1.0);
            let y = rv3(&mut rng, 1.0);
            // brute-force expansion of the cross product
            let cross = Vector3::new(x.y * y.z - x.z * y.y, x.z * y.x - x.x * y.z, x.x * y.y - x.y * y.x);
            let b = c.bracket(&DVector::from_column_slice(x.as_slice()), &DVector::from_column_slice(y.as_slice())).unwrap();
            for i in 0..3 {
                assert_relative_eq!(b[i], cross[i], epsilon = 1e-15);
            }
            let xx = c.bracket(&DVector::from_column_slice(x.as_slice()), &DVector::from_column_slice(x.as_slice())).unwrap();
            assert!(xx.amax() < 1e-16);
        }
    }

    #[test]
    fn bracket_rejects_wrong_length() {
        let c = StructureConstants::so3();
        let err = c.bracket(&DVector::zeros(3), &DVector::zeros(2)).unwrap_err();
        assert_eq!(err, Error::DimensionMismatch { expected: 3, got: 2 });
    }

    #[test]
    fn coad_so3_is_mu_cross_xi() {
        let c = StructureConstants::so3();
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        for _ in 0..20 {
            let xi = rv3(&mut rng, 1.0);
            let mu = rv3(&mut rng, 1.0);
            let got = c.coad(&DVector::from_column_slice(xi.as_slice()), &DVector::from_column_slice(mu.as_slice())).unwrap();
            let want = mu.cross(&xi);
            // pairing check against every basis vector
            for k in 0..3 {
                let eta = Vector3::ith(k, 1.0);
                assert_relative_eq!(got[k], mu.dot(&xi.cross(&eta)), epsilon = 1e-15);
                assert_relative_eq!(got[k], want[k], epsilon = 1e-15);
            }
        }
        let zero = c.coad(&DVector::from_vec(vec![1.0, 2.0, 3.0]), &DVector::zeros(3)).unwrap();
        assert_eq!(zero, DVector::zeros(3));
    }

    #[test]
    fn coad_abelian_vanishes() {
        let c = StructureConstants::abelian(2, 1).unwrap();
        let r = c.coad(&DVector::from_vec(vec![1.0, -2.0]), &DVector::from_vec(vec![0.5, 3.0])).unwrap();
        assert_eq!(r, DVector::zeros(2));
    }

    #[test]
    fn shipped_tables_satisfy_invariants() {
        for c in [
            StructureConstants::so3(),
            StructureConstants::so3_split(),
            StructureConstants::abelian(2, 1).unwrap(),
            StructureConstants::affine_so3(),
        ] {
            assert!(c.jacobi_residual() <= 1e-12);
            assert!(c.antisymmetry_residual() == 0.0);
            assert!(c.closure_residual() == 0.0);
        }
    }

    #[test]
    fn invalid_tables_are_rejected() {
        // not antisymmetric
        assert!(StructureConstants::from_fn(2, 0, |i, j, k| if (i, j, k) == (0, 0, 1) { 1.0 } else { 0.0 }).is_err());
        // 𝔨 = span(e1) in so(3) is fine, span(e1, e2) is not a subalgebra
        assert!(StructureConstants::from_fn(3, 2, levi_civita).is_err());
        assert!(StructureConstants::from_fn(3, 4, levi_civita).is_err());
    }

    #[test]
    fn hat_vee_round_trip() {
        let e3 = Vector3::z();
        assert_eq!(hat(&e3) * Vector3::x(), Vector3::y());
        assert_eq!(hat(&Vector3::zeros()), Matrix3::zeros());
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for _ in 0..20 {
            let x = rv3(&mut rng, 5.0);
            assert_relative_eq!(vee(&hat(&x)).unwrap(), x, epsilon = 1e-15);
            let h = hat(&x);
            assert_eq!(h, -h.transpose());
        }
        assert!(vee(&Matrix3::identity()).is_err());
    }

    #[test]
    fn exp_so3_special_values() {
        assert_eq!(*exp_so3(&Vector3::zeros()).matrix(), Matrix3::identity());
        let q = exp_so3(&(Vector3::z() * std::f64::consts::FRAC_PI_2));
        assert_relative_eq!(q.act(&Vector3::x()), Vector3::y(), epsilon = 1e-15);
        let tiny = exp_so3(&Vector3::new(1e-10, -2e-10, 3e-10));
        assert!((tiny.matrix() - (Matrix3::identity() + hat(&Vector3::new(1e-10, -2e-10, 3e-10)))).norm() < 1e-19);
    }

    #[test]
    fn exp_so3_matches_matrix_series() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        for _ in 0..50 {
            let mut v = rv3(&mut rng, 1.0);
            v *= rng.gen_range(0.0..2.0) / v.norm();
            let k = hat(&v);
            let mut term = Matrix3::identity();
            let mut series = term;
            for n in 1..20 {
                term = term * k / n as f64;
                series += term;
            }
            assert!((exp_so3(&v).matrix() - series).amax() < 1e-12);
        }
    }

    #[test]
    fn exp_so3_is_a_rotation() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for _ in 0..100 {
            let v = rv3(&mut rng, 10.0 / 3f64.sqrt());
            let r = exp_so3(&v);
            assert!((r.matrix().transpose() * r.matrix() - Matrix3::identity()).norm() <= 1e-12);
            assert!((r.matrix().determinant() - 1.0).abs() <= 1e-12);
        }
    }

    #[test]
    fn so3_validation() {
        assert!(So3::from_matrix(Matrix3::identity() * 2.0).is_err());
        assert!(So3::from_matrix(-Matrix3::identity()).is_err());
        assert!(So3::from_matrix(*exp_so3(&Vector3::new(0.3, 0.2, 0.1)).matrix()).is_ok());
    }

    #[test]
    fn affine_group_law() {
        let v = Vector3::new(1.0, 2.0, 3.0);
        let w = Vector3::new(-1.0, 0.5, 0.0);
        let a = AffineElement { rot: So3::identity(), v };
        let b = AffineElement { rot: So3::identity(), v: w };
        assert_eq!(a.compose(&b).v, v + w);

        let mut rng = ChaCha8Rng::seed_from_u64(6);
        let mut random = || AffineElement { rot: exp_so3(&rv3(&mut rng, 2.0)), v: rv3(&mut rng, 3.0) };
        let (g1, g2, g3) = (random(), random(), random());
        let lhs = g1.compose(&g2).compose(&g3);
        let rhs = g1.compose(&g2.compose(&g3));
        assert!((lhs.to_matrix() - rhs.to_matrix()).amax() < 1e-12);
        let e = g1.compose(&g1.inverse());
        assert!((e.to_matrix() - Matrix4::identity()).amax() < 1e-14);
        // group law agrees with matrix multiplication
        assert!(((g1.to_matrix() * g2.to_matrix()) - g1.compose(&g2).to_matrix()).amax() < 1e-14);
    }

    #[test]
    fn affine_bracket_examples() {
        let r = affine_bracket(
            &AffineAlgebraVector::new(Vector3::z(), Vector3::zeros()),
            &AffineAlgebraVector::new(Vector3::zeros(), Vector3::x()),
        );
        assert_eq!(r, AffineAlgebraVector::new(Vector3::zeros(), Vector3::y()));
        let t = affine_bracket(
            &AffineAlgebraVector::new(Vector3::zeros(), Vector3::x()),
            &AffineAlgebraVector::new(Vector3::zeros(), Vector3::y()),
        );
        assert_eq!(t, AffineAlgebraVector::new(Vector3::zeros(), Vector3::zeros()));
        let s = affine_bracket(
            &AffineAlgebraVector::new(Vector3::x(), Vector3::zeros()),
            &AffineAlgebraVector::new(Vector3::y(), Vector3::zeros()),
        );
        assert_eq!(s, AffineAlgebraVector::new(Vector3::z(), Vector3::zeros()));
    }

    #[test]
    fn affine_bracket_matches_table_and_jacobi() {
        let c = StructureConstants::affine_so3();
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for _ in 0..50 {
            let (x, y, z) = (rvec(&mut rng, 6), rvec(&mut rng, 6), rvec(&mut rng, 6));
            let (ax, ay, az) = (
                AffineAlgebraVector::from_coeffs(&x).unwrap(),
                AffineAlgebraVector::from_coeffs(&y).unwrap(),
                AffineAlgebraVector::from_coeffs(&z).unwrap(),
            );
            let via_table = c.bracket(&x, &y).unwrap();
            assert!((affine_bracket(&ax, &ay).to_coeffs() - via_table).amax() < 1e-15);
            let antisym = affine_bracket(&ax, &ay).to_coeffs() + affine_bracket(&ay, &ax).to_coeffs();
            assert!(antisym.amax() == 0.0);
            let jac = affine_bracket(&ax, &affine_bracket(&ay, &az)).to_coeffs()
                + affine_bracket(&ay, &affine_bracket(&az, &ax)).to_coeffs()
                + affine_bracket(&az, &affine_bracket(&ax, &ay)).to_coeffs();
            assert!(jac.amax() <= 1e-12);
        }
    }

    #[test]
    fn adjoint_examples() {
        let v = Vector3::new(0.2, -0.4, 1.0);
        assert_eq!(adjoint(&So3::identity(), &v), v);
        let half = exp_so3(&(Vector3::z() * std::f64::consts::PI));
        assert_relative_eq!(adjoint(&half, &Vector3::x()), -Vector3::x(), epsilon = 1e-15);
    }

    #[test]
    fn adjoint_is_homomorphism_and_automorphism() {
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        for _ in 0..50 {
            let g = exp_so3(&rv3(&mut rng, 2.0));
            let h = exp_so3(&rv3(&mut rng, 2.0));
            let (x, y) = (rv3(&mut rng, 1.0), rv3(&mut rng, 1.0));
            assert!((adjoint(&g.compose(&h), &x) - adjoint(&g, &adjoint(&h, &x))).amax() < 1e-10);
            assert!((adjoint(&g, &x.cross(&y)) - adjoint(&g, &x).cross(&adjoint(&g, &y))).amax() < 1e-10);
        }
    }

    #[test]
    fn matrix_algebras_reproduce_tables() {
        for alg in [MatrixAlgebra::so3(), MatrixAlgebra::so3_split(), MatrixAlgebra::abelian_plane(), MatrixAlgebra::affine_so3()] {
            let derived = alg.derived_constants().unwrap();
            assert_eq!(derived.dim_g(), alg.dim());
        }
    }

    #[test]
    fn generic_expm_agrees_with_rodrigues() {
        let alg = MatrixAlgebra::so3();
        let v = Vector3::new(1.2, -0.7, 2.5);
        let m = alg.exp(&DVector::from_column_slice(v.as_slice())).unwrap();
        let r = exp_so3(&v);
        for i in 0..3 {
            for j in 0..3 {
                assert!((m[(i, j)] - r.matrix()[(i, j)]).abs() < 1e-13);
            }
        }
    }

    #[test]
    fn right_dexp_matches_finite_differences() {
        let alg = MatrixAlgebra::affine_so3();
        let z = DVector::from_vec(vec![0.3, -0.2, 0.5, 1.0, -0.4, 0.2]);
        let zmat = alg.constants().right_dexp(&z).unwrap();
        let ginv = alg.exp(&(-&z)).unwrap();
        let h = 1e-5;
        for j in 0..6 {
            let mut zp = z.clone();
            let mut zm = z.clone();
            zp[j] += h;
            zm[j] -= h;
            let d = (alg.exp(&zp).unwrap() - alg.exp(&zm).unwrap()) / (2.0 * h);
            let col = alg.from_matrix(&(d * &ginv));
            assert!((col - zmat.column(j)).amax() < 1e-8);
        }
    }

    #[test]
    fn z_derivative_identity() {
        assert!(z_derivative_check(&MatrixAlgebra::abelian_plane(), 1e-4).unwrap() < 1e-12);
        assert!(z_derivative_check(&MatrixAlgebra::so3(), 1e-4).unwrap() <= 1e-6);
        assert!(z_derivative_check(&MatrixAlgebra::so3_split(), 1e-4).unwrap() <= 1e-6);
        assert!(z_derivative_check(&MatrixAlgebra::affine_so3(), 1e-4).unwrap() <= 1e-6);
        assert!(matches!(z_derivative_check(&MatrixAlgebra::so3(), 0.5), Err(Error::ChartOutOfRange(_))));
    }
}
