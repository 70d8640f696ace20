//! Dense operators on tensor powers of a finite one-particle space.
//!
//! Row and column indices of an `s`-particle operator are base-`d` digit
//! strings with particle 1 as the most significant digit. Particle labels in
//! the public API are 1-based.

use std::ops::{Add, AddAssign, Mul, Neg, Sub, SubAssign};

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use num_complex::Complex;

use crate::error::{Error, Result};

pub type C64 = Complex<f64>;
pub type CMatrix = DMatrix<C64>;

/// Max-abs tolerance used for hermiticity checks.
pub const HERMITIAN_TOL: f64 = 1e-12;

/// Maximum particle count accepted for a single operator.
pub const MAX_PARTICLES: usize = 10;

#[derive(Clone, Debug, PartialEq)]
pub struct ManyBodyOperator {
    dim: usize,
    particles: usize,
    matrix: CMatrix,
}

impl ManyBodyOperator {
    pub fn new(dim: usize, particles: usize, matrix: CMatrix) -> Result<Self> {
        if dim == 0 {
            return Err(Error::invalid("dim", "must be positive"));
        }
        if particles == 0 || particles > MAX_PARTICLES {
            return Err(Error::invalid(
                "particles",
                format!("must lie in 1..={MAX_PARTICLES}, got {particles}"),
            ));
        }
        let side = dim.pow(particles as u32);
        if matrix.nrows() != side || matrix.ncols() != side {
            return Err(Error::DimensionMismatch(format!(
                "expected {side}x{side} matrix for {particles} particles of dimension {dim}, got {}x{}",
                matrix.nrows(),
                matrix.ncols()
            )));
        }
        Ok(Self {
            dim,
            particles,
            matrix,
        })
    }

    /// One-particle operator from a square matrix.
    pub fn one_particle(matrix: CMatrix) -> Result<Self> {
        let dim = matrix.nrows();
        Self::new(dim, 1, matrix)
    }

    pub fn identity(dim: usize, particles: usize) -> Self {
        let side = dim.pow(particles as u32);
        Self {
            dim,
            particles,
            matrix: CMatrix::identity(side, side),
        }
    }

    pub fn zeros(dim: usize, particles: usize) -> Self {
        let side = dim.pow(particles as u32);
        Self {
            dim,
            particles,
            matrix: CMatrix::zeros(side, side),
        }
    }

    pub fn from_diagonal(dim: usize, particles: usize, diag: &[C64]) -> Result<Self> {
        let m = CMatrix::from_diagonal(&DVector::from_column_slice(diag));
        Self::new(dim, particles, m)
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn particle_count(&self) -> usize {
        self.particles
    }

    pub fn side(&self) -> usize {
        self.matrix.nrows()
    }

    pub fn matrix(&self) -> &CMatrix {
        &self.matrix
    }

    pub fn into_matrix(self) -> CMatrix {
        self.matrix
    }

    pub fn trace(&self) -> C64 {
        self.matrix.trace()
    }

    pub fn adjoint(&self) -> Self {
        Self {
            dim: self.dim,
            particles: self.particles,
            matrix: self.matrix.adjoint(),
        }
    }

    pub fn scale(&self, c: C64) -> Self {
        Self {
            dim: self.dim,
            particles: self.particles,
            matrix: &self.matrix * c,
        }
    }

    pub fn scale_real(&self, c: f64) -> Self {
        self.scale(C64::new(c, 0.0))
    }

    /// `self += c * other`.
    pub fn axpy(&mut self, c: f64, other: &Self) {
        debug_assert!(self.same_shape(other));
        self.matrix.zip_apply(&other.matrix, |a, b| *a += b * c);
    }

    pub fn same_shape(&self, other: &Self) -> bool {
        self.dim == other.dim && self.particles == other.particles
    }

    fn check_same_shape(&self, other: &Self) -> Result<()> {
        if self.same_shape(other) {
            Ok(())
        } else {
            Err(Error::DimensionMismatch(format!(
                "operators on {}x(d={}) and {}x(d={}) particles",
                self.particles, self.dim, other.particles, other.dim
            )))
        }
    }

    /// Operator product `self * other`.
    pub fn compose(&self, other: &Self) -> Result<Self> {
        self.check_same_shape(other)?;
        Ok(Self {
            dim: self.dim,
            particles: self.particles,
            matrix: &self.matrix * &other.matrix,
        })
    }

    /// Commutator `self * other - other * self`.
    pub fn commutator(&self, other: &Self) -> Result<Self> {
        self.check_same_shape(other)?;
        Ok(Self {
            dim: self.dim,
            particles: self.particles,
            matrix: &self.matrix * &other.matrix - &other.matrix * &self.matrix,
        })
    }

    pub fn max_abs(&self) -> f64 {
        self.matrix.iter().fold(0.0, |m, z| m.max(z.norm()))
    }

    /// Max-abs entrywise distance. Panics on shape mismatch.
    pub fn max_abs_diff(&self, other: &Self) -> f64 {
        assert!(self.same_shape(other), "shape mismatch in max_abs_diff");
        self.matrix
            .iter()
            .zip(other.matrix.iter())
            .fold(0.0, |m, (a, b)| m.max((a - b).norm()))
    }

    pub fn hermiticity_defect(&self) -> f64 {
        let n = self.side();
        let mut worst = 0.0f64;
        for c in 0..n {
            for r in 0..=c {
                let d = (self.matrix[(r, c)] - self.matrix[(c, r)].conj()).norm();
                worst = worst.max(d);
            }
        }
        worst
    }

    pub fn is_hermitian(&self, tol: f64) -> bool {
        self.hermiticity_defect() <= tol
    }

    pub(crate) fn require_hermitian(&self, what: &str) -> Result<()> {
        let defect = self.hermiticity_defect();
        if defect <= HERMITIAN_TOL * self.max_abs().max(1.0) {
            Ok(())
        } else {
            Err(Error::NotHermitian {
                what: what.to_string(),
                defect,
            })
        }
    }

    /// Returns `(self + self^†) / 2`.
    pub fn hermitian_part(&self) -> Self {
        let m = (&self.matrix + self.matrix.adjoint()) * C64::new(0.5, 0.0);
        Self {
            dim: self.dim,
            particles: self.particles,
            matrix: m,
        }
    }

    /// Kronecker product with `self` on the leading particles.
    pub fn tensor(&self, other: &Self) -> Result<Self> {
        if self.dim != other.dim {
            return Err(Error::DimensionMismatch(format!(
                "tensor of dimensions {} and {}",
                self.dim, other.dim
            )));
        }
        Self::new(
            self.dim,
            self.particles + other.particles,
            self.matrix.kronecker(&other.matrix),
        )
    }

    /// `n`-fold tensor power.
    pub fn tensor_power(&self, n: usize) -> Result<Self> {
        if n == 0 {
            return Err(Error::invalid("n", "tensor power must be positive"));
        }
        let mut acc = self.clone();
        for _ in 1..n {
            acc = acc.tensor(self)?;
        }
        Ok(acc)
    }

    /// Partial trace over `traced`; the remaining labels keep their order.
    /// Tracing every label is rejected, use [`ManyBodyOperator::trace`].
    pub fn partial_trace(&self, traced: &[usize]) -> Result<Self> {
        check_labels(traced, self.particles)?;
        if traced.is_empty() {
            return Ok(self.clone());
        }
        if traced.len() == self.particles {
            return Err(Error::invalid(
                "traced",
                "cannot trace out every particle; use the scalar trace",
            ));
        }
        let kept: Vec<usize> = (1..=self.particles)
            .filter(|l| !traced.contains(l))
            .collect();
        let keep = LabelLayout::new(self.dim, self.particles, &kept);
        let drop = LabelLayout::new(self.dim, self.particles, traced);
        let n = keep.offsets.len();
        let mut out = CMatrix::zeros(n, n);
        for j in 0..n {
            for i in 0..n {
                let mut acc = C64::new(0.0, 0.0);
                for &t in &drop.offsets {
                    acc += self.matrix[(keep.offsets[i] + t, keep.offsets[j] + t)];
                }
                out[(i, j)] = acc;
            }
        }
        Self::new(self.dim, kept.len(), out)
    }

    /// Partial trace over the trailing particles `from..=particle_count`.
    pub fn trace_out_from(&self, from: usize) -> Result<Self> {
        let traced: Vec<usize> = (from..=self.particles).collect();
        self.partial_trace(&traced)
    }

    /// Sum of singular values.
    pub fn trace_norm(&self) -> f64 {
        let svd = self.matrix.clone().svd(false, false);
        svd.singular_values.iter().sum()
    }

    /// Acts as `self` on `labels` (in the given order) and as the identity on
    /// the remaining particles of a `total`-particle system.
    pub fn embed(&self, labels: &[usize], total: usize) -> Result<Self> {
        if labels.len() != self.particles {
            return Err(Error::DimensionMismatch(format!(
                "{} labels for a {}-particle operator",
                labels.len(),
                self.particles
            )));
        }
        check_labels(labels, total)?;
        let layout = LabelLayout::new(self.dim, total, labels);
        let side = self.dim.pow(total as u32);
        let mut out = CMatrix::zeros(side, side);
        for c in 0..side {
            for r in 0..side {
                if layout.base[r] == layout.base[c] {
                    out[(r, c)] = self.matrix[(layout.sub[r], layout.sub[c])];
                }
            }
        }
        Self::new(self.dim, total, out)
    }

    /// `op * self` where `op` acts on `labels`.
    pub fn left_apply(&self, op: &CMatrix, labels: &[usize]) -> Self {
        let layout = LabelLayout::new(self.dim, self.particles, labels);
        Self {
            dim: self.dim,
            particles: self.particles,
            matrix: layout.left_apply(op, &self.matrix),
        }
    }

    /// `self * op` where `op` acts on `labels`.
    pub fn right_apply(&self, op: &CMatrix, labels: &[usize]) -> Self {
        let layout = LabelLayout::new(self.dim, self.particles, labels);
        Self {
            dim: self.dim,
            particles: self.particles,
            matrix: layout.right_apply(&self.matrix, op),
        }
    }

    /// `u * self * u^†` with `u` acting on `labels`.
    pub fn conjugate_on(&self, u: &CMatrix, labels: &[usize]) -> Self {
        if labels.len() == self.particles && labels.iter().enumerate().all(|(i, &l)| l == i + 1) {
            return Self {
                dim: self.dim,
                particles: self.particles,
                matrix: u * &self.matrix * u.adjoint(),
            };
        }
        let layout = LabelLayout::new(self.dim, self.particles, labels);
        let left = layout.left_apply(u, &self.matrix);
        Self {
            dim: self.dim,
            particles: self.particles,
            matrix: layout.right_apply(&left, &u.adjoint()),
        }
    }

    /// Commutator `[op, self]` with `op` acting on `labels`.
    pub fn commutator_on(&self, op: &CMatrix, labels: &[usize]) -> Self {
        let layout = LabelLayout::new(self.dim, self.particles, labels);
        let l = layout.left_apply(op, &self.matrix);
        let r = layout.right_apply(&self.matrix, op);
        Self {
            dim: self.dim,
            particles: self.particles,
            matrix: l - r,
        }
    }
}

impl Add for &ManyBodyOperator {
    type Output = ManyBodyOperator;
    fn add(self, rhs: &ManyBodyOperator) -> ManyBodyOperator {
        assert!(self.same_shape(rhs), "shape mismatch in add");
        ManyBodyOperator {
            dim: self.dim,
            particles: self.particles,
            matrix: &self.matrix + &rhs.matrix,
        }
    }
}

impl Sub for &ManyBodyOperator {
    type Output = ManyBodyOperator;
    fn sub(self, rhs: &ManyBodyOperator) -> ManyBodyOperator {
        assert!(self.same_shape(rhs), "shape mismatch in sub");
        ManyBodyOperator {
            dim: self.dim,
            particles: self.particles,
            matrix: &self.matrix - &rhs.matrix,
        }
    }
}

impl AddAssign<&ManyBodyOperator> for ManyBodyOperator {
    fn add_assign(&mut self, rhs: &ManyBodyOperator) {
        assert!(self.same_shape(rhs), "shape mismatch in add_assign");
        self.matrix += &rhs.matrix;
    }
}

impl SubAssign<&ManyBodyOperator> for ManyBodyOperator {
    fn sub_assign(&mut self, rhs: &ManyBodyOperator) {
        assert!(self.same_shape(rhs), "shape mismatch in sub_assign");
        self.matrix -= &rhs.matrix;
    }
}

impl Mul<f64> for &ManyBodyOperator {
    type Output = ManyBodyOperator;
    fn mul(self, c: f64) -> ManyBodyOperator {
        self.scale_real(c)
    }
}

impl Neg for ManyBodyOperator {
    type Output = ManyBodyOperator;
    fn neg(mut self) -> ManyBodyOperator {
        self.matrix.neg_mut();
        self
    }
}

/// Eigendecomposition of a hermitian matrix, reusable for `exp(c h)` at many
/// values of `c`.
#[derive(Clone, Debug)]
pub struct HermitianSpectrum {
    values: DVector<f64>,
    vectors: CMatrix,
}

impl HermitianSpectrum {
    pub fn new(h: &CMatrix) -> Self {
        // symmetrize so tiny fp asymmetry cannot leak into the eigenvectors
        let sym = (h + h.adjoint()) * C64::new(0.5, 0.0);
        let eig = SymmetricEigen::new(sym);
        Self {
            values: eig.eigenvalues,
            vectors: eig.eigenvectors,
        }
    }

    pub fn eigenvalues(&self) -> &DVector<f64> {
        &self.values
    }

    /// `exp(scale * h)`.
    pub fn exp(&self, scale: C64) -> CMatrix {
        let n = self.values.len();
        let mut scaled = self.vectors.clone();
        for (j, &lambda) in self.values.iter().enumerate() {
            let phase = (scale * lambda).exp();
            for i in 0..n {
                scaled[(i, j)] *= phase;
            }
        }
        scaled * self.vectors.adjoint()
    }
}

/// `exp(scale * h)` for hermitian `h`, by eigendecomposition.
pub fn hermitian_exponential(h: &ManyBodyOperator, scale: C64) -> Result<ManyBodyOperator> {
    h.require_hermitian("exponent")?;
    let spectrum = HermitianSpectrum::new(h.matrix());
    ManyBodyOperator::new(h.dim(), h.particle_count(), spectrum.exp(scale))
}

fn check_labels(labels: &[usize], total: usize) -> Result<()> {
    for (k, &l) in labels.iter().enumerate() {
        if l == 0 || l > total {
            return Err(Error::LabelOutOfRange { label: l, total });
        }
        if labels[..k].contains(&l) {
            return Err(Error::LabelCollision(l));
        }
    }
    Ok(())
}

/// Index bookkeeping for an operator acting on a subset of particle labels.
///
/// For every full index `r`, `sub[r]` is the digit string restricted to the
/// target labels (first target label most significant) and `base[r]` is `r`
/// with those digits zeroed; `offsets[a]` is the full-index contribution of
/// the sub-index `a`, so `r == base[r] + offsets[sub[r]]`.
pub(crate) struct LabelLayout {
    sub: Vec<usize>,
    base: Vec<usize>,
    offsets: Vec<usize>,
}

impl LabelLayout {
    pub(crate) fn new(dim: usize, total: usize, labels: &[usize]) -> Self {
        let k = labels.len();
        let weights: Vec<usize> = labels
            .iter()
            .map(|&l| dim.pow((total - l) as u32))
            .collect();
        let sub_side = dim.pow(k as u32);
        let offsets: Vec<usize> = (0..sub_side)
            .map(|a| {
                let mut rem = a;
                let mut off = 0;
                for j in (0..k).rev() {
                    off += (rem % dim) * weights[j];
                    rem /= dim;
                }
                off
            })
            .collect();
        let side = dim.pow(total as u32);
        let mut sub = Vec::with_capacity(side);
        let mut base = Vec::with_capacity(side);
        for r in 0..side {
            let mut a = 0;
            for &w in &weights {
                a = a * dim + (r / w) % dim;
            }
            sub.push(a);
            base.push(r - offsets[a]);
        }
        Self { sub, base, offsets }
    }

    fn left_apply(&self, op: &CMatrix, x: &CMatrix) -> CMatrix {
        let n = x.nrows();
        let k = self.offsets.len();
        let mut out = CMatrix::zeros(n, n);
        for c in 0..n {
            for r in 0..n {
                let a = self.sub[r];
                let b0 = self.base[r];
                let mut acc = C64::new(0.0, 0.0);
                for b in 0..k {
                    let o = op[(a, b)];
                    if o.re != 0.0 || o.im != 0.0 {
                        acc += o * x[(b0 + self.offsets[b], c)];
                    }
                }
                out[(r, c)] = acc;
            }
        }
        out
    }

    fn right_apply(&self, x: &CMatrix, op: &CMatrix) -> CMatrix {
        let n = x.nrows();
        let k = self.offsets.len();
        let mut out = CMatrix::zeros(n, n);
        for c in 0..n {
            let a = self.sub[c];
            let b0 = self.base[c];
            for b in 0..k {
                let o = op[(b, a)];
                if o.re == 0.0 && o.im == 0.0 {
                    continue;
                }
                let src = b0 + self.offsets[b];
                for r in 0..n {
                    out[(r, c)] += x[(r, src)] * o;
                }
            }
        }
        out
    }
}
