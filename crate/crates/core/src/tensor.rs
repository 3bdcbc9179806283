//! Symmetric second-order and minor-symmetric fourth-order tensors in Mandel form.
//!
//! A symmetric tensor `S` is stored as the 6-vector
//! `(S11, S22, S33, √2 S23, √2 S13, √2 S12)`, so the double contraction
//! `S : T = Σ Sij Tij` is the ordinary dot product of the two vectors, and a
//! fourth-order tensor acting on symmetric tensors is an ordinary 6×6 matrix.

use std::ops::{Add, AddAssign, Mul, Neg, Sub, SubAssign};

use nalgebra::{Matrix3, Matrix6, Vector6};

use crate::error::{Error, Result};

pub const SQRT_2: f64 = std::f64::consts::SQRT_2;

/// Index pairs `(i, j)` for each Mandel slot.
pub const MANDEL_PAIRS: [(usize, usize); 6] = [(0, 0), (1, 1), (2, 2), (1, 2), (0, 2), (0, 1)];

/// Condition number beyond which [`Tensor4::invert`] refuses to invert.
pub const MAX_CONDITION: f64 = 1e14;

#[inline]
fn mandel_weight(slot: usize) -> f64 {
    if slot < 3 {
        1.0
    } else {
        SQRT_2
    }
}

/// Mandel slot of the symmetric index pair `(i, j)`.
#[inline]
pub fn mandel_slot(i: usize, j: usize) -> usize {
    match (i.min(j), i.max(j)) {
        (0, 0) => 0,
        (1, 1) => 1,
        (2, 2) => 2,
        (1, 2) => 3,
        (0, 2) => 4,
        (0, 1) => 5,
        _ => panic!("index out of range: ({i}, {j})"),
    }
}

/// Symmetric second-order tensor (stress, strain, Biot tensor, Skempton tensor).
#[derive(Clone, Copy, Debug, PartialEq, Default)]
pub struct SymTensor2 {
    m: Vector6<f64>,
}

impl SymTensor2 {
    pub fn zero() -> Self {
        Self { m: Vector6::zeros() }
    }

    pub fn identity() -> Self {
        Self::from_mandel([1.0, 1.0, 1.0, 0.0, 0.0, 0.0])
    }

    pub fn from_mandel(m: [f64; 6]) -> Self {
        Self { m: Vector6::from(m) }
    }

    pub fn from_mandel_vector(m: Vector6<f64>) -> Self {
        Self { m }
    }

    /// Builds from the tensor components in Voigt order `xx, yy, zz, yz, xz, xy`
    /// (no shear scaling).
    pub fn from_components(xx: f64, yy: f64, zz: f64, yz: f64, xz: f64, xy: f64) -> Self {
        Self::from_mandel([xx, yy, zz, SQRT_2 * yz, SQRT_2 * xz, SQRT_2 * xy])
    }

    pub fn diag(a: f64, b: f64, c: f64) -> Self {
        Self::from_components(a, b, c, 0.0, 0.0, 0.0)
    }

    /// Builds from a full 3×3 matrix, which must be symmetric to within `1e-12` of its largest entry.
    pub fn from_matrix(a: &[[f64; 3]; 3]) -> Result<Self> {
        let scale = a.iter().flatten().fold(0.0_f64, |s, v| s.max(v.abs()));
        for (i, j) in [(0, 1), (0, 2), (1, 2)] {
            if (a[i][j] - a[j][i]).abs() > 1e-12 * scale {
                return Err(Error::Dimension(format!(
                    "matrix is not symmetric at ({i}, {j}): {} vs {}",
                    a[i][j], a[j][i]
                )));
            }
        }
        Ok(Self::from_components(a[0][0], a[1][1], a[2][2], a[1][2], a[0][2], a[0][1]))
    }

    /// Symmetric part `½(A + Aᵀ)` of an arbitrary 3×3 matrix.
    pub fn sym_part(a: &[[f64; 3]; 3]) -> Self {
        let s = |i: usize, j: usize| 0.5 * (a[i][j] + a[j][i]);
        Self::from_components(s(0, 0), s(1, 1), s(2, 2), s(1, 2), s(0, 2), s(0, 1))
    }

    pub fn mandel(&self) -> &Vector6<f64> {
        &self.m
    }

    pub fn to_array(&self) -> [f64; 6] {
        self.m.into()
    }

    /// Tensor component `S_ij`.
    pub fn get(&self, i: usize, j: usize) -> f64 {
        let slot = mandel_slot(i, j);
        self.m[slot] / mandel_weight(slot)
    }

    pub fn to_matrix(&self) -> [[f64; 3]; 3] {
        let mut a = [[0.0; 3]; 3];
        for (i, row) in a.iter_mut().enumerate() {
            for (j, v) in row.iter_mut().enumerate() {
                *v = self.get(i, j);
            }
        }
        a
    }

    pub fn to_matrix3(&self) -> Matrix3<f64> {
        Matrix3::from_fn(|i, j| self.get(i, j))
    }

    pub fn trace(&self) -> f64 {
        self.m[0] + self.m[1] + self.m[2]
    }

    pub fn deviator(&self) -> Self {
        let mean = self.trace() / 3.0;
        let mut m = self.m;
        for v in m.iter_mut().take(3) {
            *v -= mean;
        }
        Self { m }
    }

    /// Frobenius norm `√(S:S)`.
    pub fn norm(&self) -> f64 {
        self.m.norm()
    }

    pub fn ddot(&self, other: &SymTensor2) -> f64 {
        self.m.dot(&other.m)
    }

    /// Von Mises equivalent value `√(3/2)‖dev S‖`.
    pub fn von_mises(&self) -> f64 {
        (1.5_f64).sqrt() * self.deviator().norm()
    }
}

/// Double contraction `S : T = Σ_ij S_ij T_ij`.
#[inline]
pub fn ddot(s: &SymTensor2, t: &SymTensor2) -> f64 {
    s.ddot(t)
}

impl Add for SymTensor2 {
    type Output = SymTensor2;
    fn add(self, rhs: SymTensor2) -> SymTensor2 {
        SymTensor2 { m: self.m + rhs.m }
    }
}

impl Sub for SymTensor2 {
    type Output = SymTensor2;
    fn sub(self, rhs: SymTensor2) -> SymTensor2 {
        SymTensor2 { m: self.m - rhs.m }
    }
}

impl AddAssign for SymTensor2 {
    fn add_assign(&mut self, rhs: SymTensor2) {
        self.m += rhs.m;
    }
}

impl SubAssign for SymTensor2 {
    fn sub_assign(&mut self, rhs: SymTensor2) {
        self.m -= rhs.m;
    }
}

impl Neg for SymTensor2 {
    type Output = SymTensor2;
    fn neg(self) -> SymTensor2 {
        SymTensor2 { m: -self.m }
    }
}

impl Mul<f64> for SymTensor2 {
    type Output = SymTensor2;
    fn mul(self, rhs: f64) -> SymTensor2 {
        SymTensor2 { m: self.m * rhs }
    }
}

impl Mul<SymTensor2> for f64 {
    type Output = SymTensor2;
    fn mul(self, rhs: SymTensor2) -> SymTensor2 {
        rhs * self
    }
}

/// Minor-symmetric fourth-order tensor stored as a 6×6 Mandel matrix.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Tensor4 {
    m: Matrix6<f64>,
}

impl Default for Tensor4 {
    fn default() -> Self {
        Self::zero()
    }
}

impl Tensor4 {
    pub fn zero() -> Self {
        Self { m: Matrix6::zeros() }
    }

    /// Fourth-order symmetric identity: maps every symmetric `S` to itself.
    pub fn identity() -> Self {
        Self { m: Matrix6::identity() }
    }

    pub fn from_mandel(m: Matrix6<f64>) -> Self {
        Self { m }
    }

    /// Builds from index-notation components `P_ijkl`, which must have minor symmetries.
    pub fn from_components(p: impl Fn(usize, usize, usize, usize) -> f64) -> Self {
        let m = Matrix6::from_fn(|a, b| {
            let (i, j) = MANDEL_PAIRS[a];
            let (k, l) = MANDEL_PAIRS[b];
            mandel_weight(a) * mandel_weight(b) * p(i, j, k, l)
        });
        Self { m }
    }

    /// Component `P_ijkl`.
    pub fn get(&self, i: usize, j: usize, k: usize, l: usize) -> f64 {
        let a = mandel_slot(i, j);
        let b = mandel_slot(k, l);
        self.m[(a, b)] / (mandel_weight(a) * mandel_weight(b))
    }

    /// Isotropic stiffness from bulk and shear moduli: `3K P_vol + 2G P_dev`.
    pub fn isotropic(bulk: f64, shear: f64) -> Self {
        let ii = Self::dyad(&SymTensor2::identity(), &SymTensor2::identity());
        let p_vol = ii.m / 3.0;
        let p_dev = Matrix6::identity() - p_vol;
        Self { m: p_vol * (3.0 * bulk) + p_dev * (2.0 * shear) }
    }

    /// Deviatoric projector `I − ⅓ I⊗I`.
    pub fn deviatoric_projector() -> Self {
        let ii = Self::dyad(&SymTensor2::identity(), &SymTensor2::identity());
        Self { m: Matrix6::identity() - ii.m / 3.0 }
    }

    pub fn mandel(&self) -> &Matrix6<f64> {
        &self.m
    }

    /// `(S ⊗ T)_ijkl = S_ij T_kl`.
    pub fn dyad(s: &SymTensor2, t: &SymTensor2) -> Self {
        Self { m: s.mandel() * t.mandel().transpose() }
    }

    pub fn apply(&self, s: &SymTensor2) -> SymTensor2 {
        SymTensor2::from_mandel_vector(self.m * s.mandel())
    }

    pub fn transpose(&self) -> Self {
        Self { m: self.m.transpose() }
    }

    /// `S : P : T`.
    pub fn quadratic(&self, s: &SymTensor2, t: &SymTensor2) -> f64 {
        s.mandel().dot(&(self.m * t.mandel()))
    }

    pub fn is_major_symmetric(&self, rel_tol: f64) -> bool {
        let scale = self.m.amax().max(f64::MIN_POSITIVE);
        (self.m - self.m.transpose()).amax() <= rel_tol * scale
    }

    /// Ratio of the extreme singular values of the Mandel matrix.
    pub fn condition_number(&self) -> f64 {
        let sv = self.m.singular_values();
        let max = sv.max();
        let min = sv.min();
        if min == 0.0 {
            f64::INFINITY
        } else {
            max / min
        }
    }

    /// Direct inverse of the 6×6 Mandel matrix.
    pub fn invert(&self) -> Result<Self> {
        let cond = self.condition_number();
        if !(cond <= MAX_CONDITION) {
            return Err(Error::Singular(format!("fourth-order tensor condition estimate {cond:e}")));
        }
        self.m
            .try_inverse()
            .map(|m| Self { m })
            .ok_or_else(|| Error::Singular("fourth-order tensor LU breakdown".into()))
    }
}

/// `ℙ S` with `(ℙS)_ij = ℙ_ijkl S_kl`.
#[inline]
pub fn apply4(p: &Tensor4, s: &SymTensor2) -> SymTensor2 {
    p.apply(s)
}

#[inline]
pub fn dyad(s: &SymTensor2, t: &SymTensor2) -> Tensor4 {
    Tensor4::dyad(s, t)
}

#[inline]
pub fn invert6(p: &Tensor4) -> Result<Tensor4> {
    p.invert()
}

impl Add for Tensor4 {
    type Output = Tensor4;
    fn add(self, rhs: Tensor4) -> Tensor4 {
        Tensor4 { m: self.m + rhs.m }
    }
}

impl Sub for Tensor4 {
    type Output = Tensor4;
    fn sub(self, rhs: Tensor4) -> Tensor4 {
        Tensor4 { m: self.m - rhs.m }
    }
}

impl Mul<f64> for Tensor4 {
    type Output = Tensor4;
    fn mul(self, rhs: f64) -> Tensor4 {
        Tensor4 { m: self.m * rhs }
    }
}

impl Mul<Tensor4> for Tensor4 {
    type Output = Tensor4;
    fn mul(self, rhs: Tensor4) -> Tensor4 {
        Tensor4 { m: self.m * rhs.m }
    }
}

/// Full double contraction of two arbitrary 3×3 matrices.
pub fn contract_full(a: &[[f64; 3]; 3], b: &[[f64; 3]; 3]) -> f64 {
    let mut s = 0.0;
    for i in 0..3 {
        for j in 0..3 {
            s += a[i][j] * b[i][j];
        }
    }
    s
}

/// Splits a 3×3 matrix into symmetric and skew-symmetric parts.
pub fn split_sym_skew(a: &[[f64; 3]; 3]) -> ([[f64; 3]; 3], [[f64; 3]; 3]) {
    let mut sym = [[0.0; 3]; 3];
    let mut skew = [[0.0; 3]; 3];
    for i in 0..3 {
        for j in 0..3 {
            sym[i][j] = 0.5 * (a[i][j] + a[j][i]);
            skew[i][j] = 0.5 * (a[i][j] - a[j][i]);
        }
    }
    (sym, skew)
}
