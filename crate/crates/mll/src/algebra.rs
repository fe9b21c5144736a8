//! Constant matrices and bilinear forms of the 1-D system with alpha = 1, M0 = e1.

use nalgebra::{SMatrix, SVector};
use num_complex::Complex64;
use std::ops::{Add, AddAssign, Index, IndexMut, Mul, Neg, Sub, SubAssign};

use crate::error::AlgebraError;
use crate::spectral::Phase;

pub type C64 = Complex64;
pub type Mat9 = SMatrix<C64, 9, 9>;
pub type Vec9 = SVector<C64, 9>;

pub const ZERO: C64 = C64::new(0.0, 0.0);
pub const I: C64 = C64::new(0.0, 1.0);

/// Eigenvalues of i L_p below this fraction of the largest count as zero.
pub const RANK_TOL: f64 = 1e-9;
// Band around RANK_TOL inside which an eigenvalue is neither clearly zero nor clearly not.
const AMBIGUOUS_LO: f64 = 1e-12;
const AMBIGUOUS_HI: f64 = 1e-6;

pub fn c(re: f64, im: f64) -> C64 {
    C64::new(re, im)
}

pub fn cross(a: [C64; 3], b: [C64; 3]) -> [C64; 3] {
    [
        a[1] * b[2] - a[2] * b[1],
        a[2] * b[0] - a[0] * b[2],
        a[0] * b[1] - a[1] * b[0],
    ]
}

/// e1 x a
fn e1_cross(a: [C64; 3]) -> [C64; 3] {
    [ZERO, -a[2], a[1]]
}

/// Pointwise unknown (E, H, M), stored as nine contiguous components.
#[derive(Clone, Copy, Debug, PartialEq, Default)]
pub struct StateVector(pub [C64; 9]);

impl StateVector {
    pub const ZERO: StateVector = StateVector([ZERO; 9]);

    pub fn new(e: [C64; 3], h: [C64; 3], m: [C64; 3]) -> Self {
        StateVector([e[0], e[1], e[2], h[0], h[1], h[2], m[0], m[1], m[2]])
    }

    pub fn from_real(v: [f64; 9]) -> Self {
        StateVector(v.map(|x| c(x, 0.0)))
    }

    pub fn e(&self) -> [C64; 3] {
        [self.0[0], self.0[1], self.0[2]]
    }
    pub fn h(&self) -> [C64; 3] {
        [self.0[3], self.0[4], self.0[5]]
    }
    pub fn m(&self) -> [C64; 3] {
        [self.0[6], self.0[7], self.0[8]]
    }

    /// Hermitian inner product (self|other) = sum self_i conj(other_i).
    pub fn dot(&self, other: &StateVector) -> C64 {
        self.0.iter().zip(other.0.iter()).map(|(a, b)| a * b.conj()).sum()
    }

    pub fn norm_sqr(&self) -> f64 {
        self.0.iter().map(|z| z.norm_sqr()).sum()
    }

    pub fn norm(&self) -> f64 {
        self.norm_sqr().sqrt()
    }

    pub fn max_abs(&self) -> f64 {
        self.0.iter().fold(0.0, |m, z| m.max(z.norm()))
    }

    pub fn conj(&self) -> Self {
        StateVector(self.0.map(|z| z.conj()))
    }

    pub fn scale(&self, s: C64) -> Self {
        StateVector(self.0.map(|z| z * s))
    }

    pub fn to_vec9(&self) -> Vec9 {
        Vec9::from_column_slice(&self.0)
    }

    pub fn from_vec9(v: &Vec9) -> Self {
        let mut out = [ZERO; 9];
        out.copy_from_slice(v.as_slice());
        StateVector(out)
    }

    pub fn apply(&self, m: &Mat9) -> Self {
        let mut out = [ZERO; 9];
        for (i, o) in out.iter_mut().enumerate() {
            let mut s = ZERO;
            for j in 0..9 {
                s += m[(i, j)] * self.0[j];
            }
            *o = s;
        }
        StateVector(out)
    }

    /// Pi_0 part (indices outside 0, 3, 6).
    pub fn pi0(&self) -> Self {
        let mut out = *self;
        for i in PIS_INDICES {
            out.0[i] = ZERO;
        }
        out
    }

    /// Pi_s part (E1, H1, M1).
    pub fn pis(&self) -> Self {
        let mut out = StateVector::ZERO;
        for i in PIS_INDICES {
            out.0[i] = self.0[i];
        }
        out
    }
}

impl Index<usize> for StateVector {
    type Output = C64;
    fn index(&self, i: usize) -> &C64 {
        &self.0[i]
    }
}

impl IndexMut<usize> for StateVector {
    fn index_mut(&mut self, i: usize) -> &mut C64 {
        &mut self.0[i]
    }
}

impl Add for StateVector {
    type Output = StateVector;
    fn add(mut self, rhs: StateVector) -> StateVector {
        self += rhs;
        self
    }
}

impl AddAssign for StateVector {
    fn add_assign(&mut self, rhs: StateVector) {
        for i in 0..9 {
            self.0[i] += rhs.0[i];
        }
    }
}

impl Sub for StateVector {
    type Output = StateVector;
    fn sub(mut self, rhs: StateVector) -> StateVector {
        self -= rhs;
        self
    }
}

impl SubAssign for StateVector {
    fn sub_assign(&mut self, rhs: StateVector) {
        for i in 0..9 {
            self.0[i] -= rhs.0[i];
        }
    }
}

impl Neg for StateVector {
    type Output = StateVector;
    fn neg(self) -> StateVector {
        StateVector(self.0.map(|z| -z))
    }
}

impl Mul<C64> for StateVector {
    type Output = StateVector;
    fn mul(self, s: C64) -> StateVector {
        self.scale(s)
    }
}

impl Mul<f64> for StateVector {
    type Output = StateVector;
    fn mul(self, s: f64) -> StateVector {
        StateVector(self.0.map(|z| z * s))
    }
}

impl Mul<StateVector> for C64 {
    type Output = StateVector;
    fn mul(self, v: StateVector) -> StateVector {
        v.scale(self)
    }
}

impl Mul<StateVector> for f64 {
    type Output = StateVector;
    fn mul(self, v: StateVector) -> StateVector {
        v * self
    }
}

pub const PIS_INDICES: [usize; 3] = [0, 3, 6];
pub const PI0_INDICES: [usize; 6] = [1, 2, 4, 5, 7, 8];

/// (-e1 x h, e1 x e, 0)
pub fn apply_a(u: &StateVector) -> StateVector {
    let h = e1_cross(u.h());
    let e = e1_cross(u.e());
    StateVector::new([-h[0], -h[1], -h[2]], e, [ZERO; 3])
}

/// (0, -e1 x h + e1 x m, e1 x h - e1 x m)
pub fn apply_l0(u: &StateVector) -> StateVector {
    let xh = e1_cross(u.h());
    let xm = e1_cross(u.m());
    let d = [xm[0] - xh[0], xm[1] - xh[1], xm[2] - xh[2]];
    StateVector::new([ZERO; 3], d, [-d[0], -d[1], -d[2]])
}

/// 1/2 (0, s, -s) with s = m_u x h_v + m_v x h_u.
pub fn bilinear_b(u: &StateVector, v: &StateVector) -> StateVector {
    let a = cross(u.m(), v.h());
    let b = cross(v.m(), u.h());
    let s = [
        0.5 * (a[0] + b[0]),
        0.5 * (a[1] + b[1]),
        0.5 * (a[2] + b[2]),
    ];
    StateVector::new([ZERO; 3], s, [-s[0], -s[1], -s[2]])
}

fn matrix_of(f: impl Fn(&StateVector) -> StateVector) -> Mat9 {
    let mut m = Mat9::zeros();
    for j in 0..9 {
        let mut e = StateVector::ZERO;
        e.0[j] = c(1.0, 0.0);
        let col = f(&e);
        for i in 0..9 {
            m[(i, j)] = col.0[i];
        }
    }
    m
}

/// A(e1) and L0 as dense matrices.
#[derive(Clone, Debug)]
pub struct SystemMatrices {
    pub a1: Mat9,
    pub l0: Mat9,
}

impl SystemMatrices {
    pub fn new() -> Self {
        SystemMatrices {
            a1: matrix_of(apply_a),
            l0: matrix_of(apply_l0),
        }
    }
}

impl Default for SystemMatrices {
    fn default() -> Self {
        Self::new()
    }
}

pub fn a1_matrix() -> Mat9 {
    matrix_of(apply_a)
}

pub fn l0_matrix() -> Mat9 {
    matrix_of(apply_l0)
}

pub fn diag9(d: [f64; 9]) -> Mat9 {
    Mat9::from_diagonal(&Vec9::from_iterator(d.iter().map(|&x| c(x, 0.0))))
}

/// Constant total projector onto the six nonzero branches.
pub fn pi0_total() -> Mat9 {
    diag9([0.0, 1.0, 1.0, 0.0, 1.0, 1.0, 0.0, 1.0, 1.0])
}

/// Constant total projector onto the zero branches.
pub fn pis_total() -> Mat9 {
    diag9([1.0, 0.0, 0.0, 1.0, 0.0, 0.0, 1.0, 0.0, 0.0])
}

/// Block form of the projector onto ker L0: diag(I, [[J1, J2], [J2, J1]]).
pub fn pi0_kernel_explicit() -> Mat9 {
    let j1 = [1.0, 0.5, 0.5];
    let j2 = [0.0, 0.5, 0.5];
    let mut m = Mat9::zeros();
    for i in 0..3 {
        m[(i, i)] = c(1.0, 0.0);
        m[(3 + i, 3 + i)] = c(j1[i], 0.0);
        m[(6 + i, 6 + i)] = c(j1[i], 0.0);
        m[(3 + i, 6 + i)] = c(j2[i], 0.0);
        m[(6 + i, 3 + i)] = c(j2[i], 0.0);
    }
    m
}

/// The seven generators of ker L0.
pub fn kernel_l0_generators() -> [StateVector; 7] {
    let one = c(1.0, 0.0);
    let mut g = [StateVector::ZERO; 7];
    g[0].0[0] = one;
    g[1].0[1] = one;
    g[2].0[2] = one;
    g[3].0[3] = one;
    g[4].0[4] = one;
    g[4].0[7] = one;
    g[5].0[5] = one;
    g[5].0[8] = one;
    g[6].0[6] = one;
    g
}

/// L_p with its kernel projector and partial inverse.
#[derive(Clone, Debug)]
pub struct HarmonicMatrix {
    pub p: i32,
    pub omega: f64,
    pub k: f64,
    pub lp: Mat9,
    pub pip: Mat9,
    pub lp_pinv: Mat9,
    pub rank: usize,
}

/// L_p = -i p omega + i p k A(e1) + L0
pub fn lp_matrix(p: i32, omega: f64, k: f64) -> Mat9 {
    let pf = p as f64;
    let mut m = a1_matrix() * c(0.0, pf * k) + l0_matrix();
    for i in 0..9 {
        m[(i, i)] -= c(0.0, pf * omega);
    }
    m
}

pub fn harmonic_matrix(p: i32, phase: &Phase) -> Result<HarmonicMatrix, AlgebraError> {
    harmonic_matrix_raw(p, phase.omega, phase.k)
}

/// Same as `harmonic_matrix` for an arbitrary (omega, k) pair.
///
/// L_p is skew-Hermitian, so i L_p = sum mu_j v_j v_j^* and L_p^{-1} = i sum_{mu_j != 0} v_j v_j^* / mu_j.
pub fn harmonic_matrix_raw(p: i32, omega: f64, k: f64) -> Result<HarmonicMatrix, AlgebraError> {
    let lp = lp_matrix(p, omega, k);
    let herm = lp * I;
    let herm = (herm + herm.adjoint()) * c(0.5, 0.0);
    let eig = nalgebra::SymmetricEigen::new(herm);
    let smax = eig.eigenvalues.iter().fold(0.0f64, |m, x| m.max(x.abs()));
    let mut pinv = Mat9::zeros();
    let mut pip = Mat9::zeros();
    let mut rank = 0;
    for (i, &mu) in eig.eigenvalues.iter().enumerate() {
        let v = eig.eigenvectors.column(i);
        let outer = v * v.adjoint();
        let r = if smax > 0.0 { mu.abs() / smax } else { 0.0 };
        if r > AMBIGUOUS_LO && r < AMBIGUOUS_HI {
            return Err(AlgebraError::DegenerateKernel { p, ratio: r });
        }
        if r <= RANK_TOL {
            pip += outer;
        } else {
            rank += 1;
            pinv += outer * c(0.0, 1.0 / mu);
        }
    }
    Ok(HarmonicMatrix {
        p,
        omega,
        k,
        lp,
        pip,
        lp_pinv: pinv,
        rank,
    })
}

pub fn max_abs(m: &Mat9) -> f64 {
    m.iter().fold(0.0, |a, z| a.max(z.norm()))
}
