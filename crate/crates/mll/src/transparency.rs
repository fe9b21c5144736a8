//! Weak/strong transparency and the normal-form bilinear kernel J.

use nalgebra::DMatrix;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::algebra::{bilinear_b, c, StateVector, C64, ZERO};
use crate::error::{GridError, SpectralError};
use crate::profile::{ProfileFft, ThetaProfile};
use crate::spectral::{
    branch_eigenvalue, branch_vector, decompose, q_vector, EigenDecomposition, Phase, Sign,
};

/// Numerators below this count as an identically vanishing product.
pub const ZERO_NUMERATOR: f64 = 1e-13;

/// The direction (0, -e1, e1) carrying every Pi_s B value.
pub fn e_vec() -> StateVector {
    let mut v = StateVector::ZERO;
    v.0[3] = c(-1.0, 0.0);
    v.0[6] = c(1.0, 0.0);
    v
}

pub fn pis_b(u: &StateVector, v: &StateVector) -> StateVector {
    bilinear_b(u, v).pis()
}

// Pi_s B(u, v) = beta(u, v) (0, e1, -e1); this is beta.
fn beta(u: &StateVector, v: &StateVector) -> C64 {
    bilinear_b(u, v).0[3]
}

fn range_basis(d: &EigenDecomposition, j: usize) -> Vec<StateVector> {
    d.group_of(j)
        .branches
        .iter()
        .map(|&b| d.vectors[b - 1])
        .collect()
}

/// Largest singular value of a small complex matrix, via the eigenvalues of G^* G.
fn sigma_max(m: &DMatrix<C64>) -> f64 {
    if m.nrows() == 1 && m.ncols() == 1 {
        return m[(0, 0)].norm();
    }
    if m.norm() < ZERO_NUMERATOR {
        return 0.0;
    }
    let g = m.adjoint() * m;
    let top = nalgebra::SymmetricEigen::new(g).eigenvalues.iter().cloned().fold(0.0, f64::max);
    top.max(0.0).sqrt()
}

fn ratio_from(dx: &EigenDecomposition, de: &EigenDecomposition, j: usize, j2: usize) -> f64 {
    let ba = range_basis(dx, j);
    let bb = range_basis(de, j2);
    let g = DMatrix::from_fn(ba.len(), bb.len(), |r, s| beta(&ba[r], &bb[s]));
    let num = std::f64::consts::SQRT_2 * sigma_max(&g);
    if num < ZERO_NUMERATOR {
        return 0.0;
    }
    let den = (dx.group_of(j).lambda + de.group_of(j2).lambda).abs();
    num / den
}

/// sup over unit u, v of |Pi_s B(Pi_j(xi) u, Pi_j2(eta) v)| / |lambda_j(xi) + lambda_j2(eta)|.
pub fn strong_transparency_ratio(xi: f64, eta: f64, j: usize, j2: usize) -> f64 {
    ratio_from(&decompose(xi), &decompose(eta), j, j2)
}

/// (i/2)(gamma_j(xi) - gamma_j2(eta))(delta_j - delta_j2)(0, -e1, e1)
pub fn closed_form_value(xi: f64, eta: f64, j: usize, j2: usize) -> Result<StateVector, SpectralError> {
    let (lj, lk) = (nonzero_lambda(xi, j)?, nonzero_lambda(eta, j2)?);
    let gj = 1.0 - (xi / lj).powi(2);
    let gk = 1.0 - (eta / lk).powi(2);
    let dd = Sign::of_branch(j).value() - Sign::of_branch(j2).value();
    Ok(e_vec() * c(0.0, 0.5 * (gj - gk) * dd))
}

/// Opposite-sign reduction: -i (lambda_j + lambda_j2) / ((lambda_j + delta_j)(lambda_j2 + delta_j2)).
pub fn reduced_form_value(xi: f64, eta: f64, j: usize, j2: usize) -> Result<StateVector, SpectralError> {
    let (dj, dk) = (Sign::of_branch(j).value(), Sign::of_branch(j2).value());
    if dj == dk {
        return Ok(StateVector::ZERO);
    }
    let (lj, lk) = (nonzero_lambda(xi, j)?, nonzero_lambda(eta, j2)?);
    Ok(e_vec() * c(0.0, -(lj + lk) / ((lj + dj) * (lk + dk))))
}

fn nonzero_lambda(xi: f64, j: usize) -> Result<f64, SpectralError> {
    if !(1..=6).contains(&j) {
        return Err(SpectralError::BadBranch(j));
    }
    let l = branch_eigenvalue(xi, j);
    if l.abs() < 1e-12 {
        return Err(SpectralError::ZeroEigenvalue { xi, j });
    }
    Ok(l)
}

/// |Pi_s B(Q_j(xi), Q_j2(eta)) - closed form|
pub fn closed_form_check(xi: f64, eta: f64, j: usize, j2: usize) -> Result<f64, SpectralError> {
    let direct = pis_b(&branch_vector(xi, j)?, &branch_vector(eta, j2)?);
    Ok((direct - closed_form_value(xi, eta, j, j2)?).norm())
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ScanGrid {
    pub xi_min: f64,
    pub xi_max: f64,
    pub n: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct WorstPoint {
    pub xi: f64,
    pub eta: f64,
    pub j: usize,
    pub j2: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TransparencyReport {
    pub grid: ScanGrid,
    pub max_ratio: f64,
    pub worst_point: WorstPoint,
    pub closed_form_max_err: f64,
    /// Largest ratio over same-sign pairs; zero when transparency holds.
    #[serde(skip)]
    pub same_sign_max: f64,
    /// Largest mismatch between the dense ratio and its closed form on simple branches.
    #[serde(skip)]
    pub ratio_formula_max_err: f64,
}

#[derive(Clone, Copy)]
struct Acc {
    max_ratio: f64,
    worst: (f64, f64, usize, usize),
    cf_err: f64,
    same: f64,
    formula_err: f64,
}

impl Acc {
    fn empty() -> Self {
        Acc {
            max_ratio: 0.0,
            worst: (0.0, 0.0, 0, 0),
            cf_err: 0.0,
            same: 0.0,
            formula_err: 0.0,
        }
    }

    fn merge(a: Acc, b: Acc) -> Acc {
        let (max_ratio, worst) = if b.max_ratio > a.max_ratio {
            (b.max_ratio, b.worst)
        } else {
            (a.max_ratio, a.worst)
        };
        Acc {
            max_ratio,
            worst,
            cf_err: a.cf_err.max(b.cf_err),
            same: a.same.max(b.same),
            formula_err: a.formula_err.max(b.formula_err),
        }
    }
}

/// Closed-form ratio for simple opposite-sign branches.
pub fn ratio_formula(xi: f64, eta: f64, j: usize, j2: usize) -> f64 {
    let (lj, lk) = (branch_eigenvalue(xi, j), branch_eigenvalue(eta, j2));
    let (dj, dk) = (Sign::of_branch(j).value(), Sign::of_branch(j2).value());
    let qj = branch_vector(xi, j).expect("nonzero branch").norm();
    let qk = branch_vector(eta, j2).expect("nonzero branch").norm();
    std::f64::consts::SQRT_2 / ((lj + dj) * (lk + dk) * qj * qk).abs()
}

// A merged group (xi = 0) can mix branches of both signs; same-sign vanishing only applies to pure groups.
fn sign_pure(d: &EigenDecomposition, j: usize) -> bool {
    let g = d.group_of(j);
    g.branches.iter().all(|&b| Sign::of_branch(b) == Sign::of_branch(j))
}

/// Exhaustive scan over an n x n grid of [-xi_max, xi_max]^2 and all 36 branch pairs.
pub fn transparency_scan(xi_max: f64, n: usize) -> TransparencyReport {
    let pts: Vec<f64> = (0..n)
        .map(|i| {
            if n == 1 {
                0.0
            } else {
                -xi_max + 2.0 * xi_max * i as f64 / (n - 1) as f64
            }
        })
        .collect();
    let decs: Vec<EigenDecomposition> = pts.par_iter().map(|&x| decompose(x)).collect();
    let qs: Vec<[Option<StateVector>; 6]> = pts
        .iter()
        .map(|&x| std::array::from_fn(|j| branch_vector(x, j + 1).ok()))
        .collect();

    let acc = (0..n * n)
        .into_par_iter()
        .map(|idx| {
            let (a, b) = (idx / n, idx % n);
            let mut acc = Acc::empty();
            for j in 1..=6 {
                for j2 in 1..=6 {
                    let r = ratio_from(&decs[a], &decs[b], j, j2);
                    if r > acc.max_ratio {
                        acc.max_ratio = r;
                        acc.worst = (pts[a], pts[b], j, j2);
                    }
                    let same = Sign::of_branch(j) == Sign::of_branch(j2);
                    if same && sign_pure(&decs[a], j) && sign_pure(&decs[b], j2) {
                        acc.same = acc.same.max(r);
                    }
                    if let (Some(qa), Some(qb)) = (&qs[a][j - 1], &qs[b][j2 - 1]) {
                        let direct = pis_b(qa, qb);
                        let cf = closed_form_value(pts[a], pts[b], j, j2).unwrap();
                        let rf = reduced_form_value(pts[a], pts[b], j, j2).unwrap();
                        acc.cf_err = acc.cf_err.max((direct - cf).norm()).max((direct - rf).norm());
                        let den = (decs[a].lambdas[j - 1] + decs[b].lambdas[j2 - 1]).abs();
                        if !same && decs[a].is_simple(j) && decs[b].is_simple(j2) && den > 1e-6 {
                            let f = ratio_formula(pts[a], pts[b], j, j2);
                            acc.formula_err = acc.formula_err.max((r - f).abs() / f.max(1e-300));
                        }
                    }
                }
            }
            acc
        })
        .reduce(Acc::empty, Acc::merge);

    TransparencyReport {
        grid: ScanGrid {
            xi_min: -xi_max,
            xi_max,
            n,
        },
        max_ratio: acc.max_ratio,
        worst_point: WorstPoint {
            xi: acc.worst.0,
            eta: acc.worst.1,
            j: acc.worst.2,
            j2: acc.worst.3,
        },
        closed_form_max_err: acc.cf_err,
        same_sign_max: acc.same,
        ratio_formula_max_err: acc.formula_err,
    }
}

/// r_minus, r_plus with s_pm(a) = (a | r_pm) = sum over delta_j = pm of c_j(a)/(lambda_j + delta_j).
pub fn kernel_vectors(xi: f64) -> (StateVector, StateVector) {
    let mut rm = StateVector::ZERO;
    let mut rp = StateVector::ZERO;
    for j in 1..=6 {
        let d = Sign::of_branch(j).value();
        let (q, lam_plus_d) = if xi == 0.0 {
            // xi -> 0 limit: small branches have xi/lambda = +-sqrt 2, gamma = -1
            let r2 = std::f64::consts::SQRT_2;
            match j {
                1 => (q_vector(0.0, d, 1.0), 2.0 + d),
                6 => (q_vector(0.0, d, 1.0), -2.0 + d),
                2 | 3 => (q_vector(r2, d, -1.0), d),
                _ => (q_vector(-r2, d, -1.0), d),
            }
        } else {
            let l = branch_eigenvalue(xi, j);
            (q_vector(xi / l, d, 1.0 - (xi / l).powi(2)), l + d)
        };
        let w = q * c(1.0 / (q.norm_sqr() * lam_plus_d), 0.0);
        if d < 0.0 {
            rm += w;
        } else {
            rp += w;
        }
    }
    (rm, rp)
}

/// Pointwise kernel J_pq(a, b) at argument frequencies xi1, xi2.
pub fn j_pq(a: &StateVector, xi1: f64, b: &StateVector, xi2: f64) -> StateVector {
    let (rm1, rp1) = kernel_vectors(xi1);
    let (rm2, rp2) = kernel_vectors(xi2);
    let s = a.dot(&rm1) * b.dot(&rp2) + a.dot(&rp1) * b.dot(&rm2);
    e_vec() * s
}

/// Precomputed per-mode kernel vectors for a grid, eps and phase.
#[derive(Clone, Debug)]
pub struct NormalFormKernel {
    pub phase: Phase,
    pub eps: f64,
    pub fft: ProfileFft,
    pub r_minus: Vec<StateVector>,
    pub r_plus: Vec<StateVector>,
}

impl NormalFormKernel {
    pub fn new(fft: &ProfileFft, eps: f64, phase: &Phase) -> Self {
        let g = fft.grid;
        let xis: Vec<f64> = g
            .harmonics()
            .flat_map(|p| (0..g.ny).map(move |n| eps * g.eta(n) + phase.k * p as f64))
            .collect();
        let (r_minus, r_plus): (Vec<_>, Vec<_>) = xis.par_iter().map(|&x| kernel_vectors(x)).unzip();
        NormalFormKernel {
            phase: *phase,
            eps,
            fft: fft.clone(),
            r_minus,
            r_plus,
        }
    }

    fn s_fields(&self, u: &ThetaProfile) -> (Vec<C64>, Vec<C64>) {
        let sm: Vec<C64> = u.coeffs.iter().zip(&self.r_minus).map(|(a, r)| a.dot(r)).collect();
        let sp: Vec<C64> = u.coeffs.iter().zip(&self.r_plus).map(|(a, r)| a.dot(r)).collect();
        (sm, sp)
    }

    /// J(U, V) with output truncated to |p| <= P and the 2/3 band in y.
    pub fn apply(&self, u: &ThetaProfile, v: &ThetaProfile) -> Result<ThetaProfile, GridError> {
        u.check_same_grid(v)?;
        if u.grid != self.fft.grid {
            return Err(GridError::Mismatch("kernel grid".into()));
        }
        let (um, up) = self.s_fields(u);
        let (vm, vp) = self.s_fields(v);
        let phys: Vec<Vec<C64>> = [um, up, vm, vp]
            .into_par_iter()
            .map(|s| self.fft.scalar_to_physical(&s))
            .collect();
        let prod: Vec<C64> = (0..self.fft.n_points())
            .map(|i| phys[0][i] * phys[3][i] + phys[1][i] * phys[2][i])
            .collect();
        let spec = self.fft.scalar_from_physical(prod, true);
        let ev = e_vec();
        let mut out = ThetaProfile::zeros(u.grid, u.eps);
        for (o, s) in out.coeffs.iter_mut().zip(spec) {
            if s != ZERO {
                *o = ev * s;
            }
        }
        Ok(out)
    }
}

/// apply_J for a one-off call; builds the kernel table.
pub fn apply_j(
    u: &ThetaProfile,
    v: &ThetaProfile,
    eps: f64,
    phase: &Phase,
) -> Result<ThetaProfile, GridError> {
    u.check_same_grid(v)?;
    let fft = ProfileFft::new(u.grid);
    NormalFormKernel::new(&fft, eps, phase).apply(u, v)
}
