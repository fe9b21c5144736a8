//! Dispersion relation and the xi-dependent spectral decomposition of A(e1) xi + L0/i.

use nalgebra::{Matrix6, SymmetricEigen};
use serde::{Deserialize, Serialize};
use std::collections::HashMap;
use std::io::Write;
use std::sync::Arc;

use crate::algebra::{
    a1_matrix, c, l0_matrix, lp_matrix, pis_total, Mat9, StateVector, C64, PI0_INDICES, ZERO,
};
use crate::error::SpectralError;

/// Gap below which neighbouring eigenvalues share one projector.
pub const MERGE_GAP: f64 = 1e-9;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Sign {
    #[serde(rename = "-1")]
    Minus,
    #[serde(rename = "+1")]
    Plus,
}

impl Sign {
    pub fn value(self) -> f64 {
        match self {
            Sign::Minus => -1.0,
            Sign::Plus => 1.0,
        }
    }

    pub fn from_value(v: f64) -> Option<Sign> {
        if (v - 1.0).abs() < 1e-10 {
            Some(Sign::Plus)
        } else if (v + 1.0).abs() < 1e-10 {
            Some(Sign::Minus)
        } else {
            None
        }
    }

    /// delta_j = (-1)^j
    pub fn of_branch(j: usize) -> Sign {
        if j % 2 == 0 {
            Sign::Plus
        } else {
            Sign::Minus
        }
    }
}

/// Characteristic pair (omega, k) on the branch delta.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Phase {
    pub omega: f64,
    pub k: f64,
    pub delta: Sign,
    pub gamma: f64,
}

impl Phase {
    pub fn delta(&self) -> f64 {
        self.delta.value()
    }

    /// Validate an explicit (omega, k) and recover delta from it.
    pub fn from_omega_k(omega: f64, k: f64) -> Result<Phase, SpectralError> {
        if omega == 0.0 {
            return Err(SpectralError::ZeroFrequency);
        }
        let r = k * k / (omega * omega);
        let delta = -omega * (1.0 - r) / (2.0 - r);
        let sign = Sign::from_value(delta).ok_or(SpectralError::NotOnDispersion { omega, k, delta })?;
        Ok(Phase {
            omega,
            k,
            delta: sign,
            gamma: 1.0 - r,
        })
    }

    /// The branch j in 1..=6 carrying (xi, lambda) = (k, omega).
    pub fn carrier_branch(&self) -> usize {
        let mut best = (f64::INFINITY, 0);
        for j in 1..=6 {
            if Sign::of_branch(j) != self.delta {
                continue;
            }
            let d = (branch_eigenvalue(self.k, j) - self.omega).abs();
            if d < best.0 {
                best = (d, j);
            }
        }
        best.1
    }
}

pub fn solve_phase(omega: f64, delta: Sign) -> Result<Phase, SpectralError> {
    if omega == 0.0 {
        return Err(SpectralError::ZeroFrequency);
    }
    let d = delta.value();
    let den = omega + d;
    let invalid = SpectralError::InvalidBranch {
        omega,
        delta: d as i32,
    };
    if den == 0.0 {
        return Err(invalid);
    }
    let rad = (omega + 2.0 * d) / den * omega * omega;
    if !(rad > 0.0) {
        return Err(invalid);
    }
    let k = rad.sqrt();
    Ok(Phase {
        omega,
        k,
        delta,
        gamma: 1.0 - k * k / (omega * omega),
    })
}

/// det L(i(omega, k)) = det L_1
pub fn det_l1(phase: &Phase) -> C64 {
    lp_matrix(1, phase.omega, phase.k).determinant()
}

/// Hermitian symbol A(e1) xi + L0/i.
pub fn symbol(xi: f64) -> Mat9 {
    a1_matrix() * c(xi, 0.0) + l0_matrix() * c(0.0, -1.0)
}

#[derive(Clone, Debug)]
pub struct EigenGroup {
    pub lambda: f64,
    /// 1-based branch labels sharing this projector.
    pub branches: Vec<usize>,
    pub projector: Mat9,
}

#[derive(Clone, Debug)]
pub struct EigenDecomposition {
    pub xi: f64,
    pub lambdas: [f64; 9],
    /// Unit eigenvectors of branches 1..6 (index j-1).
    pub vectors: [StateVector; 6],
    /// Branch groups followed by the zero-branch group {7, 8, 9}.
    pub groups: Vec<EigenGroup>,
}

impl EigenDecomposition {
    pub fn group_of(&self, j: usize) -> &EigenGroup {
        self.groups
            .iter()
            .find(|g| g.branches.contains(&j))
            .expect("branch label in 1..=9")
    }

    pub fn projector(&self, j: usize) -> &Mat9 {
        &self.group_of(j).projector
    }

    pub fn is_simple(&self, j: usize) -> bool {
        self.group_of(j).branches.len() == 1
    }

    pub fn pi0_total(&self) -> Mat9 {
        let mut s = Mat9::zeros();
        for g in &self.groups {
            if g.branches[0] <= 6 {
                s += g.projector;
            }
        }
        s
    }

    pub fn pis_total(&self) -> Mat9 {
        let mut s = Mat9::zeros();
        for g in &self.groups {
            if g.branches[0] > 6 {
                s += g.projector;
            }
        }
        s
    }

    pub fn reconstruct(&self) -> Mat9 {
        let mut s = Mat9::zeros();
        for g in &self.groups {
            s += g.projector * c(g.lambda, 0.0);
        }
        s
    }

    /// sum_groups exp(-i s (lambda - shift)) Pi
    pub fn exp_phase(&self, s: f64, shift: f64) -> Mat9 {
        let mut out = Mat9::zeros();
        for g in &self.groups {
            let th = -s * (g.lambda - shift);
            out += g.projector * C64::from_polar(1.0, th);
        }
        out
    }
}

fn embed(v6: &[C64]) -> StateVector {
    let mut out = StateVector::ZERO;
    for (a, &i) in PI0_INDICES.iter().enumerate() {
        out.0[i] = v6[a];
    }
    out
}

fn outer(v: &StateVector) -> Mat9 {
    let mut m = Mat9::zeros();
    for i in 0..9 {
        for j in 0..9 {
            m[(i, j)] = v.0[i] * v.0[j].conj();
        }
    }
    m
}

pub fn decompose(xi: f64) -> EigenDecomposition {
    let full = symbol(xi);
    let mut m6 = Matrix6::<C64>::zeros();
    for (a, &i) in PI0_INDICES.iter().enumerate() {
        for (b, &j) in PI0_INDICES.iter().enumerate() {
            m6[(a, b)] = full[(i, j)];
        }
    }
    let eig = SymmetricEigen::new(m6);
    let mut order: Vec<usize> = (0..6).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[b].partial_cmp(&eig.eigenvalues[a]).unwrap());

    let mut lambdas = [0.0; 9];
    let mut vectors = [StateVector::ZERO; 6];
    for (j, &o) in order.iter().enumerate() {
        lambdas[j] = eig.eigenvalues[o];
        let col: Vec<C64> = eig.eigenvectors.column(o).iter().cloned().collect();
        vectors[j] = embed(&col);
    }

    let mut groups: Vec<EigenGroup> = Vec::new();
    let mut start = 0;
    while start < 6 {
        let mut end = start + 1;
        while end < 6 && (lambdas[end - 1] - lambdas[end]).abs() < MERGE_GAP {
            end += 1;
        }
        let mut proj = Mat9::zeros();
        let mut mean = 0.0;
        for j in start..end {
            proj += outer(&vectors[j]);
            mean += lambdas[j];
        }
        groups.push(EigenGroup {
            lambda: mean / (end - start) as f64,
            branches: (start + 1..=end).collect(),
            projector: proj,
        });
        start = end;
    }
    groups.push(EigenGroup {
        lambda: 0.0,
        branches: vec![7, 8, 9],
        projector: pis_total(),
    });
    EigenDecomposition {
        xi,
        lambdas,
        vectors,
        groups,
    }
}

/// Real roots of x^3 + a x^2 + b x + c, descending. Assumes three real roots.
fn cubic_roots(a: f64, b: f64, cc: f64) -> [f64; 3] {
    let p = b - a * a / 3.0;
    let q = 2.0 * a * a * a / 27.0 - a * b / 3.0 + cc;
    let mut r = if p.abs() < 1e-300 {
        let t = (-q).cbrt();
        [t - a / 3.0; 3]
    } else {
        let m = 2.0 * (-p / 3.0).sqrt();
        let arg = (3.0 * q / (p * m)).clamp(-1.0, 1.0);
        let phi = arg.acos() / 3.0;
        let mut out = [0.0; 3];
        for (kk, o) in out.iter_mut().enumerate() {
            *o = m * (phi - 2.0 * std::f64::consts::PI * kk as f64 / 3.0).cos() - a / 3.0;
        }
        out
    };
    for x in r.iter_mut() {
        for _ in 0..3 {
            let f = ((*x + a) * *x + b) * *x + cc;
            let df = (3.0 * *x + 2.0 * a) * *x + b;
            if df.abs() < 1e-12 {
                break;
            }
            let step = f / df;
            *x -= step;
            if step.abs() <= 1e-17 * x.abs().max(1e-300) {
                break;
            }
        }
    }
    r.sort_by(|x, y| y.partial_cmp(x).unwrap());
    r
}

/// lambda_j(xi) from the branch cubic lambda^3 + 2 delta lambda^2 - xi^2 lambda - delta xi^2 = 0.
pub fn branch_eigenvalue(xi: f64, j: usize) -> f64 {
    assert!((1..=6).contains(&j), "branch index {j}");
    let d = Sign::of_branch(j).value();
    let x2 = xi * xi;
    if xi == 0.0 {
        return [2.0, 0.0, 0.0, 0.0, 0.0, -2.0][j - 1];
    }
    let r = cubic_roots(2.0 * d, -x2, -d * x2);
    r[(j - 1) / 2]
}

/// Dispersion residual xi^2 - (lambda + 2 delta)/(lambda + delta) lambda^2.
pub fn dispersion_residual(xi: f64, lambda: f64, delta: f64) -> f64 {
    xi * xi - (lambda + 2.0 * delta) / (lambda + delta) * lambda * lambda
}

pub fn omega_vec(delta: f64) -> [C64; 3] {
    [ZERO, c(0.0, delta), c(1.0, 0.0)]
}

/// Q_j(xi) = (-i delta xi/lambda Omega, Omega, -gamma Omega), gamma = 1 - xi^2/lambda^2.
pub fn branch_vector(xi: f64, j: usize) -> Result<StateVector, SpectralError> {
    if !(1..=6).contains(&j) {
        return Err(SpectralError::BadBranch(j));
    }
    let lambda = branch_eigenvalue(xi, j);
    if lambda.abs() < 1e-12 {
        return Err(SpectralError::ZeroEigenvalue { xi, j });
    }
    let d = Sign::of_branch(j).value();
    Ok(q_vector(xi / lambda, d, 1.0 - (xi / lambda).powi(2)))
}

/// Q with the ratio xi/lambda and gamma given explicitly; used for the xi -> 0 limit too.
pub fn q_vector(xi_over_lambda: f64, delta: f64, gamma: f64) -> StateVector {
    let om = omega_vec(delta);
    let ce = c(0.0, -delta * xi_over_lambda);
    StateVector::new(om.map(|z| z * ce), om, om.map(|z| z * (-gamma)))
}

/// Kernel generator W0 of L_1.
pub fn kernel_w0(phase: &Phase) -> StateVector {
    q_vector(phase.k / phase.omega, phase.delta(), phase.gamma)
}

pub fn char_variety_sample(xi_grid: &[f64]) -> Vec<[f64; 7]> {
    xi_grid
        .iter()
        .map(|&xi| {
            let d = decompose(xi);
            let mut row = [xi, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0];
            row[1..7].copy_from_slice(&d.lambdas[..6]);
            row
        })
        .collect()
}

pub fn write_dispersion_csv<W: Write>(rows: &[[f64; 7]], out: W) -> csv::Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["xi", "lambda1", "lambda2", "lambda3", "lambda4", "lambda5", "lambda6"])?;
    for r in rows {
        w.write_record(r.iter().map(|x| format!("{x:.17e}")))?;
    }
    w.flush()?;
    Ok(())
}

/// Immutable memo of decompositions keyed by xi quantized to 1e-12.
#[derive(Clone, Debug, Default)]
pub struct DecompositionCache {
    map: HashMap<i64, Arc<EigenDecomposition>>,
}

fn key(xi: f64) -> i64 {
    (xi * 1e12).round() as i64
}

impl DecompositionCache {
    pub fn build(xis: &[f64]) -> Self {
        use rayon::prelude::*;
        let entries: Vec<(i64, Arc<EigenDecomposition>)> = xis
            .par_iter()
            .map(|&x| (key(x), Arc::new(decompose(x))))
            .collect();
        DecompositionCache {
            map: entries.into_iter().collect(),
        }
    }

    pub fn get(&self, xi: f64) -> Option<Arc<EigenDecomposition>> {
        self.map.get(&key(xi)).cloned()
    }

    pub fn get_or_compute(&self, xi: f64) -> Arc<EigenDecomposition> {
        self.get(xi).unwrap_or_else(|| Arc::new(decompose(xi)))
    }

    pub fn len(&self) -> usize {
        self.map.len()
    }

    pub fn is_empty(&self) -> bool {
        self.map.is_empty()
    }
}
