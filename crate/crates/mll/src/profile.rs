//! Truncated theta-Fourier profiles on a periodic y-grid, and their FFT transforms.

use rustfft::{Fft, FftPlanner};
use serde::{Deserialize, Serialize};
use std::f64::consts::PI;
use std::sync::Arc;

use crate::algebra::{StateVector, C64, ZERO};
use crate::error::GridError;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ProfileGrid {
    pub p_max: usize,
    pub ny: usize,
    pub ly: f64,
}

impl ProfileGrid {
    pub fn new(p_max: usize, ny: usize, ly: f64) -> Self {
        ProfileGrid { p_max, ny, ly }
    }

    pub fn n_harm(&self) -> usize {
        2 * self.p_max + 1
    }

    pub fn len(&self) -> usize {
        self.n_harm() * self.ny
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// theta grid size: a power of two with no quadratic aliasing onto |p| <= P.
    pub fn n_theta(&self) -> usize {
        (3 * self.p_max + 1).next_power_of_two().max(4)
    }

    pub fn index(&self, p: i32, n: usize) -> usize {
        (p + self.p_max as i32) as usize * self.ny + n
    }

    /// Signed integer frequency of FFT slot n.
    pub fn signed(&self, n: usize) -> i64 {
        if n <= self.ny / 2 {
            n as i64
        } else {
            n as i64 - self.ny as i64
        }
    }

    pub fn slot(&self, s: i64) -> usize {
        s.rem_euclid(self.ny as i64) as usize
    }

    pub fn eta(&self, n: usize) -> f64 {
        2.0 * PI * self.signed(n) as f64 / self.ly
    }

    /// 2/3-rule mask, 3|s| < Ny, so quadratic products never alias into the band.
    pub fn keep_y(&self, n: usize) -> bool {
        3 * (self.signed(n).unsigned_abs() as usize) < self.ny
    }

    pub fn dy(&self) -> f64 {
        self.ly / self.ny as f64
    }

    pub fn y(&self, j: usize) -> f64 {
        j as f64 * self.dy()
    }

    pub fn harmonics(&self) -> impl Iterator<Item = i32> {
        let p = self.p_max as i32;
        -p..=p
    }
}

/// coeffs[(p + P) * ny + n] multiplies exp(i p theta) exp(i eta_n y).
#[derive(Clone, Debug, PartialEq)]
pub struct ThetaProfile {
    pub grid: ProfileGrid,
    pub eps: f64,
    pub coeffs: Vec<StateVector>,
}

impl ThetaProfile {
    pub fn zeros(grid: ProfileGrid, eps: f64) -> Self {
        ThetaProfile {
            grid,
            eps,
            coeffs: vec![StateVector::ZERO; grid.len()],
        }
    }

    pub fn at(&self, p: i32, n: usize) -> &StateVector {
        &self.coeffs[self.grid.index(p, n)]
    }

    pub fn at_mut(&mut self, p: i32, n: usize) -> &mut StateVector {
        let i = self.grid.index(p, n);
        &mut self.coeffs[i]
    }

    pub fn check_same_grid(&self, other: &ThetaProfile) -> Result<(), GridError> {
        if self.grid != other.grid {
            return Err(GridError::Mismatch(format!(
                "{:?} vs {:?}",
                self.grid, other.grid
            )));
        }
        Ok(())
    }

    pub fn map(&self, f: impl Fn(&StateVector) -> StateVector) -> Self {
        ThetaProfile {
            grid: self.grid,
            eps: self.eps,
            coeffs: self.coeffs.iter().map(f).collect(),
        }
    }

    pub fn axpy(&mut self, a: C64, x: &ThetaProfile) {
        for (s, v) in self.coeffs.iter_mut().zip(&x.coeffs) {
            *s += v.scale(a);
        }
    }

    pub fn add(&self, other: &ThetaProfile) -> Self {
        let mut out = self.clone();
        out.axpy(C64::new(1.0, 0.0), other);
        out
    }

    pub fn sub(&self, other: &ThetaProfile) -> Self {
        let mut out = self.clone();
        out.axpy(C64::new(-1.0, 0.0), other);
        out
    }

    pub fn scale(&self, s: C64) -> Self {
        self.map(|v| v.scale(s))
    }

    pub fn pi0(&self) -> Self {
        self.map(|v| v.pi0())
    }

    pub fn pis(&self) -> Self {
        self.map(|v| v.pis())
    }

    /// L2 norm over [0, L) x [0, 2 pi) via Parseval.
    pub fn l2(&self) -> f64 {
        let s: f64 = self.coeffs.iter().map(|v| v.norm_sqr()).sum();
        (2.0 * PI * self.grid.ly * s).sqrt()
    }

    /// Sum of coefficient magnitudes, which bounds the sup norm.
    pub fn l1_coeffs(&self) -> f64 {
        self.coeffs.iter().map(|v| v.norm()).sum()
    }

    /// Largest violation of coeffs[-p][-n] = conj(coeffs[p][n]).
    pub fn reality_defect(&self) -> f64 {
        let g = self.grid;
        let mut worst: f64 = 0.0;
        for p in g.harmonics() {
            for n in 0..g.ny {
                let s = g.signed(n);
                if s == -(g.ny as i64) / 2 && g.ny % 2 == 0 {
                    continue;
                }
                let m = g.slot(-s);
                let d = (*self.at(p, n) - self.at(-p, m).conj()).norm();
                worst = worst.max(d);
            }
        }
        worst
    }

    /// Relative L2 content of the |p| = P harmonics and of Ny/4 < |n| <= Ny/3.
    pub fn tail_fraction(&self) -> f64 {
        let g = self.grid;
        let total: f64 = self.coeffs.iter().map(|v| v.norm_sqr()).sum();
        if total == 0.0 {
            return 0.0;
        }
        let mut tail = 0.0;
        for p in g.harmonics() {
            for n in 0..g.ny {
                let a = g.signed(n).unsigned_abs() as usize;
                if p.unsigned_abs() as usize == g.p_max || (a > g.ny / 4 && a <= g.ny / 3) {
                    tail += self.at(p, n).norm_sqr();
                }
            }
        }
        (tail / total).sqrt()
    }

    /// Zero y-frequencies outside the 2/3 band.
    pub fn dealias(&mut self) {
        let g = self.grid;
        for p in g.harmonics() {
            for n in 0..g.ny {
                if !g.keep_y(n) {
                    *self.at_mut(p, n) = StateVector::ZERO;
                }
            }
        }
    }

    /// Coefficients of one harmonic as a y-spectrum.
    pub fn harmonic(&self, p: i32) -> &[StateVector] {
        let i = self.grid.index(p, 0);
        &self.coeffs[i..i + self.grid.ny]
    }

    pub fn harmonic_mut(&mut self, p: i32) -> &mut [StateVector] {
        let i = self.grid.index(p, 0);
        let ny = self.grid.ny;
        &mut self.coeffs[i..i + ny]
    }
}

/// Cached 1-D and 2-D FFT plans for a profile grid.
#[derive(Clone)]
pub struct ProfileFft {
    pub grid: ProfileGrid,
    pub n_theta: usize,
    fy: Arc<dyn Fft<f64>>,
    iy: Arc<dyn Fft<f64>>,
    ft: Arc<dyn Fft<f64>>,
    it: Arc<dyn Fft<f64>>,
}

impl std::fmt::Debug for ProfileFft {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("ProfileFft")
            .field("grid", &self.grid)
            .field("n_theta", &self.n_theta)
            .finish()
    }
}

impl ProfileFft {
    pub fn new(grid: ProfileGrid) -> Self {
        let mut planner = FftPlanner::new();
        let n_theta = grid.n_theta();
        ProfileFft {
            grid,
            n_theta,
            fy: planner.plan_fft_forward(grid.ny),
            iy: planner.plan_fft_inverse(grid.ny),
            ft: planner.plan_fft_forward(n_theta),
            it: planner.plan_fft_inverse(n_theta),
        }
    }

    pub fn n_points(&self) -> usize {
        self.n_theta * self.grid.ny
    }

    fn transform_2d(&self, data: &mut [C64], forward: bool) {
        let ny = self.grid.ny;
        let nt = self.n_theta;
        let (py, pt) = if forward {
            (&self.fy, &self.ft)
        } else {
            (&self.iy, &self.it)
        };
        for row in data.chunks_mut(ny) {
            py.process(row);
        }
        let mut col = vec![ZERO; nt];
        for j in 0..ny {
            for i in 0..nt {
                col[i] = data[i * ny + j];
            }
            pt.process(&mut col);
            for i in 0..nt {
                data[i * ny + j] = col[i];
            }
        }
    }

    /// Scalar spectrum (harmonic-major, length (2P+1) Ny) to physical values on the
    /// (theta_i, y_j) grid, layout [i * ny + j].
    pub fn scalar_to_physical(&self, spec: &[C64]) -> Vec<C64> {
        let g = self.grid;
        let ny = g.ny;
        let mut data = vec![ZERO; self.n_points()];
        for p in g.harmonics() {
            let row = p.rem_euclid(self.n_theta as i32) as usize;
            let src = &spec[g.index(p, 0)..g.index(p, 0) + ny];
            data[row * ny..row * ny + ny].copy_from_slice(src);
        }
        self.transform_2d(&mut data, false);
        data
    }

    /// Physical values back to a truncated spectrum; optionally applies the 2/3 rule in y.
    pub fn scalar_from_physical(&self, mut data: Vec<C64>, dealias: bool) -> Vec<C64> {
        let g = self.grid;
        let ny = g.ny;
        self.transform_2d(&mut data, true);
        let norm = 1.0 / self.n_points() as f64;
        let mut spec = vec![ZERO; g.len()];
        for p in g.harmonics() {
            let row = p.rem_euclid(self.n_theta as i32) as usize;
            for n in 0..ny {
                if dealias && !g.keep_y(n) {
                    continue;
                }
                spec[g.index(p, n)] = data[row * ny + n] * norm;
            }
        }
        spec
    }

    /// Physical field of every component: out[component][i * ny + j].
    pub fn to_physical(&self, v: &ThetaProfile) -> Vec<Vec<C64>> {
        use rayon::prelude::*;
        (0..9)
            .into_par_iter()
            .map(|comp| {
                let spec: Vec<C64> = v.coeffs.iter().map(|s| s.0[comp]).collect();
                self.scalar_to_physical(&spec)
            })
            .collect()
    }

    pub fn from_physical(&self, fields: Vec<Vec<C64>>, eps: f64, dealias: bool) -> ThetaProfile {
        use rayon::prelude::*;
        let specs: Vec<Vec<C64>> = fields
            .into_par_iter()
            .map(|f| self.scalar_from_physical(f, dealias))
            .collect();
        let mut out = ThetaProfile::zeros(self.grid, eps);
        for (comp, s) in specs.iter().enumerate() {
            for (i, z) in s.iter().enumerate() {
                out.coeffs[i].0[comp] = *z;
            }
        }
        out
    }

    /// Max over grid points of the pointwise Euclidean norm.
    pub fn sup_norm(&self, v: &ThetaProfile) -> f64 {
        let f = self.to_physical(v);
        let mut worst: f64 = 0.0;
        for i in 0..self.n_points() {
            let s: f64 = f.iter().map(|c| c[i].norm_sqr()).sum();
            worst = worst.max(s);
        }
        worst.sqrt()
    }

    /// 1-D y transforms for envelope fields.
    pub fn y_forward(&self, f: &[C64]) -> Vec<C64> {
        let mut d = f.to_vec();
        self.fy.process(&mut d);
        let s = 1.0 / self.grid.ny as f64;
        d.iter_mut().for_each(|z| *z *= s);
        d
    }

    pub fn y_inverse(&self, s: &[C64]) -> Vec<C64> {
        let mut d = s.to_vec();
        self.iy.process(&mut d);
        d
    }

    /// Spectral d^order/dy^order of a physical field.
    pub fn y_derivative(&self, f: &[C64], order: u32) -> Vec<C64> {
        let mut s = self.y_forward(f);
        let g = self.grid;
        for (n, z) in s.iter_mut().enumerate() {
            let ik = C64::new(0.0, g.eta(n));
            *z *= ik.powu(order);
            if order % 2 == 1 && g.ny % 2 == 0 && n == g.ny / 2 {
                *z = ZERO;
            }
        }
        self.y_inverse(&s)
    }
}
