//! WKB cascade: NLS envelope, mean field, correctors, remainder and initial correctors.

use rustfft::{Fft, FftPlanner};
use serde::{Deserialize, Serialize};
use std::f64::consts::PI;
use std::sync::Arc;

use crate::algebra::{
    a1_matrix, apply_a, bilinear_b, c, harmonic_matrix, lp_matrix, pi0_kernel_explicit, Mat9,
    StateVector, C64,
};
use crate::error::{GridError, WkbError};
use crate::evolve::product_b;
use crate::profile::{ProfileFft, ProfileGrid, ThetaProfile};
use crate::spectral::{kernel_w0, omega_vec, Phase};

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct WkbCoefficients {
    pub rho: f64,
    pub nu: f64,
    pub nu1: f64,
    /// Cubic coefficient in its printed closed form.
    pub nu2: f64,
    pub nu3: f64,
    pub nu4: f64,
    /// V10 coefficient in its printed closed form.
    pub mean_coeff: f64,
    /// f = i mu d_y g
    pub f_coeff: f64,
    /// Cubic NLS coefficient obtained from the solvability condition, nu2 / (nu omega).
    pub cubic: f64,
    /// V10 = mean_field (0, -e1, e1) |g|^2 from the mean-field transport system.
    pub mean_field: f64,
}

/// Profile vectors of the cascade; every layer is a combination of these times envelope monomials.
#[derive(Clone, Debug)]
pub struct WkbModel {
    pub phase: Phase,
    pub coeffs: WkbCoefficients,
    pub w0: StateVector,
    /// (1 - pi_1) V11 per d_y g, in the gauge with vanishing H component along Omega0.
    pub v11: StateVector,
    /// V11 = u11 d_y g, including f W0.
    pub u11: StateVector,
    /// Dispersive part of V21 per d_y^2 g.
    pub d21: StateVector,
    /// Cubic part of V21 per g |g|^2.
    pub c21: StateVector,
    /// V10 per |g|^2.
    pub v10: StateVector,
    /// B(conj W0, v11), the mean-field source vector.
    pub mean_source: StateVector,
    pub k0: f64,
}

/// Add the multiple of W0 that removes the H component along Omega0.
fn h_gauge(v: &StateVector, w0: &StateVector, delta: f64) -> StateVector {
    let om = omega_vec(delta);
    let h = v.h();
    let coef: C64 = (0..3).map(|i| h[i] * om[i].conj()).sum::<C64>() / 2.0;
    *v - w0.scale(coef)
}

fn along_omega(x: [C64; 3], delta: f64) -> C64 {
    let om = omega_vec(delta);
    (0..3).map(|i| x[i] * om[i].conj()).sum::<C64>() / 2.0
}

/// Minimal-norm solution of m x = rhs for Hermitian m.
fn pseudo_solve(m: &Mat9, rhs: &StateVector) -> StateVector {
    let eig = nalgebra::SymmetricEigen::new((m + m.adjoint()) * c(0.5, 0.0));
    let smax = eig.eigenvalues.iter().fold(0.0f64, |a, x| a.max(x.abs()));
    let b = rhs.to_vec9();
    let mut x = crate::algebra::Vec9::zeros();
    for (i, &mu) in eig.eigenvalues.iter().enumerate() {
        if mu.abs() > 1e-10 * smax {
            let v = eig.eigenvectors.column(i);
            x += v * (v.adjoint() * &b)[(0, 0)] / c(mu, 0.0);
        }
    }
    StateVector::from_vec9(&x)
}

/// Closed forms of rho, nu, nu1, nu2 and the V10 coefficient.
pub fn printed_coefficients(phase: &Phase) -> (f64, f64, f64, f64, f64) {
    let (om, k, g, d) = (phase.omega, phase.k, phase.gamma, phase.delta());
    let nu = 1.0 + k * k / (om * om) + g * g;
    let rho = 2.0 * k / om / nu;
    let kr = k * rho / om;
    let nu1 = 1.0 / (nu * om) * (kr * (1.0 - 2.0 * g) - 1.0) * (1.0 - kr);
    let nu2 = 4.0 * k / (om * rho) * (1.0 - kr) * (1.0 - g * g);
    let mean = 4.0 * k * d / (om * rho) * (1.0 - kr);
    (rho, nu, nu1, nu2, mean)
}

impl WkbModel {
    pub fn new(phase: &Phase) -> Result<WkbModel, WkbError> {
        let d = phase.delta();
        let (rho, nu, nu1_printed, nu2, mean_coeff) = printed_coefficients(phase);
        let h1 = harmonic_matrix(1, phase)?;
        let l1i = h1.lp_pinv;
        let w0 = kernel_w0(phase);
        let nw = w0.norm_sqr();
        let a_rho = |v: &StateVector| apply_a(v) - *v * rho;

        let v11 = h_gauge(&(-apply_a(&w0)).apply(&l1i), &w0, d);

        // mean field: (pi0 A pi0 - rho) X = 2 pi0 B(conj W0, v11) on ker L0
        let b = bilinear_b(&w0.conj(), &v11);
        let pi0 = pi0_kernel_explicit();
        let m = pi0 * a1_matrix() * pi0 - pi0 * c(rho, 0.0);
        let src = (b * 2.0).apply(&pi0);
        let v10 = pseudo_solve(&m, &src);
        let mean_field = -v10.0[3].re;
        let k0 = src.0[3].re;

        let s = bilinear_b(&w0, &v10) * 2.0;
        let cubic = (s.dot(&w0) / nw / c(0.0, 1.0)).re;
        let c21 = h_gauge(&s.apply(&l1i), &w0, d);

        let da = h_gauge(&(-a_rho(&v11)).apply(&l1i), &w0, d);
        let df = h_gauge(&(-a_rho(&(w0 * c(0.0, 1.0)))).apply(&l1i), &w0, d);
        let ma = along_omega(da.m(), d);
        let mf = along_omega(df.m(), d);
        let mu = -(ma / mf).re;
        let u11 = v11 + w0 * c(0.0, mu);
        let d21 = da + df * mu;
        let nu3 = along_omega(da.e(), d).im;
        let nu4 = ma.re;
        let nu1 = (a_rho(&u11).dot(&w0) / nw / c(0.0, 1.0)).re;
        debug_assert!((nu1 - nu1_printed).abs() < 1e-10);

        // L_p keeps the Pi0 / Pi_s split, so drop round-off that crossed it
        let (v11, u11, d21, c21, v10) = (v11.pi0(), u11.pi0(), d21.pi0(), c21.pi0(), v10.pis());
        Ok(WkbModel {
            phase: *phase,
            coeffs: WkbCoefficients {
                rho,
                nu,
                nu1,
                nu2,
                nu3,
                nu4,
                mean_coeff,
                f_coeff: mu,
                cubic,
                mean_field,
            },
            w0,
            v11,
            u11,
            d21,
            c21,
            v10,
            mean_source: b,
            k0,
        })
    }

    pub fn nls(&self) -> NlsCoefficients {
        NlsCoefficients {
            nu1: self.coeffs.nu1,
            nu2: self.coeffs.cubic,
        }
    }
}

pub fn compute_coefficients(phase: &Phase) -> Result<WkbCoefficients, WkbError> {
    Ok(WkbModel::new(phase)?.coeffs)
}

/// Coefficients of d_tau g + i nu1 d_z^2 g = i nu2 g |g|^2.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct NlsCoefficients {
    pub nu1: f64,
    pub nu2: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct EnvelopeState {
    pub g1: Vec<C64>,
    pub tau: f64,
}

impl EnvelopeState {
    pub fn mass(&self, ly: f64) -> f64 {
        let dz = ly / self.g1.len() as f64;
        self.g1.iter().map(|z| z.norm_sqr()).sum::<f64>() * dz
    }

    pub fn sup(&self) -> f64 {
        self.g1.iter().fold(0.0, |m, z| m.max(z.norm()))
    }
}

/// Periodic 1-D spectral helper on [0, L).
#[derive(Clone)]
pub struct Line {
    pub n: usize,
    pub ly: f64,
    fwd: Arc<dyn Fft<f64>>,
    inv: Arc<dyn Fft<f64>>,
}

impl std::fmt::Debug for Line {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "Line({}, {})", self.n, self.ly)
    }
}

impl Line {
    pub fn new(n: usize, ly: f64) -> Self {
        let mut p = FftPlanner::new();
        Line {
            n,
            ly,
            fwd: p.plan_fft_forward(n),
            inv: p.plan_fft_inverse(n),
        }
    }

    pub fn wavenumber(&self, i: usize) -> f64 {
        let s = if i <= self.n / 2 {
            i as f64
        } else {
            i as f64 - self.n as f64
        };
        2.0 * PI * s / self.ly
    }

    fn is_nyquist(&self, i: usize) -> bool {
        self.n % 2 == 0 && i == self.n / 2
    }

    pub fn forward(&self, f: &[C64]) -> Vec<C64> {
        let mut d = f.to_vec();
        self.fwd.process(&mut d);
        let s = 1.0 / self.n as f64;
        d.iter_mut().for_each(|z| *z *= s);
        d
    }

    pub fn inverse(&self, s: &[C64]) -> Vec<C64> {
        let mut d = s.to_vec();
        self.inv.process(&mut d);
        d
    }

    /// Apply a Fourier multiplier m(kappa); the Nyquist mode gets the real part of m.
    pub fn multiply(&self, f: &[C64], m: impl Fn(f64) -> C64) -> Vec<C64> {
        let mut s = self.forward(f);
        for (i, z) in s.iter_mut().enumerate() {
            let mut w = m(self.wavenumber(i));
            if self.is_nyquist(i) {
                w = c(w.re, 0.0);
            }
            *z *= w;
        }
        self.inverse(&s)
    }

    pub fn derivative(&self, f: &[C64], order: u32) -> Vec<C64> {
        self.multiply(f, |k| c(0.0, k).powu(order))
    }

    pub fn y(&self, j: usize) -> f64 {
        j as f64 * self.ly / self.n as f64
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct NlsConfig {
    pub max_step: f64,
    /// Abort once sup |g1| exceeds this multiple of its initial value.
    pub horizon_factor: f64,
}

impl Default for NlsConfig {
    fn default() -> Self {
        NlsConfig {
            max_step: 0.01,
            horizon_factor: 10.0,
        }
    }
}

/// Strang split-step Fourier solver for the envelope equation.
#[derive(Clone, Debug)]
pub struct NlsSolver {
    pub line: Line,
    pub coeffs: NlsCoefficients,
    pub config: NlsConfig,
    initial_sup: f64,
}

impl NlsSolver {
    pub fn new(line: Line, coeffs: NlsCoefficients, config: NlsConfig, initial: &EnvelopeState) -> Self {
        NlsSolver {
            line,
            coeffs,
            config,
            initial_sup: initial.sup(),
        }
    }

    fn half_linear(&self, g: &[C64], h: f64) -> Vec<C64> {
        let nu1 = self.coeffs.nu1;
        self.line.multiply(g, |k| C64::from_polar(1.0, nu1 * k * k * h))
    }

    pub fn step(&self, s: &EnvelopeState, h: f64) -> Result<EnvelopeState, WkbError> {
        if h > self.config.max_step * crate::evolve::STEP_SLACK {
            return Err(WkbError::StepTooLarge {
                step: h,
                max: self.config.max_step,
            });
        }
        let mut g = self.half_linear(&s.g1, 0.5 * h);
        let nu2 = self.coeffs.nu2;
        for z in g.iter_mut() {
            *z *= C64::from_polar(1.0, nu2 * z.norm_sqr() * h);
        }
        let g = self.half_linear(&g, 0.5 * h);
        let out = EnvelopeState {
            g1: g,
            tau: s.tau + h,
        };
        let sup = out.sup();
        if !sup.is_finite() || sup > self.config.horizon_factor * self.initial_sup.max(1e-300) {
            return Err(WkbError::Horizon {
                tau: out.tau,
                sup,
                initial: self.initial_sup,
                factor: self.config.horizon_factor,
            });
        }
        Ok(out)
    }

    /// Advance to tau_target with equal sub-steps no larger than `dtau`.
    pub fn advance_to(&self, s: &EnvelopeState, tau_target: f64, dtau: f64) -> Result<EnvelopeState, WkbError> {
        let span = tau_target - s.tau;
        if span <= 0.0 {
            return Ok(s.clone());
        }
        let n = (span / dtau - 1e-9).ceil().max(1.0) as usize;
        let h = span / n as f64;
        let mut cur = s.clone();
        for _ in 0..n {
            cur = self.step(&cur, h)?;
        }
        cur.tau = tau_target;
        Ok(cur)
    }

    /// Right side -i nu1 g'' + i nu2 g |g|^2, i.e. d_tau g.
    pub fn rhs(&self, g: &[C64]) -> Vec<C64> {
        let gyy = self.line.derivative(g, 2);
        g.iter()
            .zip(&gyy)
            .map(|(z, zz)| c(0.0, -self.coeffs.nu1) * zz + c(0.0, self.coeffs.nu2) * z * z.norm_sqr())
            .collect()
    }
}

/// One Strang step of size dtau.
pub fn nls_evolve(
    state: &EnvelopeState,
    dtau: f64,
    coeffs: &NlsCoefficients,
    line: &Line,
    config: &NlsConfig,
) -> Result<EnvelopeState, WkbError> {
    NlsSolver::new(line.clone(), *coeffs, config.clone(), state).step(state, dtau)
}

/// g(tau, t, y) = g1(tau, y - rho t) by Fourier shift.
pub fn envelope_to_lab(g1: &EnvelopeState, t: f64, rho: f64, line: &Line) -> Vec<C64> {
    if t == 0.0 {
        return g1.g1.clone();
    }
    line.multiply(&g1.g1, |k| C64::from_polar(1.0, -k * rho * t))
}

/// Physical y-fields of the nonzero harmonics (p >= 0) of each layer.
#[derive(Clone, Debug)]
struct LayerFields {
    v01: Vec<StateVector>,
    v10: Vec<StateVector>,
    v11: Vec<StateVector>,
    v21: Vec<StateVector>,
}

#[derive(Clone, Debug)]
pub struct WkbProfile {
    pub eps: f64,
    pub phase: Phase,
    pub coeffs: WkbCoefficients,
    pub v0: ThetaProfile,
    pub v1: ThetaProfile,
    pub v2: ThetaProfile,
    /// d_tau of each layer at fixed (t, y).
    pub dv0: ThetaProfile,
    pub dv1: ThetaProfile,
    pub dv2: ThetaProfile,
}

fn sv_field(coef: &StateVector, f: &[C64]) -> Vec<StateVector> {
    f.iter().map(|z| coef.scale(*z)).collect()
}

fn add_fields(a: Vec<StateVector>, b: Vec<StateVector>) -> Vec<StateVector> {
    a.into_iter().zip(b).map(|(x, y)| x + y).collect()
}

impl WkbModel {
    fn layer_fields(&self, line: &Line, g: &[C64]) -> LayerFields {
        let gy = line.derivative(g, 1);
        let gyy = line.derivative(g, 2);
        let abs2: Vec<C64> = g.iter().map(|z| c(z.norm_sqr(), 0.0)).collect();
        let cub: Vec<C64> = g.iter().map(|z| z * z.norm_sqr()).collect();
        LayerFields {
            v01: sv_field(&self.w0, g),
            v10: sv_field(&self.v10, &abs2),
            v11: sv_field(&self.u11, &gy),
            v21: add_fields(sv_field(&self.d21, &gyy), sv_field(&self.c21, &cub)),
        }
    }

    /// Directional derivative of the layer fields at g along h.
    fn layer_fields_dot(&self, line: &Line, g: &[C64], h: &[C64]) -> LayerFields {
        let hy = line.derivative(h, 1);
        let hyy = line.derivative(h, 2);
        let dabs2: Vec<C64> = g.iter().zip(h).map(|(a, b)| c(2.0 * (a.conj() * b).re, 0.0)).collect();
        let dcub: Vec<C64> = g
            .iter()
            .zip(h)
            .map(|(a, b)| 2.0 * a.norm_sqr() * b + a * a * b.conj())
            .collect();
        LayerFields {
            v01: sv_field(&self.w0, h),
            v10: sv_field(&self.v10, &dabs2),
            v11: sv_field(&self.u11, &hy),
            v21: add_fields(sv_field(&self.d21, &hyy), sv_field(&self.c21, &dcub)),
        }
    }

    /// Layers at lab time t from g(tau, t, .) on the profile grid.
    pub fn assemble(&self, g: &[C64], fft: &ProfileFft, eps: f64) -> Result<WkbProfile, WkbError> {
        let grid = fft.grid;
        if g.len() != grid.ny {
            return Err(GridError::Mismatch(format!("envelope length {} vs ny {}", g.len(), grid.ny)).into());
        }
        let line = Line::new(grid.ny, grid.ly);
        let solver_coeffs = self.nls();
        let gyy = line.derivative(g, 2);
        let gt: Vec<C64> = g
            .iter()
            .zip(&gyy)
            .map(|(z, zz)| c(0.0, -solver_coeffs.nu1) * zz + c(0.0, solver_coeffs.nu2) * z * z.norm_sqr())
            .collect();
        let f = self.layer_fields(&line, g);
        let df = self.layer_fields_dot(&line, g, &gt);
        let mk = |p1: &[StateVector], p0: Option<&[StateVector]>| layer_profile(fft, eps, p0, Some(p1));
        Ok(WkbProfile {
            eps,
            phase: self.phase,
            coeffs: self.coeffs,
            v0: mk(&f.v01, None),
            v1: mk(&f.v11, Some(&f.v10)),
            v2: mk(&f.v21, None),
            dv0: mk(&df.v01, None),
            dv1: mk(&df.v11, Some(&df.v10)),
            dv2: mk(&df.v21, None),
        })
    }
}

/// Build a profile with harmonic 0 from `p0` and harmonics +-1 from `p1` and its conjugate.
pub fn layer_profile(
    fft: &ProfileFft,
    eps: f64,
    p0: Option<&[StateVector]>,
    p1: Option<&[StateVector]>,
) -> ThetaProfile {
    let grid = fft.grid;
    let mut out = ThetaProfile::zeros(grid, eps);
    let spectrum = |f: &[StateVector]| -> Vec<StateVector> {
        let comps: Vec<Vec<C64>> = (0..9)
            .map(|cc| fft.y_forward(&f.iter().map(|s| s.0[cc]).collect::<Vec<_>>()))
            .collect();
        (0..grid.ny)
            .map(|n| StateVector(std::array::from_fn(|cc| comps[cc][n])))
            .collect()
    };
    if let Some(f0) = p0 {
        let s = spectrum(f0);
        out.harmonic_mut(0).copy_from_slice(&s);
    }
    if let Some(f1) = p1 {
        let s = spectrum(f1);
        for n in 0..grid.ny {
            *out.at_mut(1, n) = s[n];
            let m = grid.slot(-grid.signed(n));
            *out.at_mut(-1, m) = s[n].conj();
        }
    }
    out
}

/// (A(e1) - rho) d_y applied per coefficient.
fn transport(v: &ThetaProfile, rho: f64) -> ThetaProfile {
    let g = v.grid;
    let mut out = v.clone();
    for p in g.harmonics() {
        for n in 0..g.ny {
            let x = *v.at(p, n);
            let ik = c(0.0, g.eta(n));
            *out.at_mut(p, n) = (apply_a(&x) - x * rho).scale(ik);
        }
    }
    out
}

/// L_p applied harmonic by harmonic.
fn fast_operator(v: &ThetaProfile, phase: &Phase) -> ThetaProfile {
    let g = v.grid;
    let mut out = v.clone();
    for p in g.harmonics() {
        let lp = lp_matrix(p, phase.omega, phase.k);
        for x in out.harmonic_mut(p) {
            *x = x.apply(&lp);
        }
    }
    out
}

impl WkbProfile {
    pub fn grid(&self) -> ProfileGrid {
        self.v0.grid
    }

    /// V^a = V0 + eps V1 + eps^2 V2
    pub fn total(&self) -> ThetaProfile {
        let e = self.eps;
        let mut out = self.v0.clone();
        out.axpy(c(e, 0.0), &self.v1);
        out.axpy(c(e * e, 0.0), &self.v2);
        out
    }

    /// R = -2B(V0,V2) - B(V1,V1) - 2 eps B(V1,V2) - eps^2 B(V2,V2)
    pub fn remainder(&self, fft: &ProfileFft) -> ThetaProfile {
        let e = self.eps;
        let mut r = product_b(fft, &self.v0, &self.v2).scale(c(-2.0, 0.0));
        r.axpy(c(-1.0, 0.0), &product_b(fft, &self.v1, &self.v1));
        r.axpy(c(-2.0 * e, 0.0), &product_b(fft, &self.v1, &self.v2));
        r.axpy(c(-e * e, 0.0), &product_b(fft, &self.v2, &self.v2));
        r
    }

    /// d_t V^a + A d_y V^a + eps^-1 L(beta d_theta) V^a - B(V^a, V^a), evaluated on the whole profile.
    pub fn full_residual(&self, fft: &ProfileFft) -> ThetaProfile {
        let e = self.eps;
        let va = self.total();
        let mut dva = self.dv0.clone();
        dva.axpy(c(e, 0.0), &self.dv1);
        dva.axpy(c(e * e, 0.0), &self.dv2);
        let mut res = transport(&va, self.coeffs.rho);
        res.axpy(c(e, 0.0), &dva);
        res.axpy(c(1.0 / e, 0.0), &fast_operator(&va, &self.phase));
        res.axpy(c(-1.0, 0.0), &product_b(fft, &va, &va));
        res
    }

    /// eps^2 R + eps^2 (d_tau V1 + (d_t + A d_y) V2) + eps^3 d_tau V2, what the cascade predicts.
    pub fn predicted_residual(&self, fft: &ProfileFft) -> ThetaProfile {
        let e = self.eps;
        let mut p = self.remainder(fft).scale(c(e * e, 0.0));
        p.axpy(c(e * e, 0.0), &self.dv1);
        p.axpy(c(e * e, 0.0), &transport(&self.v2, self.coeffs.rho));
        p.axpy(c(e * e * e, 0.0), &self.dv2);
        p
    }

    /// Orders eps^-1 .. eps^1 of the cascade, each of which must vanish.
    pub fn cascade_residuals(&self, fft: &ProfileFft) -> [f64; 3] {
        let rho = self.coeffs.rho;
        let o_m1 = fast_operator(&self.v0, &self.phase);
        let mut o_0 = transport(&self.v0, rho);
        o_0.axpy(c(1.0, 0.0), &fast_operator(&self.v1, &self.phase));
        o_0.axpy(c(-1.0, 0.0), &product_b(fft, &self.v0, &self.v0));
        let mut o_1 = self.dv0.clone();
        o_1.axpy(c(1.0, 0.0), &transport(&self.v1, rho));
        o_1.axpy(c(1.0, 0.0), &fast_operator(&self.v2, &self.phase));
        o_1.axpy(c(-2.0, 0.0), &product_b(fft, &self.v0, &self.v1));
        [fft.sup_norm(&o_m1), fft.sup_norm(&o_0), fft.sup_norm(&o_1)]
    }
}

#[derive(Clone, Debug, PartialEq)]
pub enum Preparation {
    /// a1 = V10(0): the mean field only, so Pi_s b = 0 while Pi_0 b = -V11(0) e^{i theta} + conj.
    Prepared,
    /// a1 = V1(0), so b = 0.
    Matched,
    Unprepared,
    /// a1 given explicitly.
    Custom(ThetaProfile),
}

#[derive(Clone, Debug)]
pub struct InitialData {
    pub exact: ThetaProfile,
    pub wkb: WkbProfile,
    pub b: ThetaProfile,
    pub b1: ThetaProfile,
    pub a1: ThetaProfile,
}

/// V(0) = a0 W0 e^{i theta} + conj + eps a1 (a2 = 0) with b, b1 such that V^a(0) = V(0) + eps b + eps^2 b1.
pub fn initial_data(
    a0: &[C64],
    mode: &Preparation,
    eps: f64,
    model: &WkbModel,
    fft: &ProfileFft,
) -> Result<InitialData, WkbError> {
    let wkb = model.assemble(a0, fft, eps)?;
    let a1 = match mode {
        Preparation::Prepared => {
            let mut a = ThetaProfile::zeros(fft.grid, eps);
            a.harmonic_mut(0).copy_from_slice(wkb.v1.harmonic(0));
            a
        }
        Preparation::Matched => wkb.v1.clone(),
        Preparation::Unprepared => ThetaProfile::zeros(fft.grid, eps),
        Preparation::Custom(a) => {
            wkb.v1.check_same_grid(a)?;
            a.clone()
        }
    };
    let mut exact = wkb.v0.clone();
    exact.axpy(c(eps, 0.0), &a1);
    let b = wkb.v1.sub(&a1);
    let b1 = wkb.v2.clone();
    Ok(InitialData {
        exact,
        wkb,
        b,
        b1,
        a1,
    })
}

/// Default envelope A exp(-(y - y0)^2 / sigma^2).
pub fn gaussian(line: &Line, amplitude: f64, sigma: f64, y0: f64) -> Vec<C64> {
    (0..line.n)
        .map(|j| {
            let y = line.y(j);
            c(amplitude * (-(y - y0).powi(2) / (sigma * sigma)).exp(), 0.0)
        })
        .collect()
}
