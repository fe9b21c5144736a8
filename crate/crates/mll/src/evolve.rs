//! Exact evolution of the stiff profile system and of the normal-form system.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::algebra::{bilinear_b, Mat9, StateVector, C64};
use crate::error::EvolveError;
use crate::profile::{ProfileFft, ProfileGrid, ThetaProfile};
use crate::spectral::{decompose, Phase};
use crate::transparency::NormalFormKernel;

/// Equal sub-steps of a span can exceed the nominal step by round-off.
pub const STEP_SLACK: f64 = 1.0 + 1e-12;

/// Per-mode unitaries exp(-i s (lambda_j(eps eta + k p) - omega p)) with s = dt/eps.
#[derive(Clone, Debug)]
pub struct PropagatorTable {
    pub grid: ProfileGrid,
    pub s: f64,
    pub eps: f64,
    pub blocks: Vec<Mat9>,
}

impl PropagatorTable {
    /// Table for a time step dt of the profile system.
    pub fn new(grid: ProfileGrid, dt: f64, eps: f64, phase: &Phase) -> Self {
        Self::with_scale(grid, dt / eps, eps, phase)
    }

    /// Table for a step dtau of the rescaled normal-form system.
    pub fn normal_form(grid: ProfileGrid, dtau: f64, eps: f64, phase: &Phase) -> Self {
        Self::with_scale(grid, dtau / (eps * eps), eps, phase)
    }

    fn with_scale(grid: ProfileGrid, s: f64, eps: f64, phase: &Phase) -> Self {
        let modes: Vec<(i32, usize)> = grid
            .harmonics()
            .flat_map(|p| (0..grid.ny).map(move |n| (p, n)))
            .collect();
        let blocks = modes
            .par_iter()
            .map(|&(p, n)| {
                let xi = eps * grid.eta(n) + phase.k * p as f64;
                decompose(xi).exp_phase(s, phase.omega * p as f64)
            })
            .collect();
        PropagatorTable {
            grid,
            s,
            eps,
            blocks,
        }
    }

    pub fn apply(&self, v: &mut ThetaProfile) {
        v.coeffs
            .par_iter_mut()
            .zip(self.blocks.par_iter())
            .for_each(|(c, m)| *c = c.apply(m));
    }
}

pub fn linear_step(v: &ThetaProfile, dt: f64, phase: &Phase) -> ThetaProfile {
    let mut out = v.clone();
    PropagatorTable::new(v.grid, dt, v.eps, phase).apply(&mut out);
    out
}

fn cross3(a: &[C64; 3], b: &[C64; 3]) -> [C64; 3] {
    [
        a[1] * b[2] - a[2] * b[1],
        a[2] * b[0] - a[0] * b[2],
        a[0] * b[1] - a[1] * b[0],
    ]
}

/// One classical RK4 step of h' = m x h, m' = -m x h (the pointwise v' = B(v, v)).
pub fn rk4_point(h: &mut [C64; 3], m: &mut [C64; 3], dt: f64) {
    let f = |h: &[C64; 3], m: &[C64; 3]| cross3(m, h);
    let add = |a: &[C64; 3], b: &[C64; 3], s: f64| [a[0] + b[0] * s, a[1] + b[1] * s, a[2] + b[2] * s];
    let k1 = f(h, m);
    let (h2, m2) = (add(h, &k1, 0.5 * dt), add(m, &k1, -0.5 * dt));
    let k2 = f(&h2, &m2);
    let (h3, m3) = (add(h, &k2, 0.5 * dt), add(m, &k2, -0.5 * dt));
    let k3 = f(&h3, &m3);
    let (h4, m4) = (add(h, &k3, dt), add(m, &k3, -dt));
    let k4 = f(&h4, &m4);
    for i in 0..3 {
        let inc = (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]) * (dt / 6.0);
        h[i] += inc;
        m[i] -= inc;
    }
}

/// Pseudo-spectral pointwise RK4 for v' = B(v, v) with 2/3 dealiasing.
#[derive(Clone, Debug)]
pub struct NonlinearStepper {
    pub fft: ProfileFft,
    pub max_dt: f64,
}

impl NonlinearStepper {
    pub fn new(grid: ProfileGrid, max_dt: f64) -> Self {
        NonlinearStepper {
            fft: ProfileFft::new(grid),
            max_dt,
        }
    }

    pub fn step(&self, v: &ThetaProfile, dt: f64) -> Result<ThetaProfile, EvolveError> {
        if dt > self.max_dt * STEP_SLACK {
            return Err(EvolveError::StepTooLarge {
                step: dt,
                max: self.max_dt,
            });
        }
        let mut f = self.fft.to_physical(v);
        let npts = self.fft.n_points();
        let (e_part, hm) = f.split_at_mut(3);
        let _ = e_part;
        let (hs, ms) = hm.split_at_mut(3);
        let mut hv: Vec<[C64; 3]> = (0..npts).map(|i| [hs[0][i], hs[1][i], hs[2][i]]).collect();
        let mut mv: Vec<[C64; 3]> = (0..npts).map(|i| [ms[0][i], ms[1][i], ms[2][i]]).collect();
        hv.par_iter_mut()
            .zip(mv.par_iter_mut())
            .for_each(|(h, m)| rk4_point(h, m, dt));
        for i in 0..npts {
            for c in 0..3 {
                hs[c][i] = hv[i][c];
                ms[c][i] = mv[i][c];
            }
        }
        Ok(self.fft.from_physical(f, v.eps, true))
    }
}

pub fn nonlinear_step(v: &ThetaProfile, dt: f64) -> Result<ThetaProfile, EvolveError> {
    NonlinearStepper::new(v.grid, f64::INFINITY).step(v, dt)
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Diagnostics {
    pub t: f64,
    pub l2_total: f64,
    pub linf_total: f64,
    pub l2_pi0: f64,
    pub l2_pis: f64,
    pub linf_pi0: f64,
    pub linf_pis: f64,
}

/// L2 and sup norms split by the constant projectors.
pub fn diagnostics(fft: &ProfileFft, v: &ThetaProfile, t: f64) -> Diagnostics {
    let f = fft.to_physical(v);
    let (mut s0, mut ss): (f64, f64) = (0.0, 0.0);
    for i in 0..fft.n_points() {
        let mut a = 0.0;
        let mut b = 0.0;
        for (comp, field) in f.iter().enumerate() {
            let x = field[i].norm_sqr();
            if comp % 3 == 0 {
                b += x;
            } else {
                a += x;
            }
        }
        s0 = s0.max(a);
        ss = ss.max(b);
    }
    let mut t0 = 0.0;
    let mut ts = 0.0;
    let mut tt: f64 = 0.0;
    for i in 0..fft.n_points() {
        let x: f64 = f.iter().map(|c| c[i].norm_sqr()).sum();
        tt = tt.max(x);
    }
    for cf in &v.coeffs {
        t0 += cf.pi0().norm_sqr();
        ts += cf.pis().norm_sqr();
    }
    let w = 2.0 * std::f64::consts::PI * v.grid.ly;
    Diagnostics {
        t,
        l2_total: (w * (t0 + ts)).sqrt(),
        linf_total: tt.sqrt(),
        l2_pi0: (w * t0).sqrt(),
        l2_pis: (w * ts).sqrt(),
        linf_pi0: s0.sqrt(),
        linf_pis: ss.sqrt(),
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EvolveOptions {
    /// Interior snapshot count; t = 0 and t_end are added.
    pub snapshots: usize,
    pub tail_threshold: f64,
    pub blowup_bound: f64,
    pub linear_only: bool,
    pub max_dt: f64,
}

impl Default for EvolveOptions {
    fn default() -> Self {
        EvolveOptions {
            snapshots: 64,
            tail_threshold: 1e-8,
            blowup_bound: 100.0,
            linear_only: false,
            max_dt: 0.05,
        }
    }
}

impl EvolveOptions {
    /// Snapshot times and the substep count between consecutive ones.
    pub fn schedule(&self, t_end: f64, dt: f64) -> (Vec<f64>, usize) {
        let intervals = self.snapshots + 1;
        let per = ((t_end / intervals as f64) / dt).ceil().max(1.0) as usize;
        let times = (0..=intervals)
            .map(|i| t_end * i as f64 / intervals as f64)
            .collect();
        (times, per)
    }
}

#[derive(Clone, Debug)]
pub struct Snapshot {
    pub t: f64,
    pub profile: ThetaProfile,
    pub diagnostics: Diagnostics,
}

#[derive(Clone, Debug, Default)]
pub struct Trajectory {
    pub snapshots: Vec<Snapshot>,
}

impl Trajectory {
    pub fn diagnostics(&self) -> Vec<Diagnostics> {
        self.snapshots.iter().map(|s| s.diagnostics).collect()
    }
}

fn check_health(
    fft: &ProfileFft,
    v: &ThetaProfile,
    t: f64,
    opts: &EvolveOptions,
) -> Result<Diagnostics, EvolveError> {
    let d = diagnostics(fft, v, t);
    if !d.linf_total.is_finite() || d.linf_total > opts.blowup_bound {
        return Err(EvolveError::Blowup {
            t,
            sup: d.linf_total,
            bound: opts.blowup_bound,
        });
    }
    let tail = v.tail_fraction();
    if tail > opts.tail_threshold {
        return Err(EvolveError::UnderResolved {
            t,
            tail,
            threshold: opts.tail_threshold,
        });
    }
    Ok(d)
}

/// Strang splitting L(dt/2) N(dt) L(dt/2); `observe` sees every snapshot as it is produced.
pub fn evolve_profile_with<F>(
    v0: &ThetaProfile,
    t_end: f64,
    dt: f64,
    phase: &Phase,
    opts: &EvolveOptions,
    mut observe: F,
) -> Result<(), EvolveError>
where
    F: FnMut(&Snapshot) -> Result<(), EvolveError>,
{
    let grid = v0.grid;
    let eps = v0.eps;
    let (times, per) = opts.schedule(t_end, dt);
    let h = if t_end > 0.0 {
        (times[1] - times[0]) / per as f64
    } else {
        0.0
    };
    let stepper = NonlinearStepper::new(grid, opts.max_dt);
    let fft = &stepper.fft;
    let half = PropagatorTable::new(grid, 0.5 * h, eps, phase);
    let full = PropagatorTable::new(grid, h, eps, phase);

    let mut v = v0.clone();
    let d = check_health(fft, &v, 0.0, opts)?;
    observe(&Snapshot {
        t: 0.0,
        profile: v.clone(),
        diagnostics: d,
    })?;
    if t_end <= 0.0 {
        return Ok(());
    }
    for &t in &times[1..] {
        half.apply(&mut v);
        for s in 0..per {
            if !opts.linear_only {
                v = stepper.step(&v, h)?;
            }
            if s + 1 < per {
                full.apply(&mut v);
            }
        }
        half.apply(&mut v);
        let d = check_health(fft, &v, t, opts)?;
        observe(&Snapshot {
            t,
            profile: v.clone(),
            diagnostics: d,
        })?;
    }
    Ok(())
}

pub fn evolve_profile(
    v0: &ThetaProfile,
    t_end: f64,
    dt: f64,
    phase: &Phase,
    opts: &EvolveOptions,
) -> Result<Trajectory, EvolveError> {
    let mut traj = Trajectory::default();
    evolve_profile_with(v0, t_end, dt, phase, opts, |s| {
        traj.snapshots.push(s.clone());
        Ok(())
    })?;
    Ok(traj)
}

pub fn split_components(v: &ThetaProfile) -> (ThetaProfile, ThetaProfile) {
    (v.pi0(), v.pis())
}

/// (V0, N) with V0 = Pi_0 V and N = W_s - J(V0, V0), W_s = Pi_s V / eps.
#[derive(Clone, Debug)]
pub struct NormalFormState {
    pub v0: ThetaProfile,
    pub n: ThetaProfile,
    pub tau: f64,
}

impl NormalFormState {
    pub fn from_profile(v: &ThetaProfile, kernel: &NormalFormKernel, tau: f64) -> Self {
        let v0 = v.pi0();
        let j = kernel.apply(&v0, &v0).expect("kernel grid");
        let n = v.pis().scale(C64::new(1.0 / v.eps, 0.0)).sub(&j);
        NormalFormState { v0, n, tau }
    }

    /// V = V0 + eps (N + J(V0, V0))
    pub fn reconstruct(&self, kernel: &NormalFormKernel) -> ThetaProfile {
        let j = kernel.apply(&self.v0, &self.v0).expect("kernel grid");
        let ws = self.n.add(&j);
        self.v0.add(&ws.scale(C64::new(self.v0.eps, 0.0)))
    }
}

/// Profile of pointwise products B(u, v) with 2/3 dealiasing.
pub fn product_b(fft: &ProfileFft, u: &ThetaProfile, v: &ThetaProfile) -> ThetaProfile {
    let fu = fft.to_physical(u);
    let fv = fft.to_physical(v);
    let npts = fft.n_points();
    let out: Vec<StateVector> = (0..npts)
        .into_par_iter()
        .map(|i| {
            let a = StateVector(std::array::from_fn(|c| fu[c][i]));
            let b = StateVector(std::array::from_fn(|c| fv[c][i]));
            bilinear_b(&a, &b)
        })
        .collect();
    let fields: Vec<Vec<C64>> = (0..9)
        .map(|c| out.iter().map(|s| s.0[c]).collect())
        .collect();
    fft.from_physical(fields, u.eps, true)
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct NormalFormDiagnostics {
    pub tau: f64,
    pub l2_v0: f64,
    pub l2_n: f64,
    /// |dN/dtau| in the interaction frame (the right side of the N equation).
    pub dn_dtau: f64,
    /// |dW_s/dtau| in the interaction frame, (1/eps^2) Pi_s B(V0, V0).
    pub dws_dtau: f64,
}

pub struct NormalFormSolver {
    pub kernel: NormalFormKernel,
    pub fft: ProfileFft,
    pub phase: Phase,
    pub eps: f64,
}

impl NormalFormSolver {
    pub fn new(grid: ProfileGrid, eps: f64, phase: &Phase) -> Self {
        let fft = ProfileFft::new(grid);
        NormalFormSolver {
            kernel: NormalFormKernel::new(&fft, eps, phase),
            fft,
            phase: *phase,
            eps,
        }
    }

    /// (F0, FN) = (2 Pi_0 B(V0, N + J(V0,V0)), -2 J(F0, V0)); J is symmetric, so d/dtau J(V0,V0) = 2 J(F0, V0).
    pub fn rhs(&self, v0: &ThetaProfile, n: &ThetaProfile) -> (ThetaProfile, ThetaProfile) {
        let j = self.kernel.apply(v0, v0).expect("grid");
        let ws = n.add(&j);
        let b = product_b(&self.fft, v0, &ws).pi0();
        let fnn = self.kernel.apply(&b, v0).expect("grid").scale(C64::new(-4.0, 0.0));
        (b.scale(C64::new(2.0, 0.0)), fnn)
    }

    pub fn diagnostics(&self, s: &NormalFormState) -> NormalFormDiagnostics {
        let (_, fnn) = self.rhs(&s.v0, &s.n);
        let bs = product_b(&self.fft, &s.v0, &s.v0).pis();
        NormalFormDiagnostics {
            tau: s.tau,
            l2_v0: s.v0.l2(),
            l2_n: s.n.l2(),
            dn_dtau: fnn.l2(),
            dws_dtau: bs.l2() / (self.eps * self.eps),
        }
    }

    fn rk4(&self, s: &NormalFormState, h: f64) -> NormalFormState {
        let c = |x: f64| C64::new(x, 0.0);
        let (a0, an) = self.rhs(&s.v0, &s.n);
        let mut v = s.v0.clone();
        let mut n = s.n.clone();
        v.axpy(c(0.5 * h), &a0);
        n.axpy(c(0.5 * h), &an);
        let (b0, bn) = self.rhs(&v, &n);
        let mut v = s.v0.clone();
        let mut n = s.n.clone();
        v.axpy(c(0.5 * h), &b0);
        n.axpy(c(0.5 * h), &bn);
        let (c0, cn) = self.rhs(&v, &n);
        let mut v = s.v0.clone();
        let mut n = s.n.clone();
        v.axpy(c(h), &c0);
        n.axpy(c(h), &cn);
        let (d0, dn) = self.rhs(&v, &n);
        let mut v = s.v0.clone();
        let mut n = s.n.clone();
        for (x, k, w) in [(&a0, &an, 1.0), (&b0, &bn, 2.0), (&c0, &cn, 2.0), (&d0, &dn, 1.0)] {
            v.axpy(c(w * h / 6.0), x);
            n.axpy(c(w * h / 6.0), k);
        }
        NormalFormState { v0: v, n, tau: s.tau }
    }

    /// Strang splitting in tau; snapshots follow the same cadence as `evolve_profile`.
    pub fn evolve(
        &self,
        state: &NormalFormState,
        tau_end: f64,
        dtau: f64,
        opts: &EvolveOptions,
    ) -> Result<Vec<(NormalFormState, NormalFormDiagnostics)>, EvolveError> {
        let (times, per) = opts.schedule(tau_end, dtau);
        let mut out = Vec::with_capacity(times.len());
        let mut s = state.clone();
        out.push((s.clone(), self.diagnostics(&s)));
        if tau_end <= 0.0 {
            return Ok(out);
        }
        let h = (times[1] - times[0]) / per as f64;
        if h > opts.max_dt * STEP_SLACK {
            return Err(EvolveError::StepTooLarge {
                step: h,
                max: opts.max_dt,
            });
        }
        let grid = self.fft.grid;
        let half = PropagatorTable::normal_form(grid, 0.5 * h, self.eps, &self.phase);
        let full = PropagatorTable::normal_form(grid, h, self.eps, &self.phase);
        let t0 = state.tau;
        for &t in &times[1..] {
            half.apply(&mut s.v0);
            half.apply(&mut s.n);
            for k in 0..per {
                if !opts.linear_only {
                    s = self.rk4(&s, h);
                }
                if k + 1 < per {
                    full.apply(&mut s.v0);
                    full.apply(&mut s.n);
                }
            }
            half.apply(&mut s.v0);
            half.apply(&mut s.n);
            s.tau = t0 + t;
            let d = self.diagnostics(&s);
            let sup = s.v0.l1_coeffs() + s.n.l1_coeffs() * self.eps;
            if !sup.is_finite() || sup > opts.blowup_bound {
                return Err(EvolveError::Blowup {
                    t: s.tau,
                    sup,
                    bound: opts.blowup_bound,
                });
            }
            out.push((s.clone(), d));
        }
        Ok(out)
    }
}

pub fn evolve_normal_form(
    state: &NormalFormState,
    tau_end: f64,
    dtau: f64,
    phase: &Phase,
    opts: &EvolveOptions,
) -> Result<Vec<(NormalFormState, NormalFormDiagnostics)>, EvolveError> {
    NormalFormSolver::new(state.v0.grid, state.v0.eps, phase).evolve(state, tau_end, dtau, opts)
}
