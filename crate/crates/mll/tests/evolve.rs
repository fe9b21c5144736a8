use mll::algebra::{a1_matrix, apply_l0, c, lp_matrix, max_abs, Mat9, StateVector, C64, ZERO};
use mll::error::EvolveError;
use mll::evolve::*;
use mll::io::{load_snapshot, save_snapshot};
use mll::profile::{ProfileFft, ProfileGrid, ThetaProfile};
use mll::spectral::{solve_phase, Phase, Sign};
use mll::transparency::NormalFormKernel;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn carrier() -> Phase {
    solve_phase(2.0, Sign::Plus).unwrap()
}

/// exp(m) by scaling and squaring of a 20-term Taylor series.
fn expm(m: &Mat9) -> Mat9 {
    let norm = m.iter().map(|z| z.norm()).sum::<f64>();
    let sq = (norm.max(1.0).log2().ceil() as i32 + 1).max(0);
    let a = m * c(0.5f64.powi(sq), 0.0);
    let mut term = Mat9::identity();
    let mut sum = Mat9::identity();
    for j in 1..=20 {
        term = term * a * c(1.0 / j as f64, 0.0);
        sum += term;
    }
    for _ in 0..sq {
        sum = sum * sum;
    }
    sum
}

/// Pi_s part of v rotated by exp(i omega p t / eps), the linear Pi_s flow.
fn pis_rotated(v: &ThetaProfile, omega: f64, t: f64) -> ThetaProfile {
    let mut out = v.pis();
    for p in v.grid.harmonics() {
        let ph = C64::from_polar(1.0, omega * p as f64 * t / v.eps);
        for z in out.harmonic_mut(p) {
            *z = z.scale(ph);
        }
    }
    out
}

/// A smooth real profile: random low modes, conjugate-symmetric by construction.
fn real_profile(grid: ProfileGrid, eps: f64, amp: f64, seed: u64) -> ThetaProfile {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut v = ThetaProfile::zeros(grid, eps);
    let nmax = (grid.ny / 8) as i64;
    for p in 0..=(grid.p_max as i32).min(2) {
        for s in -nmax..=nmax {
            if p == 0 && s < 0 {
                continue;
            }
            let decay = (-(s * s) as f64 / (nmax * nmax) as f64 * 4.0).exp() * amp;
            let z = StateVector(std::array::from_fn(|_| {
                c(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)) * decay
            }));
            let n = grid.slot(s);
            let m = grid.slot(-s);
            if p == 0 && s == 0 {
                *v.at_mut(0, 0) = StateVector(z.0.map(|x| c(x.re, 0.0)));
            } else {
                *v.at_mut(p, n) = z;
                *v.at_mut(-p, m) = z.conj();
            }
        }
    }
    v
}

#[test]
fn propagator_matches_dense_exponential() {
    let ph = carrier();
    let grid = ProfileGrid::new(3, 16, 12.0);
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    for _ in 0..20 {
        let eps = rng.gen_range(0.01..0.3);
        let dt = rng.gen_range(1e-3..0.1);
        let p = rng.gen_range(-3i32..=3);
        let n = rng.gen_range(0..grid.ny);
        let table = PropagatorTable::new(grid, dt, eps, &ph);
        let block = table.blocks[grid.index(p, n)];
        // V_t = -(i eta A + L_p / eps) V
        let gen = (a1_matrix() * c(0.0, grid.eta(n)) + lp_matrix(p, ph.omega, ph.k) * c(1.0 / eps, 0.0)) * c(-dt, 0.0);
        let want = expm(&gen);
        assert!(max_abs(&(block - want)) < 1e-9, "p {p} n {n} eps {eps} dt {dt}: {:e}", max_abs(&(block - want)));
        assert!(max_abs(&(block * block.adjoint() - Mat9::identity())) < 1e-12);
    }
}

#[test]
fn zero_mode_block_rotates_l0_eigenvector() {
    let grid = ProfileGrid::new(1, 8, 10.0);
    let (dt, eps) = (0.03, 0.1);
    let table = PropagatorTable::new(grid, dt, eps, &carrier());
    let block = table.blocks[grid.index(0, 0)];
    let w = [ZERO, c(1.0, 0.0), c(0.0, 1.0)];
    let u = StateVector::new([ZERO; 3], w, w.map(|x| -x));
    assert!((apply_l0(&u) - u * c(0.0, 2.0)).max_abs() < 1e-15);
    let want = u * C64::from_polar(1.0, -2.0 * dt / eps);
    assert!((u.apply(&block) - want).max_abs() < 1e-12);
}

#[test]
fn linear_flow_conserves_l2_and_rotates_pis() {
    let ph = carrier();
    let grid = ProfileGrid::new(3, 32, 20.0);
    let v0 = real_profile(grid, 0.05, 1.0, 1);
    let table = PropagatorTable::new(grid, 0.01, 0.05, &ph);
    let mut v = v0.clone();
    for _ in 0..1000 {
        table.apply(&mut v);
    }
    assert!((v.l2() - v0.l2()).abs() < 1e-12 * v0.l2());
    assert!(v.pis().sub(&pis_rotated(&v0, ph.omega, 10.0)).l2() < 1e-11 * v0.l2());
    // round-off only, accumulated over 1000 steps
    assert!(v.reality_defect() < 1e-11);
    let single = linear_step(&v0, 0.01, &ph);
    let mut once = v0.clone();
    table.apply(&mut once);
    assert_eq!(single, once);
}

fn rotate(v: [f64; 3], axis: [f64; 3], angle: f64) -> [f64; 3] {
    let n = (axis[0] * axis[0] + axis[1] * axis[1] + axis[2] * axis[2]).sqrt();
    let k = axis.map(|x| x / n);
    let kv = [k[1] * v[2] - k[2] * v[1], k[2] * v[0] - k[0] * v[2], k[0] * v[1] - k[1] * v[0]];
    let kd = k[0] * v[0] + k[1] * v[1] + k[2] * v[2];
    let (s, co) = angle.sin_cos();
    std::array::from_fn(|i| v[i] * co + kv[i] * s + k[i] * kd * (1.0 - co))
}

#[test]
fn pointwise_step_matches_exact_rotation() {
    // h + m is conserved and m rotates about it at rate |h + m|
    let grid = ProfileGrid::new(1, 8, 10.0);
    let h = [0.3, -0.2, 0.5];
    let m = [-0.1, 0.4, 0.2];
    let s: [f64; 3] = std::array::from_fn(|i| h[i] + m[i]);
    let rate = (s[0] * s[0] + s[1] * s[1] + s[2] * s[2]).sqrt();
    let mut v = ThetaProfile::zeros(grid, 0.1);
    let e = [c(0.7, 0.0), ZERO, c(-0.2, 0.0)];
    *v.at_mut(0, 0) = StateVector::new(e, h.map(|x| c(x, 0.0)), m.map(|x| c(x, 0.0)));
    let mut errs = Vec::new();
    for dt in [0.4, 0.2] {
        let out = nonlinear_step(&v, dt).unwrap();
        let got = *out.at(0, 0);
        let mt = rotate(m, s, rate * dt);
        let want = StateVector::new(e, std::array::from_fn(|i| c(s[i] - mt[i], 0.0)), mt.map(|x| c(x, 0.0)));
        errs.push((got - want).norm());
        // every other mode stays empty
        let rest: f64 = out.coeffs.iter().map(|z| z.norm()).sum::<f64>() - got.norm();
        assert!(rest < 1e-14);
    }
    assert!(errs[1] < 1e-5);
    let ratio = errs[0] / errs[1];
    assert!((24.0..40.0).contains(&ratio), "local order ratio {ratio}");
}

#[test]
fn e_only_profile_is_fixed_by_nonlinear_step() {
    let grid = ProfileGrid::new(2, 16, 10.0);
    let v = real_profile(grid, 0.1, 1.0, 2).map(|s| StateVector::new(s.e(), [ZERO; 3], [ZERO; 3]));
    let mut clean = v.clone();
    clean.dealias();
    let out = nonlinear_step(&clean, 0.05).unwrap();
    assert!(out.sub(&clean).l2() < 1e-14 * clean.l2());
}

#[test]
fn zero_datum_stays_zero() {
    let grid = ProfileGrid::new(2, 16, 10.0);
    let v = ThetaProfile::zeros(grid, 0.1);
    let traj = evolve_profile(&v, 0.2, 0.01, &carrier(), &EvolveOptions::default()).unwrap();
    assert_eq!(traj.snapshots.len(), 66);
    for s in &traj.snapshots {
        assert_eq!(s.profile, v);
        assert_eq!(s.diagnostics.l2_total, 0.0);
    }
}

#[test]
fn strang_flow_preserves_reality_and_hits_snapshot_times() {
    let grid = ProfileGrid::new(4, 32, 20.0);
    let v = real_profile(grid, 0.1, 0.3, 3);
    let opts = EvolveOptions {
        snapshots: 3,
        tail_threshold: 1.0,
        ..Default::default()
    };
    let traj = evolve_profile(&v, 0.4, 0.01, &carrier(), &opts).unwrap();
    let times: Vec<f64> = traj.snapshots.iter().map(|s| s.t).collect();
    assert_eq!(times, vec![0.0, 0.1, 0.2, 0.30000000000000004, 0.4]);
    for s in &traj.snapshots {
        assert!(s.profile.reality_defect() < 1e-12);
        let d = s.diagnostics;
        assert!((d.l2_total.powi(2) - d.l2_pi0.powi(2) - d.l2_pis.powi(2)).abs() < 1e-10 * d.l2_total.powi(2));
        assert!(d.linf_total <= d.linf_pi0 + d.linf_pis + 1e-12);
    }
    assert_eq!(traj.diagnostics().len(), 5);
}

#[test]
fn linear_only_rotates_pis() {
    let ph = carrier();
    let grid = ProfileGrid::new(3, 32, 20.0);
    let v = real_profile(grid, 0.1, 0.5, 4);
    let opts = EvolveOptions {
        snapshots: 2,
        linear_only: true,
        tail_threshold: 1.0,
        ..Default::default()
    };
    let traj = evolve_profile(&v, 0.3, 0.01, &ph, &opts).unwrap();
    let last = &traj.snapshots.last().unwrap().profile;
    assert!(last.pis().sub(&pis_rotated(&v, ph.omega, 0.3)).l2() < 1e-12 * v.l2());
    let (a, b) = split_components(last);
    assert_eq!(a.add(&b), *last);
    assert!(a.pis().l2() == 0.0 && b.pi0().l2() == 0.0);
}

#[test]
fn failure_modes() {
    let grid = ProfileGrid::new(3, 32, 20.0);
    let v = real_profile(grid, 0.1, 0.5, 6);
    let ph = carrier();
    let tiny_bound = EvolveOptions {
        blowup_bound: 1e-6,
        ..Default::default()
    };
    assert!(matches!(
        evolve_profile(&v, 0.1, 0.01, &ph, &tiny_bound),
        Err(EvolveError::Blowup { .. })
    ));
    let strict_tail = EvolveOptions {
        tail_threshold: 0.0,
        ..Default::default()
    };
    let mut noisy = v.clone();
    *noisy.at_mut(3, 1) = StateVector::from_real([0.1; 9]);
    assert!(matches!(
        evolve_profile(&noisy, 0.1, 0.01, &ph, &strict_tail),
        Err(EvolveError::UnderResolved { .. })
    ));
    let stepper = NonlinearStepper::new(grid, 0.01);
    assert!(matches!(stepper.step(&v, 0.02), Err(EvolveError::StepTooLarge { .. })));
}

#[test]
fn normal_form_state_round_trip() {
    let ph = carrier();
    let grid = ProfileGrid::new(3, 32, 20.0);
    let eps = 0.05;
    let v = real_profile(grid, eps, 0.5, 7);
    let fft = ProfileFft::new(grid);
    let kernel = NormalFormKernel::new(&fft, eps, &ph);
    let s = NormalFormState::from_profile(&v, &kernel, 0.0);
    let back = s.reconstruct(&kernel);
    assert!(back.sub(&v).l2() < 1e-13 * v.l2());
    assert_eq!(s.v0, v.pi0());
}

#[test]
fn normal_form_linear_flow_matches_exact_linear_flow() {
    // without B both systems are the same unitary flow, with tau = eps t
    let ph = carrier();
    let grid = ProfileGrid::new(3, 32, 20.0);
    let eps = 0.1;
    let v = real_profile(grid, eps, 0.5, 8);
    let fft = ProfileFft::new(grid);
    let kernel = NormalFormKernel::new(&fft, eps, &ph);
    let opts = EvolveOptions {
        snapshots: 0,
        linear_only: true,
        tail_threshold: 1.0,
        ..Default::default()
    };
    let tau = 0.02;
    let s = NormalFormState::from_profile(&v, &kernel, 0.0);
    let nf = evolve_normal_form(&s, tau, 1e-3, &ph, &opts).unwrap();
    let last = &nf.last().unwrap().0;
    assert!((last.tau - tau).abs() < 1e-15);
    let exact = evolve_profile(&v, tau / eps, 0.01, &ph, &opts).unwrap();
    let want = &exact.snapshots.last().unwrap().profile;
    // N is frozen, so only V0 and its J image move; compare the Pi0 parts
    assert!(last.v0.sub(&want.pi0()).l2() < 1e-12 * v.l2());
}

#[test]
fn snapshot_file_round_trip() {
    let grid = ProfileGrid::new(2, 16, 10.0);
    let v = real_profile(grid, 0.07, 1.0, 9);
    let dir = std::env::temp_dir().join(format!("mll-snap-{}", std::process::id()));
    std::fs::create_dir_all(&dir).unwrap();
    let path = dir.join("v.snap");
    save_snapshot(&path, &v, 0.625).unwrap();
    let (w, t) = load_snapshot(&path).unwrap();
    assert_eq!((w, t), (v, 0.625));
    std::fs::remove_dir_all(&dir).unwrap();
}
