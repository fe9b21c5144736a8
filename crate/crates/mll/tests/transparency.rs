use mll::algebra::{bilinear_b, c, StateVector, C64, ZERO};
use mll::profile::{ProfileGrid, ThetaProfile};
use mll::spectral::{branch_eigenvalue, branch_vector, solve_phase, Phase, Sign};
use mll::transparency::*;
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn carrier() -> Phase {
    solve_phase(2.0, Sign::Plus).unwrap()
}

fn random_state(rng: &mut ChaCha8Rng) -> StateVector {
    StateVector(std::array::from_fn(|_| c(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0))))
}

/// Random coefficients on |p| <= P and the kept y band.
fn random_profile(grid: ProfileGrid, eps: f64, rng: &mut ChaCha8Rng) -> ThetaProfile {
    let mut v = ThetaProfile::zeros(grid, eps);
    for p in grid.harmonics() {
        for n in 0..grid.ny {
            if grid.keep_y(n) {
                *v.at_mut(p, n) = random_state(rng);
            }
        }
    }
    v
}

#[test]
fn closed_form_matches_direct() {
    let pts = [-7.5, -1.3, -0.2, 0.4, 2.0, 16.0 / 3.0, 11.0];
    for &x in &pts {
        for &y in &pts {
            for j in 1..=6 {
                for j2 in 1..=6 {
                    assert!(closed_form_check(x, y, j, j2).unwrap() < 1e-10);
                    let direct = pis_b(&branch_vector(x, j).unwrap(), &branch_vector(y, j2).unwrap());
                    let red = reduced_form_value(x, y, j, j2).unwrap();
                    assert!((direct - red).norm() < 1e-10);
                }
            }
        }
    }
}

#[test]
fn same_sign_pairs_vanish() {
    for &(x, y) in &[(0.3, -4.0), (2.0, 2.0), (-9.0, 0.5)] {
        for j in 1..=6 {
            for j2 in 1..=6 {
                if Sign::of_branch(j) == Sign::of_branch(j2) {
                    assert_eq!(strong_transparency_ratio(x, y, j, j2), 0.0);
                    assert_eq!(reduced_form_value(x, y, j, j2).unwrap(), StateVector::ZERO);
                }
            }
        }
    }
}

#[test]
fn degenerate_branch_is_an_error() {
    assert!(closed_form_value(0.0, 1.0, 3, 2).is_err());
    assert!(closed_form_check(1.0, 1.0, 0, 2).is_err());
}

#[test]
fn small_scan() {
    let rep = transparency_scan(5.0, 21);
    assert!(rep.max_ratio.is_finite() && rep.max_ratio > 0.0);
    assert!(rep.closed_form_max_err < 1e-10);
    assert_eq!(rep.same_sign_max, 0.0);
    assert!(rep.ratio_formula_max_err < 1e-8, "{}", rep.ratio_formula_max_err);
    let w = &rep.worst_point;
    let r = strong_transparency_ratio(w.xi, w.eta, w.j, w.j2);
    assert_eq!(r, rep.max_ratio);
    let json = serde_json::to_value(&rep).unwrap();
    assert!(json.get("max_ratio").is_some() && json.get("closed_form_max_err").is_some());
}

#[test]
fn j_vanishes_against_zero() {
    let g = ProfileGrid::new(2, 12, 10.0);
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let u = random_profile(g, 0.3, &mut rng);
    let z = ThetaProfile::zeros(g, 0.3);
    let j = apply_j(&u, &z, 0.3, &carrier()).unwrap();
    assert!(j.coeffs.iter().all(|s| *s == StateVector::ZERO));
    let other = ThetaProfile::zeros(ProfileGrid::new(2, 16, 10.0), 0.3);
    assert!(apply_j(&u, &other, 0.3, &carrier()).is_err());
}

/// Double convolution over all mode pairs with the pointwise kernel.
fn j_direct(u: &ThetaProfile, v: &ThetaProfile, phase: &Phase) -> ThetaProfile {
    let g = u.grid;
    let eps = u.eps;
    let pm = g.p_max as i32;
    let mut out = ThetaProfile::zeros(g, eps);
    for p in g.harmonics() {
        for q in g.harmonics() {
            if (p + q).abs() > pm {
                continue;
            }
            for n1 in 0..g.ny {
                for n2 in 0..g.ny {
                    let s = g.signed(n1) + g.signed(n2);
                    if !g.keep_y(g.slot(s)) || s.abs() > g.ny as i64 / 2 {
                        continue;
                    }
                    let x1 = eps * g.eta(n1) + phase.k * p as f64;
                    let x2 = eps * g.eta(n2) + phase.k * q as f64;
                    let add = j_pq(u.at(p, n1), x1, v.at(q, n2), x2);
                    *out.at_mut(p + q, g.slot(s)) += add;
                }
            }
        }
    }
    out
}

#[test]
fn apply_matches_direct_convolution() {
    let ph = carrier();
    let g = ProfileGrid::new(2, 12, 10.0);
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    for _ in 0..3 {
        let u = random_profile(g, 0.3, &mut rng);
        let v = random_profile(g, 0.3, &mut rng);
        let fast = apply_j(&u, &v, 0.3, &ph).unwrap();
        let slow = j_direct(&u, &v, &ph);
        let err = fast.sub(&slow).l2() / slow.l2();
        assert!(err < 1e-12, "relative error {err}");
        // symmetric in its arguments
        let swapped = apply_j(&v, &u, 0.3, &ph).unwrap();
        assert!(fast.sub(&swapped).l2() < 1e-12 * fast.l2());
        // output lies along (0, -e1, e1)
        for s in &fast.coeffs {
            assert!((s.0[3] + s.0[6]).norm() < 1e-12);
            assert!(s.pi0().max_abs() == 0.0);
        }
    }
}

#[test]
fn kernel_vectors_limit_at_zero() {
    let (m0, p0) = kernel_vectors(0.0);
    let (m1, p1) = kernel_vectors(1e-7);
    assert!((m0 - m1).max_abs() < 1e-5);
    assert!((p0 - p1).max_abs() < 1e-5);
}

fn branch_pair() -> impl Strategy<Value = (f64, f64, usize, usize)> {
    (
        prop_oneof![-20.0f64..-0.05, 0.05f64..20.0],
        prop_oneof![-20.0f64..-0.05, 0.05f64..20.0],
        1usize..=6,
        1usize..=6,
    )
}

proptest! {
    #[test]
    fn defining_identity((x, y, j, j2) in branch_pair()) {
        // Pi_s B(Q_j(xi), Q_j2(eta)) = -i (lambda_j + lambda_j2) J(Q_j, Q_j2)
        let a = branch_vector(x, j).unwrap();
        let b = branch_vector(y, j2).unwrap();
        let lhs = pis_b(&a, &b);
        let lam = branch_eigenvalue(x, j) + branch_eigenvalue(y, j2);
        let rhs = j_pq(&a, x, &b, y) * c(0.0, -lam);
        prop_assert!((lhs - rhs).norm() < 1e-9 * (1.0 + lhs.norm()));
    }

    #[test]
    fn j_bilinear(seed in 0u64..1000, x in -5.0f64..5.0, y in -5.0f64..5.0, re in -2.0f64..2.0, im in -2.0f64..2.0) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let (a, a2, b) = (random_state(&mut rng), random_state(&mut rng), random_state(&mut rng));
        let s = C64::new(re, im);
        let lhs = j_pq(&(a * s + a2), x, &b, y);
        let rhs = j_pq(&a, x, &b, y) * s + j_pq(&a2, x, &b, y);
        prop_assert!((lhs - rhs).norm() < 1e-10 * (1.0 + lhs.norm()));
        prop_assert!((j_pq(&a, x, &b, y) - j_pq(&b, y, &a, x)).norm() < 1e-12 * (1.0 + lhs.norm()));
        prop_assert_eq!(j_pq(&StateVector::ZERO, x, &b, y), StateVector::ZERO);
    }

    #[test]
    fn kernel_vectors_bounded(x in -50.0f64..50.0) {
        let (m, p) = kernel_vectors(x);
        prop_assert!(m.norm().is_finite() && p.norm().is_finite());
        prop_assert!(m.norm() < 10.0 && p.norm() < 10.0);
        prop_assert_eq!(m.0[0], ZERO);
    }

    #[test]
    fn ratio_symmetric((x, y, j, j2) in branch_pair()) {
        let r = strong_transparency_ratio(x, y, j, j2);
        let s = strong_transparency_ratio(y, x, j2, j);
        prop_assert!((r - s).abs() <= 1e-10 * (1.0 + r));
        let u = bilinear_b(&branch_vector(x, j).unwrap(), &branch_vector(y, j2).unwrap());
        prop_assert!(u.pis().norm().is_finite());
    }
}
