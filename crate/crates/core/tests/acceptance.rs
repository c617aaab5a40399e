//! Ten release criteria, one test each.  Every test prints a single
//! PASS line with its runtime and enforces its time budget; a panic from
//! any assertion is the corresponding FAIL.

use bhfmin_core::energy::{
    bracket_values, check_lemma_bounds, energy_full, energy_reduced_v, energy_reduced_z,
    half_coupling_norm, ModelSpace,
};
use bhfmin_core::fockcheck::{
    build_arena, enumerate_pairings, oracle_compare, ordered_pair_splits,
    string_expectation_formula, FieldOp, FockArena,
};
use bhfmin_core::grid::build_grid;
use bhfmin_core::hsops::{
    func_psd, j_vec, project, random_bogolubov, random_cvec, random_hermitian, random_psd,
    sqrt_psd, BogolubovPair, HSOperator, ProjectMode,
};
use bhfmin_core::optimizer::{minimize, minimize_coherent, MinimizeConfig, Mode};
use bhfmin_core::variational::{fd_check, gradient};
use bhfmin_core::{fro, C, CMat, CVec};
use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use std::time::Instant;

fn finish(name: &str, t0: Instant, budget_s: f64) {
    let dt = t0.elapsed().as_secs_f64();
    println!("criterion {name}: PASS ({dt:.2}s of {budget_s:.0}s budget)");
    assert!(
        dt < budget_s,
        "criterion {name} exceeded its {budget_s}s budget: {dt:.2}s"
    );
}

fn toy_ms16() -> ModelSpace {
    let mut rng = ChaCha8Rng::seed_from_u64(161);
    let antipode: Vec<usize> = (0..16).map(|i| i ^ 1).collect();
    let k = [
        random_hermitian(16, &mut rng),
        random_hermitian(16, &mut rng),
        random_hermitian(16, &mut rng),
    ];
    let omega = random_psd(16, &mut rng, 1.0) + CMat::identity(16, 16) * C::new(0.3, 0.0);
    let g = [
        random_cvec(16, &mut rng),
        random_cvec(16, &mut rng),
        random_cvec(16, &mut rng),
    ];
    ModelSpace::toy(antipode, k, omega, g).unwrap()
}

fn grid_ms64() -> ModelSpace {
    ModelSpace::from_grid(&build_grid(1.0, 2.0, 2, 4, 4).unwrap(), 0.6)
}

/// Toy space sharing the physical symmetry type: momentum components odd
/// under the involution, couplings odd as well.
fn toy_ms16_antisym() -> ModelSpace {
    let mut rng = ChaCha8Rng::seed_from_u64(162);
    let antipode: Vec<usize> = (0..16).map(|i| i ^ 1).collect();
    let odd_op = |rng: &mut ChaCha8Rng| {
        let h = random_hermitian(16, rng);
        let jhj = bhfmin_core::hsops::conjugate_by_j(&antipode, &h);
        (h - jhj) * C::new(0.5, 0.0)
    };
    let k = [odd_op(&mut rng), odd_op(&mut rng), odd_op(&mut rng)];
    let omega = random_psd(16, &mut rng, 1.0) + CMat::identity(16, 16) * C::new(0.3, 0.0);
    let odd_vec = |rng: &mut ChaCha8Rng| {
        let x = random_cvec(16, rng);
        (&x - j_vec(&antipode, &x)) * C::new(0.5, 0.0)
    };
    let g = [odd_vec(&mut rng), odd_vec(&mut rng), odd_vec(&mut rng)];
    ModelSpace::toy(antipode, k, omega, g).unwrap()
}

fn rel(diff: &CMat, reference: &CMat) -> f64 {
    fro(diff) / (1.0 + fro(reference))
}

#[test]
fn criterion_01_psd_reparametrization_identities() {
    let t0 = Instant::now();
    for (space_idx, ms) in [toy_ms16(), grid_ms64()].iter().enumerate() {
        let mut rng = ChaCha8Rng::seed_from_u64(100 + space_idx as u64);
        for trial in 0..25 {
            let scale = [0.5, 2.0, 8.0][trial % 3];
            let z = random_psd(ms.dim, &mut rng, scale);
            let id = CMat::identity(ms.dim, ms.dim);
            let r = func_psd(&z, |l| 1.0 / (l + 1.0)).unwrap();
            let v = func_psd(&z, |l| 0.5 * ((l + 1.0).sqrt() - 1.0 / (l + 1.0).sqrt())).unwrap();
            let w = func_psd(&v, |l| (1.0 + l * l).sqrt()).unwrap();

            let rhs1 = (&z * &z * &r) * C::new(0.25, 0.0);
            assert!(rel(&(&v * &v - &rhs1), &rhs1) < 1e-10, "square identity");
            let rhs2 = ((&z + &id * C::new(2.0, 0.0)) * &z * &r) * C::new(0.25, 0.0);
            assert!(rel(&(&v * &w - &rhs2), &rhs2) < 1e-10, "mixed identity");
            let d = &v - &w;
            assert!(rel(&(&d * &d - &r), &r) < 1e-10, "difference identity");
        }
    }
    finish("01 (PSD reparametrization identities)", t0, 10.0);
}

#[test]
fn criterion_02_both_parametrizations_give_one_energy() {
    let t0 = Instant::now();
    for (space_idx, ms) in [toy_ms16(), grid_ms64()].iter().enumerate() {
        let mut rng = ChaCha8Rng::seed_from_u64(200 + space_idx as u64);
        for trial in 0..25 {
            let scale = [0.4, 1.5, 6.0][trial % 3];
            let z = random_psd(ms.dim, &mut rng, scale);
            let eta = random_cvec(ms.dim, &mut rng);
            let v = func_psd(&z, |l| 0.5 * ((l + 1.0).sqrt() - 1.0 / (l + 1.0).sqrt())).unwrap();
            let ez = energy_reduced_z(ms, &z, &eta, [0.0; 3]).unwrap().total;
            let ev = energy_reduced_v(ms, &v, &eta).unwrap().total;
            assert!(
                (ez - ev).abs() < 1e-10 * (1.0 + ez.abs()),
                "parametrizations disagree: {ez} vs {ev}"
            );
        }
    }
    finish("02 (z- and V-parametrized energies agree)", t0, 10.0);
}

#[test]
fn criterion_03_quartic_trace_rearrangement() {
    let t0 = Instant::now();
    for (space_idx, ms) in [toy_ms16(), grid_ms64()].iter().enumerate() {
        let mut rng = ChaCha8Rng::seed_from_u64(300 + space_idx as u64);
        for trial in 0..25 {
            let scale = [0.5, 2.0, 7.0][trial % 3];
            let z = random_psd(ms.dim, &mut rng, scale);
            let id = CMat::identity(ms.dim, ms.dim);
            let r = func_psd(&z, |l| 1.0 / (l + 1.0)).unwrap();
            let aprime = &z * &z * &r;
            let c = (&z * &z + &z * C::new(2.0, 0.0)) * &r;
            let rz = &r * &z;
            for k in &ms.k {
                let lhs = ((k * &aprime * k * (&id * C::new(4.0, 0.0) + &aprime)).trace()
                    - (k * &c * k * &c).trace())
                    .re
                    / 16.0;
                let rhs = ((k * k * &aprime).trace().re
                    - (k * &z * k * &rz).trace().re)
                    / 4.0;
                assert!(
                    (lhs - rhs).abs() < 1e-9 * (1.0 + rhs.abs()),
                    "trace rearrangement off: {lhs} vs {rhs}"
                );
            }
        }
    }
    finish("03 (quartic trace rearrangement)", t0, 10.0);
}

#[test]
fn criterion_04_equality_family_reaches_the_reduced_energy() {
    let t0 = Instant::now();
    for (space_idx, ms) in [toy_ms16_antisym(), grid_ms64()].iter().enumerate() {
        let mut rng = ChaCha8Rng::seed_from_u64(400 + space_idx as u64);
        for trial in 0..25 {
            let scale = [0.3, 1.0, 3.0][trial % 3];
            let raw = random_psd(ms.dim, &mut rng, scale);
            let v = project(&ms.antipode, &HSOperator::analyze(raw), ProjectMode::Both)
                .unwrap()
                .mat;
            let x = random_cvec(ms.dim, &mut rng);
            let eta = (&x + j_vec(&ms.antipode, &x)) * C::new(0.5, 0.0);
            let u = func_psd(&v, |l| (1.0 + l * l).sqrt()).unwrap();
            let pair = BogolubovPair { u, v: v.clone() };
            let ef = energy_full(ms, &pair, &eta).unwrap().total;
            let er = energy_reduced_v(ms, &v, &eta).unwrap().total;
            assert!(
                (ef - er).abs() < 1e-10 * (1.0 + ef.abs()),
                "equality family misses: {ef} vs {er}"
            );
        }
    }
    finish("04 (symmetric-positive pairs attain the reduced energy)", t0, 20.0);
}

#[test]
fn criterion_05_reduction_ordering_and_bound_margins() {
    let t0 = Instant::now();
    for (space_idx, ms, n_pairs) in [
        (0usize, toy_ms16(), 400usize),
        (1usize, grid_ms64(), 100usize),
    ] {
        let mut rng = ChaCha8Rng::seed_from_u64(500 + space_idx as u64);
        for i in 0..n_pairs {
            let s: f64 = rng.gen();
            let pair = random_bogolubov(&ms.antipode, 5000 + (space_idx * 1000 + i) as u64, s);
            let eta = random_cvec(ms.dim, &mut rng);
            let absv = sqrt_psd(&HSOperator::analyze(pair.v.adjoint() * &pair.v))
                .unwrap()
                .mat;
            let ef = energy_full(&ms, &pair, &eta).unwrap().total;
            let er = energy_reduced_v(&ms, &absv, &eta).unwrap().total;
            let scale = 1.0 + ef.abs() + er.abs();
            assert!(
                ef >= er - 1e-9 * scale,
                "ordering violated at pair {i}: full {ef} < reduced {er}"
            );
        }
        for margins in check_lemma_bounds(&ms, n_pairs, 600 + space_idx as u64, 1.0).unwrap() {
            for nu in 0..3 {
                assert!(
                    margins.field_margin[nu] >= -1e-9 * margins.field_scale[nu],
                    "field bound margin negative"
                );
                assert!(
                    margins.trace_margin[nu] >= -1e-9 * margins.trace_scale[nu],
                    "trace bound margin negative"
                );
            }
        }
    }
    finish("05 (reduction ordering and bound margins)", t0, 60.0);
}

#[test]
fn criterion_06_gradient_finite_difference_audit() {
    let t0 = Instant::now();
    let ms = ModelSpace::from_grid(&build_grid(1.0, 2.0, 1, 2, 4).unwrap(), 0.6);
    let mut rng = ChaCha8Rng::seed_from_u64(606);
    for point in 0..5 {
        let z = random_psd(ms.dim, &mut rng, 0.8) + CMat::identity(ms.dim, ms.dim) * C::new(0.2, 0.0);
        let eta = random_cvec(ms.dim, &mut rng);
        let p = if point % 2 == 0 {
            [0.0; 3]
        } else {
            [0.1, -0.05, 0.2]
        };
        let report = fd_check(&ms, &z, &eta, p, 20, 6600 + point as u64).unwrap();
        assert!(
            report.max_rel_error < 1e-6,
            "directional derivative mismatch {} at point {point}",
            report.max_rel_error
        );
        for ratio in &report.remainder_ratios {
            assert!(
                (3.2..=4.8).contains(ratio),
                "remainder ratio {ratio} outside the quadratic window"
            );
        }
    }
    finish("06 (gradient finite-difference audit)", t0, 30.0);
}

#[test]
fn criterion_07_symmetric_subspace_brackets_and_floor() {
    let t0 = Instant::now();
    let sigma = 1.0;
    let ms = ModelSpace::from_grid(&build_grid(sigma, 2.0, 2, 4, 4).unwrap(), 0.6);
    let zeros = CMat::zeros(ms.dim, ms.dim);
    let mut rng = ChaCha8Rng::seed_from_u64(707);
    for _ in 0..10 {
        let x = random_cvec(ms.dim, &mut rng);
        let eta = (&x + j_vec(&ms.antipode, &x)) * C::new(0.5, 0.0);
        let nsq = eta.norm_squared();
        for nu in 0..3 {
            let kq = eta.dotc(&(&ms.k[nu] * &eta));
            assert!(kq.re.abs() < 1e-12 * (1.0 + nsq), "momentum bracket survives");
            let gq = eta.dotc(&ms.g[nu]).re;
            assert!(gq.abs() < 1e-12 * (1.0 + nsq.sqrt()), "coupling overlap survives");
        }
        let b = bracket_values(&ms, &zeros, &eta).unwrap();
        assert!(b.iter().all(|x| x.abs() < 1e-12 * (1.0 + nsq)));
        let grad = gradient(&ms, &zeros, &eta, [0.0; 3]).unwrap();
        let floor = (sigma + 0.5 * sigma * sigma) * eta.norm();
        assert!(
            grad.grad_eta.norm() >= floor - 1e-12,
            "displacement gradient dips below the dispersion floor"
        );
    }
    finish("07 (symmetric-subspace brackets and gradient floor)", t0, 5.0);
}

#[test]
fn criterion_08_coherent_stationarity_on_large_grid() {
    let t0 = Instant::now();
    let sigma = 1.0;
    let lambda = 2.0;
    let grid = build_grid(sigma, lambda, 8, 4, 4).unwrap();
    assert_eq!(grid.dim, 256);
    let cfg = MinimizeConfig {
        mode: Mode::Coherent,
        grad_tol: 1e-9,
        ..MinimizeConfig::default()
    };
    let res = minimize_coherent(&grid, &cfg).unwrap();
    assert!(res.converged, "no convergence, grad_norm {}", res.grad_norm);
    assert!(res.eta_opt.norm() < 1e-8, "eta drifted: {}", res.eta_opt.norm());
    let ms = ModelSpace::from_grid(&grid, cfg.g);
    let base = half_coupling_norm(&ms);
    assert!((res.energy.total - base).abs() < 1e-9);
    let analytic =
        4.0 * std::f64::consts::PI * cfg.g * cfg.g * (lambda * lambda - sigma * sigma) / 2.0;
    assert!(
        (base - analytic).abs() < 1e-8 * analytic,
        "quadrature misses the closed form: {base} vs {analytic}"
    );
    finish("08 (coherent stationarity on the 256-dim grid)", t0, 60.0);
}

fn acceptance_arena_d1() -> FockArena {
    let scalar = |x: f64| CMat::from_element(1, 1, C::new(x, 0.0));
    build_arena(
        1,
        40,
        [scalar(0.7), scalar(-0.4), scalar(0.3)],
        scalar(0.9),
        [
            CVec::from_element(1, C::new(0.4, 0.1)),
            CVec::from_element(1, C::new(-0.25, 0.0)),
            CVec::from_element(1, C::new(0.0, 0.3)),
        ],
        vec![0],
    )
    .unwrap()
}

fn acceptance_arena_d2() -> FockArena {
    let mut rng = ChaCha8Rng::seed_from_u64(909);
    let k = [
        random_hermitian(2, &mut rng),
        random_hermitian(2, &mut rng),
        random_hermitian(2, &mut rng),
    ];
    let omega = random_psd(2, &mut rng, 1.0) + CMat::identity(2, 2) * C::new(0.5, 0.0);
    let g = [
        random_cvec(2, &mut rng),
        random_cvec(2, &mut rng),
        random_cvec(2, &mut rng),
    ];
    build_arena(2, 24, k, omega, g, vec![1, 0]).unwrap()
}

#[test]
fn criterion_09_fock_oracle_agreement() {
    let t0 = Instant::now();
    assert_eq!(enumerate_pairings(1).len(), 1);
    assert_eq!(enumerate_pairings(2).len(), 3);
    assert_eq!(enumerate_pairings(3).len(), 15);
    assert_eq!(ordered_pair_splits().len(), 6);

    let a1 = acceptance_arena_d1();
    let xi1 = DMatrix::<f64>::from_element(1, 1, 0.3);
    let eta1 = CVec::from_element(1, C::new(0.2, 0.0));
    let r1 = oracle_compare(&a1, &xi1, &eta1).unwrap();
    assert!(
        r1.rel_error < 1e-6,
        "one-mode oracle off: formula {} vs fock {}",
        r1.formula_energy,
        r1.fock_energy
    );

    let a2 = acceptance_arena_d2();
    let xi2 = DMatrix::<f64>::from_row_slice(2, 2, &[0.2, 0.1, 0.1, -0.15]);
    let eta2 = CVec::from_vec(vec![C::new(0.15, 0.05), C::new(-0.1, 0.2)]);
    let r2 = oracle_compare(&a2, &xi2, &eta2).unwrap();
    assert!(
        r2.rel_error < 1e-5,
        "two-mode oracle off: formula {} vs fock {}",
        r2.formula_energy,
        r2.fock_energy
    );

    let mut rng = ChaCha8Rng::seed_from_u64(911);
    for instance in 0..20 {
        let (arena, xi, eta0): (&FockArena, DMatrix<f64>, CVec) = if instance < 10 {
            (&a1, xi1.clone(), eta1.clone())
        } else {
            (&a2, xi2.clone(), eta2.clone())
        };
        let st = arena.prepare_pure_quasifree(&xi, &eta0).unwrap();
        let ops: Vec<FieldOp> = (0..4)
            .map(|_| FieldOp {
                ann: random_cvec(arena.d, &mut rng) * C::new(0.7, 0.0),
                cre: random_cvec(arena.d, &mut rng) * C::new(0.7, 0.0),
            })
            .collect();
        let pair = st.pair();
        let mut brute = CMat::identity(arena.dim(), arena.dim());
        for order in 1..=4usize {
            brute *= arena.field_operator(&ops[order - 1]);
            let want = st.vector.dotc(&(&brute * &st.vector));
            let got = string_expectation_formula(
                &pair,
                &arena.j_perm,
                &st.eta_effective,
                &ops[..order],
            )
            .unwrap();
            assert!(
                (got - want).norm() < 1e-6 * (1.0 + want.norm()),
                "instance {instance} order {order}: {got} vs {want}"
            );
        }
    }
    finish("09 (Fock-space oracle agreement)", t0, 120.0);
}

#[test]
fn criterion_10_default_minimization_sanity() {
    let t0 = Instant::now();
    let grid = build_grid(1.0, 2.0, 2, 2, 4).unwrap();
    let cfg = MinimizeConfig::default();
    let res = minimize(&grid, &cfg, None).unwrap();
    assert!(res.converged, "default run stalled at grad_norm {}", res.grad_norm);
    let ms = ModelSpace::from_grid(&grid, cfg.g);
    let base = half_coupling_norm(&ms);
    assert!(
        res.energy.total <= base + 1e-9,
        "final energy {} above the trivial-state value {base}",
        res.energy.total
    );
    for w in res.trajectory.windows(2) {
        assert!(w[1].energy <= w[0].energy, "trajectory not monotone");
    }
    let again = minimize(&grid, &cfg, None).unwrap();
    assert_eq!(res.trajectory.len(), again.trajectory.len());
    assert_eq!(res.energy.total.to_bits(), again.energy.total.to_bits());
    assert_eq!(res.eta_opt, again.eta_opt);
    assert_eq!(res.z_opt.mat, again.z_opt.mat);
    finish("10 (default quasifree minimization sanity)", t0, 300.0);
}
