//! Fast built-in consistency checks over every layer of the core crate.
//! Each check is independent and seeded; the whole set runs in a few seconds.

use crate::artifacts::write_envelope;
use crate::config::RunConfig;
use crate::CliError;
use bhfmin_core::energy::{
    energy_coherent, energy_full, energy_reduced_v, energy_reduced_z, half_coupling_norm,
    ModelSpace,
};
use bhfmin_core::fockcheck::{build_arena, enumerate_pairings, oracle_compare, ordered_pair_splits};
use bhfmin_core::grid::{build_grid, coupling_vectors, GridParams};
use bhfmin_core::hsops::{
    bogolubov_residuals, checkpoint_from_str, checkpoint_to_string, func_psd, j_vec, project,
    random_bogolubov, random_cvec, random_psd, v_from_z, z_from_v, BogolubovPair, HSOperator,
    ProjectMode,
};
use bhfmin_core::optimizer::{minimize, MinimizeConfig, SweepRow, SweepTable};
use bhfmin_core::variational::fd_check;
use bhfmin_core::{fro, C, CMat, CVec};
use nalgebra::DMatrix;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

fn ensure(cond: bool, msg: String) -> Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(msg)
    }
}

fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

fn grid_quadrature_and_closure() -> Result<(), String> {
    let grid = build_grid(1.0, 2.0, 2, 3, 4).map_err(|e| e.to_string())?;
    for i in 0..grid.dim {
        let j = grid.antipode[i];
        ensure(grid.antipode[j] == i, "antipode is not an involution".into())?;
        for nu in 0..3 {
            ensure(
                grid.k[i][nu] == -grid.k[j][nu],
                format!("momentum not exactly negated at slot {i}"),
            )?;
        }
        let dot: f64 = (0..3).map(|nu| grid.k[i][nu] * grid.pol[i][nu]).sum();
        ensure(
            dot.abs() < 1e-13 * (1.0 + grid.kabs[i]),
            format!("polarization not transverse at slot {i}: {dot:.3e}"),
        )?;
    }
    let gv = coupling_vectors(&grid, 0.7);
    let half: f64 = 0.5 * gv.iter().map(|v| v.norm_squared()).sum::<f64>();
    let exact = 4.0 * std::f64::consts::PI * 0.49 * (4.0 - 1.0) / 2.0;
    ensure(
        ((half - exact) / exact).abs() < 1e-10,
        format!("coupling half-norm {half} vs analytic {exact}"),
    )
}

fn involution_is_antiunitary() -> Result<(), String> {
    let grid = build_grid(1.0, 2.0, 1, 2, 4).map_err(|e| e.to_string())?;
    let mut r = rng(11);
    let f = random_cvec(grid.dim, &mut r);
    let g = random_cvec(grid.dim, &mut r);
    let jf = j_vec(&grid.antipode, &f);
    let jg = j_vec(&grid.antipode, &g);
    ensure(
        (j_vec(&grid.antipode, &jf) - &f).norm() == 0.0,
        "applying the involution twice is not the identity".into(),
    )?;
    let resid = (jf.dotc(&jg) - f.dotc(&g).conj()).norm();
    ensure(
        resid < 1e-13 * (1.0 + f.norm() * g.norm()),
        format!("involution is not antiunitary: {resid:.3e}"),
    )
}

fn bogolubov_relations_hold() -> Result<(), String> {
    let grid = build_grid(1.0, 2.0, 1, 2, 4).map_err(|e| e.to_string())?;
    let b = random_bogolubov(&grid.antipode, 7, 0.6);
    let res = bogolubov_residuals(&grid.antipode, &b);
    ensure(
        res.iter().all(|&x| x < 1e-9),
        format!("block relations violated: {res:?}"),
    )
}

fn pair_parameter_roundtrip() -> Result<(), String> {
    let mut r = rng(13);
    let z = HSOperator::analyze(random_psd(12, &mut r, 1.5));
    let v = v_from_z(&z).map_err(|e| e.to_string())?;
    let back = z_from_v(&v).map_err(|e| e.to_string())?;
    let rel = fro(&(&back.mat - &z.mat)) / (1.0 + fro(&z.mat));
    ensure(rel < 1e-10, format!("z -> v -> z drifted by {rel:.3e}"))
}

fn energy_forms_agree() -> Result<(), String> {
    let grid = build_grid(1.0, 2.0, 1, 2, 4).map_err(|e| e.to_string())?;
    let ms = ModelSpace::from_grid(&grid, 0.4);
    let mut r = rng(17);
    let vop = project(
        &ms.antipode,
        &HSOperator::analyze(random_psd(ms.dim, &mut r, 0.8)),
        ProjectMode::Both,
    )
    .map_err(|e| e.to_string())?;
    let u = func_psd(&vop.mat, |l| (1.0 + l * l).sqrt()).map_err(|e| e.to_string())?;
    let raw = random_cvec(ms.dim, &mut r);
    let eta = (&raw + j_vec(&ms.antipode, &raw)) * C::new(0.5, 0.0);
    let pair = BogolubovPair {
        u,
        v: vop.mat.clone(),
    };
    let e_full = energy_full(&ms, &pair, &eta).map_err(|e| e.to_string())?.total;
    let e_v = energy_reduced_v(&ms, &vop.mat, &eta)
        .map_err(|e| e.to_string())?
        .total;
    let z = z_from_v(&vop).map_err(|e| e.to_string())?;
    let e_z = energy_reduced_z(&ms, &z.mat, &eta, [0.0; 3])
        .map_err(|e| e.to_string())?
        .total;
    let tol = 1e-9 * (1.0 + e_full.abs());
    ensure(
        (e_full - e_v).abs() < tol && (e_full - e_z).abs() < tol,
        format!("energies disagree: full {e_full}, v-form {e_v}, z-form {e_z}"),
    )
}

fn symmetric_coherent_value() -> Result<(), String> {
    let grid = build_grid(1.0, 2.0, 2, 2, 4).map_err(|e| e.to_string())?;
    let ms = ModelSpace::from_grid(&grid, 0.5);
    let mut r = rng(19);
    let raw = random_cvec(ms.dim, &mut r);
    let eta = (&raw + j_vec(&ms.antipode, &raw)) * C::new(0.5, 0.0);
    let e = energy_coherent(&ms, &eta, [0.0; 3])
        .map_err(|e| e.to_string())?
        .total;
    let want = half_coupling_norm(&ms) + eta.dotc(&(&ms.omega_plus * &eta)).re;
    ensure(
        ((e - want) / want).abs() < 1e-10,
        format!("symmetric coherent energy {e} vs closed form {want}"),
    )
}

fn gradient_matches_differences() -> Result<(), String> {
    let grid = build_grid(1.0, 2.0, 1, 2, 2).map_err(|e| e.to_string())?;
    let ms = ModelSpace::from_grid(&grid, 0.5);
    let mut r = rng(23);
    let z = random_psd(ms.dim, &mut r, 0.8) + CMat::identity(ms.dim, ms.dim) * C::new(0.2, 0.0);
    let eta = random_cvec(ms.dim, &mut r) * C::new(0.3, 0.0);
    let rep = fd_check(&ms, &z, &eta, [0.1, -0.05, 0.2], 5, 99).map_err(|e| e.to_string())?;
    ensure(
        rep.max_rel_error < 1e-6,
        format!("finite differences disagree: {:.3e}", rep.max_rel_error),
    )
}

fn zero_coupling_minimum_is_zero() -> Result<(), String> {
    let grid = build_grid(1.0, 2.0, 1, 2, 2).map_err(|e| e.to_string())?;
    let cfg = MinimizeConfig {
        g: 0.0,
        grad_tol: 1e-7,
        ..MinimizeConfig::default()
    };
    let mut r = rng(29);
    let z0 = project(
        &grid.antipode,
        &HSOperator::analyze(random_psd(grid.dim, &mut r, 0.3)),
        ProjectMode::Both,
    )
    .map_err(|e| e.to_string())?;
    let raw = random_cvec(grid.dim, &mut r) * C::new(0.3, 0.0);
    let eta0 = (&raw + j_vec(&grid.antipode, &raw)) * C::new(0.5, 0.0);
    let res = minimize(&grid, &cfg, Some((z0.mat, eta0))).map_err(|e| e.to_string())?;
    ensure(res.converged, "descent did not converge".into())?;
    ensure(
        res.energy.total.abs() < 1e-8,
        format!("zero-coupling minimum came out {:.3e}", res.energy.total),
    )?;
    let monotone = res
        .trajectory
        .windows(2)
        .all(|w| w[1].energy <= w[0].energy + 1e-12);
    ensure(monotone, "energy trajectory is not nonincreasing".into())
}

fn power_law_fit_is_exact() -> Result<(), String> {
    let table = SweepTable {
        rows: [2.0, 3.0, 4.0, 6.0, 8.0]
            .iter()
            .map(|&l| SweepRow {
                lambda: l,
                e_min: 3.0 * l.powf(2.5),
                iters: 1,
                grad_norm: 0.0,
                converged: true,
                error: None,
            })
            .collect(),
    };
    let fit = bhfmin_core::optimizer::fit_exponent(&table).map_err(|e| e.to_string())?;
    ensure(
        (fit.exponent - 2.5).abs() < 1e-10 && fit.r_squared > 1.0 - 1e-12,
        format!("exact power law fitted as {} (r^2 {})", fit.exponent, fit.r_squared),
    )?;
    let c = bhfmin_core::optimizer::fixed_exponent_prefactor(&table, 2.5)
        .ok_or("no prefactor from a clean table")?;
    ensure(
        (c - 3.0).abs() < 1e-10,
        format!("prefactor came out {c}, want 3"),
    )
}

fn fock_oracle_single_mode() -> Result<(), String> {
    let scalar = |x: f64| CMat::from_element(1, 1, C::new(x, 0.0));
    let svec = |x: f64| CVec::from_element(1, C::new(x, 0.0));
    let arena = build_arena(
        1,
        30,
        [scalar(0.7), scalar(-0.4), scalar(0.3)],
        scalar(0.9),
        [svec(0.3), svec(0.1), svec(-0.2)],
        vec![0],
    )
    .map_err(|e| e.to_string())?;
    let xi = DMatrix::from_element(1, 1, 0.3);
    let eta0 = CVec::from_element(1, C::new(0.2, 0.1));
    let rep = oracle_compare(&arena, &xi, &eta0).map_err(|e| e.to_string())?;
    ensure(
        rep.rel_error < 1e-5 && rep.leakage < 1e-10,
        format!(
            "dense expectation off by {:.3e} (leakage {:.3e})",
            rep.rel_error, rep.leakage
        ),
    )
}

fn pairing_counts() -> Result<(), String> {
    let perfect: Vec<usize> = (1..=3).map(|m| enumerate_pairings(m).len()).collect();
    ensure(
        perfect == vec![1, 3, 15],
        format!("perfect pairing counts {perfect:?}, want [1, 3, 15]"),
    )?;
    let splits = ordered_pair_splits().len();
    ensure(splits == 6, format!("quartic split count {splits}, want 6"))
}

fn checkpoint_roundtrip() -> Result<(), String> {
    let gp = GridParams {
        sigma: 1.0,
        lambda: 2.5,
        n_r: 2,
        n_theta: 3,
        n_phi: 4,
    };
    let mut r = rng(31);
    let z = random_psd(6, &mut r, 1.3);
    let eta = random_cvec(6, &mut r);
    let s1 = checkpoint_to_string(&gp, &z, &eta);
    let (g2, z2, e2) = checkpoint_from_str(&s1).map_err(|e| e.to_string())?;
    let s2 = checkpoint_to_string(&g2, &z2, &e2);
    ensure(g2 == gp, "grid parameters drifted through the checkpoint".into())?;
    ensure(
        fro(&(&z2 - &z)) == 0.0 && (&e2 - &eta).norm() == 0.0,
        "checkpoint round trip is not bit-exact".into(),
    )?;
    ensure(s1 == s2, "re-serialized checkpoint differs textually".into())
}

#[derive(Serialize)]
struct CheckOutcome {
    name: &'static str,
    passed: bool,
    #[serde(skip_serializing_if = "Option::is_none")]
    detail: Option<String>,
}

#[derive(Serialize)]
struct SelftestArtifact {
    checks: Vec<CheckOutcome>,
    passed: bool,
}

pub fn run(rc: &RunConfig) -> Result<(), CliError> {
    type Check = (&'static str, fn() -> Result<(), String>);
    let checks: Vec<Check> = vec![
        ("grid_quadrature_and_closure", grid_quadrature_and_closure),
        ("involution_is_antiunitary", involution_is_antiunitary),
        ("bogolubov_relations_hold", bogolubov_relations_hold),
        ("pair_parameter_roundtrip", pair_parameter_roundtrip),
        ("energy_forms_agree", energy_forms_agree),
        ("symmetric_coherent_value", symmetric_coherent_value),
        ("gradient_matches_differences", gradient_matches_differences),
        ("zero_coupling_minimum_is_zero", zero_coupling_minimum_is_zero),
        ("power_law_fit_is_exact", power_law_fit_is_exact),
        ("fock_oracle_single_mode", fock_oracle_single_mode),
        ("pairing_counts", pairing_counts),
        ("checkpoint_roundtrip", checkpoint_roundtrip),
    ];
    let mut outcomes = Vec::new();
    let mut all_ok = true;
    for (name, check) in checks {
        match check() {
            Ok(()) => {
                println!("ok   {name}");
                outcomes.push(CheckOutcome {
                    name,
                    passed: true,
                    detail: None,
                });
            }
            Err(msg) => {
                println!("FAIL {name}: {msg}");
                all_ok = false;
                outcomes.push(CheckOutcome {
                    name,
                    passed: false,
                    detail: Some(msg),
                });
            }
        }
    }
    let art = SelftestArtifact {
        checks: outcomes,
        passed: all_ok,
    };
    let path = write_envelope(&rc.io.output_dir, "selftest.json", "selftest", rc, &art)?;
    println!("wrote {}", path.display());
    if all_ok {
        println!("selftest passed ({} checks)", art.checks.len());
        Ok(())
    } else {
        Err(CliError::Numerical("selftest failed".into()))
    }
}
