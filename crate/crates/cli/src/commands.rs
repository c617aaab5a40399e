use crate::artifacts::{write_envelope, write_raw};
use crate::config::RunConfig;
use crate::{classify_fock, classify_opt, CliError};
use bhfmin_core::energy::{EnergyBreakdown, ModelSpace};
use bhfmin_core::fockcheck::{build_arena, oracle_compare, OracleReport};
use bhfmin_core::grid::build_grid_from_params;
use bhfmin_core::hsops::{
    checkpoint_from_str, checkpoint_to_string, random_cvec, random_hermitian, random_psd,
};
use bhfmin_core::optimizer::{
    fit_exponent, fixed_exponent_prefactor, minimize as run_minimize, sweep_cutoff, FitResult,
    SweepRow, SweepTable, TrajectoryPoint,
};
use bhfmin_core::variational::{fd_check, FdReport};
use bhfmin_core::{C, CMat, CVec};
use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use std::path::PathBuf;

/// Exponent of the expected large-cutoff growth of the minimal energy, used
/// as the reference curve in sweep reports.
pub const REFERENCE_EXPONENT: f64 = 12.0 / 7.0;

#[derive(Serialize)]
struct MinimizeArtifact {
    energy: EnergyBreakdown,
    grad_norm: f64,
    iterations: usize,
    converged: bool,
    eta_norm: f64,
    z_trace: f64,
    checkpoint: String,
    trajectory: Vec<TrajectoryPoint>,
}

pub fn minimize(rc: &RunConfig) -> Result<(), CliError> {
    let params = rc.grid_params();
    let grid = build_grid_from_params(&params).map_err(|e| CliError::Validation(e.to_string()))?;
    let init = match &rc.io.checkpoint_in {
        None => None,
        Some(p) => {
            let text = std::fs::read_to_string(p).map_err(|e| {
                CliError::Validation(format!("cannot read checkpoint {}: {e}", p.display()))
            })?;
            let (gp, z, eta) =
                checkpoint_from_str(&text).map_err(|e| CliError::Validation(e.to_string()))?;
            if gp != params {
                return Err(CliError::Validation(format!(
                    "checkpoint grid {gp:?} does not match configured grid {params:?}"
                )));
            }
            Some((z, eta))
        }
    };
    let cfg = rc.minimize_config();
    let res = run_minimize(&grid, &cfg, init).map_err(|e| classify_opt(&e))?;

    let ck_path = rc
        .io
        .checkpoint_out
        .clone()
        .unwrap_or_else(|| rc.io.output_dir.join("checkpoint.json"));
    let mut ck = checkpoint_to_string(&params, &res.z_opt.mat, &res.eta_opt);
    ck.push('\n');
    write_raw(&ck_path, &ck)?;

    let art = MinimizeArtifact {
        energy: res.energy.clone(),
        grad_norm: res.grad_norm,
        iterations: res.iterations,
        converged: res.converged,
        eta_norm: res.eta_opt.norm(),
        z_trace: res.z_opt.mat.trace().re,
        checkpoint: ck_path.display().to_string(),
        trajectory: res.trajectory.clone(),
    };
    let path = write_envelope(&rc.io.output_dir, "minimize_result.json", "minimize", rc, &art)?;
    println!("e_min = {:.12e}", res.energy.total);
    println!("grad_norm = {:.3e}", res.grad_norm);
    println!("iterations = {}, converged = {}", res.iterations, res.converged);
    println!("wrote {}", path.display());
    println!("wrote {}", ck_path.display());
    if !res.converged {
        return Err(CliError::Numerical(format!(
            "did not reach grad_tol {:.1e} within {} iterations (grad_norm {:.3e})",
            cfg.grad_tol, cfg.max_iters, res.grad_norm
        )));
    }
    Ok(())
}

#[derive(Serialize, Deserialize)]
pub struct SweepArtifact {
    pub rows: Vec<SweepRow>,
    pub fit: Option<FitResult>,
    pub fit_error: Option<String>,
    pub c_ref: Option<f64>,
}

fn sweep_threads() -> Result<usize, CliError> {
    match std::env::var("BHFMIN_THREADS") {
        Err(_) => Ok(0),
        Ok(s) => s.trim().parse().map_err(|_| {
            CliError::Validation(format!(
                "BHFMIN_THREADS must be a nonnegative integer, got {s:?}"
            ))
        }),
    }
}

pub fn sweep(rc: &RunConfig) -> Result<(), CliError> {
    let template = rc.grid_template();
    let cfg = rc.minimize_config();
    let threads = sweep_threads()?;
    let table = sweep_cutoff(&template, &rc.sweep_lambdas, &cfg, threads)
        .map_err(|e| classify_opt(&e))?;

    let csv_path = rc.io.output_dir.join("sweep.csv");
    write_raw(&csv_path, &table.to_csv())?;
    let (fit, fit_error) = match fit_exponent(&table) {
        Ok(f) => (Some(f), None),
        Err(e) => (None, Some(e.to_string())),
    };
    let c_ref = fixed_exponent_prefactor(&table, REFERENCE_EXPONENT);
    let art = SweepArtifact {
        rows: table.rows.clone(),
        fit,
        fit_error,
        c_ref,
    };
    let path = write_envelope(&rc.io.output_dir, "sweep_fit.json", "sweep", rc, &art)?;

    for r in &table.rows {
        match &r.error {
            Some(e) => println!("lambda = {}: FAILED ({e})", r.lambda),
            None => println!(
                "lambda = {}: e_min = {:.9e}, iters = {}, converged = {}",
                r.lambda, r.e_min, r.iters, r.converged
            ),
        }
    }
    if let Some(f) = &art.fit {
        println!(
            "fitted exponent = {:.4} over {} rows (r^2 = {:.6})",
            f.exponent, f.rows_used, f.r_squared
        );
    } else if let Some(e) = &art.fit_error {
        println!("no fit: {e}");
    }
    println!("wrote {}", csv_path.display());
    println!("wrote {}", path.display());

    let failed = table.rows.iter().filter(|r| r.error.is_some()).count();
    if failed > 0 {
        return Err(CliError::PartialSweep(failed));
    }
    Ok(())
}

#[derive(Serialize)]
struct GradcheckArtifact {
    points: Vec<FdReport>,
    max_rel_error: f64,
}

pub fn gradcheck(rc: &RunConfig) -> Result<(), CliError> {
    let grid = build_grid_from_params(&rc.grid_params())
        .map_err(|e| CliError::Validation(e.to_string()))?;
    let ms = ModelSpace::from_grid(&grid, rc.physics.g);
    let probe = if rc.physics.p == [0.0; 3] {
        [0.1, -0.05, 0.2]
    } else {
        rc.physics.p
    };
    let mut rng = ChaCha8Rng::seed_from_u64(rc.seed);
    let id = CMat::identity(ms.dim, ms.dim);
    let mut points = Vec::new();
    for i in 0..3u64 {
        let z = random_psd(ms.dim, &mut rng, 0.8) + &id * C::new(0.2, 0.0);
        let eta = random_cvec(ms.dim, &mut rng) * C::new(0.3, 0.0);
        let p = if i % 2 == 0 { [0.0; 3] } else { probe };
        let rep = fd_check(&ms, &z, &eta, p, 10, rc.seed + 100 + i)
            .map_err(|e| CliError::Numerical(e.to_string()))?;
        println!("point {i}: max_rel_error = {:.3e} ({})", rep.max_rel_error, rep.point_summary);
        points.push(rep);
    }
    let max_rel_error = points.iter().map(|r| r.max_rel_error).fold(0.0, f64::max);
    let art = GradcheckArtifact {
        points,
        max_rel_error,
    };
    let path = write_envelope(&rc.io.output_dir, "gradcheck.json", "gradcheck", rc, &art)?;
    println!("max_rel_error = {max_rel_error:.3e}");
    println!("wrote {}", path.display());
    if max_rel_error > 1e-6 {
        return Err(CliError::Numerical(format!(
            "gradient disagrees with finite differences: max_rel_error {max_rel_error:.3e}"
        )));
    }
    Ok(())
}

#[derive(Serialize)]
struct OracleArtifact {
    reports: Vec<OracleReport>,
    max_rel_error: f64,
    max_leakage: f64,
}

fn random_real_symmetric(d: usize, rng: &mut impl Rng, scale: f64) -> DMatrix<f64> {
    let mut m = DMatrix::zeros(d, d);
    for i in 0..d {
        for j in 0..=i {
            let x = rng.gen::<f64>() * 2.0 - 1.0;
            m[(i, j)] = x;
            m[(j, i)] = x;
        }
    }
    let n = m.norm();
    if n > 0.0 {
        m * (scale / n)
    } else {
        m
    }
}

fn scaled_cvec(d: usize, rng: &mut impl Rng, scale: f64) -> CVec {
    let v = random_cvec(d, rng);
    let n = v.norm();
    if n > 0.0 {
        v * C::new(scale / n, 0.0)
    } else {
        v
    }
}

pub fn oracle(rc: &RunConfig) -> Result<(), CliError> {
    let oc = &rc.oracle;
    if oc.trials == 0 {
        return Err(CliError::Validation("oracle needs trials >= 1".into()));
    }
    let d = oc.d;
    // pair the modes two by two; with an odd count the last one is its own
    // partner, which keeps the table an involution
    let j_perm: Vec<usize> = (0..d).map(|i| if i ^ 1 < d { i ^ 1 } else { i }).collect();
    let mut rng = ChaCha8Rng::seed_from_u64(rc.seed);
    let k_ops = [(); 3].map(|_| random_hermitian(d, &mut rng) * C::new(0.7, 0.0));
    let omega = random_psd(d, &mut rng, 1.0) + CMat::identity(d, d) * C::new(0.5, 0.0);
    let g_vecs = [(); 3].map(|_| random_cvec(d, &mut rng) * C::new(0.4, 0.0));
    let arena = build_arena(d, oc.n_max, k_ops, omega, g_vecs, j_perm)
        .map_err(|e| classify_fock(&e))?;
    println!(
        "arena: d = {}, n_max = {}, {} basis states",
        arena.d,
        arena.n_max,
        arena.dim()
    );

    let mut reports = Vec::new();
    for t in 0..oc.trials {
        let xi = random_real_symmetric(d, &mut rng, oc.xi_scale);
        let eta0 = scaled_cvec(d, &mut rng, oc.eta_scale);
        let rep = oracle_compare(&arena, &xi, &eta0).map_err(|e| classify_fock(&e))?;
        println!(
            "trial {t}: formula = {:.9e}, dense = {:.9e}, rel = {:.3e}, leakage = {:.3e}",
            rep.formula_energy, rep.fock_energy, rep.rel_error, rep.leakage
        );
        reports.push(rep);
    }
    let max_rel_error = reports.iter().map(|r| r.rel_error).fold(0.0, f64::max);
    let max_leakage = reports.iter().map(|r| r.leakage).fold(0.0, f64::max);
    let art = OracleArtifact {
        reports,
        max_rel_error,
        max_leakage,
    };
    let path = write_envelope(&rc.io.output_dir, "oracle.json", "oracle", rc, &art)?;
    println!("wrote {}", path.display());
    if max_rel_error > 1e-4 {
        return Err(CliError::Numerical(format!(
            "closed form and dense expectation disagree: max rel error {max_rel_error:.3e} \
             (raise n_max or lower xi_scale if this is truncation)"
        )));
    }
    Ok(())
}

#[derive(Deserialize)]
struct EnvelopeIn<T> {
    result: T,
}

#[derive(Serialize)]
struct ReportRow {
    lambda: f64,
    e_min: f64,
    reference: f64,
}

#[derive(Serialize)]
struct ReportArtifact {
    fit: Option<FitResult>,
    fit_error: Option<String>,
    reference_exponent: f64,
    c_ref: f64,
    rows: Vec<ReportRow>,
}

pub fn report(rc: &RunConfig) -> Result<(), CliError> {
    let src: PathBuf = rc.io.output_dir.join("sweep_fit.json");
    let text = std::fs::read_to_string(&src).map_err(|e| {
        CliError::Validation(format!(
            "cannot read {} (run `bhfmin sweep` first): {e}",
            src.display()
        ))
    })?;
    let env: EnvelopeIn<SweepArtifact> = serde_json::from_str(&text)
        .map_err(|e| CliError::Validation(format!("bad sweep artifact {}: {e}", src.display())))?;
    let art = env.result;
    let table = SweepTable {
        rows: art.rows.clone(),
    };
    let c_ref = art
        .c_ref
        .or_else(|| fixed_exponent_prefactor(&table, REFERENCE_EXPONENT))
        .ok_or_else(|| CliError::Validation("sweep has no usable rows".into()))?;

    let rows: Vec<ReportRow> = table
        .rows
        .iter()
        .filter(|r| r.error.is_none() && r.e_min.is_finite())
        .map(|r| ReportRow {
            lambda: r.lambda,
            e_min: r.e_min,
            reference: c_ref * r.lambda.powf(REFERENCE_EXPONENT),
        })
        .collect();
    if rows.is_empty() {
        return Err(CliError::Validation("sweep has no usable rows".into()));
    }

    let mut csv = String::from("lambda,e_min,reference\n");
    for r in &rows {
        csv.push_str(&format!("{},{},{}\n", r.lambda, r.e_min, r.reference));
    }
    let csv_path = rc.io.output_dir.join("report.csv");
    write_raw(&csv_path, &csv)?;

    for r in &rows {
        println!(
            "lambda = {}: e_min = {:.9e}, reference = {:.9e} (ratio {:.4})",
            r.lambda,
            r.e_min,
            r.reference,
            r.e_min / r.reference
        );
    }
    if let Some(f) = &art.fit {
        println!(
            "fitted exponent = {:.4}, reference exponent = {:.4}",
            f.exponent, REFERENCE_EXPONENT
        );
    }
    let out = ReportArtifact {
        fit: art.fit,
        fit_error: art.fit_error,
        reference_exponent: REFERENCE_EXPONENT,
        c_ref,
        rows,
    };
    let path = write_envelope(&rc.io.output_dir, "report.json", "report", rc, &out)?;
    println!("wrote {}", csv_path.display());
    println!("wrote {}", path.display());
    Ok(())
}
