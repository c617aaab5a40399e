//! Projected gradient descent over the PSD cone, cutoff sweeps, and
//! growth-exponent fits.

use crate::energy::{
    energy_coherent, energy_reduced_z, EnergyBreakdown, EnergyError, ModelSpace,
};
use crate::grid::{build_grid, GridError, MomentumGrid};
use crate::hsops::{conjugate_by_j, j_vec, project, HSOperator, HsError, ProjectMode};
use crate::variational::gradient;
use crate::{fro, C, CMat, CVec};
use serde::{Deserialize, Serialize};
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Mutex;
use thiserror::Error;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Mode {
    Quasifree,
    Coherent,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Symmetry {
    JSymmetric,
    None,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MinimizeConfig {
    pub g: f64,
    pub p: [f64; 3],
    pub mode: Mode,
    pub symmetry: Symmetry,
    pub max_iters: usize,
    pub grad_tol: f64,
    pub step0: f64,
    pub backtrack_factor: f64,
    pub armijo_c: f64,
    /// Reserved for randomized variants; the deterministic default descent
    /// does not consume it, but it participates in artifact reproducibility.
    pub seed: u64,
}

impl Default for MinimizeConfig {
    fn default() -> Self {
        MinimizeConfig {
            g: 0.5,
            p: [0.0; 3],
            mode: Mode::Quasifree,
            symmetry: Symmetry::JSymmetric,
            max_iters: 2000,
            grad_tol: 1e-6,
            step0: 1.0,
            backtrack_factor: 0.5,
            armijo_c: 1e-4,
            seed: 42,
        }
    }
}

#[derive(Debug, Error)]
pub enum OptError {
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),
    #[error("invalid initial point: {0}")]
    InvalidInit(String),
    #[error("energy became non-finite: {0}")]
    NonFinite(String),
    #[error("cutoff list must be nonempty, strictly increasing, and above sigma={0}")]
    BadLambdas(f64),
    #[error("need at least 3 rows with positive energy for a fit, have {0}")]
    TooFewRows(usize),
    #[error(transparent)]
    Grid(#[from] GridError),
    #[error(transparent)]
    Energy(#[from] EnergyError),
    #[error(transparent)]
    Operator(#[from] HsError),
}

#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct TrajectoryPoint {
    pub energy: f64,
    pub grad_norm: f64,
    pub step: f64,
}

#[derive(Debug, Clone)]
pub struct MinimizationResult {
    pub z_opt: HSOperator,
    pub eta_opt: CVec,
    pub energy: EnergyBreakdown,
    pub grad_norm: f64,
    pub iterations: usize,
    pub converged: bool,
    pub trajectory: Vec<TrajectoryPoint>,
}

fn validate_config(cfg: &MinimizeConfig) -> Result<(), OptError> {
    let bad = |msg: &str| Err(OptError::InvalidConfig(msg.into()));
    if !(cfg.grad_tol > 0.0) {
        return bad("grad_tol must be positive");
    }
    if cfg.max_iters < 1 {
        return bad("max_iters must be at least 1");
    }
    if !(cfg.step0 > 0.0 && cfg.step0.is_finite()) {
        return bad("step0 must be positive and finite");
    }
    if !(cfg.backtrack_factor > 0.0 && cfg.backtrack_factor < 1.0) {
        return bad("backtrack_factor must lie in (0, 1)");
    }
    if !(cfg.armijo_c > 0.0 && cfg.armijo_c < 1.0) {
        return bad("armijo_c must lie in (0, 1)");
    }
    if !cfg.g.is_finite() || cfg.p.iter().any(|x| !x.is_finite()) {
        return bad("g and p must be finite");
    }
    Ok(())
}

fn metric_dist2(za: &CMat, ea: &CVec, zb: &CMat, eb: &CVec) -> f64 {
    fro(&(za - zb)).powi(2) + 2.0 * (ea - eb).norm_squared()
}

fn symmetrize_eta(antipode: &[usize], eta: &CVec) -> CVec {
    (eta + j_vec(antipode, eta)) * C::new(0.5, 0.0)
}

fn proj_z(antipode: &[usize], z: &CMat, symmetric: bool) -> Result<CMat, HsError> {
    let mode = if symmetric {
        ProjectMode::Both
    } else {
        ProjectMode::Psd
    };
    let op = HSOperator {
        mat: z.clone(),
        hermitian: true,
        psd: false,
    };
    Ok(project(antipode, &op, mode)?.mat)
}

/// Gradient of the coherent restriction (z frozen at zero).
fn coherent_grad(ms: &ModelSpace, eta: &CVec, p: [f64; 3]) -> CVec {
    let mut out = &ms.omega * eta;
    for nu in 0..3 {
        let keta = &ms.k[nu] * eta;
        let w = &ms.g[nu] + &keta;
        let b = eta.dotc(&keta).re + 2.0 * eta.dotc(&ms.g[nu]).re;
        out += &w * C::new(b - p[nu], 0.0) + (&ms.k[nu] * &w) * C::new(0.5, 0.0);
    }
    out
}

/// Projected gradient descent with Armijo backtracking.  Default start is
/// (z, eta) = (0, 0); feasibility (PSD, and J-symmetry when configured) is
/// restored by projection after every step, on the gradient as well as the
/// iterate.  Convergence is declared on the norm of the projected step at
/// the nominal step size, which stays meaningful on the cone boundary.
pub fn minimize(
    grid: &MomentumGrid,
    cfg: &MinimizeConfig,
    init: Option<(CMat, CVec)>,
) -> Result<MinimizationResult, OptError> {
    validate_config(cfg)?;
    let ms = ModelSpace::from_grid(grid, cfg.g);
    let sym = cfg.symmetry == Symmetry::JSymmetric;
    let coherent = cfg.mode == Mode::Coherent;
    let (mut z, mut eta) = match init {
        Some((z0, e0)) => {
            if z0.nrows() != ms.dim || e0.len() != ms.dim {
                return Err(OptError::InvalidInit(format!(
                    "initial point has dim {}x{}, grid needs {}",
                    z0.nrows(),
                    e0.len(),
                    ms.dim
                )));
            }
            let op = HSOperator::analyze(z0.clone());
            if !op.hermitian || !op.psd {
                return Err(OptError::InvalidInit("initial z must be Hermitian PSD".into()));
            }
            if sym {
                let rz = fro(&(conjugate_by_j(&ms.antipode, &z0) - &z0));
                let re = (j_vec(&ms.antipode, &e0) - &e0).norm();
                let scale = 1.0 + fro(&z0) + e0.norm();
                if rz + re >= 1e-10 * scale {
                    return Err(OptError::InvalidInit(
                        "initial point is not J-symmetric".into(),
                    ));
                }
            }
            (z0, e0)
        }
        None => (CMat::zeros(ms.dim, ms.dim), CVec::zeros(ms.dim)),
    };
    if coherent {
        z = CMat::zeros(ms.dim, ms.dim);
    }

    let eval = |z: &CMat, eta: &CVec| -> Result<EnergyBreakdown, EnergyError> {
        if coherent {
            energy_coherent(&ms, eta, cfg.p)
        } else {
            energy_reduced_z(&ms, z, eta, cfg.p)
        }
    };
    let grad_at = |z: &CMat, eta: &CVec| -> Result<(CMat, CVec), OptError> {
        let (mut gz, mut ge) = if coherent {
            (CMat::zeros(ms.dim, ms.dim), coherent_grad(&ms, eta, cfg.p))
        } else {
            let g = gradient(&ms, z, eta, cfg.p)?;
            (g.grad_z, g.grad_eta)
        };
        if sym {
            gz = (&gz + conjugate_by_j(&ms.antipode, &gz)) * C::new(0.5, 0.0);
            ge = symmetrize_eta(&ms.antipode, &ge);
        }
        Ok((gz, ge))
    };
    let step_to = |z: &CMat, eta: &CVec, gz: &CMat, ge: &CVec, s: f64| -> Result<(CMat, CVec), OptError> {
        let zc = if coherent {
            z.clone()
        } else {
            proj_z(&ms.antipode, &(z - gz * C::new(s, 0.0)), sym)?
        };
        let ec_raw = eta - ge * C::new(s, 0.0);
        let ec = if sym {
            symmetrize_eta(&ms.antipode, &ec_raw)
        } else {
            ec_raw
        };
        Ok((zc, ec))
    };

    let mut e = eval(&z, &eta)?.total;
    if !e.is_finite() {
        return Err(OptError::NonFinite("at the initial point".into()));
    }
    let mut trajectory = Vec::new();
    let mut grad_norm = f64::NAN;
    let mut converged = false;
    let mut iterations = 0;

    for it in 0..cfg.max_iters {
        let (gz, ge) = grad_at(&z, &eta)?;
        let (tz, te) = step_to(&z, &eta, &gz, &ge, cfg.step0)?;
        let pg = metric_dist2(&z, &eta, &tz, &te).sqrt() / cfg.step0;
        grad_norm = pg;
        if it == 0 {
            trajectory.push(TrajectoryPoint {
                energy: e,
                grad_norm: pg,
                step: 0.0,
            });
        }
        if pg <= cfg.grad_tol {
            converged = true;
            iterations = it;
            break;
        }

        let mut s = cfg.step0;
        let mut moved = false;
        loop {
            let (cz, ce) = if s == cfg.step0 {
                (tz.clone(), te.clone())
            } else {
                step_to(&z, &eta, &gz, &ge, s)?
            };
            let d2 = metric_dist2(&z, &eta, &cz, &ce);
            if d2 == 0.0 {
                break;
            }
            let ec = eval(&cz, &ce)?.total;
            if !ec.is_finite() {
                return Err(OptError::NonFinite(format!(
                    "iteration {it}, step {s:.3e}, from energy {e:.6e}"
                )));
            }
            if ec <= e - cfg.armijo_c * d2 / s {
                z = cz;
                eta = ce;
                e = ec;
                moved = true;
                trajectory.push(TrajectoryPoint {
                    energy: e,
                    grad_norm: pg,
                    step: s,
                });
                break;
            }
            s *= cfg.backtrack_factor;
            if s < 1e-16 * cfg.step0 {
                break;
            }
        }
        iterations = it + 1;
        if !moved {
            break;
        }
    }

    let energy = eval(&z, &eta)?;
    Ok(MinimizationResult {
        z_opt: HSOperator::analyze(z),
        eta_opt: eta,
        energy,
        grad_norm,
        iterations,
        converged,
        trajectory,
    })
}

/// Coherent-only minimization: z is frozen at zero and only the
/// displacement moves.  Requires config.mode = coherent.
pub fn minimize_coherent(
    grid: &MomentumGrid,
    cfg: &MinimizeConfig,
) -> Result<MinimizationResult, OptError> {
    if cfg.mode != Mode::Coherent {
        return Err(OptError::InvalidConfig(
            "minimize_coherent requires mode = coherent".into(),
        ));
    }
    minimize(grid, cfg, None)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GridTemplate {
    pub sigma: f64,
    pub n_r: usize,
    pub n_theta: usize,
    pub n_phi: usize,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SweepRow {
    pub lambda: f64,
    pub e_min: f64,
    pub iters: usize,
    pub grad_norm: f64,
    pub converged: bool,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub error: Option<String>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SweepTable {
    pub rows: Vec<SweepRow>,
}

impl SweepTable {
    pub fn any_failed(&self) -> bool {
        self.rows.iter().any(|r| r.error.is_some())
    }

    pub fn to_csv(&self) -> String {
        let mut s = String::from("lambda,e_min,iters,grad_norm,converged\n");
        for r in &self.rows {
            s.push_str(&format!(
                "{},{},{},{},{}\n",
                r.lambda, r.e_min, r.iters, r.grad_norm, r.converged
            ));
        }
        s
    }
}

/// Run one minimization per cutoff, concurrently, each from the default
/// start (no warm starts across cutoffs: the basis changes).  Rows come back
/// in input order; a failed row carries its error text and NaN energy.
pub fn sweep_cutoff(
    template: &GridTemplate,
    lambdas: &[f64],
    cfg: &MinimizeConfig,
    threads: usize,
) -> Result<SweepTable, OptError> {
    validate_config(cfg)?;
    if lambdas.is_empty()
        || lambdas.windows(2).any(|w| w[1] <= w[0])
        || lambdas.iter().any(|&l| l <= template.sigma)
    {
        return Err(OptError::BadLambdas(template.sigma));
    }
    let n = lambdas.len();
    let workers = if threads == 0 {
        std::thread::available_parallelism().map(|x| x.get()).unwrap_or(1)
    } else {
        threads
    }
    .clamp(1, n);
    let next = AtomicUsize::new(0);
    let slots: Vec<Mutex<Option<SweepRow>>> = (0..n).map(|_| Mutex::new(None)).collect();
    std::thread::scope(|sc| {
        for _ in 0..workers {
            sc.spawn(|| loop {
                let i = next.fetch_add(1, Ordering::Relaxed);
                if i >= n {
                    break;
                }
                let row = run_row(template, lambdas[i], cfg);
                *slots[i].lock().unwrap() = Some(row);
            });
        }
    });
    let rows = slots
        .into_iter()
        .map(|m| m.into_inner().unwrap().expect("worker filled every claimed slot"))
        .collect();
    Ok(SweepTable { rows })
}

fn run_row(template: &GridTemplate, lambda: f64, cfg: &MinimizeConfig) -> SweepRow {
    let outcome = build_grid(
        template.sigma,
        lambda,
        template.n_r,
        template.n_theta,
        template.n_phi,
    )
    .map_err(OptError::from)
    .and_then(|grid| minimize(&grid, cfg, None));
    match outcome {
        Ok(res) => SweepRow {
            lambda,
            e_min: res.energy.total,
            iters: res.iterations,
            grad_norm: res.grad_norm,
            converged: res.converged,
            error: None,
        },
        Err(e) => SweepRow {
            lambda,
            e_min: f64::NAN,
            iters: 0,
            grad_norm: f64::NAN,
            converged: false,
            error: Some(e.to_string()),
        },
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct FitResult {
    pub exponent: f64,
    pub r_squared: f64,
    pub rows_used: usize,
    pub excluded: Vec<String>,
}

/// Least-squares slope of log e_min against log lambda over the usable rows.
/// Rows with failures or nonpositive energies are excluded with a warning
/// entry; fewer than 3 usable rows is an error.
pub fn fit_exponent(table: &SweepTable) -> Result<FitResult, OptError> {
    let mut xs = Vec::new();
    let mut ys = Vec::new();
    let mut excluded = Vec::new();
    for r in &table.rows {
        if let Some(err) = &r.error {
            excluded.push(format!("lambda={}: failed ({err})", r.lambda));
        } else if !(r.e_min.is_finite() && r.e_min > 0.0) {
            excluded.push(format!(
                "lambda={}: nonpositive energy {} has no logarithm",
                r.lambda, r.e_min
            ));
        } else {
            xs.push(r.lambda.ln());
            ys.push(r.e_min.ln());
        }
    }
    let n = xs.len();
    if n < 3 {
        return Err(OptError::TooFewRows(n));
    }
    let xbar = xs.iter().sum::<f64>() / n as f64;
    let ybar = ys.iter().sum::<f64>() / n as f64;
    let mut sxy = 0.0;
    let mut sxx = 0.0;
    let mut syy = 0.0;
    for i in 0..n {
        sxy += (xs[i] - xbar) * (ys[i] - ybar);
        sxx += (xs[i] - xbar) * (xs[i] - xbar);
        syy += (ys[i] - ybar) * (ys[i] - ybar);
    }
    let exponent = sxy / sxx;
    let ss_res: f64 = (0..n)
        .map(|i| {
            let fit = ybar + exponent * (xs[i] - xbar);
            (ys[i] - fit) * (ys[i] - fit)
        })
        .sum();
    let r_squared = if syy > 0.0 { 1.0 - ss_res / syy } else { 1.0 };
    Ok(FitResult {
        exponent,
        r_squared,
        rows_used: n,
        excluded,
    })
}

/// Best prefactor c for the fixed-power reference e ~ c lambda^a over the
/// usable rows, in the least-squares sense; None without usable rows.
pub fn fixed_exponent_prefactor(table: &SweepTable, a: f64) -> Option<f64> {
    let mut num = 0.0;
    let mut den = 0.0;
    for r in &table.rows {
        if r.error.is_none() && r.e_min.is_finite() {
            let la = r.lambda.powf(a);
            num += r.e_min * la;
            den += la * la;
        }
    }
    if den > 0.0 {
        Some(num / den)
    } else {
        None
    }
}
