//! Browser-facing JSON wrappers around the core minimization, the cutoff
//! sweep, and the single-mode Fock oracle.
//!
//! Every entry point takes a JSON request string and returns a JSON string
//! `{"ok": true, "result": ...}` or `{"ok": false, "error": "..."}`, so the
//! page handles no exceptions across the wasm boundary.  The sweep here runs
//! its rows sequentially: the threaded sweep in the core crate has no place
//! on a wasm target.  Everything is plain Rust, so the same functions are
//! exercised by native unit tests.

use bhfmin_core::energy::EnergyBreakdown;
use bhfmin_core::fockcheck::{build_arena, oracle_compare, OracleReport};
use bhfmin_core::grid::build_grid;
use bhfmin_core::optimizer::{
    fit_exponent, fixed_exponent_prefactor, minimize, MinimizeConfig, Mode, SweepRow, SweepTable,
    TrajectoryPoint,
};
use bhfmin_core::{C, CMat, CVec};
use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};
use wasm_bindgen::prelude::*;

/// Largest one-photon dimension the page is allowed to request; keeps every
/// dense eigendecomposition comfortably interactive.
pub const MAX_DIM: usize = 256;

const REFERENCE_EXPONENT: f64 = 12.0 / 7.0;

fn reply<T: Serialize>(r: Result<T, String>) -> String {
    match r {
        Ok(v) => serde_json::json!({ "ok": true, "result": v }).to_string(),
        Err(e) => serde_json::json!({ "ok": false, "error": e }).to_string(),
    }
}

fn parse<'a, T: Deserialize<'a>>(request: &'a str) -> Result<T, String> {
    serde_json::from_str(request).map_err(|e| format!("bad request: {e}"))
}

fn check_dim(n_r: usize, n_theta: usize, n_phi: usize) -> Result<(), String> {
    let dim = 2 * n_r * n_theta * n_phi;
    if dim == 0 || dim > MAX_DIM {
        return Err(format!(
            "grid dimension {dim} outside 1..={MAX_DIM}; shrink the node counts"
        ));
    }
    Ok(())
}

#[derive(Deserialize)]
#[serde(default, deny_unknown_fields)]
struct MinimizeRequest {
    g: f64,
    sigma: f64,
    lambda: f64,
    n_r: usize,
    n_theta: usize,
    n_phi: usize,
    mode: Mode,
    max_iters: usize,
    grad_tol: f64,
    p: [f64; 3],
}

impl Default for MinimizeRequest {
    fn default() -> Self {
        let m = MinimizeConfig::default();
        MinimizeRequest {
            g: m.g,
            sigma: 1.0,
            lambda: 2.0,
            n_r: 2,
            n_theta: 2,
            n_phi: 4,
            mode: m.mode,
            max_iters: m.max_iters,
            grad_tol: m.grad_tol,
            p: m.p,
        }
    }
}

impl MinimizeRequest {
    fn config(&self) -> MinimizeConfig {
        MinimizeConfig {
            g: self.g,
            p: self.p,
            mode: self.mode,
            max_iters: self.max_iters,
            grad_tol: self.grad_tol,
            ..MinimizeConfig::default()
        }
    }
}

#[derive(Serialize)]
struct MinimizeReply {
    dim: usize,
    e_min: f64,
    energy: EnergyBreakdown,
    grad_norm: f64,
    iterations: usize,
    converged: bool,
    eta_norm: f64,
    z_trace: f64,
    trajectory: Vec<TrajectoryPoint>,
}

fn minimize_impl(request: &str) -> Result<MinimizeReply, String> {
    let rq: MinimizeRequest = parse(request)?;
    check_dim(rq.n_r, rq.n_theta, rq.n_phi)?;
    let grid = build_grid(rq.sigma, rq.lambda, rq.n_r, rq.n_theta, rq.n_phi)
        .map_err(|e| e.to_string())?;
    let res = minimize(&grid, &rq.config(), None).map_err(|e| e.to_string())?;
    Ok(MinimizeReply {
        dim: grid.dim,
        e_min: res.energy.total,
        energy: res.energy,
        grad_norm: res.grad_norm,
        iterations: res.iterations,
        converged: res.converged,
        eta_norm: res.eta_opt.norm(),
        z_trace: res.z_opt.mat.trace().re,
        trajectory: res.trajectory,
    })
}

/// Minimize the fiber energy on a fresh grid; request and reply are JSON.
#[wasm_bindgen]
pub fn minimize_json(request: &str) -> String {
    reply(minimize_impl(request))
}

#[derive(Deserialize)]
#[serde(default, deny_unknown_fields)]
struct SweepRequest {
    g: f64,
    sigma: f64,
    n_r: usize,
    n_theta: usize,
    n_phi: usize,
    mode: Mode,
    max_iters: usize,
    grad_tol: f64,
    lambdas: Vec<f64>,
}

impl Default for SweepRequest {
    fn default() -> Self {
        let m = MinimizeRequest::default();
        SweepRequest {
            g: m.g,
            sigma: m.sigma,
            n_r: 1,
            n_theta: 2,
            n_phi: 2,
            mode: m.mode,
            max_iters: m.max_iters,
            grad_tol: m.grad_tol,
            lambdas: vec![2.0, 3.0, 4.0, 6.0, 8.0],
        }
    }
}

#[derive(Serialize)]
struct SweepReply {
    rows: Vec<SweepRow>,
    exponent: Option<f64>,
    r_squared: Option<f64>,
    fit_error: Option<String>,
    c_ref: Option<f64>,
    reference_exponent: f64,
}

fn sweep_impl(request: &str) -> Result<SweepReply, String> {
    let rq: SweepRequest = parse(request)?;
    check_dim(rq.n_r, rq.n_theta, rq.n_phi)?;
    if rq.lambdas.is_empty()
        || rq.lambdas.windows(2).any(|w| w[1] <= w[0])
        || rq.lambdas.iter().any(|&l| l <= rq.sigma)
    {
        return Err(format!(
            "cutoff list must be nonempty, strictly increasing, and above sigma = {}",
            rq.sigma
        ));
    }
    let cfg = MinimizeConfig {
        g: rq.g,
        mode: rq.mode,
        max_iters: rq.max_iters,
        grad_tol: rq.grad_tol,
        ..MinimizeConfig::default()
    };
    let mut rows = Vec::new();
    for &lambda in &rq.lambdas {
        let row = build_grid(rq.sigma, lambda, rq.n_r, rq.n_theta, rq.n_phi)
            .map_err(|e| e.to_string())
            .and_then(|grid| minimize(&grid, &cfg, None).map_err(|e| e.to_string()));
        rows.push(match row {
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
                error: Some(e),
            },
        });
    }
    let table = SweepTable { rows };
    let (exponent, r_squared, fit_error) = match fit_exponent(&table) {
        Ok(f) => (Some(f.exponent), Some(f.r_squared), None),
        Err(e) => (None, None, Some(e.to_string())),
    };
    let c_ref = fixed_exponent_prefactor(&table, REFERENCE_EXPONENT);
    Ok(SweepReply {
        rows: table.rows,
        exponent,
        r_squared,
        fit_error,
        c_ref,
        reference_exponent: REFERENCE_EXPONENT,
    })
}

/// Minimize across a list of upper cutoffs and fit the growth exponent.
#[wasm_bindgen]
pub fn sweep_json(request: &str) -> String {
    reply(sweep_impl(request))
}

#[derive(Deserialize)]
#[serde(default, deny_unknown_fields)]
struct OracleRequest {
    xi: f64,
    eta_re: f64,
    eta_im: f64,
    n_max: usize,
    k: [f64; 3],
    omega: f64,
    g: [f64; 3],
}

impl Default for OracleRequest {
    fn default() -> Self {
        OracleRequest {
            xi: 0.3,
            eta_re: 0.2,
            eta_im: 0.1,
            n_max: 30,
            k: [0.7, -0.4, 0.3],
            omega: 0.9,
            g: [0.3, 0.1, -0.2],
        }
    }
}

fn oracle_impl(request: &str) -> Result<OracleReport, String> {
    let rq: OracleRequest = parse(request)?;
    if rq.n_max < 1 || rq.n_max > 200 {
        return Err("n_max must lie in 1..=200".into());
    }
    if !(rq.omega > 0.0) {
        return Err("omega must be positive".into());
    }
    if rq.xi.abs() > 2.0 {
        return Err("|xi| above 2 overwhelms the truncation; stay within [-2, 2]".into());
    }
    let scalar = |x: f64| CMat::from_element(1, 1, C::new(x, 0.0));
    let svec = |x: f64| CVec::from_element(1, C::new(x, 0.0));
    let arena = build_arena(
        1,
        rq.n_max,
        [scalar(rq.k[0]), scalar(rq.k[1]), scalar(rq.k[2])],
        scalar(rq.omega),
        [svec(rq.g[0]), svec(rq.g[1]), svec(rq.g[2])],
        vec![0],
    )
    .map_err(|e| e.to_string())?;
    let xi = DMatrix::from_element(1, 1, rq.xi);
    let eta0 = CVec::from_element(1, C::new(rq.eta_re, rq.eta_im));
    oracle_compare(&arena, &xi, &eta0).map_err(|e| e.to_string())
}

/// Compare the closed-form energy of a squeezed-displaced single mode with
/// the raw expectation on a truncated Fock space.
#[wasm_bindgen]
pub fn oracle_json(request: &str) -> String {
    reply(oracle_impl(request))
}
