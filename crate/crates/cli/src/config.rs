use bhfmin_core::grid::GridParams;
use bhfmin_core::optimizer::{GridTemplate, MinimizeConfig, Mode, Symmetry};
use serde::{Deserialize, Serialize};
use std::path::PathBuf;

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct PhysicsSection {
    pub g: f64,
    pub sigma: f64,
    pub lambda: f64,
    pub p: [f64; 3],
}

impl Default for PhysicsSection {
    fn default() -> Self {
        PhysicsSection {
            g: 0.5,
            sigma: 1.0,
            lambda: 2.0,
            p: [0.0; 3],
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct GridSection {
    pub n_r: usize,
    pub n_theta: usize,
    pub n_phi: usize,
}

impl Default for GridSection {
    fn default() -> Self {
        GridSection {
            n_r: 2,
            n_theta: 2,
            n_phi: 4,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct OptimizerSection {
    pub mode: Mode,
    pub symmetry: Symmetry,
    pub max_iters: usize,
    pub grad_tol: f64,
    pub step0: f64,
    pub backtrack_factor: f64,
    pub armijo_c: f64,
}

impl Default for OptimizerSection {
    fn default() -> Self {
        let m = MinimizeConfig::default();
        OptimizerSection {
            mode: m.mode,
            symmetry: m.symmetry,
            max_iters: m.max_iters,
            grad_tol: m.grad_tol,
            step0: m.step0,
            backtrack_factor: m.backtrack_factor,
            armijo_c: m.armijo_c,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct OracleSection {
    pub d: usize,
    pub n_max: usize,
    pub xi_scale: f64,
    pub eta_scale: f64,
    pub trials: usize,
}

impl Default for OracleSection {
    fn default() -> Self {
        OracleSection {
            d: 1,
            n_max: 40,
            xi_scale: 0.3,
            eta_scale: 0.3,
            trials: 3,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct IoSection {
    pub output_dir: PathBuf,
    pub checkpoint_in: Option<PathBuf>,
    pub checkpoint_out: Option<PathBuf>,
}

impl Default for IoSection {
    fn default() -> Self {
        IoSection {
            output_dir: PathBuf::from("out"),
            checkpoint_in: None,
            checkpoint_out: None,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RunConfig {
    pub physics: PhysicsSection,
    pub grid: GridSection,
    pub optimizer: OptimizerSection,
    pub oracle: OracleSection,
    pub io: IoSection,
    pub seed: u64,
    pub sweep_lambdas: Vec<f64>,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            physics: PhysicsSection::default(),
            grid: GridSection::default(),
            optimizer: OptimizerSection::default(),
            oracle: OracleSection::default(),
            io: IoSection::default(),
            seed: 42,
            sweep_lambdas: vec![2.0, 3.0, 4.0, 6.0, 8.0],
        }
    }
}

impl RunConfig {
    pub fn minimize_config(&self) -> MinimizeConfig {
        MinimizeConfig {
            g: self.physics.g,
            p: self.physics.p,
            mode: self.optimizer.mode,
            symmetry: self.optimizer.symmetry,
            max_iters: self.optimizer.max_iters,
            grad_tol: self.optimizer.grad_tol,
            step0: self.optimizer.step0,
            backtrack_factor: self.optimizer.backtrack_factor,
            armijo_c: self.optimizer.armijo_c,
            seed: self.seed,
        }
    }

    pub fn grid_params(&self) -> GridParams {
        GridParams {
            sigma: self.physics.sigma,
            lambda: self.physics.lambda,
            n_r: self.grid.n_r,
            n_theta: self.grid.n_theta,
            n_phi: self.grid.n_phi,
        }
    }

    pub fn grid_template(&self) -> GridTemplate {
        GridTemplate {
            sigma: self.physics.sigma,
            n_r: self.grid.n_r,
            n_theta: self.grid.n_theta,
            n_phi: self.grid.n_phi,
        }
    }
}
