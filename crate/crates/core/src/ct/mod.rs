//! Synthetic CT reconstruction problems on a polar grid.

mod grid;
pub mod output;
mod phantom;
mod projector;
mod regularizer;

use std::sync::Arc;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

pub use grid::PolarGrid;
pub use phantom::{default_phantom, make_phantom, Shape};
pub use projector::{detector_offset, make_projector, ray_chords, ray_point, CHORD_DROP};
pub use regularizer::{difference_rows, make_difference_operator};

use crate::circulant::BlockCirculantOp;
use crate::error::{Error, Result};
use crate::model::{Objective, QuadraticModel, ReconModel, SecondOrder};
use crate::ops::{DiagonalOp, LinOp};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ProblemKind {
    Quadratic,
    Recon,
}

/// Additive Gaussian noise with standard deviation `sigma_rel * max(b)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NoiseSpec {
    pub seed: u64,
    pub sigma_rel: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ProblemSpec {
    pub kind: ProblemKind,
    pub n_r: usize,
    pub n_theta: usize,
    pub n_det: usize,
    pub lambda: f64,
    pub delta: f64,
    pub noise: Option<NoiseSpec>,
    pub phantom: Vec<Shape>,
}

impl ProblemSpec {
    /// Desk-scale defaults for the given problem kind.
    pub fn desk(kind: ProblemKind) -> Self {
        let lambda = match kind {
            ProblemKind::Quadratic => 1e-2,
            ProblemKind::Recon => 1e-4,
        };
        Self {
            kind,
            n_r: 32,
            n_theta: 64,
            n_det: 48,
            lambda,
            delta: 0.1,
            noise: None,
            phantom: default_phantom(),
        }
    }
}

/// Either objective, dispatching statically to the concrete model.
#[derive(Clone)]
pub enum CtModel {
    Quadratic(QuadraticModel),
    Recon(ReconModel),
}

impl CtModel {
    pub fn hessian_approx_bc(&self) -> Result<BlockCirculantOp> {
        match self {
            CtModel::Quadratic(m) => m.hessian_approx_bc(),
            CtModel::Recon(m) => m.hessian_approx_bc(),
        }
    }
}

impl Objective for CtModel {
    fn dim(&self) -> usize {
        match self {
            CtModel::Quadratic(m) => m.dim(),
            CtModel::Recon(m) => m.dim(),
        }
    }
    fn eval_f(&self, x: &[f64]) -> f64 {
        match self {
            CtModel::Quadratic(m) => m.eval_f(x),
            CtModel::Recon(m) => m.eval_f(x),
        }
    }
    fn eval_grad(&self, x: &[f64]) -> Vec<f64> {
        match self {
            CtModel::Quadratic(m) => m.eval_grad(x),
            CtModel::Recon(m) => m.eval_grad(x),
        }
    }
    fn eval_f_grad(&self, x: &[f64]) -> (f64, Vec<f64>) {
        match self {
            CtModel::Quadratic(m) => m.eval_f_grad(x),
            CtModel::Recon(m) => m.eval_f_grad(x),
        }
    }
}

impl SecondOrder for CtModel {
    fn hess_vec(&self, x: &[f64], v: &[f64]) -> Vec<f64> {
        match self {
            CtModel::Quadratic(m) => m.hess_vec(x, v),
            CtModel::Recon(m) => m.hess_vec(x, v),
        }
    }
}

/// A generated problem with its ground truth.
#[derive(Clone)]
pub struct CtProblem {
    pub grid: PolarGrid,
    pub n_det: usize,
    pub projector: Arc<BlockCirculantOp>,
    pub regularizer: Arc<BlockCirculantOp>,
    pub x_true: Vec<f64>,
    /// Noiseless data `A x_true`.
    pub b_clean: Vec<f64>,
    /// Data used by the objective.
    pub b: Vec<f64>,
    pub model: CtModel,
    pub x0: Vec<f64>,
}

pub fn make_problem(spec: &ProblemSpec) -> Result<CtProblem> {
    let grid = PolarGrid::new(spec.n_r, spec.n_theta, 1.0)?;
    let a = Arc::new(make_projector(&grid, spec.n_det, spec.n_theta)?);
    let k = Arc::new(make_difference_operator(&grid)?);
    let x_true = make_phantom(&grid, &spec.phantom);
    let b_clean = a.apply(&x_true);
    let mut b = b_clean.clone();
    if let Some(noise) = spec.noise {
        if !(noise.sigma_rel >= 0.0) {
            return Err(Error::Config(format!("noise level must be nonnegative, got {}", noise.sigma_rel)));
        }
        let peak = b_clean.iter().cloned().fold(0.0f64, f64::max);
        let sigma = noise.sigma_rel * peak;
        if sigma > 0.0 {
            let dist = Normal::new(0.0, sigma).map_err(|e| Error::Config(e.to_string()))?;
            let mut rng = ChaCha8Rng::seed_from_u64(noise.seed);
            for bi in &mut b {
                *bi += dist.sample(&mut rng);
            }
        }
    }
    let a_dyn: Arc<dyn LinOp> = a.clone();
    let k_dyn: Arc<dyn LinOp> = k.clone();
    let model = match spec.kind {
        ProblemKind::Quadratic => CtModel::Quadratic(QuadraticModel::new(a_dyn, b.clone(), k_dyn, spec.lambda)?),
        ProblemKind::Recon => {
            // Weights come from the noiseless data so they stay positive and seed-independent.
            let w = DiagonalOp::new(b_clean.iter().map(|v| (-v).exp()).collect());
            CtModel::Recon(ReconModel::with_weights(a_dyn, b.clone(), w, k_dyn, spec.lambda, spec.delta)?)
        }
    };
    Ok(CtProblem {
        x0: vec![0.0; grid.n_pixels()],
        grid,
        n_det: spec.n_det,
        projector: a,
        regularizer: k,
        x_true,
        b_clean,
        b,
        model,
    })
}
