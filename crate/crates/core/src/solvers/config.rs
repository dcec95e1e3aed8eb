use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SolverConfig {
    pub max_iter: usize,
    /// Wall-clock budget in seconds.
    pub max_time: Option<f64>,
    /// Stop when `pg_norm <= pg_rtol * pg_norm(x0)`.
    pub pg_rtol: f64,
    pub cg: CgSettings,
    pub cauchy: CauchyParams,
    pub wolfe: WolfeParams,
    pub tr: TrustRegionParams,
    pub spg: SpgParams,
    pub lbfgs: LbfgsParams,
}

impl Default for SolverConfig {
    fn default() -> Self {
        Self {
            max_iter: 1000,
            max_time: None,
            pg_rtol: 1e-5,
            cg: CgSettings::default(),
            cauchy: CauchyParams::default(),
            wolfe: WolfeParams::default(),
            tr: TrustRegionParams::default(),
            spg: SpgParams::default(),
            lbfgs: LbfgsParams::default(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CgSettings {
    /// Relative residual tolerance. `None` picks the solver's own default.
    pub rtol: Option<f64>,
    pub maxiter: usize,
}

impl Default for CgSettings {
    fn default() -> Self {
        Self {
            rtol: None,
            maxiter: 500,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CauchyParams {
    /// Sufficient-decrease constant, in `(0, 1/2)`.
    pub mu0: f64,
    /// Backtracking factor, in `(0, 1)`.
    pub beta: f64,
    pub max_steps: usize,
}

impl Default for CauchyParams {
    fn default() -> Self {
        Self {
            mu0: 0.01,
            beta: 0.5,
            max_steps: 60,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct WolfeParams {
    pub mu: f64,
    pub eta: f64,
    pub max_evals: usize,
}

impl Default for WolfeParams {
    fn default() -> Self {
        Self {
            mu: 1e-4,
            eta: 0.9,
            max_evals: 30,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrustRegionParams {
    /// Initial radius; `None` uses the gradient norm at the start point.
    pub delta0: Option<f64>,
    pub eta0: f64,
    pub eta1: f64,
    pub eta2: f64,
    pub sigma1: f64,
    pub sigma2: f64,
    pub sigma3: f64,
    /// Cap on minor iterations per outer iteration.
    pub max_minor: usize,
}

impl Default for TrustRegionParams {
    fn default() -> Self {
        Self {
            delta0: None,
            eta0: 1e-3,
            eta1: 0.25,
            eta2: 0.75,
            sigma1: 0.25,
            sigma2: 0.5,
            sigma3: 4.0,
            max_minor: 50,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SpgParams {
    pub alpha_min: f64,
    pub alpha_max: f64,
    pub alpha0: f64,
    /// Number of past objective values in the nonmonotone reference.
    pub memory: usize,
    pub gamma: f64,
    pub max_backtracks: usize,
}

impl Default for SpgParams {
    fn default() -> Self {
        Self {
            alpha_min: 1e-30,
            alpha_max: 1e30,
            alpha0: 1.0,
            memory: 10,
            gamma: 1e-4,
            max_backtracks: 50,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CauchyVariant {
    /// Walk the breakpoints to the first local minimizer.
    Exact,
    /// Sufficient-decrease backtracking along the projected path.
    Backtrack,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SubspaceVariant {
    /// Sherman-Morrison-Woodbury; needs a scalar initial matrix.
    Smw,
    Cg,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct LbfgsParams {
    pub memory: usize,
    /// `None`: exact when unscaled, backtracking when scaled.
    pub cauchy: Option<CauchyVariant>,
    /// `None`: SMW when unscaled, CG when scaled.
    pub subspace: Option<SubspaceVariant>,
}

impl Default for LbfgsParams {
    fn default() -> Self {
        Self {
            memory: 5,
            cauchy: None,
            subspace: None,
        }
    }
}

fn check(cond: bool, msg: impl FnOnce() -> String) -> Result<()> {
    if cond {
        Ok(())
    } else {
        Err(Error::Config(msg()))
    }
}

impl SolverConfig {
    pub fn validate(&self) -> Result<()> {
        check(self.max_iter >= 1, || "max_iter must be at least 1".into())?;
        check(self.pg_rtol >= 0.0 && self.pg_rtol < 1.0, || {
            format!("pg_rtol must lie in [0, 1), got {}", self.pg_rtol)
        })?;
        if let Some(t) = self.max_time {
            check(t > 0.0, || format!("max_time must be positive, got {t}"))?;
        }
        if let Some(r) = self.cg.rtol {
            check(r > 0.0 && r < 1.0, || format!("cg.rtol must lie in (0, 1), got {r}"))?;
        }
        check(self.cg.maxiter >= 1, || "cg.maxiter must be at least 1".into())?;
        let c = &self.cauchy;
        check(c.mu0 > 0.0 && c.mu0 < 0.5, || format!("cauchy.mu0 must lie in (0, 1/2), got {}", c.mu0))?;
        check(c.beta > 0.0 && c.beta < 1.0, || format!("cauchy.beta must lie in (0, 1), got {}", c.beta))?;
        check(c.max_steps >= 1, || "cauchy.max_steps must be at least 1".into())?;
        let w = &self.wolfe;
        check(0.0 < w.mu && w.mu < w.eta && w.eta < 1.0, || {
            format!("need 0 < wolfe.mu < wolfe.eta < 1, got {} and {}", w.mu, w.eta)
        })?;
        check(w.max_evals >= 1, || "wolfe.max_evals must be at least 1".into())?;
        let t = &self.tr;
        if let Some(d) = t.delta0 {
            check(d > 0.0, || format!("tr.delta0 must be positive, got {d}"))?;
        }
        check(0.0 < t.eta0 && t.eta0 < t.eta1 && t.eta1 < t.eta2 && t.eta2 < 1.0, || {
            "need 0 < tr.eta0 < tr.eta1 < tr.eta2 < 1".into()
        })?;
        check(0.0 < t.sigma1 && t.sigma1 < t.sigma2 && t.sigma2 < 1.0 && t.sigma3 > 1.0, || {
            "need 0 < tr.sigma1 < tr.sigma2 < 1 < tr.sigma3".into()
        })?;
        check(t.max_minor >= 1, || "tr.max_minor must be at least 1".into())?;
        let s = &self.spg;
        check(0.0 < s.alpha_min && s.alpha_min <= s.alpha0 && s.alpha0 <= s.alpha_max, || {
            "need 0 < spg.alpha_min <= spg.alpha0 <= spg.alpha_max".into()
        })?;
        check(s.memory >= 1, || "spg.memory must be at least 1".into())?;
        check(s.gamma > 0.0 && s.gamma < 1.0, || format!("spg.gamma must lie in (0, 1), got {}", s.gamma))?;
        check(s.max_backtracks >= 1, || "spg.max_backtracks must be at least 1".into())?;
        check(self.lbfgs.memory >= 1, || "lbfgs.memory must be at least 1".into())?;
        Ok(())
    }
}
