//! Conjugate gradients restricted to a face of the feasible set.

use serde::{Deserialize, Serialize};

use crate::error::{check_len, Error, Result};
use crate::linalg::{axpy, dot, norm};
use crate::ops::{FaceMask, LinOp};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CgConfig {
    /// Stop when `‖B_FF s + g_F‖ <= rtol ‖g_F‖`.
    pub rtol: f64,
    pub maxiter: usize,
    /// Trust-region radius on the step. Measured in the norm induced by the
    /// inverse preconditioner when one is supplied, Euclidean otherwise.
    pub radius: Option<f64>,
}

impl CgConfig {
    pub fn new(rtol: f64, maxiter: usize) -> Result<Self> {
        let cfg = Self {
            rtol,
            maxiter,
            radius: None,
        };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn with_radius(mut self, radius: f64) -> Self {
        self.radius = Some(radius);
        self
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.rtol > 0.0 && self.rtol < 1.0) {
            return Err(Error::Config(format!("CG rtol must lie in (0, 1), got {}", self.rtol)));
        }
        if self.maxiter == 0 {
            return Err(Error::Config("CG maxiter must be at least 1".into()));
        }
        if let Some(r) = self.radius {
            if !(r > 0.0) {
                return Err(Error::Config(format!("trust-region radius must be positive, got {r}")));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CgStatus {
    Converged,
    MaxIter,
    BoundaryHit,
    NegativeCurvature,
    NumericalFailure,
}

#[derive(Debug, Clone)]
pub struct CgOutcome {
    /// Full-length step, zero on fixed coordinates.
    pub step: Vec<f64>,
    /// Number of products with `B`.
    pub iterations: usize,
    pub status: CgStatus,
}

/// Positive root `tau` of `‖s + tau p‖² = radius²` given the three inner products.
fn boundary_tau(ss: f64, sp: f64, pp: f64, radius: f64) -> f64 {
    let c = ss - radius * radius;
    let disc = (sp * sp - pp * c).max(0.0);
    // c <= 0, so the root with the + sign is the nonnegative one.
    if sp >= 0.0 {
        (-c) / (sp + disc.sqrt())
    } else {
        (disc.sqrt() - sp) / pp
    }
}

/// Approximately minimize `½ sᵀ B_FF s + sᵀ g_F` over the free coordinates.
///
/// `g` is full length; its fixed entries are ignored. `precond` is a full
/// SPD operator `P`, applied on the face as `P_FF`.
pub fn cg_face(
    b: &dyn LinOp,
    g: &[f64],
    mask: &FaceMask,
    precond: Option<&dyn LinOp>,
    cfg: &CgConfig,
) -> Result<CgOutcome> {
    cfg.validate()?;
    check_len("cg_face (operator)", b.ncols(), g.len())?;
    check_len("cg_face (mask)", g.len(), mask.len())?;
    if let Some(p) = precond {
        check_len("cg_face (preconditioner)", g.len(), p.ncols())?;
    }
    let n = g.len();
    let apply_b = |v: &[f64]| mask.gather(&b.apply(&mask.scatter(v)));
    let apply_m = |v: &[f64]| match precond {
        Some(p) => mask.gather(&p.apply(&mask.scatter(v))),
        None => v.to_vec(),
    };
    let finish = |s: Vec<f64>, iterations, status| CgOutcome {
        step: mask.scatter(&s),
        iterations,
        status,
    };

    let gf = mask.gather(g);
    let nf = gf.len();
    let gnorm = norm(&gf);
    let mut s = vec![0.0; nf];
    if nf == 0 || gnorm == 0.0 {
        return Ok(CgOutcome {
            step: vec![0.0; n],
            iterations: 0,
            status: CgStatus::Converged,
        });
    }
    let tol = cfg.rtol * gnorm;
    let mut r: Vec<f64> = gf.iter().map(|v| -v).collect();
    let mut z = apply_m(&r);
    let mut rz = dot(&r, &z);
    let mut p = z.clone();
    // Inner products in the inverse-preconditioner norm, tracked by recurrence.
    let (mut ss, mut sp, mut pp) = (0.0, 0.0, rz);
    if precond.is_none() {
        pp = dot(&p, &p);
    }
    if !(rz > 0.0 && rz.is_finite()) {
        return Ok(finish(s, 0, CgStatus::NumericalFailure));
    }

    for it in 1..=cfg.maxiter {
        let q = apply_b(&p);
        let curv = dot(&p, &q);
        if !curv.is_finite() {
            return Ok(finish(s, it, CgStatus::NumericalFailure));
        }
        if curv <= 0.0 {
            let tau = match cfg.radius {
                Some(rad) => boundary_tau(ss, sp, pp, rad),
                // Without a radius, follow the direction only if nothing else was found.
                None if it == 1 => 1.0,
                None => 0.0,
            };
            axpy(tau, &p, &mut s);
            return Ok(finish(s, it, CgStatus::NegativeCurvature));
        }
        let alpha = rz / curv;
        if let Some(rad) = cfg.radius {
            let next = ss + 2.0 * alpha * sp + alpha * alpha * pp;
            if next > rad * rad {
                let tau = boundary_tau(ss, sp, pp, rad);
                axpy(tau, &p, &mut s);
                return Ok(finish(s, it, CgStatus::BoundaryHit));
            }
        }
        axpy(alpha, &p, &mut s);
        axpy(-alpha, &q, &mut r);
        ss += 2.0 * alpha * sp + alpha * alpha * pp;
        let rnorm = norm(&r);
        if !rnorm.is_finite() {
            return Ok(finish(s, it, CgStatus::NumericalFailure));
        }
        if rnorm <= tol {
            return Ok(finish(s, it, CgStatus::Converged));
        }
        z = apply_m(&r);
        let rz_new = dot(&r, &z);
        if !(rz_new > 0.0 && rz_new.is_finite()) {
            return Ok(finish(s, it, CgStatus::NumericalFailure));
        }
        let beta = rz_new / rz;
        rz = rz_new;
        for (pi, zi) in p.iter_mut().zip(&z) {
            *pi = zi + beta * *pi;
        }
        sp = beta * (sp + alpha * pp);
        pp = if precond.is_some() {
            rz + beta * beta * pp
        } else {
            dot(&p, &p)
        };
    }
    Ok(finish(s, cfg.maxiter, CgStatus::MaxIter))
}
