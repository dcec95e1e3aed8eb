//! Limited-memory BFGS with bounds, optionally in a scaled metric.

use crate::error::{check_len, Error, Result};
use crate::krylov::{cg_face, CgConfig};
use crate::lbfgs::{CompactLBFGS, ThetaRule, UpdateOutcome};
use crate::linalg::{dot, norm, sub};
use crate::model::Objective;
use crate::ops::{FaceMask, LinOp};
use crate::scaling::Metric;

use super::config::{CauchyVariant, SolverConfig, SubspaceVariant};
use super::search::{
    binding_set, cauchy_backtrack, cauchy_exact, descent_direction, pg_norm, project, strong_wolfe, WolfeStatus,
};
use super::trace::{Recorder, SolveResult, SolveStatus, StepKind};

/// Minimize `model` over `x >= 0` from `x0` (projected first).
///
/// With a metric `P` the Cauchy direction is `-P̄ g`, the initial quasi-Newton
/// matrix is `θ P^{-1}` and the subspace step uses CG preconditioned by `P_FF`.
/// An identity metric is treated exactly like no metric.
pub fn solve_lbfgsb(
    model: &dyn Objective,
    x0: &[f64],
    cfg: &SolverConfig,
    metric: Option<&dyn Metric>,
) -> Result<SolveResult> {
    cfg.validate()?;
    let n = model.dim();
    check_len("solve_lbfgsb x0", n, x0.len())?;
    let metric = metric.filter(|m| !m.is_identity());
    if let Some(m) = metric {
        check_len("solve_lbfgsb metric", n, m.ncols())?;
    }
    let cauchy = cfg.lbfgs.cauchy.unwrap_or(if metric.is_some() {
        CauchyVariant::Backtrack
    } else {
        CauchyVariant::Exact
    });
    let subspace = cfg.lbfgs.subspace.unwrap_or(if metric.is_some() {
        SubspaceVariant::Cg
    } else {
        SubspaceVariant::Smw
    });
    if subspace == SubspaceVariant::Smw && metric.is_some() {
        return Err(Error::Config("the SMW subspace solve cannot be combined with scaling".into()));
    }
    let precond: Option<&dyn LinOp> = metric.map(|m| m as &dyn LinOp);
    let new_memory = || CompactLBFGS::new(n, cfg.lbfgs.memory, metric, ThetaRule::Auto);

    let mut rec = Recorder::new(cfg.max_time);
    let mut x = project(x0);
    let (mut f, mut g) = model.eval_f_grad(&x);
    let pg0 = pg_norm(&x, &g);
    rec.record(0, f, pg0, StepKind::Start);
    if !f.is_finite() || !g.iter().all(|v| v.is_finite()) {
        return Ok(rec.finish(x, f, SolveStatus::NumericalFailure, 0));
    }
    let tol = cfg.pg_rtol * pg0;
    if pg0 == 0.0 {
        return Ok(rec.finish(x, f, SolveStatus::Converged, 0));
    }

    let mut lb = new_memory()?;
    let mut t_warm = 1.0;
    let mut stalls = 0;
    for k in 1..=cfg.max_iter {
        if rec.out_of_time() {
            return Ok(rec.finish(x, f, SolveStatus::TimeLimit, k - 1));
        }
        let binding = binding_set(&x, &g);
        let d = descent_direction(metric, &g, &binding)?;

        let cp = match cauchy {
            CauchyVariant::Exact => cauchy_exact(&x, &g, &d, &lb)?,
            CauchyVariant::Backtrack => cauchy_backtrack(&x, &g, &d, &lb, &cfg.cauchy, t_warm, None)?,
        };
        let direction = if cp.stalled {
            None
        } else {
            if cauchy == CauchyVariant::Backtrack {
                t_warm = cp.t;
            }
            // Face: coordinates the Cauchy step pinned at the bound with g_i > 0.
            let fixed: Vec<bool> = cp.x.iter().zip(&g).map(|(&xc, &gi)| xc == 0.0 && gi > 0.0).collect();
            let mask = FaceMask::from_fixed(&fixed);
            let rc: Vec<f64> = g.iter().zip(&cp.bs).map(|(a, b)| a + b).collect();
            let w = subspace_step(&lb, &rc, &mask, subspace, precond, cfg, &mut rec)?;
            Some(choose_direction(&x, &g, &cp.x, &w))
        };

        let Some(dk) = direction else {
            stalls += 1;
            if stalls >= 2 {
                return Ok(rec.finish(x, f, SolveStatus::Stalled, k));
            }
            lb = new_memory()?;
            rec.record(k, f, pg_norm(&x, &g), StepKind::Restart);
            continue;
        };

        let ls = strong_wolfe(model, &x, f, &g, &dk, &cfg.wolfe, 1.0)?;
        if ls.status == WolfeStatus::Failed {
            stalls += 1;
            if stalls >= 2 {
                return Ok(rec.finish(x, f, SolveStatus::Stalled, k));
            }
            lb = new_memory()?;
            rec.record(k, f, pg_norm(&x, &g), StepKind::Restart);
            continue;
        }
        stalls = 0;
        let s = sub(&ls.x, &x);
        let y = sub(&ls.g, &g);
        match lb.update(&s, &y) {
            Ok(UpdateOutcome::Accepted | UpdateOutcome::Skipped) => {}
            // A singular middle matrix leaves the memory unusable; start over.
            Err(Error::Internal(_)) => lb = new_memory()?,
            Err(e) => return Err(e),
        }
        x = ls.x;
        f = ls.f;
        g = ls.g;
        if !f.is_finite() || !g.iter().all(|v| v.is_finite()) {
            return Ok(rec.finish(x, f, SolveStatus::NumericalFailure, k));
        }
        let pg = pg_norm(&x, &g);
        let kind = if ls.status == WolfeStatus::Capped {
            StepKind::Capped
        } else {
            StepKind::Accepted
        };
        rec.record(k, f, pg, kind);
        if pg <= tol {
            return Ok(rec.finish(x, f, SolveStatus::Converged, k));
        }
    }
    Ok(rec.finish(x, f, SolveStatus::MaxIter, cfg.max_iter))
}

/// Approximate minimizer of the quadratic model over the face, as a step from the Cauchy point.
fn subspace_step(
    lb: &CompactLBFGS<'_>,
    rc: &[f64],
    mask: &FaceMask,
    subspace: SubspaceVariant,
    precond: Option<&dyn LinOp>,
    cfg: &SolverConfig,
    rec: &mut Recorder,
) -> Result<Vec<f64>> {
    if mask.n_free() == 0 {
        return Ok(vec![0.0; rc.len()]);
    }
    if subspace == SubspaceVariant::Smw {
        match lb.smw_subspace_solve(rc, mask) {
            Ok(w) if w.iter().all(|v| v.is_finite()) => return Ok(w),
            Ok(_) | Err(Error::Internal(_)) => {}
            Err(e) => return Err(e),
        }
    }
    let rnorm = norm(&mask.gather(rc));
    let rtol = cfg.cg.rtol.unwrap_or_else(|| rnorm.sqrt().min(0.1)).clamp(f64::MIN_POSITIVE, 0.5);
    let out = cg_face(lb, rc, mask, precond, &CgConfig::new(rtol, cfg.cg.maxiter)?)?;
    rec.cg_cum += out.iterations;
    Ok(out.step)
}

/// Search direction from `x` towards the subspace point.
///
/// The subspace point is `Proj(x_c + w)`. If that is not a descent direction
/// the step `w` is truncated at the bounds instead, and as a last resort the
/// Cauchy point itself is used.
fn choose_direction(x: &[f64], g: &[f64], xc: &[f64], w: &[f64]) -> Vec<f64> {
    let projected: Vec<f64> = xc.iter().zip(w).map(|(a, b)| a + b).collect();
    let d = sub(&project(&projected), x);
    if dot(g, &d) < 0.0 {
        return d;
    }
    let alpha = xc
        .iter()
        .zip(w)
        .filter(|(_, &wi)| wi < 0.0)
        .map(|(&xi, &wi)| -xi / wi)
        .fold(1.0f64, f64::min);
    let truncated: Vec<f64> = xc.iter().zip(w).map(|(a, b)| (a + alpha * b).max(0.0)).collect();
    let d = sub(&truncated, x);
    if dot(g, &d) < 0.0 {
        return d;
    }
    sub(xc, x)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::DenseQuadratic;
    use crate::scaling::DenseMetric;
    use nalgebra::DMatrix;

    fn shifted_identity(c: &[f64]) -> DenseQuadratic {
        // ½‖x − c‖² up to a constant.
        DenseQuadratic::new(DMatrix::identity(c.len(), c.len()), c.iter().map(|v| -v).collect()).unwrap()
    }

    #[test]
    fn interior_solution() {
        let f = shifted_identity(&[1.0, 2.0]);
        let r = solve_lbfgsb(&f, &[0.0, 0.0], &SolverConfig::default(), None).unwrap();
        assert!(r.status.is_converged());
        assert!((r.x[0] - 1.0).abs() < 1e-12 && (r.x[1] - 2.0).abs() < 1e-12);
        assert!(r.trace.last().unwrap().pg_norm < 1e-12);
    }

    #[test]
    fn all_bounds_active() {
        let f = shifted_identity(&[-1.0, -1.0]);
        let r = solve_lbfgsb(&f, &[3.0, 0.5], &SolverConfig::default(), None).unwrap();
        assert!(r.status.is_converged());
        assert_eq!(r.x, vec![0.0, 0.0]);
    }

    #[test]
    fn scaled_run_converges() {
        let q = DMatrix::from_row_slice(3, 3, &[4.0, 1.0, 0.0, 1.0, 3.0, 0.5, 0.0, 0.5, 2.0]);
        let f = DenseQuadratic::new(q.clone(), vec![-1.0, 2.0, -3.0]).unwrap();
        let p = DenseMetric::new(q.try_inverse().unwrap()).unwrap();
        let mut cfg = SolverConfig::default();
        cfg.pg_rtol = 1e-12;
        let a = solve_lbfgsb(&f, &[1.0; 3], &cfg, Some(&p)).unwrap();
        let b = solve_lbfgsb(&f, &[1.0; 3], &cfg, None).unwrap();
        assert!(a.status.is_converged() && b.status.is_converged());
        for (u, v) in a.x.iter().zip(&b.x) {
            assert!((u - v).abs() < 1e-9);
        }
        assert!(a.x.iter().all(|&v| v >= 0.0));
    }

    #[test]
    fn smw_with_scaling_is_rejected() {
        let f = shifted_identity(&[1.0, 2.0]);
        let p = DenseMetric::new(DMatrix::from_diagonal_element(2, 2, 2.0)).unwrap();
        let mut cfg = SolverConfig::default();
        cfg.lbfgs.subspace = Some(SubspaceVariant::Smw);
        assert!(matches!(solve_lbfgsb(&f, &[0.0, 0.0], &cfg, Some(&p)), Err(Error::Config(_))));
    }
}
