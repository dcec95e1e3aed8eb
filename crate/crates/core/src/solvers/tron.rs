//! Trust-region projected Newton method, optionally in a scaled metric.

use crate::error::{check_len, Result};
use crate::krylov::{cg_face, CgConfig, CgStatus};
use crate::linalg::{dot, sub};
use crate::model::{HessianAt, SecondOrder};
use crate::ops::{FaceMask, LinOp};
use crate::scaling::Metric;

use super::config::{SolverConfig, TrustRegionParams};
use super::search::{
    binding_set, cauchy_backtrack, descent_direction, gradient_norm, model_change, pg_norm, project,
    projected_search, roundoff, step_norm,
};
use super::trace::{Recorder, SolveResult, SolveStatus, StepKind};

/// Relative tolerance used for the minor-iteration test and CG when none is configured.
pub const DEFAULT_CG_RTOL: f64 = 1e-3;

/// Minimize `model` over `x >= 0` from `x0` (projected first).
///
/// With a metric `P` the Cauchy path follows `-P̄ g`, the trust region is
/// measured in the `P^{-1}` norm and CG on each face is preconditioned by
/// `P_FF`. An identity metric is treated exactly like no metric.
pub fn solve_tron(
    model: &dyn SecondOrder,
    x0: &[f64],
    cfg: &SolverConfig,
    metric: Option<&dyn Metric>,
) -> Result<SolveResult> {
    cfg.validate()?;
    let n = model.dim();
    check_len("solve_tron x0", n, x0.len())?;
    let metric = metric.filter(|m| !m.is_identity());
    if let Some(m) = metric {
        check_len("solve_tron metric", n, m.ncols())?;
    }
    let precond: Option<&dyn LinOp> = metric.map(|m| m as &dyn LinOp);
    let rtol = cfg.cg.rtol.unwrap_or(DEFAULT_CG_RTOL);
    let tr = &cfg.tr;
    let nrm = |s: &[f64]| step_norm(metric, s);

    let mut rec = Recorder::new(cfg.max_time);
    let mut x = project(x0);
    let (mut f, mut g) = model.eval_f_grad(&x);
    let mut pg = pg_norm(&x, &g);
    rec.record(0, f, pg, StepKind::Start);
    if !f.is_finite() || !g.iter().all(|v| v.is_finite()) {
        return Ok(rec.finish(x, f, SolveStatus::NumericalFailure, 0));
    }
    let tol = cfg.pg_rtol * pg;
    if pg == 0.0 {
        return Ok(rec.finish(x, f, SolveStatus::Converged, 0));
    }
    let mut delta = tr.delta0.unwrap_or_else(|| gradient_norm(metric, &g));
    if !(delta > 0.0 && delta.is_finite()) {
        delta = 1.0;
    }
    let delta_floor = 1e-14 * delta;
    let mut t_cauchy = 1.0;

    for k in 1..=cfg.max_iter {
        if rec.out_of_time() {
            return Ok(rec.finish(x, f, SolveStatus::TimeLimit, k - 1));
        }
        let hess = HessianAt::new(model, &x);
        let binding = binding_set(&x, &g);
        let d = descent_direction(metric, &g, &binding)?;
        let cp = cauchy_backtrack(&x, &g, &d, &hess, &cfg.cauchy, t_cauchy, Some((delta, &nrm)))?;
        if !cp.stalled {
            t_cauchy = cp.t;
        }

        // Minor iterations from the Cauchy point.
        let mut xj = cp.x;
        let mut bs = cp.bs;
        let mut fixed: Vec<bool> = xj.iter().zip(&g).map(|(&xi, &gi)| xi == 0.0 && gi > 0.0).collect();
        for _ in 0..tr.max_minor {
            let r: Vec<f64> = g.iter().zip(&bs).map(|(a, b)| a + b).collect();
            if pg_norm(&xj, &r) <= rtol * pg {
                break;
            }
            let mask = FaceMask::from_fixed(&fixed);
            if mask.n_free() == 0 {
                break;
            }
            let cg_cfg = CgConfig::new(rtol, cfg.cg.maxiter)?.with_radius(delta);
            let out = cg_face(&hess, &r, &mask, precond, &cg_cfg)?;
            rec.cg_cum += out.iterations;
            let sp = projected_search(&xj, &r, &out.step, &hess, &cfg.cauchy)?;
            if sp.stalled {
                break;
            }
            let mut new_bound = false;
            for i in 0..n {
                if sp.x[i] == 0.0 && out.step[i] < 0.0 && !fixed[i] {
                    fixed[i] = true;
                    new_bound = true;
                }
            }
            for (b, v) in bs.iter_mut().zip(&sp.bs) {
                *b += v;
            }
            xj = sp.x;
            match out.status {
                CgStatus::Converged if !new_bound => break,
                CgStatus::Converged => {}
                _ => break,
            }
        }

        let s = sub(&xj, &x);
        let pred = -model_change(&g, &s, &bs);
        let snorm = nrm(&s);
        if !(pred > 0.0) || snorm == 0.0 {
            delta = tr.sigma1 * delta.min(if snorm > 0.0 { snorm } else { delta });
            rec.record(k, f, pg, StepKind::Rejected);
            if delta < delta_floor {
                return Ok(rec.finish(x, f, SolveStatus::Stalled, k));
            }
            continue;
        }
        let (f_new, g_new) = model.eval_f_grad(&xj);
        let finite = f_new.is_finite() && g_new.iter().all(|v| v.is_finite());
        let mut actred = f - f_new;
        // Both reductions at the level of rounding noise: trust the model.
        let noise = roundoff(f).max(roundoff(f_new));
        if actred.abs() <= noise && pred <= noise {
            actred = pred;
        }
        if k == 1 {
            delta = delta.min(snorm);
        }
        delta = if finite {
            update_radius(tr, delta, snorm, dot(&g, &s), actred, pred)
        } else {
            tr.sigma1 * delta.min(snorm)
        };
        let kind = if finite && actred > tr.eta0 * pred {
            x = xj;
            f = f_new;
            g = g_new;
            pg = pg_norm(&x, &g);
            StepKind::Accepted
        } else {
            StepKind::Rejected
        };
        rec.record(k, f, pg, kind);
        if pg <= tol {
            return Ok(rec.finish(x, f, SolveStatus::Converged, k));
        }
        if delta < delta_floor {
            return Ok(rec.finish(x, f, SolveStatus::Stalled, k));
        }
    }
    Ok(rec.finish(x, f, SolveStatus::MaxIter, cfg.max_iter))
}

/// Radius update driven by the ratio of actual to predicted reduction, with
/// the interpolated factor `alpha` from a quadratic fit along the step.
fn update_radius(tr: &TrustRegionParams, delta: f64, snorm: f64, gs: f64, actred: f64, pred: f64) -> f64 {
    let curv = -actred - gs;
    let alpha = if curv <= 0.0 {
        tr.sigma3
    } else {
        tr.sigma1.max(-0.5 * gs / curv)
    };
    if actred < tr.eta0 * pred {
        (alpha.max(tr.sigma1) * snorm).min(tr.sigma2 * delta)
    } else if actred < tr.eta1 * pred {
        (tr.sigma1 * delta).max((alpha * snorm).min(tr.sigma2 * delta))
    } else if actred < tr.eta2 * pred {
        (tr.sigma1 * delta).max((alpha * snorm).min(tr.sigma3 * delta))
    } else {
        delta.max((alpha * snorm).min(tr.sigma3 * delta))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::DenseQuadratic;
    use crate::scaling::DenseMetric;
    use nalgebra::{DMatrix, DVector};

    #[test]
    fn interior_quadratic_in_few_iterations() {
        let q = DMatrix::from_row_slice(3, 3, &[4.0, 1.0, 0.0, 1.0, 3.0, 0.5, 0.0, 0.5, 2.0]);
        let xstar = DVector::from_vec(vec![1.0, 2.0, 0.5]);
        let c: Vec<f64> = (-(&q * &xstar)).data.into();
        let f = DenseQuadratic::new(q, c).unwrap();
        let mut cfg = SolverConfig::default();
        cfg.pg_rtol = 1e-10;
        cfg.tr.delta0 = Some(1e3);
        cfg.cg.rtol = Some(1e-12);
        let r = solve_tron(&f, &[0.0; 3], &cfg, None).unwrap();
        assert!(r.status.is_converged(), "{:?}", r.status);
        assert!(r.iterations <= 3);
        assert!(r.pg_ratio() <= 1e-10);
        for (a, b) in r.x.iter().zip(xstar.iter()) {
            assert!((a - b).abs() < 1e-9);
        }
    }

    #[test]
    fn all_bounds_active_at_first_cauchy_point() {
        let f = DenseQuadratic::new(DMatrix::identity(2, 2), vec![1.0, 1.0]).unwrap();
        let r = solve_tron(&f, &[0.5, 2.0], &SolverConfig::default(), None).unwrap();
        assert!(r.status.is_converged());
        assert_eq!(r.x, vec![0.0, 0.0]);
    }

    #[test]
    fn scaled_and_unscaled_agree() {
        let q = DMatrix::from_row_slice(3, 3, &[4.0, 1.0, 0.0, 1.0, 3.0, 0.5, 0.0, 0.5, 2.0]);
        let f = DenseQuadratic::new(q.clone(), vec![-1.0, 2.0, -3.0]).unwrap();
        let p = DenseMetric::new(q.try_inverse().unwrap()).unwrap();
        let mut cfg = SolverConfig::default();
        cfg.pg_rtol = 1e-12;
        let a = solve_tron(&f, &[1.0; 3], &cfg, Some(&p)).unwrap();
        let b = solve_tron(&f, &[1.0; 3], &cfg, None).unwrap();
        assert!(a.status.is_converged() && b.status.is_converged());
        for (u, v) in a.x.iter().zip(&b.x) {
            assert!((u - v).abs() < 1e-9);
        }
    }

    #[test]
    fn radius_update_shrinks_on_poor_agreement() {
        let tr = TrustRegionParams::default();
        assert!(update_radius(&tr, 1.0, 1.0, -1.0, -0.5, 1.0) <= 0.5);
        assert!(update_radius(&tr, 1.0, 1.0, -1.0, 1.0, 1.0) >= 1.0);
    }
}
