//! Spectral projected gradient with a nonmonotone line search.

use std::collections::VecDeque;

use crate::error::{check_len, Result};
use crate::linalg::{dot, sub};
use crate::model::Objective;
use crate::scaling::Metric;

use super::config::SolverConfig;
use super::search::{binding_set, descent_direction, pg_norm, project, roundoff};
use super::trace::{Recorder, SolveResult, SolveStatus, StepKind};

/// Safeguard interval for the interpolated backtracking factor.
const SHRINK_MIN: f64 = 0.1;
const SHRINK_MAX: f64 = 0.9;

/// Minimize `model` over `x >= 0` from `x0` (projected first).
///
/// Each iteration moves towards `Proj(x − λ D g)` with `D = P̄` when a metric
/// is given and `D = I` otherwise. `λ` is the Barzilai-Borwein step `sᵀs/sᵀy`;
/// when scaled it is `sᵀy / y_Fᵀ P y_F` over the next free face.
pub fn solve_spg(
    model: &dyn Objective,
    x0: &[f64],
    cfg: &SolverConfig,
    metric: Option<&dyn Metric>,
) -> Result<SolveResult> {
    cfg.validate()?;
    let n = model.dim();
    check_len("solve_spg x0", n, x0.len())?;
    let metric = metric.filter(|m| !m.is_identity());
    if let Some(m) = metric {
        check_len("solve_spg metric", n, m.ncols())?;
    }
    let p = &cfg.spg;

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
    let mut history: VecDeque<f64> = VecDeque::with_capacity(p.memory);
    history.push_back(f);
    let mut lambda = p.alpha0;

    for k in 1..=cfg.max_iter {
        if rec.out_of_time() {
            return Ok(rec.finish(x, f, SolveStatus::TimeLimit, k - 1));
        }
        let binding = binding_set(&x, &g);
        let dir = descent_direction(metric, &g, &binding)?;
        // With a non-diagonal metric the projected step is only guaranteed to
        // descend for small steps, so shrink the spectral step until it does.
        let mut descent = None;
        for _ in 0..p.max_backtracks {
            let target: Vec<f64> = x.iter().zip(&dir).map(|(a, b)| a + lambda * b).collect();
            let d = sub(&project(&target), &x);
            let gtd = dot(&g, &d);
            if gtd < 0.0 {
                descent = Some((d, gtd));
                break;
            }
            if metric.is_none() {
                break;
            }
            lambda = (lambda / 2.0).max(p.alpha_min);
        }
        let Some((d, gtd)) = descent else {
            return Ok(rec.finish(x, f, SolveStatus::Stalled, k));
        };
        let f_ref = history.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let slack = roundoff(f_ref);

        let mut alpha = 1.0;
        let mut accepted = None;
        for _ in 0..p.max_backtracks {
            let trial = project(&x.iter().zip(&d).map(|(a, b)| a + alpha * b).collect::<Vec<_>>());
            let (ft, gt) = model.eval_f_grad(&trial);
            if ft.is_finite() && ft <= f_ref + p.gamma * alpha * gtd + slack {
                accepted = Some((trial, ft, gt));
                break;
            }
            let curv = ft - f - alpha * gtd;
            let a_q = if ft.is_finite() && curv > 0.0 {
                -0.5 * alpha * alpha * gtd / curv
            } else {
                f64::NAN
            };
            alpha = if a_q >= SHRINK_MIN * alpha && a_q <= SHRINK_MAX * alpha {
                a_q
            } else {
                alpha / 2.0
            };
        }
        let Some((x_new, f_new, g_new)) = accepted else {
            return Ok(rec.finish(x, f, SolveStatus::Stalled, k));
        };

        let s = sub(&x_new, &x);
        let y = sub(&g_new, &g);
        let sty = dot(&s, &y);
        let bb = match metric {
            // The next direction acts through P_FF on the non-binding
            // coordinates, so fit the step to y on that face: λ P_FF y_F ≈ s_F.
            Some(m) => {
                let mut yf = y.clone();
                for (v, b) in yf.iter_mut().zip(binding_set(&x_new, &g_new)) {
                    if b {
                        *v = 0.0;
                    }
                }
                sty / dot(&yf, &m.apply(&yf))
            }
            None => dot(&s, &s) / sty,
        };
        lambda = if sty <= 0.0 || !bb.is_finite() {
            p.alpha_max
        } else {
            bb.clamp(p.alpha_min, p.alpha_max)
        };
        x = x_new;
        f = f_new;
        g = g_new;
        if history.len() == p.memory {
            history.pop_front();
        }
        history.push_back(f);
        if !g.iter().all(|v| v.is_finite()) {
            return Ok(rec.finish(x, f, SolveStatus::NumericalFailure, k));
        }
        let pg = pg_norm(&x, &g);
        rec.record(k, f, pg, StepKind::Accepted);
        if pg <= tol {
            return Ok(rec.finish(x, f, SolveStatus::Converged, k));
        }
    }
    Ok(rec.finish(x, f, SolveStatus::MaxIter, cfg.max_iter))
}
