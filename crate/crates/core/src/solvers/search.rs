//! Projection, Cauchy points and line searches shared by the solvers.
//!
//! Quadratic models are described by a gradient `g` and a symmetric
//! operator `B`: `q(s) = g^T s + ½ s^T B s` is the change from the base point.

use crate::error::{check_len, Error, Result};
use crate::linalg::{axpy, dot, norm};
use crate::model::Objective;
use crate::ops::{masked_scaled_direction, LinOp};
use crate::scaling::Metric;

use super::config::{CauchyParams, WolfeParams};

/// `max(x, 0)` componentwise.
pub fn project(x: &[f64]) -> Vec<f64> {
    x.iter().map(|&v| if v > 0.0 { v } else { 0.0 }).collect()
}

/// `‖x − Proj(x − g)‖`
pub fn pg_norm(x: &[f64], g: &[f64]) -> f64 {
    x.iter()
        .zip(g)
        .map(|(&xi, &gi)| {
            let p = xi - gi;
            let d = xi - if p > 0.0 { p } else { 0.0 };
            d * d
        })
        .sum::<f64>()
        .sqrt()
}

/// Binding constraints: `x_i = 0` and `g_i > 0`.
pub fn binding_set(x: &[f64], g: &[f64]) -> Vec<bool> {
    x.iter().zip(g).map(|(&xi, &gi)| xi == 0.0 && gi > 0.0).collect()
}

/// `−P̄ g`, or `−g` with binding entries zeroed when there is no metric.
pub fn descent_direction(metric: Option<&dyn Metric>, g: &[f64], binding: &[bool]) -> Result<Vec<f64>> {
    match metric {
        Some(m) => masked_scaled_direction(m, g, binding),
        None => {
            check_len("descent_direction", g.len(), binding.len())?;
            Ok(g.iter().zip(binding).map(|(&gi, &b)| if b { 0.0 } else { -gi }).collect())
        }
    }
}

/// Norm of a step in the metric `P^{-1}` (Euclidean without a metric).
pub fn step_norm(metric: Option<&dyn Metric>, s: &[f64]) -> f64 {
    match metric {
        Some(m) => dot(s, &m.apply_inverse(s)).max(0.0).sqrt(),
        None => norm(s),
    }
}

/// Norm of a gradient in the metric `P`.
pub fn gradient_norm(metric: Option<&dyn Metric>, g: &[f64]) -> f64 {
    match metric {
        Some(m) => dot(g, &m.apply(g)).max(0.0).sqrt(),
        None => norm(g),
    }
}

/// `q(s) = g^T s + ½ s^T (B s)` given `B s`.
pub fn model_change(g: &[f64], s: &[f64], bs: &[f64]) -> f64 {
    dot(g, s) + 0.5 * dot(s, bs)
}

/// Size of rounding noise in a computed objective value near `f`. Decrease
/// tests allow this much slack so they do not fail on noise near a solution.
pub(crate) fn roundoff(f: f64) -> f64 {
    4.0 * f64::EPSILON * f.abs()
}

/// Largest `t` with `x + t d >= 0`; infinite when no coordinate decreases.
pub fn max_feasible_step(x: &[f64], d: &[f64]) -> f64 {
    x.iter()
        .zip(d)
        .filter(|(_, &di)| di < 0.0)
        .map(|(&xi, &di)| -xi / di)
        .fold(f64::INFINITY, f64::min)
}

/// Smallest and largest positive breakpoint of `t -> Proj(x + t d)`.
fn breakpoint_range(x: &[f64], d: &[f64]) -> (f64, f64) {
    x.iter()
        .zip(d)
        .filter(|(&xi, &di)| di < 0.0 && xi > 0.0)
        .map(|(&xi, &di)| -xi / di)
        .fold((f64::INFINITY, 0.0f64), |(lo, hi), t| (lo.min(t), hi.max(t)))
}

fn projected_step(x: &[f64], d: &[f64], t: f64) -> Vec<f64> {
    x.iter()
        .zip(d)
        .map(|(&xi, &di)| {
            let v = xi + t * di;
            (if v > 0.0 { v } else { 0.0 }) - xi
        })
        .collect()
}

/// A radius norm for the trust-region variant of the Cauchy search.
pub type StepNorm<'a> = &'a dyn Fn(&[f64]) -> f64;

#[derive(Debug, Clone)]
pub struct CauchyPoint {
    pub x: Vec<f64>,
    /// Path parameter of the returned point.
    pub t: f64,
    /// `B (x_c − x)`
    pub bs: Vec<f64>,
    /// No acceptable step was found; `x` is the start point.
    pub stalled: bool,
    pub b_applies: usize,
}

/// First local minimizer of `q` along `t -> Proj(x + t d)`, found by walking
/// the breakpoints. Coordinates reaching the bound are set exactly to zero.
pub fn cauchy_exact(x: &[f64], g: &[f64], d: &[f64], b: &dyn LinOp) -> Result<CauchyPoint> {
    let n = x.len();
    check_len("cauchy_exact g", n, g.len())?;
    check_len("cauchy_exact d", n, d.len())?;
    check_len("cauchy_exact operator", n, b.ncols())?;
    let gd = dot(g, d);
    if !(gd < 0.0) {
        return Err(Error::NotDescent(gd));
    }
    // Breakpoints; coordinates already at the bound and moving down are fixed at t = 0.
    let mut dc = d.to_vec();
    let mut events: Vec<(f64, usize)> = Vec::new();
    for i in 0..n {
        if d[i] < 0.0 {
            if x[i] > 0.0 {
                events.push((-x[i] / d[i], i));
            } else {
                dc[i] = 0.0;
            }
        }
    }
    events.sort_by(|a, b| a.0.total_cmp(&b.0));

    let mut z = x.to_vec();
    let mut s = vec![0.0; n];
    let mut bs = vec![0.0; n];
    let mut t_prev = 0.0;
    let mut applies = 0;
    let mut next = 0;
    loop {
        if dc.iter().all(|&v| v == 0.0) {
            break;
        }
        let t_next = events.get(next).map_or(f64::INFINITY, |e| e.0);
        let bdc = b.apply(&dc);
        applies += 1;
        // q along the segment: q(s + tau dc) = q(s) + tau f1 + ½ tau² f2.
        let f1 = dot(g, &dc) + dot(&bs, &dc);
        let f2 = dot(&dc, &bdc);
        if f1 >= 0.0 {
            break;
        }
        let dt = t_next - t_prev;
        if f2 > 0.0 && -f1 / f2 < dt {
            let tau = -f1 / f2;
            axpy(tau, &dc, &mut z);
            axpy(tau, &dc, &mut s);
            axpy(tau, &bdc, &mut bs);
            t_prev += tau;
            break;
        }
        if !t_next.is_finite() {
            return Err(Error::UnboundedModel);
        }
        axpy(dt, &dc, &mut z);
        axpy(dt, &dc, &mut s);
        axpy(dt, &bdc, &mut bs);
        t_prev = t_next;
        // All coordinates sharing this breakpoint leave the path together.
        while next < events.len() && events[next].0 == t_next {
            let i = events[next].1;
            z[i] = 0.0;
            s[i] = -x[i];
            dc[i] = 0.0;
            next += 1;
        }
    }
    // Coordinates pinned at a breakpoint may carry rounding in `bs`; refresh it.
    let exact_bs = if applies > 0 { b.apply(&s) } else { bs };
    Ok(CauchyPoint {
        x: project(&z),
        t: t_prev,
        bs: exact_bs,
        stalled: false,
        b_applies: applies + 1,
    })
}

/// Backtracking Cauchy point along `t -> Proj(x + t d)`.
///
/// A trial is acceptable when `q(s) <= mu0 g^T s` and, with a radius,
/// `norm(s) <= radius`. If the first trial is acceptable the step is
/// extrapolated by `1/beta` while it stays acceptable, the model keeps
/// decreasing and the path still has breakpoints ahead.
pub fn cauchy_backtrack(
    x: &[f64],
    g: &[f64],
    d: &[f64],
    b: &dyn LinOp,
    params: &CauchyParams,
    t0: f64,
    radius: Option<(f64, StepNorm<'_>)>,
) -> Result<CauchyPoint> {
    let n = x.len();
    check_len("cauchy_backtrack g", n, g.len())?;
    check_len("cauchy_backtrack d", n, d.len())?;
    check_len("cauchy_backtrack operator", n, b.ncols())?;
    let stalled = || CauchyPoint {
        x: x.to_vec(),
        t: 0.0,
        bs: vec![0.0; n],
        stalled: true,
        b_applies: 0,
    };
    if !(dot(g, d) < 0.0) || !(t0 > 0.0) {
        return Ok(stalled());
    }
    let mut applies = 0;
    let mut trial = |t: f64| {
        let s = projected_step(x, d, t);
        let bs = b.apply(&s);
        applies += 1;
        let gs = dot(g, &s);
        let q = gs + 0.5 * dot(&s, &bs);
        let inside = radius.is_none_or(|(r, nrm)| nrm(&s) <= r);
        let ok = inside && gs < 0.0 && q <= params.mu0 * gs;
        (ok, q, s, bs)
    };
    let (_, brpt_max) = breakpoint_range(x, d);
    let mut t = t0;
    let (ok, q, s, bs) = trial(t);
    let (t_acc, s_acc, bs_acc) = if ok {
        let (mut t_best, mut q_best, mut s_best, mut bs_best) = (t, q, s, bs);
        for _ in 0..params.max_steps {
            if t_best >= brpt_max {
                break;
            }
            let t_try = t_best / params.beta;
            let (ok, q, s, bs) = trial(t_try);
            if !ok || q >= q_best {
                break;
            }
            (t_best, q_best, s_best, bs_best) = (t_try, q, s, bs);
        }
        let _ = q_best;
        (t_best, s_best, bs_best)
    } else {
        let mut found = None;
        for _ in 0..params.max_steps {
            t *= params.beta;
            let (ok, _, s, bs) = trial(t);
            if ok {
                found = Some((t, s, bs));
                break;
            }
        }
        match found {
            Some(v) => v,
            None => {
                let mut out = stalled();
                out.b_applies = applies;
                return Ok(out);
            }
        }
    };
    let mut xc: Vec<f64> = x.iter().zip(&s_acc).map(|(a, b)| a + b).collect();
    // Coordinates the projection clamped are exactly zero.
    for i in 0..n {
        if x[i] + t_acc * d[i] <= 0.0 {
            xc[i] = 0.0;
        }
    }
    Ok(CauchyPoint {
        x: xc,
        t: t_acc,
        bs: bs_acc,
        stalled: false,
        b_applies: applies,
    })
}

#[derive(Debug, Clone)]
pub struct SearchPoint {
    pub x: Vec<f64>,
    pub t: f64,
    /// `B (x_new − x)`
    pub bs: Vec<f64>,
    pub stalled: bool,
}

/// Projected search from `x` along `w` for the model with gradient `g` at `x`.
///
/// Backtracks from `t = 1` until `q(s) <= mu0 g^T s`. Once `t` reaches the
/// first breakpoint the search stops there, since the path is linear before it.
pub fn projected_search(
    x: &[f64],
    g: &[f64],
    w: &[f64],
    b: &dyn LinOp,
    params: &CauchyParams,
) -> Result<SearchPoint> {
    let n = x.len();
    check_len("projected_search g", n, g.len())?;
    check_len("projected_search w", n, w.len())?;
    let (brpt_min, _) = breakpoint_range(x, w);
    let finish = |t: f64, s: Vec<f64>, bs: Vec<f64>| {
        let mut xn: Vec<f64> = x.iter().zip(&s).map(|(a, b)| a + b).collect();
        for i in 0..n {
            if x[i] + t * w[i] <= 0.0 {
                xn[i] = 0.0;
            }
        }
        SearchPoint {
            x: xn,
            t,
            bs,
            stalled: false,
        }
    };
    let mut t = 1.0;
    for _ in 0..params.max_steps {
        if t <= brpt_min {
            break;
        }
        let s = projected_step(x, w, t);
        let bs = b.apply(&s);
        let gs = dot(g, &s);
        if gs + 0.5 * dot(&s, &bs) <= params.mu0 * gs {
            return Ok(finish(t, s, bs));
        }
        t *= params.beta;
    }
    // Before the first breakpoint the path is a straight line.
    let t = if t < 1.0 && t < brpt_min { brpt_min } else { t };
    if t.is_finite() {
        let s = projected_step(x, w, t);
        let bs = b.apply(&s);
        if dot(g, &s) + 0.5 * dot(&s, &bs) < 0.0 {
            return Ok(finish(t, s, bs));
        }
    }
    Ok(SearchPoint {
        x: x.to_vec(),
        t: 0.0,
        bs: vec![0.0; n],
        stalled: true,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum WolfeStatus {
    /// Both conditions hold.
    Satisfied,
    /// Stopped at the feasibility cap with sufficient decrease.
    Capped,
    /// Evaluation budget exhausted; best point with sufficient decrease.
    Budget,
    /// No point with sufficient decrease was found.
    Failed,
}

#[derive(Debug, Clone)]
pub struct WolfePoint {
    pub alpha: f64,
    pub x: Vec<f64>,
    pub f: f64,
    pub g: Vec<f64>,
    pub evals: usize,
    pub status: WolfeStatus,
}

/// Strong Wolfe line search along the ray `x + alpha d`, capped at the
/// largest feasible step.
pub fn strong_wolfe(
    obj: &dyn Objective,
    x: &[f64],
    f0: f64,
    g0: &[f64],
    d: &[f64],
    params: &WolfeParams,
    alpha_init: f64,
) -> Result<WolfePoint> {
    let n = x.len();
    check_len("strong_wolfe g", n, g0.len())?;
    check_len("strong_wolfe d", n, d.len())?;
    let dphi0 = dot(g0, d);
    if !(dphi0 < 0.0) {
        return Err(Error::NotDescent(dphi0));
    }
    let alpha_max = max_feasible_step(x, d);
    let point = |a: f64| -> Vec<f64> {
        let mut y: Vec<f64> = x.iter().zip(d).map(|(xi, di)| xi + a * di).collect();
        if a >= alpha_max {
            for i in 0..n {
                if d[i] < 0.0 && -x[i] / d[i] <= a {
                    y[i] = 0.0;
                }
            }
        }
        project(&y)
    };
    let evals = std::cell::Cell::new(0usize);
    let eval = |a: f64| {
        let y = point(a);
        let (f, g) = obj.eval_f_grad(&y);
        evals.set(evals.get() + 1);
        let dphi = dot(&g, d);
        (y, f, g, dphi)
    };
    let slack = roundoff(f0);
    let armijo = |a: f64, f: f64| f <= f0 + params.mu * a * dphi0 + slack;
    let curvature = |dphi: f64| dphi.abs() <= -params.eta * dphi0;

    struct Bracket {
        a: f64,
        f: f64,
        dphi: f64,
    }
    let mut best: Option<(f64, Vec<f64>, f64, Vec<f64>)> = None;
    let mut a_prev = Bracket { a: 0.0, f: f0, dphi: dphi0 };
    let mut a = alpha_init.min(alpha_max);
    if !(a > 0.0) {
        return Ok(WolfePoint {
            alpha: 0.0,
            x: x.to_vec(),
            f: f0,
            g: g0.to_vec(),
            evals: 0,
            status: WolfeStatus::Failed,
        });
    }
    let (mut lo, mut hi);
    loop {
        let (y, f, g, dphi) = eval(a);
        if !f.is_finite() || !armijo(a, f) || (a_prev.a > 0.0 && f >= a_prev.f) {
            lo = a_prev;
            hi = Bracket { a, f, dphi };
            break;
        }
        if curvature(dphi) {
            return Ok(WolfePoint { alpha: a, x: y, f, g, evals: evals.get(), status: WolfeStatus::Satisfied });
        }
        if dphi >= 0.0 {
            lo = Bracket { a, f, dphi };
            hi = a_prev;
            best = Some((a, y, f, g));
            break;
        }
        if a >= alpha_max {
            return Ok(WolfePoint { alpha: a, x: y, f, g, evals: evals.get(), status: WolfeStatus::Capped });
        }
        best = Some((a, y, f, g));
        if evals.get() >= params.max_evals {
            let (alpha, x, f, g) = best.take().expect("best point recorded");
            return Ok(WolfePoint { alpha, x, f, g, evals: evals.get(), status: WolfeStatus::Budget });
        }
        a_prev = Bracket { a, f, dphi };
        a = (2.0 * a).min(alpha_max);
    }

    // Zoom between lo (sufficient decrease, lowest f so far) and hi.
    while evals.get() < params.max_evals {
        let (l, h) = (lo.a.min(hi.a), lo.a.max(hi.a));
        let width = h - l;
        if width <= f64::EPSILON * h.max(1.0) {
            break;
        }
        // Minimizer of the quadratic through f(lo), f'(lo), f(hi), safeguarded.
        let denom = 2.0 * (hi.f - lo.f - lo.dphi * (hi.a - lo.a));
        let mut aj = if denom > 0.0 && hi.f.is_finite() {
            lo.a - lo.dphi * (hi.a - lo.a).powi(2) / denom
        } else {
            0.5 * (l + h)
        };
        if !(aj > l + 0.1 * width && aj < h - 0.1 * width) {
            aj = 0.5 * (l + h);
        }
        let (y, f, g, dphi) = eval(aj);
        if !f.is_finite() || !armijo(aj, f) || f >= lo.f {
            hi = Bracket { a: aj, f, dphi };
        } else {
            if curvature(dphi) {
                return Ok(WolfePoint { alpha: aj, x: y, f, g, evals: evals.get(), status: WolfeStatus::Satisfied });
            }
            if dphi * (hi.a - lo.a) >= 0.0 {
                hi = lo;
            }
            lo = Bracket { a: aj, f, dphi };
            best = Some((aj, y, f, g));
        }
    }
    match best {
        Some((alpha, x, f, g)) if alpha == lo.a => Ok(WolfePoint { alpha, x, f, g, evals: evals.get(), status: WolfeStatus::Budget }),
        _ if lo.a > 0.0 => {
            let (y, f, g, _) = eval(lo.a);
            Ok(WolfePoint { alpha: lo.a, x: y, f, g, evals: evals.get(), status: WolfeStatus::Budget })
        }
        _ => Ok(WolfePoint {
            alpha: 0.0,
            x: x.to_vec(),
            f: f0,
            g: g0.to_vec(),
            evals: evals.get(),
            status: WolfeStatus::Failed,
        }),
    }
}
