//! Evaluation of u_x and its spatial derivatives along trajectories, the
//! flow map itself, extrema tracking, the nonlocal term, and Eulerian
//! field slices via monotone inversion of the flow.
//!
//! The trajectory formula is evaluated in the cancellation-free form
//! u_x(gamma(a,t),t) = (u0'(a)/J - D/kbar0) / kbar0^2,  D = d kbar0/d eta,
//! which is regular at eta = 0 and reduces to u0' there.

use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::initial_data::{minimizer_labels, BoundaryCondition, InitialDatum};
use crate::quadrature::KernelEngine;
use crate::time_map::EtaTimeMap;

/// Default quadrature tolerance for trajectory evaluations.
pub const EVAL_TOL: f64 = 1e-11;

#[derive(Debug, Clone, Copy, Serialize)]
pub struct LagrangianSample {
    pub alpha: f64,
    pub t: f64,
    pub eta: f64,
    pub gamma: f64,
    pub gamma_alpha: f64,
    pub ux: f64,
    pub uxx: f64,
    pub uxxx: f64,
}

/// One Eulerian snapshot: u_x(x, t) on a uniform grid.
#[derive(Debug, Clone, Serialize)]
pub struct FieldSlice {
    pub t: f64,
    pub x_grid: Vec<f64>,
    pub ux_values: Vec<f64>,
    /// grid maximum of u_x
    pub max_ux: f64,
    /// grid minimum of u_x
    pub min_ux: f64,
    /// nonlocal term -2 int u_x^2 dx
    pub nonlocal: f64,
}

/// Kernel state frozen at one time slice; all per-label evaluations are
/// pure against it.
pub struct SliceEval<'a> {
    engine: KernelEngine<'a>,
    datum: &'a InitialDatum,
    pub eta: f64,
    pub delta: f64,
    pub kbar0: f64,
    /// d kbar0 / d eta = int u0'/J^2
    pub dkbar0: f64,
    tol: f64,
}

impl<'a> SliceEval<'a> {
    /// Freeze kernels at time t through the map.
    pub fn at_time(map: &'a EtaTimeMap, t: f64) -> Result<Self> {
        let pt = map.eta_of_t(t)?;
        Self::at_eta(map, pt.eta, pt.delta)
    }

    /// Freeze kernels at a given eta (delta = eta_star - eta, tracked
    /// exactly by callers working near the singularity).
    pub fn at_eta(map: &'a EtaTimeMap, eta: f64, delta: f64) -> Result<Self> {
        let datum = map.datum();
        let tol = map.quad_tol().min(EVAL_TOL);
        let engine = KernelEngine::with_delta(datum, map.profile(), eta, delta)?;
        let kbar0 = engine.integrate(|_, j| 1.0 / j, tol)?.value;
        let dkbar0 = engine
            .integrate(|a, j| datum.slope(a) / (j * j), tol)?
            .value;
        Ok(SliceEval {
            engine,
            datum,
            eta,
            delta,
            kbar0,
            dkbar0,
            tol,
        })
    }

    #[inline]
    pub fn jacobian(&self, alpha: f64) -> f64 {
        self.engine.j(alpha)
    }

    /// u_x(gamma(alpha, t), t).
    pub fn ux(&self, alpha: f64) -> f64 {
        let j = self.engine.j(alpha);
        (self.datum.slope(alpha) / j - self.dkbar0 / self.kbar0) / (self.kbar0 * self.kbar0)
    }

    /// gamma_alpha = 1/(J kbar0) > 0.
    pub fn gamma_alpha(&self, alpha: f64) -> f64 {
        1.0 / (self.engine.j(alpha) * self.kbar0)
    }

    /// u_xx along the trajectory: u0''(alpha) * gamma_alpha.
    pub fn uxx(&self, alpha: f64) -> Result<f64> {
        Ok(self.datum.eval_deriv(alpha, 2)? * self.gamma_alpha(alpha))
    }

    /// u_xxx along the trajectory: u0'''(alpha) + eta u0''(alpha)^2 / J.
    pub fn uxxx(&self, alpha: f64) -> Result<f64> {
        let d2 = self.datum.eval_deriv(alpha, 2)?;
        let d3 = self.datum.eval_deriv(alpha, 3)?;
        Ok(d3 + self.eta * d2 * d2 / self.engine.j(alpha))
    }

    /// gamma(alpha, t) - gamma(lo, t) by cumulative quadrature of gamma_alpha.
    pub fn gamma_advance(&self, lo: f64, hi: f64) -> Result<f64> {
        let k0 = self.kbar0;
        Ok(self
            .engine
            .integrate_range(|_, j| 1.0 / (j * k0), lo, hi, self.tol)?
            .value)
    }

    /// gamma(alpha, t) with the anchor gamma(0, t) = 0.
    pub fn gamma(&self, alpha: f64) -> Result<f64> {
        self.gamma_advance(0.0, alpha)
    }

    /// Nonlocal term I(t) = -2 int_0^1 (u_x o gamma)^2 gamma_alpha dalpha.
    pub fn nonlocal(&self) -> Result<f64> {
        let k0 = self.kbar0;
        let dk = self.dkbar0;
        let datum = self.datum;
        let v = self
            .engine
            .integrate(
                |a, j| {
                    let w = (datum.slope(a) / j - dk / k0) / (k0 * k0);
                    w * w / (j * k0)
                },
                self.tol,
            )?
            .value;
        Ok(-2.0 * v)
    }

    /// Mean of u_x in label measure, int (u_x o gamma) gamma_alpha dalpha;
    /// vanishes for anchored data.
    pub fn ux_label_mean(&self) -> Result<f64> {
        let k0 = self.kbar0;
        let dk = self.dkbar0;
        let datum = self.datum;
        Ok(self
            .engine
            .integrate(
                |a, j| (datum.slope(a) / j - dk / k0) / (k0 * k0) / (j * k0),
                self.tol,
            )?
            .value)
    }
}

/// True when the flow anchor gamma(0, t) = 0 is determined: Dirichlet
/// data pins the endpoints; periodic data needs odd symmetry.
pub fn is_anchored(datum: &InitialDatum) -> bool {
    match datum.bc {
        BoundaryCondition::Dirichlet => true,
        BoundaryCondition::Periodic => datum.is_odd_symmetric(),
    }
}

/// u_x along the trajectory labeled alpha at time t.
pub fn ux_along(map: &EtaTimeMap, alpha: f64, t: f64) -> Result<f64> {
    Ok(SliceEval::at_time(map, t)?.ux(alpha))
}

/// (gamma, gamma_alpha) at (alpha, t). Positions are anchored at
/// gamma(0, t) = 0; for periodic data without odd symmetry they are
/// label-relative (see `is_anchored`).
pub fn flow_map(map: &EtaTimeMap, alpha: f64, t: f64) -> Result<(f64, f64)> {
    let eval = SliceEval::at_time(map, t)?;
    Ok((eval.gamma(alpha)?, eval.gamma_alpha(alpha)))
}

pub fn uxx_along(map: &EtaTimeMap, alpha: f64, t: f64) -> Result<f64> {
    SliceEval::at_time(map, t)?.uxx(alpha)
}

pub fn uxxx_along(map: &EtaTimeMap, alpha: f64, t: f64) -> Result<f64> {
    SliceEval::at_time(map, t)?.uxxx(alpha)
}

/// Full trajectory state at (alpha, t).
pub fn sample(map: &EtaTimeMap, alpha: f64, t: f64) -> Result<LagrangianSample> {
    let eval = SliceEval::at_time(map, t)?;
    Ok(LagrangianSample {
        alpha,
        t,
        eta: eval.eta,
        gamma: eval.gamma(alpha)?,
        gamma_alpha: eval.gamma_alpha(alpha),
        ux: eval.ux(alpha),
        uxx: eval.uxx(alpha)?,
        uxxx: eval.uxxx(alpha)?,
    })
}

/// (M(t), m(t)): the supremum sits on the maximizer trajectories, the
/// infimum on the minimizer trajectories of u0'.
pub fn extrema(map: &EtaTimeMap, t: f64) -> Result<(f64, f64)> {
    let eval = SliceEval::at_time(map, t)?;
    let profile = map.profile();
    let max = if profile.maximizers.is_empty() {
        grid_scan(&eval, 1025).0
    } else {
        profile
            .maximizers
            .iter()
            .map(|m| eval.ux(m.alpha_bar))
            .fold(f64::NEG_INFINITY, f64::max)
    };
    let mins = minimizer_labels(map.datum());
    let min = if mins.is_empty() {
        grid_scan(&eval, 1025).1
    } else {
        mins.iter()
            .map(|&a| eval.ux(a))
            .fold(f64::INFINITY, f64::min)
    };
    Ok((max, min))
}

/// Grid scan of u_x over labels, the cross-check for `extrema`.
pub fn grid_scan(eval: &SliceEval, n: usize) -> (f64, f64) {
    let mut max = f64::NEG_INFINITY;
    let mut min = f64::INFINITY;
    for i in 0..n {
        let v = eval.ux(i as f64 / (n - 1) as f64);
        max = max.max(v);
        min = min.min(v);
    }
    (max, min)
}

/// I(t) = -2 int_0^1 u_x(x, t)^2 dx, computed in label variables.
pub fn nonlocal_term(map: &EtaTimeMap, t: f64) -> Result<f64> {
    SliceEval::at_time(map, t)?.nonlocal()
}

/// u_x(x, t) at arbitrary positions x in [0, 1], by inverting the
/// strictly increasing flow map. Requires an anchored flow.
pub fn eulerian_values(map: &EtaTimeMap, t: f64, xs: &[f64]) -> Result<Vec<f64>> {
    if !is_anchored(map.datum()) {
        return Err(Error::UnanchoredFlow);
    }
    let eval = SliceEval::at_time(map, t)?;
    let profile = map.profile();

    // graded label ladder: uniform base plus geometric refinement toward
    // each maximizer, where the flow stretches as t -> t_star
    let mut labels: Vec<f64> = (0..=256).map(|i| i as f64 / 256.0).collect();
    for m in &profile.maximizers {
        let q = m.kind.exponent_q();
        let eps = if eval.eta > 0.0 {
            (1.0 / eval.eta - profile.m0).abs()
        } else {
            1.0
        };
        let s_core = (eps / m.c1.abs().max(1e-300)).powf(1.0 / q);
        let mut s = m.radius;
        let floor = (s_core * 1e-2).max(1e-15);
        let mut guard = 0;
        while s > floor && guard < 80 {
            for side in [-1.0, 1.0] {
                let a = m.alpha_bar + side * s;
                if (0.0..=1.0).contains(&a) {
                    labels.push(a);
                }
            }
            s *= 0.5;
            guard += 1;
        }
    }
    labels.sort_by(f64::total_cmp);
    labels.dedup_by(|a, b| (*a - *b).abs() < 1e-15);

    // cumulative positions along the ladder
    let mut gammas = Vec::with_capacity(labels.len());
    let mut acc = 0.0;
    gammas.push(0.0);
    for w in labels.windows(2) {
        acc += eval.gamma_advance(w[0], w[1])?;
        gammas.push(acc);
    }
    let total = *gammas.last().unwrap();

    xs.par_iter()
        .map(|&x| -> Result<f64> {
            let target = x.clamp(0.0, total);
            // bracket by tabulated positions, then Newton on the label
            let k = gammas
                .partition_point(|&gv| gv <= target)
                .clamp(1, labels.len() - 1);
            let (mut a_lo, mut a_hi) = (labels[k - 1], labels[k]);
            let (mut g_lo, g_hi) = (gammas[k - 1], gammas[k]);
            let mut alpha = if g_hi > g_lo {
                a_lo + (a_hi - a_lo) * (target - g_lo) / (g_hi - g_lo)
            } else {
                a_lo
            };
            for _ in 0..40 {
                let g = g_lo + eval.gamma_advance(a_lo, alpha)?;
                let res = g - target;
                if res.abs() <= 1e-11 {
                    break;
                }
                if res > 0.0 {
                    a_hi = alpha;
                } else {
                    a_lo = alpha;
                    g_lo = g;
                }
                let slope = eval.gamma_alpha(alpha).max(1e-300);
                let next = alpha - res / slope;
                alpha = if next > a_lo && next < a_hi {
                    next
                } else {
                    0.5 * (a_lo + a_hi)
                };
            }
            Ok(eval.ux(alpha))
        })
        .collect::<Result<Vec<f64>>>()
}

/// u_x(x, t) on a uniform grid of n_points.
pub fn eulerian_slice(map: &EtaTimeMap, t: f64, n_points: usize) -> Result<FieldSlice> {
    if n_points < 2 {
        return Err(Error::InvalidArgument {
            detail: "eulerian_slice needs at least two grid points".into(),
        });
    }
    let x_grid: Vec<f64> = (0..n_points)
        .map(|i| i as f64 / (n_points - 1) as f64)
        .collect();
    let ux_values = eulerian_values(map, t, &x_grid)?;
    let max_ux = ux_values.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let min_ux = ux_values.iter().cloned().fold(f64::INFINITY, f64::min);
    let nonlocal = nonlocal_term(map, t)?;
    Ok(FieldSlice {
        t,
        x_grid,
        ux_values,
        max_ux,
        min_ux,
        nonlocal,
    })
}
