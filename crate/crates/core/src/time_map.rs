//! The bijection between the internal variable eta and physical time t,
//! t(eta) = int_0^eta kbar0(mu)^2 dmu, tabulated on a grid that approaches
//! eta_star geometrically, with closed-form tail laws past the last node.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::initial_data::{CriticalProfile, InitialDatum};
use crate::quadrature::{asymptotic_rates, KernelEngine, RateModel};

/// Default relative gap of the closest tabulated eta to eta_star.
pub const DEFAULT_ETA_GAP: f64 = 1e-10;

#[derive(Debug, Clone, Copy, Serialize)]
pub struct MapSample {
    pub eta: f64,
    /// eta_star - eta carried exactly (inf for unbounded maps).
    pub delta: f64,
    pub t: f64,
    pub kbar0: f64,
    pub kbar1: f64,
}

/// Inverse-map result: eta together with the exactly tracked gap.
#[derive(Debug, Clone, Copy)]
pub struct EtaPoint {
    pub eta: f64,
    pub delta: f64,
}

#[derive(Debug, Clone, Copy)]
enum Tail {
    /// kbar0 ~ a * (ln(1/d) + offset); finite t_star.
    LogSquared { a: f64, offset: f64 },
    /// kbar0 ~ coeff * d^p. Finite t_star iff 2p + 1 > 0 (p > -1/2).
    Power { coeff: f64, p: f64 },
    /// unbounded eta (M0 <= 0); dt/deta -> kbar0_last^2.
    Flat { kbar0: f64 },
}

#[derive(Debug, Clone)]
pub struct EtaTimeMap {
    datum: InitialDatum,
    profile: CriticalProfile,
    samples: Vec<MapSample>,
    pub eta_star: f64,
    /// +inf when the solution is global.
    pub t_star: f64,
    /// Tail divergence model of kbar0 (None for degenerate data).
    pub rate: Option<RateModel>,
    tail: Tail,
    quad_tol: f64,
    /// pchip of ln(delta) (or eta) against t, for inverse initial guesses
    inv_guess: Pchip,
}

/// Build the tabulated map. `quad_tol` is the kernel quadrature tolerance;
/// `eta_gap` the relative gap of the closest node to eta_star.
pub fn build_map(
    datum: &InitialDatum,
    profile: &CriticalProfile,
    quad_tol: f64,
    eta_gap: f64,
) -> Result<EtaTimeMap> {
    if !(quad_tol > 0.0) {
        return Err(Error::InvalidArgument {
            detail: format!("quad_tol must be positive, got {quad_tol}"),
        });
    }
    if profile.eta_star.is_finite() {
        build_finite(datum, profile, quad_tol, eta_gap.clamp(1e-14, 0.5))
    } else {
        build_unbounded(datum, profile, quad_tol)
    }
}

/// Free-function accessor matching the module interface; the analytic
/// finiteness decision is made at build time from the profile exponent.
pub fn blowup_time(map: &EtaTimeMap, _profile: &CriticalProfile) -> f64 {
    map.t_star
}

fn kbar0_at(datum: &InitialDatum, profile: &CriticalProfile, eta: f64, delta: f64, tol: f64) -> Result<f64> {
    let engine = KernelEngine::with_delta(datum, profile, eta, delta)?;
    Ok(engine.integrate(|_, j| 1.0 / j, tol)?.value)
}

fn kbar1_at(datum: &InitialDatum, profile: &CriticalProfile, eta: f64, delta: f64, tol: f64) -> Result<f64> {
    let engine = KernelEngine::with_delta(datum, profile, eta, delta)?;
    Ok(engine.integrate(|_, j| 1.0 / (j * j), tol)?.value)
}

/// Adaptive GK21 on a plain closure; bisect-the-worst with budget.
fn adaptive_gk<F: Fn(f64) -> f64>(f: &F, a: f64, b: f64, tol: f64) -> Result<f64> {
    let gk = |lo: f64, hi: f64| crate::quadrature::gk21_pub(f, lo, hi);
    let mut items = vec![{
        let (v, e) = gk(a, b);
        (a, b, v, e)
    }];
    for _ in 0..2000 {
        let err: f64 = items.iter().map(|it| it.3).sum();
        let total: f64 = items.iter().map(|it| it.2).sum();
        if err <= tol.max(1e-13 * total.abs()) {
            let mut sorted: Vec<_> = items.iter().collect();
            sorted.sort_by(|x, y| x.0.total_cmp(&y.0));
            return Ok(sorted.iter().map(|it| it.2).sum());
        }
        let (wi, _) = items
            .iter()
            .enumerate()
            .max_by(|(_, x), (_, y)| x.3.total_cmp(&y.3))
            .unwrap();
        let (lo, hi, _, _) = items[wi];
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            items[wi].3 = 0.0;
            continue;
        }
        let (v1, e1) = gk(lo, mid);
        let (v2, e2) = gk(mid, hi);
        items[wi] = (lo, mid, v1, e1);
        items.push((mid, hi, v2, e2));
    }
    let total: f64 = items.iter().map(|it| it.2).sum();
    let err: f64 = items.iter().map(|it| it.3).sum();
    Err(Error::QuadratureBudgetExceeded {
        estimate: total,
        est_error: err,
        tol,
    })
}

fn build_finite(
    datum: &InitialDatum,
    profile: &CriticalProfile,
    quad_tol: f64,
    eta_gap: f64,
) -> Result<EtaTimeMap> {
    let eta_star = profile.eta_star;
    // relative gaps: linear head to 1/2, then geometric with ratio 1/sqrt(2)
    let mut gaps: Vec<f64> = (0..=8).map(|j| 1.0 - j as f64 / 16.0).collect();
    let mut g = 0.5;
    let ratio = 0.5_f64.sqrt();
    while g > eta_gap {
        g = (g * ratio).max(eta_gap);
        gaps.push(g);
    }

    let mut samples: Vec<MapSample> = Vec::with_capacity(gaps.len());
    let mut t = 0.0;
    let mut prev_delta = f64::NAN;
    for (i, &grel) in gaps.iter().enumerate() {
        let delta = eta_star * grel;
        let eta = eta_star - delta;
        let k0 = kbar0_at(datum, profile, eta, delta, quad_tol)?;
        let k1 = kbar1_at(datum, profile, eta, delta, quad_tol)?;
        if i > 0 {
            t += panel_time(datum, profile, eta_star, delta, prev_delta, quad_tol)?;
        }
        samples.push(MapSample {
            eta,
            delta,
            t,
            kbar0: k0,
            kbar1: k1,
        });
        prev_delta = delta;
    }

    let last = *samples.last().unwrap();
    let (tail, rate, t_star) = match asymptotic_rates(profile, 1) {
        Ok(rate) => {
            if rate.log_correction {
                let a = rate.constant;
                let offset = last.kbar0 / a - (1.0 / last.delta).ln();
                let t_star = last.t + a * a * log_sq_tail(last.delta, offset);
                (Tail::LogSquared { a, offset }, Some(rate), t_star)
            } else {
                let p = rate.exponent;
                let coeff = last.kbar0 * last.delta.powf(-p);
                let t_star = if 2.0 * p + 1.0 > 0.0 {
                    last.t + coeff * coeff * last.delta.powf(2.0 * p + 1.0) / (2.0 * p + 1.0)
                } else {
                    f64::INFINITY
                };
                (Tail::Power { coeff, p }, Some(rate), t_star)
            }
        }
        Err(_) => {
            // constant positive slope: kbar0 = 1/(m0*delta) exactly
            let coeff = last.kbar0 * last.delta;
            (Tail::Power { coeff, p: -1.0 }, None, f64::INFINITY)
        }
    };

    let inv_guess = inverse_guess_table(&samples, true);
    Ok(EtaTimeMap {
        datum: datum.clone(),
        profile: profile.clone(),
        samples,
        eta_star,
        t_star,
        rate,
        tail,
        quad_tol,
        inv_guess,
    })
}

fn build_unbounded(
    datum: &InitialDatum,
    profile: &CriticalProfile,
    quad_tol: f64,
) -> Result<EtaTimeMap> {
    let mut etas = vec![0.0, 0.125, 0.25, 0.5];
    while *etas.last().unwrap() < 1e9 {
        etas.push(etas.last().unwrap() * 2.0);
    }
    let mut samples = Vec::new();
    let mut t = 0.0;
    let mut prev = 0.0;
    for (i, &eta) in etas.iter().enumerate() {
        let k0 = kbar0_at(datum, profile, eta, f64::INFINITY, quad_tol)?;
        let k1 = kbar1_at(datum, profile, eta, f64::INFINITY, quad_tol)?;
        if i > 0 {
            let f = |mu: f64| -> f64 {
                kbar0_at(datum, profile, mu, f64::INFINITY, quad_tol)
                    .map(|v| v * v)
                    .unwrap_or(f64::NAN)
            };
            t += adaptive_gk(&f, prev, eta, 1e-12 * (1.0 + t))?;
        }
        samples.push(MapSample {
            eta,
            delta: f64::INFINITY,
            t,
            kbar0: k0,
            kbar1: k1,
        });
        prev = eta;
        if t > 256.0 {
            break;
        }
    }
    let last = *samples.last().unwrap();
    let inv_guess = inverse_guess_table(&samples, false);
    Ok(EtaTimeMap {
        datum: datum.clone(),
        profile: profile.clone(),
        samples,
        eta_star: f64::INFINITY,
        t_star: f64::INFINITY,
        rate: None,
        tail: Tail::Flat { kbar0: last.kbar0 },
        quad_tol,
        inv_guess,
    })
}

/// int_0^d (ln(1/s) + c)^2 ds / d-free closed form:
/// int_0^d = d * [(L + c)^2 + 2(L + c) + 2], L = ln(1/d).
fn log_sq_tail(d: f64, c: f64) -> f64 {
    let l = (1.0 / d).ln() + c;
    d * (l * l + 2.0 * l + 2.0)
}

/// t-advance between two gap values (delta decreasing), integrating
/// kbar0^2 in the gap variable.
fn panel_time(
    datum: &InitialDatum,
    profile: &CriticalProfile,
    eta_star: f64,
    delta_lo: f64,
    delta_hi: f64,
    quad_tol: f64,
) -> Result<f64> {
    let f = |d: f64| -> f64 {
        kbar0_at(datum, profile, eta_star - d, d, quad_tol)
            .map(|v| v * v)
            .unwrap_or(f64::NAN)
    };
    let (rough, _) = crate::quadrature::gk21_pub(&f, delta_lo, delta_hi);
    adaptive_gk(&f, delta_lo, delta_hi, 1e-13 * rough.abs().max(1e-2))
}

impl EtaTimeMap {
    pub fn samples(&self) -> &[MapSample] {
        &self.samples
    }

    pub fn datum(&self) -> &InitialDatum {
        &self.datum
    }

    pub fn profile(&self) -> &CriticalProfile {
        &self.profile
    }

    pub fn quad_tol(&self) -> f64 {
        self.quad_tol
    }

    /// Exact t(eta) via the tabulated anchor plus a local panel integral.
    pub fn t_of_eta(&self, eta: f64) -> Result<f64> {
        if !(0.0..=f64::INFINITY).contains(&eta) {
            return Err(Error::InvalidArgument {
                detail: format!("eta must be nonnegative, got {eta}"),
            });
        }
        if self.eta_star.is_finite() {
            let delta = self.eta_star - eta;
            if delta <= 0.0 {
                return Err(Error::SingularEta {
                    eta,
                    eta_star: self.eta_star,
                });
            }
            self.t_of_delta(delta)
        } else {
            // anchor at the nearest tabulated eta below
            let i = self
                .samples
                .partition_point(|s| s.eta <= eta)
                .saturating_sub(1);
            let s = self.samples[i];
            let f = |mu: f64| -> f64 {
                kbar0_at(&self.datum, &self.profile, mu, f64::INFINITY, self.quad_tol)
                    .map(|v| v * v)
                    .unwrap_or(f64::NAN)
            };
            Ok(s.t + adaptive_gk(&f, s.eta, eta, 1e-12 * (1.0 + s.t))?)
        }
    }

    /// Exact t at a given gap delta = eta_star - eta (finite maps only).
    pub fn t_of_delta(&self, delta: f64) -> Result<f64> {
        let last = self.samples.last().unwrap();
        if delta >= last.delta {
            // within the tabulated range: anchor at nearest sample with
            // larger-or-equal gap (samples store decreasing delta)
            let i = self
                .samples
                .partition_point(|s| s.delta >= delta)
                .saturating_sub(1);
            let s = self.samples[i];
            let f = |d: f64| -> f64 {
                kbar0_at(&self.datum, &self.profile, self.eta_star - d, d, self.quad_tol)
                    .map(|v| v * v)
                    .unwrap_or(f64::NAN)
            };
            let (rough, _) = crate::quadrature::gk21_pub(&f, delta, s.delta);
            let dt = adaptive_gk(&f, delta, s.delta, 1e-13 * rough.abs().max(1e-3))?;
            Ok(s.t + dt)
        } else {
            // beyond the table: closed-form tail
            match self.tail {
                Tail::LogSquared { a, offset } => Ok(self.t_star
                    - a * a * log_sq_tail(delta, offset)),
                Tail::Power { coeff, p } => {
                    let e = 2.0 * p + 1.0;
                    if e > 0.0 {
                        Ok(self.t_star - coeff * coeff * delta.powf(e) / e)
                    } else {
                        Ok(last.t + coeff * coeff * (delta.powf(e) - last.delta.powf(e)) / e)
                    }
                }
                Tail::Flat { .. } => unreachable!("finite map has a gap tail"),
            }
        }
    }

    /// Monotone inverse eta(t) with residual |t(eta) - t| <= 1e-10 max(1, t).
    pub fn eta_of_t(&self, t: f64) -> Result<EtaPoint> {
        if !t.is_finite() || t < 0.0 {
            return Err(Error::InvalidArgument {
                detail: format!("t must be finite and nonnegative, got {t}"),
            });
        }
        if t >= self.t_star {
            return Err(Error::BeyondBlowup {
                t,
                t_star: self.t_star,
            });
        }
        if t == 0.0 {
            return Ok(EtaPoint {
                eta: 0.0,
                delta: self.eta_star,
            });
        }
        let target_res = 1e-10 * t.max(1.0);
        let last = *self.samples.last().unwrap();

        if self.eta_star.is_finite() {
            let (mut lo, mut hi) = if t <= last.t {
                // bracket in delta: t increases as delta decreases
                let i = self.samples.partition_point(|s| s.t <= t) - 1;
                (self.samples[(i + 1).min(self.samples.len() - 1)].delta, self.samples[i].delta)
            } else {
                (0.0, last.delta)
            };
            // initial guess from the pchip of t -> ln(delta)
            let mut d = self.inv_guess.eval(t).exp().clamp(
                lo.max(1e-306),
                if hi > 0.0 { hi } else { last.delta },
            );
            if t > last.t {
                d = self.invert_tail(t, last);
                return Ok(EtaPoint {
                    eta: self.eta_star - d,
                    delta: d,
                });
            }
            for _ in 0..60 {
                let res = self.t_of_delta(d)? - t;
                if res.abs() <= target_res {
                    break;
                }
                if res > 0.0 {
                    // t(d) too large -> d too small
                    lo = d;
                } else {
                    hi = d;
                }
                let k0 = kbar0_at(&self.datum, &self.profile, self.eta_star - d, d, self.quad_tol)?;
                let step = res / (k0 * k0);
                let next = d + step;
                d = if next > lo && next < hi {
                    next
                } else {
                    0.5 * (lo + hi)
                };
            }
            Ok(EtaPoint {
                eta: self.eta_star - d,
                delta: d,
            })
        } else {
            let (mut lo, mut hi) = if t <= last.t {
                let i = self.samples.partition_point(|s| s.t <= t) - 1;
                (self.samples[i].eta, self.samples[(i + 1).min(self.samples.len() - 1)].eta)
            } else {
                let Tail::Flat { kbar0 } = self.tail else {
                    unreachable!()
                };
                let eta = last.eta + (t - last.t) * kbar0 * kbar0;
                return Ok(EtaPoint {
                    eta,
                    delta: f64::INFINITY,
                });
            };
            let mut eta = self.inv_guess.eval(t).clamp(lo, hi);
            for _ in 0..60 {
                let res = self.t_of_eta(eta)? - t;
                if res.abs() <= target_res {
                    break;
                }
                if res > 0.0 {
                    hi = eta;
                } else {
                    lo = eta;
                }
                let k0 = kbar0_at(&self.datum, &self.profile, eta, f64::INFINITY, self.quad_tol)?;
                let next = eta - res / (k0 * k0);
                eta = if next > lo && next < hi {
                    next
                } else {
                    0.5 * (lo + hi)
                };
            }
            Ok(EtaPoint {
                eta,
                delta: f64::INFINITY,
            })
        }
    }

    /// Closed-form tail inversion for t beyond the last tabulated node.
    fn invert_tail(&self, t: f64, last: MapSample) -> f64 {
        match self.tail {
            Tail::LogSquared { a, offset } => {
                // solve a^2 F(d) = t_star - t by Newton in ln d
                let target = (self.t_star - t) / (a * a);
                let mut d = last.delta * ((self.t_star - t) / (self.t_star - last.t)).max(1e-60);
                for _ in 0..80 {
                    let f = log_sq_tail(d, offset);
                    // dF/dd = (L + c)^2 with L = ln(1/d)
                    let l = (1.0 / d).ln() + offset;
                    let step = (f - target) / (l * l).max(1e-300);
                    let next = d - step;
                    d = if next > 0.0 && next < last.delta {
                        next
                    } else {
                        0.5 * d
                    };
                    if (f / target - 1.0).abs() < 1e-12 {
                        break;
                    }
                }
                d
            }
            Tail::Power { coeff, p } => {
                let e = 2.0 * p + 1.0;
                if e > 0.0 {
                    (e * (self.t_star - t) / (coeff * coeff)).powf(1.0 / e)
                } else if e == 0.0 {
                    // kbar0^2 = coeff^2/d: t - t_last = coeff^2 ln(d_last/d)
                    last.delta * (-(t - last.t) / (coeff * coeff)).exp()
                } else {
                    (last.delta.powf(e) + e.abs() * (t - last.t) / (coeff * coeff)).powf(1.0 / e)
                }
            }
            Tail::Flat { .. } => unreachable!(),
        }
    }
}

fn inverse_guess_table(samples: &[MapSample], finite: bool) -> Pchip {
    let xs: Vec<f64> = samples.iter().map(|s| s.t).collect();
    let ys: Vec<f64> = samples
        .iter()
        .map(|s| if finite { s.delta.ln() } else { s.eta })
        .collect();
    Pchip::new(xs, ys)
}

/// Fritsch-Carlson monotone piecewise-cubic interpolant.
#[derive(Debug, Clone)]
pub struct Pchip {
    x: Vec<f64>,
    y: Vec<f64>,
    d: Vec<f64>,
}

impl Pchip {
    /// x must be strictly increasing with at least two nodes.
    pub fn new(x: Vec<f64>, y: Vec<f64>) -> Self {
        let n = x.len();
        assert!(n >= 2 && y.len() == n, "pchip needs matching nodes");
        let mut h = Vec::with_capacity(n - 1);
        let mut slope = Vec::with_capacity(n - 1);
        for k in 0..n - 1 {
            let hk = x[k + 1] - x[k];
            assert!(hk > 0.0, "pchip abscissae must increase");
            h.push(hk);
            slope.push((y[k + 1] - y[k]) / hk);
        }
        let mut d = vec![0.0; n];
        for k in 1..n - 1 {
            let (s1, s2) = (slope[k - 1], slope[k]);
            if s1 == 0.0 || s2 == 0.0 || s1.signum() != s2.signum() {
                d[k] = 0.0;
            } else {
                let w1 = 2.0 * h[k] + h[k - 1];
                let w2 = h[k] + 2.0 * h[k - 1];
                d[k] = (w1 + w2) / (w1 / s1 + w2 / s2);
            }
        }
        d[0] = edge_slope(h[0], h.get(1).copied().unwrap_or(h[0]), slope[0], slope.get(1).copied().unwrap_or(slope[0]));
        let m = n - 1;
        d[m] = edge_slope(
            h[m - 1],
            if m >= 2 { h[m - 2] } else { h[m - 1] },
            slope[m - 1],
            if m >= 2 { slope[m - 2] } else { slope[m - 1] },
        );
        Pchip { x, y, d }
    }

    pub fn eval(&self, xq: f64) -> f64 {
        let n = self.x.len();
        let k = if xq <= self.x[0] {
            0
        } else if xq >= self.x[n - 1] {
            n - 2
        } else {
            self.x.partition_point(|&v| v <= xq) - 1
        };
        let h = self.x[k + 1] - self.x[k];
        let t = (xq - self.x[k]) / h;
        let (t2, t3) = (t * t, t * t * t);
        let h00 = 2.0 * t3 - 3.0 * t2 + 1.0;
        let h10 = t3 - 2.0 * t2 + t;
        let h01 = -2.0 * t3 + 3.0 * t2;
        let h11 = t3 - t2;
        h00 * self.y[k] + h10 * h * self.d[k] + h01 * self.y[k + 1] + h11 * h * self.d[k + 1]
    }
}

fn edge_slope(h0: f64, h1: f64, s0: f64, s1: f64) -> f64 {
    let mut d = ((2.0 * h0 + h1) * s0 - h0 * s1) / (h0 + h1);
    if d.signum() != s0.signum() {
        d = 0.0;
    } else if s0.signum() != s1.signum() && d.abs() > 3.0 * s0.abs() {
        d = 3.0 * s0;
    }
    d
}
