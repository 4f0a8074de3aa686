//! Regularity classification: finite-time blowup versus global existence,
//! decided from the critical profile, with predicted divergence/decay laws
//! and an empirical verification pass that fits the computed trajectories
//! against those predictions.

use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::initial_data::{
    BoundaryCondition, CriticalProfile, InitialDatum, MaximizerKind,
};
use crate::lagrangian::SliceEval;
use crate::quadrature::{asymptotic_rates, RateModel};
use crate::time_map::{build_map, EtaTimeMap};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum Governing {
    Thm3_1,
    Thm3_2,
    Remark3_3,
    OutsideHypotheses,
}

/// What kind of global datum this is: an odd-order zero of u0'', a
/// fractional exponent q >= 2, or data outside the M0 > 0 hypotheses.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub enum GlobalOrder {
    ZeroOrder(u32),
    Exponent(f64),
    Degenerate,
}

#[derive(Debug, Clone, Serialize)]
pub enum Outcome {
    FiniteTimeBlowup {
        t_star: f64,
        /// law of M(t) in the gap delta = eta_star - eta
        max_rate: RateModel,
        /// law of the infimum (negative constant: divergence to -inf)
        min_rate: RateModel,
        /// leading coefficient of t_star - t against the gap
        time_rate_constant: f64,
        /// full t_star - t law including the log correction
        t_law: RateModel,
    },
    Global {
        order: GlobalOrder,
        /// limit of M(t) as t -> inf (0 for orders above the threshold)
        limit_max: f64,
        /// limit of u_x along non-maximizer trajectories
        limit_off: f64,
    },
}

#[derive(Debug, Clone, Serialize)]
pub struct RegularityVerdict {
    pub outcome: Outcome,
    pub governing: Governing,
    pub m0: f64,
    pub eta_star: f64,
    pub notes: Vec<String>,
}

impl RegularityVerdict {
    pub fn is_blowup(&self) -> bool {
        matches!(self.outcome, Outcome::FiniteTimeBlowup { .. })
    }

    pub fn t_star(&self) -> f64 {
        match &self.outcome {
            Outcome::FiniteTimeBlowup { t_star, .. } => *t_star,
            Outcome::Global { .. } => f64::INFINITY,
        }
    }
}

/// Map quadrature settings used when the verdict needs a blowup time.
const CLASSIFY_TOL: f64 = 1e-10;
const CLASSIFY_GAP: f64 = 1e-8;

/// Decision table over the critical profile. Blowup verdicts carry the
/// computed blowup time, so this builds the time map internally.
pub fn classify(datum: &InitialDatum, profile: &CriticalProfile) -> Result<RegularityVerdict> {
    let mut notes = Vec::new();

    if profile.m0 <= 0.0 || profile.maximizers.is_empty() {
        let degenerate_zero = profile.m0 == 0.0 && profile.maximizers.is_empty();
        if profile.m0 <= 0.0 {
            notes.push(format!(
                "M0 = {} is not positive; the singularity mechanism J = 1 - eta u0' never activates",
                profile.m0
            ));
        } else {
            notes.push("slope is constant; no isolated maximizers".into());
        }
        let limit = if degenerate_zero { 0.0 } else { f64::NAN };
        return Ok(RegularityVerdict {
            outcome: Outcome::Global {
                order: GlobalOrder::Degenerate,
                limit_max: limit,
                limit_off: limit,
            },
            governing: Governing::OutsideHypotheses,
            m0: profile.m0,
            eta_star: profile.eta_star,
            notes,
        });
    }

    let qd = profile.dominant_exponent().unwrap();
    let smooth = !profile
        .maximizers
        .iter()
        .any(|m| matches!(m.kind, MaximizerKind::Fractional(_)));
    let orders: Vec<u32> = profile
        .maximizers
        .iter()
        .filter_map(|m| match m.kind {
            MaximizerKind::InteriorOrder(k) => Some(k),
            _ => None,
        })
        .collect();
    if orders.len() > 1 && orders.iter().any(|&k| k != orders[0]) {
        notes.push(
            "mixed zero orders among maximizers; the largest order dominates the kernels".into(),
        );
    }

    if qd < 2.0 {
        // finite-time blowup
        if smooth && datum.bc == BoundaryCondition::Periodic {
            return Err(Error::InternalInconsistency {
                detail: "smooth periodic data cannot carry boundary-linear maximizers".into(),
            });
        }
        let governing = if smooth { Governing::Thm3_1 } else { Governing::Remark3_3 };
        if !smooth {
            notes.push("fractional-exponent regime; rates are the stated extension".into());
        }
        let map = build_map(datum, profile, CLASSIFY_TOL, CLASSIFY_GAP)?;
        let rate1 = asymptotic_rates(profile, 1)?;
        let extension = !smooth;
        let (max_rate, min_rate, t_law) = if rate1.log_correction {
            let a = rate1.constant;
            (
                RateModel {
                    exponent: -1.0,
                    constant: 1.0 / (a * a),
                    log_correction: true,
                    log_power: -2,
                    extension,
                },
                RateModel {
                    exponent: -1.0,
                    constant: -1.0 / (a * a),
                    log_correction: true,
                    log_power: -3,
                    extension,
                },
                RateModel {
                    exponent: 1.0,
                    constant: a * a,
                    log_correction: true,
                    log_power: 2,
                    extension,
                },
            )
        } else {
            let c2 = rate1.constant;
            let e = 1.0 - 2.0 / qd;
            (
                RateModel {
                    exponent: e,
                    constant: 1.0 / (qd * c2 * c2),
                    log_correction: false,
                    log_power: 0,
                    extension,
                },
                RateModel {
                    exponent: e,
                    constant: -(qd - 1.0) / (qd * c2 * c2),
                    log_correction: false,
                    log_power: 0,
                    extension,
                },
                RateModel {
                    exponent: 2.0 / qd - 1.0,
                    constant: c2 * c2 / (2.0 / qd - 1.0),
                    log_correction: false,
                    log_power: 0,
                    extension,
                },
            )
        };
        return Ok(RegularityVerdict {
            outcome: Outcome::FiniteTimeBlowup {
                t_star: map.t_star,
                max_rate,
                min_rate,
                time_rate_constant: if rate1.log_correction {
                    2.0 * rate1.constant * rate1.constant
                } else {
                    t_law.constant
                },
                t_law,
            },
            governing,
            m0: profile.m0,
            eta_star: profile.eta_star,
            notes,
        });
    }

    // global existence
    let governing = if smooth { Governing::Thm3_2 } else { Governing::Remark3_3 };
    let order = if !orders.is_empty() {
        GlobalOrder::ZeroOrder(*orders.iter().min().unwrap())
    } else {
        GlobalOrder::Exponent(qd)
    };
    let c2 = asymptotic_rates(profile, 1)?.constant;
    let (limit_max, limit_off) = if (qd - 2.0).abs() < 1e-12 {
        let l = 1.0 / (2.0 * c2 * c2);
        (l, -l)
    } else {
        (0.0, 0.0)
    };
    if !smooth && (qd - 2.0).abs() < 1e-12 {
        notes.push("q = 2 is the threshold exponent: non-trivial steady state".into());
    }
    Ok(RegularityVerdict {
        outcome: Outcome::Global {
            order,
            limit_max,
            limit_off,
        },
        governing,
        m0: profile.m0,
        eta_star: profile.eta_star,
        notes,
    })
}

/// One fitted-versus-predicted line of the verification report.
#[derive(Debug, Clone, Serialize)]
pub struct RateFit {
    pub quantity: String,
    pub fitted_exponent: Option<f64>,
    pub predicted_exponent: Option<f64>,
    pub fitted_constant: f64,
    pub predicted_constant: f64,
    pub rel_err_constant: f64,
    pub rel_err_exponent: Option<f64>,
    pub log_corrected: bool,
    pub extension: bool,
    /// for pinned-limit checks: max |quantity - limit| over the window
    pub max_abs_deviation: Option<f64>,
}

#[derive(Debug, Clone, Serialize)]
pub struct RateReport {
    pub window: (f64, f64),
    pub samples: usize,
    pub entries: Vec<RateFit>,
}

impl RateReport {
    pub fn entry(&self, quantity: &str) -> Option<&RateFit> {
        self.entries.iter().find(|e| e.quantity == quantity)
    }
}

/// Fit the computed kernels and trajectory extrema over a gap window
/// (delta_lo, delta_hi), delta = eta_star - eta, against the verdict's
/// predicted laws.
pub fn verify_rates(
    verdict: &RegularityVerdict,
    map: &EtaTimeMap,
    window: (f64, f64),
) -> Result<RateReport> {
    let (lo, hi) = window;
    let eta_star = map.eta_star;
    if !(lo > 0.0) || !(hi > lo) || !eta_star.is_finite() || hi >= eta_star {
        return Err(Error::InsufficientAsymptoticDepth { lo, hi });
    }
    let n = 17;
    let deltas: Vec<f64> = (0..n)
        .map(|i| lo * (hi / lo).powf(i as f64 / (n - 1) as f64))
        .collect();

    struct Point {
        delta: f64,
        kbar0: f64,
        kbar1: f64,
        max: f64,
        min: f64,
    }
    let profile = map.profile();
    let points: Vec<Point> = deltas
        .par_iter()
        .map(|&delta| -> Result<Point> {
            let eval = SliceEval::at_eta(map, eta_star - delta, delta)?;
            let max = profile
                .maximizers
                .iter()
                .map(|m| eval.ux(m.alpha_bar))
                .fold(f64::NEG_INFINITY, f64::max);
            let min = crate::initial_data::minimizer_labels(map.datum())
                .iter()
                .map(|&a| eval.ux(a))
                .fold(f64::INFINITY, f64::min);
            let kbar1 = eval.kbar0 + (eta_star - delta) * eval.dkbar0;
            Ok(Point {
                delta,
                kbar0: eval.kbar0,
                kbar1,
                max,
                min,
            })
        })
        .collect::<Result<Vec<_>>>()?;

    let mut entries = Vec::new();
    let rate1 = asymptotic_rates(profile, 1)?;
    let rate2 = asymptotic_rates(profile, 2)?;

    // kernel laws
    if rate1.log_correction {
        // kbar0 = a ln(1/d) + c
        let xs: Vec<f64> = points.iter().map(|p| (1.0 / p.delta).ln()).collect();
        let ys: Vec<f64> = points.iter().map(|p| p.kbar0).collect();
        let (slope, _) = linear_fit(&xs, &ys);
        entries.push(RateFit {
            quantity: "kbar0".into(),
            fitted_exponent: None,
            predicted_exponent: None,
            fitted_constant: slope,
            predicted_constant: rate1.constant,
            rel_err_constant: rel_err(slope, rate1.constant),
            rel_err_exponent: None,
            log_corrected: true,
            extension: rate1.extension,
            max_abs_deviation: None,
        });
    } else {
        entries.push(power_fit_entry(
            "kbar0",
            &points.iter().map(|p| (p.delta, p.kbar0)).collect::<Vec<_>>(),
            rate1.exponent,
            rate1.constant,
            rate1.extension,
        ));
    }
    entries.push(power_fit_entry(
        "kbar1",
        &points.iter().map(|p| (p.delta, p.kbar1)).collect::<Vec<_>>(),
        rate2.exponent,
        rate2.constant,
        rate2.extension,
    ));

    match &verdict.outcome {
        Outcome::FiniteTimeBlowup {
            max_rate,
            min_rate,
            t_law,
            t_star,
            ..
        } => {
            if max_rate.log_correction {
                entries.push(log_corrected_fit(
                    "max",
                    &points.iter().map(|p| (p.delta, p.max)).collect::<Vec<_>>(),
                    -1.0,
                    2,
                    max_rate.constant,
                ));
                entries.push(log_corrected_fit(
                    "min",
                    &points.iter().map(|p| (p.delta, -p.min)).collect::<Vec<_>>(),
                    -1.0,
                    3,
                    -min_rate.constant,
                ));
                // t_star - t against d (ln(1/d) + c)^2-type law, offset from
                // the kernel fit intercept
                let a = rate1.constant;
                let c_off = points[0].kbar0 / a - (1.0 / points[0].delta).ln();
                let ratios: Vec<f64> = points
                    .iter()
                    .map(|p| -> Result<f64> {
                        let l = (1.0 / p.delta).ln() + c_off;
                        let denom = p.delta * (l * l + 2.0 * l + 2.0);
                        Ok((t_star - map.t_of_delta(p.delta)?) / denom)
                    })
                    .collect::<Result<Vec<_>>>()?;
                let fitted = ratios.iter().sum::<f64>() / ratios.len() as f64;
                entries.push(RateFit {
                    quantity: "time_to_blowup".into(),
                    fitted_exponent: Some(1.0),
                    predicted_exponent: Some(1.0),
                    fitted_constant: fitted,
                    predicted_constant: t_law.constant,
                    rel_err_constant: rel_err(fitted, t_law.constant),
                    rel_err_exponent: Some(0.0),
                    log_corrected: true,
                    extension: t_law.extension,
                    max_abs_deviation: None,
                });
            } else {
                entries.push(power_fit_entry(
                    "max",
                    &points.iter().map(|p| (p.delta, p.max)).collect::<Vec<_>>(),
                    max_rate.exponent,
                    max_rate.constant,
                    max_rate.extension,
                ));
                entries.push(power_fit_entry(
                    "min",
                    &points.iter().map(|p| (p.delta, -p.min)).collect::<Vec<_>>(),
                    min_rate.exponent,
                    -min_rate.constant,
                    min_rate.extension,
                ));
                let tt: Vec<(f64, f64)> = points
                    .iter()
                    .map(|p| -> Result<(f64, f64)> {
                        Ok((p.delta, t_star - map.t_of_delta(p.delta)?))
                    })
                    .collect::<Result<Vec<_>>>()?;
                entries.push(power_fit_entry(
                    "time_to_blowup",
                    &tt,
                    t_law.exponent,
                    t_law.constant,
                    t_law.extension,
                ));
            }
        }
        Outcome::Global {
            order,
            limit_max,
            limit_off,
        } => {
            let threshold = matches!(order, GlobalOrder::ZeroOrder(1))
                || matches!(order, GlobalOrder::Exponent(q) if (*q - 2.0).abs() < 1e-12);
            if threshold {
                let dev_max = points
                    .iter()
                    .map(|p| (p.max - limit_max).abs())
                    .fold(0.0, f64::max);
                let dev_min = points
                    .iter()
                    .map(|p| (p.min - limit_off).abs())
                    .fold(0.0, f64::max);
                entries.push(RateFit {
                    quantity: "max".into(),
                    fitted_exponent: None,
                    predicted_exponent: Some(0.0),
                    fitted_constant: *limit_max,
                    predicted_constant: *limit_max,
                    rel_err_constant: 0.0,
                    rel_err_exponent: None,
                    log_corrected: false,
                    extension: false,
                    max_abs_deviation: Some(dev_max),
                });
                entries.push(RateFit {
                    quantity: "min".into(),
                    fitted_exponent: None,
                    predicted_exponent: Some(0.0),
                    fitted_constant: *limit_off,
                    predicted_constant: *limit_off,
                    rel_err_constant: 0.0,
                    rel_err_exponent: None,
                    log_corrected: false,
                    extension: false,
                    max_abs_deviation: Some(dev_min),
                });
            } else {
                // decay toward zero with exponent (q-2)/q
                let qd = profile.dominant_exponent().unwrap();
                let c2 = rate1.constant;
                entries.push(power_fit_entry(
                    "max",
                    &points.iter().map(|p| (p.delta, p.max)).collect::<Vec<_>>(),
                    (qd - 2.0) / qd,
                    1.0 / (qd * c2 * c2),
                    rate1.extension,
                ));
                entries.push(power_fit_entry(
                    "min",
                    &points.iter().map(|p| (p.delta, -p.min)).collect::<Vec<_>>(),
                    (qd - 2.0) / qd,
                    (qd - 1.0) / (qd * c2 * c2),
                    rate1.extension,
                ));
            }
        }
    }

    Ok(RateReport {
        window,
        samples: n,
        entries,
    })
}

fn rel_err(got: f64, want: f64) -> f64 {
    if want == 0.0 {
        got.abs()
    } else {
        ((got - want) / want).abs()
    }
}

fn linear_fit(xs: &[f64], ys: &[f64]) -> (f64, f64) {
    let n = xs.len() as f64;
    let sx: f64 = xs.iter().sum();
    let sy: f64 = ys.iter().sum();
    let sxx: f64 = xs.iter().map(|x| x * x).sum();
    let sxy: f64 = xs.iter().zip(ys).map(|(x, y)| x * y).sum();
    let slope = (n * sxy - sx * sy) / (n * sxx - sx * sx);
    let intercept = (sy - slope * sx) / n;
    (slope, intercept)
}

fn power_fit_entry(
    quantity: &str,
    pts: &[(f64, f64)],
    pred_exponent: f64,
    pred_constant: f64,
    extension: bool,
) -> RateFit {
    let xs: Vec<f64> = pts.iter().map(|(d, _)| d.ln()).collect();
    let ys: Vec<f64> = pts.iter().map(|(_, v)| v.abs().max(1e-300).ln()).collect();
    let (slope, intercept) = linear_fit(&xs, &ys);
    let fitted_constant = intercept.exp();
    RateFit {
        quantity: quantity.into(),
        fitted_exponent: Some(slope),
        predicted_exponent: Some(pred_exponent),
        fitted_constant,
        predicted_constant: pred_constant,
        rel_err_constant: rel_err(fitted_constant, pred_constant),
        rel_err_exponent: Some(rel_err(slope, pred_exponent)),
        log_corrected: false,
        extension,
        max_abs_deviation: None,
    }
}

/// Fit v = C d^e |ln d|^p with the log offset free:
/// minimize over c0 the residual of ln v - e ln d - p ln(ln(1/d) + c0).
fn log_corrected_fit(
    quantity: &str,
    pts: &[(f64, f64)],
    exponent: f64,
    log_power: i32,
    pred_constant: f64,
) -> RateFit {
    let score = |c0: f64| -> (f64, f64) {
        let mut resid: Vec<f64> = Vec::with_capacity(pts.len());
        for &(d, v) in pts {
            let l = (1.0 / d).ln() + c0;
            if l <= 0.0 || v <= 0.0 {
                return (f64::INFINITY, 0.0);
            }
            resid.push(v.ln() - exponent * d.ln() + log_power as f64 * l.ln());
        }
        let mean = resid.iter().sum::<f64>() / resid.len() as f64;
        let sse = resid.iter().map(|r| (r - mean) * (r - mean)).sum::<f64>();
        (sse, mean)
    };
    // golden-section over the offset
    let phi = 0.618_033_988_749_895;
    let (mut a, mut b) = (-5.0, 30.0);
    let mut x1 = b - phi * (b - a);
    let mut x2 = a + phi * (b - a);
    let (mut f1, mut f2) = (score(x1).0, score(x2).0);
    for _ in 0..120 {
        if (b - a).abs() < 1e-10 {
            break;
        }
        if f1 < f2 {
            b = x2;
            x2 = x1;
            f2 = f1;
            x1 = b - phi * (b - a);
            f1 = score(x1).0;
        } else {
            a = x1;
            x1 = x2;
            f1 = f2;
            x2 = a + phi * (b - a);
            f2 = score(x2).0;
        }
    }
    let c0 = 0.5 * (a + b);
    let fitted_constant = score(c0).1.exp()
        * if pred_constant < 0.0 { -1.0 } else { 1.0 };
    RateFit {
        quantity: quantity.into(),
        fitted_exponent: Some(exponent),
        predicted_exponent: Some(exponent),
        fitted_constant,
        predicted_constant: pred_constant,
        rel_err_constant: rel_err(fitted_constant, pred_constant),
        rel_err_exponent: Some(0.0),
        log_corrected: true,
        extension: false,
        max_abs_deviation: None,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::initial_data::{critical_profile, DatumForm};

    fn datum_example1() -> InitialDatum {
        InitialDatum::new(
            DatumForm::Polynomial {
                coefficients: vec![0.0, 0.5, -1.5, 1.0],
            },
            BoundaryCondition::Dirichlet,
        )
    }

    fn datum_example2() -> InitialDatum {
        InitialDatum::new(
            DatumForm::TrigPolynomial {
                constant: 0.0,
                sin: vec![1.0 / (2.0 * std::f64::consts::PI)],
                cos: vec![],
            },
            BoundaryCondition::Periodic,
        )
    }

    #[test]
    fn example1_blows_up() {
        let d = datum_example1();
        let p = critical_profile(&d, 1e-9).unwrap();
        let v = classify(&d, &p).unwrap();
        assert_eq!(v.governing, Governing::Thm3_1);
        assert!(v.is_blowup());
        let t = v.t_star();
        assert!(t > 2.70 && t < 2.90, "t_star = {t}");
        if let Outcome::FiniteTimeBlowup {
            max_rate,
            time_rate_constant,
            ..
        } = &v.outcome
        {
            // kernel log coefficient a = 1/3 summed over both endpoints
            assert!((max_rate.constant - 9.0).abs() < 1e-6);
            assert!((time_rate_constant - 2.0 / 9.0).abs() < 1e-9);
        }
    }

    #[test]
    fn example2_global_with_unit_limits() {
        let d = datum_example2();
        let p = critical_profile(&d, 1e-9).unwrap();
        let v = classify(&d, &p).unwrap();
        assert_eq!(v.governing, Governing::Thm3_2);
        match v.outcome {
            Outcome::Global {
                order,
                limit_max,
                limit_off,
            } => {
                assert_eq!(order, GlobalOrder::ZeroOrder(1));
                assert!((limit_max - 1.0).abs() < 1e-6, "limit = {limit_max}");
                assert!((limit_off + 1.0).abs() < 1e-6);
            }
            _ => panic!("expected global verdict"),
        }
    }

    #[test]
    fn zero_datum_outside_hypotheses() {
        let d = InitialDatum::new(
            DatumForm::Polynomial { coefficients: vec![] },
            BoundaryCondition::Dirichlet,
        );
        let p = critical_profile(&d, 1e-9).unwrap();
        let v = classify(&d, &p).unwrap();
        assert_eq!(v.governing, Governing::OutsideHypotheses);
        assert!(!v.is_blowup());
    }

    #[test]
    fn childress_quadratic_blows_up() {
        let d = InitialDatum::new(
            DatumForm::Polynomial {
                coefficients: vec![0.0, 1.0, -1.0],
            },
            BoundaryCondition::Dirichlet,
        );
        let p = critical_profile(&d, 1e-9).unwrap();
        let v = classify(&d, &p).unwrap();
        assert_eq!(v.governing, Governing::Thm3_1);
        assert!(v.is_blowup());
        assert!(v.t_star().is_finite());
    }

    #[test]
    fn fractional_exponent_verdicts() {
        // u0' = 1 + c1 |a - 1/2|^q with c1 chosen for Dirichlet endpoints
        let power = |q: f64| {
            let c1 = -(q + 1.0) / (2.0 * 0.5_f64.powf(q + 1.0));
            InitialDatum::new(
                DatumForm::PowerProfile {
                    anchor: 0.5,
                    peak: 1.0,
                    coefficient: c1,
                    exponent: q,
                    background: vec![],
                },
                BoundaryCondition::Dirichlet,
            )
        };
        let blow = power(1.5);
        blow.validate().unwrap();
        let p = critical_profile(&blow, 1e-9).unwrap();
        let v = classify(&blow, &p).unwrap();
        assert_eq!(v.governing, Governing::Remark3_3);
        assert!(v.is_blowup(), "q = 1.5 must blow up");

        let threshold = power(2.0);
        let p = critical_profile(&threshold, 1e-9).unwrap();
        let v = classify(&threshold, &p).unwrap();
        assert_eq!(v.governing, Governing::Remark3_3);
        assert!(!v.is_blowup(), "q = 2 is global");
        if let Outcome::Global { limit_max, .. } = v.outcome {
            assert!(limit_max > 0.0, "threshold keeps a non-trivial steady state");
        }

        let decay = power(3.0);
        let p = critical_profile(&decay, 1e-9).unwrap();
        let v = classify(&decay, &p).unwrap();
        assert!(!v.is_blowup());
        if let Outcome::Global { limit_max, .. } = v.outcome {
            assert_eq!(limit_max, 0.0);
        }
    }

    #[test]
    fn verify_rates_example2_stationary() {
        let d = datum_example2();
        let p = critical_profile(&d, 1e-9).unwrap();
        let v = classify(&d, &p).unwrap();
        let map = crate::time_map::build_map(&d, &p, 1e-11, 1e-10).unwrap();
        let rep = verify_rates(&v, &map, (1e-8, 1e-4)).unwrap();
        let k0 = rep.entry("kbar0").unwrap();
        assert!(k0.rel_err_exponent.unwrap() < 0.02, "{:?}", k0);
        assert!(k0.rel_err_constant < 0.01, "{:?}", k0);
        let mx = rep.entry("max").unwrap();
        assert!(mx.max_abs_deviation.unwrap() < 1e-6, "{:?}", mx);
    }

    #[test]
    fn verdicts_agree_with_direct_evaluation() {
        // blowup verdicts must show the trajectory maximum passing 1e3
        // before t_star, global verdicts must stay bounded out to t = 50
        let d = datum_example1();
        let p = critical_profile(&d, 1e-9).unwrap();
        let v = classify(&d, &p).unwrap();
        assert!(v.is_blowup());
        let map = crate::time_map::build_map(&d, &p, 1e-10, 1e-8).unwrap();
        let delta = 1e-5;
        let eval = SliceEval::at_eta(&map, p.eta_star - delta, delta).unwrap();
        let t_probe = map.t_of_delta(delta).unwrap();
        assert!(t_probe < v.t_star() * 1.01);
        let (max, _) = crate::lagrangian::grid_scan(&eval, 1025);
        assert!(max > 1e3, "grid max = {max} at t = {t_probe}");

        let d = datum_example2();
        let p = critical_profile(&d, 1e-9).unwrap();
        let v = classify(&d, &p).unwrap();
        assert!(!v.is_blowup());
        let map = crate::time_map::build_map(&d, &p, 1e-11, 1e-10).unwrap();
        let eval = SliceEval::at_time(&map, 50.0).unwrap();
        let (max, min) = crate::lagrangian::grid_scan(&eval, 1025);
        assert!(max <= 1.0 + 1e-6 && min >= -1.0 - 1e-6, "({max}, {min})");
    }

    #[test]
    fn shallow_window_rejected() {
        let d = datum_example2();
        let p = critical_profile(&d, 1e-9).unwrap();
        let v = classify(&d, &p).unwrap();
        let map = crate::time_map::build_map(&d, &p, 1e-10, 1e-8).unwrap();
        assert!(matches!(
            verify_rates(&v, &map, (1e-4, 2.0)),
            Err(Error::InsufficientAsymptoticDepth { .. })
        ));
    }
}
