//! Initial data with closed-form derivatives, boundary-condition checks,
//! and extraction of the critical slope profile (the maximizers of u0',
//! their local order/exponent, and the leading expansion coefficient).

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Absolute tolerance on endpoint residuals for boundary-condition checks.
pub const BC_TOL: f64 = 1e-12;
/// Scale-aware vanishing threshold for derivative order detection.
pub const ORDER_TOL: f64 = 1e-9;
/// Maximizers closer than this are merged after polishing.
pub const DEDUP_TOL: f64 = 1e-7;
/// Cap on the number of distinct maximizers.
pub const MAX_MAXIMIZERS: usize = 16;

const SCAN_POINTS: usize = 4097;
const MAX_ORDER_SCAN: u32 = 14;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum BoundaryCondition {
    Periodic,
    Dirichlet,
}

/// Functional form of the datum. All forms admit exact derivatives; the
/// power profile is exact away from its anchor and one-sided there.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "form", rename_all = "lowercase")]
pub enum DatumForm {
    /// u0(a) = sum_i coefficients[i] * a^i
    Polynomial { coefficients: Vec<f64> },
    /// u0(a) = constant + sum_j sin[j-1]*sin(2*pi*j*a) + cos[j-1]*cos(2*pi*j*a)
    #[serde(rename = "trig")]
    TrigPolynomial {
        #[serde(default)]
        constant: f64,
        #[serde(default)]
        sin: Vec<f64>,
        #[serde(default)]
        cos: Vec<f64>,
    },
    /// u0'(a) = peak + coefficient*|a - anchor|^exponent + background(a),
    /// with background a polynomial in a (coefficients ascending).
    #[serde(rename = "power")]
    PowerProfile {
        anchor: f64,
        peak: f64,
        coefficient: f64,
        exponent: f64,
        #[serde(default)]
        background: Vec<f64>,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InitialDatum {
    #[serde(flatten)]
    pub form: DatumForm,
    pub bc: BoundaryCondition,
}

/// Local type of a slope maximizer.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum MaximizerKind {
    /// Boundary point with non-vanishing u0''; local model M0 + C1*|a - abar|.
    BoundaryLinear,
    /// Zero of u0'' of odd order k; local model M0 + C1*|a - abar|^(k+1).
    InteriorOrder(u32),
    /// Non-smooth (or one-sided even-order) profile M0 + C1*|a - abar|^q.
    Fractional(f64),
}

impl MaximizerKind {
    /// Exponent q of the local model M0 + C1*|a - abar|^q.
    pub fn exponent_q(&self) -> f64 {
        match self {
            MaximizerKind::BoundaryLinear => 1.0,
            MaximizerKind::InteriorOrder(k) => (*k + 1) as f64,
            MaximizerKind::Fractional(q) => *q,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Maximizer {
    pub alpha_bar: f64,
    pub kind: MaximizerKind,
    /// Leading (negative) coefficient of the local model.
    pub c1: f64,
    /// Radius within which the local model tracks u0' to 10% relative error.
    pub radius: f64,
}

impl Maximizer {
    /// Boundary maximizers contribute a one-sided neighborhood.
    pub fn is_boundary(&self) -> bool {
        self.alpha_bar < 1e-12 || self.alpha_bar > 1.0 - 1e-12
    }

    /// Weight of this maximizer in summed kernel asymptotics: interior
    /// points count both sides, boundary points one.
    pub fn weight(&self) -> f64 {
        if self.is_boundary() {
            0.5
        } else {
            1.0
        }
    }
}

/// Greatest slope M0, its critical value eta_star = 1/M0, and the
/// classified maximizer list.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CriticalProfile {
    pub m0: f64,
    /// 1/M0, or +inf when M0 <= 0.
    pub eta_star: f64,
    pub maximizers: Vec<Maximizer>,
}

impl CriticalProfile {
    /// Largest local exponent q among maximizers; governs the dominant
    /// kernel divergence. None when there are no isolated maximizers.
    pub fn dominant_exponent(&self) -> Option<f64> {
        self.maximizers
            .iter()
            .map(|m| m.kind.exponent_q())
            .fold(None, |acc, q| Some(acc.map_or(q, |a: f64| a.max(q))))
    }
}

/// Exact derivative of a polynomial given ascending coefficients.
pub(crate) fn poly_deriv(coeffs: &[f64], x: f64, order: u32) -> f64 {
    let n = order as usize;
    if n >= coeffs.len() {
        return 0.0;
    }
    let mut acc = 0.0;
    for i in (n..coeffs.len()).rev() {
        // falling factorial i*(i-1)*...*(i-n+1)
        let mut fac = 1.0;
        for j in 0..n {
            fac *= (i - j) as f64;
        }
        acc = acc * x + coeffs[i] * fac;
    }
    acc
}

fn poly_antideriv_eval(coeffs: &[f64], x: f64) -> f64 {
    let mut acc = 0.0;
    for i in (0..coeffs.len()).rev() {
        acc = acc * x + coeffs[i] / (i + 1) as f64;
    }
    acc * x
}

/// m-th derivative of |s|^q, or None where it does not exist.
fn abs_power_deriv(s: f64, q: f64, m: u32) -> Option<f64> {
    let q_round = q.round();
    let even_integer_q = (q - q_round).abs() < 1e-12 && q_round >= 2.0 && (q_round as i64) % 2 == 0;
    if even_integer_q {
        // |s|^q is the polynomial s^q
        let qi = q_round as u32;
        if m > qi {
            return Some(0.0);
        }
        let mut fac = 1.0;
        for j in 0..m {
            fac *= (qi - j) as f64;
        }
        return Some(fac * s.powi((qi - m) as i32));
    }
    if s == 0.0 {
        if (m as f64) < q {
            return Some(0.0);
        }
        return None;
    }
    let mut fac = 1.0;
    for j in 0..m {
        fac *= q - j as f64;
    }
    let sign = if s < 0.0 && m % 2 == 1 { -1.0 } else { 1.0 };
    Some(fac * sign * s.abs().powf(q - m as f64))
}

impl InitialDatum {
    pub fn new(form: DatumForm, bc: BoundaryCondition) -> Self {
        InitialDatum { form, bc }
    }

    /// Exact derivative of u0 of the given order (order 0 is u0 itself).
    pub fn eval_deriv(&self, alpha: f64, order: u32) -> Result<f64> {
        match &self.form {
            DatumForm::Polynomial { coefficients } => Ok(poly_deriv(coefficients, alpha, order)),
            DatumForm::TrigPolynomial { constant, sin, cos } => {
                let mut acc = if order == 0 { *constant } else { 0.0 };
                for (j, (&sj, &cj)) in sin
                    .iter()
                    .chain(std::iter::repeat(&0.0))
                    .zip(cos.iter().chain(std::iter::repeat(&0.0)))
                    .take(sin.len().max(cos.len()))
                    .enumerate()
                {
                    let w = 2.0 * std::f64::consts::PI * (j + 1) as f64;
                    let arg = w * alpha;
                    let scale = w.powi(order as i32);
                    let (s, c) = (arg.sin(), arg.cos());
                    // d/da rotates (sin, cos) -> (cos, -sin)
                    let (sv, cv) = match order % 4 {
                        0 => (s, c),
                        1 => (c, -s),
                        2 => (-s, -c),
                        _ => (-c, s),
                    };
                    acc += scale * (sj * sv + cj * cv);
                }
                Ok(acc)
            }
            DatumForm::PowerProfile {
                anchor,
                peak,
                coefficient,
                exponent,
                background,
            } => {
                let s = alpha - anchor;
                if order == 0 {
                    // integral of the slope profile from 0, so u0(0) = 0
                    let phi = (s.abs().powf(*exponent) * s
                        + anchor.abs().powf(*exponent) * anchor)
                        / (exponent + 1.0);
                    return Ok(peak * alpha + coefficient * phi + poly_antideriv_eval(background, alpha));
                }
                let m = order - 1; // derivative order applied to u0'
                let peak_term = if m == 0 { *peak } else { 0.0 };
                let prof = abs_power_deriv(s, *exponent, m).ok_or(Error::DerivativeUnavailable {
                    alpha,
                    order,
                })?;
                Ok(peak_term + coefficient * prof + poly_deriv(background, alpha, m))
            }
        }
    }

    /// u0'(alpha); panics only if the derivative is unavailable (power
    /// profiles always admit the first derivative).
    pub fn slope(&self, alpha: f64) -> f64 {
        self.eval_deriv(alpha, 1)
            .expect("first derivative is defined for every stored form")
    }

    /// Check the endpoint conditions for the stored boundary-condition tag.
    pub fn validate(&self) -> Result<&Self> {
        let u0 = |a: f64| self.eval_deriv(a, 0).unwrap();
        match self.bc {
            BoundaryCondition::Dirichlet => {
                let (r0, r1) = (u0(0.0), u0(1.0));
                if r0.abs() > BC_TOL || r1.abs() > BC_TOL {
                    return Err(Error::BcViolation {
                        detail: format!(
                            "Dirichlet requires u0(0) = u0(1) = 0; residuals u0(0) = {r0:e}, u0(1) = {r1:e}"
                        ),
                    });
                }
            }
            BoundaryCondition::Periodic => {
                let dv = u0(1.0) - u0(0.0);
                let ds = self.slope(1.0) - self.slope(0.0);
                if dv.abs() > BC_TOL || ds.abs() > BC_TOL {
                    return Err(Error::BcViolation {
                        detail: format!(
                            "periodicity requires matching endpoint values and slopes; u0(1)-u0(0) = {dv:e}, u0'(1)-u0'(0) = {ds:e}"
                        ),
                    });
                }
            }
        }
        Ok(self)
    }

    /// True when u0(a) = -u0(1-a), the symmetry that pins the flow anchor
    /// for periodic data.
    pub fn is_odd_symmetric(&self) -> bool {
        let scale = (0..=16)
            .map(|i| self.eval_deriv(i as f64 / 16.0, 0).unwrap().abs())
            .fold(1.0_f64, f64::max);
        (0..=16).all(|i| {
            let a = i as f64 / 16.0;
            let u = self.eval_deriv(a, 0).unwrap();
            let v = self.eval_deriv(1.0 - a, 0).unwrap();
            (u + v).abs() <= 1e-10 * scale
        })
    }
}

/// Locations where u0' attains its least value (used for the infimum
/// trajectory). Same scan-and-polish machinery as `critical_profile`.
pub fn minimizer_labels(datum: &InitialDatum) -> Vec<f64> {
    extremizer_candidates(datum, false)
        .into_iter()
        .map(|(a, _)| a)
        .collect()
}

/// Scan-and-polish extremizers of u0' (maximize = true) or -u0'.
/// Returns (alpha, u0'(alpha)) for every global extremizer within tolerance.
fn extremizer_candidates(datum: &InitialDatum, maximize: bool) -> Vec<(f64, f64)> {
    let sgn = if maximize { 1.0 } else { -1.0 };
    let f = |a: f64| sgn * datum.slope(a);
    let n = SCAN_POINTS - 1;
    let vals: Vec<f64> = (0..SCAN_POINTS).map(|i| f(i as f64 / n as f64)).collect();
    let grid_max = vals.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let grid_min = vals.iter().cloned().fold(f64::INFINITY, f64::min);
    let scale = grid_max.abs().max(grid_min.abs()).max(1.0);

    // degenerate constant slope: no isolated extremizers
    if grid_max - grid_min < 1e-14 * scale {
        return Vec::new();
    }

    let keep_tol = ORDER_TOL * scale;
    let mut cands: Vec<f64> = Vec::new();
    // endpoints always compete
    cands.push(0.0);
    cands.push(1.0);
    // anchor of a power profile is a kink; polishing would misbehave there
    if let DatumForm::PowerProfile { anchor, .. } = &datum.form {
        cands.push(*anchor);
    }
    // cluster grid-level local maxima: flat-topped peaks tie across many
    // cells at machine precision, and must be polished as one bracket
    let mut i = 1;
    while i < n {
        if vals[i] >= vals[i - 1] && vals[i] >= vals[i + 1] && vals[i] > grid_max - scale * 1e-3 {
            let mut last = i;
            let mut j = i + 1;
            while j < n {
                if vals[j] >= vals[j - 1] && vals[j] >= vals[j + 1] && j - last <= 2 {
                    last = j;
                }
                if j - last > 2 {
                    break;
                }
                j += 1;
            }
            let lo = (i - 1) as f64 / n as f64;
            let hi = (last + 1) as f64 / n as f64;
            cands.push(polish_interior_max(datum, lo, hi, sgn));
            i = last + 1;
        }
        i += 1;
    }

    let best = cands
        .iter()
        .map(|&a| f(a))
        .fold(f64::NEG_INFINITY, f64::max);
    let mut kept: Vec<f64> = cands.into_iter().filter(|&a| f(a) >= best - keep_tol).collect();
    kept.sort_by(f64::total_cmp);
    kept.dedup_by(|b, a| (*b - *a).abs() < DEDUP_TOL);

    // merge plateau ties: when u0' never dips between two nearby
    // candidates they are one flat maximizer seen through grid noise;
    // re-polish the merged bracket with the derivative cascade
    let merge_tol = 1e-11 * scale;
    let h = 2.0 / n as f64;
    let dips_between = |a: f64, b: f64| -> bool {
        (1..32).any(|i| f(a + (b - a) * i as f64 / 32.0) < best - merge_tol)
    };
    let mut merged: Vec<f64> = Vec::new();
    let mut i = 0;
    while i < kept.len() {
        let mut j = i;
        while j + 1 < kept.len()
            && kept[j + 1] - kept[j] < 0.05
            && !dips_between(kept[j], kept[j + 1])
        {
            j += 1;
        }
        if j > i {
            let lo = (kept[i] - h).max(0.0);
            let hi = (kept[j] + h).min(1.0);
            merged.push(polish_interior_max(datum, lo, hi, sgn));
        } else {
            merged.push(kept[i]);
        }
        i = j + 1;
    }
    merged.into_iter().map(|a| (a, datum.slope(a))).collect()
}

/// Polish an interior extremum of sgn*u0' in [lo, hi]. An extremum of
/// order k is a flat zero of u0'' but a simple zero of u0^(k+2), so the
/// location sharpens by cascading bisections through the even derivative
/// orders (odd orders keep their sign across a symmetric extremum). Each
/// refinement must not lower the attained value, which rejects accidental
/// roots of higher derivatives elsewhere in the bracket. Golden-section
/// is the fallback for kinks.
fn polish_interior_max(datum: &InitialDatum, lo: f64, hi: f64, sgn: f64) -> f64 {
    let dj = |a: f64, j: u32| datum.eval_deriv(a, j).map(|v| sgn * v);
    let value = |a: f64| sgn * datum.slope(a);
    let bisect = |j: u32, mut a: f64, mut b: f64| -> f64 {
        for _ in 0..120 {
            let mid = 0.5 * (a + b);
            match dj(mid, j) {
                Ok(v) if v > 0.0 => a = mid,
                Ok(_) => b = mid,
                Err(_) => break,
            }
            if b - a < 1e-16 {
                break;
            }
        }
        0.5 * (a + b)
    };

    let has_drop = |j: u32, a: f64, b: f64| -> bool {
        matches!(
            (dj(a, j), dj(b, j)),
            (Ok(va), Ok(vb)) if va.is_finite() && vb.is_finite() && va > 0.0 && vb < 0.0
        )
    };

    if has_drop(2, lo, hi) {
        let mut x = bisect(2, lo, hi);
        let guard = 1e-12 * value(x).abs().max(1.0);
        let radius = hi - lo;
        let mut j = 4;
        while j <= MAX_ORDER_SCAN {
            let (wl, wr) = ((x - radius).max(lo), (x + radius).min(hi));
            if has_drop(j, wl, wr) {
                let y = bisect(j, wl, wr);
                if value(y) >= value(x) - guard {
                    x = y;
                }
            }
            j += 2;
        }
        return x;
    }
    // golden-section on sgn*u0'
    let phi = 0.618_033_988_749_895;
    let f = |a: f64| sgn * datum.slope(a);
    let (mut a, mut b) = (lo, hi);
    let mut x1 = b - phi * (b - a);
    let mut x2 = a + phi * (b - a);
    let (mut f1, mut f2) = (f(x1), f(x2));
    for _ in 0..200 {
        if b - a < 1e-14 {
            break;
        }
        if f1 > f2 {
            b = x2;
            x2 = x1;
            f2 = f1;
            x1 = b - phi * (b - a);
            f1 = f(x1);
        } else {
            a = x1;
            x1 = x2;
            f1 = f2;
            x2 = a + phi * (b - a);
            f2 = f(x2);
        }
    }
    0.5 * (a + b)
}

/// Extract M0, eta_star, and the classified maximizer list. `tol` bounds
/// how far below the true maximum a listed maximizer may sit.
pub fn critical_profile(datum: &InitialDatum, tol: f64) -> Result<CriticalProfile> {
    let cands = extremizer_candidates(datum, true);
    if cands.is_empty() {
        // constant slope
        let m0 = datum.slope(0.5);
        let eta_star = if m0 > 0.0 { 1.0 / m0 } else { f64::INFINITY };
        return Ok(CriticalProfile {
            m0,
            eta_star,
            maximizers: Vec::new(),
        });
    }
    let m0 = cands.iter().map(|&(_, v)| v).fold(f64::NEG_INFINITY, f64::max);
    let kept: Vec<f64> = cands
        .into_iter()
        .filter(|&(_, v)| v >= m0 - tol.max(ORDER_TOL))
        .map(|(a, _)| a)
        .collect();
    if kept.len() > MAX_MAXIMIZERS {
        return Err(Error::TooManyMaximizers { cap: MAX_MAXIMIZERS });
    }
    let eta_star = if m0 > 0.0 { 1.0 / m0 } else { f64::INFINITY };

    let mut maximizers = Vec::with_capacity(kept.len());
    for (idx, &abar) in kept.iter().enumerate() {
        let gap_left = if idx > 0 { 0.5 * (abar - kept[idx - 1]) } else { abar.max(1.0) };
        let gap_right = if idx + 1 < kept.len() {
            0.5 * (kept[idx + 1] - abar)
        } else {
            (1.0 - abar).max(1.0)
        };
        if m0 <= 0.0 {
            // outside the M0 > 0 hypothesis; kinds are not meaningful
            maximizers.push(Maximizer {
                alpha_bar: abar,
                kind: MaximizerKind::Fractional(f64::INFINITY),
                c1: 0.0,
                radius: 0.0,
            });
            continue;
        }
        let (kind, c1) = classify_maximizer(datum, abar, m0)?;
        let radius = fit_radius(datum, abar, m0, c1, kind.exponent_q(), gap_left, gap_right);
        maximizers.push(Maximizer {
            alpha_bar: abar,
            kind,
            c1,
            radius,
        });
    }

    Ok(CriticalProfile {
        m0,
        eta_star,
        maximizers,
    })
}

fn classify_maximizer(datum: &InitialDatum, abar: f64, m0: f64) -> Result<(MaximizerKind, f64)> {
    let at_left = abar < 1e-12;
    let at_right = abar > 1.0 - 1e-12;

    // power-profile anchor carries its exponent explicitly
    if let DatumForm::PowerProfile {
        anchor,
        coefficient,
        exponent,
        ..
    } = &datum.form
    {
        if (abar - anchor).abs() < DEDUP_TOL {
            // the anchored exponent is the datum's own statement of its
            // local regime, including integer q
            return Ok((MaximizerKind::Fractional(*exponent), *coefficient));
        }
    }

    // derivative scan: the leading derivative u0^(j)(abar) is the first
    // one that is non-negligible on its own scale, with every lower one
    // negligible relative to it (higher trig derivatives grow like
    // (2 pi m)^j, so a global scale would drown the true lead)
    let derivs: Vec<f64> = (2..=MAX_ORDER_SCAN)
        .map(|j| datum.eval_deriv(abar, j).unwrap_or(f64::NAN))
        .collect();
    let mut first = None;
    'scan: for (idx, &dj) in derivs.iter().enumerate() {
        if !dj.is_finite() {
            break;
        }
        let scale = dj.abs().max(1.0);
        if dj.abs() <= ORDER_TOL * scale {
            continue;
        }
        for &di in &derivs[..idx] {
            if !(di.abs() < ORDER_TOL * scale) {
                continue 'scan;
            }
        }
        first = Some(idx as u32 + 2);
        break;
    }

    let j = first.ok_or(Error::FlatMaximizer {
        alpha: abar,
        order: MAX_ORDER_SCAN,
    })?;
    let dj = derivs[(j - 2) as usize];

    if j == 2 && (at_left || at_right) {
        // boundary point with non-vanishing u0''
        let c1 = if at_left { dj } else { -dj };
        if c1 >= 0.0 {
            return Err(Error::InternalInconsistency {
                detail: format!(
                    "boundary maximizer at alpha = {abar} has slope increasing into the domain (c1 = {c1})"
                ),
            });
        }
        return Ok((MaximizerKind::BoundaryLinear, c1));
    }
    if j == 2 {
        return Err(Error::InternalInconsistency {
            detail: format!(
                "interior maximizer at alpha = {abar} reports u0'' = {dj} != 0; M0 = {m0}"
            ),
        });
    }

    // local exponent q = j - 1, order of the u0'' zero k = j - 2
    let q = j - 1;
    let k = j - 2;
    let fac = (1..=q).fold(1.0, |acc, i| acc * i as f64); // (j-1)!
    let sign_flip = if at_right && q % 2 == 1 { -1.0 } else { 1.0 };
    let c1 = sign_flip * dj / fac;
    if c1 >= 0.0 {
        return Err(Error::InternalInconsistency {
            detail: format!(
                "maximizer at alpha = {abar}: leading coefficient {c1} is not negative"
            ),
        });
    }
    if !(at_left || at_right) && k % 2 == 0 {
        return Err(Error::InternalInconsistency {
            detail: format!(
                "interior maximizer at alpha = {abar} detected with even order k = {k}"
            ),
        });
    }
    if k % 2 == 1 {
        Ok((MaximizerKind::InteriorOrder(k), c1))
    } else {
        // one-sided boundary contact of even order
        Ok((MaximizerKind::Fractional(q as f64), c1))
    }
}

/// Largest radius (from a halving ladder) on which the local model
/// M0 + C1*|s|^q reproduces u0' within 10% of the local deviation.
fn fit_radius(
    datum: &InitialDatum,
    abar: f64,
    m0: f64,
    c1: f64,
    q: f64,
    gap_left: f64,
    gap_right: f64,
) -> f64 {
    let cap_left = abar.min(gap_left);
    let cap_right = (1.0 - abar).min(gap_right);
    let mut r = cap_left.max(cap_right).min(0.5);
    while r > 1e-6 {
        let ok = (1..=8).all(|i| {
            let s = r * i as f64 / 8.0;
            let mut pass = true;
            for side in [-1.0, 1.0] {
                let cap = if side < 0.0 { cap_left } else { cap_right };
                if s > cap {
                    continue;
                }
                let a = abar + side * s;
                let model = m0 + c1 * s.powf(q);
                let actual = datum.slope(a);
                let dev = (c1 * s.powf(q)).abs();
                // the 1e-12 guard keeps roundoff from sinking flat profiles
                if (actual - model).abs() > 0.1 * dev + 1e-12 {
                    pass = false;
                }
            }
            pass
        });
        if ok {
            return r;
        }
        r *= 0.5;
    }
    r.max(1e-6)
}

#[cfg(test)]
mod tests {
    use super::*;

    pub fn example1() -> InitialDatum {
        // u0 = a(a-1)(a-1/2) = a^3 - 1.5 a^2 + 0.5 a
        InitialDatum::new(
            DatumForm::Polynomial {
                coefficients: vec![0.0, 0.5, -1.5, 1.0],
            },
            BoundaryCondition::Dirichlet,
        )
    }

    pub fn example2() -> InitialDatum {
        // u0 = sin(2 pi a) / (2 pi)
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
    fn cubic_slope_at_zero() {
        let d = example1();
        assert!((d.slope(0.0) - 0.5).abs() < 1e-15);
        assert!((d.slope(1.0) - 0.5).abs() < 1e-15);
        assert!((d.slope(0.5) + 0.25).abs() < 1e-15);
        assert!((d.eval_deriv(0.0, 2).unwrap() + 3.0).abs() < 1e-15);
    }

    #[test]
    fn zero_datum_all_derivatives_vanish() {
        let d = InitialDatum::new(
            DatumForm::Polynomial { coefficients: vec![] },
            BoundaryCondition::Dirichlet,
        );
        for order in 0..6 {
            assert_eq!(d.eval_deriv(0.37, order).unwrap(), 0.0);
        }
    }

    #[test]
    fn trig_third_derivative_at_zero() {
        // d^3/da^3 [sin(2 pi a)/(2 pi)] = -(2 pi)^2 cos(2 pi a)
        let d = example2();
        let w = 2.0 * std::f64::consts::PI;
        let got = d.eval_deriv(0.0, 3).unwrap();
        assert!((got + w * w).abs() < 1e-10, "got {got}");
    }

    #[test]
    fn validate_examples() {
        assert!(example1().validate().is_ok());
        assert!(example2().validate().is_ok());
        let bad = InitialDatum::new(
            DatumForm::Polynomial {
                coefficients: vec![0.0, 0.0, 1.0],
            },
            BoundaryCondition::Dirichlet,
        );
        assert!(matches!(bad.validate(), Err(Error::BcViolation { .. })));
    }

    #[test]
    fn profile_example1() {
        let p = critical_profile(&example1(), 1e-9).unwrap();
        assert!((p.m0 - 0.5).abs() < 1e-12);
        assert!((p.eta_star - 2.0).abs() < 1e-12);
        assert_eq!(p.maximizers.len(), 2);
        for m in &p.maximizers {
            assert_eq!(m.kind, MaximizerKind::BoundaryLinear);
            assert!((m.c1 + 3.0).abs() < 1e-9, "c1 = {}", m.c1);
            assert!(m.is_boundary());
        }
        assert!((p.maximizers[0].alpha_bar).abs() < 1e-12);
        assert!((p.maximizers[1].alpha_bar - 1.0).abs() < 1e-12);
    }

    #[test]
    fn profile_example2() {
        let p = critical_profile(&example2(), 1e-9).unwrap();
        assert!((p.m0 - 1.0).abs() < 1e-12);
        assert!((p.eta_star - 1.0).abs() < 1e-12);
        assert_eq!(p.maximizers.len(), 2);
        let two_pi_sq = 2.0 * std::f64::consts::PI * std::f64::consts::PI;
        for m in &p.maximizers {
            assert_eq!(m.kind, MaximizerKind::InteriorOrder(1));
            assert!((m.c1 + two_pi_sq).abs() < 1e-6, "c1 = {}", m.c1);
        }
    }

    #[test]
    fn profile_childress_quadratic() {
        // u0 = a(1-a): single boundary maximizer at 0 with M0 = 1
        let d = InitialDatum::new(
            DatumForm::Polynomial {
                coefficients: vec![0.0, 1.0, -1.0],
            },
            BoundaryCondition::Dirichlet,
        );
        let p = critical_profile(&d, 1e-9).unwrap();
        assert!((p.m0 - 1.0).abs() < 1e-12);
        assert_eq!(p.maximizers.len(), 1);
        assert!(p.maximizers[0].alpha_bar.abs() < 1e-12);
        assert_eq!(p.maximizers[0].kind, MaximizerKind::BoundaryLinear);
        assert!((p.maximizers[0].c1 + 2.0).abs() < 1e-9);
    }

    #[test]
    fn profile_order3_synthetic() {
        // u0' = 1 - 80 (a - 1/2)^4, periodic; zero of u0'' of order 3 at 1/2
        let d = synthetic_order_k(3);
        d.validate().unwrap();
        let p = critical_profile(&d, 1e-9).unwrap();
        assert!((p.m0 - 1.0).abs() < 1e-10);
        assert_eq!(p.maximizers.len(), 1);
        let m = &p.maximizers[0];
        assert!((m.alpha_bar - 0.5).abs() < 1e-9);
        assert_eq!(m.kind, MaximizerKind::InteriorOrder(3));
        assert!((m.c1 + 80.0).abs() < 1e-6, "c1 = {}", m.c1);
    }

    #[test]
    fn profile_power_fractional() {
        let d = InitialDatum::new(
            DatumForm::PowerProfile {
                anchor: 0.5,
                peak: 1.0,
                coefficient: -5.0 * 2.0_f64.sqrt(),
                exponent: 1.5,
                background: vec![],
            },
            BoundaryCondition::Dirichlet,
        );
        d.validate().unwrap();
        let p = critical_profile(&d, 1e-9).unwrap();
        assert_eq!(p.maximizers.len(), 1);
        assert_eq!(p.maximizers[0].kind, MaximizerKind::Fractional(1.5));
        assert!((p.m0 - 1.0).abs() < 1e-12);
    }

    #[test]
    fn maximizer_dominates_dense_grid() {
        for d in [example1(), example2(), synthetic_order_k(3)] {
            let p = critical_profile(&d, 1e-9).unwrap();
            for i in 0..10_000 {
                let a = i as f64 / 9_999.0;
                assert!(p.m0 >= d.slope(a) - 1e-9, "undercut at alpha = {a}");
            }
        }
    }

    #[test]
    fn local_model_within_ten_percent_inside_radius() {
        for d in [example1(), example2(), synthetic_order_k(5)] {
            let p = critical_profile(&d, 1e-9).unwrap();
            for m in &p.maximizers {
                let q = m.kind.exponent_q();
                for i in 1..=32 {
                    let s = m.radius * i as f64 / 32.0;
                    for side in [-1.0, 1.0] {
                        let a = m.alpha_bar + side * s;
                        if !(0.0..=1.0).contains(&a) {
                            continue;
                        }
                        let model = p.m0 + m.c1 * s.powf(q);
                        let dev = (m.c1 * s.powf(q)).abs();
                        assert!(
                            (d.slope(a) - model).abs() <= 0.1 * dev + 1e-12,
                            "model off at alpha = {a}"
                        );
                    }
                }
            }
        }
    }

    #[test]
    fn order_detection_consistent_with_derivatives() {
        let d = synthetic_order_k(3);
        let p = critical_profile(&d, 1e-9).unwrap();
        let m = &p.maximizers[0];
        if let MaximizerKind::InteriorOrder(k) = m.kind {
            // u0^(2..k+1) vanish, u0^(k+2) does not, and c1 < 0
            for j in 2..=(k + 1) {
                assert!(d.eval_deriv(m.alpha_bar, j).unwrap().abs() < 1e-6);
            }
            let lead = d.eval_deriv(m.alpha_bar, k + 2).unwrap();
            assert!(lead.abs() > 1.0);
            assert!(m.c1 < 0.0);
        } else {
            panic!("expected interior order kind");
        }
    }

    #[test]
    fn zero_datum_profile_is_degenerate() {
        let d = InitialDatum::new(
            DatumForm::Polynomial { coefficients: vec![] },
            BoundaryCondition::Dirichlet,
        );
        let p = critical_profile(&d, 1e-9).unwrap();
        assert_eq!(p.m0, 0.0);
        assert!(p.eta_star.is_infinite());
        assert!(p.maximizers.is_empty());
    }

    #[test]
    fn too_many_maximizers_rejected() {
        // u0' = cos(40 pi a) ties its maximum at 21 locations
        let d = InitialDatum::new(
            DatumForm::TrigPolynomial {
                constant: 0.0,
                sin: vec![0.0; 19]
                    .into_iter()
                    .chain([1.0 / (40.0 * std::f64::consts::PI)])
                    .collect(),
                cos: vec![],
            },
            BoundaryCondition::Periodic,
        );
        assert!(matches!(
            critical_profile(&d, 1e-9),
            Err(Error::TooManyMaximizers { .. })
        ));
    }

    #[test]
    fn minimizers_of_example2() {
        let mins = minimizer_labels(&example2());
        // u0' = cos(2 pi a) has its least value at a = 1/2
        assert_eq!(mins.len(), 1);
        assert!((mins[0] - 0.5).abs() < 1e-9);
    }

    /// u0' = 1 - c (a - 1/2)^(k+1) with c = 2^(k+1) (k+2): periodic datum
    /// whose u0'' has a zero of order k at 1/2.
    pub fn synthetic_order_k(k: u32) -> InitialDatum {
        let q = k + 1;
        let c = 2.0_f64.powi(q as i32) * (q as f64 + 1.0);
        // u0 = a - (c/n) (a - 1/2)^n shifted so u0(0) = 0, with n = q + 1
        let n = (q + 1) as usize;
        let mut u0 = vec![0.0; n + 1];
        let scale = -c / n as f64;
        for i in 0..=n {
            // binomial coefficient of a^i in (a - 1/2)^n
            let mut b = 1.0;
            for j in 0..i {
                b = b * (n - j) as f64 / (j + 1) as f64;
            }
            u0[i] = scale * b * (-0.5_f64).powi((n - i) as i32);
        }
        u0[1] += 1.0;
        u0[0] -= u0[0]; // drop the constant so u0(0) = 0
        InitialDatum::new(
            DatumForm::Polynomial { coefficients: u0 },
            BoundaryCondition::Periodic,
        )
    }

    #[test]
    fn synthetic_datum_is_periodic_and_normalized() {
        for k in [1, 3, 5] {
            let d = synthetic_order_k(k);
            d.validate().unwrap();
            assert!((d.slope(0.5) - 1.0).abs() < 1e-12);
        }
    }
}
