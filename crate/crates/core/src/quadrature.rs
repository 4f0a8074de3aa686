//! Adaptive quadrature for the Jacobian kernel integrals.
//!
//! The integrands 1/J^b concentrate at the slope maximizers as eta
//! approaches eta_star. Each maximizer neighborhood is mapped through the
//! tangent substitution sqrt(|C1|/eps) * |a - abar|^(q/2) = tan(theta),
//! which turns the near-singular peak into a bounded integrand; the
//! remainder of [0, 1] is handled by adaptive Gauss-Kronrod panels.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::initial_data::{CriticalProfile, DatumForm, InitialDatum};
use crate::special::lgamma;

/// Default absolute tolerance for kernel integrals.
pub const DEFAULT_TOL: f64 = 1e-10;
/// Relative accuracy floor; absolute targets below this are unattainable
/// (the tangent substitution evaluates tan/atan/powf near the peak, which
/// leaves roundoff noise around 1e-13 relative in the transformed
/// integrand).
const REL_FLOOR: f64 = 1e-12;
const MAX_SUBDIVISIONS: usize = 4000;

// 21-point Gauss-Kronrod rule (QUADPACK tabulation).
#[allow(clippy::excessive_precision)]
const XGK21: [f64; 11] = [
    0.995_657_163_025_808_080_735_527_280_689_003,
    0.973_906_528_517_171_720_077_964_012_084_452,
    0.930_157_491_355_708_226_001_207_180_059_508,
    0.865_063_366_688_984_510_732_096_688_423_493,
    0.780_817_726_586_416_897_063_717_578_345_042,
    0.679_409_568_299_024_406_234_327_365_114_874,
    0.562_757_134_668_604_683_339_000_099_272_694,
    0.433_395_394_129_247_190_799_265_943_165_784,
    0.294_392_862_701_460_198_131_126_603_103_866,
    0.148_874_338_981_631_210_884_826_001_129_720,
    0.000_000_000_000_000_000_000_000_000_000_000,
];
#[allow(clippy::excessive_precision)]
const WG21: [f64; 5] = [
    0.066_671_344_308_688_137_593_568_809_893_332,
    0.149_451_349_150_580_593_145_776_339_657_697,
    0.219_086_362_515_982_043_995_534_934_228_163,
    0.269_266_719_309_996_355_091_226_921_569_469,
    0.295_524_224_714_752_870_173_892_994_651_338,
];
#[allow(clippy::excessive_precision)]
const WGK21: [f64; 11] = [
    0.011_694_638_867_371_874_278_064_396_062_192,
    0.032_558_162_307_964_727_478_818_972_459_390,
    0.054_755_896_574_351_996_031_381_300_244_580,
    0.075_039_674_810_919_952_767_043_140_916_190,
    0.093_125_454_583_697_605_535_065_465_083_366,
    0.109_387_158_802_297_641_899_210_590_325_805,
    0.123_491_976_262_065_851_077_958_109_831_074,
    0.134_709_217_311_473_325_928_054_001_771_707,
    0.142_775_938_577_060_080_797_094_273_138_717,
    0.147_739_104_901_338_491_374_841_515_972_068,
    0.149_445_554_002_916_905_664_936_468_389_821,
];

fn rescale_error(err: f64, res_abs: f64, res_asc: f64) -> f64 {
    let mut scaled = err.abs();
    if res_asc != 0.0 && scaled != 0.0 {
        let scale = (200.0 * scaled / res_asc).powf(1.5);
        scaled = if scale < 1.0 { res_asc * scale } else { res_asc };
    }
    if res_abs > f64::MIN_POSITIVE / (50.0 * f64::EPSILON) {
        scaled = scaled.max(50.0 * f64::EPSILON * res_abs);
    }
    scaled
}

/// One 21-point Gauss-Kronrod pass over [a, b]; returns (value, error).
fn gk21<F: Fn(f64) -> f64>(f: &F, a: f64, b: f64) -> (f64, f64) {
    let center = 0.5 * (a + b);
    let half = 0.5 * (b - a);
    let f_center = f(center);

    let mut res_gauss = 0.0;
    let mut res_kronrod = f_center * WGK21[10];
    let mut res_abs = res_kronrod.abs();
    let mut fv1 = [0.0_f64; 10];
    let mut fv2 = [0.0_f64; 10];

    for j in 0..10 {
        let x = half * XGK21[j];
        let v1 = f(center - x);
        let v2 = f(center + x);
        fv1[j] = v1;
        fv2[j] = v2;
        let sum = v1 + v2;
        if j % 2 == 1 {
            res_gauss += WG21[j / 2] * sum;
        }
        res_kronrod += WGK21[j] * sum;
        res_abs += WGK21[j] * (v1.abs() + v2.abs());
    }

    let mean = res_kronrod * 0.5;
    let mut res_asc = WGK21[10] * (f_center - mean).abs();
    for j in 0..10 {
        res_asc += WGK21[j] * ((fv1[j] - mean).abs() + (fv2[j] - mean).abs());
    }
    let err = (res_kronrod - res_gauss) * half;
    (
        res_kronrod * half,
        rescale_error(err, res_abs * half.abs(), res_asc * half.abs()),
    )
}

/// Single GK21 pass for other modules' adaptive loops.
pub(crate) fn gk21_pub<F: Fn(f64) -> f64>(f: &F, a: f64, b: f64) -> (f64, f64) {
    gk21(f, a, b)
}

#[derive(Debug, Clone, Copy, Serialize)]
pub struct QuadEstimate {
    pub value: f64,
    pub est_error: f64,
}

/// Kernel integrals at one eta: kbar0 = int 1/J, kbar1 = int 1/J^2.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct KernelValue {
    pub eta: f64,
    pub kbar0: f64,
    pub kbar1: f64,
    pub est_error: f64,
}

#[derive(Debug, Clone, Copy)]
enum Segment {
    Plain { a: f64, b: f64 },
    /// Piece of a maximizer half-neighborhood in the distance coordinate
    /// s = |alpha - abar|: the flat core below the substituted window and
    /// the power-law stretch above it. Working in s keeps full precision
    /// at a right-boundary maximizer, where alpha itself rounds near 1.
    /// Pieces bounded away from the maximizer integrate in ln(s), so a
    /// power-law stretch spanning many decades stays resolvable.
    Core {
        abar: f64,
        side: f64,
        s_lo: f64,
        s_hi: f64,
        exp_idx: usize,
        log_param: bool,
    },
    /// Tangent-substituted piece covering label distances [s_lo, s_hi]
    /// from the maximizer.
    Peak {
        abar: f64,
        side: f64,
        s_lo: f64,
        s_hi: f64,
        q: f64,
        c1_abs: f64,
        /// index into the engine's local expansions
        exp_idx: usize,
    },
}

/// Local expansion of the slope deficit m0 - u0'(abar + e) around a
/// maximizer. Evaluating the deficit through exact derivative
/// coefficients avoids the catastrophic cancellation of the direct
/// subtraction when the deficit is tiny.
#[derive(Debug, Clone)]
struct LocalExpansion {
    abar: f64,
    radius: f64,
    /// coefficients of e^m (m = 1, 2, ...) of u0'(abar + e) - m0
    poly: Vec<f64>,
    /// optional coeff * |e|^q term (anchored power profiles)
    power: Option<(f64, f64)>,
}

impl LocalExpansion {
    /// m0 - u0'(abar + e), clamped to be nonnegative.
    fn deficit(&self, e: f64) -> f64 {
        let mut p = 0.0;
        for &c in self.poly.iter().rev() {
            p = p * e + c;
        }
        p *= e;
        if let Some((c, q)) = self.power {
            p += c * e.abs().powf(q);
        }
        (-p).max(0.0)
    }
}

/// Largest tan(theta) admitted in the substituted piece; beyond this the
/// tan/atan roundtrip loses relative accuracy and plain panels take over.
const TAN_CAP: f64 = 1e4;

/// Pointwise Jacobian and segment decomposition at a fixed eta.
pub struct KernelEngine<'a> {
    datum: &'a InitialDatum,
    pub eta: f64,
    /// eta_star - eta when eta_star is finite; +inf otherwise.
    pub delta: f64,
    m0: f64,
    /// 1/eta - m0 (the shifted singularity gap), meaningful for eta > 0.
    eps: f64,
    segments: Vec<Segment>,
    expansions: Vec<LocalExpansion>,
}

impl<'a> KernelEngine<'a> {
    pub fn new(datum: &'a InitialDatum, profile: &CriticalProfile, eta: f64) -> Result<Self> {
        let delta = if profile.eta_star.is_finite() {
            profile.eta_star - eta
        } else {
            f64::INFINITY
        };
        Self::with_delta(datum, profile, eta, delta)
    }

    /// Variant taking eta_star - eta explicitly, for callers that track the
    /// gap exactly (avoids cancellation when the gap is tiny).
    pub fn with_delta(
        datum: &'a InitialDatum,
        profile: &CriticalProfile,
        eta: f64,
        delta: f64,
    ) -> Result<Self> {
        if !eta.is_finite() || eta < 0.0 {
            return Err(Error::InvalidArgument {
                detail: format!("eta must be finite and nonnegative, got {eta}"),
            });
        }
        if profile.m0 > 0.0 && delta <= 0.0 {
            return Err(Error::SingularEta {
                eta,
                eta_star: profile.eta_star,
            });
        }
        // 1/eta - m0 = m0*delta/eta, exact in the tracked gap even when
        // eta itself rounds to eta_star
        let eps = if eta > 0.0 && delta.is_finite() {
            profile.m0 * delta / eta
        } else if eta > 0.0 {
            1.0 / eta - profile.m0
        } else {
            f64::INFINITY
        };

        let peaks_active = eta > 0.0 && profile.m0 > 0.0 && !profile.maximizers.is_empty();
        let mut segments = Vec::new();
        let mut expansions = Vec::new();
        if !peaks_active {
            segments.push(Segment::Plain { a: 0.0, b: 1.0 });
        } else {
            let mut maxs = profile.maximizers.clone();
            maxs.sort_by(|x, y| x.alpha_bar.total_cmp(&y.alpha_bar));
            for (i, m) in maxs.iter().enumerate() {
                let mut r = m.radius;
                if i > 0 {
                    r = r.min(0.5 * (m.alpha_bar - maxs[i - 1].alpha_bar));
                }
                if i + 1 < maxs.len() {
                    r = r.min(0.5 * (maxs[i + 1].alpha_bar - m.alpha_bar));
                }
                // coefficients below the detected leading power are
                // structural zeros; evaluating them would inject
                // derivative roundoff (e.g. sin(2 pi) != 0) that dominates
                // the true deficit close to the maximizer
                let q = m.kind.exponent_q();
                let lead = ((q - q.round()).abs() < 1e-12).then(|| q.round() as u32);
                expansions.push(local_expansion(datum, profile.m0, m.alpha_bar, r, lead));
            }
            let mut cursor = 0.0;
            for (i, m) in maxs.iter().enumerate() {
                let exp = &expansions[i];
                let r = exp.radius;
                let q = m.kind.exponent_q();
                let c1_abs = m.c1.abs().max(1e-300);
                // substitute between the flat core (tan ~ 1) and the point
                // where tan grows past the roundoff-safe cap
                let s_core = (eps / c1_abs).powf(1.0 / q);
                let s_cap = (TAN_CAP * (eps / c1_abs).sqrt()).powf(2.0 / q);
                let left = (m.alpha_bar - r).max(0.0);
                let right = (m.alpha_bar + r).min(1.0);
                if left > cursor + 1e-15 {
                    segments.push(Segment::Plain { a: cursor, b: left });
                }
                for side in [-1.0_f64, 1.0] {
                    let reach = if side < 0.0 {
                        m.alpha_bar - left
                    } else {
                        right - m.alpha_bar
                    };
                    if reach <= 1e-15 {
                        continue;
                    }
                    // q <= 2 substitutes from s = 0 (smooth there); q > 2
                    // keeps the flat core in the distance coordinate
                    let s_lo = if q <= 2.0 { 0.0 } else { s_core.min(reach) };
                    let s_hi = s_cap.min(reach);
                    let core = (s_lo > 0.0).then_some(Segment::Core {
                        abar: m.alpha_bar,
                        side,
                        s_lo: 0.0,
                        s_hi: s_lo,
                        exp_idx: i,
                        log_param: false,
                    });
                    let peak = (s_hi > s_lo * (1.0 + 1e-12) + 1e-300).then_some(Segment::Peak {
                        abar: m.alpha_bar,
                        side,
                        s_lo,
                        s_hi,
                        q,
                        c1_abs,
                        exp_idx: i,
                    });
                    let outer = (reach > s_hi * (1.0 + 1e-12)).then_some(Segment::Core {
                        abar: m.alpha_bar,
                        side,
                        s_lo: s_hi,
                        s_hi: reach,
                        exp_idx: i,
                        log_param: true,
                    });
                    // keep label order: ascending alpha
                    let mut side_segments: Vec<Segment> = Vec::new();
                    if let Some(c) = core {
                        side_segments.push(c);
                    }
                    if let Some(p) = peak {
                        side_segments.push(p);
                    }
                    if let Some(o) = outer {
                        side_segments.push(o);
                    }
                    if side < 0.0 {
                        side_segments.reverse();
                    }
                    segments.extend(side_segments);
                }
                cursor = right;
            }
            if cursor < 1.0 - 1e-15 {
                segments.push(Segment::Plain { a: cursor, b: 1.0 });
            }
        }

        Ok(KernelEngine {
            datum,
            eta,
            delta,
            m0: profile.m0,
            eps,
            segments,
            expansions,
        })
    }

    /// J(alpha, eta) = 1 - eta*u0'(alpha), evaluated through the gap form
    /// m0*delta + eta*(m0 - u0') which stays positive under roundoff. The
    /// deficit m0 - u0' comes from the local expansion inside maximizer
    /// neighborhoods and from direct subtraction elsewhere.
    #[inline]
    pub fn j(&self, alpha: f64) -> f64 {
        if self.delta.is_finite() && self.eta > 0.0 {
            let diff = self.deficit(alpha);
            self.m0 * self.delta + self.eta * diff
        } else {
            1.0 - self.eta * self.datum.slope(alpha)
        }
    }

    /// m0 - u0'(alpha), clamped nonnegative.
    #[inline]
    fn deficit(&self, alpha: f64) -> f64 {
        for exp in &self.expansions {
            let e = alpha - exp.abar;
            if e.abs() <= exp.radius {
                return exp.deficit(e);
            }
        }
        (self.m0 - self.datum.slope(alpha)).max(0.0)
    }

    /// Integrate g(alpha, J(alpha)) over [0, 1] to absolute tolerance `tol`
    /// (floored at the relative roundoff level of the estimate).
    pub fn integrate<G: Fn(f64, f64) -> f64>(&self, g: G, tol: f64) -> Result<QuadEstimate> {
        self.integrate_range(g, 0.0, 1.0, tol)
    }

    /// Same as `integrate` but over the label interval [lo, hi].
    pub fn integrate_range<G: Fn(f64, f64) -> f64>(
        &self,
        g: G,
        lo: f64,
        hi: f64,
        tol: f64,
    ) -> Result<QuadEstimate> {
        if !(0.0..=1.0 + 1e-12).contains(&lo) || hi > 1.0 + 1e-12 || lo > hi {
            return Err(Error::InvalidArgument {
                detail: format!("integration range [{lo}, {hi}] outside [0, 1]"),
            });
        }
        if hi - lo < 1e-300 {
            return Ok(QuadEstimate {
                value: 0.0,
                est_error: 0.0,
            });
        }

        // work items: (param_lo, param_hi, segment index, value, err)
        struct Item {
            a: f64,
            b: f64,
            seg: usize,
            value: f64,
            err: f64,
        }
        let mut items: Vec<Item> = Vec::new();
        for (si, seg) in self.segments.iter().enumerate() {
            let (pa, pb) = match self.clip_segment(seg, lo, hi) {
                Some(r) => r,
                None => continue,
            };
            let (v, e) = gk21(&|p| self.eval_param(seg, p, &g), pa, pb);
            items.push(Item {
                a: pa,
                b: pb,
                seg: si,
                value: v,
                err: e,
            });
        }

        let mut n_splits = 0;
        loop {
            let total: f64 = items.iter().map(|it| it.value).sum();
            let err: f64 = items.iter().map(|it| it.err).sum();
            let tol_eff = tol.max(REL_FLOOR * total.abs()).max(1e-300);
            if err <= tol_eff {
                // deterministic final summation order
                let mut order: Vec<usize> = (0..items.len()).collect();
                order.sort_by(|&x, &y| {
                    items[x].seg.cmp(&items[y].seg).then(items[x].a.total_cmp(&items[y].a))
                });
                let value = order.iter().map(|&i| items[i].value).sum();
                return Ok(QuadEstimate {
                    value,
                    est_error: err,
                });
            }
            if n_splits >= MAX_SUBDIVISIONS {
                return Err(Error::QuadratureBudgetExceeded {
                    estimate: total,
                    est_error: err,
                    tol,
                });
            }
            // bisect the worst interval
            let worst = items
                .iter()
                .enumerate()
                .max_by(|(_, x), (_, y)| x.err.total_cmp(&y.err))
                .map(|(i, _)| i)
                .unwrap();
            let Item { a, b, seg, .. } = items[worst];
            let mid = 0.5 * (a + b);
            if mid <= a || mid >= b {
                // interval no longer splittable; accept its estimate as-is
                items[worst].err = 0.0;
                continue;
            }
            let segref = &self.segments[seg];
            let (v1, e1) = gk21(&|p| self.eval_param(segref, p, &g), a, mid);
            let (v2, e2) = gk21(&|p| self.eval_param(segref, p, &g), mid, b);
            items[worst] = Item {
                a,
                b: mid,
                seg,
                value: v1,
                err: e1,
            };
            items.push(Item {
                a: mid,
                b,
                seg,
                value: v2,
                err: e2,
            });
            n_splits += 1;
        }
    }

    /// Clip a segment to the label window [lo, hi]; returns its parameter range.
    fn clip_segment(&self, seg: &Segment, lo: f64, hi: f64) -> Option<(f64, f64)> {
        match *seg {
            Segment::Plain { a, b } => {
                let (ca, cb) = (a.max(lo), b.min(hi));
                (cb - ca > 1e-300).then_some((ca, cb))
            }
            Segment::Core {
                abar,
                side,
                s_lo,
                s_hi,
                log_param,
                ..
            } => {
                let (s_near, s_far) = clip_distances(abar, side, s_lo, s_hi, lo, hi)?;
                if log_param {
                    Some((s_near.ln(), s_far.ln()))
                } else {
                    Some((s_near, s_far))
                }
            }
            Segment::Peak {
                abar,
                side,
                s_lo,
                s_hi,
                q,
                c1_abs,
                ..
            } => {
                let (s_near, s_far) = clip_distances(abar, side, s_lo, s_hi, lo, hi)?;
                let c = (c1_abs / self.eps).sqrt();
                let th = |s: f64| (c * s.powf(0.5 * q)).atan();
                Some((th(s_near), th(s_far)))
            }
        }
    }

    fn eval_param<G: Fn(f64, f64) -> f64>(&self, seg: &Segment, p: f64, g: &G) -> f64 {
        match *seg {
            Segment::Plain { .. } => g(p, self.j(p)),
            Segment::Core {
                abar,
                side,
                exp_idx,
                log_param,
                ..
            } => {
                let (s, measure) = if log_param {
                    let s = p.exp();
                    (s, s)
                } else {
                    (p, 1.0)
                };
                let alpha = (abar + side * s).clamp(0.0, 1.0);
                let jv = self.m0 * self.delta + self.eta * self.expansions[exp_idx].deficit(side * s);
                g(alpha, jv) * measure
            }
            Segment::Peak {
                abar,
                side,
                q,
                c1_abs,
                exp_idx,
                ..
            } => {
                let c = (c1_abs / self.eps).sqrt();
                let t = p.tan();
                let s = (t / c).powf(2.0 / q);
                let alpha = (abar + side * s).clamp(0.0, 1.0);
                let sec2 = 1.0 + t * t;
                let dsdp = (2.0 / q) * c.powf(-2.0 / q) * t.powf(2.0 / q - 1.0) * sec2;
                let jv = self.m0 * self.delta + self.eta * self.expansions[exp_idx].deficit(side * s);
                g(alpha, jv) * dsdp
            }
        }
    }
}

/// Clip a half-neighborhood [s_lo, s_hi] of distances from `abar` to the
/// label window [lo, hi]. The stored distances pass through untouched
/// when the window does not cut into the piece, so no precision is lost
/// to label arithmetic near a boundary maximizer.
fn clip_distances(
    abar: f64,
    side: f64,
    s_lo: f64,
    s_hi: f64,
    lo: f64,
    hi: f64,
) -> Option<(f64, f64)> {
    let (near_cut, far_cut) = if side > 0.0 {
        (lo - abar, hi - abar)
    } else {
        (abar - hi, abar - lo)
    };
    let s_near = if near_cut > s_lo { near_cut } else { s_lo };
    let s_far = if far_cut < s_hi { far_cut } else { s_hi };
    (s_far - s_near > 1e-300).then_some((s_near.max(0.0), s_far))
}

/// Build the slope-deficit expansion around a maximizer. Smooth forms use
/// the Taylor coefficients of u0' at abar; anchored power profiles carry
/// their |e|^q term explicitly next to the background's Taylor series.
/// Coefficients below `lead` are structural zeros and are dropped. The
/// radius shrinks until the expansion matches direct evaluation.
fn local_expansion(
    datum: &InitialDatum,
    m0: f64,
    abar: f64,
    radius: f64,
    lead: Option<u32>,
) -> LocalExpansion {
    const TERMS: usize = 34;
    let mut poly = Vec::new();
    let mut power = None;

    let anchored = matches!(
        &datum.form,
        DatumForm::PowerProfile { anchor, .. } if (abar - anchor).abs() < 1e-12
    );
    if anchored {
        if let DatumForm::PowerProfile {
            coefficient,
            exponent,
            background,
            ..
        } = &datum.form
        {
            power = Some((*coefficient, *exponent));
            // Taylor series of the background polynomial at abar
            let mut fac = 1.0;
            for m in 1..background.len().max(1) {
                fac *= m as f64;
                poly.push(crate::initial_data::poly_deriv(background, abar, m as u32) / fac);
            }
        }
    } else {
        let mut fac = 1.0;
        for m in 1..=TERMS {
            fac *= m as f64;
            match datum.eval_deriv(abar, (m + 1) as u32) {
                Ok(d) => poly.push(d / fac),
                Err(_) => break,
            }
        }
        if let Some(lead) = lead {
            for c in poly.iter_mut().take((lead as usize).saturating_sub(1)) {
                *c = 0.0;
            }
        }
        while poly.last().is_some_and(|&c| c == 0.0) {
            poly.pop();
        }
    }

    let exp = |radius: f64| LocalExpansion {
        abar,
        radius,
        poly: poly.clone(),
        power,
    };

    // shrink until the expansion reproduces the direct deficit at the rim
    let mut r = radius;
    for _ in 0..40 {
        let ok = [-1.0_f64, 1.0].iter().all(|side| {
            let a = abar + side * r;
            if !(0.0..=1.0).contains(&a) {
                return true;
            }
            let direct = m0 - datum.slope(a);
            let local = exp(r).deficit(side * r);
            (local - direct).abs() <= 1e-9 * direct.abs().max(1e-9)
        });
        if ok || r < 1e-9 {
            break;
        }
        r *= 0.5;
    }
    exp(r)
}

/// J(alpha, eta) = 1 - eta * u0'(alpha).
pub fn jacobian(datum: &InitialDatum, alpha: f64, eta: f64) -> f64 {
    1.0 - eta * datum.slope(alpha)
}

/// kbar_b(eta) = int_0^1 J(alpha, eta)^(-b) dalpha for b in {1, 2}.
pub fn kbar(
    datum: &InitialDatum,
    profile: &CriticalProfile,
    eta: f64,
    b: u8,
    tol: f64,
) -> Result<QuadEstimate> {
    if b != 1 && b != 2 {
        return Err(Error::InvalidArgument {
            detail: format!("kernel power b must be 1 or 2, got {b}"),
        });
    }
    let engine = KernelEngine::new(datum, profile, eta)?;
    match b {
        1 => engine.integrate(|_, j| 1.0 / j, tol),
        _ => engine.integrate(|_, j| 1.0 / (j * j), tol),
    }
}

/// Both kernel components at one eta.
pub fn kernel_value(
    datum: &InitialDatum,
    profile: &CriticalProfile,
    eta: f64,
    tol: f64,
) -> Result<KernelValue> {
    let engine = KernelEngine::new(datum, profile, eta)?;
    let k0 = engine.integrate(|_, j| 1.0 / j, tol)?;
    let k1 = engine.integrate(|_, j| 1.0 / (j * j), tol)?;
    Ok(KernelValue {
        eta,
        kbar0: k0.value,
        kbar1: k1.value,
        est_error: k0.est_error.max(k1.est_error),
    })
}

/// int_0^1 u0'(alpha)/J^2 dalpha = d kbar0 / d eta.
pub fn kbar0_derivative(
    datum: &InitialDatum,
    profile: &CriticalProfile,
    eta: f64,
    tol: f64,
) -> Result<QuadEstimate> {
    let engine = KernelEngine::new(datum, profile, eta)?;
    engine.integrate(|a, j| datum.slope(a) / (j * j), tol)
}

/// Asymptotic law A * delta^exponent * |ln delta|^log_power for a kernel
/// or trajectory quantity near eta_star, delta = eta_star - eta.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct RateModel {
    pub exponent: f64,
    pub constant: f64,
    /// True when the law carries a logarithmic correction (q = 1 case).
    pub log_correction: bool,
    pub log_power: i32,
    /// True when the law extends the smooth theory to fractional exponents.
    pub extension: bool,
}

impl RateModel {
    /// Evaluate the modeled quantity at gap delta.
    pub fn eval(&self, delta: f64) -> f64 {
        self.constant * delta.powf(self.exponent) * delta.ln().abs().powi(self.log_power)
    }
}

/// Two-sided rate constant for an order-q maximizer:
/// kbar_b ~ C * delta^(1/q - b) with
/// C = 2 M0^(2/q - b) / (q |C1|^(1/q)) * Gamma(1/q) * Gamma(b - 1/q).
pub fn power_rate_constant(q: f64, m0: f64, c1_abs: f64, b: u8) -> f64 {
    let bf = b as f64;
    let gammas = (lgamma(1.0 / q) + lgamma(bf - 1.0 / q)).exp();
    2.0 * m0.powf(2.0 / q - bf) / (q * c1_abs.powf(1.0 / q)) * gammas
}

/// C2 of the kbar0 power law for a zero of order k (q = k + 1).
pub fn c2_constant(k: u32, m0: f64, c1_abs: f64) -> f64 {
    power_rate_constant((k + 1) as f64, m0, c1_abs, 1)
}

/// C3 of the kbar1 power law for a zero of order k.
pub fn c3_constant(k: u32, m0: f64, c1_abs: f64) -> f64 {
    power_rate_constant((k + 1) as f64, m0, c1_abs, 2)
}

/// Closed-form divergence law of kbar_b as eta -> eta_star, with
/// contributions summed over maximizers (boundary points count one side).
pub fn asymptotic_rates(profile: &CriticalProfile, b: u8) -> Result<RateModel> {
    if b != 1 && b != 2 {
        return Err(Error::InvalidArgument {
            detail: format!("kernel power b must be 1 or 2, got {b}"),
        });
    }
    if profile.m0 <= 0.0 || profile.maximizers.is_empty() {
        return Err(Error::InvalidArgument {
            detail: "asymptotic rates require a positive maximum at isolated locations".into(),
        });
    }
    let qd = profile.dominant_exponent().unwrap();
    let m0 = profile.m0;
    let extension = profile
        .maximizers
        .iter()
        .any(|m| matches!(m.kind, crate::initial_data::MaximizerKind::Fractional(_)));

    if (qd - 1.0).abs() < 1e-12 {
        // logarithmic laws: kbar0 ~ sum w*2*M0/|C1| * |ln d|, kbar1 ~ sum w*2/|C1| * 1/d
        let mut c = 0.0;
        for m in &profile.maximizers {
            let w = m.weight();
            c += match b {
                1 => w * 2.0 * m0 / m.c1.abs(),
                _ => w * 2.0 / m.c1.abs(),
            };
        }
        return Ok(RateModel {
            exponent: if b == 1 { 0.0 } else { -1.0 },
            constant: c,
            log_correction: b == 1,
            log_power: if b == 1 { 1 } else { 0 },
            extension,
        });
    }

    // power laws: only maximizers achieving the dominant exponent contribute
    let mut c = 0.0;
    for m in &profile.maximizers {
        if (m.kind.exponent_q() - qd).abs() < 1e-12 {
            c += m.weight() * power_rate_constant(qd, m0, m.c1.abs(), b);
        }
    }
    Ok(RateModel {
        exponent: 1.0 / qd - b as f64,
        constant: c,
        log_correction: false,
        log_power: 0,
        extension,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::initial_data::{critical_profile, BoundaryCondition, DatumForm, InitialDatum};

    fn example1() -> InitialDatum {
        InitialDatum::new(
            DatumForm::Polynomial {
                coefficients: vec![0.0, 0.5, -1.5, 1.0],
            },
            BoundaryCondition::Dirichlet,
        )
    }

    fn example2() -> InitialDatum {
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
    fn jacobian_examples() {
        let e2 = example2();
        assert!((jacobian(&e2, 0.0, 1.0)).abs() < 1e-15);
        let e1 = example1();
        assert!((jacobian(&e1, 0.5, 2.0) - 1.5).abs() < 1e-15);
        assert!((jacobian(&e1, 0.3, 0.0) - 1.0).abs() < 1e-15);
    }

    #[test]
    fn kbar_closed_forms_example2() {
        // kbar0 = (1 - eta^2)^(-1/2), kbar1 = (1 - eta^2)^(-3/2)
        let d = example2();
        let p = critical_profile(&d, 1e-9).unwrap();
        let k0 = kbar(&d, &p, 0.6, 1, 1e-11).unwrap();
        assert!((k0.value - 1.25).abs() < 1e-9, "kbar0 = {}", k0.value);
        let k1 = kbar(&d, &p, 0.6, 2, 1e-11).unwrap();
        assert!((k1.value - 1.953125).abs() < 1e-9, "kbar1 = {}", k1.value);
    }

    #[test]
    fn kbar_closed_form_example1() {
        // frozen from the arctanh closed form at eta = 1
        let d = example1();
        let p = critical_profile(&d, 1e-9).unwrap();
        let k0 = kbar(&d, &p, 1.0, 1, 1e-11).unwrap();
        assert!((k0.value - 1.065_554_320_503_940_3).abs() < 1e-9);
        let k1 = kbar(&d, &p, 1.0, 2, 1e-11).unwrap();
        assert!((k1.value - 1.226_221_728_201_577).abs() < 1e-9);
    }

    #[test]
    fn kbar_of_zero_datum_is_one() {
        let d = InitialDatum::new(
            DatumForm::Polynomial { coefficients: vec![] },
            BoundaryCondition::Dirichlet,
        );
        let p = critical_profile(&d, 1e-9).unwrap();
        for eta in [0.0, 1.0, 7.5] {
            for b in [1, 2] {
                let k = kbar(&d, &p, eta, b, 1e-12).unwrap();
                assert!((k.value - 1.0).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn kbar_at_eta_zero_is_one() {
        for d in [example1(), example2()] {
            let p = critical_profile(&d, 1e-9).unwrap();
            let kv = kernel_value(&d, &p, 0.0, 1e-12).unwrap();
            assert!((kv.kbar0 - 1.0).abs() < 1e-12);
            assert!((kv.kbar1 - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn singular_eta_rejected() {
        let d = example2();
        let p = critical_profile(&d, 1e-9).unwrap();
        assert!(matches!(
            kbar(&d, &p, 1.0, 1, 1e-10),
            Err(Error::SingularEta { .. })
        ));
        assert!(matches!(
            kbar(&d, &p, 1.5, 1, 1e-10),
            Err(Error::SingularEta { .. })
        ));
    }

    #[test]
    fn deep_eta_matches_closed_form_example2() {
        // stress the tangent substitution close to eta_star
        let d = example2();
        let p = critical_profile(&d, 1e-9).unwrap();
        for log_delta in [-4, -6, -8, -10] {
            let delta = 10.0_f64.powi(log_delta);
            let eta = 1.0 - delta;
            let engine = KernelEngine::with_delta(&d, &p, eta, delta).unwrap();
            let k0 = engine.integrate(|_, j| 1.0 / j, 1e-12).unwrap().value;
            let exact = 1.0 / (delta * (2.0 - delta)).sqrt();
            let rel = (k0 - exact).abs() / exact;
            assert!(rel < 1e-9, "delta = {delta}: rel = {rel}");
            let k1 = engine.integrate(|_, j| 1.0 / (j * j), 1e-12).unwrap().value;
            let exact1 = (delta * (2.0 - delta)).powf(-1.5);
            let rel1 = (k1 - exact1).abs() / exact1;
            assert!(rel1 < 1e-9, "delta = {delta}: rel1 = {rel1}");
        }
    }

    #[test]
    fn kbar0_derivative_matches_difference_quotient() {
        let d = example1();
        let p = critical_profile(&d, 1e-9).unwrap();
        let eta = 1.3;
        let h = 1e-6;
        let kp = kbar(&d, &p, eta + h, 1, 1e-12).unwrap().value;
        let km = kbar(&d, &p, eta - h, 1, 1e-12).unwrap().value;
        let fd = (kp - km) / (2.0 * h);
        let dv = kbar0_derivative(&d, &p, eta, 1e-12).unwrap().value;
        assert!((fd - dv).abs() < 1e-7, "fd = {fd}, dv = {dv}");
    }

    #[test]
    fn midpoint_oracle_agreement() {
        // small version of the acceptance check
        let d = example1();
        let p = critical_profile(&d, 1e-9).unwrap();
        for &(eta, b) in &[(0.9, 1_u8), (1.5, 2), (1.8, 1)] {
            let fast = kbar(&d, &p, eta, b, 1e-11).unwrap().value;
            let n = 1_000_000;
            let h = 1.0 / n as f64;
            let mut acc = 0.0;
            for i in 0..n {
                let a = (i as f64 + 0.5) * h;
                acc += jacobian(&d, a, eta).powi(-(b as i32));
            }
            acc *= h;
            assert!(
                (fast - acc).abs() < 1e-8,
                "eta = {eta}, b = {b}: {fast} vs {acc}"
            );
        }
    }

    #[test]
    fn monotone_in_eta_for_nonnegative_slope() {
        // u0 = a^2/2 has u0' = a >= 0
        let d = InitialDatum::new(
            DatumForm::Polynomial {
                coefficients: vec![0.0, 0.0, 0.5],
            },
            BoundaryCondition::Dirichlet,
        );
        let p = critical_profile(&d, 1e-9).unwrap();
        for b in [1, 2] {
            let mut last = 0.0;
            for i in 0..20 {
                let eta = 0.9 * i as f64 / 19.0;
                let k = kbar(&d, &p, eta, b, 1e-11).unwrap().value;
                assert!(k >= last - 1e-10, "b = {b}, eta = {eta}");
                last = k;
            }
        }
    }

    #[test]
    fn rate_constants_match_gamma_identities() {
        let two_pi_sq = 2.0 * std::f64::consts::PI * std::f64::consts::PI;
        // C2(k=1, M0=1, |C1| = 2 pi^2) = 1/sqrt(2)
        let c2 = c2_constant(1, 1.0, two_pi_sq);
        assert!((c2 - std::f64::consts::FRAC_1_SQRT_2).abs() < 1e-12);
        // C3/C2 = k / (M0 (1+k))
        for k in [1_u32, 3, 5] {
            for m0 in [0.5, 1.0, 2.0] {
                let r = c3_constant(k, m0, 3.0) / c2_constant(k, m0, 3.0);
                let pred = k as f64 / (m0 * (1 + k) as f64);
                assert!((r - pred).abs() < 1e-13, "k = {k}, m0 = {m0}");
            }
        }
    }

    #[test]
    fn rates_example1_log_law() {
        // two boundary maximizers, each contributing M0/|C1| = 1/6
        let d = example1();
        let p = critical_profile(&d, 1e-9).unwrap();
        let r = asymptotic_rates(&p, 1).unwrap();
        assert!(r.log_correction);
        assert!((r.constant - 1.0 / 3.0).abs() < 1e-9, "constant = {}", r.constant);
        let r2 = asymptotic_rates(&p, 2).unwrap();
        assert!((r2.exponent + 1.0).abs() < 1e-12);
        assert!((r2.constant - 2.0 / 3.0).abs() < 1e-9);
    }

    #[test]
    fn rates_example2_power_law() {
        // two half-neighborhoods of order 1 sum to the full interior constant
        let d = example2();
        let p = critical_profile(&d, 1e-9).unwrap();
        let r = asymptotic_rates(&p, 1).unwrap();
        assert!((r.exponent + 0.5).abs() < 1e-12);
        assert!(
            (r.constant - std::f64::consts::FRAC_1_SQRT_2).abs() < 1e-6,
            "constant = {}",
            r.constant
        );
        assert!(!r.extension);
    }

    #[test]
    fn log_law_constant_verified_against_quadrature() {
        // kbar0(eta) ~ (1/3) |ln delta| for Example 1
        let d = example1();
        let p = critical_profile(&d, 1e-9).unwrap();
        let d1 = 1e-9;
        let d2 = 1e-11;
        let k1 = KernelEngine::with_delta(&d, &p, 2.0 - d1, d1)
            .unwrap()
            .integrate(|_, j| 1.0 / j, 1e-10)
            .unwrap()
            .value;
        let k2 = KernelEngine::with_delta(&d, &p, 2.0 - d2, d2)
            .unwrap()
            .integrate(|_, j| 1.0 / j, 1e-10)
            .unwrap()
            .value;
        let slope = (k2 - k1) / ((d1 / d2) as f64).ln();
        assert!((slope - 1.0 / 3.0).abs() < 2e-3, "slope = {slope}");
    }
}


