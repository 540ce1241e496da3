//! Closed-form auxiliaries and the nested-quadrature expected rank of the
//! rank-threshold stopping rule.
//!
//! The rule lives on the strip `[0,1] x [0,∞)` carrying a unit-intensity
//! planar Poisson process. Before the switch time `alpha` it stops at the
//! first atom below both the curve `f1(t) = b/(1-t)` and the random level
//! `Y` (the lowest atom above `f1` on `[0, alpha]`, which enforces relative
//! rank one); afterwards it stops at the first atom below `f2(t) = c/(1-t)`.
//! The expected absolute rank of the stopped atom is computed by
//! conditioning on `Y = y`, integrating the conditional risk in closed form
//! over the atom value, numerically over time, and finally integrating `y`
//! out against the density of `Y`.

use crate::quadrature::{integrate, integrate_semi_infinite, QuadConfig, QuadError, QuadResult};
use serde::Serialize;
use std::cell::Cell;
use thiserror::Error;

/// Weight below which the `Y`-integrand is treated as zero; `exp(-s1(y))`
/// past this point is under 1e-16 and the conditional risks are bounded.
const S1_CUTOFF: f64 = 36.841_361_487_904_73;

/// Parameters `(alpha, b, c)` of the rank-threshold rule.
///
/// `alpha` is the switch time, `b` scales the rank-phase threshold
/// `b/(1-t)`, and `c` scales the pure-threshold phase `c/(1-t)`. The
/// constructor enforces `0 <= alpha < 1`, `b > 0` and `c > 1`; the pure
/// threshold rule has infinite expected rank at `c = 1`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct RuleParams {
    alpha: f64,
    b: f64,
    c: f64,
}

#[derive(Debug, Error, PartialEq)]
pub enum ParamError {
    #[error("alpha must lie in [0, 1), got {0}")]
    AlphaOutOfRange(f64),
    #[error("b must be a positive finite threshold coefficient, got {0}")]
    InvalidB(f64),
    #[error("c must exceed 1 for a finite expected rank, got {0}")]
    InvalidC(f64),
}

impl RuleParams {
    pub fn new(alpha: f64, b: f64, c: f64) -> Result<Self, ParamError> {
        if !alpha.is_finite() || !(0.0..1.0).contains(&alpha) {
            return Err(ParamError::AlphaOutOfRange(alpha));
        }
        if !b.is_finite() || b <= 0.0 {
            return Err(ParamError::InvalidB(b));
        }
        if !c.is_finite() || c <= 1.0 {
            return Err(ParamError::InvalidC(c));
        }
        Ok(Self { alpha, b, c })
    }

    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    pub fn b(&self) -> f64 {
        self.b
    }

    pub fn c(&self) -> f64 {
        self.c
    }
}

/// Expected rank split at the switch time, with the outer quadrature error.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct RiskBreakdown {
    /// Contribution of stops at or before `alpha`.
    pub pre_alpha: f64,
    /// Contribution of stops after `alpha`.
    pub post_alpha: f64,
    /// `pre_alpha + post_alpha`, the expected rank of the rule.
    pub total: f64,
    /// Summed error estimates of the outer quadratures.
    pub quad_error: f64,
    /// False when any quadrature level exhausted its subdivision budget.
    pub converged: bool,
}

/// The threshold curve `k / (1 - t)`.
///
/// Panics for `t` outside `[0, 1)`.
pub fn f_threshold(t: f64, k: f64) -> f64 {
    assert!(
        (0.0..1.0).contains(&t),
        "threshold curve evaluated at t = {t} outside [0, 1)"
    );
    assert!(k > 0.0, "threshold coefficient must be positive");
    k / (1.0 - t)
}

/// Inverse of the threshold curve, clamped at `floor_t` below its base value:
/// `max(floor_t, 1 - k/x)`.
pub fn f_inverse(x: f64, k: f64, floor_t: f64) -> f64 {
    assert!(x >= 0.0, "threshold inverse evaluated at negative level");
    if x == 0.0 {
        return floor_t;
    }
    (1.0 - k / x).max(floor_t)
}

/// `F1(t, y) = ∫_0^t min(f1(s), y) ds` in closed form.
///
/// `y` may be `+∞`, in which case the minimum is `f1` everywhere.
pub fn big_f1(t: f64, y: f64, p: &RuleParams) -> f64 {
    assert!((0.0..1.0).contains(&t));
    assert!(y >= 0.0);
    let b = p.b;
    if y.is_infinite() {
        return -b * (1.0 - t).ln();
    }
    if y <= b {
        return y * t;
    }
    // f1 crosses y at 1 - b/y; below the crossing the curve is the minimum.
    let t_y = t.min(1.0 - b / y);
    -b * (1.0 - t_y).ln() + y * (t - t_y)
}

/// `F2(t) = ∫_alpha^t f2(s) ds = c ln((1-alpha)/(1-t))`.
///
/// Panics for `t < alpha`; diverges as `t -> 1`, which is what forces the
/// rule to stop almost surely.
pub fn big_f2(t: f64, p: &RuleParams) -> f64 {
    assert!(
        t >= p.alpha - 1e-12 && t < 1.0,
        "F2 evaluated at t = {t} outside [alpha, 1)"
    );
    (p.c * ((1.0 - p.alpha) / (1.0 - t)).ln()).max(0.0)
}

/// `S1(y) = ∫_0^y min(f1^{-1}(z), alpha) dz = alpha*y - F1(alpha, y)`:
/// the area between the level `y` and the curve `f1` over `[0, alpha]`.
pub fn s1(y: f64, p: &RuleParams) -> f64 {
    assert!(y >= 0.0);
    p.alpha * y - big_f1(p.alpha, y, p)
}

/// `S2(x) = ∫_0^x (f2^{-1}(z) - alpha) dz`: the area between the curve `f2`
/// and the level `x` past the switch time. Zero up to `f2(alpha)`.
pub fn s2(x: f64, p: &RuleParams) -> f64 {
    assert!(x >= 0.0);
    let oma = 1.0 - p.alpha;
    let c = p.c;
    if x <= c / oma {
        return 0.0;
    }
    oma * x - c - c * (x * oma / c).ln()
}

/// Density of `Y` at `y`: `exp(-S1(y)) * min(f1^{-1}(y), alpha)`.
///
/// Vanishes for `y <= b`. Panics at `alpha = 0`, where `Y` degenerates and
/// the pure-threshold evaluation applies instead.
pub fn y_density(y: f64, p: &RuleParams) -> f64 {
    assert!(
        p.alpha > 0.0,
        "the level Y degenerates at alpha = 0; use the pure-threshold path"
    );
    (-s1(y, p)).exp() * f_inverse(y, p.b, 0.0).min(p.alpha)
}

/// Expected rank of the pure threshold rule `c/(1-t)`: `1 + c/2 + 1/(c^2-1)`.
pub fn threshold_formula(c: f64) -> f64 {
    assert!(c > 1.0, "the threshold value diverges for c <= 1");
    1.0 + c / 2.0 + 1.0 / (c * c - 1.0)
}

/// Conditional expected rank of stops at or before `alpha`, given `Y = y`:
/// `∫_0^alpha exp(-F1(t,y)) (u + u^2 (1-t)/2) dt` with `u = min(f1(t), y)`,
/// the inner atom-value integral already done in closed form.
pub fn cond_risk_pre(
    y: f64,
    p: &RuleParams,
    cfg: &QuadConfig,
) -> Result<QuadResult, QuadError> {
    let alpha = p.alpha;
    if alpha == 0.0 {
        return Ok(QuadResult {
            value: 0.0,
            error_estimate: 0.0,
            subdivisions_used: 0,
            converged: true,
        });
    }
    let b = p.b;
    let g = |t: f64| {
        let u = f_threshold(t, b).min(y);
        (-big_f1(t, y, p)).exp() * (u + 0.5 * u * u * (1.0 - t))
    };
    // The integrand has a kink where f1 crosses y; split there.
    let t_kink = if y.is_finite() && y > b {
        (1.0 - b / y).clamp(0.0, alpha)
    } else {
        alpha
    };
    let mut out = integrate(g, 0.0, t_kink, cfg)?;
    if t_kink < alpha {
        out.absorb(&integrate(g, t_kink, alpha, cfg)?);
    }
    Ok(out)
}

/// Conditional expected rank of stops after `alpha`, given `Y = y` (`y` may
/// be `+∞`, covering the pure-threshold specialization).
///
/// The time integral is taken in `v = F2(t)/c`, i.e. `t = 1 - (1-alpha)e^{-v}`,
/// which turns the divergent threshold near `t = 1` into an exponentially
/// decaying integrand on `[0, ∞)`. The three atom-value integrals (the
/// `1 + x(1-t)` mass below `min(f2, y)`, the past-area term `S2`, and the
/// `2 + x(1-t) + (x-y)alpha` mass between `y` and `f2`) are expanded in
/// closed form and regrouped so that every term stays finite as `v` grows.
pub fn cond_risk_post(
    y: f64,
    p: &RuleParams,
    cfg: &QuadConfig,
) -> Result<QuadResult, QuadError> {
    let alpha = p.alpha;
    let c = p.c;
    let oma = 1.0 - alpha;
    let weight = (-big_f1(alpha, y, p)).exp();
    // G is the antiderivative of S2; at f2(alpha) its log term vanishes.
    let g_at_f2alpha = c * c / (2.0 * oma);

    let integrand = |v: f64| {
        let w = (-v).exp();
        let m = oma * w; // 1 - t
        let ecv = (-c * v).exp();
        let egr = ((1.0 - c) * v).exp();
        // S2 block over [f2(alpha), f2(t)], times the measure m * e^{-cv}:
        // G(f2(t)) * m = c^2 e^v / 2 - c^2 v.
        let q = 0.5 * c * c * egr - c * c * v * ecv - g_at_f2alpha * m * ecv;
        let ym = y * m;
        if y.is_infinite() || ym >= c {
            // y above f2(t): the whole stop range pays 1 + x(1-t) only.
            let p1 = (c + 0.5 * c * c) * ecv;
            weight * (p1 + q)
        } else {
            let p1 = (ym + 0.5 * ym * ym) * ecv;
            let t3 = ((2.0 - alpha * y) * (c - ym) + 0.5 * c * c
                - 0.5 * y * y * m * (m + alpha))
                * ecv
                + alpha * c * c / (2.0 * oma) * egr;
            weight * (p1 + q + t3)
        }
    };

    // Kink where f2 crosses y, at v = ln(y (1-alpha) / c) when positive.
    let v_kink = if y.is_finite() && y * oma > c {
        (y * oma / c).ln()
    } else {
        0.0
    };
    if v_kink > 0.0 {
        let mut out = integrate(integrand, 0.0, v_kink, cfg)?;
        out.absorb(&integrate_semi_infinite(integrand, v_kink, cfg)?);
        Ok(out)
    } else {
        integrate_semi_infinite(integrand, 0.0, cfg)
    }
}

/// Expected rank of the rule, split at the switch time.
///
/// For `alpha > 0` the conditional risks are integrated against the density
/// of `Y` over `(b, ∞)`; the outer quadrature runs at tolerances 100 times
/// looser than `cfg`, which governs the inner time integrals. For
/// `alpha = 0` there is no `Y` and the single-level pure-threshold integral
/// is evaluated directly at `cfg` tolerances.
pub fn expected_rank(p: &RuleParams, cfg: &QuadConfig) -> Result<RiskBreakdown, QuadError> {
    if p.alpha == 0.0 {
        let post = cond_risk_post(f64::INFINITY, p, cfg)?;
        return Ok(RiskBreakdown {
            pre_alpha: 0.0,
            post_alpha: post.value,
            total: post.value,
            quad_error: post.error_estimate,
            converged: post.converged,
        });
    }

    let outer_cfg = cfg.relaxed(100.0);
    let inner_nonconverged = Cell::new(false);

    let weighted = |y: f64, with_post: bool| -> f64 {
        if s1(y, p) > S1_CUTOFF {
            return 0.0;
        }
        let density = y_density(y, p);
        if density == 0.0 {
            return 0.0;
        }
        let mut risk = match cond_risk_pre(y, p, cfg) {
            Ok(r) => {
                if !r.converged {
                    inner_nonconverged.set(true);
                }
                r.value
            }
            // Quadrature failures surface as NaN and are caught by the outer
            // integrator.
            Err(_) => return f64::NAN,
        };
        if with_post {
            risk += match cond_risk_post(y, p, cfg) {
                Ok(r) => {
                    if !r.converged {
                        inner_nonconverged.set(true);
                    }
                    r.value
                }
                Err(_) => return f64::NAN,
            };
        }
        risk * density
    };

    // The density has a kink where f1^{-1}(y) reaches alpha.
    let knee = f_threshold(p.alpha, p.b);

    let mut pre = integrate(|y| weighted(y, false), p.b, knee, &outer_cfg)?;
    pre.absorb(&integrate_semi_infinite(
        |y| weighted(y, false),
        knee,
        &outer_cfg,
    )?);

    let mut grand = integrate(|y| weighted(y, true), p.b, knee, &outer_cfg)?;
    grand.absorb(&integrate_semi_infinite(
        |y| weighted(y, true),
        knee,
        &outer_cfg,
    )?);

    Ok(RiskBreakdown {
        pre_alpha: pre.value,
        post_alpha: grand.value - pre.value,
        total: grand.value,
        quad_error: pre.error_estimate + grand.error_estimate,
        converged: pre.converged && grand.converged && !inner_nonconverged.get(),
    })
}
