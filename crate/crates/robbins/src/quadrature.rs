//! Adaptive one-dimensional quadrature.
//!
//! Globally adaptive Gauss-Kronrod (G7, K15) integration: the interval with
//! the largest error estimate is bisected until the summed error estimate
//! meets the requested tolerance or the subdivision budget runs out.
//! Semi-infinite integrals are mapped onto `[0, 1)` by the rational
//! substitution `y = a + u / (1 - u)`.

use thiserror::Error;

/// Abscissae of the 15-point Kronrod rule on `[-1, 1]` (positive half).
const XGK: [f64; 8] = [
    0.991_455_371_120_812_639_206_854_697_526_33,
    0.949_107_912_342_758_524_526_189_684_047_85,
    0.864_864_423_359_769_072_789_712_788_640_93,
    0.741_531_185_599_394_439_863_864_773_280_79,
    0.586_087_235_467_691_130_294_144_838_258_73,
    0.405_845_151_377_397_166_906_606_412_076_96,
    0.207_784_955_007_898_467_600_689_403_773_24,
    0.0,
];

/// Weights of the 15-point Kronrod rule, matching `XGK`.
const WGK: [f64; 8] = [
    0.022_935_322_010_529_224_963_732_008_058_97,
    0.063_092_092_629_978_553_290_700_663_189_20,
    0.104_790_010_322_250_183_839_876_322_541_52,
    0.140_653_259_715_525_918_745_189_590_510_24,
    0.169_004_726_639_267_902_826_583_426_598_55,
    0.190_350_578_064_785_409_913_256_402_421_01,
    0.204_432_940_075_298_892_414_161_999_234_65,
    0.209_482_141_084_727_828_012_999_174_891_71,
];

/// Weights of the embedded 7-point Gauss rule (odd Kronrod abscissae).
const WG: [f64; 4] = [
    0.129_484_966_168_869_693_270_611_432_679_08,
    0.279_705_391_489_276_667_901_467_771_423_78,
    0.381_830_050_505_118_944_950_369_775_488_98,
    0.417_959_183_673_469_387_755_102_040_816_33,
];

/// Tolerances and subdivision budget for adaptive integration.
#[derive(Debug, Clone, Copy)]
pub struct QuadConfig {
    /// Absolute tolerance on the integral value.
    pub abs_tol: f64,
    /// Relative tolerance on the integral value.
    pub rel_tol: f64,
    /// Maximum number of interval bisections before giving up.
    pub max_subdivisions: usize,
}

impl Default for QuadConfig {
    fn default() -> Self {
        Self {
            abs_tol: 1e-10,
            rel_tol: 1e-10,
            max_subdivisions: 2000,
        }
    }
}

impl QuadConfig {
    /// A copy with both tolerances loosened by `factor`, for outer integrals
    /// whose integrand is itself computed by quadrature.
    pub fn relaxed(&self, factor: f64) -> Self {
        Self {
            abs_tol: self.abs_tol * factor,
            rel_tol: self.rel_tol * factor,
            max_subdivisions: self.max_subdivisions,
        }
    }

    fn validate(&self) -> Result<(), QuadError> {
        if !(self.abs_tol > 0.0) || !(self.rel_tol > 0.0) || self.max_subdivisions == 0 {
            return Err(QuadError::InvalidConfig);
        }
        Ok(())
    }
}

/// Outcome of an adaptive integration.
#[derive(Debug, Clone, Copy)]
pub struct QuadResult {
    /// Estimate of the integral.
    pub value: f64,
    /// Estimated absolute error of `value`.
    pub error_estimate: f64,
    /// Number of bisections performed.
    pub subdivisions_used: usize,
    /// False when the subdivision budget ran out before the tolerance was met.
    pub converged: bool,
}

impl QuadResult {
    fn zero() -> Self {
        Self {
            value: 0.0,
            error_estimate: 0.0,
            subdivisions_used: 0,
            converged: true,
        }
    }

    /// Accumulate a piece of a split integral into `self`.
    pub fn absorb(&mut self, other: &QuadResult) {
        self.value += other.value;
        self.error_estimate += other.error_estimate;
        self.subdivisions_used += other.subdivisions_used;
        self.converged &= other.converged;
    }
}

#[derive(Debug, Error)]
pub enum QuadError {
    #[error("integrand returned a non-finite value near x = {x}")]
    NonFiniteIntegrand { x: f64 },
    #[error("invalid integration interval [{a}, {b}]")]
    InvalidInterval { a: f64, b: f64 },
    #[error("tolerances must be positive and the subdivision budget nonzero")]
    InvalidConfig,
}

#[derive(Debug, Clone, Copy)]
struct Segment {
    a: f64,
    b: f64,
    value: f64,
    error: f64,
}

/// One G7/K15 evaluation over `[a, b]` with a QUADPACK-style error estimate.
fn gk15<F: Fn(f64) -> f64>(f: &F, a: f64, b: f64) -> Result<(f64, f64), QuadError> {
    let center = 0.5 * (a + b);
    let half = 0.5 * (b - a);

    let f_center = f(center);
    let mut kronrod = f_center * WGK[7];
    // The center is also the middle abscissa of the embedded 7-point rule.
    let mut gauss = f_center * WG[3];
    let mut res_abs = kronrod.abs();

    let mut fv = [0.0f64; 15];
    fv[7] = f_center;

    for j in 0..7 {
        let dx = half * XGK[j];
        let f1 = f(center - dx);
        let f2 = f(center + dx);
        fv[j] = f1;
        fv[14 - j] = f2;
        let sum = f1 + f2;
        kronrod += WGK[j] * sum;
        res_abs += WGK[j] * (f1.abs() + f2.abs());
        if j % 2 == 1 {
            gauss += WG[j / 2] * sum;
        }
    }

    let mean = 0.5 * kronrod;
    let mut res_asc = WGK[7] * (f_center - mean).abs();
    for j in 0..7 {
        res_asc += WGK[j] * ((fv[j] - mean).abs() + (fv[14 - j] - mean).abs());
    }

    let value = kronrod * half;
    res_abs *= half.abs();
    res_asc *= half.abs();

    let mut err = ((kronrod - gauss) * half).abs();
    if res_asc != 0.0 && err != 0.0 {
        let scale = (200.0 * err / res_asc).powf(1.5);
        err = if scale < 1.0 { res_asc * scale } else { res_asc };
    }
    let floor = 50.0 * f64::EPSILON * res_abs;
    if floor > err {
        err = floor;
    }

    if !value.is_finite() || !err.is_finite() {
        return Err(QuadError::NonFiniteIntegrand { x: center });
    }
    Ok((value, err))
}

/// Adaptive integral of `f` over the finite interval `[a, b]`.
///
/// The result carries `converged = false` when the subdivision budget was
/// exhausted first; the value is still the best available estimate. A NaN
/// or infinite integrand value is an error.
pub fn integrate<F: Fn(f64) -> f64>(
    f: F,
    a: f64,
    b: f64,
    cfg: &QuadConfig,
) -> Result<QuadResult, QuadError> {
    cfg.validate()?;
    if !a.is_finite() || !b.is_finite() || a > b {
        return Err(QuadError::InvalidInterval { a, b });
    }
    if a == b {
        return Ok(QuadResult::zero());
    }

    let (value, error) = gk15(&f, a, b)?;
    let mut segments = vec![Segment { a, b, value, error }];
    let mut splits = 0usize;

    loop {
        let mut total = 0.0;
        let mut total_err = 0.0;
        let mut worst = 0usize;
        let mut worst_err = -1.0;
        for (i, s) in segments.iter().enumerate() {
            total += s.value;
            total_err += s.error;
            if s.error > worst_err {
                worst_err = s.error;
                worst = i;
            }
        }

        let tol = cfg.abs_tol.max(cfg.rel_tol * total.abs());
        if total_err <= tol {
            return Ok(QuadResult {
                value: total,
                error_estimate: total_err,
                subdivisions_used: splits,
                converged: true,
            });
        }
        if splits >= cfg.max_subdivisions {
            return Ok(QuadResult {
                value: total,
                error_estimate: total_err,
                subdivisions_used: splits,
                converged: false,
            });
        }

        let seg = segments[worst];
        let mid = 0.5 * (seg.a + seg.b);
        // Interval at floating-point resolution: no further progress possible.
        if mid <= seg.a || mid >= seg.b {
            return Ok(QuadResult {
                value: total,
                error_estimate: total_err,
                subdivisions_used: splits,
                converged: false,
            });
        }

        let (lv, le) = gk15(&f, seg.a, mid)?;
        let (rv, re) = gk15(&f, mid, seg.b)?;
        segments[worst] = Segment {
            a: seg.a,
            b: mid,
            value: lv,
            error: le,
        };
        segments.push(Segment {
            a: mid,
            b: seg.b,
            value: rv,
            error: re,
        });
        splits += 1;
    }
}

/// Adaptive integral of `f` over `[a, ∞)` for an integrand decaying to zero,
/// via the substitution `y = a + u / (1 - u)` with `u ∈ [0, 1)`.
pub fn integrate_semi_infinite<F: Fn(f64) -> f64>(
    f: F,
    a: f64,
    cfg: &QuadConfig,
) -> Result<QuadResult, QuadError> {
    if !a.is_finite() {
        return Err(QuadError::InvalidInterval { a, b: f64::INFINITY });
    }
    let g = |u: f64| {
        let omu = 1.0 - u;
        if omu <= 0.0 {
            return 0.0;
        }
        let fy = f(a + u / omu);
        // An exact zero from the decayed tail must not be scaled by the
        // unbounded Jacobian.
        if fy == 0.0 {
            0.0
        } else {
            fy / (omu * omu)
        }
    };
    integrate(g, 0.0, 1.0, cfg)
}
