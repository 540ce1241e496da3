//! Monte Carlo execution of the rank-threshold rule on sampled realizations
//! of the planar Poisson process.
//!
//! The strip `[0,1] x [0,∞)` is truncated vertically at `x_max`; atom counts
//! are Poisson with mean `x_max` and positions uniform. Replicates derive
//! their RNG stream deterministically from a master seed and the replicate
//! index, so results are bit-identical regardless of thread count.

use crate::analytic::{f_threshold, RuleParams};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Poisson};
use rayon::prelude::*;
use serde::Serialize;
use thiserror::Error;

/// One point of the process: arrival time `t` and value `x`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Atom {
    pub t: f64,
    pub x: f64,
}

/// Simulation inputs: vertical truncation, master seed, replicate count.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct SimConfig {
    pub x_max: f64,
    pub seed: u64,
    pub replicates: u64,
}

impl Default for SimConfig {
    fn default() -> Self {
        Self {
            x_max: 200.0,
            seed: 0,
            replicates: 500_000,
        }
    }
}

/// Which phase of the rule accepted the stopping atom.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum Phase {
    PreAlpha,
    PostAlpha,
}

/// Result of running the rule on one realization. `y_realized` is the level
/// `Y` of the realization, `+∞` when no atom sits above `f1` on `[0, alpha]`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum StopOutcome {
    Stopped {
        atom: Atom,
        phase: Phase,
        y_realized: f64,
    },
    /// No sampled atom satisfied the rule; possible only because of the
    /// `x_max` truncation.
    Censored { y_realized: f64 },
}

impl StopOutcome {
    pub fn stopped(&self) -> bool {
        matches!(self, StopOutcome::Stopped { .. })
    }

    pub fn y_realized(&self) -> f64 {
        match *self {
            StopOutcome::Stopped { y_realized, .. } => y_realized,
            StopOutcome::Censored { y_realized } => y_realized,
        }
    }
}

/// Loss estimator applied to a stopped replicate.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum LossMode {
    /// Relative rank plus the expected future contribution `(1-τ)X`;
    /// same mean as the raw rank with strictly smaller variance.
    #[default]
    VarianceReduced,
    /// Raw absolute rank: one plus the number of atoms strictly below `X`.
    RawRank,
}

/// Monte Carlo mean with its standard error and censoring accounting.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct MCEstimate {
    pub mean: f64,
    pub std_error: f64,
    pub n_effective: u64,
    pub censored_count: u64,
}

impl MCEstimate {
    pub fn censored_fraction(&self) -> f64 {
        let total = self.n_effective + self.censored_count;
        self.censored_count as f64 / total as f64
    }

    /// True when censoring exceeds the reporting threshold of 1e-3.
    pub fn censoring_excessive(&self) -> bool {
        self.censored_fraction() > 1e-3
    }
}

/// Paired comparison of two rules on common process realizations.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct PairedComparison {
    pub mean_first: f64,
    pub mean_second: f64,
    /// Mean of `loss(first) - loss(second)` over replicates where both stopped.
    pub mean_diff: f64,
    pub std_error_diff: f64,
    /// `mean_diff / std_error_diff`.
    pub t_statistic: f64,
    pub n_used: u64,
    pub dropped: u64,
}

#[derive(Debug, Error)]
pub enum SimError {
    #[error("replicate count must be at least 1")]
    NoReplicates,
    #[error("x_max = {x_max} does not clear the threshold f2(alpha) = {threshold}; the rule could never stop")]
    TruncationBelowThreshold { x_max: f64, threshold: f64 },
    #[error("loss requested for a censored outcome")]
    CensoredLoss,
    #[error("every replicate was censored")]
    AllCensored,
}

/// SplitMix64-style mixing of a master seed and a replicate index.
pub fn derive_seed(master: u64, index: u64) -> u64 {
    let mut z = master.wrapping_add(index.wrapping_mul(0x9E37_79B9_7F4A_7C15));
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Draw one realization of the truncated process: `N ~ Poisson(x_max)` atoms
/// uniform on `[0,1] x [0,x_max]`, sorted by arrival time.
pub fn sample_process(seed: u64, x_max: f64) -> Vec<Atom> {
    assert!(x_max > 0.0 && x_max.is_finite());
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n = Poisson::new(x_max)
        .expect("positive mean")
        .sample(&mut rng) as usize;
    let mut atoms: Vec<Atom> = (0..n)
        .map(|_| {
            let t = rng.random::<f64>();
            let x = rng.random::<f64>() * x_max;
            Atom { t, x }
        })
        .collect();
    atoms.sort_unstable_by(|a, b| a.t.total_cmp(&b.t));
    atoms
}

/// The level `Y` of a realization: the lowest atom value strictly above
/// `f1(t)` with `t <= alpha`, or `+∞` if there is none.
pub fn realize_y(atoms: &[Atom], p: &RuleParams) -> f64 {
    let alpha = p.alpha();
    let mut y = f64::INFINITY;
    for a in atoms {
        if a.t > alpha {
            break;
        }
        if a.x > f_threshold(a.t, p.b()) && a.x < y {
            y = a.x;
        }
    }
    y
}

/// Execute the stopping rule: the first atom below `min(f1, Y)` before
/// `alpha`, or below `f2` after.
pub fn apply_rule(atoms: &[Atom], p: &RuleParams) -> StopOutcome {
    let y = realize_y(atoms, p);
    let alpha = p.alpha();
    for &a in atoms {
        if a.t <= alpha {
            if a.x <= f_threshold(a.t, p.b()).min(y) {
                return StopOutcome::Stopped {
                    atom: a,
                    phase: Phase::PreAlpha,
                    y_realized: y,
                };
            }
        } else if a.x <= f_threshold(a.t, p.c()) {
            return StopOutcome::Stopped {
                atom: a,
                phase: Phase::PostAlpha,
                y_realized: y,
            };
        }
    }
    StopOutcome::Censored { y_realized: y }
}

/// Loss of a stopped replicate.
///
/// Variance-reduced mode: `I + (1-τ)X` with `I` one plus the number of atoms
/// strictly south-west of the stop. Raw mode: one plus the number of atoms
/// strictly below `X` over the whole horizon.
pub fn loss_of(atoms: &[Atom], outcome: &StopOutcome, mode: LossMode) -> Result<f64, SimError> {
    let StopOutcome::Stopped { atom, .. } = *outcome else {
        return Err(SimError::CensoredLoss);
    };
    match mode {
        LossMode::VarianceReduced => {
            let south_west = atoms
                .iter()
                .filter(|a| a.t < atom.t && a.x < atom.x)
                .count();
            Ok((1 + south_west) as f64 + (1.0 - atom.t) * atom.x)
        }
        LossMode::RawRank => {
            let south = atoms.iter().filter(|a| a.x < atom.x).count();
            Ok((1 + south) as f64)
        }
    }
}

fn validate(p: &RuleParams, cfg: &SimConfig) -> Result<(), SimError> {
    if cfg.replicates == 0 {
        return Err(SimError::NoReplicates);
    }
    let threshold = p.c() / (1.0 - p.alpha());
    if cfg.x_max <= threshold {
        return Err(SimError::TruncationBelowThreshold {
            x_max: cfg.x_max,
            threshold,
        });
    }
    Ok(())
}

fn summarize(losses: &[Option<f64>]) -> Result<MCEstimate, SimError> {
    let mut n = 0u64;
    let mut sum = 0.0;
    for l in losses.iter().flatten() {
        n += 1;
        sum += l;
    }
    if n == 0 {
        return Err(SimError::AllCensored);
    }
    let mean = sum / n as f64;
    let mut ss = 0.0;
    for l in losses.iter().flatten() {
        let d = l - mean;
        ss += d * d;
    }
    let std_error = if n > 1 {
        (ss / (n - 1) as f64 / n as f64).sqrt()
    } else {
        0.0
    };
    Ok(MCEstimate {
        mean,
        std_error,
        n_effective: n,
        censored_count: losses.len() as u64 - n,
    })
}

/// Estimate the expected rank of the rule by independent replicates.
///
/// Censored replicates are excluded from the mean and counted; the reduction
/// runs in replicate-index order, so the estimate does not depend on how
/// replicates were scheduled across threads.
pub fn mc_estimate(p: &RuleParams, cfg: &SimConfig) -> Result<MCEstimate, SimError> {
    mc_estimate_with_mode(p, cfg, LossMode::default())
}

/// `mc_estimate` with an explicit loss estimator.
pub fn mc_estimate_with_mode(
    p: &RuleParams,
    cfg: &SimConfig,
    mode: LossMode,
) -> Result<MCEstimate, SimError> {
    validate(p, cfg)?;
    let losses: Vec<Option<f64>> = (0..cfg.replicates)
        .into_par_iter()
        .map(|i| {
            let atoms = sample_process(derive_seed(cfg.seed, i), cfg.x_max);
            let outcome = apply_rule(&atoms, p);
            loss_of(&atoms, &outcome, mode).ok()
        })
        .collect();
    summarize(&losses)
}

/// Run two rules on common realizations and compare their mean losses.
///
/// Replicates where either rule censors are dropped from the comparison.
pub fn mc_compare(
    first: &RuleParams,
    second: &RuleParams,
    cfg: &SimConfig,
) -> Result<PairedComparison, SimError> {
    validate(first, cfg)?;
    validate(second, cfg)?;
    let pairs: Vec<Option<(f64, f64)>> = (0..cfg.replicates)
        .into_par_iter()
        .map(|i| {
            let atoms = sample_process(derive_seed(cfg.seed, i), cfg.x_max);
            let l1 = loss_of(&atoms, &apply_rule(&atoms, first), LossMode::VarianceReduced);
            let l2 = loss_of(&atoms, &apply_rule(&atoms, second), LossMode::VarianceReduced);
            match (l1, l2) {
                (Ok(a), Ok(b)) => Some((a, b)),
                _ => None,
            }
        })
        .collect();

    let mut n = 0u64;
    let (mut s1, mut s2, mut sd) = (0.0, 0.0, 0.0);
    for (a, b) in pairs.iter().flatten() {
        n += 1;
        s1 += a;
        s2 += b;
        sd += a - b;
    }
    if n == 0 {
        return Err(SimError::AllCensored);
    }
    let mean_diff = sd / n as f64;
    let mut ss = 0.0;
    for (a, b) in pairs.iter().flatten() {
        let d = (a - b) - mean_diff;
        ss += d * d;
    }
    let std_error_diff = if n > 1 {
        (ss / (n - 1) as f64 / n as f64).sqrt()
    } else {
        0.0
    };
    Ok(PairedComparison {
        mean_first: s1 / n as f64,
        mean_second: s2 / n as f64,
        mean_diff,
        std_error_diff,
        t_statistic: if std_error_diff > 0.0 {
            mean_diff / std_error_diff
        } else {
            0.0
        },
        n_used: n,
        dropped: cfg.replicates - n,
    })
}
