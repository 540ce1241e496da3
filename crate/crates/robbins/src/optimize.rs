//! Derivative-free minimization of the expected rank over `(alpha, b, c)`.
//!
//! Nelder-Mead with box constraints enforced by clamping, optionally seeded
//! by a coarse grid scan that guards against the `alpha = 0` branch of the
//! objective trapping the simplex.

use crate::analytic::{expected_rank, RuleParams};
use crate::quadrature::QuadConfig;
use rayon::prelude::*;
use serde::Serialize;

/// Feasible box, per coordinate: alpha in [0, 0.99], b in (0, 50], c in (1.001, 50].
const ALPHA_BOUNDS: (f64, f64) = (0.0, 0.99);
const B_BOUNDS: (f64, f64) = (1e-6, 50.0);
const C_BOUNDS: (f64, f64) = (1.001, 50.0);

/// Coarse grid used by the refinement pre-scan.
const GRID_ALPHA: [f64; 7] = [0.0, 0.1, 0.2, 0.3, 0.4, 0.5, 0.6];
const GRID_B: [f64; 6] = [1.4, 1.6, 1.8, 2.0, 2.2, 2.4];
const GRID_C: [f64; 5] = [1.6, 1.8, 2.0, 2.2, 2.4];

/// Settings for `nelder_mead` and `optimize_rule`.
#[derive(Debug, Clone)]
pub struct OptConfig {
    pub start: RuleParams,
    /// Edge length of the initial simplex in each coordinate.
    pub simplex_scale: f64,
    /// Convergence threshold on the value spread across the simplex.
    pub f_tol: f64,
    /// Convergence threshold on the simplex diameter.
    pub x_tol: f64,
    pub max_evals: usize,
    /// Scan a coarse parameter grid before the simplex iteration.
    pub grid_refine: bool,
    /// Pin alpha to the given value; at exactly 0 the search runs over `c`
    /// alone, since `b` does not enter the pure-threshold objective.
    pub fixed_alpha: Option<f64>,
}

impl Default for OptConfig {
    fn default() -> Self {
        Self {
            start: RuleParams::new(0.4, 2.0, 2.0).expect("valid default start"),
            simplex_scale: 0.05,
            f_tol: 1e-6,
            x_tol: 1e-5,
            max_evals: 2000,
            grid_refine: true,
            fixed_alpha: None,
        }
    }
}

/// Best point found, its value, and the search trace.
#[derive(Debug, Clone, Serialize)]
pub struct OptResult {
    pub best: RuleParams,
    pub value: f64,
    pub evals: usize,
    pub converged: bool,
    /// Best-so-far records; values are nonincreasing along the trace.
    pub trace: Vec<(RuleParams, f64)>,
}

/// Which of the three coordinates the simplex actually moves.
#[derive(Debug, Clone, Copy)]
struct SearchSpace {
    fixed_alpha: Option<f64>,
}

impl SearchSpace {
    fn new(fixed_alpha: Option<f64>) -> Self {
        Self { fixed_alpha }
    }

    fn dims(&self) -> usize {
        match self.fixed_alpha {
            None => 3,
            Some(a) if a == 0.0 => 1,
            Some(_) => 2,
        }
    }

    fn bounds(&self, dim: usize) -> (f64, f64) {
        match (self.fixed_alpha, dim) {
            (None, 0) => ALPHA_BOUNDS,
            (None, 1) => B_BOUNDS,
            (None, 2) => C_BOUNDS,
            (Some(a), 0) if a == 0.0 => C_BOUNDS,
            (Some(_), 0) => B_BOUNDS,
            (Some(_), 1) => C_BOUNDS,
            _ => unreachable!("dimension out of range"),
        }
    }

    fn to_vec(&self, p: &RuleParams) -> Vec<f64> {
        match self.fixed_alpha {
            None => vec![p.alpha(), p.b(), p.c()],
            Some(a) if a == 0.0 => vec![p.c()],
            Some(_) => vec![p.b(), p.c()],
        }
    }

    fn to_params(&self, x: &[f64], fallback: &RuleParams) -> RuleParams {
        let clamp = |v: f64, (lo, hi): (f64, f64)| v.clamp(lo, hi);
        let (alpha, b, c) = match self.fixed_alpha {
            None => (
                clamp(x[0], ALPHA_BOUNDS),
                clamp(x[1], B_BOUNDS),
                clamp(x[2], C_BOUNDS),
            ),
            Some(a) if a == 0.0 => (0.0, fallback.b(), clamp(x[0], C_BOUNDS)),
            Some(a) => (a, clamp(x[0], B_BOUNDS), clamp(x[1], C_BOUNDS)),
        };
        RuleParams::new(alpha, b, c).expect("clamped parameters are valid")
    }
}

struct Tracker<'a, F: Fn(&RuleParams) -> f64> {
    objective: &'a F,
    evals: usize,
    max_evals: usize,
    best: Option<(RuleParams, f64)>,
    trace: Vec<(RuleParams, f64)>,
}

impl<'a, F: Fn(&RuleParams) -> f64> Tracker<'a, F> {
    fn new(objective: &'a F, max_evals: usize) -> Self {
        Self {
            objective,
            evals: 0,
            max_evals,
            best: None,
            trace: Vec::new(),
        }
    }

    fn budget_left(&self) -> bool {
        self.evals < self.max_evals
    }

    fn eval(&mut self, p: &RuleParams) -> f64 {
        self.evals += 1;
        let v = (self.objective)(p);
        self.record(p, v);
        v
    }

    fn record(&mut self, p: &RuleParams, v: f64) {
        if self.best.map_or(true, |(_, bv)| v < bv) {
            self.best = Some((*p, v));
            self.trace.push((*p, v));
        }
    }
}

/// Nelder-Mead simplex minimization with clamped box constraints.
///
/// Converged means both the simplex diameter fell below `x_tol` and the
/// value spread below `f_tol`; running out of evaluations returns the best
/// point seen so far with `converged = false`.
pub fn nelder_mead<F: Fn(&RuleParams) -> f64>(objective: F, cfg: &OptConfig) -> OptResult {
    let space = SearchSpace::new(cfg.fixed_alpha);
    let mut tracker = Tracker::new(&objective, cfg.max_evals);
    let result = nm_inner(&space, cfg, &mut tracker);
    let (best, value) = tracker.best.expect("at least one evaluation");
    OptResult {
        best,
        value,
        evals: tracker.evals,
        converged: result,
        trace: tracker.trace,
    }
}

fn nm_inner<F: Fn(&RuleParams) -> f64>(
    space: &SearchSpace,
    cfg: &OptConfig,
    tracker: &mut Tracker<'_, F>,
) -> bool {
    let n = space.dims();
    let start = space.to_vec(&space.to_params(&space.to_vec(&cfg.start), &cfg.start));

    // Initial simplex: start plus one step along each coordinate, stepping
    // inward when the boundary is in the way.
    let mut vertices: Vec<Vec<f64>> = vec![start.clone()];
    for d in 0..n {
        let (lo, hi) = space.bounds(d);
        let mut v = start.clone();
        v[d] = if v[d] + cfg.simplex_scale <= hi {
            v[d] + cfg.simplex_scale
        } else {
            (v[d] - cfg.simplex_scale).max(lo)
        };
        vertices.push(v);
    }

    let mut values = Vec::with_capacity(n + 1);
    for v in &vertices {
        if !tracker.budget_left() {
            return false;
        }
        values.push(tracker.eval(&space.to_params(v, &cfg.start)));
    }

    let (refl, expa, contr, shrink) = (1.0, 2.0, 0.5, 0.5);
    loop {
        // Order the simplex: best first, worst last.
        let mut order: Vec<usize> = (0..=n).collect();
        order.sort_by(|&i, &j| values[i].total_cmp(&values[j]));
        let best = order[0];
        let second_worst = order[n - 1];
        let worst = order[n];

        let diameter = (0..=n)
            .filter(|&i| i != best)
            .map(|i| {
                vertices[i]
                    .iter()
                    .zip(&vertices[best])
                    .map(|(a, b)| (a - b).abs())
                    .fold(0.0, f64::max)
            })
            .fold(0.0, f64::max);
        if diameter < cfg.x_tol && (values[worst] - values[best]).abs() < cfg.f_tol {
            return true;
        }
        if !tracker.budget_left() {
            return false;
        }

        let mut centroid = vec![0.0; n];
        for (i, v) in vertices.iter().enumerate() {
            if i != worst {
                for d in 0..n {
                    centroid[d] += v[d] / n as f64;
                }
            }
        }

        let clamp_point = |x: Vec<f64>| -> Vec<f64> {
            x.into_iter()
                .enumerate()
                .map(|(d, v)| {
                    let (lo, hi) = space.bounds(d);
                    v.clamp(lo, hi)
                })
                .collect()
        };
        let point = |coef: f64| -> Vec<f64> {
            clamp_point(
                (0..n)
                    .map(|d| centroid[d] + coef * (centroid[d] - vertices[worst][d]))
                    .collect(),
            )
        };

        let reflected = point(refl);
        let f_reflected = tracker.eval(&space.to_params(&reflected, &cfg.start));

        if f_reflected < values[best] {
            if tracker.budget_left() {
                let expanded = point(expa);
                let f_expanded = tracker.eval(&space.to_params(&expanded, &cfg.start));
                if f_expanded < f_reflected {
                    vertices[worst] = expanded;
                    values[worst] = f_expanded;
                    continue;
                }
            }
            vertices[worst] = reflected;
            values[worst] = f_reflected;
        } else if f_reflected < values[second_worst] {
            vertices[worst] = reflected;
            values[worst] = f_reflected;
        } else {
            if tracker.budget_left() {
                let contracted = point(-contr);
                let f_contracted = tracker.eval(&space.to_params(&contracted, &cfg.start));
                if f_contracted < values[worst] {
                    vertices[worst] = contracted;
                    values[worst] = f_contracted;
                    continue;
                }
            }
            // Shrink toward the best vertex.
            for i in 0..=n {
                if i == best {
                    continue;
                }
                for d in 0..n {
                    vertices[i][d] =
                        vertices[best][d] + shrink * (vertices[i][d] - vertices[best][d]);
                }
                if !tracker.budget_left() {
                    return false;
                }
                values[i] = tracker.eval(&space.to_params(&vertices[i], &cfg.start));
            }
        }
    }
}

/// Minimize the analytic expected rank, optionally after a coarse grid scan.
///
/// The start point is always evaluated first, so with an exhausted budget
/// the result is the objective at the start. Grid points are evaluated in
/// parallel; the scan and the subsequent simplex share the evaluation budget.
pub fn optimize_rule(cfg: &OptConfig) -> OptResult {
    let quad = QuadConfig::default();
    let objective = move |p: &RuleParams| match expected_rank(p, &quad) {
        Ok(r) => r.total,
        Err(_) => f64::INFINITY,
    };

    let space = SearchSpace::new(cfg.fixed_alpha);
    let start = space.to_params(&space.to_vec(&cfg.start), &cfg.start);

    let mut tracker = Tracker::new(&objective, cfg.max_evals);
    tracker.eval(&start);

    if cfg.grid_refine && tracker.budget_left() {
        let grid = grid_points(&space, &start);
        let budget = cfg.max_evals - tracker.evals;
        let take = budget.min(grid.len());
        let values: Vec<f64> = grid[..take].par_iter().map(|p| objective(p)).collect();
        tracker.evals += take;
        // Record in grid order so the trace stays deterministic.
        let mut best_grid: Option<(usize, f64)> = None;
        for (i, &v) in values.iter().enumerate() {
            if best_grid.map_or(true, |(_, bv)| v < bv) {
                best_grid = Some((i, v));
            }
        }
        if let Some((i, v)) = best_grid {
            tracker.record(&grid[i], v);
        }
    }

    if !tracker.budget_left() {
        let (best, value) = tracker.best.expect("start point evaluated");
        return OptResult {
            best,
            value,
            evals: tracker.evals,
            converged: false,
            trace: tracker.trace,
        };
    }

    let nm_cfg = OptConfig {
        start: tracker.best.expect("start point evaluated").0,
        max_evals: cfg.max_evals - tracker.evals,
        ..cfg.clone()
    };
    let mut nm = nelder_mead(&objective, &nm_cfg);

    // Merge accounting: the pre-scan evaluations count toward the total and
    // the combined trace stays nonincreasing.
    let mut trace = tracker.trace;
    let threshold = trace.last().map_or(f64::INFINITY, |&(_, v)| v);
    trace.extend(nm.trace.drain(..).filter(|&(_, v)| v < threshold));
    let (best, value) = if nm.value < threshold {
        (nm.best, nm.value)
    } else {
        *trace.last().expect("nonempty trace")
    };
    OptResult {
        best,
        value,
        evals: tracker.evals + nm.evals,
        converged: nm.converged,
        trace,
    }
}

fn grid_points(space: &SearchSpace, start: &RuleParams) -> Vec<RuleParams> {
    let mut points = Vec::new();
    match space.fixed_alpha {
        None => {
            for &a in &GRID_ALPHA {
                for &b in &GRID_B {
                    for &c in &GRID_C {
                        points.push(space.to_params(&[a, b, c], start));
                    }
                }
            }
        }
        Some(a) if a == 0.0 => {
            for &c in &GRID_C {
                points.push(space.to_params(&[c], start));
            }
        }
        Some(_) => {
            for &b in &GRID_B {
                for &c in &GRID_C {
                    points.push(space.to_params(&[b, c], start));
                }
            }
        }
    }
    points
}
