//! Concave envelopes and the buy-and-hold super-hedge.
//!
//! The least concave majorant of a nonnegative piecewise-affine `g` on
//! `[0, ∞)` is itself piecewise affine: an upper convex hull over the knot
//! values of `g` (both one-sided limits included) followed by a ray whose
//! slope is the payoff's tail slope. The price of `g(S_T)` is `ĝ(S₀)` and the
//! hedge ratio is the right derivative `∂₊ĝ(S₀)`.

mod contact;
mod regularize;

use std::fmt::Write as _;

use thiserror::Error;

use crate::payoff::{Knot, PayoffAst, PiecewiseAffine};

pub use contact::{contact_set, contact_set_piecewise, ContactInterval};
pub use regularize::{lipschitz_regularize, regularize_piecewise, RegularizedPayoff};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum EnvelopeError {
    #[error("concave envelope is infinite (tail slope {tail_slope}); the price is +inf and the hedge is undefined")]
    Infinite { tail_slope: f64 },
    #[error("spot must be positive, got {0}")]
    InvalidSpot(f64),
    #[error("sample table is empty")]
    EmptyTable,
    #[error("sample {index} is out of order (x must be strictly increasing)")]
    Unsorted { index: usize },
    #[error("sample {index} has negative or non-finite coordinates ({x}, {value})")]
    InvalidSample { index: usize, x: f64, value: f64 },
    #[error("declared tail slope must be nonnegative, got {0}")]
    InvalidTailSlope(f64),
}

/// Piecewise-linear concave function on `[0, ∞)`.
///
/// `knots[0].0 == 0`. Segment `i` joins `knots[i]` and `knots[i + 1]` with
/// slope `slopes[i]`; past the last knot the function is a ray of slope
/// `tail_slope`.
#[derive(Clone, Debug, PartialEq)]
pub struct ConcaveEnvelope {
    knots: Vec<(f64, f64)>,
    slopes: Vec<f64>,
    tail_slope: f64,
}

impl ConcaveEnvelope {
    pub fn knots(&self) -> &[(f64, f64)] {
        &self.knots
    }

    pub fn slopes(&self) -> &[f64] {
        &self.slopes
    }

    pub fn tail_slope(&self) -> f64 {
        self.tail_slope
    }

    pub fn value(&self, x: f64) -> f64 {
        let (lx, ly) = self.knots[self.knots.len() - 1];
        if x >= lx {
            return ly + self.tail_slope * (x - lx);
        }
        let i = self.knots.partition_point(|&(kx, _)| kx <= x).saturating_sub(1);
        let (kx, ky) = self.knots[i];
        ky + self.slopes[i] * (x - kx)
    }

    /// Slope of the segment immediately to the right of `s`.
    pub fn right_derivative(&self, s: f64) -> f64 {
        let i = self.knots.partition_point(|&(kx, _)| kx <= s);
        if i >= self.knots.len() {
            self.tail_slope
        } else {
            self.slopes[i.saturating_sub(1)]
        }
    }

    /// Slope of the segment immediately to the left of `s`; `None` at `0`.
    pub fn left_derivative(&self, s: f64) -> Option<f64> {
        if s <= 0.0 {
            return None;
        }
        let i = self.knots.partition_point(|&(kx, _)| kx < s);
        Some(if i >= self.knots.len() {
            self.tail_slope
        } else {
            self.slopes[i - 1]
        })
    }

    /// Limit as `x → ∞`.
    pub fn limit(&self) -> f64 {
        if self.tail_slope > 0.0 {
            f64::INFINITY
        } else {
            self.knots[self.knots.len() - 1].1
        }
    }

    pub fn to_piecewise(&self) -> PiecewiseAffine {
        let knots: Vec<Knot> = self.knots[1..].iter().map(|&(x, y)| Knot::continuous(x, y)).collect();
        PiecewiseAffine::from_knots(self.knots[0].1, &knots, self.tail_slope)
    }

    /// CSV with columns `x,value,slope_right`; the final row `x = inf`
    /// carries the limiting value and the tail slope.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("x,value,slope_right\n");
        for (i, &(x, y)) in self.knots.iter().enumerate() {
            let slope = self.slopes.get(i).copied().unwrap_or(self.tail_slope);
            let _ = writeln!(out, "{x},{y},{slope}");
        }
        let _ = writeln!(out, "inf,{},{}", self.limit(), self.tail_slope);
        out
    }

    /// Upper hull of `points` (sorted by `x`, first at `x = 0`) followed by a
    /// ray of slope `tail_slope` from the last point.
    fn from_points(points: &[(f64, f64)], tail_slope: f64) -> Self {
        let mut hull: Vec<(f64, f64)> = Vec::with_capacity(points.len());
        for &p in points {
            while hull.len() >= 2 && !is_right_turn(hull[hull.len() - 2], hull[hull.len() - 1], p) {
                hull.pop();
            }
            hull.push(p);
        }
        // the tail is a point at infinity in direction (1, tail_slope)
        while hull.len() >= 2 && slope(hull[hull.len() - 2], hull[hull.len() - 1]) <= tail_slope {
            hull.pop();
        }
        let slopes = hull.windows(2).map(|w| slope(w[0], w[1])).collect();
        Self {
            knots: hull,
            slopes,
            tail_slope,
        }
    }
}

fn slope(a: (f64, f64), b: (f64, f64)) -> f64 {
    (b.1 - a.1) / (b.0 - a.0)
}

/// `b` strictly above the chord from `a` to `c`.
fn is_right_turn(a: (f64, f64), b: (f64, f64), c: (f64, f64)) -> bool {
    (b.0 - a.0) * (c.1 - a.1) - (b.1 - a.1) * (c.0 - a.0) < 0.0
}

/// Least concave majorant of `g` on `[0, ∞)`.
///
/// At `0` the envelope takes `max(g(0), g(0+))`; at a jump both one-sided
/// limits and the point value are hull candidates.
pub fn concave_envelope(g: &PiecewiseAffine) -> Result<ConcaveEnvelope, EnvelopeError> {
    let tail = g.tail_slope();
    if !tail.is_finite() {
        return Err(EnvelopeError::Infinite { tail_slope: tail });
    }
    let mut points = Vec::with_capacity(g.breakpoints().len() + 1);
    points.push((0.0, g.value_at_zero().max(g.right_limit(0.0))));
    for k in g.knots() {
        if k.x == 0.0 {
            // the left limit at 0 lies outside the domain
            points[0].1 = points[0].1.max(k.value.max(k.right));
        } else {
            points.push((k.x, k.upper()));
        }
    }
    Ok(ConcaveEnvelope::from_points(&points, tail))
}

/// Envelope of a tabulated payoff.
///
/// The table is read as `g` known only at the sample points (and `g(0) = 0`
/// when no sample sits at `0`), extended past the last sample with
/// `declared_tail_slope`. An infinite declared slope yields
/// [`EnvelopeError::Infinite`].
pub fn envelope_from_table(samples: &[(f64, f64)], declared_tail_slope: f64) -> Result<ConcaveEnvelope, EnvelopeError> {
    if samples.is_empty() {
        return Err(EnvelopeError::EmptyTable);
    }
    if declared_tail_slope == f64::INFINITY {
        return Err(EnvelopeError::Infinite {
            tail_slope: declared_tail_slope,
        });
    }
    if !(declared_tail_slope >= 0.0) {
        return Err(EnvelopeError::InvalidTailSlope(declared_tail_slope));
    }
    for (index, &(x, value)) in samples.iter().enumerate() {
        if !(x >= 0.0 && x.is_finite() && value >= 0.0 && value.is_finite()) {
            return Err(EnvelopeError::InvalidSample { index, x, value });
        }
        if index > 0 && x <= samples[index - 1].0 {
            return Err(EnvelopeError::Unsorted { index });
        }
    }
    let mut points = Vec::with_capacity(samples.len() + 1);
    if samples[0].0 > 0.0 {
        points.push((0.0, 0.0));
    }
    points.extend_from_slice(samples);
    Ok(ConcaveEnvelope::from_points(&points, declared_tail_slope))
}

/// Buy-and-hold super-replication: capital `price`, `delta` shares held.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct HedgePair {
    pub price: f64,
    pub delta: f64,
    pub s0: f64,
}

impl HedgePair {
    /// Terminal value of the hedge portfolio when the spot ends at `x`.
    pub fn value_at(&self, x: f64) -> f64 {
        self.price + self.delta * (x - self.s0)
    }
}

/// `(ĝ(s0), ∂₊ĝ(s0))` for a parsed payoff.
pub fn buy_and_hold_price(ast: &PayoffAst, s0: f64) -> Result<HedgePair, EnvelopeError> {
    let env = concave_envelope(&ast.to_piecewise())?;
    hedge_from_envelope(&env, s0)
}

pub fn hedge_from_envelope(env: &ConcaveEnvelope, s0: f64) -> Result<HedgePair, EnvelopeError> {
    if !(s0 > 0.0 && s0.is_finite()) {
        return Err(EnvelopeError::InvalidSpot(s0));
    }
    Ok(HedgePair {
        price: env.value(s0),
        delta: env.right_derivative(s0),
        s0,
    })
}

/// Outcome of checking `price + delta·(x − s0) ≥ g(x)`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct DominationReport {
    /// Smallest margin over the grid, the payoff knots (both one-sided
    /// limits) and `x = 0`.
    pub min_margin: f64,
    pub argmin: f64,
    /// `delta ≥ tail slope of g`, i.e. the margin does not go to `−∞`.
    pub tail_ok: bool,
    pub dominates: bool,
}

/// Margin tolerance relative to the scale of the check.
pub const DOMINATION_TOL: f64 = 1e-9;

pub fn hedge_dominates(ast: &PayoffAst, hedge: &HedgePair, grid: &[f64]) -> DominationReport {
    let g = ast.to_piecewise();
    let mut min_margin = f64::INFINITY;
    let mut argmin = f64::NAN;
    let mut scale: f64 = 1.0 + hedge.price.abs();
    let mut visit = |x: f64, gx: f64| {
        let m = hedge.value_at(x) - gx;
        scale = scale.max(gx.abs());
        if m < min_margin {
            min_margin = m;
            argmin = x;
        }
    };
    visit(0.0, ast.eval(0.0));
    visit(0.0, g.right_limit(0.0));
    for k in g.knots() {
        visit(k.x, k.left);
        visit(k.x, k.value);
        visit(k.x, k.right);
    }
    for &x in grid {
        visit(x, ast.eval(x));
    }
    let tail_ok = hedge.delta >= g.tail_slope();
    DominationReport {
        min_margin,
        argmin,
        tail_ok,
        dominates: tail_ok && min_margin >= -DOMINATION_TOL * scale,
    }
}
