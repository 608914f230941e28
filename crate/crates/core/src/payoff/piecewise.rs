//! Exact piecewise-affine functions on `[0, ∞)`.
//!
//! A function is stored as a strictly increasing list of breakpoints, the
//! value taken *at* each breakpoint, and one affine piece per open interval
//! between breakpoints (plus the leading piece on `[0, b₀)` and the tail on
//! `(b_last, ∞)`). Jumps are allowed at breakpoints; the point value is kept
//! separately from both one-sided limits so that strict and non-strict
//! indicators evaluate exactly.

use std::cmp::Ordering;

/// `intercept + slope * x`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Line {
    pub intercept: f64,
    pub slope: f64,
}

impl Line {
    pub const ZERO: Line = Line {
        intercept: 0.0,
        slope: 0.0,
    };

    pub fn new(intercept: f64, slope: f64) -> Self {
        Self { intercept, slope }
    }

    pub fn constant(c: f64) -> Self {
        Self::new(c, 0.0)
    }

    /// Line through `(x0, y0)` and `(x1, y1)`; `x0 != x1`.
    pub fn through(x0: f64, y0: f64, x1: f64, y1: f64) -> Self {
        let slope = (y1 - y0) / (x1 - x0);
        Self::new(y0 - slope * x0, slope)
    }

    /// Line through `(x0, y0)` with the given slope.
    pub fn with_slope(x0: f64, y0: f64, slope: f64) -> Self {
        Self::new(y0 - slope * x0, slope)
    }

    #[inline]
    pub fn eval(&self, x: f64) -> f64 {
        self.intercept + self.slope * x
    }
}

/// One breakpoint of a [`PiecewiseAffine`] function with both one-sided
/// limits and the value attained at the point itself.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Knot {
    pub x: f64,
    pub left: f64,
    pub value: f64,
    pub right: f64,
}

impl Knot {
    pub fn continuous(x: f64, value: f64) -> Self {
        Self {
            x,
            left: value,
            value,
            right: value,
        }
    }

    pub fn has_jump(&self) -> bool {
        self.left != self.right || self.value != self.left
    }

    /// Largest of the three values; what any upper majorant must clear.
    pub fn upper(&self) -> f64 {
        self.left.max(self.value).max(self.right)
    }

    /// Smallest of the three values.
    pub fn lower(&self) -> f64 {
        self.left.min(self.value).min(self.right)
    }
}

/// Canonical form of a payoff: exact breakpoints and affine pieces.
#[derive(Clone, Debug, PartialEq)]
pub struct PiecewiseAffine {
    breaks: Vec<f64>,
    at: Vec<f64>,
    pieces: Vec<Line>,
}

impl PiecewiseAffine {
    pub fn constant(c: f64) -> Self {
        Self {
            breaks: Vec::new(),
            at: Vec::new(),
            pieces: vec![Line::constant(c)],
        }
    }

    pub fn identity() -> Self {
        Self {
            breaks: Vec::new(),
            at: Vec::new(),
            pieces: vec![Line::new(0.0, 1.0)],
        }
    }

    /// Affine function `intercept + slope * x` on the whole half line.
    pub fn affine(intercept: f64, slope: f64) -> Self {
        Self {
            breaks: Vec::new(),
            at: Vec::new(),
            pieces: vec![Line::new(intercept, slope)],
        }
    }

    /// Builds a function from explicit knots.
    ///
    /// `start` is the right limit at `0` when the first knot is not at `0`
    /// (the function is affine between `0` and the first knot). Between
    /// consecutive knots the function interpolates `right_i` to
    /// `left_{i+1}`; past the last knot it continues from `right_last` with
    /// `tail_slope`. Knots must be strictly increasing in `x` and `x ≥ 0`.
    pub fn from_knots(start: f64, knots: &[Knot], tail_slope: f64) -> Self {
        debug_assert!(knots.windows(2).all(|w| w[0].x < w[1].x));
        debug_assert!(knots.iter().all(|k| k.x >= 0.0));
        if knots.is_empty() {
            return Self::affine(start, tail_slope);
        }
        let mut pieces = Vec::with_capacity(knots.len() + 1);
        let first = knots[0];
        if first.x > 0.0 {
            pieces.push(Line::through(0.0, start, first.x, first.left));
        } else {
            pieces.push(Line::constant(first.left));
        }
        for w in knots.windows(2) {
            pieces.push(Line::through(w[0].x, w[0].right, w[1].x, w[1].left));
        }
        let last = knots[knots.len() - 1];
        pieces.push(Line::with_slope(last.x, last.right, tail_slope));
        Self {
            breaks: knots.iter().map(|k| k.x).collect(),
            at: knots.iter().map(|k| k.value).collect(),
            pieces,
        }
        .simplified()
    }

    pub fn eval(&self, x: f64) -> f64 {
        let idx = self.breaks.partition_point(|&b| b < x);
        if idx < self.breaks.len() && self.breaks[idx] == x {
            self.at[idx]
        } else {
            self.pieces[idx].eval(x)
        }
    }

    /// Right limit at `x` (for `x` at a breakpoint, the value just after it).
    pub fn right_limit(&self, x: f64) -> f64 {
        let idx = self.breaks.partition_point(|&b| b <= x);
        self.pieces[idx].eval(x)
    }

    /// Left limit at `x > 0`.
    pub fn left_limit(&self, x: f64) -> f64 {
        let idx = self.breaks.partition_point(|&b| b < x);
        self.pieces[idx].eval(x)
    }

    pub fn value_at_zero(&self) -> f64 {
        self.eval(0.0)
    }

    pub fn tail_slope(&self) -> f64 {
        self.pieces[self.pieces.len() - 1].slope
    }

    pub fn breakpoints(&self) -> &[f64] {
        &self.breaks
    }

    pub fn knots(&self) -> Vec<Knot> {
        (0..self.breaks.len())
            .map(|i| {
                let x = self.breaks[i];
                Knot {
                    x,
                    left: self.pieces[i].eval(x),
                    value: self.at[i],
                    right: self.pieces[i + 1].eval(x),
                }
            })
            .collect()
    }

    /// Affine pieces with their open domains `(lo, hi)`; `hi` is `+∞` for the tail.
    pub fn pieces(&self) -> impl Iterator<Item = (f64, f64, Line)> + '_ {
        self.pieces.iter().enumerate().filter_map(move |(i, line)| {
            let lo = if i == 0 { 0.0 } else { self.breaks[i - 1] };
            let hi = self.breaks.get(i).copied().unwrap_or(f64::INFINITY);
            (hi > lo).then_some((lo, hi, *line))
        })
    }

    /// True when every affine piece is flat.
    pub fn is_step(&self) -> bool {
        self.pieces.iter().all(|l| l.slope == 0.0)
    }

    /// Largest absolute slope over all pieces.
    pub fn max_abs_slope(&self) -> f64 {
        self.pieces().map(|(_, _, l)| l.slope.abs()).fold(0.0, f64::max)
    }

    /// Infimum of the function together with the location where it is
    /// approached. Returns `None` when the tail slope is negative.
    pub fn infimum(&self) -> Option<(f64, f64)> {
        if self.tail_slope() < 0.0 {
            return None;
        }
        let mut best = (self.value_at_zero(), 0.0);
        let mut consider = |v: f64, x: f64| {
            if v < best.0 {
                best = (v, x);
            }
        };
        consider(self.right_limit(0.0), 0.0);
        for k in self.knots() {
            consider(k.lower(), k.x);
        }
        Some(best)
    }

    /// Supremum over `[0, ∞)`; `+∞` for a positive tail slope.
    pub fn supremum(&self) -> f64 {
        if self.tail_slope() > 0.0 {
            return f64::INFINITY;
        }
        let mut sup = self.value_at_zero().max(self.right_limit(0.0));
        for k in self.knots() {
            sup = sup.max(k.upper());
        }
        sup
    }

    fn merged_breaks(&self, other: &Self) -> Vec<f64> {
        let mut out = Vec::with_capacity(self.breaks.len() + other.breaks.len());
        let (mut i, mut j) = (0, 0);
        while i < self.breaks.len() || j < other.breaks.len() {
            let next = match (self.breaks.get(i), other.breaks.get(j)) {
                (Some(&a), Some(&b)) => match a.partial_cmp(&b).unwrap_or(Ordering::Equal) {
                    Ordering::Less => {
                        i += 1;
                        a
                    }
                    Ordering::Greater => {
                        j += 1;
                        b
                    }
                    Ordering::Equal => {
                        i += 1;
                        j += 1;
                        a
                    }
                },
                (Some(&a), None) => {
                    i += 1;
                    a
                }
                (None, Some(&b)) => {
                    j += 1;
                    b
                }
                (None, None) => unreachable!(),
            };
            out.push(next);
        }
        out
    }

    /// Re-express on a superset of the current breakpoints.
    fn refine(&self, breaks: &[f64]) -> (Vec<f64>, Vec<Line>) {
        let at = breaks.iter().map(|&x| self.eval(x)).collect();
        let pieces = (0..=breaks.len())
            .map(|k| {
                if k == 0 {
                    self.pieces[0]
                } else {
                    let lo = breaks[k - 1];
                    self.pieces[self.breaks.partition_point(|&b| b <= lo)]
                }
            })
            .collect();
        (at, pieces)
    }

    fn zip_linear(&self, other: &Self, line: impl Fn(Line, Line) -> Line, point: impl Fn(f64, f64) -> f64) -> Self {
        let breaks = self.merged_breaks(other);
        let (at_a, pa) = self.refine(&breaks);
        let (at_b, pb) = other.refine(&breaks);
        Self {
            at: at_a.iter().zip(&at_b).map(|(&a, &b)| point(a, b)).collect(),
            pieces: pa.iter().zip(&pb).map(|(&a, &b)| line(a, b)).collect(),
            breaks,
        }
        .simplified()
    }

    pub fn add(&self, other: &Self) -> Self {
        self.zip_linear(
            other,
            |a, b| Line::new(a.intercept + b.intercept, a.slope + b.slope),
            |a, b| a + b,
        )
    }

    pub fn sub(&self, other: &Self) -> Self {
        self.zip_linear(
            other,
            |a, b| Line::new(a.intercept - b.intercept, a.slope - b.slope),
            |a, b| a - b,
        )
    }

    pub fn scale(&self, c: f64) -> Self {
        Self {
            breaks: self.breaks.clone(),
            at: self.at.iter().map(|v| v * c).collect(),
            pieces: self
                .pieces
                .iter()
                .map(|l| Line::new(l.intercept * c, l.slope * c))
                .collect(),
        }
        .simplified()
    }

    /// Product where, on every piece, at least one factor is flat.
    /// Returns `None` if both factors slope on a common piece.
    pub fn mul(&self, other: &Self) -> Option<Self> {
        let breaks = self.merged_breaks(other);
        let (at_a, pa) = self.refine(&breaks);
        let (at_b, pb) = other.refine(&breaks);
        let mut pieces = Vec::with_capacity(pa.len());
        for (a, b) in pa.iter().zip(&pb) {
            let line = if a.slope == 0.0 {
                Line::new(a.intercept * b.intercept, a.intercept * b.slope)
            } else if b.slope == 0.0 {
                Line::new(a.intercept * b.intercept, a.slope * b.intercept)
            } else {
                return None;
            };
            pieces.push(line);
        }
        Some(
            Self {
                at: at_a.iter().zip(&at_b).map(|(&a, &b)| a * b).collect(),
                pieces,
                breaks,
            }
            .simplified(),
        )
    }

    pub fn max(&self, other: &Self) -> Self {
        self.pointwise_select(other, true)
    }

    pub fn min(&self, other: &Self) -> Self {
        self.pointwise_select(other, false)
    }

    pub fn positive_part(&self) -> Self {
        self.max(&Self::constant(0.0))
    }

    fn pointwise_select(&self, other: &Self, take_max: bool) -> Self {
        let pick = |a: f64, b: f64| if take_max { a.max(b) } else { a.min(b) };
        let better = |la: Line, lb: Line, probe: f64| {
            let (va, vb) = (la.eval(probe), lb.eval(probe));
            if (va >= vb) == take_max {
                la
            } else {
                lb
            }
        };
        let grid = self.merged_breaks(other);
        let (at_a, pa) = self.refine(&grid);
        let (at_b, pb) = other.refine(&grid);

        let mut breaks = Vec::with_capacity(grid.len());
        let mut at = Vec::with_capacity(grid.len());
        let mut pieces = Vec::with_capacity(grid.len() + 1);
        for k in 0..=grid.len() {
            let lo = if k == 0 { 0.0 } else { grid[k - 1] };
            let hi = grid.get(k).copied().unwrap_or(f64::INFINITY);
            let (la, lb) = (pa[k], pb[k]);
            if hi <= lo {
                // empty leading piece when a breakpoint sits at 0
                pieces.push(la);
            } else {
                let crossing = if la.slope != lb.slope {
                    Some((lb.intercept - la.intercept) / (la.slope - lb.slope))
                } else {
                    None
                };
                match crossing.filter(|&c| c > lo && c < hi) {
                    Some(c) => {
                        pieces.push(better(la, lb, midpoint(lo, c)));
                        breaks.push(c);
                        at.push(pick(la.eval(c), lb.eval(c)));
                        pieces.push(better(la, lb, midpoint(c, hi)));
                    }
                    None => pieces.push(better(la, lb, midpoint(lo, hi))),
                }
            }
            if k < grid.len() {
                breaks.push(grid[k]);
                at.push(pick(at_a[k], at_b[k]));
            }
        }
        Self { breaks, at, pieces }.simplified()
    }

    /// Indicator of `self > level` (`strict`) or `self ≥ level`.
    pub fn indicator(&self, level: f64, strict: bool) -> Self {
        let test = |v: f64| {
            let hit = if strict { v > level } else { v >= level };
            if hit {
                1.0
            } else {
                0.0
            }
        };
        let step = |line: Line, probe: f64| Line::constant(test(line.eval(probe)));

        let mut breaks = Vec::with_capacity(self.breaks.len());
        let mut at = Vec::with_capacity(self.breaks.len());
        let mut pieces = Vec::with_capacity(self.pieces.len());
        for (k, &line) in self.pieces.iter().enumerate() {
            let lo = if k == 0 { 0.0 } else { self.breaks[k - 1] };
            let hi = self.breaks.get(k).copied().unwrap_or(f64::INFINITY);
            if hi <= lo || line.slope == 0.0 {
                pieces.push(Line::constant(test(line.intercept)));
            } else {
                let c = (level - line.intercept) / line.slope;
                // the domain is closed at 0, so a crossing exactly at 0 counts
                let inside = if k == 0 { c >= lo && c < hi } else { c > lo && c < hi };
                if inside {
                    pieces.push(if c > lo {
                        step(line, midpoint(lo, c))
                    } else {
                        Line::constant(test(level))
                    });
                    breaks.push(c);
                    at.push(test(level));
                    pieces.push(step(line, midpoint(c, hi)));
                } else {
                    pieces.push(step(line, midpoint(lo, hi)));
                }
            }
            if k < self.breaks.len() {
                breaks.push(self.breaks[k]);
                at.push(test(self.at[k]));
            }
        }
        Self { breaks, at, pieces }.simplified()
    }

    /// Drops breakpoints where the function is affine across the point.
    fn simplified(mut self) -> Self {
        let mut i = 0;
        while i < self.breaks.len() {
            let x = self.breaks[i];
            let (l, r) = (self.pieces[i], self.pieces[i + 1]);
            let redundant = if x == 0.0 {
                self.at[i] == r.eval(0.0)
            } else {
                l == r && self.at[i] == l.eval(x)
            };
            if redundant {
                self.breaks.remove(i);
                self.at.remove(i);
                // keep the right piece when collapsing a break at 0
                self.pieces.remove(i);
            } else {
                i += 1;
            }
        }
        self
    }
}

fn midpoint(lo: f64, hi: f64) -> f64 {
    if hi.is_finite() {
        0.5 * (lo + hi)
    } else {
        lo + 1.0 + lo.abs()
    }
}
