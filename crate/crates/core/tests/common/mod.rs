//! Independent oracles shared by the integration tests.
//!
//! Nothing here calls into the envelope code: the brute-force envelope is
//! built straight from raw knot data, and the lognormal call price from the
//! normal CDF.

#![allow(dead_code)]

use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use statrs::distribution::{ContinuousCDF, Normal};
use superhedge::payoff::{Knot, PiecewiseAffine};

/// Piecewise-affine payoff given by raw knots, as fed to
/// [`PiecewiseAffine::from_knots`].
#[derive(Clone, Debug)]
pub struct RawPayoff {
    pub start: f64,
    pub knots: Vec<Knot>,
    pub tail: f64,
}

impl RawPayoff {
    pub fn to_piecewise(&self) -> PiecewiseAffine {
        PiecewiseAffine::from_knots(self.start, &self.knots, self.tail)
    }

    /// Hull candidates: the supremum of the payoff near each knot and at 0.
    pub fn candidates(&self) -> Vec<(f64, f64)> {
        let mut pts = Vec::with_capacity(self.knots.len() + 1);
        match self.knots.first() {
            Some(k) if k.x == 0.0 => pts.push((0.0, k.value.max(k.right))),
            _ => pts.push((0.0, self.start)),
        }
        for k in &self.knots {
            if k.x > 0.0 {
                pts.push((k.x, k.left.max(k.value).max(k.right)));
            }
        }
        pts
    }

    /// Scale for relative comparisons on `[0, x_max]`.
    pub fn scale(&self, x_max: f64) -> f64 {
        let top = self.candidates().iter().fold(0.0f64, |m, p| m.max(p.1.abs()));
        1.0 + top + self.tail.abs() * x_max
    }

    pub fn last_x(&self) -> f64 {
        self.knots.last().map_or(0.0, |k| k.x)
    }

    /// Knots, midpoints, points past the last knot and random points.
    pub fn probe_points(&self, rng: &mut impl Rng) -> Vec<f64> {
        let mut xs = vec![0.0];
        let mut prev = 0.0;
        for k in &self.knots {
            xs.push(k.x);
            xs.push(0.5 * (prev + k.x));
            prev = k.x;
        }
        let last = self.last_x().max(1.0);
        xs.extend([last * 1.5, last * 3.0, last * 10.0]);
        xs.extend((0..20).map(|_| rng.random_range(0.0..last * 2.0)));
        xs
    }
}

/// `ĝ(x)` as the largest chord or tail ray through the candidate points.
///
/// Every concave majorant lies above each chord between two hull
/// candidates, and above each ray of slope `tail` leaving a candidate to
/// the right (its slope can never fall below the payoff's growth rate).
/// The largest such value is attained, so it is the envelope. O(n²) per
/// query.
pub fn chord_envelope(points: &[(f64, f64)], tail: f64, x: f64) -> f64 {
    let mut best = f64::NEG_INFINITY;
    for (i, &(xi, yi)) in points.iter().enumerate() {
        if xi <= x {
            best = best.max(yi + tail * (x - xi));
        }
        for &(xj, yj) in &points[i..] {
            if xi <= x && x <= xj {
                let v = if xj == xi {
                    yi.max(yj)
                } else {
                    yi + (yj - yi) * (x - xi) / (xj - xi)
                };
                best = best.max(v);
            }
        }
    }
    best
}

/// Right derivative of the chord oracle by a one-sided difference short
/// enough to stay inside one hull segment.
pub fn chord_right_slope(points: &[(f64, f64)], tail: f64, x: f64) -> f64 {
    let gap = points
        .iter()
        .map(|p| p.0 - x)
        .filter(|d| *d > 0.0)
        .fold(1.0f64, f64::min);
    let h = 1e-4 * gap;
    (chord_envelope(points, tail, x + h) - chord_envelope(points, tail, x)) / h
}

fn knot_from_parts(x: f64, jump: bool, left: f64, value: f64, right: f64) -> Knot {
    if jump {
        Knot { x, left, value, right }
    } else {
        Knot {
            x,
            left: value,
            value,
            right: value,
        }
    }
}

/// A random nonnegative payoff with up to `max_knots` knots, roughly a
/// third of them jumps, and a nonnegative tail slope.
pub fn random_payoff(rng: &mut impl Rng, max_knots: usize) -> RawPayoff {
    let n = rng.random_range(0..=max_knots);
    let mut x = if rng.random_bool(0.2) {
        0.0
    } else {
        rng.random_range(0.05..5.0)
    };
    let mut knots = Vec::with_capacity(n);
    for _ in 0..n {
        let jump = rng.random_bool(0.35);
        knots.push(knot_from_parts(
            x,
            jump,
            rng.random_range(0.0..10.0),
            rng.random_range(0.0..10.0),
            rng.random_range(0.0..10.0),
        ));
        x += rng.random_range(0.05..5.0);
    }
    RawPayoff {
        start: rng.random_range(0.0..10.0),
        knots,
        tail: if rng.random_bool(0.3) {
            0.0
        } else {
            rng.random_range(0.0..3.0)
        },
    }
}

pub fn random_payoffs(seed: u64, count: usize, max_knots: usize) -> Vec<RawPayoff> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..count).map(|_| random_payoff(&mut rng, max_knots)).collect()
}

/// Proptest strategy over the same family of payoffs.
pub fn raw_payoff_strategy(max_knots: usize) -> impl Strategy<Value = RawPayoff> {
    let knot = (0.05f64..5.0, any::<bool>(), 0.0f64..10.0, 0.0f64..10.0, 0.0f64..10.0);
    (
        proptest::collection::vec(knot, 0..=max_knots),
        0.0f64..10.0,
        prop_oneof![Just(0.0), 0.0f64..3.0],
        any::<bool>(),
    )
        .prop_map(|(parts, start, tail, at_zero)| {
            let mut x = 0.0;
            let knots = parts
                .into_iter()
                .enumerate()
                .map(|(i, (gap, jump, l, v, r))| {
                    if i > 0 || !at_zero {
                        x += gap;
                    }
                    knot_from_parts(x, jump, l, v, r)
                })
                .collect();
            RawPayoff { start, knots, tail }
        })
}

/// `E[(S_T − K)^+]` for a driftless lognormal spot.
pub fn lognormal_call(s0: f64, strike: f64, sigma: f64, horizon: f64) -> f64 {
    let n = Normal::standard();
    let v = sigma * horizon.sqrt();
    let d1 = ((s0 / strike).ln() + 0.5 * v * v) / v;
    s0 * n.cdf(d1) - strike * n.cdf(d1 - v)
}

/// Claims with textbook super-replication prices: text, spot, price, hedge ratio.
pub const CLASSICAL: [(&str, &str, f64, f64, f64); 5] = [
    ("call", "pos(x-100)", 100.0, 100.0, 1.0),
    ("put", "pos(100-x)", 80.0, 100.0, 0.0),
    ("digital", "ind_gt(x,2)", 1.0, 0.5, 0.5),
    ("butterfly", "pos(x-90)-2*pos(x-100)+pos(x-110)", 100.0, 10.0, 0.0),
    ("concave", "min(x,50)", 30.0, 30.0, 1.0),
];

pub const BUTTERFLY: &str = "pos(x-90)-2*pos(x-100)+pos(x-110)";
pub const DIGITAL: &str = "ind_gt(x,2)";

/// Sample mean, sample variance and the mean's standard error.
pub fn moments(xs: &[f64]) -> (f64, f64, f64) {
    let n = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / n;
    let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0);
    (mean, var, (var / n).sqrt())
}

pub fn rel_close(a: f64, b: f64, rel: f64) -> bool {
    (a - b).abs() <= rel * a.abs().max(b.abs()).max(1.0)
}
