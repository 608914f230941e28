use std::fmt;

use super::ConcaveEnvelope;
use crate::payoff::{PayoffAst, PiecewiseAffine};

/// Maximal interval of the contact set `{ĝ − g ≤ tol}`.
///
/// `lo_included`/`hi_included` record whether the endpoints belong to the
/// set; an excluded finite endpoint marks a jump of `g` there (the closure
/// is the reported interval).
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ContactInterval {
    pub lo: f64,
    pub hi: f64,
    pub lo_included: bool,
    pub hi_included: bool,
}

impl ContactInterval {
    fn point(x: f64) -> Self {
        Self {
            lo: x,
            hi: x,
            lo_included: true,
            hi_included: true,
        }
    }

    pub fn is_point(&self) -> bool {
        self.lo == self.hi
    }

    pub fn contains(&self, x: f64) -> bool {
        let above = x > self.lo || (self.lo_included && x == self.lo);
        let below = x < self.hi || (self.hi_included && x == self.hi);
        above && below
    }

    /// True if `x` lies in the closure.
    pub fn closure_contains(&self, x: f64) -> bool {
        x >= self.lo && x <= self.hi
    }

    /// Lower endpoint reached through a jump of `g`.
    pub fn jump_at_lo(&self) -> bool {
        !self.lo_included
    }

    pub fn jump_at_hi(&self) -> bool {
        !self.hi_included && self.hi.is_finite()
    }
}

impl fmt::Display for ContactInterval {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let open = if self.lo_included { '[' } else { '(' };
        let close = if self.hi_included { ']' } else { ')' };
        write!(f, "{open}{}, {}{close}", self.lo, self.hi)
    }
}

/// Contact set of a parsed payoff with its envelope.
pub fn contact_set(ast: &PayoffAst, env: &ConcaveEnvelope, tol: f64) -> Vec<ContactInterval> {
    contact_set_piecewise(&ast.to_piecewise(), env, tol)
}

/// Maximal intervals where `ĝ − g ≤ tol`.
///
/// `ĝ − g` is affine between consecutive points of the merged knot set, so
/// on each open piece the sub-level set is found from the one-sided endpoint
/// values; at `tol = 0` this is exact whenever those endpoint values are.
pub fn contact_set_piecewise(g: &PiecewiseAffine, env: &ConcaveEnvelope, tol: f64) -> Vec<ContactInterval> {
    let mut xs: Vec<f64> = g.breakpoints().to_vec();
    xs.extend(env.knots().iter().map(|&(x, _)| x));
    xs.push(0.0);
    xs.sort_by(|a, b| a.total_cmp(b));
    xs.dedup();

    let mut atoms: Vec<ContactInterval> = Vec::new();
    let gap_at = |x: f64| env.value(x) - g.eval(x);
    for (i, &a) in xs.iter().enumerate() {
        if gap_at(a) <= tol {
            atoms.push(ContactInterval::point(a));
        }
        let dl = env.value(a) - g.right_limit(a);
        match xs.get(i + 1) {
            Some(&b) => {
                let dr = env.value(b) - g.left_limit(b);
                let open = |lo: f64, hi: f64, lo_included: bool, hi_included: bool| ContactInterval {
                    lo,
                    hi,
                    lo_included,
                    hi_included,
                };
                if dl <= tol && dr <= tol {
                    atoms.push(open(a, b, false, false));
                } else if dl <= tol {
                    let r = a + (tol - dl) / (dr - dl) * (b - a);
                    if r > a {
                        atoms.push(open(a, r, false, true));
                    }
                } else if dr <= tol {
                    let r = a + (tol - dl) / (dr - dl) * (b - a);
                    if r < b {
                        atoms.push(open(r, b, true, false));
                    }
                }
            }
            None => {
                let slope = env.tail_slope() - g.tail_slope();
                let tail = |lo: f64, hi: f64, lo_included: bool, hi_included: bool| ContactInterval {
                    lo,
                    hi,
                    lo_included,
                    hi_included,
                };
                if dl <= tol {
                    if slope <= 0.0 {
                        atoms.push(tail(a, f64::INFINITY, false, false));
                    } else {
                        let r = a + (tol - dl) / slope;
                        if r > a {
                            atoms.push(tail(a, r, false, true));
                        }
                    }
                } else if slope < 0.0 {
                    atoms.push(tail(a + (tol - dl) / slope, f64::INFINITY, true, false));
                }
            }
        }
    }

    let mut merged: Vec<ContactInterval> = Vec::with_capacity(atoms.len());
    for atom in atoms {
        match merged.last_mut() {
            Some(last) if last.hi == atom.lo && (last.hi_included || atom.lo_included) => {
                last.hi = atom.hi;
                last.hi_included = atom.hi_included;
            }
            _ => merged.push(atom),
        }
    }
    merged
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::envelope::concave_envelope;
    use crate::payoff::parse_payoff;

    fn contacts(text: &str, tol: f64) -> Vec<ContactInterval> {
        let ast = parse_payoff(text).unwrap();
        let env = concave_envelope(&ast.to_piecewise()).unwrap();
        contact_set(&ast, &env, tol)
    }

    #[test]
    fn butterfly_touches_at_two_points() {
        let c = contacts("pos(x-90)-2*pos(x-100)+pos(x-110)", 0.0);
        assert_eq!(c, vec![ContactInterval::point(0.0), ContactInterval::point(100.0)]);
    }

    #[test]
    fn digital_contact_has_jump() {
        let c = contacts("ind_gt(x,2)", 0.0);
        assert_eq!(c.len(), 2);
        assert_eq!(c[0], ContactInterval::point(0.0));
        assert_eq!((c[1].lo, c[1].hi), (2.0, f64::INFINITY));
        assert!(c[1].jump_at_lo());
        assert!(!c[1].contains(2.0));
        assert!(c[1].closure_contains(2.0));
        assert!(c[1].contains(2.0001));
        assert_eq!(c[1].to_string(), "(2, inf)");
    }

    #[test]
    fn concave_payoff_touches_everywhere() {
        let c = contacts("min(x,50)", 0.0);
        assert_eq!(c.len(), 1);
        assert_eq!((c[0].lo, c[0].hi, c[0].lo_included), (0.0, f64::INFINITY, true));
    }

    #[test]
    fn tolerance_widens_contact() {
        let c = contacts("pos(x-90)-2*pos(x-100)+pos(x-110)", 0.9);
        let band = c.iter().find(|iv| iv.contains(100.0)).unwrap();
        assert!((band.lo - 99.0).abs() < 1e-12);
        assert!((band.hi - 100.9).abs() < 1e-12);
    }
}
