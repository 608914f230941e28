use crate::payoff::{PayoffAst, PiecewiseAffine};

/// `g_n = min(inf_y {g(y) + n|x − y|}, n)`: the largest minorant of `g` that
/// is `n`-Lipschitz and bounded by `n`.
#[derive(Clone, Debug, PartialEq)]
pub struct RegularizedPayoff {
    pub n: u32,
    pub function: PiecewiseAffine,
}

pub fn lipschitz_regularize(ast: &PayoffAst, n: u32) -> RegularizedPayoff {
    regularize_piecewise(&ast.to_piecewise(), n)
}

/// Closed-form inf-convolution with `n|·|`, capped at `n`.
///
/// Each affine piece `ℓ` on `[a, b]` contributes `ℓ` itself clipped by cones
/// of slope `±n` when `|ℓ'| ≤ n`, and a single cone at its lower endpoint
/// otherwise. Point values at jumps contribute their own cones. The
/// infimum over all contributions is the inf-convolution on `[0, ∞)`.
pub fn regularize_piecewise(g: &PiecewiseAffine, n: u32) -> RegularizedPayoff {
    assert!(n >= 1, "regularization index must be positive");
    let slope = f64::from(n);
    let cone = |c: f64, v: f64| {
        PiecewiseAffine::affine(v + slope * c, -slope).max(&PiecewiseAffine::affine(v - slope * c, slope))
    };

    let mut parts: Vec<PiecewiseAffine> = Vec::new();
    parts.push(cone(0.0, g.value_at_zero()));
    for k in g.knots() {
        parts.push(cone(k.x, k.value));
    }
    for (lo, hi, line) in g.pieces() {
        let m = line.slope;
        let va = line.eval(lo);
        if hi.is_finite() {
            let vb = line.eval(hi);
            if m > slope {
                parts.push(cone(lo, va));
            } else if m < -slope {
                parts.push(cone(hi, vb));
            } else {
                let body = PiecewiseAffine::affine(line.intercept, m)
                    .max(&PiecewiseAffine::affine(va + slope * lo, -slope))
                    .max(&PiecewiseAffine::affine(vb - slope * hi, slope));
                parts.push(body);
            }
        } else if m > slope {
            parts.push(cone(lo, va));
        } else {
            // nonnegative payoffs have m ≥ 0 here
            let body =
                PiecewiseAffine::affine(line.intercept, m).max(&PiecewiseAffine::affine(va + slope * lo, -slope));
            parts.push(body);
        }
    }

    let inf = parts
        .into_iter()
        .reduce(|acc, p| acc.min(&p))
        .expect("at least one contribution");
    RegularizedPayoff {
        n,
        function: inf.min(&PiecewiseAffine::constant(slope)),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::payoff::parse_payoff;

    fn reg(text: &str, n: u32) -> PiecewiseAffine {
        lipschitz_regularize(&parse_payoff(text).unwrap(), n).function
    }

    #[test]
    fn digital_first_member() {
        let g1 = reg("ind_gt(x,2)", 1);
        for (x, v) in [(0.0, 0.0), (1.0, 0.0), (2.0, 0.0), (2.5, 0.5), (3.0, 1.0), (10.0, 1.0)] {
            assert_eq!(g1.eval(x), v, "x = {x}");
        }
    }

    #[test]
    fn lipschitz_bounded_is_fixed() {
        let fly = parse_payoff("pos(x-90)-2*pos(x-100)+pos(x-110)").unwrap();
        let g = reg("pos(x-90)-2*pos(x-100)+pos(x-110)", 10);
        for i in 0..=300 {
            let x = i as f64 * 0.5;
            assert_eq!(g.eval(x), fly.eval(x), "x = {x}");
        }
    }

    #[test]
    fn constant_is_capped() {
        let g = reg("5", 3);
        assert_eq!(g.eval(0.0), 3.0);
        assert_eq!(g.eval(100.0), 3.0);
        assert!(g.breakpoints().is_empty());
    }

    #[test]
    fn steep_call_is_flattened() {
        // 4·(x−1)^+ regularized at n = 2: slope clamped, capped at 2
        let g = reg("4*pos(x-1)", 2);
        assert_eq!(g.eval(1.0), 0.0);
        assert_eq!(g.eval(1.5), 1.0);
        assert_eq!(g.eval(5.0), 2.0);
    }

    #[test]
    fn downward_jump_creates_left_cone() {
        // 1 on [0,3], 0 after: regularized value ramps down before 3
        let g = reg("1 - ind_gt(x,3)", 2);
        assert_eq!(g.eval(2.0), 1.0);
        assert_eq!(g.eval(2.75), 0.5);
        assert_eq!(g.eval(3.0), 0.0);
    }
}
