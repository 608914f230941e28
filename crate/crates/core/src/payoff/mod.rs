//! Payoff functions `g: [0, ∞) → [0, ∞)` written in a small expression
//! language whose closure is piecewise affine.
//!
//! Every accepted payoff has an exact [`PiecewiseAffine`] canonical form, so
//! the concave envelope and its one-sided derivatives can be computed without
//! grids. Products are only allowed when one side is a step function
//! (constants, indicators, and combinations of them), which keeps the class
//! closed.

mod parser;
mod piecewise;

use std::fmt;

use thiserror::Error;

pub use piecewise::{Knot, Line, PiecewiseAffine};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum PayoffError {
    #[error("syntax error at position {position}: {message}")]
    Syntax { position: usize, message: String },
    #[error("non-affine product at position {position}: one factor of '*' must be constant or a step function")]
    NonAffineProduct { position: usize },
    #[error(
        "payoff is negative (minimum {minimum} near x = {location}); payoffs must be nonnegative. \
         A payoff bounded below can be priced after adding the cash amount {shift}"
    )]
    Negative { minimum: f64, location: f64, shift: f64 },
    #[error("payoff is unbounded below (tail slope {tail_slope})")]
    UnboundedBelow { tail_slope: f64 },
    #[error("payoff is not finite (constant {value})")]
    NotFinite { value: f64 },
}

/// Expression node. `Var` is the spot `x`.
#[derive(Clone, Debug, PartialEq)]
pub enum Expr {
    Const(f64),
    Var,
    Add(Box<Expr>, Box<Expr>),
    Sub(Box<Expr>, Box<Expr>),
    Mul(Box<Expr>, Box<Expr>),
    Max(Box<Expr>, Box<Expr>),
    Min(Box<Expr>, Box<Expr>),
    /// Positive part.
    Pos(Box<Expr>),
    /// `1{e > level}`.
    IndGt(Box<Expr>, f64),
    /// `1{e ≥ level}`.
    IndGe(Box<Expr>, f64),
}

impl Expr {
    /// True for expressions that are piecewise constant by construction.
    pub fn is_step(&self) -> bool {
        match self {
            Expr::Const(_) | Expr::IndGt(..) | Expr::IndGe(..) => true,
            Expr::Var => false,
            Expr::Add(a, b) | Expr::Sub(a, b) | Expr::Max(a, b) | Expr::Min(a, b) | Expr::Mul(a, b) => {
                a.is_step() && b.is_step()
            }
            Expr::Pos(a) => a.is_step(),
        }
    }

    pub fn eval(&self, x: f64) -> f64 {
        match self {
            Expr::Const(c) => *c,
            Expr::Var => x,
            Expr::Add(a, b) => a.eval(x) + b.eval(x),
            Expr::Sub(a, b) => a.eval(x) - b.eval(x),
            Expr::Mul(a, b) => a.eval(x) * b.eval(x),
            Expr::Max(a, b) => a.eval(x).max(b.eval(x)),
            Expr::Min(a, b) => a.eval(x).min(b.eval(x)),
            Expr::Pos(a) => a.eval(x).max(0.0),
            Expr::IndGt(a, level) => indicator(a.eval(x) > *level),
            Expr::IndGe(a, level) => indicator(a.eval(x) >= *level),
        }
    }

    fn to_piecewise(&self) -> PiecewiseAffine {
        match self {
            Expr::Const(c) => PiecewiseAffine::constant(*c),
            Expr::Var => PiecewiseAffine::identity(),
            Expr::Add(a, b) => a.to_piecewise().add(&b.to_piecewise()),
            Expr::Sub(a, b) => a.to_piecewise().sub(&b.to_piecewise()),
            Expr::Mul(a, b) => a
                .to_piecewise()
                .mul(&b.to_piecewise())
                .expect("parser admits only products with a step factor"),
            Expr::Max(a, b) => a.to_piecewise().max(&b.to_piecewise()),
            Expr::Min(a, b) => a.to_piecewise().min(&b.to_piecewise()),
            Expr::Pos(a) => a.to_piecewise().positive_part(),
            Expr::IndGt(a, level) => a.to_piecewise().indicator(*level, true),
            Expr::IndGe(a, level) => a.to_piecewise().indicator(*level, false),
        }
    }

    fn collect_ge_levels(&self, out: &mut Vec<f64>) {
        match self {
            Expr::Const(_) | Expr::Var => {}
            Expr::Add(a, b) | Expr::Sub(a, b) | Expr::Mul(a, b) | Expr::Max(a, b) | Expr::Min(a, b) => {
                a.collect_ge_levels(out);
                b.collect_ge_levels(out);
            }
            Expr::Pos(a) | Expr::IndGt(a, _) => a.collect_ge_levels(out),
            Expr::IndGe(a, level) => {
                a.collect_ge_levels(out);
                out.push(*level);
            }
        }
    }

    fn strict_indicators(self) -> Expr {
        let bx = |e: Box<Expr>| Box::new(e.strict_indicators());
        match self {
            Expr::Add(a, b) => Expr::Add(bx(a), bx(b)),
            Expr::Sub(a, b) => Expr::Sub(bx(a), bx(b)),
            Expr::Mul(a, b) => Expr::Mul(bx(a), bx(b)),
            Expr::Max(a, b) => Expr::Max(bx(a), bx(b)),
            Expr::Min(a, b) => Expr::Min(bx(a), bx(b)),
            Expr::Pos(a) => Expr::Pos(bx(a)),
            Expr::IndGt(a, l) | Expr::IndGe(a, l) => Expr::IndGt(bx(a), l),
            leaf => leaf,
        }
    }

    fn all_finite(&self) -> Option<f64> {
        match self {
            Expr::Const(c) if !c.is_finite() => Some(*c),
            Expr::IndGt(_, l) | Expr::IndGe(_, l) if !l.is_finite() => Some(*l),
            Expr::Const(_) | Expr::Var => None,
            Expr::Add(a, b) | Expr::Sub(a, b) | Expr::Mul(a, b) | Expr::Max(a, b) | Expr::Min(a, b) => {
                a.all_finite().or_else(|| b.all_finite())
            }
            Expr::Pos(a) | Expr::IndGt(a, _) | Expr::IndGe(a, _) => a.all_finite(),
        }
    }
}

fn indicator(b: bool) -> f64 {
    if b {
        1.0
    } else {
        0.0
    }
}

fn binary(f: &mut fmt::Formatter<'_>, name: &str, a: &Expr, b: &Expr) -> fmt::Result {
    write!(f, "{name}({a}, {b})")
}

impl fmt::Display for Expr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Expr::Const(c) => write!(f, "{c}"),
            Expr::Var => write!(f, "x"),
            Expr::Add(a, b) => write!(f, "({a} + {b})"),
            Expr::Sub(a, b) => write!(f, "({a} - {b})"),
            Expr::Mul(a, b) => write!(f, "({a} * {b})"),
            Expr::Max(a, b) => binary(f, "max", a, b),
            Expr::Min(a, b) => binary(f, "min", a, b),
            Expr::Pos(a) => write!(f, "pos({a})"),
            Expr::IndGt(a, l) => write!(f, "ind_gt({a}, {l})"),
            Expr::IndGe(a, l) => write!(f, "ind_ge({a}, {l})"),
        }
    }
}

/// `ind_ge` at `level` may break lower semicontinuity at the jump.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct LscWarning {
    pub level: f64,
}

impl fmt::Display for LscWarning {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "ind_ge(.., {}) may not be lower semicontinuous at its jump; \
             it differs from ind_gt only at that point, and the concave envelope is unchanged \
             unless the payoff there exceeds both one-sided limits",
            self.level
        )
    }
}

/// A validated payoff expression.
#[derive(Clone, Debug, PartialEq)]
pub struct PayoffAst {
    root: Expr,
    warnings: Vec<LscWarning>,
}

impl PayoffAst {
    pub fn root(&self) -> &Expr {
        &self.root
    }

    pub fn warnings(&self) -> &[LscWarning] {
        &self.warnings
    }

    pub fn eval(&self, x: f64) -> f64 {
        self.root.eval(x)
    }

    pub fn to_piecewise(&self) -> PiecewiseAffine {
        self.root.to_piecewise()
    }

    /// `self + cash`; used to lift a payoff that is only bounded below.
    pub fn shifted(&self, cash: f64) -> PayoffAst {
        PayoffAst {
            root: Expr::Add(Box::new(self.root.clone()), Box::new(Expr::Const(cash))),
            warnings: self.warnings.clone(),
        }
    }

    fn from_expr(root: Expr) -> Result<Self, PayoffError> {
        if let Some(value) = root.all_finite() {
            return Err(PayoffError::NotFinite { value });
        }
        let mut levels = Vec::new();
        root.collect_ge_levels(&mut levels);
        Ok(Self {
            root,
            warnings: levels.into_iter().map(|level| LscWarning { level }).collect(),
        })
    }
}

impl fmt::Display for PayoffAst {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        self.root.fmt(f)
    }
}

impl std::str::FromStr for PayoffAst {
    type Err = PayoffError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        parse_payoff(s)
    }
}

/// Parses and validates a payoff: grammar, affine products, nonnegativity.
pub fn parse_payoff(text: &str) -> Result<PayoffAst, PayoffError> {
    let ast = PayoffAst::from_expr(parser::parse_expr(text)?)?;
    check_nonnegative(&ast.to_piecewise())?;
    Ok(ast)
}

/// A payoff that needed a cash shift to become nonnegative.
#[derive(Clone, Debug, PartialEq)]
pub struct ShiftedPayoff {
    /// `g + cash_shift`, nonnegative.
    pub ast: PayoffAst,
    /// Zero when the payoff was already nonnegative.
    pub cash_shift: f64,
}

/// Like [`parse_payoff`], but accepts payoffs that are bounded below by
/// adding the smallest cash amount making them nonnegative. Prices of the
/// original payoff are the shifted prices minus `cash_shift`; hedge ratios
/// are unchanged.
pub fn parse_payoff_bounded_below(text: &str) -> Result<ShiftedPayoff, PayoffError> {
    match parse_payoff(text) {
        Ok(ast) => Ok(ShiftedPayoff { ast, cash_shift: 0.0 }),
        Err(PayoffError::Negative { mut shift, .. }) => {
            let base = PayoffAst::from_expr(parser::parse_expr(text)?)?;
            // adding the shift rounds differently at each knot; top it up
            // until the shifted payoff validates on its own
            loop {
                let ast = base.shifted(shift);
                match check_nonnegative(&ast.to_piecewise()) {
                    Ok(()) => return Ok(ShiftedPayoff { ast, cash_shift: shift }),
                    Err(PayoffError::Negative { minimum, .. }) => {
                        shift = (shift - minimum).max(shift + shift * f64::EPSILON);
                    }
                    Err(e) => return Err(e),
                }
            }
        }
        Err(e) => Err(e),
    }
}

fn check_nonnegative(g: &PiecewiseAffine) -> Result<(), PayoffError> {
    match g.infimum() {
        None => Err(PayoffError::UnboundedBelow {
            tail_slope: g.tail_slope(),
        }),
        Some((minimum, location)) if minimum < 0.0 => Err(PayoffError::Negative {
            minimum,
            location,
            shift: -minimum,
        }),
        Some(_) => Ok(()),
    }
}

/// Exact value `g(x)`.
pub fn eval_payoff(ast: &PayoffAst, x: f64) -> f64 {
    ast.eval(x)
}

pub fn to_piecewise(ast: &PayoffAst) -> PiecewiseAffine {
    ast.to_piecewise()
}

/// Rewrites every `ind_ge` into `ind_gt`, returning one warning per rewrite.
pub fn lsc_normalize(ast: &PayoffAst) -> (PayoffAst, Vec<LscWarning>) {
    let warnings = ast.warnings.clone();
    let root = ast.root.clone().strict_indicators();
    (
        PayoffAst {
            root,
            warnings: Vec::new(),
        },
        warnings,
    )
}
