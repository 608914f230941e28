//! Recursive-descent parser for the payoff language.
//!
//! ```text
//! expr   := term (('+' | '-') term)*
//! term   := factor ('*' factor)*
//! factor := number | 'x' | '(' expr ')'
//!         | 'max(' expr ',' expr ')' | 'min(' expr ',' expr ')'
//!         | 'pos(' expr ')'
//!         | 'ind_gt(' expr ',' number ')' | 'ind_ge(' expr ',' number ')'
//! ```

use super::{Expr, PayoffError};

#[derive(Clone, Debug, PartialEq)]
enum Tok {
    Num(f64),
    Ident(String),
    LParen,
    RParen,
    Comma,
    Plus,
    Minus,
    Star,
    End,
}

impl Tok {
    fn describe(&self) -> String {
        match self {
            Tok::Num(v) => format!("number {v}"),
            Tok::Ident(s) => format!("'{s}'"),
            Tok::LParen => "'('".into(),
            Tok::RParen => "')'".into(),
            Tok::Comma => "','".into(),
            Tok::Plus => "'+'".into(),
            Tok::Minus => "'-'".into(),
            Tok::Star => "'*'".into(),
            Tok::End => "end of input".into(),
        }
    }
}

/// Token with its 1-based character offset.
type Spanned = (Tok, usize);

fn tokenize(text: &str) -> Result<Vec<Spanned>, PayoffError> {
    let chars: Vec<char> = text.chars().collect();
    let mut out = Vec::new();
    let mut i = 0;
    while i < chars.len() {
        let c = chars[i];
        let pos = i + 1;
        if c.is_whitespace() {
            i += 1;
            continue;
        }
        let single = match c {
            '(' => Some(Tok::LParen),
            ')' => Some(Tok::RParen),
            ',' => Some(Tok::Comma),
            '+' => Some(Tok::Plus),
            '-' => Some(Tok::Minus),
            '*' => Some(Tok::Star),
            _ => None,
        };
        if let Some(tok) = single {
            out.push((tok, pos));
            i += 1;
        } else if c.is_ascii_digit() || c == '.' {
            let start = i;
            while i < chars.len() && chars[i].is_ascii_digit() {
                i += 1;
            }
            if i < chars.len() && chars[i] == '.' {
                i += 1;
                while i < chars.len() && chars[i].is_ascii_digit() {
                    i += 1;
                }
            }
            let lit: String = chars[start..i].iter().collect();
            let value = lit.parse::<f64>().map_err(|_| PayoffError::Syntax {
                position: pos,
                message: format!("malformed number '{lit}'"),
            })?;
            out.push((Tok::Num(value), pos));
        } else if c.is_ascii_alphabetic() || c == '_' {
            let start = i;
            while i < chars.len() && (chars[i].is_ascii_alphanumeric() || chars[i] == '_') {
                i += 1;
            }
            out.push((Tok::Ident(chars[start..i].iter().collect()), pos));
        } else {
            return Err(PayoffError::Syntax {
                position: pos,
                message: format!("unexpected character '{c}'"),
            });
        }
    }
    out.push((Tok::End, chars.len() + 1));
    Ok(out)
}

struct Parser {
    toks: Vec<Spanned>,
    cur: usize,
}

impl Parser {
    fn peek(&self) -> &Tok {
        &self.toks[self.cur].0
    }

    fn pos(&self) -> usize {
        self.toks[self.cur].1
    }

    fn bump(&mut self) -> Spanned {
        let t = self.toks[self.cur].clone();
        if self.cur + 1 < self.toks.len() {
            self.cur += 1;
        }
        t
    }

    fn error<T>(&self, message: String) -> Result<T, PayoffError> {
        Err(PayoffError::Syntax {
            position: self.pos(),
            message,
        })
    }

    fn expect(&mut self, want: Tok) -> Result<(), PayoffError> {
        if *self.peek() == want {
            self.bump();
            Ok(())
        } else {
            self.error(format!(
                "expected {}, found {}",
                want.describe(),
                self.peek().describe()
            ))
        }
    }

    fn expr(&mut self) -> Result<Expr, PayoffError> {
        let mut lhs = self.term()?;
        loop {
            match self.peek() {
                Tok::Plus => {
                    self.bump();
                    let rhs = self.term()?;
                    lhs = Expr::Add(Box::new(lhs), Box::new(rhs));
                }
                Tok::Minus => {
                    self.bump();
                    let rhs = self.term()?;
                    lhs = Expr::Sub(Box::new(lhs), Box::new(rhs));
                }
                _ => return Ok(lhs),
            }
        }
    }

    fn term(&mut self) -> Result<Expr, PayoffError> {
        let mut lhs = self.factor()?;
        while *self.peek() == Tok::Star {
            let (_, star) = self.bump();
            let rhs = self.factor()?;
            if !lhs.is_step() && !rhs.is_step() {
                return Err(PayoffError::NonAffineProduct { position: star });
            }
            lhs = Expr::Mul(Box::new(lhs), Box::new(rhs));
        }
        Ok(lhs)
    }

    fn number(&mut self) -> Result<f64, PayoffError> {
        match *self.peek() {
            Tok::Num(v) => {
                self.bump();
                Ok(v)
            }
            _ => self.error(format!("expected number, found {}", self.peek().describe())),
        }
    }

    fn factor(&mut self) -> Result<Expr, PayoffError> {
        let (tok, pos) = self.bump();
        match tok {
            Tok::Num(v) => Ok(Expr::Const(v)),
            Tok::LParen => {
                let e = self.expr()?;
                self.expect(Tok::RParen)?;
                Ok(e)
            }
            Tok::Ident(name) => match name.as_str() {
                "x" => Ok(Expr::Var),
                "max" | "min" => {
                    self.expect(Tok::LParen)?;
                    let a = self.expr()?;
                    self.expect(Tok::Comma)?;
                    let b = self.expr()?;
                    self.expect(Tok::RParen)?;
                    Ok(if name == "max" {
                        Expr::Max(Box::new(a), Box::new(b))
                    } else {
                        Expr::Min(Box::new(a), Box::new(b))
                    })
                }
                "pos" => {
                    self.expect(Tok::LParen)?;
                    let a = self.expr()?;
                    self.expect(Tok::RParen)?;
                    Ok(Expr::Pos(Box::new(a)))
                }
                "ind_gt" | "ind_ge" => {
                    self.expect(Tok::LParen)?;
                    let a = self.expr()?;
                    self.expect(Tok::Comma)?;
                    let level = self.number()?;
                    self.expect(Tok::RParen)?;
                    Ok(if name == "ind_gt" {
                        Expr::IndGt(Box::new(a), level)
                    } else {
                        Expr::IndGe(Box::new(a), level)
                    })
                }
                other => Err(PayoffError::Syntax {
                    position: pos,
                    message: format!("unknown identifier '{other}'"),
                }),
            },
            other => Err(PayoffError::Syntax {
                position: pos,
                message: format!("unexpected {}", other.describe()),
            }),
        }
    }
}

/// Parses the payoff text into an expression tree (no semantic validation).
pub(crate) fn parse_expr(text: &str) -> Result<Expr, PayoffError> {
    let mut p = Parser {
        toks: tokenize(text)?,
        cur: 0,
    };
    let e = p.expr()?;
    if *p.peek() != Tok::End {
        return p.error(format!("unexpected {} after expression", p.peek().describe()));
    }
    Ok(e)
}
