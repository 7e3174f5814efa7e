//! Symbolic directions: `V<i>`, brackets `[a,b]`, and sums with real
//! coefficients, e.g. `0.5*V1 - [V1,V2]`. Plain comma lists such as `1,0`
//! are taken as literal vectors.

use std::sync::Arc;

use anyhow::{anyhow, bail, Result};
use cubature::algebra::{AlgebraContext, TensorElement};
use cubature::sde::FieldExpr;
use cubature::VectorFieldSystem;

/// A linear combination of bracket expressions.
#[derive(Clone, Debug, PartialEq)]
pub struct LinearExpr(pub Vec<(f64, FieldExpr)>);

#[derive(Clone, Debug, PartialEq)]
pub enum Direction {
    Vector(Vec<f64>),
    Symbolic(LinearExpr),
}

impl Direction {
    pub fn parse(s: &str) -> Result<Self> {
        let s = s.trim();
        if !s.contains(['V', 'v', '[']) {
            let v = s
                .split(',')
                .map(|p| p.trim().parse::<f64>())
                .collect::<std::result::Result<Vec<_>, _>>()
                .map_err(|e| anyhow!("invalid direction vector `{s}`: {e}"))?;
            return Ok(Direction::Vector(v));
        }
        Ok(Direction::Symbolic(parse_linear(s)?))
    }

    /// The state-space vector at `y`, before any time scaling.
    pub fn resolve(&self, system: &VectorFieldSystem, y: &[f64]) -> Result<Vec<f64>> {
        match self {
            Direction::Vector(v) => Ok(v.clone()),
            Direction::Symbolic(LinearExpr(terms)) => {
                let mut out = vec![0.0; system.n()];
                for (c, e) in terms {
                    let v = e.eval(system, y)?;
                    out.iter_mut().zip(&v).for_each(|(o, x)| *o += c * x);
                }
                Ok(out)
            }
        }
    }

    /// The same expression read in the algebra, with `V<i>` as `e_i`.
    pub fn to_element(&self, ctx: &Arc<AlgebraContext>) -> Result<TensorElement> {
        match self {
            Direction::Vector(v) => {
                if v.len() != ctx.d() {
                    bail!("direction vector needs {} entries (e_1..e_d), got {}", ctx.d(), v.len());
                }
                let mut lin = vec![0.0];
                lin.extend(v);
                Ok(TensorElement::linear(ctx, &lin)?)
            }
            Direction::Symbolic(LinearExpr(terms)) => {
                let mut out = TensorElement::zero(ctx);
                for (c, e) in terms {
                    out.axpy(*c, &element_of(ctx, e)?)?;
                }
                Ok(out)
            }
        }
    }
}

fn element_of(ctx: &Arc<AlgebraContext>, e: &FieldExpr) -> Result<TensorElement> {
    match e {
        FieldExpr::Field(i) => Ok(TensorElement::generator(ctx, *i)?),
        FieldExpr::Bracket(a, b) => Ok(element_of(ctx, a)?.bracket(&element_of(ctx, b)?)?),
    }
}

/// `1`, `sqrt_t`, or `t^<q>/2`: the factor multiplying the resolved vector.
pub fn parse_scale(s: &str, t: f64) -> Result<f64> {
    let s = s.trim();
    match s {
        "1" | "none" => Ok(1.0),
        "sqrt_t" => Ok(t.sqrt()),
        _ => {
            let q = s
                .strip_prefix("t^")
                .and_then(|r| r.strip_suffix("/2"))
                .and_then(|q| q.trim().parse::<i32>().ok())
                .ok_or_else(|| anyhow!("invalid scale `{s}`; expected 1, sqrt_t or t^<q>/2"))?;
            Ok(t.powf(f64::from(q) / 2.0))
        }
    }
}

struct Parser<'a> {
    s: &'a [u8],
    pos: usize,
}

fn parse_linear(s: &str) -> Result<LinearExpr> {
    let mut p = Parser { s: s.as_bytes(), pos: 0 };
    let e = p.sum()?;
    p.skip_ws();
    if p.pos != p.s.len() {
        bail!("unexpected `{}` at position {} in `{s}`", &s[p.pos..], p.pos);
    }
    Ok(e)
}

impl Parser<'_> {
    fn skip_ws(&mut self) {
        while self.pos < self.s.len() && self.s[self.pos].is_ascii_whitespace() {
            self.pos += 1;
        }
    }

    fn peek(&mut self) -> Option<u8> {
        self.skip_ws();
        self.s.get(self.pos).copied()
    }

    fn expect(&mut self, c: u8) -> Result<()> {
        if self.peek() == Some(c) {
            self.pos += 1;
            Ok(())
        } else {
            bail!("expected `{}` at position {}", c as char, self.pos)
        }
    }

    fn sum(&mut self) -> Result<LinearExpr> {
        let mut sign = 1.0;
        if let Some(c @ (b'+' | b'-')) = self.peek() {
            self.pos += 1;
            sign = if c == b'-' { -1.0 } else { 1.0 };
        }
        let mut out = self.term(sign)?;
        while let Some(c @ (b'+' | b'-')) = self.peek() {
            self.pos += 1;
            let sign = if c == b'-' { -1.0 } else { 1.0 };
            out.0.extend(self.term(sign)?.0);
        }
        Ok(out)
    }

    fn term(&mut self, sign: f64) -> Result<LinearExpr> {
        let coeff = match self.peek() {
            Some(c) if c.is_ascii_digit() || c == b'.' => {
                let c = self.number()?;
                self.expect(b'*')?;
                c
            }
            _ => 1.0,
        };
        let atom = self.atom()?;
        Ok(LinearExpr(
            atom.0.into_iter().map(|(c, e)| (sign * coeff * c, e)).collect(),
        ))
    }

    fn number(&mut self) -> Result<f64> {
        let start = self.pos;
        while self.pos < self.s.len() {
            let c = self.s[self.pos];
            let exp_sign = (c == b'-' || c == b'+') && matches!(self.s[self.pos - 1], b'e' | b'E');
            if c.is_ascii_digit() || c == b'.' || c == b'e' || c == b'E' || exp_sign {
                self.pos += 1;
            } else {
                break;
            }
        }
        let text = std::str::from_utf8(&self.s[start..self.pos]).expect("ascii slice");
        text.parse().map_err(|_| anyhow!("invalid coefficient `{text}`"))
    }

    fn atom(&mut self) -> Result<LinearExpr> {
        match self.peek() {
            Some(b'V' | b'v') => {
                self.pos += 1;
                let start = self.pos;
                while self.pos < self.s.len() && self.s[self.pos].is_ascii_digit() {
                    self.pos += 1;
                }
                let digits = std::str::from_utf8(&self.s[start..self.pos]).expect("ascii slice");
                let i: usize = digits
                    .parse()
                    .map_err(|_| anyhow!("expected a field index after `V` at position {start}"))?;
                Ok(LinearExpr(vec![(1.0, FieldExpr::Field(i))]))
            }
            Some(b'[') => {
                self.pos += 1;
                let a = self.sum()?;
                self.expect(b',')?;
                let b = self.sum()?;
                self.expect(b']')?;
                let mut out = Vec::new();
                for (ca, ea) in &a.0 {
                    for (cb, eb) in &b.0 {
                        out.push((ca * cb, FieldExpr::bracket(ea.clone(), eb.clone())));
                    }
                }
                Ok(LinearExpr(out))
            }
            Some(b'(') => {
                self.pos += 1;
                let e = self.sum()?;
                self.expect(b')')?;
                Ok(e)
            }
            other => bail!(
                "expected `V<i>`, `[` or `(` at position {}, found {}",
                self.pos,
                other.map_or("end of input".to_string(), |c| format!("`{}`", c as char))
            ),
        }
    }
}
