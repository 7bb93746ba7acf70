//! Expression micro-grammar for maps and test functions.
//!
//! ```text
//! expr  := term (('+' | '-') term)*
//! term  := unary (('*' | '/')? unary)*        juxtaposition multiplies
//! unary := ('-' | '+') unary | power
//! power := atom ('^' int)?                   int may be signed or bracketed
//! atom  := number | 'z' | 'zbar' | 'i' | func '(' expr ')' | '(' expr ')'
//! func  := conj | re | im | abs
//! ```
//!
//! Numbers are decimals with an optional exponent; write rationals as
//! `16/27`. Maps may only use `z`, numbers, `i` and the arithmetic operators.

use std::fmt;

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::numkernel::Polynomial;
use crate::ratmap::RationalMap;
use crate::transfer::{MonomialTable, TestFunction};

#[derive(Debug, Clone, PartialEq)]
pub enum Expr {
    Num(Complex64),
    Z,
    Zbar,
    Neg(Box<Expr>),
    Add(Box<Expr>, Box<Expr>),
    Sub(Box<Expr>, Box<Expr>),
    Mul(Box<Expr>, Box<Expr>),
    Div(Box<Expr>, Box<Expr>),
    Pow(Box<Expr>, i32),
    Func(Func, Box<Expr>),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Func {
    Conj,
    Re,
    Im,
    Abs,
}

impl fmt::Display for Func {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Func::Conj => "conj",
            Func::Re => "re",
            Func::Im => "im",
            Func::Abs => "abs",
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
enum Tok {
    Num(f64),
    Ident(String),
    Op(char),
}

fn tokenize(s: &str) -> Result<Vec<Tok>> {
    let chars: Vec<char> = s.chars().collect();
    let mut out = Vec::new();
    let mut i = 0;
    while i < chars.len() {
        let c = chars[i];
        if c.is_whitespace() {
            i += 1;
        } else if c.is_ascii_digit() || c == '.' {
            let start = i;
            while i < chars.len() && (chars[i].is_ascii_digit() || chars[i] == '.') {
                i += 1;
            }
            // exponent, only when followed by a digit or sign+digit
            if i < chars.len() && (chars[i] == 'e' || chars[i] == 'E') {
                let mut j = i + 1;
                if j < chars.len() && (chars[j] == '+' || chars[j] == '-') {
                    j += 1;
                }
                if j < chars.len() && chars[j].is_ascii_digit() {
                    i = j;
                    while i < chars.len() && chars[i].is_ascii_digit() {
                        i += 1;
                    }
                }
            }
            let text: String = chars[start..i].iter().collect();
            let v = text.parse::<f64>().map_err(|_| Error::Parse(format!("bad number '{text}'")))?;
            out.push(Tok::Num(v));
        } else if c.is_ascii_alphabetic() || c == '_' {
            let start = i;
            while i < chars.len() && (chars[i].is_ascii_alphanumeric() || chars[i] == '_') {
                i += 1;
            }
            out.push(Tok::Ident(chars[start..i].iter().collect()));
        } else if "+-*/^()".contains(c) {
            out.push(Tok::Op(c));
            i += 1;
        } else {
            return Err(Error::Parse(format!("unexpected character '{c}'")));
        }
    }
    Ok(out)
}

struct Parser {
    toks: Vec<Tok>,
    pos: usize,
}

impl Parser {
    fn peek(&self) -> Option<&Tok> {
        self.toks.get(self.pos)
    }

    fn eat(&mut self, c: char) -> bool {
        if self.peek() == Some(&Tok::Op(c)) {
            self.pos += 1;
            true
        } else {
            false
        }
    }

    fn expect(&mut self, c: char) -> Result<()> {
        if self.eat(c) {
            Ok(())
        } else {
            Err(Error::Parse(format!("expected '{c}'")))
        }
    }

    fn expr(&mut self) -> Result<Expr> {
        let mut lhs = self.term()?;
        loop {
            if self.eat('+') {
                lhs = Expr::Add(Box::new(lhs), Box::new(self.term()?));
            } else if self.eat('-') {
                lhs = Expr::Sub(Box::new(lhs), Box::new(self.term()?));
            } else {
                return Ok(lhs);
            }
        }
    }

    fn starts_atom(&self) -> bool {
        matches!(self.peek(), Some(Tok::Num(_)) | Some(Tok::Ident(_)) | Some(Tok::Op('(')))
    }

    fn term(&mut self) -> Result<Expr> {
        let mut lhs = self.unary()?;
        loop {
            if self.eat('*') {
                lhs = Expr::Mul(Box::new(lhs), Box::new(self.unary()?));
            } else if self.eat('/') {
                lhs = Expr::Div(Box::new(lhs), Box::new(self.unary()?));
            } else if self.starts_atom() {
                lhs = Expr::Mul(Box::new(lhs), Box::new(self.power()?));
            } else {
                return Ok(lhs);
            }
        }
    }

    fn unary(&mut self) -> Result<Expr> {
        if self.eat('-') {
            Ok(Expr::Neg(Box::new(self.unary()?)))
        } else if self.eat('+') {
            self.unary()
        } else {
            self.power()
        }
    }

    fn power(&mut self) -> Result<Expr> {
        let base = self.atom()?;
        if !self.eat('^') {
            return Ok(base);
        }
        let bracketed = self.eat('(');
        let neg = if self.eat('-') {
            true
        } else {
            self.eat('+');
            false
        };
        let k = match self.peek() {
            Some(Tok::Num(v)) if v.fract() == 0.0 && *v <= 64.0 => *v as i32,
            _ => return Err(Error::Parse("exponents must be integers up to 64".into())),
        };
        self.pos += 1;
        if bracketed {
            self.expect(')')?;
        }
        Ok(Expr::Pow(Box::new(base), if neg { -k } else { k }))
    }

    fn atom(&mut self) -> Result<Expr> {
        match self.peek().cloned() {
            Some(Tok::Num(v)) => {
                self.pos += 1;
                Ok(Expr::Num(Complex64::new(v, 0.0)))
            }
            Some(Tok::Op('(')) => {
                self.pos += 1;
                let e = self.expr()?;
                self.expect(')')?;
                Ok(e)
            }
            Some(Tok::Ident(name)) => {
                self.pos += 1;
                let func = match name.as_str() {
                    "z" => return Ok(Expr::Z),
                    "zbar" => return Ok(Expr::Zbar),
                    "i" => return Ok(Expr::Num(Complex64::new(0.0, 1.0))),
                    "conj" => Func::Conj,
                    "re" => Func::Re,
                    "im" => Func::Im,
                    "abs" => Func::Abs,
                    _ => return Err(Error::Parse(format!("unknown name '{name}'"))),
                };
                self.expect('(')?;
                let e = self.expr()?;
                self.expect(')')?;
                Ok(Expr::Func(func, Box::new(e)))
            }
            Some(Tok::Op(c)) => Err(Error::Parse(format!("unexpected '{c}'"))),
            None => Err(Error::Parse("unexpected end of expression".into())),
        }
    }
}

pub fn parse(s: &str) -> Result<Expr> {
    let mut p = Parser {
        toks: tokenize(s)?,
        pos: 0,
    };
    if p.toks.is_empty() {
        return Err(Error::Parse("empty expression".into()));
    }
    let e = p.expr()?;
    if p.pos != p.toks.len() {
        return Err(Error::Parse(format!("trailing input after token {}", p.pos)));
    }
    Ok(e)
}

impl Expr {
    pub fn eval(&self, z: Complex64) -> Complex64 {
        match self {
            Expr::Num(c) => *c,
            Expr::Z => z,
            Expr::Zbar => z.conj(),
            Expr::Neg(a) => -a.eval(z),
            Expr::Add(a, b) => a.eval(z) + b.eval(z),
            Expr::Sub(a, b) => a.eval(z) - b.eval(z),
            Expr::Mul(a, b) => a.eval(z) * b.eval(z),
            Expr::Div(a, b) => a.eval(z) / b.eval(z),
            Expr::Pow(a, k) => a.eval(z).powi(*k),
            Expr::Func(f, a) => {
                let v = a.eval(z);
                match f {
                    Func::Conj => v.conj(),
                    Func::Re => Complex64::new(v.re, 0.0),
                    Func::Im => Complex64::new(v.im, 0.0),
                    Func::Abs => Complex64::new(v.norm(), 0.0),
                }
            }
        }
    }

    /// Numerator and denominator when the expression is rational in `z`.
    pub fn to_rational(&self) -> Result<(Polynomial, Polynomial)> {
        let one = Polynomial::one();
        Ok(match self {
            Expr::Num(c) => (Polynomial::constant(*c), one),
            Expr::Z => (Polynomial::z(), one),
            Expr::Zbar | Expr::Func(..) => return Err(Error::Parse("a map must be a rational function of z alone".into())),
            Expr::Neg(a) => {
                let (p, q) = a.to_rational()?;
                (-&p, q)
            }
            Expr::Add(a, b) | Expr::Sub(a, b) => {
                let (p1, q1) = a.to_rational()?;
                let (p2, q2) = b.to_rational()?;
                // shared denominators are kept as is so sums do not square them
                let (l, r, q) = if q1 == q2 {
                    (p1, p2, q1)
                } else {
                    (&p1 * &q2, &p2 * &q1, &q1 * &q2)
                };
                let num = if matches!(self, Expr::Add(..)) { &l + &r } else { &l - &r };
                (num, q)
            }
            Expr::Mul(a, b) => {
                let (p1, q1) = a.to_rational()?;
                let (p2, q2) = b.to_rational()?;
                (&p1 * &p2, &q1 * &q2)
            }
            Expr::Div(a, b) => {
                let (p1, q1) = a.to_rational()?;
                let (p2, q2) = b.to_rational()?;
                if p2.is_zero() {
                    return Err(Error::Parse("division by zero".into()));
                }
                (&p1 * &q2, &q1 * &p2)
            }
            Expr::Pow(a, k) => {
                let (p, q) = a.to_rational()?;
                if *k >= 0 {
                    (p.pow(*k as u32), q.pow(*k as u32))
                } else {
                    if p.is_zero() {
                        return Err(Error::Parse("division by zero".into()));
                    }
                    (q.pow(k.unsigned_abs()), p.pow(k.unsigned_abs()))
                }
            }
        })
    }

    /// Monomial table when the expression is a polynomial in `z` and `z̄`.
    pub fn to_monomials(&self) -> Option<MonomialTable> {
        let unit = Complex64::new(1.0, 0.0);
        Some(match self {
            Expr::Num(c) => MonomialTable::new().with_term(0, 0, *c),
            Expr::Z => MonomialTable::new().with_term(1, 0, unit),
            Expr::Zbar => MonomialTable::new().with_term(0, 1, unit),
            Expr::Neg(a) => a.to_monomials()?.scale(-unit),
            Expr::Add(a, b) => a.to_monomials()?.add(&b.to_monomials()?),
            Expr::Sub(a, b) => a.to_monomials()?.add(&b.to_monomials()?.scale(-unit)),
            Expr::Mul(a, b) => a.to_monomials()?.mul(&b.to_monomials()?),
            Expr::Div(a, b) => {
                let d = b.to_monomials()?;
                if !d.is_constant() {
                    return None;
                }
                let c = d.terms().next().map(|t| t.2)?;
                a.to_monomials()?.scale(c.inv())
            }
            Expr::Pow(a, k) if *k >= 0 => {
                let base = a.to_monomials()?;
                let mut out = MonomialTable::new().with_term(0, 0, unit);
                for _ in 0..*k {
                    out = out.mul(&base);
                }
                out
            }
            Expr::Pow(..) => return None,
            Expr::Func(Func::Conj, a) => a.to_monomials()?.conj(),
            Expr::Func(Func::Re, a) => {
                let m = a.to_monomials()?;
                m.add(&m.conj()).scale(Complex64::new(0.5, 0.0))
            }
            Expr::Func(Func::Im, a) => {
                let m = a.to_monomials()?;
                m.add(&m.conj().scale(-unit)).scale(Complex64::new(0.0, -0.5))
            }
            Expr::Func(Func::Abs, _) => return None,
        })
    }
}

/// A rational map from an expression such as `(z^2+1)^2/(4z(z^2-1))`.
pub fn parse_map(s: &str) -> Result<RationalMap> {
    let (p, q) = parse(s)?.to_rational()?;
    RationalMap::new(p, q)
}

/// A map from coefficient lists in ascending powers, `[a0, a1, ...]` or
/// `[a0, ...]/[b0, ...]`. Entries are complex constants.
pub fn parse_coefficient_map(s: &str) -> Result<RationalMap> {
    fn list(part: &str) -> Result<Polynomial> {
        let inner = part
            .trim()
            .strip_prefix('[')
            .and_then(|p| p.strip_suffix(']'))
            .ok_or_else(|| Error::Parse(format!("expected a bracketed coefficient list, got '{part}'")))?;
        let coeffs = inner.split(',').map(parse_complex).collect::<Result<Vec<_>>>()?;
        Ok(Polynomial::new(coeffs))
    }
    match s.split_once("]/[") {
        Some((p, q)) => RationalMap::new(list(&format!("{p}]"))?, list(&format!("[{q}"))?),
        None => RationalMap::polynomial(list(s)?),
    }
}

/// A test function: an exact monomial table when possible, otherwise a
/// closure over the parsed expression (finite points only).
pub fn parse_test_function(s: &str) -> Result<TestFunction> {
    let e = parse(s)?;
    Ok(match e.to_monomials() {
        Some(m) => TestFunction::Monomials(m),
        None => TestFunction::closure(s.trim(), move |z| e.eval(z)),
    })
}

/// A complex constant such as `-0.1+0.65i`.
pub fn parse_complex(s: &str) -> Result<Complex64> {
    let e = parse(s)?;
    match e.to_monomials() {
        Some(m) if m.is_constant() => Ok(m.terms().next().map(|t| t.2).unwrap_or_default()),
        _ => Err(Error::Parse(format!("'{s}' is not a constant"))),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numkernel::SpherePoint;
    use crate::transfer::Observable;

    #[test]
    fn maps() {
        let m = parse_map("z^2-2").unwrap();
        assert_eq!(m.degree(), 2);
        assert_eq!(m.evaluate(&SpherePoint::real(2.0)), SpherePoint::real(2.0));
        let l = parse_map("(z^2+1)^2/(4z(z^2-1))").unwrap();
        assert_eq!(l.degree(), 4);
        let u = parse_map("(z^3 - 16/27)/z").unwrap();
        assert_eq!(u.degree(), 3);
        let x = Complex64::new(0.3, 0.2);
        let want = (x.powu(3) - 16.0 / 27.0) / x;
        assert!((u.evaluate(&SpherePoint::new(x)).finite().unwrap() - want).norm() < 1e-14);
        assert!(parse_map("2z^2 - 1").is_ok());
        assert!(parse_map("z^2/z").is_err());
        assert!(parse_map("zbar^2").is_err());
        assert!(parse_map("z^").is_err());
        assert!(parse_map("z $ 2").is_err());
        assert_eq!(
            parse_coefficient_map("[-1, 0, 2]/[0, 1]").unwrap(),
            parse_map("(2z^2-1)/z").unwrap()
        );
        assert_eq!(parse_coefficient_map("[0.2, 0, 1]").unwrap().degree(), 2);
        assert!(parse_coefficient_map("[1, z]").is_err());
    }

    #[test]
    fn display_round_trips() {
        for src in [
            "z^2-2",
            "(2z^2-1)/z",
            "(z^2+1)^2/(4z(z^2-1))",
            "z^2 + (-0.1+0.65i)",
            "(z^3 - 16/27)/z",
            "-z^3 + 0.5z",
        ] {
            let m = parse_map(src).unwrap();
            let back = parse_map(&m.to_string()).unwrap();
            for x in [Complex64::new(0.3, -0.7), Complex64::new(-1.1, 0.2)] {
                let (a, b) = (m.evaluate(&SpherePoint::new(x)), back.evaluate(&SpherePoint::new(x)));
                assert!(crate::numkernel::chordal_distance(&a, &b) < 1e-14, "{src} -> {m}");
            }
        }
        assert_eq!(parse_map("z^2-2").unwrap().to_string(), "z^2 - 2");
    }

    #[test]
    fn test_functions() {
        let a = parse_test_function("2 + re(z)").unwrap();
        let x = SpherePoint::from_parts(0.25, 0.5);
        assert!((a.eval(&x).unwrap() - 2.25).norm() < 1e-15);
        assert!(a.as_monomials().is_some());
        let b = parse_test_function("2 - abs(re(z))").unwrap();
        assert!(b.as_monomials().is_none());
        assert!((b.eval(&SpherePoint::real(-0.5)).unwrap() - 1.5).norm() < 1e-15);
        let c = parse_test_function("z*zbar").unwrap();
        assert!((c.eval(&x).unwrap() - 0.3125).norm() < 1e-15);
        let d = parse_test_function("im(z)^2").unwrap();
        assert!((d.eval(&x).unwrap() - 0.25).norm() < 1e-15);
        assert_eq!(parse_complex("-0.1+0.65i").unwrap(), Complex64::new(-0.1, 0.65));
        assert_eq!(parse_complex("1e-3").unwrap(), Complex64::new(1e-3, 0.0));
    }
}
