use std::fmt;
use std::ops::{Add, Mul, Neg, Sub};

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

const ZERO: Complex64 = Complex64 { re: 0.0, im: 0.0 };

/// Dense univariate polynomial with complex coefficients, lowest degree first.
///
/// Trailing (leading-degree) exact zeros are always stripped, so the degree is
/// the index of the last nonzero coefficient. The zero polynomial has no
/// coefficients.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Polynomial {
    coeffs: Vec<Complex64>,
}

impl Polynomial {
    pub fn new(mut coeffs: Vec<Complex64>) -> Self {
        while coeffs.last() == Some(&ZERO) {
            coeffs.pop();
        }
        Polynomial { coeffs }
    }

    pub fn from_real(coeffs: &[f64]) -> Self {
        Self::new(coeffs.iter().map(|&c| Complex64::new(c, 0.0)).collect())
    }

    pub fn zero() -> Self {
        Polynomial { coeffs: Vec::new() }
    }

    pub fn constant(c: Complex64) -> Self {
        Self::new(vec![c])
    }

    pub fn one() -> Self {
        Self::constant(Complex64::new(1.0, 0.0))
    }

    /// The identity polynomial `z`.
    pub fn z() -> Self {
        Self::new(vec![ZERO, Complex64::new(1.0, 0.0)])
    }

    /// `c·z^k`
    pub fn monomial(k: usize, c: Complex64) -> Self {
        let mut v = vec![ZERO; k + 1];
        v[k] = c;
        Self::new(v)
    }

    pub fn coeffs(&self) -> &[Complex64] {
        &self.coeffs
    }

    pub fn is_zero(&self) -> bool {
        self.coeffs.is_empty()
    }

    /// Degree; the zero polynomial reports 0.
    pub fn degree(&self) -> usize {
        self.coeffs.len().saturating_sub(1)
    }

    pub fn leading(&self) -> Complex64 {
        self.coeffs.last().copied().unwrap_or(ZERO)
    }

    /// Coefficient of `z^k`, zero beyond the degree.
    pub fn coeff(&self, k: usize) -> Complex64 {
        self.coeffs.get(k).copied().unwrap_or(ZERO)
    }

    pub fn max_abs_coeff(&self) -> f64 {
        self.coeffs.iter().map(|c| c.norm()).fold(0.0, f64::max)
    }

    /// Drops leading coefficients whose magnitude is at most `rel_tol` times
    /// the largest coefficient.
    pub fn trimmed(&self, rel_tol: f64) -> Polynomial {
        let scale = self.max_abs_coeff();
        let mut coeffs = self.coeffs.clone();
        while let Some(c) = coeffs.last() {
            if c.norm() <= rel_tol * scale {
                coeffs.pop();
            } else {
                break;
            }
        }
        Polynomial { coeffs }
    }

    /// Horner evaluation.
    pub fn eval(&self, z: Complex64) -> Complex64 {
        self.coeffs.iter().rev().fold(ZERO, |acc, &c| acc * z + c)
    }

    /// Evaluates `Σ |a_j| r^j`, the usual scale for rounding-error bounds.
    pub fn eval_abs(&self, r: f64) -> f64 {
        self.coeffs.iter().rev().fold(0.0, |acc, c| acc * r + c.norm())
    }

    pub fn derivative(&self) -> Polynomial {
        Polynomial::new(self.coeffs.iter().enumerate().skip(1).map(|(k, &c)| c * k as f64).collect())
    }

    /// Coefficients of `z^degree · p(1/z)` padded to the given formal degree.
    pub fn reversed(&self, formal_degree: usize) -> Polynomial {
        let mut v = vec![ZERO; formal_degree + 1];
        for (k, &c) in self.coeffs.iter().enumerate() {
            assert!(k <= formal_degree, "formal degree below actual degree");
            v[formal_degree - k] = c;
        }
        Polynomial::new(v)
    }

    pub fn scale(&self, s: Complex64) -> Polynomial {
        Polynomial::new(self.coeffs.iter().map(|&c| c * s).collect())
    }

    pub fn pow(&self, n: u32) -> Polynomial {
        let mut out = Polynomial::one();
        for _ in 0..n {
            out = &out * self;
        }
        out
    }

    /// Composition `self(inner(z))`.
    pub fn compose(&self, inner: &Polynomial) -> Polynomial {
        self.coeffs
            .iter()
            .rev()
            .fold(Polynomial::zero(), |acc, &c| &(&acc * inner) + &Polynomial::constant(c))
    }

    /// Taylor coefficients `p^{(k)}(c)/k!` for `k = 0..=degree`.
    pub fn taylor_at(&self, c: Complex64) -> Vec<Complex64> {
        let mut work = self.coeffs.clone();
        let n = work.len();
        let mut out = Vec::with_capacity(n);
        for k in 0..n {
            // synthetic division by (z - c), repeated
            for j in (k..n - 1).rev() {
                let next = work[j + 1];
                work[j] += c * next;
            }
            out.push(work[k]);
        }
        out
    }

    /// Rounding-noise scale for each Taylor coefficient at `c`:
    /// `Σ_j |a_j| C(j,k) |c|^{j-k}`.
    pub fn taylor_abs_scale(&self, c: Complex64) -> Vec<f64> {
        let mut work: Vec<f64> = self.coeffs.iter().map(|a| a.norm()).collect();
        let r = c.norm();
        let n = work.len();
        let mut out = Vec::with_capacity(n);
        for k in 0..n {
            for j in (k..n - 1).rev() {
                let next = work[j + 1];
                work[j] += r * next;
            }
            out.push(work[k]);
        }
        out
    }
}

impl Add for &Polynomial {
    type Output = Polynomial;
    fn add(self, rhs: &Polynomial) -> Polynomial {
        let n = self.coeffs.len().max(rhs.coeffs.len());
        Polynomial::new((0..n).map(|k| self.coeff(k) + rhs.coeff(k)).collect())
    }
}

impl Sub for &Polynomial {
    type Output = Polynomial;
    fn sub(self, rhs: &Polynomial) -> Polynomial {
        let n = self.coeffs.len().max(rhs.coeffs.len());
        Polynomial::new((0..n).map(|k| self.coeff(k) - rhs.coeff(k)).collect())
    }
}

impl Mul for &Polynomial {
    type Output = Polynomial;
    fn mul(self, rhs: &Polynomial) -> Polynomial {
        if self.is_zero() || rhs.is_zero() {
            return Polynomial::zero();
        }
        let mut v = vec![ZERO; self.coeffs.len() + rhs.coeffs.len() - 1];
        for (i, &a) in self.coeffs.iter().enumerate() {
            if a == ZERO {
                continue;
            }
            for (j, &b) in rhs.coeffs.iter().enumerate() {
                v[i + j] += a * b;
            }
        }
        Polynomial::new(v)
    }
}

impl Neg for &Polynomial {
    type Output = Polynomial;
    fn neg(self) -> Polynomial {
        self.scale(Complex64::new(-1.0, 0.0))
    }
}

/// Parseable by the expression grammar, e.g. `2z^2 - 1` or `(0.3+0.2i)z`.
impl fmt::Display for Polynomial {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.is_zero() {
            return write!(f, "0");
        }
        let mut first = true;
        for (k, c) in self.coeffs.iter().enumerate().rev() {
            if *c == ZERO {
                continue;
            }
            let (neg, coef) = if c.im == 0.0 { (c.re < 0.0, c.re.abs()) } else { (false, f64::NAN) };
            match (first, neg) {
                (true, true) => write!(f, "-")?,
                (false, true) => write!(f, " - ")?,
                (false, false) => write!(f, " + ")?,
                (true, false) => {}
            }
            first = false;
            let text = if c.im != 0.0 {
                format!("({}{}{}i)", c.re, if c.im < 0.0 { "-" } else { "+" }, c.im.abs())
            } else if coef == 1.0 && k > 0 {
                String::new()
            } else {
                format!("{coef}")
            };
            match k {
                0 => write!(f, "{text}")?,
                1 => write!(f, "{text}z")?,
                _ => write!(f, "{text}z^{k}")?,
            }
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn c(x: f64) -> Complex64 {
        Complex64::new(x, 0.0)
    }

    #[test]
    fn eval_and_derivative() {
        let p = Polynomial::from_real(&[-2.0, 0.0, 1.0]);
        assert_eq!(p.eval(c(2.0)), c(2.0));
        assert_eq!(p.derivative(), Polynomial::from_real(&[0.0, 2.0]));
    }

    #[test]
    fn chebyshev_three_is_cos_triple_angle() {
        let t3 = Polynomial::from_real(&[0.0, -3.0, 0.0, 4.0]);
        let th = std::f64::consts::PI / 7.0;
        assert!((t3.eval(c(th.cos())).re - (3.0 * th).cos()).abs() < 1e-12);
    }

    #[test]
    fn leading_zeros_are_stripped() {
        let p = Polynomial::new(vec![c(1.0), c(0.0), c(0.0)]);
        assert_eq!(p.degree(), 0);
        assert!(Polynomial::new(vec![c(0.0)]).is_zero());
    }

    #[test]
    fn compose_expands() {
        // (z^2-2)∘(z^2-2) = z^4 - 4z^2 + 2
        let p = Polynomial::from_real(&[-2.0, 0.0, 1.0]);
        assert_eq!(p.compose(&p), Polynomial::from_real(&[2.0, 0.0, -4.0, 0.0, 1.0]));
    }

    #[test]
    fn taylor_shift_matches_derivatives() {
        let p = Polynomial::from_real(&[1.0, -3.0, 0.5, 2.0]);
        let z0 = Complex64::new(0.3, -0.2);
        let t = p.taylor_at(z0);
        assert!((t[0] - p.eval(z0)).norm() < 1e-14);
        assert!((t[1] - p.derivative().eval(z0)).norm() < 1e-14);
        assert!((t[2] - p.derivative().derivative().eval(z0) / 2.0).norm() < 1e-14);
        assert!((t[3] - c(2.0)).norm() < 1e-14);
    }

    #[test]
    fn reversal() {
        let p = Polynomial::from_real(&[1.0, 2.0]);
        assert_eq!(p.reversed(3), Polynomial::from_real(&[0.0, 0.0, 2.0, 1.0]));
    }
}
