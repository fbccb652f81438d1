//! Test functions for linear spectral statistics.

use std::fmt;
use std::str::FromStr;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::Error;

/// A function analytic on a neighbourhood of the spectrum, evaluated on
/// contour nodes.
pub trait AnalyticFn: Sync {
    fn eval(&self, z: Complex64) -> Complex64;
}

impl<F> AnalyticFn for F
where
    F: Fn(Complex64) -> Complex64 + Sync,
{
    fn eval(&self, z: Complex64) -> Complex64 {
        self(z)
    }
}

/// Real polynomial with coefficients in ascending order.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Polynomial {
    coefficients: Vec<f64>,
}

impl Polynomial {
    pub fn new(mut coefficients: Vec<f64>) -> Self {
        while coefficients.len() > 1 && coefficients.last() == Some(&0.0) {
            coefficients.pop();
        }
        if coefficients.is_empty() {
            coefficients.push(0.0);
        }
        Self { coefficients }
    }

    /// `xᵏ`.
    pub fn monomial(k: usize) -> Self {
        let mut c = vec![0.0; k + 1];
        c[k] = 1.0;
        Self::new(c)
    }

    pub fn coefficients(&self) -> &[f64] {
        &self.coefficients
    }

    pub fn degree(&self) -> usize {
        self.coefficients.len() - 1
    }

    pub fn eval_real(&self, x: f64) -> f64 {
        self.coefficients.iter().rev().fold(0.0, |acc, &c| acc * x + c)
    }
}

impl AnalyticFn for Polynomial {
    fn eval(&self, z: Complex64) -> Complex64 {
        self.coefficients
            .iter()
            .rev()
            .fold(Complex64::new(0.0, 0.0), |acc, &c| acc * z + c)
    }
}

impl fmt::Display for Polynomial {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.degree() == 0 {
            return write!(f, "{}", self.coefficients[0]);
        }
        let mut first = true;
        for (k, &c) in self.coefficients.iter().enumerate() {
            if c == 0.0 {
                continue;
            }
            let magnitude = if first { c } else { c.abs() };
            if !first {
                f.write_str(if c < 0.0 { " - " } else { " + " })?;
            }
            first = false;
            let power = match k {
                0 => String::new(),
                1 => "x".to_string(),
                _ => format!("x^{k}"),
            };
            match (k, magnitude) {
                (0, m) => write!(f, "{m}")?,
                (_, m) if m == 1.0 => write!(f, "{power}")?,
                (_, m) if m == -1.0 => write!(f, "-{power}")?,
                (_, m) => write!(f, "{m}*{power}")?,
            }
        }
        Ok(())
    }
}

/// Parses sums of terms such as `x^2`, `1 + 2*x - 0.5x^3` or `3`.
impl FromStr for Polynomial {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let compact: String = s.chars().filter(|c| !c.is_whitespace()).collect();
        if compact.is_empty() {
            return Err(Error::Config("empty polynomial".into()));
        }
        let bad = |msg: &str| Error::Config(format!("cannot parse polynomial `{s}`: {msg}"));

        // split into signed terms, leaving exponent signs such as 1e-3 alone
        let mut terms: Vec<String> = Vec::new();
        let mut current = String::new();
        let chars: Vec<char> = compact.chars().collect();
        for (i, &ch) in chars.iter().enumerate() {
            let exponent_sign = i > 0
                && matches!(chars[i - 1], 'e' | 'E')
                && i >= 2
                && chars[i - 2].is_ascii_digit();
            if (ch == '+' || ch == '-') && !exponent_sign && !current.is_empty() {
                terms.push(std::mem::take(&mut current));
            }
            current.push(ch);
        }
        terms.push(current);

        let mut coefficients: Vec<f64> = Vec::new();
        for term in terms {
            let (sign, body) = match term.strip_prefix('-') {
                Some(rest) => (-1.0, rest),
                None => (1.0, term.strip_prefix('+').unwrap_or(&term)),
            };
            if body.is_empty() {
                return Err(bad("dangling sign"));
            }
            let (coef, power) = match body.find('x') {
                None => (body.parse::<f64>().map_err(|_| bad("bad constant"))?, 0usize),
                Some(pos) => {
                    let head = body[..pos].trim_end_matches('*');
                    let coef = if head.is_empty() {
                        1.0
                    } else {
                        head.parse::<f64>().map_err(|_| bad("bad coefficient"))?
                    };
                    let tail = &body[pos + 1..];
                    let power = if tail.is_empty() {
                        1
                    } else {
                        let exp = tail
                            .strip_prefix('^')
                            .or_else(|| tail.strip_prefix("**"))
                            .ok_or_else(|| bad("expected ^ after x"))?;
                        exp.parse::<usize>().map_err(|_| bad("bad exponent"))?
                    };
                    (coef, power)
                }
            };
            if !coef.is_finite() {
                return Err(bad("non-finite coefficient"));
            }
            if coefficients.len() <= power {
                coefficients.resize(power + 1, 0.0);
            }
            coefficients[power] += sign * coef;
        }
        Ok(Polynomial::new(coefficients))
    }
}
