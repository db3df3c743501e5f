use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{RigidMotion, Vec2};

/// A harmonic polynomial in `x1`, `x2`, written like `"x1 + x2"` or `"x1^2 - x2^2"`.
///
/// Parsing rejects polynomials whose Laplacian does not vanish.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "String", into = "String")]
pub struct HarmonicPolynomial {
    /// `(i, j) ↦ a_ij` for the monomial `a_ij x1^i x2^j`; no zero coefficients are stored.
    terms: BTreeMap<(u32, u32), f64>,
}

impl HarmonicPolynomial {
    pub fn new(terms: impl IntoIterator<Item = ((u32, u32), f64)>) -> Result<Self> {
        let mut map = BTreeMap::new();
        for (k, c) in terms {
            if !c.is_finite() {
                return Err(Error::InvalidInput(format!("non-finite coefficient {c}")));
            }
            *map.entry(k).or_insert(0.0) += c;
        }
        map.retain(|_, c| *c != 0.0);
        let p = HarmonicPolynomial { terms: map };
        p.check_harmonic()?;
        Ok(p)
    }

    pub fn zero() -> Self {
        HarmonicPolynomial { terms: BTreeMap::new() }
    }

    pub fn x1() -> Self {
        HarmonicPolynomial {
            terms: BTreeMap::from([((1, 0), 1.0)]),
        }
    }

    pub fn x2() -> Self {
        HarmonicPolynomial {
            terms: BTreeMap::from([((0, 1), 1.0)]),
        }
    }

    pub fn terms(&self) -> impl Iterator<Item = ((u32, u32), f64)> + '_ {
        self.terms.iter().map(|(k, c)| (*k, *c))
    }

    pub fn is_constant(&self) -> bool {
        self.terms.keys().all(|&(i, j)| i == 0 && j == 0)
    }

    pub fn degree(&self) -> u32 {
        self.terms.keys().map(|(i, j)| i + j).max().unwrap_or(0)
    }

    pub fn scaled(&self, s: f64) -> Self {
        let mut p = self.clone();
        p.terms.values_mut().for_each(|c| *c *= s);
        p.terms.retain(|_, c| *c != 0.0);
        p
    }

    pub fn add(&self, other: &Self) -> Self {
        let mut p = self.clone();
        for (k, c) in &other.terms {
            *p.terms.entry(*k).or_insert(0.0) += c;
        }
        p.terms.retain(|_, c| *c != 0.0);
        p
    }

    fn check_harmonic(&self) -> Result<()> {
        let mut lap: BTreeMap<(u32, u32), f64> = BTreeMap::new();
        for (&(i, j), &c) in &self.terms {
            if i >= 2 {
                *lap.entry((i - 2, j)).or_insert(0.0) += c * (i * (i - 1)) as f64;
            }
            if j >= 2 {
                *lap.entry((i, j - 2)).or_insert(0.0) += c * (j * (j - 1)) as f64;
            }
        }
        let scale = self.terms.values().fold(0.0f64, |m, c| m.max(c.abs()));
        if let Some((k, v)) = lap.iter().find(|(_, v)| v.abs() > 1e-12 * scale.max(1.0)) {
            return Err(Error::InvalidInput(format!(
                "`{self}` is not harmonic: its Laplacian has coefficient {v} on x1^{} x2^{}",
                k.0, k.1
            )));
        }
        Ok(())
    }

    pub fn eval(&self, x: Vec2) -> f64 {
        self.terms
            .iter()
            .map(|(&(i, j), c)| c * x.x.powi(i as i32) * x.y.powi(j as i32))
            .sum()
    }

    pub fn grad(&self, x: Vec2) -> Vec2 {
        let mut g = Vec2::ZERO;
        for (&(i, j), c) in &self.terms {
            if i > 0 {
                g.x += c * i as f64 * x.x.powi(i as i32 - 1) * x.y.powi(j as i32);
            }
            if j > 0 {
                g.y += c * j as f64 * x.x.powi(i as i32) * x.y.powi(j as i32 - 1);
            }
        }
        g
    }
}

impl fmt::Display for HarmonicPolynomial {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.terms.is_empty() {
            return f.write_str("0");
        }
        let mut keys: Vec<_> = self.terms.keys().copied().collect();
        keys.sort_by_key(|&(i, j)| (std::cmp::Reverse(i + j), std::cmp::Reverse(i)));
        for (n, k) in keys.iter().enumerate() {
            let c = self.terms[k];
            let (sign, mag) = if c < 0.0 { ("-", -c) } else { ("+", c) };
            if n == 0 {
                if sign == "-" {
                    f.write_str("-")?;
                }
            } else {
                write!(f, " {sign} ")?;
            }
            let mut factors = Vec::new();
            if mag != 1.0 || *k == (0, 0) {
                factors.push(format!("{mag}"));
            }
            for (var, p) in [("x1", k.0), ("x2", k.1)] {
                match p {
                    0 => {}
                    1 => factors.push(var.to_string()),
                    _ => factors.push(format!("{var}^{p}")),
                }
            }
            f.write_str(&factors.join("*"))?;
        }
        Ok(())
    }
}

impl FromStr for HarmonicPolynomial {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let bad = |msg: &str| Error::InvalidInput(format!("cannot parse field `{s}`: {msg}"));
        let compact: String = s.chars().filter(|c| !c.is_whitespace()).collect();
        if compact.is_empty() {
            return Err(bad("empty expression"));
        }
        // split into signed terms; a sign directly after `e`/`E` or `^` belongs to a literal
        let mut terms = Vec::new();
        let mut start = 0;
        let bytes = compact.as_bytes();
        for i in 1..bytes.len() {
            let prev = bytes[i - 1];
            if (bytes[i] == b'+' || bytes[i] == b'-') && !matches!(prev, b'e' | b'E' | b'^' | b'*' | b'+' | b'-') {
                terms.push(&compact[start..i]);
                start = i;
            }
        }
        terms.push(&compact[start..]);

        let mut out = Vec::new();
        for term in terms {
            let (mut coef, body) = match term.as_bytes()[0] {
                b'+' => (1.0, &term[1..]),
                b'-' => (-1.0, &term[1..]),
                _ => (1.0, term),
            };
            if body.is_empty() {
                return Err(bad("dangling sign"));
            }
            let (mut i, mut j) = (0u32, 0u32);
            for factor in body.split('*') {
                let (base, power) = match factor.split_once('^') {
                    Some((b, p)) => (b, p.parse::<u32>().map_err(|_| bad(&format!("bad exponent `{p}`")))?),
                    None => (factor, 1),
                };
                match base {
                    "x1" => i += power,
                    "x2" => j += power,
                    "" => return Err(bad("empty factor")),
                    num => {
                        let v: f64 = num.parse().map_err(|_| bad(&format!("unknown factor `{num}`")))?;
                        coef *= v.powi(power as i32);
                    }
                }
            }
            out.push(((i, j), coef));
        }
        HarmonicPolynomial::new(out)
    }
}

impl TryFrom<String> for HarmonicPolynomial {
    type Error = Error;

    fn try_from(s: String) -> Result<Self> {
        s.parse()
    }
}

impl From<HarmonicPolynomial> for String {
    fn from(p: HarmonicPolynomial) -> String {
        p.to_string()
    }
}

/// An applied field `H`, given in the original coordinates and evaluated in a working frame.
#[derive(Clone, Debug, PartialEq)]
pub struct AppliedField {
    pub polynomial: HarmonicPolynomial,
    /// Original coordinates → working coordinates.
    pub frame: RigidMotion,
}

impl AppliedField {
    pub fn new(polynomial: HarmonicPolynomial) -> Self {
        AppliedField {
            polynomial,
            frame: RigidMotion::IDENTITY,
        }
    }

    pub fn parse(s: &str) -> Result<Self> {
        Ok(Self::new(s.parse()?))
    }

    /// The same field expressed in coordinates obtained by applying `motion`.
    pub fn in_frame(&self, motion: &RigidMotion) -> Self {
        AppliedField {
            polynomial: self.polynomial.clone(),
            frame: motion.compose(&self.frame),
        }
    }

    pub fn eval(&self, y: Vec2) -> f64 {
        self.polynomial.eval(self.frame.inverse().apply(y))
    }

    pub fn grad(&self, y: Vec2) -> Vec2 {
        self.frame
            .apply_vector(self.polynomial.grad(self.frame.inverse().apply(y)))
    }

    pub fn is_constant(&self) -> bool {
        self.polynomial.is_constant()
    }

    /// `H(x) = λ·H'(x)`, same frame.
    pub fn scaled(&self, s: f64) -> Self {
        AppliedField {
            polynomial: self.polynomial.scaled(s),
            frame: self.frame,
        }
    }
}

impl fmt::Display for AppliedField {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        self.polynomial.fmt(f)
    }
}
