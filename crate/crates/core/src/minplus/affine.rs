//! Affine expressions over free θ parameters.

use std::collections::BTreeMap;
use std::fmt;
use std::ops::{Add, AddAssign, Mul, Neg, Sub};

use num_traits::{One, Signed, Zero};

use crate::Rational;

/// Identifier of a free parameter (a θ of a FIFO left-over curve, or an
/// auxiliary LP variable such as the epigraph of a maximum).
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct ThetaId(pub u32);

impl fmt::Display for ThetaId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "t{}", self.0)
    }
}

/// A value for every θ that appears in an expression.
pub type Assignment = BTreeMap<ThetaId, Rational>;

/// `constant + Σ coeff·θ`. Zero coefficients are never stored, so structural
/// equality is mathematical equality.
#[derive(Clone, Debug, PartialEq, Eq, Hash, Default)]
pub struct AffineExpr {
    constant: Rational,
    coeffs: BTreeMap<ThetaId, Rational>,
}

impl AffineExpr {
    pub fn zero() -> Self {
        Self::default()
    }

    pub fn constant(value: Rational) -> Self {
        AffineExpr {
            constant: value,
            coeffs: BTreeMap::new(),
        }
    }

    pub fn theta(id: ThetaId) -> Self {
        Self::term(id, Rational::one())
    }

    pub fn term(id: ThetaId, coeff: Rational) -> Self {
        let mut e = Self::zero();
        e.add_term(id, coeff);
        e
    }

    pub fn constant_part(&self) -> &Rational {
        &self.constant
    }

    pub fn coeff(&self, id: ThetaId) -> Rational {
        self.coeffs.get(&id).cloned().unwrap_or_else(Rational::zero)
    }

    pub fn coeffs(&self) -> impl Iterator<Item = (ThetaId, &Rational)> {
        self.coeffs.iter().map(|(k, v)| (*k, v))
    }

    pub fn thetas(&self) -> impl Iterator<Item = ThetaId> + '_ {
        self.coeffs.keys().copied()
    }

    pub fn is_constant(&self) -> bool {
        self.coeffs.is_empty()
    }

    pub fn add_term(&mut self, id: ThetaId, coeff: Rational) {
        if coeff.is_zero() {
            return;
        }
        let slot = self.coeffs.entry(id).or_insert_with(Rational::zero);
        *slot += coeff;
        if slot.is_zero() {
            self.coeffs.remove(&id);
        }
    }

    pub fn add_constant(&mut self, value: &Rational) {
        self.constant += value;
    }

    pub fn scale(&self, factor: &Rational) -> Self {
        if factor.is_zero() {
            return Self::zero();
        }
        AffineExpr {
            constant: &self.constant * factor,
            coeffs: self
                .coeffs
                .iter()
                .map(|(k, v)| (*k, v * factor))
                .collect(),
        }
    }

    /// Evaluates the expression. Unassigned θs read as zero.
    pub fn eval(&self, assignment: &Assignment) -> Rational {
        let mut acc = self.constant.clone();
        for (id, c) in &self.coeffs {
            if let Some(v) = assignment.get(id) {
                acc += c * v;
            }
        }
        acc
    }

    pub fn eval_f64(&self, assignment: &BTreeMap<ThetaId, f64>) -> f64 {
        use num_traits::ToPrimitive;
        let mut acc = self.constant.to_f64().unwrap_or(f64::NAN);
        for (id, c) in &self.coeffs {
            if let Some(v) = assignment.get(id) {
                acc += c.to_f64().unwrap_or(f64::NAN) * v;
            }
        }
        acc
    }

    /// Substitutes every assigned θ, keeping the rest symbolic.
    pub fn substitute(&self, assignment: &Assignment) -> Self {
        let mut out = AffineExpr::constant(self.constant.clone());
        for (id, c) in &self.coeffs {
            match assignment.get(id) {
                Some(v) => out.constant += c * v,
                None => out.add_term(*id, c.clone()),
            }
        }
        out
    }
}

impl From<Rational> for AffineExpr {
    fn from(value: Rational) -> Self {
        AffineExpr::constant(value)
    }
}

impl From<ThetaId> for AffineExpr {
    fn from(id: ThetaId) -> Self {
        AffineExpr::theta(id)
    }
}

impl AddAssign<&AffineExpr> for AffineExpr {
    fn add_assign(&mut self, rhs: &AffineExpr) {
        self.constant += &rhs.constant;
        for (id, c) in &rhs.coeffs {
            self.add_term(*id, c.clone());
        }
    }
}

impl Add<&AffineExpr> for &AffineExpr {
    type Output = AffineExpr;
    fn add(self, rhs: &AffineExpr) -> AffineExpr {
        let mut out = self.clone();
        out += rhs;
        out
    }
}

impl Add for AffineExpr {
    type Output = AffineExpr;
    fn add(mut self, rhs: AffineExpr) -> AffineExpr {
        self += &rhs;
        self
    }
}

impl Neg for &AffineExpr {
    type Output = AffineExpr;
    fn neg(self) -> AffineExpr {
        AffineExpr {
            constant: -&self.constant,
            coeffs: self.coeffs.iter().map(|(k, v)| (*k, -v)).collect(),
        }
    }
}

impl Sub<&AffineExpr> for &AffineExpr {
    type Output = AffineExpr;
    fn sub(self, rhs: &AffineExpr) -> AffineExpr {
        let mut out = self.clone();
        out += &(-rhs);
        out
    }
}

impl Sub for AffineExpr {
    type Output = AffineExpr;
    fn sub(self, rhs: AffineExpr) -> AffineExpr {
        &self - &rhs
    }
}

impl Mul<&Rational> for &AffineExpr {
    type Output = AffineExpr;
    fn mul(self, rhs: &Rational) -> AffineExpr {
        self.scale(rhs)
    }
}

impl fmt::Display for AffineExpr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let mut first = true;
        for (id, c) in &self.coeffs {
            if first {
                if c.is_negative() {
                    write!(f, "-")?;
                }
            } else if c.is_negative() {
                write!(f, " - ")?;
            } else {
                write!(f, " + ")?;
            }
            let a = c.abs();
            if a.is_one() {
                write!(f, "{id}")?;
            } else {
                write!(f, "{a} {id}")?;
            }
            first = false;
        }
        if first {
            write!(f, "{}", self.constant)
        } else if self.constant.is_negative() {
            write!(f, " - {}", -&self.constant)
        } else if !self.constant.is_zero() {
            write!(f, " + {}", self.constant)
        } else {
            Ok(())
        }
    }
}
