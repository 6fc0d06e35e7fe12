//! Exact coefficient arithmetic: Gaussian rationals with a formal
//! transcendental `pi` adjoined as integer powers.
//!
//! Every constant appearing in the calculus (2*pi*i, pi^2/3, 1/(2i), ...)
//! is a finite sum of terms `(a/b + c/d*i) * pi^k`. No floating point,
//! and no relation between different pi-powers is ever applied.

use alloc::collections::BTreeMap;
use alloc::string::String;
use alloc::vec::Vec;
use core::fmt;
use core::ops::{Add, AddAssign, Mul, MulAssign, Neg, Sub, SubAssign};

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{One, Signed, Zero};

/// A Gaussian rational `re + im*i`.
#[derive(Clone, PartialEq, Eq, Debug)]
pub struct GaussRat {
    pub re: BigRational,
    pub im: BigRational,
}

impl GaussRat {
    pub fn zero() -> Self {
        GaussRat {
            re: BigRational::zero(),
            im: BigRational::zero(),
        }
    }

    pub fn one() -> Self {
        GaussRat {
            re: BigRational::one(),
            im: BigRational::zero(),
        }
    }

    pub fn i() -> Self {
        GaussRat {
            re: BigRational::zero(),
            im: BigRational::one(),
        }
    }

    pub fn from_rational(r: BigRational) -> Self {
        GaussRat {
            re: r,
            im: BigRational::zero(),
        }
    }

    pub fn is_zero(&self) -> bool {
        self.re.is_zero() && self.im.is_zero()
    }

    pub fn mul(&self, other: &GaussRat) -> GaussRat {
        GaussRat {
            re: &self.re * &other.re - &self.im * &other.im,
            im: &self.re * &other.im + &self.im * &other.re,
        }
    }

    pub fn add(&self, other: &GaussRat) -> GaussRat {
        GaussRat {
            re: &self.re + &other.re,
            im: &self.im + &other.im,
        }
    }

    pub fn neg(&self) -> GaussRat {
        GaussRat {
            re: -self.re.clone(),
            im: -self.im.clone(),
        }
    }

    /// Multiplicative inverse; panics on zero.
    pub fn inv(&self) -> GaussRat {
        let norm = &self.re * &self.re + &self.im * &self.im;
        assert!(!norm.is_zero(), "division by zero GaussRat");
        GaussRat {
            re: &self.re / &norm,
            im: -(&self.im / &norm),
        }
    }
}

/// Element of Q(i)[pi, pi^-1]: finitely many pi-powers, each with an
/// exact Gaussian-rational coefficient. Zero entries are never stored.
#[derive(Clone, PartialEq, Eq, Debug, Default)]
pub struct Scalar {
    terms: BTreeMap<i32, GaussRat>,
}

impl Scalar {
    pub fn zero() -> Self {
        Scalar {
            terms: BTreeMap::new(),
        }
    }

    pub fn one() -> Self {
        Scalar::from_gauss(0, GaussRat::one())
    }

    pub fn i() -> Self {
        Scalar::from_gauss(0, GaussRat::i())
    }

    pub fn from_gauss(pi_pow: i32, g: GaussRat) -> Self {
        let mut terms = BTreeMap::new();
        if !g.is_zero() {
            terms.insert(pi_pow, g);
        }
        Scalar { terms }
    }

    pub fn from_rational(r: BigRational) -> Self {
        Scalar::from_gauss(0, GaussRat::from_rational(r))
    }

    pub fn from_int(n: i64) -> Self {
        Scalar::from_rational(BigRational::from_integer(BigInt::from(n)))
    }

    pub fn ratio(num: i64, den: i64) -> Self {
        Scalar::from_rational(BigRational::new(BigInt::from(num), BigInt::from(den)))
    }

    /// `(a/b) * i * pi^k` building block.
    pub fn imaginary_pi(num: i64, den: i64, pi_pow: i32) -> Self {
        Scalar::from_gauss(
            pi_pow,
            GaussRat {
                re: BigRational::zero(),
                im: BigRational::new(BigInt::from(num), BigInt::from(den)),
            },
        )
    }

    /// `(a/b) * pi^k` building block.
    pub fn rational_pi(num: i64, den: i64, pi_pow: i32) -> Self {
        Scalar::from_gauss(
            pi_pow,
            GaussRat {
                re: BigRational::new(BigInt::from(num), BigInt::from(den)),
                im: BigRational::zero(),
            },
        )
    }

    /// 2*pi*i.
    pub fn two_pi_i() -> Self {
        Scalar::imaginary_pi(2, 1, 1)
    }

    /// 1/(2*sqrt(-1)) = -i/2.
    pub fn half_inv_i() -> Self {
        Scalar::imaginary_pi(-1, 2, 0)
    }

    pub fn is_zero(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn is_one(&self) -> bool {
        self.terms.len() == 1
            && self
                .terms
                .get(&0)
                .map(|g| g.re.is_one() && g.im.is_zero())
                .unwrap_or(false)
    }

    pub fn terms(&self) -> impl Iterator<Item = (&i32, &GaussRat)> {
        self.terms.iter()
    }

    /// The coefficient of `pi^k` (zero if absent).
    pub fn pi_coeff(&self, k: i32) -> GaussRat {
        self.terms.get(&k).cloned().unwrap_or_else(GaussRat::zero)
    }

    fn insert_term(&mut self, pi_pow: i32, g: GaussRat) {
        if g.is_zero() {
            return;
        }
        match self.terms.entry(pi_pow) {
            alloc::collections::btree_map::Entry::Vacant(e) => {
                e.insert(g);
            }
            alloc::collections::btree_map::Entry::Occupied(mut e) => {
                let s = e.get().add(&g);
                if s.is_zero() {
                    e.remove();
                } else {
                    *e.get_mut() = s;
                }
            }
        }
    }

    /// Inverse of a single-term scalar; `None` if the support is not a
    /// single pi-power.
    pub fn try_inv(&self) -> Option<Scalar> {
        if self.terms.len() != 1 {
            return None;
        }
        let (p, g) = self.terms.iter().next().unwrap();
        Some(Scalar::from_gauss(-p, g.inv()))
    }

    pub fn pow(&self, n: u32) -> Scalar {
        let mut acc = Scalar::one();
        for _ in 0..n {
            acc = &acc * self;
        }
        acc
    }
}

impl Add for &Scalar {
    type Output = Scalar;
    fn add(self, rhs: &Scalar) -> Scalar {
        let mut out = self.clone();
        for (p, g) in &rhs.terms {
            out.insert_term(*p, g.clone());
        }
        out
    }
}

impl Sub for &Scalar {
    type Output = Scalar;
    fn sub(self, rhs: &Scalar) -> Scalar {
        let mut out = self.clone();
        for (p, g) in &rhs.terms {
            out.insert_term(*p, g.neg());
        }
        out
    }
}

impl Mul for &Scalar {
    type Output = Scalar;
    fn mul(self, rhs: &Scalar) -> Scalar {
        let mut out = Scalar::zero();
        for (p1, g1) in &self.terms {
            for (p2, g2) in &rhs.terms {
                out.insert_term(p1 + p2, g1.mul(g2));
            }
        }
        out
    }
}

impl Neg for &Scalar {
    type Output = Scalar;
    fn neg(self) -> Scalar {
        let mut out = Scalar::zero();
        for (p, g) in &self.terms {
            out.terms.insert(*p, g.neg());
        }
        out
    }
}

impl Add for Scalar {
    type Output = Scalar;
    fn add(self, rhs: Scalar) -> Scalar {
        &self + &rhs
    }
}

impl Sub for Scalar {
    type Output = Scalar;
    fn sub(self, rhs: Scalar) -> Scalar {
        &self - &rhs
    }
}

impl Mul for Scalar {
    type Output = Scalar;
    fn mul(self, rhs: Scalar) -> Scalar {
        &self * &rhs
    }
}

impl Neg for Scalar {
    type Output = Scalar;
    fn neg(self) -> Scalar {
        -&self
    }
}

impl AddAssign<&Scalar> for Scalar {
    fn add_assign(&mut self, rhs: &Scalar) {
        for (p, g) in &rhs.terms {
            self.insert_term(*p, g.clone());
        }
    }
}

impl SubAssign<&Scalar> for Scalar {
    fn sub_assign(&mut self, rhs: &Scalar) {
        for (p, g) in &rhs.terms {
            self.insert_term(*p, g.neg());
        }
    }
}

impl MulAssign<&Scalar> for Scalar {
    fn mul_assign(&mut self, rhs: &Scalar) {
        *self = &*self * rhs;
    }
}

fn fmt_rat(r: &BigRational) -> String {
    use alloc::format;
    if r.denom().is_one() {
        format!("{}", r.numer())
    } else {
        format!("{}/{}", r.numer(), r.denom())
    }
}

/// Renders one Gaussian rational as `a/b`, `c/d*i` or `a/b+c/d*i`.
fn fmt_gauss(g: &GaussRat) -> String {
    use alloc::format;
    if g.im.is_zero() {
        fmt_rat(&g.re)
    } else if g.re.is_zero() {
        if g.im.is_one() {
            String::from("i")
        } else if g.im == -BigRational::one() {
            String::from("-i")
        } else {
            format!("{}*i", fmt_rat(&g.im))
        }
    } else {
        let im = if g.im.is_one() {
            String::from("+i")
        } else if g.im == -BigRational::one() {
            String::from("-i")
        } else if g.im.is_positive() {
            format!("+{}*i", fmt_rat(&g.im))
        } else {
            format!("{}*i", fmt_rat(&g.im))
        };
        format!("{}{}", fmt_rat(&g.re), im)
    }
}

impl fmt::Display for Scalar {
    /// Canonical text form: terms sorted by pi-power, `pi^k` markers,
    /// coefficients as exact (Gaussian) rationals.
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.terms.is_empty() {
            return write!(f, "0");
        }
        let parts: Vec<String> = self
            .terms
            .iter()
            .map(|(p, g)| {
                use alloc::format;
                let c = fmt_gauss(g);
                let needs_paren = !g.re.is_zero() && !g.im.is_zero();
                let c = if needs_paren && *p != 0 {
                    format!("({})", c)
                } else {
                    c
                };
                match *p {
                    0 => c,
                    1 => format!("{}*pi", c),
                    k => format!("{}*pi^{}", c, k),
                }
            })
            .collect();
        write!(f, "{}", parts.join(" + "))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn pi_powers_stay_formal() {
        let a = Scalar::rational_pi(1, 1, 2); // pi^2
        let b = Scalar::rational_pi(1, 1, -2); // pi^-2
        let p = &a * &b;
        assert!(p.is_one());
        // pi^2 + pi^-2 keeps two separate terms
        let s = &a + &b;
        assert_eq!(s.terms().count(), 2);
    }

    #[test]
    fn two_pi_i_squared() {
        let c = Scalar::two_pi_i();
        let sq = &c * &c;
        assert_eq!(sq, Scalar::rational_pi(-4, 1, 2));
    }

    #[test]
    fn inverse_of_monomial() {
        let c = Scalar::two_pi_i();
        let inv = c.try_inv().unwrap();
        assert!((&c * &inv).is_one());
        let two_terms = &Scalar::one() + &Scalar::rational_pi(1, 1, 2);
        assert!(two_terms.try_inv().is_none());
    }

    #[test]
    fn display_forms() {
        use alloc::format;
        assert_eq!(format!("{}", Scalar::ratio(-3, 4)), "-3/4");
        assert_eq!(format!("{}", Scalar::imaginary_pi(1, 2, 0)), "1/2*i");
        assert_eq!(format!("{}", Scalar::rational_pi(1, 3, 2)), "1/3*pi^2");
        assert_eq!(format!("{}", Scalar::zero()), "0");
    }
}
