//! Quasi-modular forms: polynomials in E2, E4, E6 over [`Scalar`], the
//! Ramanujan derivation, and the exact Bernoulli / zeta(2k) constants
//! behind the Eisenstein normalizations.

use alloc::collections::BTreeMap;
use alloc::string::String;
use alloc::vec::Vec;
use core::fmt;
use core::ops::{Add, Mul, Neg, Sub};

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{One, Zero};

use crate::scalar::{GaussRat, Scalar};

/// Monomial E2^a * E4^b * E6^c.
pub type QmMono = (u32, u32, u32);

/// Polynomial in E2, E4, E6 with [`Scalar`] coefficients.
///
/// The weight of a monomial is `2a + 4b + 6c`; mixed weights are allowed
/// (weight bookkeeping is available through [`QuasiModularForm::weights`]).
#[derive(Clone, PartialEq, Eq, Debug, Default)]
pub struct QuasiModularForm {
    terms: BTreeMap<QmMono, Scalar>,
}

impl QuasiModularForm {
    pub fn zero() -> Self {
        QuasiModularForm {
            terms: BTreeMap::new(),
        }
    }

    pub fn one() -> Self {
        QuasiModularForm::monomial((0, 0, 0), Scalar::one())
    }

    pub fn constant(c: Scalar) -> Self {
        QuasiModularForm::monomial((0, 0, 0), c)
    }

    pub fn e2() -> Self {
        QuasiModularForm::monomial((1, 0, 0), Scalar::one())
    }

    pub fn e4() -> Self {
        QuasiModularForm::monomial((0, 1, 0), Scalar::one())
    }

    pub fn e6() -> Self {
        QuasiModularForm::monomial((0, 0, 1), Scalar::one())
    }

    pub fn monomial(m: QmMono, c: Scalar) -> Self {
        let mut terms = BTreeMap::new();
        if !c.is_zero() {
            terms.insert(m, c);
        }
        QuasiModularForm { terms }
    }

    pub fn is_zero(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn terms(&self) -> impl Iterator<Item = (&QmMono, &Scalar)> {
        self.terms.iter()
    }

    pub fn coeff(&self, m: QmMono) -> Scalar {
        self.terms.get(&m).cloned().unwrap_or_else(Scalar::zero)
    }

    /// Weights 2a+4b+6c present in the support.
    pub fn weights(&self) -> Vec<u32> {
        let mut ws: Vec<u32> = self
            .terms
            .keys()
            .map(|(a, b, c)| 2 * a + 4 * b + 6 * c)
            .collect();
        ws.sort_unstable();
        ws.dedup();
        ws
    }

    fn insert(&mut self, m: QmMono, c: Scalar) {
        if c.is_zero() {
            return;
        }
        match self.terms.entry(m) {
            alloc::collections::btree_map::Entry::Vacant(e) => {
                e.insert(c);
            }
            alloc::collections::btree_map::Entry::Occupied(mut e) => {
                let s = &*e.get() + &c;
                if s.is_zero() {
                    e.remove();
                } else {
                    *e.get_mut() = s;
                }
            }
        }
    }

    pub fn scale(&self, c: &Scalar) -> Self {
        let mut out = QuasiModularForm::zero();
        for (m, s) in &self.terms {
            out.insert(*m, s * c);
        }
        out
    }
}

impl Add for &QuasiModularForm {
    type Output = QuasiModularForm;
    fn add(self, rhs: &QuasiModularForm) -> QuasiModularForm {
        let mut out = self.clone();
        for (m, c) in &rhs.terms {
            out.insert(*m, c.clone());
        }
        out
    }
}

impl Sub for &QuasiModularForm {
    type Output = QuasiModularForm;
    fn sub(self, rhs: &QuasiModularForm) -> QuasiModularForm {
        let mut out = self.clone();
        for (m, c) in &rhs.terms {
            out.insert(*m, -c);
        }
        out
    }
}

impl Mul for &QuasiModularForm {
    type Output = QuasiModularForm;
    fn mul(self, rhs: &QuasiModularForm) -> QuasiModularForm {
        let mut out = QuasiModularForm::zero();
        for ((a1, b1, c1), s1) in &self.terms {
            for ((a2, b2, c2), s2) in &rhs.terms {
                out.insert((a1 + a2, b1 + b2, c1 + c2), s1 * s2);
            }
        }
        out
    }
}

impl Neg for &QuasiModularForm {
    type Output = QuasiModularForm;
    fn neg(self) -> QuasiModularForm {
        let mut out = QuasiModularForm::zero();
        for (m, c) in &self.terms {
            out.terms.insert(*m, -c);
        }
        out
    }
}

/// 2*pi*i * d/dtau, computed derivation-wise from the Ramanujan system
///
/// ```text
/// (q d/dq) E2 = (E2^2 - E4)/12
/// (q d/dq) E4 = (E2*E4 - E6)/3
/// (q d/dq) E6 = (E2*E6 - E4^2)/2
/// ```
///
/// The returned form carries the `(2*pi*i)^2` prefactor explicitly
/// (one `2*pi*i` from the requested normalization, one from `q d/dq`).
pub fn qm_dtau(f: &QuasiModularForm) -> QuasiModularForm {
    let d = q_ddq(f);
    d.scale(&(Scalar::two_pi_i() * Scalar::two_pi_i()))
}

/// The derivation q d/dq = (1/2*pi*i) d/dtau on quasi-modular forms.
pub fn q_ddq(f: &QuasiModularForm) -> QuasiModularForm {
    let e2 = QuasiModularForm::e2();
    let e4 = QuasiModularForm::e4();
    let e6 = QuasiModularForm::e6();
    let de2 = (&(&e2 * &e2) - &e4).scale(&Scalar::ratio(1, 12));
    let de4 = (&(&e2 * &e4) - &e6).scale(&Scalar::ratio(1, 3));
    let de6 = (&(&e2 * &e6) - &(&e4 * &e4)).scale(&Scalar::ratio(1, 2));

    let mut out = QuasiModularForm::zero();
    for ((a, b, c), s) in &f.terms {
        // Leibniz over the three generators.
        if *a > 0 {
            let mut m = QuasiModularForm::monomial((*a - 1, *b, *c), s * &Scalar::from_int(*a as i64));
            m = &m * &de2;
            out = &out + &m;
        }
        if *b > 0 {
            let mut m = QuasiModularForm::monomial((*a, *b - 1, *c), s * &Scalar::from_int(*b as i64));
            m = &m * &de4;
            out = &out + &m;
        }
        if *c > 0 {
            let mut m = QuasiModularForm::monomial((*a, *b, *c - 1), s * &Scalar::from_int(*c as i64));
            m = &m * &de6;
            out = &out + &m;
        }
    }
    out
}

// ---------------------------------------------------------------------------
// Bernoulli numbers, zeta(2k), Eisenstein constants
// ---------------------------------------------------------------------------

/// Bernoulli numbers B_0..B_n (B_1 = -1/2), by the defining recurrence.
pub fn bernoulli(n: usize) -> Vec<BigRational> {
    let mut b: Vec<BigRational> = Vec::with_capacity(n + 1);
    for m in 0..=n {
        if m == 0 {
            b.push(BigRational::one());
            continue;
        }
        // sum_{k=0}^{m} binom(m+1,k) B_k = 0  =>  solve for B_m
        let mut acc = BigRational::zero();
        for (k, bk) in b.iter().enumerate() {
            acc += BigRational::from_integer(binomial((m + 1) as u64, k as u64)) * bk;
        }
        let denom = BigRational::from_integer(BigInt::from((m + 1) as u64));
        b.push(-acc / denom);
    }
    b
}

pub fn binomial(n: u64, k: u64) -> BigInt {
    if k > n {
        return BigInt::zero();
    }
    let mut num = BigInt::one();
    let mut den = BigInt::one();
    for j in 0..k {
        num *= BigInt::from(n - j);
        den *= BigInt::from(j + 1);
    }
    num / den
}

pub fn factorial(n: u64) -> BigInt {
    let mut f = BigInt::one();
    for j in 2..=n {
        f *= BigInt::from(j);
    }
    f
}

/// zeta(2k) = (-1)^{k+1} B_{2k} (2 pi)^{2k} / (2 (2k)!) as a [`Scalar`]
/// (an exact rational times pi^{2k}).
pub fn zeta_even(two_k: u32) -> Scalar {
    assert!(two_k >= 2 && two_k % 2 == 0);
    let k = two_k / 2;
    let b = bernoulli(two_k as usize);
    let b2k = &b[two_k as usize];
    let sign = if k % 2 == 1 {
        BigRational::one()
    } else {
        -BigRational::one()
    };
    let pow2 = BigRational::from_integer(BigInt::from(2u32).pow(two_k));
    let fact = BigRational::from_integer(factorial(two_k as u64));
    let rat = sign * b2k * pow2 / (BigRational::from_integer(BigInt::from(2)) * fact);
    Scalar::from_gauss(
        two_k as i32,
        GaussRat {
            re: rat,
            im: BigRational::zero(),
        },
    )
}

/// Classical Eisenstein series G_{2k} = 2 zeta(2k) E_{2k} in the E4, E6
/// polynomial ring. Weights above 6 come from the quadratic recurrence
///
/// ```text
/// (2m+1)(m-3)(2m-1) G_{2m} = 3 sum_{j=2}^{m-2} (2j-1)(2m-2j-1) G_{2j} G_{2m-2j}
/// ```
///
/// G_2 is excluded here (E2 is quasi-modular, not modular).
pub fn eisenstein_g(two_k: u32) -> QuasiModularForm {
    assert!(two_k >= 4 && two_k % 2 == 0, "eisenstein_g needs even weight >= 4");
    let m_top = (two_k / 2) as usize;
    let mut g: Vec<QuasiModularForm> = alloc::vec![QuasiModularForm::zero(); m_top + 1];
    if m_top >= 2 {
        g[2] = QuasiModularForm::e4().scale(&(&Scalar::from_int(2) * &zeta_even(4)));
    }
    if m_top >= 3 {
        g[3] = QuasiModularForm::e6().scale(&(&Scalar::from_int(2) * &zeta_even(6)));
    }
    for m in 4..=m_top {
        let mut acc = QuasiModularForm::zero();
        for j in 2..=(m - 2) {
            let c = (2 * j as i64 - 1) * (2 * (m - j) as i64 - 1);
            acc = &acc + &(&g[j] * &g[m - j]).scale(&Scalar::from_int(c));
        }
        let denom = (2 * m as i64 + 1) * (m as i64 - 3) * (2 * m as i64 - 1);
        g[m] = acc.scale(&Scalar::ratio(3, denom));
    }
    g[m_top].clone()
}

/// The weight-2k normalized Eisenstein series (constant term 1) written
/// in the E2, E4, E6 polynomial ring.
pub fn normalized_eisenstein(two_k: u32) -> QuasiModularForm {
    if two_k == 2 {
        return QuasiModularForm::e2();
    }
    let inv = (&Scalar::from_int(2) * &zeta_even(two_k))
        .try_inv()
        .expect("2 zeta(2k) is a pi-monomial");
    eisenstein_g(two_k).scale(&inv)
}

/// The divisor-sum coefficient -4k/B_{2k} multiplying sum sigma_{2k-1}(n) q^n
/// in the normalized Eisenstein series of weight 2k.
pub fn eisenstein_q_coefficient(two_k: u32) -> BigRational {
    let b = bernoulli(two_k as usize);
    let b2k = &b[two_k as usize];
    -BigRational::from_integer(BigInt::from(2 * two_k)) / b2k
}

impl fmt::Display for QuasiModularForm {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        use alloc::format;
        if self.terms.is_empty() {
            return write!(f, "0");
        }
        let parts: Vec<String> = self
            .terms
            .iter()
            .map(|((a, b, c), s)| {
                let mut factors: Vec<String> = Vec::new();
                let coeff = format!("{}", s);
                let coeff = if s.terms().count() > 1 {
                    format!("({})", coeff)
                } else {
                    coeff
                };
                factors.push(coeff);
                for (name, pow) in [("E2", a), ("E4", b), ("E6", c)] {
                    match pow {
                        0 => {}
                        1 => factors.push(String::from(name)),
                        p => factors.push(format!("{}^{}", name, p)),
                    }
                }
                factors.join("*")
            })
            .collect();
        write!(f, "{}", parts.join(" + "))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::vec;

    #[test]
    fn bernoulli_table() {
        let b = bernoulli(12);
        assert_eq!(b[2], BigRational::new(BigInt::from(1), BigInt::from(6)));
        assert_eq!(b[4], BigRational::new(BigInt::from(-1), BigInt::from(30)));
        assert_eq!(b[6], BigRational::new(BigInt::from(1), BigInt::from(42)));
        assert_eq!(
            b[12],
            BigRational::new(BigInt::from(-691), BigInt::from(2730))
        );
    }

    #[test]
    fn zeta_values() {
        assert_eq!(zeta_even(2), Scalar::rational_pi(1, 6, 2));
        assert_eq!(zeta_even(4), Scalar::rational_pi(1, 90, 4));
        assert_eq!(zeta_even(6), Scalar::rational_pi(1, 945, 6));
    }

    #[test]
    fn eisenstein_divisor_coefficients() {
        assert_eq!(
            eisenstein_q_coefficient(2),
            BigRational::from_integer(BigInt::from(-24))
        );
        assert_eq!(
            eisenstein_q_coefficient(4),
            BigRational::from_integer(BigInt::from(240))
        );
        assert_eq!(
            eisenstein_q_coefficient(6),
            BigRational::from_integer(BigInt::from(-504))
        );
    }

    #[test]
    fn ramanujan_on_e2() {
        // qm_dtau(E2) = (2 pi i)^2 (E2^2 - E4)/12 = -(pi^2/3)(E2^2 - E4)
        let d = qm_dtau(&QuasiModularForm::e2());
        let expect = (&(&QuasiModularForm::e2() * &QuasiModularForm::e2())
            - &QuasiModularForm::e4())
            .scale(&Scalar::rational_pi(-1, 3, 2));
        assert_eq!(d, expect);
    }

    #[test]
    fn dtau_kills_constants() {
        let c = QuasiModularForm::constant(Scalar::from_int(7));
        assert!(qm_dtau(&c).is_zero());
    }

    #[test]
    fn dtau_is_derivation() {
        let f = &QuasiModularForm::e2() + &QuasiModularForm::e4();
        let g = &QuasiModularForm::e6() + &QuasiModularForm::constant(Scalar::ratio(3, 5));
        let lhs = qm_dtau(&(&f * &g));
        let rhs = &(&qm_dtau(&f) * &g) + &(&f * &qm_dtau(&g));
        assert_eq!(lhs, rhs);
    }

    #[test]
    fn weights_bookkeeping() {
        let f = &(&QuasiModularForm::e2() * &QuasiModularForm::e4()) + &QuasiModularForm::e6();
        assert_eq!(f.weights(), vec![6]);
    }
}
