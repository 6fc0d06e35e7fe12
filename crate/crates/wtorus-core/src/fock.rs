//! The charge-zero Fock module of a single free chiral boson.
//!
//! States are exact-rational combinations of creation monomials
//! `a_{-i_1} ... a_{-i_k} |0>` (modes of the weight-one current
//! `a(z) = d phi(z)`, with `[a_m, a_n] = m delta_{m+n,0}`). The state
//! `a_{-i}|0>` corresponds to the field `d^i phi / (i-1)!`; with this
//! normalization every mode product in the W-algebra range is rational.
//!
//! Mode products `a_(n) b` are computed by expanding the normal-ordered
//! product of the generating fields and contracting annihilation modes
//! against the target monomial (Wick's theorem). Everything is exact and
//! finite; there is no truncation anywhere.

use alloc::collections::BTreeMap;
use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;
use core::fmt;

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{One, Zero};

/// Creation monomial: sorted (ascending) multiset of positive mode indices.
/// The empty monomial is the vacuum.
#[derive(Clone, PartialEq, Eq, PartialOrd, Ord, Debug, Default)]
pub struct FockMono(pub Vec<u32>);

impl FockMono {
    pub fn vacuum() -> Self {
        FockMono(Vec::new())
    }

    pub fn degree(&self) -> u32 {
        self.0.iter().sum()
    }

    fn normalized(mut modes: Vec<u32>) -> Self {
        modes.sort_unstable();
        FockMono(modes)
    }
}

/// Finite linear combination of creation monomials with exact rational
/// coefficients.
#[derive(Clone, PartialEq, Eq, Debug, Default)]
pub struct FockState {
    terms: BTreeMap<FockMono, BigRational>,
}

/// Sanity bound; identities used in this crate are finite-degree exact,
/// so blowing past this indicates a caller bug rather than a big input.
pub const MAX_DEGREE: u32 = 96;

impl FockState {
    pub fn zero() -> Self {
        FockState {
            terms: BTreeMap::new(),
        }
    }

    pub fn vacuum() -> Self {
        FockState::monomial(FockMono::vacuum(), BigRational::one())
    }

    pub fn monomial(m: FockMono, c: BigRational) -> Self {
        assert!(m.degree() <= MAX_DEGREE, "Fock degree cap exceeded");
        let mut terms = BTreeMap::new();
        if !c.is_zero() {
            terms.insert(m, c);
        }
        FockState { terms }
    }

    /// `a_{-i}|0>` for i >= 1.
    pub fn creation(i: u32) -> Self {
        assert!(i >= 1);
        FockState::monomial(FockMono(vec![i]), BigRational::one())
    }

    /// The conformal vector `omega = 1/2 a_{-1}^2 |0>`.
    pub fn omega() -> Self {
        FockState::monomial(
            FockMono(vec![1, 1]),
            BigRational::new(BigInt::one(), BigInt::from(2)),
        )
    }

    pub fn is_zero(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn terms(&self) -> impl Iterator<Item = (&FockMono, &BigRational)> {
        self.terms.iter()
    }

    pub fn num_terms(&self) -> usize {
        self.terms.len()
    }

    pub fn coeff(&self, m: &FockMono) -> BigRational {
        self.terms.get(m).cloned().unwrap_or_else(BigRational::zero)
    }

    fn insert(&mut self, m: FockMono, c: BigRational) {
        if c.is_zero() {
            return;
        }
        assert!(m.degree() <= MAX_DEGREE, "Fock degree cap exceeded");
        match self.terms.entry(m) {
            alloc::collections::btree_map::Entry::Vacant(e) => {
                e.insert(c);
            }
            alloc::collections::btree_map::Entry::Occupied(mut e) => {
                let s = e.get() + c;
                if s.is_zero() {
                    e.remove();
                } else {
                    *e.get_mut() = s;
                }
            }
        }
    }

    pub fn add(&self, other: &FockState) -> FockState {
        let mut out = self.clone();
        for (m, c) in &other.terms {
            out.insert(m.clone(), c.clone());
        }
        out
    }

    pub fn sub(&self, other: &FockState) -> FockState {
        let mut out = self.clone();
        for (m, c) in &other.terms {
            out.insert(m.clone(), -c.clone());
        }
        out
    }

    pub fn scale(&self, c: &BigRational) -> FockState {
        let mut out = FockState::zero();
        if c.is_zero() {
            return out;
        }
        for (m, k) in &self.terms {
            out.terms.insert(m.clone(), k * c);
        }
        out
    }

    pub fn scale_int(&self, c: i64) -> FockState {
        self.scale(&BigRational::from_integer(BigInt::from(c)))
    }

    /// Degrees present in the support.
    pub fn degrees(&self) -> Vec<u32> {
        let mut ds: Vec<u32> = self.terms.keys().map(|m| m.degree()).collect();
        ds.sort_unstable();
        ds.dedup();
        ds
    }

    /// The homogeneous component of a given degree.
    pub fn component(&self, degree: u32) -> FockState {
        let mut out = FockState::zero();
        for (m, c) in &self.terms {
            if m.degree() == degree {
                out.terms.insert(m.clone(), c.clone());
            }
        }
        out
    }

    /// True if homogeneous of the given degree (zero counts for any degree).
    pub fn is_homogeneous(&self, degree: u32) -> bool {
        self.terms.keys().all(|m| m.degree() == degree)
    }

    /// Projection killing the degree-zero part.
    pub fn positive_part(&self) -> FockState {
        let mut out = self.clone();
        out.terms.remove(&FockMono::vacuum());
        out
    }
}

// ---------------------------------------------------------------------------
// Mode products
// ---------------------------------------------------------------------------

/// Coefficient of `a_m z^{-m-i}` in the field `d^{i-1} a(z) / (i-1)!`,
/// i.e. the generalized binomial `(-1)^{i-1} C(m+i-1, i-1)`.
fn field_mode_coeff(i: u32, m: i64) -> BigRational {
    let mut num = BigInt::one();
    let mut den = BigInt::one();
    for t in 1..i as i64 {
        num *= BigInt::from(m + i as i64 - t);
        den *= BigInt::from(t);
    }
    let sign = if (i - 1) % 2 == 0 {
        BigInt::one()
    } else {
        -BigInt::one()
    };
    BigRational::new(sign * num, den)
}

fn mode_action_mono(
    fields: &[u32],
    n: i64,
    target: &FockMono,
    out: &mut FockState,
    base_coeff: &BigRational,
) {
    let total: i64 = n + 1 - fields.iter().map(|&i| i as i64).sum::<i64>();
    // Recursive assignment of a mode to each field factor. Positive modes
    // contract into `avail`; negative modes are collected as new creators.
    fn rec(
        fields: &[u32],
        s: usize,
        remaining: i64,
        avail: &mut Vec<u32>,
        created: &mut Vec<u32>,
        coeff: BigRational,
        out: &mut FockState,
    ) {
        if coeff.is_zero() {
            return;
        }
        if s == fields.len() {
            if remaining == 0 {
                let mut modes = created.clone();
                modes.extend_from_slice(avail);
                out.insert(FockMono::normalized(modes), coeff);
            }
            return;
        }
        let i = fields[s];
        // Remaining fields each contribute at least -(unbounded) ... bound the
        // choices: positive modes must appear in `avail`; negative modes need
        // the rest of the sum to close, each later field can contribute at
        // most `max_pos` positively.
        let later = &fields[s + 1..];
        let max_pos_later: i64 = later
            .iter()
            .map(|_| avail.iter().map(|&j| j as i64).max().unwrap_or(0))
            .sum();
        // annihilation choices: distinct mode values in avail
        let mut seen = Vec::new();
        for idx in 0..avail.len() {
            let m = avail[idx];
            if seen.contains(&m) {
                continue;
            }
            seen.push(m);
            let count = avail.iter().filter(|&&x| x == m).count() as i64;
            let factor = BigRational::from_integer(BigInt::from(m as i64) * BigInt::from(count));
            let c = &coeff * field_mode_coeff(i, m as i64) * factor;
            let pos = avail.iter().position(|&x| x == m).unwrap();
            let removed = avail.remove(pos);
            rec(fields, s + 1, remaining - m as i64, avail, created, c, out);
            avail.insert(pos, removed);
        }
        // creation choices: m = -c, c >= 1; need remaining - m achievable:
        // remaining + c <= max_pos_later  =>  c <= max_pos_later - remaining
        let cmax = max_pos_later - remaining;
        let mut c = 1i64;
        while c <= cmax {
            let co = &coeff * field_mode_coeff(i, -c);
            if !co.is_zero() {
                created.push(c as u32);
                rec(fields, s + 1, remaining + c, avail, created, co, out);
                created.pop();
            }
            c += 1;
        }
    }

    let mut avail: Vec<u32> = target.0.clone();
    let mut created: Vec<u32> = Vec::new();
    rec(
        fields,
        0,
        total,
        &mut avail,
        &mut created,
        base_coeff.clone(),
        out,
    );
}

/// The n-th mode product `a_(n) b`.
pub fn mode_action(a: &FockState, n: i64, b: &FockState) -> FockState {
    let mut out = FockState::zero();
    for (am, ac) in &a.terms {
        for (bm, bc) in &b.terms {
            let coeff = ac * bc;
            mode_action_mono(&am.0, n, bm, &mut out, &coeff);
        }
    }
    out
}

/// Translation operator `T = L_{-1}`: raises each mode index by one,
/// weighted by the index.
pub fn translate(a: &FockState) -> FockState {
    let mut out = FockState::zero();
    for (m, c) in &a.terms {
        for s in 0..m.0.len() {
            // skip duplicates: raise the first occurrence of each value,
            // weighted by multiplicity, to avoid double counting
            if s > 0 && m.0[s] == m.0[s - 1] {
                continue;
            }
            let val = m.0[s];
            let mult = m.0.iter().filter(|&&x| x == val).count() as i64;
            let mut modes = m.0.clone();
            modes[s] = val + 1;
            out.insert(
                FockMono::normalized(modes),
                c * BigRational::from_integer(BigInt::from(val as i64 * mult)),
            );
        }
    }
    out
}

pub fn translate_pow(a: &FockState, k: u32) -> FockState {
    let mut out = a.clone();
    for _ in 0..k {
        out = translate(&out);
    }
    out
}

/// Virasoro mode `L_n b = omega_(n+1) b` (central charge 1).
pub fn virasoro_mode(n: i64, b: &FockState) -> FockState {
    mode_action(&FockState::omega(), n + 1, b)
}

impl fmt::Display for FockState {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        use alloc::format;
        if self.terms.is_empty() {
            return write!(f, "0");
        }
        let parts: Vec<String> = self
            .terms
            .iter()
            .map(|(m, c)| {
                let coeff = if c.denom().is_one() {
                    format!("{}", c.numer())
                } else {
                    format!("{}/{}", c.numer(), c.denom())
                };
                if m.0.is_empty() {
                    format!("{}*vac", coeff)
                } else {
                    let modes: Vec<String> =
                        m.0.iter().rev().map(|i| format!("a[-{}]", i)).collect();
                    format!("{}*{}vac", coeff, {
                        let mut s = modes.join("");
                        s.push(' ');
                        s
                    })
                }
            })
            .collect();
        write!(f, "{}", parts.join(" + "))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn rat(n: i64, d: i64) -> BigRational {
        BigRational::new(BigInt::from(n), BigInt::from(d))
    }

    #[test]
    fn omega_mode_one_on_omega() {
        // L_0 omega = omega_(1) omega = 2 omega
        let w = FockState::omega();
        let r = mode_action(&w, 1, &w);
        assert_eq!(r, w.scale_int(2));
    }

    #[test]
    fn central_charge_is_one() {
        // omega_(3) omega = c/2 |0> with c = 1
        let w = FockState::omega();
        let r = mode_action(&w, 3, &w);
        assert_eq!(r, FockState::vacuum().scale(&rat(1, 2)));
    }

    #[test]
    fn vacuum_axiom() {
        let a = FockState::monomial(FockMono(vec![1, 2]), rat(1, 1));
        for n in 0..6 {
            assert!(mode_action(&a, n, &FockState::vacuum()).is_zero());
        }
        assert_eq!(mode_action(&a, -1, &FockState::vacuum()), a);
    }

    #[test]
    fn translate_basics() {
        assert!(translate(&FockState::vacuum()).is_zero());
        assert_eq!(translate(&FockState::creation(1)), FockState::creation(2));
        // T = omega_(0)
        let a = FockState::monomial(FockMono(vec![1, 1, 2]), rat(3, 7));
        assert_eq!(translate(&a), mode_action(&FockState::omega(), 0, &a));
    }

    #[test]
    fn grading_of_mode_products() {
        // deg(a_(n) b) = deg a + deg b - n - 1
        let a = FockState::monomial(FockMono(vec![2, 3]), rat(1, 1));
        let b = FockState::monomial(FockMono(vec![1, 1]), rat(1, 1));
        for n in -3..6 {
            let r = mode_action(&a, n, &b);
            let expect = 5 + 2 - n - 1;
            if expect < 0 {
                assert!(r.is_zero());
            } else {
                assert!(r.is_homogeneous(expect as u32));
            }
        }
    }

    #[test]
    fn l1_on_weight_one_primary() {
        let a = FockState::creation(1);
        assert!(virasoro_mode(1, &a).is_zero());
        assert_eq!(virasoro_mode(0, &a), a);
    }

    #[test]
    fn virasoro_commutator() {
        // [L_m, L_n] = (m-n) L_{m+n} + (1/12)(m^3 - m) delta_{m+n,0}
        let samples = [
            FockState::creation(1),
            FockState::omega(),
            FockState::monomial(FockMono(vec![1, 2, 3]), rat(2, 3)),
        ];
        for m in -3i64..=3 {
            for n in -3i64..=3 {
                for b in &samples {
                    let lhs = virasoro_mode(m, &virasoro_mode(n, b))
                        .sub(&virasoro_mode(n, &virasoro_mode(m, b)));
                    let mut rhs = virasoro_mode(m + n, b).scale_int(m - n);
                    if m + n == 0 {
                        let central = rat(m * m * m - m, 12);
                        rhs = rhs.add(&b.scale(&central));
                    }
                    assert_eq!(lhs, rhs, "[L_{}, L_{}]", m, n);
                }
            }
        }
    }

    #[test]
    fn kernel_of_t_in_positive_degree() {
        // ker T restricted to degree > 0 is zero: T injective on a basis
        // sample of low degrees (solve T x = 0 componentwise is equivalent
        // to checking monomial images stay independent; here spot-check).
        for i in 1..6 {
            let t = translate(&FockState::creation(i));
            assert!(!t.is_zero());
        }
        let mix = FockState::monomial(FockMono(vec![1, 1]), rat(1, 1))
            .sub(&FockState::monomial(FockMono(vec![2]), rat(1, 1)));
        assert!(!translate(&mix).is_zero());
    }
}
