//! Exact truncated q,x-series in the fixed expansion region
//! `|q| < |x_1| < ... < |x_n| < 1` (equivalently `Im tau > Im z_1 > ... >
//! Im z_n > 0`).
//!
//! Monomials `q^a x_1^{e_1} ... x_n^{e_n}` that converge in this region
//! form the monoid of lattice points with nonnegative partial sums
//! `b_p = a + e_1 + ... + e_p >= 0`. We store exponents in these cone
//! coordinates `(b_0, ..., b_n)`, which turns every kernel expansion into
//! an honest power series: truncation by a componentwise cap is an ideal,
//! so products of cap-complete series are cap-complete and extraction is
//! never silently lossy.
//!
//! Coefficients are polynomials in the formal symbols `Y = 1/Im tau` and
//! `L_i = Im z_i / Im tau` over [`Scalar`]; a Dedekind-eta exponent rides
//! along as a marker.

use alloc::collections::BTreeMap;
use alloc::string::String;
use alloc::vec::Vec;
use core::fmt;

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{One, Zero};

use crate::qmf::{binomial, eisenstein_q_coefficient, factorial, QuasiModularForm};
use crate::scalar::Scalar;

/// Monomial in the almost-holomorphic symbols: `Y^y * prod_i L_i^{lam[i]}`.
pub type LamKey = (u32, Vec<u32>);

/// Polynomial in Y and the lambda symbols over [`Scalar`].
pub type LamPoly = BTreeMap<LamKey, Scalar>;

pub fn lampoly_scalar(slots: usize, s: Scalar) -> LamPoly {
    let mut p = LamPoly::new();
    if !s.is_zero() {
        p.insert((0, alloc::vec![0u32; slots]), s);
    }
    p
}

fn lampoly_add_into(dst: &mut LamPoly, src: &LamPoly) {
    for (k, v) in src {
        match dst.entry(k.clone()) {
            alloc::collections::btree_map::Entry::Vacant(e) => {
                e.insert(v.clone());
            }
            alloc::collections::btree_map::Entry::Occupied(mut e) => {
                let s = &*e.get() + v;
                if s.is_zero() {
                    e.remove();
                } else {
                    *e.get_mut() = s;
                }
            }
        }
    }
}

fn lampoly_mul(a: &LamPoly, b: &LamPoly) -> LamPoly {
    let mut out = LamPoly::new();
    for ((y1, l1), s1) in a {
        for ((y2, l2), s2) in b {
            let y = y1 + y2;
            let l: Vec<u32> = l1.iter().zip(l2.iter()).map(|(p, q)| p + q).collect();
            let s = s1 * s2;
            if s.is_zero() {
                continue;
            }
            let mut single = LamPoly::new();
            single.insert((y, l), s);
            lampoly_add_into(&mut out, &single);
        }
    }
    out
}

/// Errors from series construction and extraction.
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum SeriesError {
    UnsupportedEisenstein(u32),
    VariableNotActive(usize),
    LambdaPresent(usize),
    CtObstruction(usize),
}

impl fmt::Display for SeriesError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            SeriesError::UnsupportedEisenstein(k) => write!(f, "unsupported Eisenstein weight {}", k),
            SeriesError::VariableNotActive(i) => write!(f, "variable x{} not active in this series", i + 1),
            SeriesError::LambdaPresent(i) => write!(f, "lambda_{} present where forbidden", i + 1),
            SeriesError::CtObstruction(i) => write!(f, "nonzero constant term obstructs antiderivative in x{}", i + 1),
        }
    }
}

/// Exact truncated q,x-series with region-ordered variables.
#[derive(Clone, PartialEq, Eq, Debug)]
pub struct QxSeries {
    /// Active slots in decreasing height (`order[0]` has the largest Im z).
    pub order: Vec<usize>,
    /// Total number of global slots (length of every lambda vector).
    pub slots: usize,
    /// Componentwise completeness cap on the cone exponents.
    pub cap: i64,
    /// Dedekind-eta exponent marker.
    pub eta: i32,
    terms: BTreeMap<Vec<i64>, LamPoly>,
}

impl QxSeries {
    pub fn zero(order: Vec<usize>, slots: usize, cap: i64) -> Self {
        QxSeries {
            order,
            slots,
            cap,
            eta: 0,
            terms: BTreeMap::new(),
        }
    }

    pub fn constant(order: Vec<usize>, slots: usize, cap: i64, s: Scalar) -> Self {
        let mut out = QxSeries::zero(order, slots, cap);
        let zero_mono = alloc::vec![0i64; out.order.len() + 1];
        let p = lampoly_scalar(slots, s);
        if !p.is_empty() {
            out.terms.insert(zero_mono, p);
        }
        out
    }

    pub fn one(order: Vec<usize>, slots: usize, cap: i64) -> Self {
        QxSeries::constant(order, slots, cap, Scalar::one())
    }

    pub fn is_zero(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn terms(&self) -> impl Iterator<Item = (&Vec<i64>, &LamPoly)> {
        self.terms.iter()
    }

    fn position_of(&self, slot: usize) -> Option<usize> {
        self.order.iter().position(|&s| s == slot)
    }

    fn insert(&mut self, mono: Vec<i64>, p: LamPoly) {
        if p.is_empty() {
            return;
        }
        if mono.iter().any(|&b| b > self.cap) {
            return;
        }
        match self.terms.entry(mono) {
            alloc::collections::btree_map::Entry::Vacant(e) => {
                e.insert(p);
            }
            alloc::collections::btree_map::Entry::Occupied(mut e) => {
                lampoly_add_into(e.get_mut(), &p);
                if e.get().is_empty() {
                    e.remove();
                }
            }
        }
    }

    pub fn add(&self, other: &QxSeries) -> QxSeries {
        assert_eq!(self.order, other.order);
        assert_eq!(self.eta, other.eta, "eta markers must agree for addition");
        let mut out = self.clone();
        out.cap = self.cap.min(other.cap);
        out.terms.retain(|m, _| m.iter().all(|&b| b <= out.cap));
        for (m, p) in &other.terms {
            out.insert(m.clone(), p.clone());
        }
        out
    }

    pub fn sub(&self, other: &QxSeries) -> QxSeries {
        self.add(&other.scale(&-&Scalar::one()))
    }

    pub fn scale(&self, s: &Scalar) -> QxSeries {
        let mut out = QxSeries::zero(self.order.clone(), self.slots, self.cap);
        out.eta = self.eta;
        if s.is_zero() {
            return out;
        }
        for (m, p) in &self.terms {
            let sp: LamPoly = p
                .iter()
                .filter_map(|(k, v)| {
                    let s2 = v * s;
                    if s2.is_zero() {
                        None
                    } else {
                        Some((k.clone(), s2))
                    }
                })
                .collect();
            out.insert(m.clone(), sp);
        }
        out
    }

    /// Multiply by `Y^y * prod L_i^{li}`.
    pub fn scale_lam(&self, y: u32, lam: &[u32]) -> QxSeries {
        assert_eq!(lam.len(), self.slots);
        let mut out = QxSeries::zero(self.order.clone(), self.slots, self.cap);
        out.eta = self.eta;
        let mut unit = LamPoly::new();
        unit.insert((y, lam.to_vec()), Scalar::one());
        for (m, p) in &self.terms {
            out.insert(m.clone(), lampoly_mul(p, &unit));
        }
        out
    }

    pub fn mul(&self, other: &QxSeries) -> QxSeries {
        assert_eq!(self.order, other.order);
        let mut out = QxSeries::zero(self.order.clone(), self.slots, self.cap.min(other.cap));
        out.eta = self.eta + other.eta;
        for (m1, p1) in &self.terms {
            for (m2, p2) in &other.terms {
                let m: Vec<i64> = m1.iter().zip(m2.iter()).map(|(a, b)| a + b).collect();
                if m.iter().any(|&b| b > out.cap) {
                    continue;
                }
                out.insert(m, lampoly_mul(p1, p2));
            }
        }
        out
    }

    /// Multiply by a single `q^a x^e` monomial given in cone increments;
    /// negative increments lower the completeness cap accordingly.
    pub fn mul_mono(&self, incr: &[i64], coeff: &Scalar) -> QxSeries {
        assert_eq!(incr.len(), self.order.len() + 1);
        let neg = incr.iter().map(|&d| d.min(0)).min().unwrap_or(0);
        let mut out = QxSeries::zero(self.order.clone(), self.slots, self.cap + neg);
        out.eta = self.eta;
        for (m, p) in &self.terms {
            let m2: Vec<i64> = m.iter().zip(incr.iter()).map(|(a, d)| a + d).collect();
            if m2.iter().any(|&b| b > out.cap) {
                continue;
            }
            let sp: LamPoly = p
                .iter()
                .filter_map(|(k, v)| {
                    let s2 = v * coeff;
                    if s2.is_zero() {
                        None
                    } else {
                        Some((k.clone(), s2))
                    }
                })
                .collect();
            out.insert(m2, sp);
        }
        out
    }

    /// d/dz_i: multiplies each monomial by `2 pi i e_i`.
    pub fn deriv(&self, slot: usize) -> QxSeries {
        let p = self.position_of(slot).expect("deriv: inactive variable") + 1;
        let mut out = QxSeries::zero(self.order.clone(), self.slots, self.cap);
        out.eta = self.eta;
        for (m, poly) in &self.terms {
            let e = m[p] - m[p - 1];
            if e == 0 {
                continue;
            }
            let c = &Scalar::two_pi_i() * &Scalar::from_int(e);
            let sp: LamPoly = poly
                .iter()
                .filter_map(|(k, v)| {
                    let s2 = v * &c;
                    if s2.is_zero() {
                        None
                    } else {
                        Some((k.clone(), s2))
                    }
                })
                .collect();
            out.insert(m.clone(), sp);
        }
        out
    }

    /// Antiderivative in z_i on series with no x_i-constant term;
    /// a nonzero constant term is reported as an obstruction.
    pub fn antideriv(&self, slot: usize) -> Result<QxSeries, SeriesError> {
        let p = self.position_of(slot).ok_or(SeriesError::VariableNotActive(slot))? + 1;
        let mut out = QxSeries::zero(self.order.clone(), self.slots, self.cap);
        out.eta = self.eta;
        for (m, poly) in &self.terms {
            let e = m[p] - m[p - 1];
            if e == 0 {
                return Err(SeriesError::CtObstruction(slot));
            }
            let c = (&Scalar::two_pi_i() * &Scalar::from_int(e))
                .try_inv()
                .expect("2 pi i e is invertible");
            let sp: LamPoly = poly.iter().map(|(k, v)| (k.clone(), v * &c)).collect();
            out.insert(m.clone(), sp);
        }
        Ok(out)
    }

    /// `2 pi i d/dtau` at fixed z: multiplies by `(2 pi i)^2 a` with `a`
    /// the q-exponent.
    pub fn dtau(&self) -> QxSeries {
        let mut out = QxSeries::zero(self.order.clone(), self.slots, self.cap);
        out.eta = self.eta;
        let c2 = &Scalar::two_pi_i() * &Scalar::two_pi_i();
        for (m, poly) in &self.terms {
            let a = m[0];
            if a == 0 {
                continue;
            }
            let c = &c2 * &Scalar::from_int(a);
            let sp: LamPoly = poly.iter().map(|(k, v)| (k.clone(), v * &c)).collect();
            out.insert(m.clone(), sp);
        }
        out
    }

    /// The constant term in `x_i` (the A-cycle integral over z_i at its
    /// region height): keeps monomials with `e_i = 0` and removes the
    /// variable. Fails if lambda_i appears or the variable is inactive.
    pub fn constant_term(&self, slot: usize) -> Result<QxSeries, SeriesError> {
        let pos = self.position_of(slot).ok_or(SeriesError::VariableNotActive(slot))?;
        let p = pos + 1;
        let mut new_order = self.order.clone();
        new_order.remove(pos);
        let mut out = QxSeries::zero(new_order, self.slots, self.cap);
        out.eta = self.eta;
        for (m, poly) in &self.terms {
            for ((_, lam), _) in poly {
                if lam[slot] != 0 {
                    return Err(SeriesError::LambdaPresent(slot));
                }
            }
            if m[p] != m[p - 1] {
                continue;
            }
            let mut m2 = m.clone();
            m2.remove(p);
            out.insert(m2, poly.clone());
        }
        Ok(out)
    }

    /// Splits by lambda_i power: returns the list of (power, series with
    /// that power stripped).
    pub fn lambda_split(&self, slot: usize) -> Vec<(u32, QxSeries)> {
        let mut by_pow: BTreeMap<u32, QxSeries> = BTreeMap::new();
        for (m, poly) in &self.terms {
            for ((y, lam), s) in poly {
                let r = lam[slot];
                let mut lam2 = lam.clone();
                lam2[slot] = 0;
                let entry = by_pow.entry(r).or_insert_with(|| {
                    let mut z = QxSeries::zero(self.order.clone(), self.slots, self.cap);
                    z.eta = self.eta;
                    z
                });
                let mut single = LamPoly::new();
                single.insert((*y, lam2), s.clone());
                entry.insert(m.clone(), single);
            }
        }
        by_pow.into_iter().collect()
    }

    /// Substitutes `lambda_i -> lambda_j + t*(Y/2i)` symbolically, used by
    /// the shrinking-contour residue rule; `t` is returned as the formal
    /// epsilon-degree, i.e. the output lists (epsilon power, series).
    pub fn lambda_collapse(&self, i: usize, j: usize) -> Vec<(u32, QxSeries)> {
        let mut out: BTreeMap<u32, QxSeries> = BTreeMap::new();
        for (r, stripped) in self.lambda_split(i) {
            // (lambda_j + eps Y / 2i)^r
            for t in 0..=r {
                let c = Scalar::from_rational(BigRational::from_integer(binomial(r as u64, t as u64)));
                let half = Scalar::half_inv_i().pow(t);
                let mut lam = alloc::vec![0u32; self.slots];
                lam[j] = r - t;
                let piece = stripped.scale(&(&c * &half)).scale_lam(t, &lam);
                match out.entry(t) {
                    alloc::collections::btree_map::Entry::Vacant(e) => {
                        e.insert(piece);
                    }
                    alloc::collections::btree_map::Entry::Occupied(mut e) => {
                        let s = e.get().add(&piece);
                        *e.get_mut() = s;
                    }
                }
            }
        }
        out.into_iter().filter(|(_, s)| !s.is_zero()).collect()
    }

    /// Comparison up to the common cap.
    pub fn eq_to_cap(&self, other: &QxSeries) -> bool {
        let cap = self.cap.min(other.cap);
        let filt = |s: &QxSeries| -> BTreeMap<Vec<i64>, LamPoly> {
            s.terms
                .iter()
                .filter(|(m, _)| m.iter().all(|&b| b <= cap))
                .map(|(m, p)| (m.clone(), p.clone()))
                .collect()
        };
        self.eta == other.eta && filt(self) == filt(other)
    }
}

// ---------------------------------------------------------------------------
// Kernel expansions
// ---------------------------------------------------------------------------

/// Normalized Eisenstein series E_k as a q-series (exact divisor sums).
pub fn qx_expand_eisenstein(k: u32, n_q: i64) -> Result<QxSeries, SeriesError> {
    qx_expand_eisenstein_in(k, Vec::new(), 0, n_q)
}

/// Eisenstein expansion embedded into an ambient variable context.
pub fn qx_expand_eisenstein_in(
    k: u32,
    order: Vec<usize>,
    slots: usize,
    cap: i64,
) -> Result<QxSeries, SeriesError> {
    if !(k == 2 || k == 4 || k == 6) {
        return Err(SeriesError::UnsupportedEisenstein(k));
    }
    let coeff = eisenstein_q_coefficient(k);
    let m = order.len() + 1;
    let mut out = QxSeries::one(order, slots, cap);
    for n in 1..=cap.max(0) {
        let sigma: BigInt = divisors(n as u64)
            .into_iter()
            .map(|d| BigInt::from(d).pow(k - 1))
            .sum();
        let c = Scalar::from_rational(&coeff * BigRational::from_integer(sigma));
        let mono = alloc::vec![n; m];
        out.insert(mono, lampoly_scalar(slots, c));
    }
    Ok(out)
}

pub fn divisors(n: u64) -> Vec<u64> {
    let mut out = Vec::new();
    let mut d = 1;
    while d * d <= n {
        if n % d == 0 {
            out.push(d);
            if d != n / d {
                out.push(n / d);
            }
        }
        d += 1;
    }
    out.sort_unstable();
    out
}

/// Expansion of a quasi-modular form (pure q-series in the ambient
/// context).
pub fn expand_qmf(
    f: &QuasiModularForm,
    order: Vec<usize>,
    slots: usize,
    cap: i64,
) -> QxSeries {
    let mut out = QxSeries::zero(order.clone(), slots, cap);
    let e2 = qx_expand_eisenstein_in(2, order.clone(), slots, cap).unwrap();
    let e4 = qx_expand_eisenstein_in(4, order.clone(), slots, cap).unwrap();
    let e6 = qx_expand_eisenstein_in(6, order.clone(), slots, cap).unwrap();
    for ((a, b, c), s) in f.terms() {
        let mut t = QxSeries::constant(order.clone(), slots, cap, s.clone());
        for _ in 0..*a {
            t = t.mul(&e2);
        }
        for _ in 0..*b {
            t = t.mul(&e4);
        }
        for _ in 0..*c {
            t = t.mul(&e6);
        }
        out = out.add(&t);
    }
    out
}

/// Which kernel to expand.
#[derive(Clone, Copy, PartialEq, Eq, Debug)]
pub enum KernelKind {
    /// `d^a P(z_i - z_j)` (P is the double-pole propagator).
    PDeriv(u32),
    /// The one-periodic quasi-elliptic zeta `Z(z_i - z_j)`.
    Zeta,
}

/// Expands a kernel of the pair `(i, j)` (argument `z_i - z_j`) in the
/// given context. Positions in `order` decide which Fourier form applies;
/// parity converts automatically when `z_j` sits above `z_i`.
pub fn expand_kernel(
    kind: KernelKind,
    i: usize,
    j: usize,
    order: &[usize],
    slots: usize,
    cap: i64,
) -> QxSeries {
    let pos_i = order.iter().position(|&s| s == i).expect("kernel: z_i inactive");
    let pos_j = order.iter().position(|&s| s == j).expect("kernel: z_j inactive");
    assert_ne!(pos_i, pos_j);
    // sign from flipping the argument to match the region
    let (hi, lo, sign) = if pos_i < pos_j {
        (pos_i, pos_j, Scalar::one())
    } else {
        match kind {
            KernelKind::PDeriv(a) => {
                let s = if a % 2 == 0 { Scalar::one() } else { -&Scalar::one() };
                (pos_j, pos_i, s)
            }
            KernelKind::Zeta => (pos_j, pos_i, -&Scalar::one()),
        }
    };
    // u = x_hi / x_lo occupies cone components (hi+1 ..= lo)
    let m = order.len() + 1;
    let u_mono = |k: i64| -> Vec<i64> {
        let mut v = alloc::vec![0i64; m];
        for p in (hi + 1)..=lo {
            v[p] = k;
        }
        v
    };
    let q_mono = |n: i64| -> Vec<i64> { alloc::vec![n; m] };
    let add_vec = |a: &[i64], b: &[i64]| -> Vec<i64> {
        a.iter().zip(b.iter()).map(|(x, y)| x + y).collect()
    };

    let mut out = QxSeries::zero(order.to_vec(), slots, cap);
    match kind {
        KernelKind::PDeriv(a) => {
            // P^(a)(w) = (2 pi i)^{2+a} [ sum_{k>=1} k^{a+1} u^k
            //   + sum_{n>=1} q^n sum_{d|n} d^{a+1} (u^d + (-1)^a u^{-d}) ]
            let pref = Scalar::two_pi_i().pow(2 + a);
            let pref = &pref * &sign;
            let seg = (lo - hi) as i64;
            let kmax = if seg > 0 { cap / seg } else { 0 };
            for k in 1..=kmax {
                let c = &pref * &Scalar::from_rational(BigRational::from_integer(BigInt::from(k).pow(a + 1)));
                out.insert(u_mono(k), lampoly_scalar(slots, c));
            }
            for n in 1..=cap.max(0) {
                for d in divisors(n as u64) {
                    let dv = BigRational::from_integer(BigInt::from(d).pow(a + 1));
                    let c = &pref * &Scalar::from_rational(dv);
                    out.insert(add_vec(&q_mono(n), &u_mono(d as i64)), lampoly_scalar(slots, c.clone()));
                    let c2 = if a % 2 == 0 { c } else { -&c };
                    out.insert(add_vec(&q_mono(n), &u_mono(-(d as i64))), lampoly_scalar(slots, c2));
                }
            }
        }
        KernelKind::Zeta => {
            // Z(w) = -2 pi i [ 1/2 + sum_{k>=1} u^k
            //   + sum_{n>=1} q^n sum_{d|n} (u^d - u^{-d}) ]
            let pref = &(-&Scalar::two_pi_i()) * &sign;
            out.insert(
                q_mono(0),
                lampoly_scalar(slots, &pref * &Scalar::ratio(1, 2)),
            );
            let seg = (lo - hi) as i64;
            let kmax = if seg > 0 { cap / seg } else { 0 };
            for k in 1..=kmax {
                out.insert(u_mono(k), lampoly_scalar(slots, pref.clone()));
            }
            for n in 1..=cap.max(0) {
                for d in divisors(n as u64) {
                    out.insert(add_vec(&q_mono(n), &u_mono(d as i64)), lampoly_scalar(slots, pref.clone()));
                    out.insert(
                        add_vec(&q_mono(n), &u_mono(-(d as i64))),
                        lampoly_scalar(slots, -&pref),
                    );
                }
            }
        }
    }
    out
}

// ---------------------------------------------------------------------------
// Residues by region difference
// ---------------------------------------------------------------------------

/// Stirling numbers of the second kind S(p, s) for the weight triangle.
fn stirling2(p: u64, s: u64) -> BigInt {
    if s > p {
        return BigInt::zero();
    }
    if p == 0 {
        return BigInt::one();
    }
    if s == 0 {
        return BigInt::zero();
    }
    // S(p, s) = (1/s!) sum_{t=0}^{s} (-1)^t binom(s,t) (s-t)^p
    let mut acc = BigInt::zero();
    for t in 0..=s {
        let term = binomial(s, t) * BigInt::from(s - t).pow(p as u32);
        if t % 2 == 0 {
            acc += term;
        } else {
            acc -= term;
        }
    }
    acc / factorial(s)
}

/// Full Laurent data `c_{-1}, c_{-2}, ..., c_{-K}` of a meromorphic
/// series at `z_m = z_j`, extracted by region differences:
///
/// the two expansions of the integrand (with `z_m` just below and just
/// above `z_j`, all other relative positions equal) are weighted by the
/// periodic monomials `(x_m/x_j - 1)^s`; contour pinching gives a
/// triangular Stirling system for the Laurent coefficients.
///
/// `below` and `above` index the same function expanded in the two
/// adjacent orderings; both must have `z_m` adjacent to `z_j`.
pub fn laurent_by_region_difference(
    below: &QxSeries,
    above: &QxSeries,
    m_slot: usize,
    j_slot: usize,
    pole_order: usize,
) -> Result<Vec<QxSeries>, SeriesError> {
    if pole_order == 0 {
        return Ok(Vec::new());
    }
    let k = pole_order;
    // R_s = Res((x_m/x_j - 1)^s G) for s = 0..k-1
    let mut r: Vec<QxSeries> = Vec::with_capacity(k);
    for s in 0..k {
        let wb = weight_pow(below, m_slot, j_slot, s as u32);
        let wa = weight_pow(above, m_slot, j_slot, s as u32);
        let ctb = wb.constant_term(m_slot)?;
        let cta = wa.constant_term(m_slot)?;
        let inv_2pi_i = Scalar::two_pi_i().try_inv().unwrap();
        r.push(ctb.sub(&cta).scale(&inv_2pi_i));
    }
    // solve triangular: R_s = sum_{p=s}^{k-1} alpha_{s,p} c_{-p-1},
    // alpha_{s,p} = (2 pi i)^p s! S(p,s) / p!
    let alpha = |s: usize, p: usize| -> Scalar {
        let rat = BigRational::new(
            factorial(s as u64) * stirling2(p as u64, s as u64),
            factorial(p as u64),
        );
        &Scalar::two_pi_i().pow(p as u32) * &Scalar::from_rational(rat)
    };
    let mut c: Vec<Option<QxSeries>> = alloc::vec![None; k];
    for p in (0..k).rev() {
        // from equation s = p
        let mut rhs = r[p].clone();
        for p2 in (p + 1)..k {
            let a = alpha(p, p2);
            rhs = rhs.sub(&c[p2].as_ref().unwrap().scale(&a));
        }
        let inv = alpha(p, p).try_inv().unwrap();
        c[p] = Some(rhs.scale(&inv));
    }
    Ok(c.into_iter().map(|x| x.unwrap()).collect())
}

/// Multiplies by `(x_m/x_j - 1)^s` (both variables must be adjacent in
/// the series order).
fn weight_pow(g: &QxSeries, m_slot: usize, j_slot: usize, s: u32) -> QxSeries {
    let pm = g.position_of(m_slot).expect("weight: m inactive");
    let pj = g.position_of(j_slot).expect("weight: j inactive");
    assert!(
        (pm as i64 - pj as i64).abs() == 1,
        "weight requires adjacent variables"
    );
    // x_m / x_j in cone increments: +-1 on one component
    let comp = pm.max(pj); // component index (1-based in cone vector)
    let sign: i64 = if pj < pm { -1 } else { 1 };
    let mut out = QxSeries::zero(g.order.clone(), g.slots, g.cap);
    out.eta = g.eta;
    // (w - 1)^s = sum_t binom(s,t) (-1)^{s-t} w^t
    for t in 0..=s {
        let c = BigRational::from_integer(binomial(s as u64, t as u64));
        let c = if (s - t) % 2 == 0 {
            Scalar::from_rational(c)
        } else {
            -&Scalar::from_rational(c)
        };
        let mut incr = alloc::vec![0i64; g.order.len() + 1];
        incr[comp] = sign * t as i64;
        let piece = g.mul_mono(&incr, &c);
        out.cap = out.cap.min(piece.cap);
        out.terms.retain(|m, _| m.iter().all(|&b| b <= out.cap));
        for (m, p) in &piece.terms {
            if m.iter().all(|&b| b <= out.cap) {
                out.insert(m.clone(), p.clone());
            }
        }
    }
    out
}

// ---------------------------------------------------------------------------
// Rendering
// ---------------------------------------------------------------------------

impl fmt::Display for QxSeries {
    /// Canonical text: terms sorted by q-exponent then lexicographic
    /// x-exponents; `x<i>` names use global slot numbers (1-based).
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        use alloc::format;
        if self.terms.is_empty() {
            return write!(f, "0");
        }
        let mut parts: Vec<String> = Vec::new();
        for (m, poly) in &self.terms {
            let q = m[0];
            let mut factors: Vec<String> = Vec::new();
            for (p, &slot) in self.order.iter().enumerate() {
                let e = m[p + 1] - m[p];
                match e {
                    0 => {}
                    1 => factors.push(format!("x{}", slot + 1)),
                    _ => factors.push(format!("x{}^{}", slot + 1, e)),
                }
            }
            let xpart = factors.join("*");
            for ((y, lam), s) in poly {
                let mut fs: Vec<String> = Vec::new();
                let coeff = format!("{}", s);
                let coeff = if s.terms().count() > 1 {
                    format!("({})", coeff)
                } else {
                    coeff
                };
                fs.push(coeff);
                match *y {
                    0 => {}
                    1 => fs.push(String::from("Y")),
                    y => fs.push(format!("Y^{}", y)),
                }
                for (idx, &lp) in lam.iter().enumerate() {
                    match lp {
                        0 => {}
                        1 => fs.push(format!("L{}", idx + 1)),
                        lp => fs.push(format!("L{}^{}", idx + 1, lp)),
                    }
                }
                match q {
                    0 => {}
                    1 => fs.push(String::from("q")),
                    q => fs.push(format!("q^{}", q)),
                }
                if !xpart.is_empty() {
                    fs.push(xpart.clone());
                }
                parts.push(fs.join("*"));
            }
        }
        write!(f, "{}", parts.join(" + "))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::format;
    use alloc::vec;

    #[test]
    fn eisenstein_e2_matches_sigma_oracle() {
        let s = qx_expand_eisenstein(2, 3).unwrap();
        // 1 - 24q - 72q^2 - 96q^3
        assert_eq!(format!("{}", s), "1 + -24*q + -72*q^2 + -96*q^3");
    }

    #[test]
    fn eisenstein_e4_small() {
        let s = qx_expand_eisenstein(4, 2).unwrap();
        assert_eq!(format!("{}", s), "1 + 240*q + 2160*q^2");
    }

    #[test]
    fn eisenstein_order_zero_is_one() {
        for k in [2, 4, 6] {
            let s = qx_expand_eisenstein(k, 0).unwrap();
            assert!(s.eq_to_cap(&QxSeries::one(vec![], 0, 0)));
        }
    }

    #[test]
    fn eisenstein_rejects_odd_weight() {
        assert!(qx_expand_eisenstein(3, 4).is_err());
        assert!(qx_expand_eisenstein(8, 4).is_err());
    }

    #[test]
    fn divisor_sums_to_order_16() {
        // independent check of sigma_1 via direct summation
        for n in 1..=16u64 {
            let mut s1 = 0u64;
            for d in 1..=n {
                if n % d == 0 {
                    s1 += d;
                }
            }
            assert_eq!(divisors(n).iter().sum::<u64>(), s1);
        }
    }

    #[test]
    fn p_kernel_has_no_constant_term() {
        let order = vec![0usize, 1usize];
        let p = expand_kernel(KernelKind::PDeriv(0), 0, 1, &order, 2, 8);
        let ct = p.constant_term(0).unwrap();
        assert!(ct.is_zero());
        let ct2 = p.constant_term(1).unwrap();
        assert!(ct2.is_zero());
    }

    #[test]
    fn zeta_kernel_constant_term_is_minus_pi_i() {
        let order = vec![0usize, 1usize];
        let z = expand_kernel(KernelKind::Zeta, 0, 1, &order, 2, 8);
        let ct = z.constant_term(0).unwrap();
        let expect = QxSeries::constant(vec![1], 2, 8, Scalar::imaginary_pi(-1, 1, 1));
        assert!(ct.eq_to_cap(&expect));
    }

    #[test]
    fn kernel_parity() {
        let order = vec![0usize, 1usize];
        // P(z_1 - z_0) = P(z_0 - z_1): expansion must coincide after the
        // automatic parity conversion
        let a = expand_kernel(KernelKind::PDeriv(0), 0, 1, &order, 2, 6);
        let b = expand_kernel(KernelKind::PDeriv(0), 1, 0, &order, 2, 6);
        assert!(a.eq_to_cap(&b));
        let za = expand_kernel(KernelKind::Zeta, 0, 1, &order, 2, 6);
        let zb = expand_kernel(KernelKind::Zeta, 1, 0, &order, 2, 6);
        assert!(za.eq_to_cap(&zb.scale(&-&Scalar::one())));
    }

    #[test]
    fn derivative_of_zeta_is_minus_p() {
        let order = vec![0usize, 1usize];
        let z = expand_kernel(KernelKind::Zeta, 0, 1, &order, 2, 8);
        let p = expand_kernel(KernelKind::PDeriv(0), 0, 1, &order, 2, 8);
        assert!(z.deriv(0).eq_to_cap(&p.scale(&-&Scalar::one())));
    }

    #[test]
    fn ct_commutes_with_free_multiplication() {
        // multiplying by a series free of the extracted variable commutes
        // with constant-term extraction
        let order = vec![0usize, 1usize, 2usize];
        let p01 = expand_kernel(KernelKind::PDeriv(0), 0, 1, &order, 3, 6);
        let e2 = qx_expand_eisenstein_in(2, order.clone(), 3, 6).unwrap();
        let lhs = p01.mul(&e2).constant_term(1).unwrap();
        let rhs = p01.constant_term(1).unwrap().mul(&e2.constant_term(1).unwrap());
        assert!(lhs.eq_to_cap(&rhs));
    }

    #[test]
    fn region_difference_residue_of_p() {
        // Res_{z_0 = z_1} P(z_0 - z_1) = 0 and the eps^{-2} coefficient is 1
        let slots = 2;
        let below = expand_kernel(KernelKind::PDeriv(0), 0, 1, &[1, 0], slots, 10);
        let above = expand_kernel(KernelKind::PDeriv(0), 0, 1, &[0, 1], slots, 10);
        let c = laurent_by_region_difference(&below, &above, 0, 1, 2).unwrap();
        assert!(c[0].is_zero(), "simple-pole part of P must vanish");
        let one = QxSeries::one(vec![1], slots, c[1].cap);
        assert!(c[1].eq_to_cap(&one), "double-pole coefficient of P is 1, got {}", c[1]);
    }

    #[test]
    fn region_difference_residue_of_zeta() {
        let slots = 2;
        let below = expand_kernel(KernelKind::Zeta, 0, 1, &[1, 0], slots, 10);
        let above = expand_kernel(KernelKind::Zeta, 0, 1, &[0, 1], slots, 10);
        let c = laurent_by_region_difference(&below, &above, 0, 1, 1).unwrap();
        let one = QxSeries::one(vec![1], slots, c[0].cap);
        assert!(c[0].eq_to_cap(&one), "zeta has residue 1");
    }

    #[test]
    fn antiderivative_round_trip() {
        let order = vec![0usize, 1usize];
        let p = expand_kernel(KernelKind::PDeriv(0), 0, 1, &order, 2, 6);
        let ad = p.antideriv(0).unwrap();
        assert!(ad.deriv(0).eq_to_cap(&p));
    }

    #[test]
    fn display_round_structure() {
        let order = vec![0usize, 1usize];
        let p = expand_kernel(KernelKind::PDeriv(0), 0, 1, &order, 2, 2);
        let s = format!("{}", p);
        assert!(s.contains("pi^2"));
        assert!(s.contains("x1"));
    }
}
