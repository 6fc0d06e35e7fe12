//! Contact operators on tensor slots: `T_i`, `B_{i->j}`, `C_{i->j}`,
//! their composites, and an exact verifier for the contact term
//! relations.
//!
//! `B(a,b) = T^{-1}(a_(0) b)` and `C(a,b) = a_(1) b - B(a,b)`; extended
//! slotwise they encode the contact terms picked up when insertion
//! points collide. Congruences mod Im(T) are decided by exact linear
//! solves, never heuristically.

use alloc::collections::{BTreeMap, BTreeSet};
use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;

use num_rational::BigRational;
use num_traits::Zero;

use crate::fock::{mode_action, translate, FockMono, FockState};
use crate::scalar::Scalar;
use crate::winf::{t_inverse, SubalgebraBasis, TInverseError};

/// Formal sum of n-slot tensor products of Fock monomials with [`Scalar`]
/// coefficients. Slot count is fixed per value.
#[derive(Clone, PartialEq, Eq, Debug)]
pub struct TensorState {
    slots: usize,
    terms: BTreeMap<Vec<FockMono>, Scalar>,
}

impl TensorState {
    pub fn zero(slots: usize) -> Self {
        TensorState {
            slots,
            terms: BTreeMap::new(),
        }
    }

    /// The pure tensor `a_1 (x) ... (x) a_n`, expanded multilinearly.
    pub fn pure(states: &[FockState]) -> Self {
        let slots = states.len();
        let mut out = TensorState::zero(slots);
        // cartesian product over monomials of each factor
        fn rec(
            states: &[FockState],
            s: usize,
            monos: &mut Vec<FockMono>,
            coeff: BigRational,
            out: &mut TensorState,
        ) {
            if s == states.len() {
                out.insert(monos.clone(), Scalar::from_rational(coeff));
                return;
            }
            for (m, c) in states[s].terms() {
                monos.push(m.clone());
                rec(states, s + 1, monos, &coeff * c, out);
                monos.pop();
            }
        }
        let mut monos = Vec::new();
        rec(states, 0, &mut monos, BigRational::from_integer(1.into()), &mut out);
        out
    }

    pub fn slots(&self) -> usize {
        self.slots
    }

    pub fn is_zero(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn terms(&self) -> impl Iterator<Item = (&Vec<FockMono>, &Scalar)> {
        self.terms.iter()
    }

    fn insert(&mut self, monos: Vec<FockMono>, c: Scalar) {
        if c.is_zero() {
            return;
        }
        debug_assert_eq!(monos.len(), self.slots);
        match self.terms.entry(monos) {
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

    pub fn add(&self, other: &TensorState) -> TensorState {
        assert_eq!(self.slots, other.slots);
        let mut out = self.clone();
        for (m, c) in &other.terms {
            out.insert(m.clone(), c.clone());
        }
        out
    }

    pub fn sub(&self, other: &TensorState) -> TensorState {
        assert_eq!(self.slots, other.slots);
        let mut out = self.clone();
        for (m, c) in &other.terms {
            out.insert(m.clone(), -c);
        }
        out
    }

    pub fn scale(&self, c: &Scalar) -> TensorState {
        let mut out = TensorState::zero(self.slots);
        for (m, k) in &self.terms {
            out.insert(m.clone(), k * c);
        }
        out
    }

    /// Applies a linear slotwise map `f` to slot `i`, re-expanding the
    /// image states into monomials.
    fn map_slot<F>(&self, i: usize, f: F) -> TensorState
    where
        F: Fn(&FockState) -> FockState,
    {
        let mut out = TensorState::zero(self.slots);
        for (monos, c) in &self.terms {
            let input = FockState::monomial(monos[i].clone(), BigRational::from_integer(1.into()));
            let image = f(&input);
            for (m, k) in image.terms() {
                let mut new_monos = monos.clone();
                new_monos[i] = m.clone();
                out.insert(new_monos, c * &Scalar::from_rational(k.clone()));
            }
        }
        out
    }

    /// True when slot `i` holds the vacuum in every term.
    pub fn slot_is_vacuum(&self, i: usize) -> bool {
        self.terms.keys().all(|m| m[i].0.is_empty())
    }

    /// The set of slots that are vacuum in every term.
    pub fn vacuum_slots(&self) -> BTreeSet<usize> {
        (0..self.slots).filter(|&i| self.slot_is_vacuum(i)).collect()
    }
}

/// Slot translation `T_i`.
pub fn t_op(i: usize, a: &TensorState) -> TensorState {
    a.map_slot(i, translate)
}

/// `B_{i->j}`: slot i becomes the vacuum, slot j becomes `B(a_i, a_j)`.
/// Fails if some zero-mode product leaves `T(Ahat)`.
pub fn b_op(
    basis: &SubalgebraBasis,
    i: usize,
    j: usize,
    a: &TensorState,
) -> Result<TensorState, TInverseError> {
    pairwise_op(basis, i, j, a, true)
}

/// `C_{i->j}`: slot i becomes the vacuum, slot j becomes `C(a_i, a_j)`.
pub fn c_op(
    basis: &SubalgebraBasis,
    i: usize,
    j: usize,
    a: &TensorState,
) -> Result<TensorState, TInverseError> {
    pairwise_op(basis, i, j, a, false)
}

fn pairwise_op(
    basis: &SubalgebraBasis,
    i: usize,
    j: usize,
    a: &TensorState,
    is_b: bool,
) -> Result<TensorState, TInverseError> {
    assert!(i != j && i < a.slots && j < a.slots);

    // T^{-1} is defined on T(Ahat), not on arbitrary monomial products,
    // so the zero-mode products must be summed per spectator configuration
    // (each group is a linear combination of Ahat-pair products) before
    // inverting. Scalar coefficients are split into their rational
    // components so the exact rational solver applies.
    type GroupKey = (Vec<FockMono>, i32, bool);
    let mut groups0: BTreeMap<GroupKey, FockState> = BTreeMap::new();
    let mut groups1: BTreeMap<GroupKey, FockState> = BTreeMap::new();
    for (monos, c) in &a.terms {
        let one = BigRational::from_integer(1.into());
        let ai = FockState::monomial(monos[i].clone(), one.clone());
        let aj = FockState::monomial(monos[j].clone(), one);
        let m0 = mode_action(&ai, 0, &aj);
        let m1 = if is_b {
            FockState::zero()
        } else {
            mode_action(&ai, 1, &aj)
        };
        let mut spect = monos.clone();
        // canonical spectator key: vacuum out the acting pair
        spect[i] = FockMono::vacuum();
        spect[j] = FockMono::vacuum();
        for (pi_pow, g) in c.terms() {
            for (is_im, r) in [(false, &g.re), (true, &g.im)] {
                if r.is_zero() {
                    continue;
                }
                let key = (spect.clone(), *pi_pow, is_im);
                let e0 = groups0.entry(key.clone()).or_insert_with(FockState::zero);
                *e0 = e0.add(&m0.scale(r));
                if !is_b {
                    let e1 = groups1.entry(key).or_insert_with(FockState::zero);
                    *e1 = e1.add(&m1.scale(r));
                }
            }
        }
    }

    let mut out = TensorState::zero(a.slots);
    let mut emit = |spect: &[FockMono], pi_pow: i32, is_im: bool, image: &FockState, out: &mut TensorState| {
        for (m, k) in image.terms() {
            let mut new_monos = spect.to_vec();
            new_monos[j] = m.clone();
            let unit = if is_im {
                Scalar::imaginary_pi(1, 1, pi_pow)
            } else {
                Scalar::rational_pi(1, 1, pi_pow)
            };
            out.insert(new_monos, &unit * &Scalar::from_rational(k.clone()));
        }
    };
    for (key, y0) in &groups0 {
        let (spect, pi_pow, is_im) = key;
        let b = t_inverse(basis, y0)?;
        let image = if is_b {
            b
        } else {
            let y1 = groups1.get(key).cloned().unwrap_or_else(FockState::zero);
            y1.sub(&b)
        };
        emit(spect, *pi_pow, *is_im, &image, &mut out);
    }
    // C-groups that have a first-mode part but no zero-mode part
    if !is_b {
        for (key, y1) in &groups1 {
            if groups0.contains_key(key) {
                continue;
            }
            let (spect, pi_pow, is_im) = key;
            emit(spect, *pi_pow, *is_im, y1, &mut out);
        }
    }
    Ok(out)
}

/// Composite `B_{I->k}` applied as a fold over `b_op`; order independence
/// within a target is the content of contact relation (1).
pub fn b_fold_set(
    basis: &SubalgebraBasis,
    sources: &BTreeSet<usize>,
    k: usize,
    a: &TensorState,
) -> Result<TensorState, TInverseError> {
    let mut out = a.clone();
    for &i in sources {
        out = b_op(basis, i, k, &out)?;
    }
    Ok(out)
}

/// `B^phi_{I->M}` for a fold map given as target -> set of sources.
pub fn b_fold(
    basis: &SubalgebraBasis,
    folds: &BTreeMap<usize, BTreeSet<usize>>,
    a: &TensorState,
) -> Result<TensorState, TInverseError> {
    let mut out = a.clone();
    for (&k, sources) in folds {
        out = b_fold_set(basis, sources, k, &out)?;
    }
    Ok(out)
}

/// Decides whether the k-slot content of `d` lies in `Im(T)` termwise:
/// groups terms by the spectator monomials and solves each group's
/// k-slot state against `T(Ahat)` exactly.
pub fn is_in_im_t_slot(basis: &SubalgebraBasis, d: &TensorState, k: usize) -> bool {
    let mut groups: BTreeMap<Vec<FockMono>, FockState> = BTreeMap::new();
    for (monos, c) in &d.terms {
        let mut key = monos.clone();
        let mk = key.remove(k);
        // scalar coefficients here are rational; a nonzero pi- or i-part
        // cannot appear in contact computations over Q
        let rat = c.pi_coeff(0).re.clone();
        let entry = groups.entry(key).or_insert_with(FockState::zero);
        *entry = entry.add(&FockState::monomial(mk, rat));
    }
    groups.values().all(|st| basis.is_in_im_t(st))
}

// ---------------------------------------------------------------------------
// Relations report
// ---------------------------------------------------------------------------

/// One verified identity instance.
#[derive(Clone, Debug)]
pub struct RelationCheck {
    pub name: String,
    pub params: String,
    pub pass: bool,
}

/// Exact verification of the contact term relations on every generator
/// tuple from `gens` in `n` slots:
///
/// 1. `B_{i->k} B_{j->k} = B_{j->k} B_{i->k}`
/// 2. `[C_{i->k}, B_{j->k}] + B_{i->k} B_{j->k} = B_{j->k} C_{i->j}`
/// 3. `[C_{i->k}, C_{j->k}] = C_{j->k} C_{i->j} - C_{i->k} C_{j->i}`
///    modulo `Im(T)` in the target slot,
///
/// the disjoint-index commutations, and the composite-fold relation
/// `[C_{i->k}, B_{I->k}] + |I| B_{I+{i}->k} = sum_{l in I} B_{I->k} C_{i->l}`
/// for `|I| <= min(n-2, 3)`. Failures are report entries carrying the
/// parameters, never panics.
pub fn relations_report(
    basis: &SubalgebraBasis,
    n: usize,
    gens: &[u32],
    bound: u32,
) -> Vec<RelationCheck> {
    let mut out = Vec::new();
    let tuples = tuples_of(gens, n);
    for tuple in &tuples {
        if tuple.iter().sum::<u32>() > bound {
            continue;
        }
        let states: Vec<FockState> = tuple.iter().map(|&k| crate::winf::w_state(k)).collect();
        let a = TensorState::pure(&states);
        let params = format!("gens={:?}", tuple);

        // distinct (i, j, k) triples
        for i in 0..n {
            for j in 0..n {
                for k in 0..n {
                    if i == j || j == k || i == k {
                        continue;
                    }
                    let p = format!("{} i={} j={} k={}", params, i, j, k);
                    out.push(check_rel1(basis, i, j, k, &a, &p));
                    out.push(check_rel2(basis, i, j, k, &a, &p));
                    out.push(check_rel3(basis, i, j, k, &a, &p));
                }
            }
        }
        // disjoint-index commutations need 4 slots
        if n >= 4 {
            out.push(check_disjoint(basis, &a, &params));
        }
        // composite-fold relation
        for size in 1..=3usize.min(n.saturating_sub(2)) {
            out.push(check_fold_relation(basis, size, &a, &params));
        }
    }
    out
}

fn tuples_of(gens: &[u32], n: usize) -> Vec<Vec<u32>> {
    let mut out: Vec<Vec<u32>> = alloc::vec![Vec::new()];
    for _ in 0..n {
        let mut next = Vec::new();
        for t in &out {
            for &g in gens {
                let mut t2 = t.clone();
                t2.push(g);
                next.push(t2);
            }
        }
        out = next;
    }
    out
}

fn check_rel1(
    basis: &SubalgebraBasis,
    i: usize,
    j: usize,
    k: usize,
    a: &TensorState,
    params: &str,
) -> RelationCheck {
    let pass = (|| -> Result<bool, TInverseError> {
        let lhs = b_op(basis, i, k, &b_op(basis, j, k, a)?)?;
        let rhs = b_op(basis, j, k, &b_op(basis, i, k, a)?)?;
        Ok(lhs == rhs)
    })()
    .unwrap_or(false);
    RelationCheck {
        name: String::from("contact-rel-1"),
        params: String::from(params),
        pass,
    }
}

fn check_rel2(
    basis: &SubalgebraBasis,
    i: usize,
    j: usize,
    k: usize,
    a: &TensorState,
    params: &str,
) -> RelationCheck {
    let pass = (|| -> Result<bool, TInverseError> {
        let cb = c_op(basis, i, k, &b_op(basis, j, k, a)?)?;
        let bc = b_op(basis, j, k, &c_op(basis, i, k, a)?)?;
        let bb = b_op(basis, i, k, &b_op(basis, j, k, a)?)?;
        let rhs = b_op(basis, j, k, &c_op(basis, i, j, a)?)?;
        Ok(cb.sub(&bc).add(&bb) == rhs)
    })()
    .unwrap_or(false);
    RelationCheck {
        name: String::from("contact-rel-2"),
        params: String::from(params),
        pass,
    }
}

fn check_rel3(
    basis: &SubalgebraBasis,
    i: usize,
    j: usize,
    k: usize,
    a: &TensorState,
    params: &str,
) -> RelationCheck {
    let pass = (|| -> Result<bool, TInverseError> {
        let cc1 = c_op(basis, i, k, &c_op(basis, j, k, a)?)?;
        let cc2 = c_op(basis, j, k, &c_op(basis, i, k, a)?)?;
        let r1 = c_op(basis, j, k, &c_op(basis, i, j, a)?)?;
        let r2 = c_op(basis, i, k, &c_op(basis, j, i, a)?)?;
        let diff = cc1.sub(&cc2).sub(&r1.sub(&r2));
        Ok(is_in_im_t_slot(basis, &diff, k))
    })()
    .unwrap_or(false);
    RelationCheck {
        name: String::from("contact-rel-3-mod-T"),
        params: String::from(params),
        pass,
    }
}

fn check_disjoint(basis: &SubalgebraBasis, a: &TensorState, params: &str) -> RelationCheck {
    // i, j, k, l = 0, 1, 2, 3
    let pass = (|| -> Result<bool, TInverseError> {
        let bb = b_op(basis, 0, 1, &b_op(basis, 2, 3, a)?)? == b_op(basis, 2, 3, &b_op(basis, 0, 1, a)?)?;
        let cc = c_op(basis, 0, 1, &c_op(basis, 2, 3, a)?)? == c_op(basis, 2, 3, &c_op(basis, 0, 1, a)?)?;
        let bc = b_op(basis, 0, 1, &c_op(basis, 2, 3, a)?)? == c_op(basis, 2, 3, &b_op(basis, 0, 1, a)?)?;
        let cb = c_op(basis, 0, 1, &b_op(basis, 2, 3, a)?)? == b_op(basis, 2, 3, &c_op(basis, 0, 1, a)?)?;
        Ok(bb && cc && bc && cb)
    })()
    .unwrap_or(false);
    RelationCheck {
        name: String::from("contact-disjoint-commute"),
        params: String::from(params),
        pass,
    }
}

fn check_fold_relation(
    basis: &SubalgebraBasis,
    size: usize,
    a: &TensorState,
    params: &str,
) -> RelationCheck {
    // fixed roles: i = 0, k = 1, I = {2, .., 1+size}
    let n = a.slots();
    let i = 0usize;
    let k = 1usize;
    let set: BTreeSet<usize> = (2..2 + size).collect();
    debug_assert!(2 + size <= n + 1);
    let pass = (|| -> Result<bool, TInverseError> {
        let b_i = b_fold_set(basis, &set, k, a)?;
        let cb = c_op(basis, i, k, &b_i)?;
        let bc = b_fold_set(basis, &set, k, &c_op(basis, i, k, a)?)?;
        let mut set_i = set.clone();
        set_i.insert(i);
        let big = b_fold_set(basis, &set_i, k, a)?.scale(&Scalar::from_int(size as i64));
        let lhs = cb.sub(&bc).add(&big);
        let mut rhs = TensorState::zero(n);
        for &l in &set {
            rhs = rhs.add(&b_fold_set(basis, &set, k, &c_op(basis, i, l, a)?)?);
        }
        Ok(lhs == rhs)
    })()
    .unwrap_or(false);
    RelationCheck {
        name: format!("contact-fold-|I|={}", size),
        params: String::from(params),
        pass,
    }
}
