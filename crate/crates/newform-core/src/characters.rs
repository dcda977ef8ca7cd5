//! Finite abelian quotients of the unit groups of `E`, characters of
//! prescribed conductor, quasi-characters of `E^x`, the twist `mu1-tilde`,
//! the reducibility classification and central characters.
//!
//! Character values live in the exact cyclotomic field `Q(zeta_N)`; the
//! order `N` is fixed per [`Session`] as the lcm of the exponents of the
//! modelled unit groups and the order of the root-of-unity part of
//! `mu1(pi)`.  Unit-group quotients are modelled by explicit generator
//! bases whose direct-product structure is verified by enumeration, with
//! discrete logarithms by table lookup.

use alloc::collections::BTreeMap;
use alloc::string::String;
use alloc::sync::Arc;
use alloc::vec;
use alloc::vec::Vec;
use core::fmt;

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{One, Signed};

use crate::cyclotomic::{CycField, CycScalar};
use crate::localfield::{EElem, FElem, FieldParams, LocalFieldError, Val};

#[derive(Debug, Clone, PartialEq)]
pub enum CharError {
    /// The generator basis failed the direct-product consistency check.
    ModelInconsistent(String),
    /// Requested conductor exceeds the modelled level.
    ConductorTooLarge { c: u32, level: u32 },
    /// Character index out of range for the enumerated list.
    BadIndex { idx: usize, count: usize },
    /// Element is not a unit (or not norm-one) at the required precision.
    NotInGroup,
    /// The root-of-unity order does not divide the session order.
    IncompatibleRoot { order: u32, session: u32 },
    Field(LocalFieldError),
}

impl From<LocalFieldError> for CharError {
    fn from(e: LocalFieldError) -> Self {
        CharError::Field(e)
    }
}

impl fmt::Display for CharError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CharError::ModelInconsistent(s) => write!(f, "group model inconsistent: {}", s),
            CharError::ConductorTooLarge { c, level } => {
                write!(f, "conductor {} exceeds model level {}", c, level)
            }
            CharError::BadIndex { idx, count } => {
                write!(f, "character index {} out of range ({} available)", idx, count)
            }
            CharError::NotInGroup => write!(f, "element outside the modelled group"),
            CharError::IncompatibleRoot { order, session } => {
                write!(f, "root order {} does not divide session order {}", order, session)
            }
            CharError::Field(e) => write!(f, "field error: {}", e),
        }
    }
}

impl core::error::Error for CharError {}

pub type Result<T> = core::result::Result<T, CharError>;

/// Which unit group a model describes.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum GroupKind {
    /// `(o_E / p^c)^x`.
    EUnits,
    /// `E^1 / E^1_c`, embedded through its reduction mod `p^c`.
    E1,
}

// ---------------------------------------------------------------------------
// Residue-pair arithmetic mod p^c: x + y*sqrt(eps) as (x, y).
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
struct Pair(u64, u64);

#[derive(Debug, Clone, Copy)]
struct PairCtx {
    modulus: u64,
    eps: u64,
    p: u64,
}

impl PairCtx {
    fn mul(&self, a: Pair, b: Pair) -> Pair {
        let m = self.modulus as u128;
        let (a0, a1) = (a.0 as u128, a.1 as u128);
        let (b0, b1) = (b.0 as u128, b.1 as u128);
        let x = (a0 * b0 + self.eps as u128 % m * a1 % m * b1) % m;
        let y = (a0 * b1 + a1 * b0) % m;
        Pair(x as u64, y as u64)
    }

    fn pow(&self, mut b: Pair, mut e: u64) -> Pair {
        let mut acc = Pair(1, 0);
        while e > 0 {
            if e & 1 == 1 {
                acc = self.mul(acc, b);
            }
            b = self.mul(b, b);
            e >>= 1;
        }
        acc
    }

    fn norm(&self, a: Pair) -> u64 {
        let m = self.modulus as u128;
        let sq = (a.0 as u128 * a.0 as u128) % m;
        let esq = (self.eps as u128 % m) * (a.1 as u128 * a.1 as u128 % m) % m;
        ((sq + m - esq) % m) as u64
    }

    fn is_unit(&self, a: Pair) -> bool {
        // Unit iff nonzero in the residue field k_E.
        a.0 % self.p != 0 || a.1 % self.p != 0
    }
}

/// A modelled finite abelian quotient with verified generator basis and a
/// full discrete-log table.
#[derive(Debug)]
pub struct FinAbGroup {
    params: FieldParams,
    kind: GroupKind,
    level: u32,
    ctx: PairCtx,
    gens: Vec<Pair>,
    orders: Vec<u64>,
    elements: Vec<Pair>,
    dlog: BTreeMap<Pair, Vec<u64>>,
    /// `filtration[k]` = indices of elements congruent to 1 mod `p^k`,
    /// for `k = 0 ..= level`.
    filtration: Vec<Vec<usize>>,
}

impl FinAbGroup {
    pub fn kind(&self) -> GroupKind {
        self.kind
    }

    pub fn level(&self) -> u32 {
        self.level
    }

    pub fn order(&self) -> u64 {
        self.elements.len() as u64
    }

    pub fn generator_orders(&self) -> &[u64] {
        &self.orders
    }

    /// Group exponent (the basis is a direct product).
    pub fn exponent(&self) -> u64 {
        self.orders.iter().fold(1, |acc, &d| num_integer::lcm(acc, d))
    }

    /// Exponent vector of the residue pair `(u0, u1)` mod `p^level`.
    fn dlog_pair(&self, pair: Pair) -> Result<&Vec<u64>> {
        self.dlog.get(&pair).ok_or(CharError::NotInGroup)
    }

    /// Exponent vector of a unit of `E` (for `EUnits`) or a norm-one
    /// element (for `E1`), read at the model level.
    pub fn dlog(&self, x: &EElem) -> Result<Vec<u64>> {
        if !matches!(x.val(), Val::Finite(0)) {
            return Err(CharError::NotInGroup);
        }
        let (u0, u1) = x.unit_residues_mod(self.level)?;
        Ok(self.dlog_pair(Pair(u0, u1))?.clone())
    }

    /// Lift of the `i`-th generator to an exact element of `E`.
    pub fn generator_lift(&self, i: usize) -> EElem {
        let g = self.gens[i];
        EElem::from_integers(self.params, g.0 as i64, g.1 as i64)
    }

    pub fn num_generators(&self) -> usize {
        self.gens.len()
    }

    /// Lifts of all elements (used by sweep-style tests).
    pub fn element_lifts(&self) -> Vec<EElem> {
        self.elements
            .iter()
            .map(|g| EElem::from_integers(self.params, g.0 as i64, g.1 as i64))
            .collect()
    }

    /// Indices of elements congruent to 1 mod `p^k`.
    fn filtration_layer(&self, k: u32) -> &[usize] {
        &self.filtration[k as usize]
    }
}

/// Build the model of `(o_E/p^c)^x` or `E^1/E^1_c`.
///
/// Generators: the Teichmuller lift `omega` of a generator of the residue
/// field units (order `q^2 - 1`), plus `1 + pi` and `1 + pi*sqrt(eps)` for
/// the principal units; for `E^1`, `omega^(q-1)` (order `q + 1`) and the
/// Cayley element of `pi`.  The direct-product structure is verified by
/// exhaustive enumeration against the theoretical order.
pub fn unit_group_model(
    params: FieldParams,
    kind: GroupKind,
    c: u32,
) -> Result<Arc<FinAbGroup>> {
    if c < 1 || c > params.rel_prec() {
        return Err(CharError::ConductorTooLarge { c, level: params.rel_prec() });
    }
    let p = params.p();
    let q = params.q();
    let modulus = params.pow(c);
    let ctx = PairCtx { modulus, eps: params.eps(), p };
    let omega = teichmuller(params, c);

    let (gens, orders): (Vec<Pair>, Vec<u64>) = match kind {
        GroupKind::EUnits => {
            let mut gens = vec![omega];
            let mut orders = vec![q * q - 1];
            if c >= 2 {
                gens.push(Pair((1 + p) % modulus, 0));
                gens.push(Pair(1, p));
                orders.push(params.pow(c - 1));
                orders.push(params.pow(c - 1));
            }
            (gens, orders)
        }
        GroupKind::E1 => {
            let sigma = ctx.pow(omega, q - 1);
            let mut gens = vec![sigma];
            let mut orders = vec![q + 1];
            if c >= 2 {
                let cg = cayley(&FElem::uniformizer_pow(params, 1))?;
                let (c0, c1) = cg.unit_residues_mod(c)?;
                gens.push(Pair(c0, c1));
                orders.push(params.pow(c - 1));
            }
            (gens, orders)
        }
    };

    // Verify each claimed order exactly.
    for (g, &d) in gens.iter().zip(&orders) {
        if !ctx.pow(*g, d).eq(&Pair(1, 0)) {
            return Err(CharError::ModelInconsistent(String::from(
                "generator order too large",
            )));
        }
        for prime in prime_divisors(d) {
            if ctx.pow(*g, d / prime).eq(&Pair(1, 0)) {
                return Err(CharError::ModelInconsistent(String::from(
                    "generator order too small",
                )));
            }
        }
    }

    // Enumerate all products; distinctness proves the direct product.
    let theoretical = match kind {
        GroupKind::EUnits => (q * q - 1) * params.pow(2 * (c - 1)),
        GroupKind::E1 => (q + 1) * params.pow(c - 1),
    };
    let total: u64 = orders.iter().product();
    if total != theoretical {
        return Err(CharError::ModelInconsistent(String::from(
            "generator orders do not multiply to the group order",
        )));
    }
    let mut elements = Vec::with_capacity(total as usize);
    let mut dlog = BTreeMap::new();
    let mut exps = vec![0u64; gens.len()];
    loop {
        let mut e = Pair(1, 0);
        for (g, &k) in gens.iter().zip(&exps) {
            e = ctx.mul(e, ctx.pow(*g, k));
        }
        if dlog.insert(e, exps.clone()).is_some() {
            return Err(CharError::ModelInconsistent(String::from(
                "generator products collide",
            )));
        }
        elements.push(e);
        // Odometer increment.
        let mut i = 0;
        loop {
            if i == exps.len() {
                break;
            }
            exps[i] += 1;
            if exps[i] < orders[i] {
                break;
            }
            exps[i] = 0;
            i += 1;
        }
        if i == exps.len() {
            break;
        }
    }
    // Sanity for E1: every element is norm-one mod p^c.
    if kind == GroupKind::E1 {
        for e in &elements {
            if ctx.norm(*e) != 1 % modulus {
                return Err(CharError::ModelInconsistent(String::from(
                    "E1 element with norm != 1",
                )));
            }
        }
    }
    // Filtration layers.
    let mut filtration = Vec::with_capacity(c as usize + 1);
    for k in 0..=c {
        let mk = params.pow(k);
        let layer: Vec<usize> = elements
            .iter()
            .enumerate()
            .filter(|(_, e)| e.0 % mk == 1 % mk && e.1 % mk == 0)
            .map(|(i, _)| i)
            .collect();
        filtration.push(layer);
    }
    Ok(Arc::new(FinAbGroup {
        params,
        kind,
        level: c,
        ctx,
        gens,
        orders,
        elements,
        dlog,
        filtration,
    }))
}

fn prime_divisors(mut n: u64) -> Vec<u64> {
    let mut out = Vec::new();
    let mut d = 2;
    while d * d <= n {
        if n % d == 0 {
            out.push(d);
            while n % d == 0 {
                n /= d;
            }
        }
        d += 1;
    }
    if n > 1 {
        out.push(n);
    }
    out
}

/// Teichmuller lift mod `p^c` of a generator of the residue-field units:
/// iterate `t -> t^(q^2)` from a primitive element of `k_E^x`.
fn teichmuller(params: FieldParams, c: u32) -> Pair {
    let p = params.p();
    let q2m1 = p * p - 1;
    let ctx1 = PairCtx { modulus: p, eps: params.eps(), p };
    let mut primitive = None;
    'outer: for a in 0..p {
        for b in 0..p {
            let g = Pair(a, b);
            if !ctx1.is_unit(g) {
                continue;
            }
            let mut ok = true;
            for ell in prime_divisors(q2m1) {
                if ctx1.pow(g, q2m1 / ell).eq(&Pair(1, 0)) {
                    ok = false;
                    break;
                }
            }
            if ok {
                primitive = Some(g);
                break 'outer;
            }
        }
    }
    let g = primitive.expect("k_E^x is cyclic; a primitive element exists");
    let ctx = PairCtx { modulus: params.pow(c), eps: params.eps(), p };
    let mut t = g;
    for _ in 0..=c {
        t = ctx.pow(t, p * p);
    }
    t
}

/// Cayley element `(1 - a sqrt(eps)) (1 + a sqrt(eps))^{-1}`, norm-one.
pub fn cayley(a: &FElem) -> Result<EElem> {
    let params = a.params();
    let s = EElem::sqrt_eps(params).mul_f(a)?;
    let one = EElem::one(params);
    Ok(one.sub(&s)?.div(&one.add(&s)?)?)
}

// ---------------------------------------------------------------------------
// Session: fixed cyclotomic order and cached models.
// ---------------------------------------------------------------------------

#[derive(Debug)]
struct SessionInner {
    params: FieldParams,
    c_max: u32,
    cyc: Arc<CycField>,
    unit_models: Vec<Arc<FinAbGroup>>,
    e1_models: Vec<Arc<FinAbGroup>>,
}

/// A character-theory session: field parameters, a conductor bound, the
/// session cyclotomic field and the unit-group models at every level up to
/// the bound.
#[derive(Debug, Clone)]
pub struct Session(Arc<SessionInner>);

impl Session {
    /// `extra_root_order` is folded into the cyclotomic order so that the
    /// requested `mu1(pi)` root of unity exists in the session field.
    pub fn new(params: FieldParams, c_max: u32, extra_root_order: u32) -> Result<Session> {
        let c_max = c_max.max(1);
        let q = params.q();
        let mut unit_models = Vec::new();
        let mut e1_models = Vec::new();
        for c in 1..=c_max {
            unit_models.push(unit_group_model(params, GroupKind::EUnits, c)?);
            e1_models.push(unit_group_model(params, GroupKind::E1, c)?);
        }
        let mut n = num_integer::lcm(q * q - 1, params.pow(c_max - 1));
        n = num_integer::lcm(n, 2);
        n = num_integer::lcm(n, extra_root_order.max(1) as u64);
        let cyc = CycField::new(n as u32);
        Ok(Session(Arc::new(SessionInner {
            params,
            c_max,
            cyc,
            unit_models,
            e1_models,
        })))
    }

    pub fn params(&self) -> FieldParams {
        self.0.params
    }

    pub fn c_max(&self) -> u32 {
        self.0.c_max
    }

    pub fn cyc_field(&self) -> &Arc<CycField> {
        &self.0.cyc
    }

    pub fn unit_model(&self, c: u32) -> Result<&Arc<FinAbGroup>> {
        if c == 0 || c > self.0.c_max {
            return Err(CharError::ConductorTooLarge { c, level: self.0.c_max });
        }
        Ok(&self.0.unit_models[c as usize - 1])
    }

    pub fn e1_model(&self, c: u32) -> Result<&Arc<FinAbGroup>> {
        if c == 0 || c > self.0.c_max {
            return Err(CharError::ConductorTooLarge { c, level: self.0.c_max });
        }
        Ok(&self.0.e1_models[c as usize - 1])
    }

    fn model(&self, kind: GroupKind, c: u32) -> Result<&Arc<FinAbGroup>> {
        match kind {
            GroupKind::EUnits => self.unit_model(c),
            GroupKind::E1 => self.e1_model(c),
        }
    }

    /// All unit characters of exact conductor `c` over `zeta_N`, in the
    /// deterministic enumeration order (lexicographic exponent tuples).
    pub fn enumerate_unit_chars(&self, kind: GroupKind, c: u32) -> Result<Vec<UnitChar>> {
        if c == 0 {
            return Ok(vec![UnitChar {
                session: self.clone(),
                kind,
                level: 0,
                conductor: 0,
                exps: vec![],
            }]);
        }
        let model = self.model(kind, c)?.clone();
        let n = self.0.cyc.order() as u64;
        let mut out = Vec::new();
        let mut tuple = vec![0u64; model.gens.len()];
        loop {
            let exps: Vec<u64> = tuple
                .iter()
                .zip(&model.orders)
                .map(|(&a, &d)| a * (n / d) % n)
                .collect();
            let chi = UnitChar {
                session: self.clone(),
                kind,
                level: c,
                conductor: 0,
                exps,
            };
            let cond = chi.compute_conductor(&model);
            if cond == c {
                let mut chi = chi;
                chi.conductor = cond;
                out.push(chi);
            }
            let mut i = 0;
            loop {
                if i == tuple.len() {
                    break;
                }
                tuple[i] += 1;
                if tuple[i] < model.orders[i] {
                    break;
                }
                tuple[i] = 0;
                i += 1;
            }
            if i == tuple.len() {
                break;
            }
        }
        Ok(out)
    }

    /// The quasi-character `mu1` with unit part `(c1, idx)` and
    /// `mu1(pi) = pi_rat * zeta_N^pi_root` (`pi_rat` a positive rational).
    pub fn mu1(
        &self,
        c1: u32,
        idx: usize,
        pi_rat: BigRational,
        pi_root: u64,
    ) -> Result<QuasiCharE> {
        assert!(pi_rat.is_positive(), "pi_rat must be a positive rational");
        let chars = self.enumerate_unit_chars(GroupKind::EUnits, c1)?;
        let unit = chars
            .get(idx)
            .cloned()
            .ok_or(CharError::BadIndex { idx, count: chars.len() })?;
        Ok(QuasiCharE {
            unit,
            pi_rat,
            pi_root: pi_root % self.0.cyc.order() as u64,
        })
    }

    /// Unramified `mu1` with the given `pi`-value.
    pub fn mu1_unramified(&self, pi_rat: BigRational, pi_root: u64) -> Result<QuasiCharE> {
        self.mu1(0, 0, pi_rat, pi_root)
    }

    /// `|.|_E^sign`: unramified with `mu1(pi) = q^(-2 sign)`.
    pub fn mu1_abs_e(&self, sign: i8) -> Result<QuasiCharE> {
        let q = BigRational::from_integer(BigInt::from(self.0.params.q()));
        let rat = if sign >= 0 { q.recip().pow(2) } else { q.pow(2) };
        self.mu1_unramified(rat, 0)
    }

    /// `omega_{E/F} |.|_F^sign` extended unramified: `mu1(pi) = -q^(-sign)`.
    pub fn mu1_omega_abs(&self, sign: i8) -> Result<QuasiCharE> {
        let q = BigRational::from_integer(BigInt::from(self.0.params.q()));
        let rat = if sign >= 0 { q.recip() } else { q };
        let half = self.0.cyc.order() as u64 / 2;
        self.mu1_unramified(rat, half)
    }

    pub fn mu1_trivial(&self) -> Result<QuasiCharE> {
        self.mu1_unramified(BigRational::one(), 0)
    }

    /// The character `mu2` of `E^1` with exact conductor `c2`, index `idx`.
    pub fn mu2(&self, c2: u32, idx: usize) -> Result<CharE1> {
        let chars = self.enumerate_unit_chars(GroupKind::E1, c2)?;
        let unit = chars
            .get(idx)
            .cloned()
            .ok_or(CharError::BadIndex { idx, count: chars.len() })?;
        Ok(CharE1 { unit })
    }

    pub fn mu2_trivial(&self) -> CharE1 {
        CharE1 {
            unit: UnitChar {
                session: self.clone(),
                kind: GroupKind::E1,
                level: 0,
                conductor: 0,
                exps: vec![],
            },
        }
    }

    /// Count of characters with exact conductor `c`.
    pub fn char_count(&self, kind: GroupKind, c: u32) -> Result<usize> {
        Ok(self.enumerate_unit_chars(kind, c)?.len())
    }
}

/// A character of a modelled unit group, stored as `zeta_N`-exponents on
/// the generator basis at `level` (trivial when `level == 0`).
#[derive(Debug, Clone)]
pub struct UnitChar {
    session: Session,
    kind: GroupKind,
    level: u32,
    conductor: u32,
    exps: Vec<u64>,
}

impl UnitChar {
    pub fn conductor(&self) -> u32 {
        self.conductor
    }

    pub fn is_trivial(&self) -> bool {
        self.exps.iter().all(|&e| e == 0)
    }

    fn n(&self) -> u64 {
        self.session.0.cyc.order() as u64
    }

    /// `zeta_N`-exponent at a group element given by its exponent vector.
    fn exp_at(&self, vec: &[u64]) -> u64 {
        let n = self.n();
        vec.iter()
            .zip(&self.exps)
            .fold(0u64, |acc, (&e, &a)| (acc + (e % n) * (a % n)) % n)
    }

    fn compute_conductor(&self, model: &FinAbGroup) -> u32 {
        for k in 0..=model.level {
            let trivial = model
                .filtration_layer(k)
                .iter()
                .all(|&i| self.exp_at(&model.dlog[&model.elements[i]]) == 0);
            if trivial {
                return k;
            }
        }
        model.level
    }

    /// `zeta_N`-exponent of the character at a unit (resp. norm-one)
    /// element of `E`; trivial characters skip the residue lookup.
    pub fn exponent_at(&self, x: &EElem) -> Result<u64> {
        if self.level == 0 || self.is_trivial() {
            return Ok(0);
        }
        let model = self.session.model(self.kind, self.level)?;
        let vec = model.dlog(x)?;
        Ok(self.exp_at(&vec))
    }

    pub fn evaluate(&self, x: &EElem) -> Result<CycScalar> {
        let exp = self.exponent_at(x)?;
        Ok(CycScalar::root_of_unity(self.session.cyc_field(), exp as i64))
    }
}

/// A quasi-character `mu1` of `E^x`: a unit character of exact conductor
/// together with `mu1(pi) = pi_rat * zeta_N^pi_root`.
#[derive(Debug, Clone)]
pub struct QuasiCharE {
    unit: UnitChar,
    pi_rat: BigRational,
    pi_root: u64,
}

impl QuasiCharE {
    pub fn conductor(&self) -> u32 {
        self.unit.conductor
    }

    pub fn session(&self) -> &Session {
        &self.unit.session
    }

    pub fn pi_rat(&self) -> &BigRational {
        &self.pi_rat
    }

    pub fn pi_root(&self) -> u64 {
        self.pi_root
    }

    pub fn is_unramified(&self) -> bool {
        self.unit.conductor == 0
    }

    pub fn is_trivial(&self) -> bool {
        self.is_unramified() && self.pi_rat.is_one() && self.pi_root == 0
    }

    /// `mu1(pi)` as an exact scalar.
    pub fn pi_value(&self) -> CycScalar {
        let field = self.unit.session.cyc_field();
        CycScalar::from_rational(field, self.pi_rat.clone())
            .mul(&CycScalar::root_of_unity(field, self.pi_root as i64))
    }

    /// Evaluate at `x = pi^k u`.
    pub fn evaluate(&self, x: &EElem) -> Result<CycScalar> {
        let Val::Finite(k) = x.val() else {
            return Err(CharError::NotInGroup);
        };
        let field = self.unit.session.cyc_field();
        let rat = rational_pow(&self.pi_rat, k);
        let params = self.unit.session.params();
        let unit_part = x.mul(&EElem::uniformizer_pow(params, -k))?;
        let n = self.unit.n();
        let root = ((self.pi_root as i128 * k as i128).rem_euclid(n as i128)) as u64;
        let exp = (root + self.unit.exponent_at(&unit_part)?) % n;
        Ok(CycScalar::from_rational(field, rat)
            .mul(&CycScalar::root_of_unity(field, exp as i64)))
    }

    /// Whether the restriction to `o_F^x` (residues in `F`) is trivial.
    pub fn trivial_on_f_units(&self) -> Result<bool> {
        if self.unit.conductor == 0 {
            return Ok(true);
        }
        let model = self
            .unit
            .session
            .model(GroupKind::EUnits, self.unit.level)?;
        let m = model.params.pow(model.level);
        for u in 1..m {
            if u % model.params.p() == 0 {
                continue;
            }
            if self.unit.exp_at(model.dlog_pair(Pair(u, 0))?) != 0 {
                return Ok(false);
            }
        }
        Ok(true)
    }
}

fn rational_pow(r: &BigRational, k: i64) -> BigRational {
    let mut acc = BigRational::one();
    let base = if k >= 0 { r.clone() } else { r.recip() };
    for _ in 0..k.unsigned_abs() {
        acc *= &base;
    }
    acc
}

/// A character `mu2` of `E^1` with exact conductor.
#[derive(Debug, Clone)]
pub struct CharE1 {
    unit: UnitChar,
}

impl CharE1 {
    pub fn conductor(&self) -> u32 {
        self.unit.conductor
    }

    pub fn is_trivial(&self) -> bool {
        self.unit.conductor == 0
    }

    pub fn evaluate(&self, x: &EElem) -> Result<CycScalar> {
        let field = self.unit.session.cyc_field();
        Ok(CycScalar::root_of_unity(
            field,
            self.unit.exponent_at(x)? as i64,
        ))
    }

    pub fn exponent_at(&self, x: &EElem) -> Result<u64> {
        self.unit.exponent_at(x)
    }

    pub fn session(&self) -> &Session {
        &self.unit.session
    }
}

/// `mu = mu1 (x) mu2` on the diagonal torus, extended trivially on `U`.
#[derive(Debug, Clone)]
pub struct TorusChar {
    pub mu1: QuasiCharE,
    pub mu2: CharE1,
}

impl TorusChar {
    pub fn new(mu1: QuasiCharE, mu2: CharE1) -> TorusChar {
        TorusChar { mu1, mu2 }
    }

    pub fn session(&self) -> &Session {
        self.mu1.session()
    }

    /// `mu(diag(a, b, conj(a)^-1)) = mu1(a) mu2(b)`.
    pub fn evaluate_diag(&self, a: &EElem, b: &EElem) -> Result<CycScalar> {
        Ok(self.mu1.evaluate(a)?.mul(&self.mu2.evaluate(b)?))
    }
}

/// The twist `mu1-tilde(a) = mu1(a) mu2(conj(a)/a)`, with its exact
/// conductor recomputed at level `max(c1, c2, 1)`.
pub fn twisted_char(mu1: &QuasiCharE, mu2: &CharE1) -> Result<QuasiCharE> {
    let session = mu1.session().clone();
    let level = mu1.conductor().max(mu2.conductor()).max(1);
    let model = session.model(GroupKind::EUnits, level)?.clone();
    let n = session.cyc_field().order() as u64;
    let mut exps = Vec::with_capacity(model.gens.len());
    for i in 0..model.gens.len() {
        let lift = model.generator_lift(i);
        let e1 = mu1.unit.exponent_at(&lift)?;
        let ratio = lift.conj().div(&lift)?;
        let e2 = mu2.exponent_at(&ratio)?;
        exps.push((e1 + e2) % n);
    }
    let mut unit = UnitChar {
        session,
        kind: GroupKind::EUnits,
        level,
        conductor: 0,
        exps,
    };
    unit.conductor = unit.compute_conductor(&model);
    if unit.conductor == 0 {
        // Normalize to the canonical unramified form.
        unit.level = 0;
        unit.exps = vec![];
    }
    // pi-bar / pi = 1, so the pi-value is untouched.
    Ok(QuasiCharE {
        unit,
        pi_rat: mu1.pi_rat.clone(),
        pi_root: mu1.pi_root,
    })
}

/// Reducibility classes of `Ind_B^G (mu1 (x) mu2)` in terms of the twist.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RClass {
    /// `mu1-tilde = |.|_E^sign`.
    R1 { sign: i8 },
    /// `mu1-tilde|_{F^x} = omega_{E/F} |.|_F^sign`.
    R2 { sign: i8 },
    /// `mu1-tilde|_{F^x} = 1`, `mu1-tilde != 1`.
    R3,
}

/// Refinement for unramified `mu1`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RUClass {
    /// `mu1 = |.|_E^sign`, `mu2` trivial.
    RU1 { sign: i8 },
    /// `mu1|_{F^x} = omega_{E/F} |.|_F^sign`.
    RU2 { sign: i8 },
    /// `mu1` trivial, `mu2` nontrivial.
    RU3,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Classification {
    /// `None` means the induced representation is irreducible.
    pub r_class: Option<RClass>,
    pub mu1_ramified: bool,
    /// Present exactly when reducible with unramified `mu1`.
    pub ru_class: Option<RUClass>,
    pub twisted_conductor: u32,
}

impl Classification {
    pub fn is_reducible(&self) -> bool {
        self.r_class.is_some()
    }
}

/// Classify reducibility from exact equalities on the twist.
pub fn classify_reducibility(mu1: &QuasiCharE, mu2: &CharE1) -> Result<Classification> {
    let session = mu1.session();
    let q = BigRational::from_integer(BigInt::from(session.params().q()));
    let half = session.cyc_field().order() as u64 / 2;
    let twisted = twisted_char(mu1, mu2)?;
    let unramified_twist = twisted.conductor() == 0;
    let pi_is = |rat: &BigRational, root: u64| -> bool {
        &twisted.pi_rat == rat && twisted.pi_root == root
    };

    let r_class = if unramified_twist && pi_is(&q.recip().pow(2), 0) {
        Some(RClass::R1 { sign: 1 })
    } else if unramified_twist && pi_is(&q.pow(2), 0) {
        Some(RClass::R1 { sign: -1 })
    } else {
        let f_trivial = twisted.trivial_on_f_units()?;
        if f_trivial && pi_is(&q.recip(), half) {
            Some(RClass::R2 { sign: 1 })
        } else if f_trivial && pi_is(&q, half) {
            Some(RClass::R2 { sign: -1 })
        } else if f_trivial && pi_is(&BigRational::one(), 0) && !twisted.is_trivial() {
            Some(RClass::R3)
        } else {
            None
        }
    };

    let mu1_ramified = mu1.conductor() > 0;
    let ru_class = if !mu1_ramified && r_class.is_some() {
        // Direct reading of the RU conditions; must match the R-class.
        let qq = BigRational::from_integer(BigInt::from(session.params().q()));
        let mu1_pi_is =
            |rat: &BigRational, root: u64| -> bool { &mu1.pi_rat == rat && mu1.pi_root == root };
        let ru = if mu2.is_trivial() && mu1_pi_is(&qq.recip().pow(2), 0) {
            Some(RUClass::RU1 { sign: 1 })
        } else if mu2.is_trivial() && mu1_pi_is(&qq.pow(2), 0) {
            Some(RUClass::RU1 { sign: -1 })
        } else if mu1_pi_is(&qq.recip(), half) {
            Some(RUClass::RU2 { sign: 1 })
        } else if mu1_pi_is(&qq, half) {
            Some(RUClass::RU2 { sign: -1 })
        } else if mu1.is_trivial() && !mu2.is_trivial() {
            Some(RUClass::RU3)
        } else {
            None
        };
        debug_assert!(ru.is_some(), "R-class without matching RU condition");
        ru
    } else {
        None
    };

    Ok(Classification {
        r_class,
        mu1_ramified,
        ru_class,
        twisted_conductor: twisted.conductor(),
    })
}

/// Central character `omega_pi(iota(b)) = mu1(b) mu2(b)` on `E^1` and its
/// conductor `n_pi`.
pub fn central_character(mu1: &QuasiCharE, mu2: &CharE1) -> Result<(CharE1, u32)> {
    let session = mu1.session().clone();
    let level = mu1.conductor().max(mu2.conductor()).max(1);
    let model = session.e1_model(level)?.clone();
    let n = session.cyc_field().order() as u64;
    let mut exps = Vec::with_capacity(model.gens.len());
    for i in 0..model.gens.len() {
        let lift = model.generator_lift(i);
        let e1 = mu1.unit.exponent_at(&lift)?;
        let e2 = mu2.exponent_at(&lift)?;
        exps.push((e1 + e2) % n);
    }
    let mut unit = UnitChar {
        session,
        kind: GroupKind::E1,
        level,
        conductor: 0,
        exps,
    };
    unit.conductor = unit.compute_conductor(&model);
    let n_pi = unit.conductor;
    if mu1.conductor() == 0 {
        debug_assert_eq!(n_pi, mu2.conductor());
    }
    Ok((CharE1 { unit }, n_pi))
}

/// `omega_{E/F}(pi^k u) = (-1)^k`: the unramified quadratic character of
/// `F^x` attached to `E/F`.
pub fn omega_ef(x: &FElem) -> Result<i64> {
    match x.val() {
        Val::Finite(v) => Ok(if v % 2 == 0 { 1 } else { -1 }),
        Val::Infinite => Err(CharError::NotInGroup),
    }
}

/// Finite-level generation check: the subgroup of `E^1/E^1_m` generated by
/// `{cayley(a) : a in o_F}` is everything.
pub fn cayley_generates_e1(params: FieldParams, m: u32) -> Result<bool> {
    let model = unit_group_model(params, GroupKind::E1, m)?;
    let mut seeds = Vec::new();
    for a in 0..params.pow(m) {
        let elt = cayley(&FElem::from_integer(params, a as i64))?;
        let (u0, u1) = elt.unit_residues_mod(m)?;
        seeds.push(Pair(u0, u1));
    }
    // Closure under multiplication.
    let mut seen: alloc::collections::BTreeSet<Pair> = seeds.iter().copied().collect();
    let mut frontier: Vec<Pair> = seen.iter().copied().collect();
    while let Some(x) = frontier.pop() {
        for s in &seeds {
            let y = model.ctx.mul(x, *s);
            if seen.insert(y) {
                frontier.push(y);
            }
        }
    }
    Ok(seen.len() as u64 == model.order())
}
