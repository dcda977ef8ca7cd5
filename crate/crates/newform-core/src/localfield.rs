//! Capped-relative-precision arithmetic in `F = Q_p` (odd `p`) and in the
//! unramified quadratic extension `E = F[sqrt(eps)]`.
//!
//! A nonzero element of `F` is stored as `pi^val * unit` where `unit` is a
//! residue coprime to `p` known modulo `p^prec`.  Multiplicative operations
//! are exact at the carried precision; only addition can cancel digits.  A
//! sum whose known digits cancel completely collapses to the exact zero
//! flag, and a sum left with fewer than `guard` known digits raises
//! [`LocalFieldError::PrecisionLoss`] instead of returning a poisoned value.

use alloc::string::String;
use core::fmt;

/// Errors raised by field arithmetic and parsing.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum LocalFieldError {
    /// `p` is not an odd prime.
    NotOddPrime(u64),
    /// The requested `eps` is a square modulo `p`.
    EpsNotNonResidue(u64),
    /// `p^rel_prec` does not fit in the word-sized residue representation.
    ModulusOverflow { p: u64, rel_prec: u32 },
    /// A cancellation left fewer significant digits than the guard band.
    PrecisionLoss { remaining: u32, guard: u32 },
    /// Division by the exact zero.
    DivisionByZero,
    /// Inverting a value whose valuation cannot be certified.
    DivisionByIndistinguishableZero,
    /// A residue class that cannot be separated from zero at the working
    /// precision, so its valuation is undefined.
    AmbiguousValuation,
    /// Operands built over different field parameters.
    ParamMismatch,
    /// The carried precision is too low for the requested digit count.
    PrecisionTooLow { have: u32, need: u32 },
    /// Malformed element literal.
    Parse(String),
}

impl fmt::Display for LocalFieldError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            LocalFieldError::NotOddPrime(p) => write!(f, "{} is not an odd prime", p),
            LocalFieldError::EpsNotNonResidue(e) => {
                write!(f, "eps = {} is a quadratic residue", e)
            }
            LocalFieldError::ModulusOverflow { p, rel_prec } => {
                write!(f, "p^rel_prec = {}^{} exceeds the residue word", p, rel_prec)
            }
            LocalFieldError::PrecisionLoss { remaining, guard } => write!(
                f,
                "cancellation left {} significant digits (guard band {})",
                remaining, guard
            ),
            LocalFieldError::DivisionByZero => write!(f, "division by exact zero"),
            LocalFieldError::DivisionByIndistinguishableZero => {
                write!(f, "division by a value indistinguishable from zero")
            }
            LocalFieldError::AmbiguousValuation => {
                write!(f, "residue class indistinguishable from zero: valuation undefined")
            }
            LocalFieldError::ParamMismatch => write!(f, "mixed field parameters"),
            LocalFieldError::PrecisionTooLow { have, need } => {
                write!(f, "effective precision {} below required {}", have, need)
            }
            LocalFieldError::Parse(s) => write!(f, "parse error: {}", s),
        }
    }
}

impl core::error::Error for LocalFieldError {}

pub type Result<T> = core::result::Result<T, LocalFieldError>;

/// Largest `k` with `p^k <= u64::MAX`; residues live in a `u64` so that
/// products fit in a `u128` before reduction.
fn max_prec_for(p: u64) -> u32 {
    let mut k = 0u32;
    let mut acc = 1u128;
    loop {
        acc *= p as u128;
        if acc > u64::MAX as u128 {
            return k;
        }
        k += 1;
    }
}

fn is_prime(n: u64) -> bool {
    if n < 2 {
        return false;
    }
    let mut d = 2u64;
    while d * d <= n {
        if n % d == 0 {
            return false;
        }
        d += 1;
    }
    true
}

/// The smallest positive quadratic non-residue modulo an odd prime `p`.
pub fn choose_eps(p: u64) -> Result<u64> {
    if p == 2 || !is_prime(p) {
        return Err(LocalFieldError::NotOddPrime(p));
    }
    for e in 2..p {
        if legendre(e, p) == -1 {
            return Ok(e);
        }
    }
    Err(LocalFieldError::NotOddPrime(p))
}

fn legendre(a: u64, p: u64) -> i32 {
    // Euler criterion: a^((p-1)/2) mod p.
    let r = pow_mod(a % p, (p - 1) / 2, p);
    if r == 0 {
        0
    } else if r == 1 {
        1
    } else {
        -1
    }
}

fn pow_mod(b: u64, mut e: u64, m: u64) -> u64 {
    let mut acc = 1u128;
    let mut bb = (b % m) as u128;
    let m = m as u128;
    while e > 0 {
        if e & 1 == 1 {
            acc = acc * bb % m;
        }
        bb = bb * bb % m;
        e >>= 1;
    }
    acc as u64
}

fn inv_mod(a: u64, m: u64) -> u64 {
    // Extended Euclid; `a` must be a unit mod `m`.
    let (mut r0, mut r1) = (m as i128, (a % m) as i128);
    let (mut t0, mut t1) = (0i128, 1i128);
    while r1 != 0 {
        let q = r0 / r1;
        let r = r0 - q * r1;
        r0 = r1;
        r1 = r;
        let t = t0 - q * t1;
        t0 = t1;
        t1 = t;
    }
    debug_assert_eq!(r0, 1, "inv_mod of non-unit");
    (t0.rem_euclid(m as i128)) as u64
}

/// Session parameters: the prime, the relative precision cap, the guard
/// band and the non-square unit `eps` defining `E = F[sqrt(eps)]`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct FieldParams {
    p: u64,
    rel_prec: u32,
    guard: u32,
    eps: u64,
}

pub const DEFAULT_REL_PREC: u32 = 24;
pub const DEFAULT_GUARD: u32 = 4;

impl FieldParams {
    /// Default parameters: `rel_prec = 24` (capped so `p^rel_prec` fits a
    /// word), guard band 4, `eps` the smallest non-residue.
    pub fn new(p: u64) -> Result<Self> {
        let cap = max_prec_for(p);
        Self::with_precision(p, DEFAULT_REL_PREC.min(cap), DEFAULT_GUARD)
    }

    pub fn with_precision(p: u64, rel_prec: u32, guard: u32) -> Result<Self> {
        let eps = choose_eps(p)?;
        Self::with_eps(p, rel_prec, guard, eps)
    }

    pub fn with_eps(p: u64, rel_prec: u32, guard: u32, eps: u64) -> Result<Self> {
        if p == 2 || !is_prime(p) {
            return Err(LocalFieldError::NotOddPrime(p));
        }
        if rel_prec == 0 || rel_prec > max_prec_for(p) {
            return Err(LocalFieldError::ModulusOverflow { p, rel_prec });
        }
        if legendre(eps % p, p) != -1 {
            return Err(LocalFieldError::EpsNotNonResidue(eps));
        }
        Ok(FieldParams { p, rel_prec, guard, eps })
    }

    pub fn p(&self) -> u64 {
        self.p
    }

    pub fn q(&self) -> u64 {
        self.p
    }

    pub fn rel_prec(&self) -> u32 {
        self.rel_prec
    }

    pub fn guard(&self) -> u32 {
        self.guard
    }

    pub fn eps(&self) -> u64 {
        self.eps
    }

    /// `p^k` as a `u64`; `k` must not exceed `rel_prec`.
    pub fn pow(&self, k: u32) -> u64 {
        debug_assert!(k <= self.rel_prec);
        let mut acc = 1u64;
        for _ in 0..k {
            acc *= self.p;
        }
        acc
    }
}

/// Valuation of an element: finite or `+infinity` (exact zero).
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Val {
    Finite(i64),
    Infinite,
}

impl Val {
    pub fn min(self, other: Val) -> Val {
        match (self, other) {
            (Val::Finite(a), Val::Finite(b)) => Val::Finite(a.min(b)),
            (Val::Finite(a), Val::Infinite) | (Val::Infinite, Val::Finite(a)) => Val::Finite(a),
            (Val::Infinite, Val::Infinite) => Val::Infinite,
        }
    }

    pub fn is_finite(self) -> bool {
        matches!(self, Val::Finite(_))
    }

    /// `self >= k` with `Infinite >= k` for every `k`.
    pub fn at_least(self, k: i64) -> bool {
        match self {
            Val::Finite(v) => v >= k,
            Val::Infinite => true,
        }
    }
}

impl fmt::Display for Val {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Val::Finite(v) => write!(f, "{}", v),
            Val::Infinite => write!(f, "inf"),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Repr {
    Zero,
    Finite { val: i64, unit: u64, prec: u32 },
}

/// An element of `F = Q_p` at capped relative precision.
#[derive(Debug, Clone, Copy)]
pub struct FElem {
    params: FieldParams,
    repr: Repr,
}

impl FElem {
    pub fn zero(params: FieldParams) -> Self {
        FElem { params, repr: Repr::Zero }
    }

    pub fn one(params: FieldParams) -> Self {
        Self::from_integer(params, 1)
    }

    /// `pi^k`, exact.
    pub fn uniformizer_pow(params: FieldParams, k: i64) -> Self {
        FElem {
            params,
            repr: Repr::Finite { val: k, unit: 1, prec: params.rel_prec },
        }
    }

    pub fn from_integer(params: FieldParams, n: i64) -> Self {
        if n == 0 {
            return Self::zero(params);
        }
        let neg = n < 0;
        let mut m = n.unsigned_abs();
        let mut val = 0i64;
        while m % params.p == 0 {
            m /= params.p;
            val += 1;
        }
        let modulus = params.pow(params.rel_prec);
        let mut unit = m % modulus;
        if neg {
            unit = modulus - unit;
        }
        FElem {
            params,
            repr: Repr::Finite { val, unit, prec: params.rel_prec },
        }
    }

    /// `pi^val * residue` where `residue` is read modulo `p^rel_prec`.
    /// A residue class containing zero has no certifiable valuation.
    pub fn from_residue(params: FieldParams, val: i64, residue: u64) -> Result<Self> {
        let modulus = params.pow(params.rel_prec);
        let mut r = residue % modulus;
        if r == 0 {
            return Err(LocalFieldError::AmbiguousValuation);
        }
        let mut extra = 0u32;
        while r % params.p == 0 {
            r /= params.p;
            extra += 1;
        }
        Ok(FElem {
            params,
            repr: Repr::Finite {
                val: val + extra as i64,
                unit: r,
                prec: params.rel_prec - extra,
            },
        })
    }

    /// Rational constructor `a / b` for word-sized integers, `b != 0`.
    pub fn from_ratio(params: FieldParams, a: i64, b: i64) -> Result<Self> {
        let num = Self::from_integer(params, a);
        let den = Self::from_integer(params, b);
        num.mul(&den.inv()?)
    }

    pub fn params(&self) -> FieldParams {
        self.params
    }

    pub fn is_zero(&self) -> bool {
        matches!(self.repr, Repr::Zero)
    }

    pub fn val(&self) -> Val {
        match self.repr {
            Repr::Zero => Val::Infinite,
            Repr::Finite { val, .. } => Val::Finite(val),
        }
    }

    /// Remaining significant digits.  The exact zero reports the full cap.
    pub fn eff_prec(&self) -> u32 {
        match self.repr {
            Repr::Zero => self.params.rel_prec,
            Repr::Finite { prec, .. } => prec,
        }
    }

    /// Unit part modulo `p^digits`; requires `digits <= eff_prec`.
    pub fn unit_mod(&self, digits: u32) -> Result<u64> {
        match self.repr {
            Repr::Zero => Err(LocalFieldError::DivisionByZero),
            Repr::Finite { unit, prec, .. } => {
                if digits > prec {
                    return Err(LocalFieldError::PrecisionTooLow { have: prec, need: digits });
                }
                Ok(unit % self.params.pow(digits))
            }
        }
    }

    fn check_params(&self, other: &FElem) -> Result<()> {
        if self.params != other.params {
            return Err(LocalFieldError::ParamMismatch);
        }
        Ok(())
    }

    /// Addition without the guard-band check; used by equality testing,
    /// where deep cancellation is evidence, not an error.
    fn add_raw(&self, other: &FElem) -> Result<FElem> {
        self.check_params(other)?;
        let (x, y) = match (self.repr, other.repr) {
            (Repr::Zero, _) => return Ok(*other),
            (_, Repr::Zero) => return Ok(*self),
            (a, b) => (a, b),
        };
        let (Repr::Finite { val: v1, unit: u1, prec: m1 }, Repr::Finite { val: v2, unit: u2, prec: m2 }) =
            (x, y)
        else {
            unreachable!()
        };
        // Order so that v1 <= v2.
        let (v1, u1, m1, v2, u2, m2) = if v1 <= v2 {
            (v1, u1, m1, v2, u2, m2)
        } else {
            (v2, u2, m2, v1, u1, m1)
        };
        let shift = (v2 - v1) as u128;
        if shift >= m1 as u128 {
            // Second operand below the first's precision window.
            return Ok(FElem {
                params: self.params,
                repr: Repr::Finite { val: v1, unit: u1, prec: m1 },
            });
        }
        let shift = shift as u32;
        let window = m1.min(shift + m2);
        let modulus = self.params.pow(window) as u128;
        let mut shifted = (u2 % self.params.pow(window - shift)) as u128;
        for _ in 0..shift {
            shifted *= self.params.p as u128;
        }
        let s = ((u1 % self.params.pow(window)) as u128 + shifted) % modulus;
        if s == 0 {
            // Full cancellation of every known digit: exact zero flag.
            return Ok(FElem::zero(self.params));
        }
        let mut s = s as u64;
        let mut k = 0u32;
        while s % self.params.p == 0 {
            s /= self.params.p;
            k += 1;
        }
        Ok(FElem {
            params: self.params,
            repr: Repr::Finite { val: v1 + k as i64, unit: s, prec: window - k },
        })
    }

    pub fn add(&self, other: &FElem) -> Result<FElem> {
        let sum = self.add_raw(other)?;
        if let Repr::Finite { prec, .. } = sum.repr {
            if prec < self.params.guard {
                return Err(LocalFieldError::PrecisionLoss {
                    remaining: prec,
                    guard: self.params.guard,
                });
            }
        }
        Ok(sum)
    }

    pub fn neg(&self) -> FElem {
        match self.repr {
            Repr::Zero => *self,
            Repr::Finite { val, unit, prec } => {
                let modulus = self.params.pow(prec);
                FElem {
                    params: self.params,
                    repr: Repr::Finite { val, unit: modulus - unit, prec },
                }
            }
        }
    }

    pub fn sub(&self, other: &FElem) -> Result<FElem> {
        self.add(&other.neg())
    }

    pub fn mul(&self, other: &FElem) -> Result<FElem> {
        self.check_params(other)?;
        match (self.repr, other.repr) {
            (Repr::Zero, _) | (_, Repr::Zero) => Ok(FElem::zero(self.params)),
            (
                Repr::Finite { val: v1, unit: u1, prec: m1 },
                Repr::Finite { val: v2, unit: u2, prec: m2 },
            ) => {
                let prec = m1.min(m2);
                let modulus = self.params.pow(prec) as u128;
                let unit = ((u1 as u128 % modulus) * (u2 as u128 % modulus) % modulus) as u64;
                Ok(FElem {
                    params: self.params,
                    repr: Repr::Finite { val: v1 + v2, unit, prec },
                })
            }
        }
    }

    pub fn mul_i64(&self, n: i64) -> Result<FElem> {
        self.mul(&FElem::from_integer(self.params, n))
    }

    pub fn inv(&self) -> Result<FElem> {
        match self.repr {
            Repr::Zero => Err(LocalFieldError::DivisionByZero),
            Repr::Finite { val, unit, prec } => {
                let modulus = self.params.pow(prec);
                Ok(FElem {
                    params: self.params,
                    repr: Repr::Finite { val: -val, unit: inv_mod(unit, modulus), prec },
                })
            }
        }
    }

    pub fn div(&self, other: &FElem) -> Result<FElem> {
        self.mul(&other.inv()?)
    }

    /// Equality up to `digits` significant digits relative to the larger
    /// of the two leading terms.
    pub fn eq_to_prec(&self, other: &FElem, digits: u32) -> bool {
        let Ok(diff) = self.add_raw(&other.neg()) else {
            return false;
        };
        match diff.repr {
            Repr::Zero => true,
            Repr::Finite { val, .. } => match self.val().min(other.val()) {
                Val::Infinite => false,
                Val::Finite(base) => val >= base + digits as i64,
            },
        }
    }

    /// Equality at the joint effective precision.
    pub fn eq_eff(&self, other: &FElem) -> bool {
        self.eq_to_prec(other, self.eff_prec().min(other.eff_prec()))
    }
}

/// An element of `E = F[sqrt(eps)]`, stored as `a + b*sqrt(eps)`.
///
/// The extension is unramified, so the valuation is the minimum of the
/// component valuations and `pi` stays a uniformizer.
#[derive(Debug, Clone, Copy)]
pub struct EElem {
    a: FElem,
    b: FElem,
}

impl EElem {
    pub fn new(a: FElem, b: FElem) -> Self {
        EElem { a, b }
    }

    pub fn zero(params: FieldParams) -> Self {
        EElem { a: FElem::zero(params), b: FElem::zero(params) }
    }

    pub fn one(params: FieldParams) -> Self {
        EElem { a: FElem::one(params), b: FElem::zero(params) }
    }

    pub fn from_f(a: FElem) -> Self {
        EElem { b: FElem::zero(a.params), a }
    }

    pub fn sqrt_eps(params: FieldParams) -> Self {
        EElem { a: FElem::zero(params), b: FElem::one(params) }
    }

    pub fn from_integers(params: FieldParams, a: i64, b: i64) -> Self {
        EElem {
            a: FElem::from_integer(params, a),
            b: FElem::from_integer(params, b),
        }
    }

    pub fn uniformizer_pow(params: FieldParams, k: i64) -> Self {
        EElem::from_f(FElem::uniformizer_pow(params, k))
    }

    pub fn params(&self) -> FieldParams {
        self.a.params
    }

    /// Component on `1`.
    pub fn re(&self) -> FElem {
        self.a
    }

    /// Component on `sqrt(eps)`.
    pub fn im(&self) -> FElem {
        self.b
    }

    pub fn is_zero(&self) -> bool {
        self.a.is_zero() && self.b.is_zero()
    }

    pub fn val(&self) -> Val {
        self.a.val().min(self.b.val())
    }

    pub fn eff_prec(&self) -> u32 {
        self.a.eff_prec().min(self.b.eff_prec())
    }

    pub fn conj(&self) -> EElem {
        EElem { a: self.a, b: self.b.neg() }
    }

    pub fn add(&self, other: &EElem) -> Result<EElem> {
        Ok(EElem { a: self.a.add(&other.a)?, b: self.b.add(&other.b)? })
    }

    pub fn neg(&self) -> EElem {
        EElem { a: self.a.neg(), b: self.b.neg() }
    }

    pub fn sub(&self, other: &EElem) -> Result<EElem> {
        self.add(&other.neg())
    }

    pub fn mul(&self, other: &EElem) -> Result<EElem> {
        let params = self.a.params;
        let eps = FElem::from_integer(params, params.eps as i64);
        // (a1 + b1 s)(a2 + b2 s) = a1 a2 + eps b1 b2 + (a1 b2 + b1 a2) s.
        // The cross sums are internal: a deep cancellation there is a
        // legitimate small value, not a guard-band event.
        let a = self
            .a
            .mul(&other.a)?
            .add_raw(&eps.mul(&self.b.mul(&other.b)?)?)?;
        let b = self.a.mul(&other.b)?.add_raw(&self.b.mul(&other.a)?)?;
        Ok(EElem { a, b })
    }

    pub fn mul_f(&self, f: &FElem) -> Result<EElem> {
        Ok(EElem { a: self.a.mul(f)?, b: self.b.mul(f)? })
    }

    pub fn mul_i64(&self, n: i64) -> Result<EElem> {
        self.mul_f(&FElem::from_integer(self.params(), n))
    }

    /// Norm `x * conj(x)`, an element of `F`.
    pub fn norm(&self) -> Result<FElem> {
        let params = self.a.params;
        let eps = FElem::from_integer(params, params.eps as i64);
        self.a.mul(&self.a)?.sub(&eps.mul(&self.b.mul(&self.b)?)?)
    }

    /// Trace `x + conj(x)`, an element of `F`.
    pub fn trace(&self) -> Result<FElem> {
        self.a.mul_i64(2)
    }

    pub fn inv(&self) -> Result<EElem> {
        if self.is_zero() {
            return Err(LocalFieldError::DivisionByZero);
        }
        // conj(x) / N(x).  For a non-square eps the leading digits of
        // a^2 - eps b^2 cannot cancel, so a full cancellation here means
        // the valuation of the norm is not certified at this precision.
        let n = match self.norm() {
            Ok(n) => n,
            Err(LocalFieldError::PrecisionLoss { .. }) => {
                return Err(LocalFieldError::DivisionByIndistinguishableZero)
            }
            Err(e) => return Err(e),
        };
        if n.is_zero() {
            return Err(LocalFieldError::DivisionByIndistinguishableZero);
        }
        self.conj().mul_f(&n.inv()?)
    }

    pub fn div(&self, other: &EElem) -> Result<EElem> {
        self.mul(&other.inv()?)
    }

    pub fn eq_to_prec(&self, other: &EElem, digits: u32) -> bool {
        let Ok(diff) = self.sub_raw(other) else { return false };
        if diff.is_zero() {
            return true;
        }
        match self.val().min(other.val()) {
            Val::Infinite => false,
            Val::Finite(base) => diff.val().at_least(base + digits as i64),
        }
    }

    pub fn eq_eff(&self, other: &EElem) -> bool {
        self.eq_to_prec(other, self.eff_prec().min(other.eff_prec()))
    }

    /// Difference without guard-band enforcement.
    pub(crate) fn sub_raw(&self, other: &EElem) -> Result<EElem> {
        Ok(EElem {
            a: self.a.add_raw(&other.a.neg())?,
            b: self.b.add_raw(&other.b.neg())?,
        })
    }

    /// Sum without guard-band enforcement; used by matrix plumbing where a
    /// deep cancellation is a legitimate exact zero, not an error.
    pub(crate) fn add_raw(&self, other: &EElem) -> Result<EElem> {
        Ok(EElem {
            a: self.a.add_raw(&other.a)?,
            b: self.b.add_raw(&other.b)?,
        })
    }

    /// True when the element is flagged exact zero.
    pub fn is_exact_zero(&self) -> bool {
        self.is_zero()
    }

    /// Unit-part residues `(u0, u1)` of `x / pi^val(x)` modulo `p^digits`.
    pub fn unit_residues_mod(&self, digits: u32) -> Result<(u64, u64)> {
        let Val::Finite(v) = self.val() else {
            return Err(LocalFieldError::DivisionByZero);
        };
        let params = self.params();
        let comp = |c: &FElem| -> Result<u64> {
            match c.repr {
                Repr::Zero => Ok(0),
                Repr::Finite { val, unit, prec } => {
                    let shift = (val - v) as u32;
                    if shift >= digits {
                        return Ok(0);
                    }
                    if prec + shift < digits {
                        return Err(LocalFieldError::PrecisionTooLow {
                            have: prec + shift,
                            need: digits,
                        });
                    }
                    let m = params.pow(digits);
                    let mut r = unit % params.pow(digits - shift);
                    for _ in 0..shift {
                        r = r * params.p % m;
                    }
                    Ok(r)
                }
            }
        };
        Ok((comp(&self.a)?, comp(&self.b)?))
    }

    /// Residues of the components themselves modulo `p^digits` (not the
    /// unit part); requires the element to be integral.
    pub fn residues_mod(&self, digits: u32) -> Result<(u64, u64)> {
        if !self.val().at_least(0) {
            return Err(LocalFieldError::AmbiguousValuation);
        }
        if self.is_zero() {
            return Ok((0, 0));
        }
        let shifted = self.unit_residues_mod(digits)?;
        let Val::Finite(v) = self.val() else { unreachable!() };
        let params = self.params();
        let m = params.pow(digits);
        let mut pair = shifted;
        for _ in 0..v.min(digits as i64) {
            pair.0 = pair.0 * params.p % m;
            pair.1 = pair.1 * params.p % m;
        }
        if v >= digits as i64 {
            pair = (0, 0);
        }
        Ok(pair)
    }
}

// ---------------------------------------------------------------------------
// Textual element format: "vE^k*(u0+u1*s)", zero prints as "0".
// ---------------------------------------------------------------------------

impl fmt::Display for EElem {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.is_zero() {
            return write!(f, "0");
        }
        let Val::Finite(v) = self.val() else { unreachable!() };
        let prec = self.eff_prec();
        let (u0, u1) = self
            .unit_residues_mod(prec)
            .expect("unit residues at own precision");
        write!(f, "vE^{}*({}+{}*s)", v, u0, u1)
    }
}

/// Parse the literal format produced by `Display`.  Parsed values carry
/// full relative precision.
pub fn parse_eelem(params: FieldParams, s: &str) -> Result<EElem> {
    let s = s.trim();
    if s == "0" {
        return Ok(EElem::zero(params));
    }
    let err = || LocalFieldError::Parse(String::from(s));
    let rest = s.strip_prefix("vE^").ok_or_else(err)?;
    let star = rest.find("*(").ok_or_else(err)?;
    let k: i64 = rest[..star].parse().map_err(|_| err())?;
    let body = rest[star + 2..].strip_suffix(')').ok_or_else(err)?;
    let plus = body.find('+').ok_or_else(err)?;
    let u0: u64 = body[..plus].parse().map_err(|_| err())?;
    let u1 = body[plus + 1..].strip_suffix("*s").ok_or_else(err)?;
    let u1: u64 = u1.parse().map_err(|_| err())?;
    let modulus = params.pow(params.rel_prec);
    if u0 >= modulus || u1 >= modulus {
        return Err(err());
    }
    if u0 == 0 && u1 == 0 {
        return Err(LocalFieldError::AmbiguousValuation);
    }
    let f = |r: u64| {
        if r == 0 {
            Ok(FElem::zero(params))
        } else {
            FElem::from_residue(params, k, r)
        }
    };
    // Residues divisible by p are normalized into the valuation, so the
    // printed form is canonical even when the input was not.
    Ok(EElem { a: f(u0)?, b: f(u1)? })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use rand::Rng;
    use rand::SeedableRng;
    use rand_chacha::ChaCha12Rng;

    fn p3() -> FieldParams {
        FieldParams::new(3).unwrap()
    }

    fn random_felem<R: Rng>(params: FieldParams, rng: &mut R) -> FElem {
        if rng.gen_ratio(1, 20) {
            return FElem::zero(params);
        }
        let val = rng.gen_range(-3..=3);
        let modulus = params.pow(params.rel_prec);
        loop {
            let u = rng.gen_range(1..modulus);
            if u % params.p() != 0 {
                return FElem::from_residue(params, val, u).unwrap();
            }
        }
    }

    fn random_eelem<R: Rng>(params: FieldParams, rng: &mut R) -> EElem {
        EElem::new(random_felem(params, rng), random_felem(params, rng))
    }

    #[test]
    fn choose_eps_matches_brute_force_scan() {
        for &p in &[3u64, 5, 7, 11, 13] {
            let squares: std::collections::BTreeSet<u64> =
                (0..p).map(|x| x * x % p).collect();
            let expected = (2..p).find(|e| !squares.contains(e)).unwrap();
            assert_eq!(choose_eps(p).unwrap(), expected);
        }
        assert_eq!(choose_eps(3).unwrap(), 2);
        assert_eq!(choose_eps(5).unwrap(), 2);
        assert_eq!(choose_eps(7).unwrap(), 3);
        assert!(choose_eps(4).is_err());
        assert!(choose_eps(2).is_err());
        assert!(choose_eps(9).is_err());
    }

    #[test]
    fn sqrt_eps_squares_to_eps() {
        let params = p3();
        let s = EElem::sqrt_eps(params);
        let sq = s.mul(&s).unwrap();
        let eps = EElem::from_integers(params, params.eps() as i64, 0);
        assert!(sq.eq_eff(&eps));
    }

    #[test]
    fn add_neg_gives_exact_zero_flag() {
        let params = p3();
        let mut rng = ChaCha12Rng::seed_from_u64(1);
        for _ in 0..100 {
            let x = random_eelem(params, &mut rng);
            let z = x.add(&x.neg()).unwrap();
            assert!(z.is_exact_zero());
        }
    }

    #[test]
    fn inv_of_one_plus_sqrt_eps_at_p3() {
        // p = 3, eps = 2: N(1+s) = 1 - eps = -1, so (1+s)^{-1} = -(1-s).
        let params = p3();
        let x = EElem::from_integers(params, 1, 1);
        let inv = x.inv().unwrap();
        let expected = EElem::from_integers(params, -1, 1);
        assert!(inv.eq_eff(&expected));
        assert!(x.mul(&inv).unwrap().eq_eff(&EElem::one(params)));
    }

    #[test]
    fn conj_fixes_f_and_is_involution() {
        let params = p3();
        let s = EElem::sqrt_eps(params);
        assert!(s.conj().eq_eff(&s.neg()));
        let pi = EElem::uniformizer_pow(params, 1);
        assert!(pi.conj().eq_eff(&pi));
        let mut rng = ChaCha12Rng::seed_from_u64(2);
        for _ in 0..200 {
            let x = random_eelem(params, &mut rng);
            assert!(x.conj().conj().eq_eff(&x));
        }
    }

    #[test]
    fn norm_and_trace_basics() {
        let params = p3();
        let x = EElem::from_integers(params, 1, 1);
        let n = x.norm().unwrap();
        let expected = FElem::from_integer(params, 1 - params.eps() as i64);
        assert!(n.eq_eff(&expected));
        let t = EElem::sqrt_eps(params).trace().unwrap();
        assert!(t.is_zero());
    }

    #[test]
    fn norm_valuation_is_twice_e_valuation() {
        let params = p3();
        let mut rng = ChaCha12Rng::seed_from_u64(3);
        for _ in 0..1000 {
            let x = random_eelem(params, &mut rng);
            if x.is_zero() {
                continue;
            }
            let Val::Finite(v) = x.val() else { unreachable!() };
            assert_eq!(x.norm().unwrap().val(), Val::Finite(2 * v));
        }
    }

    #[test]
    fn val_examples() {
        let params = p3();
        let x = EElem::from_integers(params, 1, 1)
            .mul(&EElem::uniformizer_pow(params, 3))
            .unwrap();
        assert_eq!(x.val(), Val::Finite(3));
        assert_eq!(EElem::zero(params).val(), Val::Infinite);
    }

    #[test]
    fn val_is_multiplicative() {
        let params = p3();
        let mut rng = ChaCha12Rng::seed_from_u64(4);
        for _ in 0..1000 {
            let x = random_eelem(params, &mut rng);
            let y = random_eelem(params, &mut rng);
            if x.is_zero() || y.is_zero() {
                assert_eq!(x.mul(&y).unwrap().val(), Val::Infinite);
                continue;
            }
            let (Val::Finite(a), Val::Finite(b)) = (x.val(), y.val()) else {
                unreachable!()
            };
            assert_eq!(x.mul(&y).unwrap().val(), Val::Finite(a + b));
        }
    }

    #[test]
    fn ultrametric_inequality() {
        let params = p3();
        let mut rng = ChaCha12Rng::seed_from_u64(5);
        for _ in 0..1000 {
            let x = random_eelem(params, &mut rng);
            let y = random_eelem(params, &mut rng);
            let Ok(s) = x.add(&y) else { continue };
            let m = x.val().min(y.val());
            match m {
                Val::Infinite => assert_eq!(s.val(), Val::Infinite),
                Val::Finite(m0) => {
                    assert!(s.val().at_least(m0));
                    if x.val() != y.val() {
                        assert_eq!(s.val(), Val::Finite(m0));
                    }
                }
            }
        }
    }

    #[test]
    fn inv_roundtrip() {
        let params = p3();
        let mut rng = ChaCha12Rng::seed_from_u64(6);
        for _ in 0..500 {
            let x = random_eelem(params, &mut rng);
            if x.is_zero() {
                continue;
            }
            let inv = x.inv().unwrap();
            assert!(x.mul(&inv).unwrap().eq_eff(&EElem::one(params)));
            assert!(inv.inv().unwrap().eq_eff(&x));
        }
    }

    #[test]
    fn residue_field_has_q_squared_elements() {
        for p in [3u64, 5] {
            let params = FieldParams::new(p).unwrap();
            let mut classes = std::vec::Vec::new();
            for u0 in 0..p {
                for u1 in 0..p {
                    classes.push(EElem::from_integers(params, u0 as i64, u1 as i64));
                }
            }
            // Pairwise distinct modulo pi.
            for (i, x) in classes.iter().enumerate() {
                for y in classes.iter().skip(i + 1) {
                    let d = x.sub_raw(y).unwrap();
                    assert!(!d.val().at_least(1), "classes collide mod pi");
                }
            }
            assert_eq!(classes.len() as u64, p * p);
        }
    }

    #[test]
    fn precision_loss_is_loud() {
        let params = p3();
        // Two values equal through all but the last two digits.
        let m = params.rel_prec();
        let x = FElem::from_residue(params, 0, 1).unwrap();
        let tail = FElem::uniformizer_pow(params, (m - 2) as i64);
        let y = x.add(&tail).unwrap().neg();
        match x.add(&y) {
            Err(LocalFieldError::PrecisionLoss { remaining, .. }) => {
                assert_eq!(remaining, 2)
            }
            other => panic!("expected precision loss, got {:?}", other),
        }
    }

    #[test]
    fn parse_rejects_indistinguishable_zero() {
        let params = FieldParams::with_precision(3, 2, 1).unwrap();
        // Residue 9 = 0 mod 3^2: valuation cannot be certified.
        assert_eq!(
            FElem::from_residue(params, 0, 9).unwrap_err(),
            LocalFieldError::AmbiguousValuation
        );
        assert_eq!(
            parse_eelem(params, "vE^0*(0+0*s)").unwrap_err(),
            LocalFieldError::AmbiguousValuation
        );
    }

    #[test]
    fn literal_roundtrip_examples() {
        let params = p3();
        for s in ["0", "vE^3*(2+1*s)", "vE^-2*(1+0*s)", "vE^0*(2+2*s)"] {
            let x = parse_eelem(params, s).unwrap();
            assert_eq!(std::format!("{}", x), s);
        }
        assert!(parse_eelem(params, "vE^0*(3+0*s)").is_ok()); // normalizes to vE^1
        assert!(parse_eelem(params, "junk").is_err());
    }

    proptest! {
        #[test]
        fn prop_literal_roundtrip(val in -4i64..4, u0 in 0u64..81, u1 in 0u64..81) {
            let params = p3();
            prop_assume!(u0 % 3 != 0 || u1 % 3 != 0);
            let a = if u0 == 0 { FElem::zero(params) } else { FElem::from_residue(params, val, u0).unwrap() };
            let b = if u1 == 0 { FElem::zero(params) } else { FElem::from_residue(params, val, u1).unwrap() };
            let x = EElem::new(a, b);
            let printed = std::format!("{}", x);
            let back = parse_eelem(params, &printed).unwrap();
            prop_assert!(back.eq_eff(&x));
        }

        #[test]
        fn prop_norm_multiplicative(seed in 0u64..500) {
            let params = p3();
            let mut rng = ChaCha12Rng::seed_from_u64(seed);
            let x = random_eelem(params, &mut rng);
            let y = random_eelem(params, &mut rng);
            let lhs = x.mul(&y).unwrap().norm().unwrap();
            let rhs = x.norm().unwrap().mul(&y.norm().unwrap()).unwrap();
            prop_assert!(lhs.eq_eff(&rhs));
        }

        #[test]
        fn prop_trace_linear(seed in 0u64..500) {
            let params = p3();
            let mut rng = ChaCha12Rng::seed_from_u64(seed.wrapping_add(9000));
            let x = random_eelem(params, &mut rng);
            let y = random_eelem(params, &mut rng);
            if let Ok(s) = x.add(&y) {
                let lhs = s.trace().unwrap();
                if let Ok(rhs) = x.trace().unwrap().add(&y.trace().unwrap()) {
                    prop_assert!(lhs.eq_to_prec(&rhs, 8) || lhs.is_zero() && rhs.is_zero());
                }
            }
        }
    }
}
