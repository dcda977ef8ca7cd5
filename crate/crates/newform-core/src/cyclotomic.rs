//! Exact arithmetic in the cyclotomic field `Q(zeta_N)`.
//!
//! Scalars are polynomials in `zeta_N` with rational coefficients, reduced
//! modulo the `N`-th cyclotomic polynomial.  `N` is fixed per session (see
//! `characters::Session`), large enough to contain every character value
//! and every `pi`-value the session needs.  Equality is exact.

use alloc::format;
use alloc::string::String;
use alloc::sync::Arc;
use alloc::vec;
use alloc::vec::Vec;
use core::fmt;

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{One, Zero};

/// The field `Q(zeta_N)`: the cyclotomic order together with the monic
/// minimal polynomial of `zeta_N`.
#[derive(Debug)]
pub struct CycField {
    n: u32,
    /// Coefficients of `Phi_N`, constant term first, length `deg + 1`,
    /// leading coefficient 1.
    phi: Vec<BigInt>,
}

impl CycField {
    pub fn new(n: u32) -> Arc<CycField> {
        assert!(n >= 1, "cyclotomic order must be positive");
        Arc::new(CycField { n, phi: cyclotomic_polynomial(n) })
    }

    pub fn order(&self) -> u32 {
        self.n
    }

    /// Degree of the extension, `phi(N)`.
    pub fn degree(&self) -> usize {
        self.phi.len() - 1
    }
}

/// `Phi_n` by exact division: `x^n - 1 = prod_{d | n} Phi_d`.
fn cyclotomic_polynomial(n: u32) -> Vec<BigInt> {
    // x^n - 1.
    let mut num = vec![BigInt::zero(); n as usize + 1];
    num[0] = -BigInt::one();
    num[n as usize] = BigInt::one();
    for d in 1..n {
        if n % d == 0 {
            let phi_d = cyclotomic_polynomial(d);
            num = poly_div_exact(&num, &phi_d);
        }
    }
    num
}

/// Exact division of integer polynomials with monic divisor.
fn poly_div_exact(num: &[BigInt], den: &[BigInt]) -> Vec<BigInt> {
    let mut rem: Vec<BigInt> = num.to_vec();
    let dd = den.len() - 1;
    debug_assert!(den[dd].is_one());
    let mut quot = vec![BigInt::zero(); rem.len() - dd];
    for k in (0..quot.len()).rev() {
        let c = rem[k + dd].clone();
        if !c.is_zero() {
            for (j, dc) in den.iter().enumerate() {
                rem[k + j] -= &c * dc;
            }
        }
        quot[k] = c;
    }
    debug_assert!(rem.iter().all(|c| c.is_zero()));
    quot
}

/// An element of the session cyclotomic field.
#[derive(Debug, Clone)]
pub struct CycScalar {
    field: Arc<CycField>,
    /// Length `field.degree()`, coefficient of `zeta^i` at index `i`.
    coeffs: Vec<BigRational>,
}

impl CycScalar {
    pub fn zero(field: &Arc<CycField>) -> Self {
        CycScalar {
            field: field.clone(),
            coeffs: vec![BigRational::zero(); field.degree()],
        }
    }

    pub fn one(field: &Arc<CycField>) -> Self {
        Self::from_rational(field, BigRational::one())
    }

    pub fn from_rational(field: &Arc<CycField>, r: BigRational) -> Self {
        let mut s = Self::zero(field);
        s.coeffs[0] = r;
        s
    }

    pub fn from_integer(field: &Arc<CycField>, n: i64) -> Self {
        Self::from_rational(field, BigRational::from_integer(BigInt::from(n)))
    }

    pub fn from_ratio(field: &Arc<CycField>, num: i64, den: i64) -> Self {
        Self::from_rational(
            field,
            BigRational::new(BigInt::from(num), BigInt::from(den)),
        )
    }

    /// `zeta_N^k`, reduced.
    pub fn root_of_unity(field: &Arc<CycField>, k: i64) -> Self {
        let n = field.n as i64;
        let k = k.rem_euclid(n) as usize;
        let mut poly = vec![BigRational::zero(); k + 1];
        poly[k] = BigRational::one();
        Self::reduce(field, poly)
    }

    /// `q^e` as an exact rational.
    pub fn q_power(field: &Arc<CycField>, q: u64, e: i64) -> Self {
        let base = BigInt::from(q);
        let r = if e >= 0 {
            BigRational::from_integer(base.pow(e as u32))
        } else {
            BigRational::new(BigInt::one(), base.pow((-e) as u32))
        };
        Self::from_rational(field, r)
    }

    fn reduce(field: &Arc<CycField>, mut poly: Vec<BigRational>) -> Self {
        let deg = field.degree();
        while poly.len() > deg {
            let k = poly.len() - 1;
            let c = poly[k].clone();
            if !c.is_zero() {
                // x^k = x^(k-deg) * (x^deg - Phi) since Phi is monic.
                for j in 0..deg {
                    let t = &c * BigRational::from_integer(field.phi[j].clone());
                    poly[k - deg + j] -= t;
                }
            }
            poly.pop();
        }
        poly.resize(deg, BigRational::zero());
        CycScalar { field: field.clone(), coeffs: poly }
    }

    pub fn field(&self) -> &Arc<CycField> {
        &self.field
    }

    fn check_field(&self, other: &CycScalar) {
        assert!(
            Arc::ptr_eq(&self.field, &other.field) || self.field.n == other.field.n,
            "mixed cyclotomic fields"
        );
    }

    pub fn add(&self, other: &CycScalar) -> CycScalar {
        self.check_field(other);
        let coeffs = self
            .coeffs
            .iter()
            .zip(&other.coeffs)
            .map(|(a, b)| a + b)
            .collect();
        CycScalar { field: self.field.clone(), coeffs }
    }

    pub fn neg(&self) -> CycScalar {
        CycScalar {
            field: self.field.clone(),
            coeffs: self.coeffs.iter().map(|c| -c).collect(),
        }
    }

    pub fn sub(&self, other: &CycScalar) -> CycScalar {
        self.add(&other.neg())
    }

    pub fn mul(&self, other: &CycScalar) -> CycScalar {
        self.check_field(other);
        let deg = self.field.degree();
        let mut prod = vec![BigRational::zero(); 2 * deg.max(1)];
        for (i, a) in self.coeffs.iter().enumerate() {
            if a.is_zero() {
                continue;
            }
            for (j, b) in other.coeffs.iter().enumerate() {
                if b.is_zero() {
                    continue;
                }
                prod[i + j] += a * b;
            }
        }
        Self::reduce(&self.field, prod)
    }

    pub fn scale(&self, r: &BigRational) -> CycScalar {
        CycScalar {
            field: self.field.clone(),
            coeffs: self.coeffs.iter().map(|c| c * r).collect(),
        }
    }

    /// Multiplicative inverse via the extended Euclidean algorithm in
    /// `Q[x]` against `Phi_N`.
    pub fn inv(&self) -> Option<CycScalar> {
        if self.is_zero() {
            return None;
        }
        // r0 = Phi (rational coefficients), r1 = self.
        let phi: Vec<BigRational> = self
            .field
            .phi
            .iter()
            .map(|c| BigRational::from_integer(c.clone()))
            .collect();
        let mut r0 = phi;
        let mut r1 = trim(self.coeffs.clone());
        let mut t0: Vec<BigRational> = vec![];
        let mut t1: Vec<BigRational> = vec![BigRational::one()];
        while !r1.is_empty() {
            let (q, r) = poly_divmod(&r0, &r1);
            let t = poly_sub(&t0, &poly_mul(&q, &t1));
            r0 = r1;
            r1 = r;
            t0 = t1;
            t1 = t;
        }
        // r0 is a nonzero constant gcd (Phi_N is irreducible over Q).
        debug_assert_eq!(r0.len(), 1);
        let scale = r0[0].recip();
        let coeffs: Vec<BigRational> = t0.iter().map(|c| c * &scale).collect();
        Some(Self::reduce(&self.field, coeffs))
    }

    pub fn div(&self, other: &CycScalar) -> Option<CycScalar> {
        Some(self.mul(&other.inv()?))
    }

    pub fn pow(&self, e: i64) -> CycScalar {
        let base = if e < 0 {
            self.inv().expect("pow of zero to negative exponent")
        } else {
            self.clone()
        };
        let mut acc = Self::one(&self.field);
        for _ in 0..e.unsigned_abs() {
            acc = acc.mul(&base);
        }
        acc
    }

    pub fn is_zero(&self) -> bool {
        self.coeffs.iter().all(|c| c.is_zero())
    }

    pub fn is_one(&self) -> bool {
        self.coeffs[0].is_one() && self.coeffs[1..].iter().all(|c| c.is_zero())
    }

    pub fn eq(&self, other: &CycScalar) -> bool {
        self.check_field(other);
        self.coeffs == other.coeffs
    }

    /// The rational value when the scalar is rational, else `None`.
    pub fn as_rational(&self) -> Option<BigRational> {
        if self.coeffs[1..].iter().all(|c| c.is_zero()) {
            Some(self.coeffs[0].clone())
        } else {
            None
        }
    }

    pub fn eq_rational(&self, r: &BigRational) -> bool {
        self.as_rational().map_or(false, |v| &v == r)
    }

    pub fn eq_i64(&self, n: i64) -> bool {
        self.eq_rational(&BigRational::from_integer(BigInt::from(n)))
    }
}

impl PartialEq for CycScalar {
    fn eq(&self, other: &Self) -> bool {
        CycScalar::eq(self, other)
    }
}
impl Eq for CycScalar {}

impl fmt::Display for CycScalar {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let terms: Vec<String> = self
            .coeffs
            .iter()
            .enumerate()
            .filter(|(_, c)| !c.is_zero())
            .map(|(i, c)| {
                if i == 0 {
                    format!("{}", c)
                } else if c.is_one() {
                    format!("z^{}", i)
                } else if (-c).is_one() {
                    format!("-z^{}", i)
                } else {
                    format!("{}*z^{}", c, i)
                }
            })
            .collect();
        if terms.is_empty() {
            return write!(f, "0");
        }
        let mut out = String::new();
        for (k, t) in terms.iter().enumerate() {
            if k > 0 && !t.starts_with('-') {
                out.push('+');
            }
            out.push_str(t);
        }
        write!(f, "{}", out)
    }
}

fn trim(mut v: Vec<BigRational>) -> Vec<BigRational> {
    while v.last().map_or(false, |c| c.is_zero()) {
        v.pop();
    }
    v
}

fn poly_mul(a: &[BigRational], b: &[BigRational]) -> Vec<BigRational> {
    if a.is_empty() || b.is_empty() {
        return vec![];
    }
    let mut out = vec![BigRational::zero(); a.len() + b.len() - 1];
    for (i, x) in a.iter().enumerate() {
        if x.is_zero() {
            continue;
        }
        for (j, y) in b.iter().enumerate() {
            out[i + j] += x * y;
        }
    }
    trim(out)
}

fn poly_sub(a: &[BigRational], b: &[BigRational]) -> Vec<BigRational> {
    let n = a.len().max(b.len());
    let mut out = vec![BigRational::zero(); n];
    for (i, x) in a.iter().enumerate() {
        out[i] += x;
    }
    for (i, y) in b.iter().enumerate() {
        out[i] -= y;
    }
    trim(out)
}

fn poly_divmod(num: &[BigRational], den: &[BigRational]) -> (Vec<BigRational>, Vec<BigRational>) {
    let mut rem = num.to_vec();
    let dd = den.len() - 1;
    let lead = den[dd].clone();
    if rem.len() <= dd {
        return (vec![], trim(rem));
    }
    let mut quot = vec![BigRational::zero(); rem.len() - dd];
    for k in (0..quot.len()).rev() {
        let c = &rem[k + dd] / &lead;
        if !c.is_zero() {
            for (j, dc) in den.iter().enumerate() {
                let t = &c * dc;
                rem[k + j] -= t;
            }
        }
        quot[k] = c;
    }
    (trim(quot), trim(rem))
}
