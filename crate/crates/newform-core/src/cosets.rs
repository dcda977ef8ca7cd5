//! Certified double-coset reduction `g = b * gamma_i * k` for `B\G/K_n`,
//! the valid-index predicate on torus characters, and a sampling oracle
//! for the stabilizer `B meet gamma_i K_n gamma_i^{-1}`.
//!
//! The reduction works on the bottom row of `g`, which is a complete
//! left-`B` invariant: left multiplication by `B` rescales it, and an
//! element of `G` with bottom row `(0, 0, *)` is upper triangular.  Each
//! move right-multiplies by an explicit element of `K_n`:
//!
//! - `t_n` flips the row when the first entry dominates;
//! - `u-hat(0, -t sqrt(eps))` strips a trace-zero corner in `p^n`;
//! - `u-hat(-y, -y conj(y)/2)` clears a row congruent to `(*, *, 1)` mod
//!   `K_n`;
//! - `t(pi^j / y)` normalizes the middle entry to `-pi^j` exactly;
//! - the `u - diag - t_n - u` factorization handles a dominant corner.
//!
//! Case analysis on the valuations of the middle entry and of the
//! trace-zero part of the corner shows one flip always reaches a terminal
//! case, so the engine is total; an iteration cap with a structured
//! `ReductionIncomplete` diagnostic remains as a tripwire, and every
//! certificate is re-verified by multiplication before being returned.

use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;
use core::fmt;

use rand::Rng;

use crate::characters::{cayley, CharError, TorusChar};
use crate::group::{GMat, GroupError, SubgroupSpec};
use crate::localfield::{EElem, FElem, FieldParams, Val};

#[derive(Debug)]
pub enum CosetError {
    /// The move engine exhausted its iteration budget; carries the
    /// residual row for diagnosis.
    ReductionIncomplete { residual: String },
    /// A certificate component failed re-verification.
    CertificateInvalid(&'static str),
    Group(GroupError),
    Char(CharError),
}

impl From<GroupError> for CosetError {
    fn from(e: GroupError) -> Self {
        CosetError::Group(e)
    }
}

impl From<CharError> for CosetError {
    fn from(e: CharError) -> Self {
        CosetError::Char(e)
    }
}

impl From<crate::localfield::LocalFieldError> for CosetError {
    fn from(e: crate::localfield::LocalFieldError) -> Self {
        CosetError::Group(GroupError::Field(e))
    }
}

impl fmt::Display for CosetError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CosetError::ReductionIncomplete { residual } => {
                write!(f, "reduction incomplete; residual row {}", residual)
            }
            CosetError::CertificateInvalid(what) => {
                write!(f, "certificate failed re-verification: {}", what)
            }
            CosetError::Group(e) => write!(f, "{}", e),
            CosetError::Char(e) => write!(f, "{}", e),
        }
    }
}

impl core::error::Error for CosetError {}

pub type Result<T> = core::result::Result<T, CosetError>;

/// Machine-checkable witness of `g = b * gamma_i * k`.
#[derive(Debug, Clone)]
pub struct ReductionCertificate {
    pub i: u32,
    pub b: GMat,
    pub k: GMat,
    pub n: u32,
}

/// The representatives `gamma_i`, `ceil(n/2) <= i <= n`, in increasing `i`.
pub fn reps(params: FieldParams, n: u32) -> Vec<GMat> {
    (n.div_ceil(2)..=n).map(|i| GMat::gamma(params, i)).collect()
}

/// Index range of the representatives at level `n`.
pub fn rep_range(n: u32) -> core::ops::RangeInclusive<u32> {
    n.div_ceil(2)..=n
}

struct Row {
    w: [EElem; 3],
}

impl Row {
    fn apply(&mut self, m: &GMat) {
        let params = self.w[0].params();
        let mut out = [EElem::zero(params); 3];
        for (c, slot) in out.iter_mut().enumerate() {
            let mut acc = EElem::zero(params);
            for k in 0..3 {
                let t = self.w[k].mul(m.entry(k, c)).expect("row entry product");
                acc = acc.add_raw(&t).expect("row entry sum");
            }
            *slot = acc;
        }
        self.w = out;
    }

    /// Projective rescale to make the third entry exactly 1.
    fn scale_to_unit_corner(&mut self) -> Result<()> {
        let inv = self.w[2].inv().map_err(GroupError::Field)?;
        for e in &mut self.w {
            *e = e.mul(&inv).map_err(GroupError::Field)?;
        }
        Ok(())
    }

    fn describe(&self) -> String {
        format!("({},{},{})", self.w[0], self.w[1], self.w[2])
    }
}

/// Reduce a certified `g` to its double-coset normal form at level `n`.
pub fn reduce(g: &GMat, n: u32) -> Result<ReductionCertificate> {
    let params = g.params();
    if !g.is_certified() {
        return Err(CosetError::Group(GroupError::NotCertified));
    }
    let mut row = Row { w: g.row(2) };
    let mut acc = GMat::identity(params);
    let push = |row: &mut Row, acc: &mut GMat, m: GMat| {
        row.apply(&m);
        *acc = acc.mul(&m);
    };

    let half = FElem::from_ratio(params, -1, 2).expect("p odd");
    let tn = GMat::t_n(params, n);

    for _ in 0..32 {
        // Normalize: the middle entry can never strictly dominate, so the
        // corner with minimal valuation is w1 or w3; flip if it is w1.
        let (v1, v3) = (row.w[0].val(), row.w[2].val());
        let flip = match (v1, v3) {
            (_, Val::Infinite) => true,
            (Val::Infinite, _) => false,
            (Val::Finite(a), Val::Finite(b)) => a < b,
        };
        if flip {
            push(&mut row, &mut acc, tn.clone());
        }
        row.scale_to_unit_corner()?;

        if let Some(i) = success_index(&row, params, n) {
            return finish(g, n, i, acc);
        }

        // Scaled row (x, -conj(y), 1); split x = -y conj(y)/2 + t sqrt(eps).
        let x = row.w[0];
        let y = row.w[1].conj().neg();
        let t = x.im();
        let n_i64 = n as i64;
        let ceil_half = n.div_ceil(2) as i64;
        let tau_big = t.val().at_least(n_i64);
        let j = y.val();

        if tau_big {
            if !t.is_zero() {
                let strip = EElem::sqrt_eps(params).mul_f(&t)?.neg();
                push(
                    &mut row,
                    &mut acc,
                    GMat::u_lower(&EElem::zero(params), &strip)?,
                );
            }
            if j.at_least(n_i64) {
                // Row is congruent to (0, 0, 1) mod K_n.
                let d = EElem::from_f(y.norm()?.mul(&half)?);
                push(&mut row, &mut acc, GMat::u_lower(&y.neg(), &d)?);
                push(&mut row, &mut acc, GMat::gamma(params, n));
            } else if j.at_least(ceil_half) {
                let Val::Finite(jv) = j else { unreachable!() };
                let a = EElem::uniformizer_pow(params, jv).div(&y)?;
                push(&mut row, &mut acc, GMat::t_h(&a)?);
            } else {
                push(&mut row, &mut acc, tn.clone());
            }
        } else {
            // tau < n, so x != 0.
            let tau_le_j = match (t.val(), j) {
                (Val::Finite(tv), Val::Finite(jv)) => tv <= jv,
                (Val::Finite(_), Val::Infinite) => true,
                _ => unreachable!("tau < n is finite"),
            };
            if tau_le_j {
                // Undo the u-diag-t_n-u factorization of u-hat(y, x).
                let c = y.conj().div(&x)?;
                let d = x.conj().inv().map_err(GroupError::Field)?;
                push(&mut row, &mut acc, GMat::u_upper(&c, &d)?);
                push(&mut row, &mut acc, tn.clone());
                push(&mut row, &mut acc, GMat::gamma(params, n));
            } else {
                push(&mut row, &mut acc, tn.clone());
            }
        }
    }
    Err(CosetError::ReductionIncomplete { residual: row.describe() })
}

fn success_index(row: &Row, params: FieldParams, n: u32) -> Option<u32> {
    for i in rep_range(n) {
        let gamma = GMat::gamma(params, i);
        // Scaled row must equal the bottom row of gamma_i exactly.
        if row.w[1].eq_eff(gamma.entry(2, 1)) && row.w[0].eq_eff(gamma.entry(2, 0)) {
            return Some(i);
        }
    }
    None
}

fn finish(g: &GMat, n: u32, i: u32, acc: GMat) -> Result<ReductionCertificate> {
    let params = g.params();
    let k = acc.inverse()?;
    let b = g.mul(&acc).mul(&GMat::gamma_inv(params, i));
    let cert = ReductionCertificate { i, b, k, n };
    if !verify_certificate(&cert, g)? {
        return Err(CosetError::CertificateInvalid("post-reduction check"));
    }
    Ok(cert)
}

/// Recompute `b * gamma_i * k` and all memberships.
pub fn verify_certificate(cert: &ReductionCertificate, g: &GMat) -> Result<bool> {
    let params = g.params();
    if !rep_range(cert.n).contains(&cert.i) {
        return Ok(false);
    }
    if !cert.b.membership(SubgroupSpec::B)? {
        return Ok(false);
    }
    if !cert.k.membership(SubgroupSpec::K(cert.n))? {
        return Ok(false);
    }
    let recomposed = cert
        .b
        .mul(&GMat::gamma(params, cert.i))
        .mul(&cert.k);
    Ok(recomposed.eq_eff(g))
}

/// How to decide triviality of `mu` on the stabilizer.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum StabMode {
    /// The inequalities `c(mu2) <= 2i - n` and `c(mu1) <= n - i`.
    Formula,
    /// Structured sweeps plus random words in proven stabilizer members.
    Sampled,
}

/// Whether `mu` is trivial on `B meet gamma_i K_n gamma_i^{-1}`.
///
/// Sampled mode evaluates `mu` on torus elements `t(a)` with
/// `a in 1 + p^{n-i}` (full residue sweep to the session's depth), on the
/// Cayley-transform elements sweeping `a` over `p_F^{2i-n}` residues, and
/// on `samples` random words in stabilizer generators.
pub fn mu_trivial_on_stabilizer<R: Rng>(
    mu: &TorusChar,
    i: u32,
    n: u32,
    mode: StabMode,
    samples: u32,
    rng: &mut R,
) -> Result<bool> {
    assert!(rep_range(n).contains(&i), "index outside rep range");
    let c1 = mu.mu1.conductor();
    let c2 = mu.mu2.conductor();
    match mode {
        StabMode::Formula => Ok(c2 as i64 <= 2 * i as i64 - n as i64 && c1 <= n - i),
        StabMode::Sampled => {
            let session = mu.session();
            let params = session.params();
            // Sweep depth max(c1, c2) guarantees a witness whenever the
            // formula fails: the swept cosets fill the stabilizer's torus
            // part modulo the characters' kernels.
            let depth = c1.max(c2).max(1).min(params.rel_prec());
            // Torus sweep: a = 1 + pi^{n-i} (u0 + u1 sqrt(eps)).
            let m = params.pow(depth);
            let shift = (n - i) as i64;
            for u0 in 0..m {
                for u1 in 0..m {
                    let tail = EElem::from_integers(params, u0 as i64, u1 as i64)
                        .mul(&EElem::uniformizer_pow(params, shift))
                        .map_err(GroupError::Field)?;
                    let a = EElem::one(params).add(&tail).map_err(GroupError::Field)?;
                    if a.val() != Val::Finite(0) {
                        continue;
                    }
                    if !mu.mu1.evaluate(&a)?.is_one() {
                        return Ok(false);
                    }
                }
            }
            // Cayley sweep: a_F over pi^{2i-n} * residues.
            let k = 2 * i as i64 - n as i64;
            for r in 0..m {
                let a = FElem::from_integer(params, r as i64)
                    .mul(&FElem::uniformizer_pow(params, k))
                    .map_err(GroupError::Field)?;
                let lam = cayley(&a)?;
                if !mu.mu2.evaluate(&lam)?.is_one() {
                    return Ok(false);
                }
            }
            // Random words in proven members.
            for _ in 0..samples {
                let b = GMat::sample(params, SubgroupSpec::BCapConj { i, n }, rng);
                let val = mu.evaluate_diag(b.entry(0, 0), b.entry(1, 1))?;
                if !val.is_one() {
                    return Ok(false);
                }
            }
            Ok(true)
        }
    }
}
