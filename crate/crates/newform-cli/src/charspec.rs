//! Parsing of character specifications from the command line.
//!
//! `mu1` accepts symbolic names and the explicit form:
//!
//! - `triv`
//! - `|.|_E`, `|.|_E^-1`
//! - `omega`, `omega*|.|^1`, `omega*|.|^-1`
//! - `c1=<int>,idx=<int>,pi=<rational>` with an optional root-of-unity
//!   factor `*z^<k>` (z of the session order) or `*z^<k>/<m>` (z of order
//!   `m`).
//!
//! `mu2` accepts `triv` or `c2=<int>,idx=<int>`.

use anyhow::{anyhow, bail, Result};
use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{One, Signed, Zero};

use newform_core::characters::{CharE1, QuasiCharE, Session};

/// Parsed but not yet session-resolved `mu1`.
#[derive(Debug, Clone, PartialEq)]
pub enum Mu1Spec {
    Symbolic(SymbolicMu1),
    Explicit {
        c1: u32,
        idx: usize,
        pi_abs: BigRational,
        negate: bool,
        /// Root-of-unity factor `z^k` of order `m` (session order if None).
        root: Option<(i64, Option<u32>)>,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SymbolicMu1 {
    Trivial,
    AbsE { sign: i8 },
    OmegaAbs { sign: i8 },
    Omega,
}

#[derive(Debug, Clone, PartialEq)]
pub enum Mu2Spec {
    Trivial,
    Explicit { c2: u32, idx: usize },
}

pub fn parse_mu1(s: &str) -> Result<Mu1Spec> {
    let s = s.trim();
    match s {
        "triv" | "1" => return Ok(Mu1Spec::Symbolic(SymbolicMu1::Trivial)),
        "|.|_E" | "|.|_E^1" => return Ok(Mu1Spec::Symbolic(SymbolicMu1::AbsE { sign: 1 })),
        "|.|_E^-1" => return Ok(Mu1Spec::Symbolic(SymbolicMu1::AbsE { sign: -1 })),
        "omega" => return Ok(Mu1Spec::Symbolic(SymbolicMu1::Omega)),
        "omega*|.|^1" | "omega*|.|" => {
            return Ok(Mu1Spec::Symbolic(SymbolicMu1::OmegaAbs { sign: 1 }))
        }
        "omega*|.|^-1" => return Ok(Mu1Spec::Symbolic(SymbolicMu1::OmegaAbs { sign: -1 })),
        _ => {}
    }
    // Explicit form: c1=..,idx=..,pi=..
    let mut c1 = None;
    let mut idx = None;
    let mut pi = None;
    for part in s.split(',') {
        let (key, value) = part
            .split_once('=')
            .ok_or_else(|| anyhow!("bad mu1 component {:?}", part))?;
        match key.trim() {
            "c1" => c1 = Some(value.trim().parse::<u32>()?),
            "idx" => idx = Some(value.trim().parse::<usize>()?),
            "pi" => pi = Some(value.trim().to_string()),
            other => bail!("unknown mu1 key {:?}", other),
        }
    }
    let (c1, idx, pi) = match (c1, idx, pi) {
        (Some(a), Some(b), Some(c)) => (a, b, c),
        _ => bail!("mu1 needs c1=, idx= and pi="),
    };
    let (pi_abs, negate, root) = parse_pi(&pi)?;
    Ok(Mu1Spec::Explicit { c1, idx, pi_abs, negate, root })
}

fn parse_pi(s: &str) -> Result<(BigRational, bool, Option<(i64, Option<u32>)>)> {
    let (rat_str, root) = match s.split_once('*') {
        None => (s, None),
        Some((r, z)) => {
            let z = z.trim();
            let body = z
                .strip_prefix("z^")
                .ok_or_else(|| anyhow!("bad root factor {:?}", z))?;
            let (k, m) = match body.split_once('/') {
                None => (body.parse::<i64>()?, None),
                Some((k, m)) => (k.parse::<i64>()?, Some(m.parse::<u32>()?)),
            };
            (r, Some((k, m)))
        }
    };
    let rat = parse_rational(rat_str)?;
    if rat.is_zero() {
        bail!("pi-value must be nonzero");
    }
    Ok((rat.abs(), rat.is_negative(), root))
}

pub fn parse_rational(s: &str) -> Result<BigRational> {
    let s = s.trim();
    let (num, den) = match s.split_once('/') {
        None => (s.parse::<i64>()?, 1),
        Some((n, d)) => (n.parse::<i64>()?, d.parse::<i64>()?),
    };
    if den == 0 {
        bail!("zero denominator");
    }
    Ok(BigRational::new(BigInt::from(num), BigInt::from(den)))
}

pub fn parse_mu2(s: &str) -> Result<Mu2Spec> {
    let s = s.trim();
    if s == "triv" || s == "1" {
        return Ok(Mu2Spec::Trivial);
    }
    let mut c2 = None;
    let mut idx = None;
    for part in s.split(',') {
        let (key, value) = part
            .split_once('=')
            .ok_or_else(|| anyhow!("bad mu2 component {:?}", part))?;
        match key.trim() {
            "c2" => c2 = Some(value.trim().parse::<u32>()?),
            "idx" => idx = Some(value.trim().parse::<usize>()?),
            other => bail!("unknown mu2 key {:?}", other),
        }
    }
    match (c2, idx) {
        (Some(c2), Some(idx)) => Ok(Mu2Spec::Explicit { c2, idx }),
        _ => bail!("mu2 needs c2= and idx="),
    }
}

impl Mu1Spec {
    pub fn conductor(&self) -> u32 {
        match self {
            Mu1Spec::Symbolic(_) => 0,
            Mu1Spec::Explicit { c1, .. } => *c1,
        }
    }

    /// Extra root order the session must contain.
    pub fn root_order(&self) -> u32 {
        match self {
            Mu1Spec::Explicit { root: Some((_, Some(m))), .. } => *m,
            _ => 1,
        }
    }

    pub fn resolve(&self, session: &Session) -> Result<QuasiCharE> {
        let n = session.cyc_field().order() as u64;
        let half = n / 2;
        Ok(match self {
            Mu1Spec::Symbolic(SymbolicMu1::Trivial) => session.mu1_trivial()?,
            Mu1Spec::Symbolic(SymbolicMu1::AbsE { sign }) => session.mu1_abs_e(*sign)?,
            Mu1Spec::Symbolic(SymbolicMu1::OmegaAbs { sign }) => session.mu1_omega_abs(*sign)?,
            Mu1Spec::Symbolic(SymbolicMu1::Omega) => {
                session.mu1_unramified(BigRational::one(), half)?
            }
            Mu1Spec::Explicit { c1, idx, pi_abs, negate, root } => {
                let mut exp: i64 = if *negate { half as i64 } else { 0 };
                if let Some((k, m)) = root {
                    let order = m.unwrap_or(session.cyc_field().order()) as i64;
                    if n as i64 % order != 0 {
                        bail!("root order {} does not divide session order {}", order, n);
                    }
                    exp += k * (n as i64 / order);
                }
                session.mu1(*c1, *idx, pi_abs.clone(), exp.rem_euclid(n as i64) as u64)?
            }
        })
    }
}

impl Mu2Spec {
    pub fn conductor(&self) -> u32 {
        match self {
            Mu2Spec::Trivial => 0,
            Mu2Spec::Explicit { c2, .. } => *c2,
        }
    }

    pub fn resolve(&self, session: &Session) -> Result<CharE1> {
        Ok(match self {
            Mu2Spec::Trivial => session.mu2_trivial(),
            Mu2Spec::Explicit { c2, idx } => session.mu2(*c2, *idx)?,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn symbolic_names() {
        assert_eq!(
            parse_mu1("|.|_E").unwrap(),
            Mu1Spec::Symbolic(SymbolicMu1::AbsE { sign: 1 })
        );
        assert_eq!(
            parse_mu1("omega*|.|^-1").unwrap(),
            Mu1Spec::Symbolic(SymbolicMu1::OmegaAbs { sign: -1 })
        );
        assert_eq!(parse_mu1("triv").unwrap(), Mu1Spec::Symbolic(SymbolicMu1::Trivial));
        assert_eq!(parse_mu2("triv").unwrap(), Mu2Spec::Trivial);
    }

    #[test]
    fn explicit_forms() {
        let m = parse_mu1("c1=1,idx=2,pi=-3").unwrap();
        match m {
            Mu1Spec::Explicit { c1, idx, pi_abs, negate, root } => {
                assert_eq!((c1, idx, negate, root), (1, 2, true, None));
                assert_eq!(pi_abs, BigRational::from_integer(BigInt::from(3)));
            }
            _ => panic!("expected explicit"),
        }
        let m = parse_mu1("c1=0,idx=0,pi=1/9*z^3/8").unwrap();
        match m {
            Mu1Spec::Explicit { pi_abs, negate, root, .. } => {
                assert_eq!(pi_abs, BigRational::new(BigInt::from(1), BigInt::from(9)));
                assert!(!negate);
                assert_eq!(root, Some((3, Some(8))));
            }
            _ => panic!("expected explicit"),
        }
        assert!(parse_mu1("c1=1,idx=0").is_err());
        assert!(parse_mu1("pi=0,c1=0,idx=0").is_err());
        assert_eq!(
            parse_mu2("c2=2,idx=5").unwrap(),
            Mu2Spec::Explicit { c2: 2, idx: 5 }
        );
        assert!(parse_mu2("c2=2").is_err());
    }
}
