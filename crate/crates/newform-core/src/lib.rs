//! Exact arithmetic for newforms on the unramified unitary group in three
//! variables over a p-adic field.
//!
//! The crate is organised around five layers:
//!
//! - [`localfield`]: capped-relative-precision arithmetic in `F = Q_p` (odd
//!   `p`) and in the unramified quadratic extension `E = F[sqrt(eps)]`.
//! - [`group`]: the unitary group `G` inside `GL_3(E)`, its named elements
//!   and subgroups, membership tests, Iwasawa decomposition and sampling.
//! - [`characters`]: finite abelian quotients of the unit groups of `E`,
//!   characters of prescribed conductor with values in an exact cyclotomic
//!   field, and the reducibility classification of induced characters.
//! - [`cosets`]: certified double-coset reduction `g = b * gamma_i * k` for
//!   `B\G/K_n`.
//! - [`indrep`]: the level-`n` model of the induced representation, the
//!   level raising/lowering operators and the conductor/dimension reports.
//!
//! The crate is `no_std` + `alloc`; IO, CLI and file formats live in the
//! companion crate `newform-cli`.

#![cfg_attr(not(test), no_std)]

extern crate alloc;

pub mod characters;
pub mod cosets;
pub mod cyclotomic;
pub mod group;
pub mod indrep;
pub mod localfield;

#[cfg(test)]
mod thread_safety {
    fn assert_send_sync<T: Send + Sync>() {}

    #[test]
    fn core_types_are_send_and_sync() {
        assert_send_sync::<crate::localfield::EElem>();
        assert_send_sync::<crate::group::GMat>();
        assert_send_sync::<crate::cyclotomic::CycScalar>();
        assert_send_sync::<crate::characters::Session>();
        assert_send_sync::<crate::characters::TorusChar>();
        assert_send_sync::<crate::cosets::ReductionCertificate>();
        assert_send_sync::<crate::indrep::InducedFn>();
    }
}
