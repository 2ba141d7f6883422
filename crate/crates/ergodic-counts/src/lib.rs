// Domain guards use negated comparisons (`!(v > 0.0)`) on purpose: they
// reject NaN, which the suggested `v <= 0.0` silently accepts.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

//! Simulation and verification toolkit for quantum counting processes.
//!
//! An open quantum system watched by photodetectors produces a random record
//! of click times. This crate builds the whole pipeline around that object:
//!
//! - [`lindblad`] — generators in Lindblad form, their semigroups, stationary
//!   states, and Cesàro (time-mean) convergence;
//! - [`unraveling`] — the splitting of a generator into no-click evolution
//!   and jump channels, exclusive click densities, and the operation-valued
//!   measure over cylinder events, with a Markov-property checker;
//! - [`trajectory`] — jump Monte Carlo sampling of detection records, with
//!   deterministic per-stream seeding;
//! - [`observables`] — detection currents, multi-time coincidence counts,
//!   non-exclusive densities `g_n`, and the time-average vs ensemble-average
//!   comparisons that make ergodicity checkable;
//! - [`kraus`] — the discrete-time analogue: repeated Kraus measurements and
//!   their long-run outcome statistics.
//!
//! The guide in `book/` walks through the concepts chapter by chapter; its
//! code listings are compiled and run as doctests from this crate.

pub mod error;
pub mod kraus;
pub mod linalg;
pub mod lindblad;
pub mod model_io;
pub mod observables;
pub mod stats;
pub mod trajectory;
pub mod unraveling;

pub mod quad;
pub use error::{Error, Result};

// The guide's code listings run as doctests so the book cannot drift from
// the library.
#[cfg(doctest)]
mod book {
    macro_rules! chapter {
        ($name:ident, $path:literal) => {
            #[doc = include_str!($path)]
            #[allow(dead_code)]
            pub struct $name;
        };
    }

    chapter!(Introduction, "../../../book/src/introduction.md");
    chapter!(Generators, "../../../book/src/generators.md");
    chapter!(Unravelings, "../../../book/src/unravelings.md");
    chapter!(Records, "../../../book/src/records.md");
    chapter!(Currents, "../../../book/src/currents.md");
    chapter!(DiscreteTime, "../../../book/src/discrete-time.md");
}
