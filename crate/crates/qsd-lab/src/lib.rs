//! Conditioned evolutions of absorbed Markov chains.
//!
//! A chain on `{1, 2, ...}` absorbed at 0 is studied through the lens of its
//! nonabsorbed trajectories: the conditioned semigroup, its fixed points
//! (quasi-stationary distributions), long-time conditional limits, and the
//! stochastic-order structure that makes those limits exist. The crate
//! provides:
//!
//! - state spaces, absorbed kernels, and the conditioned semigroup
//!   ([`space`], [`kernel`], [`dist`], [`semigroup`]);
//! - stochastic dominance and monotone couplings ([`order`]);
//! - the conditioned law on trajectory windows, pairwise conditional
//!   domination checks, and a coupled single-site sampler exhibiting
//!   trajectory-level ordering ([`trajectory`], [`holley`], [`gibbs`]);
//! - birth-and-death chains with the closed-form family of
//!   quasi-stationary distributions of the constant-rate walk
//!   ([`birth_death`]);
//! - periodic chains, per-residue limits, and their reassembly
//!   ([`periodic`]);
//! - the continuous-time walk as a limit of delayed discrete walks
//!   ([`ctrw`]);
//! - JSON interchange used by the command-line tool ([`io`]).
//!
//! ```
//! use qsd_lab::birth_death::BirthDeathSpec;
//! use qsd_lab::dist::Distribution;
//! use qsd_lab::kernel::TruncationMode;
//! use qsd_lab::semigroup::{yaglom_iterate, YaglomOptions};
//!
//! let kernel = BirthDeathSpec::constant(0.15, 0.55, 0.30, 50)?
//!     .build_kernel(TruncationMode::OverflowToAbsorption);
//! let report = yaglom_iterate(
//!     &Distribution::delta(1),
//!     &kernel,
//!     &YaglomOptions::default(),
//! )?;
//! assert!(report.converged);
//! # Ok::<(), qsd_lab::error::QsdError>(())
//! ```

pub mod birth_death;
pub mod ctrw;
pub mod dist;
pub mod error;
pub mod gibbs;
pub mod holley;
pub mod io;
pub mod kernel;
pub mod order;
pub mod periodic;
pub mod semigroup;
pub mod space;
pub mod trajectory;

pub use dist::Distribution;
pub use error::{QsdError, Result};
pub use kernel::{AbsorbedKernel, TruncationMode};
pub use semigroup::{evolve_conditioned, survival_mass, yaglom_iterate};
pub use space::StateSpace;

/// Keeps the guide's code samples compiling; each struct's doc text is a
/// book chapter whose fenced Rust blocks run as doc-tests.
#[cfg(doctest)]
mod book {
    macro_rules! chapter {
        ($name:ident, $path:literal) => {
            #[doc = include_str!($path)]
            #[allow(dead_code)]
            struct $name;
        };
    }

    chapter!(Introduction, "../../../book/src/introduction.md");
    chapter!(ConditionedEvolution, "../../../book/src/conditioned-evolution.md");
    chapter!(StochasticOrder, "../../../book/src/stochastic-order.md");
    chapter!(HolleyCoupling, "../../../book/src/holley-coupling.md");
    chapter!(BirthDeath, "../../../book/src/birth-death.md");
    chapter!(Periodic, "../../../book/src/periodic.md");
    chapter!(ContinuousTime, "../../../book/src/continuous-time.md");
    chapter!(Cli, "../../../book/src/cli.md");
}
