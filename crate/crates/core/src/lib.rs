#![allow(clippy::neg_cmp_op_on_partial_ord, clippy::needless_range_loop, clippy::too_many_arguments)]

pub mod coupling;
pub mod damcmc;
pub mod diagnostics;
pub mod error;
pub mod math;
pub mod rng;
pub mod samplers;
pub mod state;
pub mod targets;

pub use error::{Result, SomaError};
pub use state::{ComponentSpace, State};

#[cfg(doctest)]
mod book {
    #[doc = include_str!("../../../book/src/intro.md")]
    mod intro {}
    #[doc = include_str!("../../../book/src/targets.md")]
    mod targets {}
    #[doc = include_str!("../../../book/src/samplers.md")]
    mod samplers {}
    #[doc = include_str!("../../../book/src/coupling.md")]
    mod coupling {}
    #[doc = include_str!("../../../book/src/diagnostics.md")]
    mod diagnostics {}
    #[doc = include_str!("../../../book/src/damcmc.md")]
    mod damcmc {}
    #[doc = include_str!("../../../book/src/cli.md")]
    mod cli {}
}
