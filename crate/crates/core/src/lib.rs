//! Shared numerical building blocks: probability laws, empirical samples,
//! truncated power series, tail fits, quadrature and seeded random streams.

// Range checks are written `!(x > 0.0)` so that NaN fails them too.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod dist;
pub mod empirical;
pub mod quad;
pub mod rng;
pub mod series;
pub mod tail;

pub use dist::{DistError, Distribution, Support};
pub use empirical::{EmpiricalDistribution, EmpiricalError};
pub use rng::{Stream, StreamRng};
pub use series::{ExactSeries, PowerSeries, SeriesError};
pub use tail::{TailError, TailFit, TailMethod};
