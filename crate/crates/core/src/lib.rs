//! Waiting time of a single server attending two service points.
//!
//! Customers at each point go through a preparation phase `B` (a mixture
//! of Erlangs with a common rate) before the server can give them a
//! service of length `A`. Two policies are analysed:
//!
//! * [`alternating`]: the server strictly alternates between the points,
//!   so its waits obey `W_{n+1} = max{0, B_{n+1} - A_n - W_n}`;
//! * [`repair`]: the server takes whichever point is ready first, the
//!   classical two-machine repair model seen from the repairman.
//!
//! [`simulator`] provides an independent Monte-Carlo check of both.

pub mod alternating;
pub mod distributions;
pub mod erlang;
pub mod error;
pub mod linalg;
pub mod repair;
pub mod simulator;

pub use distributions::{Law, Moments, PrepLaw, ServiceLaw};
pub use error::{Error, Result};
