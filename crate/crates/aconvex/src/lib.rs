//! Transfer-operator numerics for piecewise monotone interval maps.
//!
//! The crate models orientation-preserving piecewise monotone maps of the
//! unit interval, extends their inverse branches to all of `[0, 1]`, and
//! discretizes the weighted transfer operator to estimate conformal measures,
//! invariant densities, pressure, and related dynamical quantities.

pub mod builtins;
pub mod cylinders;
pub mod expr;
pub mod grid;
pub mod hypotheses;
pub mod map_model;
pub mod thermo;
pub mod transfer;

mod numeric;
mod quad;

pub use numeric::Side;
