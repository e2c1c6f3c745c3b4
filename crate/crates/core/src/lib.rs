//! Symmetric periodic orbits of the planar circular restricted three-body
//! problem: regularization, shooting, index computations and Floer-type ranks.

pub mod cover;
pub mod dynamics;
pub mod ellipsoid;
pub mod error;
pub mod flow;
pub mod homology;
pub mod index;
pub mod io;
pub mod moser;
pub mod ode;
pub mod orbit_index;
pub mod orbits;
pub mod roots;
pub mod verify;

pub use error::{Error, Primary, Result};
