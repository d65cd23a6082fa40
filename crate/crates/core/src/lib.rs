//! Modeling, execution and analysis of security ceremonies: protocols whose
//! participants include humans as well as technical systems.

pub mod corpus;
pub mod dsl;
pub mod engine;
pub mod explorer;
pub mod features;
pub mod model;
pub mod scenario;
pub mod term;

pub use model::{Ceremony, Element, Role, RoleKind};
pub use term::{RoleId, Term};
