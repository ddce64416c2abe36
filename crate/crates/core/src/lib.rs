// `!(x > 0.0)` guards deliberately reject NaN
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod certify;
pub mod cli;
pub mod constitutive;
pub mod error;
pub mod falsify;
pub mod linalg;
pub mod solver;

pub use constitutive::{ConstitutiveLaw, LawMetadata, PowerKind, PowerTerm, TrilinearForm};
pub use error::{Error, Result};
pub use linalg::{MatN, VecN};
