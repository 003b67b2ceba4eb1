pub mod double_well;
pub mod ensembles;
pub mod error;
pub mod maps;
pub mod open_rotor;
pub mod qbaker;
pub mod quantum;
pub mod rotor;
pub mod runner;
pub mod seeding;
pub mod spin_boson;
pub mod symbolic;

pub use error::{Error, Result};
