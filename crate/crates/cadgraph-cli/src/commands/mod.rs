pub mod assembly;
pub mod convert;
pub mod embed;
pub mod eval;
pub mod generate;
pub mod query;
pub mod train;
