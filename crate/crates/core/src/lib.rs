pub mod bnb;
pub mod config;
pub mod diving;
pub mod eval;
pub mod gcnn;
pub mod graph;
pub mod instance;
pub mod lp;
pub mod matrix;
pub mod pipeline;
