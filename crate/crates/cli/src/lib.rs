pub mod config;
pub mod prep;
pub mod run;
