pub mod commands;
pub mod config;
pub mod examples;
pub mod ext_f64;
pub mod output;
pub mod tables;
