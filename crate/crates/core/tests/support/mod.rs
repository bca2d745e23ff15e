#![allow(dead_code)]

pub mod datagen_fixtures;
pub mod metric_oracle;
pub mod parser_corpus;
pub mod parser_fuzz;
pub mod sim_fixtures;
pub mod tick_oracle;
