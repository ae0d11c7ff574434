//! Answer questions about tables.
//!
//! A table is turned into a [`graph::KnowledgeGraph`], a question is parsed
//! into candidate lambda DCS [`dcs::LogicalForm`]s by the floating
//! [`parser`], candidates are ranked by a log-linear model over sparse
//! [`feat`]ures, and the best one is [`exec`]uted to produce the answer.
//! The model is trained from question–answer pairs alone ([`learn`]).
//!
//! ```
//! use tablequery::{dcs, exec, fixture};
//!
//! let w = fixture::olympics_graph();
//! let z = dcs::parse("count(City.Athens)").unwrap();
//! assert_eq!(exec::execute(&z, &w).unwrap().render(), "2");
//! ```

pub mod cli;
pub mod dataset;
pub mod dcs;
pub mod exec;
pub mod feat;
pub mod fixture;
pub mod graph;
pub mod learn;
pub mod parser;
pub mod text;
pub mod value;

#[cfg(doctest)]
mod guide;

pub use dcs::LogicalForm;
pub use graph::{build_graph, KnowledgeGraph, Table};
pub use value::Value;
