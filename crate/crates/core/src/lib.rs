//! Checking of mathematical proofs written in controlled English.

pub mod clausify;
pub mod fol;
pub mod lexer;
pub mod parser;
pub mod notation;
pub mod desugar;
pub mod sequence;
pub mod obligation;
pub mod sat;
pub mod model;
pub mod resolution;
pub mod library;
pub mod pipeline;
pub mod tptp;
pub mod backend;
pub mod report;
pub mod verify;
pub mod corpus;
