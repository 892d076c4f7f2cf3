//! Exact semantic loss for propositional constraints.
//!
//! The pipeline: parse or construct a propositional constraint
//! ([`logic`]), compile it into a reduced ordered BDD and expand that into
//! a deterministic, decomposable arithmetic circuit ([`bdd`], [`circuit`],
//! [`encoders`]), then evaluate the weighted model count, the loss
//! `-log wmc`, and its exact gradient in time linear in circuit size
//! ([`engine`]). A small feedforward trainer ([`learn`]) plugs the loss
//! into supervised, semi-supervised, and structured prediction tasks over
//! generated datasets ([`data`]), and [`fuzzy`] evaluates the soft-logic
//! relaxation used as the syntax-sensitivity comparison.

pub mod bdd;
pub mod circuit;
pub mod data;
pub mod encoders;
pub mod engine;
pub mod fuzzy;
pub mod learn;
pub mod logic;
pub mod tasks;

pub use circuit::{Circuit, CircuitNode, Evidence};
pub use logic::{Formula, Literal, ProbVector, State, VarId};
