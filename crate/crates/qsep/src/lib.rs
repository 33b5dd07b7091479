//! Analysis toolkit for a linear lambda calculus with quantum primitives.
//!
//! The crate provides, in dependency order:
//!
//! - [`syntax`]: types and terms, printing, substitution, alpha-equivalence;
//! - [`parser`]: concrete syntax for terms, types, programs, and assertions;
//! - [`typecheck`]: the linear type system;
//! - [`qstate`]: dense state-vector simulation plus separability and
//!   entanglement-partition oracles;
//! - [`concrete`]: the exhaustive (and sampling) probabilistic operational
//!   semantics over simulated quantum states;
//! - [`abstract_sem`]: abstract quantum states that track entanglement
//!   classes and definitely-base qubits, with the matching abstract
//!   operational semantics and an adequacy check against concrete states;
//! - [`logic`]: an assertion language over abstract states (entanglement,
//!   purity, equality, quantifiers, and function-evaluation formulas) with a
//!   satisfaction relation;
//! - [`proof`]: a checker for Hoare-style proof scripts about programs, with
//!   a bounded entailment decision procedure used for consequence steps;
//! - [`generator`]: seeded random generation of well-typed programs, used by
//!   the test suite to exercise the semantics.

pub mod abstract_sem;
pub mod concrete;
pub mod generator;
pub mod logic;
pub mod parser;
pub mod proof;
pub mod qstate;
pub mod syntax;
pub mod typecheck;
