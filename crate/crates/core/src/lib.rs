//! Genetic improvement over compiler optimization pass sequences.
//!
//! A candidate is an [`Individual`]: an ordered list of [`Patch`]es
//! (insert, delete, replace at a relative position) that is applied to a
//! baseline [`PassSequence`]. The [`evolution`] module searches the space of
//! such genomes with a generational GA, and [`stats`] summarizes repeated
//! trials with a one-sample t-test.
//!
//! This crate does no IO. Compiling and timing programs lives in the
//! `passgi` crate.

#![cfg_attr(not(feature = "std"), no_std)]

extern crate alloc;

pub mod catalog;
pub mod evolution;
pub mod fitness;
pub mod patch;
pub mod stats;

pub use catalog::{
    load_catalog, load_sequence, search_space_order, CatalogError, PassCatalog, PassName,
    PassSequence,
};
pub use evolution::{
    crossover, evolve, evolve_batched, init_population, mutate, random_patch, tournament_select,
    ConfigError, EvolutionHistory, EvolutionOutcome, GAConfig, GenerationRecord,
};
pub use fitness::{levenshtein, simulated_fitness, FitnessValue, SimModel};
pub use patch::{
    apply_individual, apply_patch, parse_individual, resolve_index, serialize_individual,
    Individual, Patch, PatchError, PatchType, SlotMode,
};
pub use stats::{percent_improvement, summarize, StatsError, SummaryStats};

/// Seeded generator used for every stochastic decision in the search.
pub type SearchRng = rand_chacha::ChaCha8Rng;
