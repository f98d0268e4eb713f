//! Debate-driven event extraction.
//!
//! The engine runs a round-based debate between LLM agents (debaters, a
//! critic, a judge and a summarizer) over one sentence at a time. Each round
//! retrieves reference examples with a shrinking diversity radius ([`drag`])
//! and rejects debater answers whose risk exceeds a geometrically tightening
//! conformal threshold ([`adacp`]). Event detection runs first; argument
//! extraction is debated only for the event types the judge agreed on.
//!
//! All model access goes through the traits in [`backends`], so every part of
//! the pipeline can be exercised offline with scripted agents, a hashing
//! embedder and a keyed scorer.

pub mod adacp;
pub mod backends;
pub mod corpus;
pub mod debate;
pub mod drag;
pub mod evalkit;
pub mod ontology;
pub mod synthetic;

mod digest;

pub use digest::text_digest;
