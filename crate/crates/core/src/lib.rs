//! Core library for signed XML e-documents.
//!
//! * [`xml`] parses the strict XML subset, produces canonical bytes and
//!   validates documents against closed type definitions.
//! * [`sig`] holds keys, purpose-separated certificates, signature
//!   envelopes, chain verification and the key store file format.
//! * [`edoc`] assembles documents from definitions, applies processing
//!   rules, drives the status lifecycle and computes validity reports.
//! * [`wysiwys`] renders a complete, deterministic display form of a
//!   document, or refuses to.

pub mod bundle;
pub mod digest;
pub mod edoc;
pub mod sig;
pub mod time;
pub mod wysiwys;
pub mod xml;
