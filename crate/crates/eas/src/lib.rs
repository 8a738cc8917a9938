//! Exam admission service on the e-doc platform.
//!
//! The student office issues admission cards (e-EAC) after checking a stub
//! registry; the professor turns each pending card into an evaluation
//! ticket (e-EET) and the card moves to `processed` in the same store.

pub mod defs;
pub mod demo;
pub mod fixtures;
pub mod identities;
pub mod registry;
pub mod scenario;

pub use demo::{run_demo, DemoReport};
pub use identities::FixturePki;
pub use registry::{Refusal, RegistryStub};
pub use scenario::{login, AdmissionCheck, AdmissionQuery, Desk, Eas, EasError, ProcessReport};
