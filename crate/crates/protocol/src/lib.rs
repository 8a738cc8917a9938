//! Wire protocol for the e-doc platform.
//!
//! Every command and response is an `AMessage`: a canonical XML envelope
//! signed by the sender. Commands are signed with a role certificate,
//! responses with the platform certificate. On TCP each message travels as
//! one frame: a 4-byte big-endian length followed by the canonical bytes.
//! Connections are lockstep: one response per command, in order.

pub mod catalog;
pub mod client;
pub mod commands;
pub mod frame;
pub mod gateway;
pub mod message;

pub use catalog::{codes, CommandName};
pub use client::{Client, ClientError, Endpoint};
pub use frame::{decode, encode, read_frame, write_frame, ProtocolError, MAX_FRAME};
pub use gateway::Gateway;
pub use message::{AMessage, Body, Command, Direction, MsgHeader, Response};
