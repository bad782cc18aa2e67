//! Operational shell around `teamalloc`: job documents, run lifecycle, live
//! negotiation sessions for human workers, the HTTP API and event-log replay.

pub mod document;
pub mod session;
pub mod manager;
pub mod replay;
pub mod api;
