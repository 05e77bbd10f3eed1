//! Task-guidance dialogue engine that enriches recipe and DIY steps with
//! short, contextually matched curiosities.
//!
//! The crate is organised bottom-up:
//!
//! * [`store`] loads, validates and describes the curiosity dataset.
//! * [`task`] turns raw recipe / DIY articles into matchable content.
//! * [`text`] and [`semantic`] rank curiosities against a task.
//! * [`policy`] decides when an offer may be made.
//! * [`phrasing`] renders offers and curiosities.
//! * [`session`] is the dialogue state machine that ties the above together.
//! * [`lab`] assigns experiment arms, aggregates event logs and simulates users.
//!
//! Batch work (candidate scoring, index building, simulation) runs on rayon
//! when the `parallel` feature is enabled and falls back to plain iterators
//! otherwise. See [`par::ExecMode`].

pub mod config;
pub mod domain;
pub mod lab;
pub mod par;
pub mod phrasing;
pub mod policy;
pub mod semantic;
pub mod session;
pub mod store;
pub mod task;
pub mod text;

pub use domain::{word_count, Domain};
pub use par::ExecMode;
