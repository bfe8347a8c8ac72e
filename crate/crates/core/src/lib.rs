//! Ingests IFC building models into a relational store and a topology graph.

pub mod agent;
pub mod app;
pub mod geometry;
pub mod graph;
pub mod semantics;
pub mod step;
pub mod store;
