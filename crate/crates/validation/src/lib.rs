//! Holds the end-to-end acceptance suite in `tests/acceptance.rs`.
//!
//! The suite lives in its own package so that a workspace test run executes
//! every unit and integration test before the long reference simulations.
