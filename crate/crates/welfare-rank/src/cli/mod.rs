//! Configuration, command dispatch, and deterministic artifact output.
