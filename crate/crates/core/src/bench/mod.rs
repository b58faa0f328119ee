//! Experiment plans, runs, and report tables.
