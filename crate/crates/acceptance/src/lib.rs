//! Holds the `acceptance` test target, which checks every acceptance
//! criterion of the engine and prints one pass/fail line per criterion.
//!
//! Run it with `cargo test --release -p auditmatch-acceptance --test acceptance`.
//! The synthetic end-to-end criterion trains nine pipelines and takes
//! several minutes on one core.
