//! Holds the `acceptance` test target. It is a separate package so that
//! `cargo test --workspace` runs every solver test before the acceptance
//! report, whose exit status reflects the criteria that do not hold.
