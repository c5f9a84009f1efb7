//! Empty on purpose: this crate exists to host the criterion benches.
