//! Empty on purpose; the checks live in `tests/acceptance.rs`.
