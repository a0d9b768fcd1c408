//! Acceptance checks for gridshare. Everything lives in `tests/acceptance.rs`;
//! run it with `cargo test -p gridshare-validation --test acceptance`.
