//! Holds the `acceptance` test target. Run it with `cargo test -p adrf-validation --test acceptance`.
