//! Reporting (in progress).
