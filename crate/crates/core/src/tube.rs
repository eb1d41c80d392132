//! Tube operator (in progress).
