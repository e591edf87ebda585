//! Staircase curve construction (in progress).
