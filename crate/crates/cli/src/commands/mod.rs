pub mod align;
pub mod continuity;
pub mod map;
pub mod report;
pub mod selftest;
