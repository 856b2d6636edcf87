pub mod align;
pub mod continuity;
pub mod geodesy;
pub mod ingest;
pub mod perfmap;
pub mod stats;
pub mod synth;
