pub mod bits;
pub mod centered;
pub mod exact;
pub mod explorer;
pub mod gamma;
pub mod knaster;
pub mod measure;
pub mod norm;
pub mod ordinal;
pub mod seq;
