//! Power-supply ripple attacks on continuous-variable QRNGs: analog source
//! simulation, digitisation, Toeplitz extraction, and the SP 800-22 battery.

pub mod bits;
pub mod extractor;
pub mod pipeline;
pub mod seeds;
pub mod signal;
pub mod source;
pub mod sts;

pub use bits::{BitFormat, BitStream, BitsError};
pub use extractor::{build_toeplitz, extract_stream, ToeplitzSpec};
pub use signal::{binarize, pearson, remove_dc, sweep_correlation};
pub use source::{generate_ase_trace, generate_phase_trace, AnalogTrace, AttackProfile};
pub use sts::{run_full_suite, SuiteReport, TestId, TestParams, TestResult};
