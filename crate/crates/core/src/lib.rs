//! Fourier-domain acceleration search: template convolution, plane
//! preparation, harmonic summing and a pipeline latency model.

pub mod conv;
pub mod dft;
pub mod error;
pub mod harmonic;
pub mod io;
pub mod model;
pub mod pipeline;
pub mod prep;
pub mod signal;
pub mod verify;

pub use conv::{convolve_bank, BankOptions, ConvOutput, ConvStrategy, FtTiming};
pub use dft::{DftPlan, Direction};
pub use error::{FdasError, Result};
pub use harmonic::{harmonic_sum, Candidate, CandidateList, HarmonicStrategy, HmStats, ThresholdTable};
pub use model::{Buffering, DeviceModel, PipelinePlan, Scheme, StageTiming};
pub use pipeline::{run, RunOptions, RunOutput};
pub use prep::{prepare, PrepPath, PrepSteps, PrepTiming, PreparedPlane, RFop};
pub use signal::{ComplexSeries, Complex32, FdasConfig, FilterBank, Fop, Injection, Layout};
