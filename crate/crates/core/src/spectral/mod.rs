//! Three independent approximations of the spectrum: Floquet bands of
//! periodic approximants, the zero set of the Lyapunov exponent, and the
//! boundary behavior of the Weyl m-functions.

mod ac;
mod bands;
mod cascade;
mod floquet;
mod gamma;
mod mfunction;
mod trace_map;

pub use ac::{ac_diagnostic, default_tolerances, AcReport, AcVerdict};
pub use bands::{BandSet, Provenance};
pub use cascade::{approximant_cascade, Cascade, CascadeLevel};
pub use floquet::{discriminant, floquet_bands, floquet_bands_with, period_path, FloquetOptions};
pub use gamma::{gamma_zero_scan, uniform_grid, GammaPoint, GammaScan, GammaScanOptions, PointLabel};
pub use mfunction::{m_function, weyl_disk, MFunctionValue, WeylDisk};
pub use trace_map::{trace_map_fibonacci, TraceLevel, TraceMap};
