//! Surface-reflectance spectral modeling in the 400-900 nm range.
//!
//! The crate ingests spectral-library measurements onto a common 1 nm
//! wavelength grid, fits principal-component models per surface class,
//! and reconstructs full spectra three ways:
//!
//! * from component weights obtained by projecting a complete spectrum,
//! * from reflectance at a handful of selected bands, via a
//!   rank-revealing least-squares solve of the component submatrix,
//! * from a fitted linear combination of four reference bands,
//!   predicting one band at a time.
//!
//! A leave-one-out validation harness scores all three modes with mean
//! relative/absolute errors and pooled squared correlation.
//!
//! Everything is deterministic: the linked BLAS is pinned to one thread,
//! holdout parallelism aggregates in sample order, and all text formats
//! round-trip bit-exactly.

pub mod error;
pub mod grid;
pub mod ingest;
pub mod linalg;
pub mod pca;
pub mod reconstruct;
pub mod spectrum;
pub mod validate;

pub use error::{Error, Result};
pub use grid::WavelengthGrid;
pub use ingest::{
    load_manifest, parse_dataset_csv, parse_two_column, parse_two_column_with, write_dataset_csv,
    DatasetManifest, ManifestEntry, WavelengthUnit,
};
pub use pca::{
    compute_covariance, compute_mean, contribution, eigendecompose, Centering, ContributionCurve,
    CovarianceMatrix, PcaModel,
};
pub use reconstruct::{
    apply_lincomb, fit_lincomb, project, reconstruct_from_bands, reconstruct_full,
    solve_weights_from_bands, BandSelection, BandSolution, LinCombModel, Weights,
};
pub use spectrum::{resample, smooth, SpectralDataset, Spectrum};
pub use validate::{
    loocv_bands, loocv_full, loocv_full_multi, loocv_lincomb, mean_relative_error, r_squared,
    ProtocolDescriptor, ReconProtocol, ReconstructionReport, RelativeError, SampleScore,
};
