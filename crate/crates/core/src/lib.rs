//! Hilbert-Huang decomposition of motion-capture signals.
//!
//! [`signal_core`] holds univariate EMD and the Hilbert transform,
//! [`memd`] the multivariate and noise-assisted variants, [`mocap_io`] BVH
//! parsing and channel extraction, [`beat`] beat grids and segmentation,
//! [`analysis`] spectra and frequency statistics, and [`edit`] the IMF
//! algebra used to synthesize new clips. [`archive`] serializes
//! decompositions as JSON.

pub mod analysis;
pub mod archive;
pub mod beat;
pub mod edit;
pub mod memd;
pub mod mocap_io;
pub mod signal_core;
