//! Entropy-based diversity measures for datasets of georeferenced tiles.
//!
//! All measures are Shannon entropies of discrete distributions:
//!
//! * continent: distribution of samples over groups,
//! * biome / landcover: distribution of total footprint area over map classes,
//! * sample-level biome / landcover: mean over tiles of each tile's own
//!   area-distribution entropy,
//! * spectral: per band, the entropy of a K-bin histogram of pixel values,
//!   averaged over bands for a tile and over tiles for a dataset.
//!
//! Sums of entropy terms and dataset means use compensated summation and are
//! reduced in input order, so results do not depend on thread count.

mod entropy;
mod measures;
mod report;
mod spectral;

pub use entropy::{compensated_sum, shannon_entropy, Distribution, LogBase};
pub use measures::{
    class_area_diversity, continent_diversity, sample_class_diversity, ContinentDiversity, ContinentSource,
    SampleClassDiversity,
};
pub use report::{read_report, write_report_csv, write_report_json, DiversityReport, Measure};
pub use spectral::{
    bin_index, histogram, spectral_entropy_dataset, spectral_entropy_paths, spectral_entropy_sample,
    DatasetSpectral, HistogramSpec, RangeMode, SampleSpectral,
};
