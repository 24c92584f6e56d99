//! Serialization boundary: images, manifests, CSV tables, and SVG plots.
//!
//! Everything that crosses the filesystem goes through this module, and
//! every parser in it is a pure function over bytes or a reader so it can
//! be driven from tests and fuzz targets without touching disk. The
//! path-taking wrappers only add I/O and error context.

mod csv;
mod manifest;
mod png;
mod svg;

pub use csv::{
    load_csv, read_csv, read_metrics_csv, roc_rows, save_csv, save_feature_csv, write_csv,
    CurveRow, MetricsRow, RocRow, TsneRow,
};
pub use manifest::{load_dataset, load_manifest, save_manifest, Manifest, ManifestEntry};
pub use png::{load_png, save_png};
pub use svg::{roc_svg, scatter_svg, xml_escape, RocCurve, ScatterSeries, PALETTE};
