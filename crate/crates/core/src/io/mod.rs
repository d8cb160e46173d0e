//! File formats and the run driver.

mod config;
mod lsf;
mod pgm;
mod svg;
mod tables;

pub use config::{run_segment, Backend, Input, RunConfig, SegmentOutcome};
pub use lsf::{decode_lsf, encode_lsf, lsf_preview, read_lsf, write_lsf, write_lsf_preview, LSF_MAGIC};
pub use pgm::{decode_pgm, encode_pgm, encode_pgm_ascii, read_pgm, to_u8, write_pgm, PGM_MAX};
pub use svg::{contour_svg, encode_png, export_contour_svg};
pub use tables::{
    curve_csv, parse_curve_csv, parse_run_log, read_curve_csv, read_run_log, run_log_csv, write_curve_csv,
    write_run_log, RUN_LOG_HEADER,
};
