//! File formats.

mod binary;
mod export;

pub use binary::{
    decode_matrix, encode_matrix, read_image, read_matrix, read_sinogram, write_image, write_matrix, write_sinogram,
    DTYPE_F64, MAGIC,
};
pub use export::{mean_rows, write_jsonl, write_metrics_csv, write_png, write_trace_csv, MetricRow};
