//! File formats: edge lists, TU-style datasets, checkpoints and JSON
//! reports.

mod checkpoint;
mod edgelist;
mod report;
mod tu;

pub use checkpoint::{load_checkpoint, save_checkpoint, Checkpoint, Tensor};
pub use edgelist::{format_edge_list, load_edge_list, parse_edge_list, save_edge_list};
pub use report::{to_json_string, Report};
pub use tu::{load_tu_dataset, TuDataset, TuSummary};
