//! File formats: WAFT tensors, binary PGM, score and ROC CSV, JSON reports
//! and configs, model bundles.

mod bundle;
mod config;
mod curves;
mod files;
mod pgm;
mod scores;
mod waft;

pub use bundle::{load_bundle, save_bundle, SavedBundle, BUNDLE_VERSION};
pub use config::{
    load_config, parse_config, write_run_log, EncoderKind, FormatVersions, RunConfig, RunLog,
    TrainSection,
};
pub use curves::{emit_curves, parse_roc_csv, roc_csv, roc_svg, ROC_HEADER};
pub use files::{
    parse_manifest, read_dataset, read_latents, read_manifest, write_dataset, write_latents,
    LatentMeta, ManifestEntry, LABELS_FILE,
};
pub use pgm::{decode_pgm, encode_pgm, read_pgm, write_pgm, DEFAULT_MAXVAL};
pub use scores::{
    format_scores, parse_scores, read_report, read_scores, write_json, write_report, write_scores,
    SCORES_HEADER,
};
pub use waft::{
    decode_tensor, decode_tensor_list, encode_tensor, encode_tensor_list, read_subbands,
    read_tensor, read_tensor_list, write_subbands, write_tensor, write_tensor_list, WAFT_MAGIC,
    WAFT_VERSION,
};
