//! Ground-truth scenes, the half-plane damage study and synthetic tables.

mod appendix;
mod dataset;
mod points;
mod scene;

use thiserror::Error;

use crate::fiducial::FiducialError;
use crate::image::ImageError;
use crate::stats::StatsError;

pub use appendix::{
    appendix_study, appendix_study_with, StudyConfig, StudyReport, StudyRow, StudySummary, DEFAULT_LAMBDA,
    DEFAULT_REPLICATES, FIELD_SIDE, MIN_REPLICATES, STUDY_COLUMNS,
};
pub use dataset::{synth_dataset, DatasetSpec};
pub use points::{poisson_points, simulate_damage, simulate_damage_at, Rect, DAMAGE_CUT_X};
pub use scene::{
    blob_sigma_mm, camera_homography, exposure_model, render_scene, spaced_points, RenderedScene, SceneParams,
    SceneTruth, BLOB_PEAK, DISTANCE_RANGE, INK_LEVEL, ISO_LADDER, OPENING_LEVEL, PAPER_LEVEL, TILT_H_RANGE,
    TILT_V_RANGE, TRICHOME_HEAD_MM,
};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum SynthError {
    #[error("lambda must be positive and finite, got {0}")]
    InvalidLambda(f64),
    #[error("region must be a non-empty finite rectangle")]
    InvalidRegion,
    #[error("outside capture envelope: {0}")]
    OutsideEnvelope(String),
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
    #[error("paper does not fit inside the image frame")]
    PaperOutsideFrame,
    #[error("replicates must be at least 20, got {0}")]
    TooFewReplicates(usize),
    #[error(transparent)]
    Fiducial(#[from] FiducialError),
    #[error(transparent)]
    Image(#[from] ImageError),
    #[error(transparent)]
    Stats(#[from] StatsError),
    #[error("i/o error: {0}")]
    Io(String),
}
