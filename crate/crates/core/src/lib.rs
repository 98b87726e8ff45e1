//! Latent-to-reference fingerprint identification.
//!
//! Templates ([`model`]) are built from images ([`ingest`], [`descriptor`]),
//! compared with a second- and third-order graph matcher ([`matcher`]) and
//! scored ([`scoring`]). [`db`] and [`eval`] provide 1:N search and
//! evaluation; [`synth`] generates subjects with known ground truth.

pub mod codec;
pub mod config;
pub mod db;
pub mod descriptor;
pub mod error;
pub mod eval;
pub mod extract;
pub mod ingest;
pub mod matcher;
pub mod model;
pub mod scoring;
pub mod synth;

pub use error::{Error, Result};
pub use matcher::{match_minutiae, CandidatePair, Correspondence, CorrespondenceSet, MatcherConfig, Stage};
pub use model::{
    Descriptor, LatentTemplates, Minutia, MinutiaKind, MinutiaeTemplate, OrientationField, SubjectRecord, Template,
    TemplateVariant, TextureSide, TextureTemplate,
};
pub use scoring::{Alignment, FusionWeights, ScoreBreakdown, ScoringConfig};
