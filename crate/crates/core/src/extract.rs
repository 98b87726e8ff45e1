//! Template construction from an image and a given minutiae set.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::descriptor::{DescriptorSource, SidecarDescriptors};
use crate::error::{Error, Result};
use crate::ingest::{
    estimate_orientation_field, latent_virtual_minutiae, reference_virtual_minutiae, GrayImage,
};
use crate::model::{
    Descriptor, LatentTemplates, Minutia, MinutiaeTemplate, OrientationField, PatchTypeId,
    SubjectRecord, TemplateVariant, TextureSide, TextureTemplate,
};

/// Minutia as read from a JSON input file: `{"x": .., "y": .., "alpha": ..}`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MinutiaInput {
    pub x: f64,
    pub y: f64,
    pub alpha: f64,
}

pub fn read_minutiae_json(path: impl AsRef<Path>) -> Result<Vec<Minutia>> {
    let text = std::fs::read_to_string(path)?;
    let raw: Vec<MinutiaInput> = serde_json::from_str(&text)
        .map_err(|e| Error::InvalidInput(format!("minutiae file: {e}")))?;
    Ok(raw
        .into_iter()
        .map(|m| Minutia::true_minutia(m.x, m.y, m.alpha))
        .collect())
}

/// Where minutia descriptors come from.
pub enum Descriptors<'a> {
    /// Computed from the image.
    Computed(&'a dyn DescriptorSource),
    /// Looked up in a sidecar by `(source_id, minutia index)`.
    Sidecar(&'a SidecarDescriptors, &'a [PatchTypeId]),
}

impl Descriptors<'_> {
    fn for_points(&self, img: &GrayImage, source_id: &str, points: &[Minutia]) -> Result<Vec<Descriptor>> {
        match self {
            Descriptors::Computed(src) => points.iter().map(|m| src.describe(img, m)).collect(),
            Descriptors::Sidecar(side, subset) => side.descriptors_for(source_id, points.len(), subset),
        }
    }
}

fn check_inside(img: &GrayImage, ms: &[Minutia]) -> Result<()> {
    for (i, m) in ms.iter().enumerate() {
        if !(m.x >= 0.0 && m.y >= 0.0 && m.x < img.width as f64 && m.y < img.height as f64) {
            return Err(Error::InvalidInput(format!(
                "minutia {i} at ({}, {}) lies outside the {}x{} image",
                m.x, m.y, img.width, img.height
            )));
        }
    }
    Ok(())
}

pub fn minutiae_template(
    img: &GrayImage,
    of: &OrientationField,
    minutiae: Vec<Minutia>,
    source_id: &str,
    variant: TemplateVariant,
    descriptors: &Descriptors<'_>,
) -> Result<MinutiaeTemplate> {
    check_inside(img, &minutiae)?;
    let descriptors = descriptors.for_points(img, source_id, &minutiae)?;
    Ok(MinutiaeTemplate {
        source_id: source_id.to_string(),
        variant,
        minutiae,
        descriptors,
        orientation_field: of.clone(),
    })
}

/// Texture template over the field's virtual minutiae; descriptors are always
/// computed from the image.
pub fn texture_template(
    img: &GrayImage,
    of: &OrientationField,
    side: TextureSide,
    source_id: &str,
    src: &dyn DescriptorSource,
) -> Result<TextureTemplate> {
    let vms = match side {
        TextureSide::Latent => latent_virtual_minutiae(of),
        TextureSide::Reference => reference_virtual_minutiae(of),
    };
    let descriptors = vms.iter().map(|m| src.describe(img, m)).collect::<Result<_>>()?;
    Ok(TextureTemplate {
        source_id: source_id.to_string(),
        side,
        width: img.width,
        height: img.height,
        block_size: of.block_size,
        virtual_minutiae: vms,
        descriptors,
    })
}

pub fn reference_subject(
    img: &GrayImage,
    minutiae: Vec<Minutia>,
    subject_id: &str,
    block_size: u32,
    descriptors: &Descriptors<'_>,
    texture_src: &dyn DescriptorSource,
) -> Result<SubjectRecord> {
    let of = estimate_orientation_field(img, block_size)?;
    Ok(SubjectRecord {
        subject_id: subject_id.to_string(),
        minutiae_template: minutiae_template(img, &of, minutiae, subject_id, TemplateVariant::Reference, descriptors)?,
        texture_template: texture_template(img, &of, TextureSide::Reference, subject_id, texture_src)?,
    })
}

/// Latent templates from one or two minutiae sets; with one set both
/// minutiae templates share it.
pub fn latent_templates(
    img: &GrayImage,
    minutiae1: Vec<Minutia>,
    minutiae2: Option<Vec<Minutia>>,
    query_id: &str,
    block_size: u32,
    descriptors: &Descriptors<'_>,
    texture_src: &dyn DescriptorSource,
) -> Result<LatentTemplates> {
    let of = estimate_orientation_field(img, block_size)?;
    let minutiae2 = minutiae2.unwrap_or_else(|| minutiae1.clone());
    Ok(LatentTemplates {
        query_id: query_id.to_string(),
        mt1: minutiae_template(img, &of, minutiae1, query_id, TemplateVariant::Latent1, descriptors)?,
        mt2: minutiae_template(img, &of, minutiae2, query_id, TemplateVariant::Latent2, descriptors)?,
        tt: texture_template(img, &of, TextureSide::Latent, query_id, texture_src)?,
    })
}
