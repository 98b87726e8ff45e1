//! Domain types shared by every stage: minutiae, orientation fields,
//! descriptors and the two template kinds.
//!
//! Coordinates are pixels at 500 ppi. Minutia directions live in `[0, 2π)`;
//! ridge orientations are undirected and live in `[0, π)`.

use std::f64::consts::{PI, TAU};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Reduces an angle into `[0, 2π)`.
pub fn wrap_2pi(a: f64) -> f64 {
    let r = a.rem_euclid(TAU);
    // rem_euclid can round up to exactly TAU for tiny negative inputs
    if r >= TAU {
        0.0
    } else {
        r
    }
}

/// Reduces an undirected orientation into `[0, π)`.
pub fn wrap_pi(a: f64) -> f64 {
    let r = a.rem_euclid(PI);
    if r >= PI {
        0.0
    } else {
        r
    }
}

/// Smallest absolute difference between two directions, in `[0, π]`.
pub fn circular_distance(a: f64, b: f64) -> f64 {
    let d = (a - b).abs();
    d.min(TAU - d).abs()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum MinutiaKind {
    True,
    Virtual,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Minutia {
    pub x: f64,
    pub y: f64,
    /// Direction in `[0, 2π)`.
    pub alpha: f64,
    pub kind: MinutiaKind,
}

impl Minutia {
    pub fn new(x: f64, y: f64, alpha: f64, kind: MinutiaKind) -> Self {
        Self {
            x,
            y,
            alpha: wrap_2pi(alpha),
            kind,
        }
    }

    pub fn true_minutia(x: f64, y: f64, alpha: f64) -> Self {
        Self::new(x, y, alpha, MinutiaKind::True)
    }

    pub fn virtual_minutia(x: f64, y: f64, alpha: f64) -> Self {
        Self::new(x, y, alpha, MinutiaKind::Virtual)
    }
}

/// Block-wise ridge orientation with a validity mask, stored row-major.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OrientationField {
    pub block_size: u32,
    pub width_blocks: u32,
    pub height_blocks: u32,
    pub theta: Vec<f64>,
    pub mask: Vec<bool>,
}

impl OrientationField {
    pub fn new(
        block_size: u32,
        width_blocks: u32,
        height_blocks: u32,
        theta: Vec<f64>,
        mask: Vec<bool>,
    ) -> Result<Self> {
        let n = width_blocks as usize * height_blocks as usize;
        if block_size == 0 || theta.len() != n || mask.len() != n {
            return Err(Error::InvalidInput(format!(
                "orientation field {width_blocks}x{height_blocks} needs {n} entries, got theta={} mask={}",
                theta.len(),
                mask.len()
            )));
        }
        let theta = theta.into_iter().map(wrap_pi).collect();
        Ok(Self {
            block_size,
            width_blocks,
            height_blocks,
            theta,
            mask,
        })
    }

    /// A field with every block masked out.
    pub fn empty(block_size: u32, width_blocks: u32, height_blocks: u32) -> Self {
        let n = width_blocks as usize * height_blocks as usize;
        Self {
            block_size,
            width_blocks,
            height_blocks,
            theta: vec![0.0; n],
            mask: vec![false; n],
        }
    }

    pub fn width_px(&self) -> u32 {
        self.width_blocks * self.block_size
    }

    pub fn height_px(&self) -> u32 {
        self.height_blocks * self.block_size
    }

    #[inline]
    pub fn index(&self, bx: u32, by: u32) -> usize {
        by as usize * self.width_blocks as usize + bx as usize
    }

    /// Orientation of a block if it is masked in.
    pub fn get(&self, bx: u32, by: u32) -> Option<f64> {
        if bx >= self.width_blocks || by >= self.height_blocks {
            return None;
        }
        let i = self.index(bx, by);
        self.mask[i].then_some(self.theta[i])
    }

    pub fn set(&mut self, bx: u32, by: u32, theta: f64) {
        let i = self.index(bx, by);
        self.theta[i] = wrap_pi(theta);
        self.mask[i] = true;
    }

    pub fn block_center(&self, bx: u32, by: u32) -> (f64, f64) {
        let bs = self.block_size as f64;
        (bx as f64 * bs + bs / 2.0, by as f64 * bs + bs / 2.0)
    }

    /// Block containing a pixel position (nearest block centre).
    pub fn block_at(&self, x: f64, y: f64) -> Option<(u32, u32)> {
        let bs = self.block_size as f64;
        let bx = (x / bs).floor();
        let by = (y / bs).floor();
        if bx < 0.0 || by < 0.0 || bx >= self.width_blocks as f64 || by >= self.height_blocks as f64 {
            return None;
        }
        Some((bx as u32, by as u32))
    }

    pub fn masked_count(&self) -> usize {
        self.mask.iter().filter(|m| **m).count()
    }

    /// Masked-in blocks as `(bx, by, theta)` in row-major order.
    pub fn masked_blocks(&self) -> impl Iterator<Item = (u32, u32, f64)> + '_ {
        let w = self.width_blocks;
        self.mask
            .iter()
            .zip(&self.theta)
            .enumerate()
            .filter(|(_, (m, _))| **m)
            .map(move |(i, (_, t))| ((i as u32) % w, (i as u32) / w, *t))
    }
}

/// Identifier into the 14-entry patch type catalog.
pub type PatchTypeId = u8;

/// One unit vector per patch type, stored contiguously.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Descriptor {
    patch_types: Vec<PatchTypeId>,
    dim: usize,
    data: Vec<f32>,
}

impl Descriptor {
    /// Builds a descriptor, L2-normalising each per-patch vector.
    pub fn from_vectors(vectors: Vec<(PatchTypeId, Vec<f32>)>) -> Result<Self> {
        let dim = vectors.first().map_or(0, |(_, v)| v.len());
        let mut patch_types = Vec::with_capacity(vectors.len());
        let mut data = Vec::with_capacity(vectors.len() * dim);
        for (p, v) in vectors {
            if v.len() != dim {
                return Err(Error::InvalidInput(format!(
                    "descriptor vector for patch type {p} has dimension {}, expected {dim}",
                    v.len()
                )));
            }
            if patch_types.contains(&p) {
                return Err(Error::InvalidInput(format!("patch type {p} given twice")));
            }
            patch_types.push(p);
            data.extend(normalized(&v));
        }
        Ok(Self {
            patch_types,
            dim,
            data,
        })
    }

    /// Builds a descriptor from already-stored raw parts without renormalising.
    pub fn from_raw_parts(patch_types: Vec<PatchTypeId>, dim: usize, data: Vec<f32>) -> Result<Self> {
        if data.len() != patch_types.len() * dim {
            return Err(Error::MalformedPayload(format!(
                "descriptor data length {} does not match {} patch types x {dim}",
                data.len(),
                patch_types.len()
            )));
        }
        Ok(Self {
            patch_types,
            dim,
            data,
        })
    }

    pub fn patch_types(&self) -> &[PatchTypeId] {
        &self.patch_types
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn raw_data(&self) -> &[f32] {
        &self.data
    }

    pub fn vector(&self, slot: usize) -> &[f32] {
        &self.data[slot * self.dim..(slot + 1) * self.dim]
    }

    pub fn vector_for(&self, patch_type: PatchTypeId) -> Option<&[f32]> {
        self.patch_types
            .iter()
            .position(|p| *p == patch_type)
            .map(|slot| self.vector(slot))
    }

    /// Keeps only the given patch types, in the given order.
    pub fn restrict(&self, subset: &[PatchTypeId]) -> Result<Self> {
        let mut data = Vec::with_capacity(subset.len() * self.dim);
        for p in subset {
            data.extend_from_slice(self.vector_for(*p).ok_or(Error::MissingPatchType(*p))?);
        }
        Ok(Self {
            patch_types: subset.to_vec(),
            dim: self.dim,
            data,
        })
    }
}

pub(crate) fn normalized(v: &[f32]) -> Vec<f32> {
    let norm = v.iter().map(|x| (*x as f64) * (*x as f64)).sum::<f64>().sqrt();
    if norm == 0.0 {
        return v.to_vec();
    }
    v.iter().map(|x| (*x as f64 / norm) as f32).collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum TemplateVariant {
    Latent1,
    Latent2,
    Reference,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MinutiaeTemplate {
    pub source_id: String,
    pub variant: TemplateVariant,
    pub minutiae: Vec<Minutia>,
    pub descriptors: Vec<Descriptor>,
    pub orientation_field: OrientationField,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum TextureSide {
    /// Virtual minutiae come in co-located pairs `(α, α+π)`.
    Latent,
    /// One virtual minutia per block with direction in `[0, π)`.
    Reference,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TextureTemplate {
    pub source_id: String,
    pub side: TextureSide,
    /// Image extent the virtual minutiae were sampled from.
    pub width: u32,
    pub height: u32,
    pub block_size: u32,
    pub virtual_minutiae: Vec<Minutia>,
    pub descriptors: Vec<Descriptor>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SubjectRecord {
    pub subject_id: String,
    pub minutiae_template: MinutiaeTemplate,
    pub texture_template: TextureTemplate,
}

/// The three templates extracted from one latent: two minutiae templates
/// from independent extraction routes and one texture template.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LatentTemplates {
    pub query_id: String,
    pub mt1: MinutiaeTemplate,
    pub mt2: MinutiaeTemplate,
    pub tt: TextureTemplate,
}

/// Either kind of template, as stored in a template file.
#[derive(Debug, Clone, PartialEq)]
pub enum Template {
    Minutiae(MinutiaeTemplate),
    Texture(TextureTemplate),
}

impl From<MinutiaeTemplate> for Template {
    fn from(t: MinutiaeTemplate) -> Self {
        Template::Minutiae(t)
    }
}

impl From<TextureTemplate> for Template {
    fn from(t: TextureTemplate) -> Self {
        Template::Texture(t)
    }
}

/// Anything the correspondence search can run on: oriented points plus one
/// descriptor per point.
pub trait MatchSide {
    fn points(&self) -> &[Minutia];
    fn point_descriptors(&self) -> &[Descriptor];
}

impl MatchSide for MinutiaeTemplate {
    fn points(&self) -> &[Minutia] {
        &self.minutiae
    }
    fn point_descriptors(&self) -> &[Descriptor] {
        &self.descriptors
    }
}

impl MatchSide for TextureTemplate {
    fn points(&self) -> &[Minutia] {
        &self.virtual_minutiae
    }
    fn point_descriptors(&self) -> &[Descriptor] {
        &self.descriptors
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Violation {
    pub code: String,
    pub message: String,
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ValidationReport {
    pub violations: Vec<Violation>,
}

impl ValidationReport {
    pub fn is_valid(&self) -> bool {
        self.violations.is_empty()
    }

    pub fn has(&self, code: &str) -> bool {
        self.violations.iter().any(|v| v.code == code)
    }

    fn push(&mut self, code: &str, message: String) {
        self.violations.push(Violation {
            code: code.to_string(),
            message,
        });
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serialises")
    }
}

const UNIT_NORM_TOL: f64 = 1e-6;

/// Lists every violated template invariant.
pub fn validate_template(t: &Template) -> ValidationReport {
    match t {
        Template::Minutiae(m) => validate_minutiae_template(m),
        Template::Texture(tt) => validate_texture_template(tt),
    }
}

pub fn validate_minutiae_template(t: &MinutiaeTemplate) -> ValidationReport {
    let mut r = ValidationReport::default();
    let of = &t.orientation_field;
    check_field(of, &mut r);
    let (w, h) = (of.width_px() as f64, of.height_px() as f64);
    for (i, m) in t.minutiae.iter().enumerate() {
        check_minutia(i, m, w, h, &mut r);
        if m.kind != MinutiaKind::True {
            r.push("kind", format!("minutia {i} is virtual in a minutiae template"));
        }
    }
    check_descriptors(t.minutiae.len(), &t.descriptors, &mut r);
    r
}

pub fn validate_texture_template(t: &TextureTemplate) -> ValidationReport {
    let mut r = ValidationReport::default();
    let (w, h) = (t.width as f64, t.height as f64);
    let margin = t.block_size as f64;
    for (i, m) in t.virtual_minutiae.iter().enumerate() {
        check_minutia(i, m, w, h, &mut r);
        if m.kind != MinutiaKind::Virtual {
            r.push("kind", format!("minutia {i} is a true minutia in a texture template"));
        }
        if m.x < margin || m.y < margin || m.x > w - margin || m.y > h - margin {
            r.push(
                "border",
                format!("virtual minutia {i} lies within one block of the border"),
            );
        }
        if t.side == TextureSide::Reference && m.alpha >= PI {
            r.push(
                "direction",
                format!("reference virtual minutia {i} direction {} not in [0,π)", m.alpha),
            );
        }
    }
    if t.side == TextureSide::Latent {
        check_pairs(&t.virtual_minutiae, &mut r);
    }
    check_descriptors(t.virtual_minutiae.len(), &t.descriptors, &mut r);
    r
}

fn check_field(of: &OrientationField, r: &mut ValidationReport) {
    let n = of.width_blocks as usize * of.height_blocks as usize;
    if of.theta.len() != n || of.mask.len() != n {
        r.push(
            "field_dims",
            format!(
                "orientation field {}x{} has theta={} mask={} entries",
                of.width_blocks,
                of.height_blocks,
                of.theta.len(),
                of.mask.len()
            ),
        );
        return;
    }
    for (i, (t, m)) in of.theta.iter().zip(&of.mask).enumerate() {
        if *m && !(0.0..PI).contains(t) {
            r.push("theta_range", format!("block {i} orientation {t} not in [0,π)"));
        }
    }
}

fn check_minutia(i: usize, m: &Minutia, w: f64, h: f64, r: &mut ValidationReport) {
    if !(0.0..TAU).contains(&m.alpha) {
        r.push(
            "alpha_range",
            format!("minutia {i}: alpha out of [0,2π): {}", m.alpha),
        );
    }
    if !(m.x >= 0.0 && m.y >= 0.0 && m.x <= w && m.y <= h) {
        r.push(
            "bounds",
            format!("minutia {i} at ({}, {}) outside {w}x{h}", m.x, m.y),
        );
    }
}

fn check_descriptors(n: usize, descriptors: &[Descriptor], r: &mut ValidationReport) {
    if descriptors.len() != n {
        r.push(
            "descriptor_count",
            format!("{} descriptors for {n} minutiae", descriptors.len()),
        );
    }
    let Some(first) = descriptors.first() else {
        return;
    };
    for (i, d) in descriptors.iter().enumerate() {
        if d.patch_types() != first.patch_types() || d.dim() != first.dim() {
            r.push(
                "patch_set",
                format!("descriptor {i} patch types differ from descriptor 0"),
            );
        }
        for slot in 0..d.patch_types().len() {
            let norm = d
                .vector(slot)
                .iter()
                .map(|x| (*x as f64).powi(2))
                .sum::<f64>()
                .sqrt();
            if (norm - 1.0).abs() > UNIT_NORM_TOL {
                r.push(
                    "unit_norm",
                    format!("descriptor {i} slot {slot} has norm {norm}"),
                );
            }
        }
    }
}

fn check_pairs(vms: &[Minutia], r: &mut ValidationReport) {
    let mut used = vec![false; vms.len()];
    for i in 0..vms.len() {
        if used[i] {
            continue;
        }
        let partner = (0..vms.len()).find(|&j| {
            j != i
                && !used[j]
                && vms[j].x == vms[i].x
                && vms[j].y == vms[i].y
                && (circular_distance(vms[i].alpha, vms[j].alpha) - PI).abs() < 1e-9
        });
        match partner {
            Some(j) => {
                used[i] = true;
                used[j] = true;
            }
            None => r.push(
                "unpaired",
                format!("unpaired virtual minutia {i} at ({}, {})", vms[i].x, vms[i].y),
            ),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn desc(seed: u32) -> Descriptor {
        let v: Vec<f32> = (0..8).map(|k| ((seed * 31 + k) % 7) as f32 + 1.0).collect();
        Descriptor::from_vectors(vec![(0, v)]).unwrap()
    }

    fn template(n: usize) -> MinutiaeTemplate {
        let minutiae = (0..n)
            .map(|i| Minutia::true_minutia(20.0 + 10.0 * i as f64, 40.0, 0.3 * i as f64))
            .collect();
        MinutiaeTemplate {
            source_id: "t".into(),
            variant: TemplateVariant::Reference,
            minutiae,
            descriptors: (0..n as u32).map(desc).collect(),
            orientation_field: OrientationField::new(16, 10, 10, vec![0.5; 100], vec![true; 100])
                .unwrap(),
        }
    }

    #[test]
    fn wrap_keeps_ranges() {
        assert_eq!(wrap_2pi(-1e-18), 0.0);
        assert!((wrap_2pi(7.0) - (7.0 - TAU)).abs() < 1e-15);
        assert_eq!(wrap_pi(PI), 0.0);
        assert!((circular_distance(0.1, TAU - 0.1) - 0.2).abs() < 1e-12);
    }

    #[test]
    fn well_formed_template_has_empty_report() {
        let t = template(10);
        assert!(validate_minutiae_template(&t).is_valid());
    }

    #[test]
    fn alpha_out_of_range_is_reported() {
        let mut t = template(10);
        // bypass the constructor to plant a raw out-of-range angle
        t.minutiae[3].alpha = 7.0;
        let r = validate_minutiae_template(&t);
        assert!(r.has("alpha_range"));
        assert!(r.violations[0].message.contains("alpha out of [0,2π)"));
    }

    #[test]
    fn descriptor_count_mismatch_is_reported() {
        let mut t = template(4);
        t.descriptors.pop();
        assert!(validate_minutiae_template(&t).has("descriptor_count"));
    }

    #[test]
    fn unpaired_virtual_minutia_is_reported() {
        let mut vms = Vec::new();
        for k in 0..3 {
            let x = 32.0 + 16.0 * k as f64;
            vms.push(Minutia::virtual_minutia(x, 40.0, 0.4));
            vms.push(Minutia::virtual_minutia(x, 40.0, 0.4 + PI));
        }
        let mut tt = TextureTemplate {
            source_id: "l".into(),
            side: TextureSide::Latent,
            width: 160,
            height: 160,
            block_size: 16,
            descriptors: (0..vms.len() as u32).map(desc).collect(),
            virtual_minutiae: vms,
        };
        assert!(validate_texture_template(&tt).is_valid());
        tt.virtual_minutiae.remove(3);
        tt.descriptors.remove(3);
        let r = validate_texture_template(&tt);
        assert!(r.has("unpaired"), "{r:?}");
        assert!(r.violations[0].message.contains("unpaired virtual minutia"));
    }

    #[test]
    fn report_exports_json() {
        let mut t = template(2);
        t.minutiae[0].alpha = 7.0;
        let json = validate_minutiae_template(&t).to_json();
        let back: ValidationReport = serde_json::from_str(&json).unwrap();
        assert_eq!(back.violations.len(), 1);
    }

    #[test]
    fn restrict_reorders_and_rejects_missing() {
        let d = Descriptor::from_vectors(vec![(3, vec![1.0, 0.0]), (5, vec![0.0, 2.0])]).unwrap();
        let r = d.restrict(&[5]).unwrap();
        assert_eq!(r.patch_types(), &[5]);
        assert_eq!(r.vector(0), &[0.0, 1.0]);
        assert!(matches!(d.restrict(&[7]), Err(Error::MissingPatchType(7))));
    }
}
