//! Minutia descriptors: the patch type catalog, a handcrafted baseline
//! descriptor, cosine-average similarity and top-N candidate selection.
//!
//! Any descriptor source can be plugged in as long as it yields one unit
//! vector per selected patch type; see [`DescriptorSource`] and the sidecar
//! loader.

use std::collections::HashMap;
use std::f64::consts::TAU;
use std::io::BufRead;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::ingest::{extract_patch, GrayImage, Patch};
use crate::matcher::CandidatePair;
use crate::model::{Descriptor, MatchSide, Minutia, PatchTypeId};

pub const CATALOG_SIZE: usize = 14;
pub const DEFAULT_DIM: usize = 128;
pub const PATCH_OUTPUT_SIZE: usize = 160;

pub const CENTERED_80: PatchTypeId = 0;
pub const CENTERED_160: PatchTypeId = 5;
pub const OFFSET_TOP: PatchTypeId = 10;
pub const OFFSET_BOTTOM: PatchTypeId = 13;

/// Distance of the offset windows' centres from the minutia, in the
/// minutia frame.
pub const OFFSET_SHIFT: f64 = 32.0;

/// Size and placement of one patch type in the minutia frame.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PatchGeometry {
    pub window: u32,
    pub offset: (f64, f64),
    pub name: &'static str,
}

const OFFSET_NAMES: [(&str, f64, f64); 8] = [
    ("top-left", -1.0, -1.0),
    ("top-right", 1.0, -1.0),
    ("bottom-right", 1.0, 1.0),
    ("bottom-left", -1.0, 1.0),
    ("top", 0.0, -1.0),
    ("right", 1.0, 0.0),
    ("left", -1.0, 0.0),
    ("bottom", 0.0, 1.0),
];

const CENTERED_NAMES: [&str; 6] = [
    "centered-80",
    "centered-96",
    "centered-112",
    "centered-128",
    "centered-144",
    "centered-160",
];

/// Types 0..=5 are centred windows of 80..=160 px in steps of 16; types
/// 6..=13 are 96 px windows shifted towards the eight neighbours.
pub fn patch_geometry(id: PatchTypeId) -> Option<PatchGeometry> {
    let id = id as usize;
    if id < 6 {
        Some(PatchGeometry {
            window: 80 + 16 * id as u32,
            offset: (0.0, 0.0),
            name: CENTERED_NAMES[id],
        })
    } else if id < CATALOG_SIZE {
        let (name, dx, dy) = OFFSET_NAMES[id - 6];
        Some(PatchGeometry {
            window: 96,
            offset: (dx * OFFSET_SHIFT, dy * OFFSET_SHIFT),
            name,
        })
    } else {
        None
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PatchTypeCatalog {
    pub selected_subset: Vec<PatchTypeId>,
}

impl Default for PatchTypeCatalog {
    fn default() -> Self {
        Self {
            selected_subset: vec![CENTERED_80, OFFSET_TOP, OFFSET_BOTTOM],
        }
    }
}

impl PatchTypeCatalog {
    pub fn all_types() -> Vec<PatchTypeId> {
        (0..CATALOG_SIZE as PatchTypeId).collect()
    }

    pub fn with_subset(subset: Vec<PatchTypeId>) -> Result<Self> {
        if let Some(bad) = subset.iter().find(|p| (**p as usize) >= CATALOG_SIZE) {
            return Err(Error::InvalidInput(format!("patch type {bad} not in catalog")));
        }
        Ok(Self {
            selected_subset: subset,
        })
    }
}

/// Pluggable descriptor extraction.
pub trait DescriptorSource {
    fn describe(&self, img: &GrayImage, m: &Minutia) -> Result<Descriptor>;
}

/// Gradient-orientation histogram descriptor over a 4×4 grid × 8 bins.
#[derive(Debug, Clone)]
pub struct BaselineDescriptor {
    pub catalog: PatchTypeCatalog,
    pub dim: usize,
}

impl Default for BaselineDescriptor {
    fn default() -> Self {
        Self {
            catalog: PatchTypeCatalog::default(),
            dim: DEFAULT_DIM,
        }
    }
}

impl DescriptorSource for BaselineDescriptor {
    fn describe(&self, img: &GrayImage, m: &Minutia) -> Result<Descriptor> {
        let patches = self
            .catalog
            .selected_subset
            .iter()
            .map(|p| extract_patch(img, m, *p))
            .collect::<Result<Vec<_>>>()?;
        compute_descriptor(&patches, &self.catalog, self.dim)
    }
}

const GRID: usize = 4;
const BINS: usize = 8;

/// One normalised histogram vector per selected patch type.
pub fn compute_descriptor(
    patches: &[Patch],
    catalog: &PatchTypeCatalog,
    dim: usize,
) -> Result<Descriptor> {
    let mut vectors = Vec::with_capacity(catalog.selected_subset.len());
    for p in &catalog.selected_subset {
        let patch = patches
            .iter()
            .find(|q| q.patch_type_id == *p)
            .ok_or(Error::MissingPatchType(*p))?;
        vectors.push((*p, fold(&histogram(patch), dim)));
    }
    Descriptor::from_vectors(vectors)
}

fn histogram(p: &Patch) -> Vec<f32> {
    let n = p.size;
    let cell = n as f64 / GRID as f64;
    let mut h = vec![0f64; GRID * GRID * BINS];
    for v in 1..n - 1 {
        for u in 1..n - 1 {
            let gx = (p.at(u + 1, v) - p.at(u - 1, v)) as f64;
            let gy = (p.at(u, v + 1) - p.at(u, v - 1)) as f64;
            let mag = gx.hypot(gy);
            if mag == 0.0 {
                continue;
            }
            let pos = gy.atan2(gx).rem_euclid(TAU) / TAU * BINS as f64;
            let b0 = pos.floor() as usize % BINS;
            let frac = pos - pos.floor();
            let cx = ((u as f64 / cell) as usize).min(GRID - 1);
            let cy = ((v as f64 / cell) as usize).min(GRID - 1);
            let base = (cy * GRID + cx) * BINS;
            h[base + b0] += mag * (1.0 - frac);
            h[base + (b0 + 1) % BINS] += mag * frac;
        }
    }
    h.into_iter().map(|x| x as f32).collect()
}

/// Folds or zero-pads a raw histogram to the requested dimension.
fn fold(raw: &[f32], dim: usize) -> Vec<f32> {
    let n = dim.max(1);
    let mut out = vec![0f32; n];
    for (i, v) in raw.iter().enumerate() {
        out[i % n] += v;
    }
    out
}

/// Unnormalised dot product; descriptors are unit vectors so this is the
/// cosine.
#[inline]
pub(crate) fn dot(a: &[f32], b: &[f32]) -> f32 {
    let mut acc = [0f32; 8];
    let chunks = a.len() / 8;
    for c in 0..chunks {
        let (x, y) = (&a[c * 8..c * 8 + 8], &b[c * 8..c * 8 + 8]);
        for k in 0..8 {
            acc[k] += x[k] * y[k];
        }
    }
    let mut tail = 0f32;
    for i in chunks * 8..a.len() {
        tail += a[i] * b[i];
    }
    ((acc[0] + acc[4]) + (acc[1] + acc[5])) + ((acc[2] + acc[6]) + (acc[3] + acc[7])) + tail
}

/// Mean over the shared patch types of the per-patch cosine similarity.
/// Descriptor vectors are unit norm, so each cosine is a plain dot product.
pub fn descriptor_similarity(a: &Descriptor, b: &Descriptor) -> Result<f64> {
    if a.dim() != b.dim() || a.patch_types().len() != b.patch_types().len() {
        return Err(Error::PatchSetMismatch);
    }
    let k = a.patch_types().len();
    if k == 0 {
        return Err(Error::PatchSetMismatch);
    }
    let mut total = 0f64;
    if a.patch_types() == b.patch_types() {
        for s in 0..k {
            total += dot(a.vector(s), b.vector(s)) as f64;
        }
    } else {
        for (s, p) in a.patch_types().iter().enumerate() {
            let bv = b.vector_for(*p).ok_or(Error::PatchSetMismatch)?;
            total += dot(a.vector(s), bv) as f64;
        }
    }
    Ok((total / k as f64).clamp(-1.0, 1.0))
}

/// Dense `rows × cols` descriptor similarity matrix, row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct SimilarityMatrix {
    pub rows: usize,
    pub cols: usize,
    pub data: Vec<f64>,
}

impl SimilarityMatrix {
    pub fn from_rows(rows: Vec<Vec<f64>>) -> Self {
        let cols = rows.first().map_or(0, |r| r.len());
        Self {
            rows: rows.len(),
            cols,
            data: rows.into_iter().flatten().collect(),
        }
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.data[i * self.cols + j]
    }
}

/// Entry `(i, j)` is the similarity of latent descriptor `i` and reference
/// descriptor `j`.
pub fn similarity_matrix<L, R>(lt: &L, rt: &R) -> Result<SimilarityMatrix>
where
    L: MatchSide + ?Sized,
    R: MatchSide + ?Sized,
{
    let ld = lt.point_descriptors();
    let rd = rt.point_descriptors();
    let (rows, cols) = (ld.len(), rd.len());
    if rows == 0 || cols == 0 {
        return Ok(SimilarityMatrix {
            rows,
            cols,
            data: Vec::new(),
        });
    }
    let types = ld[0].patch_types();
    let uniform = ld.iter().chain(rd).all(|d| d.patch_types() == types && d.dim() == ld[0].dim());
    let mut data = Vec::with_capacity(rows * cols);
    if uniform {
        // same arithmetic as descriptor_similarity without per-entry checks
        let k = types.len() as f64;
        let dim = ld[0].dim();
        for a in ld {
            let av = a.raw_data();
            for b in rd {
                let bv = b.raw_data();
                let mut s = 0f64;
                for slot in 0..types.len() {
                    let r = slot * dim..(slot + 1) * dim;
                    s += dot(&av[r.clone()], &bv[r]) as f64;
                }
                data.push((s / k).clamp(-1.0, 1.0));
            }
        }
    } else {
        for a in ld {
            for b in rd {
                data.push(descriptor_similarity(a, b)?);
            }
        }
    }
    Ok(SimilarityMatrix { rows, cols, data })
}

/// The `n` most similar pairs, sorted by similarity descending with ties
/// broken by `(i, j)` ascending.
pub fn select_top_pairs(sim: &SimilarityMatrix, n: usize) -> Vec<CandidatePair> {
    let mut all: Vec<CandidatePair> = (0..sim.rows)
        .flat_map(|i| {
            (0..sim.cols).map(move |j| CandidatePair {
                i1: i,
                i2: j,
                sim: sim.get(i, j),
            })
        })
        .collect();
    let order = |a: &CandidatePair, b: &CandidatePair| {
        b.sim
            .total_cmp(&a.sim)
            .then(a.i1.cmp(&b.i1))
            .then(a.i2.cmp(&b.i2))
    };
    if n == 0 {
        return Vec::new();
    }
    if n < all.len() {
        all.select_nth_unstable_by(n - 1, order);
        all.truncate(n);
    }
    all.sort_unstable_by(order);
    all
}

/// One externally computed vector, keyed by `(source_id, minutia, patch_type)`.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SidecarRecord {
    pub source_id: String,
    pub minutia: usize,
    pub patch_type: PatchTypeId,
    pub vector: Vec<f32>,
}

type SidecarEntry = (PatchTypeId, Vec<f32>);

/// Descriptors read from a JSON-lines sidecar file.
#[derive(Debug, Default, Clone)]
pub struct SidecarDescriptors {
    entries: HashMap<(String, usize), Vec<SidecarEntry>>,
}

impl SidecarDescriptors {
    pub fn read(reader: impl BufRead) -> Result<Self> {
        let mut out = Self::default();
        for line in reader.lines() {
            let line = line?;
            if line.trim().is_empty() {
                continue;
            }
            let rec: SidecarRecord = serde_json::from_str(&line)?;
            out.entries
                .entry((rec.source_id, rec.minutia))
                .or_default()
                .push((rec.patch_type, rec.vector));
        }
        Ok(out)
    }

    /// Descriptor for one minutia restricted to `subset` (in that order).
    pub fn descriptor(&self, source_id: &str, minutia: usize, subset: &[PatchTypeId]) -> Result<Descriptor> {
        let vs = self
            .entries
            .get(&(source_id.to_string(), minutia))
            .ok_or_else(|| Error::InvalidInput(format!("no sidecar descriptor for {source_id}#{minutia}")))?;
        let picked = subset
            .iter()
            .map(|p| {
                vs.iter()
                    .find(|(q, _)| q == p)
                    .map(|(_, v)| (*p, v.clone()))
                    .ok_or(Error::MissingPatchType(*p))
            })
            .collect::<Result<Vec<_>>>()?;
        Descriptor::from_vectors(picked)
    }

    /// Descriptors for minutiae `0..n` of one source.
    pub fn descriptors_for(&self, source_id: &str, n: usize, subset: &[PatchTypeId]) -> Result<Vec<Descriptor>> {
        (0..n).map(|i| self.descriptor(source_id, i, subset)).collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{MinutiaeTemplate, OrientationField, TemplateVariant};
    use std::f64::consts::PI;

    fn unit(v: Vec<f32>) -> Vec<f32> {
        crate::model::normalized(&v)
    }

    fn textured(size: u32) -> GrayImage {
        GrayImage::from_fn(size, size, |x, y| {
            120.0 + 40.0 * (x * 0.21 + y * 0.05).sin() + 35.0 * (y * 0.13 - x * 0.07).cos()
                + 20.0 * ((x - 150.0).hypot(y - 140.0) * 0.09).sin()
        })
    }

    #[test]
    fn catalog_geometry() {
        assert_eq!(patch_geometry(0).unwrap().window, 80);
        assert_eq!(patch_geometry(5).unwrap().window, 160);
        for id in 6..14 {
            assert_eq!(patch_geometry(id).unwrap().window, 96);
        }
        assert!(patch_geometry(14).is_none());
        assert_eq!(PatchTypeCatalog::default().selected_subset.len(), 3);
        assert!(PatchTypeCatalog::with_subset(vec![0, 20]).is_err());
    }

    #[test]
    fn baseline_descriptor_is_unit_and_deterministic() {
        let img = textured(300);
        let m = Minutia::true_minutia(150.0, 150.0, 0.7);
        let src = BaselineDescriptor::default();
        let a = src.describe(&img, &m).unwrap();
        let b = src.describe(&img, &m).unwrap();
        assert_eq!(a, b);
        for s in 0..3 {
            let n: f32 = a.vector(s).iter().map(|x| x * x).sum::<f32>().sqrt();
            assert!((n - 1.0).abs() < 1e-6);
        }
    }

    #[test]
    fn contrast_scaling_leaves_descriptor_unchanged() {
        let base = GrayImage::from_fn(300, 300, |x, y| {
            80.0 + 30.0 * (x * 0.21 + y * 0.05).sin() + 30.0 * (y * 0.13 - x * 0.07).cos()
        });
        let m = Minutia::true_minutia(140.0, 160.0, 1.1);
        let catalog = PatchTypeCatalog::default();
        let pa: Vec<_> = catalog.selected_subset.iter().map(|p| extract_patch(&base, &m, *p).unwrap()).collect();
        // scale the patches directly so the comparison is free of u8 rounding
        let pb: Vec<_> = pa
            .iter()
            .map(|p| Patch {
                pixels: p.pixels.iter().map(|v| v * 1.5).collect(),
                ..p.clone()
            })
            .collect();
        let a = compute_descriptor(&pa, &catalog, 128).unwrap();
        let b = compute_descriptor(&pb, &catalog, 128).unwrap();
        for (x, y) in a.raw_data().iter().zip(b.raw_data()) {
            assert!((x - y).abs() < 1e-6);
        }
    }

    #[test]
    fn missing_patch_type_is_an_error() {
        let img = textured(200);
        let m = Minutia::true_minutia(100.0, 100.0, 0.0);
        let patches = vec![extract_patch(&img, &m, CENTERED_80).unwrap()];
        assert!(matches!(
            compute_descriptor(&patches, &PatchTypeCatalog::default(), 128),
            Err(Error::MissingPatchType(OFFSET_TOP))
        ));
    }

    #[test]
    fn rotation_normalisation_keeps_descriptor() {
        let n = 361u32;
        let img = textured(n);
        let c = (n - 1) as f64 / 2.0;
        let phi = 37f64.to_radians();
        let (s, co) = phi.sin_cos();
        // image rotated by +phi about the centre
        let rotated = GrayImage::from_fn(n, n, |x, y| {
            let (dx, dy) = (x - c, y - c);
            img.sample(c + dx * co + dy * s, c - dx * s + dy * co).unwrap_or(128.0)
        });
        let src = BaselineDescriptor::default();
        let alpha = 0.4;
        let a = src.describe(&img, &Minutia::true_minutia(c, c, alpha)).unwrap();
        let b = src.describe(&rotated, &Minutia::true_minutia(c, c, alpha + phi)).unwrap();
        for slot in 0..3 {
            let cs = dot(a.vector(slot), b.vector(slot));
            assert!(1.0 - cs < 0.05, "slot {slot} cosine {cs}");
        }
    }

    fn d2(a: Vec<f32>, b: Vec<f32>) -> Descriptor {
        Descriptor::from_vectors(vec![(0, unit(a)), (6, unit(b))]).unwrap()
    }

    #[test]
    fn similarity_examples() {
        let a = d2(vec![1.0, 0.0, 0.0], vec![0.0, 1.0, 0.0]);
        assert!((descriptor_similarity(&a, &a).unwrap() - 1.0).abs() < 1e-6);
        let b = d2(vec![0.0, 1.0, 0.0], vec![0.0, 0.0, 1.0]);
        assert_eq!(descriptor_similarity(&a, &b).unwrap(), 0.0);
        // per-patch cosines 0.8 and 0.6
        let c = d2(vec![0.8, 0.6, 0.0], vec![0.0, 0.6, 0.8]);
        assert!((descriptor_similarity(&a, &c).unwrap() - 0.7).abs() < 1e-6);
        let other = Descriptor::from_vectors(vec![(0, vec![1.0, 0.0, 0.0])]).unwrap();
        assert!(matches!(descriptor_similarity(&a, &other), Err(Error::PatchSetMismatch)));
    }

    fn template(ds: Vec<Descriptor>) -> MinutiaeTemplate {
        MinutiaeTemplate {
            source_id: "x".into(),
            variant: TemplateVariant::Reference,
            minutiae: (0..ds.len()).map(|i| Minutia::true_minutia(i as f64 * 15.0, 5.0, PI / 3.0)).collect(),
            descriptors: ds,
            orientation_field: OrientationField::empty(16, 4, 4),
        }
    }

    #[test]
    fn self_similarity_matrix_has_diagonal_maxima() {
        let ds: Vec<_> = (0..6)
            .map(|i| d2((0..8).map(|k| ((i * 7 + k * 3) % 11) as f32 - 5.0).collect(),
                        (0..8).map(|k| ((i * 5 + k * 2) % 13) as f32 - 6.0).collect()))
            .collect();
        let t = template(ds);
        let m = similarity_matrix(&t, &t).unwrap();
        for i in 0..6 {
            let argmax = (0..6).max_by(|a, b| m.get(i, *a).total_cmp(&m.get(i, *b))).unwrap();
            assert_eq!(argmax, i);
        }
        let empty = template(vec![]);
        let e = similarity_matrix(&empty, &t).unwrap();
        assert_eq!((e.rows, e.data.len()), (0, 0));
    }

    #[test]
    fn top_pairs_examples() {
        let m = SimilarityMatrix::from_rows(vec![vec![0.9, 0.1], vec![0.2, 0.8]]);
        let top = select_top_pairs(&m, 2);
        assert_eq!(top.iter().map(|p| (p.i1, p.i2)).collect::<Vec<_>>(), vec![(0, 0), (1, 1)]);
        assert_eq!(select_top_pairs(&m, 10).len(), 4);
        let eq = SimilarityMatrix::from_rows(vec![vec![0.5; 3]; 3]);
        let top = select_top_pairs(&eq, 3);
        assert_eq!(top.iter().map(|p| (p.i1, p.i2)).collect::<Vec<_>>(), vec![(0, 0), (0, 1), (0, 2)]);
    }

    #[test]
    fn sidecar_round_trip() {
        let lines = [
            r#"{"source_id":"L1","minutia":0,"patch_type":0,"vector":[3.0,4.0]}"#,
            r#"{"source_id":"L1","minutia":0,"patch_type":10,"vector":[1.0,0.0]}"#,
            r#"{"source_id":"L1","minutia":1,"patch_type":0,"vector":[0.0,2.0]}"#,
        ]
        .join("\n");
        let sc = SidecarDescriptors::read(lines.as_bytes()).unwrap();
        let d = sc.descriptor("L1", 0, &[0, 10]).unwrap();
        assert_eq!(d.vector(0), &[0.6, 0.8]);
        assert!(matches!(sc.descriptor("L1", 1, &[0, 10]), Err(Error::MissingPatchType(10))));
        assert!(sc.descriptors_for("L1", 2, &[0]).is_ok());
    }

    proptest::proptest! {
        #[test]
        fn similarity_is_symmetric(a in proptest::collection::vec(-1f32..1.0, 16),
                                   b in proptest::collection::vec(-1f32..1.0, 16)) {
            let da = d2(a[..8].to_vec(), a[8..].to_vec());
            let db = d2(b[..8].to_vec(), b[8..].to_vec());
            let s1 = descriptor_similarity(&da, &db).unwrap();
            let s2 = descriptor_similarity(&db, &da).unwrap();
            proptest::prop_assert_eq!(s1, s2);
            proptest::prop_assert!((-1.0..=1.0).contains(&s1));
        }

        #[test]
        fn top_pairs_independent_of_layout(vals in proptest::collection::vec(0u8..5, 12), n in 1usize..14) {
            // few distinct values force many ties
            let rows: Vec<Vec<f64>> = vals.chunks(4).map(|r| r.iter().map(|v| *v as f64 / 4.0).collect()).collect();
            let m = SimilarityMatrix::from_rows(rows.clone());
            let top = select_top_pairs(&m, n);
            // oracle: full stable sort of all entries
            let mut all: Vec<(f64, usize, usize)> = (0..3).flat_map(|i| (0..4).map(move |j| (i, j))).map(|(i, j)| (rows[i][j], i, j)).collect();
            all.sort_by(|a, b| b.0.total_cmp(&a.0).then(a.1.cmp(&b.1)).then(a.2.cmp(&b.2)));
            let expect: Vec<_> = all.iter().take(n).map(|e| (e.1, e.2)).collect();
            proptest::prop_assert_eq!(top.iter().map(|p| (p.i1, p.i2)).collect::<Vec<_>>(), expect);
        }
    }
}
