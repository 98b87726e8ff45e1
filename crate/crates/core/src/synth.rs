//! Synthetic subjects and latents with known correspondences.
//!
//! A reference subject is a smooth orientation field over a circular region
//! of interest, minutiae placed with a minimum separation, and descriptors
//! that are random unit vectors. Texture descriptors are a smooth random
//! function of position so that nearby virtual minutiae look alike.
//!
//! A latent is the reference moved rigidly about the canvas centre, with a
//! half-plane occlusion, jitter, spurious minutiae and descriptor noise.

use std::f64::consts::PI;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::ingest::{latent_virtual_minutiae, reference_virtual_minutiae};
use crate::model::{
    wrap_2pi, wrap_pi, Descriptor, LatentTemplates, Minutia, MinutiaeTemplate, OrientationField,
    PatchTypeId, SubjectRecord, TemplateVariant, TextureSide, TextureTemplate,
};
use crate::scoring::Alignment;

pub const MIN_SEPARATION: f64 = 12.0;

/// Spatial frequency scale of the texture descriptor field, in 1/px.
/// Descriptors one block (16 px) apart correlate at about 0.4.
const TEXTURE_FREQUENCY_SIGMA: f64 = 0.0835;

/// Canvas and descriptor layout of generated subjects.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct FieldSpec {
    pub width: u32,
    pub height: u32,
    pub block_size: u32,
    /// Radius of the circular region of interest around the canvas centre.
    pub roi_radius: f64,
    pub patch_types: Vec<PatchTypeId>,
    pub descriptor_dim: usize,
}

impl Default for FieldSpec {
    fn default() -> Self {
        Self {
            width: 320,
            height: 320,
            block_size: 16,
            roi_radius: 120.0,
            patch_types: crate::descriptor::PatchTypeCatalog::default().selected_subset,
            descriptor_dim: crate::descriptor::DEFAULT_DIM,
        }
    }
}

impl FieldSpec {
    fn center(&self) -> (f64, f64) {
        (self.width as f64 / 2.0, self.height as f64 / 2.0)
    }
}

/// Degradations applied when deriving a latent from a reference.
///
/// The rigid motion maps reference to latent coordinates by rotating about
/// the canvas centre and then translating.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(default)]
pub struct DistortionSpec {
    pub occlusion_fraction: f64,
    pub position_jitter_sigma: f64,
    pub angle_jitter_sigma: f64,
    pub spurious_fraction: f64,
    pub rigid_rotation: f64,
    pub rigid_translation: (f64, f64),
    pub descriptor_noise_sigma: f64,
    pub seed: u64,
}

impl DistortionSpec {
    pub fn validate(&self) -> Result<()> {
        let frac = |v: f64| (0.0..=1.0).contains(&v);
        let sigma = |v: f64| v >= 0.0 && v.is_finite();
        if !frac(self.occlusion_fraction) || !frac(self.spurious_fraction) {
            return Err(Error::InvalidInput("fractions must lie in [0,1]".into()));
        }
        if !sigma(self.position_jitter_sigma)
            || !sigma(self.angle_jitter_sigma)
            || !sigma(self.descriptor_noise_sigma)
        {
            return Err(Error::InvalidInput("sigmas must be finite and non-negative".into()));
        }
        if !self.rigid_rotation.is_finite()
            || !self.rigid_translation.0.is_finite()
            || !self.rigid_translation.1.is_finite()
        {
            return Err(Error::InvalidInput("rigid motion must be finite".into()));
        }
        Ok(())
    }

    /// Same degradations with a rigid motion drawn uniformly from
    /// rotation `[−π, π)` and translation `[−max_t, max_t]²`.
    pub fn with_random_rigid(mut self, rng: &mut impl Rng, max_translation: f64) -> Self {
        self.rigid_rotation = rng.random_range(-PI..PI);
        self.rigid_translation = (
            rng.random_range(-max_translation..=max_translation),
            rng.random_range(-max_translation..=max_translation),
        );
        self
    }
}

/// Which reference minutia each latent minutia came from, and the motion.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GroundTruth {
    pub query_id: String,
    pub subject_id: String,
    /// `(latent index, reference index)` for every surviving minutia; the
    /// same for both latent minutiae templates.
    pub latent_to_reference: Vec<(usize, usize)>,
    pub rigid_rotation: f64,
    pub rigid_translation: (f64, f64),
    pub center: (f64, f64),
}

impl GroundTruth {
    /// Latent→reference transform in the form produced by alignment estimation.
    pub fn alignment(&self) -> Alignment {
        let (c, t) = (self.center, self.rigid_translation);
        let a = -self.rigid_rotation;
        let (s, co) = a.sin_cos();
        // p_r = R(a)(p_l − c − t) + c
        let (qx, qy) = (c.0 + t.0, c.1 + t.1);
        Alignment {
            delta_alpha: crate::scoring::wrap_signed(a),
            delta_x: c.0 - (co * qx - s * qy),
            delta_y: c.1 - (s * qx + co * qy),
        }
    }

    pub fn reference_index(&self, latent: usize) -> Option<usize> {
        self.latent_to_reference
            .iter()
            .find(|(l, _)| *l == latent)
            .map(|(_, r)| *r)
    }
}

/// Low-order polynomial model of the doubled-angle orientation vector.
#[derive(Debug, Clone)]
struct FieldModel {
    cos2: [f64; 6],
    sin2: [f64; 6],
    center: (f64, f64),
    scale: f64,
}

impl FieldModel {
    fn random(rng: &mut ChaCha8Rng, spec: &FieldSpec) -> Self {
        let mut draw = || -> [f64; 6] { std::array::from_fn(|_| rng.sample(StandardNormal)) };
        let cos2 = draw();
        let sin2 = draw();
        Self {
            cos2,
            sin2,
            center: spec.center(),
            scale: spec.roi_radius.max(1.0),
        }
    }

    fn theta(&self, x: f64, y: f64) -> f64 {
        let u = (x - self.center.0) / self.scale;
        let v = (y - self.center.1) / self.scale;
        let basis = [1.0, u, v, u * u, u * v, v * v];
        let c: f64 = basis.iter().zip(&self.cos2).map(|(b, k)| b * k).sum();
        let s: f64 = basis.iter().zip(&self.sin2).map(|(b, k)| b * k).sum();
        wrap_pi(0.5 * s.atan2(c))
    }
}

/// Smooth vector-valued function of position built from random Fourier
/// features; correlation decays like a Gaussian in distance.
#[derive(Debug, Clone)]
struct SmoothField {
    freq: Vec<(f64, f64)>,
    phase: Vec<f64>,
}

impl SmoothField {
    fn random(rng: &mut ChaCha8Rng, dim: usize) -> Self {
        let freq = (0..dim)
            .map(|_| {
                let wx: f64 = rng.sample(StandardNormal);
                let wy: f64 = rng.sample(StandardNormal);
                (wx * TEXTURE_FREQUENCY_SIGMA, wy * TEXTURE_FREQUENCY_SIGMA)
            })
            .collect();
        let phase = (0..dim).map(|_| rng.random_range(0.0..2.0 * PI)).collect();
        Self { freq, phase }
    }

    fn eval(&self, x: f64, y: f64) -> Vec<f32> {
        self.freq
            .iter()
            .zip(&self.phase)
            .map(|((wx, wy), b)| (wx * x + wy * y + b).cos() as f32)
            .collect()
    }
}

/// Texture descriptor generator of one subject. Directions agreeing with the
/// ridge orientation and directions opposite to it get unrelated fields.
#[derive(Debug, Clone)]
struct TextureModel {
    along: Vec<SmoothField>,
    against: Vec<SmoothField>,
}

impl TextureModel {
    fn random(rng: &mut ChaCha8Rng, spec: &FieldSpec) -> Self {
        let mut make = || {
            spec.patch_types
                .iter()
                .map(|_| SmoothField::random(rng, spec.descriptor_dim))
                .collect()
        };
        let along = make();
        let against = make();
        Self { along, against }
    }

    fn raw(&self, field: &FieldModel, x: f64, y: f64, alpha: f64) -> Vec<Vec<f32>> {
        let agrees = (alpha - field.theta(x, y)).cos() >= 0.0;
        let set = if agrees { &self.along } else { &self.against };
        set.iter().map(|f| f.eval(x, y)).collect()
    }
}

/// Everything needed to derive latents from a subject; regenerated from the
/// subject seed.
#[derive(Debug, Clone)]
struct SubjectModel {
    field: FieldModel,
    texture: TextureModel,
}

fn subject_model(seed: u64, spec: &FieldSpec) -> SubjectModel {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(0);
    let field = FieldModel::random(&mut rng, spec);
    rng.set_stream(3);
    let texture = TextureModel::random(&mut rng, spec);
    SubjectModel { field, texture }
}

fn random_unit(rng: &mut ChaCha8Rng, dim: usize) -> Vec<f32> {
    loop {
        let v: Vec<f32> = (0..dim).map(|_| rng.sample::<f64, _>(StandardNormal) as f32).collect();
        if v.iter().any(|x| *x != 0.0) {
            return v;
        }
    }
}

fn random_descriptor(rng: &mut ChaCha8Rng, spec: &FieldSpec) -> Descriptor {
    let vectors = spec
        .patch_types
        .iter()
        .map(|t| (*t, random_unit(rng, spec.descriptor_dim)))
        .collect();
    Descriptor::from_vectors(vectors).expect("non-zero vectors")
}

fn descriptor_from(spec: &FieldSpec, vectors: Vec<Vec<f32>>) -> Descriptor {
    Descriptor::from_vectors(spec.patch_types.iter().copied().zip(vectors).collect())
        .expect("non-zero vectors")
}

/// Adds i.i.d. Gaussian noise of the given per-component sigma to every
/// patch vector and re-normalises.
fn perturb(d: &Descriptor, sigma: f64, rng: &mut ChaCha8Rng) -> Descriptor {
    if sigma == 0.0 {
        return d.clone();
    }
    let vectors = d
        .patch_types()
        .iter()
        .enumerate()
        .map(|(slot, t)| {
            let v = d
                .vector(slot)
                .iter()
                .map(|x| x + (sigma * rng.sample::<f64, _>(StandardNormal)) as f32)
                .collect();
            (*t, v)
        })
        .collect();
    Descriptor::from_vectors(vectors).expect("non-zero vectors")
}

fn in_roi(spec: &FieldSpec, x: f64, y: f64) -> bool {
    let c = spec.center();
    (x - c.0).hypot(y - c.1) <= spec.roi_radius
}

fn field_grid(spec: &FieldSpec) -> (u32, u32) {
    (spec.width / spec.block_size, spec.height / spec.block_size)
}

fn validate_field_spec(spec: &FieldSpec) -> Result<()> {
    if spec.block_size == 0
        || spec.width < 3 * spec.block_size
        || spec.height < 3 * spec.block_size
        || !spec.width.is_multiple_of(spec.block_size)
        || !spec.height.is_multiple_of(spec.block_size)
    {
        return Err(Error::InvalidInput(
            "canvas must be a multiple of the block size and at least 3 blocks wide".into(),
        ));
    }
    if spec.patch_types.is_empty() || spec.descriptor_dim == 0 {
        return Err(Error::InvalidInput("descriptor layout is empty".into()));
    }
    if spec.roi_radius.is_nan() || spec.roi_radius <= 0.0 {
        return Err(Error::InvalidInput("roi radius must be positive".into()));
    }
    Ok(())
}

/// Builds a reference subject deterministically from `seed`.
pub fn generate_reference(seed: u64, n_minutiae: usize, spec: &FieldSpec) -> Result<SubjectRecord> {
    generate_reference_with_id(format!("subject-{seed}"), seed, n_minutiae, spec)
}

pub fn generate_reference_with_id(
    subject_id: String,
    seed: u64,
    n_minutiae: usize,
    spec: &FieldSpec,
) -> Result<SubjectRecord> {
    validate_field_spec(spec)?;
    if n_minutiae == 0 {
        return Err(Error::InvalidInput("at least one minutia is required".into()));
    }
    let model = subject_model(seed, spec);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(1);

    let (wb, hb) = field_grid(spec);
    let mut of = OrientationField::empty(spec.block_size, wb, hb);
    for by in 0..hb {
        for bx in 0..wb {
            let (x, y) = of.block_center(bx, by);
            if in_roi(spec, x, y) {
                of.set(bx, by, model.field.theta(x, y));
            }
        }
    }

    let c = spec.center();
    let budget = 2000 * n_minutiae;
    let mut minutiae: Vec<Minutia> = Vec::with_capacity(n_minutiae);
    let mut attempts = 0;
    while minutiae.len() < n_minutiae && attempts < budget {
        attempts += 1;
        let r = spec.roi_radius * rng.random::<f64>().sqrt();
        let phi = rng.random_range(0.0..2.0 * PI);
        let (x, y) = (c.0 + r * phi.cos(), c.1 + r * phi.sin());
        if minutiae.iter().any(|m| (m.x - x).hypot(m.y - y) < MIN_SEPARATION) {
            continue;
        }
        let flip = if rng.random_bool(0.5) { PI } else { 0.0 };
        minutiae.push(Minutia::true_minutia(x, y, model.field.theta(x, y) + flip));
    }
    if minutiae.len() < n_minutiae {
        return Err(Error::PlacementFailure {
            requested: n_minutiae,
            placed: minutiae.len(),
        });
    }
    let descriptors = (0..n_minutiae).map(|_| random_descriptor(&mut rng, spec)).collect();

    let vms = reference_virtual_minutiae(&of);
    let vm_desc = vms
        .iter()
        .map(|m| descriptor_from(spec, model.texture.raw(&model.field, m.x, m.y, m.alpha)))
        .collect();

    Ok(SubjectRecord {
        minutiae_template: MinutiaeTemplate {
            source_id: subject_id.clone(),
            variant: TemplateVariant::Reference,
            minutiae,
            descriptors,
            orientation_field: of,
        },
        texture_template: TextureTemplate {
            source_id: subject_id.clone(),
            side: TextureSide::Reference,
            width: spec.width,
            height: spec.height,
            block_size: spec.block_size,
            virtual_minutiae: vms,
            descriptors: vm_desc,
        },
        subject_id,
    })
}

/// Rigid motion reference → latent.
#[derive(Debug, Clone, Copy)]
struct Motion {
    rot: f64,
    sin: f64,
    cos: f64,
    c: (f64, f64),
    t: (f64, f64),
}

impl Motion {
    fn new(spec: &DistortionSpec, fs: &FieldSpec) -> Self {
        let (sin, cos) = spec.rigid_rotation.sin_cos();
        Self {
            rot: spec.rigid_rotation,
            sin,
            cos,
            c: fs.center(),
            t: spec.rigid_translation,
        }
    }

    fn forward(&self, x: f64, y: f64) -> (f64, f64) {
        let (dx, dy) = (x - self.c.0, y - self.c.1);
        (
            self.cos * dx - self.sin * dy + self.c.0 + self.t.0,
            self.sin * dx + self.cos * dy + self.c.1 + self.t.1,
        )
    }

    fn inverse(&self, x: f64, y: f64) -> (f64, f64) {
        let (dx, dy) = (x - self.c.0 - self.t.0, y - self.c.1 - self.t.1);
        (
            self.cos * dx + self.sin * dy + self.c.0,
            -self.sin * dx + self.cos * dy + self.c.1,
        )
    }
}

/// Visible part of the reference: inside the ROI and on the kept side of
/// the occluding half-plane.
#[derive(Debug, Clone, Copy)]
struct Visibility {
    dir: (f64, f64),
    cut: f64,
}

impl Visibility {
    fn projection(&self, x: f64, y: f64) -> f64 {
        x * self.dir.0 + y * self.dir.1
    }

    fn visible(&self, fs: &FieldSpec, x: f64, y: f64) -> bool {
        in_roi(fs, x, y) && self.projection(x, y) <= self.cut
    }
}

/// The latent's minutiae after occlusion, before per-template noise.
fn occlude(reference: &[Minutia], frac: f64, rng: &mut ChaCha8Rng) -> (Vec<usize>, Visibility) {
    let phi = rng.random_range(0.0..2.0 * PI);
    let mut vis = Visibility {
        dir: (phi.cos(), phi.sin()),
        cut: f64::INFINITY,
    };
    let n = reference.len();
    let drop = ((frac * n as f64).round() as usize).min(n);
    let mut order: Vec<(f64, usize)> = reference
        .iter()
        .enumerate()
        .map(|(i, m)| (vis.projection(m.x, m.y), i))
        .collect();
    order.sort_by(|a, b| b.0.total_cmp(&a.0).then(a.1.cmp(&b.1)));
    if drop == n {
        vis.cut = f64::NEG_INFINITY;
    } else if drop > 0 {
        vis.cut = 0.5 * (order[drop - 1].0 + order[drop].0);
    }
    let mut kept: Vec<usize> = order[drop..].iter().map(|(_, i)| *i).collect();
    kept.sort_unstable();
    (kept, vis)
}

fn clamp_to_canvas(fs: &FieldSpec, x: f64, y: f64) -> (f64, f64) {
    let hi_x = (fs.width as f64) - 1e-6;
    let hi_y = (fs.height as f64) - 1e-6;
    (x.clamp(0.0, hi_x), y.clamp(0.0, hi_y))
}

fn on_canvas(fs: &FieldSpec, x: f64, y: f64) -> bool {
    x >= 0.0 && y >= 0.0 && x < fs.width as f64 && y < fs.height as f64
}

#[allow(clippy::too_many_arguments)]
fn latent_minutiae_template(
    reference: &MinutiaeTemplate,
    kept: &[usize],
    vis: &Visibility,
    motion: &Motion,
    spec: &DistortionSpec,
    fs: &FieldSpec,
    of: &OrientationField,
    query_id: &str,
    variant: TemplateVariant,
    rng: &mut ChaCha8Rng,
) -> (MinutiaeTemplate, Vec<(usize, usize)>) {
    let mut minutiae = Vec::new();
    let mut descriptors = Vec::new();
    let mut map = Vec::new();
    for &ri in kept {
        let m = &reference.minutiae[ri];
        let (mut x, mut y) = motion.forward(m.x, m.y);
        if spec.position_jitter_sigma > 0.0 {
            x += spec.position_jitter_sigma * rng.sample::<f64, _>(StandardNormal);
            y += spec.position_jitter_sigma * rng.sample::<f64, _>(StandardNormal);
            (x, y) = clamp_to_canvas(fs, x, y);
        }
        let mut alpha = m.alpha + motion.rot;
        if spec.angle_jitter_sigma > 0.0 {
            alpha += spec.angle_jitter_sigma * rng.sample::<f64, _>(StandardNormal);
        }
        let d = perturb(&reference.descriptors[ri], spec.descriptor_noise_sigma, rng);
        if !on_canvas(fs, x, y) {
            continue;
        }
        map.push((minutiae.len(), ri));
        minutiae.push(Minutia::true_minutia(x, y, wrap_2pi(alpha)));
        descriptors.push(d);
    }

    let n_spurious = (spec.spurious_fraction * map.len() as f64).round() as usize;
    let mut placed = 0;
    let mut attempts = 0;
    while placed < n_spurious && attempts < 1000 * n_spurious {
        attempts += 1;
        let x = rng.random_range(0.0..fs.width as f64);
        let y = rng.random_range(0.0..fs.height as f64);
        let (rx, ry) = motion.inverse(x, y);
        if !vis.visible(fs, rx, ry) {
            continue;
        }
        let alpha = rng.random_range(0.0..2.0 * PI);
        minutiae.push(Minutia::true_minutia(x, y, alpha));
        descriptors.push(random_descriptor(rng, fs));
        placed += 1;
    }

    (
        MinutiaeTemplate {
            source_id: query_id.to_string(),
            variant,
            minutiae,
            descriptors,
            orientation_field: of.clone(),
        },
        map,
    )
}

/// Derives a degraded latent from a reference generated by
/// [`generate_reference`] with the same `subject_seed` and `fs`.
pub fn derive_latent(
    reference: &SubjectRecord,
    subject_seed: u64,
    fs: &FieldSpec,
    spec: &DistortionSpec,
) -> Result<(LatentTemplates, GroundTruth)> {
    spec.validate()?;
    validate_field_spec(fs)?;
    let model = subject_model(subject_seed, fs);
    let motion = Motion::new(spec, fs);
    let query_id = format!("{}-latent-{}", reference.subject_id, spec.seed);

    let mut shared = ChaCha8Rng::seed_from_u64(spec.seed);
    shared.set_stream(0);
    let rt = &reference.minutiae_template;
    let (kept, vis) = occlude(&rt.minutiae, spec.occlusion_fraction, &mut shared);

    let (wb, hb) = field_grid(fs);
    let mut of = OrientationField::empty(fs.block_size, wb, hb);
    for by in 0..hb {
        for bx in 0..wb {
            let (x, y) = of.block_center(bx, by);
            let (rx, ry) = motion.inverse(x, y);
            if vis.visible(fs, rx, ry) {
                of.set(bx, by, model.field.theta(rx, ry) + motion.rot);
            }
        }
    }

    let mut rng1 = ChaCha8Rng::seed_from_u64(spec.seed);
    rng1.set_stream(1);
    let mut rng2 = ChaCha8Rng::seed_from_u64(spec.seed);
    rng2.set_stream(2);
    let (mt1, map1) = latent_minutiae_template(
        rt, &kept, &vis, &motion, spec, fs, &of, &query_id, TemplateVariant::Latent1, &mut rng1,
    );
    let (mt2, _) = latent_minutiae_template(
        rt, &kept, &vis, &motion, spec, fs, &of, &query_id, TemplateVariant::Latent2, &mut rng2,
    );

    let mut rng3 = ChaCha8Rng::seed_from_u64(spec.seed);
    rng3.set_stream(3);
    let vms = latent_virtual_minutiae(&of);
    let vm_desc = vms
        .iter()
        .map(|m| {
            let (rx, ry) = motion.inverse(m.x, m.y);
            let raw = model.texture.raw(&model.field, rx, ry, m.alpha - motion.rot);
            perturb(&descriptor_from(fs, raw), spec.descriptor_noise_sigma, &mut rng3)
        })
        .collect();
    let tt = TextureTemplate {
        source_id: query_id.clone(),
        side: TextureSide::Latent,
        width: fs.width,
        height: fs.height,
        block_size: fs.block_size,
        virtual_minutiae: vms,
        descriptors: vm_desc,
    };

    let truth = GroundTruth {
        query_id: query_id.clone(),
        subject_id: reference.subject_id.clone(),
        latent_to_reference: map1,
        rigid_rotation: spec.rigid_rotation,
        rigid_translation: spec.rigid_translation,
        center: fs.center(),
    };
    Ok((LatentTemplates { query_id, mt1, mt2, tt }, truth))
}

/// Settings of a whole synthetic identification benchmark.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct BenchmarkSpec {
    pub subjects: usize,
    /// Number of latents; each is derived from subject `i mod subjects`.
    pub queries: usize,
    pub minutiae_per_subject: usize,
    pub field: FieldSpec,
    /// Degradation template; its rigid motion and seed are replaced per query
    /// when `max_translation` is set.
    pub distortion: DistortionSpec,
    pub random_rigid: bool,
    pub max_translation: f64,
    pub seed: u64,
}

impl Default for BenchmarkSpec {
    fn default() -> Self {
        Self {
            subjects: 100,
            queries: 100,
            minutiae_per_subject: 40,
            field: FieldSpec::default(),
            distortion: DistortionSpec {
                occlusion_fraction: 0.4,
                position_jitter_sigma: 3.0,
                angle_jitter_sigma: 5f64.to_radians(),
                spurious_fraction: 0.2,
                descriptor_noise_sigma: 0.1,
                ..DistortionSpec::default()
            },
            random_rigid: true,
            max_translation: 20.0,
            seed: 1,
        }
    }
}

#[derive(Debug, Clone)]
pub struct Benchmark {
    pub subjects: Vec<SubjectRecord>,
    pub queries: Vec<(LatentTemplates, GroundTruth)>,
}

/// Seed of subject `i` in a benchmark; independent of the subject count.
pub fn subject_seed(base: u64, i: usize) -> u64 {
    base.wrapping_mul(0x9E37_79B9_7F4A_7C15) ^ (i as u64).wrapping_mul(0xBF58_476D_1CE4_E5B9)
}

pub fn generate_benchmark(spec: &BenchmarkSpec) -> Result<Benchmark> {
    if spec.subjects == 0 {
        return Err(Error::InvalidInput("benchmark needs at least one subject".into()));
    }
    let subjects = (0..spec.subjects)
        .map(|i| {
            generate_reference_with_id(
                format!("S{i:05}"),
                subject_seed(spec.seed, i),
                spec.minutiae_per_subject,
                &spec.field,
            )
        })
        .collect::<Result<Vec<_>>>()?;
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    rng.set_stream(7);
    let mut queries = Vec::with_capacity(spec.queries);
    for q in 0..spec.queries {
        let si = q % spec.subjects;
        let mut d = spec.distortion;
        d.seed = rng.random();
        if spec.random_rigid {
            d = d.with_random_rigid(&mut rng, spec.max_translation);
        }
        let (mut lat, mut truth) = derive_latent(&subjects[si], subject_seed(spec.seed, si), &spec.field, &d)?;
        let qid = format!("Q{q:05}");
        for t in [&mut lat.mt1.source_id, &mut lat.mt2.source_id, &mut lat.tt.source_id] {
            *t = qid.clone();
        }
        lat.query_id = qid.clone();
        truth.query_id = qid;
        queries.push((lat, truth));
    }
    Ok(Benchmark { subjects, queries })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::codec::encode_template;
    use crate::matcher::{match_minutiae, MatcherConfig};
    use crate::model::{circular_distance, validate_minutiae_template, validate_texture_template};

    fn fs() -> FieldSpec {
        FieldSpec::default()
    }

    #[test]
    fn same_seed_same_bytes() {
        let a = generate_reference(11, 40, &fs()).unwrap();
        let b = generate_reference(11, 40, &fs()).unwrap();
        assert_eq!(
            encode_template(&a.minutiae_template.clone().into()),
            encode_template(&b.minutiae_template.clone().into())
        );
        assert_eq!(
            encode_template(&a.texture_template.clone().into()),
            encode_template(&b.texture_template.clone().into())
        );
        let c = generate_reference(12, 40, &fs()).unwrap();
        assert_ne!(a.minutiae_template.minutiae, c.minutiae_template.minutiae);
    }

    #[test]
    fn single_minutia_subject_is_valid() {
        let s = generate_reference(3, 1, &fs()).unwrap();
        assert_eq!(s.minutiae_template.minutiae.len(), 1);
        assert!(validate_minutiae_template(&s.minutiae_template).is_valid());
    }

    #[test]
    fn seed_sweep_subjects_validate() {
        for seed in 0..100 {
            let s = generate_reference(seed, 40, &fs()).unwrap();
            let r1 = validate_minutiae_template(&s.minutiae_template);
            let r2 = validate_texture_template(&s.texture_template);
            assert!(r1.is_valid(), "{seed}: {}", r1.to_json());
            assert!(r2.is_valid(), "{seed}: {}", r2.to_json());
            let ms = &s.minutiae_template.minutiae;
            for i in 0..ms.len() {
                for j in 0..i {
                    assert!((ms[i].x - ms[j].x).hypot(ms[i].y - ms[j].y) >= MIN_SEPARATION);
                }
            }
        }
    }

    #[test]
    fn impossible_density_fails_placement() {
        let e = generate_reference(1, 2000, &fs()).unwrap_err();
        assert!(matches!(e, Error::PlacementFailure { requested: 2000, .. }));
    }

    #[test]
    fn zero_spec_latent_is_the_reference() {
        let s = generate_reference(5, 30, &fs()).unwrap();
        let (lat, gt) = derive_latent(&s, 5, &fs(), &DistortionSpec::default()).unwrap();
        assert_eq!(gt.latent_to_reference, (0..30).map(|i| (i, i)).collect::<Vec<_>>());
        for (a, b) in lat.mt1.minutiae.iter().zip(&s.minutiae_template.minutiae) {
            assert!((a.x - b.x).abs() < 1e-9 && (a.y - b.y).abs() < 1e-9);
            assert!(circular_distance(a.alpha, b.alpha) < 1e-12);
        }
        assert_eq!(lat.mt1.descriptors, s.minutiae_template.descriptors);
        assert_eq!(lat.mt1.minutiae, lat.mt2.minutiae);
        assert_eq!(lat.mt1.orientation_field, s.minutiae_template.orientation_field);
    }

    #[test]
    fn occlusion_drops_the_requested_share() {
        let s = generate_reference(9, 50, &fs()).unwrap();
        let spec = DistortionSpec {
            occlusion_fraction: 0.4,
            seed: 4,
            ..Default::default()
        };
        let (lat, gt) = derive_latent(&s, 9, &fs(), &spec).unwrap();
        assert_eq!(gt.latent_to_reference.len(), 30);
        assert_eq!(lat.mt1.minutiae.len(), 30);
        let mut refs: Vec<_> = gt.latent_to_reference.iter().map(|p| p.1).collect();
        refs.dedup();
        assert_eq!(refs.len(), 30);
        assert!(validate_minutiae_template(&lat.mt1).is_valid());
        assert!(validate_texture_template(&lat.tt).is_valid());
    }

    #[test]
    fn ground_truth_alignment_maps_latent_back() {
        let s = generate_reference(2, 20, &fs()).unwrap();
        let spec = DistortionSpec {
            rigid_rotation: 2.5,
            rigid_translation: (12.0, -9.0),
            seed: 3,
            ..Default::default()
        };
        let (lat, gt) = derive_latent(&s, 2, &fs(), &spec).unwrap();
        assert_eq!(gt.rigid_rotation, 2.5);
        assert_eq!(gt.rigid_translation, (12.0, -9.0));
        let a = gt.alignment();
        for (li, ri) in &gt.latent_to_reference {
            let l = &lat.mt1.minutiae[*li];
            let r = &s.minutiae_template.minutiae[*ri];
            let (x, y) = a.apply(l.x, l.y);
            assert!((x - r.x).abs() < 1e-9 && (y - r.y).abs() < 1e-9);
            assert!(circular_distance(l.alpha + a.delta_alpha, r.alpha) < 1e-9);
        }
    }

    #[test]
    fn determinism_of_latents() {
        let s = generate_reference(7, 40, &fs()).unwrap();
        let spec = BenchmarkSpec::default().distortion;
        let a = derive_latent(&s, 7, &fs(), &DistortionSpec { seed: 99, ..spec }).unwrap();
        let b = derive_latent(&s, 7, &fs(), &DistortionSpec { seed: 99, ..spec }).unwrap();
        assert_eq!(a, b);
        assert_ne!(a.0.mt1.minutiae, a.0.mt2.minutiae);
    }

    #[test]
    fn mild_latents_mostly_match_ground_truth() {
        let (mut agree, mut total) = (0usize, 0usize);
        for seed in 0..20u64 {
            let s = generate_reference(seed, 40, &fs()).unwrap();
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let spec = DistortionSpec {
                position_jitter_sigma: 2.0,
                angle_jitter_sigma: 3f64.to_radians(),
                spurious_fraction: 0.1,
                seed: 1000 + seed,
                ..Default::default()
            }
            .with_random_rigid(&mut rng, 20.0);
            let (lat, gt) = derive_latent(&s, seed, &fs(), &spec).unwrap();
            let c = match_minutiae(&lat.mt1, &s.minutiae_template, &MatcherConfig::default()).unwrap();
            for p in &c.pairs {
                total += 1;
                agree += usize::from(gt.reference_index(p.i1) == Some(p.i2));
            }
        }
        let rate = agree as f64 / total as f64;
        assert!(rate >= 0.9, "agreement {rate}");
    }

    #[test]
    fn texture_pairs_follow_field_direction() {
        let s = generate_reference(4, 10, &fs()).unwrap();
        let (lat, _) = derive_latent(&s, 4, &fs(), &DistortionSpec::default()).unwrap();
        let rt = &s.texture_template;
        let m = &rt.virtual_minutiae[20];
        let k = lat
            .tt
            .virtual_minutiae
            .iter()
            .position(|v| v.x == m.x && v.y == m.y)
            .unwrap();
        let along = crate::descriptor::descriptor_similarity(&lat.tt.descriptors[k], &rt.descriptors[20]).unwrap();
        let against = crate::descriptor::descriptor_similarity(&lat.tt.descriptors[k + 1], &rt.descriptors[20]).unwrap();
        assert!((along - 1.0).abs() < 1e-5);
        assert!(against < 0.5);
    }
}
