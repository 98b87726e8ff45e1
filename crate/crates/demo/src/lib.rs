//! WebAssembly bindings for the browser demo in `www/`.
//!
//! Results are returned as JSON strings or flat numeric arrays so the page
//! needs no extra glue.

use std::f64::consts::PI;

use serde::Serialize;
use wasm_bindgen::prelude::*;

use latentid::ingest::{estimate_orientation_field_unchecked, GrayImage};
use latentid::matcher::{match_minutiae, truncated_sigmoid, MatcherConfig, SigmoidParams};
use latentid::scoring::{estimate_alignment, minutiae_similarity, ridge_flow_similarity};
use latentid::synth::{derive_latent, generate_reference, DistortionSpec, FieldSpec};

fn grating(size: u32, angle_deg: f64, wavelength: f64, curvature: f64) -> GrayImage {
    let c0 = size as f64 / 2.0;
    GrayImage::from_fn(size, size, |x, y| {
        let a = angle_deg.to_radians() + curvature * ((x - c0) / c0) * ((y - c0) / c0);
        let (s, c) = a.sin_cos();
        128.0 + 100.0 * (2.0 * PI * (-(x - c0) * s + (y - c0) * c) / wavelength.max(2.0)).cos()
    })
}

/// Grayscale pixels (row-major, `size × size`) of a sinusoidal ridge pattern.
#[wasm_bindgen]
pub fn ridge_image(size: u32, angle_deg: f64, wavelength: f64, curvature: f64) -> Vec<u8> {
    grating(size, angle_deg, wavelength, curvature).pixels
}

#[derive(Serialize)]
struct FieldView {
    block_size: u32,
    width_blocks: u32,
    height_blocks: u32,
    theta: Vec<f64>,
    mask: Vec<bool>,
}

/// Block orientation field estimated from [`ridge_image`], as JSON.
#[wasm_bindgen]
pub fn orientation_field(size: u32, angle_deg: f64, wavelength: f64, curvature: f64, block_size: u32) -> String {
    let img = grating(size, angle_deg, wavelength, curvature);
    match estimate_orientation_field_unchecked(&img, block_size) {
        Ok(of) => serde_json::to_string(&FieldView {
            block_size: of.block_size,
            width_blocks: of.width_blocks,
            height_blocks: of.height_blocks,
            theta: of.theta,
            mask: of.mask,
        })
        .expect("field serialises"),
        Err(e) => serde_json::json!({ "error": e.to_string() }).to_string(),
    }
}

/// Samples the truncated sigmoid on `[0, v_max]`.
#[wasm_bindgen]
pub fn sigmoid_curve(mu: f64, tau: f64, t: f64, v_max: f64, samples: u32) -> Vec<f64> {
    let p = SigmoidParams { mu, tau, t };
    let n = samples.max(2);
    (0..n)
        .map(|i| truncated_sigmoid(v_max * i as f64 / (n - 1) as f64, &p))
        .collect()
}

#[derive(Serialize)]
struct Point {
    x: f64,
    y: f64,
    alpha: f64,
}

#[derive(Serialize)]
struct MatchView {
    reference: Vec<Point>,
    latent: Vec<Point>,
    /// `[latent index, reference index, correct]` per matched pair.
    pairs: Vec<(usize, usize, bool)>,
    s_m: f64,
    s_o: f64,
    s_mt: f64,
    impostor_s_mt: f64,
    estimated: Option<[f64; 3]>,
    truth: [f64; 3],
    width: u32,
    height: u32,
}

fn points(ms: &[latentid::Minutia]) -> Vec<Point> {
    ms.iter().map(|m| Point { x: m.x, y: m.y, alpha: m.alpha }).collect()
}

/// Generates a subject, degrades a latent from it, matches the two and
/// returns everything needed to draw the result, as JSON.
#[wasm_bindgen]
#[allow(clippy::too_many_arguments)]
pub fn synthetic_match(
    seed: u32,
    n_minutiae: u32,
    rotation_deg: f64,
    tx: f64,
    ty: f64,
    occlusion: f64,
    jitter: f64,
    spurious: f64,
) -> String {
    let run = || -> latentid::Result<MatchView> {
        let fs = FieldSpec::default();
        let seed = seed as u64;
        let subject = generate_reference(seed, n_minutiae.max(1) as usize, &fs)?;
        let spec = DistortionSpec {
            occlusion_fraction: occlusion.clamp(0.0, 1.0),
            position_jitter_sigma: jitter.max(0.0),
            angle_jitter_sigma: (jitter.max(0.0) * 1.5).to_radians(),
            spurious_fraction: spurious.clamp(0.0, 1.0),
            rigid_rotation: rotation_deg.to_radians(),
            rigid_translation: (tx, ty),
            descriptor_noise_sigma: 0.1,
            seed: seed ^ 0x5eed,
        };
        let (lat, gt) = derive_latent(&subject, seed, &fs, &spec)?;
        let rt = &subject.minutiae_template;
        let cfg = MatcherConfig::default();
        let corr = match_minutiae(&lat.mt1, rt, &cfg)?;
        let s_m = minutiae_similarity(&corr);
        let (estimated, s_o) = match estimate_alignment(&corr, &lat.mt1.minutiae, &rt.minutiae) {
            Ok(a) => (
                Some([a.delta_alpha.to_degrees(), a.delta_x, a.delta_y]),
                ridge_flow_similarity(&lat.mt1.orientation_field, &rt.orientation_field, &a),
            ),
            Err(_) => (None, 0.0),
        };
        let other = generate_reference(seed.wrapping_add(1_000_003), n_minutiae.max(1) as usize, &fs)?;
        let impostor_s_mt =
            latentid::scoring::minutiae_template_similarity(&lat.mt1, &other.minutiae_template, &cfg)?.0;
        let t = gt.alignment();
        Ok(MatchView {
            reference: points(&rt.minutiae),
            latent: points(&lat.mt1.minutiae),
            pairs: corr
                .pairs
                .iter()
                .map(|p| (p.i1, p.i2, gt.reference_index(p.i1) == Some(p.i2)))
                .collect(),
            s_m,
            s_o,
            s_mt: s_m * s_o,
            impostor_s_mt,
            estimated,
            truth: [t.delta_alpha.to_degrees(), t.delta_x, t.delta_y],
            width: fs.width,
            height: fs.height,
        })
    };
    match run() {
        Ok(v) => serde_json::to_string(&v).expect("view serialises"),
        Err(e) => serde_json::json!({ "error": e.to_string() }).to_string(),
    }
}
