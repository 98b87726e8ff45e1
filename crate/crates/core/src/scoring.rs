//! Comparison scores built on top of the correspondence search.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::matcher::{match_minutiae, CorrespondenceSet, MatcherConfig, Stage};
use crate::model::{wrap_pi, Minutia, MinutiaeTemplate, OrientationField, TextureTemplate};

/// Rigid transform taking latent coordinates onto the reference:
/// `p_r = R(delta_alpha) · p_l + (delta_x, delta_y)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Alignment {
    /// Rotation in `(−π, π]`.
    pub delta_alpha: f64,
    pub delta_x: f64,
    pub delta_y: f64,
}

impl Alignment {
    pub const IDENTITY: Alignment = Alignment {
        delta_alpha: 0.0,
        delta_x: 0.0,
        delta_y: 0.0,
    };

    pub fn apply(&self, x: f64, y: f64) -> (f64, f64) {
        let (s, c) = self.delta_alpha.sin_cos();
        (c * x - s * y + self.delta_x, s * x + c * y + self.delta_y)
    }
}

/// Maps an angle into `(−π, π]`.
pub fn wrap_signed(a: f64) -> f64 {
    let r = crate::model::wrap_2pi(a);
    if r > PI {
        r - 2.0 * PI
    } else {
        r
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FusionWeights {
    pub mt1: f64,
    pub mt2: f64,
    pub tt: f64,
}

impl Default for FusionWeights {
    fn default() -> Self {
        Self {
            mt1: 1.0,
            mt2: 1.0,
            tt: 2.0,
        }
    }
}

/// All component scores of one latent × subject comparison.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ScoreBreakdown {
    pub s_mt1: f64,
    pub s_mt2: f64,
    pub s_tt: f64,
    pub s_final: f64,
    pub n_corr_1: usize,
    pub n_corr_2: usize,
    pub n_corr_tt: usize,
}

/// Matcher settings for both template kinds plus the fusion weights.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ScoringConfig {
    pub minutiae: MatcherConfig,
    pub texture: MatcherConfig,
    pub weights: FusionWeights,
}

impl Default for ScoringConfig {
    fn default() -> Self {
        Self {
            minutiae: MatcherConfig::default(),
            texture: MatcherConfig::texture(),
            weights: FusionWeights::default(),
        }
    }
}

/// Sum of descriptor similarities over matched pairs.
pub fn minutiae_similarity(corr: &CorrespondenceSet) -> f64 {
    corr.pairs.iter().map(|p| p.sim).sum()
}

/// Rotation from the circular mean of per-pair direction differences, then
/// translation as the mean residual.
pub fn estimate_alignment(
    corr: &CorrespondenceSet,
    latent: &[Minutia],
    reference: &[Minutia],
) -> Result<Alignment> {
    if corr.is_empty() {
        return Err(Error::EmptyCorrespondences);
    }
    let (mut s, mut c) = (0.0, 0.0);
    for p in &corr.pairs {
        let d = reference[p.i2].alpha - latent[p.i1].alpha;
        s += d.sin();
        c += d.cos();
    }
    let delta_alpha = wrap_signed(s.atan2(c));
    let (sa, ca) = delta_alpha.sin_cos();
    let n = corr.len() as f64;
    let (mut dx, mut dy) = (0.0, 0.0);
    for p in &corr.pairs {
        let (l, r) = (&latent[p.i1], &reference[p.i2]);
        dx += r.x - l.x * ca + l.y * sa;
        dy += r.y - l.y * ca - l.x * sa;
    }
    Ok(Alignment {
        delta_alpha,
        delta_x: dx / n,
        delta_y: dy / n,
    })
}

/// Coherence of orientation differences over overlapping blocks after
/// mapping latent block centres into the reference field. Zero without
/// overlap.
pub fn ridge_flow_similarity(of_l: &OrientationField, of_r: &OrientationField, a: &Alignment) -> f64 {
    let (mut re, mut im) = (0.0, 0.0);
    let mut k = 0usize;
    for (bx, by, theta_l) in of_l.masked_blocks() {
        let (cx, cy) = of_l.block_center(bx, by);
        let (x, y) = a.apply(cx, cy);
        let Some((rx, ry)) = of_r.block_at(x, y) else {
            continue;
        };
        let Some(theta_r) = of_r.get(rx, ry) else {
            continue;
        };
        let o1 = wrap_pi(theta_l + a.delta_alpha);
        let d = 2.0 * (o1 - theta_r);
        re += d.cos();
        im += d.sin();
        k += 1;
    }
    if k == 0 {
        return 0.0;
    }
    (re.hypot(im) / k as f64).min(1.0)
}

/// `S_MT = S_M · S_O` together with the correspondences it came from.
pub fn minutiae_template_similarity(
    lt: &MinutiaeTemplate,
    rt: &MinutiaeTemplate,
    cfg: &MatcherConfig,
) -> Result<(f64, CorrespondenceSet)> {
    let corr = match match_minutiae(lt, rt, cfg) {
        Ok(c) => c,
        Err(Error::EmptyTemplate) => return Ok((0.0, CorrespondenceSet::empty(Stage::SecondOrder))),
        Err(e) => return Err(e),
    };
    if corr.is_empty() {
        return Ok((0.0, corr));
    }
    let s_m = minutiae_similarity(&corr);
    let align = estimate_alignment(&corr, &lt.minutiae, &rt.minutiae)?;
    let s_o = ridge_flow_similarity(&lt.orientation_field, &rt.orientation_field, &align);
    Ok((s_m * s_o, corr))
}

/// Sum of similarities of matched virtual minutiae; no ridge-flow factor.
pub fn texture_template_similarity(
    lt: &TextureTemplate,
    rt: &TextureTemplate,
    cfg: &MatcherConfig,
) -> Result<(f64, CorrespondenceSet)> {
    match match_minutiae(lt, rt, cfg) {
        Ok(c) => Ok((minutiae_similarity(&c), c)),
        Err(Error::EmptyTemplate) => Ok((0.0, CorrespondenceSet::empty(Stage::SecondOrder))),
        Err(e) => Err(e),
    }
}

pub fn fuse_scores(s_mt1: f64, s_mt2: f64, s_tt: f64, w: &FusionWeights) -> f64 {
    w.mt1 * s_mt1 + w.mt2 * s_mt2 + w.tt * s_tt
}

/// Scores the three latent templates against one reference subject.
pub fn compare(
    mt1: &MinutiaeTemplate,
    mt2: &MinutiaeTemplate,
    tt: &TextureTemplate,
    reference_mt: &MinutiaeTemplate,
    reference_tt: &TextureTemplate,
    cfg: &ScoringConfig,
) -> Result<ScoreBreakdown> {
    let (s_mt1, c1) = minutiae_template_similarity(mt1, reference_mt, &cfg.minutiae)?;
    let (s_mt2, c2) = minutiae_template_similarity(mt2, reference_mt, &cfg.minutiae)?;
    let (s_tt, ct) = texture_template_similarity(tt, reference_tt, &cfg.texture)?;
    Ok(ScoreBreakdown {
        s_mt1,
        s_mt2,
        s_tt,
        s_final: fuse_scores(s_mt1, s_mt2, s_tt, &cfg.weights),
        n_corr_1: c1.len(),
        n_corr_2: c2.len(),
        n_corr_tt: ct.len(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::matcher::Correspondence;
    use crate::model::circular_distance;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn corr(sims: &[f64]) -> CorrespondenceSet {
        CorrespondenceSet {
            pairs: sims
                .iter()
                .enumerate()
                .map(|(i, s)| Correspondence { i1: i, i2: i, sim: *s, candidate: i })
                .collect(),
            stage: Stage::SecondOrder,
        }
    }

    #[test]
    fn minutiae_similarity_examples() {
        assert_eq!(minutiae_similarity(&corr(&[])), 0.0);
        assert!((minutiae_similarity(&corr(&[1.0, 0.9, 0.8])) - 2.7).abs() < 1e-12);
        let c = corr(&[0.4, 0.3, 0.2]);
        let mut less = c.clone();
        less.pairs.remove(1);
        assert!((minutiae_similarity(&c) - minutiae_similarity(&less) - 0.3).abs() < 1e-12);
    }

    fn transform(ms: &[Minutia], rot: f64, tx: f64, ty: f64) -> Vec<Minutia> {
        let (s, c) = rot.sin_cos();
        ms.iter()
            .map(|m| Minutia::true_minutia(c * m.x - s * m.y + tx, s * m.x + c * m.y + ty, m.alpha + rot))
            .collect()
    }

    #[test]
    fn pure_translation_is_exact() {
        let lat: Vec<_> = (0..5).map(|i| Minutia::true_minutia(10.0 * i as f64, 7.0 * i as f64, 0.3 * i as f64)).collect();
        let rf = transform(&lat, 0.0, 10.0, -5.0);
        let a = estimate_alignment(&corr(&[1.0; 5]), &lat, &rf).unwrap();
        assert_eq!(a.delta_alpha, 0.0);
        assert!((a.delta_x - 10.0).abs() < 1e-12 && (a.delta_y + 5.0).abs() < 1e-12);
    }

    #[test]
    fn equal_angles_give_that_rotation() {
        let lat: Vec<_> = (0..4).map(|i| Minutia::true_minutia(5.0 * i as f64, 1.0, 0.5 * i as f64)).collect();
        let rf: Vec<_> = lat.iter().map(|m| Minutia::true_minutia(m.x, m.y, m.alpha + PI / 6.0)).collect();
        let a = estimate_alignment(&corr(&[1.0; 4]), &lat, &rf).unwrap();
        assert!((a.delta_alpha - PI / 6.0).abs() < 1e-15);
    }

    #[test]
    fn random_rigid_transform_is_recovered() {
        let mut rng = ChaCha8Rng::seed_from_u64(42);
        for _ in 0..50 {
            let lat: Vec<_> = (0..10)
                .map(|_| Minutia::true_minutia(rng.random_range(0.0..300.0), rng.random_range(0.0..300.0), rng.random_range(0.0..std::f64::consts::TAU)))
                .collect();
            let rot = rng.random_range(-PI..PI);
            let (tx, ty) = (rng.random_range(-50.0..50.0), rng.random_range(-50.0..50.0));
            let rf = transform(&lat, rot, tx, ty);
            let a = estimate_alignment(&corr(&[1.0; 10]), &lat, &rf).unwrap();
            assert!(circular_distance(a.delta_alpha, rot) < 1e-9);
            assert!((a.delta_x - tx).abs() < 1e-9 && (a.delta_y - ty).abs() < 1e-9);
            assert!(a.delta_alpha > -PI && a.delta_alpha <= PI);
        }
        assert!(matches!(
            estimate_alignment(&corr(&[]), &[], &[]),
            Err(Error::EmptyCorrespondences)
        ));
    }

    fn field(theta: impl Fn(u32, u32) -> f64) -> OrientationField {
        let mut of = OrientationField::empty(16, 20, 20);
        for by in 0..20 {
            for bx in 0..20 {
                of.set(bx, by, theta(bx, by));
            }
        }
        of
    }

    #[test]
    fn ridge_flow_identity_and_constant_offset() {
        let of = field(|x, y| 0.1 * x as f64 + 0.05 * y as f64);
        assert!((ridge_flow_similarity(&of, &of, &Alignment::IDENTITY) - 1.0).abs() < 1e-12);
        let shifted = field(|x, y| 0.1 * x as f64 + 0.05 * y as f64 + 0.7);
        assert!((ridge_flow_similarity(&of, &shifted, &Alignment::IDENTITY) - 1.0).abs() < 1e-12);
    }

    #[test]
    fn ridge_flow_without_overlap_is_zero() {
        let of = field(|_, _| 0.3);
        let far = Alignment { delta_alpha: 0.0, delta_x: 10_000.0, delta_y: 0.0 };
        assert_eq!(ridge_flow_similarity(&of, &of, &far), 0.0);
    }

    #[test]
    fn ridge_flow_random_differences_is_small() {
        // Monte Carlo oracle: |Σ e^{iψ_k}| / K for K = 400 uniform phases has
        // mean ≈ sqrt(π/(4K)) ≈ 0.044; 0.15 is > 5 standard deviations out.
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let mut worst: f64 = 0.0;
        for _ in 0..200 {
            let a: Vec<f64> = (0..400).map(|_| rng.random_range(0.0..PI)).collect();
            let b: Vec<f64> = (0..400).map(|_| rng.random_range(0.0..PI)).collect();
            let la = field(|x, y| a[(y * 20 + x) as usize]);
            let lb = field(|x, y| b[(y * 20 + x) as usize]);
            worst = worst.max(ridge_flow_similarity(&la, &lb, &Alignment::IDENTITY));
        }
        assert!(worst < 0.15, "worst {worst}");
    }

    #[test]
    fn ridge_flow_transports_orientation() {
        // latent field rotated by -30°, aligned back by +30°
        let rot = 30f64.to_radians();
        let rf = field(|_, _| 1.0);
        let lat = field(|_, _| 1.0 - rot);
        let a = Alignment { delta_alpha: rot, delta_x: 0.0, delta_y: 0.0 };
        let s = ridge_flow_similarity(&lat, &rf, &a);
        assert!((s - 1.0).abs() < 1e-12);
    }

    #[test]
    fn fusion_examples() {
        let w = FusionWeights::default();
        assert_eq!(fuse_scores(1.0, 1.0, 1.0, &w), 4.0);
        assert_eq!(fuse_scores(0.0, 0.0, 0.0, &w), 0.0);
        assert_eq!(fuse_scores(2.5, 1.0, 3.0, &w), 9.5);
    }

    proptest::proptest! {
        #[test]
        fn fusion_is_monotone(a in 0.0..50.0f64, b in 0.0..50.0f64, c in 0.0..50.0f64, d in 0.0..5.0f64, which in 0usize..3) {
            let w = FusionWeights::default();
            let base = fuse_scores(a, b, c, &w);
            let bumped = match which {
                0 => fuse_scores(a + d, b, c, &w),
                1 => fuse_scores(a, b + d, c, &w),
                _ => fuse_scores(a, b, c + d, &w),
            };
            proptest::prop_assert!(bumped >= base);
        }
    }
}
