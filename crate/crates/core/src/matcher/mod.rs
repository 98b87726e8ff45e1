//! Graph-based minutiae correspondence.
//!
//! Candidate correspondences come from descriptor similarity. A pairwise
//! (second-order) stage removes most false candidates; a triplet
//! (third-order) stage then refines the survivors. Each stage relaxes the
//! assignment to a principal eigenvector by power iteration and projects it
//! back onto a one-to-one matching.

pub mod compat;
pub mod discretize;
pub mod features;
pub mod power;
pub mod sigmoid;

use serde::{Deserialize, Serialize};

pub use compat::{build_h2, build_h3, h2_entry, h3_entry, H2Matrix, H3Tensor};
pub use discretize::discretize;
pub use features::{pair_feature, triplet_feature, PairFeature, TripletFeature};
pub use power::{
    power_iteration_2, power_iteration_2_with, power_iteration_3, power_iteration_3_with,
    PowerOutcome, PowerSettings,
};
pub use sigmoid::{truncated_sigmoid, SigmoidParams};

use crate::descriptor::{select_top_pairs, similarity_matrix};
use crate::error::{Error, Result};
use crate::model::MatchSide;

/// A latent↔reference minutia pairing proposed by descriptor similarity.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CandidatePair {
    pub i1: usize,
    pub i2: usize,
    pub sim: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Stage {
    SecondOrder,
    ThirdOrder,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Correspondence {
    pub i1: usize,
    pub i2: usize,
    pub sim: f64,
    /// Index into the candidate list of the stage that produced it.
    pub candidate: usize,
}

/// One-to-one set of matched minutiae.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CorrespondenceSet {
    pub pairs: Vec<Correspondence>,
    pub stage: Stage,
}

impl CorrespondenceSet {
    pub fn empty(stage: Stage) -> Self {
        Self {
            pairs: Vec::new(),
            stage,
        }
    }

    pub fn len(&self) -> usize {
        self.pairs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.pairs.is_empty()
    }

    pub fn index_pairs(&self) -> Vec<(usize, usize)> {
        self.pairs.iter().map(|p| (p.i1, p.i2)).collect()
    }

    pub fn is_one_to_one(&self) -> bool {
        let mut l = std::collections::HashSet::new();
        let mut r = std::collections::HashSet::new();
        self.pairs.iter().all(|p| l.insert(p.i1) && r.insert(p.i2))
    }
}

/// Tunables of the correspondence search.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct MatcherConfig {
    /// Number of descriptor-ranked candidates kept.
    pub top_n: usize,
    pub euclidean: SigmoidParams,
    pub directional: SigmoidParams,
    /// Discretisation threshold of the pairwise stage, relative to `max(Y)`.
    pub second_order_threshold: f64,
    /// Discretisation threshold of the triplet stage, relative to `max(Y)`.
    pub third_order_threshold: f64,
    pub max_iterations: usize,
    pub tolerance: f64,
}

pub const MINUTIAE_TOP_N: usize = 120;
pub const TEXTURE_TOP_N: usize = 200;

impl Default for MatcherConfig {
    fn default() -> Self {
        Self {
            top_n: MINUTIAE_TOP_N,
            euclidean: SigmoidParams::EUCLIDEAN,
            directional: SigmoidParams::DIRECTIONAL,
            second_order_threshold: 0.2,
            third_order_threshold: 0.1,
            max_iterations: 100,
            tolerance: 1e-6,
        }
    }
}

impl MatcherConfig {
    /// Defaults for virtual-minutiae (texture) matching.
    pub fn texture() -> Self {
        Self {
            top_n: TEXTURE_TOP_N,
            ..Self::default()
        }
    }

    pub fn power_settings(&self) -> PowerSettings {
        PowerSettings {
            max_iterations: self.max_iterations,
            tolerance: self.tolerance,
        }
    }
}

fn max_of(y: &[f64]) -> f64 {
    y.iter().copied().fold(0.0, f64::max)
}

/// Pairwise stage only: candidates → H² → power iteration → discretisation.
pub fn second_order_stage(
    pairs: &[CandidatePair],
    latent: &[crate::model::Minutia],
    reference: &[crate::model::Minutia],
    cfg: &MatcherConfig,
) -> Result<CorrespondenceSet> {
    let h2 = build_h2(pairs, latent, reference, &cfg.euclidean, &cfg.directional);
    let y = power_iteration_2_with(&h2, cfg.power_settings())?.y;
    let t = cfg.second_order_threshold * max_of(&y);
    Ok(discretize(&y, pairs, t, Stage::SecondOrder))
}

/// Full correspondence search between a latent and a reference template.
///
/// An empty result means no geometrically consistent set was found. When the
/// pairwise stage keeps fewer than three correspondences the triplet stage
/// is skipped.
pub fn match_minutiae<L, R>(lt: &L, rt: &R, cfg: &MatcherConfig) -> Result<CorrespondenceSet>
where
    L: MatchSide + ?Sized,
    R: MatchSide + ?Sized,
{
    let (latent, reference) = (lt.points(), rt.points());
    if latent.is_empty() || reference.is_empty() {
        return Err(Error::EmptyTemplate);
    }
    let sim = similarity_matrix(lt, rt)?;
    let pairs = select_top_pairs(&sim, cfg.top_n);

    let second = match second_order_stage(&pairs, latent, reference, cfg) {
        Ok(c) => c,
        Err(Error::ZeroMatrix) => return Ok(CorrespondenceSet::empty(Stage::SecondOrder)),
        Err(e) => return Err(e),
    };
    if second.len() < 3 {
        return Ok(canonical(second));
    }

    let mut survivors: Vec<CandidatePair> = second
        .pairs
        .iter()
        .map(|c| CandidatePair {
            i1: c.i1,
            i2: c.i2,
            sim: c.sim,
        })
        .collect();
    // index order, so the tensor layout depends only on which pairs survived
    survivors.sort_by_key(|p| (p.i1, p.i2));
    let h3 = build_h3(&survivors, latent, reference, &cfg.euclidean, &cfg.directional);
    let y = match power_iteration_3_with(&h3, cfg.power_settings()) {
        Ok(o) => o.y,
        Err(Error::ZeroTensor) => return Ok(CorrespondenceSet::empty(Stage::ThirdOrder)),
        Err(e) => return Err(e),
    };
    let t = cfg.third_order_threshold * max_of(&y);
    Ok(canonical(discretize(&y, &survivors, t, Stage::ThirdOrder)))
}

/// Reports pairs in index order so that rounding-level differences in the
/// relaxed solution cannot change the output sequence.
fn canonical(mut c: CorrespondenceSet) -> CorrespondenceSet {
    c.pairs.sort_by_key(|p| (p.i1, p.i2));
    c
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{Descriptor, Minutia, MinutiaeTemplate, OrientationField, TemplateVariant};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;
    use std::f64::consts::TAU;

    fn random_template(n: usize, seed: u64) -> MinutiaeTemplate {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut minutiae: Vec<Minutia> = Vec::new();
        while minutiae.len() < n {
            let (x, y) = (rng.random_range(40.0..260.0), rng.random_range(40.0..260.0));
            if minutiae.iter().all(|m| (m.x - x).hypot(m.y - y) > 12.0) {
                minutiae.push(Minutia::true_minutia(x, y, rng.random_range(0.0..TAU)));
            }
        }
        let descriptors = (0..n)
            .map(|_| {
                let v: Vec<f32> = (0..32).map(|_| rng.random_range(-1.0..1.0)).collect();
                Descriptor::from_vectors(vec![(0, v)]).unwrap()
            })
            .collect();
        MinutiaeTemplate {
            source_id: format!("s{seed}"),
            variant: TemplateVariant::Reference,
            minutiae,
            descriptors,
            orientation_field: OrientationField::empty(16, 19, 19),
        }
    }

    #[test]
    fn self_match_recovers_identity() {
        let t = random_template(20, 5);
        let c = match_minutiae(&t, &t, &MatcherConfig::default()).unwrap();
        assert_eq!(c.index_pairs(), (0..20).map(|i| (i, i)).collect::<Vec<_>>());
        assert_eq!(c.stage, Stage::ThirdOrder);
    }

    #[test]
    fn rigid_copy_matches_like_self() {
        let t = random_template(20, 8);
        let (s, co) = 30f64.to_radians().sin_cos();
        let mut moved = t.clone();
        for m in &mut moved.minutiae {
            *m = Minutia::true_minutia(co * m.x - s * m.y + 15.0, s * m.x + co * m.y - 7.0, m.alpha + 30f64.to_radians());
        }
        let cfg = MatcherConfig::default();
        let a = match_minutiae(&t, &t, &cfg).unwrap();
        let b = match_minutiae(&moved, &t, &cfg).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn empty_template_is_an_error() {
        let t = random_template(5, 1);
        let mut e = t.clone();
        e.minutiae.clear();
        e.descriptors.clear();
        assert!(matches!(match_minutiae(&e, &t, &MatcherConfig::default()), Err(Error::EmptyTemplate)));
    }

    #[test]
    fn unrelated_templates_match_few() {
        let a = random_template(25, 100);
        let b = random_template(25, 200);
        let genuine = match_minutiae(&a, &a, &MatcherConfig::default()).unwrap();
        let impostor = match_minutiae(&a, &b, &MatcherConfig::default()).unwrap();
        assert!(impostor.is_one_to_one());
        assert!(impostor.len() < genuine.len());
    }
}
