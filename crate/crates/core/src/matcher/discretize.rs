use super::{CandidatePair, Correspondence, CorrespondenceSet, Stage};

/// Greedy one-to-one projection of a relaxed assignment vector: repeatedly
/// take the largest remaining entry above `threshold` (ties to the lower
/// index) and keep it unless its latent or reference minutia is taken.
pub fn discretize(y: &[f64], pairs: &[CandidatePair], threshold: f64, stage: Stage) -> CorrespondenceSet {
    assert_eq!(y.len(), pairs.len(), "one relaxed value per candidate pair");
    let mut order: Vec<usize> = (0..y.len()).collect();
    order.sort_by(|a, b| y[*b].total_cmp(&y[*a]).then(a.cmp(b)));
    let mut used_l = std::collections::HashSet::new();
    let mut used_r = std::collections::HashSet::new();
    let mut out = Vec::new();
    for idx in order {
        if y[idx] <= threshold {
            break;
        }
        let p = &pairs[idx];
        if used_l.contains(&p.i1) || used_r.contains(&p.i2) {
            continue;
        }
        used_l.insert(p.i1);
        used_r.insert(p.i2);
        out.push(Correspondence {
            i1: p.i1,
            i2: p.i2,
            sim: p.sim,
            candidate: idx,
        });
    }
    CorrespondenceSet { pairs: out, stage }
}
