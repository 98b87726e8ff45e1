//! CMC evaluation, candidate-list fusion and patch-type selection.

use std::collections::{BTreeMap, HashMap};

use serde::{Deserialize, Serialize};

use crate::db::{Candidate, CandidateList, Searcher};
use crate::error::{Error, Result};
use crate::model::{LatentTemplates, PatchTypeId, SubjectRecord};

/// Rank-k identification rates for k = 1..=K.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CmcCurve {
    pub rates: Vec<f64>,
    pub queries: usize,
}

impl CmcCurve {
    /// Rate at 1-based rank `k`; ranks beyond the curve saturate.
    pub fn at(&self, k: usize) -> f64 {
        if k == 0 || self.rates.is_empty() {
            return 0.0;
        }
        self.rates[(k - 1).min(self.rates.len() - 1)]
    }

    pub fn to_csv(&self) -> String {
        let mut s = String::from("rank,rate\n");
        for (i, r) in self.rates.iter().enumerate() {
            s.push_str(&format!("{},{}\n", i + 1, r));
        }
        s
    }
}

/// Fraction of queries whose mate appears at rank ≤ k, for each k ≤ `k_max`.
pub fn compute_cmc(
    lists: &[CandidateList],
    truth: &HashMap<String, String>,
    k_max: usize,
) -> Result<CmcCurve> {
    let mut hits = vec![0usize; k_max];
    for l in lists {
        let mate = truth
            .get(&l.query_id)
            .ok_or_else(|| Error::MissingTruth(l.query_id.clone()))?;
        if let Some(r) = l.rank_of(mate) {
            for h in hits.iter_mut().skip(r - 1) {
                *h += 1;
            }
        }
    }
    let n = lists.len();
    let rates = hits
        .into_iter()
        .map(|h| if n == 0 { 0.0 } else { h as f64 / n as f64 })
        .collect();
    Ok(CmcCurve { rates, queries: n })
}

pub const DEFAULT_BORDA_LIST_LEN: usize = 100;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum FusionMode {
    /// Min-max normalise each list, then add with equal weights.
    ScoreEqualWeight,
    /// A candidate at rank r of a top-`list_len` list earns `list_len − r`.
    Borda { list_len: usize },
}

fn min_max(list: &CandidateList) -> HashMap<&str, f64> {
    let (lo, hi) = list
        .entries
        .iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), c| (lo.min(c.score), hi.max(c.score)));
    list.entries
        .iter()
        .map(|c| {
            let v = if hi > lo { (c.score - lo) / (hi - lo) } else { 1.0 };
            (c.subject_id.as_str(), v)
        })
        .collect()
}

fn borda(list: &CandidateList, len: usize) -> HashMap<&str, f64> {
    list.entries
        .iter()
        .take(len)
        .enumerate()
        .map(|(i, c)| (c.subject_id.as_str(), (len - (i + 1)) as f64))
        .collect()
}

/// Combines our candidate list with one from another matcher. Candidates
/// present in only one list get nothing from the other.
pub fn fuse_external_scores(
    ours: &CandidateList,
    theirs: &CandidateList,
    mode: FusionMode,
) -> Result<CandidateList> {
    if ours.query_id != theirs.query_id {
        return Err(Error::QueryMismatch(ours.query_id.clone(), theirs.query_id.clone()));
    }
    let (a, b, k) = match mode {
        FusionMode::ScoreEqualWeight => (min_max(ours), min_max(theirs), usize::MAX),
        FusionMode::Borda { list_len } => (borda(ours, list_len), borda(theirs, list_len), list_len),
    };
    let mut total: BTreeMap<&str, f64> = BTreeMap::new();
    for (id, v) in a.iter().chain(b.iter()) {
        *total.entry(id).or_insert(0.0) += v;
    }
    let breakdowns: HashMap<&str, _> = ours
        .entries
        .iter()
        .filter_map(|c| c.breakdown.map(|b| (c.subject_id.as_str(), b)))
        .collect();
    let entries = total
        .into_iter()
        .map(|(id, score)| Candidate {
            subject_id: id.to_string(),
            score,
            breakdown: breakdowns.get(id).copied(),
        })
        .collect();
    Ok(CandidateList::ranked(ours.query_id.clone(), entries, k))
}

/// Rank-1 accuracy of a descriptor patch-type subset on some benchmark.
pub trait RankOneEvaluator {
    fn rank_one(&self, subset: &[PatchTypeId]) -> Result<f64>;
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SfsStep {
    pub added: PatchTypeId,
    pub subset: Vec<PatchTypeId>,
    pub accuracy: f64,
}

/// Greedy forward selection: each step adds the type that maximises rank-1
/// accuracy (earliest in `catalog` on ties). The first step is always
/// taken; later steps need a strict improvement.
pub fn sfs_patch_selection(
    evaluator: &dyn RankOneEvaluator,
    catalog: &[PatchTypeId],
    max_k: usize,
) -> Result<Vec<SfsStep>> {
    let mut steps: Vec<SfsStep> = Vec::new();
    let mut chosen: Vec<PatchTypeId> = Vec::new();
    let mut best_so_far = f64::NEG_INFINITY;
    while chosen.len() < max_k.min(catalog.len()) {
        let mut best: Option<(PatchTypeId, f64)> = None;
        for &t in catalog {
            if chosen.contains(&t) {
                continue;
            }
            let mut trial = chosen.clone();
            trial.push(t);
            let acc = evaluator.rank_one(&trial)?;
            if best.is_none_or(|(_, b)| acc > b) {
                best = Some((t, acc));
            }
        }
        let Some((t, acc)) = best else { break };
        if !steps.is_empty() && acc <= best_so_far {
            break;
        }
        chosen.push(t);
        best_so_far = acc;
        steps.push(SfsStep {
            added: t,
            subset: chosen.clone(),
            accuracy: acc,
        });
    }
    Ok(steps)
}

/// Rank-1 evaluator that runs the full search with descriptors restricted
/// to the candidate subset.
pub struct SearchBenchmark<'a> {
    pub subjects: &'a [SubjectRecord],
    pub queries: &'a [LatentTemplates],
    pub truth: &'a HashMap<String, String>,
    pub searcher: &'a Searcher,
}

fn restrict_all(ds: &[crate::model::Descriptor], subset: &[PatchTypeId]) -> Result<Vec<crate::model::Descriptor>> {
    ds.iter().map(|d| d.restrict(subset)).collect()
}

impl RankOneEvaluator for SearchBenchmark<'_> {
    fn rank_one(&self, subset: &[PatchTypeId]) -> Result<f64> {
        let subjects = self
            .subjects
            .iter()
            .map(|s| {
                let mut s = s.clone();
                s.minutiae_template.descriptors = restrict_all(&s.minutiae_template.descriptors, subset)?;
                s.texture_template.descriptors = restrict_all(&s.texture_template.descriptors, subset)?;
                Ok(s)
            })
            .collect::<Result<Vec<_>>>()?;
        let mut lists = Vec::with_capacity(self.queries.len());
        for q in self.queries {
            let mut q = q.clone();
            for t in [&mut q.mt1, &mut q.mt2] {
                t.descriptors = restrict_all(&t.descriptors, subset)?;
            }
            q.tt.descriptors = restrict_all(&q.tt.descriptors, subset)?;
            lists.push(self.searcher.search(&q, &subjects, 1)?);
        }
        Ok(compute_cmc(&lists, self.truth, 1)?.at(1))
    }
}
