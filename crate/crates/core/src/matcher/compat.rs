//! Second- and third-order compatibility between candidate correspondences.

use crate::error::Error;
use crate::model::{circular_distance, Minutia};

use super::features::{cross, direction, distance, is_degenerate, pair_feature, triplet_feature};
use super::sigmoid::SigmoidParams;
use super::CandidatePair;

/// Dense symmetric `N × N` pairwise compatibility, zero on the diagonal.
#[derive(Debug, Clone, PartialEq)]
pub struct H2Matrix {
    n: usize,
    data: Vec<f64>,
}

impl H2Matrix {
    pub fn zeros(n: usize) -> Self {
        Self {
            n,
            data: vec![0.0; n * n],
        }
    }

    /// Builds from a full row-major matrix; used for tests and oracles.
    pub fn from_dense(n: usize, data: Vec<f64>) -> Self {
        assert_eq!(data.len(), n * n, "H2 data must be n*n");
        Self { n, data }
    }

    pub fn len(&self) -> usize {
        self.n
    }

    pub fn is_empty(&self) -> bool {
        self.n == 0
    }

    #[inline]
    pub fn get(&self, a: usize, b: usize) -> f64 {
        self.data[a * self.n + b]
    }

    pub fn row(&self, a: usize) -> &[f64] {
        &self.data[a * self.n..(a + 1) * self.n]
    }

    fn set_sym(&mut self, a: usize, b: usize, v: f64) {
        self.data[a * self.n + b] = v;
        self.data[b * self.n + a] = v;
    }

    /// `Σ_{a,b} H[a][b] x_a x_b` for an indicator vector given as indices.
    pub fn objective(&self, selected: &[usize]) -> f64 {
        selected
            .iter()
            .flat_map(|a| selected.iter().map(move |b| (*a, *b)))
            .map(|(a, b)| self.get(a, b))
            .sum()
    }
}

#[inline]
fn conflicts(a: &CandidatePair, b: &CandidatePair) -> bool {
    a.i1 == b.i1 || a.i2 == b.i2
}

/// Pairwise compatibility of two candidate correspondences from their pair
/// features; zero on conflict or when either side has coincident minutiae.
pub fn h2_entry(
    a: &CandidatePair,
    b: &CandidatePair,
    latent: &[Minutia],
    reference: &[Minutia],
    euclidean: &SigmoidParams,
    directional: &SigmoidParams,
) -> f64 {
    if conflicts(a, b) {
        return 0.0;
    }
    let (Ok(fl), Ok(fr)) = (
        pair_feature(&latent[a.i1], &latent[b.i1]),
        pair_feature(&reference[a.i2], &reference[b.i2]),
    ) else {
        return 0.0;
    };
    let z1 = euclidean.eval((fl.d - fr.d).abs());
    if z1 == 0.0 {
        return 0.0;
    }
    z1 * directional.eval(circular_distance(fl.theta_i, fr.theta_i))
        * directional.eval(circular_distance(fl.theta_j, fr.theta_j))
        * directional.eval(circular_distance(fl.theta_ij, fr.theta_ij))
}

pub fn build_h2(
    pairs: &[CandidatePair],
    latent: &[Minutia],
    reference: &[Minutia],
    euclidean: &SigmoidParams,
    directional: &SigmoidParams,
) -> H2Matrix {
    let n = pairs.len();
    let mut h = H2Matrix::zeros(n);
    for a in 0..n {
        for b in a + 1..n {
            let v = h2_entry(&pairs[a], &pairs[b], latent, reference, euclidean, directional);
            if v != 0.0 {
                h.set_sym(a, b, v);
            }
        }
    }
    h
}

/// Sparse symmetric third-order tensor. Each entry is stored once with
/// strictly increasing indices and stands for all six permutations.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct H3Tensor {
    pub n: usize,
    pub entries: Vec<([u32; 3], f64)>,
}

impl H3Tensor {
    pub fn new(n: usize) -> Self {
        Self {
            n,
            entries: Vec::new(),
        }
    }

    /// Adds an entry; indices may come in any order but must be distinct.
    pub fn insert(&mut self, i: usize, j: usize, k: usize, v: f64) {
        let mut idx = [i as u32, j as u32, k as u32];
        idx.sort_unstable();
        assert!(idx[0] != idx[1] && idx[1] != idx[2], "H3 indices must be distinct");
        self.entries.push((idx, v));
    }

    pub fn nnz(&self) -> usize {
        self.entries.len()
    }

    /// Value at any index permutation; zero when absent.
    pub fn get(&self, i: usize, j: usize, k: usize) -> f64 {
        let mut idx = [i as u32, j as u32, k as u32];
        idx.sort_unstable();
        self.entries
            .iter()
            .find(|(e, _)| *e == idx)
            .map_or(0.0, |(_, v)| *v)
    }

    /// `Σ_{i,j,k} H[i][j][k] y_i y_j y_k` over all ordered index triples.
    pub fn objective(&self, y: &[f64]) -> f64 {
        self.entries
            .iter()
            .map(|([a, b, c], v)| 6.0 * v * y[*a as usize] * y[*b as usize] * y[*c as usize])
            .sum()
    }
}

/// Product of the nine truncated-sigmoid factors comparing a latent and a
/// reference triplet, computed straight from [`triplet_feature`]. Zero for
/// degenerate or mirrored triangles.
pub fn h3_entry(
    a: &CandidatePair,
    b: &CandidatePair,
    c: &CandidatePair,
    latent: &[Minutia],
    reference: &[Minutia],
    euclidean: &SigmoidParams,
    directional: &SigmoidParams,
) -> f64 {
    if conflicts(a, b) || conflicts(a, c) || conflicts(b, c) {
        return 0.0;
    }
    let fl = triplet_feature(&latent[a.i1], &latent[b.i1], &latent[c.i1]);
    let fr = triplet_feature(&reference[a.i2], &reference[b.i2], &reference[c.i2]);
    let (Ok(fl), Ok(fr)) = (fl, fr) else {
        return 0.0;
    };
    // a rigid motion cannot turn a counter-clockwise triangle clockwise
    if fl.order != fr.order {
        return 0.0;
    }
    let mut v = 1.0;
    for p in 0..3 {
        v *= euclidean.eval((fl.d[p] - fr.d[p]).abs());
        v *= directional.eval(circular_distance(fl.theta[p], fr.theta[p]));
        v *= directional.eval(circular_distance(fl.phi[p], fr.phi[p]));
    }
    v
}

/// Per-side quantities shared by every triple containing that side.
struct SideCache {
    n: usize,
    dist: Vec<f64>,
    dir: Vec<f64>,
}

impl SideCache {
    fn new(pts: &[&Minutia]) -> Self {
        let n = pts.len();
        let mut dist = vec![0.0; n * n];
        let mut dir = vec![0.0; n * n];
        for a in 0..n {
            for b in 0..n {
                if a != b {
                    dist[a * n + b] = distance(pts[a], pts[b]);
                    dir[a * n + b] = direction(pts[a], pts[b]);
                }
            }
        }
        Self { n, dist, dir }
    }

    #[inline]
    fn dist(&self, a: usize, b: usize) -> f64 {
        self.dist[a * self.n + b]
    }

    #[inline]
    fn dir(&self, a: usize, b: usize) -> f64 {
        self.dir[a * self.n + b]
    }
}

/// Third-order compatibility over all index triples of `pairs`, omitting
/// conflicting, degenerate and zero entries.
///
/// Side lengths and side directions are cached per pair of candidates; each
/// entry evaluates the same expressions as [`h3_entry`] in the same order.
pub fn build_h3(
    pairs: &[CandidatePair],
    latent: &[Minutia],
    reference: &[Minutia],
    euclidean: &SigmoidParams,
    directional: &SigmoidParams,
) -> H3Tensor {
    let n = pairs.len();
    let lp: Vec<&Minutia> = pairs.iter().map(|p| &latent[p.i1]).collect();
    let rp: Vec<&Minutia> = pairs.iter().map(|p| &reference[p.i2]).collect();
    let lc = SideCache::new(&lp);
    let rc = SideCache::new(&rp);

    // z_side[a][b]: Euclidean factor of side a→b; z_theta[a][b]: direction of
    // a relative to side a→b. Both are zero across a conflict.
    let mut z_side = vec![0.0; n * n];
    let mut z_theta = vec![0.0; n * n];
    for a in 0..n {
        for b in 0..n {
            if a == b || conflicts(&pairs[a], &pairs[b]) {
                continue;
            }
            z_side[a * n + b] = euclidean.eval((lc.dist(a, b) - rc.dist(a, b)).abs());
            let tl = crate::model::wrap_2pi(lp[a].alpha - lc.dir(a, b));
            let tr = crate::model::wrap_2pi(rp[a].alpha - rc.dir(a, b));
            z_theta[a * n + b] = directional.eval(circular_distance(tl, tr));
        }
    }

    let mut h = H3Tensor::new(n);
    for a in 0..n {
        for b in a + 1..n {
            if z_side[a * n + b] == 0.0 {
                continue;
            }
            for c in b + 1..n {
                if z_side[a * n + c] == 0.0 || z_side[b * n + c] == 0.0 {
                    continue;
                }
                let cl = cross(lp[a], lp[b], lp[c]);
                let cr = cross(rp[a], rp[b], rp[c]);
                if (cl > 0.0) != (cr > 0.0) {
                    continue;
                }
                let v = if cl > 0.0 { [a, b, c] } else { [a, c, b] };
                let ls = [lc.dist(v[0], v[1]), lc.dist(v[1], v[2]), lc.dist(v[2], v[0])];
                let rs = [rc.dist(v[0], v[1]), rc.dist(v[1], v[2]), rc.dist(v[2], v[0])];
                if is_degenerate(cl, ls) || is_degenerate(cr, rs) {
                    continue;
                }
                let mut val = 1.0;
                for p in 0..3 {
                    let (cur, next, prev) = (v[p], v[(p + 1) % 3], v[(p + 2) % 3]);
                    let phi_l = circular_distance(lc.dir(cur, next), lc.dir(cur, prev));
                    let phi_r = circular_distance(rc.dir(cur, next), rc.dir(cur, prev));
                    val *= z_side[cur * n + next];
                    val *= z_theta[cur * n + next];
                    val *= directional.eval(circular_distance(phi_l, phi_r));
                    if val == 0.0 {
                        break;
                    }
                }
                if val != 0.0 {
                    h.entries.push(([a as u32, b as u32, c as u32], val));
                }
            }
        }
    }
    h
}

/// Convenience check used by the pipeline.
pub(crate) fn ensure_nonzero(h: &H2Matrix) -> Result<(), Error> {
    if h.data.iter().any(|v| *v != 0.0) {
        Ok(())
    } else {
        Err(Error::ZeroMatrix)
    }
}
