//! Rotation- and translation-invariant descriptions of minutia pairs and
//! triplets.

use crate::error::{Error, Result};
use crate::model::{circular_distance, wrap_2pi, Minutia};

/// `(d, θ_i, θ_j, θ_ij)` for an ordered minutia pair.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PairFeature {
    /// Distance between the two minutiae.
    pub d: f64,
    /// Direction of the first minutia relative to the line joining them.
    pub theta_i: f64,
    /// Direction of the second minutia relative to the same line.
    pub theta_j: f64,
    /// Direction difference between the two minutiae.
    pub theta_ij: f64,
}

pub fn pair_feature(mi: &Minutia, mj: &Minutia) -> Result<PairFeature> {
    let (dx, dy) = (mj.x - mi.x, mj.y - mi.y);
    let d = dx.hypot(dy);
    if d == 0.0 {
        return Err(Error::CoincidentMinutiae);
    }
    let phi = dy.atan2(dx);
    Ok(PairFeature {
        d,
        theta_i: wrap_2pi(mi.alpha - phi),
        theta_j: wrap_2pi(mj.alpha - phi),
        theta_ij: wrap_2pi(mi.alpha - mj.alpha),
    })
}

/// Triplet description over canonically ordered vertices.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TripletFeature {
    /// Length of the side leaving each vertex.
    pub d: [f64; 3],
    /// Minutia direction relative to its outgoing side.
    pub theta: [f64; 3],
    /// Interior angle at each vertex.
    pub phi: [f64; 3],
    /// Argument positions in canonical order: counter-clockwise, starting
    /// with the first argument.
    pub order: [usize; 3],
}

impl TripletFeature {
    pub fn to_array(&self) -> [f64; 9] {
        [
            self.d[0], self.d[1], self.d[2], self.theta[0], self.theta[1], self.theta[2],
            self.phi[0], self.phi[1], self.phi[2],
        ]
    }
}

/// Relative area below which a triangle counts as collinear.
pub const COLLINEAR_TOLERANCE: f64 = 1e-6;

/// Signed doubled area `(b - a) × (c - a)`.
#[inline]
pub(crate) fn cross(a: &Minutia, b: &Minutia, c: &Minutia) -> f64 {
    (b.x - a.x) * (c.y - a.y) - (b.y - a.y) * (c.x - a.x)
}

/// True when the triangle is too thin or has coincident corners.
pub(crate) fn is_degenerate(cross: f64, sides: [f64; 3]) -> bool {
    let longest = sides[0].max(sides[1]).max(sides[2]);
    sides.contains(&0.0) || cross.abs() < COLLINEAR_TOLERANCE * longest * longest
}

#[inline]
pub(crate) fn direction(a: &Minutia, b: &Minutia) -> f64 {
    (b.y - a.y).atan2(b.x - a.x)
}

#[inline]
pub(crate) fn distance(a: &Minutia, b: &Minutia) -> f64 {
    (b.x - a.x).hypot(b.y - a.y)
}

pub fn triplet_feature(mi: &Minutia, mj: &Minutia, mk: &Minutia) -> Result<TripletFeature> {
    let pts = [mi, mj, mk];
    let c = cross(mi, mj, mk);
    let order = if c > 0.0 { [0, 1, 2] } else { [0, 2, 1] };
    let v = order.map(|o| pts[o]);
    let sides = [distance(v[0], v[1]), distance(v[1], v[2]), distance(v[2], v[0])];
    if is_degenerate(c, sides) {
        return Err(Error::DegenerateTriplet);
    }
    let mut theta = [0.0; 3];
    let mut phi = [0.0; 3];
    for p in 0..3 {
        let next = v[(p + 1) % 3];
        let prev = v[(p + 2) % 3];
        let out = direction(v[p], next);
        theta[p] = wrap_2pi(v[p].alpha - out);
        phi[p] = circular_distance(out, direction(v[p], prev));
    }
    Ok(TripletFeature {
        d: sides,
        theta,
        phi,
        order,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::{PI, TAU};

    fn m(x: f64, y: f64, a: f64) -> Minutia {
        Minutia::true_minutia(x, y, a)
    }

    fn close(a: f64, b: f64) -> bool {
        // angles may wrap around 2π
        (a - b).abs() < 1e-9 || (TAU - (a - b).abs()).abs() < 1e-9
    }

    #[test]
    fn pair_examples() {
        let f = pair_feature(&m(0.0, 0.0, 0.0), &m(10.0, 0.0, 0.0)).unwrap();
        assert_eq!((f.d, f.theta_i, f.theta_j, f.theta_ij), (10.0, 0.0, 0.0, 0.0));
        let f = pair_feature(&m(0.0, 0.0, PI / 2.0), &m(0.0, 10.0, PI / 2.0)).unwrap();
        assert!((f.d - 10.0).abs() < 1e-12 && f.theta_i.abs() < 1e-12 && f.theta_j.abs() < 1e-12 && f.theta_ij == 0.0);
        let f = pair_feature(&m(0.0, 0.0, 0.0), &m(10.0, 0.0, PI)).unwrap();
        assert_eq!(f.d, 10.0);
        assert_eq!(f.theta_i, 0.0);
        assert!((f.theta_j - PI).abs() < 1e-12 && (f.theta_ij - PI).abs() < 1e-12);
        assert!(matches!(pair_feature(&m(1.0, 1.0, 0.0), &m(1.0, 1.0, 2.0)), Err(Error::CoincidentMinutiae)));
    }

    #[test]
    fn equilateral_triplet() {
        let h = 10.0 * (3f64).sqrt() / 2.0;
        // counter-clockwise with each direction along the outgoing side
        let a = m(0.0, 0.0, 0.0);
        let b = m(10.0, 0.0, 2.0 * PI / 3.0);
        let c = m(5.0, h, 4.0 * PI / 3.0);
        let f = triplet_feature(&a, &b, &c).unwrap();
        assert_eq!(f.order, [0, 1, 2]);
        for p in 0..3 {
            assert!((f.d[p] - 10.0).abs() < 1e-12);
            assert!(close(f.theta[p], 0.0), "theta {:?}", f.theta);
            assert!((f.phi[p] - PI / 3.0).abs() < 1e-12);
        }
        // the clockwise argument order yields the same canonical feature
        let g = triplet_feature(&a, &c, &b).unwrap();
        assert_eq!(g.order, [0, 2, 1]);
        for (x, y) in f.to_array().iter().zip(g.to_array()) {
            assert!(close(*x, y));
        }
    }

    #[test]
    fn collinear_is_degenerate() {
        let r = triplet_feature(&m(0.0, 0.0, 0.0), &m(5.0, 5.0, 0.0), &m(10.0, 10.0, 1.0));
        assert!(matches!(r, Err(Error::DegenerateTriplet)));
        let r = triplet_feature(&m(0.0, 0.0, 0.0), &m(0.0, 0.0, 0.0), &m(10.0, 3.0, 1.0));
        assert!(matches!(r, Err(Error::DegenerateTriplet)));
    }

    fn rigid(p: &Minutia, rot: f64, tx: f64, ty: f64) -> Minutia {
        let (s, c) = rot.sin_cos();
        m(c * p.x - s * p.y + tx, s * p.x + c * p.y + ty, p.alpha + rot)
    }

    proptest::proptest! {
        #[test]
        fn interior_angles_sum_to_pi(pts in proptest::collection::vec((0.0..300.0f64, 0.0..300.0f64, 0.0..TAU), 3)) {
            let v: Vec<_> = pts.iter().map(|(x, y, a)| m(*x, *y, *a)).collect();
            if let Ok(f) = triplet_feature(&v[0], &v[1], &v[2]) {
                proptest::prop_assert!((f.phi.iter().sum::<f64>() - PI).abs() < 1e-9);
            }
        }

        #[test]
        fn features_are_rigid_invariant(pts in proptest::collection::vec((0.0..300.0f64, 0.0..300.0f64, 0.0..TAU), 3),
                                        rot in 0.0..TAU, tx in -100.0..100.0f64, ty in -100.0..100.0f64) {
            let v: Vec<_> = pts.iter().map(|(x, y, a)| m(*x, *y, *a)).collect();
            let w: Vec<_> = v.iter().map(|p| rigid(p, rot, tx, ty)).collect();
            if let (Ok(a), Ok(b)) = (pair_feature(&v[0], &v[1]), pair_feature(&w[0], &w[1])) {
                proptest::prop_assert!((a.d - b.d).abs() < 1e-9);
                for (x, y) in [(a.theta_i, b.theta_i), (a.theta_j, b.theta_j), (a.theta_ij, b.theta_ij)] {
                    proptest::prop_assert!(circular_distance(x, y) < 1e-9);
                }
            }
            let fa = triplet_feature(&v[0], &v[1], &v[2]);
            let fb = triplet_feature(&w[0], &w[1], &w[2]);
            if let (Ok(a), Ok(b)) = (fa, fb) {
                proptest::prop_assert_eq!(a.order, b.order);
                for p in 0..3 {
                    proptest::prop_assert!((a.d[p] - b.d[p]).abs() < 1e-9);
                    proptest::prop_assert!(circular_distance(a.theta[p], b.theta[p]) < 1e-9);
                    proptest::prop_assert!((a.phi[p] - b.phi[p]).abs() < 1e-9);
                }
            }
        }
    }
}
