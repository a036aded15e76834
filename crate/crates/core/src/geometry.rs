//! Similarity geometry on embedding vectors.
//!
//! Cosine similarity `C(u, v)`, angular distance `arccos(C) / π`, and their
//! analytic gradients with respect to the first argument. Gradients with
//! respect to the second argument follow by swapping the arguments.

use std::f64::consts::PI;
use std::ops::Deref;

use serde::{Deserialize, Serialize};

use crate::{Error, Result};

/// Clamp applied to `|C|` inside [`angular_gradient`]; the derivative of
/// `arccos` is unbounded at `|C| = 1`.
pub const SINGULARITY_EPS: f64 = 1e-7;

/// A pooled embedding produced by the encoder.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Embedding(Vec<f64>);

impl Embedding {
    pub fn new(values: Vec<f64>) -> Self {
        Embedding(values)
    }

    pub fn dim(&self) -> usize {
        self.0.len()
    }

    pub fn norm(&self) -> f64 {
        norm(&self.0)
    }

    pub fn scaled(&self, factor: f64) -> Self {
        Embedding(self.0.iter().map(|x| x * factor).collect())
    }

    pub fn into_inner(self) -> Vec<f64> {
        self.0
    }
}

impl Deref for Embedding {
    type Target = [f64];

    fn deref(&self) -> &[f64] {
        &self.0
    }
}

impl From<Vec<f64>> for Embedding {
    fn from(values: Vec<f64>) -> Self {
        Embedding(values)
    }
}

/// Which dissimilarity the metric loss and the miner operate on.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum DistanceKind {
    /// `arccos(C) / π`
    #[default]
    Angular,
    /// `(1 - C) / 2`, the cosine substitute with the same `[0, 1]` range.
    HalfCosine,
}

impl DistanceKind {
    pub fn distance(self, u: &[f64], v: &[f64]) -> Result<f64> {
        match self {
            DistanceKind::Angular => angular_distance(u, v),
            DistanceKind::HalfCosine => Ok((1.0 - cosine_similarity(u, v)?) / 2.0),
        }
    }

    /// Gradient of [`DistanceKind::distance`] with respect to `u`.
    pub fn gradient(self, u: &[f64], v: &[f64]) -> Result<Vec<f64>> {
        match self {
            DistanceKind::Angular => angular_gradient(u, v),
            DistanceKind::HalfCosine => {
                let mut g = cosine_gradient(u, v)?;
                g.iter_mut().for_each(|x| *x *= -0.5);
                Ok(g)
            }
        }
    }
}

pub(crate) fn dot(u: &[f64], v: &[f64]) -> f64 {
    u.iter().zip(v).map(|(a, b)| a * b).sum()
}

pub(crate) fn norm(u: &[f64]) -> f64 {
    dot(u, u).sqrt()
}

fn checked_norms(u: &[f64], v: &[f64]) -> Result<(f64, f64)> {
    if u.len() != v.len() {
        return Err(Error::contract(format!(
            "dimension mismatch: {} vs {}",
            u.len(),
            v.len()
        )));
    }
    if u.is_empty() {
        return Err(Error::DegenerateVector("empty vector"));
    }
    let (nu, nv) = (norm(u), norm(v));
    if !(nu > 0.0 && nu.is_finite()) || !(nv > 0.0 && nv.is_finite()) {
        return Err(Error::DegenerateVector("zero or non-finite norm"));
    }
    Ok((nu, nv))
}

/// `u·v / (‖u‖‖v‖)`, clamped into `[-1, 1]`.
pub fn cosine_similarity(u: &[f64], v: &[f64]) -> Result<f64> {
    let (nu, nv) = checked_norms(u, v)?;
    Ok((dot(u, v) / (nu * nv)).clamp(-1.0, 1.0))
}

/// `arccos(C(u, v)) / π`, in `[0, 1]`.
pub fn angular_distance(u: &[f64], v: &[f64]) -> Result<f64> {
    Ok(cosine_similarity(u, v)?.acos() / PI)
}

/// `∂C/∂u = v / (‖u‖‖v‖) - C · u / ‖u‖²`.
pub fn cosine_gradient(u: &[f64], v: &[f64]) -> Result<Vec<f64>> {
    let (nu, nv) = checked_norms(u, v)?;
    let c = (dot(u, v) / (nu * nv)).clamp(-1.0, 1.0);
    let inv_uv = 1.0 / (nu * nv);
    let inv_uu = 1.0 / (nu * nu);
    Ok(u.iter()
        .zip(v)
        .map(|(ui, vi)| vi * inv_uv - c * ui * inv_uu)
        .collect())
}

/// The factor `-1 / (π √(1 - C²))` relating the angular gradient to the
/// cosine gradient, with `|C|` clamped to `1 - SINGULARITY_EPS`.
pub fn angular_scale(c: f64) -> f64 {
    let c = c.clamp(-1.0 + SINGULARITY_EPS, 1.0 - SINGULARITY_EPS);
    -1.0 / (PI * (1.0 - c * c).sqrt())
}

/// `∂d/∂u` for the angular distance. Always finite for valid inputs.
pub fn angular_gradient(u: &[f64], v: &[f64]) -> Result<Vec<f64>> {
    let c = cosine_similarity(u, v)?;
    let scale = angular_scale(c);
    let mut g = cosine_gradient(u, v)?;
    g.iter_mut().for_each(|x| *x *= scale);
    Ok(g)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;
    use rand_distr::StandardNormal;

    fn central_difference(f: impl Fn(&[f64]) -> f64, u: &[f64], h: f64) -> Vec<f64> {
        let mut probe = u.to_vec();
        (0..u.len())
            .map(|i| {
                let orig = probe[i];
                probe[i] = orig + h;
                let plus = f(&probe);
                probe[i] = orig - h;
                let minus = f(&probe);
                probe[i] = orig;
                (plus - minus) / (2.0 * h)
            })
            .collect()
    }

    fn close(a: f64, b: f64, tol: f64) -> bool {
        (a - b).abs() <= tol
    }

    #[test]
    fn cosine_examples() {
        assert!(close(cosine_similarity(&[1.0, 2.0], &[2.0, 4.0]).unwrap(), 1.0, 1e-12));
        assert!(close(cosine_similarity(&[1.0, 0.0], &[0.0, 1.0]).unwrap(), 0.0, 1e-12));
        assert!(close(cosine_similarity(&[3.0, 4.0], &[4.0, 3.0]).unwrap(), 0.96, 1e-12));
    }

    #[test]
    fn angular_examples() {
        assert!(close(angular_distance(&[5.0, 5.0], &[1.0, 1.0]).unwrap(), 0.0, 1e-7));
        assert!(close(angular_distance(&[1.0, 0.0], &[0.0, 1.0]).unwrap(), 0.5, 1e-12));
        assert!(close(angular_distance(&[1.0, 1.0], &[1.0, 0.0]).unwrap(), 0.25, 1e-12));
    }

    #[test]
    fn zero_norm_is_an_error() {
        assert!(matches!(
            cosine_similarity(&[0.0, 0.0], &[1.0, 0.0]),
            Err(Error::DegenerateVector(_))
        ));
        assert!(matches!(
            angular_gradient(&[1.0, 0.0], &[0.0, 0.0]),
            Err(Error::DegenerateVector(_))
        ));
        assert!(matches!(
            cosine_similarity(&[1.0], &[1.0, 0.0]),
            Err(Error::Contract(_))
        ));
    }

    #[test]
    fn cosine_gradient_examples() {
        assert_eq!(cosine_gradient(&[1.0, 0.0], &[0.0, 1.0]).unwrap(), vec![0.0, 1.0]);
        assert_eq!(cosine_gradient(&[1.0, 0.0], &[1.0, 0.0]).unwrap(), vec![0.0, 0.0]);
        let u = [3.0, 4.0];
        let v = [4.0, 3.0];
        let analytic = cosine_gradient(&u, &v).unwrap();
        let numeric = central_difference(|x| cosine_similarity(x, &v).unwrap(), &u, 1e-5);
        for (a, n) in analytic.iter().zip(&numeric) {
            assert!(close(*a, *n, 1e-6), "{a} vs {n}");
        }
    }

    #[test]
    fn angular_gradient_examples() {
        let g = angular_gradient(&[1.0, 0.0], &[0.0, 1.0]).unwrap();
        assert!(close(g[0], 0.0, 1e-15));
        assert!(close(g[1], -1.0 / PI, 1e-15));

        let u = [3.0, 4.0];
        let v = [4.0, 3.0];
        let analytic = angular_gradient(&u, &v).unwrap();
        let numeric = central_difference(|x| angular_distance(x, &v).unwrap(), &u, 1e-5);
        for (a, n) in analytic.iter().zip(&numeric) {
            assert!(close(*a, *n, 1e-5), "{a} vs {n}");
        }
    }

    #[test]
    fn collinear_gradient_is_finite_and_bounded() {
        let u = [1.0, 0.0];
        let v = [2.0, 0.0];
        let g = angular_gradient(&u, &v).unwrap();
        assert!(g.iter().all(|x| x.is_finite()));
        let eps = SINGULARITY_EPS;
        let bound = 1.0 / (PI * (2.0 * eps - eps * eps).sqrt()) * norm(&cosine_gradient(&u, &v).unwrap());
        assert!(norm(&g) <= bound + 1e-300);
    }

    #[test]
    fn magnification_matches_analytic_scale_and_grows_with_cosine() {
        let mut previous = 0.0;
        for c in [0.0, 0.5, 0.9, 0.99f64] {
            // u along x, v at angle acos(c)
            let u = [1.0, 0.0, 0.0];
            let v = [c, (1.0 - c * c).sqrt(), 0.0];
            let ratio = norm(&angular_gradient(&u, &v).unwrap()) / norm(&cosine_gradient(&u, &v).unwrap());
            let expected = 1.0 / (PI * (1.0 - c * c).sqrt());
            assert!(close(ratio, expected, 1e-9), "c={c}: {ratio} vs {expected}");
            assert!(ratio > previous);
            if c > 0.9 {
                assert!(ratio > 1.0 / PI / 0.19f64.sqrt());
            }
            previous = ratio;
        }
    }

    #[test]
    fn random_pairs_match_finite_differences() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let mut checked = 0;
        while checked < 1000 {
            let u: Vec<f64> = (0..8).map(|_| rng.sample(StandardNormal)).collect();
            let v: Vec<f64> = (0..8).map(|_| rng.sample(StandardNormal)).collect();
            if cosine_similarity(&u, &v).unwrap().abs() > 0.99 {
                continue;
            }
            for (analytic, f) in [
                (
                    cosine_gradient(&u, &v).unwrap(),
                    Box::new(|x: &[f64]| cosine_similarity(x, &v).unwrap()) as Box<dyn Fn(&[f64]) -> f64>,
                ),
                (
                    angular_gradient(&u, &v).unwrap(),
                    Box::new(|x: &[f64]| angular_distance(x, &v).unwrap()),
                ),
            ] {
                let numeric = central_difference(f, &u, 1e-5);
                for (a, n) in analytic.iter().zip(&numeric) {
                    let rel = (a - n).abs() / a.abs().max(n.abs()).max(1e-6);
                    assert!(rel < 1e-5, "{a} vs {n}");
                }
            }
            checked += 1;
        }
    }

    #[test]
    fn half_cosine_distance_and_gradient() {
        let u = [3.0, 4.0];
        let v = [4.0, 3.0];
        let d = DistanceKind::HalfCosine.distance(&u, &v).unwrap();
        assert!(close(d, 0.02, 1e-12));
        let g = DistanceKind::HalfCosine.gradient(&u, &v).unwrap();
        let numeric = central_difference(|x| DistanceKind::HalfCosine.distance(x, &v).unwrap(), &u, 1e-5);
        for (a, n) in g.iter().zip(&numeric) {
            assert!(close(*a, *n, 1e-8));
        }
    }

    mod properties {
        use super::*;
        use proptest::prelude::*;

        fn vec8() -> impl Strategy<Value = Vec<f64>> {
            proptest::collection::vec(-10.0f64..10.0, 8).prop_filter("nonzero", |v| norm(v) > 1e-3)
        }

        proptest! {
            #[test]
            fn symmetric(u in vec8(), v in vec8()) {
                prop_assert_eq!(angular_distance(&u, &v).unwrap(), angular_distance(&v, &u).unwrap());
            }

            #[test]
            fn scale_invariant(u in vec8(), v in vec8(), a in 0.01f64..100.0, b in 0.01f64..100.0) {
                let su: Vec<f64> = u.iter().map(|x| x * a).collect();
                let sv: Vec<f64> = v.iter().map(|x| x * b).collect();
                let d0 = angular_distance(&u, &v).unwrap();
                let d1 = angular_distance(&su, &sv).unwrap();
                // arccos amplifies round-off near |C| = 1
                let c = cosine_similarity(&u, &v).unwrap();
                let tol = if c.abs() > 1.0 - 1e-6 { 1e-6 } else { 1e-9 };
                prop_assert!((d0 - d1).abs() <= tol);
            }

            #[test]
            fn in_range(u in vec8(), v in vec8(), t in -1e-9f64..1e-9) {
                // near-collinear adversarial pair
                let w: Vec<f64> = u.iter().map(|x| x * (1.0 + t)).collect();
                for (a, b) in [(&u, &v), (&u, &w)] {
                    let c = cosine_similarity(a, b).unwrap();
                    let d = angular_distance(a, b).unwrap();
                    prop_assert!((-1.0..=1.0).contains(&c));
                    prop_assert!((0.0..=1.0).contains(&d));
                    prop_assert!(angular_gradient(a, b).unwrap().iter().all(|x| x.is_finite()));
                }
            }
        }
    }
}
