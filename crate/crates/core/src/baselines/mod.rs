//! Fixed geometries and the first-generation neural snowflake, used as
//! comparison points for the neural spacetime.

mod model;
mod snowflake;

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

pub use model::{BaselineConfig, BaselineModel};
pub use snowflake::SnowflakeV1;

use crate::autodiff::AutodiffError;
use crate::checkpoint::CheckpointError;

#[derive(Debug, thiserror::Error, PartialEq)]
pub enum BaselineError {
    #[error("point has a zero spatial part and cannot be placed on the de Sitter hyperboloid")]
    OffManifold,
    #[error("snowflake input must be a non-negative distance, got {0}")]
    NegativeInput(f64),
    #[error("invalid baseline configuration: {0}")]
    InvalidConfig(String),
    #[error("expected a vector of length {expected}, got {found}")]
    ShapeMismatch { expected: usize, found: usize },
    #[error(transparent)]
    Autodiff(#[from] AutodiffError),
    #[error(transparent)]
    Checkpoint(#[from] CheckpointError),
}

pub type Result<T> = std::result::Result<T, BaselineError>;

/// Geometry used to turn a pair of embeddings into a distance.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum GeometryKind {
    Nst,
    Euclidean,
    Minkowski,
    Desitter,
    SnowflakeV1,
}

impl GeometryKind {
    pub const ALL: [GeometryKind; 5] = [
        GeometryKind::Nst,
        GeometryKind::Euclidean,
        GeometryKind::Minkowski,
        GeometryKind::Desitter,
        GeometryKind::SnowflakeV1,
    ];

    pub fn name(self) -> &'static str {
        match self {
            GeometryKind::Nst => "nst",
            GeometryKind::Euclidean => "euclidean",
            GeometryKind::Minkowski => "minkowski",
            GeometryKind::Desitter => "desitter",
            GeometryKind::SnowflakeV1 => "snowflake-v1",
        }
    }

    /// Number of time coordinates a baseline carries (Lorentzian ones use one).
    pub fn baseline_time_dim(self) -> usize {
        match self {
            GeometryKind::Minkowski | GeometryKind::Desitter => 1,
            _ => 0,
        }
    }
}

impl fmt::Display for GeometryKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for GeometryKind {
    type Err = BaselineError;

    fn from_str(s: &str) -> Result<Self> {
        GeometryKind::ALL
            .into_iter()
            .find(|g| g.name().eq_ignore_ascii_case(s))
            .ok_or_else(|| BaselineError::InvalidConfig(format!("unknown geometry {s:?}")))
    }
}

pub fn euclidean_distance(x: &[f64], y: &[f64]) -> f64 {
    x.iter()
        .zip(y)
        .map(|(a, b)| (a - b) * (a - b))
        .sum::<f64>()
        .sqrt()
}

/// Interval between two events whose first coordinate is time:
/// `s^2 = dt^2 - |dx|^2`, distance `sqrt(max(s^2, 0))`, causal when
/// `s^2 >= 0` and `dt > 0`.
pub fn minkowski_interval(x: &[f64], y: &[f64]) -> (f64, bool) {
    let dt = y[0] - x[0];
    let dx2: f64 = x[1..]
        .iter()
        .zip(&y[1..])
        .map(|(a, b)| (a - b) * (a - b))
        .sum();
    let s2 = dt * dt - dx2;
    (s2.max(0.0).sqrt(), s2 >= 0.0 && dt > 0.0)
}

/// `<a, b>_M = -a_0 b_0 + sum_i a_i b_i`.
pub fn minkowski_product(a: &[f64], b: &[f64]) -> f64 {
    -a[0] * b[0] + a[1..].iter().zip(&b[1..]).map(|(x, y)| x * y).sum::<f64>()
}

/// Keeps the time coordinate and rescales the spatial part onto the
/// hyperboloid `<x, x>_M = R^2`.
pub fn desitter_project(x: &[f64], radius: f64) -> Result<Vec<f64>> {
    let norm = x[1..].iter().map(|v| v * v).sum::<f64>().sqrt();
    if x.len() < 2 || norm == 0.0 || !norm.is_finite() {
        return Err(BaselineError::OffManifold);
    }
    let target = (radius * radius + x[0] * x[0]).sqrt();
    let mut out = x.to_vec();
    for v in &mut out[1..] {
        *v *= target / norm;
    }
    Ok(out)
}

/// `R acos(<x, y>_M / R^2)` for points on the hyperboloid; `None` when the
/// argument leaves `[-1, 1]`.
pub fn desitter_distance(x: &[f64], y: &[f64], radius: f64) -> Option<f64> {
    let arg = minkowski_product(x, y) / (radius * radius);
    if (-1.0..=1.0).contains(&arg) {
        Some(radius * arg.acos())
    } else {
        None
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::autodiff::ParamStore;

    #[test]
    fn euclidean_examples() {
        assert_eq!(euclidean_distance(&[1.0, 2.0], &[1.0, 2.0]), 0.0);
        assert_eq!(euclidean_distance(&[0.0, 0.0], &[3.0, 4.0]), 5.0);
        let (x, y) = ([0.3, -1.2, 2.5], [1.1, 0.4, -0.5]);
        let direct = (0.8f64 * 0.8 + 1.6 * 1.6 + 3.0 * 3.0).sqrt();
        assert!((euclidean_distance(&x, &y) - direct).abs() < 1e-15);
    }

    #[test]
    fn minkowski_examples() {
        assert_eq!(minkowski_interval(&[1.0, 2.0], &[1.0, 2.0]), (0.0, false));
        let (d, causal) = minkowski_interval(&[0.0, 0.0], &[2.0, 1.0]);
        assert!((d - 3f64.sqrt()).abs() < 1e-15);
        assert!(causal);
        assert_eq!(minkowski_interval(&[0.0, 0.0, 0.0], &[5.0, 3.0, 4.0]), (0.0, true));
        assert!(!minkowski_interval(&[2.0, 1.0], &[0.0, 0.0]).1);
    }

    #[test]
    fn desitter_examples() {
        let x = desitter_project(&[0.0, 1.0, 0.0], 1.0).unwrap();
        assert_eq!(minkowski_product(&x, &x), 1.0);
        assert_eq!(desitter_distance(&x, &x, 1.0), Some(0.0));
        let y = desitter_project(&[0.0, -3.0, 0.0], 1.0).unwrap();
        assert!((desitter_distance(&x, &y, 1.0).unwrap() - std::f64::consts::PI).abs() < 1e-15);
        // Timelike separation: same spatial direction, different times.
        let a = desitter_project(&[2.0, 1.0, 0.0], 1.0).unwrap();
        let b = desitter_project(&[-2.0, 1.0, 0.0], 1.0).unwrap();
        assert!(minkowski_product(&a, &b) > 1.0);
        assert_eq!(desitter_distance(&a, &b, 1.0), None);
        assert_eq!(
            desitter_project(&[1.0, 0.0, 0.0], 1.0),
            Err(BaselineError::OffManifold)
        );
    }

    #[test]
    fn projection_lands_on_the_hyperboloid() {
        for t in [-3.0, -0.5, 0.0, 0.7, 4.0] {
            for r in [0.5, 1.0, 2.0] {
                let x = desitter_project(&[t, 0.3, -1.4, 2.0], r).unwrap();
                assert!((minkowski_product(&x, &x) - r * r).abs() < 1e-12);
                assert_eq!(x[0], t);
            }
        }
    }

    fn unit_single_layer() -> (ParamStore, SnowflakeV1) {
        let mut store = ParamStore::new();
        let sf = SnowflakeV1::build(&mut store, "sf", 1, 1);
        (store, sf)
    }

    #[test]
    fn snowflake_examples() {
        let (store, sf) = unit_single_layer();
        assert_eq!(sf.eval(&store, 0.0).unwrap(), 0.0);
        let expected = (1.0 - (-1f64).exp()) + 1.0 + 2f64.ln();
        assert!((sf.eval(&store, 1.0).unwrap() - expected).abs() < 1e-15);
        assert_eq!(sf.eval(&store, -1.0), Err(BaselineError::NegativeInput(-1.0)));
    }

    #[test]
    fn geometry_names_round_trip() {
        for g in GeometryKind::ALL {
            assert_eq!(g.name().parse::<GeometryKind>().unwrap(), g);
        }
        assert!("hyperbolic".parse::<GeometryKind>().is_err());
    }

    mod properties {
        use super::super::*;
        use crate::autodiff::ParamStore;
        use proptest::prelude::*;
        use rand::SeedableRng;

        fn point(k: usize) -> impl Strategy<Value = Vec<f64>> {
            proptest::collection::vec(-10.0f64..10.0, k)
        }

        proptest! {
            #[test]
            fn euclidean_is_a_metric(x in point(4), y in point(4), z in point(4)) {
                let d = euclidean_distance;
                prop_assert_eq!(d(&x, &y), d(&y, &x));
                prop_assert!(d(&x, &y) >= 0.0);
                prop_assert_eq!(d(&x, &x), 0.0);
                prop_assert!(d(&x, &y) <= d(&x, &z) + d(&z, &y) + 1e-12);
            }

            #[test]
            fn minkowski_causality_is_transitive(
                base in point(3),
                steps in proptest::collection::vec((0.01f64..3.0, 0.0f64..1.0, 0.0f64..std::f64::consts::TAU), 2)
            ) {
                // Each step moves forward in time by dt and at most dt in space.
                let mut chain = vec![base];
                for (dt, frac, angle) in steps {
                    let prev = chain.last().unwrap();
                    let r = dt * frac;
                    chain.push(vec![prev[0] + dt, prev[1] + r * angle.cos(), prev[2] + r * angle.sin()]);
                }
                let c = |a: &[f64], b: &[f64]| minkowski_interval(a, b).1;
                prop_assume!(c(&chain[0], &chain[1]) && c(&chain[1], &chain[2]));
                prop_assert!(c(&chain[0], &chain[2]));
            }

            #[test]
            fn snowflake_is_non_negative_and_monotone(seed in any::<u64>(), r in 0.0f64..50.0, dr in 0.0f64..5.0) {
                let mut store = ParamStore::new();
                let sf = SnowflakeV1::build(&mut store, "sf", 3, 4);
                let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
                sf.init(&mut store, &mut rng);
                let a = sf.eval(&store, r).unwrap();
                let b = sf.eval(&store, r + dr).unwrap();
                prop_assert!(a >= 0.0);
                prop_assert!(b >= a);
            }
        }
    }
}
