use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{BaselineError, GeometryKind, Result, SnowflakeV1};
use crate::autodiff::{Matrix, ParamStore, Tape, Var};
use crate::checkpoint::{self, Checkpoint, CheckpointError};
use crate::nst::Mlp;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BaselineConfig {
    pub geometry: GeometryKind,
    pub input_dim: usize,
    /// Embedding dimension; Lorentzian geometries use coordinate 0 as time.
    pub dim: usize,
    pub encoder_depth: usize,
    pub encoder_width: usize,
    /// De Sitter curvature radius.
    pub radius: f64,
    pub snowflake_depth: usize,
    pub snowflake_width: usize,
}

impl BaselineConfig {
    pub fn new(geometry: GeometryKind, input_dim: usize, dim: usize) -> Self {
        Self {
            geometry,
            input_dim,
            dim,
            encoder_depth: 10,
            encoder_width: 100,
            radius: 1.0,
            snowflake_depth: 2,
            snowflake_width: 10,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(BaselineError::InvalidConfig(m));
        if self.geometry == GeometryKind::Nst {
            return bad("nst is not a baseline geometry".into());
        }
        if self.input_dim == 0 || self.dim == 0 {
            return bad("dimensions must be positive".into());
        }
        if self.geometry.baseline_time_dim() > 0 && self.dim < 2 {
            return bad(format!("{} needs at least 2 dimensions", self.geometry));
        }
        if !(self.radius > 0.0) {
            return bad(format!("radius must be positive, got {}", self.radius));
        }
        if self.encoder_depth > 0 && self.encoder_width == 0 {
            return bad("encoder width must be positive".into());
        }
        if self.geometry == GeometryKind::SnowflakeV1
            && (self.snowflake_depth == 0 || self.snowflake_width == 0)
        {
            return bad("snowflake depth and width must be positive".into());
        }
        Ok(())
    }
}

/// Trainable encoder followed by a closed-form geometry (or the snowflake).
#[derive(Debug, Clone, PartialEq)]
pub struct BaselineModel {
    config: BaselineConfig,
    seed: u64,
    store: ParamStore,
    encoder: Mlp,
    snowflake: Option<SnowflakeV1>,
}

impl BaselineModel {
    pub fn new(config: BaselineConfig) -> Result<Self> {
        config.validate()?;
        let mut store = ParamStore::new();
        let encoder = Mlp::build(
            &mut store,
            "encoder",
            config.input_dim,
            config.encoder_depth,
            config.encoder_width,
            config.dim,
        );
        let snowflake = (config.geometry == GeometryKind::SnowflakeV1).then(|| {
            SnowflakeV1::build(
                &mut store,
                "snowflake",
                config.snowflake_depth,
                config.snowflake_width,
            )
        });
        Ok(Self {
            config,
            seed: 0,
            store,
            encoder,
            snowflake,
        })
    }

    pub fn init(config: BaselineConfig, seed: u64) -> Result<Self> {
        let mut m = Self::new(config)?;
        m.init_weights(seed);
        Ok(m)
    }

    pub fn init_weights(&mut self, seed: u64) {
        self.seed = seed;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        self.encoder.init(&mut self.store, &mut rng);
        if let Some(sf) = &self.snowflake {
            sf.init(&mut self.store, &mut rng);
        }
    }

    pub fn config(&self) -> &BaselineConfig {
        &self.config
    }

    pub fn geometry(&self) -> GeometryKind {
        self.config.geometry
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn store(&self) -> &ParamStore {
        &self.store
    }

    pub fn store_mut(&mut self) -> &mut ParamStore {
        &mut self.store
    }

    pub fn time_dim(&self) -> usize {
        self.config.geometry.baseline_time_dim()
    }

    pub fn embed(&self, tape: &mut Tape, features: Var) -> Result<Var> {
        Ok(self.encoder.forward(tape, &self.store, features)?)
    }

    fn euclidean(tape: &mut Tape, eu: Var, ev: Var) -> Result<Var> {
        let diff = tape.sub(eu, ev)?;
        let sq = tape.square(diff);
        let s = tape.sum_cols(sq);
        Ok(tape.sqrt(s))
    }

    /// Distances between matching rows. The second value lists the rows that
    /// are defined when the geometry can leave some pairs undefined (de
    /// Sitter); the returned column then only holds those rows.
    pub fn pair_distances(
        &self,
        tape: &mut Tape,
        eu: Var,
        ev: Var,
    ) -> Result<(Var, Option<Vec<usize>>)> {
        let k = self.config.dim;
        match self.config.geometry {
            GeometryKind::Euclidean | GeometryKind::Nst => Ok((Self::euclidean(tape, eu, ev)?, None)),
            GeometryKind::SnowflakeV1 => {
                let r = Self::euclidean(tape, eu, ev)?;
                let sf = self.snowflake.as_ref().expect("snowflake geometry has parameters");
                Ok((sf.forward(tape, &self.store, r)?, None))
            }
            GeometryKind::Minkowski => {
                let diff = tape.sub(ev, eu)?;
                let dt = tape.slice_cols(diff, 0, 1)?;
                let dx = tape.slice_cols(diff, 1, k)?;
                let dt2 = tape.square(dt);
                let dx2 = tape.square(dx);
                let dx2 = tape.sum_cols(dx2);
                let s2 = tape.sub(dt2, dx2)?;
                let s2 = tape.relu(s2);
                Ok((tape.sqrt(s2), None))
            }
            GeometryKind::Desitter => {
                let r2 = self.config.radius * self.config.radius;
                let tu = tape.slice_cols(eu, 0, 1)?;
                let tv = tape.slice_cols(ev, 0, 1)?;
                let yu = tape.slice_cols(eu, 1, k)?;
                let yv = tape.slice_cols(ev, 1, k)?;
                let rho = |tape: &mut Tape, t: Var| {
                    let t2 = tape.square(t);
                    let t2 = tape.add_const(t2, r2);
                    tape.sqrt(t2)
                };
                let (rho_u, rho_v) = (rho(tape, tu), rho(tape, tv));
                let sq = |tape: &mut Tape, y: Var| {
                    let y2 = tape.square(y);
                    tape.sum_cols(y2)
                };
                let (nu, nv) = (sq(tape, yu), sq(tape, yv));
                let norms = tape.mul(nu, nv)?;
                let norms = tape.sqrt(norms);
                let inv = tape.recip(norms);
                let yy = tape.mul(yu, yv)?;
                let dot = tape.sum_cols(yy);
                let rr = tape.mul(rho_u, rho_v)?;
                let spatial = tape.mul(dot, rr)?;
                let spatial = tape.mul(spatial, inv)?;
                let tt = tape.mul(tu, tv)?;
                let inner = tape.sub(spatial, tt)?;
                let arg = tape.scale(inner, 1.0 / r2);
                let defined: Vec<usize> = tape
                    .value(arg)
                    .data()
                    .iter()
                    .enumerate()
                    .filter(|(_, a)| (-1.0..=1.0).contains(*a))
                    .map(|(i, _)| i)
                    .collect();
                let kept = tape.gather_rows(arg, &defined)?;
                let angle = tape.acos(kept);
                Ok((tape.scale(angle, self.config.radius), Some(defined)))
            }
        }
    }

    /// Time coordinate of Lorentzian geometries (`n x 1`), `None` otherwise.
    pub fn time_codes(&self, tape: &mut Tape, emb: Var) -> Result<Option<Var>> {
        if self.time_dim() == 0 {
            return Ok(None);
        }
        Ok(Some(tape.slice_cols(emb, 0, 1)?))
    }

    pub fn embed_all(&self, features: &Matrix) -> Result<Matrix> {
        if features.cols() != self.config.input_dim {
            return Err(BaselineError::ShapeMismatch {
                expected: self.config.input_dim,
                found: features.cols(),
            });
        }
        let mut tape = Tape::new();
        let x = tape.constant(features.clone());
        let e = self.embed(&mut tape, x)?;
        Ok(tape.value(e).clone())
    }

    /// Distances for the listed row pairs; `None` marks an undefined pair.
    pub fn distances(&self, emb: &Matrix, pairs: &[(usize, usize)]) -> Result<Vec<Option<f64>>> {
        let mut tape = Tape::new();
        let e = tape.constant(emb.clone());
        let us: Vec<usize> = pairs.iter().map(|p| p.0).collect();
        let vs: Vec<usize> = pairs.iter().map(|p| p.1).collect();
        let eu = tape.gather_rows(e, &us)?;
        let ev = tape.gather_rows(e, &vs)?;
        let (d, rows) = self.pair_distances(&mut tape, eu, ev)?;
        let values = tape.value(d).data();
        Ok(match rows {
            None => values.iter().map(|&x| Some(x)).collect(),
            Some(rows) => {
                let mut out = vec![None; pairs.len()];
                for (&r, &x) in rows.iter().zip(values) {
                    out[r] = Some(x);
                }
                out
            }
        })
    }

    pub fn to_checkpoint(&self) -> Checkpoint {
        Checkpoint {
            format: checkpoint::FORMAT.to_string(),
            geometry: self.config.geometry.name().to_string(),
            config: serde_json::to_value(&self.config).expect("config serializes"),
            seed: self.seed,
            output_exponent: None,
            params: checkpoint::snapshot(&self.store),
        }
    }

    pub fn from_checkpoint(ck: &Checkpoint) -> Result<Self> {
        let config: BaselineConfig = serde_json::from_value(ck.config.clone())
            .map_err(|e| CheckpointError::Json(e.to_string()))?;
        if config.geometry.name() != ck.geometry {
            return Err(CheckpointError::Unsupported(format!(
                "geometry tag {:?} does not match configuration",
                ck.geometry
            ))
            .into());
        }
        let mut m = Self::new(config)?;
        m.seed = ck.seed;
        checkpoint::restore(&mut m.store, &ck.params)?;
        Ok(m)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::baselines::{desitter_distance, desitter_project, minkowski_interval};

    fn model(g: GeometryKind, dim: usize) -> BaselineModel {
        let cfg = BaselineConfig {
            encoder_depth: 1,
            encoder_width: 6,
            ..BaselineConfig::new(g, 2, dim)
        };
        BaselineModel::init(cfg, 3).unwrap()
    }

    #[test]
    fn tape_distances_match_closed_forms() {
        let pts = Matrix::from_rows(&[
            vec![0.0, 0.5, -0.2],
            vec![2.0, 0.1, 0.3],
            vec![-0.3, -0.8, 0.9],
            vec![0.1, 1.5, 0.2],
        ]);
        let pairs = [(0, 1), (1, 2), (2, 3), (0, 3), (3, 0)];
        let eu = model(GeometryKind::Euclidean, 3);
        let mk = model(GeometryKind::Minkowski, 3);
        let ds = model(GeometryKind::Desitter, 3);
        let de = eu.distances(&pts, &pairs).unwrap();
        let dm = mk.distances(&pts, &pairs).unwrap();
        let dd = ds.distances(&pts, &pairs).unwrap();
        let mut undefined = 0;
        for (i, &(u, v)) in pairs.iter().enumerate() {
            let (a, b) = (pts.row(u), pts.row(v));
            assert!((de[i].unwrap() - super::super::euclidean_distance(a, b)).abs() < 1e-12);
            assert!((dm[i].unwrap() - minkowski_interval(a, b).0).abs() < 1e-12);
            let (pa, pb) = (desitter_project(a, 1.0).unwrap(), desitter_project(b, 1.0).unwrap());
            match (dd[i], desitter_distance(&pa, &pb, 1.0)) {
                (Some(x), Some(y)) => assert!((x - y).abs() < 1e-9),
                (None, None) => undefined += 1,
                other => panic!("pair {i}: {other:?}"),
            }
        }
        assert!(undefined > 0);
    }

    #[test]
    fn validation_and_checkpoint() {
        assert!(BaselineModel::new(BaselineConfig::new(GeometryKind::Nst, 2, 2)).is_err());
        assert!(BaselineModel::new(BaselineConfig::new(GeometryKind::Minkowski, 2, 1)).is_err());
        let mut cfg = BaselineConfig::new(GeometryKind::Desitter, 2, 3);
        cfg.radius = 0.0;
        assert!(BaselineModel::new(cfg).is_err());
        let m = model(GeometryKind::SnowflakeV1, 2);
        let back = BaselineModel::from_checkpoint(&m.to_checkpoint()).unwrap();
        assert_eq!(back, m);
    }
}
