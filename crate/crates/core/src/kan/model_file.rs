use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{Edge, KanError, KanLayer, KanNetwork};
use crate::dataio::FeatureScaler;
use crate::rng::PRNG_ID;
use crate::spline::{KnotGrid, SplineCoeffs};

pub const KAN_SCHEMA_VERSION: u32 = 1;
const DEGREE_CONVENTION: &str = "k is the polynomial degree; each edge has g + k basis functions";

/// On-disk JSON layout of a network.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelFile {
    pub schema_version: u32,
    pub kind: String,
    pub prng: String,
    pub degree_convention: String,
    pub seed: u64,
    pub width: Vec<usize>,
    pub inputs: Vec<String>,
    pub scaler: Option<FeatureScaler>,
    pub layers: Vec<LayerRecord>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LayerRecord {
    pub in_dim: usize,
    pub out_dim: usize,
    pub edges: Vec<EdgeRecord>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EdgeRecord {
    pub from: usize,
    pub to: usize,
    pub domain: [f64; 2],
    pub g: usize,
    pub k: usize,
    pub coeffs: Vec<f64>,
    pub w_base: f64,
    pub w_spline: f64,
    pub active: bool,
}

impl From<&KanNetwork> for ModelFile {
    fn from(net: &KanNetwork) -> Self {
        ModelFile {
            schema_version: KAN_SCHEMA_VERSION,
            kind: "kan".into(),
            prng: PRNG_ID.into(),
            degree_convention: DEGREE_CONVENTION.into(),
            seed: net.seed,
            width: net.width.clone(),
            inputs: net.inputs.clone(),
            scaler: net.scaler.clone(),
            layers: net
                .layers
                .iter()
                .map(|l| LayerRecord {
                    in_dim: l.in_dim,
                    out_dim: l.out_dim,
                    edges: l
                        .edges
                        .iter()
                        .enumerate()
                        .map(|(e, edge)| EdgeRecord {
                            from: e / l.out_dim,
                            to: e % l.out_dim,
                            domain: [edge.grid.lo, edge.grid.hi],
                            g: edge.grid.g,
                            k: edge.grid.k,
                            coeffs: edge.coeffs.0.clone(),
                            w_base: edge.w_base,
                            w_spline: edge.w_spline,
                            active: edge.active,
                        })
                        .collect(),
                })
                .collect(),
        }
    }
}

impl TryFrom<ModelFile> for KanNetwork {
    type Error = KanError;

    fn try_from(f: ModelFile) -> Result<Self, KanError> {
        let bad = |m: String| KanError::ModelFile(m);
        if f.kind != "kan" {
            return Err(bad(format!("expected kind \"kan\", found {:?}", f.kind)));
        }
        if f.schema_version != KAN_SCHEMA_VERSION {
            return Err(bad(format!(
                "unsupported schema_version {}",
                f.schema_version
            )));
        }
        if f.width.len() < 2 || f.width.contains(&0) {
            return Err(KanError::InvalidWidth(format!("{:?}", f.width)));
        }
        if f.layers.len() != f.width.len() - 1 {
            return Err(bad("layer count does not match width".into()));
        }
        if f.inputs.len() != f.width[0] {
            return Err(bad("input name count does not match width[0]".into()));
        }
        let mut layers = Vec::with_capacity(f.layers.len());
        for (l, rec) in f.layers.into_iter().enumerate() {
            if rec.in_dim != f.width[l] || rec.out_dim != f.width[l + 1] {
                return Err(bad(format!("layer {l} dimensions disagree with width")));
            }
            if rec.edges.len() != rec.in_dim * rec.out_dim {
                return Err(bad(format!("layer {l} has {} edges", rec.edges.len())));
            }
            let mut edges = Vec::with_capacity(rec.edges.len());
            for (e, er) in rec.edges.into_iter().enumerate() {
                if er.from != e / rec.out_dim || er.to != e % rec.out_dim {
                    return Err(bad(format!("layer {l} edge {e} out of order")));
                }
                let grid = KnotGrid::new(er.g, er.k, er.domain[0], er.domain[1])?;
                edges.push(Edge {
                    grid,
                    coeffs: SplineCoeffs::for_grid(&grid, er.coeffs)?,
                    w_base: er.w_base,
                    w_spline: er.w_spline,
                    active: er.active,
                });
            }
            layers.push(KanLayer {
                in_dim: rec.in_dim,
                out_dim: rec.out_dim,
                edges,
            });
        }
        Ok(KanNetwork {
            width: f.width,
            layers,
            seed: f.seed,
            inputs: f.inputs,
            scaler: f.scaler,
        })
    }
}

impl KanNetwork {
    pub fn to_json(&self) -> Result<String, KanError> {
        Ok(serde_json::to_string_pretty(&ModelFile::from(self))?)
    }

    pub fn from_json(s: &str) -> Result<Self, KanError> {
        let f: ModelFile = serde_json::from_str(s)?;
        f.try_into()
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<(), KanError> {
        std::fs::write(path, self.to_json()? + "\n")?;
        Ok(())
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self, KanError> {
        Self::from_json(&std::fs::read_to_string(path)?)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn round_trip_is_exact() {
        let mut net = KanNetwork::init(&[3, 2, 1], 5, 2, 77).unwrap();
        net.layers[0].edges[3].active = false;
        net.inputs = vec!["a".into(), "b".into(), "c".into()];
        let back = KanNetwork::from_json(&net.to_json().unwrap()).unwrap();
        assert_eq!(back, net);
    }

    #[test]
    fn rejects_inconsistent_files() {
        let net = KanNetwork::init(&[2, 1], 3, 2, 1).unwrap();
        let mut f = ModelFile::from(&net);
        f.layers[0].edges[0].coeffs.pop();
        assert!(KanNetwork::try_from(f).is_err());

        let mut f = ModelFile::from(&net);
        f.kind = "mlp".into();
        assert!(KanNetwork::try_from(f).is_err());
    }
}
