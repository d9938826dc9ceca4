//! Stochastic block model generator for node classification.

use lanczos_net::io::{write_graph, write_labels, write_matrix_csv, write_split};
use lanczos_net::train::Split;
use lanczos_net::{Graph, Labels, Matrix};
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{CliError, CliResult};

/// Share of each block reserved for validation.
pub const VAL_FRACTION: f64 = 0.2;
/// Attempts at drawing a connected graph before giving up and emitting the last draw.
pub const MAX_ATTEMPTS: usize = 10;

fn default_noise() -> f64 {
    1.0
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SbmSpec {
    pub num_nodes: usize,
    pub num_blocks: usize,
    pub p_in: f64,
    pub p_out: f64,
    pub feature_dim: usize,
    /// Standard deviation of the Gaussian noise added to the one-hot block features.
    #[serde(default = "default_noise")]
    pub feature_noise: f64,
    pub label_fraction: f64,
    /// Falls back to the run seed when absent.
    #[serde(default)]
    pub seed: Option<u64>,
}

impl SbmSpec {
    pub fn validate(&self) -> CliResult<()> {
        let bad = |m: String| Err(CliError::Usage(format!("sbm: {m}")));
        if self.num_blocks == 0 || self.num_nodes < self.num_blocks {
            return bad(format!(
                "need 1 <= num_blocks <= num_nodes, got {} blocks for {} nodes",
                self.num_blocks, self.num_nodes
            ));
        }
        if !(0.0 <= self.p_out && self.p_out <= self.p_in && self.p_in <= 1.0) {
            return bad(format!(
                "need 0 <= p_out <= p_in <= 1, got p_in={} p_out={}",
                self.p_in, self.p_out
            ));
        }
        if !(self.label_fraction > 0.0 && self.label_fraction <= 1.0) {
            return bad(format!(
                "label_fraction must lie in (0, 1], got {}",
                self.label_fraction
            ));
        }
        if self.feature_dim < self.num_blocks {
            return bad(format!(
                "feature_dim {} is smaller than num_blocks {}",
                self.feature_dim, self.num_blocks
            ));
        }
        if !(self.feature_noise >= 0.0 && self.feature_noise.is_finite()) {
            return bad(format!(
                "feature_noise must be finite and >= 0, got {}",
                self.feature_noise
            ));
        }
        Ok(())
    }

    /// Contiguous, near-equal blocks.
    pub fn block_of(&self, node: usize) -> usize {
        node * self.num_blocks / self.num_nodes
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SbmData {
    /// Graph with features attached.
    pub graph: Graph,
    pub labels: Vec<usize>,
    pub split: Split,
    /// Draws needed to get a connected graph; `MAX_ATTEMPTS + 1` means none was.
    pub attempts: usize,
}

impl SbmData {
    pub fn connected(&self) -> bool {
        self.attempts <= MAX_ATTEMPTS
    }
}

pub fn generate(spec: &SbmSpec, seed: u64) -> CliResult<SbmData> {
    spec.validate()?;
    let n = spec.num_nodes;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut attempts = 0;
    let graph = loop {
        attempts += 1;
        let mut edges = Vec::new();
        for i in 0..n {
            for j in i + 1..n {
                let p = if spec.block_of(i) == spec.block_of(j) {
                    spec.p_in
                } else {
                    spec.p_out
                };
                if rng.random_bool(p) {
                    edges.push((i, j, 1.0));
                }
            }
        }
        let g = Graph::new(n, edges)?;
        if g.component_count() == 1 {
            break g;
        }
        if attempts == MAX_ATTEMPTS {
            attempts += 1;
            break g;
        }
    };
    let labels: Vec<usize> = (0..n).map(|i| spec.block_of(i)).collect();
    let features = Matrix::from_fn(n, spec.feature_dim, |i, c| {
        let noise: f64 = rng.sample(StandardNormal);
        let hot = if c == labels[i] { 1.0 } else { 0.0 };
        hot + spec.feature_noise * noise
    });
    let (mut train, mut val, mut test) = (Vec::new(), Vec::new(), Vec::new());
    for b in 0..spec.num_blocks {
        let mut members: Vec<usize> = (0..n).filter(|&i| labels[i] == b).collect();
        members.shuffle(&mut rng);
        let size = members.len();
        let n_val = ((VAL_FRACTION * size as f64).round() as usize).min(size - 1);
        let n_train = ((spec.label_fraction * size as f64).round() as usize).clamp(1, size - n_val);
        val.extend_from_slice(&members[..n_val]);
        train.extend_from_slice(&members[n_val..n_val + n_train]);
        test.extend_from_slice(&members[n_val + n_train..]);
    }
    for v in [&mut train, &mut val, &mut test] {
        v.sort_unstable();
    }
    let split = Split::new(train, val, test, n)?;
    let graph = graph.with_features(features)?;
    Ok(SbmData {
        graph,
        labels,
        split,
        attempts,
    })
}

/// File contents for `graph.txt`, `features.csv`, `labels.txt` and `split.txt`.
pub fn render(data: &SbmData) -> Vec<(&'static str, String)> {
    let features = data.graph.features.as_ref().expect("generated graphs carry features");
    vec![
        ("graph.txt", write_graph(&data.graph)),
        ("features.csv", write_matrix_csv(features)),
        ("labels.txt", write_labels(&Labels::Classes(data.labels.clone()))),
        ("split.txt", write_split(&data.split)),
    ]
}

#[cfg(test)]
mod tests {
    use super::*;

    fn spec(n: usize, b: usize, p_in: f64, p_out: f64, frac: f64) -> SbmSpec {
        SbmSpec {
            num_nodes: n,
            num_blocks: b,
            p_in,
            p_out,
            feature_dim: b,
            feature_noise: 0.0,
            label_fraction: frac,
            seed: None,
        }
    }

    #[test]
    fn two_cliques() {
        let d = generate(&spec(8, 2, 1.0, 0.0, 0.5), 1).unwrap();
        assert_eq!(d.labels, vec![0, 0, 0, 0, 1, 1, 1, 1]);
        assert_eq!(d.graph.num_edges(), 12);
        for e in d.graph.edges() {
            assert_eq!(d.labels[e.i], d.labels[e.j]);
        }
        assert!(!d.connected());
        assert_eq!(d.attempts, MAX_ATTEMPTS + 1);
        let f = d.graph.features.as_ref().unwrap();
        assert_eq!(f[(0, 0)], 1.0);
        assert_eq!(f[(5, 1)], 1.0);
        assert_eq!(f[(5, 0)], 0.0);
    }

    #[test]
    fn full_label_fraction_trains_on_everything_else() {
        let d = generate(&spec(20, 2, 0.8, 0.1, 1.0), 3).unwrap();
        assert_eq!(d.split.val.len(), 4);
        assert!(d.split.test.is_empty());
        assert_eq!(d.split.train.len(), 16);
    }

    #[test]
    fn small_fraction_keeps_one_label_per_block() {
        let d = generate(&spec(120, 3, 0.2, 0.02, 0.05), 0).unwrap();
        assert_eq!(d.split.train.len(), 6);
        assert_eq!(d.split.val.len(), 24);
        assert_eq!(d.split.test.len(), 90);
        for b in 0..3 {
            assert_eq!(d.split.train.iter().filter(|&&i| d.labels[i] == b).count(), 2);
        }
    }

    #[test]
    fn deterministic_given_seed() {
        let s = SbmSpec {
            feature_noise: 1.0,
            ..spec(30, 3, 0.5, 0.05, 0.2)
        };
        assert_eq!(render(&generate(&s, 7).unwrap()), render(&generate(&s, 7).unwrap()));
        assert_ne!(render(&generate(&s, 7).unwrap()), render(&generate(&s, 8).unwrap()));
    }

    #[test]
    fn rejects_invalid_specs() {
        assert!(generate(&spec(10, 2, 0.1, 0.2, 0.5), 0).is_err());
        assert!(generate(&spec(10, 2, 0.5, 0.2, 0.0), 0).is_err());
        assert!(generate(&spec(10, 2, 1.5, 0.2, 0.5), 0).is_err());
        assert!(generate(&spec(1, 2, 0.5, 0.2, 0.5), 0).is_err());
    }
}
