use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::graph::{connected_caveman, grid_graph, load_edge_list, load_features_csv, load_labels, split_pairs};
use crate::graph::{EdgeSplit, Graph, PairTask};
use crate::train::{ModelSpec, TrainConfig};
use crate::{Error, Result};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum DatasetSpec {
    Grid {
        rows: usize,
        cols: usize,
    },
    Communities {
        n_comm: usize,
        comm_size: usize,
        rewire_prob: f64,
        seed: u64,
    },
    /// Paths are resolved against the config file's directory.
    EdgeList {
        edges: PathBuf,
        #[serde(default)]
        labels: Option<PathBuf>,
        #[serde(default)]
        features: Option<PathBuf>,
    },
}

impl DatasetSpec {
    pub fn name(&self) -> String {
        match self {
            DatasetSpec::Grid { rows, cols } => format!("grid_{rows}x{cols}"),
            DatasetSpec::Communities {
                n_comm,
                comm_size,
                rewire_prob,
                ..
            } => format!("communities_{n_comm}x{comm_size}_p{rewire_prob}"),
            DatasetSpec::EdgeList { edges, .. } => format!("edge_list:{}", edges.display()),
        }
    }

    fn validate(&self) -> Result<()> {
        match *self {
            DatasetSpec::Grid { rows, cols } if rows == 0 || cols == 0 => {
                Err(Error::Config("dataset.rows and dataset.cols must be >= 1".into()))
            }
            DatasetSpec::Communities { n_comm, comm_size, .. } if n_comm == 0 || comm_size == 0 => Err(Error::Config(
                "dataset.n_comm and dataset.comm_size must be >= 1".into(),
            )),
            DatasetSpec::Communities { rewire_prob, .. } if !(0.0..=1.0).contains(&rewire_prob) => Err(Error::Config(
                format!("dataset.rewire_prob must be in [0, 1], got {rewire_prob}"),
            )),
            _ => Ok(()),
        }
    }

    pub fn load(&self, base: &Path) -> Result<Graph> {
        match self {
            DatasetSpec::Grid { rows, cols } => grid_graph(*rows, *cols),
            DatasetSpec::Communities {
                n_comm,
                comm_size,
                rewire_prob,
                seed,
            } => connected_caveman(*n_comm, *comm_size, *rewire_prob, *seed),
            DatasetSpec::EdgeList {
                edges,
                labels,
                features,
            } => {
                let mut g = load_edge_list(base.join(edges))?;
                if let Some(path) = labels {
                    let l = load_labels(base.join(path), g.n())?;
                    g = g.with_labels(l)?;
                }
                if let Some(path) = features {
                    let f = load_features_csv(base.join(path), g.n())?;
                    g = g.with_features(f)?;
                }
                Ok(g)
            }
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SplitConfig {
    pub val_frac: f64,
    pub test_frac: f64,
    pub seed: u64,
}

impl Default for SplitConfig {
    fn default() -> Self {
        Self {
            val_frac: 0.1,
            test_frac: 0.1,
            seed: 0,
        }
    }
}

/// One `train` or `eval` run, read from a JSON file.
///
/// Omitted `split`, `train` and model fields take their defaults; the
/// resolved config is echoed into the metrics file.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub dataset: DatasetSpec,
    pub task: PairTask,
    #[serde(default)]
    pub split: SplitConfig,
    pub model: ModelSpec,
    #[serde(default)]
    pub train: TrainConfig,
    /// Output directory; `--out` overrides it.
    #[serde(default)]
    pub out: Option<PathBuf>,
    /// Fill `wall_time_s` in the metrics. Off by default, since timings make
    /// repeated runs differ.
    #[serde(default)]
    pub record_wall_time: bool,
}

impl RunConfig {
    pub fn from_json(text: &str) -> Result<Self> {
        serde_json::from_str(text).map_err(|e| Error::Config(e.to_string()))
    }

    pub fn read(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_json(&text)
    }

    pub fn validate(&self) -> Result<()> {
        self.dataset.validate()?;
        self.model.validate()?;
        self.train.validate()?;
        let SplitConfig {
            val_frac, test_frac, ..
        } = self.split;
        for (key, f) in [("split.val_frac", val_frac), ("split.test_frac", test_frac)] {
            if !(0.0..1.0).contains(&f) {
                return Err(Error::Config(format!("{key} must be in [0, 1), got {f}")));
            }
        }
        if val_frac + test_frac >= 1.0 {
            return Err(Error::Config("split.val_frac + split.test_frac must be < 1".into()));
        }
        if val_frac == 0.0 || test_frac == 0.0 {
            return Err(Error::Config("split.val_frac and split.test_frac must be > 0".into()));
        }
        Ok(())
    }

    /// Loads the dataset and draws the split.
    pub fn materialize(&self, base: &Path) -> Result<(Graph, EdgeSplit)> {
        let g = self.dataset.load(base)?;
        let split = split_pairs(
            &g,
            self.task,
            self.split.val_frac,
            self.split.test_frac,
            self.split.seed,
        )?;
        Ok((g, split))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const MINIMAL: &str = r#"{
        "dataset": {"kind": "grid", "rows": 3, "cols": 4},
        "task": "link_prediction",
        "model": {"kind": "pgnn", "layers": 1}
    }"#;

    #[test]
    fn defaults_fill_omitted_sections() {
        let c = RunConfig::from_json(MINIMAL).unwrap();
        assert_eq!(c.train, TrainConfig::default());
        assert_eq!(c.split, SplitConfig::default());
        let ModelSpec::Pgnn(m) = &c.model else { panic!() };
        assert_eq!(m.layers, 1);
        c.validate().unwrap();
        let echoed = serde_json::to_string(&c).unwrap();
        assert_eq!(RunConfig::from_json(&echoed).unwrap(), c);
    }

    #[test]
    fn unknown_keys_are_named() {
        let text = MINIMAL.replace(r#""layers": 1"#, r#""layers": 1, "dropout": 0.5"#);
        assert!(RunConfig::from_json(&text).unwrap_err().to_string().contains("dropout"));
        let text = MINIMAL.replace(r#""rows": 3"#, r#""rows": 3, "depth": 1"#);
        assert!(RunConfig::from_json(&text).unwrap_err().to_string().contains("depth"));
        let text = MINIMAL.replace(r#""task""#, r#""mode": 1, "task""#);
        assert!(RunConfig::from_json(&text).unwrap_err().to_string().contains("mode"));
    }

    #[test]
    fn semantic_errors_name_keys() {
        let mut c = RunConfig::from_json(MINIMAL).unwrap();
        c.split.test_frac = 0.95;
        assert!(c.validate().unwrap_err().to_string().contains("split."));
        let mut c = RunConfig::from_json(MINIMAL).unwrap();
        c.dataset = DatasetSpec::Communities {
            n_comm: 2,
            comm_size: 3,
            rewire_prob: 2.0,
            seed: 0,
        };
        assert!(c.validate().unwrap_err().to_string().contains("dataset.rewire_prob"));
    }
}
