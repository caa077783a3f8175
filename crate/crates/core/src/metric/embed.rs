use serde::{Deserialize, Serialize};

use super::{set_distance, AnchorFamily, Distance, DistanceMatrix};
use crate::par;
use crate::tensor::Matrix;
use crate::{Error, Result};

/// Anchor embedding: entry `(v, m)` is `d(v, S_m) / k`.
///
/// Empty sets give a zero coordinate. A nonempty set that `v` cannot reach
/// is an error.
pub fn bourgain_embed(dm: &DistanceMatrix, fam: &AnchorFamily) -> Result<Matrix> {
    let (n, k) = (dm.n(), fam.k());
    let mut data = Vec::with_capacity(n * k);
    for v in 0..n {
        for set in fam.sets() {
            if set.is_empty() {
                data.push(0.0);
                continue;
            }
            match set_distance(dm, v, set) {
                Distance::Hops(h) => data.push(f64::from(h) / k as f64),
                Distance::Unreachable => {
                    return Err(Error::Disconnected(format!(
                        "node {v} cannot reach anchor set {:?}",
                        set
                    )))
                }
            }
        }
    }
    Matrix::new(n, k, data)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum Norm {
    #[serde(rename = "1")]
    L1,
    #[serde(rename = "2")]
    L2,
    #[serde(rename = "inf")]
    LInf,
}

impl Norm {
    pub fn distance(self, a: &[f64], b: &[f64]) -> f64 {
        let diffs = a.iter().zip(b).map(|(x, y)| (x - y).abs());
        match self {
            Norm::L1 => diffs.sum(),
            Norm::L2 => diffs.map(|d| d * d).sum::<f64>().sqrt(),
            Norm::LInf => diffs.fold(0.0, f64::max),
        }
    }
}

impl std::str::FromStr for Norm {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "1" | "l1" => Ok(Norm::L1),
            "2" | "l2" => Ok(Norm::L2),
            "inf" | "linf" => Ok(Norm::LInf),
            _ => Err(Error::invalid(format!("norm must be 1, 2 or inf, got {s:?}"))),
        }
    }
}

impl std::fmt::Display for Norm {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Norm::L1 => "1",
            Norm::L2 => "2",
            Norm::LInf => "inf",
        })
    }
}

/// Worst-case stretch of an embedding over all node pairs.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Distortion {
    /// `max d'(f(u), f(v)) / d(u, v)`.
    pub expansion: f64,
    /// `max d(u, v) / d'(f(u), f(v))`; infinite if two nodes collapse.
    pub contraction: f64,
    /// `expansion * contraction`: the smallest two-sided distortion over all
    /// uniform rescalings of the embedding.
    pub distortion: f64,
}

pub fn measure_distortion(dm: &DistanceMatrix, emb: &Matrix, norm: Norm) -> Result<Distortion> {
    let n = dm.n();
    if n < 2 {
        return Err(Error::invalid("distortion needs at least two nodes"));
    }
    if emb.rows() != n {
        return Err(Error::Shape {
            op: "measure_distortion",
            left: (n, n),
            right: emb.shape(),
        });
    }
    if !dm.is_fully_reachable() {
        return Err(Error::Disconnected("distortion needs every pair reachable".into()));
    }
    let per_row = par::map_range(n, |u| {
        let mut expansion = 0.0f64;
        let mut contraction = 0.0f64;
        for v in u + 1..n {
            let d = f64::from(dm.get(u, v).hops().expect("checked reachable"));
            let e = norm.distance(emb.row(u), emb.row(v));
            expansion = expansion.max(e / d);
            contraction = if e == 0.0 {
                f64::INFINITY
            } else {
                contraction.max(d / e)
            };
        }
        (expansion, contraction)
    });
    let (expansion, contraction) = per_row
        .into_iter()
        .fold((0.0f64, 0.0f64), |(e, c), (re, rc)| (e.max(re), c.max(rc)));
    let distortion = if contraction.is_infinite() {
        f64::INFINITY
    } else {
        expansion * contraction
    };
    Ok(Distortion {
        expansion,
        contraction,
        distortion,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::{path_graph, Graph};
    use crate::metric::all_pairs;

    #[test]
    fn singleton_column() {
        let dm = all_pairs(&path_graph(3).unwrap());
        let fam = AnchorFamily::from_sets(3, vec![vec![0]]).unwrap();
        let e = bourgain_embed(&dm, &fam).unwrap();
        assert_eq!(e.data(), &[0.0, 1.0, 2.0]);
        let fam = AnchorFamily::from_sets(3, vec![vec![1], vec![]]).unwrap();
        let e = bourgain_embed(&dm, &fam).unwrap();
        assert_eq!(e.row(1), &[0.0, 0.0]);
        assert_eq!(e.row(0), &[0.5, 0.0]);
    }

    #[test]
    fn disconnected_embedding_errors() {
        let dm = all_pairs(&Graph::from_edges(4, [(0, 1), (2, 3)]).unwrap());
        let fam = AnchorFamily::from_sets(4, vec![vec![0]]).unwrap();
        assert!(matches!(bourgain_embed(&dm, &fam), Err(Error::Disconnected(_))));
    }

    #[test]
    fn line_isometry() {
        let dm = all_pairs(&path_graph(6).unwrap());
        let emb = Matrix::from_fn(6, 1, |r, _| r as f64).unwrap();
        for norm in [Norm::L1, Norm::L2, Norm::LInf] {
            let d = measure_distortion(&dm, &emb, norm).unwrap();
            assert_eq!((d.expansion, d.contraction, d.distortion), (1.0, 1.0, 1.0));
        }
    }

    #[test]
    fn rescaling_does_not_move_distortion() {
        let dm = all_pairs(&path_graph(5).unwrap());
        let emb = Matrix::from_fn(5, 2, |r, c| ((r * r) as f64) * 0.1 + c as f64).unwrap();
        let scaled = Matrix::from_fn(5, 2, |r, c| emb.get(r, c) * 7.0).unwrap();
        let a = measure_distortion(&dm, &emb, Norm::L2).unwrap();
        let b = measure_distortion(&dm, &scaled, Norm::L2).unwrap();
        assert!((a.distortion - b.distortion).abs() < 1e-9 * a.distortion);
    }

    #[test]
    fn collapsed_embedding_is_infinite() {
        let dm = all_pairs(&path_graph(3).unwrap());
        let d = measure_distortion(&dm, &Matrix::zeros(3, 4), Norm::L1).unwrap();
        assert_eq!(d.expansion, 0.0);
        assert!(d.contraction.is_infinite() && d.distortion.is_infinite());
    }

    #[test]
    fn norm_parsing() {
        assert_eq!("1".parse::<Norm>().unwrap(), Norm::L1);
        assert_eq!("inf".parse::<Norm>().unwrap(), Norm::LInf);
        assert!("3".parse::<Norm>().is_err());
    }
}
