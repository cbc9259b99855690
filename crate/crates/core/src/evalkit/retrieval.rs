use std::collections::HashMap;
use std::fmt;

use ndarray::Array2;
use serde::{Deserialize, Serialize};

use crate::encoder::{Embedding, Modality};
use crate::error::{invalid, Error, Result};

pub const DEFAULT_KS: [usize; 3] = [1, 5, 10];

/// Cosine similarities, rows are queries and columns gallery items.
#[derive(Debug, Clone, PartialEq)]
pub struct SimilarityMatrix {
    pub values: Array2<f64>,
    pub query_ids: Vec<String>,
    pub gallery_ids: Vec<String>,
}

impl SimilarityMatrix {
    pub fn new(values: Array2<f64>, query_ids: Vec<String>, gallery_ids: Vec<String>) -> Result<Self> {
        if values.nrows() != query_ids.len() || values.ncols() != gallery_ids.len() {
            return Err(Error::ShapeMismatch("similarity matrix does not match its id lists".into()));
        }
        if let Some(v) = values.iter().find(|v| !(v.abs() <= 1.0 + 1e-6)) {
            return Err(invalid(format!("similarity {v} outside [-1, 1]")));
        }
        Ok(Self { values, query_ids, gallery_ids })
    }

    /// Cosine similarity of every query embedding against every gallery one.
    pub fn from_embeddings(queries: &[Embedding], gallery: &[Embedding]) -> Result<Self> {
        let q = unit_rows(queries)?;
        let g = unit_rows(gallery)?;
        if q.ncols() != g.ncols() {
            return Err(Error::ShapeMismatch("query and gallery embeddings differ in size".into()));
        }
        let values = q.dot(&g.t()).mapv(|v| v.clamp(-1.0, 1.0));
        Self::new(
            values,
            queries.iter().map(|e| e.id.clone()).collect(),
            gallery.iter().map(|e| e.id.clone()).collect(),
        )
    }

    /// For each query, the gallery column holding the item with the same id.
    pub fn ground_truth_by_id(&self) -> Result<Vec<usize>> {
        let index: HashMap<&str, usize> = self.gallery_ids.iter().enumerate().map(|(i, id)| (id.as_str(), i)).collect();
        self.query_ids
            .iter()
            .map(|id| index.get(id.as_str()).copied().ok_or_else(|| Error::MissingGroundTruth(id.clone())))
            .collect()
    }
}

fn unit_rows(list: &[Embedding]) -> Result<Array2<f64>> {
    let width = list.first().map_or(0, |e| e.flat().len());
    let mut out = Array2::zeros((list.len(), width));
    for (i, e) in list.iter().enumerate() {
        let u = e.unit_vector().ok_or_else(|| invalid(format!("embedding '{}' has zero norm", e.id)))?;
        if u.len() != width {
            return Err(Error::ShapeMismatch("embeddings differ in size".into()));
        }
        out.row_mut(i).assign(&ndarray::ArrayView1::from(&u));
    }
    Ok(out)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RetrievalMetrics {
    /// `(K, recall in percent)`.
    pub recall: Vec<(usize, f64)>,
    pub mrr: f64,
    pub median_rank: f64,
    pub mean_rank: f64,
}

impl RetrievalMetrics {
    pub fn recall_at(&self, k: usize) -> Option<f64> {
        self.recall.iter().find(|(kk, _)| *kk == k).map(|(_, r)| *r)
    }
}

/// 1-based rank of `gt` in a row: items with higher similarity come first and
/// equal similarities keep gallery order.
pub fn rank_of(row: &[f64], gt: usize) -> usize {
    let s = row[gt];
    1 + row.iter().enumerate().filter(|&(j, &v)| v > s || (v == s && j < gt)).count()
}

pub fn median(values: &mut [f64]) -> f64 {
    values.sort_by(|a, b| a.total_cmp(b));
    let n = values.len();
    if n % 2 == 1 {
        values[n / 2]
    } else {
        0.5 * (values[n / 2 - 1] + values[n / 2])
    }
}

pub fn retrieval_metrics(sim: &SimilarityMatrix, ground_truth: &[usize], ks: &[usize]) -> Result<RetrievalMetrics> {
    let n = sim.values.nrows();
    if n == 0 {
        return Err(invalid("similarity matrix has no queries"));
    }
    if ground_truth.len() != n {
        return Err(Error::MissingGroundTruth(format!("{} ground-truth entries for {n} queries", ground_truth.len())));
    }
    let mut ranks = Vec::with_capacity(n);
    for (i, &gt) in ground_truth.iter().enumerate() {
        if gt >= sim.values.ncols() {
            return Err(Error::MissingGroundTruth(sim.query_ids.get(i).cloned().unwrap_or_default()));
        }
        let row = sim.values.row(i);
        ranks.push(rank_of(row.as_slice().expect("standard layout"), gt) as f64);
    }
    let recall = ks
        .iter()
        .map(|&k| (k, 100.0 * ranks.iter().filter(|&&r| r <= k as f64).count() as f64 / n as f64))
        .collect();
    let mrr = ranks.iter().map(|r| 1.0 / r).sum::<f64>() / n as f64;
    let mean_rank = ranks.iter().sum::<f64>() / n as f64;
    Ok(RetrievalMetrics { recall, mrr, median_rank: median(&mut ranks), mean_rank })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PairMetrics {
    pub query: Modality,
    pub gallery: Modality,
    pub metrics: RetrievalMetrics,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RetrievalReport {
    pub pairs: Vec<PairMetrics>,
    pub average: RetrievalMetrics,
}

/// `R@1 24.9, R@5 49.0, R@10 60.6, MRR 0.367, median 9.8, mean 21.2`
impl fmt::Display for RetrievalMetrics {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for (k, r) in &self.recall {
            write!(f, "R@{k} {r:.1}, ")?;
        }
        write!(f, "MRR {:.3}, median {:.1}, mean {:.1}", self.mrr, self.median_rank, self.mean_rank)
    }
}

fn average(items: &[&RetrievalMetrics]) -> RetrievalMetrics {
    let n = items.len() as f64;
    let recall = items[0]
        .recall
        .iter()
        .enumerate()
        .map(|(i, (k, _))| (*k, items.iter().map(|m| m.recall[i].1).sum::<f64>() / n))
        .collect();
    RetrievalMetrics {
        recall,
        mrr: items.iter().map(|m| m.mrr).sum::<f64>() / n,
        median_rank: items.iter().map(|m| m.median_rank).sum::<f64>() / n,
        mean_rank: items.iter().map(|m| m.mean_rank).sum::<f64>() / n,
    }
}

impl RetrievalReport {
    pub fn to_csv(&self) -> String {
        let ks: Vec<usize> = self.average.recall.iter().map(|(k, _)| *k).collect();
        let mut out = String::from("query,gallery");
        for k in &ks {
            out.push_str(&format!(",R@{k}"));
        }
        out.push_str(",MRR,median_rank,mean_rank\n");
        let mut row = |q: &str, g: &str, m: &RetrievalMetrics| {
            out.push_str(&format!("{q},{g}"));
            for (_, r) in &m.recall {
                out.push_str(&format!(",{r:.4}"));
            }
            out.push_str(&format!(",{:.6},{:.4},{:.4}\n", m.mrr, m.median_rank, m.mean_rank));
        };
        for p in &self.pairs {
            row(p.query.name(), p.gallery.name(), &p.metrics);
        }
        row("AVERAGE", "AVERAGE", &self.average);
        out
    }
}

/// Retrieval for every ordered modality pair over aligned embedding lists,
/// plus the average over pairs.
pub fn cross_modal_report(embeddings: &[(Modality, Vec<Embedding>)], ks: &[usize]) -> Result<RetrievalReport> {
    if embeddings.len() < 2 {
        return Err(invalid("need at least two modalities"));
    }
    let ids: Vec<&str> = embeddings[0].1.iter().map(|e| e.id.as_str()).collect();
    if ids.len() < 2 {
        return Err(invalid("need at least two aligned samples"));
    }
    for (m, list) in embeddings {
        if list.len() != ids.len() || list.iter().zip(&ids).any(|(e, id)| e.id != *id) {
            return Err(Error::ShapeMismatch(format!("{m} embeddings are not aligned with the others")));
        }
    }
    let mut pairs = Vec::new();
    for (qm, q) in embeddings {
        for (gm, g) in embeddings {
            if qm == gm {
                continue;
            }
            let sim = SimilarityMatrix::from_embeddings(q, g)?;
            let gt: Vec<usize> = (0..q.len()).collect();
            pairs.push(PairMetrics { query: *qm, gallery: *gm, metrics: retrieval_metrics(&sim, &gt, ks)? });
        }
    }
    let average = average(&pairs.iter().map(|p| &p.metrics).collect::<Vec<_>>());
    Ok(RetrievalReport { pairs, average })
}
