//! Agglomerative grouping of map code vectors into superclasses.
//!
//! Ward linkage: each merge is the pair of clusters whose fusion increases
//! the within-cluster sum of squares the least. The increase for clusters
//! A, B with centroids μA, μB is `|A||B| / (|A|+|B|) · ‖μA − μB‖²`, so the
//! hierarchy can be built from centroids and sizes alone.
//!
//! The number of superclasses is either forced or chosen as the smallest k
//! whose clustering explains at least a given share of the total variance.
//!
//! Everything here is deterministic: cost ties are broken by the lowest
//! original point index of the clusters involved.

use crate::error::{CoreError, Result};

/// One agglomeration step. `left` and `right` are the representatives
/// (lowest original point index) of the two merged clusters, `left < right`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct WardMerge {
    pub left: usize,
    pub right: usize,
    /// Increase in within-cluster sum of squares caused by this merge.
    pub cost: f64,
}

/// How to pick the number of superclasses.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum KSelection {
    /// Use exactly this many clusters.
    Forced(usize),
    /// Smallest k whose clustering reaches this explained-variance share
    /// (in (0, 1]).
    ExplainedVariance(f64),
}

struct ClusterState {
    centroid: Vec<f64>,
    size: usize,
    min_index: usize,
}

fn check_points<P: AsRef<[f64]>>(points: &[P]) -> Result<usize> {
    if points.is_empty() {
        return Err(CoreError::EmptyInput { what: "points" });
    }
    let dim = points[0].as_ref().len();
    for (i, p) in points.iter().enumerate() {
        if p.as_ref().len() != dim {
            return Err(CoreError::LengthMismatch {
                what: "point dimension",
                expected: dim,
                got: points[i].as_ref().len(),
            });
        }
    }
    Ok(dim)
}

/// Builds the full Ward merge sequence (n−1 merges) over the given points.
pub fn ward_merge_sequence<P: AsRef<[f64]>>(points: &[P]) -> Result<Vec<WardMerge>> {
    check_points(points)?;
    let mut active: Vec<Option<ClusterState>> = points
        .iter()
        .enumerate()
        .map(|(i, p)| {
            Some(ClusterState {
                centroid: p.as_ref().to_vec(),
                size: 1,
                min_index: i,
            })
        })
        .collect();
    let mut merges = Vec::with_capacity(points.len().saturating_sub(1));
    for _ in 1..points.len() {
        let mut best: Option<(f64, usize, usize, usize, usize)> = None;
        for (i, slot_a) in active.iter().enumerate() {
            let Some(a) = slot_a else { continue };
            for (j, slot_b) in active.iter().enumerate().skip(i + 1) {
                let Some(b) = slot_b else { continue };
                let d2: f64 = a
                    .centroid
                    .iter()
                    .zip(&b.centroid)
                    .map(|(x, y)| (x - y) * (x - y))
                    .sum();
                let cost = (a.size * b.size) as f64 / (a.size + b.size) as f64 * d2;
                let lo = a.min_index.min(b.min_index);
                let hi = a.min_index.max(b.min_index);
                let key = (cost, lo, hi);
                let better = match &best {
                    None => true,
                    Some((bc, bl, bh, _, _)) => {
                        (key.0, key.1, key.2) < (*bc, *bl, *bh)
                    }
                };
                if better {
                    best = Some((cost, lo, hi, i, j));
                }
            }
        }
        let (cost, lo, hi, i, j) = best.expect("at least two active clusters");
        let b = active[j].take().expect("slot j active");
        let a = active[i].as_mut().expect("slot i active");
        let total = (a.size + b.size) as f64;
        for (ca, cb) in a.centroid.iter_mut().zip(&b.centroid) {
            *ca = (*ca * a.size as f64 + cb * b.size as f64) / total;
        }
        a.size += b.size;
        a.min_index = lo;
        merges.push(WardMerge {
            left: lo,
            right: hi,
            cost,
        });
    }
    Ok(merges)
}

/// Labels each of the `n` original points after applying the first `n − k`
/// merges. Labels are 1..=k, numbered by each cluster's lowest point index.
pub fn cut_at<P: AsRef<[f64]>>(points: &[P], merges: &[WardMerge], k: usize) -> Result<Vec<usize>> {
    let n = points.len();
    if k == 0 || k > n {
        return Err(CoreError::InvalidParameter {
            name: "k",
            reason: format!("must be in 1..={n}, got {k}"),
        });
    }
    if merges.len() + 1 < n {
        return Err(CoreError::InvalidParameter {
            name: "merges",
            reason: format!("expected {} merges for {n} points, got {}", n - 1, merges.len()),
        });
    }
    let mut parent: Vec<usize> = (0..n).collect();
    fn find(parent: &mut [usize], mut i: usize) -> usize {
        while parent[i] != i {
            parent[i] = parent[parent[i]];
            i = parent[i];
        }
        i
    }
    for m in &merges[..n - k] {
        let (a, b) = (find(&mut parent, m.left), find(&mut parent, m.right));
        // Root at the lower index so roots match merge representatives.
        let (lo, hi) = (a.min(b), a.max(b));
        parent[hi] = lo;
    }
    let mut label_of_root = std::collections::BTreeMap::new();
    let mut labels = vec![0usize; n];
    for (i, slot) in labels.iter_mut().enumerate() {
        let root = find(&mut parent, i);
        let next = label_of_root.len() + 1;
        *slot = *label_of_root.entry(root).or_insert(next);
    }
    debug_assert_eq!(label_of_root.len(), k);
    Ok(labels)
}

/// Share of total variance explained by the clustering: 1 − within/total,
/// where `within` is the sum of squared distances to cluster centroids and
/// `total` the same quantity for the single grand cluster. Defined as 1
/// when the points carry no variance at all.
pub fn explained_variance<P: AsRef<[f64]>>(points: &[P], labels: &[usize]) -> Result<f64> {
    let dim = check_points(points)?;
    if labels.len() != points.len() {
        return Err(CoreError::LengthMismatch {
            what: "labels",
            expected: points.len(),
            got: labels.len(),
        });
    }
    let total = within_ss(points, &vec![0usize; points.len()], dim);
    if total == 0.0 {
        return Ok(1.0);
    }
    Ok(1.0 - within_ss(points, labels, dim) / total)
}

fn within_ss<P: AsRef<[f64]>>(points: &[P], labels: &[usize], dim: usize) -> f64 {
    let mut centroids: std::collections::BTreeMap<usize, (Vec<f64>, usize)> = Default::default();
    for (p, &l) in points.iter().zip(labels) {
        let entry = centroids.entry(l).or_insert_with(|| (vec![0.0; dim], 0));
        for (c, v) in entry.0.iter_mut().zip(p.as_ref()) {
            *c += v;
        }
        entry.1 += 1;
    }
    for (c, n) in centroids.values_mut() {
        for v in c.iter_mut() {
            *v /= *n as f64;
        }
    }
    points
        .iter()
        .zip(labels)
        .map(|(p, l)| {
            let c = &centroids[l].0;
            p.as_ref()
                .iter()
                .zip(c)
                .map(|(x, m)| (x - m) * (x - m))
                .sum::<f64>()
        })
        .sum()
}

/// Smallest k whose cut reaches the explained-variance threshold. Always
/// terminates: at k = n the within-cluster sum of squares is exactly zero.
pub fn choose_k<P: AsRef<[f64]>>(points: &[P], threshold: f64) -> Result<usize> {
    if !(threshold > 0.0 && threshold <= 1.0) {
        return Err(CoreError::InvalidParameter {
            name: "explained_variance_threshold",
            reason: format!("must be in (0, 1], got {threshold}"),
        });
    }
    let merges = ward_merge_sequence(points)?;
    for k in 1..=points.len() {
        let labels = cut_at(points, &merges, k)?;
        if explained_variance(points, &labels)? >= threshold {
            return Ok(k);
        }
    }
    unreachable!("k = n explains all variance");
}

/// Full grouping entry point: builds the hierarchy, resolves k per the
/// selection rule, and returns (labels 1..=k in lowest-index order, k).
pub fn cluster_units<P: AsRef<[f64]>>(
    points: &[P],
    selection: KSelection,
) -> Result<(Vec<usize>, usize)> {
    let k = match selection {
        KSelection::Forced(k) => {
            if k == 0 || k > points.len() {
                return Err(CoreError::InvalidParameter {
                    name: "k",
                    reason: format!("must be in 1..={}, got {k}", points.len()),
                });
            }
            k
        }
        KSelection::ExplainedVariance(t) => choose_k(points, t)?,
    };
    let merges = ward_merge_sequence(points)?;
    let labels = cut_at(points, &merges, k)?;
    Ok((labels, k))
}
