//! Segment-to-cluster assignment: BMU lookup composed with the unit
//! superclasses, with final labels 1..=I ordered by decreasing cluster size
//! (segment count; ties keep the original label order).

use std::collections::BTreeMap;

use crate::error::{CoreError, Result};
use crate::features::FeatureVector;
use crate::som::{best_matching_unit, Codebook};

/// Result of assigning every segment to a map unit and a supercluster.
#[derive(Debug, Clone, PartialEq)]
pub struct ClusterAssignment {
    unit_of_segment: BTreeMap<String, usize>,
    supercluster_of_unit: Vec<usize>,
    n_clusters: usize,
}

impl ClusterAssignment {
    /// Rebuilds an assignment from stored parts (model-file loading).
    pub fn from_parts(
        unit_of_segment: BTreeMap<String, usize>,
        supercluster_of_unit: Vec<usize>,
        n_clusters: usize,
    ) -> Result<Self> {
        for (id, &unit) in &unit_of_segment {
            if unit >= supercluster_of_unit.len() {
                return Err(CoreError::InvalidParameter {
                    name: "unit_of_segment",
                    reason: format!("segment {id:?} references unit {unit} out of range"),
                });
            }
        }
        if let Some(&bad) = supercluster_of_unit
            .iter()
            .find(|&&l| l == 0 || l > n_clusters)
        {
            return Err(CoreError::InvalidParameter {
                name: "supercluster_of_unit",
                reason: format!("label {bad} outside 1..={n_clusters}"),
            });
        }
        Ok(Self {
            unit_of_segment,
            supercluster_of_unit,
            n_clusters,
        })
    }

    pub fn n_clusters(&self) -> usize {
        self.n_clusters
    }

    pub fn unit_of(&self, segment_id: &str) -> Option<usize> {
        self.unit_of_segment.get(segment_id).copied()
    }

    pub fn cluster_of(&self, segment_id: &str) -> Option<usize> {
        self.unit_of(segment_id)
            .map(|u| self.supercluster_of_unit[u])
    }

    pub fn unit_of_segment(&self) -> &BTreeMap<String, usize> {
        &self.unit_of_segment
    }

    pub fn supercluster_of_unit(&self) -> &[usize] {
        &self.supercluster_of_unit
    }

    /// Segment ids per cluster label, ids sorted within each cluster.
    pub fn members_by_cluster(&self) -> BTreeMap<usize, Vec<&str>> {
        let mut out: BTreeMap<usize, Vec<&str>> = BTreeMap::new();
        for (id, &unit) in &self.unit_of_segment {
            out.entry(self.supercluster_of_unit[unit])
                .or_default()
                .push(id.as_str());
        }
        out
    }

    pub fn n_segments(&self) -> usize {
        self.unit_of_segment.len()
    }
}

/// Maps each segment to its BMU's supercluster. `unit_labels` are the raw
/// Ward labels (1..=k) per unit; the returned assignment's labels are
/// renumbered 1..=k by decreasing segment count.
pub fn assign(
    ids: &[&str],
    features: &[FeatureVector],
    codebook: &Codebook,
    unit_labels: &[usize],
) -> Result<ClusterAssignment> {
    if ids.len() != features.len() {
        return Err(CoreError::LengthMismatch {
            what: "feature vectors",
            expected: ids.len(),
            got: features.len(),
        });
    }
    if unit_labels.len() != codebook.units() {
        return Err(CoreError::LengthMismatch {
            what: "unit labels",
            expected: codebook.units(),
            got: unit_labels.len(),
        });
    }
    let k = match unit_labels.iter().max() {
        Some(&k) if unit_labels.iter().all(|&l| l >= 1) => k,
        _ => {
            return Err(CoreError::InvalidParameter {
                name: "unit_labels",
                reason: "labels must be positive".into(),
            })
        }
    };

    let mut unit_of_segment = BTreeMap::new();
    let mut raw_counts = vec![0usize; k + 1];
    for (id, f) in ids.iter().zip(features) {
        let unit = best_matching_unit(codebook, f);
        if unit_of_segment.insert(id.to_string(), unit).is_some() {
            return Err(CoreError::DuplicateSegmentId { id: id.to_string() });
        }
        raw_counts[unit_labels[unit]] += 1;
    }

    // Renumber: biggest cluster first, original order on ties.
    let mut order: Vec<usize> = (1..=k).collect();
    order.sort_by_key(|&raw| (std::cmp::Reverse(raw_counts[raw]), raw));
    let mut new_label = vec![0usize; k + 1];
    for (rank, &raw) in order.iter().enumerate() {
        new_label[raw] = rank + 1;
    }
    let supercluster_of_unit: Vec<usize> =
        unit_labels.iter().map(|&raw| new_label[raw]).collect();

    Ok(ClusterAssignment {
        unit_of_segment,
        supercluster_of_unit,
        n_clusters: k,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::features::FEATURE_DIM;

    fn fv(fill: f64) -> FeatureVector {
        FeatureVector([fill; FEATURE_DIM])
    }

    fn codebook() -> Codebook {
        // Three units at -1, 0, +1 on the diagonal.
        Codebook::from_parts(1, 3, vec![fv(-1.0), fv(0.0), fv(1.0)]).unwrap()
    }

    #[test]
    fn exact_matches_go_to_their_unit() {
        let cb = codebook();
        let ids = ["a", "b", "c"];
        let feats = [fv(-1.0), fv(0.0), fv(1.0)];
        let asg = assign(&ids, &feats, &cb, &[1, 2, 3]).unwrap();
        assert_eq!(asg.unit_of("a"), Some(0));
        assert_eq!(asg.unit_of("b"), Some(1));
        assert_eq!(asg.unit_of("c"), Some(2));
    }

    #[test]
    fn labels_are_renumbered_by_decreasing_size() {
        let cb = codebook();
        // Three segments near +1 (raw label 2), one near -1 (raw label 1).
        let ids = ["a", "b", "c", "d"];
        let feats = [fv(0.9), fv(1.1), fv(1.0), fv(-1.0)];
        let asg = assign(&ids, &feats, &cb, &[1, 2, 2]).unwrap();
        assert_eq!(asg.n_clusters(), 2);
        assert_eq!(asg.cluster_of("a"), Some(1));
        assert_eq!(asg.cluster_of("d"), Some(2));
        let members = asg.members_by_cluster();
        assert_eq!(members[&1], vec!["a", "b", "c"]);
        assert_eq!(members[&2], vec!["d"]);
    }

    #[test]
    fn equal_sizes_keep_original_label_order() {
        let cb = codebook();
        let ids = ["a", "b"];
        let feats = [fv(-1.0), fv(1.0)];
        let asg = assign(&ids, &feats, &cb, &[2, 1, 1]).unwrap();
        // Raw 2 (one segment) and raw 1 (one segment) tie; raw 1 stays 1.
        assert_eq!(asg.cluster_of("b"), Some(1));
        assert_eq!(asg.cluster_of("a"), Some(2));
    }

    #[test]
    fn assignment_is_per_segment_and_order_independent() {
        let cb = codebook();
        let ids = ["a", "b", "c", "d"];
        let feats = [fv(0.9), fv(1.1), fv(1.0), fv(-1.0)];
        let fwd = assign(&ids, &feats, &cb, &[1, 2, 2]).unwrap();
        let rids = ["d", "c", "b", "a"];
        let rfeats = [fv(-1.0), fv(1.0), fv(1.1), fv(0.9)];
        let rev = assign(&rids, &rfeats, &cb, &[1, 2, 2]).unwrap();
        for id in ids {
            assert_eq!(fwd.cluster_of(id), rev.cluster_of(id));
        }
    }

    #[test]
    fn sizes_sum_to_segment_count() {
        let cb = codebook();
        let ids = ["a", "b", "c", "d", "e"];
        let feats = [fv(-1.0), fv(-0.9), fv(0.1), fv(1.0), fv(0.8)];
        let asg = assign(&ids, &feats, &cb, &[1, 1, 2]).unwrap();
        let total: usize = asg.members_by_cluster().values().map(Vec::len).sum();
        assert_eq!(total, ids.len());
        for id in ids {
            assert!(asg.cluster_of(id).is_some());
        }
    }

    #[test]
    fn rejects_inconsistent_inputs() {
        let cb = codebook();
        assert!(assign(&["a"], &[], &cb, &[1, 1, 1]).is_err());
        assert!(assign(&["a"], &[fv(0.0)], &cb, &[1, 1]).is_err());
        assert!(assign(&["a"], &[fv(0.0)], &cb, &[0, 1, 1]).is_err());
        assert!(assign(&["a", "a"], &[fv(0.0), fv(0.0)], &cb, &[1, 1, 1]).is_err());
    }
}
