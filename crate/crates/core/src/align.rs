//! Unequal-length curve dissimilarity, per-cluster reference curves, and
//! joint realignment of both channels.
//!
//! The dissimilarity extends the shorter curve with constant pads, slides a
//! window of the longer curve's length over the extension and takes the
//! best-matching window's Euclidean distance, normalised by twice the longer
//! length. Realignment replays the same window search against a cluster's
//! reference curve and cuts *both* channels at the winning offset, so every
//! member of a cluster ends up with curves of the reference length that are
//! pointwise comparable.
//!
//! The window scan abandons a window as soon as its partial sum of squares
//! reaches the current minimum. Partial sums are monotone, and the
//! accumulation order is identical to the exhaustive scan, so results are
//! bit-for-bit equal to the naive enumeration (ties keep the first window).

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

#[cfg(feature = "parallel")]
use rayon::prelude::*;

use crate::error::{CoreError, Result};
use crate::series::{BivariateSegment, Curve};

/// A curve with constant (or context-derived) pads of length `pad` on both
/// sides. The original samples sit at `pad..pad + core_len`.
#[derive(Debug, Clone, PartialEq)]
pub struct ExtendedCurve {
    values: Vec<f64>,
    pad: usize,
    core_len: usize,
}

impl ExtendedCurve {
    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn pad(&self) -> usize {
        self.pad
    }

    /// Index of the first original sample.
    pub fn core_start(&self) -> usize {
        self.pad
    }

    /// Index one past the last original sample.
    pub fn core_end(&self) -> usize {
        self.pad + self.core_len
    }
}

/// Extends a curve by `pad` repetitions of its first value on the left and
/// of its last value on the right.
pub fn extend(curve: &Curve, pad: usize) -> ExtendedCurve {
    extend_with_context(curve, pad, &[], &[])
}

/// Like [`extend`], but fills the pads from recorded neighbour samples where
/// available: the *last* `pad` values of `left` (in order) sit immediately
/// before the core, the *first* `pad` values of `right` immediately after.
/// Missing positions fall back to the constant edge value.
///
/// The benchmark pipeline has no context (segments are whole records) and
/// always passes empty slices.
pub fn extend_with_context(
    curve: &Curve,
    pad: usize,
    left: &[f64],
    right: &[f64],
) -> ExtendedCurve {
    let core = curve.values();
    let first = core[0];
    let last = core[core.len() - 1];
    let mut values = Vec::with_capacity(core.len() + 2 * pad);
    let take_left = left.len().min(pad);
    values.resize(pad - take_left, first);
    values.extend_from_slice(&left[left.len() - take_left..]);
    values.extend_from_slice(core);
    let take_right = right.len().min(pad);
    values.extend_from_slice(&right[..take_right]);
    values.resize(core.len() + 2 * pad, last);
    ExtendedCurve {
        values,
        pad,
        core_len: core.len(),
    }
}

/// Scans all windows of `target.len()` samples over `ext`, returning the
/// 1-based index `q` of the first window with minimal Euclidean distance to
/// `target` and that minimal squared distance.
///
/// Early abandoning preserves exact equality with the exhaustive scan: a
/// window is dropped once its partial sum reaches the current best, which
/// can never change the kept minima or the first-minimum tie rule.
fn best_window(ext: &[f64], target: &[f64]) -> (usize, f64) {
    let m = target.len();
    debug_assert!(ext.len() >= m);
    let n_windows = ext.len() - m + 1;
    let mut best_sq = f64::INFINITY;
    let mut best_q = 1;
    for q0 in 0..n_windows {
        let window = &ext[q0..q0 + m];
        let mut acc = 0.0;
        let mut abandoned = false;
        for (w, t) in window.iter().zip(target) {
            let d = w - t;
            acc += d * d;
            if acc >= best_sq {
                abandoned = true;
                break;
            }
        }
        if !abandoned && acc < best_sq {
            best_sq = acc;
            best_q = q0 + 1;
        }
    }
    (best_q, best_sq)
}

/// Orders a pair of curves into (shorter, longer). Equal lengths are ordered
/// by value (lexicographically smaller curve extends), which makes the
/// ordering, and hence [`diss`], symmetric in its arguments.
fn order_pair<'a>(a: &'a Curve, b: &'a Curve) -> (&'a Curve, &'a Curve) {
    match a.len().cmp(&b.len()) {
        std::cmp::Ordering::Less => (a, b),
        std::cmp::Ordering::Greater => (b, a),
        std::cmp::Ordering::Equal => {
            let swap = a
                .values()
                .iter()
                .zip(b.values())
                .find_map(|(x, y)| match x.total_cmp(y) {
                    std::cmp::Ordering::Equal => None,
                    ord => Some(ord == std::cmp::Ordering::Greater),
                })
                .unwrap_or(false);
            if swap {
                (b, a)
            } else {
                (a, b)
            }
        }
    }
}

/// Dissimilarity between two curves of possibly different lengths.
///
/// With `(short, long)` ordered by length (l1 ≤ l2), the short curve is
/// extended by `pad = l2` and the returned value is
/// `min over the l1+l2+1 windows of ‖window − long‖ / (2·l2)`.
///
/// Non-negative, zero on identical curves, and symmetric.
pub fn diss(a: &Curve, b: &Curve) -> f64 {
    let (short, long) = order_pair(a, b);
    let ext = extend(short, long.len());
    let (_, best_sq) = best_window(ext.values(), long.values());
    best_sq.sqrt() / (2.0 * long.len() as f64)
}

fn upper_triangle_pairs(n: usize) -> Vec<(usize, usize)> {
    (0..n)
        .flat_map(|i| ((i + 1)..n).map(move |j| (i, j)))
        .collect()
}

/// Full pairwise dissimilarity matrix, row-major `n×n`, zero diagonal.
/// Dispatches to the parallel kernel when the `parallel` feature is on.
pub fn pairwise_diss(curves: &[&Curve]) -> Vec<f64> {
    #[cfg(feature = "parallel")]
    {
        pairwise_diss_par(curves)
    }
    #[cfg(not(feature = "parallel"))]
    {
        pairwise_diss_seq(curves)
    }
}

/// Sequential pairwise matrix; reference implementation for the benches.
pub fn pairwise_diss_seq(curves: &[&Curve]) -> Vec<f64> {
    let pairs = upper_triangle_pairs(curves.len());
    let ds: Vec<f64> = pairs
        .iter()
        .map(|&(i, j)| diss(curves[i], curves[j]))
        .collect();
    fill_matrix(curves.len(), &pairs, &ds)
}

/// Rayon pairwise matrix. Each pair is independent and results are written
/// back in pair order, so the output is identical to the sequential kernel.
#[cfg(feature = "parallel")]
pub fn pairwise_diss_par(curves: &[&Curve]) -> Vec<f64> {
    let pairs = upper_triangle_pairs(curves.len());
    let ds: Vec<f64> = pairs
        .par_iter()
        .map(|&(i, j)| diss(curves[i], curves[j]))
        .collect();
    fill_matrix(curves.len(), &pairs, &ds)
}

fn fill_matrix(n: usize, pairs: &[(usize, usize)], ds: &[f64]) -> Vec<f64> {
    let mut m = vec![0.0; n * n];
    for (&(i, j), &d) in pairs.iter().zip(ds) {
        m[i * n + j] = d;
        m[j * n + i] = d;
    }
    m
}

/// Controls medoid search cost on large clusters: above `sample_cap`
/// members, the search runs on a seeded subsample of that size
/// (0 disables the cap). The subsample depends only on `seed` and the
/// cluster label, never on iteration order.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct MedoidPolicy {
    pub sample_cap: usize,
    pub seed: u64,
}

impl Default for MedoidPolicy {
    fn default() -> Self {
        Self {
            sample_cap: 1000,
            seed: 0,
        }
    }
}

/// The representative (medoid) curve of one cluster.
#[derive(Debug, Clone, PartialEq)]
pub struct ReferenceCurve {
    cluster_label: usize,
    segment_id: String,
    curve: Curve,
}

impl ReferenceCurve {
    pub fn new(cluster_label: usize, segment_id: impl Into<String>, curve: Curve) -> Self {
        Self {
            cluster_label,
            segment_id: segment_id.into(),
            curve,
        }
    }

    pub fn cluster_label(&self) -> usize {
        self.cluster_label
    }

    /// Id of the member the curve was taken from.
    pub fn segment_id(&self) -> &str {
        &self.segment_id
    }

    pub fn curve(&self) -> &Curve {
        &self.curve
    }

    pub fn len(&self) -> usize {
        self.curve.len()
    }

    pub fn is_empty(&self) -> bool {
        false
    }
}

/// Picks the member minimising the sum of dissimilarities to all other
/// (sampled) members. Ties on the sum fall to the lowest segment id; a
/// singleton cluster returns its only curve.
pub fn reference_curve(
    cluster_label: usize,
    members: &[(&str, &Curve)],
    policy: &MedoidPolicy,
) -> Result<ReferenceCurve> {
    if members.is_empty() {
        return Err(CoreError::EmptyInput {
            what: "cluster members",
        });
    }
    let mut chosen: Vec<usize> = (0..members.len()).collect();
    if policy.sample_cap > 0 && members.len() > policy.sample_cap {
        let mut rng = ChaCha8Rng::seed_from_u64(policy.seed);
        rng.set_stream(cluster_label as u64);
        chosen.shuffle(&mut rng);
        chosen.truncate(policy.sample_cap);
        chosen.sort_unstable();
    }
    let curves: Vec<&Curve> = chosen.iter().map(|&i| members[i].1).collect();
    let matrix = pairwise_diss(&curves);
    let n = curves.len();
    let mut best: Option<(f64, &str, usize)> = None;
    for (row, &member_idx) in chosen.iter().enumerate() {
        let sum: f64 = matrix[row * n..(row + 1) * n].iter().sum();
        let id = members[member_idx].0;
        let better = match &best {
            None => true,
            Some((s, bid, _)) => match sum.total_cmp(s) {
                std::cmp::Ordering::Less => true,
                std::cmp::Ordering::Greater => false,
                std::cmp::Ordering::Equal => id < *bid,
            },
        };
        if better {
            best = Some((sum, id, member_idx));
        }
    }
    let (_, id, idx) = best.expect("non-empty cluster has a medoid");
    Ok(ReferenceCurve::new(
        cluster_label,
        id,
        members[idx].1.clone(),
    ))
}

/// A segment after realignment against its cluster's reference curve: both
/// channels have the reference length and were cut at the same offset.
#[derive(Debug, Clone, PartialEq)]
pub struct AlignedSegment {
    segment_id: String,
    cluster_label: usize,
    x: Curve,
    y: Curve,
    offset: usize,
}

impl AlignedSegment {
    pub fn new(
        segment_id: impl Into<String>,
        cluster_label: usize,
        x: Curve,
        y: Curve,
        offset: usize,
    ) -> Result<Self> {
        if x.len() != y.len() {
            return Err(CoreError::ChannelLengthMismatch {
                id: segment_id.into(),
                x_len: x.len(),
                y_len: y.len(),
            });
        }
        Ok(Self {
            segment_id: segment_id.into(),
            cluster_label,
            x,
            y,
            offset,
        })
    }

    pub fn segment_id(&self) -> &str {
        &self.segment_id
    }

    pub fn cluster_label(&self) -> usize {
        self.cluster_label
    }

    pub fn x(&self) -> &Curve {
        &self.x
    }

    pub fn y(&self) -> &Curve {
        &self.y
    }

    /// 1-based index of the chosen window in the extended curve.
    pub fn offset(&self) -> usize {
        self.offset
    }

    pub fn len(&self) -> usize {
        self.x.len()
    }

    pub fn is_empty(&self) -> bool {
        false
    }
}

/// Realigns one segment against a reference curve: extends the key channel
/// by `pad = reference length`, finds the first window minimising the
/// distance to the reference, and cuts *both* channels at that offset.
/// The aligned curves always have the reference length.
pub fn realign(segment: &BivariateSegment, reference: &ReferenceCurve) -> AlignedSegment {
    realign_with_context(segment, reference, &SegmentContext::default())
}

/// Neighbour samples around a segment in its source recording, used to fill
/// extension pads with real data instead of constant values. All slots are
/// optional; the defaults are empty.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct SegmentContext {
    pub x_left: Vec<f64>,
    pub x_right: Vec<f64>,
    pub y_left: Vec<f64>,
    pub y_right: Vec<f64>,
}

/// [`realign`] with context-filled pads.
pub fn realign_with_context(
    segment: &BivariateSegment,
    reference: &ReferenceCurve,
    context: &SegmentContext,
) -> AlignedSegment {
    let target_len = reference.len();
    let ext_x = extend_with_context(segment.x(), target_len, &context.x_left, &context.x_right);
    let (q, _) = best_window(ext_x.values(), reference.curve().values());
    let ext_y = extend_with_context(segment.y(), target_len, &context.y_left, &context.y_right);
    let start = q - 1;
    let x = Curve::new(ext_x.values()[start..start + target_len].to_vec())
        .expect("window of a finite extension is finite and non-empty");
    let y = Curve::new(ext_y.values()[start..start + target_len].to_vec())
        .expect("window of a finite extension is finite and non-empty");
    AlignedSegment {
        segment_id: segment.id().to_string(),
        cluster_label: reference.cluster_label(),
        x,
        y,
        offset: q,
    }
}

/// Realigns a batch of (segment, reference) pairs, in input order.
pub fn realign_all(items: &[(&BivariateSegment, &ReferenceCurve)]) -> Vec<AlignedSegment> {
    #[cfg(feature = "parallel")]
    {
        realign_all_par(items)
    }
    #[cfg(not(feature = "parallel"))]
    {
        realign_all_seq(items)
    }
}

/// Sequential batch realignment; reference implementation for the benches.
pub fn realign_all_seq(items: &[(&BivariateSegment, &ReferenceCurve)]) -> Vec<AlignedSegment> {
    items.iter().map(|(s, r)| realign(s, r)).collect()
}

/// Rayon batch realignment; output order matches input order.
#[cfg(feature = "parallel")]
pub fn realign_all_par(items: &[(&BivariateSegment, &ReferenceCurve)]) -> Vec<AlignedSegment> {
    items.par_iter().map(|(s, r)| realign(s, r)).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn curve(values: &[f64]) -> Curve {
        Curve::new(values.to_vec()).unwrap()
    }

    /// Exhaustive reference implementation of the window scan: no early
    /// abandoning, strict-less tie rule.
    fn naive_best_window(ext: &[f64], target: &[f64]) -> (usize, f64) {
        let m = target.len();
        let mut best_sq = f64::INFINITY;
        let mut best_q = 1;
        for q0 in 0..=(ext.len() - m) {
            let mut acc = 0.0;
            for (w, t) in ext[q0..q0 + m].iter().zip(target) {
                let d = w - t;
                acc += d * d;
            }
            if acc < best_sq {
                best_sq = acc;
                best_q = q0 + 1;
            }
        }
        (best_q, best_sq)
    }

    /// Oracle for diss built on the naive scan and an explicit extension.
    fn naive_diss(a: &Curve, b: &Curve) -> f64 {
        let (short, long) = order_pair(a, b);
        let (l1, l2) = (short.len(), long.len());
        let mut ext = Vec::new();
        ext.resize(l2, short.values()[0]);
        ext.extend_from_slice(short.values());
        ext.resize(l1 + 2 * l2, short.values()[l1 - 1]);
        let (_, best_sq) = naive_best_window(&ext, long.values());
        best_sq.sqrt() / (2.0 * l2 as f64)
    }

    #[test]
    fn extension_layout_and_window_count() {
        let ext = extend(&curve(&[1.0, 2.0, 3.0]), 2);
        assert_eq!(ext.values(), &[1.0, 1.0, 1.0, 2.0, 3.0, 3.0, 3.0]);
        assert_eq!(ext.core_start(), 2);
        assert_eq!(ext.core_end(), 5);
        // l1 + 2·l2 samples yield l1 + l2 + 1 windows of length l2.
        let (l1, l2) = (3usize, 2usize);
        assert_eq!(ext.values().len() - l2 + 1, l1 + l2 + 1);
    }

    #[test]
    fn context_fills_pads_from_neighbours() {
        let c = curve(&[10.0, 20.0]);
        let ext = extend_with_context(&c, 3, &[1.0, 2.0, 3.0, 4.0], &[7.0]);
        // Left pad: last three context samples; right pad: one real sample
        // then constant fill with the edge value.
        assert_eq!(
            ext.values(),
            &[2.0, 3.0, 4.0, 10.0, 20.0, 7.0, 20.0, 20.0]
        );
        // Short context falls back to the edge constant on the outside.
        let ext = extend_with_context(&c, 3, &[5.0], &[]);
        assert_eq!(
            ext.values(),
            &[10.0, 10.0, 5.0, 10.0, 20.0, 20.0, 20.0, 20.0]
        );
    }

    #[test]
    fn diss_of_constant_curves() {
        // Every window of the all-zeros extension is all zeros, so the
        // distance to the constant-one curve is √5, normalised by 2·5.
        let a = curve(&[0.0, 0.0, 0.0]);
        let b = curve(&[1.0, 1.0, 1.0, 1.0, 1.0]);
        let expected = 5.0_f64.sqrt() / 10.0;
        assert_eq!(diss(&a, &b), expected);
        assert_eq!(diss(&b, &a), expected);
        assert_eq!(naive_diss(&a, &b), expected);
    }

    #[test]
    fn diss_matches_enumeration_on_contained_pattern() {
        // The long curve reproduces the short one's extension exactly at one
        // window, so the minimum is zero.
        let a = curve(&[0.0, 0.0, 1.0, 1.0]);
        let b = curve(&[0.0, 1.0]);
        assert_eq!(diss(&a, &b), naive_diss(&a, &b));
        assert_eq!(diss(&a, &b), 0.0);
    }

    #[test]
    fn diss_self_is_zero() {
        for vals in [
            vec![1.0, 2.0, 3.0],
            vec![-5.0, 0.25, 7.5, -1.0, 2.0],
            vec![0.0, 0.0],
        ] {
            let c = curve(&vals);
            assert_eq!(diss(&c, &c), 0.0);
        }
    }

    #[test]
    fn equal_length_pairs_are_symmetric() {
        // Equal lengths order by content, so both call orders extend the
        // same curve.
        let a = curve(&[0.0, 0.0]);
        let b = curve(&[5.0, 9.0]);
        assert_eq!(diss(&a, &b), diss(&b, &a));
        // Value: a extends (lexicographically smaller), every window is
        // [0,0], distance to [5,9] is √106 / 4.
        assert_eq!(diss(&a, &b), 106.0_f64.sqrt() / 4.0);
    }

    #[test]
    fn medoid_matches_brute_force_and_breaks_ties_by_id() {
        let curves = [
            curve(&[0.0, 1.0, 2.0]),
            curve(&[0.0, 1.0, 2.5]),
            curve(&[10.0, 11.0, 12.0]),
            curve(&[0.0, 1.0, 2.1]),
        ];
        let members: Vec<(&str, &Curve)> = vec![
            ("s1", &curves[0]),
            ("s2", &curves[1]),
            ("s3", &curves[2]),
            ("s4", &curves[3]),
        ];
        let rc = reference_curve(7, &members, &MedoidPolicy::default()).unwrap();
        // Brute force: argmin of full dissimilarity sums.
        let mut best = (f64::INFINITY, "");
        for (id, c) in &members {
            let sum: f64 = members.iter().map(|(_, o)| naive_diss(c, o)).sum();
            if sum < best.0 {
                best = (sum, id);
            }
        }
        assert_eq!(rc.segment_id(), best.1);
        assert_eq!(rc.cluster_label(), 7);

        // Identical curves give identical sums; the lower id wins.
        let dup = curve(&[1.0, 1.0, 1.0]);
        let members: Vec<(&str, &Curve)> = vec![("zz", &dup), ("aa", &dup)];
        let rc = reference_curve(0, &members, &MedoidPolicy::default()).unwrap();
        assert_eq!(rc.segment_id(), "aa");
    }

    #[test]
    fn singleton_cluster_returns_its_curve() {
        let c = curve(&[3.0, 1.0, 4.0]);
        let rc = reference_curve(2, &[("only", &c)], &MedoidPolicy::default()).unwrap();
        assert_eq!(rc.segment_id(), "only");
        assert_eq!(rc.curve(), &c);
    }

    #[test]
    fn capped_medoid_is_deterministic_and_a_member() {
        let curves: Vec<Curve> = (0..12)
            .map(|i| curve(&[i as f64, i as f64 + 1.0, i as f64 * 0.5]))
            .collect();
        let ids: Vec<String> = (0..12).map(|i| format!("m{i:02}")).collect();
        let members: Vec<(&str, &Curve)> = ids
            .iter()
            .map(String::as_str)
            .zip(curves.iter())
            .collect();
        let policy = MedoidPolicy {
            sample_cap: 5,
            seed: 99,
        };
        let a = reference_curve(1, &members, &policy).unwrap();
        let b = reference_curve(1, &members, &policy).unwrap();
        assert_eq!(a, b);
        assert!(ids.iter().any(|id| id == a.segment_id()));
        // A different cluster label may sample a different subset, but stays
        // deterministic too.
        let c = reference_curve(2, &members, &policy).unwrap();
        let d = reference_curve(2, &members, &policy).unwrap();
        assert_eq!(c, d);
    }

    fn segment(id: &str, x: &[f64], y: &[f64]) -> BivariateSegment {
        BivariateSegment::new(id, curve(x), curve(y), None).unwrap()
    }

    #[test]
    fn realign_cuts_both_channels_at_the_same_offset() {
        // Reference matches x at a known interior window.
        let rc = ReferenceCurve::new(1, "ref", curve(&[5.0, 6.0, 7.0]));
        let seg = segment(
            "s",
            &[0.0, 5.0, 6.0, 7.0, 0.0],
            &[10.0, 20.0, 30.0, 40.0, 50.0],
        );
        let aligned = realign(&seg, &rc);
        assert_eq!(aligned.len(), 3);
        assert_eq!(aligned.x().values(), &[5.0, 6.0, 7.0]);
        // The pad is 3, so ext_y = [10,10,10, 10..50, 50,50,50]; the x window
        // starts at extension index 4 (q = 5).
        assert_eq!(aligned.offset(), 5);
        assert_eq!(aligned.y().values(), &[20.0, 30.0, 40.0]);
        assert_eq!(aligned.cluster_label(), 1);
    }

    #[test]
    fn realign_constant_curve_picks_first_window() {
        let rc = ReferenceCurve::new(3, "ref", curve(&[1.0, 2.0]));
        let seg = segment("s", &[4.0, 4.0, 4.0], &[1.0, 2.0, 3.0]);
        let aligned = realign(&seg, &rc);
        // All x windows are [4,4]; the first wins, cutting y's extension at
        // its left pad.
        assert_eq!(aligned.offset(), 1);
        assert_eq!(aligned.x().values(), &[4.0, 4.0]);
        assert_eq!(aligned.y().values(), &[1.0, 1.0]);
    }

    #[test]
    fn realign_reproduces_the_reference_exactly_when_x_equals_it() {
        let vals = [2.5, -1.0, 4.0, 4.5, 0.0];
        let rc = ReferenceCurve::new(0, "ref", curve(&vals));
        let seg = segment("s", &vals, &[9.0, 8.0, 7.0, 6.0, 5.0]);
        let aligned = realign(&seg, &rc);
        assert_eq!(aligned.x().values(), &vals);
        assert_eq!(aligned.y().values(), &[9.0, 8.0, 7.0, 6.0, 5.0]);
    }

    #[cfg(feature = "parallel")]
    #[test]
    fn parallel_kernels_match_sequential() {
        let curves: Vec<Curve> = (0..10)
            .map(|i| {
                curve(
                    &(0..(5 + i))
                        .map(|t| ((t * 7 + i * 3) % 11) as f64 * 0.5)
                        .collect::<Vec<_>>(),
                )
            })
            .collect();
        let refs: Vec<&Curve> = curves.iter().collect();
        assert_eq!(pairwise_diss_seq(&refs), pairwise_diss_par(&refs));

        let rc = ReferenceCurve::new(1, "ref", curves[0].clone());
        let segs: Vec<BivariateSegment> = curves
            .iter()
            .enumerate()
            .map(|(i, c)| {
                BivariateSegment::new(format!("s{i}"), c.clone(), c.clone(), None).unwrap()
            })
            .collect();
        let items: Vec<(&BivariateSegment, &ReferenceCurve)> =
            segs.iter().map(|s| (s, &rc)).collect();
        assert_eq!(realign_all_seq(&items), realign_all_par(&items));
    }

    fn arb_curve(max_len: usize) -> impl Strategy<Value = Vec<f64>> {
        proptest::collection::vec(-100.0..100.0f64, 2..max_len)
    }

    proptest! {
        #[test]
        fn diss_equals_naive_oracle(a in arb_curve(50), b in arb_curve(50)) {
            let (a, b) = (curve(&a), curve(&b));
            let fast = diss(&a, &b);
            let slow = naive_diss(&a, &b);
            prop_assert!((fast - slow).abs() <= 1e-12, "fast {} vs naive {}", fast, slow);
        }

        #[test]
        fn diss_is_symmetric_nonnegative_and_zero_on_self(a in arb_curve(40), b in arb_curve(40)) {
            let (a, b) = (curve(&a), curve(&b));
            prop_assert!(diss(&a, &b) >= 0.0);
            prop_assert_eq!(diss(&a, &b), diss(&b, &a));
            prop_assert_eq!(diss(&a, &a), 0.0);
        }

        #[test]
        fn realignment_always_yields_reference_length_and_valid_offset(
            x in arb_curve(30),
            rc_vals in arb_curve(30),
        ) {
            let y: Vec<f64> = x.iter().map(|v| v * 2.0 + 1.0).collect();
            let seg = BivariateSegment::new("s", curve(&x), curve(&y), None).unwrap();
            let rc = ReferenceCurve::new(1, "ref", curve(&rc_vals));
            let aligned = realign(&seg, &rc);
            prop_assert_eq!(aligned.x().len(), rc.len());
            prop_assert_eq!(aligned.y().len(), rc.len());
            prop_assert!(aligned.offset() >= 1);
            prop_assert!(aligned.offset() <= seg.len() + rc.len() + 1);
            // y is cut at the same offset: recompute its extension window.
            let ext_y = extend(seg.y(), rc.len());
            let start = aligned.offset() - 1;
            prop_assert_eq!(aligned.y().values(), &ext_y.values()[start..start + rc.len()]);
        }
    }
}
