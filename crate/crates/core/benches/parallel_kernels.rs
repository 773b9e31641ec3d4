//! Sequential vs. rayon kernels on the two hot paths: the pairwise
//! dissimilarity matrix (medoid search) and batch realignment.
//!
//! Run with `cargo bench -p atyp-core`. Both kernels produce identical
//! output; the benches only compare wall-clock.

use std::hint::black_box;

use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use atyp_core::align::{
    pairwise_diss_par, pairwise_diss_seq, realign_all_par, realign_all_seq, reference_curve,
    MedoidPolicy,
};
use atyp_core::series::{BivariateSegment, Curve};

/// Piecewise-linear two-phase curves with noise, in the generator's shape
/// family but synthesized inline so the bench only exercises the kernels.
fn synth_curves(n: usize, len_lo: usize, len_hi: usize, seed: u64) -> Vec<Curve> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..n)
        .map(|_| {
            let len = rng.random_range(len_lo..=len_hi);
            let breakpoint = (len as f64 * rng.random_range(0.4..0.6)) as usize;
            let up = rng.random_range(0.5..2.0);
            let down = -rng.random_range(0.5..2.0);
            let mut value = rng.random_range(-50.0..50.0);
            let values = (0..len)
                .map(|t| {
                    let slope = if t < breakpoint { up } else { down };
                    value += slope + rng.random_range(-0.3..0.3);
                    value
                })
                .collect();
            Curve::new(values).expect("synthetic curve is finite and non-empty")
        })
        .collect()
}

fn bench_pairwise_diss(c: &mut Criterion) {
    let mut group = c.benchmark_group("pairwise_diss");
    group.sample_size(10);
    for &n in &[16usize, 32] {
        let curves = synth_curves(n, 100, 250, 7);
        let refs: Vec<&Curve> = curves.iter().collect();
        group.bench_with_input(BenchmarkId::new("seq", n), &refs, |b, refs| {
            b.iter(|| black_box(pairwise_diss_seq(refs)))
        });
        group.bench_with_input(BenchmarkId::new("par", n), &refs, |b, refs| {
            b.iter(|| black_box(pairwise_diss_par(refs)))
        });
    }
    group.finish();
}

fn bench_realign_all(c: &mut Criterion) {
    let mut group = c.benchmark_group("realign_all");
    group.sample_size(10);
    for &n in &[32usize, 64] {
        let xs = synth_curves(n, 100, 250, 11);
        let ys = synth_curves(n, 100, 250, 13);
        let segments: Vec<BivariateSegment> = xs
            .iter()
            .zip(&ys)
            .enumerate()
            .map(|(i, (x, y))| {
                // Realignment needs equal channel lengths; reuse the x
                // length by truncating/padding y values.
                let mut yv = y.values().to_vec();
                yv.resize(x.len(), *yv.last().expect("non-empty"));
                BivariateSegment::new(
                    format!("seg{i:03}"),
                    x.clone(),
                    Curve::new(yv).expect("finite"),
                    None,
                )
                .expect("equal channel lengths")
            })
            .collect();
        let members: Vec<(&str, &Curve)> =
            segments.iter().map(|s| (s.id(), s.x())).collect();
        let reference =
            reference_curve(1, &members, &MedoidPolicy::default()).expect("non-empty cluster");
        let items: Vec<(&BivariateSegment, &atyp_core::align::ReferenceCurve)> =
            segments.iter().map(|s| (s, &reference)).collect();
        group.bench_with_input(BenchmarkId::new("seq", n), &items, |b, items| {
            b.iter(|| black_box(realign_all_seq(items)))
        });
        group.bench_with_input(BenchmarkId::new("par", n), &items, |b, items| {
            b.iter(|| black_box(realign_all_par(items)))
        });
    }
    group.finish();
}

criterion_group!(benches, bench_pairwise_diss, bench_realign_all);
criterion_main!(benches);
