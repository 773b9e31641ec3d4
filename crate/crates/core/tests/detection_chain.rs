//! Integration: medoid reference → realignment → CT and CQ detection on a
//! homogeneous cluster with one injected intruder.

use atyp_core::align::{realign, reference_curve, MedoidPolicy};
use atyp_core::detect::{detect_cq, detect_ct, fit_cq, fit_ct, Channel};
use atyp_core::series::{BivariateSegment, Curve};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Unequal-length noisy ramps (one shared latent shape, jittered cut
/// points), plus one sinusoidal intruder of comparable amplitude.
fn cluster_with_intruder() -> Vec<BivariateSegment> {
    let mut rng = ChaCha8Rng::seed_from_u64(29);
    let mut segments = Vec::new();
    for i in 0..24 {
        let len = rng.random_range(140..180);
        let noise_scale = 1.5;
        let x: Vec<f64> = (0..len)
            .map(|t| 2.0 * t as f64 + noise_scale * rng.random_range(-1.0..1.0))
            .collect();
        let y: Vec<f64> = (0..len)
            .map(|t| 300.0 - 1.5 * t as f64 + noise_scale * rng.random_range(-1.0..1.0))
            .collect();
        segments.push(
            BivariateSegment::new(
                format!("n{i:02}"),
                Curve::new(x).unwrap(),
                Curve::new(y).unwrap(),
                None,
            )
            .unwrap(),
        );
    }
    // Intruder: X oscillates over the same value range instead of ramping.
    // Ten periods make the per-step delta (~±60) dwarf the ramps' (~+2),
    // and starting at the crest keeps the best-matching window on the
    // oscillation itself rather than on the constant edge padding.
    let len = 160;
    let x: Vec<f64> = (0..len)
        .map(|t| 160.0 + 160.0 * (std::f64::consts::TAU * 10.0 * t as f64 / len as f64).cos())
        .collect();
    let y: Vec<f64> = (0..len).map(|t| 300.0 - 1.5 * t as f64).collect();
    segments.push(
        BivariateSegment::new(
            "intruder",
            Curve::new(x).unwrap(),
            Curve::new(y).unwrap(),
            None,
        )
        .unwrap(),
    );
    segments
}

#[test]
fn detectors_flag_the_intruder_and_pass_the_members() {
    let segments = cluster_with_intruder();
    let policy = MedoidPolicy::default();

    // Medoid over the normal members only (the reference must represent
    // the cluster; one intruder among 24 normals would not change it, but
    // keeping it out makes the fixture's intent explicit).
    let x_curves: Vec<(&str, &Curve)> = segments
        .iter()
        .filter(|s| s.id() != "intruder")
        .map(|s| (s.id(), s.x()))
        .collect();
    let reference = reference_curve(1, &x_curves, &policy).unwrap();

    let aligned: Vec<_> = segments.iter().map(|s| realign(s, &reference)).collect();
    for a in &aligned {
        assert_eq!(a.len(), reference.len());
    }

    let member_x: Vec<&Curve> = aligned
        .iter()
        .filter(|a| a.segment_id() != "intruder")
        .map(|a| a.x())
        .collect();

    let tube = fit_ct(1, Channel::X, &member_x, 0.05).unwrap();
    let table = fit_cq(1, Channel::X, &member_x, 0.05, 20, 30).unwrap();

    let mut member_ct_flags = 0;
    let mut member_cq_flags = 0;
    for a in &aligned {
        let ct = detect_ct(a.segment_id(), a.x(), &tube, 0.1).unwrap();
        let cq = detect_cq(a.segment_id(), a.x(), &table, 0.1).unwrap();
        if a.segment_id() == "intruder" {
            assert!(ct.is_anomaly, "CT missed the intruder (score {})", ct.score);
            assert!(cq.is_anomaly, "CQ missed the intruder (score {})", cq.score);
        } else {
            member_ct_flags += usize::from(ct.is_anomaly);
            member_cq_flags += usize::from(cq.is_anomaly);
        }
    }
    // Members trained the detectors, so almost all of them must pass.
    assert!(member_ct_flags <= 2, "CT flagged {member_ct_flags} members");
    assert!(member_cq_flags <= 2, "CQ flagged {member_cq_flags} members");
}
