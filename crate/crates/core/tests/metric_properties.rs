use handfit::evalkit::{
    align_for_eval, auc, default_thresholds, epe, evaluate, joint_errors, pck_curve, AlignMode,
    EvalFrame, EvalOptions, Mask,
};
use handfit::model::{Joints, NUM_JOINTS};
use nalgebra::{Matrix3, Vector3};
use proptest::prelude::*;

fn joints(range: f64) -> impl Strategy<Value = Joints> {
    prop::array::uniform21(prop::array::uniform3(-range..range).prop_map(Vector3::from))
}

fn mask() -> impl Strategy<Value = Mask> {
    prop::array::uniform21(prop::bool::weighted(0.8))
}

/// Prediction sets as (pred, gt, mask) frames with errors of tens of mm.
fn frames() -> impl Strategy<Value = Vec<(Joints, Joints, Mask)>> {
    prop::collection::vec((joints(200.0), joints(40.0), mask()), 1..8).prop_map(|v| {
        v.into_iter()
            .map(|(gt, offset, m)| {
                let pred = std::array::from_fn(|k| gt[k] + offset[k]);
                (pred, gt, m)
            })
            .collect()
    })
}

fn split(f: &[(Joints, Joints, Mask)]) -> (Vec<Joints>, Vec<Joints>, Vec<Mask>) {
    (
        f.iter().map(|x| x.0).collect(),
        f.iter().map(|x| x.1).collect(),
        f.iter().map(|x| x.2).collect(),
    )
}

/// Umeyama similarity via SVD of the cross-covariance, written independently
/// of the crate's quaternion solver.
fn umeyama(src: &[Vector3<f64>], dst: &[Vector3<f64>]) -> (Matrix3<f64>, Vector3<f64>, f64) {
    let n = src.len() as f64;
    let ms = src.iter().sum::<Vector3<f64>>() / n;
    let md = dst.iter().sum::<Vector3<f64>>() / n;
    let mut cov = Matrix3::zeros();
    let mut var = 0.0;
    for (s, d) in src.iter().zip(dst) {
        cov += (d - md) * (s - ms).transpose();
        var += (s - ms).norm_squared();
    }
    let svd = cov.svd(true, true);
    let (u, vt) = (svd.u.unwrap(), svd.v_t.unwrap());
    let mut e = Matrix3::identity();
    if (u * vt).determinant() < 0.0 {
        e[(2, 2)] = -1.0;
    }
    let r = u * e * vt;
    let scale = (Matrix3::from_diagonal(&svd.singular_values) * e).trace() / var;
    (r, md - r * ms * scale, scale)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(128))]

    #[test]
    fn pck_is_a_valid_curve(f in frames()) {
        let (p, g, m) = split(&f);
        prop_assume!(m.iter().flatten().any(|v| *v));
        let curve = pck_curve(&p, &g, &m, &default_thresholds()).unwrap();
        for w in curve.windows(2) {
            prop_assert!(w[0].1 <= w[1].1);
        }
        prop_assert!(curve.iter().all(|c| (0.0..=1.0).contains(&c.1)));
        let a = auc(&curve).unwrap();
        prop_assert!((0.0..=1.0).contains(&a));
        prop_assert_eq!(a == 1.0, curve.iter().all(|c| c.1 == 1.0));
    }

    #[test]
    fn auc_never_rises_when_errors_inflate(f in frames(), k in 1.0f64..3.0) {
        let (p, g, m) = split(&f);
        prop_assume!(m.iter().flatten().any(|v| *v));
        let inflated: Vec<Joints> = p
            .iter()
            .zip(&g)
            .map(|(pred, gt)| std::array::from_fn(|j| gt[j] + (pred[j] - gt[j]) * k))
            .collect();
        let t = default_thresholds();
        let a0 = auc(&pck_curve(&p, &g, &m, &t).unwrap()).unwrap();
        let a1 = auc(&pck_curve(&inflated, &g, &m, &t).unwrap()).unwrap();
        prop_assert!(a1 <= a0);
    }

    #[test]
    fn metrics_ignore_frame_order(
        (f, shuffled) in frames().prop_flat_map(|f| (Just(f.clone()), Just(f).prop_shuffle())),
    ) {
        let (p, g, m) = split(&f);
        prop_assume!(m.iter().flatten().any(|v| *v));
        let (ps, gs, ms) = split(&shuffled);
        let t = default_thresholds();
        prop_assert!((epe(&p, &g, &m).unwrap() - epe(&ps, &gs, &ms).unwrap()).abs() < 1e-12);
        prop_assert_eq!(pck_curve(&p, &g, &m, &t).unwrap(), pck_curve(&ps, &gs, &ms, &t).unwrap());
    }

    #[test]
    fn eval_alignment_matches_svd_procrustes(f in frames()) {
        for (pred, gt, m) in &f {
            let idx: Vec<usize> = (0..NUM_JOINTS).filter(|&k| m[k]).collect();
            prop_assume!(idx.len() >= 4);
            let aligned = align_for_eval(pred, gt, m).unwrap();
            let src: Vec<_> = idx.iter().map(|&k| pred[k]).collect();
            let dst: Vec<_> = idx.iter().map(|&k| gt[k]).collect();
            let (r, t, s) = umeyama(&src, &dst);
            for k in 0..NUM_JOINTS {
                let expected = r * pred[k] * s + t;
                prop_assert!((aligned[k] - expected).norm() < 1e-8, "joint {k}");
            }
        }
    }

    #[test]
    fn evaluate_matches_direct_metrics_without_alignment(f in frames()) {
        let (p, g, m) = split(&f);
        prop_assume!(m.iter().flatten().any(|v| *v));
        let eval_frames: Vec<EvalFrame> = f
            .iter()
            .enumerate()
            .map(|(i, (pred, gt, mask))| EvalFrame { id: format!("{i:05}"), pred: *pred, gt: *gt, mask: *mask })
            .collect();
        let opts = EvalOptions { align: AlignMode::None, ..EvalOptions::default() };
        let report = evaluate(&eval_frames, &opts).unwrap();
        prop_assert_eq!(report.epe_mm, epe(&p, &g, &m).unwrap());
        prop_assert_eq!(report.keypoints_evaluated, joint_errors(&p, &g, &m).unwrap().len());
        prop_assert_eq!(report.frames_evaluated, f.len());
    }
}
