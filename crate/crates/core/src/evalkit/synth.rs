use nalgebra::{Quaternion, UnitQuaternion, Vector3};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::alignment::RigidTransform;
use crate::error::{Error, Result};
use crate::model::{forward_kinematics, HandModel, Joints, PoseState, NUM_JOINTS};
use crate::pipeline::{KeypointSet, Units};

/// Fraction of each joint range that sampled poses stay inside.
pub const LIMIT_FRACTION: f64 = 0.8;
/// Sampled scales are log-uniform in this range (model metres → target mm).
pub const SCALE_RANGE: (f64, f64) = (500.0, 2000.0);
/// Half-width of the translation box, in target units.
pub const TRANSLATION_HALF_WIDTH: f64 = 500.0;

/// Ground truth behind one synthetic frame.
#[derive(Debug, Clone, PartialEq)]
pub struct SynthTruth {
    pub state: PoseState,
    pub transform: RigidTransform,
    /// Noise-free target-space joints.
    pub joints: Joints,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SynthDataset {
    pub targets: Vec<KeypointSet>,
    pub truth: Vec<SynthTruth>,
    pub noise_sigma: f64,
    pub seed: u64,
}

fn random_rotation(rng: &mut ChaCha8Rng) -> nalgebra::Matrix3<f64> {
    loop {
        let q: [f64; 4] = std::array::from_fn(|_| StandardNormal.sample(rng));
        let q = Quaternion::new(q[0], q[1], q[2], q[3]);
        if q.norm() > 1e-6 {
            return UnitQuaternion::from_quaternion(q)
                .to_rotation_matrix()
                .into_inner();
        }
    }
}

/// Random feasible hands under random similarity transforms, in mm.
///
/// Each frame draws θ uniformly inside 80% of every joint range, a uniform
/// rotation, a log-uniform scale and a translation, then adds isotropic
/// Gaussian noise of standard deviation `noise_sigma`. The random stream does
/// not depend on `noise_sigma`, so two datasets with the same seed share
/// their ground truth.
pub fn synth_generate(
    model: &HandModel,
    n_frames: usize,
    noise_sigma: f64,
    seed: u64,
) -> Result<SynthDataset> {
    if !(noise_sigma >= 0.0) || !noise_sigma.is_finite() {
        return Err(Error::param(format!(
            "noise sigma must be finite and non-negative, got {noise_sigma}"
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let (ln_lo, ln_hi) = (SCALE_RANGE.0.ln(), SCALE_RANGE.1.ln());
    let mut targets = Vec::with_capacity(n_frames);
    let mut truth = Vec::with_capacity(n_frames);
    for _ in 0..n_frames {
        let theta: Vec<f64> = model
            .joint_limits()
            .iter()
            .map(|l| rng.random_range(LIMIT_FRACTION * l.lower..=LIMIT_FRACTION * l.upper))
            .collect();
        let rotation = random_rotation(&mut rng);
        let scale = rng.random_range(ln_lo..ln_hi).exp();
        let translation = Vector3::from_fn(|_, _| {
            rng.random_range(-TRANSLATION_HALF_WIDTH..TRANSLATION_HALF_WIDTH)
        });
        let transform = RigidTransform {
            rotation,
            translation,
            scale,
        };
        let state = PoseState::with_theta(theta);
        let fk = forward_kinematics(model, &state)?;
        let joints: Joints = std::array::from_fn(|i| transform.apply_point(&fk[i]));
        let mut noisy = joints;
        for p in noisy.iter_mut() {
            for c in 0..3 {
                let z: f64 = StandardNormal.sample(&mut rng);
                p[c] += noise_sigma * z;
            }
        }
        targets.push(KeypointSet::new(noisy, Units::Millimeters));
        truth.push(SynthTruth {
            state,
            transform,
            joints,
        });
    }
    debug_assert!(targets.iter().all(|t| t.points.len() == NUM_JOINTS));
    Ok(SynthDataset {
        targets,
        truth,
        noise_sigma,
        seed,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn noise_free_targets_are_exact() {
        let m = HandModel::default_right();
        let d = synth_generate(&m, 5, 0.0, 42).unwrap();
        for (t, truth) in d.targets.iter().zip(&d.truth) {
            assert_eq!(t.points, truth.joints);
            let fk = forward_kinematics(&m, &truth.state).unwrap();
            for (p, q) in t.points.iter().zip(&fk) {
                assert_eq!(*p, truth.transform.apply_point(q));
            }
        }
    }

    #[test]
    fn deterministic_per_seed() {
        let m = HandModel::default_right();
        assert_eq!(
            synth_generate(&m, 4, 5.0, 9).unwrap(),
            synth_generate(&m, 4, 5.0, 9).unwrap()
        );
        assert_ne!(
            synth_generate(&m, 1, 5.0, 9).unwrap().targets,
            synth_generate(&m, 1, 5.0, 10).unwrap().targets
        );
    }

    #[test]
    fn truth_independent_of_sigma() {
        let m = HandModel::default_right();
        let a = synth_generate(&m, 3, 0.0, 1).unwrap();
        let b = synth_generate(&m, 3, 5.0, 1).unwrap();
        assert_eq!(a.truth, b.truth);
    }

    #[test]
    fn samples_inside_shrunk_limits() {
        let m = HandModel::default_right();
        let d = synth_generate(&m, 20, 0.0, 3).unwrap();
        for t in &d.truth {
            for (v, l) in t.state.theta.iter().zip(m.joint_limits()) {
                assert!(*v >= LIMIT_FRACTION * l.lower && *v <= LIMIT_FRACTION * l.upper);
            }
            assert!(t.transform.scale >= SCALE_RANGE.0 && t.transform.scale <= SCALE_RANGE.1);
            assert!(t.transform.translation.amax() <= TRANSLATION_HALF_WIDTH);
            assert!((t.transform.rotation.determinant() - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn negative_sigma_rejected() {
        let m = HandModel::default_right();
        assert!(synth_generate(&m, 1, -1.0, 0).is_err());
        assert!(synth_generate(&m, 1, f64::NAN, 0).is_err());
    }

    #[test]
    fn mean_noise_norm_matches_chi_distribution() {
        // E‖n‖ for n ~ N(0, σ²I₃) is σ·2·sqrt(2/π).
        let m = HandModel::default_right();
        let sigma = 5.0;
        let a = synth_generate(&m, 500, 0.0, 77).unwrap();
        let b = synth_generate(&m, 500, sigma, 77).unwrap();
        let mut sum = 0.0;
        let mut n = 0;
        for (x, y) in a.targets.iter().zip(&b.targets) {
            for (p, q) in x.points.iter().zip(&y.points) {
                sum += (p - q).norm();
                n += 1;
            }
        }
        assert!(n >= 10_000);
        let expected = sigma * 2.0 * (2.0 / std::f64::consts::PI).sqrt();
        let mean = sum / n as f64;
        assert!((mean / expected - 1.0).abs() < 0.05, "{mean} vs {expected}");
    }
}
