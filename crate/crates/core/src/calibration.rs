//! Tool-tip pivot calibration, TCP chaining and marker-based implant
//! localization in the robot base frame.

use std::fmt::Write as _;
use std::path::Path;

use nalgebra::{DMatrix, DVector, Matrix3};

use crate::error::{Error, Result};
use crate::registration::{self, LandmarkSet};
use crate::textio;
use crate::transform::{Frame, RigidTransform};
use crate::{Point3, Vector3};

/// Smallest singular value of the stacked pivot system below which the
/// poses are considered too similar.
pub const DIVERSITY_GATE: f64 = 1e-6;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PivotSolution {
    /// Tip position in the end-effector frame (mm).
    pub tip_offset: Vector3,
    /// Fixed pin position in the base frame (mm).
    pub pivot_point: Point3,
    /// rms of `‖Rᵢ·tip + pᵢ − pivot‖` over the samples (mm).
    pub residual_rms: f64,
    pub samples: usize,
}

/// Least-squares tip and pivot from end-effector poses (ee → base) that
/// all touch the same fixed point.
pub fn pivot_calibrate(poses: &[RigidTransform]) -> Result<PivotSolution> {
    if poses.len() < 3 {
        return Err(Error::InsufficientDiversity { sigma_min: 0.0 });
    }
    for p in poses {
        if p.from_frame().as_str() != Frame::EE || p.to_frame().as_str() != Frame::BASE {
            return Err(Error::FrameMismatch {
                expected: format!("{} -> {}", Frame::EE, Frame::BASE),
                found: format!("{} -> {}", p.from_frame(), p.to_frame()),
            });
        }
    }
    // the best pivot for a given tip is the mean of the tip positions, so
    // eliminate it and solve (Rᵢ − R̄)·tip = p̄ − pᵢ
    let m = poses.len();
    let r_mean = poses.iter().map(|p| p.rotation()).sum::<Matrix3<f64>>() / m as f64;
    let p_mean = poses.iter().map(|p| p.translation()).sum::<Vector3>() / m as f64;
    let mut a = DMatrix::zeros(3 * m, 3);
    let mut b = DVector::zeros(3 * m);
    for (i, pose) in poses.iter().enumerate() {
        a.fixed_view_mut::<3, 3>(3 * i, 0)
            .copy_from(&(pose.rotation() - r_mean));
        b.fixed_rows_mut::<3>(3 * i).copy_from(&(p_mean - pose.translation()));
    }
    let sigma_min = a.singular_values().min();
    if sigma_min < DIVERSITY_GATE {
        return Err(Error::InsufficientDiversity { sigma_min });
    }
    let qr = a.qr();
    let x = qr
        .r()
        .solve_upper_triangular(&(qr.q().transpose() * b))
        .ok_or_else(|| Error::RankDeficient("pivot system".into()))?;
    let tip = Vector3::new(x[0], x[1], x[2]);
    let pivot = Point3::from(r_mean * tip + p_mean);
    let sq: f64 = poses
        .iter()
        .map(|p| (p.rotation() * tip + p.translation() - pivot.coords).norm_squared())
        .sum();
    Ok(PivotSolution {
        tip_offset: tip,
        pivot_point: pivot,
        residual_rms: (sq / m as f64).sqrt(),
        samples: m,
    })
}

impl PivotSolution {
    /// Human-readable summary followed by a `key=value` block.
    pub fn to_report(&self) -> String {
        let f = textio::fmt_f64;
        let v = |x: &Vector3| format!("{:.4} {:.4} {:.4}", x.x, x.y, x.z);
        let mut s = String::new();
        let _ = writeln!(s, "pivot calibration ({} poses)", self.samples);
        let _ = writeln!(s, "  tip offset (ee, mm):     {}", v(&self.tip_offset));
        let _ = writeln!(s, "  pivot point (base, mm):  {}", v(&self.pivot_point.coords));
        let _ = writeln!(s, "  residual rms (mm):       {:.4}", self.residual_rms);
        s.push_str("\n[pivot]\n");
        let _ = writeln!(s, "samples={}", self.samples);
        for (k, x) in ["tip_x", "tip_y", "tip_z"].iter().zip(self.tip_offset.iter()) {
            let _ = writeln!(s, "{k}={}", f(*x));
        }
        for (k, x) in ["pivot_x", "pivot_y", "pivot_z"]
            .iter()
            .zip(self.pivot_point.coords.iter())
        {
            let _ = writeln!(s, "{k}={}", f(*x));
        }
        let _ = writeln!(s, "residual_rms={}", f(self.residual_rms));
        s
    }
}

/// `base ← tcp` as `base ← ee` followed by a pure translation to the tip.
pub fn compose_tcp(base_ee: &RigidTransform, tip_offset: &Vector3) -> Result<RigidTransform> {
    let ee_tcp = RigidTransform::translation_only(*tip_offset, Frame::TCP, base_ee.from_frame().clone());
    if base_ee.from_frame().as_str() != Frame::EE {
        return Err(Error::FrameMismatch {
            expected: Frame::EE.to_string(),
            found: base_ee.from_frame().to_string(),
        });
    }
    base_ee.compose(&ee_tcp)
}

/// CT → base transform from markers touched by the calibrated tool, with
/// the resulting fiducial registration error (mm).
pub fn localize_implant(markers_base: &LandmarkSet, markers_ct: &LandmarkSet) -> Result<(RigidTransform, f64)> {
    let t = registration::register_points_svd(markers_ct, markers_base)?;
    let fre = registration::fiducial_registration_error(&t, markers_ct, markers_base)?;
    Ok((t, fre))
}

/// One pose per line: 12 numbers, the row-major 3×4 `[R | p]` (ee → base).
pub fn parse_poses(text: &str) -> Result<Vec<RigidTransform>> {
    let ctx = "pose file";
    textio::content_lines(text)
        .map(|line| {
            let v = textio::parse_floats(line, ctx)?;
            if v.len() != 12 {
                return Err(Error::parse(ctx, format!("expected 12 numbers, got {}", v.len())));
            }
            let r = Matrix3::new(v[0], v[1], v[2], v[4], v[5], v[6], v[8], v[9], v[10]);
            let p = Vector3::new(v[3], v[7], v[11]);
            RigidTransform::new(r, p, Frame::EE, Frame::BASE).map_err(|e| Error::parse(ctx, format!("'{line}': {e}")))
        })
        .collect()
}

pub fn format_poses(poses: &[RigidTransform]) -> String {
    let mut s = String::from("# r11 r12 r13 px r21 r22 r23 py r31 r32 r33 pz (ee -> base, mm)\n");
    for pose in poses {
        let (r, p) = (pose.rotation(), pose.translation());
        let vals: Vec<String> = (0..3)
            .flat_map(|i| (0..4).map(move |j| if j < 3 { r[(i, j)] } else { p[i] }))
            .map(textio::fmt_f64)
            .collect();
        s.push_str(&vals.join(" "));
        s.push('\n');
    }
    s
}

pub fn load_poses(path: &Path) -> Result<Vec<RigidTransform>> {
    parse_poses(&textio::read_file(path)?)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;
    use rand_distr::{Distribution, Normal};

    /// Poses whose tip `tip` (ee frame) sits on `pivot` (base frame).
    fn pivot_poses(rng: &mut ChaCha8Rng, n: usize, tip: Vector3, pivot: Point3) -> Vec<RigidTransform> {
        (0..n)
            .map(|_| {
                let axis = Vector3::new(
                    rng.random_range(-1.0..1.0),
                    rng.random_range(-1.0..1.0),
                    rng.random_range(-1.0..1.0),
                );
                let angle = rng.random_range(0.1..0.6);
                let r = *RigidTransform::from_axis_angle(axis, angle, Vector3::zeros(), "ee", "base").rotation();
                RigidTransform::new(r, pivot.coords - r * tip, "ee", "base").unwrap()
            })
            .collect()
    }

    #[test]
    fn noiseless_pivot() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let tip = Vector3::new(10.0, 0.0, 150.0);
        let pivot = Point3::new(400.0, -120.0, 80.0);
        let sol = pivot_calibrate(&pivot_poses(&mut rng, 20, tip, pivot)).unwrap();
        assert!((sol.tip_offset - tip).norm() < 1e-9);
        assert!((sol.pivot_point - pivot).norm() < 1e-9);
        assert!(sol.residual_rms < 1e-9);
    }

    #[test]
    fn noisy_pivot_monte_carlo() {
        let tip = Vector3::new(10.0, 0.0, 150.0);
        let pivot = Point3::new(400.0, -120.0, 80.0);
        let sigma = 0.1;
        let noise = Normal::new(0.0, sigma).unwrap();
        let mut errors = Vec::new();
        let mut residuals = Vec::new();
        for seed in 0..100 {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let poses: Vec<RigidTransform> = pivot_poses(&mut rng, 20, tip, pivot)
                .into_iter()
                .map(|p| {
                    let d = Vector3::new(noise.sample(&mut rng), noise.sample(&mut rng), noise.sample(&mut rng));
                    RigidTransform::new(*p.rotation(), p.translation() + d, "ee", "base").unwrap()
                })
                .collect();
            let sol = pivot_calibrate(&poses).unwrap();
            errors.push((sol.tip_offset - tip).norm());
            residuals.push(sol.residual_rms);
        }
        errors.sort_by(f64::total_cmp);
        assert!(errors[94] < 0.3, "95th percentile tip error {}", errors[94]);
        let mean_res = residuals.iter().sum::<f64>() / residuals.len() as f64;
        // three noisy axes, six fitted parameters over sixty equations
        assert!(mean_res > 0.5 * sigma && mean_res < 2.0 * sigma, "{mean_res}");
    }

    #[test]
    fn identical_rotations_are_rejected() {
        let poses: Vec<RigidTransform> = (0..10)
            .map(|i| RigidTransform::translation_only(Vector3::new(i as f64, 0.0, 0.0), "ee", "base"))
            .collect();
        assert!(matches!(
            pivot_calibrate(&poses),
            Err(Error::InsufficientDiversity { .. })
        ));
    }

    #[test]
    fn pivot_is_translation_equivariant() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let poses = pivot_poses(
            &mut rng,
            12,
            Vector3::new(1.0, 2.0, 120.0),
            Point3::new(10.0, 20.0, 30.0),
        );
        let noisy: Vec<RigidTransform> = poses
            .iter()
            .map(|p| {
                RigidTransform::new(
                    *p.rotation(),
                    p.translation() + Vector3::new(rng.random(), rng.random(), rng.random()) * 0.2,
                    "ee",
                    "base",
                )
                .unwrap()
            })
            .collect();
        let d = Vector3::new(-300.0, 45.0, 12.5);
        let shifted: Vec<RigidTransform> = noisy
            .iter()
            .map(|p| RigidTransform::new(*p.rotation(), p.translation() + d, "ee", "base").unwrap())
            .collect();
        let a = pivot_calibrate(&noisy).unwrap();
        let b = pivot_calibrate(&shifted).unwrap();
        assert!((b.pivot_point - a.pivot_point - d).norm() < 1e-9);
        assert!((b.tip_offset - a.tip_offset).norm() < 1e-9);
    }

    #[test]
    fn tcp_examples() {
        let tip = Vector3::new(0.0, 0.0, 100.0);
        let id = RigidTransform::identity("ee", "base");
        let tcp = compose_tcp(&id, &tip).unwrap();
        assert_relative_eq!(tcp.apply_point(&Point3::origin()), Point3::new(0.0, 0.0, 100.0));
        assert_eq!(tcp.from_frame().as_str(), "tcp");
        assert_eq!(tcp.to_frame().as_str(), "base");

        let rx = RigidTransform::from_axis_angle(
            Vector3::x(),
            std::f64::consts::FRAC_PI_2,
            Vector3::zeros(),
            "ee",
            "base",
        );
        let tcp = compose_tcp(&rx, &tip).unwrap();
        assert!((tcp.apply_point(&Point3::origin()) - Point3::new(0.0, -100.0, 0.0)).norm() < 1e-12);

        let wrong = RigidTransform::identity("tcp", "base");
        assert!(matches!(compose_tcp(&wrong, &tip), Err(Error::FrameMismatch { .. })));
    }

    #[test]
    fn tcp_matches_matrix_product() {
        let mut rng = ChaCha8Rng::seed_from_u64(6);
        for _ in 0..50 {
            let axis = Vector3::new(rng.random(), rng.random(), rng.random::<f64>() + 0.1);
            let pose = RigidTransform::from_axis_angle(
                axis,
                rng.random_range(-3.0..3.0),
                Vector3::new(
                    rng.random_range(-500.0..500.0),
                    rng.random_range(-500.0..500.0),
                    rng.random_range(0.0..800.0),
                ),
                "ee",
                "base",
            );
            let tip = Vector3::new(
                rng.random_range(-20.0..20.0),
                rng.random_range(-20.0..20.0),
                rng.random_range(50.0..200.0),
            );
            let mut ee_tcp = nalgebra::Matrix4::identity();
            ee_tcp.fixed_view_mut::<3, 1>(0, 3).copy_from(&tip);
            let oracle = pose.to_homogeneous() * ee_tcp;
            let got = compose_tcp(&pose, &tip).unwrap().to_homogeneous();
            assert!((got - oracle).abs().max() < 1e-12);
        }
    }

    fn markers() -> Vec<Point3> {
        vec![
            Point3::new(40.0, 0.0, 60.0),
            Point3::new(-20.0, 35.0, 62.0),
            Point3::new(-20.0, -35.0, 58.0),
        ]
    }

    #[test]
    fn localize_identity_and_degenerate() {
        let ct = LandmarkSet::unlabeled("ct", markers());
        let base = LandmarkSet::unlabeled("base", markers());
        let (t, fre) = localize_implant(&base, &ct).unwrap();
        assert!((t.to_homogeneous() - nalgebra::Matrix4::identity()).abs().max() < 1e-12);
        assert!(fre < 1e-12);
        assert_eq!(t.from_frame().as_str(), "ct");
        assert_eq!(t.to_frame().as_str(), "base");
        let line: Vec<Point3> = (0..3).map(|i| Point3::new(i as f64 * 10.0, 0.0, 0.0)).collect();
        let ct = LandmarkSet::unlabeled("ct", line.clone());
        let base = LandmarkSet::unlabeled("base", line);
        assert!(matches!(
            localize_implant(&base, &ct),
            Err(Error::DegenerateConfiguration(_))
        ));
    }

    #[test]
    fn localize_noise_propagation() {
        let noise = Normal::new(0.0, 0.1).unwrap();
        let mut errors = Vec::new();
        for seed in 0..200 {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let truth = RigidTransform::from_axis_angle(
                Vector3::new(rng.random(), rng.random(), 1.0),
                rng.random_range(-3.0..3.0),
                Vector3::new(600.0, -200.0, 100.0),
                "ct",
                "base",
            );
            let ct = LandmarkSet::unlabeled("ct", markers());
            let touched: Vec<Point3> = markers()
                .iter()
                .map(|p| {
                    truth.apply_point(p)
                        + Vector3::new(noise.sample(&mut rng), noise.sample(&mut rng), noise.sample(&mut rng))
                })
                .collect();
            let base = LandmarkSet::unlabeled("base", touched);
            let (t, fre) = localize_implant(&base, &ct).unwrap();
            // applying the transform reproduces the touched markers within the FRE
            let mapped = ct.transformed(&t).unwrap();
            let mean: f64 = mapped
                .points
                .iter()
                .zip(&base.points)
                .map(|(a, b)| (a - b).norm())
                .sum::<f64>()
                / 3.0;
            assert!((mean - fre).abs() < 1e-12);
            // probe at a 100 mm lever arm from the marker centroid
            let probe = Point3::new(0.0, 0.0, 60.0) + Vector3::new(100.0, 0.0, 0.0);
            errors.push((t.apply_point(&probe) - truth.apply_point(&probe)).norm());
        }
        errors.sort_by(f64::total_cmp);
        assert!(errors[189] < 0.5, "95th percentile {}", errors[189]);
    }

    #[test]
    fn pose_file_round_trip() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let poses = pivot_poses(&mut rng, 5, Vector3::new(0.0, 0.0, 100.0), Point3::new(1.0, 2.0, 3.0));
        let back = parse_poses(&format_poses(&poses)).unwrap();
        for (a, b) in back.iter().zip(&poses) {
            assert!((a.to_homogeneous() - b.to_homogeneous()).abs().max() < 1e-12);
        }
        assert!(parse_poses("1 0 0 0 0 1 0 0 0 0 1\n").is_err());
        assert!(parse_poses("2 0 0 0 0 1 0 0 0 0 1 0\n").is_err());
    }

    #[test]
    fn report_has_key_values() {
        let sol = PivotSolution {
            tip_offset: Vector3::new(10.0, 0.0, 150.0),
            pivot_point: Point3::new(1.0, 2.0, 3.0),
            residual_rms: 0.25,
            samples: 20,
        };
        let r = sol.to_report();
        assert!(r.contains("tip_z=150\n"));
        assert!(r.contains("residual_rms=0.25\n"));
        assert!(r.contains("samples=20\n"));
    }
}
