//! Invariants shared by the `properties` and `acceptance` targets.

use std::f64::consts::{PI, TAU};

use craniofit_core::calibration::{compose_tcp, localize_implant, pivot_calibrate};
use craniofit_core::contour::{
    clean_contour_points, extract_contour, fit_closed_polar_curve, fit_plane_frame, sample_curve, to_cylindrical,
    CleanupParams, ContourParams, ContourPointCloud, CurvatureThreshold, PlaneFrame,
};
use craniofit_core::evaluation::gap::loop_gaps;
use craniofit_core::evaluation::{generate_specimen, virtual_cut, SpecimenParams};
use craniofit_core::mesh::io::encode_mesh;
use craniofit_core::mesh::{self, primitives, MeshFormat, SpatialIndex};
use craniofit_core::par::Execution;
use craniofit_core::pipeline::{self, PipelineConfig};
use craniofit_core::registration::{
    extract_outer_layer, fiducial_registration_error, icp, register_points_svd, IcpParams, LandmarkSet,
};
use craniofit_core::toolpath::{fit_spline, generate_toolpath, transform_toolpath, ToolParams, ToolpathParams};
use craniofit_core::{Frame, RigidTransform, TriangleMesh};
use nalgebra::{Point3, Vector3};
use proptest::prelude::*;
use proptest::test_runner::{TestCaseError, TestRunner};

fn rigid(from: &'static str, to: &'static str) -> impl Strategy<Value = RigidTransform> {
    (
        prop::array::uniform3(-1.0..1.0f64),
        -PI..PI,
        prop::array::uniform3(-50.0..50.0f64),
    )
        .prop_filter("axis", |(a, _, _)| Vector3::from(*a).norm() > 0.1)
        .prop_map(move |(a, angle, t)| {
            RigidTransform::from_axis_angle(Vector3::from(a), angle, Vector3::from(t), from, to)
        })
}

fn bumpy_sphere(seed: u64) -> TriangleMesh {
    let m = primitives::icosphere(20.0, 2);
    let verts = m
        .vertices()
        .iter()
        .enumerate()
        .map(|(i, p)| {
            let k = ((i as u64).wrapping_mul(2654435761).wrapping_add(seed) % 1000) as f64 / 1000.0;
            Point3::from(p.coords * (1.0 + 0.03 * (k - 0.5)))
        })
        .collect();
    m.with_positions(verts).unwrap()
}

fn points(n: usize) -> impl Strategy<Value = Vec<Point3<f64>>> {
    prop::collection::vec(prop::array::uniform3(-40.0..40.0f64), n)
        .prop_map(|v| v.into_iter().map(Point3::from).collect())
}

fn non_collinear(p: &[Point3<f64>]) -> bool {
    let c = p.iter().fold(Vector3::zeros(), |a, q| a + q.coords) / p.len() as f64;
    let mut cov = nalgebra::Matrix3::zeros();
    for q in p {
        let d = q.coords - c;
        cov += d * d.transpose();
    }
    let mut e: Vec<f64> = cov.symmetric_eigenvalues().iter().copied().collect();
    e.sort_by(f64::total_cmp);
    e[1] > 1.0
}

/// Hemisphere of radius `big_r` with a sharp circular hole of radius
/// `hole` and a short vertical wall below the rim.
fn holed_hemisphere(big_r: f64, hole: f64) -> TriangleMesh {
    let phi0 = (hole / big_r).asin();
    let (wall, sphere) = (3, 30);
    let rings = wall + sphere;
    primitives::polar_patch(
        120,
        rings,
        move |t, s| {
            let j = (s * rings as f64).round() as usize;
            if j <= wall {
                let z = big_r * phi0.cos() - 4.0 * (1.0 - j as f64 / wall as f64);
                Point3::new(hole * t.cos(), hole * t.sin(), z)
            } else {
                let phi = phi0 + (PI / 2.0 - phi0) * (j - wall) as f64 / sphere as f64;
                Point3::new(
                    big_r * phi.sin() * t.cos(),
                    big_r * phi.sin() * t.sin(),
                    big_r * phi.cos(),
                )
            }
        },
        false,
    )
}

fn star(n: usize, base: f64, amps: &[f64], phase: f64, z: f64) -> Vec<Point3<f64>> {
    (0..n)
        .map(|i| {
            let t = TAU * i as f64 / n as f64;
            let r = base
                + amps
                    .iter()
                    .enumerate()
                    .map(|(k, a)| a * ((k + 2) as f64 * t + phase).cos())
                    .sum::<f64>();
            Point3::new(r * t.cos(), r * t.sin(), z)
        })
        .collect()
}

fn xy() -> PlaneFrame {
    PlaneFrame::from_origin_normal(Point3::origin(), Vector3::z()).unwrap()
}

fn in_polygon(poly: &[Point3<f64>], p: &Point3<f64>) -> bool {
    let mut inside = false;
    let n = poly.len();
    for i in 0..n {
        let (a, b) = (poly[i], poly[(i + 1) % n]);
        if (a.y > p.y) != (b.y > p.y) && p.x < a.x + (p.y - a.y) / (b.y - a.y) * (b.x - a.x) {
            inside = !inside;
        }
    }
    inside
}

macro_rules! invariants {
    ($($name:ident, $cases:expr, ($($arg:pat in $strat:expr),+ $(,)?) $body:block)*) => {
        $(
            pub fn $name() -> Result<(), String> {
                run($cases, ($($strat,)+), |($($arg,)+)| {
                    $body
                    Ok(())
                })
            }
        )*

        const PROPERTIES: &[Property] = &[$((stringify!($name), $name)),*];
    };
}

fn run<S: Strategy>(
    cases: u32,
    strategy: S,
    test: impl Fn(S::Value) -> Result<(), TestCaseError>,
) -> Result<(), String> {
    let mut runner = TestRunner::new(ProptestConfig {
        cases,
        ..ProptestConfig::default()
    });
    runner.run(&strategy, test).map_err(|e| e.to_string())
}

invariants! {
    closest_point_is_a_fixed_point, 32, (seed in 0u64..1000, q in prop::array::uniform3(-40.0..40.0f64)) {
        let index = SpatialIndex::new(bumpy_sphere(seed));
        let hit = index.closest_point(&Point3::from(q)).unwrap();
        let again = index.closest_point(&hit.point).unwrap();
        prop_assert!(again.distance < 1e-9);
    }

    mean_curvature_is_rigid_invariant, 32, (seed in 0u64..1000, g in rigid("a", "a")) {
        let m = bumpy_sphere(seed);
        let before = mesh::mean_curvature(&m).unwrap();
        let after = mesh::mean_curvature(&m.transformed(&g)).unwrap();
        for (a, b) in before.values.iter().zip(&after.values) {
            prop_assert!((a - b).abs() < 1e-6);
        }
    }

    normals_flip_with_orientation, 32, (seed in 0u64..1000) {
        let m = bumpy_sphere(seed);
        let n = mesh::vertex_normals(&m);
        let f = mesh::vertex_normals(&m.flipped());
        for (a, b) in n.iter().zip(&f) {
            prop_assert!((a + b).norm() < 1e-12);
        }
    }

    centroid_is_covariant, 32, (seed in 0u64..1000, g in rigid("a", "a")) {
        let m = bumpy_sphere(seed);
        let c = mesh::centroid(&m).unwrap();
        let moved = mesh::centroid(&m.transformed(&g)).unwrap();
        prop_assert!((moved - g.apply_point(&c)).norm() < 1e-9);
    }

    svd_registration_is_left_invariant, 32, (src in points(6), t0 in rigid("scan", "ct"), g in rigid("scan", "scan"), noise in points(6)) {
        prop_assume!(non_collinear(&src));
        let dst: Vec<_> = src
            .iter()
            .zip(&noise)
            .map(|(p, e)| t0.apply_point(p) + e.coords * 0.01)
            .collect();
        let source = LandmarkSet::unlabeled("scan", src.clone());
        let target = LandmarkSet::unlabeled("ct", dst);
        let t = register_points_svd(&source, &target).unwrap();
        let moved = LandmarkSet::unlabeled("scan", src.iter().map(|p| g.apply_point(p)).collect());
        let tg = register_points_svd(&moved, &target).unwrap();
        let expect = t.compose(&g.inverse()).unwrap();
        prop_assert!((tg.rotation() - expect.rotation()).abs().max() < 1e-9);
        prop_assert!((tg.translation() - expect.translation()).norm() < 1e-9);
    }

    svd_registration_recovers_noiseless_motion, 32, (src in points(5), t0 in rigid("scan", "ct")) {
        prop_assume!(non_collinear(&src));
        let source = LandmarkSet::unlabeled("scan", src.clone());
        let target = LandmarkSet::unlabeled("ct", src.iter().map(|p| t0.apply_point(p)).collect());
        let t = register_points_svd(&source, &target).unwrap();
        prop_assert!(fiducial_registration_error(&t, &source, &target).unwrap() < 1e-9);
    }

    pivot_is_translation_equivariant, 32, (tip in prop::array::uniform3(-50.0..50.0f64), pivot in prop::array::uniform3(-500.0..500.0f64), d in prop::array::uniform3(-100.0..100.0f64), angles in prop::collection::vec(prop::array::uniform3(-0.5..0.5f64), 8)) {
        let (tip, pivot, d) = (Vector3::from(tip), Point3::from(pivot), Vector3::from(d));
        let poses: Vec<RigidTransform> = angles
            .iter()
            .map(|a| {
                let r = nalgebra::Rotation3::from_euler_angles(a[0], a[1], a[2]);
                RigidTransform::new(*r.matrix(), pivot.coords - r * tip, "ee", "base").unwrap()
            })
            .collect();
        let Ok(base) = pivot_calibrate(&poses) else { return Ok(()) };
        let shifted: Vec<_> = poses
            .iter()
            .map(|p| RigidTransform::new(*p.rotation(), p.translation() + d, "ee", "base").unwrap())
            .collect();
        let moved = pivot_calibrate(&shifted).unwrap();
        prop_assert!((moved.tip_offset - base.tip_offset).norm() < 1e-9);
        prop_assert!((moved.pivot_point - (base.pivot_point + d)).norm() < 1e-9);
    }

    compose_tcp_matches_matrix_product, 32, (g in rigid("ee", "base"), tip in prop::array::uniform3(-100.0..100.0f64)) {
        let tip = Vector3::from(tip);
        let tcp = compose_tcp(&g, &tip).unwrap();
        let mut offset = nalgebra::Matrix4::identity();
        offset.fixed_view_mut::<3, 1>(0, 3).copy_from(&tip);
        let direct = g.to_homogeneous() * offset;
        prop_assert!((tcp.to_homogeneous() - direct).abs().max() < 1e-9);
        prop_assert_eq!(tcp.from_frame().as_str(), "tcp");
        prop_assert_eq!(tcp.to_frame().as_str(), "base");
    }

    localization_reproduces_markers, 32, (ct in points(4), g in rigid("ct", "base"), noise in points(4)) {
        prop_assume!(non_collinear(&ct));
        let base: Vec<_> = ct.iter().zip(&noise).map(|(p, e)| g.apply_point(p) + e.coords * 0.005).collect();
        let markers_ct = LandmarkSet::unlabeled("ct", ct.clone());
        let markers_base = LandmarkSet::unlabeled("base", base.clone());
        let (t, fre) = localize_implant(&markers_base, &markers_ct).unwrap();
        let residuals: Vec<f64> = ct.iter().zip(&base).map(|(c, b)| (t.apply_point(c) - b).norm()).collect();
        let mean = residuals.iter().sum::<f64>() / residuals.len() as f64;
        prop_assert!((mean - fre).abs() < 1e-9);
    }

    gap_is_nearly_symmetric, 32, (base in 25.0..40.0f64, offset in -3.0..3.0f64, amps in prop::collection::vec(-1.0..1.0f64, 0..3), phase in 0.0..TAU) {
        let a = star(240, base, &amps, phase, 0.0);
        let b = star(200, base + offset, &amps, phase + 0.05, 0.0);
        let n = 360;
        let ab = loop_gaps(&a, &b, &xy(), n);
        let ba = loop_gaps(&b, &a, &xy(), n);
        let step = |l: &[Point3<f64>]| {
            (0..l.len()).map(|i| (l[(i + 1) % l.len()] - l[i]).norm()).sum::<f64>() / n as f64
        };
        let bound = 2.0 * step(&a).max(step(&b));
        prop_assert!((ab.mean - ba.mean).abs() < bound, "{} vs {}", ab.mean, ba.mean);
    }

    icp_rms_never_increases, 12, (seed in 0u64..1000, g in rigid("scan", "ct")) {
        let target = primitives::icosphere(30.0, 3);
        let index = SpatialIndex::new(target.clone());
        let source: Vec<_> = bumpy_sphere(seed).vertices().iter().map(|p| Point3::from(p.coords * 1.5)).collect();
        // start within a few degrees and millimeters of the answer
        let near = RigidTransform::from_axis_angle(
            *g.translation() + Vector3::new(0.0, 0.0, 1.0),
            0.05,
            g.translation() * 0.05,
            "scan",
            "ct",
        );
        let fit = icp(&source, &index, &near, &IcpParams { trim_fraction: 0.1, ..IcpParams::default() }).unwrap();
        for w in fit.rms_history.windows(2) {
            prop_assert!(w[1] <= w[0] + 1e-12, "{:?}", fit.rms_history);
        }
    }

    outer_layer_is_idempotent, 12, (r_in in 10.0..30.0f64, gap in 1.0..10.0f64) {
        let shell = TriangleMesh::merged(&[
            &primitives::icosphere(r_in + gap, 2),
            &primitives::icosphere(r_in, 2).flipped(),
        ]);
        let once = extract_outer_layer(&shell).unwrap();
        let twice = extract_outer_layer(&once).unwrap();
        prop_assert_eq!(once, twice);
    }

    contour_extraction_is_rigid_equivariant, 12, (g in rigid("ct", "ct")) {
        let m = holed_hemisphere(80.0, 25.0);
        let params = ContourParams {
            threshold: CurvatureThreshold::Absolute(0.05),
            ..ContourParams::default()
        };
        let (_, base) = extract_contour(&m, &params).unwrap();
        let (_, moved) = extract_contour(&m.transformed(&g), &params).unwrap();
        // the in-plane reference direction is not carried along, so compare
        // the curves as point sets in the original frame
        let back = g.inverse();
        for p in sample_curve(&moved, 180) {
            let c = base.frame.to_cylindrical(&back.apply_point(&p)).unwrap();
            prop_assert!((c.r - base.r.eval(c.theta)).abs() < 1e-6);
            prop_assert!((c.h - base.h.eval(c.theta)).abs() < 1e-6);
        }
    }

    fit_residual_non_increasing_in_degree, 12, (amps in prop::collection::vec(-3.0..3.0f64, 1..6), noise in prop::collection::vec(-0.2..0.2f64, 300)) {
        let pts: Vec<_> = star(300, 30.0, &amps, 0.3, 0.0)
            .into_iter()
            .zip(&noise)
            .map(|(p, e)| Point3::new(p.x, p.y, 2.0 * e + (p.x * 0.05).sin()))
            .collect();
        let cloud = ContourPointCloud::new("ct", pts);
        let frame = fit_plane_frame(&cloud).unwrap();
        let cyl = to_cylindrical(&cloud, &frame);
        let mut last = (f64::INFINITY, f64::INFINITY);
        for degree in 1..=10 {
            let m = fit_closed_polar_curve(&cyl, degree, &frame).unwrap();
            prop_assert!(m.residual_rms_r <= last.0 + 1e-9);
            prop_assert!(m.residual_rms_h <= last.1 + 1e-9);
            last = (m.residual_rms_r, m.residual_rms_h);
        }
    }

    sampled_curve_satisfies_model, 12, (amps in prop::collection::vec(-3.0..3.0f64, 0..5), n in 3usize..500) {
        let cloud = ContourPointCloud::new("ct", star(200, 30.0, &amps, 0.0, 0.0));
        let frame = fit_plane_frame(&cloud).unwrap();
        let model = fit_closed_polar_curve(&to_cylindrical(&cloud, &frame), 6, &frame).unwrap();
        for p in sample_curve(&model, n) {
            let c = model.frame.to_cylindrical(&p).unwrap();
            prop_assert!((c.r - model.r.eval(c.theta)).abs() < 1e-12);
        }
    }

    cleanup_returns_a_subset, 12, (pts in prop::collection::vec(prop::array::uniform3(-20.0..20.0f64), 5..150), radius in 0.5..10.0f64) {
        let cloud = ContourPointCloud::new("ct", pts.into_iter().map(Point3::from).collect());
        let params = CleanupParams {
            neighbor_radius: radius,
            min_cluster_fraction: 0.5,
            k: 4,
            execution: Execution::Sequential,
        };
        let out = clean_contour_points(&cloud, &params).unwrap();
        prop_assert!(!out.points.is_empty());
        for p in &out.points {
            prop_assert!(cloud.points.contains(p));
        }
    }

    toolpath_invariants, 12, (base in 20.0..40.0f64, amp in 0.0..2.0f64, tilt in 0.0..40.0f64, tool_radius in 0.5..3.0f64, step in 0.3..2.0f64, g in rigid("ct", "ct")) {
        // convex: base exceeds 4·a2 + 9·a3
        let amps = [amp * 0.5, amp * 0.25];
        let pts = star(256, base, &amps, 0.4, 3.0);
        let spline = fit_spline(&pts, 64).unwrap();
        let frame = PlaneFrame::from_origin_normal(Point3::new(0.0, 0.0, 3.0), Vector3::z()).unwrap();
        let params = ToolpathParams {
            tool: ToolParams { tool_radius, tilt_angle: tilt, cut_depth: 3.0 },
            step,
            ..ToolpathParams::default()
        };
        let tp = generate_toolpath(&spline, &frame, &params, "ct").unwrap();
        let n = tp.len();
        let curve: Vec<_> = (0..2048).map(|i| spline.eval(spline.period() * i as f64 / 2048.0)).collect();
        for (i, w) in tp.waypoints.iter().enumerate() {
            prop_assert!((w.axis.dot(&tp.normal).clamp(-1.0, 1.0).acos() - tilt.to_radians()).abs() < 1e-6);
            prop_assert!(!in_polygon(&curve, &w.position));
            let next = tp.waypoints[(i + 1) % n].position;
            prop_assert!((next - w.position).norm() <= step + 1e-9);
        }

        let moved_pts: Vec<_> = pts.iter().map(|p| g.apply_point(p)).collect();
        let moved_spline = fit_spline(&moved_pts, 64).unwrap();
        let moved_frame = frame.transformed(&g).unwrap();
        let moved = generate_toolpath(&moved_spline, &moved_frame, &params, "ct").unwrap();
        let expect = transform_toolpath(&tp, &g).unwrap();
        prop_assert_eq!(moved.len(), expect.len());
        for (a, b) in moved.waypoints.iter().zip(&expect.waypoints) {
            prop_assert!((a.position - b.position).norm() < 1e-6);
            prop_assert!((a.axis - b.axis).norm() < 1e-6);
        }
    }

    virtual_cut_only_removes, 12, (radius in 8.0..30.0f64, tilt in 0.0..30.0f64, shift in prop::array::uniform2(-5.0..5.0f64)) {
        let plate = primitives::square_plate(25.0, 3.0, 20);
        let pts: Vec<_> = (0..128)
            .map(|i| {
                let t = TAU * i as f64 / 128.0;
                Point3::new(shift[0] + radius * t.cos(), shift[1] + radius * t.sin(), 3.0)
            })
            .collect();
        let spline = fit_spline(&pts, 128).unwrap();
        let frame = PlaneFrame::from_origin_normal(Point3::new(shift[0], shift[1], 3.0), Vector3::z()).unwrap();
        let params = ToolpathParams {
            tool: ToolParams { tool_radius: 1.5, tilt_angle: tilt, cut_depth: 3.0 },
            ..ToolpathParams::default()
        };
        let tp = generate_toolpath(&spline, &frame, &params, "ct").unwrap();
        let out = virtual_cut(&plate, &Frame::new("ct"), &tp, Execution::Sequential).unwrap();
        let original: std::collections::HashSet<[u64; 3]> = plate
            .vertices()
            .iter()
            .map(|p| [p.x.to_bits(), p.y.to_bits(), p.z.to_bits()])
            .collect();
        let surface = SpatialIndex::new(plate.clone());
        let mut created = 0;
        for p in out.vertices() {
            if !original.contains(&[p.x.to_bits(), p.y.to_bits(), p.z.to_bits()]) {
                created += 1;
                // cut vertices are split points on the original surface
                prop_assert!(surface.closest_point(p).unwrap().distance < 1e-9);
            }
        }
        prop_assert!(created > 0);
        // a toolpath of radius ≤ 30 around a point within 5 of center always cuts the 50 mm plate
        prop_assert!(out.surface_area() < plate.surface_area());
    }

    specimens_are_deterministic, 4, (seed in 0u64..10_000) {
        let params = SpecimenParams { segments: 120, scan_segments: 100, rings: 12, ..SpecimenParams::default() };
        let a = generate_specimen(seed, &params).unwrap();
        let b = generate_specimen(seed, &params).unwrap();
        for (x, y) in [
            (&a.defect_skull, &b.defect_skull),
            (&a.scan, &b.scan),
            (&a.oversized_implant, &b.oversized_implant),
        ] {
            prop_assert_eq!(encode_mesh(x, MeshFormat::PlyBinary, None), encode_mesh(y, MeshFormat::PlyBinary, None));
        }
        prop_assert_eq!(a.ground_truth_contour, b.ground_truth_contour);
        prop_assert_eq!(a.scan_landmarks, b.scan_landmarks);
    }
}

pub type Property = (&'static str, fn() -> Result<(), String>);

/// Every invariant, by name.
pub fn all() -> Vec<Property> {
    let mut v = PROPERTIES.to_vec();
    v.push((
        "noiseless_pipeline_gap_within_discretization",
        noiseless_pipeline_gap_within_discretization,
    ));
    v.push(("chained_stages_equal_pipeline", chained_stages_equal_pipeline));
    v
}

fn check(ok: bool, msg: impl FnOnce() -> String) -> Result<(), String> {
    if ok {
        Ok(())
    } else {
        Err(msg())
    }
}

fn specimen_config(dir: &std::path::Path, seed: u64, noise: f64) -> Result<PipelineConfig, String> {
    let mut base = PipelineConfig::for_specimens();
    base.specimen.noise_sigma = noise;
    base.specimen.landmark_noise = noise;
    pipeline::synthesize(dir, seed, &base).map_err(|e| e.to_string())?;
    PipelineConfig::load(&dir.join(pipeline::SPECIMEN_CONFIG)).map_err(|e| e.to_string())
}

/// Mean |gap| on a noiseless specimen is at most one step plus one edge.
pub fn noiseless_pipeline_gap_within_discretization() -> Result<(), String> {
    let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
    for seed in [2, 7] {
        let cfg = specimen_config(&dir.path().join(seed.to_string()), seed, 0.0)?;
        let report = pipeline::run_pipeline(&cfg).map_err(|e| e.to_string())?;
        let skull = mesh::load_mesh(&cfg.ct, MeshFormat::PlyBinary).map_err(|e| e.to_string())?;
        let bound = cfg.step + skull.mean_edge_length();
        let mean: f64 = report
            .result("mean_abs_gap")
            .unwrap_or("nan")
            .parse()
            .map_err(|_| "no gap")?;
        check(mean <= bound, || format!("seed {seed}: mean gap {mean} above {bound}"))?;
    }
    Ok(())
}

/// Running the stages one at a time reproduces the pipeline's bytes.
pub fn chained_stages_equal_pipeline() -> Result<(), String> {
    let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
    let mut cfg = specimen_config(dir.path(), 13, 0.05)?;
    pipeline::run_pipeline(&cfg).map_err(|e| e.to_string())?;
    let whole = cfg.out_dir.clone();
    cfg.out_dir = dir.path().join("chained");
    for stage in cfg.stages() {
        pipeline::run_stage(stage, &cfg).map_err(|e| e.to_string())?;
        for name in stage.outputs() {
            let a = std::fs::read(whole.join(name)).map_err(|e| e.to_string())?;
            let b = std::fs::read(cfg.out_dir.join(name)).map_err(|e| e.to_string())?;
            check(a == b, || format!("{name} differs"))?;
        }
    }
    Ok(())
}
