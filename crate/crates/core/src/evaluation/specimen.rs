//! Synthetic defect specimens: a spherical-cap skull shell with a harmonic
//! hole, a scan of the defect region, an oversized implant and fiducials.

use std::f64::consts::TAU;
use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use crate::error::{Error, Result};
use crate::mesh::primitives::polar_patch;
use crate::mesh::{self, MeshFormat, TriangleMesh};
use crate::registration::LandmarkSet;
use crate::textio;
use crate::transform::{Frame, RigidTransform};
use crate::{Point3, Vector3};

#[derive(Debug, Clone, PartialEq)]
pub struct SpecimenParams {
    /// Outer skull radius (mm).
    pub shell_radius: f64,
    /// Bone thickness (mm).
    pub shell_thickness: f64,
    /// Mean in-plane radius of the hole (mm).
    pub contour_base_radius: f64,
    /// Amplitudes (mm) of harmonics 2, 3, 4, ... of the hole outline.
    pub harmonic_amplitudes: Vec<f64>,
    /// In-plane dilation of the implant beyond the hole (mm).
    pub implant_margin: f64,
    /// Isotropic vertex noise of the scan (mm).
    pub noise_sigma: f64,
    /// Isotropic noise of the landmarks picked on the scan (mm).
    pub landmark_noise: f64,
    /// Polar half-angle of the CT skull cap (degrees).
    pub cap_angle: f64,
    /// Polar half-angle of the scanned region (degrees).
    pub scan_angle: f64,
    /// Largest rotation of the scan frame (degrees).
    pub max_rotation: f64,
    /// Largest translation of the scan frame (mm).
    pub max_translation: f64,
    /// Vertices around each ring of the skull and implant.
    pub segments: usize,
    /// Vertices around each ring of the scan.
    pub scan_segments: usize,
    /// Ring count from the hole out to the cap edge.
    pub rings: usize,
}

impl Default for SpecimenParams {
    fn default() -> Self {
        SpecimenParams {
            shell_radius: 80.0,
            shell_thickness: 3.0,
            contour_base_radius: 30.0,
            harmonic_amplitudes: vec![3.0, 1.5],
            implant_margin: 5.0,
            noise_sigma: 0.05,
            landmark_noise: 0.3,
            cap_angle: 55.0,
            scan_angle: 45.0,
            max_rotation: 10.0,
            max_translation: 5.0,
            segments: 240,
            scan_segments: 200,
            rings: 30,
        }
    }
}

impl SpecimenParams {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::InvalidParams(m));
        if !(self.shell_radius > 0.0) || !(self.shell_thickness > 0.0) || self.shell_thickness >= self.shell_radius {
            return bad(format!(
                "shell radius {} and thickness {} are inconsistent",
                self.shell_radius, self.shell_thickness
            ));
        }
        if !(self.implant_margin > 0.0) {
            return bad(format!("implant_margin {} must be > 0", self.implant_margin));
        }
        if self.noise_sigma < 0.0 || self.landmark_noise < 0.0 {
            return bad("noise must be non-negative".into());
        }
        if !(0.0 < self.scan_angle && self.scan_angle < self.cap_angle && self.cap_angle < 85.0) {
            return bad(format!(
                "need 0 < scan_angle {} < cap_angle {} < 85",
                self.scan_angle, self.cap_angle
            ));
        }
        if self.segments < 16 || self.scan_segments < 16 || self.rings < 4 {
            return bad("mesh resolution too coarse".into());
        }
        let swing: f64 = self.harmonic_amplitudes.iter().map(|a| a.abs()).sum();
        let min_r = self.contour_base_radius - swing;
        if !(min_r > 0.2 * self.contour_base_radius) {
            return bad(format!("harmonics reach radius {min_r}, the hole would pinch"));
        }
        // the implant and the fiducial band must fit inside the scanned region
        let max_r = self.contour_base_radius + swing + self.implant_margin;
        let scan_r = self.shell_radius * self.scan_angle.to_radians().sin();
        if max_r + 5.0 > scan_r {
            return bad(format!(
                "contour plus margin reaches {max_r} mm, scan region ends at {scan_r:.1} mm"
            ));
        }
        Ok(())
    }
}

/// Everything a pipeline run needs, plus ground truth.
#[derive(Debug, Clone, PartialEq)]
pub struct DefectSpecimen {
    pub seed: u64,
    pub params: SpecimenParams,
    /// Closed two-layer skull shell with the defect (CT frame).
    pub defect_skull: TriangleMesh,
    /// Outer surface and hole wall as seen by the scanner (scan frame).
    pub scan: TriangleMesh,
    /// Oversized implant, closed (CT frame).
    pub oversized_implant: TriangleMesh,
    /// Hole rim on the outer surface (CT frame).
    pub ground_truth_contour: Vec<Point3>,
    pub fiducials: LandmarkSet,
    /// Fiducials as picked on the scan, with noise.
    pub scan_landmarks: LandmarkSet,
    pub scan_to_ct: RigidTransform,
}

/// In-plane hole radius `ρ(θ) = base + Σ a_k cos(kθ + φ_k)`.
#[derive(Debug, Clone)]
struct Outline {
    base: f64,
    terms: Vec<(f64, f64, f64)>,
}

impl Outline {
    fn radius(&self, theta: f64) -> f64 {
        self.base
            + self
                .terms
                .iter()
                .map(|&(k, a, phase)| a * (k * theta + phase).cos())
                .sum::<f64>()
    }
}

fn on_sphere(radius: f64, polar: f64, theta: f64) -> Point3 {
    Point3::new(
        radius * polar.sin() * theta.cos(),
        radius * polar.sin() * theta.sin(),
        radius * polar.cos(),
    )
}

/// Builds the specimen for `seed`; identical inputs give identical output.
pub fn generate_specimen(seed: u64, params: &SpecimenParams) -> Result<DefectSpecimen> {
    params.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let outline = Outline {
        base: params.contour_base_radius,
        terms: params
            .harmonic_amplitudes
            .iter()
            .enumerate()
            .map(|(i, &a)| ((i + 2) as f64, a, rng.random_range(0.0..TAU)))
            .collect(),
    };
    let big_r = params.shell_radius;
    let small_r = big_r - params.shell_thickness;
    let inner_scale = small_r / big_r;
    let cap = params.cap_angle.to_radians();
    let scan_cap = params.scan_angle.to_radians();
    let hole_polar = |theta: f64| (outline.radius(theta) / big_r).asin();

    // skull: four unshared patches so each keeps clean normals
    let seg = params.segments;
    let rings = params.rings;
    let outer = polar_patch(
        seg,
        rings,
        |t, s| on_sphere(big_r, hole_polar(t) + (cap - hole_polar(t)) * s, t),
        false,
    );
    let inner = outer
        .with_positions(
            outer
                .vertices()
                .iter()
                .map(|p| Point3::from(p.coords * inner_scale))
                .collect(),
        )
        .expect("same topology")
        .flipped();
    let wall_rows = 3;
    // hole wall runs from the inner rim (s = 0) up to the outer rim
    let hole_wall = polar_patch(
        seg,
        wall_rows,
        |t, s| Point3::from(on_sphere(big_r, hole_polar(t), t).coords * (inner_scale + (1.0 - inner_scale) * s)),
        false,
    );
    let rim_wall = polar_patch(
        seg,
        wall_rows,
        |t, s| Point3::from(on_sphere(big_r, cap, t).coords * (inner_scale + (1.0 - inner_scale) * s)),
        false,
    )
    .flipped();
    let defect_skull = TriangleMesh::merged(&[&outer, &inner, &hole_wall, &rim_wall]);

    let ground_truth_contour: Vec<Point3> = (0..seg)
        .map(|i| {
            let t = TAU * i as f64 / seg as f64;
            on_sphere(big_r, hole_polar(t), t)
        })
        .collect();

    // implant: the removed bone dilated in-plane, capped top and bottom
    let implant_r = |t: f64| outline.radius(t) + params.implant_margin;
    let on_sphere_at =
        |radius: f64, rho: f64, t: f64| Point3::new(rho * t.cos(), rho * t.sin(), (radius * radius - rho * rho).sqrt());
    let top = polar_patch(seg, rings, |t, s| on_sphere_at(big_r, s * implant_r(t), t), true);
    let bottom = polar_patch(seg, rings, |t, s| on_sphere_at(small_r, s * implant_r(t), t), true).flipped();
    let side = polar_patch(
        seg,
        wall_rows,
        |t, s| {
            let rho = implant_r(t);
            let z0 = (small_r * small_r - rho * rho).sqrt();
            let z1 = (big_r * big_r - rho * rho).sqrt();
            Point3::new(rho * t.cos(), rho * t.sin(), z0 + (z1 - z0) * s)
        },
        false,
    )
    .flipped();
    let oversized_implant = weld(&TriangleMesh::merged(&[&top, &bottom, &side]));

    // fiducials on the intact shell between the implant and the scan edge
    let swing: f64 = params.harmonic_amplitudes.iter().map(|a| a.abs()).sum();
    let inner_rho = params.contour_base_radius + swing + params.implant_margin;
    let fid_polar = 0.5 * ((inner_rho / big_r).asin() + scan_cap);
    let fid_points: Vec<Point3> = (0..3)
        .map(|i| {
            let t = TAU * i as f64 / 3.0 + rng.random_range(-0.3..0.3);
            on_sphere(big_r, fid_polar, t)
        })
        .collect();
    let fiducials = LandmarkSet::unlabeled(Frame::CT, fid_points);

    // scan: hole wall and outer surface sharing the rim ring, in its own frame
    let sseg = params.scan_segments;
    let scan_wall_rows = 2;
    let scan_rings = scan_wall_rows + rings;
    let scan_ct = polar_patch(
        sseg,
        scan_rings,
        |t, s| {
            let j = (s * scan_rings as f64).round() as usize;
            let rim = on_sphere(big_r, hole_polar(t), t);
            if j <= scan_wall_rows {
                let f = j as f64 / scan_wall_rows as f64;
                Point3::from(rim.coords * (inner_scale + (1.0 - inner_scale) * f))
            } else {
                let f = (j - scan_wall_rows) as f64 / rings as f64;
                on_sphere(big_r, hole_polar(t) + (scan_cap - hole_polar(t)) * f, t)
            }
        },
        false,
    );
    let center = mesh::centroid(&scan_ct)?;
    let ct_to_scan = random_motion(&mut rng, params, center);
    let mut jitter = |p: Point3, sigma: f64| {
        if sigma > 0.0 {
            let n = Normal::new(0.0, sigma).expect("valid sigma");
            p + Vector3::new(n.sample(&mut rng), n.sample(&mut rng), n.sample(&mut rng))
        } else {
            p
        }
    };
    let scan_pts: Vec<Point3> = scan_ct
        .vertices()
        .iter()
        .map(|p| jitter(ct_to_scan.apply_point(p), params.noise_sigma))
        .collect();
    let scan = scan_ct.with_positions(scan_pts)?;
    let scan_landmarks = LandmarkSet::new(
        Frame::SCAN,
        fiducials.labels.clone(),
        fiducials
            .points
            .iter()
            .map(|p| jitter(ct_to_scan.apply_point(p), params.landmark_noise))
            .collect(),
    )?;

    Ok(DefectSpecimen {
        seed,
        params: params.clone(),
        defect_skull,
        scan,
        oversized_implant,
        ground_truth_contour,
        fiducials,
        scan_landmarks,
        scan_to_ct: ct_to_scan.inverse(),
    })
}

/// CT → scan: rotation about `center` plus a bounded shift.
fn random_motion(rng: &mut ChaCha8Rng, params: &SpecimenParams, center: Point3) -> RigidTransform {
    let axis = loop {
        let v = Vector3::new(
            rng.random_range(-1.0..1.0),
            rng.random_range(-1.0..1.0),
            rng.random_range(-1.0..1.0),
        );
        if v.norm() > 0.1 && v.norm() <= 1.0 {
            break v;
        }
    };
    let angle = rng.random_range(-1.0..1.0) * params.max_rotation.to_radians();
    let shift = loop {
        let v = Vector3::new(
            rng.random_range(-1.0..1.0),
            rng.random_range(-1.0..1.0),
            rng.random_range(-1.0..1.0),
        );
        if v.norm() <= 1.0 {
            break v * params.max_translation;
        }
    };
    let rot = RigidTransform::from_axis_angle(axis, angle, Vector3::zeros(), Frame::CT, Frame::SCAN);
    let t = center.coords - rot.rotation() * center.coords + shift;
    RigidTransform::new(*rot.rotation(), t, Frame::CT, Frame::SCAN).expect("proper rotation")
}

/// Merges vertices with identical positions.
fn weld(m: &TriangleMesh) -> TriangleMesh {
    let mut index = std::collections::HashMap::new();
    let mut verts = Vec::new();
    let remap: Vec<u32> = m
        .vertices()
        .iter()
        .map(|p| {
            let key = (p.x.to_bits(), p.y.to_bits(), p.z.to_bits());
            *index.entry(key).or_insert_with(|| {
                verts.push(*p);
                (verts.len() - 1) as u32
            })
        })
        .collect();
    let faces = m
        .faces()
        .iter()
        .map(|f| [remap[f[0] as usize], remap[f[1] as usize], remap[f[2] as usize]])
        .collect();
    TriangleMesh::new(verts, faces).expect("welding keeps faces valid")
}

/// File names written by [`DefectSpecimen::save`].
pub mod files {
    pub const SKULL: &str = "defect_skull.ply";
    pub const SCAN: &str = "scan.ply";
    pub const IMPLANT: &str = "implant.ply";
    pub const CONTOUR: &str = "ground_truth_contour.xyz";
    pub const FIDUCIALS: &str = "landmarks_ct.txt";
    pub const SCAN_LANDMARKS: &str = "landmarks_scan.txt";
    pub const TRUTH: &str = "scan_to_ct_truth.txt";
}

impl DefectSpecimen {
    pub fn save(&self, dir: &Path) -> Result<()> {
        std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
        mesh::save_mesh(&self.defect_skull, &dir.join(files::SKULL), MeshFormat::PlyBinary)?;
        mesh::save_mesh(&self.scan, &dir.join(files::SCAN), MeshFormat::PlyBinary)?;
        mesh::save_mesh(
            &self.oversized_implant,
            &dir.join(files::IMPLANT),
            MeshFormat::PlyBinary,
        )?;
        textio::write_file(
            &dir.join(files::CONTOUR),
            &format!(
                "# frame {}\n{}",
                Frame::CT,
                textio::points_to_text(&self.ground_truth_contour)
            ),
        )?;
        self.fiducials.save(&dir.join(files::FIDUCIALS))?;
        self.scan_landmarks.save(&dir.join(files::SCAN_LANDMARKS))?;
        self.scan_to_ct.save(&dir.join(files::TRUTH))
    }
}
