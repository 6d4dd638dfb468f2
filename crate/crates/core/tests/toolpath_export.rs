use std::path::Path;

use craniofit_core::toolpath::{export_toolpath, load_toolpath, ToolParams, Toolpath, ToolpathFormat, Waypoint};
use craniofit_core::Frame;
use nalgebra::{Point3, Vector3};

fn two_waypoints() -> Toolpath {
    let tilt = 20f64.to_radians();
    Toolpath {
        waypoints: vec![
            Waypoint {
                position: Point3::new(31.5, 0.0, 3.0),
                axis: Vector3::new(tilt.sin(), 0.0, tilt.cos()),
            },
            Waypoint {
                position: Point3::new(0.0, 31.5, 3.0),
                axis: Vector3::new(0.0, tilt.sin(), tilt.cos()),
            },
        ],
        tool: ToolParams::default(),
        frame: Frame::new("ct"),
        normal: Vector3::z(),
    }
}

fn check(format: ToolpathFormat, golden: &str) {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("tp.txt");
    export_toolpath(&two_waypoints(), &out, format).unwrap();
    let expected = std::fs::read(Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/golden").join(golden)).unwrap();
    assert_eq!(std::fs::read(&out).unwrap(), expected);
    let back = load_toolpath(&out).unwrap();
    assert_eq!(back.len(), 2);
    assert_eq!(back.frame, Frame::new("ct"));
}

#[test]
fn waypoint_text_golden() {
    check(ToolpathFormat::WaypointText, "two_waypoints.txt");
}

#[test]
fn gcode_like_golden() {
    check(ToolpathFormat::GcodeLike, "two_waypoints.gcode");
}
