use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use craniofit_core::calibration;
use craniofit_core::evaluation::GapReport;
use craniofit_core::par;
use craniofit_core::pipeline::{self, artifacts, PipelineConfig, Stage, StageReport};
use craniofit_core::registration::LandmarkSet;
use craniofit_core::{textio, Error, Result};

/// Scan-to-toolpath pipeline for resizing oversized cranial implants.
///
/// Settings come from the defaults, then the `--config` file, then
/// `--out-dir`/`--seed`, then `--<key> <value>` pairs after the
/// subcommand. Any config key can be given that way, e.g.
/// `craniofit pipeline --tilt_angle 15 --tool_radius 2`.
#[derive(Parser, Debug)]
#[command(name = "craniofit", version)]
struct Cli {
    /// INI config file (`key = value` lines under `[section]` headers).
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Directory for artifacts.
    #[arg(long, global = true)]
    out_dir: Option<PathBuf>,
    /// Specimen seed.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Repeat for more detail.
    #[arg(short, long, global = true, action = clap::ArgAction::Count)]
    verbose: u8,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Debug, Default)]
struct Overrides {
    /// `--<key> <value>` config overrides.
    #[arg(trailing_var_arg = true, allow_hyphen_values = true, value_name = "--KEY VALUE")]
    rest: Vec<String>,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Write seeded synthetic specimens, each with a ready-to-run pipeline.ini.
    Synth {
        /// Number of specimens; with more than one each goes to specimen_NNN.
        #[arg(long, default_value_t = 1)]
        count: usize,
        #[command(flatten)]
        overrides: Overrides,
    },
    /// Keep the outer surface of the CT mesh.
    ExtractOuter(Overrides),
    /// Landmark initialization and ICP of the scan onto the outer layer.
    Register(Overrides),
    /// Extract and fit the defect contour from the registered scan.
    Contour(Overrides),
    /// Build the cutting toolpath on the implant.
    Toolpath(Overrides),
    /// Cut the implant along the toolpath.
    SimulateCut(Overrides),
    /// Gap between the resized implant and the defect rim.
    Evaluate {
        /// Also write gap_report.csv.
        #[arg(long)]
        csv: bool,
        #[command(flatten)]
        overrides: Overrides,
    },
    /// Run every stage and write a manifest.
    Pipeline(Overrides),
    /// Tool-tip offset from end-effector poses about a fixed pivot.
    PivotCalibrate {
        /// One pose per line: 12 numbers, row-major 3x4 [R | t], ee to base.
        #[arg(long)]
        poses: PathBuf,
        /// Write the report here as well as to stdout.
        #[arg(long)]
        output: Option<PathBuf>,
    },
    /// Implant pose in the robot base frame from three or more markers.
    Localize {
        /// Marker positions measured in the base frame.
        #[arg(long)]
        markers_base: PathBuf,
        /// The same markers in the CT frame.
        #[arg(long)]
        markers_ct: PathBuf,
        /// Write the ct-to-base transform here.
        #[arg(long)]
        output: Option<PathBuf>,
    },
}

fn parse_overrides(rest: &[String]) -> Result<Vec<(String, String)>> {
    let mut out = Vec::new();
    let mut it = rest.iter();
    while let Some(arg) = it.next() {
        let key = arg
            .strip_prefix("--")
            .ok_or_else(|| Error::Config(format!("expected --<key>, got '{arg}'")))?;
        if let Some((k, v)) = key.split_once('=') {
            out.push((k.to_string(), v.to_string()));
        } else {
            let value = it
                .next()
                .ok_or_else(|| Error::Config(format!("--{key} needs a value")))?;
            out.push((key.to_string(), value.clone()));
        }
    }
    Ok(out)
}

fn build_config(cli: &Cli, base: PipelineConfig, overrides: &Overrides) -> Result<PipelineConfig> {
    let mut cfg = match &cli.config {
        Some(path) => PipelineConfig::load(path)?,
        None => base,
    };
    if let Some(dir) = &cli.out_dir {
        cfg.out_dir = dir.clone();
    }
    if let Some(seed) = cli.seed {
        cfg.seed = seed;
    }
    for (key, value) in parse_overrides(&overrides.rest)? {
        cfg.set(&key, &value, None)?;
    }
    cfg.validate()?;
    Ok(cfg)
}

fn print_results(report: &StageReport) {
    for (k, v) in &report.results {
        println!("{k} = {v}");
    }
}

fn stage(cli: &Cli, which: Stage, overrides: &Overrides) -> Result<()> {
    let cfg = build_config(cli, PipelineConfig::default(), overrides)?;
    cfg.validate_inputs(&[which])?;
    print_results(&pipeline::run_stage(which, &cfg)?);
    Ok(())
}

fn run(cli: &Cli) -> Result<()> {
    match &cli.command {
        Command::Synth { count, overrides } => {
            let cfg = build_config(cli, PipelineConfig::for_specimens(), overrides)?;
            if *count == 0 {
                return Err(Error::Config("--count must be at least 1".into()));
            }
            let dir = |i: usize| -> PathBuf {
                if *count == 1 {
                    cfg.out_dir.clone()
                } else {
                    cfg.out_dir.join(format!("specimen_{i:03}"))
                }
            };
            let results = par::map_range(cfg.execution(), *count, |i| {
                pipeline::synthesize(&dir(i), cfg.seed + i as u64, &cfg)
            });
            for (i, r) in results.into_iter().enumerate() {
                r?;
                println!("{}", dir(i).join(pipeline::SPECIMEN_CONFIG).display());
            }
            Ok(())
        }
        Command::ExtractOuter(o) => stage(cli, Stage::ExtractOuter, o),
        Command::Register(o) => stage(cli, Stage::Register, o),
        Command::Contour(o) => stage(cli, Stage::Contour, o),
        Command::Toolpath(o) => stage(cli, Stage::Toolpath, o),
        Command::SimulateCut(o) => stage(cli, Stage::SimulateCut, o),
        Command::Evaluate { csv, overrides } => {
            stage(cli, Stage::Evaluate, overrides)?;
            if *csv {
                let cfg = build_config(cli, PipelineConfig::default(), overrides)?;
                let text = textio::read_file(&cfg.out_dir.join(artifacts::GAP_REPORT))?;
                GapReport::from_text(&text)?.save_csv(&cfg.out_dir.join("gap_report.csv"))?;
            }
            Ok(())
        }
        Command::Pipeline(o) => {
            let cfg = build_config(cli, PipelineConfig::default(), o)?;
            let report = pipeline::run_pipeline(&cfg)?;
            for s in &report.stages {
                print_results(s);
            }
            println!("manifest = {}", cfg.out_dir.join(artifacts::MANIFEST).display());
            Ok(())
        }
        Command::PivotCalibrate { poses, output } => {
            let solution = calibration::pivot_calibrate(&calibration::load_poses(poses)?)?;
            emit(&solution.to_report(), output.as_deref())
        }
        Command::Localize {
            markers_base,
            markers_ct,
            output,
        } => {
            let base = LandmarkSet::load(markers_base)?;
            let ct = LandmarkSet::load(markers_ct)?;
            let (t, fre) = calibration::localize_implant(&base, &ct)?;
            println!("fre = {fre:.6}");
            emit(&t.to_text(), output.as_deref())
        }
    }
}

fn emit(text: &str, output: Option<&Path>) -> Result<()> {
    print!("{text}");
    match output {
        Some(path) => textio::write_file(path, text),
        None => Ok(()),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let level = match cli.verbose {
        0 => "warn",
        1 => "info",
        _ => "debug",
    };
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(level)).init();
    match run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.class().exit_code() as u8)
        }
    }
}
