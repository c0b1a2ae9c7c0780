//! The `roict` command line.
//!
//! Exit codes: 0 success, 1 I/O or file format error, 2 configuration or
//! parameter error, 3 step-size validation failure, 4 shape mismatch, 5 a
//! bench criterion failed.

use std::ffi::OsString;
use std::fs;
use std::path::{Path, PathBuf};

use clap::{Parser, Subcommand};
use serde::Serialize;

use crate::bench::{run_bench, BenchSuite};
use crate::config::{
    EvaluateConfig, EvaluateItem, GeometryConfig, Method, PhantomKind, ReconstructConfig, RunConfig, SimulateConfig,
    TuneConfig,
};
use crate::error::{Error, Result};
use crate::io::{
    read_image, read_sinogram, write_image, write_metrics_csv, write_png, write_sinogram, write_trace_csv, MetricRow,
};
use crate::metrics::{crop_roi, mae, psnr_roi, ssim_roi};
use crate::pipeline::{self, RunOptions};
use crate::regularizer::MaskParams;
use crate::sim::{desk_phantom, make_dataset, render_phantom, simulate_projections, NoiseSpec, PhantomSpec};
use crate::solver::{tune_params, UnrolledParams};

pub const EXIT_OK: i32 = 0;
pub const EXIT_IO: i32 = 1;
pub const EXIT_CONFIG: i32 = 2;
pub const EXIT_STEP: i32 = 3;
pub const EXIT_SHAPE: i32 = 4;
pub const EXIT_BENCH_FAIL: i32 = 5;

#[derive(Parser, Debug)]
#[command(name = "roict", version, about = "Region-of-interest CT reconstruction from truncated few-view projections")]
pub struct Cli {
    /// Run configuration (TOML).
    #[arg(long, global = true, value_name = "PATH")]
    pub config: Option<PathBuf>,
    /// Overrides the configured seed.
    #[arg(long, global = true, value_name = "U64")]
    pub seed: Option<u64>,
    /// Worker threads (0 or unset: all cores).
    #[arg(long, global = true, value_name = "N")]
    pub threads: Option<usize>,
    /// Run solvers even when the step sizes fail validation.
    #[arg(long, global = true)]
    pub override_step_check: bool,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Subcommand, Debug)]
pub enum Command {
    /// Render phantoms and simulate their measurements.
    Simulate,
    /// Reconstruct an image from a sinogram file.
    Reconstruct,
    /// ROI metrics of reconstructions against references.
    Evaluate,
    /// Tune unrolled-network parameters against a reference image.
    Tune,
    /// Run a benchmark suite.
    Bench {
        #[arg(long, value_name = "PATH")]
        suite: PathBuf,
        /// Also write the line-delimited report here.
        #[arg(long, value_name = "PATH")]
        report: Option<PathBuf>,
        /// Run cases concurrently.
        #[arg(long)]
        parallel: bool,
    },
}

pub fn exit_code(e: &Error) -> i32 {
    match e {
        Error::Io(_) | Error::Format(_) => EXIT_IO,
        Error::Config(_) | Error::InvalidParam(_) | Error::InvalidGeometry(_) => EXIT_CONFIG,
        Error::StepSize(_) => EXIT_STEP,
        Error::Shape(_) => EXIT_SHAPE,
    }
}

/// Parse `args` (including the program name), run, and return the exit
/// code. Messages go to stderr, reports to stdout.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { EXIT_CONFIG } else { EXIT_OK };
        }
    };
    let pool = match rayon::ThreadPoolBuilder::new().num_threads(cli.threads.unwrap_or(0)).build() {
        Ok(p) => p,
        Err(e) => {
            eprintln!("error: thread pool: {e}");
            return EXIT_CONFIG;
        }
    };
    match pool.install(|| dispatch(&cli)) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            exit_code(&e)
        }
    }
}

fn load_config(cli: &Cli) -> Result<RunConfig> {
    let path = cli.config.as_ref().ok_or_else(|| Error::Config("--config is required".into()))?;
    let cfg = RunConfig::load(path)?;
    cfg.validate()?;
    Ok(cfg)
}

fn section<'a, T>(s: &'a Option<T>, name: &str) -> Result<&'a T> {
    s.as_ref().ok_or_else(|| Error::Config(format!("missing [{name}] section")))
}

fn dispatch(cli: &Cli) -> Result<i32> {
    if let Command::Bench { suite, report, parallel } = &cli.command {
        let suite = BenchSuite::load(suite)?;
        let rep = run_bench(&suite, cli.seed, *parallel)?;
        for r in &rep.results {
            eprintln!("{}", r.summary_line());
        }
        let jsonl = rep.to_jsonl();
        print!("{jsonl}");
        if let Some(p) = report {
            fs::write(p, &jsonl)?;
        }
        return Ok(if rep.any_fail() { EXIT_BENCH_FAIL } else { EXIT_OK });
    }
    let cfg = load_config(cli)?;
    let seed = cli.seed.or(cfg.seed).unwrap_or(0);
    match &cli.command {
        Command::Simulate => simulate(&cfg, section(&cfg.simulate, "simulate")?, seed)?,
        Command::Reconstruct => reconstruct(&cfg, section(&cfg.reconstruct, "reconstruct")?, cli.override_step_check)?,
        Command::Evaluate => evaluate(&cfg, section(&cfg.evaluate, "evaluate")?)?,
        Command::Tune => tune(&cfg, section(&cfg.tune, "tune")?, seed)?,
        Command::Bench { .. } => unreachable!(),
    }
    Ok(EXIT_OK)
}

#[derive(Serialize)]
struct ManifestRecord {
    id: usize,
    phantom: String,
    sinogram: String,
    seed: u64,
    spec: PhantomSpec,
}

pub fn simulate(cfg: &RunConfig, sim: &SimulateConfig, seed: u64) -> Result<()> {
    let geom = cfg.geometry.geometry()?;
    let full = cfg.geometry.full_geometry()?;
    let noise = cfg.noise.clone().unwrap_or_default();
    if sim.count == 0 {
        return Err(Error::Config("simulate.count must be at least 1".into()));
    }
    fs::create_dir_all(&sim.out_dir)?;
    let width = cfg.geometry.width;
    let items: Vec<(PhantomSpec, crate::grid::Image, crate::tomo::Sinogram, u64)> = match sim.phantom {
        PhantomKind::Random => make_dataset(sim.count, seed, &full, &noise)?
            .into_iter()
            .map(|d| (d.spec, d.phantom, d.sinogram, d.seed))
            .collect(),
        kind => {
            let spec = desk_phantom(width, geom.grid(), kind == PhantomKind::DeskWire);
            let phantom = render_phantom(&spec, width)?;
            (0..sim.count as u64)
                .map(|i| {
                    let s = seed.wrapping_add(i);
                    let y = simulate_projections(&phantom, &full, &NoiseSpec { seed: s, ..noise.clone() })?;
                    Ok((spec.clone(), phantom.clone(), y, s))
                })
                .collect::<Result<_>>()?
        }
    };
    let mut manifest = String::new();
    for (id, (spec, phantom, y, s)) in items.into_iter().enumerate() {
        let pname = format!("phantom_{id:04}.bin");
        let sname = format!("sinogram_{id:04}.bin");
        write_image(&sim.out_dir.join(&pname), &phantom)?;
        write_sinogram(&sim.out_dir.join(&sname), &y)?;
        let rec = ManifestRecord { id, phantom: pname, sinogram: sname, seed: s, spec };
        manifest.push_str(&serde_json::to_string(&rec).map_err(|e| Error::Format(e.to_string()))?);
        manifest.push('\n');
    }
    fs::write(sim.out_dir.join("manifest.jsonl"), manifest)?;
    Ok(())
}

fn load_unrolled(path: &Path) -> Result<UnrolledParams> {
    let text = fs::read_to_string(path)?;
    serde_json::from_str(&text).map_err(|e| Error::Config(format!("{}: {e}", path.display())))
}

pub fn reconstruct(cfg: &RunConfig, rc: &ReconstructConfig, override_steps: bool) -> Result<()> {
    let y = read_sinogram(&rc.sinogram)?;
    let problem = pipeline::build_problem(cfg, y)?;
    let reference = rc.reference.as_deref().map(read_image).transpose()?;
    if let Some(r) = &reference {
        problem.grid().check(r)?;
    }
    let unrolled = match (&cfg.solver.params, rc.method) {
        (Some(p), Method::Unrolled) => Some(load_unrolled(p)?),
        _ => None,
    };
    let rec = pipeline::reconstruct(
        cfg,
        &problem,
        rc.method,
        RunOptions { override_steps, trace: rc.trace.is_some(), reference: reference.as_ref(), unrolled },
    )?;
    write_image(&rc.output, &rec.x)?;
    if let Some(t) = &rc.trace {
        write_trace_csv(t, &rec.trace)?;
    }
    if let Some(p) = &rc.png {
        write_png(p, &rec.x)?;
    }
    let meta_path = rc.metadata.clone().unwrap_or_else(|| {
        let mut p = rc.output.clone().into_os_string();
        p.push(".json");
        PathBuf::from(p)
    });
    let meta = serde_json::to_string_pretty(&rec).map_err(|e| Error::Format(e.to_string()))?;
    fs::write(meta_path, meta + "\n")?;
    Ok(())
}

pub fn evaluate(cfg: &RunConfig, ec: &EvaluateConfig) -> Result<()> {
    let grid = cfg.geometry.grid()?;
    let rows = ec
        .items
        .iter()
        .map(|it| {
            let x = read_image(&it.reconstruction)?;
            let r = read_image(&it.reference)?;
            grid.check(&x)?;
            grid.check(&r)?;
            Ok(MetricRow {
                id: it.id.clone(),
                method: it.method.clone(),
                psnr: psnr_roi(&x, &r, &grid),
                ssim: ssim_roi(&x, &r, &grid, 1.0),
                mae: mae(&crop_roi(&x, &grid), &crop_roi(&r, &grid)),
            })
        })
        .collect::<Result<Vec<_>>>()?;
    write_metrics_csv(&ec.output, &rows)
}

#[derive(Serialize)]
struct TuneSummary {
    initial_mse: f64,
    final_mse: f64,
    evaluations: usize,
}

pub fn tune(cfg: &RunConfig, tc: &TuneConfig, seed: u64) -> Result<()> {
    let problem = pipeline::build_problem(cfg, read_sinogram(&tc.sinogram)?)?;
    let reference = read_image(&tc.reference)?;
    let arch = cfg.solver.architecture;
    let init = match &cfg.solver.params {
        Some(p) => load_unrolled(p)?,
        None => {
            let mask = MaskParams::new(problem.grid(), cfg.solver.xi)?;
            let steps = pipeline::step_sizes(&problem, &mask, &cfg.solver)?;
            pipeline::constant_unrolled_params(&problem, &cfg.solver, &steps, arch)?
        }
    };
    let out = tune_params(&problem, arch, &init, &reference, tc.budget, seed)?;
    let json = serde_json::to_string_pretty(&out.params).map_err(|e| Error::Format(e.to_string()))?;
    fs::write(&tc.output, json + "\n")?;
    let summary = TuneSummary { initial_mse: out.initial_mse, final_mse: out.final_mse, evaluations: out.evaluations };
    eprintln!("{}", serde_json::to_string(&summary).map_err(|e| Error::Format(e.to_string()))?);
    Ok(())
}

fn write_config(path: &Path, cfg: &RunConfig) -> Result<()> {
    let text = toml::to_string(cfg).map_err(|e| Error::Format(e.to_string()))?;
    fs::write(path, text)?;
    Ok(())
}

fn files_differ(a: &Path, b: &Path) -> bool {
    match (fs::read(a), fs::read(b)) {
        (Ok(x), Ok(y)) => x != y,
        _ => true,
    }
}

fn dir_files(dir: &Path) -> Result<Vec<String>> {
    let mut names: Vec<String> =
        fs::read_dir(dir)?.map(|e| e.map(|e| e.file_name().to_string_lossy().into_owned())).collect::<std::io::Result<_>>()?;
    names.sort();
    Ok(names)
}

/// Runs every command twice with one thread (simulation also with four)
/// inside `dir` and returns the number of output files that differ.
pub fn determinism_check(dir: &Path, seed: u64) -> Result<usize> {
    let geometry = GeometryConfig {
        width: 32,
        pixel_size: 1.0,
        grid_diameter: 24.0,
        roi_diameter: 16.0,
        n_bins: 20,
        bin_size: 1.0,
        n_angles: 16,
        subrays: 2,
    };
    let base = RunConfig { seed: Some(seed), geometry, ..RunConfig::default() };
    let call = |cfg: &RunConfig, name: &str, cmd: &str, threads: usize| -> Result<()> {
        let path = dir.join(name);
        write_config(&path, cfg)?;
        let code = run(["roict", "--config", path.to_str().unwrap_or_default(), "--threads", &threads.to_string(), cmd]);
        if code != EXIT_OK {
            return Err(Error::Config(format!("{cmd} with {name} exited with {code}")));
        }
        Ok(())
    };
    let mut differ = 0;

    let sims = ["sim_a", "sim_b", "sim_c"];
    for (k, out) in sims.iter().enumerate() {
        let cfg = RunConfig {
            simulate: Some(SimulateConfig { out_dir: dir.join(out), count: 2, phantom: PhantomKind::Random }),
            ..base.clone()
        };
        call(&cfg, &format!("{out}.toml"), "simulate", if k == 2 { 4 } else { 1 })?;
    }
    let names = dir_files(&dir.join(sims[0]))?;
    for other in &sims[1..] {
        if dir_files(&dir.join(other))? != names {
            differ += 1;
        }
        for n in &names {
            differ += usize::from(files_differ(&dir.join(sims[0]).join(n), &dir.join(other).join(n)));
        }
    }

    let sino = dir.join(sims[0]).join("sinogram_0000.bin");
    let phantom = dir.join(sims[0]).join("phantom_0000.bin");
    let mut recon = Vec::new();
    for method in [Method::Fbp, Method::TvHier, Method::Rdbfb, Method::Unrolled] {
        let mut solver = base.solver.clone();
        solver.outer = 2;
        solver.inner = 20;
        solver.tv_outer = 3;
        solver.tv_inner = 10;
        let mut outs = Vec::new();
        for run_id in ["a", "b"] {
            let stem = format!("{method:?}_{run_id}").to_lowercase();
            let rc = ReconstructConfig {
                method,
                sinogram: sino.clone(),
                output: dir.join(format!("{stem}.bin")),
                trace: Some(dir.join(format!("{stem}.csv"))),
                png: Some(dir.join(format!("{stem}.png"))),
                metadata: Some(dir.join(format!("{stem}.json"))),
                reference: Some(phantom.clone()),
            };
            let cfg = RunConfig { reconstruct: Some(rc), solver: solver.clone(), ..base.clone() };
            call(&cfg, &format!("{stem}.toml"), "reconstruct", 1)?;
            outs.push(stem);
        }
        for ext in ["bin", "csv", "png", "json"] {
            differ += usize::from(files_differ(
                &dir.join(format!("{}.{ext}", outs[0])),
                &dir.join(format!("{}.{ext}", outs[1])),
            ));
        }
        recon.push((format!("{method:?}").to_lowercase(), dir.join(format!("{}.bin", outs[0]))));
    }

    for run_id in ["a", "b"] {
        let items = recon
            .iter()
            .map(|(m, p)| EvaluateItem { id: "0".into(), method: m.clone(), reconstruction: p.clone(), reference: phantom.clone() })
            .collect();
        let cfg = RunConfig {
            evaluate: Some(EvaluateConfig { output: dir.join(format!("metrics_{run_id}.csv")), items }),
            ..base.clone()
        };
        call(&cfg, &format!("evaluate_{run_id}.toml"), "evaluate", 1)?;
        let mut solver = base.solver.clone();
        solver.groups = vec![2, 2];
        let cfg = RunConfig {
            tune: Some(TuneConfig {
                sinogram: sino.clone(),
                reference: phantom.clone(),
                output: dir.join(format!("tuned_{run_id}.json")),
                budget: 12,
            }),
            solver,
            ..base.clone()
        };
        call(&cfg, &format!("tune_{run_id}.toml"), "tune", 1)?;
    }
    differ += usize::from(files_differ(&dir.join("metrics_a.csv"), &dir.join("metrics_b.csv")));
    differ += usize::from(files_differ(&dir.join("tuned_a.json"), &dir.join("tuned_b.json")));
    Ok(differ)
}
