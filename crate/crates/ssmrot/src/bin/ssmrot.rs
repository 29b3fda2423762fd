//! Command-line front end: config-driven pipeline runs with flag overrides.
//!
//! Exit codes: 0 success, 1 computation failure, 2 usage/config errors
//! (clap reports parse failures with 2 on its own).

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use ssmrot::model::beam::BeamSpec;
use ssmrot::model::{check_model_invariants, shaft::ShaftSpec};
use ssmrot::pipeline::{self, PipelineConfig};

#[derive(Parser)]
#[command(name = "ssmrot", version, about = "SSM reduced-order models for rotating structures")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Print model dimensions and invariant checks.
    ModelInfo(CommonArgs),
    /// Eigenanalysis only: writes spectrum.csv.
    Modes(CommonArgs),
    /// Compute the SSM expansion: writes ssm.json.
    Reduce(CommonArgs),
    /// Backbone curve: writes backbone.csv / backbone.svg / ssm.json.
    Backbone(CommonArgs),
    /// Forced response curve: writes frc.csv / frc.svg / ssm.json.
    Frc(CommonArgs),
    /// FRC plus full-model probe integrations: comparison in report.json.
    Validate(CommonArgs),
    /// Dump the model in the tensor-file format (manifest + matrices).
    ExportTensors(CommonArgs),
}

#[derive(Args, Clone)]
struct CommonArgs {
    /// TOML config file; flags override its entries.
    #[arg(long)]
    config: Option<PathBuf>,

    /// Model builder: beam | shaft | hub | duffing.
    #[arg(long)]
    builder: Option<String>,

    /// Tensor-model manifest (alternative to --builder).
    #[arg(long)]
    manifest: Option<PathBuf>,

    /// Spin speed in rpm.
    #[arg(long)]
    rpm: Option<f64>,

    /// Spin speed in rad/s.
    #[arg(long)]
    spin: Option<f64>,

    /// Beam/hub-blade element count.
    #[arg(long)]
    n_elements: Option<usize>,

    /// Tip spring stiffness [N/m] on the beam builder.
    #[arg(long)]
    k_tip: Option<f64>,

    /// Drop the Coriolis matrix (G = 0).
    #[arg(long)]
    no_coriolis: bool,

    /// First-mode damping ratio (Rayleigh alpha = 2 xi1 omega1).
    #[arg(long)]
    xi1: Option<f64>,

    /// Explicit Rayleigh alpha override (C = alpha M).
    #[arg(long)]
    alpha: Option<f64>,

    /// SSM truncation order, or "auto".
    #[arg(long)]
    order: Option<String>,

    /// Forcing frequency window "lo:hi" [rad/s].
    #[arg(long)]
    omega_range: Option<String>,

    /// Forcing scale epsilon.
    #[arg(long)]
    eps: Option<f64>,

    /// Reduced-amplitude cap for backbone grids.
    #[arg(long)]
    rho_max: Option<f64>,

    /// Probe count for validate.
    #[arg(long)]
    probes: Option<usize>,

    /// Master mode pairs (explicit selection), e.g. --pairs 0,1.
    #[arg(long, value_delimiter = ',')]
    pairs: Option<Vec<usize>>,

    /// Spin-speed scan [rad/s], fans the run out per speed.
    #[arg(long, value_delimiter = ',')]
    scan_speeds: Option<Vec<f64>>,

    /// Seed recorded in the report (and used by randomized checks).
    #[arg(long)]
    seed: Option<u64>,

    /// Output directory.
    #[arg(long, default_value = "out")]
    out: PathBuf,
}

fn build_config(args: &CommonArgs, kind: &str) -> Result<PipelineConfig, ssmrot::Error> {
    let mut cfg = match &args.config {
        Some(path) => {
            let text = std::fs::read_to_string(path)?;
            PipelineConfig::from_toml(&text)?
        }
        None => PipelineConfig::default(),
    };
    if let Some(b) = &args.builder {
        cfg.model.builder = Some(b.clone());
        cfg.model.manifest = None;
    }
    if let Some(m) = &args.manifest {
        cfg.model.manifest = Some(m.display().to_string());
        cfg.model.builder = None;
    }
    // Builder-specific knobs apply to the spec structs, created on demand.
    if cfg.model.builder.as_deref() == Some("beam") && cfg.model.beam.is_none() {
        cfg.model.beam = Some(BeamSpec::default());
    }
    if cfg.model.builder.as_deref() == Some("shaft") && cfg.model.shaft.is_none() {
        cfg.model.shaft = Some(ShaftSpec::default());
    }
    if let Some(beam) = &mut cfg.model.beam {
        if let Some(n) = args.n_elements {
            beam.n_elements = n;
        }
        if let Some(k) = args.k_tip {
            beam.tip_spring_stiffness = k;
        }
        if args.no_coriolis {
            beam.include_coriolis = false;
        }
        if let Some(rpm) = args.rpm {
            beam.spin_speed = rpm * std::f64::consts::PI / 30.0;
        }
        if let Some(w) = args.spin {
            beam.spin_speed = w;
        }
    }
    if let Some(shaft) = &mut cfg.model.shaft {
        if args.no_coriolis {
            shaft.include_coriolis = false;
        }
        if let Some(rpm) = args.rpm {
            shaft.spin_speed = rpm * std::f64::consts::PI / 30.0;
        }
        if let Some(w) = args.spin {
            shaft.spin_speed = w;
        }
    }
    if let Some(hub) = &mut cfg.model.hub {
        if args.no_coriolis {
            hub.blade.include_coriolis = false;
        }
        if let Some(rpm) = args.rpm {
            hub.blade.spin_speed = rpm * std::f64::consts::PI / 30.0;
        }
        if let Some(w) = args.spin {
            hub.blade.spin_speed = w;
        }
    }
    if let Some(x) = args.xi1 {
        cfg.damping.xi1 = Some(x);
        cfg.damping.alpha = None;
    }
    if let Some(a) = args.alpha {
        cfg.damping.alpha = Some(a);
        cfg.damping.xi1 = None;
    }
    if let Some(o) = &args.order {
        cfg.ssm.order = if o == "auto" {
            toml::Value::String("auto".into())
        } else {
            toml::Value::Integer(o.parse::<i64>().map_err(|_| {
                ssmrot::Error::Config(format!("--order must be an integer or \"auto\", got `{o}`"))
            })?)
        };
    }
    if let Some(r) = &args.omega_range {
        let parts: Vec<&str> = r.split(':').collect();
        if parts.len() != 2 {
            return Err(ssmrot::Error::Config(format!(
                "--omega-range expects `lo:hi`, got `{r}`"
            )));
        }
        let lo: f64 = parts[0]
            .parse()
            .map_err(|_| ssmrot::Error::Config(format!("bad omega-range low `{}`", parts[0])))?;
        let hi: f64 = parts[1]
            .parse()
            .map_err(|_| ssmrot::Error::Config(format!("bad omega-range high `{}`", parts[1])))?;
        cfg.analysis.omega_range = Some([lo, hi]);
    }
    if let Some(e) = args.eps {
        cfg.analysis.eps = e;
    }
    if let Some(r) = args.rho_max {
        cfg.analysis.rho_max = r;
    }
    if let Some(p) = args.probes {
        cfg.analysis.probes = p;
    }
    if let Some(pairs) = &args.pairs {
        cfg.master.mode = "pairs".into();
        cfg.master.pairs = pairs.clone();
    }
    if let Some(s) = args.seed {
        cfg.seed = s;
    }
    if let Some(speeds) = &args.scan_speeds {
        cfg.scan = Some(pipeline::ScanConfig {
            spin_speeds: speeds.clone(),
        });
    }
    cfg.analysis.kind = kind.into();
    cfg.validate()?;
    Ok(cfg)
}

fn run(cli: Cli) -> Result<(), (u8, String)> {
    let (args, kind) = match &cli.command {
        Command::ModelInfo(a) => (a.clone(), "modes"),
        Command::Modes(a) => (a.clone(), "modes"),
        Command::Reduce(a) => (a.clone(), "reduce"),
        Command::Backbone(a) => (a.clone(), "backbone"),
        Command::Frc(a) => (a.clone(), "frc"),
        Command::Validate(a) => (a.clone(), "validate"),
        Command::ExportTensors(a) => (a.clone(), "modes"),
    };
    let cfg = build_config(&args, kind).map_err(|e| (2u8, format!("{e}")))?;

    match &cli.command {
        Command::ModelInfo(_) => {
            let model = pipeline::build_model(&cfg).map_err(|e| (1, format!("{e}")))?;
            println!("model hash   : {}", pipeline::model_hash(&model));
            println!("dofs         : {}", model.n);
            println!("spin speed   : {} rad/s", model.spin_speed);
            println!("mass norm    : {:.6e}", model.mass.norm());
            println!("damping norm : {:.6e}", model.damping.norm());
            println!("coriolis norm: {:.6e}", model.coriolis.norm());
            println!("G skew error : {:.3e}", model.coriolis_skew_error());
            println!("f_cen norm   : {:.6e}", model.centrifugal_load.norm());
            println!("preload norm : {:.6e}", model.static_preload.norm());
            for dof in &model.output_dofs {
                println!("output dof   : {} -> {}", dof.name, dof.index);
            }
            check_model_invariants(&model, cfg.seed).map_err(|e| (1, format!("{e}")))?;
            println!("invariants   : ok");
            Ok(())
        }
        Command::ExportTensors(_) => {
            let manifest =
                pipeline::run_export_tensors(&cfg, &args.out).map_err(|e| (1, format!("{e}")))?;
            println!("wrote {}", manifest.display());
            Ok(())
        }
        _ => {
            if cfg.scan.is_some() {
                let runs = pipeline::run_scan(&cfg, &args.out).map_err(|e| (1, format!("{e}")))?;
                println!("scan complete: {} runs under {}", runs.len(), args.out.display());
                Ok(())
            } else {
                let out = pipeline::run(&cfg, &args.out).map_err(|e| (1, format!("{e}")))?;
                for w in &out.report.warnings {
                    eprintln!("warning: {w}");
                }
                println!(
                    "done: n = {}, order = {}, artifacts in {}",
                    out.report.n_dofs,
                    out.report.ssm_order,
                    args.out.display()
                );
                Ok(())
            }
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err((code, msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(code)
        }
    }
}
