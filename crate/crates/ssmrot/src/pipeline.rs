//! Config-driven pipeline: build or load a model, solve the centrifugal
//! equilibrium, shift, eigenanalyze, expand the SSM, run the requested
//! analysis, and write spectrum.csv / ssm.json / backbone.csv / frc.csv /
//! SVG plots / report.json into the output directory. Deterministic given
//! the config and seed (report.json timings excepted).

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};
use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::export;
use crate::model::beam::{build_rotating_beam, BeamSpec};
use crate::model::duffing::{build_duffing, DuffingSpec};
use crate::model::hub::{build_bladed_hub, HubSpec};
use crate::model::io::{export_tensor_model, load_tensor_model};
use crate::model::shaft::{build_rotating_shaft, ShaftSpec};
use crate::model::{
    apply_damping, shift_to_equilibrium, solve_static_equilibrium, DampingSpec,
    EquilibriumOptions, SecondOrderModel, ShiftedModel, TangentMethod,
};
use crate::reduced::backbone::{backbone, backbone_coefficients};
use crate::reduced::continuation::{continue_frc, Frc, FrcOptions};
use crate::spectral::{
    select_master, solve_spectrum, to_first_order, FirstOrderSystem, MasterSelection, Spectrum,
};
use crate::ssm::{
    compute_autonomous_ssm, compute_nonautonomous, serialize as ssm_serialize, SSMModel,
    SsmOptions,
};
use crate::validate::{compare_frc, CompareOptions, FrcComparison, IntegratorOptions};

#[derive(Debug, Clone, Serialize, Deserialize, Default)]
#[serde(deny_unknown_fields)]
pub struct PipelineConfig {
    #[serde(default)]
    pub seed: u64,
    #[serde(default)]
    pub out_dir: Option<String>,
    pub model: ModelConfig,
    #[serde(default)]
    pub damping: DampingConfig,
    #[serde(default)]
    pub master: MasterConfig,
    #[serde(default)]
    pub ssm: SsmConfig,
    #[serde(default)]
    pub analysis: AnalysisConfig,
    #[serde(default)]
    pub tolerances: ToleranceConfig,
    #[serde(default)]
    pub scan: Option<ScanConfig>,
}

#[derive(Debug, Clone, Serialize, Deserialize, Default)]
#[serde(deny_unknown_fields)]
pub struct ModelConfig {
    #[serde(default)]
    pub builder: Option<String>,
    #[serde(default)]
    pub manifest: Option<String>,
    #[serde(default)]
    pub beam: Option<BeamSpec>,
    #[serde(default)]
    pub shaft: Option<ShaftSpec>,
    #[serde(default)]
    pub hub: Option<HubSpec>,
    #[serde(default)]
    pub duffing: Option<DuffingSpec>,
}

#[derive(Debug, Clone, Serialize, Deserialize, Default)]
#[serde(deny_unknown_fields)]
pub struct DampingConfig {
    #[serde(default)]
    pub xi1: Option<f64>,
    #[serde(default)]
    pub alpha: Option<f64>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MasterConfig {
    /// "auto" or "pairs".
    #[serde(default = "default_master_mode")]
    pub mode: String,
    #[serde(default)]
    pub pairs: Vec<usize>,
    #[serde(default = "default_max_pairs")]
    pub max_pairs: usize,
    #[serde(default = "default_res_tol")]
    pub res_tol: f64,
    /// Eigenvalues requested from the dense solve.
    #[serde(default = "default_n_eigen")]
    pub n_eigen: usize,
}

fn default_master_mode() -> String {
    "auto".into()
}
fn default_max_pairs() -> usize {
    3
}
fn default_res_tol() -> f64 {
    0.02
}
fn default_n_eigen() -> usize {
    12
}

impl Default for MasterConfig {
    fn default() -> Self {
        Self {
            mode: default_master_mode(),
            pairs: Vec::new(),
            max_pairs: default_max_pairs(),
            res_tol: default_res_tol(),
            n_eigen: default_n_eigen(),
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SsmConfig {
    /// Fixed order, or "auto" for the O vs O+2 convergence rule.
    #[serde(default = "default_order")]
    pub order: toml::Value,
    #[serde(default = "default_auto_threshold")]
    pub auto_threshold: f64,
    #[serde(default = "default_auto_max_order")]
    pub auto_max_order: u32,
}

fn default_order() -> toml::Value {
    toml::Value::Integer(5)
}
fn default_auto_threshold() -> f64 {
    0.01
}
fn default_auto_max_order() -> u32 {
    9
}

impl Default for SsmConfig {
    fn default() -> Self {
        Self {
            order: default_order(),
            auto_threshold: default_auto_threshold(),
            auto_max_order: default_auto_max_order(),
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AnalysisConfig {
    /// modes | backbone | frc | validate
    #[serde(default = "default_kind")]
    pub kind: String,
    #[serde(default)]
    pub omega_range: Option<[f64; 2]>,
    #[serde(default = "default_eps")]
    pub eps: f64,
    #[serde(default = "default_rho_max")]
    pub rho_max: f64,
    #[serde(default = "default_n_rho")]
    pub n_rho: usize,
    #[serde(default = "default_probes")]
    pub probes: usize,
    #[serde(default)]
    pub frc_h_max: Option<f64>,
    #[serde(default)]
    pub steps_per_period: Option<usize>,
    #[serde(default)]
    pub settle_periods: Option<usize>,
}

fn default_kind() -> String {
    "modes".into()
}
fn default_eps() -> f64 {
    1.0
}
fn default_rho_max() -> f64 {
    1.0
}
fn default_n_rho() -> usize {
    40
}
fn default_probes() -> usize {
    5
}

impl Default for AnalysisConfig {
    fn default() -> Self {
        Self {
            kind: default_kind(),
            omega_range: None,
            eps: default_eps(),
            rho_max: default_rho_max(),
            n_rho: default_n_rho(),
            probes: default_probes(),
            frc_h_max: None,
            steps_per_period: None,
            settle_periods: None,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ToleranceConfig {
    #[serde(default = "d_inner_tol")]
    pub inner_tol: f64,
    #[serde(default = "d_inner_floor")]
    pub inner_tol_floor: f64,
    #[serde(default = "d_ext_tol")]
    pub ext_tol: f64,
    #[serde(default = "d_newton_abs")]
    pub newton_tol_abs: f64,
    #[serde(default = "d_newton_rel")]
    pub newton_tol_rel: f64,
    #[serde(default = "d_n_ramp")]
    pub n_ramp: usize,
}

fn d_inner_tol() -> f64 {
    0.05
}
fn d_inner_floor() -> f64 {
    1e-3
}
fn d_ext_tol() -> f64 {
    0.1
}
fn d_newton_abs() -> f64 {
    1e-10
}
fn d_newton_rel() -> f64 {
    1e-10
}
fn d_n_ramp() -> usize {
    5
}

impl Default for ToleranceConfig {
    fn default() -> Self {
        Self {
            inner_tol: d_inner_tol(),
            inner_tol_floor: d_inner_floor(),
            ext_tol: d_ext_tol(),
            newton_tol_abs: d_newton_abs(),
            newton_tol_rel: d_newton_rel(),
            n_ramp: d_n_ramp(),
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScanConfig {
    /// Spin speeds [rad/s]; each runs the full pipeline into its own
    /// subdirectory.
    pub spin_speeds: Vec<f64>,
}

impl PipelineConfig {
    pub fn from_toml(text: &str) -> Result<Self> {
        let cfg: PipelineConfig =
            toml::from_str(text).map_err(|e| Error::Config(format!("bad config: {e}")))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        let sources = [
            self.model.builder.is_some(),
            self.model.manifest.is_some(),
        ];
        if sources.iter().filter(|&&b| b).count() != 1 {
            return Err(Error::Config(
                "exactly one model source required: set model.builder or model.manifest".into(),
            ));
        }
        if self.damping.xi1.is_some() && self.damping.alpha.is_some() {
            return Err(Error::Config("set damping.xi1 or damping.alpha, not both".into()));
        }
        match self.analysis.kind.as_str() {
            "modes" | "backbone" | "reduce" => {}
            "frc" | "validate" => {
                if self.analysis.omega_range.is_none() {
                    return Err(Error::Config(format!(
                        "analysis.kind = {} requires analysis.omega_range",
                        self.analysis.kind
                    )));
                }
            }
            other => {
                return Err(Error::Config(format!(
                    "unknown analysis kind `{other}` (modes | reduce | backbone | frc | validate)"
                )))
            }
        }
        Ok(())
    }

    pub fn order_spec(&self) -> Result<OrderSpec> {
        match &self.ssm.order {
            toml::Value::Integer(n) if *n >= 2 => Ok(OrderSpec::Fixed(*n as u32)),
            toml::Value::String(s) if s == "auto" => Ok(OrderSpec::Auto),
            other => Err(Error::Config(format!(
                "ssm.order must be an integer ≥ 2 or \"auto\", got {other}"
            ))),
        }
    }

    pub fn ssm_options(&self) -> SsmOptions {
        SsmOptions {
            inner_tol: self.tolerances.inner_tol,
            inner_tol_floor: self.tolerances.inner_tol_floor,
            ext_tol: self.tolerances.ext_tol,
        }
    }

    pub fn damping_spec(&self) -> DampingSpec {
        if let Some(a) = self.damping.alpha {
            DampingSpec::Alpha(a)
        } else if let Some(x) = self.damping.xi1 {
            DampingSpec::Xi1(x)
        } else {
            DampingSpec::None
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum OrderSpec {
    Fixed(u32),
    Auto,
}

/// FNV-1a content hash over the model's defining data.
pub fn model_hash(model: &SecondOrderModel) -> String {
    let mut h: u64 = 0xcbf29ce484222325;
    let mut eat = |bytes: &[u8]| {
        for &b in bytes {
            h ^= b as u64;
            h = h.wrapping_mul(0x100000001b3);
        }
    };
    eat(&(model.n as u64).to_le_bytes());
    eat(&model.spin_speed.to_le_bytes());
    for m in [
        &model.mass,
        &model.damping,
        &model.coriolis,
        &model.spin_softening,
    ] {
        for v in m.iter() {
            eat(&v.to_le_bytes());
        }
    }
    for v in model
        .load_pattern
        .iter()
        .chain(model.centrifugal_load.iter())
        .chain(model.static_preload.iter())
    {
        eat(&v.to_le_bytes());
    }
    format!("{h:016x}")
}

pub fn build_model(cfg: &PipelineConfig) -> Result<SecondOrderModel> {
    if let Some(manifest) = &cfg.model.manifest {
        return load_tensor_model(Path::new(manifest));
    }
    match cfg.model.builder.as_deref() {
        Some("beam") => build_rotating_beam(&cfg.model.beam.clone().unwrap_or_default()),
        Some("shaft") => build_rotating_shaft(&cfg.model.shaft.clone().unwrap_or_default()),
        Some("hub") => build_bladed_hub(&cfg.model.hub.clone().unwrap_or_default()),
        Some("duffing") => build_duffing(&cfg.model.duffing.clone().unwrap_or_default()),
        Some(other) => Err(Error::Config(format!(
            "unknown builder `{other}` (beam | shaft | hub | duffing)"
        ))),
        None => Err(Error::Config("no model source".into())),
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct StageTiming {
    pub stage: String,
    pub seconds: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct Report {
    pub config: PipelineConfig,
    pub model_hash: String,
    pub n_dofs: usize,
    pub spin_speed: f64,
    pub equilibrium_residual: f64,
    pub eigen_residual: f64,
    pub biorthogonality_defect: f64,
    pub eigenvector_cond: f64,
    pub master_eta: Vec<u32>,
    pub master_frequencies: Vec<f64>,
    pub ssm_order: u32,
    pub ssm_auto_gap: Option<f64>,
    pub ssm_probe_calls: u64,
    pub reality_defect: f64,
    pub leading_backbone_coefficient: Option<f64>,
    pub warnings: Vec<String>,
    pub comparison: Option<FrcComparison>,
    pub timings: Vec<StageTiming>,
}

pub struct PipelineOutput {
    pub report: Report,
    pub shifted: ShiftedModel,
    pub sys: FirstOrderSystem,
    pub spectrum: Spectrum,
    pub ssm: Option<SSMModel>,
    pub frc: Option<Frc>,
}

/// Run the pipeline and write artifacts into `out_dir`.
pub fn run(cfg: &PipelineConfig, out_dir: &Path) -> Result<PipelineOutput> {
    cfg.validate()?;
    fs::create_dir_all(out_dir)?;
    let mut timings = Vec::new();
    let mut warnings = Vec::new();
    let clock = |t0: Instant, name: &str, timings: &mut Vec<StageTiming>| {
        timings.push(StageTiming {
            stage: name.into(),
            seconds: t0.elapsed().as_secs_f64(),
        });
    };

    // Stage: model.
    let t0 = Instant::now();
    let model = build_model(cfg).map_err(|e| stage_err("build-model", e))?;
    let hash = model_hash(&model);
    clock(t0, "build-model", &mut timings);

    // Stage: equilibrium.
    let t0 = Instant::now();
    let eq_opts = EquilibriumOptions {
        tol_abs: cfg.tolerances.newton_tol_abs,
        tol_rel: cfg.tolerances.newton_tol_rel,
        max_iter: 50,
        n_ramp: cfg.tolerances.n_ramp,
    };
    let u0 = solve_static_equilibrium(&model, &eq_opts).map_err(|e| stage_err("equilibrium", e))?;
    let eq_res = (model.internal.eval(&u0) - &model.centrifugal_load - &model.static_preload).norm();
    clock(t0, "equilibrium", &mut timings);

    // Stage: shift + damping.
    let t0 = Instant::now();
    let mut shifted =
        shift_to_equilibrium(&model, &u0, TangentMethod::Auto).map_err(|e| stage_err("shift", e))?;
    apply_damping(&mut shifted, cfg.damping_spec()).map_err(|e| stage_err("damping", e))?;
    clock(t0, "shift", &mut timings);

    // Stage: spectrum.
    let t0 = Instant::now();
    let sys = to_first_order(&shifted).map_err(|e| stage_err("first-order", e))?;
    let k = cfg.master.n_eigen.min(sys.dim());
    let spectrum = solve_spectrum(&sys, k).map_err(|e| stage_err("spectrum", e))?;
    warnings.extend(spectrum.warnings.iter().cloned());
    let eigen_res = spectrum.max_residual(&sys);
    let biortho = spectrum.max_biorthogonality_defect(&sys);
    export::write_text(&out_dir.join("spectrum.csv"), &export::spectrum_csv(&spectrum))?;
    clock(t0, "spectrum", &mut timings);

    // Stage: master selection.
    let selection = match cfg.master.mode.as_str() {
        "auto" => MasterSelection::Auto {
            max_pairs: cfg.master.max_pairs,
            res_tol: cfg.master.res_tol,
        },
        "pairs" => MasterSelection::Pairs(cfg.master.pairs.clone()),
        other => {
            return Err(Error::Config(format!(
                "unknown master mode `{other}` (auto | pairs)"
            )))
        }
    };
    let master = select_master(&spectrum, &selection).map_err(|e| stage_err("master", e))?;

    let mut report = Report {
        config: cfg.clone(),
        model_hash: hash.clone(),
        n_dofs: model.n,
        spin_speed: model.spin_speed,
        equilibrium_residual: eq_res,
        eigen_residual: eigen_res,
        biorthogonality_defect: biortho,
        eigenvector_cond: spectrum.eigenvector_cond,
        master_eta: master.eta.clone(),
        master_frequencies: master.pairs.iter().map(|p| p.lambda.im).collect(),
        ssm_order: 0,
        ssm_auto_gap: None,
        ssm_probe_calls: 0,
        reality_defect: 0.0,
        leading_backbone_coefficient: None,
        warnings: warnings.clone(),
        comparison: None,
        timings: Vec::new(),
    };

    if cfg.analysis.kind == "modes" {
        report.timings = timings;
        write_report(&report, out_dir)?;
        return Ok(PipelineOutput {
            report,
            shifted,
            sys,
            spectrum,
            ssm: None,
            frc: None,
        });
    }

    // Stage: SSM (fixed or auto order).
    let t0 = Instant::now();
    let opts = cfg.ssm_options();
    let (ssm, auto_gap) = match cfg.order_spec()? {
        OrderSpec::Fixed(o) => (
            compute_autonomous_ssm(&sys, &master, o, &opts).map_err(|e| stage_err("ssm", e))?,
            None,
        ),
        OrderSpec::Auto => {
            if master.dim() != 2 {
                return Err(Error::Config(
                    "ssm.order = \"auto\" uses the backbone convergence rule and needs a \
                     single-mode master; set an explicit order"
                        .into(),
                ));
            }
            let mut order = 3u32;
            let mut current =
                compute_autonomous_ssm(&sys, &master, order, &opts).map_err(|e| stage_err("ssm", e))?;
            let rho_grid: Vec<f64> = (1..=8)
                .map(|i| cfg.analysis.rho_max * i as f64 / 8.0)
                .collect();
            let out_dof = model.output_dofs.first().map(|d| d.index).unwrap_or(0);
            loop {
                let next_order = order + 2;
                if next_order > cfg.ssm.auto_max_order {
                    warnings.push(format!(
                        "auto order stopped at the cap {}; last gap below threshold not reached",
                        cfg.ssm.auto_max_order
                    ));
                    break (current, None);
                }
                let next = compute_autonomous_ssm(&sys, &master, next_order, &opts)
                    .map_err(|e| stage_err("ssm", e))?;
                let bb_a = backbone(&current, &rho_grid, out_dof)?;
                let bb_b = backbone(&next, &rho_grid, out_dof)?;
                let gap = bb_a
                    .points
                    .iter()
                    .zip(bb_b.points.iter())
                    .map(|(a, b)| {
                        (a.omega_hat - b.omega_hat).abs() / b.omega_hat.abs().max(1e-300)
                    })
                    .fold(0.0_f64, f64::max);
                if gap <= cfg.ssm.auto_threshold {
                    break (next, Some(gap));
                }
                order = next_order;
                current = next;
            }
        }
    };
    report.ssm_order = ssm.order;
    report.ssm_auto_gap = auto_gap;
    report.ssm_probe_calls = ssm.probe_calls;
    report.reality_defect = ssm.w.reality_defect(false).max(ssm.r.reality_defect(true));
    if master.dim() == 2 {
        report.leading_backbone_coefficient = backbone_coefficients(&ssm).ok().map(|g| g[0]);
    }
    clock(t0, "ssm", &mut timings);

    let out_dof_idx = model.output_dofs.first().map(|d| d.index).unwrap_or(0);
    let out_dof_name = model
        .output_dofs
        .first()
        .map(|d| d.name.clone())
        .unwrap_or_else(|| "dof0".into());

    let mut frc_result = None;
    let mut ssm_final = ssm;

    match cfg.analysis.kind.as_str() {
        "backbone" => {
            let t0 = Instant::now();
            let rho_grid: Vec<f64> = (1..=cfg.analysis.n_rho)
                .map(|i| cfg.analysis.rho_max * i as f64 / cfg.analysis.n_rho as f64)
                .collect();
            let curve = backbone(&ssm_final, &rho_grid, out_dof_idx)
                .map_err(|e| stage_err("backbone", e))?;
            export::write_text(
                &out_dir.join("backbone.csv"),
                &export::backbone_csv(&curve, &out_dof_name),
            )?;
            let plot = export::SvgPlot {
                title: "backbone".into(),
                x_label: "response frequency [rad/s]".into(),
                y_label: format!("amplitude {out_dof_name} [m]"),
                ..Default::default()
            };
            export::write_text(&out_dir.join("backbone.svg"), &export::backbone_svg(&curve, &plot))?;
            clock(t0, "backbone", &mut timings);
        }
        "frc" | "validate" => {
            let t0 = Instant::now();
            let range = cfg.analysis.omega_range.unwrap();
            // Attach the non-autonomous part at the low end for the record /
            // serialization; continuation recomputes it per step.
            compute_nonautonomous(&mut ssm_final, &sys, range[0], cfg.analysis.eps)
                .map_err(|e| stage_err("nonautonomous", e))?;
            let mut frc_opts = FrcOptions::default();
            if let Some(h) = cfg.analysis.frc_h_max {
                frc_opts.h_max = h;
            }
            let frc = continue_frc(
                &sys,
                &ssm_final,
                cfg.analysis.eps,
                (range[0], range[1]),
                &model.output_dofs,
                &frc_opts,
            )
            .map_err(|e| stage_err("frc", e))?;
            warnings.extend(frc.warnings.iter().cloned());
            export::write_text(&out_dir.join("frc.csv"), &export::frc_csv(&frc))?;
            let plot = export::SvgPlot {
                title: format!("FRC (ε = {})", cfg.analysis.eps),
                x_label: "forcing frequency [rad/s]".into(),
                y_label: format!("amplitude {out_dof_name} [m]"),
                ..Default::default()
            };
            export::write_text(&out_dir.join("frc.svg"), &export::frc_svg(&frc, 0, &plot))?;
            clock(t0, "frc", &mut timings);

            if cfg.analysis.kind == "validate" {
                let t0 = Instant::now();
                let n_probes = cfg.analysis.probes.max(1);
                let probes: Vec<f64> = (0..n_probes)
                    .map(|i| {
                        range[0] + (range[1] - range[0]) * (i as f64 + 0.5) / n_probes as f64
                    })
                    .collect();
                let mut copts = CompareOptions::default();
                if let Some(s) = cfg.analysis.steps_per_period {
                    copts.integrator = IntegratorOptions {
                        steps_per_period: s,
                        ..IntegratorOptions::default()
                    };
                }
                if let Some(s) = cfg.analysis.settle_periods {
                    copts.settle_periods = s;
                }
                let cmp = compare_frc(
                    &frc,
                    &shifted,
                    &sys,
                    &ssm_final,
                    &probes,
                    cfg.analysis.eps,
                    &copts,
                )
                .map_err(|e| stage_err("validate", e))?;
                report.comparison = Some(cmp);
                clock(t0, "validate", &mut timings);
            }
            frc_result = Some(frc);
        }
        _ => {}
    }

    // ssm.json for every analysis that computed an expansion.
    let json = ssm_serialize::to_json(&ssm_final, &hash)?;
    export::write_text(&out_dir.join("ssm.json"), &json)?;

    report.warnings = warnings;
    report.timings = timings;
    write_report(&report, out_dir)?;
    Ok(PipelineOutput {
        report,
        shifted,
        sys,
        spectrum,
        ssm: Some(ssm_final),
        frc: frc_result,
    })
}

fn stage_err(stage: &str, e: Error) -> Error {
    Error::Config(format!("stage {stage} failed: {e}"))
}

fn write_report(report: &Report, out_dir: &Path) -> Result<()> {
    let text = serde_json::to_string_pretty(report)?;
    export::write_text(&out_dir.join("report.json"), &format!("{text}\n"))?;
    Ok(())
}

/// Fan a speed scan out over worker threads (SSMROT_WORKERS, default 1 for
/// determinism of scheduling; results are written per-speed regardless).
pub fn run_scan(cfg: &PipelineConfig, out_dir: &Path) -> Result<Vec<(f64, PathBuf)>> {
    let scan = cfg
        .scan
        .clone()
        .ok_or_else(|| Error::Config("run_scan requires [scan] spin_speeds".into()))?;
    let workers: usize = std::env::var("SSMROT_WORKERS")
        .ok()
        .and_then(|v| v.parse().ok())
        .unwrap_or(1)
        .max(1);
    let jobs: Vec<(usize, f64)> = scan.spin_speeds.iter().copied().enumerate().collect();
    let results: std::sync::Mutex<Vec<(f64, PathBuf)>> = std::sync::Mutex::new(Vec::new());
    let errors: std::sync::Mutex<Vec<String>> = std::sync::Mutex::new(Vec::new());
    let next: std::sync::atomic::AtomicUsize = std::sync::atomic::AtomicUsize::new(0);

    std::thread::scope(|scope| {
        for _ in 0..workers.min(jobs.len().max(1)) {
            scope.spawn(|| loop {
                let i = next.fetch_add(1, std::sync::atomic::Ordering::SeqCst);
                if i >= jobs.len() {
                    break;
                }
                let (_, speed) = jobs[i];
                let mut sub = cfg.clone();
                sub.scan = None;
                set_spin_speed(&mut sub, speed);
                let sub_dir = out_dir.join(format!("speed_{speed:.6}"));
                match run(&sub, &sub_dir) {
                    Ok(_) => results.lock().unwrap().push((speed, sub_dir)),
                    Err(e) => errors.lock().unwrap().push(format!("speed {speed}: {e}")),
                }
            });
        }
    });

    let errs = errors.into_inner().unwrap();
    if !errs.is_empty() {
        return Err(Error::Config(format!("scan failures: {}", errs.join("; "))));
    }
    let mut out = results.into_inner().unwrap();
    out.sort_by(|a, b| a.0.partial_cmp(&b.0).unwrap());

    // Summary CSV: speed, first master frequency, leading backbone
    // coefficient when present.
    let mut summary = String::from("spin_speed,omega1,leading_backbone_coefficient\n");
    for (speed, dir) in &out {
        let text = fs::read_to_string(dir.join("report.json"))?;
        let json: serde_json::Value = serde_json::from_str(&text)?;
        let w1 = json["master_frequencies"][0].as_f64().unwrap_or(f64::NAN);
        let g1 = json["leading_backbone_coefficient"].as_f64();
        let _ = writeln!(
            summary,
            "{},{},{}",
            speed,
            w1,
            g1.map(|v| format!("{v:.12e}")).unwrap_or_default()
        );
    }
    export::write_text(&out_dir.join("scan_summary.csv"), &summary)?;
    Ok(out)
}

fn set_spin_speed(cfg: &mut PipelineConfig, speed: f64) {
    if let Some(beam) = &mut cfg.model.beam {
        beam.spin_speed = speed;
    } else if cfg.model.builder.as_deref() == Some("beam") {
        cfg.model.beam = Some(BeamSpec {
            spin_speed: speed,
            ..BeamSpec::default()
        });
    }
    if let Some(shaft) = &mut cfg.model.shaft {
        shaft.spin_speed = speed;
    } else if cfg.model.builder.as_deref() == Some("shaft") {
        cfg.model.shaft = Some(ShaftSpec {
            spin_speed: speed,
            ..ShaftSpec::default()
        });
    }
    if let Some(hub) = &mut cfg.model.hub {
        hub.blade.spin_speed = speed;
    }
}

/// `export-tensors` entry: dump any built model into the tensor-file
/// format.
pub fn run_export_tensors(cfg: &PipelineConfig, out_dir: &Path) -> Result<PathBuf> {
    let model = build_model(cfg)?;
    export_tensor_model(&model, out_dir)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn config_requires_one_source() {
        let cfg = PipelineConfig::from_toml("[model]\n");
        assert!(cfg.is_err());
        let cfg = PipelineConfig::from_toml("[model]\nbuilder = \"duffing\"\n").unwrap();
        assert_eq!(cfg.model.builder.as_deref(), Some("duffing"));
    }

    #[test]
    fn frc_requires_range() {
        let text = "[model]\nbuilder = \"duffing\"\n[analysis]\nkind = \"frc\"\n";
        assert!(PipelineConfig::from_toml(text).is_err());
    }

    #[test]
    fn duffing_backbone_pipeline_runs() {
        let dir = tempfile::tempdir().unwrap();
        let text = r#"
[model]
builder = "duffing"
[model.duffing]
mass = 1.0
damping = 0.002
stiffness = 1.0
quadratic = 0.0
cubic = 0.5
[damping]
[analysis]
kind = "backbone"
rho_max = 0.1
n_rho = 10
"#;
        let cfg = PipelineConfig::from_toml(text).unwrap();
        let out = run(&cfg, dir.path()).unwrap();
        assert!(dir.path().join("backbone.csv").exists());
        assert!(dir.path().join("ssm.json").exists());
        assert!(dir.path().join("report.json").exists());
        assert!(dir.path().join("spectrum.csv").exists());
        // Backbone starts at the linear frequency.
        let csv = std::fs::read_to_string(dir.path().join("backbone.csv")).unwrap();
        let first_row = csv.lines().nth(1).unwrap();
        let omega_hat: f64 = first_row.split(',').nth(1).unwrap().parse().unwrap();
        let w1 = out.report.master_frequencies[0];
        assert!((omega_hat - w1).abs() / w1 < 1e-4);
    }

    #[test]
    fn deterministic_outputs() {
        let text = r#"
[model]
builder = "duffing"
[analysis]
kind = "frc"
omega_range = [0.95, 1.1]
eps = 0.005
"#;
        let cfg = PipelineConfig::from_toml(text).unwrap();
        let d1 = tempfile::tempdir().unwrap();
        let d2 = tempfile::tempdir().unwrap();
        run(&cfg, d1.path()).unwrap();
        run(&cfg, d2.path()).unwrap();
        for name in ["frc.csv", "frc.svg", "ssm.json", "spectrum.csv"] {
            let a = std::fs::read(d1.path().join(name)).unwrap();
            let b = std::fs::read(d2.path().join(name)).unwrap();
            assert_eq!(a, b, "{name} not byte-identical");
        }
    }
}
