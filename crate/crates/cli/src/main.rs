use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use masr_cli::experiments::{self, RunCache, ScaleSpec, DESIGN_LANES};
use masr_cli::pareto::{pareto_points, ParetoPoint};
use masr_cli::report::{read_table_file, table_string, write_table_file, Format, Table};
use masr_cli::runner::{run_config, run_row, RunRow};
use masr_cli::sweep::{run_sweep, SweepSpec};
use masr_cli::workload::WorkloadSpec;
use masr_cli::exit_code;
use masr_core::cost::UnitCosts;
use masr_core::sim::{AcceleratorConfig, LoadBalance, Predication};
use masr_core::{Error, Result};

#[derive(Parser)]
#[command(name = "masr", version, about = "Sparse bidirectional-RNN accelerator simulator")]
struct Cli {
    #[command(subcommand)]
    cmd: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Simulate one configuration and print its report.
    Run(RunArgs),
    /// Simulate the cartesian product of a sweep spec.
    Sweep(SweepArgs),
    /// Sparse-vs-dense speedup over hidden sizes and densities.
    Scale(ScaleArgs),
    /// Metadata footprint of bitmask, CSR and run-length encodings.
    CompareEnc(EncArgs),
    /// Write the figure tables.
    Report(ReportArgs),
}

#[derive(Args, Clone)]
struct WorkloadArgs {
    /// Model file; a synthetic network is generated when absent.
    #[arg(long)]
    model: Option<PathBuf>,
    #[arg(long)]
    hidden: Option<usize>,
    #[arg(long)]
    layers: Option<usize>,
    #[arg(long)]
    weight_nz: Option<f64>,
    #[arg(long)]
    act_nz: Option<f64>,
    #[arg(long)]
    input_nz: Option<f64>,
    #[arg(long)]
    timesteps: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    unidirectional: bool,
    #[arg(long)]
    bits: Option<u32>,
}

impl WorkloadArgs {
    fn apply(&self, mut w: WorkloadSpec) -> WorkloadSpec {
        if self.model.is_some() {
            w.model = self.model.clone();
        }
        macro_rules! set {
            ($($f:ident),*) => { $(if let Some(v) = self.$f { w.$f = v; })* };
        }
        set!(hidden, layers, weight_nz, act_nz, timesteps, seed, bits);
        if self.input_nz.is_some() {
            w.input_nz = self.input_nz;
        }
        if self.unidirectional {
            w.bidirectional = false;
        }
        w
    }
}

#[derive(Args, Clone)]
struct ConfigArgs {
    /// Accelerator config file (TOML); flags override its values.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Start from the named design with this many lanes.
    #[arg(long)]
    lanes: Option<usize>,
    #[arg(long)]
    horiz_lanes: Option<usize>,
    #[arg(long)]
    vert_lanes: Option<usize>,
    #[arg(long)]
    pes: Option<usize>,
    #[arg(long)]
    queue_depth: Option<usize>,
    #[arg(long)]
    banks: Option<usize>,
    /// none, horizontal, vertical or both.
    #[arg(long, value_parser = parse_lb)]
    load_balance: Option<LoadBalance>,
    #[arg(long)]
    dup_fraction: Option<f64>,
    /// `off` or a threshold.
    #[arg(long, value_parser = parse_pred)]
    predication: Option<Predication>,
    /// Bytes per cycle.
    #[arg(long)]
    dram_bandwidth: Option<f64>,
    #[arg(long)]
    onchip_timesteps: Option<usize>,
}

fn parse_lb(s: &str) -> std::result::Result<LoadBalance, String> {
    s.parse().map_err(|e: Error| e.to_string())
}

fn parse_pred(s: &str) -> std::result::Result<Predication, String> {
    if s == "off" {
        return Ok(Predication::Off);
    }
    s.parse::<f64>()
        .map(Predication::Threshold)
        .map_err(|_| format!("expected `off` or a number, got `{s}`"))
}

impl ConfigArgs {
    fn resolve(&self) -> Result<AcceleratorConfig> {
        let mut c = match (&self.config, self.lanes) {
            (Some(p), _) => AcceleratorConfig::load(p)?,
            (None, Some(n)) => AcceleratorConfig::lanes(n)
                .ok_or_else(|| Error::Config(vec![format!("no named design with {n} lanes")]))?,
            (None, None) => AcceleratorConfig::default(),
        };
        if let (Some(_), Some(n)) = (&self.config, self.lanes) {
            let d = AcceleratorConfig::lanes(n)
                .ok_or_else(|| Error::Config(vec![format!("no named design with {n} lanes")]))?;
            (c.horiz_lanes, c.vert_lanes, c.horiz_pes) = (d.horiz_lanes, d.vert_lanes, d.horiz_pes);
        }
        if let Some(v) = self.horiz_lanes {
            c.horiz_lanes = v;
        }
        if let Some(v) = self.vert_lanes {
            c.vert_lanes = v;
        }
        if let Some(v) = self.pes {
            c.horiz_pes = v;
        }
        if let Some(v) = self.queue_depth {
            c.queue_depth = v;
        }
        if let Some(v) = self.banks {
            c.act_banks = v;
        }
        if let Some(v) = self.load_balance {
            c.load_balance = v;
        }
        if let Some(v) = self.dup_fraction {
            c.dup_fraction = v;
        }
        if let Some(v) = self.predication {
            c.predication = v;
        }
        if let Some(v) = self.dram_bandwidth {
            c.dram_bytes_per_cycle = v;
        }
        if let Some(v) = self.onchip_timesteps {
            c.onchip_act_timesteps = v;
        }
        c.validate()?;
        Ok(c)
    }
}

#[derive(Args)]
struct RunArgs {
    #[command(flatten)]
    cfg: ConfigArgs,
    #[command(flatten)]
    workload: WorkloadArgs,
    /// Unit-cost file (TOML).
    #[arg(long)]
    costs: Option<PathBuf>,
    /// json: full report; csv: one row of the runs table.
    #[arg(long, default_value = "json")]
    format: Format,
    /// Write here instead of stdout.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct SweepArgs {
    /// Sweep spec (TOML).
    #[arg(long)]
    spec: Option<PathBuf>,
    #[arg(long, value_delimiter = ',')]
    lanes: Option<Vec<usize>>,
    #[arg(long, value_delimiter = ',')]
    queue_depths: Option<Vec<usize>>,
    #[arg(long, value_delimiter = ',')]
    banks: Option<Vec<usize>>,
    #[arg(long, value_delimiter = ',', value_parser = parse_lb)]
    load_balance: Option<Vec<LoadBalance>>,
    #[arg(long, value_delimiter = ',')]
    seeds: Option<Vec<u64>>,
    #[command(flatten)]
    workload: WorkloadArgs,
    #[arg(long)]
    costs: Option<PathBuf>,
    #[arg(long, default_value = "out")]
    out_dir: PathBuf,
    #[arg(long, default_value = "csv")]
    format: Format,
}

#[derive(Args)]
struct ScaleArgs {
    #[arg(long, value_delimiter = ',')]
    hidden: Option<Vec<usize>>,
    #[arg(long, value_delimiter = ',')]
    nz: Option<Vec<f64>>,
    #[arg(long)]
    timesteps: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
    #[command(flatten)]
    cfg: ConfigArgs,
    #[arg(long)]
    out_dir: Option<PathBuf>,
    #[arg(long, default_value = "csv")]
    format: Format,
}

#[derive(Args)]
struct EncArgs {
    #[arg(long, default_value_t = 800)]
    rows: usize,
    #[arg(long, default_value_t = 800)]
    cols: usize,
    #[arg(long, default_value_t = 0.33)]
    nz: f64,
    #[arg(long, default_value_t = 10)]
    bits: u32,
    #[arg(long, default_value_t = 1)]
    seed: u64,
    #[arg(long, value_delimiter = ',', default_value = "32,64,128,256,512")]
    partitions: Vec<usize>,
    #[arg(long)]
    out_dir: Option<PathBuf>,
    #[arg(long, default_value = "csv")]
    format: Format,
}

const FIGURES: [&str; 6] = ["fig7", "fig8", "fig9", "fig10", "fig11", "encodings"];

#[derive(Args)]
struct ReportArgs {
    #[arg(long, default_value = "report")]
    out_dir: PathBuf,
    /// Any of fig7, fig8, fig9, fig10, fig11, encodings.
    #[arg(long, value_delimiter = ',', default_value = "fig7,fig8,fig9,fig10,fig11,encodings")]
    figures: Vec<String>,
    /// Rebuild the fig7 Pareto table from an existing runs table instead
    /// of simulating the named designs.
    #[arg(long)]
    runs: Option<PathBuf>,
    #[command(flatten)]
    workload: WorkloadArgs,
    #[arg(long)]
    costs: Option<PathBuf>,
    #[arg(long, default_value = "csv")]
    format: Format,
}

fn load_costs(p: &Option<PathBuf>) -> Result<UnitCosts> {
    match p {
        Some(p) => UnitCosts::load(p),
        None => Ok(UnitCosts::default()),
    }
}

fn emit(out: &Option<PathBuf>, text: &str) -> Result<()> {
    match out {
        Some(p) => std::fs::write(p, text).map_err(|e| Error::io(p, e)),
        None => std::io::stdout().write_all(text.as_bytes()).map_err(|e| Error::io("<stdout>", e)),
    }
}

fn emit_table<T: Table>(rows: &[T], format: Format, dir: &Option<PathBuf>) -> Result<()> {
    match dir {
        Some(d) => {
            let p = write_table_file(rows, format, d)?;
            eprintln!("wrote {}", p.display());
            Ok(())
        }
        None => emit(&None, &table_string(rows, format)),
    }
}

fn written(p: &Path) {
    eprintln!("wrote {}", p.display());
}

fn cmd_run(a: RunArgs) -> Result<()> {
    let cfg = a.cfg.resolve()?;
    let costs = load_costs(&a.costs)?;
    let spec = a.workload.apply(WorkloadSpec::default());
    let w = spec.load()?;
    let r = run_config(&cfg, &w, spec.seed, &costs)?;
    let text = match a.format {
        Format::Json => r.to_json(),
        Format::Csv => table_string(&[r.row()], Format::Csv),
    };
    emit(&a.out, &text)?;
    if !r.golden_match {
        return Err(Error::Integrity("simulator outputs differ from the golden model".into()));
    }
    Ok(())
}

fn cmd_sweep(a: SweepArgs) -> Result<()> {
    let mut spec = match &a.spec {
        Some(p) => SweepSpec::load(p)?,
        None => SweepSpec::default(),
    };
    if a.lanes.is_some() {
        spec.lanes = a.lanes.clone();
    }
    if let Some(v) = a.queue_depths {
        spec.queue_depths = v;
    }
    if let Some(v) = a.banks {
        spec.act_banks = v;
    }
    if let Some(v) = a.load_balance {
        spec.load_balance = v;
    }
    if let Some(v) = a.seeds {
        spec.seeds = v;
    }
    spec.workload = a.workload.apply(spec.workload);
    let costs = load_costs(&a.costs)?;
    let res = run_sweep(&spec, &costs)?;
    written(&write_table_file(&res.rows, a.format, &a.out_dir)?);
    written(&write_table_file(&res.pareto, a.format, &a.out_dir)?);
    let failed = res.rows.iter().filter(|r| !r.ok()).count();
    if failed > 0 {
        eprintln!("{failed} of {} runs failed; see the error column", res.rows.len());
    }
    Ok(())
}

fn cmd_scale(a: ScaleArgs) -> Result<()> {
    let mut spec = ScaleSpec::default();
    if let Some(v) = a.hidden {
        spec.hidden = v;
    }
    if let Some(v) = a.nz {
        spec.nz = v;
    }
    if let Some(v) = a.timesteps {
        spec.timesteps = v;
    }
    if let Some(v) = a.seed {
        spec.seed = v;
    }
    let c = &a.cfg;
    if c.config.is_some() || c.lanes.is_some() || c.horiz_lanes.is_some() || c.vert_lanes.is_some() {
        spec.config = c.resolve()?;
    }
    let rows = experiments::scale_experiment(&spec)?;
    emit_table(&rows, a.format, &a.out_dir)
}

fn cmd_compare_enc(a: EncArgs) -> Result<()> {
    let rows = experiments::encodings(a.rows, a.cols, a.nz, a.bits, a.seed, &a.partitions)?;
    emit_table(&rows, a.format, &a.out_dir)
}

fn cmd_report(a: ReportArgs) -> Result<()> {
    for f in &a.figures {
        if !FIGURES.contains(&f.as_str()) {
            return Err(Error::Parameter(format!("unknown figure `{f}`, expected one of {FIGURES:?}")));
        }
    }
    let want = |f: &str| a.figures.iter().any(|x| x == f);
    let costs = load_costs(&a.costs)?;
    let dir = Some(a.out_dir.clone());
    let needs_workload = ["fig8", "fig9", "fig11"].iter().any(|f| want(f)) || (want("fig7") && a.runs.is_none());
    let spec = a.workload.apply(WorkloadSpec::default());
    let w = if needs_workload { Some(spec.load()?) } else { None };
    let mut cache = RunCache::default();

    if want("fig7") {
        let rows: Vec<RunRow> = match &a.runs {
            Some(p) => read_table_file(p)?,
            None => {
                let w = w.as_ref().expect("workload loaded");
                DESIGN_LANES
                    .iter()
                    .map(|&n| run_row(&AcceleratorConfig::lanes(n).expect("design"), w, spec.seed, &costs))
                    .collect()
            }
        };
        let pts: Vec<ParetoPoint> = pareto_points(&rows);
        emit_table(&pts, a.format, &dir)?;
    }
    if let Some(w) = &w {
        if want("fig8") {
            emit_table(&experiments::resources(w, &mut cache, &costs)?, a.format, &dir)?;
        }
        if want("fig9") {
            emit_table(&experiments::banking(w, &mut cache)?, a.format, &dir)?;
            emit_table(&experiments::queue_depths(w, &mut cache)?, a.format, &dir)?;
            emit_table(&experiments::utilization(w, &mut cache)?, a.format, &dir)?;
        }
        if want("fig11") {
            emit_table(&experiments::baselines(w, &mut cache, &costs)?, a.format, &dir)?;
        }
    }
    if want("fig10") {
        emit_table(&experiments::scale_experiment(&ScaleSpec::default())?, a.format, &dir)?;
    }
    if want("encodings") {
        let rows = experiments::encodings(800, 800, 0.33, 10, spec.seed, &[32, 64, 128, 256, 512])?;
        emit_table(&rows, a.format, &dir)?;
    }
    Ok(())
}

/// Sizes the global thread pool from `MASR_THREADS` when set.
fn init_threads() -> Result<()> {
    let Ok(v) = std::env::var("MASR_THREADS") else {
        return Ok(());
    };
    let n: usize = v
        .parse()
        .ok()
        .filter(|&n| n > 0)
        .ok_or_else(|| Error::Parameter(format!("MASR_THREADS must be a positive integer, got `{v}`")))?;
    rayon::ThreadPoolBuilder::new()
        .num_threads(n)
        .build_global()
        .map_err(|e| Error::Parameter(e.to_string()))
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let res = init_threads().and_then(|()| match cli.cmd {
        Command::Run(a) => cmd_run(a),
        Command::Sweep(a) => cmd_sweep(a),
        Command::Scale(a) => cmd_scale(a),
        Command::CompareEnc(a) => cmd_compare_enc(a),
        Command::Report(a) => cmd_report(a),
    });
    match res {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code(&e))
        }
    }
}
