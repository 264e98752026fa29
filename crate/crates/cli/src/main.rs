use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};
use serde_json::json;

use photon_core::evaluator::{evaluate, EvalError};
use photon_core::experiments::{self, calibrated_library, ExperimentConfig, ExperimentError, ExperimentKind, Table};
use photon_core::library::{builtin_library, ProfileName};
use photon_core::mapper::{search, Objective, SearchConfig, SearchError, Strategy};
use photon_core::reuse::{analyze, simulate, AccessCounts, DEFAULT_ORACLE_CAP};
use photon_core::spec::{
    load_specs, mapping_to_json, parse_mapping, Architecture, Layer, Mapping, MappingError, PadMode, Spec, SpecDocument,
    SpecError, SweepAxis, Tensor, SPEC_VERSION,
};

/// `println!` that reports write failures (a closed pipe) instead of panicking.
macro_rules! out {
    ($($arg:tt)*) => {
        writeln!(std::io::stdout(), $($arg)*)?
    };
}

macro_rules! out_raw {
    ($($arg:tt)*) => {
        write!(std::io::stdout(), $($arg)*)?
    };
}

#[derive(Parser, Debug)]
#[command(name = "photon-model", version, about = "Analytical energy and throughput model for photonic DNN accelerators")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Parse and validate spec documents.
    Spec {
        #[arg(required = true)]
        files: Vec<PathBuf>,
        /// Print the resolved, self-contained canonical document.
        #[arg(long)]
        canonicalize: bool,
        #[command(flatten)]
        lib: LibArgs,
    },
    /// Inspect, emit or calibrate the bundled component library.
    Components(ComponentsArgs),
    /// Analytical (and optionally simulated) access counts for one mapping.
    Counts {
        arch: PathBuf,
        workload: PathBuf,
        mapping: PathBuf,
        /// Also run the loop-nest simulator and compare.
        #[arg(long)]
        oracle: bool,
        #[arg(long)]
        layer: Option<String>,
        #[arg(long, value_enum, default_value_t = Format::Table)]
        format: Format,
        #[command(flatten)]
        lib: LibArgs,
    },
    /// Search for the best mapping of each layer.
    Map(MapArgs),
    /// Evaluate a fixed mapping.
    Evaluate {
        arch: PathBuf,
        workload: PathBuf,
        mapping: PathBuf,
        #[arg(long)]
        layer: Option<String>,
        #[arg(long, value_enum, default_value_t = Format::Table)]
        format: Format,
        #[command(flatten)]
        lib: LibArgs,
    },
    /// Run one of the bundled studies.
    Experiment(ExperimentArgs),
}

#[derive(Args, Debug)]
struct LibArgs {
    /// Scaling profile of the base component library.
    #[arg(long, default_value = "conservative")]
    profile: ProfileName,
}

#[derive(Copy, Clone, Debug, PartialEq, Eq, ValueEnum)]
enum Format {
    Table,
    Json,
    Csv,
}

#[derive(Args, Debug)]
struct ComponentsArgs {
    #[arg(long, default_value = "conservative")]
    profile: ProfileName,
    /// Print the library as a spec fragment.
    #[arg(long, conflicts_with = "calibrate")]
    emit: bool,
    /// Calibrate against a reference breakdown and print the scaled fragment.
    #[arg(long, value_name = "REF")]
    calibrate: Option<PathBuf>,
    /// Architecture used for calibration; the bundled one when absent.
    #[arg(long)]
    arch: Option<PathBuf>,
    /// Workload used for calibration; the bundled VGG16 when absent.
    #[arg(long)]
    workload: Option<PathBuf>,
    #[arg(long, default_value_t = 10_000)]
    budget: u64,
    #[arg(long, default_value_t = 7)]
    seed: u64,
    /// Write to this file instead of stdout.
    #[arg(long, short)]
    output: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct MapArgs {
    arch: PathBuf,
    workload: PathBuf,
    #[arg(long, default_value = "energy")]
    objective: Objective,
    #[arg(long, default_value_t = 10_000)]
    budget: u64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value = "pruned_random")]
    strategy: Strategy,
    /// Allow padded (non-dividing) factorizations.
    #[arg(long)]
    pad: bool,
    /// Leave the outermost memory out of the energy objective.
    #[arg(long)]
    no_dram: bool,
    /// Map only this layer (name or zero-based index).
    #[arg(long)]
    layer: Option<String>,
    /// Write the best mapping; requires a single layer.
    #[arg(long, value_name = "PATH")]
    emit_mapping: Option<PathBuf>,
    #[arg(long, value_enum, default_value_t = Format::Table)]
    format: Format,
    #[command(flatten)]
    lib: LibArgs,
}

#[derive(Args, Debug)]
struct ExperimentArgs {
    kind: ExperimentKind,
    /// JSON experiment configuration; flags override its fields.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    arch: Option<PathBuf>,
    #[arg(long = "workload")]
    workloads: Vec<PathBuf>,
    #[arg(long = "profile")]
    profiles: Vec<ProfileName>,
    #[arg(long, value_delimiter = ',')]
    batch_sizes: Option<Vec<u64>>,
    #[arg(long)]
    no_fusion: bool,
    #[arg(long = "sweep-axis")]
    sweep_axes: Vec<SweepAxis>,
    #[arg(long, value_delimiter = ',')]
    sweep_values: Option<Vec<u64>>,
    #[arg(long)]
    reference: Option<PathBuf>,
    #[arg(long)]
    auto_size_buffer: bool,
    #[arg(long)]
    budget: Option<u64>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    output_dir: Option<PathBuf>,
    #[arg(long, value_enum, default_value_t = Format::Table)]
    format: Format,
}

fn main() -> ExitCode {
    let _ = env_logger::builder().try_init();
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) if is_broken_pipe(&e) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(exit_code(&e))
        }
    }
}

fn is_broken_pipe(err: &anyhow::Error) -> bool {
    err.downcast_ref::<std::io::Error>().is_some_and(|e| e.kind() == std::io::ErrorKind::BrokenPipe)
}

/// 2 for bad specs or mappings, 3 when no feasible mapping exists.
fn exit_code(err: &anyhow::Error) -> u8 {
    for cause in err.chain() {
        if let Some(e) = cause.downcast_ref::<ExperimentError>() {
            if e.is_infeasible() {
                return 3;
            }
            if matches!(e, ExperimentError::Spec(_)) {
                return 2;
            }
        }
        if let Some(e) = cause.downcast_ref::<SearchError>() {
            return if matches!(e, SearchError::NoValidMapping) { 3 } else { 1 };
        }
        if cause.is::<SpecError>() || cause.is::<MappingError>() || cause.is::<EvalError>() {
            return 2;
        }
    }
    1
}

fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Spec { files, canonicalize, lib } => cmd_spec(&files, canonicalize, lib.profile),
        Command::Components(args) => cmd_components(args),
        Command::Counts { arch, workload, mapping, oracle, layer, format, lib } => {
            cmd_counts(&arch, &workload, &mapping, oracle, layer.as_deref(), format, lib.profile)
        }
        Command::Map(args) => cmd_map(args),
        Command::Evaluate { arch, workload, mapping, layer, format, lib } => {
            cmd_evaluate(&arch, &workload, &mapping, layer.as_deref(), format, lib.profile)
        }
        Command::Experiment(args) => cmd_experiment(args),
    }
}

fn load(files: &[PathBuf], profile: ProfileName) -> Result<Spec> {
    Ok(load_specs(files, &builtin_library(profile))?)
}

fn load_mapping(path: &Path) -> Result<Mapping> {
    let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    parse_mapping(&text).with_context(|| path.display().to_string())
}

fn select_layers<'a>(layers: &'a [Layer], sel: Option<&str>) -> Result<Vec<&'a Layer>> {
    let Some(sel) = sel else { return Ok(layers.iter().collect()) };
    if let Some(l) = layers.iter().find(|l| l.name == sel) {
        return Ok(vec![l]);
    }
    match sel.parse::<usize>().ok().and_then(|i| layers.get(i)) {
        Some(l) => Ok(vec![l]),
        None => bail!("no layer `{sel}` in workload"),
    }
}

fn single_layer<'a>(layers: &'a [Layer], sel: Option<&str>) -> Result<&'a Layer> {
    let ls = select_layers(layers, sel)?;
    match ls.as_slice() {
        [l] => Ok(l),
        _ => bail!("workload has {} layers; pick one with --layer", ls.len()),
    }
}

fn print_table(t: &Table) -> Result<()> {
    let widths: Vec<usize> = (0..t.header.len())
        .map(|i| t.rows.iter().map(|r| r[i].len()).chain([t.header[i].len()]).max().unwrap_or(0))
        .collect();
    for cells in std::iter::once(&t.header).chain(&t.rows) {
        let parts: Vec<String> = cells.iter().zip(&widths).map(|(c, w)| format!("{c:<w$}")).collect();
        out!("{}", parts.join("  ").trim_end());
    }
    Ok(())
}

fn emit(t: &Table, format: Format) -> Result<()> {
    match format {
        Format::Csv => out_raw!("{}", t.to_csv()?),
        _ => print_table(t)?,
    }
    Ok(())
}

fn cmd_spec(files: &[PathBuf], canonicalize: bool, profile: ProfileName) -> Result<()> {
    let spec = load(files, profile)?;
    if canonicalize {
        out!("{}", spec.to_canonical_json());
        return Ok(());
    }
    if let Some(a) = &spec.architecture {
        out!("architecture `{}`: {} levels, clock {} Hz", a.name, a.num_levels(), a.clock_hz);
        for (i, l) in a.levels.iter().enumerate() {
            out!("  {i}: {} ({}, fanout {})", l.name, l.component, l.fanout);
        }
        for c in a.crossings() {
            out!("  crossing at edge {}: {} -> {}", c.edge, c.from, c.to);
        }
    }
    if let Some(w) = &spec.workload {
        let macs: u64 = w.layers.iter().map(Layer::macs).sum();
        out!("workload `{}`: {} layers, {macs} MACs", w.name, w.layers.len());
    }
    out!("library: {} components", spec.library.len());
    Ok(())
}

fn write_out(output: Option<&Path>, text: &str) -> Result<()> {
    match output {
        Some(p) => std::fs::write(p, text).with_context(|| format!("writing {}", p.display())),
        None => {
            out_raw!("{text}");
            Ok(())
        }
    }
}

fn cmd_components(args: ComponentsArgs) -> Result<()> {
    let fragment = |lib: &photon_core::Library| {
        let doc = SpecDocument { spec_version: SPEC_VERSION, components: lib.iter().cloned().collect(), ..Default::default() };
        serde_json::to_string_pretty(&doc).expect("fragment serializes") + "\n"
    };
    if let Some(reference) = args.calibrate {
        let mut cfg = ExperimentConfig::new(ExperimentKind::Breakdown);
        cfg.profiles = vec![args.profile];
        cfg.arch = args.arch;
        cfg.workloads = args.workload.into_iter().collect();
        cfg.reference = Some(reference);
        cfg.budget = args.budget;
        cfg.seed = args.seed;
        let cal = calibrated_library(&cfg)?;
        for (name, f) in &cal.factors {
            eprintln!("{name}: x{f:.6}");
        }
        return write_out(args.output.as_deref(), &fragment(&cal.library));
    }
    let lib = builtin_library(args.profile);
    if args.emit {
        return write_out(args.output.as_deref(), &fragment(&lib));
    }
    let mut t = Table::new("components", &["name", "class", "domains", "energy_pj", "static_mw", "area_um2"]);
    for c in lib.iter() {
        let energy: Vec<String> = c.energy_per_action.iter().map(|(a, v)| format!("{a:?}={v}")).collect();
        t.push(vec![
            c.name.clone(),
            format!("{:?}", c.class),
            format!("{}->{}", c.domain_in, c.domain_out),
            energy.join(","),
            format!("{}", c.static_power_mw),
            format!("{}", c.area_um2),
        ]);
    }
    print_table(&t)
}

fn counts_table(a: &Architecture, analytic: &AccessCounts, sim: Option<&AccessCounts>) -> Table {
    let mut header = vec!["site", "tensor", "field", "analytic"];
    if sim.is_some() {
        header.extend(["simulated", "match"]);
    }
    let mut t = Table::new("counts", &header);
    let mut row = |site: String, tensor: Tensor, field: &str, x: u64, y: Option<u64>| {
        let mut r = vec![site, tensor.to_string(), field.to_string(), x.to_string()];
        if let Some(y) = y {
            r.extend([y.to_string(), (x == y).to_string()]);
        }
        t.push(r);
    };
    for (l, level) in a.levels.iter().enumerate() {
        for tensor in Tensor::ALL {
            let c = analytic.level(l, tensor);
            let s = sim.map(|s| *s.level(l, tensor));
            for (field, x, y) in [
                ("reads", c.reads, s.map(|s| s.reads)),
                ("fills", c.fills, s.map(|s| s.fills)),
                ("updates", c.updates, s.map(|s| s.updates)),
                ("drains", c.drains, s.map(|s| s.drains)),
            ] {
                row(level.name.clone(), tensor, field, x, y);
            }
        }
    }
    for e in 0..analytic.edges.len() {
        let site = format!("{}/{}", a.levels[e].name, a.levels[e + 1].name);
        for tensor in Tensor::ALL {
            let c = analytic.edges[e][tensor];
            let s = sim.map(|s| s.edges[e][tensor]);
            row(site.clone(), tensor, "conversions", c.conversions, s.map(|s| s.conversions));
            row(site.clone(), tensor, "demand", c.demand, s.map(|s| s.demand));
        }
    }
    t
}

fn cmd_counts(
    arch: &Path,
    workload: &Path,
    mapping: &Path,
    oracle: bool,
    layer: Option<&str>,
    format: Format,
    profile: ProfileName,
) -> Result<()> {
    let spec = load(&[arch.to_path_buf(), workload.to_path_buf()], profile)?;
    let a = spec.architecture()?;
    let w = single_layer(&spec.workload()?.layers, layer)?;
    let m = load_mapping(mapping)?;
    m.validate(w, a, PadMode::Pad)?;
    let analytic = analyze(a, w, &m);
    let sim = if oracle { Some(simulate(a, w, &m, DEFAULT_ORACLE_CAP)?) } else { None };
    match format {
        Format::Json => {
            let v = json!({
                "layer": w.name,
                "analytic": analytic,
                "simulated": sim,
                "equal": sim.as_ref().map(|s| *s == analytic),
            });
            out!("{}", serde_json::to_string_pretty(&v)?);
        }
        f => {
            emit(&counts_table(a, &analytic, sim.as_ref()), f)?;
            if f == Format::Table {
                out!(
                    "macs {} (real {}), temporal steps {}",
                    analytic.macs, analytic.real_macs, analytic.temporal_steps
                );
            }
        }
    }
    if let Some(s) = &sim {
        let diff = analytic.diff(s);
        if !diff.is_empty() {
            bail!("analytic and simulated counts differ: {}", diff.join("; "));
        }
    }
    Ok(())
}

fn cmd_map(args: MapArgs) -> Result<()> {
    let spec = load(&[args.arch.clone(), args.workload.clone()], args.lib.profile)?;
    let a = spec.architecture()?;
    let layers = select_layers(&spec.workload()?.layers, args.layer.as_deref())?;
    if args.emit_mapping.is_some() && layers.len() != 1 {
        bail!("--emit-mapping needs a single layer; pick one with --layer");
    }
    let cfg = SearchConfig {
        objective: args.objective,
        budget: args.budget,
        seed: args.seed,
        strategy: args.strategy,
        pad_mode: if args.pad { PadMode::Pad } else { PadMode::Strict },
        no_dram: args.no_dram,
        ..Default::default()
    };
    let mut results = Vec::new();
    for l in &layers {
        let r = search(a, &spec.library, l, &cfg).with_context(|| format!("layer `{}`", l.name))?;
        results.push((l, r));
    }
    if let (Some(path), [(_, r)]) = (&args.emit_mapping, results.as_slice()) {
        std::fs::write(path, mapping_to_json(&r.best) + "\n").with_context(|| format!("writing {}", path.display()))?;
    }
    match args.format {
        Format::Json => {
            let v: Vec<_> = results
                .iter()
                .map(|(l, r)| json!({ "layer": l.name, "objective": r.objective, "visited": r.visited, "mapping": r.best, "result": r.result }))
                .collect();
            out!("{}", serde_json::to_string_pretty(&v)?);
        }
        f => {
            let mut t = Table::new(
                "map",
                &["layer", "objective", "energy_pj", "accelerator_energy_pj", "cycles", "utilization", "visited", "mapping"],
            );
            for (l, r) in &results {
                t.push(vec![
                    l.name.clone(),
                    format!("{:.6e}", r.objective),
                    format!("{:.6e}", r.result.total_energy),
                    format!("{:.6e}", r.result.accelerator_energy),
                    r.result.cycles.to_string(),
                    format!("{:.4}", r.result.utilization),
                    r.visited.to_string(),
                    r.result.mapping_digest.clone(),
                ]);
            }
            emit(&t, f)?;
        }
    }
    Ok(())
}

fn cmd_evaluate(
    arch: &Path,
    workload: &Path,
    mapping: &Path,
    layer: Option<&str>,
    format: Format,
    profile: ProfileName,
) -> Result<()> {
    let spec = load(&[arch.to_path_buf(), workload.to_path_buf()], profile)?;
    let a = spec.architecture()?;
    let w = single_layer(&spec.workload()?.layers, layer)?;
    let m = load_mapping(mapping)?;
    let r = evaluate(a, &spec.library, w, &m)?;
    match format {
        Format::Json => out!("{}", serde_json::to_string_pretty(&r)?),
        f => {
            let mut t = Table::new("energy", &["component", "energy_pj", "fraction"]);
            for (k, v) in &r.energy {
                t.push(vec![k.clone(), format!("{v:.6e}"), format!("{:.4}", v / r.total_energy)]);
            }
            emit(&t, f)?;
            if f == Format::Table {
                out!("total {:.6e} pJ, accelerator {:.6e} pJ", r.total_energy, r.accelerator_energy);
                out!(
                    "cycles {} ({:.6e} s), utilization {:.4}, {:.6e} MAC/s",
                    r.cycles, r.seconds, r.utilization, r.macs_per_second
                );
                out!("area {:.6e} um^2", r.area_um2);
            }
        }
    }
    Ok(())
}

fn experiment_config(args: &ExperimentArgs) -> Result<ExperimentConfig> {
    let mut cfg = ExperimentConfig::new(args.kind);
    if let Some(p) = &args.config {
        let text = std::fs::read_to_string(p).with_context(|| format!("reading {}", p.display()))?;
        let overlay: serde_json::Value = serde_json::from_str(&text).with_context(|| p.display().to_string())?;
        let serde_json::Value::Object(overlay) = overlay else { bail!("{}: expected a JSON object", p.display()) };
        let mut base = serde_json::to_value(&cfg)?;
        base.as_object_mut().expect("config is an object").extend(overlay);
        cfg = serde_json::from_value(base).with_context(|| p.display().to_string())?;
        cfg.experiment = args.kind;
    }
    if args.arch.is_some() {
        cfg.arch.clone_from(&args.arch);
    }
    if !args.workloads.is_empty() {
        cfg.workloads.clone_from(&args.workloads);
    }
    if !args.profiles.is_empty() {
        cfg.profiles.clone_from(&args.profiles);
    }
    if let Some(b) = &args.batch_sizes {
        cfg.batch_sizes.clone_from(b);
    }
    if args.no_fusion {
        cfg.fusion = false;
    }
    if !args.sweep_axes.is_empty() {
        cfg.sweep_axes.clone_from(&args.sweep_axes);
    }
    if let Some(v) = &args.sweep_values {
        cfg.sweep_values.clone_from(v);
    }
    if args.reference.is_some() {
        cfg.reference.clone_from(&args.reference);
    }
    if args.auto_size_buffer {
        cfg.auto_size_buffer = true;
    }
    if let Some(b) = args.budget {
        cfg.budget = b;
    }
    if let Some(s) = args.seed {
        cfg.seed = s;
    }
    if args.output_dir.is_some() {
        cfg.output_dir.clone_from(&args.output_dir);
    }
    Ok(cfg)
}

fn cmd_experiment(args: ExperimentArgs) -> Result<()> {
    let cfg = experiment_config(&args)?;
    let report = experiments::run(&cfg)?;
    match args.format {
        Format::Json => out_raw!("{}", report.to_json()),
        f => {
            for (i, t) in report.tables.iter().enumerate() {
                if f == Format::Table {
                    if i > 0 {
                        out!();
                    }
                    out!("# {}", t.name);
                }
                emit(t, f)?;
            }
        }
    }
    if let Some(dir) = &cfg.output_dir {
        eprintln!("wrote {}", dir.display());
    }
    Ok(())
}
