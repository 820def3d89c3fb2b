use std::fs::File;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use basketquad::bench::{self, Mode, Preset};
use basketquad::{display, oracle, problem_file};
use basketquad_core::{prepare, GridSpec, PricingConfig, PricingProblem};
use clap::{Args, Parser, Subcommand};

#[derive(Parser)]
#[command(name = "basketquad", version, about = "Quadrature pricer for spread, basket and Asian options")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Price every strike of a problem file.
    Price(PriceArgs),
    /// Show the rotated factor matrix with its norms and node counts.
    Factors(FactorArgs),
    /// Reproduce a benchmark table.
    Bench(BenchArgs),
    /// Price a preset on a sequence of grids.
    Sweep(SweepArgs),
}

#[derive(Args)]
struct GridArgs {
    /// Node-rule coefficient (default 3; Asians use 3 nodes on factors 2..5).
    #[arg(long)]
    lambda: Option<f64>,
    /// Node count override for factor j, as `j=M`. Repeatable.
    #[arg(long = "nodes", value_name = "j=M", value_parser = parse_override)]
    overrides: Vec<(usize, usize)>,
    /// Number of factors to keep.
    #[arg(long)]
    keep: Option<usize>,
    /// Report prices without the forward control variate.
    #[arg(long)]
    no_cv: bool,
}

#[derive(Args)]
struct PriceArgs {
    file: PathBuf,
    #[command(flatten)]
    grid: GridArgs,
    /// Report discounted prices (default).
    #[arg(long, conflicts_with = "forward_value")]
    present_value: bool,
    /// Report forward (undiscounted) prices.
    #[arg(long)]
    forward_value: bool,
    /// Add a Monte Carlo estimate with this many paths.
    #[arg(long)]
    mc_paths: Option<u64>,
    #[arg(long, default_value_t = 1)]
    seed: u64,
    #[arg(long, default_value_t = 7)]
    decimals: usize,
    /// Print the deltas even when there are more than eight of them.
    #[arg(long)]
    deltas: bool,
}

#[derive(Args)]
struct FactorArgs {
    file: PathBuf,
    #[command(flatten)]
    grid: GridArgs,
    /// Show at most this many factor columns.
    #[arg(long)]
    max_columns: Option<usize>,
    #[arg(long, default_value_t = 3)]
    decimals: usize,
}

#[derive(Args)]
struct BenchArgs {
    /// S1, S2, B1, B2, A1, A2, A3 or `all`.
    preset: String,
    #[arg(long, default_value = "converged")]
    mode: Mode,
    /// Also write the table as CSV.
    #[arg(long)]
    csv: Option<PathBuf>,
    #[arg(long, default_value_t = 7)]
    decimals: usize,
}

#[derive(Args)]
struct SweepArgs {
    preset: Preset,
    /// Node-rule coefficient. Repeatable.
    #[arg(long = "lambda")]
    lambdas: Vec<f64>,
    /// Explicit node counts for factors 2.., comma separated. Repeatable.
    #[arg(long = "grid", value_parser = parse_sizes)]
    grids: Vec<Vec<usize>>,
    #[arg(long)]
    no_cv: bool,
    #[arg(long, default_value_t = 7)]
    decimals: usize,
}

fn parse_override(s: &str) -> Result<(usize, usize), String> {
    let (j, m) = s.split_once('=').ok_or("expected j=M")?;
    let j = j.trim().parse().map_err(|_| format!("bad factor index `{j}`"))?;
    let m = m.trim().parse().map_err(|_| format!("bad node count `{m}`"))?;
    Ok((j, m))
}

fn parse_sizes(s: &str) -> Result<Vec<usize>, String> {
    s.split(',').map(|x| x.trim().parse().map_err(|_| format!("bad node count `{x}`"))).collect()
}

fn config_for(problem: &PricingProblem, grid: &GridArgs) -> PricingConfig {
    let mut config = match grid.lambda {
        Some(l) => PricingConfig::with_lambda(l),
        None => PricingConfig::fast(problem.kind),
    };
    config.overrides = grid.overrides.clone();
    config.keep = grid.keep;
    config.control_variate(!grid.no_cv)
}

fn load(path: &Path) -> Result<PricingProblem> {
    problem_file::load(path).with_context(|| format!("loading {}", path.display()))
}

fn cmd_price(args: &PriceArgs) -> Result<ExitCode> {
    let problem = load(&args.file)?;
    let prepared = prepare(&problem, &config_for(&problem, &args.grid))?;
    let results = prepared.price_all(&problem)?;
    let pv = !args.forward_value;
    let dp = args.decimals;
    let mc = match args.mc_paths {
        Some(paths) => Some(oracle::mc_price(&problem, paths, args.seed)?),
        None => None,
    };
    let df = if pv { problem.discount_factor() } else { 1.0 };
    let show_deltas = args.deltas || problem.forwards.len() <= 8;

    println!("{} {} value, grid {:?} (M = {})", kind_name(&problem), if pv { "present" } else { "forward" }, prepared.sizes(), prepared.grid.len());
    let mut header = format!("{:>10} {:>16} {:>16} {:>12}", "K", "call", "put", "binary");
    if mc.is_some() {
        header += &format!(" {:>16} {:>12}", "mc call", "mc stderr");
    }
    if show_deltas {
        header += "  deltas";
    }
    println!("{header}");
    let mut unreliable = false;
    for (i, r) in results.iter().enumerate() {
        let r = if pv { r.present_value() } else { r.clone() };
        let mut line = format!("{:>10} {:>16.dp$} {:>16.dp$} {:>12.dp$}", r.strike, r.call_value(), r.put_value(), r.binary);
        if let Some(mc) = &mc {
            line += &format!(" {:>16.dp$} {:>12.dp$}", mc[i].estimate * df, mc[i].stderr * df);
        }
        if show_deltas {
            let deltas: Vec<String> = r.deltas.iter().map(|d| format!("{d:.dp$}")).collect();
            line += &format!("  {}", deltas.join(" "));
        }
        if !r.is_reliable() {
            line += &format!("  ({} boundary failures)", r.boundary_failures);
            unreliable = true;
        }
        println!("{line}");
    }
    Ok(if unreliable { ExitCode::FAILURE } else { ExitCode::SUCCESS })
}

fn kind_name(p: &PricingProblem) -> &'static str {
    use basketquad_core::products::ProductKind::*;
    match p.kind {
        Spread => "spread",
        Basket => "basket",
        AsianDiscrete => "discrete Asian",
        AsianContinuous => "continuous Asian",
    }
}

fn cmd_factors(args: &FactorArgs) -> Result<ExitCode> {
    let problem = load(&args.file)?;
    let prepared = prepare(&problem, &config_for(&problem, &args.grid))?;
    print!(
        "{}",
        display::render(&prepared.full, &prepared.weights.g, &prepared.rule_sizes, args.decimals, args.max_columns)
    );
    if prepared.full.adjusted() {
        println!("first factor adjusted (epsilon = {})", problem.epsilon);
    }
    Ok(ExitCode::SUCCESS)
}

fn cmd_bench(args: &BenchArgs) -> Result<ExitCode> {
    let presets: Vec<Preset> = if args.preset.eq_ignore_ascii_case("all") {
        Preset::ALL.to_vec()
    } else {
        vec![args.preset.parse().map_err(anyhow::Error::msg)?]
    };
    let mut failed = 0;
    let mut tables = Vec::new();
    for preset in presets {
        let table = bench::run_preset(preset, args.mode)?;
        println!("{preset} ({:?})", args.mode);
        print!("{}", table.to_text(args.decimals));
        let bad = table.failures().len();
        println!("max |deviation| {:.1e}, {} of {} rows outside tolerance\n", table.max_deviation(), bad, table.rows.len());
        failed += bad;
        tables.push(table);
    }
    if let Some(path) = &args.csv {
        let file = File::create(path).with_context(|| format!("creating {}", path.display()))?;
        let mut merged = tables.remove(0);
        for t in tables {
            merged.rows.extend(t.rows);
        }
        merged.write_csv(file)?;
    }
    Ok(if failed == 0 { ExitCode::SUCCESS } else { ExitCode::FAILURE })
}

fn cmd_sweep(args: &SweepArgs) -> Result<ExitCode> {
    let mut configs: Vec<PricingConfig> = args.lambdas.iter().map(|&l| PricingConfig::new(GridSpec::Lambda(l))).collect();
    configs.extend(args.grids.iter().map(|g| PricingConfig::with_nodes(g)));
    if configs.is_empty() {
        bail!("give at least one --lambda or --grid");
    }
    let configs: Vec<PricingConfig> = configs.into_iter().map(|c| c.control_variate(!args.no_cv)).collect();
    let rows = bench::convergence_sweep(args.preset, &configs)?;
    print!("{}", bench::sweep_text(&rows, args.decimals));
    Ok(ExitCode::SUCCESS)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let outcome = match &cli.command {
        Command::Price(a) => cmd_price(a),
        Command::Factors(a) => cmd_factors(a),
        Command::Bench(a) => cmd_bench(a),
        Command::Sweep(a) => cmd_sweep(a),
    };
    match outcome {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
    }
}
