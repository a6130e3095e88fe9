use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};

use treemilo::dataset::split;
use treemilo::experiments::{
    dominance_violations, load_dataset, objective_disagreements, oracle_check, random_instance, random_height,
    ratio_table, relax_row, render_ratio_table, render_table, run_cut_comparison, run_matrix, summarize, write_rows,
    ExperimentConfig, RunManifest,
};
use treemilo::formulations::{BuildOptions, Formulation, FormulationKind};
use treemilo::milp::{Backend, HighsBackend, SolveConfig};
use treemilo::pareto::{frontier_svg, sweep, write_frontier_csv, SweepSpec};
use treemilo::separation::{write_cut_log, CutStrategy, StrategyKind};
use treemilo::training::train_formulation;
use treemilo::{SplitSpec, TreeTopology};

#[derive(Parser)]
#[command(name = "treemilo", version, about = "Optimal classification trees by mixed-integer linear optimization")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Train one tree and write it as JSON.
    Train(TrainArgs),
    /// Run a benchmark matrix: accuracy and time per formulation, plus CART.
    Bench(MatrixArgs),
    /// Compare the cut strategies of CUT1 and CUT2 against ALL.
    Cuts(MatrixArgs),
    /// Sweep the branching budget and write the Pareto frontier.
    Pareto(ParetoArgs),
    /// Compare every formulation with brute-force enumeration on random tiny instances.
    OracleCheck(OracleArgs),
    /// Compare the LP relaxation values of the five formulations.
    RelaxCheck(RelaxArgs),
}

#[derive(Args)]
struct DataArgs {
    /// Dataset name (resolved as <data-dir>/<name>.json) or a manifest path.
    #[arg(long)]
    dataset: String,
    #[arg(long, default_value = "data")]
    data_dir: PathBuf,
    #[arg(long, default_value_t = 1)]
    max_thresholds: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value_t = 0)]
    replicate: u64,
    #[arg(long, default_value_t = 0.75)]
    train_fraction: f64,
}

impl DataArgs {
    fn load(&self) -> Result<(String, treemilo::dataset::Split)> {
        let (dir, name) = if self.dataset.ends_with(".json") {
            let p = Path::new(&self.dataset);
            let stem = p.file_stem().and_then(|s| s.to_str()).context("manifest file name")?;
            (p.parent().unwrap_or(Path::new(".")).to_path_buf(), stem.to_string())
        } else {
            (self.data_dir.clone(), self.dataset.clone())
        };
        let d = load_dataset(&dir, &name, self.max_thresholds).with_context(|| format!("loading {name}"))?;
        let sp = split(&d, &SplitSpec::new(self.seed, self.train_fraction, self.replicate))?;
        Ok((name, sp))
    }
}

#[derive(Args)]
struct TrainArgs {
    #[command(flatten)]
    data: DataArgs,
    #[arg(long)]
    height: u32,
    #[arg(long, default_value = "CUT2")]
    formulation: FormulationKind,
    #[arg(long, default_value = "ALL")]
    strategy: StrategyKind,
    #[arg(long)]
    time_limit: Option<f64>,
    #[arg(long)]
    budget: Option<usize>,
    /// Where to write the tree; printed to stdout otherwise.
    #[arg(long)]
    tree_out: Option<PathBuf>,
    /// Also write the model in LP format.
    #[arg(long)]
    lp_out: Option<PathBuf>,
    #[arg(long)]
    cut_log: Option<PathBuf>,
}

#[derive(Args)]
struct MatrixArgs {
    #[arg(long)]
    config: PathBuf,
    #[arg(long, default_value = "results")]
    out: PathBuf,
    #[arg(long)]
    time_limit: Option<f64>,
    #[arg(long)]
    jobs: Option<usize>,
    #[arg(long)]
    replicates: Option<u64>,
    #[arg(long)]
    seed: Option<u64>,
}

impl MatrixArgs {
    fn config(&self) -> Result<ExperimentConfig> {
        let mut cfg = ExperimentConfig::read(&self.config)?;
        if let Some(t) = self.time_limit {
            cfg.time_limit_s = Some(t);
        }
        if let Some(j) = self.jobs {
            cfg.jobs = j;
        }
        if let Some(r) = self.replicates {
            cfg.replicates = r;
        }
        if let Some(s) = self.seed {
            cfg.seed = s;
        }
        cfg.validate()?;
        Ok(cfg)
    }
}

#[derive(Args)]
struct ParetoArgs {
    #[command(flatten)]
    data: DataArgs,
    #[arg(long)]
    height: u32,
    #[arg(long, default_value = "CUT2")]
    formulation: FormulationKind,
    /// Largest budget; defaults to every branch vertex.
    #[arg(long)]
    k_max: Option<usize>,
    #[arg(long)]
    time_limit: Option<f64>,
    #[arg(long, default_value = "results")]
    out: PathBuf,
    #[arg(long)]
    svg: bool,
}

#[derive(Args)]
struct OracleArgs {
    #[arg(long, default_value_t = 50)]
    instances: u64,
    #[arg(long, default_value_t = 0)]
    first: u64,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct RelaxArgs {
    #[arg(long, default_value_t = 50)]
    instances: u64,
    #[arg(long, default_value_t = 0)]
    first: u64,
    /// Real datasets to include, solved on the full data.
    #[arg(long, value_delimiter = ',')]
    datasets: Vec<String>,
    #[arg(long, default_value = "data")]
    data_dir: PathBuf,
    #[arg(long, default_value_t = 2)]
    height: u32,
    #[arg(long)]
    out: Option<PathBuf>,
}

fn create_dir(p: &Path) -> Result<()> {
    fs::create_dir_all(p).with_context(|| format!("creating {}", p.display()))
}

fn report_failures(label: &str, failures: &[String]) -> bool {
    for f in failures {
        eprintln!("{label}: {f}");
    }
    failures.is_empty()
}

fn train(a: &TrainArgs) -> Result<bool> {
    let (name, sp) = a.data.load()?;
    let topo = TreeTopology::new(a.height)?;
    let mut opts = BuildOptions { strategy: CutStrategy::new(a.strategy), ..BuildOptions::default() };
    opts.extra.branching_budget = a.budget;
    let mut form = Formulation::build(a.formulation, topo, &sp.train, &opts)?;
    if let Some(p) = &a.lp_out {
        fs::write(p, form.model.to_lp_format())?;
    }
    let cfg = SolveConfig { time_limit_s: a.time_limit, ..SolveConfig::default() };
    let out = train_formulation(&HighsBackend, &mut form, &cfg)?;
    let r = &out.report;
    eprintln!(
        "{name} h={} {} {}: {} objective {} bound {} gap {:.3e} in {:.2}s ({} cuts, {} solves)",
        a.height,
        a.formulation,
        a.strategy,
        r.status.as_str(),
        r.objective,
        r.best_bound,
        r.gap,
        r.wall_seconds,
        r.cuts_added,
        r.solves
    );
    if let Some(p) = &a.cut_log {
        write_cut_log(&out.cut_log, fs::File::create(p)?)?;
    }
    let Some(tree) = out.tree else {
        eprintln!("no tree: {}", r.message.clone().unwrap_or_default());
        return Ok(false);
    };
    eprintln!(
        "train accuracy {:.4}, test accuracy {:.4}",
        tree.accuracy(&sp.train)?,
        tree.accuracy(&sp.test)?
    );
    let json = tree.to_json_string();
    match &a.tree_out {
        Some(p) => fs::write(p, json + "\n")?,
        None => println!("{json}"),
    }
    Ok(true)
}

fn bench(a: &MatrixArgs) -> Result<bool> {
    let cfg = a.config()?;
    create_dir(&a.out)?;
    RunManifest::new("bench", &cfg, &HighsBackend).write(&a.out.join("manifest.json"))?;
    let rows = run_matrix(&HighsBackend, &cfg)?;
    write_rows(&rows, &a.out.join("cells.csv"))?;
    let summary = summarize(&rows);
    write_rows(&summary, &a.out.join("summary.csv"))?;
    let table = render_table(&summary);
    fs::write(a.out.join("table.txt"), &table)?;
    print!("{table}");
    let ok1 = report_failures("objective disagreement", &objective_disagreements(&rows));
    let ok2 = report_failures("below CART", &dominance_violations(&rows));
    Ok(ok1 && ok2)
}

fn cuts(a: &MatrixArgs) -> Result<bool> {
    let cfg = a.config()?;
    create_dir(&a.out)?;
    RunManifest::new("cuts", &cfg, &HighsBackend).write(&a.out.join("manifest.json"))?;
    let rows = run_cut_comparison(&HighsBackend, &cfg)?;
    write_rows(&rows, &a.out.join("cells.csv"))?;
    let summary = summarize(&rows);
    write_rows(&summary, &a.out.join("summary.csv"))?;
    let ratios = ratio_table(&summary);
    write_rows(&ratios, &a.out.join("ratios.csv"))?;
    let table = render_ratio_table(&ratios);
    fs::write(a.out.join("ratios.txt"), &table)?;
    print!("{table}");
    Ok(report_failures("objective disagreement", &objective_disagreements(&rows)))
}

fn pareto(a: &ParetoArgs) -> Result<bool> {
    let (name, sp) = a.data.load()?;
    let topo = TreeTopology::new(a.height)?;
    let k_max = a.k_max.unwrap_or(topo.n_branch());
    if k_max > topo.n_branch() {
        bail!("k-max {k_max} exceeds the {} branch vertices of height {}", topo.n_branch(), a.height);
    }
    let solve = SolveConfig { time_limit_s: a.time_limit, ..SolveConfig::default() };
    let spec = SweepSpec { dataset: &name, kind: a.formulation, k_max, build: BuildOptions::default(), solve };
    let rows = sweep(&HighsBackend, topo, &sp.train, &sp.test, &spec);
    create_dir(&a.out)?;
    let stem = format!("pareto_{name}_h{}_{}", a.height, a.formulation);
    write_frontier_csv(&rows, fs::File::create(a.out.join(format!("{stem}.csv")))?)?;
    if a.svg {
        fs::write(a.out.join(format!("{stem}.svg")), frontier_svg(&rows))?;
    }
    let manifest = serde_json::json!({
        "command": "pareto",
        "dataset": name,
        "height": a.height,
        "formulation": a.formulation.name(),
        "k_max": k_max,
        "seed": a.data.seed,
        "replicate": a.data.replicate,
        "train_fraction": a.data.train_fraction,
        "time_limit_s": a.time_limit,
        "backend": HighsBackend.name(),
        "version": env!("CARGO_PKG_VERSION"),
    });
    fs::write(a.out.join(format!("{stem}.manifest.json")), serde_json::to_string_pretty(&manifest)? + "\n")?;

    let mut failures = Vec::new();
    for r in &rows {
        println!(
            "k={:>2} train_obj={:>6} test_acc={:.4} {} {:.2}s{}",
            r.k,
            r.train_obj,
            r.test_acc,
            r.status,
            r.seconds,
            if r.dominant == 1 { " *" } else { "" }
        );
        if r.warm_start_accepted == Some(false) {
            failures.push(format!("k={}: warm start rejected", r.k));
        }
    }
    for w in rows.windows(2) {
        if w[1].train_obj < w[0].train_obj {
            failures.push(format!("train objective drops from k={} to k={}", w[0].k, w[1].k));
        }
    }
    Ok(report_failures("pareto", &failures))
}

fn oracle(a: &OracleArgs) -> Result<bool> {
    let rows = oracle_check(&HighsBackend, a.first, a.instances)?;
    if let Some(p) = &a.out {
        write_rows(&rows, p)?;
    }
    let bad: Vec<String> = rows
        .iter()
        .filter(|r| !r.agree)
        .map(|r| {
            format!(
                "instance {} h={} {} {}: {} objective {} tree {} oracle {}",
                r.instance, r.h, r.model, r.strategy, r.status, r.objective, r.tree_correct, r.oracle
            )
        })
        .collect();
    println!("{} solves on {} instances, {} disagreements", rows.len(), a.instances, bad.len());
    Ok(report_failures("oracle", &bad))
}

fn relax(a: &RelaxArgs) -> Result<bool> {
    let mut rows = Vec::new();
    for seed in a.first..a.first + a.instances {
        rows.push(relax_row(&HighsBackend, &format!("random-{seed}"), &random_instance(seed), random_height(seed))?);
    }
    for name in &a.datasets {
        let d = load_dataset(&a.data_dir, name, 1)?;
        rows.push(relax_row(&HighsBackend, name, &d, a.height)?);
    }
    if let Some(p) = &a.out {
        write_rows(&rows, p)?;
    }
    let mut failures = Vec::new();
    println!("{:>12} {:>2} {:>10} {:>10} {:>10} {:>10} {:>10}", "instance", "h", "FlowOCT", "MCF1", "MCF2", "CUT1", "CUT2");
    for r in &rows {
        println!(
            "{:>12} {:>2} {:>10.4} {:>10.4} {:>10.4} {:>10.4} {:>10.4}",
            r.instance, r.h, r.flowoct, r.mcf1, r.mcf2, r.cut1, r.cut2
        );
        let checks = [
            (r.cut2_le_cut1, "CUT2 <= CUT1"),
            (r.cut1_eq_mcf1, "CUT1 = MCF1"),
            (r.cut1_eq_mcf2, "CUT1 = MCF2"),
            (r.mcf1_le_flowoct, "MCF1 <= FlowOCT"),
        ];
        for (ok, what) in checks {
            if !ok {
                failures.push(format!("{} h={}: {what} fails", r.instance, r.h));
            }
        }
        if r.flow_identity_residual > 1e-6 {
            failures.push(format!("{} h={}: flow identity residual {:.3e}", r.instance, r.h, r.flow_identity_residual));
        }
    }
    Ok(report_failures("relax", &failures))
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match &cli.command {
        Command::Train(a) => train(a),
        Command::Bench(a) => bench(a),
        Command::Cuts(a) => cuts(a),
        Command::Pareto(a) => pareto(a),
        Command::OracleCheck(a) => oracle(a),
        Command::RelaxCheck(a) => relax(a),
    };
    match result {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use clap::CommandFactory;
    use treemilo::milp::SolveStatus;

    #[test]
    fn cli_definition_is_consistent() {
        Cli::command().debug_assert();
    }

    #[test]
    fn parses_train_flags() {
        let cli = Cli::try_parse_from([
            "treemilo", "train", "--dataset", "monk1", "--height", "2", "--formulation", "mcf1", "--strategy", "frac3",
        ])
        .unwrap();
        let Command::Train(a) = cli.command else { panic!("expected train") };
        assert_eq!(a.formulation, FormulationKind::Mcf1);
        assert_eq!(a.strategy, StrategyKind::Frac3);
        assert_eq!(a.data.train_fraction, 0.75);
    }

    #[test]
    fn status_strings() {
        assert_eq!(SolveStatus::FeasibleLimit.as_str(), "feasible-limit");
    }
}
