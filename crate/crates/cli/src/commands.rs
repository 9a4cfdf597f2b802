use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use clap::Args;
use serde::Serialize;

use screenclean::persistence::{
    persistence_replicate, persistence_trend, risk_curve, write_curve_csv, write_trend_csv, PersistenceConfig,
    RiskModel, RADIUS_GRID_SIZE,
};
use screenclean::pipeline::{run_screen_and_clean, KRule, PipelineConfig};
use screenclean::screeners::lasso::LASSO_GRID_SIZE;
use screenclean::simulation::{
    run_table, table1_cells, table2_cells, table_models, write_table1_csv, write_table2_csv, Cell, CellReport,
    Method, ModelKind, SimModel, SimSettings,
};
use screenclean::{Dataset, Screener};

use crate::config::{config_hash, header_line, FileConfig};
use crate::options::{
    k_rule, CriticalArg, KRuleArg, LooArg, MethodArg, ModelArg, SchemeArg, ScreenerArg,
};
use crate::Common;

const COMMON_KEYS: [&str; 3] = ["out", "seed", "threads"];

fn allowed(extra: &[&'static str]) -> Vec<&'static str> {
    COMMON_KEYS.iter().chain(extra).copied().collect()
}

/// Resolved shared settings.
struct Base {
    out: PathBuf,
    seed: u64,
}

fn base(common: &Common, file: &FileConfig) -> Result<Base> {
    if let Some(t) = file.pick_opt(common.threads, "threads")? {
        if t == 0 {
            bail!("--threads must be >= 1");
        }
        // Fails only if a pool already exists, which cannot happen here.
        let _ = rayon::ThreadPoolBuilder::new().num_threads(t).build_global();
    }
    let out = file.pick(common.out.clone(), "out", PathBuf::from("."))?;
    fs::create_dir_all(&out).with_context(|| format!("creating {}", out.display()))?;
    Ok(Base {
        out,
        seed: file.pick(common.seed, "seed", 0)?,
    })
}

fn create(dir: &Path, name: &str, header: &str) -> Result<fs::File> {
    let path = dir.join(name);
    let mut f = fs::File::create(&path).with_context(|| format!("creating {}", path.display()))?;
    writeln!(f, "# {header}")?;
    Ok(f)
}

fn resolve_k_rule(file: &FileConfig, rule: Option<KRuleArg>, a: Option<f64>) -> Result<KRule> {
    let rule = file.pick_enum(rule, "k-rule", KRuleArg::SqrtN)?;
    let a = file.pick(a, "k-const", KRule::DEFAULT_A)?;
    Ok(k_rule(rule, a))
}

#[derive(Debug, Args)]
pub struct AnalyzeArgs {
    /// CSV with a header row, a `y` column and numeric covariates.
    #[arg(long, short)]
    input: Option<PathBuf>,
    #[arg(long, value_enum)]
    screener: Option<ScreenerArg>,
    /// Split scheme; `3` and `2` are shorthands for tri-split and
    /// two-split-loo.
    #[arg(long, value_enum)]
    splits: Option<SchemeArg>,
    #[arg(long)]
    alpha: Option<f64>,
    #[arg(long, value_enum)]
    k_rule: Option<KRuleArg>,
    /// Constant `a` of the `a-log-n` rule.
    #[arg(long)]
    k_const: Option<f64>,
    /// Override the scheme's default cleaning threshold.
    #[arg(long, value_enum)]
    critical: Option<CriticalArg>,
    #[arg(long, value_enum)]
    loo_mode: Option<LooArg>,
    /// Points on the lasso penalty grid.
    #[arg(long)]
    grid_size: Option<usize>,
    /// Subtract the mean of `y` before the analysis.
    #[arg(long)]
    center_y: bool,
    /// Also write the screening path and the cross-validation curve.
    #[arg(long)]
    emit_intermediate: bool,
    #[command(flatten)]
    common: Common,
}

#[derive(Debug, Serialize)]
struct AnalyzeSettings<'a> {
    input: &'a Path,
    config: &'a PipelineConfig,
    center_y: bool,
}

pub fn analyze(args: AnalyzeArgs) -> Result<()> {
    let file = FileConfig::load(
        args.common.config.as_deref(),
        &allowed(&[
            "input",
            "screener",
            "splits",
            "alpha",
            "k-rule",
            "k-const",
            "critical",
            "loo-mode",
            "grid-size",
            "center-y",
            "emit-intermediate",
        ]),
    )?;
    let Some(input) = file.pick_opt(args.input, "input")? else {
        bail!("no input file: pass --input or set `input` in the config");
    };
    let base = base(&args.common, &file)?;
    let cfg = PipelineConfig {
        screener: file.pick_enum(args.screener, "screener", ScreenerArg::Lasso)?.into(),
        scheme: file.pick_enum(args.splits, "splits", SchemeArg::TriSplit)?.into(),
        alpha: file.pick(args.alpha, "alpha", 0.05)?,
        k_rule: resolve_k_rule(&file, args.k_rule, args.k_const)?,
        seed: base.seed,
        critical: file.pick_enum_opt(args.critical, "critical")?.map(Into::into),
        loo_mode: file.pick_enum(args.loo_mode, "loo-mode", LooArg::Rescreen)?.into(),
        standardize: true,
        grid_size: file.pick(args.grid_size, "grid-size", LASSO_GRID_SIZE)?,
    };
    let center_y = file.switch(args.center_y, "center-y")?;
    let intermediates = file.switch(args.emit_intermediate, "emit-intermediate")?;

    let mut data = Dataset::read_csv_path(&input).with_context(|| format!("reading {}", input.display()))?;
    if data.n() < 6 {
        bail!("{} has {} rows; at least 6 are needed", input.display(), data.n());
    }
    if center_y {
        data = data.center_response();
    }
    let hash = config_hash(&AnalyzeSettings {
        input: &input,
        config: &cfg,
        center_y,
    });
    let header = header_line(base.seed, &hash);
    let run = run_screen_and_clean(&data, &cfg)?;
    run.write_bundle(&base.out, &data, &cfg, Some(&header), intermediates)?;

    let summary = run.summary(&data, &cfg);
    println!("screened ({}): {}", summary.screened.len(), summary.screened_names.join(" "));
    println!("cleaned  ({}): {}", summary.cleaned.len(), summary.cleaned_names.join(" "));
    match summary.critical {
        Some(c) => println!("critical value {c:.4}, alpha {}", cfg.alpha),
        None => println!("perfect fit on the cleaning part; every screened variable kept"),
    }
    println!("wrote {}", base.out.display());
    Ok(())
}

#[derive(Debug, Args)]
pub struct SimulateArgs {
    #[arg(long, value_enum)]
    model: Option<ModelArg>,
    #[arg(long)]
    n: Option<usize>,
    #[arg(long)]
    p: Option<usize>,
    /// Coefficient slope for models B and C.
    #[arg(long)]
    delta: Option<f64>,
    /// Noise standard deviation.
    #[arg(long)]
    sigma: Option<f64>,
    /// Methods to evaluate (comma separated).
    #[arg(long = "method", value_enum, value_delimiter = ',')]
    methods: Vec<MethodArg>,
    /// Split scheme for the screen-and-clean methods.
    #[arg(long, value_enum)]
    splits: Option<SchemeArg>,
    #[arg(long)]
    replicates: Option<usize>,
    #[arg(long)]
    alpha: Option<f64>,
    #[arg(long, value_enum)]
    k_rule: Option<KRuleArg>,
    #[arg(long)]
    k_const: Option<f64>,
    #[arg(long, value_enum)]
    loo_mode: Option<LooArg>,
    /// Also write the full per-cell reports as JSON.
    #[arg(long)]
    emit_intermediate: bool,
    #[command(flatten)]
    common: Common,
}

#[derive(Debug, Serialize)]
struct SimulateSettings<'a> {
    model: &'a SimModel,
    methods: &'a [MethodArg],
    scheme: SchemeArg,
    settings: &'a SimSettings,
}

fn fmt_opt(v: Option<f64>) -> String {
    v.map(|x| format!("{x:.6}")).unwrap_or_default()
}

fn write_simulation_csv<W: Write>(reports: &[CellReport], mut out: W) -> Result<()> {
    writeln!(
        out,
        "method,splits,n,p,model,replicates,size,power,fpr,coverage,size_se,power_se,fpr_se,coverage_se,failures"
    )?;
    for r in reports {
        let (name, splits) = match r.cell.method {
            Method::ScreenClean { screener, scheme } => (screener.to_string(), scheme.split_mode().parts().to_string()),
            Method::AdaptiveLasso => ("adaptive-lasso".to_string(), "2".to_string()),
        };
        let m = r.metrics.as_ref();
        let f = |g: fn(&screenclean::simulation::Metrics) -> Option<f64>| fmt_opt(m.and_then(g));
        let model = &r.cell.model;
        writeln!(
            out,
            "{name},{splits},{},{},{},{},{},{},{},{},{},{},{},{},{}",
            model.n,
            model.p,
            model.kind,
            m.map(|x| x.replicates).unwrap_or(0),
            f(|x| Some(x.size)),
            f(|x| Some(x.power)),
            f(|x| Some(x.fpr)),
            f(|x| x.coverage),
            f(|x| Some(x.size_se)),
            f(|x| Some(x.power_se)),
            f(|x| Some(x.fpr_se)),
            f(|x| x.coverage_se),
            r.failures
        )?;
    }
    Ok(())
}

pub fn simulate(args: SimulateArgs) -> Result<()> {
    let file = FileConfig::load(
        args.common.config.as_deref(),
        &allowed(&[
            "model",
            "n",
            "p",
            "delta",
            "sigma",
            "methods",
            "splits",
            "replicates",
            "alpha",
            "k-rule",
            "k-const",
            "loo-mode",
            "emit-intermediate",
        ]),
    )?;
    let base = base(&args.common, &file)?;
    let kind: ModelKind = file.pick_enum(args.model, "model", ModelArg::B)?.into();
    let n = file.pick(args.n, "n", 100)?;
    let p = file.pick(args.p, "p", 100)?;
    let mut model = SimModel::new(kind, n, p);
    model.delta = file.pick(args.delta, "delta", model.delta)?;
    model.sigma = file.pick(args.sigma, "sigma", model.sigma)?;
    let methods: Vec<MethodArg> = if !args.methods.is_empty() {
        args.methods
    } else {
        match file.pick_opt::<Vec<String>>(None, "methods")? {
            Some(names) => names
                .iter()
                .map(|s| <MethodArg as clap::ValueEnum>::from_str(s, true))
                .collect::<std::result::Result<_, _>>()
                .map_err(|e| anyhow::anyhow!("methods: {e}"))?,
            None => vec![MethodArg::Lasso, MethodArg::Stepwise, MethodArg::Marginal],
        }
    };
    let scheme = file.pick_enum(args.splits, "splits", SchemeArg::TriSplit)?;
    let replicates = file.pick(args.replicates, "replicates", 100)?;
    let settings = SimSettings {
        alpha: file.pick(args.alpha, "alpha", 0.05)?,
        k_rule: resolve_k_rule(&file, args.k_rule, args.k_const)?,
        loo_mode: file.pick_enum(args.loo_mode, "loo-mode", LooArg::Rescreen)?.into(),
        ..SimSettings::new(replicates, base.seed)
    };
    let intermediates = file.switch(args.emit_intermediate, "emit-intermediate")?;
    let cells: Vec<Cell> = methods
        .iter()
        .map(|m| Cell {
            model,
            method: match m {
                MethodArg::Lasso => Method::ScreenClean {
                    screener: Screener::Lasso,
                    scheme: scheme.into(),
                },
                MethodArg::Stepwise => Method::ScreenClean {
                    screener: Screener::Stepwise,
                    scheme: scheme.into(),
                },
                MethodArg::Marginal => Method::ScreenClean {
                    screener: Screener::Marginal,
                    scheme: scheme.into(),
                },
                MethodArg::AdaptiveLasso => Method::AdaptiveLasso,
            },
        })
        .collect();
    let hash = config_hash(&SimulateSettings {
        model: &model,
        methods: &methods,
        scheme,
        settings: &settings,
    });
    let header = header_line(base.seed, &hash);
    let reports = run_table(&cells, &settings)?;
    write_simulation_csv(&reports, create(&base.out, "simulation.csv", &header)?)?;
    if intermediates {
        let json = serde_json::to_string_pretty(&reports)?;
        fs::write(base.out.join("cells.json"), json + "\n")?;
    }
    for r in &reports {
        match &r.metrics {
            Some(m) => println!(
                "{} {}: size {:.3} power {:.3} fpr {:.4} ({} failures)",
                r.cell.model, r.cell.method, m.size, m.power, m.fpr, r.failures
            ),
            None => println!("{} {}: every replicate failed", r.cell.model, r.cell.method),
        }
    }
    Ok(())
}

#[derive(Debug, Args)]
pub struct TablesArgs {
    /// Which table: 1 (screen and clean) or 2 (adaptive lasso).
    #[arg(long)]
    table: Option<u8>,
    #[arg(long)]
    replicates: Option<usize>,
    /// Restrict to some rows, separated by `;`. Table 1 rows are
    /// `splits,n,p,model` (e.g. `3,100,100,B`), table 2 rows `n,p,model`.
    #[arg(long)]
    cells: Option<String>,
    #[arg(long)]
    alpha: Option<f64>,
    #[arg(long, value_enum)]
    loo_mode: Option<LooArg>,
    /// Also write the full per-cell reports as JSON.
    #[arg(long)]
    emit_intermediate: bool,
    #[command(flatten)]
    common: Common,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
struct RowKey {
    parts: Option<usize>,
    n: usize,
    p: usize,
    kind: ModelKind,
}

fn parse_row(text: &str, table: u8) -> Result<RowKey> {
    let fields: Vec<&str> = text.split(',').map(str::trim).collect();
    let want = if table == 1 { 4 } else { 3 };
    if fields.len() != want {
        bail!("cell `{text}` should have {want} comma-separated fields");
    }
    let num = |s: &str| -> Result<usize> { s.parse().with_context(|| format!("bad number `{s}` in cell `{text}`")) };
    let (parts, rest) = if table == 1 {
        (Some(num(fields[0])?), &fields[1..])
    } else {
        (None, &fields[..])
    };
    Ok(RowKey {
        parts,
        n: num(rest[0])?,
        p: num(rest[1])?,
        kind: rest[2].parse()?,
    })
}

fn row_of(cell: &Cell) -> RowKey {
    RowKey {
        parts: match cell.method {
            Method::ScreenClean { scheme, .. } => Some(scheme.split_mode().parts()),
            Method::AdaptiveLasso => None,
        },
        n: cell.model.n,
        p: cell.model.p,
        kind: cell.model.kind,
    }
}

pub fn tables(args: TablesArgs) -> Result<()> {
    let file = FileConfig::load(
        args.common.config.as_deref(),
        &allowed(&["table", "replicates", "cells", "alpha", "loo-mode", "emit-intermediate"]),
    )?;
    let base = base(&args.common, &file)?;
    let Some(table) = file.pick_opt(args.table, "table")? else {
        bail!("choose a table with --table 1 or --table 2");
    };
    let all = match table {
        1 => table1_cells(&table_models()),
        2 => table2_cells(&table_models()),
        other => bail!("there is no table {other}; choose 1 or 2"),
    };
    let replicates = file.pick(args.replicates, "replicates", 100)?;
    if replicates < 10 {
        bail!("--replicates must be >= 10, got {replicates}");
    }
    let filter = file.pick_opt(args.cells, "cells")?;
    let cells: Vec<Cell> = match &filter {
        None => all,
        Some(spec) => {
            let keys = spec
                .split(';')
                .filter(|s| !s.trim().is_empty())
                .map(|s| parse_row(s, table))
                .collect::<Result<Vec<_>>>()?;
            for k in &keys {
                if !all.iter().any(|c| row_of(c) == *k) {
                    bail!("no row {k:?} in table {table}");
                }
            }
            all.into_iter().filter(|c| keys.contains(&row_of(c))).collect()
        }
    };
    let settings = SimSettings {
        alpha: file.pick(args.alpha, "alpha", 0.05)?,
        loo_mode: file.pick_enum(args.loo_mode, "loo-mode", LooArg::Rescreen)?.into(),
        ..SimSettings::new(replicates, base.seed)
    };
    let intermediates = file.switch(args.emit_intermediate, "emit-intermediate")?;
    let hash = config_hash(&(table, &filter, &settings));
    let header = header_line(base.seed, &hash);
    let reports = run_table(&cells, &settings)?;
    let name = format!("table{table}.csv");
    let out = create(&base.out, &name, &header)?;
    if table == 1 {
        write_table1_csv(&reports, out)?;
    } else {
        write_table2_csv(&reports, out)?;
    }
    if intermediates {
        let json = serde_json::to_string_pretty(&reports)?;
        fs::write(base.out.join(format!("table{table}_cells.json")), json + "\n")?;
    }
    let failures: usize = reports.iter().map(|r| r.failures).sum();
    println!(
        "wrote {} ({} cells, {replicates} replicates, {failures} failed replicate runs)",
        base.out.join(name).display(),
        reports.len()
    );
    Ok(())
}

#[derive(Debug, Args)]
pub struct PersistenceArgs {
    /// Sample sizes (comma separated).
    #[arg(long = "n", value_delimiter = ',')]
    sample_sizes: Vec<usize>,
    #[arg(long)]
    p: Option<usize>,
    #[arg(long, value_enum)]
    model: Option<ModelArg>,
    #[arg(long)]
    delta: Option<f64>,
    /// Noise standard deviation; 0 gives noiseless data.
    #[arg(long)]
    sigma: Option<f64>,
    #[arg(long)]
    replicates: Option<usize>,
    /// Radii on the cross-validation grid.
    #[arg(long)]
    grid: Option<usize>,
    /// The largest radius is `n^exponent`.
    #[arg(long)]
    exponent: Option<f64>,
    #[command(flatten)]
    common: Common,
}

pub fn persistence(args: PersistenceArgs) -> Result<()> {
    let file = FileConfig::load(
        args.common.config.as_deref(),
        &allowed(&["n", "p", "model", "delta", "sigma", "replicates", "grid", "exponent"]),
    )?;
    let base = base(&args.common, &file)?;
    let defaults = PersistenceConfig::default();
    let sample_sizes = if args.sample_sizes.is_empty() {
        file.pick(None, "n", defaults.sample_sizes.clone())?
    } else {
        args.sample_sizes
    };
    if sample_sizes.is_empty() {
        bail!("no sample sizes given");
    }
    let cfg = PersistenceConfig {
        kind: file.pick_enum(args.model, "model", ModelArg::B)?.into(),
        sample_sizes,
        p: file.pick(args.p, "p", defaults.p)?,
        delta: file.pick(args.delta, "delta", defaults.delta)?,
        sigma: file.pick(args.sigma, "sigma", defaults.sigma)?,
        radius_exponent: file.pick(args.exponent, "exponent", defaults.radius_exponent)?,
        grid: file.pick(args.grid, "grid", RADIUS_GRID_SIZE)?,
        replicates: file.pick(args.replicates, "replicates", defaults.replicates)?,
        seed: base.seed,
    };
    let header = header_line(base.seed, &config_hash(&cfg));
    let rows = persistence_trend(&cfg)?;
    // The curve of the first replicate at each sample size.
    let curves = cfg
        .sample_sizes
        .iter()
        .map(|&n| {
            let model = cfg.model(n);
            let rep = persistence_replicate(&model, cfg.omega(n), cfg.grid, model.replicate_seed(cfg.seed, 0))?;
            Ok((n, risk_curve(&rep.selection, &rep.train, &RiskModel::population(&model)?)?))
        })
        .collect::<screenclean::Result<Vec<_>>>()?;
    write_trend_csv(&rows, Some(&header), fs::File::create(base.out.join("persistence_gaps.csv"))?)?;
    write_curve_csv(&curves, Some(&header), fs::File::create(base.out.join("persistence_curve.csv"))?)?;
    for r in &rows {
        println!(
            "n {:>6}  radius {:.3}  median gap {:.3e}  mean gap {:.3e}  max gap {:.3e}",
            r.n, r.omega, r.median_gap, r.mean_gap, r.max_gap
        );
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use screenclean::pipeline::SplitScheme;

    #[test]
    fn cell_rows_parse() {
        let k = parse_row("3,100,100,B", 1).unwrap();
        assert_eq!(
            k,
            RowKey {
                parts: Some(3),
                n: 100,
                p: 100,
                kind: ModelKind::B
            }
        );
        assert_eq!(parse_row(" 100, 1000 ,c", 2).unwrap().kind, ModelKind::C);
        assert!(parse_row("100,100,B", 1).is_err());
        assert!(parse_row("3,x,100,B", 1).is_err());
        assert!(parse_row("3,100,100,Z", 1).is_err());
    }

    #[test]
    fn every_table_row_is_addressable() {
        for c in table1_cells(&table_models()) {
            let k = row_of(&c);
            let text = format!("{},{},{},{}", k.parts.unwrap(), k.n, k.p, k.kind);
            assert_eq!(parse_row(&text, 1).unwrap(), k);
        }
        assert!(matches!(
            table1_cells(&table_models())[0].method,
            Method::ScreenClean {
                scheme: SplitScheme::TwoSplitLoo,
                ..
            }
        ));
    }
}
