use std::path::{Path, PathBuf};

use anyhow::{Context, Result};
use clap::{value_parser, Arg, ArgAction, ArgMatches, Command};
use oneclass_core::bounds;
use oneclass_core::reward;
use oneclass_lab::config::{self, Config, ExperimentConfig, Key, BOUNDS_KEYS, EXPERIMENT_KEYS};
use oneclass_lab::curves::{format_sig, CurveTable};
use oneclass_lab::ingest::{self, RatingsFormat, SelectionConfig, SelectionMode};
use oneclass_lab::{experiments, io, meta};

fn key_args(keys: &[Key]) -> Vec<Arg> {
    keys.iter()
        .map(|k| {
            Arg::new(k.name)
                .long(k.name)
                .value_name("VALUE")
                .help(format!("{} [default: {}]", k.help, k.default))
        })
        .collect()
}

fn config_arg() -> Arg {
    Arg::new("config")
        .long("config")
        .value_name("FILE")
        .value_parser(value_parser!(PathBuf))
        .help("key = value file; flags override it")
}

/// Defaults, then the config file, then flags.
fn resolve(keys: &[Key], m: &ArgMatches) -> Result<Config> {
    let mut c = Config::defaults(keys);
    if let Some(path) = m.get_one::<PathBuf>("config") {
        c.apply_file(path)?;
    }
    for k in keys {
        if let Ok(Some(v)) = m.try_get_one::<String>(k.name) {
            c.set(k.name, v)?;
        }
    }
    Ok(c)
}

fn selection_args(users: &'static str, items: &'static str, mode: &'static str) -> Vec<Arg> {
    vec![
        Arg::new("input").long("input").required(true).value_parser(value_parser!(PathBuf)).help("ratings file"),
        Arg::new("format").long("format").help("dcolon or csv [default: by extension, .dat is dcolon]"),
        Arg::new("out").long("out").required(true).value_parser(value_parser!(PathBuf)).help("grid output path"),
        Arg::new("users").long("users").default_value(users).value_parser(value_parser!(usize)),
        Arg::new("items").long("items").default_value(items).value_parser(value_parser!(usize)),
        Arg::new("min_item_count").long("min_item_count").default_value("1").value_parser(value_parser!(usize)),
        Arg::new("bias_tolerance").long("bias_tolerance").default_value("0.1").value_parser(value_parser!(f64)),
        Arg::new("mode").long("mode").default_value(mode).value_parser(["debiased", "most-rated"]),
    ]
}

fn cli() -> Command {
    Command::new("oneclass")
        .about("Online one-class collaborative filtering simulator")
        .subcommand_required(true)
        .arg(Arg::new("verbose").short('v').long("verbose").action(ArgAction::Count).global(true))
        .subcommand(
            Command::new("synth")
                .about("Generate a synthetic model, run User-CF on it and report likable fractions")
                .arg(config_arg())
                .arg(Arg::new("trace").long("trace").value_parser(value_parser!(PathBuf)).help("write the run trace CSV"))
                .arg(Arg::new("matrix").long("matrix").value_parser(value_parser!(PathBuf)).help("write the preference matrix"))
                .args(key_args(EXPERIMENT_KEYS)),
        )
        .subcommand(
            Command::new("ingest")
                .about("Build a signed replay corpus from a ratings file")
                .args(selection_args("1000", "500", "debiased")),
        )
        .subcommand(
            Command::new("exp")
                .about("Run an experiment and write its curves")
                .arg(
                    Arg::new("name")
                        .required(true)
                        .value_parser(["one-vs-two", "sim-scaling", "pref-scaling", "synthetic-theorem"]),
                )
                .arg(config_arg())
                .args(key_args(EXPERIMENT_KEYS).into_iter().filter(|a| a.get_id() != "experiment")),
        )
        .subcommand(
            Command::new("bounds")
                .about("Evaluate the cold-start time, reward bound and parameter conditions")
                .arg(config_arg())
                .arg(Arg::new("csv").long("csv").value_parser(value_parser!(PathBuf)).help("also write key,value CSV"))
                .args(key_args(BOUNDS_KEYS)),
        )
        .subcommand(
            Command::new("export-matrix")
                .about("Export the most rated users and items as a signed grid for plotting")
                .args(selection_args("1000", "1000", "most-rated")),
        )
}

fn main() -> Result<()> {
    let matches = cli().get_matches();
    let level = match matches.get_count("verbose") {
        0 => "info",
        1 => "debug",
        _ => "trace",
    };
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(level)).init();
    match matches.subcommand() {
        Some(("synth", m)) => synth(m),
        Some(("ingest", m)) | Some(("export-matrix", m)) => ingest_cmd(m),
        Some(("exp", m)) => exp(m),
        Some(("bounds", m)) => bounds_cmd(m),
        _ => unreachable!("clap requires a subcommand"),
    }
}

fn synth(m: &ArgMatches) -> Result<()> {
    let mut c = resolve(EXPERIMENT_KEYS, m)?;
    c.set("experiment", "synthetic-theorem")?;
    let cfg = ExperimentConfig::from_config(&c)?;
    let pf = cfg.pf[0];
    let seed = cfg.seed;
    let (env, trace) = experiments::run_synthetic_once(&cfg, pf, seed)?;
    if let (Some(path), oneclass_core::EnvKind::Synthetic(pm)) = (m.get_one::<PathBuf>("matrix"), env.kind()) {
        io::write_preference_matrix(pm, path)?;
        log::info!("wrote {}", path.display());
    }
    if let Some(path) = m.get_one::<PathBuf>("trace") {
        io::write_trace_file(&trace, path)?;
        log::info!("wrote {}", path.display());
    }
    let curve = reward::likable_curve(&trace, &env)?;
    let mut table = CurveTable::new();
    let mut acc = 0.0;
    for (t, v) in curve.iter().enumerate() {
        acc += v;
        table.push("likable", (t + 1) as f64, &[*v]);
        table.push("cumulative", (t + 1) as f64, &[acc / (t + 1) as f64]);
    }
    table.write_csv(&cfg.output)?;
    let late = &curve[curve.len() * 3 / 4..];
    let late_mean = late.iter().sum::<f64>() / late.len().max(1) as f64;
    let mut notes: Vec<(String, String)> = c.iter().map(|(k, v)| (k.to_string(), v.to_string())).collect();
    notes.push(("cumulative_likable".into(), format_sig(acc / curve.len() as f64)));
    notes.push(("late_quarter_likable".into(), format_sig(late_mean)));
    notes.push(("fallbacks".into(), trace.total_fallbacks().to_string()));
    meta::write_sidecar(&cfg.output, &notes)?;
    println!("cumulative likable fraction  {}", format_sig(acc / curve.len() as f64));
    println!("last-quarter likable fraction {}", format_sig(late_mean));
    println!("wrote {}", cfg.output.display());
    Ok(())
}

fn ingest_cmd(m: &ArgMatches) -> Result<()> {
    let input: &PathBuf = m.get_one("input").expect("required");
    let out: &PathBuf = m.get_one("out").expect("required");
    let format = match m.get_one::<String>("format") {
        Some(f) => f.parse()?,
        None => RatingsFormat::guess(input),
    };
    let cfg = SelectionConfig {
        n_users_out: *m.get_one("users").expect("defaulted"),
        n_items_out: *m.get_one("items").expect("defaulted"),
        min_item_count: *m.get_one("min_item_count").expect("defaulted"),
        bias_tolerance: *m.get_one("bias_tolerance").expect("defaulted"),
        mode: match m.get_one::<String>("mode").map(String::as_str) {
            Some("most-rated") => SelectionMode::MostRated,
            _ => SelectionMode::Debiased,
        },
    };
    let raw = ingest::read_ratings(input, format)?;
    let signed = ingest::binarize(&raw)?;
    let matrix = ingest::select_submatrix(&signed, &cfg)?;
    ingest::write_grid(&matrix, out)?;
    let mut notes = ingest::corpus_metadata(&matrix, &cfg, &input.display().to_string());
    notes.push(("rows_read".into(), raw.rows_read.to_string()));
    notes.push(("duplicates".into(), raw.duplicates.to_string()));
    meta::write_sidecar(out, &notes)?;
    let stats = matrix.stats();
    println!(
        "{}x{} corpus, {:.1}% positive, {:.1}% negative, written to {}",
        matrix.n_rows(),
        matrix.n_cols(),
        100.0 * stats.positive,
        100.0 * stats.negative,
        out.display()
    );
    Ok(())
}

fn exp(m: &ArgMatches) -> Result<()> {
    let mut c = resolve(EXPERIMENT_KEYS, m)?;
    c.set("experiment", m.get_one::<String>("name").expect("required"))?;
    let cfg = ExperimentConfig::from_config(&c)?;
    let out = experiments::run(&cfg)?;
    write_experiment(&cfg, &c, &out, &cfg.output)?;
    println!("wrote {} ({} rows)", cfg.output.display(), out.table.rows.len());
    Ok(())
}

fn write_experiment(cfg: &ExperimentConfig, c: &Config, out: &experiments::ExperimentOutput, path: &Path) -> Result<()> {
    out.table.write_csv(path).with_context(|| format!("{} experiment", cfg.kind.name()))?;
    let mut notes: Vec<(String, String)> = c.iter().map(|(k, v)| (k.to_string(), v.to_string())).collect();
    notes.extend(out.notes.iter().cloned());
    meta::write_sidecar(path, &notes)?;
    Ok(())
}

fn bounds_cmd(m: &ArgMatches) -> Result<()> {
    let c = resolve(BOUNDS_KEYS, m)?;
    let input = config::bounds_input(&c)?;
    let report = bounds::evaluate(&input)?;
    let mut rows: Vec<(String, String)> = vec![
        ("t_start".into(), format_sig(report.t_start)),
        (
            "reward_lower_bound".into(),
            report.reward_lower_bound.map_or_else(|| "undefined (T < t_start)".into(), format_sig),
        ),
        ("prop1_bound".into(), format_sig(report.prop1_bound)),
        ("prop1_horizon".into(), format_sig(report.prop1_horizon)),
        ("recommended_eta".into(), format_sig(report.recommended.eta)),
        ("recommended_k".into(), report.recommended.k_neighbors.to_string()),
        ("recommended_q".into(), report.recommended.batch_size.to_string()),
        ("recommended_k_unrounded".into(), format_sig(report.recommended.k_raw)),
        ("recommended_q_unrounded".into(), format_sig(report.recommended.batch_raw)),
    ];
    for (name, ok) in report.flags.named() {
        rows.push((format!("flag_{name}"), ok.to_string()));
    }
    for (name, ok) in report.recommended.flags.named() {
        rows.push((format!("recommended_flag_{name}"), ok.to_string()));
    }
    let width = rows.iter().map(|(k, _)| k.len()).max().unwrap_or(0);
    for (k, v) in &rows {
        println!("{k:<width$}  {v}");
    }
    if let Some(path) = m.get_one::<PathBuf>("csv") {
        let mut w = csv::Writer::from_path(path).with_context(|| format!("creating {}", path.display()))?;
        w.write_record(["key", "value"])?;
        for (k, v) in &rows {
            w.write_record([k, v])?;
        }
        w.flush()?;
    }
    Ok(())
}
