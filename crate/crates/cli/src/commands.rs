//! Subcommand implementations.

use std::collections::BTreeMap;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use rayon::prelude::*;

use mva_core::dataset::{prepare, Window, WindowConfig};
use mva_core::graph::GraphOptions;
use mva_core::net::{NetConfig, SpatialScore};
use mva_core::loss::ContrastiveForm;
use mva_core::sim::{density_preset, missing_sweep, simulate, Density, Scenario, ScenarioSpec};
use mva_core::train::{train, window_accuracy, write_history_csv, EpochRecord, TrainConfig};
use mva_diff::checkpoint::FORMAT_VERSION;

use crate::args::{
    AblateArgs, AssociateArgs, Cli, Command, ModelFlags, ReportArgs, SimulateArgs, SweepArgs, TrainArgs, Variant,
};
use crate::config::{ensure_dir, load_model, read_json, save_model, write_json, ModelMeta, RunConfig};
use crate::error::{CliError, Result};
use crate::eval::{evaluate, match_window, run_cell, with_pool, CellResult, Method, Model};
use crate::report;

pub const CHECKPOINT: &str = "model.gmva";
pub const HISTORY: &str = "history.csv";
pub const RESULTS: &str = "results.csv";
pub const ABLATION: &str = "ablation.csv";

pub fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Simulate(a) => cmd_simulate(&a),
        Command::Train(a) => cmd_train(&a),
        Command::Associate(a) => cmd_associate(&a),
        Command::Sweep(a) => cmd_sweep(&a),
        Command::Ablate(a) => cmd_ablate(&a),
        Command::Report(a) => cmd_report(&a),
    }
}

fn window_count(sc: &Scenario, w: &WindowConfig) -> usize {
    let Some((t0, t1)) = mva_core::trajectory::tracks_span(sc.tracks_a.iter().chain(&sc.tracks_b)) else {
        return 0;
    };
    let steps = ((t1 - t0) / w.period) as usize + 1;
    if steps < w.k {
        0
    } else {
        (steps - w.k) / w.stride + 1
    }
}

pub fn cmd_simulate(a: &SimulateArgs) -> Result<()> {
    let base = match &a.spec {
        Some(p) => read_json::<ScenarioSpec>(p)?,
        None => density_preset(Density::from(a.preset), a.seed),
    };
    let mut spec = a.scene.apply(base);
    if a.spec.is_none() || a.missing > 0 {
        spec.missing_targets = a.missing;
    }
    let sc = simulate(&spec)?;
    sc.save(&a.out)
        .map_err(|e| CliError::Input(format!("{}: {e}", a.out.display())))?;
    println!(
        "simulated {} vessels: {} A tracks, {} B tracks, {} windows, {} deletions -> {}",
        spec.n_vessels,
        sc.tracks_a.len(),
        sc.tracks_b.len(),
        window_count(&sc, &WindowConfig::default().evaluation()),
        sc.deleted_ids.len(),
        a.out.display()
    );
    Ok(())
}

/// Applies config file and flag overrides on top of the defaults.
pub fn build_config(flags: &ModelFlags, scenarios: &[PathBuf], out: Option<&Path>) -> Result<RunConfig> {
    let mut cfg = match &flags.config {
        Some(p) => RunConfig::load(p)?,
        None => RunConfig::default(),
    };
    macro_rules! set {
        ($flag:expr, $field:expr) => {
            if let Some(v) = $flag {
                $field = v;
            }
        };
    }
    set!(flags.epochs, cfg.train.epochs);
    set!(flags.lr, cfg.train.lr);
    set!(flags.seed, cfg.train.seed);
    set!(flags.k, cfg.window.k);
    set!(flags.stride, cfg.window.stride);
    set!(flags.d, cfg.net.d);
    set!(flags.heads, cfg.net.heads);
    set!(flags.tga_layers, cfg.net.tga_layers);
    set!(flags.spatial_k, cfg.net.spatial_k);
    set!(flags.gamma1, cfg.train.gamma1);
    set!(flags.gamma2, cfg.train.gamma2);
    set!(flags.margin, cfg.train.margin);
    if flags.tau.is_some() {
        cfg.tau = flags.tau;
    }
    if flags.no_tga {
        cfg.net.use_tga = false;
    }
    if flags.no_sta {
        cfg.net.use_sta = false;
    }
    if flags.same_target_only {
        cfg.net.same_target_only = true;
    }
    if flags.additive_spatial {
        cfg.net.spatial_score = SpatialScore::Additive;
    }
    if flags.literal_contrastive {
        cfg.train.contrastive_form = ContrastiveForm::Literal;
    }
    if flags.resample {
        cfg.window.resample = true;
    }
    if !scenarios.is_empty() {
        cfg.scenarios = scenarios.to_vec();
    }
    if let Some(o) = out {
        cfg.out_dir = Some(o.to_path_buf());
    }
    cfg.validate()?;
    Ok(cfg)
}

/// Prepared windows of several scenarios, renumbered consecutively.
pub fn load_windows(dirs: &[PathBuf], window: &WindowConfig, graph: &GraphOptions) -> Result<Vec<Window>> {
    let mut out = Vec::new();
    for dir in dirs {
        let sc = Scenario::load(dir)?;
        let p = prepare(&sc, window, graph).map_err(|e| CliError::Input(format!("{}: {e}", dir.display())))?;
        for mut w in p.windows {
            w.index = out.len();
            out.push(w);
        }
    }
    Ok(out)
}

/// Trains one network and returns it with its metadata.
pub fn train_model(
    windows: &[Window],
    net: &NetConfig,
    tc: &TrainConfig,
    window: &WindowConfig,
    tau: Option<f64>,
) -> Result<(Model, Vec<EpochRecord>)> {
    let outcome = train(windows, tc, net)?;
    let meta = ModelMeta {
        format_version: FORMAT_VERSION,
        net: net.clone(),
        window: window.clone(),
        tau: tau.unwrap_or(outcome.best_tau),
        seed: tc.seed,
        best_epoch: outcome.best_epoch,
    };
    Ok((
        Model {
            store: outcome.best_params,
            meta,
        },
        outcome.history,
    ))
}

pub fn cmd_train(a: &TrainArgs) -> Result<()> {
    let cfg = build_config(&a.model, &a.scenarios, a.out.as_deref())?;
    if cfg.scenarios.is_empty() {
        return Err(CliError::Usage("train needs at least one --scenario".into()));
    }
    let out = cfg
        .out_dir
        .clone()
        .ok_or_else(|| CliError::Usage("train needs --out".into()))?;
    ensure_dir(&out)?;
    let windows = load_windows(&cfg.scenarios, &cfg.window, &cfg.net.graph_options())?;
    let (model, history) = train_model(&windows, &cfg.net, &cfg.train, &cfg.window, cfg.tau)?;
    save_model(&out.join(CHECKPOINT), &model.store, &model.meta)?;
    let mut f = fs::File::create(out.join(HISTORY))?;
    write_history_csv(&mut f, &history)?;
    write_json(&out.join("config.json"), &cfg)?;
    let best = history.iter().find(|h| h.epoch == model.meta.best_epoch);
    println!(
        "trained {} epochs on {} windows; best epoch {} (val_acc {:.2}%), tau {} -> {}",
        history.len(),
        windows.iter().filter(|w| !w.truth.is_empty()).count(),
        model.meta.best_epoch,
        best.map_or(f64::NAN, |h| h.val_acc),
        model.meta.tau,
        out.join(CHECKPOINT).display()
    );
    Ok(())
}

fn load_optional_model(path: Option<&Path>, methods: &[Method]) -> Result<Option<Model>> {
    match path {
        Some(p) => {
            let (store, meta) = load_model(p)?;
            Ok(Some(Model { store, meta }))
        }
        None if methods.contains(&Method::Model) => Err(CliError::Usage("the gmva method needs --checkpoint".into())),
        None => Ok(None),
    }
}

pub fn cmd_associate(a: &AssociateArgs) -> Result<()> {
    let model = load_optional_model(a.checkpoint.as_deref(), &[a.method])?;
    let mut window = model
        .as_ref()
        .map_or_else(WindowConfig::default, |m| m.meta.window.clone())
        .evaluation();
    if let Some(k) = a.k {
        if let Some(m) = &model {
            if m.meta.window.k != k {
                return Err(CliError::Usage(format!(
                    "window size mismatch: checkpoint was trained with k={}, requested k={k}",
                    m.meta.window.k
                )));
            }
        }
        window.k = k;
        window.stride = k;
    }
    if let Some(s) = a.stride {
        window.stride = s;
    }
    let graph = model.as_ref().map_or_else(GraphOptions::default, |m| m.net().graph_options());
    let tau = a.tau.or(model.as_ref().map(|m| m.meta.tau)).unwrap_or(0.5);
    let sc = Scenario::load(&a.scenario)?;
    let prepared = prepare(&sc, &window, &graph)?;
    let selected: Vec<&Window> = match a.window {
        Some(i) => vec![prepared.windows.get(i).ok_or_else(|| {
            CliError::Usage(format!("window {i} out of range (scenario has {})", prepared.windows.len()))
        })?],
        None => prepared.windows.iter().collect(),
    };
    ensure_dir(&a.out)?;
    let mut csv = String::from("window,accuracy\n");
    let mut accs = Vec::new();
    for w in selected {
        let (m, json) = match_window(a.method, model.as_ref(), w, tau)?;
        write_json(&a.out.join(format!("window_{:04}.json", w.index)), &json)?;
        let acc = window_accuracy(w, &m);
        csv.push_str(&format!("{},{}\n", w.index, acc.map_or(String::new(), |v| v.to_string())));
        match acc {
            Some(v) => println!("window {}: {} pairs, accuracy {v:.2}%", w.index, json.pairs.len()),
            None => println!("window {}: {} pairs, no truth", w.index, json.pairs.len()),
        }
        accs.extend(acc);
    }
    fs::write(a.out.join("accuracy.csv"), csv)?;
    if !accs.is_empty() {
        println!("mean accuracy {:.2}% over {} windows", accs.iter().sum::<f64>() / accs.len() as f64, accs.len());
    }
    Ok(())
}

pub fn write_results(path: &Path, rows: &[CellResult], timings: bool) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    w.write_record(["scenario", "method", "density", "missing", "accuracy", "seconds"])?;
    for r in rows {
        w.write_record([
            r.scenario.clone(),
            r.method.clone(),
            r.density.clone(),
            r.missing.to_string(),
            r.accuracy.to_string(),
            if timings { r.seconds.to_string() } else { String::new() },
        ])?;
    }
    w.flush()?;
    Ok(())
}

pub fn cmd_sweep(a: &SweepArgs) -> Result<()> {
    let model = load_optional_model(a.checkpoint.as_deref(), &a.methods)?;
    let window = model
        .as_ref()
        .map_or_else(WindowConfig::default, |m| m.meta.window.clone())
        .evaluation();
    let graph = model.as_ref().map_or_else(GraphOptions::default, |m| m.net().graph_options());
    let tau = a.tau.or(model.as_ref().map(|m| m.meta.tau)).unwrap_or(0.5);
    let mut cells = Vec::new();
    for &d in &a.densities {
        let density = Density::from(d);
        for &seed in &a.seeds {
            let base = a.scene.apply(density_preset(density, seed));
            for spec in missing_sweep(&base, &a.missing)? {
                let name = format!("{}-s{seed}-m{}", density.name(), spec.missing_targets);
                cells.push((name, density.name(), spec));
            }
        }
    }
    let results: Vec<Result<Vec<CellResult>>> = with_pool(|| {
        cells
            .par_iter()
            .map(|(name, density, spec)| run_cell(name, density, spec, &a.methods, model.as_ref(), &window, &graph, tau))
            .collect()
    })?;
    let mut rows = Vec::new();
    for r in results {
        rows.extend(r?);
    }
    ensure_dir(&a.out)?;
    write_results(&a.out.join(RESULTS), &rows, a.timings)?;
    let report_rows: Vec<report::ResultRow> = rows
        .iter()
        .map(|r| report::ResultRow {
            scenario: r.scenario.clone(),
            method: r.method.clone(),
            density: r.density.clone(),
            missing: r.missing,
            accuracy: r.accuracy,
            seconds: Some(r.seconds),
        })
        .collect();
    let md = report::summary_markdown(&report_rows);
    fs::write(a.out.join("summary.md"), &md)?;
    print!("{md}");
    std::io::stdout().flush()?;
    Ok(())
}

fn variant_name(v: Variant) -> &'static str {
    match v {
        Variant::TgaOnly => "tga-only",
        Variant::StaOnly => "sta-only",
        Variant::Full => "full",
        Variant::None => "none",
    }
}

pub fn cmd_ablate(a: &AblateArgs) -> Result<()> {
    if a.variants.contains(&Variant::None) {
        return Err(CliError::Usage(
            "disabling both the TGA layers and the STA block leaves no feature extractor".into(),
        ));
    }
    let cfg = build_config(&a.model, &a.scenarios, Some(&a.out))?;
    if cfg.scenarios.is_empty() {
        return Err(CliError::Usage("ablate needs at least one --scenario".into()));
    }
    let eval: Vec<Scenario> = a.eval.iter().map(|p| Scenario::load(p)).collect::<Result<_, _>>()?;
    let mut jobs = Vec::new();
    for &seed in &a.seeds {
        for &v in &a.variants {
            jobs.push((seed, v));
        }
    }
    let graph = cfg.net.graph_options();
    let windows = load_windows(&cfg.scenarios, &cfg.window, &graph)?;
    let results: Vec<Result<Vec<(String, u64, usize, f64)>>> = with_pool(|| {
        jobs.par_iter()
            .map(|&(seed, v)| {
                let net = NetConfig {
                    use_tga: v != Variant::StaOnly,
                    use_sta: v != Variant::TgaOnly,
                    ..cfg.net.clone()
                };
                let tc = TrainConfig { seed, ..cfg.train.clone() };
                let (model, _) = train_model(&windows, &net, &tc, &cfg.window, cfg.tau)?;
                let mut by_missing: BTreeMap<usize, Vec<f64>> = BTreeMap::new();
                for sc in &eval {
                    let p = prepare(sc, &cfg.window.evaluation(), &graph)?;
                    let ws: Vec<&Window> = p.labeled().collect();
                    if let Some(acc) = evaluate(Method::Model, Some(&model), &ws, model.meta.tau)? {
                        by_missing.entry(sc.spec.missing_targets).or_default().push(acc);
                    }
                }
                Ok(by_missing
                    .into_iter()
                    .map(|(m, v)| (variant_name(v_of(&net)).to_string(), seed, m, v.iter().sum::<f64>() / v.len() as f64))
                    .collect())
            })
            .collect()
    })?;
    let mut rows = Vec::new();
    for r in results {
        rows.extend(r?);
    }
    ensure_dir(&a.out)?;
    let mut w = csv::Writer::from_path(a.out.join(ABLATION))?;
    w.write_record(["variant", "seed", "missing", "accuracy"])?;
    for (v, s, m, acc) in &rows {
        w.write_record([v.clone(), s.to_string(), m.to_string(), acc.to_string()])?;
    }
    w.flush()?;
    write_json(&a.out.join("config.json"), &cfg)?;
    let mut summary: BTreeMap<(String, usize), Vec<f64>> = BTreeMap::new();
    for (v, _, m, acc) in &rows {
        summary.entry((v.clone(), *m)).or_default().push(*acc);
    }
    for ((v, m), accs) in summary {
        println!("{v:>9} missing {m:>2}: {:.2}%", accs.iter().sum::<f64>() / accs.len() as f64);
    }
    Ok(())
}

fn v_of(net: &NetConfig) -> Variant {
    match (net.use_tga, net.use_sta) {
        (true, true) => Variant::Full,
        (true, false) => Variant::TgaOnly,
        (false, true) => Variant::StaOnly,
        (false, false) => Variant::None,
    }
}

pub fn cmd_report(a: &ReportArgs) -> Result<()> {
    let rows = report::read_results(&a.results)?;
    ensure_dir(&a.out)?;
    fs::write(a.out.join("density.svg"), report::density_chart(&rows))?;
    fs::write(a.out.join("missing.svg"), report::missing_chart(&rows))?;
    if let Some(h) = &a.history {
        let hist = report::read_history(h)?;
        fs::write(a.out.join("loss.svg"), report::loss_chart(&hist))?;
    }
    fs::write(a.out.join("summary.md"), report::summary_markdown(&rows))?;
    println!("report with {} result rows -> {}", rows.len(), a.out.display());
    Ok(())
}
