use std::fs;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use odsearch_core::detectors::threshold_by_contamination;
use odsearch_core::evaluation::{confusion, f1_score, nab_score, NabProfile, ProfileName};
use odsearch_core::optimizer::{run_search, Metric, SearchBudget, SearchConfig, SearchError, Strategy};
use odsearch_core::pipeline::detect_scores;
use odsearch_core::plot::{render_svg, PlotKind, PlotSpec, Series};
use odsearch_core::search_space::default_space;
use odsearch_core::store::{parse_timestamp, read_label_windows, render_series_csv, Store, StoreError};
use odsearch_core::{tsa, TimeSeriesDataset};

use crate::files::{self, ScoreRow};
use crate::{
    Cli, CliError, Command, DetectArgs, IngestArgs, MetricArg, PlotArgs, PlotKindArg, ProfileArg, QueryArgs,
    ScoreArgs, SearchArgs, StrategyArg,
};

pub fn run(cli: &Cli) -> Result<(), CliError> {
    match &cli.command {
        Command::Ingest(a) => ingest(cli, a),
        Command::Query(a) => query(cli, a),
        Command::Search(a) => search(cli, a),
        Command::Detect(a) => detect(cli, a),
        Command::Score(a) => score(cli, a),
        Command::Plot(a) => plot(cli, a),
    }
}

fn store_error(e: StoreError) -> CliError {
    CliError::Data(e.to_string())
}

fn open_store(cli: &Cli) -> Result<Store, CliError> {
    let root = cli
        .store
        .as_ref()
        .ok_or_else(|| CliError::Usage("no store: pass --store or set ODSEARCH_STORE".into()))?;
    Store::connect(root).map_err(store_error)
}

fn load(cli: &Cli, name: &str) -> Result<TimeSeriesDataset, CliError> {
    open_store(cli)?.load(name).map_err(store_error)
}

fn write_file(path: &Path, bytes: &[u8]) -> Result<(), CliError> {
    fs::write(path, bytes).map_err(|e| CliError::Data(format!("cannot write {}: {e}", path.display())))
}

fn ingest(cli: &Cli, a: &IngestArgs) -> Result<(), CliError> {
    let mut store = open_store(cli)?;
    let meta = store
        .ingest_csv(&a.name, &a.csv, a.labels.as_deref())
        .map_err(store_error)?;
    println!(
        "ingested {}: {} points, {} anomaly windows",
        meta.name,
        meta.n_points,
        meta.windows.len()
    );
    Ok(())
}

fn time_arg(s: &Option<String>, default: i64) -> Result<i64, CliError> {
    match s {
        Some(s) => parse_timestamp(s).ok_or_else(|| CliError::Usage(format!("bad timestamp {s:?}"))),
        None => Ok(default),
    }
}

fn query(cli: &Cli, a: &QueryArgs) -> Result<(), CliError> {
    let store = open_store(cli)?;
    let meta = store
        .meta(&a.dataset)
        .ok_or_else(|| store_error(StoreError::UnknownDataset(a.dataset.clone())))?;
    let start = time_arg(&a.start, meta.t_min)?;
    let end = time_arg(&a.end, meta.t_max)?;
    let ds = store.query_data(&a.dataset, start, end).map_err(|e| match e {
        StoreError::InvalidRange { .. } => CliError::Usage(e.to_string()),
        e => store_error(e),
    })?;
    let csv = render_series_csv(&ds);
    match &a.out {
        Some(path) => write_file(path, csv.as_bytes()),
        None => {
            print!("{csv}");
            Ok(())
        }
    }
}

fn create(path: &Path) -> Result<BufWriter<fs::File>, CliError> {
    fs::File::create(path)
        .map(BufWriter::new)
        .map_err(|e| CliError::Data(format!("cannot create {}: {e}", path.display())))
}

fn search(cli: &Cli, a: &SearchArgs) -> Result<(), CliError> {
    if a.budget == 0 {
        return Err(CliError::Usage("--budget must be >= 1".into()));
    }
    if !(a.split_ratio > 0.0 && a.split_ratio < 1.0) {
        return Err(CliError::Usage("--split-ratio must lie in (0, 1)".into()));
    }
    let ds = load(cli, &a.dataset)?;
    let config = SearchConfig {
        budget: SearchBudget::with_max_trials(a.budget),
        split_ratio: a.split_ratio,
        strategy: match a.strategy {
            StrategyArg::Guided => Strategy::Guided,
            StrategyArg::Random => Strategy::Random,
        },
        metric: match a.metric {
            MetricArg::F1 => Metric::F1,
        },
        ..SearchConfig::default()
    };
    let mut trace = a.trace.as_deref().map(create).transpose()?;
    let mut trace_error: Option<CliError> = None;
    let outcome = run_search(&ds, &default_space(), &config, a.seed, |trial| {
        let Some(w) = trace.as_mut() else { return };
        if trace_error.is_some() {
            return;
        }
        let mut line = trial.trace_line();
        if !a.record_timings {
            line.elapsed_ms = 0;
        }
        let json = serde_json::to_string(&line).expect("trace line serializes");
        if let Err(e) = writeln!(w, "{json}").and_then(|_| w.flush()) {
            trace_error = Some(CliError::Search(format!("trace write failed: {e}")));
        }
    })
    .map_err(|e| match e {
        SearchError::NoLabels | SearchError::Dataset(_) => CliError::Data(e.to_string()),
        SearchError::InvalidBudget(_) => CliError::Usage(e.to_string()),
        SearchError::HistoryTooSmall(_) => CliError::Search(e.to_string()),
    })?;
    if let Some(e) = trace_error {
        return Err(e);
    }
    if let Some(path) = &a.policy_out {
        let json = serde_json::to_string_pretty(&outcome.best.policy).expect("policy serializes");
        write_file(path, format!("{json}\n").as_bytes())?;
    }
    let errors = outcome.history.trials.iter().filter(|t| t.error.is_some()).count();
    println!(
        "best f1 {:.6} at trial {} ({}), {} trials, {} failed",
        outcome.best.objective,
        outcome.best.iteration,
        outcome.best.policy.algorithm,
        outcome.history.len(),
        errors
    );
    Ok(())
}

fn detect(cli: &Cli, a: &DetectArgs) -> Result<(), CliError> {
    let mut policy = files::read_policy(&a.policy)?;
    if let Some(seed) = a.seed {
        policy.seed = seed;
    }
    let violations = default_space().validate(&policy);
    if !violations.is_empty() {
        let msgs: Vec<String> = violations.iter().map(ToString::to_string).collect();
        return Err(CliError::Usage(format!("invalid policy: {}", msgs.join("; "))));
    }
    let ds = load(cli, &a.dataset)?;
    let raw = detect_scores(&policy, &ds).map_err(|e| CliError::Data(e.to_string()))?;
    let contamination = policy.contamination().expect("validated policy");
    let flags = threshold_by_contamination(raw.as_slice(), contamination);
    let normalized = files::min_max(raw.as_slice());
    let rows: Vec<ScoreRow> = ds
        .timestamps()
        .iter()
        .enumerate()
        .map(|(i, &t)| ScoreRow {
            timestamp: t,
            score: normalized[i],
            flag: flags.bits[i],
            raw_score: raw.0[i],
        })
        .collect();
    write_file(&a.out, files::render_scores_csv(&rows).as_bytes())?;
    println!("{} points, {} flagged", rows.len(), flags.flagged());
    Ok(())
}

fn labeled_timeline(cli: &Cli, a: &ScoreArgs, rows: &[ScoreRow]) -> Result<TimeSeriesDataset, CliError> {
    let timestamps: Vec<i64> = rows.iter().map(|r| r.timestamp).collect();
    if let Some(name) = &a.dataset {
        let ds = load(cli, name)?;
        if ds.timestamps() != timestamps.as_slice() {
            return Err(CliError::Data(format!(
                "scores timestamps do not align with dataset {name:?}"
            )));
        }
        return Ok(ds);
    }
    let (Some(labels), Some(key)) = (&a.labels, &a.key) else {
        return Err(CliError::Usage("pass --dataset or --labels with --key".into()));
    };
    let file_name = key.rsplit('/').next().unwrap_or(key);
    let windows = read_label_windows(labels, key, file_name).map_err(store_error)?;
    let (lo, hi) = match (timestamps.first(), timestamps.last()) {
        (Some(&lo), Some(&hi)) => (lo, hi),
        _ => return Err(CliError::Data("scores file has no rows".into())),
    };
    let windows = windows.into_iter().filter_map(|w| w.clip(lo, hi)).collect();
    let values = vec![0.0; timestamps.len()];
    TimeSeriesDataset::new(key.clone(), timestamps, values, windows).map_err(|e| CliError::Data(e.to_string()))
}

fn score(cli: &Cli, a: &ScoreArgs) -> Result<(), CliError> {
    let rows = files::read_scores_csv(&a.scores)?;
    let ds = labeled_timeline(cli, a, &rows)?;
    let flags: Vec<bool> = rows.iter().map(|r| r.flag).collect();
    let counts = confusion(&flags, &ds.labels()).map_err(|e| CliError::Data(e.to_string()))?;
    println!("f1 {:.6}", f1_score(&counts));
    let profiles: Vec<NabProfile> = match a.profile {
        ProfileArg::All => NabProfile::ALL.to_vec(),
        ProfileArg::Standard => vec![NabProfile::by_name(ProfileName::Standard)],
        ProfileArg::RewardLowFp => vec![NabProfile::by_name(ProfileName::RewardLowFp)],
        ProfileArg::RewardLowFn => vec![NabProfile::by_name(ProfileName::RewardLowFn)],
    };
    for p in profiles {
        let s = nab_score(&ds, &flags, &p).map_err(|e| CliError::Data(e.to_string()))?;
        println!("{} {:.3}", p.name.as_str(), s);
    }
    Ok(())
}

fn require<'a, T>(v: &'a Option<T>, what: &str, kind: &str) -> Result<&'a T, CliError> {
    v.as_ref()
        .ok_or_else(|| CliError::Usage(format!("--{what} is required for kind {kind}")))
}

fn plot(cli: &Cli, a: &PlotArgs) -> Result<(), CliError> {
    let kind_name = match a.kind {
        PlotKindArg::Overlay => "overlay",
        PlotKindArg::Decomposition => "decomposition",
        PlotKindArg::Density => "density",
        PlotKindArg::SearchProgress => "search-progress",
    };
    let (kind, title, series) = match a.kind {
        PlotKindArg::Overlay => {
            let name = require(&a.dataset, "dataset", kind_name)?;
            let scores: &PathBuf = require(&a.scores, "scores", kind_name)?;
            let ds = load(cli, name)?;
            let rows = files::read_scores_csv(scores)?;
            if rows.iter().map(|r| r.timestamp).ne(ds.timestamps().iter().copied()) {
                return Err(CliError::Data(format!("scores timestamps do not align with dataset {name:?}")));
            }
            let score: Vec<f64> = rows.iter().map(|r| r.score).collect();
            let series = vec![
                Series::indexed("normalized value", &files::min_max(ds.values())),
                Series::indexed("outlier score", &score),
            ];
            (PlotKind::Overlay, format!("{name}: value and outlier score"), series)
        }
        PlotKindArg::Decomposition => {
            let name = require(&a.dataset, "dataset", kind_name)?;
            let ds = load(cli, name)?;
            let d = tsa::decompose(ds.values(), a.period).map_err(|e| CliError::Data(e.to_string()))?;
            let series = vec![
                Series::indexed("value", ds.values()),
                Series::indexed("trend", &d.trend),
                Series::indexed("seasonal", &d.seasonal),
                Series::indexed("residual", &d.residual),
            ];
            let title = format!("{name}: level {:.4}, period {}", d.level, d.period);
            (PlotKind::Decomposition, title, series)
        }
        PlotKindArg::Density => {
            let name = require(&a.dataset, "dataset", kind_name)?;
            let ds = load(cli, name)?;
            if a.bandwidth.is_some_and(|h| !(h > 0.0 && h.is_finite())) {
                return Err(CliError::Usage("--bandwidth must be positive".into()));
            }
            let c = tsa::kde(ds.values(), a.bandwidth).map_err(|e| CliError::Data(e.to_string()))?;
            let pts = c.grid.iter().copied().zip(c.density.iter().copied()).collect();
            let title = format!("{name}: value density (bandwidth {:.4})", c.bandwidth);
            (PlotKind::Density, title, vec![Series::new("density", pts)])
        }
        PlotKindArg::SearchProgress => {
            let path = require(&a.trace, "trace", kind_name)?;
            let trace = files::read_trace(path)?;
            if trace.is_empty() {
                return Err(CliError::Data(format!("{} has no trials", path.display())));
            }
            let mut best = f64::NEG_INFINITY;
            let incumbent = trace
                .iter()
                .map(|t| {
                    best = best.max(t.f1);
                    (t.iter as f64, best)
                })
                .collect();
            let mut series = vec![Series::new("best so far", incumbent)];
            let top5 = files::top5_progress(&trace);
            if !top5.is_empty() {
                series.push(Series::new("top-5 mean", top5));
            }
            (PlotKind::SearchProgress, "search progress".to_string(), series)
        }
    };
    let mut spec = PlotSpec::new(kind, a.title.clone().unwrap_or(title), series);
    spec.width = a.width;
    if let Some(h) = a.height {
        spec.height = h;
    }
    let svg = render_svg(&spec).map_err(|e| CliError::Usage(e.to_string()))?;
    write_file(&a.out, &svg)
}
