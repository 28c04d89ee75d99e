//! The three commands behind the binary: simulate, analyze and report.
//!
//! Each command writes its outputs plus a `manifest.json` listing the
//! resolved parameters, a hash of the resolved config, and a SHA-256 of every
//! input and output file. Apart from the manifest timestamps, repeated runs
//! produce byte-identical files.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};
use std::time::{SystemTime, UNIX_EPOCH};

use serde::{Deserialize, Serialize};

use crate::analysis::{analyze_blocks, blocks_from_log, AnalysisOptions, Baseline, BlockData};
use crate::config::{load_config, sha256_hex, to_toml};
use crate::dataset::DatasetLayout;
use crate::error::{Error, Result};
use crate::metrics::report::{read_rows, write_rows};
use crate::metrics::{paired_t_test, MetricRow, MetricsReport, TTestRow, MEAN_BLOCK};
use crate::model::Side;
use crate::plant::{SimConfig, SimLog, Simulation};

pub const LOG_FILE: &str = "log.csv";
pub const CONFIG_ECHO_FILE: &str = "config.resolved.toml";
pub const AUDIT_FILE: &str = "energy_audit.json";
pub const MANIFEST_FILE: &str = "manifest.json";
pub const METRICS_FILE: &str = "metrics.csv";
pub const STRIDES_FILE: &str = "strides.csv";
pub const SUMMARY_FILE: &str = "summary.md";
pub const TTEST_FILE: &str = "ttests.csv";

/// Plot-ready panels: file name and the metric-name prefixes it collects.
pub const PANELS: [(&str, &[&str]); 4] = [
    ("panel_deviation.csv", &["spatial_rmse_", "temporal_lag_"]),
    ("panel_spatial.csv", &["workspace_area", "step_length", "step_height"]),
    ("panel_effort.csv", &["hr_percent_max", "rpe_borg"]),
    ("panel_activation.csv", &["activation_"]),
];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FileEntry {
    pub path: String,
    pub sha256: String,
    pub bytes: u64,
}

impl FileEntry {
    pub fn of(path: &Path, shown_as: &str) -> Result<Self> {
        let data = fs::read(path).map_err(|e| Error::io(path, e))?;
        Ok(FileEntry {
            path: shown_as.into(),
            sha256: sha256_hex(&data),
            bytes: data.len() as u64,
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub command: String,
    pub tool_version: String,
    /// SHA-256 of the resolved config text (simulate) or of the analysis
    /// options (analyze, report).
    pub config_hash: String,
    pub seed: Option<u64>,
    /// Unix seconds
    pub started: u64,
    pub finished: u64,
    /// Every effective parameter, defaults included.
    pub parameters: serde_json::Value,
    pub inputs: Vec<FileEntry>,
    pub outputs: Vec<FileEntry>,
}

impl RunManifest {
    fn new(command: &str, config_hash: String, seed: Option<u64>, parameters: serde_json::Value) -> Self {
        RunManifest {
            command: command.into(),
            tool_version: env!("CARGO_PKG_VERSION").into(),
            config_hash,
            seed,
            started: unix_now(),
            finished: 0,
            parameters,
            inputs: Vec::new(),
            outputs: Vec::new(),
        }
    }

    fn finish(mut self, out_dir: &Path, outputs: &[&str]) -> Result<Self> {
        for name in outputs {
            self.outputs.push(FileEntry::of(&out_dir.join(name), name)?);
        }
        self.finished = unix_now();
        let path = out_dir.join(MANIFEST_FILE);
        let text = serde_json::to_string_pretty(&self)?;
        fs::write(&path, text + "\n").map_err(|e| Error::io(&path, e))?;
        Ok(self)
    }
}

fn unix_now() -> u64 {
    SystemTime::now().duration_since(UNIX_EPOCH).map_or(0, |d| d.as_secs())
}

fn create_dir(dir: &Path) -> Result<()> {
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))
}

fn write_text(path: &Path, text: &str) -> Result<()> {
    fs::write(path, text).map_err(|e| Error::io(path, e))
}

/// Simulate a config file. Writes the log, the resolved config echo, the
/// energy audit and the manifest.
pub fn cmd_simulate(
    config_path: &Path,
    out_dir: &Path,
    overrides: &[String],
    seed: Option<u64>,
) -> Result<RunManifest> {
    let config = load_config(config_path, overrides, seed)?;
    simulate_config(config, out_dir, Some(config_path))
}

/// As [`cmd_simulate`] for an already resolved config.
pub fn simulate_config(config: SimConfig, out_dir: &Path, config_path: Option<&Path>) -> Result<RunManifest> {
    let echo = to_toml(&config)?;
    let mut manifest = RunManifest::new(
        "simulate",
        sha256_hex(echo.as_bytes()),
        Some(config.seed),
        serde_json::to_value(&config)?,
    );
    if let Some(p) = config_path {
        manifest.inputs.push(FileEntry::of(p, &p.display().to_string())?);
    }
    let mut sim = Simulation::new(config)?;
    sim.run_to_end()?;
    let (log, audit) = sim.into_parts();

    create_dir(out_dir)?;
    write_text(&out_dir.join(CONFIG_ECHO_FILE), &echo)?;
    log.write_csv(&out_dir.join(LOG_FILE))?;
    let audit_json = serde_json::json!({
        "initial_energy": audit.initial_energy,
        "final_energy": audit.final_energy,
        "human_work": audit.human_work,
        "motor_work": audit.motor_work,
        "injected_work": audit.injected_work,
        "damper_dissipation": audit.damper_dissipation,
        "residual": audit.residual(),
        "relative_residual": audit.relative_residual(),
    });
    write_text(
        &out_dir.join(AUDIT_FILE),
        &(serde_json::to_string_pretty(&audit_json)? + "\n"),
    )?;
    manifest.finish(out_dir, &[CONFIG_ECHO_FILE, LOG_FILE, AUDIT_FILE])
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct AnalyzeOptions {
    pub analysis: AnalysisOptions,
    /// Free-walking input to normalise activation against.
    pub baseline: Option<PathBuf>,
    /// Labels for simulation logs; defaults are the schedule's patient id
    /// (or `sim`) and `sim`.
    pub patient: Option<String>,
    pub condition: Option<String>,
}

/// What `--in` points at.
#[derive(Debug, Clone, PartialEq)]
pub enum AnalysisInput {
    /// A simulation log, with the resolved config that produced it if found.
    Log {
        log: PathBuf,
        config: Option<PathBuf>,
    },
    Dataset(PathBuf),
}

impl AnalysisInput {
    pub fn detect(path: &Path) -> Result<Self> {
        if path.is_dir() {
            if DatasetLayout::is_dataset(path) {
                return Ok(AnalysisInput::Dataset(path.to_owned()));
            }
            let log = path.join(LOG_FILE);
            if log.is_file() {
                let config = Some(path.join(CONFIG_ECHO_FILE)).filter(|c| c.is_file());
                return Ok(AnalysisInput::Log { log, config });
            }
            return Err(Error::Validation(format!(
                "{}: neither a dataset ({}) nor a simulation output ({LOG_FILE})",
                path.display(),
                crate::dataset::MANIFEST_FILE
            )));
        }
        if path.is_file() {
            let config = path.parent().map(|d| d.join(CONFIG_ECHO_FILE)).filter(|c| c.is_file());
            return Ok(AnalysisInput::Log {
                log: path.to_owned(),
                config,
            });
        }
        Err(Error::Validation(format!(
            "{}: no such file or directory",
            path.display()
        )))
    }

    fn files(&self) -> Vec<PathBuf> {
        match self {
            AnalysisInput::Log { log, config } => std::iter::once(log.clone()).chain(config.clone()).collect(),
            AnalysisInput::Dataset(root) => vec![root.join(crate::dataset::MANIFEST_FILE)],
        }
    }

    pub fn load(&self, opts: &AnalyzeOptions) -> Result<Vec<BlockData>> {
        match self {
            AnalysisInput::Dataset(root) => DatasetLayout::open(root)?.load_blocks(),
            AnalysisInput::Log { log, config } => {
                let (paretic, schedule_id) = match config {
                    Some(c) => {
                        let cfg = load_config(c, &[], None)?;
                        (cfg.patient.paretic_side, cfg.schedule.patient_id.clone())
                    }
                    None => {
                        log::warn!("no {CONFIG_ECHO_FILE} next to the log; assuming a right paretic side");
                        (Side::Right, None)
                    }
                };
                let patient = opts.patient.clone().or(schedule_id).unwrap_or_else(|| "sim".into());
                let condition = opts.condition.clone().unwrap_or_else(|| "sim".into());
                let log = SimLog::read_csv(log)?;
                blocks_from_log(&log, &patient, &condition, paretic)
            }
        }
    }
}

/// Per-block, per-leg metric tables for a simulation log or a dataset.
pub fn cmd_analyze(input: &Path, out_dir: &Path, opts: &AnalyzeOptions) -> Result<RunManifest> {
    let source = AnalysisInput::detect(input)?;
    let options_json = serde_json::to_value(opts)?;
    let mut manifest = RunManifest::new(
        "analyze",
        sha256_hex(serde_json::to_string(&options_json)?.as_bytes()),
        None,
        options_json,
    );
    for f in source.files() {
        manifest.inputs.push(FileEntry::of(&f, &f.display().to_string())?);
    }
    let blocks = source.load(opts)?;
    let baseline = match &opts.baseline {
        Some(path) => {
            let b = AnalysisInput::detect(path)?;
            for f in b.files() {
                manifest.inputs.push(FileEntry::of(&f, &f.display().to_string())?);
            }
            // A simulated baseline takes the analysed run's labels so that
            // the two logs pair up block by block.
            let mut labels = opts.clone();
            if let (AnalysisInput::Log { .. }, Some(first)) = (&b, blocks.first()) {
                labels.patient = Some(first.patient.clone());
                labels.condition = Some(first.condition.clone());
            }
            Some(Baseline::from_blocks(&b.load(&labels)?, opts.analysis.edge_trim_s))
        }
        None => None,
    };
    let analysis = analyze_blocks(&blocks, &opts.analysis, baseline.as_ref())?;
    create_dir(out_dir)?;
    analysis.report.write_csv(&out_dir.join(METRICS_FILE))?;
    write_rows(&out_dir.join(STRIDES_FILE), &analysis.strides)?;
    manifest.finish(out_dir, &[METRICS_FILE, STRIDES_FILE])
}

/// Every `metrics*.csv` table in `dir`, concatenated in file-name order.
pub fn read_metrics_dir(dir: &Path) -> Result<(MetricsReport, Vec<PathBuf>)> {
    let mut files = Vec::new();
    for entry in fs::read_dir(dir).map_err(|e| Error::io(dir, e))? {
        let path = entry.map_err(|e| Error::io(dir, e))?.path();
        let name = path.file_name().and_then(|n| n.to_str()).unwrap_or_default();
        if path.is_file() && name.starts_with("metrics") && name.ends_with(".csv") {
            files.push(path);
        }
    }
    files.sort();
    if files.is_empty() {
        return Err(Error::Validation(format!("{}: no metrics*.csv files", dir.display())));
    }
    let mut report = MetricsReport::default();
    for f in &files {
        report.rows.extend(read_rows::<MetricRow>(f)?);
    }
    if report.rows.is_empty() {
        return Err(Error::Validation(format!(
            "{}: metrics tables are empty",
            dir.display()
        )));
    }
    Ok((report, files))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
struct PanelRow<'a> {
    patient: &'a str,
    block: &'a str,
    condition: &'a str,
    leg: &'a str,
    metric: &'a str,
    value: f64,
    unit: &'a str,
}

/// Paired tests between every pair of conditions, pairing patients on
/// their cross-block means. Metrics with fewer than two pairs are skipped.
pub fn condition_ttests(report: &MetricsReport) -> Result<(Vec<TTestRow>, Vec<String>)> {
    let means = report.means_by_condition();
    let conds: Vec<&String> = means.keys().collect();
    let mut rows = Vec::new();
    let mut skipped = Vec::new();
    for (ia, ca) in conds.iter().enumerate() {
        for cb in &conds[ia + 1..] {
            let (ma, mb) = (&means[*ca], &means[*cb]);
            let mut pairs: BTreeMap<(String, String), (Vec<f64>, Vec<f64>)> = BTreeMap::new();
            for ((metric, leg, patient), va) in ma {
                if let Some(vb) = mb.get(&(metric.clone(), leg.clone(), patient.clone())) {
                    let e = pairs.entry((metric.clone(), leg.clone())).or_default();
                    e.0.push(*va);
                    e.1.push(*vb);
                }
            }
            for ((metric, leg), (a, b)) in pairs {
                if a.len() < 2 {
                    skipped.push(format!("{metric} ({leg}): {} pair", a.len()));
                    continue;
                }
                let r = paired_t_test(&a, &b)?;
                rows.push(TTestRow::new(&metric, &leg, ca, cb, &r));
            }
        }
    }
    Ok((rows, skipped))
}

/// Summary document and plot-ready tables from a directory of metrics.
pub fn cmd_report(metrics_dir: &Path, out_dir: &Path) -> Result<RunManifest> {
    let (report, files) = read_metrics_dir(metrics_dir)?;
    let mut manifest = RunManifest::new("report", sha256_hex(b"report"), None, serde_json::Value::Null);
    for f in &files {
        manifest.inputs.push(FileEntry::of(f, &f.display().to_string())?);
    }
    create_dir(out_dir)?;
    let mut outputs: Vec<&str> = vec![SUMMARY_FILE];

    for (file, prefixes) in PANELS {
        let rows: Vec<PanelRow> = report
            .rows
            .iter()
            .filter(|r| prefixes.iter().any(|p| r.metric.starts_with(p)))
            .map(|r| PanelRow {
                patient: &r.patient,
                block: &r.block,
                condition: &r.condition,
                leg: &r.leg,
                metric: &r.metric,
                value: r.value,
                unit: &r.unit,
            })
            .collect();
        write_panel(&out_dir.join(file), &rows)?;
        outputs.push(file);
    }

    let conditions = report.conditions();
    let tests = if conditions.len() >= 2 {
        let (rows, skipped) = condition_ttests(&report)?;
        write_rows(&out_dir.join(TTEST_FILE), &rows)?;
        outputs.push(TTEST_FILE);
        Some((rows, skipped))
    } else {
        let stale = out_dir.join(TTEST_FILE);
        if stale.is_file() {
            fs::remove_file(&stale).map_err(|e| Error::io(&stale, e))?;
        }
        None
    };

    write_text(
        &out_dir.join(SUMMARY_FILE),
        &summary(&report, &conditions, tests.as_ref()),
    )?;
    outputs.sort();
    manifest.finish(out_dir, &outputs)
}

fn write_panel(path: &Path, rows: &[PanelRow]) -> Result<()> {
    if rows.is_empty() {
        return write_text(path, "patient,block,condition,leg,metric,value,unit\n");
    }
    write_rows(path, rows)
}

fn summary(report: &MetricsReport, conditions: &[String], tests: Option<&(Vec<TTestRow>, Vec<String>)>) -> String {
    let mut s = String::new();
    let _ = writeln!(s, "# Training outcome summary\n");
    let patients: std::collections::BTreeSet<&str> = report.rows.iter().map(|r| r.patient.as_str()).collect();
    let _ = writeln!(
        s,
        "Patients: {}. Conditions: {}.\n",
        patients.into_iter().collect::<Vec<_>>().join(", "),
        conditions.join(", ")
    );

    // metric, leg, unit -> condition -> values over patients, per block label
    type Cell = BTreeMap<String, Vec<f64>>;
    let mut table: BTreeMap<(String, String, String), BTreeMap<String, Cell>> = BTreeMap::new();
    for r in &report.rows {
        table
            .entry((r.metric.clone(), r.leg.clone(), r.unit.clone()))
            .or_default()
            .entry(r.condition.clone())
            .or_default()
            .entry(r.block.clone())
            .or_default()
            .push(r.value);
    }
    let _ = writeln!(s, "## Block means\n");
    let _ = writeln!(s, "Values are means over patients; `mean` is the cross-block mean.\n");
    let _ = writeln!(s, "| metric | leg | unit | condition | blocks | mean |");
    let _ = writeln!(s, "|---|---|---|---|---|---|");
    let avg = |v: &[f64]| v.iter().sum::<f64>() / v.len() as f64;
    for ((metric, leg, unit), by_cond) in &table {
        for (cond, by_block) in by_cond {
            let blocks: Vec<String> = by_block
                .iter()
                .filter(|(b, _)| b.as_str() != MEAN_BLOCK)
                .map(|(b, v)| format!("T{b} {:.3}", avg(v)))
                .collect();
            let mean = by_block
                .get(MEAN_BLOCK)
                .map_or("-".into(), |v| format!("{:.3}", avg(v)));
            let _ = writeln!(
                s,
                "| {metric} | {leg} | {unit} | {cond} | {} | {mean} |",
                blocks.join(", ")
            );
        }
    }
    let _ = writeln!(s, "\n## Paired t-tests\n");
    match tests {
        None => {
            let _ = writeln!(
                s,
                "Omitted: the metrics contain a single condition, so there is nothing to compare."
            );
        }
        Some((rows, skipped)) => {
            let _ = writeln!(
                s,
                "Two-sided paired t-tests on per-patient cross-block means (a − b).\n"
            );
            let _ = writeln!(s, "| metric | leg | a | b | n | mean diff | t | df | p |");
            let _ = writeln!(s, "|---|---|---|---|---|---|---|---|---|");
            for r in rows {
                let _ = writeln!(
                    s,
                    "| {} | {} | {} | {} | {} | {:.4} | {:.4}{} | {} | {:.4} |",
                    r.metric,
                    r.leg,
                    r.condition_a,
                    r.condition_b,
                    r.n_pairs,
                    r.mean_difference,
                    r.t,
                    if r.degenerate { " (zero variance)" } else { "" },
                    r.df,
                    r.p
                );
            }
            if !skipped.is_empty() {
                let _ = writeln!(
                    s,
                    "\nNot tested (fewer than two paired patients): {}.",
                    skipped.join("; ")
                );
            }
        }
    }
    s
}

#[cfg(test)]
mod tests {
    use super::*;

    fn report_with(conditions: &[&str], patients: &[&str]) -> MetricsReport {
        let mut r = MetricsReport::default();
        for (ci, c) in conditions.iter().enumerate() {
            for (pi, p) in patients.iter().enumerate() {
                let v = 100.0 + 10.0 * ci as f64 + pi as f64 * (1.0 + ci as f64);
                r.push(p, c, 1, "paretic", "workspace_area", v, "cm2");
                r.push(p, c, MEAN_BLOCK, "paretic", "workspace_area", v, "cm2");
            }
        }
        r
    }

    #[test]
    fn two_conditions_get_tests() {
        let dir = tempfile::tempdir().unwrap();
        report_with(&["CMT", "TEPI"], &["U1", "U2", "U3"])
            .write_csv(&dir.path().join(METRICS_FILE))
            .unwrap();
        let out = dir.path().join("out");
        cmd_report(dir.path(), &out).unwrap();
        let tests: Vec<TTestRow> = read_rows(&out.join(TTEST_FILE)).unwrap();
        assert_eq!(tests.len(), 1);
        assert_eq!(tests[0].df, 2);
        let text = fs::read_to_string(out.join(SUMMARY_FILE)).unwrap();
        assert!(text.contains("| workspace_area | paretic | CMT | TEPI | 3 |"));
    }

    #[test]
    fn single_condition_omits_tests() {
        let dir = tempfile::tempdir().unwrap();
        report_with(&["TEPI"], &["U1", "U2"])
            .write_csv(&dir.path().join(METRICS_FILE))
            .unwrap();
        let out = dir.path().join("out");
        cmd_report(dir.path(), &out).unwrap();
        assert!(!out.join(TTEST_FILE).exists());
        let text = fs::read_to_string(out.join(SUMMARY_FILE)).unwrap();
        assert!(text.contains("Omitted"));
    }

    #[test]
    fn empty_dir_is_an_error() {
        let dir = tempfile::tempdir().unwrap();
        let err = cmd_report(dir.path(), &dir.path().join("out")).unwrap_err();
        assert_eq!(err.exit_code(), 2);
    }
}
