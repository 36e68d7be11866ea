//! Output files.
//!
//! * `per_query.csv` one row per lookup, every strategy;
//! * `<strategy>/per_epoch.csv` epochs of the observed nodes;
//! * `summary.json` latency aggregates per strategy;
//! * `paths.json` one probed lookup per strategy over its final tables;
//! * `epoch_latency.svg`, `latency_histogram.svg`.

use std::fs;
use std::path::{Path, PathBuf};

use serde::Serialize;

use crate::error::{Error, Result};
use crate::harness::metrics::{
    fill_improvements, EpochRow, MetricsStore, QueryRecord, StrategySummary, Summary,
};
use crate::harness::plot::{bin, histogram_plot, line_plot, Series};
use crate::harness::runner::{CompareReport, WindowHistogram};
use crate::network::{Location, Topology};

pub const PER_QUERY_HEADER: [&str; 8] = [
    "round",
    "source_id",
    "target_key",
    "strategy",
    "app",
    "latency",
    "hops",
    "success",
];
pub const PER_EPOCH_HEADER: [&str; 7] = [
    "node_id",
    "bucket",
    "epoch",
    "mean_latency",
    "action",
    "bucket_score",
    "delta",
];

const HISTOGRAM_BINS: usize = 40;

fn csv_err(path: &Path, source: csv::Error) -> Error {
    Error::Csv {
        path: path.to_path_buf(),
        source,
    }
}

fn write_csv<T: Serialize>(path: &Path, header: &[&str], rows: &[T]) -> Result<()> {
    let mut w = csv::WriterBuilder::new()
        .has_headers(false)
        .from_path(path)
        .map_err(|e| csv_err(path, e))?;
    w.write_record(header).map_err(|e| csv_err(path, e))?;
    for row in rows {
        w.serialize(row).map_err(|e| csv_err(path, e))?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

fn write_text(path: &Path, text: &str) -> Result<()> {
    fs::write(path, text).map_err(|e| Error::io(path, e))
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value)?;
    text.push('\n');
    write_text(path, &text)
}

fn ensure_dir(dir: &Path) -> Result<()> {
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))
}

/// Writes every file for `store` into `out` and returns the summary.
pub fn write_all(store: &MetricsStore, out: &Path) -> Result<Summary> {
    ensure_dir(out)?;
    let queries: Vec<&QueryRecord> = store.runs.iter().flat_map(|r| &r.queries).collect();
    write_csv(&out.join("per_query.csv"), &PER_QUERY_HEADER, &queries)?;
    for run in &store.runs {
        let dir = out.join(&run.strategy);
        ensure_dir(&dir)?;
        let rows: Vec<EpochRow> = run.epochs.iter().map(EpochRow::from).collect();
        write_csv(&dir.join("per_epoch.csv"), &PER_EPOCH_HEADER, &rows)?;
    }
    let summary = store.summary();
    write_json(&out.join("summary.json"), &summary)?;

    if let Some(&node) = store.observed.first() {
        let series: Vec<Series<'_>> = store
            .runs
            .iter()
            .map(|r| Series {
                name: &r.strategy,
                points: r
                    .epoch_curve(node, 1)
                    .into_iter()
                    .enumerate()
                    .map(|(i, y)| (i as f64, y))
                    .collect(),
            })
            .collect();
        let title = format!("1st bucket of node {}", store.observed_ids[0]);
        write_text(
            &out.join("epoch_latency.svg"),
            &line_plot(&title, "epoch", "mean latency", &series),
        )?;
    }
    let lat: Vec<&[f64]> = store.runs.iter().map(|r| r.latencies.as_slice()).collect();
    let (edges, counts) = bin(&lat, HISTOGRAM_BINS);
    let named: Vec<(&str, Vec<u64>)> = store
        .runs
        .iter()
        .map(|r| r.strategy.as_str())
        .zip(counts)
        .collect();
    write_text(
        &out.join("latency_histogram.svg"),
        &histogram_plot("lookup latency", "latency", &edges, &named),
    )?;
    Ok(summary)
}

#[derive(Debug, Serialize)]
struct PathHop {
    node_id: u64,
    location: String,
    adversarial: bool,
    query_at: f64,
    response_at: f64,
}

#[derive(Debug, Serialize)]
struct PathDump {
    strategy: String,
    source_id: u64,
    target_key: u64,
    latency: f64,
    success: bool,
    paths: Vec<Vec<PathHop>>,
}

fn describe(topo: &Topology, node: usize) -> String {
    match topo.nodes[node].location {
        Location::Point { x, y } => format!("({x:.0}, {y:.0})"),
        Location::City(_) => topo.city_name(node).unwrap_or("?").to_string(),
    }
}

/// `paths.json`: every probed path, hop by hop.
pub fn write_paths(store: &MetricsStore, topo: &Topology, out: &Path) -> Result<PathBuf> {
    let dumps: Vec<PathDump> = store
        .runs
        .iter()
        .filter_map(|run| run.sample_path.as_ref().map(|r| (run, r)))
        .map(|(run, r)| PathDump {
            strategy: run.strategy.clone(),
            source_id: r.initiator.value(),
            target_key: r.target.value(),
            latency: r.latency,
            success: r.success,
            paths: r
                .paths
                .iter()
                .map(|p| {
                    p.hops
                        .iter()
                        .map(|h| PathHop {
                            node_id: topo.nodes[h.node].id.value(),
                            location: describe(topo, h.node),
                            adversarial: topo.nodes[h.node].adversarial,
                            query_at: h.query_at,
                            response_at: h.response_at,
                        })
                        .collect()
                })
                .collect(),
        })
        .collect();
    let path = out.join("paths.json");
    write_json(&path, &dumps)?;
    Ok(path)
}

/// `before_after.json` and `before_after.svg`.
pub fn write_histograms(hists: &[WindowHistogram], out: &Path) -> Result<()> {
    ensure_dir(out)?;
    write_json(&out.join("before_after.json"), &hists)?;
    let all: Vec<&[f64]> = hists
        .iter()
        .flat_map(|h| [h.first.as_slice(), h.last.as_slice()])
        .collect();
    let (edges, counts) = bin(&all, HISTOGRAM_BINS);
    let names: Vec<String> = hists
        .iter()
        .flat_map(|h| {
            [
                format!("{} first", h.strategy),
                format!("{} last", h.strategy),
            ]
        })
        .collect();
    let series: Vec<(&str, Vec<u64>)> = names.iter().map(String::as_str).zip(counts).collect();
    write_text(
        &out.join("before_after.svg"),
        &histogram_plot("first vs last window", "latency", &edges, &series),
    )
}

pub fn write_compare(report: &CompareReport, out: &Path) -> Result<()> {
    ensure_dir(out)?;
    write_json(&out.join("compare.json"), report)
}

pub fn read_per_query(path: &Path) -> Result<Vec<QueryRecord>> {
    let mut r = csv::Reader::from_path(path).map_err(|e| csv_err(path, e))?;
    r.deserialize()
        .collect::<std::result::Result<Vec<QueryRecord>, _>>()
        .map_err(|e| csv_err(path, e))
}

/// Recomputes the per-strategy aggregates of `summary.json` from query
/// rows (observed-node curves excluded).
pub fn summarize_queries(records: &[QueryRecord]) -> Vec<StrategySummary> {
    let mut order: Vec<&str> = Vec::new();
    for r in records {
        if !order.contains(&r.strategy.as_str()) {
            order.push(&r.strategy);
        }
    }
    let mut out: Vec<StrategySummary> = order
        .iter()
        .map(|&name| {
            let rows: Vec<&QueryRecord> = records.iter().filter(|r| r.strategy == name).collect();
            let lat: Vec<f64> = rows.iter().map(|r| r.latency).collect();
            let ok = rows.iter().filter(|r| r.success).count() as u64;
            StrategySummary::from_latencies(name, &lat, ok)
        })
        .collect();
    fill_improvements(&mut out);
    out
}
