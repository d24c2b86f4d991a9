//! Benchmark suite generation: every (board, trigger, payload) combination
//! becomes one verified benchmark directory. Jobs are independent — seeds
//! derive from stable keys, outputs go to disjoint directories — so the tree
//! is identical whether jobs run on one thread or a pool.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::insert::{
    run_pipeline_on, InsertionConfig, ManifestFile, PipelineOutput, MANIFEST_SCHEMA_VERSION,
};
use crate::netlist::{parse_netlist, Netlist};
use crate::seed;
use crate::templates::{TemplateError, TemplateLibrary};

pub const SUITE_SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq)]
pub enum PairSelection {
    All,
    List(Vec<(String, String)>),
}

#[derive(Debug, Clone)]
pub struct SuiteOptions {
    pub pairs: PairSelection,
    pub out_dir: PathBuf,
    pub base_config: InsertionConfig,
    pub suite_seed: u64,
    /// Run jobs on the rayon pool when the `parallel` feature is enabled.
    pub parallel: bool,
}

#[derive(Debug, Error)]
pub enum SuiteError {
    #[error("{path}: {message}")]
    Io { path: String, message: String },
    #[error("board `{path}` does not parse: {message}")]
    Board { path: String, message: String },
    #[error("duplicate board name `{0}`: board file stems must be unique")]
    DuplicateBoardName(String),
    #[error(transparent)]
    Template(#[from] TemplateError),
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct BoardEntry {
    pub name: String,
    pub source_path: String,
    pub component_count: usize,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SkipReason {
    pub code: String,
    pub message: String,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct BenchmarkEntry {
    pub board: String,
    pub trigger_id: String,
    pub payload_id: String,
    /// Benchmark directory relative to the suite root.
    pub path: String,
    pub status: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub reason: Option<SkipReason>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub verification: Option<String>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Totals {
    pub attempted: usize,
    pub emitted: usize,
    pub skipped: usize,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SuiteManifest {
    pub schema_version: u32,
    pub suite_seed: u64,
    /// Wall-clock stamp; excluded from the determinism contract.
    pub generated_at: u64,
    pub boards: Vec<BoardEntry>,
    pub benchmarks: Vec<BenchmarkEntry>,
    pub totals: Totals,
}

struct Job {
    board_index: usize,
    board_name: String,
    trigger_id: String,
    payload_id: String,
    config: InsertionConfig,
    rel_path: String,
}

enum JobOutcome {
    Emitted(Box<PipelineOutput>),
    Skipped(SkipReason),
}

fn io_err(path: &Path, e: impl std::fmt::Display) -> SuiteError {
    SuiteError::Io { path: path.display().to_string(), message: e.to_string() }
}

/// Resolves `pairs` against the template library, rejecting unknown ids.
pub fn resolve_pairs(
    library: &TemplateLibrary,
    pairs: &PairSelection,
) -> Result<Vec<(String, String)>, SuiteError> {
    match pairs {
        PairSelection::All => Ok(library.all_pairs()),
        PairSelection::List(list) => {
            for (trigger, payload) in list {
                library.get(trigger)?;
                library.get(payload)?;
            }
            Ok(list.clone())
        }
    }
}

fn run_job(netlist: &Netlist, job: &Job, library: &TemplateLibrary) -> JobOutcome {
    match run_pipeline_on(netlist, &job.config, None, library) {
        Err(e) => JobOutcome::Skipped(SkipReason { code: e.stage.to_string(), message: e.message }),
        Ok(output) => {
            if output.report.overall {
                JobOutcome::Emitted(Box::new(output))
            } else {
                let failing: Vec<String> =
                    output.report.failures().map(|c| c.id.clone()).collect();
                JobOutcome::Skipped(SkipReason {
                    code: "verification_failed".to_string(),
                    message: format!("failed checks: {}", failing.join(", ")),
                })
            }
        }
    }
}

fn write_benchmark(dir: &Path, output: &PipelineOutput) -> Result<(), SuiteError> {
    std::fs::create_dir_all(dir).map_err(|e| io_err(dir, e))?;
    let design = dir.join("design.net");
    std::fs::write(&design, &output.netlist_text).map_err(|e| io_err(&design, e))?;
    let manifest = ManifestFile {
        schema_version: MANIFEST_SCHEMA_VERSION,
        trojans: output.manifests.clone(),
    };
    let manifest_path = dir.join("manifest.json");
    let manifest_json =
        serde_json::to_string_pretty(&manifest).expect("manifest serialization is infallible");
    std::fs::write(&manifest_path, manifest_json).map_err(|e| io_err(&manifest_path, e))?;
    let verify_path = dir.join("verify.json");
    let verify_json =
        serde_json::to_string_pretty(&output.report).expect("report serialization is infallible");
    std::fs::write(&verify_path, verify_json).map_err(|e| io_err(&verify_path, e))?;
    Ok(())
}

/// Generates one benchmark per (board, pair) under
/// `<out>/<board>/<trigger>_<payload>/`. Failed insertions are recorded as
/// skipped entries; only I/O failures abort the suite.
pub fn generate_suite(boards: &[PathBuf], options: &SuiteOptions) -> Result<SuiteManifest, SuiteError> {
    let library = TemplateLibrary::builtin();
    let pairs = resolve_pairs(&library, &options.pairs)?;

    let mut board_entries = Vec::with_capacity(boards.len());
    let mut netlists = Vec::with_capacity(boards.len());
    let mut seen = std::collections::HashSet::new();
    for path in boards {
        let text = std::fs::read_to_string(path).map_err(|e| io_err(path, e))?;
        let netlist = parse_netlist(&text)
            .map_err(|e| SuiteError::Board { path: path.display().to_string(), message: e.to_string() })?;
        let name = path
            .file_stem()
            .map(|s| s.to_string_lossy().into_owned())
            .unwrap_or_else(|| "board".to_string());
        if !seen.insert(name.clone()) {
            return Err(SuiteError::DuplicateBoardName(name));
        }
        board_entries.push(BoardEntry {
            name: name.clone(),
            source_path: path.display().to_string(),
            component_count: netlist.components.len(),
        });
        netlists.push((name, netlist));
    }

    let mut jobs = Vec::with_capacity(netlists.len() * pairs.len());
    for (board_index, (board_name, _)) in netlists.iter().enumerate() {
        for (trigger_id, payload_id) in &pairs {
            // Seed from stable keys, never from job position.
            let bench_seed = seed::mix(
                seed::mix(options.suite_seed, seed::fnv1a(board_name)),
                seed::fnv1a(&format!("{trigger_id}:{payload_id}")),
            );
            let mut config = options.base_config.clone();
            config.trigger_id = Some(trigger_id.clone());
            config.payload_id = Some(payload_id.clone());
            config.policy.seed = bench_seed;
            jobs.push(Job {
                board_index,
                board_name: board_name.clone(),
                trigger_id: trigger_id.clone(),
                payload_id: payload_id.clone(),
                config,
                rel_path: format!("{board_name}/{trigger_id}_{payload_id}"),
            });
        }
    }

    let execute = |job: &Job| -> Result<BenchmarkEntry, SuiteError> {
        let (_, netlist) = &netlists[job.board_index];
        match run_job(netlist, job, &library) {
            JobOutcome::Skipped(reason) => Ok(BenchmarkEntry {
                board: job.board_name.clone(),
                trigger_id: job.trigger_id.clone(),
                payload_id: job.payload_id.clone(),
                path: job.rel_path.clone(),
                status: "skipped".to_string(),
                reason: Some(reason),
                verification: None,
            }),
            JobOutcome::Emitted(output) => {
                write_benchmark(&options.out_dir.join(&job.rel_path), &output)?;
                Ok(BenchmarkEntry {
                    board: job.board_name.clone(),
                    trigger_id: job.trigger_id.clone(),
                    payload_id: job.payload_id.clone(),
                    path: job.rel_path.clone(),
                    status: "emitted".to_string(),
                    reason: None,
                    verification: Some("pass".to_string()),
                })
            }
        }
    };

    #[cfg(feature = "parallel")]
    let results: Vec<Result<BenchmarkEntry, SuiteError>> = if options.parallel {
        use rayon::prelude::*;
        jobs.par_iter().map(execute).collect()
    } else {
        jobs.iter().map(execute).collect()
    };
    #[cfg(not(feature = "parallel"))]
    let results: Vec<Result<BenchmarkEntry, SuiteError>> = jobs.iter().map(execute).collect();

    let mut benchmarks = Vec::with_capacity(results.len());
    for result in results {
        benchmarks.push(result?);
    }

    let emitted = benchmarks.iter().filter(|b| b.status == "emitted").count();
    let totals = Totals { attempted: benchmarks.len(), emitted, skipped: benchmarks.len() - emitted };
    let manifest = SuiteManifest {
        schema_version: SUITE_SCHEMA_VERSION,
        suite_seed: options.suite_seed,
        generated_at: std::time::SystemTime::now()
            .duration_since(std::time::UNIX_EPOCH)
            .map(|d| d.as_secs())
            .unwrap_or(0),
        boards: board_entries,
        benchmarks,
        totals,
    };

    std::fs::create_dir_all(&options.out_dir).map_err(|e| io_err(&options.out_dir, e))?;
    let suite_path = options.out_dir.join("suite.json");
    let json = serde_json::to_string_pretty(&manifest).expect("suite serialization is infallible");
    std::fs::write(&suite_path, json).map_err(|e| io_err(&suite_path, e))?;

    Ok(manifest)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::boardgen::synthetic_board;
    use crate::netlist::write_netlist;

    fn write_boards(dir: &Path, count: usize) -> Vec<PathBuf> {
        (0..count)
            .map(|i| {
                let name = format!("board{i}");
                let path = dir.join(format!("{name}.net"));
                std::fs::write(&path, write_netlist(&synthetic_board(&name, 34, i as u64)))
                    .unwrap();
                path
            })
            .collect()
    }

    fn options(out: &Path, pairs: PairSelection, seed_value: u64) -> SuiteOptions {
        SuiteOptions {
            pairs,
            out_dir: out.to_path_buf(),
            base_config: InsertionConfig::default(),
            suite_seed: seed_value,
            parallel: false,
        }
    }

    #[test]
    fn single_pair_single_board_layout() {
        let tmp = tempfile::tempdir().unwrap();
        let boards = write_boards(tmp.path(), 1);
        let out = tmp.path().join("suite");
        let pairs = PairSelection::List(vec![("T1".to_string(), "P1".to_string())]);
        let manifest = generate_suite(&boards, &options(&out, pairs, 1)).unwrap();
        assert_eq!(manifest.totals.attempted, 1);
        assert_eq!(manifest.totals.emitted, 1);
        let bench = out.join("board0/T1_P1");
        assert!(bench.join("design.net").is_file());
        assert!(bench.join("manifest.json").is_file());
        assert!(bench.join("verify.json").is_file());
        assert!(out.join("suite.json").is_file());

        let manifest_text = std::fs::read_to_string(bench.join("manifest.json")).unwrap();
        let parsed: ManifestFile = serde_json::from_str(&manifest_text).unwrap();
        assert_eq!(parsed.schema_version, MANIFEST_SCHEMA_VERSION);
        assert_eq!(parsed.trojans.len(), 1);
    }

    #[test]
    fn all_pairs_times_boards() {
        let tmp = tempfile::tempdir().unwrap();
        let boards = write_boards(tmp.path(), 2);
        let out = tmp.path().join("suite");
        let manifest = generate_suite(&boards, &options(&out, PairSelection::All, 5)).unwrap();
        assert_eq!(manifest.totals.attempted, 30);
        assert_eq!(manifest.totals.emitted, 30);
        assert_eq!(manifest.totals.skipped, 0);
        assert!(manifest.benchmarks.iter().all(|b| b.verification.as_deref() == Some("pass")));
    }

    #[test]
    fn unknown_pair_id_is_an_error() {
        let tmp = tempfile::tempdir().unwrap();
        let boards = write_boards(tmp.path(), 1);
        let out = tmp.path().join("suite");
        let pairs = PairSelection::List(vec![("T9".to_string(), "P1".to_string())]);
        match generate_suite(&boards, &options(&out, pairs, 1)) {
            Err(SuiteError::Template(TemplateError::UnknownTemplate(id))) => assert_eq!(id, "T9"),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn unsatisfiable_rarity_is_recorded_as_skipped() {
        let tmp = tempfile::tempdir().unwrap();
        let boards = write_boards(tmp.path(), 1);
        let out = tmp.path().join("suite");
        let pairs = PairSelection::List(vec![("T1".to_string(), "P1".to_string())]);
        let mut opts = options(&out, pairs, 1);
        // An explicit victim that does not exist forces a selection error.
        opts.base_config.victim = Some("/NO_SUCH_NET".to_string());
        let manifest = generate_suite(&boards, &opts).unwrap();
        assert_eq!(manifest.totals.skipped, 1);
        let entry = &manifest.benchmarks[0];
        assert_eq!(entry.status, "skipped");
        let reason = entry.reason.as_ref().unwrap();
        assert_eq!(reason.code, "insert");
        assert!(reason.message.contains("/NO_SUCH_NET"));
        assert!(!out.join("board0/T1_P1/design.net").exists(), "nothing written on failure");
        assert_eq!(manifest.totals.attempted, manifest.totals.emitted + manifest.totals.skipped);
    }

    fn tree_digest(root: &Path) -> Vec<(String, Vec<u8>)> {
        let mut files = Vec::new();
        let mut stack = vec![root.to_path_buf()];
        while let Some(dir) = stack.pop() {
            for entry in std::fs::read_dir(&dir).unwrap() {
                let path = entry.unwrap().path();
                if path.is_dir() {
                    stack.push(path);
                } else {
                    let rel = path.strip_prefix(root).unwrap().display().to_string();
                    let mut bytes = std::fs::read(&path).unwrap();
                    if rel == "suite.json" {
                        // The timestamp is excluded from the contract.
                        let mut v: serde_json::Value = serde_json::from_slice(&bytes).unwrap();
                        v["generated_at"] = serde_json::Value::from(0u64);
                        bytes = serde_json::to_vec(&v).unwrap();
                    }
                    files.push((rel, bytes));
                }
            }
        }
        files.sort();
        files
    }

    #[test]
    fn identical_seed_gives_identical_tree_and_parallel_matches_sequential() {
        let tmp = tempfile::tempdir().unwrap();
        let boards = write_boards(tmp.path(), 2);
        let pairs = PairSelection::List(vec![
            ("T1".to_string(), "P1".to_string()),
            ("T4".to_string(), "P2".to_string()),
            ("T2".to_string(), "P3".to_string()),
        ]);

        let out_a = tmp.path().join("a");
        let out_b = tmp.path().join("b");
        generate_suite(&boards, &options(&out_a, pairs.clone(), 77)).unwrap();
        generate_suite(&boards, &options(&out_b, pairs.clone(), 77)).unwrap();
        assert_eq!(tree_digest(&out_a), tree_digest(&out_b));

        #[cfg(feature = "parallel")]
        {
            let out_c = tmp.path().join("c");
            let mut opts = options(&out_c, pairs, 77);
            opts.parallel = true;
            generate_suite(&boards, &opts).unwrap();
            assert_eq!(tree_digest(&out_a), tree_digest(&out_c));
        }
    }
}
