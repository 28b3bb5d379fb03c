//! Desk-scale analogue oracles, the Top-10 AUC metric, per-critic
//! contribution accounting, and the multi-seed experiment matrix.

use std::collections::BTreeMap;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::{Arc, Mutex};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::config::{parse_formula, Config, CriticMode, EditorMode, QedLiteParams, TaskSpec};
use crate::critic::{Critic, ExternalHttpCritic, NullCritic, SyntheticAligner};
use crate::engine::{self, Oracle, Peers, RunOutcome, TrajectoryRecord};
use crate::evolve::{ExternalHttpEditor, MoleculeEditor, RuleEditor};
use crate::fingerprint::{compute_fingerprint, FingerprintKind, FingerprintParams};
use crate::molgraph::Molecule;
use crate::surrogate::tanimoto_kernel;

#[derive(Debug, Error)]
pub enum BenchError {
    #[error("trajectory has {got} records, budget is {expected}")]
    LengthMismatch { got: usize, expected: usize },
    #[error(transparent)]
    Config(#[from] crate::config::ConfigError),
    #[error(transparent)]
    Engine(#[from] engine::EngineError),
    #[error("io failure: {0}")]
    Io(#[from] std::io::Error),
    #[error("malformed run record: {0}")]
    Malformed(String),
}

type Scorer = Arc<dyn Fn(&Molecule) -> f64 + Send + Sync>;

/// Oracle built from a task description. Counts every `score` call; the
/// inner scorer can be borrowed without touching the counter, which is how
/// the synthetic critic sees the landscape without spending budget.
pub struct TaskOracle {
    scorer: Scorer,
    calls: std::cell::Cell<u64>,
}

impl TaskOracle {
    pub fn new(scorer: Scorer) -> Self {
        TaskOracle {
            scorer,
            calls: std::cell::Cell::new(0),
        }
    }

    /// The raw scoring function, not routed through the call counter.
    pub fn scorer(&self) -> Scorer {
        Arc::clone(&self.scorer)
    }
}

impl Oracle for TaskOracle {
    fn score(&self, mol: &Molecule) -> Result<f64, String> {
        self.calls.set(self.calls.get() + 1);
        Ok((self.scorer)(mol))
    }

    fn calls(&self) -> u64 {
        self.calls.get()
    }
}

/// Tanimoto similarity of circular fingerprints against a fixed target;
/// the target itself scores exactly 1.
pub fn oracle_similarity(target: &Molecule, params: &FingerprintParams) -> Scorer {
    let mut fp_params = params.clone();
    if !fp_params.enabled.contains(&FingerprintKind::Ecfp) {
        fp_params.enabled.push(FingerprintKind::Ecfp);
    }
    let target_fp = compute_fingerprint(target, FingerprintKind::Ecfp, &fp_params)
        .expect("ecfp enabled above");
    Arc::new(move |mol: &Molecule| {
        let fp = compute_fingerprint(mol, FingerprintKind::Ecfp, &fp_params)
            .expect("ecfp enabled above");
        tanimoto_kernel(&fp, &target_fp).expect("same kind")
    })
}

/// Exponential penalty on composition deviation: `exp(-dev / total)` where
/// `dev` sums absolute per-element count differences (hydrogens included)
/// and `total` is the target formula's atom count. Exactly 1 iff the
/// composition matches.
pub fn oracle_isomer(formula: &BTreeMap<String, u32>) -> Scorer {
    let target = formula.clone();
    let total: u32 = target.values().sum();
    Arc::new(move |mol: &Molecule| {
        let have = mol.formula();
        let mut deviation = 0.0f64;
        for (element, &want) in &target {
            let got = have.get(element.as_str()).copied().unwrap_or(0);
            deviation += (f64::from(want) - f64::from(got)).abs();
        }
        for (element, &got) in &have {
            if !target.contains_key(*element) {
                deviation += f64::from(got);
            }
        }
        (-deviation / f64::from(total)).exp()
    })
}

/// Weighted geometric mean of component scores, clamped to [0, 1]. Any
/// zero component annihilates the product.
pub fn oracle_mpo(components: Vec<(Scorer, f64)>) -> Scorer {
    assert!(!components.is_empty());
    let total_weight: f64 = components.iter().map(|(_, w)| *w).sum();
    Arc::new(move |mol: &Molecule| {
        let mut log_sum = 0.0f64;
        for (scorer, weight) in &components {
            let s = scorer(mol);
            if s <= 0.0 {
                return 0.0;
            }
            log_sum += (weight / total_weight) * s.ln();
        }
        log_sum.exp().clamp(0.0, 1.0)
    })
}

fn logistic_window(v: f64, lo: f64, hi: f64, scale: f64) -> f64 {
    let rise = 1.0 / (1.0 + (-(v - lo) / scale).exp());
    let fall = 1.0 / (1.0 + (-(hi - v) / scale).exp());
    rise * fall
}

/// Drug-likeness analogue: a product of logistic desirability windows over
/// heavy-atom count, independent ring count, and heteroatom fraction.
pub fn oracle_qed_lite(params: &QedLiteParams) -> Scorer {
    let p = params.clone();
    Arc::new(move |mol: &Molecule| {
        let heavy = mol.atom_count() as f64;
        let rings = (mol.bonds().len() + 1).saturating_sub(mol.atom_count()) as f64;
        let hetero = mol
            .atoms()
            .iter()
            .filter(|a| a.element != crate::molgraph::Element::C)
            .count() as f64
            / heavy;
        let d_atoms = logistic_window(heavy, p.atoms_lo, p.atoms_hi, p.atoms_scale);
        let d_rings = logistic_window(rings, p.rings_lo, p.rings_hi, p.rings_scale);
        let d_hetero = logistic_window(hetero, p.hetero_lo, p.hetero_hi, p.hetero_scale);
        (d_atoms * d_rings * d_hetero).clamp(0.0, 1.0)
    })
}

/// Build the scorer for a task specification.
pub fn build_scorer(spec: &TaskSpec, params: &FingerprintParams) -> Result<Scorer, BenchError> {
    match spec {
        TaskSpec::Similarity { target } => {
            let mol = Molecule::parse(target)
                .map_err(|e| crate::config::ConfigError::Invalid(e.to_string()))?;
            Ok(oracle_similarity(&mol, params))
        }
        TaskSpec::Isomer { formula } => {
            let counts = parse_formula(formula)?;
            Ok(oracle_isomer(&counts))
        }
        TaskSpec::QedLite { params: qed } => Ok(oracle_qed_lite(qed)),
        TaskSpec::Mpo { components } => {
            let mut built = Vec::with_capacity(components.len());
            for c in components {
                built.push((build_scorer(&c.spec, params)?, c.weight));
            }
            Ok(oracle_mpo(built))
        }
    }
}

/// Budget-normalized area under the running top-10 mean: the average over
/// oracle calls of the mean of the best `min(10, n)` scores seen so far.
pub fn top10_auc(scores: &[f64], budget: usize) -> Result<f64, BenchError> {
    if scores.len() != budget {
        return Err(BenchError::LengthMismatch {
            got: scores.len(),
            expected: budget,
        });
    }
    let mut top: Vec<f64> = Vec::with_capacity(10);
    let mut auc = 0.0;
    for &y in scores {
        let at = top.partition_point(|&v| v >= y);
        if top.len() < 10 {
            top.insert(at, y);
        } else if at < 10 {
            top.insert(at, y);
            top.pop();
        }
        let mean: f64 = top.iter().sum::<f64>() / top.len() as f64;
        auc += mean;
    }
    Ok(auc / budget as f64)
}

/// Attribute incumbent improvements to whichever scorer ranked the
/// improving molecule first ("critic" for the zero-shot critic, the
/// fingerprint kind for a GP pick, "poe" for the fused ensemble). Records
/// without ranking metadata (initialization, stall injections, random
/// ranking) never receive attribution. Shares are normalized to sum to 1;
/// the map is empty when no attributed improvement ever happens.
pub fn critic_contribution(records: &[TrajectoryRecord]) -> BTreeMap<String, f64> {
    let mut shares: BTreeMap<String, f64> = BTreeMap::new();
    let mut incumbent = f64::NEG_INFINITY;
    for record in records {
        let improvement = record.score - incumbent;
        if record.score > incumbent {
            incumbent = record.score;
        }
        if improvement <= 0.0 || !incumbent.is_finite() {
            continue;
        }
        let attribution = if record.critic_branch {
            Some("critic".to_string())
        } else {
            record.gp_kind.clone()
        };
        if let Some(key) = attribution {
            if improvement.is_finite() {
                *shares.entry(key).or_insert(0.0) += improvement;
            }
        }
    }
    let total: f64 = shares.values().sum();
    if total > 0.0 {
        for v in shares.values_mut() {
            *v /= total;
        }
    } else {
        shares.clear();
    }
    shares
}

/// Everything a run needs besides the engine settings.
pub struct BuiltPeers {
    pub oracle: TaskOracle,
    pub editor: Box<dyn MoleculeEditor>,
    pub critic: Box<dyn Critic>,
}

pub fn build_peers(config: &Config, seed_pool: &[Molecule]) -> Result<BuiltPeers, BenchError> {
    let scorer = build_scorer(&config.task.spec, &config.fingerprints)?;
    let oracle = TaskOracle::new(Arc::clone(&scorer));

    let description = config
        .critic
        .task_description
        .clone()
        .unwrap_or_else(|| config.task.description_or_default());

    let critic: Box<dyn Critic> = match config.critic.mode {
        CriticMode::Null => Box::new(NullCritic),
        CriticMode::Synthetic => Box::new(SyntheticAligner::new(
            scorer,
            config.critic.synthetic_rho,
            config.critic.synthetic_seed,
            seed_pool,
        )),
        CriticMode::Http => Box::new(ExternalHttpCritic::new(
            config
                .critic
                .http_url
                .clone()
                .expect("validated http critic url"),
            description.clone(),
            config.critic.timeout_ms,
        )),
    };

    let editor: Box<dyn MoleculeEditor> = match config.editor.mode {
        EditorMode::Rules => Box::new(RuleEditor {
            mutation_rate: config.evolve.mutation_rate,
            max_atoms: config.evolve.max_atoms,
        }),
        EditorMode::External => {
            let fallback = config.editor.fallback_rules.then(|| RuleEditor {
                mutation_rate: config.evolve.mutation_rate,
                max_atoms: config.evolve.max_atoms,
            });
            Box::new(ExternalHttpEditor::new(
                config
                    .editor
                    .http_url
                    .clone()
                    .expect("validated http editor url"),
                description,
                config.editor.timeout_ms,
                fallback,
            ))
        }
    };

    Ok(BuiltPeers {
        oracle,
        editor,
        critic,
    })
}

/// One completed run with derived metrics.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct BenchRun {
    pub task: String,
    pub config_name: String,
    pub config_hash: String,
    pub seed: u64,
    pub top10_auc: f64,
    pub best_score: f64,
    pub stall_events: u32,
    pub contributions: BTreeMap<String, f64>,
    #[serde(skip)]
    pub records: Vec<TrajectoryRecord>,
}

/// Execute one configured run, optionally streaming the trajectory.
pub fn run_one(
    config: &Config,
    config_name: &str,
    seed: u64,
    sink: Option<&mut dyn Write>,
) -> Result<BenchRun, BenchError> {
    let mut config = config.clone();
    config.seed = seed;
    config.validate()?;
    let seed_pool = config.load_seed_pool()?;
    let built = build_peers(&config, &seed_pool)?;
    let peers = Peers {
        oracle: &built.oracle,
        editor: built.editor.as_ref(),
        critic: built.critic.as_ref(),
    };
    let outcome: RunOutcome = engine::run(&config.to_settings(), &seed_pool, &peers, sink)?;
    debug_assert_eq!(built.oracle.calls(), u64::from(config.run.budget));
    summarize(&config, config_name, seed, outcome)
}

fn summarize(
    config: &Config,
    config_name: &str,
    seed: u64,
    outcome: RunOutcome,
) -> Result<BenchRun, BenchError> {
    let scores: Vec<f64> = outcome.records.iter().map(|r| r.score).collect();
    let auc = top10_auc(&scores, config.run.budget as usize)?;
    Ok(BenchRun {
        task: config.task.name.clone(),
        config_name: config_name.to_string(),
        config_hash: config.config_hash(),
        seed,
        top10_auc: auc,
        best_score: outcome.best_score(),
        stall_events: outcome.stall_events,
        contributions: critic_contribution(&outcome.records),
        records: outcome.records,
    })
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SeedResult {
    pub seed: u64,
    pub top10_auc: f64,
    pub best_score: f64,
    pub stall_events: u32,
}

/// Aggregated cell of the experiment matrix.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CellReport {
    pub task: String,
    pub config_name: String,
    pub config_hash: String,
    pub per_seed: Vec<SeedResult>,
    pub mean_auc: f64,
    pub std_auc: f64,
    /// Mean attributed improvement share per scorer across seeds.
    pub contributions: BTreeMap<String, f64>,
    pub failures: Vec<String>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct MatrixReport {
    pub cells: Vec<CellReport>,
}

/// Run every (task, config, seed) cell, aggregating per-cell statistics.
/// Individual run failures are recorded and the matrix continues. When an
/// output directory is given each trajectory lands in
/// `<out>/<task>/<config-hash>/<seed>.jsonl`.
pub fn run_matrix(
    base_tasks: &[crate::config::TaskConfig],
    configs: &[(String, Config)],
    seeds: &[u64],
    jobs: usize,
    out_dir: Option<&Path>,
) -> MatrixReport {
    struct CellJob {
        task_idx: usize,
        config_idx: usize,
        seed: u64,
    }
    let mut jobs_list = Vec::new();
    for (task_idx, _) in base_tasks.iter().enumerate() {
        for (config_idx, _) in configs.iter().enumerate() {
            for &seed in seeds {
                jobs_list.push(CellJob {
                    task_idx,
                    config_idx,
                    seed,
                });
            }
        }
    }

    let results: Mutex<Vec<Option<Result<BenchRun, String>>>> =
        Mutex::new((0..jobs_list.len()).map(|_| None).collect());
    let cursor = AtomicUsize::new(0);
    let worker_count = jobs.max(1).min(jobs_list.len().max(1));

    std::thread::scope(|scope| {
        for _ in 0..worker_count {
            scope.spawn(|| loop {
                let i = cursor.fetch_add(1, Ordering::SeqCst);
                if i >= jobs_list.len() {
                    break;
                }
                let job = &jobs_list[i];
                let task = &base_tasks[job.task_idx];
                let (name, config) = &configs[job.config_idx];
                let mut cell_config = config.clone();
                cell_config.task = task.clone();

                let outcome = (|| -> Result<BenchRun, BenchError> {
                    let mut sink_file = match out_dir {
                        Some(dir) => {
                            let cell_dir = dir
                                .join(&cell_config.task.name)
                                .join(cell_config.config_hash());
                            std::fs::create_dir_all(&cell_dir)?;
                            Some(std::fs::File::create(
                                cell_dir.join(format!("{}.jsonl", job.seed)),
                            )?)
                        }
                        None => None,
                    };
                    let sink: Option<&mut dyn Write> = sink_file
                        .as_mut()
                        .map(|f| f as &mut dyn Write);
                    run_one(&cell_config, name, job.seed, sink)
                })();
                let slot = outcome.map_err(|e| e.to_string());
                results.lock().unwrap()[i] = Some(slot);
            });
        }
    });

    let results = results.into_inner().unwrap();
    let mut cells: Vec<CellReport> = Vec::new();
    for (task_idx, task) in base_tasks.iter().enumerate() {
        for (config_idx, (name, config)) in configs.iter().enumerate() {
            let mut cell_config = config.clone();
            cell_config.task = task.clone();
            let mut per_seed = Vec::new();
            let mut failures = Vec::new();
            let mut contribution_sums: BTreeMap<String, f64> = BTreeMap::new();
            let mut contribution_runs = 0usize;
            for (i, job) in jobs_list.iter().enumerate() {
                if job.task_idx != task_idx || job.config_idx != config_idx {
                    continue;
                }
                match results[i].as_ref().expect("worker filled slot") {
                    Ok(run) => {
                        per_seed.push(SeedResult {
                            seed: run.seed,
                            top10_auc: run.top10_auc,
                            best_score: run.best_score,
                            stall_events: run.stall_events,
                        });
                        contribution_runs += 1;
                        for (k, v) in &run.contributions {
                            *contribution_sums.entry(k.clone()).or_insert(0.0) += v;
                        }
                    }
                    Err(e) => failures.push(format!("seed {}: {e}", job.seed)),
                }
            }
            let aucs: Vec<f64> = per_seed.iter().map(|s| s.top10_auc).collect();
            let (mean, std) = mean_std(&aucs);
            if contribution_runs > 0 {
                for v in contribution_sums.values_mut() {
                    *v /= contribution_runs as f64;
                }
            }
            cells.push(CellReport {
                task: task.name.clone(),
                config_name: name.clone(),
                config_hash: cell_config.config_hash(),
                per_seed,
                mean_auc: mean,
                std_auc: std,
                contributions: contribution_sums,
                failures,
            });
        }
    }
    MatrixReport { cells }
}

pub fn mean_std(values: &[f64]) -> (f64, f64) {
    if values.is_empty() {
        return (f64::NAN, f64::NAN);
    }
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    if values.len() < 2 {
        return (mean, 0.0);
    }
    let var = values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / (n - 1.0);
    (mean, var.sqrt())
}

impl MatrixReport {
    /// Table with one row per task and one `mean ± std` column per config.
    pub fn to_csv(&self) -> String {
        let mut config_names: Vec<String> =
            self.cells.iter().map(|c| c.config_name.clone()).collect();
        config_names.dedup();
        let mut tasks: Vec<String> = self.cells.iter().map(|c| c.task.clone()).collect();
        tasks.dedup();

        let mut out = String::from("task");
        for name in &config_names {
            out.push(',');
            out.push_str(name);
        }
        out.push('\n');
        for task in &tasks {
            out.push_str(task);
            for name in &config_names {
                out.push(',');
                if let Some(cell) = self
                    .cells
                    .iter()
                    .find(|c| &c.task == task && &c.config_name == name)
                {
                    if cell.per_seed.is_empty() {
                        out.push_str("failed");
                    } else {
                        out.push_str(&format!("{:.4} ± {:.4}", cell.mean_auc, cell.std_auc));
                    }
                }
            }
            out.push('\n');
        }
        out
    }
}

/// Re-derive a seed result from a raw trajectory file.
pub fn replay_jsonl(path: &Path) -> Result<(Vec<TrajectoryRecord>, SeedResult), BenchError> {
    let text = std::fs::read_to_string(path)?;
    let mut records = Vec::new();
    for (idx, line) in text.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let record: TrajectoryRecord = serde_json::from_str(line)
            .map_err(|e| BenchError::Malformed(format!("{}:{}: {e}", path.display(), idx + 1)))?;
        records.push(record);
    }
    if records.is_empty() {
        return Err(BenchError::Malformed(format!(
            "{}: no records",
            path.display()
        )));
    }
    let seed: u64 = path
        .file_stem()
        .and_then(|s| s.to_str())
        .and_then(|s| s.parse().ok())
        .unwrap_or(0);
    let scores: Vec<f64> = records.iter().map(|r| r.score).collect();
    let auc = top10_auc(&scores, scores.len())?;
    let best = scores.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let stalls = records.iter().filter(|r| r.stall).count() as u32;
    let result = SeedResult {
        seed,
        top10_auc: auc,
        best_score: best,
        stall_events: stalls,
    };
    Ok((records, result))
}

/// Aggregate a results directory laid out as
/// `<task>/<config-hash>/<seed>.jsonl` into per-cell summaries.
pub fn report_directory(dir: &Path) -> Result<MatrixReport, BenchError> {
    let mut cells: BTreeMap<(String, String), CellReport> = BTreeMap::new();
    let mut paths: Vec<PathBuf> = Vec::new();
    collect_jsonl(dir, &mut paths)?;
    paths.sort();
    for path in paths {
        let rel: Vec<String> = path
            .strip_prefix(dir)
            .unwrap_or(&path)
            .components()
            .map(|c| c.as_os_str().to_string_lossy().into_owned())
            .collect();
        let (task, hash) = match rel.len() {
            3 => (rel[0].clone(), rel[1].clone()),
            _ => ("unknown".to_string(), "unknown".to_string()),
        };
        let (records, seed_result) = replay_jsonl(&path)?;
        let contributions = critic_contribution(&records);
        let cell = cells
            .entry((task.clone(), hash.clone()))
            .or_insert_with(|| CellReport {
                task,
                config_name: hash.clone(),
                config_hash: hash,
                per_seed: Vec::new(),
                mean_auc: 0.0,
                std_auc: 0.0,
                contributions: BTreeMap::new(),
                failures: Vec::new(),
            });
        for (k, v) in contributions {
            *cell.contributions.entry(k).or_insert(0.0) += v;
        }
        cell.per_seed.push(seed_result);
    }
    let mut report = MatrixReport {
        cells: cells.into_values().collect(),
    };
    for cell in &mut report.cells {
        let aucs: Vec<f64> = cell.per_seed.iter().map(|s| s.top10_auc).collect();
        let (mean, std) = mean_std(&aucs);
        cell.mean_auc = mean;
        cell.std_auc = std;
        let n = cell.per_seed.len() as f64;
        for v in cell.contributions.values_mut() {
            *v /= n;
        }
    }
    Ok(report)
}

fn collect_jsonl(dir: &Path, out: &mut Vec<PathBuf>) -> std::io::Result<()> {
    for entry in std::fs::read_dir(dir)? {
        let entry = entry?;
        let path = entry.path();
        if path.is_dir() {
            collect_jsonl(&path, out)?;
        } else if path.extension().is_some_and(|e| e == "jsonl") {
            out.push(path);
        }
    }
    Ok(())
}
