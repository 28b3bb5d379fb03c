//! The generation loop: offspring, surrogate refits, gate update,
//! pre-evaluation, batched oracle calls, weight updates and pool
//! maintenance, with an exact oracle budget.
//!
//! Degenerate configurations reproduce the baselines: a single fingerprint
//! with the gate off is the plain GP optimizer, and disabling the ensemble
//! with `n_cand = 0` and a full-width batch evaluates every generated
//! candidate directly.

use std::collections::{BTreeMap, HashSet};
use std::io::Write;
use std::sync::Arc;

use log::warn;
use nalgebra::DMatrix;
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::critic::{
    gate_llimbo, pre_evaluate, spearman, Critic, GateState, GatingMode, RankBranch, RankChoice,
    RankingInputs,
};
use crate::evolve::{gen_offspring, grow_novel, EvolveConfig, MoleculeEditor};
use crate::fingerprint::{
    Fingerprint, FingerprintCache, FingerprintError, FingerprintKind, FingerprintParams,
};
use crate::molgraph::Molecule;
use crate::surrogate::{
    expected_improvement, fit_gp_with_gram, tanimoto_kernel, EnsembleConfig, EnsembleMode,
    EnsembleState, GpConfig, GpModel, SurrogateError,
};

#[derive(Debug, Error)]
pub enum EngineError {
    #[error("seed pool holds {available} distinct molecules, {needed} required")]
    SeedPoolTooSmall { available: usize, needed: usize },
    #[error("oracle failure: {0}")]
    Oracle(String),
    #[error(transparent)]
    Editor(#[from] crate::evolve::EditorError),
    #[error(transparent)]
    Fingerprint(#[from] FingerprintError),
    #[error("invalid run settings: {0}")]
    Settings(String),
    #[error("run stalled: {0}")]
    Stalled(String),
    #[error("trajectory sink failure: {0}")]
    Sink(String),
}

/// The expensive property evaluator. Implementations count their own
/// invocations; the engine never calls `score` more than `budget` times
/// per run.
pub trait Oracle {
    fn score(&self, mol: &Molecule) -> Result<f64, String>;
    fn calls(&self) -> u64;
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum RankingMode {
    #[default]
    /// Gate between the zero-shot critic and the surrogate ensemble.
    Critics,
    /// Seeded shuffle instead of any scoring; a control baseline.
    Random,
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(default)]
pub struct RunParams {
    pub budget: u32,
    pub n_init: u32,
    pub n_batch: u32,
    pub n_cand: u32,
}

impl Default for RunParams {
    fn default() -> Self {
        RunParams {
            budget: 1000,
            n_init: 10,
            n_batch: 1,
            n_cand: 300,
        }
    }
}

/// Everything the generation loop needs to know.
#[derive(Debug, Clone, PartialEq)]
pub struct RunSettings {
    pub run: RunParams,
    pub evolve: EvolveConfig,
    pub fingerprints: FingerprintParams,
    pub gp: GpConfig,
    pub ensemble: EnsembleConfig,
    pub gating: GatingMode,
    pub ranking: RankingMode,
    pub seed: u64,
}

impl RunSettings {
    pub fn validate(&self) -> Result<(), EngineError> {
        let err = |msg: String| Err(EngineError::Settings(msg));
        if self.run.n_init < 1 {
            return err("run.n_init must be at least 1".into());
        }
        if self.run.budget < self.run.n_init {
            return err("run.budget must be at least run.n_init".into());
        }
        if self.run.n_batch < 1 {
            return err("run.n_batch must be at least 1".into());
        }
        self.evolve.validate().map_err(EngineError::Settings)?;
        if self.ensemble.mode != EnsembleMode::Off && self.fingerprints.enabled.is_empty() {
            return err("fingerprints.enabled must not be empty".into());
        }
        if self.gating == GatingMode::Llimbo && self.ensemble.mode == EnsembleMode::Off {
            return err("gating.mode = llimbo requires an active surrogate ensemble".into());
        }
        if let Some(floor) = self.ensemble.weight_floor {
            let m = self.fingerprints.enabled.len().max(1) as f64;
            if floor <= 0.0 || floor * m >= 1.0 {
                return err("ensemble.weight_floor must satisfy 0 < floor * M < 1".into());
            }
        }
        Ok(())
    }
}

/// One line of the trajectory: one oracle call.
#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct TrajectoryRecord {
    pub n: u32,
    pub smiles: String,
    pub score: f64,
    pub critic_branch: bool,
    pub gp_kind: Option<String>,
    pub rho: Option<f64>,
    pub weights: BTreeMap<String, f64>,
    #[serde(default)]
    pub stall: bool,
}

#[derive(Debug, Clone)]
pub struct RunOutcome {
    pub records: Vec<TrajectoryRecord>,
    pub stall_events: u32,
}

impl RunOutcome {
    pub fn best_score(&self) -> f64 {
        self.records
            .iter()
            .map(|r| r.score)
            .fold(f64::NEG_INFINITY, f64::max)
    }
}

pub struct Peers<'a> {
    pub oracle: &'a dyn Oracle,
    pub editor: &'a dyn MoleculeEditor,
    pub critic: &'a dyn Critic,
}

/// Per-kind training state; the Tanimoto Gram matrix grows by one row per
/// scored molecule so refits never recompute pairwise similarities.
struct KindData {
    kind: FingerprintKind,
    fps: Vec<Arc<Fingerprint>>,
    gram: DMatrix<f64>,
}

impl KindData {
    fn new(kind: FingerprintKind) -> Self {
        KindData {
            kind,
            fps: Vec::new(),
            gram: DMatrix::zeros(0, 0),
        }
    }

    fn push(&mut self, fp: Arc<Fingerprint>) {
        let n = self.fps.len();
        let mut grown = DMatrix::zeros(n + 1, n + 1);
        grown.view_mut((0, 0), (n, n)).copy_from(&self.gram);
        for i in 0..n {
            let v = tanimoto_kernel(&self.fps[i], &fp).expect("kinds aligned");
            grown[(i, n)] = v;
            grown[(n, i)] = v;
        }
        grown[(n, n)] = 1.0;
        self.gram = grown;
        self.fps.push(fp);
    }
}

struct Candidate {
    mol: Arc<Molecule>,
    fps: Arc<BTreeMap<FingerprintKind, Arc<Fingerprint>>>,
    /// Kernel rows against the scored set, extended as the set grows.
    rows: BTreeMap<FingerprintKind, Vec<f64>>,
    /// Posterior (mu, var) per kind for the current generation.
    posteriors: BTreeMap<FingerprintKind, (f64, f64)>,
    critic_score: Option<f64>,
    stall_injected: bool,
}

impl Candidate {
    fn new(
        mol: Arc<Molecule>,
        fps: Arc<BTreeMap<FingerprintKind, Arc<Fingerprint>>>,
        stall_injected: bool,
    ) -> Self {
        Candidate {
            mol,
            fps,
            rows: BTreeMap::new(),
            posteriors: BTreeMap::new(),
            critic_score: None,
            stall_injected,
        }
    }
}

/// Fit one GP per enabled kind on the full scored set. Standalone variant
/// of the engine's incremental refit, shared by tests and tools.
pub fn fit_surrogate(
    scored: &[(Arc<Molecule>, f64)],
    cache: &mut FingerprintCache,
    gp: &GpConfig,
) -> Result<Vec<(FingerprintKind, Result<GpModel, SurrogateError>)>, FingerprintError> {
    let kinds: Vec<FingerprintKind> = cache.params().enabled.clone();
    let mut per_kind: BTreeMap<FingerprintKind, Vec<(Arc<Fingerprint>, f64)>> = BTreeMap::new();
    for (mol, y) in scored {
        let fps = cache.get(mol)?;
        for &kind in &kinds {
            per_kind
                .entry(kind)
                .or_default()
                .push((Arc::clone(&fps[&kind]), *y));
        }
    }
    Ok(kinds
        .into_iter()
        .map(|kind| {
            let data = per_kind.remove(&kind).unwrap_or_default();
            (kind, crate::surrogate::fit_gp(&data, gp))
        })
        .collect())
}

struct Engine<'a> {
    settings: &'a RunSettings,
    peers: &'a Peers<'a>,
    rng: ChaCha8Rng,
    cache: FingerprintCache,
    kinds: Vec<FingerprintKind>,
    kind_data: Vec<KindData>,
    ensemble: EnsembleState,
    scored: Vec<(Arc<Molecule>, f64)>,
    scored_canonicals: HashSet<String>,
    critic_cache: BTreeMap<String, f64>,
    records: Vec<TrajectoryRecord>,
    stall_events: u32,
    calls: u32,
}

/// Execute one full optimization run. The trajectory is returned and, when
/// a sink is given, streamed as one JSON line per oracle call, flushed
/// immediately so interrupted runs stay analyzable.
pub fn run(
    settings: &RunSettings,
    seed_pool: &[Molecule],
    peers: &Peers<'_>,
    mut sink: Option<&mut dyn Write>,
) -> Result<RunOutcome, EngineError> {
    settings.validate()?;
    let kinds = if settings.ensemble.mode == EnsembleMode::Off {
        Vec::new()
    } else {
        settings.fingerprints.enabled.clone()
    };
    let mut engine = Engine {
        settings,
        peers,
        rng: ChaCha8Rng::seed_from_u64(settings.seed),
        cache: FingerprintCache::new(settings.fingerprints.clone()),
        kind_data: kinds.iter().map(|&k| KindData::new(k)).collect(),
        ensemble: EnsembleState::uniform(kinds.clone(), settings.ensemble.weight_floor),
        kinds,
        scored: Vec::new(),
        scored_canonicals: HashSet::new(),
        critic_cache: BTreeMap::new(),
        records: Vec::new(),
        stall_events: 0,
        calls: 0,
    };
    engine.initialize(seed_pool, &mut sink)?;
    if engine.calls >= settings.run.budget {
        return Ok(engine.finish());
    }
    engine.generation_loop(seed_pool, &mut sink)?;
    Ok(engine.finish())
}

impl<'a> Engine<'a> {
    fn finish(self) -> RunOutcome {
        debug_assert_eq!(self.records.len() as u32, self.settings.run.budget);
        RunOutcome {
            records: self.records,
            stall_events: self.stall_events,
        }
    }

    fn weights_snapshot(&self) -> BTreeMap<String, f64> {
        self.kinds
            .iter()
            .zip(self.ensemble.weights())
            .map(|(k, &w)| (k.name().to_string(), w))
            .collect()
    }

    fn initialize(
        &mut self,
        seed_pool: &[Molecule],
        sink: &mut Option<&mut dyn Write>,
    ) -> Result<(), EngineError> {
        let needed = self.settings.run.n_init as usize;
        let mut order: Vec<usize> = (0..seed_pool.len()).collect();
        order.shuffle(&mut self.rng);
        let mut picked: Vec<&Molecule> = Vec::with_capacity(needed);
        let mut seen: HashSet<&str> = HashSet::new();
        for idx in order {
            let m = &seed_pool[idx];
            if seen.insert(m.canonical_smiles()) {
                picked.push(m);
                if picked.len() == needed {
                    break;
                }
            }
        }
        if picked.len() < needed {
            return Err(EngineError::SeedPoolTooSmall {
                available: seen.len(),
                needed,
            });
        }
        for mol in picked {
            let mol = Arc::new(mol.clone());
            let fps = self.cache.get(&mol)?;
            self.record_observation(&mol, &fps, None, None, false, sink)?;
        }
        Ok(())
    }

    /// Score a molecule, append the trajectory record, and absorb the new
    /// observation into the training state.
    #[allow(clippy::too_many_arguments)]
    fn record_observation(
        &mut self,
        mol: &Arc<Molecule>,
        fps: &BTreeMap<FingerprintKind, Arc<Fingerprint>>,
        branch: Option<RankBranch>,
        rho: Option<f64>,
        stall: bool,
        sink: &mut Option<&mut dyn Write>,
    ) -> Result<f64, EngineError> {
        let y = self
            .peers
            .oracle
            .score(mol)
            .map_err(EngineError::Oracle)?;
        self.calls += 1;
        let (critic_branch, gp_kind) = match branch {
            Some(RankBranch::Critic) => (true, None),
            Some(RankBranch::Gp(m)) => (false, Some(self.kinds[m].name().to_string())),
            Some(RankBranch::Poe) => (false, Some("poe".to_string())),
            Some(RankBranch::Order) | None => (false, None),
        };
        let record = TrajectoryRecord {
            n: self.calls,
            smiles: mol.canonical_smiles().to_string(),
            score: y,
            critic_branch,
            gp_kind,
            rho,
            weights: self.weights_snapshot(),
            stall,
        };
        if let Some(w) = sink.as_mut() {
            let line = serde_json::to_string(&record).expect("record serializes");
            w.write_all(line.as_bytes())
                .and_then(|_| w.write_all(b"\n"))
                .and_then(|_| w.flush())
                .map_err(|e| EngineError::Sink(e.to_string()))?;
        }
        self.records.push(record);
        self.scored.push((Arc::clone(mol), y));
        self.scored_canonicals
            .insert(mol.canonical_smiles().to_string());
        for data in &mut self.kind_data {
            data.push(Arc::clone(&fps[&data.kind]));
        }
        Ok(y)
    }

    fn generation_loop(
        &mut self,
        seed_pool: &[Molecule],
        sink: &mut Option<&mut dyn Write>,
    ) -> Result<(), EngineError> {
        let mut pool: Vec<Candidate> = Vec::new();
        loop {
            self.extend_pool(&mut pool, seed_pool)?;

            let models = self.refit_models();
            let (gate, critic_ready) = self.update_gate(&mut pool);
            self.compute_posteriors(&mut pool, &models);

            let y_best = self
                .scored
                .iter()
                .map(|(_, y)| *y)
                .fold(f64::NEG_INFINITY, f64::max);
            let ei_per_model: Vec<Option<Vec<f64>>> = models
                .iter()
                .enumerate()
                .map(|(m, model)| {
                    model.as_ref().map(|_| {
                        pool.iter()
                            .map(|c| {
                                let (mu, var) = c.posteriors[&self.kinds[m]];
                                expected_improvement(mu, var, y_best)
                            })
                            .collect()
                    })
                })
                .collect();
            let poe_ei: Option<Vec<f64>> = if self.settings.ensemble.mode == EnsembleMode::Poe
                && models.iter().any(|m| m.is_some())
            {
                Some(
                    pool.iter()
                        .map(|c| {
                            let preds: Vec<(f64, f64)> = models
                                .iter()
                                .enumerate()
                                .filter_map(|(m, model)| {
                                    model
                                        .as_ref()
                                        .map(|_| c.posteriors[&self.kinds[m]])
                                })
                                .collect();
                            let (mu, var) = crate::surrogate::ensemble_poe(&preds);
                            expected_improvement(mu, var, y_best)
                        })
                        .collect(),
                )
            } else {
                None
            };

            let (gate_prob, logged_rho) = self.resolve_gate(&gate, critic_ready, &pool, &models, &ei_per_model);

            let order: Vec<RankChoice> = if self.settings.ranking == RankingMode::Random {
                let mut indices: Vec<usize> = (0..pool.len()).collect();
                indices.shuffle(&mut self.rng);
                indices
                    .into_iter()
                    .map(|candidate| RankChoice {
                        candidate,
                        branch: RankBranch::Order,
                    })
                    .collect()
            } else {
                let critic_scores: Option<Vec<f64>> = if critic_ready {
                    Some(pool.iter().map(|c| c.critic_score.unwrap_or(0.0)).collect())
                } else {
                    None
                };
                let inputs = RankingInputs {
                    critic_scores: critic_scores.as_deref(),
                    gate_probability: gate_prob,
                    ei_per_model: &ei_per_model,
                    weights: self.ensemble.weights(),
                    poe_ei: poe_ei.as_deref(),
                };
                pre_evaluate(pool.len(), &inputs, &mut self.rng)
            };

            let n_batch = self.settings.run.n_batch as usize;
            let mut scored_positions = 0usize;
            for choice in order.iter().take(n_batch) {
                let candidate = &pool[choice.candidate];
                let mol = Arc::clone(&candidate.mol);
                let fps = Arc::clone(&candidate.fps);
                let stall = candidate.stall_injected;
                // Predictive densities under the pre-observation models,
                // needed for the weight update after scoring.
                let predictions: Vec<Option<(f64, f64, f64)>> = models
                    .iter()
                    .enumerate()
                    .map(|(m, model)| {
                        model.as_ref().map(|gp| {
                            let (mu, var) = candidate.posteriors[&self.kinds[m]];
                            (mu, var, gp.noise)
                        })
                    })
                    .collect();

                let y =
                    self.record_observation(&mol, &fps, Some(choice.branch), logged_rho, stall, sink)?;
                scored_positions += 1;
                if !predictions.is_empty() && predictions.iter().any(|p| p.is_some()) {
                    self.ensemble.update(&predictions, y);
                }
                if self.calls >= self.settings.run.budget {
                    return Ok(());
                }
            }

            // Remove the scored prefix from the ranked order and keep the
            // best-ranked remainder as the next candidate pool, in rank
            // order.
            let keep = self.settings.run.n_cand as usize;
            let rank_of: BTreeMap<usize, usize> = order
                .iter()
                .skip(scored_positions)
                .take(keep)
                .enumerate()
                .map(|(rank, choice)| (choice.candidate, rank))
                .collect();
            let mut kept: Vec<(usize, Candidate)> = pool
                .drain(..)
                .enumerate()
                .filter_map(|(idx, c)| rank_of.get(&idx).map(|&rank| (rank, c)))
                .collect();
            kept.sort_unstable_by_key(|(rank, _)| *rank);
            pool = kept.into_iter().map(|(_, c)| c).collect();
            debug_assert!(pool.len() <= keep, "candidate pool exceeds its capacity");
        }
    }

    /// Offspring generation, deduplication against everything already
    /// scored or pooled, and stall recovery.
    fn extend_pool(
        &mut self,
        pool: &mut Vec<Candidate>,
        seed_pool: &[Molecule],
    ) -> Result<(), EngineError> {
        let offspring = gen_offspring(
            &self.scored,
            &self.settings.evolve,
            self.peers.editor,
            &mut self.rng,
        )?;
        let pooled: HashSet<String> = pool
            .iter()
            .map(|c| c.mol.canonical_smiles().to_string())
            .collect();
        for child in offspring {
            let canonical = child.canonical_smiles();
            if self.scored_canonicals.contains(canonical) || pooled.contains(canonical) {
                continue;
            }
            if pool
                .iter()
                .any(|c| c.mol.canonical_smiles() == canonical)
            {
                continue;
            }
            let mol = Arc::new(child);
            let fps = self.cache.get(&mol)?;
            pool.push(Candidate::new(mol, fps, false));
        }
        if !pool.is_empty() {
            return Ok(());
        }

        // Total stall: every child was a duplicate and the pool is empty.
        self.stall_events += 1;
        warn!("generation produced no new candidates; injecting a fresh seed molecule");
        let mut order: Vec<usize> = (0..seed_pool.len()).collect();
        order.shuffle(&mut self.rng);
        for idx in order {
            let m = &seed_pool[idx];
            if !self.scored_canonicals.contains(m.canonical_smiles()) {
                let mol = Arc::new(m.clone());
                let fps = self.cache.get(&mol)?;
                pool.push(Candidate::new(mol, fps, true));
                return Ok(());
            }
        }
        // Seed pool exhausted too; grow a scored molecule until novel.
        let base_idx = rand::Rng::gen_range(&mut self.rng, 0..self.scored.len());
        let base = Arc::clone(&self.scored[base_idx].0);
        let taken: HashSet<String> = self.scored_canonicals.clone();
        let grown = grow_novel(
            &base,
            &|c| taken.contains(c),
            200,
            &mut self.rng,
        )
        .ok_or_else(|| EngineError::Stalled("could not synthesize a novel candidate".into()))?;
        let mol = Arc::new(grown);
        let fps = self.cache.get(&mol)?;
        pool.push(Candidate::new(mol, fps, true));
        Ok(())
    }

    /// Refit one GP per kind on all scored data; kinds that fail to
    /// factorize are masked for this generation.
    fn refit_models(&mut self) -> Vec<Option<GpModel>> {
        let ys: Vec<f64> = self.scored.iter().map(|(_, y)| *y).collect();
        self.kind_data
            .iter()
            .map(|data| {
                match fit_gp_with_gram(
                    data.fps.clone(),
                    ys.clone(),
                    &data.gram,
                    &self.settings.gp,
                ) {
                    Ok(model) => Some(model),
                    Err(e) => {
                        warn!("surrogate fit failed for {}: {e}", data.kind.name());
                        None
                    }
                }
            })
            .collect()
    }

    /// Refresh critic scores for everything scored and pooled, then
    /// recompute the Spearman gate over the full scored set. Returns the
    /// gate and whether candidate critic scores are usable this
    /// generation.
    fn update_gate(&mut self, pool: &mut [Candidate]) -> (GateState, bool) {
        if self.settings.gating == GatingMode::Off {
            return (GateState::undefined(), false);
        }
        let mut missing: Vec<Arc<Molecule>> = Vec::new();
        for (mol, _) in &self.scored {
            if !self.critic_cache.contains_key(mol.canonical_smiles()) {
                missing.push(Arc::clone(mol));
            }
        }
        for candidate in pool.iter() {
            if !self
                .critic_cache
                .contains_key(candidate.mol.canonical_smiles())
            {
                missing.push(Arc::clone(&candidate.mol));
            }
        }
        if !missing.is_empty() {
            match self.peers.critic.score_batch(&missing) {
                Ok(scores) => {
                    for (mol, score) in missing.iter().zip(scores) {
                        self.critic_cache
                            .insert(mol.canonical_smiles().to_string(), score);
                    }
                }
                Err(e) => {
                    warn!("critic unavailable this generation: {e}");
                    return (GateState::undefined(), false);
                }
            }
        }
        for candidate in pool.iter_mut() {
            candidate.critic_score = self
                .critic_cache
                .get(candidate.mol.canonical_smiles())
                .copied();
        }
        let ys: Vec<f64> = self.scored.iter().map(|(_, y)| *y).collect();
        let ss: Vec<f64> = self
            .scored
            .iter()
            .map(|(m, _)| self.critic_cache[m.canonical_smiles()])
            .collect();
        let rho = spearman(&ys, &ss).expect("equal lengths");
        (GateState { rho }, true)
    }

    /// Kernel rows are extended against newly scored molecules, then
    /// posterior mean and variance are evaluated per kind.
    fn compute_posteriors(&mut self, pool: &mut [Candidate], models: &[Option<GpModel>]) {
        for candidate in pool.iter_mut() {
            for (m, model) in models.iter().enumerate() {
                let kind = self.kinds[m];
                let Some(gp) = model else {
                    candidate.posteriors.insert(kind, (0.0, 0.0));
                    continue;
                };
                let row = candidate.rows.entry(kind).or_default();
                let fp = &candidate.fps[&kind];
                let data = &self.kind_data[m];
                for train_fp in data.fps.iter().skip(row.len()) {
                    row.push(tanimoto_kernel(train_fp, fp).expect("kinds aligned"));
                }
                debug_assert_eq!(row.len(), gp.train_len());
                let (mu, var) = gp.posterior_from_row(row);
                candidate.posteriors.insert(kind, (mu, var));
            }
        }
    }

    #[allow(clippy::too_many_arguments)]
    /// Resolve the gate probability for this generation and the value to
    /// log in the trajectory.
    fn resolve_gate(
        &self,
        gate: &GateState,
        critic_ready: bool,
        pool: &[Candidate],
        models: &[Option<GpModel>],
        ei_per_model: &[Option<Vec<f64>>],
    ) -> (f64, Option<f64>) {
        if !critic_ready {
            return (0.0, None);
        }
        match self.settings.gating {
            GatingMode::Off => (0.0, None),
            GatingMode::Corr => (gate.probability(), gate.rho),
            GatingMode::Llimbo => {
                // Ranking of the highest-weighted available model; ties go
                // to the lowest index.
                let mut dominant: Option<usize> = None;
                for (m, model) in models.iter().enumerate() {
                    if model.is_none() {
                        continue;
                    }
                    let better = dominant
                        .map_or(true, |d| self.ensemble.weights()[m] > self.ensemble.weights()[d]);
                    if better {
                        dominant = Some(m);
                    }
                }
                match dominant {
                    Some(m) => {
                        let critic_scores: Vec<f64> =
                            pool.iter().map(|c| c.critic_score.unwrap_or(0.0)).collect();
                        let ei = ei_per_model[m].as_ref().expect("dominant model has EI");
                        let p = gate_llimbo(&critic_scores, ei);
                        (p, Some(p))
                    }
                    None => (0.0, None),
                }
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::critic::NullCritic;
    use crate::evolve::RuleEditor;
    use crate::util::fnv1a_bytes;
    use std::cell::Cell;

    /// Deterministic pseudo-oracle: a hash of the canonical form mapped to
    /// [0, 1]. Exercises the machinery without chemistry in the way.
    struct HashOracle {
        calls: Cell<u64>,
    }

    impl HashOracle {
        fn new() -> Self {
            HashOracle { calls: Cell::new(0) }
        }
    }

    impl Oracle for HashOracle {
        fn score(&self, mol: &Molecule) -> Result<f64, String> {
            self.calls.set(self.calls.get() + 1);
            let h = fnv1a_bytes(mol.canonical_smiles().as_bytes());
            Ok((h % 10_000) as f64 / 10_000.0)
        }

        fn calls(&self) -> u64 {
            self.calls.get()
        }
    }

    fn small_settings(budget: u32, seed: u64) -> RunSettings {
        RunSettings {
            run: RunParams {
                budget,
                n_init: 4,
                n_batch: 1,
                n_cand: 20,
            },
            evolve: EvolveConfig {
                n_elite: 6,
                n_pairs: 3,
                n_siblings: 2,
                mutation_rate: 0.5,
                max_atoms: 40,
            },
            fingerprints: FingerprintParams {
                enabled: vec![FingerprintKind::Ecfp, FingerprintKind::Boc],
                ..FingerprintParams::default()
            },
            gp: GpConfig {
                noise_grid: vec![1e-3, 1e-1],
                outputscale_grid: vec![0.5, 2.0],
                ..GpConfig::default()
            },
            ensemble: EnsembleConfig::default(),
            gating: GatingMode::Off,
            ranking: RankingMode::Critics,
            seed,
        }
    }

    fn run_with(settings: &RunSettings) -> (RunOutcome, u64) {
        let pool = crate::seeds::bundled_seed_pool();
        let oracle = HashOracle::new();
        let editor = RuleEditor {
            mutation_rate: settings.evolve.mutation_rate,
            max_atoms: settings.evolve.max_atoms,
        };
        let critic = NullCritic;
        let peers = Peers {
            oracle: &oracle,
            editor: &editor,
            critic: &critic,
        };
        let outcome = run(settings, &pool, &peers, None).unwrap();
        (outcome, oracle.calls())
    }

    #[test]
    fn zero_budget_loop_returns_initial_set() {
        let mut settings = small_settings(4, 0);
        settings.run.n_init = 4;
        let (outcome, calls) = run_with(&settings);
        assert_eq!(outcome.records.len(), 4);
        assert_eq!(calls, 4);
        assert!(outcome.records.iter().all(|r| r.gp_kind.is_none()));
    }

    #[test]
    fn budget_is_exact_even_mid_batch() {
        for (budget, n_batch) in [(11u32, 3u32), (13, 5), (9, 2)] {
            let mut settings = small_settings(budget, 7);
            settings.run.n_batch = n_batch;
            let (outcome, calls) = run_with(&settings);
            assert_eq!(outcome.records.len(), budget as usize);
            assert_eq!(calls, u64::from(budget));
            let ns: Vec<u32> = outcome.records.iter().map(|r| r.n).collect();
            let expect: Vec<u32> = (1..=budget).collect();
            assert_eq!(ns, expect);
        }
    }

    #[test]
    fn no_molecule_scored_twice() {
        let (outcome, _) = run_with(&small_settings(30, 3));
        let mut seen = HashSet::new();
        for r in &outcome.records {
            assert!(seen.insert(r.smiles.clone()), "{} scored twice", r.smiles);
        }
    }

    #[test]
    fn runs_are_deterministic() {
        let settings = small_settings(25, 11);
        let (a, _) = run_with(&settings);
        let (b, _) = run_with(&settings);
        assert_eq!(a.records, b.records);
    }

    #[test]
    fn incumbent_is_monotone() {
        let (outcome, _) = run_with(&small_settings(40, 5));
        let mut best = f64::NEG_INFINITY;
        for r in &outcome.records {
            best = best.max(r.score);
            assert!(best >= r.score);
        }
        assert_eq!(best, outcome.best_score());
    }

    #[test]
    fn null_critic_matches_gating_off() {
        let mut gated = small_settings(30, 13);
        gated.gating = GatingMode::Corr;
        let off = small_settings(30, 13);
        let (a, _) = run_with(&gated);
        let (b, _) = run_with(&off);
        let strip =
            |o: &RunOutcome| -> Vec<(u32, String, f64)> {
                o.records
                    .iter()
                    .map(|r| (r.n, r.smiles.clone(), r.score))
                    .collect()
            };
        assert_eq!(strip(&a), strip(&b));
    }

    #[test]
    fn random_ranking_runs() {
        let mut settings = small_settings(20, 2);
        settings.ranking = RankingMode::Random;
        settings.ensemble.mode = EnsembleMode::Off;
        let (outcome, calls) = run_with(&settings);
        assert_eq!(outcome.records.len(), 20);
        assert_eq!(calls, 20);
        assert!(outcome.records.iter().all(|r| r.weights.is_empty()));
    }

    #[test]
    fn seed_pool_too_small_is_reported() {
        let mut settings = small_settings(10, 0);
        settings.run.n_init = 5;
        let pool: Vec<Molecule> = vec![
            Molecule::parse("CCO").unwrap(),
            Molecule::parse("CCN").unwrap(),
        ];
        let oracle = HashOracle::new();
        let editor = RuleEditor {
            mutation_rate: 0.5,
            max_atoms: 40,
        };
        let critic = NullCritic;
        let peers = Peers {
            oracle: &oracle,
            editor: &editor,
            critic: &critic,
        };
        match run(&settings, &pool, &peers, None) {
            Err(EngineError::SeedPoolTooSmall { available, needed }) => {
                assert_eq!((available, needed), (2, 5));
            }
            other => panic!("expected SeedPoolTooSmall, got {other:?}"),
        }
    }

    /// Editor that always returns the parents themselves: every child is a
    /// duplicate, so the engine must stall-inject seed molecules.
    struct EchoEditor;

    impl MoleculeEditor for EchoEditor {
        fn propose(
            &self,
            parent_a: (&Molecule, f64),
            parent_b: (&Molecule, f64),
            _n_siblings: usize,
            _rng: &mut ChaCha8Rng,
        ) -> Result<Vec<Molecule>, crate::evolve::EditorError> {
            Ok(vec![
                Molecule::parse(parent_a.0.canonical_smiles()).unwrap(),
                Molecule::parse(parent_b.0.canonical_smiles()).unwrap(),
            ])
        }
    }

    #[test]
    fn stall_injection_keeps_progress() {
        let settings = small_settings(12, 21);
        let pool = crate::seeds::bundled_seed_pool();
        let oracle = HashOracle::new();
        let critic = NullCritic;
        let peers = Peers {
            oracle: &oracle,
            editor: &EchoEditor,
            critic: &critic,
        };
        let outcome = run(&settings, &pool, &peers, None).unwrap();
        assert_eq!(outcome.records.len(), 12);
        // Initial set is 4; every subsequent generation stalls.
        assert_eq!(outcome.stall_events, 8);
        assert!(outcome.records.iter().skip(4).all(|r| r.stall));
    }

    #[test]
    fn jsonl_sink_is_flushed_per_call_and_deterministic() {
        let settings = small_settings(15, 17);
        let pool = crate::seeds::bundled_seed_pool();
        let capture = |s: &RunSettings| -> Vec<u8> {
            let oracle = HashOracle::new();
            let editor = RuleEditor {
                mutation_rate: 0.5,
                max_atoms: 40,
            };
            let critic = NullCritic;
            let peers = Peers {
                oracle: &oracle,
                editor: &editor,
                critic: &critic,
            };
            let mut buf = Vec::new();
            run(s, &pool, &peers, Some(&mut buf)).unwrap();
            buf
        };
        let a = capture(&settings);
        let b = capture(&settings);
        assert_eq!(a, b, "sink bytes differ between identical runs");
        assert_eq!(a.iter().filter(|&&c| c == b'\n').count(), 15);
        let first_line = a.split(|&c| c == b'\n').next().unwrap();
        let parsed: TrajectoryRecord = serde_json::from_slice(first_line).unwrap();
        assert_eq!(parsed.n, 1);
    }

    #[test]
    fn fit_surrogate_returns_one_model_per_kind() {
        let pool = crate::seeds::bundled_seed_pool();
        let scored: Vec<(Arc<Molecule>, f64)> = pool
            .iter()
            .take(8)
            .enumerate()
            .map(|(i, m)| (Arc::new(m.clone()), i as f64 / 10.0))
            .collect();
        let mut cache = FingerprintCache::new(FingerprintParams::default());
        let fits = fit_surrogate(&scored, &mut cache, &GpConfig::default()).unwrap();
        assert_eq!(fits.len(), 6);
        for (kind, fit) in fits {
            let model = fit.unwrap_or_else(|e| panic!("{kind} failed: {e}"));
            assert_eq!(model.train_len(), 8);
        }
    }

    #[test]
    fn single_kind_ensemble_degenerates() {
        let mut settings = small_settings(20, 9);
        settings.fingerprints.enabled = vec![FingerprintKind::Ecfp];
        let (outcome, _) = run_with(&settings);
        for r in outcome.records.iter().skip(4) {
            assert_eq!(r.weights.len(), 1);
            assert!((r.weights["ecfp"] - 1.0).abs() < 1e-12);
            if let Some(kind) = &r.gp_kind {
                assert_eq!(kind, "ecfp");
            }
        }
    }

    #[test]
    fn pool_respects_capacity() {
        // Indirect audit: with a tiny candidate pool the run still
        // completes and stays within budget.
        let mut settings = small_settings(25, 31);
        settings.run.n_cand = 3;
        let (outcome, calls) = run_with(&settings);
        assert_eq!(outcome.records.len(), 25);
        assert_eq!(calls, 25);
    }
}
