//! Zero-shot critics, the Spearman gate, and the probabilistic
//! pre-evaluation that orders the candidate pool before oracle calls.
//!
//! At each rank a uniform draw decides the branch: with probability
//! `clip(rho, 0, 1)` the critic's favorite remaining candidate is taken,
//! otherwise a surrogate is selected from the ensemble weights and its
//! Expected Improvement argmax is taken instead. The gate `rho` is the
//! Spearman correlation between oracle scores and critic scores over
//! everything scored so far; before two informative points exist the gate
//! is undefined and the critic branch is never entered.

use std::sync::Arc;
use std::time::Duration;

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, Normal};
use thiserror::Error;

use crate::molgraph::Molecule;
use crate::util::{fnv1a_bytes, hash_to_unit};

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum CriticError {
    #[error("sequence lengths differ: {left} vs {right}")]
    LengthMismatch { left: usize, right: usize },
    #[error("critic peer failed: {0}")]
    Peer(String),
}

/// Scorer requiring no task-specific training data. Scores must be
/// deterministic for a fixed molecule and critic configuration.
pub trait Critic: Send + Sync {
    fn name(&self) -> &'static str;
    fn score_batch(&self, mols: &[Arc<Molecule>]) -> Result<Vec<f64>, CriticError>;
}

/// Always scores zero; the gate never leaves the undefined state because
/// the score sequence is constant.
pub struct NullCritic;

impl Critic for NullCritic {
    fn name(&self) -> &'static str {
        "null"
    }

    fn score_batch(&self, mols: &[Arc<Molecule>]) -> Result<Vec<f64>, CriticError> {
        Ok(vec![0.0; mols.len()])
    }
}

/// Stand-in for a pretrained text-molecule scorer. Blends the standardized
/// value of a hidden target function with seeded hash noise, mixed so the
/// population Spearman correlation against the target comes out near
/// `rho_true`. Standardization (rather than a rank transform) keeps the
/// critic discriminative beyond the reference population's score range,
/// where an optimizer spends most of its time.
pub struct SyntheticAligner {
    target: Arc<dyn Fn(&Molecule) -> f64 + Send + Sync>,
    ref_mean: f64,
    ref_std: f64,
    latent_corr: f64,
    seed: u64,
}

impl SyntheticAligner {
    pub fn new(
        target: Arc<dyn Fn(&Molecule) -> f64 + Send + Sync>,
        rho_true: f64,
        seed: u64,
        reference_pool: &[Molecule],
    ) -> Self {
        let values: Vec<f64> = reference_pool.iter().map(|m| target(m)).collect();
        let n = values.len().max(1) as f64;
        let ref_mean = values.iter().sum::<f64>() / n;
        let var = values.iter().map(|v| (v - ref_mean) * (v - ref_mean)).sum::<f64>() / n;
        // Bivariate-normal relation between Spearman and the latent Pearson
        // correlation: rho_s = (6/pi) asin(r/2). Approximate for skewed
        // targets, exact enough for a stand-in.
        let rho = rho_true.clamp(0.0, 1.0);
        let latent_corr = 2.0 * (std::f64::consts::PI * rho / 6.0).sin();
        SyntheticAligner {
            target,
            ref_mean,
            ref_std: var.sqrt().max(1e-9),
            latent_corr,
            seed,
        }
    }
}

impl Critic for SyntheticAligner {
    fn name(&self) -> &'static str {
        "synthetic"
    }

    fn score_batch(&self, mols: &[Arc<Molecule>]) -> Result<Vec<f64>, CriticError> {
        let normal = Normal::new(0.0, 1.0).expect("standard normal");
        let a = self.latent_corr;
        let b = (1.0 - a * a).max(0.0).sqrt();
        Ok(mols
            .iter()
            .map(|m| {
                let z_target = ((self.target)(m) - self.ref_mean) / self.ref_std;
                let mut bytes = m.canonical_smiles().as_bytes().to_vec();
                bytes.extend_from_slice(&self.seed.to_le_bytes());
                let z_noise = normal.inverse_cdf(hash_to_unit(fnv1a_bytes(&bytes)));
                a * z_target + b * z_noise
            })
            .collect())
    }
}

/// Remote scorer speaking the JSON batch protocol:
/// request `{"task_description": ..., "smiles": [...]}`, response
/// `{"scores": [...]}` aligned by index.
pub struct ExternalHttpCritic {
    url: String,
    task_description: String,
    agent: ureq::Agent,
}

#[derive(Serialize)]
struct CriticRequest<'a> {
    task_description: &'a str,
    smiles: Vec<&'a str>,
}

#[derive(Deserialize)]
struct CriticResponse {
    scores: Vec<f64>,
}

impl ExternalHttpCritic {
    pub fn new(url: String, task_description: String, timeout_ms: u64) -> Self {
        let agent = ureq::AgentBuilder::new()
            .timeout(Duration::from_millis(timeout_ms))
            .build();
        ExternalHttpCritic {
            url,
            task_description,
            agent,
        }
    }
}

impl Critic for ExternalHttpCritic {
    fn name(&self) -> &'static str {
        "http"
    }

    fn score_batch(&self, mols: &[Arc<Molecule>]) -> Result<Vec<f64>, CriticError> {
        let request = CriticRequest {
            task_description: &self.task_description,
            smiles: mols.iter().map(|m| m.canonical_smiles()).collect(),
        };
        let response = self
            .agent
            .post(&self.url)
            .send_json(serde_json::to_value(&request).expect("serializable request"))
            .map_err(|e| CriticError::Peer(e.to_string()))?;
        let parsed: CriticResponse = response
            .into_json()
            .map_err(|e| CriticError::Peer(format!("malformed response: {e}")))?;
        if parsed.scores.len() != mols.len() {
            return Err(CriticError::Peer(format!(
                "peer returned {} scores for {} molecules",
                parsed.scores.len(),
                mols.len()
            )));
        }
        Ok(parsed.scores)
    }
}

/// Spearman correlation with average ranks for ties. `None` when fewer
/// than two points exist or either sequence is constant.
pub fn spearman(ys: &[f64], ss: &[f64]) -> Result<Option<f64>, CriticError> {
    if ys.len() != ss.len() {
        return Err(CriticError::LengthMismatch {
            left: ys.len(),
            right: ss.len(),
        });
    }
    let n = ys.len();
    if n < 2 || is_constant(ys) || is_constant(ss) {
        return Ok(None);
    }
    let ra = average_ranks(ys);
    let rb = average_ranks(ss);
    Ok(Some(pearson(&ra, &rb)))
}

fn is_constant(v: &[f64]) -> bool {
    v.iter().all(|&x| x == v[0])
}

fn average_ranks(values: &[f64]) -> Vec<f64> {
    let n = values.len();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| values[a].total_cmp(&values[b]));
    let mut ranks = vec![0.0; n];
    let mut i = 0;
    while i < n {
        let mut j = i;
        while j + 1 < n && values[order[j + 1]] == values[order[i]] {
            j += 1;
        }
        // 1-based ranks; tied entries share the average of their span.
        let avg = (i + j + 2) as f64 / 2.0;
        for &idx in &order[i..=j] {
            ranks[idx] = avg;
        }
        i = j + 1;
    }
    ranks
}

fn pearson(a: &[f64], b: &[f64]) -> f64 {
    let n = a.len() as f64;
    let ma = a.iter().sum::<f64>() / n;
    let mb = b.iter().sum::<f64>() / n;
    let mut cov = 0.0;
    let mut va = 0.0;
    let mut vb = 0.0;
    for (&x, &y) in a.iter().zip(b) {
        cov += (x - ma) * (y - mb);
        va += (x - ma) * (x - ma);
        vb += (y - mb) * (y - mb);
    }
    cov / (va * vb).sqrt()
}

/// Gate derived from the Spearman correlation between oracle and critic
/// scores; `None` maps to probability zero.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GateState {
    pub rho: Option<f64>,
}

impl GateState {
    pub fn undefined() -> Self {
        GateState { rho: None }
    }

    pub fn probability(&self) -> f64 {
        self.rho.map_or(0.0, |r| r.clamp(0.0, 1.0))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum GatingMode {
    #[default]
    /// Clipped Spearman correlation as the per-rank gate probability.
    Corr,
    /// Quantile of the critic's favorite inside the dominant GP's EI
    /// ranking, recomputed per generation.
    Llimbo,
    Off,
}

/// Which scorer ranked a candidate at its position.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RankBranch {
    Critic,
    Gp(usize),
    Poe,
    /// No usable critic at this rank; insertion order was kept.
    Order,
}

#[derive(Debug, Clone, Copy)]
pub struct RankChoice {
    pub candidate: usize,
    pub branch: RankBranch,
}

/// Candidate score tables for one generation of pre-evaluation.
pub struct RankingInputs<'a> {
    /// Critic score per candidate; `None` when critic scores are
    /// unavailable this generation.
    pub critic_scores: Option<&'a [f64]>,
    /// Resolved gate probability (already clipped).
    pub gate_probability: f64,
    /// Expected Improvement per model: `ei[m][candidate]`. Unavailable
    /// models hold `None`.
    pub ei_per_model: &'a [Option<Vec<f64>>],
    /// Selection weights aligned with `ei_per_model`.
    pub weights: &'a [f64],
    /// Fused EI table in product-of-experts mode; overrides per-model
    /// selection when present.
    pub poe_ei: Option<&'a [f64]>,
}

/// Rank the whole candidate set; the output is always an exact permutation
/// of `0..n_candidates`. One uniform draw is consumed per rank regardless
/// of the branch taken, so trajectories with an inert critic coincide with
/// gate-off trajectories under the same seed.
pub fn pre_evaluate(
    n_candidates: usize,
    inputs: &RankingInputs<'_>,
    rng: &mut ChaCha8Rng,
) -> Vec<RankChoice> {
    let mut remaining: Vec<usize> = (0..n_candidates).collect();
    let mut out = Vec::with_capacity(n_candidates);
    while !remaining.is_empty() {
        let u: f64 = rng.gen();
        let take_critic = inputs.critic_scores.is_some() && u < inputs.gate_probability;
        let choice = if take_critic {
            let scores = inputs.critic_scores.unwrap();
            let pos = argmax_by(&remaining, |c| scores[c]);
            RankChoice {
                candidate: remaining.remove(pos),
                branch: RankBranch::Critic,
            }
        } else if let Some(poe) = inputs.poe_ei {
            let pos = argmax_by(&remaining, |c| poe[c]);
            RankChoice {
                candidate: remaining.remove(pos),
                branch: RankBranch::Poe,
            }
        } else {
            match sample_model(inputs.weights, inputs.ei_per_model, rng) {
                Some(m) => {
                    let ei = inputs.ei_per_model[m].as_ref().unwrap();
                    let pos = argmax_by(&remaining, |c| ei[c]);
                    RankChoice {
                        candidate: remaining.remove(pos),
                        branch: RankBranch::Gp(m),
                    }
                }
                None => RankChoice {
                    candidate: remaining.remove(0),
                    branch: RankBranch::Order,
                },
            }
        };
        out.push(choice);
    }
    debug_assert!(
        {
            let mut picked: Vec<usize> = out.iter().map(|c| c.candidate).collect();
            picked.sort_unstable();
            picked == (0..n_candidates).collect::<Vec<usize>>()
        },
        "pre-evaluation must emit an exact permutation"
    );
    out
}

/// First index attaining the maximum, scanning remaining candidates in
/// insertion order.
fn argmax_by(remaining: &[usize], score: impl Fn(usize) -> f64) -> usize {
    let mut best = 0;
    let mut best_score = score(remaining[0]);
    for (pos, &c) in remaining.iter().enumerate().skip(1) {
        let s = score(c);
        if s > best_score {
            best = pos;
            best_score = s;
        }
    }
    best
}

/// Categorical draw over available models, masking and renormalizing the
/// weights of unavailable ones. Consumes one uniform draw when at least
/// one model is available.
fn sample_model(
    weights: &[f64],
    ei_per_model: &[Option<Vec<f64>>],
    rng: &mut ChaCha8Rng,
) -> Option<usize> {
    let total: f64 = weights
        .iter()
        .zip(ei_per_model)
        .filter(|(_, ei)| ei.is_some())
        .map(|(w, _)| *w)
        .sum();
    if total <= 0.0 {
        return None;
    }
    let u: f64 = rng.gen::<f64>() * total;
    let mut acc = 0.0;
    let mut last_available = None;
    for (m, (w, ei)) in weights.iter().zip(ei_per_model).enumerate() {
        if ei.is_none() {
            continue;
        }
        last_available = Some(m);
        acc += w;
        if u < acc {
            return Some(m);
        }
    }
    last_available
}

/// Gating probability of the quantile alternative: the critic's favorite
/// candidate is located inside the EI ranking of the highest-weighted
/// model, counting ties at half weight. With `n` candidates the extremes
/// are `1 - 1/(2n)` (critic agrees with the GP argmax) and `1/(2n)`.
pub fn gate_llimbo(critic_scores: &[f64], dominant_ei: &[f64]) -> f64 {
    debug_assert_eq!(critic_scores.len(), dominant_ei.len());
    let n = critic_scores.len();
    if n == 0 {
        return 0.0;
    }
    let mut favorite = 0;
    for (i, &s) in critic_scores.iter().enumerate().skip(1) {
        if s > critic_scores[favorite] {
            favorite = i;
        }
    }
    let target = dominant_ei[favorite];
    let below = dominant_ei.iter().filter(|&&v| v < target).count();
    let tied = dominant_ei.iter().filter(|&&v| v == target).count();
    (below as f64 + 0.5 * tied as f64) / n as f64
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use rand::SeedableRng;

    #[test]
    fn spearman_monotone_extremes() {
        assert_eq!(
            spearman(&[1.0, 2.0, 3.0], &[10.0, 20.0, 30.0]).unwrap(),
            Some(1.0)
        );
        assert_eq!(
            spearman(&[1.0, 2.0, 3.0], &[3.0, 2.0, 1.0]).unwrap(),
            Some(-1.0)
        );
    }

    #[test]
    fn spearman_hand_value() {
        // d^2 sums to 6: rho = 1 - 6*6 / (3*8) = -0.5.
        let rho = spearman(&[1.0, 2.0, 3.0], &[3.0, 1.0, 2.0]).unwrap().unwrap();
        assert_relative_eq!(rho, -0.5, epsilon = 1e-12);
    }

    #[test]
    fn spearman_tied_ranks() {
        let rho = spearman(&[1.0, 2.0, 3.0, 4.0], &[1.0, 1.0, 2.0, 2.0])
            .unwrap()
            .unwrap();
        // ranks ss = (1.5, 1.5, 3.5, 3.5); Pearson against (1,2,3,4).
        assert_relative_eq!(rho, 0.8944271909999159, epsilon = 1e-12);
    }

    #[test]
    fn spearman_undefined_cases() {
        assert_eq!(spearman(&[1.0], &[2.0]).unwrap(), None);
        assert_eq!(spearman(&[1.0, 2.0], &[5.0, 5.0]).unwrap(), None);
        assert_eq!(spearman(&[3.0, 3.0], &[1.0, 2.0]).unwrap(), None);
        assert!(matches!(
            spearman(&[1.0], &[1.0, 2.0]),
            Err(CriticError::LengthMismatch { .. })
        ));
    }

    #[test]
    fn spearman_invariant_under_monotone_transforms() {
        let ys = [0.3, 0.9, 0.1, 0.5, 0.7];
        let ss = [1.0, 4.0, 0.5, 2.0, 2.5];
        let base = spearman(&ys, &ss).unwrap().unwrap();
        let exp: Vec<f64> = ss.iter().map(|s| s.exp()).collect();
        let affine: Vec<f64> = ss.iter().map(|s| 3.0 * s + 11.0).collect();
        assert_eq!(spearman(&ys, &exp).unwrap().unwrap(), base);
        assert_eq!(spearman(&ys, &affine).unwrap().unwrap(), base);
    }

    #[test]
    fn gate_state_probability() {
        assert_eq!(GateState::undefined().probability(), 0.0);
        assert_eq!(GateState { rho: Some(-0.4) }.probability(), 0.0);
        assert_eq!(GateState { rho: Some(0.6) }.probability(), 0.6);
        assert_eq!(GateState { rho: Some(1.7) }.probability(), 1.0);
    }

    fn simple_inputs<'a>(
        critic: Option<&'a [f64]>,
        gate: f64,
        ei: &'a [Option<Vec<f64>>],
        weights: &'a [f64],
    ) -> RankingInputs<'a> {
        RankingInputs {
            critic_scores: critic,
            gate_probability: gate,
            ei_per_model: ei,
            weights,
            poe_ei: None,
        }
    }

    #[test]
    fn pre_evaluate_is_a_permutation() {
        let ei = vec![Some(vec![0.1, 0.9, 0.4, 0.2, 0.6])];
        let critic = [0.5, 0.1, 0.9, 0.3, 0.2];
        let inputs = simple_inputs(Some(&critic), 0.5, &ei, &[1.0]);
        for seed in 0..50 {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let order = pre_evaluate(5, &inputs, &mut rng);
            let mut picked: Vec<usize> = order.iter().map(|c| c.candidate).collect();
            picked.sort_unstable();
            assert_eq!(picked, vec![0, 1, 2, 3, 4]);
        }
    }

    #[test]
    fn gate_one_always_takes_critic_in_descending_order() {
        let ei = vec![Some(vec![0.9, 0.1, 0.5])];
        let critic = [0.2, 0.9, 0.5];
        let inputs = simple_inputs(Some(&critic), 1.0, &ei, &[1.0]);
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let order = pre_evaluate(3, &inputs, &mut rng);
        assert!(order.iter().all(|c| c.branch == RankBranch::Critic));
        let picked: Vec<usize> = order.iter().map(|c| c.candidate).collect();
        assert_eq!(picked, vec![1, 2, 0]);
    }

    #[test]
    fn gate_zero_never_takes_critic() {
        let ei = vec![Some(vec![0.9, 0.1, 0.5, 0.7])];
        let critic = [1.0, 2.0, 3.0, 4.0];
        let inputs = simple_inputs(Some(&critic), 0.0, &ei, &[1.0]);
        for seed in 0..200 {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let order = pre_evaluate(4, &inputs, &mut rng);
            assert!(order.iter().all(|c| c.branch != RankBranch::Critic));
        }
    }

    #[test]
    fn critic_branch_frequency_tracks_gate() {
        let ei = vec![Some(vec![0.0; 20])];
        let critic = [0.0; 20];
        let inputs = simple_inputs(Some(&critic), 0.6, &ei, &[1.0]);
        let mut taken = 0usize;
        let mut total = 0usize;
        for seed in 0..500 {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            for choice in pre_evaluate(20, &inputs, &mut rng) {
                total += 1;
                if choice.branch == RankBranch::Critic {
                    taken += 1;
                }
            }
        }
        let freq = taken as f64 / total as f64;
        assert!((freq - 0.6).abs() < 0.02, "critic frequency {freq}");
    }

    #[test]
    fn unavailable_models_are_masked() {
        let ei = vec![None, Some(vec![0.1, 0.9])];
        let inputs = simple_inputs(None, 0.0, &ei, &[0.9, 0.1]);
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let order = pre_evaluate(2, &inputs, &mut rng);
        assert_eq!(order[0].branch, RankBranch::Gp(1));
        assert_eq!(order[0].candidate, 1);
    }

    #[test]
    fn poe_mode_overrides_selection() {
        let ei = vec![Some(vec![0.9, 0.1])];
        let poe = [0.1, 0.9];
        let inputs = RankingInputs {
            critic_scores: None,
            gate_probability: 0.0,
            ei_per_model: &ei,
            weights: &[1.0],
            poe_ei: Some(&poe),
        };
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let order = pre_evaluate(2, &inputs, &mut rng);
        assert_eq!(order[0].candidate, 1);
        assert_eq!(order[0].branch, RankBranch::Poe);
    }

    #[test]
    fn llimbo_quantile_extremes() {
        // Critic favorite is the EI argmax.
        let critic = [0.1, 0.9, 0.3, 0.2];
        let ei = [0.2, 0.9, 0.5, 0.1];
        assert_relative_eq!(gate_llimbo(&critic, &ei), 1.0 - 1.0 / 8.0);
        // Critic favorite is the EI worst.
        let ei_worst = [0.9, 0.0, 0.5, 0.4];
        assert_relative_eq!(gate_llimbo(&critic, &ei_worst), 1.0 / 8.0);
        // Singleton candidate set sits at the midpoint.
        assert_relative_eq!(gate_llimbo(&[0.7], &[0.4]), 0.5);
    }

    #[test]
    fn null_critic_scores_zero() {
        let mols = vec![Arc::new(Molecule::parse("CCO").unwrap())];
        assert_eq!(NullCritic.score_batch(&mols).unwrap(), vec![0.0]);
    }

    #[test]
    fn synthetic_aligner_is_deterministic_and_calibrated() {
        let pool = crate::seeds::bundled_seed_pool();
        let target: Arc<dyn Fn(&Molecule) -> f64 + Send + Sync> =
            Arc::new(|m: &Molecule| m.atom_count() as f64);
        let aligner = SyntheticAligner::new(Arc::clone(&target), 0.8, 17, &pool);
        let mols: Vec<Arc<Molecule>> = pool.iter().map(|m| Arc::new(m.clone())).collect();
        let once = aligner.score_batch(&mols).unwrap();
        let twice = aligner.score_batch(&mols).unwrap();
        assert_eq!(once, twice);

        let targets: Vec<f64> = pool.iter().map(|m| target(m)).collect();
        let rho = spearman(&targets, &once).unwrap().unwrap();
        assert!(
            (rho - 0.8).abs() < 0.12,
            "calibrated Spearman was {rho}, expected about 0.8"
        );

        let independent = SyntheticAligner::new(target, 0.0, 17, &pool);
        let scores = independent.score_batch(&mols).unwrap();
        let rho0 = spearman(&targets, &scores).unwrap().unwrap();
        assert!(rho0.abs() < 0.15, "rho_true = 0 gave Spearman {rho0}");
    }
}
