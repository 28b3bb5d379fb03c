//! Offspring generation: elite selection, fitness-proportional parent
//! sampling, and rule-based crossover/mutation on molecular graphs. An
//! external HTTP editor can stand in for the rule set, with optional
//! fallback when the peer is unreachable.
//!
//! The rule set is a reduced graph-GA: crossover cuts one random non-ring
//! single bond in each parent and joins one fragment of each with a new
//! single bond; mutation applies one of element substitution, bond-order
//! step, terminal append, or terminal delete. Children are revalidated
//! from scratch, so hydrogens are re-derived and miswired edits are
//! rejected and retried.

use std::collections::BTreeMap;
use std::sync::Arc;
use std::time::Duration;

use log::warn;
use rand::seq::SliceRandom;
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::molgraph::{AtomSpec, BondOrder, Element, MolError, Molecule, ELEMENTS};

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum EditorError {
    #[error("external editor unavailable: {0}")]
    Unavailable(String),
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(default)]
pub struct EvolveConfig {
    pub n_elite: usize,
    pub n_pairs: usize,
    pub n_siblings: usize,
    /// Probability that a crossover child receives one mutation.
    pub mutation_rate: f64,
    /// Children larger than this are rejected like valence failures.
    pub max_atoms: usize,
}

impl Default for EvolveConfig {
    fn default() -> Self {
        EvolveConfig {
            n_elite: 30,
            n_pairs: 10,
            n_siblings: 5,
            mutation_rate: 0.5,
            max_atoms: 60,
        }
    }
}

impl EvolveConfig {
    pub fn validate(&self) -> Result<(), String> {
        if self.n_elite < 2 {
            return Err("evolve.n_elite must be at least 2".into());
        }
        if self.n_pairs < 1 || self.n_siblings < 1 {
            return Err("evolve.n_pairs and evolve.n_siblings must be at least 1".into());
        }
        if !(0.0..=1.0).contains(&self.mutation_rate) {
            return Err("evolve.mutation_rate must lie in [0, 1]".into());
        }
        if self.max_atoms < 2 {
            return Err("evolve.max_atoms must be at least 2".into());
        }
        Ok(())
    }
}

/// Two distinct elite indices drawn by score-proportional roulette over
/// `y - min(y) + 1e-6`; the second draw renormalizes over the remainder.
pub fn sample_parents(scores: &[f64], rng: &mut ChaCha8Rng) -> (usize, usize) {
    assert!(scores.len() >= 2, "need at least two elite molecules");
    let min = scores.iter().cloned().fold(f64::INFINITY, f64::min);
    let masses: Vec<f64> = scores.iter().map(|y| y - min + 1e-6).collect();
    let first = roulette(&masses, None, rng);
    let second = roulette(&masses, Some(first), rng);
    (first, second)
}

fn roulette(masses: &[f64], skip: Option<usize>, rng: &mut ChaCha8Rng) -> usize {
    let total: f64 = masses
        .iter()
        .enumerate()
        .filter(|(i, _)| Some(*i) != skip)
        .map(|(_, m)| *m)
        .sum();
    let u: f64 = rng.gen::<f64>() * total;
    let mut acc = 0.0;
    let mut last = 0;
    for (i, &m) in masses.iter().enumerate() {
        if Some(i) == skip {
            continue;
        }
        last = i;
        acc += m;
        if u < acc {
            return i;
        }
    }
    last
}

type Graph = (Vec<AtomSpec>, Vec<(usize, usize, BondOrder)>);

fn graph_of(mol: &Molecule) -> Graph {
    let atoms = mol
        .atoms()
        .iter()
        .map(|a| AtomSpec {
            element: a.element,
            aromatic: a.aromatic,
            formal_charge: a.formal_charge,
            pinned_hydrogens: None,
        })
        .collect();
    let bonds = mol.bonds().iter().map(|b| (b.a, b.b, b.order)).collect();
    (atoms, bonds)
}

/// Non-ring single bonds; the only crossover cut sites.
fn cuttable_bonds(mol: &Molecule) -> Vec<usize> {
    mol.bonds()
        .iter()
        .enumerate()
        .filter(|(_, b)| !b.ring && b.order == BondOrder::Single)
        .map(|(i, _)| i)
        .collect()
}

/// Atoms reachable from `start` without traversing `cut_bond`.
fn fragment_atoms(mol: &Molecule, start: usize, cut_bond: usize) -> Vec<usize> {
    let mut seen = vec![false; mol.atom_count()];
    let mut stack = vec![start];
    seen[start] = true;
    let mut out = Vec::new();
    while let Some(u) = stack.pop() {
        out.push(u);
        for &(v, bidx) in mol.neighbors(u) {
            if bidx != cut_bond && !seen[v] {
                seen[v] = true;
                stack.push(v);
            }
        }
    }
    out
}

/// Copy one fragment of `mol` into the accumulating child graph, returning
/// the new index of the dangling cut endpoint.
fn splice_fragment(mol: &Molecule, atoms_in: &[usize], dangling: usize, child: &mut Graph) -> usize {
    let offset_map: BTreeMap<usize, usize> = atoms_in
        .iter()
        .enumerate()
        .map(|(new, &old)| (old, child.0.len() + new))
        .collect();
    let (specs, bonds) = graph_of(mol);
    for &old in atoms_in {
        child.0.push(specs[old]);
    }
    for &(a, b, order) in &bonds {
        if let (Some(&na), Some(&nb)) = (offset_map.get(&a), offset_map.get(&b)) {
            child.1.push((na, nb, order));
        }
    }
    offset_map[&dangling]
}

fn crossover(a: &Molecule, b: &Molecule, rng: &mut ChaCha8Rng) -> Option<Graph> {
    let cuts_a = cuttable_bonds(a);
    let cuts_b = cuttable_bonds(b);
    if cuts_a.is_empty() || cuts_b.is_empty() {
        return None;
    }
    let cut_a = cuts_a[rng.gen_range(0..cuts_a.len())];
    let cut_b = cuts_b[rng.gen_range(0..cuts_b.len())];
    let bond_a = a.bonds()[cut_a];
    let bond_b = b.bonds()[cut_b];
    let keep_a = if rng.gen::<bool>() { bond_a.a } else { bond_a.b };
    let keep_b = if rng.gen::<bool>() { bond_b.a } else { bond_b.b };
    let frag_a = fragment_atoms(a, keep_a, cut_a);
    let frag_b = fragment_atoms(b, keep_b, cut_b);

    let mut child: Graph = (Vec::new(), Vec::new());
    let join_a = splice_fragment(a, &frag_a, keep_a, &mut child);
    let join_b = splice_fragment(b, &frag_b, keep_b, &mut child);
    child.1.push((join_a, join_b, BondOrder::Single));
    Some(child)
}

// Element draw for appended terminal atoms, weighted toward organics.
const APPEND_ELEMENTS: [Element; 12] = [
    Element::C,
    Element::C,
    Element::C,
    Element::C,
    Element::N,
    Element::N,
    Element::O,
    Element::O,
    Element::F,
    Element::S,
    Element::Cl,
    Element::Br,
];

fn mutate(graph: &mut Graph, rng: &mut ChaCha8Rng) -> bool {
    match rng.gen_range(0..4u8) {
        0 => substitute_element(graph, rng),
        1 => step_bond_order(graph, rng),
        2 => append_terminal(graph, rng),
        _ => delete_terminal(graph, rng),
    }
}

fn substitute_element(graph: &mut Graph, rng: &mut ChaCha8Rng) -> bool {
    let idx = rng.gen_range(0..graph.0.len());
    let current = graph.0[idx].element;
    let choices: Vec<Element> = ELEMENTS
        .iter()
        .copied()
        .filter(|&e| e != current && (!graph.0[idx].aromatic || e.aromatic_capable()))
        .collect();
    let Some(&new) = choices.as_slice().choose(rng) else {
        return false;
    };
    graph.0[idx].element = new;
    true
}

fn step_bond_order(graph: &mut Graph, rng: &mut ChaCha8Rng) -> bool {
    let editable: Vec<usize> = graph
        .1
        .iter()
        .enumerate()
        .filter(|(_, (_, _, o))| *o != BondOrder::Aromatic)
        .map(|(i, _)| i)
        .collect();
    let Some(&bidx) = editable.as_slice().choose(rng) else {
        return false;
    };
    let up = rng.gen::<bool>();
    let current = graph.1[bidx].2;
    let next = match (current, up) {
        (BondOrder::Single, true) => BondOrder::Double,
        (BondOrder::Double, true) => BondOrder::Triple,
        (BondOrder::Double, false) => BondOrder::Single,
        (BondOrder::Triple, false) => BondOrder::Double,
        _ => return false,
    };
    graph.1[bidx].2 = next;
    true
}

fn append_terminal(graph: &mut Graph, rng: &mut ChaCha8Rng) -> bool {
    let anchor = rng.gen_range(0..graph.0.len());
    let element = *APPEND_ELEMENTS.as_slice().choose(rng).expect("non-empty");
    let new_idx = graph.0.len();
    graph.0.push(AtomSpec::new(element));
    graph.1.push((anchor, new_idx, BondOrder::Single));
    true
}

fn delete_terminal(graph: &mut Graph, rng: &mut ChaCha8Rng) -> bool {
    if graph.0.len() <= 2 {
        return false;
    }
    let mut degree = vec![0usize; graph.0.len()];
    for &(a, b, _) in &graph.1 {
        degree[a] += 1;
        degree[b] += 1;
    }
    let terminals: Vec<usize> = (0..graph.0.len()).filter(|&i| degree[i] == 1).collect();
    let Some(&victim) = terminals.as_slice().choose(rng) else {
        return false;
    };
    graph.0.remove(victim);
    graph.1.retain(|&(a, b, _)| a != victim && b != victim);
    for (a, b, _) in &mut graph.1 {
        if *a > victim {
            *a -= 1;
        }
        if *b > victim {
            *b -= 1;
        }
    }
    true
}

/// Crossover plus optional mutation, retried up to ten times per child.
/// Parents without a cuttable bond fall back to a mutated copy of one
/// parent. Returns up to `n_siblings` valid children with distinct
/// canonical forms; fewer (possibly zero) when attempts keep failing.
pub fn edit_mol_rules(
    a: &Molecule,
    b: &Molecule,
    n_siblings: usize,
    mutation_rate: f64,
    max_atoms: usize,
    rng: &mut ChaCha8Rng,
) -> Vec<Molecule> {
    let mut out: Vec<Molecule> = Vec::new();
    for _ in 0..n_siblings {
        for _attempt in 0..10 {
            let (mut graph, force_mutation) = match crossover(a, b, rng) {
                Some(g) => (g, false),
                None => {
                    // Ring-only or single-atom parents: mutation-only path.
                    let parent = if rng.gen::<bool>() { a } else { b };
                    (graph_of(parent), true)
                }
            };
            let mutating = force_mutation || rng.gen::<f64>() < mutation_rate;
            if mutating && !mutate(&mut graph, rng) {
                continue;
            }
            if graph.0.len() > max_atoms {
                continue;
            }
            match Molecule::from_graph(graph.0, graph.1, None) {
                Ok(child) => {
                    if !out
                        .iter()
                        .any(|m| m.canonical_smiles() == child.canonical_smiles())
                    {
                        out.push(child);
                    }
                    break;
                }
                Err(MolError::Valence { .. } | MolError::InvalidGraph(_)) => continue,
                Err(e) => {
                    warn!("unexpected edit failure: {e}");
                    continue;
                }
            }
        }
    }
    out
}

/// Grow a molecule by appending terminal atoms until its canonical form is
/// one the caller has not seen. Atom count increases every step, so a novel
/// form appears quickly; used to break total stalls.
pub fn grow_novel(
    mol: &Molecule,
    taken: &dyn Fn(&str) -> bool,
    max_steps: usize,
    rng: &mut ChaCha8Rng,
) -> Option<Molecule> {
    let mut current = mol.clone();
    for _ in 0..max_steps {
        let mut graph = graph_of(&current);
        append_terminal(&mut graph, rng);
        if let Ok(next) = Molecule::from_graph(graph.0, graph.1, None) {
            if !taken(next.canonical_smiles()) {
                return Some(next);
            }
            current = next;
        }
    }
    None
}

/// Produces candidate children for one elite pair.
pub trait MoleculeEditor: Send + Sync {
    fn propose(
        &self,
        parent_a: (&Molecule, f64),
        parent_b: (&Molecule, f64),
        n_siblings: usize,
        rng: &mut ChaCha8Rng,
    ) -> Result<Vec<Molecule>, EditorError>;
}

pub struct RuleEditor {
    pub mutation_rate: f64,
    pub max_atoms: usize,
}

impl MoleculeEditor for RuleEditor {
    fn propose(
        &self,
        parent_a: (&Molecule, f64),
        parent_b: (&Molecule, f64),
        n_siblings: usize,
        rng: &mut ChaCha8Rng,
    ) -> Result<Vec<Molecule>, EditorError> {
        Ok(edit_mol_rules(
            parent_a.0,
            parent_b.0,
            n_siblings,
            self.mutation_rate,
            self.max_atoms,
            rng,
        ))
    }
}

/// Remote editor speaking the JSON pair protocol: request
/// `{"task_description", "parents": [{"smiles", "score"} x2], "n_siblings"}`,
/// response `{"smiles": [...]}`. Invalid SMILES in the response are dropped
/// with a logged count.
pub struct ExternalHttpEditor {
    url: String,
    task_description: String,
    agent: ureq::Agent,
    fallback: Option<RuleEditor>,
}

#[derive(Serialize)]
struct EditorParent<'a> {
    smiles: &'a str,
    score: f64,
}

#[derive(Serialize)]
struct EditorRequest<'a> {
    task_description: &'a str,
    parents: [EditorParent<'a>; 2],
    n_siblings: usize,
}

#[derive(Deserialize)]
struct EditorResponse {
    smiles: Vec<String>,
}

impl ExternalHttpEditor {
    pub fn new(
        url: String,
        task_description: String,
        timeout_ms: u64,
        fallback: Option<RuleEditor>,
    ) -> Self {
        let agent = ureq::AgentBuilder::new()
            .timeout(Duration::from_millis(timeout_ms))
            .build();
        ExternalHttpEditor {
            url,
            task_description,
            agent,
            fallback,
        }
    }

    fn call_peer(
        &self,
        parent_a: (&Molecule, f64),
        parent_b: (&Molecule, f64),
        n_siblings: usize,
    ) -> Result<Vec<Molecule>, EditorError> {
        let request = EditorRequest {
            task_description: &self.task_description,
            parents: [
                EditorParent {
                    smiles: parent_a.0.canonical_smiles(),
                    score: parent_a.1,
                },
                EditorParent {
                    smiles: parent_b.0.canonical_smiles(),
                    score: parent_b.1,
                },
            ],
            n_siblings,
        };
        let response = self
            .agent
            .post(&self.url)
            .send_json(serde_json::to_value(&request).expect("serializable request"))
            .map_err(|e| EditorError::Unavailable(e.to_string()))?;
        let parsed: EditorResponse = response
            .into_json()
            .map_err(|e| EditorError::Unavailable(format!("malformed response: {e}")))?;

        let mut children = Vec::new();
        let mut dropped = 0usize;
        for smiles in &parsed.smiles {
            match Molecule::parse(smiles) {
                Ok(m) => children.push(m),
                Err(_) => dropped += 1,
            }
        }
        if dropped > 0 {
            warn!("external editor returned {dropped} invalid SMILES");
        }
        children.truncate(n_siblings);
        Ok(children)
    }
}

impl MoleculeEditor for ExternalHttpEditor {
    fn propose(
        &self,
        parent_a: (&Molecule, f64),
        parent_b: (&Molecule, f64),
        n_siblings: usize,
        rng: &mut ChaCha8Rng,
    ) -> Result<Vec<Molecule>, EditorError> {
        match self.call_peer(parent_a, parent_b, n_siblings) {
            Ok(children) => Ok(children),
            Err(e) => match &self.fallback {
                Some(rules) => {
                    warn!("external editor failed ({e}); using rule-based editing");
                    rules.propose(parent_a, parent_b, n_siblings, rng)
                }
                None => Err(e),
            },
        }
    }
}

/// Elite ordering: descending score, ties resolved by earlier position in
/// the scored list (i.e. earlier oracle call).
pub fn elite_order(scores: &[f64]) -> Vec<usize> {
    let mut idx: Vec<usize> = (0..scores.len()).collect();
    idx.sort_by(|&a, &b| scores[b].total_cmp(&scores[a]).then(a.cmp(&b)));
    idx
}

/// One generation of offspring: select the elite, sample `n_pairs` parent
/// pairs, edit, and self-deduplicate by canonical form. Callers dedup
/// against previously scored molecules themselves.
pub fn gen_offspring(
    scored: &[(Arc<Molecule>, f64)],
    cfg: &EvolveConfig,
    editor: &dyn MoleculeEditor,
    rng: &mut ChaCha8Rng,
) -> Result<Vec<Molecule>, EditorError> {
    assert!(!scored.is_empty());
    let order = elite_order(&scored.iter().map(|(_, y)| *y).collect::<Vec<f64>>());
    let elite: Vec<&(Arc<Molecule>, f64)> =
        order.iter().take(cfg.n_elite).map(|&i| &scored[i]).collect();

    let mut offspring: Vec<Molecule> = Vec::new();
    let mut seen: Vec<String> = Vec::new();
    for _ in 0..cfg.n_pairs {
        let (pa, pb) = if elite.len() >= 2 {
            let scores: Vec<f64> = elite.iter().map(|(_, y)| *y).collect();
            let (i, j) = sample_parents(&scores, rng);
            (elite[i], elite[j])
        } else {
            // Degenerate single-survivor population: self-pairing keeps the
            // loop productive through the mutation-only path.
            (elite[0], elite[0])
        };
        let children = editor.propose(
            (pa.0.as_ref(), pa.1),
            (pb.0.as_ref(), pb.1),
            cfg.n_siblings,
            rng,
        )?;
        for child in children.into_iter().take(cfg.n_siblings) {
            if !seen.iter().any(|c| c == child.canonical_smiles()) {
                seen.push(child.canonical_smiles().to_string());
                offspring.push(child);
            }
        }
    }
    debug_assert!(offspring.len() <= cfg.n_pairs * cfg.n_siblings);
    Ok(offspring)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use std::collections::BTreeMap;

    fn mol(s: &str) -> Molecule {
        Molecule::parse(s).unwrap()
    }

    fn heavy_atoms(m: &Molecule) -> BTreeMap<Element, usize> {
        let mut counts = BTreeMap::new();
        for a in m.atoms() {
            *counts.entry(a.element).or_insert(0) += 1;
        }
        counts
    }

    #[test]
    fn parents_are_distinct() {
        let scores = [0.4, 0.4, 0.4, 0.9];
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for _ in 0..1000 {
            let (a, b) = sample_parents(&scores, &mut rng);
            assert_ne!(a, b);
        }
    }

    #[test]
    fn equal_scores_sample_uniformly() {
        let scores = vec![0.5; 10];
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let draws = 10_000;
        let mut counts = vec![0usize; 10];
        for _ in 0..draws {
            let (a, _) = sample_parents(&scores, &mut rng);
            counts[a] += 1;
        }
        let expected = draws as f64 / 10.0;
        let chi2: f64 = counts
            .iter()
            .map(|&c| (c as f64 - expected).powi(2) / expected)
            .sum();
        // 0.01 critical value for 9 degrees of freedom.
        assert!(chi2 < 21.666, "chi-square {chi2} too large for uniformity");
    }

    #[test]
    fn dominant_score_matches_roulette_mass() {
        let scores = [0.5, 0.3, 0.2];
        let min = 0.2;
        let masses: Vec<f64> = scores.iter().map(|y| y - min + 1e-6).collect();
        let expected = masses[0] / masses.iter().sum::<f64>();
        let mut rng = ChaCha8Rng::seed_from_u64(23);
        let draws = 20_000;
        let mut hits = 0usize;
        for _ in 0..draws {
            let (a, _) = sample_parents(&scores, &mut rng);
            if a == 0 {
                hits += 1;
            }
        }
        let freq = hits as f64 / draws as f64;
        assert!(
            (freq - expected).abs() < 0.02,
            "frequency {freq} vs expected {expected}"
        );
    }

    #[test]
    fn crossover_children_stay_within_parent_atoms() {
        let a = mol("CCO");
        let b = mol("CCN");
        let mut union = heavy_atoms(&a);
        for (el, n) in heavy_atoms(&b) {
            *union.entry(el).or_insert(0) += n;
        }
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        for _ in 0..100 {
            let children = edit_mol_rules(&a, &b, 5, 0.0, 60, &mut rng);
            for child in &children {
                child.validate().unwrap();
                for (el, n) in heavy_atoms(child) {
                    assert!(
                        union.get(&el).copied().unwrap_or(0) >= n,
                        "child {} exceeds parent atom pool",
                        child.canonical_smiles()
                    );
                }
            }
        }
    }

    #[test]
    fn ring_only_parents_fall_back_to_mutation() {
        let benzene = mol("c1ccccc1");
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let children = edit_mol_rules(&benzene, &benzene, 5, 0.0, 60, &mut rng);
        assert!(!children.is_empty(), "fallback path produced nothing");
        for child in &children {
            child.validate().unwrap();
            assert_ne!(child.canonical_smiles(), benzene.canonical_smiles());
        }
    }

    #[test]
    fn children_are_valid_and_distinct() {
        let a = mol("CC(C)NCC(O)c1ccc(O)cc1");
        let b = mol("CC(=O)Oc1ccccc1C(=O)O");
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let children = edit_mol_rules(&a, &b, 5, 0.5, 60, &mut rng);
        let mut seen = std::collections::HashSet::new();
        for child in &children {
            child.validate().unwrap();
            assert!(seen.insert(child.canonical_smiles().to_string()));
        }
    }

    #[test]
    fn offspring_respects_limits_and_is_deterministic() {
        let scored: Vec<(Arc<Molecule>, f64)> = [
            ("CCO", 0.3),
            ("CCN", 0.5),
            ("c1ccccc1", 0.8),
            ("CC(C)O", 0.2),
        ]
        .iter()
        .map(|(s, y)| (Arc::new(mol(s)), *y))
        .collect();
        let cfg = EvolveConfig {
            n_elite: 3,
            n_pairs: 4,
            n_siblings: 3,
            mutation_rate: 0.5,
            max_atoms: 60,
        };
        let editor = RuleEditor {
            mutation_rate: cfg.mutation_rate,
            max_atoms: cfg.max_atoms,
        };
        let run = |seed: u64| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            gen_offspring(&scored, &cfg, &editor, &mut rng)
                .unwrap()
                .iter()
                .map(|m| m.canonical_smiles().to_string())
                .collect::<Vec<String>>()
        };
        let first = run(42);
        assert!(first.len() <= cfg.n_pairs * cfg.n_siblings);
        assert_eq!(first, run(42));
        let mut unique = first.clone();
        unique.sort();
        unique.dedup();
        assert_eq!(unique.len(), first.len());
    }

    #[test]
    fn two_survivors_still_generate() {
        let scored: Vec<(Arc<Molecule>, f64)> = [("CCO", 0.3), ("CCN", 0.5)]
            .iter()
            .map(|(s, y)| (Arc::new(mol(s)), *y))
            .collect();
        let cfg = EvolveConfig::default();
        let editor = RuleEditor {
            mutation_rate: 0.5,
            max_atoms: 60,
        };
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let offspring = gen_offspring(&scored, &cfg, &editor, &mut rng).unwrap();
        assert!(!offspring.is_empty());
    }

    #[test]
    fn elite_order_is_stable_on_ties() {
        let order = elite_order(&[0.5, 0.9, 0.5, 0.9, 0.1]);
        assert_eq!(order, vec![1, 3, 0, 2, 4]);
    }

    #[test]
    fn max_atoms_caps_growth() {
        let a = mol("CCCCCCCCCC");
        let b = mol("CCCCCCCCCC");
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        for _ in 0..50 {
            for child in edit_mol_rules(&a, &b, 5, 1.0, 12, &mut rng) {
                assert!(child.atom_count() <= 12);
            }
        }
    }
}
