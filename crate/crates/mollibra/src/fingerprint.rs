//! Sparse count-vector representations of molecules.
//!
//! Six kinds are supported: circular environments over structural or
//! pharmacophoric atom invariants (ECFP/FCFP), hashed atom pairs with
//! topological distance, linear paths, pharmacophore triples with binned
//! distances, and a bag of characters over the canonical SMILES. All kinds
//! except the bag of characters operate on the graph and are invariant to
//! input atom order; the bag of characters reads the canonical string, so
//! it is order-invariant as well.
//!
//! Feature hashes are 32-bit keys of a sparse map. No folding is applied:
//! Tanimoto similarity on the sparse maps is exact, and `dim_hint` is only
//! recorded for interoperability.

use std::collections::{BTreeMap, HashMap, HashSet, VecDeque};
use std::fmt;
use std::str::FromStr;
use std::sync::Arc;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::molgraph::{Element, Molecule};

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum FingerprintError {
    #[error("fingerprint kind {0} is not enabled in the configuration")]
    UnsupportedKind(FingerprintKind),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FingerprintKind {
    Ecfp,
    Fcfp,
    AtomPair,
    Path,
    PharmLite,
    Boc,
}

pub const ALL_KINDS: [FingerprintKind; 6] = [
    FingerprintKind::Ecfp,
    FingerprintKind::Fcfp,
    FingerprintKind::AtomPair,
    FingerprintKind::Path,
    FingerprintKind::PharmLite,
    FingerprintKind::Boc,
];

impl FingerprintKind {
    pub fn name(self) -> &'static str {
        match self {
            FingerprintKind::Ecfp => "ecfp",
            FingerprintKind::Fcfp => "fcfp",
            FingerprintKind::AtomPair => "atom_pair",
            FingerprintKind::Path => "path",
            FingerprintKind::PharmLite => "pharm_lite",
            FingerprintKind::Boc => "boc",
        }
    }
}

impl fmt::Display for FingerprintKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for FingerprintKind {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        ALL_KINDS
            .iter()
            .copied()
            .find(|k| k.name() == s)
            .ok_or_else(|| format!("unknown fingerprint kind '{s}'"))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct RadiusParams {
    pub radius: u32,
}

impl Default for RadiusParams {
    fn default() -> Self {
        RadiusParams { radius: 2 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct PathParams {
    pub max_len: usize,
}

impl Default for PathParams {
    fn default() -> Self {
        PathParams { max_len: 7 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct AtomPairParams {
    pub max_dist: usize,
}

impl Default for AtomPairParams {
    fn default() -> Self {
        AtomPairParams { max_dist: 15 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct FingerprintParams {
    pub enabled: Vec<FingerprintKind>,
    pub ecfp: RadiusParams,
    pub fcfp: RadiusParams,
    pub path: PathParams,
    pub atom_pair: AtomPairParams,
    pub dim_hint: u32,
}

impl Default for FingerprintParams {
    fn default() -> Self {
        FingerprintParams {
            enabled: ALL_KINDS.to_vec(),
            ecfp: RadiusParams::default(),
            fcfp: RadiusParams::default(),
            path: PathParams::default(),
            atom_pair: AtomPairParams::default(),
            dim_hint: 2048,
        }
    }
}

/// Sparse non-negative count vector tagged with its kind.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Fingerprint {
    pub kind: FingerprintKind,
    pub counts: BTreeMap<u32, u32>,
    pub dim_hint: u32,
}

impl Fingerprint {
    pub fn is_empty(&self) -> bool {
        self.counts.is_empty()
    }

    pub fn total_count(&self) -> u64 {
        self.counts.values().map(|&c| u64::from(c)).sum()
    }

    /// Dot product over shared keys; keys iterate in ascending order on
    /// both sides, so the result is bitwise symmetric.
    pub fn dot(&self, other: &Fingerprint) -> f64 {
        let (small, large) = if self.counts.len() <= other.counts.len() {
            (self, other)
        } else {
            (other, self)
        };
        let mut acc = 0.0;
        for (k, &a) in &small.counts {
            if let Some(&b) = large.counts.get(k) {
                acc += f64::from(a) * f64::from(b);
            }
        }
        acc
    }

    pub fn norm_sq(&self) -> f64 {
        self.counts
            .values()
            .map(|&c| f64::from(c) * f64::from(c))
            .sum()
    }
}

/// FNV-1a over an integer word stream; stable across platforms and builds.
fn fnv(words: &[u64]) -> u64 {
    let mut h: u64 = 0xcbf2_9ce4_8422_2325;
    for &w in words {
        for byte in w.to_le_bytes() {
            h ^= u64::from(byte);
            h = h.wrapping_mul(0x0000_0100_0000_01b3);
        }
    }
    h
}

fn fold32(h: u64) -> u32 {
    (h ^ (h >> 32)) as u32
}

pub fn compute_fingerprint(
    mol: &Molecule,
    kind: FingerprintKind,
    params: &FingerprintParams,
) -> Result<Fingerprint, FingerprintError> {
    if !params.enabled.contains(&kind) {
        return Err(FingerprintError::UnsupportedKind(kind));
    }
    let counts = match kind {
        FingerprintKind::Ecfp => circular_counts(mol, params.ecfp.radius, structural_invariant),
        FingerprintKind::Fcfp => circular_counts(mol, params.fcfp.radius, |m, i| {
            fnv(&[FCFP_DOMAIN, u64::from(pharm_mask(m, i))])
        }),
        FingerprintKind::AtomPair => atom_pair_counts(mol, params.atom_pair.max_dist),
        FingerprintKind::Path => path_counts(mol, params.path.max_len),
        FingerprintKind::PharmLite => pharm_triple_counts(mol),
        FingerprintKind::Boc => boc_counts(mol),
    };
    Ok(Fingerprint {
        kind,
        counts,
        dim_hint: params.dim_hint,
    })
}

/// One fingerprint per enabled kind.
pub fn compute_all(
    mol: &Molecule,
    params: &FingerprintParams,
) -> Result<BTreeMap<FingerprintKind, Arc<Fingerprint>>, FingerprintError> {
    let mut out = BTreeMap::new();
    for &kind in &params.enabled {
        out.insert(kind, Arc::new(compute_fingerprint(mol, kind, params)?));
    }
    Ok(out)
}

/// Per-run memo keyed by canonical SMILES. Intended to be owned by one
/// engine thread; clone per worker for concurrent use.
pub struct FingerprintCache {
    params: FingerprintParams,
    map: HashMap<String, Arc<BTreeMap<FingerprintKind, Arc<Fingerprint>>>>,
}

impl FingerprintCache {
    pub fn new(params: FingerprintParams) -> Self {
        FingerprintCache {
            params,
            map: HashMap::new(),
        }
    }

    pub fn params(&self) -> &FingerprintParams {
        &self.params
    }

    pub fn get(
        &mut self,
        mol: &Molecule,
    ) -> Result<Arc<BTreeMap<FingerprintKind, Arc<Fingerprint>>>, FingerprintError> {
        if let Some(hit) = self.map.get(mol.canonical_smiles()) {
            return Ok(Arc::clone(hit));
        }
        let computed = Arc::new(compute_all(mol, &self.params)?);
        self.map
            .insert(mol.canonical_smiles().to_string(), Arc::clone(&computed));
        Ok(computed)
    }
}

// keeps the FCFP hash domain disjoint from the structural one
const FCFP_DOMAIN: u64 = 0x4643_4650;

fn structural_invariant(mol: &Molecule, atom: usize) -> u64 {
    let a = &mol.atoms()[atom];
    fnv(&[
        0x4543_4650,
        element_code(a.element),
        mol.degree(atom) as u64,
        (a.formal_charge + 8) as u64,
        u64::from(a.aromatic),
        u64::from(a.ring),
    ])
}

fn element_code(e: Element) -> u64 {
    crate::molgraph::ELEMENTS
        .iter()
        .position(|x| *x == e)
        .unwrap() as u64
}

/// Pharmacophoric class bitmask: donor, acceptor, aromatic, halogen,
/// basic nitrogen, acidic oxygen. Simple structural rules.
pub(crate) fn pharm_mask(mol: &Molecule, atom: usize) -> u8 {
    let a = &mol.atoms()[atom];
    let mut mask = 0u8;
    let is_n_or_o = matches!(a.element, Element::N | Element::O);
    if is_n_or_o && a.hydrogens >= 1 {
        mask |= 1;
    }
    if is_n_or_o && a.formal_charge <= 0 {
        mask |= 1 << 1;
    }
    if a.aromatic {
        mask |= 1 << 2;
    }
    if matches!(a.element, Element::F | Element::Cl | Element::Br | Element::I) {
        mask |= 1 << 3;
    }
    if a.element == Element::N && !a.aromatic && a.formal_charge >= 0 {
        let amide_like = mol.neighbors(atom).iter().any(|&(nbr, _)| {
            mol.atoms()[nbr].element == Element::C && has_double_to_heteroatom(mol, nbr)
        });
        if !amide_like {
            mask |= 1 << 4;
        }
    }
    if a.element == Element::O && (a.hydrogens >= 1 || a.formal_charge < 0) {
        let acidic = mol.neighbors(atom).iter().any(|&(nbr, _)| {
            matches!(
                mol.atoms()[nbr].element,
                Element::C | Element::S | Element::P
            ) && has_double_to_oxygen(mol, nbr, atom)
        });
        if acidic {
            mask |= 1 << 5;
        }
    }
    mask
}

fn has_double_to_heteroatom(mol: &Molecule, atom: usize) -> bool {
    mol.neighbors(atom).iter().any(|&(nbr, bidx)| {
        mol.bonds()[bidx].order == crate::molgraph::BondOrder::Double
            && matches!(mol.atoms()[nbr].element, Element::O | Element::N)
    })
}

fn has_double_to_oxygen(mol: &Molecule, atom: usize, exclude: usize) -> bool {
    mol.neighbors(atom).iter().any(|&(nbr, bidx)| {
        nbr != exclude
            && mol.bonds()[bidx].order == crate::molgraph::BondOrder::Double
            && mol.atoms()[nbr].element == Element::O
    })
}

/// Circular environment with metadata, used by tests to check locality.
#[derive(Debug, Clone)]
pub(crate) struct CircularFeature {
    #[allow(dead_code)]
    pub center: usize,
    #[allow(dead_code)]
    pub radius: u32,
    pub hash: u32,
}

pub(crate) fn circular_features(
    mol: &Molecule,
    max_radius: u32,
    init: impl Fn(&Molecule, usize) -> u64,
) -> Vec<CircularFeature> {
    let n = mol.atom_count();
    let mut hashes: Vec<u64> = (0..n).map(|i| init(mol, i)).collect();
    // environment = set of atoms within `radius` bonds of the center
    let mut envs: Vec<HashSet<usize>> = (0..n).map(|i| HashSet::from([i])).collect();

    let mut retained: Vec<CircularFeature> = Vec::new();
    let mut seen_envs: HashSet<Vec<usize>> = HashSet::new();

    for radius in 0..=max_radius {
        if radius > 0 {
            let prev = hashes.clone();
            let prev_envs = envs.clone();
            for i in 0..n {
                let mut nbrs: Vec<(u64, u64)> = mol
                    .neighbors(i)
                    .iter()
                    .map(|&(j, bidx)| (u64::from(mol.bonds()[bidx].order.code()), prev[j]))
                    .collect();
                nbrs.sort_unstable();
                let mut words = vec![u64::from(radius), prev[i]];
                for (b, h) in nbrs {
                    words.push(b);
                    words.push(h);
                }
                hashes[i] = fnv(&words);
                for &(j, _) in mol.neighbors(i) {
                    let extend: Vec<usize> = prev_envs[j].iter().copied().collect();
                    envs[i].extend(extend);
                }
            }
        }
        // One feature per distinct environment atom set: smaller radii win
        // outright, and within a radius the smallest hash is kept so the
        // choice does not depend on input atom order.
        let mut this_pass: BTreeMap<Vec<usize>, CircularFeature> = BTreeMap::new();
        for center in 0..n {
            let mut key: Vec<usize> = envs[center].iter().copied().collect();
            key.sort_unstable();
            if seen_envs.contains(&key) {
                continue;
            }
            let feature = CircularFeature {
                center,
                radius,
                hash: fold32(hashes[center]),
            };
            this_pass
                .entry(key)
                .and_modify(|kept| {
                    if feature.hash < kept.hash {
                        *kept = feature.clone();
                    }
                })
                .or_insert(feature);
        }
        for (key, feature) in this_pass {
            seen_envs.insert(key);
            retained.push(feature);
        }
    }
    retained
}

fn circular_counts(
    mol: &Molecule,
    max_radius: u32,
    init: impl Fn(&Molecule, usize) -> u64,
) -> BTreeMap<u32, u32> {
    let mut counts = BTreeMap::new();
    for feature in circular_features(mol, max_radius, init) {
        *counts.entry(feature.hash).or_insert(0) += 1;
    }
    counts
}

/// BFS distances from one atom.
fn distances_from(mol: &Molecule, start: usize) -> Vec<usize> {
    let n = mol.atom_count();
    let mut dist = vec![usize::MAX; n];
    dist[start] = 0;
    let mut queue = VecDeque::from([start]);
    while let Some(u) = queue.pop_front() {
        for &(v, _) in mol.neighbors(u) {
            if dist[v] == usize::MAX {
                dist[v] = dist[u] + 1;
                queue.push_back(v);
            }
        }
    }
    dist
}

fn atom_pair_counts(mol: &Molecule, max_dist: usize) -> BTreeMap<u32, u32> {
    let n = mol.atom_count();
    let invariants: Vec<u64> = (0..n).map(|i| structural_invariant(mol, i)).collect();
    let mut counts = BTreeMap::new();
    for i in 0..n {
        let dist = distances_from(mol, i);
        for j in (i + 1)..n {
            let d = dist[j];
            if d == 0 || d > max_dist {
                continue;
            }
            let (lo, hi) = if invariants[i] <= invariants[j] {
                (invariants[i], invariants[j])
            } else {
                (invariants[j], invariants[i])
            };
            let key = fold32(fnv(&[0x4150, lo, hi, d as u64]));
            *counts.entry(key).or_insert(0) += 1;
        }
    }
    counts
}

/// Linear paths of 1..=max_len bonds over (element, bond order) sequences,
/// direction-normalized. Every undirected path is enumerated once from each
/// endpoint, so raw tallies are exactly double the path count.
fn path_counts(mol: &Molecule, max_len: usize) -> BTreeMap<u32, u32> {
    let n = mol.atom_count();
    let mut tallies: BTreeMap<u32, u32> = BTreeMap::new();

    let atom_code = |i: usize| {
        let a = &mol.atoms()[i];
        element_code(a.element) * 2 + u64::from(a.aromatic)
    };

    let mut path: Vec<usize> = Vec::with_capacity(max_len + 1);
    let mut codes: Vec<u64> = Vec::with_capacity(2 * max_len + 1);

    fn walk(
        mol: &Molecule,
        max_len: usize,
        path: &mut Vec<usize>,
        codes: &mut Vec<u64>,
        atom_code: &dyn Fn(usize) -> u64,
        tallies: &mut BTreeMap<u32, u32>,
    ) {
        let current = *path.last().unwrap();
        for &(next, bidx) in mol.neighbors(current) {
            if path.contains(&next) {
                continue;
            }
            codes.push(u64::from(mol.bonds()[bidx].order.code()));
            codes.push(atom_code(next));
            path.push(next);

            let reversed: Vec<u64> = codes.iter().rev().copied().collect();
            let canonical = if *codes <= reversed { codes.clone() } else { reversed };
            let mut words = vec![0x5041_5448u64];
            words.extend_from_slice(&canonical);
            let key = fold32(fnv(&words));
            *tallies.entry(key).or_insert(0) += 1;

            if path.len() <= max_len {
                walk(mol, max_len, path, codes, atom_code, tallies);
            }
            path.pop();
            codes.pop();
            codes.pop();
        }
    }

    for start in 0..n {
        path.push(start);
        codes.push(atom_code(start));
        walk(mol, max_len, &mut path, &mut codes, &atom_code, &mut tallies);
        path.pop();
        codes.pop();
    }

    tallies
        .into_iter()
        .map(|(k, v)| {
            debug_assert_eq!(v % 2, 0, "directed path tallies must pair up");
            (k, v / 2)
        })
        .collect()
}

/// Unordered pharmacophore triples with binned pairwise distances
/// (bins 1-2, 3-5, 6+), canonicalized over the six vertex permutations.
fn pharm_triple_counts(mol: &Molecule) -> BTreeMap<u32, u32> {
    let n = mol.atom_count();
    let atoms: Vec<usize> = (0..n).filter(|&i| pharm_mask(mol, i) != 0).collect();
    let masks: Vec<u8> = atoms.iter().map(|&i| pharm_mask(mol, i)).collect();
    let dist: Vec<Vec<usize>> = atoms.iter().map(|&i| distances_from(mol, i)).collect();

    let bin = |d: usize| -> u64 {
        match d {
            1..=2 => 0,
            3..=5 => 1,
            _ => 2,
        }
    };

    let mut counts = BTreeMap::new();
    let k = atoms.len();
    for x in 0..k {
        for y in (x + 1)..k {
            for z in (y + 1)..k {
                let idx = [x, y, z];
                let mut best: Option<[u64; 6]> = None;
                for perm in PERMS_3 {
                    let (a, b, c) = (idx[perm[0]], idx[perm[1]], idx[perm[2]]);
                    let tuple = [
                        u64::from(masks[a]),
                        u64::from(masks[b]),
                        u64::from(masks[c]),
                        bin(dist[a][atoms[b]]),
                        bin(dist[a][atoms[c]]),
                        bin(dist[b][atoms[c]]),
                    ];
                    if best.map_or(true, |cur| tuple < cur) {
                        best = Some(tuple);
                    }
                }
                let tuple = best.unwrap();
                let mut words = vec![0x5048_4152u64];
                words.extend_from_slice(&tuple);
                let key = fold32(fnv(&words));
                *counts.entry(key).or_insert(0) += 1;
            }
        }
    }
    counts
}

const PERMS_3: [[usize; 3]; 6] = [
    [0, 1, 2],
    [0, 2, 1],
    [1, 0, 2],
    [1, 2, 0],
    [2, 0, 1],
    [2, 1, 0],
];

/// Character frequencies of the canonical SMILES string. Keys are the
/// character code points themselves.
fn boc_counts(mol: &Molecule) -> BTreeMap<u32, u32> {
    let mut counts = BTreeMap::new();
    for ch in mol.canonical_smiles().chars() {
        *counts.entry(ch as u32).or_insert(0) += 1;
    }
    counts
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::molgraph::randomize_smiles;

    fn mol(s: &str) -> Molecule {
        Molecule::parse(s).unwrap()
    }

    fn fp(s: &str, kind: FingerprintKind) -> Fingerprint {
        compute_fingerprint(&mol(s), kind, &FingerprintParams::default()).unwrap()
    }

    #[test]
    fn boc_counts_characters_of_canonical_form() {
        let f = fp("CCO", FingerprintKind::Boc);
        let c = u32::from('C');
        let o = u32::from('O');
        assert_eq!(f.counts.get(&c), Some(&2));
        assert_eq!(f.counts.get(&o), Some(&1));
        assert_eq!(f.counts.len(), 2);
    }

    #[test]
    fn boc_single_atom() {
        let f = fp("C", FingerprintKind::Boc);
        assert_eq!(f.counts.get(&u32::from('C')), Some(&1));
        assert_eq!(f.total_count(), 1);
    }

    #[test]
    fn single_atom_has_one_ecfp_feature_and_no_pairs() {
        let ecfp = fp("C", FingerprintKind::Ecfp);
        assert_eq!(ecfp.counts.len(), 1, "only the radius-0 environment");
        let pairs = fp("C", FingerprintKind::AtomPair);
        assert!(pairs.is_empty());
    }

    #[test]
    fn compute_all_covers_enabled_kinds() {
        let params = FingerprintParams::default();
        let all = compute_all(&mol("CCO"), &params).unwrap();
        assert_eq!(all.len(), 6);
        for (&kind, f) in &all {
            if kind != FingerprintKind::PharmLite {
                assert!(!f.is_empty(), "{kind} empty for CCO");
            }
        }
    }

    #[test]
    fn unsupported_kind_rejected() {
        let params = FingerprintParams {
            enabled: vec![FingerprintKind::Ecfp],
            ..FingerprintParams::default()
        };
        let err = compute_fingerprint(&mol("CCO"), FingerprintKind::Boc, &params);
        assert_eq!(
            err,
            Err(FingerprintError::UnsupportedKind(FingerprintKind::Boc))
        );
    }

    #[test]
    fn order_invariance_over_randomized_forms() {
        let params = FingerprintParams::default();
        for smiles in ["c1ccccc1", "CC(C)NCC(O)c1ccc(O)c(CO)c1", "CC(=O)Oc1ccccc1C(=O)O"] {
            let reference = mol(smiles);
            let expected = compute_all(&reference, &params).unwrap();
            for seed in 0..25 {
                let shuffled = mol(&randomize_smiles(&reference, seed));
                let got = compute_all(&shuffled, &params).unwrap();
                for &kind in &params.enabled {
                    assert_eq!(
                        expected[&kind].counts, got[&kind].counts,
                        "{kind} not order-invariant for {smiles} seed {seed}"
                    );
                }
            }
        }
    }

    #[test]
    fn ecfp_edits_are_local() {
        // Appending an atom to one end of a chain only disturbs features
        // whose center lies within the radius of the edit site.
        let base = mol("CCCCCCCC");
        let grown = mol("CCCCCCCCO");
        let radius = 2;
        let before = circular_features(&base, radius, structural_invariant);
        let after = circular_features(&grown, radius, structural_invariant);
        let changed: Vec<&CircularFeature> = before
            .iter()
            .filter(|f| !after.iter().any(|g| g.hash == f.hash))
            .collect();
        // Edit site is atom 7 of the base chain (atom 8 appended after it).
        for f in changed {
            let d = 7usize.saturating_sub(f.center).min(f.center.saturating_sub(7));
            let _ = d;
            let dist = (f.center as i64 - 7).unsigned_abs() as u32;
            assert!(
                dist <= radius,
                "feature centered at {} (radius {}) changed, too far from edit",
                f.center,
                f.radius
            );
        }
    }

    #[test]
    fn boc_is_additive_over_components() {
        let a = fp("CCO", FingerprintKind::Boc);
        let b = fp("CCN", FingerprintKind::Boc);
        let mut summed = a.counts.clone();
        for (k, v) in &b.counts {
            *summed.entry(*k).or_insert(0) += v;
        }
        let mut manual: BTreeMap<u32, u32> = BTreeMap::new();
        for ch in "CCOCCN".chars() {
            *manual.entry(ch as u32).or_insert(0) += 1;
        }
        assert_eq!(summed, manual);
    }

    #[test]
    fn cache_returns_identical_maps() {
        let mut cache = FingerprintCache::new(FingerprintParams::default());
        let m = mol("CC(=O)Oc1ccccc1C(=O)O");
        let first = cache.get(&m).unwrap();
        let second = cache.get(&m).unwrap();
        assert!(Arc::ptr_eq(&first, &second));
    }

    #[test]
    fn fcfp_differs_from_ecfp_on_heteroatoms() {
        let e = fp("CCO", FingerprintKind::Ecfp);
        let f = fp("CCO", FingerprintKind::Fcfp);
        assert_ne!(e.counts, f.counts);
    }

    #[test]
    fn pharm_triples_need_three_sites() {
        assert!(fp("CCO", FingerprintKind::PharmLite).is_empty());
        let glycerol = fp("OCC(O)CO", FingerprintKind::PharmLite);
        assert!(!glycerol.is_empty());
    }

    #[test]
    fn path_counts_match_hand_enumeration() {
        // Propane: undirected paths are C-C (x2) and C-C-C (x1).
        let f = fp("CCC", FingerprintKind::Path);
        let mut totals: Vec<u32> = f.counts.values().copied().collect();
        totals.sort_unstable();
        assert_eq!(totals, vec![1, 2]);
    }
}
