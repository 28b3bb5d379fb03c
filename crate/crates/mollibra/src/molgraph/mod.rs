//! Molecular graphs behind the search space: parsing, validation,
//! canonicalization and seeded re-serialization of a SMILES subset.
//!
//! The supported dialect covers organic-subset atoms, bracket atoms with
//! charge, ring closures (`1`-`9` and `%nn`), branches and the bond symbols
//! `- = # :`. Stereochemistry and isotopes are rejected.

mod canon;
mod parse;

pub use canon::randomize_smiles;

use std::collections::{BTreeMap, HashSet};
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum MolError {
    #[error("syntax error at byte {pos}: {msg}")]
    Syntax { pos: usize, msg: String },
    #[error("valence error on atom {atom}: {msg}")]
    Valence { atom: usize, msg: String },
    #[error("invalid molecular graph: {0}")]
    InvalidGraph(String),
}

impl MolError {
    fn syntax(pos: usize, msg: impl Into<String>) -> Self {
        MolError::Syntax { pos, msg: msg.into() }
    }

    fn valence(atom: usize, msg: impl Into<String>) -> Self {
        MolError::Valence { atom, msg: msg.into() }
    }
}

/// Elements recognized by the parser and the edit rules.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Element {
    B,
    C,
    N,
    O,
    F,
    P,
    S,
    Cl,
    Br,
    I,
}

pub const ELEMENTS: [Element; 10] = [
    Element::B,
    Element::C,
    Element::N,
    Element::O,
    Element::F,
    Element::P,
    Element::S,
    Element::Cl,
    Element::Br,
    Element::I,
];

impl Element {
    pub fn symbol(self) -> &'static str {
        match self {
            Element::B => "B",
            Element::C => "C",
            Element::N => "N",
            Element::O => "O",
            Element::F => "F",
            Element::P => "P",
            Element::S => "S",
            Element::Cl => "Cl",
            Element::Br => "Br",
            Element::I => "I",
        }
    }

    pub fn from_symbol(s: &str) -> Option<Element> {
        ELEMENTS.iter().copied().find(|e| e.symbol() == s)
    }

    /// Lowercase aromatic spellings exist for b, c, n, o, p, s only.
    pub fn aromatic_capable(self) -> bool {
        matches!(
            self,
            Element::B | Element::C | Element::N | Element::O | Element::P | Element::S
        )
    }

    fn base_valences(self) -> &'static [i32] {
        match self {
            Element::B => &[3],
            Element::C => &[4],
            Element::N => &[3],
            Element::O => &[2],
            Element::F | Element::Cl | Element::Br | Element::I => &[1],
            Element::P => &[3, 5],
            Element::S => &[2, 4, 6],
        }
    }

    /// Allowed total valences (bond-order sum plus hydrogens), adjusted for
    /// formal charge. Cations of N/O/P/S gain a slot and anions lose one;
    /// carbon loses a slot either way; boron shifts opposite to its charge.
    pub fn allowed_valences(self, charge: i32) -> Vec<i32> {
        let shift = match self {
            Element::C => -charge.abs(),
            Element::B => -charge,
            _ => charge,
        };
        self.base_valences()
            .iter()
            .map(|v| v + shift)
            .filter(|v| *v >= 0)
            .collect()
    }

    pub fn max_valence(self, charge: i32) -> i32 {
        self.allowed_valences(charge).last().copied().unwrap_or(0)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum BondOrder {
    Single,
    Double,
    Triple,
    Aromatic,
}

impl BondOrder {
    /// Contribution to the valence sum. Aromatic bonds count as single; the
    /// pi electron of an aromatic atom is accounted for separately during
    /// implicit hydrogen derivation.
    pub fn valence_units(self) -> i32 {
        match self {
            BondOrder::Single | BondOrder::Aromatic => 1,
            BondOrder::Double => 2,
            BondOrder::Triple => 3,
        }
    }

    pub(crate) fn code(self) -> u8 {
        match self {
            BondOrder::Single => 1,
            BondOrder::Double => 2,
            BondOrder::Triple => 3,
            BondOrder::Aromatic => 4,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Atom {
    pub element: Element,
    pub aromatic: bool,
    pub formal_charge: i32,
    pub ring: bool,
    /// Hydrogen count, either pinned by a bracket spec or derived from the
    /// valence table.
    pub hydrogens: u8,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Bond {
    pub a: usize,
    pub b: usize,
    pub order: BondOrder,
    pub ring: bool,
}

/// Atom description fed into [`Molecule::from_graph`]; hydrogens may be
/// pinned (bracket atoms) or left for derivation.
#[derive(Debug, Clone, Copy)]
pub struct AtomSpec {
    pub element: Element,
    pub aromatic: bool,
    pub formal_charge: i32,
    pub pinned_hydrogens: Option<u8>,
}

impl AtomSpec {
    pub fn new(element: Element) -> Self {
        AtomSpec {
            element,
            aromatic: false,
            formal_charge: 0,
            pinned_hydrogens: None,
        }
    }
}

/// A parsed, validated molecular graph plus its canonical SMILES form.
#[derive(Debug, Clone)]
pub struct Molecule {
    atoms: Vec<Atom>,
    bonds: Vec<Bond>,
    adjacency: Vec<Vec<(usize, usize)>>,
    canonical: String,
    source: String,
}

impl Molecule {
    /// Parse a SMILES string in the supported subset.
    pub fn parse(smiles: &str) -> Result<Molecule, MolError> {
        parse::parse_smiles(smiles)
    }

    /// Assemble and validate a molecule from raw atoms and bonds. Used by
    /// the parser and by graph edits; hydrogens are re-derived unless
    /// pinned, and Kekule six-rings with alternating bond orders are
    /// flagged aromatic.
    pub fn from_graph(
        atoms: Vec<AtomSpec>,
        bonds: Vec<(usize, usize, BondOrder)>,
        source: Option<String>,
    ) -> Result<Molecule, MolError> {
        if atoms.is_empty() {
            return Err(MolError::InvalidGraph("no atoms".into()));
        }
        for spec in &atoms {
            if spec.formal_charge.abs() > 2 {
                return Err(MolError::InvalidGraph(format!(
                    "formal charge {} out of range",
                    spec.formal_charge
                )));
            }
            if spec.aromatic && !spec.element.aromatic_capable() {
                return Err(MolError::InvalidGraph(format!(
                    "element {} cannot be aromatic",
                    spec.element.symbol()
                )));
            }
        }

        let n = atoms.len();
        let mut seen_pairs = HashSet::new();
        let mut bond_list = Vec::with_capacity(bonds.len());
        for &(a, b, order) in &bonds {
            if a >= n || b >= n {
                return Err(MolError::InvalidGraph(format!(
                    "bond references missing atom ({a},{b})"
                )));
            }
            if a == b {
                return Err(MolError::InvalidGraph(format!("self bond on atom {a}")));
            }
            if !seen_pairs.insert((a.min(b), a.max(b))) {
                return Err(MolError::InvalidGraph(format!(
                    "duplicate bond between atoms {a} and {b}"
                )));
            }
            bond_list.push(Bond { a, b, order, ring: false });
        }

        let adjacency = build_adjacency(n, &bond_list);
        check_connected(&adjacency)?;

        let mut full_atoms: Vec<Atom> = atoms
            .iter()
            .map(|s| Atom {
                element: s.element,
                aromatic: s.aromatic,
                formal_charge: s.formal_charge,
                ring: false,
                hydrogens: 0,
            })
            .collect();

        aromatize_kekule_rings(&mut full_atoms, &mut bond_list, &adjacency, &atoms);
        mark_rings(&mut full_atoms, &mut bond_list, &adjacency);

        // Aromatic consistency: aromatic bonds need aromatic endpoints and
        // aromatic atoms only make sense inside rings.
        for bond in &bond_list {
            if bond.order == BondOrder::Aromatic
                && !(full_atoms[bond.a].aromatic && full_atoms[bond.b].aromatic)
            {
                return Err(MolError::InvalidGraph(format!(
                    "aromatic bond between non-aromatic atoms {} and {}",
                    bond.a, bond.b
                )));
            }
        }
        for (i, atom) in full_atoms.iter().enumerate() {
            if atom.aromatic && !atom.ring {
                return Err(MolError::InvalidGraph(format!(
                    "aromatic atom {i} outside any ring"
                )));
            }
        }

        for i in 0..n {
            let units = bond_unit_sum(i, &adjacency, &bond_list);
            let atom = &mut full_atoms[i];
            let h = match atoms[i].pinned_hydrogens {
                Some(h) => h,
                None => derive_hydrogens(atom.element, atom.formal_charge, atom.aromatic, units)
                    .ok_or_else(|| {
                        MolError::valence(
                            i,
                            format!(
                                "bond order sum {units} exceeds valence of {}",
                                atom.element.symbol()
                            ),
                        )
                    })?,
            };
            atom.hydrogens = h;
            let max = atom.element.max_valence(atom.formal_charge);
            if units + i32::from(h) > max {
                return Err(MolError::valence(
                    i,
                    format!(
                        "total valence {} exceeds maximum {max} for {}",
                        units + i32::from(h),
                        atom.element.symbol()
                    ),
                ));
            }
        }

        let mut mol = Molecule {
            atoms: full_atoms,
            bonds: bond_list,
            adjacency,
            canonical: String::new(),
            source: String::new(),
        };
        mol.canonical = canon::canonical_smiles(&mol);
        mol.source = source.unwrap_or_else(|| mol.canonical.clone());
        Ok(mol)
    }

    pub fn atoms(&self) -> &[Atom] {
        &self.atoms
    }

    pub fn bonds(&self) -> &[Bond] {
        &self.bonds
    }

    pub fn atom_count(&self) -> usize {
        self.atoms.len()
    }

    /// Neighbor list of `(atom index, bond index)` pairs.
    pub fn neighbors(&self, atom: usize) -> &[(usize, usize)] {
        &self.adjacency[atom]
    }

    pub fn degree(&self, atom: usize) -> usize {
        self.adjacency[atom].len()
    }

    pub fn canonical_smiles(&self) -> &str {
        &self.canonical
    }

    pub fn source_smiles(&self) -> &str {
        &self.source
    }

    /// Element counts including derived hydrogens.
    pub fn formula(&self) -> BTreeMap<&'static str, u32> {
        let mut counts: BTreeMap<&'static str, u32> = BTreeMap::new();
        for atom in &self.atoms {
            *counts.entry(atom.element.symbol()).or_insert(0) += 1;
            if atom.hydrogens > 0 {
                *counts.entry("H").or_insert(0) += u32::from(atom.hydrogens);
            }
        }
        counts
    }

    /// Bond-order sum at an atom, aromatic counted as one unit.
    pub fn bond_unit_sum(&self, atom: usize) -> i32 {
        bond_unit_sum(atom, &self.adjacency, &self.bonds)
    }

    /// Re-check every structural invariant. Construction already enforces
    /// them; this exists so edit pipelines and tests can audit instances.
    pub fn validate(&self) -> Result<(), MolError> {
        let specs: Vec<AtomSpec> = self
            .atoms
            .iter()
            .map(|a| AtomSpec {
                element: a.element,
                aromatic: a.aromatic,
                formal_charge: a.formal_charge,
                pinned_hydrogens: Some(a.hydrogens),
            })
            .collect();
        let bonds: Vec<(usize, usize, BondOrder)> =
            self.bonds.iter().map(|b| (b.a, b.b, b.order)).collect();
        let rebuilt = Molecule::from_graph(specs, bonds, None)?;
        if rebuilt.canonical != self.canonical {
            return Err(MolError::InvalidGraph(
                "stored canonical form does not match graph".into(),
            ));
        }
        Ok(())
    }
}

fn build_adjacency(n: usize, bonds: &[Bond]) -> Vec<Vec<(usize, usize)>> {
    let mut adjacency = vec![Vec::new(); n];
    for (idx, bond) in bonds.iter().enumerate() {
        adjacency[bond.a].push((bond.b, idx));
        adjacency[bond.b].push((bond.a, idx));
    }
    adjacency
}

fn check_connected(adjacency: &[Vec<(usize, usize)>]) -> Result<(), MolError> {
    let n = adjacency.len();
    let mut seen = vec![false; n];
    let mut stack = vec![0usize];
    seen[0] = true;
    let mut count = 1;
    while let Some(u) = stack.pop() {
        for &(v, _) in &adjacency[u] {
            if !seen[v] {
                seen[v] = true;
                count += 1;
                stack.push(v);
            }
        }
    }
    if count != n {
        return Err(MolError::InvalidGraph("graph is disconnected".into()));
    }
    Ok(())
}

fn bond_unit_sum(atom: usize, adjacency: &[Vec<(usize, usize)>], bonds: &[Bond]) -> i32 {
    adjacency[atom]
        .iter()
        .map(|&(_, bidx)| bonds[bidx].order.valence_units())
        .sum()
}

/// Smallest allowed valence covering `units`, minus the bonds already in
/// place. Aromatic atoms donate one electron to the pi system, so one slot
/// is reserved before hydrogens are assigned.
fn derive_hydrogens(element: Element, charge: i32, aromatic: bool, units: i32) -> Option<u8> {
    let valences = element.allowed_valences(charge);
    let v = *valences.iter().find(|v| **v >= units)?;
    let h = if aromatic { (v - units - 1).max(0) } else { v - units };
    Some(h as u8)
}

/// Mark ring bonds and ring atoms. A bond lies on a ring iff its endpoints
/// stay connected after removing it; molecules are small enough that the
/// direct check per bond is cheap.
fn mark_rings(atoms: &mut [Atom], bonds: &mut [Bond], adjacency: &[Vec<(usize, usize)>]) {
    let n = atoms.len();
    for bidx in 0..bonds.len() {
        let (src, dst) = (bonds[bidx].a, bonds[bidx].b);
        let mut seen = vec![false; n];
        let mut stack = vec![src];
        seen[src] = true;
        let mut reached = false;
        'search: while let Some(u) = stack.pop() {
            for &(v, eidx) in &adjacency[u] {
                if eidx == bidx || seen[v] {
                    continue;
                }
                if v == dst {
                    reached = true;
                    break 'search;
                }
                seen[v] = true;
                stack.push(v);
            }
        }
        bonds[bidx].ring = reached;
    }
    for bond in bonds.iter() {
        if bond.ring {
            atoms[bond.a].ring = true;
            atoms[bond.b].ring = true;
        }
    }
}

/// Flag six-membered carbon/nitrogen rings written with alternating single
/// and double bonds as aromatic, so Kekule benzene and the lowercase form
/// canonicalize identically.
fn aromatize_kekule_rings(
    atoms: &mut [Atom],
    bonds: &mut [Bond],
    adjacency: &[Vec<(usize, usize)>],
    specs: &[AtomSpec],
) {
    let n = atoms.len();
    let mut seen_rings: HashSet<Vec<usize>> = HashSet::new();
    let mut to_flag: Vec<(Vec<usize>, Vec<usize>)> = Vec::new();

    let eligible = |i: usize| {
        !atoms[i].aromatic
            && atoms[i].formal_charge == 0
            && specs[i].pinned_hydrogens.is_none()
            && matches!(atoms[i].element, Element::C | Element::N)
    };

    // Enumerate simple 6-cycles by DFS; depth is capped at six.
    let mut path = Vec::with_capacity(6);
    let mut edge_path = Vec::with_capacity(6);
    for start in 0..n {
        if !eligible(start) {
            continue;
        }
        path.push(start);
        dfs_six_rings(
            start,
            start,
            &mut path,
            &mut edge_path,
            adjacency,
            bonds,
            &eligible,
            &mut seen_rings,
            &mut to_flag,
        );
        path.pop();
    }

    for (ring_atoms, ring_bonds) in to_flag {
        for &a in &ring_atoms {
            atoms[a].aromatic = true;
        }
        for &b in &ring_bonds {
            bonds[b].order = BondOrder::Aromatic;
        }
    }
}

#[allow(clippy::too_many_arguments)]
fn dfs_six_rings(
    start: usize,
    current: usize,
    path: &mut Vec<usize>,
    edge_path: &mut Vec<usize>,
    adjacency: &[Vec<(usize, usize)>],
    bonds: &[Bond],
    eligible: &dyn Fn(usize) -> bool,
    seen: &mut HashSet<Vec<usize>>,
    out: &mut Vec<(Vec<usize>, Vec<usize>)>,
) {
    for &(next, bidx) in &adjacency[current] {
        if path.len() == 6 {
            if next == start {
                let mut key: Vec<usize> = path.clone();
                key.sort_unstable();
                if seen.insert(key) {
                    let mut ring_bonds = edge_path.clone();
                    ring_bonds.push(bidx);
                    if alternating_kekule(&ring_bonds, bonds) {
                        out.push((path.clone(), ring_bonds));
                    }
                }
            }
            continue;
        }
        if next == start || path.contains(&next) || !eligible(next) {
            continue;
        }
        path.push(next);
        edge_path.push(bidx);
        dfs_six_rings(start, next, path, edge_path, adjacency, bonds, eligible, seen, out);
        edge_path.pop();
        path.pop();
    }
}

fn alternating_kekule(ring_bonds: &[usize], bonds: &[Bond]) -> bool {
    let orders: Vec<BondOrder> = ring_bonds.iter().map(|&b| bonds[b].order).collect();
    if orders
        .iter()
        .any(|o| !matches!(o, BondOrder::Single | BondOrder::Double))
    {
        return false;
    }
    let phase_ok = |first: BondOrder| {
        orders.iter().enumerate().all(|(i, &o)| {
            let expect = if i % 2 == 0 { first } else { flip(first) };
            o == expect
        })
    };
    phase_ok(BondOrder::Single) || phase_ok(BondOrder::Double)
}

fn flip(order: BondOrder) -> BondOrder {
    match order {
        BondOrder::Single => BondOrder::Double,
        _ => BondOrder::Single,
    }
}
