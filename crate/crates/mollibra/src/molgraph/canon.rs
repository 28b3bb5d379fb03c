//! Canonical atom ranking and SMILES emission.
//!
//! Ranking is iterative neighborhood refinement: atoms start from the
//! invariant tuple (element, degree, charge, aromaticity) and are split by
//! the sorted multiset of (bond order, neighbor rank) pairs until the
//! partition stabilizes. Remaining ties are resolved by promoting one tied
//! atom and refining again; at a refinement fixpoint tied atoms are treated
//! as interchangeable, which holds for organic-subset molecules.

use rand::seq::SliceRandom;
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::{derive_hydrogens, BondOrder, Molecule};

/// One rank per atom, 0-based and dense; rank 0 starts the canonical DFS.
pub(super) fn canonical_ranks(mol: &Molecule) -> Vec<usize> {
    let n = mol.atom_count();
    let mut keys: Vec<(u8, usize, i32, bool)> = (0..n)
        .map(|i| {
            let a = &mol.atoms()[i];
            (element_code(a.element), mol.degree(i), a.formal_charge, a.aromatic)
        })
        .collect();
    keys.sort_unstable();
    keys.dedup();
    let mut ranks: Vec<usize> = (0..n)
        .map(|i| {
            let a = &mol.atoms()[i];
            let key = (element_code(a.element), mol.degree(i), a.formal_charge, a.aromatic);
            keys.binary_search(&key).expect("key present")
        })
        .collect();

    refine(mol, &mut ranks);
    loop {
        let classes = ranks.iter().max().map_or(0, |m| m + 1);
        if classes == n {
            break;
        }
        // Promote the lowest-index member of the lowest tied class.
        let mut promote = None;
        'outer: for r in 0..classes {
            let members: Vec<usize> = (0..n).filter(|&i| ranks[i] == r).collect();
            if members.len() > 1 {
                promote = Some(members[0]);
                break 'outer;
            }
        }
        let chosen = promote.expect("tied class exists");
        let mut keyed: Vec<(usize, usize)> =
            (0..n).map(|i| (ranks[i] * 2 + usize::from(i != chosen), i)).collect();
        keyed.sort_unstable();
        let mut next = vec![0usize; n];
        let mut rank = 0usize;
        for w in 0..keyed.len() {
            if w > 0 && keyed[w].0 != keyed[w - 1].0 {
                rank += 1;
            }
            next[keyed[w].1] = rank;
        }
        ranks = next;
        refine(mol, &mut ranks);
    }
    ranks
}

fn element_code(e: super::Element) -> u8 {
    super::ELEMENTS.iter().position(|x| *x == e).unwrap() as u8
}

fn refine(mol: &Molecule, ranks: &mut Vec<usize>) {
    let n = mol.atom_count();
    loop {
        let mut sigs: Vec<(usize, Vec<(u8, usize)>)> = (0..n)
            .map(|i| {
                let mut nbrs: Vec<(u8, usize)> = mol
                    .neighbors(i)
                    .iter()
                    .map(|&(j, bidx)| (mol.bonds()[bidx].order.code(), ranks[j]))
                    .collect();
                nbrs.sort_unstable();
                (ranks[i], nbrs)
            })
            .collect();
        let mut sorted: Vec<(usize, Vec<(u8, usize)>)> = sigs.clone();
        sorted.sort_unstable();
        sorted.dedup();
        let before = ranks.iter().max().map_or(0, |m| m + 1);
        for (i, sig) in sigs.drain(..).enumerate() {
            ranks[i] = sorted.binary_search(&sig).expect("signature present");
        }
        let after = ranks.iter().max().map_or(0, |m| m + 1);
        if after == before {
            return;
        }
    }
}

pub(super) fn canonical_smiles(mol: &Molecule) -> String {
    let ranks = canonical_ranks(mol);
    let start = (0..mol.atom_count()).min_by_key(|&i| ranks[i]).unwrap();
    write_smiles(mol, &ranks, start)
}

/// A valid SMILES of the same graph written from a seed-determined atom
/// order. Useful for exercising order invariance.
pub fn randomize_smiles(mol: &Molecule, seed: u64) -> String {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n = mol.atom_count();
    let mut priority: Vec<usize> = (0..n).collect();
    priority.shuffle(&mut rng);
    let start = rng.gen_range(0..n);
    write_smiles(mol, &priority, start)
}

/// Emit SMILES visiting neighbors in ascending `priority` order.
fn write_smiles(mol: &Molecule, priority: &[usize], start: usize) -> String {
    let n = mol.atom_count();
    debug_assert_eq!(priority.len(), n);

    // DFS discovery: classify each bond as tree or ring-closure.
    let mut visited = vec![false; n];
    let mut tree_children: Vec<Vec<(usize, usize)>> = vec![Vec::new(); n];
    let mut closures: Vec<Vec<(usize, usize)>> = vec![Vec::new(); n]; // (bond idx, partner)
    let mut closure_order: Vec<usize> = Vec::new();
    let mut bond_used = vec![false; mol.bonds().len()];

    let mut stack = vec![(start, usize::MAX)];
    visited[start] = true;
    let mut order_of_visit = Vec::with_capacity(n);
    while let Some((u, _)) = stack.pop() {
        order_of_visit.push(u);
        let mut nbrs: Vec<(usize, usize)> = mol.neighbors(u).to_vec();
        nbrs.sort_by_key(|&(v, _)| priority[v]);
        for &(v, bidx) in nbrs.iter().rev() {
            if bond_used[bidx] {
                continue;
            }
            if visited[v] {
                continue;
            }
            bond_used[bidx] = true;
            visited[v] = true;
            tree_children[u].push((v, bidx));
            stack.push((v, bidx));
        }
        // Reversed pushes above keep pop order ascending, but children were
        // recorded in reverse; restore ascending priority.
        tree_children[u].reverse();
    }
    for (bidx, bond) in mol.bonds().iter().enumerate() {
        if !bond_used[bidx] {
            let (u, v) = (bond.a, bond.b);
            closures[u].push((bidx, v));
            closures[v].push((bidx, u));
            closure_order.push(bidx);
        }
    }
    // Closure digits are allocated in emission order of the first endpoint.
    let mut digit_of_bond: Vec<Option<u16>> = vec![None; mol.bonds().len()];
    let mut free_digits: Vec<u16> = (1..=99).rev().collect();
    let mut pending_close: Vec<Option<u16>> = vec![None; mol.bonds().len()];

    let mut out = String::new();
    emit(
        mol,
        start,
        None,
        priority,
        &tree_children,
        &closures,
        &mut digit_of_bond,
        &mut free_digits,
        &mut pending_close,
        &mut out,
    );
    out
}

#[allow(clippy::too_many_arguments)]
fn emit(
    mol: &Molecule,
    atom: usize,
    incoming: Option<usize>,
    priority: &[usize],
    tree_children: &[Vec<(usize, usize)>],
    closures: &[Vec<(usize, usize)>],
    digit_of_bond: &mut Vec<Option<u16>>,
    free_digits: &mut Vec<u16>,
    pending_close: &mut Vec<Option<u16>>,
    out: &mut String,
) {
    if let Some(bidx) = incoming {
        out.push_str(bond_token(mol, bidx));
    }
    out.push_str(&atom_token(mol, atom));

    let mut ring_digits: Vec<(usize, usize)> = closures[atom].clone();
    ring_digits.sort_by_key(|&(bidx, partner)| (digit_of_bond[bidx].is_none(), priority[partner], bidx));
    for (bidx, _) in ring_digits {
        match pending_close[bidx].take() {
            Some(digit) => {
                push_digit(out, digit);
                free_digits.push(digit);
                free_digits.sort_unstable_by(|a, b| b.cmp(a));
            }
            None => {
                let digit = free_digits.pop().expect("ring digit pool exhausted");
                digit_of_bond[bidx] = Some(digit);
                pending_close[bidx] = Some(digit);
                out.push_str(bond_token(mol, bidx));
                push_digit(out, digit);
            }
        }
    }

    let children = &tree_children[atom];
    for (i, &(child, bidx)) in children.iter().enumerate() {
        let last = i + 1 == children.len();
        if !last {
            out.push('(');
        }
        emit(
            mol,
            child,
            Some(bidx),
            priority,
            tree_children,
            closures,
            digit_of_bond,
            free_digits,
            pending_close,
            out,
        );
        if !last {
            out.push(')');
        }
    }
}

fn push_digit(out: &mut String, digit: u16) {
    if digit < 10 {
        out.push(char::from(b'0' + digit as u8));
    } else {
        out.push('%');
        out.push(char::from(b'0' + (digit / 10) as u8));
        out.push(char::from(b'0' + (digit % 10) as u8));
    }
}

fn bond_token(mol: &Molecule, bidx: usize) -> &'static str {
    let bond = &mol.bonds()[bidx];
    match bond.order {
        BondOrder::Single => {
            // Implicit single between two aromatic atoms would read back as
            // aromatic, so spell it out.
            if mol.atoms()[bond.a].aromatic && mol.atoms()[bond.b].aromatic {
                "-"
            } else {
                ""
            }
        }
        BondOrder::Double => "=",
        BondOrder::Triple => "#",
        BondOrder::Aromatic => "",
    }
}

fn atom_token(mol: &Molecule, idx: usize) -> String {
    let atom = &mol.atoms()[idx];
    let mut symbol = atom.element.symbol().to_string();
    if atom.aromatic {
        symbol = symbol.to_ascii_lowercase();
    }
    let bare_h = derive_hydrogens(
        atom.element,
        0,
        atom.aromatic,
        mol.bond_unit_sum(idx),
    );
    let needs_bracket = atom.formal_charge != 0 || bare_h != Some(atom.hydrogens);
    if !needs_bracket {
        return symbol;
    }
    let mut token = String::from("[");
    token.push_str(&symbol);
    match atom.hydrogens {
        0 => {}
        1 => token.push('H'),
        h => {
            token.push('H');
            token.push(char::from(b'0' + h));
        }
    }
    match atom.formal_charge {
        0 => {}
        1 => token.push('+'),
        -1 => token.push('-'),
        c if c > 0 => {
            token.push('+');
            token.push(char::from(b'0' + c as u8));
        }
        c => {
            token.push('-');
            token.push(char::from(b'0' + (-c) as u8));
        }
    }
    token.push(']');
    token
}
