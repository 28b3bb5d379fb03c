//! Hand-rolled recursive SMILES tokenizer for the supported subset.

use std::collections::HashMap;

use super::{AtomSpec, BondOrder, Element, MolError, Molecule};

pub fn parse_smiles(input: &str) -> Result<Molecule, MolError> {
    if input.is_empty() {
        return Err(MolError::syntax(0, "empty SMILES"));
    }
    if !input.is_ascii() {
        return Err(MolError::syntax(0, "non-ASCII input"));
    }
    let mut parser = Parser::new(input.as_bytes());
    parser.run()?;
    Molecule::from_graph(parser.atoms, parser.bonds, Some(input.to_string())).map_err(|e| {
        // Graph-level complaints about parsed input are misuse of the
        // notation, so report them as syntax errors.
        match e {
            MolError::InvalidGraph(msg) => MolError::syntax(0, msg),
            other => other,
        }
    })
}

struct Parser<'a> {
    bytes: &'a [u8],
    pos: usize,
    atoms: Vec<AtomSpec>,
    bonds: Vec<(usize, usize, BondOrder)>,
    /// Open ring closures: digit -> (atom, bond symbol at opening, position).
    rings: HashMap<u16, (usize, Option<BondOrder>, usize)>,
    branch_stack: Vec<usize>,
    prev: Option<usize>,
    pending_bond: Option<BondOrder>,
}

impl<'a> Parser<'a> {
    fn new(bytes: &'a [u8]) -> Self {
        Parser {
            bytes,
            pos: 0,
            atoms: Vec::new(),
            bonds: Vec::new(),
            rings: HashMap::new(),
            branch_stack: Vec::new(),
            prev: None,
            pending_bond: None,
        }
    }

    fn run(&mut self) -> Result<(), MolError> {
        while self.pos < self.bytes.len() {
            let b = self.bytes[self.pos];
            match b {
                b'[' => {
                    let spec = self.parse_bracket()?;
                    self.push_atom(spec)?;
                }
                b'(' => {
                    let prev = self.prev.ok_or_else(|| {
                        MolError::syntax(self.pos, "branch before any atom")
                    })?;
                    if self.pending_bond.is_some() {
                        return Err(MolError::syntax(self.pos, "dangling bond before branch"));
                    }
                    self.branch_stack.push(prev);
                    self.pos += 1;
                }
                b')' => {
                    if self.pending_bond.is_some() {
                        return Err(MolError::syntax(self.pos, "dangling bond before ')'"));
                    }
                    let restored = self
                        .branch_stack
                        .pop()
                        .ok_or_else(|| MolError::syntax(self.pos, "unbalanced ')'"))?;
                    self.prev = Some(restored);
                    self.pos += 1;
                }
                b'-' => {
                    self.set_pending(BondOrder::Single)?;
                }
                b'=' => {
                    self.set_pending(BondOrder::Double)?;
                }
                b'#' => {
                    self.set_pending(BondOrder::Triple)?;
                }
                b':' => {
                    self.set_pending(BondOrder::Aromatic)?;
                }
                b'1'..=b'9' => {
                    let digit = u16::from(b - b'0');
                    self.pos += 1;
                    self.ring_closure(digit)?;
                }
                b'%' => {
                    let start = self.pos;
                    self.pos += 1;
                    let d1 = self.next_digit(start)?;
                    let d2 = self.next_digit(start)?;
                    self.ring_closure(u16::from(d1) * 10 + u16::from(d2))?;
                }
                b'.' => {
                    return Err(MolError::syntax(
                        self.pos,
                        "disconnected components ('.') are not supported",
                    ));
                }
                b'/' | b'\\' | b'@' => {
                    return Err(MolError::syntax(
                        self.pos,
                        "stereochemistry descriptors are not supported",
                    ));
                }
                _ => {
                    if let Some(spec) = self.try_organic_atom()? {
                        self.push_atom(spec)?;
                    } else {
                        return Err(MolError::syntax(
                            self.pos,
                            format!("unknown token '{}'", b as char),
                        ));
                    }
                }
            }
        }
        if let Some(&open) = self.branch_stack.first() {
            let _ = open;
            return Err(MolError::syntax(self.pos, "unbalanced '('"));
        }
        if self.pending_bond.is_some() {
            return Err(MolError::syntax(self.pos, "dangling bond at end of input"));
        }
        if let Some((&digit, &(_, _, pos))) = self.rings.iter().next() {
            return Err(MolError::syntax(
                pos,
                format!("ring closure {digit} never closed"),
            ));
        }
        if self.atoms.is_empty() {
            return Err(MolError::syntax(0, "no atoms in SMILES"));
        }
        Ok(())
    }

    fn set_pending(&mut self, order: BondOrder) -> Result<(), MolError> {
        if self.pending_bond.is_some() {
            return Err(MolError::syntax(self.pos, "two bond symbols in a row"));
        }
        if self.prev.is_none() {
            return Err(MolError::syntax(self.pos, "bond symbol before any atom"));
        }
        self.pending_bond = Some(order);
        self.pos += 1;
        Ok(())
    }

    fn next_digit(&mut self, start: usize) -> Result<u8, MolError> {
        match self.bytes.get(self.pos) {
            Some(b @ b'0'..=b'9') => {
                self.pos += 1;
                Ok(b - b'0')
            }
            _ => Err(MolError::syntax(start, "'%' needs two digits")),
        }
    }

    /// Organic-subset atom starting at the cursor, if any. Two-letter
    /// symbols (Cl, Br) take precedence over single letters.
    fn try_organic_atom(&mut self) -> Result<Option<AtomSpec>, MolError> {
        let rest = &self.bytes[self.pos..];
        let (symbol, len, aromatic) = if rest.starts_with(b"Cl") {
            ("Cl", 2, false)
        } else if rest.starts_with(b"Br") {
            ("Br", 2, false)
        } else {
            let b = rest[0];
            let aromatic = b.is_ascii_lowercase();
            let up = b.to_ascii_uppercase();
            match up {
                b'B' | b'C' | b'N' | b'O' | b'P' | b'S' | b'F' | b'I' => {
                    // Lowercase f and i are not aromatic-capable.
                    if aromatic && matches!(up, b'F' | b'I') {
                        return Ok(None);
                    }
                    (
                        match up {
                            b'B' => "B",
                            b'C' => "C",
                            b'N' => "N",
                            b'O' => "O",
                            b'P' => "P",
                            b'S' => "S",
                            b'F' => "F",
                            _ => "I",
                        },
                        1,
                        aromatic,
                    )
                }
                _ => return Ok(None),
            }
        };
        let element = Element::from_symbol(symbol).expect("symbol table covers subset");
        self.pos += len;
        Ok(Some(AtomSpec {
            element,
            aromatic,
            formal_charge: 0,
            pinned_hydrogens: None,
        }))
    }

    /// `[symbol H? charge?]`, no isotopes, no stereo, no atom maps.
    fn parse_bracket(&mut self) -> Result<AtomSpec, MolError> {
        let open = self.pos;
        self.pos += 1;
        let rest = &self.bytes[self.pos..];
        if rest.first().is_some_and(|b| b.is_ascii_digit()) {
            return Err(MolError::syntax(self.pos, "isotope labels are not supported"));
        }

        let (symbol, len, aromatic) = if rest.starts_with(b"Cl") {
            ("Cl".to_string(), 2, false)
        } else if rest.starts_with(b"Br") {
            ("Br".to_string(), 2, false)
        } else {
            match rest.first() {
                Some(&b) if b.is_ascii_alphabetic() => {
                    let aromatic = b.is_ascii_lowercase();
                    ((b.to_ascii_uppercase() as char).to_string(), 1, aromatic)
                }
                _ => return Err(MolError::syntax(self.pos, "expected element symbol")),
            }
        };
        let element = Element::from_symbol(&symbol)
            .ok_or_else(|| MolError::syntax(self.pos, format!("unsupported element '{symbol}'")))?;
        if aromatic && !element.aromatic_capable() {
            return Err(MolError::syntax(
                self.pos,
                format!("element {symbol} cannot be aromatic"),
            ));
        }
        self.pos += len;

        let mut hydrogens: u8 = 0;
        if self.bytes.get(self.pos) == Some(&b'H') {
            self.pos += 1;
            hydrogens = 1;
            let mut digits = 0u32;
            let mut value = 0u32;
            while let Some(b @ b'0'..=b'9') = self.bytes.get(self.pos) {
                value = value * 10 + u32::from(b - b'0');
                digits += 1;
                self.pos += 1;
            }
            if digits > 0 {
                if value > 8 {
                    return Err(MolError::syntax(open, "hydrogen count out of range"));
                }
                hydrogens = value as u8;
            }
        }

        let mut charge: i32 = 0;
        match self.bytes.get(self.pos) {
            Some(&sign @ (b'+' | b'-')) => {
                self.pos += 1;
                let unit: i32 = if sign == b'+' { 1 } else { -1 };
                charge = unit;
                if let Some(&b) = self.bytes.get(self.pos) {
                    if b == sign {
                        charge = 2 * unit;
                        self.pos += 1;
                    } else if b.is_ascii_digit() {
                        charge = unit * i32::from(b - b'0');
                        self.pos += 1;
                    }
                }
                if charge.abs() > 2 {
                    return Err(MolError::syntax(open, "formal charge out of range"));
                }
            }
            _ => {}
        }

        if self.bytes.get(self.pos) != Some(&b']') {
            return Err(MolError::syntax(open, "expected ']'"));
        }
        self.pos += 1;

        Ok(AtomSpec {
            element,
            aromatic,
            formal_charge: charge,
            pinned_hydrogens: Some(hydrogens),
        })
    }

    fn push_atom(&mut self, spec: AtomSpec) -> Result<(), MolError> {
        let idx = self.atoms.len();
        self.atoms.push(spec);
        if let Some(prev) = self.prev {
            let order = self.take_bond(prev, idx);
            self.add_bond(prev, idx, order)?;
        } else if self.pending_bond.is_some() {
            return Err(MolError::syntax(self.pos, "bond with no preceding atom"));
        }
        self.prev = Some(idx);
        Ok(())
    }

    /// Pending explicit symbol wins; otherwise aromatic between two aromatic
    /// atoms, single everywhere else.
    fn take_bond(&mut self, a: usize, b: usize) -> BondOrder {
        self.pending_bond.take().unwrap_or({
            if self.atoms[a].aromatic && self.atoms[b].aromatic {
                BondOrder::Aromatic
            } else {
                BondOrder::Single
            }
        })
    }

    fn ring_closure(&mut self, digit: u16) -> Result<(), MolError> {
        let here = self.prev.ok_or_else(|| {
            MolError::syntax(self.pos, "ring closure before any atom")
        })?;
        let pending = self.pending_bond.take();
        match self.rings.remove(&digit) {
            Some((other, opened_bond, opened_pos)) => {
                if other == here {
                    return Err(MolError::syntax(
                        self.pos,
                        format!("ring closure {digit} bonds atom to itself"),
                    ));
                }
                let order = match (opened_bond, pending) {
                    (Some(x), Some(y)) if x != y => {
                        return Err(MolError::syntax(
                            opened_pos,
                            format!("ring closure {digit} bond symbols disagree"),
                        ));
                    }
                    (Some(x), _) => x,
                    (None, Some(y)) => y,
                    (None, None) => {
                        if self.atoms[other].aromatic && self.atoms[here].aromatic {
                            BondOrder::Aromatic
                        } else {
                            BondOrder::Single
                        }
                    }
                };
                self.add_bond(other, here, order)?;
            }
            None => {
                self.rings.insert(digit, (here, pending, self.pos));
            }
        }
        Ok(())
    }

    fn add_bond(&mut self, a: usize, b: usize, order: BondOrder) -> Result<(), MolError> {
        if self
            .bonds
            .iter()
            .any(|&(x, y, _)| (x, y) == (a, b) || (x, y) == (b, a))
        {
            return Err(MolError::syntax(
                self.pos,
                format!("duplicate bond between atoms {a} and {b}"),
            ));
        }
        self.bonds.push((a, b, order));
        Ok(())
    }
}
