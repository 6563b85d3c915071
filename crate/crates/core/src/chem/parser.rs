//! SMILES reader covering chains, branches, ring closures (`1`..`9`, `%nn`),
//! bond symbols `- = # : / \`, aromatic organic-subset atoms, bracket atoms
//! with charge, hydrogen count and `@`/`@@` chirality, and `.`-separated
//! fragments.

use std::collections::HashMap;

use thiserror::Error;

use super::element::Element;
use super::graph::{
    permutation_is_odd, Atom, Bond, BondOrder, Chirality, DoubleBondStereo, GraphError, Ligand,
    MolecularGraph,
};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum SmilesErrorKind {
    #[error("empty input")]
    Empty,
    #[error("input is not ASCII")]
    NonAscii,
    #[error("unexpected character '{0}'")]
    UnexpectedChar(char),
    #[error("unexpected end of input")]
    UnexpectedEnd,
    #[error("unknown atom symbol '{0}'")]
    UnknownElement(String),
    #[error("unbalanced parentheses")]
    UnbalancedParenthesis,
    #[error("unclosed bracket atom")]
    UnclosedBracket,
    #[error("ring closure {0} is never closed")]
    UnclosedRing(u32),
    #[error("ring closure bond symbols disagree")]
    RingBondMismatch,
    #[error("unsupported stereo descriptor")]
    UnsupportedStereo,
    #[error("unsupported feature: {0}")]
    Unsupported(&'static str),
    #[error(transparent)]
    Graph(#[from] GraphError),
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("invalid SMILES at byte {position}: {kind}")]
pub struct SmilesError {
    pub position: usize,
    pub kind: SmilesErrorKind,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum BondSymbol {
    Single,
    Double,
    Triple,
    Aromatic,
    Up,
    Down,
}

impl BondSymbol {
    fn order(self) -> BondOrder {
        match self {
            BondSymbol::Single | BondSymbol::Up | BondSymbol::Down => BondOrder::Single,
            BondSymbol::Double => BondOrder::Double,
            BondSymbol::Triple => BondOrder::Triple,
            BondSymbol::Aromatic => BondOrder::Aromatic,
        }
    }

    fn is_directional(self) -> bool {
        matches!(self, BondSymbol::Up | BondSymbol::Down)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Slot {
    Ligand(Ligand),
    PendingRing,
}

struct OpenRing {
    atom: usize,
    slot: usize,
    symbol: Option<BondSymbol>,
}

/// A directional single bond as written: `first` precedes `second` in the text.
struct Directional {
    first: usize,
    second: usize,
    up: bool,
}

struct Parser<'a> {
    input: &'a [u8],
    pos: usize,
    atoms: Vec<Atom>,
    bracket: Vec<bool>,
    written_chirality: Vec<Chirality>,
    bonds: Vec<Bond>,
    slots: Vec<Vec<Slot>>,
    rings: HashMap<u32, OpenRing>,
    directional: Vec<Directional>,
}

/// Parses a SMILES string into a molecular graph.
pub fn parse_smiles(text: &str) -> Result<MolecularGraph, SmilesError> {
    if text.is_empty() {
        return Err(SmilesError {
            position: 0,
            kind: SmilesErrorKind::Empty,
        });
    }
    if !text.is_ascii() {
        return Err(SmilesError {
            position: 0,
            kind: SmilesErrorKind::NonAscii,
        });
    }
    let mut p = Parser {
        input: text.as_bytes(),
        pos: 0,
        atoms: Vec::new(),
        bracket: Vec::new(),
        written_chirality: Vec::new(),
        bonds: Vec::new(),
        slots: Vec::new(),
        rings: HashMap::new(),
        directional: Vec::new(),
    };
    p.run()?;
    p.finish()
}

impl Parser<'_> {
    fn err<T>(&self, kind: SmilesErrorKind) -> Result<T, SmilesError> {
        Err(SmilesError {
            position: self.pos,
            kind,
        })
    }

    fn peek(&self) -> Option<u8> {
        self.input.get(self.pos).copied()
    }

    fn run(&mut self) -> Result<(), SmilesError> {
        let mut prev: Option<usize> = None;
        let mut branches: Vec<usize> = Vec::new();
        let mut pending: Option<BondSymbol> = None;
        // Set right after '(' so that "()" and "(." are rejected.
        let mut branch_open = false;

        while let Some(c) = self.peek() {
            match c {
                b'(' => {
                    if prev.is_none() || pending.is_some() {
                        return self.err(SmilesErrorKind::UnexpectedChar('('));
                    }
                    branches.push(prev.unwrap());
                    self.pos += 1;
                    branch_open = true;
                    continue;
                }
                b')' => {
                    if branch_open || pending.is_some() {
                        return self.err(SmilesErrorKind::UnexpectedChar(')'));
                    }
                    match branches.pop() {
                        Some(a) => prev = Some(a),
                        None => return self.err(SmilesErrorKind::UnbalancedParenthesis),
                    }
                    self.pos += 1;
                }
                b'.' => {
                    if prev.is_none() || pending.is_some() || branch_open || !branches.is_empty() {
                        return self.err(SmilesErrorKind::UnexpectedChar('.'));
                    }
                    prev = None;
                    self.pos += 1;
                }
                b'-' | b'=' | b'#' | b':' | b'/' | b'\\' => {
                    if prev.is_none() || pending.is_some() {
                        return self.err(SmilesErrorKind::UnexpectedChar(c as char));
                    }
                    pending = Some(match c {
                        b'-' => BondSymbol::Single,
                        b'=' => BondSymbol::Double,
                        b'#' => BondSymbol::Triple,
                        b':' => BondSymbol::Aromatic,
                        b'/' => BondSymbol::Up,
                        _ => BondSymbol::Down,
                    });
                    self.pos += 1;
                    continue;
                }
                b'$' => return self.err(SmilesErrorKind::Unsupported("quadruple bond")),
                b'0'..=b'9' | b'%' => {
                    let Some(atom) = prev else {
                        return self.err(SmilesErrorKind::UnexpectedChar(c as char));
                    };
                    if branch_open {
                        return self.err(SmilesErrorKind::UnexpectedChar(c as char));
                    }
                    let start = self.pos;
                    let digit = self.ring_number()?;
                    self.ring_closure(atom, digit, pending.take(), start)?;
                    continue;
                }
                _ => {
                    let atom = self.atom()?;
                    if let Some(p) = prev {
                        self.connect(p, atom, pending.take());
                    } else {
                        if pending.is_some() {
                            return self.err(SmilesErrorKind::UnexpectedChar(c as char));
                        }
                        self.push_hydrogen_slot(atom);
                    }
                    prev = Some(atom);
                }
            }
            branch_open = false;
        }
        if pending.is_some() {
            return self.err(SmilesErrorKind::UnexpectedEnd);
        }
        if branch_open || !branches.is_empty() {
            return self.err(SmilesErrorKind::UnbalancedParenthesis);
        }
        if let Some((&d, _)) = self.rings.iter().min_by_key(|(d, _)| **d) {
            return self.err(SmilesErrorKind::UnclosedRing(d));
        }
        if self.atoms.is_empty() {
            return self.err(SmilesErrorKind::Empty);
        }
        Ok(())
    }

    fn ring_number(&mut self) -> Result<u32, SmilesError> {
        let c = self.peek().unwrap();
        if c == b'%' {
            self.pos += 1;
            let d: Vec<u8> = self.input[self.pos..]
                .iter()
                .take(2)
                .copied()
                .collect();
            if d.len() < 2 || !d.iter().all(u8::is_ascii_digit) {
                return self.err(SmilesErrorKind::UnexpectedChar('%'));
            }
            self.pos += 2;
            Ok(((d[0] - b'0') * 10 + (d[1] - b'0')) as u32)
        } else {
            self.pos += 1;
            Ok((c - b'0') as u32)
        }
    }

    fn ring_closure(
        &mut self,
        atom: usize,
        digit: u32,
        symbol: Option<BondSymbol>,
        start: usize,
    ) -> Result<(), SmilesError> {
        if let Some(open) = self.rings.remove(&digit) {
            if open.atom == atom {
                return Err(SmilesError {
                    position: start,
                    kind: GraphError::SelfLoop(self.bonds.len(), atom).into(),
                });
            }
            let sym = match (open.symbol, symbol) {
                (Some(a), Some(b)) if a.order() != b.order() => {
                    return Err(SmilesError {
                        position: start,
                        kind: SmilesErrorKind::RingBondMismatch,
                    })
                }
                (Some(a), _) => Some(a),
                (None, b) => b,
            };
            if self.bonds.iter().any(|b| {
                (b.a == open.atom && b.b == atom) || (b.a == atom && b.b == open.atom)
            }) {
                return Err(SmilesError {
                    position: start,
                    kind: GraphError::DuplicateBond(open.atom, atom).into(),
                });
            }
            self.slots[open.atom][open.slot] = Slot::Ligand(Ligand::Atom(atom));
            self.slots[atom].push(Slot::Ligand(Ligand::Atom(open.atom)));
            let order = self.default_order(open.atom, atom, sym);
            self.bonds.push(Bond::new(open.atom, atom, order));
            if let Some(s) = sym.filter(|s| s.is_directional()) {
                // A mark at the opening digit reads from the opening atom;
                // a mark at the closing digit reads from the closing atom.
                let (first, second) = if open.symbol.is_some() {
                    (open.atom, atom)
                } else {
                    (atom, open.atom)
                };
                self.directional.push(Directional {
                    first,
                    second,
                    up: s == BondSymbol::Up,
                });
            }
        } else {
            let slot = self.slots[atom].len();
            self.slots[atom].push(Slot::PendingRing);
            self.rings.insert(digit, OpenRing { atom, slot, symbol });
        }
        Ok(())
    }

    fn default_order(&self, a: usize, b: usize, symbol: Option<BondSymbol>) -> BondOrder {
        match symbol {
            Some(s) => s.order(),
            None if self.atoms[a].aromatic && self.atoms[b].aromatic => BondOrder::Aromatic,
            None => BondOrder::Single,
        }
    }

    fn connect(&mut self, prev: usize, atom: usize, symbol: Option<BondSymbol>) {
        let order = self.default_order(prev, atom, symbol);
        self.bonds.push(Bond::new(prev, atom, order));
        self.slots[prev].push(Slot::Ligand(Ligand::Atom(atom)));
        self.slots[atom].push(Slot::Ligand(Ligand::Atom(prev)));
        self.push_hydrogen_slot(atom);
        if let Some(s) = symbol.filter(|s| s.is_directional()) {
            self.directional.push(Directional {
                first: prev,
                second: atom,
                up: s == BondSymbol::Up,
            });
        }
    }

    fn push_hydrogen_slot(&mut self, atom: usize) {
        if self.bracket[atom] && self.atoms[atom].explicit_h_count > 0 {
            self.slots[atom].push(Slot::Ligand(Ligand::Hydrogen));
        }
    }

    fn add_atom(&mut self, atom: Atom, bracket: bool, chirality: Chirality) -> usize {
        self.atoms.push(atom);
        self.bracket.push(bracket);
        self.written_chirality.push(chirality);
        self.slots.push(Vec::new());
        self.atoms.len() - 1
    }

    fn atom(&mut self) -> Result<usize, SmilesError> {
        let c = self.peek().unwrap();
        if c == b'[' {
            return self.bracket_atom();
        }
        let next = self.input.get(self.pos + 1).copied();
        let (element, aromatic, len) = match (c, next) {
            (b'C', Some(b'l')) => (Element::CL, false, 2),
            (b'B', Some(b'r')) => (Element::BR, false, 2),
            (b'B', _) => (Element::B, false, 1),
            (b'C', _) => (Element::C, false, 1),
            (b'N', _) => (Element::N, false, 1),
            (b'O', _) => (Element::O, false, 1),
            (b'P', _) => (Element::P, false, 1),
            (b'S', _) => (Element::S, false, 1),
            (b'F', _) => (Element::F, false, 1),
            (b'I', _) => (Element::I, false, 1),
            (b'b', _) => (Element::B, true, 1),
            (b'c', _) => (Element::C, true, 1),
            (b'n', _) => (Element::N, true, 1),
            (b'o', _) => (Element::O, true, 1),
            (b'p', _) => (Element::P, true, 1),
            (b's', _) => (Element::S, true, 1),
            (b'*', _) => return self.err(SmilesErrorKind::Unsupported("wildcard atom")),
            (b'A'..=b'Z' | b'a'..=b'z', _) => {
                return self.err(SmilesErrorKind::UnknownElement((c as char).to_string()))
            }
            _ => return self.err(SmilesErrorKind::UnexpectedChar(c as char)),
        };
        self.pos += len;
        let mut atom = Atom::new(element);
        atom.aromatic = aromatic;
        Ok(self.add_atom(atom, false, Chirality::None))
    }

    fn bracket_atom(&mut self) -> Result<usize, SmilesError> {
        let start = self.pos;
        self.pos += 1;
        let Some(end) = self.input[self.pos..].iter().position(|&b| b == b']') else {
            return Err(SmilesError {
                position: start,
                kind: SmilesErrorKind::UnclosedBracket,
            });
        };
        let end = self.pos + end;
        if self.peek().is_some_and(|c| c.is_ascii_digit()) {
            return self.err(SmilesErrorKind::Unsupported("isotope"));
        }
        let (element, aromatic) = self.bracket_symbol(end)?;
        let mut chirality = Chirality::None;
        if self.peek() == Some(b'@') {
            self.pos += 1;
            chirality = Chirality::CounterClockwise;
            if self.peek() == Some(b'@') {
                self.pos += 1;
                chirality = Chirality::Clockwise;
            }
            if self.peek().is_some_and(|c| c.is_ascii_uppercase() && c != b'H') {
                return self.err(SmilesErrorKind::UnsupportedStereo);
            }
        }
        let mut h_count = 0u8;
        if self.peek() == Some(b'H') {
            self.pos += 1;
            h_count = 1;
            if let Some(c) = self.peek().filter(u8::is_ascii_digit) {
                h_count = c - b'0';
                self.pos += 1;
            }
        }
        let mut charge: i32 = 0;
        if let Some(sign @ (b'+' | b'-')) = self.peek() {
            let s = if sign == b'+' { 1 } else { -1 };
            self.pos += 1;
            if let Some(c) = self.peek().filter(u8::is_ascii_digit) {
                self.pos += 1;
                let mut v = (c - b'0') as i32;
                if let Some(c2) = self.peek().filter(u8::is_ascii_digit) {
                    self.pos += 1;
                    v = v * 10 + (c2 - b'0') as i32;
                }
                charge = s * v;
            } else {
                charge = s;
                while self.peek() == Some(sign) {
                    self.pos += 1;
                    charge += s;
                }
            }
        }
        if charge.abs() > 15 {
            return self.err(SmilesErrorKind::Unsupported("formal charge magnitude"));
        }
        if self.peek() == Some(b':') {
            return self.err(SmilesErrorKind::Unsupported("atom class"));
        }
        if self.pos != end {
            let c = self.peek().unwrap();
            return self.err(SmilesErrorKind::UnexpectedChar(c as char));
        }
        self.pos = end + 1;
        let mut atom = Atom::new(element);
        atom.aromatic = aromatic;
        atom.formal_charge = charge as i8;
        atom.explicit_h_count = h_count;
        Ok(self.add_atom(atom, true, chirality))
    }

    fn bracket_symbol(&mut self, end: usize) -> Result<(Element, bool), SmilesError> {
        let rest = &self.input[self.pos..end];
        for (sym, el) in [("se", 34u8), ("as", 33u8)] {
            if rest.starts_with(sym.as_bytes()) {
                self.pos += 2;
                return Ok((Element::from_atomic_number(el).unwrap(), true));
            }
        }
        let Some(&c) = rest.first() else {
            return self.err(SmilesErrorKind::UnexpectedChar(']'));
        };
        if c.is_ascii_lowercase() {
            let el = match c {
                b'b' => Element::B,
                b'c' => Element::C,
                b'n' => Element::N,
                b'o' => Element::O,
                b'p' => Element::P,
                b's' => Element::S,
                _ => return self.err(SmilesErrorKind::UnknownElement((c as char).to_string())),
            };
            self.pos += 1;
            return Ok((el, true));
        }
        if !c.is_ascii_uppercase() {
            if c == b'*' {
                return self.err(SmilesErrorKind::Unsupported("wildcard atom"));
            }
            return self.err(SmilesErrorKind::UnexpectedChar(c as char));
        }
        if let Some(&c2) = rest.get(1).filter(|b| b.is_ascii_lowercase()) {
            let two = format!("{}{}", c as char, c2 as char);
            if let Some(el) = Element::from_symbol(&two) {
                self.pos += 2;
                return Ok((el, false));
            }
        }
        let one = (c as char).to_string();
        match Element::from_symbol(&one) {
            Some(el) => {
                self.pos += 1;
                Ok((el, false))
            }
            None => self.err(SmilesErrorKind::UnknownElement(one)),
        }
    }

    fn finish(self) -> Result<MolecularGraph, SmilesError> {
        let err = |kind: SmilesErrorKind| SmilesError {
            position: self.input.len(),
            kind,
        };
        let mut graph = MolecularGraph::new(self.atoms.clone(), self.bonds.clone())
            .map_err(|e| err(e.into()))?;

        for i in 0..graph.atom_count() {
            if !self.bracket[i] {
                let h = graph.implicit_h_for_organic(i).unwrap_or(0);
                graph.atoms_mut()[i].explicit_h_count = h;
            }
        }

        for i in 0..graph.atom_count() {
            let written = self.written_chirality[i];
            if written == Chirality::None {
                continue;
            }
            let order: Vec<Ligand> = self.slots[i]
                .iter()
                .map(|s| match s {
                    Slot::Ligand(l) => *l,
                    Slot::PendingRing => unreachable!("all rings closed"),
                })
                .collect();
            let reference = graph.reference_ligands(i);
            if reference.len() != order.len() {
                return Err(err(SmilesErrorKind::UnsupportedStereo));
            }
            graph.atoms_mut()[i].chirality = written.flip_if(permutation_is_odd(&order, &reference));
        }

        let stereo = self.double_bond_stereo(&graph);
        if stereo.iter().any(Option::is_some) {
            let mut bonds = graph.bonds().to_vec();
            for (b, s) in bonds.iter_mut().zip(stereo) {
                b.stereo = s;
            }
            let atoms = graph.atoms().to_vec();
            graph = MolecularGraph::new(atoms, bonds).map_err(|e| err(e.into()))?;
        }
        Ok(graph)
    }

    /// Side (`true` = up) of neighbour `x` relative to double-bond atom `centre`,
    /// if the bond between them carries a direction mark.
    fn marked_side(&self, centre: usize, x: usize) -> Option<bool> {
        self.directional.iter().find_map(|d| {
            if d.first == x && d.second == centre {
                Some(!d.up)
            } else if d.first == centre && d.second == x {
                Some(d.up)
            } else {
                None
            }
        })
    }

    fn double_bond_stereo(&self, graph: &MolecularGraph) -> Vec<Option<DoubleBondStereo>> {
        graph
            .bonds()
            .iter()
            .map(|bond| {
                if bond.order != BondOrder::Double {
                    return None;
                }
                let side = |centre: usize, partner: usize| -> Option<(usize, bool)> {
                    let mut subs: Vec<usize> = graph
                        .neighbors(centre)
                        .iter()
                        .map(|&(n, _)| n)
                        .filter(|&n| n != partner)
                        .collect();
                    subs.sort_unstable();
                    let reference = *subs.first()?;
                    subs.iter().find_map(|&x| {
                        self.marked_side(centre, x)
                            .map(|s| (reference, if x == reference { s } else { !s }))
                    })
                };
                let (ref_a, side_a) = side(bond.a, bond.b)?;
                let (ref_b, side_b) = side(bond.b, bond.a)?;
                Some(DoubleBondStereo {
                    ref_a,
                    ref_b,
                    cis: side_a == side_b,
                })
            })
            .collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn kind(s: &str) -> SmilesErrorKind {
        parse_smiles(s).unwrap_err().kind
    }

    #[test]
    fn single_atom() {
        let g = parse_smiles("C").unwrap();
        assert_eq!(g.atom_count(), 1);
        assert!(g.bonds().is_empty());
        assert_eq!(g.atom(0).explicit_h_count, 4);
    }

    #[test]
    fn benzene_ring() {
        let g = parse_smiles("c1ccccc1").unwrap();
        assert_eq!(g.atom_count(), 6);
        assert_eq!(g.bonds().len(), 6);
        assert!(g.atoms().iter().all(|a| a.aromatic && a.explicit_h_count == 1));
        assert!(g.bonds().iter().all(|b| b.order == BondOrder::Aromatic));
        assert_eq!(g.smallest_atom_rings(), vec![Some(6); 6]);
    }

    #[test]
    fn syntax_errors() {
        assert_eq!(kind("C(C"), SmilesErrorKind::UnbalancedParenthesis);
        assert_eq!(kind("CC)"), SmilesErrorKind::UnbalancedParenthesis);
        assert_eq!(kind("C1CC"), SmilesErrorKind::UnclosedRing(1));
        assert_eq!(kind("[CH4"), SmilesErrorKind::UnclosedBracket);
        assert!(matches!(kind("Xy"), SmilesErrorKind::UnknownElement(_)));
        assert!(matches!(kind("[Xy]"), SmilesErrorKind::UnknownElement(_)));
        assert_eq!(kind("C[C@TH1](F)Cl"), SmilesErrorKind::UnsupportedStereo);
        assert_eq!(kind(""), SmilesErrorKind::Empty);
        assert!(matches!(kind("C=") , SmilesErrorKind::UnexpectedEnd));
        assert!(matches!(kind("C()C"), SmilesErrorKind::UnexpectedChar(')')));
        assert!(matches!(kind("(C)"), SmilesErrorKind::UnexpectedChar('(')));
        assert!(matches!(kind("C11"), SmilesErrorKind::Graph(_)));
        assert!(matches!(kind("C12CC12"), SmilesErrorKind::Graph(_)));
    }

    #[test]
    fn bracket_atoms() {
        let g = parse_smiles("[NH4+].[O-]C(=O)C").unwrap();
        assert_eq!(g.atom(0).formal_charge, 1);
        assert_eq!(g.atom(0).explicit_h_count, 4);
        assert_eq!(g.atom(1).formal_charge, -1);
        assert_eq!(g.fragment_count(), 2);
        let g = parse_smiles("c1cc[nH]c1").unwrap();
        assert_eq!(g.atom(3).explicit_h_count, 1);
        assert_eq!(g.atom(0).explicit_h_count, 1);
        let g = parse_smiles("[Fe++]").unwrap();
        assert_eq!(g.atom(0).formal_charge, 2);
        let g = parse_smiles("[Cu+2]").unwrap();
        assert_eq!(g.atom(0).formal_charge, 2);
    }

    #[test]
    fn ring_closure_bond_orders() {
        let g = parse_smiles("C1CCCC=1").unwrap();
        assert_eq!(g.bonds().last().unwrap().order, BondOrder::Double);
        let g = parse_smiles("C%10CC%10").unwrap();
        assert_eq!(g.bonds().len(), 3);
        assert_eq!(kind("C=1CC#1"), SmilesErrorKind::RingBondMismatch);
    }

    #[test]
    fn implicit_hydrogens() {
        let g = parse_smiles("CC(=O)O").unwrap();
        let h: Vec<u8> = g.atoms().iter().map(|a| a.explicit_h_count).collect();
        assert_eq!(h, vec![3, 0, 0, 1]);
        let g = parse_smiles("c1ccncc1").unwrap();
        assert_eq!(g.atom(3).explicit_h_count, 0);
        let g = parse_smiles("CS(=O)(=O)C").unwrap();
        assert_eq!(g.atom(1).explicit_h_count, 0);
    }

    #[test]
    fn chirality_normalised_to_reference_order() {
        // Same atom numbering, different written ligand order: the
        // ring-closure spelling lists H before N, one swap away.
        let a = parse_smiles("N[C@@H](C)O").unwrap();
        let b = parse_smiles("N1.[C@H]1(C)O").unwrap();
        assert_eq!(a.atom(1).chirality, b.atom(1).chirality);
        let c = parse_smiles("N[C@H](C)O").unwrap();
        assert_ne!(a.atom(1).chirality, c.atom(1).chirality);
    }

    #[test]
    fn double_bond_stereo() {
        let trans = parse_smiles("F/C=C/F").unwrap();
        let cis = parse_smiles("F/C=C\\F").unwrap();
        assert!(!trans.bond(1).stereo.unwrap().cis);
        assert!(cis.bond(1).stereo.unwrap().cis);
        let trans2 = parse_smiles("F\\C=C\\F").unwrap();
        assert!(!trans2.bond(1).stereo.unwrap().cis);
        let plain = parse_smiles("FC=CF").unwrap();
        assert!(plain.bond(1).stereo.is_none());
    }
}
