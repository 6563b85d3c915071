use std::collections::VecDeque;

use thiserror::Error;

use super::element::Element;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum BondOrder {
    Single,
    Double,
    Triple,
    Aromatic,
}

impl BondOrder {
    /// Contribution to the valence sum; aromatic bonds count as one and the
    /// aromatic atom itself contributes the extra electron.
    pub fn valence(self) -> u8 {
        match self {
            BondOrder::Single | BondOrder::Aromatic => 1,
            BondOrder::Double => 2,
            BondOrder::Triple => 3,
        }
    }

    pub fn code(self) -> u32 {
        match self {
            BondOrder::Single => 1,
            BondOrder::Double => 2,
            BondOrder::Triple => 3,
            BondOrder::Aromatic => 4,
        }
    }
}

/// Tetrahedral configuration. Stored relative to the reference ligand order
/// of the atom: attached hydrogen first, then neighbours by ascending index.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Chirality {
    None,
    /// `@@` when the reference order is read looking from the first ligand.
    Clockwise,
    /// `@`
    CounterClockwise,
}

impl Chirality {
    pub fn inverted(self) -> Chirality {
        match self {
            Chirality::None => Chirality::None,
            Chirality::Clockwise => Chirality::CounterClockwise,
            Chirality::CounterClockwise => Chirality::Clockwise,
        }
    }

    pub fn flip_if(self, odd: bool) -> Chirality {
        if odd {
            self.inverted()
        } else {
            self
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Atom {
    pub element: Element,
    pub formal_charge: i8,
    pub aromatic: bool,
    pub chirality: Chirality,
    /// Attached hydrogens that are not graph vertices.
    pub explicit_h_count: u8,
}

impl Atom {
    pub fn new(element: Element) -> Self {
        Atom {
            element,
            formal_charge: 0,
            aromatic: false,
            chirality: Chirality::None,
            explicit_h_count: 0,
        }
    }
}

/// Cis/trans configuration of a double bond, expressed through one reference
/// neighbour on each end (`ref_a` bonded to `a`, `ref_b` bonded to `b`).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct DoubleBondStereo {
    pub ref_a: usize,
    pub ref_b: usize,
    pub cis: bool,
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Bond {
    pub a: usize,
    pub b: usize,
    pub order: BondOrder,
    pub stereo: Option<DoubleBondStereo>,
}

impl Bond {
    pub fn new(a: usize, b: usize, order: BondOrder) -> Self {
        Bond {
            a,
            b,
            order,
            stereo: None,
        }
    }

    pub fn other(&self, atom: usize) -> usize {
        if self.a == atom {
            self.b
        } else {
            self.a
        }
    }
}

/// A ligand slot around a stereocentre.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Ligand {
    Hydrogen,
    Atom(usize),
}

#[derive(Debug, Clone, Error, PartialEq, Eq)]
pub enum GraphError {
    #[error("bond {0} references atom {1} which does not exist")]
    InvalidAtomIndex(usize, usize),
    #[error("bond {0} is a self-loop on atom {1}")]
    SelfLoop(usize, usize),
    #[error("duplicate bond between atoms {0} and {1}")]
    DuplicateBond(usize, usize),
    #[error("stereo reference of bond {0} is not a neighbour")]
    BadStereoReference(usize),
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct MolecularGraph {
    atoms: Vec<Atom>,
    bonds: Vec<Bond>,
    adjacency: Vec<Vec<(usize, usize)>>,
}

impl MolecularGraph {
    pub fn new(atoms: Vec<Atom>, bonds: Vec<Bond>) -> Result<Self, GraphError> {
        let mut adjacency = vec![Vec::new(); atoms.len()];
        for (bi, bond) in bonds.iter().enumerate() {
            for end in [bond.a, bond.b] {
                if end >= atoms.len() {
                    return Err(GraphError::InvalidAtomIndex(bi, end));
                }
            }
            if bond.a == bond.b {
                return Err(GraphError::SelfLoop(bi, bond.a));
            }
            if adjacency[bond.a].iter().any(|&(n, _)| n == bond.b) {
                return Err(GraphError::DuplicateBond(bond.a, bond.b));
            }
            adjacency[bond.a].push((bond.b, bi));
            adjacency[bond.b].push((bond.a, bi));
        }
        let graph = MolecularGraph {
            atoms,
            bonds,
            adjacency,
        };
        for (bi, bond) in graph.bonds.iter().enumerate() {
            if let Some(st) = bond.stereo {
                let ok_a = st.ref_a != bond.b && graph.bond_between(bond.a, st.ref_a).is_some();
                let ok_b = st.ref_b != bond.a && graph.bond_between(bond.b, st.ref_b).is_some();
                if !ok_a || !ok_b {
                    return Err(GraphError::BadStereoReference(bi));
                }
            }
        }
        Ok(graph)
    }

    pub fn atoms(&self) -> &[Atom] {
        &self.atoms
    }

    pub fn bonds(&self) -> &[Bond] {
        &self.bonds
    }

    pub fn atom(&self, i: usize) -> &Atom {
        &self.atoms[i]
    }

    pub fn bond(&self, i: usize) -> &Bond {
        &self.bonds[i]
    }

    pub fn atom_count(&self) -> usize {
        self.atoms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.atoms.is_empty()
    }

    /// `(neighbour, bond index)` pairs in insertion order.
    pub fn neighbors(&self, atom: usize) -> &[(usize, usize)] {
        &self.adjacency[atom]
    }

    pub fn degree(&self, atom: usize) -> usize {
        self.adjacency[atom].len()
    }

    pub fn heavy_degree(&self, atom: usize) -> usize {
        self.adjacency[atom]
            .iter()
            .filter(|&&(n, _)| self.atoms[n].element != Element::H)
            .count()
    }

    pub fn bond_between(&self, a: usize, b: usize) -> Option<usize> {
        self.adjacency[a]
            .iter()
            .find(|&&(n, _)| n == b)
            .map(|&(_, bi)| bi)
    }

    pub fn heavy_atom_count(&self) -> usize {
        self.atoms
            .iter()
            .filter(|a| a.element != Element::H)
            .count()
    }

    /// Hydrogens attached to `atom`: implicit/bracket count plus explicit H vertices.
    pub fn total_h_count(&self, atom: usize) -> usize {
        let explicit_vertices = self.adjacency[atom]
            .iter()
            .filter(|&&(n, _)| self.atoms[n].element == Element::H)
            .count();
        self.atoms[atom].explicit_h_count as usize + explicit_vertices
    }

    /// Hydrogen count an organic-subset atom would receive if written without
    /// brackets. `None` for elements outside the organic subset.
    pub fn implicit_h_for_organic(&self, atom: usize) -> Option<u8> {
        let a = &self.atoms[atom];
        if !a.element.is_organic_subset() {
            return None;
        }
        let mut sum: u32 = self.adjacency[atom]
            .iter()
            .map(|&(_, bi)| self.bonds[bi].order.valence() as u32)
            .sum();
        if a.aromatic {
            sum += 1;
        }
        let h = a
            .element
            .default_valences()
            .iter()
            .map(|&v| v as u32)
            .find(|&v| v >= sum)
            .map(|v| v - sum)
            .unwrap_or(0);
        Some(h as u8)
    }

    /// Connected components as sorted atom index lists, ordered by smallest member.
    pub fn fragments(&self) -> Vec<Vec<usize>> {
        let mut seen = vec![false; self.atoms.len()];
        let mut out = Vec::new();
        for start in 0..self.atoms.len() {
            if seen[start] {
                continue;
            }
            let mut comp = Vec::new();
            let mut queue = VecDeque::from([start]);
            seen[start] = true;
            while let Some(v) = queue.pop_front() {
                comp.push(v);
                for &(n, _) in &self.adjacency[v] {
                    if !seen[n] {
                        seen[n] = true;
                        queue.push_back(n);
                    }
                }
            }
            comp.sort_unstable();
            out.push(comp);
        }
        out
    }

    pub fn fragment_count(&self) -> usize {
        self.fragments().len()
    }

    /// Size of the smallest ring through each bond; `None` for acyclic bonds.
    pub fn smallest_bond_rings(&self) -> Vec<Option<usize>> {
        (0..self.bonds.len())
            .map(|bi| {
                let Bond { a, b, .. } = self.bonds[bi];
                self.shortest_path_avoiding(b, a, bi).map(|d| d + 1)
            })
            .collect()
    }

    /// Size of the smallest ring containing each atom; `None` for chain atoms.
    pub fn smallest_atom_rings(&self) -> Vec<Option<usize>> {
        let bond_rings = self.smallest_bond_rings();
        (0..self.atoms.len())
            .map(|v| {
                self.adjacency[v]
                    .iter()
                    .filter_map(|&(_, bi)| bond_rings[bi])
                    .min()
            })
            .collect()
    }

    fn shortest_path_avoiding(&self, from: usize, to: usize, skip_bond: usize) -> Option<usize> {
        let mut dist = vec![usize::MAX; self.atoms.len()];
        dist[from] = 0;
        let mut queue = VecDeque::from([from]);
        while let Some(v) = queue.pop_front() {
            if v == to {
                return Some(dist[v]);
            }
            for &(n, bi) in &self.adjacency[v] {
                if bi != skip_bond && dist[n] == usize::MAX {
                    dist[n] = dist[v] + 1;
                    queue.push_back(n);
                }
            }
        }
        None
    }

    /// Ligands of `atom` in the order its stored chirality refers to.
    pub fn reference_ligands(&self, atom: usize) -> Vec<Ligand> {
        let mut out = Vec::with_capacity(4);
        if self.atoms[atom].explicit_h_count > 0 {
            out.push(Ligand::Hydrogen);
        }
        let mut nbrs: Vec<usize> = self.adjacency[atom].iter().map(|&(n, _)| n).collect();
        nbrs.sort_unstable();
        out.extend(nbrs.into_iter().map(Ligand::Atom));
        out
    }

    /// The subgraph induced by `keep` (sorted ascending), with indices remapped.
    /// Relative atom order is preserved, so stored chirality stays valid.
    pub fn induced_subgraph(&self, keep: &[usize]) -> MolecularGraph {
        let mut map = vec![usize::MAX; self.atoms.len()];
        let mut sorted = keep.to_vec();
        sorted.sort_unstable();
        sorted.dedup();
        for (new, &old) in sorted.iter().enumerate() {
            map[old] = new;
        }
        let atoms = sorted.iter().map(|&i| self.atoms[i].clone()).collect();
        let bonds = self
            .bonds
            .iter()
            .filter(|b| map[b.a] != usize::MAX && map[b.b] != usize::MAX)
            .map(|b| Bond {
                a: map[b.a],
                b: map[b.b],
                order: b.order,
                stereo: b.stereo.map(|s| DoubleBondStereo {
                    ref_a: map[s.ref_a],
                    ref_b: map[s.ref_b],
                    cis: s.cis,
                }),
            })
            .collect();
        MolecularGraph::new(atoms, bonds).expect("induced subgraph of a valid graph")
    }

    /// Relabels atoms so that old atom `i` becomes `perm[i]`; stereo
    /// descriptors are adjusted to the new reference orders.
    pub fn permuted(&self, perm: &[usize]) -> MolecularGraph {
        assert_eq!(perm.len(), self.atoms.len());
        let mut atoms = vec![Atom::new(Element::C); self.atoms.len()];
        for (old, atom) in self.atoms.iter().enumerate() {
            atoms[perm[old]] = atom.clone();
        }
        let bonds = self
            .bonds
            .iter()
            .map(|b| Bond {
                a: perm[b.a],
                b: perm[b.b],
                order: b.order,
                stereo: b.stereo.map(|s| DoubleBondStereo {
                    ref_a: perm[s.ref_a],
                    ref_b: perm[s.ref_b],
                    cis: s.cis,
                }),
            })
            .collect();
        let mut out = MolecularGraph::new(atoms, bonds).expect("permutation of a valid graph");
        for old in 0..self.atoms.len() {
            let chir = self.atoms[old].chirality;
            if chir == Chirality::None {
                continue;
            }
            let mapped: Vec<Ligand> = self
                .reference_ligands(old)
                .into_iter()
                .map(|l| match l {
                    Ligand::Atom(i) => Ligand::Atom(perm[i]),
                    h => h,
                })
                .collect();
            let target = out.reference_ligands(perm[old]);
            out.atoms[perm[old]].chirality = chir.flip_if(permutation_is_odd(&mapped, &target));
        }
        out
    }

    pub(crate) fn atoms_mut(&mut self) -> &mut [Atom] {
        &mut self.atoms
    }
}

/// Parity of the permutation taking `from` to `to` (same elements, any order).
pub fn permutation_is_odd<T: PartialEq>(from: &[T], to: &[T]) -> bool {
    debug_assert_eq!(from.len(), to.len());
    let mut idx: Vec<usize> = from
        .iter()
        .map(|x| to.iter().position(|y| y == x).expect("same ligand set"))
        .collect();
    let mut swaps = 0;
    for i in 0..idx.len() {
        while idx[i] != i {
            let j = idx[i];
            idx.swap(i, j);
            swaps += 1;
        }
    }
    swaps % 2 == 1
}

#[cfg(test)]
mod tests {
    use super::*;

    fn chain(n: usize) -> MolecularGraph {
        let atoms = vec![Atom::new(Element::C); n];
        let bonds = (1..n).map(|i| Bond::new(i - 1, i, BondOrder::Single)).collect();
        MolecularGraph::new(atoms, bonds).unwrap()
    }

    #[test]
    fn rejects_self_loops_and_duplicates() {
        let atoms = vec![Atom::new(Element::C); 2];
        assert_eq!(
            MolecularGraph::new(atoms.clone(), vec![Bond::new(0, 0, BondOrder::Single)]),
            Err(GraphError::SelfLoop(0, 0))
        );
        assert_eq!(
            MolecularGraph::new(
                atoms,
                vec![
                    Bond::new(0, 1, BondOrder::Single),
                    Bond::new(1, 0, BondOrder::Double)
                ]
            ),
            Err(GraphError::DuplicateBond(1, 0))
        );
    }

    #[test]
    fn ring_sizes() {
        let atoms = vec![Atom::new(Element::C); 7];
        let mut bonds: Vec<Bond> = (1..6).map(|i| Bond::new(i - 1, i, BondOrder::Single)).collect();
        bonds.push(Bond::new(5, 0, BondOrder::Single));
        bonds.push(Bond::new(0, 6, BondOrder::Single));
        let g = MolecularGraph::new(atoms, bonds).unwrap();
        let rings = g.smallest_atom_rings();
        assert_eq!(rings[..6], [Some(6); 6]);
        assert_eq!(rings[6], None);
        assert_eq!(chain(4).smallest_atom_rings(), vec![None; 4]);
    }

    #[test]
    fn parity() {
        assert!(!permutation_is_odd(&[1, 2, 3], &[1, 2, 3]));
        assert!(permutation_is_odd(&[1, 2, 3], &[2, 1, 3]));
        assert!(!permutation_is_odd(&[1, 2, 3], &[2, 3, 1]));
    }

    #[test]
    fn fragments_are_components() {
        let atoms = vec![Atom::new(Element::C); 4];
        let g = MolecularGraph::new(atoms, vec![Bond::new(0, 2, BondOrder::Single)]).unwrap();
        assert_eq!(g.fragments(), vec![vec![0, 2], vec![1], vec![3]]);
    }
}
