use super::canon::canonical_smiles;
use super::graph::MolecularGraph;

/// Heavy-atom ceiling for drug-like molecules.
pub const MAX_HEAVY_ATOMS: usize = 70;

/// The connected component with the most heavy atoms. Ties go to the one with
/// more atoms overall, then to the lexicographically smaller canonical SMILES.
pub fn largest_fragment(g: &MolecularGraph) -> MolecularGraph {
    let frags = g.fragments();
    if frags.len() <= 1 {
        return g.clone();
    }
    frags
        .iter()
        .map(|atoms| {
            let sub = g.induced_subgraph(atoms);
            let key = (sub.heavy_atom_count(), sub.atom_count());
            (key, canonical_smiles(&sub), sub)
        })
        .max_by(|(ka, sa, _), (kb, sb, _)| ka.cmp(kb).then_with(|| sb.cmp(sa)))
        .map(|(_, _, sub)| sub)
        .expect("at least one fragment")
}

/// At most 70 heavy atoms, and every element drawn from H, C, N, O, F, P, S, Cl, Br, I.
pub fn passes_drug_filter(g: &MolecularGraph) -> bool {
    g.heavy_atom_count() <= MAX_HEAVY_ATOMS && g.atoms().iter().all(|a| a.element.is_drug_like())
}
