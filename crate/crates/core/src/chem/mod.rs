//! Molecular graphs, SMILES reading and writing, canonicalisation and the
//! drug-likeness filters applied to corpora.

mod canon;
mod element;
mod filter;
mod graph;
mod parser;
mod writer;

pub use canon::{canonical_ranking, canonical_smiles, symmetry_classes};
pub use element::Element;
pub use filter::{largest_fragment, passes_drug_filter, MAX_HEAVY_ATOMS};
pub use graph::{
    permutation_is_odd, Atom, Bond, BondOrder, Chirality, DoubleBondStereo, GraphError, Ligand,
    MolecularGraph,
};
pub use parser::{parse_smiles, SmilesError, SmilesErrorKind};
pub use writer::{random_smiles, write_smiles_with_ranks};

/// Canonical SMILES for `g`; see [`canonical_smiles`].
pub fn write_canonical_smiles(g: &MolecularGraph) -> String {
    canonical_smiles(g)
}

/// Parses, keeps the largest fragment, and returns its canonical SMILES.
pub fn standardize(smiles: &str) -> Result<String, SmilesError> {
    let g = parse_smiles(smiles)?;
    Ok(canonical_smiles(&largest_fragment(&g)))
}
