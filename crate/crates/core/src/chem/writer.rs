//! SMILES output for a given atom priority order. Canonical output uses
//! canonical ranks as the priority; randomised output uses a shuffled one.

use std::fmt::Write as _;

use rand::seq::SliceRandom;
use rand::Rng;

use super::element::Element;
use super::graph::{permutation_is_odd, BondOrder, Chirality, Ligand, MolecularGraph};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum RingEnd {
    Open,
    Close,
}

#[derive(Debug, Clone, Copy)]
struct RingBond {
    bond: usize,
    partner: usize,
    end: RingEnd,
}

struct Layout {
    /// Tree children of each atom in output order.
    children: Vec<Vec<usize>>,
    parent: Vec<Option<usize>>,
    /// Ring bonds touching each atom, in the order their digits are written.
    rings: Vec<Vec<RingBond>>,
    /// Atom written first for each bond.
    first: Vec<usize>,
    roots: Vec<usize>,
}

fn layout(g: &MolecularGraph, rank: &[usize]) -> Layout {
    let n = g.atom_count();
    let mut visited = vec![false; n];
    let mut bond_seen = vec![false; g.bonds().len()];
    let mut children = vec![Vec::new(); n];
    let mut parent = vec![None; n];
    let mut rings: Vec<Vec<RingBond>> = vec![Vec::new(); n];
    let mut first = vec![usize::MAX; g.bonds().len()];
    // Ring closures found when reaching the closing atom; the opening atom
    // gets its entry in the same discovery order.
    let mut closures: Vec<(usize, usize, usize)> = Vec::new();

    let mut starts: Vec<usize> = (0..n).collect();
    starts.sort_by_key(|&i| rank[i]);
    let mut roots = Vec::new();

    for &s in &starts {
        if visited[s] {
            continue;
        }
        roots.push(s);
        // Iterative DFS: (atom, sorted neighbour list, cursor)
        let mut stack: Vec<(usize, Vec<(usize, usize)>, usize)> = Vec::new();
        visited[s] = true;
        stack.push((s, sorted_neighbors(g, s, rank), 0));
        while let Some(top) = stack.last_mut() {
            let (v, ref nbrs, ref mut cursor) = *top;
            if *cursor >= nbrs.len() {
                stack.pop();
                continue;
            }
            let (u, bi) = nbrs[*cursor];
            *cursor += 1;
            if bond_seen[bi] {
                continue;
            }
            bond_seen[bi] = true;
            if visited[u] {
                // u is an ancestor: ring opens at u, closes at v.
                closures.push((u, v, bi));
                first[bi] = u;
            } else {
                visited[u] = true;
                parent[u] = Some(v);
                children[v].push(u);
                first[bi] = v;
                stack.push((u, sorted_neighbors(g, u, rank), 0));
            }
        }
    }

    // Opening digits at an atom are written in the order of the partner's
    // rank; closings follow discovery order.
    let mut opens: Vec<Vec<RingBond>> = vec![Vec::new(); n];
    for &(u, v, bi) in &closures {
        opens[u].push(RingBond {
            bond: bi,
            partner: v,
            end: RingEnd::Open,
        });
    }
    for list in opens.iter_mut() {
        list.sort_by_key(|r| rank[r.partner]);
    }
    let mut closes: Vec<Vec<RingBond>> = vec![Vec::new(); n];
    for &(u, v, bi) in &closures {
        closes[v].push(RingBond {
            bond: bi,
            partner: u,
            end: RingEnd::Close,
        });
    }
    for i in 0..n {
        let mut list = std::mem::take(&mut closes[i]);
        list.extend(opens[i].iter().copied());
        rings[i] = list;
    }
    Layout {
        children,
        parent,
        rings,
        first,
        roots,
    }
}

enum Step {
    Enter(usize, Option<usize>),
    Open,
    Close,
}

fn sorted_neighbors(g: &MolecularGraph, v: usize, rank: &[usize]) -> Vec<(usize, usize)> {
    let mut nbrs = g.neighbors(v).to_vec();
    nbrs.sort_by_key(|&(u, _)| rank[u]);
    nbrs
}

/// Direction marks (`true` = `/`) for single bonds adjacent to stereo double bonds.
fn assign_directions(g: &MolecularGraph, rank: &[usize], first: &[usize]) -> Vec<Option<bool>> {
    let mut marks: Vec<Option<bool>> = vec![None; g.bonds().len()];
    let mut order: Vec<usize> = (0..g.bonds().len())
        .filter(|&bi| g.bond(bi).stereo.is_some())
        .collect();
    order.sort_by_key(|&bi| {
        let b = g.bond(bi);
        (rank[b.a].min(rank[b.b]), rank[b.a].max(rank[b.b]))
    });

    // A '/' read from the first-written atom to the second puts the second
    // one up; the map is its own inverse, so it also turns sides into marks.
    let side_from_mark = |x: usize, bi: usize, slash: bool| -> bool {
        if first[bi] == x {
            !slash
        } else {
            slash
        }
    };

    for bi in order {
        let bond = g.bond(bi);
        let st = bond.stereo.unwrap();
        // (centre, substituent, bond, side relative to the centre's reference)
        let mut subs: Vec<(usize, usize, usize, bool)> = Vec::new();
        for (centre, partner, reference) in [(bond.a, bond.b, st.ref_a), (bond.b, bond.a, st.ref_b)]
        {
            let mut local: Vec<(usize, usize)> = g
                .neighbors(centre)
                .iter()
                .copied()
                .filter(|&(x, nb)| {
                    x != partner
                        && matches!(g.bond(nb).order, BondOrder::Single)
                })
                .collect();
            local.sort_by_key(|&(x, _)| rank[x]);
            for (x, nb) in local {
                subs.push((centre, x, nb, x == reference));
            }
        }
        if subs.is_empty() {
            continue;
        }
        // Rank order, so the choice below does not depend on which end is `a`.
        subs.sort_by_key(|s| (rank[s.0], rank[s.1]));
        // side(x) = ref_up XOR !same_as_ref, adjusted on the b end for trans.
        let wanted = |ref_a_up: bool, (centre, _x, _nb, is_ref): (usize, usize, usize, bool)| {
            let ref_up = if centre == bond.a || st.cis {
                ref_a_up
            } else {
                !ref_a_up
            };
            if is_ref {
                ref_up
            } else {
                !ref_up
            }
        };
        let anchor = subs
            .iter()
            .find(|s| marks[s.2].is_some())
            .copied();
        // wanted(up, s) == wanted(true, s) exactly when up is true.
        let ref_a_up = match anchor {
            Some(s) => wanted(true, s) == side_from_mark(s.1, s.2, marks[s.2].unwrap()),
            None => {
                let s = subs[0];
                // Orient so that the first mark written is '/'.
                wanted(true, s) == side_from_mark(s.1, s.2, true)
            }
        };
        for s in subs {
            if marks[s.2].is_none() {
                marks[s.2] = Some(side_from_mark(s.1, s.2, wanted(ref_a_up, s)));
            }
        }
    }
    marks
}

fn needs_bracket(g: &MolecularGraph, i: usize) -> bool {
    let a = g.atom(i);
    if a.chirality != Chirality::None || a.formal_charge != 0 {
        return true;
    }
    if a.aromatic && !matches!(a.element, Element::B | Element::C | Element::N | Element::O | Element::P | Element::S) {
        return true;
    }
    match g.implicit_h_for_organic(i) {
        Some(h) => h != a.explicit_h_count,
        None => true,
    }
}

fn write_atom(out: &mut String, g: &MolecularGraph, i: usize, written: &[Ligand]) {
    let a = g.atom(i);
    let symbol = if a.aromatic {
        a.element.symbol().to_ascii_lowercase()
    } else {
        a.element.symbol().to_string()
    };
    if !needs_bracket(g, i) {
        out.push_str(&symbol);
        return;
    }
    out.push('[');
    out.push_str(&symbol);
    if a.chirality != Chirality::None {
        let reference = g.reference_ligands(i);
        let chir = a.chirality.flip_if(permutation_is_odd(written, &reference));
        out.push_str(match chir {
            Chirality::CounterClockwise => "@",
            _ => "@@",
        });
    }
    match a.explicit_h_count {
        0 => {}
        1 => out.push('H'),
        h => {
            let _ = write!(out, "H{h}");
        }
    }
    match a.formal_charge {
        0 => {}
        1 => out.push('+'),
        -1 => out.push('-'),
        c if c > 0 => {
            let _ = write!(out, "+{c}");
        }
        c => {
            let _ = write!(out, "-{}", -c);
        }
    }
    out.push(']');
}

fn bond_symbol(g: &MolecularGraph, bi: usize, mark: Option<bool>) -> &'static str {
    let b = g.bond(bi);
    let both_aromatic = g.atom(b.a).aromatic && g.atom(b.b).aromatic;
    match (b.order, mark) {
        (BondOrder::Single, Some(true)) => "/",
        (BondOrder::Single, Some(false)) => "\\",
        (BondOrder::Single, None) if both_aromatic => "-",
        (BondOrder::Single, None) => "",
        (BondOrder::Double, _) => "=",
        (BondOrder::Triple, _) => "#",
        (BondOrder::Aromatic, _) if both_aromatic => "",
        (BondOrder::Aromatic, _) => ":",
    }
}

/// Writes `g` as SMILES, starting each fragment at its lowest-`rank` atom and
/// visiting neighbours in ascending `rank`. `rank` must be a permutation.
pub fn write_smiles_with_ranks(g: &MolecularGraph, rank: &[usize]) -> String {
    assert_eq!(rank.len(), g.atom_count());
    let lay = layout(g, rank);
    let marks = assign_directions(g, rank, &lay.first);
    let mut out = String::new();
    let mut digit_of_bond = vec![0u32; g.bonds().len()];
    let mut free_digits: Vec<u32> = (1..100).rev().collect();

    for (fi, &root) in lay.roots.iter().enumerate() {
        if fi > 0 {
            out.push('.');
        }
        let mut stack = vec![Step::Enter(root, None)];
        while let Some(step) = stack.pop() {
            let (v, via) = match step {
                Step::Open => {
                    out.push('(');
                    continue;
                }
                Step::Close => {
                    out.push(')');
                    continue;
                }
                Step::Enter(v, via) => (v, via),
            };
            if let Some(bi) = via {
                out.push_str(bond_symbol(g, bi, marks[bi]));
            }
            let mut written: Vec<Ligand> = Vec::with_capacity(4);
            if let Some(p) = lay.parent[v] {
                written.push(Ligand::Atom(p));
            }
            if g.atom(v).explicit_h_count > 0 && needs_bracket(g, v) {
                written.push(Ligand::Hydrogen);
            }
            for r in &lay.rings[v] {
                written.push(Ligand::Atom(r.partner));
            }
            for &c in &lay.children[v] {
                written.push(Ligand::Atom(c));
            }
            write_atom(&mut out, g, v, &written);
            for r in &lay.rings[v] {
                let d = match r.end {
                    RingEnd::Open => {
                        let d = free_digits.pop().expect("fewer than 100 open rings");
                        digit_of_bond[r.bond] = d;
                        out.push_str(bond_symbol(g, r.bond, marks[r.bond]));
                        d
                    }
                    RingEnd::Close => {
                        let d = digit_of_bond[r.bond];
                        free_digits.push(d);
                        free_digits.sort_unstable_by(|a, b| b.cmp(a));
                        d
                    }
                };
                if d < 10 {
                    let _ = write!(out, "{d}");
                } else {
                    let _ = write!(out, "%{d}");
                }
            }
            let kids = &lay.children[v];
            let bond_to = |c: usize| g.bond_between(v, c);
            // Push in reverse: last child is the chain continuation.
            if let Some((&last, rest)) = kids.split_last() {
                stack.push(Step::Enter(last, bond_to(last)));
                for &c in rest.iter().rev() {
                    stack.push(Step::Close);
                    stack.push(Step::Enter(c, bond_to(c)));
                    stack.push(Step::Open);
                }
            }
        }
    }
    out
}

/// A randomised but valid SMILES spelling of `g`.
pub fn random_smiles<R: Rng + ?Sized>(g: &MolecularGraph, rng: &mut R) -> String {
    let mut rank: Vec<usize> = (0..g.atom_count()).collect();
    rank.shuffle(rng);
    write_smiles_with_ranks(g, &rank)
}
