//! Molecular graph: heavy atoms with hydrogen counts, typed bonds, and
//! derived ring membership.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::elements;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BondOrder {
    Single,
    Double,
    Triple,
    Aromatic,
}

impl BondOrder {
    /// Contribution to the valence of each endpoint; aromatic bonds count as one.
    pub fn valence(self) -> u8 {
        match self {
            BondOrder::Single | BondOrder::Aromatic => 1,
            BondOrder::Double => 2,
            BondOrder::Triple => 3,
        }
    }

    /// Stable numeric code used by hashing and ranking.
    pub fn code(self) -> u8 {
        match self {
            BondOrder::Single => 1,
            BondOrder::Double => 2,
            BondOrder::Triple => 3,
            BondOrder::Aromatic => 4,
        }
    }

    pub fn symbol(self) -> char {
        match self {
            BondOrder::Single => '-',
            BondOrder::Double => '=',
            BondOrder::Triple => '#',
            BondOrder::Aromatic => ':',
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Atom {
    pub atomic_number: u8,
    pub charge: i8,
    /// Total attached hydrogens (implicit or bracket-explicit).
    pub hydrogens: u8,
    pub aromatic: bool,
    pub isotope: Option<u16>,
}

impl Atom {
    pub fn new(atomic_number: u8) -> Self {
        Atom {
            atomic_number,
            charge: 0,
            hydrogens: 0,
            aromatic: false,
            isotope: None,
        }
    }

    pub fn element(&self) -> &'static str {
        elements::symbol(self.atomic_number)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Bond {
    pub a: usize,
    pub b: usize,
    pub order: BondOrder,
}

impl Bond {
    pub fn other(&self, atom: usize) -> usize {
        if self.a == atom {
            self.b
        } else {
            self.a
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum GraphError {
    #[error("bond {bond} references atom {atom}, but the graph has {len} atoms")]
    BondOutOfRange { bond: usize, atom: usize, len: usize },
    #[error("bond {0} joins an atom to itself")]
    SelfBond(usize),
    #[error("duplicate bond between atoms {0} and {1}")]
    DuplicateBond(usize, usize),
    #[error("aromatic bond {0} joins a non-aromatic atom")]
    AromaticBondMismatch(usize),
}

/// An immutable molecular graph. Construction validates the structural
/// invariants and computes ring membership.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct MolGraph {
    atoms: Vec<Atom>,
    bonds: Vec<Bond>,
    adjacency: Vec<Vec<(usize, usize)>>,
    ring_bond: Vec<bool>,
    ring_atom: Vec<bool>,
    stereo_discarded: usize,
}

impl MolGraph {
    pub fn new(atoms: Vec<Atom>, bonds: Vec<Bond>) -> Result<Self, GraphError> {
        let n = atoms.len();
        let mut adjacency = vec![Vec::new(); n];
        for (i, bond) in bonds.iter().enumerate() {
            for atom in [bond.a, bond.b] {
                if atom >= n {
                    return Err(GraphError::BondOutOfRange { bond: i, atom, len: n });
                }
            }
            if bond.a == bond.b {
                return Err(GraphError::SelfBond(i));
            }
            if adjacency[bond.a].iter().any(|&(nbr, _)| nbr == bond.b) {
                return Err(GraphError::DuplicateBond(bond.a, bond.b));
            }
            if bond.order == BondOrder::Aromatic && !(atoms[bond.a].aromatic && atoms[bond.b].aromatic)
            {
                return Err(GraphError::AromaticBondMismatch(i));
            }
            adjacency[bond.a].push((bond.b, i));
            adjacency[bond.b].push((bond.a, i));
        }
        let ring_bond = ring_bonds(n, &bonds, &adjacency);
        let mut ring_atom = vec![false; n];
        for (bond, _) in bonds.iter().zip(&ring_bond).filter(|(_, r)| **r) {
            ring_atom[bond.a] = true;
            ring_atom[bond.b] = true;
        }
        Ok(MolGraph {
            atoms,
            bonds,
            adjacency,
            ring_bond,
            ring_atom,
            stereo_discarded: 0,
        })
    }

    pub(crate) fn with_stereo_discarded(mut self, count: usize) -> Self {
        self.stereo_discarded = count;
        self
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

    pub fn is_empty(&self) -> bool {
        self.atoms.is_empty()
    }

    /// `(neighbor, bond index)` pairs of an atom.
    pub fn neighbors(&self, atom: usize) -> &[(usize, usize)] {
        &self.adjacency[atom]
    }

    pub fn degree(&self, atom: usize) -> usize {
        self.adjacency[atom].len()
    }

    pub fn bond_between(&self, a: usize, b: usize) -> Option<&Bond> {
        self.adjacency[a]
            .iter()
            .find(|&&(nbr, _)| nbr == b)
            .map(|&(_, i)| &self.bonds[i])
    }

    pub fn is_ring_atom(&self, atom: usize) -> bool {
        self.ring_atom[atom]
    }

    pub fn is_ring_bond(&self, bond: usize) -> bool {
        self.ring_bond[bond]
    }

    /// Number of stereo markers (`/`, `\`, `@`) dropped while parsing.
    pub fn stereo_discarded(&self) -> usize {
        self.stereo_discarded
    }

    /// Sum of bond valence contributions at an atom.
    pub fn bond_valence(&self, atom: usize) -> u8 {
        self.adjacency[atom]
            .iter()
            .map(|&(_, b)| self.bonds[b].order.valence())
            .sum()
    }

    /// Relabels atoms: atom `i` moves to position `perm[i]`. Bond list order
    /// follows the new labels so the result carries no trace of the old order.
    pub fn permuted(&self, perm: &[usize]) -> MolGraph {
        assert_eq!(perm.len(), self.atoms.len(), "permutation length mismatch");
        let mut atoms = vec![None; self.atoms.len()];
        for (old, &new) in perm.iter().enumerate() {
            atoms[new] = Some(self.atoms[old].clone());
        }
        let atoms: Vec<Atom> = atoms
            .into_iter()
            .map(|a| a.expect("perm must be a permutation"))
            .collect();
        let mut bonds: Vec<Bond> = self
            .bonds
            .iter()
            .map(|b| {
                let (x, y) = (perm[b.a], perm[b.b]);
                Bond {
                    a: x.min(y),
                    b: x.max(y),
                    order: b.order,
                }
            })
            .collect();
        bonds.sort_by_key(|b| (b.a, b.b));
        MolGraph::new(atoms, bonds)
            .expect("relabeling preserves graph invariants")
            .with_stereo_discarded(self.stereo_discarded)
    }
}

/// Marks every bond that is not a bridge (i.e. lies on a cycle).
fn ring_bonds(n: usize, bonds: &[Bond], adjacency: &[Vec<(usize, usize)>]) -> Vec<bool> {
    let mut in_ring = vec![true; bonds.len()];
    let mut disc = vec![usize::MAX; n];
    let mut low = vec![0usize; n];
    let mut time = 0;
    for root in 0..n {
        if disc[root] != usize::MAX {
            continue;
        }
        // (atom, parent bond, next neighbor cursor)
        let mut stack: Vec<(usize, Option<usize>, usize)> = vec![(root, None, 0)];
        disc[root] = time;
        low[root] = time;
        time += 1;
        while let Some(&mut (u, parent, ref mut cursor)) = stack.last_mut() {
            if *cursor < adjacency[u].len() {
                let (v, bond) = adjacency[u][*cursor];
                *cursor += 1;
                if Some(bond) == parent {
                    continue;
                }
                if disc[v] == usize::MAX {
                    disc[v] = time;
                    low[v] = time;
                    time += 1;
                    stack.push((v, Some(bond), 0));
                } else {
                    low[u] = low[u].min(disc[v]);
                }
            } else {
                stack.pop();
                if let (Some(bond), Some(&(p, _, _))) = (parent, stack.last()) {
                    low[p] = low[p].min(low[u]);
                    if low[u] > disc[p] {
                        in_ring[bond] = false;
                    }
                }
            }
        }
    }
    in_ring
}
