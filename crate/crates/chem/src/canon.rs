//! Canonical atom ranking and canonical SMILES output.
//!
//! Ranks start from the atom invariant (element, charge, degree, hydrogen
//! count, aromaticity, isotope) and are refined by sorted neighbor ranks until
//! stable. Remaining ties are broken by promoting one atom of the lowest tied
//! class and refining again. The writer then emits each component by
//! depth-first traversal from its lowest-ranked atom, visiting neighbors in
//! rank order.

use std::collections::{BTreeSet, HashMap};

use crate::elements;
use crate::graph::{BondOrder, MolGraph};
use crate::smiles::{implicit_hydrogens, parse_smiles, SmilesError};

/// Canonical rank of every atom; a permutation of `0..n`.
pub fn canonical_ranks(m: &MolGraph) -> Vec<usize> {
    let n = m.atom_count();
    let invariants: Vec<_> = (0..n)
        .map(|i| {
            let a = &m.atoms()[i];
            (
                a.atomic_number,
                a.charge,
                m.degree(i),
                a.hydrogens,
                a.aromatic,
                a.isotope.unwrap_or(0),
            )
        })
        .collect();
    let mut ranks = dense_ranks(&invariants);
    refine(m, &mut ranks);
    loop {
        let classes = class_count(&ranks);
        if classes == n {
            return ranks;
        }
        // lowest rank value shared by more than one atom
        let mut counts = vec![0usize; n];
        for &r in &ranks {
            counts[r] += 1;
        }
        let tied = (0..n).find(|&r| counts[r] > 1).expect("ties remain");
        let chosen = (0..n).find(|&i| ranks[i] == tied).unwrap();
        let keys: Vec<(usize, bool)> = (0..n)
            .map(|i| (ranks[i], ranks[i] == tied && i != chosen))
            .collect();
        ranks = dense_ranks(&keys);
        refine(m, &mut ranks);
    }
}

fn refine(m: &MolGraph, ranks: &mut Vec<usize>) {
    let n = ranks.len();
    let mut classes = class_count(ranks);
    loop {
        let keys: Vec<(usize, Vec<(usize, u8)>)> = (0..n)
            .map(|i| {
                let mut nbrs: Vec<(usize, u8)> = m
                    .neighbors(i)
                    .iter()
                    .map(|&(j, b)| (ranks[j], m.bonds()[b].order.code()))
                    .collect();
                nbrs.sort_unstable();
                (ranks[i], nbrs)
            })
            .collect();
        let next = dense_ranks(&keys);
        let next_classes = class_count(&next);
        *ranks = next;
        if next_classes == classes {
            return;
        }
        classes = next_classes;
    }
}

fn dense_ranks<K: Ord>(keys: &[K]) -> Vec<usize> {
    let mut order: Vec<usize> = (0..keys.len()).collect();
    order.sort_by(|&a, &b| keys[a].cmp(&keys[b]));
    let mut ranks = vec![0; keys.len()];
    let mut rank = 0;
    for w in 0..order.len() {
        if w > 0 && keys[order[w]] != keys[order[w - 1]] {
            rank += 1;
        }
        ranks[order[w]] = rank;
    }
    ranks
}

fn class_count(ranks: &[usize]) -> usize {
    ranks.iter().collect::<BTreeSet<_>>().len()
}

/// Canonical SMILES of a graph. Independent of input atom order; parsing the
/// output yields an isomorphic graph.
pub fn canonical_smiles(m: &MolGraph) -> String {
    if m.is_empty() {
        return String::new();
    }
    let ranks = canonical_ranks(m);
    Writer::new(m, &ranks).write()
}

/// Parses and canonicalizes in one step.
pub fn canonicalize(smiles: &str) -> Result<String, SmilesError> {
    parse_smiles(smiles).map(|m| canonical_smiles(&m))
}

struct Writer<'a> {
    m: &'a MolGraph,
    ranks: &'a [usize],
    visited: Vec<bool>,
    bond_seen: Vec<bool>,
    children: Vec<Vec<(usize, usize)>>,
    // ring bonds per atom: (bond, partner), in discovery order
    ring_opens: Vec<Vec<(usize, usize)>>,
    ring_closes: Vec<Vec<(usize, usize)>>,
    preorder: Vec<usize>,
}

impl<'a> Writer<'a> {
    fn new(m: &'a MolGraph, ranks: &'a [usize]) -> Self {
        let n = m.atom_count();
        Writer {
            m,
            ranks,
            visited: vec![false; n],
            bond_seen: vec![false; m.bonds().len()],
            children: vec![Vec::new(); n],
            ring_opens: vec![Vec::new(); n],
            ring_closes: vec![Vec::new(); n],
            preorder: vec![0; n],
        }
    }

    fn sorted_neighbors(&self, atom: usize) -> Vec<(usize, usize)> {
        let mut nbrs = self.m.neighbors(atom).to_vec();
        nbrs.sort_by_key(|&(j, _)| self.ranks[j]);
        nbrs
    }

    fn write(mut self) -> String {
        let n = self.m.atom_count();
        let mut starts: Vec<usize> = (0..n).collect();
        starts.sort_by_key(|&i| self.ranks[i]);
        let mut counter = 0;
        let mut roots = Vec::new();
        for &s in &starts {
            if !self.visited[s] {
                roots.push(s);
                self.classify(s, None, &mut counter);
            }
        }
        for atom in 0..n {
            let pre = &self.preorder;
            self.ring_opens[atom].sort_by_key(|&(_, p)| pre[p]);
            self.ring_closes[atom].sort_by_key(|&(_, p)| pre[p]);
        }
        let mut out = String::new();
        let mut digits: HashMap<usize, u32> = HashMap::new();
        let mut in_use: BTreeSet<u32> = BTreeSet::new();
        for (i, &root) in roots.iter().enumerate() {
            if i > 0 {
                out.push('.');
            }
            self.emit(root, &mut out, &mut digits, &mut in_use);
        }
        out
    }

    fn classify(&mut self, u: usize, parent_bond: Option<usize>, counter: &mut usize) {
        self.visited[u] = true;
        self.preorder[u] = *counter;
        *counter += 1;
        for (v, bond) in self.sorted_neighbors(u) {
            if Some(bond) == parent_bond || self.bond_seen[bond] {
                continue;
            }
            self.bond_seen[bond] = true;
            if self.visited[v] {
                // back edge to an ancestor: opened at v, closed at u
                self.ring_opens[v].push((bond, u));
                self.ring_closes[u].push((bond, v));
            } else {
                self.children[u].push((v, bond));
                self.classify(v, Some(bond), counter);
            }
        }
    }

    fn emit(
        &self,
        u: usize,
        out: &mut String,
        digits: &mut HashMap<usize, u32>,
        in_use: &mut BTreeSet<u32>,
    ) {
        out.push_str(&atom_text(self.m, u));
        let mut freed = Vec::new();
        for &(bond, _) in &self.ring_closes[u] {
            let d = digits.remove(&bond).expect("ring opened before close");
            push_ring_digit(out, d);
            in_use.remove(&d);
            freed.push(d);
        }
        for &(bond, partner) in &self.ring_opens[u] {
            let d = (1..)
                .find(|d| !in_use.contains(d) && !freed.contains(d))
                .unwrap();
            in_use.insert(d);
            digits.insert(bond, d);
            out.push_str(bond_text(self.m, u, partner, self.m.bonds()[bond].order));
            push_ring_digit(out, d);
        }
        let children = &self.children[u];
        for (k, &(v, bond)) in children.iter().enumerate() {
            let last = k + 1 == children.len();
            if !last {
                out.push('(');
            }
            out.push_str(bond_text(self.m, u, v, self.m.bonds()[bond].order));
            self.emit(v, out, digits, in_use);
            if !last {
                out.push(')');
            }
        }
    }
}

fn push_ring_digit(out: &mut String, d: u32) {
    if d < 10 {
        out.push(char::from_digit(d, 10).unwrap());
    } else {
        out.push_str(&format!("%{d:02}"));
    }
}

fn bond_text(m: &MolGraph, a: usize, b: usize, order: BondOrder) -> &'static str {
    let both_aromatic = m.atoms()[a].aromatic && m.atoms()[b].aromatic;
    match order {
        BondOrder::Single if both_aromatic => "-",
        BondOrder::Single => "",
        BondOrder::Double => "=",
        BondOrder::Triple => "#",
        BondOrder::Aromatic if both_aromatic => "",
        BondOrder::Aromatic => ":",
    }
}

fn atom_text(m: &MolGraph, i: usize) -> String {
    let a = &m.atoms()[i];
    let symbol = if a.aromatic {
        a.element().to_ascii_lowercase()
    } else {
        a.element().to_string()
    };
    let organic = elements::is_organic_subset(a.atomic_number)
        && a.charge == 0
        && a.isotope.is_none()
        && (!a.aromatic || matches!(a.atomic_number, 5 | 6 | 7 | 8 | 15 | 16))
        && implicit_hydrogens(a, m.bond_valence(i)) == Some(a.hydrogens);
    if organic {
        return symbol;
    }
    let mut s = String::from("[");
    if let Some(iso) = a.isotope {
        s.push_str(&iso.to_string());
    }
    s.push_str(&symbol);
    match a.hydrogens {
        0 => {}
        1 => s.push('H'),
        h => s.push_str(&format!("H{h}")),
    }
    match a.charge {
        0 => {}
        1 => s.push('+'),
        -1 => s.push('-'),
        c if c > 0 => s.push_str(&format!("+{c}")),
        c => s.push_str(&format!("-{}", -c)),
    }
    s.push(']');
    s
}
