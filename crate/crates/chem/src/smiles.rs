//! SMILES reader.
//!
//! Covers the organic subset, bracket atoms (isotope, chirality, hydrogen
//! count, charge, atom class), bonds `- = # : / \`, branches, ring closures
//! (`0-9` and `%nn`), lowercase aromatic atoms and dot-separated components.
//! Stereo markers are accepted and dropped; the count is kept on the graph.

use std::collections::BTreeMap;

use thiserror::Error;

use crate::elements;
use crate::graph::{Atom, Bond, BondOrder, GraphError, MolGraph};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Error)]
pub enum SmilesErrorKind {
    #[error("empty SMILES")]
    Empty,
    #[error("unexpected character {0:?}")]
    UnexpectedCharacter(char),
    #[error("unknown element")]
    UnknownElement,
    #[error("malformed bracket atom")]
    InvalidBracketAtom,
    #[error("unclosed branch")]
    UnclosedBranch,
    #[error("branch close without matching open")]
    UnmatchedBranchClose,
    #[error("branch or bond without a preceding atom")]
    MissingAtom,
    #[error("bond symbol not followed by an atom")]
    DanglingBond,
    #[error("unsupported bond order")]
    UnsupportedBond,
    #[error("unmatched ring bond")]
    UnmatchedRingBond,
    #[error("ring closure bond orders disagree")]
    ConflictingRingBond,
    #[error("ring closure joins an atom to itself")]
    SelfBond,
    #[error("duplicate bond between the same atom pair")]
    DuplicateBond,
    #[error("aromatic bond between non-aromatic atoms")]
    AromaticBondMismatch,
    #[error("aromatic atom outside any ring")]
    AromaticOutsideRing,
    #[error("valence violation")]
    ValenceViolation,
}

/// Parse failure with the byte offset of the offending character.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Error)]
#[error("{kind} at offset {offset}")]
pub struct SmilesError {
    pub kind: SmilesErrorKind,
    pub offset: usize,
}

impl SmilesError {
    fn new(kind: SmilesErrorKind, offset: usize) -> Self {
        SmilesError { kind, offset }
    }
}

#[derive(Clone, Copy, PartialEq, Eq, Debug)]
enum BondSpec {
    Order(BondOrder),
    // `/` or `\`: a single bond carrying stereo information we drop.
    Directional,
}

impl BondSpec {
    fn order(self) -> BondOrder {
        match self {
            BondSpec::Order(o) => o,
            BondSpec::Directional => BondOrder::Single,
        }
    }
}

struct ParsedAtom {
    atom: Atom,
    bracket: bool,
    offset: usize,
}

struct RawBond {
    a: usize,
    b: usize,
    spec: Option<BondSpec>,
    offset: usize,
}

struct Parser<'a> {
    bytes: &'a [u8],
    pos: usize,
    atoms: Vec<ParsedAtom>,
    bonds: Vec<RawBond>,
    prev: Option<usize>,
    pending: Option<(BondSpec, usize)>,
    branches: Vec<(Option<usize>, usize)>,
    rings: BTreeMap<u32, (usize, Option<BondSpec>, usize)>,
    stereo: usize,
}

/// Parses a SMILES string into a validated [`MolGraph`].
pub fn parse_smiles(s: &str) -> Result<MolGraph, SmilesError> {
    if s.is_empty() {
        return Err(SmilesError::new(SmilesErrorKind::Empty, 0));
    }
    let mut parser = Parser {
        bytes: s.as_bytes(),
        pos: 0,
        atoms: Vec::new(),
        bonds: Vec::new(),
        prev: None,
        pending: None,
        branches: Vec::new(),
        rings: BTreeMap::new(),
        stereo: 0,
    };
    parser.run()?;
    parser.finish()
}

/// True iff `s` parses. Never panics.
pub fn is_valid_smiles(s: &str) -> bool {
    parse_smiles(s).is_ok()
}

impl<'a> Parser<'a> {
    fn peek(&self) -> Option<u8> {
        self.bytes.get(self.pos).copied()
    }

    fn err(&self, kind: SmilesErrorKind) -> SmilesError {
        SmilesError::new(kind, self.pos)
    }

    fn unexpected(&self) -> SmilesError {
        // offsets are byte-based; report the full char when non-ASCII
        let c = std::str::from_utf8(&self.bytes[self.pos..])
            .ok()
            .and_then(|rest| rest.chars().next())
            .unwrap_or(self.bytes[self.pos] as char);
        self.err(SmilesErrorKind::UnexpectedCharacter(c))
    }

    fn run(&mut self) -> Result<(), SmilesError> {
        while let Some(c) = self.peek() {
            match c {
                b'[' => self.bracket_atom()?,
                b'(' => {
                    if self.prev.is_none() || self.pending.is_some() {
                        return Err(self.err(SmilesErrorKind::MissingAtom));
                    }
                    self.branches.push((self.prev, self.pos));
                    self.pos += 1;
                }
                b')' => {
                    if self.pending.is_some() {
                        return Err(self.err(SmilesErrorKind::DanglingBond));
                    }
                    let (atom, _) = self
                        .branches
                        .pop()
                        .ok_or_else(|| self.err(SmilesErrorKind::UnmatchedBranchClose))?;
                    self.prev = atom;
                    self.pos += 1;
                }
                b'-' | b'=' | b'#' | b':' | b'/' | b'\\' | b'$' => {
                    if c == b'$' {
                        return Err(self.err(SmilesErrorKind::UnsupportedBond));
                    }
                    if self.prev.is_none() {
                        return Err(self.err(SmilesErrorKind::MissingAtom));
                    }
                    if self.pending.is_some() {
                        return Err(self.unexpected());
                    }
                    let spec = match c {
                        b'-' => BondSpec::Order(BondOrder::Single),
                        b'=' => BondSpec::Order(BondOrder::Double),
                        b'#' => BondSpec::Order(BondOrder::Triple),
                        b':' => BondSpec::Order(BondOrder::Aromatic),
                        _ => {
                            self.stereo += 1;
                            BondSpec::Directional
                        }
                    };
                    self.pending = Some((spec, self.pos));
                    self.pos += 1;
                }
                b'.' => {
                    if self.pending.is_some() {
                        return Err(self.err(SmilesErrorKind::DanglingBond));
                    }
                    if self.prev.is_none() {
                        return Err(self.err(SmilesErrorKind::MissingAtom));
                    }
                    self.prev = None;
                    self.pos += 1;
                }
                b'0'..=b'9' => {
                    let start = self.pos;
                    self.pos += 1;
                    self.ring_closure((c - b'0') as u32, start)?;
                }
                b'%' => {
                    let start = self.pos;
                    let digits = self.bytes.get(start + 1..start + 3);
                    match digits {
                        Some(d) if d.iter().all(u8::is_ascii_digit) => {
                            let n = ((d[0] - b'0') * 10 + (d[1] - b'0')) as u32;
                            self.pos += 3;
                            self.ring_closure(n, start)?;
                        }
                        _ => return Err(self.err(SmilesErrorKind::UnmatchedRingBond)),
                    }
                }
                b'A'..=b'Z' | b'a'..=b'z' => self.organic_atom()?,
                _ => return Err(self.unexpected()),
            }
        }
        Ok(())
    }

    fn organic_atom(&mut self) -> Result<(), SmilesError> {
        let start = self.pos;
        let c = self.bytes[self.pos];
        let next = self.bytes.get(self.pos + 1).copied();
        let (z, aromatic, len) = match (c, next) {
            (b'C', Some(b'l')) => (17, false, 2),
            (b'B', Some(b'r')) => (35, false, 2),
            (b'B', _) => (5, false, 1),
            (b'C', _) => (6, false, 1),
            (b'N', _) => (7, false, 1),
            (b'O', _) => (8, false, 1),
            (b'P', _) => (15, false, 1),
            (b'S', _) => (16, false, 1),
            (b'F', _) => (9, false, 1),
            (b'I', _) => (53, false, 1),
            (b'b', _) => (5, true, 1),
            (b'c', _) => (6, true, 1),
            (b'n', _) => (7, true, 1),
            (b'o', _) => (8, true, 1),
            (b'p', _) => (15, true, 1),
            (b's', _) => (16, true, 1),
            _ => return Err(self.err(SmilesErrorKind::UnknownElement)),
        };
        self.pos += len;
        let mut atom = Atom::new(z);
        atom.aromatic = aromatic;
        self.add_atom(atom, false, start);
        Ok(())
    }

    fn bracket_atom(&mut self) -> Result<(), SmilesError> {
        let start = self.pos;
        self.pos += 1;
        let invalid = |p: &Self| SmilesError::new(SmilesErrorKind::InvalidBracketAtom, p.pos);

        let isotope = self.number();
        let isotope = match isotope {
            Some(v) if v > u16::MAX as u32 => return Err(invalid(self)),
            Some(v) => Some(v as u16),
            None => None,
        };

        let (z, aromatic) = self.bracket_symbol()?;

        // chirality: @, @@, @TH1, @AL2, @SP3, @TB10, @OH20
        if self.peek() == Some(b'@') {
            self.stereo += 1;
            self.pos += 1;
            if self.peek() == Some(b'@') {
                self.pos += 1;
            } else {
                let rest = &self.bytes[self.pos..];
                if rest.len() >= 2
                    && matches!(&rest[..2], b"TH" | b"AL" | b"SP" | b"TB" | b"OH")
                {
                    self.pos += 2;
                    if self.number().is_none() {
                        return Err(invalid(self));
                    }
                }
            }
        }

        let mut hydrogens = 0u8;
        if self.peek() == Some(b'H') {
            self.pos += 1;
            hydrogens = match self.number() {
                Some(v) if v <= 9 => v as u8,
                Some(_) => return Err(invalid(self)),
                None => 1,
            };
        }

        let mut charge: i32 = 0;
        if let Some(sign @ (b'+' | b'-')) = self.peek() {
            let unit = if sign == b'+' { 1 } else { -1 };
            self.pos += 1;
            if let Some(v) = self.number() {
                if v > 15 {
                    return Err(invalid(self));
                }
                charge = unit * v as i32;
            } else {
                charge = unit;
                while self.peek() == Some(sign) {
                    charge += unit;
                    self.pos += 1;
                }
                if charge.abs() > 15 {
                    return Err(invalid(self));
                }
            }
        }

        if self.peek() == Some(b':') {
            self.pos += 1;
            if self.number().is_none() {
                return Err(invalid(self));
            }
        }

        if self.peek() != Some(b']') {
            return Err(invalid(self));
        }
        self.pos += 1;

        let atom = Atom {
            atomic_number: z,
            charge: charge as i8,
            hydrogens,
            aromatic,
            isotope,
        };
        self.add_atom(atom, true, start);
        Ok(())
    }

    fn bracket_symbol(&mut self) -> Result<(u8, bool), SmilesError> {
        let unknown = SmilesError::new(SmilesErrorKind::UnknownElement, self.pos);
        let c = self.peek().ok_or(unknown)?;
        if c.is_ascii_lowercase() {
            // aromatic: se, as, te, or a single letter
            let two = self.bytes.get(self.pos..self.pos + 2);
            for sym in ["se", "as", "te"] {
                if two == Some(sym.as_bytes()) {
                    self.pos += 2;
                    let upper = format!("{}{}", sym[..1].to_ascii_uppercase(), &sym[1..]);
                    return Ok((elements::atomic_number(&upper).unwrap(), true));
                }
            }
            let z = match c {
                b'b' => 5,
                b'c' => 6,
                b'n' => 7,
                b'o' => 8,
                b'p' => 15,
                b's' => 16,
                _ => return Err(unknown),
            };
            self.pos += 1;
            return Ok((z, true));
        }
        if !c.is_ascii_uppercase() {
            return Err(unknown);
        }
        if let Some(&l) = self.bytes.get(self.pos + 1) {
            if l.is_ascii_lowercase() {
                let sym = [c, l];
                let sym = std::str::from_utf8(&sym).unwrap();
                if let Some(z) = elements::atomic_number(sym) {
                    self.pos += 2;
                    return Ok((z, false));
                }
            }
        }
        let sym = [c];
        let z = elements::atomic_number(std::str::from_utf8(&sym).unwrap()).ok_or(unknown)?;
        self.pos += 1;
        Ok((z, false))
    }

    fn number(&mut self) -> Option<u32> {
        let start = self.pos;
        while self.peek().is_some_and(|c| c.is_ascii_digit()) && self.pos - start < 6 {
            self.pos += 1;
        }
        if self.pos == start {
            return None;
        }
        std::str::from_utf8(&self.bytes[start..self.pos])
            .ok()?
            .parse()
            .ok()
    }

    fn add_atom(&mut self, atom: Atom, bracket: bool, offset: usize) {
        let idx = self.atoms.len();
        self.atoms.push(ParsedAtom { atom, bracket, offset });
        if let Some(prev) = self.prev {
            let (spec, bond_offset) = match self.pending.take() {
                Some((spec, off)) => (Some(spec), off),
                None => (None, offset),
            };
            self.bonds.push(RawBond {
                a: prev,
                b: idx,
                spec,
                offset: bond_offset,
            });
        }
        self.prev = Some(idx);
    }

    fn ring_closure(&mut self, n: u32, offset: usize) -> Result<(), SmilesError> {
        let atom = self
            .prev
            .ok_or(SmilesError::new(SmilesErrorKind::MissingAtom, offset))?;
        let spec = self.pending.take().map(|(s, _)| s);
        match self.rings.remove(&n) {
            Some((other, open_spec, _)) => {
                let spec = match (open_spec, spec) {
                    (Some(x), Some(y)) if x.order() != y.order() => {
                        return Err(SmilesError::new(SmilesErrorKind::ConflictingRingBond, offset))
                    }
                    (x, y) => x.or(y),
                };
                if other == atom {
                    return Err(SmilesError::new(SmilesErrorKind::SelfBond, offset));
                }
                let dup = self.bonds.iter().any(|b| {
                    (b.a == other && b.b == atom) || (b.a == atom && b.b == other)
                });
                if dup {
                    return Err(SmilesError::new(SmilesErrorKind::DuplicateBond, offset));
                }
                self.bonds.push(RawBond {
                    a: other,
                    b: atom,
                    spec,
                    offset,
                });
            }
            None => {
                self.rings.insert(n, (atom, spec, offset));
            }
        }
        Ok(())
    }

    fn finish(self) -> Result<MolGraph, SmilesError> {
        if let Some((_, off)) = self.pending {
            return Err(SmilesError::new(SmilesErrorKind::DanglingBond, off));
        }
        if let Some(&(_, off)) = self.branches.last() {
            return Err(SmilesError::new(SmilesErrorKind::UnclosedBranch, off));
        }
        if let Some(off) = self.rings.values().map(|&(_, _, off)| off).min() {
            return Err(SmilesError::new(SmilesErrorKind::UnmatchedRingBond, off));
        }
        if self.atoms.is_empty() {
            return Err(SmilesError::new(SmilesErrorKind::Empty, 0));
        }

        let mut bonds = Vec::with_capacity(self.bonds.len());
        for raw in &self.bonds {
            let (a, b) = (&self.atoms[raw.a].atom, &self.atoms[raw.b].atom);
            let order = match raw.spec {
                Some(spec) => spec.order(),
                None if a.aromatic && b.aromatic => BondOrder::Aromatic,
                None => BondOrder::Single,
            };
            bonds.push(Bond {
                a: raw.a,
                b: raw.b,
                order,
            });
        }

        let atoms: Vec<Atom> = self.atoms.iter().map(|p| p.atom.clone()).collect();
        let graph = MolGraph::new(atoms.clone(), bonds.clone()).map_err(|e| {
            let (kind, bond) = match e {
                GraphError::AromaticBondMismatch(i) => (SmilesErrorKind::AromaticBondMismatch, i),
                GraphError::DuplicateBond(..) => (SmilesErrorKind::DuplicateBond, 0),
                GraphError::SelfBond(i) => (SmilesErrorKind::SelfBond, i),
                GraphError::BondOutOfRange { bond, .. } => (SmilesErrorKind::DuplicateBond, bond),
            };
            SmilesError::new(kind, self.bonds.get(bond).map_or(0, |b| b.offset))
        })?;

        // aromatic bonds only exist inside rings; a chain bond between two
        // aromatic atoms (biphenyl-style) is single
        let mut changed = false;
        for (i, bond) in bonds.iter_mut().enumerate() {
            if bond.order == BondOrder::Aromatic && !graph.is_ring_bond(i) {
                bond.order = BondOrder::Single;
                changed = true;
            }
        }
        let graph = if changed {
            MolGraph::new(atoms, bonds).expect("downgrading bonds keeps invariants")
        } else {
            graph
        };

        let mut atoms = graph.atoms().to_vec();
        for (i, parsed) in self.atoms.iter().enumerate() {
            if parsed.atom.aromatic && !graph.is_ring_atom(i) {
                return Err(SmilesError::new(
                    SmilesErrorKind::AromaticOutsideRing,
                    parsed.offset,
                ));
            }
            if parsed.bracket {
                continue;
            }
            let h = implicit_hydrogens(&parsed.atom, graph.bond_valence(i)).ok_or(
                SmilesError::new(SmilesErrorKind::ValenceViolation, parsed.offset),
            )?;
            atoms[i].hydrogens = h;
        }
        Ok(MolGraph::new(atoms, graph.bonds().to_vec())
            .expect("hydrogen counts do not affect graph invariants")
            .with_stereo_discarded(self.stereo))
    }
}

/// Implicit hydrogen count of an unbracketed organic-subset atom, or `None`
/// when its bond valence exceeds every allowed valence.
pub fn implicit_hydrogens(atom: &Atom, bond_valence: u8) -> Option<u8> {
    if atom.aromatic {
        return elements::aromatic_implicit_h(atom.atomic_number, bond_valence);
    }
    elements::default_valences(atom.atomic_number)
        .iter()
        .find(|&&v| v >= bond_valence)
        .map(|&v| v - bond_valence)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn kind(s: &str) -> SmilesErrorKind {
        parse_smiles(s).unwrap_err().kind
    }

    #[test]
    fn ethanol() {
        let g = parse_smiles("CCO").unwrap();
        assert_eq!(g.atom_count(), 3);
        let elems: Vec<_> = g.atoms().iter().map(|a| a.element()).collect();
        assert_eq!(elems, ["C", "C", "O"]);
        assert_eq!(g.bonds().len(), 2);
        assert!(g.bonds().iter().all(|b| b.order == BondOrder::Single));
        let hs: Vec<_> = g.atoms().iter().map(|a| a.hydrogens).collect();
        assert_eq!(hs, [3, 2, 1]);
    }

    #[test]
    fn benzene() {
        let g = parse_smiles("c1ccccc1").unwrap();
        assert_eq!(g.atom_count(), 6);
        assert!(g.atoms().iter().all(|a| a.aromatic && a.hydrogens == 1));
        assert_eq!(g.bonds().len(), 6);
        assert!(g.bonds().iter().all(|b| b.order == BondOrder::Aromatic));
        assert!((0..6).all(|i| g.is_ring_atom(i)));
    }

    #[test]
    fn unclosed_branch_offset() {
        let e = parse_smiles("C(C").unwrap_err();
        assert_eq!(e, SmilesError::new(SmilesErrorKind::UnclosedBranch, 1));
    }

    #[test]
    fn distinct_error_classes() {
        assert_eq!(kind(""), SmilesErrorKind::Empty);
        assert_eq!(kind("C1CC"), SmilesErrorKind::UnmatchedRingBond);
        assert_eq!(kind("CXC"), SmilesErrorKind::UnknownElement);
        assert_eq!(kind("[Xx]"), SmilesErrorKind::UnknownElement);
        assert_eq!(kind("C(C)(C)(C)(C)C"), SmilesErrorKind::ValenceViolation);
        assert_eq!(kind("O(C)(C)C"), SmilesErrorKind::ValenceViolation);
        assert_eq!(kind("CC)"), SmilesErrorKind::UnmatchedBranchClose);
        assert_eq!(kind("C="), SmilesErrorKind::DanglingBond);
        assert_eq!(kind("=C"), SmilesErrorKind::MissingAtom);
        assert_eq!(kind("C=1CC#1"), SmilesErrorKind::ConflictingRingBond);
        assert_eq!(kind("C11"), SmilesErrorKind::SelfBond);
        assert_eq!(kind("C12C12"), SmilesErrorKind::DuplicateBond);
        assert_eq!(kind("C:C"), SmilesErrorKind::AromaticBondMismatch);
        assert_eq!(kind("cc"), SmilesErrorKind::AromaticOutsideRing);
        assert_eq!(kind("[C"), SmilesErrorKind::InvalidBracketAtom);
        assert_eq!(kind("C$C"), SmilesErrorKind::UnsupportedBond);
        assert_eq!(kind("C C"), SmilesErrorKind::UnexpectedCharacter(' '));
    }

    #[test]
    fn unmatched_ring_reports_opening_offset() {
        let e = parse_smiles("CC1CC").unwrap_err();
        assert_eq!(e.offset, 2);
    }

    #[test]
    fn bracket_atoms() {
        let g = parse_smiles("[13CH3][NH3+].[O-2]").unwrap();
        let a = &g.atoms()[0];
        assert_eq!((a.atomic_number, a.isotope, a.hydrogens), (6, Some(13), 3));
        let n = &g.atoms()[1];
        assert_eq!((n.charge, n.hydrogens), (1, 3));
        assert_eq!(g.atoms()[2].charge, -2);
        assert_eq!(parse_smiles("[Fe++]").unwrap().atoms()[0].charge, 2);
        assert_eq!(parse_smiles("[nH]1cccc1").unwrap().atoms()[0].hydrogens, 1);
        assert_eq!(parse_smiles("[se]1cccc1").unwrap().atoms()[0].atomic_number, 34);
        assert_eq!(parse_smiles("[CH4:2]").unwrap().atoms()[0].hydrogens, 4);
    }

    #[test]
    fn stereo_is_discarded() {
        let g = parse_smiles("F/C=C/F").unwrap();
        assert_eq!(g.stereo_discarded(), 2);
        assert_eq!(g.bonds()[1].order, BondOrder::Double);
        let g = parse_smiles("N[C@@H](C)C(=O)O").unwrap();
        assert_eq!(g.stereo_discarded(), 1);
        assert_eq!(g.atoms()[1].hydrogens, 1);
    }

    #[test]
    fn rings_and_percent_closures() {
        let g = parse_smiles("C%12CCCCC%12").unwrap();
        assert_eq!(g.bonds().len(), 6);
        let g = parse_smiles("C=1CCCCC1").unwrap();
        assert_eq!(g.bond_between(0, 5).unwrap().order, BondOrder::Double);
    }

    #[test]
    fn biphenyl_link_is_single() {
        let g = parse_smiles("c1ccccc1c1ccccc1").unwrap();
        assert_eq!(g.bond_between(5, 6).unwrap().order, BondOrder::Single);
        assert_eq!(
            g.bonds().iter().filter(|b| b.order == BondOrder::Aromatic).count(),
            12
        );
    }

    #[test]
    fn aromatic_hydrogens() {
        let g = parse_smiles("Cc1ccncc1").unwrap();
        let hs: Vec<_> = g.atoms().iter().map(|a| a.hydrogens).collect();
        assert_eq!(hs, [3, 0, 1, 1, 0, 1, 1]);
        assert!(is_valid_smiles("c1ccoc1"));
        assert!(is_valid_smiles("O=c1cc[nH]cc1"));
    }

    #[test]
    fn halogens_and_two_letter_symbols() {
        let g = parse_smiles("ClCBr").unwrap();
        let z: Vec<_> = g.atoms().iter().map(|a| a.atomic_number).collect();
        assert_eq!(z, [17, 6, 35]);
        assert!(!is_valid_smiles("F(C)C"));
    }
}
