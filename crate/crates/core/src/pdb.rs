//! Fixed-column PDB `ATOM` records for backbone chains.
//!
//! Coordinates are stored in nanometres and written in ångströms.

use std::fmt::Write as _;

use crate::backbone::{ResidueAtoms, ATOM_NAMES};
use crate::so3::Vec3;
use crate::{Error, Result};

const NM_TO_ANGSTROM: f64 = 10.0;

/// Formats a chain of residues as GLY `ATOM` records followed by `TER` and
/// `END`. Residues are numbered from 1.
pub fn write_pdb(residues: &[ResidueAtoms], chain: char) -> Result<String> {
    write_pdb_chains(&[(chain, residues)])
}

/// Several chains in one file, each closed by `TER`; serial numbers run on
/// across chains.
pub fn write_pdb_chains(chains: &[(char, &[ResidueAtoms])]) -> Result<String> {
    let mut out = String::new();
    let mut serial = 0usize;
    for (chain, residues) in chains {
        let chain = *chain;
        if !chain.is_ascii_alphanumeric() {
            return Err(Error::InvalidInput(format!("chain id must be one ASCII letter or digit, got {chain:?}")));
        }
        if residues.len() > 9999 {
            return Err(Error::InvalidInput("PDB residue numbers are limited to 4 digits".into()));
        }
        for (i, res) in residues.iter().enumerate() {
            for (name, pos) in ATOM_NAMES.iter().zip(res.atoms()) {
                serial += 1;
                let p = pos * NM_TO_ANGSTROM;
                if p.iter().any(|v| !v.is_finite() || *v >= 9999.9995 || *v <= -999.9995) {
                    return Err(Error::InvalidInput(format!("coordinate {p:?} does not fit the PDB field width")));
                }
                writeln!(
                    out,
                    "ATOM  {serial:>5} {name:<4} GLY {chain}{resseq:>4}    {x:>8.3}{y:>8.3}{z:>8.3}{occ:>6.2}{b:>6.2}          {element:>2}",
                    name = format!(" {name}"),
                    resseq = i + 1,
                    x = p.x,
                    y = p.y,
                    z = p.z,
                    occ = 1.0,
                    b = 0.0,
                    element = &name[..1],
                )
                .expect("writing to a String");
            }
        }
        serial += 1;
        let last = residues.len();
        writeln!(out, "TER   {serial:>5}      GLY {chain}{last:>4}").expect("writing to a String");
    }
    if serial > 99999 {
        return Err(Error::InvalidInput("PDB serial numbers are limited to 5 digits".into()));
    }
    out.push_str("END\n");
    Ok(out)
}

fn field(line: &str, from: usize, to: usize) -> Option<&str> {
    line.get(from - 1..to.min(line.len()))
}

fn parse_coord(line: &str, from: usize, lineno: usize) -> Result<f64> {
    field(line, from, from + 7)
        .and_then(|s| s.trim().parse::<f64>().ok())
        .ok_or_else(|| Error::InvalidInput(format!("line {lineno}: bad coordinate in columns {from}-{}", from + 7)))
}

/// One parsed `ATOM` record.
#[derive(Debug, Clone, PartialEq)]
pub struct AtomRecord {
    pub serial: u32,
    pub name: String,
    pub res_name: String,
    pub chain: char,
    pub res_seq: i32,
    /// Nanometres.
    pub position: Vec3,
    pub element: String,
}

/// Parses every `ATOM` record; other records are ignored.
pub fn parse_atoms(text: &str) -> Result<Vec<AtomRecord>> {
    let mut out = Vec::new();
    for (k, line) in text.lines().enumerate() {
        let lineno = k + 1;
        if !line.starts_with("ATOM  ") {
            continue;
        }
        let bad = |what: &str| Error::InvalidInput(format!("line {lineno}: bad {what}"));
        let serial = field(line, 7, 11).and_then(|s| s.trim().parse().ok()).ok_or_else(|| bad("serial"))?;
        let name = field(line, 13, 16).ok_or_else(|| bad("atom name"))?.trim().to_string();
        let res_name = field(line, 18, 20).ok_or_else(|| bad("residue name"))?.trim().to_string();
        let chain = field(line, 22, 22).and_then(|s| s.chars().next()).ok_or_else(|| bad("chain id"))?;
        let res_seq = field(line, 23, 26).and_then(|s| s.trim().parse().ok()).ok_or_else(|| bad("residue number"))?;
        let x = parse_coord(line, 31, lineno)?;
        let y = parse_coord(line, 39, lineno)?;
        let z = parse_coord(line, 47, lineno)?;
        let element = field(line, 77, 78).unwrap_or("").trim().to_string();
        out.push(AtomRecord {
            serial,
            name,
            res_name,
            chain,
            res_seq,
            position: Vec3::new(x, y, z) / NM_TO_ANGSTROM,
            element,
        });
    }
    Ok(out)
}

/// Groups `ATOM` records into residues with all four backbone atoms, in
/// file order.
pub fn parse_backbone(text: &str) -> Result<Vec<ResidueAtoms>> {
    let atoms = parse_atoms(text)?;
    let mut residues = Vec::new();
    let mut i = 0;
    while i < atoms.len() {
        let key = (atoms[i].chain, atoms[i].res_seq);
        let mut slots: [Option<Vec3>; 4] = [None; 4];
        while i < atoms.len() && (atoms[i].chain, atoms[i].res_seq) == key {
            if let Some(k) = ATOM_NAMES.iter().position(|n| *n == atoms[i].name) {
                slots[k] = Some(atoms[i].position);
            }
            i += 1;
        }
        match slots {
            [Some(n), Some(ca), Some(c), Some(o)] => residues.push(ResidueAtoms { n, ca, c, o }),
            _ => {
                return Err(Error::InvalidInput(format!(
                    "residue {}{} lacks one of N, CA, C, O",
                    key.0, key.1
                )))
            }
        }
    }
    Ok(residues)
}
