//! Character alignments: FASTA and relaxed PHYLIP input, FASTA output.
//!
//! Characters are stored as small integer states. Column weights count how
//! many times each site is used, which lets resampling and annealing
//! reweight sites without copying the matrix.

use std::fmt::Write as _;
use std::str::FromStr;

use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Alphabet {
    /// States `0`, `1`.
    Binary,
    /// `a c g t`, case-insensitive.
    Dna,
    /// `-1 0 1`, written `-`, `0`, `1` one character per site.
    Ternary,
}

impl Alphabet {
    pub fn size(self) -> usize {
        match self {
            Alphabet::Binary => 2,
            Alphabet::Dna => 4,
            Alphabet::Ternary => 3,
        }
    }

    fn state(self, c: u8) -> Option<u8> {
        match self {
            Alphabet::Binary => match c {
                b'0' => Some(0),
                b'1' => Some(1),
                _ => None,
            },
            Alphabet::Dna => match c.to_ascii_lowercase() {
                b'a' => Some(0),
                b'c' => Some(1),
                b'g' => Some(2),
                b't' => Some(3),
                _ => None,
            },
            Alphabet::Ternary => match c {
                b'-' => Some(0),
                b'0' => Some(1),
                b'1' => Some(2),
                _ => None,
            },
        }
    }

    fn symbol(self, s: u8) -> char {
        match self {
            Alphabet::Binary => (b'0' + s) as char,
            Alphabet::Dna => b"ACGT"[s as usize] as char,
            Alphabet::Ternary => b"-01"[s as usize] as char,
        }
    }

    /// Smallest alphabet accepting every character of `seqs`, preferring
    /// binary over ternary over DNA.
    fn detect<'a>(seqs: impl Iterator<Item = &'a [u8]> + Clone) -> Option<Alphabet> {
        [Alphabet::Binary, Alphabet::Ternary, Alphabet::Dna]
            .into_iter()
            .find(|a| seqs.clone().all(|s| s.iter().all(|&c| a.state(c).is_some())))
    }
}

impl FromStr for Alphabet {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "binary" => Ok(Alphabet::Binary),
            "dna" => Ok(Alphabet::Dna),
            "ternary" => Ok(Alphabet::Ternary),
            _ => Err(Error::InvalidArgument(format!("unknown alphabet `{s}`"))),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Format {
    Fasta,
    Phylip,
}

impl FromStr for Format {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "fasta" => Ok(Format::Fasta),
            "phylip" => Ok(Format::Phylip),
            _ => Err(Error::InvalidArgument(format!("unknown alignment format `{s}`"))),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Alignment {
    taxa: Vec<String>,
    alphabet: Alphabet,
    /// `rows[taxon][site]`.
    rows: Vec<Vec<u8>>,
    weights: Vec<u32>,
}

impl Alignment {
    /// All rows must have the same length and hold valid states.
    pub fn new(taxa: Vec<String>, alphabet: Alphabet, rows: Vec<Vec<u8>>) -> Result<Self> {
        if taxa.is_empty() {
            return Err(Error::alignment(0, "no sequences"));
        }
        if taxa.len() != rows.len() {
            return Err(Error::InvalidArgument(format!(
                "{} names for {} rows",
                taxa.len(),
                rows.len()
            )));
        }
        let p = rows[0].len();
        for (t, r) in taxa.iter().zip(&rows) {
            if r.len() != p {
                return Err(Error::alignment(
                    0,
                    format!("sequence `{t}` has {} sites, expected {p}", r.len()),
                ));
            }
            if let Some(&s) = r.iter().find(|&&s| s as usize >= alphabet.size()) {
                return Err(Error::alignment(0, format!("state {s} out of range in `{t}`")));
            }
        }
        let mut seen = std::collections::HashSet::new();
        for t in &taxa {
            if !seen.insert(t) {
                return Err(Error::DuplicateLabel(t.clone()));
            }
        }
        Ok(Alignment {
            taxa,
            alphabet,
            rows,
            weights: vec![1; p],
        })
    }

    pub fn taxa(&self) -> &[String] {
        &self.taxa
    }

    pub fn alphabet(&self) -> Alphabet {
        self.alphabet
    }

    pub fn n_taxa(&self) -> usize {
        self.taxa.len()
    }

    pub fn n_sites(&self) -> usize {
        self.weights.len()
    }

    pub fn row(&self, i: usize) -> &[u8] {
        &self.rows[i]
    }

    pub fn weights(&self) -> &[u32] {
        &self.weights
    }

    pub fn total_weight(&self) -> u64 {
        self.weights.iter().map(|&w| w as u64).sum()
    }

    pub fn with_weights(&self, weights: Vec<u32>) -> Result<Alignment> {
        if weights.len() != self.n_sites() {
            return Err(Error::InvalidArgument(format!(
                "{} weights for {} sites",
                weights.len(),
                self.n_sites()
            )));
        }
        Ok(Alignment {
            weights,
            ..self.clone()
        })
    }

    /// Sites `range` of every row, weights carried along.
    pub fn columns(&self, range: std::ops::Range<usize>) -> Alignment {
        Alignment {
            taxa: self.taxa.clone(),
            alphabet: self.alphabet,
            rows: self.rows.iter().map(|r| r[range.clone()].to_vec()).collect(),
            weights: self.weights[range].to_vec(),
        }
    }

    /// Concatenate the sites of `other` (same taxa in any order) after ours.
    pub fn concat(&self, other: &Alignment) -> Result<Alignment> {
        if self.alphabet != other.alphabet {
            return Err(Error::InvalidArgument("alphabets differ".into()));
        }
        if other.n_taxa() != self.n_taxa() {
            return Err(Error::LeafSetMismatch("alignments have different taxa".into()));
        }
        let mut rows = self.rows.clone();
        for (t, r) in self.taxa.iter().zip(rows.iter_mut()) {
            let k = other
                .taxa
                .iter()
                .position(|o| o == t)
                .ok_or_else(|| Error::UnknownLabel(t.clone()))?;
            r.extend_from_slice(&other.rows[k]);
        }
        let mut weights = self.weights.clone();
        weights.extend_from_slice(&other.weights);
        Ok(Alignment {
            taxa: self.taxa.clone(),
            alphabet: self.alphabet,
            rows,
            weights,
        })
    }

    /// FASTA, 60 sites per line. Weights are not written.
    pub fn to_fasta(&self) -> String {
        let mut out = String::new();
        for (t, r) in self.taxa.iter().zip(&self.rows) {
            let _ = writeln!(out, ">{t}");
            for chunk in r.chunks(60) {
                let line: String = chunk.iter().map(|&s| self.alphabet.symbol(s)).collect();
                let _ = writeln!(out, "{line}");
            }
        }
        out
    }
}

/// Parse FASTA or relaxed PHYLIP. The alphabet is inferred unless given.
/// Gap and ambiguity characters are rejected (the ternary `-` is the one
/// exception, and only when that alphabet is in use).
pub fn parse_alignment(text: &str, format: Format, alphabet: Option<Alphabet>) -> Result<Alignment> {
    let (taxa, seqs) = match format {
        Format::Fasta => read_fasta(text)?,
        Format::Phylip => read_phylip(text)?,
    };
    if taxa.is_empty() {
        return Err(Error::alignment(0, "empty input"));
    }
    let alphabet = match alphabet {
        Some(a) => a,
        None => Alphabet::detect(seqs.iter().map(|(_, s)| s.as_slice())).ok_or_else(|| {
            Error::alignment(0, "characters outside the binary, ternary and DNA alphabets")
        })?,
    };
    let p = seqs[0].1.len();
    let mut rows = Vec::with_capacity(seqs.len());
    for (t, (line, s)) in taxa.iter().zip(&seqs) {
        if s.len() != p {
            return Err(Error::alignment(
                *line,
                format!("sequence `{t}` has {} sites, expected {p}", s.len()),
            ));
        }
        let row = s
            .iter()
            .map(|&c| {
                alphabet.state(c).ok_or_else(|| {
                    Error::alignment(*line, format!("unknown character `{}` in `{t}`", c as char))
                })
            })
            .collect::<Result<Vec<u8>>>()?;
        rows.push(row);
    }
    if p == 0 {
        return Err(Error::alignment(0, "sequences are empty"));
    }
    Alignment::new(taxa, alphabet, rows)
}

type Rows = (Vec<String>, Vec<(usize, Vec<u8>)>);

fn read_fasta(text: &str) -> Result<Rows> {
    let mut taxa = Vec::new();
    let mut seqs: Vec<(usize, Vec<u8>)> = Vec::new();
    for (i, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with(';') || line.starts_with('#') {
            continue;
        }
        if let Some(name) = line.strip_prefix('>') {
            let name = name.split_whitespace().next().unwrap_or("");
            if name.is_empty() {
                return Err(Error::alignment(i + 1, "empty sequence name"));
            }
            taxa.push(name.to_string());
            seqs.push((i + 1, Vec::new()));
        } else {
            match seqs.last_mut() {
                Some((_, s)) => s.extend(line.bytes().filter(|c| !c.is_ascii_whitespace())),
                None => return Err(Error::alignment(i + 1, "sequence data before first header")),
            }
        }
    }
    Ok((taxa, seqs))
}

fn read_phylip(text: &str) -> Result<Rows> {
    let mut lines = text
        .lines()
        .enumerate()
        .map(|(i, l)| (i + 1, l.trim()))
        .filter(|(_, l)| !l.is_empty() && !l.starts_with('#'));
    let (hl, header) = match lines.next() {
        Some(h) => h,
        None => return Ok((Vec::new(), Vec::new())),
    };
    let nums: Vec<usize> = header
        .split_whitespace()
        .map(|x| x.parse().map_err(|_| Error::alignment(hl, "header must be `ntaxa nsites`")))
        .collect::<Result<_>>()?;
    let (nt, ns) = match nums[..] {
        [a, b] => (a, b),
        _ => return Err(Error::alignment(hl, "header must be `ntaxa nsites`")),
    };
    let mut taxa = Vec::with_capacity(nt);
    let mut seqs = Vec::with_capacity(nt);
    for (line, l) in lines {
        let mut parts = l.split_whitespace();
        let name = parts.next().expect("nonempty line");
        if taxa.len() < nt {
            taxa.push(name.to_string());
            seqs.push((line, parts.flat_map(|p| p.bytes()).collect::<Vec<u8>>()));
        } else {
            return Err(Error::alignment(line, format!("more than {nt} sequences")));
        }
    }
    if taxa.len() != nt {
        return Err(Error::alignment(hl, format!("header announces {nt} taxa, found {}", taxa.len())));
    }
    for (t, (line, s)) in taxa.iter().zip(&seqs) {
        if s.len() != ns {
            return Err(Error::alignment(
                *line,
                format!("sequence `{t}` has {} sites, header says {ns}", s.len()),
            ));
        }
    }
    Ok((taxa, seqs))
}
