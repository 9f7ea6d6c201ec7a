//! Directed edge lists and their tab-separated text format.
//!
//! ```text
//! # comment
//! n=7
//! 0 1
//! 0 2
//! dangling:6
//! ```
//!
//! Ids are 0-based and separated by whitespace; output uses tabs. Without
//! an `n=<count>` header the node count is the largest id plus one. A
//! `dangling:<id>` directive marks a node whose column is repaired to the
//! uniform distribution; it must not carry outgoing edges.

use std::io::{BufRead, Write};

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct EdgeList {
    n: usize,
    edges: Vec<(usize, usize)>,
    dangling: Vec<usize>,
}

impl EdgeList {
    pub fn new(n: usize, edges: Vec<(usize, usize)>) -> Result<Self> {
        Self::with_dangling(n, edges, Vec::new())
    }

    /// Edge list with explicitly declared dangling nodes.
    pub fn with_dangling(
        n: usize,
        edges: Vec<(usize, usize)>,
        mut dangling: Vec<usize>,
    ) -> Result<Self> {
        if n == 0 {
            return Err(Error::InvalidInput("node count must be at least 1".into()));
        }
        for &(s, d) in &edges {
            if s >= n || d >= n {
                return Err(Error::InvalidInput(format!(
                    "edge {s}->{d} has an endpoint outside [0, {n})"
                )));
            }
        }
        dangling.sort_unstable();
        dangling.dedup();
        for &v in &dangling {
            if v >= n {
                return Err(Error::InvalidInput(format!(
                    "dangling node {v} outside [0, {n})"
                )));
            }
            if edges.iter().any(|&(s, _)| s == v) {
                return Err(Error::InvalidInput(format!(
                    "node {v} is declared dangling but has outgoing edges"
                )));
            }
        }
        Ok(Self { n, edges, dangling })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn edges(&self) -> &[(usize, usize)] {
        &self.edges
    }

    pub fn declared_dangling(&self) -> &[usize] {
        &self.dangling
    }

    /// Converts 1-based `(src, dst)` pairs, as used in hand-written
    /// examples, into a 0-based list.
    pub fn from_one_based(n: usize, edges: &[(usize, usize)]) -> Result<Self> {
        let mut out = Vec::with_capacity(edges.len());
        for &(s, d) in edges {
            if s == 0 || d == 0 {
                return Err(Error::InvalidInput("1-based ids start at 1".into()));
            }
            out.push((s - 1, d - 1));
        }
        Self::new(n, out)
    }

    pub fn parse<R: BufRead>(reader: R) -> Result<Self> {
        let mut header_n: Option<usize> = None;
        let mut edges = Vec::new();
        let mut dangling = Vec::new();
        let mut max_id: Option<usize> = None;

        for (idx, line) in reader.lines().enumerate() {
            let line = line?;
            let lineno = idx + 1;
            let trimmed = line.trim();
            if trimmed.is_empty() || trimmed.starts_with('#') {
                continue;
            }
            let parse_id = |s: &str| -> Result<usize> {
                s.trim().parse::<usize>().map_err(|_| Error::Parse {
                    line: lineno,
                    msg: format!("expected a non-negative integer, found {s:?}"),
                })
            };
            if let Some(rest) = trimmed.strip_prefix("n=") {
                if header_n.is_some() {
                    return Err(Error::Parse {
                        line: lineno,
                        msg: "duplicate n= header".into(),
                    });
                }
                header_n = Some(parse_id(rest)?);
                continue;
            }
            if let Some(rest) = trimmed.strip_prefix("dangling:") {
                let v = parse_id(rest)?;
                max_id = Some(max_id.map_or(v, |m| m.max(v)));
                dangling.push(v);
                continue;
            }
            let mut fields = trimmed.split_whitespace();
            let (Some(s), Some(d), None) = (fields.next(), fields.next(), fields.next()) else {
                return Err(Error::Parse {
                    line: lineno,
                    msg: "expected `src<TAB>dst`".into(),
                });
            };
            let (s, d) = (parse_id(s)?, parse_id(d)?);
            max_id = Some(max_id.map_or(s.max(d), |m| m.max(s).max(d)));
            edges.push((s, d));
        }

        let n = match (header_n, max_id) {
            (Some(n), _) => n,
            (None, Some(m)) => m + 1,
            (None, None) => {
                return Err(Error::InvalidInput(
                    "edge list is empty and has no n= header".into(),
                ))
            }
        };
        Self::with_dangling(n, edges, dangling)
    }

    pub fn write_tsv<W: Write>(&self, mut w: W) -> Result<()> {
        writeln!(w, "n={}", self.n)?;
        for &(s, d) in &self.edges {
            writeln!(w, "{s}\t{d}")?;
        }
        for &v in &self.dangling {
            writeln!(w, "dangling:{v}")?;
        }
        Ok(())
    }
}
