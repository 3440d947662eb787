use std::fmt::Write as _;
use std::path::Path;

use crate::error::{Error, Result};

/// Inter-cell adjacency shipped for [`pegasus_tile_default`].
pub const DEFAULT_PEGASUS_INTERCELL: &str = include_str!("../../data/pegasus_intercell.topology");

const CELL: usize = 8;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum TopologyKind {
    Dense,
    Diagonal,
    ChimeraCell,
    PegasusTile,
    Custom,
}

impl TopologyKind {
    fn tag(self) -> &'static str {
        match self {
            TopologyKind::Dense => "dense",
            TopologyKind::Diagonal => "diagonal",
            TopologyKind::ChimeraCell => "chimera",
            TopologyKind::PegasusTile => "pegasus",
            TopologyKind::Custom => "custom",
        }
    }

    fn from_tag(s: &str) -> Result<Self> {
        Ok(match s {
            "dense" => TopologyKind::Dense,
            "diagonal" => TopologyKind::Diagonal,
            "chimera" => TopologyKind::ChimeraCell,
            "pegasus" => TopologyKind::PegasusTile,
            "custom" => TopologyKind::Custom,
            other => return Err(Error::Parse(format!("unknown topology kind {other:?}"))),
        })
    }
}

/// Allowed couplings between qubits. The diagonal is always allowed.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Topology {
    kind: TopologyKind,
    n: usize,
    adjacency: Vec<bool>,
    cell_size: usize,
}

impl Topology {
    fn empty(kind: TopologyKind, n: usize, cell_size: usize) -> Self {
        let mut adjacency = vec![false; n * n];
        for i in 0..n {
            adjacency[i * n + i] = true;
        }
        Topology {
            kind,
            n,
            adjacency,
            cell_size,
        }
    }

    pub fn dense(n: usize) -> Self {
        Topology {
            kind: TopologyKind::Dense,
            n,
            adjacency: vec![true; n * n],
            cell_size: n,
        }
    }

    pub fn diagonal(n: usize) -> Self {
        Self::empty(TopologyKind::Diagonal, n, 1)
    }

    pub fn custom(n: usize, edges: &[(usize, usize)]) -> Result<Self> {
        let mut t = Self::empty(TopologyKind::Custom, n, n);
        for &(i, j) in edges {
            t.connect(i, j)?;
        }
        Ok(t)
    }

    fn connect(&mut self, i: usize, j: usize) -> Result<()> {
        if i >= self.n || j >= self.n {
            return Err(Error::Parse(format!(
                "edge ({i}, {j}) out of range for n={}",
                self.n
            )));
        }
        self.adjacency[i * self.n + j] = true;
        self.adjacency[j * self.n + i] = true;
        Ok(())
    }

    fn add_k44_cell(&mut self, base: usize) {
        for a in 0..4 {
            for b in 4..8 {
                self.adjacency[(base + a) * self.n + base + b] = true;
                self.adjacency[(base + b) * self.n + base + a] = true;
            }
        }
    }

    pub fn kind(&self) -> TopologyKind {
        self.kind
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn cell_size(&self) -> usize {
        self.cell_size
    }

    pub fn adjacency(&self) -> &[bool] {
        &self.adjacency
    }

    #[inline]
    pub fn allows(&self, i: usize, j: usize) -> bool {
        self.adjacency[i * self.n + j]
    }

    pub fn is_diagonal_only(&self) -> bool {
        (0..self.n).all(|i| (0..self.n).all(|j| i == j || !self.allows(i, j)))
    }

    /// Allowed positions `(i, j)` with `i <= j` in row-major order. This is the
    /// layout of the network output that parametrizes `A`.
    pub fn free_parameter_index(&self) -> Vec<(usize, usize)> {
        let mut out = Vec::new();
        for i in 0..self.n {
            for j in i..self.n {
                if self.allows(i, j) {
                    out.push((i, j));
                }
            }
        }
        out
    }

    /// Off-diagonal edges `(i, j)`, `i < j`.
    pub fn edges(&self) -> Vec<(usize, usize)> {
        self.free_parameter_index()
            .into_iter()
            .filter(|&(i, j)| i != j)
            .collect()
    }

    /// Adjacency file text: header `topology n=<n> kind=<kind>` then one
    /// `i j` line per coupling.
    pub fn to_adjacency_string(&self) -> String {
        let mut s = format!("topology n={} kind={}\n", self.n, self.kind.tag());
        for (i, j) in self.edges() {
            let _ = writeln!(s, "{i} {j}");
        }
        s
    }

    /// Parses an adjacency file. A `kind=` header token restores the kind,
    /// otherwise the result is `Custom`.
    pub fn parse_adjacency(text: &str) -> Result<Self> {
        let (n, kind, edges) = parse_adjacency_parts(text)?;
        let mut t = match kind {
            TopologyKind::Dense => return Ok(Topology::dense(n)),
            TopologyKind::ChimeraCell => Self::empty(kind, n, CELL),
            TopologyKind::PegasusTile => Self::empty(kind, n, CELL),
            TopologyKind::Diagonal => Self::empty(kind, n, 1),
            TopologyKind::Custom => Self::empty(kind, n, n),
        };
        for (i, j) in edges {
            t.connect(i, j)?;
        }
        Ok(t)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_adjacency_string()).map_err(|e| Error::io(path, e))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::parse_adjacency(&text)
    }
}

fn parse_adjacency_parts(text: &str) -> Result<(usize, TopologyKind, Vec<(usize, usize)>)> {
    let mut header: Option<(usize, TopologyKind)> = None;
    let mut edges = Vec::new();
    for (lineno, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let mut toks = line.split_whitespace();
        if header.is_none() {
            if toks.next() != Some("topology") {
                return Err(Error::Parse(format!(
                    "line {}: expected `topology n=<n>` header",
                    lineno + 1
                )));
            }
            let mut n = None;
            let mut kind = TopologyKind::Custom;
            for tok in toks {
                match tok.split_once('=') {
                    Some(("n", v)) => {
                        n = Some(v.parse::<usize>().map_err(|_| {
                            Error::Parse(format!("line {}: bad size {v:?}", lineno + 1))
                        })?)
                    }
                    Some(("kind", v)) => kind = TopologyKind::from_tag(v)?,
                    _ => {
                        return Err(Error::Parse(format!(
                            "line {}: unexpected header token {tok:?}",
                            lineno + 1
                        )))
                    }
                }
            }
            let n = n.ok_or_else(|| Error::Parse("topology header lacks n=<n>".into()))?;
            header = Some((n, kind));
            continue;
        }
        let parse = |t: Option<&str>| -> Result<usize> {
            t.and_then(|s| s.parse().ok())
                .ok_or_else(|| Error::Parse(format!("line {}: expected `i j`", lineno + 1)))
        };
        let i = parse(toks.next())?;
        let j = parse(toks.next())?;
        if toks.next().is_some() {
            return Err(Error::Parse(format!("line {}: trailing tokens", lineno + 1)));
        }
        edges.push((i, j));
    }
    let (n, kind) = header.ok_or_else(|| Error::Parse("empty topology file".into()))?;
    Ok((n, kind, edges))
}

/// One Chimera unit cell: `K4,4` between qubits `{0..3}` and `{4..7}`.
pub fn chimera_cell() -> Topology {
    let mut t = Topology::empty(TopologyKind::ChimeraCell, CELL, CELL);
    t.add_k44_cell(0);
    t
}

/// Four `K4,4` cells (32 qubits) plus the inter-cell couplings listed in
/// `intercell` (adjacency file text with header `topology n=32`).
pub fn pegasus_tile(intercell: &str) -> Result<Topology> {
    let (n, _, edges) = parse_adjacency_parts(intercell)?;
    if n != 4 * CELL {
        return Err(Error::Parse(format!(
            "pegasus tile adjacency must have n=32, found n={n}"
        )));
    }
    let mut t = Topology::empty(TopologyKind::PegasusTile, n, CELL);
    for c in 0..4 {
        t.add_k44_cell(c * CELL);
    }
    for (i, j) in edges {
        t.connect(i, j)?;
    }
    Ok(t)
}

pub fn pegasus_tile_default() -> Topology {
    pegasus_tile(DEFAULT_PEGASUS_INTERCELL).expect("shipped adjacency file is valid")
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn chimera_shape() {
        let t = chimera_cell();
        assert_eq!(t.free_parameter_index().len(), 24);
        for a in 0..4 {
            for b in 0..4 {
                assert!(!t.allows(a, b) || a == b);
                assert!(t.allows(a, b + 4));
            }
        }
    }

    #[test]
    fn free_index_layouts() {
        assert_eq!(Topology::dense(9).free_parameter_index().len(), 45);
        let d = Topology::diagonal(5).free_parameter_index();
        assert_eq!(d, (0..5).map(|i| (i, i)).collect::<Vec<_>>());
        let idx = chimera_cell().free_parameter_index();
        assert_eq!(&idx[..3], &[(0, 0), (0, 4), (0, 5)]);
    }

    #[test]
    fn pegasus_default_and_empty() {
        let t = pegasus_tile_default();
        assert_eq!(t.n(), 32);
        for c in 0..4 {
            let base = 8 * c;
            for a in 0..4 {
                for b in 4..8 {
                    assert!(t.allows(base + a, base + b));
                }
            }
        }
        assert!(t.allows(0, 8) && t.allows(23, 31));
        assert_eq!(t.edges().len(), 4 * 16 + 24);

        let empty = pegasus_tile("topology n=32\n").unwrap();
        assert_eq!(empty.edges().len(), 64);
        for i in 0..32 {
            for j in 0..32 {
                if i / 8 != j / 8 {
                    assert!(!empty.allows(i, j));
                }
            }
        }
    }

    #[test]
    fn adjacency_round_trip() {
        for t in [
            pegasus_tile_default(),
            chimera_cell(),
            Topology::dense(5),
            Topology::diagonal(3),
            Topology::custom(4, &[(0, 3), (1, 2)]).unwrap(),
        ] {
            let back = Topology::parse_adjacency(&t.to_adjacency_string()).unwrap();
            assert_eq!(back, t);
        }
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("t.topology");
        let t = pegasus_tile_default();
        t.save(&p).unwrap();
        assert_eq!(Topology::load(&p).unwrap(), t);
    }

    #[test]
    fn malformed_adjacency() {
        assert!(pegasus_tile("topology n=32\n0 x\n").is_err());
        assert!(pegasus_tile("topology n=16\n").is_err());
        assert!(pegasus_tile("0 1\n").is_err());
        assert!(pegasus_tile("topology n=32\n0 40\n").is_err());
        assert!(Topology::parse_adjacency("").is_err());
        assert!(Topology::parse_adjacency("topology n=4 kind=weird\n").is_err());
    }
}
