//! Square lattices with open boundaries, site regions, and conformal rulers.
//!
//! Sites are indexed row-major: `index = y * width + x`, with `(0, 0)` at the
//! lower-left corner. Boundary positions run counterclockwise from `(0, 0)`
//! (bottom row left to right, right column upward, top row right to left,
//! left column downward). An endpoint id `e` sits just before boundary
//! position `e`, so an edge interval `(s, e)` covers positions `s..e` taken
//! cyclically.

use std::collections::VecDeque;
use std::fmt;

use serde::{Deserialize, Serialize};

#[derive(thiserror::Error, Debug, Clone, PartialEq)]
pub enum LatticeError {
    #[error("lattice must be at least 4x4, got {width}x{height}")]
    TooSmall { width: usize, height: usize },
    #[error("site {site} is outside a lattice of {n_sites} sites")]
    SiteOutOfRange { site: usize, n_sites: usize },
    #[error("rectangle [{x0},{x1})x[{y0},{y1}) does not fit the lattice")]
    BadRect { x0: usize, x1: usize, y0: usize, y1: usize },
    #[error("invalid bulk move: {0}")]
    InvalidMove(String),
}

/// Sorted, duplicate-free set of site indices.
#[derive(Clone, Debug, Default, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(from = "Vec<usize>", into = "Vec<usize>")]
pub struct Region(Vec<usize>);

impl From<Vec<usize>> for Region {
    fn from(sites: Vec<usize>) -> Self {
        Region::new(sites)
    }
}

impl From<Region> for Vec<usize> {
    fn from(r: Region) -> Self {
        r.0
    }
}

impl Region {
    pub fn new(mut sites: Vec<usize>) -> Self {
        sites.sort_unstable();
        sites.dedup();
        Region(sites)
    }

    pub fn empty() -> Self {
        Region(Vec::new())
    }

    pub fn sites(&self) -> &[usize] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn contains(&self, site: usize) -> bool {
        self.0.binary_search(&site).is_ok()
    }

    pub fn union(&self, other: &Region) -> Region {
        let mut v = Vec::with_capacity(self.len() + other.len());
        let (mut i, mut j) = (0, 0);
        while i < self.0.len() && j < other.0.len() {
            match self.0[i].cmp(&other.0[j]) {
                std::cmp::Ordering::Less => {
                    v.push(self.0[i]);
                    i += 1;
                }
                std::cmp::Ordering::Greater => {
                    v.push(other.0[j]);
                    j += 1;
                }
                std::cmp::Ordering::Equal => {
                    v.push(self.0[i]);
                    i += 1;
                    j += 1;
                }
            }
        }
        v.extend_from_slice(&self.0[i..]);
        v.extend_from_slice(&other.0[j..]);
        Region(v)
    }

    pub fn union_all<'a, I: IntoIterator<Item = &'a Region>>(regions: I) -> Region {
        regions
            .into_iter()
            .fold(Region::empty(), |acc, r| acc.union(r))
    }

    pub fn intersection(&self, other: &Region) -> Region {
        Region(
            self.0
                .iter()
                .copied()
                .filter(|s| other.contains(*s))
                .collect(),
        )
    }

    pub fn difference(&self, other: &Region) -> Region {
        Region(
            self.0
                .iter()
                .copied()
                .filter(|s| !other.contains(*s))
                .collect(),
        )
    }

    pub fn is_disjoint(&self, other: &Region) -> bool {
        self.intersection(other).is_empty()
    }

    /// Complement within `0..n_sites`.
    pub fn complement(&self, n_sites: usize) -> Region {
        Region((0..n_sites).filter(|s| !self.contains(*s)).collect())
    }

    /// Position of `site` inside the sorted site list.
    pub fn position(&self, site: usize) -> Option<usize> {
        self.0.binary_search(&site).ok()
    }
}

impl fmt::Display for Region {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{:?}", self.0)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Lattice {
    width: usize,
    height: usize,
}

impl Lattice {
    pub fn new(width: usize, height: usize) -> Result<Self, LatticeError> {
        if width < 4 || height < 4 {
            return Err(LatticeError::TooSmall { width, height });
        }
        Ok(Lattice { width, height })
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn n_sites(&self) -> usize {
        self.width * self.height
    }

    pub fn index(&self, x: usize, y: usize) -> usize {
        debug_assert!(x < self.width && y < self.height);
        y * self.width + x
    }

    pub fn coords(&self, site: usize) -> (usize, usize) {
        (site % self.width, site / self.width)
    }

    pub fn neighbors(&self, site: usize) -> impl Iterator<Item = usize> + '_ {
        let (x, y) = self.coords(site);
        let w = self.width;
        let h = self.height;
        [
            (x > 0).then(|| site - 1),
            (x + 1 < w).then(|| site + 1),
            (y > 0).then(|| site - w),
            (y + 1 < h).then(|| site + w),
        ]
        .into_iter()
        .flatten()
    }

    pub fn is_boundary(&self, site: usize) -> bool {
        let (x, y) = self.coords(site);
        x == 0 || y == 0 || x + 1 == self.width || y + 1 == self.height
    }

    /// Boundary sites in counterclockwise order starting at `(0, 0)`.
    pub fn boundary_cycle(&self) -> Vec<usize> {
        let (w, h) = (self.width, self.height);
        let mut out = Vec::with_capacity(2 * (w + h) - 4);
        out.extend((0..w).map(|x| self.index(x, 0)));
        out.extend((1..h).map(|y| self.index(w - 1, y)));
        out.extend((0..w - 1).rev().map(|x| self.index(x, h - 1)));
        out.extend((1..h - 1).rev().map(|y| self.index(0, y)));
        out
    }

    pub fn perimeter(&self) -> usize {
        2 * (self.width + self.height) - 4
    }

    /// Sites of the half-open rectangle `[x0, x1) x [y0, y1)`.
    pub fn rect(&self, x0: usize, x1: usize, y0: usize, y1: usize) -> Result<Region, LatticeError> {
        if x0 >= x1 || y0 >= y1 || x1 > self.width || y1 > self.height {
            return Err(LatticeError::BadRect { x0, x1, y0, y1 });
        }
        let mut v = Vec::with_capacity((x1 - x0) * (y1 - y0));
        for y in y0..y1 {
            for x in x0..x1 {
                v.push(self.index(x, y));
            }
        }
        Ok(Region(v))
    }

    pub fn check_region(&self, region: &Region) -> Result<(), LatticeError> {
        match region.sites().last() {
            Some(&s) if s >= self.n_sites() => Err(LatticeError::SiteOutOfRange {
                site: s,
                n_sites: self.n_sites(),
            }),
            _ => Ok(()),
        }
    }

    /// Boundary position a site of the depth-`depth` frame projects onto:
    /// the nearest side, ties going to the side met first from `(0, 0)`.
    fn frame_position(&self, site: usize, depth: usize) -> Option<usize> {
        let (w, h) = (self.width, self.height);
        let (x, y) = self.coords(site);
        let dist = [y, w - 1 - x, h - 1 - y, x];
        let (side, d) = dist
            .iter()
            .enumerate()
            .min_by_key(|(_, d)| **d)
            .expect("four sides");
        if *d >= depth {
            return None;
        }
        Some(match side {
            0 => x,
            1 => w - 1 + y,
            2 => w + h - 2 + (w - 1 - x),
            _ => (2 * w + h - 3 + (h - 1 - y)) % self.perimeter(),
        })
    }

    /// Splits the frame of sites within `depth` of the boundary into arcs;
    /// arc `i` projects onto boundary positions `cuts[i]..cuts[i + 1]` (cyclically).
    /// Returns the arcs and the remaining interior.
    pub fn frame_arcs(&self, depth: usize, cuts: &[usize]) -> Result<(Vec<Region>, Region), LatticeError> {
        let p = self.perimeter();
        let bad = |why: &str| LatticeError::InvalidMove(format!("frame partition: {why}"));
        if depth == 0 || 2 * depth >= self.width.min(self.height) {
            return Err(bad("depth must leave a nonempty interior"));
        }
        if cuts.len() < 3 || cuts.windows(2).any(|c| c[1] <= c[0]) || cuts[cuts.len() - 1] >= p {
            return Err(bad("need at least three strictly increasing cut positions"));
        }
        let n = cuts.len();
        let mut arcs = vec![Vec::new(); n];
        let mut interior = Vec::new();
        for site in 0..self.n_sites() {
            match self.frame_position(site, depth) {
                None => interior.push(site),
                Some(pos) => {
                    // last cut at or before pos, wrapping to the final arc
                    let k = cuts.iter().rposition(|c| *c <= pos).unwrap_or(n - 1);
                    arcs[k].push(site);
                }
            }
        }
        if arcs.iter().any(|a| a.is_empty()) {
            return Err(bad("every arc needs at least one site"));
        }
        Ok((arcs.into_iter().map(Region).collect(), Region(interior)))
    }

    /// Endpoint ids `(start, end)` of the boundary run of `region`, if the
    /// region meets the boundary in exactly one proper contiguous run.
    pub fn boundary_run(&self, region: &Region) -> Option<(usize, usize)> {
        let cycle = self.boundary_cycle();
        let p = cycle.len();
        let inside: Vec<bool> = cycle.iter().map(|s| region.contains(*s)).collect();
        let count = inside.iter().filter(|b| **b).count();
        if count == 0 || count == p {
            return None;
        }
        let starts: Vec<usize> = (0..p)
            .filter(|&i| inside[i] && !inside[(i + p - 1) % p])
            .collect();
        if starts.len() != 1 {
            return None;
        }
        let s = starts[0];
        Some((s, (s + count) % p))
    }

    /// Whether the sites of `region` form one edge-connected cluster.
    pub fn is_connected(&self, region: &Region) -> bool {
        let Some(&first) = region.sites().first() else {
            return true;
        };
        let mut seen = vec![false; region.len()];
        let mut queue = VecDeque::from([first]);
        seen[0] = true;
        let mut reached = 1;
        while let Some(s) = queue.pop_front() {
            for n in self.neighbors(s) {
                if let Some(k) = region.position(n) {
                    if !seen[k] {
                        seen[k] = true;
                        reached += 1;
                        queue.push_back(n);
                    }
                }
            }
        }
        reached == region.len()
    }

    pub fn are_adjacent(&self, r1: &Region, r2: &Region) -> bool {
        r1.sites()
            .iter()
            .any(|&s| self.neighbors(s).any(|n| r2.contains(n)))
    }
}

/// A contiguous stretch of the physical edge together with the region anchored on it.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EdgeInterval {
    pub label: String,
    pub endpoints: (usize, usize),
    pub anchored_region: Region,
}

impl EdgeInterval {
    pub fn from_region(lattice: &Lattice, label: &str, region: Region) -> Option<Self> {
        let endpoints = lattice.boundary_run(&region)?;
        Some(EdgeInterval {
            label: label.to_string(),
            endpoints,
            anchored_region: region,
        })
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum RulerPart {
    A,
    APrime,
    B,
    C,
    CPrime,
}

impl RulerPart {
    pub const ALL: [RulerPart; 5] = [
        RulerPart::A,
        RulerPart::APrime,
        RulerPart::B,
        RulerPart::C,
        RulerPart::CPrime,
    ];
}

/// Five-region partition `(A, A', B, C, C')` probing the edge triple `(a, b, c)`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ConformalRuler {
    pub a: Region,
    pub a_prime: Region,
    pub b: Region,
    pub c: Region,
    pub c_prime: Region,
    pub edge_triple: [String; 3],
}

impl ConformalRuler {
    pub fn new(a: Region, a_prime: Region, b: Region, c: Region, c_prime: Region) -> Self {
        ConformalRuler {
            a,
            a_prime,
            b,
            c,
            c_prime,
            edge_triple: ["a".into(), "b".into(), "c".into()],
        }
    }

    pub fn with_labels(mut self, labels: [&str; 3]) -> Self {
        self.edge_triple = labels.map(String::from);
        self
    }

    pub fn part(&self, p: RulerPart) -> &Region {
        match p {
            RulerPart::A => &self.a,
            RulerPart::APrime => &self.a_prime,
            RulerPart::B => &self.b,
            RulerPart::C => &self.c,
            RulerPart::CPrime => &self.c_prime,
        }
    }

    pub fn part_mut(&mut self, p: RulerPart) -> &mut Region {
        match p {
            RulerPart::A => &mut self.a,
            RulerPart::APrime => &mut self.a_prime,
            RulerPart::B => &mut self.b,
            RulerPart::C => &mut self.c,
            RulerPart::CPrime => &mut self.c_prime,
        }
    }

    pub fn union(&self) -> Region {
        Region::union_all(RulerPart::ALL.iter().map(|p| self.part(*p)))
    }

    /// Same regions with the roles of the `a` and `c` sides exchanged.
    pub fn reversed(&self) -> ConformalRuler {
        ConformalRuler {
            a: self.c.clone(),
            a_prime: self.c_prime.clone(),
            b: self.b.clone(),
            c: self.a.clone(),
            c_prime: self.a_prime.clone(),
            edge_triple: [
                self.edge_triple[2].clone(),
                self.edge_triple[1].clone(),
                self.edge_triple[0].clone(),
            ],
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Check {
    pub name: &'static str,
    pub passed: bool,
    pub offending: Vec<usize>,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ValidationReport {
    pub checks: Vec<Check>,
}

impl ValidationReport {
    pub fn all_passed(&self) -> bool {
        self.checks.iter().all(|c| c.passed)
    }

    pub fn failed(&self) -> Vec<&'static str> {
        self.checks
            .iter()
            .filter(|c| !c.passed)
            .map(|c| c.name)
            .collect()
    }

    fn push(&mut self, name: &'static str, offending: Vec<usize>) {
        self.checks.push(Check {
            name,
            passed: offending.is_empty(),
            offending,
        });
    }
}

/// Checks every geometric condition a conformal ruler must satisfy.
pub fn validate_ruler(lattice: &Lattice, ruler: &ConformalRuler) -> ValidationReport {
    let mut report = ValidationReport { checks: Vec::new() };
    let n = lattice.n_sites();

    let out_of_range: Vec<usize> = RulerPart::ALL
        .iter()
        .flat_map(|p| ruler.part(*p).sites().iter().copied())
        .filter(|s| *s >= n)
        .collect();
    report.push("sites_in_range", out_of_range.clone());
    if !out_of_range.is_empty() {
        return report;
    }

    let empty: Vec<usize> = [&ruler.a, &ruler.b, &ruler.c]
        .iter()
        .enumerate()
        .filter(|(_, r)| r.is_empty())
        .map(|(i, _)| i)
        .collect();
    report.push("abc_nonempty", empty);

    let mut overlap = Vec::new();
    for (i, p) in RulerPart::ALL.iter().enumerate() {
        for q in &RulerPart::ALL[i + 1..] {
            overlap.extend(ruler.part(*p).intersection(ruler.part(*q)).sites());
        }
    }
    report.push("disjoint", Region::new(overlap).0);

    let union = ruler.union();
    report.push(
        "connected",
        if lattice.is_connected(&union) {
            vec![]
        } else {
            union.sites().to_vec()
        },
    );

    let ac_touch: Vec<usize> = ruler
        .a
        .sites()
        .iter()
        .copied()
        .filter(|&s| lattice.neighbors(s).any(|nb| ruler.c.contains(nb)))
        .collect();
    report.push("a_c_separated", ac_touch);

    let shield = Region::union_all([&ruler.a, &ruler.a_prime, &ruler.c, &ruler.c_prime]);
    let exposed: Vec<usize> = ruler
        .b
        .sites()
        .iter()
        .flat_map(|&s| lattice.neighbors(s))
        .filter(|nb| !ruler.b.contains(*nb) && !shield.contains(*nb))
        .collect();
    report.push("b_shielded", Region::new(exposed).0);

    let mut bulk_touch = Vec::new();
    for r in [&ruler.a_prime, &ruler.c_prime] {
        bulk_touch.extend(r.sites().iter().copied().filter(|s| lattice.is_boundary(*s)));
    }
    report.push("primes_in_bulk", bulk_touch);

    let runs: Vec<Option<(usize, usize)>> = [&ruler.a, &ruler.b, &ruler.c]
        .iter()
        .map(|r| lattice.boundary_run(r))
        .collect();
    let mut anchoring = Vec::new();
    for (i, run) in runs.iter().enumerate() {
        if run.is_none() {
            anchoring.push(i);
        }
    }
    if anchoring.is_empty() {
        let (a, b, c) = (runs[0].unwrap(), runs[1].unwrap(), runs[2].unwrap());
        if a.1 != b.0 {
            anchoring.push(0);
        }
        if b.1 != c.0 {
            anchoring.push(2);
        }
    }
    report.push("edge_anchored", anchoring);

    report
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub enum MoveKind {
    Transfer { from: RulerPart, to: RulerPart },
    Grow { target: RulerPart },
    Shrink { source: RulerPart },
}

/// Local change of a ruler away from the physical edge.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BulkMove {
    pub kind: MoveKind,
    pub moved: Region,
}

/// Applies `mv` and re-validates. The edge triple is never touched.
pub fn deform_ruler(
    lattice: &Lattice,
    ruler: &ConformalRuler,
    mv: &BulkMove,
) -> Result<ConformalRuler, LatticeError> {
    lattice.check_region(&mv.moved)?;
    if mv.moved.is_empty() {
        return Err(LatticeError::InvalidMove("no sites moved".into()));
    }
    if let Some(s) = mv.moved.sites().iter().find(|s| lattice.is_boundary(**s)) {
        return Err(LatticeError::InvalidMove(format!(
            "site {s} lies on the physical boundary"
        )));
    }
    let mut out = ruler.clone();
    let union = ruler.union();
    match &mv.kind {
        MoveKind::Transfer { from, to } => {
            if from == to {
                return Err(LatticeError::InvalidMove("transfer onto itself".into()));
            }
            if !mv.moved.difference(ruler.part(*from)).is_empty() {
                return Err(LatticeError::InvalidMove(format!(
                    "moved sites are not all in {from:?}"
                )));
            }
            *out.part_mut(*from) = ruler.part(*from).difference(&mv.moved);
            *out.part_mut(*to) = ruler.part(*to).union(&mv.moved);
        }
        MoveKind::Grow { target } => {
            if !mv.moved.is_disjoint(&union) {
                return Err(LatticeError::InvalidMove(
                    "grown sites already belong to the ruler".into(),
                ));
            }
            *out.part_mut(*target) = ruler.part(*target).union(&mv.moved);
        }
        MoveKind::Shrink { source } => {
            if !mv.moved.difference(ruler.part(*source)).is_empty() {
                return Err(LatticeError::InvalidMove(format!(
                    "moved sites are not all in {source:?}"
                )));
            }
            *out.part_mut(*source) = ruler.part(*source).difference(&mv.moved);
        }
    }
    let report = validate_ruler(lattice, &out);
    if !report.all_passed() {
        return Err(LatticeError::InvalidMove(format!(
            "deformed ruler fails {:?}",
            report.failed()
        )));
    }
    Ok(out)
}
