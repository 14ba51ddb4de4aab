//! Partitions of the concept set into groups that a split must keep intact.

use std::collections::BTreeMap;
use std::fmt;
use std::fs::File;
use std::path::Path;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::dataset::{ConceptSet, SupercategoryMap};
use crate::embedding_ops::{top_pairs, ClusterAssignment};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Strategy {
    Random,
    Llm,
    Similarity,
    Clustering,
    Supercategory,
}

impl Strategy {
    pub const ALL: [Strategy; 5] = [
        Strategy::Random,
        Strategy::Llm,
        Strategy::Similarity,
        Strategy::Clustering,
        Strategy::Supercategory,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            Strategy::Random => "random",
            Strategy::Llm => "llm",
            Strategy::Similarity => "similarity",
            Strategy::Clustering => "clustering",
            Strategy::Supercategory => "supercategory",
        }
    }
}

impl fmt::Display for Strategy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Strategy {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Strategy::ALL
            .into_iter()
            .find(|st| st.as_str() == s)
            .ok_or_else(|| Error::InvalidArgument(format!("unknown strategy {s:?}")))
    }
}

/// Placement hint carried by a group into the splitter.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Hint {
    Free,
    /// Train unless the split objective says otherwise.
    PreferTrain,
    /// Always train.
    ForceTrain,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Group {
    pub members: Vec<usize>,
    pub hint: Hint,
}

/// Disjoint, complete, non-empty groups over concept ids `0..n`.
///
/// Members are sorted within each group and groups are ordered by their
/// smallest member, so two groupings with the same partition and hints
/// compare equal regardless of how they were produced.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Grouping {
    pub strategy: Strategy,
    pub coverage: f64,
    pub groups: Vec<Group>,
    #[serde(skip)]
    n_concepts: usize,
}

#[derive(Deserialize)]
struct GroupingFile {
    strategy: Strategy,
    #[allow(dead_code)]
    coverage: f64,
    groups: Vec<Group>,
}

impl Grouping {
    pub fn new(strategy: Strategy, n_concepts: usize, mut groups: Vec<Group>) -> Result<Self> {
        let mut seen = vec![false; n_concepts];
        for g in &mut groups {
            if g.members.is_empty() {
                return Err(Error::Validation("empty group".into()));
            }
            g.members.sort_unstable();
            for &m in &g.members {
                if m >= n_concepts {
                    return Err(Error::Validation(format!(
                        "group member {m} out of range for {n_concepts} concepts"
                    )));
                }
                if std::mem::replace(&mut seen[m], true) {
                    return Err(Error::Validation(format!("concept {m} appears in two groups")));
                }
            }
        }
        if let Some(m) = seen.iter().position(|s| !s) {
            return Err(Error::Validation(format!("concept {m} is not in any group")));
        }
        groups.sort_unstable_by_key(|g| g.members[0]);
        let grouped = groups
            .iter()
            .filter(|g| g.members.len() >= 2)
            .map(|g| g.members.len())
            .sum::<usize>();
        Ok(Self {
            strategy,
            coverage: grouped as f64 / n_concepts as f64,
            groups,
            n_concepts,
        })
    }

    pub fn from_json(text: &str, n_concepts: usize) -> Result<Self> {
        let file: GroupingFile = serde_json::from_str(text)?;
        Self::new(file.strategy, n_concepts, file.groups)
    }

    pub fn n_concepts(&self) -> usize {
        self.n_concepts
    }

    pub fn len(&self) -> usize {
        self.groups.len()
    }

    pub fn is_empty(&self) -> bool {
        self.groups.is_empty()
    }

    /// Group index of every concept.
    pub fn group_of(&self) -> Vec<usize> {
        let mut out = vec![0; self.n_concepts];
        for (g, group) in self.groups.iter().enumerate() {
            for &m in &group.members {
                out[m] = g;
            }
        }
        out
    }

    /// group size -> number of groups of that size
    pub fn size_histogram(&self) -> BTreeMap<usize, usize> {
        let mut hist = BTreeMap::new();
        for g in &self.groups {
            *hist.entry(g.members.len()).or_insert(0) += 1;
        }
        hist
    }

    pub fn singleton_fraction(&self) -> f64 {
        1.0 - self.coverage
    }
}

/// Minimal union-find with path halving; the smaller root wins a union so
/// component representatives are deterministic.
struct DisjointSets {
    parent: Vec<usize>,
}

impl DisjointSets {
    fn new(n: usize) -> Self {
        Self {
            parent: (0..n).collect(),
        }
    }

    fn find(&mut self, mut x: usize) -> usize {
        while self.parent[x] != x {
            self.parent[x] = self.parent[self.parent[x]];
            x = self.parent[x];
        }
        x
    }

    fn union(&mut self, a: usize, b: usize) {
        let (ra, rb) = (self.find(a), self.find(b));
        if ra != rb {
            let (lo, hi) = if ra < rb { (ra, rb) } else { (rb, ra) };
            self.parent[hi] = lo;
        }
    }

    fn components(mut self) -> Vec<Vec<usize>> {
        let n = self.parent.len();
        let mut by_root: BTreeMap<usize, Vec<usize>> = BTreeMap::new();
        for x in 0..n {
            let r = self.find(x);
            by_root.entry(r).or_default().push(x);
        }
        by_root.into_values().collect()
    }
}

fn closure_grouping(
    strategy: Strategy,
    n: usize,
    edges: impl IntoIterator<Item = (usize, usize)>,
    multi_hint: Hint,
) -> Result<Grouping> {
    let mut sets = DisjointSets::new(n);
    for (a, b) in edges {
        sets.union(a, b);
    }
    let groups = sets
        .components()
        .into_iter()
        .map(|members| Group {
            hint: if members.len() >= 2 { multi_hint } else { Hint::Free },
            members,
        })
        .collect();
    Grouping::new(strategy, n, groups)
}

fn singletons(n: usize) -> Vec<Group> {
    (0..n)
        .map(|i| Group {
            members: vec![i],
            hint: Hint::Free,
        })
        .collect()
}

/// Every concept on its own; randomness enters at split time.
pub fn group_random(cs: &ConceptSet) -> Grouping {
    Grouping::new(Strategy::Random, cs.len(), singletons(cs.len())).expect("singletons partition")
}

/// Concept-name pairs judged highly similar, e.g. by an LLM.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct PairList {
    pub pairs: Vec<(String, String)>,
}

impl PairList {
    pub fn load(path: &Path) -> Result<Self> {
        let shown = path.display();
        let file = File::open(path).map_err(|e| Error::io(path, e))?;
        let mut reader = csv::ReaderBuilder::new().has_headers(true).from_reader(file);
        let header = reader
            .headers()
            .map_err(|e| Error::format(&shown, e.to_string()))?
            .clone();
        if header.len() != 2 || &header[0] != "name_a" || &header[1] != "name_b" {
            return Err(Error::format(&shown, "malformed header: expected `name_a,name_b`"));
        }
        let mut pairs = Vec::new();
        for record in reader.records() {
            let record = record.map_err(|e| Error::format(&shown, e.to_string()))?;
            pairs.push((record[0].to_string(), record[1].to_string()));
        }
        Ok(Self { pairs })
    }

    pub fn write(&self, path: &Path) -> Result<()> {
        let mut w = csv::Writer::from_path(path).map_err(|e| Error::format(path.display(), e.to_string()))?;
        let err = |e: csv::Error| Error::format(path.display(), e.to_string());
        w.write_record(["name_a", "name_b"]).map_err(err)?;
        for (a, b) in &self.pairs {
            w.write_record([a, b]).map_err(err)?;
        }
        w.flush().map_err(|e| Error::io(path, e))
    }

    pub fn resolve(&self, cs: &ConceptSet) -> Result<Vec<(usize, usize)>> {
        self.pairs
            .iter()
            .enumerate()
            .map(|(row, (a, b))| {
                let lookup = |name: &str| {
                    cs.id_of(name)
                        .ok_or_else(|| Error::Validation(format!("unknown concept {name:?} in pair row {}", row + 1)))
                };
                let (ia, ib) = (lookup(a)?, lookup(b)?);
                if ia == ib {
                    return Err(Error::Validation(format!(
                        "pair row {} pairs {a:?} with itself",
                        row + 1
                    )));
                }
                Ok((ia, ib))
            })
            .collect()
    }
}

/// Connected components of the pair graph become train-only groups.
pub fn group_llm_pairs(cs: &ConceptSet, pairs: &PairList) -> Result<Grouping> {
    let edges = pairs.resolve(cs)?;
    closure_grouping(Strategy::Llm, cs.len(), edges, Hint::ForceTrain)
}

/// Connected components over the `k` most cosine-similar pairs, hinted
/// towards train.
pub fn group_similarity(cs: &ConceptSet, k: usize) -> Result<Grouping> {
    let pairs = top_pairs(cs, k)?;
    closure_grouping(
        Strategy::Similarity,
        cs.len(),
        pairs.into_iter().map(|p| (p.i, p.j)),
        Hint::PreferTrain,
    )
}

pub fn group_clustering(ca: &ClusterAssignment) -> Result<Grouping> {
    let mut members = vec![Vec::new(); ca.k];
    for (i, &c) in ca.assignment.iter().enumerate() {
        if c >= ca.k {
            return Err(Error::Validation(format!(
                "cluster id {c} out of range for k = {}",
                ca.k
            )));
        }
        members[c].push(i);
    }
    let groups = members
        .into_iter()
        .filter(|m| !m.is_empty())
        .map(|members| Group {
            members,
            hint: Hint::Free,
        })
        .collect();
    Grouping::new(Strategy::Clustering, ca.assignment.len(), groups)
}

pub fn group_supercategory(sm: Option<&SupercategoryMap>) -> Result<Grouping> {
    let sm = sm.ok_or_else(|| Error::Config("the supercategory strategy needs a supercategory map".into()))?;
    let mut members = vec![Vec::new(); sm.n_supercategories()];
    for (i, &s) in sm.assignment().iter().enumerate() {
        members[s].push(i);
    }
    let groups = members
        .into_iter()
        .filter(|m| !m.is_empty())
        .map(|members| Group {
            members,
            hint: Hint::Free,
        })
        .collect();
    Grouping::new(Strategy::Supercategory, sm.assignment().len(), groups)
}
