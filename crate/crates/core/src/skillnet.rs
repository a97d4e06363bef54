//! The skill co-occurrence network and the pseudo-documents derived from it.

use std::collections::{BTreeMap, BTreeSet};
use std::io::{BufRead, Write};

use serde::{Deserialize, Serialize};

use crate::corpus::{JobPosting, SkillId};
use crate::error::{Error, Result};
use crate::taxonomy::NUM_LABELS;

/// Undirected weighted co-occurrence graph. Each edge is stored once with
/// `i < j`; its weight is the number of postings mentioning both skills.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct SkillNet {
    nodes: BTreeSet<SkillId>,
    edges: BTreeMap<(SkillId, SkillId), u32>,
}

impl SkillNet {
    pub fn build(postings: &[JobPosting]) -> Self {
        let mut net = SkillNet::default();
        for p in postings {
            net.add_posting(&p.skills);
        }
        net
    }

    /// Adds one posting's skills. Repeated mentions count once.
    pub fn add_posting(&mut self, skills: &[SkillId]) {
        let distinct: BTreeSet<SkillId> = skills.iter().copied().collect();
        let distinct: Vec<SkillId> = distinct.into_iter().collect();
        for (a, &i) in distinct.iter().enumerate() {
            self.nodes.insert(i);
            for &j in &distinct[a + 1..] {
                *self.edges.entry((i, j)).or_insert(0) += 1;
            }
        }
    }

    /// Sums another partial network into this one.
    pub fn merge(&mut self, other: SkillNet) {
        self.nodes.extend(other.nodes);
        for (e, w) in other.edges {
            *self.edges.entry(e).or_insert(0) += w;
        }
    }

    pub fn nodes(&self) -> impl Iterator<Item = SkillId> + '_ {
        self.nodes.iter().copied()
    }

    pub fn num_nodes(&self) -> usize {
        self.nodes.len()
    }

    pub fn num_edges(&self) -> usize {
        self.edges.len()
    }

    pub fn weight(&self, a: SkillId, b: SkillId) -> u32 {
        let key = if a < b { (a, b) } else { (b, a) };
        self.edges.get(&key).copied().unwrap_or(0)
    }

    pub fn edges(&self) -> impl Iterator<Item = (SkillId, SkillId, u32)> + '_ {
        self.edges.iter().map(|(&(i, j), &w)| (i, j, w))
    }

    /// Neighbors of every node, each list sorted by neighbor id.
    pub fn adjacency(&self) -> BTreeMap<SkillId, Vec<(SkillId, u32)>> {
        let mut adj: BTreeMap<SkillId, Vec<(SkillId, u32)>> =
            self.nodes.iter().map(|&n| (n, Vec::new())).collect();
        for (&(i, j), &w) in &self.edges {
            adj.entry(i).or_default().push((j, w));
            adj.entry(j).or_default().push((i, w));
        }
        for list in adj.values_mut() {
            list.sort_unstable();
        }
        adj
    }

    /// Edge list as `skill_i,skill_j,weight` lines, ascending by id pair.
    pub fn write_edge_list<W: Write>(&self, mut out: W) -> Result<()> {
        for (i, j, w) in self.edges() {
            writeln!(out, "{i},{j},{w}")?;
        }
        Ok(())
    }

    pub fn read_edge_list<R: BufRead>(reader: R) -> Result<Self> {
        let mut net = SkillNet::default();
        for (n, line) in reader.lines().enumerate() {
            let line = line?;
            if line.trim().is_empty() {
                continue;
            }
            let bad = |reason: &str| Error::MalformedRecord {
                line: n + 1,
                reason: reason.to_string(),
            };
            let parts: Vec<&str> = line.split(',').map(str::trim).collect();
            if parts.len() != 3 {
                return Err(bad("expected skill_i,skill_j,weight"));
            }
            let i: SkillId = parts[0].parse().map_err(|_| bad("bad skill id"))?;
            let j: SkillId = parts[1].parse().map_err(|_| bad("bad skill id"))?;
            let w: u32 = parts[2].parse().map_err(|_| bad("bad weight"))?;
            if i >= j || w == 0 {
                return Err(bad("edges must have i < j and positive weight"));
            }
            net.nodes.insert(i);
            net.nodes.insert(j);
            net.edges.insert((i, j), w);
        }
        Ok(net)
    }
}

/// How neighbor multiplicity becomes token count.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum MultiplicityMode {
    /// A neighbor contributes as many tokens as its edge weight.
    #[default]
    Weighted,
    /// Every neighbor contributes one token.
    Binary,
}

impl std::str::FromStr for MultiplicityMode {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, String> {
        match s.to_ascii_lowercase().as_str() {
            "weighted" => Ok(MultiplicityMode::Weighted),
            "binary" => Ok(MultiplicityMode::Binary),
            other => Err(format!("unknown multiplicity mode `{other}` (weighted|binary)")),
        }
    }
}

/// A central skill as a document: neighbor tokens plus the topics its
/// criteria labels allow.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PseudoDocument {
    pub central_skill: SkillId,
    /// `(skill, count)`, ascending by skill, counts positive.
    pub tokens: Vec<(SkillId, u32)>,
    /// Allowed topics (indices where the label vector is 1), ascending.
    pub lambda: Vec<usize>,
}

impl PseudoDocument {
    pub fn new(central_skill: SkillId, tokens: Vec<(SkillId, u32)>, lambda: Vec<usize>) -> Self {
        let mut tokens: Vec<(SkillId, u32)> = tokens.into_iter().filter(|t| t.1 > 0).collect();
        tokens.sort_unstable();
        let mut lambda = lambda;
        lambda.sort_unstable();
        lambda.dedup();
        PseudoDocument {
            central_skill,
            tokens,
            lambda,
        }
    }

    /// `N_m`.
    pub fn len(&self) -> usize {
        self.tokens.iter().map(|&(_, c)| c as usize).sum()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Tokens expanded one entry per occurrence, in skill order.
    pub fn expanded(&self) -> impl Iterator<Item = SkillId> + '_ {
        self.tokens
            .iter()
            .flat_map(|&(s, c)| std::iter::repeat_n(s, c as usize))
    }

    pub fn allows(&self, topic: usize) -> bool {
        self.lambda.binary_search(&topic).is_ok()
    }

    /// Dense 0/1 label vector of length `k`.
    pub fn lambda_vector(&self, k: usize) -> Vec<u8> {
        let mut v = vec![0u8; k];
        for &t in &self.lambda {
            if t < k {
                v[t] = 1;
            }
        }
        v
    }
}

/// Per-skill label support: how many postings mentioning the skill carry
/// each label.
fn label_support(postings: &[JobPosting]) -> BTreeMap<SkillId, [u32; NUM_LABELS]> {
    let mut support: BTreeMap<SkillId, [u32; NUM_LABELS]> = BTreeMap::new();
    for p in postings {
        let distinct: BTreeSet<SkillId> = p.skills.iter().copied().collect();
        for s in distinct {
            let row = support.entry(s).or_insert([0; NUM_LABELS]);
            for l in p.labels.iter() {
                row[l.index()] += 1;
            }
        }
    }
    support
}

fn threshold(row: &[u32; NUM_LABELS], min_support: u32) -> Vec<usize> {
    row.iter()
        .enumerate()
        .filter(|(_, &n)| n >= min_support.max(1))
        .map(|(k, _)| k)
        .collect()
}

/// Label vector of a skill as allowed-topic indices: label `k` is on iff the
/// skill appears in at least `min_support` postings carrying `k`.
pub fn criteria_vector(
    skill: SkillId,
    postings: &[JobPosting],
    min_support: u32,
) -> Result<Vec<usize>> {
    let mut row = [0u32; NUM_LABELS];
    let mut seen = false;
    for p in postings.iter().filter(|p| p.skills.contains(&skill)) {
        seen = true;
        for l in p.labels.iter() {
            row[l.index()] += 1;
        }
    }
    if !seen {
        return Err(Error::UnknownSkill(skill));
    }
    Ok(threshold(&row, min_support))
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize)]
pub struct DocumentReport {
    pub documents: usize,
    pub isolated: usize,
    pub zero_lambda: usize,
}

/// One document per skill with at least one neighbor and a non-empty label
/// vector. Isolated skills and skills with no supported label are counted
/// in the report and skipped.
pub fn make_documents(
    net: &SkillNet,
    postings: &[JobPosting],
    mode: MultiplicityMode,
    min_support: u32,
) -> (Vec<PseudoDocument>, DocumentReport) {
    let support = label_support(postings);
    let adjacency = net.adjacency();
    let mut report = DocumentReport::default();
    let mut docs = Vec::new();
    for (&skill, neighbors) in &adjacency {
        if neighbors.is_empty() {
            report.isolated += 1;
            continue;
        }
        let lambda = support
            .get(&skill)
            .map(|row| threshold(row, min_support))
            .unwrap_or_default();
        if lambda.is_empty() {
            report.zero_lambda += 1;
            continue;
        }
        let tokens = neighbors
            .iter()
            .map(|&(s, w)| match mode {
                MultiplicityMode::Weighted => (s, w),
                MultiplicityMode::Binary => (s, 1),
            })
            .collect();
        docs.push(PseudoDocument::new(skill, tokens, lambda));
    }
    report.documents = docs.len();
    (docs, report)
}

#[derive(Serialize, Deserialize)]
struct DocumentRecord {
    central_skill: SkillId,
    tokens: Vec<(SkillId, u32)>,
    lambda: Vec<usize>,
}

/// Line-delimited `{central_skill, tokens: [[skill, count]], lambda: [k]}`.
pub fn write_documents<W: Write>(mut out: W, docs: &[PseudoDocument]) -> Result<()> {
    for d in docs {
        let rec = DocumentRecord {
            central_skill: d.central_skill,
            tokens: d.tokens.clone(),
            lambda: d.lambda.clone(),
        };
        serde_json::to_writer(&mut out, &rec)?;
        out.write_all(b"\n")?;
    }
    Ok(())
}

pub fn read_documents<R: BufRead>(reader: R) -> Result<Vec<PseudoDocument>> {
    let mut docs = Vec::new();
    for line in reader.lines() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let rec: DocumentRecord = serde_json::from_str(&line)?;
        docs.push(PseudoDocument::new(rec.central_skill, rec.tokens, rec.lambda));
    }
    Ok(docs)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::PostingLabels;
    use crate::taxonomy::CriteriaLabel;

    fn posting(skills: &[SkillId], labels: &[&str]) -> JobPosting {
        JobPosting {
            post_id: String::new(),
            labels: labels
                .iter()
                .map(|l| l.parse::<CriteriaLabel>().unwrap())
                .collect::<PostingLabels>(),
            skills: skills.to_vec(),
        }
    }

    #[test]
    fn two_postings_sharing_a_pair_give_weight_two() {
        let net = SkillNet::build(&[posting(&[0, 1], &[]), posting(&[1, 0], &[])]);
        assert_eq!(net.weight(0, 1), 2);
        assert_eq!(net.weight(1, 0), 2);
        assert_eq!(net.num_edges(), 1);
    }

    #[test]
    fn single_skill_posting_adds_node_without_edges() {
        let net = SkillNet::build(&[posting(&[3], &[])]);
        assert_eq!(net.num_edges(), 0);
        assert_eq!(net.num_nodes(), 1);
    }

    #[test]
    fn repeated_mentions_count_once_per_posting() {
        let net = SkillNet::build(&[posting(&[0, 0, 1], &[])]);
        assert_eq!(net.weight(0, 1), 1);
    }

    #[test]
    fn merge_of_partitions_equals_full_build() {
        let ps = vec![
            posting(&[0, 1, 2], &[]),
            posting(&[1, 2], &[]),
            posting(&[2, 3, 0], &[]),
        ];
        let mut left = SkillNet::build(&ps[..1]);
        left.merge(SkillNet::build(&ps[1..]));
        assert_eq!(left, SkillNet::build(&ps));
    }

    #[test]
    fn criteria_vector_union_and_threshold() {
        let ps = vec![
            posting(&[0, 1], &["salary=high", "financing=listed"]),
            posting(&[0], &["salary=high"]),
            posting(&[1], &["salary=low"]),
        ];
        let high = "salary=high".parse::<CriteriaLabel>().unwrap().index();
        let listed = "financing=listed".parse::<CriteriaLabel>().unwrap().index();
        assert_eq!(criteria_vector(0, &ps, 1).unwrap(), vec![high, listed]);
        assert_eq!(criteria_vector(0, &ps, 2).unwrap(), vec![high]);
        assert!(criteria_vector(0, &ps, 3).unwrap().is_empty());
        assert!(matches!(criteria_vector(9, &ps, 1), Err(Error::UnknownSkill(9))));
    }

    #[test]
    fn documents_weighted_and_binary() {
        // 0-1 co-occur three times, 0-2 once.
        let ps = vec![
            posting(&[0, 1], &["salary=high"]),
            posting(&[0, 1], &["salary=high"]),
            posting(&[0, 1, 2], &["salary=high"]),
            posting(&[5], &["salary=high"]),
        ];
        let net = SkillNet::build(&ps);
        let (docs, report) = make_documents(&net, &ps, MultiplicityMode::Weighted, 1);
        let d0 = docs.iter().find(|d| d.central_skill == 0).unwrap();
        assert_eq!(d0.tokens, vec![(1, 3), (2, 1)]);
        assert_eq!(d0.len(), 4);
        assert_eq!(report.isolated, 1);
        assert!(docs.iter().all(|d| d.central_skill != 5));

        let (docs, _) = make_documents(&net, &ps, MultiplicityMode::Binary, 1);
        let d0 = docs.iter().find(|d| d.central_skill == 0).unwrap();
        assert_eq!(d0.tokens, vec![(1, 1), (2, 1)]);
        assert_eq!(d0.len(), 2);
    }

    #[test]
    fn zero_lambda_documents_are_dropped() {
        let ps = vec![posting(&[0, 1], &["salary=high"])];
        let net = SkillNet::build(&ps);
        let (docs, report) = make_documents(&net, &ps, MultiplicityMode::Weighted, 2);
        assert!(docs.is_empty());
        assert_eq!(report.zero_lambda, 2);
    }

    #[test]
    fn edge_list_is_sorted_and_readable() {
        let ps = vec![posting(&[3, 1, 2], &[]), posting(&[1, 2], &[])];
        let net = SkillNet::build(&ps);
        let mut buf = Vec::new();
        net.write_edge_list(&mut buf).unwrap();
        assert_eq!(String::from_utf8(buf.clone()).unwrap(), "1,2,2\n1,3,1\n2,3,1\n");
        let back = SkillNet::read_edge_list(buf.as_slice()).unwrap();
        assert_eq!(back.edges().collect::<Vec<_>>(), net.edges().collect::<Vec<_>>());
    }

    #[test]
    fn document_dump_round_trips() {
        let docs = vec![
            PseudoDocument::new(4, vec![(2, 3), (1, 1)], vec![7, 2]),
            PseudoDocument::new(1, vec![(4, 1)], vec![0]),
        ];
        let mut buf = Vec::new();
        write_documents(&mut buf, &docs).unwrap();
        let text = String::from_utf8(buf.clone()).unwrap();
        assert!(text.starts_with(r#"{"central_skill":4,"tokens":[[1,1],[2,3]],"lambda":[2,7]}"#));
        assert_eq!(read_documents(buf.as_slice()).unwrap(), docs);
    }
}
