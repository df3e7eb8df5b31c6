//! Citation-graph matching instances from Cora-format files.
//!
//! The graph is cut into equal-size sub-graphs by greedy growth (each step
//! adds the unassigned node with the most edges into the current part), and
//! each sub-graph is split into two halves by swap local search that
//! maximizes the number of crossing edges.

use std::collections::{BTreeSet, HashMap};
use std::fs;
use std::path::Path;

use rand::seq::SliceRandom;
use rand::Rng;
use serde::{Deserialize, Serialize};

use super::bipartite::{matching_instance, PerturbMode};
use super::default_split;
use crate::error::{Error, Result};
use crate::molp::{CostKind, Dataset};
use crate::rng::{stream_rng, Stream};

/// Undirected citation graph with binary word features.
#[derive(Debug, Clone, PartialEq)]
pub struct CoraGraph {
    pub ids: Vec<String>,
    pub features: Vec<Vec<f64>>,
    pub labels: Vec<String>,
    pub adjacency: Vec<BTreeSet<usize>>,
}

impl CoraGraph {
    pub fn len(&self) -> usize {
        self.ids.len()
    }

    pub fn is_empty(&self) -> bool {
        self.ids.is_empty()
    }

    pub fn connected(&self, u: usize, v: usize) -> bool {
        self.adjacency[u].contains(&v)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct CoraConfig {
    pub instances: usize,
    pub nodes_per: usize,
    pub rho: f64,
    pub perturb_mode: PerturbMode,
    pub third_objective: bool,
    pub seed: u64,
    pub denom: usize,
    /// Random restarts of the bipartition local search.
    pub restarts: usize,
}

impl Default for CoraConfig {
    fn default() -> Self {
        CoraConfig {
            instances: 27,
            nodes_per: 100,
            rho: 0.05,
            perturb_mode: PerturbMode::Intent,
            third_objective: false,
            seed: 0,
            denom: super::DEFAULT_DENOM,
            restarts: 4,
        }
    }
}

fn parse_error(path: &str, line: usize, message: impl Into<String>) -> Error {
    Error::Parse { path: path.into(), field: format!("line {line}"), message: message.into() }
}

/// Parses the tab-separated content and cites texts. Citations naming
/// unknown papers are skipped with a warning, self-citations are ignored.
pub fn parse_cora(content: &str, cites: &str, origin: (&str, &str)) -> Result<CoraGraph> {
    let mut ids = Vec::new();
    let mut features = Vec::new();
    let mut labels = Vec::new();
    let mut index = HashMap::new();
    let mut width = None;
    for (no, line) in content.lines().enumerate().filter(|(_, l)| !l.trim().is_empty()) {
        let fields: Vec<&str> = line.split('\t').collect();
        if fields.len() < 3 {
            return Err(parse_error(origin.0, no + 1, "expected id, word indicators and label"));
        }
        let words = &fields[1..fields.len() - 1];
        if *width.get_or_insert(words.len()) != words.len() {
            return Err(parse_error(origin.0, no + 1, format!("expected {} word columns", width.unwrap())));
        }
        let row = words
            .iter()
            .map(|w| match w.trim() {
                "0" => Ok(0.0),
                "1" => Ok(1.0),
                other => Err(parse_error(origin.0, no + 1, format!("word indicator `{other}` is not 0 or 1"))),
            })
            .collect::<Result<Vec<f64>>>()?;
        let id = fields[0].trim().to_string();
        if index.insert(id.clone(), ids.len()).is_some() {
            return Err(parse_error(origin.0, no + 1, format!("duplicate paper id `{id}`")));
        }
        ids.push(id);
        features.push(row);
        labels.push(fields[fields.len() - 1].trim().to_string());
    }
    let mut adjacency = vec![BTreeSet::new(); ids.len()];
    let mut unknown = 0usize;
    for (no, line) in cites.lines().enumerate().filter(|(_, l)| !l.trim().is_empty()) {
        let fields: Vec<&str> = line.split('\t').map(str::trim).collect();
        if fields.len() != 2 {
            return Err(parse_error(origin.1, no + 1, "expected `cited<TAB>citing`"));
        }
        match (index.get(fields[0]), index.get(fields[1])) {
            (Some(&a), Some(&b)) if a != b => {
                adjacency[a].insert(b);
                adjacency[b].insert(a);
            }
            (Some(_), Some(_)) => {}
            _ => unknown += 1,
        }
    }
    if unknown > 0 {
        log::warn!("{unknown} citations name unknown papers and were skipped");
    }
    Ok(CoraGraph { ids, features, labels, adjacency })
}

/// Greedy growth of `parts` node sets of `size` nodes each. Nodes beyond
/// `parts · size` stay unassigned.
pub fn partition_graph<R: Rng>(graph: &CoraGraph, parts: usize, size: usize, rng: &mut R) -> Vec<Vec<usize>> {
    let n = graph.len();
    let mut assigned = vec![false; n];
    let mut order: Vec<usize> = (0..n).collect();
    order.shuffle(rng);
    let mut seeds = order.into_iter();
    let mut out = Vec::with_capacity(parts);
    for _ in 0..parts {
        let mut part = Vec::with_capacity(size);
        let mut gain: HashMap<usize, usize> = HashMap::new();
        while part.len() < size {
            let next = gain
                .iter()
                .filter(|(v, _)| !assigned[**v])
                .max_by(|a, b| a.1.cmp(b.1).then(b.0.cmp(a.0)))
                .map(|(v, _)| *v)
                .or_else(|| seeds.by_ref().find(|v| !assigned[*v]));
            let Some(v) = next else { break };
            assigned[v] = true;
            gain.remove(&v);
            part.push(v);
            for &w in &graph.adjacency[v] {
                if !assigned[w] {
                    *gain.entry(w).or_insert(0) += 1;
                }
            }
        }
        part.sort_unstable();
        out.push(part);
    }
    out
}

fn cut_size(graph: &CoraGraph, left: &[usize], right: &[usize]) -> usize {
    left.iter().map(|&u| right.iter().filter(|&&v| graph.connected(u, v)).count()).sum()
}

/// Splits `nodes` (even count) into two halves with many crossing edges by
/// best-swap local search from `restarts` random starts.
pub fn bipartition<R: Rng>(
    graph: &CoraGraph,
    nodes: &[usize],
    restarts: usize,
    rng: &mut R,
) -> (Vec<usize>, Vec<usize>) {
    let half = nodes.len() / 2;
    let mut best: Option<(usize, Vec<usize>, Vec<usize>)> = None;
    for _ in 0..restarts.max(1) {
        let mut perm = nodes.to_vec();
        perm.shuffle(rng);
        let (mut left, mut right) = (perm[..half].to_vec(), perm[half..2 * half].to_vec());
        loop {
            let side_edges = |u: usize, side: &[usize]| side.iter().filter(|&&w| graph.connected(u, w)).count() as i64;
            let mut best_swap = None;
            let mut best_gain = 0i64;
            for (a, &u) in left.iter().enumerate() {
                let du = side_edges(u, &left) - side_edges(u, &right);
                for (b, &v) in right.iter().enumerate() {
                    let dv = side_edges(v, &right) - side_edges(v, &left);
                    let gain = du + dv + if graph.connected(u, v) { 2 } else { 0 };
                    if gain > best_gain {
                        best_gain = gain;
                        best_swap = Some((a, b));
                    }
                }
            }
            match best_swap {
                Some((a, b)) => std::mem::swap(&mut left[a], &mut right[b]),
                None => break,
            }
        }
        let cut = cut_size(graph, &left, &right);
        if best.as_ref().is_none_or(|(c, _, _)| cut > *c) {
            left.sort_unstable();
            right.sort_unstable();
            best = Some((cut, left, right));
        }
    }
    let (_, l, r) = best.expect("at least one restart");
    (l, r)
}

/// Matching instances from Cora-format files.
pub fn load_cora(content_path: &Path, cites_path: &Path, config: &CoraConfig) -> Result<Dataset> {
    let content = fs::read_to_string(content_path).map_err(|e| Error::io(content_path, e))?;
    let cites = fs::read_to_string(cites_path).map_err(|e| Error::io(cites_path, e))?;
    let graph = parse_cora(
        &content,
        &cites,
        (&content_path.display().to_string(), &cites_path.display().to_string()),
    )?;
    build_instances(&graph, config)
}

pub(crate) fn build_instances(graph: &CoraGraph, config: &CoraConfig) -> Result<Dataset> {
    if config.nodes_per < 2 || !config.nodes_per.is_multiple_of(2) || config.instances == 0 {
        return Err(Error::Config("nodes_per must be even and at least 2; instances positive".into()));
    }
    let available = graph.len() / config.nodes_per;
    if available == 0 {
        return Err(Error::Config(format!("{} nodes cannot fill one instance of {}", graph.len(), config.nodes_per)));
    }
    let parts = config.instances.min(available);
    let dropped = graph.len() - parts * config.nodes_per;
    if dropped > 0 {
        log::warn!("{dropped} nodes do not fill an instance and were dropped");
    }
    let mut prng = stream_rng(config.seed, Stream::Partition, 0);
    let groups = partition_graph(graph, parts, config.nodes_per, &mut prng);
    let mut instances = Vec::with_capacity(parts);
    for (id, group) in groups.iter().enumerate() {
        let (left, right) = bipartition(graph, group, config.restarts, &mut prng);
        let feats = |side: &[usize]| side.iter().map(|&u| graph.features[u].clone()).collect::<Vec<_>>();
        let mut y1 = Vec::with_capacity(left.len() * right.len());
        for &u in &left {
            for &v in &right {
                y1.push(if graph.connected(u, v) { 1.0 } else { 0.0 });
            }
        }
        let mut rng = stream_rng(config.seed, Stream::Data, id as u64);
        instances.push(matching_instance(
            id,
            &feats(&left),
            &feats(&right),
            y1,
            config.rho,
            config.perturb_mode,
            config.third_objective,
            config.denom,
            &mut rng,
        )?);
    }
    let cost_kind = if config.third_objective { CostKind::Real } else { CostKind::Probability };
    Ok(Dataset { split: default_split(parts), instances, cost_kind })
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    const TOY_CONTENT: &str = "a\t1\t0\tx\nb\t0\t1\tx\nc\t1\t1\ty\nd\t0\t0\ty\n";
    const TOY_CITES: &str = "a\tb\nc\td\na\tc\n";

    fn brute_force_cut(g: &CoraGraph) -> usize {
        let n = g.len();
        (0u32..1 << n)
            .filter(|m| m.count_ones() as usize == n / 2)
            .map(|m| {
                let l: Vec<usize> = (0..n).filter(|i| m >> i & 1 == 1).collect();
                let r: Vec<usize> = (0..n).filter(|i| m >> i & 1 == 0).collect();
                cut_size(g, &l, &r)
            })
            .max()
            .unwrap()
    }

    #[test]
    fn toy_bipartition_matches_brute_force() {
        let g = parse_cora(TOY_CONTENT, TOY_CITES, ("c", "e")).unwrap();
        assert_eq!(g.len(), 4);
        assert!(g.connected(1, 0));
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let (l, r) = bipartition(&g, &[0, 1, 2, 3], 1, &mut rng);
        assert!(cut_size(&g, &l, &r) >= brute_force_cut(&g));
        assert_eq!(brute_force_cut(&g), 3);
    }

    #[test]
    fn malformed_rows_report_line_numbers() {
        let err = parse_cora("a\t1\t0\tx\nb\t2\t0\tx\n", "", ("content", "cites")).unwrap_err();
        assert!(matches!(err, Error::Parse { ref field, .. } if field == "line 2"), "{err}");
        let err = parse_cora(TOY_CONTENT, "a\tb\nc\n", ("content", "cites")).unwrap_err();
        assert!(matches!(err, Error::Parse { ref path, ref field, .. } if path == "cites" && field == "line 2"));
        let err = parse_cora("a\t1\tx\nb\t1\t0\tx\n", "", ("content", "cites")).unwrap_err();
        assert!(matches!(err, Error::Parse { ref field, .. } if field == "line 2"));
    }

    fn ring(n: usize) -> (String, String) {
        let content: String = (0..n).map(|i| format!("p{i}\t{}\t{}\tl\n", i % 2, (i / 2) % 2)).collect();
        let cites: String = (0..n).map(|i| format!("p{i}\tp{}\n", (i + 1) % n)).collect();
        (content, cites)
    }

    #[test]
    fn trailing_nodes_dropped_and_sizes_respected() {
        let (content, cites) = ring(27);
        let g = parse_cora(&content, &cites, ("c", "e")).unwrap();
        let cfg = CoraConfig { instances: 5, nodes_per: 6, restarts: 2, ..CoraConfig::default() };
        let ds = build_instances(&g, &cfg).unwrap();
        assert_eq!(ds.instances.len(), 4);
        for inst in &ds.instances {
            assert_eq!(inst.n_vars, 9);
            assert_eq!(inst.features[0].len(), 4);
            inst.validate().unwrap();
        }
        let ds2 = build_instances(&g, &cfg).unwrap();
        assert_eq!(ds, ds2);
    }

    #[test]
    fn greedy_parts_are_disjoint_and_local() {
        let (content, cites) = ring(40);
        let g = parse_cora(&content, &cites, ("c", "e")).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let parts = partition_graph(&g, 4, 10, &mut rng);
        let mut all: Vec<usize> = parts.iter().flatten().copied().collect();
        all.sort_unstable();
        all.dedup();
        assert_eq!(all.len(), 40);
        // greedy growth on a ring keeps the first part contiguous: 9 internal edges
        let internal: usize = parts[0].iter().map(|&u| parts[0].iter().filter(|&&v| g.connected(u, v)).count()).sum();
        assert_eq!(internal / 2, 9);
    }
}
