use std::collections::{BTreeMap, BTreeSet};

use petgraph::algo::tarjan_scc;
use petgraph::graph::DiGraph;
use serde::Serialize;

use crate::model::Taxonomy;

/// Every invariant violation found in a taxonomy. Empty iff the taxonomy is
/// well formed.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize)]
pub struct ValidationReport {
    /// Each entry lists the members of one cycle, first member repeated at
    /// the end.
    pub cycles: Vec<Vec<String>>,
    /// Edges whose child is not exactly one level below the parent.
    pub cross_level_edges: Vec<(String, String)>,
    /// Non-root nodes without any parent.
    pub orphans: Vec<String>,
    /// Edges naming a label that is not a node.
    pub unknown_endpoints: Vec<(String, String)>,
    pub duplicate_labels: Vec<String>,
    /// Nodes whose level is not below `level_count`.
    pub level_overflow: Vec<String>,
}

impl ValidationReport {
    pub fn is_empty(&self) -> bool {
        self.cycles.is_empty()
            && self.cross_level_edges.is_empty()
            && self.orphans.is_empty()
            && self.unknown_endpoints.is_empty()
            && self.duplicate_labels.is_empty()
            && self.level_overflow.is_empty()
    }
}

/// All non-trivial strongly connected components of the edge graph (plus
/// self-loops), each rendered as a closed walk.
pub(crate) fn find_cycles(edges: &BTreeSet<(String, String)>) -> Vec<Vec<String>> {
    let mut graph = DiGraph::<&str, ()>::new();
    let mut index = BTreeMap::new();
    for (c, p) in edges {
        for label in [c.as_str(), p.as_str()] {
            index.entry(label).or_insert_with(|| graph.add_node(label));
        }
        graph.add_edge(index[c.as_str()], index[p.as_str()], ());
    }
    let mut cycles = Vec::new();
    for scc in tarjan_scc(&graph) {
        let members: BTreeSet<&str> = scc.iter().map(|&i| graph[i]).collect();
        let start = *members.iter().next().expect("scc is non-empty");
        if members.len() == 1 && !edges.contains(&(start.to_string(), start.to_string())) {
            continue;
        }
        // Walk inside the component from its smallest member back to it.
        let mut walk = vec![start.to_string()];
        let mut seen = BTreeSet::from([start]);
        let mut node = start;
        loop {
            let next = edges
                .range((node.to_string(), String::new())..)
                .take_while(|(c, _)| c == node)
                .map(|(_, p)| p.as_str())
                .filter(|p| members.contains(p))
                .find(|p| *p == start || !seen.contains(p));
            match next {
                Some(p) if p == start => {
                    walk.push(start.to_string());
                    break;
                }
                Some(p) => {
                    seen.insert(p);
                    walk.push(p.to_string());
                    node = p;
                }
                None => {
                    // Dead end inside the component; report membership instead.
                    walk = members.iter().map(|s| s.to_string()).collect();
                    walk.push(start.to_string());
                    break;
                }
            }
        }
        cycles.push(walk);
    }
    cycles.sort();
    cycles
}

pub(crate) fn find_cycle(edges: &BTreeSet<(String, String)>) -> Option<Vec<String>> {
    find_cycles(edges).into_iter().next()
}

pub fn validate_taxonomy(taxonomy: &Taxonomy) -> ValidationReport {
    let mut report = ValidationReport::default();
    let mut level_of: BTreeMap<&str, usize> = BTreeMap::new();
    let mut dupes = BTreeSet::new();
    for node in &taxonomy.nodes {
        if level_of.insert(node.label.as_str(), node.level).is_some() {
            dupes.insert(node.label.clone());
        }
        if node.level >= taxonomy.level_count {
            report.level_overflow.push(node.label.clone());
        }
    }
    report.duplicate_labels = dupes.into_iter().collect();

    report.cycles = find_cycles(&taxonomy.parent_edges);

    let mut has_parent = BTreeSet::new();
    for (child, parent) in &taxonomy.parent_edges {
        match (level_of.get(child.as_str()), level_of.get(parent.as_str())) {
            (Some(&lc), Some(&lp)) => {
                has_parent.insert(child.as_str());
                if lc != lp + 1 {
                    report.cross_level_edges.push((child.clone(), parent.clone()));
                }
            }
            _ => report.unknown_endpoints.push((child.clone(), parent.clone())),
        }
    }
    report.orphans = taxonomy
        .nodes
        .iter()
        .filter(|n| n.level > 0 && !has_parent.contains(n.label.as_str()))
        .map(|n| n.label.clone())
        .collect();
    report
}
