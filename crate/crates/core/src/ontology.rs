//! The service network monitoring concept graph: an is-a taxonomy rooted at
//! `System`.
//!
//! `Service` appears twice in the taxonomy, once as a domain concept and once
//! as a performance level. The two are distinct concepts, labelled
//! `Service[ServiceDomainConcept]` and `Service[PerformanceLevels]`.

use std::collections::{BTreeMap, BTreeSet, HashSet, VecDeque};

use crate::error::{Result, SnmError};

pub const ROOT: &str = "System";

const SNM_TAXONOMY: &[(&str, &str)] = &[
    ("ServiceDomainConcept", "System"),
    ("QoS", "System"),
    ("PerformanceLevels", "System"),
    ("KPI", "System"),
    ("Service[ServiceDomainConcept]", "ServiceDomainConcept"),
    ("ServiceProvider", "ServiceDomainConcept"),
    ("ServiceConsumer", "ServiceDomainConcept"),
    ("ServiceHost", "ServiceDomainConcept"),
    ("TimeBasedQoS", "QoS"),
    ("SizeBasedQoS", "QoS"),
    ("CombinedQoS", "QoS"),
    ("EstimatedAttributes", "QoS"),
    ("Domain", "PerformanceLevels"),
    ("Node", "PerformanceLevels"),
    ("Service[PerformanceLevels]", "PerformanceLevels"),
    ("ServiceMessaging", "PerformanceLevels"),
    ("Server", "PerformanceLevels"),
    ("ResponseTime", "KPI"),
    ("Delay", "KPI"),
    ("Error", "KPI"),
    ("Loss", "KPI"),
    ("SLA", "KPI"),
    ("OperationsPerSecond", "KPI"),
    ("AvgDataBlocksPerTimeUnit", "KPI"),
];

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ConceptGraph {
    concepts: BTreeSet<String>,
    /// child -> parents
    parents: BTreeMap<String, BTreeSet<String>>,
}

impl Default for ConceptGraph {
    fn default() -> Self {
        let edges = SNM_TAXONOMY
            .iter()
            .map(|(c, p)| (c.to_string(), p.to_string()));
        let concepts = std::iter::once(ROOT.to_string())
            .chain(SNM_TAXONOMY.iter().map(|(c, _)| c.to_string()));
        ConceptGraph::new(concepts, edges).expect("built-in taxonomy is a rooted DAG")
    }
}

impl ConceptGraph {
    /// Builds a graph from concepts and `(child, parent)` is-a edges.
    ///
    /// Every edge endpoint must be a declared concept, the edges must be
    /// acyclic and every concept must reach [`ROOT`].
    pub fn new(
        concepts: impl IntoIterator<Item = String>,
        isa_edges: impl IntoIterator<Item = (String, String)>,
    ) -> Result<Self> {
        let concepts: BTreeSet<String> = concepts.into_iter().collect();
        if !concepts.contains(ROOT) {
            return Err(SnmError::not_found("concept", ROOT));
        }
        let mut parents: BTreeMap<String, BTreeSet<String>> = BTreeMap::new();
        for (child, parent) in isa_edges {
            for end in [&child, &parent] {
                if !concepts.contains(end) {
                    return Err(SnmError::not_found("concept", end.clone()));
                }
            }
            if child == ROOT {
                return Err(SnmError::InvalidNetwork(format!(
                    "root concept {ROOT} cannot have a parent ({parent})"
                )));
            }
            parents.entry(child).or_default().insert(parent);
        }
        let graph = ConceptGraph { concepts, parents };
        for concept in &graph.concepts {
            if concept != ROOT && !graph.ancestors_unchecked(concept)?.iter().any(|a| a == ROOT) {
                return Err(SnmError::InvalidNetwork(format!(
                    "concept {concept} does not reach {ROOT}"
                )));
            }
        }
        Ok(graph)
    }

    pub fn concepts(&self) -> impl Iterator<Item = &str> {
        self.concepts.iter().map(String::as_str)
    }

    pub fn contains(&self, concept: &str) -> bool {
        self.concepts.contains(concept)
    }

    pub fn isa_edges(&self) -> impl Iterator<Item = (&str, &str)> {
        self.parents
            .iter()
            .flat_map(|(c, ps)| ps.iter().map(move |p| (c.as_str(), p.as_str())))
    }

    pub fn parents(&self, concept: &str) -> impl Iterator<Item = &str> {
        self.parents
            .get(concept)
            .into_iter()
            .flat_map(|ps| ps.iter().map(String::as_str))
    }

    pub fn children(&self, concept: &str) -> Vec<&str> {
        self.isa_edges()
            .filter(|(_, p)| *p == concept)
            .map(|(c, _)| c)
            .collect()
    }

    /// All ancestors of `concept`, nearest first. Concepts at equal distance
    /// come in name order.
    pub fn ancestors(&self, concept: &str) -> Result<Vec<String>> {
        if !self.contains(concept) {
            return Err(SnmError::not_found("concept", concept));
        }
        self.ancestors_unchecked(concept)
    }

    pub fn is_a(&self, concept: &str, ancestor: &str) -> Result<bool> {
        Ok(concept == ancestor || self.ancestors(concept)?.iter().any(|a| a == ancestor))
    }

    fn ancestors_unchecked(&self, concept: &str) -> Result<Vec<String>> {
        let mut out = Vec::new();
        let mut seen: HashSet<&str> = HashSet::new();
        let mut queue: VecDeque<&str> = self.parents(concept).collect();
        while let Some(next) = queue.pop_front() {
            if next == concept {
                return Err(SnmError::InvalidNetwork(format!(
                    "is-a cycle through {concept}"
                )));
            }
            if seen.insert(next) {
                out.push(next.to_string());
                queue.extend(self.parents(next));
            }
        }
        Ok(out)
    }
}
