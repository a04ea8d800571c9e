use std::collections::HashMap;

use petgraph::algo::toposort;
use petgraph::graph::{DiGraph, NodeIndex};
use petgraph::visit::{Bfs, EdgeFiltered, EdgeRef, Reversed};
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::codec::Register;
use crate::error::{Error, Result};
use crate::rng;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum NodeKind {
    Encoder,
    Relay,
    Decoder,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Node {
    pub id: String,
    pub kind: NodeKind,
}

/// A directed link between node positions.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Edge {
    pub from: usize,
    pub to: usize,
}

/// An acyclic OR-forwarding network with exactly one decoder.
///
/// Encoders are numbered in order of appearance in the node list; that index
/// selects the input register they emit. Every node sends the OR of its own
/// input (zero for relays) and all words arriving on intact links.
#[derive(Clone, Debug)]
pub struct NetworkGraph {
    nodes: Vec<Node>,
    edges: Vec<Edge>,
    graph: DiGraph<usize, usize>,
    order: Vec<usize>,
    decoder: usize,
    encoders: Vec<usize>,
}

impl NetworkGraph {
    pub fn new(nodes: Vec<Node>, edges: Vec<Edge>) -> Result<Self> {
        let decoders: Vec<usize> = (0..nodes.len())
            .filter(|&i| nodes[i].kind == NodeKind::Decoder)
            .collect();
        let decoder = match decoders[..] {
            [d] => d,
            [] => return Err(Error::Network("graph has no decoder node".into())),
            _ => return Err(Error::Network(format!("graph has {} decoder nodes", decoders.len()))),
        };
        let mut graph = DiGraph::with_capacity(nodes.len(), edges.len());
        for i in 0..nodes.len() {
            graph.add_node(i);
        }
        for (e, edge) in edges.iter().enumerate() {
            if edge.from >= nodes.len() || edge.to >= nodes.len() {
                return Err(Error::Network(format!("edge {e} references a missing node")));
            }
            graph.add_edge(NodeIndex::new(edge.from), NodeIndex::new(edge.to), e);
        }
        let order = toposort(&graph, None)
            .map_err(|c| {
                Error::Network(format!(
                    "graph has a cycle through node {}",
                    nodes[c.node_id().index()].id
                ))
            })?
            .into_iter()
            .map(NodeIndex::index)
            .collect();
        let encoders = (0..nodes.len())
            .filter(|&i| nodes[i].kind == NodeKind::Encoder)
            .collect();
        Ok(Self {
            nodes,
            edges,
            graph,
            order,
            decoder,
            encoders,
        })
    }

    /// `n` encoders each linked directly to the decoder.
    pub fn single_hop(n: usize) -> Self {
        let mut nodes: Vec<Node> = (0..n)
            .map(|m| Node {
                id: format!("e{m}"),
                kind: NodeKind::Encoder,
            })
            .collect();
        nodes.push(Node {
            id: "d".into(),
            kind: NodeKind::Decoder,
        });
        let edges = (0..n).map(|m| Edge { from: m, to: n }).collect();
        Self::new(nodes, edges).expect("single-hop graph is valid")
    }

    pub fn nodes(&self) -> &[Node] {
        &self.nodes
    }

    pub fn edges(&self) -> &[Edge] {
        &self.edges
    }

    pub fn encoder_count(&self) -> usize {
        self.encoders.len()
    }

    /// Node position of encoder `m`.
    pub fn encoder_node(&self, m: usize) -> usize {
        self.encoders[m]
    }

    pub fn decoder_node(&self) -> usize {
        self.decoder
    }

    /// Edge indices incident to node `v`.
    pub fn edges_of(&self, v: usize) -> Vec<usize> {
        (0..self.edges.len())
            .filter(|&e| self.edges[e].from == v || self.edges[e].to == v)
            .collect()
    }

    fn intact(&self, failures: &[usize]) -> Result<Vec<bool>> {
        let mut ok = vec![true; self.edges.len()];
        for &f in failures {
            *ok.get_mut(f)
                .ok_or_else(|| Error::Network(format!("failed edge {f} does not exist")))? = false;
        }
        Ok(ok)
    }

    /// One synchronized round; returns the decoder's register.
    pub fn simulate(&self, inputs: &[Register], failures: &[usize]) -> Result<Register> {
        if inputs.len() != self.encoders.len() {
            return Err(Error::DimensionMismatch(format!(
                "{} inputs for {} encoders",
                inputs.len(),
                self.encoders.len()
            )));
        }
        let bits = inputs.first().map_or(0, Register::bits);
        if inputs.iter().any(|r| r.bits() != bits) {
            return Err(Error::DimensionMismatch("input registers differ in length".into()));
        }
        let ok = self.intact(failures)?;
        let mut out: Vec<Register> = vec![Register::new(bits); self.nodes.len()];
        for (m, &v) in self.encoders.iter().enumerate() {
            out[v] = inputs[m].clone();
        }
        for &v in &self.order {
            let mut word = out[v].clone();
            for e in self
                .graph
                .edges_directed(NodeIndex::new(v), petgraph::Direction::Incoming)
            {
                if ok[*e.weight()] {
                    word.or_assign(&out[e.source().index()]);
                }
            }
            out[v] = word;
        }
        Ok(out.swap_remove(self.decoder))
    }

    /// Whether each encoder has an intact path to the decoder.
    pub fn reachability(&self, failures: &[usize]) -> Result<Vec<bool>> {
        let ok = self.intact(failures)?;
        let filtered = EdgeFiltered::from_fn(Reversed(&self.graph), |e| ok[*e.weight()]);
        let mut seen = vec![false; self.nodes.len()];
        let mut bfs = Bfs::new(&filtered, NodeIndex::new(self.decoder));
        while let Some(v) = bfs.next(&filtered) {
            seen[v.index()] = true;
        }
        Ok(self.encoders.iter().map(|&v| seen[v]).collect())
    }
}

/// Topology file contents: a graph plus a static failure set.
#[derive(Clone, Debug)]
pub struct Topology {
    pub graph: NetworkGraph,
    pub failures: Vec<usize>,
}

#[derive(Serialize, Deserialize)]
#[serde(untagged)]
enum RawId {
    Num(u64),
    Text(String),
}

impl RawId {
    fn into_string(self) -> String {
        match self {
            RawId::Num(n) => n.to_string(),
            RawId::Text(s) => s,
        }
    }
}

#[derive(Serialize, Deserialize)]
struct RawNode {
    id: RawId,
    kind: NodeKind,
}

#[derive(Serialize, Deserialize)]
struct RawEdge {
    from: RawId,
    to: RawId,
}

#[derive(Serialize, Deserialize)]
struct RawTopology {
    nodes: Vec<RawNode>,
    edges: Vec<RawEdge>,
    #[serde(default)]
    failures: Vec<usize>,
}

impl Topology {
    pub fn from_json(text: &str) -> Result<Self> {
        let raw: RawTopology = serde_json::from_str(text)?;
        let nodes: Vec<Node> = raw
            .nodes
            .into_iter()
            .map(|n| Node {
                id: n.id.into_string(),
                kind: n.kind,
            })
            .collect();
        let mut index = HashMap::with_capacity(nodes.len());
        for (i, n) in nodes.iter().enumerate() {
            if index.insert(n.id.clone(), i).is_some() {
                return Err(Error::Network(format!("duplicate node id {:?}", n.id)));
            }
        }
        let lookup = |id: RawId| {
            let id = id.into_string();
            index
                .get(&id)
                .copied()
                .ok_or_else(|| Error::Network(format!("edge references unknown node {id:?}")))
        };
        let edges = raw
            .edges
            .into_iter()
            .map(|e| {
                Ok(Edge {
                    from: lookup(e.from)?,
                    to: lookup(e.to)?,
                })
            })
            .collect::<Result<Vec<_>>>()?;
        let graph = NetworkGraph::new(nodes, edges)?;
        graph.intact(&raw.failures)?;
        Ok(Self {
            graph,
            failures: raw.failures,
        })
    }

    pub fn to_json(&self) -> Result<String> {
        let g = &self.graph;
        let raw = RawTopology {
            nodes: g
                .nodes
                .iter()
                .map(|n| RawNode {
                    id: RawId::Text(n.id.clone()),
                    kind: n.kind,
                })
                .collect(),
            edges: g
                .edges
                .iter()
                .map(|e| RawEdge {
                    from: RawId::Text(g.nodes[e.from].id.clone()),
                    to: RawId::Text(g.nodes[e.to].id.clone()),
                })
                .collect(),
            failures: self.failures.clone(),
        };
        Ok(serde_json::to_string_pretty(&raw)?)
    }
}

/// Seeded generator of layered DAGs: encoders, `layers` relay layers of
/// `width` nodes, then the decoder. Each node links to every node of the
/// next layer with probability `edge_prob`, and always to at least one.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct LayeredDag {
    pub encoders: usize,
    pub layers: usize,
    pub width: usize,
    pub edge_prob: f64,
}

impl LayeredDag {
    pub fn generate(&self, seed: u64) -> Result<NetworkGraph> {
        if self.encoders == 0 || (self.layers > 0 && self.width == 0) {
            return Err(Error::InvalidParameter(
                "layered DAG needs encoders and nonempty layers".into(),
            ));
        }
        let mut rng = rng::stream(seed, &[]);
        let mut nodes = Vec::new();
        let mut layers: Vec<Vec<usize>> = Vec::new();
        let mut push_layer = |kind: NodeKind, count: usize, tag: &str, nodes: &mut Vec<Node>| {
            let ids: Vec<usize> = (nodes.len()..nodes.len() + count).collect();
            for (j, _) in ids.iter().enumerate() {
                nodes.push(Node {
                    id: format!("{tag}{}-{j}", layers.len()),
                    kind,
                });
            }
            layers.push(ids);
        };
        push_layer(NodeKind::Encoder, self.encoders, "e", &mut nodes);
        for _ in 0..self.layers {
            push_layer(NodeKind::Relay, self.width, "r", &mut nodes);
        }
        push_layer(NodeKind::Decoder, 1, "d", &mut nodes);
        let mut edges = Vec::new();
        for pair in layers.windows(2) {
            let (src, dst) = (&pair[0], &pair[1]);
            for &a in src {
                let before = edges.len();
                for &b in dst {
                    if rng.random::<f64>() < self.edge_prob {
                        edges.push(Edge { from: a, to: b });
                    }
                }
                if edges.len() == before {
                    let b = dst[rng.random_range(0..dst.len())];
                    edges.push(Edge { from: a, to: b });
                }
            }
        }
        NetworkGraph::new(nodes, edges)
    }
}
