use std::collections::HashMap;

use super::{components, NodeId, Topology, TopologyError};

/// Result of loading a GraphML document, with cleanup bookkeeping.
#[derive(Debug, Clone)]
pub struct GraphmlLoad {
    pub topology: Topology,
    /// Original GraphML `id` of each retained node, indexed by dense node id.
    pub node_ids: Vec<String>,
    pub self_loops_dropped: usize,
    pub parallel_links_collapsed: usize,
    /// Components other than the largest one, which were discarded.
    pub components_discarded: usize,
    pub nodes_discarded: usize,
}

/// Parses GraphML (Internet Topology Zoo dialect). Only `node` ids and `edge`
/// `source`/`target` attributes are read; everything else is ignored. Self-loops
/// are dropped, parallel edges collapsed and only the largest connected
/// component is kept.
pub fn load_graphml(bytes: &[u8]) -> Result<GraphmlLoad, TopologyError> {
    let text = std::str::from_utf8(bytes).map_err(|e| TopologyError::GraphmlParse(format!("not UTF-8: {e}")))?;
    let doc = roxmltree::Document::parse(text).map_err(|e| TopologyError::GraphmlParse(e.to_string()))?;
    let root = doc.root_element();
    if root.tag_name().name() != "graphml" {
        return Err(TopologyError::GraphmlParse(format!("root element is <{}>, expected <graphml>", root.tag_name().name())));
    }
    let graph = root
        .children()
        .find(|n| n.is_element() && n.tag_name().name() == "graph")
        .ok_or_else(|| TopologyError::GraphmlParse("missing <graph> element".into()))?;
    let name = graph.attribute("id").unwrap_or("graphml").to_string();

    let pos = |node: &roxmltree::Node| {
        let p = doc.text_pos_at(node.range().start);
        format!("line {}, column {}", p.row, p.col)
    };

    let mut ids: Vec<String> = Vec::new();
    let mut index: HashMap<String, NodeId> = HashMap::new();
    for node in graph.children().filter(|n| n.is_element() && n.tag_name().name() == "node") {
        let id = node
            .attribute("id")
            .ok_or_else(|| TopologyError::GraphmlParse(format!("<node> at {} has no `id` attribute", pos(&node))))?;
        if index.insert(id.to_string(), ids.len()).is_some() {
            return Err(TopologyError::GraphmlParse(format!("<node id={id:?}> at {} is declared twice", pos(&node))));
        }
        ids.push(id.to_string());
    }

    let mut raw_links = Vec::new();
    let mut self_loops = 0;
    for edge in graph.children().filter(|n| n.is_element() && n.tag_name().name() == "edge") {
        let endpoint = |attr: &str| -> Result<NodeId, TopologyError> {
            let id = edge.attribute(attr).ok_or_else(|| {
                TopologyError::GraphmlParse(format!("<edge> at {} has no `{attr}` attribute", pos(&edge)))
            })?;
            index.get(id).copied().ok_or_else(|| {
                TopologyError::GraphmlParse(format!("<edge> at {} references undeclared node {id:?}", pos(&edge)))
            })
        };
        let (u, v) = (endpoint("source")?, endpoint("target")?);
        if u == v {
            self_loops += 1;
        } else {
            raw_links.push((u.min(v), u.max(v)));
        }
    }
    let before = raw_links.len();
    raw_links.sort_unstable();
    raw_links.dedup();
    let parallel = before - raw_links.len();

    let mut adj = vec![Vec::new(); ids.len()];
    for &(u, v) in &raw_links {
        adj[u].push(v);
        adj[v].push(u);
    }
    let comps = components(&adj);
    // Largest component; on ties the one containing the smallest node id.
    let largest = comps.iter().enumerate().max_by_key(|(i, c)| (c.len(), std::cmp::Reverse(*i))).map(|(_, c)| c.clone());
    let keep = match largest {
        Some(c) if c.len() >= 2 => c,
        _ => return Err(TopologyError::EmptyAfterCleanup),
    };
    let mut remap = vec![usize::MAX; ids.len()];
    for (new, &old) in keep.iter().enumerate() {
        remap[old] = new;
    }
    let links = raw_links
        .iter()
        .filter(|(u, _)| remap[*u] != usize::MAX)
        .map(|&(u, v)| (remap[u], remap[v]));
    let topology = Topology::new(name, keep.len(), links)?;
    Ok(GraphmlLoad {
        node_ids: keep.iter().map(|&old| ids[old].clone()).collect(),
        self_loops_dropped: self_loops,
        parallel_links_collapsed: parallel,
        components_discarded: comps.len() - 1,
        nodes_discarded: ids.len() - keep.len(),
        topology,
    })
}

/// Serializes a topology as minimal GraphML readable by [`load_graphml`].
pub fn to_graphml(topo: &Topology) -> String {
    use std::fmt::Write as _;
    let mut out = String::from(
        "<?xml version=\"1.0\" encoding=\"utf-8\"?>\n<graphml xmlns=\"http://graphml.graphdrawing.org/xmlns\">\n",
    );
    let _ = writeln!(out, "  <graph edgedefault=\"undirected\" id=\"{}\">", topo.name());
    for v in topo.nodes() {
        let _ = writeln!(out, "    <node id=\"{v}\"/>");
    }
    for (u, v) in topo.links() {
        let _ = writeln!(out, "    <edge source=\"{u}\" target=\"{v}\"/>");
    }
    out.push_str("  </graph>\n</graphml>\n");
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    fn doc(body: &str) -> String {
        format!(
            "<?xml version=\"1.0\"?><graphml xmlns=\"http://graphml.graphdrawing.org/xmlns\">\
             <key attr.name=\"label\" attr.type=\"string\" for=\"node\" id=\"d1\"/>\
             <graph edgedefault=\"undirected\">{body}</graph></graphml>"
        )
    }

    #[test]
    fn three_node_line() {
        let g = doc(r#"<node id="A"><data key="d1">a</data></node><node id="B"/><node id="C"/>
                       <edge source="A" target="B"/><edge source="B" target="C"/>"#);
        let l = load_graphml(g.as_bytes()).unwrap();
        assert_eq!(l.topology.node_count(), 3);
        assert_eq!(l.topology.links().len(), 2);
        assert_eq!(l.node_ids, vec!["A", "B", "C"]);
    }

    #[test]
    fn duplicates_loops_and_small_components_cleaned() {
        let g = doc(r#"<node id="A"/><node id="B"/><node id="C"/><node id="D"/><node id="E"/><node id="F"/>
                       <edge source="A" target="B"/><edge source="B" target="A"/><edge source="A" target="B"/>
                       <edge source="B" target="C"/><edge source="C" target="C"/>
                       <edge source="D" target="E"/>"#);
        let l = load_graphml(g.as_bytes()).unwrap();
        assert_eq!(l.topology.links(), &[(0, 1), (1, 2)]);
        assert_eq!(l.self_loops_dropped, 1);
        assert_eq!(l.parallel_links_collapsed, 2);
        // {D,E} and the isolated F
        assert_eq!(l.components_discarded, 2);
        assert_eq!(l.nodes_discarded, 3);
    }

    #[test]
    fn malformed_inputs_name_the_element() {
        let e = load_graphml(doc(r#"<node id="A"/><edge source="A" target="Z"/>"#).as_bytes()).unwrap_err();
        assert!(matches!(&e, TopologyError::GraphmlParse(m) if m.contains("<edge>") && m.contains("\"Z\"")), "{e}");
        let e = load_graphml(doc(r#"<node/>"#).as_bytes()).unwrap_err();
        assert!(matches!(&e, TopologyError::GraphmlParse(m) if m.contains("<node>")), "{e}");
        assert!(matches!(load_graphml(b"<graphml><graph>"), Err(TopologyError::GraphmlParse(_))));
        assert!(matches!(load_graphml(b"<foo/>"), Err(TopologyError::GraphmlParse(_))));
    }

    #[test]
    fn empty_after_cleanup() {
        let e = load_graphml(doc(r#"<node id="A"/><edge source="A" target="A"/>"#).as_bytes()).unwrap_err();
        assert_eq!(e, TopologyError::EmptyAfterCleanup);
        assert_eq!(load_graphml(doc("").as_bytes()).unwrap_err(), TopologyError::EmptyAfterCleanup);
    }

    #[test]
    fn serialize_then_load_is_identity_on_clean_topologies() {
        let t = Topology::new("ring5", 5, [(0, 1), (1, 2), (2, 3), (3, 4), (4, 0), (0, 2)]).unwrap();
        let once = load_graphml(to_graphml(&t).as_bytes()).unwrap().topology;
        assert_eq!(once, t);
        let twice = load_graphml(to_graphml(&once).as_bytes()).unwrap().topology;
        assert_eq!(twice, once);
    }
}
