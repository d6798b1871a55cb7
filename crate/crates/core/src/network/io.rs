use std::fmt::Write as _;

use super::{NetworkError, NodeId, ResistorNetwork};

fn dot_quote(s: &str) -> String {
    let mut out = String::with_capacity(s.len() + 2);
    out.push('"');
    for ch in s.chars() {
        if ch == '"' || ch == '\\' {
            out.push('\\');
        }
        out.push(ch);
    }
    out.push('"');
    out
}

impl ResistorNetwork {
    /// Parses `u v conductance` lines.
    ///
    /// A line with a single label declares an isolated node. Blank lines and
    /// anything after `#` are ignored.
    pub fn parse_edge_list(text: &str) -> Result<ResistorNetwork, NetworkError> {
        let mut net = ResistorNetwork::new();
        for (lineno, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("");
            let toks: Vec<&str> = line.split_whitespace().collect();
            let parse_err = |message: String| NetworkError::Parse {
                line: lineno + 1,
                message,
            };
            match toks.as_slice() {
                [] => {}
                [n] => net.ensure_node(*n),
                [u, v, c] => {
                    let c: f64 = c
                        .parse()
                        .map_err(|_| parse_err(format!("bad conductance `{c}`")))?;
                    net.ensure_node(*u);
                    net.ensure_node(*v);
                    net.add_edge(*u, *v, c).map_err(|e| parse_err(e.to_string()))?;
                }
                _ => return Err(parse_err(format!("expected `u v c`, got {} fields", toks.len()))),
            }
        }
        Ok(net)
    }

    /// One `u v c` line per edge; isolated nodes get a line of their own.
    pub fn to_edge_list(&self) -> String {
        let mut out = String::new();
        let mut touched = vec![false; self.nodes.len()];
        for e in &self.edges {
            touched[self.index[&e.u]] = true;
            touched[self.index[&e.v]] = true;
        }
        for (n, t) in self.nodes.iter().zip(&touched) {
            if !t {
                let _ = writeln!(out, "{n}");
            }
        }
        for e in &self.edges {
            let _ = writeln!(out, "{} {} {:?}", e.u, e.v, e.conductance);
        }
        out
    }

    /// Undirected Graphviz graph with conductances as edge labels.
    pub fn to_dot(&self) -> String {
        let mut out = String::from("graph {\n");
        for n in &self.nodes {
            let _ = writeln!(out, "  {};", dot_quote(n.as_str()));
        }
        for e in &self.edges {
            let _ = writeln!(
                out,
                "  {} -- {} [label=\"{:?}\"];",
                dot_quote(e.u.as_str()),
                dot_quote(e.v.as_str()),
                e.conductance
            );
        }
        out.push_str("}\n");
        out
    }

    /// `{"nodes": [...], "edges": [{"u", "v", "c"}, ...]}`, pretty printed.
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("network serializes")
    }

    pub fn from_json(text: &str) -> Result<ResistorNetwork, NetworkError> {
        serde_json::from_str(text).map_err(|e| NetworkError::Parse {
            line: e.line(),
            message: e.to_string(),
        })
    }
}

impl NodeId {
    /// True when the label can be written in an edge list unchanged.
    pub fn is_edge_list_safe(&self) -> bool {
        !self.0.is_empty() && !self.0.contains(|c: char| c.is_whitespace() || c == '#')
    }
}
