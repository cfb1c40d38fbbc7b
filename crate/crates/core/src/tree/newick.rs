//! Newick reading and writing.
//!
//! The rooted Newick form is converted to the unrooted representation by
//! suppressing a degree-2 root; on output a degree-2 root is introduced on the
//! pendant edge of leaf 0, splitting its weight in half.

use super::{Phylogeny, Result, Topology, TreeError, NEWICK_META};

/// A rooted tree as read from text or produced by a generator. `length` is
/// the weight of the edge to the parent and is unused for the root.
#[derive(Debug, Default)]
pub(crate) struct RootedNode {
    pub children: Vec<usize>,
    pub length: f64,
    pub label: Option<String>,
    pub position: usize,
}

/// Converts a rooted arena (root at index `root`) into a phylogeny. Every
/// non-root internal node must have two children; the root may have two
/// (suppressed) or three.
pub(crate) fn from_rooted(nodes: &[RootedNode], root: usize) -> Result<Phylogeny> {
    for (i, node) in nodes.iter().enumerate() {
        let c = node.children.len();
        let ok = if i == root { c == 2 || c == 3 } else { c == 0 || c == 2 };
        if !ok {
            return Err(TreeError::NonBinary {
                position: node.position,
                children: c,
            });
        }
    }
    // Pre-order so leaves are numbered in reading order.
    let mut order = Vec::with_capacity(nodes.len());
    let mut stack = vec![root];
    while let Some(v) = stack.pop() {
        order.push(v);
        stack.extend(nodes[v].children.iter().rev());
    }
    let leaves: Vec<usize> = order
        .iter()
        .copied()
        .filter(|&v| nodes[v].children.is_empty())
        .collect();
    let n = leaves.len();
    if n < 3 {
        return Err(TreeError::TooFewLeaves(n));
    }
    let suppress_root = nodes[root].children.len() == 2;
    let mut id = vec![usize::MAX; nodes.len()];
    for (i, &v) in leaves.iter().enumerate() {
        id[v] = i;
    }
    let mut next = n;
    for &v in &order {
        if !nodes[v].children.is_empty() && !(v == root && suppress_root) {
            id[v] = next;
            next += 1;
        }
    }
    let mut labels = Vec::with_capacity(n);
    for &v in &leaves {
        let label = nodes[v].label.clone().ok_or(TreeError::Syntax {
            position: nodes[v].position,
            message: "leaf without a label".into(),
        })?;
        labels.push(label);
    }
    let mut edges = Vec::new();
    let mut weights = Vec::new();
    for &v in &order {
        if v == root && suppress_root {
            let (a, b) = (nodes[v].children[0], nodes[v].children[1]);
            edges.push((id[a], id[b]));
            weights.push(nodes[a].length + nodes[b].length);
            continue;
        }
        for &c in &nodes[v].children {
            edges.push((id[v], id[c]));
            weights.push(nodes[c].length);
        }
    }
    let topology = Topology::new(labels, edges)?;
    Phylogeny::new(topology, weights)
}

struct Parser<'a> {
    text: &'a str,
    pos: usize,
    nodes: Vec<RootedNode>,
}

impl<'a> Parser<'a> {
    fn peek(&self) -> Option<char> {
        self.text[self.pos..].chars().next()
    }

    fn skip_ws(&mut self) {
        while let Some(c) = self.peek() {
            if c.is_whitespace() {
                self.pos += c.len_utf8();
            } else {
                break;
            }
        }
    }

    fn syntax<T>(&self, message: impl Into<String>) -> Result<T> {
        Err(TreeError::Syntax {
            position: self.pos,
            message: message.into(),
        })
    }

    fn expect(&mut self, want: char) -> Result<()> {
        self.skip_ws();
        match self.peek() {
            Some(c) if c == want => {
                self.pos += 1;
                Ok(())
            }
            Some(c) => self.syntax(format!("expected '{want}', found '{c}'")),
            None => self.syntax(format!("expected '{want}', found end of input")),
        }
    }

    fn token(&mut self) -> &'a str {
        self.skip_ws();
        let start = self.pos;
        while let Some(c) = self.peek() {
            if c.is_whitespace() || NEWICK_META.contains(&c) {
                break;
            }
            self.pos += c.len_utf8();
        }
        &self.text[start..self.pos]
    }

    fn subtree(&mut self, is_root: bool) -> Result<usize> {
        self.skip_ws();
        let position = self.pos;
        let mut node = RootedNode {
            position,
            ..Default::default()
        };
        if self.peek() == Some('(') {
            self.pos += 1;
            loop {
                let child = self.subtree(false)?;
                node.children.push(child);
                self.skip_ws();
                match self.peek() {
                    Some(',') => self.pos += 1,
                    Some(')') => {
                        self.pos += 1;
                        break;
                    }
                    Some(c) => return self.syntax(format!("expected ',' or ')', found '{c}'")),
                    None => return self.syntax("unterminated '('"),
                }
            }
            // Internal labels are accepted and ignored.
            let _ = self.token();
        } else {
            let label = self.token();
            if label.is_empty() {
                return self.syntax("expected a leaf label or '('");
            }
            node.label = Some(label.to_string());
        }
        self.skip_ws();
        if self.peek() == Some(':') {
            self.pos += 1;
            let at = self.pos;
            let raw = self.token();
            let len: f64 = raw.parse().map_err(|_| TreeError::BranchLength {
                position: at,
                message: format!("cannot parse {raw:?}"),
            })?;
            if !(len > 0.0 && len.is_finite()) {
                return Err(TreeError::BranchLength {
                    position: at,
                    message: format!("branch length must be positive, got {len}"),
                });
            }
            node.length = len;
        } else if !is_root {
            return Err(TreeError::BranchLength {
                position: self.pos,
                message: "missing branch length".into(),
            });
        }
        self.nodes.push(node);
        Ok(self.nodes.len() - 1)
    }
}

pub(crate) fn parse(text: &str) -> Result<Phylogeny> {
    let mut parser = Parser {
        text,
        pos: 0,
        nodes: Vec::new(),
    };
    let root = parser.subtree(true)?;
    parser.expect(';')?;
    parser.skip_ws();
    if parser.pos != text.len() {
        return parser.syntax("trailing characters after ';'");
    }
    if parser.nodes[root].children.is_empty() {
        return Err(TreeError::TooFewLeaves(1));
    }
    from_rooted(&parser.nodes, root)
}

pub(crate) fn write(p: &Phylogeny) -> String {
    let t = p.topology();
    let (parent, edge) = t.neighbors(0)[0];
    let half = p.weight(edge) / 2.0;
    let mut out = String::new();
    out.push('(');
    out.push_str(t.label(0));
    out.push_str(&format!(":{half},"));
    write_subtree(p, parent, 0, &mut out);
    out.push_str(&format!(":{half});"));
    out
}

fn write_subtree(p: &Phylogeny, v: usize, from: usize, out: &mut String) {
    let t = p.topology();
    if t.is_leaf(v) {
        out.push_str(t.label(v));
        return;
    }
    out.push('(');
    let mut first = true;
    for &(w, e) in t.neighbors(v) {
        if w == from {
            continue;
        }
        if !first {
            out.push(',');
        }
        first = false;
        write_subtree(p, w, v, out);
        out.push_str(&format!(":{}", p.weight(e)));
    }
    out.push(')');
}
