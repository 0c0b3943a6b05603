//! Newick parsing and canonical writing.
//!
//! The parser accepts the common dialect: nested parentheses, optional
//! labels on internal nodes (kept out of the tree), optional `:length`
//! annotations, single-quoted labels with `''` escapes, and bracketed
//! comments. Rooted inputs are converted to unrooted trees by splicing out
//! degree-two nodes (their incident lengths add); the document records that
//! this happened. Polytomies are legal and flagged.
//!
//! Writing is canonical: the traversal is rooted at the internal node next
//! to the lexicographically largest leaf, children print in order of their
//! smallest descendant label, and lengths use the shortest exact decimal.

use std::collections::HashMap;

use super::ParseError;
use crate::error::TreeError;
use crate::tree::{PhyloTree, TreeAdditiveMap, TreeBuilder};

/// A parsed Newick tree plus everything the text carried beyond topology.
#[derive(Debug)]
pub struct NewickDocument {
    pub tree: PhyloTree,
    /// Per-edge branch length, where the input specified one.
    pub edge_lengths: Vec<Option<f64>>,
    /// Number of degree-two nodes (typically a rooted input's root) that
    /// were spliced out.
    pub suppressed_nodes: usize,
    /// True when some internal vertex has degree above three.
    pub has_polytomy: bool,
}

impl NewickDocument {
    /// The branch lengths, if the input specified every one of them.
    pub fn lengths(&self) -> Option<TreeAdditiveMap<f64>> {
        let values: Option<Vec<f64>> = self.edge_lengths.iter().copied().collect();
        values.map(|v| TreeAdditiveMap::new(&self.tree, v).expect("one value per edge"))
    }

    /// The branch lengths, or an error naming how many are missing.
    pub fn require_lengths(&self) -> Result<TreeAdditiveMap<f64>, ParseError> {
        self.lengths().ok_or_else(|| {
            let missing = self.edge_lengths.iter().filter(|l| l.is_none()).count();
            ParseError::Inconsistent(format!(
                "{missing} of {} branch lengths are missing",
                self.edge_lengths.len()
            ))
        })
    }
}

struct Lexer<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Lexer<'a> {
    fn new(text: &'a str) -> Self {
        Lexer { bytes: text.as_bytes(), pos: 0 }
    }

    fn error(&self, message: impl Into<String>) -> ParseError {
        ParseError::Newick { offset: self.pos, message: message.into() }
    }

    /// Skips whitespace and bracketed comments.
    fn skip_trivia(&mut self) -> Result<(), ParseError> {
        loop {
            while self.pos < self.bytes.len() && self.bytes[self.pos].is_ascii_whitespace() {
                self.pos += 1;
            }
            if self.pos < self.bytes.len() && self.bytes[self.pos] == b'[' {
                let open = self.pos;
                while self.pos < self.bytes.len() && self.bytes[self.pos] != b']' {
                    self.pos += 1;
                }
                if self.pos == self.bytes.len() {
                    self.pos = open;
                    return Err(self.error("unterminated [comment]"));
                }
                self.pos += 1; // consume ']'
                continue;
            }
            return Ok(());
        }
    }

    fn peek(&mut self) -> Result<Option<u8>, ParseError> {
        self.skip_trivia()?;
        Ok(self.bytes.get(self.pos).copied())
    }

    fn eat(&mut self, expected: u8) -> Result<(), ParseError> {
        match self.peek()? {
            Some(b) if b == expected => {
                self.pos += 1;
                Ok(())
            }
            Some(b) => Err(self.error(format!(
                "expected {:?}, found {:?}",
                expected as char, b as char
            ))),
            None => Err(self.error(format!(
                "expected {:?}, found end of input",
                expected as char
            ))),
        }
    }

    /// An optional label: quoted or a run of plain characters.
    fn label(&mut self) -> Result<Option<String>, ParseError> {
        match self.peek()? {
            Some(b'\'') => {
                let open = self.pos;
                self.pos += 1;
                let mut out = String::new();
                loop {
                    match self.bytes.get(self.pos) {
                        Some(b'\'') if self.bytes.get(self.pos + 1) == Some(&b'\'') => {
                            out.push('\'');
                            self.pos += 2;
                        }
                        Some(b'\'') => {
                            self.pos += 1;
                            return Ok(Some(out));
                        }
                        Some(&b) => {
                            out.push(b as char);
                            self.pos += 1;
                        }
                        None => {
                            self.pos = open;
                            return Err(self.error("unterminated quoted label"));
                        }
                    }
                }
            }
            Some(b) if !is_reserved(b) => {
                let start = self.pos;
                while self
                    .bytes
                    .get(self.pos)
                    .map(|&b| !is_reserved(b) && !b.is_ascii_whitespace())
                    .unwrap_or(false)
                {
                    self.pos += 1;
                }
                Ok(Some(
                    std::str::from_utf8(&self.bytes[start..self.pos])
                        .expect("plain labels are ascii-delimited")
                        .to_string(),
                ))
            }
            _ => Ok(None),
        }
    }

    /// An optional `:length` suffix.
    fn length(&mut self) -> Result<Option<f64>, ParseError> {
        if self.peek()? != Some(b':') {
            return Ok(None);
        }
        self.pos += 1;
        self.skip_trivia()?;
        let start = self.pos;
        while self
            .bytes
            .get(self.pos)
            .map(|&b| b.is_ascii_digit() || matches!(b, b'+' | b'-' | b'.' | b'e' | b'E'))
            .unwrap_or(false)
        {
            self.pos += 1;
        }
        let text = std::str::from_utf8(&self.bytes[start..self.pos]).expect("ascii");
        if text.is_empty() {
            return Err(self.error("expected a branch length after ':'"));
        }
        match text.parse::<f64>() {
            Ok(x) if x.is_finite() => Ok(Some(x)),
            _ => {
                self.pos = start;
                Err(self.error(format!("invalid branch length {text:?}")))
            }
        }
    }
}

fn is_reserved(b: u8) -> bool {
    matches!(b, b'(' | b')' | b',' | b':' | b';' | b'[' | b']' | b'\'') || b.is_ascii_whitespace()
}

/// Node of the raw parse: children with their incoming lengths.
struct RawNode {
    label: Option<String>,
    children: Vec<(usize, Option<f64>)>,
}

fn parse_subtree(lex: &mut Lexer, nodes: &mut Vec<RawNode>) -> Result<usize, ParseError> {
    if lex.peek()? == Some(b'(') {
        lex.eat(b'(')?;
        let mut children = Vec::new();
        loop {
            let child = parse_subtree(lex, nodes)?;
            let len = lex.length()?;
            children.push((child, len));
            match lex.peek()? {
                Some(b',') => {
                    lex.pos += 1;
                }
                Some(b')') => break,
                Some(b) => {
                    return Err(lex.error(format!(
                        "expected ',' or ')' in branch list, found {:?}",
                        b as char
                    )))
                }
                None => return Err(lex.error("unbalanced '(': input ended inside a branch list")),
            }
        }
        lex.eat(b')')?;
        let label = lex.label()?; // internal label (support value etc.), kept off the tree
        nodes.push(RawNode { label, children });
        Ok(nodes.len() - 1)
    } else {
        let offset = lex.pos;
        match lex.label()? {
            Some(label) => {
                nodes.push(RawNode { label: Some(label), children: Vec::new() });
                Ok(nodes.len() - 1)
            }
            None => Err(ParseError::Newick {
                offset,
                message: "expected a leaf label or '('".into(),
            }),
        }
    }
}

/// Parses one Newick tree.
pub fn parse_newick(text: &str) -> Result<NewickDocument, ParseError> {
    let mut lex = Lexer::new(text);
    let mut nodes = Vec::new();
    parse_subtree(&mut lex, &mut nodes)?;
    // A length on the root itself is legal text; it has no edge to live on.
    let _ = lex.length()?;
    lex.eat(b';')?;
    lex.skip_trivia()?;
    if lex.pos != lex.bytes.len() {
        return Err(lex.error("trailing content after ';'"));
    }

    // Undirected edge list; then splice degree-two nodes.
    let mut degree = vec![0usize; nodes.len()];
    let mut edges: Vec<(usize, usize, Option<f64>)> = Vec::new();
    for (parent, node) in nodes.iter().enumerate() {
        for &(child, len) in &node.children {
            degree[parent] += 1;
            degree[child] += 1;
            edges.push((parent, child, len));
        }
    }

    let mut suppressed = 0usize;
    loop {
        let Some(mid) = (0..nodes.len()).find(|&v| degree[v] == 2 && !edges.is_empty()) else {
            break;
        };
        let incident: Vec<usize> = edges
            .iter()
            .enumerate()
            .filter(|(_, &(u, v, _))| u == mid || v == mid)
            .map(|(i, _)| i)
            .collect();
        debug_assert_eq!(incident.len(), 2);
        let (a, la) = other_end(edges[incident[0]], mid);
        let (b, lb) = other_end(edges[incident[1]], mid);
        if a == b {
            return Err(ParseError::Tree(TreeError::InvalidStructure(
                "parallel edges after splicing a degree-two node".into(),
            )));
        }
        let merged = match (la, lb) {
            (Some(x), Some(y)) => Some(x + y),
            _ => None,
        };
        edges.remove(incident[1]);
        edges.remove(incident[0]);
        edges.push((a, b, merged));
        degree[mid] = 0;
        suppressed += 1;
    }

    let mut b = TreeBuilder::new();
    let mut ids = HashMap::new();
    let mut has_polytomy = false;
    for (v, node) in nodes.iter().enumerate() {
        if degree[v] == 0 {
            continue; // spliced out
        }
        let id = if degree[v] == 1 {
            match &node.label {
                Some(label) => b.add_leaf(label.clone()),
                None => {
                    return Err(ParseError::Tree(TreeError::InvalidStructure(format!(
                        "unlabeled node has degree 1 (node {v})"
                    ))))
                }
            }
        } else {
            has_polytomy |= degree[v] > 3;
            b.add_internal()
        };
        ids.insert(v, id);
    }
    let mut edge_lengths = Vec::with_capacity(edges.len());
    for &(u, v, len) in &edges {
        b.add_edge(ids[&u], ids[&v]);
        edge_lengths.push(len);
    }
    let tree = b.build()?;
    Ok(NewickDocument { tree, edge_lengths, suppressed_nodes: suppressed, has_polytomy })
}

fn other_end(edge: (usize, usize, Option<f64>), mid: usize) -> (usize, Option<f64>) {
    let (u, v, len) = edge;
    (if u == mid { v } else { u }, len)
}

fn quote_label(label: &str) -> String {
    let plain = !label.is_empty()
        && label
            .bytes()
            .all(|b| !is_reserved(b) && !b.is_ascii_whitespace());
    if plain {
        label.to_string()
    } else {
        format!("'{}'", label.replace('\'', "''"))
    }
}

/// Writes a tree in canonical Newick form; see the module docs for the
/// normalization rules. Lengths are optional.
pub fn write_newick(tree: &PhyloTree, lengths: Option<&TreeAdditiveMap<f64>>) -> String {
    let n = tree.leaf_count();
    if n == 2 {
        // No internal vertex to anchor at; print a flat two-leaf tree with
        // the whole length on the first branch.
        let (mut first, mut second) = (tree.leaf_label(0), tree.leaf_label(1));
        if first > second {
            std::mem::swap(&mut first, &mut second);
        }
        return match lengths {
            Some(l) => format!("({}:{},{}:0);", quote_label(first), l.get(0), quote_label(second)),
            None => format!("({},{});", quote_label(first), quote_label(second)),
        };
    }

    let anchor_leaf = (0..n)
        .max_by(|&a, &b| tree.leaf_label(a).cmp(tree.leaf_label(b)))
        .expect("nonempty tree");
    let leaf_node = tree.leaf_node(anchor_leaf);
    let (root, _) = tree.neighbors(leaf_node)[0];

    // Smallest descendant label per (node, coming-from) is what child order
    // sorts by; computing it on the fly keeps this a single traversal.
    fn emit(
        tree: &PhyloTree,
        lengths: Option<&TreeAdditiveMap<f64>>,
        node: usize,
        parent: usize,
        out: &mut String,
    ) -> String {
        if let Some(leaf) = tree.node_leaf(node) {
            let label = tree.leaf_label(leaf);
            out.push_str(&quote_label(label));
            return label.to_string();
        }
        let mut children: Vec<(String, String)> = Vec::new(); // (min label, text)
        for &(nb, e) in tree.neighbors(node) {
            if nb == parent {
                continue;
            }
            let mut text = String::new();
            let min = emit(tree, lengths, nb, node, &mut text);
            if let Some(l) = lengths {
                text.push(':');
                text.push_str(&l.get(e).to_string());
            }
            children.push((min, text));
        }
        children.sort();
        out.push('(');
        for (k, (_, text)) in children.iter().enumerate() {
            if k > 0 {
                out.push(',');
            }
            out.push_str(text);
        }
        out.push(')');
        children.into_iter().map(|(min, _)| min).min().expect("internal node has children")
    }

    let mut out = String::new();
    emit(tree, lengths, root, usize::MAX, &mut out);
    out.push(';');
    out
}
