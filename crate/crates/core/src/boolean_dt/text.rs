//! Text form of decision trees.
//!
//! ```text
//! leaf     := "(leaf 0)" | "(leaf 1)"
//! internal := "(x<var> " tree-on-false " " tree-on-true ")"
//! ```
//!
//! Whitespace between tokens is free. Polarity is carried by child order only.
//! A per-vertex bundle is a header line `n=<n>` (optionally followed by
//! `l=<l>`) and then one tree per line.

use std::fmt::Write as _;

use super::tree::{DecisionTree, Node};
use crate::error::{Error, Result};

pub fn serialize_tree(t: &DecisionTree) -> String {
    let mut out = String::with_capacity(t.size() * 8);
    write_node(t, 0, &mut out);
    out
}

fn write_node(t: &DecisionTree, i: usize, out: &mut String) {
    match t.nodes()[i] {
        Node::Leaf(b) => {
            let _ = write!(out, "(leaf {})", b as u8);
        }
        Node::Split { var, lo, hi } => {
            let _ = write!(out, "(x{var} ");
            write_node(t, lo as usize, out);
            out.push(' ');
            write_node(t, hi as usize, out);
            out.push(')');
        }
    }
}

pub fn parse_tree(text: &str) -> Result<DecisionTree> {
    let mut p = Parser {
        s: text.as_bytes(),
        pos: 0,
    };
    let t = p.tree()?;
    p.skip_ws();
    if p.pos != p.s.len() {
        return Err(p.err("trailing input after tree"));
    }
    Ok(t)
}

struct Parser<'a> {
    s: &'a [u8],
    pos: usize,
}

impl Parser<'_> {
    fn err(&self, msg: &str) -> Error {
        Error::Parse {
            pos: self.pos,
            msg: msg.to_string(),
        }
    }

    fn skip_ws(&mut self) {
        while self.pos < self.s.len() && self.s[self.pos].is_ascii_whitespace() {
            self.pos += 1;
        }
    }

    fn expect(&mut self, c: u8) -> Result<()> {
        self.skip_ws();
        if self.s.get(self.pos) == Some(&c) {
            self.pos += 1;
            Ok(())
        } else {
            Err(self.err(&format!("expected `{}`", c as char)))
        }
    }

    fn word(&mut self) -> &[u8] {
        self.skip_ws();
        let start = self.pos;
        while self.pos < self.s.len() && self.s[self.pos].is_ascii_alphanumeric() {
            self.pos += 1;
        }
        &self.s[start..self.pos]
    }

    fn tree(&mut self) -> Result<DecisionTree> {
        self.expect(b'(')?;
        let at = {
            self.skip_ws();
            self.pos
        };
        let head = self.word().to_vec();
        let t = if head == b"leaf" {
            let at = {
                self.skip_ws();
                self.pos
            };
            match self.word() {
                b"0" => DecisionTree::leaf(false),
                b"1" => DecisionTree::leaf(true),
                _ => {
                    return Err(Error::Parse {
                        pos: at,
                        msg: "leaf label must be 0 or 1".into(),
                    })
                }
            }
        } else if head.len() > 1 && head[0] == b'x' && head[1..].iter().all(u8::is_ascii_digit) {
            let var: usize = std::str::from_utf8(&head[1..])
                .ok()
                .and_then(|s| s.parse().ok())
                .filter(|&v| v <= u16::MAX as usize)
                .ok_or(Error::Parse {
                    pos: at,
                    msg: "variable index out of range".into(),
                })?;
            let lo = self.tree()?;
            let hi = self.tree()?;
            DecisionTree::split(var, lo, hi)
        } else {
            return Err(Error::Parse {
                pos: at,
                msg: "expected `leaf` or `x<var>`".into(),
            });
        };
        self.expect(b')')?;
        Ok(t)
    }
}

/// Per-vertex trees with their header.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct TreeBundle {
    pub n: usize,
    pub l: Option<usize>,
    pub trees: Vec<DecisionTree>,
}

pub fn serialize_bundle(b: &TreeBundle) -> String {
    let mut out = format!("n={}", b.n);
    if let Some(l) = b.l {
        let _ = write!(out, " l={l}");
    }
    out.push('\n');
    for t in &b.trees {
        out.push_str(&serialize_tree(t));
        out.push('\n');
    }
    out
}

pub fn parse_bundle(text: &str) -> Result<TreeBundle> {
    let mut lines = text
        .lines()
        .enumerate()
        .filter(|(_, l)| !l.trim().is_empty());
    let offset_of = |idx: usize| text.lines().take(idx).map(|l| l.len() + 1).sum::<usize>();
    let (hidx, header) = lines.next().ok_or(Error::Parse {
        pos: 0,
        msg: "empty bundle".into(),
    })?;
    let mut n = None;
    let mut l = None;
    for tok in header.split_whitespace() {
        let bad = || Error::Parse {
            pos: offset_of(hidx),
            msg: format!("bad header token `{tok}`"),
        };
        match tok.split_once('=') {
            Some(("n", v)) => n = Some(v.parse::<usize>().map_err(|_| bad())?),
            Some(("l", v)) => l = Some(v.parse::<usize>().map_err(|_| bad())?),
            _ => return Err(bad()),
        }
    }
    let n = n.ok_or(Error::Parse {
        pos: 0,
        msg: "header must start with n=<n>".into(),
    })?;
    let mut trees = Vec::with_capacity(n);
    for (idx, line) in lines {
        let t = parse_tree(line).map_err(|e| match e {
            Error::Parse { pos, msg } => Error::Parse {
                pos: offset_of(idx) + pos,
                msg,
            },
            other => other,
        })?;
        trees.push(t);
    }
    if trees.len() != n {
        return Err(Error::Parse {
            pos: text.len(),
            msg: format!("expected {n} trees, found {}", trees.len()),
        });
    }
    Ok(TreeBundle { n, l, trees })
}
