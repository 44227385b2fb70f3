use super::clause::{Clause, Literal};
use super::tree::DecisionTree;
use crate::error::{Error, Result};
use crate::local_iter::encoding::{InputEncoding, VarKind};

/// Complete selector over the id bits whose leaf for vertex `u` is `leaf(u)`.
/// Codes with no vertex (`u >= n`) get the constant-0 tree.
fn build(
    enc: &InputEncoding,
    level: usize,
    code: usize,
    leaf: &impl Fn(usize) -> DecisionTree,
) -> DecisionTree {
    if level == enc.id_bits {
        return if code < enc.n {
            leaf(code)
        } else {
            DecisionTree::leaf(false)
        };
    }
    DecisionTree::split(
        enc.id_var(level),
        build(enc, level + 1, code << 1, leaf),
        build(enc, level + 1, (code << 1) | 1, leaf),
    )
}

/// The bare selector: its leaf for vertex `u` is labelled 0.
pub fn selector_tree(enc: &InputEncoding) -> DecisionTree {
    build(enc, 0, 0, &|_| DecisionTree::leaf(false))
}

/// Full selector path to vertex `u` (id literals, most significant first).
pub fn selector_path(enc: &InputEncoding, u: usize) -> Clause {
    (0..enc.id_bits)
        .map(|j| Literal::new(enc.id_var(j), enc.id_bit(u, j)))
        .collect()
}

/// Selector root-prefix paths that lead to at least one real vertex:
/// internal prefixes first, then the full paths to vertices `0..n`.
pub fn selector_prefixes(enc: &InputEncoding) -> (Vec<Clause>, Vec<Clause>) {
    let mut internal = Vec::new();
    for level in 0..enc.id_bits {
        for code in 0..(1usize << level) {
            // smallest vertex under this prefix
            if code << (enc.id_bits - level) < enc.n {
                internal.push(
                    (0..level)
                        .map(|j| Literal::new(enc.id_var(j), (code >> (level - 1 - j)) & 1 == 1))
                        .collect(),
                );
            }
        }
    }
    let full = (0..enc.n).map(|u| selector_path(enc, u)).collect();
    (internal, full)
}

/// Global aggregator: the selector with vertex `u`'s leaf replaced by
/// `per_vertex[u]`.
pub fn compose_with_selector(
    per_vertex: &[DecisionTree],
    enc: &InputEncoding,
) -> Result<DecisionTree> {
    if per_vertex.len() != enc.n {
        return Err(Error::Dimension(format!(
            "{} per-vertex trees for n={}",
            per_vertex.len(),
            enc.n
        )));
    }
    for (u, t) in per_vertex.iter().enumerate() {
        if let Some(max) = t.max_var() {
            if max >= enc.d {
                return Err(Error::EncodingMismatch(format!(
                    "tree {u} reads x{max} beyond d={}",
                    enc.d
                )));
            }
        }
        if let Some(v) = t.vars().find(|&v| matches!(enc.kind(v), VarKind::Id(_))) {
            return Err(Error::Alignment(format!(
                "tree for vertex {u} reads id bit x{v}"
            )));
        }
    }
    Ok(build(enc, 0, 0, &|u| per_vertex[u].clone()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::boolean_dt::random_tree;
    use crate::local_iter::encoding::GraphInstance;
    use crate::rng::seeded;

    #[test]
    fn single_vertex_is_identity() {
        let enc = InputEncoding::new(1).unwrap();
        let t = DecisionTree::split(
            enc.dp_var(0),
            DecisionTree::leaf(true),
            DecisionTree::leaf(false),
        );
        assert_eq!(compose_with_selector(&[t.clone()], &enc).unwrap(), t);
    }

    #[test]
    fn two_vertices_depth_one_subtrees() {
        let enc = InputEncoding::new(2).unwrap();
        let t0 = DecisionTree::split(
            enc.dp_var(0),
            DecisionTree::leaf(false),
            DecisionTree::leaf(true),
        );
        let t1 = DecisionTree::split(
            enc.edge_var(0, 1),
            DecisionTree::leaf(true),
            DecisionTree::leaf(false),
        );
        let g = compose_with_selector(&[t0, t1], &enc).unwrap();
        assert_eq!(g.depth(), 2);
        // one selector node plus two three-node subtrees in place of its leaves
        assert_eq!(g.size(), 1 + 2 * 3);
        assert_eq!(g.recomputed_depth(), 2);
    }

    #[test]
    fn routing_reaches_each_vertex_subtree() {
        let mut rng = seeded(4);
        for n in 1..=8 {
            let enc = InputEncoding::new(n).unwrap();
            let r = enc.body_vars().len().min(2);
            let trees: Vec<_> = (0..n)
                .map(|_| random_tree(r, &enc.body_vars(), &mut rng).unwrap())
                .collect();
            let g = compose_with_selector(&trees, &enc).unwrap();
            assert_eq!(g.depth(), enc.id_bits + r);
            for _ in 0..20 {
                let inst = GraphInstance::random(n, &mut rng);
                let h = GraphInstance::random(n, &mut rng).init;
                for (u, t) in trees.iter().enumerate() {
                    let x = enc.encode(u, &inst, h);
                    assert_eq!(g.eval(&x), t.eval(&x));
                    let (path, _) = g.route(&x);
                    assert_eq!(
                        &path.literals()[..enc.id_bits],
                        selector_path(&enc, u).literals()
                    );
                }
            }
        }
    }

    #[test]
    fn rejects_id_reads() {
        let enc = InputEncoding::new(4).unwrap();
        let bad = DecisionTree::split(0, DecisionTree::leaf(false), DecisionTree::leaf(true));
        let ok = DecisionTree::leaf(true);
        assert!(matches!(
            compose_with_selector(&[ok.clone(), bad, ok.clone(), ok], &enc),
            Err(Error::Alignment(_))
        ));
    }

    #[test]
    fn prefixes_skip_codes_without_vertices() {
        let enc = InputEncoding::new(6).unwrap();
        let (internal, full) = selector_prefixes(&enc);
        // (), (0), (1), (00), (01), (10); prefix (11) only covers codes 6 and 7
        assert_eq!(internal.len(), 6);
        assert_eq!(full.len(), 6);
        let all: std::collections::HashSet<_> = selector_tree(&enc)
            .root_prefix_paths()
            .into_iter()
            .collect();
        assert!(internal.iter().chain(&full).all(|c| all.contains(c)));
    }
}
