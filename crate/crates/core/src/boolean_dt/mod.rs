//! Literals, clauses, decision trees and the selector that glues per-vertex
//! trees into one global aggregator.

pub mod clause;
pub mod min_tree;
pub mod selector;
pub mod text;
pub mod tree;

pub use clause::{eval_clause, Clause, Literal};
pub use min_tree::{min_tree_leaves, PartialFunction, MAX_MIN_TREE_VARS};
pub use selector::{compose_with_selector, selector_path, selector_prefixes, selector_tree};
pub use text::{parse_bundle, parse_tree, serialize_bundle, serialize_tree, TreeBundle};
pub use tree::{eval_tree, random_tree, root_prefix_paths, DecisionTree, Node};
