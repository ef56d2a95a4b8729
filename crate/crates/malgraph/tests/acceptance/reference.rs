//! Brute-force reference interpreter for app-graph construction.
//!
//! This is a from-scratch second implementation of the splicing rules, kept
//! deliberately naive: identifiers stay strings, the vocabulary is a plain
//! slice searched linearly, and summaries are recomputed from a snapshot for
//! a fixed number of rounds with no early exit or incremental state. The
//! production builder must agree with it exactly, node set and edge set.

use std::collections::BTreeSet;

use malgraph::callgraph::{CallKind, CallListing};

/// A call that survives filtering: a vocabulary API or a declared method.
#[derive(Debug, Clone, PartialEq)]
enum Kept {
    Api(usize),
    Call(String),
}

/// Entry and exit API sets of one method at some iteration round.
#[derive(Debug, Clone, Default, PartialEq)]
struct Summary {
    entry: BTreeSet<usize>,
    exit: BTreeSet<usize>,
}

impl Summary {
    fn passthrough(&self) -> bool {
        self.entry.is_empty() && self.exit.is_empty()
    }
}

fn summary_of<'a>(summaries: &'a [(String, Summary)], name: &str) -> &'a Summary {
    &summaries.iter().find(|(n, _)| n == name).expect("kept call targets a declared method").1
}

/// One forward and one backward scan of a method body against the previous
/// round's summaries. The entry set is the first API, or the entries of the
/// first non-passthrough callee, whichever the scan reaches first; the exit
/// set is the mirror image.
fn scan(items: &[Kept], summaries: &[(String, Summary)]) -> Summary {
    let mut out = Summary::default();
    for item in items {
        match item {
            Kept::Api(a) => {
                out.entry.insert(*a);
                break;
            }
            Kept::Call(c) => {
                let callee = summary_of(summaries, c);
                if !callee.passthrough() {
                    out.entry.extend(callee.entry.iter().copied());
                    break;
                }
            }
        }
    }
    for item in items.iter().rev() {
        match item {
            Kept::Api(a) => {
                out.exit.insert(*a);
                break;
            }
            Kept::Call(c) => {
                let callee = summary_of(summaries, c);
                if !callee.passthrough() {
                    out.exit.extend(callee.exit.iter().copied());
                    break;
                }
            }
        }
    }
    out
}

/// Node and edge sets the splicing rules predict for `listing`, or `None`
/// when no vocabulary API survives filtering (the empty-graph case).
///
/// `vocab` lists API identifiers in index order. The rules, stated
/// declaratively:
///   - an API call is kept exactly when its identifier is in the
///     vocabulary; a method call is kept exactly when its target names a
///     declared method;
///   - every kept API is a node, merged by identity;
///   - summaries reach a fixed point by recomputing every method from the
///     previous round, at most one round per method;
///   - two kept APIs are chained when nothing between them survives except
///     calls to passthrough methods;
///   - a call site with a non-passthrough callee links its nearest
///     preceding API into the callee's entries and the callee's exits into
///     its nearest following API, skipping whichever half has no API.
pub fn reference_graph(
    listing: &CallListing,
    vocab: &[String],
) -> Option<(BTreeSet<usize>, BTreeSet<(usize, usize)>)> {
    let declared: Vec<&str> = listing.methods.iter().map(|m| m.name.as_str()).collect();
    let kept: Vec<(String, Vec<Kept>)> = listing
        .methods
        .iter()
        .map(|m| {
            let items = m
                .calls
                .iter()
                .filter_map(|c| match c.kind {
                    CallKind::Api => vocab.iter().position(|v| *v == c.target).map(Kept::Api),
                    CallKind::Method => declared
                        .contains(&c.target.as_str())
                        .then(|| Kept::Call(c.target.clone())),
                })
                .collect();
            (m.name.clone(), items)
        })
        .collect();

    let mut summaries: Vec<(String, Summary)> =
        kept.iter().map(|(n, _)| (n.clone(), Summary::default())).collect();
    for _ in 0..kept.len() {
        summaries = kept
            .iter()
            .map(|(n, items)| (n.clone(), scan(items, &summaries)))
            .collect();
    }

    let mut nodes: BTreeSet<usize> = BTreeSet::new();
    let mut edges: BTreeSet<(usize, usize)> = BTreeSet::new();
    for (_, items) in &kept {
        for (i, item) in items.iter().enumerate() {
            match item {
                Kept::Api(b) => {
                    nodes.insert(*b);
                    let mut unbroken = true;
                    for earlier in items[..i].iter().rev() {
                        match earlier {
                            Kept::Api(a) => {
                                if unbroken {
                                    edges.insert((*a, *b));
                                }
                                break;
                            }
                            Kept::Call(c) => {
                                if !summary_of(&summaries, c).passthrough() {
                                    unbroken = false;
                                }
                            }
                        }
                    }
                }
                Kept::Call(c) => {
                    let callee = summary_of(&summaries, c).clone();
                    if callee.passthrough() {
                        continue;
                    }
                    let pred = items[..i].iter().rev().find_map(|it| match it {
                        Kept::Api(a) => Some(*a),
                        Kept::Call(_) => None,
                    });
                    let succ = items[i + 1..].iter().find_map(|it| match it {
                        Kept::Api(a) => Some(*a),
                        Kept::Call(_) => None,
                    });
                    if let Some(p) = pred {
                        for &e in &callee.entry {
                            edges.insert((p, e));
                        }
                    }
                    if let Some(s) = succ {
                        for &x in &callee.exit {
                            edges.insert((x, s));
                        }
                    }
                }
            }
        }
    }

    if nodes.is_empty() {
        None
    } else {
        Some((nodes, edges))
    }
}
