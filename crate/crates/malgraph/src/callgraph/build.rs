//! Graph construction: filtering, per-method fragments, and splicing.
//!
//! Each method body is scanned in order. API calls that belong to the
//! vocabulary become nodes; adjacent kept APIs become edges; calls to other
//! declared methods become splice points. Per-method entry/exit summaries are
//! resolved by a fixed-point iteration so call sites can be spliced with
//! their callee's first and last APIs, and methods without any kept API act
//! as pass-throughs that execution falls straight through.
//!
//! Node identity is API identity: every occurrence of an API anywhere in the
//! app merges into one node, so the result is an app-level graph over
//! vocabulary indices.

use std::collections::{BTreeMap, BTreeSet};

use chrono::NaiveDate;

use crate::callgraph::listing::{CallKind, CallListing, Label, MethodListing};
use crate::callgraph::vocab::ApiVocab;
use crate::error::{Error, Result};
use crate::numerics::{normalize_adjacency, Matrix, Scalar};

/// Library prefixes conventionally filtered before sensitive-API mapping.
pub const DEFAULT_PREFIX_FILTERS: [&str; 3] = ["Landroid", "Ljava", "Lcom/google"];

/// The default prefix list as owned strings, the form configs carry.
pub fn default_prefix_filters() -> Vec<String> {
    DEFAULT_PREFIX_FILTERS.iter().map(|s| s.to_string()).collect()
}

/// Outcome of filtering one call instruction.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum CallDecision {
    /// A sensitive API; carries its vocabulary index.
    KeepApi(usize),
    /// A call to a method declared in the same listing.
    KeepMethod,
    /// Dropped: a non-vocabulary API or an unresolved method target.
    Drop,
}

/// Classify one call instruction.
///
/// API calls are kept exactly when the target is in the vocabulary:
/// membership overrides prefix filtering (the vocabulary deliberately keeps
/// sensitive `Landroid/...` identifiers), and a non-member is dropped as
/// non-sensitive whether or not a prefix matches it. The prefix list is part
/// of the contract so callers can state their filtering configuration, but it
/// never flips a decision on its own. Method calls are kept exactly when the
/// target resolves to a method declared in the same listing.
pub fn filter_call(
    item: &crate::callgraph::listing::CallItem,
    vocab: &ApiVocab,
    declared_methods: &BTreeSet<&str>,
    _prefix_filters: &[String],
) -> CallDecision {
    match item.kind {
        CallKind::Api => match vocab.index_of(&item.target) {
            Some(idx) => CallDecision::KeepApi(idx),
            None => CallDecision::Drop,
        },
        CallKind::Method => {
            if declared_methods.contains(item.target.as_str()) {
                CallDecision::KeepMethod
            } else {
                CallDecision::Drop
            }
        }
    }
}

/// A kept item in a method scan.
#[derive(Debug, Clone, PartialEq, Eq)]
enum Item {
    Api(usize),
    Call(String),
}

fn method_items(
    method: &MethodListing,
    vocab: &ApiVocab,
    declared_methods: &BTreeSet<&str>,
    prefix_filters: &[String],
) -> Vec<Item> {
    method
        .calls
        .iter()
        .filter_map(|call| match filter_call(call, vocab, declared_methods, prefix_filters) {
            CallDecision::KeepApi(idx) => Some(Item::Api(idx)),
            CallDecision::KeepMethod => Some(Item::Call(call.target.clone())),
            CallDecision::Drop => None,
        })
        .collect()
}

/// A kept method-call site, positioned between its nearest kept APIs.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CallSite {
    pub callee: String,
    /// Nearest kept API before the site, if any.
    pub pred: Option<usize>,
    /// Nearest kept API after the site, if any.
    pub succ: Option<usize>,
}

/// Per-method graph fragment before splicing.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct GraphFragment {
    /// First kept API, when the method has one.
    pub entries: BTreeSet<usize>,
    /// Last kept API, when the method has one.
    pub exits: BTreeSet<usize>,
    /// Edges between kept APIs adjacent in the scan (no kept call between).
    pub edges: BTreeSet<(usize, usize)>,
    /// True when the method contributes no API of its own; execution passes
    /// through it, subject to its call sites.
    pub passthrough: bool,
    /// Kept method-call sites, recorded for splicing.
    pub call_sites: Vec<CallSite>,
}

/// Scan one method into its fragment.
pub fn build_method_fragment(
    method: &MethodListing,
    vocab: &ApiVocab,
    declared_methods: &BTreeSet<&str>,
    prefix_filters: &[String],
) -> GraphFragment {
    let items = method_items(method, vocab, declared_methods, prefix_filters);
    fragment_from_items(&items)
}

fn fragment_from_items(items: &[Item]) -> GraphFragment {
    let apis: Vec<usize> = items
        .iter()
        .filter_map(|i| match i {
            Item::Api(a) => Some(*a),
            Item::Call(_) => None,
        })
        .collect();

    let mut edges = BTreeSet::new();
    let mut prev_api: Option<usize> = None;
    let mut call_sites = Vec::new();
    for item in items {
        match item {
            Item::Api(a) => {
                if let Some(p) = prev_api {
                    edges.insert((p, *a));
                }
                prev_api = Some(*a);
            }
            Item::Call(callee) => {
                call_sites.push(CallSite { callee: callee.clone(), pred: prev_api, succ: None });
                // A kept call separates the APIs around it; whether execution
                // reconnects them depends on the callee and is decided when
                // the app graph is spliced.
                prev_api = None;
            }
        }
    }
    // Fill successors with a reverse sweep.
    let mut next_api: Option<usize> = None;
    let mut site_idx = call_sites.len();
    for item in items.iter().rev() {
        match item {
            Item::Api(a) => next_api = Some(*a),
            Item::Call(_) => {
                site_idx -= 1;
                call_sites[site_idx].succ = next_api;
            }
        }
    }

    GraphFragment {
        entries: apis.first().copied().into_iter().collect(),
        exits: apis.last().copied().into_iter().collect(),
        edges,
        passthrough: apis.is_empty(),
        call_sites,
    }
}

/// Entry/exit summary of a method after fixed-point resolution.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
struct Summary {
    entry: BTreeSet<usize>,
    exit: BTreeSet<usize>,
}

impl Summary {
    fn is_passthrough(&self) -> bool {
        self.entry.is_empty() && self.exit.is_empty()
    }
}

/// Jacobi iteration over method summaries: every round recomputes all
/// summaries from the previous round's snapshot, so the result does not
/// depend on method declaration order. The round count is capped at the
/// method count; chains resolve within the cap and degenerate recursion
/// cycles are cut there.
fn compute_summaries(items: &BTreeMap<&str, Vec<Item>>) -> BTreeMap<String, Summary> {
    let mut current: BTreeMap<String, Summary> =
        items.keys().map(|&k| (k.to_string(), Summary::default())).collect();
    for _ in 0..items.len() {
        let next: BTreeMap<String, Summary> = items
            .iter()
            .map(|(&name, items)| (name.to_string(), scan_summary(items, &current)))
            .collect();
        if next == current {
            break;
        }
        current = next;
    }
    current
}

fn scan_summary(items: &[Item], summaries: &BTreeMap<String, Summary>) -> Summary {
    let mut out = Summary::default();
    for item in items {
        match item {
            Item::Api(a) => {
                out.entry.insert(*a);
                break;
            }
            Item::Call(c) => {
                let callee = &summaries[c];
                if !callee.is_passthrough() {
                    out.entry.extend(callee.entry.iter().copied());
                    break;
                }
            }
        }
    }
    for item in items.iter().rev() {
        match item {
            Item::Api(a) => {
                out.exit.insert(*a);
                break;
            }
            Item::Call(c) => {
                let callee = &summaries[c];
                if !callee.is_passthrough() {
                    out.exit.extend(callee.exit.iter().copied());
                    break;
                }
            }
        }
    }
    out
}

/// App-level API call graph. Nodes are vocabulary indices, sorted; edges are
/// ordered pairs over those indices.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ApiCallGraph {
    pub app_id: String,
    pub label: Label,
    pub family: Option<String>,
    pub timestamp: Option<NaiveDate>,
    pub nodes: Vec<usize>,
    pub edges: BTreeSet<(usize, usize)>,
}

impl ApiCallGraph {
    pub fn node_count(&self) -> usize {
        self.nodes.len()
    }

    /// Position of a vocabulary index within `nodes`.
    pub fn local_index(&self, vocab_index: usize) -> Option<usize> {
        self.nodes.binary_search(&vocab_index).ok()
    }

    /// Dense binary adjacency in node order (directed, self-loops kept).
    pub fn adjacency<T: Scalar>(&self) -> Matrix<T> {
        let n = self.nodes.len();
        let mut a = Matrix::zeros(n, n);
        for &(from, to) in &self.edges {
            let i = self.local_index(from).expect("edge endpoint must be a node");
            let j = self.local_index(to).expect("edge endpoint must be a node");
            a.set(i, j, T::one());
        }
        a
    }

    /// Symmetrically normalized adjacency with self-loops.
    pub fn normalized_adjacency<T: Scalar>(&self) -> Result<Matrix<T>> {
        normalize_adjacency(&self.adjacency::<T>())
    }
}

/// Build the app graph for one listing.
///
/// Per-method fragments are merged by API identity. At every kept call site
/// with a resolved, non-passthrough callee, the site's predecessor API gains
/// edges into the callee's entries and the callee's exits gain edges into the
/// site's successor API; when the site is first or last in its method only
/// the realizable half is added. Call sites whose callee resolves to a
/// passthrough are invisible: the APIs around them connect directly.
///
/// Every declared method contributes its fragment, so the graph needs no
/// designated entry points. An app in which no vocabulary API survives
/// filtering is an error.
pub fn build_app_graph(
    listing: &CallListing,
    vocab: &ApiVocab,
    prefix_filters: &[String],
) -> Result<ApiCallGraph> {
    let declared = listing.method_names();
    let items: BTreeMap<&str, Vec<Item>> = listing
        .methods
        .iter()
        .map(|m| (m.name.as_str(), method_items(m, vocab, &declared, prefix_filters)))
        .collect();
    let summaries = compute_summaries(&items);

    let mut nodes: BTreeSet<usize> = BTreeSet::new();
    let mut edges: BTreeSet<(usize, usize)> = BTreeSet::new();

    for method_items in items.values() {
        let mut prev_api: Option<usize> = None;
        // True when a non-passthrough call site separates prev_api from the
        // next API in this method.
        let mut chain_broken = false;
        // Non-passthrough callees whose exits await this method's next API.
        let mut pending_exits: Vec<&Summary> = Vec::new();
        for item in method_items {
            match item {
                Item::Api(a) => {
                    nodes.insert(*a);
                    if let Some(p) = prev_api {
                        if !chain_broken {
                            edges.insert((p, *a));
                        }
                    }
                    for callee in pending_exits.drain(..) {
                        for &x in &callee.exit {
                            edges.insert((x, *a));
                        }
                    }
                    prev_api = Some(*a);
                    chain_broken = false;
                }
                Item::Call(c) => {
                    let callee = &summaries[c];
                    if callee.is_passthrough() {
                        continue;
                    }
                    if let Some(p) = prev_api {
                        for &e in &callee.entry {
                            edges.insert((p, e));
                        }
                    }
                    pending_exits.push(callee);
                    chain_broken = true;
                }
            }
        }
    }

    if nodes.is_empty() {
        return Err(Error::EmptyGraph { app_id: listing.app_id.clone() });
    }
    Ok(ApiCallGraph {
        app_id: listing.app_id.clone(),
        label: listing.label,
        family: listing.family.clone(),
        timestamp: listing.timestamp,
        nodes: nodes.into_iter().collect(),
        edges,
    })
}
