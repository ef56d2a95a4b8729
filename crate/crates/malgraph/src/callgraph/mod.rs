//! Call listings, sensitive-API vocabularies, and app-level graph
//! construction.

pub mod build;
pub mod listing;
pub mod vocab;

pub use build::{
    build_app_graph, build_method_fragment, default_prefix_filters, filter_call, ApiCallGraph,
    CallDecision, CallSite, GraphFragment, DEFAULT_PREFIX_FILTERS,
};
pub use listing::{
    load_corpus, parse_call_listing, serialize_call_listing, write_corpus, CallItem, CallKind,
    CallListing, Label, MethodListing,
};
pub use vocab::{extend_vocab, load_api_mapping, ApiVocab, Provenance, VocabEntry};
