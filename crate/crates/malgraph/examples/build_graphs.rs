//! Parse a call listing and build its sensitive-API call graph.
//!
//! The listing exercises all three splicing rules: an inlined callee, a
//! passthrough method that execution falls through, and a self-recursive
//! method that settles to a self-loop.
//!
//!     cargo run --example build_graphs

use malgraph::callgraph::{
    build_app_graph, default_prefix_filters, parse_call_listing, ApiVocab,
};

fn main() -> malgraph::Result<()> {
    let vocab = ApiVocab::from_mapping_lines([
        "# sensitive APIs, one per line; permission column optional",
        "Landroid/telephony/SmsManager;->sendTextMessage\tandroid.permission.SEND_SMS",
        "Landroid/location/LocationManager;->getLastKnownLocation",
        "Ljavax/crypto/Cipher;->doFinal",
    ])?;

    let listing = parse_call_listing(
        r#"{
        "app_id": "demo-app",
        "label": "malware",
        "family": "demo",
        "methods": [
            {"name": "onCreate", "calls": [
                {"kind": "api", "target": "Landroid/location/LocationManager;->getLastKnownLocation"},
                {"kind": "method", "target": "exfiltrate"},
                {"kind": "api", "target": "Ljava/lang/StringBuilder;->append"}
            ]},
            {"name": "exfiltrate", "calls": [
                {"kind": "method", "target": "log"},
                {"kind": "api", "target": "Ljavax/crypto/Cipher;->doFinal"},
                {"kind": "api", "target": "Landroid/telephony/SmsManager;->sendTextMessage"},
                {"kind": "method", "target": "exfiltrate"}
            ]},
            {"name": "log", "calls": []}
        ]
    }"#,
    )?;

    let graph = build_app_graph(&listing, &vocab, &default_prefix_filters())?;
    println!("app {} ({})", graph.app_id, graph.label);
    println!("nodes:");
    for &node in &graph.nodes {
        println!("  [{node}] {}", vocab.identifier(node));
    }
    println!("edges:");
    for &(from, to) in &graph.edges {
        println!("  {} -> {}", vocab.identifier(from), vocab.identifier(to));
    }

    // The StringBuilder call is filtered (not sensitive), `log` is a
    // passthrough, and the recursive call adds the send -> crypto back edge.
    Ok(())
}
