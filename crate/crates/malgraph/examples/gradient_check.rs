//! Verify analytic gradients against central finite differences.
//!
//! Both networks expose their parameters through a flat registry, so one
//! checker probes random coordinates of either model. Relative errors near
//! 1e-7 are the f64 finite-difference floor; anything under 1e-4 means the
//! backward pass matches the loss.
//!
//!     cargo run --example gradient_check

use std::collections::BTreeSet;

use malgraph::callgraph::{ApiCallGraph, Label};
use malgraph::numerics::grad_check;
use malgraph::snn::{pair_loss_and_grad, SnnModel};
use malgraph::vgae::{draw_noise, loss_and_grad, PreparedGraph, VgaeModel};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn main() -> malgraph::Result<()> {
    let mut rng = ChaCha8Rng::seed_from_u64(42);

    // A small dense-ish graph keeps the check fast while still exercising
    // every term of the loss: reconstruction, KL, and the class head.
    let vocab = 10;
    let nodes: Vec<usize> = (0..vocab).step_by(2).collect();
    let mut edges = BTreeSet::new();
    for &from in &nodes {
        for &to in &nodes {
            if rng.random_bool(0.4) {
                edges.insert((from, to));
            }
        }
    }
    let graph = ApiCallGraph {
        app_id: "probe".to_string(),
        label: Label::Malware,
        family: None,
        timestamp: None,
        nodes,
        edges,
    };

    let mut vgae = VgaeModel::<f64>::init(vocab, &mut rng)?;
    let prepared = PreparedGraph::new(&graph, vocab)?;
    let eps = draw_noise(prepared.node_count(), &mut rng);
    let kl_scale = 1.0 / prepared.node_count() as f64;
    let report = grad_check(
        &mut vgae.params,
        |params| {
            params.zero_grads();
            loss_and_grad(params, &prepared, &eps, kl_scale, 1.0).map(|parts| parts.total)
        },
        300,
        1e-5,
        &mut rng,
    )?;
    println!(
        "vgae: {} probes, max relative error {:.3e}",
        report.probes, report.max_rel_error
    );

    let mut snn = SnnModel::<f64>::init(&mut rng)?;
    let a: Vec<f64> = (0..16).map(|_| rng.random_range(-1.0..1.0)).collect();
    let b: Vec<f64> = (0..16).map(|_| rng.random_range(-1.0..1.0)).collect();
    let report = grad_check(
        &mut snn.params,
        |params| {
            params.zero_grads();
            pair_loss_and_grad(params, &a, &b, true, 1.0).map(|(loss, _)| loss)
        },
        300,
        1e-5,
        &mut rng,
    )?;
    println!(
        "snn:  {} probes, max relative error {:.3e}",
        report.probes, report.max_rel_error
    );
    Ok(())
}
