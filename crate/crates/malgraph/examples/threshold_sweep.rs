//! Sweep the decision threshold over stored scores and pick the best F1.
//!
//! A verdict keeps the mean benign similarity that produced it, so the
//! decision rule can be re-applied at any threshold without touching the
//! models. Raising the threshold only moves apps from the benign verdict
//! to the malware verdict, never back, which makes recall monotone.
//!
//!     cargo run --example threshold_sweep

use std::collections::BTreeMap;

use malgraph::callgraph::Label;
use malgraph::eval::{best_by_f1, threshold_sweep};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn main() -> malgraph::Result<()> {
    // Synthetic mean-similarity scores standing in for a classify run:
    // benign apps score high against the benign support set, malware low,
    // with enough spread that the classes overlap a little.
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let mut scores = Vec::new();
    let mut truth = BTreeMap::new();
    for i in 0..60 {
        let benign = i % 2 == 0;
        let center = if benign { 0.62 } else { 0.41 };
        let label = if benign { Label::Benign } else { Label::Malware };
        let app_id = format!("app-{i:03}");
        scores.push((app_id.clone(), center + rng.random_range(-0.12..0.12)));
        truth.insert(app_id, label);
    }

    let thresholds: Vec<f64> = (1..20).map(|i| i as f64 / 20.0).collect();
    let points = threshold_sweep(&scores, &truth, &thresholds)?;

    println!("threshold  accuracy  recall  f1");
    for p in points.iter().filter(|p| (0.35..0.70).contains(&p.threshold)) {
        let fmt = |v: Option<f64>| match v {
            Some(v) => format!("{:6.2}%", v * 100.0),
            None => "   n/a".to_string(),
        };
        println!(
            "   {:.2}    {}   {}  {}",
            p.threshold,
            fmt(p.metrics.accuracy),
            fmt(p.metrics.recall),
            fmt(p.metrics.f1)
        );
    }

    let best = best_by_f1(&points).expect("some point defines an f1");
    println!(
        "best threshold by f1: {:.2} (f1 {:.2}%, ties go to the lower threshold)",
        best.threshold,
        best.metrics.f1.expect("best point has a defined f1") * 100.0
    );
    Ok(())
}
