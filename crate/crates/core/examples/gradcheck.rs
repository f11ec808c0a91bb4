//! Compares analytic gradients of the toy model with central finite
//! differences for both training losses.

use std::collections::BTreeMap;

use alphacc::trainer::{grad_check, toy_config, Loss};

fn main() -> alphacc::Result<()> {
    for loss in [Loss::Margin, Loss::Bce] {
        let report = grad_check(&toy_config(loss))?;
        println!(
            "{loss}: loss {:.6}, max rel error {:.2e} over {} probes",
            report.loss,
            report.max_rel_error,
            report.probes.len()
        );
        let mut worst: BTreeMap<&str, f64> = BTreeMap::new();
        for p in &report.probes {
            let e = worst.entry(p.tensor.as_str()).or_default();
            *e = e.max(p.rel_error);
        }
        for (tensor, err) in worst {
            println!("  {tensor:<28} {err:.2e}");
        }
    }
    Ok(())
}
