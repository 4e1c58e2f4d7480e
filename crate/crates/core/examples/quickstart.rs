use trilinear::cpd::{cpd_als, match_factors, FitOptions, Init};
use trilinear::io::synth_model;

fn main() -> trilinear::Result<()> {
    let (truth, x) = synth_model(&[10, 10, 10], 3, 42, 0.0)?;
    let opts = FitOptions { init: Init::Gevd, tol: 1e-12, ..FitOptions::with_rank(3) };
    let (model, report) = cpd_als(&x, &opts)?;
    assert!(match_factors(&truth, &model)?.score > 1.0 - 1e-6);
    println!("{} sweeps, loss {:.3e}", report.sweeps, report.final_loss());
    Ok(())
}
