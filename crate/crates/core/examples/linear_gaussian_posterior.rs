//! On the conjugate model z ~ N(0,1), x | z ~ N(a z, s²), a lookup table
//! trained by gradient ascent on the ELBO lands on the exact posterior,
//! and ELBO + KL(q ‖ posterior) equals log p(x) for any q.

use latent_workbench::inference::LinearGaussian;
use latent_workbench::selftest::vlt_posterior_fit;

fn main() -> latent_workbench::Result<()> {
    let model = LinearGaussian::new(1.5, 0.8)?;
    let x = 1.2;
    let (m, v) = model.posterior(x)?;
    println!("posterior of z given x={x}: mean {m:.4}, sd {:.4}", v.sqrt());
    for (mu, sigma) in [(0.0, 1.0), (m, v.sqrt()), (2.0, 0.1)] {
        let elbo = model.elbo(x, mu, sigma);
        let gap = model.kl_to_posterior(x, mu, sigma);
        println!(
            "q=N({mu:.3}, {sigma:.3}²): elbo {elbo:.6} + gap {gap:.6} = {:.6}  (log p(x) = {:.6})",
            elbo + gap,
            model.log_evidence(x)
        );
    }

    let fit = vlt_posterior_fit(1.5, 0.8, 200, 0)?;
    println!(
        "lookup table, {} rows after {} steps: worst mean error {:.1e}, worst sd error {:.1e} ({:.2}s)",
        fit.rows, fit.steps, fit.max_mean_error, fit.max_sd_error, fit.seconds
    );
    Ok(())
}
