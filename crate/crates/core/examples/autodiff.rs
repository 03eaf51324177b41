//! The reverse-mode tape on its own: fit a two-layer network to a sine
//! with Adam, and compare one gradient against central differences.

use latent_workbench::check::{finite_difference, relative_error};
use latent_workbench::inference::Mlp;
use latent_workbench::rng;
use latent_workbench::tensor::{Adam, AdamConfig, Tape, Tensor};

fn loss_of(mlp: &Mlp, x: &Tensor, y: &Tensor) -> latent_workbench::Result<f64> {
    let pred = mlp.eval(x)?;
    Ok(pred
        .data()
        .iter()
        .zip(y.data())
        .map(|(p, t)| (p - t) * (p - t))
        .sum::<f64>()
        / y.len() as f64)
}

fn main() -> latent_workbench::Result<()> {
    let n = 64;
    let xs: Vec<f64> = (0..n).map(|i| -3.0 + 6.0 * i as f64 / (n - 1) as f64).collect();
    let x = Tensor::matrix(n, 1, xs.clone())?;
    let y = Tensor::matrix(n, 1, xs.iter().map(|v| v.sin()).collect())?;

    let mut mlp = Mlp::new(&[1, 32, 1], 1.0, &mut rng::stream(1, "init"));
    let mut opt = Adam::new(AdamConfig::with_lr(1e-2), mlp.params());
    for step in 0..=2000 {
        let grads = {
            let mut tape = Tape::new();
            let bound = mlp.bind(&mut tape);
            let xv = tape.constant(x.clone());
            let yv = tape.constant(y.clone());
            let pred = mlp.forward(&mut tape, &bound, xv)?;
            let err = tape.sub(pred, yv)?;
            let sq = tape.square(err);
            let loss = tape.mean(sq);
            let g = tape.backward(loss)?;
            bound
                .iter()
                .map(|&v| g.expect(v).cloned())
                .collect::<latent_workbench::Result<Vec<_>>>()?
        };
        if step % 500 == 0 {
            println!("step {step:>4}  mse {:.5}", loss_of(&mlp, &x, &y)?);
        }
        opt.step(mlp.params_mut(), &grads)?;
    }

    // Gradient of the loss with respect to the first weight matrix.
    let analytic = {
        let mut tape = Tape::new();
        let bound = mlp.bind(&mut tape);
        let xv = tape.constant(x.clone());
        let yv = tape.constant(y.clone());
        let pred = mlp.forward(&mut tape, &bound, xv)?;
        let err = tape.sub(pred, yv)?;
        let sq = tape.square(err);
        let loss = tape.mean(sq);
        tape.backward(loss)?.expect(bound[0])?.clone()
    };
    let w0 = mlp.params()[0].data().to_vec();
    let numeric = finite_difference(
        |w| {
            let mut m = mlp.clone();
            m.params_mut()[0].data_mut().copy_from_slice(w);
            loss_of(&m, &x, &y).unwrap()
        },
        &w0,
        1e-6,
        None,
    );
    println!(
        "first-layer gradient vs finite differences: rel err {:.2e}",
        relative_error(analytic.data(), &numeric)
    );
    Ok(())
}
