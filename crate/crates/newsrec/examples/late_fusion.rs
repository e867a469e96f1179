//! Late fusion in isolation: mean-of-dots scoring, its dot-of-mean
//! equivalence, the parameterless user embedding, and the uniform 1/N
//! gradient spread over the click history.
//!
//! ```bash
//! cargo run --example late_fusion
//! ```

use newsrec::fusion::{score_early, score_late, user_embedding_late};
use newsrec::Tensor;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn main() -> newsrec::Result<()> {
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let (n, d) = (12usize, 64usize);

    let history = Tensor::<f64>::leaf(
        vec![n, d],
        (0..n * d).map(|_| rng.random_range(-1.0..1.0)).collect(),
    )?;
    let candidate = Tensor::<f64>::leaf(
        vec![d],
        (0..d).map(|_| rng.random_range(-1.0..1.0)).collect(),
    )?;

    // Route 1: mean of the N per-click dot products.
    let late = score_late(&history, n, &candidate)?;
    // Route 2: one dot product against the mean of the clicked news.
    let mean_user = user_embedding_late(&history, n)?;
    let via_mean = score_early(&mean_user, &candidate)?;

    println!("history: {n} clicked news, dimension {d}");
    println!("mean-of-dots score : {:+.12}", late.item());
    println!("dot-of-mean score  : {:+.12}", via_mean.item());
    println!(
        "absolute difference: {:.3e}",
        (late.item() - via_mean.item()).abs()
    );

    // The late-fusion user model is parameterless: the user embedding is
    // just the click mean, so the only trainable state is the encoders'.
    println!("\nuser embedding = coordinate-wise click mean, first 6 dims:");
    let values = mean_user.to_vec();
    println!(
        "  [{}]",
        values[..6]
            .iter()
            .map(|v| format!("{v:+.4}"))
            .collect::<Vec<_>>()
            .join(", ")
    );

    // Backward through the late-fusion score: every clicked news receives
    // the same 1/N share of the candidate's gradient.
    late.backward()?;
    let grad = history.grad().expect("history received a gradient");
    let cand = candidate.to_vec();
    let max_dev = (0..n)
        .flat_map(|i| (0..d).map(move |j| (i, j)))
        .map(|(i, j)| (grad[i * d + j] - cand[j] / n as f64).abs())
        .fold(0.0f64, f64::max);
    println!("\ngradient w.r.t. each clicked news = candidate / N");
    println!("largest deviation from candidate/N: {max_dev:.3e}");

    // Cold start: an empty history scores zero for every candidate.
    let empty = Tensor::<f64>::zeros(vec![0, d]);
    println!(
        "\nempty-history score (cold start): {}",
        score_late(&empty, 0, &candidate)?.item()
    );
    Ok(())
}
