//! Central-finite-difference verification of every differentiable
//! building block: linear, softmax, both convolutions, the three
//! attention flavors, and the GRU.
//!
//! ```bash
//! cargo run --example gradient_check
//! ```

use newsrec::params::ParamSet;
use newsrec::tensor::gradcheck::check_gradients;
use newsrec::tensor::nn::{
    AdditiveAttention, Gru, MultiHeadAttention, PersonalizedAttention,
};
use newsrec::Tensor;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn rand_leaf(shape: Vec<usize>, rng: &mut ChaCha8Rng) -> Tensor<f64> {
    let n: usize = shape.iter().product();
    Tensor::leaf(shape, (0..n).map(|_| rng.random_range(-1.0..1.0)).collect()).unwrap()
}

fn main() -> newsrec::Result<()> {
    let mut rng = ChaCha8Rng::seed_from_u64(99);
    let eps = 1e-5;
    println!("{:<28} {:>14} {:>8}", "operation", "max rel err", "coords");

    let mut report = |name: &str, leaves: &[Tensor<f64>], f: &dyn Fn() -> newsrec::Result<Tensor<f64>>| {
        let r = check_gradients(leaves, f, eps).unwrap();
        println!("{name:<28} {:>14.3e} {:>8}", r.max_rel_err, r.coords_checked);
        assert!(r.max_rel_err < 1e-4, "{name} failed the gradient check");
    };

    {
        let x = rand_leaf(vec![5, 4], &mut rng);
        let w = rand_leaf(vec![3, 4], &mut rng);
        let b = rand_leaf(vec![3], &mut rng);
        report("linear", &[x.clone(), w.clone(), b.clone()], &|| {
            let y = x.linear(&w, Some(&b))?;
            let pooled = y.mean_rows(5)?;
            pooled.dot(&pooled)
        });
    }
    {
        let x = rand_leaf(vec![6], &mut rng);
        let probe = rand_leaf(vec![6], &mut rng);
        let mask = [true, true, false, true, true, false];
        report("softmax (masked)", &[x.clone()], &|| {
            x.softmax(Some(&mask))?.dot(&probe)
        });
    }
    {
        let x = rand_leaf(vec![7, 3], &mut rng);
        let f = rand_leaf(vec![4, 3, 3], &mut rng);
        let b = rand_leaf(vec![4], &mut rng);
        report("conv1d_same + relu", &[x.clone(), f.clone(), b.clone()], &|| {
            let y = x.conv1d_same(&f, &b)?.relu();
            let pooled = y.mean_rows(7)?;
            pooled.dot(&pooled)
        });
        report("conv1d_valid + max", &[x.clone(), f.clone(), b.clone()], &|| {
            let y = x.conv1d_valid(&f, &b)?.tanh();
            let pooled = y.max_rows(5)?;
            pooled.dot(&pooled)
        });
    }
    {
        let mut set = ParamSet::new();
        let attn = AdditiveAttention::new(&mut set, "attn", 4, 3, &mut rng)?;
        let seq = rand_leaf(vec![5, 4], &mut rng);
        let mut leaves = vec![seq.clone()];
        leaves.extend(set.iter().map(|p| p.tensor().clone()));
        report("additive_attention", &leaves, &|| {
            let pooled = attn.forward(&seq, Some(&[true, true, true, true, false]))?;
            pooled.dot(&pooled)
        });
    }
    {
        let mut set = ParamSet::new();
        let attn = PersonalizedAttention::new(&mut set, "pattn", 4, 3, &mut rng)?;
        let seq = rand_leaf(vec![4, 4], &mut rng);
        let query = rand_leaf(vec![3], &mut rng);
        let mut leaves = vec![seq.clone(), query.clone()];
        leaves.extend(set.iter().map(|p| p.tensor().clone()));
        report("personalized_attention", &leaves, &|| {
            let pooled = attn.forward(&seq, &query, None)?;
            pooled.dot(&pooled)
        });
    }
    {
        let mut set = ParamSet::new();
        let mhsa = MultiHeadAttention::self_new(&mut set, "mhsa", 4, 2, 3, &mut rng)?;
        let seq = rand_leaf(vec![5, 4], &mut rng);
        let mut leaves = vec![seq.clone()];
        leaves.extend(set.iter().map(|p| p.tensor().clone()));
        report("multi_head_self_attention", &leaves, &|| {
            let y = mhsa.forward(&seq, Some(&[true, true, true, true, false]))?;
            let pooled = y.mean_rows(4)?;
            pooled.dot(&pooled)
        });
    }
    {
        let mut set = ParamSet::new();
        let gru = Gru::new(&mut set, "gru", 3, 4, &mut rng)?;
        let seq = rand_leaf(vec![5, 3], &mut rng);
        let h0 = rand_leaf(vec![4], &mut rng);
        let mut leaves = vec![seq.clone(), h0.clone()];
        leaves.extend(set.iter().map(|p| p.tensor().clone()));
        report("gru_forward", &leaves, &|| {
            let (_, last) = gru.forward(&seq, 5, &h0)?;
            last.dot(&last)
        });
    }
    println!("\nall analytic gradients agree with central finite differences");
    Ok(())
}
