//! Presence fine-tuning: with modules frozen, presences are refit under the
//! pinball loss. With a module of all ones, a locality's presence becomes
//! the tau-quantile of its correlation values.

use lava::amf::{fine_tune_presences, AdamConfig, AmfConfig, AmfModel};
use lava::correlation::CorrelationDataset;
use lava::matrix::Matrix;
use rand::{Rng, SeedableRng};

fn main() -> lava::Result<()> {
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(3);
    let values: Vec<f64> = (0..190).map(|_| rng.random::<f64>()).collect();
    let c = CorrelationDataset::from_matrix(&Matrix::new(1, 190, values.clone())?, 20, 0.75)?;
    let model = AmfModel::new(Matrix::from_fn(1, 190, |_, _| 1.0), Matrix::new(1, 1, vec![0.5])?)?;
    let cfg = AmfConfig {
        num_modules: 1,
        adam: AdamConfig {
            learning_rate: 0.01,
            ..Default::default()
        },
        ..Default::default()
    };
    let mut sorted = values;
    sorted.sort_by(f64::total_cmp);
    for tau in [0.1, 0.5, 0.9] {
        let tuned = fine_tune_presences(&c, &model, tau, &cfg)?;
        let empirical = sorted[((tau * sorted.len() as f64).ceil() as usize).saturating_sub(1)];
        println!(
            "tau = {tau}: presence {:.3}, empirical quantile {:.3}",
            tuned.presences.get(0, 0),
            empirical
        );
    }
    Ok(())
}
