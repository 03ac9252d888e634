//! Max-composition factorization of planted correlation data, matching the
//! recovered modules back to the planted ones.

use lava::amf::{fit, reconstruct, AmfConfig};
use lava::matrix::cosine_similarity;
use lava::synthetic::{planted, PlantedSpec};

fn main() -> lava::Result<()> {
    let p = planted(PlantedSpec::default(), 42)?;
    let cfg = AmfConfig {
        num_modules: 4,
        seed: 1,
        ..Default::default()
    };
    let run = fit(&p.data, &cfg)?;
    println!(
        "epochs {}, loss {:.5}, mean cosine {:.4}, overestimation ratio {:.3}",
        run.epochs_run, run.final_loss, run.cosine_similarity_mean, run.overestimation_ratio
    );
    for planted_row in 0..4 {
        let best = (0..4)
            .map(|m| cosine_similarity(p.truth.modules.row(planted_row), run.model.modules.row(m)))
            .fold(0.0, f64::max);
        println!("planted module {planted_row}: best cosine {best:.4}");
    }
    let chat = reconstruct(&run.model);
    println!("reconstruction of locality 0, first pairs: {:?}", &chat.row(0)[..5]);
    Ok(())
}
