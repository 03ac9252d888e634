//! The derivative-free DIRECT optimizer used to tune locality placement.

use lava::direct::{minimize, DirectOptions};

fn main() -> lava::Result<()> {
    let opts = DirectOptions {
        max_evaluations: 200,
        ..Default::default()
    };
    let bowl = minimize(
        |x: &[f64]| (x[0] - 1.0).powi(2) + (x[1] + 2.0).powi(2),
        &[-4.0, -4.0],
        &[4.0, 4.0],
        &opts,
    )?;
    println!(
        "bowl: x = {:?}, f = {:.2e}, {} evaluations",
        bowl.x,
        bowl.value,
        bowl.evaluations.len()
    );

    let wavy = minimize(
        |x: &[f64]| (3.0 * x[0]).sin() + 0.1 * x[0] * x[0],
        &[-4.0],
        &[4.0],
        &opts,
    )?;
    println!("wavy: x = {:.4}, f = {:.4}", wavy.x[0], wavy.value);
    Ok(())
}
