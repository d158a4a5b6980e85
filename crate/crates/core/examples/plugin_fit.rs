use invlab::estimators::{derive_hyperparams, plugin_estimate, Model};
use invlab::harness::{simulate, SimulationConfig};
use invlab::{Frame64, Grid};

fn main() -> invlab::Result<()> {
    let data = simulate(&SimulationConfig::new(
        Model::Darcy,
        "bump",
        1,
        2048,
        0.05,
        1,
    ))?;
    let hp = derive_hyperparams(Model::Darcy, data.len(), 3.0, 1, 4.0)?;
    let grid = Grid::new(1, 511)?;
    let frame = Frame64::with_options(grid, hp.j, invlab::FrameOptions::default_for(1))?;
    let g = invlab::harness::ground_truth(Model::Darcy, "bump")?
        .fields(grid)
        .1;
    let fit = plugin_estimate(&data, &frame, Some(&g), &hp)?;
    println!("min f̂ = {}", fit.inversion.f_hat.min());
    Ok(())
}
