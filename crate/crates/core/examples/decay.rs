//! Minimal end-to-end run: project initial data, step to t = 10 with the
//! shifted midpoint rule, and print the energy at both ends. This is the
//! example from the README.

use dampedwave_core::assembly::assemble;
use dampedwave_core::damping::Damping;
use dampedwave_core::mesh::Mesh1d;
use dampedwave_core::stepper::{initial_state, SchemeParams, SolverPath, Stepper};

fn main() -> dampedwave_core::Result<()> {
    let ops = assemble(Mesh1d::new(200)?, 0, Damping::constant(10.0)?)?;
    let init = initial_state(&ops, |x| (std::f64::consts::PI * x).cos(), |_| 0.0)?;
    let stepper = Stepper::new(
        ops,
        SchemeParams::shifted_midpoint(1e-2)?,
        SolverPath::Monolithic,
    )?;
    let result = stepper.run(init, 1000, &[0, 1], None)?;
    let e0 = result.energy_series(0).unwrap();
    println!(
        "E(0) = {:.6e}, E(10) = {:.6e}",
        e0.values[0], e0.values[1000]
    );
    Ok(())
}
