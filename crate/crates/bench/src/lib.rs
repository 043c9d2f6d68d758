//! Fixtures shared by the benchmarks.

use viscobubble::{make_initial_data, Grid, InitialDataSpec, Parameters, State};

/// Reference radius-kick state on `[0, 50]` with `n` cells.
pub fn kicked_state(n: usize) -> (Grid, Parameters, State) {
    let grid = Grid::new(50.0, n).expect("valid grid");
    let state = make_initial_data(&grid, &InitialDataSpec::radius_kick(0.05)).expect("valid data");
    (grid, Parameters::default(), state)
}
