use num_complex::Complex64 as C64;
use rand::{RngExt, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::Result;
use crate::grid::{FiberState, MomentumGrid};

/// Field wavepacket centered at momentum `P + offset`, at the origin in `x`.
pub fn relative_wavepacket(grid: &MomentumGrid, p: &[f64], offset: &[f64], width: f64) -> FiberState {
    let k0: Vec<f64> = p.iter().zip(offset).map(|(a, b)| a + b).collect();
    FiberState::from_field(grid.wavepacket(&k0, width, &vec![0.0; p.len()]))
}

/// Random mixtures `a |vac> + b |wavepacket>` with the wavepacket momentum
/// offset from `P` by a magnitude in `[offset_min, offset_max]` along the first axis.
/// The default minimum keeps the wavepackets several widths away from zero
/// relative velocity, where no finite time separates them from the bound cloud.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct GenericStateParams {
    pub count: usize,
    pub seed: u64,
    pub offset_min: f64,
    pub offset_max: f64,
    pub width: f64,
}

impl Default for GenericStateParams {
    fn default() -> Self {
        Self { count: 5, seed: 7, offset_min: 0.5, offset_max: 0.9, width: 0.08 }
    }
}

pub fn generic_states(grid: &MomentumGrid, p: &[f64], params: &GenericStateParams) -> Result<Vec<FiberState>> {
    let mut rng = ChaCha8Rng::seed_from_u64(params.seed);
    (0..params.count)
        .map(|_| {
            let a = C64::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0));
            let b = C64::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0));
            let magnitude = rng.random_range(params.offset_min..=params.offset_max);
            let sign = if rng.random_bool(0.5) { 1.0 } else { -1.0 };
            let mut offset = vec![0.0; p.len()];
            offset[0] = sign * magnitude;
            let mut psi = relative_wavepacket(grid, p, &offset, params.width);
            psi.scale(b);
            psi.vacuum = a;
            psi.normalized()
        })
        .collect()
}
