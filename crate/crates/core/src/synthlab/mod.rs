//! Ground-truth generators: grain packs, warped pairs, plume sequences and
//! laser grids. Every generator is a pure function of its spec and seed.

mod grains;
mod laser;
mod plume;
mod texture;
mod warp;

pub use self::grains::{disk_indicator, gen_grain_pack, Disk, GrainPack, GrainPackSpec};
pub use self::laser::{gen_laser_grid, ideal_grid_intensity, LaserGrid, LaserGridSpec};
pub use self::plume::{gen_plume_sequence, InjectionStage, PlumeSequence, PlumeSpec};
pub use self::texture::{add_noise, gaussian_field, texture, TextureSpec};
pub use self::warp::{gen_warp_pair, Deformation, WarpPair, WarpPairSpec};

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// Independent deterministic random stream for `(seed, stream)`.
pub fn stream_rng(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}
