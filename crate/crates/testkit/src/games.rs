//! Seeded random games and images that let toy models play them.

use partshap::masking::{PartAnnotation, PartBox, PartSet};
use partshap::raster::RasterImage;
use partshap::shapley::{explain_sample, PartShapleyMatrix};
use partshap::value_fn::{LogitVector, TableToyModel, DEFAULT_PRESENCE_THRESHOLD};
use rand::{Rng, RngExt, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Range random game values are drawn from.
pub const GAME_RANGE: f64 = 10.0;

/// Side of the square grid cell holding one part.
pub const CELL: u32 = 16;
/// Gap between a part box and the edge of its cell.
pub const INSET: u32 = 3;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// One value per coalition, uniform in `[-10, 10]`.
pub fn random_game(rng: &mut impl Rng, players: usize) -> Vec<f64> {
    (0..1usize << players)
        .map(|_| rng.random_range(-GAME_RANGE..=GAME_RANGE))
        .collect()
}

/// Makes `player` irrelevant: every coalition takes the value it has
/// without that player.
pub fn with_dummy(game: &[f64], player: usize) -> Vec<f64> {
    (0..game.len()).map(|s| game[s & !(1 << player)]).collect()
}

/// Makes players `i` and `j` interchangeable by mirroring the game across
/// the swap of their bits.
pub fn with_symmetry(game: &[f64], i: usize, j: usize) -> Vec<f64> {
    (0..game.len())
        .map(|s| {
            let swapped = swap_bits(s, i, j);
            game[s.min(swapped)]
        })
        .collect()
}

fn swap_bits(s: usize, i: usize, j: usize) -> usize {
    let bi = (s >> i) & 1;
    let bj = (s >> j) & 1;
    if bi == bj {
        s
    } else {
        s ^ ((1 << i) | (1 << j))
    }
}

/// `players` boxes laid out on a grid of `CELL`-pixel cells, four per row.
pub fn grid_layout(players: usize) -> PartSet {
    PartSet::new(
        (0..players)
            .map(|k| PartAnnotation::new(format!("p{k}"), grid_box(k)))
            .collect(),
    )
    .expect("distinct names")
}

pub fn grid_box(k: usize) -> PartBox {
    let x = (k as u32 % 4) * CELL + INSET;
    let y = (k as u32 / 4) * CELL + INSET;
    PartBox::new(x, y, x + CELL - 2 * INSET, y + CELL - 2 * INSET)
}

/// Width and height that fit a grid of `players` cells.
pub fn grid_size(players: usize) -> (u32, u32) {
    let rows = players.div_ceil(4).max(1) as u32;
    (4 * CELL, rows * CELL)
}

/// Random noise image, `channels` of 1 or 3.
pub fn noise_image(rng: &mut impl Rng, width: u32, height: u32, channels: u8) -> RasterImage {
    let pixels = (0..width * height * channels as u32)
        .map(|_| rng.random::<u8>())
        .collect();
    RasterImage::new(width, height, channels, pixels).expect("sized buffer")
}

/// Noise image sized for a grid of `players` parts.
pub fn grid_image(rng: &mut impl Rng, players: usize) -> RasterImage {
    let (w, h) = grid_size(players);
    noise_image(rng, w, h, 1)
}

/// Table model playing `games[c]` on class `c`'s logit over a grid layout.
pub fn table_model(games: &[Vec<f64>]) -> TableToyModel {
    let len = games[0].len();
    let players = len.trailing_zeros() as usize;
    let table = (0..len)
        .map(|s| LogitVector::new(games.iter().map(|g| g[s]).collect()).expect("finite"))
        .collect();
    let classes = (0..games.len()).map(|c| format!("c{c}")).collect();
    TableToyModel::new(
        grid_layout(players),
        classes,
        table,
        DEFAULT_PRESENCE_THRESHOLD,
    )
    .expect("valid table")
}

/// Runs the engine on `games` (one per class) through real masked images:
/// a noise image, the grid layout and a table model.
pub fn play(games: &[Vec<f64>], image_seed: u64) -> partshap::Result<PartShapleyMatrix> {
    let players = games[0].len().trailing_zeros() as usize;
    let model = table_model(games);
    let img = grid_image(&mut rng(image_seed), players);
    explain_sample(&model, img, grid_layout(players))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn random_games_are_seeded_and_bounded() {
        let a = random_game(&mut rng(7), 4);
        let b = random_game(&mut rng(7), 4);
        assert_eq!(a, b);
        assert_eq!(a.len(), 16);
        assert!(a.iter().all(|v| v.abs() <= GAME_RANGE));
    }

    #[test]
    fn dummy_and_symmetry_transforms() {
        let g = random_game(&mut rng(1), 3);
        let d = with_dummy(&g, 1);
        for s in 0..8 {
            assert_eq!(d[s], d[s | 0b010]);
        }
        let sym = with_symmetry(&g, 0, 2);
        for s in 0..8 {
            assert_eq!(sym[s], sym[swap_bits(s, 0, 2)]);
        }
    }

    #[test]
    fn grid_boxes_fit_and_do_not_overlap() {
        let (w, h) = grid_size(7);
        let layout = grid_layout(7);
        layout.check_bounds(w, h).unwrap();
        for (i, a) in layout.iter().enumerate() {
            for b in layout.iter().skip(i + 1) {
                let disjoint = a.bbox.x_max <= b.bbox.x_min
                    || b.bbox.x_max <= a.bbox.x_min
                    || a.bbox.y_max <= b.bbox.y_min
                    || b.bbox.y_max <= a.bbox.y_min;
                assert!(disjoint);
            }
        }
    }
}
