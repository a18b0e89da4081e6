//! Procedural training terrains and the coarse max-pool height envelope.
//!
//! Four kinds are generated on a regular 0.05 m grid: flat, randomly rough,
//! discrete obstacles, and pyramid stairs ascending from all sides. Difficulty
//! maps affinely onto the governing parameter:
//!
//! - rough amplitude      `0.02 + 0.08 * d` m,
//! - obstacle height      `0.05 + 0.15 * d` m,
//! - stair riser height   `0.05 + 0.15 * d` m (tread fixed at 0.30 m).
//!
//! Generation is pure in `(kind, difficulty, seed, extent)`: identical inputs
//! give bit-identical grids.

use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Terrain sample pitch in meters.
pub const FIELD_CELL_SIZE: f64 = 0.05;
/// Coarse map cell pitch in meters.
pub const COARSE_CELL_SIZE: f64 = 0.10;
/// Side of the square max-pool window, meters.
pub const COARSE_WINDOW: f64 = 0.20;
/// Stair tread depth, meters.
pub const STAIR_TREAD: f64 = 0.30;

pub fn rough_amplitude(difficulty: f64) -> f64 {
    0.02 + 0.08 * difficulty
}

pub fn obstacle_height(difficulty: f64) -> f64 {
    0.05 + 0.15 * difficulty
}

pub fn stair_riser(difficulty: f64) -> f64 {
    0.05 + 0.15 * difficulty
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TerrainKind {
    Flat,
    Rough,
    DiscreteObstacles,
    Stairs,
}

impl std::str::FromStr for TerrainKind {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "flat" => Ok(TerrainKind::Flat),
            "rough" => Ok(TerrainKind::Rough),
            "discrete_obstacles" | "discrete-obstacles" => Ok(TerrainKind::DiscreteObstacles),
            "stairs" => Ok(TerrainKind::Stairs),
            other => Err(Error::InvalidArgument(format!(
                "unknown terrain kind `{other}` (flat|rough|discrete_obstacles|stairs)"
            ))),
        }
    }
}

fn schema_version_default() -> u32 {
    1
}

/// A generated height field on a regular grid.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TerrainField {
    #[serde(default = "schema_version_default")]
    pub schema_version: u32,
    pub kind: TerrainKind,
    pub seed: u64,
    pub difficulty: f64,
    pub cell_size: f64,
    /// World position of sample (0, 0).
    pub origin: [f64; 2],
    /// Samples per side: [nx, ny].
    pub dims: [usize; 2],
    /// Row-major heights, `heights[iy * nx + ix]`.
    pub heights: Vec<f64>,
}

impl TerrainField {
    pub fn validate(&self) -> Result<()> {
        let (nx, ny) = (self.dims[0], self.dims[1]);
        if nx == 0 || ny == 0 {
            return Err(Error::validation("dims", "grid must be non-empty"));
        }
        if self.heights.len() != nx * ny {
            return Err(Error::validation(
                "heights",
                format!("expected {} samples, found {}", nx * ny, self.heights.len()),
            ));
        }
        if !self.heights.iter().all(|h| h.is_finite()) {
            return Err(Error::validation("heights", "non-finite height sample"));
        }
        if self.kind == TerrainKind::Flat && self.heights.iter().any(|h| *h != self.heights[0]) {
            return Err(Error::validation("heights", "flat terrain must be constant"));
        }
        if !(self.cell_size.is_finite() && self.cell_size > 0.0) {
            return Err(Error::validation("cell_size", "must be positive"));
        }
        Ok(())
    }

    pub fn height_at_index(&self, ix: usize, iy: usize) -> f64 {
        self.heights[iy * self.dims[0] + ix]
    }

    pub fn sample_position(&self, ix: usize, iy: usize) -> (f64, f64) {
        (
            self.origin[0] + ix as f64 * self.cell_size,
            self.origin[1] + iy as f64 * self.cell_size,
        )
    }

    pub fn x_max(&self) -> f64 {
        self.origin[0] + (self.dims[0] - 1) as f64 * self.cell_size
    }

    pub fn y_max(&self) -> f64 {
        self.origin[1] + (self.dims[1] - 1) as f64 * self.cell_size
    }

    fn index_of(&self, x: f64, y: f64) -> Result<(usize, usize)> {
        let ix = ((x - self.origin[0]) / self.cell_size).round() as i64;
        let iy = ((y - self.origin[1]) / self.cell_size).round() as i64;
        if ix < 0 || iy < 0 || ix >= self.dims[0] as i64 || iy >= self.dims[1] as i64 {
            return Err(Error::OutOfBounds {
                x,
                y,
                x_min: self.origin[0],
                x_max: self.x_max(),
                y_min: self.origin[1],
                y_max: self.y_max(),
            });
        }
        Ok((ix as usize, iy as usize))
    }

    /// Height of the sample nearest to (x, y).
    pub fn height_at_nearest(&self, x: f64, y: f64) -> Result<f64> {
        let (ix, iy) = self.index_of(x, y)?;
        Ok(self.height_at_index(ix, iy))
    }

    pub fn max_height(&self) -> f64 {
        self.heights.iter().copied().fold(f64::NEG_INFINITY, f64::max)
    }

    pub fn save(&self, path: impl AsRef<std::path::Path>) -> Result<()> {
        let path = path.as_ref();
        let text = serde_json::to_string(self).map_err(|source| Error::Parse {
            path: path.display().to_string(),
            source,
        })?;
        std::fs::write(path, text).map_err(|source| Error::Io {
            path: path.display().to_string(),
            source,
        })
    }

    pub fn load(path: impl AsRef<std::path::Path>) -> Result<TerrainField> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|source| Error::Io {
            path: path.display().to_string(),
            source,
        })?;
        let field: TerrainField = serde_json::from_str(&text).map_err(|source| Error::Parse {
            path: path.display().to_string(),
            source,
        })?;
        field.validate()?;
        Ok(field)
    }
}

/// Conservative envelope: each cell stores the maximum terrain sample within
/// the 0.20 x 0.20 m window centered on the cell.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CoarseHeightMap {
    #[serde(default = "schema_version_default")]
    pub schema_version: u32,
    pub cell_size: f64,
    pub window: f64,
    pub origin: [f64; 2],
    pub dims: [usize; 2],
    pub heights: Vec<f64>,
}

impl CoarseHeightMap {
    pub fn x_max(&self) -> f64 {
        self.origin[0] + (self.dims[0] - 1) as f64 * self.cell_size
    }

    pub fn y_max(&self) -> f64 {
        self.origin[1] + (self.dims[1] - 1) as f64 * self.cell_size
    }

    /// Envelope height at the cell nearest to (x, y); errors outside the map.
    pub fn height_at(&self, x: f64, y: f64) -> Result<f64> {
        let ix = ((x - self.origin[0]) / self.cell_size).round() as i64;
        let iy = ((y - self.origin[1]) / self.cell_size).round() as i64;
        if ix < 0 || iy < 0 || ix >= self.dims[0] as i64 || iy >= self.dims[1] as i64 {
            return Err(Error::OutOfBounds {
                x,
                y,
                x_min: self.origin[0],
                x_max: self.x_max(),
                y_min: self.origin[1],
                y_max: self.y_max(),
            });
        }
        Ok(self.heights[iy as usize * self.dims[0] + ix as usize])
    }
}

/// Generates a square terrain of side `extent` meters. `origin` defaults to
/// `(-extent/2, -extent/2)` so the field is centered on the world origin.
pub fn generate_terrain(
    kind: TerrainKind,
    difficulty: f64,
    seed: u64,
    extent: f64,
    origin: Option<[f64; 2]>,
) -> Result<TerrainField> {
    if !(0.0..=1.0).contains(&difficulty) || !difficulty.is_finite() {
        return Err(Error::InvalidArgument(format!(
            "difficulty {difficulty} outside [0, 1]"
        )));
    }
    if !(extent.is_finite() && extent >= 2.0 * FIELD_CELL_SIZE) {
        return Err(Error::InvalidArgument(format!(
            "extent {extent} too small (need >= {})",
            2.0 * FIELD_CELL_SIZE
        )));
    }
    let n = (extent / FIELD_CELL_SIZE).round() as usize + 1;
    let origin = origin.unwrap_or([-extent / 2.0, -extent / 2.0]);
    let mut field = TerrainField {
        schema_version: 1,
        kind,
        seed,
        difficulty,
        cell_size: FIELD_CELL_SIZE,
        origin,
        dims: [n, n],
        heights: vec![0.0; n * n],
    };
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    match kind {
        TerrainKind::Flat => {}
        TerrainKind::Rough => {
            let amp = rough_amplitude(difficulty);
            for h in field.heights.iter_mut() {
                *h = rng.gen_range(-amp..=amp);
            }
        }
        TerrainKind::DiscreteObstacles => {
            fill_obstacles(&mut field, difficulty, &mut rng);
        }
        TerrainKind::Stairs => {
            fill_pyramid_stairs(&mut field, difficulty);
        }
    }
    field.validate()?;
    Ok(field)
}

/// Axis-aligned rectangular blocks with heights uniform in [-h, h]; a 1 m
/// square spawn platform at the center stays flat.
fn fill_obstacles(field: &mut TerrainField, difficulty: f64, rng: &mut ChaCha8Rng) {
    let h = obstacle_height(difficulty);
    let (nx, ny) = (field.dims[0], field.dims[1]);
    let extent_x = (nx - 1) as f64 * field.cell_size;
    let extent_y = (ny - 1) as f64 * field.cell_size;
    let count = ((extent_x * extent_y * 0.6).round() as usize).max(1);
    let cx = field.origin[0] + extent_x / 2.0;
    let cy = field.origin[1] + extent_y / 2.0;
    for _ in 0..count {
        let w: f64 = rng.gen_range(0.2..=0.8);
        let l: f64 = rng.gen_range(0.2..=0.8);
        let x0 = field.origin[0] + rng.gen_range(0.0..=extent_x - w.min(extent_x));
        let y0 = field.origin[1] + rng.gen_range(0.0..=extent_y - l.min(extent_y));
        let z = rng.gen_range(-h..=h);
        let ix0 = ((x0 - field.origin[0]) / field.cell_size).ceil() as usize;
        let iy0 = ((y0 - field.origin[1]) / field.cell_size).ceil() as usize;
        let ix1 = (((x0 + w - field.origin[0]) / field.cell_size).floor() as usize).min(nx - 1);
        let iy1 = (((y0 + l - field.origin[1]) / field.cell_size).floor() as usize).min(ny - 1);
        for iy in iy0..=iy1 {
            for ix in ix0..=ix1 {
                field.heights[iy * nx + ix] = z;
            }
        }
    }
    // Flatten the central platform.
    for iy in 0..ny {
        for ix in 0..nx {
            let (x, y) = field.sample_position(ix, iy);
            if (x - cx).abs() <= 0.5 && (y - cy).abs() <= 0.5 {
                field.heights[iy * nx + ix] = 0.0;
            }
        }
    }
}

/// Pyramid stairs ascending from every side toward a central plateau at least
/// 1 m wide.
fn fill_pyramid_stairs(field: &mut TerrainField, difficulty: f64) {
    let riser = stair_riser(difficulty);
    let (nx, ny) = (field.dims[0], field.dims[1]);
    let extent_x = (nx - 1) as f64 * field.cell_size;
    let extent_y = (ny - 1) as f64 * field.cell_size;
    let half = extent_x.min(extent_y) / 2.0;
    let ring_cap = (((half - 0.5) / STAIR_TREAD).floor() as i64).max(0);
    for iy in 0..ny {
        for ix in 0..nx {
            let (x, y) = field.sample_position(ix, iy);
            let border = (x - field.origin[0])
                .min(field.x_max() - x)
                .min(y - field.origin[1])
                .min(field.y_max() - y);
            let ring = ((border / STAIR_TREAD).floor() as i64).min(ring_cap);
            field.heights[iy * nx + ix] = ring as f64 * riser;
        }
    }
}

/// Max-pools the field into the coarse envelope. Windows clipped at the
/// border use the available samples.
pub fn build_coarse_map(field: &TerrainField) -> CoarseHeightMap {
    let extent_x = (field.dims[0] - 1) as f64 * field.cell_size;
    let extent_y = (field.dims[1] - 1) as f64 * field.cell_size;
    let nx = (extent_x / COARSE_CELL_SIZE).round() as usize + 1;
    let ny = (extent_y / COARSE_CELL_SIZE).round() as usize + 1;
    let half = COARSE_WINDOW / 2.0 + 1e-9;
    let mut heights = vec![0.0; nx * ny];
    for iy in 0..ny {
        for ix in 0..nx {
            let cx = field.origin[0] + ix as f64 * COARSE_CELL_SIZE;
            let cy = field.origin[1] + iy as f64 * COARSE_CELL_SIZE;
            let fx0 = (((cx - half) - field.origin[0]) / field.cell_size).ceil().max(0.0) as usize;
            let fy0 = (((cy - half) - field.origin[1]) / field.cell_size).ceil().max(0.0) as usize;
            let fx1 = ((((cx + half) - field.origin[0]) / field.cell_size).floor() as usize)
                .min(field.dims[0] - 1);
            let fy1 = ((((cy + half) - field.origin[1]) / field.cell_size).floor() as usize)
                .min(field.dims[1] - 1);
            let mut best = f64::NEG_INFINITY;
            for fy in fy0..=fy1 {
                for fx in fx0..=fx1 {
                    best = best.max(field.height_at_index(fx, fy));
                }
            }
            heights[iy * nx + ix] = best;
        }
    }
    CoarseHeightMap {
        schema_version: 1,
        cell_size: COARSE_CELL_SIZE,
        window: COARSE_WINDOW,
        origin: field.origin,
        dims: [nx, ny],
        heights,
    }
}
