//! Distance-colored cluster pictures as binary PPM.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::field::{Field, FieldParams};
use crate::graph::{GraphSpec, Vertex, Window};
use crate::search::{zero_one_search, Visit};

pub const PALETTE_LEN: usize = 64;
pub const BACKGROUND: [u8; 3] = [0, 0, 0];

/// Fixed cyclic rainbow: entry `i` sweeps the hue wheel in 64 steps with
/// every channel at least 32, so no entry equals the black background.
pub fn palette() -> [[u8; 3]; PALETTE_LEN] {
    let mut out = [[0u8; 3]; PALETTE_LEN];
    for (i, c) in out.iter_mut().enumerate() {
        let h = i * 6 * 224 / PALETTE_LEN;
        let (sector, f) = (h / 224, (h % 224) as u8);
        let (lo, hi) = (32u8, 255u8);
        let up = lo + f;
        let down = hi - f;
        *c = match sector {
            0 => [hi, up, lo],
            1 => [down, hi, lo],
            2 => [lo, hi, up],
            3 => [lo, down, hi],
            4 => [up, lo, hi],
            _ => [hi, lo, down],
        };
    }
    out
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum RenderMode {
    /// Breadth-first distance along open edges; the whole open cluster inside
    /// the viewport is colored.
    #[default]
    HopDistance,
    /// Passage time with closed edges costing 1; the search stops at the
    /// first settled vertex on the viewport border.
    PassageTime,
}

#[derive(Clone, Debug)]
pub struct RenderJob {
    pub g: GraphSpec,
    pub params: FieldParams,
    /// Viewport is `[-W, W]^2`, one pixel per vertex.
    pub half_width: i64,
    pub mode: RenderMode,
}

impl RenderJob {
    fn check(&self) -> Result<()> {
        if self.g.dim() != 2 {
            return Err(Error::InvalidArgument("rendering needs a two-dimensional graph".into()));
        }
        if !(1..=4096).contains(&self.half_width) {
            return Err(Error::InvalidArgument(format!(
                "half-width {} outside 1..=4096",
                self.half_width
            )));
        }
        Ok(())
    }

    pub fn side(&self) -> usize {
        (2 * self.half_width + 1) as usize
    }
}

/// Settled vertices with their distances, in settle order.
pub fn settled_vertices(job: &RenderJob) -> Result<Vec<(Vertex, u32)>> {
    job.check()?;
    let field = Field::new(&job.params);
    let viewport = Window::boxed(job.half_width);
    let w = job.half_width;
    let mut out = Vec::new();
    match job.mode {
        RenderMode::HopDistance => {
            zero_one_search(
                &job.g,
                job.g.origin(),
                &viewport,
                |v, i| field.is_open(v, i).then_some(1),
                |v, d| {
                    out.push((*v, d));
                    Visit::Continue
                },
            );
        }
        RenderMode::PassageTime => {
            zero_one_search(
                &job.g,
                job.g.origin(),
                &viewport,
                |v, i| Some(field.time(v, i)),
                |v, d| {
                    out.push((*v, d));
                    if v.norm_inf() == w {
                        Visit::Stop
                    } else {
                        Visit::Continue
                    }
                },
            );
        }
    }
    Ok(out)
}

/// Binary PPM (P6) of the settled vertices colored by distance modulo 64;
/// the top row is `y = W`.
pub fn render_cluster(job: &RenderJob) -> Result<Vec<u8>> {
    let settled = settled_vertices(job)?;
    let side = job.side();
    let pal = palette();
    let header = format!("P6\n{side} {side}\n255\n");
    let mut img = Vec::with_capacity(header.len() + side * side * 3);
    img.extend_from_slice(header.as_bytes());
    let start = img.len();
    img.resize(start + side * side * 3, 0);
    for c in img[start..].chunks_exact_mut(3) {
        c.copy_from_slice(&BACKGROUND);
    }
    let w = job.half_width;
    for (v, d) in settled {
        let (x, y) = (v.coords()[0], v.coords()[1]);
        let row = (w - y) as usize;
        let col = (x + w) as usize;
        let at = start + (row * side + col) * 3;
        img[at..at + 3].copy_from_slice(&pal[d as usize % PALETTE_LEN]);
    }
    Ok(img)
}
