//! Mariani-Silver rendering of the Mandelbrot set.
//!
//! A rectangle whose border pixels all share one dwell is filled with it;
//! otherwise it is split into a grid of smaller rectangles, down to a depth
//! limit where every pixel is evaluated. The naive per-pixel renderer in
//! [`naive_escape_time`] is the correctness oracle.

use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::exec::{Dispatcher, ExecError, TaskKind};
use crate::workload::Workload;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Viewport {
    pub x_min: f64,
    pub x_max: f64,
    pub y_min: f64,
    pub y_max: f64,
}

impl Default for Viewport {
    fn default() -> Self {
        Self {
            x_min: -2.0,
            x_max: 1.0,
            y_min: -1.5,
            y_max: 1.5,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct MandelParams {
    pub width: u32,
    pub height: u32,
    pub max_dwell: u32,
    /// Initial grid of `sd × sd` rectangles.
    pub sd: u32,
    /// Sub-rectangles per split, arranged as a grid (4 = 2×2).
    pub split_factor: u32,
    pub max_depth: u32,
    pub viewport: Viewport,
}

impl Default for MandelParams {
    fn default() -> Self {
        Self {
            width: 512,
            height: 512,
            max_dwell: 10_000,
            sd: 8,
            split_factor: 4,
            max_depth: 4,
            viewport: Viewport::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum MandelError {
    #[error("invalid mandelbrot parameters: {0}")]
    InvalidParams(String),
    #[error("coverage check failed: {0}")]
    Coverage(String),
    #[error(transparent)]
    Exec(#[from] ExecError),
}

impl MandelParams {
    pub fn validate(&self) -> Result<(), MandelError> {
        let bad = |m: &str| Err(MandelError::InvalidParams(m.into()));
        if self.width == 0 || self.height == 0 {
            return bad("width and height must be >= 1");
        }
        if self.max_dwell == 0 {
            return bad("max_dwell must be >= 1");
        }
        if self.sd == 0 {
            return bad("sd must be >= 1");
        }
        if self.split_factor < 2 {
            return bad("split_factor must be >= 2");
        }
        let v = &self.viewport;
        if !(v.x_max > v.x_min && v.y_max > v.y_min) {
            return bad("viewport must have positive extent");
        }
        Ok(())
    }

    fn geometry(&self) -> Geometry {
        Geometry {
            width: self.width,
            height: self.height,
            max_dwell: self.max_dwell,
            max_depth: self.max_depth,
            viewport: self.viewport,
        }
    }
}

/// What a rectangle task needs to know about the image.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Geometry {
    pub width: u32,
    pub height: u32,
    pub max_dwell: u32,
    pub max_depth: u32,
    pub viewport: Viewport,
}

impl Geometry {
    /// Complex coordinate of the centre of pixel `(x, y)`.
    pub fn pixel_to_c(&self, x: u32, y: u32) -> (f64, f64) {
        let v = &self.viewport;
        let cx = v.x_min + (x as f64 + 0.5) / self.width as f64 * (v.x_max - v.x_min);
        let cy = v.y_min + (y as f64 + 0.5) / self.height as f64 * (v.y_max - v.y_min);
        (cx, cy)
    }

    fn dwell_at(&self, x: u32, y: u32) -> u32 {
        let (cx, cy) = self.pixel_to_c(x, y);
        dwell(cx, cy, self.max_dwell)
    }
}

/// Escape-time iteration count of `c = cx + i·cy`: the first `k` at which
/// `|z_k| > 2`, or `max_dwell` if that never happens.
pub fn dwell(cx: f64, cy: f64, max_dwell: u32) -> u32 {
    let (mut zx, mut zy) = (0.0f64, 0.0f64);
    for k in 1..=max_dwell {
        let x2 = zx * zx;
        let y2 = zy * zy;
        let nzx = x2 - y2 + cx;
        zy = 2.0 * zx * zy + cy;
        zx = nzx;
        if zx * zx + zy * zy > 4.0 {
            return k;
        }
    }
    max_dwell
}

/// Half-open pixel rectangle at a recursion depth.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct PixelRect {
    pub x0: u32,
    pub y0: u32,
    pub w: u32,
    pub h: u32,
    pub depth: u32,
}

impl PixelRect {
    pub fn area(&self) -> u64 {
        self.w as u64 * self.h as u64
    }

    /// Splits into a `gx × gy` grid with floor/ceil widths, dropping empty
    /// cells. Children are one level deeper.
    pub fn split_grid(&self, gx: u32, gy: u32) -> Vec<PixelRect> {
        let mut out = Vec::with_capacity((gx * gy) as usize);
        for j in 0..gy {
            let (y0, h) = cut(self.h, gy, j);
            for i in 0..gx {
                let (x0, w) = cut(self.w, gx, i);
                if w > 0 && h > 0 {
                    out.push(PixelRect {
                        x0: self.x0 + x0,
                        y0: self.y0 + y0,
                        w,
                        h,
                        depth: self.depth + 1,
                    });
                }
            }
        }
        out
    }

    fn border(&self) -> Vec<(u32, u32)> {
        let (x1, y1) = (self.x0 + self.w - 1, self.y0 + self.h - 1);
        let mut px = Vec::with_capacity(2 * (self.w + self.h) as usize);
        for x in self.x0..=x1 {
            px.push((x, self.y0));
            if y1 != self.y0 {
                px.push((x, y1));
            }
        }
        for y in self.y0 + 1..y1 {
            px.push((self.x0, y));
            if x1 != self.x0 {
                px.push((x1, y));
            }
        }
        px
    }
}

/// Offset and length of part `i` of `n` parts of `len`.
fn cut(len: u32, n: u32, i: u32) -> (u32, u32) {
    let a = (len as u64 * i as u64 / n as u64) as u32;
    let b = (len as u64 * (i as u64 + 1) / n as u64) as u32;
    (a, b - a)
}

/// Grid shape for a split factor: the most square factorization.
pub fn grid_for(split_factor: u32) -> (u32, u32) {
    let mut gx = (split_factor as f64).sqrt() as u32;
    while gx > 1 && !split_factor.is_multiple_of(gx) {
        gx -= 1;
    }
    let gx = gx.max(1);
    (gx, split_factor / gx)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BorderDwell {
    Common(u32),
    Mixed,
}

/// Border evaluations of one rectangle, kept for reuse.
#[derive(Debug, Clone)]
pub struct BorderScan {
    pub result: BorderDwell,
    pixels: Vec<((u32, u32), u32)>,
}

pub fn border_common_dwell(rect: &PixelRect, g: &Geometry) -> BorderScan {
    let pixels: Vec<_> = rect
        .border()
        .into_iter()
        .map(|(x, y)| ((x, y), g.dwell_at(x, y)))
        .collect();
    let first = pixels[0].1;
    let result = if pixels.iter().all(|p| p.1 == first) {
        BorderDwell::Common(first)
    } else {
        BorderDwell::Mixed
    };
    BorderScan { result, pixels }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub enum Action {
    Fill(u32),
    /// Row-major dwell values of the whole rectangle.
    DwellArray(Vec<u32>),
    Split,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RectResult {
    pub rect: PixelRect,
    pub action: Action,
    /// Calls to [`dwell`] made for this rectangle.
    pub evaluations: u64,
}

pub fn evaluate_rect(rect: &PixelRect, g: &Geometry) -> RectResult {
    let scan = border_common_dwell(rect, g);
    let mut evaluations = scan.pixels.len() as u64;
    let action = match scan.result {
        BorderDwell::Common(d) => Action::Fill(d),
        BorderDwell::Mixed if rect.depth >= g.max_depth => {
            let w = rect.w as usize;
            let n = w * rect.h as usize;
            let mut data = vec![0u32; n];
            let mut known = vec![false; n];
            for &((x, y), d) in &scan.pixels {
                let i = (y - rect.y0) as usize * w + (x - rect.x0) as usize;
                data[i] = d;
                known[i] = true;
            }
            for (i, v) in data.iter_mut().enumerate() {
                if !known[i] {
                    *v = g.dwell_at(rect.x0 + (i % w) as u32, rect.y0 + (i / w) as u32);
                    evaluations += 1;
                }
            }
            Action::DwellArray(data)
        }
        BorderDwell::Mixed => Action::Split,
    };
    RectResult {
        rect: *rect,
        action,
        evaluations,
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DwellImage {
    pub width: u32,
    pub height: u32,
    pub data: Vec<u32>,
}

impl DwellImage {
    pub fn get(&self, x: u32, y: u32) -> u32 {
        self.data[(y * self.width + x) as usize]
    }

    /// Binary greymap with dwells scaled linearly onto 0..=255.
    pub fn write_pgm<W: Write>(&self, mut out: W) -> std::io::Result<()> {
        write!(out, "P5\n{} {}\n255\n", self.width, self.height)?;
        let lo = self.data.iter().copied().min().unwrap_or(0);
        let hi = self.data.iter().copied().max().unwrap_or(0);
        let span = (hi - lo).max(1) as f64;
        let bytes: Vec<u8> = self
            .data
            .iter()
            .map(|&d| ((d - lo) as f64 / span * 255.0).round() as u8)
            .collect();
        out.write_all(&bytes)
    }
}

/// Per-pixel escape time over the whole image.
pub fn naive_escape_time(params: &MandelParams) -> DwellImage {
    let g = params.geometry();
    let mut data = Vec::with_capacity(params.width as usize * params.height as usize);
    for y in 0..params.height {
        for x in 0..params.width {
            data.push(g.dwell_at(x, y));
        }
    }
    DwellImage {
        width: params.width,
        height: params.height,
        data,
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RectRequest {
    pub geometry: Geometry,
    pub rect: PixelRect,
}

#[derive(Debug, Clone, Copy, Default)]
pub struct MandelWorkload;

impl Workload for MandelWorkload {
    type Request = RectRequest;
    type Response = RectResult;
    const KIND: TaskKind = TaskKind::MandelRect;

    fn execute(&self, req: &RectRequest) -> Result<RectResult, ExecError> {
        let g = &req.geometry;
        let r = &req.rect;
        if r.w == 0 || r.h == 0 || r.x0 + r.w > g.width || r.y0 + r.h > g.height {
            return Err(ExecError::TaskFailed(format!(
                "rectangle out of bounds: {r:?}"
            )));
        }
        Ok(evaluate_rect(r, g))
    }

    fn work_units(_: &RectRequest, resp: &RectResult) -> u64 {
        resp.evaluations
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct MandelOutcome {
    pub image: DwellImage,
    pub tasks: u64,
    pub evaluations: u64,
}

/// Master loop: seeds the `sd × sd` grid, paints FILL and dwell-array
/// results, and dispatches the sub-rectangles of every SPLIT.
pub fn mariani_silver<D: Dispatcher<MandelWorkload> + ?Sized>(
    params: &MandelParams,
    dispatcher: &mut D,
) -> Result<MandelOutcome, MandelError> {
    params.validate()?;
    let geometry = params.geometry();
    let (w, h) = (params.width, params.height);
    let mut data = vec![0u32; w as usize * h as usize];
    let mut written = vec![false; data.len()];
    let whole = PixelRect {
        x0: 0,
        y0: 0,
        w,
        h,
        depth: 0,
    };
    let mut tasks = 0;
    for mut rect in whole.split_grid(params.sd, params.sd) {
        rect.depth = 0;
        dispatcher.dispatch(RectRequest { geometry, rect })?;
        tasks += 1;
    }
    let (gx, gy) = grid_for(params.split_factor);
    let mut evaluations = 0;
    while let Some(done) = dispatcher.next() {
        let res = done.result?;
        evaluations += res.evaluations;
        let r = res.rect;
        let mut paint = |i: usize, d: u32| -> Result<(), MandelError> {
            if std::mem::replace(&mut written[i], true) {
                return Err(MandelError::Coverage(format!("pixel {i} written twice")));
            }
            data[i] = d;
            Ok(())
        };
        match res.action {
            Action::Fill(d) => {
                for y in r.y0..r.y0 + r.h {
                    for x in r.x0..r.x0 + r.w {
                        paint((y * w + x) as usize, d)?;
                    }
                }
            }
            Action::DwellArray(values) => {
                if values.len() as u64 != r.area() {
                    return Err(MandelError::Coverage(format!("bad dwell array for {r:?}")));
                }
                for (k, d) in values.into_iter().enumerate() {
                    let x = r.x0 + k as u32 % r.w;
                    let y = r.y0 + k as u32 / r.w;
                    paint((y * w + x) as usize, d)?;
                }
            }
            Action::Split => {
                for rect in r.split_grid(gx, gy) {
                    dispatcher.dispatch(RectRequest { geometry, rect })?;
                    tasks += 1;
                }
            }
        }
    }
    if let Some(i) = written.iter().position(|&b| !b) {
        return Err(MandelError::Coverage(format!(
            "pixel ({}, {}) never written",
            i as u32 % w,
            i as u32 / w
        )));
    }
    Ok(MandelOutcome {
        image: DwellImage {
            width: w,
            height: h,
            data,
        },
        tasks,
        evaluations,
    })
}
