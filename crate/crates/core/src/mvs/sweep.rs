use super::{MvsError, SweepParams, FLAT_COST_EPSILON, MIN_VARIANCE};
use crate::geometry::{Camera, PixelCoord};
use crate::image::GrayImage;
use crate::model_io::DepthMap;
use nalgebra::{Matrix3, Vector2, Vector3};
use rayon::prelude::*;

/// Rows processed together by one worker. Fixed so results never depend on
/// the number of workers.
const BAND_ROWS: usize = 64;

/// A rectangular region of a camera frame backed by one or more gray tiles.
///
/// Pixel `(x, y)` of the region is frame pixel `(origin.0 + x, origin.1 + y)`.
/// Lookups go through per-axis tables, so adjacent tiles are read in place.
#[derive(Debug, Clone)]
pub struct TiledGray<'a> {
    origin: (u32, u32),
    width: u32,
    height: u32,
    cols: usize,
    tiles: Vec<&'a GrayImage>,
    xmap: Vec<(u32, u32)>,
    ymap: Vec<(u32, u32)>,
}

impl<'a> TiledGray<'a> {
    /// A whole image at the frame origin.
    pub fn single(image: &'a GrayImage) -> Self {
        Self::window(image, (0, 0))
    }

    /// One image covering the frame region starting at `origin`.
    pub fn window(image: &'a GrayImage, origin: (u32, u32)) -> Self {
        Self::from_tiles(origin, &[image.width], &[image.height], vec![image])
    }

    /// Row-major grid of tiles with the given column widths and row heights.
    ///
    /// # Panics
    /// If a tile's size disagrees with its column width or row height.
    pub fn from_tiles(origin: (u32, u32), col_widths: &[u32], row_heights: &[u32], tiles: Vec<&'a GrayImage>) -> Self {
        assert_eq!(tiles.len(), col_widths.len() * row_heights.len(), "tile count does not match the grid");
        for (k, t) in tiles.iter().enumerate() {
            assert_eq!(t.width, col_widths[k % col_widths.len()], "tile width mismatch");
            assert_eq!(t.height, row_heights[k / col_widths.len()], "tile height mismatch");
        }
        let axis = |spans: &[u32]| -> Vec<(u32, u32)> {
            spans.iter().enumerate().flat_map(|(i, &len)| (0..len).map(move |l| (i as u32, l))).collect()
        };
        let xmap = axis(col_widths);
        let ymap = axis(row_heights);
        Self { origin, width: xmap.len() as u32, height: ymap.len() as u32, cols: col_widths.len(), tiles, xmap, ymap }
    }

    pub fn origin(&self) -> (u32, u32) {
        self.origin
    }

    pub fn width(&self) -> u32 {
        self.width
    }

    pub fn height(&self) -> u32 {
        self.height
    }

    /// Value at region-local pixel `(x, y)`.
    #[inline]
    pub fn get(&self, x: u32, y: u32) -> f32 {
        let (tx, lx) = self.xmap[x as usize];
        let (ty, ly) = self.ymap[y as usize];
        let t = self.tiles[ty as usize * self.cols + tx as usize];
        t.data[ly as usize * t.width as usize + lx as usize]
    }

    /// Bilinear sample at continuous region-local index coordinates, or
    /// `None` outside `[0, width - 1] x [0, height - 1]`.
    #[inline]
    fn bilinear(&self, x: f64, y: f64) -> Option<f64> {
        let (w, h) = (self.width, self.height);
        if !(x >= 0.0 && y >= 0.0 && x <= (w - 1) as f64 && y <= (h - 1) as f64) || w < 2 || h < 2 {
            return None;
        }
        // Both coordinates are non-negative here, so truncation is the floor.
        let x0 = (x as u32).min(w - 2);
        let y0 = (y as u32).min(h - 2);
        let fx = x - x0 as f64;
        let fy = y - y0 as f64;
        let (tx0, lx0) = self.xmap[x0 as usize];
        let (tx1, lx1) = self.xmap[x0 as usize + 1];
        let (ty0, ly0) = self.ymap[y0 as usize];
        let (ty1, ly1) = self.ymap[y0 as usize + 1];
        let (v00, v10, v01, v11) = if tx0 == tx1 && ty0 == ty1 {
            let t = self.tiles[ty0 as usize * self.cols + tx0 as usize];
            let tw = t.width as usize;
            let i = ly0 as usize * tw + lx0 as usize;
            (t.data[i] as f64, t.data[i + 1] as f64, t.data[i + tw] as f64, t.data[i + tw + 1] as f64)
        } else {
            let at = |tx: u32, lx: u32, ty: u32, ly: u32| {
                let t = self.tiles[ty as usize * self.cols + tx as usize];
                t.data[ly as usize * t.width as usize + lx as usize] as f64
            };
            (at(tx0, lx0, ty0, ly0), at(tx1, lx1, ty0, ly0), at(tx0, lx0, ty1, ly1), at(tx1, lx1, ty1, ly1))
        };
        let top = v00 + (v10 - v00) * fx;
        let bottom = v01 + (v11 - v01) * fx;
        Some(top + (bottom - top) * fy)
    }
}

/// One view entering the sweep: the camera of its full frame plus the part
/// of that frame held in memory.
#[derive(Debug, Clone)]
pub struct SweepInput<'a> {
    pub frame: Camera,
    pub image: TiledGray<'a>,
}

impl<'a> SweepInput<'a> {
    pub fn whole(camera: Camera, image: &'a GrayImage) -> Self {
        Self { frame: camera, image: TiledGray::single(image) }
    }

    /// Camera of the held region alone; its principal point is shifted by the region origin.
    pub fn camera(&self) -> Camera {
        let mut c = self.frame;
        c.intrinsics.cx -= self.image.origin.0 as f64;
        c.intrinsics.cy -= self.image.origin.1 as f64;
        c.width = self.image.width;
        c.height = self.image.height;
        c
    }
}

/// Depth map plus per-pixel matching diagnostics.
#[derive(Debug, Clone)]
pub struct SweepResult {
    pub depth: DepthMap,
    /// Mean NCC at the chosen hypothesis; NaN where no hypothesis had support.
    pub best_ncc: Vec<f32>,
    /// Index of the chosen hypothesis; `u32::MAX` where none had support.
    pub best_index: Vec<u32>,
}

/// Plane-sweep depth map of `reference` against `sources`.
pub fn plane_sweep(view_id: &str, reference: &SweepInput, sources: &[SweepInput], params: &SweepParams) -> Result<DepthMap, MvsError> {
    plane_sweep_detailed(view_id, reference, sources, params).map(|r| r.depth)
}

struct SourceGeometry {
    a: Matrix3<f64>,
    b: Vector3<f64>,
}

struct BandOutput {
    depth: Vec<f32>,
    ncc: Vec<f32>,
    index: Vec<u32>,
}

pub fn plane_sweep_detailed(view_id: &str, reference: &SweepInput, sources: &[SweepInput], params: &SweepParams) -> Result<SweepResult, MvsError> {
    params.validate()?;
    if sources.is_empty() {
        return Err(MvsError::NoSources);
    }
    let w = reference.image.width as usize;
    let h = reference.image.height as usize;
    let half = params.window / 2;
    let hyps = params.hypotheses();
    let (ox, oy) = reference.image.origin;

    // Normalized rays of the reference pixel centers, in frame coordinates.
    let rays: Vec<Option<Vector2<f64>>> = (0..h)
        .into_par_iter()
        .flat_map_iter(|y| {
            (0..w).map(move |x| {
                let c = PixelCoord::new((ox as usize + x) as f64 + 0.5, (oy as usize + y) as f64 + 0.5);
                reference.frame.intrinsics.pixel_to_normalized(c).ok()
            })
        })
        .collect();
    let ref_vals: Vec<f64> = (0..h).flat_map(|y| (0..w).map(move |x| (x, y))).map(|(x, y)| reference.image.get(x as u32, y as u32) as f64).collect();

    let r_ref = reference.frame.extrinsics.rotation();
    let c_ref = reference.frame.center();
    let geo: Vec<SourceGeometry> = sources
        .iter()
        .map(|s| {
            let r_s = s.frame.extrinsics.rotation();
            SourceGeometry { a: r_s * r_ref.transpose(), b: r_s * c_ref + s.frame.extrinsics.translation() }
        })
        .collect();

    let ctx = Ctx { w, h, half, rays: &rays, ref_vals: &ref_vals, hyps: &hyps, sources, geo: &geo, params };
    let bands: Vec<BandOutput> = (0..h.div_ceil(BAND_ROWS))
        .into_par_iter()
        .map(|b| ctx.band(b * BAND_ROWS, ((b + 1) * BAND_ROWS).min(h)))
        .collect();

    let mut depth = Vec::with_capacity(w * h);
    let mut best_ncc = Vec::with_capacity(w * h);
    let mut best_index = Vec::with_capacity(w * h);
    for b in bands {
        depth.extend(b.depth);
        best_ncc.extend(b.ncc);
        best_index.extend(b.index);
    }
    Ok(SweepResult { depth: DepthMap::from_depths(view_id, w as u32, h as u32, depth), best_ncc, best_index })
}

struct Ctx<'a, 'b> {
    w: usize,
    h: usize,
    half: usize,
    rays: &'a [Option<Vector2<f64>>],
    ref_vals: &'a [f64],
    hyps: &'a [f64],
    sources: &'a [SweepInput<'b>],
    geo: &'a [SourceGeometry],
    params: &'a SweepParams,
}

impl Ctx<'_, '_> {
    #[inline]
    fn xrange(&self, x: usize) -> (usize, usize) {
        (x.saturating_sub(self.half), (x + self.half).min(self.w - 1))
    }

    #[inline]
    fn yrange(&self, y: usize) -> (usize, usize) {
        (y.saturating_sub(self.half), (y + self.half).min(self.h - 1))
    }

    /// Vertical window sums of the halo rows `src` (first row `lo`) for output rows `[y0, y1)`.
    fn column_sums<T: Copy + Default + std::ops::AddAssign>(&self, src: &[T], dst: &mut [T], y0: usize, y1: usize, lo: usize) {
        let w = self.w;
        for (y, out) in (y0..y1).zip(dst.chunks_exact_mut(w)) {
            out.fill(T::default());
            let (a, b) = self.yrange(y);
            for row in src[(a - lo) * w..(b - lo + 1) * w].chunks_exact(w) {
                for (o, v) in out.iter_mut().zip(row) {
                    *o += *v;
                }
            }
        }
    }

    /// Sweeps rows `[y0, y1)`; reads rows within the window halo around them.
    ///
    /// Window sums add samples in ascending row and column order starting
    /// from zero, for every pixel, so a pixel's statistics depend only on
    /// the samples under its window.
    fn band(&self, y0: usize, y1: usize) -> BandOutput {
        let w = self.w;
        let half = self.half;
        let lo = y0.saturating_sub(half);
        let hi = (y1 + half).min(self.h);
        let halo = hi - lo;
        let out_n = (y1 - y0) * w;
        let ref_vals = &self.ref_vals[lo * w..hi * w];

        // Reference window statistics for the band's rows.
        let ref_sq: Vec<f64> = ref_vals.iter().map(|v| v * v).collect();
        let mut hr = vec![0.0; halo * w];
        let mut hrr = vec![0.0; halo * w];
        row_sums(ref_vals, &mut hr, w, half);
        row_sums(&ref_sq, &mut hrr, w, half);
        let mut sr = vec![0.0; out_n];
        let mut srr = vec![0.0; out_n];
        self.column_sums(&hr, &mut sr, y0, y1, lo);
        self.column_sums(&hrr, &mut srr, y0, y1, lo);
        let mut n_win = vec![0u32; out_n];
        let mut var_r = vec![0.0; out_n];
        for y in y0..y1 {
            let (a, b) = self.yrange(y);
            for x in 0..w {
                let (xa, xb) = self.xrange(x);
                let n = ((b - a + 1) * (xb - xa + 1)) as f64;
                let i = (y - y0) * w + x;
                n_win[i] = n as u32;
                var_r[i] = srr[i] / n - (sr[i] / n) * (sr[i] / n);
            }
        }
        drop((hr, hrr, srr, ref_sq));

        let mut best_cost = vec![f64::INFINITY; out_n];
        let mut worst_cost = vec![f64::NEG_INFINITY; out_n];
        let mut best_ncc = vec![f32::NAN; out_n];
        let mut best_idx = vec![u32::MAX; out_n];

        // Rotated rays do not depend on the hypothesis.
        let rotated: Vec<Vec<Option<Vector3<f64>>>> = self
            .geo
            .iter()
            .map(|g| self.rays[lo * w..hi * w].iter().map(|r| r.map(|q| g.a * Vector3::new(q.x, q.y, 1.0))).collect())
            .collect();
        let mut val = vec![0.0; halo * w];
        let mut inb = vec![0u32; halo * w];
        let mut sq = vec![0.0; halo * w];
        let mut cross = vec![0.0; halo * w];
        let mut hs = vec![0.0; halo * w];
        let mut hss = vec![0.0; halo * w];
        let mut hrs = vec![0.0; halo * w];
        let mut hin = vec![0u32; halo * w];
        let mut ws = vec![0.0; out_n];
        let mut wss = vec![0.0; out_n];
        let mut wrs = vec![0.0; out_n];
        let mut win = vec![0u32; out_n];
        let mut cost_sum = vec![0.0; out_n];
        let mut ncc_sum = vec![0.0; out_n];
        let mut count = vec![0u32; out_n];

        for (hi_idx, &d) in self.hyps.iter().enumerate() {
            cost_sum.fill(0.0);
            ncc_sum.fill(0.0);
            count.fill(0);
            for ((src, g), aq) in self.sources.iter().zip(self.geo).zip(&rotated) {
                warp(src, g, aq, d, &mut val, &mut inb);
                for ((q, c), (v, r)) in sq.iter_mut().zip(cross.iter_mut()).zip(val.iter().zip(ref_vals)) {
                    *q = v * v;
                    *c = v * r;
                }
                row_sums(&val, &mut hs, w, half);
                row_sums(&sq, &mut hss, w, half);
                row_sums(&cross, &mut hrs, w, half);
                row_sums(&inb, &mut hin, w, half);
                self.column_sums(&hs, &mut ws, y0, y1, lo);
                self.column_sums(&hss, &mut wss, y0, y1, lo);
                self.column_sums(&hrs, &mut wrs, y0, y1, lo);
                self.column_sums(&hin, &mut win, y0, y1, lo);
                for i in 0..out_n {
                    let n = win[i];
                    if n != n_win[i] || var_r[i] < MIN_VARIANCE {
                        continue;
                    }
                    let nf = n as f64;
                    let ms = ws[i] / nf;
                    let var_s = wss[i] / nf - ms * ms;
                    if var_s < MIN_VARIANCE {
                        continue;
                    }
                    let cov = wrs[i] / nf - (sr[i] / nf) * ms;
                    let ncc = (cov / (var_r[i] * var_s).sqrt()).clamp(-1.0, 1.0);
                    cost_sum[i] += 1.0 - ncc;
                    ncc_sum[i] += ncc;
                    count[i] += 1;
                }
            }
            for i in 0..out_n {
                if count[i] == 0 {
                    continue;
                }
                let c = cost_sum[i] / count[i] as f64;
                if c < best_cost[i] {
                    best_cost[i] = c;
                    best_idx[i] = hi_idx as u32;
                    best_ncc[i] = (ncc_sum[i] / count[i] as f64) as f32;
                }
                if c > worst_cost[i] {
                    worst_cost[i] = c;
                }
            }
        }

        let mut depth = vec![0.0f32; out_n];
        for i in 0..out_n {
            if best_idx[i] == u32::MAX {
                continue;
            }
            if (best_ncc[i] as f64) >= self.params.cost_threshold && worst_cost[i] - best_cost[i] >= FLAT_COST_EPSILON {
                depth[i] = self.hyps[best_idx[i] as usize] as f32;
            }
        }
        BandOutput { depth, ncc: best_ncc, index: best_idx }
    }
}

/// Horizontal window sums of every row of `src`, clipped at the row ends.
fn row_sums<T: Copy + Default + std::ops::AddAssign>(src: &[T], dst: &mut [T], w: usize, half: usize) {
    for (row, out) in src.chunks_exact(w).zip(dst.chunks_exact_mut(w)) {
        out.fill(T::default());
        for k in 0..=2 * half {
            // Output x reads input x + k - half.
            let (xs, xe) = (half.saturating_sub(k), (w + half).saturating_sub(k).min(w));
            if xs >= xe {
                continue;
            }
            let shift = xs + k - half;
            for (o, v) in out[xs..xe].iter_mut().zip(&row[shift..shift + (xe - xs)]) {
                *o += *v;
            }
        }
    }
}

/// Samples the source at the projection of every rotated ray `aq` lifted to depth `d`.
fn warp(src: &SweepInput, g: &SourceGeometry, rotated: &[Option<Vector3<f64>>], d: f64, val: &mut [f64], inb: &mut [u32]) {
    let intr = &src.frame.intrinsics;
    let (rx, ry) = (src.image.origin.0 as f64, src.image.origin.1 as f64);
    for ((aq, v), ok) in rotated.iter().zip(val.iter_mut()).zip(inb.iter_mut()) {
        *v = 0.0;
        *ok = 0;
        let Some(aq) = aq else { continue };
        let p = aq * d + g.b;
        if !(p.z > crate::geometry::BEHIND_EPSILON) {
            continue;
        }
        let px = intr.normalized_to_pixel(Vector2::new(p.x / p.z, p.y / p.z));
        if let Some(s) = src.image.bilinear((px.u - 0.5) - rx, (px.v - 0.5) - ry) {
            *v = s;
            *ok = 1;
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::{Extrinsics, Intrinsics};
    use crate::oracle::{generate_scene, render_view, Extent, SceneSpec};
    use nalgebra::Matrix3;

    fn nadir(center: Vector3<f64>, w: u32, h: u32, f: f64) -> Camera {
        let r = Matrix3::new(1.0, 0.0, 0.0, 0.0, -1.0, 0.0, 0.0, 0.0, -1.0);
        let intr = Intrinsics::pinhole(f, f, w as f64 / 2.0, h as f64 / 2.0).unwrap();
        Camera::new(intr, Extrinsics::from_center(r, center).unwrap(), w, h).unwrap()
    }

    fn plane_scene() -> crate::oracle::Scene {
        let spec = SceneSpec {
            height_amplitude: 0.0,
            texture_wavelength: 0.4,
            extent: Extent { min_x: -20.0, min_y: -20.0, max_x: 20.0, max_y: 20.0 },
            ..Default::default()
        };
        generate_scene(&spec).unwrap()
    }

    #[test]
    fn fronto_parallel_plane_recovers_depth() {
        let scene = plane_scene();
        let a = nadir(Vector3::new(0.0, 0.0, 5.0), 96, 72, 80.0);
        let b = nadir(Vector3::new(0.6, 0.0, 5.0), 96, 72, 80.0);
        let ga = render_view(&scene, &a).to_image().to_gray();
        let gb = render_view(&scene, &b).to_image().to_gray();
        let params = SweepParams::new(2.0, 10.0);
        let r = plane_sweep_detailed("a", &SweepInput::whole(a, &ga), &[SweepInput::whole(b, &gb)], &params).unwrap();
        let step = params.inverse_step();
        let hyps = params.hypotheses();
        // The source sits 9.6 px of parallax to the right, so the leftmost
        // columns have no source support.
        let (mut good, mut total) = (0, 0);
        for y in 0..72 {
            for x in 14..96 {
                total += 1;
                if let Some(d) = r.depth.get(x, y) {
                    assert!(hyps.iter().any(|&hv| hv as f32 == d));
                    if (1.0 / d as f64 - 1.0 / 5.0).abs() < step {
                        good += 1;
                    }
                }
            }
        }
        assert!(good as f64 >= 0.95 * total as f64, "{good} of {total}");
        for (i, &ncc) in r.best_ncc.iter().enumerate() {
            if r.depth.get_index(i).is_some() {
                assert!(ncc as f64 >= params.cost_threshold);
            }
        }
    }

    #[test]
    fn zero_baseline_is_invalid() {
        let scene = plane_scene();
        let a = nadir(Vector3::new(0.0, 0.0, 5.0), 48, 40, 40.0);
        let g = render_view(&scene, &a).to_image().to_gray();
        let params = SweepParams { num_hypotheses: 16, ..SweepParams::new(2.0, 10.0) };
        let d = plane_sweep("a", &SweepInput::whole(a, &g), &[SweepInput::whole(a, &g)], &params).unwrap();
        assert_eq!(d.valid_count(), 0);
    }

    #[test]
    fn textureless_is_invalid() {
        let a = nadir(Vector3::new(0.0, 0.0, 5.0), 32, 24, 40.0);
        let b = nadir(Vector3::new(0.5, 0.0, 5.0), 32, 24, 40.0);
        let g = GrayImage::filled(32, 24, 0.5);
        let params = SweepParams { num_hypotheses: 8, ..SweepParams::new(2.0, 10.0) };
        let d = plane_sweep("a", &SweepInput::whole(a, &g), &[SweepInput::whole(b, &g)], &params).unwrap();
        assert_eq!(d.valid_count(), 0);
    }

    #[test]
    fn errors() {
        let a = nadir(Vector3::new(0.0, 0.0, 5.0), 8, 8, 10.0);
        let g = GrayImage::filled(8, 8, 0.5);
        let params = SweepParams::new(2.0, 10.0);
        assert_eq!(plane_sweep("a", &SweepInput::whole(a, &g), &[], &params).unwrap_err(), MvsError::NoSources);
        let bad = SweepParams::new(10.0, 2.0);
        let src = [SweepInput::whole(a, &g)];
        assert!(matches!(plane_sweep("a", &SweepInput::whole(a, &g), &src, &bad), Err(MvsError::DegenerateRange { .. })));
    }

    #[test]
    fn tiled_lookup_matches_whole_image() {
        let data: Vec<f32> = (0..48).map(|v| v as f32).collect();
        let whole = GrayImage::new(8, 6, data);
        let tl = GrayImage::new(3, 4, (0..4).flat_map(|y| (0..3).map(move |x| (y * 8 + x) as f32)).collect());
        let tr = GrayImage::new(5, 4, (0..4).flat_map(|y| (3..8).map(move |x| (y * 8 + x) as f32)).collect());
        let bl = GrayImage::new(3, 2, (4..6).flat_map(|y| (0..3).map(move |x| (y * 8 + x) as f32)).collect());
        let br = GrayImage::new(5, 2, (4..6).flat_map(|y| (3..8).map(move |x| (y * 8 + x) as f32)).collect());
        let tiled = TiledGray::from_tiles((0, 0), &[3, 5], &[4, 2], vec![&tl, &tr, &bl, &br]);
        let single = TiledGray::single(&whole);
        for y in 0..6 {
            for x in 0..8 {
                assert_eq!(tiled.get(x, y), single.get(x, y));
            }
        }
        assert_eq!(tiled.bilinear(2.5, 3.5), single.bilinear(2.5, 3.5));
        assert_eq!(tiled.bilinear(7.0, 5.0), Some(47.0));
        assert_eq!(tiled.bilinear(7.01, 0.0), None);
    }
}
