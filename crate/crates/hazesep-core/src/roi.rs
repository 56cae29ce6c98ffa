//! Regions of interest: boolean masks, polygon representation, and
//! key-frame interpolation.
//!
//! Masks for intermediate frames come from key-frame masks: each key mask is
//! traced to a boundary polygon, simplified with Douglas-Peucker, resampled
//! to a common vertex count by arc length, linearly interpolated between the
//! bracketing keys, and rasterized back to a mask.
//!
//! Masks load from PNG (any nonzero pixel = inside) or from polygon JSON:
//! a list of `{frame, label, vertices: [[row, col], ...]}` objects.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{CoreError, Result};

const MAX_MASK_DIM: u32 = 1 << 14;
const MAX_MASK_PIXELS: u64 = 1 << 24;
const MAX_POLYGON_VERTICES: usize = 1 << 16;

/// Boolean region over a frame.
#[derive(Debug, Clone, PartialEq)]
pub struct RoiMask {
    rows: usize,
    cols: usize,
    data: Vec<bool>,
    pub label: Option<String>,
}

impl RoiMask {
    pub fn empty(rows: usize, cols: usize) -> Self {
        RoiMask {
            rows,
            cols,
            data: vec![false; rows * cols],
            label: None,
        }
    }

    pub fn full(rows: usize, cols: usize) -> Self {
        RoiMask {
            rows,
            cols,
            data: vec![true; rows * cols],
            label: None,
        }
    }

    /// Elliptical mask; center and semi-axes in pixels.
    pub fn ellipse(rows: usize, cols: usize, center: (f64, f64), semi: (f64, f64)) -> Self {
        let mut mask = Self::empty(rows, cols);
        for r in 0..rows {
            for c in 0..cols {
                let dr = (r as f64 - center.0) / semi.0;
                let dc = (c as f64 - center.1) / semi.1;
                if dr * dr + dc * dc <= 1.0 {
                    mask.set(r, c, true);
                }
            }
        }
        mask
    }

    /// Horizontal band mask over rows [r0, r1).
    pub fn band(rows: usize, cols: usize, r0: usize, r1: usize) -> Self {
        let mut mask = Self::empty(rows, cols);
        for r in r0..r1.min(rows) {
            for c in 0..cols {
                mask.set(r, c, true);
            }
        }
        mask
    }

    pub fn with_label(mut self, label: &str) -> Self {
        self.label = Some(label.to_string());
        self
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn shape(&self) -> (usize, usize) {
        (self.rows, self.cols)
    }

    #[inline]
    pub fn contains(&self, r: usize, c: usize) -> bool {
        self.data[r * self.cols + c]
    }

    #[inline]
    pub fn set(&mut self, r: usize, c: usize, inside: bool) {
        self.data[r * self.cols + c] = inside;
    }

    pub fn count(&self) -> usize {
        self.data.iter().filter(|&&v| v).count()
    }

    pub fn indices(&self) -> impl Iterator<Item = (usize, usize)> + '_ {
        let cols = self.cols;
        self.data
            .iter()
            .enumerate()
            .filter(|(_, &v)| v)
            .map(move |(i, _)| (i / cols, i % cols))
    }

    pub fn is_disjoint(&self, other: &RoiMask) -> bool {
        self.data
            .iter()
            .zip(&other.data)
            .all(|(&a, &b)| !(a && b))
    }

    /// Inclusive bounding box (r0, r1, c0, c1), if nonempty.
    pub fn bounding_box(&self) -> Option<(usize, usize, usize, usize)> {
        let mut bb: Option<(usize, usize, usize, usize)> = None;
        for (r, c) in self.indices() {
            bb = Some(match bb {
                None => (r, r, c, c),
                Some((r0, r1, c0, c1)) => (r0.min(r), r1.max(r), c0.min(c), c1.max(c)),
            });
        }
        bb
    }

    pub fn intersection_count(&self, other: &RoiMask) -> usize {
        self.data
            .iter()
            .zip(&other.data)
            .filter(|(&a, &b)| a && b)
            .count()
    }

    pub fn union_count(&self, other: &RoiMask) -> usize {
        self.data
            .iter()
            .zip(&other.data)
            .filter(|(&a, &b)| a || b)
            .count()
    }

    /// Read a mask from PNG bytes: any pixel with a nonzero color channel is
    /// inside. 8-bit grayscale, grayscale+alpha, RGB, and RGBA are accepted.
    pub fn read_png_bytes(bytes: &[u8]) -> Result<Self> {
        let decoder = png::Decoder::new(std::io::Cursor::new(bytes));
        let mut reader = decoder
            .read_info()
            .map_err(|e| CoreError::Format(format!("mask png: {e}")))?;
        let info = reader.info();
        let (w, h) = (info.width, info.height);
        if w == 0 || h == 0 || w > MAX_MASK_DIM || h > MAX_MASK_DIM {
            return Err(CoreError::Format(format!("mask png dimensions {w}x{h} out of bounds")));
        }
        if (w as u64) * (h as u64) > MAX_MASK_PIXELS {
            return Err(CoreError::Format("mask png too large".into()));
        }
        let mut buf = vec![0u8; reader.output_buffer_size().ok_or_else(|| {
            CoreError::Format("mask png output size overflow".into())
        })?];
        let frame = reader
            .next_frame(&mut buf)
            .map_err(|e| CoreError::Format(format!("mask png: {e}")))?;
        if frame.bit_depth != png::BitDepth::Eight {
            return Err(CoreError::Format("mask png must be 8-bit".into()));
        }
        let channels = match frame.color_type {
            png::ColorType::Grayscale => 1,
            png::ColorType::GrayscaleAlpha => 2,
            png::ColorType::Rgb => 3,
            png::ColorType::Rgba => 4,
            other => {
                return Err(CoreError::Format(format!(
                    "mask png color type {other:?} unsupported"
                )))
            }
        };
        let color_channels = if channels == 2 { 1 } else { channels.min(3) };
        let rows = h as usize;
        let cols = w as usize;
        let mut mask = RoiMask::empty(rows, cols);
        let data = &buf[..frame.buffer_size()];
        for r in 0..rows {
            for c in 0..cols {
                let base = (r * cols + c) * channels;
                let inside = (0..color_channels).any(|ch| data[base + ch] != 0);
                mask.set(r, c, inside);
            }
        }
        Ok(mask)
    }

    pub fn load_png(path: impl AsRef<Path>) -> Result<Self> {
        let bytes = std::fs::read(path)?;
        Self::read_png_bytes(&bytes)
    }

    /// Write the mask as an 8-bit grayscale PNG (255 = inside).
    pub fn write_png<W: std::io::Write>(&self, w: W) -> Result<()> {
        let mut encoder = png::Encoder::new(w, self.cols as u32, self.rows as u32);
        encoder.set_color(png::ColorType::Grayscale);
        encoder.set_depth(png::BitDepth::Eight);
        let mut writer = encoder
            .write_header()
            .map_err(|e| CoreError::Format(format!("png: {e}")))?;
        let bytes: Vec<u8> = self.data.iter().map(|&v| if v { 255 } else { 0 }).collect();
        writer
            .write_image_data(&bytes)
            .map_err(|e| CoreError::Format(format!("png: {e}")))?;
        Ok(())
    }

    pub fn save_png(&self, path: impl AsRef<Path>) -> Result<()> {
        let file = std::fs::File::create(path)?;
        self.write_png(std::io::BufWriter::new(file))
    }
}

/// Closed polygon as (row, col) vertices at pixel-center coordinates.
pub type Polygon = Vec<(f64, f64)>;

/// One key-frame polygon from a polygon JSON file.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct KeyPolygon {
    pub frame: usize,
    #[serde(default)]
    pub label: Option<String>,
    pub vertices: Vec<(f64, f64)>,
}

/// Parse polygon JSON (fuzzing entry point).
pub fn parse_polygon_json(json: &str) -> Result<Vec<KeyPolygon>> {
    let keys: Vec<KeyPolygon> = serde_json::from_str(json)?;
    for k in &keys {
        if k.vertices.len() < 3 {
            return Err(CoreError::Format(format!(
                "polygon for frame {} needs >= 3 vertices",
                k.frame
            )));
        }
        if k.vertices.len() > MAX_POLYGON_VERTICES {
            return Err(CoreError::Format("polygon vertex count out of bounds".into()));
        }
        if k.vertices
            .iter()
            .any(|(r, c)| !(r.is_finite() && c.is_finite()))
        {
            return Err(CoreError::Format("polygon vertices must be finite".into()));
        }
    }
    Ok(keys)
}

pub fn load_polygon_json(path: impl AsRef<Path>) -> Result<Vec<KeyPolygon>> {
    let text = std::fs::read_to_string(path)?;
    parse_polygon_json(&text)
}

fn point_segment_distance(p: (f64, f64), a: (f64, f64), b: (f64, f64)) -> f64 {
    let (px, py) = p;
    let (ax, ay) = a;
    let (bx, by) = b;
    let dx = bx - ax;
    let dy = by - ay;
    let len2 = dx * dx + dy * dy;
    if len2 == 0.0 {
        return ((px - ax).powi(2) + (py - ay).powi(2)).sqrt();
    }
    let t = (((px - ax) * dx + (py - ay) * dy) / len2).clamp(0.0, 1.0);
    let cx = ax + t * dx;
    let cy = ay + t * dy;
    ((px - cx).powi(2) + (py - cy).powi(2)).sqrt()
}

fn douglas_peucker_open(points: &[(f64, f64)], tolerance: f64) -> Vec<(f64, f64)> {
    if points.len() < 3 {
        return points.to_vec();
    }
    let (first, last) = (points[0], points[points.len() - 1]);
    let mut max_dist = 0.0;
    let mut max_idx = 0;
    for (i, &p) in points.iter().enumerate().skip(1).take(points.len() - 2) {
        let d = point_segment_distance(p, first, last);
        if d > max_dist {
            max_dist = d;
            max_idx = i;
        }
    }
    if max_dist <= tolerance {
        return vec![first, last];
    }
    let mut left = douglas_peucker_open(&points[..=max_idx], tolerance);
    let right = douglas_peucker_open(&points[max_idx..], tolerance);
    left.pop();
    left.extend(right);
    left
}

/// Douglas-Peucker simplification of a closed polygon: split at the two
/// mutually farthest vertices, simplify both chains, rejoin.
pub fn simplify_polygon(polygon: &[(f64, f64)], tolerance: f64) -> Polygon {
    if polygon.len() <= 4 {
        return polygon.to_vec();
    }
    let mut best = (0usize, polygon.len() / 2, 0.0f64);
    for i in 0..polygon.len() {
        let j = (i + polygon.len() / 2) % polygon.len();
        let d = (polygon[i].0 - polygon[j].0).powi(2) + (polygon[i].1 - polygon[j].1).powi(2);
        if d > best.2 {
            best = (i.min(j), i.max(j), d);
        }
    }
    let (i, j, _) = best;
    let chain_a: Vec<(f64, f64)> = polygon[i..=j].to_vec();
    let mut chain_b: Vec<(f64, f64)> = polygon[j..].to_vec();
    chain_b.extend_from_slice(&polygon[..=i]);
    let mut simple = douglas_peucker_open(&chain_a, tolerance);
    let b = douglas_peucker_open(&chain_b, tolerance);
    simple.pop();
    simple.extend_from_slice(&b[..b.len().saturating_sub(1)]);
    simple
}

/// Ordered outer boundary of the mask's single connected region
/// (Moore-neighbor tracing, pixel centers).
pub fn trace_boundary(mask: &RoiMask) -> Result<Polygon> {
    let start = mask
        .indices()
        .next()
        .ok_or_else(|| CoreError::InvalidParam("cannot trace an empty mask".into()))?;
    let inside = |r: isize, c: isize| -> bool {
        r >= 0
            && c >= 0
            && (r as usize) < mask.rows()
            && (c as usize) < mask.cols()
            && mask.contains(r as usize, c as usize)
    };
    // Moore neighborhood in clockwise order starting from west.
    const NEIGHBORS: [(isize, isize); 8] = [
        (0, -1),
        (-1, -1),
        (-1, 0),
        (-1, 1),
        (0, 1),
        (1, 1),
        (1, 0),
        (1, -1),
    ];
    let mut boundary: Polygon = Vec::new();
    let start = (start.0 as isize, start.1 as isize);
    let mut current = start;
    let mut backtrack = 0usize; // enter the scan from the west
    let limit = 4 * mask.rows() * mask.cols() + 8;
    loop {
        boundary.push((current.0 as f64, current.1 as f64));
        if boundary.len() > limit {
            return Err(CoreError::InvalidParam("boundary trace did not close".into()));
        }
        let mut found = None;
        for step in 0..8 {
            let dir = (backtrack + step) % 8;
            let (dr, dc) = NEIGHBORS[dir];
            let cand = (current.0 + dr, current.1 + dc);
            if inside(cand.0, cand.1) {
                found = Some((cand, dir));
                break;
            }
        }
        match found {
            None => break, // isolated pixel
            Some((next, dir)) => {
                if next == start && boundary.len() > 1 {
                    break;
                }
                current = next;
                // Back up two steps from the direction we came in.
                backtrack = (dir + 6) % 8;
            }
        }
    }
    Ok(boundary)
}

fn polygon_signed_area(polygon: &[(f64, f64)]) -> f64 {
    let n = polygon.len();
    let mut acc = 0.0;
    for i in 0..n {
        let (r1, c1) = polygon[i];
        let (r2, c2) = polygon[(i + 1) % n];
        acc += c1 * r2 - c2 * r1;
    }
    acc / 2.0
}

/// Resample a closed polygon to `n` vertices equally spaced by arc length,
/// starting from the topmost (then leftmost) vertex with a fixed
/// orientation. Translation-equivariant.
pub fn resample_polygon(polygon: &[(f64, f64)], n: usize) -> Polygon {
    assert!(polygon.len() >= 3 && n >= 3);
    let mut poly = polygon.to_vec();
    if polygon_signed_area(&poly) < 0.0 {
        poly.reverse();
    }
    // Rotate so the topmost-then-leftmost vertex comes first.
    let start = poly
        .iter()
        .enumerate()
        .min_by(|(_, a), (_, b)| a.partial_cmp(b).unwrap())
        .map(|(i, _)| i)
        .unwrap();
    poly.rotate_left(start);
    let m = poly.len();
    let mut cumulative = vec![0.0; m + 1];
    for i in 0..m {
        let (r1, c1) = poly[i];
        let (r2, c2) = poly[(i + 1) % m];
        cumulative[i + 1] = cumulative[i] + ((r2 - r1).powi(2) + (c2 - c1).powi(2)).sqrt();
    }
    let total = cumulative[m];
    if total == 0.0 {
        return vec![poly[0]; n];
    }
    let mut out = Vec::with_capacity(n);
    let mut seg = 0usize;
    for k in 0..n {
        let target = total * k as f64 / n as f64;
        while seg + 1 < m && cumulative[seg + 1] < target {
            seg += 1;
        }
        let seg_len = cumulative[seg + 1] - cumulative[seg];
        let w = if seg_len > 0.0 {
            (target - cumulative[seg]) / seg_len
        } else {
            0.0
        };
        let (r1, c1) = poly[seg];
        let (r2, c2) = poly[(seg + 1) % m];
        out.push((r1 + w * (r2 - r1), c1 + w * (c2 - c1)));
    }
    out
}

/// Rasterize a closed polygon with even-odd scanline fill; polygon edge
/// pixels are included.
pub fn rasterize_polygon(polygon: &[(f64, f64)], rows: usize, cols: usize) -> RoiMask {
    let mut mask = RoiMask::empty(rows, cols);
    if polygon.len() < 3 {
        return mask;
    }
    let n = polygon.len();
    for r in 0..rows {
        let y = r as f64;
        let mut crossings = Vec::new();
        for i in 0..n {
            let (y1, x1) = polygon[i];
            let (y2, x2) = polygon[(i + 1) % n];
            if (y1 <= y && y < y2) || (y2 <= y && y < y1) {
                crossings.push(x1 + (y - y1) * (x2 - x1) / (y2 - y1));
            }
        }
        crossings.sort_by(|a, b| a.partial_cmp(b).unwrap());
        for pair in crossings.chunks(2) {
            if pair.len() < 2 {
                continue;
            }
            let lo = pair[0].ceil().max(0.0) as usize;
            let hi = pair[1].floor().min(cols as f64 - 1.0) as usize;
            for c in lo..=hi.min(cols.saturating_sub(1)) {
                mask.set(r, c, true);
            }
        }
    }
    // Include boundary pixels.
    for i in 0..n {
        let (r1, c1) = polygon[i];
        let (r2, c2) = polygon[(i + 1) % n];
        let steps = ((r2 - r1).abs().max((c2 - c1).abs()).ceil() as usize).max(1);
        for s in 0..=steps {
            let w = s as f64 / steps as f64;
            let r = (r1 + w * (r2 - r1)).round();
            let c = (c1 + w * (c2 - c1)).round();
            if r >= 0.0 && c >= 0.0 && (r as usize) < rows && (c as usize) < cols {
                mask.set(r as usize, c as usize, true);
            }
        }
    }
    mask
}

/// Interpolate a mask for `target_index` from bracketing key masks. Keys are
/// reduced to polygons (Douglas-Peucker at `tolerance` pixels), resampled to
/// a matched vertex count, linearly interpolated, and rasterized.
pub fn roi_interpolate(
    key_masks: &[(usize, RoiMask)],
    target_index: usize,
    tolerance: f64,
) -> Result<RoiMask> {
    if key_masks.is_empty() {
        return Err(CoreError::InvalidParam("no key masks".into()));
    }
    let shape = key_masks[0].1.shape();
    for (_, m) in key_masks {
        if m.shape() != shape {
            return Err(CoreError::shape("roi keys", shape, m.shape()));
        }
    }
    if let Some((_, exact)) = key_masks.iter().find(|(i, _)| *i == target_index) {
        let polygon = simplify_polygon(&trace_boundary(exact)?, tolerance);
        return Ok(rasterize_polygon(&polygon, shape.0, shape.1));
    }
    let before = key_masks
        .iter()
        .filter(|(i, _)| *i < target_index)
        .max_by_key(|(i, _)| *i);
    let after = key_masks
        .iter()
        .filter(|(i, _)| *i > target_index)
        .min_by_key(|(i, _)| *i);
    let (Some((ia, ma)), Some((ib, mb))) = (before, after) else {
        return Err(CoreError::InvalidParam(format!(
            "target index {target_index} is not bracketed by key masks"
        )));
    };
    let pa = simplify_polygon(&trace_boundary(ma)?, tolerance);
    let pb = simplify_polygon(&trace_boundary(mb)?, tolerance);
    let n = pa.len().max(pb.len()).max(16);
    let ra = resample_polygon(&pa, n);
    let rb = resample_polygon(&pb, n);
    let w = (target_index - ia) as f64 / (ib - ia) as f64;
    let blended: Polygon = ra
        .iter()
        .zip(&rb)
        .map(|(&(r1, c1), &(r2, c2))| (r1 + w * (r2 - r1), c1 + w * (c2 - c1)))
        .collect();
    Ok(rasterize_polygon(&blended, shape.0, shape.1))
}
