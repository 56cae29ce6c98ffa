//! Overlapping patch factorization, per-step interleaving, and stitching.
//!
//! A frame is covered by patches at stride (patch - overlap) per axis, with
//! the last patch clamped flush to the frame edge. During diffusion, after
//! every step each patch overwrites the intersection pixels of its left,
//! upper, and upper-left neighbors with its own values (row-major sweep,
//! later patches win), so all shared regions are bit-identical and the final
//! stitch needs no windowing or averaging.

use serde::{Deserialize, Serialize};

use crate::error::{CoreError, Result};
use crate::grid::RFGrid;

/// Patch geometry: patch shape plus the overlap fraction per axis.
/// Overlap in pixels is ceil(fraction * dimension).
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct PatchLayout {
    patch_rows: usize,
    patch_cols: usize,
    overlap_fraction: f64,
}

impl PatchLayout {
    pub fn new(patch_rows: usize, patch_cols: usize, overlap_fraction: f64) -> Result<Self> {
        if patch_rows == 0 || patch_cols == 0 {
            return Err(CoreError::InvalidParam("patch dimensions must be >= 1".into()));
        }
        if !(0.0..0.5).contains(&overlap_fraction) {
            // Overlaps of half a patch or more would let non-adjacent patches
            // intersect, which the three-neighbor interleave cannot reconcile.
            return Err(CoreError::InvalidParam(format!(
                "overlap_fraction must be in [0, 0.5), got {overlap_fraction}"
            )));
        }
        Ok(PatchLayout {
            patch_rows,
            patch_cols,
            overlap_fraction,
        })
    }

    pub fn patch_rows(&self) -> usize {
        self.patch_rows
    }

    pub fn patch_cols(&self) -> usize {
        self.patch_cols
    }

    pub fn overlap_fraction(&self) -> f64 {
        self.overlap_fraction
    }

    pub fn overlap_px(&self, dim: usize) -> usize {
        (self.overlap_fraction * dim as f64).ceil() as usize
    }
}

impl Default for PatchLayout {
    fn default() -> Self {
        PatchLayout {
            patch_rows: 128,
            patch_cols: 64,
            overlap_fraction: 0.10,
        }
    }
}

/// Deterministic patch plan for one frame shape: origins in row-major
/// (axial-then-lateral) order.
#[derive(Debug, Clone)]
pub struct PatchPlan {
    pub patch_rows: usize,
    pub patch_cols: usize,
    pub frame_rows: usize,
    pub frame_cols: usize,
    /// Origin rows of the axial patch band (length N).
    pub row_origins: Vec<usize>,
    /// Origin cols of the lateral patch band (length M).
    pub col_origins: Vec<usize>,
}

impl PatchPlan {
    pub fn n_patches(&self) -> usize {
        self.row_origins.len() * self.col_origins.len()
    }

    /// Origin of patch (n, m).
    pub fn origin(&self, n: usize, m: usize) -> (usize, usize) {
        (self.row_origins[n], self.col_origins[m])
    }

    /// Flat index of patch (n, m) in row-major order.
    pub fn flat(&self, n: usize, m: usize) -> usize {
        n * self.col_origins.len() + m
    }

    pub fn grid_dims(&self) -> (usize, usize) {
        (self.row_origins.len(), self.col_origins.len())
    }
}

fn axis_origins(frame: usize, patch: usize, overlap: usize) -> Vec<usize> {
    let stride = patch - overlap.min(patch - 1);
    let mut origins = Vec::new();
    let mut pos = 0usize;
    loop {
        if pos + patch >= frame {
            origins.push(frame - patch);
            break;
        }
        origins.push(pos);
        pos += stride;
    }
    origins
}

/// Plan patch origins covering the frame; the last patch per axis is clamped
/// flush to the frame edge (its overlap may exceed the nominal amount).
pub fn plan(frame_rows: usize, frame_cols: usize, layout: &PatchLayout) -> Result<PatchPlan> {
    if frame_rows < layout.patch_rows || frame_cols < layout.patch_cols {
        return Err(CoreError::InvalidParam(format!(
            "frame {frame_rows}x{frame_cols} is smaller than the patch \
             {}x{}; zero-pad the frame to at least the patch size",
            layout.patch_rows, layout.patch_cols
        )));
    }
    Ok(PatchPlan {
        patch_rows: layout.patch_rows,
        patch_cols: layout.patch_cols,
        frame_rows,
        frame_cols,
        row_origins: axis_origins(
            frame_rows,
            layout.patch_rows,
            layout.overlap_px(layout.patch_rows),
        ),
        col_origins: axis_origins(
            frame_cols,
            layout.patch_cols,
            layout.overlap_px(layout.patch_cols),
        ),
    })
}

/// Copy of the `rows x cols` window at `origin`.
pub fn extract(frame: &RFGrid, origin: (usize, usize), rows: usize, cols: usize) -> Result<RFGrid> {
    let (r0, c0) = origin;
    if r0 + rows > frame.rows() || c0 + cols > frame.cols() {
        return Err(CoreError::InvalidParam(format!(
            "window {rows}x{cols} at ({r0},{c0}) out of bounds for {}x{} frame",
            frame.rows(),
            frame.cols()
        )));
    }
    let mut out = RFGrid::zeros(rows, cols)?;
    for r in 0..rows {
        for c in 0..cols {
            out.set(r, c, frame.at(r0 + r, c0 + c));
        }
    }
    out.with_spacing(frame.axial_spacing(), frame.lateral_spacing())
}

/// All planned patches of a frame, in plan order.
pub fn extract_all(frame: &RFGrid, plan: &PatchPlan) -> Result<Vec<RFGrid>> {
    if frame.rows() != plan.frame_rows || frame.cols() != plan.frame_cols {
        return Err(CoreError::shape(
            "extract_all frame",
            (plan.frame_rows, plan.frame_cols),
            frame.shape(),
        ));
    }
    let mut out = Vec::with_capacity(plan.n_patches());
    for &r0 in &plan.row_origins {
        for &c0 in &plan.col_origins {
            out.push(extract(frame, (r0, c0), plan.patch_rows, plan.patch_cols)?);
        }
    }
    Ok(out)
}

fn check_patches(patches: &[RFGrid], plan: &PatchPlan) -> Result<()> {
    if patches.len() != plan.n_patches() {
        return Err(CoreError::InvalidParam(format!(
            "{} patches supplied, plan has {}",
            patches.len(),
            plan.n_patches()
        )));
    }
    for p in patches {
        if p.shape() != (plan.patch_rows, plan.patch_cols) {
            return Err(CoreError::shape(
                "patch",
                (plan.patch_rows, plan.patch_cols),
                p.shape(),
            ));
        }
    }
    Ok(())
}

/// Intersection of the windows of patches `a` and `b` in frame coordinates,
/// if any: (row range, col range).
fn window_intersection(
    plan: &PatchPlan,
    a: (usize, usize),
    b: (usize, usize),
) -> Option<((usize, usize), (usize, usize))> {
    let (ar, ac) = plan.origin(a.0, a.1);
    let (br, bc) = plan.origin(b.0, b.1);
    let r_lo = ar.max(br);
    let r_hi = (ar + plan.patch_rows).min(br + plan.patch_rows);
    let c_lo = ac.max(bc);
    let c_hi = (ac + plan.patch_cols).min(bc + plan.patch_cols);
    if r_lo < r_hi && c_lo < c_hi {
        Some(((r_lo, r_hi), (c_lo, c_hi)))
    } else {
        None
    }
}

/// Interleave overlapping pixels: sweeping patches in row-major order, each
/// patch overwrites the intersection pixels of its left, upper, and
/// upper-left neighbors with its own values. After one sweep every shared
/// region is bit-identical across the patches covering it.
pub fn interleave(patches: &mut [RFGrid], plan: &PatchPlan) -> Result<()> {
    check_patches(patches, plan)?;
    let (n_axial, m_lateral) = plan.grid_dims();
    for n in 0..n_axial {
        for m in 0..m_lateral {
            let neighbors: [(isize, isize); 3] = [
                (n as isize, m as isize - 1),
                (n as isize - 1, m as isize),
                (n as isize - 1, m as isize - 1),
            ];
            for (nn, nm) in neighbors {
                if nn < 0 || nm < 0 {
                    continue;
                }
                let neighbor = (nn as usize, nm as usize);
                let Some(((r_lo, r_hi), (c_lo, c_hi))) =
                    window_intersection(plan, (n, m), neighbor)
                else {
                    continue;
                };
                let (cur_r, cur_c) = plan.origin(n, m);
                let (nb_r, nb_c) = plan.origin(neighbor.0, neighbor.1);
                let cur_idx = plan.flat(n, m);
                let nb_idx = plan.flat(neighbor.0, neighbor.1);
                for r in r_lo..r_hi {
                    for c in c_lo..c_hi {
                        let v = patches[cur_idx].at(r - cur_r, c - cur_c);
                        patches[nb_idx].set(r - nb_r, c - nb_c, v);
                    }
                }
            }
        }
    }
    Ok(())
}

/// Maximum absolute disagreement across all shared regions.
pub fn max_overlap_disagreement(patches: &[RFGrid], plan: &PatchPlan) -> Result<f64> {
    check_patches(patches, plan)?;
    let (n_axial, m_lateral) = plan.grid_dims();
    let mut worst = 0.0f64;
    for n in 0..n_axial {
        for m in 0..m_lateral {
            for nn in 0..n_axial {
                for nm in 0..m_lateral {
                    if plan.flat(nn, nm) <= plan.flat(n, m) {
                        continue;
                    }
                    let Some(((r_lo, r_hi), (c_lo, c_hi))) =
                        window_intersection(plan, (n, m), (nn, nm))
                    else {
                        continue;
                    };
                    let (ar, ac) = plan.origin(n, m);
                    let (br, bc) = plan.origin(nn, nm);
                    let a = plan.flat(n, m);
                    let b = plan.flat(nn, nm);
                    for r in r_lo..r_hi {
                        for c in c_lo..c_hi {
                            let d = (patches[a].at(r - ar, c - ac)
                                - patches[b].at(r - br, c - bc))
                            .abs();
                            worst = worst.max(d);
                        }
                    }
                }
            }
        }
    }
    Ok(worst)
}

/// Stitch interleaved patches into a frame. Shared regions must already
/// agree (to 1e-9); a larger disagreement signals a missed interleave and is
/// an error. Write order is row-major but irrelevant once regions agree.
pub fn stitch(patches: &[RFGrid], plan: &PatchPlan) -> Result<RFGrid> {
    let disagreement = max_overlap_disagreement(patches, plan)?;
    if disagreement >= 1e-9 {
        return Err(CoreError::Numeric(format!(
            "stitch: overlap disagreement {disagreement:.3e} (missed interleave?)"
        )));
    }
    let mut frame = RFGrid::zeros(plan.frame_rows, plan.frame_cols)?;
    let (n_axial, m_lateral) = plan.grid_dims();
    for n in 0..n_axial {
        for m in 0..m_lateral {
            let (r0, c0) = plan.origin(n, m);
            let patch = &patches[plan.flat(n, m)];
            for r in 0..plan.patch_rows {
                for c in 0..plan.patch_cols {
                    frame.set(r0 + r, c0 + c, patch.at(r, c));
                }
            }
        }
    }
    Ok(frame)
}
