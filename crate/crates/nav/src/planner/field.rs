//! Obstacle boundaries and Euclidean distance fields in image space.

use cali_core::{Error, Result};
use std::io::Write;
use std::path::Path;

/// Binary navigability mask; `true` means navigable. Row-major, indexed by
/// (u, v) with u the column and v the row.
#[derive(Clone, Debug, PartialEq)]
pub struct BinaryMask {
    pub width: usize,
    pub height: usize,
    data: Vec<bool>,
}

impl BinaryMask {
    pub fn new(width: usize, height: usize, navigable: bool) -> Self {
        BinaryMask {
            width,
            height,
            data: vec![navigable; width * height],
        }
    }

    pub fn from_rows(width: usize, height: usize, data: Vec<bool>) -> Result<Self> {
        if data.len() != width * height {
            return Err(Error::shape("mask data does not match dimensions"));
        }
        Ok(BinaryMask {
            width,
            height,
            data,
        })
    }

    #[inline]
    pub fn get(&self, u: usize, v: usize) -> bool {
        self.data[v * self.width + u]
    }

    #[inline]
    pub fn set(&mut self, u: usize, v: usize, navigable: bool) {
        self.data[v * self.width + u] = navigable;
    }
}

/// Extracts the strong-obstacle boundary: navigable pixels 4-adjacent to a
/// non-navigable pixel, gated to rows strictly below `v_thres`. The image
/// border itself is not an edge.
pub fn extract_boundary(mask: &BinaryMask, v_thres: usize) -> Vec<(usize, usize)> {
    let mut boundary = Vec::new();
    for v in 0..mask.height {
        if v <= v_thres {
            continue;
        }
        for u in 0..mask.width {
            if !mask.get(u, v) {
                continue;
            }
            let blocked = (u > 0 && !mask.get(u - 1, v))
                || (u + 1 < mask.width && !mask.get(u + 1, v))
                || (v > 0 && !mask.get(u, v - 1))
                || (v + 1 < mask.height && !mask.get(u, v + 1));
            if blocked {
                boundary.push((u, v));
            }
        }
    }
    boundary
}

/// Per-pixel clearance values. `values[v][u]` is the Euclidean pixel
/// distance to the boundary set; after scaling, every value is capped at
/// `alpha * d_max` where `d_max` is the maximum of the unscaled field.
#[derive(Clone, Debug)]
pub struct DistanceField {
    pub width: usize,
    pub height: usize,
    values: Vec<f64>,
    pub alpha: f64,
    pub d_max: f64,
}

impl DistanceField {
    #[inline]
    pub fn get(&self, u: usize, v: usize) -> f64 {
        self.values[v * self.width + u]
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    /// The clearance cap alpha·d_max.
    pub fn cap(&self) -> f64 {
        self.alpha * self.d_max
    }
}

/// Exact Euclidean distance field of a boundary point set, by the
/// two-pass separable transform: a column scan produces per-column
/// vertical distances, then a row-wise lower envelope of parabolas yields
/// exact squared Euclidean distances.
///
/// An empty boundary means no detected obstacle; the field is then the
/// image diagonal everywhere (maximal clearance).
pub fn edf(boundary: &[(usize, usize)], width: usize, height: usize) -> DistanceField {
    let diag = ((width * width + height * height) as f64).sqrt();
    if boundary.is_empty() {
        return DistanceField {
            width,
            height,
            values: vec![diag; width * height],
            alpha: 1.0,
            d_max: diag,
        };
    }

    const INF: f64 = 1e18;
    // pass 1: per column, squared distance to the nearest boundary row
    let mut col_dist = vec![INF; width * height]; // [v][u], holds |Δv|
    for &(u, v) in boundary {
        col_dist[v * width + u] = 0.0;
    }
    for u in 0..width {
        for v in 1..height {
            let prev = col_dist[(v - 1) * width + u];
            let cur = &mut col_dist[v * width + u];
            if prev + 1.0 < *cur {
                *cur = prev + 1.0;
            }
        }
        for v in (0..height - 1).rev() {
            let next = col_dist[(v + 1) * width + u];
            let cur = &mut col_dist[v * width + u];
            if next + 1.0 < *cur {
                *cur = next + 1.0;
            }
        }
    }

    // pass 2: per row, lower envelope of parabolas over squared distances
    let mut values = vec![0.0; width * height];
    let mut f = vec![0.0f64; width];
    let mut vtx = vec![0usize; width]; // parabola vertices
    let mut z = vec![0.0f64; width + 1]; // envelope breakpoints
    for v in 0..height {
        for u in 0..width {
            let d = col_dist[v * width + u];
            f[u] = if d >= INF { INF } else { d * d };
        }
        let mut k = 0usize;
        vtx[0] = 0;
        z[0] = -INF;
        z[1] = INF;
        for q in 1..width {
            if f[q] >= INF {
                continue;
            }
            loop {
                let p = vtx[k];
                let denom = 2.0 * (q as f64 - p as f64);
                let s = if f[p] >= INF {
                    // previous vertex unreachable: replace it
                    -INF
                } else {
                    ((f[q] + (q * q) as f64) - (f[p] + (p * p) as f64)) / denom
                };
                if s <= z[k] {
                    if k == 0 {
                        vtx[0] = q;
                        z[1] = INF;
                        break;
                    }
                    k -= 1;
                } else {
                    k += 1;
                    vtx[k] = q;
                    z[k] = s;
                    z[k + 1] = INF;
                    break;
                }
            }
        }
        let mut k = 0usize;
        for u in 0..width {
            while z[k + 1] < u as f64 {
                k += 1;
            }
            let p = vtx[k];
            let du = u as f64 - p as f64;
            values[v * width + u] = (du * du + f[p]).sqrt();
        }
    }

    let d_max = values.iter().cloned().fold(0.0f64, f64::max);
    DistanceField {
        width,
        height,
        values,
        alpha: 1.0,
        d_max,
    }
}

/// Clamps a field at alpha·d_max pointwise, keeping d_max from the
/// unscaled field. Idempotent for a fixed alpha.
pub fn sedf(e: &DistanceField, alpha: f64) -> Result<DistanceField> {
    if !(0.0..=1.0).contains(&alpha) {
        return Err(Error::contract(format!("alpha {alpha} outside [0, 1]")));
    }
    let cap = alpha * e.d_max;
    Ok(DistanceField {
        width: e.width,
        height: e.height,
        values: e.values.iter().map(|&v| v.min(cap)).collect(),
        alpha,
        d_max: e.d_max,
    })
}

/// Dumps a field as a 16-bit binary PGM, normalized so the clearance cap
/// maps to 65535. A degenerate cap (alpha·d_max = 0) writes all zeros.
pub fn write_pgm16(field: &DistanceField, path: &Path) -> Result<()> {
    let cap = field.cap();
    let mut out = Vec::with_capacity(32 + field.values.len() * 2);
    out.extend_from_slice(format!("P5\n{} {}\n65535\n", field.width, field.height).as_bytes());
    for &v in &field.values {
        let g = if cap > 0.0 {
            (65535.0 * v / cap).round().clamp(0.0, 65535.0) as u16
        } else {
            0
        };
        out.extend_from_slice(&g.to_be_bytes());
    }
    let mut f = std::fs::File::create(path)?;
    f.write_all(&out)?;
    Ok(())
}

/// Writes a mask as an 8-bit binary PGM (navigable = 255).
pub fn write_mask_pgm(mask: &BinaryMask, path: &Path) -> Result<()> {
    let mut out = Vec::with_capacity(32 + mask.width * mask.height);
    out.extend_from_slice(format!("P5\n{} {}\n255\n", mask.width, mask.height).as_bytes());
    for v in 0..mask.height {
        for u in 0..mask.width {
            out.push(if mask.get(u, v) { 255 } else { 0 });
        }
    }
    let mut f = std::fs::File::create(path)?;
    f.write_all(&out)?;
    Ok(())
}

/// Brute-force distance oracle: direct minimum over the boundary set.
pub fn edf_brute_force(boundary: &[(usize, usize)], width: usize, height: usize) -> DistanceField {
    let diag = ((width * width + height * height) as f64).sqrt();
    let mut values = vec![diag; width * height];
    if !boundary.is_empty() {
        for v in 0..height {
            for u in 0..width {
                let mut best = f64::INFINITY;
                for &(bu, bv) in boundary {
                    let du = u as f64 - bu as f64;
                    let dv = v as f64 - bv as f64;
                    let d2 = du * du + dv * dv;
                    if d2 < best {
                        best = d2;
                    }
                }
                values[v * width + u] = best.sqrt();
            }
        }
    }
    let d_max = values.iter().cloned().fold(0.0f64, f64::max);
    DistanceField {
        width,
        height,
        values,
        alpha: 1.0,
        d_max,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use cali_core::numkit::rng::Rng;

    #[test]
    fn all_navigable_mask_has_no_boundary() {
        let mask = BinaryMask::new(8, 8, true);
        assert!(extract_boundary(&mask, 0).is_empty());
    }

    #[test]
    fn half_plane_boundary_is_the_split_row() {
        // rows < r non-navigable, rows >= r navigable → edge = row r
        let mut mask = BinaryMask::new(6, 10, true);
        let r = 4;
        for v in 0..r {
            for u in 0..6 {
                mask.set(u, v, false);
            }
        }
        let edge = extract_boundary(&mask, 0);
        assert_eq!(edge.len(), 6);
        assert!(edge.iter().all(|&(_, v)| v == r));
        // gate at/above the edge row removes it
        assert!(extract_boundary(&mask, r).is_empty());
        assert_eq!(extract_boundary(&mask, r - 1).len(), 6);
    }

    #[test]
    fn gate_at_image_height_empties_everything() {
        let mut mask = BinaryMask::new(8, 8, true);
        mask.set(4, 4, false);
        assert!(extract_boundary(&mask, 8).is_empty());
    }

    #[test]
    fn single_point_distances() {
        let field = edf(&[(2, 2)], 5, 5);
        assert!((field.get(0, 0) - 8f64.sqrt()).abs() < 1e-12);
        assert_eq!(field.get(2, 2), 0.0);
        assert!((field.get(4, 2) - 2.0).abs() < 1e-12);
    }

    #[test]
    fn empty_boundary_gives_diagonal_everywhere() {
        let field = edf(&[], 4, 3);
        let diag = 25f64.sqrt();
        assert!(field.values().iter().all(|&v| v == diag));
        assert_eq!(field.d_max, diag);
    }

    #[test]
    fn matches_brute_force_on_random_masks() {
        let mut rng = Rng::new(7);
        for _ in 0..60 {
            let (w, h) = (4 + rng.index(12), 4 + rng.index(12));
            let density = rng.uniform_in(0.02, 0.3);
            let mut boundary = Vec::new();
            for v in 0..h {
                for u in 0..w {
                    if rng.uniform() < density {
                        boundary.push((u, v));
                    }
                }
            }
            let fast = edf(&boundary, w, h);
            let slow = edf_brute_force(&boundary, w, h);
            for (a, b) in fast.values().iter().zip(slow.values()) {
                assert!((a - b).abs() < 1e-9, "{a} vs {b}");
            }
        }
    }

    #[test]
    fn boundary_pixels_are_zero() {
        let boundary = vec![(1, 1), (3, 2), (0, 4)];
        let field = edf(&boundary, 5, 5);
        for &(u, v) in &boundary {
            assert_eq!(field.get(u, v), 0.0);
        }
    }

    #[test]
    fn sedf_clamps_and_is_idempotent() {
        let field = edf(&[(0, 0)], 8, 8);
        let scaled = sedf(&field, 0.5).unwrap();
        let cap = 0.5 * field.d_max;
        assert!(scaled.values().iter().all(|&v| v <= cap + 1e-15));
        assert_eq!(scaled.d_max, field.d_max);
        let twice = sedf(&scaled, 0.5).unwrap();
        assert_eq!(scaled.values(), twice.values());

        // alpha = 1 leaves the field; alpha = 0 zeroes it
        let same = sedf(&field, 1.0).unwrap();
        assert_eq!(same.values(), field.values());
        let zero = sedf(&field, 0.0).unwrap();
        assert!(zero.values().iter().all(|&v| v == 0.0));
    }

    #[test]
    fn sedf_hand_case() {
        // d_max = 10, alpha = 0.5, value 7 → 5
        let e = DistanceField {
            width: 2,
            height: 1,
            values: vec![7.0, 10.0],
            alpha: 1.0,
            d_max: 10.0,
        };
        let s = sedf(&e, 0.5).unwrap();
        assert_eq!(s.values(), &[5.0, 5.0]);
    }

    #[test]
    fn sedf_rejects_bad_alpha() {
        let e = edf(&[(0, 0)], 2, 2);
        assert!(sedf(&e, 1.5).is_err());
        assert!(sedf(&e, -0.1).is_err());
    }

    #[test]
    fn pgm_has_correct_header_and_size() {
        let field = edf(&[(1, 1)], 4, 3);
        let scaled = sedf(&field, 0.5).unwrap();
        let path = std::env::temp_dir().join(format!("cali_pgm_{}.pgm", std::process::id()));
        write_pgm16(&scaled, &path).unwrap();
        let bytes = std::fs::read(&path).unwrap();
        assert!(bytes.starts_with(b"P5\n4 3\n65535\n"));
        assert_eq!(bytes.len(), b"P5\n4 3\n65535\n".len() + 4 * 3 * 2);
        std::fs::remove_file(&path).unwrap();
    }
}
