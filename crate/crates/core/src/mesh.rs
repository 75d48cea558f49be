//! Triangle meshes of constant-`t` slices of the polar hypersurface.
//!
//! Stereographic projection of S^4 lands in R^4; the OBJ file carries the
//! first three coordinates and the sidecar CSV the fourth, next to `k1`.

use std::io::Write;

use crate::error::{Error, Result};
use crate::linalg::Vec5;
use crate::surface::Geometry;

const MAX_ROTATIONS: usize = 5;
/// Points with `1 + x5` below this count as hitting the pole.
const POLE_CLEARANCE: f64 = 1e-6;

#[derive(Debug, Clone, PartialEq)]
pub struct SliceMesh {
    pub n1: usize,
    pub n2: usize,
    pub slices: Vec<f64>,
    /// Projected points in R^4.
    pub vertices: Vec<[f64; 4]>,
    /// Largest principal curvature per vertex; NaN at singular points.
    pub k1: Vec<f64>,
    pub triangles: Vec<[usize; 3]>,
    /// Rotations applied before the pole cleared the mesh.
    pub rotations: usize,
}

/// Rotation by a fixed angle in the plane of `e_{k mod 4}` and `e5`.
fn rotate(p: &Vec5, k: usize) -> Vec5 {
    let (s, c) = 0.7_f64.sin_cos();
    let i = k % 4;
    let mut out = *p;
    out[i] = c * p[i] - s * p[4];
    out[4] = s * p[i] + c * p[4];
    out
}

/// Stereographic projection from `(0, 0, 0, 0, -1)`: `y_i = x_i / (1 + x5)`.
pub fn stereographic(p: &Vec5) -> Option<[f64; 4]> {
    let d = 1.0 + p[4];
    if !(d > POLE_CLEARANCE) {
        return None;
    }
    Some([p[0] / d, p[1] / d, p[2] / d, p[3] / d])
}

/// Projects a point cloud of S^4, rotating it away from the pole if
/// needed; returns the projected points and the number of rotations.
pub fn project_all(points: &[Vec5]) -> Result<(Vec<[f64; 4]>, usize)> {
    let mut pts = points.to_vec();
    for rotations in 0..=MAX_ROTATIONS {
        let projected: Option<Vec<[f64; 4]>> = pts.iter().map(stereographic).collect();
        if let Some(v) = projected {
            return Ok((v, rotations));
        }
        pts = pts.iter().map(|p| rotate(p, rotations)).collect();
    }
    Err(Error::PoleCollision {
        retries: MAX_ROTATIONS,
    })
}

impl Geometry<'_> {
    /// One `n1 x n2` slice per `t = 2 pi s / slices`, frames continued along
    /// the row-major sweep so each slice is a continuous surface.
    pub fn slice_mesh(&self, slices: usize, n1: usize, n2: usize) -> Result<SliceMesh> {
        if slices == 0 || n1 < 2 || n2 < 2 {
            return Err(Error::Config("mesh needs slices >= 1 and a grid of at least 2x2".into()));
        }
        let grid = self.spec.domain.grid(n1, n2);
        let frames = self
            .frame_sweep(&grid, n2)
            .into_iter()
            .collect::<Result<Vec<_>>>()?;
        let ts: Vec<f64> = (0..slices)
            .map(|s| std::f64::consts::TAU * s as f64 / slices as f64)
            .collect();
        let mut ambient = Vec::with_capacity(slices * n1 * n2);
        let mut k1 = Vec::with_capacity(slices * n1 * n2);
        for &t in &ts {
            for f in &frames {
                let p = crate::polar::BundlePoint::new(*f, t);
                ambient.push(self.polar_point(&p).position);
                k1.push(self.hypersurface_shape(&p).map(|s| s.k1).unwrap_or(f64::NAN));
            }
        }
        let (vertices, rotations) = project_all(&ambient)?;
        let mut triangles = Vec::with_capacity(slices * (n1 - 1) * (n2 - 1) * 2);
        for s in 0..slices {
            let base = s * n1 * n2;
            for i in 0..n1 - 1 {
                for j in 0..n2 - 1 {
                    let a = base + i * n2 + j;
                    let b = a + 1;
                    let c = a + n2;
                    let d = c + 1;
                    triangles.push([a, c, b]);
                    triangles.push([b, c, d]);
                }
            }
        }
        Ok(SliceMesh {
            n1,
            n2,
            slices: ts,
            vertices,
            k1,
            triangles,
            rotations,
        })
    }
}

impl SliceMesh {
    /// OBJ text: `v` lines, then 1-based `f` lines, one group per slice.
    pub fn write_obj<W: Write>(&self, mut w: W) -> Result<()> {
        writeln!(w, "# {} slices of {}x{}", self.slices.len(), self.n1, self.n2)?;
        for v in &self.vertices {
            writeln!(w, "v {:.17e} {:.17e} {:.17e}", v[0], v[1], v[2])?;
        }
        let per_slice = (self.n1 - 1) * (self.n2 - 1) * 2;
        for (s, chunk) in self.triangles.chunks(per_slice).enumerate() {
            writeln!(w, "g slice_{s}")?;
            for t in chunk {
                writeln!(w, "f {} {} {}", t[0] + 1, t[1] + 1, t[2] + 1)?;
            }
        }
        Ok(())
    }

    /// Sidecar CSV: `vertex,slice,t,w,k1` with `w` the fourth coordinate.
    pub fn write_k1_csv<W: Write>(&self, mut w: W) -> Result<()> {
        writeln!(w, "vertex,slice,t,w,k1")?;
        let per = self.n1 * self.n2;
        for (i, k) in self.k1.iter().enumerate() {
            let s = i / per;
            writeln!(
                w,
                "{},{},{:.17e},{:.17e},{:.17e}",
                i + 1,
                s,
                self.slices[s],
                self.vertices[i][3],
                k
            )?;
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::config::Tolerances;
    use crate::immersion::gallery;

    #[test]
    fn cartan_slices() {
        let spec = gallery("veronese").unwrap();
        let geo = Geometry::new(&spec, Tolerances::default());
        let mesh = geo.slice_mesh(8, 16, 16).unwrap();
        assert_eq!(mesh.vertices.len(), 8 * 16 * 16);
        assert_eq!(mesh.triangles.len(), 8 * 15 * 15 * 2);
        assert!(mesh.vertices.iter().flatten().all(|x| x.is_finite()));
        for k in &mesh.k1 {
            assert!((k - 3f64.sqrt()).abs() < 1e-7);
        }
        let mut obj = Vec::new();
        mesh.write_obj(&mut obj).unwrap();
        let text = String::from_utf8(obj).unwrap();
        assert_eq!(text.lines().filter(|l| l.starts_with("v ")).count(), 2048);
        let max_index = text
            .lines()
            .filter(|l| l.starts_with("f "))
            .flat_map(|l| l[2..].split(' ').map(|x| x.parse::<usize>().unwrap()).collect::<Vec<_>>())
            .max()
            .unwrap();
        assert_eq!(max_index, 2048);
        let mut csv = Vec::new();
        mesh.write_k1_csv(&mut csv).unwrap();
        assert_eq!(String::from_utf8(csv).unwrap().lines().count(), 2049);
    }

    #[test]
    fn pole_is_avoided_by_rotation() {
        let pole = Vec5([0.0, 0.0, 0.0, 0.0, -1.0]);
        let other = Vec5([1.0, 0.0, 0.0, 0.0, 0.0]);
        let (pts, rotations) = project_all(&[pole, other]).unwrap();
        assert!(rotations >= 1);
        assert!(pts.iter().flatten().all(|x| x.is_finite()));
        assert_eq!(stereographic(&Vec5([0.0, 0.0, 0.0, 0.0, 1.0])), Some([0.0; 4]));
    }

    #[test]
    fn dense_cloud_collides() {
        let mut pts = Vec::new();
        // for each stage, the point that the rotations so far carry onto the pole
        for k in 0..=MAX_ROTATIONS {
            let mut q = Vec5([0.0, 0.0, 0.0, 0.0, -1.0]);
            for j in (0..k).rev() {
                let (s, c) = 0.7_f64.sin_cos();
                let i = j % 4;
                let mut r = q;
                r[i] = c * q[i] + s * q[4];
                r[4] = -s * q[i] + c * q[4];
                q = r;
            }
            pts.push(q);
        }
        assert_eq!(
            project_all(&pts).unwrap_err(),
            Error::PoleCollision { retries: MAX_ROTATIONS }
        );
    }
}
