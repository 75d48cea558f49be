//! Adapted frames, shape operators and curvatures of a surface in S^4.
//!
//! The tangent frame `(v1, v2)` diagonalizes the shape operator of `v4`
//! with `v1` on the eigenvalue `c >= 0`, so that
//!
//! ```text
//! A3 ~ (a  b)      A4 ~ (c  0)
//!      (b -a)           (0 -c)
//! ```
//!
//! The normal frame is the normalized projection of a seed vector `s` onto
//! the normal plane, completed so that `(g, v1, v2, v3, v4)` is positively
//! oriented. Keeping `s` fixed defines a smooth normal frame field around a
//! point; all finite differences of the frame use that field.

use serde::Serialize;

use crate::config::Tolerances;
use crate::error::{Error, Result};
use crate::immersion::{ImmersionSpec, Jet5};
use crate::linalg::{det5, sym_eigen, Vec5};

/// Orthonormal frame `(v1, v2; v3, v4)` adapted to `g` at `point`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AdaptedFrame {
    pub point: [f64; 2],
    pub g: Vec5,
    pub v1: Vec5,
    pub v2: Vec5,
    pub v3: Vec5,
    pub v4: Vec5,
    /// `v_i = sum_j tangent_chart[i][j] * dg/dx_j`.
    pub tangent_chart: [[f64; 2]; 2],
    /// Seed whose normal projection defines `v3` nearby.
    pub normal_seed: Vec5,
    /// Sign of det(g, v1, v2, v3, v4); always +1 by construction.
    pub orientation: f64,
    /// Both shape operators vanish here (totally geodesic point); the
    /// tangent frame is the Gram-Schmidt frame of the chart partials.
    pub ambiguous: bool,
}

impl AdaptedFrame {
    pub fn vectors(&self) -> [Vec5; 5] {
        [self.g, self.v1, self.v2, self.v3, self.v4]
    }

    /// Largest |<f_i, f_j> - delta_ij| over the five frame vectors.
    pub fn orthonormality_residual(&self) -> f64 {
        let f = self.vectors();
        let mut worst: f64 = 0.0;
        for i in 0..5 {
            for j in 0..5 {
                let delta = if i == j { 1.0 } else { 0.0 };
                worst = worst.max((f[i].dot(&f[j]) - delta).abs());
            }
        }
        worst
    }

    /// Chart direction of `v_i` (i = 0 for v1, 1 for v2).
    pub fn chart_direction(&self, i: usize) -> [f64; 2] {
        self.tangent_chart[i]
    }

    /// Largest angle between corresponding frame vectors of two frames.
    pub fn max_angle_to(&self, other: &AdaptedFrame) -> f64 {
        let a = [self.v1, self.v2, self.v3, self.v4];
        let b = [other.v1, other.v2, other.v3, other.v4];
        a.iter()
            .zip(b.iter())
            .map(|(x, y)| x.dot(y).clamp(-1.0, 1.0).acos())
            .fold(0.0, f64::max)
    }
}

/// Entries of the shape operators in the adapted frame.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ShapeData {
    pub a: f64,
    pub b: f64,
    pub c: f64,
    /// |tr A3| + |tr A4|.
    pub trace_residual: f64,
    /// omega_34(v1), omega_34(v2).
    pub omega34: [f64; 2],
    /// Full matrices <A_k v_i, v_j> for diagnostics.
    pub a3: [[f64; 2]; 2],
    pub a4: [[f64; 2]; 2],
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SurfaceCurvatures {
    /// Gaussian curvature.
    pub k: f64,
    /// Normal curvature, sign per the frame orientation.
    pub kn: f64,
    /// Squared length of the second fundamental form, 2(1 - K).
    pub s_g: f64,
    /// (1 - K)^2 - Kn^2; zero exactly for superminimal surfaces.
    pub defect: f64,
    /// sqrt((1 - K) / 2).
    pub mu: f64,
}

/// Frame, jets and shape data at one point, all on the same normal field.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SurfacePoint {
    pub jets: Jet5,
    pub frame: AdaptedFrame,
    pub shape: ShapeData,
    /// omega_34 on the chart axes.
    pub omega_chart: [f64; 2],
}

impl SurfacePoint {
    /// <d^2 g / dx_j dx_k, nu>.
    pub fn second_form_chart(&self, nu: &Vec5) -> [[f64; 2]; 2] {
        std::array::from_fn(|j| std::array::from_fn(|k| self.jets.d2(j, k).dot(nu)))
    }

    /// II_nu(d/dx_j, v_i) as `[j][i]`.
    pub fn second_form_mixed(&self, nu: &Vec5) -> [[f64; 2]; 2] {
        let ii = self.second_form_chart(nu);
        let m = self.frame.tangent_chart;
        std::array::from_fn(|j| std::array::from_fn(|i| m[i][0] * ii[j][0] + m[i][1] * ii[j][1]))
    }

    pub fn curvatures(&self) -> SurfaceCurvatures {
        curvatures(&self.shape)
    }
}

/// Curvatures from the normal-form entries (a, b, c).
pub fn curvatures(shape: &ShapeData) -> SurfaceCurvatures {
    let ShapeData { a, b, c, .. } = *shape;
    let k = 1.0 - (a * a + b * b) - c * c;
    let kn = -2.0 * b * c;
    SurfaceCurvatures {
        k,
        kn,
        s_g: 2.0 * (1.0 - k),
        defect: (1.0 - k).powi(2) - kn * kn,
        mu: (0.5 * (1.0 - k)).max(0.0).sqrt(),
    }
}

/// Geometry of one immersion under one set of tolerances.
#[derive(Debug, Clone, Copy)]
pub struct Geometry<'a> {
    pub spec: &'a ImmersionSpec,
    pub tol: Tolerances,
}

/// Tangent data at a point: jets, orthonormal tangent basis and its chart
/// coefficients.
struct Tangent {
    jets: Jet5,
    g: Vec5,
    w: [Vec5; 2],
    /// `w_a = sum_j coeff[a][j] * dg/dx_j`.
    coeff: [[f64; 2]; 2],
}

impl<'a> Geometry<'a> {
    pub fn new(spec: &'a ImmersionSpec, tol: Tolerances) -> Self {
        Self { spec, tol }
    }

    fn tangent(&self, point: [f64; 2], order: usize) -> Result<Tangent> {
        let jets = self.spec.eval_jet(point, order, &self.tol)?;
        let g = jets.value();
        let (g1, g2) = (jets.d1(0), jets.d1(1));
        let (e, f, h) = (g1.dot(&g1), g1.dot(&g2), g2.dot(&g2));
        let det = e * h - f * f;
        if !(det > self.tol.immersion_rank) {
            return Err(Error::Rank { gram_det: det });
        }
        let r1 = 1.0 / e.sqrt();
        let n2 = (det / e).sqrt();
        let coeff = [[r1, 0.0], [-f / (e * n2), 1.0 / n2]];
        let w = [
            g1 * coeff[0][0],
            g1 * coeff[1][0] + g2 * coeff[1][1],
        ];
        Ok(Tangent {
            jets,
            g,
            w,
            coeff,
        })
    }

    /// Projection of the seed onto the normal plane and its oriented
    /// completion.
    fn normal_pair(g: &Vec5, w: &[Vec5; 2], seed: &Vec5) -> Result<(Vec5, Vec5)> {
        let basis = [*g, w[0], w[1]];
        let r = seed.reject(&basis);
        let n = r.norm();
        if !(n > 1e-6 * seed.norm()) {
            return Err(Error::Rank { gram_det: n * n });
        }
        let v3 = r * (1.0 / n);
        let with3 = [*g, w[0], w[1], v3];
        let v4 = (0..5)
            .map(|k| Vec5::basis(k).reject(&with3))
            .max_by(|a, b| a.norm().total_cmp(&b.norm()))
            .unwrap();
        let mut v4 = v4.normalized();
        if det5(&[*g, w[0], w[1], v3, v4]) < 0.0 {
            v4 = -v4;
        }
        Ok((v3, v4))
    }

    /// First standard basis vector with a substantial normal projection.
    fn default_seed(g: &Vec5, w: &[Vec5; 2]) -> Vec5 {
        let basis = [*g, w[0], w[1]];
        // the squared projections sum to 2, so some e_k has at least 2/5
        (0..5)
            .map(Vec5::basis)
            .find(|e| {
                let r = e.reject(&basis);
                r.dot(&r) >= 0.2
            })
            .unwrap_or_else(|| Vec5::basis(4))
    }

    /// `v3, v4` of the normal field through `seed`, at `point`.
    pub fn normal_frame_at(&self, point: [f64; 2], seed: &Vec5) -> Result<(Vec5, Vec5)> {
        let t = self.tangent(point, 1)?;
        Self::normal_pair(&t.g, &t.w, seed)
    }

    /// Adapted frame at `point`. With `previous`, the normal frame is the one
    /// closest to the previous normal frame and the tangent frame keeps the
    /// sign of the previous `v1`.
    pub fn adapted_frame(
        &self,
        point: [f64; 2],
        previous: Option<&AdaptedFrame>,
    ) -> Result<AdaptedFrame> {
        let seed = previous.map(|p| p.v3);
        Ok(self.frame_with(point, seed, previous.map(|p| p.v1))?.0)
    }

    /// Adapted frame on the normal field through an explicit seed.
    pub fn adapted_frame_seeded(&self, point: [f64; 2], seed: Vec5) -> Result<AdaptedFrame> {
        Ok(self.frame_with(point, Some(seed), None)?.0)
    }

    fn frame_with(
        &self,
        point: [f64; 2],
        seed: Option<Vec5>,
        tangent_ref: Option<Vec5>,
    ) -> Result<(AdaptedFrame, Jet5)> {
        let t = self.tangent(point, 2)?;
        let seed = seed.unwrap_or_else(|| Self::default_seed(&t.g, &t.w));
        let (v3, v4) = Self::normal_pair(&t.g, &t.w, &seed)?;

        // second fundamental forms in the (w1, w2) basis
        let form = |nu: &Vec5| -> [[f64; 2]; 2] {
            let chart: [[f64; 2]; 2] =
                std::array::from_fn(|j| std::array::from_fn(|k| t.jets.d2(j, k).dot(nu)));
            std::array::from_fn(|a| {
                std::array::from_fn(|b| {
                    let mut s = 0.0;
                    for j in 0..2 {
                        for k in 0..2 {
                            s += t.coeff[a][j] * t.coeff[b][k] * chart[j][k];
                        }
                    }
                    s
                })
            })
        };
        let a3w = form(&v3);
        let a4w = form(&v4);
        let norm2 = |m: &[[f64; 2]; 2]| m.iter().flatten().map(|x| x * x).sum::<f64>().sqrt();

        let mut ambiguous = false;
        let mut dir = if norm2(&a4w) > self.tol.frame_ambiguity {
            sym_eigen(&a4w).vectors[0]
        } else if norm2(&a3w) > self.tol.frame_ambiguity {
            sym_eigen(&a3w).vectors[0]
        } else {
            ambiguous = true;
            [1.0, 0.0]
        };
        let mut v1 = t.w[0] * dir[0] + t.w[1] * dir[1];
        if let Some(r) = tangent_ref {
            if v1.dot(&r) < 0.0 {
                dir = [-dir[0], -dir[1]];
                v1 = -v1;
            }
        }
        // quarter turn in the oriented tangent plane
        let dir2 = [-dir[1], dir[0]];
        let v2 = t.w[0] * dir2[0] + t.w[1] * dir2[1];
        let rot = [dir, dir2];
        let tangent_chart: [[f64; 2]; 2] = std::array::from_fn(|i| {
            std::array::from_fn(|j| rot[i][0] * t.coeff[0][j] + rot[i][1] * t.coeff[1][j])
        });
        let orientation = det5(&[t.g, v1, v2, v3, v4]).signum();
        Ok((
            AdaptedFrame {
                point,
                g: t.g,
                v1,
                v2,
                v3,
                v4,
                tangent_chart,
                normal_seed: seed,
                orientation,
                ambiguous,
            },
            t.jets,
        ))
    }

    /// Frames over a row-major grid of `n1 x n2` points, each continued from
    /// its predecessor: the left neighbour within a row, the first point of
    /// the previous row at the start of a row.
    pub fn frame_sweep(&self, points: &[[f64; 2]], n2: usize) -> Vec<Result<AdaptedFrame>> {
        let mut out: Vec<Result<AdaptedFrame>> = Vec::with_capacity(points.len());
        for (idx, p) in points.iter().enumerate() {
            let pred = if idx % n2 != 0 {
                Some(idx - 1)
            } else if idx >= n2 {
                Some(idx - n2)
            } else {
                None
            };
            let prev = pred.and_then(|k| out[k].as_ref().ok()).copied();
            out.push(self.adapted_frame(*p, prev.as_ref()));
        }
        out
    }

    /// Shape data of the frame's normal field at its base point.
    pub fn shape_operators(&self, frame: &AdaptedFrame) -> Result<ShapeData> {
        Ok(self.surface_point(frame)?.shape)
    }

    /// Jets, shape data and normal connection at the frame's point.
    pub fn surface_point(&self, frame: &AdaptedFrame) -> Result<SurfacePoint> {
        let jets = self.spec.eval_jet(frame.point, 2, &self.tol)?;
        let m = frame.tangent_chart;
        let chart_form = |nu: &Vec5| -> [[f64; 2]; 2] {
            std::array::from_fn(|j| std::array::from_fn(|k| jets.d2(j, k).dot(nu)))
        };
        let in_frame = |chart: [[f64; 2]; 2]| -> [[f64; 2]; 2] {
            std::array::from_fn(|a| {
                std::array::from_fn(|b| {
                    let mut s = 0.0;
                    for j in 0..2 {
                        for k in 0..2 {
                            s += m[a][j] * m[b][k] * chart[j][k];
                        }
                    }
                    s
                })
            })
        };
        let a3 = in_frame(chart_form(&frame.v3));
        let a4 = in_frame(chart_form(&frame.v4));

        let omega_chart = self.omega34_chart(frame)?;
        let omega34 = [
            m[0][0] * omega_chart[0] + m[0][1] * omega_chart[1],
            m[1][0] * omega_chart[0] + m[1][1] * omega_chart[1],
        ];
        let shape = ShapeData {
            a: a3[0][0],
            b: a3[0][1],
            c: a4[0][0],
            trace_residual: (a3[0][0] + a3[1][1]).abs() + (a4[0][0] + a4[1][1]).abs(),
            omega34,
            a3,
            a4,
        };
        Ok(SurfacePoint {
            jets,
            frame: *frame,
            shape,
            omega_chart,
        })
    }

    /// omega_34 on the chart axes by central differences of `v3` along the
    /// normal field through the frame's seed.
    fn omega34_chart(&self, frame: &AdaptedFrame) -> Result<[f64; 2]> {
        let h = self.tol.omega_step;
        let mut out = [0.0; 2];
        for (axis, slot) in out.iter_mut().enumerate() {
            let mut plus = frame.point;
            let mut minus = frame.point;
            plus[axis] += h;
            minus[axis] -= h;
            let (p3, _) = self.normal_frame_at(plus, &frame.normal_seed)?;
            let (m3, _) = self.normal_frame_at(minus, &frame.normal_seed)?;
            *slot = (p3 - m3).dot(&frame.v4) / (2.0 * h);
        }
        Ok(out)
    }

    /// Gaussian curvature at a point (frame independent).
    pub fn gaussian_curvature(&self, point: [f64; 2]) -> Result<f64> {
        let (frame, jets) = self.frame_with(point, None, None)?;
        let m = frame.tangent_chart;
        let form = |nu: &Vec5| -> [[f64; 2]; 2] {
            let chart: [[f64; 2]; 2] =
                std::array::from_fn(|j| std::array::from_fn(|k| jets.d2(j, k).dot(nu)));
            std::array::from_fn(|a| {
                std::array::from_fn(|b| {
                    let mut s = 0.0;
                    for j in 0..2 {
                        for k in 0..2 {
                            s += m[a][j] * m[b][k] * chart[j][k];
                        }
                    }
                    s
                })
            })
        };
        let (a3, a4) = (form(&frame.v3), form(&frame.v4));
        let det = |x: [[f64; 2]; 2]| x[0][0] * x[1][1] - x[0][1] * x[1][0];
        Ok(1.0 + det(a3) + det(a4))
    }

    /// Induced metric, its inverse and the contracted Christoffel symbols
    /// `g^{ij} Gamma^k_ij` at a point, from jets.
    pub fn metric_data(&self, point: [f64; 2]) -> Result<Metric2> {
        let jets = self.spec.eval_jet(point, 2, &self.tol)?;
        Ok(Metric2::from_jets(&jets))
    }

    /// |Δ log(1 - K) - 2(3K - 1)| with the Laplace-Beltrami operator of the
    /// induced metric evaluated by central differences of step `h`.
    pub fn curvature_pde_residual(&self, point: [f64; 2], h: f64) -> Result<f64> {
        let f = |p: [f64; 2]| -> Result<f64> {
            let k = self.gaussian_curvature(p)?;
            let one_minus = 1.0 - k;
            if !(one_minus > self.tol.near_flat) {
                return Err(Error::NearFlat {
                    one_minus_k: one_minus,
                });
            }
            Ok(one_minus.ln())
        };
        let metric = self.metric_data(point)?;
        let lap = laplace_beltrami_2d(&metric, f, point, h)?;
        let k = self.gaussian_curvature(point)?;
        Ok((lap - 2.0 * (3.0 * k - 1.0)).abs())
    }
}

/// Induced metric data of a surface chart.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Metric2 {
    pub g: [[f64; 2]; 2],
    pub ginv: [[f64; 2]; 2],
    /// `g^{ij} Gamma^k_ij` for k = 0, 1.
    pub contracted_christoffel: [f64; 2],
}

impl Metric2 {
    pub fn from_jets(jets: &Jet5) -> Self {
        let d = [jets.d1(0), jets.d1(1)];
        let g: [[f64; 2]; 2] = std::array::from_fn(|i| std::array::from_fn(|j| d[i].dot(&d[j])));
        let det = g[0][0] * g[1][1] - g[0][1] * g[1][0];
        let ginv = [[g[1][1] / det, -g[0][1] / det], [-g[1][0] / det, g[0][0] / det]];
        // Gamma^k_ij = g^{kl} <g_ij, g_l>
        let mut contracted = [0.0; 2];
        for (k, slot) in contracted.iter_mut().enumerate() {
            let mut s = 0.0;
            for i in 0..2 {
                for j in 0..2 {
                    for l in 0..2 {
                        s += ginv[i][j] * ginv[k][l] * jets.d2(i, j).dot(&d[l]);
                    }
                }
            }
            *slot = s;
        }
        Self {
            g,
            ginv,
            contracted_christoffel: contracted,
        }
    }

    /// Exact Laplacian of a function given its first and second chart
    /// partials.
    pub fn laplacian(&self, d1: [f64; 2], d2: [[f64; 2]; 2]) -> f64 {
        let mut s = 0.0;
        for i in 0..2 {
            for j in 0..2 {
                s += self.ginv[i][j] * d2[i][j];
            }
        }
        s - self.contracted_christoffel[0] * d1[0] - self.contracted_christoffel[1] * d1[1]
    }
}

/// Laplace-Beltrami of `f` at `x`: five-point stencil for the pure second
/// derivatives and first derivatives, plus the four corners for the mixed
/// derivative when the metric is not diagonal.
pub fn laplace_beltrami_2d(
    metric: &Metric2,
    f: impl Fn([f64; 2]) -> Result<f64>,
    x: [f64; 2],
    h: f64,
) -> Result<f64> {
    let at = |dx: f64, dy: f64| f([x[0] + dx * h, x[1] + dy * h]);
    let c = at(0.0, 0.0)?;
    let (xp, xm) = (at(1.0, 0.0)?, at(-1.0, 0.0)?);
    let (yp, ym) = (at(0.0, 1.0)?, at(0.0, -1.0)?);
    let d1 = [(xp - xm) / (2.0 * h), (yp - ym) / (2.0 * h)];
    let dxx = (xp - 2.0 * c + xm) / (h * h);
    let dyy = (yp - 2.0 * c + ym) / (h * h);
    let dxy = if metric.ginv[0][1] != 0.0 {
        (at(1.0, 1.0)? - at(1.0, -1.0)? - at(-1.0, 1.0)? + at(-1.0, -1.0)?) / (4.0 * h * h)
    } else {
        0.0
    };
    Ok(metric.laplacian(d1, [[dxx, dxy], [dxy, dyy]]))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dsl::parse_expr;
    use crate::immersion::gallery;
    use crate::linalg::orthonormalize;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_points(spec: &ImmersionSpec, n: usize, seed: u64) -> Vec<[f64; 2]> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let ((a1, b1), (a2, b2)) = spec.domain.sampled();
        (0..n)
            .map(|_| [rng.gen_range(a1..b1), rng.gen_range(a2..b2)])
            .collect()
    }

    #[test]
    fn veronese_frames_are_orthonormal() {
        let spec = gallery("veronese").unwrap();
        let geo = Geometry::new(&spec, Tolerances::default());
        for p in random_points(&spec, 100, 1) {
            let f = geo.adapted_frame(p, None).unwrap();
            assert!(f.orthonormality_residual() < 1e-10);
            assert_eq!(f.orientation, 1.0);
            assert!(!f.ambiguous);
        }
    }

    #[test]
    fn veronese_normal_complement() {
        let spec = gallery("veronese").unwrap();
        let tol = Tolerances::default();
        let p = [1.1, 0.7];
        let j = spec.eval_jet(p, 1, &tol).unwrap();
        let inputs = [j.value(), j.d1(0), j.d1(1)];
        let out = orthonormalize(&inputs, Some(&[]), tol.gram_det).unwrap();
        assert_eq!(out.len(), 5);
        for n in &out[3..] {
            for v in &inputs {
                assert!(n.dot(v).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn clifford_fifth_axis_is_v4() {
        let spec = gallery("clifford").unwrap();
        let geo = Geometry::new(&spec, Tolerances::default());
        for p in random_points(&spec, 50, 2) {
            let f = geo.adapted_frame(p, None).unwrap();
            assert!((f.v4.0[4].abs() - 1.0).abs() < 1e-12, "{:?}", f.v4);
            let s = geo.shape_operators(&f).unwrap();
            assert!((s.a - 1.0).abs() < 1e-10);
            assert!(s.b.abs() < 1e-10 && s.c.abs() < 1e-10);
            let k = curvatures(&s);
            assert!(k.k.abs() < 1e-10 && k.kn.abs() < 1e-10);
            assert!((k.defect - 1.0).abs() < 1e-10);
            assert!((k.s_g - 2.0).abs() < 1e-10);
        }
    }

    #[test]
    fn veronese_shape_entries() {
        let spec = gallery("veronese").unwrap();
        let geo = Geometry::new(&spec, Tolerances::default());
        for p in random_points(&spec, 100, 3) {
            let f = geo.adapted_frame(p, None).unwrap();
            let s = geo.shape_operators(&f).unwrap();
            assert!((s.a * s.a + s.b * s.b - 1.0 / 3.0).abs() < 1e-8);
            assert!((s.c * s.c - 1.0 / 3.0).abs() < 1e-8);
            assert!(s.trace_residual < 1e-8);
            let k = curvatures(&s);
            assert!((k.k - 1.0 / 3.0).abs() < 1e-8);
            assert!((k.kn.abs() - 2.0 / 3.0).abs() < 1e-8);
            assert!(k.defect.abs() < 1e-8);
            assert!((k.mu - 1.0 / 3f64.sqrt()).abs() < 1e-8);
        }
    }

    #[test]
    fn geodesic_sphere_is_flagged() {
        let spec = gallery("geodesic2").unwrap();
        let geo = Geometry::new(&spec, Tolerances::default());
        let f = geo.adapted_frame([1.0, 2.0], None).unwrap();
        assert!(f.ambiguous);
        let s = geo.shape_operators(&f).unwrap();
        assert!(s.a.abs() < 1e-12 && s.b.abs() < 1e-12 && s.c.abs() < 1e-12);
        assert!(s.trace_residual < 1e-10);
        let k = curvatures(&s);
        assert_eq!((k.k, k.kn, k.defect), (1.0, 0.0, 0.0));
    }

    #[test]
    fn curvature_invariants_are_frame_independent() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        for name in ["veronese", "clifford"] {
            let spec = gallery(name).unwrap();
            let geo = Geometry::new(&spec, Tolerances::default());
            for p in random_points(&spec, 30, 5) {
                let base = curvatures(&geo.shape_operators(&geo.adapted_frame(p, None).unwrap()).unwrap());
                let seed = Vec5(std::array::from_fn(|_| rng.gen_range(-1.0..1.0)));
                let f = geo.adapted_frame_seeded(p, seed).unwrap();
                let other = curvatures(&geo.shape_operators(&f).unwrap());
                assert!((base.k - other.k).abs() < 1e-9);
                assert!((base.kn.powi(2) - other.kn.powi(2)).abs() < 1e-9);
                assert!((base.s_g - other.s_g).abs() < 1e-9);
                assert!((base.defect - other.defect).abs() < 1e-9);
                assert!(other.defect >= -1e-10);
                assert_eq!(other.s_g, 2.0 * (1.0 - other.k));
            }
        }
    }

    #[test]
    fn omega34_matches_closed_form() {
        // along the field v3 = P_N s / |P_N s|:
        // omega_34(X) = -sum_i <w_i, s> II_4(X, w_i) / |P_N s|
        let spec = gallery("veronese").unwrap();
        let geo = Geometry::new(&spec, Tolerances::default());
        for p in random_points(&spec, 20, 6) {
            let f = geo.adapted_frame(p, None).unwrap();
            let sp = geo.surface_point(&f).unwrap();
            let s = f.normal_seed;
            let pn = s.reject(&[f.g, f.v1, f.v2]).norm();
            let ii4 = sp.second_form_mixed(&f.v4);
            for j in 0..2 {
                let expected = -(s.dot(&f.v1) * ii4[j][0] + s.dot(&f.v2) * ii4[j][1]) / pn;
                assert!((sp.omega_chart[j] - expected).abs() < 1e-7, "{} vs {expected}", sp.omega_chart[j]);
            }
        }
    }

    #[test]
    fn sweep_is_continuous() {
        let spec = gallery("veronese").unwrap();
        let geo = Geometry::new(&spec, Tolerances::default());
        let spacing = 0.04;
        let (x0, y0) = (0.25, 0.1);
        let n = 64;
        let mut pts = Vec::new();
        for i in 0..n {
            for j in 0..n {
                pts.push([x0 + spacing * i as f64, y0 + spacing * j as f64]);
            }
        }
        let frames: Vec<AdaptedFrame> = geo
            .frame_sweep(&pts, n)
            .into_iter()
            .map(|r| r.unwrap())
            .collect();
        let mut worst: f64 = 0.0;
        for idx in 1..frames.len() {
            let pred = if idx % n != 0 { idx - 1 } else { idx - n };
            worst = worst.max(frames[idx].max_angle_to(&frames[pred]));
        }
        assert!(worst < 0.2, "max step angle {worst}");
    }

    #[test]
    fn pde_residual_trivial_on_veronese() {
        let spec = gallery("veronese").unwrap();
        let geo = Geometry::new(&spec, Tolerances::default());
        for p in random_points(&spec, 10, 7) {
            assert!(geo.curvature_pde_residual(p, 1e-2).unwrap() < 1e-6);
        }
    }

    #[test]
    fn pde_residual_near_flat_on_geodesic() {
        let spec = gallery("geodesic2").unwrap();
        let geo = Geometry::new(&spec, Tolerances::default());
        assert!(matches!(
            geo.curvature_pde_residual([1.0, 1.0], 1e-2),
            Err(Error::NearFlat { .. })
        ));
    }

    #[test]
    fn laplacian_converges_at_second_order() {
        // synthetic f injected into the stencil; exact value from jets
        let spec = gallery("veronese").unwrap();
        let geo = Geometry::new(&spec, Tolerances::default());
        let f = parse_expr("sin(2*x1)*cos(x2) + x1^3").unwrap();
        for p in [[1.0, 1.0], [0.7, 2.5], [2.0, 4.0]] {
            let metric = geo.metric_data(p).unwrap();
            let jet = f.eval_jet(p, 1e-14).unwrap();
            let exact = metric.laplacian(jet.d1, [[jet.d2[0], jet.d2[1]], [jet.d2[1], jet.d2[2]]]);
            let fd = |h: f64| laplace_beltrami_2d(&metric, |x| Ok(f.eval(x)), p, h).unwrap();
            let r1 = (fd(1e-2) - exact).abs();
            let r2 = (fd(5e-3) - exact).abs();
            let ratio = r1 / r2;
            assert!((ratio - 4.0).abs() < 0.5, "ratio {ratio}");
        }
    }

    #[test]
    fn non_diagonal_metric_uses_mixed_term() {
        // a sheared Clifford chart has g^{12} != 0
        let text = "immersion sheared\n\
            domain x1 0 3 x2 0 3 margin 0.01\n\
            c1 = cos(sqrt(2)*(x1 + 0.5*x2)) / sqrt(2)\n\
            c2 = sin(sqrt(2)*(x1 + 0.5*x2)) / sqrt(2)\n\
            c3 = cos(sqrt(2)*x2) / sqrt(2)\n\
            c4 = sin(sqrt(2)*x2) / sqrt(2)\n\
            c5 = 0\n";
        let spec = crate::dsl::parse_immersion(text, &Tolerances::default()).unwrap();
        let geo = Geometry::new(&spec, Tolerances::default());
        let p = [1.2, 1.3];
        let metric = geo.metric_data(p).unwrap();
        assert!(metric.ginv[0][1].abs() > 0.1);
        let f = parse_expr("x1*x2 + sin(x1)").unwrap();
        let jet = f.eval_jet(p, 1e-14).unwrap();
        let exact = metric.laplacian(jet.d1, [[jet.d2[0], jet.d2[1]], [jet.d2[1], jet.d2[2]]]);
        let fd = laplace_beltrami_2d(&metric, |x| Ok(f.eval(x)), p, 1e-3).unwrap();
        assert!((fd - exact).abs() < 1e-5);
        // still flat after shearing
        assert!(geo.gaussian_curvature(p).unwrap().abs() < 1e-10);
    }
}
