//! The polar map `Psi(x, t) = cos t v3(x) + sin t v4(x)` on the unit normal
//! bundle and the shape operator of its image with respect to `xi = g(x)`.
//!
//! Bundle coordinates are `(x1, x2, t)`. Derivatives of `Psi` along the chart
//! come from jets of `g` plus the normal connection, so the 3x3 shape
//! operator below is assembled from first principles; the closed-form
//! principal curvatures `+-1/sqrt(r)` serve only as a check.

use std::f64::consts::TAU;

use crate::error::{Error, Result};
use crate::linalg::{sym_eigen, Vec5};
use crate::surface::{AdaptedFrame, Geometry, SurfacePoint};

/// A point of the unit normal bundle with the frame of its base point.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BundlePoint {
    pub x: [f64; 2],
    /// In `[0, 2pi)`.
    pub t: f64,
    pub frame: AdaptedFrame,
}

impl BundlePoint {
    pub fn new(frame: AdaptedFrame, t: f64) -> Self {
        Self {
            x: frame.point,
            t: t.rem_euclid(TAU),
            frame,
        }
    }

    /// Chart coordinates `(x1, x2, t)`; `t` is not reduced.
    pub fn chart(&self) -> [f64; 3] {
        [self.x[0], self.x[1], self.t]
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PolarTangentData {
    pub position: Vec5,
    pub xi: Vec5,
    /// dPsi(v1), dPsi(v2), dPsi(d/dt).
    pub dpsi: [Vec5; 3],
    pub regularity: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HypersurfaceShape {
    /// Shape operator in the orthonormal basis `basis`.
    pub shape3: [[f64; 3]; 3],
    pub k1: f64,
    pub k2: f64,
    pub k3: f64,
    pub k_gk: f64,
    pub s: f64,
    /// Largest |B_kl - B_lk| of the raw Weingarten form.
    pub symmetry_residual: f64,
    /// Orthonormal tangent basis in R^5.
    pub basis: [Vec5; 3],
    /// Bundle-chart coordinates of each basis vector.
    pub basis_chart: [[f64; 3]; 3],
    /// Closed-form regularity r at the point.
    pub regularity: f64,
}

/// Principal directions for `k1 > 0 > k3` and the kernel.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PrincipalFrame {
    pub e: [Vec5; 3],
    /// Bundle-chart coordinates of `e[i]`.
    pub chart: [[f64; 3]; 3],
    pub k: [f64; 3],
}

impl PrincipalFrame {
    pub fn lambda(&self) -> f64 {
        self.k[0]
    }

    /// Flips the sign of `e[i]` in place.
    pub fn flip(&mut self, i: usize) {
        self.e[i] = -self.e[i];
        self.chart[i] = self.chart[i].map(|c| -c);
    }

    /// Signs of `e1`, `e3` matched to `reference`.
    pub fn align_to(&mut self, reference: &PrincipalFrame) {
        for i in 0..3 {
            if self.e[i].dot(&reference.e[i]) < 0.0 {
                self.flip(i);
            }
        }
    }
}

/// Derivatives of Psi on the bundle chart at one point.
#[derive(Debug, Clone, Copy)]
pub struct BundleLocal {
    pub surface: SurfacePoint,
    pub t: f64,
    pub position: Vec5,
    /// dPsi/dx1, dPsi/dx2, dPsi/dt.
    pub jacobian: [Vec5; 3],
}

impl BundleLocal {
    fn new(surface: SurfacePoint, t: f64) -> Self {
        let f = surface.frame;
        let (c, s) = (t.cos(), t.sin());
        let ii3 = surface.second_form_mixed(&f.v3);
        let ii4 = surface.second_form_mixed(&f.v4);
        let w = surface.omega_chart;
        let d = |j: usize| -> Vec5 {
            let dv3 = -(f.v1 * ii3[j][0] + f.v2 * ii3[j][1]) + f.v4 * w[j];
            let dv4 = -(f.v1 * ii4[j][0] + f.v2 * ii4[j][1]) - f.v3 * w[j];
            dv3 * c + dv4 * s
        };
        Self {
            surface,
            t,
            position: f.v3 * c + f.v4 * s,
            jacobian: [d(0), d(1), f.v3 * (-s) + f.v4 * c],
        }
    }

    /// Closed-form regularity `(a cos t + c sin t)^2 + (b cos t)^2`.
    pub fn regularity(&self) -> f64 {
        let sh = self.surface.shape;
        let (c, s) = (self.t.cos(), self.t.sin());
        (sh.a * c + sh.c * s).powi(2) + (sh.b * c).powi(2)
    }

    /// dPsi of a bundle-chart vector.
    pub fn push(&self, chart: &[f64; 3]) -> Vec5 {
        self.jacobian[0] * chart[0] + self.jacobian[1] * chart[1] + self.jacobian[2] * chart[2]
    }

    /// Chart coordinates of the lifts of `v1`, `v2` and of `d/dt`.
    fn lift_chart(&self) -> [[f64; 3]; 3] {
        let m = self.surface.frame.tangent_chart;
        [
            [m[0][0], m[0][1], 0.0],
            [m[1][0], m[1][1], 0.0],
            [0.0, 0.0, 1.0],
        ]
    }

    pub fn shape(&self) -> Result<HypersurfaceShape> {
        let r = self.regularity();
        let lifts = self.lift_chart();
        let p: [Vec5; 3] = lifts.map(|c| self.push(&c));
        let f = self.surface.frame;
        // d xi along the lifts: v1, v2 and nothing along the fibre
        let w = [f.v1, f.v2, Vec5::default()];
        let b: [[f64; 3]; 3] = std::array::from_fn(|k| std::array::from_fn(|l| -w[k].dot(&p[l])));
        let mut symmetry_residual: f64 = 0.0;
        for k in 0..3 {
            for l in 0..3 {
                symmetry_residual = symmetry_residual.max((b[k][l] - b[l][k]).abs());
            }
        }
        let gram: [[f64; 3]; 3] = std::array::from_fn(|k| std::array::from_fn(|l| p[k].dot(&p[l])));
        let c = gram_schmidt_coefficients(&gram).ok_or(Error::Rank {
            gram_det: crate::linalg::det3(&gram),
        })?;
        // shape3 = C^T B C
        let shape3: [[f64; 3]; 3] = std::array::from_fn(|i| {
            std::array::from_fn(|j| {
                let mut s = 0.0;
                for k in 0..3 {
                    for l in 0..3 {
                        s += c[k][i] * 0.5 * (b[k][l] + b[l][k]) * c[l][j];
                    }
                }
                s
            })
        });
        let basis: [Vec5; 3] =
            std::array::from_fn(|i| p[0] * c[0][i] + p[1] * c[1][i] + p[2] * c[2][i]);
        let basis_chart: [[f64; 3]; 3] = std::array::from_fn(|i| {
            std::array::from_fn(|a| (0..3).map(|k| lifts[k][a] * c[k][i]).sum())
        });
        let eig = sym_eigen(&shape3).values;
        let [k1, k2, k3] = eig;
        Ok(HypersurfaceShape {
            shape3,
            k1,
            k2,
            k3,
            k_gk: k1 * k2 * k3,
            s: k1 * k1 + k2 * k2 + k3 * k3,
            symmetry_residual,
            basis,
            basis_chart,
            regularity: r,
        })
    }
}

/// Upper-triangular `C` with `C^T G C = I` (Gram-Schmidt in coefficient
/// form), or `None` when `G` is not positive definite.
fn gram_schmidt_coefficients(g: &[[f64; 3]; 3]) -> Option<[[f64; 3]; 3]> {
    // Cholesky G = L L^T, then C = L^{-T}
    let mut l = [[0.0; 3]; 3];
    for i in 0..3 {
        for j in 0..=i {
            let s: f64 = g[i][j] - (0..j).map(|k| l[i][k] * l[j][k]).sum::<f64>();
            if i == j {
                if !(s > 0.0) {
                    return None;
                }
                l[i][i] = s.sqrt();
            } else {
                l[i][j] = s / l[j][j];
            }
        }
    }
    // invert lower-triangular L
    let mut inv = [[0.0; 3]; 3];
    for i in 0..3 {
        inv[i][i] = 1.0 / l[i][i];
        for j in 0..i {
            let s: f64 = (j..i).map(|k| l[i][k] * inv[k][j]).sum();
            inv[i][j] = -s / l[i][i];
        }
    }
    Some(std::array::from_fn(|i| std::array::from_fn(|j| inv[j][i])))
}

impl Geometry<'_> {
    /// Bundle point over `x`, continuing the frame from `previous`.
    pub fn bundle_point(
        &self,
        x: [f64; 2],
        t: f64,
        previous: Option<&AdaptedFrame>,
    ) -> Result<BundlePoint> {
        Ok(BundlePoint::new(self.adapted_frame(x, previous)?, t))
    }

    /// Psi and its chart derivatives at `(x, t)` on the normal field through
    /// `seed`.
    pub fn bundle_local_seeded(&self, x: [f64; 2], t: f64, seed: &Vec5) -> Result<BundleLocal> {
        let frame = self.adapted_frame_seeded(x, *seed)?;
        Ok(BundleLocal::new(self.surface_point(&frame)?, t))
    }

    pub fn bundle_local(&self, p: &BundlePoint) -> Result<BundleLocal> {
        Ok(BundleLocal::new(self.surface_point(&p.frame)?, p.t))
    }

    pub fn polar_point(&self, p: &BundlePoint) -> PolarTangentData {
        let f = &p.frame;
        let (c, s) = (p.t.cos(), p.t.sin());
        PolarTangentData {
            position: f.v3 * c + f.v4 * s,
            xi: f.g,
            dpsi: [Vec5::default(); 3],
            regularity: f64::NAN,
        }
    }

    /// Closed-form differential in the adapted frame.
    pub fn polar_differential(&self, p: &BundlePoint) -> Result<PolarTangentData> {
        let sp = self.surface_point(&p.frame)?;
        let f = &p.frame;
        let sh = sp.shape;
        let (c, s) = (p.t.cos(), p.t.sin());
        let e2 = f.v3 * (-s) + f.v4 * c;
        let alpha = sh.a * c + sh.c * s;
        let beta = sh.b * c;
        let d1 = f.v1 * (-alpha) - f.v2 * beta + e2 * sh.omega34[0];
        let d2 = f.v1 * (-beta) + f.v2 * alpha + e2 * sh.omega34[1];
        Ok(PolarTangentData {
            position: f.v3 * c + f.v4 * s,
            xi: f.g,
            dpsi: [d1, d2, e2],
            regularity: alpha * alpha + beta * beta,
        })
    }

    pub fn regularity(&self, p: &BundlePoint) -> Result<f64> {
        Ok(self.bundle_local(p)?.regularity())
    }

    pub fn hypersurface_shape(&self, p: &BundlePoint) -> Result<HypersurfaceShape> {
        let local = self.bundle_local(p)?;
        self.shape_of(&local)
    }

    pub fn shape_of(&self, local: &BundleLocal) -> Result<HypersurfaceShape> {
        let r = local.regularity();
        if !(r > self.tol.regularity) {
            return Err(Error::SingularPoint { r });
        }
        local.shape()
    }

    /// Principal frame `(e1, e2, e3)` for `(k1, 0, k3)`. `e2` is `dPsi(d/dt)`;
    /// `e1`, `e3` keep the signs of `reference` when one is given.
    pub fn principal_frame(
        &self,
        p: &BundlePoint,
        reference: Option<&PrincipalFrame>,
    ) -> Result<PrincipalFrame> {
        let local = self.bundle_local(p)?;
        self.principal_frame_of(&local, reference)
    }

    pub fn principal_frame_of(
        &self,
        local: &BundleLocal,
        reference: Option<&PrincipalFrame>,
    ) -> Result<PrincipalFrame> {
        let shape = self.shape_of(local)?;
        let eig = sym_eigen(&shape.shape3);
        let e: [Vec5; 3] = std::array::from_fn(|i| {
            let y = eig.vectors[i];
            shape.basis[0] * y[0] + shape.basis[1] * y[1] + shape.basis[2] * y[2]
        });
        let chart: [[f64; 3]; 3] = std::array::from_fn(|i| {
            let y = eig.vectors[i];
            std::array::from_fn(|a| (0..3).map(|k| shape.basis_chart[k][a] * y[k]).sum())
        });
        let mut frame = PrincipalFrame {
            e,
            chart,
            k: eig.values,
        };
        if frame.e[1].dot(&local.jacobian[2]) < 0.0 {
            frame.flip(1);
        }
        if let Some(r) = reference {
            frame.align_to(r);
        }
        Ok(frame)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::config::Tolerances;
    use crate::immersion::{gallery, ImmersionSpec};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;
    use std::f64::consts::{FRAC_PI_2, PI};

    fn random_bundle(spec: &ImmersionSpec, n: usize, seed: u64) -> Vec<([f64; 2], f64)> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let ((a1, b1), (a2, b2)) = spec.domain.sampled();
        (0..n)
            .map(|_| {
                (
                    [rng.gen_range(a1..b1), rng.gen_range(a2..b2)],
                    rng.gen_range(0.0..TAU),
                )
            })
            .collect()
    }

    #[test]
    fn position_is_on_sphere_and_normal_to_xi() {
        let spec = gallery("veronese").unwrap();
        let geo = Geometry::new(&spec, Tolerances::default());
        for (x, t) in random_bundle(&spec, 1000, 1) {
            let p = geo.bundle_point(x, t, None).unwrap();
            let d = geo.polar_point(&p);
            assert!((d.position.norm() - 1.0).abs() < 1e-10);
            assert!(d.position.dot(&d.xi).abs() < 1e-10);
            let q = BundlePoint::new(p.frame, t + PI);
            assert!((geo.polar_point(&q).position + d.position).norm() < 1e-14);
        }
        let p = geo.bundle_point([1.0, 1.0], 0.0, None).unwrap();
        assert_eq!(geo.polar_point(&p).position, p.frame.v3);
    }

    #[test]
    fn differential_matches_finite_differences() {
        for name in ["veronese", "clifford"] {
            let spec = gallery(name).unwrap();
            let geo = Geometry::new(&spec, Tolerances::default());
            for (x, t) in random_bundle(&spec, 30, 2) {
                let p = geo.bundle_point(x, t, None).unwrap();
                let d = geo.polar_differential(&p).unwrap();
                for v in &d.dpsi {
                    assert!(v.dot(&d.position).abs() < 1e-9);
                    assert!(v.dot(&d.xi).abs() < 1e-9);
                }
                assert!(d.dpsi[2].dot(&p.frame.v1).abs() < 1e-10);
                assert!(d.dpsi[2].dot(&p.frame.v2).abs() < 1e-10);
                assert!((d.dpsi[2].norm() - 1.0).abs() < 1e-12);
                // central differences of Psi along the v_i coordinate flow
                let h = 1e-4;
                let seed = p.frame.normal_seed;
                for i in 0..2 {
                    let dir = p.frame.tangent_chart[i];
                    let at = |s: f64| {
                        let y = [x[0] + s * dir[0], x[1] + s * dir[1]];
                        geo.bundle_local_seeded(y, t, &seed).unwrap().position
                    };
                    let fd = (at(h) - at(-h)) * (0.5 / h);
                    let rel = (fd - d.dpsi[i]).norm() / d.dpsi[i].norm().max(1e-3);
                    assert!(rel < 1e-4, "{name} dPsi(v{}) rel {rel}", i + 1);
                }
                let local = geo.bundle_local(&p).unwrap();
                for i in 0..2 {
                    let m = p.frame.tangent_chart[i];
                    let chart = local.push(&[m[0], m[1], 0.0]);
                    assert!((chart - d.dpsi[i]).norm() < 1e-9);
                }
            }
        }
    }

    #[test]
    fn clifford_differential_at_zero() {
        let spec = gallery("clifford").unwrap();
        let geo = Geometry::new(&spec, Tolerances::default());
        let p = geo.bundle_point([1.0, 2.0], 0.0, None).unwrap();
        let d = geo.polar_differential(&p).unwrap();
        assert!((d.dpsi[0].dot(&p.frame.v1) + 1.0).abs() < 1e-10);
        assert!((geo.regularity(&BundlePoint::new(p.frame, FRAC_PI_2)).unwrap()).abs() < 1e-12);
    }

    #[test]
    fn regularity_values() {
        let spec = gallery("veronese").unwrap();
        let geo = Geometry::new(&spec, Tolerances::default());
        for (x, t) in random_bundle(&spec, 50, 3) {
            let p = geo.bundle_point(x, t, None).unwrap();
            assert!((geo.regularity(&p).unwrap() - 1.0 / 3.0).abs() < 1e-8);
        }
        let spec = gallery("geodesic2").unwrap();
        let geo = Geometry::new(&spec, Tolerances::default());
        let p = geo.bundle_point([1.0, 1.0], 0.3, None).unwrap();
        assert!(geo.regularity(&p).unwrap() < 1e-20);
        assert!(matches!(
            geo.hypersurface_shape(&p),
            Err(Error::SingularPoint { .. })
        ));
    }

    #[test]
    fn cartan_principal_curvatures() {
        let spec = gallery("veronese").unwrap();
        let geo = Geometry::new(&spec, Tolerances::default());
        let s3 = 3f64.sqrt();
        for (x, t) in random_bundle(&spec, 200, 4) {
            let p = geo.bundle_point(x, t, None).unwrap();
            let sh = geo.hypersurface_shape(&p).unwrap();
            assert!((sh.k1 - s3).abs() / s3 < 1e-7, "{}", sh.k1);
            assert!(sh.k2.abs() < 1e-8 * (1.0 + sh.k1));
            assert!((sh.k3 + s3).abs() / s3 < 1e-7);
            assert!((sh.s - 6.0).abs() < 1e-6);
            assert!(sh.k_gk.abs() < 1e-9 * sh.k1.powi(3));
            assert!(sh.symmetry_residual < 1e-9);
        }
    }

    #[test]
    fn clifford_curvature_matches_closed_form() {
        let spec = gallery("clifford").unwrap();
        let geo = Geometry::new(&spec, Tolerances::default());
        for (x, t) in random_bundle(&spec, 100, 5) {
            let p = geo.bundle_point(x, t, None).unwrap();
            let r = t.cos().powi(2);
            if r < 1e-3 {
                continue;
            }
            let sh = geo.hypersurface_shape(&p).unwrap();
            let k = 1.0 / r.sqrt();
            assert!((sh.k1 - k).abs() / k < 1e-7);
            assert!((sh.k1 + sh.k2 + sh.k3).abs() < 1e-8 * (1.0 + sh.k1));
        }
    }

    #[test]
    fn principal_frame_properties() {
        let spec = gallery("veronese").unwrap();
        let geo = Geometry::new(&spec, Tolerances::default());
        for (x, t) in random_bundle(&spec, 50, 6) {
            let p = geo.bundle_point(x, t, None).unwrap();
            let pf = geo.principal_frame(&p, None).unwrap();
            let e2 = p.frame.v3 * (-t.sin()) + p.frame.v4 * t.cos();
            assert!((pf.e[1] - e2).norm() < 1e-8);
            assert!(pf.e[0].dot(&pf.e[2]).abs() < 1e-10);
            for i in 0..3 {
                assert!((pf.e[i].norm() - 1.0).abs() < 1e-10);
            }
            // chart coordinates push forward to the ambient vectors
            let local = geo.bundle_local(&p).unwrap();
            for i in 0..3 {
                assert!((local.push(&pf.chart[i]) - pf.e[i]).norm() < 1e-9);
            }
            let sh = geo.hypersurface_shape(&p).unwrap();
            let eig = sym_eigen(&sh.shape3);
            let y = eig.vectors[1];
            let a_e2: f64 = (0..3)
                .map(|i| (0..3).map(|j| sh.shape3[i][j] * y[j]).sum::<f64>().powi(2))
                .sum::<f64>()
                .sqrt();
            assert!(a_e2 < 1e-8 * sh.k1);
        }
    }

    #[test]
    fn gram_schmidt_coefficients_orthonormalize() {
        let g = [[4.0, 1.0, 0.5], [1.0, 3.0, 0.2], [0.5, 0.2, 2.0]];
        let c = gram_schmidt_coefficients(&g).unwrap();
        for i in 0..3 {
            for j in 0..3 {
                let mut s = 0.0;
                for k in 0..3 {
                    for l in 0..3 {
                        s += c[k][i] * g[k][l] * c[l][j];
                    }
                }
                let delta = if i == j { 1.0 } else { 0.0 };
                assert!((s - delta).abs() < 1e-14);
            }
        }
        assert!(gram_schmidt_coefficients(&[[1.0, 0.0, 0.0], [0.0, 0.0, 0.0], [0.0, 0.0, 1.0]]).is_none());
    }
}
