//! Frame functions of the polar hypersurface and the checks built on them.
//!
//! With principal frame `(e1, e2, e3)` for `(lambda, 0, -lambda)`:
//! `u = <D_{e3} e1, e2>` and `v = e2(log lambda)`. Connection forms are
//! `omega_ij(X) = <D_X e_i, e_j>`, taken by central differences of the
//! principal frame over the bundle chart, with every neighbouring frame
//! sign-matched to the one at the centre.
//!
//! `e1` is flipped where needed so that `u > 0`; the flip is recorded.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::linalg::{inverse3, Vec5};
use crate::polar::{BundleLocal, BundlePoint, PrincipalFrame};
use crate::surface::{curvatures, Geometry};

/// Orientation choices behind the signs of `Kn` and `u`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SignConvention {
    /// det(g, v1, v2, v3, v4).
    pub surface_orientation: f64,
    /// Sign of `Kn` in that orientation.
    pub kn_sign: f64,
    /// `e1` was reversed to make `u` positive.
    pub e1_flipped: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct FrameValues {
    pub lambda: f64,
    /// `<D_{e3} e1, e2>` by finite differences, after normalization.
    pub u: f64,
    /// `|Kn| lambda^2 / 2`.
    pub u_bridge: f64,
    pub v: f64,
    pub k_base: f64,
    pub kn_base: f64,
    pub sign_convention: SignConvention,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct FrameInvariants {
    pub values: FrameValues,
    /// Table entries in the order omega12, omega13, omega23 on e1, then
    /// on e2, then on e3.
    pub connection_residual: [f64; 9],
    /// e2(v) = v^2 - u^2 + 1, e1(u) = e3(v), e2(u) = 2uv, e3(u) = -e1(v).
    pub uv_residual: [f64; 4],
    /// Norm of the bracket equation for [e1, e3].
    pub bracket_residual: f64,
}

impl FrameInvariants {
    pub fn max_residual(&self) -> f64 {
        self.connection_residual
            .iter()
            .chain(self.uv_residual.iter())
            .fold(self.bracket_residual, |m, x| m.max(*x))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ConservationChecks {
    /// |e2(u / lambda^2)|.
    pub conservation_residual: f64,
    pub harmonic_residual_u: f64,
    pub harmonic_residual_v: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct QuotientShape {
    /// Shape operators of `g` for the normals `Psi` and `e2`, in the basis
    /// `X1 = dPsi(e1)`-dual, `X2 = dPsi(e3)`-dual described in `quotient_shape`.
    pub a1_tilde: [[f64; 2]; 2],
    pub a2_tilde: [[f64; 2]; 2],
    /// The same operators written in terms of `(lambda, u, v)`.
    pub a1_expected: [[f64; 2]; 2],
    pub a2_expected: [[f64; 2]; 2],
    /// Largest entry deviation, relative to `1 / lambda`.
    pub matrix_residual: f64,
    /// Deviation of `dg(X1), dg(X2)` from an orthonormal pair.
    pub basis_residual: f64,
    pub k_recovered: f64,
    pub kn2_recovered: f64,
    pub k_base: f64,
    pub kn2_base: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct RigidityQuantities {
    pub h: f64,
    pub identity_residual: f64,
    pub k_hat: f64,
    pub k_hat_bound: f64,
    pub superminimal_conclusion: bool,
}

/// `4u^2v^2 + (v^2 - u^2 + 1)^2 - (h^2 + 4uh)` with `h = (u - 1)^2 + v^2`.
pub fn identity_defect(u: f64, v: f64) -> f64 {
    let h = (u - 1.0).powi(2) + v * v;
    4.0 * u * u * v * v + (v * v - u * u + 1.0).powi(2) - (h * h + 4.0 * u * h)
}

/// Scalar quantities from the rigidity argument. `s_samples` are values of
/// the squared norm of the hypersurface shape operator; `h_tol` decides the
/// superminimal conclusion `h ~ 0`.
pub fn rigidity_quantities(
    u: f64,
    v: f64,
    k: f64,
    s_samples: &[f64],
    near_flat: f64,
    h_tol: f64,
) -> Result<RigidityQuantities> {
    let h = (u - 1.0).powi(2) + v * v;
    let one_minus = 1.0 - k;
    if !(one_minus > near_flat) {
        return Err(Error::NearFlat {
            one_minus_k: one_minus,
        });
    }
    let inf_s = s_samples.iter().copied().fold(f64::INFINITY, f64::min);
    Ok(RigidityQuantities {
        h,
        identity_residual: identity_defect(u, v).abs(),
        k_hat: 1.0 / (3.0 * one_minus.cbrt()),
        k_hat_bound: (inf_s / 4.0).cbrt() / 3.0,
        superminimal_conclusion: h < h_tol,
    })
}

fn stencil<T>(r: Result<T>) -> Result<T> {
    r.map_err(|e| match e {
        Error::Domain(_) | Error::SingularPoint { .. } | Error::Rank { .. } => {
            Error::Stencil(e.to_string())
        }
        other => other,
    })
}

fn offset(q: [f64; 3], dir: &[f64; 3], s: f64) -> [f64; 3] {
    [q[0] + s * dir[0], q[1] + s * dir[1], q[2] + s * dir[2]]
}

/// Normal field and sign reference shared by every evaluation around one
/// bundle point.
#[derive(Debug, Clone, Copy)]
pub struct FrameField<'g, 'a> {
    geo: &'g Geometry<'a>,
    seed: Vec5,
    pub centre: [f64; 3],
    pub frame: PrincipalFrame,
    pub sign_convention: SignConvention,
    kn: f64,
    k_base: f64,
}

impl<'g, 'a> FrameField<'g, 'a> {
    /// Principal frame at `p`, normalized so that `u > 0`.
    pub fn new(geo: &'g Geometry<'a>, p: &BundlePoint) -> Result<Self> {
        let local = geo.bundle_local(p)?;
        let frame = geo.principal_frame_of(&local, None)?;
        let curv = curvatures(&local.surface.shape);
        let mut field = Self {
            geo,
            seed: p.frame.normal_seed,
            centre: p.chart(),
            frame,
            sign_convention: SignConvention {
                surface_orientation: p.frame.orientation,
                kn_sign: curv.kn.signum(),
                e1_flipped: false,
            },
            kn: curv.kn,
            k_base: curv.k,
        };
        let u = field.u_at(field.centre, &field.frame, geo.tol.fd_step)?;
        if u < 0.0 {
            field.frame.flip(0);
            field.sign_convention.e1_flipped = true;
        }
        Ok(field)
    }

    fn local(&self, q: [f64; 3]) -> Result<BundleLocal> {
        stencil(self.geo.bundle_local_seeded([q[0], q[1]], q[2], &self.seed))
    }

    /// Principal frame at `q`, signs matched to `reference`.
    pub fn frame_at(&self, q: [f64; 3], reference: &PrincipalFrame) -> Result<(BundleLocal, PrincipalFrame)> {
        let local = self.local(q)?;
        let f = stencil(self.geo.principal_frame_of(&local, Some(reference)))?;
        Ok((local, f))
    }

    fn lambda_at(&self, q: [f64; 3]) -> Result<f64> {
        let local = self.local(q)?;
        Ok(stencil(self.geo.shape_of(&local))?.k1)
    }

    /// `<D_{e3} e1, e2>` at `q`, where `frame` is the principal frame at `q`.
    fn u_at(&self, q: [f64; 3], frame: &PrincipalFrame, h: f64) -> Result<f64> {
        let (_, plus) = self.frame_at(offset(q, &frame.chart[2], h), frame)?;
        let (_, minus) = self.frame_at(offset(q, &frame.chart[2], -h), frame)?;
        Ok((plus.e[0] - minus.e[0]).dot(&frame.e[1]) / (2.0 * h))
    }

    /// `u` at an arbitrary point of the stencil, in this field's signs.
    pub fn u_field(&self, q: [f64; 3], h: f64) -> Result<f64> {
        self.u_field_from(q, &self.frame, h)
    }

    /// `u` at `q` with signs taken from a nearby `reference` frame.
    pub fn u_field_from(&self, q: [f64; 3], reference: &PrincipalFrame, h: f64) -> Result<f64> {
        let (_, f) = self.frame_at(q, reference)?;
        self.u_at(q, &f, h)
    }

    /// `v = e2(log lambda)` at `q`.
    pub fn v_field(&self, q: [f64; 3], h: f64) -> Result<f64> {
        let (_, f) = self.frame_at(q, &self.frame)?;
        let plus = self.lambda_at(offset(q, &f.chart[1], h))?;
        let minus = self.lambda_at(offset(q, &f.chart[1], -h))?;
        Ok((plus.ln() - minus.ln()) / (2.0 * h))
    }

    /// `|Kn| lambda^2 / 2` at `q`.
    pub fn u_bridge_field(&self, q: [f64; 3]) -> Result<f64> {
        let local = self.local(q)?;
        let kn = curvatures(&local.surface.shape).kn;
        let lambda = stencil(self.geo.shape_of(&local))?.k1;
        Ok(0.5 * kn.abs() * lambda * lambda)
    }

    /// Derivative of `f` along the centre's `e_k` by central differences.
    fn along(&self, k: usize, h: f64, f: impl Fn([f64; 3]) -> Result<f64>) -> Result<f64> {
        let dir = self.frame.chart[k];
        Ok((f(offset(self.centre, &dir, h))? - f(offset(self.centre, &dir, -h))?) / (2.0 * h))
    }

    pub fn values(&self, h: f64) -> Result<FrameValues> {
        let lambda = self.frame.lambda();
        let u = self.u_at(self.centre, &self.frame, h)?;
        let v = self.v_field(self.centre, h)?;
        Ok(FrameValues {
            lambda,
            u,
            u_bridge: 0.5 * self.kn.abs() * lambda * lambda,
            v,
            k_base: self.k_base,
            kn_base: self.kn,
            sign_convention: self.sign_convention,
        })
    }
}

impl Geometry<'_> {
    /// `(lambda, u, v)` at a regular bundle point, `u` computed both directly
    /// and from the normal curvature.
    pub fn lambda_u_v(&self, p: &BundlePoint) -> Result<FrameValues> {
        let field = FrameField::new(self, p)?;
        let values = field.values(self.tol.fd_step)?;
        let diff = (values.u.abs() - values.u_bridge).abs();
        if diff > self.tol.u_mismatch * values.u_bridge.max(1.0) {
            return Err(Error::ConventionMismatch {
                direct: values.u,
                bridge: values.u_bridge,
            });
        }
        Ok(values)
    }

    /// Residuals of the connection-form table, the first-order system for
    /// `(u, v)` and the bracket `[e1, e3]`, all with step `h`.
    pub fn frame_equation_residuals(&self, p: &BundlePoint, h: f64) -> Result<FrameInvariants> {
        let field = FrameField::new(self, p)?;
        let values = field.values(h)?;
        let (u, v) = (values.u, values.v);
        let centre = field.frame;

        // omega[k][i][j] = <D_{e_k} e_i, e_j>
        let mut omega = [[[0.0; 3]; 3]; 3];
        let mut dlog = [0.0; 3];
        let mut neighbours = Vec::with_capacity(6);
        for k in 0..3 {
            let dir = centre.chart[k];
            let (lp, fp) = field.frame_at(offset(field.centre, &dir, h), &centre)?;
            let (lm, fm) = field.frame_at(offset(field.centre, &dir, -h), &centre)?;
            for i in 0..3 {
                let d = (fp.e[i] - fm.e[i]) * (0.5 / h);
                for j in 0..3 {
                    omega[k][i][j] = d.dot(&centre.e[j]);
                }
            }
            dlog[k] = (fp.lambda().ln() - fm.lambda().ln()) / (2.0 * h);
            neighbours.push((lp, fp));
            neighbours.push((lm, fm));
        }
        let pairs = [(0, 1), (0, 2), (1, 2)];
        let expected = [
            [v, 0.5 * dlog[2], u],
            [0.0, 0.5 * u, 0.0],
            [u, -0.5 * dlog[0], -v],
        ];
        let mut connection_residual = [0.0; 9];
        for k in 0..3 {
            for (n, (i, j)) in pairs.iter().enumerate() {
                connection_residual[3 * k + n] = (omega[k][*i][*j] - expected[k][n]).abs();
            }
        }

        let uf = |q: [f64; 3]| field.u_field(q, h);
        let vf = |q: [f64; 3]| field.v_field(q, h);
        let e1u = field.along(0, h, uf)?;
        let e2u = field.along(1, h, uf)?;
        let e3u = field.along(2, h, uf)?;
        let e1v = field.along(0, h, vf)?;
        let e2v = field.along(1, h, vf)?;
        let e3v = field.along(2, h, vf)?;
        let uv_residual = [
            (e2v - (v * v - u * u + 1.0)).abs(),
            (e1u - e3v).abs(),
            (e2u - 2.0 * u * v).abs(),
            (e3u + e1v).abs(),
        ];

        // [X, Y]^a = X^b d_b Y^a - Y^b d_b X^a on the chart fields of e1, e3
        let mut d_x = [[0.0; 3]; 3];
        let mut d_y = [[0.0; 3]; 3];
        for b in 0..3 {
            let mut axis = [0.0; 3];
            axis[b] = 1.0;
            let (_, fp) = field.frame_at(offset(field.centre, &axis, h), &centre)?;
            let (_, fm) = field.frame_at(offset(field.centre, &axis, -h), &centre)?;
            for a in 0..3 {
                d_x[b][a] = (fp.chart[0][a] - fm.chart[0][a]) / (2.0 * h);
                d_y[b][a] = (fp.chart[2][a] - fm.chart[2][a]) / (2.0 * h);
            }
        }
        let (x, y) = (centre.chart[0], centre.chart[2]);
        let bracket: [f64; 3] = std::array::from_fn(|a| {
            (0..3).map(|b| x[b] * d_y[b][a] - y[b] * d_x[b][a]).sum()
        });
        let local = field.local(field.centre)?;
        let rhs = centre.e[0] * (-0.5 * dlog[2]) - centre.e[1] * (2.0 * u)
            + centre.e[2] * (0.5 * dlog[0]);
        let bracket_residual = (local.push(&bracket) - rhs).norm();

        Ok(FrameInvariants {
            values,
            connection_residual,
            uv_residual,
            bracket_residual,
        })
    }

    /// Conservation of `u / lambda^2` along `e2` and harmonicity of `u`, `v`.
    pub fn conservation_checks(&self, p: &BundlePoint) -> Result<ConservationChecks> {
        let field = FrameField::new(self, p)?;
        let h = self.tol.fd_step;
        let ratio = |q: [f64; 3]| -> Result<f64> {
            let (_, f) = field.frame_at(q, &field.frame)?;
            Ok(field.u_at(q, &f, h)? / f.lambda().powi(2))
        };
        let conservation_residual = field.along(1, h, ratio)?.abs();

        let hl = self.tol.laplacian_step;
        let psi = |q: [f64; 3]| Ok(field.local(q)?.position);
        let harmonic_residual_u =
            laplace_beltrami_3d(psi, |q| field.u_bridge_field(q), field.centre, hl)?.abs();
        let harmonic_residual_v =
            laplace_beltrami_3d(psi, |q| field.v_field(q, h), field.centre, hl)?.abs();
        Ok(ConservationChecks {
            conservation_residual,
            harmonic_residual_u,
            harmonic_residual_v,
        })
    }

    /// Shape operators of `g` itself, with normals `Psi` and `e2`, in the
    /// orthonormal basis `X1 = e1 / lambda`, `X2 = e3 / lambda` pushed down
    /// to the surface chart, compared with their expressions in
    /// `(lambda, u, v)`; also recovers `K` and `Kn^2` from `(lambda, u, v)`.
    pub fn quotient_shape(&self, p: &BundlePoint) -> Result<QuotientShape> {
        let field = FrameField::new(self, p)?;
        let values = field.values(self.tol.fd_step)?;
        let FrameValues { lambda, u, v, .. } = values;
        let local = field.local(field.centre)?;
        let jets = local.surface.jets;
        let pf = field.frame;
        let x = [
            [pf.chart[0][0] / lambda, pf.chart[0][1] / lambda],
            [pf.chart[2][0] / lambda, pf.chart[2][1] / lambda],
        ];
        let dg = |c: &[f64; 2]| jets.d1(0) * c[0] + jets.d1(1) * c[1];
        let images = [dg(&x[0]), dg(&x[1])];
        let basis_residual = (images[0] + pf.e[0])
            .norm()
            .max((images[1] - pf.e[2]).norm());
        let form = |nu: &Vec5| -> [[f64; 2]; 2] {
            std::array::from_fn(|a| {
                std::array::from_fn(|b| {
                    let mut s = 0.0;
                    for i in 0..2 {
                        for j in 0..2 {
                            s += x[a][i] * x[b][j] * jets.d2(i, j).dot(nu);
                        }
                    }
                    s
                })
            })
        };
        let a1_tilde = form(&local.position);
        let a2_tilde = form(&pf.e[1]);
        let il = 1.0 / lambda;
        let a1_expected = [[il, 0.0], [0.0, -il]];
        let a2_expected = [[-v * il, -u * il], [-u * il, v * il]];
        let mut matrix_residual: f64 = 0.0;
        for a in 0..2 {
            for b in 0..2 {
                matrix_residual = matrix_residual
                    .max((a1_tilde[a][b] - a1_expected[a][b]).abs() * lambda)
                    .max((a2_tilde[a][b] - a2_expected[a][b]).abs() * lambda);
            }
        }
        Ok(QuotientShape {
            a1_tilde,
            a2_tilde,
            a1_expected,
            a2_expected,
            matrix_residual,
            basis_residual,
            k_recovered: 1.0 - (1.0 + u * u + v * v) / (lambda * lambda),
            kn2_recovered: 4.0 * u * u / lambda.powi(4),
            k_base: values.k_base,
            kn2_base: values.kn_base * values.kn_base,
        })
    }
}

/// Laplace-Beltrami of `f` on the bundle chart at `q`, with the metric and
/// Christoffel symbols taken from central differences of the immersion
/// `psi`. Uses the 19-point stencil: centre, six axis neighbours and twelve
/// edge neighbours.
pub fn laplace_beltrami_3d(
    psi: impl Fn([f64; 3]) -> Result<Vec5>,
    f: impl Fn([f64; 3]) -> Result<f64>,
    q: [f64; 3],
    h: f64,
) -> Result<f64> {
    let at = |d: [f64; 3]| [q[0] + d[0] * h, q[1] + d[1] * h, q[2] + d[2] * h];
    let unit = |a: usize, s: f64| {
        let mut d = [0.0; 3];
        d[a] = s;
        d
    };
    let p0 = psi(q)?;
    let f0 = f(q)?;
    let mut dp = [Vec5::default(); 3];
    let mut df = [0.0; 3];
    let mut ddp = [[Vec5::default(); 3]; 3];
    let mut ddf = [[0.0; 3]; 3];
    for a in 0..3 {
        let (pp, pm) = (psi(at(unit(a, 1.0)))?, psi(at(unit(a, -1.0)))?);
        let (fp, fm) = (f(at(unit(a, 1.0)))?, f(at(unit(a, -1.0)))?);
        dp[a] = (pp - pm) * (0.5 / h);
        df[a] = (fp - fm) / (2.0 * h);
        ddp[a][a] = (pp + pm - p0 * 2.0) * (1.0 / (h * h));
        ddf[a][a] = (fp + fm - 2.0 * f0) / (h * h);
        for b in 0..a {
            let corner = |sa: f64, sb: f64| {
                let mut d = [0.0; 3];
                d[a] = sa;
                d[b] = sb;
                at(d)
            };
            let c = [(1.0, 1.0, 1.0), (1.0, -1.0, -1.0), (-1.0, 1.0, -1.0), (-1.0, -1.0, 1.0)];
            let mut sp = Vec5::default();
            let mut sf = 0.0;
            for (sa, sb, w) in c {
                let pt = corner(sa, sb);
                sp += psi(pt)? * w;
                sf += w * f(pt)?;
            }
            ddp[a][b] = sp * (0.25 / (h * h));
            ddp[b][a] = ddp[a][b];
            ddf[a][b] = sf / (4.0 * h * h);
            ddf[b][a] = ddf[a][b];
        }
    }
    let g: [[f64; 3]; 3] = std::array::from_fn(|a| std::array::from_fn(|b| dp[a].dot(&dp[b])));
    let ginv = inverse3(&g).ok_or_else(|| Error::Stencil("degenerate bundle metric".into()))?;
    // Gamma^c_ab = G^{cd} <d_ab Psi, d_d Psi>
    let mut lap = 0.0;
    for a in 0..3 {
        for b in 0..3 {
            let mut grad_term = 0.0;
            for c in 0..3 {
                let gamma: f64 = (0..3).map(|d| ginv[c][d] * ddp[a][b].dot(&dp[d])).sum();
                grad_term += gamma * df[c];
            }
            lap += ginv[a][b] * (ddf[a][b] - grad_term);
        }
    }
    Ok(lap)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::config::Tolerances;
    use crate::immersion::{gallery, ImmersionSpec};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn points(spec: &ImmersionSpec, n: usize, seed: u64) -> Vec<([f64; 2], f64)> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let ((a1, b1), (a2, b2)) = spec.domain.sampled();
        (0..n)
            .map(|_| {
                (
                    [rng.gen_range(a1 + 0.05..b1 - 0.05), rng.gen_range(a2 + 0.05..b2 - 0.05)],
                    rng.gen_range(0.0..std::f64::consts::TAU),
                )
            })
            .collect()
    }

    #[test]
    fn cartan_lambda_u_v() {
        let spec = gallery("veronese").unwrap();
        let geo = Geometry::new(&spec, Tolerances::default());
        for (x, t) in points(&spec, 20, 1) {
            let p = geo.bundle_point(x, t, None).unwrap();
            let val = geo.lambda_u_v(&p).unwrap();
            assert!((val.lambda - 3f64.sqrt()).abs() < 1e-7);
            assert!((val.u - 1.0).abs() < 1e-5, "u {}", val.u);
            assert!(val.v.abs() < 1e-5, "v {}", val.v);
            assert!((val.u_bridge - 1.0).abs() < 1e-7);
            let k_rec = 1.0 - (1.0 + val.u * val.u + val.v * val.v) / val.lambda.powi(2);
            assert!((k_rec - val.k_base).abs() < 1e-6);
        }
    }

    #[test]
    fn clifford_bridge_with_vanishing_u() {
        // Kn = 0, so u = 0, lambda = 1/|cos t| and v = tan t
        let spec = gallery("clifford").unwrap();
        let geo = Geometry::new(&spec, Tolerances::default());
        for t in [0.3, 1.0, 2.5, 4.0] {
            let p = geo.bundle_point([1.0, 2.0], t, None).unwrap();
            let val = geo.lambda_u_v(&p).unwrap();
            assert!(val.u.abs() < 1e-6, "u {}", val.u);
            assert!((val.lambda - 1.0 / t.cos().abs()).abs() < 1e-7);
            assert!((val.v - t.tan()).abs() < 1e-6, "v {} vs {}", val.v, t.tan());
        }
    }

    #[test]
    fn frame_equations_hold_on_both_examples() {
        for (name, h) in [("veronese", 1e-4), ("clifford", 1e-4)] {
            let spec = gallery(name).unwrap();
            let geo = Geometry::new(&spec, Tolerances::default());
            for (x, t) in points(&spec, 6, 2) {
                if name == "clifford" && t.cos().abs() < 0.3 {
                    continue;
                }
                let p = geo.bundle_point(x, t, None).unwrap();
                let inv = geo.frame_equation_residuals(&p, h).unwrap();
                assert!(
                    inv.max_residual() < 1e-3,
                    "{name} {:?} {:?} {}",
                    inv.connection_residual,
                    inv.uv_residual,
                    inv.bracket_residual
                );
            }
        }
    }

    #[test]
    fn lemma1_on_cartan() {
        let spec = gallery("veronese").unwrap();
        let geo = Geometry::new(&spec, Tolerances::default());
        for (x, t) in points(&spec, 4, 3) {
            let p = geo.bundle_point(x, t, None).unwrap();
            let c = geo.conservation_checks(&p).unwrap();
            assert!(c.conservation_residual < 1e-4, "{c:?}");
            assert!(c.harmonic_residual_u < 1e-3, "{c:?}");
            assert!(c.harmonic_residual_v < 1e-3, "{c:?}");
        }
    }

    #[test]
    fn bundle_laplacian_of_coordinates() {
        // a minimal hypersurface of S^4 has Delta x_i = -3 x_i
        for name in ["veronese", "clifford"] {
            let spec = gallery(name).unwrap();
            let geo = Geometry::new(&spec, Tolerances::default());
            let p = geo.bundle_point([1.0, 1.5], 0.4, None).unwrap();
            let seed = p.frame.normal_seed;
            let psi = |q: [f64; 3]| Ok(geo.bundle_local_seeded([q[0], q[1]], q[2], &seed)?.position);
            for i in 0..5 {
                let f = |q: [f64; 3]| Ok(psi(q)?.0[i]);
                let q = p.chart();
                let lap = laplace_beltrami_3d(psi, f, q, 1e-3).unwrap();
                let expected = -3.0 * f(q).unwrap();
                assert!((lap - expected).abs() < 1e-4, "{name} {i}: {lap} vs {expected}");
            }
        }
    }

    #[test]
    fn cartan_quotient_shape() {
        let spec = gallery("veronese").unwrap();
        let geo = Geometry::new(&spec, Tolerances::default());
        for (x, t) in points(&spec, 10, 4) {
            let p = geo.bundle_point(x, t, None).unwrap();
            let q = geo.quotient_shape(&p).unwrap();
            assert!(q.basis_residual < 1e-8);
            assert!(q.matrix_residual < 1e-7, "{q:?}");
            let il = 1.0 / 3f64.sqrt();
            assert!((q.a2_tilde[0][1] + il).abs() < 1e-6);
            assert!((q.kn2_recovered - 4.0 / 9.0).abs() < 1e-6);
            assert!((q.kn2_recovered - q.kn2_base).abs() / q.kn2_base < 1e-6);
            assert!((q.k_recovered - q.k_base).abs() < 1e-6);
            assert_eq!(q.a1_expected[0][0] + q.a1_expected[1][1], 0.0);
            assert_eq!(q.a2_expected[0][0] + q.a2_expected[1][1], 0.0);
        }
    }

    #[test]
    fn identity_examples() {
        assert_eq!(4.0 * 4.0 * 9.0 + (9.0f64 - 4.0 + 1.0).powi(2), 180.0);
        assert_eq!(identity_defect(2.0, 3.0), 0.0);
        assert_eq!(identity_defect(1.0, 0.0), 0.0);
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for _ in 0..10_000 {
            let (u, v) = (rng.gen_range(-10.0..10.0), rng.gen_range(-10.0..10.0));
            assert!(identity_defect(u, v).abs() < 1e-10 * (1.0 + u * u + v * v).powi(2));
        }
    }

    #[test]
    fn conservation_identity_is_algebraic() {
        let mut rng = ChaCha8Rng::seed_from_u64(6);
        for _ in 0..1000 {
            let (u, v, l): (f64, f64, f64) =
                (rng.gen_range(-5.0..5.0), rng.gen_range(-5.0..5.0), rng.gen_range(0.1..5.0));
            let e2u = 2.0 * u * v;
            let e2l2 = 2.0 * l * l * v;
            let d = (e2u * l * l - u * e2l2) / l.powi(4);
            assert!(d.abs() < 1e-12);
        }
    }

    #[test]
    fn cartan_rigidity_quantities() {
        let k = 1.0 / 3.0;
        let q = rigidity_quantities(1.0, 0.0, k, &[6.0, 6.0], 1e-6, 1e-8).unwrap();
        assert_eq!(q.h, 0.0);
        assert!(q.superminimal_conclusion);
        assert!((q.k_hat - 0.38157).abs() < 1e-5);
        assert!((q.k_hat - q.k_hat_bound).abs() < 1e-12);
        assert!(matches!(
            rigidity_quantities(1.0, 0.0, 1.0, &[6.0], 1e-6, 1e-8),
            Err(Error::NearFlat { .. })
        ));
    }
}
