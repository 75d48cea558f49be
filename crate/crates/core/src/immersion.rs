//! Immersions of a parameter rectangle into the unit sphere of R^5.

use crate::config::Tolerances;
use crate::dsl::{self, Expr};
use crate::error::{Error, Result};
use crate::jets::Jet;
use crate::linalg::Vec5;

/// Parameter rectangle. Evaluation is allowed on the closed rectangle;
/// sample grids stay `margin` away from its edges so finite-difference
/// stencils fit.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Domain {
    pub x1: (f64, f64),
    pub x2: (f64, f64),
    pub margin: f64,
}

impl Domain {
    pub fn check(&self) -> Result<()> {
        let ok = |(a, b): (f64, f64)| a.is_finite() && b.is_finite() && a < b;
        if !ok(self.x1) || !ok(self.x2) {
            return Err(Error::Validation("domain bounds must satisfy min < max".into()));
        }
        let narrow = (self.x1.1 - self.x1.0).min(self.x2.1 - self.x2.0);
        if !(self.margin >= 0.0) || 2.0 * self.margin >= narrow {
            return Err(Error::Validation(format!(
                "margin {} does not fit the domain",
                self.margin
            )));
        }
        Ok(())
    }

    /// Closed rectangle, widened by a few ulps so stencils that reach the
    /// edge through rounding stay inside.
    pub fn contains(&self, x: [f64; 2]) -> bool {
        let inside = |(a, b): (f64, f64), v: f64| {
            let slack = 4.0 * f64::EPSILON * (1.0 + a.abs().max(b.abs()));
            v >= a - slack && v <= b + slack
        };
        inside(self.x1, x[0]) && inside(self.x2, x[1])
    }

    /// Sampled sub-rectangle `[min + margin, max - margin]` per axis.
    pub fn sampled(&self) -> ((f64, f64), (f64, f64)) {
        let m = self.margin;
        ((self.x1.0 + m, self.x1.1 - m), (self.x2.0 + m, self.x2.1 - m))
    }

    /// Row-major `n1 x n2` grid over the sampled rectangle: the index of
    /// `(i, j)` is `i * n2 + j`, with `x1` varying along rows.
    pub fn grid(&self, n1: usize, n2: usize) -> Vec<[f64; 2]> {
        let ((a1, b1), (a2, b2)) = self.sampled();
        let lerp = |a: f64, b: f64, k: usize, n: usize| {
            if n <= 1 {
                0.5 * (a + b)
            } else {
                a + (b - a) * k as f64 / (n - 1) as f64
            }
        };
        let mut out = Vec::with_capacity(n1 * n2);
        for i in 0..n1 {
            for j in 0..n2 {
                out.push([lerp(a1, b1, i, n1), lerp(a2, b2, j, n2)]);
            }
        }
        out
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct Flags {
    pub claims_minimal: bool,
    pub claims_superminimal: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ImmersionSpec {
    pub name: String,
    pub domain: Domain,
    pub components: [Expr; 5],
    pub flags: Flags,
}

/// Jets of the five components of `g` at one point.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Jet5(pub [Jet; 5]);

impl Jet5 {
    pub fn value(&self) -> Vec5 {
        Vec5(self.0.map(|j| j.value))
    }

    /// First partial along chart axis `i`.
    pub fn d1(&self, i: usize) -> Vec5 {
        Vec5(self.0.map(|j| j.d1[i]))
    }

    pub fn d2(&self, i: usize, k: usize) -> Vec5 {
        Vec5(self.0.map(|j| j.second(i, k)))
    }

    pub fn d3(&self, i: usize, k: usize, l: usize) -> Vec5 {
        Vec5(self.0.map(|j| j.third(i, k, l)))
    }
}

impl ImmersionSpec {
    /// Jets of `g` at `point`, truncated to `order` (at most 3).
    pub fn eval_jet(&self, point: [f64; 2], order: usize, tol: &Tolerances) -> Result<Jet5> {
        if order > 3 {
            return Err(Error::Domain(format!("jet order {order} exceeds 3")));
        }
        if !self.domain.contains(point) {
            return Err(Error::Domain(format!(
                "point ({}, {}) outside the domain of `{}`",
                point[0], point[1], self.name
            )));
        }
        let mut out = [Jet::default(); 5];
        for (slot, expr) in out.iter_mut().zip(self.components.iter()) {
            *slot = expr.eval_jet(point, tol.jet_singular)?.truncate(order);
        }
        Ok(Jet5(out))
    }

    pub fn eval(&self, point: [f64; 2]) -> Vec5 {
        Vec5(std::array::from_fn(|i| self.components[i].eval(point)))
    }

    /// Sphericality and rank checks on an `n x n` sample grid.
    pub fn validate(&self, n: usize, tol: &Tolerances) -> Result<()> {
        self.domain.check()?;
        for p in self.domain.grid(n, n) {
            let jets = self.eval_jet(p, 1, tol).map_err(|e| {
                Error::Validation(format!("evaluation failed at ({}, {}): {e}", p[0], p[1]))
            })?;
            let g = jets.value();
            let off = (g.norm() - 1.0).abs();
            if !(off <= tol.sphericality) {
                return Err(Error::Validation(format!(
                    "|g| - 1 = {off:e} at ({}, {}); the image must lie on the unit sphere",
                    p[0], p[1]
                )));
            }
            let (g1, g2) = (jets.d1(0), jets.d1(1));
            let det = g1.dot(&g1) * g2.dot(&g2) - g1.dot(&g2).powi(2);
            if !(det > tol.immersion_rank) {
                return Err(Error::Validation(format!(
                    "dg has rank < 2 at ({}, {}) (Gram determinant {det:e})",
                    p[0], p[1]
                )));
            }
        }
        Ok(())
    }

    /// DSL text that parses back to this spec.
    pub fn to_source(&self) -> String {
        let d = &self.domain;
        let mut s = format!(
            "immersion {}\ndomain x1 {} {} x2 {} {} margin {}\n",
            self.name, d.x1.0, d.x1.1, d.x2.0, d.x2.1, d.margin
        );
        for (i, c) in self.components.iter().enumerate() {
            s.push_str(&format!("c{} = {}\n", i + 1, c));
        }
        if self.flags.claims_minimal || self.flags.claims_superminimal {
            s.push_str("flags");
            if self.flags.claims_minimal {
                s.push_str(" minimal");
            }
            if self.flags.claims_superminimal {
                s.push_str(" superminimal");
            }
            s.push('\n');
        }
        s
    }
}

pub const GALLERY: [&str; 3] = ["veronese", "clifford", "geodesic2"];

/// The Veronese surface g(x,y,z) = (xy/√3, xz/√3, yz/√3, (x²-y²)/(2√3),
/// (x²+y²-2z²)/6) on the sphere of radius √3, in the chart
/// (x,y,z) = √3(sin θ cos φ, sin θ sin φ, cos θ).
pub const VERONESE_SOURCE: &str = "\
immersion veronese
domain x1 0.2 pi - 0.2 x2 0 2*pi margin 0.01
c1 = (sqrt(3)*sin(x1)*cos(x2)) * (sqrt(3)*sin(x1)*sin(x2)) / sqrt(3)
c2 = (sqrt(3)*sin(x1)*cos(x2)) * (sqrt(3)*cos(x1)) / sqrt(3)
c3 = (sqrt(3)*sin(x1)*sin(x2)) * (sqrt(3)*cos(x1)) / sqrt(3)
c4 = ((sqrt(3)*sin(x1)*cos(x2))^2 - (sqrt(3)*sin(x1)*sin(x2))^2) / (2*sqrt(3))
c5 = ((sqrt(3)*sin(x1)*cos(x2))^2 + (sqrt(3)*sin(x1)*sin(x2))^2 - 2*(sqrt(3)*cos(x1))^2) / 6
flags minimal superminimal
";

/// Flat torus in S^3 = S^4 ∩ {x5 = 0}, isometrically parametrized.
pub const CLIFFORD_SOURCE: &str = "\
immersion clifford
domain x1 0 sqrt(2)*pi x2 0 sqrt(2)*pi margin 0.01
c1 = cos(sqrt(2)*x1) / sqrt(2)
c2 = sin(sqrt(2)*x1) / sqrt(2)
c3 = cos(sqrt(2)*x2) / sqrt(2)
c4 = sin(sqrt(2)*x2) / sqrt(2)
c5 = 0
flags minimal
";

/// Totally geodesic unit sphere in the first three coordinates.
pub const GEODESIC2_SOURCE: &str = "\
immersion geodesic2
domain x1 0.2 pi - 0.2 x2 0 2*pi margin 0.01
c1 = sin(x1)*cos(x2)
c2 = sin(x1)*sin(x2)
c3 = cos(x1)
c4 = 0
c5 = 0
flags minimal superminimal
";

/// Built-in immersions by name.
pub fn gallery(name: &str) -> Result<ImmersionSpec> {
    let source = match name {
        "veronese" => VERONESE_SOURCE,
        "clifford" => CLIFFORD_SOURCE,
        "geodesic2" => GEODESIC2_SOURCE,
        other => return Err(Error::UnknownGallery(other.to_string())),
    };
    dsl::parse_immersion(source, &Tolerances::default())
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;
    use std::f64::consts::FRAC_PI_2;

    fn tol() -> Tolerances {
        Tolerances::default()
    }

    #[test]
    fn veronese_at_equator() {
        let spec = gallery("veronese").unwrap();
        let g = spec.eval_jet([FRAC_PI_2, 0.0], 3, &tol()).unwrap().value();
        let expected = Vec5([0.0, 0.0, 0.0, 3f64.sqrt() / 2.0, 0.5]);
        assert!((g - expected).norm() < 1e-15, "{g:?}");
    }

    #[test]
    fn unknown_gallery() {
        assert_eq!(
            gallery("nope").unwrap_err(),
            Error::UnknownGallery("nope".into())
        );
    }

    #[test]
    fn veronese_sphericality_is_tight() {
        let spec = gallery("veronese").unwrap();
        for p in spec.domain.grid(16, 16) {
            assert!((spec.eval(p).norm() - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn gallery_invariants_on_64_grid() {
        for name in GALLERY {
            let spec = gallery(name).unwrap();
            spec.validate(64, &tol()).unwrap();
        }
    }

    #[test]
    fn clifford_has_unit_norm() {
        let spec = gallery("clifford").unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        for _ in 0..100 {
            let p = [rng.gen_range(0.0..4.4), rng.gen_range(0.0..4.4)];
            assert!((spec.eval(p).norm() - 1.0).abs() < 1e-15);
        }
    }

    #[test]
    fn position_orthogonal_to_partials() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        for name in GALLERY {
            let spec = gallery(name).unwrap();
            let ((a1, b1), (a2, b2)) = spec.domain.sampled();
            for _ in 0..50 {
                let p = [rng.gen_range(a1..b1), rng.gen_range(a2..b2)];
                let j = spec.eval_jet(p, 1, &tol()).unwrap();
                assert!(j.value().dot(&j.d1(0)).abs() < 1e-10);
                assert!(j.value().dot(&j.d1(1)).abs() < 1e-10);
            }
        }
    }

    #[test]
    fn jets_match_finite_differences() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let h = 1e-4;
        for name in GALLERY {
            let spec = gallery(name).unwrap();
            let ((a1, b1), (a2, b2)) = spec.domain.sampled();
            for _ in 0..100 {
                let p = [rng.gen_range(a1..b1), rng.gen_range(a2..b2)];
                let j = spec.eval_jet(p, 2, &tol()).unwrap();
                for axis in 0..2 {
                    let mut pp = p;
                    let mut pm = p;
                    pp[axis] += h;
                    pm[axis] -= h;
                    let fd = (spec.eval(pp) - spec.eval(pm)) * (1.0 / (2.0 * h));
                    let fd2 = (spec.eval(pp) + spec.eval(pm) - spec.eval(p) * 2.0) * (1.0 / (h * h));
                    let d1 = j.d1(axis);
                    let d2 = j.d2(axis, axis);
                    assert!((fd - d1).norm() <= 1e-5 * (1.0 + d1.norm()));
                    assert!((fd2 - d2).norm() <= 1e-5 * (1.0 + d2.norm()));
                }
            }
        }
    }

    #[test]
    fn outside_domain_is_error() {
        let spec = gallery("veronese").unwrap();
        assert!(matches!(
            spec.eval_jet([0.0, 0.0], 1, &tol()),
            Err(Error::Domain(_))
        ));
        assert!(matches!(
            spec.eval_jet([1.0, 1.0], 4, &tol()),
            Err(Error::Domain(_))
        ));
    }

    #[test]
    fn truncated_order_zeroes_higher_slots() {
        let spec = gallery("veronese").unwrap();
        let j = spec.eval_jet([1.0, 1.0], 1, &tol()).unwrap();
        assert_eq!(j.d2(0, 1), Vec5::ZERO);
        assert_eq!(j.d3(0, 0, 1), Vec5::ZERO);
    }
}
