//! Integral curves of the kernel direction `e2` and the Riccati blow-up.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::invariants::FrameField;
use crate::linalg::Vec5;
use crate::polar::{BundlePoint, PrincipalFrame};
use crate::surface::Geometry;

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct FlowSample {
    pub s: f64,
    /// Bundle chart coordinates `(x1, x2, t)`.
    pub chart: [f64; 3],
    pub position: Vec5,
    pub lambda: f64,
    pub u: f64,
    pub v: f64,
    pub u_over_lambda2: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FlowResult {
    pub samples: Vec<FlowSample>,
    /// Largest distance of a sample from span{Psi(start), velocity(start)}.
    pub planarity: f64,
    /// |Psi(end) - Psi(start)|.
    pub closure: f64,
    /// max |u / lambda^2 - initial value|.
    pub conservation_drift: f64,
    /// max | |dPsi(e2)| - 1 |.
    pub speed_defect: f64,
}

fn add(q: [f64; 3], k: [f64; 3], s: f64) -> [f64; 3] {
    [q[0] + s * k[0], q[1] + s * k[1], q[2] + s * k[2]]
}

impl Geometry<'_> {
    /// Fourth-order Runge-Kutta along `e2` from `start`, `steps` steps of
    /// arc length `length / steps`.
    pub fn flow_e2(&self, start: &BundlePoint, length: f64, steps: usize) -> Result<FlowResult> {
        if steps == 0 || !(length.is_finite()) {
            return Err(Error::Config("flow needs steps > 0 and a finite length".into()));
        }
        let field = FrameField::new(self, start)?;
        let h = self.tol.fd_step;
        let ds = length / steps as f64;
        let mut reference = field.frame;
        let mut speed_defect: f64 = 0.0;

        // chart field of e2, sign continued from the last accepted frame
        let velocity = |q: [f64; 3], s: f64, reference: &PrincipalFrame| {
            let (local, f) = field.frame_at(q, reference).map_err(|e| match e {
                Error::Stencil(_) => Error::SingularEncounter { s },
                other => other,
            })?;
            if !(local.regularity() > self.tol.regularity) {
                return Err(Error::SingularEncounter { s });
            }
            let speed = local.push(&f.chart[1]).norm();
            if (speed - 1.0).abs() > self.tol.flow_speed {
                return Err(Error::Step { s, speed });
            }
            Ok((f.chart[1], speed, f))
        };

        let sample = |q: [f64; 3], s: f64, reference: &PrincipalFrame| -> Result<FlowSample> {
            let (local, f) = field.frame_at(q, reference)?;
            let u = field.u_field_from(q, reference, h)?;
            let v = field.v_field(q, h)?;
            let lambda = f.lambda();
            Ok(FlowSample {
                s,
                chart: q,
                position: local.position,
                lambda,
                u,
                v,
                u_over_lambda2: u / (lambda * lambda),
            })
        };

        let mut q = field.centre;
        let mut samples = vec![sample(q, 0.0, &reference)?];
        for n in 0..steps {
            let s = n as f64 * ds;
            let (k1, sp, f) = velocity(q, s, &reference)?;
            speed_defect = speed_defect.max((sp - 1.0).abs());
            reference = f;
            let (k2, _, _) = velocity(add(q, k1, 0.5 * ds), s + 0.5 * ds, &reference)?;
            let (k3, _, _) = velocity(add(q, k2, 0.5 * ds), s + 0.5 * ds, &reference)?;
            let (k4, _, _) = velocity(add(q, k3, ds), s + ds, &reference)?;
            q = std::array::from_fn(|a| q[a] + ds / 6.0 * (k1[a] + 2.0 * k2[a] + 2.0 * k3[a] + k4[a]));
            samples.push(sample(q, s + ds, &reference)?);
        }

        let p0 = samples[0].position;
        let v0 = field.local_position_velocity()?;
        let planarity = samples
            .iter()
            .map(|x| x.position.reject(&[p0, v0]).norm())
            .fold(0.0, f64::max);
        let closure = (samples.last().unwrap().position - p0).norm();
        let c0 = samples[0].u_over_lambda2;
        let conservation_drift = samples
            .iter()
            .map(|x| (x.u_over_lambda2 - c0).abs())
            .fold(0.0, f64::max);
        Ok(FlowResult {
            samples,
            planarity,
            closure,
            conservation_drift,
            speed_defect,
        })
    }
}

impl FrameField<'_, '_> {
    /// Unit velocity `dPsi(e2)` at the centre.
    pub fn local_position_velocity(&self) -> Result<Vec5> {
        let (local, f) = self.frame_at(self.centre, &self.frame)?;
        Ok(local.push(&f.chart[1]).normalized())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BlowupResult {
    pub v0: f64,
    pub step: f64,
    /// Arc length at which |v| first exceeds the threshold.
    pub blowup_estimate: f64,
    /// pi/2 - arctan(v0).
    pub exact: f64,
    /// `(s, v)` samples, thinned to at most about 1000.
    pub profile: Vec<(f64, f64)>,
}

/// Integrates `v' = v^2 + 1` with RK4 until `|v| > threshold`.
pub fn blowup_demo(v0: f64, step: f64, threshold: f64) -> Result<BlowupResult> {
    if !(step > 0.0) || !v0.is_finite() {
        return Err(Error::Config("blowup needs a positive step and finite v0".into()));
    }
    let exact = std::f64::consts::FRAC_PI_2 - v0.atan();
    let f = |v: f64| v * v + 1.0;
    let every = ((exact / step) / 1000.0).ceil().max(1.0) as usize;
    let max_steps = (10.0 * (exact + 1.0) / step).ceil() as usize;
    let mut v = v0;
    let mut profile = vec![(0.0, v0)];
    for n in 1..=max_steps {
        let k1 = f(v);
        let k2 = f(v + 0.5 * step * k1);
        let k3 = f(v + 0.5 * step * k2);
        let k4 = f(v + step * k3);
        v += step / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
        let s = n as f64 * step;
        if n % every == 0 {
            profile.push((s, v));
        }
        if !(v.abs() <= threshold) {
            profile.push((s, v));
            return Ok(BlowupResult {
                v0,
                step,
                blowup_estimate: s,
                exact,
                profile,
            });
        }
    }
    Err(Error::Config(format!(
        "no blow-up within {max_steps} steps of size {step}"
    )))
}
