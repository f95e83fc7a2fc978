// Needed for float math without std; unused when dev-dependencies pull std in.
#[allow(unused_imports)]
use num_traits::Float;
use core::f64::consts::PI;

use serde::{Deserialize, Serialize};

use super::Abcd;
use crate::dielectric::{CableSpec, EPS0, MU0};
use crate::error::{domain, Error, Result};
use crate::C64;

/// Conductivity of annealed copper (S/m).
pub const COPPER_CONDUCTIVITY: f64 = 5.8e7;

/// Per-unit-length line parameters at one frequency.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PulParams {
    /// Ohm/m
    pub r: f64,
    /// H/m
    pub l: f64,
    /// S/m
    pub g: f64,
    /// F/m
    pub c: f64,
}

impl PulParams {
    /// Propagation constant and characteristic impedance at `f`.
    pub fn propagation(&self, f: f64) -> (C64, C64) {
        let w = 2.0 * PI * f;
        let z = C64::new(self.r, w * self.l);
        let y = C64::new(self.g, w * self.c);
        let gamma = (z * y).sqrt();
        (gamma, z / gamma)
    }
}

/// Differential two-wire line parameters for insulation permittivity `eps_total`.
pub fn pul_parameters(spec: &CableSpec, eps_total: C64, f: f64) -> Result<PulParams> {
    let ratio = spec.d_cond / (2.0 * spec.r_cond);
    if !(ratio > 1.0) {
        return Err(Error::Geometry {
            d_cond: spec.d_cond,
            two_r: 2.0 * spec.r_cond,
        });
    }
    if !(f > 0.0) {
        return Err(domain("frequency", f));
    }
    if !(eps_total.re > 0.0) {
        return Err(domain("Re(eps_total)", eps_total.re));
    }
    let acosh = ratio.acosh();
    let c = PI * EPS0 * eps_total.re / acosh;
    let l = MU0 / PI * acosh;
    let g = 2.0 * PI * f * c * (eps_total.im.abs() / eps_total.re);
    let r = (PI * f * MU0 / COPPER_CONDUCTIVITY).sqrt() / (PI * spec.r_cond);
    Ok(PulParams { r, l, g, c })
}

/// Telegrapher two-port of a uniform section of `length` metres.
pub fn abcd_section(pul: &PulParams, length: f64, f: f64) -> Result<Abcd> {
    if !(length >= 0.0) {
        return Err(domain("section length", length));
    }
    let (gamma, zc) = pul.propagation(f);
    let gl = gamma * length;
    if gl.re > 700.0 {
        return Err(domain("Re(gamma * length)", gl.re));
    }
    let (ch, sh) = (gl.cosh(), gl.sinh());
    Ok(Abcd {
        a: ch,
        b: zc * sh,
        c: sh / zc,
        d: ch,
    })
}
