//! Water-tree (WT) aging physics of XLPE insulation.
//!
//! Degradation depth grows with service time under the operating field; the
//! degraded layer is a water/polyethylene mixture whose permittivity is
//! combined in series with the intact layer. All functions are pure.

// Needed for float math without std; unused when dev-dependencies pull std in.
#[allow(unused_imports)]
use num_traits::Float;
use serde::{Deserialize, Serialize};

use crate::error::{domain, Error, Result};
use crate::C64;

/// Vacuum permeability (H/m).
pub const MU0: f64 = 4.0e-7 * core::f64::consts::PI;
/// Vacuum permittivity (F/m) used for wave propagation and line capacitance.
pub const EPS0: f64 = 8.854_187_812_8e-12;
/// Real relative permittivity of water.
pub const WATER_EPS_REAL: f64 = 81.0;

/// Aging-model material constants of XLPE and the water in the trees.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MaterialParams {
    /// Diffusion constant of water into the dielectric.
    pub alpha0: f64,
    /// Free-volume void size (m^3).
    pub nu0: f64,
    /// Mains frequency (Hz).
    pub f0: f64,
    /// Absolute permittivity entering the aging law and the water model (F/m).
    pub eps0: f64,
    /// Relative permittivity of intact XLPE, `eps' - j eps''`.
    pub eps_pe: C64,
    /// Mechanical yield strength (Pa).
    pub yield_strength: f64,
    /// Depolarization factor.
    pub depolarization: f64,
    /// Water content fraction of the WT region.
    pub water_content: f64,
    /// Water conductivity (S/m).
    pub water_conductivity: f64,
}

impl MaterialParams {
    /// Nominal XLPE/water parameters.
    pub fn nominal() -> Self {
        Self {
            alpha0: 1.44e4,
            nu0: 2.5e-28,
            f0: 60.0,
            eps0: 8.8e-12,
            eps_pe: C64::new(2.3, -0.001),
            yield_strength: 2.0e7,
            depolarization: 1.0 / 12.0,
            water_content: 0.06,
            water_conductivity: 0.22,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let positive = [
            ("alpha0", self.alpha0),
            ("nu0", self.nu0),
            ("f0", self.f0),
            ("eps0", self.eps0),
            ("eps_pe.re", self.eps_pe.re),
            ("yield_strength", self.yield_strength),
            ("water_conductivity", self.water_conductivity),
        ];
        for (what, v) in positive {
            if !(v > 0.0 && v.is_finite()) {
                return Err(domain(what, v));
            }
        }
        if self.eps_pe.im > 0.0 {
            return Err(domain("eps_pe.im", self.eps_pe.im));
        }
        if !(self.depolarization > 0.0 && self.depolarization < 1.0) {
            return Err(domain("depolarization", self.depolarization));
        }
        if !(self.water_content > 0.0 && self.water_content < 1.0) {
            return Err(domain("water_content", self.water_content));
        }
        Ok(())
    }

    /// `alpha0 nu0 f0 F^2 eps0 Re{eps_w}`, the growth-rate prefactor at field `F`.
    fn growth_prefactor(&self, field: f64) -> f64 {
        self.alpha0 * self.nu0 * self.f0 * field * field * self.eps0 * WATER_EPS_REAL
    }
}

impl Default for MaterialParams {
    fn default() -> Self {
        Self::nominal()
    }
}

/// Two-conductor cable cross-section.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CableSpec {
    /// Conductor radius (m).
    pub r_cond: f64,
    /// Center-to-center conductor separation (m).
    pub d_cond: f64,
    /// Insulation thickness (m).
    pub r_insul: f64,
    /// Maximum rated voltage (V).
    pub v0: f64,
}

impl CableSpec {
    /// N2XSEY 6/10 kV three-core XLPE cable.
    pub fn n2xsey() -> Self {
        Self {
            r_cond: 3.99e-3,
            d_cond: 15.88e-3,
            r_insul: 3.4e-3,
            v0: 12.0e3,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.r_cond > 0.0) {
            return Err(domain("r_cond", self.r_cond));
        }
        if !(self.d_cond > 2.0 * self.r_cond) {
            return Err(Error::Geometry {
                d_cond: self.d_cond,
                two_r: 2.0 * self.r_cond,
            });
        }
        if !(self.r_insul > 0.0) {
            return Err(domain("r_insul", self.r_insul));
        }
        if !(self.v0 > 0.0) {
            return Err(domain("v0", self.v0));
        }
        Ok(())
    }
}

impl Default for CableSpec {
    fn default() -> Self {
        Self::n2xsey()
    }
}

/// Salient localized degradation superimposed on the homogeneous profile.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LocalDegradation {
    pub gamma_local: f64,
    /// Distance of the near end from the branch's PLM-side end (m).
    pub start_m: f64,
    pub length_m: f64,
}

impl LocalDegradation {
    pub fn end_m(&self) -> f64 {
        self.start_m + self.length_m
    }
}

/// Aging profile of one cable branch.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct AgingProfile {
    /// Relative depth of the homogeneous WT layer, `y_homo / r_insul`.
    pub gamma_homo: f64,
    pub local: Option<LocalDegradation>,
}

/// Upper bound on the homogeneous relative depth.
pub const GAMMA_HOMO_MAX: f64 = 0.05;
/// Lower bound on the relative depth of a salient localized degradation.
pub const GAMMA_LOCAL_MIN: f64 = 0.1;

impl AgingProfile {
    pub fn homogeneous(gamma_homo: f64) -> Self {
        Self {
            gamma_homo,
            local: None,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(0.0..=GAMMA_HOMO_MAX).contains(&self.gamma_homo) {
            return Err(domain("gamma_homo", self.gamma_homo));
        }
        if let Some(ld) = &self.local {
            if !(GAMMA_LOCAL_MIN..=1.0).contains(&ld.gamma_local) || ld.gamma_local <= self.gamma_homo {
                return Err(domain("gamma_local", ld.gamma_local));
            }
            if !(ld.start_m >= 0.0) {
                return Err(domain("start_m", ld.start_m));
            }
            if !(ld.length_m > 0.0) {
                return Err(domain("length_m", ld.length_m));
            }
        }
        Ok(())
    }
}

/// Relative permittivity of water, `81 - j sigma_w / (2 pi f eps0)`.
pub fn water_permittivity(f: f64, p: &MaterialParams) -> Result<C64> {
    if !(f > 0.0) {
        return Err(domain("frequency", f));
    }
    let im = p.water_conductivity / (2.0 * core::f64::consts::PI * f * p.eps0);
    Ok(C64::new(WATER_EPS_REAL, -im))
}

/// Relative permittivity of the water-treed XLPE mixture.
pub fn wt_permittivity(f: f64, p: &MaterialParams) -> Result<C64> {
    let eps_w = water_permittivity(f, p)?;
    let diff = eps_w - p.eps_pe;
    let denom = p.eps_pe + diff * (p.depolarization * (1.0 - p.water_content));
    if denom.norm() < 1e-12 {
        return Err(Error::Singular {
            what: "WT mixing rule",
            magnitude: denom.norm(),
        });
    }
    Ok(p.eps_pe * (C64::new(1.0, 0.0) + diff * p.water_content / denom))
}

/// Series combination of a WT layer (fraction `gamma`) and intact XLPE.
pub fn series_permittivity(gamma: f64, eps_wt: C64, eps_pe: C64) -> Result<C64> {
    if !(0.0..=1.0).contains(&gamma) {
        return Err(domain("gamma", gamma));
    }
    // The end points are returned verbatim so that the limits are exact.
    if gamma == 0.0 {
        return Ok(eps_pe);
    }
    if gamma == 1.0 {
        return Ok(eps_wt);
    }
    let inv = eps_wt.inv() * gamma + eps_pe.inv() * (1.0 - gamma);
    Ok(inv.inv())
}

/// Equivalent relative permittivity of an insulation whose WT layer covers the
/// fraction `gamma` of its thickness.
pub fn total_permittivity(gamma: f64, f: f64, p: &MaterialParams) -> Result<C64> {
    if !(0.0..=1.0).contains(&gamma) {
        return Err(domain("gamma", gamma));
    }
    series_permittivity(gamma, wt_permittivity(f, p)?, p.eps_pe)
}

/// Homogeneous WT depth (m) after `t_sr` seconds of service at field `field`.
pub fn homogeneous_depth(t_sr: f64, field: f64, p: &MaterialParams) -> Result<f64> {
    if !(t_sr >= 0.0) {
        return Err(domain("service time", t_sr));
    }
    if !(field > 0.0) {
        return Err(domain("field", field));
    }
    let cube = p.growth_prefactor(field) * t_sr.powf(1.5) / p.yield_strength;
    Ok(cube.cbrt())
}

/// Service time (s) that grows a homogeneous depth `y_homo` (m) at `field`.
pub fn equivalent_age(y_homo: f64, field: f64, p: &MaterialParams) -> Result<f64> {
    if !(y_homo >= 0.0) {
        return Err(domain("depth", y_homo));
    }
    if !(field > 0.0) {
        return Err(domain("field", field));
    }
    let t15 = p.yield_strength * y_homo * y_homo * y_homo / p.growth_prefactor(field);
    Ok((t15 * t15).cbrt())
}

/// Peak field at the conductor surface, `V0 / (r ln(d / 2r))`.
pub fn max_field(spec: &CableSpec) -> Result<f64> {
    let ratio = spec.d_cond / (2.0 * spec.r_cond);
    if !(ratio > 1.0) {
        return Err(Error::Geometry {
            d_cond: spec.d_cond,
            two_r: 2.0 * spec.r_cond,
        });
    }
    Ok(spec.v0 / (spec.r_cond * ratio.ln()))
}

/// Phase velocity `1 / sqrt(mu0 eps0 Re(eps))` (m/s).
pub fn propagation_velocity(eps_total: C64) -> Result<f64> {
    if !(eps_total.re >= 1.0) {
        return Err(domain("Re(eps_total)", eps_total.re));
    }
    Ok(1.0 / (MU0 * EPS0 * eps_total.re).sqrt())
}

/// Equivalent age (s) of a homogeneous relative depth under nominal conditions:
/// nominal materials and the rated-voltage field of `spec`.
pub fn equivalent_age_of_gamma(gamma_homo: f64, spec: &CableSpec, p: &MaterialParams) -> Result<f64> {
    equivalent_age(gamma_homo * spec.r_insul, max_field(spec)?, p)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::SECONDS_PER_YEAR;
    use approx::assert_relative_eq;

    // Independent evaluation of the mixing rule with hand-rolled complex
    // arithmetic on (re, im) pairs.
    fn cmul(a: (f64, f64), b: (f64, f64)) -> (f64, f64) {
        (a.0 * b.0 - a.1 * b.1, a.0 * b.1 + a.1 * b.0)
    }
    fn cdiv(a: (f64, f64), b: (f64, f64)) -> (f64, f64) {
        let d = b.0 * b.0 + b.1 * b.1;
        ((a.0 * b.0 + a.1 * b.1) / d, (a.1 * b.0 - a.0 * b.1) / d)
    }
    fn oracle_wt(f: f64) -> (f64, f64) {
        let (pe_r, pe_i) = (2.3, -0.001);
        let w = (81.0, -0.22 / (2.0 * core::f64::consts::PI * f * 8.8e-12));
        let diff = (w.0 - pe_r, w.1 - pe_i);
        let k = (1.0 / 12.0) * 0.94;
        let den = (pe_r + k * diff.0, pe_i + k * diff.1);
        let ratio = cdiv((0.06 * diff.0, 0.06 * diff.1), den);
        cmul((pe_r, pe_i), (1.0 + ratio.0, ratio.1))
    }
    fn oracle_total(gamma: f64, f: f64) -> (f64, f64) {
        let wt = oracle_wt(f);
        let a = cdiv((gamma, 0.0), wt);
        let b = cdiv((1.0 - gamma, 0.0), (2.3, -0.001));
        cdiv((1.0, 0.0), (a.0 + b.0, a.1 + b.1))
    }

    #[test]
    fn water_examples() {
        let p = MaterialParams::nominal();
        let w = water_permittivity(10e6, &p).unwrap();
        assert_eq!(w.re, 81.0);
        assert_relative_eq!(w.im, -397.89, epsilon = 0.01);
        let w1 = water_permittivity(1e6, &p).unwrap();
        assert_relative_eq!(w1.im, -3978.9, epsilon = 0.1);
        let thz = water_permittivity(1e12, &p).unwrap();
        assert!(thz.im.abs() < 0.01);
        assert!(water_permittivity(0.0, &p).is_err());
        assert!(water_permittivity(-1.0, &p).is_err());
    }

    #[test]
    fn wt_examples() {
        let mut p = MaterialParams::nominal();
        let e = wt_permittivity(10e6, &p).unwrap();
        let (r, i) = oracle_wt(10e6);
        assert_relative_eq!(e.re, r, max_relative = 1e-12);
        assert_relative_eq!(e.im, i, max_relative = 1e-12);
        // Frozen from the oracle: 4.0289 - j0.1227.
        assert_relative_eq!(e.re, 4.03, epsilon = 0.005);
        assert_relative_eq!(e.im, -0.12, epsilon = 0.005);

        p.water_content = 0.0;
        assert_eq!(wt_permittivity(10e6, &p).unwrap(), p.eps_pe);

        let mut p = MaterialParams::nominal();
        p.depolarization = 1e9;
        let e = wt_permittivity(10e6, &p).unwrap();
        assert!((e - p.eps_pe).norm() < 1e-6);
    }

    #[test]
    fn wt_singularity() {
        let mut p = MaterialParams::nominal();
        p.eps_pe = C64::new(0.0, 0.0);
        p.depolarization = 0.0;
        assert!(matches!(wt_permittivity(1e6, &p), Err(Error::Singular { .. })));
    }

    #[test]
    fn total_examples() {
        let p = MaterialParams::nominal();
        let f = 10e6;
        assert_eq!(total_permittivity(0.0, f, &p).unwrap(), p.eps_pe);
        assert_eq!(total_permittivity(1.0, f, &p).unwrap(), wt_permittivity(f, &p).unwrap());
        let e = total_permittivity(0.05, f, &p).unwrap();
        let (r, i) = oracle_total(0.05, f);
        assert_relative_eq!(e.re, r, max_relative = 1e-12);
        assert_relative_eq!(e.im, i, max_relative = 1e-12);
        assert_relative_eq!(e.re, 2.351, epsilon = 0.001);
        assert_relative_eq!(e.im, -0.0030, epsilon = 0.0001);
        assert!(total_permittivity(1.01, f, &p).is_err());
        assert!(total_permittivity(-0.01, f, &p).is_err());
    }

    #[test]
    fn depth_examples() {
        let p = MaterialParams::nominal();
        let spec = CableSpec::n2xsey();
        let field = max_field(&spec).unwrap();
        assert_eq!(homogeneous_depth(0.0, field, &p).unwrap(), 0.0);
        let t30 = 30.0 * SECONDS_PER_YEAR;
        let gamma = homogeneous_depth(t30, field, &p).unwrap() / spec.r_insul;
        assert!((gamma - 0.0481).abs() < 0.003, "gamma_homo(30 y) = {gamma}");
        let y1 = homogeneous_depth(t30, field, &p).unwrap();
        let y4 = homogeneous_depth(4.0 * t30, field, &p).unwrap();
        assert_relative_eq!(y4, 2.0 * y1, max_relative = 1e-12);
        assert!(homogeneous_depth(-1.0, field, &p).is_err());
    }

    #[test]
    fn age_examples() {
        let p = MaterialParams::nominal();
        let spec = CableSpec::n2xsey();
        let field = max_field(&spec).unwrap();
        assert_eq!(equivalent_age(0.0, field, &p).unwrap(), 0.0);
        for years in [1.0, 10.0, 30.0] {
            let t = years * SECONDS_PER_YEAR;
            let back = equivalent_age(homogeneous_depth(t, field, &p).unwrap(), field, &p).unwrap();
            assert_relative_eq!(back, t, max_relative = 1e-9);
        }
        let t = equivalent_age(spec.r_insul * 0.0481, field, &p).unwrap() / SECONDS_PER_YEAR;
        assert!((t - 30.0).abs() < 2.0, "t_eq = {t} years");
        assert!(equivalent_age(-1e-6, field, &p).is_err());
    }

    #[test]
    fn field_examples() {
        let spec = CableSpec::n2xsey();
        let f = max_field(&spec).unwrap();
        assert_relative_eq!(f, 4.37e6, max_relative = 0.005);
        let mut doubled = spec;
        doubled.v0 *= 2.0;
        assert_relative_eq!(max_field(&doubled).unwrap(), 2.0 * f, max_relative = 1e-12);
        let mut e_ratio = spec;
        e_ratio.d_cond = 2.0 * spec.r_cond * core::f64::consts::E;
        assert_relative_eq!(max_field(&e_ratio).unwrap(), spec.v0 / spec.r_cond, max_relative = 1e-12);
        let mut bad = spec;
        bad.d_cond = 2.0 * spec.r_cond;
        assert!(matches!(max_field(&bad), Err(Error::Geometry { .. })));
    }

    #[test]
    fn velocity_examples() {
        assert_relative_eq!(propagation_velocity(C64::new(1.0, 0.0)).unwrap(), 2.998e8, max_relative = 1e-3);
        assert_relative_eq!(propagation_velocity(C64::new(2.3, -0.1)).unwrap(), 1.977e8, max_relative = 1e-3);
        assert!(
            propagation_velocity(C64::new(2.4, 0.0)).unwrap() < propagation_velocity(C64::new(2.3, 0.0)).unwrap()
        );
        assert!(propagation_velocity(C64::new(0.99, 0.0)).is_err());
    }

    #[test]
    fn nominal_params_validate() {
        MaterialParams::nominal().validate().unwrap();
        CableSpec::n2xsey().validate().unwrap();
        let bad = AgingProfile {
            gamma_homo: 0.02,
            local: Some(LocalDegradation {
                gamma_local: 0.05,
                start_m: 10.0,
                length_m: 100.0,
            }),
        };
        assert!(bad.validate().is_err());
        assert!(AgingProfile::homogeneous(0.06).validate().is_err());
    }
}
