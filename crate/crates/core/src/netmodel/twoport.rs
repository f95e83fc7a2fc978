use crate::error::{Error, Result};
use crate::C64;

/// ABCD transmission matrix, `[V1; I1] = [[a, b], [c, d]] [V2; I2]` with `I2`
/// leaving port 2.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Abcd {
    pub a: C64,
    pub b: C64,
    pub c: C64,
    pub d: C64,
}

const ONE: C64 = C64::new(1.0, 0.0);
const ZERO: C64 = C64::new(0.0, 0.0);

impl Abcd {
    pub fn identity() -> Self {
        Self {
            a: ONE,
            b: ZERO,
            c: ZERO,
            d: ONE,
        }
    }

    pub fn shunt_admittance(y: C64) -> Self {
        Self {
            a: ONE,
            b: ZERO,
            c: y,
            d: ONE,
        }
    }

    pub fn series_impedance(z: C64) -> Self {
        Self {
            a: ONE,
            b: z,
            c: ZERO,
            d: ONE,
        }
    }

    pub fn determinant(&self) -> C64 {
        self.a * self.d - self.b * self.c
    }

    /// `self` followed by `next`.
    pub fn cascade(&self, next: &Abcd) -> Abcd {
        Abcd {
            a: self.a * next.a + self.b * next.c,
            b: self.a * next.b + self.b * next.d,
            c: self.c * next.a + self.d * next.c,
            d: self.c * next.b + self.d * next.d,
        }
    }

    /// Same network driven from port 2.
    pub fn reversed(&self) -> Abcd {
        let det = self.determinant();
        Abcd {
            a: self.d / det,
            b: self.b / det,
            c: self.c / det,
            d: self.a / det,
        }
    }

    /// Impedance seen at port 1 with `load` across port 2.
    pub fn input_impedance(&self, load: C64) -> Option<C64> {
        let num = self.a * load + self.b;
        let den = self.c * load + self.d;
        (den.norm() > 1e-300).then(|| num / den)
    }

    /// `V2 / V1` with `load` across port 2.
    pub fn voltage_ratio(&self, load: C64) -> Option<C64> {
        let den = self.a + self.b / load;
        (den.norm() > 1e-300 && load.norm() > 0.0).then(|| den.inv())
    }
}

/// Drives `m` from an ideal source of EMF 1 with series `z_source`, port 2
/// loaded by `z_load`. Returns `(V_load, Z_in)`.
pub fn path_response(m: &Abcd, z_source: C64, z_load: C64) -> Result<(C64, C64)> {
    let z_in = m.input_impedance(z_load).ok_or(Error::Singular {
        what: "path input impedance",
        magnitude: 0.0,
    })?;
    let den = z_in + z_source;
    if den.norm() < 1e-300 {
        return Err(Error::Singular {
            what: "source divider",
            magnitude: den.norm(),
        });
    }
    let v_in = z_in / den;
    let ratio = m.voltage_ratio(z_load).ok_or(Error::Singular {
        what: "path voltage transfer",
        magnitude: 0.0,
    })?;
    Ok((v_in * ratio, z_in))
}
