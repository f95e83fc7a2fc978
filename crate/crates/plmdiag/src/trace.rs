//! Trace export: a small text record per waveform.
//!
//! ```text
//! plmdiag-trace 1
//! dt = 1e-8
//! samples = <base64 little-endian f64>
//! peaks = <index>:<position>:<magnitude> ...
//! ```

use std::path::Path;

use plmdiag_core::reflectometry::{JtfdrTrace, Peak};

use crate::dataset::{decode_f64, encode_f64};
use crate::error::{Error, Result};

const MAGIC: &str = "plmdiag-trace 1";

pub fn format_trace(t: &JtfdrTrace) -> String {
    let peaks: Vec<String> = t
        .peaks
        .iter()
        .map(|p| format!("{}:{}:{}", p.index, p.position, p.magnitude))
        .collect();
    format!(
        "{MAGIC}\ndt = {}\nsamples = {}\npeaks = {}\n",
        t.dt,
        encode_f64(&t.samples),
        peaks.join(" ")
    )
}

pub fn parse_trace(text: &str) -> std::result::Result<JtfdrTrace, String> {
    let mut lines = text.lines();
    if lines.next() != Some(MAGIC) {
        return Err(format!("first line must be {MAGIC:?}"));
    }
    let mut field = |name: &str| -> std::result::Result<String, String> {
        let l = lines.next().ok_or_else(|| format!("missing {name}"))?;
        let (k, v) = l.split_once('=').ok_or_else(|| format!("expected `{name} = ...`"))?;
        if k.trim() != name {
            return Err(format!("expected {name}, found {}", k.trim()));
        }
        Ok(v.trim().to_string())
    };
    let dt: f64 = field("dt")?.parse().map_err(|e| format!("dt: {e}"))?;
    let samples = decode_f64(&field("samples")?)?;
    let peaks = field("peaks")?
        .split_whitespace()
        .map(|p| {
            let parts: Vec<&str> = p.split(':').collect();
            let [i, pos, mag] = parts[..] else {
                return Err(format!("peak {p:?} is not index:position:magnitude"));
            };
            Ok(Peak {
                index: i.parse().map_err(|e| format!("peak index: {e}"))?,
                position: pos.parse().map_err(|e| format!("peak position: {e}"))?,
                magnitude: mag.parse().map_err(|e| format!("peak magnitude: {e}"))?,
            })
        })
        .collect::<std::result::Result<Vec<_>, String>>()?;
    Ok(JtfdrTrace { samples, dt, peaks })
}

pub fn write_trace(path: &Path, t: &JtfdrTrace) -> Result<()> {
    std::fs::write(path, format_trace(t)).map_err(|e| Error::io(path, e))
}

pub fn read_trace(path: &Path) -> Result<JtfdrTrace> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_trace(&text).map_err(|reason| Error::Format {
        path: path.to_path_buf(),
        reason,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use plmdiag_core::netmodel::{solve_network, FrequencyGrid, TimeGrid};
    use plmdiag_core::reflectometry::Jtfdr;
    use plmdiag_core::scenario::fig5_scenario;

    #[test]
    fn traces_round_trip_exactly() {
        let grid = FrequencyGrid::plc_band(&TimeGrid::default());
        let o = solve_network(&fig5_scenario(), &grid).unwrap().observation(0, 1).unwrap();
        let t = Jtfdr::with_defaults().trace(&o.h_ref, &grid).unwrap();
        assert_eq!(parse_trace(&format_trace(&t)).unwrap(), t);
    }

    #[test]
    fn malformed_peaks_are_reported() {
        let e = parse_trace("plmdiag-trace 1\ndt = 1e-8\nsamples = \npeaks = 1:2\n").unwrap_err();
        assert!(e.contains("index:position:magnitude"), "{e}");
    }
}
