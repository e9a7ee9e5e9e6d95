use serde::{Deserialize, Serialize};

use crate::control_sequencer::Ratio;
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EfficiencyReport {
    /// Per-pulse probability of detecting a photon at a demultiplexer output.
    pub p: f64,
    /// Source brightness.
    pub b: f64,
    /// p / B.
    pub e_raw: f64,
    pub detector_efficiency: f64,
    pub duty: Ratio,
    /// e_raw with detector efficiency and switching duty divided out.
    pub e_corrected: f64,
}

fn check_unit_interval(field: &'static str, value: f64) -> Result<()> {
    if value > 0.0 && value <= 1.0 {
        Ok(())
    } else {
        Err(Error::InvalidParameter {
            field,
            reason: format!("{value} must lie in (0, 1]"),
        })
    }
}

pub fn channel_efficiency(p: f64, b: f64, detector_efficiency: f64, duty: Ratio) -> Result<EfficiencyReport> {
    if b == 0.0 {
        return Err(Error::UndefinedEstimate("brightness is zero"));
    }
    check_unit_interval("p", p)?;
    check_unit_interval("brightness", b)?;
    check_unit_interval("detector_efficiency", detector_efficiency)?;
    if duty.den == 0 || duty.num == 0 || duty.num > duty.den {
        return Err(Error::InvalidParameter {
            field: "duty",
            reason: format!("{duty} must lie in (0, 1]"),
        });
    }
    let e_raw = p / b;
    Ok(EfficiencyReport {
        p,
        b,
        e_raw,
        detector_efficiency,
        duty,
        e_corrected: e_raw / (detector_efficiency * duty.value()),
    })
}
