use super::peaks::PeakAreas;
use crate::detection::BeamsplitterModel;
use crate::error::{Error, Result};

/// g2(0) = A0 / <Ai>.
pub fn g2_zero(areas: &PeakAreas) -> Result<f64> {
    areas.ratio()
}

/// Raw two-photon interference visibility, 1 - 2 A0 / <Ai>. Not clamped.
pub fn hom_uncorrected(areas: &PeakAreas) -> Result<f64> {
    Ok(1.0 - 2.0 * areas.ratio()?)
}

/// Visibility corrected for multiphoton emission, splitter imbalance and the
/// splitter's classical visibility `e`:
///
/// ```text
/// V = (1.5 g2 + k - k a0) / (1 - e^2),   k = (R^2 + T^2) / (2 R T)
/// ```
pub fn hom_corrected(a0_ratio: f64, g2: f64, bs: &BeamsplitterModel) -> Result<f64> {
    bs.validate()?;
    let e = bs.classical_visibility;
    if e >= 1.0 {
        return Err(Error::InvalidParameter {
            field: "classical_visibility",
            reason: "must be below 1".into(),
        });
    }
    if a0_ratio.is_nan() || a0_ratio < 0.0 {
        return Err(Error::InvalidParameter {
            field: "a0_ratio",
            reason: format!("{a0_ratio} must be non-negative"),
        });
    }
    let (r, t) = (bs.reflectance, bs.transmittance);
    let k = (r * r + t * t) / (2.0 * r * t);
    Ok((1.5 * g2 + k - k * a0_ratio) / (1.0 - e * e))
}

/// Central-to-side ratio expressed relative to the level of fully
/// distinguishable photons, `A0 / (<Ai> (R^2 + T^2))`. For the pairwise
/// splitter model this is the argument for which [`hom_corrected`] returns
/// the input overlap when g2 = 0.
pub fn distinguishable_normalized_ratio(areas: &PeakAreas, bs: &BeamsplitterModel) -> Result<f64> {
    bs.validate()?;
    let (r, t) = (bs.reflectance, bs.transmittance);
    Ok(areas.ratio()? / (r * r + t * t))
}
