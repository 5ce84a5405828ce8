//! Rollover removal and re-wrapping of circular angles.

/// Removes ±360° rollovers: whenever the step from the last output value exceeds
/// 180° in magnitude, the rest of the series is shifted by the multiple of 360°
/// that brings the step into (-180, 180].
pub fn unwrap_angles(series: &[f64]) -> Vec<f64> {
    let mut out = Vec::with_capacity(series.len());
    let mut offset = 0.0;
    for &x in series {
        let Some(&prev) = out.last() else {
            out.push(x);
            continue;
        };
        let step = x + offset - prev;
        if step.abs() > 180.0 {
            let turns = ((step - 180.0) / 360.0).ceil();
            offset -= 360.0 * turns;
        }
        out.push(x + offset);
    }
    out
}

/// Maps an angle into [-180, 180).
pub fn wrap_angle(x: f64) -> f64 {
    let mut w = x - 360.0 * ((x + 180.0) / 360.0).floor();
    if w >= 180.0 {
        w -= 360.0;
    } else if w < -180.0 {
        w += 360.0;
    }
    w
}

pub fn wrap_angles(series: &[f64]) -> Vec<f64> {
    series.iter().map(|&x| wrap_angle(x)).collect()
}
