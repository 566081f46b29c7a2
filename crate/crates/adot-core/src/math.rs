//! Small float helpers usable without `std`.

pub fn fabs(x: f64) -> f64 {
    if x < 0.0 {
        -x
    } else {
        x
    }
}

pub fn fmax(a: f64, b: f64) -> f64 {
    if a > b {
        a
    } else {
        b
    }
}

/// Quantize to integer multiples of `1/scale` (round half away from zero).
pub fn quantize(x: f64, scale: f64) -> i64 {
    let y = x * scale;
    if y >= 0.0 {
        (y + 0.5) as i64
    } else {
        -((-y + 0.5) as i64)
    }
}
