//! Float helpers that work without `std`.

pub(crate) fn exp(x: f64) -> f64 {
    libm::exp(x)
}

pub(crate) fn ln(x: f64) -> f64 {
    libm::log(x)
}

pub(crate) fn sqrt(x: f64) -> f64 {
    libm::sqrt(x)
}

pub(crate) fn abs(x: f64) -> f64 {
    libm::fabs(x)
}

/// Numerically stable `log(sum(exp(xs)))`.
pub(crate) fn log_sum_exp(xs: impl Iterator<Item = f64> + Clone) -> f64 {
    let max = xs.clone().fold(f64::NEG_INFINITY, f64::max);
    if !max.is_finite() {
        return max;
    }
    max + ln(xs.map(|x| exp(x - max)).sum::<f64>())
}

pub(crate) fn check_unit(name: &str, x: f64) -> crate::Result<()> {
    if !x.is_finite() || !(0.0..=1.0).contains(&x) {
        return Err(crate::Error::domain(alloc::format!(
            "{name} must be a finite value in [0, 1], got {x}"
        )));
    }
    Ok(())
}

pub(crate) fn check_non_negative(name: &str, x: f64) -> crate::Result<()> {
    if !x.is_finite() || x < 0.0 {
        return Err(crate::Error::domain(alloc::format!(
            "{name} must be finite and non-negative, got {x}"
        )));
    }
    Ok(())
}
