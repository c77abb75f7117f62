use crate::error::{Error, Result};

/// Temperature-based rebalancing by downsampling only.
///
/// Target proportions are `q_c ∝ n_c^(1/T)`. The scale `N` is the largest
/// value for which no source would be upsampled, so the smallest source keeps
/// all of its examples. Each realized count is `round(q_c·N)` clamped into
/// `[ceil(n_c/cap), n_c]`.
pub fn temperature_sample(sizes: &[usize], temperature: f64, cap: f64) -> Result<Vec<usize>> {
    if !(temperature >= 1.0) || !(cap >= 1.0) {
        return Err(Error::Config(format!("need T >= 1 and cap >= 1, got T={temperature} cap={cap}")));
    }
    if sizes.iter().all(|&n| n == 0) {
        return Err(Error::Data("all source sizes are zero".into()));
    }
    let scaled: Vec<f64> = sizes.iter().map(|&n| (n as f64).powf(1.0 / temperature)).collect();
    let z: f64 = scaled.iter().sum();
    let n_total = sizes
        .iter()
        .zip(&scaled)
        .filter(|(&n, _)| n > 0)
        .map(|(&n, &s)| n as f64 / (s / z))
        .fold(f64::INFINITY, f64::min);
    Ok(sizes
        .iter()
        .zip(&scaled)
        .map(|(&n, &s)| {
            let floor = (n as f64 / cap).ceil() as usize;
            ((s / z * n_total).round() as usize).clamp(floor, n)
        })
        .collect())
}
