/// Central 99% interval of Binomial(n, p) in hit counts, by summing the
/// pmf directly.
pub fn binomial_99(n: u64, p: f64) -> (u64, u64) {
    let mut pmf = (1.0 - p).powf(n as f64);
    let mut cdf = 0.0;
    let mut lo = None;
    for k in 0..=n {
        cdf += pmf;
        if lo.is_none() && cdf >= 0.005 {
            lo = Some(k);
        }
        if cdf >= 0.995 {
            return (lo.unwrap(), k);
        }
        pmf *= (n - k) as f64 / (k + 1) as f64 * p / (1.0 - p);
    }
    (lo.unwrap_or(0), n)
}
