// Float helpers that `core` does not provide.

/// `base^exp` by repeated squaring; exact for the small integer exponents
/// that evaluation counts produce.
pub(crate) fn powu(base: f64, mut exp: u32) -> f64 {
    let mut acc = 1.0;
    let mut b = base;
    while exp > 0 {
        if exp & 1 == 1 {
            acc *= b;
        }
        b *= b;
        exp >>= 1;
    }
    acc
}

/// Neumaier-compensated sum, used where normalizers must be stable.
pub(crate) fn sum(values: impl IntoIterator<Item = f64>) -> f64 {
    let mut s = 0.0f64;
    let mut c = 0.0f64;
    for v in values {
        let t = s + v;
        if s.abs() >= v.abs() {
            c += (s - t) + v;
        } else {
            c += (v - t) + s;
        }
        s = t;
    }
    s + c
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn powu_matches_repeated_product() {
        assert_eq!(powu(0.2, 0), 1.0);
        assert_eq!(powu(0.0, 0), 1.0);
        assert_eq!(powu(0.5, 3), 0.125);
        let mut p = 1.0;
        for _ in 0..13 {
            p *= 0.8;
        }
        assert!((powu(0.8, 13) - p).abs() < 1e-15);
    }

    #[test]
    fn compensated_sum() {
        assert_eq!(sum([0.1, 0.2, 0.3, 0.4]), 1.0);
        assert_eq!(sum(core::iter::empty()), 0.0);
    }
}
