use serde::{Deserialize, Serialize};

/// Orthogonal wavelet families shipped with the library.
///
/// Haar and db2 coefficients are computed from their closed forms; db4 uses
/// the standard Daubechies D8 tabulation (normalized so the low-pass sums
/// to sqrt(2)).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum WaveletFamily {
    Haar,
    Db2,
    Db4,
}

impl WaveletFamily {
    pub fn name(&self) -> &'static str {
        match self {
            WaveletFamily::Haar => "haar",
            WaveletFamily::Db2 => "db2",
            WaveletFamily::Db4 => "db4",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "haar" => Some(WaveletFamily::Haar),
            "db2" => Some(WaveletFamily::Db2),
            "db4" => Some(WaveletFamily::Db4),
            _ => None,
        }
    }

    pub fn filter(&self) -> WaveletFilter {
        WaveletFilter::for_family(*self)
    }
}

/// Analysis filter pair for an orthogonal wavelet.
///
/// The high-pass filter is derived from the low-pass one via the
/// quadrature-mirror relation `g[k] = (-1)^k h[L-1-k]`.
#[derive(Debug, Clone)]
pub struct WaveletFilter {
    pub family: WaveletFamily,
    pub lowpass: Vec<f64>,
    pub highpass: Vec<f64>,
}

impl WaveletFilter {
    fn for_family(family: WaveletFamily) -> Self {
        let lowpass = match family {
            WaveletFamily::Haar => {
                let c = 1.0 / 2f64.sqrt();
                vec![c, c]
            }
            WaveletFamily::Db2 => {
                let s3 = 3f64.sqrt();
                let d = 4.0 * 2f64.sqrt();
                vec![(1.0 + s3) / d, (3.0 + s3) / d, (3.0 - s3) / d, (1.0 - s3) / d]
            }
            WaveletFamily::Db4 => vec![
                0.230_377_813_308_855_23,
                0.714_846_570_552_541_5,
                0.630_880_767_929_590_4,
                -0.027_983_769_416_983_85,
                -0.187_034_811_718_881_14,
                0.030_841_381_835_986_965,
                0.032_883_011_666_982_945,
                -0.010_597_401_784_997_278,
            ],
        };
        let len = lowpass.len();
        let highpass: Vec<f64> = (0..len)
            .map(|k| {
                let sign = if k % 2 == 0 { 1.0 } else { -1.0 };
                sign * lowpass[len - 1 - k]
            })
            .collect();
        let filter = WaveletFilter { family, lowpass, highpass };
        filter.assert_invariants();
        filter
    }

    pub fn len(&self) -> usize {
        self.lowpass.len()
    }

    pub fn is_empty(&self) -> bool {
        self.lowpass.is_empty()
    }

    // Sum(h) = sqrt(2), Sum(g) = 0, and shift-2 orthonormality
    // Sum_k h[k] h[k+2m] = delta_{m,0}. Violations mean a mistyped table.
    fn assert_invariants(&self) {
        let tol = 1e-10;
        let sum_h: f64 = self.lowpass.iter().sum();
        assert!(
            (sum_h - 2f64.sqrt()).abs() < tol,
            "{}: lowpass sum {} != sqrt(2)",
            self.family.name(),
            sum_h
        );
        let sum_g: f64 = self.highpass.iter().sum();
        assert!((sum_g).abs() < tol, "{}: highpass sum {} != 0", self.family.name(), sum_g);
        let l = self.len();
        for m in 0..l / 2 {
            let mut acc = 0.0;
            for k in 0..l - 2 * m {
                acc += self.lowpass[k] * self.lowpass[k + 2 * m];
            }
            let expect = if m == 0 { 1.0 } else { 0.0 };
            assert!(
                (acc - expect).abs() < tol,
                "{}: shift-{} autocorrelation {} != {}",
                self.family.name(),
                2 * m,
                acc,
                expect
            );
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn shipped_families_satisfy_filter_invariants() {
        // Construction panics on violation, so instantiating is the test.
        for family in [WaveletFamily::Haar, WaveletFamily::Db2, WaveletFamily::Db4] {
            let f = family.filter();
            assert_eq!(f.lowpass.len(), f.highpass.len());
        }
    }

    #[test]
    fn highpass_orthogonal_to_lowpass() {
        for family in [WaveletFamily::Haar, WaveletFamily::Db2, WaveletFamily::Db4] {
            let f = family.filter();
            let l = f.len();
            for m in 0..l / 2 {
                let mut acc = 0.0;
                for k in 0..l - 2 * m {
                    acc += f.lowpass[k] * f.highpass[k + 2 * m];
                }
                assert!(acc.abs() < 1e-10, "{} cross-correlation at shift {}", family.name(), m);
            }
        }
    }

    #[test]
    fn family_names_roundtrip() {
        for family in [WaveletFamily::Haar, WaveletFamily::Db2, WaveletFamily::Db4] {
            assert_eq!(WaveletFamily::parse(family.name()), Some(family));
        }
        assert_eq!(WaveletFamily::parse("sym5"), None);
    }
}
