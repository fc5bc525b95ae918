use serde::Serialize;

/// Two-sided 95% normal quantile.
pub const Z95: f64 = 1.959_963_984_540_054;

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct Proportion {
    pub count: u64,
    pub n: u64,
    pub estimate: f64,
    pub ci_low: f64,
    pub ci_high: f64,
}

/// Wilson score interval at 95%.
pub fn wilson(count: u64, n: u64) -> Proportion {
    if n == 0 {
        return Proportion {
            count,
            n,
            estimate: f64::NAN,
            ci_low: 0.0,
            ci_high: 1.0,
        };
    }
    let (k, n_f) = (count as f64, n as f64);
    let phat = k / n_f;
    let z2 = Z95 * Z95;
    let denom = 1.0 + z2 / n_f;
    let centre = (phat + z2 / (2.0 * n_f)) / denom;
    let half = Z95 * (phat * (1.0 - phat) / n_f + z2 / (4.0 * n_f * n_f)).sqrt() / denom;
    Proportion {
        count,
        n,
        estimate: phat,
        ci_low: (centre - half).max(0.0),
        ci_high: (centre + half).min(1.0),
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct TailPoint {
    pub threshold: f64,
    #[serde(flatten)]
    pub proportion: Proportion,
}

/// `P̂(value ≥ threshold)` with `NaN` values counted as below every threshold.
pub fn tail_curve(values: &[f64], thresholds: &[f64]) -> Vec<TailPoint> {
    thresholds
        .iter()
        .map(|&threshold| TailPoint {
            threshold,
            proportion: wilson(values.iter().filter(|&&v| v >= threshold).count() as u64, values.len() as u64),
        })
        .collect()
}

/// Strict exceedance `P̂(value > threshold)`.
pub fn exceedance(values: &[f64], threshold: f64) -> Proportion {
    wilson(values.iter().filter(|&&v| v > threshold).count() as u64, values.len() as u64)
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct Quantile {
    pub q: f64,
    pub value: f64,
    pub ci_low: f64,
    pub ci_high: f64,
    pub n: usize,
}

/// Linear-interpolation quantile of finite-or-infinite values, `NaN` dropped,
/// with order-statistic bounds from the normal approximation to the binomial.
pub fn quantile(values: &[f64], q: f64) -> Quantile {
    let mut v: Vec<f64> = values.iter().copied().filter(|x| !x.is_nan()).collect();
    v.sort_by(f64::total_cmp);
    let n = v.len();
    if n == 0 {
        return Quantile {
            q,
            value: f64::NAN,
            ci_low: f64::NAN,
            ci_high: f64::NAN,
            n,
        };
    }
    let h = (n - 1) as f64 * q;
    let (lo, hi) = (h.floor() as usize, h.ceil() as usize);
    let value = if lo == hi || v[lo] == v[hi] {
        v[lo]
    } else {
        v[lo] + (h - lo as f64) * (v[hi] - v[lo])
    };
    let nf = n as f64;
    let spread = Z95 * (nf * q * (1.0 - q)).sqrt();
    let rank_lo = ((nf * q - spread).floor() as i64 - 1).clamp(0, n as i64 - 1) as usize;
    let rank_hi = ((nf * q + spread).ceil() as i64).clamp(0, n as i64 - 1) as usize;
    Quantile {
        q,
        value,
        ci_low: v[rank_lo],
        ci_high: v[rank_hi],
        n,
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct Mean {
    pub mean: f64,
    pub std_error: f64,
    pub ci_low: f64,
    pub ci_high: f64,
    pub n: usize,
}

pub fn mean(values: &[f64]) -> Mean {
    let n = values.len();
    if n == 0 {
        return Mean {
            mean: f64::NAN,
            std_error: f64::NAN,
            ci_low: f64::NAN,
            ci_high: f64::NAN,
            n,
        };
    }
    let m = values.iter().sum::<f64>() / n as f64;
    let var = if n > 1 {
        values.iter().map(|x| (x - m) * (x - m)).sum::<f64>() / (n - 1) as f64
    } else {
        0.0
    };
    let se = (var / n as f64).sqrt();
    Mean {
        mean: m,
        std_error: se,
        ci_low: m - Z95 * se,
        ci_high: m + Z95 * se,
        n,
    }
}

/// Compares the first and second halves of a sample sequence.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct Stationarity {
    pub first_half_mean: f64,
    pub second_half_mean: f64,
    pub z: f64,
    pub flagged: bool,
}

pub fn stationarity(values: &[f64]) -> Stationarity {
    let half = values.len() / 2;
    let (a, b) = (mean(&values[..half]), mean(&values[half..]));
    let se = (a.std_error.powi(2) + b.std_error.powi(2)).sqrt();
    let diff = a.mean - b.mean;
    let z = if values.len() < 4 {
        f64::NAN
    } else if se > 0.0 {
        diff / se
    } else if diff == 0.0 {
        0.0
    } else {
        f64::INFINITY
    };
    Stationarity {
        first_half_mean: a.mean,
        second_half_mean: b.mean,
        z,
        flagged: z.abs() > 3.0,
    }
}

/// `y ≈ a + b x` by least squares, then lifted by the largest positive
/// residual so every point lies on or below the envelope.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Envelope {
    pub a: f64,
    pub b: f64,
    /// Added to the fitted intercept.
    pub lift: f64,
    /// `envelope(x_i) − y_i`, all non-negative by construction.
    pub margins: Vec<f64>,
}

impl Envelope {
    pub fn at(&self, x: f64) -> f64 {
        self.a + self.lift + self.b * x
    }
}

pub fn fit_envelope(xs: &[f64], ys: &[f64]) -> Envelope {
    assert_eq!(xs.len(), ys.len());
    let n = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let sxx: f64 = xs.iter().map(|x| (x - mx) * (x - mx)).sum();
    let sxy: f64 = xs.iter().zip(ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let b = if sxx > 0.0 { sxy / sxx } else { 0.0 };
    let a = my - b * mx;
    let lift = xs
        .iter()
        .zip(ys)
        .map(|(x, y)| y - (a + b * x))
        .fold(0.0f64, f64::max);
    let mut env = Envelope {
        a,
        b,
        lift,
        margins: Vec::new(),
    };
    env.margins = xs.iter().zip(ys).map(|(&x, y)| env.at(x) - y).collect();
    env
}
