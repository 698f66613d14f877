//! Grid-quadrature oracle: normalized target densities, cumulative tables and
//! the Kolmogorov-Smirnov statistic, used to validate samplers independently
//! of the envelope machinery.

use garsamp::model::ObservationModel;
use garsamp::{Error, Result};

/// Trapezoid-rule normalization of `exp(-V)` on a finite grid, exposing the
/// density, the cumulative table and the grid minimum of the potential.
#[derive(Debug, Clone)]
pub struct GridOracle {
    xs: Vec<f64>,
    pdf: Vec<f64>,
    cdf: Vec<f64>,
    grid_min: f64,
    grid_argmin: f64,
}

impl GridOracle {
    /// Oracle for the model's full target `exp(-system_potential)` (prior
    /// included when present).
    pub fn from_model(
        model: &ObservationModel,
        lo: f64,
        hi: f64,
        resolution: usize,
    ) -> Result<Self> {
        Self::from_potential(
            |x| model.system_potential(x).unwrap_or(f64::INFINITY),
            lo,
            hi,
            resolution,
        )
    }

    /// Oracle for an arbitrary potential. Grid values of `+inf` are zero
    /// density; `NaN` or `-inf` are errors. The domain must cover essentially
    /// all of the mass: the endpoint densities are checked against the peak.
    pub fn from_potential(
        potential: impl Fn(f64) -> f64,
        lo: f64,
        hi: f64,
        resolution: usize,
    ) -> Result<Self> {
        if !(lo < hi) {
            return Err(Error::Parameter(format!("bad oracle domain [{lo}, {hi}]")));
        }
        let n = resolution.max(10_000);
        let step = (hi - lo) / (n - 1) as f64;
        let mut xs = Vec::with_capacity(n);
        let mut vals = Vec::with_capacity(n);
        let mut grid_min = f64::INFINITY;
        let mut grid_argmin = f64::NAN;
        for i in 0..n {
            let x = lo + step * i as f64;
            let v = potential(x);
            if v.is_nan() || v == f64::NEG_INFINITY {
                return Err(Error::Numeric(format!("potential is {v} at x = {x}")));
            }
            if v < grid_min {
                grid_min = v;
                grid_argmin = x;
            }
            xs.push(x);
            vals.push(v);
        }
        if !grid_min.is_finite() {
            return Err(Error::Numeric(
                "potential is infinite on the whole domain".into(),
            ));
        }
        // Stabilized unnormalized density.
        let unnorm: Vec<f64> = vals.iter().map(|v| (-(v - grid_min)).exp()).collect();
        let tail = unnorm[0].max(unnorm[n - 1]);
        if tail > 1e-9 {
            return Err(Error::Parameter(format!(
                "oracle domain truncates the target: endpoint density ratio {tail}"
            )));
        }
        let mut cdf = Vec::with_capacity(n);
        let mut acc = 0.0;
        cdf.push(0.0);
        for i in 1..n {
            acc += 0.5 * (unnorm[i - 1] + unnorm[i]) * step;
            cdf.push(acc);
        }
        let total = acc;
        if !(total > 0.0) {
            return Err(Error::Numeric("zero total mass on the oracle grid".into()));
        }
        let pdf: Vec<f64> = unnorm.iter().map(|u| u / total).collect();
        for c in &mut cdf {
            *c /= total;
        }
        cdf[n - 1] = 1.0;
        Ok(GridOracle {
            xs,
            pdf,
            cdf,
            grid_min,
            grid_argmin,
        })
    }

    pub fn domain(&self) -> (f64, f64) {
        (self.xs[0], self.xs[self.xs.len() - 1])
    }

    pub fn resolution(&self) -> usize {
        self.xs.len()
    }

    pub fn grid_min(&self) -> f64 {
        self.grid_min
    }

    pub fn grid_argmin(&self) -> f64 {
        self.grid_argmin
    }

    /// Normalized density by linear interpolation (zero outside the domain).
    pub fn pdf(&self, x: f64) -> f64 {
        match self.locate(x) {
            Some((i, t)) => self.pdf[i] * (1.0 - t) + self.pdf[i + 1] * t,
            None => 0.0,
        }
    }

    /// Cumulative distribution by linear interpolation.
    pub fn cdf(&self, x: f64) -> f64 {
        if x <= self.xs[0] {
            return 0.0;
        }
        if x >= self.xs[self.xs.len() - 1] {
            return 1.0;
        }
        let (i, t) = self.locate(x).expect("x inside the domain");
        self.cdf[i] * (1.0 - t) + self.cdf[i + 1] * t
    }

    /// Inverse CDF by bisection over the table; exact draws from the oracle
    /// density for self-consistency tests.
    pub fn inverse_cdf(&self, u: f64) -> f64 {
        let u = u.clamp(0.0, 1.0);
        let i = self
            .cdf
            .partition_point(|&c| c < u)
            .clamp(1, self.cdf.len() - 1);
        let (c0, c1) = (self.cdf[i - 1], self.cdf[i]);
        let t = if c1 > c0 { (u - c0) / (c1 - c0) } else { 0.5 };
        self.xs[i - 1] * (1.0 - t) + self.xs[i] * t
    }

    /// Number of strict local maxima of the density on the grid.
    pub fn local_maxima(&self) -> usize {
        let mut count = 0;
        let eps = 1e-12;
        let mut i = 1;
        while i + 1 < self.pdf.len() {
            if self.pdf[i] > self.pdf[i - 1] + eps {
                // Scan across any flat top.
                let mut j = i;
                while j + 1 < self.pdf.len() && (self.pdf[j + 1] - self.pdf[j]).abs() <= eps {
                    j += 1;
                }
                if j + 1 < self.pdf.len() && self.pdf[j + 1] < self.pdf[j] - eps {
                    count += 1;
                }
                i = j + 1;
            } else {
                i += 1;
            }
        }
        count
    }

    fn locate(&self, x: f64) -> Option<(usize, f64)> {
        let n = self.xs.len();
        if x < self.xs[0] || x > self.xs[n - 1] {
            return None;
        }
        let step = (self.xs[n - 1] - self.xs[0]) / (n - 1) as f64;
        let idx = (((x - self.xs[0]) / step) as usize).min(n - 2);
        let t = ((x - self.xs[idx]) / step).clamp(0.0, 1.0);
        Some((idx, t))
    }
}

/// Two-sided Kolmogorov-Smirnov statistic of samples against the oracle CDF.
pub fn ks_statistic(samples: &[f64], oracle: &GridOracle) -> f64 {
    assert!(
        samples.len() >= 100,
        "need at least 100 samples for a KS statistic"
    );
    let mut xs = samples.to_vec();
    xs.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let n = xs.len() as f64;
    let mut sup = 0.0_f64;
    for (i, &x) in xs.iter().enumerate() {
        let fx = oracle.cdf(x);
        sup = sup.max((fx - i as f64 / n).abs());
        sup = sup.max((fx - (i + 1) as f64 / n).abs());
    }
    sup
}
