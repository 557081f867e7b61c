//! Random regression datasets with a known, withheld coefficient vector.
//!
//! Each independent variable `j` gets a centre `x̄_j ~ U[−V, V]` and a spread
//! `Z_j ~ U[0, V]`; samples are `x_ij = x̄_j + Z_j·r·N(0,1)`. The response is
//! `y_i = β₀ + Σ x_ij β_j + Z_y·r·N(0,1)`. Values outside `[−V, V]` are redrawn,
//! never clipped. Normal deviates come from the ziggurat sampler of
//! `rand_distr` driven by ChaCha8, so a seed pins the dataset across builds.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::dataset::Dataset;
use crate::error::{Error, Result};

const MAX_REDRAWS: usize = 10_000;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GenSpec {
    /// Inclusive range for `d`.
    pub d_range: (usize, usize),
    /// Inclusive range for `n`; `n >= d + 2` is enforced on top.
    pub n_range: (usize, usize),
    pub value_bound: f64,
    /// Noise ratio `r` applied to the response.
    pub snr: f64,
    /// Spread ratio for the independent variables; `None` reuses `snr`.
    /// Needed for noise-free responses (`snr = 0`) with non-degenerate `x`.
    pub x_snr: Option<f64>,
    pub seed: u64,
}

impl Default for GenSpec {
    fn default() -> Self {
        Self { d_range: (2, 16), n_range: (20, 200), value_bound: 100.0, snr: 0.1, x_snr: None, seed: 0 }
    }
}

impl GenSpec {
    pub fn with_seed(seed: u64) -> Self {
        Self { seed, ..Self::default() }
    }

    fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::InfeasibleSpec(m));
        let (dl, dh) = self.d_range;
        let (nl, nh) = self.n_range;
        if dl == 0 || dl > dh {
            return bad(format!("d_range {dl}..={dh}"));
        }
        if nl > nh {
            return bad(format!("n_range {nl}..={nh}"));
        }
        if nh < dl + 2 {
            return bad(format!("n <= {nh} cannot satisfy n >= d + 2 for d >= {dl}"));
        }
        if !(self.value_bound > 0.0 && self.value_bound.is_finite()) {
            return bad(format!("value_bound {}", self.value_bound));
        }
        if !(0.0..=1.0).contains(&self.snr) {
            return bad(format!("snr {} outside [0, 1]", self.snr));
        }
        match self.x_snr {
            Some(r) if !(r > 0.0 && r <= 1.0) => bad(format!("x_snr {r} outside (0, 1]")),
            None if self.snr == 0.0 => bad("snr = 0 needs an explicit x_snr".into()),
            _ => Ok(()),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GeneratedDataset {
    pub ds: Dataset,
    /// `(β₀, β₁, ..., β_d)`.
    pub true_beta: Vec<f64>,
    /// `Z_1..Z_d` followed by `Z_y`.
    pub z_ranges: Vec<f64>,
}

/// Standard normal deviates from a seeded stream.
#[derive(Debug, Clone)]
pub struct NormalSource {
    rng: ChaCha8Rng,
}

impl NormalSource {
    pub fn new(seed: u64) -> Self {
        Self { rng: ChaCha8Rng::seed_from_u64(seed) }
    }

    pub fn nrand(&mut self) -> f64 {
        self.rng.sample(StandardNormal)
    }

    fn uniform(&mut self, lo: f64, hi: f64) -> f64 {
        if lo < hi {
            self.rng.random_range(lo..=hi)
        } else {
            lo
        }
    }

    fn int(&mut self, lo: usize, hi: usize) -> usize {
        self.rng.random_range(lo..=hi)
    }

    /// `centre + spread·N(0,1)`, redrawn until it lies in `[−bound, bound]`.
    fn bounded(&mut self, centre: f64, spread: f64, bound: f64) -> Result<f64> {
        for _ in 0..MAX_REDRAWS {
            let v = centre + spread * self.nrand();
            if v.abs() <= bound {
                return Ok(v);
            }
        }
        Err(Error::InfeasibleSpec(format!("cannot draw within ±{bound} around {centre}")))
    }
}

/// Mixes a base seed with a stream id and index (SplitMix64 finaliser), so
/// sub-streams are independent and stable.
pub fn derive_seed(base: u64, stream: u64, index: u64) -> u64 {
    let mut z = base ^ stream.wrapping_mul(0x9E37_79B9_7F4A_7C15) ^ index.wrapping_mul(0xD1B5_4A32_D192_ED03);
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Draws one dataset; the same spec always yields the same dataset.
pub fn generate(spec: &GenSpec) -> Result<GeneratedDataset> {
    spec.validate()?;
    let mut src = NormalSource::new(spec.seed);
    let v = spec.value_bound;
    let rx = spec.x_snr.unwrap_or(spec.snr);

    let d_hi = spec.d_range.1.min(spec.n_range.1 - 2);
    let d = src.int(spec.d_range.0, d_hi);
    let n = src.int(spec.n_range.0.max(d + 2), spec.n_range.1);

    let mut z_ranges = Vec::with_capacity(d + 1);
    let mut x = vec![0.0; n * d];
    for j in 0..d {
        let centre = src.uniform(-v, v);
        let z = src.uniform(0.0, v);
        z_ranges.push(z);
        for i in 0..n {
            x[i * d + j] = src.bounded(centre, z * rx, v)?;
        }
    }

    // Slopes are scaled so the signal stays within ±V/2 and the intercept
    // within ±V/2, leaving room for the noise.
    let raw: Vec<f64> = (0..d).map(|_| src.uniform(-1.0, 1.0)).collect();
    let peak = (0..n).map(|i| x[i * d..(i + 1) * d].iter().zip(&raw).map(|(a, b)| a * b).sum::<f64>().abs()).fold(0.0, f64::max);
    let scale = if peak > 0.0 { (v / 2.0 / peak).min(v) } else { 1.0 };
    let beta0 = src.uniform(-v / 2.0, v / 2.0);
    let mut true_beta = Vec::with_capacity(d + 1);
    true_beta.push(beta0);
    true_beta.extend(raw.iter().map(|u| u * scale));

    let zy = src.uniform(0.0, v);
    z_ranges.push(zy);
    let mut y = Vec::with_capacity(n);
    for i in 0..n {
        let signal = beta0 + x[i * d..(i + 1) * d].iter().zip(&true_beta[1..]).map(|(a, b)| a * b).sum::<f64>();
        y.push(src.bounded(signal, zy * spec.snr, v)?);
    }

    Ok(GeneratedDataset { ds: Dataset::new(n, d, x, y, true)?, true_beta, z_ranges })
}

/// Sequential generator: dataset `i` uses `derive_seed(spec.seed, 0, i)`.
#[derive(Debug, Clone)]
pub struct Generator {
    spec: GenSpec,
    index: u64,
}

impl Generator {
    pub fn new(spec: GenSpec) -> Self {
        Self { spec, index: 0 }
    }

    pub fn dataset_at(spec: &GenSpec, index: u64) -> Result<GeneratedDataset> {
        generate(&GenSpec { seed: derive_seed(spec.seed, 0, index), ..spec.clone() })
    }
}

impl Iterator for Generator {
    type Item = Result<GeneratedDataset>;

    fn next(&mut self) -> Option<Self::Item> {
        let out = Self::dataset_at(&self.spec, self.index);
        self.index += 1;
        Some(out)
    }
}
