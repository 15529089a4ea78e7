//! Reproducible Wiener increments on dyadic grids.
//!
//! A [`BrownianPath`] stores `2^levels` increments per channel over a horizon
//! `[a, b]`. Every increment is a deterministic function of
//! `(seed, level, interval index, channel)`: the level-0 increment over the
//! whole horizon is drawn first and each finer level is produced by Brownian
//! bridge midpoint insertion. Paths of different resolution built from the same
//! seed are therefore coupled, which is what strong-convergence studies need,
//! and refining a path never perturbs the increments it already holds.

use std::io::{self, Write};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::error::{Error, Result};

const DOMAIN_INCREMENT: u64 = 0x5356_495f_494e_4352; // "SVI_INCR"
const DOMAIN_PATH_SEED: u64 = 0x5356_495f_5041_5448; // "SVI_PATH"

/// A ChaCha8 generator keyed on a tuple of counters.
pub fn keyed_rng(seed: u64, domain: u64, a: u64, b: u64) -> ChaCha8Rng {
    let mut key = [0u8; 32];
    key[0..8].copy_from_slice(&seed.to_le_bytes());
    key[8..16].copy_from_slice(&domain.to_le_bytes());
    key[16..24].copy_from_slice(&a.to_le_bytes());
    key[24..32].copy_from_slice(&b.to_le_bytes());
    ChaCha8Rng::from_seed(key)
}

/// Seed of the `index`-th ensemble member drawn from a master seed.
pub fn derive_seed(master: u64, index: u64) -> u64 {
    keyed_rng(master, DOMAIN_PATH_SEED, index, 0).random()
}

fn standard_normal(seed: u64, level: u32, index: u64, channel: u32) -> f64 {
    let mut rng = keyed_rng(seed, DOMAIN_INCREMENT, ((level as u64) << 32) | channel as u64, index);
    rng.sample(StandardNormal)
}

#[derive(Clone, Debug, PartialEq)]
pub struct BrownianPath {
    seed: u64,
    start: f64,
    end: f64,
    levels: u32,
    channels: usize,
    /// channel-major: `increments[c * steps + k]`
    increments: Vec<f64>,
    /// `W(b) - W(a)` per channel
    endpoint: Vec<f64>,
}

/// Draw a path with `2^levels` increments per channel on `horizon`.
pub fn sample_path(seed: u64, horizon: (f64, f64), levels: u32, channels: usize) -> Result<BrownianPath> {
    BrownianPath::sample(seed, horizon, levels, channels)
}

/// Insert Brownian bridge midpoints into every interval of `path`.
pub fn refine(path: &BrownianPath) -> BrownianPath {
    path.refine()
}

impl BrownianPath {
    pub fn sample(seed: u64, horizon: (f64, f64), levels: u32, channels: usize) -> Result<Self> {
        let (a, b) = horizon;
        if !(b > a) || !a.is_finite() || !b.is_finite() {
            return Err(Error::invalid(
                "horizon",
                format!("[{a}, {b}] is not a proper interval"),
            ));
        }
        if channels == 0 {
            return Err(Error::invalid("channels", "at least one channel is required"));
        }
        if levels > 30 {
            return Err(Error::invalid("levels", "at most 30 dyadic levels are supported"));
        }
        let scale = (b - a).sqrt();
        let endpoint: Vec<f64> = (0..channels)
            .map(|c| scale * standard_normal(seed, 0, 0, c as u32))
            .collect();
        let mut path = BrownianPath {
            seed,
            start: a,
            end: b,
            levels: 0,
            channels,
            increments: endpoint.clone(),
            endpoint,
        };
        for _ in 0..levels {
            path = path.refine();
        }
        Ok(path)
    }

    /// Smallest dyadic path whose grid of step `h` holds at least `n_steps`
    /// increments, starting at time 0.
    pub fn covering(seed: u64, h: f64, n_steps: usize, channels: usize) -> Result<Self> {
        if !(h > 0.0) {
            return Err(Error::invalid("h", "step size must be positive"));
        }
        let levels = n_steps.max(1).next_power_of_two().trailing_zeros();
        Self::sample(seed, (0.0, h * (1u64 << levels) as f64), levels, channels)
    }

    pub fn refine(&self) -> BrownianPath {
        let steps = self.steps();
        let child_level = self.levels + 1;
        let parent_dt = self.step_size();
        let bridge_sd = (0.25 * parent_dt).sqrt();
        let mut increments = Vec::with_capacity(2 * self.increments.len());
        for c in 0..self.channels {
            for k in 0..steps {
                let parent = self.increments[c * steps + k];
                let z = standard_normal(self.seed, child_level, k as u64, c as u32);
                let left = 0.5 * parent + bridge_sd * z;
                increments.push(left);
                increments.push(parent - left);
            }
        }
        BrownianPath {
            increments,
            levels: child_level,
            endpoint: self.endpoint.clone(),
            ..*self
        }
    }

    /// Sum adjacent pairs, halving the resolution.
    pub fn coarsen(&self) -> Result<BrownianPath> {
        if self.levels == 0 {
            return Err(Error::invalid("levels", "a level-0 path cannot be coarsened"));
        }
        Ok(BrownianPath {
            increments: self.increments.chunks_exact(2).map(|p| p[0] + p[1]).collect(),
            levels: self.levels - 1,
            endpoint: self.endpoint.clone(),
            ..*self
        })
    }

    /// Restrict to a coarser dyadic level by summing increments.
    pub fn restrict(&self, level: u32) -> Result<BrownianPath> {
        if level > self.levels {
            return Err(Error::invalid(
                "level",
                format!("cannot restrict level {} path to finer level {level}", self.levels),
            ));
        }
        let mut out = self.clone();
        while out.levels > level {
            out = out.coarsen()?;
        }
        Ok(out)
    }

    pub fn increment(&self, k: usize, channel: usize) -> Result<f64> {
        let steps = self.steps();
        if k >= steps {
            return Err(Error::IndexOutOfRange {
                what: "step",
                index: k,
                limit: steps,
            });
        }
        if channel >= self.channels {
            return Err(Error::IndexOutOfRange {
                what: "channel",
                index: channel,
                limit: self.channels,
            });
        }
        Ok(self.increments[channel * steps + k])
    }

    /// All channel increments of step `k`, written into `out`.
    pub fn step_increments(&self, k: usize, out: &mut [f64]) -> Result<()> {
        let steps = self.steps();
        if k >= steps {
            return Err(Error::IndexOutOfRange {
                what: "step",
                index: k,
                limit: steps,
            });
        }
        for (c, slot) in out.iter_mut().enumerate().take(self.channels) {
            *slot = self.increments[c * steps + k];
        }
        Ok(())
    }

    pub fn channel(&self, channel: usize) -> &[f64] {
        let steps = self.steps();
        &self.increments[channel * steps..(channel + 1) * steps]
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn horizon(&self) -> (f64, f64) {
        (self.start, self.end)
    }

    pub fn levels(&self) -> u32 {
        self.levels
    }

    pub fn channels(&self) -> usize {
        self.channels
    }

    pub fn steps(&self) -> usize {
        1usize << self.levels
    }

    pub fn step_size(&self) -> f64 {
        (self.end - self.start) / self.steps() as f64
    }

    /// `W(b) - W(a)` for `channel`, as drawn at level 0.
    pub fn endpoint(&self, channel: usize) -> f64 {
        self.endpoint[channel]
    }

    /// Dump as CSV: a header line, then one `t,channel,increment` row per
    /// increment, `t` being the left end of the interval.
    pub fn write_csv<W: Write>(&self, mut w: W) -> io::Result<()> {
        writeln!(w, "t,channel,increment")?;
        let h = self.step_size();
        for c in 0..self.channels {
            for (k, dw) in self.channel(c).iter().enumerate() {
                writeln!(w, "{:.17e},{},{:.17e}", self.start + k as f64 * h, c, dw)?;
            }
        }
        Ok(())
    }
}

/// Order-sensitive digest of every increment a stepper consumed. Two runs fed
/// the same increments in the same order end with equal digests.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct NoiseAudit {
    digest: u64,
    consumed: u64,
}

impl Default for NoiseAudit {
    fn default() -> Self {
        NoiseAudit {
            digest: 0xcbf2_9ce4_8422_2325,
            consumed: 0,
        }
    }
}

impl NoiseAudit {
    pub fn record(&mut self, increments: &[f64]) {
        for dw in increments {
            for byte in dw.to_bits().to_le_bytes() {
                self.digest ^= byte as u64;
                self.digest = self.digest.wrapping_mul(0x0000_0100_0000_01b3);
            }
            self.consumed += 1;
        }
    }

    pub fn digest(&self) -> u64 {
        self.digest
    }

    pub fn consumed(&self) -> u64 {
        self.consumed
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn mean_var(xs: &[f64]) -> (f64, f64) {
        let n = xs.len() as f64;
        let mean = xs.iter().sum::<f64>() / n;
        let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0);
        (mean, var)
    }

    #[test]
    fn same_seed_same_path() {
        let a = sample_path(42, (0.0, 1.0), 6, 3).unwrap();
        let b = sample_path(42, (0.0, 1.0), 6, 3).unwrap();
        assert_eq!(a, b);
        let c = sample_path(43, (0.0, 1.0), 6, 3).unwrap();
        assert_ne!(a.channel(0), c.channel(0));
    }

    #[test]
    fn refine_then_coarsen_is_identity() {
        let p = sample_path(7, (0.0, 2.0), 4, 2).unwrap();
        let back = p.refine().coarsen().unwrap();
        for c in 0..2 {
            for (x, y) in p.channel(c).iter().zip(back.channel(c)) {
                assert!((x - y).abs() <= 1e-15, "{x} vs {y}");
            }
        }
    }

    #[test]
    fn refinement_matches_direct_sampling_at_every_level() {
        let base = sample_path(11, (0.0, 1.0), 2, 1).unwrap();
        let twice = refine(&refine(&refine(&base)));
        let direct = sample_path(11, (0.0, 1.0), 5, 1).unwrap();
        assert_eq!(twice, direct);
        // consistent parents on every level
        for level in (2..5).rev() {
            let parent = direct.restrict(level).unwrap();
            let child = direct.restrict(level + 1).unwrap();
            for (k, dw) in parent.channel(0).iter().enumerate() {
                let sum = child.channel(0)[2 * k] + child.channel(0)[2 * k + 1];
                assert!((sum - dw).abs() < 1e-15);
            }
        }
    }

    #[test]
    fn increments_sum_to_endpoint() {
        let p = sample_path(5, (0.0, 3.0), 8, 2).unwrap();
        for c in 0..2 {
            let s: f64 = p.channel(c).iter().sum();
            assert!((s - p.endpoint(c)).abs() < 1e-12);
        }
    }

    #[test]
    fn increment_bounds_checked() {
        let p = sample_path(5, (0.0, 1.0), 3, 2).unwrap();
        assert!(matches!(p.increment(8, 0), Err(Error::IndexOutOfRange { .. })));
        assert!(matches!(p.increment(0, 2), Err(Error::IndexOutOfRange { .. })));
        assert_ne!(p.increment(3, 0).unwrap(), p.increment(3, 1).unwrap());
    }

    #[test]
    fn level_zero_unit_horizon_has_unit_variance() {
        let xs: Vec<f64> = (0..10_000)
            .map(|s| sample_path(s, (0.0, 1.0), 0, 1).unwrap().increment(0, 0).unwrap())
            .collect();
        let (m, v) = mean_var(&xs);
        assert!(m.abs() <= 3.0 / 100.0, "mean {m}");
        assert!((v - 1.0).abs() < 0.05, "var {v}");
    }

    #[test]
    fn ensemble_moments_per_level() {
        let n = 10_000;
        for levels in [2u32, 4] {
            let h = 1.0 / (1u64 << levels) as f64;
            let xs: Vec<f64> = (0..n)
                .map(|s| {
                    sample_path(1000 + s, (0.0, 1.0), levels, 1)
                        .unwrap()
                        .increment(1, 0)
                        .unwrap()
                })
                .collect();
            let (m, v) = mean_var(&xs);
            assert!(m.abs() <= 3.0 * h.sqrt() / (n as f64).sqrt(), "mean {m}");
            assert!((v - h).abs() < 0.05 * h, "level {levels}: var {v} vs {h}");
        }
    }

    #[test]
    fn refined_children_have_half_variance() {
        let n = 10_000;
        let h = 0.5;
        let xs: Vec<f64> = (0..n)
            .map(|s| {
                let p = sample_path(77 + s, (0.0, 1.0), 1, 1).unwrap();
                p.refine().increment(2, 0).unwrap()
            })
            .collect();
        let (_, v) = mean_var(&xs);
        assert!((v - h / 2.0).abs() < 0.05 * h / 2.0, "var {v}");
    }

    #[test]
    fn channels_are_uncorrelated() {
        let n = 10_000;
        let pairs: Vec<(f64, f64)> = (0..n)
            .map(|s| {
                let p = sample_path(9 + s, (0.0, 1.0), 2, 2).unwrap();
                (p.increment(0, 0).unwrap(), p.increment(0, 1).unwrap())
            })
            .collect();
        let (xs, ys): (Vec<f64>, Vec<f64>) = pairs.into_iter().unzip();
        let (mx, vx) = mean_var(&xs);
        let (my, vy) = mean_var(&ys);
        let cov = xs.iter().zip(&ys).map(|(x, y)| (x - mx) * (y - my)).sum::<f64>() / (n as f64 - 1.0);
        let rho = cov / (vx * vy).sqrt();
        assert!(rho.abs() < 0.05, "rho {rho}");
    }

    #[test]
    fn covering_path_uses_requested_step() {
        let p = BrownianPath::covering(1, 0.1, 1000, 1).unwrap();
        assert_eq!(p.steps(), 1024);
        assert!((p.step_size() - 0.1).abs() < 1e-15);
    }

    #[test]
    fn csv_dump_has_one_row_per_increment() {
        let p = sample_path(3, (0.0, 1.0), 2, 2).unwrap();
        let mut buf = Vec::new();
        p.write_csv(&mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let lines: Vec<&str> = text.lines().collect();
        assert_eq!(lines[0], "t,channel,increment");
        assert_eq!(lines.len(), 1 + 8);
        let last: Vec<f64> = lines[8].split(',').map(|f| f.parse().unwrap()).collect();
        assert_eq!(last[0], 0.75);
        assert_eq!(last[1], 1.0);
        assert_eq!(last[2], p.increment(3, 1).unwrap());
    }

    #[test]
    fn audit_is_order_sensitive() {
        let mut a = NoiseAudit::default();
        let mut b = NoiseAudit::default();
        a.record(&[0.1, 0.2]);
        b.record(&[0.2, 0.1]);
        assert_ne!(a, b);
        let mut c = NoiseAudit::default();
        c.record(&[0.1]);
        c.record(&[0.2]);
        assert_eq!(a, c);
        assert_eq!(a.consumed(), 2);
    }
}
