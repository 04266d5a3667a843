//! Deterministic random number generation.
//!
//! Every random draw in this workspace comes from the xoshiro256++ generator
//! below, seeded through [`mix_seed`]. The generator is fixed (no dependency
//! on platform or library versions) so that a run is reproducible from its
//! `(seed, purpose, stream id)` triple alone: two workers deriving the same
//! triple see the same stream, and re-running a job bit-reproduces it.
//!
//! Normal deviates use the Box-Muller transform rather than a library
//! sampler, again so the exact draw sequence is pinned by this file.

/// SplitMix64 step; used for seed expansion and for [`mix_seed`].
fn splitmix64(state: &mut u64) -> u64 {
    *state = state.wrapping_add(0x9E37_79B9_7F4A_7C15);
    let mut z = *state;
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Derives the seed for one named random stream.
///
/// `purpose` keeps unrelated uses (weight init, subsampling, shuffling...)
/// statistically independent; `id` separates parallel streams of the same
/// purpose (a partition index, an iteration counter, ...).
pub fn mix_seed(global_seed: u64, purpose: &str, id: u64) -> u64 {
    // FNV-1a over the purpose tag, then two splitmix64 scrambles folding in
    // the global seed and the stream id.
    let mut tag_hash: u64 = 0xcbf2_9ce4_8422_2325;
    for &b in purpose.as_bytes() {
        tag_hash ^= u64::from(b);
        tag_hash = tag_hash.wrapping_mul(0x0000_0100_0000_01B3);
    }
    let mut state = global_seed ^ tag_hash;
    let a = splitmix64(&mut state);
    state ^= id;
    a ^ splitmix64(&mut state)
}

/// xoshiro256++ with a Box-Muller normal sampler.
#[derive(Debug, Clone)]
pub struct Rng {
    s: [u64; 4],
    spare_normal: Option<f64>,
}

impl Rng {
    /// Creates a generator from a raw 64-bit seed (state via SplitMix64).
    pub fn from_seed(seed: u64) -> Self {
        let mut sm = seed;
        let mut s = [0u64; 4];
        for slot in &mut s {
            *slot = splitmix64(&mut sm);
        }
        // All-zero state would be a fixed point; SplitMix64 cannot emit four
        // consecutive zeros, but guard anyway.
        if s == [0, 0, 0, 0] {
            s[0] = 1;
        }
        Rng { s, spare_normal: None }
    }

    /// Creates the generator for a named stream; see [`mix_seed`].
    pub fn for_purpose(global_seed: u64, purpose: &str, id: u64) -> Self {
        Self::from_seed(mix_seed(global_seed, purpose, id))
    }

    pub fn next_u64(&mut self) -> u64 {
        let s = &mut self.s;
        let result = s[0].wrapping_add(s[3]).rotate_left(23).wrapping_add(s[0]);
        let t = s[1] << 17;
        s[2] ^= s[0];
        s[3] ^= s[1];
        s[1] ^= s[2];
        s[0] ^= s[3];
        s[2] ^= t;
        s[3] = s[3].rotate_left(45);
        result
    }

    /// Uniform in [0, 1) with 53 random bits.
    pub fn next_f64(&mut self) -> f64 {
        (self.next_u64() >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
    }

    /// Standard normal via Box-Muller; pairs of draws share one transform.
    pub fn normal(&mut self) -> f64 {
        if let Some(z) = self.spare_normal.take() {
            return z;
        }
        // u1 in (0, 1] so that ln(u1) is finite.
        let u1 = ((self.next_u64() >> 11) + 1) as f64 * (1.0 / (1u64 << 53) as f64);
        let u2 = self.next_f64();
        let r = (-2.0 * u1.ln()).sqrt();
        let theta = 2.0 * std::f64::consts::PI * u2;
        self.spare_normal = Some(r * theta.sin());
        r * theta.cos()
    }

    /// Uniform integer in [0, n) without modulo bias.
    pub fn gen_range(&mut self, n: usize) -> usize {
        assert!(n > 0, "gen_range(0)");
        let n = n as u64;
        let zone = u64::MAX - u64::MAX % n;
        loop {
            let v = self.next_u64();
            if v < zone {
                return (v % n) as usize;
            }
        }
    }

    /// In-place Fisher-Yates shuffle.
    pub fn shuffle<T>(&mut self, xs: &mut [T]) {
        for i in (1..xs.len()).rev() {
            let j = self.gen_range(i + 1);
            xs.swap(i, j);
        }
    }

    /// `k` distinct indices drawn uniformly from `0..n`, returned ascending.
    pub fn sample_indices(&mut self, n: usize, k: usize) -> Vec<usize> {
        assert!(k <= n, "cannot sample {k} of {n}");
        // Partial Fisher-Yates: after k swap steps the first k slots are a
        // uniform k-subset in uniform order; sorting keeps just the subset.
        let mut idx: Vec<usize> = (0..n).collect();
        for i in 0..k {
            let j = i + self.gen_range(n - i);
            idx.swap(i, j);
        }
        idx.truncate(k);
        idx.sort_unstable();
        idx
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn same_seed_same_stream() {
        let mut a = Rng::from_seed(42);
        let mut b = Rng::from_seed(42);
        for _ in 0..1000 {
            assert_eq!(a.next_u64(), b.next_u64());
        }
    }

    #[test]
    fn purposes_are_independent_streams() {
        let a = mix_seed(7, "init/sparse", 0);
        let b = mix_seed(7, "subsample", 0);
        let c = mix_seed(7, "init/sparse", 1);
        let d = mix_seed(8, "init/sparse", 0);
        assert_ne!(a, b);
        assert_ne!(a, c);
        assert_ne!(a, d);
    }

    #[test]
    fn uniform_is_in_unit_interval() {
        let mut r = Rng::from_seed(1);
        for _ in 0..10_000 {
            let x = r.next_f64();
            assert!((0.0..1.0).contains(&x));
        }
    }

    #[test]
    fn normal_moments_are_sane() {
        let mut r = Rng::from_seed(3);
        let n = 200_000;
        let (mut sum, mut sq) = (0.0, 0.0);
        for _ in 0..n {
            let z = r.normal();
            sum += z;
            sq += z * z;
        }
        let mean = sum / n as f64;
        let var = sq / n as f64 - mean * mean;
        assert!(mean.abs() < 0.01, "mean {mean}");
        assert!((var - 1.0).abs() < 0.02, "var {var}");
    }

    #[test]
    fn shuffle_is_a_permutation() {
        let mut r = Rng::from_seed(9);
        let mut xs: Vec<usize> = (0..100).collect();
        r.shuffle(&mut xs);
        let mut sorted = xs.clone();
        sorted.sort_unstable();
        assert_eq!(sorted, (0..100).collect::<Vec<_>>());
    }

    #[test]
    fn sample_indices_sorted_unique_in_range() {
        let mut r = Rng::from_seed(11);
        let s = r.sample_indices(500, 100);
        assert_eq!(s.len(), 100);
        for w in s.windows(2) {
            assert!(w[0] < w[1]);
        }
        assert!(*s.last().unwrap() < 500);
    }

    #[test]
    fn sampling_covers_uniformly() {
        // Each index should appear with frequency k/n over many draws.
        let mut counts = vec![0usize; 20];
        for rep in 0..2000 {
            let mut r = Rng::from_seed(1000 + rep);
            for i in r.sample_indices(20, 5) {
                counts[i] += 1;
            }
        }
        for &c in &counts {
            // Expectation 500 (= 2000 * 5/20); allow a generous band.
            assert!((350..650).contains(&c), "count {c}");
        }
    }
}
