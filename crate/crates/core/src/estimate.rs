//! Entropy estimates from simulated symbol sequences: distinct block counts,
//! growth curves and log-linear fits.

use std::collections::{BTreeSet, HashMap};
use std::hash::{BuildHasherDefault, Hasher};

use serde::Serialize;

use crate::cones::TrappingReport;
use crate::dynamics::{Simulator, WallPoint};
use crate::error::{Error, Result};
use crate::netspec::{BoxLabel, NetworkSpec};

/// Transitions discarded before counting.
pub const BURN_IN: usize = 1000;

const MERSENNE_61: u64 = (1 << 61) - 1;
const BASES: [u64; 2] = [0x1f3a_5c7e_9b2d_4e61 % MERSENNE_61, 0x0d6b_2f81_c4a3_97e5 % MERSENNE_61];

fn mul_mod(a: u64, b: u64) -> u64 {
    let p = u128::from(a) * u128::from(b);
    let r = (p & u128::from(MERSENNE_61)) as u64 + (p >> 61) as u64;
    if r >= MERSENNE_61 {
        r - MERSENNE_61
    } else {
        r
    }
}

fn add_mod(a: u64, b: u64) -> u64 {
    let r = a + b;
    if r >= MERSENNE_61 {
        r - MERSENNE_61
    } else {
        r
    }
}

fn sub_mod(a: u64, b: u64) -> u64 {
    if a >= b {
        a - b
    } else {
        a + MERSENNE_61 - b
    }
}

fn pow_mod(mut base: u64, mut e: usize) -> u64 {
    let mut acc = 1;
    while e > 0 {
        if e & 1 == 1 {
            acc = mul_mod(acc, base);
        }
        base = mul_mod(base, base);
        e >>= 1;
    }
    acc
}

/// The keys are already well-mixed polynomial hashes.
#[derive(Default)]
struct PassThrough(u64);

impl Hasher for PassThrough {
    fn finish(&self) -> u64 {
        self.0
    }

    fn write(&mut self, bytes: &[u8]) {
        for &b in bytes {
            self.0 = self.0.rotate_left(8) ^ u64::from(b);
        }
    }

    fn write_u128(&mut self, v: u128) {
        self.0 = (v as u64) ^ ((v >> 64) as u64).rotate_left(32);
    }
}

type Buckets = HashMap<u128, Vec<u32>, BuildHasherDefault<PassThrough>>;

/// Exact count of distinct length-`n` windows in a stream.
///
/// Windows are keyed by a pair of rolling polynomial hashes; every distinct
/// window's content is stored once and compared on hash matches, so
/// collisions cannot merge different windows.
#[derive(Clone, Debug)]
pub struct BlockCounter {
    n: usize,
    ring: Vec<u32>,
    head: usize,
    seen: usize,
    hash: [u64; 2],
    lead: [u64; 2],
    buckets: Buckets,
    arena: Vec<u32>,
}

impl BlockCounter {
    pub fn new(n: usize) -> Self {
        assert!(n >= 1, "block length must be positive");
        Self {
            n,
            ring: vec![0; n],
            head: 0,
            seen: 0,
            hash: [0; 2],
            lead: [pow_mod(BASES[0], n - 1), pow_mod(BASES[1], n - 1)],
            buckets: Buckets::default(),
            arena: Vec::new(),
        }
    }

    pub fn block_len(&self) -> usize {
        self.n
    }

    /// Number of distinct windows fed so far.
    pub fn distinct(&self) -> usize {
        self.arena.len() / self.n
    }

    /// Symbols fed so far.
    pub fn fed(&self) -> usize {
        self.seen
    }

    pub fn push(&mut self, symbol: u32) {
        let s = u64::from(symbol) + 1;
        let old = u64::from(self.ring[self.head]) + 1;
        for (h, (&b, &lead)) in self.hash.iter_mut().zip(BASES.iter().zip(&self.lead)) {
            if self.seen >= self.n {
                *h = sub_mod(*h, mul_mod(old, lead));
            }
            *h = add_mod(mul_mod(*h, b), s);
        }
        self.ring[self.head] = symbol;
        self.head = (self.head + 1) % self.n;
        self.seen += 1;
        if self.seen >= self.n {
            let key = (u128::from(self.hash[0]) << 64) | u128::from(self.hash[1]);
            let (ring, head, n) = (&self.ring, self.head, self.n);
            let window = || ring[head..].iter().chain(&ring[..head]).copied();
            insert_window(&mut self.buckets, &mut self.arena, n, key, window);
        }
    }

    pub fn extend(&mut self, symbols: impl IntoIterator<Item = u32>) {
        for s in symbols {
            self.push(s);
        }
    }

    /// Adds every distinct window of `other` (same block length).
    pub fn merge(&mut self, other: &BlockCounter) {
        assert_eq!(self.n, other.n, "block lengths differ");
        for w in other.arena.chunks(other.n) {
            let key = window_key(w);
            insert_window(&mut self.buckets, &mut self.arena, self.n, key, || w.iter().copied());
        }
    }

    /// Distinct windows, each as a symbol slice.
    pub fn windows(&self) -> impl Iterator<Item = &[u32]> {
        self.arena.chunks(self.n)
    }
}

fn window_key(w: &[u32]) -> u128 {
    let mut h = [0u64; 2];
    for &s in w {
        for (hi, &b) in h.iter_mut().zip(&BASES) {
            *hi = add_mod(mul_mod(*hi, b), u64::from(s) + 1);
        }
    }
    (u128::from(h[0]) << 64) | u128::from(h[1])
}

fn insert_window<I: Iterator<Item = u32>>(
    buckets: &mut Buckets,
    arena: &mut Vec<u32>,
    n: usize,
    key: u128,
    window: impl Fn() -> I,
) {
    let bucket = buckets.entry(key).or_default();
    if bucket.iter().any(|&start| {
        let start = start as usize;
        arena[start..start + n].iter().copied().eq(window())
    }) {
        return;
    }
    bucket.push(u32::try_from(arena.len()).expect("block arena exceeds u32 offsets"));
    arena.extend(window());
}

/// Number of distinct length-`n` windows of `seq`.
pub fn count_blocks(seq: &[BoxLabel], n: usize) -> Result<usize> {
    if n == 0 || n > seq.len() {
        return Err(Error::BlockLength { n, len: seq.len() });
    }
    let mut c = BlockCounter::new(n);
    c.extend(seq.iter().map(|b| b.code()));
    Ok(c.distinct())
}

/// `(n, count)` for every `n` in `lengths`.
pub fn block_counts(seq: &[BoxLabel], lengths: impl IntoIterator<Item = usize>) -> Result<Vec<(usize, usize)>> {
    let lengths: Vec<usize> = lengths.into_iter().collect();
    if let Some(&n) = lengths.iter().find(|&&n| n == 0 || n > seq.len()) {
        return Err(Error::BlockLength { n, len: seq.len() });
    }
    let all = all_block_counts(seq, lengths.iter().copied().max().unwrap_or(0));
    Ok(lengths.into_iter().map(|n| (n, all[n - 1])).collect())
}

/// Largest dense interning table, in entries, before switching to a hash map.
const DENSE_TABLE_LIMIT: usize = 1 << 26;

/// Block counts for `n = 1..=n_max`.
///
/// Each length-`n` window gets an id from the pair (id of its length-`(n−1)`
/// prefix, last symbol), interned in a dense table; the count is the number
/// of ids. Exact, linear per length, and independent of [`BlockCounter`].
pub fn all_block_counts(seq: &[BoxLabel], n_max: usize) -> Vec<usize> {
    const NONE: u32 = u32::MAX;
    let n_max = n_max.min(seq.len());
    if n_max == 0 {
        return Vec::new();
    }
    let mut alphabet: Vec<u32> = seq.iter().map(|b| b.code()).collect();
    alphabet.sort_unstable();
    alphabet.dedup();
    let symbols: Vec<u32> =
        seq.iter().map(|b| alphabet.binary_search(&b.code()).expect("symbol present") as u32).collect();
    let width = alphabet.len();
    let mut ids = symbols.clone();
    let mut distinct = width;
    let mut counts = vec![distinct];
    let mut table: Vec<u32> = Vec::new();
    for n in 2..=n_max {
        let mut fresh = 0u32;
        if distinct * width <= DENSE_TABLE_LIMIT.max(seq.len()) {
            table.clear();
            table.resize(distinct * width, NONE);
            for t in 0..=seq.len() - n {
                let slot = &mut table[ids[t] as usize * width + symbols[t + n - 1] as usize];
                if *slot == NONE {
                    *slot = fresh;
                    fresh += 1;
                }
                ids[t] = *slot;
            }
        } else {
            let mut sparse: HashMap<(u32, u32), u32> = HashMap::new();
            for t in 0..=seq.len() - n {
                let id = *sparse.entry((ids[t], symbols[t + n - 1])).or_insert_with(|| {
                    fresh += 1;
                    fresh - 1
                });
                ids[t] = id;
            }
        }
        ids.truncate(seq.len() - n + 1);
        distinct = fresh as usize;
        counts.push(distinct);
    }
    counts
}

/// Distinct length-`n` blocks after each checkpoint (counted transitions,
/// after the burn-in). A terminal box ends the run; later checkpoints repeat
/// the final count.
pub fn growth_curve(
    spec: &NetworkSpec,
    start: &WallPoint,
    n: usize,
    checkpoints: &[usize],
    burn_in: usize,
) -> Result<Vec<(usize, usize)>> {
    if checkpoints.windows(2).any(|w| w[0] >= w[1]) {
        return Err(Error::InvalidArgument("checkpoints must be increasing".into()));
    }
    let sim = Simulator::new(spec);
    let (mut point, terminal) = sim.run(start, burn_in, |_| {})?;
    let mut counter = BlockCounter::new(n);
    let mut out = Vec::with_capacity(checkpoints.len());
    let mut done = 0;
    let mut stopped = terminal.is_some();
    for &cp in checkpoints {
        if !stopped && cp > done {
            let offset = burn_in + done;
            let (end, terminal) = sim
                .run(&point, cp - done, |b| counter.push(b.code()))
                .map_err(|e| shift_step(e, offset))?;
            point = end;
            stopped = terminal.is_some();
            done = cp;
        }
        out.push((cp, counter.distinct()));
    }
    Ok(out)
}

fn shift_step(e: Error, offset: usize) -> Error {
    match e {
        Error::CodimensionTwo { step } => Error::CodimensionTwo { step: step + offset },
        other => other,
    }
}

/// Least-squares line through `(n, log2 count)`.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct FitResult {
    pub slope: f64,
    pub intercept: f64,
    pub n_range: (usize, usize),
    /// Sum of squared residuals.
    pub residual: f64,
    pub points: usize,
}

/// Default fit range `[⌈0.15 n_max⌉, n_max]`.
pub fn default_fit_range(n_max: usize) -> (usize, usize) {
    (((n_max as f64) * 0.15).ceil().max(1.0) as usize, n_max)
}

pub fn fit_entropy(counts: &[(usize, usize)], n_range: (usize, usize)) -> Result<FitResult> {
    let pts: Vec<(f64, f64)> = counts
        .iter()
        .filter(|(n, _)| (n_range.0..=n_range.1).contains(n))
        .map(|&(n, c)| (n as f64, (c as f64).log2()))
        .collect();
    let distinct: BTreeSet<usize> =
        counts.iter().filter(|(n, _)| (n_range.0..=n_range.1).contains(n)).map(|(n, _)| *n).collect();
    if distinct.len() < 2
        || counts.iter().any(|&(n, c)| (n_range.0..=n_range.1).contains(&n) && c == 0)
    {
        return Err(Error::DegenerateFit);
    }
    let m = pts.len() as f64;
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / m;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / m;
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx) * (p.0 - mx)).sum();
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let residual = pts.iter().map(|p| (p.1 - intercept - slope * p.0).powi(2)).sum();
    Ok(FitResult { slope, intercept, n_range, residual, points: pts.len() })
}

/// Cycle labels (indices into `trap.cycles`) read off a box sequence.
///
/// The sequence is cut at every crossing of the starting edge; the partial
/// pieces before the first and after the last crossing are ignored.
pub fn cycle_sequence(seq: &[BoxLabel], trap: &TrappingReport) -> Result<Vec<usize>> {
    let (tail, head) = (trap.wall.from, trap.wall.to);
    let cuts: Vec<usize> =
        (1..seq.len()).filter(|&t| seq[t - 1] == tail && seq[t] == head).collect();
    let lookup: HashMap<&[BoxLabel], usize> =
        trap.cycles.iter().enumerate().map(|(i, c)| (c.boxes.as_slice(), i)).collect();
    cuts.windows(2)
        .map(|w| lookup.get(&seq[w[0]..w[1]]).copied().ok_or(Error::Segmentation { position: w[0] }))
        .collect()
}

/// All length-`k` windows of the cycle-label sequence.
pub fn observed_words(seq: &[BoxLabel], trap: &TrappingReport, k: usize) -> Result<BTreeSet<Vec<usize>>> {
    if k == 0 {
        return Err(Error::InvalidArgument("word length must be positive".into()));
    }
    let labels = cycle_sequence(seq, trap)?;
    Ok(labels.windows(k).map(<[usize]>::to_vec).collect())
}
