//! Prefix-free enumerative code for binary outcome records.
//!
//! A tape of `N` outcomes with `k` ones is written as two fixed-width fields:
//!
//! ```text
//! [ k : ceil(lg(N+1)) bits ][ rank : ceil(lg C(N,k)) bits ]
//! ```
//!
//! both most-significant bit first. `N` travels out of band in the
//! [`Codeword`], so for a fixed `N` the field widths are determined by the
//! prefix already read and the family is prefix-free.
//!
//! The rank is the index of the tape among all weight-`k` strings of length
//! `N`. Strings of length at most 128 are ranked lexicographically with `1`
//! ordered before `0`. Longer strings are split in half; the ordering is then
//! by the weight of the left half (classes visited outward from the most
//! populous weight), then the rank of the left half, then the rank of the
//! right half. This keeps every rank in `0..C(N,k)` while costing a few big
//! multiplications per level instead of one big-number update per bit.
//!
//! The payload length is an upper bound on the algorithmic information
//! content of the tape and is what the demon pays to erase it.

pub mod binomial;

use num_bigint::BigUint;
use num_integer::Integer;
use num_traits::{One, ToPrimitive, Zero};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use self::binomial::{binomial, ceil_lg, ceil_lg_u64, small, SMALL_N};

#[derive(Debug, Error, PartialEq, Eq)]
pub enum CodingError {
    #[error("corrupt codeword: {0}")]
    Corrupt(String),
    #[error("probability {0} outside the open interval (0, 1)")]
    ProbabilityOutOfRange(String),
    #[error("serialized codeword truncated: need {need} bytes, have {have}")]
    Truncated { need: usize, have: usize },
}

/// Binary record of demon outcomes (`true` = profitable).
#[derive(Debug, Clone, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
pub struct RecordTape {
    bits: Vec<bool>,
    ones: usize,
}

impl RecordTape {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn from_bits(bits: Vec<bool>) -> Self {
        let ones = bits.iter().filter(|&&b| b).count();
        Self { bits, ones }
    }

    /// Parses a string of `0`/`1` characters; anything else is ignored.
    pub fn from_str_bits(s: &str) -> Self {
        Self::from_bits(
            s.chars()
                .filter_map(|c| match c {
                    '0' => Some(false),
                    '1' => Some(true),
                    _ => None,
                })
                .collect(),
        )
    }

    pub fn push(&mut self, bit: bool) {
        self.ones += usize::from(bit);
        self.bits.push(bit);
    }

    pub fn bits(&self) -> &[bool] {
        &self.bits
    }

    pub fn len(&self) -> usize {
        self.bits.len()
    }

    pub fn is_empty(&self) -> bool {
        self.bits.is_empty()
    }

    /// Number of ones.
    pub fn weight(&self) -> usize {
        self.ones
    }

    pub fn clear(&mut self) {
        self.bits.clear();
        self.ones = 0;
    }

    /// Keeps the first `len` bits.
    pub fn truncate(&mut self, len: usize) {
        if len < self.bits.len() {
            self.ones -= self.bits[len..].iter().filter(|&&b| b).count();
            self.bits.truncate(len);
        }
    }
}

/// Encoded tape. `declared_n` is the tape length, known to the decoder.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Codeword {
    pub payload: Vec<bool>,
    pub declared_n: u64,
}

impl Codeword {
    pub fn len(&self) -> usize {
        self.payload.len()
    }

    pub fn is_empty(&self) -> bool {
        self.payload.is_empty()
    }

    /// File form: `declared_n` as little-endian `u64`, then the payload packed
    /// big-endian into bytes with the final byte zero-padded.
    pub fn to_bytes(&self) -> Vec<u8> {
        let mut out = Vec::with_capacity(8 + self.payload.len().div_ceil(8));
        out.extend_from_slice(&self.declared_n.to_le_bytes());
        out.extend(pack_bits(&self.payload));
        out
    }

    /// Inverse of [`Codeword::to_bytes`]. The payload length is recovered
    /// from the count field, so trailing padding is discarded.
    pub fn from_bytes(bytes: &[u8]) -> Result<Self, CodingError> {
        if bytes.len() < 8 {
            return Err(CodingError::Truncated {
                need: 8,
                have: bytes.len(),
            });
        }
        let declared_n = u64::from_le_bytes(bytes[..8].try_into().expect("8 bytes"));
        let body = unpack_bits(&bytes[8..]);
        let kw = ceil_lg_u64(declared_n + 1) as usize;
        if body.len() < kw {
            return Err(CodingError::Truncated {
                need: 8 + kw.div_ceil(8),
                have: bytes.len(),
            });
        }
        let k = bits_to_u64(&body[..kw]);
        if k > declared_n {
            return Err(CodingError::Corrupt(format!(
                "weight field {k} exceeds tape length {declared_n}"
            )));
        }
        let total = kw + ceil_lg(&binomial(declared_n, k)) as usize;
        if body.len() < total {
            return Err(CodingError::Truncated {
                need: 8 + total.div_ceil(8),
                have: bytes.len(),
            });
        }
        Ok(Self {
            payload: body[..total].to_vec(),
            declared_n,
        })
    }
}

pub fn pack_bits(bits: &[bool]) -> Vec<u8> {
    bits.chunks(8)
        .map(|chunk| {
            chunk
                .iter()
                .enumerate()
                .fold(0u8, |acc, (i, &b)| acc | (u8::from(b) << (7 - i)))
        })
        .collect()
}

pub fn unpack_bits(bytes: &[u8]) -> Vec<bool> {
    bytes
        .iter()
        .flat_map(|&byte| (0..8).map(move |i| (byte >> (7 - i)) & 1 == 1))
        .collect()
}

fn bits_to_u64(bits: &[bool]) -> u64 {
    bits.iter().fold(0, |acc, &b| (acc << 1) | u64::from(b))
}

fn push_uint(out: &mut Vec<bool>, value: &BigUint, width: u64) {
    debug_assert!(value.bits() <= width);
    let bits = unpack_bits(&value.to_bytes_be());
    let used = value.bits() as usize;
    out.extend(std::iter::repeat_n(false, width as usize - used));
    out.extend_from_slice(&bits[bits.len() - used..]);
}

fn bits_to_biguint(bits: &[bool]) -> BigUint {
    let bytes = pack_bits(bits);
    let v = BigUint::from_bytes_be(&bytes);
    let pad = bytes.len() * 8 - bits.len();
    v >> pad
}

// Exact products and ratio sums over runs of small rational factors.
struct RatioRun {
    num: BigUint,
    den: BigUint,
    // sum_{j=1..len} prod_{i<j} num_i/den_i == sum / den
    sum: BigUint,
}

fn ratio_run(ratios: &[(u64, u64)]) -> RatioRun {
    match ratios {
        [] => RatioRun {
            num: BigUint::one(),
            den: BigUint::one(),
            sum: BigUint::zero(),
        },
        [(a, b)] => RatioRun {
            num: BigUint::from(*a),
            den: BigUint::from(*b),
            sum: BigUint::from(*a),
        },
        _ => {
            let (l, r) = ratios.split_at(ratios.len() / 2);
            let left = ratio_run(l);
            let right = ratio_run(r);
            RatioRun {
                sum: &left.sum * &right.den + &left.num * &right.sum,
                num: left.num * right.num,
                den: left.den * right.den,
            }
        }
    }
}

fn ratio_product(ratios: &[(u64, u64)]) -> (BigUint, BigUint) {
    let nums = ratios.iter().map(|&(a, _)| BigUint::from(a)).collect();
    let dens = ratios.iter().map(|&(_, b)| BigUint::from(b)).collect();
    (binomial::product_tree(nums), binomial::product_tree(dens))
}

// Classes of left-half weight, ordered by distance from `center`, ties going
// to the heavier side first.
struct SplitShape {
    n1: u64,
    n2: u64,
    k: u64,
    lo: u64,
    hi: u64,
    center: u64,
}

impl SplitShape {
    fn new(n: u64, k: u64) -> Self {
        let n1 = n / 2;
        let n2 = n - n1;
        let lo = k.saturating_sub(n2);
        let hi = k.min(n1);
        let center = ((k * n1 + n / 2) / n).clamp(lo, hi);
        Self {
            n1,
            n2,
            k,
            lo,
            hi,
            center,
        }
    }

    // size(t + 1) / size(t), where size(t) = C(n1, t) C(n2, k - t)
    fn up(&self, t: u64) -> (u64, u64) {
        (
            (self.n1 - t) * (self.k - t),
            (t + 1) * (self.n2 + t + 1 - self.k),
        )
    }

    // size(t - 1) / size(t)
    fn down(&self, t: u64) -> (u64, u64) {
        (
            t * (self.n2 + t - self.k),
            (self.n1 - t + 1) * (self.k - t + 1),
        )
    }

    fn up_ratios(&self, steps: u64) -> Vec<(u64, u64)> {
        (0..steps).map(|i| self.up(self.center + i)).collect()
    }

    fn down_ratios(&self, steps: u64) -> Vec<(u64, u64)> {
        (0..steps).map(|i| self.down(self.center - i)).collect()
    }

    /// Size of class `t` given the size of the centre class.
    fn class_size(&self, centre: &BigUint, t: u64) -> BigUint {
        let c = self.center;
        let ratios = if t >= c {
            self.up_ratios(t - c)
        } else {
            self.down_ratios(c - t)
        };
        let (num, den) = ratio_product(&ratios);
        centre * num / den
    }

    /// Number of strings in classes ordered before `t`.
    fn offset(&self, centre: &BigUint, t: u64) -> BigUint {
        let c = self.center;
        if t == c {
            return BigUint::zero();
        }
        let d = t.abs_diff(c);
        let mut up_steps = (d - 1).min(self.hi - c);
        if t < c && c + d <= self.hi {
            up_steps = d;
        }
        let down_steps = (d - 1).min(c - self.lo);
        let up = ratio_run(&self.up_ratios(up_steps));
        let down = ratio_run(&self.down_ratios(down_steps));
        let scale = &up.den * &down.den;
        let numer = &scale + &up.sum * &down.den + &down.sum * &up.den;
        centre * numer / scale
    }

    /// Position of class `t` in the visiting order.
    fn order_index(&self, t: u64) -> u64 {
        let c = self.center;
        if t == c {
            return 0;
        }
        let d = t.abs_diff(c);
        let closer = (d - 1).min(self.hi - c) + (d - 1).min(c - self.lo);
        let mut idx = 1 + closer;
        if t < c && c + d <= self.hi {
            idx += 1;
        }
        idx
    }

    fn class_at(&self, index: u64) -> Option<u64> {
        let c = self.center;
        let (mut d, mut i) = (1u64, 1u64);
        if index == 0 {
            return Some(c);
        }
        loop {
            let has_up = c + d <= self.hi;
            let has_down = c >= self.lo + d;
            if !has_up && !has_down {
                return None;
            }
            if has_up {
                if i == index {
                    return Some(c + d);
                }
                i += 1;
            }
            if has_down {
                if i == index {
                    return Some(c - d);
                }
                i += 1;
            }
            d += 1;
        }
    }

    /// Finds the class containing `rank`; returns `(t, rank - offset(t))`.
    fn locate(&self, centre: &BigUint, rank: &BigUint) -> Option<(u64, BigUint)> {
        let c = self.center;
        // Float guess of the cumulative class boundaries, in units of the
        // centre class, then exact correction.
        let target = if rank.is_zero() {
            0.0
        } else {
            (binomial::lg(rank) - binomial::lg(centre)).exp2()
        };
        let mut guess = c;
        let mut cum = 1.0f64;
        if target >= cum {
            let (mut up, mut down) = (1.0f64, 1.0f64);
            let mut d = 1;
            'outer: loop {
                let mut any = false;
                for side in [true, false] {
                    let t = if side {
                        if c + d > self.hi {
                            continue;
                        }
                        let (a, b) = self.up(c + d - 1);
                        up *= a as f64 / b as f64;
                        cum += up;
                        c + d
                    } else {
                        if c < self.lo + d {
                            continue;
                        }
                        let (a, b) = self.down(c + 1 - d);
                        down *= a as f64 / b as f64;
                        cum += down;
                        c - d
                    };
                    any = true;
                    guess = t;
                    if target < cum {
                        break 'outer;
                    }
                }
                if !any {
                    break;
                }
                d += 1;
            }
        }
        let mut index = self.order_index(guess);
        loop {
            let t = self.class_at(index)?;
            let off = self.offset(centre, t);
            if *rank < off {
                index = index.checked_sub(1)?;
                continue;
            }
            let within = rank - &off;
            if within < self.class_size(centre, t) {
                return Some((t, within));
            }
            index += 1;
        }
    }
}

fn leaf_rank(bits: &[bool], mut r: usize) -> u128 {
    let n = bits.len();
    let mut rank = 0u128;
    for (i, &b) in bits.iter().enumerate() {
        if r == 0 {
            break;
        }
        let m = n - i;
        if b {
            r -= 1;
        } else {
            rank += small(m - 1, r - 1);
        }
    }
    rank
}

fn leaf_unrank(n: usize, mut r: usize, mut rank: u128, out: &mut Vec<bool>) {
    for i in 0..n {
        let m = n - i;
        if r == 0 {
            out.push(false);
            continue;
        }
        let c = small(m - 1, r - 1);
        if rank < c {
            out.push(true);
            r -= 1;
        } else {
            rank -= c;
            out.push(false);
        }
    }
}

// prefix[i] = ones in bits[..i]
fn rank_of(bits: &[bool], prefix: &[u32], start: usize) -> BigUint {
    let n = bits.len();
    let k = (prefix[start + n] - prefix[start]) as usize;
    if n <= SMALL_N {
        return BigUint::from(leaf_rank(bits, k));
    }
    let shape = SplitShape::new(n as u64, k as u64);
    let n1 = shape.n1 as usize;
    let k1 = u64::from(prefix[start + n1] - prefix[start]);
    let k2 = k as u64 - k1;
    let left = rank_of(&bits[..n1], prefix, start);
    let right = rank_of(&bits[n1..], prefix, start + n1);
    let right_count = binomial(shape.n2, k2);
    let c = shape.center;
    let centre = if k1 == c {
        &*binomial(shape.n1, c) * &*right_count
    } else {
        let other = binomial::shift(shape.n2, k2, shape.k - c, &right_count);
        &*binomial(shape.n1, c) * other
    };
    shape.offset(&centre, k1) + left * &*right_count + right
}

fn unrank_into(n: u64, k: u64, rank: BigUint, out: &mut Vec<bool>) -> Result<(), CodingError> {
    if n as usize <= SMALL_N {
        let r = rank
            .to_u128()
            .filter(|&r| r < small(n as usize, k as usize))
            .ok_or_else(|| CodingError::Corrupt("rank out of range".into()))?;
        leaf_unrank(n as usize, k as usize, r, out);
        return Ok(());
    }
    let shape = SplitShape::new(n, k);
    let c = shape.center;
    let centre_right = binomial(shape.n2, k - c);
    let centre = &*binomial(shape.n1, c) * &*centre_right;
    let (k1, within) = shape
        .locate(&centre, &rank)
        .ok_or_else(|| CodingError::Corrupt("rank out of range".into()))?;
    let right_count = if k1 == c {
        (*centre_right).clone()
    } else {
        binomial::shift(shape.n2, k - c, k - k1, &centre_right)
    };
    let (left, right) = within.div_rem(&right_count);
    unrank_into(shape.n1, k1, left, out)?;
    unrank_into(shape.n2, k - k1, right, out)
}

/// Index of `tape` among weight-`k` strings of its length.
pub fn rank(tape: &RecordTape) -> BigUint {
    let mut prefix = Vec::with_capacity(tape.len() + 1);
    prefix.push(0u32);
    let mut acc = 0u32;
    for &b in tape.bits() {
        acc += u32::from(b);
        prefix.push(acc);
    }
    rank_of(tape.bits(), &prefix, 0)
}

/// Inverse of [`rank`].
pub fn unrank(n: u64, k: u64, rank: BigUint) -> Result<RecordTape, CodingError> {
    if k > n {
        return Err(CodingError::Corrupt(format!("weight {k} exceeds length {n}")));
    }
    let mut out = Vec::with_capacity(n as usize);
    unrank_into(n, k, rank, &mut out)?;
    Ok(RecordTape::from_bits(out))
}

/// Width of the count field for a tape of length `n`.
pub fn count_field_width(n: u64) -> u64 {
    ceil_lg_u64(n + 1)
}

pub fn enumerative_encode(tape: &RecordTape) -> Codeword {
    let n = tape.len() as u64;
    let k = tape.weight() as u64;
    let rank_width = ceil_lg(&binomial(n, k));
    let kw = count_field_width(n);
    let mut payload = Vec::with_capacity((kw + rank_width) as usize);
    push_uint(&mut payload, &BigUint::from(k), kw);
    if rank_width > 0 {
        push_uint(&mut payload, &rank(tape), rank_width);
    }
    Codeword {
        payload,
        declared_n: n,
    }
}

pub fn enumerative_decode(code: &Codeword) -> Result<RecordTape, CodingError> {
    let n = code.declared_n;
    let kw = count_field_width(n) as usize;
    if code.payload.len() < kw {
        return Err(CodingError::Corrupt(format!(
            "payload of {} bits shorter than the {kw}-bit count field",
            code.payload.len()
        )));
    }
    let k = bits_to_u64(&code.payload[..kw]);
    if k > n {
        return Err(CodingError::Corrupt(format!(
            "weight field {k} exceeds tape length {n}"
        )));
    }
    let total = binomial(n, k);
    let rank_width = ceil_lg(&total) as usize;
    if code.payload.len() != kw + rank_width {
        return Err(CodingError::Corrupt(format!(
            "payload length {} does not match {} expected for N={n}, k={k}",
            code.payload.len(),
            kw + rank_width
        )));
    }
    let r = bits_to_biguint(&code.payload[kw..]);
    if r >= *total {
        return Err(CodingError::Corrupt(format!(
            "rank field is not below C({n},{k})"
        )));
    }
    unrank(n, k, r)
}

/// Computable upper bound on the algorithmic information content of `tape`,
/// in bits: the length of its enumerative codeword.
pub fn k_estimate(tape: &RecordTape) -> u64 {
    codeword_length(tape.len() as u64, tape.weight() as u64)
}

/// `ceil(lg(n+1)) + ceil(lg C(n,k))` without building the codeword.
pub fn codeword_length(n: u64, k: u64) -> u64 {
    count_field_width(n) + ceil_lg(&binomial(n, k))
}

/// Binary entropy `h(p)` in bits, with `h(0) = h(1) = 0`.
pub fn binary_entropy(p: f64) -> f64 {
    let term = |x: f64| if x > 0.0 { -x * x.log2() } else { 0.0 };
    term(p) + term(1.0 - p)
}

/// Large-`N` information content of a Bernoulli(`p`) record: `N h(p)`.
pub fn asymptotic_k(n: u64, p: f64) -> Result<f64, CodingError> {
    if !(p > 0.0 && p < 1.0) {
        return Err(CodingError::ProbabilityOutOfRange(p.to_string()));
    }
    Ok(n as f64 * binary_entropy(p))
}

/// Lower half of the noiseless-coding sandwich: a code carrying an entropy
/// decrease `delta_h` needs mean length at least `delta_h`.
pub fn coding_bound_check(delta_h: f64, mean_code_length: f64) -> bool {
    delta_h <= mean_code_length
}
