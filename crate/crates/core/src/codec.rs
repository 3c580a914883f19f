//! Exact network codes.
//!
//! Column `j` of the upper triangle, read bottom-to-top, is an integer
//! `DEC_j < 2^(j-1)`. The columns are folded into one value by
//!
//! ```text
//! U_2     = DEC_2
//! U_(i+1) = U_i * 2^-(i-1) + DEC_(i+1)        i = 2 .. n-1
//! ```
//!
//! Every `U_n` is a dyadic rational `m / 2^e` with `e <= (n-2)(n-1)/2`, so it
//! is stored exactly as a big integer and a power-of-two scale. Since
//! `0 <= U_i < 2^(i-1)`, `floor(U_(i+1)) = DEC_(i+1)` and the fold can be
//! peeled back column by column.

use std::fmt;
use std::str::FromStr;

use num_bigint::BigUint;
use num_integer::Integer;
use num_traits::{One, Zero};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::graph::BinaryNetwork;

/// `T(k) = k(k+1)/2`.
fn triangular(k: u64) -> u64 {
    k * (k + 1) / 2
}

/// Largest scale a canonical code on `n` nodes can carry.
pub fn max_scale(n: usize) -> u64 {
    if n < 3 {
        0
    } else {
        triangular(n as u64 - 2)
    }
}

/// Exact network code: `numerator / 2^scale` over `n` nodes.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(try_from = "RawCode", into = "RawCode")]
pub struct UbninCode {
    n: usize,
    numerator: BigUint,
    scale: u64,
}

/// Wire form of [`UbninCode`] with the numerator as decimal digits.
#[derive(Serialize, Deserialize)]
struct RawCode {
    n: usize,
    numerator: String,
    scale: u64,
}

impl TryFrom<RawCode> for UbninCode {
    type Error = Error;

    fn try_from(raw: RawCode) -> Result<Self> {
        let digits = raw.numerator.as_str();
        if digits.is_empty()
            || !digits.bytes().all(|b| b.is_ascii_digit())
            || (digits.len() > 1 && digits.starts_with('0'))
        {
            return Err(Error::MalformedCode(format!(
                "numerator {digits:?} is not a canonical decimal integer"
            )));
        }
        let numerator = BigUint::from_str(digits)
            .map_err(|e| Error::MalformedCode(format!("numerator: {e}")))?;
        UbninCode::new(raw.n, numerator, raw.scale)
    }
}

impl From<UbninCode> for RawCode {
    fn from(code: UbninCode) -> Self {
        RawCode {
            n: code.n,
            numerator: code.numerator.to_string(),
            scale: code.scale,
        }
    }
}

impl UbninCode {
    /// Validates and wraps a canonical code.
    ///
    /// Rejects an even numerator with a nonzero scale, a scale above
    /// `T(n-2)`, and values at or above `2^(n-1)`.
    pub fn new(n: usize, numerator: BigUint, scale: u64) -> Result<Self> {
        if n < 2 {
            return Err(Error::MalformedCode(format!("node count {n} < 2")));
        }
        if scale > 0 && numerator.is_even() {
            return Err(Error::MalformedCode(format!(
                "non-canonical code: even numerator with scale {scale}"
            )));
        }
        if scale > max_scale(n) {
            return Err(Error::MalformedCode(format!(
                "scale {scale} exceeds {} allowed for {n} nodes",
                max_scale(n)
            )));
        }
        // value < 2^(n-1)  <=>  numerator < 2^(n-1+scale)
        if numerator.bits() > n as u64 - 1 + scale {
            return Err(Error::MalformedCode(format!(
                "value is not below 2^{} required for {n} nodes",
                n - 1
            )));
        }
        Ok(Self {
            n,
            numerator,
            scale,
        })
    }

    /// Reduces `numerator / 2^scale` to canonical form and validates it.
    pub fn from_dyadic(n: usize, numerator: BigUint, scale: u64) -> Result<Self> {
        let (numerator, scale) = canonicalize(numerator, scale);
        Self::new(n, numerator, scale)
    }

    /// Parses an exact decimal rendering such as `"8.578125"`.
    pub fn from_decimal_str(n: usize, text: &str) -> Result<Self> {
        let (int, frac) = match text.split_once('.') {
            Some((i, f)) => (i, f),
            None => (text, ""),
        };
        let well_formed = !int.is_empty()
            && int.bytes().all(|b| b.is_ascii_digit())
            && (int == "0" || !int.starts_with('0'))
            && frac.bytes().all(|b| b.is_ascii_digit())
            && (text.contains('.') <= !frac.is_empty())
            && !frac.ends_with('0');
        if !well_formed {
            return Err(Error::MalformedCode(format!(
                "{text:?} is not a canonical decimal number"
            )));
        }
        let digits = format!("{int}{frac}");
        let all = BigUint::from_str(&digits).map_err(|e| Error::MalformedCode(e.to_string()))?;
        let places = frac.len() as u64;
        let (numerator, rem) = all.div_rem(&pow5(places));
        if !rem.is_zero() {
            return Err(Error::MalformedCode(format!(
                "{text:?} is not a dyadic rational"
            )));
        }
        Self::from_dyadic(n, numerator, places)
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn numerator(&self) -> &BigUint {
        &self.numerator
    }

    pub fn scale(&self) -> u64 {
        self.scale
    }

    pub fn is_zero(&self) -> bool {
        self.numerator.is_zero()
    }

    /// `floor(value)`.
    pub fn integer_part(&self) -> BigUint {
        &self.numerator >> self.scale
    }

    /// Exact terminating decimal expansion.
    pub fn to_decimal_string(&self) -> String {
        let digits = (&self.numerator * pow5(self.scale)).to_string();
        let places = self.scale as usize;
        if places == 0 {
            return digits;
        }
        let padded = if digits.len() <= places {
            format!("{}{digits}", "0".repeat(places + 1 - digits.len()))
        } else {
            digits
        };
        let (int, frac) = padded.split_at(padded.len() - places);
        let frac = frac.trim_end_matches('0');
        if frac.is_empty() {
            int.to_string()
        } else {
            format!("{int}.{frac}")
        }
    }

    /// Nearest binary64 value, ties to even; overflows to infinity.
    pub fn to_f64(&self) -> f64 {
        dyadic_to_f64(&self.numerator, self.scale)
    }
}

impl fmt::Display for UbninCode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.to_decimal_string())
    }
}

fn pow5(k: u64) -> BigUint {
    num_traits::pow(BigUint::from(5u32), k as usize)
}

fn canonicalize(numerator: BigUint, scale: u64) -> (BigUint, u64) {
    if numerator.is_zero() {
        return (numerator, 0);
    }
    let tz = numerator.trailing_zeros().unwrap_or(0).min(scale);
    (numerator >> tz, scale - tz)
}

/// `2^exp` as binary64 for `exp` in `[-1074, 1023]`.
fn pow2(exp: i64) -> f64 {
    debug_assert!((-1074..=1023).contains(&exp));
    if exp >= -1022 {
        f64::from_bits(((exp + 1023) as u64) << 52)
    } else {
        f64::from_bits(1u64 << (exp + 1074))
    }
}

/// Correctly rounded (ties-to-even) binary64 value of `numerator / 2^scale`.
pub fn dyadic_to_f64(numerator: &BigUint, scale: u64) -> f64 {
    if numerator.is_zero() {
        return 0.0;
    }
    let top = numerator.bits() as i64 - 1 - scale as i64;
    if top > 1023 {
        return f64::INFINITY;
    }
    if top < -1076 {
        return 0.0;
    }
    // Round to a multiple of the binary64 spacing at this magnitude.
    let ulp = (top - 52).max(-1074);
    let shift = scale as i64 + ulp;
    let mantissa: u64 = if shift <= 0 {
        let m = numerator << (-shift) as u64;
        m.iter_u64_digits().next().unwrap_or(0)
    } else {
        let shift = shift as u64;
        let q: BigUint = numerator >> shift;
        let mut m = q.iter_u64_digits().next().unwrap_or(0);
        let half_bit = numerator.bit(shift - 1);
        let below_half = numerator
            .trailing_zeros()
            .is_some_and(|tz| tz >= shift - 1);
        if half_bit && (!below_half || m & 1 == 1) {
            m += 1;
        }
        m
    };
    // mantissa <= 2^53; the product is exact or overflows to infinity.
    mantissa as f64 * pow2(ulp)
}

/// Per-column integers `DEC_2 .. DEC_n`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ColumnDecimals {
    dec: Vec<BigUint>,
}

impl ColumnDecimals {
    /// Node count.
    pub fn n(&self) -> usize {
        self.dec.len() + 1
    }

    /// `DEC_j` for one-based column `j` in `2..=n`.
    pub fn get(&self, j: usize) -> &BigUint {
        &self.dec[j - 2]
    }

    /// `DEC_2, DEC_3, ...` in order.
    pub fn as_slice(&self) -> &[BigUint] {
        &self.dec
    }

    /// Validates `0 <= DEC_j < 2^(j-1)` for every column.
    pub fn new(dec: Vec<BigUint>) -> Result<Self> {
        if dec.is_empty() {
            return Err(Error::Validation("need at least one column".into()));
        }
        for (idx, d) in dec.iter().enumerate() {
            let j = idx + 2;
            if d.bits() > j as u64 - 1 {
                return Err(Error::MalformedCode(format!(
                    "column {j} value {d} is not below 2^{}",
                    j - 1
                )));
            }
        }
        Ok(Self { dec })
    }

    /// Rebuilds the adjacency matrix the columns describe.
    pub fn to_network(&self) -> Result<BinaryNetwork> {
        let mut b = BinaryNetwork::with_nodes(self.n())?;
        for (idx, d) in self.dec.iter().enumerate() {
            let col = idx + 1;
            for row in 0..col {
                if d.bit(row as u64) {
                    b.set_edge_unchecked(row, col, true);
                }
            }
        }
        Ok(b)
    }
}

/// Reads each upper-triangle column bottom-to-top as a binary number; the
/// entry just above the diagonal is the most significant bit.
pub fn column_decimals(b: &BinaryNetwork) -> ColumnDecimals {
    let dec = (1..b.n())
        .map(|col| {
            // Bit r of row `col` is the edge (r, col); keep rows above the diagonal.
            let words = b.row(col);
            let mut digits: Vec<u64> = words[..col.div_ceil(64)].to_vec();
            if col % 64 != 0 {
                if let Some(last) = digits.last_mut() {
                    *last &= (1u64 << (col % 64)) - 1;
                }
            }
            let limbs: Vec<u32> = digits
                .iter()
                .flat_map(|&w| [w as u32, (w >> 32) as u32])
                .collect();
            BigUint::new(limbs)
        })
        .collect();
    ColumnDecimals { dec }
}

/// Encodes a network exactly.
pub fn encode(b: &BinaryNetwork) -> UbninCode {
    let cols = column_decimals(b);
    let n = b.n();
    let mut numerator = cols.get(2).clone();
    let mut scale = 0u64;
    for i in 2..n {
        scale += i as u64 - 1;
        numerator += cols.get(i + 1) << scale;
    }
    let (numerator, scale) = canonicalize(numerator, scale);
    let code = UbninCode {
        n,
        numerator,
        scale,
    };
    assert_eq!(&code.integer_part(), cols.get(n), "floor(U_n) must equal DEC_n");
    debug_assert!(code.scale <= max_scale(n));
    code
}

/// Recovers the column integers by peeling the fold from the last column down.
pub fn decode_columns(code: &UbninCode) -> Result<ColumnDecimals> {
    let n = code.n;
    let mut numerator = code.numerator.clone();
    let mut scale = code.scale;
    let mut dec = vec![BigUint::zero(); n - 1];
    for j in (3..=n).rev() {
        let whole = &numerator >> scale;
        if whole.bits() > j as u64 - 1 {
            return Err(Error::MalformedCode(format!(
                "column {j} value {whole} is not below 2^{}",
                j - 1
            )));
        }
        let frac = &numerator - (&whole << scale);
        dec[j - 2] = whole;
        // (U - DEC_j) * 2^(j-2)
        let lift = j as u64 - 2;
        if scale >= lift {
            numerator = frac;
            scale -= lift;
        } else {
            numerator = frac << (lift - scale);
            scale = 0;
        }
    }
    let (numerator, scale) = canonicalize(numerator, scale);
    if scale != 0 {
        return Err(Error::MalformedCode(
            "residue is not an integer after peeling all columns".into(),
        ));
    }
    if numerator > BigUint::one() {
        return Err(Error::MalformedCode(format!(
            "first column value {numerator} is not 0 or 1"
        )));
    }
    dec[0] = numerator;
    ColumnDecimals::new(dec)
}

/// Rebuilds the network a code describes; nodes get default labels.
pub fn decode(code: &UbninCode) -> Result<BinaryNetwork> {
    decode_columns(code)?.to_network()
}

/// Runs the fold in binary64 arithmetic, rounding each column integer to
/// the nearest double first, as a double-precision pipeline would.
///
/// Column integers of `2^1024` or more become infinite, so complete graphs
/// above 1024 nodes give a non-finite result.
pub fn encode_float64_emulation(b: &BinaryNetwork) -> f64 {
    let cols = column_decimals(b);
    let as_f64 = |d: &BigUint| dyadic_to_f64(d, 0);
    let mut temp = as_f64(cols.get(2));
    let mut power = 1i32;
    for i in 2..b.n() {
        let factor = 1.0 / 2f64.powi(power);
        let mut value = temp * factor;
        value += as_f64(cols.get(i + 1));
        temp = value;
        power += 1;
    }
    temp
}

/// Closed form of the complete-graph code: `2^(n-1) - 2^-T(n-2)` for
/// `n >= 3`, and `1` for `n = 2`.
pub fn complete_graph_oracle(n: usize) -> Result<UbninCode> {
    if n < 2 {
        return Err(Error::Domain(format!("node count {n} < 2")));
    }
    if n == 2 {
        return UbninCode::new(2, BigUint::one(), 0);
    }
    let t = max_scale(n);
    let numerator = (BigUint::one() << (n as u64 - 1 + t)) - 1u32;
    UbninCode::new(n, numerator, t)
}

impl FromStr for ColumnDecimals {
    type Err = Error;

    /// Parses comma-separated `DEC_2,DEC_3,...`.
    fn from_str(s: &str) -> Result<Self> {
        let dec = s
            .split(',')
            .map(|t| {
                BigUint::from_str(t.trim())
                    .map_err(|e| Error::Validation(format!("column value {t:?}: {e}")))
            })
            .collect::<Result<Vec<_>>>()?;
        Self::new(dec)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn path5() -> BinaryNetwork {
        BinaryNetwork::from_edges(5, &[(0, 1), (1, 2), (2, 3), (3, 4)]).unwrap()
    }

    fn big(v: u64) -> BigUint {
        BigUint::from(v)
    }

    #[test]
    fn column_decimals_examples() {
        let single = BinaryNetwork::complete(2).unwrap();
        assert_eq!(column_decimals(&single).as_slice(), &[big(1)]);
        let k5 = BinaryNetwork::complete(5).unwrap();
        assert_eq!(
            column_decimals(&k5).as_slice(),
            &[big(1), big(3), big(7), big(15)]
        );
        assert_eq!(
            column_decimals(&path5()).as_slice(),
            &[big(1), big(2), big(4), big(8)]
        );
    }

    #[test]
    fn column_read_bottom_to_top() {
        // Column 3 holds edges (1,3) and (2,3); only (1,3) -> least significant bit.
        let b = BinaryNetwork::from_edges(3, &[(0, 2)]).unwrap();
        assert_eq!(column_decimals(&b).get(3), &big(1));
        let b = BinaryNetwork::from_edges(3, &[(1, 2)]).unwrap();
        assert_eq!(column_decimals(&b).get(3), &big(2));
    }

    #[test]
    fn column_decimals_across_word_boundary() {
        let mut b = BinaryNetwork::with_nodes(70).unwrap();
        b.set_edge(63, 64, true).unwrap();
        b.set_edge(0, 69, true).unwrap();
        b.set_edge(65, 69, true).unwrap();
        let cols = column_decimals(&b);
        assert_eq!(cols.get(65), &(BigUint::one() << 63u32));
        assert_eq!(cols.get(70), &((BigUint::one() << 65u32) + 1u32));
    }

    #[test]
    fn encode_examples() {
        for n in [2, 5, 9] {
            assert!(encode(&BinaryNetwork::with_nodes(n).unwrap()).is_zero());
        }
        let p = encode(&path5());
        assert_eq!((p.numerator(), p.scale()), (&big(549), 6));
        assert_eq!(p.to_decimal_string(), "8.578125");
    }

    #[test]
    fn complete_ten_matches_table() {
        let code = encode(&BinaryNetwork::complete(10).unwrap());
        assert_eq!(
            code.to_decimal_string(),
            "511.999999999985448084771633148193359375"
        );
        assert_eq!(code.to_f64(), 511.999999999985448084771633148193359375);
        assert_eq!(code.to_f64(), 512.0 - 2f64.powi(-36));
    }

    #[test]
    fn complete_twenty_closed_form() {
        let code = encode(&BinaryNetwork::complete(20).unwrap());
        assert_eq!(code.scale(), 171);
        assert_eq!(code, complete_graph_oracle(20).unwrap());
        assert_eq!(code.to_f64(), 524288.0);
        assert_eq!(encode_float64_emulation(&BinaryNetwork::complete(20).unwrap()), 524288.0);
    }

    #[test]
    fn complete_graph_oracle_small() {
        assert_eq!(complete_graph_oracle(2).unwrap().to_decimal_string(), "1");
        assert_eq!(
            complete_graph_oracle(5).unwrap().to_decimal_string(),
            "15.984375"
        );
        for n in 2..40 {
            assert_eq!(
                encode(&BinaryNetwork::complete(n).unwrap()),
                complete_graph_oracle(n).unwrap()
            );
        }
        assert!(complete_graph_oracle(1).is_err());
    }

    #[test]
    fn decode_examples() {
        let zero = UbninCode::new(7, BigUint::zero(), 0).unwrap();
        assert_eq!(decode(&zero).unwrap(), BinaryNetwork::with_nodes(7).unwrap());
        let p = UbninCode::from_decimal_str(5, "8.578125").unwrap();
        assert_eq!(decode(&p).unwrap(), path5());
        let k10 =
            UbninCode::from_decimal_str(10, "511.999999999985448084771633148193359375").unwrap();
        assert_eq!(decode(&k10).unwrap(), BinaryNetwork::complete(10).unwrap());
    }

    #[test]
    fn decode_rejects_oversized_columns() {
        // Bypass the constructor to exercise the peeling checks directly.
        let bad = UbninCode {
            n: 3,
            numerator: big(9),
            scale: 0,
        };
        assert!(matches!(decode(&bad), Err(Error::MalformedCode(_))));
        let bad = UbninCode {
            n: 3,
            numerator: big(1),
            scale: 3,
        };
        assert!(matches!(decode(&bad), Err(Error::MalformedCode(_))));
        let bad = UbninCode {
            n: 2,
            numerator: big(2),
            scale: 0,
        };
        assert!(matches!(decode(&bad), Err(Error::MalformedCode(_))));
    }

    #[test]
    fn constructor_rejects_bad_codes() {
        assert!(UbninCode::new(5, big(548), 6).is_err());
        assert!(UbninCode::new(3, big(1), 2).is_err());
        assert!(UbninCode::new(3, big(4), 0).is_err());
        assert!(UbninCode::new(2, big(1), 0).is_ok());
        assert!(UbninCode::new(2, big(2), 0).is_err());
        assert!(UbninCode::new(1, big(0), 0).is_err());
    }

    #[test]
    fn decimal_parser_rejects_non_canonical() {
        for text in ["08.5", "8.50", "8.", ".5", "-1", "1e3", "", "0.1", "1.2.5", " 1"] {
            assert!(
                UbninCode::from_decimal_str(5, text).is_err(),
                "{text:?} accepted"
            );
        }
        assert!(UbninCode::from_decimal_str(9, "511.999999999985448084771633148193359375").is_err());
        assert_eq!(UbninCode::from_decimal_str(3, "0").unwrap().to_decimal_string(), "0");
        assert_eq!(UbninCode::from_decimal_str(3, "0.5").unwrap().scale(), 1);
    }

    #[test]
    fn decimal_string_small_fractions() {
        let c = UbninCode::new(6, big(1), 10).unwrap();
        assert_eq!(c.to_decimal_string(), "0.0009765625");
        assert_eq!(
            UbninCode::from_decimal_str(6, "0.0009765625").unwrap(),
            c
        );
    }

    #[test]
    fn json_record_round_trip() {
        let code = encode(&path5());
        let json = serde_json::to_string(&code).unwrap();
        assert_eq!(json, r#"{"n":5,"numerator":"549","scale":6}"#);
        let back: UbninCode = serde_json::from_str(&json).unwrap();
        assert_eq!(back, code);
        for bad in [
            r#"{"n":5,"numerator":"548","scale":6}"#,
            r#"{"n":5,"numerator":"0549","scale":6}"#,
            r#"{"n":5,"numerator":"5a","scale":6}"#,
            r#"{"n":3,"numerator":"1","scale":5}"#,
        ] {
            assert!(serde_json::from_str::<UbninCode>(bad).is_err(), "{bad}");
        }
    }

    #[test]
    fn float_conversion_rounding() {
        // 2^53 + 1 is a tie between 2^53 and 2^53 + 2: even mantissa wins.
        assert_eq!(dyadic_to_f64(&((big(1) << 53u32) + 1u32), 0), 9007199254740992.0);
        assert_eq!(dyadic_to_f64(&((big(1) << 53u32) + 3u32), 0), 9007199254740996.0);
        // Smallest subnormal and half of it (tie to zero).
        assert_eq!(dyadic_to_f64(&big(1), 1074), f64::from_bits(1));
        assert_eq!(dyadic_to_f64(&big(1), 1075), 0.0);
        assert_eq!(dyadic_to_f64(&big(3), 1076), f64::from_bits(1));
        assert_eq!(dyadic_to_f64(&(BigUint::one() << 1024u32), 0), f64::INFINITY);
        let max = (BigUint::one() << 1024u32) - (BigUint::one() << 971u32);
        assert_eq!(dyadic_to_f64(&max, 0), f64::MAX);
        // Halfway between MAX and 2^1024 rounds to the even side, which overflows.
        let halfway = (BigUint::one() << 1024u32) - (BigUint::one() << 970u32);
        assert_eq!(dyadic_to_f64(&halfway, 0), f64::INFINITY);
        assert_eq!(dyadic_to_f64(&(&halfway - 1u32), 0), f64::MAX);
    }

    #[test]
    fn emulation_overflows_past_1024_nodes() {
        let k1024 = BinaryNetwork::complete(1024).unwrap();
        assert_eq!(encode_float64_emulation(&k1024), 2f64.powi(1023));
        let k1025 = BinaryNetwork::complete(1025).unwrap();
        assert!(!encode_float64_emulation(&k1025).is_finite());
    }

    #[test]
    fn column_decimals_parse() {
        let cols: ColumnDecimals = "1, 2, 4, 8".parse().unwrap();
        assert_eq!(cols.to_network().unwrap(), path5());
        assert!("1,4".parse::<ColumnDecimals>().is_err());
        assert!("1,x".parse::<ColumnDecimals>().is_err());
    }
}
