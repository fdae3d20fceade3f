//! Exact rational scalars and the small amount of linear algebra the graph
//! invariants need (rank by Gaussian elimination).

use num_rational::Ratio;
use num_traits::{One, Signed, ToPrimitive, Zero};
use std::str::FromStr;

use crate::error::ParseRationalError;

/// Exact rational scalar used for bounds, circulations and witnesses.
pub type Q = Ratio<i128>;

pub fn q(n: i128) -> Q {
    Q::from_integer(n)
}

pub fn qf(n: i128, d: i128) -> Q {
    Q::new(n, d)
}

pub fn to_f64(v: &Q) -> f64 {
    v.to_f64()
        .unwrap_or_else(|| *v.numer() as f64 / *v.denom() as f64)
}

pub fn vec_to_f64(v: &[Q]) -> Vec<f64> {
    v.iter().map(to_f64).collect()
}

/// Parses `"p/q"`, an integer, or a finite decimal such as `"-0.25"` exactly.
pub fn parse_rational(s: &str) -> Result<Q, ParseRationalError> {
    let s = s.trim();
    let err = || ParseRationalError(s.to_string());
    if s.is_empty() {
        return Err(err());
    }
    if let Some((num, den)) = s.split_once('/') {
        let num = i128::from_str(num.trim()).map_err(|_| err())?;
        let den = i128::from_str(den.trim()).map_err(|_| err())?;
        if den == 0 {
            return Err(err());
        }
        return Ok(Q::new(num, den));
    }
    if let Some((int, frac)) = s.split_once('.') {
        let negative = int.starts_with('-');
        let int_digits = int.trim_start_matches(['-', '+']);
        if frac.is_empty() && int_digits.is_empty() {
            return Err(err());
        }
        if !int_digits.chars().all(|c| c.is_ascii_digit())
            || !frac.chars().all(|c| c.is_ascii_digit())
            || frac.len() > 30
        {
            return Err(err());
        }
        let int_val = if int_digits.is_empty() {
            0
        } else {
            i128::from_str(int_digits).map_err(|_| err())?
        };
        let scale = 10i128.pow(frac.len() as u32);
        let frac_val = if frac.is_empty() {
            0
        } else {
            i128::from_str(frac).map_err(|_| err())?
        };
        let mag = int_val
            .checked_mul(scale)
            .and_then(|v| v.checked_add(frac_val))
            .ok_or_else(err)?;
        let value = Q::new(mag, scale);
        return Ok(if negative { -value } else { value });
    }
    i128::from_str(s).map(Q::from_integer).map_err(|_| err())
}

/// Canonical text form: `"p"` for integers, `"p/q"` otherwise.
pub fn format_rational(v: &Q) -> String {
    if v.is_integer() {
        v.numer().to_string()
    } else {
        format!("{}/{}", v.numer(), v.denom())
    }
}

pub fn format_vec(v: &[Q]) -> Vec<String> {
    v.iter().map(format_rational).collect()
}

/// Rank of a dense rational matrix given as rows.
pub fn rank(rows: &[Vec<Q>]) -> usize {
    let mut a: Vec<Vec<Q>> = rows.to_vec();
    let nrows = a.len();
    if nrows == 0 {
        return 0;
    }
    let ncols = a[0].len();
    let mut rank = 0;
    for col in 0..ncols {
        let Some(pivot) = (rank..nrows).find(|&r| !a[r][col].is_zero()) else {
            continue;
        };
        a.swap(rank, pivot);
        let inv = Q::one() / a[rank][col];
        for c in col..ncols {
            a[rank][c] *= inv;
        }
        for r in 0..nrows {
            if r != rank && !a[r][col].is_zero() {
                let factor = a[r][col];
                for c in col..ncols {
                    let sub = factor * a[rank][c];
                    a[r][c] -= sub;
                }
            }
        }
        rank += 1;
        if rank == nrows {
            break;
        }
    }
    rank
}

pub fn integer_rank(rows: &[Vec<i64>]) -> usize {
    let rows: Vec<Vec<Q>> = rows
        .iter()
        .map(|r| r.iter().map(|&v| q(v as i128)).collect())
        .collect();
    rank(&rows)
}

pub fn max_abs(v: &[Q]) -> Q {
    v.iter().map(|x| x.abs()).max().unwrap_or_else(Q::zero)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_fractions_and_decimals_exactly() {
        assert_eq!(parse_rational("3/10").unwrap(), qf(3, 10));
        assert_eq!(parse_rational("0.3").unwrap(), qf(3, 10));
        assert_eq!(parse_rational("-1.25").unwrap(), qf(-5, 4));
        assert_eq!(parse_rational("-0.5").unwrap(), qf(-1, 2));
        assert_eq!(parse_rational("7").unwrap(), q(7));
        assert_eq!(parse_rational("1/3").unwrap(), qf(1, 3));
        assert_eq!(parse_rational(".5").unwrap(), qf(1, 2));
        assert!(parse_rational("1/0").is_err());
        assert!(parse_rational("abc").is_err());
        assert!(parse_rational("1.2.3").is_err());
        assert!(parse_rational("").is_err());
    }

    #[test]
    fn format_round_trips() {
        for s in ["0", "-3", "1/3", "-7/2"] {
            assert_eq!(format_rational(&parse_rational(s).unwrap()), s);
        }
    }

    #[test]
    fn rank_of_small_matrices() {
        assert_eq!(integer_rank(&[vec![1, 2], vec![2, 4]]), 1);
        assert_eq!(integer_rank(&[vec![1, 0], vec![0, 1]]), 2);
        assert_eq!(integer_rank(&[vec![0, 0]]), 0);
        assert_eq!(integer_rank(&[]), 0);
    }
}
