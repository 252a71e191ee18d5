use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Effect-size band of the Vargha-Delaney statistic, from |A12 - 0.5|.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Band {
    /// Negligible, below 0.06.
    N,
    /// Small, below 0.14.
    S,
    /// Medium, below 0.21.
    M,
    /// Large.
    L,
}

impl Band {
    pub fn from_a12(a12: f64) -> Band {
        let d = (a12 - 0.5).abs();
        if d < 0.06 {
            Band::N
        } else if d < 0.14 {
            Band::S
        } else if d < 0.21 {
            Band::M
        } else {
            Band::L
        }
    }
}

impl fmt::Display for Band {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{self:?}")
    }
}

/// Probability that a draw from `a` exceeds a draw from `b`, ties counting half.
pub fn vargha_delaney_a12(a: &[f64], b: &[f64]) -> Result<(f64, Band)> {
    if a.is_empty() || b.is_empty() {
        return Err(Error::validation("A12 needs two non-empty samples"));
    }
    if a.iter().chain(b).any(|v| v.is_nan()) {
        return Err(Error::validation("A12 sample contains NaN"));
    }
    let mut sorted_b = b.to_vec();
    sorted_b.sort_by(f64::total_cmp);
    // Twice the score, so ties stay integral.
    let mut doubled: u64 = 0;
    for &x in a {
        let below = sorted_b.partition_point(|&y| y < x);
        let not_above = sorted_b.partition_point(|&y| y <= x);
        doubled += 2 * below as u64 + (not_above - below) as u64;
    }
    let a12 = doubled as f64 / (2 * a.len() * b.len()) as f64;
    Ok((a12, Band::from_a12(a12)))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn examples() {
        assert_eq!(vargha_delaney_a12(&[3.0, 3.0], &[3.0, 3.0]).unwrap(), (0.5, Band::N));
        assert_eq!(
            vargha_delaney_a12(&[1.0, 2.0, 3.0], &[4.0, 5.0, 6.0]).unwrap(),
            (0.0, Band::L)
        );
        assert_eq!(vargha_delaney_a12(&[1.0, 2.0], &[1.0, 2.0]).unwrap().0, 0.5);
    }

    #[test]
    fn band_edges() {
        assert_eq!(Band::from_a12(0.5599), Band::N);
        assert_eq!(Band::from_a12(0.56), Band::S);
        assert_eq!(Band::from_a12(0.36), Band::M);
        assert_eq!(Band::from_a12(0.72), Band::L);
        assert_eq!(Band::from_a12(0.29), Band::L);
        assert_eq!(Band::from_a12(1.0), Band::L);
    }

    #[test]
    fn empty_rejected() {
        assert!(vargha_delaney_a12(&[], &[1.0]).is_err());
    }
}
