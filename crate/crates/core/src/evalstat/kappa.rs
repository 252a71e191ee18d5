use crate::error::{Error, Result};

/// Cohen's kappa for two binary annotation vectors.
///
/// When chance agreement is 1 (both annotators constant and identical) the
/// value is defined as 1.
pub fn cohen_kappa(a: &[bool], b: &[bool]) -> Result<f64> {
    if a.len() != b.len() {
        return Err(Error::validation(format!(
            "annotation vectors differ in length ({} vs {})",
            a.len(),
            b.len()
        )));
    }
    if a.is_empty() {
        return Err(Error::validation("annotation vectors are empty"));
    }
    let n = a.len() as f64;
    let agree = a.iter().zip(b).filter(|(x, y)| x == y).count() as f64;
    let pa = a.iter().filter(|x| **x).count() as f64 / n;
    let pb = b.iter().filter(|x| **x).count() as f64 / n;
    let observed = agree / n;
    let expected = pa * pb + (1.0 - pa) * (1.0 - pb);
    if (1.0 - expected).abs() < f64::EPSILON {
        return Ok(1.0);
    }
    Ok((observed - expected) / (1.0 - expected))
}
