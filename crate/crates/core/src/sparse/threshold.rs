use serde::{Deserialize, Serialize};

use crate::error::{arg_err, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum ThresholdKind {
    #[default]
    Soft,
    Hard,
}

impl ThresholdKind {
    pub fn apply_in_place(self, x: &mut [f64], delta: f64) {
        match self {
            ThresholdKind::Soft => soft_in_place(x, delta),
            ThresholdKind::Hard => hard_in_place(x, delta),
        }
    }
}

fn check(delta: f64) -> Result<()> {
    if !(delta >= 0.0) {
        return arg_err(format!("threshold must be nonnegative, got {delta}"));
    }
    Ok(())
}

/// `sign(x) max(|x| - delta, 0)` elementwise.
pub fn soft_threshold(x: &[f64], delta: f64) -> Result<Vec<f64>> {
    check(delta)?;
    let mut y = x.to_vec();
    soft_in_place(&mut y, delta);
    Ok(y)
}

/// Keeps entries with `|x| > delta`, zeroes the rest.
pub fn hard_threshold(x: &[f64], delta: f64) -> Result<Vec<f64>> {
    check(delta)?;
    let mut y = x.to_vec();
    hard_in_place(&mut y, delta);
    Ok(y)
}

pub(crate) fn soft_in_place(x: &mut [f64], delta: f64) {
    for v in x.iter_mut() {
        let m = v.abs() - delta;
        *v = if m > 0.0 { v.signum() * m } else { 0.0 };
    }
}

pub(crate) fn hard_in_place(x: &mut [f64], delta: f64) {
    for v in x.iter_mut() {
        if v.abs() <= delta {
            *v = 0.0;
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn close(a: &[f64], b: &[f64]) -> bool {
        a.iter().zip(b).all(|(x, y)| (x - y).abs() < 1e-12)
    }

    #[test]
    fn soft_examples() {
        assert!(close(&soft_threshold(&[3.0, -0.5, 1.2], 1.0).unwrap(), &[2.0, 0.0, 0.2]));
        let x = [0.3, -7.0, 2.5];
        assert_eq!(soft_threshold(&x, 0.0).unwrap(), x.to_vec());
        assert!(soft_threshold(&x, 7.0).unwrap().iter().all(|&v| v == 0.0));
        assert!(soft_threshold(&x, -1.0).is_err());
    }

    #[test]
    fn hard_examples() {
        assert_eq!(hard_threshold(&[3.0, -0.5, 1.2], 1.0).unwrap(), vec![3.0, 0.0, 1.2]);
        let x = [0.3, -7.0, 2.5];
        assert_eq!(hard_threshold(&x, 0.0).unwrap(), x.to_vec());
        let once = hard_threshold(&x, 1.0).unwrap();
        assert_eq!(hard_threshold(&once, 1.0).unwrap(), once);
        assert!(hard_threshold(&x, -0.1).is_err());
    }

    proptest! {
        #[test]
        fn soft_is_nonexpansive(
            pair in proptest::collection::vec((-10.0f64..10.0, -10.0f64..10.0), 1..20),
            delta in 0.0f64..5.0,
        ) {
            let (x, y): (Vec<f64>, Vec<f64>) = pair.into_iter().unzip();
            let sx = soft_threshold(&x, delta).unwrap();
            let sy = soft_threshold(&y, delta).unwrap();
            let d_out: f64 = sx.iter().zip(&sy).map(|(a, b)| (a - b).powi(2)).sum();
            let d_in: f64 = x.iter().zip(&y).map(|(a, b)| (a - b).powi(2)).sum();
            prop_assert!(d_out <= d_in + 1e-12);
        }

        #[test]
        fn hard_is_idempotent(x in proptest::collection::vec(-10.0f64..10.0, 1..20), delta in 0.0f64..5.0) {
            let once = hard_threshold(&x, delta).unwrap();
            prop_assert_eq!(hard_threshold(&once, delta).unwrap(), once);
        }
    }
}
