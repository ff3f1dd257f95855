//! Log-potentials of the five factor kinds.

use crate::error::{Error, Result};
use crate::network::BinaryLabel;
use crate::scalar::Scalar;

fn y<S: Scalar>(l: BinaryLabel) -> S {
    S::of(f64::from(l.value()))
}

fn mu<S: Scalar>(m: u8) -> S {
    debug_assert!(m <= 1, "influence indicator must be 0 or 1");
    S::of(f64::from(m))
}

/// Image–owner agreement: `-beta * |y_user - y_img|`.
pub fn eval_f1<S: Scalar>(y_img: BinaryLabel, y_user: BinaryLabel, beta: S) -> S {
    -beta * (y::<S>(y_user) - y::<S>(y_img)).abs()
}

/// Visual evidence: `(alpha . x) * y_img`.
pub fn eval_f2<S: Scalar>(x: &[S], y_img: BinaryLabel, alpha: &[S]) -> Result<S> {
    if x.len() != alpha.len() {
        return Err(Error::Dimension {
            expected: alpha.len(),
            got: x.len(),
        });
    }
    let score: S = x.iter().zip(alpha).map(|(a, b)| *a * *b).sum();
    Ok(score * y::<S>(y_img))
}

/// Temporal agreement with exponential decay in the slice gap.
pub fn eval_f3<S: Scalar>(y_prev: BinaryLabel, y_cur: BinaryLabel, xi: S, delta: S, gap: usize) -> S {
    assert!(gap >= 1, "temporal gap must be at least one slice");
    -xi * (-delta * S::of(gap as f64)).exp() * (y::<S>(y_cur) - y::<S>(y_prev)).abs()
}

/// Social influence of `i` on `j`: `-lambda * |1 - mu - |y_i - y_j||`.
pub fn eval_f4<S: Scalar>(y_i: BinaryLabel, y_j: BinaryLabel, mu_ij: u8, lambda: S) -> S {
    let diff = (y::<S>(y_i) - y::<S>(y_j)).abs();
    -lambda * (S::one() - mu::<S>(mu_ij) - diff).abs()
}

/// Stability of an influence indicator across slices.
pub fn eval_f5<S: Scalar>(mu_prev: u8, mu_cur: u8, eta: S, tau: S, gap: usize) -> S {
    assert!(gap >= 1, "temporal gap must be at least one slice");
    -eta * (-tau * S::of(gap as f64)).exp() * (mu::<S>(mu_cur) - mu::<S>(mu_prev)).abs()
}

#[cfg(test)]
mod tests {
    use proptest::prelude::*;

    use super::*;
    use BinaryLabel::{Negative as N, Positive as P};

    #[test]
    fn f1_values() {
        assert_eq!(eval_f1(P, P, 0.6), 0.0);
        assert!((eval_f1(P, N, 0.6f64) + 1.2).abs() < 1e-15);
        assert!((eval_f1(P, N, 0.6f64).exp() - 0.3012).abs() < 1e-4);
        assert_eq!(eval_f1(N, P, 0.0), 0.0);
    }

    #[test]
    fn f2_values() {
        let alpha = [0.5, -0.25, 2.0];
        assert_eq!(eval_f2(&[0.0; 3], P, &alpha).unwrap(), 0.0);
        assert_eq!(eval_f2(&[0.0; 3], N, &alpha).unwrap(), 0.0);
        // alpha . x = 0.5 - 0.1 + 0.4 = 0.8
        let x = [1.0, 0.4, 0.2];
        assert!((eval_f2(&x, P, &alpha).unwrap() - 0.8f64).abs() < 1e-15);
        assert!((eval_f2(&x, N, &alpha).unwrap() + 0.8f64).abs() < 1e-15);
        assert!(matches!(eval_f2(&[1.0], P, &alpha), Err(Error::Dimension { expected: 3, got: 1 })));
    }

    #[test]
    fn f3_values() {
        assert_eq!(eval_f3(P, P, 0.5, 1.0, 1), 0.0);
        let v: f64 = eval_f3(P, N, 0.5, 1.0, 1);
        assert!((v - (-0.5 * (-1f64).exp() * 2.0)).abs() < 1e-15);
        assert!((v + 0.3679).abs() < 1e-4);
        assert!(eval_f3(P, N, 0.5f64, 1.0, 800).abs() < 1e-300);
    }

    #[test]
    fn f4_values() {
        assert_eq!(eval_f4(P, P, 1, 0.1), 0.0);
        assert_eq!(eval_f4(N, N, 0, 0.1), -0.1);
        assert!((eval_f4(P, N, 1, 0.1f64) + 0.2).abs() < 1e-15);
        assert_eq!(eval_f4(P, N, 0, 0.1), -0.1);
    }

    #[test]
    fn f5_values() {
        assert_eq!(eval_f5(1, 1, 0.5, 1.0, 1), 0.0);
        let v: f64 = eval_f5(0, 1, 0.5, 1.0, 1);
        assert!((v + 0.5 * (-1f64).exp()).abs() < 1e-15);
        assert!((v + 0.1839).abs() < 1e-4);
        assert_eq!(eval_f5(1, 0, 0.0, 1.0, 3), 0.0);
    }

    proptest! {
        #[test]
        fn f2_is_antisymmetric(x in prop::collection::vec(-5.0f64..5.0, 21), a in prop::collection::vec(-5.0f64..5.0, 21)) {
            let pos = eval_f2(&x, P, &a).unwrap();
            let neg = eval_f2(&x, N, &a).unwrap();
            prop_assert!((pos + neg).abs() < 1e-12);
        }

        #[test]
        fn penalty_factors_are_non_positive(w in 0.0f64..5.0, d in 0.0f64..5.0, gap in 1usize..10, a in any::<bool>(), b in any::<bool>(), m in 0u8..2, n in 0u8..2) {
            let (ya, yb) = (BinaryLabel::from_positive(a), BinaryLabel::from_positive(b));
            prop_assert!(eval_f1(ya, yb, w) <= 0.0);
            prop_assert!(eval_f3(ya, yb, w, d, gap) <= 0.0);
            prop_assert!(eval_f4(ya, yb, m, w) <= 0.0);
            prop_assert!(eval_f5(m, n, w, d, gap) <= 0.0);
            prop_assert_eq!(eval_f1(ya, ya, w), 0.0);
            prop_assert_eq!(eval_f3(ya, ya, w, d, gap), 0.0);
            prop_assert_eq!(eval_f4(ya, ya, 1, w), 0.0);
            prop_assert_eq!(eval_f5(m, m, w, d, gap), 0.0);
        }
    }
}
