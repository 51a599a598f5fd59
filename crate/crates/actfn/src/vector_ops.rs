//! Activations on vectors: softmax with its Jacobian, and maxout.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

fn check_logits(z: &[f64]) -> Result<()> {
    if z.is_empty() {
        return Err(Error::Empty("logit vector"));
    }
    if let Some(&bad) = z.iter().find(|v| !v.is_finite()) {
        return Err(Error::NonFiniteInput(bad));
    }
    Ok(())
}

/// Softmax, shifted by the max logit so large inputs cannot overflow.
pub fn softmax(z: &[f64]) -> Result<Vec<f64>> {
    check_logits(z)?;
    let m = z.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let e: Vec<f64> = z.iter().map(|v| (v - m).exp()).collect();
    let s: f64 = e.iter().sum();
    Ok(e.into_iter().map(|v| v / s).collect())
}

/// `J[i][j] = d a_i / d z_j = a_j (delta_ij - a_i)`.
pub fn softmax_jacobian(z: &[f64]) -> Result<Vec<Vec<f64>>> {
    let a = softmax(z)?;
    Ok((0..a.len())
        .map(|i| {
            (0..a.len())
                .map(|j| a[j] * (f64::from(u8::from(i == j)) - a[i]))
                .collect()
        })
        .collect())
}

/// `max_j (w_j . x + b_j)` over `k >= 2` affine pieces.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MaxoutUnit {
    pub weights: Vec<Vec<f64>>,
    pub biases: Vec<f64>,
}

impl MaxoutUnit {
    pub fn new(weights: Vec<Vec<f64>>, biases: Vec<f64>) -> Result<Self> {
        if weights.len() < 2 || weights.len() != biases.len() {
            return Err(Error::Shape(format!(
                "maxout needs k >= 2 pieces with one bias each, got {} weights and {} biases",
                weights.len(),
                biases.len()
            )));
        }
        let d = weights[0].len();
        if weights.iter().any(|w| w.len() != d) {
            return Err(Error::Shape("maxout pieces must share input dimension".into()));
        }
        Ok(MaxoutUnit { weights, biases })
    }

    pub fn pieces(&self) -> usize {
        self.weights.len()
    }

    pub fn input_dim(&self) -> usize {
        self.weights[0].len()
    }
}

/// Per-piece partials of a maxout output. Only the winner is non-zero.
#[derive(Clone, Debug, PartialEq)]
pub struct MaxoutGrad {
    pub winner: usize,
    pub d_dw: Vec<Vec<f64>>,
    pub d_db: Vec<f64>,
    pub d_dx: Vec<f64>,
}

/// Value and first maximising piece.
pub fn maxout(x: &[f64], unit: &MaxoutUnit) -> Result<(f64, usize)> {
    if x.len() != unit.input_dim() {
        return Err(Error::Shape(format!(
            "input has {} entries, maxout expects {}",
            x.len(),
            unit.input_dim()
        )));
    }
    let mut best = (f64::NEG_INFINITY, 0);
    for (j, (w, b)) in unit.weights.iter().zip(&unit.biases).enumerate() {
        let z: f64 = w.iter().zip(x).map(|(w, x)| w * x).sum::<f64>() + b;
        if z > best.0 {
            best = (z, j);
        }
    }
    Ok(best)
}

/// Gradient routed through the winning piece: d/dw = x, d/db = 1, d/dx = w.
pub fn maxout_grad(x: &[f64], unit: &MaxoutUnit) -> Result<MaxoutGrad> {
    let (_, j) = maxout(x, unit)?;
    let k = unit.pieces();
    let mut d_dw = vec![vec![0.0; x.len()]; k];
    let mut d_db = vec![0.0; k];
    d_dw[j] = x.to_vec();
    d_db[j] = 1.0;
    Ok(MaxoutGrad {
        winner: j,
        d_dw,
        d_db,
        d_dx: unit.weights[j].clone(),
    })
}

/// Binary decision from a probability: 1 iff `p > 0.5`.
pub fn threshold_decode(p: f64) -> u8 {
    u8::from(p > 0.5)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn softmax_reference() {
        let a = softmax(&[2.0, 1.0, 0.1]).unwrap();
        for (got, want) in a.iter().zip([0.659001, 0.242433, 0.0985659]) {
            assert!((got - want).abs() < 1e-6);
        }
        let u = softmax(&[0.0; 3]).unwrap();
        assert!(u.iter().all(|v| (v - 1.0 / 3.0).abs() < 1e-15));
        assert_eq!(softmax(&[]), Err(Error::Empty("logit vector")));
        assert!(softmax(&[1000.0, 0.0]).unwrap()[0] == 1.0);
    }

    #[test]
    fn jacobian_examples() {
        let j = softmax_jacobian(&[0.0, 0.0]).unwrap();
        assert_eq!(j, vec![vec![0.25, -0.25], vec![-0.25, 0.25]]);
        let z = [2.0, 1.0, 0.1];
        let j = softmax_jacobian(&z).unwrap();
        let h = 1e-6;
        for col in 0..3 {
            let mut up = z;
            let mut dn = z;
            up[col] += h;
            dn[col] -= h;
            let (a, b) = (softmax(&up).unwrap(), softmax(&dn).unwrap());
            for row in 0..3 {
                let fd = (a[row] - b[row]) / (2.0 * h);
                assert!((fd - j[row][col]).abs() < 1e-6);
            }
        }
    }

    #[test]
    fn maxout_examples() {
        let u = MaxoutUnit::new(vec![vec![0.0], vec![0.0]], vec![3.0, -1.0]).unwrap();
        assert_eq!(maxout(&[5.0], &u).unwrap(), (3.0, 0));
        let relu = MaxoutUnit::new(vec![vec![1.5, -0.5], vec![0.0, 0.0]], vec![0.0, 0.0]).unwrap();
        for &(a, b) in &[(1.0, 1.0), (-1.0, 2.0), (0.3, -4.0)] {
            let pre = 1.5 * a - 0.5 * b;
            assert_eq!(maxout(&[a, b], &relu).unwrap().0, f64::max(pre, 0.0));
        }
        let tie = MaxoutUnit::new(vec![vec![1.0], vec![1.0]], vec![0.0, 0.0]).unwrap();
        let g = maxout_grad(&[2.0], &tie).unwrap();
        assert_eq!(g.winner, 0);
        assert_eq!(g.d_db, vec![1.0, 0.0]);
        assert!(maxout(&[1.0, 2.0], &tie).is_err());
        assert!(MaxoutUnit::new(vec![vec![1.0]], vec![0.0]).is_err());
    }

    #[test]
    fn maxout_slope_count() {
        let u = MaxoutUnit::new(
            vec![vec![-2.0], vec![-0.5], vec![0.5], vec![2.0]],
            vec![-1.0, 0.0, 0.0, -1.0],
        )
        .unwrap();
        let mut slopes: Vec<f64> = Vec::new();
        for i in -400..400 {
            let x = i as f64 / 100.0;
            let s = ((maxout(&[x + 0.01], &u).unwrap().0 - maxout(&[x], &u).unwrap().0) / 0.01 * 1e6).round() / 1e6;
            if !slopes.contains(&s) && [-2.0, -0.5, 0.5, 2.0].contains(&s) {
                slopes.push(s);
            }
        }
        assert!(slopes.len() <= 4 && slopes.len() >= 2);
    }

    #[test]
    fn maxout_weight_gradient_matches_fd() {
        let u = MaxoutUnit::new(vec![vec![0.3, -1.2], vec![-0.7, 0.4]], vec![0.1, -0.2]).unwrap();
        let x = [0.9, -0.6];
        let g = maxout_grad(&x, &u).unwrap();
        let h = 1e-6;
        for j in 0..2 {
            for d in 0..2 {
                let mut up = u.clone();
                let mut dn = u.clone();
                up.weights[j][d] += h;
                dn.weights[j][d] -= h;
                let fd = (maxout(&x, &up).unwrap().0 - maxout(&x, &dn).unwrap().0) / (2.0 * h);
                assert!((fd - g.d_dw[j][d]).abs() < 1e-6);
            }
        }
    }

    #[test]
    fn threshold_examples() {
        assert_eq!(threshold_decode(0.7), 1);
        assert_eq!(threshold_decode(0.5), 0);
        assert_eq!(threshold_decode(0.0), 0);
    }

    proptest! {
        #[test]
        fn softmax_sums_to_one_and_is_shift_invariant(
            z in prop::collection::vec(-50.0f64..50.0, 1..8),
            c in -100.0f64..100.0,
        ) {
            let a = softmax(&z).unwrap();
            prop_assert!((a.iter().sum::<f64>() - 1.0).abs() < 1e-12);
            let shifted: Vec<f64> = z.iter().map(|v| v + c).collect();
            let b = softmax(&shifted).unwrap();
            let arg = |v: &[f64]| v.iter().enumerate().fold(0, |m, (i, x)| if *x > v[m] { i } else { m });
            prop_assert_eq!(arg(&a), arg(&b));
            let j = softmax_jacobian(&z).unwrap();
            for r in 0..z.len() {
                prop_assert!(j[r].iter().sum::<f64>().abs() < 1e-12);
                for c in 0..z.len() {
                    prop_assert!((j[r][c] - j[c][r]).abs() < 1e-15);
                }
            }
        }

        #[test]
        fn maxout_is_convex_along_lines(
            w in prop::collection::vec(-3.0f64..3.0, 6),
            b in prop::collection::vec(-1.0f64..1.0, 3),
            dir in prop::collection::vec(-1.0f64..1.0, 2),
        ) {
            let u = MaxoutUnit::new(w.chunks(2).map(|c| c.to_vec()).collect(), b).unwrap();
            let f = |t: f64| maxout(&[t * dir[0], t * dir[1]], &u).unwrap().0;
            let h = 0.05;
            for i in -40..40 {
                let t = i as f64 * h;
                prop_assert!(f(t + h) - 2.0 * f(t) + f(t - h) >= -1e-9);
            }
        }
    }
}
