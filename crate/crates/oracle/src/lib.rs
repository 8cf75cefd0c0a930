//! Classical reference computations for the kernel classifier.
//!
//! Everything here is plain `f64` arithmetic on 4-vectors. The crate does not
//! depend on the statevector simulator or on the circuit synthesis code, so it
//! can serve as an independent oracle for results obtained through circuits.

use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum OracleError {
    #[error("point ({x}, {y}) is outside the feature map domain (radicand {radicand})")]
    Domain { x: f64, y: f64, radicand: f64 },
    #[error("class {label:+} has no samples")]
    EmptyClass { label: i8 },
    #[error("invalid label {0}, expected +1 or -1")]
    InvalidLabel(i8),
}

/// Radicands down to this value are treated as rounding noise and clamped to 0.
pub const RADICAND_SLACK: f64 = 1e-12;

/// Cone feature map into the unit sphere of R^4.
///
/// `[x, y, sqrt((x^2 + y^2) / 2), sqrt(1 - x^2 - y^2 - (x^2 + y^2) / 2)]`
pub fn feature_map(x: f64, y: f64) -> Result<[f64; 4], OracleError> {
    let cone = ((x * x + y * y) / 2.0).sqrt();
    let radicand = 1.0 - x * x - y * y - cone * cone;
    if !radicand.is_finite() || radicand < -RADICAND_SLACK {
        return Err(OracleError::Domain { x, y, radicand });
    }
    Ok([x, y, cone, radicand.max(0.0).sqrt()])
}

/// Squared Euclidean inner product `(v . w)^2`.
pub fn classical_inner_sq(v: &[f64; 4], w: &[f64; 4]) -> f64 {
    let dot: f64 = v.iter().zip(w).map(|(a, b)| a * b).sum();
    dot * dot
}

/// A training set in oracle form: feature vectors with labels in {+1, -1}.
#[derive(Debug, Clone, PartialEq)]
pub struct ClassicalModel {
    pub samples: Vec<([f64; 4], i8)>,
    pub bias: f64,
}

impl ClassicalModel {
    /// Builds the model and computes its bias with the classical kernel.
    pub fn train(samples: Vec<([f64; 4], i8)>) -> Result<Self, OracleError> {
        let bias = classical_bias(&samples)?;
        Ok(Self { samples, bias })
    }
}

fn check_classes(samples: &[([f64; 4], i8)]) -> Result<(usize, usize), OracleError> {
    let mut pos = 0;
    let mut neg = 0;
    for &(_, label) in samples {
        match label {
            1 => pos += 1,
            -1 => neg += 1,
            other => return Err(OracleError::InvalidLabel(other)),
        }
    }
    if pos == 0 {
        return Err(OracleError::EmptyClass { label: 1 });
    }
    if neg == 0 {
        return Err(OracleError::EmptyClass { label: -1 });
    }
    Ok((pos, neg))
}

/// Class-means offset
/// `b = 1/2 [ m-^-2 sum_{neg,neg} k - m+^-2 sum_{pos,pos} k ]`,
/// evaluated by brute force over all ordered pairs.
pub fn classical_bias(samples: &[([f64; 4], i8)]) -> Result<f64, OracleError> {
    let (pos, neg) = check_classes(samples)?;
    let mut pos_sum = 0.0;
    let mut neg_sum = 0.0;
    for (fi, li) in samples {
        for (fj, lj) in samples {
            if li != lj {
                continue;
            }
            let k = classical_inner_sq(fi, fj);
            if *li == 1 {
                pos_sum += k;
            } else {
                neg_sum += k;
            }
        }
    }
    let (pos, neg) = (pos as f64, neg as f64);
    Ok(0.5 * (neg_sum / (neg * neg) - pos_sum / (pos * pos)))
}

/// Decision value `m+^-1 sum_pos k(x, x_i) - m-^-1 sum_neg k(x, x_i) + b`.
pub fn classical_decision(features: &[f64; 4], model: &ClassicalModel) -> Result<f64, OracleError> {
    let (pos, neg) = check_classes(&model.samples)?;
    let mut pos_sum = 0.0;
    let mut neg_sum = 0.0;
    for (f, label) in &model.samples {
        let k = classical_inner_sq(features, f);
        if *label == 1 {
            pos_sum += k;
        } else {
            neg_sum += k;
        }
    }
    Ok(pos_sum / pos as f64 - neg_sum / neg as f64 + model.bias)
}

/// Sign rule on the decision value; an exact zero maps to +1.
pub fn classical_classify(x: f64, y: f64, model: &ClassicalModel) -> Result<i8, OracleError> {
    let features = feature_map(x, y)?;
    let value = classical_decision(&features, model)?;
    Ok(if value >= 0.0 { 1 } else { -1 })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn inner_sq_examples() {
        let e0 = [1.0, 0.0, 0.0, 0.0];
        let e1 = [0.0, 1.0, 0.0, 0.0];
        assert_eq!(classical_inner_sq(&e0, &e0), 1.0);
        assert_eq!(classical_inner_sq(&e0, &e1), 0.0);
        assert_eq!(classical_inner_sq(&e0, &[0.5; 4]), 0.25);
    }

    #[test]
    fn feature_map_origin_and_corner() {
        assert_eq!(feature_map(0.0, 0.0).unwrap(), [0.0, 0.0, 0.0, 1.0]);
        let f = feature_map(0.54, 0.54).unwrap();
        assert!((f[2] - 0.54).abs() < 1e-15);
        assert!((f[3] - (1.0f64 - 3.0 * 0.2916).sqrt()).abs() < 1e-15);
        assert!(matches!(feature_map(0.8, 0.8), Err(OracleError::Domain { .. })));
    }

    #[test]
    fn singleton_classes() {
        let f = feature_map(0.1, 0.2).unwrap();
        let model = ClassicalModel::train(vec![(f, 1), (f, -1)]).unwrap();
        assert_eq!(model.bias, 0.0);
        // k = 1 for both classes, so the decision value is 1 - 1 + 0 = 0 -> +1.
        assert_eq!(classical_classify(0.1, 0.2, &model).unwrap(), 1);

        let g = feature_map(0.0, 0.0).unwrap();
        let model = ClassicalModel::train(vec![(f, 1), (g, -1)]).unwrap();
        assert!(model.bias.abs() < 1e-15);
        let value = classical_decision(&g, &model).unwrap();
        let k = classical_inner_sq(&f, &g);
        assert!((value - (k - 1.0)).abs() < 1e-14);
        assert_eq!(classical_classify(0.0, 0.0, &model).unwrap(), -1);
    }

    #[test]
    fn empty_class_and_bad_label() {
        let f = [0.0, 0.0, 0.0, 1.0];
        assert_eq!(classical_bias(&[(f, 1)]), Err(OracleError::EmptyClass { label: -1 }));
        assert_eq!(classical_bias(&[(f, -1)]), Err(OracleError::EmptyClass { label: 1 }));
        assert_eq!(classical_bias(&[(f, 1), (f, 0)]), Err(OracleError::InvalidLabel(0)));
    }

    fn unit4() -> impl Strategy<Value = [f64; 4]> {
        prop::array::uniform4(-1.0f64..1.0)
            .prop_filter("non-zero", |v| v.iter().map(|x| x * x).sum::<f64>() > 1e-6)
            .prop_map(|v| {
                let n = v.iter().map(|x| x * x).sum::<f64>().sqrt();
                v.map(|x| x / n)
            })
    }

    proptest! {
        #[test]
        fn inner_sq_symmetric_and_bounded(v in unit4(), w in unit4()) {
            let a = classical_inner_sq(&v, &w);
            let b = classical_inner_sq(&w, &v);
            prop_assert!((a - b).abs() < 1e-15);
            prop_assert!(a <= 1.0 + 1e-12);
            prop_assert!((classical_inner_sq(&v, &v) - 1.0).abs() < 1e-12);
        }

        #[test]
        fn feature_map_is_unit(x in -0.54f64..0.54, y in -0.54f64..0.54) {
            let f = feature_map(x, y).unwrap();
            let n: f64 = f.iter().map(|c| c * c).sum();
            prop_assert!((n - 1.0).abs() < 1e-12);
            prop_assert!(f[2] >= 0.0 && f[3] >= 0.0);
        }
    }
}
