use alloc::string::String;
use alloc::vec::Vec;

use num_traits::Float;
use serde::{Deserialize, Serialize};

use super::logit::LogitModel;
use crate::textfeat::FeatureVector;
use crate::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FatigueScore {
    pub note_id: String,
    pub probability: f64,
    /// `probability` z-scored against the reference set.
    pub standardized: f64,
}

/// Scores raw feature vectors and standardizes the probabilities with the
/// mean and population SD over `reference` (indices into `vectors`).
pub fn score_notes(model: &LogitModel, vectors: &[FeatureVector], reference: &[usize]) -> Result<Vec<FatigueScore>> {
    if reference.is_empty() {
        return Err(Error::Empty("fatigue reference set"));
    }
    let probs = vectors.iter().map(|v| model.predict_raw(&v.values)).collect::<Result<Vec<f64>>>()?;
    let mut refs = Vec::with_capacity(reference.len());
    for &i in reference {
        refs.push(*probs.get(i).ok_or(Error::Dimension { expected: probs.len(), got: i + 1 })?);
    }
    let n = refs.len() as f64;
    let mean = refs.iter().sum::<f64>() / n;
    let sd = (refs.iter().map(|p| (p - mean) * (p - mean)).sum::<f64>() / n).sqrt();
    Ok(vectors
        .iter()
        .zip(probs)
        .map(|(v, p)| FatigueScore {
            note_id: v.note_id.clone(),
            probability: p,
            standardized: if sd > 0.0 { (p - mean) / sd } else { 0.0 },
        })
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mlcore::logit::sigmoid;
    use alloc::collections::BTreeMap;
    use alloc::vec;

    fn model() -> LogitModel {
        LogitModel {
            feature_names: vec!["a".into(), "b".into()],
            weights: vec![0.8, -0.3],
            intercept: 0.2,
            lambda: 1.0,
            standardizer: None,
            provenance: BTreeMap::new(),
            iterations: 0,
        }
    }

    fn fv(id: &str, values: [f64; 2]) -> FeatureVector {
        FeatureVector { note_id: id.into(), values: values.to_vec() }
    }

    #[test]
    fn zero_vector_is_sigmoid_of_intercept() {
        let s = score_notes(&model(), &[fv("z", [0.0, 0.0]), fv("y", [1.0, 0.0])], &[0, 1]).unwrap();
        assert_eq!(s[0].probability, sigmoid(0.2));
    }

    #[test]
    fn reference_set_is_unit_scaled() {
        let vs: Vec<FeatureVector> = (0..25).map(|i| fv("n", [i as f64 * 0.1, (i % 4) as f64])).collect();
        let reference: Vec<usize> = (0..25).collect();
        let s = score_notes(&model(), &vs, &reference).unwrap();
        let z: Vec<f64> = s.iter().map(|f| f.standardized).collect();
        let m = z.iter().sum::<f64>() / 25.0;
        let v = z.iter().map(|x| (x - m) * (x - m)).sum::<f64>() / 25.0;
        assert!(m.abs() < 1e-12 && (v - 1.0).abs() < 1e-12);
    }

    #[test]
    fn errors() {
        assert!(score_notes(&model(), &[fv("a", [0.0, 0.0])], &[]).is_err());
        let bad = FeatureVector { note_id: "x".into(), values: vec![1.0] };
        assert!(matches!(score_notes(&model(), &[bad], &[0]), Err(Error::Dimension { .. })));
    }
}
