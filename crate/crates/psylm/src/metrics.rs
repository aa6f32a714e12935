//! Human Cloze surprisals and the predictability norm correlation between
//! model and human surprisals.

use std::collections::BTreeMap;
use std::collections::BTreeSet;

use crate::corpus::{ClozeNorm, TokenKey};
use crate::error::{Error, Result};
use crate::surprisal::WordSurprisalSeries;

/// Surprisal values derived from Cloze prediction proportions.
#[derive(Debug, Clone, PartialEq)]
pub struct HumanSurprisalSeries {
    pub values: BTreeMap<TokenKey, f64>,
    pub smoothing_alpha: f64,
    /// Tokens with zero correct responses under alpha = 0, which would have
    /// infinite surprisal and are dropped instead.
    pub excluded: BTreeSet<TokenKey>,
}

/// Pearson correlation between model and human surprisals.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PncResult {
    pub r: f64,
    pub n_pairs: usize,
    pub n_excluded: usize,
}

/// Smoothed Cloze surprisal: p = (n_correct + alpha) / (n_responses + 2 alpha),
/// surprisal = -ln p.
pub fn cloze_surprisal(norms: &[ClozeNorm], alpha: f64) -> Result<HumanSurprisalSeries> {
    if alpha < 0.0 || !alpha.is_finite() {
        return Err(Error::Argument(format!(
            "cloze smoothing alpha must be finite and >= 0, got {alpha}"
        )));
    }
    let mut values = BTreeMap::new();
    let mut excluded = BTreeSet::new();
    for norm in norms {
        let key = (norm.text_id, norm.word_index);
        if alpha == 0.0 && norm.n_correct == 0 {
            excluded.insert(key);
            continue;
        }
        let p = (norm.n_correct as f64 + alpha) / (norm.n_responses as f64 + 2.0 * alpha);
        values.insert(key, -p.ln());
    }
    Ok(HumanSurprisalSeries {
        values,
        smoothing_alpha: alpha,
        excluded,
    })
}

/// Pearson correlation over the keys common to both series.
pub fn pnc(model: &WordSurprisalSeries, human: &HumanSurprisalSeries) -> Result<PncResult> {
    let n_excluded = human
        .excluded
        .iter()
        .filter(|k| model.values.contains_key(k))
        .count();
    let pairs: Vec<(f64, f64)> = human
        .values
        .iter()
        .filter_map(|(k, &h)| model.values.get(k).map(|&s| (s, h)))
        .collect();
    let r = pearson(
        pairs.iter().map(|p| p.0),
        pairs.iter().map(|p| p.1),
        pairs.len(),
    )?;
    Ok(PncResult {
        r,
        n_pairs: pairs.len(),
        n_excluded,
    })
}

/// Two-pass Pearson correlation.
pub fn pearson(
    xs: impl Iterator<Item = f64>,
    ys: impl Iterator<Item = f64>,
    n: usize,
) -> Result<f64> {
    if n < 2 {
        return Err(Error::Argument(format!(
            "correlation requires at least 2 pairs, got {n}"
        )));
    }
    let (xs, ys): (Vec<f64>, Vec<f64>) = (xs.collect(), ys.collect());
    let mean = |v: &[f64]| v.iter().sum::<f64>() / v.len() as f64;
    let (mx, my) = (mean(&xs), mean(&ys));
    let mut sxy = 0.0;
    let mut sxx = 0.0;
    let mut syy = 0.0;
    for (&x, &y) in xs.iter().zip(&ys) {
        sxy += (x - mx) * (y - my);
        sxx += (x - mx) * (x - mx);
        syy += (y - my) * (y - my);
    }
    if sxx == 0.0 || syy == 0.0 {
        return Err(Error::Degenerate(
            "correlation undefined for a zero-variance series".into(),
        ));
    }
    Ok(sxy / (sxx * syy).sqrt())
}

/// Spearman rank correlation; used by the report stage for the qualitative
/// checks between metric rankings.
pub fn spearman(xs: &[f64], ys: &[f64]) -> Result<f64> {
    let rank = |v: &[f64]| -> Vec<f64> {
        let mut idx: Vec<usize> = (0..v.len()).collect();
        idx.sort_by(|&a, &b| v[a].partial_cmp(&v[b]).unwrap());
        let mut ranks = vec![0.0; v.len()];
        let mut i = 0;
        while i < idx.len() {
            let mut j = i;
            while j + 1 < idx.len() && v[idx[j + 1]] == v[idx[i]] {
                j += 1;
            }
            let avg = (i + j) as f64 / 2.0 + 1.0;
            for &k in &idx[i..=j] {
                ranks[k] = avg;
            }
            i = j + 1;
        }
        ranks
    };
    let rx = rank(xs);
    let ry = rank(ys);
    pearson(rx.into_iter(), ry.into_iter(), xs.len())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn norm(idx: u32, responses: u32, correct: u32) -> ClozeNorm {
        ClozeNorm {
            text_id: 1,
            word_index: idx,
            n_responses: responses,
            n_correct: correct,
        }
    }

    fn series(values: &[(u32, f64)]) -> WordSurprisalSeries {
        WordSurprisalSeries {
            model_id: "m".into(),
            values: values.iter().map(|&(i, v)| ((1, i), v)).collect(),
            token_count_lm: values.len() as u64,
        }
    }

    fn human(values: &[(u32, f64)]) -> HumanSurprisalSeries {
        HumanSurprisalSeries {
            values: values.iter().map(|&(i, v)| ((1, i), v)).collect(),
            smoothing_alpha: 0.0,
            excluded: BTreeSet::new(),
        }
    }

    #[test]
    fn all_correct_gives_zero_surprisal() {
        let s = cloze_surprisal(&[norm(0, 25, 25)], 0.0).unwrap();
        assert_eq!(s.values[&(1, 0)], 0.0);
    }

    #[test]
    fn smoothed_zero_correct() {
        let s = cloze_surprisal(&[norm(0, 25, 0)], 0.5).unwrap();
        let want = -(0.5f64 / 26.0).ln();
        assert!((s.values[&(1, 0)] - want).abs() < 1e-12);
        assert!((want - 3.9512).abs() < 1e-4);
    }

    #[test]
    fn unsmoothed_zero_correct_is_excluded() {
        let s = cloze_surprisal(&[norm(0, 25, 0), norm(1, 25, 5)], 0.0).unwrap();
        assert!(s.excluded.contains(&(1, 0)));
        assert!(!s.values.contains_key(&(1, 0)));
        assert!(s.values.contains_key(&(1, 1)));
    }

    #[test]
    fn negative_alpha_rejected() {
        assert!(cloze_surprisal(&[norm(0, 25, 5)], -0.1).is_err());
    }

    #[test]
    fn cloze_surprisal_is_monotone_in_correct_count() {
        for alpha in [0.0, 0.25, 0.5, 1.0] {
            let mut last = f64::INFINITY;
            for correct in 1..=25 {
                let s = cloze_surprisal(&[norm(0, 25, correct)], alpha).unwrap();
                let v = s.values[&(1, 0)];
                assert!(v < last, "alpha {alpha}, correct {correct}");
                last = v;
            }
        }
    }

    #[test]
    fn identical_series_correlate_perfectly() {
        let m = series(&[(0, 1.0), (1, 2.0), (2, 5.0)]);
        let h = human(&[(0, 1.0), (1, 2.0), (2, 5.0)]);
        let r = pnc(&m, &h).unwrap();
        assert!((r.r - 1.0).abs() < 1e-12);
        assert_eq!(r.n_pairs, 3);
    }

    #[test]
    fn reversed_series_anticorrelate() {
        let m = series(&[(0, 3.0), (1, 2.0), (2, 1.0)]);
        let h = human(&[(0, 1.0), (1, 2.0), (2, 3.0)]);
        assert!((pnc(&m, &h).unwrap().r + 1.0).abs() < 1e-12);
    }

    #[test]
    fn hand_computed_pearson() {
        let m = series(&[(0, 0.0), (1, 1.0), (2, 2.0), (3, 4.0)]);
        let h = human(&[(0, 0.0), (1, 1.0), (2, 2.0), (3, 3.0)]);
        let want = 6.5 / 43.75f64.sqrt();
        assert!((pnc(&m, &h).unwrap().r - want).abs() < 1e-12);
        assert!((want - 0.98270).abs() < 1e-5);
    }

    #[test]
    fn excluded_tokens_counted() {
        let m = series(&[(0, 1.0), (1, 2.0), (2, 3.0)]);
        let mut h = human(&[(1, 2.0), (2, 2.5)]);
        h.excluded.insert((1, 0));
        let r = pnc(&m, &h).unwrap();
        assert_eq!(r.n_pairs, 2);
        assert_eq!(r.n_excluded, 1);
    }

    #[test]
    fn degenerate_inputs_error() {
        let m = series(&[(0, 1.0), (1, 1.0)]);
        let h = human(&[(0, 1.0), (1, 2.0)]);
        assert!(matches!(pnc(&m, &h), Err(Error::Degenerate(_))));
        let m = series(&[(0, 1.0)]);
        let h = human(&[(0, 1.0)]);
        assert!(matches!(pnc(&m, &h), Err(Error::Argument(_))));
    }

    #[test]
    fn affine_equivariance() {
        let h = human(&[(0, 0.3), (1, 2.0), (2, 1.1), (3, 4.0), (4, 0.9)]);
        let base = series(&[(0, 1.0), (1, 3.0), (2, 2.0), (3, 5.5), (4, 0.5)]);
        let r0 = pnc(&base, &h).unwrap().r;
        for (a, b) in [(2.0, 1.0), (-1.5, 3.0), (0.25, -2.0)] {
            let scaled = WordSurprisalSeries {
                model_id: "m".into(),
                values: base.values.iter().map(|(&k, &v)| (k, a * v + b)).collect(),
                token_count_lm: base.token_count_lm,
            };
            let r = pnc(&scaled, &h).unwrap().r;
            assert!((r - a.signum() * r0).abs() < 1e-12);
        }
    }

    #[test]
    fn spearman_ranks() {
        // monotone but nonlinear: perfect rank agreement
        let xs = [1.0, 2.0, 3.0, 4.0];
        let ys = [1.0, 10.0, 100.0, 1000.0];
        assert!((spearman(&xs, &ys).unwrap() - 1.0).abs() < 1e-12);
        let ys_rev = [4.0, 3.0, 2.0, 1.0];
        assert!((spearman(&xs, &ys_rev).unwrap() + 1.0).abs() < 1e-12);
    }
}
