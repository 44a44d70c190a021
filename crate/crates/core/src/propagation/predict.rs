use rayon::prelude::*;

use crate::correspondence::{CorrespondenceFilter, FilterReport};
use crate::error::{Error, Result};
use crate::propagation::{compute_affinity, AffinityConfig, AffinityMatrix, MemoryBank};
use crate::scalar::Scalar;
use crate::tensor_store::{FeatureMap, HardMask, SoftMask};

/// The `k` best `(score, row)` pairs of one affinity column, best first.
/// Ties go to the lower row; excluded (`-inf`) entries never qualify.
pub fn top_k<T: Scalar>(column: &[T], k: usize) -> Vec<(T, usize)> {
    let mut best: Vec<(T, usize)> = Vec::with_capacity(k + 1);
    if k == 0 {
        return best;
    }
    for (row, &score) in column.iter().enumerate() {
        if AffinityMatrix::is_excluded(score) {
            continue;
        }
        if best.len() == k && score <= best[k - 1].0 {
            continue;
        }
        // Rows arrive in ascending order, so an equal score lands after its peers.
        let at = best.partition_point(|&(s, _)| s >= score);
        best.insert(at, (score, row));
        best.truncate(k);
    }
    best
}

#[derive(Clone, Debug)]
pub struct Prediction<T> {
    pub mask: SoftMask<T>,
    pub effective_topk: usize,
    /// Requested k exceeded the number of memory pixels.
    pub topk_clamped: bool,
    /// Query pixels whose every candidate was filtered; these fall back to background.
    pub unmatched: usize,
}

/// Predicts the query soft mask from the bank's soft labels: per query pixel,
/// a temperature softmax over its top-k affinity scores weights the matched
/// memory labels.
pub fn propagate_mask<T: Scalar>(
    bank: &MemoryBank<T>,
    affinity: &AffinityMatrix<T>,
    cfg: &AffinityConfig<T>,
) -> Result<Prediction<T>> {
    cfg.validate()?;
    if bank.is_empty() {
        return Err(Error::InvalidArgument("memory bank is empty".into()));
    }
    let first = bank.entry(0);
    let (h, w) = (first.mask.height(), first.mask.width());
    if affinity.slots() != bank.len() || affinity.height() != h || affinity.width() != w {
        return Err(Error::Dimension(format!(
            "affinity {} slots of {}x{} vs bank {} slots of {h}x{w}",
            affinity.slots(),
            affinity.height(),
            affinity.width(),
            bank.len()
        )));
    }
    let hw = h * w;
    let objs = first.mask.objs();
    let planes = objs as usize + 1;
    let rows = affinity.rows();
    let k = cfg.topk.min(rows);
    let masks: Vec<&SoftMask<T>> = bank.entries().map(|e| &e.mask).collect();

    let columns: Vec<Option<Vec<T>>> = (0..hw)
        .into_par_iter()
        .map(|col| {
            let best = top_k(affinity.column(col), k);
            let top = best.first()?.0;
            let mut label = vec![T::zero(); planes];
            let mut total = T::zero();
            for &(score, row) in &best {
                let weight = ((score - top) / cfg.temperature).exp();
                total = total + weight;
                let mask = masks[row / hw];
                let pixel = row % hw;
                for (l, acc) in label.iter_mut().enumerate() {
                    *acc = *acc + weight * mask.prob(l, pixel);
                }
            }
            label.iter_mut().for_each(|v| *v = *v / total);
            Some(label)
        })
        .collect();

    let mut out = vec![T::zero(); planes * hw];
    let mut unmatched = 0;
    for (col, label) in columns.into_iter().enumerate() {
        match label {
            Some(label) => {
                for (l, v) in label.into_iter().enumerate() {
                    out[l * hw + col] = v;
                }
            }
            None => {
                unmatched += 1;
                out[col] = T::one();
            }
        }
    }
    let mut mask = SoftMask::new_unchecked(h, w, objs, out)?;
    mask.renormalize();
    Ok(Prediction {
        mask,
        effective_topk: k,
        topk_clamped: cfg.topk > rows,
        unmatched,
    })
}

/// Per-pixel argmax; ties go to the lowest label, so background wins.
pub fn harden<T: Scalar>(mask: &SoftMask<T>) -> HardMask {
    let hw = mask.pixel_count();
    let labels = (0..hw)
        .map(|p| {
            let mut best = 0usize;
            let mut best_v = mask.prob(0, p);
            for l in 1..mask.plane_count() {
                let v = mask.prob(l, p);
                if v > best_v {
                    best = l;
                    best_v = v;
                }
            }
            best as u8
        })
        .collect();
    HardMask::new(mask.height(), mask.width(), mask.objs(), labels).expect("argmax within objs")
}

#[derive(Clone, Debug)]
pub struct StepOutput<T> {
    pub mask: SoftMask<T>,
    /// Unfiltered affinity, kept for diagnostics.
    pub affinity: AffinityMatrix<T>,
    pub filter: Option<FilterReport>,
    pub effective_topk: usize,
    pub topk_clamped: bool,
    pub unmatched: usize,
}

/// Segments one query frame and appends it to the bank.
pub fn step<T: Scalar>(
    bank: &mut MemoryBank<T>,
    frame_index: u32,
    query: FeatureMap<T>,
    cfg: &AffinityConfig<T>,
    filter: Option<&CorrespondenceFilter>,
) -> Result<StepOutput<T>> {
    let affinity = compute_affinity(bank, &query, cfg)?;
    let (prediction, report) = match filter {
        Some(f) if !f.is_none() => {
            let filtered = f.apply(&affinity)?;
            let report = FilterReport::between(&affinity, &filtered);
            (propagate_mask(bank, &filtered, cfg)?, Some(report))
        }
        _ => (propagate_mask(bank, &affinity, cfg)?, None),
    };
    bank.push(frame_index, query, prediction.mask.clone())?;
    Ok(StepOutput {
        mask: prediction.mask,
        affinity,
        filter: report,
        effective_topk: prediction.effective_topk,
        topk_clamped: prediction.topk_clamped,
        unmatched: prediction.unmatched,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::propagation::Similarity;
    use proptest::prelude::*;

    fn bank_with(features: FeatureMap<f64>, mask: SoftMask<f64>) -> MemoryBank<f64> {
        let mut bank = MemoryBank::new(8, true).unwrap();
        bank.init(0, features, mask).unwrap();
        bank
    }

    #[test]
    fn top_k_orders_and_breaks_ties_low() {
        let col = [1.0, 3.0, 3.0, f64::NEG_INFINITY, 2.0, 3.0];
        assert_eq!(top_k(&col, 3), vec![(3.0, 1), (3.0, 2), (3.0, 5)]);
        assert_eq!(top_k(&col, 4), vec![(3.0, 1), (3.0, 2), (3.0, 5), (2.0, 4)]);
        assert_eq!(top_k(&col, 10).len(), 5);
        assert!(top_k(&[f64::NEG_INFINITY], 2).is_empty());
    }

    #[test]
    fn identity_propagation_with_k1() {
        let data: Vec<f64> = (0..3 * 2 * 3).map(|i| ((i * 37) % 11) as f64).collect();
        let f = FeatureMap::new(3, 2, 3, data).unwrap();
        let hard = HardMask::new(2, 3, 2, vec![0, 1, 2, 2, 1, 0]).unwrap();
        let mask = SoftMask::one_hot(&hard);
        let bank = bank_with(f.clone(), mask.clone());
        for sim in [Similarity::Cos, Similarity::L1, Similarity::L2] {
            let cfg = AffinityConfig::new(sim).with_topk(1);
            let a = compute_affinity(&bank, &f, &cfg).unwrap();
            let p = propagate_mask(&bank, &a, &cfg).unwrap();
            assert_eq!(p.mask, mask, "{sim}");
        }
    }

    #[test]
    fn equal_scores_split_evenly() {
        // Two memory pixels labelled obj1 / obj2, one query pixel, equal scores.
        let hard = HardMask::new(1, 2, 2, vec![1, 2]).unwrap();
        let f = FeatureMap::new(1, 1, 2, vec![0.0, 0.0]).unwrap();
        let bank = bank_with(f, SoftMask::one_hot(&hard));
        let a = AffinityMatrix::from_row_major(1, 1, 2, &[0.3, 0.0, 0.3, 0.0]).unwrap();
        for tau in [0.01, 1.0, 50.0] {
            let cfg = AffinityConfig::new(Similarity::Cos)
                .with_topk(2)
                .with_temperature(tau);
            let p = propagate_mask(&bank, &a, &cfg).unwrap();
            assert_eq!(p.mask.prob(1, 0), 0.5);
            assert_eq!(p.mask.prob(2, 0), 0.5);
            assert_eq!(p.mask.prob(0, 0), 0.0);
        }
    }

    #[test]
    fn hand_built_two_by_two_softmax() {
        // Memory 2x2 with labels [[1,0],[0,2]] -> rows 0..4.
        let hard = HardMask::new(2, 2, 2, vec![1, 0, 0, 2]).unwrap();
        let f = FeatureMap::new(1, 2, 2, vec![0.0; 4]).unwrap();
        let bank = bank_with(f, SoftMask::one_hot(&hard));
        #[rustfmt::skip]
        let rows = [
            2.0, 0.0, 1.0, 0.5,
            1.0, 0.0, 1.0, 0.5,
            0.0, 3.0, 0.5, 0.5,
            0.5, 1.0, 2.0, 0.5,
        ];
        let a = AffinityMatrix::from_row_major(1, 2, 2, &rows).unwrap();
        let cfg = AffinityConfig::new(Similarity::L2)
            .with_topk(2)
            .with_temperature(1.0);
        let p = propagate_mask(&bank, &a, &cfg).unwrap();
        let e = std::f64::consts::E;
        // Brute-force expectation per query pixel.
        let oracle = |picks: &[(f64, u8)]| {
            let top = picks.iter().map(|p| p.0).fold(f64::MIN, f64::max);
            let ws: Vec<f64> = picks.iter().map(|p| e.powf(p.0 - top)).collect();
            let z: f64 = ws.iter().sum();
            let mut out = [0.0; 3];
            for (w, p) in ws.iter().zip(picks) {
                out[p.1 as usize] += w / z;
            }
            out
        };
        let expected = [
            oracle(&[(2.0, 1), (1.0, 0)]),
            oracle(&[(3.0, 0), (1.0, 2)]),
            oracle(&[(2.0, 2), (1.0, 1)]),
            oracle(&[(0.5, 1), (0.5, 0)]),
        ];
        for (q, exp) in expected.iter().enumerate() {
            for l in 0..3 {
                assert!((p.mask.prob(l, q) - exp[l]).abs() < 1e-12, "q={q} l={l}");
            }
        }
    }

    #[test]
    fn oversized_k_is_clamped() {
        let f = FeatureMap::new(1, 1, 2, vec![0.0, 1.0]).unwrap();
        let bank = bank_with(
            f.clone(),
            SoftMask::one_hot(&HardMask::background(1, 2, 0).unwrap()),
        );
        let cfg = AffinityConfig::new(Similarity::L2).with_topk(50);
        let a = compute_affinity(&bank, &f, &cfg).unwrap();
        let p = propagate_mask(&bank, &a, &cfg).unwrap();
        assert!(p.topk_clamped);
        assert_eq!(p.effective_topk, 2);
    }

    #[test]
    fn harden_ties_go_to_background() {
        let m = SoftMask::new(1, 3, 1, vec![0.2f64, 0.5, 0.7, 0.8, 0.5, 0.3]).unwrap();
        assert_eq!(harden(&m).labels(), &[1, 0, 0]);
    }

    #[test]
    fn step_updates_bank_with_prediction() {
        let f = FeatureMap::new(2, 2, 2, vec![1.0, 0.0, 1.0, 0.0, 0.0, 1.0, 0.0, 1.0]).unwrap();
        let hard = HardMask::new(2, 2, 1, vec![1, 0, 1, 0]).unwrap();
        let mut bank = MemoryBank::new(1, true).unwrap();
        bank.init(0, f.clone(), SoftMask::one_hot(&hard)).unwrap();
        let cfg = AffinityConfig::new(Similarity::Cos).with_topk(1);
        for i in 1..4 {
            let out = step(&mut bank, i, f.clone(), &cfg, None).unwrap();
            assert_eq!(harden(&out.mask), hard);
            assert_eq!(bank.frame_indices(), vec![0]);
        }
    }

    proptest! {
        #[test]
        fn harden_matches_max_scan(raw in proptest::collection::vec(0.0f64..1.0, 4 * 9)) {
            // 3 planes over 3x3 + one spare column of randomness.
            let mut planes = raw[..27].to_vec();
            for p in 0..9 {
                let s: f64 = (0..3).map(|l| planes[l * 9 + p]).sum::<f64>() + 1e-9;
                for l in 0..3 { planes[l * 9 + p] /= s; }
            }
            let m = SoftMask::new_unchecked(3, 3, 2, planes.clone()).unwrap();
            let hard = harden(&m);
            for p in 0..9 {
                let vals: Vec<f64> = (0..3).map(|l| planes[l * 9 + p]).collect();
                let max = vals.iter().cloned().fold(f64::MIN, f64::max);
                let first = vals.iter().position(|&v| v == max).unwrap();
                prop_assert_eq!(hard.labels()[p] as usize, first);
            }
        }

        #[test]
        fn propagation_is_convex_combination(
            scores in proptest::collection::vec(-3.0f64..3.0, 16),
            probs in proptest::collection::vec(0.0f64..1.0, 4),
            k in 1usize..5, tau in 0.05f64..5.0
        ) {
            // 2x2 memory with 1 object; soft labels from `probs`.
            let mut planes = vec![0.0; 8];
            for p in 0..4 { planes[4 + p] = probs[p]; planes[p] = 1.0 - probs[p]; }
            let mask = SoftMask::new(2, 2, 1, planes).unwrap();
            let f = FeatureMap::new(1, 2, 2, vec![0.0; 4]).unwrap();
            let bank = bank_with(f, mask);
            let a = AffinityMatrix::from_row_major(1, 2, 2, &scores).unwrap();
            let cfg = AffinityConfig::new(Similarity::L2).with_topk(k).with_temperature(tau);
            let out = propagate_mask(&bank, &a, &cfg).unwrap();
            prop_assert!(out.mask.validate().is_ok());
            for q in 0..4 {
                let picked: Vec<f64> = top_k(a.column(q), k).iter().map(|&(_, r)| probs[r]).collect();
                let lo = picked.iter().cloned().fold(f64::MAX, f64::min);
                let hi = picked.iter().cloned().fold(f64::MIN, f64::max);
                let v = out.mask.prob(1, q);
                prop_assert!(v >= lo - 1e-12 && v <= hi + 1e-12);
            }
        }
    }
}
