mod common;

use common::*;
use proptest::prelude::*;
use pvarlab::segmentation::{spikeless_segments, SpikeTrain, SpikeWindow};
use pvarlab::series::{Segment, SegmentSet, TimeSeries};
use pvarlab::variations::{bhat, segment_variation, total_variation, Gamma, VariationParams, VariationTable};

fn params(p: f64, m: usize, gamma: f64, c: f64) -> VariationParams {
    let g = if gamma.is_infinite() { Gamma::INFINITE } else { Gamma::new(gamma).unwrap() };
    VariationParams::new(p, m, g).unwrap().with_trunc_multiplier(c).unwrap()
}

fn series_and_segment() -> impl Strategy<Value = (Vec<f64>, f64, usize, usize)> {
    (any::<u64>(), 2usize..200, 1e-4f64..1.0).prop_flat_map(|(seed, len, dt)| {
        let x = random_series(&mut rng(seed), len);
        (Just(x), Just(dt), 0..len - 1).prop_flat_map(move |(x, dt, i0)| (Just(x), Just(dt), Just(i0), i0 + 1..len))
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(512))]

    #[test]
    fn segment_variation_matches_oracle(
        (x, dt, i0, i1) in series_and_segment(),
        p in prop::sample::select(vec![0.5, 1.0, 1.5, 2.0, 3.0, 4.0, 5.5]),
        m in 1usize..12,
        gamma in prop::sample::select(vec![0.5, 2.0, 7.0, f64::INFINITY]),
        c in prop::sample::select(vec![1.0, 3.0]),
    ) {
        let ts = TimeSeries::new(dt, 0.0, x.clone()).unwrap();
        let got = segment_variation(&ts, Segment::new(i0, i1).unwrap(), &params(p, m, gamma, c)).unwrap();
        let want = oracle_segment_variation(&x, i0, i1, p, m, gamma, dt, c);
        match (got, want) {
            (Some(g), Some(w)) => prop_assert!(rel_err(g, w) <= 1e-12, "{g} vs {w}"),
            (None, None) => {}
            other => prop_assert!(false, "admissibility mismatch {other:?}"),
        }
    }

    #[test]
    fn bhat_matches_oracle((x, dt, s0, t1) in series_and_segment(), p in 0.2f64..6.0, m in 1usize..12) {
        let ts = TimeSeries::new(dt, 0.0, x.clone()).unwrap();
        prop_assume!(t1 - s0 >= m);
        let got = bhat(&ts, s0, t1, p, m).unwrap();
        prop_assert!(rel_err(got, oracle_bhat(&x, s0, t1, p, m)) <= 1e-12);
    }

    #[test]
    fn table_and_total_match_oracle(seed in any::<u64>(), len in 20usize..300, cut in 3usize..15) {
        let x = random_series(&mut rng(seed), len);
        let ts = TimeSeries::new(1e-3, 0.0, x.clone()).unwrap();
        // two segments with a gap of `cut` samples
        let mid = len / 2;
        let segs = SegmentSet::new(
            vec![Segment::new(0, mid.saturating_sub(cut).max(1)).unwrap(), Segment::new(mid, len - 1).unwrap()],
            len,
        ).unwrap();
        let ps = [0.5, 2.0, 4.0];
        let ms = [1, 2, 5, 9];
        let gammas = [Gamma::new(1.0).unwrap(), Gamma::new(30.0).unwrap(), Gamma::INFINITE];
        let table = VariationTable::compute(&ts, &segs, &ps, &ms, &gammas, 3.0).unwrap();
        for (mi, &m) in ms.iter().enumerate() {
            for (gi, g) in gammas.iter().enumerate() {
                for (pi, &p) in ps.iter().enumerate() {
                    let parts: Vec<f64> = segs.segments().iter()
                        .filter_map(|s| oracle_segment_variation(&x, s.i0, s.i1, p, m, g.value(), 1e-3, 3.0))
                        .collect();
                    let want: Option<f64> = (!parts.is_empty()).then(|| parts.iter().sum());
                    let got = table.value(mi, gi, pi);
                    match (got, want) {
                        (Some(a), Some(b)) => {
                            prop_assert!(rel_err(a, b) <= 1e-12);
                            let direct = total_variation(&ts, &segs, &params(p, m, g.value(), 3.0)).unwrap();
                            prop_assert!(rel_err(direct.value, b) <= 1e-12);
                        }
                        (None, None) => {}
                        other => prop_assert!(false, "{other:?}"),
                    }
                }
            }
        }
    }

    #[test]
    fn excision_matches_oracle(
        n in 2usize..3000,
        dt in prop::sample::select(vec![1e-3, 6e-4, 2e-4, 0.01]),
        raw in prop::collection::vec(0.0f64..1.0, 0..8),
        grid_aligned in any::<bool>(),
        pre in prop::sample::select(vec![0.0, 0.01, 0.12]),
        post in prop::sample::select(vec![0.0, 0.02, 0.18]),
    ) {
        let duration = (n - 1) as f64 * dt;
        let mut times: Vec<f64> = raw.iter().map(|u| {
            let t = u * duration;
            if grid_aligned { (t / dt).round() * dt } else { t }
        }).collect();
        times.sort_by(f64::total_cmp);
        times.dedup();
        let ts = TimeSeries::new(dt, 0.0, vec![0.0; n]).unwrap();
        let train = SpikeTrain::new(times.clone()).unwrap();
        let got: Vec<(usize, usize)> = spikeless_segments(&ts, &train, SpikeWindow::new(pre, post).unwrap())
            .segments().iter().map(|s| (s.i0, s.i1)).collect();
        prop_assert_eq!(got, oracle_segments(n, dt, 0.0, &times, pre, post));
    }
}

#[test]
fn oracle_self_check_on_hand_example() {
    // increments 1, 2, -3, 4: V(2, M=1) = 1 + 4 + 9 + 16
    let x = [0.0, 1.0, 3.0, 0.0, 4.0];
    assert_eq!(oracle_segment_variation(&x, 0, 4, 2.0, 1, f64::INFINITY, 1.0, 3.0), Some(30.0));
    // M=2 increments 3, -1, 1: (9 + 1 + 1) / 2
    assert_eq!(oracle_segment_variation(&x, 0, 4, 2.0, 2, f64::INFINITY, 1.0, 3.0), Some(5.5));
    // threshold 3 * sqrt(1) * 1 = 3 keeps 1, 2, -3 only
    assert_eq!(oracle_segment_variation(&x, 0, 4, 2.0, 1, 1.0, 1.0, 3.0), Some(14.0));
    assert_eq!(oracle_bhat(&x, 0, 4, 2.0, 2), 9.0 + 1.0);
    assert_eq!(oracle_segments(11, 1.0, 0.0, &[5.0], 2.0, 2.0), vec![(0, 3), (7, 10)]);
}
