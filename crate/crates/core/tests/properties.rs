use proptest::prelude::*;

use did_miss::principal::principal_scores;
use did_miss::stats::mean;
use did_miss::{
    att_ar_bounds, att_iv, att_iv_multi, att_principal_ignorability, compute_rates, did_complete_case,
    load_panel_auto, naive_did_all, trimmed_mean, write_panel_csv, Mode, OutcomeSupport, PanelDataset, PanelRecord,
    Result, Side,
};

const BOUND: f64 = 10.0;

/// Half-integer outcome in [-BOUND, BOUND]; sums of these are exact.
fn outcome() -> impl Strategy<Value = f64> {
    (-20i32..=20).prop_map(|k| k as f64 * 0.5)
}

fn maybe_outcome(missing: f64) -> impl Strategy<Value = Option<f64>> {
    let w = (missing * 100.0) as u32;
    prop_oneof![100 - w => outcome().prop_map(Some), w => Just(None)]
}

/// One complete record per (arm, aux pattern, covariate cell) so every
/// estimator has something in each cell, followed by random records.
fn panel(aux: usize, cells: u32, missing: f64) -> impl Strategy<Value = Vec<PanelRecord>> {
    let seeds = 2 * (1usize << aux) * cells as usize;
    let fixed = prop::collection::vec((outcome(), outcome()), seeds);
    let random = prop::collection::vec(
        (
            any::<bool>(),
            maybe_outcome(missing / 2.0),
            maybe_outcome(missing),
            prop::collection::vec(any::<bool>(), aux),
            0..cells,
        ),
        0..60,
    );
    (fixed, random).prop_map(move |(fixed, random)| {
        let mut out = Vec::new();
        for (i, (y1, y2)) in fixed.into_iter().enumerate() {
            let d = i % 2 == 1;
            let bits = (i / 2) % (1 << aux);
            let x = (i / 2 / (1 << aux)) as u32;
            out.push(
                PanelRecord::new(format!("s{i}"), d, Some(y1), Some(y2))
                    .with_aux((0..aux).map(|k| bits >> k & 1 == 1).collect())
                    .with_covariates(vec![x]),
            );
        }
        for (i, (d, y1, y2, a, x)) in random.into_iter().enumerate() {
            out.push(PanelRecord::new(format!("r{i}"), d, y1, y2).with_aux(a).with_covariates(vec![x]));
        }
        out
    })
}

fn dataset(records: Vec<PanelRecord>) -> PanelDataset {
    PanelDataset::new(records, Some(OutcomeSupport::new(-BOUND, BOUND).unwrap())).unwrap()
}

fn map(data: &PanelDataset, f: impl Fn(&PanelRecord) -> PanelRecord) -> PanelDataset {
    data.with_support(None).unwrap().map_records(f).unwrap()
}

/// Both succeed and agree to a relative tolerance, or both fail alike.
fn close(a: Result<f64>, b: Result<f64>, tol: f64) -> bool {
    match (a, b) {
        (Ok(a), Ok(b)) => (a - b).abs() <= tol * (1.0 + a.abs().max(b.abs())),
        (Err(a), Err(b)) => a.to_string() == b.to_string(),
        _ => false,
    }
}

fn close_pair(a: Result<(f64, f64)>, b: Result<(f64, f64)>, tol: f64) -> bool {
    match (a, b) {
        (Ok(a), Ok(b)) => close(Ok(a.0), Ok(b.0), tol) && close(Ok(a.1), Ok(b.1), tol),
        (Err(a), Err(b)) => a.to_string() == b.to_string(),
        _ => false,
    }
}

fn bounds(data: &PanelDataset, mode: Mode) -> Result<(f64, f64)> {
    att_ar_bounds(data, mode).map(|b| (b.lb, b.ub))
}

fn rate_values(data: &PanelDataset) -> Vec<Option<f64>> {
    let t = compute_rates(data);
    let mut v: Vec<Option<f64>> = Vec::new();
    for d in 0..2 {
        v.extend([t.p_r1[d].value(), t.p_r2[d].value(), t.p_r2_given_r1[d].value()]);
        for k in &t.p_r2_given_aux[d] {
            v.extend(k.iter().map(|r| r.value()));
        }
    }
    v
}

proptest! {
    #![proptest_config(ProptestConfig { cases: 128, failure_persistence: None, ..ProptestConfig::default() })]

    #[test]
    fn csv_round_trip(records in panel(2, 3, 0.3)) {
        let data = dataset(records);
        let mut buf = Vec::new();
        write_panel_csv(&data, &mut buf).unwrap();
        let back = load_panel_auto(buf.as_slice(), None).unwrap();
        prop_assert_eq!(back.to_records(), data.to_records());
    }

    #[test]
    fn rates_invariant_to_duplication(records in panel(1, 1, 0.4)) {
        let data = dataset(records);
        prop_assert_eq!(rate_values(&data.concat(&data).unwrap()), rate_values(&data));
    }

    #[test]
    fn counting_identity(records in panel(1, 1, 0.5)) {
        let data = dataset(records);
        for d in 0..2 {
            let arm = || data.iter().filter(|r| r.arm() == d);
            let both = arm().filter(|r| r.r1() && r.r2()).count();
            prop_assert!(both <= arm().filter(|r| r.r2()).count());
            prop_assert!(both <= arm().filter(|r| r.r1()).count());
        }
    }

    #[test]
    fn complete_case_location_and_scale(records in panel(0, 1, 0.3), c in -5i32..5, k in -3i32..4, a in 0.1f64..10.0) {
        let data = dataset(records);
        let cc = did_complete_case(&data).unwrap().point;
        let shifted = map(&data, |r| PanelRecord { y2: r.y2.map(|v| v + c as f64), ..r.clone() });
        prop_assert!((did_complete_case(&shifted).unwrap().point - cc).abs() < 1e-12);

        let scale = |f: f64| map(&data, move |r| PanelRecord { y1: r.y1.map(|v| v * f), y2: r.y2.map(|v| v * f), ..r.clone() });
        let p2 = 2f64.powi(k);
        prop_assert_eq!(did_complete_case(&scale(p2)).unwrap().point, cc * p2);
        let scaled = did_complete_case(&scale(a)).unwrap().point;
        prop_assert!((scaled - a * cc).abs() <= 1e-12 * (1.0 + (a * cc).abs()));
    }

    #[test]
    fn estimates_invariant_to_record_order(
        (records, perm) in panel(1, 2, 0.3).prop_flat_map(|r| (Just(r.clone()), Just(r).prop_shuffle()))
    ) {
        let data = dataset(records);
        let other = dataset(perm);
        prop_assert_eq!(rate_values(&data), rate_values(&other));
        prop_assert!(close(did_complete_case(&data).map(|e| e.point), did_complete_case(&other).map(|e| e.point), 1e-12));
        prop_assert!(close(att_iv(&data, 0).map(|r| r.0.point), att_iv(&other, 0).map(|r| r.0.point), 1e-9));
        prop_assert!(close(
            att_principal_ignorability(&data).map(|r| r.estimate.point),
            att_principal_ignorability(&other).map(|r| r.estimate.point),
            1e-9
        ));
        for mode in [Mode::Monotone, Mode::NoMonotone] {
            prop_assert!(close_pair(bounds(&data, mode), bounds(&other, mode), 1e-12));
        }
    }

    #[test]
    fn full_response_collapses(records in panel(2, 1, 0.0)) {
        let data = dataset(records);
        let cc = did_complete_case(&data).unwrap().point;
        prop_assert_eq!(naive_did_all(&data).unwrap().point, cc);
        for r in [att_iv(&data, 0), att_iv(&data, 1), att_iv_multi(&data, 0, 1)] {
            match r {
                Ok((e, _)) => prop_assert_eq!(e.point, cc),
                Err(e) => prop_assert!(matches!(e, did_miss::Error::DegenerateInstrumentPair(..)), "{e}"),
            }
        }
        let b = att_ar_bounds(&data, Mode::Monotone).unwrap();
        prop_assert_eq!((b.lb, b.ub), (cc, cc));
    }

    #[test]
    fn instrument_relabeling(records in panel(1, 1, 0.4)) {
        let data = dataset(records);
        let flipped = map(&data, |r| PanelRecord { aux: r.aux.iter().map(|a| !a).collect(), ..r.clone() });
        // A weak-instrument refusal reports the signed denominator, so only
        // the outcome kind is compared on failure.
        match (att_iv(&data, 0), att_iv(&flipped, 0)) {
            (Ok(a), Ok(b)) => prop_assert!((a.0.point - b.0.point).abs() <= 1e-12 * (1.0 + a.0.point.abs())),
            (Err(a), Err(b)) => prop_assert_eq!(std::mem::discriminant(&a), std::mem::discriminant(&b)),
            (a, b) => prop_assert!(false, "{:?} vs {:?}", a.map(|r| r.0.point), b.map(|r| r.0.point)),
        }
    }

    #[test]
    fn iv_location_and_scale(records in panel(1, 1, 0.4), c in -5i32..5, k in -3i32..4) {
        let data = dataset(records);
        let base = att_iv(&data, 0).map(|r| r.0.point);
        let shifted = map(&data, |r| PanelRecord { y2: r.y2.map(|v| v + c as f64), ..r.clone() });
        prop_assert!(close(att_iv(&shifted, 0).map(|r| r.0.point), att_iv(&data, 0).map(|r| r.0.point), 1e-9));
        let p2 = 2f64.powi(k);
        let scaled = map(&data, |r| PanelRecord { y1: r.y1.map(|v| v * p2), y2: r.y2.map(|v| v * p2), ..r.clone() });
        prop_assert!(close(att_iv(&scaled, 0).map(|r| r.0.point), base.map(|v| v * p2), 1e-12));
    }

    #[test]
    fn trimmed_mean_ordering(values in prop::collection::vec(-50i32..50, 1..40), k in 1u32..=20) {
        let v: Vec<f64> = values.iter().map(|&x| x as f64).collect();
        let m = mean(&v);
        let constant = v.iter().all(|&x| x == v[0]);
        let keep = k as f64 / 20.0;
        let lo = trimmed_mean(&v, keep, Side::Bottom).unwrap();
        let hi = trimmed_mean(&v, keep, Side::Top).unwrap();
        prop_assert!(lo <= m + 1e-12 && m <= hi + 1e-12);
        if keep < 1.0 && !constant {
            prop_assert!(lo < m && m < hi);
        } else {
            prop_assert!((lo - m).abs() < 1e-12 && (hi - m).abs() < 1e-12);
        }
    }

    #[test]
    fn trimmed_mean_monotone_in_keep(values in prop::collection::vec(-50.0f64..50.0, 1..40)) {
        let mut prev = (f64::NEG_INFINITY, f64::INFINITY);
        for k in 1..=20 {
            let keep = k as f64 / 20.0;
            let lo = trimmed_mean(&values, keep, Side::Bottom).unwrap();
            let hi = trimmed_mean(&values, keep, Side::Top).unwrap();
            prop_assert!(lo >= prev.0 - 1e-12 && hi <= prev.1 + 1e-12);
            prev = (lo, hi);
        }
    }

    #[test]
    fn bounds_shift_invariance(records in panel(0, 1, 0.4), c in -5i32..5) {
        let data = dataset(records);
        let c = c as f64;
        let both = map(&data, |r| PanelRecord { y1: r.y1.map(|v| v + c), y2: r.y2.map(|v| v + c), ..r.clone() });
        let post = map(&data, |r| PanelRecord { y2: r.y2.map(|v| v + c), ..r.clone() });
        let plain = data.with_support(None).unwrap();
        for mode in [Mode::Monotone, Mode::NoMonotone] {
            prop_assert!(close_pair(bounds(&both, mode), bounds(&plain, mode), 0.0));
            prop_assert!(close_pair(bounds(&post, mode), bounds(&plain, mode), 1e-12));
        }
    }

    #[test]
    fn bounds_ordered_and_nested(records in panel(0, 1, 0.5)) {
        let data = dataset(records);
        let m = att_ar_bounds(&data, Mode::Monotone).unwrap();
        let nm = att_ar_bounds(&data, Mode::NoMonotone).unwrap();
        prop_assert!(m.lb <= m.ub && nm.lb <= nm.ub);
        prop_assert!(nm.lb <= m.lb + 1e-12 && m.ub <= nm.ub + 1e-12, "{:?} vs {:?}", (m.lb, m.ub), (nm.lb, nm.ub));
    }

    #[test]
    fn principal_weights_normalize(records in panel(0, 3, 0.4)) {
        let data = dataset(records);
        let t = principal_scores(&data).unwrap();
        for s in 0..3 {
            if t.normalizers[s] > 0.0 {
                let total: f64 = (0..t.cells.len()).map(|c| t.treated_share[c] * t.weight(s, c).unwrap()).sum();
                prop_assert!((total - 1.0).abs() < 1e-9, "stratum {s}: {total}");
            }
        }
    }

    #[test]
    fn principal_invariant_to_duplication(records in panel(0, 3, 0.4)) {
        let data = dataset(records);
        let twice = data.concat(&data).unwrap();
        prop_assert!(close(
            att_principal_ignorability(&data).map(|r| r.estimate.point),
            att_principal_ignorability(&twice).map(|r| r.estimate.point),
            1e-9
        ));
    }
}
