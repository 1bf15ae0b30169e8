use super::*;
use crate::qcore::{bloch_to_rho, fidelity_proxy, CMat2, DensityMatrix, RawPrediction, C64};
use crate::sim::{simulate_trajectory, DatasetSpec, TrajectorySet};

fn set(n: usize, seed: u64) -> TrajectorySet {
    let spec = DatasetSpec::default().with_steps(300);
    let trajectories = (0..n).map(|i| simulate_trajectory(&spec.sample_params(seed, i)).unwrap()).collect();
    TrajectorySet { steps: 300, dt: spec.dt, eta: spec.eta, trajectories }
}

fn truth_states(s: &TrajectorySet) -> Vec<Vec<DensityMatrix>> {
    s.trajectories.iter().map(|t| t.states.iter().map(|b| bloch_to_rho(*b).unwrap()).collect()).collect()
}

#[test]
fn ground_truth_scores_perfectly() {
    let s = set(4, 1);
    let r = evaluate_states("truth", "filter", &truth_states(&s), &s, "abc").unwrap();
    let a = &r.aggregate;
    assert!((a.fid_full - 1.0).abs() < 1e-9, "{}", a.fid_full);
    assert!(a.bloch_err < 1e-12);
    assert!(a.vtr_max < 1e-14);
    assert!(a.physical);
    // Proxy fidelity of a state with itself is its purity.
    let purity: f64 = s.trajectories[0].states.iter().map(|b| 0.5 * (1.0 + b.norm().powi(2))).sum::<f64>()
        / s.trajectories[0].len() as f64;
    assert!((r.trajectories[0].fid_proxy - purity).abs() < 1e-12);
}

#[test]
fn maximally_mixed_scores_one_half() {
    let s = set(3, 2);
    let states: Vec<Vec<DensityMatrix>> =
        s.trajectories.iter().map(|t| vec![DensityMatrix::maximally_mixed(); t.len()]).collect();
    let r = evaluate_states("mixed", "filter", &states, &s, "abc").unwrap();
    assert!((r.aggregate.fid_proxy - 0.5).abs() < 1e-12);
    assert!((r.aggregate.fid_p1 - 0.5).abs() < 1e-12);
    assert!((r.aggregate.fid_p2 - 0.5).abs() < 1e-12);
}

#[test]
fn aggregates_are_recomputable_from_rows() {
    let s = set(6, 3);
    let states: Vec<Vec<DensityMatrix>> = s
        .trajectories
        .iter()
        .map(|t| t.states.iter().map(|b| bloch_to_rho(crate::qcore::BlochVector { z: b.z * 0.5, ..*b }).unwrap()).collect())
        .collect();
    let r = evaluate_states("half", "filter", &states, &s, "abc").unwrap();
    // Independent per-step recomputation of the mean proxy fidelity.
    let mut total = 0.0;
    for (traj, st) in s.trajectories.iter().zip(&states) {
        let f: f64 = st.iter().zip(&traj.states).map(|(p, b)| fidelity_proxy(p, &bloch_to_rho(*b).unwrap())).sum();
        total += f / traj.len() as f64;
    }
    assert!((r.aggregate.fid_proxy - total / 6.0).abs() < 1e-12);
    let mean_b: f64 = r.trajectories.iter().map(|t| t.bures).sum::<f64>() / 6.0;
    assert!((r.aggregate.bures - mean_b).abs() < 1e-12);
    assert_eq!(r.aggregate.n_traj, 6);
}

#[test]
fn phase_split_uses_the_switch_step() {
    let s = set(2, 4);
    let truth = truth_states(&s);
    let states: Vec<Vec<DensityMatrix>> = s
        .trajectories
        .iter()
        .zip(&truth)
        .map(|(t, tr)| {
            (0..t.len()).map(|i| if i < t.tau() { tr[i] } else { DensityMatrix::maximally_mixed() }).collect()
        })
        .collect();
    let r = evaluate_states("split", "filter", &states, &s, "abc").unwrap();
    for row in &r.trajectories {
        assert!((row.fid_p2 - 0.5).abs() < 1e-12);
        assert!(row.fid_p1 > 0.9);
    }
}

#[test]
fn unphysical_predictions_are_flagged() {
    let s = set(2, 5);
    let bad = CMat2([[C64::new(1.2, 0.0), C64::new(0.0, 0.0)], [C64::new(0.0, 0.0), C64::new(-0.1, 0.0)]]);
    let preds: Vec<Vec<RawPrediction>> =
        s.trajectories.iter().map(|t| vec![RawPrediction::new(bad); t.len()]).collect();
    let comp = vec![Vec::new(); 2];
    let r = evaluate_predictions("gru", "direct", &preds, &comp, &s, "abc").unwrap();
    assert!(!r.aggregate.physical);
    assert!((r.aggregate.vtr_max - 0.1).abs() < 1e-12);
    assert!((r.aggregate.vpsd_max - 0.1).abs() < 1e-12);
    assert!((r.aggregate.lambda_min + 0.1).abs() < 1e-12);
}

#[test]
fn shape_mismatch_is_rejected() {
    let s = set(2, 6);
    let mut states = truth_states(&s);
    states[1].pop();
    assert!(evaluate_states("x", "filter", &states, &s, "abc").is_err());
    assert!(evaluate_states("x", "filter", &states[..1], &s, "abc").is_err());
}

#[test]
fn reports_round_trip_through_json_and_csv() {
    let s = set(3, 7);
    let r = evaluate_states("truth", "filter", &truth_states(&s), &s, "abc").unwrap();
    let dir = tempfile::tempdir().unwrap();
    let jp = dir.path().join("r.json");
    write_report(&jp, &r).unwrap();
    assert_eq!(read_report(&jp).unwrap(), r);

    let cp = dir.path().join("r.csv");
    write_csv(&cp, &[r.clone(), r.clone()]).unwrap();
    let text = std::fs::read_to_string(&cp).unwrap();
    assert_eq!(text.lines().next().unwrap(), CSV_HEADER);
    let rows = read_csv(&cp).unwrap();
    assert_eq!(rows.len(), 2);
    let a = &r.aggregate;
    assert_eq!(rows[0].2[1].to_bits(), a.fid_proxy.to_bits());
    assert_eq!(rows[0].2[12].to_bits(), a.bloch_err.to_bits());
    assert_eq!(rows[0].3, a.physical);
}

#[test]
fn ablation_requires_a_shared_test_set() {
    let s = set(2, 8);
    let truth = evaluate_states("gru", "kraus", &truth_states(&s), &s, "abc").unwrap();
    let mixed: Vec<Vec<DensityMatrix>> =
        s.trajectories.iter().map(|t| vec![DensityMatrix::maximally_mixed(); t.len()]).collect();
    let base = evaluate_states("gru", "direct", &mixed, &s, "abc").unwrap();
    let d = ablation_delta(&truth, &base).unwrap();
    assert!((d.delta_fid_proxy - (truth.aggregate.fid_proxy - 0.5)).abs() < 1e-12);
    let other = EvalReport { test_sha256: "def".into(), ..base };
    assert!(matches!(ablation_delta(&truth, &other), Err(crate::Error::Digest(_))));
}

#[test]
fn merged_table_pairs_heads_per_backbone() {
    let s = set(2, 9);
    let truth = evaluate_states("gru", "kraus", &truth_states(&s), &s, "abc").unwrap();
    let mixed: Vec<Vec<DensityMatrix>> =
        s.trajectories.iter().map(|t| vec![DensityMatrix::maximally_mixed(); t.len()]).collect();
    let direct = evaluate_states("gru", "direct", &mixed, &s, "abc").unwrap();
    let lone = evaluate_states("lstm", "kraus", &mixed, &s, "abc").unwrap();
    let t = merge_reports(&[truth.clone(), direct.clone(), lone]).unwrap();
    assert_eq!(t.deltas.len(), 1);
    let same = merge_reports(&[truth.clone(), EvalReport { head: "direct".into(), ..truth.clone() }]).unwrap();
    assert_eq!(same.deltas[0].delta_fid_proxy, 0.0);
    let csv = t.to_csv();
    let lines: Vec<&str> = csv.lines().collect();
    assert_eq!(lines.len(), 4);
    assert!(lines[0].ends_with(",physical,delta_fid_proxy"));
    assert!(!lines[1].ends_with(','));
    assert!(lines[2].ends_with(',') && lines[3].ends_with(','));
    let other = EvalReport { test_sha256: "zzz".into(), ..direct };
    assert!(matches!(merge_reports(&[truth, other]), Err(crate::Error::Digest(_))));
}

#[test]
fn non_hermitian_output_is_not_physical() {
    let s = set(1, 10);
    // Unit trace and non-negative Hermitian-part eigenvalues, but not Hermitian.
    let skew = CMat2([[C64::new(0.5, 0.0), C64::new(0.1, 0.0)], [C64::new(0.0, 0.0), C64::new(0.5, 0.0)]]);
    let preds = vec![vec![RawPrediction::new(skew); s.trajectories[0].len()]];
    let r = evaluate_predictions("gru", "direct", &preds, &[Vec::new()], &s, "abc").unwrap();
    assert!(r.aggregate.vtr_max < 1e-12);
    assert!(r.aggregate.lambda_min >= 0.0);
    assert!(r.aggregate.vherm_mean > 0.0);
    assert!(!r.aggregate.physical);
}
