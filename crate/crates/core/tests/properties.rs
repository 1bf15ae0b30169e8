use proptest::prelude::*;

use qtw_core::heads::{build_v, direct_from_outputs, kraus_from_q, kraus_update, stiefel_error, thin_qr};
use qtw_core::qcore::{bloch_to_rho, eigvals_hermitian_2x2, kraus_completeness_error, BlochVector};
use qtw_core::sim::{standardize, StandardizationStats};

fn bloch() -> impl Strategy<Value = BlochVector> {
    (-1.0..1.0f64, -1.0..1.0f64, -1.0..1.0f64).prop_map(|(x, y, z)| {
        let b = BlochVector::new(x, y, z);
        let n = b.norm();
        if n > 1.0 {
            BlochVector::new(x / n, y / n, z / n)
        } else {
            b
        }
    })
}

proptest! {
    #[test]
    fn kraus_update_always_returns_a_state(o in prop::collection::vec(-3.0..3.0f64, 16), b in bloch()) {
        let v = build_v(&o);
        prop_assume!(v.is_ok());
        let Ok(q) = thin_qr(&v.unwrap()) else { return Ok(()) };
        prop_assert!(stiefel_error(&q) <= 1e-12);
        let k = kraus_from_q(&q);
        prop_assert!(kraus_completeness_error(&k) <= 1e-12);
        let rho = kraus_update(&bloch_to_rho(b).unwrap(), &k);
        let m = rho.mat();
        prop_assert!((m.trace() - 1.0).norm() <= 1e-12);
        prop_assert!(eigvals_hermitian_2x2(m).0 >= -1e-12);
        prop_assert!(m.hermiticity_error() <= 1e-13);
    }

    #[test]
    fn qr_is_scale_invariant(o in prop::collection::vec(-3.0..3.0f64, 16), s in 0.1..10.0f64) {
        let Ok(v) = build_v(&o) else { return Ok(()) };
        let (Ok(a), Ok(b)) = (thin_qr(&v), thin_qr(&v.scale(s))) else { return Ok(()) };
        for c in 0..2 {
            for (x, y) in a.column(c).iter().zip(b.column(c)) {
                prop_assert!((x - y).norm() <= 1e-10);
            }
        }
    }

    #[test]
    fn direct_head_has_unit_trace(o in prop::collection::vec(-2.0..2.0f64, 8)) {
        let p = direct_from_outputs(&o).unwrap();
        if !p.fallback {
            // The regularizer shifts the trace by eps / |Tr + eps|.
            let raw = (o[0] + o[3]).hypot(o[4] + o[7]);
            prop_assert!((p.mat.trace() - 1.0).norm() <= 1.01e-8 / (raw - 1e-8) + 1e-12);
        }
    }

    #[test]
    fn standardization_is_affine(y in prop::collection::vec(-1.0..1.0f64, 1..50), mu in -1.0..1.0f64, sigma in 0.01..2.0f64) {
        let stats = StandardizationStats { mu, sigma, source: String::new(), source_sha256: String::new() };
        let x = standardize(&y, &stats);
        for (a, b) in x.iter().zip(&y) {
            prop_assert!((a * (sigma + 1e-8) + mu - b).abs() <= 1e-9);
        }
    }
}
