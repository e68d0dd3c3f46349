use num_complex::Complex64;
use proptest::prelude::*;
use renormfock_core::config::{parse_complex, parse_config};
use renormfock_core::fock::{binomial, enumerate_basis};

proptest! {
    #[test]
    fn basis_dimension_and_index_round_trip(m in 1usize..5, cap in 0usize..7) {
        let b = enumerate_basis(m, cap).unwrap();
        prop_assert_eq!(b.dim() as u128, binomial((m + cap) as u128, cap as u128));
        for i in 0..b.dim() {
            prop_assert_eq!(b.index_of(b.occupation(i)), Some(i));
            if i > 0 {
                prop_assert!(b.grade(i) >= b.grade(i - 1));
            }
        }
        let small = enumerate_basis(m, cap.saturating_sub(1)).unwrap();
        for i in 0..small.dim() {
            prop_assert_eq!(small.occupation(i), b.occupation(i));
        }
    }

    #[test]
    fn complex_literals_round_trip(re in -1e3f64..1e3, im in -1e3f64..1e3) {
        let z = Complex64::new(re, im);
        let text = format!("{re:e}{im:+e}i");
        prop_assert_eq!(parse_complex(&text), Some(z));
    }

    #[test]
    fn config_display_round_trips(sigma in 1.0f64..10.0, nmax in 1usize..30, nodes in 1usize..4) {
        let text = format!(
            "model = vhm\n[grid]\nnodes = {nodes}\nk_min = 0.2\nk_max = 1.5\n[truncation]\nnmax = {nmax}\n[model]\nform_factor = weisskopf_wigner\nsigma = {sigma}\n[sweep]\nparam = sigma\nvalues = {sigma}, {}\n",
            sigma * 2.0
        );
        let cfg = parse_config(&text).unwrap();
        prop_assert_eq!(parse_config(&cfg.to_string()).unwrap(), cfg);
    }
}
