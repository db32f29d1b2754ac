use pitman_core::numerics::{gamma_ratio_product, log_gamma, rising_factorial, stirling_gamma};
use pitman_core::{Mode, PitmanParams};
use proptest::prelude::*;
use rug::{Float, Rational};

/// `ln Gamma(x)` to 40 significant digits, from an independent
/// arbitrary-precision implementation.
const LOG_GAMMA_REFERENCE: [(&str, &str); 20] = [
    ("0.001", "6.90717888538385368251234466807698250216"),
    ("0.1", "2.252712651734205959869701646368495118616"),
    ("0.25", "1.288022524698077457370610440219717295925"),
    ("0.5", "0.5723649429247000870717136756765293558236"),
    ("0.75", "0.2032809514312953714814329718624296997597"),
    ("1", "0.0"),
    ("1.5", "-0.1207822376352452223455184457816472122519"),
    ("2", "0.0"),
    ("2.5", "0.2846828704729191596324946696827019243201"),
    ("3.25", "0.935801931108725358258467518541896936293"),
    ("5", "3.178053830347945619646941601297055408874"),
    ("7.5", "7.534364236758732955158367632436685767027"),
    ("10", "12.80182748008146961120771787456670616428"),
    ("12.125", "17.8083170332209730631255603710550985104"),
    ("20", "39.33988418719949403622465239456738108169"),
    ("33.3", "82.60372358165495292832303401094978360266"),
    ("50", "144.565743946344886008918443062968971575"),
    ("100", "359.1342053695753987760440104602869096126"),
    ("1000", "5905.220423209181211826076912361440789849"),
    ("123456.789", "1323902.018795063123806101129926345968952"),
];

fn parse(bits: u32, s: &str) -> Float {
    Float::with_val(bits, Float::parse(s).unwrap())
}

#[test]
fn log_gamma_matches_reference_values() {
    for (x, want) in LOG_GAMMA_REFERENCE {
        let got = log_gamma(&parse(128, x)).unwrap();
        let want = parse(256, want);
        let err = Float::with_val(128, got.value() - &want).abs();
        let scale = Float::with_val(128, want.abs_ref()).max(&Float::with_val(128, 1));
        assert!(err / scale < 1e-20, "x = {x}");
    }
}

#[test]
fn stirling_error_at_ten() {
    // the two-term formula undershoots Gamma(10) by 3.1760114304667942561e-5 relative
    let x = Float::with_val(128, 10);
    let approx = stirling_gamma(&x).unwrap().into_float();
    let exact = Float::with_val(128, 362_880);
    let rel = ((approx - &exact) / exact).to_f64();
    assert!((rel + 3.176_011_430_466_794e-5).abs() < 1e-15, "{rel}");
}

fn small_rational() -> impl Strategy<Value = Rational> {
    (1i64..50, 1i64..20).prop_map(|(p, q)| Rational::from((p, q)))
}

proptest! {
    #[test]
    fn rising_factorial_splits(x in small_rational(), i in 0u64..6, j in 0u64..6, y in small_rational()) {
        // (x)_{i+j; y} = (x)_{i; y} (x + i y)_{j; y}
        let whole = rising_factorial(&x, i + j, &y).unwrap();
        let head = rising_factorial(&x, i, &y).unwrap();
        let shifted = Rational::from(&x + Rational::from(&y * i));
        let tail = rising_factorial(&shifted, j, &y).unwrap();
        prop_assert_eq!(whole, head * tail);
    }

    #[test]
    fn log_gamma_recurrence(x in 0.01f64..200.0) {
        // ln Gamma(x + 1) - ln Gamma(x) = ln x
        let xf = Float::with_val(128, x);
        let lhs = Float::with_val(128, log_gamma(&Float::with_val(128, &xf + 1u32)).unwrap().value() - log_gamma(&xf).unwrap().value());
        let rhs = Float::with_val(128, xf.ln_ref());
        let err = Float::with_val(128, &lhs - &rhs).abs().to_f64();
        prop_assert!(err <= 1e-30 * rhs.to_f64().abs().max(1.0));
    }

    #[test]
    fn gamma_product_float_tracks_exact(
        n in 1u64..60,
        a in 1i64..8,
        t in 0i64..40,
        i in 1u64..5,
    ) {
        let alpha = format!("{a}/8");
        let theta = format!("{t}/4");
        let params = PitmanParams::parse(n, &alpha, &theta).unwrap();
        let exact = gamma_ratio_product(&params, i, Mode::Exact).unwrap();
        let float = gamma_ratio_product(&params, i, Mode::approx(128)).unwrap();
        let e = exact.to_float(256);
        let rel = Float::with_val(256, float.to_float(256) - &e).abs() / e;
        prop_assert!(rel.to_f64() < 1e-30);
    }
}
