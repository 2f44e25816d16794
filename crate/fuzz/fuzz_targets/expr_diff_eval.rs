//! Differentiation and evaluation on arbitrary parsed expressions: both may
//! reject a point (domain violations) but must never panic, and a successful
//! evaluation is always finite. The first input byte picks the probe point.

#![no_main]

use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    let Some((&first, rest)) = data.split_first() else { return };
    let Ok(src) = std::str::from_utf8(rest) else { return };
    let Ok(expr) = aconvex::expr::parse(src) else { return };
    let x = f64::from(first) / 255.0;
    if let Ok(v) = aconvex::expr::eval(&expr, x) {
        assert!(v.is_finite(), "eval succeeded with a non-finite value");
    }
    let derivative = aconvex::expr::differentiate(&expr);
    if let Ok(v) = aconvex::expr::eval(&derivative, x) {
        assert!(v.is_finite(), "derivative eval succeeded with a non-finite value");
    }
});
