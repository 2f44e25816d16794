//! The parser must never panic, and anything it accepts must round-trip
//! through its own rendering unchanged.

#![no_main]

use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    let Ok(src) = std::str::from_utf8(data) else { return };
    let Ok(expr) = aconvex::expr::parse(src) else { return };
    let rendered = expr.to_string();
    let back = aconvex::expr::parse(&rendered)
        .unwrap_or_else(|err| panic!("rendered form `{rendered}` failed to reparse: {err}"));
    assert_eq!(expr, back, "round-trip changed the tree for `{rendered}`");
});
