//! The JSON map decoder must never panic, and any map it accepts has to
//! honor the structural contracts the numerics lean on: anchored strictly
//! increasing breakpoints, in-range branch images, and inverse branches
//! confined to their cells.

#![no_main]

use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    let Ok(map) = aconvex::map_model::from_slice(data) else { return };
    let bp = map.breakpoints();
    assert!(bp.len() >= 2);
    assert_eq!(bp[0], 0.0);
    assert_eq!(*bp.last().unwrap(), 1.0);
    assert!(bp.windows(2).all(|p| p[0] < p[1]), "breakpoints must strictly increase");
    assert_eq!(map.branch_count(), bp.len() - 1);
    for k in 1..=map.branch_count() {
        let (lo, hi) = map.branch_image(k);
        assert!(lo.is_finite() && hi.is_finite() && 0.0 <= lo && lo <= hi && hi <= 1.0);
        for x in [0.0, 0.25, 0.5, 0.75, 1.0] {
            let psi = map.inverse_branch(k, x);
            assert!(
                bp[k - 1] - 1e-12 <= psi && psi <= bp[k] + 1e-12,
                "inverse branch {k} escapes its cell at x = {x}: {psi}"
            );
        }
    }
});
