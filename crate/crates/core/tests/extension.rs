use std::sync::Arc;

use fracbn_core::extension::{extend, nodal_regions, ExtensionGrid, ExtensionOptions, PoissonKernel};
use fracbn_core::{Params, RadialFn, RadialGrid};

fn grid(elements: usize) -> (Params, Arc<RadialGrid>) {
    let p = Params::new(7, 0.75, 1.0, 0.0).unwrap();
    let g = Arc::new(RadialGrid::build(&p, elements, 4.0, 2.0).unwrap());
    (p, g)
}

fn coarse_box() -> ExtensionOptions {
    ExtensionOptions {
        y_ratio: 1.8,
        exterior_nodes: 12,
        ..ExtensionOptions::default()
    }
}

#[test]
fn poisson_kernel_has_unit_mass() {
    for s in [0.25, 0.5, 0.75] {
        let k = PoissonKernel::new(7, s).unwrap();
        for (r, y) in [(0.0, 0.1), (0.3, 1e-3), (0.9, 0.5), (2.0, 3.0)] {
            let m = k.mass(r, y);
            assert!((m - 1.0).abs() < 1e-8, "s={s} r={r} y={y}: {m}");
        }
    }
}

#[test]
fn extension_obeys_the_maximum_principle_and_vanishes_for_zero_data() {
    let (p, g) = grid(32);
    let u = RadialFn::from_fn(g.clone(), |r| (1.0 - r * r) * (6.0 * r).cos());
    let eg = ExtensionGrid::build(&g, &coarse_box()).unwrap();
    let field = extend(&u, eg.clone(), &p).unwrap();
    let (lo, hi) = u.values.iter().fold((0.0f64, 0.0f64), |(a, b), v| (a.min(*v), b.max(*v)));
    assert!(field.values.iter().all(|w| *w >= lo - 1e-9 && *w <= hi + 1e-9));

    let zero = extend(&RadialFn::zeros(g), eg, &p).unwrap();
    assert!(zero.values.iter().all(|w| *w == 0.0));
    assert_eq!(nodal_regions(&zero, 0.0), 0);
}

#[test]
fn extension_recovers_the_trace_as_y_vanishes() {
    let (p, g) = grid(64);
    let u = RadialFn::from_fn(g, |r| 1.0 - r * r);
    let k = PoissonKernel::new(p.n, p.s).unwrap();
    for r in [0.1, 0.4, 0.7] {
        let mut last = f64::INFINITY;
        for y in [1e-1, 1e-2, 1e-3] {
            let d = k.deviation(&u, r, y).abs();
            assert!(d < last);
            last = d;
        }
        assert!(last < 1e-2 * u.eval(r));
        let direct = k.extend_point(&u, r, 1e-2) - u.eval(r);
        assert!((direct - k.deviation(&u, r, 1e-2)).abs() < 1e-9);
    }
}

#[test]
fn one_sign_change_gives_two_regions() {
    let (p, g) = grid(48);
    let u = RadialFn::from_fn(g.clone(), |r| (1.0 - r * r) * (1.0 - 4.0 * r * r));
    let field = extend(&u, ExtensionGrid::build(&g, &coarse_box()).unwrap(), &p).unwrap();
    assert_eq!(nodal_regions(&field, field.default_zero_tol()), 2);
}
