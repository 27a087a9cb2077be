//! Third-order derivative jets: `[f, f', f'', f''']` at a point.

pub(crate) type Jet = [f64; 4];

/// Derivatives of `outer(inner(r))` from the derivatives of `outer` at
/// `inner(r)` and of `inner` at `r` (Faà di Bruno, order 3).
pub(crate) fn compose(outer: Jet, inner: Jet) -> Jet {
    let [_, g1, g2, g3] = outer;
    let [_, h1, h2, h3] = inner;
    [
        outer[0],
        g1 * h1,
        g2 * h1 * h1 + g1 * h2,
        g3 * h1 * h1 * h1 + 3.0 * g2 * h1 * h2 + g1 * h3,
    ]
}

pub(crate) fn exp(inner: Jet) -> Jet {
    let e = inner[0].exp();
    compose([e, e, e, e], inner)
}

pub(crate) fn scale(a: Jet, s: f64) -> Jet {
    [a[0] * s, a[1] * s, a[2] * s, a[3] * s]
}

pub(crate) fn add_scaled(acc: &mut Jet, a: Jet, s: f64) {
    for (x, y) in acc.iter_mut().zip(a) {
        *x += s * y;
    }
}
