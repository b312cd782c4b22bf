//! Fixed Gauss-Legendre rules.
//!
//! All time integrals use the 16-node rule per subinterval; mark-space
//! integrals against the continuous mark laws use the 32-node rule split at
//! the origin (integrands like `|xi|^q` have a kink there).

/// 16-node Gauss-Legendre rule on [-1, 1]: (node, weight).
pub const GL16: [(f64, f64); 16] = [
    (-0.9894009349916499, 0.027152459411754096),
    (-0.9445750230732326, 0.06225352393864789),
    (-0.8656312023878317, 0.09515851168249279),
    (-0.7554044083550030, 0.12462897125553387),
    (-0.6178762444026438, 0.14959598881657673),
    (-0.4580167776572274, 0.16915651939500254),
    (-0.2816035507792589, 0.18260341504492358),
    (-0.09501250983763744, 0.1894506104550685),
    (0.09501250983763744, 0.1894506104550685),
    (0.2816035507792589, 0.18260341504492358),
    (0.4580167776572274, 0.16915651939500254),
    (0.6178762444026438, 0.14959598881657673),
    (0.7554044083550030, 0.12462897125553387),
    (0.8656312023878317, 0.09515851168249279),
    (0.9445750230732326, 0.06225352393864789),
    (0.9894009349916499, 0.027152459411754096),
];

/// 32-node Gauss-Legendre rule on [-1, 1]: (node, weight).
pub const GL32: [(f64, f64); 32] = [
    (-0.9972638618494816, 0.007018610009470097),
    (-0.9856115115452683, 0.016274394730905671),
    (-0.9647622555875064, 0.025392065309262059),
    (-0.9349060759377397, 0.034273862913021433),
    (-0.8963211557660521, 0.04283589802222668),
    (-0.8493676137325700, 0.05099805926237618),
    (-0.7944837959679424, 0.058684093478535547),
    (-0.7321821187402897, 0.065822222776361847),
    (-0.6630442669302152, 0.072345794108848506),
    (-0.5877157572407623, 0.078193895787070306),
    (-0.5068999089322294, 0.083311924226946755),
    (-0.4213512761306353, 0.087652093004403811),
    (-0.3318686022821276, 0.091173878695763885),
    (-0.2392873622521371, 0.093844399080804566),
    (-0.1444719615827965, 0.095638720079274859),
    (-0.04830766568773832, 0.096540088514727801),
    (0.04830766568773832, 0.096540088514727801),
    (0.1444719615827965, 0.095638720079274859),
    (0.2392873622521371, 0.093844399080804566),
    (0.3318686022821276, 0.091173878695763885),
    (0.4213512761306353, 0.087652093004403811),
    (0.5068999089322294, 0.083311924226946755),
    (0.5877157572407623, 0.078193895787070306),
    (0.6630442669302152, 0.072345794108848506),
    (0.7321821187402897, 0.065822222776361847),
    (0.7944837959679424, 0.058684093478535547),
    (0.8493676137325700, 0.05099805926237618),
    (0.8963211557660521, 0.04283589802222668),
    (0.9349060759377397, 0.034273862913021433),
    (0.9647622555875064, 0.025392065309262059),
    (0.9856115115452683, 0.016274394730905671),
    (0.9972638618494816, 0.007018610009470097),
];

/// Mapped nodes `(s_j, w_j)` of the 16-node rule on `[a, b]`, weights
/// already scaled by the interval half-length.
pub fn gl16_nodes(a: f64, b: f64) -> impl Iterator<Item = (f64, f64)> {
    let mid = 0.5 * (a + b);
    let half = 0.5 * (b - a);
    GL16.iter().map(move |&(x, w)| (mid + half * x, half * w))
}

/// Integrate a scalar function over `[a, b]` with the 16-node rule.
pub fn gl16_integrate<F: FnMut(f64) -> f64>(a: f64, b: f64, mut f: F) -> f64 {
    gl16_nodes(a, b).map(|(s, w)| w * f(s)).sum()
}

/// Integrate a scalar function over `[a, b]` with the 32-node rule.
pub fn gl32_integrate<F: FnMut(f64) -> f64>(a: f64, b: f64, mut f: F) -> f64 {
    let mid = 0.5 * (a + b);
    let half = 0.5 * (b - a);
    GL32.iter().map(|&(x, w)| half * w * f(mid + half * x)).sum()
}
