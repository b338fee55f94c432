use super::NeuralSpacetime;

/// `2^{sum_j beta_j} * prod_j ||W_j||_op` with `beta_j = max(max(s_j, l_j) - 1, 0)`
/// over `j = 0..=J`, the operator-norm bound from the quasi-metric proof.
///
/// This is a Lipschitz-style estimate. It scales with `||W_J||_op` while the
/// triangle ratio `D(x,y) / (D(x,z) + D(z,y))` does not, so it can be below 1
/// and then fails even for `z = x`. See [`triangle_constant`] for a constant
/// that provably holds.
pub fn operator_norm_constant(model: &NeuralSpacetime) -> f64 {
    let beta: f64 = model
        .metric_exponent_values()
        .iter()
        .map(|&(s, l)| (s.max(l) - 1.0).max(0.0))
        .sum();
    let norms: f64 = model
        .metric_matrices()
        .iter()
        .map(|w| w.operator_norm())
        .product();
    2f64.powf(beta) * norms
}

/// Constant `K` with `D(x,y) <= K (D(x,z) + D(z,y))` for every triple.
///
/// `u_0` obeys the triangle inequality coordinatewise with `K_0 = 1`. If
/// `u_{j-1}` obeys it with `K >= 1`, then for `p = max(s_j, l_j)` the
/// activation satisfies `sigma(K t) <= K^p sigma(t)` and
/// `sigma(a + b) <= c (sigma(a) + sigma(b))` with `c = 2^{p-1}` for a pure
/// power (`s_j = l_j`, convex) and `c = 2^p` otherwise; non-negative `W_j`
/// preserve the coordinatewise inequality, giving `K_j = c K^p`. An output
/// exponent `e` contributes `K^e` if `e <= 1` and `2^{e-1} K^e` otherwise.
pub fn triangle_constant(model: &NeuralSpacetime) -> f64 {
    let exps = model.metric_exponent_values();
    let mut k: f64 = 1.0;
    for &(s, l) in &exps[1..] {
        let p = s.max(l);
        let c = if s == l { 2f64.powf(p - 1.0) } else { 2f64.powf(p) };
        k = c * k.powf(p);
    }
    if let Some(e) = model.output_exponent() {
        k = if e <= 1.0 {
            k.powf(e)
        } else {
            2f64.powf(e - 1.0) * k.powf(e)
        };
    }
    k
}
