use super::{ParamStore, Result, Tape, Var};

/// Worst disagreement between reverse-mode and central-difference gradients.
#[derive(Debug, Clone, PartialEq)]
pub struct GradCheckReport {
    pub max_relative_error: f64,
    pub worst_param: String,
    pub worst_index: usize,
    pub analytic: f64,
    pub numeric: f64,
    pub checked: usize,
}

/// `|a - n| / max(|a|, |n|, 1e-5)`. The floor sits above the round-off of a
/// central difference with step 1e-5 on a loss of order 10.
pub fn relative_error(analytic: f64, numeric: f64) -> f64 {
    (analytic - numeric).abs() / analytic.abs().max(numeric.abs()).max(1e-5)
}

/// Compares gradients of `build` (which records a scalar loss on a fresh tape
/// from the current parameter values) against central differences with
/// step `h`, over every scalar of every parameter.
pub fn gradient_check<F>(store: &mut ParamStore, h: f64, mut build: F) -> Result<GradCheckReport>
where
    F: FnMut(&mut Tape, &ParamStore) -> Result<Var>,
{
    gradient_check_with(store, |s| s, h, |t, s| build(t, s))
}

/// [`gradient_check`] for any state that owns a parameter store, such as a
/// whole model; `params` reaches the store inside `state`.
pub fn gradient_check_with<S, E, F>(
    state: &mut S,
    params: fn(&mut S) -> &mut ParamStore,
    h: f64,
    mut build: F,
) -> std::result::Result<GradCheckReport, E>
where
    F: FnMut(&mut Tape, &S) -> std::result::Result<Var, E>,
    E: From<super::AutodiffError>,
{
    let mut tape = Tape::new();
    let loss = build(&mut tape, state)?;
    tape.backward(loss, params(state))?;
    let analytic: Vec<Vec<f64>> = params(state).iter().map(|(_, p)| p.grad.data().to_vec()).collect();

    let mut eval = |state: &S| -> std::result::Result<f64, E> {
        let mut t = Tape::new();
        let l = build(&mut t, state)?;
        Ok(t.value(l).item())
    };

    let mut report = GradCheckReport {
        max_relative_error: 0.0,
        worst_param: String::new(),
        worst_index: 0,
        analytic: 0.0,
        numeric: 0.0,
        checked: 0,
    };
    let ids: Vec<_> = params(state).iter().map(|(id, _)| id).collect();
    for (pi, id) in ids.into_iter().enumerate() {
        for k in 0..params(state).value(id).len() {
            let orig = params(state).value(id).data()[k];
            params(state).get_mut(id).value.data_mut()[k] = orig + h;
            let up = eval(state)?;
            params(state).get_mut(id).value.data_mut()[k] = orig - h;
            let down = eval(state)?;
            params(state).get_mut(id).value.data_mut()[k] = orig;
            let numeric = (up - down) / (2.0 * h);
            let a = analytic[pi][k];
            let err = relative_error(a, numeric);
            report.checked += 1;
            if err > report.max_relative_error || report.checked == 1 {
                report.max_relative_error = err;
                report.worst_param = params(state).get(id).name.clone();
                report.worst_index = k;
                report.analytic = a;
                report.numeric = numeric;
            }
        }
    }
    Ok(report)
}
