//! Central finite-difference verification of tape gradients.

use crate::error::Result;
use crate::params::{ParamStore, ParamVars};
use crate::tape::{Tape, Var};

#[derive(Debug, Clone, PartialEq)]
pub struct GradReport {
    pub max_rel_error: f64,
    pub worst_param: String,
    pub checked: usize,
}

fn rel_error(a: f64, b: f64) -> f64 {
    (a - b).abs() / a.abs().max(b.abs()).max(1e-7)
}

/// Compares reverse-mode gradients of `loss` with fourth-order central
/// differences of step `h` on every scalar of `store`.
pub fn check_gradients<F>(store: &ParamStore, h: f64, loss: F) -> Result<GradReport>
where
    F: Fn(&mut Tape, &ParamVars) -> Result<Var>,
{
    let eval = |s: &ParamStore| -> Result<f64> {
        let mut tape = Tape::new();
        let vars = s.bind(&mut tape);
        let l = loss(&mut tape, &vars)?;
        Ok(tape.value(l).item())
    };
    let mut tape = Tape::new();
    let vars = store.bind(&mut tape);
    let l = loss(&mut tape, &vars)?;
    let mut grads = tape.backward(l)?;
    let analytic = store.collect_grads(&vars, &mut grads);

    let mut report = GradReport { max_rel_error: 0.0, worst_param: String::new(), checked: 0 };
    let mut probe = store.clone();
    for id in store.ids() {
        for i in 0..store.get(id).data().len() {
            let x = store.get(id).data()[i];
            let mut at = |dx: f64| -> Result<f64> {
                probe.get_mut(id).data_mut()[i] = x + dx;
                eval(&probe)
            };
            let numeric = (8.0 * (at(h)? - at(-h)?) - (at(2.0 * h)? - at(-2.0 * h)?)) / (12.0 * h);
            probe.get_mut(id).data_mut()[i] = x;
            let err = rel_error(analytic[id.index()].data()[i], numeric);
            report.checked += 1;
            if err > report.max_rel_error {
                report.max_rel_error = err;
                report.worst_param =
                    format!("{}[{i}] analytic {:e} numeric {numeric:e}", store.name(id), analytic[id.index()].data()[i]);
            }
        }
    }
    Ok(report)
}

