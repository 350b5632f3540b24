use super::{NnError, ParamStore, Tape, Var};

/// Largest relative error between tape gradients and central differences,
/// `|a − n| / max(1e-8, |a| + |n|)` over every parameter coordinate.
///
/// The store's values are restored afterwards; its gradient accumulators are
/// not touched.
pub fn grad_check<F>(store: &mut ParamStore, h: f64, build_loss: F) -> Result<f64, NnError>
where
    F: Fn(&mut Tape) -> Result<Var, NnError>,
{
    let analytic = {
        let mut tape = Tape::new(store);
        let loss = build_loss(&mut tape)?;
        tape.backward(loss)?
    };
    let eval = |store: &ParamStore| -> Result<f64, NnError> {
        let mut tape = Tape::new(store);
        let loss = build_loss(&mut tape)?;
        Ok(tape.scalar(loss))
    };
    let mut worst = 0.0f64;
    let ids: Vec<_> = store.ids().collect();
    for id in ids {
        let n = store.value(id).len();
        let grads = analytic.get_or_zero(id, n);
        for (k, a) in grads.iter().enumerate() {
            let orig = store.value(id).data()[k];
            store.value_mut(id).data_mut()[k] = orig + h;
            let plus = eval(store)?;
            store.value_mut(id).data_mut()[k] = orig - h;
            let minus = eval(store)?;
            store.value_mut(id).data_mut()[k] = orig;
            let numeric = (plus - minus) / (2.0 * h);
            let err = (a - numeric).abs() / (a.abs() + numeric.abs()).max(1e-8);
            worst = worst.max(err);
        }
    }
    Ok(worst)
}
