use super::{Result, Tape, Tensor, TensorError, Var};

/// Compare analytic gradients of a scalar-valued function against central
/// finite differences.
///
/// `f` rebuilds the computation on a fresh tape from the given parameter
/// leaves and returns the scalar root. Returns the maximum over all parameter
/// entries of `|analytic - numeric| / max(1, |numeric|)`.
pub fn grad_check<F>(f: F, params: &[Tensor], step: f64) -> Result<f64>
where
    F: Fn(&mut Tape, &[Var]) -> Result<Var>,
{
    if !(step > 0.0) {
        return Err(TensorError::InvalidStep(step));
    }

    let eval = |values: &[Tensor]| -> Result<f64> {
        let mut tape = Tape::new();
        let vars: Vec<Var> = values.iter().map(|t| tape.leaf(t.clone())).collect();
        let root = f(&mut tape, &vars)?;
        let v = tape.value(root);
        if v.shape() != (1, 1) {
            return Err(TensorError::NonScalarRoot {
                rows: v.rows(),
                cols: v.cols(),
            });
        }
        let out = v.item();
        if !out.is_finite() {
            return Err(TensorError::NonFinite("grad_check"));
        }
        Ok(out)
    };

    // Analytic pass.
    let mut tape = Tape::new();
    let vars: Vec<Var> = params.iter().map(|t| tape.leaf(t.clone())).collect();
    let root = f(&mut tape, &vars)?;
    let grads = tape.backward(root)?;

    let mut worst: f64 = 0.0;
    let mut probe: Vec<Tensor> = params.to_vec();
    for (pi, param) in params.iter().enumerate() {
        let analytic = grads.of(vars[pi]).clone();
        for idx in 0..param.len() {
            let orig = param.data()[idx];
            probe[pi].data_mut()[idx] = orig + step;
            let up = eval(&probe)?;
            probe[pi].data_mut()[idx] = orig - step;
            let down = eval(&probe)?;
            probe[pi].data_mut()[idx] = orig;
            let numeric = (up - down) / (2.0 * step);
            let rel = (analytic.data()[idx] - numeric).abs() / numeric.abs().max(1.0);
            worst = worst.max(rel);
        }
    }
    Ok(worst)
}
