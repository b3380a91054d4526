use crate::error::{Error, Result};
use crate::model::ParameterSet;

/// Size-weighted merge of a running model with a freshly fine-tuned one:
/// `old · (all − curr)/all + new · curr/all`, element-wise over every tensor.
///
/// `all_data` is the cumulative amount of data including the current corpus,
/// `curr_data` the size of the current corpus.
pub fn weight_average(old: &ParameterSet, new: &ParameterSet, all_data: usize, curr_data: usize) -> Result<ParameterSet> {
    old.check_same_layout(new)?;
    if all_data == 0 || curr_data == 0 {
        return Err(Error::Argument(format!(
            "data sizes must be positive (all_data = {all_data}, curr_data = {curr_data})"
        )));
    }
    if curr_data > all_data {
        return Err(Error::Argument(format!("curr_data {curr_data} exceeds all_data {all_data}")));
    }
    if curr_data == all_data {
        return Ok(new.clone());
    }
    let w_new = new_model_coefficient(all_data, curr_data);
    let mut out = old.clone();
    for (o, n) in out.tensors_mut().iter_mut().zip(new.tensors()) {
        for (a, &b) in o.data.iter_mut().zip(&n.data) {
            // Written as an interpolation so equal operands stay bit-identical;
            // the clamp only absorbs rounding at the interval ends.
            let mixed = *a + (b - *a) * w_new;
            *a = mixed.clamp(a.min(b), a.max(b));
        }
    }
    Ok(out)
}

/// Weight of the new model, `curr_data / all_data`.
pub fn new_model_coefficient(all_data: usize, curr_data: usize) -> f64 {
    curr_data as f64 / all_data as f64
}
