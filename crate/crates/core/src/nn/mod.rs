//! Dense networks in `f64`: MLPs with layer-wise backprop, Adam, and a
//! bit-exact checkpoint container.

mod adam;
pub mod checkpoint;
mod mlp;
mod tensor;

pub use adam::AdamState;
pub use checkpoint::Checkpoint;
pub use mlp::{Activation, ForwardCache, Mlp, MlpSpec, OutputActivation};
pub use tensor::Tensor;

#[derive(Debug, thiserror::Error)]
pub enum NnError {
    #[error("shape error: {0}")]
    Shape(String),
    #[error("numeric error: {0}")]
    Numeric(String),
    #[error("checkpoint error: {0}")]
    Checkpoint(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// `target <- polyak * online + (1 - polyak) * target`, tensor by tensor.
pub fn soft_update(online: &[Tensor], target: &mut [Tensor], polyak: f64) -> Result<(), NnError> {
    if online.len() != target.len() {
        return Err(NnError::Shape(format!("soft update: {} online vs {} target tensors", online.len(), target.len())));
    }
    for (i, (o, t)) in online.iter().zip(target.iter()).enumerate() {
        if o.shape() != t.shape() {
            return Err(NnError::Shape(format!("soft update: tensor {i} {:?} vs {:?}", o.shape(), t.shape())));
        }
    }
    for (o, t) in online.iter().zip(target.iter_mut()) {
        if polyak == 1.0 {
            t.data_mut().copy_from_slice(o.data());
            continue;
        }
        for (tv, ov) in t.data_mut().iter_mut().zip(o.data()) {
            *tv = polyak * ov + (1.0 - polyak) * *tv;
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn s(v: f64) -> Vec<Tensor> {
        vec![Tensor::new(vec![1], vec![v]).unwrap()]
    }

    #[test]
    fn soft_update_endpoints() {
        let online = s(1.0);
        let mut target = s(0.0);
        soft_update(&online, &mut target, 0.0).unwrap();
        assert_eq!(target[0].data(), &[0.0]);
        soft_update(&online, &mut target, 0.005).unwrap();
        assert!((target[0].data()[0] - 0.005).abs() < 1e-18);
        soft_update(&online, &mut target, 1.0).unwrap();
        assert_eq!(target, online);
        let mut wrong = vec![Tensor::zeros(vec![2])];
        assert!(soft_update(&online, &mut wrong, 0.5).is_err());
    }
}
