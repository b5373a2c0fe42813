use crate::error::{Error, Result};
use crate::models::{ModelGraph, ParamStore};

/// Builds a copy of `model`'s architecture whose parameters come from
/// `pretrained`. With `reinit_head` the output head is instead drawn fresh
/// from He initialisation under `seed`.
pub fn transfer_init(model: &ModelGraph, pretrained: &ParamStore, reinit_head: bool, seed: u64) -> Result<ModelGraph> {
    let fresh = ModelGraph::build(model.config(), seed)?;
    let head = fresh.head_names();
    let mut params = ParamStore::new();
    for (name, init) in fresh.params().iter() {
        let value = if reinit_head && head.contains(&name) {
            init.clone()
        } else {
            match pretrained.get(name) {
                None => return Err(Error::Transfer(format!("donor has no tensor `{name}`"))),
                Some(t) if t.shape() != init.shape() => {
                    return Err(Error::Transfer(format!(
                        "tensor `{name}` has shape {:?} in the donor but {:?} in the model",
                        t.shape(),
                        init.shape()
                    )))
                }
                Some(t) => t.clone(),
            }
        };
        params.insert(name, value)?;
    }
    fresh.with_params(params)
}
