use std::collections::{BTreeMap, HashMap};
use std::rc::Rc;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng::{fnv1a, SplitMix64};
use crate::tensor::ops::BatchNormStats;
use crate::tensor::Tensor;

/// Role of a parameter, used for the parameter census.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ParamKind {
    Conv,
    Norm,
    Attention,
    RelPos,
    Ffn,
}

/// How a parameter is initialized.
#[derive(Clone, Copy, Debug)]
pub enum Init {
    /// Gaussian with std `sqrt(2 / fan_in)`, fan-in taken from dims 1.. of the shape.
    He,
    /// Gaussian with std `1 / sqrt(fan_in)`.
    Lecun,
    Zeros,
    Ones,
}

fn fan_in(shape: &[usize]) -> usize {
    shape[1..].iter().product::<usize>().max(1)
}

/// Named trainable parameters in registration order.
///
/// Every parameter's initial values come from its own generator keyed by
/// `(seed, name)`, so two networks that share a parameter name start from
/// identical values regardless of what else they contain.
#[derive(Clone, Debug, Default)]
pub struct ParamStore {
    entries: Vec<(String, Tensor, ParamKind)>,
    index: HashMap<String, usize>,
}

impl ParamStore {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn init(&mut self, seed: u64, name: &str, shape: &[usize], init: Init, kind: ParamKind) -> Result<Tensor> {
        let n: usize = shape.iter().product();
        let mut rng = SplitMix64::derive(seed, &[fnv1a(name.as_bytes())]);
        let data = match init {
            Init::He => {
                let std = (2.0 / fan_in(shape) as f64).sqrt();
                (0..n).map(|_| std * rng.normal()).collect()
            }
            Init::Lecun => {
                let std = (1.0 / fan_in(shape) as f64).sqrt();
                (0..n).map(|_| std * rng.normal()).collect()
            }
            Init::Zeros => vec![0.0; n],
            Init::Ones => vec![1.0; n],
        };
        self.insert(name, Tensor::param(data, shape)?, kind)
    }

    pub fn insert(&mut self, name: &str, t: Tensor, kind: ParamKind) -> Result<Tensor> {
        if self.index.contains_key(name) {
            return Err(Error::Contract(format!("parameter {name:?} registered twice")));
        }
        self.index.insert(name.to_string(), self.entries.len());
        self.entries.push((name.to_string(), t.clone(), kind));
        Ok(t)
    }

    pub fn get(&self, name: &str) -> Result<&Tensor> {
        self.index
            .get(name)
            .map(|&i| &self.entries[i].1)
            .ok_or_else(|| Error::Contract(format!("no parameter named {name:?}")))
    }

    pub fn contains(&self, name: &str) -> bool {
        self.index.contains_key(name)
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = (&str, &Tensor, ParamKind)> {
        self.entries.iter().map(|(n, t, k)| (n.as_str(), t, *k))
    }

    pub fn names(&self) -> Vec<String> {
        self.entries.iter().map(|(n, _, _)| n.clone()).collect()
    }

    /// Replaces a parameter's tensor; the shape must not change.
    pub fn set(&mut self, name: &str, t: Tensor) -> Result<()> {
        let &i = self.index.get(name).ok_or_else(|| Error::Contract(format!("no parameter named {name:?}")))?;
        if self.entries[i].1.shape() != t.shape() {
            return Err(Error::dim(
                "ParamStore::set",
                format!("{name}: {:?} -> {:?}", self.entries[i].1.shape(), t.shape()),
            ));
        }
        self.entries[i].1 = t;
        Ok(())
    }

    pub fn zero_grads(&self) {
        self.entries.iter().for_each(|(_, t, _)| t.zero_grad());
    }

    pub fn census(&self) -> Census {
        let mut by_kind = BTreeMap::new();
        let mut total = 0;
        for (_, t, k) in &self.entries {
            *by_kind.entry(*k).or_insert(0) += t.numel();
            total += t.numel();
        }
        Census { total, by_kind }
    }
}

/// Parameter counts in total and per [`ParamKind`].
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Census {
    pub total: usize,
    pub by_kind: BTreeMap<ParamKind, usize>,
}

impl Census {
    pub fn count(&self, kind: ParamKind) -> usize {
        self.by_kind.get(&kind).copied().unwrap_or(0)
    }

    /// Parameters belonging to transformer blocks (attention, relative
    /// tables, FFN).
    pub fn transformer(&self) -> usize {
        self.count(ParamKind::Attention) + self.count(ParamKind::RelPos) + self.count(ParamKind::Ffn)
    }
}

/// Batch-norm running statistics by layer name.
#[derive(Clone, Debug, Default)]
pub struct BufferStore {
    entries: Vec<(String, Rc<BatchNormStats>)>,
    index: HashMap<String, usize>,
}

impl BufferStore {
    pub fn register(&mut self, name: &str, channels: usize) -> Rc<BatchNormStats> {
        let s = Rc::new(BatchNormStats::new(channels));
        self.index.insert(name.to_string(), self.entries.len());
        self.entries.push((name.to_string(), s.clone()));
        s
    }

    pub fn get(&self, name: &str) -> Result<Rc<BatchNormStats>> {
        self.index
            .get(name)
            .map(|&i| self.entries[i].1.clone())
            .ok_or_else(|| Error::Contract(format!("no running stats named {name:?}")))
    }

    pub fn iter(&self) -> impl Iterator<Item = (&str, &Rc<BatchNormStats>)> {
        self.entries.iter().map(|(n, s)| (n.as_str(), s))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn init_is_keyed_by_name() {
        let mut a = ParamStore::new();
        let mut b = ParamStore::new();
        a.init(7, "other", &[3], Init::He, ParamKind::Conv).unwrap();
        let x = a.init(7, "w", &[4, 2, 3, 3], Init::He, ParamKind::Conv).unwrap();
        let y = b.init(7, "w", &[4, 2, 3, 3], Init::He, ParamKind::Conv).unwrap();
        assert_eq!(x.data(), y.data());
        let z = b.init(8, "w2", &[4, 2, 3, 3], Init::He, ParamKind::Conv).unwrap();
        assert_ne!(x.data(), z.data());
    }

    #[test]
    fn he_scale() {
        let mut s = ParamStore::new();
        let w = s.init(1, "w", &[64, 32, 3, 3], Init::He, ParamKind::Conv).unwrap();
        let var = w.data().iter().map(|v| v * v).sum::<f64>() / w.numel() as f64;
        assert!((var - 2.0 / 288.0).abs() < 0.1 * 2.0 / 288.0);
    }

    #[test]
    fn census_and_duplicates() {
        let mut s = ParamStore::new();
        s.init(1, "a", &[2, 3], Init::Zeros, ParamKind::Conv).unwrap();
        s.init(1, "b", &[5], Init::Ones, ParamKind::Attention).unwrap();
        assert!(s.init(1, "a", &[1], Init::Zeros, ParamKind::Conv).is_err());
        let c = s.census();
        assert_eq!(c.total, 11);
        assert_eq!(c.transformer(), 5);
        assert!(s.set("a", Tensor::zeros(&[3, 2])).is_err());
    }
}
