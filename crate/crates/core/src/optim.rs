//! Adam with per-parameter moments and step counts.

use serde::{Deserialize, Serialize};

use crate::nn::{Grads, GroupSet, ParamStore};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AdamConfig {
    pub learning_rate: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
}

impl Default for AdamConfig {
    fn default() -> Self {
        Self {
            learning_rate: 2.5e-4,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct Moments {
    pub m: Vec<f64>,
    pub v: Vec<f64>,
    /// Number of updates this parameter has received.
    pub t: u64,
}

#[derive(Debug, Clone)]
pub struct Adam {
    pub cfg: AdamConfig,
    state: Vec<Option<Moments>>,
}

impl Adam {
    pub fn new(cfg: AdamConfig, store: &ParamStore) -> Self {
        Self {
            cfg,
            state: vec![None; store.params.len()],
        }
    }

    pub fn moments(&self, index: usize) -> Option<&Moments> {
        self.state[index].as_ref()
    }

    /// Updates exactly the parameters that have a gradient slot and belong
    /// to `mask`; everything else, including optimizer state, is untouched.
    pub fn step(&mut self, store: &mut ParamStore, grads: &Grads, mask: GroupSet) {
        let AdamConfig {
            learning_rate: lr,
            beta1: b1,
            beta2: b2,
            eps,
        } = self.cfg;
        for (id, g) in grads.iter() {
            let p = &mut store.params[id.0];
            if !mask.contains(p.group) {
                continue;
            }
            let st = self.state[id.0].get_or_insert_with(|| Moments {
                m: vec![0.0; g.len()],
                v: vec![0.0; g.len()],
                t: 0,
            });
            st.t += 1;
            let c1 = 1.0 - b1.powi(st.t as i32);
            let c2 = 1.0 - b2.powi(st.t as i32);
            for (((w, &gi), m), v) in p.data.iter_mut().zip(g).zip(&mut st.m).zip(&mut st.v) {
                *m = b1 * *m + (1.0 - b1) * gi;
                *v = b2 * *v + (1.0 - b2) * gi * gi;
                *w -= lr * (*m / c1) / ((*v / c2).sqrt() + eps);
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::nn::{Group, ParamId};

    fn store() -> ParamStore {
        let mut s = ParamStore::new();
        s.add("a".into(), Group::SceneBackbone, vec![2], vec![1.0, -1.0]);
        s.add("e".into(), Group::FixationHead, vec![1], vec![0.5]);
        s
    }

    #[test]
    fn first_step_moves_by_learning_rate() {
        let mut s = store();
        let mut adam = Adam::new(AdamConfig { learning_rate: 0.1, ..AdamConfig::default() }, &s);
        let mut g = Grads::for_store(&s);
        g.acc(ParamId(0), 2).copy_from_slice(&[3.0, -0.2]);
        adam.step(&mut s, &g, GroupSet::ALL);
        assert!((s.params[0].data[0] - 0.9).abs() < 1e-6);
        assert!((s.params[0].data[1] + 0.9).abs() < 1e-6);
        assert_eq!(s.params[1].data, vec![0.5]);
        assert!(adam.moments(1).is_none());
        assert_eq!(adam.moments(0).unwrap().t, 1);
    }

    #[test]
    fn masked_groups_are_skipped() {
        let mut s = store();
        let before = s.clone();
        let mut adam = Adam::new(AdamConfig::default(), &s);
        let mut g = Grads::for_store(&s);
        g.acc(ParamId(0), 2).fill(1.0);
        adam.step(&mut s, &g, GroupSet::of(&[Group::FixationHead]));
        assert_eq!(s, before);
        assert!(adam.moments(0).is_none());
    }

    #[test]
    fn minimizes_a_quadratic() {
        let mut s = ParamStore::new();
        s.add("x".into(), Group::AngleHead, vec![1], vec![3.0]);
        let mut adam = Adam::new(AdamConfig { learning_rate: 0.05, ..AdamConfig::default() }, &s);
        for _ in 0..2000 {
            let mut g = Grads::for_store(&s);
            g.acc(ParamId(0), 1)[0] = 2.0 * (s.params[0].data[0] - 1.0);
            adam.step(&mut s, &g, GroupSet::ALL);
        }
        assert!((s.params[0].data[0] - 1.0).abs() < 1e-3);
    }
}
