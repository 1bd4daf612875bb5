use std::fmt;
use std::str::FromStr;

use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::Error;

/// Trainable parameter groups of the dual-pathway model.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Group {
    /// (a) scene backbone
    SceneBackbone,
    /// (b) face backbone
    FaceBackbone,
    /// (c) saliency head convolutions and heatmap output layer
    HeatmapHead,
    /// (d) angle head convolutions and angle output layer
    AngleHead,
    /// (e) fixation-likelihood output layer
    FixationHead,
}

impl Group {
    pub const ALL: [Group; 5] = [
        Group::SceneBackbone,
        Group::FaceBackbone,
        Group::HeatmapHead,
        Group::AngleHead,
        Group::FixationHead,
    ];

    pub fn letter(self) -> char {
        match self {
            Group::SceneBackbone => 'a',
            Group::FaceBackbone => 'b',
            Group::HeatmapHead => 'c',
            Group::AngleHead => 'd',
            Group::FixationHead => 'e',
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Group::SceneBackbone => "scene_backbone",
            Group::FaceBackbone => "face_backbone",
            Group::HeatmapHead => "heatmap_head",
            Group::AngleHead => "angle_head",
            Group::FixationHead => "fixation_head",
        }
    }

    fn bit(self) -> u8 {
        1 << (self as u8)
    }
}

impl fmt::Display for Group {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Group {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Group::ALL
            .into_iter()
            .find(|g| g.name() == s || s.len() == 1 && s.starts_with(g.letter()))
            .ok_or_else(|| Error::Input(format!("unknown parameter group `{s}`")))
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Hash)]
pub struct GroupSet(u8);

impl GroupSet {
    pub const EMPTY: GroupSet = GroupSet(0);
    pub const ALL: GroupSet = GroupSet(0b1_1111);

    pub fn of(groups: &[Group]) -> Self {
        GroupSet(groups.iter().fold(0, |acc, g| acc | g.bit()))
    }

    pub fn contains(self, g: Group) -> bool {
        self.0 & g.bit() != 0
    }

    pub fn is_empty(self) -> bool {
        self.0 == 0
    }

    pub fn complement(self) -> Self {
        GroupSet(!self.0 & Self::ALL.0)
    }

    pub fn iter(self) -> impl Iterator<Item = Group> {
        Group::ALL.into_iter().filter(move |g| self.contains(*g))
    }
}

impl fmt::Display for GroupSet {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let letters: Vec<String> = self.iter().map(|g| g.letter().to_string()).collect();
        write!(f, "{{{}}}", letters.join(","))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Param {
    pub name: String,
    pub group: Group,
    pub shape: Vec<usize>,
    pub data: Vec<f64>,
}

impl Param {
    pub fn numel(&self) -> usize {
        self.data.len()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct ParamId(pub usize);

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct BufferId(pub usize);

/// Named trainable parameters plus non-trainable buffers (batch-norm running
/// statistics), both tagged with the group that owns them.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct ParamStore {
    pub params: Vec<Param>,
    pub buffers: Vec<Param>,
}

impl ParamStore {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn add(&mut self, name: String, group: Group, shape: Vec<usize>, data: Vec<f64>) -> ParamId {
        debug_assert_eq!(shape.iter().product::<usize>(), data.len());
        self.params.push(Param {
            name,
            group,
            shape,
            data,
        });
        ParamId(self.params.len() - 1)
    }

    /// Kaiming-normal (fan-in) initialization.
    pub fn add_kaiming<R: Rng>(
        &mut self,
        name: String,
        group: Group,
        shape: Vec<usize>,
        fan_in: usize,
        rng: &mut R,
    ) -> ParamId {
        let std = (2.0 / fan_in as f64).sqrt();
        let n = shape.iter().product();
        let data = (0..n)
            .map(|_| std * rng.sample::<f64, _>(StandardNormal))
            .collect();
        self.add(name, group, shape, data)
    }

    pub fn add_const(&mut self, name: String, group: Group, shape: Vec<usize>, v: f64) -> ParamId {
        let n = shape.iter().product();
        self.add(name, group, shape, vec![v; n])
    }

    pub fn add_buffer(&mut self, name: String, group: Group, len: usize, v: f64) -> BufferId {
        self.buffers.push(Param {
            name,
            group,
            shape: vec![len],
            data: vec![v; len],
        });
        BufferId(self.buffers.len() - 1)
    }

    pub fn get(&self, id: ParamId) -> &[f64] {
        &self.params[id.0].data
    }

    pub fn buffer(&self, id: BufferId) -> &[f64] {
        &self.buffers[id.0].data
    }

    pub fn num_parameters(&self) -> usize {
        self.params.iter().map(Param::numel).sum()
    }

    pub fn apply(&mut self, updates: &[StatUpdate]) {
        for u in updates {
            let m = u.momentum;
            for (r, v) in self.buffers[u.mean.0].data.iter_mut().zip(&u.batch_mean) {
                *r = (1.0 - m) * *r + m * v;
            }
            for (r, v) in self.buffers[u.var.0].data.iter_mut().zip(&u.batch_var) {
                *r = (1.0 - m) * *r + m * v;
            }
        }
    }
}

/// Running-statistic update produced by a training-mode batch-norm forward.
#[derive(Debug, Clone)]
pub struct StatUpdate {
    pub mean: BufferId,
    pub var: BufferId,
    pub momentum: f64,
    pub batch_mean: Vec<f64>,
    /// Unbiased batch variance.
    pub batch_var: Vec<f64>,
}

/// Lazily allocated gradient buffers, indexed like [`ParamStore::params`].
#[derive(Debug, Clone, Default)]
pub struct Grads {
    slots: Vec<Option<Vec<f64>>>,
}

impl Grads {
    pub fn for_store(store: &ParamStore) -> Self {
        Self {
            slots: vec![None; store.params.len()],
        }
    }

    pub fn acc(&mut self, id: ParamId, len: usize) -> &mut [f64] {
        self.slots[id.0].get_or_insert_with(|| vec![0.0; len])
    }

    pub fn get(&self, id: ParamId) -> Option<&[f64]> {
        self.slots[id.0].as_deref()
    }

    pub fn len(&self) -> usize {
        self.slots.len()
    }

    pub fn is_empty(&self) -> bool {
        self.slots.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = (ParamId, &[f64])> {
        self.slots
            .iter()
            .enumerate()
            .filter_map(|(i, s)| s.as_deref().map(|g| (ParamId(i), g)))
    }
}
