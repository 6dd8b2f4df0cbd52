use std::fmt;
use std::ops::{Index, IndexMut};

use serde::{Deserialize, Serialize};

/// One of the four sensory channels an agent observes.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Modality {
    Action,
    Position,
    Object,
    Color,
}

impl Modality {
    /// Canonical order, which is also the fixed utterance slot order.
    pub const ALL: [Modality; 4] = [
        Modality::Action,
        Modality::Position,
        Modality::Object,
        Modality::Color,
    ];

    pub fn index(self) -> usize {
        match self {
            Modality::Action => 0,
            Modality::Position => 1,
            Modality::Object => 2,
            Modality::Color => 3,
        }
    }

    pub fn from_index(i: usize) -> Option<Modality> {
        Modality::ALL.get(i).copied()
    }

    /// Object-level modalities are observed per object; action is per scene.
    pub fn is_object_level(self) -> bool {
        self != Modality::Action
    }

    pub fn short(self) -> &'static str {
        match self {
            Modality::Action => "a",
            Modality::Position => "p",
            Modality::Object => "o",
            Modality::Color => "c",
        }
    }
}

impl fmt::Display for Modality {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            Modality::Action => "action",
            Modality::Position => "position",
            Modality::Object => "object",
            Modality::Color => "color",
        };
        f.write_str(s)
    }
}

/// A value per modality, addressable by [`Modality`].
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct ByModality<T> {
    pub action: T,
    pub position: T,
    pub object: T,
    pub color: T,
}

impl<T> ByModality<T> {
    pub fn new(action: T, position: T, object: T, color: T) -> Self {
        ByModality {
            action,
            position,
            object,
            color,
        }
    }

    pub fn from_fn(mut f: impl FnMut(Modality) -> T) -> Self {
        ByModality {
            action: f(Modality::Action),
            position: f(Modality::Position),
            object: f(Modality::Object),
            color: f(Modality::Color),
        }
    }

    pub fn map<U>(&self, mut f: impl FnMut(Modality, &T) -> U) -> ByModality<U> {
        ByModality::from_fn(|m| f(m, &self[m]))
    }

    pub fn try_map<U, E>(
        &self,
        mut f: impl FnMut(Modality, &T) -> Result<U, E>,
    ) -> Result<ByModality<U>, E> {
        Ok(ByModality {
            action: f(Modality::Action, &self.action)?,
            position: f(Modality::Position, &self.position)?,
            object: f(Modality::Object, &self.object)?,
            color: f(Modality::Color, &self.color)?,
        })
    }

    pub fn iter(&self) -> impl Iterator<Item = (Modality, &T)> {
        Modality::ALL.into_iter().map(move |m| (m, &self[m]))
    }
}

impl<T> Index<Modality> for ByModality<T> {
    type Output = T;

    fn index(&self, m: Modality) -> &T {
        match m {
            Modality::Action => &self.action,
            Modality::Position => &self.position,
            Modality::Object => &self.object,
            Modality::Color => &self.color,
        }
    }
}

impl<T> IndexMut<Modality> for ByModality<T> {
    fn index_mut(&mut self, m: Modality) -> &mut T {
        match m {
            Modality::Action => &mut self.action,
            Modality::Position => &mut self.position,
            Modality::Object => &mut self.object,
            Modality::Color => &mut self.color,
        }
    }
}
