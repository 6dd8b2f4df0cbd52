//! Synthetic multimodal scenes with hidden ground-truth labels.
//!
//! Each modality has a set of prototype vectors; an observation is its
//! prototype plus isotropic Gaussian noise. Both agents see the same scenes
//! (same labels, same attended object) through independent noise.

mod io;
mod scenes;
mod world;

pub use io::{load_scenes, load_scenes_expecting, save_scenes};
pub use scenes::{
    generate_scenes, generate_scenes_with, hold_out_novel_combination, NovelPair, ObjectObs,
    Scene, SceneOptions, SceneSet, SceneTruth, View,
};
pub use world::{generate_world, World, WorldSpec};
