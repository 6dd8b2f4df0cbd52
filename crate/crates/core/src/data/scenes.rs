use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::modality::Modality;
use crate::prob::rng::Rng;

use super::world::World;

/// Which agent's sensors produced a scene.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum View {
    A,
    B,
}

impl View {
    pub fn other(self) -> View {
        match self {
            View::A => View::B,
            View::B => View::A,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ObjectObs {
    pub position: Vec<f64>,
    pub object: Vec<f64>,
    pub color: Vec<f64>,
}

/// Hidden labels, used only for evaluation.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SceneTruth {
    pub action_type: usize,
    pub position_region: Vec<usize>,
    pub object_type: Vec<usize>,
    pub color_type: Vec<usize>,
}

impl SceneTruth {
    /// True type of object `j` in modality `m` (`j` is ignored for action).
    pub fn label(&self, m: Modality, j: usize) -> usize {
        match m {
            Modality::Action => self.action_type,
            Modality::Position => self.position_region[j],
            Modality::Object => self.object_type[j],
            Modality::Color => self.color_type[j],
        }
    }
}

/// One trial as seen by one agent: objects on the table plus one action.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Scene {
    pub id: usize,
    pub objects: Vec<ObjectObs>,
    pub action: Vec<f64>,
    pub attended: usize,
    pub truth: SceneTruth,
}

impl Scene {
    pub fn n_objects(&self) -> usize {
        self.objects.len()
    }

    /// Observation of object `j` in modality `m`; action is scene-level.
    pub fn obs(&self, m: Modality, j: usize) -> &[f64] {
        match m {
            Modality::Action => &self.action,
            Modality::Position => &self.objects[j].position,
            Modality::Object => &self.objects[j].object,
            Modality::Color => &self.objects[j].color,
        }
    }

    /// Observation of the attended object (or the action) in modality `m`.
    pub fn attended_obs(&self, m: Modality) -> &[f64] {
        self.obs(m, self.attended)
    }

    /// Number of observations this scene contributes to modality `m`.
    pub fn n_obs(&self, m: Modality) -> usize {
        if m.is_object_level() {
            self.objects.len()
        } else {
            1
        }
    }
}

/// The two agents' views of the same trials, plus the train/test split.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SceneSet {
    pub scenes_a: Vec<Scene>,
    pub scenes_b: Vec<Scene>,
    pub train: Vec<usize>,
    pub test: Vec<usize>,
}

impl SceneSet {
    pub fn len(&self) -> usize {
        self.scenes_a.len()
    }

    pub fn is_empty(&self) -> bool {
        self.scenes_a.is_empty()
    }

    pub fn view(&self, v: View) -> &[Scene] {
        match v {
            View::A => &self.scenes_a,
            View::B => &self.scenes_b,
        }
    }

    pub fn train_view(&self, v: View) -> Vec<Scene> {
        self.train.iter().map(|&i| self.view(v)[i].clone()).collect()
    }

    pub fn test_view(&self, v: View) -> Vec<Scene> {
        self.test.iter().map(|&i| self.view(v)[i].clone()).collect()
    }

    /// Checks the two-view and split invariants.
    pub fn validate(&self) -> Result<()> {
        if self.scenes_a.len() != self.scenes_b.len() {
            return Err(Error::invalid("views have different scene counts"));
        }
        for (a, b) in self.scenes_a.iter().zip(&self.scenes_b) {
            if a.truth != b.truth || a.attended != b.attended || a.objects.len() != b.objects.len() {
                return Err(Error::invalid(format!("scene {} differs between views", a.id)));
            }
            if a.objects.is_empty() || a.attended >= a.objects.len() {
                return Err(Error::invalid(format!("scene {} has no valid attended object", a.id)));
            }
        }
        let n = self.len();
        let mut seen = vec![false; n];
        for &i in self.train.iter().chain(&self.test) {
            if i >= n || seen[i] {
                return Err(Error::invalid(format!("split index {i} out of range or repeated")));
            }
            seen[i] = true;
        }
        Ok(())
    }
}

/// A color x object combination kept out of the attended objects of the
/// training split.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct NovelPair {
    pub color_type: usize,
    pub object_type: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SceneOptions {
    pub n_scenes: usize,
    /// Inclusive range of objects per scene.
    pub m_range: (usize, usize),
    pub train_fraction: f64,
    /// When set, every test scene attends an object with this combination
    /// and no training scene does.
    pub novel: Option<NovelPair>,
}

impl Default for SceneOptions {
    fn default() -> Self {
        SceneOptions {
            n_scenes: 40,
            m_range: (1, 3),
            train_fraction: 0.75,
            novel: None,
        }
    }
}

fn noisy(center: &[f64], sd: f64, rng: &mut Rng) -> Vec<f64> {
    center.iter().map(|c| c + sd * rng.standard_normal()).collect()
}

fn observe(world: &World, truth: &SceneTruth, attended: usize, id: usize, rng: &mut Rng) -> Scene {
    let noise = &world.spec.noise_scale;
    let p = &world.prototypes;
    let objects = (0..truth.object_type.len())
        .map(|j| ObjectObs {
            position: noisy(&p.position[truth.position_region[j]], noise.position, rng),
            object: noisy(&p.object[truth.object_type[j]], noise.object, rng),
            color: noisy(&p.color[truth.color_type[j]], noise.color, rng),
        })
        .collect();
    let center = world.action_center(truth.action_type, truth.position_region[attended]);
    Scene {
        id,
        objects,
        action: noisy(&center, noise.action, rng),
        attended,
        truth: truth.clone(),
    }
}

/// Scenes with uniformly drawn labels; the first `3/4` are training scenes.
pub fn generate_scenes(world: &World, n_scenes: usize, m_range: (usize, usize), rng: &mut Rng) -> Result<SceneSet> {
    generate_scenes_with(
        world,
        &SceneOptions {
            n_scenes,
            m_range,
            ..SceneOptions::default()
        },
        rng,
    )
}

pub fn generate_scenes_with(world: &World, opts: &SceneOptions, rng: &mut Rng) -> Result<SceneSet> {
    let spec = &world.spec;
    let (m_lo, m_hi) = opts.m_range;
    if opts.n_scenes == 0 {
        return Err(Error::invalid("need at least one scene"));
    }
    if m_lo == 0 || m_hi < m_lo {
        return Err(Error::invalid(format!("bad object-count range {:?}", opts.m_range)));
    }
    if !(0.0..=1.0).contains(&opts.train_fraction) {
        return Err(Error::invalid("train_fraction must lie in [0, 1]"));
    }
    if let Some(np) = opts.novel {
        if np.color_type >= spec.n_color_types || np.object_type >= spec.n_object_types {
            return Err(Error::invalid("novel pair outside the world's types"));
        }
        if spec.n_color_types * spec.n_object_types < 2 {
            return Err(Error::Generation("no combination left for training".into()));
        }
    }
    let n_train = (opts.n_scenes as f64 * opts.train_fraction).round() as usize;
    let mut scenes_a = Vec::with_capacity(opts.n_scenes);
    let mut scenes_b = Vec::with_capacity(opts.n_scenes);
    for id in 0..opts.n_scenes {
        let m = m_lo + rng.below(m_hi - m_lo + 1);
        let attended = rng.below(m);
        let mut truth = SceneTruth {
            action_type: rng.below(spec.n_action_types),
            position_region: (0..m).map(|_| rng.below(spec.n_position_regions)).collect(),
            object_type: (0..m).map(|_| rng.below(spec.n_object_types)).collect(),
            color_type: (0..m).map(|_| rng.below(spec.n_color_types)).collect(),
        };
        if let Some(np) = opts.novel {
            let is_test = id >= n_train;
            if is_test {
                truth.color_type[attended] = np.color_type;
                truth.object_type[attended] = np.object_type;
            } else {
                while truth.color_type[attended] == np.color_type
                    && truth.object_type[attended] == np.object_type
                {
                    truth.color_type[attended] = rng.below(spec.n_color_types);
                    truth.object_type[attended] = rng.below(spec.n_object_types);
                }
            }
        }
        scenes_a.push(observe(world, &truth, attended, id, rng));
        scenes_b.push(observe(world, &truth, attended, id, rng));
    }
    Ok(SceneSet {
        scenes_a,
        scenes_b,
        train: (0..n_train).collect(),
        test: (n_train..opts.n_scenes).collect(),
    })
}

fn attended_pair(s: &Scene) -> (usize, usize) {
    (s.truth.color_type[s.attended], s.truth.object_type[s.attended])
}

/// Moves every scene whose attended object is `(color_type, object_type)`
/// into the test split. Both member types must still be attended somewhere
/// in the remaining training scenes.
pub fn hold_out_novel_combination(set: &SceneSet, color_type: usize, object_type: usize) -> Result<SceneSet> {
    let pair = (color_type, object_type);
    if !set.scenes_a.iter().any(|s| attended_pair(s) == pair) {
        return Err(Error::invalid(format!(
            "combination color {color_type} x object {object_type} does not occur"
        )));
    }
    let (moved, train): (Vec<usize>, Vec<usize>) = set
        .train
        .iter()
        .partition(|&&i| attended_pair(&set.scenes_a[i]) == pair);
    let color_left = train
        .iter()
        .any(|&i| attended_pair(&set.scenes_a[i]).0 == color_type);
    let object_left = train
        .iter()
        .any(|&i| attended_pair(&set.scenes_a[i]).1 == object_type);
    if !color_left || !object_left {
        return Err(Error::Generation(format!(
            "holding out color {color_type} x object {object_type} removes a type from training"
        )));
    }
    let mut test = set.test.clone();
    test.extend(moved);
    test.sort_unstable();
    Ok(SceneSet {
        scenes_a: set.scenes_a.clone(),
        scenes_b: set.scenes_b.clone(),
        train,
        test,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::world::{generate_world, WorldSpec};
    use crate::modality::ByModality;

    fn default_set(seed: u64) -> (World, SceneSet) {
        let mut rng = Rng::new(seed);
        let world = generate_world(&WorldSpec::default(), &mut rng).unwrap();
        let set = generate_scenes(&world, 40, (1, 3), &mut rng).unwrap();
        (world, set)
    }

    #[test]
    fn default_split_is_30_10() {
        let (_, set) = default_set(1);
        assert_eq!(set.train.len(), 30);
        assert_eq!(set.test.len(), 10);
        assert_eq!(set.train, (0..30).collect::<Vec<_>>());
        set.validate().unwrap();
    }

    #[test]
    fn views_share_truth() {
        let (_, set) = default_set(2);
        for (a, b) in set.scenes_a.iter().zip(&set.scenes_b) {
            assert_eq!(a.truth, b.truth);
            assert_eq!(a.attended, b.attended);
            assert!(a.attended < a.n_objects());
            assert!((1..=3).contains(&a.n_objects()));
        }
        assert_ne!(set.scenes_a[0].action, set.scenes_b[0].action);
    }

    #[test]
    fn noiseless_views_equal_prototypes() {
        let spec = WorldSpec {
            noise_scale: ByModality::new(0.0, 0.0, 0.0, 0.0),
            ..WorldSpec::default()
        };
        let mut rng = Rng::new(3);
        let world = generate_world(&spec, &mut rng).unwrap();
        let set = generate_scenes(&world, 20, (1, 3), &mut rng).unwrap();
        for (a, b) in set.scenes_a.iter().zip(&set.scenes_b) {
            assert_eq!(a.objects, b.objects);
            assert_eq!(a.action, b.action);
            for m in Modality::ALL {
                for j in 0..a.n_obs(m) {
                    let label = a.truth.label(m, j);
                    if m == Modality::Action {
                        let region = a.truth.position_region[a.attended];
                        assert_eq!(a.action, world.action_center(label, region));
                    } else {
                        assert_eq!(a.obs(m, j), world.prototypes[m][label].as_slice());
                        assert_eq!(world.nearest_prototype(m, a.obs(m, j)), label);
                    }
                }
            }
        }
    }

    #[test]
    fn novel_pair_only_in_test() {
        let mut rng = Rng::new(4);
        let world = generate_world(&WorldSpec::default(), &mut rng).unwrap();
        let np = NovelPair {
            color_type: 1,
            object_type: 2,
        };
        let opts = SceneOptions {
            novel: Some(np),
            ..SceneOptions::default()
        };
        let set = generate_scenes_with(&world, &opts, &mut rng).unwrap();
        for &i in &set.train {
            assert_ne!(attended_pair(&set.scenes_a[i]), (1, 2));
        }
        for &i in &set.test {
            assert_eq!(attended_pair(&set.scenes_a[i]), (1, 2));
        }
    }

    fn pick_pair(set: &SceneSet) -> (usize, usize) {
        let mut counts = std::collections::BTreeMap::new();
        for &i in &set.train {
            *counts.entry(attended_pair(&set.scenes_a[i])).or_insert(0) += 1;
        }
        *counts.iter().max_by_key(|(_, c)| **c).unwrap().0
    }

    #[test]
    fn hold_out_moves_pair_and_keeps_types() {
        let (_, set) = default_set(5);
        let (c, o) = pick_pair(&set);
        let held = hold_out_novel_combination(&set, c, o).unwrap();
        held.validate().unwrap();
        assert!(held.train.iter().all(|&i| attended_pair(&held.scenes_a[i]) != (c, o)));
        assert!(held.train.iter().any(|&i| attended_pair(&held.scenes_a[i]).0 == c));
        assert!(held.train.iter().any(|&i| attended_pair(&held.scenes_a[i]).1 == o));
        assert_eq!(held.train.len() + held.test.len(), 40);
        let again = hold_out_novel_combination(&held, c, o).unwrap();
        assert_eq!(again, held);
    }

    #[test]
    fn hold_out_absent_pair_rejected() {
        let (_, set) = default_set(6);
        assert!(hold_out_novel_combination(&set, 99, 99).is_err());
    }

    #[test]
    fn hold_out_that_empties_a_type_fails() {
        let spec = WorldSpec {
            n_color_types: 1,
            n_object_types: 1,
            ..WorldSpec::default()
        };
        let mut rng = Rng::new(7);
        let world = generate_world(&spec, &mut rng).unwrap();
        let set = generate_scenes(&world, 10, (1, 2), &mut rng).unwrap();
        assert!(matches!(
            hold_out_novel_combination(&set, 0, 0),
            Err(Error::Generation(_))
        ));
    }
}
