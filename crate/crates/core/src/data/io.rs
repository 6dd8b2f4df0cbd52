use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::modality::ByModality;

use super::scenes::{ObjectObs, Scene, SceneSet, SceneTruth, View};

const SCHEMA: &str = "v1";

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct ObjectRecord {
    pos: Vec<f64>,
    obj: Vec<f64>,
    col: Vec<f64>,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
enum Split {
    Train,
    Test,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct SceneRecord {
    v: String,
    d: usize,
    view: View,
    split: Split,
    action: Vec<f64>,
    objects: Vec<ObjectRecord>,
    attended: usize,
    truth: SceneTruth,
}

impl SceneRecord {
    fn from_scene(s: &Scene, view: View, train: bool) -> Self {
        SceneRecord {
            v: SCHEMA.to_string(),
            d: s.id,
            view,
            split: if train { Split::Train } else { Split::Test },
            action: s.action.clone(),
            objects: s
                .objects
                .iter()
                .map(|o| ObjectRecord {
                    pos: o.position.clone(),
                    obj: o.object.clone(),
                    col: o.color.clone(),
                })
                .collect(),
            attended: s.attended,
            truth: s.truth.clone(),
        }
    }

    fn check_dims(&self, dims: &ByModality<usize>, line: usize) -> Result<()> {
        let bad = |field: &str, got: usize, want: usize| Error::Parse {
            line,
            msg: format!("field `{field}` has {got} entries, expected {want}"),
        };
        if self.action.len() != dims.action {
            return Err(bad("action", self.action.len(), dims.action));
        }
        for o in &self.objects {
            if o.pos.len() != dims.position {
                return Err(bad("pos", o.pos.len(), dims.position));
            }
            if o.obj.len() != dims.object {
                return Err(bad("obj", o.obj.len(), dims.object));
            }
            if o.col.len() != dims.color {
                return Err(bad("col", o.col.len(), dims.color));
            }
        }
        Ok(())
    }

    fn check_shape(&self, line: usize) -> Result<()> {
        let m = self.objects.len();
        let err = |msg: String| Err(Error::Parse { line, msg });
        if self.v != SCHEMA {
            return err(format!("unsupported schema version `{}`", self.v));
        }
        if m == 0 {
            return err("field `objects` is empty".into());
        }
        if self.attended >= m {
            return err(format!("field `attended` = {} but only {m} objects", self.attended));
        }
        let t = &self.truth;
        if t.position_region.len() != m || t.object_type.len() != m || t.color_type.len() != m {
            return err("field `truth` label lists do not match the object count".into());
        }
        let finite = self
            .action
            .iter()
            .chain(self.objects.iter().flat_map(|o| o.pos.iter().chain(&o.obj).chain(&o.col)))
            .all(|x| x.is_finite());
        if !finite {
            return err("non-finite feature value".into());
        }
        Ok(())
    }

    fn into_scene(self) -> Scene {
        Scene {
            id: self.d,
            objects: self
                .objects
                .into_iter()
                .map(|o| ObjectObs {
                    position: o.pos,
                    object: o.obj,
                    color: o.col,
                })
                .collect(),
            action: self.action,
            attended: self.attended,
            truth: self.truth,
        }
    }
}

/// Writes one JSON object per line: all A-view scenes, then all B-view scenes.
pub fn save_scenes(set: &SceneSet, path: &Path) -> Result<()> {
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    let mut out = BufWriter::new(file);
    let mut is_train = vec![false; set.len()];
    for &i in &set.train {
        is_train[i] = true;
    }
    for view in [View::A, View::B] {
        for (i, s) in set.view(view).iter().enumerate() {
            let rec = SceneRecord::from_scene(s, view, is_train[i]);
            let line = serde_json::to_string(&rec).expect("scene records serialize");
            writeln!(out, "{line}").map_err(|e| Error::io(path, e))?;
        }
    }
    out.flush().map_err(|e| Error::io(path, e))
}

/// Reads a scene file, taking feature dimensions from the first record.
pub fn load_scenes(path: &Path) -> Result<SceneSet> {
    load_inner(path, None)
}

/// Reads a scene file and rejects records whose dimensions differ from `dims`.
pub fn load_scenes_expecting(path: &Path, dims: &ByModality<usize>) -> Result<SceneSet> {
    load_inner(path, Some(*dims))
}

fn load_inner(path: &Path, dims: Option<ByModality<usize>>) -> Result<SceneSet> {
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    let mut dims = dims;
    let mut a: Vec<Option<(Scene, bool)>> = Vec::new();
    let mut b: Vec<Option<(Scene, bool)>> = Vec::new();
    let mut last_line = 0;
    for (idx, line) in BufReader::new(file).lines().enumerate() {
        let lineno = idx + 1;
        last_line = lineno;
        let line = line.map_err(|e| Error::io(path, e))?;
        if line.trim().is_empty() {
            continue;
        }
        let rec: SceneRecord = serde_json::from_str(&line).map_err(|e| Error::Parse {
            line: lineno,
            msg: e.to_string(),
        })?;
        rec.check_shape(lineno)?;
        let expected = *dims.get_or_insert_with(|| ByModality {
            action: rec.action.len(),
            position: rec.objects[0].pos.len(),
            object: rec.objects[0].obj.len(),
            color: rec.objects[0].col.len(),
        });
        rec.check_dims(&expected, lineno)?;
        let slot = match rec.view {
            View::A => &mut a,
            View::B => &mut b,
        };
        let d = rec.d;
        if slot.len() <= d {
            slot.resize_with(d + 1, || None);
        }
        if slot[d].is_some() {
            return Err(Error::Parse {
                line: lineno,
                msg: format!("duplicate scene d={d} for view {:?}", rec.view),
            });
        }
        let train = matches!(rec.split, Split::Train);
        slot[d] = Some((rec.into_scene(), train));
    }
    let missing = |what: &str| Error::Parse {
        line: last_line,
        msg: format!("file ended with {what}"),
    };
    if a.is_empty() {
        return Err(missing("no scenes"));
    }
    if a.len() != b.len() {
        return Err(missing("unequal A and B scene counts"));
    }
    let mut set = SceneSet {
        scenes_a: Vec::with_capacity(a.len()),
        scenes_b: Vec::with_capacity(a.len()),
        train: Vec::new(),
        test: Vec::new(),
    };
    for (d, (sa, sb)) in a.into_iter().zip(b).enumerate() {
        let ((sa, train_a), (sb, train_b)) = match (sa, sb) {
            (Some(x), Some(y)) => (x, y),
            _ => return Err(missing(&format!("scene d={d} missing from a view"))),
        };
        if train_a != train_b || sa.truth != sb.truth || sa.attended != sb.attended {
            return Err(missing(&format!("scene d={d} inconsistent between views")));
        }
        if train_a {
            set.train.push(d);
        } else {
            set.test.push(d);
        }
        set.scenes_a.push(sa);
        set.scenes_b.push(sb);
    }
    Ok(set)
}
