use std::collections::{BTreeMap, HashMap};
use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{ApiError, BoundingBox, ImageHandle, VisionProvider};
use crate::model::normalize_answer;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FixtureObject {
    pub name: String,
    #[serde(rename = "box")]
    pub bbox: [f64; 4],
    #[serde(default = "default_score")]
    pub score: f64,
}

fn default_score() -> f64 {
    1.0
}

/// Declarative scene: detected objects, scripted answers and a caption.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SceneFixture {
    pub image_id: String,
    #[serde(default)]
    pub caption: String,
    #[serde(default)]
    pub objects: Vec<FixtureObject>,
    #[serde(default)]
    pub qa: BTreeMap<String, String>,
}

impl SceneFixture {
    /// Lower-cases object names and normalizes question keys.
    fn normalized(mut self) -> Result<Self, ApiError> {
        for obj in &mut self.objects {
            obj.name = normalize_answer(&obj.name);
            BoundingBox::new(obj.bbox, obj.name.clone(), obj.score)?;
        }
        self.qa = self.qa.into_iter().map(|(q, a)| (normalize_answer(&q), a)).collect();
        Ok(self)
    }
}

#[derive(Debug, Clone, Default)]
pub struct FixtureProvider {
    scenes: HashMap<String, SceneFixture>,
}

impl FixtureProvider {
    pub fn new(scenes: impl IntoIterator<Item = SceneFixture>) -> Result<Self, ApiError> {
        let mut out = HashMap::new();
        for scene in scenes {
            let scene = scene.normalized()?;
            out.insert(scene.image_id.clone(), scene);
        }
        Ok(Self { scenes: out })
    }

    pub fn from_json(text: &str) -> Result<SceneFixture, ApiError> {
        serde_json::from_str(text).map_err(|e| ApiError::Protocol(format!("fixture: {e}")))
    }

    /// Loads every `*.json` file in `dir`.
    pub fn load_dir(dir: &Path) -> Result<Self, ApiError> {
        let entries = fs::read_dir(dir).map_err(|e| ApiError::Transport(format!("{}: {e}", dir.display())))?;
        let mut paths: Vec<_> = entries
            .filter_map(|e| e.ok().map(|e| e.path()))
            .filter(|p| p.extension().is_some_and(|x| x == "json"))
            .collect();
        paths.sort();
        let mut scenes = Vec::with_capacity(paths.len());
        for path in paths {
            let text = fs::read_to_string(&path).map_err(|e| ApiError::Transport(format!("{}: {e}", path.display())))?;
            let scene = Self::from_json(&text)
                .map_err(|e| ApiError::Protocol(format!("{}: {e}", path.display())))?;
            scenes.push(scene);
        }
        Self::new(scenes)
    }

    pub fn scene(&self, image_id: &str) -> Option<&SceneFixture> {
        self.scenes.get(image_id)
    }

    fn lookup(&self, image: &ImageHandle) -> Result<&SceneFixture, ApiError> {
        self.scenes
            .get(image.base())
            .ok_or_else(|| ApiError::UnknownImage(image.base().to_string()))
    }
}

impl VisionProvider for FixtureProvider {
    fn get_object_boxes(&self, image: &ImageHandle, object_name: &str) -> Result<Vec<BoundingBox>, ApiError> {
        let scene = self.lookup(image)?;
        let wanted = normalize_answer(object_name);
        let boxes = scene
            .objects
            .iter()
            .filter(|o| o.name == wanted)
            .map(|o| BoundingBox::new(o.bbox, o.name.clone(), o.score))
            .collect::<Result<Vec<_>, _>>()?;
        Ok(image.localize(boxes))
    }

    fn query(&self, image: &ImageHandle, question: &str) -> Result<String, ApiError> {
        let scene = self.lookup(image)?;
        Ok(scene
            .qa
            .get(&normalize_answer(question))
            .cloned()
            .unwrap_or_else(|| scene.caption.clone()))
    }

    fn crop(&self, image: &ImageHandle, bbox: &BoundingBox) -> Result<ImageHandle, ApiError> {
        self.lookup(image)?;
        image.crop(bbox)
    }
}
