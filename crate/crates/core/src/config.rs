//! Flat `key = value` run configuration for training and detection.
//!
//! Blank lines and `#` comments are ignored; every key is optional.
//!
//! | key | default |
//! |-----|---------|
//! | `profile` | `full` |
//! | `input_size` | profile default (416 or 160) |
//! | `input_channels` | `3` |
//! | `num_anchors` | `5` |
//! | `anchors` | `default`, `kmeans`, or `w,h w,h …` in grid cells |
//! | `init_seed` | `0` |
//! | `epochs`, `batch_size` | `100`, `8` |
//! | `learning_rate`, `momentum`, `weight_decay` | `0.001`, `0.9`, `0.0005` |
//! | `lambda_coord`, `lambda_noobj` | `5`, `0.5` |
//! | `seed` | `0` (mini-batch shuffling) |
//! | `warmup_epochs` | `0` |
//! | `lr_steps` | empty; comma-separated epochs |
//! | `grad_clip` | `0` (off); largest global gradient norm |
//! | `conf_threshold`, `nms_threshold` | `0.005`, `0.45` (detection output) |
//! | `classes` | unset; `iris`, `periocular` or `both` |

use std::fmt::Write as _;
use std::fs;
use std::path::Path;
use std::str::FromStr;

use crate::error::{Error, Result};
use crate::head::DEFAULT_NMS_THRESHOLD;
use crate::network::{Anchor, NetworkConfig, Profile, DEFAULT_ANCHORS};
use crate::training::TrainConfig;

/// Lowest confidence written to detection files. Kept well below the 0.25
/// display threshold so that AP sees the whole ranking.
pub const DEFAULT_DETECT_THRESHOLD: f64 = 0.005;

#[derive(Debug, Clone, PartialEq)]
pub enum AnchorSpec {
    Default,
    /// k-means over the training boxes.
    KMeans,
    Explicit(Vec<Anchor>),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ClassSelection {
    Iris,
    Periocular,
    Both,
}

impl ClassSelection {
    pub fn parse(s: &str) -> Result<Self> {
        match s {
            "iris" => Ok(ClassSelection::Iris),
            "periocular" => Ok(ClassSelection::Periocular),
            "both" => Ok(ClassSelection::Both),
            other => Err(Error::invalid(format!(
                "unknown class selection {other:?} (expected iris, periocular or both)"
            ))),
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            ClassSelection::Iris => "iris",
            ClassSelection::Periocular => "periocular",
            ClassSelection::Both => "both",
        }
    }

    pub fn num_classes(self) -> usize {
        match self {
            ClassSelection::Both => 2,
            _ => 1,
        }
    }

    /// Dataset class ids covered, in model order.
    pub fn dataset_classes(self) -> Vec<usize> {
        match self {
            ClassSelection::Iris => vec![crate::head::IRIS],
            ClassSelection::Periocular => vec![crate::head::PERIOCULAR],
            ClassSelection::Both => vec![crate::head::IRIS, crate::head::PERIOCULAR],
        }
    }

    pub fn to_model(self, dataset_class: usize) -> Option<usize> {
        self.dataset_classes().iter().position(|&c| c == dataset_class)
    }

    pub fn to_dataset(self, model_class: usize) -> usize {
        self.dataset_classes()[model_class]
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub input_size: Option<usize>,
    pub input_channels: usize,
    pub num_anchors: usize,
    pub anchors: AnchorSpec,
    pub init_seed: u64,
    pub train: TrainConfig,
    pub conf_threshold: f64,
    pub nms_threshold: f64,
    pub classes: Option<ClassSelection>,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            input_size: None,
            input_channels: 3,
            num_anchors: DEFAULT_ANCHORS.len(),
            anchors: AnchorSpec::Default,
            init_seed: 0,
            train: TrainConfig::default(),
            conf_threshold: DEFAULT_DETECT_THRESHOLD,
            nms_threshold: DEFAULT_NMS_THRESHOLD,
            classes: None,
        }
    }
}

fn parse_value<T: FromStr>(value: &str) -> std::result::Result<T, String> {
    value.parse().map_err(|_| format!("invalid value {value:?}"))
}

fn parse_anchors(value: &str) -> std::result::Result<AnchorSpec, String> {
    match value {
        "default" => return Ok(AnchorSpec::Default),
        "kmeans" => return Ok(AnchorSpec::KMeans),
        _ => {}
    }
    value
        .split_whitespace()
        .map(|pair| {
            let (w, h) = pair.split_once(',').ok_or_else(|| format!("anchor {pair:?} is not w,h"))?;
            Ok(Anchor {
                w: parse_value(w)?,
                h: parse_value(h)?,
            })
        })
        .collect::<std::result::Result<Vec<_>, String>>()
        .map(AnchorSpec::Explicit)
}

impl RunConfig {
    pub fn profile(&self) -> Profile {
        self.train.profile
    }

    pub fn resolved_input_size(&self) -> usize {
        self.input_size.unwrap_or(self.profile().default_input_size())
    }

    /// Network configuration with the given priors.
    pub fn network(&self, num_classes: usize, anchors: Vec<Anchor>) -> Result<NetworkConfig> {
        let net = NetworkConfig {
            num_classes,
            num_anchors: self.num_anchors,
            input_channels: self.input_channels,
            input_size: self.resolved_input_size(),
            anchors,
            profile: self.profile(),
        };
        net.validate()?;
        Ok(net)
    }

    pub fn parse(text: &str, context: &str) -> Result<Self> {
        let mut cfg = RunConfig::default();
        for (i, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let err = |message: String| Error::Parse {
                context: context.to_string(),
                line: i + 1,
                message,
            };
            let (key, value) = line
                .split_once('=')
                .ok_or_else(|| err(format!("expected key = value, found {line:?}")))?;
            let (key, value) = (key.trim(), value.trim());
            cfg.set(key, value).map_err(|m| err(format!("{key}: {m}")))?;
        }
        cfg.validate()?;
        Ok(cfg)
    }

    fn set(&mut self, key: &str, value: &str) -> std::result::Result<(), String> {
        let t = &mut self.train;
        match key {
            "profile" => t.profile = Profile::parse(value).map_err(|e| e.to_string())?,
            "input_size" => self.input_size = Some(parse_value(value)?),
            "input_channels" => self.input_channels = parse_value(value)?,
            "num_anchors" => self.num_anchors = parse_value(value)?,
            "anchors" => self.anchors = parse_anchors(value)?,
            "init_seed" => self.init_seed = parse_value(value)?,
            "epochs" => t.epochs = parse_value(value)?,
            "batch_size" => t.batch_size = parse_value(value)?,
            "learning_rate" => t.learning_rate = parse_value(value)?,
            "momentum" => t.momentum = parse_value(value)?,
            "weight_decay" => t.weight_decay = parse_value(value)?,
            "lambda_coord" => t.lambda_coord = parse_value(value)?,
            "lambda_noobj" => t.lambda_noobj = parse_value(value)?,
            "seed" => t.seed = parse_value(value)?,
            "warmup_epochs" => t.warmup_epochs = parse_value(value)?,
            "grad_clip" => t.grad_clip = parse_value(value)?,
            "lr_steps" => {
                t.lr_steps = value
                    .split(',')
                    .map(str::trim)
                    .filter(|s| !s.is_empty())
                    .map(parse_value)
                    .collect::<std::result::Result<_, _>>()?
            }
            "conf_threshold" => self.conf_threshold = parse_value(value)?,
            "nms_threshold" => self.nms_threshold = parse_value(value)?,
            "classes" => self.classes = Some(ClassSelection::parse(value).map_err(|e| e.to_string())?),
            _ => return Err("unknown key".into()),
        }
        Ok(())
    }

    pub fn validate(&self) -> Result<()> {
        self.train.validate()?;
        if let AnchorSpec::Explicit(a) = &self.anchors {
            if a.len() != self.num_anchors {
                return Err(Error::invalid(format!(
                    "{} anchors listed but num_anchors = {}",
                    a.len(),
                    self.num_anchors
                )));
            }
        }
        if self.anchors == AnchorSpec::Default && self.num_anchors != DEFAULT_ANCHORS.len() {
            return Err(Error::invalid("default anchors require num_anchors = 5"));
        }
        if !(0.0..=1.0).contains(&self.conf_threshold) {
            return Err(Error::invalid(format!("conf_threshold {} outside [0, 1]", self.conf_threshold)));
        }
        if !(self.nms_threshold > 0.0 && self.nms_threshold < 1.0) {
            return Err(Error::invalid(format!("nms_threshold {} outside (0, 1)", self.nms_threshold)));
        }
        // surfaces input size / channel errors early
        self.network(1, vec![Anchor { w: 1.0, h: 1.0 }; self.num_anchors])?;
        Ok(())
    }

    /// Every key with its resolved value; parses back to an equal config
    /// (with `input_size` made explicit).
    pub fn to_text(&self) -> String {
        let t = &self.train;
        let mut s = String::new();
        let _ = writeln!(s, "profile = {}", t.profile.name());
        let _ = writeln!(s, "input_size = {}", self.resolved_input_size());
        let _ = writeln!(s, "input_channels = {}", self.input_channels);
        let _ = writeln!(s, "num_anchors = {}", self.num_anchors);
        let anchors = match &self.anchors {
            AnchorSpec::Default => "default".to_string(),
            AnchorSpec::KMeans => "kmeans".to_string(),
            AnchorSpec::Explicit(a) => a.iter().map(|a| format!("{},{}", a.w, a.h)).collect::<Vec<_>>().join(" "),
        };
        let _ = writeln!(s, "anchors = {anchors}");
        let _ = writeln!(s, "init_seed = {}", self.init_seed);
        let _ = writeln!(s, "epochs = {}", t.epochs);
        let _ = writeln!(s, "batch_size = {}", t.batch_size);
        let _ = writeln!(s, "learning_rate = {}", t.learning_rate);
        let _ = writeln!(s, "momentum = {}", t.momentum);
        let _ = writeln!(s, "weight_decay = {}", t.weight_decay);
        let _ = writeln!(s, "lambda_coord = {}", t.lambda_coord);
        let _ = writeln!(s, "lambda_noobj = {}", t.lambda_noobj);
        let _ = writeln!(s, "seed = {}", t.seed);
        let _ = writeln!(s, "warmup_epochs = {}", t.warmup_epochs);
        let steps: Vec<String> = t.lr_steps.iter().map(|e| e.to_string()).collect();
        let _ = writeln!(s, "lr_steps = {}", steps.join(","));
        let _ = writeln!(s, "grad_clip = {}", t.grad_clip);
        let _ = writeln!(s, "conf_threshold = {}", self.conf_threshold);
        let _ = writeln!(s, "nms_threshold = {}", self.nms_threshold);
        if let Some(c) = self.classes {
            let _ = writeln!(s, "classes = {}", c.name());
        }
        s
    }

    pub fn read(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::parse(&text, &path.display().to_string())
    }

    pub fn write(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        fs::write(path, self.to_text()).map_err(|e| Error::io(path, e))
    }
}
