//! Plain-text run configuration.
//!
//! One `key = value` per line; `#` starts a comment. Unknown keys are errors.
//! Relative paths resolve against the directory of the config file.
//!
//! ```text
//! mode = pairs
//! pairs = 0:1
//! n_axes = 1
//! train_images = data/mnist/train-images-idx3-ubyte
//! ```

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use crate::dataset::{Normalization, Preprocess};
use crate::error::{Error, Result};
use crate::lp::PivotRule;
use crate::optimizer::{OptimizerConfig, RefKind};

/// How binary tasks are formed from the labelled data.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum TaskMode {
    /// `(negative, positive)` digit pairs, one forest set per pair.
    Pairs(Vec<(usize, usize)>),
    /// One forest set per class against all other listed classes.
    OneVsRest(Vec<usize>),
}

impl TaskMode {
    /// Digits the classifier distinguishes, in first-appearance order.
    pub fn classes(&self) -> Vec<usize> {
        match self {
            TaskMode::OneVsRest(c) => c.clone(),
            TaskMode::Pairs(p) => {
                let mut out = Vec::new();
                for &(a, b) in p {
                    for d in [a, b] {
                        if !out.contains(&d) {
                            out.push(d);
                        }
                    }
                }
                out
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PipelineConfig {
    pub n1: usize,
    pub n2: usize,
    pub optimizer: OptimizerConfig,
    /// One forest per kind and task.
    pub ref_kinds: Vec<RefKind>,
    pub n_axes: usize,
    /// Orthonormal axes kept after reduction; 0 keeps the raw bundle.
    pub svd_k: usize,
    pub ridge: f64,
    pub mode: TaskMode,
    pub train_images: String,
    pub train_labels: String,
    pub test_images: String,
    pub test_labels: String,
    /// Keep at most this many training samples of the selected classes.
    pub train_limit: Option<usize>,
    pub preprocess: Preprocess,
    /// Reserved; every stage is deterministic.
    pub seed: u64,
    /// Directory relative paths resolve against.
    pub base_dir: PathBuf,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        PipelineConfig {
            n1: 28,
            n2: 28,
            optimizer: OptimizerConfig::default(),
            ref_kinds: vec![RefKind::UMinusV],
            n_axes: 1,
            svd_k: 0,
            ridge: crate::classifier::DEFAULT_RIDGE,
            mode: TaskMode::Pairs(vec![(0, 1)]),
            train_images: "train-images-idx3-ubyte".into(),
            train_labels: "train-labels-idx1-ubyte".into(),
            test_images: "t10k-images-idx3-ubyte".into(),
            test_labels: "t10k-labels-idx1-ubyte".into(),
            train_limit: None,
            preprocess: Preprocess::default(),
            seed: 0,
            base_dir: PathBuf::from("."),
        }
    }
}

fn num<T: std::str::FromStr>(key: &str, v: &str) -> Result<T> {
    v.parse()
        .map_err(|_| Error::Config(format!("`{key}`: cannot parse `{v}`")))
}

fn float(key: &str, v: &str) -> Result<f64> {
    match v {
        "inf" | "+inf" | "infinity" => Ok(f64::INFINITY),
        _ => num(key, v),
    }
}

fn list(key: &str, v: &str) -> Result<Vec<usize>> {
    v.split(',').map(|s| num(key, s.trim())).collect()
}

fn pairs(v: &str) -> Result<Vec<(usize, usize)>> {
    v.split(',')
        .map(|p| {
            let (a, b) = p
                .trim()
                .split_once(':')
                .ok_or_else(|| Error::Config(format!("`pairs`: expected neg:pos, got `{p}`")))?;
            Ok((num("pairs", a.trim())?, num("pairs", b.trim())?))
        })
        .collect()
}

fn boolean(key: &str, v: &str) -> Result<bool> {
    match v {
        "true" | "yes" | "1" => Ok(true),
        "false" | "no" | "0" => Ok(false),
        _ => Err(Error::Config(format!("`{key}`: expected true or false, got `{v}`"))),
    }
}

impl PipelineConfig {
    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let base = path.parent().map(Path::to_path_buf).unwrap_or_default();
        PipelineConfig::parse(&text, base)
    }

    pub fn parse(text: &str, base_dir: impl Into<PathBuf>) -> Result<Self> {
        let mut cfg = PipelineConfig {
            base_dir: base_dir.into(),
            ..Default::default()
        };
        let mut mode_name: Option<String> = None;
        let mut pair_list: Option<Vec<(usize, usize)>> = None;
        let mut class_list: Option<Vec<usize>> = None;
        let mut seen = Vec::new();
        for (lineno, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (key, value) = line.split_once('=').ok_or_else(|| {
                Error::Config(format!("line {}: expected `key = value`", lineno + 1))
            })?;
            let (key, v) = (key.trim(), value.trim());
            if seen.iter().any(|k| k == key) {
                return Err(Error::Config(format!("line {}: `{key}` given twice", lineno + 1)));
            }
            seen.push(key.to_string());
            let o = &mut cfg.optimizer;
            match key {
                "n1" => cfg.n1 = num(key, v)?,
                "n2" => cfg.n2 = num(key, v)?,
                "lambda" => o.lambda = float(key, v)?,
                "tolp" => o.tolp = float(key, v)?,
                "tolq" => o.tolq = float(key, v)?,
                "p_min" => o.p_min = float(key, v)?,
                "q_min" => o.q_min = float(key, v)?,
                "sigma0" => o.sigma0 = float(key, v)?,
                "dx_max" => o.dx_max = float(key, v)?,
                "eps_x" => o.eps_x = float(key, v)?,
                "eps_j" => o.eps_j = float(key, v)?,
                "gamma" => o.gamma = float(key, v)?,
                "max_iters" => o.max_iters = num(key, v)?,
                "max_shrinks" => o.max_shrinks = num(key, v)?,
                "lp_penalty" => {
                    o.penalty = if v == "auto" { None } else { Some(float(key, v)?) }
                }
                "pivot_rule" => {
                    o.pivot_rule = match v {
                        "bland" => PivotRule::Bland,
                        "dantzig" => PivotRule::Dantzig,
                        _ => return Err(Error::Config(format!("`pivot_rule`: unknown rule `{v}`"))),
                    }
                }
                "ref_kind" => {
                    cfg.ref_kinds = v.split(',').map(str::parse).collect::<Result<_>>()?;
                }
                "n_axes" => cfg.n_axes = num(key, v)?,
                "svd_k" => cfg.svd_k = num(key, v)?,
                "ridge" => cfg.ridge = float(key, v)?,
                "mode" => mode_name = Some(v.to_string()),
                "pairs" => pair_list = Some(pairs(v)?),
                "classes" => class_list = Some(list(key, v)?),
                "train_images" => cfg.train_images = v.to_string(),
                "train_labels" => cfg.train_labels = v.to_string(),
                "test_images" => cfg.test_images = v.to_string(),
                "test_labels" => cfg.test_labels = v.to_string(),
                "train_limit" => {
                    cfg.train_limit = if v == "none" { None } else { Some(num(key, v)?) }
                }
                "normalization" => cfg.preprocess.normalization = v.parse::<Normalization>()?,
                "align_centroid" => cfg.preprocess.align_centroid = boolean(key, v)?,
                "seed" => cfg.seed = num(key, v)?,
                _ => return Err(Error::Config(format!("line {}: unknown key `{key}`", lineno + 1))),
            }
        }
        cfg.mode = match mode_name.as_deref().unwrap_or("pairs") {
            "pairs" => {
                if class_list.is_some() {
                    return Err(Error::Config("`classes` applies to mode one_vs_rest".into()));
                }
                TaskMode::Pairs(pair_list.unwrap_or_else(|| vec![(0, 1)]))
            }
            "one_vs_rest" => {
                if pair_list.is_some() {
                    return Err(Error::Config("`pairs` applies to mode pairs".into()));
                }
                TaskMode::OneVsRest(class_list.ok_or_else(|| {
                    Error::Config("mode one_vs_rest needs `classes`".into())
                })?)
            }
            other => return Err(Error::Config(format!("unknown mode `{other}`"))),
        };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        if self.n1 == 0 || self.n2 == 0 {
            return Err(Error::Config("mesh sides must be positive".into()));
        }
        self.optimizer.validate(self.n1 * self.n2)?;
        if self.ref_kinds.is_empty() {
            return Err(Error::Config("`ref_kind` lists no kinds".into()));
        }
        if self.n_axes == 0 {
            return Err(Error::Config("`n_axes` must be at least 1".into()));
        }
        if !(self.ridge >= 0.0 && self.ridge.is_finite()) {
            return Err(Error::Config("`ridge` must be finite and non-negative".into()));
        }
        let classes = self.mode.classes();
        match &self.mode {
            TaskMode::Pairs(p) => {
                if p.is_empty() || p.iter().any(|(a, b)| a == b) {
                    return Err(Error::Config("`pairs` needs distinct digit pairs".into()));
                }
            }
            TaskMode::OneVsRest(c) => {
                let mut sorted = c.clone();
                sorted.sort_unstable();
                sorted.dedup();
                if c.len() < 2 || sorted.len() != c.len() {
                    return Err(Error::Config("`classes` needs at least two distinct digits".into()));
                }
            }
        }
        if classes.len() < 2 {
            return Err(Error::Config("at least two classes are needed".into()));
        }
        Ok(())
    }

    pub fn resolve(&self, p: &str) -> PathBuf {
        let path = Path::new(p);
        if path.is_absolute() {
            path.to_path_buf()
        } else {
            self.base_dir.join(path)
        }
    }

    /// Canonical text; parses back to an equal config.
    pub fn to_text(&self) -> String {
        let o = &self.optimizer;
        let mut s = String::new();
        let mut kv = |k: &str, v: String| {
            let _ = writeln!(s, "{k} = {v}");
        };
        kv("n1", self.n1.to_string());
        kv("n2", self.n2.to_string());
        kv("lambda", format!("{:?}", o.lambda));
        kv("tolp", format!("{:?}", o.tolp));
        kv("tolq", format!("{:?}", o.tolq));
        kv("p_min", format!("{:?}", o.p_min));
        kv("q_min", format!("{:?}", o.q_min));
        kv("sigma0", format!("{:?}", o.sigma0));
        kv("dx_max", format!("{:?}", o.dx_max));
        kv("eps_x", format!("{:?}", o.eps_x));
        kv("eps_j", format!("{:?}", o.eps_j));
        kv("gamma", format!("{:?}", o.gamma));
        kv("max_iters", o.max_iters.to_string());
        kv("max_shrinks", o.max_shrinks.to_string());
        kv("lp_penalty", o.penalty.map_or("auto".into(), |p| format!("{p:?}")));
        kv(
            "pivot_rule",
            match o.pivot_rule {
                PivotRule::Bland => "bland",
                PivotRule::Dantzig => "dantzig",
            }
            .into(),
        );
        kv(
            "ref_kind",
            self.ref_kinds.iter().map(|k| k.as_str()).collect::<Vec<_>>().join(","),
        );
        kv("n_axes", self.n_axes.to_string());
        kv("svd_k", self.svd_k.to_string());
        kv("ridge", format!("{:?}", self.ridge));
        match &self.mode {
            TaskMode::Pairs(p) => {
                kv("mode", "pairs".into());
                kv(
                    "pairs",
                    p.iter().map(|(a, b)| format!("{a}:{b}")).collect::<Vec<_>>().join(","),
                );
            }
            TaskMode::OneVsRest(c) => {
                kv("mode", "one_vs_rest".into());
                kv("classes", c.iter().map(|d| d.to_string()).collect::<Vec<_>>().join(","));
            }
        }
        kv("train_images", self.train_images.clone());
        kv("train_labels", self.train_labels.clone());
        kv("test_images", self.test_images.clone());
        kv("test_labels", self.test_labels.clone());
        kv("train_limit", self.train_limit.map_or("none".into(), |l| l.to_string()));
        kv("normalization", self.preprocess.normalization.to_string());
        kv("align_centroid", self.preprocess.align_centroid.to_string());
        kv("seed", self.seed.to_string());
        s
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_are_the_reference_parameters() {
        let c = PipelineConfig::parse("", ".").unwrap();
        assert_eq!(c.optimizer.lambda, 0.3);
        assert_eq!(c.optimizer.sigma0, 1e5);
        assert_eq!(c.optimizer.dx_max, 0.08);
        assert_eq!(c.optimizer.eps_x, 8e-4);
        assert_eq!(c.optimizer.eps_j, 1e-7);
        assert_eq!(c.mode, TaskMode::Pairs(vec![(0, 1)]));
    }

    #[test]
    fn round_trip() {
        let text = "mode = one_vs_rest\nclasses = 0,1,2,3,4\nn_axes = 120 # per class\n\
                    svd_k = 60\nref_kind = u,v\ntrain_limit = 10000\neps_j = inf\n";
        let c = PipelineConfig::parse(text, "/data").unwrap();
        assert_eq!(c.mode.classes(), vec![0, 1, 2, 3, 4]);
        assert_eq!(c.ref_kinds, vec![RefKind::U, RefKind::V]);
        assert_eq!(c.optimizer.eps_j, f64::INFINITY);
        let again = PipelineConfig::parse(&c.to_text(), "/data").unwrap();
        assert_eq!(again, c);
    }

    #[test]
    fn unknown_key_is_an_error() {
        let e = PipelineConfig::parse("n_axis = 3", ".").unwrap_err();
        assert!(e.to_string().contains("unknown key `n_axis`"));
    }

    #[test]
    fn pair_classes_in_order() {
        let c = PipelineConfig::parse("pairs = 3:4, 4:7", ".").unwrap();
        assert_eq!(c.mode.classes(), vec![3, 4, 7]);
        assert!(PipelineConfig::parse("pairs = 3:3", ".").is_err());
        assert!(PipelineConfig::parse("mode = one_vs_rest", ".").is_err());
    }

    #[test]
    fn relative_paths_follow_the_config() {
        let c = PipelineConfig::parse("train_images = a/b", "/cfg").unwrap();
        assert_eq!(c.resolve(&c.train_images), PathBuf::from("/cfg/a/b"));
        assert_eq!(c.resolve("/abs"), PathBuf::from("/abs"));
    }
}
