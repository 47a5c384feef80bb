//! File formats: models, repair jobs and labeled sample sets, all JSON.
//!
//! Numbers are written in shortest round-trip form, so `load(save(net))`
//! reproduces every weight bit for bit.

use std::fs;
use std::path::Path;
use std::time::Duration;

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use crate::constraints::{LinearSystem, OutputGoal, PointSpec, DEFAULT_MARGIN};
use crate::error::{Error, Result};
use crate::lp::Norm;
use crate::matrix::Matrix;
use crate::network::Network;
use crate::search::{Heuristic, MctsConfig, SearchConfig};

fn parse_err(field: impl Into<String>, message: impl Into<String>) -> Error {
    Error::Parse {
        field: field.into(),
        message: message.into(),
    }
}

/// Deserializes `text`, reporting failures at the JSON path where they occur.
fn from_json<T: DeserializeOwned>(text: &str) -> Result<T> {
    let de = &mut serde_json::Deserializer::from_str(text);
    serde_path_to_error::deserialize(de).map_err(|e| {
        let path = e.path().to_string();
        let field = if path == "." { "document".to_string() } else { path };
        parse_err(field, e.into_inner().to_string())
    })
}

fn read(path: &Path) -> Result<String> {
    fs::read_to_string(path).map_err(|e| Error::Io(format!("{}: {e}", path.display())))
}

fn write(path: &Path, text: &str) -> Result<()> {
    fs::write(path, text).map_err(|e| Error::Io(format!("{}: {e}", path.display())))
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct ModelDoc {
    layer_sizes: Vec<usize>,
    weights: Vec<Vec<Vec<f64>>>,
    #[serde(default)]
    biases: Option<Vec<Vec<f64>>>,
}

pub fn parse_model(text: &str) -> Result<Network> {
    let doc: ModelDoc = from_json(text)?;
    let sizes = &doc.layer_sizes;
    if sizes.len() < 2 {
        return Err(parse_err("layer_sizes", "need at least 2 layers"));
    }
    if let Some(i) = sizes.iter().position(|&s| s == 0) {
        return Err(parse_err(format!("layer_sizes[{i}]"), "layer size must be positive"));
    }
    if doc.weights.len() != sizes.len() - 1 {
        return Err(parse_err(
            "weights",
            format!("expected {} matrices, got {}", sizes.len() - 1, doc.weights.len()),
        ));
    }
    let mut weights = Vec::with_capacity(doc.weights.len());
    for (i, rows) in doc.weights.into_iter().enumerate() {
        let (r, c) = (sizes[i + 1], sizes[i]);
        if rows.len() != r {
            return Err(parse_err(
                format!("weights[{i}]"),
                format!("expected {r} rows, got {}", rows.len()),
            ));
        }
        if let Some(j) = rows.iter().position(|row| row.len() != c) {
            return Err(parse_err(
                format!("weights[{i}][{j}]"),
                format!("expected {c} columns, got {}", rows[j].len()),
            ));
        }
        weights.push(Matrix::from_rows(&rows)?);
    }
    let biases = match doc.biases {
        None => sizes[1..].iter().map(|&s| vec![0.0; s]).collect(),
        Some(b) => {
            if b.len() != sizes.len() - 1 {
                return Err(parse_err(
                    "biases",
                    format!("expected {} vectors, got {}", sizes.len() - 1, b.len()),
                ));
            }
            if let Some(i) = (0..b.len()).find(|&i| b[i].len() != sizes[i + 1]) {
                return Err(parse_err(
                    format!("biases[{i}]"),
                    format!("expected length {}, got {}", sizes[i + 1], b[i].len()),
                ));
            }
            b
        }
    };
    Network::with_biases(doc.layer_sizes, weights, biases)
}

fn json_row(v: &[f64]) -> String {
    serde_json::to_string(v).expect("finite floats serialize")
}

/// Renders `net` in the model format, one matrix row per line.
pub fn model_to_string(net: &Network) -> String {
    let matrices: Vec<String> = net
        .weights()
        .iter()
        .map(|w| {
            let rows: Vec<String> = (0..w.rows()).map(|r| format!("      {}", json_row(w.row(r)))).collect();
            format!("    [\n{}\n    ]", rows.join(",\n"))
        })
        .collect();
    let sizes = serde_json::to_string(net.layer_sizes()).expect("sizes serialize");
    let mut out = format!(
        "{{\n  \"layer_sizes\": {sizes},\n  \"weights\": [\n{}\n  ]",
        matrices.join(",\n")
    );
    if net.has_biases() {
        let b: Vec<String> = net.biases().iter().map(|b| format!("    {}", json_row(b))).collect();
        out.push_str(&format!(",\n  \"biases\": [\n{}\n  ]", b.join(",\n")));
    }
    out.push_str("\n}\n");
    out
}

pub fn load_model(path: impl AsRef<Path>) -> Result<Network> {
    parse_model(&read(path.as_ref())?)
}

pub fn save_model(net: &Network, path: impl AsRef<Path>) -> Result<()> {
    write(path.as_ref(), &model_to_string(net))
}

/// One point record of a job file: `x` with either `label` (and optional
/// `margin`) or a general `A y <= b` system.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PointRecord {
    pub x: Vec<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub label: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub margin: Option<f64>,
    #[serde(rename = "A", default, skip_serializing_if = "Option::is_none")]
    pub a: Option<Vec<Vec<f64>>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub b: Option<Vec<f64>>,
}

/// A job file as written; unset knobs take their defaults in [`JobFile::resolve`].
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct JobFile {
    pub points: Vec<PointRecord>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub epsilon: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub heuristic: Option<Heuristic>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub norm: Option<Norm>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub timeout_secs: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub separation_indices: Option<Vec<usize>>,
    /// Margin for label points that do not set their own.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub margin: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub random_radius: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub mcts_iterations: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub mcts_depth: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub mcts_simulations: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub mcts_exploration: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub max_evaluations: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub workers: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub backend: Option<String>,
}

/// A parsed job: points, separation indices and a search configuration.
#[derive(Debug, Clone)]
pub struct Job {
    pub points: Vec<PointSpec>,
    pub separation: Vec<usize>,
    pub config: SearchConfig,
}

impl JobFile {
    pub fn parse(text: &str) -> Result<Self> {
        from_json(text)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("job serializes")
    }

    pub fn resolve(&self) -> Result<Job> {
        if self.points.is_empty() {
            return Err(parse_err("points", "a job needs at least one point"));
        }
        let default_margin = self.margin.unwrap_or(DEFAULT_MARGIN);
        if !(default_margin > 0.0 && default_margin.is_finite()) {
            return Err(parse_err("margin", format!("must be positive, got {default_margin}")));
        }
        let points = self
            .points
            .iter()
            .enumerate()
            .map(|(i, p)| resolve_point(i, p, default_margin))
            .collect::<Result<Vec<_>>>()?;

        let defaults = SearchConfig::default();
        let mcts_defaults = MctsConfig::default();
        let timeout = match self.timeout_secs {
            None => defaults.timeout,
            Some(t) if t >= 0.0 && t.is_finite() => Duration::from_secs_f64(t),
            Some(t) => return Err(parse_err("timeout_secs", format!("must be non-negative, got {t}"))),
        };
        let config = SearchConfig {
            epsilon: self.epsilon.unwrap_or(defaults.epsilon),
            heuristic: self.heuristic.unwrap_or(defaults.heuristic),
            norm: self.norm.unwrap_or(defaults.norm),
            timeout,
            seed: self.seed.unwrap_or(defaults.seed),
            random_radius: self.random_radius,
            mcts: MctsConfig {
                iterations: self.mcts_iterations.unwrap_or(mcts_defaults.iterations),
                depth: self.mcts_depth.unwrap_or(mcts_defaults.depth),
                simulations: self.mcts_simulations.unwrap_or(mcts_defaults.simulations),
                exploration: self.mcts_exploration.unwrap_or(mcts_defaults.exploration),
            },
            max_evaluations: self.max_evaluations,
            workers: self.workers.unwrap_or(defaults.workers),
            backend: self.backend.clone().unwrap_or(defaults.backend),
            registry: defaults.registry,
        };
        config.validate()?;
        Ok(Job {
            points,
            separation: self.separation_indices.clone().unwrap_or_default(),
            config,
        })
    }
}

fn resolve_point(i: usize, p: &PointRecord, default_margin: f64) -> Result<PointSpec> {
    let field = |name: &str| format!("points[{i}].{name}");
    let goal = match (p.label, &p.a, &p.b) {
        (Some(label), None, None) => {
            if label == 0 {
                return Err(parse_err(field("label"), "labels are 1-based"));
            }
            let margin = p.margin.unwrap_or(default_margin);
            OutputGoal::label(label, margin)
                .map_err(|e| parse_err(field("margin"), e.to_string()))?
        }
        (None, Some(a), Some(b)) => {
            if p.margin.is_some() {
                return Err(parse_err(field("margin"), "margin only applies to label points"));
            }
            OutputGoal::Linear(
                LinearSystem::new(a.clone(), b.clone()).map_err(|e| parse_err(field("A"), e.to_string()))?,
            )
        }
        (None, None, None) => return Err(parse_err(format!("points[{i}]"), "needs `label` or `A`/`b`")),
        _ => {
            return Err(parse_err(
                format!("points[{i}]"),
                "give either `label` or both `A` and `b`",
            ))
        }
    };
    Ok(PointSpec::new(p.x.clone(), goal))
}

impl Job {
    /// Checks points and separation indices against `net`.
    pub fn validate(&self, net: &Network) -> Result<()> {
        for (i, p) in self.points.iter().enumerate() {
            p.validate(net).map_err(|e| parse_err(format!("points[{i}]"), e.to_string()))?;
        }
        net.split(&self.separation)
            .map_err(|e| parse_err("separation_indices", e.to_string()))?;
        Ok(())
    }
}

pub fn parse_job(text: &str) -> Result<Job> {
    JobFile::parse(text)?.resolve()
}

pub fn load_job_file(path: impl AsRef<Path>) -> Result<JobFile> {
    JobFile::parse(&read(path.as_ref())?)
}

pub fn load_job(path: impl AsRef<Path>) -> Result<Job> {
    load_job_file(path)?.resolve()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LabeledSample {
    pub x: Vec<f64>,
    pub label: usize,
}

/// Labeled inputs for accuracy measurement; stored as a JSON array of
/// `{"x": [...], "label": n}` records.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct LabeledSet {
    pub samples: Vec<LabeledSample>,
}

impl LabeledSet {
    pub fn new(samples: Vec<(Vec<f64>, usize)>) -> Self {
        Self {
            samples: samples.into_iter().map(|(x, label)| LabeledSample { x, label }).collect(),
        }
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn parse(text: &str) -> Result<Self> {
        from_json(text)
    }

    pub fn validate(&self, net: &Network) -> Result<()> {
        for s in &self.samples {
            if s.x.len() != net.input_dim() {
                return Err(Error::InputShape {
                    expected: net.input_dim(),
                    actual: s.x.len(),
                });
            }
            if s.label == 0 || s.label > net.output_dim() {
                return Err(Error::LabelOutOfRange {
                    label: s.label,
                    num_outputs: net.output_dim(),
                });
            }
        }
        Ok(())
    }
}

pub fn load_labeled_set(path: impl AsRef<Path>) -> Result<LabeledSet> {
    LabeledSet::parse(&read(path.as_ref())?)
}

/// Fraction of samples that `net` classifies as their label.
pub fn measure_accuracy(net: &Network, set: &LabeledSet) -> Result<f64> {
    if set.is_empty() {
        return Err(Error::InvalidConfig("accuracy needs a non-empty labeled set".into()));
    }
    set.validate(net)?;
    let mut correct = 0usize;
    for s in &set.samples {
        if net.classify(&s.x)? == s.label {
            correct += 1;
        }
    }
    Ok(correct as f64 / set.len() as f64)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fixtures::{random_network, toy_network, toy_two_layer_fix};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    const TOY: &str = r#"{
        "layer_sizes": [1, 2, 2, 2, 2],
        "weights": [
            [[1], [1]],
            [[0.01, 0], [0, 100]],
            [[1000, 0], [0, 0.01]],
            [[1, 1], [-1, -1]]
        ]
    }"#;

    #[test]
    fn toy_document_loads_and_evaluates() {
        let net = parse_model(TOY).unwrap();
        assert_eq!(net, toy_network());
        let y = net.output(&[1.0]).unwrap();
        assert!((y[0] - 11.0).abs() < 1e-12 && (y[1] + 11.0).abs() < 1e-12);
    }

    #[test]
    fn wrong_weight_shape_names_the_field() {
        let bad = TOY.replace("[[0.01, 0], [0, 100]]", "[[0.01, 0], [0]]");
        match parse_model(&bad) {
            Err(Error::Parse { field, .. }) => assert_eq!(field, "weights[1][1]"),
            other => panic!("{other:?}"),
        }
        let short = TOY.replace("[[1], [1]],", "[[1]],");
        assert!(matches!(parse_model(&short), Err(Error::Parse { field, .. }) if field == "weights[0]"));
    }

    #[test]
    fn type_errors_report_their_path() {
        let bad = TOY.replace("[1, 2, 2, 2, 2]", "[1, 2, \"two\", 2, 2]");
        assert!(matches!(parse_model(&bad), Err(Error::Parse { field, .. }) if field == "layer_sizes[2]"));
        let extra = TOY.replace("\"layer_sizes\"", "\"activation\": \"relu\", \"layer_sizes\"");
        assert!(matches!(parse_model(&extra), Err(Error::Parse { .. })));
    }

    #[test]
    fn save_then_load_is_exact() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for _ in 0..20 {
            let net = random_network(&mut rng, &[3, 5, 4, 2]);
            let back = parse_model(&model_to_string(&net)).unwrap();
            assert_eq!(back, net);
        }
        let biased = Network::with_biases(
            vec![2, 1],
            vec![Matrix::from_rows(&[vec![0.1, 1.0 / 3.0]]).unwrap()],
            vec![vec![-2.5e-17]],
        )
        .unwrap();
        assert_eq!(parse_model(&model_to_string(&biased)).unwrap(), biased);
    }

    #[test]
    fn file_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("toy.model.json");
        save_model(&toy_two_layer_fix(), &path).unwrap();
        assert_eq!(load_model(&path).unwrap(), toy_two_layer_fix());
        assert!(matches!(load_model(dir.path().join("missing")), Err(Error::Io(_))));
    }

    #[test]
    fn label_job_defaults() {
        let job = parse_job(r#"{"points": [{"x": [1], "label": 2}]}"#).unwrap();
        assert_eq!(job.points, vec![PointSpec::label(vec![1.0], 2, 0.1).unwrap()]);
        assert_eq!(job.config.norm, Norm::L1);
        assert_eq!(job.config.heuristic, Heuristic::Greedy);
        assert!(job.separation.is_empty());
    }

    #[test]
    fn explicit_system_job() {
        let job = parse_job(
            r#"{"points": [{"x": [1], "A": [[1, -1]], "b": [-0.1]}],
                "norm": "linf", "heuristic": "mcts", "separation_indices": [3],
                "mcts_iterations": 7, "timeout_secs": 2.5}"#,
        )
        .unwrap();
        let sys = LinearSystem::new(vec![vec![1.0, -1.0]], vec![-0.1]).unwrap();
        assert_eq!(job.points[0].goal, OutputGoal::Linear(sys));
        assert_eq!(job.config.norm, Norm::LInf);
        assert_eq!(job.config.mcts.iterations, 7);
        assert_eq!(job.config.timeout, Duration::from_millis(2500));
        job.validate(&toy_network()).unwrap();
    }

    #[test]
    fn invalid_jobs() {
        let neg = parse_job(r#"{"points": [{"x": [1], "label": 2, "margin": -1}]}"#);
        assert!(matches!(neg, Err(Error::Parse { field, .. }) if field == "points[0].margin"));
        assert!(parse_job(r#"{"points": [{"x": [1], "label": 2}], "margin": -1}"#).is_err());
        assert!(parse_job(r#"{"points": []}"#).is_err());
        assert!(parse_job(r#"{"points": [{"x": [1], "label": 2}], "temperature": 1}"#).is_err());
        assert!(parse_job(r#"{"points": [{"x": [1]}]}"#).is_err());
        assert!(parse_job(r#"{"points": [{"x": [1], "label": 0}]}"#).is_err());

        let job = parse_job(r#"{"points": [{"x": [1], "label": 3}]}"#).unwrap();
        assert!(job.validate(&toy_network()).is_err());
        let job = parse_job(r#"{"points": [{"x": [1], "label": 2}], "separation_indices": [5]}"#).unwrap();
        assert!(job.validate(&toy_network()).is_err());
    }

    #[test]
    fn toy_accuracy_flips() {
        let set = LabeledSet::new(vec![(vec![1.0], 2)]);
        assert_eq!(measure_accuracy(&toy_network(), &set).unwrap(), 0.0);
        assert_eq!(measure_accuracy(&toy_two_layer_fix(), &set).unwrap(), 1.0);
        assert!(measure_accuracy(&toy_network(), &LabeledSet::default()).is_err());
        assert!(measure_accuracy(&toy_network(), &LabeledSet::new(vec![(vec![1.0], 3)])).is_err());
    }

    #[test]
    fn duplicates_do_not_change_accuracy() {
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        let net = random_network(&mut rng, &[2, 4, 3]);
        let base: Vec<(Vec<f64>, usize)> = (0..30)
            .map(|_| (vec![rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)], rng.gen_range(1..=3)))
            .collect();
        let doubled: Vec<_> = base.iter().chain(base.iter()).cloned().collect();
        assert_eq!(
            measure_accuracy(&net, &LabeledSet::new(base)).unwrap(),
            measure_accuracy(&net, &LabeledSet::new(doubled)).unwrap()
        );
    }

    #[test]
    fn uniform_labels_give_chance_accuracy() {
        let mut rng = ChaCha8Rng::seed_from_u64(31);
        let net = random_network(&mut rng, &[5, 16, 10]);
        let samples = (0..1000)
            .map(|_| ((0..5).map(|_| rng.gen_range(-1.0..1.0)).collect(), rng.gen_range(1..=10)))
            .collect();
        let acc = measure_accuracy(&net, &LabeledSet::new(samples)).unwrap();
        assert!((acc - 0.1).abs() <= 0.04, "{acc}");
    }

    #[test]
    fn labeled_set_format() {
        let set = LabeledSet::parse(r#"[{"x": [1], "label": 2}, {"x": [0.5], "label": 1}]"#).unwrap();
        assert_eq!(set.len(), 2);
        assert!(LabeledSet::parse(r#"[{"x": [1]}]"#).is_err());
    }
    mod props {
        use super::*;
        use proptest::prelude::{any, prop, prop_assert_eq, proptest};

        proptest! {
            #[test]
            fn model_text_round_trips(
                sizes in prop::collection::vec(1usize..5, 2..5),
                seed in any::<u64>(),
                biased in any::<bool>(),
            ) {
                let mut rng = ChaCha8Rng::seed_from_u64(seed);
                let weights = sizes
                    .windows(2)
                    .map(|w| {
                        let data = (0..w[0] * w[1]).map(|_| rng.gen_range(-1e3..1e3) / 7.0).collect();
                        Matrix::from_row_major(w[1], w[0], data).unwrap()
                    })
                    .collect();
                let biases = sizes[1..]
                    .iter()
                    .map(|&s| (0..s).map(|_| if biased { rng.gen_range(-1.0..1.0) } else { 0.0 }).collect())
                    .collect();
                let net = Network::with_biases(sizes.clone(), weights, biases).unwrap();
                let text = model_to_string(&net);
                let back = parse_model(&text).unwrap();
                prop_assert_eq!(&back, &net);
                prop_assert_eq!(model_to_string(&back), text);
            }
        }
    }
}
