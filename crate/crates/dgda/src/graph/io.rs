use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::tensor::Tensor;

use super::{DatasetSplit, DomainTag, Graph, GraphError, SplitProvenance, SplitTag};

#[derive(Error, Debug)]
pub enum DatasetError {
    #[error("io error on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("line {line}: parse error: {msg}")]
    Parse { line: usize, msg: String },
    #[error("line {line} (graph {index}): {source}")]
    InvalidGraph {
        line: usize,
        index: usize,
        #[source]
        source: GraphError,
    },
    #[error("line {line}: missing label on a {domain} {split:?} graph")]
    MissingLabel {
        line: usize,
        domain: DomainTag,
        split: SplitTag,
    },
    #[error("line {line}: label must be 0 or 1, got {value}")]
    BadLabel { line: usize, value: i64 },
    #[error("dataset contains no graphs")]
    EmptyDataset,
}

/// One JSON Lines record; edges are `[i, j]` pairs with `i < j`.
#[derive(Serialize, Deserialize)]
struct GraphRecord {
    n: usize,
    edges: Vec<[usize; 2]>,
    features: Option<Vec<Vec<f64>>>,
    label: Option<i64>,
    domain: DomainTag,
    split: SplitTag,
}

impl GraphRecord {
    fn from_graph(g: &Graph, split: SplitTag, label: Option<bool>) -> Self {
        GraphRecord {
            n: g.n(),
            edges: g.edges().iter().map(|&(i, j)| [i, j]).collect(),
            features: g.features().map(|f| {
                (0..f.rows())
                    .map(|i| (0..f.cols()).map(|j| f.get(i, j)).collect())
                    .collect()
            }),
            label: label.map(i64::from),
            domain: g.domain(),
            split,
        }
    }
}

/// Render a split in its canonical UTF-8 JSON Lines form: one graph per
/// line, in the fixed order source-train, source-test, target-train,
/// target-test. Hidden target-train labels are written back out so a saved
/// dataset is complete.
pub fn dataset_to_jsonl(split: &DatasetSplit) -> Result<String, DatasetError> {
    let mut out = String::new();
    let sections: [(&[Graph], SplitTag, Option<&[Option<bool>]>); 4] = [
        (&split.source_train, SplitTag::Train, None),
        (&split.source_test, SplitTag::Test, None),
        (
            &split.target_train,
            SplitTag::Train,
            Some(split.hidden_target_train_labels()),
        ),
        (&split.target_test, SplitTag::Test, None),
    ];
    for (graphs, tag, hidden) in sections {
        for (i, g) in graphs.iter().enumerate() {
            let label = match hidden {
                Some(labels) => labels[i],
                None => g.label(),
            };
            let record = GraphRecord::from_graph(g, tag, label);
            let line = serde_json::to_string(&record)
                .map_err(|e| DatasetError::Parse { line: 0, msg: e.to_string() })?;
            out.push_str(&line);
            out.push('\n');
        }
    }
    Ok(out)
}

/// Write a split to disk in the canonical JSON Lines form.
pub fn save_dataset(split: &DatasetSplit, path: &Path) -> Result<(), DatasetError> {
    let io_err = |source| DatasetError::Io { path: path.display().to_string(), source };
    let text = dataset_to_jsonl(split)?;
    let file = File::create(path).map_err(io_err)?;
    let mut w = BufWriter::new(file);
    w.write_all(text.as_bytes()).map_err(|source| DatasetError::Io {
        path: path.display().to_string(),
        source,
    })?;
    w.flush().map_err(|source| DatasetError::Io {
        path: path.display().to_string(),
        source,
    })?;
    Ok(())
}

/// Load a JSON Lines dataset, validating every graph invariant. Labels are
/// required everywhere except target-train, whose labels (when present) are
/// masked into the split's hidden storage.
pub fn load_dataset(path: &Path) -> Result<DatasetSplit, DatasetError> {
    let file = File::open(path).map_err(|source| DatasetError::Io {
        path: path.display().to_string(),
        source,
    })?;
    let reader = BufReader::new(file);

    let mut source_train = Vec::new();
    let mut source_test = Vec::new();
    let mut target_train = Vec::new();
    let mut target_test = Vec::new();
    let mut index = 0usize;
    for (line_idx, line) in reader.lines().enumerate() {
        let line_no = line_idx + 1;
        let line = line.map_err(|source| DatasetError::Io {
            path: path.display().to_string(),
            source,
        })?;
        if line.trim().is_empty() {
            continue;
        }
        let record: GraphRecord = serde_json::from_str(&line)
            .map_err(|e| DatasetError::Parse { line: line_no, msg: e.to_string() })?;

        let label = match record.label {
            None => None,
            Some(0) => Some(false),
            Some(1) => Some(true),
            Some(value) => return Err(DatasetError::BadLabel { line: line_no, value }),
        };
        let required = !(record.domain == DomainTag::Target && record.split == SplitTag::Train);
        if required && label.is_none() {
            return Err(DatasetError::MissingLabel {
                line: line_no,
                domain: record.domain,
                split: record.split,
            });
        }

        let features = match record.features {
            Some(rows) => {
                let r = rows.len();
                let c = rows.first().map_or(0, Vec::len);
                if rows.iter().any(|row| row.len() != c) {
                    return Err(DatasetError::Parse {
                        line: line_no,
                        msg: "ragged feature rows".into(),
                    });
                }
                let t = Tensor::from_vec(r, c, rows.into_iter().flatten().collect()).map_err(
                    |e| DatasetError::Parse { line: line_no, msg: e.to_string() },
                )?;
                Some(t)
            }
            None => None,
        };

        let edges: Vec<(usize, usize)> = record.edges.iter().map(|&[i, j]| (i, j)).collect();
        let graph = Graph::from_edges(record.n, &edges, features, label, record.domain)
            .map_err(|source| DatasetError::InvalidGraph { line: line_no, index, source })?;
        index += 1;

        match (record.domain, record.split) {
            (DomainTag::Source, SplitTag::Train) => source_train.push(graph),
            (DomainTag::Source, SplitTag::Test) => source_test.push(graph),
            (DomainTag::Target, SplitTag::Train) => target_train.push(graph),
            (DomainTag::Target, SplitTag::Test) => target_test.push(graph),
        }
    }
    if index == 0 {
        return Err(DatasetError::EmptyDataset);
    }
    Ok(DatasetSplit::new(
        source_train,
        source_test,
        target_train,
        target_test,
        SplitProvenance::File { path: path.display().to_string() },
    ))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::{generate_synthetic_pair, GeneratorConfig, SplitCounts};

    fn tmpfile(name: &str) -> std::path::PathBuf {
        let dir = std::env::temp_dir().join("dgda-io-tests");
        std::fs::create_dir_all(&dir).unwrap();
        dir.join(name)
    }

    #[test]
    fn save_load_round_trip_is_identity() {
        let mut cfg = GeneratorConfig::default();
        cfg.graphs_per_split = SplitCounts { train: 6, test: 3 };
        cfg.nodes_per_graph = 12;
        let split = generate_synthetic_pair(&cfg, cfg.seed).unwrap();

        let path = tmpfile("roundtrip.jsonl");
        save_dataset(&split, &path).unwrap();
        let loaded = load_dataset(&path).unwrap();

        assert_eq!(split.source_train, loaded.source_train);
        assert_eq!(split.source_test, loaded.source_test);
        assert_eq!(split.target_train, loaded.target_train);
        assert_eq!(split.target_test, loaded.target_test);
        assert_eq!(
            split.hidden_target_train_labels(),
            loaded.hidden_target_train_labels()
        );
    }

    #[test]
    fn unordered_edge_is_rejected_with_pair() {
        let path = tmpfile("asym.jsonl");
        std::fs::write(
            &path,
            r#"{"n":3,"edges":[[2,1]],"features":null,"label":1,"domain":"source","split":"train"}"#,
        )
        .unwrap();
        let err = load_dataset(&path).unwrap_err();
        let msg = err.to_string();
        assert!(msg.contains("(2,1)"), "{msg}");
    }

    #[test]
    fn missing_source_train_label_is_rejected() {
        let path = tmpfile("nolabel.jsonl");
        std::fs::write(
            &path,
            r#"{"n":2,"edges":[[0,1]],"features":null,"label":null,"domain":"source","split":"train"}"#,
        )
        .unwrap();
        let err = load_dataset(&path).unwrap_err();
        assert!(matches!(
            err,
            DatasetError::MissingLabel { line: 1, domain: DomainTag::Source, split: SplitTag::Train }
        ));
    }

    #[test]
    fn target_train_label_is_optional_and_masked() {
        let path = tmpfile("masked.jsonl");
        std::fs::write(
            &path,
            concat!(
                r#"{"n":2,"edges":[[0,1]],"features":null,"label":1,"domain":"source","split":"train"}"#,
                "\n",
                r#"{"n":2,"edges":[[0,1]],"features":null,"label":0,"domain":"target","split":"train"}"#,
            ),
        )
        .unwrap();
        let split = load_dataset(&path).unwrap();
        assert_eq!(split.target_train[0].label(), None);
        assert_eq!(split.unmasked_target_train()[0].label(), Some(false));
    }

    #[test]
    fn parse_error_names_the_line() {
        let path = tmpfile("badline.jsonl");
        std::fs::write(
            &path,
            concat!(
                r#"{"n":2,"edges":[[0,1]],"features":null,"label":1,"domain":"source","split":"train"}"#,
                "\n",
                "not json",
            ),
        )
        .unwrap();
        let err = load_dataset(&path).unwrap_err();
        assert!(matches!(err, DatasetError::Parse { line: 2, .. }));
    }

    #[test]
    fn bad_label_value_is_rejected() {
        let path = tmpfile("badlabel.jsonl");
        std::fs::write(
            &path,
            r#"{"n":2,"edges":[[0,1]],"features":null,"label":3,"domain":"source","split":"train"}"#,
        )
        .unwrap();
        let err = load_dataset(&path).unwrap_err();
        assert!(matches!(err, DatasetError::BadLabel { line: 1, value: 3 }));
    }
}
