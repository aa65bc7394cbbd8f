//! CSV files for rollout datasets.
//!
//! The first line is a metadata comment, the second a CSV header, then one
//! transition per row in rollout-major order.
//!
//! Exogenous rollouts:
//!
//! ```text
//! # exomask exo-rollouts m=2 horizon=3 n_rollouts=1 seed=7
//! rollout,t,x0,x1,next_x0,next_x1
//! 0,0,1,0,1,1
//! ```
//!
//! Full rollouts add the endogenous state, action and reward:
//!
//! ```text
//! # exomask full-rollouts m=2 horizon=3 n_rollouts=1 seed=7 policy=uniform-random
//! rollout,t,endo,x0,x1,action,reward,next_endo,next_x0,next_x1
//! 0,0,4,1,0,2,-0.05,5,1,1
//! ```

use std::collections::BTreeMap;
use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use exomask_core::estimation::{ExoRolloutDataset, ExoTransition, FullRolloutDataset, FullTransition};
use exomask_core::FactoredState;

use crate::{BenchError, Result};

const EXO_TAG: &str = "exo-rollouts";
const FULL_TAG: &str = "full-rollouts";

fn exo_header(m: usize, prefix: &str) -> impl Iterator<Item = String> + '_ {
    (0..m).map(move |i| format!("{prefix}x{i}"))
}

pub fn write_exo(data: &ExoRolloutDataset, out: impl Write) -> std::io::Result<()> {
    let mut out = BufWriter::new(out);
    writeln!(
        out,
        "# exomask {EXO_TAG} m={} horizon={} n_rollouts={} seed={}",
        data.m, data.horizon, data.n_rollouts, data.seed
    )?;
    let mut w = csv::Writer::from_writer(out);
    let mut header = vec!["rollout".to_string(), "t".to_string()];
    header.extend(exo_header(data.m, ""));
    header.extend(exo_header(data.m, "next_"));
    w.write_record(&header)?;
    for (k, tr) in data.transitions.iter().enumerate() {
        let mut row = vec![(k / data.horizon).to_string(), (k % data.horizon).to_string()];
        row.extend(tr.from.iter().chain(&tr.to).map(|v| v.to_string()));
        w.write_record(&row)?;
    }
    w.flush()
}

pub fn write_full(data: &FullRolloutDataset, out: impl Write) -> std::io::Result<()> {
    let mut out = BufWriter::new(out);
    writeln!(
        out,
        "# exomask {FULL_TAG} m={} horizon={} n_rollouts={} seed={} policy={}",
        data.m, data.horizon, data.n_rollouts, data.seed, data.policy_tag
    )?;
    let mut w = csv::Writer::from_writer(out);
    let mut header = vec!["rollout".to_string(), "t".to_string(), "endo".to_string()];
    header.extend(exo_header(data.m, ""));
    header.extend(["action".to_string(), "reward".to_string(), "next_endo".to_string()]);
    header.extend(exo_header(data.m, "next_"));
    w.write_record(&header)?;
    for (k, tr) in data.transitions.iter().enumerate() {
        let mut row = vec![
            (k / data.horizon).to_string(),
            (k % data.horizon).to_string(),
            tr.state.endo.to_string(),
        ];
        row.extend(tr.state.exo.iter().map(|v| v.to_string()));
        row.extend([tr.action.to_string(), tr.reward.to_string(), tr.next.endo.to_string()]);
        row.extend(tr.next.exo.iter().map(|v| v.to_string()));
        w.write_record(&row)?;
    }
    w.flush()
}

pub fn save_exo(data: &ExoRolloutDataset, path: &Path) -> Result<()> {
    let file = File::create(path).map_err(|e| BenchError::io(path, e))?;
    write_exo(data, file).map_err(|e| BenchError::io(path, e))
}

pub fn save_full(data: &FullRolloutDataset, path: &Path) -> Result<()> {
    let file = File::create(path).map_err(|e| BenchError::io(path, e))?;
    write_full(data, file).map_err(|e| BenchError::io(path, e))
}

struct Meta {
    fields: BTreeMap<String, String>,
}

impl Meta {
    fn parse(line: &str, tag: &str, path: &Path) -> Result<Self> {
        let mut words = line.split_whitespace();
        if words.next() != Some("#") || words.next() != Some("exomask") || words.next() != Some(tag) {
            return Err(BenchError::format(path, format!("expected a `# exomask {tag}` line")));
        }
        let fields = words
            .filter_map(|w| w.split_once('='))
            .map(|(k, v)| (k.to_string(), v.to_string()))
            .collect();
        Ok(Meta { fields })
    }

    fn get<T: std::str::FromStr>(&self, key: &str, path: &Path) -> Result<T> {
        self.fields
            .get(key)
            .and_then(|v| v.parse().ok())
            .ok_or_else(|| BenchError::format(path, format!("missing or bad metadata `{key}`")))
    }
}

fn open(path: &Path, tag: &str) -> Result<(Meta, csv::Reader<BufReader<File>>)> {
    let file = File::open(path).map_err(|e| BenchError::io(path, e))?;
    let mut reader = BufReader::new(file);
    let mut first = String::new();
    reader.read_line(&mut first).map_err(|e| BenchError::io(path, e))?;
    let meta = Meta::parse(first.trim_end(), tag, path)?;
    Ok((meta, csv::Reader::from_reader(reader)))
}

fn parse_cell<T: std::str::FromStr>(record: &csv::StringRecord, k: usize, path: &Path, row: usize) -> Result<T> {
    record
        .get(k)
        .and_then(|c| c.parse().ok())
        .ok_or_else(|| BenchError::format(path, format!("row {row}: bad value in column {k}")))
}

fn check_len(record: &csv::StringRecord, want: usize, path: &Path, row: usize) -> Result<()> {
    if record.len() != want {
        return Err(BenchError::format(
            path,
            format!("row {row}: expected {want} columns, found {}", record.len()),
        ));
    }
    Ok(())
}

fn check_count(n: usize, want: usize, path: &Path) -> Result<()> {
    if n != want {
        return Err(BenchError::format(path, format!("expected {want} rows, found {n}")));
    }
    Ok(())
}

pub fn load_exo(path: &Path) -> Result<ExoRolloutDataset> {
    let (meta, mut reader) = open(path, EXO_TAG)?;
    let m: usize = meta.get("m", path)?;
    let horizon: usize = meta.get("horizon", path)?;
    let n_rollouts: usize = meta.get("n_rollouts", path)?;
    let seed: u64 = meta.get("seed", path)?;
    let mut transitions = Vec::with_capacity(horizon * n_rollouts);
    for (row, record) in reader.records().enumerate() {
        let record = record.map_err(|e| BenchError::format(path, e.to_string()))?;
        check_len(&record, 2 + 2 * m, path, row)?;
        let cells = (2..2 + 2 * m)
            .map(|k| parse_cell(&record, k, path, row))
            .collect::<Result<Vec<usize>>>()?;
        transitions.push(ExoTransition {
            from: cells[..m].to_vec(),
            to: cells[m..].to_vec(),
        });
    }
    check_count(transitions.len(), horizon * n_rollouts, path)?;
    Ok(ExoRolloutDataset {
        m,
        horizon,
        n_rollouts,
        seed,
        transitions,
    })
}

pub fn load_full(path: &Path) -> Result<FullRolloutDataset> {
    let (meta, mut reader) = open(path, FULL_TAG)?;
    let m: usize = meta.get("m", path)?;
    let horizon: usize = meta.get("horizon", path)?;
    let n_rollouts: usize = meta.get("n_rollouts", path)?;
    let seed: u64 = meta.get("seed", path)?;
    let policy_tag: String = meta.get("policy", path)?;
    let mut transitions = Vec::with_capacity(horizon * n_rollouts);
    for (row, record) in reader.records().enumerate() {
        let record = record.map_err(|e| BenchError::format(path, e.to_string()))?;
        check_len(&record, 6 + 2 * m, path, row)?;
        let ints = |range: std::ops::Range<usize>| {
            range
                .map(|k| parse_cell::<usize>(&record, k, path, row))
                .collect::<Result<Vec<usize>>>()
        };
        let endo: usize = parse_cell(&record, 2, path, row)?;
        let exo = ints(3..3 + m)?;
        let action: usize = parse_cell(&record, 3 + m, path, row)?;
        let reward: f64 = parse_cell(&record, 4 + m, path, row)?;
        let next_endo: usize = parse_cell(&record, 5 + m, path, row)?;
        let next_exo = ints(6 + m..6 + 2 * m)?;
        transitions.push(FullTransition {
            state: FactoredState::new(endo, exo),
            action,
            reward,
            next: FactoredState::new(next_endo, next_exo),
        });
    }
    check_count(transitions.len(), horizon * n_rollouts, path)?;
    Ok(FullRolloutDataset {
        m,
        horizon,
        n_rollouts,
        seed,
        policy_tag,
        transitions,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use exomask_core::domains::{GridworldMdp, GridworldSpec};
    use exomask_core::estimation::{collect_exo_rollouts, collect_full_rollouts, Behavior};

    #[test]
    fn exo_round_trip() {
        let g = GridworldMdp::new(GridworldSpec::default()).unwrap();
        let data = collect_exo_rollouts(&g, 3, 4, 11).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("exo.csv");
        save_exo(&data, &path).unwrap();
        assert_eq!(load_exo(&path).unwrap(), data);
    }

    #[test]
    fn full_round_trip_keeps_rewards_exact() {
        let g = GridworldMdp::new(GridworldSpec::default()).unwrap();
        let data = collect_full_rollouts(&g, Behavior::UniformRandom, 3, 4, 12).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("full.csv");
        save_full(&data, &path).unwrap();
        assert_eq!(load_full(&path).unwrap(), data);
    }

    #[test]
    fn wrong_kind_and_truncation_are_rejected() {
        let g = GridworldMdp::new(GridworldSpec::default()).unwrap();
        let data = collect_exo_rollouts(&g, 2, 2, 1).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("exo.csv");
        save_exo(&data, &path).unwrap();
        assert!(matches!(load_full(&path), Err(BenchError::Format { .. })));

        let text = std::fs::read_to_string(&path).unwrap();
        let cut: Vec<&str> = text.lines().take(4).collect();
        std::fs::write(&path, cut.join("\n")).unwrap();
        assert!(matches!(load_exo(&path), Err(BenchError::Format { .. })));
    }
}
