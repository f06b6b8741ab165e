use std::fs::{self, File};
use std::io::{BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};

use serde_json::json;

use pktwin::anonymize::anonymize_capture;
use pktwin::dataset::{
    group_split, oversample_packets, oversample_windows, read_container, write_container, DatasetPartition, Role,
    DEFAULT_FRACTIONS,
};
use pktwin::eval::{metrics, saliency as saliency_map};
use pktwin::flow::{
    assemble_flows, label_flows, label_packets, read_labels, read_rules, write_labels, write_rules,
    DEFAULT_FLOW_TIMEOUT_US,
};
use pktwin::ingest::{parse_packet, read_capture, reorder_chronologically, write_capture, PcapFileHeader};
use pktwin::nn::checkpoint::{load_checkpoint, save_checkpoint};
use pktwin::nn::train::{evaluate_partition, train as train_model, write_history};
use pktwin::nn::{build_model, LossConfig, ModelConfig, Tensor, TrainOptions};
use pktwin::synth::{generate_capture, SynthConfig};
use pktwin::window::{encode_capture, Provenance, VECTOR_WIDTH};

use crate::config::{Labeling, LossArg, ModelArg};
use crate::error::{open, require, CliError};
use crate::report::{Report, Table};

type Out = Result<Report, CliError>;

fn create(path: &Path) -> Result<BufWriter<File>, CliError> {
    Ok(BufWriter::new(File::create(path)?))
}

fn invalid(msg: String) -> CliError {
    CliError::Core(pktwin::Error::InvalidArgument(msg))
}

fn load_partition(path: &Path) -> Result<DatasetPartition, CliError> {
    Ok(read_container(require(path)?)?)
}

pub fn synth(seed: u64, packets: usize, attack_share: f64, pcap: &Path, rules: &Path) -> Out {
    if !(0.0..=1.0).contains(&attack_share) {
        return Err(invalid(format!("attack share {attack_share} outside [0, 1]")));
    }
    let cap = generate_capture(&SynthConfig {
        packets,
        seed,
        attack_share,
        ..SynthConfig::default()
    });
    write_capture(pcap, &cap.header, &cap.packets)?;
    let mut w = create(rules)?;
    write_rules(&mut w, &cap.rules)?;
    w.flush()?;
    let mut r = Report::new("synth");
    r.set("packets", cap.packets.len()).set("rules", cap.rules.len()).set("seed", seed);
    Ok(r)
}

pub fn ingest(input: &Path, out: &Path) -> Out {
    let cap = read_capture(require(input)?)?;
    let out_of_order = cap.packets.windows(2).filter(|w| w[1].ts_us < w[0].ts_us).count();
    let packets = reorder_chronologically(cap.packets);
    write_capture(out, &PcapFileHeader::ethernet(cap.header.snaplen), &packets)?;
    let mut r = Report::new("ingest");
    r.set("packets", packets.len())
        .set("skipped", cap.stats.skipped)
        .set("truncated_tail", cap.stats.truncated_tail)
        .set("out_of_order", out_of_order);
    Ok(r)
}

pub struct LabelOpts<'a> {
    pub input: &'a Path,
    pub rules: &'a Path,
    pub out: &'a Path,
    pub labeling: Labeling,
    pub capture_id: u32,
    pub timeout_us: Option<u64>,
}

pub fn label(o: LabelOpts) -> Out {
    let rules = read_rules(BufReader::new(open(o.rules)?))?;
    let cap = read_capture(require(o.input)?)?;
    if let Some(i) = cap.packets.windows(2).position(|w| w[1].ts_us < w[0].ts_us) {
        return Err(CliError::Core(pktwin::Error::Invariant(format!(
            "packet {} is earlier than its predecessor; run ingest first",
            i + 1
        ))));
    }
    let headers: Vec<_> = cap.packets.iter().map(parse_packet).collect();
    let flows = assemble_flows(&cap.packets, &headers, o.timeout_us.unwrap_or(DEFAULT_FLOW_TIMEOUT_US));
    let flow_labels = label_flows(&flows, &rules);
    for w in &flow_labels.warnings {
        eprintln!(
            "warning code=shadowed_rule flow={} chosen_rule={} shadowed_rule={}",
            w.flow, w.chosen_rule, w.shadowed_rule
        );
    }
    let labels = label_packets(&headers, &flows, &flow_labels, &rules, o.labeling.scheme());
    let mut w = create(o.out)?;
    write_labels(&mut w, o.capture_id, &labels)?;
    w.flush()?;
    let mut r = Report::new("label");
    r.set("packets", labels.len())
        .set("flows", flows.len())
        .set("attack_flows", flow_labels.rule_for_flow.iter().filter(|x| x.is_some()).count())
        .set("attack_packets", labels.iter().filter(|l| l.label == 1).count())
        .set("labeling", o.labeling.as_str())
        .set("warnings", flow_labels.warnings.len());
    Ok(r)
}

pub fn anonymize(seed: u64, input: &Path, out: &Path, map: Option<&Path>) -> Out {
    let cap = read_capture(require(input)?)?;
    let anon = anonymize_capture(&cap.packets, seed);
    write_capture(out, &cap.header, &anon.packets)?;
    if let Some(path) = map {
        let mut w = create(path)?;
        anon.map.write_csv(&mut w)?;
        w.flush()?;
    }
    let mut r = Report::new("anonymize");
    r.set("packets", anon.packets.len())
        .set("seed", seed)
        .set("distinct_macs", anon.map.mac.len())
        .set("distinct_ips", anon.map.ip.len())
        .set("distinct_ports", anon.map.port.len())
        .set("ip_checksums_fixed", anon.stats.ip_fixed)
        .set("transport_checksums_fixed", anon.stats.transport_fixed)
        .set("transport_uncomputable", anon.stats.transport_uncomputable);
    Ok(r)
}

pub fn encode(input: &Path, labels: &Path, out: &Path) -> Out {
    let cap = read_capture(require(input)?)?;
    let rows = read_labels(BufReader::new(open(labels)?))?;
    if rows.len() != cap.packets.len() {
        return Err(invalid(format!(
            "{} labels for {} packets",
            rows.len(),
            cap.packets.len()
        )));
    }
    if let Some((i, row)) = rows.iter().enumerate().find(|(i, r)| r.packet_index != *i as u64) {
        return Err(invalid(format!("label row {i} names packet {}", row.packet_index)));
    }
    let y: Vec<u8> = rows.iter().map(|r| r.label).collect();
    let vectors = encode_capture(&cap.packets, &y);
    let provenance = rows
        .iter()
        .map(|r| Provenance {
            capture_id: r.capture_id,
            packet_index: r.packet_index,
        })
        .collect();
    let part = DatasetPartition::new(Role::Unspecified, vectors, provenance);
    write_container(out, &part)?;
    let (benign, attack) = part.class_counts();
    let mut r = Report::new("encode");
    r.set("vectors", part.len()).set("benign", benign).set("attack", attack);
    Ok(r)
}

pub fn split(seed: u64, inputs: &[PathBuf], groups: usize, out_dir: &Path) -> Out {
    let mut all = DatasetPartition::new(Role::Unspecified, Vec::new(), Vec::new());
    for path in inputs {
        let p = load_partition(path)?;
        all.vectors.extend(p.vectors);
        all.provenance.extend(p.provenance);
    }
    let result = group_split(&all, groups, seed, DEFAULT_FRACTIONS)?;
    fs::create_dir_all(out_dir)?;
    let mut r = Report::new("split");
    r.set("seed", seed).set("groups", groups).set("vectors", all.len());
    let mut rows = Vec::new();
    for (name, part) in [("train", &result.train), ("val", &result.val), ("test", &result.test)] {
        write_container(out_dir.join(format!("{name}.pkw")), part)?;
        let groups = result.split.assignment.iter().filter(|&&x| x == part.role).count();
        let (benign, attack) = part.class_counts();
        rows.push(vec![json!(name), json!(groups), json!(part.len()), json!(benign), json!(attack)]);
    }
    r.table = Some(Table {
        name: "partitions".into(),
        columns: ["partition", "groups", "vectors", "benign", "attack"].map(String::from).to_vec(),
        rows,
    });
    Ok(r)
}

fn balanced(part: &DatasetPartition, windows: bool) -> Result<DatasetPartition, CliError> {
    if windows {
        let w = oversample_windows(&part.windows())?;
        Ok(DatasetPartition::from_windows(part.role, &w))
    } else {
        Ok(oversample_packets(part)?)
    }
}

pub fn balance(input: &Path, out: &Path, windows: bool) -> Out {
    let part = load_partition(input)?;
    let before = part.class_counts();
    let bal = balanced(&part, windows)?;
    write_container(out, &bal)?;
    let after = bal.class_counts();
    let mut r = Report::new("balance");
    r.set("mode", if windows { "windows" } else { "packets" })
        .set("before", json!({"benign": before.0, "attack": before.1}))
        .set("after", json!({"benign": after.0, "attack": after.1}))
        .set("records", bal.len());
    if windows {
        let w = bal.windows();
        let infected = w.iter().filter(|w| w.is_infected()).count();
        r.set("infected_windows", infected).set("benign_windows", w.len() - infected);
    }
    Ok(r)
}

pub struct TrainOpts<'a> {
    pub seed: u64,
    pub train: &'a Path,
    pub val: &'a Path,
    pub model: ModelArg,
    pub loss: LossArg,
    pub alpha: Option<f64>,
    pub gamma: Option<f64>,
    pub epochs: usize,
    pub batch_size: Option<usize>,
    pub learning_rate: Option<f64>,
    pub labeling: Option<Labeling>,
    pub balance: bool,
    pub out: &'a Path,
    pub history: Option<&'a Path>,
}

pub fn train(o: TrainOpts) -> Out {
    let mut loss = LossConfig::new(o.loss.into());
    if let Some(a) = o.alpha {
        loss.alpha = a;
    }
    if let Some(g) = o.gamma {
        loss.gamma = g;
    }
    loss.validate()?;
    let cfg = ModelConfig::new(o.model.into(), o.seed);
    let mut train_part = load_partition(o.train)?;
    let val = load_partition(o.val)?;
    if o.balance {
        train_part = balanced(&train_part, cfg.kind.is_windowed())?;
    }
    let mut model = build_model::<f32>(&cfg)?;
    let mut opts = TrainOptions::new(o.epochs, loss);
    opts.batch_size = o.batch_size;
    opts.learning_rate = o.learning_rate;
    let outcome = train_model(&mut model, &train_part, &val, &opts)?;
    save_checkpoint(&model, o.out)?;
    if let Some(path) = o.history {
        let mut w = create(path)?;
        write_history(&mut w, &outcome.history)?;
        w.flush()?;
    }
    let mut r = Report::new("train");
    r.set("model", cfg.kind.as_str())
        .set("loss", loss)
        .set("seed", o.seed)
        .set("parameters", model.parameter_count())
        .set("batch_size", o.batch_size.unwrap_or(cfg.batch_size))
        .set("learning_rate", o.learning_rate.unwrap_or(cfg.learning_rate))
        .set("labeling", o.labeling.map(Labeling::as_str))
        .set("balanced", o.balance)
        .set("train_records", train_part.len())
        .set("best_epoch", outcome.best_epoch);
    r.table = Some(Table {
        name: "history".into(),
        columns: ["epoch", "train_loss", "val_accuracy", "val_precision", "val_recall"]
            .map(String::from)
            .to_vec(),
        rows: outcome
            .history
            .iter()
            .map(|e| vec![json!(e.epoch), json!(e.train_loss), json!(e.val.accuracy), json!(e.val.precision), json!(e.val.recall)])
            .collect(),
    });
    Ok(r)
}

pub fn eval(checkpoint: &Path, data: &Path, out: Option<&Path>) -> Out {
    let mut model = load_checkpoint(require(checkpoint)?)?;
    let part = load_partition(data)?;
    let cm = evaluate_partition(&mut model, &part)?;
    let m = metrics(&cm)?;
    let mut r = Report::new("eval");
    r.set("model", model.config.kind.as_str())
        .set("confusion", cm)
        .set("accuracy", m.accuracy)
        .set("precision", m.precision)
        .set("recall", m.recall);
    if let Some(path) = out {
        let mut w = create(path)?;
        serde_json::to_writer_pretty(&mut w, &r.to_json()).map_err(std::io::Error::from)?;
        w.flush()?;
    }
    Ok(r)
}

pub fn saliency(checkpoint: &Path, data: &Path, batch: usize, pgm: &Path, csv: &Path) -> Out {
    if batch == 0 {
        return Err(invalid("saliency batch must be positive".into()));
    }
    let model = load_checkpoint(require(checkpoint)?)?;
    let part = load_partition(data)?;
    let windows: Vec<_> = part.windows().into_iter().filter(|w| w.valid_rows() > 0).take(batch).collect();
    if windows.is_empty() {
        return Err(invalid("container has no valid rows".into()));
    }
    let rows = windows[0].rows.len();
    let x: Vec<f64> = windows
        .iter()
        .flat_map(|w| w.rows.iter().flat_map(|r| r.bytes.iter().map(|&b| b as f64 / 255.0)))
        .collect();
    let x = Tensor::from_vec(&[windows.len(), rows, VECTOR_WIDTH], x)?;
    let mut model = model.cast::<f64>();
    let map = saliency_map(&mut model, &x)?;
    let mut w = create(pgm)?;
    map.write_pgm(&mut w)?;
    w.flush()?;
    let mut w = create(csv)?;
    map.write_csv(&mut w)?;
    w.flush()?;
    let (argmax, max) = map
        .values
        .iter()
        .enumerate()
        .fold((0, 0.0f64), |best, (i, &v)| if v > best.1 { (i, v) } else { best });
    let mut r = Report::new("saliency");
    r.set("batch_size", map.batch_size)
        .set("rows", map.rows)
        .set("cols", map.cols)
        .set("max", max)
        .set("max_at", json!({"row": argmax / map.cols, "col": argmax % map.cols}));
    Ok(r)
}
