//! Python bindings: file-level pipeline steps plus a few pure helpers.
//! Errors surface as `ValueError` prefixed with the pipeline error code.

use std::fs::File;
use std::io::BufWriter;
use std::path::PathBuf;

use pyo3::exceptions::PyValueError;
use pyo3::prelude::*;
use pyo3::types::{PyBytes, PyDict};

use pktwin::anonymize::{anonymize_capture, ones_complement_sum};
use pktwin::dataset::{group_split, read_container, write_container, DatasetPartition, Role, DEFAULT_FRACTIONS};
use pktwin::eval::metrics;
use pktwin::flow::{assemble_flows, label_flows, label_packets, read_rules, LabelingScheme, DEFAULT_FLOW_TIMEOUT_US};
use pktwin::ingest::{parse_packet, read_capture, reorder_chronologically, write_capture, PcapFileHeader};
use pktwin::nn::checkpoint::{load_checkpoint, save_checkpoint};
use pktwin::nn::loss::{LossConfig, LossKind};
use pktwin::nn::model::{build_model, ModelConfig, ModelKind};
use pktwin::nn::train::{evaluate_partition, train as train_model, TrainOptions};
use pktwin::window::{encode_capture, encode_time_delta, Provenance};

fn err(e: pktwin::Error) -> PyErr {
    PyValueError::new_err(format!("{}: {e}", e.code()))
}

fn io_err(e: std::io::Error) -> PyErr {
    err(e.into())
}

fn scheme(name: &str) -> PyResult<LabelingScheme> {
    match name {
        "forward" => Ok(LabelingScheme::ForwardOnly),
        "both" => Ok(LabelingScheme::BothSides),
        _ => Err(PyValueError::new_err(format!("unknown labeling scheme {name:?}"))),
    }
}

fn model_kind(name: &str) -> PyResult<ModelKind> {
    match name {
        "fcnn" => Ok(ModelKind::Fcnn),
        "cnn" => Ok(ModelKind::Cnn),
        "cnnlstm" => Ok(ModelKind::CnnLstm),
        _ => Err(PyValueError::new_err(format!("unknown model {name:?}"))),
    }
}

fn loss_kind(name: &str) -> PyResult<LossKind> {
    match name {
        "bce" => Ok(LossKind::Bce),
        "focal" => Ok(LossKind::Focal),
        "dice" => Ok(LossKind::Dice),
        "iou" => Ok(LossKind::Iou),
        _ => Err(PyValueError::new_err(format!("unknown loss {name:?}"))),
    }
}

/// RFC 1071 ones-complement sum of `data` (not complemented).
#[pyfunction]
fn checksum_sum(data: &[u8]) -> u16 {
    ones_complement_sum(0, data)
}

/// Time-delta byte for an inter-arrival gap in microseconds.
#[pyfunction]
fn time_delta_byte(delta_us: u64) -> u8 {
    encode_time_delta(delta_us)
}

/// Reads a pcap, orders it by time and writes it back; returns the packet count.
#[pyfunction]
fn ingest(input: PathBuf, output: PathBuf) -> PyResult<usize> {
    let cap = read_capture(&input).map_err(err)?;
    let packets = reorder_chronologically(cap.packets);
    write_capture(&output, &PcapFileHeader::ethernet(cap.header.snaplen), &packets).map_err(err)?;
    Ok(packets.len())
}

/// Per-packet 0/1 labels for a chronological capture and a rules CSV.
#[pyfunction]
#[pyo3(signature = (pcap, rules, labeling = "both"))]
fn label(pcap: PathBuf, rules: PathBuf, labeling: &str) -> PyResult<Vec<u8>> {
    let scheme = scheme(labeling)?;
    let cap = read_capture(&pcap).map_err(err)?;
    let rules = read_rules(File::open(&rules).map_err(io_err)?).map_err(err)?;
    let headers: Vec<_> = cap.packets.iter().map(parse_packet).collect();
    let flows = assemble_flows(&cap.packets, &headers, DEFAULT_FLOW_TIMEOUT_US);
    let fl = label_flows(&flows, &rules);
    Ok(label_packets(&headers, &flows, &fl, &rules, scheme).into_iter().map(|l| l.label).collect())
}

/// Anonymizes a capture; returns the number of distinct MACs, IPs and ports replaced.
#[pyfunction]
fn anonymize(py: Python<'_>, input: PathBuf, output: PathBuf, seed: u64) -> PyResult<Py<PyDict>> {
    let cap = read_capture(&input).map_err(err)?;
    let out = anonymize_capture(&cap.packets, seed);
    write_capture(&output, &cap.header, &out.packets).map_err(err)?;
    let d = PyDict::new(py);
    d.set_item("packets", out.packets.len())?;
    d.set_item("macs", out.map.mac.len())?;
    d.set_item("ips", out.map.ip.len())?;
    d.set_item("ports", out.map.port.len())?;
    Ok(d.unbind())
}

/// Encodes a capture with its labels into a PKW1 container.
#[pyfunction]
#[pyo3(signature = (pcap, labels, output, capture_id = 0))]
fn encode(pcap: PathBuf, labels: Vec<u8>, output: PathBuf, capture_id: u32) -> PyResult<usize> {
    let cap = read_capture(&pcap).map_err(err)?;
    if labels.len() != cap.packets.len() {
        return Err(PyValueError::new_err(format!(
            "{} labels for {} packets",
            labels.len(),
            cap.packets.len()
        )));
    }
    let vectors = encode_capture(&cap.packets, &labels);
    let provenance = (0..vectors.len())
        .map(|i| Provenance {
            capture_id,
            packet_index: i as u64,
        })
        .collect();
    write_container(&output, &DatasetPartition::new(Role::Unspecified, vectors, provenance)).map_err(err)?;
    Ok(cap.packets.len())
}

/// Contents of a container as `(bytes, labels, valid, capture_ids, packet_indices)`;
/// `bytes` is the flat row-major N×351 matrix.
#[pyfunction]
fn read_vectors<'py>(
    py: Python<'py>,
    path: PathBuf,
) -> PyResult<(Bound<'py, PyBytes>, Vec<u8>, Vec<bool>, Vec<u32>, Vec<u64>)> {
    let p = read_container(&path).map_err(err)?;
    let flat: Vec<u8> = p.vectors.iter().flat_map(|v| v.bytes).collect();
    Ok((
        PyBytes::new(py, &flat),
        p.vectors.iter().map(|v| v.label).collect(),
        p.vectors.iter().map(|v| v.valid).collect(),
        p.provenance.iter().map(|x| x.capture_id).collect(),
        p.provenance.iter().map(|x| x.packet_index).collect(),
    ))
}

/// Splits a container into train/val/test containers in `out_dir`; returns their sizes.
#[pyfunction]
#[pyo3(signature = (input, out_dir, seed, groups = 1000))]
fn split(input: PathBuf, out_dir: PathBuf, seed: u64, groups: usize) -> PyResult<(usize, usize, usize)> {
    let all = read_container(&input).map_err(err)?;
    let s = group_split(&all, groups, seed, DEFAULT_FRACTIONS).map_err(err)?;
    std::fs::create_dir_all(&out_dir).map_err(io_err)?;
    for (name, part) in [("train", &s.train), ("val", &s.val), ("test", &s.test)] {
        write_container(out_dir.join(format!("{name}.pkw")), part).map_err(err)?;
    }
    Ok((s.train.len(), s.val.len(), s.test.len()))
}

/// Trains a model, saves the checkpoint and returns per-epoch validation accuracy.
#[pyfunction]
#[pyo3(signature = (train, val, checkpoint, seed, model = "fcnn", loss = "bce", epochs = 5))]
fn train(
    train: PathBuf,
    val: PathBuf,
    checkpoint: PathBuf,
    seed: u64,
    model: &str,
    loss: &str,
    epochs: usize,
) -> PyResult<Vec<f64>> {
    let cfg = ModelConfig::new(model_kind(model)?, seed);
    let mut m = build_model::<f32>(&cfg).map_err(err)?;
    let (tr, va) = (read_container(&train).map_err(err)?, read_container(&val).map_err(err)?);
    let out = train_model(&mut m, &tr, &va, &TrainOptions::new(epochs, LossConfig::new(loss_kind(loss)?))).map_err(err)?;
    save_checkpoint(&m, &checkpoint).map_err(err)?;
    Ok(out.history.iter().map(|e| e.val.accuracy).collect())
}

/// Confusion counts and metrics of a checkpoint on a container.
#[pyfunction]
fn evaluate(py: Python<'_>, checkpoint: PathBuf, data: PathBuf) -> PyResult<Py<PyDict>> {
    let mut m = load_checkpoint(&checkpoint).map_err(err)?;
    let part = read_container(&data).map_err(err)?;
    let cm = evaluate_partition(&mut m, &part).map_err(err)?;
    let mx = metrics(&cm).map_err(err)?;
    let d = PyDict::new(py);
    for (k, v) in [("tp", cm.tp), ("fp", cm.fp), ("tn", cm.tn), ("fn", cm.fn_)] {
        d.set_item(k, v)?;
    }
    d.set_item("accuracy", mx.accuracy)?;
    d.set_item("precision", mx.precision)?;
    d.set_item("recall", mx.recall)?;
    Ok(d.unbind())
}

/// Writes a synthetic capture and its rules CSV.
#[pyfunction]
#[pyo3(signature = (pcap, rules, seed, packets = 10_000))]
fn synth(pcap: PathBuf, rules: PathBuf, seed: u64, packets: usize) -> PyResult<usize> {
    let s = pktwin::synth::generate_capture(&pktwin::synth::SynthConfig {
        packets,
        seed,
        ..Default::default()
    });
    write_capture(&pcap, &s.header, &s.packets).map_err(err)?;
    pktwin::flow::write_rules(BufWriter::new(File::create(&rules).map_err(io_err)?), &s.rules).map_err(err)?;
    Ok(s.packets.len())
}

#[pymodule]
pub fn pktwin_py(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add("VECTOR_WIDTH", pktwin::window::VECTOR_WIDTH)?;
    m.add("WINDOW_ROWS", pktwin::window::WINDOW_ROWS)?;
    m.add_function(wrap_pyfunction!(checksum_sum, m)?)?;
    m.add_function(wrap_pyfunction!(time_delta_byte, m)?)?;
    m.add_function(wrap_pyfunction!(synth, m)?)?;
    m.add_function(wrap_pyfunction!(ingest, m)?)?;
    m.add_function(wrap_pyfunction!(label, m)?)?;
    m.add_function(wrap_pyfunction!(anonymize, m)?)?;
    m.add_function(wrap_pyfunction!(encode, m)?)?;
    m.add_function(wrap_pyfunction!(read_vectors, m)?)?;
    m.add_function(wrap_pyfunction!(split, m)?)?;
    m.add_function(wrap_pyfunction!(train, m)?)?;
    m.add_function(wrap_pyfunction!(evaluate, m)?)?;
    Ok(())
}
