use std::io::{Read, Write};
use std::net::Ipv4Addr;

use serde::{Deserialize, Serialize};

use super::{Direction, FlowRecord};
use crate::error::{Error, Result};
use crate::ingest::ParsedHeaders;

pub const RULE_COLUMNS: [&str; 6] = [
    "attack_name",
    "ts_start_us",
    "ts_end_us",
    "attacker_ip",
    "victim_ip",
    "victim_port",
];

pub const LABEL_COLUMNS: [&str; 5] = [
    "capture_id",
    "packet_index",
    "label",
    "attack_name",
    "direction",
];

/// An attack interval between two hosts. Flows between exactly these two
/// endpoints (in either initiation direction) that overlap the interval are
/// attack flows.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct LabelRule {
    pub attack_name: String,
    #[serde(rename = "ts_start_us")]
    pub ts_start: u64,
    #[serde(rename = "ts_end_us")]
    pub ts_end: u64,
    pub attacker_ip: Ipv4Addr,
    pub victim_ip: Ipv4Addr,
    pub victim_port: Option<u16>,
}

impl LabelRule {
    pub fn matches(&self, flow: &FlowRecord) -> bool {
        let init = (flow.initiator_ip, flow.initiator_port);
        let resp = flow.responder();
        let victim_port = if init.0 == self.attacker_ip && resp.0 == self.victim_ip {
            resp.1
        } else if init.0 == self.victim_ip && resp.0 == self.attacker_ip {
            init.1
        } else {
            return false;
        };
        if self.victim_port.is_some_and(|p| p != victim_port) {
            return false;
        }
        flow.first_ts <= self.ts_end && flow.last_ts >= self.ts_start
    }
}

pub fn read_rules(reader: impl Read) -> Result<Vec<LabelRule>> {
    let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(reader);
    let headers = rdr.headers()?.clone();
    if headers.iter().ne(RULE_COLUMNS) {
        return Err(Error::Record {
            source_name: "rules".into(),
            line: 1,
            reason: format!(
                "header must be exactly {}, found {}",
                RULE_COLUMNS.join(","),
                headers.iter().collect::<Vec<_>>().join(",")
            ),
        });
    }
    let mut rules = Vec::new();
    for row in rdr.deserialize::<LabelRule>() {
        let rule = row.map_err(|e| Error::Record {
            source_name: "rules".into(),
            line: e.position().map_or(0, |p| p.line()),
            reason: e.to_string(),
        })?;
        if rule.ts_start >= rule.ts_end {
            return Err(Error::Record {
                source_name: "rules".into(),
                line: rules.len() as u64 + 2,
                reason: format!("ts_start_us {} must be < ts_end_us {}", rule.ts_start, rule.ts_end),
            });
        }
        rules.push(rule);
    }
    Ok(rules)
}

pub fn write_rules(writer: impl Write, rules: &[LabelRule]) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    for r in rules {
        w.serialize(r)?;
    }
    w.flush()?;
    Ok(())
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LabelWarning {
    pub flow: usize,
    pub chosen_rule: usize,
    pub shadowed_rule: usize,
}

#[derive(Debug, Clone, Default)]
pub struct FlowLabels {
    /// Index of the matching rule for each flow, `None` for benign flows.
    pub rule_for_flow: Vec<Option<usize>>,
    pub warnings: Vec<LabelWarning>,
}

/// First matching rule wins. A later rule with a different attack name that
/// also matches is reported as a warning.
pub fn label_flows(flows: &[FlowRecord], rules: &[LabelRule]) -> FlowLabels {
    let mut out = FlowLabels::default();
    for (fi, flow) in flows.iter().enumerate() {
        let mut matching = rules.iter().enumerate().filter(|(_, r)| r.matches(flow));
        let first = matching.next();
        if let Some((ri, rule)) = first {
            for (si, other) in matching {
                if other.attack_name != rule.attack_name {
                    out.warnings.push(LabelWarning {
                        flow: fi,
                        chosen_rule: ri,
                        shadowed_rule: si,
                    });
                }
            }
        }
        out.rule_for_flow.push(first.map(|(ri, _)| ri));
    }
    out
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LabelingScheme {
    /// Only attacker-sourced packets of attack flows are attacks.
    ForwardOnly,
    /// Every packet of an attack flow, responses included, is an attack.
    BothSides,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PacketDirection {
    Forward,
    Backward,
    None,
}

impl From<Direction> for PacketDirection {
    fn from(d: Direction) -> Self {
        match d {
            Direction::Forward => PacketDirection::Forward,
            Direction::Backward => PacketDirection::Backward,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PacketLabel {
    pub label: u8,
    pub attack_name: Option<String>,
    pub direction: PacketDirection,
}

impl PacketLabel {
    pub fn benign(direction: PacketDirection) -> Self {
        PacketLabel {
            label: 0,
            attack_name: None,
            direction,
        }
    }
}

/// Projects flow labels onto every packet of the capture (`headers` is
/// indexed by packet position). Packets that belong to no flow are benign.
pub fn label_packets(
    headers: &[ParsedHeaders],
    flows: &[FlowRecord],
    flow_labels: &FlowLabels,
    rules: &[LabelRule],
    scheme: LabelingScheme,
) -> Vec<PacketLabel> {
    let mut labels = vec![PacketLabel::benign(PacketDirection::None); headers.len()];
    for (flow, rule) in flows.iter().zip(&flow_labels.rule_for_flow) {
        let rule = rule.map(|r| &rules[r]);
        for &(idx, dir) in &flow.packets {
            let attack = rule.filter(|r| match scheme {
                LabelingScheme::BothSides => true,
                LabelingScheme::ForwardOnly => headers[idx].src_ip == Some(r.attacker_ip),
            });
            labels[idx] = match attack {
                Some(r) => PacketLabel {
                    label: 1,
                    attack_name: Some(r.attack_name.clone()),
                    direction: dir.into(),
                },
                None => PacketLabel::benign(dir.into()),
            };
        }
    }
    labels
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct LabelRow {
    pub capture_id: u32,
    pub packet_index: u64,
    pub label: u8,
    pub attack_name: Option<String>,
    pub direction: PacketDirection,
}

pub fn write_labels(writer: impl Write, capture_id: u32, labels: &[PacketLabel]) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    for (i, l) in labels.iter().enumerate() {
        w.serialize(LabelRow {
            capture_id,
            packet_index: i as u64,
            label: l.label,
            attack_name: l.attack_name.clone(),
            direction: l.direction,
        })?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_labels(reader: impl Read) -> Result<Vec<LabelRow>> {
    let mut rdr = csv::Reader::from_reader(reader);
    let headers = rdr.headers()?.clone();
    if headers.iter().ne(LABEL_COLUMNS) {
        return Err(Error::Record {
            source_name: "labels".into(),
            line: 1,
            reason: format!("header must be exactly {}", LABEL_COLUMNS.join(",")),
        });
    }
    let mut rows = Vec::new();
    for row in rdr.deserialize::<LabelRow>() {
        let row = row.map_err(|e| Error::Record {
            source_name: "labels".into(),
            line: e.position().map_or(0, |p| p.line()),
            reason: e.to_string(),
        })?;
        if row.label > 1 || (row.label == 1 && row.attack_name.is_none()) {
            return Err(Error::Record {
                source_name: "labels".into(),
                line: rows.len() as u64 + 2,
                reason: "label must be 0, or 1 with an attack_name".into(),
            });
        }
        rows.push(row);
    }
    Ok(rows)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::flow::{assemble_flows, DEFAULT_FLOW_TIMEOUT_US};
    use crate::ingest::{Protocol, RawPacket};

    const A: [u8; 4] = [10, 0, 0, 66];
    const B: [u8; 4] = [10, 0, 0, 80];

    fn hdr(src: [u8; 4], sp: u16, dst: [u8; 4], dp: u16) -> ParsedHeaders {
        ParsedHeaders {
            ip_version: Some(4),
            protocol: Some(Protocol::Udp),
            src_ip: Some(src.into()),
            dst_ip: Some(dst.into()),
            src_port: Some(sp),
            dst_port: Some(dp),
            ..Default::default()
        }
    }

    fn at(ts_us: u64) -> RawPacket {
        RawPacket {
            index: 0,
            ts_us,
            original_len: 0,
            data: vec![],
        }
    }

    fn rule(name: &str, start: u64, end: u64) -> LabelRule {
        LabelRule {
            attack_name: name.into(),
            ts_start: start,
            ts_end: end,
            attacker_ip: A.into(),
            victim_ip: B.into(),
            victim_port: None,
        }
    }

    fn run(
        headers: &[ParsedHeaders],
        ts: &[u64],
        rules: &[LabelRule],
        scheme: LabelingScheme,
    ) -> Vec<u8> {
        let packets: Vec<_> = ts.iter().map(|&t| at(t)).collect();
        let flows = assemble_flows(&packets, headers, DEFAULT_FLOW_TIMEOUT_US);
        let fl = label_flows(&flows, rules);
        label_packets(headers, &flows, &fl, rules, scheme)
            .iter()
            .map(|l| l.label)
            .collect()
    }

    #[test]
    fn forward_only_vs_both_sides() {
        let hs = [
            hdr(A, 4000, B, 80),
            hdr(A, 4000, B, 80),
            hdr(B, 80, A, 4000),
        ];
        let rules = [rule("DoS", 0, 100)];
        assert_eq!(run(&hs, &[10, 20, 30], &rules, LabelingScheme::ForwardOnly), vec![1, 1, 0]);
        assert_eq!(run(&hs, &[10, 20, 30], &rules, LabelingScheme::BothSides), vec![1, 1, 1]);
    }

    #[test]
    fn flow_after_window_is_benign() {
        let hs = [hdr(A, 4000, B, 80)];
        assert_eq!(run(&hs, &[500], &[rule("DoS", 0, 100)], LabelingScheme::BothSides), vec![0]);
    }

    #[test]
    fn victim_initiated_flow_is_still_attack() {
        let hs = [hdr(B, 80, A, 4000), hdr(A, 4000, B, 80)];
        let rules = [rule("Bot", 0, 100)];
        assert_eq!(run(&hs, &[10, 20], &rules, LabelingScheme::BothSides), vec![1, 1]);
        assert_eq!(run(&hs, &[10, 20], &rules, LabelingScheme::ForwardOnly), vec![0, 1]);
    }

    #[test]
    fn victim_port_restricts_match() {
        let hs = [hdr(A, 4000, B, 80), hdr(A, 4001, B, 443)];
        let mut r = rule("Web", 0, 100);
        r.victim_port = Some(443);
        assert_eq!(run(&hs, &[10, 20], &[r], LabelingScheme::BothSides), vec![0, 1]);
    }

    #[test]
    fn first_rule_wins_with_warning() {
        let hs = [hdr(A, 4000, B, 80)];
        let packets = [at(10)];
        let flows = assemble_flows(&packets, &hs, DEFAULT_FLOW_TIMEOUT_US);
        let rules = [rule("First", 0, 100), rule("Second", 5, 50), rule("First", 0, 20)];
        let fl = label_flows(&flows, &rules);
        assert_eq!(fl.rule_for_flow, vec![Some(0)]);
        assert_eq!(fl.warnings, vec![LabelWarning { flow: 0, chosen_rule: 0, shadowed_rule: 1 }]);
    }

    #[test]
    fn rules_csv_parses_optional_port() {
        let csv = "attack_name,ts_start_us,ts_end_us,attacker_ip,victim_ip,victim_port\n\
                   DoS Hulk,100,200,172.16.0.1,192.168.10.50,80\n\
                   PortScan,300,400,172.16.0.1,192.168.10.50,\n";
        let rules = read_rules(csv.as_bytes()).unwrap();
        assert_eq!(rules.len(), 2);
        assert_eq!(rules[0].victim_port, Some(80));
        assert_eq!(rules[1].victim_port, None);
        let mut out = Vec::new();
        write_rules(&mut out, &rules).unwrap();
        assert_eq!(read_rules(out.as_slice()).unwrap(), rules);
    }

    #[test]
    fn rules_csv_rejects_bad_header_and_interval() {
        let bad_header = "name,start,end,a,v,p\nx,1,2,1.1.1.1,2.2.2.2,\n";
        assert!(read_rules(bad_header.as_bytes()).is_err());
        let bad_interval = "attack_name,ts_start_us,ts_end_us,attacker_ip,victim_ip,victim_port\n\
                            x,5,5,1.1.1.1,2.2.2.2,\n";
        assert!(matches!(
            read_rules(bad_interval.as_bytes()),
            Err(Error::Record { line: 2, .. })
        ));
    }

    #[test]
    fn labels_csv_round_trip() {
        let labels = vec![
            PacketLabel::benign(PacketDirection::None),
            PacketLabel {
                label: 1,
                attack_name: Some("DDoS".into()),
                direction: PacketDirection::Forward,
            },
        ];
        let mut out = Vec::new();
        write_labels(&mut out, 3, &labels).unwrap();
        let text = String::from_utf8(out.clone()).unwrap();
        assert!(text.starts_with("capture_id,packet_index,label,attack_name,direction\n"));
        assert!(text.contains("3,1,1,DDoS,forward"));
        let rows = read_labels(out.as_slice()).unwrap();
        assert_eq!(rows.len(), 2);
        assert_eq!(rows[1].attack_name.as_deref(), Some("DDoS"));
        assert_eq!(rows[0].direction, PacketDirection::None);
    }
}
