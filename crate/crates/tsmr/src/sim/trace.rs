//! Run events: the single stream feeding the checkers, the determinism hash
//! and the optional trace.jsonl file.

use crate::core::{Ballot, CommandId, PartitionId, Phase, ProcessId, Timestamp};
use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;
use std::fmt::Write as _;

/// Compact summary of a protocol message, enough for the checkers.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct MsgMeta {
    pub name: &'static str,
    pub id: Option<CommandId>,
    pub ts: Option<Timestamp>,
    pub ballot: Option<Ballot>,
    /// Deciding partition on MCommit.
    pub partition: Option<PartitionId>,
    pub relay: Option<bool>,
    /// MRecAck extras.
    pub abal: Option<Ballot>,
    pub phase: Option<Phase>,
}

impl MsgMeta {
    pub fn named(name: &'static str) -> Self {
        Self {
            name,
            id: None,
            ts: None,
            ballot: None,
            partition: None,
            relay: None,
            abal: None,
            phase: None,
        }
    }
}

/// One simulator event. `t` is simulated microseconds.
#[derive(Debug, Clone, PartialEq)]
pub enum Event {
    Meta {
        r: usize,
        f: usize,
        partitions: u16,
        sites: usize,
        check_liveness: bool,
    },
    Submit {
        t: u64,
        id: CommandId,
        submitter: ProcessId,
        parts: Vec<PartitionId>,
        quorums: BTreeMap<PartitionId, Vec<ProcessId>>,
    },
    Return {
        t: u64,
        id: CommandId,
    },
    Send {
        t: u64,
        src: ProcessId,
        dst: ProcessId,
        msg: MsgMeta,
    },
    Drop {
        t: u64,
        src: ProcessId,
        dst: ProcessId,
        msg: MsgMeta,
    },
    Exec {
        t: u64,
        src: ProcessId,
        id: CommandId,
        ts: Timestamp,
    },
    Commit {
        t: u64,
        src: ProcessId,
        id: CommandId,
        ts: Timestamp,
        part_ts: Timestamp,
    },
    Decide {
        t: u64,
        src: ProcessId,
        partition: PartitionId,
        id: CommandId,
        ts: Timestamp,
        fast: bool,
    },
    Stable {
        t: u64,
        src: ProcessId,
        ts: Timestamp,
    },
    FunTs {
        t: u64,
        src: ProcessId,
        id: CommandId,
        ts: Timestamp,
    },
    Crash {
        t: u64,
        src: ProcessId,
    },
    Suspect {
        t: u64,
        src: ProcessId,
    },
    Recovery {
        t: u64,
        src: ProcessId,
        id: CommandId,
        ballot: Ballot,
        branch: &'static str,
    },
    Gst {
        t: u64,
    },
}

/// FNV-1a over the event stream; enough to detect any divergence between
/// two runs of the same scenario and seed.
#[derive(Debug, Clone)]
pub struct TraceHasher {
    state: u64,
    events: u64,
}

impl Default for TraceHasher {
    fn default() -> Self {
        Self { state: 0xcbf2_9ce4_8422_2325, events: 0 }
    }
}

impl TraceHasher {
    fn byte(&mut self, b: u8) {
        self.state ^= b as u64;
        self.state = self.state.wrapping_mul(0x0000_0100_0000_01b3);
    }

    fn word(&mut self, w: u64) {
        for b in w.to_le_bytes() {
            self.byte(b);
        }
    }

    fn pid(&mut self, p: ProcessId) {
        self.word(((p.partition as u64) << 32) | p.site as u64);
    }

    fn cid(&mut self, id: CommandId) {
        self.pid(id.submitter);
        self.word(id.seq);
    }

    fn str_(&mut self, s: &str) {
        for b in s.bytes() {
            self.byte(b);
        }
    }

    pub fn events(&self) -> u64 {
        self.events
    }

    pub fn finish_hex(&self) -> String {
        format!("{:016x}", self.state)
    }

    pub fn fold(&mut self, ev: &Event) {
        self.events += 1;
        match ev {
            Event::Meta { r, f, partitions, sites, check_liveness } => {
                self.str_("meta");
                self.word(*r as u64);
                self.word(*f as u64);
                self.word(*partitions as u64);
                self.word(*sites as u64);
                self.byte(*check_liveness as u8);
            }
            Event::Submit { t, id, submitter, parts, quorums } => {
                self.str_("submit");
                self.word(*t);
                self.cid(*id);
                self.pid(*submitter);
                for p in parts {
                    self.word(*p as u64);
                }
                for (p, members) in quorums {
                    self.word(*p as u64);
                    for m in members {
                        self.pid(*m);
                    }
                }
            }
            Event::Return { t, id } => {
                self.str_("return");
                self.word(*t);
                self.cid(*id);
            }
            Event::Send { t, src, dst, msg } | Event::Drop { t, src, dst, msg } => {
                self.str_(if matches!(ev, Event::Send { .. }) { "send" } else { "drop" });
                self.word(*t);
                self.pid(*src);
                self.pid(*dst);
                self.str_(msg.name);
                if let Some(id) = msg.id {
                    self.cid(id);
                }
                self.word(msg.ts.unwrap_or(0));
                self.word(msg.ballot.unwrap_or(0));
            }
            Event::Exec { t, src, id, ts } => {
                self.str_("exec");
                self.word(*t);
                self.pid(*src);
                self.cid(*id);
                self.word(*ts);
            }
            Event::Commit { t, src, id, ts, part_ts } => {
                self.str_("commit");
                self.word(*t);
                self.pid(*src);
                self.cid(*id);
                self.word(*ts);
                self.word(*part_ts);
            }
            Event::Decide { t, src, partition, id, ts, fast } => {
                self.str_("decide");
                self.word(*t);
                self.pid(*src);
                self.word(*partition as u64);
                self.cid(*id);
                self.word(*ts);
                self.byte(*fast as u8);
            }
            Event::Stable { t, src, ts } => {
                self.str_("stable");
                self.word(*t);
                self.pid(*src);
                self.word(*ts);
            }
            Event::FunTs { t, src, id, ts } => {
                self.str_("funts");
                self.word(*t);
                self.pid(*src);
                self.cid(*id);
                self.word(*ts);
            }
            Event::Crash { t, src } => {
                self.str_("crash");
                self.word(*t);
                self.pid(*src);
            }
            Event::Suspect { t, src } => {
                self.str_("suspect");
                self.word(*t);
                self.pid(*src);
            }
            Event::Recovery { t, src, id, ballot, branch } => {
                self.str_("recovery");
                self.word(*t);
                self.pid(*src);
                self.cid(*id);
                self.word(*ballot);
                self.str_(branch);
            }
            Event::Gst { t } => {
                self.str_("gst");
                self.word(*t);
            }
        }
    }
}

// ---------------------------------------------------------------------
// trace.jsonl records
// ---------------------------------------------------------------------

/// Line format of trace.jsonl, schema version 1. Field `t` is simulated
/// microseconds; process fields use the form `s<site>p<partition>`; command
/// ids use `s<site>p<partition>:<seq>`.
#[derive(Debug, Clone, Serialize, Deserialize, Default)]
pub struct TraceRecord {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub v: Option<u32>,
    pub t: u64,
    pub kind: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub src: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub dst: Option<String>,
    #[serde(rename = "msg", skip_serializing_if = "Option::is_none")]
    pub msg_type: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub id: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub ts: Option<u64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub ballot: Option<u64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub partition: Option<u16>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub fast: Option<bool>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub relay: Option<bool>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub abal: Option<u64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub phase: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub branch: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub part_ts: Option<u64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub parts: Option<Vec<u16>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub quorums: Option<BTreeMap<u16, Vec<String>>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub r: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub f: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub partitions: Option<u16>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub sites: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub check_liveness: Option<bool>,
}

pub fn pid_string(p: ProcessId) -> String {
    format!("{p}")
}

pub fn cid_string(id: CommandId) -> String {
    format!("{id}")
}

fn parse_pid(s: &str) -> Option<ProcessId> {
    let rest = s.strip_prefix('s')?;
    let (site, partition) = rest.split_once('p')?;
    Some(ProcessId::new(partition.parse().ok()?, site.parse().ok()?))
}

fn parse_cid(s: &str) -> Option<CommandId> {
    let (pid, seq) = s.split_once(':')?;
    Some(CommandId { submitter: parse_pid(pid)?, seq: seq.parse().ok()? })
}

fn parse_phase(s: &str) -> Option<Phase> {
    Some(match s {
        "start" => Phase::Start,
        "payload" => Phase::Payload,
        "propose" => Phase::Propose,
        "recover-r" => Phase::RecoverR,
        "recover-p" => Phase::RecoverP,
        "commit" => Phase::Commit,
        "execute" => Phase::Execute,
        _ => return None,
    })
}

impl Event {
    pub fn to_record(&self) -> TraceRecord {
        let mut rec = TraceRecord { t: 0, kind: String::new(), ..Default::default() };
        match self {
            Event::Meta { r, f, partitions, sites, check_liveness } => {
                rec.kind = "meta".into();
                rec.v = Some(1);
                rec.r = Some(*r);
                rec.f = Some(*f);
                rec.partitions = Some(*partitions);
                rec.sites = Some(*sites);
                rec.check_liveness = Some(*check_liveness);
            }
            Event::Submit { t, id, submitter, parts, quorums } => {
                rec.t = *t;
                rec.kind = "submit".into();
                rec.id = Some(cid_string(*id));
                rec.src = Some(pid_string(*submitter));
                rec.parts = Some(parts.clone());
                rec.quorums = Some(
                    quorums
                        .iter()
                        .map(|(p, ms)| (*p, ms.iter().map(|m| pid_string(*m)).collect()))
                        .collect(),
                );
            }
            Event::Return { t, id } => {
                rec.t = *t;
                rec.kind = "return".into();
                rec.id = Some(cid_string(*id));
            }
            Event::Send { t, src, dst, msg } | Event::Drop { t, src, dst, msg } => {
                rec.t = *t;
                rec.kind = if matches!(self, Event::Send { .. }) { "send" } else { "drop" }.into();
                rec.src = Some(pid_string(*src));
                rec.dst = Some(pid_string(*dst));
                rec.msg_type = Some(msg.name.into());
                rec.id = msg.id.map(cid_string);
                rec.ts = msg.ts;
                rec.ballot = msg.ballot;
                rec.partition = msg.partition;
                rec.relay = msg.relay;
                rec.abal = msg.abal;
                rec.phase = msg.phase.map(|p| p.to_string());
            }
            Event::Exec { t, src, id, ts } => {
                rec.t = *t;
                rec.kind = "exec".into();
                rec.src = Some(pid_string(*src));
                rec.partition = Some(src.partition);
                rec.id = Some(cid_string(*id));
                rec.ts = Some(*ts);
            }
            Event::Commit { t, src, id, ts, part_ts } => {
                rec.t = *t;
                rec.kind = "commit".into();
                rec.src = Some(pid_string(*src));
                rec.id = Some(cid_string(*id));
                rec.ts = Some(*ts);
                rec.part_ts = Some(*part_ts);
            }
            Event::Decide { t, src, partition, id, ts, fast } => {
                rec.t = *t;
                rec.kind = "decide".into();
                rec.src = Some(pid_string(*src));
                rec.partition = Some(*partition);
                rec.id = Some(cid_string(*id));
                rec.ts = Some(*ts);
                rec.fast = Some(*fast);
            }
            Event::Stable { t, src, ts } => {
                rec.t = *t;
                rec.kind = "stable".into();
                rec.src = Some(pid_string(*src));
                rec.ts = Some(*ts);
            }
            Event::FunTs { t, src, id, ts } => {
                rec.t = *t;
                rec.kind = "funts".into();
                rec.src = Some(pid_string(*src));
                rec.id = Some(cid_string(*id));
                rec.ts = Some(*ts);
            }
            Event::Crash { t, src } => {
                rec.t = *t;
                rec.kind = "crash".into();
                rec.src = Some(pid_string(*src));
            }
            Event::Suspect { t, src } => {
                rec.t = *t;
                rec.kind = "suspect".into();
                rec.src = Some(pid_string(*src));
            }
            Event::Recovery { t, src, id, ballot, branch } => {
                rec.t = *t;
                rec.kind = "recovery".into();
                rec.src = Some(pid_string(*src));
                rec.id = Some(cid_string(*id));
                rec.ballot = Some(*ballot);
                rec.branch = Some((*branch).into());
            }
            Event::Gst { t } => {
                rec.t = *t;
                rec.kind = "gst".into();
            }
        }
        rec
    }

    /// Inverse of `to_record`, for `tsmr check`. Unknown kinds are rejected.
    pub fn from_record(rec: &TraceRecord) -> Result<Event, String> {
        let src = || {
            rec.src
                .as_deref()
                .and_then(parse_pid)
                .ok_or_else(|| format!("bad src in {} record", rec.kind))
        };
        let id = || {
            rec.id
                .as_deref()
                .and_then(parse_cid)
                .ok_or_else(|| format!("bad id in {} record", rec.kind))
        };
        Ok(match rec.kind.as_str() {
            "meta" => Event::Meta {
                r: rec.r.ok_or("meta without r")?,
                f: rec.f.ok_or("meta without f")?,
                partitions: rec.partitions.ok_or("meta without partitions")?,
                sites: rec.sites.ok_or("meta without sites")?,
                check_liveness: rec.check_liveness.unwrap_or(false),
            },
            "submit" => Event::Submit {
                t: rec.t,
                id: id()?,
                submitter: src()?,
                parts: rec.parts.clone().unwrap_or_default(),
                quorums: rec
                    .quorums
                    .clone()
                    .unwrap_or_default()
                    .into_iter()
                    .map(|(p, ms)| {
                        let members = ms
                            .iter()
                            .map(|m| parse_pid(m).ok_or("bad quorum member"))
                            .collect::<Result<Vec<_>, _>>()?;
                        Ok::<_, &str>((p, members))
                    })
                    .collect::<Result<_, _>>()?,
            },
            "return" => Event::Return { t: rec.t, id: id()? },
            "send" | "drop" => {
                let names: &[&str] = &[
                    "MSubmit", "MPropose", "MPayload", "MProposeAck", "MCommit", "MConsensus",
                    "MConsensusAck", "MBump", "MPromises", "MStable", "MRec", "MRecAck",
                    "MRecNAck", "MCommitRequest", "ExecResult",
                ];
                let name = rec.msg_type.as_deref().ok_or("message record without msg")?;
                let name = names
                    .iter()
                    .find(|n| **n == name)
                    .ok_or_else(|| format!("unknown message type {name}"))?;
                let msg = MsgMeta {
                    name,
                    id: rec.id.as_deref().and_then(parse_cid),
                    ts: rec.ts,
                    ballot: rec.ballot,
                    partition: rec.partition,
                    relay: rec.relay,
                    abal: rec.abal,
                    phase: rec.phase.as_deref().and_then(parse_phase),
                };
                let dst = rec
                    .dst
                    .as_deref()
                    .and_then(parse_pid)
                    .ok_or("message record without dst")?;
                if rec.kind == "send" {
                    Event::Send { t: rec.t, src: src()?, dst, msg }
                } else {
                    Event::Drop { t: rec.t, src: src()?, dst, msg }
                }
            }
            "exec" => Event::Exec { t: rec.t, src: src()?, id: id()?, ts: rec.ts.unwrap_or(0) },
            "commit" => Event::Commit {
                t: rec.t,
                src: src()?,
                id: id()?,
                ts: rec.ts.unwrap_or(0),
                part_ts: rec.part_ts.or(rec.ts).unwrap_or(0),
            },
            "decide" => Event::Decide {
                t: rec.t,
                src: src()?,
                partition: rec.partition.ok_or("decide without partition")?,
                id: id()?,
                ts: rec.ts.unwrap_or(0),
                fast: rec.fast.unwrap_or(false),
            },
            "stable" => Event::Stable { t: rec.t, src: src()?, ts: rec.ts.unwrap_or(0) },
            "funts" => Event::FunTs { t: rec.t, src: src()?, id: id()?, ts: rec.ts.unwrap_or(0) },
            "crash" => Event::Crash { t: rec.t, src: src()? },
            "suspect" => Event::Suspect { t: rec.t, src: src()? },
            "recovery" => {
                let branch = match rec.branch.as_deref() {
                    Some("mrec") => "mrec",
                    Some("accepted-max") => "accepted-max",
                    Some("s-true") => "s-true",
                    Some("s-false") => "s-false",
                    other => return Err(format!("unknown recovery branch {other:?}")),
                };
                Event::Recovery {
                    t: rec.t,
                    src: src()?,
                    id: id()?,
                    ballot: rec.ballot.unwrap_or(0),
                    branch,
                }
            }
            "gst" => Event::Gst { t: rec.t },
            other => return Err(format!("unknown record kind {other}")),
        })
    }

    pub fn to_json_line(&self) -> String {
        let mut line = serde_json::to_string(&self.to_record()).expect("trace records serialize");
        line.push('\n');
        line
    }
}

/// Renders events to a jsonl string (testing helper).
pub fn to_jsonl(events: &[Event]) -> String {
    let mut out = String::new();
    for ev in events {
        let _ = write!(out, "{}", ev.to_json_line());
    }
    out
}

/// Parses a trace.jsonl body.
pub fn from_jsonl(body: &str) -> Result<Vec<Event>, String> {
    let mut events = Vec::new();
    for (idx, line) in body.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let rec: TraceRecord = serde_json::from_str(line)
            .map_err(|e| format!("line {}: {e}", idx + 1))?;
        events.push(Event::from_record(&rec).map_err(|e| format!("line {}: {e}", idx + 1))?);
    }
    Ok(events)
}
