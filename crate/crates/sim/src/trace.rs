//! Text traces: one JSON header line, one column line, then one tab-separated line per block.
//!
//! Absent fields are written as `-`. The `vector` column holds the demand of a demand call and
//! the granted share of a claim. `detail` is the reciprocal share of a demand or the task count
//! of a claim. `balance` is the caller's balance after the call.

use std::fmt::Write as _;
use std::io::{self, Write};
use std::path::Path;
use std::str::FromStr;

use adrf_core::{MachineConfig, ResourceVector, UserId};
use serde::{Deserialize, Serialize};

use crate::cost::{CallKind, CostModel, CostRecord};
use crate::error::SimError;
use crate::schedule::Call;
use crate::sim::SimConfig;
use crate::workload::GENERATOR_ID;

pub const TRACE_MAGIC: &str = "#adrf-trace";
pub const COLUMNS: [&str; 13] = [
    "block",
    "epoch",
    "call",
    "user",
    "vector",
    "cost",
    "clamped",
    "detail",
    "update_cost",
    "k_prime",
    "pool0",
    "pool1",
    "balance",
];

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct TraceHeader {
    pub generator: String,
    pub config: SimConfig,
    pub cost_model: CostModel,
    /// Set when the calls did not come from `build_schedule(config)`.
    #[serde(default)]
    pub custom_schedule: bool,
}

impl TraceHeader {
    pub fn new(config: SimConfig, cost_model: CostModel, custom_schedule: bool) -> Self {
        TraceHeader {
            generator: GENERATOR_ID.to_string(),
            config,
            cost_model,
            custom_schedule,
        }
    }

    pub fn machine_config(&self) -> MachineConfig {
        self.config.machine_config()
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct TraceRecord {
    pub block: u64,
    /// Machine epoch after the call.
    pub epoch: u64,
    pub call: Call,
    pub share: Option<ResourceVector>,
    pub detail: Option<u128>,
    pub clamped: bool,
    pub cost_units: Option<u64>,
    /// Cost of the epoch transition this call triggered, if any.
    pub update_cost: Option<u64>,
    pub k_prime: u128,
    pub pools: [ResourceVector; 2],
    pub balance: Option<ResourceVector>,
}

impl TraceRecord {
    pub fn call_kind(&self) -> Option<CallKind> {
        match self.call {
            Call::Demand { .. } => Some(CallKind::Demand),
            Call::Claim { .. } => Some(CallKind::Claim),
            Call::Register { .. } | Call::Noop => None,
        }
    }

    fn vector(&self) -> Option<&ResourceVector> {
        match &self.call {
            Call::Demand { demand, .. } => Some(demand),
            _ => self.share.as_ref(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Trace {
    pub header: TraceHeader,
    pub records: Vec<TraceRecord>,
}

impl Trace {
    /// One record per priced call plus one per epoch transition, in block order.
    pub fn cost_records(&self) -> Vec<CostRecord> {
        let m = self.header.config.resources;
        let mut out = Vec::new();
        for r in &self.records {
            let user = r.call.user().map_or(0, |u| u.0);
            if let Some(cost_units) = r.update_cost {
                out.push(CostRecord {
                    call_kind: CallKind::UpdateState,
                    m,
                    epoch: r.epoch,
                    user,
                    cost_units,
                });
            }
            if let (Some(call_kind), Some(cost_units)) = (r.call_kind(), r.cost_units) {
                out.push(CostRecord {
                    call_kind,
                    m,
                    epoch: r.epoch,
                    user,
                    cost_units,
                });
            }
        }
        out
    }

    pub fn write_to<W: Write>(&self, mut w: W) -> io::Result<()> {
        let header = serde_json::to_string(&self.header).map_err(io::Error::other)?;
        writeln!(w, "{TRACE_MAGIC}\t{header}")?;
        writeln!(w, "{}", COLUMNS.join("\t"))?;
        for r in &self.records {
            writeln!(w, "{}", format_record(r))?;
        }
        Ok(())
    }

    pub fn to_text(&self) -> String {
        let mut buf = Vec::new();
        self.write_to(&mut buf).expect("writing to memory");
        String::from_utf8(buf).expect("trace text is UTF-8")
    }

    pub fn write_file(&self, path: &Path) -> Result<(), SimError> {
        let file = std::fs::File::create(path)?;
        let mut w = io::BufWriter::new(file);
        self.write_to(&mut w)?;
        w.flush()?;
        Ok(())
    }

    pub fn read_file(path: &Path) -> Result<Trace, SimError> {
        std::fs::read_to_string(path)?.parse()
    }
}

impl FromStr for Trace {
    type Err = SimError;

    fn from_str(text: &str) -> Result<Self, Self::Err> {
        let bad = |line: usize, reason: String| SimError::TraceFormat { line, reason };
        let mut lines = text.lines().enumerate().map(|(i, l)| (i + 1, l));

        let (_, first) = lines.next().ok_or_else(|| bad(1, "empty trace".into()))?;
        let json = first
            .strip_prefix(TRACE_MAGIC)
            .and_then(|rest| rest.strip_prefix('\t'))
            .ok_or_else(|| bad(1, format!("expected `{TRACE_MAGIC}` header")))?;
        let header: TraceHeader = serde_json::from_str(json).map_err(|e| bad(1, e.to_string()))?;

        match lines.next() {
            Some((_, cols)) if cols == COLUMNS.join("\t") => {}
            _ => return Err(bad(2, "missing column line".into())),
        }

        let mut records = Vec::new();
        for (no, line) in lines {
            if line.is_empty() {
                continue;
            }
            records.push(parse_record(line).map_err(|reason| bad(no, reason))?);
        }
        Ok(Trace { header, records })
    }
}

fn dash<T: ToString>(v: Option<T>) -> String {
    v.map_or_else(|| "-".to_string(), |v| v.to_string())
}

fn format_record(r: &TraceRecord) -> String {
    let mut s = String::new();
    let _ = write!(
        s,
        "{}\t{}\t{}\t{}\t{}\t{}\t{}\t{}\t{}\t{}\t{}\t{}\t{}",
        r.block,
        r.epoch,
        r.call.name(),
        dash(r.call.user()),
        dash(r.vector()),
        dash(r.cost_units),
        u8::from(r.clamped),
        dash(r.detail),
        dash(r.update_cost),
        r.k_prime,
        r.pools[0],
        r.pools[1],
        dash(r.balance.as_ref()),
    );
    s
}

fn field<T: FromStr>(raw: &str, name: &str) -> Result<T, String>
where
    T::Err: std::fmt::Display,
{
    raw.parse().map_err(|e| format!("{name}: {e}"))
}

fn optional<T: FromStr>(raw: &str, name: &str) -> Result<Option<T>, String>
where
    T::Err: std::fmt::Display,
{
    if raw == "-" {
        Ok(None)
    } else {
        field(raw, name).map(Some)
    }
}

fn parse_record(line: &str) -> Result<TraceRecord, String> {
    let f: Vec<&str> = line.split('\t').collect();
    if f.len() != COLUMNS.len() {
        return Err(format!(
            "expected {} fields, found {}",
            COLUMNS.len(),
            f.len()
        ));
    }
    let user: Option<u32> = optional(f[3], "user")?;
    let vector: Option<ResourceVector> = optional(f[4], "vector")?;
    let need_user = || {
        user.map(UserId)
            .ok_or_else(|| format!("{} without a user", f[2]))
    };
    let (call, share) = match f[2] {
        "register" => (Call::Register { user: need_user()? }, None),
        "demand" => {
            let demand = vector.ok_or("demand without a vector")?;
            (
                Call::Demand {
                    user: need_user()?,
                    demand,
                },
                None,
            )
        }
        "claim" => (Call::Claim { user: need_user()? }, vector),
        "noop" => (Call::Noop, None),
        other => return Err(format!("unknown call `{other}`")),
    };
    let clamped = match f[6] {
        "0" => false,
        "1" => true,
        other => return Err(format!("clamped: `{other}` is not 0 or 1")),
    };
    Ok(TraceRecord {
        block: field(f[0], "block")?,
        epoch: field(f[1], "epoch")?,
        call,
        share,
        detail: optional(f[7], "detail")?,
        clamped,
        cost_units: optional(f[5], "cost")?,
        update_cost: optional(f[8], "update_cost")?,
        k_prime: field(f[9], "k_prime")?,
        pools: [field(f[10], "pool0")?, field(f[11], "pool1")?],
        balance: optional(f[12], "balance")?,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sim::run_simulation;

    fn small() -> Trace {
        run_simulation(&SimConfig {
            users: 3,
            resources: 3,
            epochs: 3,
            ..SimConfig::default()
        })
        .unwrap()
    }

    #[test]
    fn text_round_trip() {
        let trace = small();
        let text = trace.to_text();
        assert!(text.starts_with("#adrf-trace\t{"));
        assert_eq!(text.parse::<Trace>().unwrap(), trace);
    }

    #[test]
    fn file_round_trip() {
        let trace = small();
        let dir = std::env::temp_dir().join(format!("adrf-trace-{}", std::process::id()));
        std::fs::create_dir_all(&dir).unwrap();
        let path = dir.join("t.tsv");
        trace.write_file(&path).unwrap();
        assert_eq!(Trace::read_file(&path).unwrap(), trace);
        std::fs::remove_dir_all(&dir).unwrap();
    }

    #[test]
    fn malformed_lines_are_located() {
        let text = small().to_text();
        let mut lines: Vec<String> = text.lines().map(String::from).collect();
        lines[4] = lines[4].replacen('\t', "\tx", 1);
        let err = lines.join("\n").parse::<Trace>().unwrap_err();
        assert!(
            matches!(err, SimError::TraceFormat { line: 5, .. }),
            "{err}"
        );
        assert!("".parse::<Trace>().is_err());
        assert!("#other\t{}".parse::<Trace>().is_err());
    }

    #[test]
    fn cost_records_cover_calls_and_transitions() {
        let trace = small();
        let records = trace.cost_records();
        let count = |k| records.iter().filter(|r| r.call_kind == k).count();
        assert_eq!(count(CallKind::Demand), 9);
        assert_eq!(count(CallKind::Claim), 6);
        assert_eq!(count(CallKind::UpdateState), 2);
        assert!(records.iter().all(|r| r.m == 3));
    }
}
