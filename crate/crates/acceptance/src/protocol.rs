use std::collections::BTreeMap;
use std::panic::catch_unwind;
use std::time::{Duration, Instant};

use agent_core::config::QuotaSpec;
use agent_core::executor::{ExecExit, TelemetryRecord};
use agent_core::protocol::{decode_frame, encode_frame, CodecError, ErrorClass, ErrorInfo, Frame, Op};
use rand::rngs::StdRng;
use rand::{Rng, SeedableRng};
use serde_json::json;

use crate::probe::Probe;
use crate::{ensure, Outcome};

const CASES: usize = 10_000;
const SEED: u64 = 0x5eed_f4a3;
const FATAL_DEADLINE: Duration = Duration::from_secs(2);

fn samples() -> Vec<Vec<u8>> {
    let frames = [
        Frame::init(json!({"session_id": "s", "snapshot": []})),
        Frame::request(1, Op::LlmInvoke, json!({"messages": [{"role": "user", "content": "hi"}]})),
        Frame::request(2, Op::ToolCall, json!({"name": "get_order_details", "args": {"order_id": "#W1"}})),
        Frame::request(3, Op::KbQuery, json!({"kb_id": "policies", "query": "refund", "top_k": 3})),
        Frame::result_ok(4, json!({"value": [1, 2, 3]})),
        Frame::result_err(5, ErrorInfo::transient("timeout")),
        Frame::event(json!({"level": "info", "message": "x"})),
        Frame::finish(6, json!({"status": "ok", "output": {"answer": "done"}})),
    ];
    frames.iter().map(|f| encode_frame(f).expect("sample frame encodes")).collect()
}

fn case(rng: &mut StdRng, samples: &[Vec<u8>]) -> Vec<u8> {
    let mut bytes = samples[rng.random_range(0..samples.len())].clone();
    match rng.random_range(0..6) {
        0 => {
            let len = rng.random_range(0..64);
            (0..len).map(|_| rng.random()).collect()
        }
        1 => {
            for _ in 0..rng.random_range(1..5) {
                let i = rng.random_range(0..bytes.len());
                bytes[i] ^= 1 << rng.random_range(0..8);
            }
            bytes
        }
        2 => {
            bytes.truncate(rng.random_range(0..bytes.len()));
            bytes
        }
        3 => {
            let len: u32 = if rng.random_bool(0.3) { rng.random() } else { rng.random_range(0..bytes.len() as u32 + 8) };
            bytes[..4].copy_from_slice(&len.to_be_bytes());
            bytes
        }
        4 => {
            let body: Vec<u8> = (0..rng.random_range(0..48)).map(|_| b"{}[]\":,0123 abcdefnulltrue"[rng.random_range(0..26)]).collect();
            let mut out = (body.len() as u32).to_be_bytes().to_vec();
            out.extend(body);
            out
        }
        _ => {
            bytes.extend((0..rng.random_range(1..16)).map(|_| rng.random::<u8>()));
            bytes
        }
    }
}

fn outcome_kind(bytes: &[u8]) -> Result<&'static str, String> {
    match decode_frame(bytes) {
        Ok((frame, used)) => {
            if used > bytes.len() || frame.validate().is_err() {
                return Err(format!("decoded an invalid frame from {bytes:?}"));
            }
            let declared = u32::from_be_bytes(bytes[..4].try_into().expect("header")) as usize;
            if used != 4 + declared {
                return Err(format!("consumed {used} bytes for a {declared}-byte body"));
            }
            Ok("frame")
        }
        Err(CodecError::Io(e)) => Err(format!("i/o error while decoding a slice: {e}")),
        Err(CodecError::Closed) => Err("end of stream reported on a slice".into()),
        Err(CodecError::Oversize { .. }) => Ok("oversize"),
        Err(CodecError::Truncated { .. }) => Ok("truncated"),
        Err(CodecError::Malformed(_)) => Ok("malformed"),
        Err(CodecError::Invalid(_)) => Ok("invalid"),
    }
}

pub fn check() -> Outcome {
    let samples = samples();
    let mut rng = StdRng::seed_from_u64(SEED);
    let mut tally: BTreeMap<&str, usize> = BTreeMap::new();
    for i in 0..CASES {
        let bytes = case(&mut rng, &samples);
        let kind = catch_unwind(|| outcome_kind(&bytes)).map_err(|_| format!("decode panicked on case {i}: {bytes:?}"))??;
        *tally.entry(kind).or_insert(0) += 1;
    }

    let probe = Probe::new()?;
    let agent = probe.agent(json!({"workflow": "malformed"}), QuotaSpec { wall_clock_seconds: 20.0, ..QuotaSpec::default() }, 0);
    let start = Instant::now();
    let outcome = probe.run(&agent, Vec::new());
    let elapsed = start.elapsed();
    ensure!(elapsed < FATAL_DEADLINE, "malformed frame took {elapsed:?} to terminate");
    match &outcome.record.exit {
        ExecExit::Error { error } if error.class == ErrorClass::Fatal => {}
        other => return Err(format!("malformed frame ended with {other:?}")),
    }
    let line = probe
        .executor()
        .telemetry()
        .lookup(&outcome.record.exec_id)
        .map_err(|e| e.to_string())?
        .ok_or("no telemetry record for the malformed run")?;
    let stored: TelemetryRecord = serde_json::from_str(&line).map_err(|e| format!("stored record does not parse: {e}"))?;
    ensure!(stored == outcome.record, "stored record differs from the returned one");
    ensure!(stored.ended_at >= stored.started_at, "record ends before it starts");
    ensure!(stored.exit_status.is_some(), "record has no process exit status");

    let summary: Vec<String> = tally.iter().map(|(k, n)| format!("{k} {n}")).collect();
    Ok(format!(
        "{CASES} fuzz cases ({}); malformed blueprint failed fatally in {:.2}s with a complete record",
        summary.join(", "),
        elapsed.as_secs_f64()
    ))
}
