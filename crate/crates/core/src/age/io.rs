//! Trace CSV: header `id,gen_ns,recv_ns,size_bytes`, one record per line,
//! `recv_ns` empty for a lost packet.

use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use super::{AgeError, AgeTrace, PacketRecord};

pub const TRACE_HEADER: [&str; 4] = ["id", "gen_ns", "recv_ns", "size_bytes"];

pub fn write_trace_csv<W: Write>(trace: &AgeTrace, out: W) -> Result<(), AgeError> {
    let mut w = csv::WriterBuilder::new()
        .terminator(csv::Terminator::Any(b'\n'))
        .from_writer(out);
    let to_io = |e: csv::Error| AgeError::Io(e.into());
    w.write_record(TRACE_HEADER).map_err(to_io)?;
    for r in trace.records() {
        let recv = r.recv_ns.map(|v| v.to_string()).unwrap_or_default();
        w.write_record([
            r.id.to_string(),
            r.gen_ns.to_string(),
            recv,
            r.size_bytes.to_string(),
        ])
        .map_err(to_io)?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_trace_csv<R: Read>(input: R) -> Result<AgeTrace, AgeError> {
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(true)
        .trim(csv::Trim::All)
        .from_reader(input);
    let header = rdr.headers().map_err(|e| AgeError::Csv {
        line: 1,
        msg: e.to_string(),
    })?;
    if header.iter().collect::<Vec<_>>() != TRACE_HEADER {
        return Err(AgeError::Csv {
            line: 1,
            msg: format!("expected header `{}`", TRACE_HEADER.join(",")),
        });
    }
    let mut records = Vec::new();
    for row in rdr.records() {
        let row = row.map_err(|e| AgeError::Csv {
            line: e.position().map_or(0, |p| p.line()),
            msg: e.to_string(),
        })?;
        let line = row.position().map_or(0, |p| p.line());
        let bad = |msg: String| AgeError::Csv { line, msg };
        if row.len() != 4 {
            return Err(bad(format!("expected 4 fields, got {}", row.len())));
        }
        let num = |idx: usize, name: &str| -> Result<u64, AgeError> {
            row[idx].parse::<u64>().map_err(|_| {
                bad(format!(
                    "{name}: `{}` is not an unsigned integer",
                    &row[idx]
                ))
            })
        };
        let recv_ns = if row[2].is_empty() {
            None
        } else {
            Some(num(2, "recv_ns")?)
        };
        let size = num(3, "size_bytes")?;
        records.push(PacketRecord {
            id: num(0, "id")?,
            gen_ns: num(1, "gen_ns")?,
            recv_ns,
            size_bytes: u32::try_from(size).map_err(|_| bad("size_bytes too large".into()))?,
        });
        if let [.., prev, last] = records.as_slice() {
            if last.id <= prev.id {
                return Err(bad(format!("id {} does not increase", last.id)));
            }
        }
    }
    AgeTrace::from_records(records)
}

pub fn write_trace(trace: &AgeTrace, path: &Path) -> Result<(), AgeError> {
    let f = File::create(path)?;
    let mut w = BufWriter::new(f);
    write_trace_csv(trace, &mut w)?;
    w.flush()?;
    Ok(())
}

pub fn read_trace(path: &Path) -> Result<AgeTrace, AgeError> {
    read_trace_csv(BufReader::new(File::open(path)?))
}
