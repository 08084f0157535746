//! On-disk table format.
//!
//! Layout: magic, version, level, partition, row count, then fixed-width
//! columns (rep id, importance, cx, cy, member count, bbox) and finally one
//! length-prefixed variable record per row (aggregates, ranklist,
//! representative payload, boundary).

use super::{RankEntry, StoredCluster};
use crate::codec::{Decoder, Encoder};
use crate::layout::{AggState, Boundary, MeasureStats};
use std::io;

pub const TABLE_MAGIC: &[u8; 4] = b"SSVT";
pub const TABLE_VERSION: u32 = 1;

pub fn encode_table(level: u32, partition: u32, rows: &[StoredCluster]) -> Vec<u8> {
    let mut e = Encoder::new();
    e.buf.extend_from_slice(TABLE_MAGIC);
    e.u32(TABLE_VERSION);
    e.u32(level);
    e.u32(partition);
    e.u64(rows.len() as u64);
    rows.iter().for_each(|r| e.u64(r.rep_id));
    rows.iter().for_each(|r| e.f64(r.importance));
    rows.iter().for_each(|r| e.f64(r.cx));
    rows.iter().for_each(|r| e.f64(r.cy));
    rows.iter().for_each(|r| e.u64(r.member_count));
    for r in rows {
        r.bbox.iter().for_each(|&v| e.f64(v));
    }
    let mut rec = Encoder::new();
    for r in rows {
        rec.buf.clear();
        encode_agg(&mut rec, &r.agg);
        rec.u32(r.ranklist.len() as u32);
        for k in &r.ranklist {
            rec.u64(k.id);
            rec.f64(k.importance);
            rec.values(&k.payload);
        }
        rec.values(&r.rep_payload);
        encode_boundary(&mut rec, &r.boundary);
        e.bytes(&rec.buf);
    }
    e.buf
}

fn encode_agg(e: &mut Encoder, a: &AggState) {
    e.u64(a.count);
    e.u32(a.n_measures);
    e.u32(a.n_dims);
    e.u32(a.keys.len() as u32);
    for k in &a.keys {
        e.u32(k.len() as u32);
        k.iter().for_each(|s| e.str(s));
    }
    e.u32(a.stats.len() as u32);
    for s in &a.stats {
        e.u64(s.count);
        e.f64(s.sum);
        e.f64(s.min);
        e.f64(s.max);
        e.f64(s.sqrsum);
    }
}

fn encode_boundary(e: &mut Encoder, b: &Boundary) {
    match b {
        Boundary::None => e.u8(0),
        Boundary::Bbox(r) => {
            e.u8(1);
            r.iter().for_each(|&v| e.f64(v));
        }
        Boundary::Hull(h) => {
            e.u8(2);
            e.u32(h.len() as u32);
            for p in h {
                e.f64(p[0]);
                e.f64(p[1]);
            }
        }
    }
}

fn bad(msg: impl Into<String>) -> io::Error {
    io::Error::new(io::ErrorKind::InvalidData, msg.into())
}

/// Decodes a table; returns `(level, partition, rows)`.
pub fn decode_table(buf: &[u8]) -> io::Result<(u32, u32, Vec<StoredCluster>)> {
    let mut d = Decoder::new(buf);
    if d.raw(4)? != TABLE_MAGIC {
        return Err(bad("not a table file"));
    }
    let version = d.u32()?;
    if version != TABLE_VERSION {
        return Err(bad(format!("unsupported table version {version}")));
    }
    let level = d.u32()?;
    let partition = d.u32()?;
    let n = d.u64()? as usize;
    if n > buf.len() {
        return Err(bad("row count exceeds file size"));
    }
    let col_u64 = |d: &mut Decoder| (0..n).map(|_| d.u64()).collect::<io::Result<Vec<_>>>();
    let col_f64 = |d: &mut Decoder| (0..n).map(|_| d.f64()).collect::<io::Result<Vec<_>>>();
    let ids = col_u64(&mut d)?;
    let imp = col_f64(&mut d)?;
    let cx = col_f64(&mut d)?;
    let cy = col_f64(&mut d)?;
    let counts = col_u64(&mut d)?;
    let bbox: Vec<[f64; 4]> = (0..n)
        .map(|_| Ok([d.f64()?, d.f64()?, d.f64()?, d.f64()?]))
        .collect::<io::Result<_>>()?;
    let mut rows = Vec::with_capacity(n);
    for i in 0..n {
        let mut r = Decoder::new(d.bytes()?);
        let agg = decode_agg(&mut r)?;
        let k = r.u32()? as usize;
        let mut ranklist = Vec::with_capacity(k.min(1024));
        for _ in 0..k {
            ranklist.push(RankEntry { id: r.u64()?, importance: r.f64()?, payload: r.values()? });
        }
        let rep_payload = r.values()?;
        let boundary = decode_boundary(&mut r)?;
        if !r.is_empty() {
            return Err(bad("trailing bytes in row record"));
        }
        rows.push(StoredCluster {
            level,
            partition,
            rep_id: ids[i],
            importance: imp[i],
            cx: cx[i],
            cy: cy[i],
            member_count: counts[i],
            bbox: bbox[i],
            agg,
            ranklist,
            rep_payload,
            boundary,
        });
    }
    if !d.is_empty() {
        return Err(bad("trailing bytes after last row"));
    }
    Ok((level, partition, rows))
}

fn decode_agg(d: &mut Decoder) -> io::Result<AggState> {
    let count = d.u64()?;
    let n_measures = d.u32()?;
    let n_dims = d.u32()?;
    let nk = d.u32()? as usize;
    let mut keys = Vec::with_capacity(nk.min(1024));
    for _ in 0..nk {
        let len = d.u32()? as usize;
        keys.push((0..len).map(|_| d.string()).collect::<io::Result<Vec<_>>>()?);
    }
    let ns = d.u32()? as usize;
    let mut stats = Vec::with_capacity(ns.min(1024));
    for _ in 0..ns {
        stats.push(MeasureStats { count: d.u64()?, sum: d.f64()?, min: d.f64()?, max: d.f64()?, sqrsum: d.f64()? });
    }
    Ok(AggState { count, n_measures, n_dims, keys, stats })
}

fn decode_boundary(d: &mut Decoder) -> io::Result<Boundary> {
    match d.u8()? {
        0 => Ok(Boundary::None),
        1 => Ok(Boundary::Bbox([d.f64()?, d.f64()?, d.f64()?, d.f64()?])),
        2 => {
            let n = d.u32()? as usize;
            let mut h = Vec::with_capacity(n.min(1024));
            for _ in 0..n {
                h.push([d.f64()?, d.f64()?]);
            }
            Ok(Boundary::Hull(h))
        }
        t => Err(bad(format!("unknown boundary tag {t}"))),
    }
}
