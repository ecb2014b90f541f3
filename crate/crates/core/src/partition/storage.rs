//! Binary files for layer values, group metadata and group members.
//!
//! All integers are little-endian `u64`, all reals little-endian IEEE-754
//! `f64`, infinities stored as-is.
//!
//! Value file:
//! ```text
//! magic  "PQCOL\0\0\x01"           8 bytes
//! n, k                             u64, u64
//! k names                          u32 byte length, UTF-8 bytes
//! k columns of n values            f64, attribute-major
//! ```
//!
//! Group file, one fixed-size record per group:
//! ```text
//! magic  "PQGRP\0\0\x01"           8 bytes
//! groups, k                        u64, u64
//! record: id, parent               u64, u64 (u64::MAX when no parent)
//!         k x (lo, hi)             f64, f64
//!         k x representative       f64
//!         member_count, offset, length   u64, u64, u64
//! ```
//!
//! Member file:
//! ```text
//! magic  "PQMEM\0\0\x01"           8 bytes
//! count                            u64
//! count tuple indices              u64
//! ```

use std::fs::File;
use std::io::{self, BufReader, BufWriter, Read, Write};
use std::path::Path;

use super::{summarize, Group, Partition};

pub const VALUES_MAGIC: &[u8; 8] = b"PQCOL\0\0\x01";
pub const GROUPS_MAGIC: &[u8; 8] = b"PQGRP\0\0\x01";
pub const MEMBERS_MAGIC: &[u8; 8] = b"PQMEM\0\0\x01";
pub const NO_PARENT: u64 = u64::MAX;

#[derive(Debug, thiserror::Error)]
pub enum StorageError {
    #[error(transparent)]
    Io(#[from] io::Error),
    #[error("{0}: unrecognized file header")]
    BadMagic(String),
    #[error("{0}")]
    Corrupt(String),
}

fn put_u64(w: &mut impl Write, v: u64) -> io::Result<()> {
    w.write_all(&v.to_le_bytes())
}

fn put_f64s(w: &mut impl Write, vs: &[f64]) -> io::Result<()> {
    for v in vs {
        w.write_all(&v.to_le_bytes())?;
    }
    Ok(())
}

fn get_u64(r: &mut impl Read) -> io::Result<u64> {
    let mut b = [0u8; 8];
    r.read_exact(&mut b)?;
    Ok(u64::from_le_bytes(b))
}

fn get_f64s(r: &mut impl Read, n: usize) -> io::Result<Vec<f64>> {
    let mut bytes = vec![0u8; n * 8];
    r.read_exact(&mut bytes)?;
    Ok(bytes
        .chunks_exact(8)
        .map(|c| f64::from_le_bytes(c.try_into().expect("8 bytes")))
        .collect())
}

fn check_magic(r: &mut impl Read, magic: &[u8; 8], path: &Path) -> Result<(), StorageError> {
    let mut b = [0u8; 8];
    r.read_exact(&mut b)?;
    if &b != magic {
        return Err(StorageError::BadMagic(path.display().to_string()));
    }
    Ok(())
}

fn to_usize(v: u64, what: &str) -> Result<usize, StorageError> {
    usize::try_from(v).map_err(|_| StorageError::Corrupt(format!("{what} {v} out of range")))
}

pub fn write_values(path: &Path, names: &[String], columns: &[Vec<f64>]) -> Result<(), StorageError> {
    let mut w = BufWriter::new(File::create(path)?);
    w.write_all(VALUES_MAGIC)?;
    let n = columns.first().map_or(0, Vec::len);
    put_u64(&mut w, n as u64)?;
    put_u64(&mut w, columns.len() as u64)?;
    for name in names {
        w.write_all(&(name.len() as u32).to_le_bytes())?;
        w.write_all(name.as_bytes())?;
    }
    for c in columns {
        put_f64s(&mut w, c)?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_values(path: &Path) -> Result<(Vec<String>, Vec<Vec<f64>>), StorageError> {
    let mut r = BufReader::new(File::open(path)?);
    check_magic(&mut r, VALUES_MAGIC, path)?;
    let n = to_usize(get_u64(&mut r)?, "row count")?;
    let k = to_usize(get_u64(&mut r)?, "column count")?;
    let mut names = Vec::with_capacity(k);
    for _ in 0..k {
        let mut len = [0u8; 4];
        r.read_exact(&mut len)?;
        let mut bytes = vec![0u8; u32::from_le_bytes(len) as usize];
        r.read_exact(&mut bytes)?;
        names.push(String::from_utf8(bytes).map_err(|e| StorageError::Corrupt(e.to_string()))?);
    }
    let columns = (0..k).map(|_| get_f64s(&mut r, n)).collect::<io::Result<_>>()?;
    Ok((names, columns))
}

/// Write group metadata; `parents[g]` is the group of the next layer that
/// holds representative `g`.
pub fn write_groups(path: &Path, partition: &Partition, parents: &[u64]) -> Result<(), StorageError> {
    let mut w = BufWriter::new(File::create(path)?);
    w.write_all(GROUPS_MAGIC)?;
    put_u64(&mut w, partition.n_groups() as u64)?;
    put_u64(&mut w, partition.n_attrs as u64)?;
    for (g, grp) in partition.groups.iter().enumerate() {
        put_u64(&mut w, g as u64)?;
        put_u64(&mut w, parents.get(g).copied().unwrap_or(NO_PARENT))?;
        for j in 0..partition.n_attrs {
            put_f64s(&mut w, &[grp.lo[j], grp.hi[j]])?;
        }
        put_f64s(&mut w, &grp.rep)?;
        put_u64(&mut w, grp.len as u64)?;
        put_u64(&mut w, grp.offset as u64)?;
        put_u64(&mut w, grp.len as u64)?;
    }
    w.flush()?;
    Ok(())
}

pub fn write_members(path: &Path, members: &[usize]) -> Result<(), StorageError> {
    let mut w = BufWriter::new(File::create(path)?);
    w.write_all(MEMBERS_MAGIC)?;
    put_u64(&mut w, members.len() as u64)?;
    for &m in members {
        put_u64(&mut w, m as u64)?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_members(path: &Path) -> Result<Vec<usize>, StorageError> {
    let mut r = BufReader::new(File::open(path)?);
    check_magic(&mut r, MEMBERS_MAGIC, path)?;
    let count = to_usize(get_u64(&mut r)?, "member count")?;
    let mut bytes = vec![0u8; count * 8];
    r.read_exact(&mut bytes)?;
    bytes
        .chunks_exact(8)
        .map(|c| to_usize(u64::from_le_bytes(c.try_into().expect("8 bytes")), "member"))
        .collect()
}

/// Read groups and members back into a partition over `columns`; variances
/// are recomputed from the members. Returns the partition and parent ids.
pub fn read_partition(
    groups_path: &Path,
    members_path: &Path,
    columns: &[&[f64]],
) -> Result<(Partition, Vec<u64>), StorageError> {
    let members = read_members(members_path)?;
    let mut r = BufReader::new(File::open(groups_path)?);
    check_magic(&mut r, GROUPS_MAGIC, groups_path)?;
    let count = to_usize(get_u64(&mut r)?, "group count")?;
    let k = to_usize(get_u64(&mut r)?, "attribute count")?;
    if k != columns.len() {
        return Err(StorageError::Corrupt(format!(
            "group file has {k} attributes, layer has {}",
            columns.len()
        )));
    }
    let n = columns.first().map_or(0, |c| c.len());
    let mut groups = Vec::with_capacity(count);
    let mut parents = Vec::with_capacity(count);
    for g in 0..count {
        let id = get_u64(&mut r)?;
        if id != g as u64 {
            return Err(StorageError::Corrupt(format!("record {g} carries id {id}")));
        }
        parents.push(get_u64(&mut r)?);
        let bounds = get_f64s(&mut r, 2 * k)?;
        let rep = get_f64s(&mut r, k)?;
        let len = to_usize(get_u64(&mut r)?, "member count")?;
        let offset = to_usize(get_u64(&mut r)?, "offset")?;
        let length = to_usize(get_u64(&mut r)?, "length")?;
        if length != len || offset + len > members.len() {
            return Err(StorageError::Corrupt(format!("group {g} member range invalid")));
        }
        let ids = &members[offset..offset + len];
        if let Some(&bad) = ids.iter().find(|&&i| i >= n) {
            return Err(StorageError::Corrupt(format!("group {g} member {bad} out of range")));
        }
        let (_, variance) = summarize(columns, ids);
        groups.push(Group {
            lo: bounds.iter().step_by(2).copied().collect(),
            hi: bounds.iter().skip(1).step_by(2).copied().collect(),
            rep,
            variance,
            offset,
            len,
        });
    }
    Ok((
        Partition {
            n_attrs: k,
            groups,
            members,
        },
        parents,
    ))
}
