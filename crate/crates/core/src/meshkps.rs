//! The two-pool mesh key pre-distribution scheme and its protocol phases.
//!
//! Two copies of the PG(2,q) design are laid over disjoint key pools: pool 1
//! holds key ids `0..n`, pool 2 holds `n..2n`, with `n = q²+q+1`. Device
//! `(i, j)` on the `n × n` grid receives row block `i` of the first design
//! together with column block `j` of the second, so every ring has `2(q+1)`
//! keys. Two devices on a common row or column share `q+2` keys and talk
//! directly; any other pair shares exactly 2 keys and goes through one of the
//! two devices at the corners of their rectangle.

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::designs::{build_sbibd, BlockDesign, DesignKind};
use crate::error::{Error, Result};

pub type KeyValue = [u8; 16];
pub type SessionKey = [u8; 32];

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct MeshScheme {
    q: u32,
    n: u32,
    /// Blocks of the first design, ids `0..n`; assigned to rows.
    rows: BlockDesign,
    /// Blocks of the second design in local ids `0..n`; offset by `n` in rings.
    cols: BlockDesign,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct KeyMaterial {
    pub id: u32,
    pub value: KeyValue,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Device {
    pub id: usize,
    pub row: u32,
    pub col: u32,
    /// Sorted key ids.
    pub ring: Vec<u32>,
    /// Present after [`MeshScheme::assign_rings`]; storage order is irrelevant.
    pub keys: Option<Vec<KeyMaterial>>,
}

impl Device {
    pub fn without_keys(&self) -> Device {
        Device {
            keys: None,
            ..self.clone()
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum LinkClass {
    Direct { shared: Vec<u32> },
    Indirect { shared: Vec<u32> },
}

impl LinkClass {
    pub fn shared(&self) -> &[u32] {
        match self {
            LinkClass::Direct { shared } | LinkClass::Indirect { shared } => shared,
        }
    }

    pub fn is_direct(&self) -> bool {
        matches!(self, LinkClass::Direct { .. })
    }
}

/// Key value for id `t`: first 16 bytes of SHA-256(master ‖ t as u32 big-endian).
pub fn key_value(master: &[u8; 32], id: u32) -> KeyValue {
    let mut h = Sha256::new();
    h.update(master);
    h.update(id.to_be_bytes());
    let digest = h.finalize();
    let mut out = [0u8; 16];
    out.copy_from_slice(&digest[..16]);
    out
}

/// Shared-key discovery: intersection of the two broadcast id lists.
pub fn discover_shared(a: &Device, b: &Device) -> Result<Vec<u32>> {
    if a.id == b.id {
        return Err(Error::SameDevice);
    }
    Ok(intersect_sorted(&a.ring, &b.ring))
}

pub(crate) fn intersect_sorted(a: &[u32], b: &[u32]) -> Vec<u32> {
    let (mut i, mut j) = (0, 0);
    let mut out = Vec::new();
    while i < a.len() && j < b.len() {
        match a[i].cmp(&b[j]) {
            std::cmp::Ordering::Less => i += 1,
            std::cmp::Ordering::Greater => j += 1,
            std::cmp::Ordering::Equal => {
                out.push(a[i]);
                i += 1;
                j += 1;
            }
        }
    }
    out
}

impl MeshScheme {
    pub fn build(q: u32) -> Result<MeshScheme> {
        let rows = build_sbibd(q)?;
        let cols = rows.clone();
        Ok(MeshScheme {
            q,
            n: rows.v,
            rows,
            cols,
        })
    }

    /// Recovers the row and column blocks from a mesh design file.
    pub fn from_design(d: &BlockDesign) -> Result<MeshScheme> {
        let bad = |msg: String| Err(Error::InvalidDesign(msg));
        if d.kind != DesignKind::Mesh {
            return bad(format!("expected a mesh design, found {}", d.kind));
        }
        let Some(q) = d.q else {
            return bad("mesh design has no q".into());
        };
        let n = q * q + q + 1;
        if d.v != 2 * n || d.b() != (n * n) as usize {
            return bad(format!("mesh q={q} needs v={} and b={}", 2 * n, n * n));
        }
        let mut rows = vec![Vec::new(); n as usize];
        let mut cols = vec![Vec::new(); n as usize];
        for (id, ring) in d.blocks.iter().enumerate() {
            let (i, j) = (id / n as usize, id % n as usize);
            let split = ring.partition_point(|&k| k < n);
            let row: Vec<u32> = ring[..split].to_vec();
            let col: Vec<u32> = ring[split..].iter().map(|k| k - n).collect();
            if j == 0 {
                rows[i] = row;
            } else if rows[i] != row {
                return bad(format!("row {i} is not constant across its cells"));
            }
            if i == 0 {
                cols[j] = col;
            } else if cols[j] != col {
                return bad(format!("column {j} is not constant across its cells"));
            }
        }
        Ok(MeshScheme {
            q,
            n,
            rows: BlockDesign::new(DesignKind::Sbibd, n, rows)?,
            cols: BlockDesign::new(DesignKind::Sbibd, n, cols)?,
        })
    }

    pub fn q(&self) -> u32 {
        self.q
    }

    /// Grid side `n = q²+q+1`.
    pub fn side(&self) -> u32 {
        self.n
    }

    pub fn device_count(&self) -> usize {
        (self.n * self.n) as usize
    }

    pub fn key_count(&self) -> u32 {
        2 * self.n
    }

    pub fn ring_size(&self) -> u32 {
        2 * (self.q + 1)
    }

    pub fn row_design(&self) -> &BlockDesign {
        &self.rows
    }

    /// Column design in local ids `0..n`; ring ids are these plus `n`.
    pub fn col_design(&self) -> &BlockDesign {
        &self.cols
    }

    pub fn position(&self, id: usize) -> (u32, u32) {
        ((id / self.n as usize) as u32, (id % self.n as usize) as u32)
    }

    pub fn device_id(&self, row: u32, col: u32) -> usize {
        (row * self.n + col) as usize
    }

    pub fn ring(&self, row: u32, col: u32) -> Vec<u32> {
        let mut r = self.rows.blocks[row as usize].clone();
        r.extend(self.cols.blocks[col as usize].iter().map(|k| k + self.n));
        r
    }

    pub fn device(&self, id: usize) -> Device {
        let (row, col) = self.position(id);
        Device {
            id,
            row,
            col,
            ring: self.ring(row, col),
            keys: None,
        }
    }

    /// All devices, ids only.
    pub fn devices(&self) -> Vec<Device> {
        (0..self.device_count()).map(|id| self.device(id)).collect()
    }

    /// The scheme as a block design over `2n` keys, one block per device.
    pub fn to_design(&self) -> BlockDesign {
        BlockDesign {
            kind: DesignKind::Mesh,
            q: Some(self.q),
            k: None,
            v: self.key_count(),
            blocks: (0..self.device_count())
                .map(|id| {
                    let (r, c) = self.position(id);
                    self.ring(r, c)
                })
                .collect(),
        }
    }

    /// Ring of `2(q+1)` keys must fit a device memory of `bound` keys.
    pub fn check_memory_bound(&self, bound: u32) -> Result<()> {
        if self.ring_size() > bound {
            return Err(Error::MemoryBound {
                ring: self.ring_size(),
                bound,
            });
        }
        Ok(())
    }

    /// Pre-distribution: every device with its ring and derived key material.
    pub fn assign_rings(&self, master: &[u8; 32]) -> Vec<Device> {
        self.devices()
            .into_iter()
            .map(|mut d| {
                d.keys = Some(
                    d.ring
                        .iter()
                        .map(|&id| KeyMaterial {
                            id,
                            value: key_value(master, id),
                        })
                        .collect(),
                );
                d
            })
            .collect()
    }

    pub fn classify_link(&self, a: &Device, b: &Device) -> Result<LinkClass> {
        let shared = discover_shared(a, b)?;
        match shared.len() {
            n if n == (self.q + 2) as usize => Ok(LinkClass::Direct { shared }),
            2 => Ok(LinkClass::Indirect { shared }),
            n => Err(Error::InvalidParams(format!(
                "devices {} and {} share {n} keys; not rings of this mesh",
                a.id, b.id
            ))),
        }
    }

    /// Path-key discovery: the devices at `(row_a, col_b)` and `(row_b, col_a)`.
    pub fn find_intermediaries(&self, a: &Device, b: &Device) -> Result<[usize; 2]> {
        if self.classify_link(a, b)?.is_direct() {
            return Err(Error::NotIndirect);
        }
        Ok([self.device_id(a.row, b.col), self.device_id(b.row, a.col)])
    }

    /// SHA-256 over the shared key values, concatenated in ascending id order.
    pub fn derive_session_key(&self, a: &Device, b: &Device) -> Result<SessionKey> {
        let LinkClass::Direct { shared } = self.classify_link(a, b)? else {
            return Err(Error::NotDirect);
        };
        let keys = a.keys.as_ref().ok_or(Error::MissingKeyMaterial)?;
        let mut h = Sha256::new();
        for id in &shared {
            let km = keys.iter().find(|k| k.id == *id).ok_or(Error::MissingKeyMaterial)?;
            h.update(km.value);
        }
        Ok(h.finalize().into())
    }

    pub fn export(&self, devices: &[Device], with_secrets: bool) -> RingExport {
        RingExport {
            q: self.q,
            n: self.n,
            devices: devices
                .iter()
                .map(|d| ExportedDevice {
                    id: d.id,
                    row: d.row,
                    col: d.col,
                    ring: d.ring.clone(),
                    keys: with_secrets.then(|| {
                        d.ring
                            .iter()
                            .map(|id| {
                                d.keys
                                    .as_ref()
                                    .and_then(|ks| ks.iter().find(|k| k.id == *id))
                                    .map(|k| hex(&k.value))
                                    .unwrap_or_default()
                            })
                            .collect()
                    }),
                })
                .collect(),
        }
    }
}

fn hex(bytes: &[u8]) -> String {
    bytes.iter().map(|b| format!("{b:02x}")).collect()
}

/// Key-ring export file.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RingExport {
    pub q: u32,
    pub n: u32,
    pub devices: Vec<ExportedDevice>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ExportedDevice {
    pub id: usize,
    pub row: u32,
    pub col: u32,
    pub ring: Vec<u32>,
    /// Hex key values aligned with `ring`; only written with secrets enabled.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub keys: Option<Vec<String>>,
}
