//! Block designs: constructions, the JSON interchange format, and a spectrum
//! verifier that works on any design.
//!
//! Points are `0..v`. Every block is stored strictly ascending. The verifier
//! measures everything by exhaustive enumeration (point degrees, every
//! unordered point pair, every unordered block pair) and never trusts
//! construction parameters.

use std::collections::BTreeMap;
use std::fmt;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::field::{is_prime_power, Field, FieldTables};

/// Default cap on q for constructions; `MESHKEY_MAX_Q` overrides it.
pub const DEFAULT_MAX_Q: u32 = 64;

/// Block-pair enumeration is skipped above this many blocks unless forced.
pub const BLOCK_PAIR_LIMIT: usize = 20_000;

pub fn max_supported_q() -> u32 {
    std::env::var("MESHKEY_MAX_Q")
        .ok()
        .and_then(|s| s.trim().parse().ok())
        .unwrap_or(DEFAULT_MAX_Q)
}

/// Field for a construction over GF(q), after checking q against the cap.
pub fn supported_field(q: u32) -> Result<Field> {
    let cap = max_supported_q();
    if q < 2 || q > cap || !is_prime_power(q) {
        return Err(Error::UnsupportedQ(q, cap));
    }
    Field::with_order(q)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DesignKind {
    Sbibd,
    Td,
    Rd,
    RdStar,
    Mesh,
    Custom,
}

impl DesignKind {
    pub fn as_str(self) -> &'static str {
        match self {
            DesignKind::Sbibd => "sbibd",
            DesignKind::Td => "td",
            DesignKind::Rd => "rd",
            DesignKind::RdStar => "rd_star",
            DesignKind::Mesh => "mesh",
            DesignKind::Custom => "custom",
        }
    }
}

impl fmt::Display for DesignKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// A point set `0..v` and an ordered list of blocks.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct BlockDesign {
    pub kind: DesignKind,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub q: Option<u32>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub k: Option<u32>,
    pub v: u32,
    pub blocks: Vec<Vec<u32>>,
}

impl BlockDesign {
    /// Sorts each block and checks the point range. Duplicate points are an error.
    pub fn new(kind: DesignKind, v: u32, blocks: Vec<Vec<u32>>) -> Result<BlockDesign> {
        let blocks = blocks
            .into_iter()
            .map(|mut b| {
                b.sort_unstable();
                b
            })
            .collect();
        let d = BlockDesign {
            kind,
            q: None,
            k: None,
            v,
            blocks,
        };
        d.validate()?;
        Ok(d)
    }

    pub fn validate(&self) -> Result<()> {
        for (i, block) in self.blocks.iter().enumerate() {
            if let Some(&p) = block.iter().find(|&&p| p >= self.v) {
                return Err(Error::InvalidDesign(format!(
                    "block {i} has point {p} outside [0, {})",
                    self.v
                )));
            }
            if block.windows(2).any(|w| w[0] >= w[1]) {
                return Err(Error::InvalidDesign(format!(
                    "block {i} is not strictly ascending"
                )));
            }
        }
        Ok(())
    }

    pub fn b(&self) -> usize {
        self.blocks.len()
    }

    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string(self).expect("design serializes");
        s.push('\n');
        s
    }

    pub fn from_json(s: &str) -> Result<BlockDesign> {
        let d: BlockDesign =
            serde_json::from_str(s).map_err(|e| Error::InvalidDesign(e.to_string()))?;
        d.validate()?;
        Ok(d)
    }
}

/// Normalized projective points of PG(2,q) as index triples: first nonzero
/// coordinate equal to 1. Order: (1,a,b), then (0,1,b), then (0,0,1).
fn projective_points(q: u32) -> Vec<[u32; 3]> {
    let mut pts = Vec::with_capacity((q * q + q + 1) as usize);
    for a in 0..q {
        for b in 0..q {
            pts.push([1, a, b]);
        }
    }
    for b in 0..q {
        pts.push([0, 1, b]);
    }
    pts.push([0, 0, 1]);
    pts
}

fn dot(t: &FieldTables, x: &[u32; 3], y: &[u32; 3]) -> u32 {
    let s = t.add(t.mul(x[0], y[0]), t.mul(x[1], y[1]));
    t.add(s, t.mul(x[2], y[2]))
}

/// Point–line incidence of PG(2,q): a symmetric (q²+q+1, q+1, 1) design.
pub fn build_sbibd(q: u32) -> Result<BlockDesign> {
    let field = supported_field(q)?;
    let tables = field.tables();
    let pts = projective_points(q);
    let blocks = pts
        .iter()
        .map(|line| {
            pts.iter()
                .enumerate()
                .filter(|(_, p)| dot(&tables, line, p) == 0)
                .map(|(i, _)| i as u32)
                .collect()
        })
        .collect();
    Ok(BlockDesign {
        kind: DesignKind::Sbibd,
        q: Some(q),
        k: None,
        v: pts.len() as u32,
        blocks,
    })
}

/// Transversal design TD(k, q), 2 ≤ k ≤ q + 1.
///
/// Point (i, y) has id `i·q + index(y)`. There is one block per affine map
/// `x ↦ a·x + c`: group i < q gets the value at the i-th field element, and
/// group q (present only when k = q + 1) gets the slope `a`.
pub fn build_td(k: u32, q: u32) -> Result<BlockDesign> {
    let field = supported_field(q)?;
    if k < 2 || k > q + 1 {
        return Err(Error::KTooLarge { k, q });
    }
    let t = field.tables();
    let mut blocks = Vec::with_capacity((q * q) as usize);
    for a in 0..q {
        for c in 0..q {
            blocks.push(
                (0..k)
                    .map(|i| if i < q { i * q + t.add(t.mul(a, i), c) } else { i * q + a })
                    .collect(),
            );
        }
    }
    Ok(BlockDesign {
        kind: DesignKind::Td,
        q: Some(q),
        k: Some(k),
        v: k * q,
        blocks,
    })
}

/// Residual blocks `Bᵢ \ Bⱼ` (i ≠ j, lexicographic) of the PG(2,q) design. With
/// `dedup` set, repeated blocks are dropped keeping the first occurrence (RD*).
pub fn build_residual(q: u32, dedup: bool) -> Result<BlockDesign> {
    let base = build_sbibd(q)?;
    let mut blocks = Vec::with_capacity(base.b() * (base.b() - 1));
    let mut seen = std::collections::HashSet::new();
    for (i, bi) in base.blocks.iter().enumerate() {
        for (j, bj) in base.blocks.iter().enumerate() {
            if i == j {
                continue;
            }
            let diff: Vec<u32> = bi.iter().copied().filter(|p| bj.binary_search(p).is_err()).collect();
            if dedup && !seen.insert(diff.clone()) {
                continue;
            }
            blocks.push(diff);
        }
    }
    Ok(BlockDesign {
        kind: if dedup { DesignKind::RdStar } else { DesignKind::Rd },
        q: Some(q),
        k: None,
        v: base.v,
        blocks,
    })
}

/// Measured parameters of a block design.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct DesignProfile {
    pub v: u32,
    pub b: usize,
    /// point degree → number of points
    pub r_spectrum: BTreeMap<usize, u64>,
    /// block size → number of blocks
    pub k_spectrum: BTreeMap<usize, u64>,
    /// pair coincidence λ → number of unordered point pairs
    pub lambda_spectrum: BTreeMap<u64, u64>,
    /// |Bᵢ ∩ Bⱼ| → number of unordered block pairs; `None` when skipped
    pub intersection_spectrum: Option<BTreeMap<usize, u64>>,
    /// number of distinct λ values
    pub mu: usize,
}

impl DesignProfile {
    pub fn regular_degree(&self) -> Option<usize> {
        single_key(&self.r_spectrum)
    }

    pub fn uniform_size(&self) -> Option<usize> {
        single_key(&self.k_spectrum)
    }

    pub fn lambdas(&self) -> Vec<u64> {
        self.lambda_spectrum.keys().copied().collect()
    }
}

fn single_key<K: Copy, V>(m: &BTreeMap<K, V>) -> Option<K> {
    if m.len() == 1 {
        m.keys().next().copied()
    } else {
        None
    }
}

impl fmt::Display for DesignProfile {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "v = {}, b = {}", self.v, self.b)?;
        writeln!(f, "r spectrum: {}", spectrum_str(&self.r_spectrum))?;
        writeln!(f, "k spectrum: {}", spectrum_str(&self.k_spectrum))?;
        writeln!(f, "λ spectrum: {} (μ = {})", spectrum_str(&self.lambda_spectrum), self.mu)?;
        match &self.intersection_spectrum {
            Some(s) => write!(f, "block intersections: {}", spectrum_str(s)),
            None => write!(f, "block intersections: skipped"),
        }
    }
}

fn spectrum_str<K: fmt::Display, V: fmt::Display>(m: &BTreeMap<K, V>) -> String {
    let parts: Vec<String> = m.iter().map(|(k, v)| format!("{k}↦{v}")).collect();
    format!("{{{}}}", parts.join(", "))
}

pub fn profile(design: &BlockDesign) -> DesignProfile {
    profile_with(design, design.b() <= BLOCK_PAIR_LIMIT)
}

/// Exhaustive profile. `block_pairs` controls the O(b²) intersection spectrum.
pub fn profile_with(design: &BlockDesign, block_pairs: bool) -> DesignProfile {
    let v = design.v as usize;
    let mut degree = vec![0usize; v];
    let mut k_spectrum = BTreeMap::new();
    // upper-triangular pair counts, row-major over i < j
    let row_start = |i: usize| i * v - i * (i + 1) / 2;
    let mut pair = vec![0u32; v * v.saturating_sub(1) / 2];
    for block in &design.blocks {
        *k_spectrum.entry(block.len()).or_insert(0) += 1;
        for (a, &i) in block.iter().enumerate() {
            let i = i as usize;
            degree[i] += 1;
            for &j in &block[a + 1..] {
                pair[row_start(i) + (j as usize - i - 1)] += 1;
            }
        }
    }
    let mut r_spectrum = BTreeMap::new();
    for d in degree {
        *r_spectrum.entry(d).or_insert(0) += 1;
    }
    let mut lambda_spectrum = BTreeMap::new();
    for &c in &pair {
        *lambda_spectrum.entry(c as u64).or_insert(0) += 1;
    }
    let intersection_spectrum = block_pairs.then(|| intersection_spectrum(design));
    DesignProfile {
        v: design.v,
        b: design.b(),
        r_spectrum,
        k_spectrum,
        mu: lambda_spectrum.len(),
        lambda_spectrum,
        intersection_spectrum,
    }
}

fn intersection_spectrum(design: &BlockDesign) -> BTreeMap<usize, u64> {
    let words = (design.v as usize).div_ceil(64);
    let bits: Vec<Vec<u64>> = design
        .blocks
        .iter()
        .map(|b| {
            let mut w = vec![0u64; words];
            for &p in b {
                w[p as usize / 64] |= 1 << (p % 64);
            }
            w
        })
        .collect();
    (0..bits.len())
        .into_par_iter()
        .map(|i| {
            let mut local = BTreeMap::new();
            for j in i + 1..bits.len() {
                let n: u32 = bits[i].iter().zip(&bits[j]).map(|(a, b)| (a & b).count_ones()).sum();
                *local.entry(n as usize).or_insert(0u64) += 1;
            }
            local
        })
        .reduce(BTreeMap::new, |mut a, b| {
            for (k, c) in b {
                *a.entry(k).or_insert(0) += c;
            }
            a
        })
}

/// Structural tags of a profile.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct Classification {
    pub regular: bool,
    pub uniform: bool,
    pub bibd: bool,
    pub sbibd: bool,
    /// `Some(μ)` for a regular, uniform design with μ ≥ 2 coincidence values.
    pub pbibd: Option<usize>,
}

impl Classification {
    pub fn tags(&self) -> Vec<String> {
        let mut t = Vec::new();
        if self.regular {
            t.push("regular".to_string());
        }
        if self.uniform {
            t.push("uniform".to_string());
        }
        if self.bibd {
            t.push("bibd".to_string());
        }
        if self.sbibd {
            t.push("sbibd".to_string());
        }
        if let Some(mu) = self.pbibd {
            t.push(format!("pbibd({mu})"));
        }
        t
    }
}

impl fmt::Display for Classification {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.tags().join(" "))
    }
}

pub fn classify(p: &DesignProfile) -> Classification {
    let r = p.regular_degree();
    let k = p.uniform_size();
    let regular = r.is_some();
    let uniform = k.is_some();
    let bibd = regular && uniform && p.mu == 1;
    if bibd {
        let (r, k) = (r.unwrap() as u64, k.unwrap() as u64);
        let lambda = *p.lambda_spectrum.keys().next().unwrap();
        let v = p.v as u64;
        assert_eq!(p.b as u64 * k, v * r, "bk = vr violated");
        assert_eq!(lambda * (v - 1), r * (k - 1), "λ(v−1) = r(k−1) violated");
    }
    Classification {
        regular,
        uniform,
        bibd,
        sbibd: bibd && p.b == p.v as usize,
        pbibd: (regular && uniform && p.mu >= 2).then_some(p.mu),
    }
}
