//! Brute-force and Monte Carlo checks of the mesh scheme's closed forms.
//!
//! Trial `i` of a capture experiment draws from its own ChaCha8 stream, seeded
//! with `splitmix64(seed ^ splitmix64(i))`, so an estimate depends only on the
//! seed and the trial count and never on how rayon splits the work.

use std::fmt;
use std::str::FromStr;

use num_rational::BigRational;
use rand::seq::index::sample;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::meshkps::{intersect_sorted, Device, LinkClass, MeshScheme};

/// Largest q whose all-pairs enumeration is attempted.
pub const ENUMERATION_MAX_Q: u32 = 9;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct PairCount {
    /// Unordered pairs sharing `q+2` keys.
    pub direct: u64,
    /// Unordered pairs sharing exactly 2 keys.
    pub indirect: u64,
    /// Pairs sharing any other number of keys; zero for a well-formed mesh.
    pub other: u64,
}

impl PairCount {
    pub fn total(&self) -> u64 {
        self.direct + self.indirect + self.other
    }

    pub fn ratio(&self) -> BigRational {
        BigRational::new(self.direct.into(), self.total().into())
    }
}

/// Counts every unordered device pair by the size of its ring intersection.
pub fn count_pairs(mesh: &MeshScheme) -> Result<PairCount> {
    if mesh.q() > ENUMERATION_MAX_Q {
        return Err(Error::TooLarge(format!(
            "pair enumeration at q = {} (limit {ENUMERATION_MAX_Q})",
            mesh.q()
        )));
    }
    let devices = mesh.devices();
    let direct_size = mesh.q() as usize + 2;
    let (direct, indirect, other) = (0..devices.len())
        .into_par_iter()
        .map(|i| {
            let mut c = (0u64, 0u64, 0u64);
            for j in i + 1..devices.len() {
                match intersect_sorted(&devices[i].ring, &devices[j].ring).len() {
                    n if n == direct_size => c.0 += 1,
                    2 => c.1 += 1,
                    _ => c.2 += 1,
                }
            }
            c
        })
        .reduce(|| (0, 0, 0), |a, b| (a.0 + b.0, a.1 + b.1, a.2 + b.2));
    Ok(PairCount {
        direct,
        indirect,
        other,
    })
}

/// Exact fraction of device pairs that can talk directly.
pub fn enumerate_connectivity(mesh: &MeshScheme) -> Result<BigRational> {
    Ok(count_pairs(mesh)?.ratio())
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Semantics {
    /// The adversary pools the keys of every captured device.
    #[default]
    Union,
    /// A link falls only to a single captured device holding all its keys.
    Single,
}

impl Semantics {
    pub fn as_str(self) -> &'static str {
        match self {
            Semantics::Union => "union",
            Semantics::Single => "single",
        }
    }
}

impl fmt::Display for Semantics {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Semantics {
    type Err = Error;

    fn from_str(s: &str) -> Result<Semantics> {
        match s.trim().to_ascii_lowercase().as_str() {
            "union" => Ok(Semantics::Union),
            "single" => Ok(Semantics::Single),
            _ => Err(Error::InvalidParams(format!("unknown semantics '{s}'"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
#[serde(tag = "semantics", rename_all = "snake_case")]
pub enum Exposure {
    /// Other devices whose ring holds every key of the link.
    Single { devices: Vec<usize> },
    /// A small set of other devices that jointly hold every key, found greedily.
    Union { cover: Vec<usize> },
}

impl Exposure {
    pub fn count(&self) -> usize {
        match self {
            Exposure::Single { devices } => devices.len(),
            Exposure::Union { cover } => cover.len(),
        }
    }
}

fn direct_keys(mesh: &MeshScheme, a: &Device, b: &Device) -> Result<Vec<u32>> {
    match mesh.classify_link(a, b)? {
        LinkClass::Direct { shared } => Ok(shared),
        LinkClass::Indirect { .. } => Err(Error::NotDirect),
    }
}

fn contains_all(ring: &[u32], keys: &[u32]) -> bool {
    keys.iter().all(|k| ring.binary_search(k).is_ok())
}

/// Which other devices expose the Direct link `a`–`b`, by brute force over
/// every device in the mesh.
pub fn link_exposure(mesh: &MeshScheme, a: &Device, b: &Device, semantics: Semantics) -> Result<Exposure> {
    let keys = direct_keys(mesh, a, b)?;
    let others = || (0..mesh.device_count()).filter(|&id| id != a.id && id != b.id);
    match semantics {
        Semantics::Single => Ok(Exposure::Single {
            devices: others().filter(|&id| contains_all(&mesh.device(id).ring, &keys)).collect(),
        }),
        Semantics::Union => {
            let mut missing = keys;
            let mut cover = Vec::new();
            while !missing.is_empty() {
                let (best, hit) = others()
                    .map(|id| (id, intersect_sorted(&mesh.device(id).ring, &missing)))
                    .max_by_key(|(id, hit)| (hit.len(), std::cmp::Reverse(*id)))
                    .expect("mesh has other devices");
                if hit.is_empty() {
                    return Err(Error::InvalidParams("link keys not held by any other device".into()));
                }
                missing.retain(|k| !hit.contains(k));
                cover.push(best);
            }
            Ok(Exposure::Union { cover })
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct CaptureConfig {
    pub x: usize,
    pub trials: u64,
    pub semantics: Semantics,
    pub seed: u64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ExperimentResult {
    pub estimate: f64,
    pub stderr: f64,
    pub compromised: u64,
    pub trials: u64,
    pub config: CaptureConfig,
}

pub const CSV_HEADER: &str = "q,x,trials,semantics,seed,estimate,stderr";

impl ExperimentResult {
    pub fn csv_row(&self, q: u32) -> String {
        format!(
            "{q},{},{},{},{},{},{}",
            self.config.x,
            self.trials,
            self.config.semantics,
            self.config.seed,
            self.estimate,
            self.stderr
        )
    }
}

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Per-trial generator, a fixed function of the master seed and trial index.
pub fn trial_rng(seed: u64, trial: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(splitmix64(seed ^ splitmix64(trial)))
}

fn pairs(s: u64) -> u64 {
    s * s.saturating_sub(1) / 2
}

/// The `idx`-th unordered pair of `0..s` in lexicographic order.
fn nth_pair(s: u64, mut idx: u64) -> (u64, u64) {
    for i in 0..s {
        let run = s - 1 - i;
        if idx < run {
            return (i, i + 1 + idx);
        }
        idx -= run;
    }
    unreachable!("pair index out of range")
}

/// A uniformly chosen Direct link between two uncaptured devices, or `None`
/// when no row or column keeps two survivors.
fn pick_direct_link(mesh: &MeshScheme, alive: &[bool], rng: &mut ChaCha8Rng) -> Option<(usize, usize)> {
    let n = mesh.side() as usize;
    let mut rows = vec![Vec::new(); n];
    let mut cols = vec![Vec::new(); n];
    for (id, &ok) in alive.iter().enumerate() {
        if ok {
            rows[id / n].push(id);
            cols[id % n].push(id);
        }
    }
    let total: u64 = rows.iter().chain(&cols).map(|l| pairs(l.len() as u64)).sum();
    if total == 0 {
        return None;
    }
    let mut idx = rng.gen_range(0..total);
    for line in rows.iter().chain(&cols) {
        let p = pairs(line.len() as u64);
        if idx < p {
            let (i, j) = nth_pair(line.len() as u64, idx);
            return Some((line[i as usize], line[j as usize]));
        }
        idx -= p;
    }
    unreachable!("index within total")
}

fn run_trial(mesh: &MeshScheme, config: &CaptureConfig, trial: u64) -> bool {
    let total = mesh.device_count();
    let mut rng = trial_rng(config.seed, trial);
    // Drawing a link fails only when no row or column keeps two survivors;
    // the capture is then redrawn from the same stream.
    let (captured, a, b) = loop {
        let captured: Vec<usize> = sample(&mut rng, total, config.x).into_vec();
        let mut alive = vec![true; total];
        for &id in &captured {
            alive[id] = false;
        }
        if let Some((a, b)) = pick_direct_link(mesh, &alive, &mut rng) {
            break (captured, a, b);
        }
    };
    let keys = intersect_sorted(&mesh.device(a).ring, &mesh.device(b).ring);
    match config.semantics {
        Semantics::Single => captured.iter().any(|&id| contains_all(&mesh.device(id).ring, &keys)),
        Semantics::Union => {
            let mut held = vec![false; mesh.key_count() as usize];
            for &id in &captured {
                for k in mesh.device(id).ring {
                    held[k as usize] = true;
                }
            }
            keys.iter().all(|&k| held[k as usize])
        }
    }
}

/// Monte Carlo estimate of the probability that a Direct link between
/// surviving devices is compromised after `x` uniform captures.
pub fn run_capture(mesh: &MeshScheme, config: CaptureConfig) -> Result<ExperimentResult> {
    let n = mesh.device_count();
    if config.x + 2 > n {
        return Err(Error::NotEnoughDevices { x: config.x, n });
    }
    if config.trials == 0 {
        return Err(Error::InvalidParams("trials must be at least 1".into()));
    }
    let compromised: u64 = (0..config.trials)
        .into_par_iter()
        .map(|t| run_trial(mesh, &config, t) as u64)
        .sum();
    let estimate = compromised as f64 / config.trials as f64;
    Ok(ExperimentResult {
        estimate,
        stderr: (estimate * (1.0 - estimate) / config.trials as f64).sqrt(),
        compromised,
        trials: config.trials,
        config,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use num_traits::ToPrimitive;

    use crate::analytics::hypergeometric_compromise;

    #[test]
    fn small_connectivity() {
        let m2 = MeshScheme::build(2).unwrap();
        let c = count_pairs(&m2).unwrap();
        assert_eq!((c.direct, c.indirect, c.other), (294, 882, 0));
        assert_eq!(c.ratio(), BigRational::new(1.into(), 4.into()));
        let c3 = count_pairs(&MeshScheme::build(3).unwrap()).unwrap();
        assert_eq!((c3.direct, c3.total()), (2028, 14196));
    }

    #[test]
    fn nth_pair_enumerates_in_order() {
        let all: Vec<_> = (0..pairs(5)).map(|i| nth_pair(5, i)).collect();
        let want: Vec<_> = (0..5u64).flat_map(|i| (i + 1..5).map(move |j| (i, j))).collect();
        assert_eq!(all, want);
    }

    #[test]
    fn exposure_single_is_q_minus_one() {
        for q in [2u32, 3] {
            let mesh = MeshScheme::build(q).unwrap();
            let n = mesh.side();
            let a = mesh.device(mesh.device_id(0, 0));
            for b in [mesh.device(mesh.device_id(0, n - 1)), mesh.device(mesh.device_id(n - 1, 0))] {
                let e = link_exposure(&mesh, &a, &b, Semantics::Single).unwrap();
                assert_eq!(e.count(), q as usize - 1);
                let Exposure::Single { devices } = e else { unreachable!() };
                assert!(!devices.contains(&a.id) && !devices.contains(&b.id));
                let u = link_exposure(&mesh, &a, &b, Semantics::Union).unwrap();
                assert!(u.count() <= 2);
            }
            let far = mesh.device(mesh.device_id(1, 1));
            assert_eq!(link_exposure(&mesh, &a, &far, Semantics::Single), Err(Error::NotDirect));
        }
    }

    #[test]
    fn capture_edges() {
        let mesh = MeshScheme::build(2).unwrap();
        let cfg = |x, semantics| CaptureConfig {
            x,
            trials: 500,
            semantics,
            seed: 7,
        };
        assert_eq!(run_capture(&mesh, cfg(0, Semantics::Union)).unwrap().estimate, 0.0);
        assert_eq!(run_capture(&mesh, cfg(47, Semantics::Union)).unwrap().estimate, 1.0);
        assert!(matches!(
            run_capture(&mesh, cfg(48, Semantics::Union)),
            Err(Error::NotEnoughDevices { x: 48, n: 49 })
        ));
    }

    #[test]
    fn capture_is_deterministic() {
        let mesh = MeshScheme::build(3).unwrap();
        let cfg = CaptureConfig {
            x: 10,
            trials: 2000,
            semantics: Semantics::Union,
            seed: 99,
        };
        let a = run_capture(&mesh, cfg).unwrap();
        let pool = rayon::ThreadPoolBuilder::new().num_threads(1).build().unwrap();
        let b = pool.install(|| run_capture(&mesh, cfg).unwrap());
        assert_eq!(a, b);
    }

    #[test]
    fn single_matches_hypergeometric() {
        let mesh = MeshScheme::build(2).unwrap();
        let x = 10;
        let r = run_capture(
            &mesh,
            CaptureConfig {
                x,
                trials: 20_000,
                semantics: Semantics::Single,
                seed: 3,
            },
        )
        .unwrap();
        let reference = hypergeometric_compromise(49, 1, x as u64).unwrap().to_f64().unwrap();
        assert!((r.estimate - reference).abs() <= 4.0 * r.stderr, "{} vs {reference}", r.estimate);
    }
}
