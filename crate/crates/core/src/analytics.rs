//! Closed-form metrics for the mesh scheme and the schemes it is compared
//! against: ring size and device count, probability that two devices share a
//! key, and the probability that a link is compromised after `x` devices are
//! captured.
//!
//! Every formula is evaluated in exact rationals with `C(n, k) = 0` outside
//! `0 ≤ k ≤ n`, and converted to `f64` only at the end. The comparison
//! formulas are taken as printed, including the ones whose printed form does
//! not behave like a probability; the evaluator reports what the expression
//! says and does not repair it.

use std::fmt;
use std::ops::RangeInclusive;
use std::str::FromStr;

use num_bigint::{BigInt, BigUint};
use num_rational::BigRational;
use num_traits::{One, ToPrimitive, Zero};
use serde::Serialize;

use crate::designs::max_supported_q;
use crate::error::{Error, Result};
use crate::field::{is_prime_power, prime_power};

/// Exact binomial coefficient; zero when `k < 0` or `k > n`.
pub fn binom(n: u64, k: i64) -> BigUint {
    if k < 0 || k as u64 > n {
        return BigUint::zero();
    }
    let k = (k as u64).min(n - k as u64);
    let mut acc = BigUint::one();
    for i in 0..k {
        acc *= n - i;
        acc /= i + 1;
    }
    acc
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Scheme {
    Sbibd,
    Td,
    TradeKp,
    TUkp,
    UkpStar,
    RdStar,
    Mu2d,
    Mu3d,
    Proposed,
}

impl Scheme {
    pub const ALL: [Scheme; 9] = [
        Scheme::Sbibd,
        Scheme::Td,
        Scheme::TradeKp,
        Scheme::TUkp,
        Scheme::UkpStar,
        Scheme::RdStar,
        Scheme::Mu2d,
        Scheme::Mu3d,
        Scheme::Proposed,
    ];

    /// The schemes compared in the figures. Generic t-UKP needs an explicit `t`,
    /// so only its t = √q instance (UKP*) is in the default set.
    pub const FIGURE: [Scheme; 8] = [
        Scheme::Sbibd,
        Scheme::Td,
        Scheme::TradeKp,
        Scheme::UkpStar,
        Scheme::RdStar,
        Scheme::Mu2d,
        Scheme::Mu3d,
        Scheme::Proposed,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            Scheme::Sbibd => "sbibd",
            Scheme::Td => "td",
            Scheme::TradeKp => "trade_kp",
            Scheme::TUkp => "t_ukp",
            Scheme::UkpStar => "ukp_star",
            Scheme::RdStar => "rd_star",
            Scheme::Mu2d => "mu2d",
            Scheme::Mu3d => "mu3d",
            Scheme::Proposed => "proposed",
        }
    }
}

impl fmt::Display for Scheme {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Scheme {
    type Err = Error;

    fn from_str(s: &str) -> Result<Scheme> {
        let norm = s.trim().to_ascii_lowercase().replace('-', "_");
        Scheme::ALL
            .into_iter()
            .find(|sc| sc.as_str() == norm)
            .ok_or_else(|| Error::InvalidParams(format!("unknown scheme '{s}'")))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct SchemeParams {
    pub scheme: Scheme,
    pub q: u32,
    /// Block size, TD only.
    pub k: Option<u32>,
    /// Blocks per device, t-UKP only (UKP* derives it as √q).
    pub t: Option<u32>,
}

fn exact_sqrt(q: u32) -> Option<u32> {
    let r = (q as f64).sqrt().round() as u32;
    (r * r == q).then_some(r)
}

impl SchemeParams {
    /// Parameters for schemes that need only q.
    pub fn new(scheme: Scheme, q: u32) -> Result<SchemeParams> {
        SchemeParams {
            scheme,
            q,
            k: None,
            t: None,
        }
        .validated()
    }

    pub fn td(k: u32, q: u32) -> Result<SchemeParams> {
        SchemeParams {
            scheme: Scheme::Td,
            q,
            k: Some(k),
            t: None,
        }
        .validated()
    }

    pub fn t_ukp(q: u32, t: u32) -> Result<SchemeParams> {
        SchemeParams {
            scheme: Scheme::TUkp,
            q,
            k: None,
            t: Some(t),
        }
        .validated()
    }

    pub fn validated(self) -> Result<SchemeParams> {
        let q = self.q;
        let cap = max_supported_q();
        if q < 2 || q > cap || !is_prime_power(q) {
            return Err(Error::UnsupportedQ(q, cap));
        }
        match self.scheme {
            Scheme::Td => match self.k {
                Some(k) if (2..=q + 1).contains(&k) => {}
                Some(k) => return Err(Error::KTooLarge { k, q }),
                None => return Err(Error::InvalidParams("td needs k".into())),
            },
            Scheme::TUkp => match self.t {
                Some(t) if t >= 1 => {}
                _ => return Err(Error::InvalidParams("t_ukp needs t ≥ 1".into())),
            },
            Scheme::UkpStar => {
                let even_power = prime_power(q).is_some_and(|(_, n)| n % 2 == 0);
                if !even_power {
                    return Err(Error::InvalidParams(format!(
                        "ukp_star needs q to be an even power of a prime (t = √q), got {q}"
                    )));
                }
            }
            _ => {}
        }
        let p = SchemeParams {
            t: match self.scheme {
                Scheme::UkpStar => exact_sqrt(q),
                Scheme::TUkp => self.t,
                _ => None,
            },
            k: if self.scheme == Scheme::Td { self.k } else { None },
            ..self
        };
        if p.scheme == Scheme::TUkp && devices_int(&p) <= BigInt::zero() {
            return Err(Error::InvalidParams(format!("t = {} leaves no devices at q = {q}", p.t.unwrap())));
        }
        Ok(p)
    }

    fn t_value(&self) -> u32 {
        self.t.expect("validated t-UKP params carry t")
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct Scalability {
    pub ring_size: u64,
    pub devices: u64,
}

fn devices_int(p: &SchemeParams) -> BigInt {
    let q = BigInt::from(p.q);
    let n = &q * &q + &q + 1;
    match p.scheme {
        Scheme::Sbibd => n,
        Scheme::Td | Scheme::Mu2d => &q * &q,
        Scheme::TradeKp => 2 * &q * &q,
        Scheme::TUkp | Scheme::UkpStar => {
            let t = BigInt::from(p.t.unwrap_or(1));
            &q * &q * (&q * &q - &q + 1) - (t - 1) * (&q * &q - 1) * (&q + 1)
        }
        Scheme::RdStar => n * (&q + 1),
        Scheme::Mu3d => &q * &q * &q,
        Scheme::Proposed => &n * &n,
    }
}

/// Ring size and supported device count, as tabulated for each scheme.
pub fn scalability(p: &SchemeParams) -> Result<Scalability> {
    let q = p.q as u64;
    let ring_size = match p.scheme {
        Scheme::Sbibd | Scheme::TUkp | Scheme::UkpStar => q + 1,
        Scheme::Td => p.k.ok_or_else(|| Error::InvalidParams("td needs k".into()))? as u64,
        Scheme::TradeKp | Scheme::RdStar => q,
        Scheme::Mu2d => 2 * q - 2,
        Scheme::Mu3d => 3 * q - 3,
        Scheme::Proposed => 2 * (q + 1),
    };
    let devices = devices_int(p)
        .to_u64()
        .filter(|&d| d > 0)
        .ok_or_else(|| Error::InvalidParams(format!("no devices for {p:?}")))?;
    Ok(Scalability { ring_size, devices })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Variant {
    /// Formula as printed.
    Paper,
    /// Value certified by enumeration of the construction.
    Exact,
}

impl Variant {
    pub fn as_str(self) -> &'static str {
        match self {
            Variant::Paper => "paper",
            Variant::Exact => "exact",
        }
    }
}

fn rat(n: impl Into<BigInt>, d: impl Into<BigInt>) -> Result<BigRational> {
    let d = d.into();
    if d.is_zero() {
        return Err(Error::DomainError("zero denominator".into()));
    }
    Ok(BigRational::new(n.into(), d))
}

fn int(n: impl Into<BigInt>) -> BigRational {
    BigRational::from_integer(n.into())
}

fn binom_i(n: u64, k: i64) -> BigInt {
    BigInt::from(binom(n, k))
}

/// Exact probability that two devices can talk directly.
///
/// Only the proposed scheme distinguishes variants: `Paper` is `2/(q²+q+1)` as
/// printed, `Exact` is the enumerated `2/(q²+q+2)`.
pub fn connectivity_ratio(p: &SchemeParams, variant: Variant) -> Result<BigRational> {
    let q = p.q as i64;
    let n = q * q + q + 1;
    let v = match p.scheme {
        Scheme::Sbibd | Scheme::Mu2d => BigRational::one(),
        Scheme::Td => rat(p.k.unwrap_or(0), q + 1)?,
        Scheme::TradeKp => rat(q * (q - 1), 2 * (2 * q * q - 1))?,
        Scheme::TUkp | Scheme::UkpStar => {
            let t2 = (p.t_value() * p.t_value()) as i32;
            let miss = int(1) - rat(q + 1, q * q * q + q + 1)?;
            int(1) - miss.pow(t2)
        }
        Scheme::RdStar => {
            let m = ((q * q + q) * n) as u64;
            let pairs = binom_i(m, 2);
            let same = rat(binom_i((q * q + q) as u64, 2), pairs.clone())? * rat(q * q, q * q + q)?;
            let cross = rat((q * q + q).pow(2), pairs)? * rat(q.pow(4) + q - 1, (q * q + q).pow(2))?;
            same + cross
        }
        Scheme::Mu3d => rat(3 * q, n)?,
        Scheme::Proposed => match variant {
            Variant::Paper => rat(2, n)?,
            Variant::Exact => rat(2, n + 1)?,
        },
    };
    check_unit(v, p, "connectivity")
}

pub fn connectivity(p: &SchemeParams, variant: Variant) -> Result<f64> {
    Ok(to_f64(&connectivity_ratio(p, variant)?))
}

fn check_unit(v: BigRational, p: &SchemeParams, what: &str) -> Result<BigRational> {
    if v < BigRational::zero() || v > BigRational::one() {
        return Err(Error::DomainError(format!(
            "{what} for {} q={} evaluates to {} outside [0, 1]",
            p.scheme,
            p.q,
            to_f64(&v)
        )));
    }
    Ok(v)
}

pub fn to_f64(r: &BigRational) -> f64 {
    r.to_f64().unwrap_or(f64::NAN)
}

/// Probability that a given link between uncaptured devices of the proposed
/// scheme survives `x` captures, counting `q²+q+1` exposing devices.
pub fn proposed_survival(q: u32, x: u64) -> Result<BigRational> {
    let q = q as u64;
    let n = q * q + q + 1;
    let devices = n * n;
    check_capture_domain(x, devices)?;
    rat(binom_i(devices - n, x as i64), binom_i(devices - 2, x as i64))
}

/// Number of other devices whose ring holds every key of a Direct link:
/// the link's row (or column) block fixes the line, and the single key from
/// the other pool lies on q+1 lines, two of which are the endpoints'.
pub fn proposed_exposure(q: u32) -> u64 {
    q as u64 - 1
}

/// Hypergeometric compromise probability of one link with `exposure` other
/// devices able to reconstruct it, when `x` of the `devices − 2` non-endpoints
/// are captured.
pub fn hypergeometric_compromise(devices: u64, exposure: u64, x: u64) -> Result<BigRational> {
    check_capture_domain(x, devices)?;
    if exposure > devices - 2 {
        return Err(Error::InvalidParams(format!("exposure {exposure} exceeds {} devices", devices - 2)));
    }
    Ok(int(1) - rat(binom_i(devices - 2 - exposure, x as i64), binom_i(devices - 2, x as i64))?)
}

/// The proposed scheme's compromise probability using the enumerated exposure
/// count `q−1` instead of the printed `q²+q+1`.
pub fn proposed_resilience_exact(q: u32, x: u64) -> Result<BigRational> {
    let n = q as u64 * q as u64 + q as u64 + 1;
    hypergeometric_compromise(n * n, proposed_exposure(q), x)
}

fn check_capture_domain(x: u64, devices: u64) -> Result<()> {
    if x + 2 > devices {
        return Err(Error::DomainError(format!(
            "x = {x} captures leave no link among {devices} devices"
        )));
    }
    Ok(())
}

/// Inclusion–exclusion count used by the 2-D and 3-D μ-PBIBD formulas,
/// zero outside `q−2 ≤ x ≤ (q−1)(q−2)`.
pub fn ch(q: u64, x: u64) -> BigInt {
    if x + 2 < q || x > (q - 1) * (q - 2) {
        return BigInt::zero();
    }
    (0..=q - 2)
        .map(|theta| {
            let term = binom_i(q - 2, theta as i64) * binom_i((q - 1) * (q - theta), x as i64);
            if theta % 2 == 0 {
                term
            } else {
                -term
            }
        })
        .sum()
}

/// `Ch(x) / C(q(q−1), x)`, taken as zero whenever `Ch(x)` vanishes.
fn ch_ratio(q: u64, x: u64) -> Result<BigRational> {
    let c = ch(q, x);
    if c.is_zero() {
        return Ok(BigRational::zero());
    }
    rat(c, binom_i(q * (q - 1), x as i64))
}

/// `1 − 2(1 − a/d)^x + (1 − b/d)^x`
fn two_event(a: i64, b: i64, d: i64, x: u64) -> Result<BigRational> {
    let x = i32::try_from(x).map_err(|_| Error::DomainError("x too large".into()))?;
    Ok(int(1) - int(2) * (int(1) - rat(a, d)?).pow(x) + (int(1) - rat(b, d)?).pow(x))
}

/// Exact printed compromise probability after `x` captures.
///
/// Domain: `0 ≤ x ≤ N − 2`, with N the scheme's device count, and no
/// zero denominators.
pub fn resilience_ratio(p: &SchemeParams, x: u64) -> Result<BigRational> {
    let devices = scalability(p)?.devices;
    check_capture_domain(x, devices)?;
    let q = p.q as u64;
    let qi = q as i64;
    let n = q * q + q + 1;
    let xi = x as i64;
    let one = int(1);
    match p.scheme {
        Scheme::Proposed => Ok(one - proposed_survival(p.q, x)?),
        Scheme::Sbibd => Ok(one - rat(binom_i(q * q, xi), binom_i(n, xi))?),
        Scheme::Td => {
            let keep = one.clone() - rat(qi - 2, qi * qi - 2)?;
            Ok(one - keep.pow(x as i32))
        }
        Scheme::TradeKp => {
            let m = 2 * q * q - 4 * q + 2;
            let num = binom_i(m, xi) + BigInt::from(4 * (q - 1)) * binom_i(m, xi - 1);
            Ok(one - rat(num, binom_i(2 * q * q, xi))?)
        }
        Scheme::TUkp | Scheme::UkpStar => {
            let t = p.t_value() as u64;
            let t2 = t * t;
            let xt = (x * t) as i64;
            let key_safe = rat(binom_i(q * q * q * (q - 1), xt), binom_i(q * q * (q * q - q + 1), xt))?;
            let share = rat((qi + 1) * (qi + 1), qi * qi * qi + qi + 1)?;
            let miss = one.clone() - share.clone();
            let norm = one.clone() - miss.pow(t2 as i32);
            // Σ_{i≥1} C(t²,i) sⁱ m^(t²−i) (1−K)ⁱ, summed by the binomial theorem
            let lost = one.clone() - key_safe;
            let sum = ((miss.clone() + share * lost).pow(t2 as i32) - miss.pow(t2 as i32)) / norm;
            Ok(one - sum)
        }
        Scheme::RdStar => {
            let blocks = n * (q + 1);
            let per = rat(binom_i(q * (q + 1), 2), binom_i(blocks, 2))?;
            let frac = rat(binom_i((q + 1) * n, xi), binom_i(blocks, xi))?;
            let term = per * (one - frac);
            Ok((0..n).fold(BigRational::zero(), |acc, _| acc + term.clone()))
        }
        Scheme::Mu2d => {
            let d = qi * qi - 2;
            let first = rat(qi - 1, qi + 1)? * two_event(2 * qi - 4, 4 * qi - 8, d, x)?;
            let avoid = rat(
                binom_i(q * q - q, xi) + binom_i(q - 2, 1) * binom_i(q * q - q, xi - 1),
                binom_i(q * q - 2, xi),
            )?;
            let second = rat(2, qi + 1)? * (one - avoid + ch_ratio(q, x)?);
            Ok(first + second)
        }
        Scheme::Mu3d => {
            let d = qi * qi * qi - 2;
            let first = rat(3 * qi - 3, n as i64)? * two_event(3 * qi - 5, 6 * qi - 10, d, x)?;
            let q2q = BigInt::from(q * q - q);
            let avoid = rat(
                q2q.clone() + binom_i(q - 2, xi - 1) * q2q,
                binom_i(q * q * q - 2, xi),
            )?;
            let second = rat(3, n as i64)? * (one - avoid + ch_ratio(q, x)?);
            Ok(first + second)
        }
    }
}

pub fn resilience(p: &SchemeParams, x: u64) -> Result<f64> {
    Ok(to_f64(&resilience_ratio(p, x)?))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Metric {
    Scalability,
    Connectivity,
    Resilience,
}

impl Metric {
    pub fn as_str(self) -> &'static str {
        match self {
            Metric::Scalability => "scalability",
            Metric::Connectivity => "connectivity",
            Metric::Resilience => "resilience",
        }
    }
}

impl FromStr for Metric {
    type Err = Error;

    fn from_str(s: &str) -> Result<Metric> {
        match s.trim().to_ascii_lowercase().as_str() {
            "scalability" => Ok(Metric::Scalability),
            "connectivity" => Ok(Metric::Connectivity),
            "resilience" => Ok(Metric::Resilience),
            _ => Err(Error::InvalidParams(format!("unknown metric '{s}'"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Matching {
    /// Each scheme gets the smallest supported q whose ring size reaches the target.
    EqualRing(Vec<u32>),
    EqualQ(Vec<u32>),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
#[serde(untagged)]
pub enum MetricValue {
    Count(u64),
    Probability(f64),
}

impl fmt::Display for MetricValue {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            MetricValue::Count(c) => write!(f, "{c}"),
            MetricValue::Probability(p) => write!(f, "{p}"),
        }
    }
}

impl MetricValue {
    pub fn as_f64(&self) -> f64 {
        match *self {
            MetricValue::Count(c) => c as f64,
            MetricValue::Probability(p) => p,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MetricPoint {
    pub scheme: Scheme,
    pub q: u32,
    pub ring_size: u64,
    pub metric: Metric,
    pub x: Option<u64>,
    pub value: MetricValue,
    pub variant: Variant,
}

pub const CSV_HEADER: &str = "scheme,q,ring_size,metric,x,value,variant";

impl MetricPoint {
    pub fn csv_row(&self) -> String {
        format!(
            "{},{},{},{},{},{},{}",
            self.scheme,
            self.q,
            self.ring_size,
            self.metric.as_str(),
            self.x.map(|x| x.to_string()).unwrap_or_default(),
            self.value,
            self.variant.as_str()
        )
    }
}

pub fn to_csv(points: &[MetricPoint]) -> String {
    let mut out = String::from(CSV_HEADER);
    out.push('\n');
    for p in points {
        out.push_str(&p.csv_row());
        out.push('\n');
    }
    out
}

#[derive(Debug, Clone, PartialEq)]
pub struct FigureRequest {
    pub metric: Metric,
    pub schemes: Vec<Scheme>,
    pub matching: Matching,
    /// Captured-device counts, resilience only.
    pub xs: RangeInclusive<u64>,
    /// TD block size under equal-q matching; defaults to q.
    pub k: Option<u32>,
    /// t for generic t-UKP.
    pub t: Option<u32>,
    /// Emit only the printed variant.
    pub paper_only: bool,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct FigureData {
    pub points: Vec<MetricPoint>,
    /// Scheme/target combinations with no feasible parameters.
    pub skipped: Vec<String>,
    /// Cases where a scheme matches or beats the proposed one on a metric
    /// where the comparison text claims the proposed scheme is ahead.
    pub ordering_notes: Vec<String>,
}

fn candidate_qs() -> impl Iterator<Item = u32> {
    (2..=max_supported_q()).filter(|&q| is_prime_power(q))
}

/// Smallest supported prime power whose ring size reaches `target`.
///
/// TD takes `k = max(target, 2)` and the smallest q with `k ≤ q + 1`.
pub fn solve_equal_ring(scheme: Scheme, target: u32, t: Option<u32>) -> Result<SchemeParams> {
    let infeasible = || Error::NoFeasibleQ {
        scheme: scheme.to_string(),
        target,
    };
    for q in candidate_qs() {
        let params = match scheme {
            Scheme::Td => {
                let k = target.max(2);
                if k > q + 1 {
                    continue;
                }
                SchemeParams::td(k, q)
            }
            Scheme::TUkp => SchemeParams::t_ukp(q, t.ok_or_else(infeasible)?),
            Scheme::UkpStar if exact_sqrt(q).is_none() || SchemeParams::new(scheme, q).is_err() => continue,
            _ => SchemeParams::new(scheme, q),
        };
        let Ok(params) = params else { continue };
        if scalability(&params)?.ring_size >= target as u64 {
            return Ok(params);
        }
    }
    Err(infeasible())
}

fn params_for_q(scheme: Scheme, q: u32, k: Option<u32>, t: Option<u32>) -> Result<SchemeParams> {
    match scheme {
        Scheme::Td => SchemeParams::td(k.unwrap_or(q), q),
        Scheme::TUkp => SchemeParams::t_ukp(q, t.ok_or_else(|| Error::InvalidParams("t_ukp needs t".into()))?),
        _ => SchemeParams::new(scheme, q),
    }
}

/// Rows behind the scalability, connectivity and resilience comparisons.
pub fn figure_data(req: &FigureRequest) -> Result<FigureData> {
    let mut out = FigureData::default();
    let groups: Vec<(String, Vec<SchemeParams>)> = match &req.matching {
        Matching::EqualRing(targets) => targets
            .iter()
            .map(|&target| {
                let mut ps = Vec::new();
                for &s in &req.schemes {
                    match solve_equal_ring(s, target, req.t) {
                        Ok(p) => ps.push(p),
                        Err(e) => out.skipped.push(format!("{s} ring {target}: {e}")),
                    }
                }
                (format!("ring {target}"), ps)
            })
            .collect(),
        Matching::EqualQ(qs) => qs
            .iter()
            .map(|&q| {
                let mut ps = Vec::new();
                for &s in &req.schemes {
                    match params_for_q(s, q, req.k, req.t) {
                        Ok(p) => ps.push(p),
                        Err(e) => out.skipped.push(format!("{s} q {q}: {e}")),
                    }
                }
                (format!("q {q}"), ps)
            })
            .collect(),
    };
    for (label, params) in &groups {
        let start = out.points.len();
        for p in params {
            emit(req, p, &mut out)?;
        }
        note_ordering(req.metric, label, &out.points[start..], &mut out.ordering_notes);
    }
    if out.points.is_empty() && !out.skipped.is_empty() {
        return Err(Error::NoFeasibleQ {
            scheme: req.schemes.iter().map(|s| s.as_str()).collect::<Vec<_>>().join(","),
            target: match &req.matching {
                Matching::EqualRing(t) => t.first().copied().unwrap_or(0),
                Matching::EqualQ(q) => q.first().copied().unwrap_or(0),
            },
        });
    }
    Ok(out)
}

fn emit(req: &FigureRequest, p: &SchemeParams, out: &mut FigureData) -> Result<()> {
    let sc = scalability(p)?;
    let point = |x, value, variant| MetricPoint {
        scheme: p.scheme,
        q: p.q,
        ring_size: sc.ring_size,
        metric: req.metric,
        x,
        value,
        variant,
    };
    let both = p.scheme == Scheme::Proposed && !req.paper_only;
    match req.metric {
        Metric::Scalability => out.points.push(point(None, MetricValue::Count(sc.devices), Variant::Paper)),
        Metric::Connectivity => {
            let v = connectivity(p, Variant::Paper)?;
            out.points.push(point(None, MetricValue::Probability(v), Variant::Paper));
            if both {
                let e = connectivity(p, Variant::Exact)?;
                out.points.push(point(None, MetricValue::Probability(e), Variant::Exact));
            }
        }
        Metric::Resilience => {
            let last = sc.devices.saturating_sub(2);
            let xs = *req.xs.start()..=(*req.xs.end()).min(last);
            if *req.xs.end() > last {
                out.skipped.push(format!(
                    "{} q {}: x > {last} outside the capture domain",
                    p.scheme, p.q
                ));
            }
            for x in xs {
                let v = resilience(p, x)?;
                out.points.push(point(Some(x), MetricValue::Probability(v), Variant::Paper));
                if both {
                    let e = to_f64(&proposed_resilience_exact(p.q, x)?);
                    out.points.push(point(Some(x), MetricValue::Probability(e), Variant::Exact));
                }
            }
        }
    }
    Ok(())
}

fn note_ordering(metric: Metric, label: &str, pts: &[MetricPoint], notes: &mut Vec<String>) {
    // schemes the comparison text concedes are ahead of the proposal
    let conceded: &[Scheme] = match metric {
        Metric::Scalability => &[],
        Metric::Connectivity => &[Scheme::Sbibd, Scheme::Mu2d],
        Metric::Resilience => return,
    };
    let Some(ours) = pts
        .iter()
        .find(|p| p.scheme == Scheme::Proposed && p.variant == Variant::Paper)
    else {
        return;
    };
    for p in pts {
        if p.scheme == Scheme::Proposed || conceded.contains(&p.scheme) {
            continue;
        }
        if p.value.as_f64() >= ours.value.as_f64() {
            notes.push(format!(
                "{label}: {} (q={}, ring {}) has {} {} ≥ proposed (q={}, ring {}) {}",
                p.scheme,
                p.q,
                p.ring_size,
                metric.as_str(),
                p.value,
                ours.q,
                ours.ring_size,
                ours.value
            ));
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn r(n: i64, d: i64) -> BigRational {
        BigRational::new(n.into(), d.into())
    }

    #[test]
    fn binom_basics() {
        assert_eq!(binom(49, 2), BigUint::from(1176u32));
        assert_eq!(binom(5, 7), BigUint::zero());
        assert_eq!(binom(5, -1), BigUint::zero());
        assert_eq!(binom(0, 0), BigUint::one());
    }

    #[test]
    fn table1_rows() {
        let s = scalability(&SchemeParams::new(Scheme::Proposed, 4).unwrap()).unwrap();
        assert_eq!((s.ring_size, s.devices), (10, 441));
        let s = scalability(&SchemeParams::new(Scheme::Sbibd, 9).unwrap()).unwrap();
        assert_eq!((s.ring_size, s.devices), (10, 91));
        let s = scalability(&SchemeParams::new(Scheme::Mu3d, 9).unwrap()).unwrap();
        assert_eq!((s.ring_size, s.devices), (24, 729));
        let s = scalability(&SchemeParams::new(Scheme::Proposed, 11).unwrap()).unwrap();
        assert_eq!((s.ring_size, s.devices), (24, 17689));
        let s = scalability(&SchemeParams::td(4, 3).unwrap()).unwrap();
        assert_eq!((s.ring_size, s.devices), (4, 9));
        // q²(q²−q+1) − (t−1)(q²−1)(q+1) at q = 9, t = 3
        let s = scalability(&SchemeParams::new(Scheme::UkpStar, 9).unwrap()).unwrap();
        assert_eq!((s.ring_size, s.devices), (10, 81 * 73 - 2 * 80 * 10));
    }

    #[test]
    fn param_validation() {
        assert!(SchemeParams::new(Scheme::UkpStar, 8).is_err());
        assert!(SchemeParams::new(Scheme::UkpStar, 3).is_err());
        assert_eq!(SchemeParams::new(Scheme::UkpStar, 16).unwrap().t, Some(4));
        assert!(SchemeParams::td(5, 3).is_err());
        assert!(SchemeParams::new(Scheme::Td, 3).is_err());
        assert!(SchemeParams::new(Scheme::Proposed, 6).is_err());
        assert!(SchemeParams::t_ukp(3, 0).is_err());
        assert_eq!("rd-star".parse::<Scheme>().unwrap(), Scheme::RdStar);
    }

    #[test]
    fn connectivity_values() {
        let p2 = SchemeParams::new(Scheme::Proposed, 2).unwrap();
        assert_eq!(connectivity_ratio(&p2, Variant::Paper).unwrap(), r(2, 7));
        assert_eq!(connectivity_ratio(&p2, Variant::Exact).unwrap(), r(1, 4));
        for q in [2, 3, 4, 5, 7] {
            let s = SchemeParams::new(Scheme::Sbibd, q).unwrap();
            assert_eq!(connectivity(&s, Variant::Paper).unwrap(), 1.0);
        }
        let td = SchemeParams::td(3, 4).unwrap();
        assert_eq!(connectivity_ratio(&td, Variant::Paper).unwrap(), r(3, 5));
        let tr = SchemeParams::new(Scheme::TradeKp, 3).unwrap();
        assert_eq!(connectivity_ratio(&tr, Variant::Paper).unwrap(), r(6, 34));
        let m3 = SchemeParams::new(Scheme::Mu3d, 3).unwrap();
        assert_eq!(connectivity_ratio(&m3, Variant::Paper).unwrap(), r(9, 13));
        // t = 1: single draw, (q+1)/(q³+q+1)
        let tu = SchemeParams::t_ukp(3, 1).unwrap();
        assert_eq!(connectivity_ratio(&tu, Variant::Paper).unwrap(), r(4, 31));
    }

    #[test]
    fn rd_star_connectivity_hand_value() {
        // q = 2: C(6,2)/C(42,2)·4/6 + 36/C(42,2)·17/36 = (10 + 17)/861
        let p = SchemeParams::new(Scheme::RdStar, 2).unwrap();
        assert_eq!(connectivity_ratio(&p, Variant::Paper).unwrap(), r(27, 861));
    }

    #[test]
    fn resilience_spot_values() {
        let sb = SchemeParams::new(Scheme::Sbibd, 4).unwrap();
        assert_eq!(resilience_ratio(&sb, 1).unwrap(), r(5, 21));
        let pr = SchemeParams::new(Scheme::Proposed, 3).unwrap();
        // 1 − C(156, x)/C(167, x)
        assert_eq!(resilience_ratio(&pr, 1).unwrap(), r(11, 167));
        assert_eq!(resilience_ratio(&pr, 167).unwrap(), BigRational::one());
        assert!(matches!(resilience_ratio(&pr, 168), Err(Error::DomainError(_))));
        // TD: 1 − (1 − (q−2)/(q²−2))^x
        let td = SchemeParams::td(3, 4).unwrap();
        assert_eq!(resilience_ratio(&td, 2).unwrap(), int(1) - r(12, 14).pow(2));
        // Trade-KP q=2: 1 − (C(2,1) + 4·C(2,0))/C(8,1)
        let tr = SchemeParams::new(Scheme::TradeKp, 2).unwrap();
        assert_eq!(resilience_ratio(&tr, 1).unwrap(), r(1, 4));
    }

    #[test]
    fn printed_forms_that_are_not_probabilities() {
        // t-UKP as printed gives 1 with nothing captured
        let tu = SchemeParams::new(Scheme::UkpStar, 4).unwrap();
        assert_eq!(resilience_ratio(&tu, 0).unwrap(), BigRational::one());
        // RD*: the two binomials in the bracket coincide, so every term vanishes
        let rd = SchemeParams::new(Scheme::RdStar, 3).unwrap();
        for x in [0, 1, 10, 40] {
            assert_eq!(resilience_ratio(&rd, x).unwrap(), BigRational::zero());
        }
        // 3-D at x = 0: 3/(q²+q+1)·(1 − (q²−q)) for q ≥ 3
        let m3 = SchemeParams::new(Scheme::Mu3d, 3).unwrap();
        assert_eq!(resilience_ratio(&m3, 0).unwrap(), r(3, 13) * int(1 - 6));
        // 2-D at q = 2: Ch(0) = 1 inside its domain {0}
        let m2 = SchemeParams::new(Scheme::Mu2d, 2).unwrap();
        assert_eq!(resilience_ratio(&m2, 0).unwrap(), r(2, 3));
    }

    #[test]
    fn ukp_sum_matches_term_by_term() {
        for (q, t) in [(3u32, 2u32), (4, 2), (5, 1), (9, 3)] {
            let p = SchemeParams::t_ukp(q, t).unwrap();
            let (q, t2) = (q as u64, (t * t) as u64);
            let qi = q as i64;
            for x in [0u64, 1, 3] {
                let xt = (x * t as u64) as i64;
                let k = rat(binom_i(q * q * q * (q - 1), xt), binom_i(q * q * (q * q - q + 1), xt)).unwrap();
                let s = rat((qi + 1) * (qi + 1), qi * qi * qi + qi + 1).unwrap();
                let m = int(1) - s.clone();
                let norm = int(1) - m.pow(t2 as i32);
                let mut sum = BigRational::zero();
                for i in 1..=t2 {
                    let w = int(binom_i(t2, i as i64)) * s.pow(i as i32) * m.pow((t2 - i) as i32) / norm.clone();
                    sum += (int(1) - k.clone()).pow(i as i32) * w;
                }
                assert_eq!(resilience_ratio(&p, x).unwrap(), int(1) - sum);
            }
        }
    }

    #[test]
    fn ch_counts_hitting_sets() {
        // Ch(x) counts x-subsets of q groups of size q−1 that meet q−2 given groups
        for q in [3u64, 4, 5] {
            for x in (q - 2)..=((q - 1) * (q - 2)) {
                let total = q * (q - 1);
                let mut count = 0u64;
                for mask in 0u64..(1 << total) {
                    if mask.count_ones() as u64 != x {
                        continue;
                    }
                    let hits = (0..q - 2).all(|g| (mask >> (g * (q - 1))) & ((1 << (q - 1)) - 1) != 0);
                    count += hits as u64;
                }
                assert_eq!(ch(q, x), BigInt::from(count), "q={q} x={x}");
            }
            assert_eq!(ch(q, (q - 1) * (q - 2) + 1), BigInt::zero());
        }
    }

    #[test]
    fn exposure_bound_relation() {
        for q in [2u32, 3, 4, 5] {
            let n = (q * q + q + 1) as u64;
            for x in [0u64, 1, 5, 20] {
                let paper = int(1) - proposed_survival(q, x).unwrap();
                let exact = proposed_resilience_exact(q, x).unwrap();
                assert!(paper >= exact, "q={q} x={x}");
                let _ = n;
            }
        }
    }

    #[test]
    fn equal_ring_solver() {
        let p = solve_equal_ring(Scheme::Proposed, 10, None).unwrap();
        assert_eq!(p.q, 4);
        let p = solve_equal_ring(Scheme::Proposed, 11, None).unwrap();
        assert_eq!((p.q, scalability(&p).unwrap().ring_size), (5, 12));
        let p = solve_equal_ring(Scheme::Td, 10, None).unwrap();
        assert_eq!((p.q, p.k), (9, Some(10)));
        let p = solve_equal_ring(Scheme::UkpStar, 10, None).unwrap();
        assert_eq!(p.q, 9);
        assert!(matches!(solve_equal_ring(Scheme::TUkp, 10, None), Err(Error::NoFeasibleQ { .. })));
        assert!(matches!(solve_equal_ring(Scheme::Sbibd, 1000, None), Err(Error::NoFeasibleQ { .. })));
    }

    #[test]
    fn figure_scalability_contains_table_row() {
        let fd = figure_data(&FigureRequest {
            metric: Metric::Scalability,
            schemes: Scheme::FIGURE.to_vec(),
            matching: Matching::EqualRing(vec![10]),
            xs: 0..=0,
            k: None,
            t: None,
            paper_only: false,
        })
        .unwrap();
        let csv = to_csv(&fd.points);
        assert!(csv.lines().any(|l| l == "proposed,4,10,scalability,,441,paper"));
        assert!(csv.lines().any(|l| l == "sbibd,9,10,scalability,,91,paper"));
    }

    #[test]
    fn figure_connectivity_emits_both_variants() {
        let fd = figure_data(&FigureRequest {
            metric: Metric::Connectivity,
            schemes: vec![Scheme::Proposed, Scheme::Mu3d],
            matching: Matching::EqualRing(vec![12]),
            xs: 0..=0,
            k: None,
            t: None,
            paper_only: false,
        })
        .unwrap();
        let variants: Vec<_> = fd.points.iter().map(|p| (p.scheme, p.variant)).collect();
        assert_eq!(
            variants,
            [
                (Scheme::Proposed, Variant::Paper),
                (Scheme::Proposed, Variant::Exact),
                (Scheme::Mu3d, Variant::Paper)
            ]
        );
        // mu3d at q=5 gives 15/31 against the proposal's 2/31: flagged, not asserted away
        assert_eq!(fd.ordering_notes.len(), 1);
    }

    #[test]
    fn figure_resilience_truncates_domain() {
        let fd = figure_data(&FigureRequest {
            metric: Metric::Resilience,
            schemes: vec![Scheme::Sbibd],
            matching: Matching::EqualQ(vec![2]),
            xs: 0..=100,
            k: None,
            t: None,
            paper_only: true,
        })
        .unwrap();
        assert_eq!(fd.points.len(), 6);
        assert_eq!(fd.skipped.len(), 1);
    }

    #[test]
    fn all_infeasible_is_error() {
        let req = FigureRequest {
            metric: Metric::Scalability,
            schemes: vec![Scheme::UkpStar],
            matching: Matching::EqualQ(vec![3]),
            xs: 0..=0,
            k: None,
            t: None,
            paper_only: false,
        };
        assert!(matches!(figure_data(&req), Err(Error::NoFeasibleQ { .. })));
    }
}
