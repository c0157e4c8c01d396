use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum Error {
    #[error("{0} is not prime")]
    NonPrimeBase(u32),
    #[error("extension degree must be at least 1")]
    ZeroDegree,
    #[error("too large: {0}")]
    TooLarge(String),
    #[error("zero has no multiplicative inverse")]
    ZeroInverse,
    #[error("unsupported q = {0}: must be a prime power in [2, {1}]")]
    UnsupportedQ(u32, u32),
    #[error("k must satisfy 2 ≤ k ≤ q + 1 (got k = {k}, q = {q})")]
    KTooLarge { k: u32, q: u32 },
    #[error("invalid design: {0}")]
    InvalidDesign(String),
    #[error("a device cannot form a link with itself")]
    SameDevice,
    #[error("link is Direct; no intermediaries are needed")]
    NotIndirect,
    #[error("link is not Direct")]
    NotDirect,
    #[error("device carries no key material")]
    MissingKeyMaterial,
    #[error("ring of {ring} keys exceeds memory bound K = {bound}")]
    MemoryBound { ring: u32, bound: u32 },
    #[error("invalid parameters: {0}")]
    InvalidParams(String),
    #[error("outside formula domain: {0}")]
    DomainError(String),
    #[error("no supported prime power reaches ring size {target} for {scheme}")]
    NoFeasibleQ { scheme: String, target: u32 },
    #[error("cannot capture {x} devices and keep a link among {n} devices")]
    NotEnoughDevices { x: usize, n: usize },
}
