//! Ground data: parameters, the two homotheties, cell addressing, blow-up
//! sequences and the self-similar measure.
//!
//! The unit interval `I = [0, 1]` is split by `psi_1(x) = alpha x` and
//! `psi_2(x) = 1 - (1 - alpha)(1 - x)`. The measure gives weight `1 - alpha`
//! to the first cell and `alpha` to the second, which makes every cell of
//! word length `p` satisfy `width * mass = gamma^{-p}`.

use crate::error::{Error, Result};
use std::fmt;
use std::str::FromStr;

/// Parameters of the model and every constant derived from `alpha`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ModelParams {
    pub alpha: f64,
    /// `alpha / (1 - alpha)`
    pub delta: f64,
    /// `1 / (alpha (1 - alpha))`
    pub gamma: f64,
    /// Mass of the `psi_1` cell.
    pub w1: f64,
    /// Mass of the `psi_2` cell.
    pub w2: f64,
    /// First moment `int x dm`.
    pub first_moment: f64,
}

impl ModelParams {
    pub fn new(alpha: f64) -> Result<Self> {
        derive_params(alpha)
    }

    pub fn inv_delta(&self) -> f64 {
        1.0 / self.delta
    }

    pub fn sqrt_delta(&self) -> f64 {
        self.delta.sqrt()
    }

    /// Parameters for `1 - alpha`, which trades `delta` for `1 / delta`.
    pub fn mirrored(&self) -> Self {
        derive_params(1.0 - self.alpha).expect("mirror of a valid alpha is valid")
    }

    /// True when the measure is Lebesgue (`delta = 1`).
    pub fn is_lebesgue(&self) -> bool {
        (self.delta - 1.0).abs() < 1e-14
    }

    /// Weight of the cell selected by `s`.
    pub fn weight(&self, s: Symbol) -> f64 {
        match s {
            Symbol::One => self.w1,
            Symbol::Two => self.w2,
        }
    }

    /// Contraction ratio of `psi_s`.
    pub fn ratio(&self, s: Symbol) -> f64 {
        match s {
            Symbol::One => self.alpha,
            Symbol::Two => 1.0 - self.alpha,
        }
    }

    /// Negative-control hook: the same parameters with `delta` multiplied by
    /// `1 + rel`. The result violates the model identities on purpose.
    #[doc(hidden)]
    pub fn with_corrupted_delta(&self, rel: f64) -> Self {
        ModelParams {
            delta: self.delta * (1.0 + rel),
            ..*self
        }
    }
}

/// Build [`ModelParams`] from `alpha`.
pub fn derive_params(alpha: f64) -> Result<ModelParams> {
    if !(alpha > 0.0 && alpha < 1.0) {
        return Err(Error::AlphaOutOfRange(alpha));
    }
    let beta = 1.0 - alpha;
    Ok(ModelParams {
        alpha,
        delta: alpha / beta,
        gamma: 1.0 / (alpha * beta),
        w1: beta,
        w2: alpha,
        first_moment: alpha * alpha / (1.0 - 2.0 * alpha * beta),
    })
}

/// Letter of a blow-up sequence or a cell word.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Symbol {
    One,
    Two,
}

impl Symbol {
    pub fn from_digit(c: char) -> Option<Symbol> {
        match c {
            '1' => Some(Symbol::One),
            '2' => Some(Symbol::Two),
            _ => None,
        }
    }

    pub fn digit(self) -> char {
        match self {
            Symbol::One => '1',
            Symbol::Two => '2',
        }
    }
}

/// Increasing affine map `x -> scale * x + shift`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Affine {
    pub scale: f64,
    pub shift: f64,
}

impl Affine {
    pub const IDENTITY: Affine = Affine {
        scale: 1.0,
        shift: 0.0,
    };

    pub fn apply(&self, x: f64) -> f64 {
        self.scale * x + self.shift
    }

    /// `self ∘ inner`
    pub fn compose(&self, inner: &Affine) -> Affine {
        Affine {
            scale: self.scale * inner.scale,
            shift: self.scale * inner.shift + self.shift,
        }
    }
}

/// The homothety `psi_s`.
pub fn psi(params: &ModelParams, s: Symbol) -> Affine {
    match s {
        Symbol::One => Affine {
            scale: params.alpha,
            shift: 0.0,
        },
        Symbol::Two => Affine {
            scale: 1.0 - params.alpha,
            shift: params.alpha,
        },
    }
}

/// The inverse homothety `psi_s^{-1}`.
pub fn psi_inv(params: &ModelParams, s: Symbol) -> Affine {
    match s {
        Symbol::One => Affine {
            scale: 1.0 / params.alpha,
            shift: 0.0,
        },
        Symbol::Two => {
            let b = 1.0 - params.alpha;
            Affine {
                scale: 1.0 / b,
                shift: 1.0 - 1.0 / b,
            }
        }
    }
}

/// Declared behaviour of the infinite tail of a blow-up sequence.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Tail {
    /// Nothing is known beyond the prefix.
    Undeclared,
    /// Every symbol after the prefix is 1.
    AllOnes,
    /// Every symbol after the prefix is 2.
    AllTwos,
    /// The caller asserts infinitely many of both symbols.
    NonStationary,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BlowupClass {
    StationaryTo1,
    StationaryTo2,
    NonStationary,
    Undetermined,
}

/// Finite prefix of a blow-up sequence together with its declared tail.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BlowupPrefix {
    pub symbols: Vec<Symbol>,
    pub tail: Tail,
}

impl BlowupPrefix {
    pub fn new(symbols: Vec<Symbol>, tail: Tail) -> Self {
        BlowupPrefix { symbols, tail }
    }

    /// The empty prefix: only `I` itself is available.
    pub fn trivial() -> Self {
        BlowupPrefix::new(Vec::new(), Tail::Undeclared)
    }

    /// `(1, 1, ..., 1)` of length `n` with an all-ones tail, giving `[0, alpha^{-n}]`.
    pub fn ones(n: usize) -> Self {
        BlowupPrefix::new(vec![Symbol::One; n], Tail::AllOnes)
    }

    /// `(2, 2, ..., 2)` of length `n` with an all-twos tail.
    pub fn twos(n: usize) -> Self {
        BlowupPrefix::new(vec![Symbol::Two; n], Tail::AllTwos)
    }

    pub fn len(&self) -> usize {
        self.symbols.len()
    }

    pub fn is_empty(&self) -> bool {
        self.symbols.is_empty()
    }

    pub fn classification(&self) -> BlowupClass {
        classify_tail(self.tail)
    }

    /// Symbol at position `k`, extending the prefix with the declared tail.
    pub fn symbol(&self, k: usize) -> Option<Symbol> {
        if k < self.symbols.len() {
            return Some(self.symbols[k]);
        }
        match self.tail {
            Tail::AllOnes => Some(Symbol::One),
            Tail::AllTwos => Some(Symbol::Two),
            _ => None,
        }
    }

    /// Prefix of length `n`, extended by the declared stationary tail if needed.
    pub fn extended(&self, n: usize) -> Result<BlowupPrefix> {
        let mut symbols = Vec::with_capacity(n);
        for k in 0..n {
            match self.symbol(k) {
                Some(s) => symbols.push(s),
                None => {
                    return Err(Error::LevelMismatch {
                        level: n,
                        prefix_len: self.symbols.len(),
                    })
                }
            }
        }
        Ok(BlowupPrefix::new(symbols, self.tail))
    }
}

impl fmt::Display for BlowupPrefix {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for s in &self.symbols {
            write!(f, "{}", s.digit())?;
        }
        match self.tail {
            Tail::Undeclared => Ok(()),
            Tail::AllOnes => write!(f, ":tail=1"),
            Tail::AllTwos => write!(f, ":tail=2"),
            Tail::NonStationary => write!(f, ":tail=alt"),
        }
    }
}

impl FromStr for BlowupPrefix {
    type Err = Error;

    /// Parses `"121"`, `"121:tail=1"`, `":tail=2"` or `"12:tail=alt"`.
    fn from_str(s: &str) -> Result<Self> {
        let (word, tail) = match s.split_once(':') {
            Some((w, t)) => (w, Some(t)),
            None => (s, None),
        };
        let mut symbols = Vec::with_capacity(word.len());
        for c in word.trim().chars() {
            symbols.push(
                Symbol::from_digit(c)
                    .ok_or_else(|| Error::Precondition(format!("bad blow-up symbol {c:?}")))?,
            );
        }
        let tail = match tail.map(str::trim) {
            None | Some("") | Some("tail=none") => Tail::Undeclared,
            Some("tail=1") => Tail::AllOnes,
            Some("tail=2") => Tail::AllTwos,
            Some("tail=alt") => Tail::NonStationary,
            Some(other) => {
                return Err(Error::Precondition(format!(
                    "unknown blow-up tail {other:?}"
                )))
            }
        };
        Ok(BlowupPrefix { symbols, tail })
    }
}

/// Cell `psi_{j_1} ∘ ... ∘ psi_{j_p}(I)` placed in `I_<level>` by the blow-up.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CellAddress {
    pub level: usize,
    pub word: Vec<Symbol>,
}

impl CellAddress {
    pub fn new(level: usize, word: Vec<Symbol>) -> Self {
        CellAddress { level, word }
    }
}

/// `psi_{omega_1}^{-1} ∘ ... ∘ psi_{omega_n}^{-1}` for the first `n` symbols.
pub fn blowup_map(params: &ModelParams, symbols: &[Symbol]) -> Affine {
    symbols
        .iter()
        .fold(Affine::IDENTITY, |acc, &s| acc.compose(&psi_inv(params, s)))
}

/// `psi_{j_1} ∘ ... ∘ psi_{j_p}`.
pub fn word_map(params: &ModelParams, word: &[Symbol]) -> Affine {
    word.iter()
        .fold(Affine::IDENTITY, |acc, &s| acc.compose(&psi(params, s)))
}

fn check_level(prefix: &BlowupPrefix, level: usize) -> Result<()> {
    if level > prefix.len() {
        return Err(Error::LevelMismatch {
            level,
            prefix_len: prefix.len(),
        });
    }
    Ok(())
}

/// Endpoints of the addressed cell inside `I_<level>(omega)`.
pub fn cell_interval(
    params: &ModelParams,
    prefix: &BlowupPrefix,
    address: &CellAddress,
) -> Result<(f64, f64)> {
    check_level(prefix, address.level)?;
    let map = blowup_map(params, &prefix.symbols[..address.level])
        .compose(&word_map(params, &address.word));
    Ok((map.apply(0.0), map.apply(1.0)))
}

/// `m_<level>` of the addressed cell.
pub fn cell_mass(params: &ModelParams, prefix: &BlowupPrefix, address: &CellAddress) -> Result<f64> {
    check_level(prefix, address.level)?;
    let blow: f64 = prefix.symbols[..address.level]
        .iter()
        .map(|&s| 1.0 / params.weight(s))
        .product();
    let inner: f64 = address.word.iter().map(|&s| params.weight(s)).product();
    Ok(blow * inner)
}

/// Total mass `m_<n>(I_<n>)`.
pub fn total_mass(params: &ModelParams, symbols: &[Symbol]) -> f64 {
    symbols.iter().map(|&s| 1.0 / params.weight(s)).product()
}

/// Classification of a blow-up with its boundary points in `I_<infinity>`.
#[derive(Debug, Clone, PartialEq)]
pub struct BlowupClassification {
    pub class: BlowupClass,
    pub boundary: Vec<f64>,
}

fn classify_tail(tail: Tail) -> BlowupClass {
    match tail {
        Tail::AllOnes => BlowupClass::StationaryTo1,
        Tail::AllTwos => BlowupClass::StationaryTo2,
        Tail::NonStationary => BlowupClass::NonStationary,
        Tail::Undeclared => BlowupClass::Undetermined,
    }
}

/// Classify a blow-up from its prefix and declared tail.
///
/// A stationary tail after the prefix fixes the left (tail 1) or right
/// (tail 2) end of every further enlargement; that end is reported.
pub fn classify_blowup(
    params: &ModelParams,
    symbols: &[Symbol],
    tail: Tail,
) -> BlowupClassification {
    let class = classify_tail(tail);
    let map = blowup_map(params, symbols);
    let boundary = match class {
        BlowupClass::StationaryTo1 => vec![map.apply(0.0)],
        BlowupClass::StationaryTo2 => vec![map.apply(1.0)],
        _ => Vec::new(),
    };
    BlowupClassification { class, boundary }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn params_examples() {
        let p = derive_params(0.5).unwrap();
        assert_eq!((p.delta, p.gamma, p.w1, p.w2, p.first_moment), (1.0, 4.0, 0.5, 0.5, 0.5));
        let p = derive_params(1.0 / 3.0).unwrap();
        assert!((p.delta - 0.5).abs() < 1e-15);
        assert!((p.gamma - 4.5).abs() < 1e-14);
        assert!((p.first_moment - 0.2).abs() < 1e-15);
        let p = derive_params(2.0 / 3.0).unwrap();
        assert!((p.delta - 2.0).abs() < 1e-14);
        assert!((p.first_moment - 0.8).abs() < 1e-15);
        assert!(derive_params(0.0).is_err());
        assert!(derive_params(1.0).is_err());
        assert!(derive_params(f64::NAN).is_err());
    }

    #[test]
    fn intervals() {
        let p = derive_params(0.3).unwrap();
        let (l, r) = cell_interval(&p, &BlowupPrefix::ones(3), &CellAddress::new(3, vec![])).unwrap();
        assert_eq!(l, 0.0);
        assert!((r - 0.3f64.powi(-3)).abs() < 1e-12);
        let two = BlowupPrefix::new(vec![Symbol::Two], Tail::Undeclared);
        let (l, r) = cell_interval(&p, &two, &CellAddress::new(1, vec![])).unwrap();
        assert!((l + p.delta).abs() < 1e-15 && (r - 1.0).abs() < 1e-15);
        assert!(matches!(
            cell_interval(&p, &two, &CellAddress::new(2, vec![])),
            Err(Error::LevelMismatch { .. })
        ));
    }

    #[test]
    fn masses() {
        let p = derive_params(0.3).unwrap();
        let m = cell_mass(&p, &BlowupPrefix::trivial(), &CellAddress::new(0, vec![Symbol::One])).unwrap();
        assert!((m - 0.7).abs() < 1e-15);
        let m = cell_mass(&p, &BlowupPrefix::ones(4), &CellAddress::new(4, vec![])).unwrap();
        assert!((m - 0.7f64.powi(-4)).abs() < 1e-12);
    }

    #[test]
    fn parse_blowup() {
        let b: BlowupPrefix = "121:tail=1".parse().unwrap();
        assert_eq!(b.symbols, vec![Symbol::One, Symbol::Two, Symbol::One]);
        assert_eq!(b.tail, Tail::AllOnes);
        assert_eq!(b.to_string(), "121:tail=1");
        assert!("13".parse::<BlowupPrefix>().is_err());
        assert_eq!("".parse::<BlowupPrefix>().unwrap(), BlowupPrefix::trivial());
    }

    #[test]
    fn classification() {
        let p = derive_params(0.4).unwrap();
        let c = classify_blowup(&p, &[], Tail::AllOnes);
        assert_eq!(c.class, BlowupClass::StationaryTo1);
        assert_eq!(c.boundary, vec![0.0]);
        let c = classify_blowup(&p, &[], Tail::AllTwos);
        assert_eq!(c.boundary, vec![1.0]);
        let c = classify_blowup(&p, &[Symbol::One, Symbol::Two], Tail::NonStationary);
        assert_eq!(c.class, BlowupClass::NonStationary);
        assert!(c.boundary.is_empty());
        assert_eq!(
            classify_blowup(&p, &[Symbol::One], Tail::Undeclared).class,
            BlowupClass::Undetermined
        );
    }
}
