//! Substitution subshifts: generating words, factor statistics, the
//! Boshernitzan profile and periodic approximants.

use std::collections::{BTreeMap, HashMap, HashSet};

use serde::Serialize;

use crate::error::{Error, Result};
use crate::par;

/// A substitution rule set `a -> w(a)` over single-character symbols.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Substitution {
    rules: BTreeMap<char, Vec<char>>,
}

impl Substitution {
    pub fn new<I, S>(rules: I) -> Result<Self>
    where
        I: IntoIterator<Item = (char, S)>,
        S: AsRef<str>,
    {
        let rules: BTreeMap<char, Vec<char>> =
            rules.into_iter().map(|(c, w)| (c, w.as_ref().chars().collect())).collect();
        if rules.is_empty() {
            return Err(Error::EmptyInput("substitution has no rules"));
        }
        for (c, img) in &rules {
            if img.is_empty() {
                return Err(Error::Precondition(format!("rule for '{c}' has an empty image")));
            }
            if let Some(&bad) = img.iter().find(|s| !rules.contains_key(s)) {
                return Err(Error::UnknownSymbol(bad));
            }
        }
        Ok(Substitution { rules })
    }

    /// `a -> ab, b -> a`.
    pub fn fibonacci() -> Self {
        Self::new([('a', "ab"), ('b', "a")]).expect("valid rules")
    }

    /// `a -> ab, b -> ba`.
    pub fn thue_morse() -> Self {
        Self::new([('a', "ab"), ('b', "ba")]).expect("valid rules")
    }

    pub fn alphabet(&self) -> Vec<char> {
        self.rules.keys().copied().collect()
    }

    pub fn image(&self, c: char) -> Option<&[char]> {
        self.rules.get(&c).map(Vec::as_slice)
    }

    /// `M[i][j]` = number of occurrences of symbol `i` in the image of `j`,
    /// symbols in alphabet order.
    pub fn matrix(&self) -> Vec<Vec<u64>> {
        let alpha = self.alphabet();
        let idx: HashMap<char, usize> = alpha.iter().enumerate().map(|(i, &c)| (c, i)).collect();
        let mut m = vec![vec![0u64; alpha.len()]; alpha.len()];
        for (j, c) in alpha.iter().enumerate() {
            for s in &self.rules[c] {
                m[idx[s]][j] += 1;
            }
        }
        m
    }

    /// Some power of the substitution matrix is strictly positive. Powers up
    /// to `(k-1)^2 + 1` suffice (Wielandt).
    pub fn is_primitive(&self) -> bool {
        let k = self.rules.len();
        let base: Vec<Vec<bool>> =
            self.matrix().iter().map(|r| r.iter().map(|&v| v > 0).collect()).collect();
        let mut p = base.clone();
        for _ in 0..((k - 1) * (k - 1) + 1) {
            if p.iter().all(|r| r.iter().all(|&v| v)) {
                return true;
            }
            p = (0..k)
                .map(|i| (0..k).map(|j| (0..k).any(|l| p[i][l] && base[l][j])).collect())
                .collect();
        }
        false
    }

    /// If the rules are `a -> ab, b -> a` up to renaming, returns `(a, b)`.
    pub fn fibonacci_letters(&self) -> Option<(char, char)> {
        if self.rules.len() != 2 {
            return None;
        }
        self.rules.iter().find_map(|(&a, img)| match img.as_slice() {
            [x, b] if *x == a && *b != a && self.rules[b].as_slice() == [a] => Some((a, *b)),
            _ => None,
        })
    }

    /// `s^n(seed)` as a one-sided word.
    pub fn iterate(&self, seed: char, n: usize) -> Result<SubshiftWord> {
        Ok(SubshiftWord::one_sided(self.iterate_symbols(seed, n)?))
    }

    fn iterate_symbols(&self, seed: char, n: usize) -> Result<Vec<char>> {
        if !self.rules.contains_key(&seed) {
            return Err(Error::UnknownSymbol(seed));
        }
        let mut w = vec![seed];
        for _ in 0..n {
            w = w.iter().flat_map(|c| self.rules[c].iter().copied()).collect();
        }
        Ok(w)
    }

    /// Smallest iterate of `seed` with at least `min_len` symbols.
    pub fn iterate_to_length(&self, seed: char, min_len: usize) -> Result<SubshiftWord> {
        if !self.rules.contains_key(&seed) {
            return Err(Error::UnknownSymbol(seed));
        }
        let mut w = vec![seed];
        while w.len() < min_len {
            let next: Vec<char> = w.iter().flat_map(|c| self.rules[c].iter().copied()).collect();
            if next.len() <= w.len() {
                return Err(Error::Precondition(format!(
                    "iterates of '{seed}' stop growing at length {}",
                    w.len()
                )));
            }
            w = next;
        }
        Ok(SubshiftWord::one_sided(w))
    }

    /// One period of the periodic approximant at level `n`: `s^n(seed)`
    /// repeated.
    pub fn periodic_approximant(&self, seed: char, n: usize) -> Result<SubshiftWord> {
        let mut w = self.iterate(seed, n)?;
        w.periodic = true;
        Ok(w)
    }
}

/// A finite window into a two-sided sequence; `origin` indexes position 0.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SubshiftWord {
    symbols: Vec<char>,
    origin: usize,
    periodic: bool,
}

impl SubshiftWord {
    pub fn new(symbols: Vec<char>, origin: usize) -> Result<Self> {
        if symbols.is_empty() {
            return Err(Error::EmptyInput("word is empty"));
        }
        if origin >= symbols.len() {
            return Err(Error::Precondition(format!(
                "origin {origin} outside word of length {}",
                symbols.len()
            )));
        }
        Ok(SubshiftWord { symbols, origin, periodic: false })
    }

    pub fn one_sided(symbols: Vec<char>) -> Self {
        SubshiftWord { symbols, origin: 0, periodic: false }
    }

    /// One period of an explicitly periodic word.
    pub fn periodic(symbols: Vec<char>) -> Result<Self> {
        let mut w = Self::new(symbols, 0)?;
        w.periodic = true;
        Ok(w)
    }

    /// Extend a right half-line word to the left by mirroring:
    /// `x(-k) = x(k - 1)`.
    pub fn two_sided_mirror(right: Vec<char>) -> Result<Self> {
        let mut symbols: Vec<char> = right.iter().rev().copied().collect();
        let origin = symbols.len();
        symbols.extend(right);
        Self::new(symbols, origin)
    }

    /// `left` holds `x(-|left|) .. x(-1)`.
    pub fn two_sided(left: Vec<char>, right: Vec<char>) -> Result<Self> {
        let origin = left.len();
        let mut symbols = left;
        symbols.extend(right);
        Self::new(symbols, origin)
    }

    pub fn len(&self) -> usize {
        self.symbols.len()
    }

    pub fn is_empty(&self) -> bool {
        self.symbols.is_empty()
    }

    pub fn symbols(&self) -> &[char] {
        &self.symbols
    }

    pub fn origin(&self) -> usize {
        self.origin
    }

    pub fn is_periodic(&self) -> bool {
        self.periodic
    }

    /// `x(0), x(1), ...` up to the end of the window.
    pub fn right_half(&self) -> &[char] {
        &self.symbols[self.origin..]
    }

    /// `x(-1), x(-2), ...` going left from the origin.
    pub fn left_half_reversed(&self) -> impl Iterator<Item = char> + '_ {
        self.symbols[..self.origin].iter().rev().copied()
    }

    /// `S^j x` restricted to the same window.
    pub fn shift(&self, j: isize) -> Result<Self> {
        let origin = self.origin as isize + j;
        if origin < 0 || origin as usize >= self.symbols.len() {
            return Err(Error::InsufficientWindow {
                len: self.symbols.len(),
                needed: (self.origin as isize + j.abs() + 1) as usize,
            });
        }
        Ok(SubshiftWord { origin: origin as usize, ..self.clone() })
    }

    pub fn to_text(&self) -> String {
        self.symbols.iter().collect()
    }
}

impl std::str::FromStr for SubshiftWord {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        Self::new(s.chars().collect(), 0)
    }
}

/// Sliding-window factor counts of one length.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CylinderStats {
    pub n: usize,
    pub counts: BTreeMap<String, usize>,
    pub total: usize,
    /// The window is shorter than ten times the factor length.
    pub short_window: bool,
}

impl CylinderStats {
    pub fn frequency(&self, factor: &str) -> f64 {
        self.counts.get(factor).copied().unwrap_or(0) as f64 / self.total as f64
    }

    pub fn min_frequency(&self) -> f64 {
        self.counts.values().copied().min().unwrap_or(0) as f64 / self.total as f64
    }
}

/// Dense symbol coding used to pack factors into integer keys.
struct Coding {
    codes: Vec<u8>,
    bits: u32,
    alphabet: Vec<char>,
}

impl Coding {
    fn new(w: &[char]) -> Self {
        let mut alphabet: Vec<char> = w.iter().copied().collect::<HashSet<_>>().into_iter().collect();
        alphabet.sort_unstable();
        let index: HashMap<char, u8> = alphabet.iter().enumerate().map(|(i, &c)| (c, i as u8)).collect();
        let bits = (usize::BITS - (alphabet.len().max(2) - 1).leading_zeros()).max(1);
        Coding { codes: w.iter().map(|c| index[c]).collect(), bits, alphabet }
    }

    fn packable(&self, n: usize) -> bool {
        self.alphabet.len() <= 256 && (n as u32) * self.bits <= 128
    }

    fn decode(&self, mut key: u128, n: usize) -> String {
        let mask = (1u128 << self.bits) - 1;
        let mut out = vec![' '; n];
        for slot in out.iter_mut().rev() {
            *slot = self.alphabet[(key & mask) as usize];
            key >>= self.bits;
        }
        out.into_iter().collect()
    }

    /// Rolling counts of packed length-`n` factors.
    fn packed_counts(&self, n: usize) -> HashMap<u128, usize> {
        let mask: u128 = if n as u32 * self.bits == 128 { u128::MAX } else { (1u128 << (n as u32 * self.bits)) - 1 };
        let mut counts = HashMap::new();
        let mut key = 0u128;
        for (i, &c) in self.codes.iter().enumerate() {
            key = ((key << self.bits) | c as u128) & mask;
            if i + 1 >= n {
                *counts.entry(key).or_insert(0) += 1;
            }
        }
        counts
    }
}

fn count_factors(w: &[char], n: usize) -> Vec<usize> {
    let coding = Coding::new(w);
    if coding.packable(n) {
        coding.packed_counts(n).into_values().collect()
    } else {
        let mut counts: HashMap<&[char], usize> = HashMap::new();
        for f in w.windows(n) {
            *counts.entry(f).or_insert(0) += 1;
        }
        counts.into_values().collect()
    }
}

fn check_length(w: &SubshiftWord, n: usize) -> Result<()> {
    if n == 0 || n > w.len() {
        return Err(Error::InsufficientWindow { len: w.len(), needed: n.max(1) });
    }
    Ok(())
}

/// Number of distinct length-`n` factors of the window.
pub fn factor_complexity(w: &SubshiftWord, n: usize) -> Result<usize> {
    check_length(w, n)?;
    Ok(count_factors(&w.symbols, n).len())
}

/// Complexity at least `n + 1` for every `n` in `1..=n_max`; a word failing
/// this at some `n` is eventually periodic by Morse–Hedlund.
pub fn aperiodicity_consistent(w: &SubshiftWord, n_max: usize) -> Result<bool> {
    for n in 1..=n_max {
        if factor_complexity(w, n)? <= n {
            return Ok(false);
        }
    }
    Ok(true)
}

/// Smallest `p` with `w[i] = w[i + p]` for all valid `i` (prefix function).
pub fn minimal_period(w: &[char]) -> usize {
    if w.is_empty() {
        return 0;
    }
    let mut pi = vec![0usize; w.len()];
    for i in 1..w.len() {
        let mut k = pi[i - 1];
        while k > 0 && w[i] != w[k] {
            k = pi[k - 1];
        }
        if w[i] == w[k] {
            k += 1;
        }
        pi[i] = k;
    }
    w.len() - pi[w.len() - 1]
}

/// Sliding-window counts of every length-`n` factor.
pub fn cylinder_frequencies(w: &SubshiftWord, n: usize) -> Result<CylinderStats> {
    check_length(w, n)?;
    let coding = Coding::new(&w.symbols);
    let counts: BTreeMap<String, usize> = if coding.packable(n) {
        coding.packed_counts(n).into_iter().map(|(k, c)| (coding.decode(k, n), c)).collect()
    } else {
        let mut m = BTreeMap::new();
        for f in w.symbols.windows(n) {
            *m.entry(f.iter().collect::<String>()).or_insert(0) += 1;
        }
        m
    };
    Ok(CylinderStats { n, counts, total: w.len() - n + 1, short_window: w.len() < 10 * n })
}

/// Relative frequency of each letter.
pub fn letter_frequencies(w: &[char]) -> BTreeMap<char, f64> {
    let mut m = BTreeMap::new();
    for &c in w {
        *m.entry(c).or_insert(0.0) += 1.0;
    }
    let n = w.len() as f64;
    m.values_mut().for_each(|v| *v /= n);
    m
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BoshernitzanProfile {
    /// `(n, n * eta(n))` for `n = 1..=n_max`.
    pub points: Vec<(usize, f64)>,
    pub threshold: f64,
    /// `n * eta(n) >= threshold` at `n = n_max`.
    pub b_consistent: bool,
}

impl BoshernitzanProfile {
    pub fn min_value(&self) -> f64 {
        self.points.iter().map(|p| p.1).fold(f64::INFINITY, f64::min)
    }
}

/// Empirical `n * eta(n)` where `eta(n)` is the smallest sliding-window
/// frequency among factors of length `n` that occur in the window.
pub fn boshernitzan_profile(w: &SubshiftWord, n_max: usize, threshold: f64) -> Result<BoshernitzanProfile> {
    if n_max == 0 || n_max * 10 > w.len() {
        return Err(Error::InsufficientWindow { len: w.len(), needed: 10 * n_max.max(1) });
    }
    let ns: Vec<usize> = (1..=n_max).collect();
    let points = par::map(&ns, |&n| {
        let min = count_factors(&w.symbols, n).into_iter().min().unwrap_or(0);
        (n, n as f64 * min as f64 / (w.len() - n + 1) as f64)
    });
    let b_consistent = points.last().map(|p| p.1 >= threshold).unwrap_or(false);
    Ok(BoshernitzanProfile { points, threshold, b_consistent })
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    /// Independent re-expansion: apply the rules by string replacement.
    fn expand_oracle(rules: &[(char, &str)], seed: char, n: usize) -> String {
        let mut w = seed.to_string();
        for _ in 0..n {
            w = w
                .chars()
                .map(|c| rules.iter().find(|r| r.0 == c).unwrap().1)
                .collect::<Vec<_>>()
                .concat();
        }
        w
    }

    #[test]
    fn iterate_examples() {
        let fib = Substitution::fibonacci();
        assert_eq!(fib.iterate('a', 0).unwrap().to_text(), "a");
        assert_eq!(fib.iterate('a', 3).unwrap().to_text(), "abaab");
        assert_eq!(expand_oracle(&[('a', "ab"), ('b', "a")], 'a', 3), "abaab");
        let tm = Substitution::thue_morse();
        assert_eq!(tm.iterate('a', 2).unwrap().to_text(), "abba");
        assert_eq!(expand_oracle(&[('a', "ab"), ('b', "ba")], 'a', 2), "abba");
        assert_eq!(fib.iterate('c', 1), Err(Error::UnknownSymbol('c')));
        for n in 0..12 {
            assert_eq!(
                fib.iterate('a', n).unwrap().to_text(),
                expand_oracle(&[('a', "ab"), ('b', "a")], 'a', n)
            );
        }
    }

    #[test]
    fn prefix_compatible_iterates() {
        let fib = Substitution::fibonacci();
        let w10 = fib.iterate('a', 10).unwrap();
        let w12 = fib.iterate('a', 12).unwrap();
        assert!(w12.symbols().starts_with(w10.symbols()));
    }

    #[test]
    fn substitution_properties() {
        let fib = Substitution::fibonacci();
        assert!(fib.is_primitive());
        assert_eq!(fib.fibonacci_letters(), Some(('a', 'b')));
        assert_eq!(Substitution::thue_morse().fibonacci_letters(), None);
        let renamed = Substitution::new([('x', "y"), ('y', "yx")]).unwrap();
        assert_eq!(renamed.fibonacci_letters(), Some(('y', 'x')));
        let reducible = Substitution::new([('a', "aa"), ('b', "ab")]).unwrap();
        assert!(!reducible.is_primitive());
        assert!(Substitution::new([('a', "ac")]).is_err());
    }

    #[test]
    fn complexity_examples() {
        let constant: SubshiftWord = "aaaaaaaa".parse().unwrap();
        assert_eq!(factor_complexity(&constant, 2).unwrap(), 1);
        let fib = Substitution::fibonacci().iterate_to_length('a', 10_000).unwrap();
        assert_eq!(factor_complexity(&fib, 1).unwrap(), 2);
        // direct enumeration oracle
        let mut set = HashSet::new();
        for f in fib.symbols().windows(10) {
            set.insert(f.to_vec());
        }
        assert_eq!(set.len(), 11);
        assert_eq!(factor_complexity(&fib, 10).unwrap(), 11);
        assert!(aperiodicity_consistent(&fib, 30).unwrap());
        assert!(factor_complexity(&constant, 9).is_err());
    }

    #[test]
    fn long_factors_fall_back_to_slices() {
        let fib = Substitution::fibonacci().iterate_to_length('a', 5_000).unwrap();
        assert_eq!(factor_complexity(&fib, 200).unwrap(), 201);
    }

    #[test]
    fn morse_hedlund_cross_check() {
        for period in ["ab", "aab", "abcab", "abbab"] {
            let w: Vec<char> = period.chars().cycle().take(600).collect();
            let p = minimal_period(&w);
            assert_eq!(p, period.len());
            let word = SubshiftWord::one_sided(w);
            let n = (1..50).find(|&n| factor_complexity(&word, n).unwrap() <= n).unwrap();
            assert!(minimal_period(word.symbols()) <= n);
        }
        let fib = Substitution::fibonacci().iterate(' ', 0);
        assert!(fib.is_err());
    }

    #[test]
    fn frequency_examples() {
        let w: SubshiftWord = "ab".repeat(1000).parse().unwrap();
        let st = cylinder_frequencies(&w, 1).unwrap();
        assert_eq!(st.counts["a"] + st.counts["b"], st.total);
        assert!((st.frequency("a") - 0.5).abs() < 1e-3);
        let fib = Substitution::fibonacci().iterate_to_length('a', 1_000_000).unwrap();
        let st = cylinder_frequencies(&fib, 1).unwrap();
        // counting oracle
        let count_a = fib.symbols().iter().filter(|&&c| c == 'a').count() as f64;
        assert!((st.frequency("a") - count_a / fib.len() as f64).abs() < 1e-15);
        assert!((st.frequency("a") - 0.6180).abs() < 1e-3);
        let whole = cylinder_frequencies(&w, w.len()).unwrap();
        assert_eq!(whole.counts.len(), 1);
        assert_eq!(whole.frequency(&w.to_text()), 1.0);
        let short = cylinder_frequencies(&"abab".parse().unwrap(), 2).unwrap();
        assert!(short.short_window);
    }

    #[test]
    fn frequencies_sum_to_one() {
        let fib = Substitution::fibonacci().iterate_to_length('a', 50_000).unwrap();
        for n in [1, 3, 7, 20, 70] {
            let st = cylinder_frequencies(&fib, n).unwrap();
            let s: f64 = st.counts.keys().map(|k| st.frequency(k)).sum();
            assert!((s - 1.0).abs() < 1e-12);
            assert!(st.counts.keys().all(|k| k.chars().count() == n));
        }
    }

    #[test]
    fn letter_frequencies_converge_for_primitive_substitutions() {
        for s in [Substitution::fibonacci(), Substitution::thue_morse()] {
            let w = s.iterate_to_length('a', 200_000).unwrap();
            let f1 = letter_frequencies(&w.symbols()[..100_000]);
            let f2 = letter_frequencies(&w.symbols()[..200_000]);
            for (c, v) in &f1 {
                assert!((v - f2[c]).abs() < 1e-3);
            }
        }
    }

    #[test]
    fn boshernitzan_examples() {
        let periodic: SubshiftWord = "abc".repeat(2000).parse().unwrap();
        let prof = boshernitzan_profile(&periodic, 12, 0.05).unwrap();
        for &(n, v) in &prof.points[2..] {
            assert!((v - n as f64 / 3.0).abs() < 1e-2);
        }
        assert!(prof.b_consistent);

        let fib = Substitution::fibonacci().iterate_to_length('a', 100_000).unwrap();
        let prof = boshernitzan_profile(&fib, 32, 0.05).unwrap();
        assert!(prof.min_value() >= 0.2);

        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let random: Vec<char> = (0..200_000).map(|_| if rng.random::<bool>() { 'a' } else { 'b' }).collect();
        let prof = boshernitzan_profile(&SubshiftWord::one_sided(random), 20, 0.05).unwrap();
        assert!(!prof.b_consistent);
        assert!(prof.points[19].1 < 1e-3);

        assert!(boshernitzan_profile(&fib, 20_000, 0.05).is_err());
    }

    #[test]
    fn eta_is_non_increasing() {
        let fib = Substitution::fibonacci().iterate_to_length('a', 100_000).unwrap();
        let prof = boshernitzan_profile(&fib, 40, 0.05).unwrap();
        let len = fib.len() as f64;
        for w in prof.points.windows(2) {
            let (n0, v0) = w[0];
            let (n1, v1) = w[1];
            let (eta0, eta1) = (v0 / n0 as f64, v1 / n1 as f64);
            assert!(eta1 <= eta0 * (1.0 + 2.0 / (len - n1 as f64)));
        }
    }

    #[test]
    fn approximant_lengths_follow_substitution_matrix() {
        let fib = Substitution::fibonacci();
        let lengths: Vec<usize> = (0..8).map(|n| fib.periodic_approximant('a', n).unwrap().len()).collect();
        assert_eq!(lengths, vec![1, 2, 3, 5, 8, 13, 21, 34]);
        let p = fib.periodic_approximant('a', 3).unwrap();
        assert!(p.is_periodic());
        assert_eq!(p.to_text(), "abaab");
        assert_eq!(fib.periodic_approximant('a', 0).unwrap().to_text(), "a");
        // |s^n(a)| = sum over letters of level n-1 of their image lengths
        let m = fib.matrix();
        for n in 1..8 {
            let prev = fib.iterate('a', n - 1).unwrap();
            let freq = letter_frequencies(prev.symbols());
            let counts: Vec<f64> = fib.alphabet().iter().map(|c| freq.get(c).copied().unwrap_or(0.0) * prev.len() as f64).collect();
            let predicted: f64 = (0..2).map(|j| counts[j] * (m[0][j] + m[1][j]) as f64).sum();
            assert_eq!(predicted.round() as usize, lengths[n]);
        }
    }

    #[test]
    fn two_sided_words() {
        let w = SubshiftWord::two_sided_mirror("abaab".chars().collect()).unwrap();
        assert_eq!(w.origin(), 5);
        assert_eq!(w.to_text(), "baabaabaab");
        assert_eq!(w.left_half_reversed().collect::<String>(), "abaab");
        let s = w.shift(2).unwrap();
        assert_eq!(s.right_half().iter().collect::<String>(), "aab");
        assert!(w.shift(10).is_err());
    }
}
