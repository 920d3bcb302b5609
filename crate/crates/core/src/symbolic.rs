//! Words over the component alphabet, branch strings, and the finite maximal
//! antichains that organize cylinder decompositions.
//!
//! A word drives the construction: letter `k` names the component acting at
//! depth `k + 1`. Words come in three kinds. Explicit words are finite.
//! Periodic words repeat a base block forever. Sampled words draw i.i.d.
//! letters from the selection distribution; they are regenerated from the
//! seed on demand, so the same seed always yields the same letters and
//! extending a prefix never changes it.
//!
//! Branch strings ("sigma") are indices into the active component's map
//! list, 0-based. A set of branch strings is a finite maximal antichain when
//! no member prefixes another and every infinite branch passes through
//! exactly one member.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::error::{Result, RifsError};
use crate::system::{compose, CylinderGeom, RifsSpec};

/// A branch string: entry `k` selects a map of the component named by the
/// word's letter `k` (both 0-based).
pub type CylinderIndex = Vec<u8>;

/// Default cap on enumeration size, in emitted cylinders. Override through
/// the explicit budget arguments (the CLI reads FRACTAL_QUANT_BUDGET).
pub const DEFAULT_BUDGET: u64 = 10_000_000;

/// Comparisons of log weights against an antichain threshold within this
/// tolerance count as "at least", keeping the parent-side inequality weak.
pub const TIE_TOL: f64 = 1e-12;

#[derive(Clone, Debug)]
enum WordSource {
    Explicit(Vec<u8>),
    /// Base block; the word is the block repeated forever.
    Periodic(Vec<u8>),
    /// Letters `skip..` of the i.i.d. stream seeded by `seed`.
    Sampled { seed: u64, skip: u64, zeta: Vec<f64> },
}

/// A word over the component alphabet.
#[derive(Clone, Debug)]
pub struct Word {
    source: WordSource,
    n_components: usize,
}

impl Word {
    pub fn explicit(letters: Vec<u8>, n_components: usize) -> Result<Self> {
        check_letters(&letters, n_components)?;
        Ok(Word {
            source: WordSource::Explicit(letters),
            n_components,
        })
    }

    pub fn periodic(base: Vec<u8>, n_components: usize) -> Result<Self> {
        if base.is_empty() {
            return Err(RifsError::DegenerateInput("empty periodic base".into()));
        }
        check_letters(&base, n_components)?;
        Ok(Word {
            source: WordSource::Periodic(base),
            n_components,
        })
    }

    /// The constant word on a single letter.
    pub fn constant(letter: u8, n_components: usize) -> Result<Self> {
        Self::periodic(vec![letter], n_components)
    }

    pub fn is_finite(&self) -> bool {
        matches!(self.source, WordSource::Explicit(_))
    }

    /// Number of letters an explicit word can supply; unbounded otherwise.
    pub fn available_len(&self) -> Option<usize> {
        match &self.source {
            WordSource::Explicit(v) => Some(v.len()),
            _ => None,
        }
    }

    /// First `n` letters. Sampled words are regenerated from their seed, so
    /// any two calls agree on the shared prefix.
    pub fn prefix(&self, n: usize) -> Result<Vec<u8>> {
        match &self.source {
            WordSource::Explicit(v) => {
                if n > v.len() {
                    return Err(RifsError::WordTooShort {
                        len: v.len(),
                        needed: n,
                    });
                }
                Ok(v[..n].to_vec())
            }
            WordSource::Periodic(base) => {
                Ok((0..n).map(|k| base[k % base.len()]).collect())
            }
            WordSource::Sampled { seed, skip, zeta } => {
                let mut rng = ChaCha8Rng::seed_from_u64(*seed);
                let total = skip
                    .checked_add(n as u64)
                    .ok_or_else(|| RifsError::DegenerateInput("word shift overflow".into()))?;
                let mut out = Vec::with_capacity(n);
                for k in 0..total {
                    let letter = draw_letter(&mut rng, zeta);
                    if k >= *skip {
                        out.push(letter);
                    }
                }
                Ok(out)
            }
        }
    }

    pub fn letter(&self, k: usize) -> Result<u8> {
        match &self.source {
            WordSource::Periodic(base) => Ok(base[k % base.len()]),
            _ => Ok(*self.prefix(k + 1)?.last().unwrap()),
        }
    }

    pub fn n_components(&self) -> usize {
        self.n_components
    }
}

fn check_letters(letters: &[u8], n_components: usize) -> Result<()> {
    if n_components == 0 {
        return Err(RifsError::DegenerateInput("word over no components".into()));
    }
    for &l in letters {
        if l as usize >= n_components {
            return Err(RifsError::InvalidSymbol {
                component: l as usize,
                symbol: 0,
                alphabet: n_components,
            });
        }
    }
    Ok(())
}

fn draw_letter(rng: &mut ChaCha8Rng, zeta: &[f64]) -> u8 {
    let u: f64 = rng.gen();
    let mut acc = 0.0;
    for (i, &z) in zeta.iter().enumerate() {
        acc += z;
        if u < acc {
            return i as u8;
        }
    }
    (zeta.len() - 1) as u8
}

/// Samples the infinite i.i.d. word under the system's selection
/// distribution. Deterministic per seed.
pub fn sample_word(spec: &RifsSpec, seed: u64) -> Word {
    Word {
        source: WordSource::Sampled {
            seed,
            skip: 0,
            zeta: spec.zeta.clone(),
        },
        n_components: spec.n_components(),
    }
}

/// Drops the first `n` letters. `shift(word, 0)` is the identity.
pub fn shift(word: &Word, n: usize) -> Result<Word> {
    let source = match &word.source {
        WordSource::Explicit(v) => {
            if n > v.len() {
                return Err(RifsError::WordTooShort {
                    len: v.len(),
                    needed: n,
                });
            }
            WordSource::Explicit(v[n..].to_vec())
        }
        WordSource::Periodic(base) => {
            let k = n % base.len();
            let mut rotated = base[k..].to_vec();
            rotated.extend_from_slice(&base[..k]);
            WordSource::Periodic(rotated)
        }
        WordSource::Sampled { seed, skip, zeta } => WordSource::Sampled {
            seed: *seed,
            skip: skip + n as u64,
            zeta: zeta.clone(),
        },
    };
    Ok(Word {
        source,
        n_components: word.n_components,
    })
}

/// A finite set of cylinders with their geometry. Construction functions in
/// this module only ever emit antichains (level sets and weight cuts).
#[derive(Clone, Debug)]
pub struct Antichain {
    pub members: Vec<CylinderGeom>,
}

impl Antichain {
    pub fn len(&self) -> usize {
        self.members.len()
    }

    pub fn is_empty(&self) -> bool {
        self.members.is_empty()
    }

    pub fn min_depth(&self) -> usize {
        self.members.iter().map(CylinderGeom::depth).min().unwrap_or(0)
    }

    pub fn max_depth(&self) -> usize {
        self.members.iter().map(CylinderGeom::depth).max().unwrap_or(0)
    }

    /// Sum of member probabilities; 1 for a maximal antichain.
    pub fn total_prob(&self) -> f64 {
        self.members.iter().map(|g| g.product_prob).sum()
    }

    pub fn indices(&self) -> Vec<CylinderIndex> {
        self.members.iter().map(|g| g.sigma.clone()).collect()
    }

    /// Writes `sigma;depth;log_p;log_c;box_lo;box_hi` rows. Branch strings
    /// are dot-separated 0-based symbols; box coordinates are comma-joined
    /// per axis.
    pub fn write_csv(&self, out: &mut dyn std::io::Write) -> std::io::Result<()> {
        writeln!(out, "sigma;depth;log_p;log_c;box_lo;box_hi")?;
        for g in &self.members {
            writeln!(
                out,
                "{};{};{};{};{};{}",
                format_sigma(&g.sigma),
                g.depth(),
                g.log_prob,
                g.log_ratio,
                join_coords(&g.image_box.lo),
                join_coords(&g.image_box.hi),
            )?;
        }
        Ok(())
    }
}

pub fn format_sigma(sigma: &[u8]) -> String {
    sigma
        .iter()
        .map(|s| s.to_string())
        .collect::<Vec<_>>()
        .join(".")
}

pub fn parse_sigma(text: &str) -> Result<CylinderIndex> {
    if text.is_empty() {
        return Ok(Vec::new());
    }
    text.split('.')
        .map(|t| {
            t.parse::<u8>()
                .map_err(|_| RifsError::Parse(format!("bad branch symbol {t:?}")))
        })
        .collect()
}

fn join_coords(v: &[f64]) -> String {
    v.iter()
        .map(|x| x.to_string())
        .collect::<Vec<_>>()
        .join(",")
}

/// All branch strings of length `n`: the full level set. The number of
/// cylinders is the product of the active alphabet sizes; enumeration fails
/// with `BudgetExceeded` before allocating if it would exceed `budget`.
pub fn enumerate_level(spec: &RifsSpec, word: &Word, n: usize, budget: u64) -> Result<Antichain> {
    enumerate_level_anchored(spec, word, n, None, budget)
}

/// [`enumerate_level`] with an explicit anchor for the cylinder geometry.
pub fn enumerate_level_anchored(
    spec: &RifsSpec,
    word: &Word,
    n: usize,
    anchor: Option<&[f64]>,
    budget: u64,
) -> Result<Antichain> {
    let letters = word.prefix(n)?;
    let mut count: u128 = 1;
    for &l in &letters {
        count = count.saturating_mul(spec.alphabet(l as usize) as u128);
        if count > budget as u128 {
            return Err(RifsError::BudgetExceeded {
                needed: count,
                budget,
            });
        }
    }
    let mut members = Vec::with_capacity(count as usize);
    let mut sigma: CylinderIndex = Vec::with_capacity(n);
    descend_full(spec, &letters, anchor, &mut sigma, n, &mut members)?;
    Ok(Antichain { members })
}

fn descend_full(
    spec: &RifsSpec,
    letters: &[u8],
    anchor: Option<&[f64]>,
    sigma: &mut CylinderIndex,
    n: usize,
    out: &mut Vec<CylinderGeom>,
) -> Result<()> {
    if sigma.len() == n {
        out.push(compose(spec, letters, sigma, anchor)?);
        return Ok(());
    }
    let comp = letters[sigma.len()] as usize;
    for j in 0..spec.alphabet(comp) as u8 {
        sigma.push(j);
        descend_full(spec, letters, anchor, sigma, n, out)?;
        sigma.pop();
    }
    Ok(())
}

/// Summary of a weight-cut antichain.
#[derive(Clone, Copy, Debug, Serialize)]
pub struct GammaStats {
    pub n: usize,
    /// Member count.
    pub phi: usize,
    /// Shallowest member depth.
    pub l1: usize,
    /// Deepest member depth.
    pub l2: usize,
    /// The weight cut: members fall strictly below it, their parents do not.
    pub threshold: f64,
}

/// Builds the weight-cut antichain at level `n`: branch strings whose weight
/// `p_sigma c_sigma^r` first drops below `p_min c_min^r / n`. Parents sit at
/// or above the cut (ties within `TIE_TOL` count as above, so the boundary
/// string descends).
pub fn build_gamma(
    spec: &RifsSpec,
    word: &Word,
    r: f64,
    n: usize,
    budget: u64,
) -> Result<(Antichain, GammaStats)> {
    if n == 0 {
        return Err(RifsError::DegenerateInput("weight cut needs n >= 1".into()));
    }
    let log_theta = threshold_log(spec, r, n);
    // every member weight exceeds theta * p_min c_min^r, bounding the depth
    let letters = word.prefix(max_cut_depth(spec, r, log_theta))?;
    let mut members = Vec::new();
    let mut sigma: CylinderIndex = Vec::new();
    descend_cut(spec, &letters, r, log_theta, &mut sigma, 0.0, &mut members, budget)?;
    let antichain = Antichain { members };
    let stats = GammaStats {
        n,
        phi: antichain.len(),
        l1: antichain.min_depth(),
        l2: antichain.max_depth(),
        threshold: log_theta.exp(),
    };
    Ok((antichain, stats))
}

fn threshold_log(spec: &RifsSpec, r: f64, n: usize) -> f64 {
    spec.min_prob().ln() + r * spec.min_ratio().ln() - (n as f64).ln()
}

/// Upper bound on member depth for a weight cut at `log_theta`: each letter
/// multiplies the weight by at most `p_max c_max^r < 1`.
fn max_cut_depth(spec: &RifsSpec, r: f64, log_theta: f64) -> usize {
    let per_letter = spec.max_prob().ln() + r * spec.max_ratio().ln();
    (log_theta / per_letter).ceil() as usize + 1
}

#[allow(clippy::too_many_arguments)]
fn descend_cut(
    spec: &RifsSpec,
    letters: &[u8],
    r: f64,
    log_theta: f64,
    sigma: &mut CylinderIndex,
    log_w: f64,
    out: &mut Vec<CylinderGeom>,
    budget: u64,
) -> Result<()> {
    if !sigma.is_empty() && log_w < log_theta - TIE_TOL {
        if out.len() as u64 >= budget {
            return Err(RifsError::BudgetExceeded {
                needed: out.len() as u128 + 1,
                budget,
            });
        }
        out.push(compose(spec, letters, sigma, None)?);
        return Ok(());
    }
    if sigma.len() >= letters.len() {
        return Err(RifsError::InternalInvariant(
            "weight cut descended past its depth bound".into(),
        ));
    }
    let comp = letters[sigma.len()] as usize;
    let ifs = &spec.components[comp];
    for j in 0..ifs.len() {
        let step = ifs.probs[j].ln() + r * ifs.maps[j].ratio.ln();
        sigma.push(j as u8);
        descend_cut(spec, letters, r, log_theta, sigma, log_w + step, out, budget)?;
        sigma.pop();
    }
    Ok(())
}

/// Streams `GammaStats` for every `n` in `ns` (strictly increasing) in one
/// pass, refining leaves as the weight cut drops instead of rebuilding the
/// antichain per `n`. Matches `build_gamma` exactly.
pub fn gamma_sequence(
    spec: &RifsSpec,
    word: &Word,
    r: f64,
    ns: &[usize],
    budget: u64,
) -> Result<Vec<GammaStats>> {
    if ns.is_empty() {
        return Ok(Vec::new());
    }
    if ns[0] == 0 {
        return Err(RifsError::DegenerateInput("weight cut needs n >= 1".into()));
    }
    if ns.windows(2).any(|w| w[0] >= w[1]) {
        return Err(RifsError::DegenerateInput(
            "gamma_sequence needs strictly increasing n".into(),
        ));
    }
    let deepest_theta = threshold_log(spec, r, ns[ns.len() - 1]);
    let letters = word.prefix(max_cut_depth(spec, r, deepest_theta))?;

    // leaves of the current antichain, keyed by log weight (max-heap)
    #[derive(PartialEq)]
    struct Leaf {
        log_w: f64,
        depth: usize,
    }
    impl Eq for Leaf {}
    impl PartialOrd for Leaf {
        fn partial_cmp(&self, other: &Self) -> Option<std::cmp::Ordering> {
            Some(self.cmp(other))
        }
    }
    impl Ord for Leaf {
        fn cmp(&self, other: &Self) -> std::cmp::Ordering {
            self.log_w.total_cmp(&other.log_w)
        }
    }

    let mut heap = std::collections::BinaryHeap::new();
    let mut depth_counts: std::collections::BTreeMap<usize, usize> = Default::default();
    let mut total: u64 = 0;
    let push = |heap: &mut std::collections::BinaryHeap<Leaf>,
                    counts: &mut std::collections::BTreeMap<usize, usize>,
                    total: &mut u64,
                    leaf: Leaf|
     -> Result<()> {
        *counts.entry(leaf.depth).or_default() += 1;
        *total += 1;
        if *total > budget {
            return Err(RifsError::BudgetExceeded {
                needed: *total as u128,
                budget,
            });
        }
        heap.push(leaf);
        Ok(())
    };
    push(
        &mut heap,
        &mut depth_counts,
        &mut total,
        Leaf {
            log_w: 0.0,
            depth: 0,
        },
    )?;

    let mut out = Vec::with_capacity(ns.len());
    for &n in ns {
        let log_theta = threshold_log(spec, r, n);
        while let Some(top) = heap.peek() {
            let descend = top.depth == 0 || top.log_w >= log_theta - TIE_TOL;
            if !descend {
                break;
            }
            let leaf = heap.pop().unwrap();
            *depth_counts.get_mut(&leaf.depth).unwrap() -= 1;
            if depth_counts[&leaf.depth] == 0 {
                depth_counts.remove(&leaf.depth);
            }
            total -= 1;
            let comp = letters[leaf.depth] as usize;
            let ifs = &spec.components[comp];
            for j in 0..ifs.len() {
                let step = ifs.probs[j].ln() + r * ifs.maps[j].ratio.ln();
                push(
                    &mut heap,
                    &mut depth_counts,
                    &mut total,
                    Leaf {
                        log_w: leaf.log_w + step,
                        depth: leaf.depth + 1,
                    },
                )?;
            }
        }
        out.push(GammaStats {
            n,
            phi: total as usize,
            l1: depth_counts.keys().next().copied().unwrap_or(0),
            l2: depth_counts.keys().next_back().copied().unwrap_or(0),
            threshold: log_theta.exp(),
        });
    }
    Ok(out)
}

/// Checks that `members` is a finite maximal antichain for the word: no
/// member prefixes another, and below every interior node the full alphabet
/// of the active component is covered.
pub fn validate_fma(spec: &RifsSpec, word: &Word, members: &[CylinderIndex]) -> Result<()> {
    if members.is_empty() {
        return Err(RifsError::NotAnFma("empty set".into()));
    }
    let max_depth = members.iter().map(Vec::len).max().unwrap();
    let letters = word.prefix(max_depth)?;
    for m in members {
        if m.is_empty() {
            return Err(RifsError::NotAnFma("contains the empty string".into()));
        }
        for (k, &s) in m.iter().enumerate() {
            spec.check_symbol(letters[k] as usize, s as usize)?;
        }
    }
    let mut sorted: Vec<&CylinderIndex> = members.iter().collect();
    sorted.sort();
    for w in sorted.windows(2) {
        if w[1].starts_with(w[0]) {
            return Err(RifsError::NotAnFma(format!(
                "{} is a prefix of {}",
                format_sigma(w[0]),
                format_sigma(w[1])
            )));
        }
    }
    check_cover(spec, &letters, &sorted, 0)
}

/// Recursive maximality check over the sorted, prefix-free member list:
/// `group` holds the members below the current node, `depth` its level.
fn check_cover(
    spec: &RifsSpec,
    letters: &[u8],
    group: &[&CylinderIndex],
    depth: usize,
) -> Result<()> {
    if group.len() == 1 && group[0].len() == depth {
        return Ok(()); // a member leaf
    }
    let comp = letters[depth] as usize;
    let alphabet = spec.alphabet(comp);
    let mut at = 0usize;
    for j in 0..alphabet as u8 {
        let start = at;
        while at < group.len() && group[at][depth] == j {
            at += 1;
        }
        if start == at {
            return Err(RifsError::NotAnFma(format!(
                "missing branch {j} under {}",
                format_sigma(&group[start.min(group.len() - 1)][..depth])
            )));
        }
        check_cover(spec, letters, &group[start..at], depth + 1)?;
    }
    if at != group.len() {
        return Err(RifsError::NotAnFma("unexpected trailing members".into()));
    }
    Ok(())
}
