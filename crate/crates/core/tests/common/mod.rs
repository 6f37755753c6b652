//! Reference implementations used as test oracles. Each one is written the
//! slow, obvious way and shares no code with the library.

#![allow(dead_code)]

use std::path::PathBuf;

use plate_toolkit::annot::BoundingBox;
use plate_toolkit::seqdecode::{DecodeError, StepProvider, TokenId};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub fn fixture(rel: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("tests/fixtures").join(rel)
}

pub fn fixture_text(rel: &str) -> String {
    std::fs::read_to_string(fixture(rel)).unwrap()
}

// ---- IoU ---------------------------------------------------------------

/// IoU by counting cell centers of a `grid`×`grid` raster over
/// `[0, extent)²` that fall inside each box.
pub fn pixel_iou(a: &BoundingBox, b: &BoundingBox, extent: f64, grid: usize) -> f64 {
    let cell = extent / grid as f64;
    let inside = |bx: &BoundingBox, x: f64, y: f64| x >= bx.x_min && x < bx.x_max && y >= bx.y_min && y < bx.y_max;
    let (mut both, mut either) = (0u64, 0u64);
    for i in 0..grid {
        let y = (i as f64 + 0.5) * cell;
        for j in 0..grid {
            let x = (j as f64 + 0.5) * cell;
            let (ia, ib) = (inside(a, x, y), inside(b, x, y));
            both += u64::from(ia && ib);
            either += u64::from(ia || ib);
        }
    }
    if either == 0 {
        0.0
    } else {
        both as f64 / either as f64
    }
}

// ---- edit distance ------------------------------------------------------

/// Textbook exponential recursion.
pub fn recursive_levenshtein<T: PartialEq>(a: &[T], b: &[T]) -> usize {
    match (a.split_first(), b.split_first()) {
        (None, _) => b.len(),
        (_, None) => a.len(),
        (Some((x, ra)), Some((y, rb))) => {
            if x == y {
                recursive_levenshtein(ra, rb)
            } else {
                1 + recursive_levenshtein(ra, b)
                    .min(recursive_levenshtein(a, rb))
                    .min(recursive_levenshtein(ra, rb))
            }
        }
    }
}

// ---- decoding -------------------------------------------------------------

pub const BOS: TokenId = 0;
pub const EOS: TokenId = 1;

/// Deterministic random distributions keyed by prefix.
#[derive(Clone, Copy)]
pub struct RandomProvider {
    pub seed: u64,
    pub vocab: usize,
}

impl RandomProvider {
    pub fn row(&self, prefix: &[TokenId]) -> Vec<f64> {
        let key = prefix
            .iter()
            .fold(self.seed.wrapping_mul(0x9E37_79B9_7F4A_7C15), |h, &t| {
                (h ^ (t as u64 + 1)).wrapping_mul(0x100_0000_01B3)
            });
        let mut rng = ChaCha8Rng::seed_from_u64(key);
        let logits: Vec<f64> = (0..self.vocab).map(|_| rng.random_range(-3.0..3.0)).collect();
        let max = logits.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let lse = max + logits.iter().map(|l| (l - max).exp()).sum::<f64>().ln();
        logits.iter().map(|l| l - lse).collect()
    }
}

impl StepProvider for RandomProvider {
    fn log_probs(&self, prefix: &[TokenId]) -> Result<Vec<f64>, DecodeError> {
        Ok(self.row(prefix))
    }
}

fn has_repeated_ngram(tokens: &[TokenId], n: usize) -> bool {
    if n == 0 || tokens.len() < n {
        return false;
    }
    let grams: Vec<&[TokenId]> = tokens.windows(n).collect();
    (0..grams.len()).any(|i| (i + 1..grams.len()).any(|j| grams[i] == grams[j]))
}

/// Best complete sequence by `sum / len^penalty` among every sequence that
/// ends in EOS or reaches `max_len` generated tokens, skipping sequences
/// that repeat an `ngram`-gram. Ties go to the lexicographically smaller
/// token list. Returns `(score, tokens with BOS)`.
pub fn exhaustive_best(
    provider: &dyn Fn(&[TokenId]) -> Vec<f64>,
    max_len: usize,
    penalty: f64,
    ngram: usize,
) -> Option<(f64, Vec<TokenId>)> {
    fn walk(
        provider: &dyn Fn(&[TokenId]) -> Vec<f64>,
        prefix: &mut Vec<TokenId>,
        sum: f64,
        max_len: usize,
        penalty: f64,
        ngram: usize,
        best: &mut Option<(f64, Vec<TokenId>)>,
    ) {
        let row = provider(prefix);
        for (t, &lp) in row.iter().enumerate() {
            if lp == f64::NEG_INFINITY {
                continue;
            }
            prefix.push(t as TokenId);
            if !has_repeated_ngram(prefix, ngram) {
                let s = sum + lp;
                let len = prefix.len() - 1;
                if t as TokenId == EOS || len == max_len {
                    let score = s / (len as f64).powf(penalty);
                    let better = match best {
                        None => true,
                        Some((bs, bt)) => score > *bs || (score == *bs && prefix.as_slice() < bt.as_slice()),
                    };
                    if better {
                        *best = Some((score, prefix.clone()));
                    }
                } else {
                    walk(provider, prefix, s, max_len, penalty, ngram, best);
                }
            }
            prefix.pop();
        }
    }
    let mut best = None;
    walk(provider, &mut vec![BOS], 0.0, max_len, penalty, ngram, &mut best);
    best
}

/// Branch and bound for mean log-probability (penalty 1) over long
/// horizons. `step_max[k]` bounds every log-probability at step `k`.
pub fn bounded_best(
    provider: &dyn Fn(&[TokenId]) -> Vec<f64>,
    step_max: &[f64],
    max_len: usize,
) -> (f64, Vec<TokenId>) {
    fn bound(sum: f64, len: usize, step_max: &[f64], max_len: usize) -> f64 {
        // Best mean over any continuation of k more tokens.
        let mut acc = sum;
        let mut best = f64::NEG_INFINITY;
        for (k, m) in step_max.iter().enumerate().take(max_len).skip(len) {
            acc += m;
            best = best.max(acc / (k + 1) as f64);
        }
        best
    }
    fn walk(
        provider: &dyn Fn(&[TokenId]) -> Vec<f64>,
        prefix: &mut Vec<TokenId>,
        sum: f64,
        step_max: &[f64],
        max_len: usize,
        best: &mut (f64, Vec<TokenId>),
    ) {
        let len = prefix.len() - 1;
        if bound(sum, len, step_max, max_len) < best.0 {
            return;
        }
        let row = provider(prefix);
        for (t, &lp) in row.iter().enumerate() {
            if lp == f64::NEG_INFINITY {
                continue;
            }
            prefix.push(t as TokenId);
            let s = sum + lp;
            if t as TokenId == EOS || len + 1 == max_len {
                let score = s / (len + 1) as f64;
                if score > best.0 || (score == best.0 && prefix.as_slice() < best.1.as_slice()) {
                    *best = (score, prefix.clone());
                }
            } else {
                walk(provider, prefix, s, step_max, max_len, best);
            }
            prefix.pop();
        }
    }
    let mut best = (f64::NEG_INFINITY, Vec::new());
    walk(provider, &mut vec![BOS], 0.0, step_max, max_len, &mut best);
    best
}

/// Argmax at every step (lowest id on ties) until EOS or `max_len`.
pub fn greedy(provider: &dyn Fn(&[TokenId]) -> Vec<f64>, max_len: usize) -> Vec<TokenId> {
    let mut tokens = vec![BOS];
    for _ in 0..max_len {
        let row = provider(&tokens);
        let mut arg = 0;
        for (t, &lp) in row.iter().enumerate() {
            if lp > row[arg] {
                arg = t;
            }
        }
        tokens.push(arg as TokenId);
        if arg as TokenId == EOS {
            break;
        }
    }
    tokens
}

// ---- geometry -------------------------------------------------------------

type Mat3 = [[f64; 3]; 3];

fn mul(a: &Mat3, b: &Mat3) -> Mat3 {
    let mut out = [[0.0; 3]; 3];
    for i in 0..3 {
        for j in 0..3 {
            out[i][j] = (0..3).map(|k| a[i][k] * b[k][j]).sum();
        }
    }
    out
}

/// Homogeneous matrix for translate·(center)·scale·rotate·shear·(−center),
/// built from elementary factors. Rotation is counter-clockwise on screen
/// (y down), shear is along x.
pub fn affine_matrix(w: f64, h: f64, rotation_deg: f64, tx: f64, ty: f64, scale: f64, shear_deg: f64) -> Mat3 {
    let t = |dx: f64, dy: f64| [[1.0, 0.0, dx], [0.0, 1.0, dy], [0.0, 0.0, 1.0]];
    let r = rotation_deg.to_radians();
    let rot = [[r.cos(), r.sin(), 0.0], [-r.sin(), r.cos(), 0.0], [0.0, 0.0, 1.0]];
    let sc = [[scale, 0.0, 0.0], [0.0, scale, 0.0], [0.0, 0.0, 1.0]];
    let sh = [[1.0, shear_deg.to_radians().tan(), 0.0], [0.0, 1.0, 0.0], [0.0, 0.0, 1.0]];
    let centered = mul(&sc, &mul(&rot, &sh));
    mul(&t(w / 2.0 + tx * w, h / 2.0 + ty * h), &mul(&centered, &t(-w / 2.0, -h / 2.0)))
}

/// Maps a dense sample of the box outline, takes the hull, clips it and
/// applies the survival rule (clipped area ≥ 1 and ≥ 10% of the hull).
/// Also returns the hull and the clipped-to-hull area ratio.
pub fn point_set_box(m: &Mat3, b: &BoundingBox, w: f64, h: f64) -> (Option<[f64; 4]>, [f64; 4], f64) {
    const STEPS: usize = 32;
    let mut pts = Vec::new();
    for i in 0..=STEPS {
        let f = i as f64 / STEPS as f64;
        let x = b.x_min + f * (b.x_max - b.x_min);
        let y = b.y_min + f * (b.y_max - b.y_min);
        pts.extend([(x, b.y_min), (x, b.y_max), (b.x_min, y), (b.x_max, y)]);
    }
    let mapped: Vec<(f64, f64)> = pts
        .iter()
        .map(|&(x, y)| (m[0][0] * x + m[0][1] * y + m[0][2], m[1][0] * x + m[1][1] * y + m[1][2]))
        .collect();
    let hull = [
        mapped.iter().map(|p| p.0).fold(f64::INFINITY, f64::min),
        mapped.iter().map(|p| p.1).fold(f64::INFINITY, f64::min),
        mapped.iter().map(|p| p.0).fold(f64::NEG_INFINITY, f64::max),
        mapped.iter().map(|p| p.1).fold(f64::NEG_INFINITY, f64::max),
    ];
    let c = [hull[0].clamp(0.0, w), hull[1].clamp(0.0, h), hull[2].clamp(0.0, w), hull[3].clamp(0.0, h)];
    let clipped_area = (c[2] - c[0]).max(0.0) * (c[3] - c[1]).max(0.0);
    let hull_area = (hull[2] - hull[0]) * (hull[3] - hull[1]);
    let ratio = clipped_area / hull_area;
    let keep = clipped_area >= 1.0 && ratio >= 0.1;
    (keep.then_some(c), hull, ratio)
}
