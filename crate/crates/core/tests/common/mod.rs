#![allow(dead_code)]

use std::collections::VecDeque;

use ndarray::{Array1, Array2};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use se2diffuse::{Image2D, Mask, OrientationStack};

/// `exp(a)` by scaling and squaring with a truncated Taylor series.
pub fn expm(a: &Array2<f64>) -> Array2<f64> {
    let n = a.nrows();
    let norm = a
        .rows()
        .into_iter()
        .map(|r| r.iter().map(|v| v.abs()).sum::<f64>())
        .fold(0.0, f64::max);
    let squarings = if norm > 0.5 { (norm / 0.5).log2().ceil() as i32 } else { 0 };
    let scaled = a / 2f64.powi(squarings);
    let mut result = Array2::<f64>::eye(n);
    let mut term = Array2::<f64>::eye(n);
    for k in 1..=20 {
        term = term.dot(&scaled) / k as f64;
        result += &term;
    }
    for _ in 0..squarings {
        result = result.dot(&result);
    }
    result
}

pub fn random_stack(rows: usize, cols: usize, n_theta: usize, seed: u64) -> OrientationStack {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let values: Vec<f64> = (0..rows * cols * n_theta).map(|_| rng.random::<f64>()).collect();
    OrientationStack::from_fn(rows, cols, n_theta, |r, c, k| values[(k * rows + r) * cols + c]).unwrap()
}

pub fn flatten(stack: &OrientationStack) -> Array1<f64> {
    Array1::from(stack.to_vec())
}

pub fn rel_l2(a: &[f64], b: &[f64]) -> f64 {
    let num: f64 = a.iter().zip(b).map(|(x, y)| (x - y).powi(2)).sum();
    let den: f64 = b.iter().map(|y| y * y).sum();
    (num / den).sqrt()
}

pub fn max_abs_diff(a: &Image2D, b: &Image2D) -> f64 {
    a.data()
        .iter()
        .zip(b.data().iter())
        .map(|(x, y)| (x - y).abs())
        .fold(0.0, f64::max)
}

/// Number of 4-connected components of `{ v > threshold }`.
pub fn components(image: &Image2D, threshold: f64) -> usize {
    let (rows, cols) = image.dim();
    let mut seen = vec![false; rows * cols];
    let mut count = 0;
    for start in 0..rows * cols {
        if seen[start] || image.get(start / cols, start % cols) <= threshold {
            continue;
        }
        count += 1;
        seen[start] = true;
        let mut queue = VecDeque::from([start]);
        while let Some(i) = queue.pop_front() {
            let (r, c) = (i / cols, i % cols);
            let mut visit = |rr: usize, cc: usize| {
                let j = rr * cols + cc;
                if !seen[j] && image.get(rr, cc) > threshold {
                    seen[j] = true;
                    queue.push_back(j);
                }
            };
            if r > 0 {
                visit(r - 1, c);
            }
            if r + 1 < rows {
                visit(r + 1, c);
            }
            if c > 0 {
                visit(r, c - 1);
            }
            if c + 1 < cols {
                visit(r, c + 1);
            }
        }
    }
    count
}

pub fn random_mask(rows: usize, cols: usize, p: f64, seed: u64) -> Mask {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let bits: Vec<bool> = (0..rows * cols).map(|_| rng.random::<f64>() < p).collect();
    Mask::from_fn(rows, cols, |r, c| bits[r * cols + c])
}
