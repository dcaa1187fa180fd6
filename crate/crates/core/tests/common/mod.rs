//! Reference implementations used as test oracles. They follow the update
//! equations directly, with plain products instead of log-space sums, and
//! share no code with the library.
#![allow(dead_code)]

use proptest::prelude::*;

/// A small annotation instance as `(worker, task, label)` triples.
#[derive(Debug, Clone)]
pub struct Instance {
    pub k: usize,
    pub n: usize,
    pub m: usize,
    pub triples: Vec<(usize, usize, usize)>,
}

impl Instance {
    pub fn dataset(&self) -> wtim::Dataset {
        wtim::Dataset::from_triples(self.k, &self.triples).unwrap()
    }

    pub fn votes(&self, task: usize) -> impl Iterator<Item = (usize, usize)> + '_ {
        self.triples
            .iter()
            .filter(move |t| t.1 == task)
            .map(|t| (t.0, t.2))
    }
}

pub fn confidence(d: f64, e: f64, k: usize) -> f64 {
    let e = e.max(1e-6);
    d * (1.0 / k as f64) + (1.0 - d) * e.powf(d)
}

fn lik(a: usize, truth: usize, p: f64, k: usize) -> f64 {
    if a == truth {
        p
    } else {
        (1.0 - p) / (k as f64 - 1.0)
    }
}

/// Posterior of one task from `(label, confidence)` votes by direct product.
pub fn posterior(votes: &[(usize, f64)], k: usize) -> Vec<f64> {
    let joint: Vec<f64> = (0..k)
        .map(|c| votes.iter().map(|&(a, p)| lik(a, c, p, k)).product::<f64>() / k as f64)
        .collect();
    let z: f64 = joint.iter().sum();
    if z == 0.0 {
        return vec![1.0 / k as f64; k];
    }
    joint.into_iter().map(|x| x / z).collect()
}

pub fn wtim_posteriors(inst: &Instance, d: &[f64], e: &[f64]) -> Vec<Vec<f64>> {
    (0..inst.n)
        .map(|i| {
            let votes: Vec<(usize, f64)> = inst
                .votes(i)
                .map(|(w, a)| (a, confidence(d[i], e[w], inst.k)))
                .collect();
            posterior(&votes, inst.k)
        })
        .collect()
}

pub fn zc_posteriors(inst: &Instance, acc: &[f64]) -> Vec<Vec<f64>> {
    (0..inst.n)
        .map(|i| {
            let votes: Vec<(usize, f64)> = inst.votes(i).map(|(w, a)| (a, acc[w])).collect();
            posterior(&votes, inst.k)
        })
        .collect()
}

/// DS posteriors; `matrices[w][r][c]` is P(answer c | truth r).
pub fn ds_posteriors(inst: &Instance, matrices: &[Vec<Vec<f64>>], priors: &[f64]) -> Vec<Vec<f64>> {
    (0..inst.n)
        .map(|i| {
            let joint: Vec<f64> = (0..inst.k)
                .map(|r| {
                    priors[r]
                        * inst
                            .votes(i)
                            .map(|(w, a)| matrices[w][r][a])
                            .product::<f64>()
                })
                .collect();
            let z: f64 = joint.iter().sum();
            joint.into_iter().map(|x| x / z).collect()
        })
        .collect()
}

/// Log marginal likelihood by summing over every joint labeling of all
/// tasks (k^n terms).
pub fn log_likelihood_enumerated(inst: &Instance, d: &[f64], e: &[f64]) -> f64 {
    let total = inst.k.pow(inst.n as u32);
    let mut sum = 0.0;
    for code in 0..total {
        let mut labels = Vec::with_capacity(inst.n);
        let mut c = code;
        for _ in 0..inst.n {
            labels.push(c % inst.k);
            c /= inst.k;
        }
        let mut prob = (1.0 / inst.k as f64).powi(inst.n as i32);
        for &(w, t, a) in &inst.triples {
            prob *= lik(a, labels[t], confidence(d[t], e[w], inst.k), inst.k);
        }
        sum += prob;
    }
    sum.ln()
}

fn argmax(p: &[f64]) -> usize {
    let mut best = 0;
    for c in 1..p.len() {
        if p[c] > p[best] + 16.0 * f64::EPSILON {
            best = c;
        }
    }
    best
}

fn weight(d: f64) -> f64 {
    if d >= 0.4 {
        1.0 - (d - 0.4) / 0.6
    } else {
        1.0 - (0.4 - d) / 0.4
    }
}

/// Result of the step-by-step replay.
#[derive(Debug, Clone)]
pub struct Replay {
    pub labels: Vec<usize>,
    pub difficulties: Vec<f64>,
    pub abilities: Vec<f64>,
    pub iterations: usize,
}

/// Majority-vote start, then rounds of posterior / error-rate difficulty /
/// weighted correct-rate ability, stopping when both parameter vectors move
/// less than `tol`.
pub fn wtim_replay(inst: &Instance, max_iters: usize, tol: f64) -> Replay {
    let k = inst.k;
    let mut labels: Vec<usize> = (0..inst.n)
        .map(|i| {
            let mut count = vec![0.0; k];
            for (_, a) in inst.votes(i) {
                count[a] += 1.0;
            }
            argmax(&count)
        })
        .collect();
    let diff_of = |labels: &[usize]| -> Vec<f64> {
        (0..inst.n)
            .map(|i| {
                let v: Vec<_> = inst.votes(i).collect();
                let hit = v.iter().filter(|&&(_, a)| a == labels[i]).count();
                1.0 - hit as f64 / v.len() as f64
            })
            .collect()
    };
    let mut d = diff_of(&labels);
    let mut e: Vec<f64> = (0..inst.m)
        .map(|w| {
            let mine: Vec<_> = inst.triples.iter().filter(|t| t.0 == w).collect();
            let hit = mine.iter().filter(|t| t.2 == labels[t.1]).count();
            (hit as f64 / mine.len() as f64).max(1e-6)
        })
        .collect();
    let mut iterations = 0;
    for round in 1..=max_iters {
        iterations = round;
        let post = wtim_posteriors(inst, &d, &e);
        labels = post.iter().map(|p| argmax(p)).collect();
        let nd = diff_of(&labels);
        let ne: Vec<f64> = (0..inst.m)
            .map(|w| {
                let mine: Vec<_> = inst.triples.iter().filter(|t| t.0 == w).collect();
                let den: f64 = mine.iter().map(|t| weight(nd[t.1])).sum();
                let num: f64 = mine
                    .iter()
                    .filter(|t| t.2 == labels[t.1])
                    .map(|t| weight(nd[t.1]))
                    .sum();
                let val = if den < 1e-9 {
                    let hit = mine.iter().filter(|t| t.2 == labels[t.1]).count();
                    hit as f64 / mine.len() as f64
                } else {
                    num / den
                };
                val.clamp(1e-6, 1.0)
            })
            .collect();
        let dd = d
            .iter()
            .zip(&nd)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max);
        let de = e
            .iter()
            .zip(&ne)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max);
        d = nd;
        e = ne;
        if dd < tol && de < tol {
            break;
        }
    }
    Replay {
        labels,
        difficulties: d,
        abilities: e,
        iterations,
    }
}

/// Random instances with up to `max_n` tasks, `max_m` workers and labels in
/// `[2, max_k]`. Every worker annotates at least one task and every task is
/// annotated at least once.
pub fn instance(max_n: usize, max_m: usize, max_k: usize) -> impl Strategy<Value = Instance> {
    (1..=max_n, 1..=max_m, 2..=max_k)
        .prop_flat_map(|(n, m, k)| {
            let cells = proptest::collection::vec((any::<bool>(), 0..k), n * m);
            (Just((n, m, k)), cells)
        })
        .prop_map(|((n, m, k), cells)| {
            let mut triples = Vec::new();
            for t in 0..n {
                for w in 0..m {
                    let (present, label) = cells[t * m + w];
                    // diagonal cells always present so nobody is idle
                    if present || w == t % m || t == w % n {
                        triples.push((w, t, label));
                    }
                }
            }
            Instance { k, n, m, triples }
        })
}

/// Same shape as [`instance`], drawn from a seeded generator.
pub fn random_instance<R: rand::Rng>(
    rng: &mut R,
    max_n: usize,
    max_m: usize,
    max_k: usize,
) -> Instance {
    let n = rng.gen_range(1..=max_n);
    let m = rng.gen_range(1..=max_m);
    let k = rng.gen_range(2..=max_k);
    let mut triples = Vec::new();
    for t in 0..n {
        for w in 0..m {
            if rng.gen_bool(0.6) || w == t % m || t == w % n {
                triples.push((w, t, rng.gen_range(0..k)));
            }
        }
    }
    Instance { k, n, m, triples }
}
