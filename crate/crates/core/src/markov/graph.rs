//! Connectivity and primitivity of the transition graph.
//!
//! Only edges with positive probability count as arcs; a zero-probability edge
//! can never fire.

use std::collections::VecDeque;

use serde::Serialize;

use super::MarkovSystemSpec;

fn adjacency(spec: &MarkovSystemSpec) -> Vec<Vec<usize>> {
    let n = spec.vertex_count();
    let mut adj = vec![Vec::new(); n];
    for e in &spec.edges {
        if e.prob > 0.0 && e.source < n && e.target < n && !adj[e.source].contains(&e.target) {
            adj[e.source].push(e.target);
        }
    }
    adj
}

fn reaches_all(adj: &[Vec<usize>], start: usize) -> bool {
    let mut seen = vec![false; adj.len()];
    seen[start] = true;
    let mut queue = VecDeque::from([start]);
    let mut count = 1;
    while let Some(v) = queue.pop_front() {
        for &w in &adj[v] {
            if !seen[w] {
                seen[w] = true;
                count += 1;
                queue.push_back(w);
            }
        }
    }
    count == adj.len()
}

/// True iff every vertex reaches every other vertex along directed arcs.
pub fn strongly_connected(spec: &MarkovSystemSpec) -> bool {
    let adj = adjacency(spec);
    if adj.is_empty() {
        return false;
    }
    let mut rev = vec![Vec::new(); adj.len()];
    for (v, outs) in adj.iter().enumerate() {
        for &w in outs {
            rev[w].push(v);
        }
    }
    reaches_all(&adj, 0) && reaches_all(&rev, 0)
}

/// `(n - 1)^2 + 1`, the largest possible primitivity exponent of an `n x n` matrix.
pub fn wielandt_bound(n: usize) -> usize {
    if n == 0 {
        0
    } else {
        (n - 1) * (n - 1) + 1
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub struct Primitivity {
    pub primitive: bool,
    /// Smallest `m` with `A^m > 0`, when one exists.
    pub exponent: Option<usize>,
}

/// Boolean matrix with rows packed into 64-bit words.
#[derive(Clone, PartialEq, Eq)]
struct BitMatrix {
    n: usize,
    words: usize,
    bits: Vec<u64>,
}

impl BitMatrix {
    fn from_adjacency(adj: &[Vec<usize>]) -> Self {
        let n = adj.len();
        let words = n.div_ceil(64);
        let mut bits = vec![0u64; n * words];
        for (i, outs) in adj.iter().enumerate() {
            for &j in outs {
                bits[i * words + j / 64] |= 1 << (j % 64);
            }
        }
        BitMatrix { n, words, bits }
    }

    fn row(&self, i: usize) -> &[u64] {
        &self.bits[i * self.words..(i + 1) * self.words]
    }

    fn get(&self, i: usize, j: usize) -> bool {
        self.bits[i * self.words + j / 64] >> (j % 64) & 1 == 1
    }

    /// Boolean product `self * rhs`: row i is the OR of rhs rows j with self[i][j].
    fn mul(&self, rhs: &BitMatrix) -> BitMatrix {
        let mut bits = vec![0u64; self.bits.len()];
        for i in 0..self.n {
            let out = &mut bits[i * self.words..(i + 1) * self.words];
            for j in 0..self.n {
                if self.get(i, j) {
                    for (o, r) in out.iter_mut().zip(rhs.row(j)) {
                        *o |= r;
                    }
                }
            }
        }
        BitMatrix {
            n: self.n,
            words: self.words,
            bits,
        }
    }

    fn all_positive(&self) -> bool {
        let full_words = self.n / 64;
        let tail = self.n % 64;
        (0..self.n).all(|i| {
            let row = self.row(i);
            row[..full_words].iter().all(|w| *w == u64::MAX)
                && (tail == 0 || row[full_words] == (1u64 << tail) - 1)
        })
    }
}

/// Tests primitivity by boolean powers `A, A^2, ..` up to the Wielandt bound.
pub fn is_primitive(spec: &MarkovSystemSpec) -> Primitivity {
    let not = Primitivity {
        primitive: false,
        exponent: None,
    };
    if !strongly_connected(spec) {
        return not;
    }
    let adj = adjacency(spec);
    let base = BitMatrix::from_adjacency(&adj);
    let mut power = base.clone();
    for m in 1..=wielandt_bound(adj.len()) {
        if power.all_positive() {
            return Primitivity {
                primitive: true,
                exponent: Some(m),
            };
        }
        power = power.mul(&base);
    }
    not
}
