#![allow(dead_code)]

use glass_entropy::cones::{verify_trapping, TrappingReport};
use glass_entropy::graph::CycleWord;
use glass_entropy::netspec::{parse_network, BoxLabel, NetworkSpec};
use glass_entropy::rational::{q, Q};
use num_traits::{Signed, Zero};

pub const NETWORK: &str = include_str!("../../fixtures/example_network.json");
pub const TRAP: &str = include_str!("../../fixtures/example_trap.json");

pub const CYCLE_A: [&str; 8] = ["1110", "1010", "0010", "0000", "0100", "0110", "0111", "1111"];
pub const CYCLE_B: [&str; 10] = ["1110", "1010", "0010", "0011", "0001", "0000", "0100", "0101", "0111", "1111"];

pub fn spec() -> NetworkSpec {
    parse_network(NETWORK).expect("example network parses")
}

pub fn b(s: &str) -> BoxLabel {
    BoxLabel::parse(s).expect("valid bitstring")
}

pub fn edge() -> (BoxLabel, BoxLabel) {
    (b("1111"), b("1110"))
}

pub fn cycle(label: &str, boxes: &[&str]) -> CycleWord {
    CycleWord::new(label, boxes.iter().map(|s| b(s)).collect())
}

pub fn cycle_a() -> CycleWord {
    cycle("A", &CYCLE_A)
}

pub fn cycle_b() -> CycleWord {
    cycle("B", &CYCLE_B)
}

pub fn trap(spec: &NetworkSpec) -> TrappingReport {
    verify_trapping(spec, edge(), &[cycle_a(), cycle_b()]).expect("trap builds")
}

/// Concatenation of the trap's cycles along `word`.
pub fn concat(trap: &TrappingReport, word: &[usize]) -> CycleWord {
    let parts: Vec<&CycleWord> = word.iter().map(|&i| &trap.cycles[i]).collect();
    CycleWord::concat(&parts)
}

pub fn qrows(rows: &[&[i64]]) -> Vec<Vec<Q>> {
    rows.iter().map(|r| r.iter().map(|&x| q(x)).collect()).collect()
}

pub fn qvec(v: &[(i64, i64)]) -> Vec<Q> {
    v.iter().map(|&(n, d)| Q::new(n.into(), d.into())).collect()
}

/// Exact feasibility of `{y : row·y ≥ 1 for every row}` by Fourier–Motzkin
/// elimination. For a homogeneous system this is equivalent to the open cone
/// `{row·y > 0}` being nonempty.
pub fn strictly_feasible(rows: &[Vec<Q>]) -> bool {
    let mut system: Vec<(Vec<Q>, Q)> =
        rows.iter().filter(|r| r.iter().any(|x| !x.is_zero())).map(|r| (r.clone(), q(1))).collect();
    let dim = rows.first().map_or(0, Vec::len);
    for var in 0..dim {
        let (mut pos, mut neg, mut rest) = (Vec::new(), Vec::new(), Vec::new());
        for (a, rhs) in system {
            if a[var].is_positive() {
                pos.push((a, rhs));
            } else if a[var].is_negative() {
                neg.push((a, rhs));
            } else {
                rest.push((a, rhs));
            }
        }
        for (p, pr) in &pos {
            for (n, nr) in &neg {
                let (sp, sn) = (-n[var].clone(), p[var].clone());
                let a: Vec<Q> = p.iter().zip(n).map(|(x, y)| x * &sp + y * &sn).collect();
                rest.push((a, pr * &sp + nr * &sn));
            }
        }
        rest.sort();
        rest.dedup();
        system = rest;
    }
    system.iter().all(|(_, rhs)| !rhs.is_positive())
}

/// Characteristic polynomial `det(xI − A)` of a dense 0/1 matrix by the
/// Faddeev–LeVerrier recurrence, coefficients from `x^0` upwards.
pub fn characteristic_polynomial(adj: &[Vec<usize>]) -> Vec<Q> {
    let n = adj.len();
    let mut a = vec![vec![q(0); n]; n];
    for (i, row) in adj.iter().enumerate() {
        for &j in row {
            a[i][j] = q(1);
        }
    }
    let mut coeffs = vec![q(0); n + 1];
    coeffs[n] = q(1);
    let mut m = vec![vec![q(0); n]; n];
    for k in 1..=n {
        // M_k = A M_{k-1} + c_{n-k+1} I
        let mut next = vec![vec![q(0); n]; n];
        for i in 0..n {
            for j in 0..n {
                let mut s = q(0);
                for l in 0..n {
                    if !a[i][l].is_zero() {
                        s += &m[l][j];
                    }
                }
                next[i][j] = s;
            }
            next[i][i] += &coeffs[n - k + 1];
        }
        m = next;
        let mut trace = q(0);
        for i in 0..n {
            for l in 0..n {
                if !a[i][l].is_zero() {
                    trace += &m[l][i];
                }
            }
        }
        coeffs[n - k] = -trace / q(k as i64);
    }
    coeffs
}

fn eval(p: &[Q], x: &Q) -> Q {
    p.iter().rev().fold(q(0), |acc, c| acc * x + c)
}

fn trim(mut p: Vec<Q>) -> Vec<Q> {
    while p.len() > 1 && p.last().is_some_and(Zero::is_zero) {
        p.pop();
    }
    p
}

fn remainder(a: &[Q], b: &[Q]) -> Vec<Q> {
    let mut r = a.to_vec();
    let lead = b.last().unwrap().clone();
    while r.len() >= b.len() && !(r.len() == 1 && r[0].is_zero()) {
        let factor = r.last().unwrap() / &lead;
        let shift = r.len() - b.len();
        for (i, c) in b.iter().enumerate() {
            r[shift + i] -= &factor * c;
        }
        r.pop();
        if r.is_empty() {
            r.push(q(0));
        }
        r = trim(r);
        if r.len() < b.len() {
            break;
        }
    }
    r
}

fn sturm_chain(p: &[Q]) -> Vec<Vec<Q>> {
    let dp: Vec<Q> = p.iter().enumerate().skip(1).map(|(i, c)| c * q(i as i64)).collect();
    let mut chain = vec![p.to_vec(), trim(dp)];
    loop {
        let last = chain.last().unwrap();
        if last.len() == 1 {
            break;
        }
        let r = remainder(&chain[chain.len() - 2], last);
        if r.iter().all(Zero::is_zero) {
            break;
        }
        chain.push(r.into_iter().map(|c| -c).collect());
    }
    chain
}

fn sign_changes(values: impl Iterator<Item = Q>) -> usize {
    let signs: Vec<bool> = values.filter(|v| !v.is_zero()).map(|v| v.is_positive()).collect();
    signs.windows(2).filter(|w| w[0] != w[1]).count()
}

/// Largest real root of the characteristic polynomial, which for a
/// nonnegative matrix is the spectral radius, by exact Sturm bisection.
pub fn dense_spectral_radius(adj: &[Vec<usize>]) -> f64 {
    let n = adj.len();
    if n == 0 {
        return 0.0;
    }
    let chain = sturm_chain(&characteristic_polynomial(adj));
    let at_infinity = sign_changes(chain.iter().map(|p| p.last().unwrap().clone()));
    let roots_above = |x: &Q| sign_changes(chain.iter().map(|p| eval(p, x))) - at_infinity;
    // Rational roots of a monic integer polynomial are integers; offsetting
    // both ends by 1/3 keeps every midpoint off them.
    let third = Q::new(1.into(), 3.into());
    let (mut lo, mut hi) = (-&third, q(n as i64 + 1) - &third);
    for _ in 0..60 {
        let mid = (&lo + &hi) / q(2);
        if roots_above(&mid) > 0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    glass_entropy::rational::q_to_f64(&((lo + hi) / q(2)))
}

pub fn dense_entropy(adj: &[Vec<usize>]) -> f64 {
    dense_spectral_radius(adj).max(1.0).log2()
}

/// Every closed walk `v … u` with at most `max_len` boxes that returns along
/// `u → v` and never uses `u → v` inside, found by unpruned exhaustive search.
pub fn brute_force_cycles(adj: &[Vec<usize>], u: usize, v: usize, max_len: usize) -> Vec<Vec<usize>> {
    fn walk(adj: &[Vec<usize>], u: usize, v: usize, max_len: usize, path: &mut Vec<usize>, out: &mut Vec<Vec<usize>>) {
        let x = *path.last().unwrap();
        if x == u {
            out.push(path.clone());
        }
        if path.len() == max_len {
            return;
        }
        for &y in &adj[x] {
            if x == u && y == v {
                continue;
            }
            path.push(y);
            walk(adj, u, v, max_len, path, out);
            path.pop();
        }
    }
    if !adj[u].contains(&v) || max_len == 0 {
        return Vec::new();
    }
    let mut out = Vec::new();
    walk(adj, u, v, max_len, &mut vec![v], &mut out);
    out.sort();
    out.dedup();
    out
}
