use serde::{Deserialize, Serialize};

/// A choice of split polynomials `I` together with the degree triple of each.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Splitting {
    /// One-based indices of the split polynomials, increasing.
    pub subset: Vec<usize>,
    /// Degree triple for each member of `subset`.
    pub triples: Vec<(u32, u32, u32)>,
    /// `Π_{i∈I} multinomial(deg P_i; triple_i)`.
    pub multiplicity: u128,
}

fn trinomial(a: u32, b: u32, c: u32) -> u128 {
    let mut acc: u128 = 1;
    let mut n: u128 = 0;
    for k in [a, b, c] {
        for j in 1..=k as u128 {
            n += 1;
            acc = acc * n / j;
        }
    }
    acc
}

fn triples_of(deg: u32) -> Vec<(u32, u32, u32)> {
    let mut out = Vec::new();
    for a in (0..=deg).rev() {
        for b in (0..=deg - a).rev() {
            out.push((a, b, deg - a - b));
        }
    }
    out
}

/// Every non-empty `I ⊆ {1..n}` with every assignment of degree triples.
pub fn enumerate_splittings(degrees: &[u32]) -> Vec<Splitting> {
    let n = degrees.len();
    let mut out = Vec::new();
    for mask in 1u32..(1 << n) {
        let subset: Vec<usize> = (0..n).filter(|i| mask >> i & 1 == 1).collect();
        let options: Vec<Vec<(u32, u32, u32)>> = subset.iter().map(|&i| triples_of(degrees[i])).collect();
        let mut idx = vec![0usize; subset.len()];
        loop {
            let triples: Vec<(u32, u32, u32)> = idx.iter().zip(&options).map(|(&k, o)| o[k]).collect();
            let multiplicity = triples.iter().map(|&(a, b, c)| trinomial(a, b, c)).product();
            out.push(Splitting {
                subset: subset.iter().map(|i| i + 1).collect(),
                triples,
                multiplicity,
            });
            let mut j = 0;
            loop {
                if j == idx.len() {
                    break;
                }
                idx[j] += 1;
                if idx[j] < options[j].len() {
                    break;
                }
                idx[j] = 0;
                j += 1;
            }
            if j == idx.len() {
                break;
            }
        }
    }
    out
}
