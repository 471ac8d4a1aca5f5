//! Exterior powers of the first-order system.
//!
//! An `m`-form `y_1 ^ ... ^ y_m` built from solutions of `y' = A y` solves
//! `w' = A^(m) w`, where `A^(m)` acts as a derivation on the basis
//! `e_T = e_{t_1} ^ ... ^ e_{t_m}` indexed by increasing `m`-subsets `T`.

/// One nonzero coupling `dw[target] += sign * A[row][col] * w[source]`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub(crate) struct Transition {
    pub target: usize,
    pub source: usize,
    pub row: usize,
    pub col: usize,
    pub sign: f64,
}

#[derive(Debug, Clone)]
pub(crate) struct Compound {
    subsets: Vec<Vec<usize>>,
    transitions: Vec<Transition>,
}

fn subsets_of(n: usize, m: usize) -> Vec<Vec<usize>> {
    fn rec(start: usize, n: usize, m: usize, cur: &mut Vec<usize>, out: &mut Vec<Vec<usize>>) {
        if cur.len() == m {
            out.push(cur.clone());
            return;
        }
        for i in start..n {
            cur.push(i);
            rec(i + 1, n, m, cur, out);
            cur.pop();
        }
    }
    let mut out = Vec::new();
    rec(0, n, m, &mut Vec::with_capacity(m), &mut out);
    out
}

impl Compound {
    /// The `m`-th exterior power of a 4x4 system, `1 <= m <= 4`.
    pub(crate) fn new(m: usize) -> Self {
        assert!((1..=4).contains(&m));
        let subsets = subsets_of(4, m);
        let mut transitions = Vec::new();
        for (source, t_set) in subsets.iter().enumerate() {
            for &col in t_set {
                for row in 0..4 {
                    if row != col && t_set.contains(&row) {
                        continue;
                    }
                    let mut r_set: Vec<usize> = t_set.iter().map(|&t| if t == col { row } else { t }).collect();
                    // moving `row` into sorted position passes every member
                    // strictly between `row` and `col`
                    let (lo, hi) = if row < col { (row, col) } else { (col, row) };
                    let crossed = t_set.iter().filter(|&&t| t > lo && t < hi).count();
                    let sign = if crossed % 2 == 0 { 1.0 } else { -1.0 };
                    r_set.sort_unstable();
                    let target = subsets.iter().position(|s| *s == r_set).expect("subset");
                    transitions.push(Transition {
                        target,
                        source,
                        row,
                        col,
                        sign,
                    });
                }
            }
        }
        Self {
            subsets,
            transitions,
        }
    }

    pub(crate) fn dim(&self) -> usize {
        self.subsets.len()
    }

    pub(crate) fn index_of(&self, set: &[usize]) -> usize {
        let mut s = set.to_vec();
        s.sort_unstable();
        self.subsets
            .iter()
            .position(|t| *t == s)
            .expect("index set of the right size")
    }

    pub(crate) fn transitions(&self) -> &[Transition] {
        &self.transitions
    }
}

/// Sign of the permutation sorting `set` into increasing order.
pub(crate) fn sort_sign(set: &[usize]) -> f64 {
    let mut inversions = 0;
    for i in 0..set.len() {
        for j in i + 1..set.len() {
            if set[i] > set[j] {
                inversions += 1;
            }
        }
    }
    if inversions % 2 == 0 {
        1.0
    } else {
        -1.0
    }
}
