use alloc::vec;
use alloc::vec::Vec;

use super::CsrMatrix;

/// Strongly connected components of the directed graph `i -> j` whenever
/// `M(i,j) > 0`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Components {
    /// Component label of each vertex. Labels are numbered by the smallest
    /// vertex they contain.
    pub labels: Vec<usize>,
    pub count: usize,
    /// `closed[c]` is true when no edge leaves component `c`.
    pub closed: Vec<bool>,
}

impl Components {
    pub fn is_irreducible(&self) -> bool {
        self.count <= 1
    }

    pub fn closed_count(&self) -> usize {
        self.closed.iter().filter(|c| **c).count()
    }

    pub fn members(&self, c: usize) -> Vec<usize> {
        (0..self.labels.len())
            .filter(|&i| self.labels[i] == c)
            .collect()
    }
}

/// Iterative Tarjan.
pub fn strongly_connected_components(m: &CsrMatrix) -> Components {
    let n = m.nrows();
    const UNSEEN: usize = usize::MAX;
    let mut index = vec![UNSEEN; n];
    let mut low = vec![0usize; n];
    let mut on_stack = vec![false; n];
    let mut stack = Vec::new();
    let mut raw = vec![UNSEEN; n];
    let mut next_index = 0;
    let mut ncomp = 0;
    // (vertex, position within its row)
    let mut call: Vec<(usize, usize)> = Vec::new();

    for root in 0..n {
        if index[root] != UNSEEN {
            continue;
        }
        call.push((root, 0));
        index[root] = next_index;
        low[root] = next_index;
        next_index += 1;
        stack.push(root);
        on_stack[root] = true;
        while let Some(&(v, start)) = call.last() {
            let (cols, vals) = m.row(v);
            let mut pos = start;
            let mut child = None;
            while pos < cols.len() {
                let (w, val) = (cols[pos], vals[pos]);
                pos += 1;
                if !(val > 0.0) {
                    continue;
                }
                if index[w] == UNSEEN {
                    child = Some(w);
                    break;
                } else if on_stack[w] {
                    low[v] = low[v].min(index[w]);
                }
            }
            call.last_mut().unwrap().1 = pos;
            if let Some(w) = child {
                index[w] = next_index;
                low[w] = next_index;
                next_index += 1;
                stack.push(w);
                on_stack[w] = true;
                call.push((w, 0));
                continue;
            }
            call.pop();
            if let Some(&(parent, _)) = call.last() {
                low[parent] = low[parent].min(low[v]);
            }
            if low[v] == index[v] {
                loop {
                    let w = stack.pop().unwrap();
                    on_stack[w] = false;
                    raw[w] = ncomp;
                    if w == v {
                        break;
                    }
                }
                ncomp += 1;
            }
        }
    }

    let mut relabel = vec![UNSEEN; ncomp];
    let mut next = 0;
    for v in 0..n {
        if relabel[raw[v]] == UNSEEN {
            relabel[raw[v]] = next;
            next += 1;
        }
    }
    let labels: Vec<usize> = raw.iter().map(|&c| relabel[c]).collect();
    let mut closed = vec![true; ncomp];
    for v in 0..n {
        for (w, val) in m.row_iter(v) {
            if val > 0.0 && labels[w] != labels[v] {
                closed[labels[v]] = false;
            }
        }
    }
    Components {
        labels,
        count: ncomp,
        closed,
    }
}
