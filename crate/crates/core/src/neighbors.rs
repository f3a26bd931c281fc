//! Exact nearest-neighbor queries over a point cloud, pruned by a sort on the
//! first coordinate.

pub(crate) struct NeighborIndex {
    data: Vec<f64>,
    dim: usize,
    order: Vec<usize>,
    rank: Vec<usize>,
}

impl NeighborIndex {
    /// `data` is row-major with `dim` coordinates per point.
    pub(crate) fn new(data: Vec<f64>, dim: usize) -> Self {
        assert!(dim > 0 && data.len().is_multiple_of(dim));
        let n = data.len() / dim;
        let mut order: Vec<usize> = (0..n).collect();
        order.sort_by(|&a, &b| data[a * dim].total_cmp(&data[b * dim]).then(a.cmp(&b)));
        let mut rank = vec![0; n];
        for (r, &i) in order.iter().enumerate() {
            rank[i] = r;
        }
        Self { data, dim, order, rank }
    }

    #[cfg(test)]
    pub(crate) fn len(&self) -> usize {
        self.order.len()
    }

    pub(crate) fn point(&self, i: usize) -> &[f64] {
        &self.data[i * self.dim..(i + 1) * self.dim]
    }

    pub(crate) fn dist2(&self, i: usize, j: usize) -> f64 {
        self.point(i).iter().zip(self.point(j)).map(|(a, b)| (a - b) * (a - b)).sum()
    }

    /// Nearest neighbor of point `i` among points accepted by `allow`.
    /// Returns the index and the squared distance. Ties go to the smaller index.
    pub(crate) fn nearest(&self, i: usize, allow: impl Fn(usize) -> bool) -> Option<(usize, f64)> {
        let x0 = self.data[i * self.dim];
        let start = self.rank[i];
        let mut best: Option<(usize, f64)> = None;
        let better = |cand: (usize, f64), best: &Option<(usize, f64)>| match best {
            None => true,
            Some((bj, bd)) => cand.1 < *bd || (cand.1 == *bd && cand.0 < *bj),
        };
        let mut lo = start;
        let mut hi = start + 1;
        let mut lo_open = true;
        let mut hi_open = true;
        while lo_open || hi_open {
            if lo_open {
                if lo == 0 {
                    lo_open = false;
                } else {
                    lo -= 1;
                    let j = self.order[lo];
                    let gap = x0 - self.data[j * self.dim];
                    if best.is_some_and(|(_, d)| gap * gap > d) {
                        lo_open = false;
                    } else if j != i && allow(j) {
                        let cand = (j, self.dist2(i, j));
                        if better(cand, &best) {
                            best = Some(cand);
                        }
                    }
                }
            }
            if hi_open {
                if hi >= self.order.len() {
                    hi_open = false;
                } else {
                    let j = self.order[hi];
                    hi += 1;
                    let gap = self.data[j * self.dim] - x0;
                    if best.is_some_and(|(_, d)| gap * gap > d) {
                        hi_open = false;
                    } else if j != i && allow(j) {
                        let cand = (j, self.dist2(i, j));
                        if better(cand, &best) {
                            best = Some(cand);
                        }
                    }
                }
            }
        }
        best
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn matches_brute_force() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let dim = 3;
        let data: Vec<f64> = (0..600 * dim).map(|_| rng.random_range(-1.0..1.0)).collect();
        let index = NeighborIndex::new(data, dim);
        for i in (0..index.len()).step_by(7) {
            let allow = |j: usize| j.abs_diff(i) > 5;
            let got = index.nearest(i, allow).unwrap();
            let mut want = (usize::MAX, f64::INFINITY);
            for j in 0..index.len() {
                if j != i && allow(j) {
                    let d = index.dist2(i, j);
                    if d < want.1 {
                        want = (j, d);
                    }
                }
            }
            assert_eq!(got.0, want.0);
            assert_eq!(got.1, want.1);
        }
    }
}
