// SPDX-License-Identifier: Apache-2.0

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use super::distance::DistanceMatrix;
use crate::error::{Error, Result};

/// Mean silhouette. Items in singleton clusters contribute 0, as does an
/// item whose intra and nearest-cluster distances are both 0.
pub fn silhouette(d: &DistanceMatrix, labels: &[usize]) -> Result<f64> {
    let n = d.len();
    if labels.len() != n || n == 0 {
        return Err(Error::InvalidInput("one label per item required".into()));
    }
    let mut sizes: BTreeMap<usize, usize> = BTreeMap::new();
    for &l in labels {
        *sizes.entry(l).or_default() += 1;
    }
    if sizes.len() < 2 {
        return Err(Error::Undefined("silhouette needs at least 2 clusters".into()));
    }
    let mut total = 0.0;
    for i in 0..n {
        let own = labels[i];
        if sizes[&own] == 1 {
            continue;
        }
        let mut sums: BTreeMap<usize, f64> = BTreeMap::new();
        for j in 0..n {
            if j != i {
                *sums.entry(labels[j]).or_default() += d.get(i, j);
            }
        }
        let a = sums.get(&own).copied().unwrap_or(0.0) / (sizes[&own] - 1) as f64;
        let b = sums
            .iter()
            .filter(|(l, _)| **l != own)
            .map(|(l, s)| s / sizes[l] as f64)
            .fold(f64::INFINITY, f64::min);
        let m = a.max(b);
        if m > 0.0 {
            total += (b - a) / m;
        }
    }
    Ok(total / n as f64)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Merge {
    pub a: usize,
    pub b: usize,
    pub height: f64,
    pub size: usize,
}

/// Ward linkage via Lance-Williams updates on squared distances. Merges
/// join the closest pair of active clusters (ties to the lowest index pair);
/// each cluster is identified by its lowest item index.
pub fn ward_linkage(d: &DistanceMatrix) -> Vec<Merge> {
    let n = d.len();
    let mut dist: Vec<Vec<f64>> = (0..n)
        .map(|i| (0..n).map(|j| d.get(i, j).powi(2)).collect())
        .collect();
    let mut size = vec![1usize; n];
    let mut active = vec![true; n];
    let mut merges = Vec::with_capacity(n.saturating_sub(1));
    for _ in 1..n {
        let mut best = (f64::INFINITY, 0, 0);
        for i in 0..n {
            if !active[i] {
                continue;
            }
            for j in (i + 1)..n {
                if active[j] && dist[i][j] < best.0 {
                    best = (dist[i][j], i, j);
                }
            }
        }
        let (dij, i, j) = best;
        let (ni, nj) = (size[i] as f64, size[j] as f64);
        for k in 0..n {
            if !active[k] || k == i || k == j {
                continue;
            }
            let nk = size[k] as f64;
            let v = ((ni + nk) * dist[i][k] + (nj + nk) * dist[j][k] - nk * dij) / (ni + nj + nk);
            dist[i][k] = v.max(0.0);
            dist[k][i] = dist[i][k];
        }
        active[j] = false;
        size[i] += size[j];
        merges.push(Merge { a: i, b: j, height: dij.sqrt(), size: size[i] });
    }
    merges
}

/// Labels after applying the first `n - k` merges, numbered by first
/// appearance in item order.
pub fn cut(n: usize, merges: &[Merge], k: usize) -> Vec<usize> {
    let mut parent: Vec<usize> = (0..n).collect();
    fn find(p: &mut [usize], mut x: usize) -> usize {
        while p[x] != x {
            p[x] = p[p[x]];
            x = p[x];
        }
        x
    }
    for m in merges.iter().take(n.saturating_sub(k)) {
        let (ra, rb) = (find(&mut parent, m.a), find(&mut parent, m.b));
        parent[rb] = ra;
    }
    let mut ids: BTreeMap<usize, usize> = BTreeMap::new();
    (0..n)
        .map(|i| {
            let r = find(&mut parent, i);
            let next = ids.len();
            *ids.entry(r).or_insert(next)
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WardCut {
    pub k: usize,
    pub labels: Vec<usize>,
    pub silhouette: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WardResult {
    pub merges: Vec<Merge>,
    pub cuts: Vec<WardCut>,
    pub best_k: Option<usize>,
    pub best_silhouette: Option<f64>,
    /// All distances are zero, so no cut has meaningful structure.
    pub degenerate: bool,
}

/// Ward clustering cut at every k in `k_min..=k_max` (truncated to n - 1).
pub fn ward_cluster(d: &DistanceMatrix, k_min: usize, k_max: usize) -> Result<WardResult> {
    let n = d.len();
    if n < 3 {
        return Err(Error::InvalidInput("clustering needs at least 3 items".into()));
    }
    let k_min = k_min.max(2);
    let mut k_max = k_max;
    if k_max >= n {
        log::warn!("k range {k_min}..={k_max} exceeds {n} items; truncating to {}", n - 1);
        k_max = n - 1;
    }
    if k_min > k_max {
        return Err(Error::Config(format!("empty k range {k_min}..={k_max}")));
    }
    let merges = ward_linkage(d);
    let degenerate = d.max() == 0.0;
    let cuts: Vec<WardCut> = (k_min..=k_max)
        .map(|k| {
            let labels = cut(n, &merges, k);
            let silhouette = if degenerate { None } else { silhouette(d, &labels).ok() };
            WardCut { k, labels, silhouette }
        })
        .collect();
    let best = cuts
        .iter()
        .filter_map(|c| c.silhouette.map(|s| (c.k, s)))
        .fold(None, |acc: Option<(usize, f64)>, (k, s)| match acc {
            Some((_, bs)) if bs >= s => acc,
            _ => Some((k, s)),
        });
    Ok(WardResult {
        merges,
        cuts,
        best_k: best.map(|b| b.0),
        best_silhouette: best.map(|b| b.1),
        degenerate,
    })
}

/// Density clustering on a precomputed matrix. `None` marks noise.
pub fn dbscan(d: &DistanceMatrix, eps: f64, min_samples: usize) -> Vec<Option<usize>> {
    let n = d.len();
    let neighbours = |i: usize| -> Vec<usize> { (0..n).filter(|&j| d.get(i, j) <= eps).collect() };
    let mut labels: Vec<Option<usize>> = vec![None; n];
    let mut visited = vec![false; n];
    let mut next = 0;
    for i in 0..n {
        if visited[i] {
            continue;
        }
        visited[i] = true;
        let nb = neighbours(i);
        if nb.len() < min_samples.max(1) {
            continue;
        }
        let c = next;
        next += 1;
        labels[i] = Some(c);
        let mut queue = std::collections::VecDeque::from(nb);
        while let Some(j) = queue.pop_front() {
            if labels[j].is_none() {
                labels[j] = Some(c);
            }
            if visited[j] {
                continue;
            }
            visited[j] = true;
            let nj = neighbours(j);
            if nj.len() >= min_samples.max(1) {
                queue.extend(nj);
            }
        }
    }
    labels
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DbscanRun {
    pub eps: f64,
    pub min_samples: usize,
    pub labels: Vec<Option<usize>>,
    pub n_clusters: usize,
    /// Clusters with at least two members.
    pub n_multi: usize,
    pub clustered: usize,
    pub noise_fraction: f64,
}

impl DbscanRun {
    fn new(eps: f64, min_samples: usize, labels: Vec<Option<usize>>) -> Self {
        let mut sizes: BTreeMap<usize, usize> = BTreeMap::new();
        for l in labels.iter().flatten() {
            *sizes.entry(*l).or_default() += 1;
        }
        let clustered = sizes.values().sum();
        DbscanRun {
            eps,
            min_samples,
            n_clusters: sizes.len(),
            n_multi: sizes.values().filter(|s| **s >= 2).count(),
            clustered,
            noise_fraction: if labels.is_empty() {
                1.0
            } else {
                1.0 - clustered as f64 / labels.len() as f64
            },
            labels,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DbscanGrid {
    pub runs: Vec<DbscanRun>,
    pub best: usize,
    /// Every configuration labels everything as noise.
    pub no_structure: bool,
}

/// Runs every (eps, min_samples) pair and picks the configuration with the
/// largest clustered fraction, then the most multi-member clusters; ties go
/// to grid order.
pub fn dbscan_grid(d: &DistanceMatrix, eps: &[f64], min_samples: &[usize]) -> Result<DbscanGrid> {
    if eps.is_empty() || min_samples.is_empty() {
        return Err(Error::Config("DBSCAN grid is empty".into()));
    }
    let mut runs = Vec::new();
    for &e in eps {
        for &m in min_samples {
            runs.push(DbscanRun::new(e, m, dbscan(d, e, m)));
        }
    }
    let mut best = 0;
    for (i, r) in runs.iter().enumerate() {
        let b = &runs[best];
        if (r.clustered, r.n_multi) > (b.clustered, b.n_multi) {
            best = i;
        }
    }
    let no_structure = runs.iter().all(|r| r.clustered == 0);
    Ok(DbscanGrid { runs, best, no_structure })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::phonoclust::distance::distance_matrix;
    use proptest::prelude::*;

    fn from_rows(rows: &[&[f64]]) -> DistanceMatrix {
        let ids = (0..rows.len()).map(|i| i.to_string()).collect();
        DistanceMatrix::from_fn(ids, |i, j| rows[i][j])
    }

    fn strings(v: &[&str]) -> DistanceMatrix {
        let forms: Vec<String> = v.iter().map(|s| s.to_string()).collect();
        distance_matrix((0..v.len()).map(|i| i.to_string()).collect(), &forms).unwrap()
    }

    #[test]
    fn silhouette_examples() {
        let two = from_rows(&[&[0.0, 1.0], &[1.0, 0.0]]);
        assert_eq!(silhouette(&two, &[0, 1]).unwrap(), 0.0);
        assert!(silhouette(&two, &[0, 0]).is_err());
        let sep = from_rows(&[
            &[0.0, 0.0, 1.0, 1.0],
            &[0.0, 0.0, 1.0, 1.0],
            &[1.0, 1.0, 0.0, 0.0],
            &[1.0, 1.0, 0.0, 0.0],
        ]);
        assert_eq!(silhouette(&sep, &[0, 0, 1, 1]).unwrap(), 1.0);
        // hand-worked: points on a line at 0, 1, 3, 4 (distances / 4)
        let p = [0.0, 1.0, 3.0, 4.0];
        let rows: Vec<Vec<f64>> = p.iter().map(|a| p.iter().map(|b| f64::abs(a - b) / 4.0).collect()).collect();
        let refs: Vec<&[f64]> = rows.iter().map(|r| r.as_slice()).collect();
        let m = from_rows(&refs);
        // item 0: a = 0.25, b = (0.75 + 1.0) / 2 = 0.875 → 0.625/0.875
        // item 1: a = 0.25, b = (0.5 + 0.75) / 2 = 0.625 → 0.375/0.625; 2,3 mirror 1,0
        let expect = (2.0 * (0.625 / 0.875) + 2.0 * (0.375 / 0.625)) / 4.0;
        assert!((silhouette(&m, &[0, 0, 1, 1]).unwrap() - expect).abs() < 1e-15);
    }

    #[test]
    fn ward_two_families() {
        let fam: Vec<String> = (0..10)
            .map(|i| format!("aaaaaaa{}", ['a', 'b', 'c', 'd', 'e'][i % 5]))
            .chain((0..10).map(|i| format!("zzzzzzz{}", ['x', 'y', 'z', 'w', 'v'][i % 5])))
            .collect();
        let refs: Vec<&str> = fam.iter().map(String::as_str).collect();
        let d = strings(&refs);
        let r = ward_cluster(&d, 2, 2).unwrap();
        assert!(r.cuts[0].silhouette.unwrap() >= 0.8);
        assert_eq!(r.cuts[0].labels[..10], [0; 10]);
        assert_eq!(r.cuts[0].labels[10..], [1; 10]);
        for w in r.merges.windows(2) {
            assert!(w[1].height >= w[0].height - 1e-12);
        }
        let g = dbscan_grid(&d, &[0.3], &[3]).unwrap();
        assert_eq!(g.runs[0].n_clusters, 2);
        assert_eq!(g.runs[0].noise_fraction, 0.0);
    }

    #[test]
    fn identical_strings_are_degenerate() {
        let d = strings(&["mata"; 6]);
        let r = ward_cluster(&d, 2, 10).unwrap();
        assert!(r.degenerate && r.best_k.is_none());
        assert_eq!(r.cuts.last().unwrap().k, 5);
        let l = dbscan(&strings(&["mata"; 5]), 0.3, 3);
        assert!(l.iter().all(|x| *x == Some(0)));
    }

    #[test]
    fn scattered_set_is_all_noise() {
        let d = strings(&["abcd", "efgh", "ijkl", "mnop", "qrst"]);
        let g = dbscan_grid(&d, &[0.3, 0.5], &[2, 3]).unwrap();
        assert!(g.no_structure);
        assert!(g.runs.iter().all(|r| r.noise_fraction == 1.0));
    }

    #[test]
    fn ward_matches_hand_computation() {
        // 1-D points 0, 1, 5: first merge (0,1) at 1; then Ward distance
        // sqrt(2 * |5 - 0.5|^2 * 1 * 2 / 3)
        let p = [0.0, 1.0, 5.0];
        let rows: Vec<Vec<f64>> = p.iter().map(|a| p.iter().map(|b| f64::abs(a - b)).collect()).collect();
        let refs: Vec<&[f64]> = rows.iter().map(|r| r.as_slice()).collect();
        let m = ward_linkage(&from_rows(&refs));
        assert_eq!((m[0].a, m[0].b, m[0].height), (0, 1, 1.0));
        let expect = (2.0f64 * 4.5 * 4.5 * 2.0 / 3.0).sqrt();
        assert!((m[1].height - expect).abs() < 1e-12);
        assert_eq!(cut(3, &m, 2), vec![0, 0, 1]);
    }

    fn core_partition(d: &DistanceMatrix, eps: f64, min: usize, labels: &[Option<usize>]) -> Vec<Vec<usize>> {
        let n = d.len();
        let mut groups: BTreeMap<usize, Vec<usize>> = BTreeMap::new();
        for i in 0..n {
            let core = (0..n).filter(|&j| d.get(i, j) <= eps).count() >= min;
            if core {
                groups.entry(labels[i].unwrap()).or_default().push(i);
            }
        }
        let mut v: Vec<Vec<usize>> = groups.into_values().collect();
        v.sort();
        v
    }

    proptest! {
        #[test]
        fn dbscan_order_invariant(
            forms in prop::collection::vec("[ab]{1,4}", 3..14),
            seed in any::<u64>(),
        ) {
            use rand::seq::SliceRandom;
            use rand::SeedableRng;
            let refs: Vec<&str> = forms.iter().map(String::as_str).collect();
            let d = strings(&refs);
            let mut perm: Vec<usize> = (0..forms.len()).collect();
            perm.shuffle(&mut rand_chacha::ChaCha8Rng::seed_from_u64(seed));
            let permuted: Vec<&str> = perm.iter().map(|&i| refs[i]).collect();
            let dp = strings(&permuted);
            let (eps, min) = (0.34, 3);
            let a = dbscan(&d, eps, min);
            let b = dbscan(&dp, eps, min);
            let noise_a: Vec<usize> = (0..a.len()).filter(|&i| a[i].is_none()).collect();
            let mut noise_b: Vec<usize> = (0..b.len()).filter(|&i| b[i].is_none()).map(|i| perm[i]).collect();
            noise_b.sort();
            prop_assert_eq!(noise_a, noise_b);
            let pa = core_partition(&d, eps, min, &a);
            let mut pb: Vec<Vec<usize>> = core_partition(&dp, eps, min, &b)
                .into_iter()
                .map(|g| { let mut g: Vec<usize> = g.into_iter().map(|i| perm[i]).collect(); g.sort(); g })
                .collect();
            pb.sort();
            prop_assert_eq!(pa, pb);
        }
    }
}
