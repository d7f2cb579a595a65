use ndarray::{Array2, ArrayView1, ArrayView2};

use super::{check_k, Algorithm, ClusterAssignment};
use crate::error::Result;
use crate::numerics::{check_finite, SeededStream};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct KMeansParams {
    pub k: usize,
    pub seed: u64,
    pub max_iter: usize,
    pub n_init: usize,
}

impl KMeansParams {
    pub fn new(k: usize, seed: u64) -> Self {
        KMeansParams {
            k,
            seed,
            max_iter: 300,
            n_init: 10,
        }
    }
}

#[derive(Debug, Clone)]
pub struct KMeansFit {
    pub assignment: ClusterAssignment,
    pub centroids: Array2<f64>,
    /// Inertia after every assignment step, one trace per restart.
    pub traces: Vec<Vec<f64>>,
}

fn sq_dist(a: ArrayView1<'_, f64>, b: ArrayView1<'_, f64>) -> f64 {
    a.iter().zip(b.iter()).map(|(x, y)| (x - y) * (x - y)).sum()
}

/// k-means++ seeding: first centre uniform, then each next centre drawn with
/// probability proportional to squared distance from the nearest chosen one.
fn plus_plus_init(points: ArrayView2<'_, f64>, k: usize, stream: &mut SeededStream) -> Array2<f64> {
    let (n, f) = points.dim();
    let mut centroids = Array2::zeros((k, f));
    let first = stream.below(n);
    centroids.row_mut(0).assign(&points.row(first));
    let mut nearest: Vec<f64> = (0..n).map(|i| sq_dist(points.row(i), points.row(first))).collect();
    for c in 1..k {
        let total: f64 = nearest.iter().sum();
        let pick = if total > 0.0 {
            let target = stream.uniform() * total;
            let mut acc = 0.0;
            let mut chosen = None;
            for (i, &w) in nearest.iter().enumerate() {
                acc += w;
                if acc > target && w > 0.0 {
                    chosen = Some(i);
                    break;
                }
            }
            // Rounding can leave `acc` just short of `target`.
            chosen.unwrap_or_else(|| nearest.iter().rposition(|&w| w > 0.0).unwrap_or(0))
        } else {
            stream.below(n)
        };
        centroids.row_mut(c).assign(&points.row(pick));
        for (i, slot) in nearest.iter_mut().enumerate() {
            *slot = slot.min(sq_dist(points.row(i), points.row(pick)));
        }
    }
    centroids
}

/// Nearest centroid per point (lowest index wins ties) and its squared distance.
fn assign(points: ArrayView2<'_, f64>, centroids: &Array2<f64>) -> (Vec<usize>, Vec<f64>) {
    let n = points.nrows();
    let mut labels = vec![0; n];
    let mut dists = vec![0.0; n];
    for i in 0..n {
        let mut best = f64::INFINITY;
        let mut arg = 0;
        for (c, centre) in centroids.rows().into_iter().enumerate() {
            let d = sq_dist(points.row(i), centre);
            if d < best {
                best = d;
                arg = c;
            }
        }
        labels[i] = arg;
        dists[i] = best;
    }
    (labels, dists)
}

fn means(points: ArrayView2<'_, f64>, labels: &[usize], k: usize) -> (Array2<f64>, Vec<usize>) {
    let mut sums = Array2::zeros((k, points.ncols()));
    let mut counts = vec![0usize; k];
    for (i, &l) in labels.iter().enumerate() {
        counts[l] += 1;
        let mut row = sums.row_mut(l);
        row += &points.row(i);
    }
    for (c, &cnt) in counts.iter().enumerate() {
        if cnt > 0 {
            sums.row_mut(c).mapv_inplace(|v| v / cnt as f64);
        }
    }
    (sums, counts)
}

fn inertia_of(points: ArrayView2<'_, f64>, labels: &[usize], centroids: &Array2<f64>) -> f64 {
    labels
        .iter()
        .enumerate()
        .map(|(i, &l)| sq_dist(points.row(i), centroids.row(l)))
        .sum()
}

struct Run {
    labels: Vec<usize>,
    centroids: Array2<f64>,
    inertia: f64,
    trace: Vec<f64>,
}

fn single_run(points: ArrayView2<'_, f64>, k: usize, max_iter: usize, stream: &mut SeededStream) -> Run {
    let mut centroids = plus_plus_init(points, k, stream);
    let mut labels: Vec<usize> = Vec::new();
    let mut trace = Vec::new();
    for _ in 0..max_iter {
        let (new_labels, mut dists) = assign(points, &centroids);
        trace.push(dists.iter().sum());
        let stable = new_labels == labels;
        labels = new_labels;
        if stable {
            break;
        }
        let (mut next, counts) = means(points, &labels, k);
        for c in (0..k).filter(|&c| counts[c] == 0) {
            // Reseed on the point worst served by its current centroid.
            let far = (0..dists.len())
                .max_by(|&a, &b| dists[a].total_cmp(&dists[b]).then(b.cmp(&a)))
                .expect("non-empty input");
            next.row_mut(c).assign(&points.row(far));
            dists[far] = -1.0;
        }
        centroids = next;
    }
    fill_empty_clusters(points, &mut labels, k);
    let (centroids, _) = means(points, &labels, k);
    let inertia = inertia_of(points, &labels, &centroids);
    if trace.last().is_none_or(|&last| inertia < last) {
        trace.push(inertia);
    }
    Run {
        labels,
        centroids,
        inertia,
        trace,
    }
}

/// Coincident points can leave a centroid with no members; hand each empty
/// cluster the farthest point of a cluster that has more than one member.
fn fill_empty_clusters(points: ArrayView2<'_, f64>, labels: &mut [usize], k: usize) {
    loop {
        let (centroids, counts) = means(points, labels, k);
        let Some(empty) = counts.iter().position(|&c| c == 0) else {
            return;
        };
        let donor = (0..labels.len())
            .filter(|&i| counts[labels[i]] > 1)
            .max_by(|&a, &b| {
                let da = sq_dist(points.row(a), centroids.row(labels[a]));
                let db = sq_dist(points.row(b), centroids.row(labels[b]));
                da.total_cmp(&db).then(b.cmp(&a))
            })
            .expect("k <= n leaves a cluster with spare members");
        labels[donor] = empty;
    }
}

/// Lloyd's k-means with k-means++ seeding and `n_init` restarts drawn from
/// one seeded stream; the restart with the lowest inertia wins (first on ties).
pub fn kmeans_fit(points: ArrayView2<'_, f64>, params: &KMeansParams) -> Result<KMeansFit> {
    let n = points.nrows();
    check_k(params.k, n)?;
    check_finite(points)?;
    let max_iter = params.max_iter.max(1);
    let mut stream = SeededStream::new(params.seed);
    let mut best: Option<Run> = None;
    let mut traces = Vec::new();
    for _ in 0..params.n_init.max(1) {
        let run = single_run(points, params.k, max_iter, &mut stream);
        traces.push(run.trace.clone());
        if best.as_ref().is_none_or(|b| run.inertia < b.inertia) {
            best = Some(run);
        }
    }
    let best = best.expect("at least one restart");
    let mut assignment = ClusterAssignment::new(best.labels, params.k, Algorithm::KMeans)
        .with_param("seed", params.seed)
        .with_param("n_init", params.n_init)
        .with_param("max_iter", params.max_iter);
    assignment.inertia = Some(best.inertia);
    Ok(KMeansFit {
        assignment,
        centroids: best.centroids,
        traces,
    })
}

pub fn kmeans(
    points: ArrayView2<'_, f64>,
    k: usize,
    seed: u64,
    max_iter: usize,
    n_init: usize,
) -> Result<ClusterAssignment> {
    kmeans_fit(
        points,
        &KMeansParams {
            k,
            seed,
            max_iter,
            n_init,
        },
    )
    .map(|f| f.assignment)
}
