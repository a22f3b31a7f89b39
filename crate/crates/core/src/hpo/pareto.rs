//! Two-objective dominance, fronts and hypervolume. Both objectives are
//! maximized.

/// An objective pair, e.g. `[compression rate, ssim]`.
pub type Objectives = [f64; 2];

/// `a` is at least as good as `b` in both objectives and better in one.
pub fn dominates(a: Objectives, b: Objectives) -> bool {
    a[0] >= b[0] && a[1] >= b[1] && (a[0] > b[0] || a[1] > b[1])
}

/// Indices of the non-dominated points, sorted by ascending first
/// objective (then by index). Equal points are all kept; points with a
/// NaN objective are ignored.
pub fn pareto_indices(points: &[Objectives]) -> Vec<usize> {
    let mut order: Vec<usize> = (0..points.len()).filter(|&i| !points[i].iter().any(|v| v.is_nan())).collect();
    order.sort_by(|&a, &b| points[b][0].total_cmp(&points[a][0]).then(a.cmp(&b)));

    let mut front = Vec::new();
    // Best second objective among points with a strictly larger first one.
    let mut best_above = f64::NEG_INFINITY;
    let mut g = 0;
    while g < order.len() {
        let cr = points[order[g]][0];
        let end = g + order[g..].iter().take_while(|&&i| points[i][0] == cr).count();
        let group = &order[g..end];
        let top = group.iter().map(|&i| points[i][1]).fold(f64::NEG_INFINITY, f64::max);
        if top > best_above {
            front.extend(group.iter().copied().filter(|&i| points[i][1] == top));
        }
        best_above = best_above.max(top);
        g = end;
    }
    front.sort_by(|&a, &b| points[a][0].total_cmp(&points[b][0]).then(a.cmp(&b)));
    front
}

/// Area dominated by `points` and bounded below by the reference point
/// `(0, 0)`; negative coordinates count as zero.
pub fn hypervolume(points: &[Objectives]) -> f64 {
    let mut pts: Vec<Objectives> =
        points.iter().filter(|p| !p.iter().any(|v| v.is_nan())).map(|p| [p[0].max(0.0), p[1].max(0.0)]).collect();
    pts.sort_by(|a, b| b[0].total_cmp(&a[0]));
    let mut area = 0.0;
    let mut covered = 0.0;
    for p in pts {
        if p[1] > covered {
            area += p[0] * (p[1] - covered);
            covered = p[1];
        }
    }
    area
}

/// Orders points best-first: by non-dominated rank, then within a rank by
/// decreasing hypervolume contribution. Ties keep input order.
pub fn rank_order(points: &[Objectives]) -> Vec<usize> {
    let mut remaining: Vec<usize> = (0..points.len()).collect();
    let mut out = Vec::with_capacity(points.len());
    while !remaining.is_empty() {
        let sub: Vec<Objectives> = remaining.iter().map(|&i| points[i]).collect();
        let mut layer: Vec<usize> = pareto_indices(&sub);
        if layer.is_empty() {
            // only NaN points are left
            out.append(&mut remaining);
            break;
        }
        layer.sort_unstable();
        let layer_pts: Vec<Objectives> = layer.iter().map(|&i| sub[i]).collect();
        let total = hypervolume(&layer_pts);
        let contribution: Vec<f64> = (0..layer.len())
            .map(|k| {
                let others: Vec<Objectives> =
                    layer_pts.iter().enumerate().filter(|&(j, _)| j != k).map(|(_, p)| *p).collect();
                total - hypervolume(&others)
            })
            .collect();
        let mut by_contribution: Vec<usize> = (0..layer.len()).collect();
        by_contribution.sort_by(|&a, &b| contribution[b].total_cmp(&contribution[a]));
        out.extend(by_contribution.iter().map(|&k| remaining[layer[k]]));

        let taken: std::collections::HashSet<usize> = layer.iter().copied().collect();
        remaining = remaining.iter().enumerate().filter(|(j, _)| !taken.contains(j)).map(|(_, &i)| i).collect();
    }
    out
}

/// Splits point indices into the best `ceil(gamma * n)` and the rest, using
/// [`rank_order`].
pub fn split_good_bad(points: &[Objectives], gamma: f64) -> (Vec<usize>, Vec<usize>) {
    let order = rank_order(points);
    let n_good = ((gamma * points.len() as f64).ceil() as usize).min(points.len());
    let (good, bad) = order.split_at(n_good);
    (good.to_vec(), bad.to_vec())
}
