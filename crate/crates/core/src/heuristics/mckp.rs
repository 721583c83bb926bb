//! Exact multiple-choice knapsack: pick one item per group, total weight
//! within an integer budget, minimal total cost.

/// An option within a group.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Item {
    pub cost: f64,
    pub weight: u64,
}

/// Solution: the chosen item index per group and the total cost.
#[derive(Debug, Clone, PartialEq)]
pub struct Choice {
    pub picks: Vec<usize>,
    pub cost: f64,
    pub weight: u64,
}

/// Dynamic program over (group, exact weight). Among equal-cost solutions
/// the lighter one wins; remaining ties go to lower item indices.
/// Returns `None` when even the lightest items exceed the budget.
pub fn solve(groups: &[Vec<Item>], budget: u64) -> Option<Choice> {
    let min_total: u64 = groups
        .iter()
        .map(|g| g.iter().map(|it| it.weight).min().unwrap_or(u64::MAX))
        .fold(0u64, |a, b| a.saturating_add(b));
    if groups.iter().any(Vec::is_empty) || min_total > budget {
        return None;
    }
    let max_total: u64 = groups
        .iter()
        .map(|g| g.iter().map(|it| it.weight).max().unwrap_or(0))
        .fold(0u64, |a, b| a.saturating_add(b));
    let width = budget.min(max_total) as usize + 1;
    let mut dp = vec![f64::INFINITY; width];
    dp[0] = 0.0;
    let mut args: Vec<Vec<u32>> = Vec::with_capacity(groups.len());
    for g in groups {
        let mut next = vec![f64::INFINITY; width];
        let mut arg = vec![u32::MAX; width];
        for (k, it) in g.iter().enumerate() {
            let w = it.weight as usize;
            if w >= width {
                continue;
            }
            for b in w..width {
                let prev = dp[b - w];
                if prev == f64::INFINITY {
                    continue;
                }
                let v = prev + it.cost;
                if v < next[b] {
                    next[b] = v;
                    arg[b] = k as u32;
                }
            }
        }
        args.push(arg);
        dp = next;
    }
    let mut best: Option<(f64, usize)> = None;
    for (b, &v) in dp.iter().enumerate() {
        if v < best.map_or(f64::INFINITY, |x| x.0) {
            best = Some((v, b));
        }
    }
    let (cost, mut b) = best?;
    let weight = b as u64;
    let mut picks = vec![0; groups.len()];
    for gi in (0..groups.len()).rev() {
        let k = args[gi][b] as usize;
        picks[gi] = k;
        b -= groups[gi][k].weight as usize;
    }
    Some(Choice { picks, cost, weight })
}

/// Indices of the items not dominated in (cost, weight); ties keep the
/// first occurrence.
pub fn pareto_front(items: &[Item]) -> Vec<usize> {
    let mut order: Vec<usize> = (0..items.len()).collect();
    order.sort_by(|&a, &b| {
        items[a]
            .weight
            .cmp(&items[b].weight)
            .then(items[a].cost.total_cmp(&items[b].cost))
            .then(a.cmp(&b))
    });
    let mut front = Vec::new();
    let mut best = f64::INFINITY;
    for k in order {
        if items[k].cost < best {
            best = items[k].cost;
            front.push(k);
        }
    }
    front
}
