use crate::error::{LsrError, Result};

/// Boosting hyperparameters for squared-error regression.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GbtParams {
    pub n_trees: usize,
    pub max_depth: usize,
    pub learning_rate: f64,
    pub lambda: f64,
}

impl Default for GbtParams {
    fn default() -> Self {
        GbtParams { n_trees: 500, max_depth: 6, learning_rate: 0.1, lambda: 1.0 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum TreeNode {
    /// Left child is the next node in pre-order; `right` is an absolute index.
    Split {
        feature: u32,
        threshold: f64,
        right: u32,
    },
    Leaf {
        weight: f64,
    },
}

/// A binary regression tree stored in pre-order.
#[derive(Debug, Clone, PartialEq)]
pub struct Tree {
    pub nodes: Vec<TreeNode>,
}

impl Tree {
    /// Sum contribution (before the learning rate) for one feature vector.
    #[inline]
    pub fn leaf_weight(&self, x: &[f32]) -> f64 {
        let mut i = 0;
        loop {
            match self.nodes[i] {
                TreeNode::Leaf { weight } => return weight,
                TreeNode::Split { feature, threshold, right } => {
                    i = if x[feature as usize] as f64 <= threshold { i + 1 } else { right as usize };
                }
            }
        }
    }

    /// Number of split levels on the longest root-to-leaf path.
    pub fn depth(&self) -> usize {
        fn walk(t: &Tree, i: usize) -> usize {
            match t.nodes[i] {
                TreeNode::Leaf { .. } => 0,
                TreeNode::Split { right, .. } => 1 + walk(t, i + 1).max(walk(t, right as usize)),
            }
        }
        walk(self, 0)
    }

    /// Parent nodes count twice (feature index and threshold), leaves once.
    pub fn parameter_count(&self) -> usize {
        self.nodes.iter().map(|n| if matches!(n, TreeNode::Split { .. }) { 2 } else { 1 }).sum()
    }

    pub fn max_feature(&self) -> Option<u32> {
        self.nodes
            .iter()
            .filter_map(|n| match n {
                TreeNode::Split { feature, .. } => Some(*feature),
                TreeNode::Leaf { .. } => None,
            })
            .max()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct GbtRegressor {
    pub base_score: f64,
    pub learning_rate: f64,
    pub trees: Vec<Tree>,
}

impl GbtRegressor {
    pub fn predict(&self, x: &[f32]) -> f64 {
        let sum: f64 = self.trees.iter().map(|t| t.leaf_weight(x)).sum();
        self.base_score + self.learning_rate * sum
    }

    pub fn max_depth(&self) -> usize {
        self.trees.iter().map(Tree::depth).max().unwrap_or(0)
    }
}

pub fn gbt_train(x: &[f32], features: usize, y: &[f64], params: &GbtParams) -> Result<GbtRegressor> {
    Ok(gbt_train_with_history(x, features, y, params)?.0)
}

enum Build {
    Leaf(f64),
    Split { feature: u32, threshold: f64, left: usize, right: usize },
}

struct Frontier {
    arena: usize,
    g: f64,
    h: f64,
}

#[derive(Clone, Copy)]
struct Best {
    gain: f64,
    feature: usize,
    threshold: f64,
}

const NONE: u32 = u32::MAX;

/// Train and also return the training MSE after each round.
///
/// Exact greedy split search over presorted columns, grown level by level.
/// A split is taken only when its gain is strictly positive; candidate
/// thresholds are midpoints between consecutive distinct values.
pub fn gbt_train_with_history(
    x: &[f32],
    features: usize,
    y: &[f64],
    params: &GbtParams,
) -> Result<(GbtRegressor, Vec<f64>)> {
    let n = y.len();
    if features == 0 || x.len() != n * features {
        return Err(LsrError::dim(format!("feature matrix of {} values is not {n} x {features}", x.len())));
    }
    if n < 2 {
        return Err(LsrError::param("gradient boosting needs at least 2 samples"));
    }
    if params.lambda.is_nan() || params.lambda < 0.0 || params.learning_rate.is_nan() || params.learning_rate <= 0.0 {
        return Err(LsrError::param("learning rate must be positive and lambda non-negative"));
    }
    let lambda = params.lambda;

    let mut order: Vec<Vec<u32>> = Vec::with_capacity(features);
    let mut sorted_vals: Vec<Vec<f32>> = Vec::with_capacity(features);
    for f in 0..features {
        let mut idx: Vec<u32> = (0..n as u32).collect();
        idx.sort_by(|&a, &b| x[a as usize * features + f].total_cmp(&x[b as usize * features + f]));
        sorted_vals.push(idx.iter().map(|&i| x[i as usize * features + f]).collect());
        order.push(idx);
    }

    let base = y.iter().sum::<f64>() / n as f64;
    let mut pred = vec![base; n];
    let mut grad = vec![0.0; n];
    let mut node_of = vec![0u32; n];
    let mut arena_of = vec![0usize; n];
    let mut trees = Vec::with_capacity(params.n_trees);
    let mut history = Vec::with_capacity(params.n_trees);

    for _ in 0..params.n_trees {
        for i in 0..n {
            grad[i] = pred[i] - y[i];
        }
        let mut arena: Vec<Build> = vec![Build::Leaf(0.0)];
        let g_total: f64 = grad.iter().sum();
        let mut frontier = vec![Frontier { arena: 0, g: g_total, h: n as f64 }];
        node_of.iter_mut().for_each(|v| *v = 0);
        arena_of.iter_mut().for_each(|v| *v = 0);

        for _level in 0..params.max_depth {
            if frontier.is_empty() {
                break;
            }
            let m = frontier.len();
            let mut best: Vec<Option<Best>> = vec![None; m];
            let mut gl = vec![0.0; m];
            let mut hl = vec![0.0; m];
            let mut last = vec![0.0f32; m];
            let parent_score: Vec<f64> = frontier.iter().map(|fr| fr.g * fr.g / (fr.h + lambda)).collect();
            for f in 0..features {
                gl.iter_mut().for_each(|v| *v = 0.0);
                hl.iter_mut().for_each(|v| *v = 0.0);
                let vals = &sorted_vals[f];
                for (k, &i) in order[f].iter().enumerate() {
                    let nd = node_of[i as usize];
                    if nd == NONE {
                        continue;
                    }
                    let nd = nd as usize;
                    let v = vals[k];
                    if hl[nd] > 0.0 && v > last[nd] {
                        let fr = &frontier[nd];
                        let (gr, hr) = (fr.g - gl[nd], fr.h - hl[nd]);
                        let gain = gl[nd] * gl[nd] / (hl[nd] + lambda) + gr * gr / (hr + lambda) - parent_score[nd];
                        if gain > best[nd].map_or(0.0, |b| b.gain) {
                            best[nd] = Some(Best { gain, feature: f, threshold: (last[nd] as f64 + v as f64) / 2.0 });
                        }
                    }
                    gl[nd] += grad[i as usize];
                    hl[nd] += 1.0;
                    last[nd] = v;
                }
            }

            // Children of split nodes form the next frontier; the rest become leaves.
            let mut next = Vec::new();
            let mut remap = vec![(NONE, NONE); m];
            for (nd, fr) in frontier.iter().enumerate() {
                if let Some(b) = best[nd] {
                    let (l, r) = (arena.len(), arena.len() + 1);
                    arena.push(Build::Leaf(0.0));
                    arena.push(Build::Leaf(0.0));
                    arena[fr.arena] =
                        Build::Split { feature: b.feature as u32, threshold: b.threshold, left: l, right: r };
                    remap[nd] = (next.len() as u32, next.len() as u32 + 1);
                    next.push(Frontier { arena: l, g: 0.0, h: 0.0 });
                    next.push(Frontier { arena: r, g: 0.0, h: 0.0 });
                } else {
                    arena[fr.arena] = Build::Leaf(-fr.g / (fr.h + lambda));
                }
            }
            for i in 0..n {
                let nd = node_of[i];
                if nd == NONE {
                    continue;
                }
                let nd = nd as usize;
                match best[nd] {
                    Some(b) => {
                        let go_left = x[i * features + b.feature] as f64 <= b.threshold;
                        let child = if go_left { remap[nd].0 } else { remap[nd].1 } as usize;
                        node_of[i] = child as u32;
                        arena_of[i] = next[child].arena;
                        next[child].g += grad[i];
                        next[child].h += 1.0;
                    }
                    None => node_of[i] = NONE,
                }
            }
            frontier = next;
        }
        for fr in &frontier {
            arena[fr.arena] = Build::Leaf(-fr.g / (fr.h + lambda));
        }

        let mut sse = 0.0;
        for i in 0..n {
            if let Build::Leaf(w) = arena[arena_of[i]] {
                pred[i] += params.learning_rate * w;
            }
            sse += (y[i] - pred[i]) * (y[i] - pred[i]);
        }
        history.push(sse / n as f64);
        trees.push(to_preorder(&arena));
    }
    Ok((GbtRegressor { base_score: base, learning_rate: params.learning_rate, trees }, history))
}

fn to_preorder(arena: &[Build]) -> Tree {
    fn emit(arena: &[Build], i: usize, out: &mut Vec<TreeNode>) {
        match arena[i] {
            Build::Leaf(weight) => out.push(TreeNode::Leaf { weight }),
            Build::Split { feature, threshold, left, right } => {
                let at = out.len();
                out.push(TreeNode::Split { feature, threshold, right: 0 });
                emit(arena, left, out);
                let r = out.len() as u32;
                out[at] = TreeNode::Split { feature, threshold, right: r };
                emit(arena, right, out);
            }
        }
    }
    let mut nodes = Vec::new();
    emit(arena, 0, &mut nodes);
    Tree { nodes }
}

#[cfg(test)]
pub(crate) mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    /// Rebuilds each tree from its pre-order layout without the stored
    /// right-child offsets and evaluates it recursively.
    pub(crate) fn naive_predict(model: &GbtRegressor, x: &[f32]) -> f64 {
        enum N {
            Leaf(f64),
            Split(u32, f64, Box<N>, Box<N>),
        }
        fn parse(nodes: &[TreeNode], i: usize) -> (N, usize) {
            match nodes[i] {
                TreeNode::Leaf { weight } => (N::Leaf(weight), i + 1),
                TreeNode::Split { feature, threshold, .. } => {
                    let (l, after_l) = parse(nodes, i + 1);
                    let (r, after_r) = parse(nodes, after_l);
                    (N::Split(feature, threshold, Box::new(l), Box::new(r)), after_r)
                }
            }
        }
        fn eval(n: &N, x: &[f32]) -> f64 {
            match n {
                N::Leaf(w) => *w,
                N::Split(f, t, l, r) => {
                    if (x[*f as usize] as f64) <= *t {
                        eval(l, x)
                    } else {
                        eval(r, x)
                    }
                }
            }
        }
        let mut sum = 0.0;
        for t in &model.trees {
            let (root, end) = parse(&t.nodes, 0);
            assert_eq!(end, t.nodes.len());
            sum += eval(&root, x);
        }
        model.base_score + model.learning_rate * sum
    }

    pub(crate) fn synthetic(n: usize, d: usize, seed: u64) -> (Vec<f32>, Vec<f64>) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let x: Vec<f32> = (0..n * d).map(|_| rng.gen_range(-1.0f32..1.0)).collect();
        let y = (0..n)
            .map(|i| {
                let r = &x[i * d..(i + 1) * d];
                3.0 * (r[0] as f64) + if r[1] > 0.2 { 2.0 } else { -1.0 } + 0.1 * rng.gen_range(-1.0..1.0)
            })
            .collect();
        (x, y)
    }

    #[test]
    fn constant_targets_predict_constant() {
        let (x, _) = synthetic(50, 3, 1);
        let y = vec![4.5; 50];
        let m = gbt_train(&x, 3, &y, &GbtParams { n_trees: 5, ..Default::default() }).unwrap();
        assert!(m.trees.iter().all(|t| t.nodes == vec![TreeNode::Leaf { weight: 0.0 }]));
        assert_eq!(m.predict(&[0.3, 0.1, -0.9]), 4.5);
    }

    #[test]
    fn stump_splits_at_step() {
        let x: Vec<f32> = (0..10).map(|i| i as f32).collect();
        let y: Vec<f64> = (0..10).map(|i| if i < 4 { 1.0 } else { 6.0 }).collect();
        let p = GbtParams { n_trees: 1, max_depth: 1, learning_rate: 0.1, lambda: 1.0 };
        let m = gbt_train(&x, 1, &y, &p).unwrap();
        let t = &m.trees[0];
        let TreeNode::Split { feature, threshold, right } = t.nodes[0] else { panic!("no split") };
        assert_eq!((feature, threshold, right), (0, 3.5, 2));

        // Leaf weights are shrunk residual sums: sum(r) / (n + lambda).
        let base = 4.0;
        let (wl, wr) = (4.0 * (1.0 - base) / 5.0, 6.0 * (6.0 - base) / 7.0);
        assert_eq!(t.nodes[1], TreeNode::Leaf { weight: wl });
        assert_eq!(t.nodes[2], TreeNode::Leaf { weight: wr });
        assert!((m.predict(&[0.0]) - (base + 0.1 * wl)).abs() < 1e-12);
        assert!((m.predict(&[9.0]) - (base + 0.1 * wr)).abs() < 1e-12);
    }

    #[test]
    fn exhaustive_gain_oracle_picks_same_stump() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let x: Vec<f32> = (0..40).map(|_| rng.gen_range(0.0f32..10.0)).collect();
        let y: Vec<f64> = x.iter().map(|&v| if v > 6.1 { 3.0 } else { 0.0 } + rng.gen_range(-0.5..0.5)).collect();
        let m = gbt_train(&x, 1, &y, &GbtParams { n_trees: 1, max_depth: 1, ..Default::default() }).unwrap();

        let mean = y.iter().sum::<f64>() / 40.0;
        let g: Vec<f64> = y.iter().map(|v| mean - v).collect();
        let mut vals: Vec<f32> = x.clone();
        vals.sort_by(f32::total_cmp);
        vals.dedup();
        let score = |s: f64, h: f64| s * s / (h + 1.0);
        let total: f64 = g.iter().sum();
        let mut best = (0.0, f64::NAN);
        for w in vals.windows(2) {
            let t = (w[0] as f64 + w[1] as f64) / 2.0;
            let (mut sl, mut hl) = (0.0, 0.0);
            for i in 0..40 {
                if x[i] as f64 <= t {
                    sl += g[i];
                    hl += 1.0;
                }
            }
            let gain = score(sl, hl) + score(total - sl, 40.0 - hl) - score(total, 40.0);
            if gain > best.0 {
                best = (gain, t);
            }
        }
        let TreeNode::Split { threshold, .. } = m.trees[0].nodes[0] else { panic!() };
        assert_eq!(threshold, best.1);
    }

    #[test]
    fn predictions_match_naive_traversal() {
        let (x, y) = synthetic(300, 5, 4);
        let m = gbt_train(&x, 5, &y, &GbtParams { n_trees: 20, ..Default::default() }).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for _ in 0..200 {
            let q: Vec<f32> = (0..5).map(|_| rng.gen_range(-1.2f32..1.2)).collect();
            assert_eq!(m.predict(&q), naive_predict(&m, &q));
        }
    }

    #[test]
    fn training_mse_never_increases() {
        let (x, y) = synthetic(400, 4, 6);
        let (m, hist) = gbt_train_with_history(&x, 4, &y, &GbtParams { n_trees: 40, ..Default::default() }).unwrap();
        assert_eq!(hist.len(), 40);
        assert!(hist.windows(2).all(|w| w[1] <= w[0] + 1e-12));
        assert!(m.max_depth() <= 6);
        assert!(m.trees.iter().all(|t| t.parameter_count() <= 190));
        assert!(m.trees.iter().all(|t| t.max_feature().is_none_or(|f| f < 4)));
    }

    #[test]
    fn deterministic() {
        let (x, y) = synthetic(200, 3, 8);
        let p = GbtParams { n_trees: 10, ..Default::default() };
        assert_eq!(gbt_train(&x, 3, &y, &p).unwrap(), gbt_train(&x, 3, &y, &p).unwrap());
    }

    #[test]
    fn zero_trees_predict_base() {
        let m = gbt_train(&[1.0, 2.0], 1, &[1.0, 3.0], &GbtParams { n_trees: 0, ..Default::default() }).unwrap();
        assert_eq!(m.predict(&[100.0]), 2.0);
        assert!(gbt_train(&[1.0], 1, &[1.0], &GbtParams::default()).is_err());
    }

    #[test]
    fn piecewise_constant_between_thresholds() {
        let (x, y) = synthetic(200, 2, 9);
        let m = gbt_train(&x, 2, &y, &GbtParams { n_trees: 15, ..Default::default() }).unwrap();
        let mut thresholds: Vec<f64> = m
            .trees
            .iter()
            .flat_map(|t| t.nodes.iter())
            .filter_map(|n| match n {
                TreeNode::Split { feature: 0, threshold, .. } => Some(*threshold),
                _ => None,
            })
            .collect();
        thresholds.sort_by(f64::total_cmp);
        // Any two points strictly between the same adjacent thresholds agree.
        for w in thresholds.windows(2) {
            let (a, b) = (w[0] + (w[1] - w[0]) * 0.25, w[0] + (w[1] - w[0]) * 0.75);
            if (a as f32 as f64) > w[0] && (b as f32 as f64) <= w[1] {
                assert_eq!(m.predict(&[a as f32, 0.5]), m.predict(&[b as f32, 0.5]));
            }
        }
    }
}
