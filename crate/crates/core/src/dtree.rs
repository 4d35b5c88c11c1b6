//! CART classification trees and the three training protocols built on
//! them.
//!
//! * VarLower: a first tree sees the loads and the bid. The thresholds it
//!   places on the bid cut the bid axis into intervals `(lo, hi]`, and one
//!   load-only sub-tree is trained per interval. Online, every sub-tree
//!   votes for one active set.
//! * AllSets: one tree whose classes are whole lists of active sets.
//! * BestSet: one tree predicting the single most profitable set.

use std::collections::BTreeMap;
use std::path::Path;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::dataset::{Label, Method, SampleDatabase};
use crate::dcopf::ActiveSet;
use crate::error::{Error, Result};
use crate::network::LoadVector;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Hyperparams {
    pub max_depth: usize,
    pub min_samples_leaf: usize,
}

impl Default for Hyperparams {
    fn default() -> Self {
        Self {
            max_depth: 12,
            min_samples_leaf: 1,
        }
    }
}

/// Ranges sampled by [`hyperparam_search`], both inclusive.
pub const DEPTH_RANGE: (usize, usize) = (3, 30);
pub const MIN_LEAF_RANGE: (usize, usize) = (1, 50);

/// Per-bus loads, optionally followed by the total load and the bid.
pub fn features(load: &[f64], include_total: bool, c_s: Option<f64>) -> Vec<f64> {
    let mut x = load.to_vec();
    if include_total {
        x.push(load.iter().sum());
    }
    if let Some(c) = c_s {
        x.push(c);
    }
    x
}

pub fn feature_names(n_bus: usize, include_total: bool, with_bid: bool) -> Vec<String> {
    let mut names: Vec<String> = (0..n_bus).map(|i| format!("load_{i}")).collect();
    if include_total {
        names.push("total_load".into());
    }
    if with_bid {
        names.push("c_s".into());
    }
    names
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum Node {
    /// Samples with `x[feature] <= threshold` go left.
    Split {
        feature: usize,
        threshold: f64,
        left: usize,
        right: usize,
    },
    Leaf {
        class: usize,
        /// Training-sample ids that end here.
        samples: Vec<usize>,
    },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DecisionTree {
    /// `nodes[0]` is the root.
    pub nodes: Vec<Node>,
    pub feature_names: Vec<String>,
    pub depth: usize,
    /// Class of every training sample, indexed by id.
    pub train_classes: Vec<usize>,
}

impl DecisionTree {
    pub fn n_features(&self) -> usize {
        self.feature_names.len()
    }

    /// Node indices from the root to the leaf reached by `x`.
    pub fn path(&self, x: &[f64]) -> Vec<usize> {
        let mut path = vec![0];
        let mut at = 0;
        while let Node::Split {
            feature,
            threshold,
            left,
            right,
        } = &self.nodes[at]
        {
            at = if x[*feature] <= *threshold { *left } else { *right };
            path.push(at);
        }
        path
    }

    pub fn leaf(&self, x: &[f64]) -> usize {
        *self.path(x).last().expect("path contains the root")
    }

    pub fn predict(&self, x: &[f64]) -> usize {
        match &self.nodes[self.leaf(x)] {
            Node::Leaf { class, .. } => *class,
            Node::Split { .. } => unreachable!("paths end at leaves"),
        }
    }

    /// Training ids of all leaves below `node`.
    pub fn samples_under(&self, node: usize) -> Vec<usize> {
        let mut out = Vec::new();
        let mut stack = vec![node];
        while let Some(n) = stack.pop() {
            match &self.nodes[n] {
                Node::Leaf { samples, .. } => out.extend_from_slice(samples),
                Node::Split { left, right, .. } => {
                    stack.push(*right);
                    stack.push(*left);
                }
            }
        }
        out
    }

    /// Distinct classes of the training samples under the parent of the
    /// leaf reached by `x`, ascending. A single-leaf tree uses the leaf.
    pub fn parent_classes(&self, x: &[f64]) -> Vec<usize> {
        let path = self.path(x);
        let node = if path.len() >= 2 { path[path.len() - 2] } else { path[0] };
        let mut classes: Vec<usize> = self
            .samples_under(node)
            .into_iter()
            .map(|id| self.train_classes[id])
            .collect();
        classes.sort_unstable();
        classes.dedup();
        classes
    }

    /// Thresholds of every split on `feature`, ascending and distinct.
    pub fn thresholds_on(&self, feature: usize) -> Vec<f64> {
        let mut out: Vec<f64> = self
            .nodes
            .iter()
            .filter_map(|n| match n {
                Node::Split {
                    feature: f, threshold, ..
                } if *f == feature => Some(*threshold),
                _ => None,
            })
            .collect();
        out.sort_by(f64::total_cmp);
        out.dedup();
        out
    }

    fn validate(&self) -> Result<()> {
        if self.nodes.is_empty() {
            return Err(Error::Training("tree has no nodes".into()));
        }
        for (i, n) in self.nodes.iter().enumerate() {
            if let Node::Split {
                feature,
                threshold,
                left,
                right,
            } = n
            {
                if *left >= self.nodes.len() || *right >= self.nodes.len() || *left <= i || *right <= i {
                    return Err(Error::Training(format!("node {i} has a dangling child")));
                }
                if !threshold.is_finite() || *feature >= self.n_features() {
                    return Err(Error::Training(format!("node {i} has an invalid split")));
                }
            }
        }
        Ok(())
    }
}

struct Builder<'a> {
    x: &'a [Vec<f64>],
    y: &'a [usize],
    n_classes: usize,
    hp: Hyperparams,
    nodes: Vec<Node>,
    depth: usize,
}

impl Builder<'_> {
    fn majority(&self, ids: &[usize]) -> (usize, bool) {
        let mut counts = vec![0usize; self.n_classes];
        for &i in ids {
            counts[self.y[i]] += 1;
        }
        let mut best = 0;
        for (c, &n) in counts.iter().enumerate() {
            if n > counts[best] {
                best = c;
            }
        }
        (best, counts[best] == ids.len())
    }

    /// Best `(feature, threshold)` by weighted Gini impurity. Scanning
    /// features and thresholds in ascending order and replacing only on a
    /// strict improvement breaks ties toward the lower of each.
    fn best_split(&self, ids: &[usize]) -> Option<(usize, f64)> {
        let n = ids.len();
        let min_leaf = self.hp.min_samples_leaf.max(1);
        let n_features = self.x[ids[0]].len();
        let mut best: Option<(f64, usize, f64)> = None;
        let mut order = ids.to_vec();
        let mut left = vec![0usize; self.n_classes];
        let mut right = vec![0usize; self.n_classes];
        for f in 0..n_features {
            order.sort_by(|&a, &b| self.x[a][f].total_cmp(&self.x[b][f]).then(a.cmp(&b)));
            left.iter_mut().for_each(|c| *c = 0);
            right.iter_mut().for_each(|c| *c = 0);
            for &i in &order {
                right[self.y[i]] += 1;
            }
            // Σ count² on each side, kept incrementally.
            let mut sq_left = 0.0;
            let mut sq_right: f64 = right.iter().map(|&c| (c * c) as f64).sum();
            for k in 0..n - 1 {
                let c = self.y[order[k]];
                sq_left += (2 * left[c] + 1) as f64;
                sq_right -= (2 * right[c] - 1) as f64;
                left[c] += 1;
                right[c] -= 1;
                let (n_l, n_r) = (k + 1, n - k - 1);
                if n_l < min_leaf || n_r < min_leaf {
                    continue;
                }
                let (a, b) = (self.x[order[k]][f], self.x[order[k + 1]][f]);
                if a >= b {
                    continue;
                }
                // n · weighted Gini impurity of the two children.
                let score = (n_l as f64 - sq_left / n_l as f64) + (n_r as f64 - sq_right / n_r as f64);
                if best.map_or(true, |(s, _, _)| score < s - 1e-12 * n as f64) {
                    let mut t = 0.5 * (a + b);
                    if t >= b {
                        t = a;
                    }
                    best = Some((score, f, t));
                }
            }
        }
        best.map(|(_, f, t)| (f, t))
    }

    fn grow(&mut self, ids: Vec<usize>, depth: usize) -> usize {
        let at = self.nodes.len();
        self.depth = self.depth.max(depth);
        let (class, pure) = self.majority(&ids);
        let can_split = !pure && depth < self.hp.max_depth && ids.len() >= 2 * self.hp.min_samples_leaf.max(1);
        let split = if can_split { self.best_split(&ids) } else { None };
        let Some((feature, threshold)) = split else {
            self.nodes.push(Node::Leaf { class, samples: ids });
            return at;
        };
        self.nodes.push(Node::Split {
            feature,
            threshold,
            left: 0,
            right: 0,
        });
        let (l_ids, r_ids): (Vec<usize>, Vec<usize>) = ids.into_iter().partition(|&i| self.x[i][feature] <= threshold);
        let l = self.grow(l_ids, depth + 1);
        let r = self.grow(r_ids, depth + 1);
        if let Node::Split { left, right, .. } = &mut self.nodes[at] {
            *left = l;
            *right = r;
        }
        at
    }
}

/// Greedy CART with Gini impurity and midpoint thresholds. Leaves keep the
/// majority class (ties to the lowest class id) and their sample ids.
pub fn train_cart(x: &[Vec<f64>], y: &[usize], names: Vec<String>, hp: &Hyperparams) -> Result<DecisionTree> {
    if x.is_empty() {
        return Err(Error::Training("no training samples".into()));
    }
    if x.len() != y.len() {
        return Err(Error::Dimension {
            expected: x.len(),
            actual: y.len(),
        });
    }
    let width = names.len();
    if let Some(row) = x.iter().find(|r| r.len() != width) {
        return Err(Error::Dimension {
            expected: width,
            actual: row.len(),
        });
    }
    if x.iter().flatten().any(|v| !v.is_finite()) {
        return Err(Error::Training("non-finite feature value".into()));
    }
    let n_classes = y.iter().max().map_or(0, |m| m + 1);
    let mut b = Builder {
        x,
        y,
        n_classes,
        hp: *hp,
        nodes: Vec::new(),
        depth: 0,
    };
    b.grow((0..x.len()).collect(), 0);
    Ok(DecisionTree {
        nodes: b.nodes,
        feature_names: names,
        depth: b.depth,
        train_classes: y.to_vec(),
    })
}

/// Shuffled split into `(train, test)` index lists; the train side gets
/// `round(n · train_fraction)` entries.
pub fn split_train_test<R: Rng + ?Sized>(n: usize, train_fraction: f64, rng: &mut R) -> Result<(Vec<usize>, Vec<usize>)> {
    if !(train_fraction > 0.0 && train_fraction < 1.0) {
        return Err(Error::InvalidParameter(format!(
            "train fraction must lie in (0, 1), got {train_fraction}"
        )));
    }
    let n_train = (n as f64 * train_fraction).round() as usize;
    if n_train == 0 || n_train >= n {
        return Err(Error::Training(format!(
            "{n} samples cannot be split into nonempty train and test sets at {train_fraction}"
        )));
    }
    let mut idx: Vec<usize> = (0..n).collect();
    idx.shuffle(rng);
    let test = idx.split_off(n_train);
    Ok((idx, test))
}

pub fn tree_accuracy(tree: &DecisionTree, x: &[Vec<f64>], y: &[usize]) -> Result<f64> {
    if x.is_empty() {
        return Err(Error::Training("accuracy of an empty sample".into()));
    }
    let hits = x.iter().zip(y).filter(|(xi, yi)| tree.predict(xi) == **yi).count();
    Ok(hits as f64 / x.len() as f64)
}

/// Random search over [`DEPTH_RANGE`] × [`MIN_LEAF_RANGE`], scored on a
/// 70/30 split of the given samples. Ties go to the smaller depth, then the
/// smaller leaf size.
pub fn hyperparam_search<R: Rng + ?Sized>(
    x: &[Vec<f64>],
    y: &[usize],
    names: &[String],
    budget: usize,
    rng: &mut R,
) -> Result<Hyperparams> {
    if budget == 0 {
        return Err(Error::InvalidParameter("search budget must be positive".into()));
    }
    let configs: Vec<Hyperparams> = (0..budget)
        .map(|_| Hyperparams {
            max_depth: rng.gen_range(DEPTH_RANGE.0..=DEPTH_RANGE.1),
            min_samples_leaf: rng.gen_range(MIN_LEAF_RANGE.0..=MIN_LEAF_RANGE.1),
        })
        .collect();
    if budget == 1 {
        return Ok(configs[0]);
    }
    let (fit, val) = split_train_test(x.len(), 0.7, rng)?;
    let pick = |ids: &[usize]| -> (Vec<Vec<f64>>, Vec<usize>) {
        (ids.iter().map(|&i| x[i].clone()).collect(), ids.iter().map(|&i| y[i]).collect())
    };
    let (fx, fy) = pick(&fit);
    let (vx, vy) = pick(&val);
    let mut best: Option<(f64, Hyperparams)> = None;
    for hp in configs {
        let tree = train_cart(&fx, &fy, names.to_vec(), &hp)?;
        let acc = tree_accuracy(&tree, &vx, &vy)?;
        let better = match best {
            None => true,
            Some((a, b)) => {
                acc > a || (acc == a && (hp.max_depth, hp.min_samples_leaf) < (b.max_depth, b.min_samples_leaf))
            }
        };
        if better {
            best = Some((acc, hp));
        }
    }
    Ok(best.expect("budget is positive").1)
}

#[derive(Clone, Debug, PartialEq)]
pub struct TrainedModel {
    pub method: Method,
    pub seed: u64,
    pub n_bus: usize,
    pub n_gen: usize,
    pub n_line: usize,
    pub include_total: bool,
    pub hyperparams: Hyperparams,
    /// Class table shared by all trees; tree leaves index into it.
    pub classes: Vec<Label>,
    /// VarLower only: the tree trained with the bid as a feature.
    pub bid_tree: Option<DecisionTree>,
    /// VarLower only: critical bids separating the sub-tree intervals.
    pub thresholds: Vec<f64>,
    /// One tree, or one per bid interval for VarLower.
    pub trees: Vec<DecisionTree>,
    pub train_accuracy: f64,
    pub test_accuracy: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct TrainOptions {
    pub include_total: bool,
    pub train_fraction: f64,
    /// Random-search budget, used when `hyperparams` is `None`.
    pub budget: usize,
    pub hyperparams: Option<Hyperparams>,
}

impl Default for TrainOptions {
    fn default() -> Self {
        Self {
            include_total: true,
            train_fraction: 0.7,
            budget: 20,
            hyperparams: None,
        }
    }
}

impl TrainedModel {
    /// VarLower: number of bid intervals and sub-trees.
    pub fn n_intervals(&self) -> usize {
        self.trees.len()
    }

    fn check_load(&self, load: &LoadVector) -> Result<()> {
        if load.len() != self.n_bus {
            return Err(Error::Dimension {
                expected: self.n_bus,
                actual: load.len(),
            });
        }
        Ok(())
    }

    /// Sub-tree responsible for bid `c_s`: intervals are `(lo, hi]`.
    pub fn interval_of(&self, c_s: f64) -> usize {
        self.thresholds.iter().take_while(|&&t| c_s > t).count()
    }

    /// Class predicted for one sample. VarLower routes by the sample's bid.
    pub fn classify(&self, load: &LoadVector, c_s: Option<f64>) -> Result<usize> {
        self.check_load(load)?;
        let x = features(load.as_slice(), self.include_total, None);
        let tree = match (self.method, c_s) {
            (Method::VarLower, Some(c)) => &self.trees[self.interval_of(c)],
            (Method::VarLower, None) => {
                return Err(Error::InvalidParameter("VarLower samples need a bid".into()));
            }
            _ => &self.trees[0],
        };
        Ok(tree.predict(&x))
    }

    pub fn predict_sets(&self, load: &LoadVector) -> Result<Vec<ActiveSet>> {
        self.check_load(load)?;
        let x = features(load.as_slice(), self.include_total, None);
        let mut out = Vec::new();
        for tree in &self.trees {
            out.extend_from_slice(self.classes[tree.predict(&x)].sets());
        }
        Ok(out)
    }

    /// Plain prediction followed by every other set found under the parent
    /// of each reached leaf, without repeats.
    pub fn predict_with_parent(&self, load: &LoadVector) -> Result<Vec<ActiveSet>> {
        let mut out: Vec<ActiveSet> = Vec::new();
        for set in self.predict_sets(load)? {
            if !out.contains(&set) {
                out.push(set);
            }
        }
        let x = features(load.as_slice(), self.include_total, None);
        for tree in &self.trees {
            for class in tree.parent_classes(&x) {
                for set in self.classes[class].sets() {
                    if !out.contains(set) {
                        out.push(set.clone());
                    }
                }
            }
        }
        Ok(out)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let text = self.to_json()?;
        std::fs::write(path, text).map_err(|e| Error::io(path, e))
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_json(&text).map_err(|e| match e {
            Error::Json { source, .. } => Error::Format {
                path: path.to_path_buf(),
                reason: source.to_string(),
            },
            other => other,
        })
    }

    pub fn to_json(&self) -> Result<String> {
        let file = ModelFile {
            method: self.method,
            seed: self.seed,
            n_bus: self.n_bus,
            n_gen: self.n_gen,
            n_line: self.n_line,
            include_total: self.include_total,
            hyperparams: self.hyperparams,
            classes: self
                .classes
                .iter()
                .map(|l| match l {
                    Label::Single(s) => ClassRecord::One(s.to_hex()),
                    Label::Multi(v) => ClassRecord::Many(v.iter().map(ActiveSet::to_hex).collect()),
                })
                .collect(),
            bid_tree: self.bid_tree.clone(),
            thresholds: self.thresholds.clone(),
            trees: self.trees.clone(),
            train_accuracy: self.train_accuracy,
            test_accuracy: self.test_accuracy,
        };
        serde_json::to_string_pretty(&file).map_err(|e| Error::json("model", e))
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let f: ModelFile = serde_json::from_str(text).map_err(|e| Error::json("model", e))?;
        let parse = |h: &str| ActiveSet::from_hex(h, f.n_gen, f.n_line);
        let classes = f
            .classes
            .iter()
            .map(|c| match c {
                ClassRecord::One(h) => parse(h).map(Label::Single),
                ClassRecord::Many(hs) => hs.iter().map(|h| parse(h)).collect::<Result<Vec<_>>>().map(Label::Multi),
            })
            .collect::<Result<Vec<_>>>()?;
        let model = TrainedModel {
            method: f.method,
            seed: f.seed,
            n_bus: f.n_bus,
            n_gen: f.n_gen,
            n_line: f.n_line,
            include_total: f.include_total,
            hyperparams: f.hyperparams,
            classes,
            bid_tree: f.bid_tree,
            thresholds: f.thresholds,
            trees: f.trees,
            train_accuracy: f.train_accuracy,
            test_accuracy: f.test_accuracy,
        };
        model.validate()?;
        Ok(model)
    }

    fn validate(&self) -> Result<()> {
        if self.trees.is_empty() {
            return Err(Error::Training("model has no trees".into()));
        }
        if self.method == Method::VarLower && self.trees.len() != self.thresholds.len() + 1 {
            return Err(Error::Training(format!(
                "{} sub-trees for {} thresholds",
                self.trees.len(),
                self.thresholds.len()
            )));
        }
        let width = self.n_bus + usize::from(self.include_total);
        for tree in self.trees.iter().chain(&self.bid_tree) {
            tree.validate()?;
            for n in &tree.nodes {
                if let Node::Leaf { class, .. } = n {
                    if *class >= self.classes.len() {
                        return Err(Error::Training(format!("leaf class {class} out of range")));
                    }
                }
            }
        }
        if let Some(t) = self.trees.iter().find(|t| t.n_features() != width) {
            return Err(Error::Dimension {
                expected: width,
                actual: t.n_features(),
            });
        }
        Ok(())
    }
}

#[derive(Serialize, Deserialize)]
#[serde(untagged)]
enum ClassRecord {
    One(String),
    Many(Vec<String>),
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct ModelFile {
    method: Method,
    seed: u64,
    n_bus: usize,
    n_gen: usize,
    n_line: usize,
    include_total: bool,
    hyperparams: Hyperparams,
    classes: Vec<ClassRecord>,
    bid_tree: Option<DecisionTree>,
    thresholds: Vec<f64>,
    trees: Vec<DecisionTree>,
    train_accuracy: f64,
    test_accuracy: f64,
}

/// Sorted class table of a database and the class id of every sample.
fn class_table(db: &SampleDatabase) -> (Vec<Label>, Vec<usize>) {
    let table: BTreeMap<&Label, usize> = db
        .census()
        .into_keys()
        .enumerate()
        .map(|(i, l)| (l, i))
        .collect();
    let ids = db.samples.iter().map(|s| table[&s.label]).collect();
    (table.into_keys().cloned().collect(), ids)
}

/// Trains the tree(s) for `db.method` on a 70/30 (by default) split and
/// reports held-out accuracy.
pub fn train_model(db: &SampleDatabase, opts: &TrainOptions, seed: u64) -> Result<TrainedModel> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    if db.samples.len() < 2 {
        return Err(Error::Training(format!("{} samples are too few to train on", db.samples.len())));
    }
    let (classes, y) = class_table(db);
    let (train, test) = split_train_test(db.samples.len(), opts.train_fraction, &mut rng)?;
    let with_bid = db.method == Method::VarLower;
    if with_bid && db.samples.iter().any(|s| s.c_s.is_none()) {
        return Err(Error::Training("VarLower samples need a bid".into()));
    }
    let row = |i: usize, bid: bool| {
        let s = &db.samples[i];
        features(s.load.as_slice(), opts.include_total, if bid { s.c_s } else { None })
    };

    let first_names = feature_names(db.n_bus, opts.include_total, with_bid);
    let first_x: Vec<Vec<f64>> = train.iter().map(|&i| row(i, with_bid)).collect();
    let first_y: Vec<usize> = train.iter().map(|&i| y[i]).collect();
    let hp = match opts.hyperparams {
        Some(hp) => hp,
        None => hyperparam_search(&first_x, &first_y, &first_names, opts.budget, &mut rng)?,
    };
    let first = train_cart(&first_x, &first_y, first_names, &hp)?;

    let load_names = feature_names(db.n_bus, opts.include_total, false);
    let (bid_tree, thresholds, trees) = if with_bid {
        let bid_feature = first.n_features() - 1;
        let bids: Vec<f64> = train.iter().map(|&i| db.samples[i].c_s.expect("checked above")).collect();
        let thresholds = nonempty_cuts(first.thresholds_on(bid_feature), &bids);
        let mut groups: Vec<Vec<usize>> = vec![Vec::new(); thresholds.len() + 1];
        for (&i, &c) in train.iter().zip(&bids) {
            groups[thresholds.iter().take_while(|&&t| c > t).count()].push(i);
        }
        let mut trees = Vec::with_capacity(groups.len());
        for ids in &groups {
            let x: Vec<Vec<f64>> = ids.iter().map(|&i| row(i, false)).collect();
            let yy: Vec<usize> = ids.iter().map(|&i| y[i]).collect();
            trees.push(train_cart(&x, &yy, load_names.clone(), &hp)?);
        }
        (Some(first), thresholds, trees)
    } else {
        (None, Vec::new(), vec![first])
    };

    let mut model = TrainedModel {
        method: db.method,
        seed,
        n_bus: db.n_bus,
        n_gen: db.n_gen,
        n_line: db.n_line,
        include_total: opts.include_total,
        hyperparams: hp,
        classes,
        bid_tree,
        thresholds,
        trees,
        train_accuracy: 0.0,
        test_accuracy: 0.0,
    };
    model.train_accuracy = model_accuracy(&model, db, &train, &y)?;
    model.test_accuracy = model_accuracy(&model, db, &test, &y)?;
    log::info!(
        "{} model: {} classes, {} tree(s), depth {}, train {:.3}, test {:.3}",
        db.method,
        model.classes.len(),
        model.trees.len(),
        model.trees.iter().map(|t| t.depth).max().unwrap_or(0),
        model.train_accuracy,
        model.test_accuracy
    );
    Ok(model)
}

/// Drops cuts that would leave a `(lo, hi]` interval without any of
/// `values`. Splits deep in the bid tree see only some grid bids, so two
/// cuts can fall between the same pair of neighbouring bids.
fn nonempty_cuts(cuts: Vec<f64>, values: &[f64]) -> Vec<f64> {
    let mut kept: Vec<f64> = Vec::with_capacity(cuts.len());
    for t in cuts {
        let lo = kept.last().copied().unwrap_or(f64::NEG_INFINITY);
        if values.iter().any(|&v| v > lo && v <= t) {
            kept.push(t);
        }
    }
    let top = kept.last().copied().unwrap_or(f64::NEG_INFINITY);
    if !values.iter().any(|&v| v > top) {
        kept.pop();
    }
    kept
}

fn model_accuracy(model: &TrainedModel, db: &SampleDatabase, ids: &[usize], y: &[usize]) -> Result<f64> {
    if ids.is_empty() {
        return Err(Error::Training("accuracy of an empty sample".into()));
    }
    let mut hits = 0;
    for &i in ids {
        let s = &db.samples[i];
        if model.classify(&s.load, s.c_s)? == y[i] {
            hits += 1;
        }
    }
    Ok(hits as f64 / ids.len() as f64)
}

/// Fraction of `samples` whose label the model reproduces. Labels the
/// model has never seen count as misses.
pub fn accuracy(model: &TrainedModel, samples: &[crate::dataset::Sample]) -> Result<f64> {
    if samples.is_empty() {
        return Err(Error::Training("accuracy of an empty sample".into()));
    }
    let mut hits = 0;
    for s in samples {
        let class = model.classify(&s.load, s.c_s)?;
        if model.classes[class] == s.label {
            hits += 1;
        }
    }
    Ok(hits as f64 / samples.len() as f64)
}
