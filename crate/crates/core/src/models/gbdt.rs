//! Gradient-boosted decision trees on the logistic loss.
//!
//! Boosting follows the standard Newton recipe: the model starts from the
//! class log-odds, each stage fits a regression tree to the residuals
//! `y - p` with curvatures `p (1 - p)`, and leaves take the damped Newton
//! value. Splits are exact greedy over midpoints of consecutive distinct
//! feature values; equal gains keep the lowest feature index, then the
//! lowest threshold, so refits are reproducible.

use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::neural::Mat;
use crate::seed;

use super::{sigmoid, FitConfig, ModelError};

const EPS_H: f64 = 1e-6;
const MIN_GAIN: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq)]
enum Node {
    Split {
        feature: usize,
        threshold: f64,
        left: u32,
        right: u32,
    },
    Leaf {
        value: f64,
    },
}

#[derive(Debug, Clone, PartialEq)]
struct Tree {
    nodes: Vec<Node>,
}

impl Tree {
    fn leaf_of(&self, row: &[f64]) -> usize {
        let mut at = 0usize;
        loop {
            match self.nodes[at] {
                Node::Leaf { .. } => return at,
                Node::Split {
                    feature,
                    threshold,
                    left,
                    right,
                } => {
                    at = if row[feature] < threshold {
                        left as usize
                    } else {
                        right as usize
                    };
                }
            }
        }
    }

    fn score(&self, row: &[f64]) -> f64 {
        match self.nodes[self.leaf_of(row)] {
            Node::Leaf { value } => value,
            Node::Split { .. } => unreachable!("leaf_of lands on a leaf"),
        }
    }

    fn depth_from(&self, at: usize) -> usize {
        match self.nodes[at] {
            Node::Leaf { .. } => 0,
            Node::Split { left, right, .. } => {
                1 + self
                    .depth_from(left as usize)
                    .max(self.depth_from(right as usize))
            }
        }
    }

    fn write_preorder(&self, at: usize, out: &mut String) {
        match self.nodes[at] {
            Node::Leaf { value } => out.push_str(&format!("leaf {value}\n")),
            Node::Split {
                feature,
                threshold,
                left,
                right,
            } => {
                out.push_str(&format!("split {feature} {threshold}\n"));
                self.write_preorder(left as usize, out);
                self.write_preorder(right as usize, out);
            }
        }
    }
}

/// Fitted boosted-tree classifier.
#[derive(Debug, Clone, PartialEq)]
pub struct GbdtModel {
    initial: f64,
    learning_rate: f64,
    n_features: usize,
    max_depth: usize,
    trees: Vec<Tree>,
}

impl GbdtModel {
    pub fn n_trees(&self) -> usize {
        self.trees.len()
    }

    pub fn n_features(&self) -> usize {
        self.n_features
    }

    pub fn initial_score(&self) -> f64 {
        self.initial
    }

    pub fn learning_rate(&self) -> f64 {
        self.learning_rate
    }

    pub fn predict_proba(&self, x: &Mat) -> Result<Vec<f64>, ModelError> {
        self.predict_proba_prefix(x, self.trees.len())
    }

    /// Scores using only the first `n_trees` stages, for staged diagnostics.
    pub fn predict_proba_prefix(&self, x: &Mat, n_trees: usize) -> Result<Vec<f64>, ModelError> {
        if x.cols() != self.n_features {
            return Err(ModelError::WidthMismatch {
                expected: self.n_features,
                found: x.cols(),
            });
        }
        if n_trees > self.trees.len() {
            return Err(ModelError::BadConfig(format!(
                "requested {n_trees} stages but the model has {}",
                self.trees.len()
            )));
        }
        let mut out = Vec::with_capacity(x.rows());
        for i in 0..x.rows() {
            let row = x.row(i);
            let mut f = self.initial;
            for tree in &self.trees[..n_trees] {
                f += self.learning_rate * tree.score(row);
            }
            out.push(sigmoid(f));
        }
        Ok(out)
    }

    pub fn to_text(&self) -> String {
        let mut s = String::new();
        s.push_str("gbdt v1\n");
        s.push_str(&format!("features {}\n", self.n_features));
        s.push_str(&format!("max_depth {}\n", self.max_depth));
        s.push_str(&format!("learning_rate {}\n", self.learning_rate));
        s.push_str(&format!("initial {}\n", self.initial));
        s.push_str(&format!("trees {}\n", self.trees.len()));
        for tree in &self.trees {
            s.push_str(&format!("tree nodes {}\n", tree.nodes.len()));
            tree.write_preorder(0, &mut s);
        }
        s
    }

    pub fn from_text(text: &str) -> Result<GbdtModel, ModelError> {
        Parser::new(text).parse()
    }
}

struct Parser<'a> {
    lines: std::iter::Enumerate<std::str::Lines<'a>>,
}

impl<'a> Parser<'a> {
    fn new(text: &'a str) -> Parser<'a> {
        Parser {
            lines: text.lines().enumerate(),
        }
    }

    fn err(line: usize, msg: impl Into<String>) -> ModelError {
        ModelError::Parse {
            line,
            msg: msg.into(),
        }
    }

    fn next_fields(&mut self) -> Result<(usize, Vec<&'a str>), ModelError> {
        for (i, raw) in self.lines.by_ref() {
            let t = raw.trim();
            if t.is_empty() {
                continue;
            }
            return Ok((i + 1, t.split_whitespace().collect()));
        }
        Err(Self::err(0, "unexpected end of input"))
    }

    fn keyword_value(&mut self, want: &str) -> Result<(usize, String), ModelError> {
        let (line, f) = self.next_fields()?;
        if f.len() != 2 || f[0] != want {
            return Err(Self::err(line, format!("expected `{want} <value>`")));
        }
        Ok((line, f[1].to_string()))
    }

    fn finite(line: usize, s: &str) -> Result<f64, ModelError> {
        let v: f64 = s
            .parse()
            .map_err(|_| Self::err(line, format!("bad float `{s}`")))?;
        if !v.is_finite() {
            return Err(Self::err(line, format!("non-finite value `{s}`")));
        }
        Ok(v)
    }

    fn parse(mut self) -> Result<GbdtModel, ModelError> {
        let (line, f) = self.next_fields()?;
        if f != ["gbdt", "v1"] {
            return Err(Self::err(line, "expected header `gbdt v1`"));
        }
        let (line, v) = self.keyword_value("features")?;
        let n_features: usize = v
            .parse()
            .map_err(|_| Self::err(line, format!("bad count `{v}`")))?;
        if n_features == 0 {
            return Err(Self::err(line, "features must be positive"));
        }
        let (line, v) = self.keyword_value("max_depth")?;
        let max_depth: usize = v
            .parse()
            .map_err(|_| Self::err(line, format!("bad depth `{v}`")))?;
        let (line, v) = self.keyword_value("learning_rate")?;
        let learning_rate = Self::finite(line, &v)?;
        if learning_rate <= 0.0 {
            return Err(Self::err(line, "learning_rate must be positive"));
        }
        let (line, v) = self.keyword_value("initial")?;
        let initial = Self::finite(line, &v)?;
        let (line, v) = self.keyword_value("trees")?;
        let n_trees: usize = v
            .parse()
            .map_err(|_| Self::err(line, format!("bad count `{v}`")))?;

        let mut trees = Vec::with_capacity(n_trees);
        for _ in 0..n_trees {
            let (line, f) = self.next_fields()?;
            if f.len() != 3 || f[0] != "tree" || f[1] != "nodes" {
                return Err(Self::err(line, "expected `tree nodes <count>`"));
            }
            let count: usize = f[2]
                .parse()
                .map_err(|_| Self::err(line, format!("bad count `{}`", f[2])))?;
            if count == 0 || count % 2 == 0 {
                return Err(Self::err(line, format!("impossible node count {count}")));
            }
            let mut nodes = Vec::with_capacity(count);
            let root_line = self.parse_node(&mut nodes, n_features, count)?;
            if nodes.len() != count {
                return Err(Self::err(
                    root_line,
                    format!("tree declared {count} nodes, found {}", nodes.len()),
                ));
            }
            let tree = Tree { nodes };
            if tree.depth_from(0) > max_depth {
                return Err(Self::err(root_line, "tree exceeds declared max_depth"));
            }
            trees.push(tree);
        }
        if let Some((i, raw)) = self.lines.find(|(_, l)| !l.trim().is_empty()) {
            return Err(Self::err(i + 1, format!("trailing content `{}`", raw.trim())));
        }
        Ok(GbdtModel {
            initial,
            learning_rate,
            n_features,
            max_depth,
            trees,
        })
    }

    fn parse_node(
        &mut self,
        nodes: &mut Vec<Node>,
        n_features: usize,
        budget: usize,
    ) -> Result<usize, ModelError> {
        if nodes.len() >= budget {
            let (line, _) = self.next_fields()?;
            return Err(Self::err(line, "more nodes than declared"));
        }
        let (line, f) = self.next_fields()?;
        match f.as_slice() {
            ["leaf", v] => {
                let value = Self::finite(line, v)?;
                nodes.push(Node::Leaf { value });
                Ok(line)
            }
            ["split", feat, thr] => {
                let feature: usize = feat
                    .parse()
                    .map_err(|_| Self::err(line, format!("bad feature `{feat}`")))?;
                if feature >= n_features {
                    return Err(Self::err(line, format!("feature {feature} out of range")));
                }
                let threshold = Self::finite(line, thr)?;
                let my = nodes.len();
                nodes.push(Node::Split {
                    feature,
                    threshold,
                    left: 0,
                    right: 0,
                });
                let left = nodes.len() as u32;
                self.parse_node(nodes, n_features, budget)?;
                let right = nodes.len() as u32;
                self.parse_node(nodes, n_features, budget)?;
                if let Node::Split {
                    left: l, right: r, ..
                } = &mut nodes[my]
                {
                    *l = left;
                    *r = right;
                }
                Ok(line)
            }
            _ => Err(Self::err(line, "expected `leaf <v>` or `split <f> <t>`")),
        }
    }
}

struct BuildNode {
    g: f64,
    h: f64,
    count: usize,
    split: Option<(usize, f64)>,
    children: Option<(usize, usize)>,
}

fn grow_tree(
    x: &Mat,
    sorted: &[Vec<u32>],
    g: &[f64],
    h: &[f64],
    in_tree: &[bool],
    cfg: &FitConfig,
) -> Tree {
    let n = x.rows();
    let d = x.cols();
    let mut node_of = vec![0u32; n];
    let (mut g0, mut h0, mut c0) = (0.0, 0.0, 0usize);
    for i in 0..n {
        if in_tree[i] {
            g0 += g[i];
            h0 += h[i];
            c0 += 1;
        }
    }
    let mut nodes = vec![BuildNode {
        g: g0,
        h: h0,
        count: c0,
        split: None,
        children: None,
    }];
    let mut frontier = vec![0usize];

    for _ in 0..cfg.max_depth {
        let splittable: Vec<usize> = frontier
            .iter()
            .copied()
            .filter(|&id| nodes[id].count >= 2 * cfg.min_samples_leaf)
            .collect();
        if splittable.is_empty() {
            break;
        }
        let ns = splittable.len();
        let mut slot_of = vec![usize::MAX; nodes.len()];
        for (s, &id) in splittable.iter().enumerate() {
            slot_of[id] = s;
        }

        let mut best_gain = vec![MIN_GAIN; ns];
        let mut best = vec![None::<(usize, f64)>; ns];
        let mut acc_g = vec![0.0f64; ns];
        let mut acc_h = vec![0.0f64; ns];
        let mut acc_c = vec![0usize; ns];
        let mut last_v = vec![0.0f64; ns];

        for feat in 0..d {
            acc_g.fill(0.0);
            acc_h.fill(0.0);
            acc_c.fill(0);
            for &iu in &sorted[feat] {
                let i = iu as usize;
                if !in_tree[i] {
                    continue;
                }
                let s = slot_of[node_of[i] as usize];
                if s == usize::MAX {
                    continue;
                }
                let v = x.get(i, feat);
                if acc_c[s] > 0 && v > last_v[s] {
                    let id = splittable[s];
                    let right_c = nodes[id].count - acc_c[s];
                    if acc_c[s] >= cfg.min_samples_leaf && right_c >= cfg.min_samples_leaf {
                        let (gl, hl) = (acc_g[s], acc_h[s]);
                        let (gr, hr) = (nodes[id].g - gl, nodes[id].h - hl);
                        let gain = gl * gl / (hl + EPS_H) + gr * gr / (hr + EPS_H)
                            - nodes[id].g * nodes[id].g / (nodes[id].h + EPS_H);
                        if gain > best_gain[s] {
                            best_gain[s] = gain;
                            best[s] = Some((feat, 0.5 * (last_v[s] + v)));
                        }
                    }
                }
                acc_g[s] += g[i];
                acc_h[s] += h[i];
                acc_c[s] += 1;
                last_v[s] = v;
            }
        }

        let mut next_frontier = Vec::new();
        for s in 0..ns {
            let Some((feat, thr)) = best[s] else { continue };
            let id = splittable[s];
            let li = nodes.len();
            let ri = nodes.len() + 1;
            nodes[id].split = Some((feat, thr));
            nodes[id].children = Some((li, ri));
            for _ in 0..2 {
                nodes.push(BuildNode {
                    g: 0.0,
                    h: 0.0,
                    count: 0,
                    split: None,
                    children: None,
                });
            }
            next_frontier.push(li);
            next_frontier.push(ri);
        }
        if next_frontier.is_empty() {
            break;
        }
        for i in 0..n {
            if !in_tree[i] {
                continue;
            }
            let id = node_of[i] as usize;
            if let (Some((feat, thr)), Some((li, ri))) = (nodes[id].split, nodes[id].children) {
                let child = if x.get(i, feat) < thr { li } else { ri };
                node_of[i] = child as u32;
                nodes[child].g += g[i];
                nodes[child].h += h[i];
                nodes[child].count += 1;
            }
        }
        frontier = next_frontier;
    }

    let final_nodes = nodes
        .iter()
        .map(|b| match (b.split, b.children) {
            (Some((feature, threshold)), Some((l, r))) => Node::Split {
                feature,
                threshold,
                left: l as u32,
                right: r as u32,
            },
            _ => Node::Leaf {
                value: b.g / (b.h + EPS_H),
            },
        })
        .collect();
    Tree { nodes: final_nodes }
}

pub(super) fn fit(x: &Mat, y: &[u8], cfg: &FitConfig) -> Result<GbdtModel, ModelError> {
    let n = x.rows();
    let d = x.cols();
    if d == 0 {
        return Err(ModelError::BadConfig("matrix has no feature columns".into()));
    }
    let ybar = y.iter().map(|&v| f64::from(v)).sum::<f64>() / n as f64;
    let initial = (ybar / (1.0 - ybar)).ln();

    let sorted: Vec<Vec<u32>> = (0..d)
        .map(|j| {
            let mut idx: Vec<u32> = (0..n as u32).collect();
            idx.sort_by(|&a, &b| x.get(a as usize, j).total_cmp(&x.get(b as usize, j)));
            idx
        })
        .collect();

    let k_sample = ((cfg.subsample * n as f64).floor() as usize).clamp(1, n);
    let mut f_scores = vec![initial; n];
    let mut probs: Vec<f64> = f_scores.iter().map(|&f| sigmoid(f)).collect();
    let mut trees = Vec::with_capacity(cfg.n_trees);

    for m in 0..cfg.n_trees {
        let g: Vec<f64> = (0..n).map(|i| f64::from(y[i]) - probs[i]).collect();
        let h: Vec<f64> = probs.iter().map(|&p| p * (1.0 - p)).collect();

        let mut in_tree = vec![true; n];
        if k_sample < n {
            in_tree.fill(false);
            let mut rng = ChaCha8Rng::seed_from_u64(seed::mix(cfg.seed, &format!("tree-{m}")));
            let mut idx: Vec<u32> = (0..n as u32).collect();
            for j in 0..k_sample {
                let r = rng.random_range(j..n);
                idx.swap(j, r);
            }
            for &i in &idx[..k_sample] {
                in_tree[i as usize] = true;
            }
        }

        let tree = grow_tree(x, &sorted, &g, &h, &in_tree, cfg);
        for i in 0..n {
            f_scores[i] += cfg.learning_rate * tree.score(x.row(i));
            probs[i] = sigmoid(f_scores[i]);
        }
        trees.push(tree);
    }

    Ok(GbdtModel {
        initial,
        learning_rate: cfg.learning_rate,
        n_features: d,
        max_depth: cfg.max_depth,
        trees,
    })
}
