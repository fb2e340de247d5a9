//! CART classification tree: greedy top-down induction on Gini impurity with
//! axis-aligned `x[f] <= threshold` splits.
//!
//! Every feature's row order is sorted once at the root and then stably
//! partitioned at each split, so a level of the tree costs `O(p * n)`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::par;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct TreeConfig {
    /// `usize::MAX` for unbounded depth.
    pub max_depth: usize,
    pub min_samples_split: usize,
}

impl Default for TreeConfig {
    fn default() -> Self {
        TreeConfig {
            max_depth: 12,
            min_samples_split: 2,
        }
    }
}

impl TreeConfig {
    pub fn unbounded() -> Self {
        TreeConfig {
            max_depth: usize::MAX,
            min_samples_split: 2,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
enum Node {
    Leaf {
        class: usize,
        counts: Vec<usize>,
    },
    Split {
        feature: usize,
        threshold: f64,
        left: usize,
        right: usize,
    },
}

#[derive(Debug, Clone, PartialEq)]
pub struct TreeClassifier {
    nodes: Vec<Node>,
    width: usize,
    classes: usize,
    config: TreeConfig,
}

/// Nested dump for inspection.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum TreeDump {
    Split {
        feature: usize,
        threshold: f64,
        left: Box<TreeDump>,
        right: Box<TreeDump>,
    },
    Leaf {
        class: usize,
        counts: Vec<usize>,
    },
}

fn argmax(counts: &[usize]) -> usize {
    let mut best = 0;
    for (k, &c) in counts.iter().enumerate() {
        if c > counts[best] {
            best = k;
        }
    }
    best
}

struct Builder<'a> {
    rows: &'a [Vec<f64>],
    labels: &'a [usize],
    classes: usize,
    config: TreeConfig,
    nodes: Vec<Node>,
    goes_left: Vec<bool>,
}

#[derive(Debug, Clone, Copy)]
struct Candidate {
    score: f64,
    threshold: f64,
}

impl Builder<'_> {
    /// Best split on one feature given its sorted row order. Score is
    /// `sum(c_l^2)/n_l + sum(c_r^2)/n_r`, which ranks splits exactly like
    /// Gini gain.
    fn best_for_feature(&self, feature: usize, order: &[u32], total: &[usize]) -> Option<Candidate> {
        let n = order.len();
        let mut left = vec![0usize; self.classes];
        let mut right = total.to_vec();
        let mut sq_left = 0.0f64;
        let mut sq_right: f64 = right.iter().map(|&c| (c * c) as f64).sum();
        let mut best: Option<Candidate> = None;
        for i in 0..n - 1 {
            let r = order[i] as usize;
            let k = self.labels[r];
            sq_left += (2 * left[k] + 1) as f64;
            sq_right -= (2 * right[k] - 1) as f64;
            left[k] += 1;
            right[k] -= 1;
            let v = self.rows[r][feature];
            let next = self.rows[order[i + 1] as usize][feature];
            if v < next {
                let nl = (i + 1) as f64;
                let nr = (n - i - 1) as f64;
                let score = sq_left / nl + sq_right / nr;
                if best.is_none_or(|b| score > b.score) {
                    best = Some(Candidate {
                        score,
                        threshold: v + (next - v) / 2.0,
                    });
                }
            }
        }
        best
    }

    fn build(&mut self, orders: Vec<Vec<u32>>, depth: usize) -> usize {
        let n = orders[0].len();
        let mut counts = vec![0usize; self.classes];
        for &r in &orders[0] {
            counts[self.labels[r as usize]] += 1;
        }
        let pure = counts.iter().filter(|&&c| c > 0).count() <= 1;
        let id = self.nodes.len();
        self.nodes.push(Node::Leaf {
            class: argmax(&counts),
            counts: counts.clone(),
        });
        if pure || depth >= self.config.max_depth || n < self.config.min_samples_split.max(2) {
            return id;
        }

        let width = orders.len();
        let this = &*self;
        let per_feature = par::map_range(width, 16, |f| this.best_for_feature(f, &orders[f], &counts));
        let mut best: Option<(usize, Candidate)> = None;
        for (f, cand) in per_feature.into_iter().enumerate() {
            if let Some(c) = cand {
                if best.is_none_or(|(_, b)| c.score > b.score) {
                    best = Some((f, c));
                }
            }
        }
        let Some((feature, cand)) = best else {
            return id;
        };

        for &r in &orders[0] {
            let r = r as usize;
            self.goes_left[r] = self.rows[r][feature] <= cand.threshold;
        }
        let goes_left = &self.goes_left;
        let (left_orders, right_orders): (Vec<Vec<u32>>, Vec<Vec<u32>>) = orders
            .into_iter()
            .map(|order| order.into_iter().partition(|&r| goes_left[r as usize]))
            .unzip();

        let left = self.build(left_orders, depth + 1);
        let right = self.build(right_orders, depth + 1);
        self.nodes[id] = Node::Split {
            feature,
            threshold: cand.threshold,
            left,
            right,
        };
        id
    }
}

impl TreeClassifier {
    pub fn fit(rows: &[Vec<f64>], labels: &[usize], classes: usize, config: TreeConfig) -> Result<Self> {
        if rows.is_empty() {
            return Err(Error::InvalidInput("cannot fit a tree on zero rows".into()));
        }
        if rows.len() != labels.len() {
            return Err(Error::InvalidInput(format!(
                "{} rows but {} labels",
                rows.len(),
                labels.len()
            )));
        }
        if classes == 0 {
            return Err(Error::InvalidConfig("class count must be positive".into()));
        }
        let width = rows[0].len();
        for r in rows {
            if r.len() != width {
                return Err(Error::shape(width, r.len()));
            }
        }
        if let Some(&bad) = labels.iter().find(|&&y| y >= classes) {
            return Err(Error::InvalidLabel { label: bad, classes });
        }
        if rows.len() > u32::MAX as usize {
            return Err(Error::InvalidInput("too many rows".into()));
        }

        let mut builder = Builder {
            rows,
            labels,
            classes,
            config,
            nodes: Vec::new(),
            goes_left: vec![false; rows.len()],
        };
        if width == 0 {
            // no features: majority leaf
            builder.build(vec![(0..rows.len() as u32).collect()], usize::MAX);
        } else {
            let orders = par::map_range(width, 16, |f| {
                let mut order: Vec<u32> = (0..rows.len() as u32).collect();
                order.sort_by(|&a, &b| rows[a as usize][f].total_cmp(&rows[b as usize][f]).then(a.cmp(&b)));
                order
            });
            builder.build(orders, 0);
        }
        Ok(TreeClassifier {
            nodes: builder.nodes,
            width,
            classes,
            config,
        })
    }

    pub fn predict(&self, x: &[f64]) -> Result<usize> {
        if x.len() != self.width {
            return Err(Error::shape(self.width, x.len()));
        }
        let mut id = 0;
        loop {
            match &self.nodes[id] {
                Node::Leaf { class, .. } => return Ok(*class),
                Node::Split {
                    feature,
                    threshold,
                    left,
                    right,
                } => id = if x[*feature] <= *threshold { *left } else { *right },
            }
        }
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn classes(&self) -> usize {
        self.classes
    }

    pub fn config(&self) -> TreeConfig {
        self.config
    }

    pub fn node_count(&self) -> usize {
        self.nodes.len()
    }

    pub fn depth(&self) -> usize {
        fn go(nodes: &[Node], id: usize) -> usize {
            match &nodes[id] {
                Node::Leaf { .. } => 0,
                Node::Split { left, right, .. } => 1 + go(nodes, *left).max(go(nodes, *right)),
            }
        }
        go(&self.nodes, 0)
    }

    pub fn dump(&self) -> TreeDump {
        fn go(nodes: &[Node], id: usize) -> TreeDump {
            match &nodes[id] {
                Node::Leaf { class, counts } => TreeDump::Leaf {
                    class: *class,
                    counts: counts.clone(),
                },
                Node::Split {
                    feature,
                    threshold,
                    left,
                    right,
                } => TreeDump::Split {
                    feature: *feature,
                    threshold: *threshold,
                    left: Box::new(go(nodes, *left)),
                    right: Box::new(go(nodes, *right)),
                },
            }
        }
        go(&self.nodes, 0)
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(&self.dump())?)
    }
}
