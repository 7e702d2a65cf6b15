//! Nested-dissection ordering by level-set bisection.

use std::collections::VecDeque;

/// Node of the dissection tree: the vertices it eliminates and its subtrees.
#[derive(Debug, Clone)]
pub struct NdNode {
    pub vertices: Vec<usize>,
    pub children: Vec<usize>,
    pub parent: Option<usize>,
}

/// Dissection forest with nodes stored in postorder (children before parents).
#[derive(Debug, Clone)]
pub struct NdTree {
    pub nodes: Vec<NdNode>,
    pub roots: Vec<usize>,
}

impl NdTree {
    /// Elimination order: node vertices concatenated in postorder.
    pub fn permutation(&self) -> Vec<usize> {
        self.nodes.iter().flat_map(|nd| nd.vertices.iter().copied()).collect()
    }
}

struct Dissector<'a> {
    adj: &'a [Vec<usize>],
    leaf_size: usize,
    stamp: Vec<u32>,
    next_stamp: u32,
    level: Vec<u32>,
    nodes: Vec<NdNode>,
}

/// Dissects the graph given by symmetric adjacency lists.
///
/// Subgraphs with at most `leaf_size` vertices become leaves. Disconnected
/// pieces are dissected independently.
pub fn nested_dissection(adj: &[Vec<usize>], leaf_size: usize) -> NdTree {
    let n = adj.len();
    let mut d = Dissector {
        adj,
        leaf_size: leaf_size.max(1),
        stamp: vec![0; n],
        next_stamp: 0,
        level: vec![0; n],
        nodes: Vec::new(),
    };
    let roots = d.dissect((0..n).collect());
    let mut nodes = d.nodes;
    for id in 0..nodes.len() {
        for c in nodes[id].children.clone() {
            nodes[c].parent = Some(id);
        }
    }
    NdTree { nodes, roots }
}

impl Dissector<'_> {
    fn mark(&mut self, set: &[usize]) -> u32 {
        self.next_stamp += 1;
        let s = self.next_stamp;
        for &v in set {
            self.stamp[v] = s;
        }
        s
    }

    fn dissect(&mut self, set: Vec<usize>) -> Vec<usize> {
        if set.is_empty() {
            return Vec::new();
        }
        let comps = self.components(&set);
        comps.into_iter().map(|c| self.dissect_connected(c)).collect()
    }

    fn components(&mut self, set: &[usize]) -> Vec<Vec<usize>> {
        let s = self.mark(set);
        let seen = s + 1;
        self.next_stamp += 1;
        let mut comps = Vec::new();
        for &start in set {
            if self.stamp[start] != s {
                continue;
            }
            self.stamp[start] = seen;
            let mut comp = vec![start];
            let mut head = 0;
            while head < comp.len() {
                let v = comp[head];
                head += 1;
                for &w in &self.adj[v] {
                    if self.stamp[w] == s {
                        self.stamp[w] = seen;
                        comp.push(w);
                    }
                }
            }
            comps.push(comp);
        }
        comps
    }

    /// BFS levels from `root` inside the stamped set; returns vertices grouped by level.
    fn levels(&mut self, root: usize, s: u32) -> Vec<Vec<usize>> {
        let visit = s + 1;
        self.next_stamp = self.next_stamp.max(visit);
        let mut out: Vec<Vec<usize>> = Vec::new();
        let mut queue = VecDeque::new();
        self.stamp[root] = visit;
        self.level[root] = 0;
        queue.push_back(root);
        let mut touched = vec![root];
        while let Some(v) = queue.pop_front() {
            let l = self.level[v] as usize;
            if out.len() <= l {
                out.push(Vec::new());
            }
            out[l].push(v);
            for &w in &self.adj[v] {
                if self.stamp[w] == s {
                    self.stamp[w] = visit;
                    self.level[w] = l as u32 + 1;
                    queue.push_back(w);
                    touched.push(w);
                }
            }
        }
        for v in touched {
            self.stamp[v] = s;
        }
        out
    }

    fn dissect_connected(&mut self, comp: Vec<usize>) -> usize {
        if comp.len() <= self.leaf_size {
            return self.leaf(comp);
        }
        let s = self.mark(&comp);
        self.next_stamp += 1;

        // Pseudo-peripheral start vertex.
        let mut root = comp[0];
        let mut levels = self.levels(root, s);
        for _ in 0..5 {
            let last = levels.last().unwrap();
            let cand = *last.iter().min_by_key(|&&v| (self.adj[v].len(), v)).unwrap();
            let next = self.levels(cand, s);
            if next.len() > levels.len() {
                root = cand;
                levels = next;
            } else {
                break;
            }
        }
        let _ = root;
        if levels.len() < 3 {
            return self.leaf(comp);
        }

        // Smallest level whose preceding mass lies in the middle band.
        let total = comp.len() as f64;
        let mut best: Option<(usize, usize)> = None;
        let mut before = 0usize;
        let mut crossing = 1;
        for (l, lv) in levels.iter().enumerate() {
            let frac = before as f64 / total;
            if l > 0 && l + 1 < levels.len() {
                if (0.4..=0.6).contains(&frac) && best.is_none_or(|(_, sz)| lv.len() < sz) {
                    best = Some((l, lv.len()));
                }
                if frac < 0.5 {
                    crossing = l;
                }
            }
            before += lv.len();
        }
        let sep_level = best.map(|b| b.0).unwrap_or(crossing);

        let mut a = Vec::new();
        let mut b = Vec::new();
        for (l, lv) in levels.iter_mut().enumerate() {
            match l.cmp(&sep_level) {
                std::cmp::Ordering::Less => a.append(lv),
                std::cmp::Ordering::Greater => b.append(lv),
                std::cmp::Ordering::Equal => {}
            }
        }
        let sep = std::mem::take(&mut levels[sep_level]);
        let mut children = self.dissect(a);
        children.extend(self.dissect(b));
        self.nodes.push(NdNode { vertices: sep, children, parent: None });
        self.nodes.len() - 1
    }

    fn leaf(&mut self, mut vertices: Vec<usize>) -> usize {
        vertices.sort_unstable();
        self.nodes.push(NdNode { vertices, children: Vec::new(), parent: None });
        self.nodes.len() - 1
    }
}
