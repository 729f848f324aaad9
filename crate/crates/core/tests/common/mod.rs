//! Seeded generators shared by the acceptance and property tests.
#![allow(dead_code)]

use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use neurocactus::cactus::{Bud, Cactus, CactusDecomposition, CascadeLink, CascadePart};
use neurocactus::dynamics::ModelParams;
use neurocactus::graph::{Edge, InputNode, NodeId, Sign, SignedDigraph, WeightBounds};
use neurocactus::resilience::{CascadeSpec, ComponentStatus, LinkSpec};

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn bounds() -> WeightBounds {
    WeightBounds::symmetric(0.1, 1.2)
}

pub fn params() -> ModelParams {
    ModelParams {
        c_n: 5.0,
        c_a_plus: 0.98,
        c_a_minus: 0.98,
        theta: 0.1,
        tau: 0.2,
        dt: 1e-3,
        plasticity: Default::default(),
        u_max: 5.0,
    }
}

pub fn edge(src: NodeId, dst: NodeId, w: f64) -> Edge {
    Edge {
        src,
        dst,
        sign: if w > 0.0 { Sign::Excitatory } else { Sign::Inhibitory },
        weight: w,
    }
}

pub fn random_weight<R: Rng>(r: &mut R) -> f64 {
    let m = r.random_range(0.2..=1.0);
    if r.random_bool(0.7) {
        m
    } else {
        -m
    }
}

pub fn graph(labels: Vec<String>, edges: Vec<Edge>, inputs: &[NodeId], outputs: Vec<NodeId>) -> SignedDigraph {
    SignedDigraph::new(
        labels,
        edges,
        bounds(),
        inputs.iter().map(|&v| InputNode { node: v, gain: 1.0 }).collect(),
        outputs,
    )
    .expect("generated graph is valid")
}

fn labels(prefix: &str, n: usize) -> Vec<String> {
    (0..n).map(|i| format!("{prefix}{i}")).collect()
}

/// Random digraph on `n` nodes with input 0 and a planted path from
/// node 0 through distinct nodes to `n − 1`.
pub fn random_upstream<R: Rng>(r: &mut R, n: usize) -> SignedDigraph {
    let mut order: Vec<NodeId> = (1..n - 1).collect();
    for i in (1..order.len()).rev() {
        order.swap(i, r.random_range(0..=i));
    }
    let hops = r.random_range(0..=order.len());
    let mut path = vec![0];
    path.extend_from_slice(&order[..hops]);
    path.push(n - 1);
    let mut present = vec![vec![false; n]; n];
    let mut edges = Vec::new();
    for w in path.windows(2) {
        present[w[0]][w[1]] = true;
        edges.push(edge(w[0], w[1], random_weight(r)));
    }
    for s in 0..n {
        for d in 0..n {
            if s != d && !present[s][d] && r.random_bool(0.2) {
                present[s][d] = true;
                edges.push(edge(s, d, random_weight(r)));
            }
        }
    }
    graph(labels("u", n), edges, &[0], vec![])
}

/// Random single-cactus graph rooted at node 0 (its only input): a stem
/// with buds of two or three nodes hung on stem or earlier bud nodes, plus
/// random cross-links.
pub fn random_cactus<R: Rng>(r: &mut R, prefix: &str, n: usize) -> (SignedDigraph, CactusDecomposition) {
    let mut stem_len = r.random_range(1..=n.min(4));
    if n - stem_len == 1 {
        stem_len += 1;
    }
    let stem: Vec<NodeId> = (0..stem_len).collect();
    let mut edges: Vec<(NodeId, NodeId)> = stem.windows(2).map(|w| (w[0], w[1])).collect();
    let mut placed = stem_len;
    let mut buds = Vec::new();
    while placed < n {
        let left = n - placed;
        let len = if left == 2 || left == 4 || (left > 3 && r.random_bool(0.5)) { 2 } else { 3 };
        let cycle: Vec<NodeId> = (placed..placed + len).collect();
        let dangling = r.random_range(0..placed);
        for k in 0..len {
            edges.push((cycle[k], cycle[(k + 1) % len]));
        }
        edges.push((dangling, cycle[0]));
        buds.push(Bud {
            attach: cycle[0],
            cycle,
            dangling,
        });
        placed += len;
    }
    let mut cross = Vec::new();
    for s in 0..n {
        for d in 1..n {
            if s != d && !edges.contains(&(s, d)) && r.random_bool(0.1) {
                edges.push((s, d));
                cross.push((s, d));
            }
        }
    }
    let g = graph(
        labels(prefix, n),
        edges.iter().map(|&(s, d)| edge(s, d, random_weight(r))).collect(),
        &[0],
        vec![],
    );
    let d = CactusDecomposition {
        cacti: vec![Cactus { stem, buds }],
        cross_links: cross,
    };
    (g, d)
}

/// Upstream of unknown controllability with a guaranteed input-to-exit
/// path, linked into a random single-entry cactus.
pub fn random_single_input_cascade(seed: u64) -> CascadeSpec {
    let mut r = rng(seed);
    let nu = r.random_range(2..=7);
    let nd = r.random_range(1..=7);
    let upstream = random_upstream(&mut r, nu);
    let (downstream, _) = random_cactus(&mut r, "d", nd);
    CascadeSpec {
        links: vec![LinkSpec {
            exit: nu - 1,
            entry: 0,
            sign: Sign::Excitatory,
            weight: r.random_range(0.2..=1.0),
        }],
        upstream,
        upstream_status: ComponentStatus::Unknown,
        downstream,
        downstream_status: ComponentStatus::KnownControllable,
    }
}

/// Random sparse `(A, B)` on at most six states; sparse draws are often
/// uncontrollable.
pub fn random_system(seed: u64) -> (DMatrix<f64>, DMatrix<f64>) {
    let mut r = rng(seed);
    let n = r.random_range(1..=6);
    let m = r.random_range(1..=2);
    let density = r.random_range(0.15..0.6);
    let mut a = DMatrix::zeros(n, n);
    for i in 0..n {
        for j in 0..n {
            if r.random_bool(density) {
                a[(i, j)] = random_weight(&mut r) * if r.random_bool(0.5) { 1.0 } else { 2.0 };
            }
        }
    }
    let mut b = DMatrix::zeros(n, m);
    for k in 0..m {
        b[(r.random_range(0..n), k)] = 1.0;
    }
    (a, b)
}

/// Five subsystems in the shape of a branching cascade: an input cactus
/// feeds a chain that fans into a prolonging cactus and a pure cycle,
/// beside a second independently driven cactus.
pub fn five_part_cascade() -> (Vec<CascadePart>, Vec<CascadeLink>) {
    let cactus = |stem: Vec<NodeId>, buds: Vec<Bud>, cross: Vec<(NodeId, NodeId)>| CactusDecomposition {
        cacti: vec![Cactus { stem, buds }],
        cross_links: cross,
    };
    let p0 = CascadePart {
        graph: graph(
            labels("a", 4),
            vec![edge(0, 1, 0.9), edge(0, 2, 0.7), edge(2, 3, 0.6), edge(3, 2, -0.4)],
            &[0],
            vec![],
        ),
        decomposition: cactus(
            vec![0, 1],
            vec![Bud {
                cycle: vec![2, 3],
                dangling: 0,
                attach: 2,
            }],
            vec![],
        ),
    };
    let p1 = CascadePart {
        graph: graph(labels("b", 3), vec![edge(0, 1, 0.8), edge(1, 2, 0.7)], &[], vec![]),
        decomposition: cactus(vec![0, 1, 2], vec![], vec![]),
    };
    let p2 = CascadePart {
        graph: graph(labels("c", 2), vec![edge(0, 1, 0.6), edge(1, 0, -0.5)], &[], vec![]),
        decomposition: cactus(vec![0, 1], vec![], vec![]),
    };
    let p3 = CascadePart {
        graph: graph(
            labels("d", 5),
            vec![
                edge(0, 1, 0.9),
                edge(1, 2, 0.8),
                edge(2, 3, 0.7),
                edge(3, 4, 0.6),
                edge(4, 2, -0.5),
                edge(0, 3, 0.3),
            ],
            &[],
            vec![4],
        ),
        decomposition: cactus(
            vec![0, 1],
            vec![Bud {
                cycle: vec![2, 3, 4],
                dangling: 1,
                attach: 2,
            }],
            vec![(0, 3)],
        ),
    };
    let p4 = CascadePart {
        graph: graph(labels("e", 3), vec![edge(0, 1, 1.0), edge(1, 2, -0.6)], &[0], vec![2]),
        decomposition: cactus(vec![0, 1, 2], vec![], vec![]),
    };
    let link = |from_part, from, to_part, to, w: f64| CascadeLink {
        from_part,
        from,
        to_part,
        to,
        sign: if w > 0.0 { Sign::Excitatory } else { Sign::Inhibitory },
        weight: w,
    };
    let links = vec![link(0, 1, 1, 0, 0.8), link(1, 2, 3, 0, 0.7), link(1, 2, 2, 0, 0.5)];
    (vec![p0, p1, p2, p3, p4], links)
}
