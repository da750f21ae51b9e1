//! Named rooted networks used throughout the tests and the CLI.
//!
//! * `figure1`: twelve agents on an undirected unit-weight network with a
//!   binary treatment (agents 3, 5, 10 and 12 treated), rooted at agent 1.
//! * `g1`/`g2`: one five-agent network (a triangle `r-a-h` with two leaves
//!   on `h`) rooted at a triangle vertex and at a leaf of `h`.
//! * `g3`: a star with three leaves rooted at a leaf; `g5` the same with
//!   five leaves.
//! * `g4`: a triangle `r-a-b` with a pendant on `a`, rooted at `r`.
//! * `g6`: a triangle `r-a-b` plus `r-c` where `c` carries three leaves.
//! * `knife`: a three-agent path rooted at an endpoint; `fork` equals `g3`
//!   and `spoon` equals `g4`.
//!
//! All fixtures except `figure1` carry no covariates.

use crate::graph::{full_ball, Ball, CommunityBuilder, CommunityGraph};

pub const FIXTURE_NAMES: [&str; 10] = ["g1", "g2", "g3", "g4", "g5", "g6", "knife", "fork", "spoon", "figure1"];

const FIGURE1_EDGES: [(u32, u32); 12] =
    [(6, 2), (6, 9), (2, 5), (2, 1), (5, 8), (1, 3), (1, 4), (3, 7), (4, 9), (7, 10), (11, 10), (9, 12)];
const FIGURE1_TREATED: [u32; 4] = [3, 5, 10, 12];

/// The twelve-agent treated network; agent ids are `"1"` to `"12"` and the
/// single covariate is the treatment indicator.
pub fn figure1_network() -> CommunityGraph {
    let mut b = CommunityBuilder::new(false, 1);
    for id in 1..=12u32 {
        let t = if FIGURE1_TREATED.contains(&id) { 1.0 } else { 0.0 };
        b.add_agent(&id.to_string(), &[t], None).expect("unique ids");
    }
    for (s, d) in FIGURE1_EDGES {
        b.add_edge(&s.to_string(), &d.to_string(), 1).expect("valid edge");
    }
    b.build()
}

fn network(ids: &[&str], edges: &[(&str, &str)]) -> CommunityGraph {
    let mut b = CommunityBuilder::new(false, 0);
    for id in ids {
        b.add_agent(id, &[], None).expect("unique ids");
    }
    for (s, d) in edges {
        b.add_edge(s, d, 1).expect("valid edge");
    }
    b.build()
}

fn rooted(g: &CommunityGraph, root: &str) -> Ball {
    full_ball(g, g.agent(root).expect("fixture root exists"))
}

fn g1_network() -> CommunityGraph {
    network(&["r", "a", "h", "x", "y"], &[("r", "h"), ("r", "a"), ("h", "a"), ("h", "x"), ("h", "y")])
}

fn star(leaves: usize) -> CommunityGraph {
    let ids: Vec<String> = std::iter::once("c".to_owned())
        .chain(std::iter::once("r".to_owned()))
        .chain((1..leaves).map(|i| format!("l{i}")))
        .collect();
    let id_refs: Vec<&str> = ids.iter().map(String::as_str).collect();
    let edges: Vec<(&str, &str)> = id_refs[1..].iter().map(|&l| ("c", l)).collect();
    network(&id_refs, &edges)
}

fn triangle_with_pendant() -> CommunityGraph {
    network(&["r", "a", "b", "x"], &[("r", "a"), ("r", "b"), ("a", "b"), ("a", "x")])
}

/// A fixture by name, as a complete rooted network.
pub fn fixture(name: &str) -> Option<Ball> {
    let ball = match name {
        "g1" => rooted(&g1_network(), "r"),
        "g2" => rooted(&g1_network(), "x"),
        "g3" | "fork" => rooted(&star(3), "r"),
        "g4" | "spoon" => rooted(&triangle_with_pendant(), "r"),
        "g5" => rooted(&star(5), "r"),
        "g6" => rooted(
            &network(
                &["r", "a", "b", "c", "x", "y", "z"],
                &[("r", "a"), ("r", "b"), ("a", "b"), ("r", "c"), ("c", "x"), ("c", "y"), ("c", "z")],
            ),
            "r",
        ),
        "knife" => rooted(&network(&["r", "c", "e"], &[("r", "c"), ("c", "e")]), "r"),
        "figure1" => rooted(&figure1_network(), "1"),
        _ => return None,
    };
    Some(ball)
}

/// Every fixture, in [`FIXTURE_NAMES`] order.
pub fn fixtures() -> Vec<(&'static str, Ball)> {
    FIXTURE_NAMES.iter().map(|&n| (n, fixture(n).expect("catalog names resolve"))).collect()
}
