//! Seeded generators for the Coins, Friends & Smokers and Random Graphs
//! benchmark families, emitted as ground programs.

use std::fmt::Write as _;

use rand::seq::index::sample;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

pub const DEFAULT_DENSITY: f64 = 0.3;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum GenError {
    #[error("{family} needs at least {min} entities, got {got}")]
    TooSmall { family: &'static str, min: usize, got: usize },
    #[error("density {0} is outside [0,1]")]
    Density(f64),
}

fn check(family: &'static str, min: usize, got: usize) -> Result<(), GenError> {
    if got < min {
        return Err(GenError::TooSmall { family, min, got });
    }
    Ok(())
}

fn check_density(d: f64) -> Result<(), GenError> {
    if !(0.0..=1.0).contains(&d) {
        return Err(GenError::Density(d));
    }
    Ok(())
}

fn heads(i: usize) -> String {
    format!("coin_out({i},heads)")
}

/// Coin 1 lands heads with probability 0.6, the others with 0.5. Two random
/// coins must both show heads to win. From three coins on, one random coin
/// `i` is forced to heads whenever another coin `j` (never coin 1) is.
pub fn gen_coins(num_coins: usize, seed: u64) -> Result<String, GenError> {
    check("coins", 2, num_coins)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out = String::new();
    let _ = writeln!(out, "% coins: {num_coins} coins, seed {seed}");
    for i in 1..=num_coins {
        let _ = writeln!(out, "coin({i}).");
    }
    for i in 1..=num_coins {
        let w = if i == 1 { "0.6" } else { "0.5" };
        let _ = writeln!(out, "{w} :: {}.", heads(i));
    }
    for i in 1..=num_coins {
        let _ = writeln!(out, "coin_out({i},tails) :- not {}.", heads(i));
    }
    let mut winners: Vec<usize> = sample(&mut rng, num_coins, 2).into_iter().map(|x| x + 1).collect();
    winners.sort_unstable();
    let _ = writeln!(out, "win :- {}, {}.", heads(winners[0]), heads(winners[1]));
    if num_coins >= 3 {
        let j = rng.gen_range(2..=num_coins);
        let mut i = rng.gen_range(1..num_coins);
        if i >= j {
            i += 1;
        }
        let _ = writeln!(out, "{} :- {}.", heads(i), heads(j));
    }
    let _ = writeln!(out, "#query win.");
    let _ = writeln!(out, "#query {}.", heads(1));
    let _ = writeln!(out, "#query {}.", heads(2));
    Ok(out)
}

/// Parameters of the Friends & Smokers generator.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SmokersConfig {
    /// Probability of each ordered pair of distinct persons being friends.
    pub friend_density: f64,
    /// Probability of each person being a known smoker.
    pub smoker_density: f64,
}

impl Default for SmokersConfig {
    fn default() -> Self {
        SmokersConfig {
            friend_density: DEFAULT_DENSITY,
            smoker_density: DEFAULT_DENSITY,
        }
    }
}

/// Persons are stressed with probability 0.3, stress leads to smoking,
/// friends influence each other with probability 0.2, and smokers develop
/// asthma with probability 0.4.
pub fn gen_smokers(num_persons: usize, seed: u64, config: SmokersConfig) -> Result<String, GenError> {
    check("smokers", 2, num_persons)?;
    check_density(config.friend_density)?;
    check_density(config.smoker_density)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut friends = Vec::new();
    for x in 1..=num_persons {
        for y in 1..=num_persons {
            if x != y && rng.gen_bool(config.friend_density) {
                friends.push((x, y));
            }
        }
    }
    let smokers: Vec<usize> = (1..=num_persons).filter(|_| rng.gen_bool(config.smoker_density)).collect();

    let mut out = String::new();
    let _ = writeln!(out, "% smokers: {num_persons} persons, seed {seed}");
    for x in 1..=num_persons {
        let _ = writeln!(out, "person({x}).");
    }
    for &(x, y) in &friends {
        let _ = writeln!(out, "friend({x},{y}).");
    }
    for x in &smokers {
        let _ = writeln!(out, "smokes({x}).");
    }
    for x in 1..=num_persons {
        let _ = writeln!(out, "0.3 :: stress({x}).");
        let _ = writeln!(out, "0.4 :: h({x}).");
    }
    for &(x, y) in &friends {
        let _ = writeln!(out, "0.2 :: influences({y},{x}).");
    }
    for x in 1..=num_persons {
        let _ = writeln!(out, "smokes({x}) :- stress({x}).");
    }
    for &(x, y) in &friends {
        let _ = writeln!(out, "smokes({x}) :- friend({x},{y}), influences({y},{x}), smokes({y}).");
    }
    for x in 1..=num_persons {
        let _ = writeln!(out, "asthma({x}) :- smokes({x}), h({x}).");
    }
    for x in 1..=num_persons {
        let _ = writeln!(out, "#query asthma({x}).");
    }
    Ok(out)
}

/// Edge weight drawn from (0, 0.3], rounded to four decimals.
fn edge_weight(rng: &mut ChaCha8Rng) -> f64 {
    let w = 0.3 * (1.0 - rng.gen::<f64>());
    ((w * 1e4).round() / 1e4).max(1e-4)
}

/// Each ordered pair of distinct vertices is an edge with probability
/// `density`, weighted uniformly from (0, 0.3]; paths are the transitive
/// closure of the edges.
pub fn gen_random_graph(num_vertices: usize, seed: u64, density: f64) -> Result<String, GenError> {
    check("graph", 2, num_vertices)?;
    check_density(density)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut edges = Vec::new();
    for x in 1..=num_vertices {
        for y in 1..=num_vertices {
            if x != y && rng.gen_bool(density) {
                edges.push((x, y, edge_weight(&mut rng)));
            }
        }
    }
    let mut out = String::new();
    let _ = writeln!(out, "% graph: {num_vertices} vertices, seed {seed}");
    for &(x, y, w) in &edges {
        let _ = writeln!(out, "{w} :: edge({x},{y}).");
    }
    for &(x, y, _) in &edges {
        let _ = writeln!(out, "path({x},{y}) :- edge({x},{y}).");
    }
    for &(y, x, _) in &edges {
        for z in (1..=num_vertices).filter(|&z| z != y) {
            let _ = writeln!(out, "path({z},{x}) :- edge({y},{x}), path({z},{y}).");
        }
    }
    for i in 1..=num_vertices {
        let _ = writeln!(out, "#query path(1,{i}).");
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::frontend::parse_ground_asp;
    use crate::oracle::{enumerate_models, exact_feasibility, product_marginals};

    #[test]
    fn two_coins() {
        let text = gen_coins(2, 0).unwrap();
        let (p, _) = parse_ground_asp(&text).unwrap();
        assert!(text.contains("win :- coin_out(1,heads), coin_out(2,heads)."));
        assert_eq!(text.lines().filter(|l| l.contains(":-") && !l.contains("tails") && !l.starts_with("win")).count(), 0);
        let win = p.symbols.lookup("win").unwrap();
        let m = product_marginals(&p, &[win]).unwrap();
        assert!((m[0] - 0.3).abs() < 1e-12);
        assert_eq!(p.queries.len(), 3);
    }

    #[test]
    fn eight_coins_shape() {
        let text = gen_coins(8, 4).unwrap();
        let (p, _) = parse_ground_asp(&text).unwrap();
        assert_eq!(p.weights.len(), 8);
        assert_eq!(text.lines().filter(|l| l.starts_with("coin(")).count(), 8);
        assert_eq!(text.lines().filter(|l| l.starts_with("win :-")).count(), 1);
        let dependency: Vec<&str> = text.lines().filter(|l| l.starts_with("coin_out") && l.contains("heads) :-")).collect();
        assert_eq!(dependency.len(), 1);
        assert!(!dependency[0].ends_with("coin_out(1,heads)."));
    }

    #[test]
    fn generators_are_deterministic() {
        assert_eq!(gen_coins(6, 11).unwrap(), gen_coins(6, 11).unwrap());
        assert_eq!(
            gen_smokers(5, 3, SmokersConfig::default()).unwrap(),
            gen_smokers(5, 3, SmokersConfig::default()).unwrap()
        );
        assert_eq!(gen_random_graph(5, 8, 0.5).unwrap(), gen_random_graph(5, 8, 0.5).unwrap());
        assert_ne!(gen_coins(6, 11).unwrap(), gen_coins(6, 12).unwrap());
    }

    #[test]
    fn size_bounds() {
        assert!(gen_coins(1, 0).is_err());
        assert!(gen_smokers(1, 0, SmokersConfig::default()).is_err());
        assert!(gen_random_graph(1, 0, 0.3).is_err());
        assert_eq!(gen_random_graph(3, 0, 1.5), Err(GenError::Density(1.5)));
    }

    #[test]
    fn lonely_smokers() {
        let config = SmokersConfig {
            friend_density: 0.0,
            smoker_density: 0.0,
        };
        let (p, _) = parse_ground_asp(&gen_smokers(2, 1, config).unwrap()).unwrap();
        let m = product_marginals(&p, &p.queries).unwrap();
        for x in m {
            assert!((x - 0.12).abs() < 1e-12);
        }
    }

    #[test]
    fn friendship_cycle_is_non_tight() {
        let config = SmokersConfig {
            friend_density: 1.0,
            smoker_density: 0.0,
        };
        let (p, _) = parse_ground_asp(&gen_smokers(2, 1, config).unwrap()).unwrap();
        assert!(!crate::transform::compile(&p).tight);
    }

    #[test]
    fn single_edge_path() {
        let text = gen_random_graph(2, 7, 1.0).unwrap();
        let (p, _) = parse_ground_asp(&text).unwrap();
        let e12 = p.symbols.lookup("edge(1,2)").unwrap();
        let path = p.symbols.lookup("path(1,2)").unwrap();
        let w = p.weights[&e12];
        assert!(w > 0.0 && w <= 0.3);
        let m = product_marginals(&p, &[path]).unwrap();
        assert!((m[0] - w).abs() < 1e-12);
    }

    #[test]
    fn three_vertex_grounding() {
        let text = gen_random_graph(3, 2, 1.0).unwrap();
        let rules = text.lines().filter(|l| l.starts_with("path(")).count();
        // 6 edges: one base rule each, and one step rule per edge and start
        // vertex other than the edge's source.
        assert_eq!(rules, 6 + 6 * 2);
        assert!(text.contains("path(1,3) :- edge(2,3), path(1,2)."));
        assert!(text.contains("path(3,3) :- edge(2,3), path(3,2)."));
    }

    #[test]
    fn small_instances_are_feasible() {
        let programs = [
            gen_coins(3, 1).unwrap(),
            gen_coins(4, 2).unwrap(),
            gen_smokers(3, 5, SmokersConfig::default()).unwrap(),
            gen_random_graph(3, 9, 0.5).unwrap(),
        ];
        for text in programs {
            let (p, _) = parse_ground_asp(&text).unwrap();
            let models = enumerate_models(&p).unwrap();
            assert!(!models.is_empty());
            let f = exact_feasibility(&models, &p.weighted_params()).unwrap();
            assert!(f.feasible, "{text}\n{f:?}");
        }
    }
}
