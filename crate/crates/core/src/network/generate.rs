use rand::seq::index;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{Edge, Network, NodeId};
use crate::error::{Error, Result};

/// Parameters of a four-layer random relay network.
///
/// Layer 1 holds the sensors, layers 2 to 4 hold relays, and every layer-4
/// node is wired to the fusion center.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct LayeredGraphSpec {
    pub layer_sizes: [usize; 4],
    /// Number of distinct next-layer partners drawn by each connected node.
    pub fanout: usize,
    /// Inclusive range capacities are drawn from.
    pub capacity_range: (i64, i64),
    pub seed: u64,
}

impl LayeredGraphSpec {
    pub fn check(&self) -> Result<()> {
        if let Some(i) = self.layer_sizes.iter().position(|&n| n == 0) {
            return Err(Error::Config(format!("layer {} is empty", i + 1)));
        }
        if self.fanout == 0 {
            return Err(Error::Config("fanout must be positive".into()));
        }
        for (i, &next) in self.layer_sizes[1..].iter().enumerate() {
            if self.fanout > next {
                return Err(Error::Config(format!(
                    "fanout {} exceeds the {} nodes of layer {}",
                    self.fanout,
                    next,
                    i + 2
                )));
            }
        }
        let (lo, hi) = self.capacity_range;
        if lo < 1 || hi < lo {
            return Err(Error::Config(format!(
                "capacity range [{lo}, {hi}] must satisfy 1 <= lo <= hi"
            )));
        }
        Ok(())
    }
}

/// Draws a layered network. Node ids run layer by layer from 0, with the
/// fusion center last. The result depends only on `spec`.
pub fn generate_layered(spec: &LayeredGraphSpec) -> Result<Network> {
    spec.check()?;
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let [n1, n2, n3, n4] = spec.layer_sizes;
    let starts = [0, n1, n1 + n2, n1 + n2 + n3];
    let fc = n1 + n2 + n3 + n4;

    let mut pairs: Vec<(NodeId, NodeId)> = Vec::new();
    // layer 1 always draws; later layers draw only from nodes that gained an
    // incoming edge
    let mut active: Vec<NodeId> = (0..n1).collect();
    for layer in 0..3 {
        let next_start = starts[layer + 1];
        let next_size = spec.layer_sizes[layer + 1];
        let mut reached = vec![false; next_size];
        for &u in &active {
            let mut partners = index::sample(&mut rng, next_size, spec.fanout).into_vec();
            partners.sort_unstable();
            for p in partners {
                reached[p] = true;
                pairs.push((u, next_start + p));
            }
        }
        active = (0..next_size)
            .filter(|&p| reached[p])
            .map(|p| next_start + p)
            .collect();
    }
    for u in starts[3]..fc {
        pairs.push((u, fc));
    }

    let (lo, hi) = spec.capacity_range;
    let edges = pairs
        .into_iter()
        .map(|(u, v)| Edge {
            u,
            v,
            capacity: rng.random_range(lo..=hi),
        })
        .collect();
    Network::new((0..=fc).collect(), edges, (0..n1).collect(), fc)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn spec(layer_sizes: [usize; 4], fanout: usize, caps: (i64, i64), seed: u64) -> LayeredGraphSpec {
        LayeredGraphSpec {
            layer_sizes,
            fanout,
            capacity_range: caps,
            seed,
        }
    }

    #[test]
    fn unit_layers_give_a_path() {
        let net = generate_layered(&spec([1, 1, 1, 1], 1, (5, 5), 99)).unwrap();
        assert_eq!(net.sensors(), &[0]);
        assert_eq!(net.fusion_center(), 4);
        let e: Vec<_> = net.edges().iter().map(|e| (e.u, e.v, e.capacity)).collect();
        assert_eq!(e, vec![(0, 1, 5), (1, 2, 5), (2, 3, 5), (3, 4, 5)]);
    }

    #[test]
    fn estimation_scale_sensor_degree() {
        let net = generate_layered(&spec([10, 50, 30, 10], 4, (1, 15), 1)).unwrap();
        assert!(net.validate().is_empty());
        for &s in net.sensors() {
            let deg = net.edges().iter().filter(|e| e.u == s || e.v == s).count();
            assert_eq!(deg, 4);
        }
        assert!(net.edges().iter().all(|e| (1..=15).contains(&e.capacity)));
        assert_eq!(net.nodes().len(), 101);
    }

    #[test]
    fn only_connected_relays_fan_out() {
        let net = generate_layered(&spec([2, 6, 6, 6], 1, (1, 3), 5)).unwrap();
        for u in 2..8 {
            let into = net.edges().iter().filter(|e| e.v == u).count();
            let out = net.edges().iter().filter(|e| e.u == u).count();
            assert_eq!(out, if into > 0 { 1 } else { 0 }, "node {u}");
        }
        // every layer-4 node reaches the fusion center
        assert_eq!(net.edges().iter().filter(|e| e.v == 20).count(), 6);
    }

    #[test]
    fn deterministic_given_seed() {
        let s = spec([10, 50, 30, 10], 4, (1, 15), 42);
        assert_eq!(generate_layered(&s).unwrap(), generate_layered(&s).unwrap());
        let other = spec([10, 50, 30, 10], 4, (1, 15), 43);
        assert_ne!(generate_layered(&s).unwrap(), generate_layered(&other).unwrap());
    }

    #[test]
    fn rejects_bad_specs() {
        assert!(generate_layered(&spec([3, 2, 2, 2], 3, (1, 5), 0)).is_err());
        assert!(generate_layered(&spec([3, 4, 4, 4], 0, (1, 5), 0)).is_err());
        assert!(generate_layered(&spec([3, 0, 4, 4], 1, (1, 5), 0)).is_err());
        assert!(generate_layered(&spec([3, 4, 4, 4], 1, (0, 5), 0)).is_err());
        assert!(generate_layered(&spec([3, 4, 4, 4], 1, (5, 4), 0)).is_err());
    }
}
