//! Literal enumeration of the concatenated protocol: every sender input
//! string and every outcome tuple of every box in the tree, checked against
//! the propagated simulator and the closed form.

use nsbox::behavior::{mix, Behavior};
use nsbox::protocol::{
    all_strings, biases, concat_success_closed, concat_success_simulated, concat_target_joint,
    leaf_index,
};

/// Boxes are heap-indexed: root 1, children `2b` and `2b + 1`; leaves are
/// `2^{K-1} … 2^K - 1`. Sender `k`'s bits live in bit `k·n + i` of `inputs`.
fn brute_force(b: &Behavior, depth: usize, z: &[u8]) -> f64 {
    let n_parties = b.parties();
    let senders = n_parties - 1;
    let bits = 1usize << depth;
    let boxes = (1usize << depth) - 1;
    let first_leaf = 1usize << (depth - 1);
    let target = leaf_index(z);

    // Receiver input at each box: z_l on the path, 0 elsewhere.
    let mut receiver_input = vec![0u32; boxes + 1];
    let mut on_path = vec![false; boxes + 1];
    let mut node = 1;
    for (l, &zl) in z.iter().enumerate() {
        receiver_input[node] = u32::from(zl);
        on_path[node] = true;
        if l + 1 < depth {
            node = 2 * node + zl as usize;
        }
    }

    let outcomes = 1usize << n_parties;
    let total_inputs = 1usize << (senders * bits);
    let mut success = 0.0;
    for inputs in 0..total_inputs {
        let bit = |k: usize, i: usize| ((inputs >> (k * bits + i)) & 1) as u32;
        let want = (0..senders).fold(0, |acc, k| acc ^ bit(k, target));
        let mut weight_ok = 0.0;
        for code in 0..outcomes.pow(boxes as u32) {
            let a = |box_id: usize| ((code / outcomes.pow((box_id - 1) as u32)) % outcomes) as u32;
            // Messages and box input masks, leaves first.
            let mut msg = vec![0u32; boxes + 1];
            let mut p = 1.0;
            for box_id in (1..=boxes).rev() {
                let mut x = 0u32;
                let mut m = 0u32;
                for k in 0..senders {
                    let (l, r) = if box_id >= first_leaf {
                        let pair = 2 * (box_id - first_leaf);
                        (bit(k, pair), bit(k, pair + 1))
                    } else {
                        ((msg[2 * box_id] >> k) & 1, (msg[2 * box_id + 1] >> k) & 1)
                    };
                    x |= (l ^ r) << k;
                    m |= (l ^ ((a(box_id) >> k) & 1)) << k;
                }
                x |= receiver_input[box_id] << senders;
                msg[box_id] = m;
                p *= b.prob(x, a(box_id));
                if p == 0.0 {
                    break;
                }
            }
            if p == 0.0 {
                continue;
            }
            let mut guess = msg[1].count_ones() & 1;
            for (box_id, _) in on_path.iter().enumerate().filter(|(_, &on)| on) {
                guess ^= a(box_id) >> senders;
            }
            if guess == want {
                weight_ok += p;
            }
        }
        success += weight_ok;
    }
    success / total_inputs as f64
}

fn slice_box(gamma: f64, eps: f64) -> Behavior {
    mix(&[
        (gamma, &Behavior::box45(3).unwrap()),
        (eps, &Behavior::deterministic_zero(3).unwrap()),
        (1.0 - gamma - eps, &Behavior::white(3).unwrap()),
    ])
    .unwrap()
}

#[test]
fn simulator_matches_literal_enumeration() {
    let boxes = [
        Behavior::isotropic(0.7, 3).unwrap(),
        slice_box(0.5, 0.3),
        Behavior::local_deterministic(&[0b01, 0b10, 0b11]).unwrap(),
    ];
    for b in &boxes {
        for depth in 1..=2 {
            for z in all_strings(depth) {
                let literal = brute_force(b, depth, &z);
                let fast = concat_success_simulated(b, depth, &z).unwrap();
                assert!((literal - fast).abs() < 1e-12, "K={depth} z={z:?}: {literal} vs {fast}");
            }
        }
    }
}

#[test]
fn literal_enumeration_matches_closed_form() {
    let b = slice_box(0.6, 0.2);
    let (e1, e2) = biases(&b);
    for z in all_strings(2) {
        let r = z.iter().filter(|&&v| v == 1).count();
        let closed = concat_success_closed(e1, e2, 2, r).unwrap();
        assert!((brute_force(&b, 2, &z) - closed).abs() < 1e-12);
    }
}

#[test]
fn bipartite_tree() {
    let b = Behavior::isotropic(0.9, 2).unwrap();
    for z in all_strings(2) {
        let literal = brute_force(&b, 2, &z);
        assert!((literal - concat_success_simulated(&b, 2, &z).unwrap()).abs() < 1e-12);
    }
}

#[test]
fn target_joint_marginals_are_uniform() {
    let b = Behavior::isotropic(0.4, 3).unwrap();
    for z in all_strings(3) {
        let joint = concat_target_joint(&b, 3, &z).unwrap();
        let names: Vec<String> = joint
            .variables()
            .iter()
            .filter(|v| v.name != "G")
            .map(|v| v.name.clone())
            .collect();
        assert!((joint.entropy(&names).unwrap() - 2.0).abs() < 1e-12);
    }
}
