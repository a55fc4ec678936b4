use proptest::prelude::*;

use nsbox::behavior::{mix, Behavior, Relabeling};
use nsbox::criteria::{self, eval_multicopy, eval_uffink, CriterionId, EvalOptions};
use nsbox::entropy::{Channel, JointDistribution, Variable};
use nsbox::protocol::{
    all_strings, biases, concat_success_closed, concat_success_simulated, q_parity, Parity,
};
use nsbox::scan::{self, SliceSpec};

fn weights(n: usize) -> impl Strategy<Value = Vec<f64>> {
    prop::collection::vec(0.0f64..1.0, n).prop_filter_map("positive mass", |w| {
        let s: f64 = w.iter().sum();
        (s > 1e-6).then(|| w.iter().map(|x| x / s).collect())
    })
}

/// Random mixture of box 45, the all-zero box, white noise and a local
/// deterministic box.
fn tripartite() -> impl Strategy<Value = Behavior> {
    (weights(4), prop::collection::vec(0u8..4, 3)).prop_map(|(w, resp)| {
        let parts = [
            Behavior::box45(3).unwrap(),
            Behavior::deterministic_zero(3).unwrap(),
            Behavior::white(3).unwrap(),
            Behavior::local_deterministic(&resp).unwrap(),
        ];
        let comps: Vec<(f64, &Behavior)> = w.iter().copied().zip(parts.iter()).collect();
        mix(&comps).unwrap()
    })
}

fn bipartite() -> impl Strategy<Value = Behavior> {
    (weights(3), prop::collection::vec(0u8..4, 2)).prop_map(|(w, resp)| {
        let parts = [
            Behavior::pr_box(),
            Behavior::white(2).unwrap(),
            Behavior::local_deterministic(&resp).unwrap(),
        ];
        let comps: Vec<(f64, &Behavior)> = w.iter().copied().zip(parts.iter()).collect();
        mix(&comps).unwrap()
    })
}

fn distribution(cards: &[u32]) -> impl Strategy<Value = JointDistribution> {
    let size: usize = cards.iter().map(|&c| c as usize).product();
    let cards = cards.to_vec();
    weights(size).prop_map(move |w| {
        let vars = cards
            .iter()
            .enumerate()
            .map(|(i, &c)| Variable::new(format!("V{i}"), c))
            .collect();
        let atoms = w.into_iter().enumerate().map(|(mut code, p)| {
            let values = cards
                .iter()
                .map(|&c| {
                    let v = (code % c as usize) as u16;
                    code /= c as usize;
                    v
                })
                .collect();
            (values, p)
        });
        JointDistribution::new(vars, atoms).unwrap()
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn mixtures_are_valid_and_correlators_bounded(b in tripartite()) {
        prop_assert!(b.validate().is_valid());
        for c in b.correlators() {
            prop_assert!((-1.0 - 1e-12..=1.0 + 1e-12).contains(&c));
        }
    }

    #[test]
    fn relabeling_preserves_validity(b in tripartite(), idx in 0usize..3072) {
        let r = &Relabeling::orbit(3)[idx];
        prop_assert!(b.relabel(r).validate().is_valid());
    }

    #[test]
    fn correlators_are_affine(a in tripartite(), b in tripartite(), t in 0.0f64..1.0) {
        let m = mix(&[(t, &a), (1.0 - t, &b)]).unwrap();
        let (ca, cb, cm) = (a.correlators(), b.correlators(), m.correlators());
        for i in 0..8 {
            prop_assert!((cm[i] - (t * ca[i] + (1.0 - t) * cb[i])).abs() < 1e-12);
        }
    }

    #[test]
    fn chain_rule(d in distribution(&[2, 3, 2])) {
        let lhs = d.conditional_mutual_information(&["V0"], &["V1"], &["V2"]).unwrap();
        let rhs = d.mutual_information(&["V0"], &["V1", "V2"]).unwrap()
            - d.mutual_information(&["V0"], &["V2"]).unwrap();
        prop_assert!((lhs - rhs).abs() < 1e-12);
        prop_assert!(lhs >= 0.0);
    }

    #[test]
    fn marginal_of_everything_is_identity(d in distribution(&[2, 2, 3])) {
        let m = d.marginal(&["V0", "V1", "V2"]).unwrap();
        prop_assert_eq!(m.variables(), d.variables());
        prop_assert_eq!(m.atoms().len(), d.atoms().len());
        for (x, y) in m.atoms().iter().zip(d.atoms()) {
            prop_assert_eq!(&x.values, &y.values);
            prop_assert!((x.p - y.p).abs() < 1e-15);
        }
    }

    #[test]
    fn channel_output_is_conditionally_independent(d in distribution(&[2, 3, 2]), e in 0.0f64..=0.5) {
        let out = d.apply_channel("V0", &Channel::bsc(e).unwrap(), "V0'").unwrap();
        let ci = out.conditional_mutual_information(&["V0'"], &["V1", "V2"], &["V0"]).unwrap();
        prop_assert!(ci.abs() < 1e-12);
        let cap = out.mutual_information(&["V0"], &["V0'"]).unwrap();
        prop_assert!(cap <= Channel::bsc(e).unwrap().capacity() + 1e-12);
    }

    #[test]
    fn q_parity_sums_to_one(s in 0u32..20, p in 0.0f64..=1.0) {
        let total = q_parity(s, p, Parity::Even) + q_parity(s, p, Parity::Odd);
        prop_assert!((total - 1.0).abs() < 1e-12);
    }

    #[test]
    fn single_copy_success_matches_biases(b in tripartite()) {
        let cfg = nsbox::ProtocolConfig::single_copy(3);
        let joint = nsbox::protocol::single_copy_joint(&b, &cfg).unwrap();
        let prof = nsbox::protocol::success_profile(&joint).unwrap();
        let (e1, e2) = biases(&b);
        prop_assert!((prof.per_choice[0] - 0.5 * (1.0 + e1)).abs() < 1e-12);
        prop_assert!((prof.per_choice[1] - 0.5 * (1.0 + e2)).abs() < 1e-12);
    }

    #[test]
    fn channel_output_independent_in_protocol(b in tripartite(), e in 0.0f64..0.5) {
        let cfg = nsbox::ProtocolConfig::single_copy(3).with_channel(Channel::bsc(e).unwrap());
        let joint = nsbox::protocol::single_copy_joint(&b, &cfg).unwrap();
        let rest = ["X1.1", "X1.2", "X2.1", "X2.2", "a1", "a2", "a3", "J", "M2"];
        let ci = joint.conditional_mutual_information(&["M1'"], &rest, &["M1"]).unwrap();
        prop_assert!(ci.abs() < 1e-12);
    }

    #[test]
    fn concatenation_depends_on_r_only(b in tripartite(), depth in 1usize..=3) {
        let (e1, e2) = biases(&b);
        for z in all_strings(depth) {
            let r = z.iter().filter(|&&v| v == 1).count();
            let sim = concat_success_simulated(&b, depth, &z).unwrap();
            prop_assert!((sim - concat_success_closed(e1, e2, depth, r).unwrap()).abs() < 1e-9);
        }
    }

    #[test]
    fn noisy_at_zero_is_multi(b in tripartite()) {
        let noisy = criteria::eval_noisy_ic(&b, 0.0).unwrap();
        let multi = criteria::evaluate(&b, CriterionId::IcMulti, &EvalOptions::default()).unwrap();
        prop_assert!((noisy.lhs - multi.lhs).abs() < 1e-12);
        prop_assert!((noisy.rhs - multi.rhs).abs() < 1e-12);
    }

    #[test]
    fn bipartite_multicopy_equals_uffink(b in bipartite()) {
        let m = eval_multicopy(&b).lhs;
        let u = eval_uffink(&b).unwrap().lhs;
        prop_assert!((m - u).abs() < 1e-12);
    }

    #[test]
    fn multicopy_orbit_dominates_canonical(b in tripartite()) {
        let (e1, e2) = biases(&b);
        prop_assert!(eval_multicopy(&b).lhs >= e1 * e1 + e2 * e2 - 1e-12);
    }

    #[test]
    fn success_bound_chain(e in 0.0f64..=1.0, depth in 1usize..=2) {
        let b = Behavior::isotropic(e, 3).unwrap();
        let r = criteria::eval_success_bound(&b, depth).unwrap();
        let info = criteria::concat_information(&b, depth).unwrap();
        prop_assert!(r.bound.unwrap() <= r.lhs + 1e-12);
        prop_assert!(r.lhs <= info + 1e-9);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(12))]

    #[test]
    fn boundary_bracket_is_certified(eps in 0.0f64..0.25) {
        let spec = SliceSpec {
            criteria: vec![CriterionId::IcMulticopy],
            ..SliceSpec::default_slice()
        };
        let p = scan::boundary(&spec, CriterionId::IcMulticopy, eps).unwrap();
        prop_assert!(p.bracket_width <= scan::BISECTION_TOL);
        let opts = EvalOptions::default();
        let at = |g: f64| criteria::evaluate(&spec.point(g, eps).unwrap(), CriterionId::IcMulticopy, &opts).unwrap();
        prop_assert!(at(p.lo).margin <= criteria::VIOLATION_TOL);
        prop_assert!(at(p.hi).violated);
    }
}
