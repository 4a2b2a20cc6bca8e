use mepkit::io::{from_json, to_json};
use mepkit::{fit_chain, Alphabet, JointTable};
use proptest::prelude::*;

/// Positive joint over vars 1..=n with the given alphabet size.
fn joint(min_vars: usize, max_vars: usize) -> impl Strategy<Value = JointTable> {
    (min_vars..=max_vars, 2..=3usize).prop_flat_map(|(n, radix)| {
        let len = radix.pow(n as u32);
        prop::collection::vec(1e-3..1.0f64, len).prop_map(move |w| {
            let total: f64 = w.iter().sum();
            let values = w.into_iter().map(|x| x / total).collect();
            JointTable::new((1..=n as i32).collect(), Alphabet::new(radix).unwrap(), values).unwrap()
        })
    })
}

proptest! {
    #[test]
    fn marginalization_commutes(t in joint(2, 4)) {
        let vars = t.vars().to_vec();
        let keep = &vars[..vars.len().div_ceil(2)];
        let direct = t.marginalize(keep).unwrap();
        let staged = t.marginalize(&vars[..vars.len() - 1]).unwrap().marginalize(keep).unwrap();
        prop_assert!(direct.max_abs_diff(&staged).unwrap() < 1e-14);
        prop_assert!((direct.total() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn chain_rule(t in joint(2, 4)) {
        let vars = t.vars().to_vec();
        let (last, rest) = vars.split_last().unwrap();
        let h_rest = t.marginalize(rest).unwrap().entropy();
        let h_cond = t.conditional_entropy(*last, rest).unwrap();
        prop_assert!((t.entropy() - h_rest - h_cond).abs() < 1e-12);
    }

    #[test]
    fn conditioning_reduces_entropy(t in joint(1, 4)) {
        let vars = t.vars().to_vec();
        let target = *vars.last().unwrap();
        let mut previous = f64::INFINITY;
        for k in 0..vars.len() {
            let given = &vars[vars.len() - 1 - k..vars.len() - 1];
            let h = t.conditional_entropy(target, given).unwrap();
            prop_assert!(h <= previous + 1e-12);
            previous = h;
        }
    }

    #[test]
    fn json_round_trip_is_exact(t in joint(1, 3)) {
        let back: JointTable = from_json(&to_json(&t).unwrap()).unwrap();
        prop_assert_eq!(back.vars(), t.vars());
        prop_assert!(back.values().iter().zip(t.values()).all(|(a, b)| a.to_bits() == b.to_bits()));
    }

    #[test]
    fn full_order_chain_is_the_truth(t in joint(1, 4)) {
        let order = t.vars().len().saturating_sub(1);
        let chain = fit_chain(&t, order).unwrap().joint();
        prop_assert!(chain.max_abs_diff(&t).unwrap() < 1e-13);
    }
}
