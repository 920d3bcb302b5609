//! Randomized structural laws: cylinder composition is multiplicative, the
//! transport distance is a metric, DP quantization is monotone, covariant
//! under affine rescaling, and dominates its boundary-constrained variant.

use proptest::prelude::*;

use rifs_core::fixtures::example;
use rifs_core::geometry::AxisBox;
use rifs_core::measure::{w1_distance_1d, Atom, DiscreteMeasure};
use rifs_core::quantization::{unr_exact_1d, vnr_exact_1d, vnr_exact_series};
use rifs_core::symbolic::{build_gamma, sample_word, DEFAULT_BUDGET, TIE_TOL};
use rifs_core::system::{compose, cylinder_map};

fn measure_from(points: &[(f64, f64)]) -> DiscreteMeasure {
    let total: f64 = points.iter().map(|&(_, w)| w).sum();
    let atoms = points
        .iter()
        .map(|&(x, w)| Atom {
            point: vec![x],
            weight: w / total,
            sigma: Vec::new(),
        })
        .collect();
    DiscreteMeasure::from_atoms(1, atoms).unwrap()
}

fn points() -> impl Strategy<Value = Vec<(f64, f64)>> {
    prop::collection::vec((0.05f64..0.95, 0.05f64..1.0), 2..14)
}

fn order() -> impl Strategy<Value = f64> {
    prop_oneof![Just(0.5), Just(1.0), Just(2.0), 0.3f64..3.0]
}

proptest! {
    #[test]
    fn composition_is_multiplicative(
        k in 1..=3u8,
        seed in 0..10_000u64,
        sigma in prop::collection::vec(0..2u8, 2..10),
        split in any::<prop::sample::Index>(),
    ) {
        let spec = example(k);
        let word = sample_word(&spec, seed);
        let letters = word.prefix(sigma.len()).unwrap();
        let mid = split.index(sigma.len() - 1) + 1;
        let full = compose(&spec, &letters, &sigma, None).unwrap();
        let head = compose(&spec, &letters, &sigma[..mid], None).unwrap();
        let tail = compose(&spec, &letters[mid..], &sigma[mid..], None).unwrap();
        let prob = head.product_prob * tail.product_prob;
        let ratio = head.product_ratio * tail.product_ratio;
        prop_assert!((full.product_prob - prob).abs() <= 1e-12 * prob);
        prop_assert!((full.product_ratio - ratio).abs() <= 1e-12 * ratio);
        let head_map = cylinder_map(&spec, &letters, &sigma[..mid]).unwrap();
        let via = head_map.apply(&tail.anchor_image);
        prop_assert!((via[0] - full.anchor_image[0]).abs() <= 1e-12);
    }

    #[test]
    fn transport_distance_is_a_metric(
        pa in points(),
        pb in points(),
        pc in points(),
    ) {
        let a = measure_from(&pa);
        let b = measure_from(&pb);
        let c = measure_from(&pc);
        prop_assert_eq!(w1_distance_1d(&a, &a).unwrap(), 0.0);
        let ab = w1_distance_1d(&a, &b).unwrap();
        let ba = w1_distance_1d(&b, &a).unwrap();
        prop_assert!((ab - ba).abs() <= 1e-12);
        let ac = w1_distance_1d(&a, &c).unwrap();
        let bc = w1_distance_1d(&b, &c).unwrap();
        prop_assert!(ac <= ab + bc + 1e-12);
    }

    #[test]
    fn dp_series_is_monotone_and_consistent(
        pts in points(),
        r in order(),
    ) {
        let measure = measure_from(&pts);
        let top = measure.len().min(8);
        let ns: Vec<usize> = (1..=top).collect();
        let series = vnr_exact_series(&measure, &ns, r).unwrap();
        for pair in series.windows(2) {
            prop_assert!(pair[1].1 <= pair[0].1 + 1e-15);
        }
        for &(n, cost) in &series {
            let single = vnr_exact_1d(&measure, n, r).unwrap().cost;
            prop_assert!((single - cost).abs() <= 1e-12 * (1.0 + cost));
        }
        if top == measure.len() {
            prop_assert_eq!(series.last().unwrap().1, 0.0);
        }
    }

    #[test]
    fn dp_cost_scales_covariantly(
        pts in points(),
        n in 1usize..6,
        r in order(),
        scale in 0.5f64..3.0,
        offset in -1.0f64..1.0,
    ) {
        let measure = measure_from(&pts);
        let moved = DiscreteMeasure::from_atoms(
            1,
            measure
                .atoms()
                .iter()
                .map(|a| Atom {
                    point: vec![scale * a.point[0] + offset],
                    weight: a.weight,
                    sigma: Vec::new(),
                })
                .collect(),
        )
        .unwrap();
        let base = vnr_exact_1d(&measure, n, r).unwrap().cost;
        let scaled = vnr_exact_1d(&moved, n, r).unwrap().cost;
        let want = scale.powf(r) * base;
        prop_assert!((scaled - want).abs() <= 1e-9 * (1.0 + want));
    }

    #[test]
    fn constrained_error_is_dominated(
        pts in points(),
        n in 1usize..6,
        r in order(),
        pad in 0.01f64..0.5,
    ) {
        let measure = measure_from(&pts);
        let xs: Vec<f64> = measure.atoms().iter().map(|a| a.point[0]).collect();
        let lo = xs.iter().copied().fold(f64::INFINITY, f64::min) - pad;
        let hi = xs.iter().copied().fold(f64::NEG_INFINITY, f64::max) + pad;
        let domain = AxisBox::new(vec![lo], vec![hi]).unwrap();
        let constrained = unr_exact_1d(&measure, &domain, n, r).unwrap().cost;
        let free = vnr_exact_1d(&measure, n, r).unwrap().cost;
        prop_assert!(constrained <= free + 1e-12 * (1.0 + free));
    }

    #[test]
    fn weight_cut_members_straddle_the_threshold(
        k in 1..=3u8,
        seed in 0..10_000u64,
        n in 1usize..2_000,
        r in 0.3f64..2.5,
    ) {
        let spec = example(k);
        let word = sample_word(&spec, seed);
        let (gamma, _) = build_gamma(&spec, &word, r, n, DEFAULT_BUDGET).unwrap();
        let letters = word.prefix(gamma.max_depth()).unwrap();
        let log_theta =
            spec.min_prob().ln() + r * spec.min_ratio().ln() - (n as f64).ln();
        for member in &gamma.members {
            prop_assert!(member.log_weight(r) < log_theta - TIE_TOL);
            let parent = compose(
                &spec,
                &letters,
                &member.sigma[..member.sigma.len() - 1],
                None,
            )
            .unwrap();
            prop_assert!(parent.log_weight(r) >= log_theta - TIE_TOL);
        }
    }
}
