use approx::assert_relative_eq;
use nalgebra::DMatrix;
use proptest::prelude::*;

use blockwalk::exact::meeting_time_table_for;
use blockwalk::nblock::{delta_enumerate, delta_exact, log_delta_series};
use blockwalk::spectral::{coalescence_exponent, parry_rows, perron};
use blockwalk::{MarkovChain, NBlockChain};

/// A mixing chain: a self-loop at 0 and the cycle 0→1→…→k−1→0 are always
/// present, other entries are kept or dropped by `mask`.
fn mixing_chain(size: usize) -> impl Strategy<Value = MarkovChain> {
    (
        prop::collection::vec(0.05f64..1.0, size * size),
        prop::collection::vec(any::<bool>(), size * size),
    )
        .prop_map(move |(weights, mask)| {
            let rows = (0..size)
                .map(|u| {
                    let raw: Vec<f64> = (0..size)
                        .map(|v| {
                            let forced = (u == 0 && v == 0) || v == (u + 1) % size;
                            if forced || mask[u * size + v] {
                                weights[u * size + v]
                            } else {
                                0.0
                            }
                        })
                        .collect();
                    let total: f64 = raw.iter().sum();
                    raw.iter().map(|w| w / total).collect()
                })
                .collect();
            MarkovChain::from_rows(rows).unwrap()
        })
}

/// Every transition positive, so the second eigenvalue of `Q` stays well inside
/// the Perron value.
fn positive_chain(size: usize) -> impl Strategy<Value = MarkovChain> {
    prop::collection::vec(0.2f64..1.0, size * size).prop_map(move |w| {
        let rows = w
            .chunks(size)
            .map(|r| {
                let total: f64 = r.iter().sum();
                r.iter().map(|x| x / total).collect()
            })
            .collect();
        MarkovChain::from_rows(rows).unwrap()
    })
}

fn any_chain(max: usize) -> impl Strategy<Value = MarkovChain> {
    (1..=max).prop_flat_map(mixing_chain)
}

/// Largest eigenvalue modulus via a general eigen-solver.
fn spectral_radius(size: usize, m: &[f64]) -> f64 {
    DMatrix::from_row_slice(size, size, m)
        .complex_eigenvalues()
        .iter()
        .map(|z| z.norm())
        .fold(0.0, f64::max)
}

/// `E(u,v)` for n = 1 from the full ordered-pair absorbing system, solved densely.
fn brute_meeting_times(chain: &MarkovChain) -> Vec<f64> {
    let k = chain.len();
    let idx = |u: usize, v: usize| u * k + v;
    let mut a = DMatrix::<f64>::identity(k * k, k * k);
    let mut b = nalgebra::DVector::<f64>::zeros(k * k);
    for u in 0..k {
        for v in 0..k {
            let row = idx(u, v);
            if u == v {
                b[row] = 1.0;
                continue;
            }
            b[row] = 1.0;
            for x in 0..k {
                for y in 0..k {
                    if x == y {
                        b[row] += chain.p(u, x) * chain.p(v, y);
                    } else {
                        a[(row, idx(x, y))] -= chain.p(u, x) * chain.p(v, y);
                    }
                }
            }
        }
    }
    let x = a.lu().solve(&b).unwrap();
    x.iter().copied().collect()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn stationary_vector_is_a_fixed_point(chain in any_chain(6)) {
        prop_assert!(chain.stationarity_residual() <= 1e-10);
        let total: f64 = chain.stationary().iter().sum();
        prop_assert!((total - 1.0).abs() <= 1e-12);
        prop_assert!(chain.stationary().iter().all(|&p| p > 0.0));
    }

    #[test]
    fn exponent_lies_between_zero_and_entropy(chain in any_chain(6)) {
        let s = coalescence_exponent(&chain).unwrap();
        prop_assert!(s.coalescence_exponent >= -1e-12);
        prop_assert!(s.coalescence_exponent <= s.entropy + 1e-9);
        prop_assert_eq!(s.coalescence_exponent == 0.0, chain.len() == 1);
        prop_assert_eq!(s.is_mme, (s.coalescence_exponent - s.entropy).abs() <= 1e-9);
    }

    #[test]
    fn perron_value_sits_between_row_sum_extremes(chain in any_chain(6)) {
        let k = chain.len();
        let q = chain.squared();
        let sums: Vec<f64> = q.chunks(k).map(|r| r.iter().sum()).collect();
        let lo = sums.iter().cloned().fold(f64::INFINITY, f64::min);
        let hi = sums.iter().cloned().fold(0.0, f64::max);
        let value = perron(k, &q).unwrap().value;
        prop_assert!(value >= lo - 1e-12 && value <= hi + 1e-12);
    }

    #[test]
    fn perron_matches_general_eigensolver(chain in any_chain(6)) {
        let k = chain.len();
        let q = chain.squared();
        let value = perron(k, &q).unwrap().value;
        let oracle = spectral_radius(k, &q);
        prop_assert!((value - oracle).abs() <= 1e-9 * oracle.max(1.0), "{} vs {}", value, oracle);
    }

    #[test]
    fn parry_chain_attains_entropy(chain in any_chain(6)) {
        let k = chain.len();
        let parry = MarkovChain::from_rows(parry_rows(k, &chain.support_matrix()).unwrap()).unwrap();
        let s = coalescence_exponent(&parry).unwrap();
        prop_assert!(s.is_mme);
        prop_assert!((s.coalescence_exponent - s.entropy).abs() <= 1e-9);
        let lambda = spectral_radius(k, &chain.support_matrix());
        prop_assert!((s.entropy - lambda.ln()).abs() <= 1e-9);
    }

    #[test]
    fn perturbed_parry_chain_falls_short(chain in (2usize..=6).prop_flat_map(mixing_chain), shift in 0.05f64..0.2) {
        let k = chain.len();
        let mut rows = parry_rows(k, &chain.support_matrix()).unwrap();
        // row 0 always has the self-loop and the edge to 1
        let moved = shift.min(rows[0][0] * 0.9);
        prop_assume!(moved >= 0.05 || rows[0][0] >= 0.05);
        rows[0][0] -= moved;
        rows[0][1] += moved;
        let s = coalescence_exponent(&MarkovChain::from_rows(rows).unwrap()).unwrap();
        prop_assert!(!s.is_mme);
        prop_assert!(s.coalescence_exponent < s.entropy);
    }

    #[test]
    fn delta_routes_agree(chain in any_chain(4), n in 1usize..=7) {
        let exact = delta_exact(&chain, n);
        let brute = delta_enumerate(&chain, n, 1 << 20).unwrap();
        prop_assert!((exact - brute).abs() <= 1e-10 * brute, "{} vs {}", exact, brute);
    }

    #[test]
    fn delta_decays_at_the_exponent(chain in (1usize..=4).prop_flat_map(positive_chain)) {
        let l = coalescence_exponent(&chain).unwrap().coalescence_exponent;
        let logs = log_delta_series(&chain, 200);
        // ratio of consecutive terms converges to exp(−L)
        let step = logs[199] - logs[198];
        prop_assert!((step + l).abs() <= 1e-6 * l.max(1.0));
    }

    #[test]
    fn block_chain_is_stationary(chain in any_chain(4), n in 1usize..=5) {
        let nb = NBlockChain::build(&chain, n, 1 << 16).unwrap();
        prop_assert!(nb.stationarity_residual() <= 1e-10);
        prop_assert!(nb.max_row_defect() <= 1e-12);
        let total: f64 = nb.pi().iter().sum();
        prop_assert!((total - 1.0).abs() <= 1e-10);
    }

    #[test]
    fn meeting_table_matches_dense_oracle(chain in mixing_chain(3)) {
        let table = meeting_time_table_for(&chain, 1, 1 << 20).unwrap();
        let brute = brute_meeting_times(&chain);
        for u in 0..3 {
            for v in 0..3 {
                let want = brute[u * 3 + v];
                prop_assert!((table.get(u, v) - want).abs() <= 1e-8 * want, "({},{}) {} vs {}", u, v, table.get(u, v), want);
            }
        }
        prop_assert!(table.m_bar <= table.m_star);
    }
}

#[test]
fn meeting_table_uniform_pair_closed_form() {
    // two fair coins: first agreement is geometric(1/2) after the first step
    let c = MarkovChain::from_rows(vec![vec![0.5, 0.5], vec![0.5, 0.5]]).unwrap();
    let table = meeting_time_table_for(&c, 1, 1 << 20).unwrap();
    assert_relative_eq!(table.get(0, 1), 3.0, max_relative = 1e-12);
    assert_relative_eq!(table.get(1, 1), 1.0);
}
