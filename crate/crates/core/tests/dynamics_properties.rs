use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use seis::blockcert::{poisson_time_t, uniformized_chain};
use seis::dynamics::{dispersal_pmf, edge_speed, evolve, first_violation, sample_dispersal, Process};
use seis::edgechain::drift;
use seis::stats::replica_seed;
use seis::substructure::{split_for_lambda_coupling, Intensities, Mark};
use seis::{Configuration, Graph, Model, Substructure};

fn states(model: Model, codes: &[u8]) -> Configuration {
    Configuration::new(model, codes.to_vec()).unwrap()
}

fn seis_codes(n: usize) -> impl Strategy<Value = Vec<u8>> {
    prop::collection::vec(0u8..3, n)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]

    #[test]
    fn sandwich(seed in any::<u64>(), codes in seis_codes(8), lambda in 0.2f64..4.0, tau in 0.05f64..5.0) {
        let g = Graph::path(8).unwrap();
        let seis = Process::seis(lambda, tau).unwrap();
        let sub = Substructure::generate(&g, seis.intensities(), 6.0, seed).unwrap();
        let run = |p: Process| evolve(&p, &states(p.model, &codes), &sub, 6.0).unwrap();
        let lower = run(Process::two_stage(lambda, tau).unwrap());
        let mid = run(seis);
        let upper = run(Process::upper(lambda, tau).unwrap());
        prop_assert_eq!(first_violation(&lower, &mid, |a, b| a <= b), None);
        prop_assert_eq!(first_violation(&mid, &upper, |a, b| Model::Upper.site_le(a, b)), None);
    }

    #[test]
    fn contact_is_attractive(seed in any::<u64>(), lo in prop::collection::vec(any::<bool>(), 10), extra in prop::collection::vec(any::<bool>(), 10), lambda in 0.2f64..4.0) {
        let g = Graph::cycle(10).unwrap();
        let p = Process::contact(lambda).unwrap();
        let sub = Substructure::generate(&g, p.intensities(), 5.0, seed).unwrap();
        let a: Vec<u8> = lo.iter().map(|&b| if b { 2 } else { 0 }).collect();
        let b: Vec<u8> = lo.iter().zip(&extra).map(|(&x, &y)| if x || y { 2 } else { 0 }).collect();
        let ta = evolve(&p, &states(Model::Contact, &a), &sub, 5.0).unwrap();
        let tb = evolve(&p, &states(Model::Contact, &b), &sub, 5.0).unwrap();
        prop_assert_eq!(first_violation(&ta, &tb, |x, y| x <= y), None);
    }

    #[test]
    fn lambda_coupling_dominates(seed in any::<u64>(), kind in 0usize..4, lambda in 0.1f64..3.0, gap in 0.01f64..3.0, tau in 0.1f64..3.0, occupied in prop::collection::vec(any::<bool>(), 8)) {
        let model = [Model::Contact, Model::TwoStage, Model::Upper, Model::Limit][kind];
        let g = Graph::path(8).unwrap();
        let lo = Process::new(model, lambda, tau).unwrap();
        let hi = Process::new(model, lambda + gap, tau).unwrap();
        let rates = lo.intensities();
        let (sub_lo, sub_hi) = split_for_lambda_coupling(&g, lambda, lambda + gap, rates.recovery, rates.onset, 5.0, seed).unwrap();
        let codes: Vec<u8> = occupied.iter().map(|&o| if o { model.top() } else { 0 }).collect();
        let a = evolve(&lo, &states(model, &codes), &sub_lo, 5.0).unwrap();
        let b = evolve(&hi, &states(model, &codes), &sub_hi, 5.0).unwrap();
        prop_assert_eq!(first_violation(&a, &b, |x, y| model.site_le(x, y)), None);
    }
}

#[test]
fn seis_is_not_attractive() {
    let g = Graph::path(2).unwrap();
    let sub = Substructure::scripted(
        &g,
        Intensities::new(1.0, 1.0, 1.0),
        1.0,
        0,
        &[(Mark::Recovery(0), 0.1), (Mark::Onset(0), 0.3), (Mark::Transmission(0, 1), 0.4)],
    )
    .unwrap();
    let p = Process::seis(1.0, 1.0).unwrap();
    let low = evolve(&p, &states(Model::Seis, &[1, 0]), &sub, 1.0).unwrap();
    let high = evolve(&p, &states(Model::Seis, &[2, 0]), &sub, 1.0).unwrap();
    assert_eq!(first_violation(&low, &high, |a, b| a <= b), Some(0.1));
    assert_eq!(low.final_state.states(), &[2, 1]);
    assert_eq!(high.final_state.states(), &[0, 0]);
}

/// Independent exponential race: rate-1 recovery against one rate-lambda
/// clock per neighbor.
fn race_oracle(lambda: f64, k: usize, samples: usize, seed: u64) -> Vec<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut counts = vec![0usize; 1 << k];
    for _ in 0..samples {
        let r = -(1.0 - rng.random::<f64>()).ln();
        let mut mask = 0;
        for j in 0..k {
            if -(1.0 - rng.random::<f64>()).ln() / lambda < r {
                mask |= 1 << j;
            }
        }
        counts[mask] += 1;
    }
    counts.into_iter().map(|c| c as f64 / samples as f64).collect()
}

#[test]
fn pmf_matches_race_oracle() {
    let n = 1_000_000;
    for (lambda, k) in [(1.0, 2), (0.4, 3), (2.5, 1)] {
        let pmf = dispersal_pmf(lambda, k).unwrap();
        let freq = race_oracle(lambda, k, n, 17 + k as u64);
        for (mask, (&p, &f)) in pmf.probs.iter().zip(&freq).enumerate() {
            let se = (p * (1.0 - p) / n as f64).sqrt();
            assert!((p - f).abs() < 4.0 * se, "lambda {lambda} k {k} mask {mask}: {p} vs {f}");
        }
    }
}

#[test]
fn sampler_frequencies() {
    let pmf = dispersal_pmf(1.0, 2).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let n = 100_000;
    let mut counts = [0usize; 4];
    for _ in 0..n {
        counts[sample_dispersal(&pmf, &mut rng)] += 1;
    }
    for (mask, &c) in counts.iter().enumerate() {
        let p = pmf.prob(mask);
        let se = (p * (1.0 - p) / n as f64).sqrt();
        assert!((c as f64 / n as f64 - p).abs() < 3.0 * se);
    }
}

#[test]
fn evolve_matches_uniformized_law() {
    let reps = 100_000;
    let t = 0.8;
    // 3 sigma per state; with 81 states the two-stage case uses the
    // Bonferroni bound for a 1% family-wise level instead
    for (process, init, z) in [
        (Process::limit(1.3).unwrap(), vec![0u8, 1, 1, 0], 3.0),
        (Process::two_stage(1.5, 0.5).unwrap(), vec![0u8, 2, 1, 0], 3.9),
    ] {
        let g = Graph::path(4).unwrap();
        let chain = uniformized_chain(&process, 4).unwrap();
        let mut v0 = vec![0.0; chain.len()];
        v0[chain.encode(&init)] = 1.0;
        let (exact, tail) = poisson_time_t(&chain, t, &v0, 200).unwrap();
        assert!(tail < 1e-12);
        let mut counts = vec![0usize; chain.len()];
        let eta0 = Configuration::new(process.model, init.clone()).unwrap();
        for r in 0..reps {
            let sub = Substructure::generate(&g, process.intensities(), t, replica_seed(99, r)).unwrap();
            let traj = evolve(&process, &eta0, &sub, t).unwrap();
            counts[chain.encode(traj.final_state.states())] += 1;
        }
        for (code, (&p, &c)) in exact.iter().zip(&counts).enumerate() {
            let se = (p * (1.0 - p) / reps as f64).sqrt().max(1e-9);
            let f = c as f64 / reps as f64;
            assert!((f - p).abs() <= z * se, "{:?} state {:?}: {f} vs {p}", process.model, chain.decode(code));
        }
    }
}

#[test]
fn contact_edge_speed_signs() {
    let slow = edge_speed(&Process::contact(0.5).unwrap(), 400, 3.0, 40, 1).unwrap();
    assert!(slow.alpha > 0.0, "{slow:?}");
    let fast = edge_speed(&Process::contact(2.0).unwrap(), 300, 40.0, 40, 2).unwrap();
    assert!(fast.alpha < 0.0, "{fast:?}");
    assert_eq!(fast.per_replica.len(), 40);
}

#[test]
fn edge_speed_reports_truncation() {
    let p = Process::contact(3.0).unwrap();
    assert!(matches!(edge_speed(&p, 20, 50.0, 2, 0), Err(seis::Error::Truncation { .. })));
}

#[test]
fn drift_sign_agrees_with_front_speed() {
    // subcritical fronts run away fast, so they get a short window
    for (lambda, t_end) in [(0.6, 4.0), (2.5, 40.0)] {
        let p = Process::contact(lambda).unwrap();
        let e = drift(&p, 2).unwrap();
        let a = edge_speed(&p, 400, t_end, 30, 7).unwrap();
        assert_eq!(e > 0.0, a.alpha > 0.0, "lambda {lambda}: drift {e}, speed {}", a.alpha);
        assert!(a.alpha.abs() > 3.0 * a.std_err);
    }
}
