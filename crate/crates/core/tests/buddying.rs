use chrono::NaiveDate;
use lvfeeder::buddying::{cost, ga_buddy, scale_strategies, simple_buddy, GaConfig};
use lvfeeder::model::{Buddy, BuddyAssignment, Customer, Feeder, MonitoredPool, MonitoredProfile};
use lvfeeder::series::{HalfHourlySeries, Window};
use lvfeeder::Error;
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

const DAYS: usize = 3;

fn start() -> NaiveDate {
    NaiveDate::from_ymd_opt(2015, 1, 5).unwrap()
}

fn window() -> Window {
    Window::new(start(), DAYS)
}

fn random_series(rng: &mut ChaCha8Rng, scale: f64) -> HalfHourlySeries {
    HalfHourlySeries::new(start(), (0..DAYS * 48).map(|_| scale * rng.random_range(0.05..1.0)).collect()).unwrap()
}

/// A pool with the given number of profiles per domestic group, plus one
/// normalised "school" shape.
fn pool(rng: &mut ChaCha8Rng, sizes: &[(&str, usize)]) -> MonitoredPool {
    let mut profiles = Vec::new();
    for (g, n) in sizes {
        for i in 0..*n {
            let scale = rng.random_range(0.2..0.6);
            let s = random_series(rng, scale);
            profiles.push(MonitoredProfile::new(format!("{g}-{i}"), g.parse().unwrap(), s).unwrap());
        }
    }
    let school = random_series(rng, 1.0);
    let school = school.scaled(DAYS as f64 / school.total());
    profiles.push(MonitoredProfile::new("std:school", "ND:school".parse().unwrap(), school).unwrap());
    MonitoredPool::new(profiles).unwrap()
}

/// Feeder whose substation is the sum of random pool members plus noise.
fn feeder(rng: &mut ChaCha8Rng, pool: &MonitoredPool, classes: &[&str]) -> Feeder {
    let mut sub = vec![0.0; DAYS * 48];
    let mut customers = Vec::new();
    for (j, c) in classes.iter().enumerate() {
        let class: lvfeeder::CustomerClass = c.parse().unwrap();
        let cands = pool.candidates(&class.group_key()).unwrap();
        let k = cands[rng.random_range(0..cands.len())];
        let u = if class.is_domestic() {
            pool.get(k).mean_daily * rng.random_range(0.7..1.3)
        } else {
            rng.random_range(20.0..60.0)
        };
        let weight = if class.is_domestic() { 1.0 } else { u * rng.random_range(0.8..1.2) };
        for (s, v) in sub.iter_mut().zip(pool.get(k).series.values()) {
            *s += weight * v * rng.random_range(0.9..1.1);
        }
        customers.push(Customer::new(format!("c{j}"), class, Some(u)).unwrap());
    }
    Feeder::new("f", customers, Some(HalfHourlySeries::new(start(), sub).unwrap())).unwrap()
}

/// Independent slot-by-slot evaluation of the cost.
fn oracle_cost(feeder: &Feeder, pool: &MonitoredPool, profiles: &[usize], alphas: &[f64], w: f64) -> f64 {
    let d: f64 = feeder.customers.iter().map(|c| c.qmr_mean_daily.unwrap()).sum();
    let mut demand = 0.0;
    for (j, c) in feeder.customers.iter().enumerate() {
        let u = c.qmr_mean_daily.unwrap();
        demand += if c.is_domestic() {
            (u - pool.get(profiles[j]).mean_daily).abs()
        } else {
            u * (1.0 - alphas[j]).abs()
        };
    }
    if w == 1.0 {
        return demand / d;
    }
    let s = feeder.substation.as_ref().unwrap().values();
    let mut abs = 0.0;
    for h in 0..s.len() {
        let mut a = 0.0;
        for (j, c) in feeder.customers.iter().enumerate() {
            let p = pool.get(profiles[j]).series.values()[h];
            a += if c.is_domestic() { p } else { alphas[j] * c.qmr_mean_daily.unwrap() * p };
        }
        abs += (a - s[h]).abs();
    }
    (1.0 - w) * abs / s.iter().sum::<f64>() + w * demand / d
}

/// Minimum over all group-respecting assignments with alpha fixed at 1.
fn exhaustive_min(feeder: &Feeder, pool: &MonitoredPool, w: f64) -> f64 {
    let cands: Vec<&[usize]> = feeder
        .customers
        .iter()
        .map(|c| pool.candidates(&c.group_key()).unwrap())
        .collect();
    let alphas = vec![1.0; cands.len()];
    let mut idx = vec![0usize; cands.len()];
    let mut best = f64::INFINITY;
    loop {
        let profiles: Vec<usize> = idx.iter().zip(&cands).map(|(&i, c)| c[i]).collect();
        best = best.min(oracle_cost(feeder, pool, &profiles, &alphas, w));
        let mut j = 0;
        loop {
            if j == idx.len() {
                return best;
            }
            idx[j] += 1;
            if idx[j] < cands[j].len() {
                break;
            }
            idx[j] = 0;
            j += 1;
        }
    }
}

fn small_ga(seed: u64, w: f64) -> GaConfig {
    GaConfig {
        w,
        seed,
        population_size: 40,
        max_generations: 200,
        stall_generations: 40,
        fix_alpha: true,
        ..GaConfig::default()
    }
}

#[test]
fn cost_matches_slot_by_slot_oracle() {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let p = pool(&mut rng, &[("PC1-A", 4), ("PC2-C", 3)]);
    let f = feeder(&mut rng, &p, &["PC1-A", "PC2-C", "ND:school"]);
    for trial in 0..20 {
        let profiles = vec![
            p.candidates(&"PC1-A".parse().unwrap()).unwrap()[trial % 4],
            p.candidates(&"PC2-C".parse().unwrap()).unwrap()[trial % 3],
            p.len() - 1,
        ];
        let alpha = 0.8 + 0.02 * trial as f64;
        let a = BuddyAssignment::new(vec![
            Buddy { profile: profiles[0], alpha: None },
            Buddy { profile: profiles[1], alpha: None },
            Buddy { profile: profiles[2], alpha: Some(alpha) },
        ]);
        for w in [0.0, 0.3, 1.0] {
            let got = cost(&f, &a, &p, w, window()).unwrap();
            let want = oracle_cost(&f, &p, &profiles, &[1.0, 1.0, alpha], w);
            assert!((got.total - want).abs() <= 1e-12 * want.max(1.0), "w={w}: {} vs {want}", got.total);
            let recombined = (1.0 - w) * got.substation_term + w * (got.domestic_term + got.non_domestic_term);
            if w < 1.0 {
                assert!((got.total - recombined).abs() <= 1e-12 * got.total.max(1e-300));
            }
        }
    }
}

#[test]
fn ga_matches_exhaustive_minimum() {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let groups = ["PC1-A", "PC1-B", "PC2-D", "PC1-FGH-PV"];
    for case in 0..8 {
        let sizes: Vec<(&str, usize)> = groups.iter().map(|g| (*g, rng.random_range(1..=6))).collect();
        let p = pool(&mut rng, &sizes);
        let m = rng.random_range(1..=5);
        let classes: Vec<&str> = (0..m).map(|_| ["PC1-A", "PC1-B", "PC2-D", "PC1-H-PV"][rng.random_range(0..4)]).collect();
        let f = feeder(&mut rng, &p, &classes);
        for w in [0.0, 0.5, 1.0] {
            let out = ga_buddy(&f, &p, window(), &small_ga(case, w)).unwrap();
            let best = exhaustive_min(&f, &p, w);
            assert!(
                (out.cost.total - best).abs() <= 1e-9 * best.max(1e-12),
                "case {case} w {w}: GA {} vs exhaustive {best}",
                out.cost.total
            );
        }
    }
}

#[test]
fn w1_cost_ignores_substation() {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let p = pool(&mut rng, &[("PC1-A", 5)]);
    let f = feeder(&mut rng, &p, &["PC1-A", "PC1-A", "ND:school"]);
    let a = simple_buddy(&f, &p).unwrap();
    let before = cost(&f, &a, &p, 1.0, window()).unwrap();
    let mut g = f.clone();
    g.substation = Some(g.substation.unwrap().scaled(7.0));
    assert_eq!(cost(&g, &a, &p, 1.0, window()).unwrap(), before);
    g.substation = None;
    assert_eq!(cost(&g, &a, &p, 1.0, window()).unwrap(), before);
    assert!(matches!(cost(&g, &a, &p, 0.5, window()), Err(Error::Domain(_))));
}

#[test]
fn zero_substation_is_a_degenerate_normalizer() {
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let p = pool(&mut rng, &[("PC1-A", 2)]);
    let mut f = feeder(&mut rng, &p, &["PC1-A"]);
    f.substation = Some(HalfHourlySeries::zeros(window()));
    let a = simple_buddy(&f, &p).unwrap();
    assert!(matches!(cost(&f, &a, &p, 0.0, window()), Err(Error::DegenerateNormalizer(_))));
}

#[test]
fn ga_is_deterministic_and_trace_is_monotone() {
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    let p = pool(&mut rng, &[("PC1-A", 6), ("PC1-C", 6)]);
    let f = feeder(&mut rng, &p, &["PC1-A", "PC1-A", "PC1-C", "PC1-C", "ND:school", "ND:school"]);
    let cfg = GaConfig {
        population_size: 30,
        max_generations: 60,
        ..GaConfig::default()
    };
    let a = ga_buddy(&f, &p, window(), &cfg).unwrap();
    let b = ga_buddy(&f, &p, window(), &cfg).unwrap();
    assert_eq!(a, b);
    assert!(a.trace.windows(2).all(|w| w[1] <= w[0]));
    a.assignment.validate(&f, &p).unwrap();
}

#[test]
fn single_customer_recovers_true_profile() {
    let mut rng = ChaCha8Rng::seed_from_u64(21);
    let p = pool(&mut rng, &[("PC1-B", 6)]);
    let truth = p.candidates(&"PC1-B".parse().unwrap()).unwrap()[4];
    let c = Customer::new("c", "PC1-B".parse().unwrap(), Some(9.0)).unwrap();
    let f = Feeder::new("f", vec![c], Some(p.get(truth).series.clone())).unwrap();
    let out = ga_buddy(&f, &p, window(), &small_ga(0, 0.0)).unwrap();
    assert_eq!(out.assignment.buddies[0].profile, truth);
    assert_eq!(out.cost.total, 0.0);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn ga_never_worse_than_simple_at_w1(seed in any::<u64>(), m in 1usize..8) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let p = pool(&mut rng, &[("PC1-A", 5), ("PC2-E", 3)]);
        let classes: Vec<&str> = (0..m).map(|i| if i % 3 == 0 { "PC2-E" } else { "PC1-A" }).collect();
        let f = feeder(&mut rng, &p, &classes);
        let sa = cost(&f, &simple_buddy(&f, &p).unwrap(), &p, 1.0, window()).unwrap();
        let cfg = GaConfig { w: 1.0, seed, population_size: 20, max_generations: 20, ..GaConfig::default() };
        let ga = ga_buddy(&f, &p, window(), &cfg).unwrap();
        prop_assert!(ga.cost.total <= sa.total + 1e-12);
    }

    #[test]
    fn ga_individuals_respect_groups(seed in any::<u64>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let p = pool(&mut rng, &[("PC1-A", 4), ("PC1-D", 2), ("PC2-B", 3)]);
        let f = feeder(&mut rng, &p, &["PC1-A", "PC1-D", "PC2-B", "ND:school"]);
        let cfg = GaConfig { seed, population_size: 12, max_generations: 15, local_search: false, ..GaConfig::default() };
        let out = ga_buddy(&f, &p, window(), &cfg).unwrap();
        prop_assert!(out.assignment.validate(&f, &p).is_ok());
        prop_assert!(out.trace.windows(2).all(|w| w[1] <= w[0]));
    }
}

#[test]
fn invalid_ga_config_is_rejected() {
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let p = pool(&mut rng, &[("PC1-A", 2)]);
    let f = feeder(&mut rng, &p, &["PC1-A"]);
    for cfg in [
        GaConfig { w: 1.5, ..GaConfig::default() },
        GaConfig { population_size: 1, ..GaConfig::default() },
        GaConfig { crossover_rate: -0.1, ..GaConfig::default() },
        GaConfig { mutation_rate: Some(2.0), ..GaConfig::default() },
    ] {
        assert!(matches!(ga_buddy(&f, &p, window(), &cfg), Err(Error::Config(_))));
    }
}

#[test]
fn strategies_reject_mixed_feeders() {
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let p = pool(&mut rng, &[("PC1-A", 2)]);
    let f = feeder(&mut rng, &p, &["PC1-A", "ND:school"]);
    let err = scale_strategies(&f, &p, window(), 10.0, &GaConfig::default()).unwrap_err();
    assert!(matches!(err, Error::Unsupported(_)));
}

#[test]
fn strategies_on_exact_school_feeder() {
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    let p = pool(&mut rng, &[("PC1-A", 1)]);
    let school = p.len() - 1;
    let u = 119.87;
    let c = Customer::new("s", "ND:school".parse().unwrap(), Some(u)).unwrap();
    let f = Feeder::new("f", vec![c], Some(p.get(school).series.scaled(u))).unwrap();
    let truth = lvfeeder::buddying::measured_daily(&f, window()).unwrap();
    let s = scale_strategies(&f, &p, window(), truth, &small_ga(0, 0.0)).unwrap();
    for e in [s.actual.effective_daily_kwh, s.estimated.effective_daily_kwh, s.optimal.effective_daily_kwh] {
        assert!((e - u).abs() < 1e-9 * u, "{e}");
    }
}
