use crate::error::Result;
use crate::model::{Buddy, BuddyAssignment, Feeder, MonitoredPool};

/// Nearest-demand buddying without substation data.
///
/// A domestic customer gets the profile of its group whose mean daily demand
/// is closest to its own (ties go to the lowest pool index). A non-domestic
/// customer gets its type's standard profile with `alpha = 1`, so aggregation
/// scales the normalised profile by `U_j`.
pub fn simple_buddy(feeder: &Feeder, pool: &MonitoredPool) -> Result<BuddyAssignment> {
    let buddies = feeder
        .customers
        .iter()
        .map(|c| {
            let candidates = pool.candidates(&c.group_key())?;
            if !c.is_domestic() {
                return Ok(Buddy {
                    profile: candidates[0],
                    alpha: Some(1.0),
                });
            }
            let u = c.mean_daily()?;
            let mut best = candidates[0];
            let mut best_gap = (u - pool.get(best).mean_daily).abs();
            for &k in &candidates[1..] {
                let gap = (u - pool.get(k).mean_daily).abs();
                if gap < best_gap {
                    best = k;
                    best_gap = gap;
                }
            }
            Ok(Buddy {
                profile: best,
                alpha: None,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(BuddyAssignment::new(buddies))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{Customer, MonitoredProfile};
    use crate::series::HalfHourlySeries;
    use chrono::NaiveDate;

    fn pool(means: &[(&str, &str, f64)]) -> MonitoredPool {
        let start = NaiveDate::from_ymd_opt(2015, 1, 5).unwrap();
        MonitoredPool::new(
            means
                .iter()
                .map(|(id, g, m)| {
                    MonitoredProfile::new(
                        *id,
                        g.parse().unwrap(),
                        HalfHourlySeries::constant(start, 1, m / 48.0).unwrap(),
                    )
                    .unwrap()
                })
                .collect(),
        )
        .unwrap()
    }

    fn feeder(customers: Vec<(&str, f64)>) -> Feeder {
        Feeder::new(
            "f",
            customers
                .into_iter()
                .enumerate()
                .map(|(i, (c, u))| Customer::new(format!("c{i}"), c.parse().unwrap(), Some(u)).unwrap())
                .collect(),
            None,
        )
        .unwrap()
    }

    #[test]
    fn picks_nearest_mean() {
        let p = pool(&[("a", "PC1-A", 8.0), ("b", "PC1-A", 9.5), ("c", "PC1-A", 14.0), ("d", "PC1-B", 10.0)]);
        let a = simple_buddy(&feeder(vec![("PC1-A", 10.0)]), &p).unwrap();
        assert_eq!(a.buddies[0].profile, 1);
    }

    #[test]
    fn exact_match_wins() {
        let p = pool(&[("a", "PC2-C", 8.0), ("b", "PC2-C", 12.0)]);
        let a = simple_buddy(&feeder(vec![("PC2-C", 12.0)]), &p).unwrap();
        assert_eq!(a.buddies[0].profile, 1);
    }

    #[test]
    fn ties_go_to_lowest_index() {
        // 12/48 and 24/48 are exact, so both gaps are exactly 6
        let p = pool(&[("a", "PC1-A", 12.0), ("b", "PC1-A", 24.0)]);
        let a = simple_buddy(&feeder(vec![("PC1-A", 18.0)]), &p).unwrap();
        assert_eq!(a.buddies[0].profile, 0);
    }

    #[test]
    fn non_domestic_gets_standard_profile_with_unit_alpha() {
        let p = pool(&[("a", "PC1-A", 9.0), ("std:school", "ND:school", 1.0)]);
        let f = feeder(vec![("ND:school", 119.87)]);
        let a = simple_buddy(&f, &p).unwrap();
        assert_eq!(a.buddies[0], Buddy { profile: 1, alpha: Some(1.0) });
        let agg = crate::model::aggregate_assignment(&f, &a, &p).unwrap();
        assert!((agg.total() - 119.87).abs() < 1e-9);
    }

    #[test]
    fn empty_group_is_an_error() {
        let p = pool(&[("a", "PC1-A", 9.0)]);
        assert!(simple_buddy(&feeder(vec![("PC1-B", 10.0)]), &p).is_err());
    }
}
