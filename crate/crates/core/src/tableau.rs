//! Butcher tableaux for the explicit Runge-Kutta methods and pairs, and a
//! rooted-tree order-condition checker.

use crate::error::{Error, Result};

/// Explicit Runge-Kutta method with an optional embedded error estimator.
#[derive(Debug, Clone, PartialEq)]
pub struct ButcherPair {
    pub name: &'static str,
    /// Strictly lower-triangular stage coefficients, `s x s`.
    pub a: Vec<Vec<f64>>,
    /// Weights that advance the solution.
    pub b: Vec<f64>,
    /// Weights of the embedded method, used only for error estimation.
    pub b_hat: Option<Vec<f64>>,
    pub c: Vec<f64>,
    /// Order of the advancing method.
    pub order: usize,
    /// Order of the embedded method.
    pub embedded_order: Option<usize>,
}

fn r(num: i64, den: i64) -> f64 {
    num as f64 / den as f64
}

impl ButcherPair {
    pub fn stages(&self) -> usize {
        self.b.len()
    }

    /// First-same-as-last: the final stage is evaluated at `(t + h, y_new)`,
    /// so it can seed the first stage of the next step.
    pub fn is_fsal(&self) -> bool {
        let s = self.stages();
        self.c[s - 1] == 1.0 && self.b[s - 1] == 0.0 && self.a[s - 1][..s - 1] == self.b[..s - 1]
    }

    fn from_rows(
        name: &'static str,
        rows: &[&[(i64, i64)]],
        b: &[(i64, i64)],
        b_hat: Option<&[(i64, i64)]>,
        c: &[(i64, i64)],
        order: usize,
        embedded_order: Option<usize>,
    ) -> Self {
        let s = b.len();
        let mut a = vec![vec![0.0; s]; s];
        for (i, row) in rows.iter().enumerate() {
            for (j, &(n, d)) in row.iter().enumerate() {
                a[i + 1][j] = r(n, d);
            }
        }
        Self {
            name,
            a,
            b: b.iter().map(|&(n, d)| r(n, d)).collect(),
            b_hat: b_hat.map(|w| w.iter().map(|&(n, d)| r(n, d)).collect()),
            c: c.iter().map(|&(n, d)| r(n, d)).collect(),
            order,
            embedded_order,
        }
    }
}

/// Classical fourth-order Runge-Kutta method.
pub fn make_rk4() -> ButcherPair {
    ButcherPair::from_rows(
        "rk4",
        &[&[(1, 2)], &[(0, 1), (1, 2)], &[(0, 1), (0, 1), (1, 1)]],
        &[(1, 6), (1, 3), (1, 3), (1, 6)],
        None,
        &[(0, 1), (1, 2), (1, 2), (1, 1)],
        4,
        None,
    )
}

/// Dormand-Prince 5(4) pair, seven stages, FSAL.
pub fn make_dp5() -> ButcherPair {
    let b = [
        (35, 384),
        (0, 1),
        (500, 1113),
        (125, 192),
        (-2187, 6784),
        (11, 84),
        (0, 1),
    ];
    ButcherPair::from_rows(
        "dp5",
        &[
            &[(1, 5)],
            &[(3, 40), (9, 40)],
            &[(44, 45), (-56, 15), (32, 9)],
            &[(19372, 6561), (-25360, 2187), (64448, 6561), (-212, 729)],
            &[
                (9017, 3168),
                (-355, 33),
                (46732, 5247),
                (49, 176),
                (-5103, 18656),
            ],
            &b[..6],
        ],
        &b,
        Some(&[
            (5179, 57600),
            (0, 1),
            (7571, 16695),
            (393, 640),
            (-92097, 339200),
            (187, 2100),
            (1, 40),
        ]),
        &[(0, 1), (1, 5), (3, 10), (4, 5), (8, 9), (1, 1), (1, 1)],
        5,
        Some(4),
    )
}

/// Bogacki-Shampine 5(4) pair with the `b_hat` error estimator, eight
/// stages, FSAL.
pub fn make_bs5() -> ButcherPair {
    let b = [
        (587, 8064),
        (0, 1),
        (4440339, 15491840),
        (24353, 124800),
        (387, 44800),
        (2152, 5985),
        (7267, 94080),
        (0, 1),
    ];
    ButcherPair::from_rows(
        "bs5",
        &[
            &[(1, 6)],
            &[(2, 27), (4, 27)],
            &[(183, 1372), (-162, 343), (1053, 1372)],
            &[(68, 297), (-4, 11), (42, 143), (1960, 3861)],
            &[
                (597, 22528),
                (81, 352),
                (63099, 585728),
                (58653, 366080),
                (4617, 20480),
            ],
            &[
                (174197, 959244),
                (-30942, 79937),
                (8152137, 19744439),
                (666106, 1039181),
                (-29421, 29068),
                (482048, 414219),
            ],
            &b[..7],
        ],
        &b,
        Some(&[
            (2479, 34992),
            (0, 1),
            (123, 416),
            (612941, 3411720),
            (43, 1440),
            (2272, 6561),
            (79937, 1113912),
            (3293, 556956),
        ]),
        &[
            (0, 1),
            (1, 6),
            (2, 9),
            (3, 7),
            (2, 3),
            (3, 4),
            (1, 1),
            (1, 1),
        ],
        5,
        Some(4),
    )
}

/// Kennedy-Carpenter-Lewis RK5(4)8[3R+] pair.
///
/// The published coefficients are in three-register form: the first and
/// second subdiagonals of `A`; every entry further left equals the
/// advancing weight of its column. The method runs through the generic
/// tableau path.
pub fn make_kcl5() -> ButcherPair {
    const SUB1: [(i64, i64); 7] = [
        (141236061735, 3636543850841),
        (7367658691349, 25881828075080),
        (6185269491390, 13597512850793),
        (2669739616339, 18583622645114),
        (42158992267337, 9664249073111),
        (970532350048, 4459675494195),
        (1415616989537, 7108576874996),
    ];
    const SUB2: [(i64, i64); 6] = [
        (-343061178215, 2523150225462),
        (-4057757969325, 18246604264081),
        (1415180642415, 13311741862438),
        (-93461894168145, 25333855312294),
        (7285104933991, 14106269434317),
        (-4825949463597, 16828400578907),
    ];
    const B: [(i64, i64); 8] = [
        (514862045033, 4637360145389),
        (0, 1),
        (0, 1),
        (0, 1),
        (2561084526938, 7959061818733),
        (4857652849, 7350455163355),
        (1059943012790, 2822036905401),
        (2987336121747, 15645656703944),
    ];
    const B_HAT: [(i64, i64); 8] = [
        (1269299456316, 16631323494719),
        (0, 1),
        (2153976949307, 22364028786708),
        (2303038467735, 18680122447354),
        (7354111305649, 15643939971922),
        (768474111281, 10081205039574),
        (3439095334143, 10786306938509),
        (-3808726110015, 23644487528593),
    ];
    let s = B.len();
    let b: Vec<f64> = B.iter().map(|&(n, d)| r(n, d)).collect();
    let mut a = vec![vec![0.0; s]; s];
    for i in 1..s {
        a[i][i - 1] = r(SUB1[i - 1].0, SUB1[i - 1].1);
        if i >= 2 {
            a[i][i - 2] = r(SUB2[i - 2].0, SUB2[i - 2].1);
        }
        let m = i.saturating_sub(2);
        a[i][..m].copy_from_slice(&b[..m]);
    }
    let c = a.iter().map(|row| row.iter().sum()).collect();
    ButcherPair {
        name: "kcl5",
        a,
        b,
        b_hat: Some(B_HAT.iter().map(|&(n, d)| r(n, d)).collect()),
        c,
        order: 5,
        embedded_order: Some(4),
    }
}

/// Look up a method by its short name.
pub fn by_name(name: &str) -> Option<ButcherPair> {
    match name {
        "rk4" => Some(make_rk4()),
        "dp5" => Some(make_dp5()),
        "bs5" => Some(make_bs5()),
        "kcl5" => Some(make_kcl5()),
        _ => None,
    }
}

/// Unlabelled rooted tree, stored as a sorted list of subtrees.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord)]
struct Tree(Vec<Tree>);

impl Tree {
    fn order(&self) -> usize {
        1 + self.0.iter().map(Tree::order).sum::<usize>()
    }

    fn density(&self) -> f64 {
        self.order() as f64 * self.0.iter().map(Tree::density).product::<f64>()
    }

    /// Elementary weight vector: `Phi_i = prod_children (A Phi_child)_i`.
    fn weights(&self, a: &[Vec<f64>]) -> Vec<f64> {
        let s = a.len();
        let mut phi = vec![1.0; s];
        for child in &self.0 {
            let w = child.weights(a);
            for (i, p) in phi.iter_mut().enumerate() {
                *p *= a[i].iter().zip(&w).map(|(x, y)| x * y).sum::<f64>();
            }
        }
        phi
    }
}

/// All rooted trees of order `n`.
fn trees_of_order(n: usize) -> Vec<Tree> {
    fn forests(total: usize, max: Option<&Tree>, by_order: &[Vec<Tree>]) -> Vec<Vec<Tree>> {
        // Multisets of trees with orders summing to `total`, children listed
        // in non-increasing order to avoid duplicates.
        if total == 0 {
            return vec![Vec::new()];
        }
        let mut out = Vec::new();
        for k in 1..=total {
            for t in &by_order[k] {
                if max.is_some_and(|m| t > m) {
                    continue;
                }
                for mut rest in forests(total - k, Some(t), by_order) {
                    rest.insert(0, t.clone());
                    out.push(rest);
                }
            }
        }
        out
    }
    let mut by_order: Vec<Vec<Tree>> = vec![Vec::new(), vec![Tree(Vec::new())]];
    for m in 2..=n {
        let mut ts: Vec<Tree> = forests(m - 1, None, &by_order)
            .into_iter()
            .map(|mut f| {
                f.sort();
                Tree(f)
            })
            .collect();
        ts.sort();
        ts.dedup();
        by_order.push(ts);
    }
    by_order.swap_remove(n)
}

/// Number of rooted trees of each order `1..=5`: 1, 1, 2, 4, 9.
pub fn tree_counts(max_order: usize) -> Vec<usize> {
    (1..=max_order).map(|n| trees_of_order(n).len()).collect()
}

/// Maximum order-condition residual per order, for `b` and `b_hat`.
#[derive(Debug, Clone, PartialEq)]
pub struct OrderResiduals {
    /// `residuals[p - 1]` = max over trees of order `p` of `|b . Phi - 1/gamma|`.
    pub b: Vec<f64>,
    pub b_hat: Option<Vec<f64>>,
}

impl OrderResiduals {
    pub fn max_b(&self) -> f64 {
        self.b.iter().copied().fold(0.0, f64::max)
    }

    /// Max `b_hat` residual up to and including `order`.
    pub fn max_b_hat(&self, order: usize) -> Option<f64> {
        self.b_hat
            .as_ref()
            .map(|r| r.iter().take(order).copied().fold(0.0, f64::max))
    }
}

/// Evaluate every rooted-tree order condition up to `order` (at most 5).
pub fn verify_order_conditions(pair: &ButcherPair, order: usize) -> Result<OrderResiduals> {
    if order > 5 {
        return Err(Error::UnsupportedOrder(order));
    }
    let residual = |w: &[f64]| -> Vec<f64> {
        (1..=order)
            .map(|p| {
                trees_of_order(p)
                    .iter()
                    .map(|t| {
                        let phi = t.weights(&pair.a);
                        let lhs: f64 = w.iter().zip(&phi).map(|(x, y)| x * y).sum();
                        (lhs - 1.0 / t.density()).abs()
                    })
                    .fold(0.0, f64::max)
            })
            .collect()
    };
    Ok(OrderResiduals {
        b: residual(&pair.b),
        b_hat: pair.b_hat.as_deref().map(residual),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn tree_enumeration_counts() {
        assert_eq!(tree_counts(5), vec![1, 1, 2, 4, 9]);
    }

    #[test]
    fn printed_entries() {
        let dp5 = make_dp5();
        assert_eq!(dp5.a[1][0], 1.0 / 5.0);
        assert_eq!(dp5.a[2][0], 3.0 / 40.0);
        assert_eq!(dp5.a[2][1], 9.0 / 40.0);
        assert_eq!(dp5.b_hat.as_ref().unwrap()[6], 1.0 / 40.0);
        let bs5 = make_bs5();
        assert_eq!(bs5.c[1], 1.0 / 6.0);
        assert_eq!(bs5.a[3][0], 183.0 / 1372.0);
        assert_eq!(bs5.b_hat.as_ref().unwrap()[7], 3293.0 / 556956.0);
    }

    #[test]
    fn structural_invariants() {
        for pair in [make_rk4(), make_dp5(), make_bs5(), make_kcl5()] {
            let s = pair.stages();
            assert!(
                (pair.b.iter().sum::<f64>() - 1.0).abs() <= 1e-15,
                "{}",
                pair.name
            );
            if let Some(bh) = &pair.b_hat {
                assert!(
                    (bh.iter().sum::<f64>() - 1.0).abs() <= 1e-15,
                    "{}",
                    pair.name
                );
            }
            for i in 0..s {
                let row: f64 = pair.a[i].iter().sum();
                assert!((row - pair.c[i]).abs() <= 1e-15, "{} row {i}", pair.name);
                assert!(pair.a[i][i..].iter().all(|&v| v == 0.0));
            }
        }
        assert!(make_dp5().is_fsal());
        assert!(make_bs5().is_fsal());
        assert!(!make_rk4().is_fsal());
        assert!(!make_kcl5().is_fsal());
    }

    #[test]
    fn rk4_conditions() {
        let res = verify_order_conditions(&make_rk4(), 4).unwrap();
        assert!(res.max_b() < 1e-15, "{res:?}");
        assert!(res.b_hat.is_none());
        // Fifth order fails for a fourth-order method.
        let res5 = verify_order_conditions(&make_rk4(), 5).unwrap();
        assert!(res5.b[4] > 1e-3);
    }

    #[test]
    fn corrupted_weight_shows_in_first_order() {
        let mut rk4 = make_rk4();
        rk4.b[0] += 1e-3;
        let res = verify_order_conditions(&rk4, 1).unwrap();
        assert!((res.b[0] - 1e-3).abs() < 1e-15);
    }

    #[test]
    fn order_above_five_is_rejected() {
        assert!(matches!(
            verify_order_conditions(&make_rk4(), 6),
            Err(Error::UnsupportedOrder(6))
        ));
    }

    #[test]
    fn lookup() {
        assert_eq!(by_name("bs5").unwrap().stages(), 8);
        assert!(by_name("ab2").is_none());
    }
}
