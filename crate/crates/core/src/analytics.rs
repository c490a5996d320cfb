//! Closed-form communication loads, the scheme threshold and lower bounds, in
//! exact rational arithmetic. Loads are in units of the original segment size
//! `T`.

use num_rational::Ratio;
use num_traits::{Signed, Zero};
use serde::Serialize;

use crate::error::{params, Result};
use crate::model::SystemParams;
use crate::removal::SchemeChoice;

pub type Rational = Ratio<i64>;

fn q(n: i64, d: i64) -> Rational {
    Ratio::new(n, d)
}

fn check_coded(k: usize, r: usize) -> Result<(i64, i64)> {
    if r < 3 || r + 1 > k {
        return params(format!("coded removal loads need 3 <= r <= K-1, got K={k}, r={r}"));
    }
    Ok((k as i64, r as i64))
}

/// `L1(r) = (K(r-1) + ⌈(r²-2r)/2⌉) / (2(K-1))`.
pub fn load_scheme1(k: usize, r: usize) -> Result<Rational> {
    let (k, r) = check_coded(k, r)?;
    let ceil_half = (r * r - 2 * r + 1) / 2;
    Ok(q(k * (r - 1) + ceil_half, 2 * (k - 1)))
}

/// `L1` from the separate odd/even summations of the Scheme 1 broadcast sizes.
pub fn load_scheme1_by_parity(k: usize, r: usize) -> Result<Rational> {
    let (k, r) = check_coded(k, r)?;
    let two_k = 2 * (k - 1);
    Ok(if r % 2 == 1 {
        q(r - 1, two_k) * (Rational::from_integer(k) + q(r - 1, 2))
    } else {
        q(r - 2, two_k) * (Rational::from_integer(k) + q(r, 2)) + q(k, two_k)
    })
}

/// `L2(r) = (K-r)(2r-1) / (K-1)`.
pub fn load_scheme2(k: usize, r: usize) -> Result<Rational> {
    let (k, r) = check_coded(k, r)?;
    Ok(q((k - r) * (2 * r - 1), k - 1))
}

/// The uncoded corner broadcasts common to both schemes: `(K-r)/(K-1)`.
pub fn corner_load(k: usize, r: usize) -> Result<Rational> {
    let (k, r) = check_coded(k, r)?;
    Ok(q(k - r, k - 1))
}

/// Total load the formula predicts for removing a node with `scheme`.
pub fn removal_load_formula(k: usize, r: usize, scheme: SchemeChoice) -> Result<Rational> {
    Ok(match scheme {
        SchemeChoice::Scheme1 => corner_load(k, r)? + load_scheme1(k, r)?,
        SchemeChoice::Scheme2 => corner_load(k, r)? + load_scheme2(k, r)?,
        SchemeChoice::Uncoded => uncoded_removal_load(r),
        SchemeChoice::Auto => removal_load(k, r)?,
    })
}

/// `L_rem(r) = (K-r)/(K-1) + min(L1, L2)`.
pub fn removal_load(k: usize, r: usize) -> Result<Rational> {
    Ok(corner_load(k, r)? + load_scheme1(k, r)?.min(load_scheme2(k, r)?))
}

/// `L_u(r) = r`: every segment of the removed node sent once, uncoded.
pub fn uncoded_removal_load(r: usize) -> Rational {
    Rational::from_integer(r as i64)
}

/// `L_add(r) = rK/(K+1)`.
pub fn addition_load(k: usize, r: usize) -> Rational {
    q((r * k) as i64, (k + 1) as i64)
}

/// The node-addition lower bound scaled by the segment count: `rK/(K+1)`.
pub fn addition_lower_bound(params: &SystemParams) -> Rational {
    addition_load(params.k(), params.r())
}

/// The node-removal lower bound scaled by the segment count: `r/(r-1)`.
pub fn removal_lower_bound(k: usize, r: usize) -> Result<Rational> {
    if r < 2 || r + 1 > k {
        return params(format!("removal lower bound needs 2 <= r <= K-1, got K={k}, r={r}"));
    }
    Ok(q(r as i64, r as i64 - 1))
}

/// `r_th = ⌈(2K+2)/3⌉`.
pub fn threshold(k: usize) -> Result<usize> {
    if k < 4 {
        return params(format!("threshold needs K >= 4, got {k}"));
    }
    Ok((2 * k + 2).div_ceil(3))
}

/// Scheme 1 iff `min(L1, L2) = L1`; ties go to Scheme 1.
pub fn preferred_scheme(k: usize, r: usize) -> Result<SchemeChoice> {
    Ok(if load_scheme1(k, r)? <= load_scheme2(k, r)? {
        SchemeChoice::Scheme1
    } else {
        SchemeChoice::Scheme2
    })
}

/// Which rebalancing a report describes.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum Scenario {
    Removal { node: usize },
    Addition,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct LoadReport {
    pub params: SystemParams,
    pub scenario: Scenario,
    pub scheme_used: SchemeChoice,
    pub measured_load: Rational,
    /// Closed-form load of the scheme that ran.
    pub formula_load: Rational,
    pub l1: Option<Rational>,
    pub l2: Option<Rational>,
    pub l_rem: Option<Rational>,
    pub l_add: Option<Rational>,
    pub l_u: Rational,
    pub removal_lower_bound: Rational,
    pub addition_lower_bound: Rational,
    pub r_th: Option<usize>,
}

impl LoadReport {
    pub fn matches_formula(&self) -> bool {
        self.measured_load == self.formula_load
    }

    /// For additions: the measured load meets the lower bound.
    pub fn is_optimal(&self) -> bool {
        self.measured_load == self.addition_lower_bound
    }

    fn base(params: &SystemParams, scenario: Scenario, scheme_used: SchemeChoice, measured: Rational) -> Result<Self> {
        let (k, r) = (params.k(), params.r());
        let coded = r >= 3;
        Ok(Self {
            params: *params,
            scenario,
            scheme_used,
            measured_load: measured,
            formula_load: measured,
            l1: coded.then(|| load_scheme1(k, r)).transpose()?,
            l2: coded.then(|| load_scheme2(k, r)).transpose()?,
            l_rem: coded.then(|| removal_load(k, r)).transpose()?,
            l_add: None,
            l_u: uncoded_removal_load(r),
            removal_lower_bound: removal_lower_bound(k, r)?,
            addition_lower_bound: addition_lower_bound(params),
            r_th: threshold(k).ok(),
        })
    }

    pub fn removal(params: &SystemParams, node: usize, scheme_used: SchemeChoice, measured: Rational) -> Result<Self> {
        let mut rep = Self::base(params, Scenario::Removal { node }, scheme_used, measured)?;
        rep.formula_load = removal_load_formula(params.k(), params.r(), scheme_used)?;
        Ok(rep)
    }

    pub fn addition(params: &SystemParams, measured: Rational) -> Result<Self> {
        let mut rep = Self::base(params, Scenario::Addition, SchemeChoice::Uncoded, measured)?;
        let l_add = addition_load(params.k(), params.r());
        rep.l_add = Some(l_add);
        rep.formula_load = l_add;
        Ok(rep)
    }
}

/// A pair `(K, r)` at which the threshold rule does not pick the smaller load.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct Claim1Finding {
    pub k: usize,
    pub r: usize,
    pub l1: Rational,
    pub l2: Rational,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct Claim1Report {
    pub k_max: usize,
    pub pairs_checked: usize,
    /// `r < r_th` with `L1 > L2`, or `r >= r_th` with `L2 > L1`.
    pub counterexamples: Vec<Claim1Finding>,
    /// Pairs with `L1 = L2`.
    pub ties: Vec<Claim1Finding>,
    /// Values of `K` where the crossing points of the continuous odd/even
    /// Scheme 1 curves with `L2` do not bracket `r_th` as expected.
    pub crossing_failures: Vec<String>,
}

impl Claim1Report {
    pub fn holds(&self) -> bool {
        self.counterexamples.is_empty() && self.crossing_failures.is_empty()
    }

    pub fn strict(&self) -> bool {
        self.ties.is_empty()
    }
}

/// Scheme 1 load continued to real `x` along the odd-`r` closed form.
fn scheme1_odd_curve(k: i64, x: Rational) -> Rational {
    let one = Rational::from_integer(1);
    (x - one) * (Rational::from_integer(k) + (x - one) / 2) / (2 * (k - 1))
}

/// Scheme 1 load continued to real `x` along the even-`r` closed form.
fn scheme1_even_curve(k: i64, x: Rational) -> Rational {
    let two = Rational::from_integer(2);
    ((x - two) * (Rational::from_integer(k) + x / 2) + k) / (2 * (k - 1))
}

fn scheme2_curve(k: i64, x: Rational) -> Rational {
    (Rational::from_integer(k) - x) * (x * 2 - 1) / (k - 1)
}

fn check_crossings(k: usize) -> Option<String> {
    let ki = k as i64;
    let r_th = threshold(k).ok()?;
    // Odd curve meets L2 exactly at r_o = (2K+1)/3.
    let r_o = q(2 * ki + 1, 3);
    if !(scheme1_odd_curve(ki, r_o) - scheme2_curve(ki, r_o)).is_zero() {
        return Some(format!("K={k}: odd curve does not meet L2 at (2K+1)/3"));
    }
    // The even curve crosses at an irrational r_e; find ⌈r_e⌉ by sign changes.
    let gap = |n: i64| {
        let x = Rational::from_integer(n);
        scheme1_even_curve(ki, x) - scheme2_curve(ki, x)
    };
    let ceil_re = (1..=ki + 1).find(|&n| !gap(n).is_negative() && gap(n - 1).is_negative())?;
    let floor_ro = (2 * ki + 1) / 3;
    if !(scheme1_even_curve(ki, r_o) - scheme2_curve(ki, r_o)).is_negative() {
        return Some(format!("K={k}: r_e does not exceed r_o"));
    }
    if ceil_re as usize != r_th || (floor_ro + 1) as usize != r_th {
        return Some(format!("K={k}: ceil(r_e)={ceil_re}, floor(r_o)+1={}, r_th={r_th}", floor_ro + 1));
    }
    // The odd curve lies above the even one by exactly 1/(4(K-1)).
    let step = q(1, 4 * (ki - 1));
    if (3..ki).any(|n| {
        let x = Rational::from_integer(n);
        scheme1_odd_curve(ki, x) - scheme1_even_curve(ki, x) != step
    }) {
        return Some(format!("K={k}: odd and even Scheme 1 curves are not offset by 1/(4(K-1))"));
    }
    None
}

/// Exhaustively checks the threshold rule for every `K ∈ [4, k_max]` and
/// integer `r ∈ [3, K-1]`.
pub fn verify_claim1(k_max: usize) -> Result<Claim1Report> {
    if k_max < 4 {
        return params(format!("claim check needs K_max >= 4, got {k_max}"));
    }
    let per_k = crate::exec::map(&(4..=k_max).collect::<Vec<_>>(), crate::exec::Execution::default(), |&k| {
        let r_th = threshold(k).expect("K >= 4");
        let mut counter = Vec::new();
        let mut ties = Vec::new();
        for r in 3..k {
            let (l1, l2) = (load_scheme1(k, r).expect("range"), load_scheme2(k, r).expect("range"));
            let finding = Claim1Finding { k, r, l1, l2 };
            let ok = if r < r_th { l1 <= l2 } else { l2 <= l1 };
            if l1 == l2 {
                ties.push(finding.clone());
            }
            if !ok {
                counter.push(finding);
            }
        }
        (k - 3, counter, ties, check_crossings(k))
    });
    let mut report = Claim1Report {
        k_max,
        pairs_checked: 0,
        counterexamples: Vec::new(),
        ties: Vec::new(),
        crossing_failures: Vec::new(),
    };
    for (pairs, counter, ties, crossing) in per_k {
        report.pairs_checked += pairs;
        report.counterexamples.extend(counter);
        report.ties.extend(ties);
        report.crossing_failures.extend(crossing);
    }
    Ok(report)
}
