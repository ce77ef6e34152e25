//! Two-group one-way ANOVA and two-group MANOVA (Pillai's trace).

use nalgebra::{DMatrix, DVector};
use tracing::warn;

use super::{f_sf, mean, DegreesOfFreedom, TestResult};
use crate::error::{Error, Result};

/// Classical one-way F-test between two samples.
///
/// With two groups this is the pooled two-sample t-test (`F = t²`).
/// Zero pooled variance is resolved by convention: equal means give
/// `p = 1`, different means give `p = 0`; both are flagged as degenerate.
pub fn anova_oneway(a: &[f64], b: &[f64]) -> Result<TestResult> {
    if a.len() < 2 || b.len() < 2 {
        return Err(Error::Sizing(format!(
            "anova_oneway needs at least 2 observations per group, got {} and {}",
            a.len(),
            b.len()
        )));
    }
    let n = (a.len() + b.len()) as f64;
    let (ma, mb) = (mean(a), mean(b));
    let grand = (ma * a.len() as f64 + mb * b.len() as f64) / n;
    let ss_between = a.len() as f64 * (ma - grand).powi(2) + b.len() as f64 * (mb - grand).powi(2);
    let ss_within: f64 = a.iter().map(|x| (x - ma).powi(2)).sum::<f64>()
        + b.iter().map(|x| (x - mb).powi(2)).sum::<f64>();
    let df = DegreesOfFreedom::F { num: 1.0, den: n - 2.0 };

    if ss_within <= f64::EPSILON * ss_between.max(1.0) * n {
        return Ok(if ma == mb || ss_between == 0.0 {
            TestResult::degenerate(0.0, 1.0, df)
        } else {
            TestResult::degenerate(f64::INFINITY, 0.0, df)
        });
    }
    let f = ss_between / (ss_within / (n - 2.0));
    Ok(TestResult {
        statistic: f,
        p_value: f_sf(f, 1.0, n - 2.0),
        df,
        degenerate: false,
    })
}

/// Two-group MANOVA via Pillai's trace with its exact F transform.
///
/// Rows are observations, columns are variables. Columns that are constant
/// over both groups carry no information and are dropped. For two groups the
/// hypothesis matrix has rank one, so Pillai's trace is `V = D / (1 + D)` with
/// `D = (n_a n_b / n) dᵀ E⁻¹ d`, and `F = D (n - p - 1) / p` on `(p, n - p - 1)`
/// degrees of freedom. With one variable this is exactly [`anova_oneway`].
pub fn manova_two_group(a: &[Vec<f64>], b: &[Vec<f64>]) -> Result<TestResult> {
    let d = a.first().or(b.first()).map(Vec::len).unwrap_or(0);
    if d == 0 {
        return Err(Error::Sizing("manova_two_group needs at least one column".into()));
    }
    if a.iter().chain(b).any(|row| row.len() != d) {
        return Err(Error::Schema("manova_two_group: ragged input matrices".into()));
    }
    let (na, nb) = (a.len(), b.len());
    if na == 0 || nb == 0 || na + nb < d + 2 {
        return Err(Error::Sizing(format!(
            "manova_two_group needs n_a + n_b >= d + 2 (got {na} + {nb} with d = {d})"
        )));
    }

    let keep: Vec<usize> = (0..d)
        .filter(|&j| {
            let first = a.first().unwrap_or(&b[0])[j];
            a.iter().chain(b).any(|row| row[j] != first)
        })
        .collect();
    let p = keep.len();
    let n = (na + nb) as f64;
    if p == 0 {
        return Ok(TestResult::degenerate(0.0, 1.0, DegreesOfFreedom::F { num: 1.0, den: n - 2.0 }));
    }
    let df = DegreesOfFreedom::F {
        num: p as f64,
        den: n - p as f64 - 1.0,
    };

    let column_means = |rows: &[Vec<f64>]| -> DVector<f64> {
        DVector::from_iterator(p, keep.iter().map(|&j| rows.iter().map(|r| r[j]).sum::<f64>() / rows.len() as f64))
    };
    let mean_a = column_means(a);
    let mean_b = column_means(b);
    let diff = &mean_a - &mean_b;

    let mut e = DMatrix::<f64>::zeros(p, p);
    for (rows, m) in [(a, &mean_a), (b, &mean_b)] {
        for row in rows {
            let c = DVector::from_iterator(p, keep.iter().enumerate().map(|(k, &j)| row[j] - m[k]));
            e += &c * c.transpose();
        }
    }

    // A variable with zero within-group spread but different group means
    // separates the groups perfectly.
    for k in 0..p {
        if e[(k, k)] <= f64::EPSILON * n && diff[k] != 0.0 {
            return Ok(TestResult::degenerate(f64::INFINITY, 0.0, df));
        }
    }
    if diff.iter().all(|&x| x == 0.0) {
        return Ok(TestResult::degenerate(0.0, 1.0, df));
    }

    let scale = (0..p).map(|k| e[(k, k)]).fold(0.0, f64::max);
    let well_conditioned = e.clone().cholesky().filter(|chol| {
        let l = chol.l_dirty();
        (0..p).all(|k| l[(k, k)] * l[(k, k)] > 1e-10 * scale)
    });
    // A rank-deficient SSCP matrix restricts the test to its column space, so
    // the effective number of variables is the rank.
    let (solved, rank) = match well_conditioned {
        Some(chol) => (chol.solve(&diff), p),
        None => {
            warn!("manova_two_group: singular pooled SSCP matrix, using pseudo-inverse");
            let tol = 1e-10 * scale;
            let rank = e.clone().svd(false, false).singular_values.iter().filter(|&&s| s > tol).count();
            let pinv = e
                .pseudo_inverse(tol)
                .map_err(|msg| Error::Numeric(format!("pseudo-inverse failed: {msg}")))?;
            (pinv * &diff, rank.max(1))
        }
    };
    let dd = (na * nb) as f64 / n * diff.dot(&solved);
    let den = n - rank as f64 - 1.0;
    if den <= 0.0 {
        return Err(Error::Sizing(format!(
            "manova_two_group: {rank} informative columns leave no error degrees of freedom"
        )));
    }
    let f = dd * den / rank as f64;
    let df = DegreesOfFreedom::F {
        num: rank as f64,
        den,
    };
    Ok(TestResult {
        statistic: f,
        p_value: f_sf(f, rank as f64, den),
        df,
        degenerate: false,
    })
}
