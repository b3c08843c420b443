//! Graph summary tables: coverage counts and the user/mac ratio
//! distribution.

use std::fmt;

use crate::model::Graph;

/// Six-number summary of the |S|/|M| ratio over a graph's mappings.
/// Quartiles use linear interpolation between order statistics.
#[derive(Debug, Clone, PartialEq)]
pub struct RatioStats {
    pub min: f64,
    pub q1: f64,
    pub median: f64,
    pub mean: f64,
    pub q3: f64,
    pub max: f64,
}

/// Counts and ratio summary for one graph. The ratio section is absent
/// when the graph has no mappings.
#[derive(Debug, Clone, PartialEq)]
pub struct GraphStats {
    pub matches: usize,
    pub mappings: usize,
    /// Sum of |S| over mappings plus the matched users.
    pub users_covered: usize,
    /// Sum of |M| over mappings plus the matched macs.
    pub macs_coverage: usize,
    pub ratio: Option<RatioStats>,
}

/// Linear-interpolation quantile over an ascending sample.
fn quantile(sorted: &[f64], p: f64) -> f64 {
    debug_assert!(!sorted.is_empty());
    let h = (sorted.len() - 1) as f64 * p;
    let lo = h.floor() as usize;
    let hi = h.ceil() as usize;
    if lo == hi {
        sorted[lo]
    } else {
        sorted[lo] + (h - lo as f64) * (sorted[hi] - sorted[lo])
    }
}

/// Summarizes a graph's sizes and its ratio distribution.
pub fn stats(g: &Graph) -> GraphStats {
    let users_covered: usize =
        g.mappings.iter().map(|m| m.users().len()).sum::<usize>() + g.matches.len();
    let macs_coverage: usize =
        g.mappings.iter().map(|m| m.macs().len()).sum::<usize>() + g.matches.len();

    let ratio = if g.mappings.is_empty() {
        None
    } else {
        let mut ratios: Vec<f64> = g
            .mappings
            .iter()
            .map(|m| m.users().len() as f64 / m.macs().len() as f64)
            .collect();
        ratios.sort_by(|a, b| a.partial_cmp(b).expect("ratios are finite"));
        let mean = ratios.iter().sum::<f64>() / ratios.len() as f64;
        Some(RatioStats {
            min: ratios[0],
            q1: quantile(&ratios, 0.25),
            median: quantile(&ratios, 0.5),
            mean,
            q3: quantile(&ratios, 0.75),
            max: *ratios.last().expect("non-empty"),
        })
    };

    GraphStats {
        matches: g.matches.len(),
        mappings: g.mappings.len(),
        users_covered,
        macs_coverage,
        ratio,
    }
}

impl fmt::Display for GraphStats {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "| matches | mappings | users covered | macs coverage |")?;
        writeln!(
            f,
            "| {} | {} | {} | {} |",
            self.matches, self.mappings, self.users_covered, self.macs_coverage
        )?;
        if let Some(r) = &self.ratio {
            writeln!(f)?;
            writeln!(f, "Ratio user/mac distribution")?;
            writeln!(f, "| Min. | 1st Qu. | Median | Mean | 3rd Qu. | Max. |")?;
            writeln!(
                f,
                "| {:.3} | {:.3} | {:.3} | {:.3} | {:.3} | {:.3} |",
                r.min, r.q1, r.median, r.mean, r.q3, r.max
            )?;
        }
        Ok(())
    }
}
