//! Search spaces.
//!
//! A point is a `Vec<f64>` with one value per dimension. Categorical values
//! are stored as the value itself, not as an index.

use rand::Rng;

use crate::codec::CodecParams;
use crate::error::{invalid, Result};

#[derive(Debug, Clone, PartialEq)]
pub enum Domain {
    /// Continuous range `[low, high]`, searched in `ln` space when `log`.
    Float { low: f64, high: f64, log: bool },
    /// Finite set of values. With `at_least: Some(j)`, only values
    /// `>= point[j]` are admissible; `j` must be an earlier dimension.
    Choice { values: Vec<f64>, at_least: Option<usize> },
}

#[derive(Debug, Clone, PartialEq)]
pub struct Dimension {
    pub name: String,
    pub domain: Domain,
}

impl Dimension {
    pub fn float(name: &str, low: f64, high: f64, log: bool) -> Self {
        Self { name: name.into(), domain: Domain::Float { low, high, log } }
    }

    pub fn choice(name: &str, values: Vec<f64>, at_least: Option<usize>) -> Self {
        Self { name: name.into(), domain: Domain::Choice { values, at_least } }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Space {
    dims: Vec<Dimension>,
}

impl Space {
    pub fn new(dims: Vec<Dimension>) -> Result<Self> {
        if dims.is_empty() {
            return invalid("search space has no dimensions");
        }
        for (i, d) in dims.iter().enumerate() {
            match &d.domain {
                Domain::Float { low, high, log } => {
                    if !(low.is_finite() && high.is_finite() && low < high) {
                        return invalid(format!("{}: need finite low < high, got [{low}, {high}]", d.name));
                    }
                    if *log && *low <= 0.0 {
                        return invalid(format!("{}: log-scaled range must be positive", d.name));
                    }
                }
                Domain::Choice { values, at_least } => {
                    if values.is_empty() || values.iter().any(|v| !v.is_finite()) {
                        return invalid(format!("{}: choice needs finite values", d.name));
                    }
                    if let Some(j) = *at_least {
                        let Some(Domain::Choice { values: base, .. }) =
                            dims.get(j).filter(|_| j < i).map(|d| &d.domain)
                        else {
                            return invalid(format!("{}: lower bound must be an earlier choice dimension", d.name));
                        };
                        let top = values.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
                        if base.iter().any(|&b| b > top) {
                            return invalid(format!(
                                "{}: no admissible value for some value of {}",
                                d.name, dims[j].name
                            ));
                        }
                    }
                }
            }
        }
        Ok(Self { dims })
    }

    pub fn dims(&self) -> &[Dimension] {
        &self.dims
    }

    pub fn len(&self) -> usize {
        self.dims.len()
    }

    pub fn is_empty(&self) -> bool {
        self.dims.is_empty()
    }

    /// Indices into `values` of dimension `d` admissible given the earlier
    /// coordinates of `point`.
    pub(crate) fn admissible(&self, d: usize, point: &[f64]) -> Vec<usize> {
        match &self.dims[d].domain {
            Domain::Choice { values, at_least: Some(j) } => {
                (0..values.len()).filter(|&i| values[i] >= point[*j]).collect()
            }
            Domain::Choice { values, at_least: None } => (0..values.len()).collect(),
            Domain::Float { .. } => Vec::new(),
        }
    }

    /// Independent uniform draw (log-uniform on log dimensions) that
    /// respects every `at_least` constraint.
    pub fn sample_uniform<R: Rng + ?Sized>(&self, rng: &mut R) -> Vec<f64> {
        let mut point = Vec::with_capacity(self.dims.len());
        for (d, dim) in self.dims.iter().enumerate() {
            let v = match &dim.domain {
                Domain::Float { low, high, log: false } => rng.random_range(*low..=*high),
                Domain::Float { low, high, log: true } => {
                    rng.random_range(low.ln()..=high.ln()).exp().clamp(*low, *high)
                }
                Domain::Choice { values, .. } => {
                    let adm = self.admissible(d, &point);
                    values[adm[rng.random_range(0..adm.len())]]
                }
            };
            point.push(v);
        }
        point
    }

    /// True if `point` lies in the space and satisfies its constraints.
    pub fn contains(&self, point: &[f64]) -> bool {
        point.len() == self.dims.len()
            && self.dims.iter().enumerate().all(|(d, dim)| match &dim.domain {
                Domain::Float { low, high, .. } => (*low..=*high).contains(&point[d]),
                Domain::Choice { values, .. } => self.admissible(d, point).iter().any(|&i| values[i] == point[d]),
            })
    }
}

/// Ranges of the five codec hyperparameters.
#[derive(Debug, Clone, PartialEq)]
pub struct SearchSpace {
    pub max_error: (f64, f64),
    pub min_sparsity: (f64, f64),
    pub min_n: Vec<usize>,
    pub max_n: Vec<usize>,
    pub a_cols: Vec<usize>,
}

impl Default for SearchSpace {
    fn default() -> Self {
        Self {
            max_error: (1e-3, 500.0),
            min_sparsity: (0.05, 1.0),
            min_n: vec![4, 8, 16, 32, 64],
            max_n: vec![4, 8, 16, 32, 64, 128],
            a_cols: vec![2, 4, 8, 16, 32, 64, 128, 256],
        }
    }
}

/// Dimension order of [`SearchSpace::space`] points.
pub const CODEC_DIMENSIONS: [&str; 5] = ["max_error", "min_sparsity", "min_n", "max_n", "a_cols"];

impl SearchSpace {
    pub fn space(&self) -> Result<Space> {
        for (name, v) in [("min_n", &self.min_n), ("max_n", &self.max_n), ("a_cols", &self.a_cols)] {
            if v.iter().any(|&x| !x.is_power_of_two()) {
                return invalid(format!("{name} choices must be powers of two"));
            }
        }
        if self.min_n.iter().any(|&n| n < 2) {
            return invalid("min_n choices must be at least 2");
        }
        if !(self.max_error.0 > 0.0 && self.min_sparsity.0 > 0.0 && self.min_sparsity.1 <= 1.0) {
            return invalid("max_error and min_sparsity ranges must be positive, min_sparsity at most 1");
        }
        let as_f64 = |v: &[usize]| v.iter().map(|&x| x as f64).collect();
        Space::new(vec![
            Dimension::float("max_error", self.max_error.0, self.max_error.1, true),
            Dimension::float("min_sparsity", self.min_sparsity.0, self.min_sparsity.1, false),
            Dimension::choice("min_n", as_f64(&self.min_n), None),
            Dimension::choice("max_n", as_f64(&self.max_n), Some(2)),
            Dimension::choice("a_cols", as_f64(&self.a_cols), None),
        ])
    }

    pub fn params_from_point(point: &[f64]) -> Result<CodecParams> {
        if point.len() != 5 {
            return invalid(format!("codec point needs 5 coordinates, got {}", point.len()));
        }
        CodecParams::new(point[0], point[1], point[2] as usize, point[3] as usize, point[4] as usize)
    }

    pub fn point_from_params(p: &CodecParams) -> Vec<f64> {
        vec![p.max_error, p.min_sparsity, p.min_n as f64, p.max_n as f64, p.a_cols as f64]
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn default_space_draws_are_valid() {
        let space = SearchSpace::default().space().unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        for _ in 0..2000 {
            let p = space.sample_uniform(&mut rng);
            assert!(space.contains(&p), "{p:?}");
            assert!(p[3] >= p[2]);
            SearchSpace::params_from_point(&p).unwrap();
        }
    }

    #[test]
    fn uniform_mean_is_within_three_sigma() {
        let space = SearchSpace::default().space().unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(10);
        let n = 10_000;
        let mean = (0..n).map(|_| space.sample_uniform(&mut rng)[1]).sum::<f64>() / n as f64;
        // uniform on [0.05, 1]: sd = 0.95 / sqrt(12)
        let se = 0.95 / 12f64.sqrt() / (n as f64).sqrt();
        assert!((mean - 0.525).abs() < 3.0 * se, "{mean}");
    }

    #[test]
    fn log_dimension_is_uniform_in_log_space() {
        let space = Space::new(vec![Dimension::float("x", 1e-3, 1e3, true)]).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let below_one = (0..10_000).filter(|_| space.sample_uniform(&mut rng)[0] < 1.0).count();
        assert!((4700..5300).contains(&below_one), "{below_one}");
    }

    #[test]
    fn rejects_bad_spaces() {
        assert!(Space::new(vec![]).is_err());
        assert!(Space::new(vec![Dimension::float("x", 1.0, 1.0, false)]).is_err());
        assert!(Space::new(vec![Dimension::float("x", 0.0, 1.0, true)]).is_err());
        assert!(Space::new(vec![Dimension::choice("c", vec![], None)]).is_err());
        assert!(Space::new(vec![Dimension::choice("c", vec![1.0], Some(0))]).is_err());
        assert!(Space::new(vec![
            Dimension::choice("a", vec![1.0, 8.0], None),
            Dimension::choice("b", vec![2.0, 4.0], Some(0)),
        ])
        .is_err());
        let mut s = SearchSpace::default();
        s.min_n.push(12);
        assert!(s.space().is_err());
    }

    #[test]
    fn params_round_trip() {
        let p = CodecParams::new(0.5, 0.3, 4, 32, 64).unwrap();
        assert_eq!(SearchSpace::params_from_point(&SearchSpace::point_from_params(&p)).unwrap(), p);
    }
}
