//! Line-oriented text format for problems and projection inputs.
//!
//! ```text
//! # comment
//! dimension 2
//! bounds -10 10              # same box for every variable
//! lower -1 -2                # or per variable
//! upper  1  2
//! constraint 1 1 <= 1 tol 0.02
//! constraint 1 -1 = 0
//! cost quadratic 2.0 center 0.5 0.5
//! start 0 0
//! phi 0 0                    # projection inputs
//! delta -2 0
//! ```
//!
//! `cost` is one of `quadratic C [center ...]`, `appendix SEED M` (adds the
//! random rows and the default box) or `external-table PATH`, a CSV of
//! `weight,center,power` rows, one per variable.

use std::path::{Path, PathBuf};
use std::sync::Arc;

use crate::constraints::{ConstraintModel, UnivariateBounds};
use crate::error::{PgdError, Result};

use super::appendix::AppendixProblem;
use super::{check_linear_equalities, Problem, QuadraticCost, SeparablePowerCost};

/// Breakage tolerance of a `constraint` line without `tol`.
pub const DEFAULT_TOLERANCE: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Relation {
    Le,
    Ge,
    Eq,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ConstraintRow {
    pub coefficients: Vec<f64>,
    pub relation: Relation,
    pub bound: f64,
    pub tolerance: f64,
    pub line: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub enum CostSpec {
    Quadratic { curvature: f64, center: Option<Vec<f64>> },
    Appendix { seed: u64, m: usize },
    ExternalTable { path: PathBuf, line: usize },
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct ProblemSpec {
    pub dimension: usize,
    pub lower: Option<Vec<f64>>,
    pub upper: Option<Vec<f64>>,
    pub constraints: Vec<ConstraintRow>,
    pub cost: Option<CostSpec>,
    pub start: Option<Vec<f64>>,
    pub phi: Option<Vec<f64>>,
    pub delta: Option<Vec<f64>>,
}

fn err(line: usize, message: impl Into<String>) -> PgdError {
    PgdError::Parse {
        line,
        message: message.into(),
    }
}

fn number(tok: &str, line: usize) -> Result<f64> {
    let v: f64 = tok
        .parse()
        .map_err(|_| err(line, format!("expected a number, found `{tok}`")))?;
    if v.is_nan() {
        return Err(err(line, "NaN is not allowed"));
    }
    Ok(v)
}

fn finite(tok: &str, line: usize) -> Result<f64> {
    let v = number(tok, line)?;
    if !v.is_finite() {
        return Err(err(line, format!("expected a finite number, found `{tok}`")));
    }
    Ok(v)
}

fn vector(toks: &[&str], k: usize, line: usize, finite_only: bool) -> Result<Vec<f64>> {
    if k == 0 {
        return Err(err(line, "`dimension` must come first"));
    }
    if toks.len() != k {
        return Err(err(line, format!("expected {k} values, found {}", toks.len())));
    }
    toks.iter()
        .map(|t| if finite_only { finite(t, line) } else { number(t, line) })
        .collect()
}

/// Parses `text`; relative table paths resolve against `base_dir`.
pub fn parse_problem(text: &str, base_dir: Option<&Path>) -> Result<ProblemSpec> {
    let mut spec = ProblemSpec::default();
    for (idx, raw) in text.lines().enumerate() {
        let line = idx + 1;
        let content = raw.split('#').next().unwrap_or("").trim();
        if content.is_empty() {
            continue;
        }
        let toks: Vec<&str> = content.split_whitespace().collect();
        let (key, rest) = (toks[0], &toks[1..]);
        let k = spec.dimension;
        match key {
            "dimension" => {
                if spec.dimension != 0 {
                    return Err(err(line, "`dimension` given twice"));
                }
                let [n] = rest else {
                    return Err(err(line, "`dimension` takes one value"));
                };
                spec.dimension = n
                    .parse()
                    .ok()
                    .filter(|&n: &usize| n > 0)
                    .ok_or_else(|| err(line, format!("invalid dimension `{n}`")))?;
            }
            "bounds" => {
                let [lo, hi] = rest else {
                    return Err(err(line, "`bounds` takes a lower and an upper value"));
                };
                if k == 0 {
                    return Err(err(line, "`dimension` must come first"));
                }
                spec.lower = Some(vec![number(lo, line)?; k]);
                spec.upper = Some(vec![number(hi, line)?; k]);
            }
            "lower" => spec.lower = Some(vector(rest, k, line, false)?),
            "upper" => spec.upper = Some(vector(rest, k, line, false)?),
            "start" => spec.start = Some(vector(rest, k, line, true)?),
            "phi" => spec.phi = Some(vector(rest, k, line, true)?),
            "delta" => spec.delta = Some(vector(rest, k, line, true)?),
            "constraint" => spec.constraints.push(parse_constraint(rest, k, line)?),
            "cost" => {
                if spec.cost.is_some() {
                    return Err(err(line, "`cost` given twice"));
                }
                spec.cost = Some(parse_cost(rest, k, line, base_dir)?);
            }
            other => return Err(err(line, format!("unknown keyword `{other}`"))),
        }
    }
    if spec.dimension == 0 {
        return Err(err(text.lines().count().max(1), "missing `dimension`"));
    }
    Ok(spec)
}

fn parse_constraint(rest: &[&str], k: usize, line: usize) -> Result<ConstraintRow> {
    if k == 0 {
        return Err(err(line, "`dimension` must come first"));
    }
    if rest.len() != k + 2 && rest.len() != k + 4 {
        return Err(err(
            line,
            format!("constraint needs {k} coefficients, a relation and a bound, optionally `tol EPS`"),
        ));
    }
    let coefficients = vector(&rest[..k], k, line, true)?;
    let relation = match rest[k] {
        "<=" => Relation::Le,
        ">=" => Relation::Ge,
        "=" | "==" => Relation::Eq,
        r => return Err(err(line, format!("unknown relation `{r}`"))),
    };
    let bound = finite(rest[k + 1], line)?;
    let tolerance = if rest.len() == k + 4 {
        if rest[k + 2] != "tol" {
            return Err(err(line, format!("expected `tol`, found `{}`", rest[k + 2])));
        }
        let t = finite(rest[k + 3], line)?;
        if t < 0.0 {
            return Err(err(line, "tolerance must be nonnegative"));
        }
        t
    } else {
        DEFAULT_TOLERANCE
    };
    Ok(ConstraintRow {
        coefficients,
        relation,
        bound,
        tolerance,
        line,
    })
}

fn parse_cost(rest: &[&str], k: usize, line: usize, base_dir: Option<&Path>) -> Result<CostSpec> {
    match rest {
        ["quadratic", c] => Ok(CostSpec::Quadratic {
            curvature: positive(c, line)?,
            center: None,
        }),
        ["quadratic", c, "center", center @ ..] => Ok(CostSpec::Quadratic {
            curvature: positive(c, line)?,
            center: Some(vector(center, k, line, true)?),
        }),
        ["appendix", seed, m] => Ok(CostSpec::Appendix {
            seed: seed
                .parse()
                .map_err(|_| err(line, format!("invalid seed `{seed}`")))?,
            m: m
                .parse()
                .map_err(|_| err(line, format!("invalid constraint count `{m}`")))?,
        }),
        ["external-table", path] => {
            let p = Path::new(path);
            let path = match base_dir {
                Some(dir) if p.is_relative() => dir.join(p),
                _ => p.to_path_buf(),
            };
            Ok(CostSpec::ExternalTable { path, line })
        }
        _ => Err(err(
            line,
            "cost must be `quadratic C [center ...]`, `appendix SEED M` or `external-table PATH`",
        )),
    }
}

fn positive(tok: &str, line: usize) -> Result<f64> {
    let v = finite(tok, line)?;
    if v <= 0.0 {
        return Err(err(line, "curvature must be positive"));
    }
    Ok(v)
}

fn read_table(path: &Path, k: usize, line: usize) -> Result<SeparablePowerCost> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(false)
        .comment(Some(b'#'))
        .trim(csv::Trim::All)
        .from_path(path)
        .map_err(|e| err(line, format!("cannot read {}: {e}", path.display())))?;
    let mut cost = SeparablePowerCost {
        weights: Vec::new(),
        centers: Vec::new(),
        powers: Vec::new(),
    };
    for (i, record) in reader.records().enumerate() {
        let record = record.map_err(|e| err(line, format!("{}: {e}", path.display())))?;
        let row: Vec<&str> = record.iter().collect();
        let parsed: Option<Vec<f64>> = row.iter().map(|t| t.parse().ok()).collect();
        match parsed {
            Some(v) if v.len() == 3 && v.iter().all(|x| x.is_finite()) => {
                if v[2] < 1.0 {
                    return Err(err(line, format!("{} row {}: power must be at least 1", path.display(), i + 1)));
                }
                cost.weights.push(v[0]);
                cost.centers.push(v[1]);
                cost.powers.push(v[2]);
            }
            // header line
            None if i == 0 => {}
            _ => {
                return Err(err(
                    line,
                    format!("{} row {}: expected `weight,center,power`", path.display(), i + 1),
                ))
            }
        }
    }
    if cost.weights.len() != k {
        return Err(err(
            line,
            format!("{} has {} rows, expected {k}", path.display(), cost.weights.len()),
        ));
    }
    Ok(cost)
}

impl ProblemSpec {
    /// Bounds, defaulting to `[−10, 10]` for appendix problems and to no box otherwise.
    pub fn bounds(&self) -> Result<UnivariateBounds> {
        let k = self.dimension;
        let (dl, du) = match self.cost {
            Some(CostSpec::Appendix { .. }) => (-10.0, 10.0),
            _ => (f64::NEG_INFINITY, f64::INFINITY),
        };
        UnivariateBounds::new(
            self.lower.clone().unwrap_or_else(|| vec![dl; k]),
            self.upper.clone().unwrap_or_else(|| vec![du; k]),
        )
    }

    /// Linear constraint model, with `≥` rows negated into `≤`.
    ///
    /// Contradictory equality rows are rejected as infeasible.
    pub fn constraint_model(&self) -> Result<ConstraintModel> {
        let eq_rows: Vec<Vec<f64>> = self
            .constraints
            .iter()
            .filter(|c| c.relation == Relation::Eq)
            .map(|c| c.coefficients.clone())
            .collect();
        let eq_rhs: Vec<f64> = self
            .constraints
            .iter()
            .filter(|c| c.relation == Relation::Eq)
            .map(|c| c.bound)
            .collect();
        check_linear_equalities(&eq_rows, &eq_rhs)?;

        let mut model = ConstraintModel::new(self.bounds()?);
        for c in &self.constraints {
            model = match c.relation {
                Relation::Le => model.with_linear_inequality(c.coefficients.clone(), c.bound, c.tolerance)?,
                Relation::Ge => model.with_linear_inequality(
                    c.coefficients.iter().map(|v| -v).collect(),
                    -c.bound,
                    c.tolerance,
                )?,
                Relation::Eq => model.with_linear_equality(c.coefficients.clone(), c.bound, c.tolerance)?,
            };
        }
        Ok(model)
    }

    /// Builds the optimization problem; requires a `cost` line.
    pub fn build_problem(&self) -> Result<Problem> {
        let k = self.dimension;
        let mut model = self.constraint_model()?;
        let cost = self
            .cost
            .as_ref()
            .ok_or_else(|| err(0, "missing `cost`"))?;
        let cost: Arc<dyn crate::constraints::ScalarFunction> = match cost {
            CostSpec::Quadratic { curvature, center } => Arc::new(QuadraticCost {
                curvature: *curvature,
                center: center.clone().unwrap_or_else(|| vec![0.0; k]),
            }),
            CostSpec::Appendix { seed, m } => {
                let ap = AppendixProblem::for_trial(k, *m, *seed, 0);
                for (row, &rhs) in ap.a_mat.iter().zip(&ap.a) {
                    model = model.with_linear_inequality(row.clone(), rhs, super::appendix::APPENDIX_TOLERANCE)?;
                }
                Arc::new(super::AppendixCost { b: ap.b })
            }
            CostSpec::ExternalTable { path, line } => Arc::new(read_table(path, k, *line)?),
        };
        Ok(Problem::new(cost, model))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const HALFSPACE: &str = "\
# halfspace
dimension 2
constraint 1 1 <= 1
phi 0 0
delta -2 0
";

    #[test]
    fn parses_projection_input() {
        let spec = parse_problem(HALFSPACE, None).unwrap();
        assert_eq!(spec.dimension, 2);
        assert_eq!(spec.phi, Some(vec![0.0, 0.0]));
        assert_eq!(spec.delta, Some(vec![-2.0, 0.0]));
        let model = spec.constraint_model().unwrap();
        assert_eq!(model.n_globals(), 1);
        assert!(model.bounds().lower()[0].is_infinite());
    }

    #[test]
    fn ge_rows_are_negated() {
        let spec = parse_problem("dimension 2\nconstraint 1 2 >= 3 tol 0.1\n", None).unwrap();
        let model = spec.constraint_model().unwrap();
        let e = model.evaluate(&[1.0, 1.0]).unwrap();
        assert_eq!(e[0].value, -3.0);
        assert_eq!(model.globals()[0].bound, -3.0);
        assert_eq!(model.globals()[0].tolerance, 0.1);
    }

    #[test]
    fn errors_name_the_line() {
        let cases = [
            ("dimension 2\nconstraint 1 <= 1\n", 2),
            ("dimension 2\n\nbounds 0\n", 3),
            ("dimension 2\nfoo 1\n", 2),
            ("constraint 1 1 <= 1\n", 1),
            ("dimension 2\nconstraint 1 x <= 1\n", 2),
            ("dimension 2\nconstraint 1 1 < 1\n", 2),
            ("dimension 2\ncost quadratic -1\n", 2),
        ];
        for (text, expected) in cases {
            match parse_problem(text, None) {
                Err(PgdError::Parse { line, .. }) => assert_eq!(line, expected, "{text}"),
                other => panic!("{text}: {other:?}"),
            }
        }
    }

    #[test]
    fn contradictory_equalities_are_infeasible() {
        let spec = parse_problem(
            "dimension 2\nconstraint 1 1 = 1\nconstraint 1 1 = 2\ncost quadratic 1\n",
            None,
        )
        .unwrap();
        assert!(matches!(spec.build_problem(), Err(PgdError::InfeasibleProblem(_))));
    }

    #[test]
    fn appendix_cost_adds_rows() {
        let spec = parse_problem("dimension 5\ncost appendix 3 4\n", None).unwrap();
        let p = spec.build_problem().unwrap();
        assert_eq!(p.constraints().n_globals(), 4);
        assert_eq!(p.bounds().lower(), &[-10.0; 5]);
    }

    #[test]
    fn external_table() {
        let dir = std::env::temp_dir().join(format!("pgd-table-{}", std::process::id()));
        std::fs::create_dir_all(&dir).unwrap();
        std::fs::write(dir.join("t.csv"), "weight,center,power\n1,0.5,2\n2,-1,4\n").unwrap();
        let spec = parse_problem("dimension 2\ncost external-table t.csv\n", Some(&dir)).unwrap();
        let p = spec.build_problem().unwrap();
        let e = p.cost(&[0.5, 0.0]).unwrap();
        assert_eq!(e.value, 2.0);
        assert_eq!(e.gradient, vec![0.0, 8.0]);
        std::fs::remove_dir_all(dir).ok();
    }
}
