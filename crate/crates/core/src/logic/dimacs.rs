//! DIMACS CNF reader.

use super::{Expr, Formula, Literal, LogicError, VarId};

/// Parses DIMACS CNF text into a conjunction of disjunctions of literals.
///
/// The `p cnf <vars> <clauses>` header fixes the universe even when some
/// declared variables never occur in a clause. Comment lines start with `c`.
/// Every clause must end with a `0` token.
pub fn parse_dimacs(text: &str) -> Result<Formula, LogicError> {
    let mut declared_vars: Option<usize> = None;
    let mut declared_clauses: Option<usize> = None;
    let mut clauses: Vec<Expr> = Vec::new();
    let mut current: Vec<Expr> = Vec::new();
    let mut last_line = 0;

    for (lineno, line) in text.lines().enumerate() {
        let lineno = lineno + 1;
        last_line = lineno;
        let trimmed = line.trim();
        if trimmed.is_empty() || trimmed.starts_with('c') {
            continue;
        }
        if trimmed.starts_with('p') {
            if declared_vars.is_some() {
                return Err(err(lineno, "duplicate problem header"));
            }
            let fields: Vec<&str> = trimmed.split_whitespace().collect();
            if fields.len() != 4 || fields[0] != "p" || fields[1] != "cnf" {
                return Err(err(lineno, "malformed header, expected \"p cnf <vars> <clauses>\""));
            }
            let vars = fields[2]
                .parse::<usize>()
                .map_err(|_| err(lineno, "variable count is not a number"))?;
            let n_clauses = fields[3]
                .parse::<usize>()
                .map_err(|_| err(lineno, "clause count is not a number"))?;
            declared_vars = Some(vars);
            declared_clauses = Some(n_clauses);
            continue;
        }
        let vars = declared_vars.ok_or_else(|| err(lineno, "clause before header"))?;
        for tok in trimmed.split_whitespace() {
            let value = tok
                .parse::<i64>()
                .map_err(|_| err(lineno, &format!("bad literal token {tok:?}")))?;
            if value == 0 {
                clauses.push(Expr::or(std::mem::take(&mut current)));
            } else {
                let index = value.unsigned_abs();
                if index as usize > vars {
                    return Err(err(
                        lineno,
                        &format!("literal {value} exceeds declared variable count {vars}"),
                    ));
                }
                current.push(Expr::Lit(Literal::new(VarId::new(index as u32), value > 0)));
            }
        }
    }

    let vars = declared_vars.ok_or_else(|| err(last_line.max(1), "missing problem header"))?;
    if !current.is_empty() {
        return Err(err(last_line, "last clause is missing its 0 terminator"));
    }
    if let Some(expected) = declared_clauses {
        if clauses.len() != expected {
            return Err(err(
                last_line.max(1),
                &format!("header declares {expected} clauses but {} were read", clauses.len()),
            ));
        }
    }
    Formula::with_universe(Expr::and(clauses), vars)
}

fn err(line: usize, msg: &str) -> LogicError {
    LogicError::Parse { line, msg: msg.to_string() }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::logic::{enumerate_models, Expr};

    #[test]
    fn parses_two_clause_cnf() {
        let f = parse_dimacs("p cnf 2 2\n1 2 0\n-1 -2 0").unwrap();
        assert_eq!(f.universe(), 2);
        let expected = Expr::and(vec![
            Expr::or(vec![Expr::lit(1), Expr::lit(2)]),
            Expr::or(vec![Expr::neg_lit(1), Expr::neg_lit(2)]),
        ]);
        assert_eq!(*f.root(), expected);
    }

    #[test]
    fn empty_clause_list_is_true() {
        let f = parse_dimacs("p cnf 1 0").unwrap();
        assert_eq!(f.universe(), 1);
        assert_eq!(*f.root(), Expr::True);
        assert_eq!(enumerate_models(&f).unwrap().len(), 2);
    }

    #[test]
    fn parses_exactly_one_clauses() {
        let f = parse_dimacs("p cnf 3 4\n1 2 3 0\n-1 -2 0\n-1 -3 0\n-2 -3 0").unwrap();
        let models: Vec<String> =
            enumerate_models(&f).unwrap().iter().map(|m| m.to_string()).collect();
        assert_eq!(models, vec!["001", "010", "100"]);
    }

    #[test]
    fn comments_and_blank_lines_are_skipped() {
        let f = parse_dimacs("c one-hot pair\n\np cnf 2 1\nc body comment\n1 2 0\n").unwrap();
        assert_eq!(f.universe(), 2);
    }

    #[test]
    fn rejects_malformed_header() {
        let e = parse_dimacs("p dnf 2 1\n1 0").unwrap_err();
        assert!(e.to_string().contains("line 1"), "{e}");
    }

    #[test]
    fn rejects_literal_out_of_range() {
        let e = parse_dimacs("p cnf 2 1\n1 3 0").unwrap_err();
        assert!(e.to_string().contains("line 2"), "{e}");
        assert!(e.to_string().contains('3'), "{e}");
    }

    #[test]
    fn rejects_missing_terminator() {
        let e = parse_dimacs("p cnf 2 1\n1 2").unwrap_err();
        assert!(e.to_string().contains("terminator"), "{e}");
    }

    #[test]
    fn rejects_clause_count_mismatch() {
        let e = parse_dimacs("p cnf 2 2\n1 2 0").unwrap_err();
        assert!(e.to_string().contains("declares 2 clauses"), "{e}");
    }
}
