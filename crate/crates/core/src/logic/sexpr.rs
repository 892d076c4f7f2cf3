//! S-expression constraint reader for non-CNF inputs.
//!
//! Grammar: `expr := x<k> | true | false | (not expr) | (and expr+) | (or expr+)`.

use super::{Expr, Formula, LogicError};

/// Parses an S-expression formula such as `(and (or x1 x2) (not x3))`.
pub fn parse_sexpr(text: &str) -> Result<Formula, LogicError> {
    let tokens = tokenize(text)?;
    let mut pos = 0;
    let expr = parse_expr(&tokens, &mut pos)?;
    if pos != tokens.len() {
        return Err(err(tokens[pos].line, "trailing input after formula"));
    }
    Ok(Formula::new(expr))
}

struct Token {
    text: String,
    line: usize,
}

fn tokenize(text: &str) -> Result<Vec<Token>, LogicError> {
    let mut tokens = Vec::new();
    for (lineno, line) in text.lines().enumerate() {
        let lineno = lineno + 1;
        let line = match line.find(';') {
            Some(i) => &line[..i],
            None => line,
        };
        let mut word = String::new();
        for ch in line.chars() {
            match ch {
                '(' | ')' => {
                    if !word.is_empty() {
                        tokens.push(Token { text: std::mem::take(&mut word), line: lineno });
                    }
                    tokens.push(Token { text: ch.to_string(), line: lineno });
                }
                c if c.is_whitespace() => {
                    if !word.is_empty() {
                        tokens.push(Token { text: std::mem::take(&mut word), line: lineno });
                    }
                }
                c => word.push(c),
            }
        }
        if !word.is_empty() {
            tokens.push(Token { text: word, line: lineno });
        }
    }
    if tokens.is_empty() {
        return Err(err(1, "empty formula"));
    }
    Ok(tokens)
}

fn parse_expr(tokens: &[Token], pos: &mut usize) -> Result<Expr, LogicError> {
    let tok = tokens.get(*pos).ok_or_else(|| err(last_line(tokens), "unexpected end of input"))?;
    *pos += 1;
    match tok.text.as_str() {
        "(" => {
            let head =
                tokens.get(*pos).ok_or_else(|| err(tok.line, "missing operator after \"(\""))?;
            *pos += 1;
            let op = head.text.clone();
            let mut children = Vec::new();
            loop {
                let next = tokens
                    .get(*pos)
                    .ok_or_else(|| err(last_line(tokens), "missing closing \")\""))?;
                if next.text == ")" {
                    *pos += 1;
                    break;
                }
                children.push(parse_expr(tokens, pos)?);
            }
            match op.as_str() {
                "and" => Ok(Expr::and(children)),
                "or" => Ok(Expr::or(children)),
                "not" => {
                    if children.len() != 1 {
                        return Err(err(head.line, "not takes exactly one argument"));
                    }
                    Ok(Expr::not(children.into_iter().next().unwrap()))
                }
                other => Err(err(head.line, &format!("unknown operator {other:?}"))),
            }
        }
        ")" => Err(err(tok.line, "unexpected \")\"")),
        "true" => Ok(Expr::True),
        "false" => Ok(Expr::False),
        atom => {
            let index = atom
                .strip_prefix('x')
                .and_then(|s| s.parse::<u32>().ok())
                .filter(|&i| i > 0)
                .ok_or_else(|| err(tok.line, &format!("expected variable like x3, got {atom:?}")))?;
            Ok(Expr::lit(index))
        }
    }
}

fn last_line(tokens: &[Token]) -> usize {
    tokens.last().map_or(1, |t| t.line)
}

fn err(line: usize, msg: &str) -> LogicError {
    LogicError::Parse { line, msg: msg.to_string() }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::logic::enumerate_models;

    #[test]
    fn parses_nested_formula() {
        let f = parse_sexpr("(and (or x1 x2) (not (and x1 x2)))").unwrap();
        assert_eq!(f.universe(), 2);
        let models: Vec<String> =
            enumerate_models(&f).unwrap().iter().map(|m| m.to_string()).collect();
        assert_eq!(models, vec!["01", "10"]);
    }

    #[test]
    fn parses_bare_literal_and_constants() {
        assert_eq!(parse_sexpr("x4").unwrap().universe(), 4);
        assert_eq!(parse_sexpr("true").unwrap().universe(), 0);
    }

    #[test]
    fn comments_run_to_end_of_line() {
        let f = parse_sexpr("(and x1 ; keep both\n x2)").unwrap();
        assert_eq!(f.universe(), 2);
    }

    #[test]
    fn rejects_unknown_operator() {
        assert!(parse_sexpr("(xor x1 x2)").unwrap_err().to_string().contains("xor"));
    }

    #[test]
    fn rejects_unbalanced_parens() {
        assert!(parse_sexpr("(and x1 x2").is_err());
        assert!(parse_sexpr(")").is_err());
    }

    #[test]
    fn rejects_bad_variable_token() {
        assert!(parse_sexpr("(and x0 x1)").is_err());
        assert!(parse_sexpr("y3").is_err());
    }
}
