use std::fmt;

use super::ParseError;

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord)]
pub struct Pos {
    pub line: usize,
    pub col: usize,
}

impl fmt::Display for Pos {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}:{}", self.line, self.col)
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum SExpr {
    Atom(String, Pos),
    List(Vec<SExpr>, Pos),
}

impl SExpr {
    pub fn pos(&self) -> Pos {
        match self {
            SExpr::Atom(_, p) | SExpr::List(_, p) => *p,
        }
    }

    pub fn atom(&self) -> Option<&str> {
        match self {
            SExpr::Atom(s, _) => Some(s),
            SExpr::List(..) => None,
        }
    }

    pub fn list(&self) -> Option<&[SExpr]> {
        match self {
            SExpr::List(items, _) => Some(items),
            SExpr::Atom(..) => None,
        }
    }

    /// Keyword at the head of a list, e.g. `:init` in `(:init ...)`.
    pub fn head(&self) -> Option<&str> {
        self.list().and_then(|l| l.first()).and_then(|h| h.atom())
    }
}

/// Reads every top-level expression. Symbols are lower-cased; `;` starts a
/// comment running to the end of the line.
pub fn parse_all(src: &str) -> Result<Vec<SExpr>, ParseError> {
    let mut stack: Vec<(Vec<SExpr>, Pos)> = Vec::new();
    let mut top = Vec::new();
    let mut chars = src.chars().peekable();
    let (mut line, mut col) = (1, 1);
    while let Some(&c) = chars.peek() {
        let here = Pos { line, col };
        match c {
            '\n' => {
                chars.next();
                line += 1;
                col = 1;
                continue;
            }
            ';' => {
                while chars.peek().is_some_and(|&c| c != '\n') {
                    chars.next();
                }
                continue;
            }
            c if c.is_whitespace() => {
                chars.next();
                col += 1;
                continue;
            }
            '(' => {
                chars.next();
                col += 1;
                stack.push((Vec::new(), here));
            }
            ')' => {
                chars.next();
                col += 1;
                let Some((items, start)) = stack.pop() else {
                    return Err(ParseError::syntax(here, "unexpected ')'"));
                };
                let e = SExpr::List(items, start);
                match stack.last_mut() {
                    Some((parent, _)) => parent.push(e),
                    None => top.push(e),
                }
            }
            _ => {
                let mut s = String::new();
                while let Some(&c) = chars.peek() {
                    if c.is_whitespace() || c == '(' || c == ')' || c == ';' {
                        break;
                    }
                    s.extend(c.to_lowercase());
                    chars.next();
                    col += 1;
                }
                let e = SExpr::Atom(s, here);
                match stack.last_mut() {
                    Some((parent, _)) => parent.push(e),
                    None => top.push(e),
                }
            }
        }
    }
    if let Some((_, start)) = stack.pop() {
        return Err(ParseError::syntax(start, "unclosed '('"));
    }
    Ok(top)
}

/// Exactly one top-level expression.
pub fn parse_one(src: &str) -> Result<SExpr, ParseError> {
    let mut all = parse_all(src)?;
    match all.len() {
        1 => Ok(all.pop().expect("one")),
        0 => Err(ParseError::syntax(Pos { line: 1, col: 1 }, "empty input")),
        _ => Err(ParseError::syntax(all[1].pos(), "trailing input after the first expression")),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn positions_and_comments() {
        let e = parse_one("; hi\n(a\n  (B c))").unwrap();
        assert_eq!(e.pos(), Pos { line: 2, col: 1 });
        let l = e.list().unwrap();
        assert_eq!(l[1].pos(), Pos { line: 3, col: 3 });
        assert_eq!(l[1].list().unwrap()[0].atom(), Some("b"));
    }

    #[test]
    fn unbalanced_input_reports_the_line() {
        let err = parse_one("(a\n (b c)\n").unwrap_err();
        assert!(err.to_string().contains("1:1"), "{err}");
        let err = parse_one("(a))").unwrap_err();
        assert!(err.to_string().contains("1:4"), "{err}");
    }
}
