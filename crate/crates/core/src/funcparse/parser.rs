use super::{Expr, Func, ParseError};

// Guards the recursive descent against stack exhaustion on adversarial input.
const MAX_NESTING: usize = 200;

#[derive(Debug, Clone, PartialEq)]
enum Tok {
    Num(f64),
    Ident(String),
    Plus,
    Minus,
    Star,
    Slash,
    Caret,
    LParen,
    RParen,
    End,
}

struct Lexer<'a> {
    src: &'a str,
    pos: usize,
}

impl<'a> Lexer<'a> {
    fn next(&mut self) -> Result<(usize, Tok), ParseError> {
        let rest = &self.src[self.pos..];
        let trimmed = rest.trim_start();
        self.pos += rest.len() - trimmed.len();
        let start = self.pos;
        let Some(c) = trimmed.chars().next() else {
            return Ok((start, Tok::End));
        };
        let single = match c {
            '+' => Some(Tok::Plus),
            '-' | '\u{2212}' => Some(Tok::Minus),
            '*' => Some(Tok::Star),
            '/' => Some(Tok::Slash),
            '^' => Some(Tok::Caret),
            '(' => Some(Tok::LParen),
            ')' => Some(Tok::RParen),
            _ => None,
        };
        if let Some(tok) = single {
            self.pos += c.len_utf8();
            return Ok((start, tok));
        }
        if c.is_ascii_digit() || c == '.' {
            let bytes = trimmed.as_bytes();
            let mut i = 0;
            while i < bytes.len() && bytes[i].is_ascii_digit() {
                i += 1;
            }
            if i < bytes.len() && bytes[i] == b'.' {
                i += 1;
                while i < bytes.len() && bytes[i].is_ascii_digit() {
                    i += 1;
                }
            }
            if i < bytes.len() && (bytes[i] == b'e' || bytes[i] == b'E') {
                let mut j = i + 1;
                if j < bytes.len() && (bytes[j] == b'+' || bytes[j] == b'-') {
                    j += 1;
                }
                if j < bytes.len() && bytes[j].is_ascii_digit() {
                    while j < bytes.len() && bytes[j].is_ascii_digit() {
                        j += 1;
                    }
                    i = j;
                }
            }
            let text = &trimmed[..i];
            let value: f64 = text.parse().map_err(|_| ParseError::Syntax {
                offset: start,
                message: format!("malformed number `{text}`"),
            })?;
            if !value.is_finite() {
                return Err(ParseError::Syntax {
                    offset: start,
                    message: format!("number `{text}` out of range"),
                });
            }
            self.pos += i;
            return Ok((start, Tok::Num(value)));
        }
        if c.is_ascii_alphabetic() || c == '_' {
            let len = trimmed
                .char_indices()
                .find(|(_, ch)| !(ch.is_ascii_alphanumeric() || *ch == '_'))
                .map_or(trimmed.len(), |(k, _)| k);
            self.pos += len;
            return Ok((start, Tok::Ident(trimmed[..len].to_string())));
        }
        Err(ParseError::Syntax {
            offset: start,
            message: format!("unexpected character `{c}`"),
        })
    }
}

struct Parser<'a> {
    lexer: Lexer<'a>,
    tok: Tok,
    at: usize,
    depth: usize,
}

impl<'a> Parser<'a> {
    fn bump(&mut self) -> Result<(), ParseError> {
        let (at, tok) = self.lexer.next()?;
        self.at = at;
        self.tok = tok;
        Ok(())
    }

    fn error(&self, message: impl Into<String>) -> ParseError {
        ParseError::Syntax {
            offset: self.at,
            message: message.into(),
        }
    }

    fn enter(&mut self) -> Result<(), ParseError> {
        self.depth += 1;
        if self.depth > MAX_NESTING {
            return Err(self.error("expression nested too deeply"));
        }
        Ok(())
    }

    fn expr(&mut self) -> Result<Expr, ParseError> {
        let mut lhs = self.term()?;
        loop {
            match self.tok {
                Tok::Plus => {
                    self.bump()?;
                    lhs = Expr::Add(Box::new(lhs), Box::new(self.term()?));
                }
                Tok::Minus => {
                    self.bump()?;
                    lhs = Expr::Sub(Box::new(lhs), Box::new(self.term()?));
                }
                _ => return Ok(lhs),
            }
        }
    }

    fn term(&mut self) -> Result<Expr, ParseError> {
        let mut lhs = self.factor()?;
        loop {
            match self.tok {
                Tok::Star => {
                    self.bump()?;
                    lhs = Expr::Mul(Box::new(lhs), Box::new(self.factor()?));
                }
                Tok::Slash => {
                    self.bump()?;
                    lhs = Expr::Div(Box::new(lhs), Box::new(self.factor()?));
                }
                _ => return Ok(lhs),
            }
        }
    }

    // Unary minus sits below '^', so `-t^2` is `-(t^2)` while `2^-t` is still accepted.
    fn factor(&mut self) -> Result<Expr, ParseError> {
        self.enter()?;
        let out = if self.tok == Tok::Minus {
            self.bump()?;
            Expr::Neg(Box::new(self.factor()?))
        } else {
            let base = self.atom()?;
            if self.tok == Tok::Caret {
                self.bump()?;
                Expr::Pow(Box::new(base), Box::new(self.factor()?))
            } else {
                base
            }
        };
        self.depth -= 1;
        Ok(out)
    }

    fn atom(&mut self) -> Result<Expr, ParseError> {
        match self.tok.clone() {
            Tok::Num(v) => {
                self.bump()?;
                Ok(Expr::Num(v))
            }
            Tok::Ident(name) => {
                let at = self.at;
                self.bump()?;
                if name == "t" {
                    return Ok(Expr::Var);
                }
                let func = Func::from_name(&name)
                    .ok_or(ParseError::UnknownIdentifier { offset: at, name })?;
                if self.tok != Tok::LParen {
                    return Err(self.error("expected `(` after function name"));
                }
                self.bump()?;
                let arg = self.expr()?;
                self.expect_rparen()?;
                Ok(Expr::Apply(func, Box::new(arg)))
            }
            Tok::LParen => {
                self.bump()?;
                let inner = self.expr()?;
                self.expect_rparen()?;
                Ok(inner)
            }
            Tok::End => Err(self.error("unexpected end of input")),
            other => Err(self.error(format!("unexpected token {other:?}"))),
        }
    }

    fn expect_rparen(&mut self) -> Result<(), ParseError> {
        if self.tok != Tok::RParen {
            return Err(self.error("expected `)`"));
        }
        self.bump()
    }
}

/// Parses expression text into a tree.
pub fn parse(text: &str) -> Result<Expr, ParseError> {
    let mut p = Parser {
        lexer: Lexer { src: text, pos: 0 },
        tok: Tok::End,
        at: 0,
        depth: 0,
    };
    p.bump()?;
    let e = p.expr()?;
    if p.tok != Tok::End {
        return Err(p.error("unexpected trailing input"));
    }
    Ok(e)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn b(e: Expr) -> Box<Expr> {
        Box::new(e)
    }

    #[test]
    fn grammar_examples() {
        assert_eq!(parse("cosh(t)").unwrap(), Expr::Apply(Func::Cosh, b(Expr::Var)));
        assert_eq!(
            parse("1/t^2").unwrap(),
            Expr::Div(b(Expr::Num(1.0)), b(Expr::Pow(b(Expr::Var), b(Expr::Num(2.0)))))
        );
        assert_eq!(parse("t+").unwrap_err().offset(), 2);
    }

    #[test]
    fn power_is_right_associative_and_binds_tighter_than_negation() {
        assert_eq!(
            parse("2^3^t").unwrap(),
            Expr::Pow(b(Expr::Num(2.0)), b(Expr::Pow(b(Expr::Num(3.0)), b(Expr::Var))))
        );
        assert_eq!(
            parse("-t^2").unwrap(),
            Expr::Neg(b(Expr::Pow(b(Expr::Var), b(Expr::Num(2.0)))))
        );
        assert_eq!(
            parse("t - -1").unwrap(),
            Expr::Sub(b(Expr::Var), b(Expr::Neg(b(Expr::Num(1.0)))))
        );
    }

    #[test]
    fn reports_offsets() {
        assert_eq!(
            parse("sin(t) + foo(t)").unwrap_err(),
            ParseError::UnknownIdentifier { offset: 9, name: "foo".into() }
        );
        assert_eq!(parse("(t").unwrap_err().offset(), 2);
        assert_eq!(parse("t $").unwrap_err().offset(), 2);
        assert_eq!(parse("sin t").unwrap_err().offset(), 4);
        assert_eq!(parse("").unwrap_err().offset(), 0);
        assert!(parse("1e999").is_err());
    }

    #[test]
    fn deep_nesting_is_an_error_not_a_crash() {
        let deep = "(".repeat(2000) + "t" + &")".repeat(2000);
        assert!(parse(&deep).is_err());
        let negs = "-".repeat(4000) + "t";
        assert!(parse(&negs).is_err());
    }

    #[test]
    fn accepts_unicode_minus_and_exponents() {
        assert_eq!(parse("t\u{2212}1").unwrap(), parse("t-1").unwrap());
        assert_eq!(parse("2.5e-3").unwrap(), Expr::Num(2.5e-3));
        assert_eq!(parse(".5").unwrap(), Expr::Num(0.5));
    }
}
