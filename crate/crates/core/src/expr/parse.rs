use super::{BinOp, Expr, ExprError, Func, Var};

#[derive(Debug, Clone, PartialEq)]
enum Tok {
    Num(f64),
    Ident(String),
    Op(char),
    LParen,
    RParen,
    Comma,
    End,
}

impl Tok {
    fn describe(&self) -> String {
        match self {
            Tok::Num(x) => format!("number {x}"),
            Tok::Ident(s) => format!("identifier `{s}`"),
            Tok::Op(c) => format!("'{c}'"),
            Tok::LParen => "'('".into(),
            Tok::RParen => "')'".into(),
            Tok::Comma => "','".into(),
            Tok::End => "end of input".into(),
        }
    }
}

struct Lexer<'a> {
    src: &'a str,
    pos: usize,
}

impl<'a> Lexer<'a> {
    fn skip_ws(&mut self) {
        while let Some(c) = self.src[self.pos..].chars().next() {
            if c.is_whitespace() {
                self.pos += c.len_utf8();
            } else {
                break;
            }
        }
    }

    /// Returns the next token and its starting byte offset.
    fn next(&mut self) -> Result<(Tok, usize), ExprError> {
        self.skip_ws();
        let start = self.pos;
        let rest = &self.src[start..];
        let Some(c) = rest.chars().next() else {
            return Ok((Tok::End, start));
        };
        let tok = match c {
            '0'..='9' | '.' => return self.number(start),
            'a'..='z' | 'A'..='Z' | '_' => {
                let len = rest
                    .find(|ch: char| !(ch.is_ascii_alphanumeric() || ch == '_'))
                    .unwrap_or(rest.len());
                self.pos += len;
                return Ok((Tok::Ident(rest[..len].to_string()), start));
            }
            '+' | '-' | '*' | '/' | '^' => Tok::Op(c),
            '(' => Tok::LParen,
            ')' => Tok::RParen,
            ',' => Tok::Comma,
            other => {
                return Err(ExprError::Syntax {
                    offset: start,
                    expected: "a number, identifier, operator or parenthesis".into(),
                    found: format!("'{other}'"),
                })
            }
        };
        self.pos += c.len_utf8();
        Ok((tok, start))
    }

    fn number(&mut self, start: usize) -> Result<(Tok, usize), ExprError> {
        let bytes = self.src.as_bytes();
        let mut i = start;
        let digits = |i: &mut usize| {
            let from = *i;
            while *i < bytes.len() && bytes[*i].is_ascii_digit() {
                *i += 1;
            }
            *i - from
        };
        let mut count = digits(&mut i);
        if i < bytes.len() && bytes[i] == b'.' {
            i += 1;
            count += digits(&mut i);
        }
        if count == 0 {
            return Err(ExprError::Syntax {
                offset: start,
                expected: "a digit".into(),
                found: "'.'".into(),
            });
        }
        if i < bytes.len() && (bytes[i] == b'e' || bytes[i] == b'E') {
            let mut j = i + 1;
            if j < bytes.len() && (bytes[j] == b'+' || bytes[j] == b'-') {
                j += 1;
            }
            if digits(&mut j) > 0 {
                i = j;
            }
        }
        let text = &self.src[start..i];
        let value: f64 = text.parse().map_err(|_| ExprError::Syntax {
            offset: start,
            expected: "a number".into(),
            found: format!("`{text}`"),
        })?;
        if !value.is_finite() {
            return Err(ExprError::Syntax {
                offset: start,
                expected: "a finite number".into(),
                found: format!("`{text}`"),
            });
        }
        self.pos = i;
        Ok((Tok::Num(value), start))
    }
}

struct Parser<'a> {
    lexer: Lexer<'a>,
    tok: Tok,
    at: usize,
}

/// Parses an expression over `s`, `v`, `w`.
pub fn parse(text: &str) -> Result<Expr, ExprError> {
    let mut lexer = Lexer { src: text, pos: 0 };
    let (tok, at) = lexer.next()?;
    let mut p = Parser { lexer, tok, at };
    let e = p.expr()?;
    if p.tok != Tok::End {
        return Err(p.unexpected("an operator or end of input"));
    }
    Ok(e)
}

impl Parser<'_> {
    fn bump(&mut self) -> Result<(), ExprError> {
        let (tok, at) = self.lexer.next()?;
        self.tok = tok;
        self.at = at;
        Ok(())
    }

    fn unexpected(&self, expected: &str) -> ExprError {
        ExprError::Syntax {
            offset: self.at,
            expected: expected.into(),
            found: self.tok.describe(),
        }
    }

    fn expect(&mut self, tok: Tok) -> Result<(), ExprError> {
        if self.tok == tok {
            self.bump()
        } else {
            Err(self.unexpected(&tok.describe()))
        }
    }

    fn expr(&mut self) -> Result<Expr, ExprError> {
        let mut lhs = self.term()?;
        loop {
            let op = match self.tok {
                Tok::Op('+') => BinOp::Add,
                Tok::Op('-') => BinOp::Sub,
                _ => return Ok(lhs),
            };
            self.bump()?;
            lhs = Expr::bin(op, lhs, self.term()?);
        }
    }

    fn term(&mut self) -> Result<Expr, ExprError> {
        let mut lhs = self.unary()?;
        loop {
            let op = match self.tok {
                Tok::Op('*') => BinOp::Mul,
                Tok::Op('/') => BinOp::Div,
                _ => return Ok(lhs),
            };
            self.bump()?;
            lhs = Expr::bin(op, lhs, self.unary()?);
        }
    }

    fn unary(&mut self) -> Result<Expr, ExprError> {
        if self.tok == Tok::Op('-') {
            self.bump()?;
            return Ok(Expr::neg(self.unary()?));
        }
        self.power()
    }

    fn power(&mut self) -> Result<Expr, ExprError> {
        let base = self.primary()?;
        if self.tok == Tok::Op('^') {
            self.bump()?;
            return Ok(Expr::bin(BinOp::Pow, base, self.unary()?));
        }
        Ok(base)
    }

    fn primary(&mut self) -> Result<Expr, ExprError> {
        match std::mem::replace(&mut self.tok, Tok::End) {
            Tok::Num(x) => {
                self.bump()?;
                Ok(Expr::Num(x))
            }
            Tok::LParen => {
                self.bump()?;
                let e = self.expr()?;
                self.expect(Tok::RParen)?;
                Ok(e)
            }
            Tok::Ident(name) => {
                let at = self.at;
                self.bump()?;
                if self.tok == Tok::LParen {
                    let func = Func::from_name(&name)
                        .ok_or(ExprError::UnknownIdent { name: name.clone(), offset: at })?;
                    self.bump()?;
                    let mut args = vec![self.expr()?];
                    while self.tok == Tok::Comma {
                        self.bump()?;
                        args.push(self.expr()?);
                    }
                    self.expect(Tok::RParen)?;
                    if args.len() != func.arity() {
                        return Err(ExprError::Arity {
                            name,
                            expected: func.arity(),
                            got: args.len(),
                            offset: at,
                        });
                    }
                    return Ok(Expr::Call(func, args));
                }
                match name.as_str() {
                    "s" => Ok(Expr::Var(Var::S)),
                    "v" => Ok(Expr::Var(Var::V)),
                    "w" => Ok(Expr::Var(Var::W)),
                    "pi" => Ok(Expr::Num(std::f64::consts::PI)),
                    "e" => Ok(Expr::Num(std::f64::consts::E)),
                    _ => Err(ExprError::UnknownIdent { name, offset: at }),
                }
            }
            other => {
                self.tok = other;
                Err(self.unexpected("a number, variable, function call or '('"))
            }
        }
    }
}
