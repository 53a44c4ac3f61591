//! Recursive-descent parser for the expression grammar.

use std::sync::Arc;

use super::{Axis, BinOp, Expr, Func};
use crate::error::{Error, Result};

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
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Lexer<'a> {
    fn new(src: &'a str) -> Self {
        Lexer { src, bytes: src.as_bytes(), pos: 0 }
    }

    fn skip_ws(&mut self) {
        while self.pos < self.bytes.len() && self.bytes[self.pos].is_ascii_whitespace() {
            self.pos += 1;
        }
    }

    /// Next token plus its starting byte offset.
    fn next(&mut self) -> Result<(Tok, usize)> {
        self.skip_ws();
        let start = self.pos;
        if self.pos >= self.bytes.len() {
            return Ok((Tok::End, start));
        }
        let b = self.bytes[self.pos];
        let tok = match b {
            b'+' => Tok::Plus,
            b'-' => Tok::Minus,
            b'*' => Tok::Star,
            b'/' => Tok::Slash,
            b'^' => Tok::Caret,
            b'(' => Tok::LParen,
            b')' => Tok::RParen,
            b'0'..=b'9' | b'.' => return self.lex_number(start),
            _ if b.is_ascii_alphabetic() || b == b'_' => return self.lex_ident(start),
            _ => {
                return Err(Error::Syntax {
                    pos: start,
                    msg: format!("unexpected character `{}`", &self.src[start..start + 1]),
                })
            }
        };
        self.pos += 1;
        Ok((tok, start))
    }

    fn lex_number(&mut self, start: usize) -> Result<(Tok, usize)> {
        let mut end = self.pos;
        while end < self.bytes.len() && (self.bytes[end].is_ascii_digit() || self.bytes[end] == b'.') {
            end += 1;
        }
        // optional exponent part
        if end < self.bytes.len() && (self.bytes[end] == b'e' || self.bytes[end] == b'E') {
            let mut probe = end + 1;
            if probe < self.bytes.len() && (self.bytes[probe] == b'+' || self.bytes[probe] == b'-') {
                probe += 1;
            }
            if probe < self.bytes.len() && self.bytes[probe].is_ascii_digit() {
                end = probe;
                while end < self.bytes.len() && self.bytes[end].is_ascii_digit() {
                    end += 1;
                }
            }
        }
        let text = &self.src[start..end];
        let value: f64 = text
            .parse()
            .map_err(|_| Error::Syntax { pos: start, msg: format!("invalid number `{text}`") })?;
        self.pos = end;
        Ok((Tok::Num(value), start))
    }

    fn lex_ident(&mut self, start: usize) -> Result<(Tok, usize)> {
        let mut end = self.pos;
        while end < self.bytes.len()
            && (self.bytes[end].is_ascii_alphanumeric() || self.bytes[end] == b'_')
        {
            end += 1;
        }
        self.pos = end;
        Ok((Tok::Ident(self.src[start..end].to_string()), start))
    }
}

struct Parser<'a> {
    lexer: Lexer<'a>,
    tok: Tok,
    tok_pos: usize,
}

impl<'a> Parser<'a> {
    fn new(src: &'a str) -> Result<Self> {
        let mut lexer = Lexer::new(src);
        let (tok, tok_pos) = lexer.next()?;
        Ok(Parser { lexer, tok, tok_pos })
    }

    fn advance(&mut self) -> Result<()> {
        let (tok, pos) = self.lexer.next()?;
        self.tok = tok;
        self.tok_pos = pos;
        Ok(())
    }

    fn expect(&mut self, tok: Tok, what: &str) -> Result<()> {
        if self.tok == tok {
            self.advance()
        } else {
            Err(Error::Syntax { pos: self.tok_pos, msg: format!("expected {what}") })
        }
    }

    // expr := term (('+'|'-') term)*
    fn expr(&mut self) -> Result<Expr> {
        let mut lhs = self.term()?;
        loop {
            let op = match self.tok {
                Tok::Plus => BinOp::Add,
                Tok::Minus => BinOp::Sub,
                _ => break,
            };
            self.advance()?;
            let rhs = self.term()?;
            lhs = Expr::Bin(op, Arc::new(lhs), Arc::new(rhs));
        }
        Ok(lhs)
    }

    // term := unary (('*'|'/') unary)*
    fn term(&mut self) -> Result<Expr> {
        let mut lhs = self.unary()?;
        loop {
            let op = match self.tok {
                Tok::Star => BinOp::Mul,
                Tok::Slash => BinOp::Div,
                _ => break,
            };
            self.advance()?;
            let rhs = self.unary()?;
            lhs = Expr::Bin(op, Arc::new(lhs), Arc::new(rhs));
        }
        Ok(lhs)
    }

    // unary := '-' unary | power
    fn unary(&mut self) -> Result<Expr> {
        if self.tok == Tok::Minus {
            self.advance()?;
            let inner = self.unary()?;
            Ok(Expr::Neg(Arc::new(inner)))
        } else {
            self.power()
        }
    }

    // power := atom ('^' exponent)*   -- exponents are integer literals
    fn power(&mut self) -> Result<Expr> {
        let mut base = self.atom()?;
        while self.tok == Tok::Caret {
            self.advance()?;
            let n = self.exponent()?;
            base = Expr::Pow(Arc::new(base), n);
        }
        Ok(base)
    }

    // exponent := ['-'] INT | '(' ['-'] INT ')'
    fn exponent(&mut self) -> Result<i32> {
        let parenthesized = self.tok == Tok::LParen;
        if parenthesized {
            self.advance()?;
        }
        let negative = self.tok == Tok::Minus;
        if negative {
            self.advance()?;
        }
        let pos = self.tok_pos;
        let value = match self.tok {
            Tok::Num(v) => v,
            _ => {
                return Err(Error::Syntax { pos, msg: "exponent must be an integer literal".into() })
            }
        };
        if value.fract() != 0.0 || value.abs() > i32::MAX as f64 {
            return Err(Error::Syntax { pos, msg: "exponent must be an integer literal".into() });
        }
        self.advance()?;
        if parenthesized {
            self.expect(Tok::RParen, "`)` closing exponent")?;
        }
        let n = value as i32;
        Ok(if negative { -n } else { n })
    }

    // atom := NUM | IDENT | IDENT '(' expr ')' | '(' expr ')'
    fn atom(&mut self) -> Result<Expr> {
        match self.tok.clone() {
            Tok::Num(v) => {
                self.advance()?;
                Ok(Expr::Const(v))
            }
            Tok::Ident(name) => {
                let pos = self.tok_pos;
                self.advance()?;
                if self.tok == Tok::LParen {
                    let func = Func::by_name(&name)
                        .ok_or(Error::UnknownFunction { name: name.clone(), pos })?;
                    self.advance()?;
                    let arg = self.expr()?;
                    self.expect(Tok::RParen, "`)` closing function call")?;
                    Ok(Expr::Call(func, Arc::new(arg)))
                } else {
                    match name.as_str() {
                        "x" => Ok(Expr::Var(Axis::X)),
                        "y" => Ok(Expr::Var(Axis::Y)),
                        "z" => Ok(Expr::Var(Axis::Z)),
                        _ => Ok(Expr::Param { name, pos }),
                    }
                }
            }
            Tok::LParen => {
                self.advance()?;
                let inner = self.expr()?;
                self.expect(Tok::RParen, "`)`")?;
                Ok(inner)
            }
            _ => Err(Error::Syntax {
                pos: self.tok_pos,
                msg: "expected a number, identifier or `(`".into(),
            }),
        }
    }
}

/// Parse `text` into an expression tree.
///
/// Identifiers other than `x`, `y`, `z` become parameters resolved against a
/// [`ParamTable`](super::ParamTable) at compile time. Unknown function names
/// and malformed syntax are rejected with their byte position.
pub fn parse(text: &str) -> Result<Expr> {
    let mut p = Parser::new(text)?;
    let e = p.expr()?;
    if p.tok != Tok::End {
        return Err(Error::Syntax { pos: p.tok_pos, msg: "trailing input".into() });
    }
    Ok(e)
}
