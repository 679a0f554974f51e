//! Recursive-descent parser for the profile language.
//!
//! ```text
//! expr   := term (("+"|"-") term)* ;
//! term   := factor (("*"|"/") factor)* ;
//! factor := ("-") factor | base ("^" factor)? ;
//! base   := number | "t" | ident "(" expr ")" | "(" expr ")" ;
//! ```

use thiserror::Error;

use super::expr::{BinaryOp, ExprNode, Func};

#[derive(Clone, Debug, Error, PartialEq)]
pub enum ParseError {
    #[error("syntax error at position {position}: {message}")]
    Syntax { position: usize, message: String },
    #[error("unknown identifier `{name}` at position {position}")]
    UnknownIdentifier { position: usize, name: String },
}

impl ParseError {
    pub fn position(&self) -> usize {
        match self {
            ParseError::Syntax { position, .. }
            | ParseError::UnknownIdentifier { position, .. } => *position,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
enum Token {
    Number(f64),
    Ident(String),
    Op(char),
    LParen,
    RParen,
    End,
}

fn describe(token: &Token) -> String {
    match token {
        Token::Number(v) => format!("number {v}"),
        Token::Ident(s) => format!("identifier `{s}`"),
        Token::Op(c) => format!("`{c}`"),
        Token::LParen => "`(`".into(),
        Token::RParen => "`)`".into(),
        Token::End => "end of input".into(),
    }
}

fn tokenize(src: &str) -> Result<Vec<(Token, usize)>, ParseError> {
    let bytes = src.as_bytes();
    let mut tokens = Vec::new();
    let mut i = 0;
    while i < bytes.len() {
        let c = bytes[i];
        match c {
            b' ' | b'\t' | b'\n' | b'\r' => i += 1,
            b'+' | b'-' | b'*' | b'/' | b'^' => {
                tokens.push((Token::Op(c as char), i));
                i += 1;
            }
            b'(' => {
                tokens.push((Token::LParen, i));
                i += 1;
            }
            b')' => {
                tokens.push((Token::RParen, i));
                i += 1;
            }
            b'0'..=b'9' | b'.' => {
                let start = i;
                while i < bytes.len() && (bytes[i].is_ascii_digit() || bytes[i] == b'.') {
                    i += 1;
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
                let text = &src[start..i];
                let value: f64 = text.parse().map_err(|_| ParseError::Syntax {
                    position: start,
                    message: format!("malformed number `{text}`"),
                })?;
                if !value.is_finite() {
                    return Err(ParseError::Syntax {
                        position: start,
                        message: format!("number `{text}` is out of range"),
                    });
                }
                tokens.push((Token::Number(value), start));
            }
            c if c.is_ascii_alphabetic() || c == b'_' => {
                let start = i;
                while i < bytes.len() && (bytes[i].is_ascii_alphanumeric() || bytes[i] == b'_') {
                    i += 1;
                }
                tokens.push((Token::Ident(src[start..i].to_string()), start));
            }
            _ => {
                let ch = src[i..].chars().next().unwrap_or('?');
                return Err(ParseError::Syntax {
                    position: i,
                    message: format!("unexpected character `{ch}`"),
                });
            }
        }
    }
    tokens.push((Token::End, src.len()));
    Ok(tokens)
}

struct Parser {
    tokens: Vec<(Token, usize)>,
    pos: usize,
}

impl Parser {
    fn peek(&self) -> &Token {
        &self.tokens[self.pos].0
    }

    fn position(&self) -> usize {
        self.tokens[self.pos].1
    }

    fn advance(&mut self) -> Token {
        let token = self.tokens[self.pos].0.clone();
        if self.pos + 1 < self.tokens.len() {
            self.pos += 1;
        }
        token
    }

    fn error(&self, message: impl Into<String>) -> ParseError {
        ParseError::Syntax {
            position: self.position(),
            message: message.into(),
        }
    }

    fn expr(&mut self) -> Result<ExprNode, ParseError> {
        let mut lhs = self.term()?;
        while let Token::Op(c @ ('+' | '-')) = *self.peek() {
            self.advance();
            let rhs = self.term()?;
            let op = if c == '+' {
                BinaryOp::Add
            } else {
                BinaryOp::Sub
            };
            lhs = ExprNode::Binary(op, Box::new(lhs), Box::new(rhs));
        }
        Ok(lhs)
    }

    fn term(&mut self) -> Result<ExprNode, ParseError> {
        let mut lhs = self.factor()?;
        while let Token::Op(c @ ('*' | '/')) = *self.peek() {
            self.advance();
            let rhs = self.factor()?;
            let op = if c == '*' {
                BinaryOp::Mul
            } else {
                BinaryOp::Div
            };
            lhs = ExprNode::Binary(op, Box::new(lhs), Box::new(rhs));
        }
        Ok(lhs)
    }

    fn factor(&mut self) -> Result<ExprNode, ParseError> {
        if *self.peek() == Token::Op('-') {
            self.advance();
            return Ok(ExprNode::Neg(Box::new(self.factor()?)));
        }
        let base = self.base()?;
        if *self.peek() == Token::Op('^') {
            self.advance();
            let exponent = self.factor()?;
            return Ok(ExprNode::Binary(
                BinaryOp::Pow,
                Box::new(base),
                Box::new(exponent),
            ));
        }
        Ok(base)
    }

    fn base(&mut self) -> Result<ExprNode, ParseError> {
        let position = self.position();
        match self.advance() {
            Token::Number(v) => Ok(ExprNode::Const(v)),
            Token::Ident(name) if name == "t" => Ok(ExprNode::Var),
            Token::Ident(name) => {
                let func = Func::from_name(&name).ok_or(ParseError::UnknownIdentifier {
                    position,
                    name: name.clone(),
                })?;
                if *self.peek() != Token::LParen {
                    return Err(self.error(format!("expected `(` after `{name}`")));
                }
                self.advance();
                let arg = self.expr()?;
                self.expect_close()?;
                Ok(ExprNode::Call(func, Box::new(arg)))
            }
            Token::LParen => {
                let inner = self.expr()?;
                self.expect_close()?;
                Ok(inner)
            }
            other => Err(ParseError::Syntax {
                position,
                message: format!("expected expression, found {}", describe(&other)),
            }),
        }
    }

    fn expect_close(&mut self) -> Result<(), ParseError> {
        if *self.peek() == Token::RParen {
            self.advance();
            Ok(())
        } else {
            Err(self.error(format!("expected `)`, found {}", describe(self.peek()))))
        }
    }
}

/// Parses profile source text into an expression tree without simplifying it.
pub fn parse_profile(src: &str) -> Result<ExprNode, ParseError> {
    if src.trim().is_empty() {
        return Err(ParseError::Syntax {
            position: 0,
            message: "empty expression".into(),
        });
    }
    let mut parser = Parser {
        tokens: tokenize(src)?,
        pos: 0,
    };
    let expr = parser.expr()?;
    if *parser.peek() != Token::End {
        return Err(parser.error(format!("unexpected {}", describe(parser.peek()))));
    }
    Ok(expr)
}
