use thiserror::Error;

use super::ast::{BinOp, Expr, Func, Operand, Program, Stat, UnaryOp};
use crate::grammar::{DerivationTree, Grammar};

#[derive(Debug, Clone, Error, PartialEq, Eq)]
pub enum ParseError {
    #[error("unexpected character `{found}` at {position}")]
    Lexical { position: usize, found: char },
    #[error("expected {expected} at {position}, found {found}")]
    Syntax {
        position: usize,
        expected: &'static str,
        found: String,
    },
}

/// Parses program text into a derivation tree under the program grammar.
/// Whitespace is ignored.
pub fn parse_program(g: &Grammar, text: &str) -> Result<DerivationTree, ParseError> {
    Ok(parse_program_ast(text)?.to_tree(g))
}

#[derive(Debug, Clone, PartialEq, Eq)]
enum Tok {
    V,
    Digit(u8),
    Eq,
    Semi,
    Return,
    LParen,
    RParen,
    Plus,
    Minus,
    Star,
    Slash,
    Dot,
    Func(Func),
}

fn lex(text: &str) -> Result<Vec<(usize, Tok)>, ParseError> {
    let chars: Vec<char> = text.chars().collect();
    let mut out = Vec::new();
    let mut i = 0;
    let word = |i: usize, w: &str| chars[i..].iter().take(w.len()).copied().eq(w.chars());
    while i < chars.len() {
        let c = chars[i];
        let (tok, len) = match c {
            c if c.is_whitespace() => {
                i += 1;
                continue;
            }
            'v' => (Tok::V, 1),
            '0'..='9' => (Tok::Digit(c as u8 - b'0'), 1),
            '=' => (Tok::Eq, 1),
            ';' => (Tok::Semi, 1),
            '(' => (Tok::LParen, 1),
            ')' => (Tok::RParen, 1),
            '+' => (Tok::Plus, 1),
            '-' => (Tok::Minus, 1),
            '*' => (Tok::Star, 1),
            '/' => (Tok::Slash, 1),
            '.' => (Tok::Dot, 1),
            'r' if word(i, "return:") => (Tok::Return, 7),
            's' if word(i, "sin") => (Tok::Func(Func::Sin), 3),
            'c' if word(i, "cos") => (Tok::Func(Func::Cos), 3),
            'e' if word(i, "exp") => (Tok::Func(Func::Exp), 3),
            found => return Err(ParseError::Lexical { position: i, found }),
        };
        out.push((i, tok));
        i += len;
    }
    out.push((chars.len(), Tok::Semi)); // sentinel, never consumed as a separator
    Ok(out)
}

struct Parser {
    toks: Vec<(usize, Tok)>,
    pos: usize,
    end: usize,
}

impl Parser {
    fn peek(&self) -> Option<&Tok> {
        (self.pos < self.end).then(|| &self.toks[self.pos].1)
    }

    fn err(&self, expected: &'static str) -> ParseError {
        let (position, found) = if self.pos < self.end {
            let (p, t) = &self.toks[self.pos];
            (*p, format!("{t:?}"))
        } else {
            (self.toks[self.end].0, "end of input".to_string())
        };
        ParseError::Syntax {
            position,
            expected,
            found,
        }
    }

    fn eat(&mut self, t: Tok, expected: &'static str) -> Result<(), ParseError> {
        if self.peek() == Some(&t) {
            self.pos += 1;
            Ok(())
        } else {
            Err(self.err(expected))
        }
    }

    fn digit(&mut self, expected: &'static str) -> Result<u8, ParseError> {
        match self.peek() {
            Some(&Tok::Digit(d)) => {
                self.pos += 1;
                Ok(d)
            }
            _ => Err(self.err(expected)),
        }
    }

    fn var(&mut self) -> Result<u8, ParseError> {
        self.eat(Tok::V, "a variable")?;
        self.digit("a variable index")
    }

    fn operand(&mut self) -> Result<Operand, ParseError> {
        match self.peek() {
            Some(Tok::V) => Ok(Operand::Var(self.var()?)),
            Some(Tok::Digit(_)) => {
                let int = self.digit("a number")?;
                let frac = if self.peek() == Some(&Tok::Dot) {
                    self.pos += 1;
                    Some(self.digit("a fractional digit")?)
                } else {
                    None
                };
                Ok(Operand::Num { int, frac })
            }
            _ => Err(self.err("an operand")),
        }
    }

    fn expr(&mut self) -> Result<Expr, ParseError> {
        match self.peek() {
            Some(Tok::Plus) => {
                self.pos += 1;
                Ok(Expr::Unary(UnaryOp::Plus, self.operand()?))
            }
            Some(Tok::Minus) => {
                self.pos += 1;
                Ok(Expr::Unary(UnaryOp::Minus, self.operand()?))
            }
            Some(&Tok::Func(f)) => {
                self.pos += 1;
                self.eat(Tok::LParen, "`(`")?;
                let a = self.operand()?;
                self.eat(Tok::RParen, "`)`")?;
                Ok(Expr::Call(f, a))
            }
            _ => {
                let a = self.operand()?;
                let op = match self.peek() {
                    Some(Tok::Plus) => BinOp::Add,
                    Some(Tok::Minus) => BinOp::Sub,
                    Some(Tok::Star) => BinOp::Mul,
                    Some(Tok::Slash) => BinOp::Div,
                    _ => return Err(self.err("a binary operator")),
                };
                self.pos += 1;
                Ok(Expr::Binary(a, op, self.operand()?))
            }
        }
    }

    fn stat(&mut self) -> Result<Stat, ParseError> {
        match self.peek() {
            Some(Tok::Return) => {
                self.pos += 1;
                Ok(Stat::Return(self.var()?))
            }
            Some(Tok::V) => {
                let v = self.var()?;
                self.eat(Tok::Eq, "`=`")?;
                Ok(Stat::Assign(v, self.expr()?))
            }
            _ => Err(self.err("a statement")),
        }
    }
}

pub(super) fn parse_program_ast(text: &str) -> Result<Program, ParseError> {
    let toks = lex(text)?;
    let end = toks.len() - 1;
    let mut p = Parser { toks, pos: 0, end };
    let mut stats = vec![p.stat()?];
    while p.pos < p.end {
        p.eat(Tok::Semi, "`;`")?;
        stats.push(p.stat()?);
    }
    Ok(Program { stats })
}

/// Production indices of the program grammar.
pub(super) struct Prods {
    pub program: usize,
    pub list_rec: usize,
    pub list_base: usize,
    pub stat_assign: usize,
    pub stat_return: usize,
    pub assign: usize,
    pub ret: usize,
    pub lhs: usize,
    pub var: usize,
    pub var_id: [usize; 10],
    pub rhs: usize,
    pub expr_unary: usize,
    pub expr_binary: usize,
    pub unary_op_expr: usize,
    pub unary_func_expr: usize,
    pub binary: usize,
    pub uop: [usize; 2],
    pub func: [usize; 3],
    pub bop: [usize; 4],
    pub operand_var: usize,
    pub operand_num: usize,
    pub num_frac: usize,
    pub num_int: usize,
    pub digit: [usize; 10],
}

impl Prods {
    pub fn new(g: &Grammar) -> Self {
        let f = |s: &str| {
            g.find(s)
                .unwrap_or_else(|e| panic!("program grammar lacks {s}: {e}"))
        };
        Prods {
            program: f("<program> -> <stat list>"),
            list_rec: f("<stat list> -> <stat> ';' <stat list>"),
            list_base: f("<stat list> -> <stat>"),
            stat_assign: f("<stat> -> <assign>"),
            stat_return: f("<stat> -> <return>"),
            assign: f("<assign> -> <lhs> '=' <rhs>"),
            ret: f("<return> -> 'return:' <lhs>"),
            lhs: f("<lhs> -> <var>"),
            var: f("<var> -> 'v' <var id>"),
            var_id: std::array::from_fn(|d| f(&format!("<var id> -> '{d}'"))),
            rhs: f("<rhs> -> <expr>"),
            expr_unary: f("<expr> -> <unary expr>"),
            expr_binary: f("<expr> -> <binary expr>"),
            unary_op_expr: f("<unary expr> -> <unary op> <operand>"),
            unary_func_expr: f("<unary expr> -> <unary func> '(' <operand> ')'"),
            binary: f("<binary expr> -> <operand> <binary op> <operand>"),
            uop: [f("<unary op> -> '+'"), f("<unary op> -> '-'")],
            func: [
                f("<unary func> -> 'sin'"),
                f("<unary func> -> 'cos'"),
                f("<unary func> -> 'exp'"),
            ],
            bop: [
                f("<binary op> -> '+'"),
                f("<binary op> -> '-'"),
                f("<binary op> -> '*'"),
                f("<binary op> -> '/'"),
            ],
            operand_var: f("<operand> -> <var>"),
            operand_num: f("<operand> -> <immediate number>"),
            num_frac: f("<immediate number> -> <digit> '.' <digit>"),
            num_int: f("<immediate number> -> <digit>"),
            digit: std::array::from_fn(|d| f(&format!("<digit> -> '{d}'"))),
        }
    }

    pub fn operand(&self, a: Operand, out: &mut Vec<usize>) {
        match a {
            Operand::Var(v) => out.extend([self.operand_var, self.var, self.var_id[v as usize]]),
            Operand::Num { int, frac: None } => {
                out.extend([self.operand_num, self.num_int, self.digit[int as usize]])
            }
            Operand::Num { int, frac: Some(d) } => out.extend([
                self.operand_num,
                self.num_frac,
                self.digit[int as usize],
                self.digit[d as usize],
            ]),
        }
    }
}
