//! A small arithmetic language over the state `x` and the mark `u`.
//!
//! Grammar (lowest to highest precedence): `+ -`, `* /`, unary `-`, `^`
//! (right-associative), atoms. Atoms are numbers, `x`, `u`, `e`, `pi`,
//! parenthesised expressions and calls to `log exp sqrt abs pow`.
//!
//! Products treat `0 * inf` as `0`, which realises the continuous extension
//! of expressions such as `x*log(abs(x))` at the origin.

use std::fmt;
use std::sync::Arc;

use super::{CoefficientError, Coefficients, MarkSpace};

/// Nodes used when the compensator is computed by quadrature over marks.
pub const COMPENSATOR_NODES: usize = 48;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Func {
    Log,
    Exp,
    Sqrt,
    Abs,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BinOp {
    Add,
    Sub,
    Mul,
    Div,
    Pow,
}

#[derive(Debug, Clone, PartialEq)]
pub enum Node {
    Num(f64),
    X,
    U,
    Neg(Box<Node>),
    Call(Func, Box<Node>),
    Bin(BinOp, Box<Node>, Box<Node>),
}

/// A parsed expression together with its source text.
#[derive(Clone, PartialEq)]
pub struct Expr {
    source: String,
    root: Node,
}

impl fmt::Debug for Expr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "Expr({:?})", self.source)
    }
}

impl fmt::Display for Expr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.source)
    }
}

impl Expr {
    pub fn parse(source: &str) -> Result<Self, CoefficientError> {
        let tokens = lex(source)?;
        let mut p = Parser { tokens, pos: 0 };
        let root = p.expr()?;
        if p.pos != p.tokens.len() {
            return Err(CoefficientError::Parse(format!("unexpected {:?} in `{source}`", p.tokens[p.pos])));
        }
        Ok(Expr { source: source.to_string(), root })
    }

    pub fn source(&self) -> &str {
        &self.source
    }

    /// Whether the expression mentions the mark variable `u`.
    pub fn uses_mark(&self) -> bool {
        fn walk(n: &Node) -> bool {
            match n {
                Node::U => true,
                Node::Num(_) | Node::X => false,
                Node::Neg(a) | Node::Call(_, a) => walk(a),
                Node::Bin(_, a, b) => walk(a) || walk(b),
            }
        }
        walk(&self.root)
    }

    pub fn eval(&self, x: f64, u: f64) -> f64 {
        eval(&self.root, x, u)
    }
}

fn eval(n: &Node, x: f64, u: f64) -> f64 {
    match n {
        Node::Num(v) => *v,
        Node::X => x,
        Node::U => u,
        Node::Neg(a) => -eval(a, x, u),
        Node::Call(f, a) => {
            let v = eval(a, x, u);
            match f {
                Func::Log => v.ln(),
                Func::Exp => v.exp(),
                Func::Sqrt => v.sqrt(),
                Func::Abs => v.abs(),
            }
        }
        Node::Bin(op, a, b) => {
            let l = eval(a, x, u);
            let r = eval(b, x, u);
            match op {
                BinOp::Add => l + r,
                BinOp::Sub => l - r,
                BinOp::Mul => {
                    if (l == 0.0 && r.is_infinite()) || (r == 0.0 && l.is_infinite()) {
                        0.0
                    } else {
                        l * r
                    }
                }
                BinOp::Div => l / r,
                BinOp::Pow => l.powf(r),
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
enum Tok {
    Num(f64),
    Ident(String),
    Op(char),
    LParen,
    RParen,
    Comma,
}

fn lex(s: &str) -> Result<Vec<Tok>, CoefficientError> {
    let chars: Vec<char> = s.chars().collect();
    let mut out = Vec::new();
    let mut i = 0;
    while i < chars.len() {
        let c = chars[i];
        if c.is_whitespace() {
            i += 1;
        } else if c.is_ascii_digit() || c == '.' {
            let start = i;
            while i < chars.len() && (chars[i].is_ascii_digit() || chars[i] == '.') {
                i += 1;
            }
            if i < chars.len() && (chars[i] == 'e' || chars[i] == 'E') {
                let mut j = i + 1;
                if j < chars.len() && (chars[j] == '+' || chars[j] == '-') {
                    j += 1;
                }
                if j < chars.len() && chars[j].is_ascii_digit() {
                    i = j;
                    while i < chars.len() && chars[i].is_ascii_digit() {
                        i += 1;
                    }
                }
            }
            let text: String = chars[start..i].iter().collect();
            let v = text.parse::<f64>().map_err(|_| CoefficientError::Parse(format!("bad number `{text}`")))?;
            out.push(Tok::Num(v));
        } else if c.is_ascii_alphabetic() || c == '_' {
            let start = i;
            while i < chars.len() && (chars[i].is_ascii_alphanumeric() || chars[i] == '_') {
                i += 1;
            }
            out.push(Tok::Ident(chars[start..i].iter().collect()));
        } else {
            out.push(match c {
                '+' | '-' | '*' | '/' | '^' => Tok::Op(c),
                '(' => Tok::LParen,
                ')' => Tok::RParen,
                ',' => Tok::Comma,
                _ => return Err(CoefficientError::Parse(format!("unexpected character `{c}`"))),
            });
            i += 1;
        }
    }
    Ok(out)
}

struct Parser {
    tokens: Vec<Tok>,
    pos: usize,
}

impl Parser {
    fn peek(&self) -> Option<&Tok> {
        self.tokens.get(self.pos)
    }

    fn next(&mut self) -> Option<Tok> {
        let t = self.tokens.get(self.pos).cloned();
        self.pos += 1;
        t
    }

    fn expect(&mut self, t: Tok) -> Result<(), CoefficientError> {
        match self.next() {
            Some(ref got) if *got == t => Ok(()),
            got => Err(CoefficientError::Parse(format!("expected {t:?}, found {got:?}"))),
        }
    }

    fn expr(&mut self) -> Result<Node, CoefficientError> {
        let mut lhs = self.term()?;
        while let Some(Tok::Op(c @ ('+' | '-'))) = self.peek() {
            let op = if *c == '+' { BinOp::Add } else { BinOp::Sub };
            self.pos += 1;
            let rhs = self.term()?;
            lhs = Node::Bin(op, Box::new(lhs), Box::new(rhs));
        }
        Ok(lhs)
    }

    fn term(&mut self) -> Result<Node, CoefficientError> {
        let mut lhs = self.unary()?;
        while let Some(Tok::Op(c @ ('*' | '/'))) = self.peek() {
            let op = if *c == '*' { BinOp::Mul } else { BinOp::Div };
            self.pos += 1;
            let rhs = self.unary()?;
            lhs = Node::Bin(op, Box::new(lhs), Box::new(rhs));
        }
        Ok(lhs)
    }

    fn unary(&mut self) -> Result<Node, CoefficientError> {
        match self.peek() {
            Some(Tok::Op('-')) => {
                self.pos += 1;
                Ok(Node::Neg(Box::new(self.unary()?)))
            }
            Some(Tok::Op('+')) => {
                self.pos += 1;
                self.unary()
            }
            _ => self.power(),
        }
    }

    fn power(&mut self) -> Result<Node, CoefficientError> {
        let base = self.atom()?;
        if let Some(Tok::Op('^')) = self.peek() {
            self.pos += 1;
            let exp = self.unary()?;
            return Ok(Node::Bin(BinOp::Pow, Box::new(base), Box::new(exp)));
        }
        Ok(base)
    }

    fn atom(&mut self) -> Result<Node, CoefficientError> {
        match self.next() {
            Some(Tok::Num(v)) => Ok(Node::Num(v)),
            Some(Tok::LParen) => {
                let e = self.expr()?;
                self.expect(Tok::RParen)?;
                Ok(e)
            }
            Some(Tok::Ident(name)) => {
                if let Some(Tok::LParen) = self.peek() {
                    self.pos += 1;
                    let a = self.expr()?;
                    let node = if name == "pow" {
                        self.expect(Tok::Comma)?;
                        let b = self.expr()?;
                        Node::Bin(BinOp::Pow, Box::new(a), Box::new(b))
                    } else {
                        let f = match name.as_str() {
                            "log" => Func::Log,
                            "exp" => Func::Exp,
                            "sqrt" => Func::Sqrt,
                            "abs" => Func::Abs,
                            _ => return Err(CoefficientError::Parse(format!("unknown function `{name}`"))),
                        };
                        Node::Call(f, Box::new(a))
                    };
                    self.expect(Tok::RParen)?;
                    return Ok(node);
                }
                match name.as_str() {
                    "x" => Ok(Node::X),
                    "u" => Ok(Node::U),
                    "e" => Ok(Node::Num(std::f64::consts::E)),
                    "pi" => Ok(Node::Num(std::f64::consts::PI)),
                    _ => Err(CoefficientError::Parse(format!("unknown identifier `{name}`"))),
                }
            }
            got => Err(CoefficientError::Parse(format!("unexpected {got:?}"))),
        }
    }
}

/// A scalar model whose coefficients are expressions.
#[derive(Debug, Clone)]
pub struct ExprModel {
    drift: Expr,
    diffusion: Expr,
    jump: Expr,
    compensator: Option<Expr>,
    nodes: Arc<Vec<(f64, f64)>>,
}

impl ExprModel {
    /// Without a closed-form compensator, `c` is integrated over fixed mark
    /// nodes taken from `marks`.
    pub fn new(
        drift: Expr,
        diffusion: Expr,
        jump: Expr,
        compensator: Option<Expr>,
        marks: &MarkSpace,
    ) -> Result<Self, CoefficientError> {
        if marks.dim() != 1 {
            return Err(CoefficientError::Dimension { expected: 1, got: marks.dim() });
        }
        for (name, e) in [("drift", &drift), ("diffusion", &diffusion)] {
            if e.uses_mark() {
                return Err(CoefficientError::Parse(format!("{name} must not depend on u")));
            }
        }
        if compensator.as_ref().is_some_and(Expr::uses_mark) {
            return Err(CoefficientError::Parse("compensator must not depend on u".into()));
        }
        let nodes = marks.quadrature(COMPENSATOR_NODES).into_iter().map(|(w, u)| (w, u[0])).collect();
        Ok(ExprModel { drift, diffusion, jump, compensator, nodes: Arc::new(nodes) })
    }

    pub fn drift_expr(&self) -> &Expr {
        &self.drift
    }

    pub fn diffusion_expr(&self) -> &Expr {
        &self.diffusion
    }

    pub fn jump_expr(&self) -> &Expr {
        &self.jump
    }
}

impl Coefficients for ExprModel {
    fn dim(&self) -> usize {
        1
    }
    fn brownian_dim(&self) -> usize {
        1
    }
    fn drift(&self, x: &[f64], out: &mut [f64]) {
        out[0] = self.drift.eval(x[0], 0.0);
    }
    fn diffusion(&self, x: &[f64], out: &mut [f64]) {
        out[0] = self.diffusion.eval(x[0], 0.0);
    }
    fn jump(&self, x: &[f64], u: &[f64], out: &mut [f64]) {
        out[0] = self.jump.eval(x[0], u[0]);
    }
    fn compensator(&self, x: &[f64], out: &mut [f64]) {
        out[0] = match &self.compensator {
            Some(c) => c.eval(x[0], 0.0),
            None => {
                let mut acc = 0.0;
                for &(w, u) in self.nodes.iter() {
                    acc += w * self.jump.eval(x[0], u);
                }
                acc
            }
        };
    }
}
