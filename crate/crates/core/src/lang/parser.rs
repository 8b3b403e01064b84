//! Recursive-descent parser over the token stream.

use super::ast::*;
use super::lexer::{tokenize, tokenize_inline, Kw, Tok, Token};
use super::ParseError;

/// Maximum nesting of expressions and blocks.
pub const MAX_DEPTH: usize = 100;

pub const ENTRY_POINT: &str = "execute_command";

pub fn parse(source: &str) -> Result<Program, ParseError> {
    let tokens = tokenize(source)?;
    let mut p = Parser { tokens, pos: 0, depth: 0 };
    p.module()
}

struct Parser {
    tokens: Vec<Token>,
    pos: usize,
    depth: usize,
}

impl Parser {
    fn tok(&self) -> &Tok {
        &self.tokens[self.pos].tok
    }

    fn here(&self) -> (usize, usize) {
        let t = &self.tokens[self.pos];
        (t.line, t.col)
    }

    fn error<T>(&self, msg: impl Into<String>) -> Result<T, ParseError> {
        let (line, col) = self.here();
        Err(ParseError::new(line, col, msg))
    }

    fn unexpected<T>(&self, wanted: &str) -> Result<T, ParseError> {
        match self.tok() {
            Tok::Banned(word) => self.error(format!("`{word}` is not supported")),
            Tok::Op(".") => self.error("attribute access is not supported"),
            Tok::Op("{") | Tok::Op("}") => self.error("dict and set displays are not supported"),
            Tok::Op(";") => self.error("`;` is not supported"),
            Tok::Indent => self.error("unexpected indent"),
            other => self.error(format!("expected {wanted}, found {}", describe(other))),
        }
    }

    fn advance(&mut self) -> Tok {
        let t = self.tokens[self.pos].tok.clone();
        if self.pos + 1 < self.tokens.len() {
            self.pos += 1;
        }
        t
    }

    fn eat_op(&mut self, op: &str) -> bool {
        if matches!(self.tok(), Tok::Op(o) if *o == op) {
            self.advance();
            true
        } else {
            false
        }
    }

    fn expect_op(&mut self, op: &str) -> Result<(), ParseError> {
        if self.eat_op(op) {
            Ok(())
        } else {
            self.unexpected(&format!("`{op}`"))
        }
    }

    fn eat_kw(&mut self, kw: Kw) -> bool {
        if *self.tok() == Tok::Kw(kw) {
            self.advance();
            true
        } else {
            false
        }
    }

    fn expect_kw(&mut self, kw: Kw) -> Result<(), ParseError> {
        if self.eat_kw(kw) {
            Ok(())
        } else {
            self.unexpected(&format!("`{}`", kw_text(kw)))
        }
    }

    fn name(&mut self) -> Result<String, ParseError> {
        match self.tok().clone() {
            Tok::Name(n) => {
                self.advance();
                Ok(n)
            }
            _ => self.unexpected("a name"),
        }
    }

    fn enter(&mut self) -> Result<(), ParseError> {
        self.depth += 1;
        if self.depth > MAX_DEPTH {
            return self.error("nesting too deep");
        }
        Ok(())
    }

    fn leave(&mut self) {
        self.depth -= 1;
    }

    fn module(&mut self) -> Result<Program, ParseError> {
        while *self.tok() == Tok::Newline {
            self.advance();
        }
        if *self.tok() != Tok::Kw(Kw::Def) {
            return self.unexpected(&format!("`def {ENTRY_POINT}`"));
        }
        self.advance();
        let name = self.name()?;
        if name != ENTRY_POINT {
            return self.error(format!("the program must define `{ENTRY_POINT}`, not `{name}`"));
        }
        self.expect_op("(")?;
        let mut params = Vec::new();
        while !self.eat_op(")") {
            if !params.is_empty() {
                self.expect_op(",")?;
                if self.eat_op(")") {
                    break;
                }
            }
            let param = self.name()?;
            if params.contains(&param) {
                return self.error(format!("duplicate parameter `{param}`"));
            }
            if self.eat_op("=") {
                return self.error("default parameter values are not supported");
            }
            params.push(param);
        }
        if params.is_empty() || params.len() > 2 {
            return self.error(format!("`{ENTRY_POINT}` takes one or two image parameters"));
        }
        if self.eat_op("->") {
            self.expr()?;
        }
        self.expect_op(":")?;
        let body = self.suite()?;
        while *self.tok() == Tok::Newline {
            self.advance();
        }
        if *self.tok() != Tok::Eof {
            if *self.tok() == Tok::Kw(Kw::Def) {
                return self.error(format!("only one function, `{ENTRY_POINT}`, may be defined"));
            }
            return self.unexpected("end of program");
        }
        Ok(Program { params, body })
    }

    /// Block after `:`, either indented or a simple statement on the same line.
    fn suite(&mut self) -> Result<Vec<Stmt>, ParseError> {
        self.enter()?;
        let result = if *self.tok() == Tok::Newline {
            self.advance();
            if *self.tok() != Tok::Indent {
                return self.unexpected("an indented block");
            }
            self.advance();
            let mut body = Vec::new();
            while !matches!(self.tok(), Tok::Dedent | Tok::Eof) {
                body.push(self.statement()?);
            }
            self.advance();
            Ok(body)
        } else {
            let stmt = self.simple_statement()?;
            Ok(vec![stmt])
        };
        self.leave();
        result
    }

    fn statement(&mut self) -> Result<Stmt, ParseError> {
        let (line, _) = self.here();
        match self.tok() {
            Tok::Kw(Kw::If) => {
                self.advance();
                let mut arms = vec![self.cond_block()?];
                let mut orelse = None;
                loop {
                    if self.eat_kw(Kw::Elif) {
                        arms.push(self.cond_block()?);
                    } else if self.eat_kw(Kw::Else) {
                        self.expect_op(":")?;
                        orelse = Some(self.suite()?);
                        break;
                    } else {
                        break;
                    }
                }
                Ok(Stmt { line, kind: StmtKind::If { arms, orelse } })
            }
            Tok::Kw(Kw::For) => {
                self.advance();
                let var = self.name()?;
                if matches!(self.tok(), Tok::Op(",")) {
                    return self.error("tuple unpacking is not supported");
                }
                self.expect_kw(Kw::In)?;
                let iter = self.expr()?;
                self.expect_op(":")?;
                let body = self.suite()?;
                if *self.tok() == Tok::Kw(Kw::Else) {
                    return self.error("`for ... else` is not supported");
                }
                Ok(Stmt { line, kind: StmtKind::For { var, iter, body } })
            }
            Tok::Kw(Kw::Def) => self.error("nested function definitions are not supported"),
            Tok::Kw(Kw::Elif) | Tok::Kw(Kw::Else) => self.error("`elif`/`else` without `if`"),
            _ => self.simple_statement(),
        }
    }

    fn cond_block(&mut self) -> Result<(Expr, Vec<Stmt>), ParseError> {
        let cond = self.expr()?;
        self.expect_op(":")?;
        Ok((cond, self.suite()?))
    }

    fn simple_statement(&mut self) -> Result<Stmt, ParseError> {
        let (line, _) = self.here();
        let kind = match self.tok() {
            Tok::Kw(Kw::Pass) => {
                self.advance();
                StmtKind::Pass
            }
            Tok::Kw(Kw::Return) => {
                self.advance();
                if *self.tok() == Tok::Newline {
                    StmtKind::Return(None)
                } else {
                    StmtKind::Return(Some(self.expr()?))
                }
            }
            Tok::Kw(Kw::If | Kw::For | Kw::Def) => return self.error("compound statement not allowed here"),
            _ => {
                let expr = self.expr()?;
                match self.tok().clone() {
                    Tok::Op("=") => {
                        let target = assign_target(&expr).or_else(|m| self.error(m))?;
                        self.advance();
                        let value = self.expr()?;
                        if matches!(self.tok(), Tok::Op("=")) {
                            return self.error("chained assignment is not supported");
                        }
                        StmtKind::Assign { target, value }
                    }
                    Tok::Op(op) if aug_op(op).is_some() => {
                        let target = assign_target(&expr).or_else(|m| self.error(m))?;
                        self.advance();
                        let value = self.expr()?;
                        StmtKind::AugAssign { target, op: aug_op(op).expect("checked"), value }
                    }
                    _ => StmtKind::Expr(expr),
                }
            }
        };
        match self.tok() {
            Tok::Newline => {
                self.advance();
            }
            Tok::Eof | Tok::Dedent => {}
            Tok::Op(",") => return self.error("tuples are not supported"),
            _ => return self.unexpected("end of line"),
        }
        Ok(Stmt { line, kind })
    }

    pub fn expr(&mut self) -> Result<Expr, ParseError> {
        self.enter()?;
        let result = self.ifexp();
        self.leave();
        result
    }

    fn ifexp(&mut self) -> Result<Expr, ParseError> {
        let then = self.or_expr()?;
        if !self.eat_kw(Kw::If) {
            if *self.tok() == Tok::Kw(Kw::For) {
                return self.error("comprehensions are not supported");
            }
            return Ok(then);
        }
        let cond = self.or_expr()?;
        self.expect_kw(Kw::Else)?;
        let orelse = self.expr()?;
        Ok(Expr::IfElse { cond: Box::new(cond), then: Box::new(then), orelse: Box::new(orelse) })
    }

    fn or_expr(&mut self) -> Result<Expr, ParseError> {
        let mut lhs = self.and_expr()?;
        while self.eat_kw(Kw::Or) {
            let rhs = self.and_expr()?;
            lhs = Expr::Logic { op: BoolOp::Or, lhs: Box::new(lhs), rhs: Box::new(rhs) };
        }
        Ok(lhs)
    }

    fn and_expr(&mut self) -> Result<Expr, ParseError> {
        let mut lhs = self.not_expr()?;
        while self.eat_kw(Kw::And) {
            let rhs = self.not_expr()?;
            lhs = Expr::Logic { op: BoolOp::And, lhs: Box::new(lhs), rhs: Box::new(rhs) };
        }
        Ok(lhs)
    }

    fn not_expr(&mut self) -> Result<Expr, ParseError> {
        if self.eat_kw(Kw::Not) {
            self.enter()?;
            let operand = self.not_expr();
            self.leave();
            return Ok(Expr::Unary { op: UnaryOp::Not, operand: Box::new(operand?) });
        }
        self.comparison()
    }

    fn comparison(&mut self) -> Result<Expr, ParseError> {
        let first = self.arith()?;
        let mut rest = Vec::new();
        loop {
            let op = match self.tok() {
                Tok::Op("==") => CmpOp::Eq,
                Tok::Op("!=") => CmpOp::Ne,
                Tok::Op("<") => CmpOp::Lt,
                Tok::Op("<=") => CmpOp::Le,
                Tok::Op(">") => CmpOp::Gt,
                Tok::Op(">=") => CmpOp::Ge,
                Tok::Kw(Kw::In) => CmpOp::In,
                Tok::Kw(Kw::Not) => {
                    if self.tokens.get(self.pos + 1).map(|t| &t.tok) != Some(&Tok::Kw(Kw::In)) {
                        return self.unexpected("`in` after `not`");
                    }
                    self.advance();
                    CmpOp::NotIn
                }
                _ => break,
            };
            self.advance();
            rest.push((op, self.arith()?));
        }
        if rest.is_empty() {
            Ok(first)
        } else {
            Ok(Expr::Compare { first: Box::new(first), rest })
        }
    }

    fn arith(&mut self) -> Result<Expr, ParseError> {
        let mut lhs = self.term()?;
        loop {
            let op = match self.tok() {
                Tok::Op("+") => BinOp::Add,
                Tok::Op("-") => BinOp::Sub,
                _ => return Ok(lhs),
            };
            self.advance();
            let rhs = self.term()?;
            lhs = Expr::Binary { op, lhs: Box::new(lhs), rhs: Box::new(rhs) };
        }
    }

    fn term(&mut self) -> Result<Expr, ParseError> {
        let mut lhs = self.unary()?;
        loop {
            let op = match self.tok() {
                Tok::Op("*") => BinOp::Mul,
                Tok::Op("/") => BinOp::Div,
                Tok::Op("//") => BinOp::FloorDiv,
                Tok::Op("%") => BinOp::Mod,
                _ => return Ok(lhs),
            };
            self.advance();
            let rhs = self.unary()?;
            lhs = Expr::Binary { op, lhs: Box::new(lhs), rhs: Box::new(rhs) };
        }
    }

    fn unary(&mut self) -> Result<Expr, ParseError> {
        if self.eat_op("-") {
            self.enter()?;
            let operand = self.unary();
            self.leave();
            return Ok(Expr::Unary { op: UnaryOp::Neg, operand: Box::new(operand?) });
        }
        if self.eat_op("+") {
            self.enter()?;
            let operand = self.unary();
            self.leave();
            return operand;
        }
        self.power()
    }

    fn power(&mut self) -> Result<Expr, ParseError> {
        let base = self.postfix()?;
        if self.eat_op("**") {
            self.enter()?;
            let exp = self.unary();
            self.leave();
            return Ok(Expr::Binary { op: BinOp::Pow, lhs: Box::new(base), rhs: Box::new(exp?) });
        }
        Ok(base)
    }

    fn postfix(&mut self) -> Result<Expr, ParseError> {
        let mut expr = self.atom()?;
        loop {
            match self.tok() {
                Tok::Op("(") => {
                    let Expr::Name(func) = expr else {
                        return self.error("only named functions can be called");
                    };
                    self.advance();
                    let args = self.items(")")?;
                    expr = Expr::Call { func, args };
                }
                Tok::Op("[") => {
                    self.advance();
                    if matches!(self.tok(), Tok::Op(":")) {
                        return self.error("slicing is not supported");
                    }
                    let index = self.expr()?;
                    if matches!(self.tok(), Tok::Op(":")) {
                        return self.error("slicing is not supported");
                    }
                    self.expect_op("]")?;
                    expr = Expr::Index { target: Box::new(expr), index: Box::new(index) };
                }
                Tok::Op(".") => return self.error("attribute access is not supported"),
                _ => return Ok(expr),
            }
        }
    }

    /// Comma-separated expressions up to `close`; a trailing comma is allowed.
    fn items(&mut self, close: &str) -> Result<Vec<Expr>, ParseError> {
        let mut items = Vec::new();
        loop {
            if self.eat_op(close) {
                return Ok(items);
            }
            if matches!(self.tok(), Tok::Op("*") | Tok::Op("**")) {
                return self.error("argument unpacking is not supported");
            }
            items.push(self.expr()?);
            if matches!(self.tok(), Tok::Op("=")) {
                return self.error("keyword arguments are not supported");
            }
            if !self.eat_op(",") {
                self.expect_op(close)?;
                return Ok(items);
            }
        }
    }

    fn atom(&mut self) -> Result<Expr, ParseError> {
        let (line, _) = self.here();
        let expr = match self.tok().clone() {
            Tok::Int(v) => Expr::Int(v),
            Tok::Float(v) => Expr::Float(v),
            Tok::Str(s) => {
                self.advance();
                let mut s = s;
                // Adjacent literals concatenate.
                while let Tok::Str(next) = self.tok().clone() {
                    s.push_str(&next);
                    self.advance();
                }
                return Ok(Expr::Str(s));
            }
            Tok::FStr(raw) => {
                self.advance();
                return fstring(&raw, line);
            }
            Tok::Kw(Kw::True) => Expr::Bool(true),
            Tok::Kw(Kw::False) => Expr::Bool(false),
            Tok::Kw(Kw::None) => Expr::None,
            Tok::Name(n) => Expr::Name(n),
            Tok::Op("(") => {
                self.advance();
                if self.eat_op(")") {
                    return self.error("tuples are not supported");
                }
                let inner = self.expr()?;
                if matches!(self.tok(), Tok::Op(",")) {
                    return self.error("tuples are not supported");
                }
                if *self.tok() == Tok::Kw(Kw::For) {
                    return self.error("generator expressions are not supported");
                }
                self.expect_op(")")?;
                return Ok(inner);
            }
            Tok::Op("[") => {
                self.advance();
                if self.eat_op("]") {
                    return Ok(Expr::List(Vec::new()));
                }
                let first = self.expr()?;
                if *self.tok() == Tok::Kw(Kw::For) {
                    return self.error("comprehensions are not supported");
                }
                let mut items = vec![first];
                if self.eat_op(",") {
                    items.extend(self.items("]")?);
                } else {
                    self.expect_op("]")?;
                }
                return Ok(Expr::List(items));
            }
            _ => return self.unexpected("an expression"),
        };
        self.advance();
        Ok(expr)
    }
}

fn assign_target(expr: &Expr) -> Result<String, String> {
    match expr {
        Expr::Name(n) => Ok(n.clone()),
        Expr::Index { .. } => Err("item assignment is not supported".into()),
        _ => Err("invalid assignment target".into()),
    }
}

fn aug_op(op: &str) -> Option<BinOp> {
    Some(match op {
        "+=" => BinOp::Add,
        "-=" => BinOp::Sub,
        "*=" => BinOp::Mul,
        "/=" => BinOp::Div,
        "//=" => BinOp::FloorDiv,
        "%=" => BinOp::Mod,
        "**=" => BinOp::Pow,
        _ => return None,
    })
}

fn fstring(raw: &str, line: usize) -> Result<Expr, ParseError> {
    let mut parts = Vec::new();
    let mut lit = String::new();
    let mut chars = raw.chars().peekable();
    while let Some(c) = chars.next() {
        match c {
            '{' if chars.peek() == Some(&'{') => {
                chars.next();
                lit.push('{');
            }
            '}' if chars.peek() == Some(&'}') => {
                chars.next();
                lit.push('}');
            }
            '}' => return Err(ParseError::new(line, 1, "single `}` in f-string")),
            '{' => {
                let mut inner = String::new();
                let mut nesting = 0usize;
                let mut quote: Option<char> = None;
                loop {
                    let Some(ch) = chars.next() else {
                        return Err(ParseError::new(line, 1, "unterminated `{` in f-string"));
                    };
                    match (quote, ch) {
                        (Some(q), _) if ch == q => quote = None,
                        (Some(_), _) => {}
                        (None, '\'' | '"') => quote = Some(ch),
                        (None, '[' | '(') => nesting += 1,
                        (None, ']' | ')') => nesting = nesting.saturating_sub(1),
                        (None, '}') if nesting == 0 => break,
                        (None, '!' | ':') if nesting == 0 => {
                            if ch == '!' && chars.peek() == Some(&'=') {
                                inner.push(ch);
                                continue;
                            }
                            return Err(ParseError::new(line, 1, "f-string conversions and format specs are not supported"));
                        }
                        _ => {}
                    }
                    inner.push(ch);
                }
                if inner.trim().is_empty() {
                    return Err(ParseError::new(line, 1, "empty expression in f-string"));
                }
                if !lit.is_empty() {
                    parts.push(FPart::Lit(super::lexer::unescape(&std::mem::take(&mut lit))));
                }
                let tokens = tokenize_inline(&inner, line)?;
                let mut p = Parser { tokens, pos: 0, depth: 1 };
                let expr = p.expr()?;
                if p.tok() != &Tok::Eof {
                    return p.unexpected("`}`");
                }
                parts.push(FPart::Expr(expr));
            }
            _ => lit.push(c),
        }
    }
    if !lit.is_empty() {
        parts.push(FPart::Lit(super::lexer::unescape(&lit)));
    }
    Ok(Expr::FString(parts))
}

fn kw_text(kw: Kw) -> &'static str {
    match kw {
        Kw::Def => "def",
        Kw::Return => "return",
        Kw::If => "if",
        Kw::Elif => "elif",
        Kw::Else => "else",
        Kw::For => "for",
        Kw::In => "in",
        Kw::Not => "not",
        Kw::And => "and",
        Kw::Or => "or",
        Kw::True => "True",
        Kw::False => "False",
        Kw::None => "None",
        Kw::Pass => "pass",
    }
}

fn describe(tok: &Tok) -> String {
    match tok {
        Tok::Name(n) => format!("name `{n}`"),
        Tok::Int(v) => format!("number `{v}`"),
        Tok::Float(v) => format!("number `{v}`"),
        Tok::Str(_) | Tok::FStr(_) => "a string".into(),
        Tok::Kw(kw) => format!("`{}`", kw_text(*kw)),
        Tok::Banned(w) => format!("`{w}`"),
        Tok::Op(o) => format!("`{o}`"),
        Tok::Newline => "end of line".into(),
        Tok::Indent => "indent".into(),
        Tok::Dedent => "dedent".into(),
        Tok::Eof => "end of input".into(),
    }
}
