//! Syntax tree of the program subset.

/// A parsed program: exactly one `def execute_command(<image>[, <image>]):`.
#[derive(Debug, Clone, PartialEq)]
pub struct Program {
    pub params: Vec<String>,
    pub body: Vec<Stmt>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Stmt {
    pub line: usize,
    pub kind: StmtKind,
}

#[derive(Debug, Clone, PartialEq)]
pub enum StmtKind {
    Assign { target: String, value: Expr },
    /// `target op= value`
    AugAssign { target: String, op: BinOp, value: Expr },
    Return(Option<Expr>),
    /// `if`/`elif` arms in order, then the optional `else` block.
    If { arms: Vec<(Expr, Vec<Stmt>)>, orelse: Option<Vec<Stmt>> },
    For { var: String, iter: Expr, body: Vec<Stmt> },
    Expr(Expr),
    Pass,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BinOp {
    Add,
    Sub,
    Mul,
    Div,
    FloorDiv,
    Mod,
    Pow,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CmpOp {
    Eq,
    Ne,
    Lt,
    Le,
    Gt,
    Ge,
    In,
    NotIn,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum UnaryOp {
    Not,
    Neg,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BoolOp {
    And,
    Or,
}

#[derive(Debug, Clone, PartialEq)]
pub enum FPart {
    Lit(String),
    Expr(Expr),
}

#[derive(Debug, Clone, PartialEq)]
pub enum Expr {
    Str(String),
    Int(i64),
    Float(f64),
    Bool(bool),
    None,
    List(Vec<Expr>),
    Name(String),
    Call { func: String, args: Vec<Expr> },
    Index { target: Box<Expr>, index: Box<Expr> },
    Unary { op: UnaryOp, operand: Box<Expr> },
    Binary { op: BinOp, lhs: Box<Expr>, rhs: Box<Expr> },
    Logic { op: BoolOp, lhs: Box<Expr>, rhs: Box<Expr> },
    /// `first op1 e1 op2 e2 ...`, evaluated pairwise with short-circuit.
    Compare { first: Box<Expr>, rest: Vec<(CmpOp, Expr)> },
    IfElse { cond: Box<Expr>, then: Box<Expr>, orelse: Box<Expr> },
    FString(Vec<FPart>),
}
