//! Step-budgeted tree-walking evaluator.

use std::collections::HashMap;
use std::rc::Rc;

use super::api::{is_api, ApiTable};
use super::ast::*;
use super::builtins;
use super::value::Value;
use super::RuntimeError;

/// Largest list a program may build.
pub const MAX_LIST_LEN: u64 = 100_000;
/// Largest string a program may build, in bytes.
pub const MAX_STR_BYTES: usize = 1_000_000;

/// Step accounting shared by the evaluator and builtins.
#[derive(Debug)]
pub struct Meter {
    pub steps: u64,
    pub budget: u64,
}

impl Meter {
    pub fn charge(&mut self, n: u64) -> Result<(), RuntimeError> {
        self.steps = self.steps.saturating_add(n);
        if self.steps > self.budget {
            return Err(RuntimeError::budget(format!("step budget of {} exhausted", self.budget)));
        }
        Ok(())
    }

    pub fn check_list_len(&self, len: u64) -> Result<(), RuntimeError> {
        if len > MAX_LIST_LEN {
            return Err(RuntimeError::budget(format!("list of {len} elements exceeds the {MAX_LIST_LEN} cap")));
        }
        Ok(())
    }

    pub fn check_str(&mut self, s: &str) -> Result<(), RuntimeError> {
        if s.len() > MAX_STR_BYTES {
            return Err(RuntimeError::budget(format!("string of {} bytes exceeds the cap", s.len())));
        }
        self.charge((s.len() / 64) as u64)
    }
}

enum Flow {
    Normal,
    Return(Value),
}

pub struct Interp<'a> {
    pub meter: Meter,
    api: ApiTable<'a>,
    env: HashMap<String, Value>,
    line: usize,
}

impl<'a> Interp<'a> {
    pub fn new(api: ApiTable<'a>, budget: u64, env: HashMap<String, Value>) -> Self {
        Self { meter: Meter { steps: 0, budget }, api, env, line: 0 }
    }

    pub fn line(&self) -> usize {
        self.line
    }

    /// Runs the function body; falling off the end returns None.
    pub fn run(&mut self, body: &[Stmt]) -> Result<Value, RuntimeError> {
        match self.block(body)? {
            Flow::Return(v) => Ok(v),
            Flow::Normal => Ok(Value::None),
        }
    }

    fn block(&mut self, stmts: &[Stmt]) -> Result<Flow, RuntimeError> {
        for stmt in stmts {
            if let Flow::Return(v) = self.stmt(stmt)? {
                return Ok(Flow::Return(v));
            }
        }
        Ok(Flow::Normal)
    }

    fn stmt(&mut self, stmt: &Stmt) -> Result<Flow, RuntimeError> {
        self.line = stmt.line;
        self.meter.charge(1)?;
        match &stmt.kind {
            StmtKind::Assign { target, value } => {
                let v = self.expr(value)?;
                self.env.insert(target.clone(), v);
            }
            StmtKind::AugAssign { target, op, value } => {
                let current = self.lookup(target)?;
                let rhs = self.expr(value)?;
                let v = self.binary(*op, current, rhs)?;
                self.env.insert(target.clone(), v);
            }
            StmtKind::Return(value) => {
                let v = match value {
                    Some(e) => self.expr(e)?,
                    None => Value::None,
                };
                return Ok(Flow::Return(v));
            }
            StmtKind::If { arms, orelse } => {
                for (cond, body) in arms {
                    if self.expr(cond)?.truthy() {
                        return self.block(body);
                    }
                }
                if let Some(body) = orelse {
                    return self.block(body);
                }
            }
            StmtKind::For { var, iter, body } => {
                let items: Rc<Vec<Value>> = match self.expr(iter)? {
                    Value::List(items) => items,
                    Value::Str(s) => {
                        self.meter.charge((s.len() / 64) as u64)?;
                        Rc::new(s.chars().map(|c| Value::str(c.to_string())).collect())
                    }
                    other => return Err(RuntimeError::type_error(format!("cannot iterate over {}", other.kind()))),
                };
                for item in items.iter() {
                    self.meter.charge(1)?;
                    self.env.insert(var.clone(), item.clone());
                    if let Flow::Return(v) = self.block(body)? {
                        return Ok(Flow::Return(v));
                    }
                }
            }
            StmtKind::Expr(e) => {
                self.expr(e)?;
            }
            StmtKind::Pass => {}
        }
        Ok(Flow::Normal)
    }

    fn lookup(&self, name: &str) -> Result<Value, RuntimeError> {
        if let Some(v) = self.env.get(name) {
            return Ok(v.clone());
        }
        if builtins::is_builtin(name) || is_api(name) {
            return Err(RuntimeError::type_error(format!("function '{name}' used as a value")));
        }
        Err(RuntimeError::name_error(format!("name '{name}' is not defined")))
    }

    pub fn expr(&mut self, expr: &Expr) -> Result<Value, RuntimeError> {
        self.meter.charge(1)?;
        match expr {
            Expr::Str(s) => {
                self.meter.charge((s.len() / 64) as u64)?;
                Ok(Value::str(s.as_str()))
            }
            Expr::Int(v) => Ok(Value::Int(*v)),
            Expr::Float(v) => Ok(Value::Float(*v)),
            Expr::Bool(b) => Ok(Value::Bool(*b)),
            Expr::None => Ok(Value::None),
            Expr::List(items) => {
                let values = items.iter().map(|e| self.expr(e)).collect::<Result<Vec<_>, _>>()?;
                Ok(Value::list(values))
            }
            Expr::Name(n) => self.lookup(n),
            Expr::Call { func, args } => self.call(func, args),
            Expr::Index { target, index } => {
                let target = self.expr(target)?;
                let index = self.expr(index)?;
                self.index(target, index)
            }
            Expr::Unary { op: UnaryOp::Not, operand } => Ok(Value::Bool(!self.expr(operand)?.truthy())),
            Expr::Unary { op: UnaryOp::Neg, operand } => match self.expr(operand)? {
                Value::Int(v) => v.checked_neg().map(Value::Int).ok_or_else(overflow),
                Value::Float(v) => Ok(Value::Float(-v)),
                other => Err(RuntimeError::type_error(format!("bad operand for unary -: {}", other.kind()))),
            },
            Expr::Binary { op, lhs, rhs } => {
                let l = self.expr(lhs)?;
                let r = self.expr(rhs)?;
                self.binary(*op, l, r)
            }
            Expr::Logic { op, lhs, rhs } => {
                let l = self.expr(lhs)?;
                match (op, l.truthy()) {
                    (BoolOp::And, false) | (BoolOp::Or, true) => Ok(l),
                    _ => self.expr(rhs),
                }
            }
            Expr::Compare { first, rest } => {
                let mut lhs = self.expr(first)?;
                for (op, e) in rest {
                    let rhs = self.expr(e)?;
                    if !self.compare(*op, &lhs, &rhs)? {
                        return Ok(Value::Bool(false));
                    }
                    lhs = rhs;
                }
                Ok(Value::Bool(true))
            }
            Expr::IfElse { cond, then, orelse } => {
                if self.expr(cond)?.truthy() {
                    self.expr(then)
                } else {
                    self.expr(orelse)
                }
            }
            Expr::FString(parts) => {
                let mut out = String::new();
                for part in parts {
                    match part {
                        FPart::Lit(s) => out.push_str(s),
                        FPart::Expr(e) => {
                            let v = self.expr(e)?;
                            if let Value::List(items) = &v {
                                self.meter.charge(items.len() as u64)?;
                            }
                            out.push_str(&v.to_py_str()?);
                        }
                    }
                    if out.len() > MAX_STR_BYTES {
                        return Err(RuntimeError::budget("f-string exceeds the string cap"));
                    }
                }
                self.meter.check_str(&out)?;
                Ok(Value::str(out))
            }
        }
    }

    fn call(&mut self, func: &str, args: &[Expr]) -> Result<Value, RuntimeError> {
        if self.env.contains_key(func) {
            return Err(RuntimeError::type_error(format!("'{func}' is a variable, not a function")));
        }
        let known_builtin = builtins::is_builtin(func);
        if !known_builtin && !is_api(func) {
            return Err(RuntimeError::name_error(format!("name '{func}' is not defined")));
        }
        let values = args.iter().map(|e| self.expr(e)).collect::<Result<Vec<_>, _>>()?;
        if known_builtin {
            builtins::call(func, values, &mut self.meter)
        } else {
            let result = self.api.call(func, &values)?;
            if let Value::List(items) = &result {
                self.meter.charge(items.len() as u64)?;
            }
            Ok(result)
        }
    }

    fn index(&mut self, target: Value, index: Value) -> Result<Value, RuntimeError> {
        let Value::Int(i) = index else {
            return Err(RuntimeError::type_error(format!("indices must be int, not {}", index.kind())));
        };
        let resolve = |len: usize| -> Result<usize, RuntimeError> {
            let len = len as i64;
            let k = if i < 0 { i + len } else { i };
            if (0..len).contains(&k) {
                Ok(k as usize)
            } else {
                Err(RuntimeError::type_error(format!("index {i} out of range")))
            }
        };
        match &target {
            Value::List(items) => Ok(items[resolve(items.len())?].clone()),
            Value::Str(s) => {
                self.meter.charge((s.len() / 64) as u64)?;
                let chars: Vec<char> = s.chars().collect();
                Ok(Value::str(chars[resolve(chars.len())?].to_string()))
            }
            Value::Box(b) => Ok(Value::Float(b.coords()[resolve(4)?])),
            other => Err(RuntimeError::type_error(format!("{} is not indexable", other.kind()))),
        }
    }

    fn binary(&mut self, op: BinOp, l: Value, r: Value) -> Result<Value, RuntimeError> {
        use Value::{Float, Int};
        match (op, &l, &r) {
            (BinOp::Add, Value::Str(a), Value::Str(b)) => {
                let len = a.len() + b.len();
                if len > MAX_STR_BYTES {
                    return Err(RuntimeError::budget("string exceeds the cap"));
                }
                self.meter.charge((len / 64) as u64)?;
                let mut s = String::with_capacity(len);
                s.push_str(a);
                s.push_str(b);
                return Ok(Value::str(s));
            }
            (BinOp::Add, Value::List(a), Value::List(b)) => {
                let len = (a.len() + b.len()) as u64;
                self.meter.check_list_len(len)?;
                self.meter.charge(len)?;
                let mut items = Vec::with_capacity(len as usize);
                items.extend(a.iter().cloned());
                items.extend(b.iter().cloned());
                return Ok(Value::list(items));
            }
            _ => {}
        }
        match (&l, &r) {
            (Int(a), Int(b)) => int_op(op, *a, *b),
            (Int(_) | Float(_), Int(_) | Float(_)) => {
                Ok(Float(float_op(op, l.as_f64().expect("numeric"), r.as_f64().expect("numeric"))?))
            }
            _ => Err(RuntimeError::type_error(format!(
                "unsupported operand types for {}: {} and {}",
                op_symbol(op),
                l.kind(),
                r.kind()
            ))),
        }
    }

    fn compare(&mut self, op: CmpOp, l: &Value, r: &Value) -> Result<bool, RuntimeError> {
        use std::cmp::Ordering::*;
        Ok(match op {
            CmpOp::Eq => {
                self.charge_eq(l, r)?;
                l.equals(r)
            }
            CmpOp::Ne => {
                self.charge_eq(l, r)?;
                !l.equals(r)
            }
            CmpOp::Lt => l.compare(r)? == Less,
            CmpOp::Le => l.compare(r)? != Greater,
            CmpOp::Gt => l.compare(r)? == Greater,
            CmpOp::Ge => l.compare(r)? != Less,
            CmpOp::In => self.contains(r, l)?,
            CmpOp::NotIn => !self.contains(r, l)?,
        })
    }

    fn charge_eq(&mut self, l: &Value, r: &Value) -> Result<(), RuntimeError> {
        match (l, r) {
            (Value::List(a), Value::List(b)) => self.meter.charge(a.len().min(b.len()) as u64),
            (Value::Str(a), Value::Str(b)) => self.meter.charge((a.len().min(b.len()) / 64) as u64),
            _ => Ok(()),
        }
    }

    fn contains(&mut self, container: &Value, item: &Value) -> Result<bool, RuntimeError> {
        match container {
            Value::List(items) => {
                self.meter.charge(items.len() as u64)?;
                Ok(items.iter().any(|x| x.equals(item)))
            }
            Value::Str(hay) => match item {
                Value::Str(needle) => {
                    self.meter.charge((hay.len() / 64) as u64)?;
                    Ok(hay.contains(needle.as_ref()))
                }
                other => Err(RuntimeError::type_error(format!("'in <str>' requires str, not {}", other.kind()))),
            },
            other => Err(RuntimeError::type_error(format!("'in' over {}", other.kind()))),
        }
    }
}

fn overflow() -> RuntimeError {
    RuntimeError::type_error("integer overflow")
}

fn zero_div() -> RuntimeError {
    RuntimeError::type_error("division by zero")
}

fn op_symbol(op: BinOp) -> &'static str {
    match op {
        BinOp::Add => "+",
        BinOp::Sub => "-",
        BinOp::Mul => "*",
        BinOp::Div => "/",
        BinOp::FloorDiv => "//",
        BinOp::Mod => "%",
        BinOp::Pow => "**",
    }
}

fn int_op(op: BinOp, a: i64, b: i64) -> Result<Value, RuntimeError> {
    let v = match op {
        BinOp::Add => a.checked_add(b).ok_or_else(overflow)?,
        BinOp::Sub => a.checked_sub(b).ok_or_else(overflow)?,
        BinOp::Mul => a.checked_mul(b).ok_or_else(overflow)?,
        BinOp::Div => {
            if b == 0 {
                return Err(zero_div());
            }
            return Ok(Value::Float(a as f64 / b as f64));
        }
        BinOp::FloorDiv => {
            if b == 0 {
                return Err(zero_div());
            }
            let q = a.checked_div(b).ok_or_else(overflow)?;
            if (a % b != 0) && ((a < 0) != (b < 0)) { q - 1 } else { q }
        }
        BinOp::Mod => {
            if b == 0 {
                return Err(zero_div());
            }
            let r = a.checked_rem(b).ok_or_else(overflow)?;
            if r != 0 && ((r < 0) != (b < 0)) { r + b } else { r }
        }
        BinOp::Pow => {
            if b < 0 {
                return Ok(Value::Float(float_op(BinOp::Pow, a as f64, b as f64)?));
            }
            let exp = u32::try_from(b).map_err(|_| overflow())?;
            a.checked_pow(exp).ok_or_else(overflow)?
        }
    };
    Ok(Value::Int(v))
}

fn float_op(op: BinOp, a: f64, b: f64) -> Result<f64, RuntimeError> {
    let v = match op {
        BinOp::Add => a + b,
        BinOp::Sub => a - b,
        BinOp::Mul => a * b,
        BinOp::Div => {
            if b == 0.0 {
                return Err(zero_div());
            }
            a / b
        }
        BinOp::FloorDiv => {
            if b == 0.0 {
                return Err(zero_div());
            }
            (a / b).floor()
        }
        BinOp::Mod => {
            if b == 0.0 {
                return Err(zero_div());
            }
            let r = a % b;
            if r != 0.0 && ((r < 0.0) != (b < 0.0)) { r + b } else { r }
        }
        BinOp::Pow => {
            if a == 0.0 && b < 0.0 {
                return Err(zero_div());
            }
            let v = a.powf(b);
            if v.is_nan() && !a.is_nan() && !b.is_nan() {
                return Err(RuntimeError::type_error("complex result of **"));
            }
            v
        }
    };
    if v.is_infinite() && a.is_finite() && b.is_finite() {
        return Err(RuntimeError::type_error("float overflow"));
    }
    Ok(v)
}
