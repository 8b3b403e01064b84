//! Runtime values and their conversions.

use std::cmp::Ordering;
use std::fmt::Write;
use std::rc::Rc;

use super::RuntimeError;
use crate::vision::{BoundingBox, ImageHandle};

#[derive(Debug, Clone)]
pub enum Value {
    Str(Rc<str>),
    Int(i64),
    Float(f64),
    Bool(bool),
    None,
    List(Rc<Vec<Value>>),
    Image(ImageHandle),
    Box(Rc<BoundingBox>),
}

impl Value {
    pub fn str(s: impl Into<Rc<str>>) -> Self {
        Value::Str(s.into())
    }

    pub fn list(items: Vec<Value>) -> Self {
        Value::List(Rc::new(items))
    }

    pub fn kind(&self) -> &'static str {
        match self {
            Value::Str(_) => "str",
            Value::Int(_) => "int",
            Value::Float(_) => "float",
            Value::Bool(_) => "bool",
            Value::None => "None",
            Value::List(_) => "list",
            Value::Image(_) => "image",
            Value::Box(_) => "box",
        }
    }

    pub fn truthy(&self) -> bool {
        match self {
            Value::Str(s) => !s.is_empty(),
            Value::Int(v) => *v != 0,
            Value::Float(v) => *v != 0.0,
            Value::Bool(b) => *b,
            Value::None => false,
            Value::List(items) => !items.is_empty(),
            Value::Image(_) | Value::Box(_) => true,
        }
    }

    pub fn as_f64(&self) -> Option<f64> {
        match self {
            Value::Int(v) => Some(*v as f64),
            Value::Float(v) => Some(*v),
            _ => None,
        }
    }

    /// Structural equality; ints and floats compare numerically, bools only
    /// equal bools.
    pub fn equals(&self, other: &Value) -> bool {
        match (self, other) {
            (Value::Int(a), Value::Int(b)) => a == b,
            (Value::Int(_) | Value::Float(_), Value::Int(_) | Value::Float(_)) => self.as_f64() == other.as_f64(),
            (Value::Str(a), Value::Str(b)) => a == b,
            (Value::Bool(a), Value::Bool(b)) => a == b,
            (Value::None, Value::None) => true,
            (Value::List(a), Value::List(b)) => a.len() == b.len() && a.iter().zip(b.iter()).all(|(x, y)| x.equals(y)),
            (Value::Image(a), Value::Image(b)) => a == b,
            (Value::Box(a), Value::Box(b)) => a == b,
            _ => false,
        }
    }

    /// Ordering for numerics against numerics and strings against strings.
    pub fn compare(&self, other: &Value) -> Result<Ordering, RuntimeError> {
        match (self, other) {
            (Value::Int(a), Value::Int(b)) => Ok(a.cmp(b)),
            (Value::Str(a), Value::Str(b)) => Ok(a.cmp(b)),
            (Value::Int(_) | Value::Float(_), Value::Int(_) | Value::Float(_)) => {
                let (a, b) = (self.as_f64().expect("numeric"), other.as_f64().expect("numeric"));
                a.partial_cmp(&b)
                    .ok_or_else(|| RuntimeError::type_error("cannot order nan"))
            }
            _ => Err(RuntimeError::type_error(format!(
                "cannot order {} and {}",
                self.kind(),
                other.kind()
            ))),
        }
    }

    /// Text produced by the `str` builtin and f-string interpolation.
    pub fn to_py_str(&self) -> Result<String, RuntimeError> {
        match self {
            Value::Str(s) => Ok(s.to_string()),
            _ => {
                let mut out = String::new();
                self.write_repr(&mut out)?;
                Ok(out)
            }
        }
    }

    fn write_repr(&self, out: &mut String) -> Result<(), RuntimeError> {
        match self {
            Value::Str(s) => write_str_repr(out, s),
            Value::Int(v) => {
                let _ = write!(out, "{v}");
            }
            Value::Float(v) => out.push_str(&float_repr(*v)),
            Value::Bool(true) => out.push_str("True"),
            Value::Bool(false) => out.push_str("False"),
            Value::None => out.push_str("None"),
            Value::List(items) => {
                out.push('[');
                for (i, item) in items.iter().enumerate() {
                    if i > 0 {
                        out.push_str(", ");
                    }
                    item.write_repr(out)?;
                }
                out.push(']');
            }
            Value::Image(_) | Value::Box(_) => {
                return Err(RuntimeError::type_error(format!("{} has no text form", self.kind())));
            }
        }
        Ok(())
    }

    /// Answer text of a returned value, before normalization.
    pub fn to_answer(&self) -> Result<String, RuntimeError> {
        match self {
            Value::Str(s) => Ok(s.to_string()),
            Value::Int(v) => Ok(v.to_string()),
            Value::Float(v) => Ok(float_answer(*v)),
            Value::Bool(true) => Ok("yes".into()),
            Value::Bool(false) => Ok("no".into()),
            Value::List(items) => {
                let parts = items.iter().map(Value::to_answer).collect::<Result<Vec<_>, _>>()?;
                Ok(parts.join(", "))
            }
            Value::None => Err(RuntimeError::type_error("program returned None")),
            Value::Image(_) | Value::Box(_) => {
                Err(RuntimeError::type_error(format!("program returned a {}", self.kind())))
            }
        }
    }
}

fn write_str_repr(out: &mut String, s: &str) {
    let quote = if s.contains('\'') && !s.contains('"') { '"' } else { '\'' };
    out.push(quote);
    for c in s.chars() {
        match c {
            '\\' => out.push_str("\\\\"),
            '\n' => out.push_str("\\n"),
            '\t' => out.push_str("\\t"),
            '\r' => out.push_str("\\r"),
            c if c == quote => {
                out.push('\\');
                out.push(c);
            }
            c => out.push(c),
        }
    }
    out.push(quote);
}

/// Integral floats print as integers; everything else uses the shortest
/// round-trip form.
pub fn float_answer(v: f64) -> String {
    if v.is_finite() && v.fract() == 0.0 && v.abs() < 1e16 {
        format!("{}", v as i64)
    } else {
        float_repr(v)
    }
}

/// Shortest round-trip float text with the exponent thresholds of Python's
/// `repr`: fixed notation for exponents in `-4..16`, scientific otherwise.
pub fn float_repr(v: f64) -> String {
    if v.is_nan() {
        return "nan".into();
    }
    if v.is_infinite() {
        return if v > 0.0 { "inf".into() } else { "-inf".into() };
    }
    if v == 0.0 {
        return if v.is_sign_negative() { "-0.0".into() } else { "0.0".into() };
    }
    let sci = format!("{:e}", v.abs());
    let (mantissa, exp) = sci.split_once('e').expect("`{:e}` always has an exponent");
    let exp: i32 = exp.parse().expect("integer exponent");
    let digits: String = mantissa.chars().filter(char::is_ascii_digit).collect();
    let sign = if v < 0.0 { "-" } else { "" };
    if (-4..16).contains(&exp) {
        let body = if exp >= 0 {
            let int_len = exp as usize + 1;
            if digits.len() <= int_len {
                format!("{digits}{}.0", "0".repeat(int_len - digits.len()))
            } else {
                format!("{}.{}", &digits[..int_len], &digits[int_len..])
            }
        } else {
            format!("0.{}{digits}", "0".repeat((-exp - 1) as usize))
        };
        format!("{sign}{body}")
    } else {
        let mant = if digits.len() == 1 { digits.clone() } else { format!("{}.{}", &digits[..1], &digits[1..]) };
        let esign = if exp < 0 { '-' } else { '+' };
        format!("{sign}{mant}e{esign}{:02}", exp.abs())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn float_repr_matches_python() {
        for (v, want) in [
            (2.0, "2.0"),
            (0.1, "0.1"),
            (1.5, "1.5"),
            (-3.25, "-3.25"),
            (1e16, "1e+16"),
            (1.5e16, "1.5e+16"),
            (123456789012345.6, "123456789012345.6"),
            (0.0001, "0.0001"),
            (0.00001, "1e-05"),
            (1.0 / 3.0, "0.3333333333333333"),
            (-0.0, "-0.0"),
            (f64::INFINITY, "inf"),
        ] {
            assert_eq!(float_repr(v), want, "{v}");
        }
    }

    #[test]
    fn answers() {
        assert_eq!(Value::Bool(true).to_answer().unwrap(), "yes");
        assert_eq!(Value::Bool(false).to_answer().unwrap(), "no");
        assert_eq!(Value::Float(2.0).to_answer().unwrap(), "2");
        assert_eq!(Value::Float(2.5).to_answer().unwrap(), "2.5");
        assert_eq!(Value::Int(-7).to_answer().unwrap(), "-7");
        let l = Value::list(vec![Value::str("cat"), Value::Int(2), Value::Bool(true)]);
        assert_eq!(l.to_answer().unwrap(), "cat, 2, yes");
        assert!(Value::None.to_answer().is_err());
    }

    #[test]
    fn py_str() {
        let l = Value::list(vec![Value::str("it's"), Value::str("a"), Value::Float(2.0), Value::None, Value::Bool(false)]);
        assert_eq!(l.to_py_str().unwrap(), "[\"it's\", 'a', 2.0, None, False]");
        assert_eq!(Value::Bool(true).to_py_str().unwrap(), "True");
        assert!(Value::Image(ImageHandle::new("x")).to_py_str().is_err());
    }

    #[test]
    fn equality_and_order() {
        assert!(Value::Int(1).equals(&Value::Float(1.0)));
        assert!(!Value::Bool(true).equals(&Value::Int(1)));
        assert!(Value::list(vec![Value::Int(1)]).equals(&Value::list(vec![Value::Float(1.0)])));
        assert_eq!(Value::str("a").compare(&Value::str("b")).unwrap(), Ordering::Less);
        assert!(Value::str("a").compare(&Value::Int(1)).is_err());
        assert!(Value::Bool(true).compare(&Value::Bool(false)).is_err());
        assert!(!Value::str("").truthy() && !Value::list(vec![]).truthy() && !Value::Float(0.0).truthy());
    }
}
