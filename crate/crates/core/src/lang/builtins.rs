//! The fixed builtin table.

use std::cmp::Ordering;

use super::interp::Meter;
use super::value::Value;
use super::RuntimeError;

pub const BUILTIN_NAMES: [&str; 10] = ["len", "str", "int", "float", "bool", "abs", "min", "max", "sorted", "range"];

pub fn is_builtin(name: &str) -> bool {
    BUILTIN_NAMES.contains(&name)
}

fn arity(name: &str, args: &[Value], allowed: std::ops::RangeInclusive<usize>) -> Result<(), RuntimeError> {
    if allowed.contains(&args.len()) {
        return Ok(());
    }
    let want = if allowed.start() == allowed.end() {
        allowed.start().to_string()
    } else {
        format!("{} to {}", allowed.start(), allowed.end())
    };
    Err(RuntimeError::type_error(format!("{name}() takes {want} argument(s), got {}", args.len())))
}

pub fn call(name: &str, args: Vec<Value>, meter: &mut Meter) -> Result<Value, RuntimeError> {
    match name {
        "len" => {
            arity(name, &args, 1..=1)?;
            match &args[0] {
                Value::Str(s) => Ok(Value::Int(s.chars().count() as i64)),
                Value::List(items) => Ok(Value::Int(items.len() as i64)),
                other => Err(RuntimeError::type_error(format!("len() of {}", other.kind()))),
            }
        }
        "str" => {
            arity(name, &args, 1..=1)?;
            if let Value::List(items) = &args[0] {
                meter.charge(items.len() as u64)?;
            }
            let text = args[0].to_py_str()?;
            meter.check_str(&text)?;
            Ok(Value::str(text))
        }
        "int" => {
            arity(name, &args, 1..=1)?;
            match &args[0] {
                Value::Int(v) => Ok(Value::Int(*v)),
                Value::Bool(b) => Ok(Value::Int(*b as i64)),
                Value::Float(v) => {
                    let t = v.trunc();
                    if !t.is_finite() || t < i64::MIN as f64 || t >= i64::MAX as f64 {
                        return Err(RuntimeError::type_error(format!("cannot convert {v} to int")));
                    }
                    Ok(Value::Int(t as i64))
                }
                Value::Str(s) => s
                    .trim()
                    .parse::<i64>()
                    .map(Value::Int)
                    .map_err(|_| RuntimeError::type_error(format!("invalid literal for int(): {s:?}"))),
                other => Err(RuntimeError::type_error(format!("int() of {}", other.kind()))),
            }
        }
        "float" => {
            arity(name, &args, 1..=1)?;
            match &args[0] {
                Value::Int(v) => Ok(Value::Float(*v as f64)),
                Value::Float(v) => Ok(Value::Float(*v)),
                Value::Bool(b) => Ok(Value::Float(*b as i64 as f64)),
                Value::Str(s) => s
                    .trim()
                    .parse::<f64>()
                    .map(Value::Float)
                    .map_err(|_| RuntimeError::type_error(format!("could not convert string to float: {s:?}"))),
                other => Err(RuntimeError::type_error(format!("float() of {}", other.kind()))),
            }
        }
        "bool" => {
            arity(name, &args, 1..=1)?;
            Ok(Value::Bool(args[0].truthy()))
        }
        "abs" => {
            arity(name, &args, 1..=1)?;
            match &args[0] {
                Value::Int(v) => v
                    .checked_abs()
                    .map(Value::Int)
                    .ok_or_else(|| RuntimeError::type_error("integer overflow")),
                Value::Float(v) => Ok(Value::Float(v.abs())),
                other => Err(RuntimeError::type_error(format!("abs() of {}", other.kind()))),
            }
        }
        "min" | "max" => {
            if args.is_empty() {
                return Err(RuntimeError::type_error(format!("{name}() expects at least 1 argument")));
            }
            let items: Vec<Value> = if args.len() == 1 {
                match &args[0] {
                    Value::List(items) => items.as_ref().clone(),
                    other => return Err(RuntimeError::type_error(format!("{name}() of {}", other.kind()))),
                }
            } else {
                args
            };
            meter.charge(items.len() as u64)?;
            let want = if name == "min" { Ordering::Less } else { Ordering::Greater };
            let mut best: Option<&Value> = None;
            for item in &items {
                match best {
                    None => {
                        // Validates single-element sequences too.
                        item.compare(item)?;
                        best = Some(item);
                    }
                    Some(b) => {
                        if item.compare(b)? == want {
                            best = Some(item);
                        }
                    }
                }
            }
            best.cloned().ok_or_else(|| RuntimeError::type_error(format!("{name}() of an empty list")))
        }
        "sorted" => {
            arity(name, &args, 1..=1)?;
            let mut items: Vec<Value> = match &args[0] {
                Value::List(items) => items.as_ref().clone(),
                Value::Str(s) => s.chars().map(|c| Value::str(c.to_string())).collect(),
                other => return Err(RuntimeError::type_error(format!("sorted() of {}", other.kind()))),
            };
            meter.charge(items.len() as u64)?;
            if let Some(first) = items.first() {
                for item in &items {
                    first.compare(item)?;
                }
            }
            // Comparisons between validated elements cannot fail except for nan.
            let mut failure = None;
            items.sort_by(|a, b| {
                a.compare(b).unwrap_or_else(|e| {
                    failure.get_or_insert(e);
                    Ordering::Equal
                })
            });
            match failure {
                Some(e) => Err(e),
                None => Ok(Value::list(items)),
            }
        }
        "range" => {
            arity(name, &args, 1..=3)?;
            let ints = args
                .iter()
                .map(|a| match a {
                    Value::Int(v) => Ok(*v),
                    other => Err(RuntimeError::type_error(format!("range() argument must be int, not {}", other.kind()))),
                })
                .collect::<Result<Vec<i64>, _>>()?;
            let (start, stop, step) = match ints[..] {
                [stop] => (0, stop, 1),
                [start, stop] => (start, stop, 1),
                [start, stop, step] => (start, stop, step),
                _ => unreachable!("arity checked"),
            };
            if step == 0 {
                return Err(RuntimeError::type_error("range() step must not be zero"));
            }
            let (start, stop, step) = (start as i128, stop as i128, step as i128);
            let len = if step > 0 {
                if stop > start { (stop - start + step - 1) / step } else { 0 }
            } else if start > stop {
                (start - stop - step - 1) / -step
            } else {
                0
            };
            let len = u64::try_from(len).expect("non-negative length");
            meter.check_list_len(len)?;
            meter.charge(len)?;
            Ok(Value::list((0..len as i128).map(|k| Value::Int((start + k * step) as i64)).collect()))
        }
        _ => Err(RuntimeError::name_error(format!("name '{name}' is not defined"))),
    }
}
