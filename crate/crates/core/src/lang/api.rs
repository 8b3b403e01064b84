//! Vision API table presented to programs.

use std::collections::BTreeSet;
use std::rc::Rc;

use thiserror::Error;

use super::value::Value;
use super::RuntimeError;
use crate::vision::{ImageHandle, VisionProvider};

/// Names callable by programs, in the order the API reference documents them.
pub const API_NAMES: [&str; 5] = ["get_object_boxes", "query", "exists", "count", "crop"];

pub fn is_api(name: &str) -> bool {
    API_NAMES.contains(&name)
}

#[derive(Debug, Error, Clone, PartialEq, Eq)]
#[error("API reference and API table disagree: missing from reference {missing:?}, undeclared in table {extra:?}")]
pub struct ParityError {
    /// Bound names the reference does not document.
    pub missing: Vec<String>,
    /// Documented names with no binding.
    pub extra: Vec<String>,
}

/// Names declared by `def NAME(` lines of an API reference text.
pub fn declared_names(p_api: &str) -> BTreeSet<String> {
    p_api
        .lines()
        .filter_map(|line| line.trim_start().strip_prefix("def "))
        .filter_map(|rest| rest.split_once('(').map(|(name, _)| name.trim().to_string()))
        .filter(|name| !name.is_empty())
        .collect()
}

/// Checks that `p_api` documents exactly the bound API names.
pub fn check_parity(p_api: &str) -> Result<(), ParityError> {
    let declared = declared_names(p_api);
    let bound: BTreeSet<String> = API_NAMES.iter().map(|s| s.to_string()).collect();
    let missing: Vec<String> = bound.difference(&declared).cloned().collect();
    let extra: Vec<String> = declared.difference(&bound).cloned().collect();
    if missing.is_empty() && extra.is_empty() {
        Ok(())
    } else {
        Err(ParityError { missing, extra })
    }
}

/// Proxy from program calls to a provider.
pub struct ApiTable<'a> {
    provider: &'a dyn VisionProvider,
}

pub fn bind_api(provider: &dyn VisionProvider) -> ApiTable<'_> {
    ApiTable { provider }
}

fn image_arg<'v>(func: &str, v: &'v Value) -> Result<&'v ImageHandle, RuntimeError> {
    match v {
        Value::Image(h) => Ok(h),
        other => Err(RuntimeError::type_error(format!("{func}() expects an image, got {}", other.kind()))),
    }
}

fn str_arg<'v>(func: &str, what: &str, v: &'v Value) -> Result<&'v str, RuntimeError> {
    match v {
        Value::Str(s) => Ok(s),
        other => Err(RuntimeError::type_error(format!("{func}() {what} must be str, got {}", other.kind()))),
    }
}

impl ApiTable<'_> {
    pub fn names(&self) -> &'static [&'static str] {
        &API_NAMES
    }

    pub fn call(&self, func: &str, args: &[Value]) -> Result<Value, RuntimeError> {
        if !is_api(func) {
            return Err(RuntimeError::name_error(format!("name '{func}' is not defined")));
        }
        if args.len() != 2 {
            return Err(RuntimeError::type_error(format!("{func}() takes 2 arguments, got {}", args.len())));
        }
        let image = image_arg(func, &args[0])?;
        let p = self.provider;
        let api = |e| RuntimeError::api(format!("{func}: {e}"));
        match func {
            "get_object_boxes" => {
                let name = str_arg(func, "object_name", &args[1])?;
                let boxes = p.get_object_boxes(image, name).map_err(api)?;
                Ok(Value::list(boxes.into_iter().map(|b| Value::Box(Rc::new(b))).collect()))
            }
            "query" => {
                let question = str_arg(func, "question", &args[1])?;
                Ok(Value::str(p.query(image, question).map_err(api)?))
            }
            "exists" => {
                let name = str_arg(func, "object_name", &args[1])?;
                Ok(Value::Bool(p.exists(image, name).map_err(api)?))
            }
            "count" => {
                let name = str_arg(func, "object_name", &args[1])?;
                let n = p.count(image, name).map_err(api)?;
                Ok(Value::Int(i64::try_from(n).map_err(|_| RuntimeError::api("count out of range"))?))
            }
            "crop" => {
                let Value::Box(bbox) = &args[1] else {
                    return Err(RuntimeError::type_error(format!("crop() expects a box, got {}", args[1].kind())));
                };
                Ok(Value::Image(p.crop(image, bbox).map_err(api)?))
            }
            _ => unreachable!("checked by is_api"),
        }
    }
}
