//! Terse constructors for IR JSON used by the generator.

use serde_json::{json, Value};

pub fn var(name: &str) -> Value {
    json!(name)
}

pub fn string(s: &str) -> Value {
    json!({ "str": s })
}

pub fn int(i: i64) -> Value {
    json!(i)
}

pub fn null() -> Value {
    Value::Null
}

fn invoke(dispatch: &str, target: &str, receiver: Option<&str>, args: Vec<Value>, result: Option<&str>) -> Value {
    let mut v = json!({ "op": "invoke", "dispatch": dispatch, "target": target, "args": args });
    if let Some(r) = receiver {
        v["receiver"] = json!(r);
    }
    if let Some(r) = result {
        v["result"] = json!(r);
    }
    v
}

pub fn call_virtual(target: &str, receiver: &str, args: Vec<Value>, result: Option<&str>) -> Value {
    invoke("virtual", target, Some(receiver), args, result)
}

pub fn call_interface(target: &str, receiver: &str, args: Vec<Value>, result: Option<&str>) -> Value {
    invoke("interface", target, Some(receiver), args, result)
}

pub fn call_static(target: &str, args: Vec<Value>, result: Option<&str>) -> Value {
    invoke("static", target, None, args, result)
}

pub fn assign(lhs: &str, rhs: Value) -> Value {
    json!({ "op": "assign", "lhs": lhs, "rhs": rhs })
}

pub fn binop(lhs: &str, left: Value, op: &str, right: Value) -> Value {
    json!({ "op": "assign", "lhs": lhs, "rhs": { "binop": op, "left": left, "right": right } })
}

pub fn if_(left: Value, relation: &str, right: Value, then_block: Vec<Value>, else_block: Vec<Value>) -> Value {
    let mut v = json!({ "op": "if", "cond": { "left": left, "relation": relation, "right": right }, "thenBlock": then_block });
    if !else_block.is_empty() {
        v["elseBlock"] = json!(else_block);
    }
    v
}

pub fn throw(exception: &str) -> Value {
    json!({ "op": "throw", "exceptionType": exception })
}

pub fn ret(value: Option<Value>) -> Value {
    match value {
        Some(v) => json!({ "op": "return", "value": v }),
        None => json!({ "op": "return" }),
    }
}

pub fn param(name: &str, ty: &str) -> Value {
    json!({ "name": name, "type": ty })
}

/// Method with its signature derived from the parameter types.
pub fn method(name: &str, params: Vec<Value>, return_type: &str, modifiers: &[&str], body: Vec<Value>) -> Value {
    let types: Vec<&str> = params.iter().map(|p| p["type"].as_str().unwrap_or("")).collect();
    let mut v = json!({
        "name": name,
        "signature": format!("{name}({})", types.join(",")),
        "params": params,
        "returnType": return_type,
        "body": body,
    });
    if !modifiers.is_empty() {
        v["modifiers"] = json!(modifiers);
    }
    v
}

/// Bodiless interface method.
pub fn abstract_method(name: &str, params: Vec<Value>, return_type: &str) -> Value {
    let mut m = method(name, params, return_type, &["abstract"], vec![]);
    m.as_object_mut().expect("object").remove("body");
    m
}

pub struct ClassSpec<'a> {
    pub name: &'a str,
    pub kind: &'a str,
    pub superclass: Option<&'a str>,
    pub interfaces: Vec<&'a str>,
    pub enclosing: Option<&'a str>,
    pub methods: Vec<Value>,
}

pub fn class(spec: ClassSpec<'_>) -> Value {
    let package = spec.name.rsplit_once('.').map(|(p, _)| p).unwrap_or("");
    let mut v = json!({ "name": spec.name, "package": package, "kind": spec.kind, "methods": spec.methods });
    if let Some(s) = spec.superclass {
        v["superclass"] = json!(s);
    }
    if !spec.interfaces.is_empty() {
        v["interfaces"] = json!(spec.interfaces);
    }
    if let Some(e) = spec.enclosing {
        v["enclosing"] = json!(e);
    }
    v
}

/// Default return value for a declared type.
pub fn default_value(ty: &str) -> Option<Value> {
    match ty {
        "void" => None,
        "boolean" => Some(json!(false)),
        "int" | "long" => Some(json!(0)),
        _ => Some(Value::Null),
    }
}
