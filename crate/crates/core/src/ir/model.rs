//! Data model for the corpus document.
//!
//! Classes carry method bodies in a structured three-address form: nested
//! `if` blocks instead of labels and jumps. Every serialized key maps 1:1 onto
//! a field here and unknown keys are rejected.

use std::collections::BTreeSet;
use std::fmt;

use serde::de::{self, MapAccess, Visitor};
use serde::ser::SerializeMap;
use serde::{Deserialize, Deserializer, Serialize, Serializer};

/// Canonical method reference: `Class.name(type1,type2)`, no spaces.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct MethodRef(String);

impl MethodRef {
    pub fn new(class: &str, signature: &str) -> Self {
        MethodRef(format!("{class}.{signature}"))
    }

    /// Parses and checks the `Class.name(...)` shape.
    pub fn parse(text: &str) -> Option<Self> {
        let open = text.find('(')?;
        if !text.ends_with(')') || text.contains(' ') {
            return None;
        }
        let dot = text[..open].rfind('.')?;
        if dot == 0 || dot + 1 == open {
            return None;
        }
        Some(MethodRef(text.to_string()))
    }

    fn split(&self) -> (&str, &str) {
        let open = self.0.find('(').unwrap_or(self.0.len());
        let dot = self.0[..open].rfind('.').unwrap_or(0);
        (&self.0[..dot], &self.0[dot + 1..])
    }

    pub fn class_name(&self) -> &str {
        self.split().0
    }

    /// `name(types)` part.
    pub fn signature(&self) -> &str {
        self.split().1
    }

    /// Method name without class or parameter list.
    pub fn simple_name(&self) -> &str {
        let sig = self.signature();
        &sig[..sig.find('(').unwrap_or(sig.len())]
    }

    /// `Class.name` without the parameter list; registration names are
    /// suffix-matched against this.
    pub fn qualified_name(&self) -> &str {
        let open = self.0.find('(').unwrap_or(self.0.len());
        &self.0[..open]
    }

    pub fn arity(&self) -> usize {
        let sig = self.signature();
        let inner = &sig[sig.find('(').map_or(sig.len(), |i| i + 1)..sig.len().saturating_sub(1)];
        if inner.is_empty() {
            0
        } else {
            inner.split(',').count()
        }
    }

    pub fn as_str(&self) -> &str {
        &self.0
    }
}

impl fmt::Display for MethodRef {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ClassKind {
    Class,
    Interface,
    Abstract,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase", deny_unknown_fields)]
pub struct ClassDef {
    pub name: String,
    pub package: String,
    pub kind: ClassKind,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub superclass: Option<String>,
    #[serde(default)]
    pub interfaces: Vec<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub enclosing: Option<String>,
    #[serde(default)]
    pub methods: Vec<MethodDef>,
}

impl ClassDef {
    pub fn method(&self, signature: &str) -> Option<&MethodDef> {
        self.methods.iter().find(|m| m.signature == signature)
    }

    pub fn is_concrete(&self) -> bool {
        self.kind == ClassKind::Class
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Modifier {
    Static,
    Abstract,
    Native,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Param {
    pub name: String,
    #[serde(rename = "type")]
    pub ty: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase", deny_unknown_fields)]
pub struct MethodDef {
    pub name: String,
    pub signature: String,
    #[serde(default)]
    pub params: Vec<Param>,
    pub return_type: String,
    #[serde(default)]
    pub body: Vec<Statement>,
    #[serde(default)]
    pub modifiers: BTreeSet<Modifier>,
}

impl MethodDef {
    pub fn is_static(&self) -> bool {
        self.modifiers.contains(&Modifier::Static)
    }

    pub fn is_abstract(&self) -> bool {
        self.modifiers.contains(&Modifier::Abstract)
    }

    pub fn is_native(&self) -> bool {
        self.modifiers.contains(&Modifier::Native)
    }

    /// Signature implied by name and parameter types.
    pub fn expected_signature(&self) -> String {
        let types: Vec<&str> = self.params.iter().map(|p| p.ty.as_str()).collect();
        format!("{}({})", self.name, types.join(","))
    }

    pub fn param_index(&self, name: &str) -> Option<usize> {
        self.params.iter().position(|p| p.name == name)
    }

    pub fn returns_boolean(&self) -> bool {
        self.return_type == "boolean"
    }
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Constant {
    Null,
    Bool(bool),
    Int(i64),
    Str(String),
}

/// A value position: local variable, field path (`this.mCount`,
/// `pkg.Cls.sField`) or literal. In the document a bare string is a variable
/// when it contains no `.`, and a field path otherwise.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Operand {
    Var(String),
    Field(String),
    Const(Constant),
}

impl Operand {
    pub fn var(name: &str) -> Self {
        Operand::Var(name.to_string())
    }

    pub fn from_place(text: &str) -> Self {
        if text.contains('.') {
            Operand::Field(text.to_string())
        } else {
            Operand::Var(text.to_string())
        }
    }

    pub fn as_loc(&self) -> Option<Loc> {
        match self {
            Operand::Var(v) => Some(Loc::Var(v.clone())),
            Operand::Field(f) => Some(Loc::Field(f.clone())),
            Operand::Const(_) => None,
        }
    }

    pub fn as_var(&self) -> Option<&str> {
        match self {
            Operand::Var(v) => Some(v),
            _ => None,
        }
    }

    pub fn is_int_const(&self) -> bool {
        matches!(self, Operand::Const(Constant::Int(_)))
    }
}

/// A storage location within one method: variable or textual field path.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Loc {
    Var(String),
    Field(String),
}

impl Loc {
    pub fn name(&self) -> &str {
        match self {
            Loc::Var(s) | Loc::Field(s) => s,
        }
    }

    pub fn is_field(&self) -> bool {
        matches!(self, Loc::Field(_))
    }
}

impl fmt::Display for Loc {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl Serialize for Loc {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_str(self.name())
    }
}

impl Serialize for Operand {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        match self {
            Operand::Var(v) | Operand::Field(v) => s.serialize_str(v),
            Operand::Const(Constant::Null) => s.serialize_unit(),
            Operand::Const(Constant::Bool(b)) => s.serialize_bool(*b),
            Operand::Const(Constant::Int(i)) => s.serialize_i64(*i),
            Operand::Const(Constant::Str(text)) => {
                let mut map = s.serialize_map(Some(1))?;
                map.serialize_entry("str", text)?;
                map.end()
            }
        }
    }
}

fn check_place<E: de::Error>(text: &str) -> Result<(), E> {
    let ok = !text.is_empty()
        && text.split('.').all(|seg| {
            !seg.is_empty()
                && seg
                    .chars()
                    .all(|c| c.is_ascii_alphanumeric() || c == '_' || c == '$')
        });
    if ok {
        Ok(())
    } else {
        Err(E::custom(format!("invalid variable or field path `{text}`")))
    }
}

struct OperandVisitor;

impl<'de> Visitor<'de> for OperandVisitor {
    type Value = Operand;

    fn expecting(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str("a variable, field path, integer, boolean, null or {\"str\": ...}")
    }

    fn visit_str<E: de::Error>(self, v: &str) -> Result<Operand, E> {
        check_place(v)?;
        Ok(Operand::from_place(v))
    }

    fn visit_i64<E: de::Error>(self, v: i64) -> Result<Operand, E> {
        Ok(Operand::Const(Constant::Int(v)))
    }

    fn visit_u64<E: de::Error>(self, v: u64) -> Result<Operand, E> {
        i64::try_from(v)
            .map(|i| Operand::Const(Constant::Int(i)))
            .map_err(|_| E::custom("integer constant out of range"))
    }

    fn visit_bool<E: de::Error>(self, v: bool) -> Result<Operand, E> {
        Ok(Operand::Const(Constant::Bool(v)))
    }

    fn visit_unit<E: de::Error>(self) -> Result<Operand, E> {
        Ok(Operand::Const(Constant::Null))
    }

    fn visit_none<E: de::Error>(self) -> Result<Operand, E> {
        Ok(Operand::Const(Constant::Null))
    }

    fn visit_map<A: MapAccess<'de>>(self, mut map: A) -> Result<Operand, A::Error> {
        let key: Option<String> = map.next_key()?;
        match key.as_deref() {
            Some("str") => {
                let text: String = map.next_value()?;
                if let Some(extra) = map.next_key::<String>()? {
                    return Err(de::Error::unknown_field(&extra, &["str"]));
                }
                Ok(Operand::Const(Constant::Str(text)))
            }
            Some(other) => Err(de::Error::unknown_field(other, &["str"])),
            None => Err(de::Error::missing_field("str")),
        }
    }
}

impl<'de> Deserialize<'de> for Operand {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        d.deserialize_any(OperandVisitor)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Dispatch {
    Virtual,
    Static,
    Interface,
    Special,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum ArithOp {
    #[serde(rename = "+")]
    Add,
    #[serde(rename = "-")]
    Sub,
    #[serde(rename = "*")]
    Mul,
    #[serde(rename = "/")]
    Div,
    #[serde(rename = "%")]
    Rem,
    #[serde(rename = "&")]
    And,
    #[serde(rename = "|")]
    Or,
    #[serde(rename = "^")]
    Xor,
    #[serde(rename = "<<")]
    Shl,
    #[serde(rename = ">>")]
    Shr,
}

/// Right-hand side of an assignment.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub enum Rvalue {
    Use(Operand),
    BinOp {
        left: Operand,
        op: ArithOp,
        right: Operand,
    },
}

impl Rvalue {
    pub fn operands(&self) -> Vec<&Operand> {
        match self {
            Rvalue::Use(o) => vec![o],
            Rvalue::BinOp { left, right, .. } => vec![left, right],
        }
    }
}

impl Serialize for Rvalue {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        match self {
            Rvalue::Use(o) => o.serialize(s),
            Rvalue::BinOp { left, op, right } => {
                let mut map = s.serialize_map(Some(3))?;
                map.serialize_entry("binop", op)?;
                map.serialize_entry("left", left)?;
                map.serialize_entry("right", right)?;
                map.end()
            }
        }
    }
}

struct RvalueVisitor;

impl<'de> Visitor<'de> for RvalueVisitor {
    type Value = Rvalue;

    fn expecting(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str("an operand or {\"binop\", \"left\", \"right\"}")
    }

    fn visit_str<E: de::Error>(self, v: &str) -> Result<Rvalue, E> {
        OperandVisitor.visit_str(v).map(Rvalue::Use)
    }

    fn visit_i64<E: de::Error>(self, v: i64) -> Result<Rvalue, E> {
        OperandVisitor.visit_i64(v).map(Rvalue::Use)
    }

    fn visit_u64<E: de::Error>(self, v: u64) -> Result<Rvalue, E> {
        OperandVisitor.visit_u64(v).map(Rvalue::Use)
    }

    fn visit_bool<E: de::Error>(self, v: bool) -> Result<Rvalue, E> {
        OperandVisitor.visit_bool(v).map(Rvalue::Use)
    }

    fn visit_unit<E: de::Error>(self) -> Result<Rvalue, E> {
        Ok(Rvalue::Use(Operand::Const(Constant::Null)))
    }

    fn visit_none<E: de::Error>(self) -> Result<Rvalue, E> {
        Ok(Rvalue::Use(Operand::Const(Constant::Null)))
    }

    fn visit_map<A: MapAccess<'de>>(self, mut map: A) -> Result<Rvalue, A::Error> {
        const FIELDS: &[&str] = &["str", "binop", "left", "right"];
        let mut op = None;
        let mut left = None;
        let mut right = None;
        while let Some(key) = map.next_key::<String>()? {
            match key.as_str() {
                "str" if op.is_none() && left.is_none() && right.is_none() => {
                    let text: String = map.next_value()?;
                    if let Some(extra) = map.next_key::<String>()? {
                        return Err(de::Error::unknown_field(&extra, &["str"]));
                    }
                    return Ok(Rvalue::Use(Operand::Const(Constant::Str(text))));
                }
                "binop" if op.is_none() => op = Some(map.next_value::<ArithOp>()?),
                "left" if left.is_none() => left = Some(map.next_value::<Operand>()?),
                "right" if right.is_none() => right = Some(map.next_value::<Operand>()?),
                "binop" | "left" | "right" => return Err(de::Error::duplicate_field("binop")),
                other => return Err(de::Error::unknown_field(other, FIELDS)),
            }
        }
        Ok(Rvalue::BinOp {
            op: op.ok_or_else(|| de::Error::missing_field("binop"))?,
            left: left.ok_or_else(|| de::Error::missing_field("left"))?,
            right: right.ok_or_else(|| de::Error::missing_field("right"))?,
        })
    }
}

impl<'de> Deserialize<'de> for Rvalue {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        d.deserialize_any(RvalueVisitor)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Relation {
    Eq,
    Ne,
    Lt,
    Le,
    Gt,
    Ge,
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Condition {
    pub left: Operand,
    pub relation: Relation,
    pub right: Operand,
}

impl Condition {
    pub fn operands(&self) -> [&Operand; 2] {
        [&self.left, &self.right]
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Invoke {
    pub dispatch: Dispatch,
    pub target: MethodRef,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub receiver: Option<Operand>,
    #[serde(default)]
    pub args: Vec<Operand>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub result: Option<String>,
}

fn some_operand<'de, D: Deserializer<'de>>(d: D) -> Result<Option<Operand>, D::Error> {
    Operand::deserialize(d).map(Some)
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(tag = "op", rename_all = "lowercase", deny_unknown_fields)]
pub enum Statement {
    Invoke(Invoke),
    Assign {
        lhs: Operand,
        rhs: Rvalue,
    },
    If {
        cond: Condition,
        #[serde(rename = "thenBlock", default)]
        then_block: Vec<Statement>,
        #[serde(rename = "elseBlock", default)]
        else_block: Vec<Statement>,
    },
    Throw {
        #[serde(rename = "exceptionType")]
        exception_type: String,
    },
    Return {
        #[serde(
            default,
            deserialize_with = "some_operand",
            skip_serializing_if = "Option::is_none"
        )]
        value: Option<Operand>,
    },
}

impl Statement {
    pub fn as_invoke(&self) -> Option<&Invoke> {
        match self {
            Statement::Invoke(inv) => Some(inv),
            _ => None,
        }
    }

    /// Locations read by this statement itself (nested blocks excluded).
    pub fn reads(&self) -> Vec<Loc> {
        let ops: Vec<&Operand> = match self {
            Statement::Invoke(inv) => inv.receiver.iter().chain(inv.args.iter()).collect(),
            Statement::Assign { rhs, .. } => rhs.operands(),
            Statement::If { cond, .. } => cond.operands().to_vec(),
            Statement::Throw { .. } => Vec::new(),
            Statement::Return { value } => value.iter().collect(),
        };
        ops.into_iter().filter_map(Operand::as_loc).collect()
    }

    /// Location written by this statement itself.
    pub fn writes(&self) -> Option<Loc> {
        match self {
            Statement::Invoke(inv) => inv.result.as_ref().map(|r| Loc::Var(r.clone())),
            Statement::Assign { lhs, .. } => lhs.as_loc(),
            _ => None,
        }
    }
}

/// Registration of an implicit callback edge.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CallbackEntry {
    pub registration: MethodRef,
    pub interface: String,
    pub callback: String,
}

/// Top-level corpus document as it appears on disk.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CorpusDocument {
    pub version: u32,
    #[serde(default)]
    pub externals: Vec<String>,
    pub classes: Vec<ClassDef>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub callback_edges: Option<Vec<CallbackEntry>>,
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn method_ref_parts() {
        let m = MethodRef::parse("android.app.IWallpaperManager$Stub.getWallpaper(String,int)").unwrap();
        assert_eq!(m.class_name(), "android.app.IWallpaperManager$Stub");
        assert_eq!(m.signature(), "getWallpaper(String,int)");
        assert_eq!(m.simple_name(), "getWallpaper");
        assert_eq!(m.qualified_name(), "android.app.IWallpaperManager$Stub.getWallpaper");
        assert_eq!(m.arity(), 2);
        assert_eq!(MethodRef::parse("A.f()").unwrap().arity(), 0);
        assert!(MethodRef::parse("f()").is_none());
        assert!(MethodRef::parse("A.f(int, int)").is_none());
        assert!(MethodRef::parse("A.f").is_none());
    }

    #[test]
    fn operand_forms() {
        let ops: Vec<Operand> =
            serde_json::from_str(r#"["v", "this.mCount", 4, true, null, {"str": "keyguard"}]"#).unwrap();
        assert_eq!(
            ops,
            vec![
                Operand::var("v"),
                Operand::Field("this.mCount".into()),
                Operand::Const(Constant::Int(4)),
                Operand::Const(Constant::Bool(true)),
                Operand::Const(Constant::Null),
                Operand::Const(Constant::Str("keyguard".into())),
            ]
        );
        let back = serde_json::to_string(&ops).unwrap();
        assert_eq!(back, r#"["v","this.mCount",4,true,null,{"str":"keyguard"}]"#);
        assert!(serde_json::from_str::<Operand>(r#"{"text": "x"}"#).is_err());
        assert!(serde_json::from_str::<Operand>(r#""a b""#).is_err());
    }

    #[test]
    fn statements_strict() {
        let s: Statement = serde_json::from_str(
            r#"{"op":"assign","lhs":"x","rhs":{"binop":"+","left":"this.mCount","right":1}}"#,
        )
        .unwrap();
        assert!(matches!(s, Statement::Assign { rhs: Rvalue::BinOp { op: ArithOp::Add, .. }, .. }));
        let r: Statement = serde_json::from_str(r#"{"op":"return","value":null}"#).unwrap();
        assert_eq!(r, Statement::Return { value: Some(Operand::Const(Constant::Null)) });
        let r: Statement = serde_json::from_str(r#"{"op":"return"}"#).unwrap();
        assert_eq!(r, Statement::Return { value: None });
        assert!(serde_json::from_str::<Statement>(r#"{"op":"throw","exceptionType":"E","x":1}"#).is_err());
        assert!(serde_json::from_str::<Statement>(
            r#"{"op":"invoke","dispatch":"static","target":"A.f()","bogus":1}"#
        )
        .is_err());
        assert!(serde_json::from_str::<Statement>(r#"{"op":"goto","label":"L1"}"#).is_err());
    }
}
