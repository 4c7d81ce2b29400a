//! Finite instances: sort domains, concrete values and states.
//!
//! Values are stored compactly. An element is its index in the sort's
//! domain, a set is a bitmask over that domain (so sorts are limited to 63
//! elements) and a map is a vector in domain order.

use std::fmt;
use std::hash::Hasher;

use fnv::FnvHasher;
use rand::Rng;
use thiserror::Error;

use crate::spec_lang::{Protocol, Ty};

pub const MAX_DOMAIN: usize = 63;

#[derive(Debug, Clone, Error, PartialEq, Eq)]
pub enum InstanceError {
    #[error("malformed instance binding `{0}` (expected Sort=e1,e2,...)")]
    Malformed(String),
    #[error("unknown sort `{0}` in instance")]
    UnknownSort(String),
    #[error("sort `{0}` is not bound by the instance")]
    Unbound(String),
    #[error("sort `{0}` bound twice")]
    Rebound(String),
    #[error("domain of `{0}` is empty")]
    Empty(String),
    #[error("duplicate element `{1}` in domain of `{0}`")]
    DuplicateElement(String, String),
    #[error("domain of `{0}` has more than {MAX_DOMAIN} elements")]
    TooLarge(String),
    #[error("state space exceeds 2^63")]
    Overflow,
    #[error("state space of {size} states exceeds the enumeration limit {limit}")]
    LimitExceeded { size: u64, limit: u64 },
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Value {
    Bool(bool),
    Elem(u32),
    Enum(u32),
    Set(u64),
    /// Cardinality; produced by `|e|`, never stored in a state.
    Count(u32),
    Map(Box<[Value]>),
}

impl Value {
    pub fn as_bool(&self) -> bool {
        match self {
            Value::Bool(b) => *b,
            other => unreachable!("expected bool, got {other:?}"),
        }
    }

    pub fn as_elem(&self) -> u32 {
        match self {
            Value::Elem(e) => *e,
            other => unreachable!("expected element, got {other:?}"),
        }
    }

    pub fn as_set(&self) -> u64 {
        match self {
            Value::Set(s) => *s,
            other => unreachable!("expected set, got {other:?}"),
        }
    }
}

/// A total assignment of values to state variables in declaration order.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct State(pub Vec<Value>);

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Fingerprint(pub u64);

impl fmt::Display for Fingerprint {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{:016x}", self.0)
    }
}

/// Binding of each protocol sort to a finite ordered domain.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Instance {
    sort_names: Vec<String>,
    domains: Vec<Vec<String>>,
}

impl Instance {
    /// Parses `Server=s1,s2 Client=c1,c2`. Bindings may also be separated
    /// by `;` or newlines, and braces around the domain are accepted.
    pub fn parse(protocol: &Protocol, text: &str) -> Result<Instance, InstanceError> {
        let mut domains: Vec<Option<Vec<String>>> = vec![None; protocol.sorts().len()];
        for binding in text.split(|c: char| c.is_whitespace() || c == ';').filter(|b| !b.is_empty()) {
            let (sort, elems) = binding
                .split_once('=')
                .ok_or_else(|| InstanceError::Malformed(binding.to_string()))?;
            let i = protocol
                .sort_index(sort)
                .ok_or_else(|| InstanceError::UnknownSort(sort.to_string()))?;
            if domains[i].is_some() {
                return Err(InstanceError::Rebound(sort.to_string()));
            }
            let elems = elems.trim_start_matches('{').trim_end_matches('}');
            let list: Vec<String> = elems
                .split(',')
                .filter(|e| !e.is_empty())
                .map(str::to_string)
                .collect();
            domains[i] = Some(list);
        }
        let domains = domains
            .into_iter()
            .zip(protocol.sorts())
            .map(|(d, s)| d.ok_or_else(|| InstanceError::Unbound(s.clone())))
            .collect::<Result<Vec<_>, _>>()?;
        Instance::new(protocol.sorts().to_vec(), domains)
    }

    pub fn new(sort_names: Vec<String>, domains: Vec<Vec<String>>) -> Result<Instance, InstanceError> {
        for (s, d) in sort_names.iter().zip(&domains) {
            if d.is_empty() {
                return Err(InstanceError::Empty(s.clone()));
            }
            if d.len() > MAX_DOMAIN {
                return Err(InstanceError::TooLarge(s.clone()));
            }
            for (k, e) in d.iter().enumerate() {
                if d[..k].contains(e) {
                    return Err(InstanceError::DuplicateElement(s.clone(), e.clone()));
                }
            }
        }
        Ok(Instance { sort_names, domains })
    }

    pub fn size(&self, sort: usize) -> u32 {
        self.domains[sort].len() as u32
    }

    pub fn domain(&self, sort: usize) -> &[String] {
        &self.domains[sort]
    }

    pub(crate) fn full_set(&self, sort: usize) -> u64 {
        (1u64 << self.domains[sort].len()) - 1
    }
}

impl fmt::Display for Instance {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for (k, (s, d)) in self.sort_names.iter().zip(&self.domains).enumerate() {
            if k > 0 {
                write!(f, " ")?;
            }
            write!(f, "{s}={}", d.join(","))?;
        }
        Ok(())
    }
}

/// Number of values of a resolved type under an instance.
fn type_cardinality(ty: &Ty, protocol: &Protocol, inst: &Instance) -> Option<u128> {
    match ty {
        Ty::Bool => Some(2),
        Ty::Elem(s) => Some(inst.size(*s) as u128),
        Ty::Enum(e) => Some(protocol.enum_labels(*e).len() as u128),
        Ty::Set(s) => 1u128.checked_shl(inst.size(*s)),
        Ty::Map(s, elem) => {
            let base = type_cardinality(elem, protocol, inst)?;
            base.checked_pow(inst.size(*s))
        }
        Ty::Count | Ty::EmptySet => unreachable!("not a state variable type"),
    }
}

pub fn state_space_size(protocol: &Protocol, inst: &Instance) -> Result<u64, InstanceError> {
    let mut total: u128 = 1;
    for ty in protocol.var_types() {
        let c = type_cardinality(ty, protocol, inst).ok_or(InstanceError::Overflow)?;
        total = total.checked_mul(c).ok_or(InstanceError::Overflow)?;
        if total > (1u128 << 63) {
            return Err(InstanceError::Overflow);
        }
    }
    Ok(total as u64)
}

/// One mixed-radix digit of the flattened state layout.
#[derive(Debug, Clone, Copy)]
enum Slot {
    Bool,
    Elem(u32),
    Enum(u32),
    Set(u32),
}

impl Slot {
    fn radix(self) -> u64 {
        match self {
            Slot::Bool => 2,
            Slot::Elem(n) | Slot::Enum(n) => n as u64,
            Slot::Set(bits) => 1u64 << bits,
        }
    }

    fn value(self, digit: u64) -> Value {
        match self {
            Slot::Bool => Value::Bool(digit == 1),
            Slot::Elem(_) => Value::Elem(digit as u32),
            Slot::Enum(_) => Value::Enum(digit as u32),
            Slot::Set(_) => Value::Set(digit),
        }
    }
}

#[derive(Debug, Clone)]
enum VarLayout {
    Scalar(Slot),
    Map(usize, Slot),
}

fn scalar_slot(ty: &Ty, protocol: &Protocol, inst: &Instance) -> Slot {
    match ty {
        Ty::Bool => Slot::Bool,
        Ty::Elem(s) => Slot::Elem(inst.size(*s)),
        Ty::Enum(e) => Slot::Enum(protocol.enum_labels(*e).len() as u32),
        Ty::Set(s) => Slot::Set(inst.size(*s)),
        other => unreachable!("not a scalar type: {other:?}"),
    }
}

fn layout(protocol: &Protocol, inst: &Instance) -> Vec<VarLayout> {
    protocol
        .var_types()
        .map(|ty| match ty {
            Ty::Map(s, elem) => VarLayout::Map(inst.size(*s) as usize, scalar_slot(elem, protocol, inst)),
            t => VarLayout::Scalar(scalar_slot(t, protocol, inst)),
        })
        .collect()
}

/// Iterator over every type-correct state, in lexicographic digit order:
/// variables in declaration order, map entries in domain order, sets by
/// ascending bitmask. The last digit varies fastest.
pub struct StateIter {
    layout: Vec<VarLayout>,
    slots: Vec<Slot>,
    digits: Vec<u64>,
    done: bool,
}

impl Iterator for StateIter {
    type Item = State;

    fn next(&mut self) -> Option<State> {
        if self.done {
            return None;
        }
        let mut k = 0;
        let mut vals = Vec::with_capacity(self.layout.len());
        for l in &self.layout {
            match l {
                VarLayout::Scalar(slot) => {
                    vals.push(slot.value(self.digits[k]));
                    k += 1;
                }
                VarLayout::Map(n, slot) => {
                    let entries: Vec<Value> =
                        (0..*n).map(|j| slot.value(self.digits[k + j])).collect();
                    vals.push(Value::Map(entries.into_boxed_slice()));
                    k += n;
                }
            }
        }
        // advance the odometer
        let mut i = self.digits.len();
        loop {
            if i == 0 {
                self.done = true;
                break;
            }
            i -= 1;
            self.digits[i] += 1;
            if self.digits[i] < self.slots[i].radix() {
                break;
            }
            self.digits[i] = 0;
        }
        Some(State(vals))
    }
}

pub fn enumerate_states(protocol: &Protocol, inst: &Instance, limit: u64) -> Result<StateIter, InstanceError> {
    let size = state_space_size(protocol, inst)?;
    if size > limit {
        return Err(InstanceError::LimitExceeded { size, limit });
    }
    let layout = layout(protocol, inst);
    let slots: Vec<Slot> = layout
        .iter()
        .flat_map(|l| match l {
            VarLayout::Scalar(s) => vec![*s],
            VarLayout::Map(n, s) => vec![*s; *n],
        })
        .collect();
    Ok(StateIter {
        digits: vec![0; slots.len()],
        layout,
        slots,
        done: false,
    })
}

/// Draws each variable independently and uniformly from its typed domain.
pub fn random_state<R: Rng + ?Sized>(protocol: &Protocol, inst: &Instance, rng: &mut R) -> State {
    let draw = |slot: Slot, rng: &mut R| slot.value(rng.gen_range(0..slot.radix()));
    let vals = layout(protocol, inst)
        .into_iter()
        .map(|l| match l {
            VarLayout::Scalar(s) => draw(s, rng),
            VarLayout::Map(n, s) => {
                Value::Map((0..n).map(|_| draw(s, rng)).collect::<Vec<_>>().into_boxed_slice())
            }
        })
        .collect();
    State(vals)
}

/// Whether each value conforms to its declared type under the instance.
pub fn conforms(protocol: &Protocol, inst: &Instance, state: &State) -> bool {
    fn scalar(v: &Value, ty: &Ty, protocol: &Protocol, inst: &Instance) -> bool {
        match (v, ty) {
            (Value::Bool(_), Ty::Bool) => true,
            (Value::Elem(e), Ty::Elem(s)) => *e < inst.size(*s),
            (Value::Enum(e), Ty::Enum(id)) => (*e as usize) < protocol.enum_labels(*id).len(),
            (Value::Set(m), Ty::Set(s)) => m & !inst.full_set(*s) == 0,
            (Value::Map(entries), Ty::Map(s, elem)) => {
                entries.len() == inst.size(*s) as usize
                    && entries.iter().all(|e| scalar(e, elem, protocol, inst))
            }
            _ => false,
        }
    }
    state.0.len() == protocol.vars().len()
        && state
            .0
            .iter()
            .zip(protocol.var_types())
            .all(|(v, t)| scalar(v, t, protocol, inst))
}

fn encode_value(v: &Value, out: &mut Vec<u8>) {
    match v {
        Value::Bool(b) => out.push(*b as u8),
        Value::Elem(e) | Value::Enum(e) | Value::Count(e) => out.extend_from_slice(&e.to_le_bytes()),
        Value::Set(m) => out.extend_from_slice(&m.to_le_bytes()),
        Value::Map(entries) => entries.iter().for_each(|e| encode_value(e, out)),
    }
}

/// Canonical byte serialization: variables in declaration order, map
/// entries in domain order, little-endian scalars.
pub fn encode_state(state: &State) -> Vec<u8> {
    let mut out = Vec::with_capacity(state.0.len() * 8);
    state.0.iter().for_each(|v| encode_value(v, &mut out));
    out
}

/// Inverse of [`encode_state`]; `None` when the bytes do not describe a
/// type-correct state of the protocol under the instance.
pub fn decode_state(protocol: &Protocol, inst: &Instance, bytes: &[u8]) -> Option<State> {
    fn take<'a>(buf: &mut &'a [u8], n: usize) -> Option<&'a [u8]> {
        if buf.len() < n {
            return None;
        }
        let (h, t) = buf.split_at(n);
        *buf = t;
        Some(h)
    }
    fn scalar(slot: Slot, buf: &mut &[u8]) -> Option<Value> {
        Some(match slot {
            Slot::Bool => match take(buf, 1)?[0] {
                0 => Value::Bool(false),
                1 => Value::Bool(true),
                _ => return None,
            },
            Slot::Elem(_) | Slot::Enum(_) => {
                let v = u32::from_le_bytes(take(buf, 4)?.try_into().ok()?);
                if v as u64 >= slot.radix() {
                    return None;
                }
                slot.value(v as u64)
            }
            Slot::Set(_) => {
                let v = u64::from_le_bytes(take(buf, 8)?.try_into().ok()?);
                if v >= slot.radix() {
                    return None;
                }
                slot.value(v)
            }
        })
    }
    let mut buf = bytes;
    let mut vals = Vec::new();
    for l in layout(protocol, inst) {
        vals.push(match l {
            VarLayout::Scalar(s) => scalar(s, &mut buf)?,
            VarLayout::Map(n, s) => Value::Map(
                (0..n)
                    .map(|_| scalar(s, &mut buf))
                    .collect::<Option<Vec<_>>>()?
                    .into_boxed_slice(),
            ),
        });
    }
    buf.is_empty().then_some(State(vals))
}

/// 64-bit FNV-1a digest of the canonical serialization.
pub fn fingerprint(state: &State) -> Fingerprint {
    let mut h = FnvHasher::default();
    h.write(&encode_state(state));
    Fingerprint(h.finish())
}

/// Human-readable rendering of a state, e.g.
/// `locked = {s1: true, s2: false}, held = {c1: {s1}, c2: {}}`.
pub struct StateDisplay<'a> {
    pub protocol: &'a Protocol,
    pub instance: &'a Instance,
    pub state: &'a State,
}

impl StateDisplay<'_> {
    fn value(&self, v: &Value, ty: &Ty, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match (v, ty) {
            (Value::Bool(b), _) => write!(f, "{b}"),
            (Value::Elem(e), Ty::Elem(s)) => write!(f, "{}", self.instance.domain(*s)[*e as usize]),
            (Value::Enum(e), Ty::Enum(id)) => write!(f, "{}", self.protocol.enum_labels(*id)[*e as usize]),
            (Value::Set(m), Ty::Set(s)) => {
                let names: Vec<&str> = self
                    .instance
                    .domain(*s)
                    .iter()
                    .enumerate()
                    .filter(|(k, _)| m >> k & 1 == 1)
                    .map(|(_, n)| n.as_str())
                    .collect();
                write!(f, "{{{}}}", names.join(", "))
            }
            (Value::Map(entries), Ty::Map(s, elem)) => {
                write!(f, "{{")?;
                for (k, e) in entries.iter().enumerate() {
                    if k > 0 {
                        write!(f, ", ")?;
                    }
                    write!(f, "{}: ", self.instance.domain(*s)[k])?;
                    self.value(e, elem, f)?;
                }
                write!(f, "}}")
            }
            (v, _) => write!(f, "{v:?}"),
        }
    }
}

impl fmt::Display for StateDisplay<'_> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for (k, ((v, decl), ty)) in self
            .state
            .0
            .iter()
            .zip(self.protocol.vars())
            .zip(self.protocol.var_types())
            .enumerate()
        {
            if k > 0 {
                write!(f, ", ")?;
            }
            write!(f, "{} = ", decl.name)?;
            self.value(v, ty, f)?;
        }
        Ok(())
    }
}
