use std::collections::HashMap;
use std::fmt;
use std::sync::Arc;

use once_cell::sync::Lazy;
use parking_lot::RwLock;

#[derive(Default)]
struct Interner {
    ids: HashMap<Arc<str>, u32>,
    names: Vec<Arc<str>>,
}

static INTERNER: Lazy<RwLock<Interner>> = Lazy::new(Default::default);

/// An interned variable. Ids are handed out in first-use order, which is
/// also the variable order used by the graded-lex monomial ordering.
#[derive(Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Var(u32);

impl Var {
    pub fn new(name: &str) -> Var {
        if let Some(&id) = INTERNER.read().ids.get(name) {
            return Var(id);
        }
        let mut w = INTERNER.write();
        if let Some(&id) = w.ids.get(name) {
            return Var(id);
        }
        let id = w.names.len() as u32;
        let name: Arc<str> = Arc::from(name);
        w.names.push(name.clone());
        w.ids.insert(name, id);
        Var(id)
    }

    pub fn name(&self) -> Arc<str> {
        INTERNER.read().names[self.0 as usize].clone()
    }

    pub fn id(&self) -> u32 {
        self.0
    }
}

impl fmt::Debug for Var {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.name())
    }
}

impl fmt::Display for Var {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.name())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn interning_is_idempotent() {
        let a = Var::new("interning_probe");
        let b = Var::new("interning_probe");
        assert_eq!(a, b);
        assert_eq!(&*a.name(), "interning_probe");
        assert_ne!(a, Var::new("interning_probe2"));
    }
}
