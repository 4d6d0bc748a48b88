/// Set of small integers with O(1) insert, remove and uniform indexing.
#[derive(Debug, Clone)]
pub(crate) struct IndexedSet {
    items: Vec<usize>,
    pos: Vec<usize>,
}

const NONE: usize = usize::MAX;

impl IndexedSet {
    pub fn with_universe(n: usize) -> Self {
        Self {
            items: Vec::new(),
            pos: vec![NONE; n],
        }
    }

    #[inline]
    pub fn len(&self) -> usize {
        self.items.len()
    }

    #[inline]
    pub fn is_empty(&self) -> bool {
        self.items.is_empty()
    }

    #[inline]
    pub fn get(&self, i: usize) -> usize {
        self.items[i]
    }

    #[inline]
    pub fn insert(&mut self, v: usize) {
        if self.pos[v] == NONE {
            self.pos[v] = self.items.len();
            self.items.push(v);
        }
    }

    #[inline]
    pub fn remove(&mut self, v: usize) {
        let p = self.pos[v];
        if p != NONE {
            let last = *self.items.last().expect("nonempty");
            self.items[p] = last;
            self.pos[last] = p;
            self.items.pop();
            self.pos[v] = NONE;
        }
    }

    #[inline]
    pub fn set(&mut self, v: usize, present: bool) {
        if present {
            self.insert(v)
        } else {
            self.remove(v)
        }
    }
}
