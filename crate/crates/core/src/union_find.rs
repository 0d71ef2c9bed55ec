/// Disjoint sets over walker ids that keep their member lists at the root.
#[derive(Debug, Clone)]
pub(crate) struct DisjointSets {
    parent: Vec<u32>,
    members: Vec<Vec<u32>>,
}

impl DisjointSets {
    pub fn new(n: usize) -> Self {
        Self {
            parent: (0..n as u32).collect(),
            members: (0..n as u32).map(|i| vec![i]).collect(),
        }
    }

    pub fn find(&mut self, mut node: usize) -> usize {
        let mut root = node;
        while self.parent[root] as usize != root {
            root = self.parent[root] as usize;
        }
        while self.parent[node] as usize != root {
            let next = self.parent[node] as usize;
            self.parent[node] = root as u32;
            node = next;
        }
        root
    }

    #[cfg(test)]
    pub fn members(&mut self, node: usize) -> &[u32] {
        let root = self.find(node);
        &self.members[root]
    }

    /// Joins the sets of `a` and `b`, calling `on_pair` for every cross pair
    /// before the merge. Returns the new root.
    pub fn union_with(&mut self, a: usize, b: usize, mut on_pair: impl FnMut(u32, u32)) -> usize {
        let (mut ra, mut rb) = (self.find(a), self.find(b));
        if ra == rb {
            return ra;
        }
        for &x in &self.members[ra] {
            for &y in &self.members[rb] {
                on_pair(x, y);
            }
        }
        if self.members[ra].len() < self.members[rb].len() {
            std::mem::swap(&mut ra, &mut rb);
        }
        let moved = std::mem::take(&mut self.members[rb]);
        self.members[ra].extend(moved);
        self.parent[rb] = ra as u32;
        ra
    }
}
