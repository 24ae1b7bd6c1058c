/// Dominance facts known at one `(station, t, r)`.
///
/// A `dom` fact `(u, Y)` records a line with boarding utility `u` that is at
/// least as good as waiting for `Y`; a `nondom` fact records one that is
/// strictly worse. Waiting utility only grows with the set, so a dom fact
/// covers every subset of `Y` for any line with utility `>= u`, and a nondom
/// fact covers every superset for any line with utility `<= u`.
#[derive(Clone, Debug, Default)]
pub struct DominanceCache {
    dom: Vec<(f64, u32)>,
    nondom: Vec<(f64, u32)>,
}

impl DominanceCache {
    pub fn clear(&mut self) {
        self.dom.clear();
        self.nondom.clear();
    }

    pub fn implies_dom(&self, u_board: f64, set: u32) -> bool {
        self.dom.iter().any(|&(u, y)| set & !y == 0 && u_board >= u)
    }

    pub fn implies_nondom(&self, u_board: f64, set: u32) -> bool {
        self.nondom.iter().any(|&(u, y)| y & !set == 0 && u_board <= u)
    }

    pub fn record_dom(&mut self, u_board: f64, set: u32) {
        if !self.implies_dom(u_board, set) {
            self.dom.push((u_board, set));
        }
    }

    pub fn record_nondom(&mut self, u_board: f64, set: u32) {
        if !self.implies_nondom(u_board, set) {
            self.nondom.push((u_board, set));
        }
    }

    pub fn len(&self) -> usize {
        self.dom.len() + self.nondom.len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn dom_closes_over_subsets() {
        let mut c = DominanceCache::default();
        c.record_dom(0.6, 0b110);
        assert!(c.implies_dom(0.6, 0b010));
        assert!(c.implies_dom(0.6, 0b110));
        assert!(!c.implies_dom(0.6, 0b111));
        assert!(!c.implies_dom(0.5, 0b010));
        // a better line dominates whatever a worse one does
        assert!(c.implies_dom(0.9, 0b100));
    }

    #[test]
    fn nondom_closes_over_supersets() {
        let mut c = DominanceCache::default();
        c.record_nondom(0.6, 0b010);
        assert!(c.implies_nondom(0.6, 0b011));
        assert!(c.implies_nondom(0.4, 0b110));
        assert!(!c.implies_nondom(0.7, 0b011));
        assert!(!c.implies_nondom(0.6, 0b100));
    }

    #[test]
    fn redundant_facts_are_not_stored() {
        let mut c = DominanceCache::default();
        c.record_dom(0.5, 0b111);
        c.record_dom(0.7, 0b011);
        assert_eq!(c.len(), 1);
        c.clear();
        assert!(c.is_empty());
    }
}
