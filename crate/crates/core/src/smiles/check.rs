use super::ast::{Atom, Bond, Chain, Molecule};
use super::{RINGBOND_REPEAT, RING_BOND_MISMATCH, UNCLOSED_RING, VALENCE};
use crate::attr::Violation;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct OpenRing {
    pub atom: usize,
    pub bond: Option<Bond>,
    /// Character offset of the opening digit.
    pub position: usize,
}

/// Left-to-right ring-digit bookkeeping: a digit opens a ring when it is
/// not open and closes it otherwise, so digits may be reused once closed.
#[derive(Debug, Clone, Default)]
pub struct RingLedger {
    open: [Option<OpenRing>; 9],
    /// Atom pairs bonded by closed rings, in closing order.
    pub closed: Vec<(usize, usize)>,
}

/// Result of feeding one ring-bond digit to the ledger.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RingEvent {
    Opened,
    Closed { partner: OpenRing },
}

impl RingLedger {
    pub fn open_ring(&self, digit: u8) -> Option<OpenRing> {
        self.open[digit as usize]
    }

    pub fn feed(&mut self, digit: u8, ring: OpenRing) -> RingEvent {
        match self.open[digit as usize].take() {
            Some(partner) => {
                self.closed.push((partner.atom, ring.atom));
                RingEvent::Closed { partner }
            }
            None => {
                self.open[digit as usize] = Some(ring);
                RingEvent::Opened
            }
        }
    }

    pub fn still_open(&self) -> impl Iterator<Item = (u8, OpenRing)> + '_ {
        self.open
            .iter()
            .enumerate()
            .filter_map(|(d, r)| r.map(|r| (d as u8, r)))
    }
}

struct AtomState {
    position: usize,
    text: String,
    max: u8,
    used: u8,
}

struct Checker {
    ledger: RingLedger,
    atoms: Vec<AtomState>,
    violations: Vec<Violation>,
}

impl Checker {
    fn add(&mut self, atom: usize, order: u8) {
        self.atoms[atom].used += order;
    }

    fn chain(&mut self, chain: &Chain, mut anchor: Option<(usize, Option<Bond>)>) {
        for (i, (bond, ba)) in chain.links.iter().enumerate() {
            let (max, hydrogens) = match &ba.atom {
                Atom::Organic(e) => (e.max_valence(), 0),
                Atom::Bracket(b) => (
                    b.element.max_valence() + b.charge_magnitude(),
                    b.hydrogens(),
                ),
            };
            let a = self.atoms.len();
            self.atoms.push(AtomState {
                position: ba.position,
                text: ba.atom.to_string(),
                max,
                used: hydrogens,
            });
            let link = if i == 0 {
                anchor
            } else {
                anchor.map(|(prev, _)| (prev, *bond))
            };
            if let Some((prev, b)) = link {
                let order = b.map_or(1, Bond::order);
                self.add(prev, order);
                self.add(a, order);
            }
            let mut seen = 0u16;
            for r in &ba.rings {
                if seen >> r.digit & 1 == 1 {
                    self.violations.push(Violation {
                        location: r.position,
                        rule: RINGBOND_REPEAT.into(),
                        detail: format!("ring digit {} twice on one atom", r.digit),
                    });
                    continue;
                }
                seen |= 1 << r.digit;
                let here = OpenRing {
                    atom: a,
                    bond: r.bond,
                    position: r.position,
                };
                if let RingEvent::Closed { partner } = self.ledger.feed(r.digit, here) {
                    if let (Some(x), Some(y)) = (partner.bond, r.bond) {
                        if x != y {
                            self.violations.push(Violation {
                                location: r.position,
                                rule: RING_BOND_MISMATCH.into(),
                                detail: format!(
                                    "ring {} opened with `{}` closed with `{}`",
                                    r.digit,
                                    x.text(),
                                    y.text()
                                ),
                            });
                        }
                    }
                    let order = partner.bond.or(r.bond).map_or(1, Bond::order);
                    self.add(partner.atom, order);
                    self.add(a, order);
                }
            }
            for br in &ba.branches {
                self.chain(&br.chain, Some((a, br.bond)));
            }
            anchor = Some((a, None));
        }
    }
}

/// Ring pairing and valence violations of a parsed molecule, by location.
pub fn check_molecule(m: &Molecule) -> Vec<Violation> {
    let mut c = Checker {
        ledger: RingLedger::default(),
        atoms: Vec::new(),
        violations: Vec::new(),
    };
    c.chain(&m.chain, None);
    for (d, r) in c.ledger.still_open() {
        c.violations.push(Violation {
            location: r.position,
            rule: UNCLOSED_RING.into(),
            detail: format!("ring {d} never closed"),
        });
    }
    for a in &c.atoms {
        if a.used > a.max {
            c.violations.push(Violation {
                location: a.position,
                rule: VALENCE.into(),
                detail: format!("{} has bond order {} > {}", a.text, a.used, a.max),
            });
        }
    }
    c.violations.sort();
    c.violations
}
