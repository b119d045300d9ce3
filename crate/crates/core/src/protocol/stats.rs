//! Operation counters and per-step wall-clock timings.

use std::fmt;
use std::ops::AddAssign;
use std::time::Duration;

/// Cryptographic work and traffic of one party or one session.
///
/// `reencryptions` counts the places where Bob decrypts a value, transforms
/// it in the clear and encrypts the result. Counting such a pair as one
/// operation gives [`OpCounters::crypto_ops`].
///
/// `rerandomizations` counts ciphertexts refreshed with `u^N` before they
/// leave a party. They are not part of `crypto_ops`.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct OpCounters {
    pub encryptions: u64,
    pub decryptions: u64,
    pub reencryptions: u64,
    pub rerandomizations: u64,
    /// Ciphertexts Bob sent.
    pub sent_by_bob: u64,
    /// Ciphertexts Alice (or Carol) sent.
    pub sent_by_data_owner: u64,
}

impl OpCounters {
    /// Encryptions plus decryptions, a decrypt-then-encrypt pair counted once.
    pub fn crypto_ops(&self) -> u64 {
        self.encryptions + self.decryptions - self.reencryptions
    }

    pub fn elements_sent(&self) -> u64 {
        self.sent_by_bob + self.sent_by_data_owner
    }
}

impl AddAssign for OpCounters {
    fn add_assign(&mut self, o: Self) {
        self.encryptions += o.encryptions;
        self.decryptions += o.decryptions;
        self.reencryptions += o.reencryptions;
        self.rerandomizations += o.rerandomizations;
        self.sent_by_bob += o.sent_by_bob;
        self.sent_by_data_owner += o.sent_by_data_owner;
    }
}

impl fmt::Display for OpCounters {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "enc={} dec={} reenc={} rerand={} ops={} sent={}",
            self.encryptions,
            self.decryptions,
            self.reencryptions,
            self.rerandomizations,
            self.crypto_ops(),
            self.elements_sent()
        )
    }
}

/// Timing groups of a training round.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum StepGroup {
    S1 = 0,
    S2to3 = 1,
    S4to5 = 2,
    S6to7 = 3,
    S8 = 4,
    S9to10 = 5,
    S11 = 6,
    S12 = 7,
}

impl StepGroup {
    /// The groups reported as rows; the final decryption only feeds the total.
    pub const REPORTED: [StepGroup; 7] = [
        StepGroup::S1,
        StepGroup::S2to3,
        StepGroup::S4to5,
        StepGroup::S6to7,
        StepGroup::S8,
        StepGroup::S9to10,
        StepGroup::S11,
    ];

    pub fn label(self) -> &'static str {
        match self {
            StepGroup::S1 => "1",
            StepGroup::S2to3 => "2,3",
            StepGroup::S4to5 => "4,5",
            StepGroup::S6to7 => "6,7",
            StepGroup::S8 => "8",
            StepGroup::S9to10 => "9,10",
            StepGroup::S11 => "11",
            StepGroup::S12 => "12",
        }
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct StepTimings {
    groups: [Duration; 8],
}

impl StepTimings {
    pub fn add(&mut self, group: StepGroup, elapsed: Duration) {
        self.groups[group as usize] += elapsed;
    }

    pub fn get(&self, group: StepGroup) -> Duration {
        self.groups[group as usize]
    }

    pub fn total(&self) -> Duration {
        self.groups.iter().sum()
    }

    /// `(label, seconds)` rows for the reported groups plus a total.
    pub fn rows(&self) -> Vec<(&'static str, f64)> {
        let mut rows: Vec<_> = StepGroup::REPORTED
            .iter()
            .map(|g| (g.label(), self.get(*g).as_secs_f64()))
            .collect();
        rows.push(("total", self.total().as_secs_f64()));
        rows
    }

    /// CSV with a `step,seconds` header.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("step,seconds\n");
        for (label, secs) in self.rows() {
            out.push_str(&format!("\"{label}\",{secs:.6}\n"));
        }
        out
    }
}

impl AddAssign for StepTimings {
    fn add_assign(&mut self, o: Self) {
        for (a, b) in self.groups.iter_mut().zip(o.groups) {
            *a += b;
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn timing_rows_have_seven_groups_and_total() {
        let mut t = StepTimings::default();
        t.add(StepGroup::S12, Duration::from_millis(5));
        t.add(StepGroup::S1, Duration::from_millis(2));
        let rows = t.rows();
        assert_eq!(rows.len(), 8);
        assert_eq!(rows[0].0, "1");
        assert_eq!(rows[7], ("total", 0.007));
        assert!(t.to_csv().starts_with("step,seconds\n\"1\",0.002"));
    }

    #[test]
    fn counters_add() {
        let mut a = OpCounters {
            encryptions: 5,
            decryptions: 3,
            reencryptions: 2,
            rerandomizations: 4,
            sent_by_bob: 1,
            sent_by_data_owner: 1,
        };
        a += a;
        assert_eq!(a.crypto_ops(), 12);
        assert_eq!(a.elements_sent(), 4);
    }
}
