use serde::Serialize;

/// Which conditional law a [`JointTable`] holds.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum JointVariant {
    /// Departures with only the first probe queued at slot 0.
    ZeroInitial,
    /// Departures given `q` packets ahead of the first probe.
    Conditioned { q: usize },
    /// Backlog averaged out against the stationary occupancy.
    Unconditioned,
    /// Equal priority, empty queue and empty first batch; arrivals `A_{1,m}`.
    EqualZero,
    /// As `EqualZero` but arrivals include those ahead of the second probe.
    EqualZeroSplit,
    /// Equal priority with backlog `q` and first batch `a`.
    EqualConditioned { q: usize, a: usize },
    /// Equal priority, averaged over backlog, batch and probe position.
    EqualUnconditioned,
}

/// `P{X = l, A = j}` for departures `l = 0 ..= slots` and arrivals
/// `j = 0 ..= j_max`.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct JointTable {
    pub(crate) spacing: usize,
    pub(crate) slots: usize,
    pub(crate) j_max: usize,
    pub(crate) variant: JointVariant,
    pub(crate) data: Vec<f64>,
    /// Occupancy mass dropped by the `n1` truncation while unconditioning.
    pub(crate) omitted_mass: f64,
}

impl JointTable {
    pub(crate) fn zeros(spacing: usize, slots: usize, j_max: usize, variant: JointVariant) -> Self {
        Self {
            spacing,
            slots,
            j_max,
            variant,
            data: vec![0.0; (slots + 1) * (j_max + 1)],
            omitted_mass: 0.0,
        }
    }

    /// Probe spacing parameter the table was built for.
    pub fn spacing(&self) -> usize {
        self.spacing
    }

    /// Length of the departure window (largest possible `l`).
    pub fn slots(&self) -> usize {
        self.slots
    }

    pub fn j_max(&self) -> usize {
        self.j_max
    }

    pub fn variant(&self) -> JointVariant {
        self.variant
    }

    pub fn omitted_mass(&self) -> f64 {
        self.omitted_mass
    }

    /// Zero outside the stored rectangle.
    pub fn get(&self, l: usize, j: usize) -> f64 {
        if l > self.slots || j > self.j_max {
            return 0.0;
        }
        self.data[l * (self.j_max + 1) + j]
    }

    pub fn row(&self, l: usize) -> &[f64] {
        let w = self.j_max + 1;
        &self.data[l * w..(l + 1) * w]
    }

    pub(crate) fn row_mut(&mut self, l: usize) -> &mut [f64] {
        let w = self.j_max + 1;
        &mut self.data[l * w..(l + 1) * w]
    }

    /// Arrival marginal `Σ_l P{X = l, A = j}`.
    pub fn arrival_marginal(&self) -> Vec<f64> {
        let mut out = vec![0.0; self.j_max + 1];
        for l in 0..=self.slots {
            for (o, v) in out.iter_mut().zip(self.row(l)) {
                *o += v;
            }
        }
        out
    }

    /// Departure marginal `Σ_j P{X = l, A = j}`.
    pub fn departure_marginal(&self) -> Vec<f64> {
        (0..=self.slots).map(|l| self.row(l).iter().sum()).collect()
    }

    pub fn total(&self) -> f64 {
        self.data.iter().sum()
    }

    pub fn max_abs_diff(&self, other: &JointTable) -> f64 {
        let slots = self.slots.max(other.slots);
        let j_max = self.j_max.max(other.j_max);
        let mut worst = 0.0f64;
        for l in 0..=slots {
            for j in 0..=j_max {
                worst = worst.max((self.get(l, j) - other.get(l, j)).abs());
            }
        }
        worst
    }

    /// `departures,arrivals,probability` rows, zero cells skipped.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("departures,arrivals,probability\n");
        for l in 0..=self.slots {
            for (j, p) in self.row(l).iter().enumerate() {
                if *p != 0.0 {
                    out.push_str(&format!("{l},{j},{p}\n"));
                }
            }
        }
        out
    }
}
