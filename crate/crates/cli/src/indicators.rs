use serde::Serialize;

/// Ideal value, worst limit and the text form of the condition between them.
#[derive(Debug, Clone, Copy)]
pub struct Bound {
    pub condition: &'static str,
    pub ideal: f64,
    pub worst: f64,
    /// Compare `|value|` rather than `value`.
    pub magnitude: bool,
    /// Whether the worst limit itself satisfies the condition.
    pub worst_inclusive: bool,
}

const fn open(condition: &'static str, ideal: f64, worst: f64, magnitude: bool) -> Bound {
    Bound {
        condition,
        ideal,
        worst,
        magnitude,
        worst_inclusive: false,
    }
}

pub const INQUISITION: Bound = open("1 >= I > 0", 1.0, 0.0, false);
pub const LOGICAL_VISIBILITY: Bound = open("1 >= |V_L| > 0", 1.0, 0.0, true);
pub const EQUAL_WEIGHT_VISIBILITY: Bound = open("1 >= |V_E(n pi/2)| > 0", 1.0, 0.0, true);
pub const PARITY: Bound = open("1 >= |Pi(n pi/2)| > 0", 1.0, 0.0, true);
pub const BELL_FIDELITY: Bound = open("1 >= F > 1/2", 1.0, 0.5, false);
pub const WITNESS: Bound = open("-1/2 <= <W> < 0", -0.5, 0.0, false);
pub const LINEAR_ENTROPY: Bound = open("0 <= S_L < 1", 0.0, 1.0, false);
pub const TANGLE: Bound = Bound {
    condition: "1 >= T >= 0",
    ideal: 1.0,
    worst: 0.0,
    magnitude: false,
    worst_inclusive: true,
};
pub const BELL_INEQUALITY: Bound = open("2 sqrt(2) >= B > 2", 2.0 * std::f64::consts::SQRT_2, 2.0, false);
pub const GATE_FIDELITY: Bound = open("1 >= F_g > 0", 1.0, 0.0, false);
pub const AVERAGE_GATE_FIDELITY: Bound = open("1 >= F_avg > 0", 1.0, 0.0, false);
pub const ISOMORPHISM_FIDELITY: Bound = open("1 >= F_i > 0", 1.0, 0.0, false);

/// One reported quantity with its bounds.
#[derive(Debug, Clone, Serialize)]
pub struct Indicator {
    pub name: String,
    pub symbol: String,
    pub value: f64,
    pub condition: &'static str,
    pub ideal: f64,
    pub worst: f64,
    pub within_bounds: bool,
    #[serde(skip_serializing_if = "Vec::is_empty")]
    pub settings: Vec<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub note: Option<String>,
}

impl Indicator {
    /// `margin` is how far from the worst limit a value must be to count as past it:
    /// rounding slack for exact data, a few standard errors for sampled data.
    pub fn new(name: &str, symbol: &str, value: f64, bound: Bound, margin: f64) -> Self {
        let v = if bound.magnitude { value.abs() } else { value };
        let (lo, hi) = if bound.ideal < bound.worst {
            (bound.ideal, bound.worst)
        } else {
            (bound.worst, bound.ideal)
        };
        let in_range = v >= lo - margin && v <= hi + margin;
        let past_worst = bound.worst_inclusive || (v - bound.worst).abs() > margin;
        Self {
            name: name.to_string(),
            symbol: symbol.to_string(),
            value,
            condition: bound.condition,
            ideal: bound.ideal,
            worst: bound.worst,
            within_bounds: in_range && past_worst,
            settings: Vec::new(),
            note: None,
        }
    }

    pub fn settings(mut self, settings: &[&str]) -> Self {
        self.settings = settings.iter().map(|s| s.to_string()).collect();
        self
    }

    pub fn note(mut self, note: impl Into<String>) -> Self {
        self.note = Some(note.into());
        self
    }
}

/// Margin for a quantity estimated from `shots` trials per setting, or exact data.
pub fn margin(shots: Option<u64>) -> f64 {
    match shots {
        Some(n) => 4.0 / (n as f64).sqrt(),
        None => 1e-9,
    }
}

pub fn render(indicators: &[Indicator]) -> String {
    let mut out = String::new();
    for i in indicators {
        out.push_str(&format!(
            "  {:<34}{:>12.6}   {:<24}{}\n",
            format!("{} ({})", i.name, i.symbol),
            i.value,
            i.condition,
            if i.within_bounds { "ok" } else { "OUT OF BOUNDS" }
        ));
        if let Some(n) = &i.note {
            out.push_str(&format!("      note: {n}\n"));
        }
    }
    out
}
